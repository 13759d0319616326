//! Vulnerability classification scheme: vulnerability types, root causes,
//! symptoms, fixing patterns and fixing-effort buckets.
//!
//! Every enum member has a canonical `lower_snake_case` name used by all file
//! formats and reports. Parsing and printing those names is lossless.
//!
//! Three of the dimensions are two-level (category + leaf). A [`Label`] pairs a
//! category with an optional leaf and can only be built when the leaf belongs
//! to the category. The `others` category of each dimension carries no leaf.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Unrecognized canonical name for an enum of the given kind.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

/// Closed enum with canonical names.
pub trait Canonical: Copy + Eq + Ord + fmt::Debug + 'static {
    const KIND: &'static str;
    const ALL: &'static [Self];

    fn as_str(self) -> &'static str;

    fn parse(s: &str) -> Result<Self, UnknownName> {
        Self::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| UnknownName {
                kind: Self::KIND,
                value: s.to_string(),
            })
    }
}

macro_rules! canonical_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal {
            $( $(#[$vmeta:meta])* $variant:ident => $text:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $( $(#[$vmeta])* $variant ),+
        }

        impl Canonical for $name {
            const KIND: &'static str = $kind;
            const ALL: &'static [Self] = &[$( $name::$variant ),+];

            fn as_str(self) -> &'static str {
                match self {
                    $( $name::$variant => $text ),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.pad(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownName;
            fn from_str(s: &str) -> Result<Self, UnknownName> {
                <Self as Canonical>::parse(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

canonical_enum! {
    /// Library a vulnerability was found in.
    Library, "library" {
        TensorFlow => "tensorflow",
        PyTorch => "pytorch",
        ScikitLearn => "scikit_learn",
        Pandas => "pandas",
        Numpy => "numpy",
    }
}

canonical_enum! {
    VulnCategoryKind, "vulnerability category" {
        Numeric => "numeric",
        Memory => "memory",
        Buffer => "buffer",
        Resource => "resource",
        Concurrency => "concurrency",
        Others => "others",
    }
}

canonical_enum! {
    VulnSubcategory, "vulnerability subcategory" {
        IntegerOverflow => "integer_overflow",
        InsufficientPrecision => "insufficient_precision",
        DivisionByZero => "division_by_zero",
        IntegerUnderflow => "integer_underflow",
        MemoryLeak => "memory_leak",
        NullPointerDereference => "null_pointer_dereference",
        InfiniteLoop => "infinite_loop",
        DoubleFree => "double_free",
        UseAfterFree => "use_after_free",
        OutOfBoundRead => "out_of_bound_read",
        StackOverflow => "stack_overflow",
        HeapBufferOverflow => "heap_buffer_overflow",
        BufferOverflow => "buffer_overflow",
        OutOfBoundWrite => "out_of_bound_write",
        UninitializedResource => "uninitialized_resource",
        ImproperInputValidation => "improper_input_validation",
        FileDescriptorLeak => "file_descriptor_leak",
        RaceCondition => "race_condition",
        Deadlock => "deadlock",
    }
}

canonical_enum! {
    RootCauseKind, "root cause category" {
        DataTypeErrors => "data_type_errors",
        MemoryErrors => "memory_errors",
        ApiErrors => "api_errors",
        BusinessLogicErrors => "business_logic_errors",
        ConcurrencyErrors => "concurrency_errors",
        Others => "others",
    }
}

canonical_enum! {
    RootCauseSubcategory, "root cause subcategory" {
        NumericalPrecisionError => "numerical_precision_error",
        TensorPropertyIssue => "tensor_property_issue",
        UsingImproperDataType => "using_improper_data_type",
        IncorrectTypeConversion => "incorrect_type_conversion",
        InvalidMemoryAccess => "invalid_memory_access",
        ImproperMemoryManagement => "improper_memory_management",
        StackOrBufferSizeIssue => "stack_or_buffer_size_issue",
        OutOfBoundRead => "out_of_bound_read",
        UsingWrongApi => "using_wrong_api",
        ApiMisuse => "api_misuse",
        MaliciousParameters => "malicious_parameters",
        ApiVersionIssue => "api_version_issue",
        ImproperExceptionHandling => "improper_exception_handling",
        WrongOrderOfExecution => "wrong_order_of_execution",
        ImproperStringManipulation => "improper_string_manipulation",
        MissingLockingStatement => "missing_locking_statement",
        ImproperResourceLocking => "improper_resource_locking",
        ImproperResourceReleasing => "improper_resource_releasing",
    }
}

canonical_enum! {
    /// Observable effect of a vulnerability.
    Symptom, "symptom" {
        SegmentationFault => "segmentation_fault",
        Crash => "crash",
        UnexpectedBehavior => "unexpected_behavior",
        ResourceConsumption => "resource_consumption",
        Hang => "hang",
        Others => "others",
    }
}

canonical_enum! {
    FixingCategoryKind, "fixing pattern category" {
        AddCheckers => "add_checkers",
        ModifyBusinessLogic => "modify_business_logic",
        ResolveDataTypeErrors => "resolve_data_type_errors",
        ResolveMemoryErrors => "resolve_memory_errors",
        ResolveApiErrors => "resolve_api_errors",
        ResolveConcurrencyErrors => "resolve_concurrency_errors",
        Others => "others",
    }
}

canonical_enum! {
    FixingSubcategory, "fixing pattern subcategory" {
        AddCheckerForTensorsProperty => "add_checker_for_tensors_property",
        AddCheckerForOverflow => "add_checker_for_overflow",
        AddCheckerForNullPointerDereference => "add_checker_for_null_pointer_dereference",
        AddCheckerForRecursion => "add_checker_for_recursion",
        ImprovedExceptionHandling => "improved_exception_handling",
        ModifyingFunctionReturnValue => "modifying_function_return_value",
        ModifyOrderOfExecution => "modify_order_of_execution",
        AvoidStackOverflowOnDeepGraphs => "avoid_stack_overflow_on_deep_graphs",
        ModifyIndexCalculation => "modify_index_calculation",
        CloseFileHandlerToPreventFileLeak => "close_file_handler_to_prevent_file_leak",
        ModifyDataType => "modify_data_type",
        IncreaseIntegerTypeRange => "increase_integer_type_range",
        HandleNumericalPrecision => "handle_numerical_precision",
        ConvertIntegerSign => "convert_integer_sign",
        ManageMemoryRelease => "manage_memory_release",
        ResourceInitialization => "resource_initialization",
        UsingProperApi => "using_proper_api",
        UpdateApiUsage => "update_api_usage",
        UpdateApiVersion => "update_api_version",
        AddLockingMechanism => "add_locking_mechanism",
        ModifyLockingMechanism => "modify_locking_mechanism",
        RemoveLockingMechanism => "remove_locking_mechanism",
    }
}

canonical_enum! {
    /// Fixing effort measured in changed lines.
    EffortBucket, "effort bucket" {
        Micro => "micro",
        Small => "small",
        Medium => "medium",
        Large => "large",
    }
}

/// A two-level taxonomy: every leaf belongs to exactly one category and the
/// catch-all category has no leaves.
pub trait Leaf: Canonical {
    type Category: Canonical;
    const OTHERS: Self::Category;

    fn category(self) -> Self::Category;

    fn leaves_of(category: Self::Category) -> Vec<Self> {
        Self::ALL
            .iter()
            .copied()
            .filter(|l| l.category() == category)
            .collect()
    }
}

impl Leaf for VulnSubcategory {
    type Category = VulnCategoryKind;
    const OTHERS: VulnCategoryKind = VulnCategoryKind::Others;

    fn category(self) -> VulnCategoryKind {
        use VulnCategoryKind as C;
        use VulnSubcategory::*;
        match self {
            IntegerOverflow | InsufficientPrecision | DivisionByZero | IntegerUnderflow => {
                C::Numeric
            }
            MemoryLeak | NullPointerDereference | InfiniteLoop | DoubleFree | UseAfterFree => {
                C::Memory
            }
            OutOfBoundRead | StackOverflow | HeapBufferOverflow | BufferOverflow
            | OutOfBoundWrite => C::Buffer,
            UninitializedResource | ImproperInputValidation | FileDescriptorLeak => C::Resource,
            RaceCondition | Deadlock => C::Concurrency,
        }
    }
}

impl Leaf for RootCauseSubcategory {
    type Category = RootCauseKind;
    const OTHERS: RootCauseKind = RootCauseKind::Others;

    fn category(self) -> RootCauseKind {
        use RootCauseKind as C;
        use RootCauseSubcategory::*;
        match self {
            NumericalPrecisionError
            | TensorPropertyIssue
            | UsingImproperDataType
            | IncorrectTypeConversion => C::DataTypeErrors,
            InvalidMemoryAccess
            | ImproperMemoryManagement
            | StackOrBufferSizeIssue
            | OutOfBoundRead => C::MemoryErrors,
            UsingWrongApi | ApiMisuse | MaliciousParameters | ApiVersionIssue => C::ApiErrors,
            ImproperExceptionHandling | WrongOrderOfExecution | ImproperStringManipulation => {
                C::BusinessLogicErrors
            }
            MissingLockingStatement | ImproperResourceLocking | ImproperResourceReleasing => {
                C::ConcurrencyErrors
            }
        }
    }
}

impl Leaf for FixingSubcategory {
    type Category = FixingCategoryKind;
    const OTHERS: FixingCategoryKind = FixingCategoryKind::Others;

    fn category(self) -> FixingCategoryKind {
        use FixingCategoryKind as C;
        use FixingSubcategory::*;
        match self {
            AddCheckerForTensorsProperty
            | AddCheckerForOverflow
            | AddCheckerForNullPointerDereference
            | AddCheckerForRecursion => C::AddCheckers,
            ImprovedExceptionHandling
            | ModifyingFunctionReturnValue
            | ModifyOrderOfExecution
            | AvoidStackOverflowOnDeepGraphs
            | ModifyIndexCalculation
            | CloseFileHandlerToPreventFileLeak => C::ModifyBusinessLogic,
            ModifyDataType
            | IncreaseIntegerTypeRange
            | HandleNumericalPrecision
            | ConvertIntegerSign => C::ResolveDataTypeErrors,
            ManageMemoryRelease | ResourceInitialization => C::ResolveMemoryErrors,
            UsingProperApi | UpdateApiUsage | UpdateApiVersion => C::ResolveApiErrors,
            AddLockingMechanism | ModifyLockingMechanism | RemoveLockingMechanism => {
                C::ResolveConcurrencyErrors
            }
        }
    }
}

/// Why a (category, subcategory) pair was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("subcategory `{subcategory}` not in category `{category}`")]
    SubcategoryNotInCategory {
        category: &'static str,
        subcategory: &'static str,
    },
    #[error("category `{0}` requires a subcategory")]
    MissingSubcategory(&'static str),
    #[error("category `others` takes no subcategory (got `{0}`)")]
    UnexpectedSubcategory(&'static str),
}

/// A validated (category, leaf) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label<L: Leaf> {
    category: L::Category,
    subcategory: Option<L>,
}

impl<L: Leaf> Label<L> {
    pub fn new(category: L::Category, subcategory: Option<L>) -> Result<Self, LabelError> {
        match subcategory {
            None if category == L::OTHERS => Ok(Self {
                category,
                subcategory: None,
            }),
            None => Err(LabelError::MissingSubcategory(category.as_str())),
            Some(leaf) if category == L::OTHERS => {
                Err(LabelError::UnexpectedSubcategory(leaf.as_str()))
            }
            Some(leaf) if leaf.category() != category => {
                Err(LabelError::SubcategoryNotInCategory {
                    category: category.as_str(),
                    subcategory: leaf.as_str(),
                })
            }
            Some(leaf) => Ok(Self {
                category,
                subcategory: Some(leaf),
            }),
        }
    }

    pub fn leaf(leaf: L) -> Self {
        Self {
            category: leaf.category(),
            subcategory: Some(leaf),
        }
    }

    pub fn others() -> Self {
        Self {
            category: L::OTHERS,
            subcategory: None,
        }
    }

    pub fn category(&self) -> L::Category {
        self.category
    }

    pub fn subcategory(&self) -> Option<L> {
        self.subcategory
    }

    /// Canonical key of the leaf, or `others` for the catch-all category.
    pub fn leaf_key(&self) -> &'static str {
        self.subcategory
            .map(|l| l.as_str())
            .unwrap_or_else(|| L::OTHERS.as_str())
    }
}

impl<L: Leaf> fmt::Display for Label<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subcategory {
            Some(leaf) => write!(f, "{}/{}", self.category.as_str(), leaf.as_str()),
            None => f.write_str(self.category.as_str()),
        }
    }
}

pub type VulnCategory = Label<VulnSubcategory>;
pub type RootCause = Label<RootCauseSubcategory>;
pub type FixingPattern = Label<FixingSubcategory>;

/// CWE identifier, printed as `CWE-<n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cwe(pub u32);

impl fmt::Display for Cwe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CWE-{}", self.0)
    }
}

impl VulnSubcategory {
    pub fn cwe(self) -> Cwe {
        use VulnSubcategory::*;
        Cwe(match self {
            IntegerOverflow => 190,
            InsufficientPrecision => 1339,
            DivisionByZero => 369,
            IntegerUnderflow => 191,
            MemoryLeak => 401,
            NullPointerDereference => 476,
            InfiniteLoop => 835,
            DoubleFree => 415,
            UseAfterFree => 416,
            OutOfBoundRead => 125,
            StackOverflow => 121,
            HeapBufferOverflow => 122,
            BufferOverflow => 120,
            OutOfBoundWrite => 787,
            UninitializedResource => 908,
            ImproperInputValidation => 20,
            FileDescriptorLeak => 403,
            RaceCondition => 362,
            Deadlock => 833,
        })
    }
}

/// CWE carried by a vulnerability type; `others` has none.
pub fn cwe_of(vc: &VulnCategory) -> Option<Cwe> {
    vc.subcategory().map(VulnSubcategory::cwe)
}

/// Inclusive upper bounds of the micro, small and medium buckets; anything
/// above the last bound is large.
pub const EFFORT_BOUNDS: [(EffortBucket, u64); 3] = [
    (EffortBucket::Micro, 10),
    (EffortBucket::Small, 50),
    (EffortBucket::Medium, 200),
];

pub fn classify_effort(added: u64, deleted: u64) -> EffortBucket {
    let total = added.saturating_add(deleted);
    EFFORT_BOUNDS
        .iter()
        .find(|(_, upper)| total <= *upper)
        .map(|(bucket, _)| *bucket)
        .unwrap_or(EffortBucket::Large)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Canonical + FromStr<Err = UnknownName>>() {
        for v in T::ALL {
            assert_eq!(v.as_str().parse::<T>().unwrap(), *v);
            let name = v.as_str();
            assert!(name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'));
        }
    }

    #[test]
    fn canonical_names_round_trip() {
        roundtrip::<Library>();
        roundtrip::<VulnCategoryKind>();
        roundtrip::<VulnSubcategory>();
        roundtrip::<RootCauseKind>();
        roundtrip::<RootCauseSubcategory>();
        roundtrip::<Symptom>();
        roundtrip::<FixingCategoryKind>();
        roundtrip::<FixingSubcategory>();
        roundtrip::<EffortBucket>();
    }

    #[test]
    fn taxonomy_sizes() {
        assert_eq!(VulnSubcategory::ALL.len(), 19);
        assert_eq!(RootCauseSubcategory::ALL.len(), 18);
        assert_eq!(FixingSubcategory::ALL.len(), 22);
        assert_eq!(Symptom::ALL.len(), 6);
        assert_eq!(EffortBucket::ALL.len(), 4);
    }

    fn partition<L: Leaf>() {
        let mut seen = 0;
        for cat in L::Category::ALL {
            let leaves = L::leaves_of(*cat);
            if *cat == L::OTHERS {
                assert!(leaves.is_empty());
            } else {
                assert!(!leaves.is_empty(), "{cat:?} has no leaves");
            }
            seen += leaves.len();
        }
        assert_eq!(seen, L::ALL.len());
    }

    #[test]
    fn leaves_partition_categories() {
        partition::<VulnSubcategory>();
        partition::<RootCauseSubcategory>();
        partition::<FixingSubcategory>();
    }

    #[test]
    fn numeric_leaves() {
        assert_eq!(
            VulnSubcategory::leaves_of(VulnCategoryKind::Numeric),
            vec![
                VulnSubcategory::IntegerOverflow,
                VulnSubcategory::InsufficientPrecision,
                VulnSubcategory::DivisionByZero,
                VulnSubcategory::IntegerUnderflow,
            ]
        );
    }

    #[test]
    fn effort_examples() {
        assert_eq!(classify_effort(0, 0), EffortBucket::Micro);
        assert_eq!(classify_effort(150, 100), EffortBucket::Large);
        assert_eq!(classify_effort(20, 15), EffortBucket::Small);
    }

    #[test]
    fn effort_boundaries() {
        assert_eq!(classify_effort(10, 0), EffortBucket::Micro);
        assert_eq!(classify_effort(6, 5), EffortBucket::Small);
        assert_eq!(classify_effort(50, 0), EffortBucket::Small);
        assert_eq!(classify_effort(51, 0), EffortBucket::Medium);
        assert_eq!(classify_effort(100, 100), EffortBucket::Medium);
        assert_eq!(classify_effort(200, 1), EffortBucket::Large);
        assert_eq!(classify_effort(u64::MAX, u64::MAX), EffortBucket::Large);
    }

    #[test]
    fn cwe_examples() {
        let io = VulnCategory::leaf(VulnSubcategory::IntegerOverflow);
        assert_eq!(cwe_of(&io), Some(Cwe(190)));
        let leak = VulnCategory::leaf(VulnSubcategory::MemoryLeak);
        assert_eq!(cwe_of(&leak), Some(Cwe(401)));
        assert_eq!(cwe_of(&VulnCategory::others()), None);
        assert_eq!(Cwe(476).to_string(), "CWE-476");
    }

    #[test]
    fn named_cwes() {
        use VulnSubcategory::*;
        assert_eq!(NullPointerDereference.cwe(), Cwe(476));
        assert_eq!(OutOfBoundRead.cwe(), Cwe(125));
        assert_eq!(RaceCondition.cwe(), Cwe(362));
        assert_eq!(Deadlock.cwe(), Cwe(833));
        assert_eq!(ImproperInputValidation.cwe(), Cwe(20));
    }

    #[test]
    fn label_validation() {
        use VulnCategoryKind as C;
        assert!(VulnCategory::new(C::Numeric, Some(VulnSubcategory::IntegerOverflow)).is_ok());
        let err = VulnCategory::new(C::Numeric, Some(VulnSubcategory::MemoryLeak)).unwrap_err();
        assert!(err.to_string().contains("subcategory"));
        assert!(err.to_string().contains("not in category"));
        assert_eq!(
            VulnCategory::new(C::Memory, None),
            Err(LabelError::MissingSubcategory("memory"))
        );
        assert!(VulnCategory::new(C::Others, Some(VulnSubcategory::Deadlock)).is_err());
        assert_eq!(
            VulnCategory::new(C::Others, None).unwrap().leaf_key(),
            "others"
        );
    }

    proptest::proptest! {
        #[test]
        fn effort_is_monotone(a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000) {
            let (x, y) = (a + b, c + d);
            let (bx, by) = (classify_effort(a, b), classify_effort(c, d));
            if x <= y {
                proptest::prop_assert!(bx <= by);
            }
            if x > 200 {
                proptest::prop_assert_eq!(bx, EffortBucket::Large);
            }
        }
    }
}
