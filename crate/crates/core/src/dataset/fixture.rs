//! Deterministic construction of the bundled 596-record dataset.
//!
//! Only marginals are known for the study's data: per-library counts for each
//! dimension, per-library subcategory counts for some categories, and the
//! root cause × effort matrix. The builder lays out each dimension's labels
//! per library in taxonomy order and zips the columns together. Categories
//! whose subcategory split is unknown are filled round-robin over their
//! leaves in taxonomy order.

use sha2::{Digest, Sha256};

use super::VulnRecord;
use crate::taxonomy::{
    Canonical, EffortBucket, FixingCategoryKind as F, FixingPattern, FixingSubcategory as FS,
    Label, Leaf, Library, RootCause, RootCauseKind as R, RootCauseSubcategory as RS, Symptom,
    VulnCategory, VulnCategoryKind as V, VulnSubcategory as VS,
};

/// Column order of every per-library table below.
pub const LIBRARIES: [Library; 5] = [
    Library::TensorFlow,
    Library::PyTorch,
    Library::ScikitLearn,
    Library::Pandas,
    Library::Numpy,
];

pub const LIBRARY_TOTALS: [usize; 5] = [250, 75, 37, 84, 150];

const VULN_CATEGORIES: [(V, [usize; 5]); 6] = [
    (V::Numeric, [70, 27, 22, 41, 24]),
    (V::Memory, [52, 16, 10, 15, 86]),
    (V::Buffer, [49, 12, 1, 12, 15]),
    (V::Resource, [27, 13, 0, 13, 13]),
    (V::Concurrency, [39, 2, 1, 0, 4]),
    (V::Others, [13, 5, 3, 3, 8]),
];

const VULN_LEAVES: [(VS, [usize; 5]); 9] = [
    (VS::IntegerOverflow, [63, 18, 8, 34, 12]),
    (VS::InsufficientPrecision, [4, 6, 4, 3, 10]),
    (VS::DivisionByZero, [2, 3, 7, 3, 2]),
    (VS::IntegerUnderflow, [1, 0, 3, 1, 0]),
    (VS::MemoryLeak, [6, 2, 8, 5, 65]),
    (VS::NullPointerDereference, [25, 7, 0, 6, 10]),
    (VS::InfiniteLoop, [19, 5, 2, 3, 5]),
    (VS::DoubleFree, [1, 2, 0, 1, 2]),
    (VS::UseAfterFree, [1, 0, 0, 0, 4]),
];

const ROOT_CAUSES: [(R, [usize; 5]); 6] = [
    (R::DataTypeErrors, [100, 35, 14, 36, 28]),
    (R::MemoryErrors, [57, 19, 7, 15, 78]),
    (R::ApiErrors, [14, 5, 8, 15, 26]),
    (R::BusinessLogicErrors, [27, 9, 8, 6, 8]),
    (R::ConcurrencyErrors, [27, 3, 0, 0, 3]),
    (R::Others, [25, 4, 0, 12, 7]),
];

const ROOT_CAUSE_LEAVES: [(RS, [usize; 5]); 12] = [
    (RS::NumericalPrecisionError, [34, 17, 12, 21, 10]),
    (RS::TensorPropertyIssue, [47, 11, 0, 2, 13]),
    (RS::UsingImproperDataType, [13, 5, 1, 4, 1]),
    (RS::IncorrectTypeConversion, [6, 2, 1, 9, 4]),
    (RS::InvalidMemoryAccess, [41, 17, 0, 8, 13]),
    (RS::ImproperMemoryManagement, [4, 1, 6, 3, 58]),
    (RS::StackOrBufferSizeIssue, [7, 1, 0, 1, 4]),
    (RS::OutOfBoundRead, [5, 0, 1, 3, 3]),
    (RS::UsingWrongApi, [3, 2, 2, 3, 11]),
    (RS::ApiMisuse, [3, 1, 3, 4, 9]),
    (RS::MaliciousParameters, [3, 1, 3, 7, 4]),
    (RS::ApiVersionIssue, [5, 1, 0, 1, 2]),
];

const SYMPTOMS: [(Symptom, [usize; 5]); 6] = [
    (Symptom::SegmentationFault, [69, 30, 0, 26, 37]),
    (Symptom::Crash, [73, 18, 10, 16, 16]),
    (Symptom::UnexpectedBehavior, [47, 18, 17, 27, 18]),
    (Symptom::ResourceConsumption, [32, 2, 7, 5, 70]),
    (Symptom::Hang, [29, 6, 2, 2, 5]),
    (Symptom::Others, [0, 1, 1, 8, 4]),
];

const FIXING_CATEGORIES: [(F, [usize; 5]); 7] = [
    (F::AddCheckers, [96, 24, 6, 18, 32]),
    (F::ModifyBusinessLogic, [27, 17, 12, 34, 17]),
    (F::ResolveDataTypeErrors, [44, 18, 8, 16, 10]),
    (F::ResolveMemoryErrors, [6, 2, 4, 4, 58]),
    (F::ResolveApiErrors, [13, 5, 7, 8, 23]),
    (F::ResolveConcurrencyErrors, [20, 3, 0, 0, 3]),
    (F::Others, [44, 6, 0, 4, 7]),
];

const FIXING_LEAVES: [(FS, [usize; 5]); 4] = [
    (FS::AddCheckerForTensorsProperty, [67, 13, 1, 7, 14]),
    (FS::AddCheckerForOverflow, [13, 7, 4, 10, 1]),
    (FS::AddCheckerForNullPointerDereference, [16, 3, 1, 1, 13]),
    (FS::AddCheckerForRecursion, [0, 1, 0, 0, 4]),
];

/// Micro, small, medium, large counts per root-cause category.
const EFFORT_BY_ROOT_CAUSE: [(R, [usize; 4]); 6] = [
    (R::DataTypeErrors, [61, 89, 46, 17]),
    (R::MemoryErrors, [72, 70, 26, 8]),
    (R::ApiErrors, [20, 37, 7, 4]),
    (R::BusinessLogicErrors, [19, 21, 14, 4]),
    (R::Others, [15, 13, 14, 6]),
    (R::ConcurrencyErrors, [14, 10, 4, 5]),
];

/// [`synthetic_dataset`] written out as CSV.
pub const BUNDLED_CSV: &str = include_str!("../../fixtures/vulns.csv");

/// Number of TensorFlow records that carry a CVE id.
pub const TENSORFLOW_CVES: usize = 36;

/// Labels of one two-level dimension for one library, in taxonomy order.
fn column<L: Leaf>(
    lib: usize,
    categories: &[(L::Category, [usize; 5])],
    leaves: &[(L, [usize; 5])],
) -> Vec<Label<L>> {
    let mut out = Vec::new();
    for (cat, counts) in categories {
        let n = counts[lib];
        if *cat == L::OTHERS {
            out.extend(std::iter::repeat_n(Label::others(), n));
            continue;
        }
        let known: Vec<(L, usize)> = leaves
            .iter()
            .filter(|(l, _)| l.category() == *cat)
            .map(|(l, c)| (*l, c[lib]))
            .collect();
        if known.is_empty() {
            let all = L::leaves_of(*cat);
            out.extend((0..n).map(|i| Label::leaf(all[i % all.len()])));
        } else {
            let sum: usize = known.iter().map(|(_, c)| c).sum();
            assert_eq!(sum, n, "leaf counts disagree with {cat:?}");
            for (leaf, c) in known {
                out.extend(std::iter::repeat_n(Label::leaf(leaf), c));
            }
        }
    }
    out
}

fn line_counts(bucket: EffortBucket, k: u64) -> (u64, u64) {
    match bucket {
        EffortBucket::Micro => (1 + k % 6, k % 4),
        EffortBucket::Small => (8 + k % 25, 3 + k % 15),
        EffortBucket::Medium => (40 + k % 100, 11 + k % 50),
        EffortBucket::Large => (150 + k % 300, 51 + k % 100),
    }
}

fn commit_id(record_id: &str) -> String {
    let digest = Sha256::digest(format!("mutforge-fixture:{record_id}").as_bytes());
    hex::encode(digest)[..40].to_string()
}

/// Builds the bundled dataset. Deterministic.
pub fn synthetic_dataset() -> Vec<VulnRecord> {
    let mut records = Vec::new();
    for (lib, library) in LIBRARIES.iter().enumerate() {
        let n = LIBRARY_TOTALS[lib];
        let vulns: Vec<VulnCategory> = column(lib, &VULN_CATEGORIES, &VULN_LEAVES);
        let causes: Vec<RootCause> = column(lib, &ROOT_CAUSES, &ROOT_CAUSE_LEAVES);
        let fixes: Vec<FixingPattern> = column(lib, &FIXING_CATEGORIES, &FIXING_LEAVES);
        let symptoms: Vec<Symptom> = SYMPTOMS
            .iter()
            .flat_map(|(s, c)| std::iter::repeat_n(*s, c[lib]))
            .collect();
        for col in [vulns.len(), causes.len(), fixes.len(), symptoms.len()] {
            assert_eq!(col, n, "column length for {library}");
        }
        for i in 0..n {
            let id = format!("{}-{:04}", library.as_str(), i + 1);
            let cve_ids = if *library == Library::TensorFlow && i < TENSORFLOW_CVES {
                vec![format!("CVE-2021-{}", 90001 + i)]
            } else {
                Vec::new()
            };
            records.push(VulnRecord {
                commit_ids: vec![commit_id(&id)],
                id,
                library: *library,
                vuln: vulns[i],
                root_cause: causes[i],
                symptom: symptoms[i],
                fixing: fixes[i],
                added_lines: 0,
                deleted_lines: 0,
                cve_ids,
            });
        }
    }

    // Effort is only known per root cause, across libraries.
    let mut queues: Vec<(R, Vec<EffortBucket>)> = EFFORT_BY_ROOT_CAUSE
        .iter()
        .map(|(rc, counts)| {
            let seq = EffortBucket::ALL
                .iter()
                .zip(counts)
                .flat_map(|(b, c)| std::iter::repeat_n(*b, *c))
                .rev()
                .collect();
            (*rc, seq)
        })
        .collect();
    for (k, rec) in records.iter_mut().enumerate() {
        let queue = queues
            .iter_mut()
            .find(|(rc, _)| *rc == rec.root_cause.category())
            .map(|(_, q)| q)
            .expect("every root cause has an effort row");
        let bucket = queue.pop().expect("effort row matches root cause total");
        let (added, deleted) = line_counts(bucket, k as u64);
        rec.added_lines = added;
        rec.deleted_lines = deleted;
    }
    debug_assert!(queues.iter().all(|(_, q)| q.is_empty()));
    records
}
