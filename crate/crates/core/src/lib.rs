//! Security-aware mutation testing: mutation operators that undo common
//! vulnerability fixes, a corpus scanner, a crash-safe mutant store and the
//! build/test loop that classifies each mutant, plus the vulnerability
//! taxonomy, dataset statistics and commit-mining heuristics they derive from.

pub mod catalog;
pub mod dataset;
pub mod engine;
pub mod miner;
pub mod report;
pub mod scanner;
pub mod store;
pub mod taxonomy;
mod textbytes;
