//! Benchmark harness and validation suites for the attention-variant
//! library: sweep execution with CSV output, a learnability smoke test,
//! and self-check suites with fault injection.

pub mod benchspec;
pub mod check;
pub mod csv;
pub mod error;
pub mod runner;
pub mod table;
pub mod train;

pub use benchspec::{BenchRecord, BenchSpec, Precision, RunMeta, SkippedCell};
pub use check::{run_check, CheckReport, FaultInjection, Suite};
pub use error::{HarnessError, Result};
pub use runner::{baseline_label, run_bench, BenchOutput};
pub use table::speedup_table;
pub use train::{toy_train, TOY_TRAIN_SEQ_LEN};
