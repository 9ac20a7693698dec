//! Pseudo-label diagnostics, run records, and sweeps.

mod pr;
mod record;
mod sweep;

pub use pr::{fmt_metric, ood_inclusion, pseudo_pr, ClassGroups, Group, PrCell, PrCounts, PrTable};
pub use record::{export, import, read_records, write_records, RunRecord, RunSummary, RECORD_HEADER};
pub use sweep::{is_reference_default, mean_std, threshold_sweep, SweepRow, SweepStat, SweepTable, SWEEPABLE};
