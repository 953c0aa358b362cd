//! End-to-end experiment protocols and their reports.

pub mod data;
pub mod eval;
pub mod opt;
pub mod oracle_check;
pub mod report;
pub mod shift;

pub use data::{load_csv_dataset, parse_csv_dataset, LoadOptions, MulticlassDataset};
pub use eval::{run_eval_protocol, EvalProtocolConfig, EvalReport};
pub use opt::{run_opt_protocol, OptProtocolConfig, OptReport};
pub use oracle_check::{run_oracle_check, OracleCheck};
pub use report::{to_csv, Manifest, ReportRow};
pub use shift::{run_shift_protocol, ShiftReport};

use crate::numeric::exact_mean;

/// Bias, spread and error of a set of estimates around a known truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    /// `mean − truth`.
    pub bias: f64,
    /// Population standard deviation of the estimates.
    pub std: f64,
    /// `sqrt(mean((estimate − truth)²))`.
    pub rmse: f64,
}

impl ErrorSummary {
    pub fn new(estimates: &[f64], truth: f64) -> Self {
        let mean = exact_mean(estimates);
        let var = exact_mean(&estimates.iter().map(|e| (e - mean).powi(2)).collect::<Vec<_>>());
        let mse = exact_mean(&estimates.iter().map(|e| (e - truth).powi(2)).collect::<Vec<_>>());
        ErrorSummary { mean, bias: mean - truth, std: var.sqrt(), rmse: mse.sqrt() }
    }

    /// Like [`ErrorSummary::new`] but each estimate has its own truth; `std`
    /// is then the spread of the errors rather than of the estimates.
    pub fn paired(estimates: &[f64], truths: &[f64]) -> Self {
        assert_eq!(estimates.len(), truths.len());
        let errors: Vec<f64> = estimates.iter().zip(truths).map(|(e, t)| e - t).collect();
        let s = ErrorSummary::new(&errors, 0.0);
        ErrorSummary { mean: exact_mean(estimates), ..s }
    }
}
