//! Policy-evaluation protocol on multiclass data.
//!
//! One split into train and test halves. A DLM policy is trained on the
//! fully labeled training half and its error on the fully labeled test half
//! is the ground truth. Each replicate reveals one uniformly chosen loss per
//! test example and estimates the policy's error with DM, IPS and DR, using
//! a ridge loss model fit on the fully labeled training half.

use crate::bandit::{reveal_dataset, to_cost_sensitive};
use crate::error::{invalid, Result};
use crate::estimators::{estimate, estimate_dm, EstimatorKind, EstimatorOptions};
use crate::exec::Execution;
use crate::harness::data::{split_indices, MulticlassDataset};
use crate::harness::report::ReportRow;
use crate::harness::ErrorSummary;
use crate::learners::dlm::{dlm_train, DlmConfig};
use crate::models::fit_ridge_full_information;
use crate::rng::stream;
use crate::types::{true_policy_value, CostVectorExample, Policy};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalProtocolConfig {
    pub replicates: usize,
    pub train_fraction: f64,
    pub lambda: f64,
    pub seed: u64,
    pub propensity_floor: Option<f64>,
    pub dlm: DlmConfig,
    pub execution: Execution,
}

impl Default for EvalProtocolConfig {
    fn default() -> Self {
        EvalProtocolConfig {
            replicates: 500,
            train_fraction: 0.5,
            lambda: 1.0,
            seed: 0,
            propensity_floor: None,
            dlm: DlmConfig::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub truth: f64,
    pub policy: Policy,
    /// Summaries in DM, IPS, DR order.
    pub summaries: Vec<(EstimatorKind, ErrorSummary)>,
    /// `estimates[r]` holds the DM, IPS and DR estimates of replicate `r`.
    pub estimates: Vec<[f64; 3]>,
}

impl EvalReport {
    pub fn summary(&self, kind: EstimatorKind) -> ErrorSummary {
        self.summaries.iter().find(|(k, _)| *k == kind).expect("all estimators are summarized").1
    }

    pub fn rows(&self, dataset: &str, per_replicate: bool) -> Vec<ReportRow> {
        let mut rows = vec![ReportRow::new(dataset, "policy", "truth", self.truth)];
        for (kind, s) in &self.summaries {
            let name = kind.to_string();
            rows.push(ReportRow::new(dataset, &name, "mean", s.mean));
            rows.push(ReportRow::new(dataset, &name, "bias", s.bias));
            rows.push(ReportRow::new(dataset, &name, "std", s.std));
            rows.push(ReportRow::new(dataset, &name, "rmse", s.rmse));
        }
        if per_replicate {
            for (r, est) in self.estimates.iter().enumerate() {
                for (kind, v) in EstimatorKind::ALL.iter().zip(est) {
                    rows.push(ReportRow::new(dataset, kind.to_string(), format!("estimate_{r}"), *v));
                }
            }
        }
        rows
    }
}

fn pick(all: &[CostVectorExample], idx: &[usize]) -> Vec<CostVectorExample> {
    idx.iter().map(|&i| all[i].clone()).collect()
}

pub fn run_eval_protocol(data: &MulticlassDataset, config: &EvalProtocolConfig) -> Result<EvalReport> {
    let k = data.num_classes;
    if k == 0 || data.len() < 2 * k.max(1) || data.len() < 2 {
        return Err(invalid(format!("need at least 2k = {} examples, found {}", 2 * k, data.len())));
    }
    if config.replicates == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let seed = config.seed;
    let costs = data.examples.iter().map(|e| to_cost_sensitive(e, k)).collect::<Result<Vec<_>>>()?;
    let (train_idx, test_idx) = split_indices(costs.len(), config.train_fraction, &mut stream(seed, "eval-split", 0))?;
    let train = pick(&costs, &train_idx);
    let test = pick(&costs, &test_idx);

    let policy = dlm_train(&train, &config.dlm, &mut stream(seed, "eval-dlm", 0))?;
    let truth = true_policy_value(&test, &policy)?;
    let model = fit_ridge_full_information(&train, config.lambda)?;
    let dm = estimate_dm(&test, &model, &policy)?.value;

    let opts = EstimatorOptions { propensity_floor: config.propensity_floor, execution: Execution::Sequential };
    let estimates = config
        .execution
        .map(config.replicates, |r| -> Result<[f64; 3]> {
            let logged = reveal_dataset(&test, &mut stream(seed, "eval-reveal", r as u64))?;
            let ips = estimate(EstimatorKind::Ips, &logged, None, &policy, opts)?.value;
            let dr = estimate(EstimatorKind::Dr, &logged, Some(&model), &policy, opts)?.value;
            Ok([dm, ips, dr])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let summaries = EstimatorKind::ALL
        .iter()
        .enumerate()
        .map(|(j, &kind)| {
            let col: Vec<f64> = estimates.iter().map(|e| e[j]).collect();
            (kind, ErrorSummary::new(&col, truth))
        })
        .collect();
    Ok(EvalReport { truth, policy, summaries, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Context, MulticlassExample};

    fn quick() -> EvalProtocolConfig {
        EvalProtocolConfig {
            replicates: 20,
            dlm: DlmConfig { restarts: 2, max_iterations: 50, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn single_class_is_estimated_exactly() {
        let examples = (0..10)
            .map(|i| MulticlassExample { context: Context::new(vec![i as f64, 1.0]).unwrap(), label: 0 })
            .collect();
        let data = MulticlassDataset { examples, num_classes: 1 };
        let report = run_eval_protocol(&data, &quick()).unwrap();
        assert_eq!(report.truth, 0.0);
        for kind in [EstimatorKind::Ips, EstimatorKind::Dr] {
            let s = report.summary(kind);
            assert_eq!((s.bias, s.rmse), (0.0, 0.0));
        }
        assert!(report.summary(EstimatorKind::Dm).rmse.abs() < 1e-12);
    }

    #[test]
    fn linear_losses_make_dm_unbiased() {
        // One-hot class indicator features: the 0/1 loss of every action is
        // exactly linear in the context.
        let k = 3;
        let examples = (0..60)
            .map(|i| {
                let label = i % k;
                let mut x = vec![0.0; k];
                x[label] = 1.0;
                MulticlassExample { context: Context::new(x).unwrap(), label }
            })
            .collect();
        let data = MulticlassDataset { examples, num_classes: k };
        let config = EvalProtocolConfig { lambda: 1e-9, ..quick() };
        let report = run_eval_protocol(&data, &config).unwrap();
        assert!(report.summary(EstimatorKind::Dm).bias.abs() <= 1e-6);
    }

    #[test]
    fn too_small_is_an_error() {
        let examples =
            (0..3).map(|i| MulticlassExample { context: Context::new(vec![1.0]).unwrap(), label: i }).collect();
        assert!(run_eval_protocol(&MulticlassDataset { examples, num_classes: 3 }, &quick()).is_err());
    }
}
