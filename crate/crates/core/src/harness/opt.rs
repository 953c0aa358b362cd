//! Policy-optimization protocol on multiclass data.
//!
//! Each run splits the data 70/30, reveals one uniformly chosen loss per
//! training example, fits a ridge loss model on the revealed entries only,
//! imputes full cost vectors with IPS and DR, trains each learner on each
//! imputed set and measures the learned policy's error on the fully labeled
//! test part.

use crate::bandit::{impute_costs, reveal_dataset, to_cost_sensitive, Imputation};
use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::harness::data::{split_indices, MulticlassDataset};
use crate::harness::report::ReportRow;
use crate::learners::dlm::{dlm_train, DlmConfig};
use crate::learners::filter_tree::filter_tree_train_with;
use crate::learners::tree::BinaryTreeConfig;
use crate::learners::LearnerKind;
use crate::models::fit_ridge_per_action;
use crate::numeric::{exact_mean, mean_and_variance};
use crate::rng::stream;
use crate::types::{true_policy_value, CostVectorExample};

#[derive(Debug, Clone, PartialEq)]
pub struct OptProtocolConfig {
    pub runs: usize,
    pub train_fraction: f64,
    pub lambda: f64,
    pub imputations: Vec<Imputation>,
    pub learners: Vec<LearnerKind>,
    pub seed: u64,
    pub dlm: DlmConfig,
    pub tree: BinaryTreeConfig,
    /// Train on the true cost vectors instead of revealed-and-imputed ones.
    pub full_information: bool,
    pub execution: Execution,
}

impl Default for OptProtocolConfig {
    fn default() -> Self {
        OptProtocolConfig {
            runs: 30,
            train_fraction: 0.7,
            lambda: 1.0,
            imputations: Imputation::ALL.to_vec(),
            learners: LearnerKind::ALL.to_vec(),
            seed: 0,
            dlm: DlmConfig::default(),
            tree: BinaryTreeConfig::default(),
            full_information: false,
            execution: Execution::default(),
        }
    }
}

/// Paired one-sided sign test of "DR-imputed beats IPS-imputed".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub dr_wins: usize,
    pub ips_wins: usize,
    pub ties: usize,
    /// `P(Bin(dr_wins + ips_wins, 1/2) ≥ dr_wins)`; ties are dropped.
    pub p_value: f64,
}

impl SignTest {
    pub fn new(dr: &[f64], ips: &[f64]) -> Self {
        let mut t = SignTest { dr_wins: 0, ips_wins: 0, ties: 0, p_value: 1.0 };
        for (d, i) in dr.iter().zip(ips) {
            match d.partial_cmp(i) {
                Some(std::cmp::Ordering::Less) => t.dr_wins += 1,
                Some(std::cmp::Ordering::Greater) => t.ips_wins += 1,
                _ => t.ties += 1,
            }
        }
        t.p_value = binomial_upper_tail(t.dr_wins + t.ips_wins, t.dr_wins);
        t
    }
}

/// `P(X ≥ s)` for `X ~ Bin(n, 1/2)`.
pub fn binomial_upper_tail(n: usize, s: usize) -> f64 {
    if s == 0 {
        return 1.0;
    }
    // log C(n, i) accumulated incrementally
    let ln2 = std::f64::consts::LN_2;
    let mut log_c = 0.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        if i >= s {
            total += (log_c - n as f64 * ln2).exp();
        }
    }
    total.min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptReport {
    /// `(imputation, learner)` pairs in the order errors are stored.
    pub cells: Vec<(Imputation, LearnerKind)>,
    /// `errors[run][cell]`: test error of the learned policy.
    pub errors: Vec<Vec<f64>>,
}

impl OptReport {
    pub fn errors_for(&self, imputation: Imputation, learner: LearnerKind) -> Option<Vec<f64>> {
        let j = self.cells.iter().position(|&c| c == (imputation, learner))?;
        Some(self.errors.iter().map(|run| run[j]).collect())
    }

    pub fn mean_error(&self, imputation: Imputation, learner: LearnerKind) -> Option<f64> {
        self.errors_for(imputation, learner).map(|e| exact_mean(&e))
    }

    pub fn sign_test(&self, learner: LearnerKind) -> Option<SignTest> {
        let dr = self.errors_for(Imputation::Dr, learner)?;
        let ips = self.errors_for(Imputation::Ips, learner)?;
        Some(SignTest::new(&dr, &ips))
    }

    pub fn rows(&self, dataset: &str, per_run: bool) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for (j, (imp, learner)) in self.cells.iter().enumerate() {
            let name = format!("{learner}/{imp}");
            let col: Vec<f64> = self.errors.iter().map(|run| run[j]).collect();
            let (mean, var) = mean_and_variance(&col);
            rows.push(ReportRow::new(dataset, &name, "mean_test_error", mean));
            rows.push(ReportRow::new(dataset, &name, "std_test_error", var.sqrt()));
            if per_run {
                for (r, e) in col.iter().enumerate() {
                    rows.push(ReportRow::new(dataset, &name, format!("test_error_{r}"), *e));
                }
            }
        }
        let mut learners: Vec<LearnerKind> = Vec::new();
        for &(_, l) in &self.cells {
            if !learners.contains(&l) {
                learners.push(l);
            }
        }
        for learner in learners {
            if let Some(t) = self.sign_test(learner) {
                let name = learner.to_string();
                rows.push(ReportRow::new(dataset, &name, "dr_wins", t.dr_wins as f64));
                rows.push(ReportRow::new(dataset, &name, "ips_wins", t.ips_wins as f64));
                rows.push(ReportRow::new(dataset, &name, "ties", t.ties as f64));
                rows.push(ReportRow::new(dataset, &name, "sign_test_p", t.p_value));
            }
        }
        rows
    }
}

fn pick(all: &[CostVectorExample], idx: &[usize]) -> Vec<CostVectorExample> {
    idx.iter().map(|&i| all[i].clone()).collect()
}

fn one_run(costs: &[CostVectorExample], k: usize, config: &OptProtocolConfig, run: usize) -> Result<Vec<f64>> {
    let seed = config.seed;
    let r = run as u64;
    let (train_idx, test_idx) = split_indices(costs.len(), config.train_fraction, &mut stream(seed, "opt-split", r))?;
    let train = pick(costs, &train_idx);
    let test = pick(costs, &test_idx);
    let mut imputed = Vec::with_capacity(config.imputations.len());
    if config.full_information {
        imputed.resize(config.imputations.len(), train);
    } else {
        let logged = reveal_dataset(&train, &mut stream(seed, "opt-reveal", r))?;
        let model = fit_ridge_per_action(&logged, config.lambda)?;
        for &imp in &config.imputations {
            imputed.push(impute_costs(logged.records(), k, imp, Some(&model))?);
        }
    }
    let inner = Execution::Sequential;
    let mut errors = Vec::new();
    for set in &imputed {
        for &learner in &config.learners {
            let err = match learner {
                LearnerKind::Dlm => {
                    let dlm = DlmConfig { execution: inner, ..config.dlm };
                    let policy = dlm_train(set, &dlm, &mut stream(seed, "opt-dlm", r))?;
                    true_policy_value(&test, &policy)?
                }
                LearnerKind::FilterTree => {
                    let model = filter_tree_train_with(set, &config.tree, inner)?;
                    true_policy_value(&test, &model)?
                }
            };
            errors.push(err);
        }
    }
    Ok(errors)
}

pub fn run_opt_protocol(data: &MulticlassDataset, config: &OptProtocolConfig) -> Result<OptReport> {
    let k = data.num_classes;
    if data.len() < 2 * k || k < 2 {
        return Err(invalid(format!("need k >= 2 and at least 2k = {} examples, found {}", 2 * k, data.len())));
    }
    if config.runs == 0 || config.imputations.is_empty() || config.learners.is_empty() {
        return Err(invalid("need at least one run, imputation and learner"));
    }
    let costs = data.examples.iter().map(|e| to_cost_sensitive(e, k)).collect::<Result<Vec<_>>>()?;
    let errors = config
        .execution
        .map(config.runs, |run| one_run(&costs, k, config, run))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let cells = config.imputations.iter().flat_map(|&imp| config.learners.iter().map(move |&l| (imp, l))).collect();
    Ok(OptReport { cells, errors })
}
