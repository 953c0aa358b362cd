//! Covariate-shift protocol: IPS and DR error for each subsample fraction.
//! Each replicate is scored against the mean of its own subsample.

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::harness::report::ReportRow;
use crate::harness::ErrorSummary;
use crate::rng::stream;
use crate::shift::{shift_experiment, synth_population, ShiftConfig, ShiftOutcome, ShiftPopulation};

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    /// Population mean visits.
    pub truth: f64,
    pub fractions: Vec<f64>,
    /// `outcomes[i][r]`: replicate `r` at `fractions[i]`.
    pub outcomes: Vec<Vec<ShiftOutcome>>,
}

impl ShiftReport {
    fn summary(&self, i: usize, pick: impl Fn(&ShiftOutcome) -> f64) -> ErrorSummary {
        let est: Vec<f64> = self.outcomes[i].iter().map(pick).collect();
        let truth: Vec<f64> = self.outcomes[i].iter().map(|o| o.truth).collect();
        ErrorSummary::paired(&est, &truth)
    }

    pub fn ips(&self, i: usize) -> ErrorSummary {
        self.summary(i, |o| o.ips)
    }

    pub fn dr(&self, i: usize) -> ErrorSummary {
        self.summary(i, |o| o.dr)
    }

    pub fn rows(&self, dataset: &str) -> Vec<ReportRow> {
        let mut rows = vec![ReportRow::new(dataset, "population", "truth", self.truth)];
        for (i, f) in self.fractions.iter().enumerate() {
            for (name, s) in [("IPS", self.ips(i)), ("DR", self.dr(i))] {
                rows.push(ReportRow::new(dataset, name, format!("bias_f={f}"), s.bias));
                rows.push(ReportRow::new(dataset, name, format!("std_f={f}"), s.std));
                rows.push(ReportRow::new(dataset, name, format!("rmse_f={f}"), s.rmse));
            }
        }
        rows
    }
}

/// Runs every (fraction, replicate) pair on the given population, or on a
/// synthetic one drawn from `config` when none is given.
pub fn run_shift_protocol(
    config: &ShiftConfig,
    population: Option<ShiftPopulation>,
    exec: Execution,
) -> Result<ShiftReport> {
    config.validate()?;
    let pop = match population {
        Some(p) => p,
        None => synth_population(config, &mut stream(config.seed, "shift-population", 0))?,
    };
    let pop = if config.uniform_sampling {
        let n = pop.len();
        pop.with_sampling_probs(vec![1.0; n])?
    } else {
        pop
    };
    if pop.is_empty() {
        return Err(invalid("empty population"));
    }
    let reps = config.replicates;
    let n_frac = config.fractions.len();
    let flat = exec
        .map(n_frac * reps, |j| {
            let (i, r) = (j / reps, j % reps);
            let mut rng = stream(config.seed, "shift-replicate", j as u64);
            shift_experiment(&pop, config.fractions[i], config.lambda, &mut rng).map(|o| (i, r, o))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut outcomes = vec![Vec::with_capacity(reps); n_frac];
    for (i, _, o) in flat {
        outcomes[i].push(o);
    }
    Ok(ShiftReport { truth: pop.mean_visits(), fractions: config.fractions.clone(), outcomes })
}
