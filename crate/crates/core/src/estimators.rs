//! Direct Method, Inverse Propensity Score and Doubly Robust estimates of a
//! policy's value from logged bandit data.
//!
//! All three are means of per-record terms; the report keeps the terms so
//! callers can audit or re-aggregate them. Terms are computed in parallel
//! and summed exactly, so the value does not depend on scheduling.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::models::PayoffModel;
use crate::numeric::exact_sum;
use crate::types::{ActionPolicy, Context, LoggedDataset, LoggedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Dm,
    Ips,
    Dr,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Dm, EstimatorKind::Ips, EstimatorKind::Dr];
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Dm => "DM",
            EstimatorKind::Ips => "IPS",
            EstimatorKind::Dr => "DR",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dm" => Ok(EstimatorKind::Dm),
            "ips" => Ok(EstimatorKind::Ips),
            "dr" => Ok(EstimatorKind::Dr),
            other => Err(invalid(format!("unknown estimator '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub value: f64,
    pub terms: Vec<f64>,
}

impl EstimateReport {
    fn from_terms(terms: Vec<f64>) -> Self {
        let value = exact_sum(terms.iter().copied()) / terms.len() as f64;
        EstimateReport { value, terms }
    }

    pub fn n(&self) -> usize {
        self.terms.len()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimatorOptions {
    /// Lower bound applied to logged propensities. Off by default: clipping
    /// changes the estimator's bias.
    pub propensity_floor: Option<f64>,
    pub execution: Execution,
}

fn effective_propensity(record: &LoggedRecord, floor: Option<f64>) -> Result<f64> {
    let p = record.propensity;
    if !(p > 0.0) {
        return Err(Error::InvalidPropensity(p));
    }
    Ok(match floor {
        Some(f) => p.max(f),
        None => p,
    })
}

fn check_model(model: &PayoffModel, k: usize, d: usize) -> Result<()> {
    if model.num_actions() != k {
        return Err(Error::DimensionMismatch { expected: k, actual: model.num_actions() });
    }
    if model.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: model.dim() });
    }
    Ok(())
}

/// `(r_a − ρ̂_a(x))·I(π(x)=a)/p̂ + ρ̂_{π(x)}(x)` for one record.
pub fn dr_term<P: ActionPolicy + ?Sized>(record: &LoggedRecord, model: &PayoffModel, policy: &P) -> Result<f64> {
    dr_term_with(record, model, policy, None)
}

fn dr_term_with<P: ActionPolicy + ?Sized>(
    record: &LoggedRecord,
    model: &PayoffModel,
    policy: &P,
    floor: Option<f64>,
) -> Result<f64> {
    let p = effective_propensity(record, floor)?;
    let chosen = policy.choose(&record.context)?;
    let baseline = model.predict(&record.context, chosen)?;
    if chosen == record.action {
        let residual = record.payoff - model.predict(&record.context, record.action)?;
        Ok(residual / p + baseline)
    } else {
        Ok(baseline)
    }
}

fn ips_term<P: ActionPolicy + ?Sized>(record: &LoggedRecord, policy: &P, floor: Option<f64>) -> Result<f64> {
    let p = effective_propensity(record, floor)?;
    if policy.choose(&record.context)? == record.action {
        Ok(record.payoff / p)
    } else {
        Ok(0.0)
    }
}

fn collect(terms: Vec<Result<f64>>) -> Result<EstimateReport> {
    Ok(EstimateReport::from_terms(terms.into_iter().collect::<Result<Vec<_>>>()?))
}

pub fn estimate_dr<P: ActionPolicy + ?Sized>(
    data: &LoggedDataset,
    model: &PayoffModel,
    policy: &P,
) -> Result<EstimateReport> {
    estimate(EstimatorKind::Dr, data, Some(model), policy, EstimatorOptions::default())
}

pub fn estimate_ips<P: ActionPolicy + ?Sized>(data: &LoggedDataset, policy: &P) -> Result<EstimateReport> {
    estimate(EstimatorKind::Ips, data, None, policy, EstimatorOptions::default())
}

/// Mean of `ρ̂_{π(x)}(x)` over the given contexts. Actions, payoffs and
/// propensities of logged records are ignored.
pub fn estimate_dm<C, P>(contexts: &[C], model: &PayoffModel, policy: &P) -> Result<EstimateReport>
where
    C: AsRef<Context> + Sync,
    P: ActionPolicy + ?Sized,
{
    dm_with(contexts, model, policy, Execution::default())
}

fn dm_with<C, P>(contexts: &[C], model: &PayoffModel, policy: &P, exec: Execution) -> Result<EstimateReport>
where
    C: AsRef<Context> + Sync,
    P: ActionPolicy + ?Sized,
{
    if contexts.is_empty() {
        return Err(invalid("no contexts to evaluate"));
    }
    collect(exec.map_slice(contexts, |c| {
        let x = c.as_ref();
        model.predict(x, policy.choose(x)?)
    }))
}

/// Runs one estimator over a logged dataset. `model` is required for DM and
/// DR and ignored by IPS.
pub fn estimate<P: ActionPolicy + ?Sized>(
    kind: EstimatorKind,
    data: &LoggedDataset,
    model: Option<&PayoffModel>,
    policy: &P,
    opts: EstimatorOptions,
) -> Result<EstimateReport> {
    if data.is_empty() {
        return Err(invalid("logged dataset is empty"));
    }
    if policy.num_actions() != data.num_actions() {
        return Err(Error::DimensionMismatch { expected: data.num_actions(), actual: policy.num_actions() });
    }
    let need_model = || model.ok_or_else(|| invalid(format!("{kind} needs a payoff model")));
    let exec = opts.execution;
    let floor = opts.propensity_floor;
    match kind {
        EstimatorKind::Dm => {
            let m = need_model()?;
            check_model(m, data.num_actions(), data.dim())?;
            dm_with(data.records(), m, policy, exec)
        }
        EstimatorKind::Ips => collect(exec.map_slice(data.records(), |r| ips_term(r, policy, floor))),
        EstimatorKind::Dr => {
            let m = need_model()?;
            check_model(m, data.num_actions(), data.dim())?;
            collect(exec.map_slice(data.records(), |r| dr_term_with(r, m, policy, floor)))
        }
    }
}
