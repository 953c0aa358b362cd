//! Turning multiclass data into partially labeled bandit data, and filling
//! the unrevealed losses back in with IPS or DR.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::models::PayoffModel;
use crate::types::{check_propensity, CostVectorExample, LoggedDataset, LoggedRecord, MulticlassExample};

/// 0/1 loss vector: `l_a = 0` for the true label, 1 otherwise.
pub fn to_cost_sensitive(ex: &MulticlassExample, k: usize) -> Result<CostVectorExample> {
    if ex.label >= k {
        return Err(Error::ActionOutOfRange { action: ex.label, k });
    }
    let losses = (0..k).map(|a| if a == ex.label { 0.0 } else { 1.0 }).collect();
    CostVectorExample::new(ex.context.clone(), losses)
}

/// Picks an action uniformly at random and reveals only its loss.
pub fn reveal_one<R: Rng + ?Sized>(ex: &CostVectorExample, rng: &mut R) -> Result<LoggedRecord> {
    let k = ex.losses.len();
    if k == 0 {
        return Err(invalid("cost vector is empty"));
    }
    let a = rng.random_range(0..k);
    LoggedRecord::new(ex.context.clone(), a, ex.losses[a], 1.0 / k as f64)
}

pub fn reveal_dataset<R: Rng + ?Sized>(examples: &[CostVectorExample], rng: &mut R) -> Result<LoggedDataset> {
    let k = examples.first().ok_or_else(|| invalid("no examples to reveal"))?.losses.len();
    let records = examples.iter().map(|ex| reveal_one(ex, rng)).collect::<Result<Vec<_>>>()?;
    LoggedDataset::new(records, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Imputation {
    Ips,
    Dr,
}

impl Imputation {
    pub const ALL: [Imputation; 2] = [Imputation::Ips, Imputation::Dr];
}

impl fmt::Display for Imputation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Imputation::Ips => "IPS",
            Imputation::Dr => "DR",
        })
    }
}

impl FromStr for Imputation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ips" => Ok(Imputation::Ips),
            "dr" => Ok(Imputation::Dr),
            other => Err(invalid(format!("unknown imputation '{other}'"))),
        }
    }
}

/// Full cost vectors from revealed records. IPS fills `l·I(a=a′)/p̂`; DR fills
/// `ρ̂_a(x) + (l − ρ̂_{a′}(x))·I(a=a′)/p̂`. Outputs may be negative or exceed 1.
pub fn impute_costs(
    records: &[LoggedRecord],
    k: usize,
    method: Imputation,
    model: Option<&PayoffModel>,
) -> Result<Vec<CostVectorExample>> {
    let model = match (method, model) {
        (Imputation::Dr, None) => return Err(invalid("DR imputation needs a payoff model")),
        (Imputation::Dr, Some(m)) => {
            if m.num_actions() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: m.num_actions() });
            }
            Some(m)
        }
        (Imputation::Ips, _) => None,
    };
    records
        .iter()
        .map(|r| {
            check_propensity(r.propensity)?;
            if r.action >= k {
                return Err(Error::ActionOutOfRange { action: r.action, k });
            }
            let x = &r.context;
            let mut losses = match model {
                Some(m) => (0..k).map(|a| m.predict(x, a)).collect::<Result<Vec<_>>>()?,
                None => vec![0.0; k],
            };
            let base = losses[r.action];
            losses[r.action] = base + (r.payoff - base) / r.propensity;
            CostVectorExample::new(x.clone(), losses)
        })
        .collect()
}
