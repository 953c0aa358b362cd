//! Per-action linear payoff models fit by ridge regression, and propensity
//! models.

use crate::error::{invalid, Error, Result};
use crate::linalg::SquareMatrix;
use crate::numeric::dot;
use crate::types::{check_propensity, Context, CostVectorExample, LoggedDataset, LoggedRecord};

/// `ρ̂_a(x) = w_a · x` for each action `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffModel {
    weights: Vec<Vec<f64>>,
    lambda: f64,
}

impl PayoffModel {
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Result<Self> {
        let d = weights.first().ok_or_else(|| invalid("model needs at least one action"))?.len();
        for w in &weights {
            if w.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: w.len() });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite model weight"));
            }
        }
        Ok(PayoffModel { weights, lambda: 0.0 })
    }

    /// The all-zero model; DR with it reduces to IPS.
    pub fn zeros(k: usize, d: usize) -> Self {
        PayoffModel { weights: vec![vec![0.0; d]; k], lambda: 0.0 }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_actions(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn predict(&self, x: &Context, action: usize) -> Result<f64> {
        let w = self.weights.get(action).ok_or(Error::ActionOutOfRange { action, k: self.weights.len() })?;
        if w.len() != x.dim() {
            return Err(Error::DimensionMismatch { expected: w.len(), actual: x.dim() });
        }
        Ok(dot(w, x.features()))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64], action: usize) -> f64 {
        dot(&self.weights[action], x)
    }
}

/// Accumulates the normal equations `Σ x xᵀ + λI`, `Σ x y` for one action.
struct NormalEquations {
    gram: SquareMatrix,
    rhs: Vec<f64>,
    count: usize,
    nz: Vec<usize>,
}

impl NormalEquations {
    fn new(d: usize) -> Self {
        NormalEquations { gram: SquareMatrix::zeros(d), rhs: vec![0.0; d], count: 0, nz: Vec::new() }
    }

    fn add(&mut self, x: &[f64], y: f64) {
        self.nz.clear();
        self.nz.extend(x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
        for &i in &self.nz {
            for &j in &self.nz {
                self.gram.add(i, j, x[i] * x[j]);
            }
            self.rhs[i] += x[i] * y;
        }
        self.count += 1;
    }

    fn solve(mut self, lambda: f64, action: usize) -> Result<Vec<f64>> {
        let d = self.rhs.len();
        if self.count == 0 {
            return Ok(vec![0.0; d]);
        }
        self.gram.add_diagonal(lambda);
        self.gram.cholesky_solve(&self.rhs).ok_or(Error::SingularSystem(action))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("ridge strength must be >= 0, got {lambda}")))
    }
}

/// Fits `w_a` for each action using only the records whose logged action is
/// `a`. Actions without records get `w_a = 0`.
pub fn fit_ridge_per_action(data: &LoggedDataset, lambda: f64) -> Result<PayoffModel> {
    check_lambda(lambda)?;
    let (k, d) = (data.num_actions(), data.dim());
    let mut eqs: Vec<_> = (0..k).map(|_| NormalEquations::new(d)).collect();
    for r in data.records() {
        eqs[r.action].add(r.context.features(), r.payoff);
    }
    let weights = eqs.into_iter().enumerate().map(|(a, e)| e.solve(lambda, a)).collect::<Result<Vec<_>>>()?;
    Ok(PayoffModel { weights, lambda })
}

/// Fits `w_a` for every action on fully labeled data: each example supplies a
/// regression target for every action.
pub fn fit_ridge_full_information(examples: &[CostVectorExample], lambda: f64) -> Result<PayoffModel> {
    check_lambda(lambda)?;
    let first = examples.first().ok_or_else(|| invalid("no examples to fit"))?;
    let (k, d) = (first.losses.len(), first.context.dim());
    let mut eqs: Vec<_> = (0..k).map(|_| NormalEquations::new(d)).collect();
    for ex in examples {
        if ex.context.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: ex.context.dim() });
        }
        if ex.losses.len() != k {
            return Err(Error::DimensionMismatch { expected: k, actual: ex.losses.len() });
        }
        for (a, e) in eqs.iter_mut().enumerate() {
            e.add(ex.context.features(), ex.losses[a]);
        }
    }
    let weights = eqs.into_iter().enumerate().map(|(a, e)| e.solve(lambda, a)).collect::<Result<Vec<_>>>()?;
    Ok(PayoffModel { weights, lambda })
}

/// Source of `p̂(a|x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PropensityModel {
    /// `1/k` for every action and context.
    Uniform { k: usize },
    /// Explicit `p̂(a|x)` rows for a finite list of contexts.
    Table { contexts: Vec<Context>, probs: Vec<Vec<f64>> },
    /// Use the propensity stored on each record.
    PerRecord,
}

impl PropensityModel {
    /// `p̂(a|x)` for the record's action under this model.
    pub fn propensity_of(&self, record: &LoggedRecord) -> Result<f64> {
        match self {
            PropensityModel::PerRecord => Ok(record.propensity),
            _ => self.probability(&record.context, record.action),
        }
    }

    pub fn probability(&self, x: &Context, action: usize) -> Result<f64> {
        let p = match self {
            PropensityModel::Uniform { k } => {
                if action >= *k {
                    return Err(Error::ActionOutOfRange { action, k: *k });
                }
                1.0 / *k as f64
            }
            PropensityModel::Table { contexts, probs } => {
                let i = contexts
                    .iter()
                    .position(|c| c == x)
                    .ok_or_else(|| invalid("context not present in propensity table"))?;
                *probs[i].get(action).ok_or(Error::ActionOutOfRange { action, k: probs[i].len() })?
            }
            PropensityModel::PerRecord => {
                return Err(invalid("per-record propensities need a record"));
            }
        };
        check_propensity(p)?;
        Ok(p)
    }
}

pub fn uniform_propensity(k: usize) -> Result<PropensityModel> {
    if k == 0 {
        return Err(invalid("uniform propensity needs k >= 1"));
    }
    Ok(PropensityModel::Uniform { k })
}
