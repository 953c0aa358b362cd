//! Exact moments of single estimator terms on small, fully enumerated
//! environments.
//!
//! A [`FiniteInstance`] lists every context with its probability, the true
//! logging distribution `p(a|x)`, the modeled propensities `p̂(a|x)` and a
//! finite reward distribution for each (context, action). The functions here
//! sum over every (context, action, reward atom) outcome, so the resulting
//! mean and variance are exact up to floating-point rounding.
//!
//! # Instance files
//!
//! Line-oriented, whitespace-separated, `#` starts a comment:
//!
//! ```text
//! actions 2
//! context 0.5  1 0          # probability, then features
//! context 0.5  0 1
//! logging 0  0.5 0.5        # context index, p(a|x) for each action
//! logging 1  0.8 0.2
//! propensity 1  0.5 0.5     # optional, defaults to the logging row
//! reward 0 0  1             # context, action, deterministic reward
//! reward 0 1  1:0.25 0:0.75 # ... or value:probability atoms
//! reward 1 0  0.3
//! reward 1 1  0.6
//! policy 0  1 0             # optional: action, θ_a
//! policy 1  0 1
//! model 0  0.5 0            # optional: action, w_a
//! model 1  0 0.5
//! ```

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::linalg::SquareMatrix;
use crate::models::PayoffModel;
use crate::numeric::{exact_sum, ExactSum};
use crate::types::{ActionPolicy, Context, LoggedDataset, LoggedRecord, Policy};

pub const MAX_ATOMS: usize = 8;
pub const MAX_OUTCOMES: usize = 100_000;
const PROB_TOL: f64 = 1e-12;

/// One support point of a finite reward distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardAtom {
    pub value: f64,
    pub prob: f64,
}

impl RewardAtom {
    pub fn certain(value: f64) -> Self {
        RewardAtom { value, prob: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteInstance {
    contexts: Vec<Context>,
    context_probs: Vec<f64>,
    k: usize,
    rewards: Vec<Vec<Vec<RewardAtom>>>,
    logging: Vec<Vec<f64>>,
    propensities: Vec<Vec<f64>>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInstance(msg.into())
}

fn check_distribution(probs: &[f64], what: &str) -> Result<()> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(bad(format!("{what}: probabilities must lie in [0, 1]")));
    }
    let total = exact_sum(probs.iter().copied());
    if (total - 1.0).abs() > PROB_TOL {
        return Err(bad(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl FiniteInstance {
    /// `rewards[c][a]` is the reward distribution of action `a` in context
    /// `c`; `logging[c]` and `propensities[c]` are `p(·|x_c)` and `p̂(·|x_c)`.
    pub fn new(
        contexts: Vec<(Context, f64)>,
        k: usize,
        rewards: Vec<Vec<Vec<RewardAtom>>>,
        logging: Vec<Vec<f64>>,
        propensities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if contexts.is_empty() {
            return Err(bad("no contexts"));
        }
        if k == 0 {
            return Err(bad("no actions"));
        }
        let m = contexts.len();
        let d = contexts[0].0.dim();
        if contexts.iter().any(|(c, _)| c.dim() != d) {
            return Err(bad("contexts have differing dimensions"));
        }
        let (contexts, context_probs): (Vec<_>, Vec<_>) = contexts.into_iter().unzip();
        check_distribution(&context_probs, "context distribution")?;
        if rewards.len() != m || logging.len() != m || propensities.len() != m {
            return Err(bad("rewards, logging and propensities need one row per context"));
        }
        let mut outcomes = 0usize;
        for c in 0..m {
            if rewards[c].len() != k || logging[c].len() != k || propensities[c].len() != k {
                return Err(bad(format!("context {c}: expected {k} entries per row")));
            }
            check_distribution(&logging[c], &format!("logging row {c}"))?;
            for a in 0..k {
                let atoms = &rewards[c][a];
                if atoms.is_empty() || atoms.len() > MAX_ATOMS {
                    return Err(bad(format!("reward ({c},{a}) needs 1..={MAX_ATOMS} atoms")));
                }
                if atoms.iter().any(|r| !r.value.is_finite()) {
                    return Err(bad(format!("reward ({c},{a}) has a non-finite value")));
                }
                let probs: Vec<f64> = atoms.iter().map(|r| r.prob).collect();
                check_distribution(&probs, &format!("reward ({c},{a})"))?;
                outcomes += atoms.len();
                let (p, q) = (logging[c][a], propensities[c][a]);
                if !(0.0..=1.0).contains(&q) {
                    return Err(bad(format!("propensity ({c},{a}) = {q} outside [0, 1]")));
                }
                if p > 0.0 && q <= 0.0 {
                    return Err(bad(format!("propensity ({c},{a}) is zero where p > 0")));
                }
            }
        }
        if outcomes > MAX_OUTCOMES {
            return Err(bad(format!("{outcomes} outcomes exceeds the cap of {MAX_OUTCOMES}")));
        }
        Ok(FiniteInstance { contexts, context_probs, k, rewards, logging, propensities })
    }

    pub fn num_actions(&self) -> usize {
        self.k
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn dim(&self) -> usize {
        self.contexts[0].dim()
    }

    pub fn context(&self, c: usize) -> &Context {
        &self.contexts[c]
    }

    pub fn context_prob(&self, c: usize) -> f64 {
        self.context_probs[c]
    }

    pub fn reward_atoms(&self, c: usize, a: usize) -> &[RewardAtom] {
        &self.rewards[c][a]
    }

    /// True logging probability `p(a|x_c)`.
    pub fn logging_prob(&self, c: usize, a: usize) -> f64 {
        self.logging[c][a]
    }

    /// Modeled propensity `p̂(a|x_c)`.
    pub fn propensity(&self, c: usize, a: usize) -> f64 {
        self.propensities[c][a]
    }

    /// `ρ_a(x_c) = E[r_a | x_c]`.
    pub fn mean_reward(&self, c: usize, a: usize) -> f64 {
        exact_sum(self.rewards[c][a].iter().map(|r| r.value * r.prob))
    }

    /// `Var(r_a | x_c)`.
    pub fn reward_variance(&self, c: usize, a: usize) -> f64 {
        let mu = self.mean_reward(c, a);
        exact_sum(self.rewards[c][a].iter().map(|r| r.prob * (r.value - mu).powi(2)))
    }

    /// Same instance with `p̂ = p`.
    pub fn with_exact_propensities(&self) -> Self {
        FiniteInstance { propensities: self.logging.clone(), ..self.clone() }
    }

    pub fn with_propensities(&self, propensities: Vec<Vec<f64>>) -> Result<Self> {
        let contexts = self.contexts.iter().cloned().zip(self.context_probs.iter().copied()).collect();
        FiniteInstance::new(contexts, self.k, self.rewards.clone(), self.logging.clone(), propensities)
    }

    /// Policy value `V^π = E_x[ρ_{π(x)}(x)]`.
    pub fn policy_value<P: ActionPolicy + ?Sized>(&self, policy: &P) -> Result<f64> {
        let chosen = self.chosen_actions(policy)?;
        Ok(exact_sum((0..self.num_contexts()).map(|c| self.context_probs[c] * self.mean_reward(c, chosen[c]))))
    }

    pub(crate) fn chosen_actions<P: ActionPolicy + ?Sized>(&self, policy: &P) -> Result<Vec<usize>> {
        if policy.num_actions() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: policy.num_actions() });
        }
        self.contexts
            .iter()
            .map(|x| {
                let a = policy.choose(x)?;
                if a >= self.k {
                    return Err(Error::ActionOutOfRange { action: a, k: self.k });
                }
                Ok(a)
            })
            .collect()
    }

    /// Whether the logger takes `π(x)` with positive probability in every
    /// context of positive probability. Unbiasedness under exact
    /// propensities needs this.
    pub fn covers<P: ActionPolicy + ?Sized>(&self, policy: &P) -> Result<bool> {
        let chosen = self.chosen_actions(policy)?;
        Ok(chosen.iter().enumerate().all(|(c, &a)| self.context_probs[c] == 0.0 || self.logging[c][a] > 0.0))
    }

    pub(crate) fn check_model(&self, model: &PayoffModel) -> Result<()> {
        if model.num_actions() != self.k {
            return Err(Error::DimensionMismatch { expected: self.k, actual: model.num_actions() });
        }
        if model.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: model.dim() });
        }
        Ok(())
    }

    /// The linear model with `ρ̂_a(x_c) = ρ_a(x_c)` on every context, if one
    /// exists (it does whenever the contexts are linearly independent).
    pub fn exact_model(&self) -> Result<PayoffModel> {
        let d = self.dim();
        let mut gram = SquareMatrix::zeros(d);
        for x in &self.contexts {
            let f = x.features();
            for i in 0..d {
                for j in 0..d {
                    gram.add(i, j, f[i] * f[j]);
                }
            }
        }
        let mut weights = Vec::with_capacity(self.k);
        for a in 0..self.k {
            let mut rhs = vec![0.0; d];
            for (c, x) in self.contexts.iter().enumerate() {
                let rho = self.mean_reward(c, a);
                for (r, &f) in rhs.iter_mut().zip(x.features()) {
                    *r += f * rho;
                }
            }
            let w = gram
                .cholesky_solve(&rhs)
                .ok_or_else(|| Error::Degenerate("contexts do not determine a unique linear model".into()))?;
            weights.push(w);
        }
        let model = PayoffModel::from_weights(weights)?;
        for (c, x) in self.contexts.iter().enumerate() {
            for a in 0..self.k {
                let err = (model.predict_unchecked(x.features(), a) - self.mean_reward(c, a)).abs();
                if err > 1e-9 {
                    return Err(Error::Degenerate(format!(
                        "no linear model reproduces the mean rewards (residual {err:e} at context {c}, action {a})"
                    )));
                }
            }
        }
        Ok(model)
    }

    /// Draws `n` IID logged records: `x ~ D`, `a ~ p(·|x)`, `r ~ R(x,a)`, with
    /// the record's propensity set to `p̂(a|x)`.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LoggedDataset> {
        let mut records = Vec::with_capacity(n);
        for _ in 0..n {
            let c = draw(&self.context_probs, rng);
            let a = draw(&self.logging[c], rng);
            let atoms = &self.rewards[c][a];
            let probs: Vec<f64> = atoms.iter().map(|r| r.prob).collect();
            let r = atoms[draw(&probs, rng)].value;
            records.push(LoggedRecord::new(self.contexts[c].clone(), a, r, self.propensities[c][a])?);
        }
        LoggedDataset::new(records, self.k)
    }
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Weighted outcomes `(probability, term)` of a single estimator term.
fn term_outcomes<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    kind: EstimatorKind,
) -> Result<Vec<(f64, f64)>> {
    instance.check_model(model)?;
    let chosen = instance.chosen_actions(policy)?;
    let mut out = Vec::new();
    for c in 0..instance.num_contexts() {
        let q = instance.context_prob(c);
        let x = instance.context(c).features();
        let pi = chosen[c];
        let baseline = model.predict_unchecked(x, pi);
        if kind == EstimatorKind::Dm {
            out.push((q, baseline));
            continue;
        }
        for a in 0..instance.num_actions() {
            let p = instance.logging_prob(c, a);
            if p == 0.0 {
                continue;
            }
            let p_hat = instance.propensity(c, a);
            for atom in instance.reward_atoms(c, a) {
                let weight = q * p * atom.prob;
                let term = match (kind, a == pi) {
                    (EstimatorKind::Ips, true) => atom.value / p_hat,
                    (EstimatorKind::Ips, false) => 0.0,
                    (_, true) => (atom.value - model.predict_unchecked(x, a)) / p_hat + baseline,
                    (_, false) => baseline,
                };
                out.push((weight, term));
            }
        }
    }
    Ok(out)
}

fn weighted_mean(outcomes: &[(f64, f64)]) -> f64 {
    exact_sum(outcomes.iter().map(|&(w, t)| w * t))
}

/// Exact `E[T]` of one estimator term. `model` is ignored for IPS.
pub fn enumerate_expected_value<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    kind: EstimatorKind,
) -> Result<f64> {
    Ok(weighted_mean(&term_outcomes(instance, policy, model, kind)?))
}

/// Exact `Var[T]` of one estimator term, summed as `E[(T − E[T])²]`.
pub fn enumerate_variance<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    kind: EstimatorKind,
) -> Result<f64> {
    let outcomes = term_outcomes(instance, policy, model, kind)?;
    let mean = weighted_mean(&outcomes);
    let mut acc = ExactSum::new();
    for &(w, t) in &outcomes {
        acc.add(w * (t - mean) * (t - mean));
    }
    Ok(acc.value())
}

/// Mean and variance of the estimate on `n` IID records.
pub fn enumerate_dataset_moments<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    kind: EstimatorKind,
    n: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidInput("dataset size must be at least 1".into()));
    }
    let mean = enumerate_expected_value(instance, policy, model, kind)?;
    let var = enumerate_variance(instance, policy, model, kind)?;
    Ok((mean, var / n as f64))
}

/// A parsed instance file: the instance plus an optional policy and model.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub instance: FiniteInstance,
    pub policy: Option<Policy>,
    pub model: Option<PayoffModel>,
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceSpec> {
    parse_instance(&std::fs::read_to_string(path)?)
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| perr(line, format!("expected a number, found '{tok}'")))
}

fn index(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| perr(line, format!("expected an index, found '{tok}'")))
}

fn slot<T: Clone>(rows: &mut Vec<Option<T>>, i: usize, value: T, line: usize, what: &str) -> Result<()> {
    if rows.len() <= i {
        rows.resize(i + 1, None);
    }
    if rows[i].is_some() {
        return Err(perr(line, format!("duplicate {what} {i}")));
    }
    rows[i] = Some(value);
    Ok(())
}

fn complete<T>(rows: Vec<Option<T>>, n: usize, what: &str) -> Result<Vec<T>> {
    if rows.len() > n {
        return Err(bad(format!("{what} index {} out of range", rows.len() - 1)));
    }
    let mut out = Vec::with_capacity(n);
    for (i, r) in rows.into_iter().enumerate() {
        out.push(r.ok_or_else(|| bad(format!("missing {what} {i}")))?);
    }
    if out.len() != n {
        return Err(bad(format!("missing {what} {}", out.len())));
    }
    Ok(out)
}

pub fn parse_instance(text: &str) -> Result<InstanceSpec> {
    let mut k: Option<usize> = None;
    let mut contexts = Vec::new();
    let mut logging: Vec<Option<Vec<f64>>> = Vec::new();
    let mut props: Vec<Option<Vec<f64>>> = Vec::new();
    let mut rewards: Vec<(usize, usize, usize, Vec<RewardAtom>)> = Vec::new();
    let mut policy: Vec<Option<Vec<f64>>> = Vec::new();
    let mut model: Vec<Option<Vec<f64>>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        let Some(key) = toks.next() else { continue };
        let rest: Vec<&str> = toks.collect();
        let need = |n: usize| -> Result<()> {
            if rest.len() < n {
                Err(perr(line, format!("'{key}' needs at least {n} values")))
            } else {
                Ok(())
            }
        };
        match key {
            "actions" => {
                need(1)?;
                if rest.len() != 1 || k.is_some() {
                    return Err(perr(line, "'actions' takes one value and appears once"));
                }
                k = Some(index(rest[0], line)?);
            }
            "context" => {
                need(2)?;
                let prob = num(rest[0], line)?;
                let feats = rest[1..].iter().map(|t| num(t, line)).collect::<Result<Vec<_>>>()?;
                let x = Context::new(feats).map_err(|e| perr(line, e.to_string()))?;
                contexts.push((x, prob));
            }
            "logging" | "propensity" | "policy" | "model" => {
                need(2)?;
                let idx = index(rest[0], line)?;
                let vals = rest[1..].iter().map(|t| num(t, line)).collect::<Result<Vec<_>>>()?;
                let rows = match key {
                    "logging" => &mut logging,
                    "propensity" => &mut props,
                    "policy" => &mut policy,
                    _ => &mut model,
                };
                slot(rows, idx, vals, line, key)?;
            }
            "reward" => {
                need(3)?;
                let c = index(rest[0], line)?;
                let a = index(rest[1], line)?;
                let atoms = if rest.len() == 3 && !rest[2].contains(':') {
                    vec![RewardAtom::certain(num(rest[2], line)?)]
                } else {
                    rest[2..]
                        .iter()
                        .map(|t| {
                            let (v, p) = t
                                .split_once(':')
                                .ok_or_else(|| perr(line, format!("expected value:prob, found '{t}'")))?;
                            Ok(RewardAtom { value: num(v, line)?, prob: num(p, line)? })
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                rewards.push((line, c, a, atoms));
            }
            other => return Err(perr(line, format!("unknown key '{other}'"))),
        }
    }

    let k = k.ok_or_else(|| bad("missing 'actions' line"))?;
    let m = contexts.len();
    let logging = complete(logging, m, "logging row")?;
    let props = if props.is_empty() { logging.clone() } else { complete(props, m, "propensity row")? };
    let mut table: Vec<Vec<Option<Vec<RewardAtom>>>> = vec![vec![None; k]; m];
    for (line, c, a, atoms) in rewards {
        if c >= m || a >= k {
            return Err(perr(line, format!("reward ({c},{a}) out of range")));
        }
        if table[c][a].replace(atoms).is_some() {
            return Err(perr(line, format!("duplicate reward ({c},{a})")));
        }
    }
    let mut reward_rows = Vec::with_capacity(m);
    for (c, row) in table.into_iter().enumerate() {
        let mut out = Vec::with_capacity(k);
        for (a, atoms) in row.into_iter().enumerate() {
            out.push(atoms.ok_or_else(|| bad(format!("missing reward ({c},{a})")))?);
        }
        reward_rows.push(out);
    }
    let instance = FiniteInstance::new(contexts, k, reward_rows, logging, props)?;
    let policy = if policy.is_empty() { None } else { Some(Policy::new(complete(policy, k, "policy row")?)?) };
    let model =
        if model.is_empty() { None } else { Some(PayoffModel::from_weights(complete(model, k, "model row")?)?) };
    for dim in [policy.as_ref().map(|p| p.dim()), model.as_ref().map(|m| m.dim())].into_iter().flatten() {
        if dim != instance.dim() {
            return Err(Error::DimensionMismatch { expected: instance.dim(), actual: dim });
        }
    }
    Ok(InstanceSpec { instance, policy, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate, EstimatorOptions};
    use crate::rng::stream;

    fn onehot(i: usize, d: usize) -> Context {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Context::new(v).unwrap()
    }

    /// Two contexts, two actions, uniform logging, Bernoulli rewards.
    fn bernoulli_instance() -> FiniteInstance {
        let b = |p: f64| vec![RewardAtom { value: 1.0, prob: p }, RewardAtom { value: 0.0, prob: 1.0 - p }];
        FiniteInstance::new(
            vec![(onehot(0, 2), 0.5), (onehot(1, 2), 0.5)],
            2,
            vec![vec![b(0.8), b(0.3)], vec![b(0.4), b(0.6)]],
            vec![vec![0.5, 0.5]; 2],
            vec![vec![0.5, 0.5]; 2],
        )
        .unwrap()
    }

    fn identity_policy() -> Policy {
        Policy::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn ips_with_exact_propensities_is_unbiased() {
        let inst = bernoulli_instance();
        let pol = identity_policy();
        let v = inst.policy_value(&pol).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        let m = PayoffModel::zeros(2, 2);
        let e = enumerate_expected_value(&inst, &pol, &m, EstimatorKind::Ips).unwrap();
        assert!((e - v).abs() < 1e-15);
    }

    #[test]
    fn ips_variance_matches_hand_computation() {
        // T = 2·r·I(a=π(x)); context 0 picks a=0 (mean 0.8), context 1 picks a=1 (0.6).
        // T ∈ {0, 2}; P(T=2) = 0.5·0.5·0.8 + 0.5·0.5·0.6 = 0.35.
        let inst = bernoulli_instance();
        let var = enumerate_variance(&inst, &identity_policy(), &PayoffModel::zeros(2, 2), EstimatorKind::Ips).unwrap();
        let hand = 4.0 * 0.35 - (2.0 * 0.35f64).powi(2);
        assert!((var - hand).abs() < 1e-15);
    }

    #[test]
    fn dm_with_exact_model_is_the_policy_value() {
        let inst = bernoulli_instance();
        let model = inst.exact_model().unwrap();
        let pol = identity_policy();
        let e = enumerate_expected_value(&inst, &pol, &model, EstimatorKind::Dm).unwrap();
        assert!((e - inst.policy_value(&pol).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_degenerate_case_has_zero_variance() {
        let inst = FiniteInstance::new(
            vec![(onehot(0, 2), 0.25), (onehot(1, 2), 0.75)],
            2,
            vec![vec![vec![RewardAtom::certain(0.4)], vec![RewardAtom::certain(0.9)]]; 2],
            vec![vec![1.0, 0.0]; 2],
            vec![vec![1.0, 0.0]; 2],
        )
        .unwrap();
        let model = inst.exact_model().unwrap();
        let pick0 = crate::types::ConstantPolicy { k: 2, action: 0 };
        let v = enumerate_variance(&inst, &pick0, &model, EstimatorKind::Dr).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn dataset_moments_scale_with_n() {
        let inst = bernoulli_instance();
        let pol = identity_policy();
        let m = PayoffModel::from_weights(vec![vec![0.5, 0.1], vec![0.2, 0.2]]).unwrap();
        let (m1, v1) = enumerate_dataset_moments(&inst, &pol, &m, EstimatorKind::Dr, 1).unwrap();
        assert_eq!(m1, enumerate_expected_value(&inst, &pol, &m, EstimatorKind::Dr).unwrap());
        assert_eq!(v1, enumerate_variance(&inst, &pol, &m, EstimatorKind::Dr).unwrap());
        let (m10, v10) = enumerate_dataset_moments(&inst, &pol, &m, EstimatorKind::Dr, 10).unwrap();
        assert_eq!(m10, m1);
        assert_eq!(v10, v1 / 10.0);
        assert!(enumerate_dataset_moments(&inst, &pol, &m, EstimatorKind::Dr, 0).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let inst = bernoulli_instance().with_propensities(vec![vec![0.4, 0.6], vec![0.7, 0.3]]).unwrap();
        let pol = identity_policy();
        let model = PayoffModel::from_weights(vec![vec![0.5, 0.1], vec![0.2, 0.3]]).unwrap();
        let n = 5;
        let reps = 100_000;
        for kind in EstimatorKind::ALL {
            let (mean, var) = enumerate_dataset_moments(&inst, &pol, &model, kind, n).unwrap();
            let mut rng = stream(7, "oracle-mc", kind as u64);
            let est: Vec<f64> = (0..reps)
                .map(|_| {
                    let data = inst.sample_dataset(n, &mut rng).unwrap();
                    estimate(kind, &data, Some(&model), &pol, EstimatorOptions::default()).unwrap().value
                })
                .collect();
            let (m_hat, v_hat) = crate::numeric::mean_and_variance(&est);
            let se_mean = (var / reps as f64).sqrt();
            assert!((m_hat - mean).abs() <= 3.0 * se_mean + 1e-12, "{kind}: mean {m_hat} vs {mean}");
            // standard error of a sample variance, using the sample fourth moment
            let m4 = est.iter().map(|e| (e - m_hat).powi(4)).sum::<f64>() / reps as f64;
            let se_var = ((m4 - v_hat * v_hat) / reps as f64).sqrt();
            assert!((v_hat - var).abs() <= 3.0 * se_var + 1e-12, "{kind}: var {v_hat} vs {var}");
        }
    }

    #[test]
    fn validation_rejects_bad_instances() {
        let x = vec![(onehot(0, 1), 1.0)];
        let r = vec![vec![vec![RewardAtom::certain(1.0)]]];
        assert!(FiniteInstance::new(vec![(onehot(0, 1), 0.9)], 1, r.clone(), vec![vec![1.0]], vec![vec![1.0]]).is_err());
        assert!(FiniteInstance::new(x.clone(), 1, r.clone(), vec![vec![1.0]], vec![vec![0.0]]).is_err());
        let too_many = vec![vec![vec![RewardAtom { value: 0.0, prob: 1.0 / 9.0 }; 9]]];
        assert!(FiniteInstance::new(x.clone(), 1, too_many, vec![vec![1.0]], vec![vec![1.0]]).is_err());
        assert!(FiniteInstance::new(x, 1, r, vec![vec![1.0]], vec![vec![1.0]]).is_ok());
    }

    #[test]
    fn outcome_cap_is_enforced() {
        let m = 12_501;
        let contexts: Vec<_> = (0..m).map(|_| (Context::new(vec![1.0]).unwrap(), 1.0 / m as f64)).collect();
        let atoms = vec![RewardAtom { value: 0.0, prob: 0.25 }; 4];
        let err =
            FiniteInstance::new(contexts, 2, vec![vec![atoms; 2]; m], vec![vec![0.5; 2]; m], vec![vec![0.5; 2]; m]);
        assert!(matches!(err, Err(Error::InvalidInstance(msg)) if msg.contains("cap")));
    }

    #[test]
    fn parses_documented_format() {
        let text = "\
actions 2
context 0.5  1 0          # probability, then features
context 0.5  0 1
logging 0  0.5 0.5
logging 1  0.8 0.2
propensity 0  0.5 0.5
propensity 1  0.5 0.5
reward 0 0  1
reward 0 1  1:0.25 0:0.75
reward 1 0  0.3
reward 1 1  0.6
policy 0  1 0
policy 1  0 1
model 0  0.5 0
model 1  0 0.5
";
        let spec = parse_instance(text).unwrap();
        let inst = &spec.instance;
        assert_eq!(inst.num_contexts(), 2);
        assert_eq!(inst.logging_prob(1, 0), 0.8);
        assert_eq!(inst.propensity(1, 0), 0.5);
        assert_eq!(inst.mean_reward(0, 1), 0.25);
        assert!(spec.policy.is_some() && spec.model.is_some());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_instance("actions 2\ncontext 1 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_instance("actions 1\ncontext 1 1\nlogging 0 1\nfoo 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
        assert!(parse_instance("actions 1\ncontext 1 1\nlogging 0 1\n").is_err());
        assert!(parse_instance("").is_err());
    }
}
