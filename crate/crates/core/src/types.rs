//! Domain types shared by the estimators, models and learners.

use crate::error::{invalid, Error, Result};
use crate::numeric::{dot, exact_sum};

/// Dense feature vector. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Context(Vec<f64>);

impl Context {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite feature value {bad}")));
        }
        Ok(Context(features))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn into_features(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<Context> for Context {
    fn as_ref(&self) -> &Context {
        self
    }
}

/// Index of the maximum score; the lowest index wins ties.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(scores: I) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if i == 0 || s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// One logged bandit interaction: context, chosen action, observed payoff and
/// the propensity the logger assigned to the chosen action.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRecord {
    pub context: Context,
    pub action: usize,
    pub payoff: f64,
    pub propensity: f64,
}

impl LoggedRecord {
    pub fn new(context: Context, action: usize, payoff: f64, propensity: f64) -> Result<Self> {
        check_propensity(propensity)?;
        if !payoff.is_finite() {
            return Err(invalid(format!("non-finite payoff {payoff}")));
        }
        Ok(LoggedRecord { context, action, payoff, propensity })
    }
}

impl AsRef<Context> for LoggedRecord {
    fn as_ref(&self) -> &Context {
        &self.context
    }
}

pub(crate) fn check_propensity(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPropensity(p))
    }
}

/// A nonempty collection of logged records sharing `k` and `d`.
#[derive(Debug, Clone)]
pub struct LoggedDataset {
    records: Vec<LoggedRecord>,
    k: usize,
    d: usize,
}

impl LoggedDataset {
    pub fn new(records: Vec<LoggedRecord>, k: usize) -> Result<Self> {
        let first = records.first().ok_or_else(|| invalid("logged dataset is empty"))?;
        let d = first.context.dim();
        for r in &records {
            if r.context.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: r.context.dim() });
            }
            if r.action >= k {
                return Err(Error::ActionOutOfRange { action: r.action, k });
            }
            check_propensity(r.propensity)?;
        }
        Ok(LoggedDataset { records, k, d })
    }

    pub fn records(&self) -> &[LoggedRecord] {
        &self.records
    }

    pub fn num_actions(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Anything that maps a context to an action.
pub trait ActionPolicy: Sync {
    fn num_actions(&self) -> usize;
    fn choose(&self, x: &Context) -> Result<usize>;
}

/// Deterministic linear policy: `argmax_a x·θ_a`, lowest index on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    weights: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let d = weights.first().ok_or_else(|| invalid("policy needs at least one action"))?.len();
        for w in &weights {
            if w.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: w.len() });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(invalid("non-finite policy weight"));
            }
        }
        Ok(Policy { weights })
    }

    pub fn zeros(k: usize, d: usize) -> Self {
        Policy { weights: vec![vec![0.0; d]; k] }
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    /// Chosen action for `x`.
    pub fn apply(&self, x: &Context) -> Result<usize> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.dim() });
        }
        Ok(self.apply_unchecked(x.features()))
    }

    pub(crate) fn apply_unchecked(&self, x: &[f64]) -> usize {
        argmax(self.weights.iter().map(|w| dot(w, x)))
    }
}

impl ActionPolicy for Policy {
    fn num_actions(&self) -> usize {
        self.weights.len()
    }

    fn choose(&self, x: &Context) -> Result<usize> {
        self.apply(x)
    }
}

/// Always picks the same action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPolicy {
    pub k: usize,
    pub action: usize,
}

impl ActionPolicy for ConstantPolicy {
    fn num_actions(&self) -> usize {
        self.k
    }

    fn choose(&self, _x: &Context) -> Result<usize> {
        Ok(self.action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassExample {
    pub context: Context,
    pub label: usize,
}

impl AsRef<Context> for MulticlassExample {
    fn as_ref(&self) -> &Context {
        &self.context
    }
}

/// Context plus a complete vector of per-action losses.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVectorExample {
    pub context: Context,
    pub losses: Vec<f64>,
}

impl CostVectorExample {
    pub fn new(context: Context, losses: Vec<f64>) -> Result<Self> {
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(invalid("non-finite loss"));
        }
        Ok(CostVectorExample { context, losses })
    }
}

impl AsRef<Context> for CostVectorExample {
    fn as_ref(&self) -> &Context {
        &self.context
    }
}

/// Mean loss of the policy's chosen action over fully labeled examples.
pub fn true_policy_value<P: ActionPolicy + ?Sized>(examples: &[CostVectorExample], policy: &P) -> Result<f64> {
    if examples.is_empty() {
        return Err(invalid("no examples to evaluate"));
    }
    let mut chosen = Vec::with_capacity(examples.len());
    for ex in examples {
        let a = policy.choose(&ex.context)?;
        let loss = *ex.losses.get(a).ok_or(Error::ActionOutOfRange { action: a, k: ex.losses.len() })?;
        chosen.push(loss);
    }
    Ok(exact_sum(chosen) / examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ctx(v: &[f64]) -> Context {
        Context::new(v.to_vec()).unwrap()
    }

    #[test]
    fn strict_argmax() {
        let p = Policy::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(p.apply(&ctx(&[2.0, 1.0])).unwrap(), 0);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let p = Policy::new(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(p.apply(&ctx(&[1.0, 1.0])).unwrap(), 0);
        assert_eq!(argmax([3.0, 5.0, 5.0]), 1);
    }

    #[test]
    fn negative_scores() {
        let p = Policy::new(vec![vec![0.0, 0.0], vec![-1.0, -1.0]]).unwrap();
        assert_eq!(p.apply(&ctx(&[1.0, 1.0])).unwrap(), 0);
        assert_eq!(argmax([-3.0, -2.0]), 1);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = Policy::zeros(2, 3);
        assert!(matches!(p.apply(&ctx(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_context_rejected() {
        assert!(Context::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn logged_record_rejects_bad_propensity() {
        assert!(matches!(LoggedRecord::new(ctx(&[1.0]), 0, 1.0, 0.0), Err(Error::InvalidPropensity(_))));
        assert!(LoggedRecord::new(ctx(&[1.0]), 0, 1.0, 1.5).is_err());
        assert!(LoggedRecord::new(ctx(&[1.0]), 0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn logged_dataset_validates() {
        assert!(LoggedDataset::new(vec![], 2).is_err());
        let r = LoggedRecord::new(ctx(&[1.0]), 3, 1.0, 0.5).unwrap();
        assert!(matches!(LoggedDataset::new(vec![r], 2), Err(Error::ActionOutOfRange { .. })));
    }

    #[test]
    fn true_value_examples() {
        let pick0 = Policy::new(vec![vec![1.0], vec![0.0]]).unwrap();
        let one = vec![CostVectorExample::new(ctx(&[1.0]), vec![0.0, 1.0]).unwrap()];
        assert_eq!(true_policy_value(&one, &pick0).unwrap(), 0.0);

        let two = vec![
            CostVectorExample::new(ctx(&[1.0]), vec![1.0, 0.0]).unwrap(),
            CostVectorExample::new(ctx(&[1.0]), vec![0.0, 1.0]).unwrap(),
        ];
        assert_eq!(true_policy_value(&two, &pick0).unwrap(), 0.5);

        // constant action 2 on a 4-class instance, index-2 losses (1, 0, 1)
        let c2 = ConstantPolicy { k: 4, action: 2 };
        let three: Vec<_> = [1.0, 0.0, 1.0]
            .iter()
            .map(|&l| CostVectorExample::new(ctx(&[1.0]), vec![1.0, 1.0, l, 1.0]).unwrap())
            .collect();
        let oracle = three.iter().map(|e| e.losses[2]).sum::<f64>() / 3.0;
        assert_eq!(true_policy_value(&three, &c2).unwrap(), oracle);
        assert!((oracle - 2.0 / 3.0).abs() < 1e-15);

        assert!(true_policy_value(&[], &pick0).is_err());
    }

    proptest! {
        #[test]
        fn apply_is_deterministic_and_shift_invariant(
            w in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6),
            x in prop::collection::vec(-5.0f64..5.0, 2),
            shift in -10.0f64..10.0,
        ) {
            // last coordinate of x is a shared bias feature
            let mut xb = x.clone();
            xb.push(1.0);
            let p = Policy::new(w.clone()).unwrap();
            let a = p.apply(&ctx(&xb)).unwrap();
            prop_assert_eq!(a, p.apply(&ctx(&xb)).unwrap());
            // Adding the same scalar to every score leaves the argmax alone
            // whenever the shifted scores keep their order.
            let scores: Vec<f64> = w.iter().map(|wa| dot(wa, &xb)).collect();
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            let order_kept = scores.iter().zip(&scores[1..]).zip(shifted.iter().zip(&shifted[1..]))
                .all(|((a, b), (c, d))| (a < b) == (c < d) && (a == b) == (c == d));
            if order_kept {
                prop_assert_eq!(argmax(scores), argmax(shifted));
            }
        }

        #[test]
        fn zero_losses_give_zero_value(k in 1usize..6, n in 1usize..10, seed in any::<u64>()) {
            let exs: Vec<_> = (0..n).map(|i| CostVectorExample::new(ctx(&[i as f64, (seed % 7) as f64]), vec![0.0; k]).unwrap()).collect();
            let p = Policy::new((0..k).map(|a| vec![a as f64, 1.0]).collect()).unwrap();
            prop_assert_eq!(true_policy_value(&exs, &p).unwrap(), 0.0);
        }
    }
}
