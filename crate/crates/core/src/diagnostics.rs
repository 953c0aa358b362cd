//! Closed-form bias and variance of the DM, IPS and DR estimators on a
//! [`FiniteInstance`], where the true `ρ` and `p` are known.
//!
//! With `Δ(a,x) = ρ̂_a(x) − ρ_a(x)` and `δ(a,x) = 1 − p(a|x)/p̂(a|x)`, and
//! everything evaluated at `a = π(x)`:
//!
//! - DR bias is `E_x[Δδ]`, DM bias is `E_x[Δ]`, IPS bias is `−E_x[ρδ]`.
//! - The DR variance of one term is
//!   `E_x[(p/p̂²)·Var(r|x)] + Var_x[ρ + Δδ] + E_x[Δ²·(p/p̂)·(1−p)/p̂]`.
//!   IPS is the same expression with `ρ̂ ≡ 0`; DM is `Var_x[ρ + Δ]`.
//!
//! Where `p = 0` the ratio `p/p̂` is taken as 0, so `δ = 1`.

use crate::error::{invalid, Result};
use crate::estimators::EstimatorKind;
use crate::models::PayoffModel;
use crate::numeric::exact_sum;
use crate::oracle::FiniteInstance;
use crate::types::ActionPolicy;

/// `Δ` and `δ` tabulated over every (context, action) of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDeviations {
    additive: Vec<Vec<f64>>,
    multiplicative: Vec<Vec<f64>>,
}

impl ModelDeviations {
    pub fn new(instance: &FiniteInstance, model: &PayoffModel) -> Result<Self> {
        instance.check_model(model)?;
        let m = instance.num_contexts();
        let k = instance.num_actions();
        let mut additive = vec![vec![0.0; k]; m];
        let mut multiplicative = vec![vec![0.0; k]; m];
        for c in 0..m {
            let x = instance.context(c).features();
            for a in 0..k {
                additive[c][a] = model.predict_unchecked(x, a) - instance.mean_reward(c, a);
                multiplicative[c][a] = 1.0 - ratio(instance, c, a);
            }
        }
        Ok(ModelDeviations { additive, multiplicative })
    }

    /// `Δ(a, x_c)`.
    pub fn delta_add(&self, action: usize, context: usize) -> f64 {
        self.additive[context][action]
    }

    /// `δ(a, x_c)`.
    pub fn delta_mult(&self, action: usize, context: usize) -> f64 {
        self.multiplicative[context][action]
    }
}

/// `p/p̂`, zero where `p = 0`.
fn ratio(instance: &FiniteInstance, c: usize, a: usize) -> f64 {
    let p = instance.logging_prob(c, a);
    if p == 0.0 {
        0.0
    } else {
        p / instance.propensity(c, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecomposition {
    pub reward_noise: f64,
    pub context_term: f64,
    pub importance_penalty: f64,
    /// `(reward_noise + context_term + importance_penalty) / n`.
    pub total: f64,
}

/// Signed bias of the estimator on the instance.
pub fn theoretical_bias<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    kind: EstimatorKind,
) -> Result<f64> {
    let dev = ModelDeviations::new(instance, model)?;
    let chosen = instance.chosen_actions(policy)?;
    Ok(exact_sum((0..instance.num_contexts()).map(|c| {
        let a = chosen[c];
        let q = instance.context_prob(c);
        match kind {
            EstimatorKind::Dm => q * dev.delta_add(a, c),
            EstimatorKind::Dr => q * dev.delta_add(a, c) * dev.delta_mult(a, c),
            EstimatorKind::Ips => -q * instance.mean_reward(c, a) * dev.delta_mult(a, c),
        }
    })))
}

/// Variance of the estimate on `n` IID records, split into its three terms.
pub fn theoretical_variance<P: ActionPolicy + ?Sized>(
    instance: &FiniteInstance,
    policy: &P,
    model: &PayoffModel,
    n: usize,
    kind: EstimatorKind,
) -> Result<VarianceDecomposition> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let dev = ModelDeviations::new(instance, model)?;
    let chosen = instance.chosen_actions(policy)?;
    let m = instance.num_contexts();
    let q = |c: usize| instance.context_prob(c);

    // Conditional mean of the term given x, plus the two per-context pieces.
    let mut cond_mean = Vec::with_capacity(m);
    let mut noise = Vec::with_capacity(m);
    let mut penalty = Vec::with_capacity(m);
    for c in 0..m {
        let a = chosen[c];
        let rho = instance.mean_reward(c, a);
        if kind == EstimatorKind::Dm {
            cond_mean.push(rho + dev.delta_add(a, c));
            noise.push(0.0);
            penalty.push(0.0);
            continue;
        }
        let delta = match kind {
            EstimatorKind::Ips => -rho,
            _ => dev.delta_add(a, c),
        };
        let w = ratio(instance, c, a);
        let p = instance.logging_prob(c, a);
        let p_hat = instance.propensity(c, a);
        cond_mean.push(rho + delta * dev.delta_mult(a, c));
        if w == 0.0 {
            noise.push(0.0);
            penalty.push(0.0);
        } else {
            noise.push(q(c) * w / p_hat * instance.reward_variance(c, a));
            penalty.push(q(c) * delta * delta * w * (1.0 - p) / p_hat);
        }
    }
    let mean = exact_sum((0..m).map(|c| q(c) * cond_mean[c]));
    let context_term = exact_sum((0..m).map(|c| q(c) * (cond_mean[c] - mean).powi(2)));
    let reward_noise = exact_sum(noise);
    let importance_penalty = exact_sum(penalty);
    let total = (reward_noise + context_term + importance_penalty) / n as f64;
    Ok(VarianceDecomposition { reward_noise, context_term, importance_penalty, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_expected_value, enumerate_variance, RewardAtom};
    use crate::types::{Context, Policy};
    use proptest::prelude::*;

    fn onehot(i: usize, d: usize) -> Context {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Context::new(v).unwrap()
    }

    fn identity(k: usize) -> Policy {
        Policy::new((0..k).map(|a| onehot(a, k).into_features()).collect()).unwrap()
    }

    /// Two contexts, two actions, deterministic rewards; policy picks action c
    /// in context c.
    fn two_by_two(rho: [[f64; 2]; 2], p: [[f64; 2]; 2], p_hat: [[f64; 2]; 2]) -> FiniteInstance {
        FiniteInstance::new(
            vec![(onehot(0, 2), 0.5), (onehot(1, 2), 0.5)],
            2,
            rho.iter().map(|row| row.iter().map(|&r| vec![RewardAtom::certain(r)]).collect()).collect(),
            p.iter().map(|r| r.to_vec()).collect(),
            p_hat.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn dr_bias_is_product_of_deviations() {
        // p = 0.5·p̂ on the chosen actions gives δ = 0.5; the model adds 0.2.
        let inst = two_by_two([[0.3, 0.6], [0.1, 0.5]], [[0.4, 0.6], [0.6, 0.4]], [[0.8, 0.2], [0.2, 0.8]]);
        let model = PayoffModel::from_weights(vec![vec![0.5, 0.3], vec![0.8, 0.7]]).unwrap();
        let pol = identity(2);
        let dev = ModelDeviations::new(&inst, &model).unwrap();
        assert!((dev.delta_add(0, 0) - 0.2).abs() < 1e-15);
        assert!((dev.delta_mult(1, 1) - 0.5).abs() < 1e-15);
        let bias = theoretical_bias(&inst, &pol, &model, EstimatorKind::Dr).unwrap();
        assert!((bias - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exact_model_or_exact_propensity_kills_the_relevant_bias() {
        let inst = two_by_two([[0.3, 0.6], [0.1, 0.5]], [[0.4, 0.6], [0.6, 0.4]], [[0.8, 0.2], [0.2, 0.8]]);
        let pol = identity(2);
        let exact = inst.exact_model().unwrap();
        assert_eq!(theoretical_bias(&inst, &pol, &exact, EstimatorKind::Dr).unwrap(), 0.0);
        assert_eq!(theoretical_bias(&inst, &pol, &exact, EstimatorKind::Dm).unwrap(), 0.0);
        let honest = inst.with_exact_propensities();
        let model = PayoffModel::from_weights(vec![vec![0.9, -1.0], vec![2.0, 0.1]]).unwrap();
        assert_eq!(theoretical_bias(&honest, &pol, &model, EstimatorKind::Dr).unwrap(), 0.0);
        assert_eq!(theoretical_bias(&honest, &pol, &model, EstimatorKind::Ips).unwrap(), 0.0);
    }

    #[test]
    fn deterministic_exact_constant_value_has_zero_dr_variance() {
        let inst = two_by_two([[0.4, 0.1], [0.2, 0.4]], [[0.5, 0.5], [0.3, 0.7]], [[0.5, 0.5], [0.3, 0.7]]);
        let model = inst.exact_model().unwrap();
        let v = theoretical_variance(&inst, &identity(2), &model, 1, EstimatorKind::Dr).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn ips_and_dr_coincide_when_logging_always_picks_the_policy_action() {
        let inst = two_by_two([[0.4, 0.1], [0.2, 0.9]], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]);
        let model = inst.exact_model().unwrap();
        let pol = identity(2);
        let dr = theoretical_variance(&inst, &pol, &model, 1, EstimatorKind::Dr).unwrap();
        let ips = theoretical_variance(&inst, &pol, &model, 1, EstimatorKind::Ips).unwrap();
        assert_eq!(dr.importance_penalty, 0.0);
        assert!((dr.total - ips.total).abs() < 1e-15);
        assert!((dr.context_term - ips.context_term).abs() < 1e-15);
    }

    #[test]
    fn dr_variance_matches_enumeration_on_2x2() {
        let inst = two_by_two([[0.3, 0.6], [0.1, 0.5]], [[0.4, 0.6], [0.6, 0.4]], [[0.8, 0.2], [0.2, 0.8]]);
        let model = PayoffModel::from_weights(vec![vec![0.5, 0.3], vec![0.8, 0.7]]).unwrap();
        let pol = identity(2);
        let theory = theoretical_variance(&inst, &pol, &model, 1, EstimatorKind::Dr).unwrap();
        let exact = enumerate_variance(&inst, &pol, &model, EstimatorKind::Dr).unwrap();
        assert!((theory.total - exact).abs() <= 1e-10);
    }

    #[test]
    fn dm_has_no_noise_or_penalty() {
        let inst = two_by_two([[0.3, 0.6], [0.1, 0.5]], [[0.4, 0.6], [0.6, 0.4]], [[0.8, 0.2], [0.2, 0.8]]);
        let model = PayoffModel::from_weights(vec![vec![0.5, 0.3], vec![0.8, 0.7]]).unwrap();
        let v = theoretical_variance(&inst, &identity(2), &model, 3, EstimatorKind::Dm).unwrap();
        assert_eq!((v.reward_noise, v.importance_penalty), (0.0, 0.0));
        assert!((v.total - v.context_term / 3.0).abs() < 1e-15);
        assert!(theoretical_variance(&inst, &identity(2), &model, 0, EstimatorKind::Dm).is_err());
    }

    /// Random 3-context, 2-action instances with stochastic rewards. The
    /// policy picks action 0 in context 0 and action 1 elsewhere.
    fn random_instance() -> impl Strategy<Value = (FiniteInstance, PayoffModel)> {
        (
            prop::collection::vec(0.05f64..1.0, 3),
            prop::collection::vec(0.05f64..0.95, 3),
            prop::collection::vec(0.05f64..0.95, 3),
            prop::collection::vec((-1.0f64..2.0, -1.0f64..2.0, 0.0f64..1.0), 6),
            prop::collection::vec(-1.0f64..1.0, 6),
        )
            .prop_map(|(q, p, p_hat, rw, w)| {
                let total: f64 = q.iter().sum();
                let mut probs: Vec<f64> = q.iter().map(|v| v / total).collect();
                probs[2] = 1.0 - probs[0] - probs[1];
                let contexts = (0..3).map(|c| (onehot(c, 3), probs[c])).collect();
                let rewards = (0..3)
                    .map(|c| {
                        (0..2)
                            .map(|a| {
                                let (v1, v2, s) = rw[2 * c + a];
                                vec![RewardAtom { value: v1, prob: s }, RewardAtom { value: v2, prob: 1.0 - s }]
                            })
                            .collect()
                    })
                    .collect();
                let logging = p.iter().map(|&v| vec![v, 1.0 - v]).collect();
                let props = p_hat.iter().map(|&v| vec![v, 1.0 - v]).collect();
                let inst = FiniteInstance::new(contexts, 2, rewards, logging, props).unwrap();
                let model = PayoffModel::from_weights(w.chunks(3).map(|c| c.to_vec()).collect()).unwrap();
                (inst, model)
            })
    }

    fn suite_policy() -> Policy {
        Policy::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap()
    }

    proptest! {
        #[test]
        fn closed_forms_match_enumeration((inst, model) in random_instance()) {
            let pol = suite_policy();
            let v = inst.policy_value(&pol).unwrap();
            for kind in EstimatorKind::ALL {
                let e = enumerate_expected_value(&inst, &pol, &model, kind).unwrap();
                let b = theoretical_bias(&inst, &pol, &model, kind).unwrap();
                prop_assert!((e - v - b).abs() <= 1e-10, "{kind} bias");
                let var = enumerate_variance(&inst, &pol, &model, kind).unwrap();
                let t = theoretical_variance(&inst, &pol, &model, 1, kind).unwrap();
                prop_assert!((var - t.total).abs() <= 1e-10, "{kind} variance {var} vs {}", t.total);
            }
        }

        #[test]
        fn penalty_grows_as_logging_probability_shrinks(
            (inst, model) in random_instance(),
            shrink in 0.1f64..0.99,
        ) {
            let pol = suite_policy();
            let chosen = [0usize, 1, 1];
            let dev = ModelDeviations::new(&inst, &model).unwrap();
            prop_assume!((0..3).any(|c| dev.delta_add(chosen[c], c) != 0.0));
            // Shrink p(π(x)|x) and p̂(π(x)|x) by the same factor so δ is fixed.
            let scaled = |c: usize, a: usize, v: f64| if a == chosen[c] { v * shrink } else { v };
            let logging: Vec<Vec<f64>> = (0..3).map(|c| {
                let pa = inst.logging_prob(c, chosen[c]) * shrink;
                if chosen[c] == 0 { vec![pa, 1.0 - pa] } else { vec![1.0 - pa, pa] }
            }).collect();
            let props: Vec<Vec<f64>> = (0..3).map(|c| (0..2).map(|a| scaled(c, a, inst.propensity(c, a))).collect()).collect();
            let contexts = (0..3).map(|c| (inst.context(c).clone(), inst.context_prob(c))).collect();
            let rewards = (0..3).map(|c| (0..2).map(|a| inst.reward_atoms(c, a).to_vec()).collect()).collect();
            let shrunk = FiniteInstance::new(contexts, 2, rewards, logging, props).unwrap();
            let before = theoretical_variance(&inst, &pol, &model, 1, EstimatorKind::Dr).unwrap();
            let after = theoretical_variance(&shrunk, &pol, &model, 1, EstimatorKind::Dr).unwrap();
            prop_assert!(after.importance_penalty > before.importance_penalty);
        }

        #[test]
        fn dr_penalty_is_at_most_ips_penalty_for_small_deviations(
            (inst, _) in random_instance(),
            shrink in prop::collection::vec(-0.99f64..0.99, 3),
        ) {
            let pol = suite_policy();
            let chosen = [0usize, 1, 1];
            // Positive mean rewards on the chosen actions, and a model whose
            // deviation is a fraction of ρ in magnitude.
            let shifted: Vec<Vec<Vec<RewardAtom>>> = (0..3).map(|c| (0..2).map(|a| {
                inst.reward_atoms(c, a).iter().map(|r| RewardAtom { value: r.value + 1.5, prob: r.prob }).collect()
            }).collect()).collect();
            let contexts = (0..3).map(|c| (inst.context(c).clone(), inst.context_prob(c))).collect();
            let logging = (0..3).map(|c| (0..2).map(|a| inst.logging_prob(c, a)).collect()).collect();
            let props = (0..3).map(|c| (0..2).map(|a| inst.propensity(c, a)).collect()).collect();
            let pos = FiniteInstance::new(contexts, 2, shifted, logging, props).unwrap();
            let mut w = vec![vec![0.0; 3]; 2];
            for c in 0..3 {
                let a = chosen[c];
                let rho = pos.mean_reward(c, a);
                prop_assume!(rho > 0.0);
                w[a][c] = rho * (1.0 + shrink[c]);
            }
            let model = PayoffModel::from_weights(w).unwrap();
            let dr = theoretical_variance(&pos, &pol, &model, 1, EstimatorKind::Dr).unwrap();
            let ips = theoretical_variance(&pos, &pol, &model, 1, EstimatorKind::Ips).unwrap();
            prop_assert!(dr.importance_penalty <= ips.importance_penalty);
        }
    }
}
