//! Exactness checks of the closed-form bias and variance against the
//! enumeration oracle, for one instance.

use crate::diagnostics::{theoretical_bias, theoretical_variance};
use crate::error::{invalid, Result};
use crate::estimators::EstimatorKind;
use crate::harness::report::ReportRow;
use crate::models::PayoffModel;
use crate::oracle::{enumerate_expected_value, enumerate_variance, InstanceSpec};

pub const ORACLE_TOLERANCE: f64 = 1e-10;

/// One compared quantity: `error` is an absolute discrepancy that should be
/// at most [`ORACLE_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub kind: EstimatorKind,
    pub model: String,
    pub metric: &'static str,
    pub error: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.error <= ORACLE_TOLERANCE
    }

    pub fn row(&self, dataset: &str) -> ReportRow {
        ReportRow::new(dataset, self.kind.to_string(), format!("{}.{}", self.model, self.metric), self.error)
    }
}

/// For every available model (the file's, the zero model and the exact
/// model when the contexts determine one) and every estimator:
/// `|E[T] − V − bias|` and `|Var[T] − theoretical variance|`. For DR also
/// the bias with exact propensities (only when the logger covers every
/// action the policy takes) and, if available, with the exact model.
pub fn run_oracle_check(spec: &InstanceSpec) -> Result<Vec<OracleCheck>> {
    let inst = &spec.instance;
    let policy = spec.policy.as_ref().ok_or_else(|| invalid("instance file has no policy"))?;
    let value = inst.policy_value(policy)?;
    let exact = inst.exact_model().ok();
    let mut models: Vec<(String, PayoffModel)> = Vec::new();
    if let Some(m) = &spec.model {
        models.push(("file_model".into(), m.clone()));
    }
    models.push(("zero_model".into(), PayoffModel::zeros(inst.num_actions(), inst.dim())));
    if let Some(m) = &exact {
        models.push(("exact_model".into(), m.clone()));
    }
    let honest = inst.covers(policy)?.then(|| inst.with_exact_propensities());
    let mut out = Vec::new();
    for (name, model) in &models {
        for kind in EstimatorKind::ALL {
            let mean = enumerate_expected_value(inst, policy, model, kind)?;
            let bias = theoretical_bias(inst, policy, model, kind)?;
            out.push(OracleCheck {
                kind,
                model: name.clone(),
                metric: "bias_error",
                error: (mean - value - bias).abs(),
            });
            let var = enumerate_variance(inst, policy, model, kind)?;
            let theory = theoretical_variance(inst, policy, model, 1, kind)?;
            out.push(OracleCheck {
                kind,
                model: name.clone(),
                metric: "variance_error",
                error: (var - theory.total).abs(),
            });
        }
        if let Some(honest) = &honest {
            let dr = enumerate_expected_value(honest, policy, model, EstimatorKind::Dr)?;
            out.push(OracleCheck {
                kind: EstimatorKind::Dr,
                model: name.clone(),
                metric: "bias_with_exact_propensities",
                error: (dr - value).abs(),
            });
        }
    }
    if let Some(m) = &exact {
        let dr = enumerate_expected_value(inst, policy, m, EstimatorKind::Dr)?;
        out.push(OracleCheck {
            kind: EstimatorKind::Dr,
            model: "exact_model".into(),
            metric: "bias_with_given_propensities",
            error: (dr - value).abs(),
        });
    }
    Ok(out)
}
