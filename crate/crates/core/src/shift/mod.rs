//! Covariate-shift simulation: a synthetic population of units with sparse
//! binary features and visit counts, feature-dependent sampling
//! probabilities, and IPS/DR estimates of the mean visit count from thinned
//! subsamples.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate, EstimatorKind, EstimatorOptions};
use crate::exec::Execution;
use crate::models::fit_ridge_per_action;
use crate::numeric::{exact_mean, gaussian_cdf, gaussian_pdf};
use crate::types::{ConstantPolicy, Context, LoggedDataset, LoggedRecord};

pub mod pca;

pub use pca::{first_principal_component, first_principal_component_sparse};

/// Smallest sampling probability handed out, so importance weights stay finite.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05];

/// How the Gaussian over projections is turned into a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingCurve {
    /// `min(φ_{μ,σ}(y), 1)`.
    #[default]
    Density,
    /// `Φ_{μ,σ}(y)`.
    Cdf,
}

/// Sampling probability per projection. With `m` the minimum and `m̄` the
/// mean of the projections, the Gaussian has mean `m + (m̄−m)/3` and
/// standard deviation `(m̄−m)/4`.
pub fn sampling_probabilities(projections: &[f64], curve: SamplingCurve) -> Result<Vec<f64>> {
    if projections.is_empty() {
        return Err(invalid("no projections"));
    }
    let m = projections.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = exact_mean(projections);
    let gap = mean - m;
    if !(gap > 0.0) {
        return Err(Error::Degenerate("all projections are equal".into()));
    }
    let mu = m + gap / 3.0;
    let sigma = gap / 4.0;
    Ok(projections
        .iter()
        .map(|&y| {
            let p = match curve {
                SamplingCurve::Density => gaussian_pdf(y, mu, sigma).min(1.0),
                SamplingCurve::Cdf => gaussian_cdf(y, mu, sigma),
            };
            p.max(PROBABILITY_FLOOR)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftConfig {
    pub population_size: usize,
    pub feature_dimension: usize,
    /// Average probability that a feature is active.
    pub sparsity: f64,
    /// Number of features with a nonzero visit-rate coefficient.
    pub active_features: usize,
    /// Coefficients of active features are uniform on `[low, high]`.
    pub coefficient_range: (f64, f64),
    /// Population mean of the visit rate; fixes the intercept.
    pub mean_visits: f64,
    pub fractions: Vec<f64>,
    pub replicates: usize,
    pub lambda: f64,
    pub curve: SamplingCurve,
    /// Replace every sampling probability with 1.
    pub uniform_sampling: bool,
    pub seed: u64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            population_size: 100_000,
            feature_dimension: 50,
            sparsity: 0.1,
            active_features: 10,
            coefficient_range: (-0.2, 0.4),
            mean_visits: 20.0,
            fractions: DEFAULT_FRACTIONS.to_vec(),
            replicates: 100,
            lambda: 1.0,
            curve: SamplingCurve::Density,
            uniform_sampling: false,
            seed: 0,
        }
    }
}

impl ShiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.feature_dimension == 0 {
            return Err(invalid("population needs at least two units and one feature"));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(invalid("sparsity must lie in [0, 1]"));
        }
        if self.active_features > self.feature_dimension {
            return Err(invalid("more active features than features"));
        }
        if !(self.mean_visits > 0.0) || self.replicates == 0 || self.lambda < 0.0 {
            return Err(invalid("mean visits, replicates and lambda must be positive"));
        }
        if self.fractions.is_empty() {
            return Err(invalid("no subsample fractions"));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(invalid(format!("fraction {f} outside (0, 1]")));
        }
        let (lo, hi) = self.coefficient_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("bad coefficient range"));
        }
        Ok(())
    }
}

/// The generative model behind a synthetic population: per-feature base
/// rates, sparse log-rate coefficients and the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitLink {
    /// Feature `j` is active with probability `min(1, base_rates[j]·(0.5 + u))`,
    /// `u ~ U(0,1)` shared by all features of a unit.
    pub base_rates: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

const QUADRATURE_POINTS: usize = 4001;

impl VisitLink {
    fn activation(&self, j: usize, u: f64) -> f64 {
        (self.base_rates[j] * (0.5 + u)).min(1.0)
    }

    /// `E[exp(β·x)]` over the feature distribution, by Simpson's rule in `u`.
    fn mean_exp_linear(&self) -> f64 {
        let active: Vec<usize> = (0..self.coefficients.len()).filter(|&j| self.coefficients[j] != 0.0).collect();
        let f = |u: f64| {
            active
                .iter()
                .map(|&j| {
                    let p = self.activation(j, u);
                    1.0 - p + p * self.coefficients[j].exp()
                })
                .product::<f64>()
        };
        let n = QUADRATURE_POINTS - 1;
        let h = 1.0 / n as f64;
        let mut acc = f(0.0) + f(1.0);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    /// Analytic population mean of the visit rate.
    pub fn mean_rate(&self) -> f64 {
        self.intercept.exp() * self.mean_exp_linear()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPopulation {
    dim: usize,
    features: Vec<Vec<u32>>,
    visits: Vec<f64>,
    principal_axis: Vec<f64>,
    sampling_probs: Vec<f64>,
}

impl ShiftPopulation {
    /// Builds a population from raw parts, computing the principal axis.
    pub fn from_parts(dim: usize, features: Vec<Vec<u32>>, visits: Vec<f64>, sampling_probs: Vec<f64>) -> Result<Self> {
        if features.len() != visits.len() || features.len() != sampling_probs.len() {
            return Err(invalid("features, visits and probabilities differ in length"));
        }
        if visits.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(invalid("visits must be finite and nonnegative"));
        }
        if let Some(p) = sampling_probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidPropensity(*p));
        }
        for f in &features {
            if f.iter().any(|&j| j as usize >= dim) || f.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("feature indices must be sorted, unique and below the dimension"));
            }
        }
        let principal_axis = first_principal_component_sparse(&features, dim)?;
        Ok(ShiftPopulation { dim, features, visits, principal_axis, sampling_probs })
    }

    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, unit: usize) -> &[u32] {
        &self.features[unit]
    }

    pub fn visits(&self) -> &[f64] {
        &self.visits
    }

    pub fn principal_axis(&self) -> &[f64] {
        &self.principal_axis
    }

    pub fn sampling_probs(&self) -> &[f64] {
        &self.sampling_probs
    }

    pub fn mean_visits(&self) -> f64 {
        exact_mean(&self.visits)
    }

    /// Projection of each unit onto the principal axis.
    pub fn projections(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.iter().map(|&j| self.principal_axis[j as usize]).sum()).collect()
    }

    /// Dense context with a trailing constant-1 feature.
    pub fn context(&self, unit: usize) -> Context {
        let mut x = vec![0.0; self.dim + 1];
        for &j in &self.features[unit] {
            x[j as usize] = 1.0;
        }
        x[self.dim] = 1.0;
        Context::new(x).expect("binary features are finite")
    }

    pub fn with_sampling_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != self.len() {
            return Err(invalid("one probability per unit is required"));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidPropensity(*p));
        }
        self.sampling_probs = probs;
        Ok(self)
    }

    /// CSV with a `# dim=<d>` line and `unit,features,visits,p` columns;
    /// features are space-separated active indices.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# dim={}\nunit,features,visits,p\n", self.dim);
        for i in 0..self.len() {
            let feats: Vec<String> = self.features[i].iter().map(|j| j.to_string()).collect();
            let _ = writeln!(out, "{},{},{},{}", i, feats.join(" "), self.visits[i], self.sampling_probs[i]);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let mut dim = None;
        let mut features = Vec::new();
        let mut visits = Vec::new();
        let mut probs = Vec::new();
        let mut header_seen = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            if let Some(rest) = raw.strip_prefix('#') {
                if let Some(d) = rest.trim().strip_prefix("dim=") {
                    dim = Some(d.trim().parse::<usize>().map_err(|_| perr(line, format!("bad dimension '{d}'")))?);
                }
                continue;
            }
            if !header_seen {
                if raw != "unit,features,visits,p" {
                    return Err(perr(line, "expected header 'unit,features,visits,p'".into()));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = raw.split(',').collect();
            if cols.len() != 4 {
                return Err(perr(line, format!("expected 4 columns, found {}", cols.len())));
            }
            let unit: usize = cols[0].parse().map_err(|_| perr(line, format!("bad unit id '{}'", cols[0])))?;
            if unit != features.len() {
                return Err(perr(line, format!("unit ids must be consecutive from 0, found {unit}")));
            }
            let f = cols[1]
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| perr(line, format!("bad feature index '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            features.push(f);
            visits.push(cols[2].parse::<f64>().map_err(|_| perr(line, format!("bad visits '{}'", cols[2])))?);
            probs.push(cols[3].parse::<f64>().map_err(|_| perr(line, format!("bad probability '{}'", cols[3])))?);
        }
        let dim = dim.ok_or_else(|| invalid("population file is missing its '# dim=' line"))?;
        ShiftPopulation::from_parts(dim, features, visits, probs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Draws the link parameters of a synthetic population.
pub fn synth_link<R: Rng + ?Sized>(config: &ShiftConfig, rng: &mut R) -> Result<VisitLink> {
    config.validate()?;
    let d = config.feature_dimension;
    let base_rates = (0..d).map(|_| config.sparsity * rng.random_range(0.5..1.5)).collect();
    let mut coefficients = vec![0.0; d];
    let (lo, hi) = config.coefficient_range;
    for j in sample(rng, d, config.active_features).into_vec() {
        coefficients[j] = if lo < hi { rng.random_range(lo..hi) } else { lo };
    }
    let mut link = VisitLink { base_rates, coefficients, intercept: 0.0 };
    link.intercept = config.mean_visits.ln() - link.mean_exp_linear().ln();
    Ok(link)
}

/// Draws features and visit counts for `n` units from the link.
pub fn draw_units<R: Rng + ?Sized>(link: &VisitLink, n: usize, rng: &mut R) -> Result<(Vec<Vec<u32>>, Vec<f64>)> {
    let mut features = Vec::with_capacity(n);
    let mut visits = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let f: Vec<u32> = (0..link.base_rates.len())
            .filter(|&j| rng.random::<f64>() < link.activation(j, u))
            .map(|j| j as u32)
            .collect();
        let eta = link.intercept + f.iter().map(|&j| link.coefficients[j as usize]).sum::<f64>();
        let rate = eta.exp();
        let v = Poisson::new(rate).map_err(|e| invalid(format!("bad visit rate {rate}: {e}")))?.sample(rng);
        features.push(f);
        visits.push(v);
    }
    Ok((features, visits))
}

/// Synthetic population: sparse binary features, Poisson visits with a
/// log-linear rate, principal axis and sampling probabilities.
pub fn synth_population<R: Rng + ?Sized>(config: &ShiftConfig, rng: &mut R) -> Result<ShiftPopulation> {
    let link = synth_link(config, rng)?;
    let (features, visits) = draw_units(&link, config.population_size, rng)?;
    let axis = first_principal_component_sparse(&features, config.feature_dimension)?;
    let projections: Vec<f64> = features.iter().map(|f| f.iter().map(|&j| axis[j as usize]).sum()).collect();
    let probs = if config.uniform_sampling {
        vec![1.0; features.len()]
    } else {
        sampling_probabilities(&projections, config.curve)?
    };
    Ok(ShiftPopulation { dim: config.feature_dimension, features, visits, principal_axis: axis, sampling_probs: probs })
}

/// Estimates from one thinned subsample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftOutcome {
    pub ips: f64,
    pub dr: f64,
    /// Mean visits over the subsample.
    pub truth: f64,
    pub subsample_size: usize,
    pub observed: usize,
}

/// Number of units in a fraction-`f` subsample, `⌈fN⌉`, ignoring rounding
/// noise in `f·N`.
pub fn subsample_size(f: f64, n: usize) -> usize {
    let exact = f * n as f64;
    let rounded = exact.round();
    let size = if (exact - rounded).abs() <= 1e-9 * exact.max(1.0) { rounded } else { exact.ceil() };
    (size as usize).clamp(1, n)
}

/// Subsamples `⌈fN⌉` units, observes each with its sampling probability and
/// returns IPS and DR estimates of mean visits for the always-observe
/// policy. The DR model is ridge regression on the observed units.
pub fn shift_experiment<R: Rng + ?Sized>(
    pop: &ShiftPopulation,
    f: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<ShiftOutcome> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(invalid(format!("fraction {f} outside (0, 1]")));
    }
    if pop.is_empty() {
        return Err(invalid("empty population"));
    }
    let n = subsample_size(f, pop.len());
    let units = sample(rng, pop.len(), n).into_vec();
    let mut records = Vec::with_capacity(n);
    let mut observed = 0;
    for &i in &units {
        let p = pop.sampling_probs[i];
        let seen = p >= 1.0 || rng.random::<f64>() < p;
        let (action, payoff, propensity) = if seen { (1, pop.visits[i], p) } else { (0, 0.0, 1.0 - p) };
        observed += seen as usize;
        records.push(LoggedRecord::new(pop.context(i), action, payoff, propensity)?);
    }
    let data = LoggedDataset::new(records, 2)?;
    let model = fit_ridge_per_action(&data, lambda)?;
    let policy = ConstantPolicy { k: 2, action: 1 };
    let opts = EstimatorOptions { propensity_floor: None, execution: Execution::Sequential };
    let ips = estimate(EstimatorKind::Ips, &data, None, &policy, opts)?.value;
    let dr = estimate(EstimatorKind::Dr, &data, Some(&model), &policy, opts)?.value;
    let truth = exact_mean(&units.iter().map(|&i| pop.visits[i]).collect::<Vec<_>>());
    Ok(ShiftOutcome { ips, dr, truth, subsample_size: n, observed })
}
