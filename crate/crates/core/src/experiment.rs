//! Monte-Carlo trials: support recovery and sup-norm error of the estimators
//! over grids of dimensions and rescaled sample sizes `n / (d² log p)`.
//!
//! Every instance draws from its own seeded stream, so a sweep gives the same
//! rows whether it runs sequentially or on a thread pool. Rows are sorted by
//! `(p, ratio, instance, estimator)` before they are returned.

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::{estimate_delta, estimate_sqrt_delta, plugin_delta, SolverConfig};
use crate::io::format_sig9;
use crate::linalg::{sup_norm, SymmetricMatrix};
use crate::network::{
    assemble_scenario, grid_delta_rect, lattice_shape, max_degree, random_base_matrix, random_pd_matrix,
    NetworkScenario, SignMode, WeightRange,
};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sampling::{psi_hat, sample_potentials};

pub const CSV_HEADER: &str = "p,n,ratio,instance,estimator,support_recovered,sup_norm_error,iterations,converged,wall_time_ms";

// stream tags mixed into derived seeds
const TAG_BASE: u64 = 1;
const TAG_DELTA: u64 = 2;
const TAG_SIGMA: u64 = 3;
const TAG_SAMPLES: u64 = 4;

/// Scenario draws rejected by the invertibility check are retried this many
/// times with fresh seeds.
const MAX_SCENARIO_ATTEMPTS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    Dtrace,
    Plugin,
    /// D-trace on unwhitened samples (injection covariance unknown).
    Sqrt,
}

impl Estimator {
    pub fn tag(self) -> &'static str {
        match self {
            Estimator::Dtrace => "dtrace",
            Estimator::Plugin => "plugin",
            Estimator::Sqrt => "sqrt",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtrace" => Ok(Estimator::Dtrace),
            "plugin" => Ok(Estimator::Plugin),
            "sqrt" => Ok(Estimator::Sqrt),
            _ => Err(Error::param("estimator", format!("expected dtrace, plugin or sqrt, got `{s}`"))),
        }
    }
}

/// Injection covariance used for both systems.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSpec {
    Identity,
    /// Diagonal entries uniform in `[min, max]`.
    Diagonal { min: f64, max: f64 },
    /// Dense PD with the given condition number.
    Dense { condition: f64 },
}

impl SigmaSpec {
    pub fn build(&self, p: usize, seed: u64) -> Result<SymmetricMatrix> {
        match *self {
            SigmaSpec::Identity => Ok(SymmetricMatrix::identity(p)),
            SigmaSpec::Diagonal { min, max } => {
                use rand::Rng;
                let mut rng = rng_from_seed(seed);
                let diag: Vec<f64> = (0..p)
                    .map(|_| if min == max { min } else { rng.random_range(min..=max) })
                    .collect();
                Ok(SymmetricMatrix::from_diagonal(&diag))
            }
            SigmaSpec::Dense { condition } => random_pd_matrix(p, condition, seed),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SigmaSpec::Identity => Ok(()),
            SigmaSpec::Diagonal { min, max } => {
                if min > 0.0 && max >= min && max.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("sigma", format!("diagonal range needs 0 < min <= max, got ({min}, {max})")))
                }
            }
            SigmaSpec::Dense { condition } => {
                if condition >= 1.0 && condition.is_finite() {
                    Ok(())
                } else {
                    Err(Error::param("sigma", format!("condition must be >= 1, got {condition}")))
                }
            }
        }
    }
}

/// How `B₁` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseSpec {
    /// [`random_base_matrix`] with a fresh draw per instance.
    Random { density: f64, margin: f64 },
    /// The same matrix for every instance, e.g. a reduced power-network
    /// Laplacian. Only its own dimension can be swept.
    Fixed(SymmetricMatrix),
}

/// Lattice difference parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaSpec {
    pub weights: WeightRange,
    pub sign: SignMode,
}

/// Sample-size axis of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleAxis {
    /// Rescaled sizes `n / (d² log p)`.
    Ratios(Vec<f64>),
    /// Multiples of the dimension, `n = ceil(m · p)`.
    Multiples(Vec<f64>),
}

impl SampleAxis {
    fn values(&self) -> &[f64] {
        match self {
            SampleAxis::Ratios(v) | SampleAxis::Multiples(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub samples: SampleAxis,
    pub instances: usize,
    /// `c` in `λ = c·√(log p / n)`.
    pub lambda_scale: f64,
    /// Support threshold as a fraction of the largest off-diagonal `|Δ*|`.
    pub support_epsilon_rel: f64,
    pub delta: DeltaSpec,
    pub base: BaseSpec,
    pub sigma: SigmaSpec,
    /// Solver settings; `lambda` is overwritten per point.
    pub solver: SolverConfig,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    /// Fill `wall_time_ms`; off by default so output is reproducible byte
    /// for byte.
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dims: vec![64],
            samples: SampleAxis::Ratios(vec![0.5, 1.0, 2.0, 3.0, 5.0]),
            instances: 20,
            lambda_scale: 0.5,
            support_epsilon_rel: 1e-3,
            delta: DeltaSpec::default(),
            base: BaseSpec::Random {
                density: 1.0,
                margin: 1.0,
            },
            sigma: SigmaSpec::Identity,
            solver: SolverConfig::default(),
            estimators: vec![Estimator::Dtrace],
            seed: 0,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::param("dims", "at least one dimension is required"));
        }
        for &p in &self.dims {
            if p < 4 {
                return Err(Error::param("dims", format!("p = {p} is too small for a lattice difference")));
            }
            lattice_shape(p).map_err(|e| Error::param("dims", e.to_string()))?;
        }
        let values = self.samples.values();
        if values.is_empty() {
            return Err(Error::param("ratios", "at least one sample size is required"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::param("ratios", format!("sample sizes must be positive, got {bad}")));
        }
        if self.instances == 0 {
            return Err(Error::param("instances", "must be at least 1"));
        }
        if !(self.lambda_scale >= 0.0) || !self.lambda_scale.is_finite() {
            return Err(Error::param("lambda_scale", format!("must be >= 0, got {}", self.lambda_scale)));
        }
        if !(self.support_epsilon_rel > 0.0) || !self.support_epsilon_rel.is_finite() {
            return Err(Error::param("support_epsilon", "must be positive"));
        }
        WeightRange::new(self.delta.weights.min, self.delta.weights.max)?;
        match &self.base {
            BaseSpec::Random { density, margin } => {
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(Error::param("density", format!("must lie in (0, 1], got {density}")));
                }
                if !(*margin > 0.0) || !margin.is_finite() {
                    return Err(Error::param("margin", format!("must be positive, got {margin}")));
                }
            }
            BaseSpec::Fixed(b) => {
                if let Some(&p) = self.dims.iter().find(|&&p| p != b.dim()) {
                    return Err(Error::param(
                        "dims",
                        format!("fixed base matrix is {0}x{0}, cannot sweep p = {p}", b.dim()),
                    ));
                }
            }
        }
        self.sigma.validate()?;
        if self.estimators.is_empty() {
            return Err(Error::param("estimators", "at least one estimator is required"));
        }
        self.solver.validate()
    }
}

/// Off-diagonal supports agree: `|estimate_ij| > epsilon ⇔ truth_ij ≠ 0`.
pub fn support_recovered(estimate: &DMatrix<f64>, truth: &DMatrix<f64>, epsilon: f64) -> bool {
    assert_eq!(estimate.shape(), truth.shape(), "support_recovered: shape mismatch");
    let p = truth.nrows();
    (0..p).all(|j| (0..p).all(|i| i == j || (estimate[(i, j)].abs() > epsilon) == (truth[(i, j)] != 0.0)))
}

/// Largest entrywise absolute difference.
pub fn sup_norm_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    assert_eq!(estimate.shape(), truth.shape(), "sup_norm_error: shape mismatch");
    sup_norm(&(estimate - truth))
}

/// Declaration threshold for a given truth.
pub fn support_epsilon(truth: &DMatrix<f64>, relative: f64) -> f64 {
    let p = truth.nrows();
    let mut largest = 0.0f64;
    for j in 0..p {
        for i in 0..p {
            if i != j {
                largest = largest.max(truth[(i, j)].abs());
            }
        }
    }
    if largest == 0.0 {
        relative
    } else {
        relative * largest
    }
}

/// Result of one estimator on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    pub support_recovered: bool,
    /// NaN when the estimator produced no estimate.
    pub sup_norm_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
    /// Why no estimate was produced (plug-in undefined, divergence, ...).
    pub failure: Option<String>,
}

impl EstimatorOutcome {
    fn failed(estimator: Estimator, iterations: usize, err: &Error, wall_time_ms: f64) -> Self {
        EstimatorOutcome {
            estimator,
            support_recovered: false,
            sup_norm_error: f64::NAN,
            iterations,
            converged: false,
            wall_time_ms,
            failure: Some(err.to_string()),
        }
    }
}

/// Samples `n1` and `n2` potentials from the two systems and scores each
/// requested estimator against the true difference. Estimator failures are
/// reported in the outcome, not as errors.
#[allow(clippy::too_many_arguments)]
pub fn run_instance(
    scenario: &NetworkScenario,
    n1: usize,
    n2: usize,
    solver: &SolverConfig,
    estimators: &[Estimator],
    epsilon: f64,
    sample_seed: u64,
    record_timing: bool,
) -> Result<Vec<EstimatorOutcome>> {
    solver.validate()?;
    let s1 = sample_potentials(scenario.b1(), scenario.sigma_x1(), n1, derive_seed(&[sample_seed, 1]))?;
    let s2 = sample_potentials(scenario.b2(), scenario.sigma_x2(), n2, derive_seed(&[sample_seed, 2]))?;
    let truth = scenario.delta_true().as_matrix();

    let mut out = Vec::with_capacity(estimators.len());
    for &estimator in estimators {
        let start = Instant::now();
        let result: Result<(SymmetricMatrix, usize, bool)> = match estimator {
            Estimator::Dtrace => (|| {
                let psi1 = psi_hat(&s1, scenario.sigma_x1())?;
                let psi2 = psi_hat(&s2, scenario.sigma_x2())?;
                let est = estimate_delta(&psi1, &psi2, solver)?;
                Ok((est.delta, est.iterations, est.converged))
            })(),
            Estimator::Sqrt => estimate_sqrt_delta(&s1, &s2, solver).map(|est| (est.delta, est.iterations, est.converged)),
            Estimator::Plugin => {
                plugin_delta(&s1, &s2, scenario.sigma_x1(), scenario.sigma_x2()).map(|delta| (delta, 0, true))
            }
        };
        let elapsed = if record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        out.push(match result {
            Ok((delta, iterations, converged)) => EstimatorOutcome {
                estimator,
                support_recovered: support_recovered(delta.as_matrix(), truth, epsilon),
                sup_norm_error: sup_norm_error(delta.as_matrix(), truth),
                iterations,
                converged,
                wall_time_ms: elapsed,
                failure: None,
            },
            Err(e @ (Error::PluginUndefined { .. } | Error::Singular { .. } | Error::NotPd { .. })) => {
                EstimatorOutcome::failed(estimator, 0, &e, elapsed)
            }
            Err(e @ Error::SolverDiverged { iteration }) => EstimatorOutcome::failed(estimator, iteration, &e, elapsed),
            Err(e) => return Err(e),
        });
    }
    Ok(out)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: usize,
    pub n: usize,
    pub ratio: f64,
    pub instance: usize,
    pub estimator: Estimator,
    pub support_recovered: bool,
    pub sup_norm_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_ms: f64,
}

impl SweepRow {
    fn key(&self) -> (usize, f64, usize, Estimator) {
        (self.p, self.ratio, self.instance, self.estimator)
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.p,
            self.n,
            format_sig9(self.ratio),
            self.instance,
            self.estimator.tag(),
            u8::from(self.support_recovered),
            format_sig9(self.sup_norm_error),
            self.iterations,
            u8::from(self.converged),
            format_sig9(self.wall_time_ms),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Set when the sweep was stopped early; `rows` then holds only the
    /// instances that finished.
    pub cancelled: bool,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for row in &self.rows {
            writeln!(w, "{}", row.to_csv_line())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    /// Per-(p, ratio, estimator) means, in row order.
    pub fn summarize(&self) -> Vec<SummaryRow> {
        let mut out: Vec<SummaryRow> = Vec::new();
        type Group<'a> = ((usize, f64, Estimator), Vec<&'a SweepRow>);
        let mut groups: Vec<Group> = Vec::new();
        for row in &self.rows {
            let key = (row.p, row.ratio, row.estimator);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(row),
                None => groups.push((key, vec![row])),
            }
        }
        groups.sort_by(|a, b| (a.0 .0, a.0 .1, a.0 .2).partial_cmp(&(b.0 .0, b.0 .1, b.0 .2)).expect("finite ratios"));
        for ((p, ratio, estimator), members) in groups {
            let count = members.len();
            let recovered = members.iter().filter(|r| r.support_recovered).count();
            let finite: Vec<f64> = members.iter().map(|r| r.sup_norm_error).filter(|e| e.is_finite()).collect();
            let mean_error = if finite.is_empty() {
                f64::NAN
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64
            };
            out.push(SummaryRow {
                p,
                n: members[0].n,
                ratio,
                estimator,
                instances: count,
                valid: finite.len(),
                recovery_rate: recovered as f64 / count as f64,
                mean_sup_norm_error: mean_error,
                mean_iterations: members.iter().map(|r| r.iterations as f64).sum::<f64>() / count as f64,
            });
        }
        out
    }
}

pub const SUMMARY_HEADER: &str = "p,n,ratio,estimator,instances,valid,recovery_rate,mean_sup_norm_error,mean_iterations";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub p: usize,
    pub n: usize,
    pub ratio: f64,
    pub estimator: Estimator,
    pub instances: usize,
    /// Instances with an estimate.
    pub valid: usize,
    pub recovery_rate: f64,
    /// Mean over instances with an estimate; NaN if there were none.
    pub mean_sup_norm_error: f64,
    pub mean_iterations: f64,
}

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.p,
            r.n,
            format_sig9(r.ratio),
            r.estimator.tag(),
            r.instances,
            r.valid,
            format_sig9(r.recovery_rate),
            format_sig9(r.mean_sup_norm_error),
            format_sig9(r.mean_iterations)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's current pool; sequential when built without the `parallel`
    /// feature.
    #[default]
    Parallel,
}

/// The scenario of instance `instance` at dimension `p`. It does not depend
/// on the sample size, so all points of a sweep share it.
pub fn build_scenario(cfg: &ExperimentConfig, p: usize, instance: usize) -> Result<NetworkScenario> {
    let (rows, cols) = lattice_shape(p)?;
    let mut last_err = None;
    for attempt in 0..MAX_SCENARIO_ATTEMPTS {
        let key = |tag: u64| derive_seed(&[cfg.seed, tag, p as u64, instance as u64, attempt]);
        let b1 = match &cfg.base {
            BaseSpec::Random { density, margin } => random_base_matrix(p, *density, *margin, key(TAG_BASE))?,
            BaseSpec::Fixed(b) => b.clone(),
        };
        let delta = grid_delta_rect(rows, cols, cfg.delta.weights, cfg.delta.sign, key(TAG_DELTA))?;
        let sigma_seed = key(TAG_SIGMA);
        let sigma1 = cfg.sigma.build(p, derive_seed(&[sigma_seed, 1]))?;
        let sigma2 = cfg.sigma.build(p, derive_seed(&[sigma_seed, 2]))?;
        match assemble_scenario(b1, delta, sigma1, sigma2, key(0)) {
            Ok(s) => return Ok(s),
            Err(e @ Error::NearSingularScenario { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Sample size for a point of the sweep.
pub fn sample_size(axis: &SampleAxis, value: f64, p: usize, d: usize) -> usize {
    let n = match axis {
        SampleAxis::Ratios(_) => value * (d * d) as f64 * (p as f64).ln(),
        SampleAxis::Multiples(_) => value * p as f64,
    };
    (n.ceil() as usize).max(2)
}

/// `λ = c·√(log p / n)`.
pub fn lambda_for(c: f64, p: usize, n: usize) -> f64 {
    c * ((p as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    p: usize,
    value: f64,
    instance: usize,
}

fn run_unit(cfg: &ExperimentConfig, unit: Unit) -> Result<Vec<SweepRow>> {
    let scenario = build_scenario(cfg, unit.p, unit.instance)?;
    let truth = scenario.delta_true().as_matrix();
    let d = max_degree(truth).max(1);
    let n = sample_size(&cfg.samples, unit.value, unit.p, d);
    let ratio = n as f64 / ((d * d) as f64 * (unit.p as f64).ln());
    let ratio = match cfg.samples {
        SampleAxis::Ratios(_) => unit.value,
        SampleAxis::Multiples(_) => ratio,
    };
    let solver = SolverConfig {
        lambda: lambda_for(cfg.lambda_scale, unit.p, n),
        ..cfg.solver.clone()
    };
    let epsilon = support_epsilon(truth, cfg.support_epsilon_rel);
    let sample_seed = derive_seed(&[cfg.seed, TAG_SAMPLES, unit.p as u64, unit.value.to_bits(), unit.instance as u64]);
    let outcomes = run_instance(&scenario, n, n, &solver, &cfg.estimators, epsilon, sample_seed, cfg.record_timing)?;
    Ok(outcomes
        .into_iter()
        .map(|o| SweepRow {
            p: unit.p,
            n,
            ratio,
            instance: unit.instance,
            estimator: o.estimator,
            support_recovered: o.support_recovered,
            sup_norm_error: o.sup_norm_error,
            iterations: o.iterations,
            converged: o.converged,
            wall_time_ms: o.wall_time_ms,
        })
        .collect())
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with(cfg, Execution::default(), None)
}

/// Runs every `(p, sample size, instance)` point. When `cancel` becomes
/// true, points not yet started are skipped and the finished rows are
/// returned with `cancelled` set.
pub fn run_sweep_with(cfg: &ExperimentConfig, execution: Execution, cancel: Option<&AtomicBool>) -> Result<SweepResult> {
    cfg.validate()?;
    let mut units = Vec::new();
    for &p in &cfg.dims {
        for &value in cfg.samples.values() {
            for instance in 0..cfg.instances {
                units.push(Unit { p, value, instance });
            }
        }
    }
    let stopped = || cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let work = |unit: Unit| -> Option<Result<Vec<SweepRow>>> {
        if stopped() {
            None
        } else {
            Some(run_unit(cfg, unit))
        }
    };

    let results: Vec<Option<Result<Vec<SweepRow>>>> = match execution {
        Execution::Sequential => units.into_iter().map(work).collect(),
        Execution::Parallel => parallel_map(units, work),
    };

    let mut rows = Vec::new();
    let mut cancelled = false;
    for r in results {
        match r {
            Some(r) => rows.extend(r?),
            None => cancelled = true,
        }
    }
    rows.sort_by(|a, b| a.key().partial_cmp(&b.key()).expect("finite ratios"));
    Ok(SweepResult { rows, cancelled })
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(units: Vec<Unit>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Unit) -> T + Sync + Send,
{
    use rayon::prelude::*;
    units.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(units: Vec<Unit>, f: F) -> Vec<T>
where
    F: Fn(Unit) -> T,
{
    units.into_iter().map(f).collect()
}

/// Divides a matrix by its mean diagonal entry.
pub fn normalize_mean_diagonal(m: &SymmetricMatrix) -> SymmetricMatrix {
    let p = m.dim();
    let mean = m.diagonal().sum() / p as f64;
    if mean > 0.0 {
        m.scale(1.0 / mean)
    } else {
        m.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            dims: vec![16],
            samples: SampleAxis::Ratios(vec![0.5, 5.0]),
            instances: 5,
            base: BaseSpec::Random {
                density: 0.05,
                margin: 1.0,
            },
            solver: SolverConfig {
                rho: 0.05,
                max_iter: 3000,
                tol_consensus: 1e-5,
                ..Default::default()
            },
            estimators: vec![Estimator::Dtrace, Estimator::Plugin],
            seed: 11,
            ..Default::default()
        }
    }

    #[test]
    fn support_examples() {
        let truth = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(support_recovered(&truth, &truth, 0.1));
        assert!(!support_recovered(&DMatrix::zeros(3, 3), &truth, 0.1));
        let mut spurious = truth.clone();
        spurious[(0, 2)] = 0.2;
        spurious[(2, 0)] = 0.2;
        assert!(!support_recovered(&spurious, &truth, 0.1));
        // diagonal differences never matter
        let mut diag = truth.clone();
        diag[(1, 1)] = 0.0;
        assert!(support_recovered(&diag, &truth, 0.1));
    }

    #[test]
    fn sup_norm_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(sup_norm_error(&a, &a), 0.0);
        let mut b = a.clone();
        b[(1, 0)] += 0.3;
        assert!((sup_norm_error(&b, &a) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn sup_norm_matches_loop() {
        let a = random_pd_matrix(6, 5.0, 1).unwrap();
        let b = random_pd_matrix(6, 5.0, 2).unwrap();
        let mut worst = 0.0f64;
        for i in 0..6 {
            for j in 0..6 {
                worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
            }
        }
        assert_eq!(sup_norm_error(a.as_matrix(), b.as_matrix()), worst);
    }

    #[test]
    fn row_count_and_order() {
        let cfg = small_cfg();
        let res = run_sweep_with(&cfg, Execution::Sequential, None).unwrap();
        assert_eq!(res.rows.len(), 10 * 2);
        assert!(!res.cancelled);
        let keys: Vec<_> = res.rows.iter().map(|r| r.key()).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
        // n = ceil(0.5 · 16 · ln 16) = 23 > p, so the plug-in is defined here
        assert_eq!(res.rows[0].n, 23);
    }

    #[test]
    fn plugin_rows_at_small_n_are_undefined() {
        let cfg = ExperimentConfig {
            samples: SampleAxis::Multiples(vec![0.5]),
            estimators: vec![Estimator::Plugin, Estimator::Dtrace],
            instances: 2,
            ..small_cfg()
        };
        let res = run_sweep(&cfg).unwrap();
        for row in &res.rows {
            assert_eq!(row.n, 8);
            match row.estimator {
                Estimator::Plugin => {
                    assert!(!row.support_recovered && !row.converged && row.sup_norm_error.is_nan());
                }
                _ => assert!(row.sup_norm_error.is_finite()),
            }
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = small_cfg();
        let a = run_sweep_with(&cfg, Execution::Sequential, None).unwrap();
        let b = run_sweep_with(&cfg, Execution::Parallel, None).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn cancellation_skips_work() {
        let flag = AtomicBool::new(true);
        let res = run_sweep_with(&small_cfg(), Execution::Sequential, Some(&flag)).unwrap();
        assert!(res.cancelled);
        assert!(res.rows.is_empty());
    }

    #[test]
    fn large_samples_recover_support() {
        let b1 = SymmetricMatrix::identity(4).scale(2.0);
        let delta = grid_delta_rect(2, 2, WeightRange::new(0.8, 1.0).unwrap(), SignMode::Mixed, 3).unwrap();
        let id = SymmetricMatrix::identity(4);
        let scenario = assemble_scenario(b1, delta, id.clone(), id, 0).unwrap();
        let n = 1_000_000;
        let solver = SolverConfig {
            lambda: lambda_for(0.5, 4, n),
            rho: 0.1,
            ..Default::default()
        };
        let eps = support_epsilon(scenario.delta_true().as_matrix(), 1e-3);
        let out = run_instance(&scenario, n, n, &solver, &[Estimator::Dtrace], eps, 5, false).unwrap();
        assert!(out[0].support_recovered, "{out:?}");
        assert!(out[0].converged);
    }

    #[test]
    fn validation_errors() {
        let bad = [
            ExperimentConfig { instances: 0, ..small_cfg() },
            ExperimentConfig {
                samples: SampleAxis::Ratios(vec![0.0]),
                ..small_cfg()
            },
            ExperimentConfig { dims: vec![7], ..small_cfg() },
            ExperimentConfig {
                estimators: vec![],
                ..small_cfg()
            },
            ExperimentConfig {
                base: BaseSpec::Fixed(SymmetricMatrix::identity(9)),
                ..small_cfg()
            },
        ];
        for cfg in bad {
            let err = run_sweep(&cfg).unwrap_err();
            assert!(matches!(err, Error::InvalidParameter { .. }), "{err:?}");
        }
    }

    #[test]
    fn summary_means() {
        let mk = |instance, rec, err| SweepRow {
            p: 4,
            n: 10,
            ratio: 1.0,
            instance,
            estimator: Estimator::Dtrace,
            support_recovered: rec,
            sup_norm_error: err,
            iterations: 10,
            converged: true,
            wall_time_ms: 0.0,
        };
        let res = SweepResult {
            rows: vec![mk(0, true, 0.2), mk(1, false, 0.4), mk(2, false, f64::NAN)],
            cancelled: false,
        };
        let s = res.summarize();
        assert_eq!(s.len(), 1);
        assert!((s[0].recovery_rate - 1.0 / 3.0).abs() < 1e-15);
        assert!((s[0].mean_sup_norm_error - 0.3).abs() < 1e-15);
        assert_eq!(s[0].valid, 2);
    }
}
