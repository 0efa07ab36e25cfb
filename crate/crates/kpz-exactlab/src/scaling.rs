//! Space-like path parametrizations, scaling coefficients, and the
//! Monte-Carlo convergence experiments toward the limit process.
//!
//! A path through (time, particle-label) space is described by a function
//! π around an anchor θ; the observation scale T stretches it, the
//! transversal coordinate u probes correlations at T^(2/3), and
//! fluctuations are read off at T^(1/3).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dynamics::{png_height, png_nucleations, sample_position, RngSpec};
use crate::fredholm::joint_prob_airy1;
use crate::png_kernels::AiryObservation;
use crate::tasep_kernels::{ModelParams, SpaceTimePoint};
use crate::{Error, Result};

const FD_STEP: f64 = 1e-5;

/// Twice-differentiable path u-parametrization with anchor θ; derivatives
/// may be supplied analytically or fall back to central finite differences.
pub struct SpaceLikePathSpec {
    pi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub theta: f64,
    pub pi_prime: Option<f64>,
    pub pi_second: Option<f64>,
}

impl SpaceLikePathSpec {
    pub fn new<F>(pi: F, theta: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let spec = SpaceLikePathSpec {
            pi: Box::new(pi),
            theta,
            pi_prime: None,
            pi_second: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_derivatives(mut self, first: f64, second: f64) -> Self {
        self.pi_prime = Some(first);
        self.pi_second = Some(second);
        self
    }

    /// Observation at a common fixed time: π(θ) = 1 − θ anchored at 0.
    pub fn fixed_time() -> Self {
        SpaceLikePathSpec {
            pi: Box::new(|th| 1.0 - th),
            theta: 0.0,
            pi_prime: Some(-1.0),
            pi_second: Some(0.0),
        }
    }

    /// A tagged particle: π(θ) = α + θ keeps the label fixed at αT.
    pub fn tagged_particle(alpha: f64) -> Self {
        SpaceLikePathSpec {
            pi: Box::new(move |th| alpha + th),
            theta: 0.0,
            pi_prime: Some(1.0),
            pi_second: Some(0.0),
        }
    }

    pub fn value(&self) -> f64 {
        (self.pi)(self.theta)
    }

    pub fn first_derivative(&self) -> f64 {
        self.pi_prime.unwrap_or_else(|| {
            ((self.pi)(self.theta + FD_STEP) - (self.pi)(self.theta - FD_STEP)) / (2.0 * FD_STEP)
        })
    }

    pub fn second_derivative(&self) -> f64 {
        self.pi_second.unwrap_or_else(|| {
            ((self.pi)(self.theta + FD_STEP) - 2.0 * (self.pi)(self.theta)
                + (self.pi)(self.theta - FD_STEP))
                / (FD_STEP * FD_STEP)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let slope = self.first_derivative();
        if slope.abs() > 1.0 + 1e-9 {
            return Err(Error::OutOfRange(format!(
                "path slope {slope} outside [-1, 1]"
            )));
        }
        if self.value() + self.theta <= 0.0 {
            return Err(Error::OutOfRange(
                "path must satisfy pi(theta) + theta > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Vertical/horizontal scaling coefficients of the limit process, plus the
/// saddle-point constants they are algebraically tied to.
#[derive(Debug, Clone, Copy)]
pub struct ScalingParams {
    pub q: f64,
    /// mean particle speed 1 − √q
    pub v: f64,
    pub kappa_v: f64,
    pub kappa_h: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// growth-model coefficients, set when built from a growth path
    pub s_v: Option<f64>,
    pub s_h: Option<f64>,
}

/// Scaling coefficients for a particle-system path; the internal
/// consistency identities are verified to 1e-12 before returning.
pub fn scaling_coeffs(spec: &SpaceLikePathSpec, q: f64) -> Result<ScalingParams> {
    spec.validate()?;
    let params = ModelParams::new(q)?;
    let sq = q.sqrt();
    let s = spec.value() + spec.theta;
    let d1 = spec.first_derivative();
    let denom = (d1 + 1.0) * (1.0 - sq) / 2.0 + 1.0 - d1;
    let kappa_v = s.powf(1.0 / 3.0) * (1.0 - q).powf(1.0 / 3.0) * q.powf(1.0 / 6.0);
    let kappa_h = s.powf(2.0 / 3.0) * (1.0 - q).powf(2.0 / 3.0) * q.powf(-1.0 / 6.0) / denom;
    let kappa1 = sq * (1.0 + sq).powi(2) * denom;
    let kappa2 = s * (1.0 - q) * (1.0 + sq).powi(3) / q;
    let kv_alt = kappa2.powf(1.0 / 3.0) * sq / (1.0 + sq);
    let kh_alt = kappa2.powf(2.0 / 3.0) * q / kappa1;
    if (kv_alt - kappa_v).abs() > 1e-12 * kappa_v.abs()
        || (kh_alt - kappa_h).abs() > 1e-12 * kappa_h.abs()
    {
        return Err(Error::NumericalInconsistency(format!(
            "scaling-coefficient identities violated: {kappa_v} vs {kv_alt}, {kappa_h} vs {kh_alt}"
        )));
    }
    Ok(ScalingParams {
        q,
        v: 1.0 - params.q.sqrt(),
        kappa_v,
        kappa_h,
        kappa1,
        kappa2,
        s_v: None,
        s_h: None,
    })
}

/// A lattice observation point on the stretched path, together with the
/// centering needed to read off the rescaled fluctuation.
#[derive(Debug, Clone, Copy)]
pub struct TasepObservation {
    pub point: SpaceTimePoint,
    /// deterministic reference position −2n + v·t
    pub reference: f64,
    t_cbrt: f64,
}

impl TasepObservation {
    /// Rescaled fluctuation of an observed position.
    pub fn xi(&self, x: i64) -> f64 {
        (x as f64 - self.reference) / (-self.t_cbrt)
    }
}

/// Stretch the path: t(u) and n(u) at scale T, offset u.
pub fn tasep_observation(
    spec: &SpaceLikePathSpec,
    q: f64,
    big_t: f64,
    u: f64,
) -> Result<TasepObservation> {
    spec.validate()?;
    if big_t <= 0.0 {
        return Err(Error::OutOfRange(format!("need T > 0, got {big_t}")));
    }
    let (p0, p1, p2) = (spec.value(), spec.first_derivative(), spec.second_derivative());
    let th = spec.theta;
    let t23 = big_t.powf(2.0 / 3.0);
    let t13 = big_t.powf(1.0 / 3.0);
    let t = ((p0 + th) * big_t - (p1 + 1.0) * u * t23 + 0.5 * p2 * u * u * t13).floor();
    let n = ((p0 - th) * big_t + (1.0 - p1) * u * t23 + 0.5 * p2 * u * u * t13).floor();
    if t < 0.0 || n < 1.0 {
        return Err(Error::OutOfRange(format!(
            "scaled observation off the lattice: t = {t}, n = {n}"
        )));
    }
    let v = 1.0 - q.sqrt();
    let point = SpaceTimePoint {
        n: n as i64,
        t: t as i64,
    };
    Ok(TasepObservation {
        point,
        reference: -2.0 * n + v * t,
        t_cbrt: t13,
    })
}

/// A growth-model observation point; constant γ is the fixed-time case.
#[derive(Debug, Clone, Copy)]
pub struct PngObservation {
    pub x: f64,
    pub t: f64,
    pub s_v: f64,
    pub s_h: f64,
    t_cbrt: f64,
}

impl PngObservation {
    /// Rescaled height fluctuation (h − 2t)/T^(1/3).
    pub fn rescale(&self, h: i64) -> f64 {
        (h as f64 - 2.0 * self.t) / self.t_cbrt
    }
}

pub fn png_observation(
    gamma0: f64,
    gamma0_prime: f64,
    gamma0_second: f64,
    big_t: f64,
    u: f64,
) -> Result<PngObservation> {
    if big_t <= 0.0 {
        return Err(Error::OutOfRange(format!("need T > 0, got {big_t}")));
    }
    let t23 = big_t.powf(2.0 / 3.0);
    let t13 = big_t.powf(1.0 / 3.0);
    let t = gamma0 * big_t + gamma0_prime * u * t23 + 0.5 * gamma0_second * u * u * t13;
    if t <= 0.0 {
        return Err(Error::OutOfRange(format!("scaled time {t} not positive")));
    }
    let s_v = (2.0 * gamma0).powf(1.0 / 3.0);
    Ok(PngObservation {
        x: u * t23,
        t,
        s_v,
        s_h: s_v * s_v,
        t_cbrt: t13,
    })
}

// ---------------------------------------------------------------------------
// Convergence experiments
// ---------------------------------------------------------------------------

/// Sorted samples with CDF evaluation and a distribution-free error band.
#[derive(Debug, Clone)]
pub struct EmpiricalCDF {
    sorted: Vec<f64>,
}

impl EmpiricalCDF {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        EmpiricalCDF { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples ≤ s.
    pub fn eval(&self, s: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= s) as f64 / self.sorted.len() as f64
    }

    /// Dvoretzky–Kiefer–Wolfowitz band: the empirical CDF deviates from the
    /// truth by more than this anywhere with probability at most 1−conf.
    pub fn dkw_band(&self, confidence: f64) -> f64 {
        let alpha = 1.0 - confidence;
        ((2.0 / alpha).ln() / (2.0 * self.sorted.len() as f64)).sqrt()
    }
}

pub enum ExperimentKind {
    Tasep { q: f64, spec: SpaceLikePathSpec },
    Png { gamma0: f64, gamma0_prime: f64, gamma0_second: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub t_scale: f64,
    pub u: f64,
    pub s: f64,
    pub empirical: f64,
    pub exact: f64,
    pub ks: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// per scale: (T, sup-distance over the grid, DKW band at 0.99)
    pub ks_by_scale: Vec<(f64, f64, f64)>,
    pub monotone_within_band: bool,
}

/// Limit-law marginal P(limit(u) ≤ s), cached over repeated (u, s) pairs.
struct MarginalCache {
    cache: HashMap<(u64, u64), f64>,
}

impl MarginalCache {
    fn new() -> Self {
        MarginalCache { cache: HashMap::new() }
    }

    fn get(&mut self, tau: f64, cut: f64) -> Result<f64> {
        let key = (tau.to_bits(), cut.to_bits());
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = joint_prob_airy1(&AiryObservation::new(vec![tau], vec![cut])?)?;
        self.cache.insert(key, v);
        Ok(v)
    }
}

/// Empirical one-point laws of the rescaled observable against the limit
/// marginal, for each scale T and offset u.  `samples` has either one entry
/// (shared) or one entry per scale.
pub fn convergence_experiment(
    kind: &ExperimentKind,
    t_list: &[f64],
    u_list: &[f64],
    s_grid: &[f64],
    samples: &[usize],
    rng: RngSpec,
) -> Result<ConvergenceReport> {
    if t_list.is_empty() || u_list.is_empty() || s_grid.is_empty() || samples.is_empty() {
        return Err(Error::IncompatibleInputs("empty experiment grid".into()));
    }
    if samples.len() != 1 && samples.len() != t_list.len() {
        return Err(Error::IncompatibleInputs(
            "sample counts must be shared or given per scale".into(),
        ));
    }
    let mut marginal = MarginalCache::new();
    let mut rows = Vec::new();
    let mut ks_by_scale = Vec::new();
    for (ti, &big_t) in t_list.iter().enumerate() {
        let count = samples[ti.min(samples.len() - 1)];
        let mut worst = 0.0f64;
        let mut band = 0.0f64;
        for (ui, &u) in u_list.iter().enumerate() {
            let cell = (ti * u_list.len() + ui) as u64;
            let (values, tau, vert) = match kind {
                ExperimentKind::Tasep { q, spec } => {
                    let obs = tasep_observation(spec, *q, big_t, u)?;
                    let params = ModelParams::new(*q)?;
                    let coeffs = scaling_coeffs(spec, *q)?;
                    let values: Result<Vec<f64>> = (0..count)
                        .into_par_iter()
                        .map(|i| {
                            let mut r =
                                RngSpec::new(rng.seed, rng.stream ^ (cell << 40) ^ i as u64).rng();
                            Ok(obs.xi(sample_position(&params, obs.point.n, obs.point.t, &mut r)?))
                        })
                        .collect();
                    (values?, coeffs.kappa_h * u, coeffs.kappa_v)
                }
                ExperimentKind::Png { gamma0, gamma0_prime, gamma0_second } => {
                    let obs = png_observation(*gamma0, *gamma0_prime, *gamma0_second, big_t, u)?;
                    let values: Vec<f64> = (0..count)
                        .into_par_iter()
                        .map(|i| {
                            let mut r =
                                RngSpec::new(rng.seed, rng.stream ^ (cell << 40) ^ i as u64).rng();
                            let pts = png_nucleations(obs.t, (obs.x, obs.x), &mut r);
                            obs.rescale(png_height(&pts, obs.t + obs.x, obs.t - obs.x))
                        })
                        .collect();
                    (values, obs.s_h * u, obs.s_v)
                }
            };
            let cdf = EmpiricalCDF::new(values);
            band = cdf.dkw_band(0.99);
            let mut ks = 0.0f64;
            for &s in s_grid {
                let emp = cdf.eval(s);
                let exact = marginal.get(tau, s / vert)?;
                ks = ks.max((emp - exact).abs());
                rows.push(ConvergenceRow {
                    t_scale: big_t,
                    u,
                    s,
                    empirical: emp,
                    exact,
                    ks: (emp - exact).abs(),
                });
            }
            worst = worst.max(ks);
        }
        ks_by_scale.push((big_t, worst, band));
    }
    let monotone_within_band = ks_by_scale.windows(2).all(|w| {
        let (_, ks0, b0) = w[0];
        let (_, ks1, b1) = w[1];
        ks1 <= ks0 + b0 + b1
    });
    Ok(ConvergenceReport {
        rows,
        ks_by_scale,
        monotone_within_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_time_observation() {
        let spec = SpaceLikePathSpec::fixed_time();
        let obs = tasep_observation(&spec, 0.25, 100.0, 0.0).unwrap();
        assert_eq!(obs.point.t, 100);
        assert_eq!(obs.point.n, 100);
        // u only moves the label for a fixed-time path
        let obs = tasep_observation(&spec, 0.25, 1000.0, 1.0).unwrap();
        assert_eq!(obs.point.t, 1000);
        assert_eq!(obs.point.n, 1200);
    }

    #[test]
    fn tagged_particle_keeps_label() {
        let spec = SpaceLikePathSpec::tagged_particle(2.0);
        for u in [-1.0, 0.0, 1.5] {
            let obs = tasep_observation(&spec, 0.5, 500.0, u).unwrap();
            assert_eq!(obs.point.n, 1000, "u = {u}");
        }
    }

    #[test]
    fn transversal_parity_swaps_corrections() {
        // with pi' = 0 the T^{2/3} corrections of t and n have opposite
        // signs under u -> -u
        let spec = SpaceLikePathSpec::new(|_| 1.0, 0.5).unwrap();
        let a = tasep_observation(&spec, 0.5, 8000.0, 1.0).unwrap();
        let b = tasep_observation(&spec, 0.5, 8000.0, -1.0).unwrap();
        let base_t = 1.5 * 8000.0;
        let base_n = 0.5 * 8000.0;
        assert!((a.point.t as f64 - base_t) < 0.0 && (b.point.t as f64 - base_t) > 0.0);
        assert!((a.point.n as f64 - base_n) > 0.0 && (b.point.n as f64 - base_n) < 0.0);
        assert!(
            ((a.point.t as f64 - base_t) + (b.point.t as f64 - base_t)).abs() <= 1.0,
            "floors within one of symmetric"
        );
    }

    #[test]
    fn coefficient_values_and_identities() {
        let spec = SpaceLikePathSpec::fixed_time();
        let c = scaling_coeffs(&spec, 0.25).unwrap();
        assert!((c.kappa_v - (3.0f64 / 8.0).powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((c.kappa_h - 0.52003).abs() < 1e-5, "kappa_h = {}", c.kappa_h);
        assert!((c.v - 0.5).abs() < 1e-15);
        for q in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for spec in [
                SpaceLikePathSpec::fixed_time(),
                SpaceLikePathSpec::tagged_particle(1.0),
                SpaceLikePathSpec::new(|th| 1.0 + 0.3 * th * th, 0.4).unwrap(),
            ] {
                scaling_coeffs(&spec, q).unwrap(); // identity checks inside
            }
        }
    }

    #[test]
    fn finite_difference_matches_analytic() {
        let spec = SpaceLikePathSpec::new(|th| 1.0 + 0.3 * th * th, 0.4).unwrap();
        assert!((spec.first_derivative() - 0.24).abs() < 1e-7);
        assert!((spec.second_derivative() - 0.6).abs() < 1e-4);
    }

    #[test]
    fn png_observation_points() {
        let obs = png_observation(1.0, 0.0, 0.0, 100.0, 0.0).unwrap();
        assert_eq!(obs.x, 0.0);
        assert_eq!(obs.t, 100.0);
        assert!((obs.s_v - 2.0f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!((obs.s_h - obs.s_v * obs.s_v).abs() < 1e-15);
        let obs = png_observation(1.0, 0.0, 0.0, 1000.0, 1.0).unwrap();
        assert!((obs.x - 100.0).abs() < 1e-10);
        assert!((obs.t - 1000.0).abs() < 1e-10);
    }

    #[test]
    fn empirical_cdf_basics() {
        let cdf = EmpiricalCDF::new(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(cdf.eval(0.0), 0.0);
        assert_eq!(cdf.eval(2.0), 0.75);
        assert_eq!(cdf.eval(5.0), 1.0);
        assert!(cdf.dkw_band(0.99) > 0.0);
    }

    #[test]
    fn small_convergence_experiment() {
        let kind = ExperimentKind::Tasep {
            q: 0.25,
            spec: SpaceLikePathSpec::fixed_time(),
        };
        let report = convergence_experiment(
            &kind,
            &[60.0],
            &[0.0],
            &[-1.0, 0.0, 1.0],
            &[3000],
            RngSpec::new(42, 0),
        )
        .unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            assert!((0.0..=1.0).contains(&row.empirical));
            assert!((0.0..=1.0).contains(&row.exact));
        }
        let (_, ks, band) = report.ks_by_scale[0];
        // T = 60 is far from the limit but the laws are already close
        assert!(ks < 0.25 + band, "ks = {ks}, band = {band}");
    }
}
