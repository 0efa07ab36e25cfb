//! Kernel ingredients for the discrete-time parallel-update TASEP with
//! alternating ("flat") initial condition: the function F_n, the one-step
//! weight φ♯, the space-like transport terms φ and φ*, the biorthogonal
//! families Ψ/Φ, and the extended kernels (flat and finite-N) whose
//! Fredholm determinants give joint distributions along space-like paths.
//!
//! Every quantity is a circle integral evaluated by `contour_quad`; the
//! exact-rational `residue` module provides an independent oracle for all
//! of them at rational q.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour_quad::{circle_integral, circle_integral2, real_part, Contour, DEFAULT_TOL};
use crate::error::{Error, Result};

/// Model parameters: q is the probability of NOT jumping, p = 1 - q the
/// hop probability of an unblocked particle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
}

impl ModelParams {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::DomainError(format!("q = {q} must lie in (0,1)")));
        }
        Ok(ModelParams { q })
    }

    pub fn p(&self) -> f64 {
        1.0 - self.q
    }
}

/// An observation point: particle label n at integer time t.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub n: i64,
    pub t: i64,
}

/// The space-like partial order: (n1,t1) ≺ (n2,t2) iff n2 ≥ n1, t2 ≤ t1
/// and the couples differ.
pub fn precedes(p1: SpaceTimePoint, p2: SpaceTimePoint) -> bool {
    p2.n >= p1.n && p2.t <= p1.t && p1 != p2
}

/// A space-like observation path with cut levels a_k (events x_{n_k}(t_k) ≥ a_k).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservationPath {
    pub points: Vec<SpaceTimePoint>,
    pub cuts: Vec<i64>,
}

impl ObservationPath {
    pub fn new(points: Vec<SpaceTimePoint>, cuts: Vec<i64>) -> Result<Self> {
        if points.is_empty() || points.len() != cuts.len() {
            return Err(Error::IncompatibleInputs(
                "observation path needs equally many points and cuts, at least one".into(),
            ));
        }
        for p in &points {
            if p.t < 0 {
                return Err(Error::DomainError(format!("negative time {}", p.t)));
            }
        }
        for k in 1..points.len() {
            if !precedes(points[k - 1], points[k]) {
                return Err(Error::IncompatibleInputs(format!(
                    "points {:?} and {:?} are not space-like ordered",
                    points[k - 1],
                    points[k]
                )));
            }
        }
        Ok(ObservationPath { points, cuts })
    }
}

/// Initial condition for the finite-system oracles and simulators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum InitialCondition {
    /// x_i(0) = -2i for all labels i (flat interface).
    AlternatingInfinite,
    /// Finitely many particles at strictly decreasing positions y_1 > y_2 > ...
    FiniteList(Vec<i64>),
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        if let InitialCondition::FiniteList(y) = self {
            if y.is_empty() || y.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::IncompatibleInputs(
                    "finite initial condition must be nonempty and strictly decreasing".into(),
                ));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Contours
// ---------------------------------------------------------------------------

/// Γ₀: encloses 0 only (excludes -1 and -1/p).
pub fn gamma0(params: &ModelParams) -> Result<Contour> {
    Contour::circle(0.0, 0.4 * (1.0 / params.p()).min(1.0))
}

/// Γ₋₁: encloses -1 only (excludes 0 and -1/p).
pub fn gamma_m1(params: &ModelParams) -> Result<Contour> {
    let p = params.p();
    Contour::circle(-1.0, 0.4 * (1.0 - 1.0 / p).abs().min(1.0))
}

/// Γ₀,₋₁: encloses 0 and -1, excludes -1/p.
pub fn gamma_0m1(params: &ModelParams) -> Result<Contour> {
    Contour::circle(0.0, 1.0 + 0.4 * (1.0 / params.p() - 1.0))
}

fn pole_list(params: &ModelParams) -> [Complex64; 3] {
    [
        Complex64::new(0.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(-1.0 / params.p(), 0.0),
    ]
}

fn integrate_real<F>(f: F, c: &Contour, params: &ModelParams, what: &str) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    c.check_clearance(&pole_list(params))?;
    let q = circle_integral(f, c, DEFAULT_TOL)?;
    real_part(&q, what)
}

fn powi(z: Complex64, e: i64) -> Complex64 {
    z.powi(e as i32)
}

// ---------------------------------------------------------------------------
// Kernel ingredients
// ---------------------------------------------------------------------------

/// F_n(x,t): the signed-index contour integral over Γ₀,₋₁,
///   F_{-m}(x,t) = (1/2πi) ∮ dw w^m (1+w)^{-m-x-1} (1+pw)^t
/// so F_n integrates w^{-n} (1+w)^{n-x-1} (1+pw)^t.
pub fn f_n(n: i64, x: i64, t: i64, params: &ModelParams) -> Result<f64> {
    if t >= 0 && x > t {
        // the integrand is O(w^{t-x-1}) at infinity and all finite poles
        // are enclosed, so the value is exactly zero; the quadrature would
        // only return amplified roundoff here
        return Ok(0.0);
    }
    let p = params.p();
    let c = gamma_0m1(params)?;
    integrate_real(
        |w| powi(w, -n) * powi(1.0 + w, n - x - 1) * powi(1.0 + p * w, t),
        &c,
        params,
        "F_n",
    )
}

/// One-step weight φ♯(x,y): 1 for y ≥ x, p for y = x-1, 0 below.
pub fn phi_sharp(x: i64, y: i64, params: &ModelParams) -> f64 {
    if y >= x {
        1.0
    } else if y == x - 1 {
        params.p()
    } else {
        0.0
    }
}

/// Transport term φ between two space-like points (contour around -1 only):
///   (1/2πi) ∮ dw (1+pw)^{t1-t2} (1+w)^{-(x1-x2+1)} (-w/((1+w)(1+pw)))^{n1-n2}.
pub fn phi_pair(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> Result<f64> {
    let p = params.p();
    let dn = p1.n - p2.n;
    let c = gamma_m1(params)?;
    integrate_real(
        |w| {
            powi(1.0 + p * w, p1.t - p2.t - dn)
                * powi(1.0 + w, -(x1 - x2 + 1) - dn)
                * powi(-w, dn)
        },
        &c,
        params,
        "phi_pair",
    )
}

/// φ* of the general-initial-condition kernel: same integrand as φ but with
/// (+w)^{n1-n2} and the contour enclosing both 0 and -1, multiplied by the
/// space-like indicator.
pub fn phi_star(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> Result<f64> {
    if !precedes(p1, p2) {
        return Ok(0.0);
    }
    let p = params.p();
    let dn = p1.n - p2.n;
    let c = gamma_0m1(params)?;
    integrate_real(
        |w| {
            powi(1.0 + p * w, p1.t - p2.t - dn)
                * powi(1.0 + w, -(x1 - x2 + 1) - dn)
                * powi(w, dn)
        },
        &c,
        params,
        "phi_star",
    )
}

/// Ψ_j^{n,t}(x) for the alternating initial condition y_k = -2k:
///   (1/2πi) ∮_{Γ₀,₋₁} dw w^j (1+pw)^{t-j} (1+w)^{-(x+2n-j+1)}.
pub fn psi(n: i64, t: i64, j: i64, x: i64, params: &ModelParams) -> Result<f64> {
    if x + 2 * n - j + 1 <= 0 {
        // nonnegative power of (1+w): for 0 <= j <= t the integrand is entire
        if j >= 0 && t >= j {
            return Ok(0.0);
        }
    } else if t >= j && x > t + j - 2 * n {
        // O(w^{t+j-x-2n-1}) at infinity with every finite pole enclosed
        return Ok(0.0);
    }
    let p = params.p();
    // for 0 <= j <= t the only pole is at w = -1; a circle centered there
    // keeps |1+w| constant, so the high negative power cannot blow up the
    // quadrature's dynamic range
    let c = if j >= 0 && t >= j {
        Contour::circle(-1.0, 0.5)?
    } else {
        gamma_0m1(params)?
    };
    integrate_real(
        |w| powi(w, j) * powi(1.0 + p * w, t - j) * powi(1.0 + w, -(x + 2 * n - j + 1)),
        &c,
        params,
        "psi",
    )
}

/// Φ_j^{n,t}(x), the family biorthogonal to Ψ spanning the polynomials:
///   (1/2πi) ∮_{Γ₀} dz (1+2z+pz²)(1+z)^{x+2n-j-1} z^{-(j+1)} (1+pz)^{-(t-j+1)}.
/// Φ_0 is identically 1.
pub fn phi_poly(n: i64, t: i64, j: i64, x: i64, params: &ModelParams) -> Result<f64> {
    if j == 0 {
        return Ok(1.0);
    }
    let p = params.p();
    let c = gamma0(params)?;
    integrate_real(
        |z| {
            (1.0 + 2.0 * z + p * z * z)
                * powi(1.0 + z, x + 2 * n - j - 1)
                * powi(z, -(j + 1))
                * powi(1.0 + p * z, -(t - j + 1))
        },
        &c,
        params,
        "phi_poly",
    )
}

/// The Γ₀ part K̃ of the flat-case kernel:
///   -(1/2πi) ∮ dz (1+z)^{x2+n1+n2} (-z)^{-(x1+n1+n2+1)}
///            q^{t1-2n1-x1} (1+pz)^{-(t1+t2+1-(x1+n1+n2))}.
pub fn k_flat_tilde(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> Result<f64> {
    let p = params.p();
    let q = params.q;
    let e1 = x2 + p1.n + p2.n;
    let e2 = x1 + p1.n + p2.n + 1;
    let e3 = p1.t + p2.t + 1 - (x1 + p1.n + p2.n);
    let pref = q.powi((p1.t - 2 * p1.n - x1) as i32);
    let c = gamma0(params)?;
    let v = integrate_real(
        |z| powi(1.0 + z, e1) * powi(-z, -e2) * powi(1.0 + p * z, -e3),
        &c,
        params,
        "k_flat_tilde",
    )?;
    Ok(-pref * v)
}

/// Flat-case extended kernel K = -φ·𝟙_{p1≺p2} + K̃.
pub fn k_flat(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> Result<f64> {
    let mut v = k_flat_tilde(p1, p2, x1, x2, params)?;
    if precedes(p1, p2) {
        v -= phi_pair(p1, p2, x1, x2, params)?;
    }
    Ok(v)
}

/// Admissible contour pair for the finite-N double integral: Γ₀ around 0
/// (radius r_z) and Γ₋₁ around -1 (radius r_w) with
///   * the image {-(1+z)/(1+pz) : z ∈ Γ₀} strictly inside Γ₋₁,
///   * no point of Γ₀ inside Γ₋₁ (0.1 absolute gap between the circles),
///   * w = -1/p outside Γ₋₁ whenever the integrand has a pole there.
fn finite_n_contours(params: &ModelParams, needs_mp_excluded: bool) -> Result<(Contour, Contour)> {
    let p = params.p();
    let q = params.q;
    for rz in [0.4, 0.3, 0.2, 0.12, 0.06] {
        if p * rz >= 1.0 {
            continue;
        }
        // farthest point of the image from -1 is at z = -rz
        let image = q * rz / (1.0 - p * rz);
        let lo = image + 0.02;
        let mut hi = 1.0 - rz - 0.1;
        if needs_mp_excluded {
            hi = hi.min(q / p - 0.02);
        }
        if lo < hi {
            let rw = 0.5 * (lo + hi);
            return Ok((Contour::circle(-1.0, rw)?, Contour::circle(0.0, rz)?));
        }
    }
    Err(Error::ContourConflict(format!(
        "no admissible (Γ₋₁, Γ₀) radii for q = {q}"
    )))
}

/// The double-contour part of the finite-N (alternating, y_j = -2j for
/// j = 1..N) kernel.
pub fn k_finite_n_tilde(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> Result<f64> {
    let p = params.p();
    let (cw, cz) = finite_n_contours(params, p1.t - p1.n + 1 < 0)?;
    cw.check_clearance(&pole_list(params))?;
    cz.check_clearance(&pole_list(params))?;
    let f = |w: Complex64, z: Complex64| {
        powi(w, p1.n)
            * powi(1.0 + p * w, p1.t - p1.n + 1)
            * powi(1.0 + w, -(x1 + p1.n + 1))
            * powi(1.0 + z, x2 + p2.n)
            * (1.0 + 2.0 * z + p * z * z)
            * powi(z, -p2.n)
            * powi(1.0 + p * z, -(p2.t - p2.n + 2))
            / ((w - z) * (w + (1.0 + z) / (1.0 + p * z)))
    };
    let qres = circle_integral2(f, &cw, &cz, DEFAULT_TOL)?;
    real_part(&qres, "k_finite_n_tilde")
}

/// Finite-N kernel K = -φ₊·𝟙_{p1≺p2} + K̃_N, where φ₊ carries
/// (+w)^{n1-n2} in place of the (-w)^{n1-n2} of the flat-case transport
/// term, i.e. φ₊ = (-1)^{n1-n2} φ.  With this sign the kernel coincides
/// with -φ* + Σ_k Ψ_{n1-k} Φ_{n2-k} entrywise, and the flat kernel equals
/// (-1)^{n1-n2} times this one wherever x1+n1+1 ≤ 0 (a pure conjugation,
/// so all determinants agree).  N enters only through the label bound
/// n_k ≤ N.
pub fn k_finite_n(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
    n_total: i64,
) -> Result<f64> {
    if p1.n > n_total || p2.n > n_total || p1.n < 1 || p2.n < 1 {
        return Err(Error::OutOfRange(format!(
            "labels ({}, {}) outside 1..={n_total}",
            p1.n, p2.n
        )));
    }
    let mut v = k_finite_n_tilde(p1, p2, x1, x2, params)?;
    if precedes(p1, p2) {
        let sign = if (p1.n - p2.n) % 2 == 0 { 1.0 } else { -1.0 };
        v -= sign * phi_pair(p1, p2, x1, x2, params)?;
    }
    Ok(v)
}

/// Diagonal conjugation factor (√q/(1+√q))^{x1-x2} q^{n1-n2} q^{-(t1-t2)/2};
/// leaves every projected determinant unchanged while taming entry scales.
pub fn conjugate_factor(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
) -> f64 {
    let sq = params.q.sqrt();
    (sq / (1.0 + sq)).powi((x1 - x2) as i32)
        * params.q.powi((p1.n - p2.n) as i32)
        * params.q.powf(-((p1.t - p2.t) as f64) / 2.0)
}
