//! Kernels for the continuous-time polynuclear growth model on flat
//! substrate and for the Airy₁ process: the fixed-time Bessel kernel, the
//! space-like two-time Bessel kernel, the extended Airy₁ kernel, and the
//! conjugated lattice kernels whose q → 0 limits are the PNG kernels.

use serde::{Deserialize, Serialize};

use crate::contour_quad::{
    airy_combination, bessel, circle_integral, drifted_bessel, real_part, BesselKind, Contour,
    DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::tasep_kernels::{ModelParams, SpaceTimePoint};
use num_complex::Complex64;

/// A space-time point of the continuous PNG model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PNGPoint {
    pub x: f64,
    pub t: f64,
}

impl PNGPoint {
    pub fn new(x: f64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !x.is_finite() {
            return Err(Error::DomainError(format!("PNG point needs t > 0, got ({x}, {t})")));
        }
        Ok(PNGPoint { x, t })
    }
}

/// Observation points along a space-like PNG path with integer cut levels
/// H_k (events h(x_k, t_k) ≤ H_k).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PNGObservation {
    pub points: Vec<PNGPoint>,
    pub cuts: Vec<i64>,
}

impl PNGObservation {
    pub fn new(points: Vec<PNGPoint>, cuts: Vec<i64>) -> Result<Self> {
        if points.is_empty() || points.len() != cuts.len() {
            return Err(Error::IncompatibleInputs(
                "PNG observation needs equally many points and cuts, at least one".into(),
            ));
        }
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let same = a == b;
            let space_like = b.x >= a.x && b.t <= a.t && b.x - a.x >= a.t - b.t;
            if same || !space_like {
                return Err(Error::IncompatibleInputs(format!(
                    "consecutive PNG points ({}, {}) and ({}, {}) are not space-like ordered",
                    a.x, a.t, b.x, b.t
                )));
            }
        }
        Ok(PNGObservation { points, cuts })
    }
}

/// Observation times and cut levels for the Airy₁ process.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AiryObservation {
    pub taus: Vec<f64>,
    pub cuts: Vec<f64>,
}

impl AiryObservation {
    pub fn new(taus: Vec<f64>, cuts: Vec<f64>) -> Result<Self> {
        if taus.is_empty() || taus.len() != cuts.len() {
            return Err(Error::IncompatibleInputs(
                "Airy observation needs equally many times and cuts, at least one".into(),
            ));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::IncompatibleInputs(
                "Airy observation times must be strictly increasing".into(),
            ));
        }
        Ok(AiryObservation { taus, cuts })
    }
}

/// Fixed-time PNG kernel
///   -I_{|h1-h2|}(2(x2-x1))·𝟙(x2 > x1)
///   + ((2t+x2-x1)/(2t-x2+x1))^{(h1+h2)/2} J_{h1+h2}(2√(4t²-(x2-x1)²))·𝟙(2t ≥ |x2-x1|)
/// evaluated through the drifted-Bessel contour integrals (which also cover
/// the degenerate light-cone boundary |x2-x1| = 2t).
pub fn k_png_fixed_time(t: f64, x1: f64, h1: i64, x2: f64, h2: i64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::DomainError(format!("PNG fixed-time kernel needs t > 0, got {t}")));
    }
    let dx = x2 - x1;
    let mut v = 0.0;
    if dx > 0.0 {
        v -= drifted_bessel(BesselKind::I, h2 - h1, dx, 0.0)?;
    }
    if 2.0 * t >= dx.abs() {
        v += drifted_bessel(BesselKind::J, h1 + h2, dx, 2.0 * t)?;
    }
    Ok(v)
}

/// Space-like two-time PNG kernel: with Δx = x2-x1, Δt = t1-t2, T = t1+t2,
///   -((Δx+Δt)/(Δx-Δt))^{(h1-h2)/2} I_{h1-h2}(2√(Δx²-Δt²))
///        ·𝟙(Δx ≥ Δt > 0 or Δx > Δt ≥ 0)
///   +((T+Δx)/(T-Δx))^{(h1+h2)/2} J_{h1+h2}(2√(T²-Δx²))·𝟙(T ≥ |Δx|).
/// Evaluated in closed form (prefactor times plain Bessel) so that the
/// fixed-time kernel, which goes through the drifted contour integrals, is
/// an independent implementation; the degenerate boundaries are evaluated
/// by their limits.
pub fn k_png_spacelike(p1: PNGPoint, h1: i64, p2: PNGPoint, h2: i64) -> Result<f64> {
    let dx = p2.x - p1.x;
    let dt = p1.t - p2.t;
    let tt = p1.t + p2.t;
    if dx.abs() < dt.abs() {
        return Err(Error::DomainError(format!(
            "PNG points ({}, {}) and ({}, {}) are time-like separated",
            p1.x, p1.t, p2.x, p2.t
        )));
    }
    let mut v = 0.0;
    let ordered = (dx >= dt && dt > 0.0) || (dx > dt && dt >= 0.0);
    if ordered {
        if dx == dt {
            // light-like separation: as Δx → Δt the term tends to
            // (2Δx)^{h1-h2}/(h1-h2)! for h1 ≥ h2 and to 0 for h2 > h1
            if h1 >= h2 {
                let mut f = 1.0;
                for k in 1..=(h1 - h2) {
                    f *= 2.0 * dx / k as f64;
                }
                v -= f;
            }
        } else {
            let arg = 2.0 * (dx * dx - dt * dt).sqrt();
            let pref = ((dx + dt) / (dx - dt)).powf((h1 - h2) as f64 / 2.0);
            v -= pref * bessel(BesselKind::I, h1 - h2, arg)?;
        }
    }
    if tt >= dx.abs() {
        if tt == dx {
            let mut f = 1.0;
            for k in 1..=(h1 + h2) {
                f *= 2.0 * tt / k as f64;
            }
            v += f;
        } else if tt == -dx {
            if h1 + h2 == 0 {
                v += 1.0;
            }
        } else {
            let arg = 2.0 * (tt * tt - dx * dx).sqrt();
            let pref = ((tt + dx) / (tt - dx)).powf((h1 + h2) as f64 / 2.0);
            v += pref * bessel(BesselKind::J, h1 + h2, arg)?;
        }
    }
    Ok(v)
}

/// Extended Airy₁ kernel
///   -(4π(τ2-τ1))^{-1/2} exp(-(ξ2-ξ1)²/(4(τ2-τ1)))·𝟙(τ2 > τ1)
///   + Ai(ξ1+ξ2+(τ2-τ1)²) exp((τ2-τ1)(ξ1+ξ2) + 2(τ2-τ1)³/3),
/// the Airy term computed as one contour quantity to avoid overflow of the
/// exponential prefactor against the Airy decay.
pub fn k_airy1(tau1: f64, xi1: f64, tau2: f64, xi2: f64) -> Result<f64> {
    let dt = tau2 - tau1;
    let mut v = airy_combination(dt, -(xi1 + xi2))?;
    if dt > 0.0 {
        v -= (-(xi2 - xi1).powi(2) / (4.0 * dt)).exp() / (4.0 * std::f64::consts::PI * dt).sqrt();
    }
    Ok(v)
}

/// For a space-like PNG path t = γ(x): θ = (γ(x)-x)/4 and π(θ) = (3γ(x)+x)/4,
/// so that (x, t) = (π(θ)-3θ, θ+π(θ)).
pub fn theta_pi_from_gamma(gamma_value: f64, x: f64) -> (f64, f64) {
    ((gamma_value - x) / 4.0, (3.0 * gamma_value + x) / 4.0)
}

// ---------------------------------------------------------------------------
// Conjugated lattice kernels (exact at every q; PNG kernels as q → 0)
// ---------------------------------------------------------------------------

/// The flat-kernel transport term multiplied by the conjugation
/// q^{(x1-x2)/2} q^{n1-n2} q^{-(t1-t2)/2}, rewritten exactly through the
/// substitution w = -1 + √q·z:
///   (1/2πi) ∮ dz (√q+pz)^{t1-t2-Δn} (1-√q z)^{Δn} z^{-(x1-x2+1)-Δn},
/// Δn = n1-n2.  All powers of √q cancel, so the integrand stays O(1) as
/// q → 0 and the value tends to the space-like PNG first term.
pub fn conjugated_flat_phi(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
    radius: f64,
) -> Result<f64> {
    let sq = params.q.sqrt();
    let p = params.p();
    let dn = p1.n - p2.n;
    let e_pz = p1.t - p2.t - dn;
    if e_pz < 0 {
        return Err(Error::ContourConflict(
            "conjugated transport term needs t1-t2 >= n1-n2 (space-like order)".into(),
        ));
    }
    let c = Contour::circle(0.0, radius)?;
    c.check_clearance(&[Complex64::new(1.0 / sq, 0.0), Complex64::new(-sq / p, 0.0)])?;
    if dn < 0 && radius >= 1.0 / sq {
        return Err(Error::ContourConflict(format!(
            "radius {radius} would enclose the pole at 1/sqrt(q)"
        )));
    }
    let quad = circle_integral(
        |z| {
            (sq + p * z).powi(e_pz as i32)
                * (1.0 - sq * z).powi(dn as i32)
                * z.powi((-(x1 - x2 + 1) - dn) as i32)
        },
        &c,
        DEFAULT_TOL,
    )?;
    real_part(&quad, "conjugated_flat_phi")
}

/// The flat-kernel main term times the same conjugation, rewritten exactly
/// through z = -w/(w+√q):
///   (1/2πi) ∮ dw (w+√q)^{t1+t2-x2-n1-n2} w^{-(x1+n1+n2+1)}
///             (1+√q w)^{-(t1+t2+1-x1-n1-n2)}.
/// Again all √q powers cancel; as q → 0 the value tends to the PNG second
/// term.  Requires t1+t2-x2-n1-n2 ≥ 0 (otherwise the pole at -√q, i.e.
/// z = ∞, is live and the rewrite needs a smaller contour than is useful).
pub fn conjugated_flat_main(
    p1: SpaceTimePoint,
    p2: SpaceTimePoint,
    x1: i64,
    x2: i64,
    params: &ModelParams,
    radius: f64,
) -> Result<f64> {
    let sq = params.q.sqrt();
    let e_wq = p1.t + p2.t - x2 - p1.n - p2.n;
    let e_w = -(x1 + p1.n + p2.n + 1);
    let e_sw = -(p1.t + p2.t + 1 - x1 - p1.n - p2.n);
    if e_wq < 0 && radius >= sq {
        return Err(Error::ContourConflict(format!(
            "radius {radius} would enclose the pole at -sqrt(q)"
        )));
    }
    let c = Contour::circle(0.0, radius)?;
    c.check_clearance(&[Complex64::new(-sq, 0.0), Complex64::new(-1.0 / sq, 0.0)])?;
    let quad = circle_integral(
        |w| {
            (w + sq).powi(e_wq as i32) * w.powi(e_w as i32) * (1.0 + sq * w).powi(e_sw as i32)
        },
        &c,
        DEFAULT_TOL,
    )?;
    real_part(&quad, "conjugated_flat_main")
}

/// Map continuous PNG observation data onto the lattice kernel arguments:
///   n = (t+x)/√q - H/2,  t_lat = 2t/√q,  x_lat = -2x/√q + H - h.
/// Fails unless the scaled quantities land on integers (callers choose
/// (x, t) on a √q-compatible grid and even H for exactly this reason).
pub fn lattice_point_for_png(
    point: PNGPoint,
    cap_h: i64,
    h: i64,
    params: &ModelParams,
) -> Result<(SpaceTimePoint, i64)> {
    let sq = params.q.sqrt();
    let nf = (point.t + point.x) / sq - cap_h as f64 / 2.0;
    let tf = 2.0 * point.t / sq;
    let xf = -2.0 * point.x / sq + (cap_h - h) as f64;
    let round_ok = |v: f64| (v - v.round()).abs() < 1e-6;
    if !(round_ok(nf) && round_ok(tf) && round_ok(xf)) {
        return Err(Error::IncompatibleInputs(format!(
            "PNG point ({}, {}) does not land on the lattice for q = {}",
            point.x, point.t, params.q
        )));
    }
    Ok((
        SpaceTimePoint {
            n: nf.round() as i64,
            t: tf.round() as i64,
        },
        xf.round() as i64,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour_quad::airy_series;
    use crate::tasep_kernels::{k_flat_tilde, phi_pair};

    #[test]
    fn fixed_time_examples() {
        // prefactor 1 at x1 = x2: second term is J_{2h}(4t)
        let v = k_png_fixed_time(1.0, 0.0, 2, 0.0, 2).unwrap();
        let j = bessel(BesselKind::J, 4, 4.0).unwrap();
        assert!((v - j).abs() < 1e-12, "{v} vs {j}");
        // disjoint light cones: kernel vanishes when x2 < x1 as well
        assert_eq!(k_png_fixed_time(1.0, 0.0, 1, -3.0, 1).unwrap(), 0.0);
        // t <= 0 rejected
        assert!(k_png_fixed_time(0.0, 0.0, 1, 0.0, 1).is_err());
    }

    #[test]
    fn fixed_time_decays_in_height() {
        // With x2 <= x1 the difference term vanishes and only the
        // height-suppressed term remains; it must decay fast in h1 + h2.
        for &(t, x1, x2) in &[(1.0, 0.5, 0.0), (2.5, 1.0, -1.0), (1.0, 0.0, 0.0)] {
            let bound = (8.0 * t + 40.0) as i64;
            for h1 in [bound / 2, bound] {
                let h2 = bound - h1 + 1;
                let v = k_png_fixed_time(t, x1, h1, x2, h2).unwrap();
                assert!(v.abs() <= 1e-15, "K({t},{x1},{h1},{x2},{h2}) = {v}");
            }
        }
    }

    #[test]
    fn spacelike_reduces_to_fixed_time() {
        for &(t, x1, x2) in &[(1.0, 0.0, 0.7), (2.0, -0.5, 1.5), (1.5, 1.0, 1.0)] {
            let p1 = PNGPoint::new(x1, t).unwrap();
            let p2 = PNGPoint::new(x2, t).unwrap();
            for h1 in 0..4 {
                for h2 in 0..4 {
                    let a = k_png_spacelike(p1, h1, p2, h2).unwrap();
                    let b = k_png_fixed_time(t, x1, h1, x2, h2).unwrap();
                    assert!((a - b).abs() < 1e-12, "({t},{x1},{h1},{x2},{h2}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn spacelike_light_like_boundary() {
        let p1 = PNGPoint::new(0.0, 2.0).unwrap();
        let p2 = PNGPoint::new(1.0, 1.0).unwrap(); // dx = dt = 1
        for (h1, h2) in [(3i64, 1i64), (2, 2), (1, 3)] {
            let full = k_png_spacelike(p1, h1, p2, h2).unwrap();
            // term2 via the fixed-time style closed form
            let tt = 3.0f64;
            let dx = 1.0f64;
            let arg = 2.0 * (tt * tt - dx * dx).sqrt();
            let term2 = ((tt + dx) / (tt - dx)).powf((h1 + h2) as f64 / 2.0)
                * bessel(BesselKind::J, h1 + h2, arg).unwrap();
            let term1 = -(full - term2);
            let expect = if h1 >= h2 {
                let mut f = 1.0;
                for k in 1..=(h1 - h2) {
                    f *= 2.0 / k as f64;
                }
                f
            } else {
                0.0
            };
            assert!((term1 - expect).abs() < 1e-10, "(h1,h2)=({h1},{h2}): {term1} vs {expect}");
        }
        // time-like separation is rejected
        let q1 = PNGPoint::new(0.0, 3.0).unwrap();
        let q2 = PNGPoint::new(0.5, 1.0).unwrap();
        assert!(k_png_spacelike(q1, 0, q2, 0).is_err());
    }

    #[test]
    fn airy1_kernel_values() {
        // equal times: plain Airy function of xi1+xi2
        let v = k_airy1(0.5, 0.3, 0.5, 0.7).unwrap();
        assert!((v - airy_series(1.0)).abs() < 1e-10);
        // tau2 - tau1 = 1, xi = 0
        let v = k_airy1(0.0, 0.0, 1.0, 0.0).unwrap();
        let expect = -(4.0 * std::f64::consts::PI).sqrt().recip()
            + airy_series(1.0) * (2.0f64 / 3.0).exp();
        assert!((v - expect).abs() < 1e-10, "{v} vs {expect}");
        // Airy part symmetric in (xi1, xi2)
        let a = k_airy1(0.0, -0.4, 0.7, 1.1).unwrap();
        let b = k_airy1(0.0, 1.1, 0.7, -0.4).unwrap();
        assert!((a - b).abs() < 1e-11);
        // continuity of the Airy part as tau2 -> tau1
        let v = k_airy1(0.0, 0.2, 1e-9, 0.3).unwrap();
        let gauss = (-(0.1f64).powi(2) / 4e-9).exp() / (4.0 * std::f64::consts::PI * 1e-9).sqrt();
        assert!((v + gauss - airy_series(0.5)).abs() < 1e-7);
    }

    #[test]
    fn theta_pi_round_trip() {
        let (theta, pi) = theta_pi_from_gamma(1.0, 0.0);
        assert_eq!((theta, pi), (0.25, 0.75));
        let (theta, _) = theta_pi_from_gamma(2.0, 2.0);
        assert_eq!(theta, 0.0);
        // (x, t) = (pi - 3 theta, theta + pi)
        for &(g, x) in &[(1.7, 0.3), (2.0, -1.0), (5.5, 2.5)] {
            let (theta, pi) = theta_pi_from_gamma(g, x);
            assert!((pi - 3.0 * theta - x).abs() < 1e-12);
            assert!((theta + pi - g).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugated_terms_match_direct_kernel_at_moderate_q() {
        // exact algebraic rewrites: must agree with conjugate_factor times
        // the direct contour terms at any q, here q = 0.25
        let pr = ModelParams::new(0.25).unwrap();
        for (n1, t1, n2, t2, x1, x2) in [
            (1i64, 3i64, 1i64, 3i64, -2i64, -1i64),
            (1, 4, 2, 2, -3, -2),
            (2, 5, 3, 3, -4, -5),
        ] {
            let p1 = SpaceTimePoint { n: n1, t: t1 };
            let p2 = SpaceTimePoint { n: n2, t: t2 };
            // the PNG conjugation uses sqrt(q)^{x1-x2}, unlike the scaling
            // conjugation of conjugate_factor which uses (sqrt(q)/(1+sqrt(q)))
            let sq = pr.q.sqrt();
            let cf = sq.powi((x1 - x2) as i32)
                * pr.q.powi((n1 - n2) as i32)
                * pr.q.powf(-((t1 - t2) as f64) / 2.0);
            if crate::tasep_kernels::precedes(p1, p2) {
                let a = conjugated_flat_phi(p1, p2, x1, x2, &pr, 1.2).unwrap();
                let b = cf * phi_pair(p1, p2, x1, x2, &pr).unwrap();
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "phi: {a} vs {b}");
            }
            let a = conjugated_flat_main(p1, p2, x1, x2, &pr, 0.3).unwrap();
            let b = cf * k_flat_tilde(p1, p2, x1, x2, &pr).unwrap();
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "main: {a} vs {b}");
        }
    }

    #[test]
    fn conjugated_lattice_kernel_approaches_png() {
        // q = 1e-4, points on the sqrt(q)-grid; the conjugated lattice terms
        // should be within O(sqrt(q)) of the continuous Bessel kernels
        let pr = ModelParams::new(1e-4).unwrap();
        let bp1 = PNGPoint::new(0.0, 0.2).unwrap();
        let bp2 = PNGPoint::new(0.1, 0.15).unwrap();
        let (cap1, cap2) = (0i64, 0i64);
        for h1 in 1..4i64 {
            for h2 in 1..4i64 {
                let (l1, x1) = lattice_point_for_png(bp1, cap1, h1, &pr).unwrap();
                let (l2, x2) = lattice_point_for_png(bp2, cap2, h2, &pr).unwrap();
                let disc_phi = conjugated_flat_phi(l1, l2, x1, x2, &pr, 1.2).unwrap();
                let disc_main = conjugated_flat_main(l1, l2, x1, x2, &pr, 0.2).unwrap();
                let dx = bp2.x - bp1.x;
                let dt = bp1.t - bp2.t;
                let tt = bp1.t + bp2.t;
                let arg1 = 2.0 * (dx * dx - dt * dt).sqrt();
                let png_phi = ((dx + dt) / (dx - dt)).powf((h1 - h2) as f64 / 2.0)
                    * bessel(BesselKind::I, h1 - h2, arg1).unwrap();
                let arg2 = 2.0 * (tt * tt - dx * dx).sqrt();
                let png_main = ((tt + dx) / (tt - dx)).powf((h1 + h2) as f64 / 2.0)
                    * bessel(BesselKind::J, h1 + h2, arg2).unwrap();
                assert!(
                    (disc_phi - png_phi).abs() < 2e-3,
                    "phi h=({h1},{h2}): {disc_phi} vs {png_phi}"
                );
                assert!(
                    (disc_main - png_main).abs() < 2e-3,
                    "main h=({h1},{h2}): {disc_main} vs {png_main}"
                );
            }
        }
    }
}
