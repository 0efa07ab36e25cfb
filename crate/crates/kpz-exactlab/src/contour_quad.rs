//! Quadrature of analytic integrands on circular contours, plus the special
//! functions (Bessel, drifted Bessel, Airy-type combinations) that the
//! kernel modules evaluate through such contours.
//!
//! All circle integrals are normalised as (1/2πi) ∮ f(z) dz and computed by
//! the uniform trapezoid rule, which converges geometrically for integrands
//! analytic in an annulus around the contour.  Nodes are doubled until the
//! change under the last doubling drops below tolerance.

use num_complex::Complex64;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Hard cap on trapezoid nodes (per circle).
pub const NODE_CAP: usize = 1 << 20;

/// Default relative tolerance for contour quadrature.
pub const DEFAULT_TOL: f64 = 1e-12;

/// A circular contour, traversed counterclockwise.
#[derive(Clone, Copy, Debug)]
pub struct Contour {
    pub center: Complex64,
    pub radius: f64,
    /// Initial node count; a power of two, at least 8.
    pub node_count: usize,
}

impl Contour {
    pub fn new(center: Complex64, radius: f64, node_count: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::DomainError(format!("contour radius {radius} must be positive")));
        }
        if node_count < 8 || !node_count.is_power_of_two() {
            return Err(Error::DomainError(format!(
                "node_count {node_count} must be a power of two >= 8"
            )));
        }
        Ok(Contour { center, radius, node_count })
    }

    /// Convenience constructor with a real center and the default 64 nodes.
    pub fn circle(center: f64, radius: f64) -> Result<Self> {
        Contour::new(Complex64::new(center, 0.0), radius, 64)
    }

    /// Reject contours passing within `1e-6 * radius` of any known pole.
    pub fn check_clearance(&self, poles: &[Complex64]) -> Result<()> {
        for &p in poles {
            let dist = ((p - self.center).norm() - self.radius).abs();
            if dist < 1e-6 * self.radius {
                return Err(Error::PoleOnContour(format!(
                    "pole {p} at distance {dist:.3e} from contour |z - {}| = {}",
                    self.center, self.radius
                )));
            }
        }
        Ok(())
    }

    fn node(&self, k: usize, n: usize) -> (Complex64, Complex64) {
        let theta = TAU * (k as f64) / (n as f64);
        let d = Complex64::from_polar(self.radius, theta);
        (self.center + d, d)
    }
}

/// Result of an adaptive contour (or line) quadrature.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    /// Magnitude of the change under the last node doubling.
    pub est_error: f64,
    pub nodes_used: usize,
}

/// (1/2πi) ∮ f(z) dz over `c`, doubling nodes until the value moves by less
/// than `tol * max(1, |value|)` or the node cap is hit.
pub fn circle_integral<F>(f: F, c: &Contour, tol: f64) -> Result<QuadResult>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut n = c.node_count.max(8);
    // running sum of f(z_k) * (z_k - center); the integral estimate is sum / n
    let mut acc = Complex64::new(0.0, 0.0);
    let mut mag = 0.0; // Σ|f·d|, tracks the roundoff scale of the sum
    for k in 0..n {
        let (z, d) = c.node(k, n);
        let term = f(z) * d;
        acc += term;
        mag += term.norm();
    }
    let mut prev = acc / n as f64;
    loop {
        // refine: new nodes of the 2n-rule are the midpoints (odd indices)
        let n2 = 2 * n;
        for k in (1..n2).step_by(2) {
            let (z, d) = c.node(k, n2);
            let term = f(z) * d;
            acc += term;
            mag += term.norm();
        }
        n = n2;
        let cur = acc / n as f64;
        let est = (cur - prev).norm();
        // a change at the roundoff level of the summands is as converged as
        // f64 arithmetic allows, even if the relative target is unreachable
        if est <= tol * cur.norm().max(1.0) || est <= 1e-13 * mag / n as f64 {
            return Ok(QuadResult { value: cur, est_error: est, nodes_used: n });
        }
        if n >= NODE_CAP {
            return Err(Error::NonConvergent(format!(
                "circle integral stuck at est_error {est:.3e} with {n} nodes"
            )));
        }
        prev = cur;
    }
}

/// (1/2πi)² ∮∮ f(w, z) dz dw over the product of two circles, doubling both
/// node counts together until stable.
pub fn circle_integral2<F>(f: F, cw: &Contour, cz: &Contour, tol: f64) -> Result<QuadResult>
where
    F: Fn(Complex64, Complex64) -> Complex64,
{
    let tensor = |nw: usize, nz: usize| -> (Complex64, f64) {
        let mut outer = Complex64::new(0.0, 0.0);
        let mut mag = 0.0;
        for j in 0..nw {
            let (w, dw) = cw.node(j, nw);
            let mut inner = Complex64::new(0.0, 0.0);
            let mut imag = 0.0;
            for k in 0..nz {
                let (z, dz) = cz.node(k, nz);
                let term = f(w, z) * dz;
                inner += term;
                imag += term.norm();
            }
            outer += inner / nz as f64 * dw;
            mag += imag / nz as f64 * dw.norm();
        }
        (outer / nw as f64, mag / nw as f64)
    };
    let mut n = cw.node_count.max(cz.node_count).max(8);
    let (mut prev, _) = tensor(n, n);
    loop {
        n *= 2;
        let (cur, mag) = tensor(n, n);
        let est = (cur - prev).norm();
        if est <= tol * cur.norm().max(1.0) || est <= 1e-13 * mag {
            return Ok(QuadResult { value: cur, est_error: est, nodes_used: n * n });
        }
        if n >= 1 << 13 {
            return Err(Error::NonConvergent(format!(
                "double circle integral stuck at est_error {est:.3e} with {n}x{n} nodes"
            )));
        }
        prev = cur;
    }
}

/// Extract the real part of a quadrature value, failing if the imaginary
/// residue is larger than roundoff allows for a real quantity.
pub fn real_part(q: &QuadResult, what: &str) -> Result<f64> {
    let v = q.value;
    // floors: roundoff in values that are themselves ~0 is not a defect, and
    // the quadrature's own error estimate bounds the credible noise level
    if v.im.abs() > (1e-8 * v.norm()).max(1e-13).max(10.0 * q.est_error) {
        return Err(Error::NumericalInconsistency(format!(
            "{what}: imaginary residue {:.3e} vs magnitude {:.3e}",
            v.im,
            v.norm()
        )));
    }
    Ok(v.re)
}

// ---------------------------------------------------------------------------
// Bessel functions via contour representations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BesselKind {
    /// Oscillatory kind: J_n.
    J,
    /// Modified kind: I_n.
    I,
}

/// Power-series evaluation of J_n(x) or I_n(x).  Serves as the independent
/// oracle for the contour route; accurate in f64 for |x| up to ~40.
pub fn bessel_series(kind: BesselKind, n: i64, x: f64) -> f64 {
    // reduce to non-negative order
    if n < 0 {
        let v = bessel_series(kind, -n, x);
        return match kind {
            BesselKind::J => {
                if n % 2 == 0 {
                    v
                } else {
                    -v
                }
            }
            BesselKind::I => v,
        };
    }
    let sign = match kind {
        BesselKind::J => -1.0,
        BesselKind::I => 1.0,
    };
    let h = 0.5 * x;
    // leading term (x/2)^n / n!
    let mut term = 1.0;
    for m in 1..=n {
        term *= h / m as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let mut sum = term;
    let mut m = 1.0;
    loop {
        term *= sign * h * h / (m * (m + n as f64));
        sum += term;
        if term.abs() < 1e-20 * sum.abs().max(1e-300) && m > h.abs() {
            return sum;
        }
        m += 1.0;
        if m > 700.0 {
            return sum;
        }
    }
}

/// J_n(2t) = (1/2πi) ∮ dz e^{t(z - 1/z)} / z^{n+1},
/// I_n(2t) = (1/2πi) ∮ dz e^{t(z + 1/z)} / z^{n+1}.
fn bessel_contour(kind: BesselKind, n: i64, x: f64) -> Result<f64> {
    let t = 0.5 * x;
    let s = match kind {
        BesselKind::J => -1.0,
        BesselKind::I => 1.0,
    };
    let c = Contour::circle(0.0, 1.0)?;
    let q = circle_integral(
        |z| (t * (z + s / z)).exp() / z.powi(n as i32 + 1),
        &c,
        DEFAULT_TOL,
    )?;
    real_part(&q, "bessel contour")
}

/// Bessel function of integer order, contour evaluation cross-checked
/// against the power series.
///
/// For I the series has only positive terms and is perfectly conditioned, so
/// it is the reference; the contour (used for |n| ≤ 40) is cross-checked
/// against it.  For J the series cancels catastrophically beyond moderate
/// arguments while the unit-circle integrand has modulus one, so the contour
/// is the primary route, cross-checked against the series where the latter
/// is trustworthy (|x| ≤ 12).
pub fn bessel(kind: BesselKind, n: i64, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::DomainError(format!("bessel argument {x}")));
    }
    match kind {
        BesselKind::I => {
            let s = bessel_series(kind, n, x);
            if n.abs() <= 40 {
                let c = bessel_contour(kind, n, x)?;
                if (c - s).abs() > 1e-8 * s.abs().max(1.0) {
                    log::warn!("bessel(I, {n}, {x}): contour {c} vs series {s}; using series");
                }
            }
            Ok(s)
        }
        BesselKind::J => {
            let c = bessel_contour(kind, n, x)?;
            if x.abs() <= 12.0 {
                let s = bessel_series(kind, n, x);
                if (c - s).abs() > 1e-8 * s.abs().max(1.0) {
                    log::warn!("bessel(J, {n}, {x}): contour {c} vs series {s}; using series");
                    return Ok(s);
                }
            }
            Ok(c)
        }
    }
}

/// Drifted Bessel function: the contour integral
///
///   (1/2πi) ∮ dz/z · e^{b(z - 1/z)} e^{a(z + 1/z)} / z^n
///
/// over the unit circle, which in closed form equals
/// ((b+a)/(b-a))^{n/2} J_n(2√(b²-a²)) for b² > a² (kind J) and
/// ((a+b)/(a-b))^{n/2} I_n(2√(a²-b²)) for a² > b² (kind I).
///
/// The contour is the primary evaluation; the closed form is an internal
/// cross-check.  On the degenerate boundary b² = a² the integral reduces to
/// an explicit residue and is returned in closed form.
pub fn drifted_bessel(kind: BesselKind, n: i64, a: f64, b: f64) -> Result<f64> {
    match kind {
        BesselKind::J if b * b < a * a => {
            return Err(Error::DomainError(format!(
                "drifted J requires b^2 >= a^2, got a={a}, b={b}"
            )))
        }
        BesselKind::I if a * a < b * b => {
            return Err(Error::DomainError(format!(
                "drifted I requires a^2 >= b^2, got a={a}, b={b}"
            )))
        }
        _ => {}
    }
    let p = a + b; // coefficient of z in the exponent
    let m = a - b; // coefficient of 1/z
    let scale = a.abs().max(b.abs()).max(1.0);
    if (b * b - a * a).abs() <= 1e-14 * scale * scale {
        // e^{pz} or e^{m/z} only: a single explicit Laurent coefficient
        if m.abs() <= p.abs() {
            // residue of e^{pz}/z^{n+1}
            if n < 0 {
                return Ok(0.0);
            }
            let mut v = 1.0;
            for k in 1..=n {
                v *= p / k as f64;
            }
            return Ok(v);
        }
        // residue of e^{m/z}/z^{n+1}
        if n > 0 {
            return Ok(0.0);
        }
        let mut v = 1.0;
        for k in 1..=(-n) {
            v *= m / k as f64;
        }
        return Ok(v);
    }
    let (ratio, arg2) = match kind {
        BesselKind::J => ((b + a) / (b - a), b * b - a * a),
        BesselKind::I => ((a + b) / (a - b), a * a - b * b),
    };
    let arg = 2.0 * arg2.sqrt();
    // In the order-dominated regime |n| >= arg the series is led by its
    // first term with no cancellation, so the closed form is exact to
    // roundoff while the contour would bury the exponentially small value
    // in quadrature noise: use the closed form outright.
    if ratio > 0.0 && n.abs() as f64 >= arg {
        return Ok(ratio.powf(n as f64 / 2.0) * bessel_series(kind, n, arg));
    }
    // radius balancing |p| r against |m| / r keeps the integrand peak low
    let r = if p != 0.0 && m != 0.0 {
        (m.abs() / p.abs()).sqrt().clamp(0.05, 20.0)
    } else {
        1.0
    };
    let c = Contour::new(Complex64::new(0.0, 0.0), r, 64)?;
    let q = circle_integral(
        |z| (p * z + m / z).exp() / z.powi(n as i32 + 1),
        &c,
        DEFAULT_TOL,
    )?;
    let val = real_part(&q, "drifted bessel")?;
    // otherwise the contour is primary; cross-check wherever the series is
    // well-conditioned (I: positive terms; J: before cancellation sets in)
    let checkable = match kind {
        BesselKind::I => arg <= 100.0,
        BesselKind::J => arg <= 12.0,
    };
    if ratio > 0.0 && checkable {
        let cf = ratio.powf(n as f64 / 2.0) * bessel_series(kind, n, arg);
        if (val - cf).abs() > 1e-8 * cf.abs().max(1.0) {
            log::warn!(
                "drifted_bessel({kind:?}, {n}, {a}, {b}): contour {val} vs closed form {cf}; using closed form"
            );
            return Ok(cf);
        }
    }
    Ok(val)
}

// ---------------------------------------------------------------------------
// Airy-type combination
// ---------------------------------------------------------------------------

/// Maclaurin series for Ai(x); the independent oracle for the contour route.
/// Accurate in f64 for |x| up to ~8.
pub fn airy_series(x: f64) -> f64 {
    const AI0: f64 = 0.355_028_053_887_817_24;
    const AIP0: f64 = -0.258_819_403_792_806_8;
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    let mut k = 0.0;
    loop {
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        f += tf;
        g += tg;
        if tf.abs() + tg.abs() < 1e-18 {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    AI0 * f + AIP0 * g
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-style initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -x;
        xs[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Composite Gauss–Legendre integration of `f` over [lo, hi] with `panels`
/// panels of order `order`.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, panels: usize, order: usize) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let mid = a + 0.5 * h;
        for (x, w) in xs.iter().zip(&ws) {
            sum += w * f(mid + 0.5 * h * x);
        }
    }
    sum * 0.5 * h
}

/// The Airy-type contour combination
///
///   (1/2πi) ∫ dv e^{v³/3 + a v² + b v}
///
/// over rays to e^{±iπ/3}·∞, oriented so that the result equals
/// Ai(a² - b) · exp(2a³/3 - ab).
///
/// The rays are anchored at the real saddle v₀ = -a + √(a²-b) when a² ≥ b
/// (at -a otherwise) and the integrand is rescaled by its value at the
/// anchor, so the quadrature only sees decaying factors.
pub fn airy_combination(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::DomainError(format!("airy_combination({a}, {b})")));
    }
    let g = |v: Complex64| v * v * v / 3.0 + a * v * v + b * v;
    let disc = a * a - b;
    let v0 = if disc > 0.0 { -a + disc.sqrt() } else { -a };
    let g0 = v0 * v0 * v0 / 3.0 + a * v0 * v0 + b * v0; // real
    let w = Complex64::from_polar(1.0, PI / 3.0);
    // integrand along the upper ray, with the anchor value factored out
    let h = |s: f64| -> f64 {
        let dg = g(Complex64::new(v0, 0.0) + s * w) - g0;
        (w * dg.exp()).im
    };
    // truncate where the modulus has decayed to 1e-18 of the anchor value
    let decay = |s: f64| (g(Complex64::new(v0, 0.0) + s * w) - g0).re;
    let mut upper = 2.0;
    while decay(upper) > -42.0 {
        upper *= 1.5;
        if upper > 1e4 {
            return Err(Error::NonConvergent(format!(
                "airy_combination({a}, {b}): ray integrand does not decay"
            )));
        }
    }
    let mut panels = (upper.ceil() as usize).clamp(4, 64);
    let mut prev = gl_integrate(&h, 0.0, upper, panels, 16);
    loop {
        panels *= 2;
        let cur = gl_integrate(&h, 0.0, upper, panels, 16);
        let est = (cur - prev).abs();
        if est <= 1e-13 * cur.abs().max(1.0) {
            return Ok(g0.exp() * cur / PI);
        }
        if panels > 1 << 14 {
            return Err(Error::NonConvergent(format!(
                "airy_combination({a}, {b}): stuck at est_error {est:.3e}"
            )));
        }
        prev = cur;
    }
}
