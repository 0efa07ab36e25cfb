//! Finite truncations of the projected kernels and their Fredholm
//! determinants.
//!
//! Every joint probability in the crate reduces to det(1 − χKχ) for one of
//! the kernels in `tasep_kernels` / `png_kernels`, projected to a half-line
//! per observation point.  The half-lines are truncated to finite windows
//! (lattice intervals, or Gauss–Legendre node sets in the continuum case),
//! the resulting block matrix is factorized densely, and the windows are
//! doubled until the determinant stops moving.

use rayon::prelude::*;

use crate::contour_quad::gauss_legendre;
use crate::png_kernels::{k_airy1, k_png_fixed_time, k_png_spacelike, AiryObservation, PNGObservation};
use crate::tasep_kernels::{
    conjugate_factor, k_flat, k_finite_n, ModelParams, ObservationPath,
};
use crate::{Error, Result};

pub const DEFAULT_STABILITY_TOL: f64 = 1e-8;
const MAX_DOUBLINGS: usize = 6;

/// Kernel choice for particle-position probabilities.
#[derive(Debug, Clone, Copy)]
pub enum TasepKernel {
    /// Alternating initial condition on all of ℤ.
    Flat,
    /// N particles started at -2, -4, …, -2N.
    FiniteN(i64),
}

/// Kernel choice for growth-height probabilities.
#[derive(Debug, Clone, Copy)]
pub enum PngKernel {
    /// All observation points at the common time t.
    FixedTime(f64),
    /// General space-like observation points.
    Spacelike,
}

/// One lattice window per observation point, plus the convergence state of
/// the last doubling pass.
#[derive(Debug, Clone)]
pub struct TruncationWindow {
    pub starts: Vec<i64>,
    pub widths: Vec<usize>,
    pub stability_tol: f64,
    pub converged: bool,
}

impl TruncationWindow {
    fn dim(&self) -> usize {
        self.widths.iter().sum()
    }

    fn double(&mut self) {
        for w in &mut self.widths {
            *w *= 2;
        }
    }
}

/// Dense realization of χKχ.  `index` maps a matrix row back to
/// (observation point, offset within that point's window).
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    pub data: Vec<f64>,
    pub dim: usize,
    pub index: Vec<(usize, usize)>,
}

impl BlockMatrix {
    /// Fill the matrix from an entry function over (point, offset) pairs.
    /// Rows are evaluated in parallel; the first error aborts assembly.
    fn assemble<F>(widths: &[usize], entry: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize, usize) -> Result<f64> + Sync,
    {
        let mut index = Vec::new();
        for (k, &w) in widths.iter().enumerate() {
            for off in 0..w {
                index.push((k, off));
            }
        }
        let dim = index.len();
        let rows: Result<Vec<Vec<f64>>> = index
            .par_iter()
            .map(|&(ki, oi)| {
                index
                    .iter()
                    .map(|&(kj, oj)| entry(ki, oi, kj, oj))
                    .collect()
            })
            .collect();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows? {
            data.extend(row);
        }
        for v in &data {
            if !v.is_finite() {
                return Err(Error::NumericalInconsistency(
                    "non-finite kernel entry in assembled matrix".into(),
                ));
            }
        }
        Ok(BlockMatrix { data, dim, index })
    }
}

/// det(𝟙 − M) by LU factorization with partial pivoting.  A singular
/// truncation is a legitimate value of 0, not an error.
pub fn determinant(mat: &BlockMatrix) -> f64 {
    let n = mat.dim;
    if n == 0 {
        return 1.0;
    }
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (if i == j { 1.0 } else { 0.0 }) - mat.data[i * n + j];
        }
    }
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for j in col + 1..n {
                a[r * n + j] -= f * a[col * n + j];
            }
        }
    }
    det
}

/// Run the window-doubling loop around a determinant evaluation.
fn converge<F>(mut windows: TruncationWindow, eval: F) -> Result<(f64, TruncationWindow)>
where
    F: Fn(&TruncationWindow) -> Result<f64>,
{
    let mut prev = eval(&windows)?;
    for _ in 0..MAX_DOUBLINGS {
        let mut next = windows.clone();
        next.double();
        let val = eval(&next)?;
        if (val - prev).abs() < windows.stability_tol {
            next.converged = true;
            return Ok((val, next));
        }
        windows = next;
        prev = val;
    }
    Err(Error::NonConvergent(format!(
        "determinant not stable to {} after {} window doublings (dim {})",
        windows.stability_tol,
        MAX_DOUBLINGS,
        windows.dim()
    )))
}

fn check_probability(v: f64) -> Result<f64> {
    if !(-1e-8..=1.0 + 1e-8).contains(&v) {
        return Err(Error::NumericalInconsistency(format!(
            "determinant {v} outside [0, 1] beyond tolerance"
        )));
    }
    Ok(v.clamp(0.0, 1.0))
}

/// P(x_{n_k}(t_k) ≥ a_k for all k) as a Fredholm determinant over the
/// windows [a_k − W_k, a_k − 1].  Entries carry the diagonal conjugation,
/// which leaves the determinant unchanged while keeping their scale tame.
pub fn joint_prob_tasep(
    path: &ObservationPath,
    params: &ModelParams,
    kernel: TasepKernel,
) -> Result<f64> {
    joint_prob_tasep_meta(path, params, kernel).map(|(v, _)| v)
}

/// As [`joint_prob_tasep`], also returning the converged window widths.
pub fn joint_prob_tasep_meta(
    path: &ObservationPath,
    params: &ModelParams,
    kernel: TasepKernel,
) -> Result<(f64, Vec<usize>)> {
    if let TasepKernel::FiniteN(n_total) = kernel {
        for pt in &path.points {
            if pt.n > n_total {
                return Err(Error::OutOfRange(format!(
                    "particle label {} exceeds N = {n_total}",
                    pt.n
                )));
            }
        }
    }
    let p = params.p();
    let widths: Vec<usize> = path
        .points
        .iter()
        .map(|pt| 20 + (8.0 * (pt.t as f64 * p * params.q).sqrt()).ceil() as usize)
        .collect();
    let windows = TruncationWindow {
        starts: vec![0; widths.len()],
        widths,
        stability_tol: DEFAULT_STABILITY_TOL,
        converged: false,
    };
    let (val, final_windows) = converge(windows, |w| {
        let mat = BlockMatrix::assemble(&w.widths, |ki, oi, kj, oj| {
            let (pi, pj) = (path.points[ki], path.points[kj]);
            // window [a − W, a − 1], offset 0 at the inner edge a − 1
            let x = path.cuts[ki] - 1 - oi as i64;
            let y = path.cuts[kj] - 1 - oj as i64;
            let v = match kernel {
                TasepKernel::Flat => k_flat(pi, pj, x, y, params)?,
                TasepKernel::FiniteN(n_total) => k_finite_n(pi, pj, x, y, params, n_total)?,
            };
            Ok(conjugate_factor(pi, pj, x, y, params) * v)
        })?;
        Ok(determinant(&mat))
    })?;
    Ok((check_probability(val)?, final_windows.widths))
}

/// P(h(x_k, t_k) ≤ H_k for all k) over windows [H_k + 1, H_k + W_k].
pub fn joint_prob_png(obs: &PNGObservation, kernel: PngKernel) -> Result<f64> {
    joint_prob_png_meta(obs, kernel).map(|(v, _)| v)
}

/// As [`joint_prob_png`], also returning the converged window widths.
pub fn joint_prob_png_meta(
    obs: &PNGObservation,
    kernel: PngKernel,
) -> Result<(f64, Vec<usize>)> {
    if let PngKernel::FixedTime(t) = kernel {
        for pt in &obs.points {
            if (pt.t - t).abs() > 1e-12 {
                return Err(Error::IncompatibleInputs(format!(
                    "fixed-time kernel at t = {t} but observation point at t = {}",
                    pt.t
                )));
            }
        }
    }
    let widths: Vec<usize> = obs
        .points
        .iter()
        .map(|pt| 20 + (8.0 * pt.t).ceil() as usize)
        .collect();
    let windows = TruncationWindow {
        starts: obs.cuts.iter().map(|h| h + 1).collect(),
        widths,
        stability_tol: DEFAULT_STABILITY_TOL,
        converged: false,
    };
    let (val, final_windows) = converge(windows, |w| {
        let mat = BlockMatrix::assemble(&w.widths, |ki, oi, kj, oj| {
            let (pi, pj) = (obs.points[ki], obs.points[kj]);
            let h1 = w.starts[ki] + oi as i64;
            let h2 = w.starts[kj] + oj as i64;
            match kernel {
                PngKernel::FixedTime(t) => k_png_fixed_time(t, pi.x, h1, pj.x, h2),
                PngKernel::Spacelike => k_png_spacelike(pi, h1, pj, h2),
            }
        })?;
        Ok(determinant(&mat))
    })?;
    Ok((check_probability(val)?, final_windows.widths))
}

/// Continuum window length for each L²([s_k, ∞)) factor.
pub const AIRY_WINDOW_LEN: f64 = 10.0;
const AIRY_GL_ORDER: usize = 10;

/// P(A₁(τ_k) ≤ s_k for all k), discretized with composite Gauss–Legendre
/// panels on [s_k, s_k + 10]; the panel count doubles until stable.
pub fn joint_prob_airy1(obs: &AiryObservation) -> Result<f64> {
    airy1_determinant(obs, AIRY_GL_ORDER)
}

/// Same determinant at a caller-chosen panel order; two different orders
/// act as independent discretizations of the same operator.
pub fn airy1_determinant(obs: &AiryObservation, order: usize) -> Result<f64> {
    let m = obs.taus.len();
    let mut panels = 2usize;
    let mut prev = airy1_det_at(obs, order, panels)?;
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let val = airy1_det_at(obs, order, panels)?;
        if (val - prev).abs() < DEFAULT_STABILITY_TOL {
            return check_probability(val);
        }
        prev = val;
    }
    Err(Error::NonConvergent(format!(
        "continuum determinant not stable at {panels} panels ({m} points)"
    )))
}

fn airy1_det_at(obs: &AiryObservation, order: usize, panels: usize) -> Result<f64> {
    let (gl_x, gl_w) = gauss_legendre(order);
    // nodes and weights per observation point
    let mut nodes: Vec<Vec<(f64, f64)>> = Vec::new();
    for &s in &obs.cuts {
        let mut v = Vec::with_capacity(order * panels);
        let step = AIRY_WINDOW_LEN / panels as f64;
        for pnl in 0..panels {
            let lo = s + pnl as f64 * step;
            for (x, w) in gl_x.iter().zip(&gl_w) {
                v.push((lo + 0.5 * step * (x + 1.0), 0.5 * step * w));
            }
        }
        nodes.push(v);
    }
    let widths: Vec<usize> = nodes.iter().map(Vec::len).collect();
    let mat = BlockMatrix::assemble(&widths, |ki, oi, kj, oj| {
        let (xi, wi) = nodes[ki][oi];
        let (xj, wj) = nodes[kj][oj];
        Ok((wi * wj).sqrt() * k_airy1(obs.taus[ki], xi, obs.taus[kj], xj)?)
    })?;
    Ok(determinant(&mat))
}
