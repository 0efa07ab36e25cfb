//! Simulators for the three dynamics (parallel-update TASEP, the discrete
//! growth model, continuous PNG) and exact probability oracles for small
//! systems.
//!
//! The oracles are deliberately independent of the kernel machinery: the
//! brute-force transition probability enumerates update sequences, the
//! determinantal form evaluates single contour integrals, and the signed
//! measure sums its auxiliary variables directly.  Tests pit them against
//! each other.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tasep_kernels::{f_n, InitialCondition, ModelParams};
use crate::{Error, Result};

/// Strictly decreasing particle positions x₁ > x₂ > … at an integer time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParticleConfig {
    pub positions: Vec<i64>,
    pub time: i64,
}

impl ParticleConfig {
    pub fn new(positions: Vec<i64>, time: i64) -> Result<Self> {
        if time < 0 {
            return Err(Error::OutOfRange(format!("negative time {time}")));
        }
        if positions.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::IncompatibleInputs(
                "positions must be strictly decreasing".into(),
            ));
        }
        Ok(ParticleConfig { positions, time })
    }
}

/// Surface heights at sample points; integer-valued points are stored as
/// exact f64 integers in the discrete model.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightProfile {
    pub xs: Vec<f64>,
    pub heights: Vec<i64>,
    pub time: f64,
}

/// (seed, stream) fully determines a sample; distinct streams are
/// independent trajectories of the same experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngSpec { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

// ---------------------------------------------------------------------------
// Parallel-update TASEP
// ---------------------------------------------------------------------------

/// One parallel step: every particle draws a coin; it hops right iff the
/// coin says hop and its target was empty in the previous configuration.
fn parallel_step<R: Rng>(pos: &mut [i64], p: f64, rng: &mut R) {
    let mut right_prev = i64::MAX; // previous-config position of the particle ahead
    for k in 0..pos.len() {
        let old = pos[k];
        let coin = rng.gen::<f64>() < p;
        if coin && old + 1 < right_prev {
            pos[k] = old + 1;
        }
        right_prev = old;
    }
}

/// Simulate particle labels `window.0 ..= window.1` for `t_max` steps,
/// returning the configuration at every integer time.
///
/// With the infinite alternating initial condition the rightmost window
/// label evolves as if unblocked, so only labels at least `t_max` left of
/// the window start are faithful to the infinite system (blocking
/// information travels one label per step).  A window not wider than
/// `t_max` has no faithful label at the horizon and is rejected.
pub fn simulate_tasep(
    params: &ModelParams,
    ic: &InitialCondition,
    window: (i64, i64),
    t_max: i64,
    rng: RngSpec,
) -> Result<Vec<ParticleConfig>> {
    if t_max < 0 {
        return Err(Error::OutOfRange(format!("negative horizon {t_max}")));
    }
    let mut pos = match ic {
        InitialCondition::AlternatingInfinite => {
            let (lo, hi) = window;
            if hi < lo {
                return Err(Error::IncompatibleInputs(format!(
                    "empty label window ({lo}, {hi})"
                )));
            }
            if hi - lo < t_max {
                return Err(Error::WindowTooSmall(format!(
                    "label window ({lo}, {hi}) needs a right cushion of {t_max} labels"
                )));
            }
            (lo..=hi).map(|n| -2 * n).collect::<Vec<i64>>()
        }
        InitialCondition::FiniteList(ys) => {
            ic.validate()?;
            ys.clone()
        }
    };
    let p = params.p();
    let mut rng = rng.rng();
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(ParticleConfig::new(pos.clone(), 0)?);
    for t in 1..=t_max {
        parallel_step(&mut pos, p, &mut rng);
        out.push(ParticleConfig::new(pos.clone(), t)?);
    }
    Ok(out)
}

/// Bit-parallel sampler of the single position x_n(t) under the alternating
/// initial condition.  Requires the hop probability to be dyadic,
/// p = a/2^m with m ≤ 24 (exactly representable coins are built from m
/// random words); the mass experiments use q = 1/2 where m = 1.
pub fn sample_position(params: &ModelParams, n: i64, t: i64, rng: &mut ChaCha8Rng) -> Result<i64> {
    if n < 1 || t < 0 {
        return Err(Error::OutOfRange(format!("need n >= 1, t >= 0, got ({n}, {t})")));
    }
    let p = params.p();
    let mut m = 0u32;
    while m <= 24 {
        let scaled = p * (1u64 << m) as f64;
        if scaled == scaled.floor() {
            break;
        }
        m += 1;
    }
    if m > 24 {
        return Err(Error::IncompatibleInputs(format!(
            "fast sampler needs a dyadic hop probability, got p = {p}"
        )));
    }
    let a = (p * (1u64 << m) as f64) as u64;
    // sites -2n ..= t-1; bit j <-> site j - 2n; particle n never leaves it,
    // and only labels 1..=n can influence x_n.
    let width = (2 * n + t) as usize;
    let words = width.div_ceil(64);
    let mut occ = vec![0u64; words];
    for k in 1..=n {
        let j = (2 * n - 2 * k) as usize;
        occ[j / 64] |= 1 << (j % 64);
    }
    let mut coins = vec![0u64; words];
    let mut shifted = vec![0u64; words];
    for _ in 0..t {
        // coins: Bernoulli(a / 2^m) per bit from m random words
        for w in coins.iter_mut() {
            *w = 0;
        }
        for bit in 0..m {
            let keep = (a >> bit) & 1 == 1;
            for wd in coins.iter_mut() {
                let r = rng.next_u64();
                *wd = if keep { *wd | r } else { *wd & r };
            }
        }
        // movers = occupied & target-empty & coin; targets shift up one bit
        let mut carry = 0u64;
        for i in 0..words {
            // bit j of (occ >> 1) = occupancy of site j+1
            let next_word = if i + 1 < words { occ[i + 1] } else { 0 };
            let right = (occ[i] >> 1) | (next_word << 63);
            let movers = occ[i] & !right & coins[i];
            shifted[i] = (movers << 1) | carry;
            carry = movers >> 63;
            occ[i] &= !movers;
        }
        for i in 0..words {
            occ[i] |= shifted[i];
        }
    }
    // x_n(t) = n-th occupied site from the right
    let mut remaining = n;
    for i in (0..words).rev() {
        let c = occ[i].count_ones() as i64;
        if c < remaining {
            remaining -= c;
            continue;
        }
        let mut w = occ[i];
        loop {
            let top = 63 - w.leading_zeros() as usize;
            remaining -= 1;
            if remaining == 0 {
                return Ok((i * 64 + top) as i64 - 2 * n);
            }
            w &= !(1 << top);
        }
    }
    Err(Error::NumericalInconsistency(
        "particle count mismatch in bitset sampler".into(),
    ))
}

// ---------------------------------------------------------------------------
// Exact transition-probability oracles
// ---------------------------------------------------------------------------

fn check_pair(y: &ParticleConfig, x: &ParticleConfig) -> Result<usize> {
    if y.positions.len() != x.positions.len() {
        return Err(Error::IncompatibleInputs(format!(
            "configurations have {} and {} particles",
            y.positions.len(),
            x.positions.len()
        )));
    }
    Ok(y.positions.len())
}

/// Enumerate one parallel step from `z`: all subsets of the movable
/// particles, with weight p^hops · q^(stays while free).
fn one_step_successors(z: &[i64], p: f64, q: f64) -> Vec<(Vec<i64>, f64)> {
    let movable: Vec<usize> = (0..z.len())
        .filter(|&k| k == 0 || z[k] + 1 < z[k - 1])
        .collect();
    let mut out = Vec::with_capacity(1 << movable.len());
    for mask in 0u32..(1 << movable.len()) {
        let mut cfg = z.to_vec();
        let hops = mask.count_ones();
        for (b, &k) in movable.iter().enumerate() {
            if mask >> b & 1 == 1 {
                cfg[k] += 1;
            }
        }
        let weight = p.powi(hops as i32) * q.powi((movable.len() as u32 - hops) as i32);
        out.push((cfg, weight));
    }
    out
}

/// Exact transition probability by enumerating every update sequence.
/// Exponential in N and t; both are capped at 6.
pub fn brute_force_transition(
    y: &ParticleConfig,
    x: &ParticleConfig,
    t: i64,
    params: &ModelParams,
) -> Result<f64> {
    let n = check_pair(y, x)?;
    if n > 6 || t > 6 {
        return Err(Error::TooLarge(format!(
            "brute force limited to N <= 6, t <= 6, got ({n}, {t})"
        )));
    }
    let (p, q) = (params.p(), params.q);
    let mut dist: HashMap<Vec<i64>, f64> = HashMap::new();
    dist.insert(y.positions.clone(), 1.0);
    for _ in 0..t {
        let mut next: HashMap<Vec<i64>, f64> = HashMap::new();
        for (z, pr) in &dist {
            for (cfg, w) in one_step_successors(z, p, q) {
                *next.entry(cfg).or_insert(0.0) += pr * w;
            }
        }
        dist = next;
    }
    Ok(dist.get(&x.positions).copied().unwrap_or(0.0))
}

/// Rational-arithmetic variant of the brute-force oracle, for rational q.
pub fn brute_force_transition_rational(
    y: &ParticleConfig,
    x: &ParticleConfig,
    t: i64,
    q: &BigRational,
) -> Result<BigRational> {
    let n = check_pair(y, x)?;
    if n > 6 || t > 6 {
        return Err(Error::TooLarge(format!(
            "brute force limited to N <= 6, t <= 6, got ({n}, {t})"
        )));
    }
    let p = BigRational::one() - q;
    let mut dist: HashMap<Vec<i64>, BigRational> = HashMap::new();
    dist.insert(y.positions.clone(), BigRational::one());
    for _ in 0..t {
        let mut next: HashMap<Vec<i64>, BigRational> = HashMap::new();
        for (z, pr) in &dist {
            let movable: Vec<usize> = (0..z.len())
                .filter(|&k| k == 0 || z[k] + 1 < z[k - 1])
                .collect();
            for mask in 0u32..(1 << movable.len()) {
                let mut cfg = z.clone();
                let mut w = pr.clone();
                for (b, &k) in movable.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        cfg[k] += 1;
                        w *= &p;
                    } else {
                        w *= q;
                    }
                }
                let e = next.entry(cfg).or_insert_with(BigRational::zero);
                *e += w;
            }
        }
        dist = next;
    }
    Ok(dist.get(&x.positions).cloned().unwrap_or_else(BigRational::zero))
}

/// Number of adjacent pairs x_j − x_{j+1} = 1 in a configuration.
pub fn adjacency_count(positions: &[i64]) -> u32 {
    positions.windows(2).filter(|w| w[0] - w[1] == 1).count() as u32
}

fn det_small(n: usize, a: &mut [f64]) -> f64 {
    let mut det = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for j in 0..n {
                a.swap(c * n + j, piv * n + j);
            }
            det = -det;
        }
        let d = a[c * n + c];
        det *= d;
        for r in c + 1..n {
            let f = a[r * n + c] / d;
            for j in c..n {
                a[r * n + j] -= f * a[c * n + j];
            }
        }
    }
    det
}

/// Determinantal transition probability:
/// q^(adjacencies of x) · det[F_{j−i}(x_{N−j+1} − y_{N−i+1}, t+j−i)].
pub fn g_det(
    y: &ParticleConfig,
    x: &ParticleConfig,
    t: i64,
    params: &ModelParams,
) -> Result<f64> {
    let n = check_pair(y, x)?;
    let mut m = vec![0.0; n * n];
    for i in 1..=n {
        for j in 1..=n {
            let xv = x.positions[n - j];
            let yv = y.positions[n - i];
            let d = j as i64 - i as i64;
            m[(i - 1) * n + (j - 1)] = f_n(d, xv - yv, t + d, params)?;
        }
    }
    let det = det_small(n, &mut m);
    Ok(params.q.powi(adjacency_count(&x.positions) as i32) * det)
}

/// Marginal of the signed determinantal measure with the observed positions
/// pinned as the level minima; sums every auxiliary variable directly.
pub fn w_marginal(
    y: &ParticleConfig,
    x: &ParticleConfig,
    t: i64,
    params: &ModelParams,
) -> Result<f64> {
    let n = check_pair(y, x)?;
    if n > 4 || t > 4 {
        return Err(Error::TooLarge(format!(
            "signed-measure marginal limited to N <= 4, t <= 4, got ({n}, {t})"
        )));
    }
    if t < n as i64 - 1 {
        // for t < N-1 the bottom rows of the F block carry negative time
        // arguments, whose entries grow in x: the level sums then diverge
        // and no truncation is meaningful
        return Err(Error::OutOfRange(format!(
            "signed-measure sum converges only for t >= N-1, got ({n}, {t})"
        )));
    }
    let p = params.p();
    let phi = |xv: Option<i64>, yv: i64| -> f64 {
        match xv {
            None => 1.0,
            Some(xv) => {
                if yv >= xv {
                    1.0
                } else if yv == xv - 1 {
                    p
                } else {
                    0.0
                }
            }
        }
    };
    // levels[k] holds x^{k+1}; x_1^n pinned to the observed positions.
    // the top level is support-bounded by y_1 + t; each level below it can
    // exceed the one above by at most one before its block gains a zero row,
    // hence the extra N of slack
    let ub = y.positions[0] + t + 2 + n as i64;
    let mut levels: Vec<Vec<i64>> = (1..=n).map(|k| vec![x.positions[k - 1]; k]).collect();
    let mut fcache: HashMap<(i64, i64, i64), f64> = HashMap::new();
    let mut total = 0.0;

    // recursive enumeration over the free variables x_i^k, i >= 2
    fn recurse(
        levels: &mut Vec<Vec<i64>>,
        lvl: usize,
        idx: usize,
        ub: i64,
        n: usize,
        t: i64,
        y: &[i64],
        params: &ModelParams,
        phi: &dyn Fn(Option<i64>, i64) -> f64,
        fcache: &mut HashMap<(i64, i64, i64), f64>,
        total: &mut f64,
    ) -> Result<()> {
        if lvl == n {
            // weight = product of transition determinants times the F block
            let mut weight = 1.0;
            for k in 1..n {
                // det(phi(x_i^k, x_{j+1}^{k+1}))_{0<=i,j<=k} with x_0^k = -infinity
                let dim = k + 1;
                let mut m = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        let xv = if i == 0 { None } else { Some(levels[k - 1][i - 1]) };
                        m[i * dim + j] = phi(xv, levels[k][j]);
                    }
                }
                weight *= det_small(dim, &mut m);
                if weight == 0.0 {
                    return Ok(());
                }
            }
            let mut m = vec![0.0; n * n];
            for i in 1..=n {
                for j in 1..=n {
                    let key = (1 - i as i64, levels[n - 1][j - 1] - y[n - i], t + 1 - i as i64);
                    let v = match fcache.get(&key) {
                        Some(&v) => v,
                        None => {
                            let v = f_n(key.0, key.1, key.2, params)?;
                            fcache.insert(key, v);
                            v
                        }
                    };
                    m[(i - 1) * n + (j - 1)] = v;
                }
            }
            *total += weight * det_small(n, &mut m);
            return Ok(());
        }
        if idx > lvl {
            return recurse(levels, lvl + 1, 1, ub, n, t, y, params, phi, fcache, total);
        }
        let lo = levels[lvl][idx - 1] + 1; // strict increase within a level
        for v in lo..=ub {
            levels[lvl][idx] = v;
            recurse(levels, lvl, idx + 1, ub, n, t, y, params, phi, fcache, total)?;
        }
        Ok(())
    }

    recurse(
        &mut levels,
        1,
        1,
        ub,
        n,
        t,
        &y.positions,
        params,
        &phi,
        &mut fcache,
        &mut total,
    )?;
    Ok(total)
}

// ---------------------------------------------------------------------------
// Discrete growth model
// ---------------------------------------------------------------------------

/// Height at integer x from a particle configuration under the alternating
/// initial condition: h_t(x) = t − x − 2·max{n : x_n(t) ≥ x}, where
/// `first_label` is the label of positions[0].  The maximizing label must
/// lie strictly inside the window for every requested x.
pub fn heights_from_config(
    cfg: &ParticleConfig,
    first_label: i64,
    x_window: (i64, i64),
) -> Result<HeightProfile> {
    let (x_lo, x_hi) = x_window;
    let mut xs = Vec::new();
    let mut heights = Vec::new();
    for xv in x_lo..=x_hi {
        // positions are decreasing, so labels with x_n >= x form a prefix
        let cnt = cfg.positions.partition_point(|&pos| pos >= xv);
        if cnt == 0 || cnt == cfg.positions.len() {
            return Err(Error::WindowTooSmall(format!(
                "maximizing label for x = {xv} not interior to the window"
            )));
        }
        let n_star = first_label + cnt as i64 - 1;
        xs.push(xv as f64);
        heights.push(cfg.time - xv - 2 * n_star);
    }
    Ok(HeightProfile {
        xs,
        heights,
        time: cfg.time as f64,
    })
}

/// Integer-time profiles of the discrete growth model over `x_window`,
/// driven by the particle dynamics through the slope bijection (an upward
/// slope at a site is an occupied site, a local maximum flip is a hop).
pub fn simulate_growth(
    params: &ModelParams,
    x_window: (i64, i64),
    t_max: i64,
    rng: RngSpec,
) -> Result<Vec<HeightProfile>> {
    let (x_lo, x_hi) = x_window;
    if x_hi < x_lo {
        return Err(Error::IncompatibleInputs(format!(
            "empty window ({x_lo}, {x_hi})"
        )));
    }
    // label of a particle that stays weakly right of x_hi forever, padded by
    // the right cushion; leftmost label that can ever reach x_lo
    let n_anchor = (-x_hi).div_euclid(2);
    let lo = n_anchor - t_max - 1;
    let hi = (t_max - x_lo).div_euclid(2) + 1;
    let trajs = simulate_tasep(
        params,
        &InitialCondition::AlternatingInfinite,
        (lo, hi),
        t_max,
        rng,
    )?;
    trajs
        .iter()
        .map(|cfg| heights_from_config(cfg, lo, x_window))
        .collect()
}

// ---------------------------------------------------------------------------
// Continuous PNG
// ---------------------------------------------------------------------------

/// Poisson(λ) count by multiplying uniforms in chunks (exact, no extra
/// dependency; fine up to λ of a few million).
fn poisson_count<R: Rng>(lambda: f64, rng: &mut R) -> usize {
    let mut total = 0usize;
    let mut rest = lambda;
    while rest > 0.0 {
        let lam = rest.min(16.0);
        rest -= lam;
        let limit = (-lam).exp();
        let mut prod = rng.gen::<f64>();
        let mut k = 0usize;
        while prod > limit {
            prod *= rng.gen::<f64>();
            k += 1;
        }
        total += k;
    }
    total
}

/// Longest chain strictly increasing in both light-cone coordinates among
/// `points`, restricted to u ≤ u0, v ≤ v0 (the backward cone).
pub fn png_height(points: &[(f64, f64)], u0: f64, v0: f64) -> i64 {
    let mut sel: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(u, v)| u <= u0 && v <= v0)
        .collect();
    // patience sorting; ties in u must not chain, so v descends within a tie
    sel.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut tails: Vec<f64> = Vec::new();
    for (_, v) in sel {
        let i = tails.partition_point(|&t| t < v);
        if i == tails.len() {
            tails.push(v);
        } else {
            tails[i] = v;
        }
    }
    tails.len() as i64
}

/// Nucleation points (intensity 2 in (x, t), intensity 1 in light-cone
/// coordinates u = t+x, v = t−x) covering the backward cones of every
/// (x, t_max) with x in the closed range.
pub fn png_nucleations<R: Rng>(t_max: f64, x_range: (f64, f64), rng: &mut R) -> Vec<(f64, f64)> {
    let u_max = t_max + x_range.1;
    let v_max = t_max - x_range.0;
    let side_u = u_max + v_max;
    let n = poisson_count(side_u * side_u, rng);
    let mut pts = Vec::with_capacity(n / 2 + 1);
    for _ in 0..n {
        let u = u_max - rng.gen::<f64>() * side_u;
        let v = v_max - rng.gen::<f64>() * side_u;
        if u + v >= 0.0 {
            pts.push((u, v)); // t = (u+v)/2 >= 0
        }
    }
    pts
}

/// One continuous-PNG surface at time `t_max`, evaluated at `xs`.
pub fn simulate_png(t_max: f64, xs: &[f64], rng: RngSpec) -> Result<HeightProfile> {
    if t_max <= 0.0 || !t_max.is_finite() {
        return Err(Error::OutOfRange(format!("need t_max > 0, got {t_max}")));
    }
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut rng = rng.rng();
    let pts = png_nucleations(t_max, (lo, hi), &mut rng);
    let heights = xs
        .iter()
        .map(|&x| png_height(&pts, t_max + x, t_max - x))
        .collect();
    Ok(HeightProfile {
        xs: xs.to_vec(),
        heights,
        time: t_max,
    })
}

// ---------------------------------------------------------------------------
// Exact lemma suite (rational arithmetic)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(LemmaCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn rat_pow(v: &BigRational, e: i64) -> BigRational {
    let mut out = BigRational::one();
    let b = if e >= 0 { v.clone() } else { v.recip() };
    for _ in 0..e.abs() {
        out *= &b;
    }
    out
}

fn det_rational(dim: usize, m: &[BigRational]) -> BigRational {
    if dim == 1 {
        return m[0].clone();
    }
    let mut out = BigRational::zero();
    for c in 0..dim {
        if m[c].is_zero() {
            continue;
        }
        let minor: Vec<BigRational> = (1..dim)
            .flat_map(|r| (0..dim).filter(|&j| j != c).map(move |j| m[r * dim + j].clone()))
            .collect();
        let term = &m[c] * det_rational(dim - 1, &minor);
        if c % 2 == 0 {
            out += term;
        } else {
            out -= term;
        }
    }
    out
}

/// Geometric-weight transition with parameter ν; `None` encodes −∞.
fn phi_nu(nu: &BigRational, q: &BigRational, x: Option<i64>, y: i64) -> BigRational {
    match x {
        None => rat_pow(nu, y),
        Some(x) => {
            if y >= x {
                rat_pow(nu, y - x)
            } else if y == x - 1 {
                BigRational::one() - q
            } else {
                BigRational::zero()
            }
        }
    }
}

fn g_nu(nu: &BigRational, q: &BigRational, a: i64, b: i64) -> BigRational {
    if b >= a {
        BigRational::zero()
    } else if b == a - 1 {
        rat_pow(nu, b) * (BigRational::one() - (BigRational::one() - q) * nu)
    } else {
        rat_pow(nu, b)
    }
}

/// Antisymmetrization of a fixed pseudo-random integer table.
fn antisym_f(b: &[i64], table: &HashMap<Vec<i64>, i64>) -> BigRational {
    fn perms(n: usize) -> Vec<(Vec<usize>, i64)> {
        if n == 1 {
            return vec![(vec![0], 1)];
        }
        let mut out = Vec::new();
        for (perm, sign) in perms(n - 1) {
            for pos in 0..n {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                let s = if (n - 1 - pos) % 2 == 0 { sign } else { -sign };
                out.push((p, s));
            }
        }
        out
    }
    let mut total = BigInt::zero();
    for (perm, sign) in perms(b.len()) {
        let key: Vec<i64> = perm.iter().map(|&i| b[i]).collect();
        if let Some(&v) = table.get(&key) {
            total += BigInt::from(sign * v);
        }
    }
    BigRational::from_integer(total)
}

fn ordered_tuples(lo: i64, hi: i64, n: usize) -> Vec<Vec<i64>> {
    // strictly increasing tuples in [lo, hi]
    fn rec(start: i64, hi: i64, n: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for v in start..=hi {
            cur.push(v);
            rec(v + 1, hi, n - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(lo, hi, n, &mut Vec::new(), &mut out);
    out
}

fn check_row_reduction(report: &mut LemmaReport, rng: &mut ChaCha8Rng) {
    let q = rat(1, 2);
    for (n, nu) in [(2usize, rat(1, 1)), (2, rat(7, 10)), (3, rat(1, 1)), (3, rat(7, 10))] {
        // random antisymmetric f supported on (b0, b0 + 6]
        let b0 = 0i64;
        let span = (b0 + 1, b0 + 6);
        let mut table = HashMap::new();
        for tup in ordered_tuples(span.0, span.1, n) {
            table.insert(tup, rng.gen_range(-9..=9));
        }
        let a: Vec<i64> = (1..=n as i64).map(|i| 2 * i).collect(); // a_1 < ... < a_n
        let mut lhs = BigRational::zero();
        let mut rhs_sum = BigRational::zero();
        for b in ordered_tuples(span.0, span.1, n) {
            let f = antisym_f(&b, &table);
            if f.is_zero() {
                continue;
            }
            // rows a_0 = -infinity, a_1..a_n; columns b_0, b_1..b_n (full)
            let dim = n + 1;
            let mut m = vec![BigRational::zero(); dim * dim];
            for i in 0..dim {
                for j in 0..dim {
                    let av = if i == 0 { None } else { Some(a[i - 1]) };
                    let bv = if j == 0 { b0 } else { b[j - 1] };
                    m[i * dim + j] = phi_nu(&nu, &q, av, bv);
                }
            }
            lhs += det_rational(dim, &m) * &f;
            let mut mr = vec![BigRational::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    mr[i * n + j] = phi_nu(&nu, &q, Some(a[i]), b[j]);
                }
            }
            rhs_sum += det_rational(n, &mr) * &f;
        }
        let rhs = g_nu(&nu, &q, a[0], b0) * rhs_sum;
        let passed = lhs == rhs;
        report.push(
            &format!("row-reduction identity n={n} nu={nu}"),
            passed,
            format!("lhs = {lhs}, rhs = {rhs}"),
        );
    }
    // spot check of the boundary weight: a = b+1 branch
    let nu = rat(7, 10);
    let want = rat_pow(&nu, 3) * (BigRational::one() - (BigRational::one() - &q) * &nu);
    let got = g_nu(&nu, &q, 4, 3);
    report.push(
        "boundary weight a = b + 1",
        got == want,
        format!("got {got}, want {want}"),
    );
}

fn check_vandermonde(report: &mut LemmaReport, rng: &mut ChaCha8Rng) {
    let q = rat(1, 2);
    let phi = |x: Option<i64>, y: i64| phi_nu(&BigRational::one(), &q, x, y);
    // summed product of transition determinants over all lower levels,
    // with the extra virtual row at -infinity in each determinant
    fn level_sum(
        top: &[i64],
        k: usize,
        phi: &dyn Fn(Option<i64>, i64) -> BigRational,
    ) -> BigRational {
        // sum over x^k (k values, unordered over the effective range) of
        // det(phi(x^k_i, top_j))_{(k+1)x(k+1)} * level_sum(x^k, k-1)
        let dim = k + 1;
        debug_assert_eq!(top.len(), dim);
        if k == 0 {
            return BigRational::one();
        }
        let lo = top.iter().min().unwrap() - 1;
        let hi = top.iter().max().unwrap() + 1;
        let mut total = BigRational::zero();
        let mut vars = vec![0i64; k];
        fn rec(
            vars: &mut Vec<i64>,
            i: usize,
            lo: i64,
            hi: i64,
            top: &[i64],
            k: usize,
            phi: &dyn Fn(Option<i64>, i64) -> BigRational,
            total: &mut BigRational,
        ) {
            if i == k {
                let dim = k + 1;
                let mut m = vec![BigRational::zero(); dim * dim];
                for r in 0..dim {
                    for c in 0..dim {
                        let xv = if r == k { None } else { Some(vars[r]) };
                        m[r * dim + c] = phi(xv, top[c]);
                    }
                }
                let d = det_rational(dim, &m);
                if !d.is_zero() {
                    *total += d * level_sum(vars, k - 1, phi);
                }
                return;
            }
            // strict increase: the determinant is antisymmetric in the
            // summation variables, so ordered tuples times k! — but the
            // product of lower-level sums is symmetric too, so summing
            // unordered tuples directly is exact
            for v in lo..=hi {
                vars[i] = v;
                rec(vars, i + 1, lo, hi, top, k, phi, total);
            }
        }
        rec(&mut vars, 0, lo, hi, top, k, phi, &mut total);
        total
    }

    for n in [2usize, 3] {
        let mut ratios: Vec<BigRational> = Vec::new();
        let mut ok = true;
        for _ in 0..10 {
            // random strictly increasing top level
            let mut top: Vec<i64> = Vec::new();
            let mut v = rng.gen_range(-4..0);
            for _ in 0..n {
                top.push(v);
                v += rng.gen_range(1..4);
            }
            let s = level_sum(&top, n - 1, &phi);
            let mut vdm = BigRational::one();
            for i in 0..n {
                for j in i + 1..n {
                    vdm *= BigRational::from_integer(BigInt::from(top[j] - top[i]));
                }
            }
            ratios.push(s / vdm);
        }
        for r in &ratios[1..] {
            if r != &ratios[0] {
                ok = false;
            }
        }
        report.push(
            &format!("summed determinants / Vandermonde constant, n={n}"),
            ok && !ratios[0].is_zero(),
            format!("ratio = {}", ratios[0]),
        );
    }
}

/// One-step weights judged on the pre-step configuration (z) and on the
/// post-step configuration (x); `None` if the move is impossible.
fn step_weight_pre(z: &[i64], x: &[i64], q: &BigRational) -> Option<BigRational> {
    let p = BigRational::one() - q;
    let mut w = BigRational::one();
    for n in 0..z.len() {
        let blocked = n > 0 && z[n] == z[n - 1] - 1;
        match (blocked, x[n] - z[n]) {
            (true, 0) => {}
            (false, 0) => w *= q,
            (false, 1) => w *= &p,
            _ => return None,
        }
    }
    Some(w)
}

fn step_weight_post(z: &[i64], x: &[i64], q: &BigRational) -> Option<BigRational> {
    let p = BigRational::one() - q;
    let mut w = BigRational::one();
    for n in 0..z.len() {
        let blocked = n + 1 < x.len() && x[n] == x[n + 1] + 1;
        match (blocked, x[n] - z[n]) {
            (true, 0) => {}
            (false, 0) => w *= q,
            (false, 1) => w *= &p,
            _ => return None,
        }
    }
    Some(w)
}

fn check_weight_identity(report: &mut LemmaReport) {
    let q = rat(1, 2);
    let mut failures = 0usize;
    let mut cases = 0usize;
    for n in 1..=4usize {
        // gap patterns cover every blocking shape; absolute offset drops out
        let mut gaps = vec![1i64; n.saturating_sub(1)];
        loop {
            let mut z = vec![0i64];
            for g in &gaps {
                z.push(z.last().unwrap() - g);
            }
            let movable: Vec<usize> = (0..n).filter(|&k| k == 0 || z[k] + 1 < z[k - 1]).collect();
            for mask in 0u32..(1 << movable.len()) {
                let mut x = z.clone();
                for (b, &k) in movable.iter().enumerate() {
                    if mask >> b & 1 == 1 {
                        x[k] += 1;
                    }
                }
                cases += 1;
                let w = step_weight_pre(&z, &x, &q).unwrap();
                let wt = step_weight_post(&z, &x, &q).unwrap();
                let lhs = rat_pow(&q, adjacency_count(&z) as i64) * w;
                let rhs = rat_pow(&q, adjacency_count(&x) as i64) * wt;
                if lhs != rhs {
                    failures += 1;
                }
            }
            // next gap pattern over {1, 2, 3}
            let mut i = 0;
            loop {
                if i == gaps.len() {
                    break;
                }
                gaps[i] += 1;
                if gaps[i] <= 3 {
                    break;
                }
                gaps[i] = 1;
                i += 1;
            }
            if i == gaps.len() {
                break;
            }
        }
    }
    report.push(
        "pre/post weight identity",
        failures == 0,
        format!("{cases} cases, {failures} failures"),
    );
}

/// Exact-arithmetic verification of the combinatorial identities behind the
/// transition-probability determinant.
pub fn lemma_suite() -> LemmaReport {
    let mut report = LemmaReport::default();
    let mut rng = RngSpec::new(0x1e33a517e, 0).rng();
    check_row_reduction(&mut report, &mut rng);
    check_vandermonde(&mut report, &mut rng);
    check_weight_identity(&mut report);
    report
}
