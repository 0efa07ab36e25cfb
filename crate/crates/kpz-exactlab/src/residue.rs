//! Exact-rational evaluation of circle integrals whose integrands are
//! Laurent products of linear factors, by summing residues.
//!
//! This is the validation oracle for [`crate::contour_quad`]: every contour
//! integral in the lattice kernels has the form
//!
//!   (1/2πi) ∮ dw ∏_i (c0_i + c1_i w)^{e_i}
//!
//! with integer exponents, so its value is an exact rational function of
//! the factor coefficients.  Residues are extracted with BigRational
//! arithmetic, with no floating point involved.

use num_rational::BigRational;
use num_traits::{One, Zero};

/// One linear factor (c0 + c1 w)^exp of the integrand.
#[derive(Clone, Debug)]
pub struct Factor {
    pub c0: BigRational,
    pub c1: BigRational,
    pub exp: i64,
}

impl Factor {
    pub fn new(c0: BigRational, c1: BigRational, exp: i64) -> Self {
        Factor { c0, c1, exp }
    }

    /// (w)^exp
    pub fn w(exp: i64) -> Self {
        Factor::new(BigRational::zero(), BigRational::one(), exp)
    }

    /// (1 + w)^exp
    pub fn one_plus_w(exp: i64) -> Self {
        Factor::new(BigRational::one(), BigRational::one(), exp)
    }

    /// (1 + c·w)^exp
    pub fn one_plus_cw(c: &BigRational, exp: i64) -> Self {
        Factor::new(BigRational::one(), c.clone(), exp)
    }

    /// (-w)^exp
    pub fn neg_w(exp: i64) -> Self {
        Factor::new(BigRational::zero(), -BigRational::one(), exp)
    }
}

fn binom_general(e: i64, m: usize) -> BigRational {
    // e (e-1) ... (e-m+1) / m!
    let mut v = BigRational::one();
    for k in 0..m {
        v *= BigRational::from_integer((e - k as i64).into());
        v /= BigRational::from_integer(((k + 1) as i64).into());
    }
    v
}

fn pow_rational(base: &BigRational, exp: i64) -> BigRational {
    if exp >= 0 {
        num_traits::pow::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow::pow(base.clone().recip(), (-exp) as usize)
    }
}

/// Residue of the factor product at w = r.
pub fn residue_at(factors: &[Factor], r: &BigRational) -> BigRational {
    // split into factors vanishing at r (pure monomials in u = w - r)
    // and factors analytic and non-zero at r
    let mut mono_exp: i64 = 0;
    let mut prefix = BigRational::one();
    let mut analytic: Vec<(BigRational, BigRational, i64)> = Vec::new(); // (d, c1, exp)
    for f in factors {
        if f.exp == 0 {
            continue;
        }
        let d = &f.c0 + &f.c1 * r;
        if d.is_zero() {
            if f.c1.is_zero() {
                // identically zero factor with positive power: product is 0
                assert!(f.exp > 0, "zero factor with negative exponent");
                return BigRational::zero();
            }
            mono_exp += f.exp;
            prefix *= pow_rational(&f.c1, f.exp);
        } else {
            analytic.push((d, f.c1.clone(), f.exp));
        }
    }
    if mono_exp >= 0 {
        return BigRational::zero(); // no pole at r
    }
    let ord = (-mono_exp - 1) as usize; // coefficient of u^ord needed
    let mut poly = vec![BigRational::zero(); ord + 1];
    poly[0] = BigRational::one();
    for (d, c1, exp) in analytic {
        let ratio = &c1 / &d;
        let scale = pow_rational(&d, exp);
        // series of (d + c1 u)^exp = d^exp Σ_m binom(exp, m) (c1/d)^m u^m
        let mut fac = vec![BigRational::zero(); ord + 1];
        let mut rp = BigRational::one();
        for (m, slot) in fac.iter_mut().enumerate() {
            *slot = &scale * binom_general(exp, m) * &rp;
            rp *= &ratio;
        }
        let mut next = vec![BigRational::zero(); ord + 1];
        for i in 0..=ord {
            if poly[i].is_zero() {
                continue;
            }
            for j in 0..=(ord - i) {
                let t = &poly[i] * &fac[j];
                next[i + j] += t;
            }
        }
        poly = next;
    }
    prefix * poly[ord].clone()
}

/// (1/2πi) ∮ of the factor product over a contour enclosing exactly the
/// given poles: the sum of residues there.
pub fn rational_contour(factors: &[Factor], poles: &[BigRational]) -> BigRational {
    poles.iter().map(|r| residue_at(factors, r)).sum()
}

/// Convert a BigRational to f64 (for comparisons against quadrature).
pub fn to_f64(v: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    v.to_f64().unwrap_or_else(|| {
        // fall back to a scaled division for very large numerators
        let n = v.numer().to_f64().unwrap_or(f64::NAN);
        let d = v.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Rational q as a BigRational from a (num, den) pair.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}
