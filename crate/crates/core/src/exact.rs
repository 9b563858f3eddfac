//! Exact arithmetic for the relaxation values.
//!
//! Sherali-Adams values are monomials in `n^{-1/4}`, so constraint sums live in
//! the number field `Q(θ)` with `θ = n^{1/4}`. [`Surd`] stores an element of that
//! field in a canonical basis and decides signs exactly, without floating point.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Roots;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseExactError {
    #[error("malformed rational `{0}`")]
    Rational(String),
    #[error("malformed radical term `{0}`")]
    Term(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// Parse `"num/den"` or a bare integer.
pub fn parse_rational(s: &str) -> Result<Rational, ParseExactError> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| ParseExactError::Rational(s.to_string()))?;
    let den = BigInt::from_str(den).map_err(|_| ParseExactError::Rational(s.to_string()))?;
    if den.is_zero() {
        return Err(ParseExactError::ZeroDenominator(s.to_string()));
    }
    Ok(Rational::new(num, den))
}

/// Render as `"num/den"`, always with an explicit denominator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rational(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() => a / b,
        // Very large operands: scale down by a common power of two first.
        _ => {
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let a = (r.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let b = (r.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            a / b
        }
    }
}

/// The field `Q(n^{1/4})` for a fixed positive integer `n`.
///
/// `degree` is the degree of `θ = n^{1/4}` over `Q`: 1 when `n` is a fourth
/// power, 2 when it is a square only, 4 otherwise. `rho` satisfies
/// `θ^degree = rho`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QuarticField {
    radicand: u64,
    degree: usize,
    rho: u64,
}

impl QuarticField {
    pub fn new(radicand: u64) -> Self {
        assert!(radicand >= 1, "radicand must be positive");
        let a = radicand.nth_root(4);
        if a.pow(4) == radicand {
            return QuarticField { radicand, degree: 1, rho: a };
        }
        let b = radicand.sqrt();
        if b * b == radicand {
            return QuarticField { radicand, degree: 2, rho: b };
        }
        QuarticField { radicand, degree: 4, rho: radicand }
    }

    pub fn radicand(&self) -> u64 {
        self.radicand
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn zero(&self) -> Surd {
        Surd::from_rational(*self, Rational::zero())
    }

    pub fn one(&self) -> Surd {
        Surd::from_rational(*self, Rational::one())
    }

    pub fn rational(&self, r: Rational) -> Surd {
        Surd::from_rational(*self, r)
    }

    pub fn integer(&self, v: i64) -> Surd {
        Surd::from_rational(*self, Rational::from_integer(BigInt::from(v)))
    }

    /// `θ^k = n^{k/4}` for any integer `k`.
    pub fn theta_pow(&self, k: i64) -> Surd {
        let d = self.degree as i64;
        let q = k.div_euclid(d);
        let r = k.rem_euclid(d) as usize;
        let rho = BigInt::from(self.rho);
        let scale = if q >= 0 {
            Rational::from_integer(num_traits::pow(rho, q as usize))
        } else {
            Rational::new(BigInt::one(), num_traits::pow(rho, (-q) as usize))
        };
        let mut coeffs: [Rational; 4] = Default::default();
        coeffs[r] = scale;
        Surd { field: *self, coeffs }
    }

    pub fn theta_f64(&self) -> f64 {
        (self.radicand as f64).powf(0.25)
    }
}

/// An exact element `Σ c_k θ^k` of `Q(n^{1/4})` in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Surd {
    field: QuarticField,
    coeffs: [Rational; 4],
}

impl Surd {
    pub fn from_rational(field: QuarticField, r: Rational) -> Self {
        let mut coeffs: [Rational; 4] = Default::default();
        coeffs[0] = r;
        Surd { field, coeffs }
    }

    pub fn field(&self) -> QuarticField {
        self.field
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs[..self.field.degree]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Zero::is_zero)
    }

    /// `Some(r)` when the value is rational.
    pub fn as_rational(&self) -> Option<&Rational> {
        if self.coeffs[1..].iter().all(Zero::is_zero) {
            Some(&self.coeffs[0])
        } else {
            None
        }
    }

    pub fn mul_rational(&self, r: &Rational) -> Surd {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = &*c * r;
        }
        out
    }

    pub fn mul_int(&self, v: u64) -> Surd {
        self.mul_rational(&Rational::from_integer(BigInt::from(v)))
    }

    pub fn to_f64(&self) -> f64 {
        let theta = self.field.theta_f64();
        self.coeffs()
            .iter()
            .enumerate()
            .map(|(k, c)| rational_to_f64(c) * theta.powi(k as i32))
            .sum()
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        let c = &self.coeffs;
        match self.field.degree {
            1 => sign(&c[0]),
            2 => quad_sign(&c[0], &c[1], self.field.rho),
            _ => {
                let n = self.field.radicand;
                let nn = Rational::from_integer(BigInt::from(n));
                // value = A + B·θ with A = c0 + c2·s, B = c1 + c3·s, s = θ² = √n.
                let sa = quad_sign(&c[0], &c[2], n);
                let sb = quad_sign(&c[1], &c[3], n);
                if sa >= 0 && sb >= 0 {
                    return sa.max(sb);
                }
                if sa <= 0 && sb <= 0 {
                    return sa.min(sb);
                }
                // Opposite signs: compare A² with B²·s.
                let two = Rational::from_integer(BigInt::from(2));
                let u = &c[0] * &c[0] + &c[2] * &c[2] * &nn - &two * &c[1] * &c[3] * &nn;
                let v = &two * &c[0] * &c[2] - &c[1] * &c[1] - &c[3] * &c[3] * &nn;
                let d = quad_sign(&u, &v, n);
                if sa > 0 {
                    d
                } else {
                    -d
                }
            }
        }
    }

    fn check_field(&self, other: &Surd) {
        assert_eq!(self.field, other.field, "mixing elements of different fields");
    }
}

fn sign(r: &Rational) -> i8 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

/// Sign of `u + v·√w` for a positive non-square integer `w`.
fn quad_sign(u: &Rational, v: &Rational, w: u64) -> i8 {
    let su = sign(u);
    let sv = sign(v);
    if su >= 0 && sv >= 0 {
        return su.max(sv);
    }
    if su <= 0 && sv <= 0 {
        return su.min(sv);
    }
    let ww = Rational::from_integer(BigInt::from(w));
    let t = sign(&(u * u - v * v * ww));
    if su > 0 {
        t
    } else {
        -t
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl Add for &Surd {
    type Output = Surd;
    fn add(self, rhs: &Surd) -> Surd {
        self.check_field(rhs);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += b;
        }
        out
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, rhs: Surd) -> Surd {
        &self + &rhs
    }
}

impl Sub for &Surd {
    type Output = Surd;
    fn sub(self, rhs: &Surd) -> Surd {
        self.check_field(rhs);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= b;
        }
        out
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, rhs: Surd) -> Surd {
        &self - &rhs
    }
}

impl Neg for &Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c = -&*c;
        }
        out
    }
}

impl Mul for &Surd {
    type Output = Surd;
    fn mul(self, rhs: &Surd) -> Surd {
        self.check_field(rhs);
        let d = self.field.degree;
        let rho = Rational::from_integer(BigInt::from(self.field.rho));
        let mut coeffs: [Rational; 4] = Default::default();
        for i in 0..d {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..d {
                if rhs.coeffs[j].is_zero() {
                    continue;
                }
                let prod = &self.coeffs[i] * &rhs.coeffs[j];
                let k = i + j;
                if k < d {
                    coeffs[k] += prod;
                } else {
                    coeffs[k - d] += prod * &rho;
                }
            }
        }
        Surd { field: self.field, coeffs }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, rhs: Surd) -> Surd {
        &self * &rhs
    }
}

impl std::iter::Sum for Surd {
    fn sum<I: Iterator<Item = Surd>>(mut iter: I) -> Surd {
        let first = iter.next().expect("Surd::sum needs at least one term; use field.zero()");
        iter.fold(first, |acc, x| &acc + &x)
    }
}

/// Renders `c0 + c1*n^(1/4) + ...` with the radicand left symbolic; zero terms
/// are omitted and the zero element prints as `0/1`.
impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (k, c) in self.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if k == 0 {
                terms.push(format_rational(c));
            } else {
                terms.push(format!("{}*n^({}/4)", format_rational(c), k));
            }
        }
        if terms.is_empty() {
            write!(f, "0/1")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Parse the [`Display`](fmt::Display) form back into `field`.
pub fn parse_surd(field: QuarticField, s: &str) -> Result<Surd, ParseExactError> {
    let mut acc = field.zero();
    for term in s.split(" + ") {
        let term = term.trim();
        let (coef, power) = match term.split_once("*n^(") {
            Some((c, rest)) => {
                let k = rest
                    .strip_suffix("/4)")
                    .and_then(|k| k.parse::<i64>().ok())
                    .ok_or_else(|| ParseExactError::Term(term.to_string()))?;
                (c, k)
            }
            None => (term, 0),
        };
        let c = parse_rational(coef)?;
        acc = &acc + &field.theta_pow(power).mul_rational(&c);
    }
    Ok(acc)
}
