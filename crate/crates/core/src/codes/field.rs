//! Table-driven arithmetic in `F_q` and its quadratic extension `F_{q²}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not a prime power")]
    NotPrimePower(u32),
    #[error("field order {0} too large for table arithmetic")]
    TooLarge(u32),
    #[error("inverse of zero")]
    ZeroInverse,
    #[error("element {0} outside the field")]
    OutOfRange(u32),
    #[error("modulus {0:?} is not irreducible")]
    Reducible(Vec<u32>),
}

/// Arithmetic on field elements encoded as `0..order`.
pub trait Arith {
    fn order(&self) -> u32;
    fn add(&self, a: u32, b: u32) -> u32;
    fn neg(&self, a: u32) -> u32;
    fn mul(&self, a: u32, b: u32) -> u32;
    fn inv(&self, a: u32) -> Result<u32, FieldError>;

    fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    fn pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Multiplicative order of a nonzero element.
    fn element_order(&self, a: u32) -> u64 {
        assert!(a != 0);
        let mut x = a;
        let mut k = 1;
        while x != 1 {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }
}

/// Reference moduli (ascending coefficients, monic) for small extension fields.
/// All are primitive; construction re-verifies this.
const CONWAY: &[(u32, &[u32])] = &[
    (4, &[1, 1, 1]),
    (8, &[1, 1, 0, 1]),
    (16, &[1, 1, 0, 0, 1]),
    (32, &[1, 0, 1, 0, 0, 1]),
    (64, &[1, 1, 0, 1, 1, 0, 1]),
    (128, &[1, 1, 0, 0, 0, 0, 0, 1]),
    (256, &[1, 0, 1, 1, 1, 0, 0, 0, 1]),
    (9, &[2, 2, 1]),
    (27, &[1, 2, 0, 1]),
    (81, &[2, 0, 0, 2, 1]),
    (243, &[1, 2, 0, 0, 0, 1]),
    (25, &[2, 4, 1]),
    (125, &[3, 3, 0, 1]),
    (49, &[3, 6, 1]),
    (343, &[4, 0, 6, 1]),
    (121, &[2, 7, 1]),
    (169, &[2, 12, 1]),
];

const MAX_ORDER: u32 = 1 << 12;

/// `F_q` with `q = p^e`. Element `x` stands for the polynomial whose base-`p`
/// digits (least significant first) are its coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Field {
    q: u32,
    p: u32,
    e: u32,
    modulus: Vec<u32>,
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
}

pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut rest = q;
    let mut e = 0;
    while rest.is_multiple_of(p) {
        rest /= p;
        e += 1;
    }
    (rest == 1).then_some((p, e))
}

fn digits(x: u32, p: u32, e: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(e as usize);
    let mut x = x;
    for _ in 0..e {
        out.push(x % p);
        x /= p;
    }
    out
}

fn undigits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0, |acc, &c| acc * p + c)
}

/// Product of two residues modulo a monic `modulus` of degree `e`.
fn poly_mulmod(a: &[u32], b: &[u32], modulus: &[u32], p: u32) -> Vec<u32> {
    let e = modulus.len() - 1;
    let mut prod = vec![0u32; 2 * e];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for k in (e..prod.len()).rev() {
        let c = prod[k];
        if c == 0 {
            continue;
        }
        prod[k] = 0;
        for (i, &m) in modulus[..e].iter().enumerate() {
            prod[k - e + i] = (prod[k - e + i] + (p - c) * m % p) % p;
        }
    }
    prod.truncate(e);
    prod
}

/// Multiplicative order of `x` modulo `modulus`, or 0 if `x` is not a unit of
/// order below `p^e`. Order `p^e - 1` certifies an irreducible, primitive modulus.
fn x_order(modulus: &[u32], p: u32) -> u64 {
    let e = modulus.len() - 1;
    let q = (p as u64).pow(e as u32);
    assert!(e >= 2);
    let mut x = vec![0u32; e];
    x[1] = 1;
    let mut cur = x.clone();
    let mut one = vec![0u32; e];
    one[0] = 1;
    for k in 1..q {
        if cur == one {
            return k;
        }
        cur = poly_mulmod(&cur, &x, modulus, p);
    }
    0
}

impl Field {
    pub fn new(q: u32) -> Result<Self, FieldError> {
        let (p, e) = prime_power(q).ok_or(FieldError::NotPrimePower(q))?;
        if q > MAX_ORDER {
            return Err(FieldError::TooLarge(q));
        }
        if e == 1 {
            return Ok(Field::build(q, p, 1, Vec::new()));
        }
        if let Some((_, m)) = CONWAY.iter().find(|(order, _)| *order == q) {
            if x_order(m, p) != (q - 1) as u64 {
                return Err(FieldError::Reducible(m.to_vec()));
            }
            let f = Field::build(q, p, e, m.to_vec());
            assert!(f.is_field());
            return Ok(f);
        }
        // Deterministic search: first primitive monic modulus by encoded value.
        for low in 1..q {
            let mut m = digits(low, p, e);
            m.push(1);
            if m[0] != 0 && x_order(&m, p) == (q - 1) as u64 {
                let f = Field::build(q, p, e, m);
                assert!(f.is_field());
                return Ok(f);
            }
        }
        unreachable!("a primitive polynomial always exists")
    }

    /// Tables from the modulus; `inv` is left as 0 where no inverse exists.
    fn build(q: u32, p: u32, e: u32, modulus: Vec<u32>) -> Self {
        let qs = q as usize;
        let mut add = vec![0; qs * qs];
        let mut mul = vec![0; qs * qs];
        let mut neg = vec![0; qs];
        let mut inv = vec![0; qs];
        let dig: Vec<Vec<u32>> = (0..q).map(|x| digits(x, p, e)).collect();
        for a in 0..qs {
            for b in 0..qs {
                let s: Vec<u32> = dig[a].iter().zip(&dig[b]).map(|(x, y)| (x + y) % p).collect();
                add[a * qs + b] = undigits(&s, p);
                mul[a * qs + b] = if e == 1 {
                    (a as u32 * b as u32) % p
                } else {
                    undigits(&poly_mulmod(&dig[a], &dig[b], &modulus, p), p)
                };
            }
            let n: Vec<u32> = dig[a].iter().map(|x| (p - x) % p).collect();
            neg[a] = undigits(&n, p);
        }
        for a in 1..qs {
            if let Some(b) = (1..qs).find(|&b| mul[a * qs + b] == 1) {
                inv[a] = b as u32;
            }
        }
        Field { q, p, e, modulus, add, mul, neg, inv }
    }

    fn is_field(&self) -> bool {
        (1..self.q as usize).all(|a| self.inv[a] != 0)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn characteristic(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.e
    }

    /// Ascending coefficients of the modulus; empty for prime fields.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// The class of `x`, a generator of the multiplicative group for
    /// extension fields; for prime fields the smallest primitive root.
    pub fn primitive(&self) -> u32 {
        if self.e > 1 {
            return self.p;
        }
        (1..self.q).find(|&a| self.element_order(a) == (self.q - 1) as u64).unwrap()
    }
}

impl Arith for Field {
    fn order(&self) -> u32 {
        self.q
    }

    #[inline]
    fn add(&self, a: u32, b: u32) -> u32 {
        self.add[(a * self.q + b) as usize]
    }

    #[inline]
    fn neg(&self, a: u32) -> u32 {
        self.neg[a as usize]
    }

    #[inline]
    fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[(a * self.q + b) as usize]
    }

    fn inv(&self, a: u32) -> Result<u32, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        if a >= self.q {
            return Err(FieldError::OutOfRange(a));
        }
        Ok(self.inv[a as usize])
    }
}

/// `F_{q²} = F_q[ω]/(ω² + c1·ω + c0)`; element `a + b·ω` is encoded `a + b·q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuadraticExtension {
    base: Field,
    c0: u32,
    c1: u32,
    mul: Vec<u32>,
    inv: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub q: u32,
    pub characteristic: u32,
    pub degree: u32,
    pub modulus: Vec<u32>,
    /// `[c0, c1, 1]`, the minimal polynomial of `γ` over `F_q`.
    pub extension_modulus: Vec<u32>,
    pub gamma_order: u64,
}

/// Order of `ω` in `F_q[ω]/(ω² + c1·ω + c0)`, or 0 if it is not below `q²`.
fn omega_order(base: &Field, c0: u32, c1: u32) -> u64 {
    let q = base.q() as u64;
    // ω·(a + bω) = -b·c0 + (a - b·c1)ω
    let (mut a, mut b) = (0u32, 1u32);
    for k in 1..q * q {
        if (a, b) == (1, 0) {
            return k;
        }
        let na = base.neg(base.mul(b, c0));
        let nb = base.sub(a, base.mul(b, c1));
        a = na;
        b = nb;
    }
    0
}

impl QuadraticExtension {
    /// Uses the first monic quadratic, ordered by `c0 + q·c1`, whose root has
    /// order `q² - 1`.
    pub fn new(base: Field) -> Self {
        let q = base.q();
        let target = q as u64 * q as u64 - 1;
        for c1 in 0..q {
            for c0 in 1..q {
                if omega_order(&base, c0, c1) == target {
                    return QuadraticExtension::build(base, c0, c1);
                }
            }
        }
        unreachable!("a primitive quadratic always exists")
    }

    fn build(base: Field, c0: u32, c1: u32) -> Self {
        let q = base.q();
        let qq = (q * q) as usize;
        let mut mul = vec![0; qq * qq];
        for x in 0..qq as u32 {
            for y in 0..qq as u32 {
                let (a, b) = (x % q, x / q);
                let (c, d) = (y % q, y / q);
                let bd = base.mul(b, d);
                let re = base.sub(base.mul(a, c), base.mul(bd, c0));
                let im = base.sub(base.add(base.mul(a, d), base.mul(b, c)), base.mul(bd, c1));
                mul[(x as usize) * qq + y as usize] = re + im * q;
            }
        }
        let mut ext = QuadraticExtension { base, c0, c1, mul, inv: vec![0; qq] };
        for x in 1..qq as u32 {
            ext.inv[x as usize] = ext.pow(x, qq as u64 - 2);
        }
        ext
    }

    pub fn base(&self) -> &Field {
        &self.base
    }

    /// The root `ω`, a primitive element.
    pub fn gamma(&self) -> u32 {
        self.base.q()
    }

    /// `(a, b)` with `x = a + b·ω`.
    pub fn split(&self, x: u32) -> (u32, u32) {
        (x % self.base.q(), x / self.base.q())
    }

    pub fn embed(&self, a: u32) -> u32 {
        a
    }

    pub fn spec(&self) -> FieldSpec {
        FieldSpec {
            q: self.base.q(),
            characteristic: self.base.characteristic(),
            degree: self.base.degree(),
            modulus: self.base.modulus().to_vec(),
            extension_modulus: vec![self.c0, self.c1, 1],
            gamma_order: self.element_order(self.gamma()),
        }
    }
}

impl Arith for QuadraticExtension {
    fn order(&self) -> u32 {
        self.base.q() * self.base.q()
    }

    fn add(&self, x: u32, y: u32) -> u32 {
        let q = self.base.q();
        self.base.add(x % q, y % q) + self.base.add(x / q, y / q) * q
    }

    fn neg(&self, x: u32) -> u32 {
        let q = self.base.q();
        self.base.neg(x % q) + self.base.neg(x / q) * q
    }

    fn mul(&self, x: u32, y: u32) -> u32 {
        self.mul[(x * self.order() + y) as usize]
    }

    fn inv(&self, x: u32) -> Result<u32, FieldError> {
        if x == 0 {
            return Err(FieldError::ZeroInverse);
        }
        if x >= self.order() {
            return Err(FieldError::OutOfRange(x));
        }
        Ok(self.inv[x as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn divisors(n: u64) -> Vec<u64> {
        (1..n).filter(|d| n.is_multiple_of(*d)).collect()
    }

    #[test]
    fn prime_field_facts() {
        let f = Field::new(3).unwrap();
        assert_eq!(f.add(2, 2), 1);
        assert_eq!(f.mul(2, 2), 1);
        assert_eq!(f.inv(0), Err(FieldError::ZeroInverse));
        assert!(Field::new(6).is_err());
        assert!(Field::new(1).is_err());
    }

    #[test]
    fn f4_modulus() {
        let f = Field::new(4).unwrap();
        assert_eq!(f.modulus(), &[1, 1, 1]);
        // x = 2, x + 1 = 3
        assert_eq!(f.mul(2, 2), 3);
    }

    #[test]
    fn every_table_modulus_is_primitive() {
        for &(q, m) in CONWAY {
            let f = Field::new(q).unwrap();
            assert_eq!(f.modulus(), m);
        }
    }

    #[test]
    fn search_fallback_for_untabled_order() {
        let f = Field::new(625).unwrap();
        assert_eq!(f.element_order(f.primitive()), 624);
    }

    #[test]
    fn gamma_generates_f9() {
        let ext = QuadraticExtension::new(Field::new(3).unwrap());
        let g = ext.gamma();
        assert_eq!(ext.pow(g, 8), 1);
        for m in divisors(8) {
            assert_ne!(ext.pow(g, m), 1, "order divides {m}");
        }
        assert_eq!(ext.spec().gamma_order, 8);
    }

    #[test]
    fn extensions_of_small_fields_are_primitive() {
        for q in [2, 3, 4, 5, 7, 8, 9, 11] {
            let ext = QuadraticExtension::new(Field::new(q).unwrap());
            let order = (q * q - 1) as u64;
            assert_eq!(ext.element_order(ext.gamma()), order);
        }
    }

    proptest! {
        #[test]
        fn field_axioms(qi in 0usize..8, a in 0u32..1000, b in 0u32..1000, c in 0u32..1000) {
            let q = [2u32, 3, 4, 5, 8, 9, 16, 25][qi];
            let f = Field::new(q).unwrap();
            let (a, b, c) = (a % q, b % q, c % q);
            prop_assert_eq!(f.add(a, b), f.add(b, a));
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                prop_assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }

        #[test]
        fn extension_axioms(qi in 0usize..4, a in 0u32..10000, b in 0u32..10000, c in 0u32..10000) {
            let q = [2u32, 3, 4, 5][qi];
            let e = QuadraticExtension::new(Field::new(q).unwrap());
            let o = e.order();
            let (a, b, c) = (a % o, b % o, c % o);
            prop_assert_eq!(e.mul(a, e.add(b, c)), e.add(e.mul(a, b), e.mul(a, c)));
            prop_assert_eq!(e.mul(e.mul(a, b), c), e.mul(a, e.mul(b, c)));
            if a != 0 {
                prop_assert_eq!(e.mul(a, e.inv(a).unwrap()), 1);
            }
        }
    }
}
