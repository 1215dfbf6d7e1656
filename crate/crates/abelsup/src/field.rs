//! Exact arithmetic in small finite fields with full discrete-log tables.
//!
//! A [`FieldSpec`] models `F_q`, `q = p^m`, as `F_p[x]/(f)` for a
//! deterministically chosen monic modulus `f` of degree `m` whose residue
//! class `x` generates the multiplicative group.  Elements are stored packed:
//! the coefficient vector `(c_0, ..., c_{m-1})` (constant term first) is
//! encoded as the integer `c_0 + c_1 p + ... + c_{m-1} p^{m-1}`, so the
//! canonical reduced form is the representation.  Multiplication, inversion
//! and powering go through the exp/log tables; addition is digit arithmetic.

use crate::{Error, Result};

/// Default upper bound on q for table construction.
pub const DEFAULT_TABLE_BOUND: u64 = 1 << 16;

/// One element of `F_q`, packed base-p.  Only meaningful together with the
/// `FieldSpec` that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(pub u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);
}

/// A finite field `F_q` with a designated primitive element and dlog table.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    pub p: u64,
    pub m: u32,
    pub q: u64,
    /// Coefficients `c_0..c_{m-1}` of the monic modulus `x^m + sum c_i x^i`
    /// over `F_p`; empty when `m = 1`.
    pub modulus_coeffs: Vec<u32>,
    /// The designated generator of `F_q^x`: the class of `x` for `m >= 2`,
    /// the least primitive residue for `m = 1` (and `1` for `q = 2`).
    pub omega: FieldElement,
    exp: Vec<u32>,
    log: Vec<u32>,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Multiply the packed polynomial `a` by `x` and reduce by the modulus.
fn shift_reduce(a: u32, p: u64, modulus: &[u32], q: u64) -> u32 {
    // a * x: shift digits up; the overflowing leading digit multiplies
    // x^m = -sum c_i x^i.
    let top = a as u64 / (q / p);
    let low = (a as u64 % (q / p)) * p;
    if top == 0 {
        return low as u32;
    }
    // subtract top * modulus digitwise
    let mut out = 0u64;
    let mut pow = 1u64;
    let mut rem = low;
    for &c in modulus.iter() {
        let digit = rem % p;
        rem /= p;
        let sub = (top * c as u64) % p;
        out += ((digit + p - sub) % p) * pow;
        pow *= p;
    }
    out as u32
}

/// Walk the powers of `x` (packed value `start`) in `F_p[x]/(f)`.  Returns the
/// exp/log tables iff `x` is a unit of multiplicative order exactly `q - 1`;
/// that forces the quotient ring to be a field and `x` to be primitive.
fn try_generator(
    start: u32,
    p: u64,
    m: u32,
    modulus: &[u32],
    q: u64,
) -> Option<(Vec<u32>, Vec<u32>)> {
    let order = (q - 1) as usize;
    let mut exp = Vec::with_capacity(order);
    let mut log = vec![u32::MAX; q as usize];
    let mut cur = 1u32;
    for i in 0..order {
        if cur == 0 || log[cur as usize] != u32::MAX {
            return None; // hit zero or cycled early
        }
        log[cur as usize] = i as u32;
        exp.push(cur);
        cur = if m == 1 {
            ((cur as u64 * start as u64) % p) as u32
        } else {
            shift_reduce(cur, p, modulus, q)
        };
    }
    if cur != 1 {
        return None;
    }
    Some((exp, log))
}

/// Build `F_q` for `q = p^m` with the deterministic modulus / generator
/// choice: the least packed modulus whose canonical root is primitive
/// (for `m = 1`, the least primitive residue).
pub fn make_field(p: u64, m: u32) -> Result<FieldSpec> {
    make_field_bounded(p, m, DEFAULT_TABLE_BOUND)
}

/// Same as [`make_field`] with an explicit table bound.
pub fn make_field_bounded(p: u64, m: u32, bound: u64) -> Result<FieldSpec> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    assert!(m >= 1, "extension degree must be positive");
    let q = p.checked_pow(m).filter(|&q| q <= bound).ok_or_else(|| {
        Error::FieldTooLarge(p.saturating_pow(m), bound)
    })?;

    if m == 1 {
        if q == 2 {
            return Ok(FieldSpec {
                p,
                m,
                q,
                modulus_coeffs: vec![],
                omega: FieldElement(1),
                exp: vec![1],
                log: vec![u32::MAX, 0],
            });
        }
        for g in 2..p {
            if let Some((exp, log)) = try_generator(g as u32, p, 1, &[], q) {
                return Ok(FieldSpec {
                    p,
                    m,
                    q,
                    modulus_coeffs: vec![],
                    omega: FieldElement(g as u32),
                    exp,
                    log,
                });
            }
        }
        unreachable!("F_p always has a primitive root");
    }

    for k in 0..q {
        let mut coeffs = Vec::with_capacity(m as usize);
        let mut t = k;
        for _ in 0..m {
            coeffs.push((t % p) as u32);
            t /= p;
        }
        if let Some((exp, log)) = try_generator(p as u32, p, m, &coeffs, q) {
            return Ok(FieldSpec {
                p,
                m,
                q,
                modulus_coeffs: coeffs,
                omega: FieldElement(p as u32),
                exp,
                log,
            });
        }
    }
    unreachable!("primitive polynomials exist in every degree");
}

impl FieldSpec {
    pub fn zero(&self) -> FieldElement {
        FieldElement::ZERO
    }

    pub fn one(&self) -> FieldElement {
        FieldElement::ONE
    }

    /// Coefficient vector `(c_0, ..., c_{m-1})` of an element.
    pub fn coefficients(&self, x: FieldElement) -> Vec<u32> {
        let mut v = Vec::with_capacity(self.m as usize);
        let mut t = x.0 as u64;
        for _ in 0..self.m {
            v.push((t % self.p) as u32);
            t /= self.p;
        }
        v
    }

    /// The element with the given residue in the prime field.
    pub fn from_int(&self, n: i64) -> FieldElement {
        FieldElement(n.rem_euclid(self.p as i64) as u32)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        let (mut x, mut y) = (a.0 as u64, b.0 as u64);
        let mut out = 0u64;
        let mut pow = 1u64;
        for _ in 0..self.m {
            out += ((x % self.p + y % self.p) % self.p) * pow;
            x /= self.p;
            y /= self.p;
            pow *= self.p;
        }
        FieldElement(out as u32)
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        let mut x = a.0 as u64;
        let mut out = 0u64;
        let mut pow = 1u64;
        for _ in 0..self.m {
            out += ((self.p - x % self.p) % self.p) * pow;
            x /= self.p;
            pow *= self.p;
        }
        FieldElement(out as u32)
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        let la = self.log[a.0 as usize] as u64;
        let lb = self.log[b.0 as usize] as u64;
        FieldElement(self.exp[((la + lb) % (self.q - 1)) as usize])
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement> {
        if a.0 == 0 {
            return Err(Error::Singular);
        }
        let la = self.log[a.0 as usize] as u64;
        Ok(FieldElement(
            self.exp[((self.q - 1 - la) % (self.q - 1)) as usize],
        ))
    }

    /// `omega^e` for any integer exponent.
    pub fn omega_pow(&self, e: i64) -> FieldElement {
        let ord = (self.q - 1) as i64;
        FieldElement(self.exp[e.rem_euclid(ord) as usize])
    }

    /// `x^e` for any integer exponent (`x != 0` when `e <= 0`).
    pub fn pow(&self, x: FieldElement, e: i64) -> FieldElement {
        if x.0 == 0 {
            assert!(e > 0, "0 to a non-positive power");
            return FieldElement::ZERO;
        }
        let ord = (self.q - 1) as i64;
        let l = self.log[x.0 as usize] as i64;
        self.omega_pow(l * (e % ord))
    }

    /// Discrete log base omega; errors on zero.
    pub fn dlog(&self, x: FieldElement) -> Result<u64> {
        if x.0 == 0 {
            return Err(Error::DlogOfZero);
        }
        Ok(self.log[x.0 as usize] as u64)
    }

    /// `x^(p^s)`, the s-th Frobenius power.
    pub fn frob(&self, x: FieldElement, s: u32) -> FieldElement {
        if x.0 == 0 {
            return FieldElement::ZERO;
        }
        let ord = self.q - 1;
        let mut mult = 1u64;
        for _ in 0..(s % self.m.max(1)) {
            mult = mult * (self.p % ord) % ord;
        }
        let l = self.log[x.0 as usize] as u64;
        FieldElement(self.exp[(l * mult % ord) as usize])
    }

    /// Multiplicative order of `x` (`x != 0`).
    pub fn order(&self, x: FieldElement) -> Result<u64> {
        let l = self.dlog(x)?;
        let n = self.q - 1;
        Ok(n / gcd(n, l))
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn gcd_i(a: i64, b: i64) -> i64 {
    gcd(a.unsigned_abs(), b.unsigned_abs()) as i64
}

/// Extended gcd: returns `(g, x, y)` with `a x + b y = g`.
pub fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_examples() {
        // F_5: residues 2,3,4 — exhaustive order check picks 2.
        let f5 = make_field(5, 1).unwrap();
        assert_eq!(f5.omega, FieldElement(2));
        // F_2: trivial multiplicative group.
        let f2 = make_field(2, 1).unwrap();
        assert_eq!(f2.omega, FieldElement(1));
        assert_eq!(f2.q, 2);
        // F_9: omega has order exactly 8.
        let f9 = make_field(3, 2).unwrap();
        let w = f9.omega;
        assert_eq!(f9.pow(w, 8), f9.one());
        assert_ne!(f9.pow(w, 4), f9.one());
    }

    #[test]
    fn dlog_examples() {
        let f5 = make_field(5, 1).unwrap();
        assert_eq!(f5.dlog(f5.one()).unwrap(), 0);
        assert_eq!(f5.dlog(FieldElement(4)).unwrap(), 2); // 2^2 = 4
        assert_eq!(f5.dlog(FieldElement(3)).unwrap(), 3); // 2^3 = 8 = 3
        assert!(f5.dlog(f5.zero()).is_err());
    }

    #[test]
    fn frob_examples() {
        let f5 = make_field(5, 1).unwrap();
        for v in 0..5 {
            let x = FieldElement(v);
            assert_eq!(f5.frob(x, 0), x);
            assert_eq!(f5.frob(x, 1), x); // Frobenius fixes the prime field
        }
        let f9 = make_field(3, 2).unwrap();
        let w = f9.omega;
        assert_eq!(f9.frob(w, 1), f9.pow(w, 3)); // x -> x^3
    }

    #[test]
    fn dlog_table_is_total() {
        for (p, m) in [(2u64, 4u32), (3, 2), (5, 2), (7, 2), (101, 1), (3, 4)] {
            let f = make_field(p, m).unwrap();
            for v in 1..f.q {
                let x = FieldElement(v as u32);
                let l = f.dlog(x).unwrap();
                assert_eq!(f.omega_pow(l as i64), x);
            }
        }
    }

    #[test]
    fn frobenius_is_an_automorphism() {
        let f = make_field(5, 3).unwrap();
        for a in (0..f.q).step_by(7) {
            for b in (0..f.q).step_by(11) {
                let (x, y) = (FieldElement(a as u32), FieldElement(b as u32));
                assert_eq!(f.frob(f.add(x, y), 1), f.add(f.frob(x, 1), f.frob(y, 1)));
                assert_eq!(f.frob(f.mul(x, y), 1), f.mul(f.frob(x, 1), f.frob(y, 1)));
            }
        }
        // frob(. , m) is the identity
        for a in 0..f.q {
            let x = FieldElement(a as u32);
            assert_eq!(f.frob(x, f.m), x);
        }
    }

    #[test]
    fn quadratic_extension_norm_one_generator() {
        // omega := nu^(q-1) has multiplicative order exactly q+1 in F_{q^2}.
        for q in [3u64, 5, 7, 9] {
            let p = if q == 9 { 3 } else { q };
            let m = if q == 9 { 2 } else { 1 };
            let f = make_field(p, 2 * m).unwrap();
            let omega = f.omega_pow((q - 1) as i64);
            for k in 1..=q + 1 {
                let is_one = f.pow(omega, k as i64) == f.one();
                assert_eq!(is_one, k == q + 1, "q={q} k={k}");
            }
        }
    }

    #[test]
    fn modulus_is_deterministic() {
        let a = make_field(3, 2).unwrap();
        let b = make_field(3, 2).unwrap();
        assert_eq!(a.modulus_coeffs, b.modulus_coeffs);
        // x^2 + x + 2 is the first packed candidate with primitive root x.
        assert_eq!(a.modulus_coeffs, vec![2, 1]);
    }

    #[test]
    fn bound_is_enforced() {
        assert!(matches!(
            make_field_bounded(2, 17, 1 << 16),
            Err(Error::FieldTooLarge(..))
        ));
        assert!(matches!(make_field(6, 1), Err(Error::NotPrime(6))));
    }
}
