//! Supplements for unitary socles: arithmetic in `GU_n(q)` inside `F_(q^2)`,
//! with `omega = nu^(q-1)` of order `q + 1` playing the role the generator of
//! `F_q^x` plays in the linear case.

use crate::field::{ext_gcd, make_field_bounded, FieldElement, FieldSpec};
use crate::linear::{build_a, build_x, cyclic_lift_word, delta_exponent, find_y, Supplement};
use crate::outgroup::{AbelianT, OutModel, RhoContext};
use crate::semimat::{block_diag, CenterSpec, GraphKind, Mat, SemilinearWord};
use crate::{Error, Result};
use std::sync::Arc;

/// `F_(q^2)` together with the norm-one generator `omega = nu^(q-1)`.
#[derive(Debug, Clone)]
pub struct UnitaryContext {
    pub field: Arc<FieldSpec>,
    pub q: u64,
    pub nu: FieldElement,
    pub omega: FieldElement,
}

pub fn unitary_context(q: u64, bound: u64) -> Result<UnitaryContext> {
    let (p, m) = crate::outgroup::split_prime_power(q)
        .ok_or_else(|| Error::UnsupportedFamily(format!("q = {q}")))?;
    let field = Arc::new(make_field_bounded(p, 2 * m, bound)?);
    let nu = field.omega;
    let omega = field.omega_pow(q as i64 - 1);
    Ok(UnitaryContext {
        field,
        q,
        nu,
        omega,
    })
}

impl UnitaryContext {
    /// dlog base `omega` inside the order-(q+1) subgroup.
    pub fn omega_dlog(&self, x: FieldElement) -> Result<u64> {
        let e = self.field.dlog(x)?;
        if e % (self.q - 1) != 0 {
            return Err(Error::ShapeNotRecognized);
        }
        Ok((e / (self.q - 1)) % (self.q + 1))
    }

    pub fn rho_ctx(&self) -> RhoContext<'_> {
        RhoContext::Unitary {
            field: &self.field,
            q: self.q,
        }
    }
}

/// `X` unitary for the identity Gram form: `(X^[q])^T X = I`.
pub fn is_unitary(ctx: &UnitaryContext, x: &Mat) -> bool {
    let m = ctx.field.m / 2; // q = p^m
    x.frob(m).transpose().mul(x).is_identity()
}

/// Verify the unitary block identity `A_{w,l}^(phi^s X_{w,c}) = omega^c A_{w,l}`
/// under the congruence `c w = l (p^s - 1) (mod q+1)`; returns `omega^c`.
pub fn ublock_scalar(ctx: &UnitaryContext, w: usize, l: i64, c: i64, s: u32) -> Result<FieldElement> {
    let p = ctx.field.p as i64;
    let rhs = l * (p.pow(s) - 1);
    let md = ctx.q as i64 + 1;
    if (c * w as i64 - rhs).rem_euclid(md) != 0 {
        return Err(Error::CongruenceUnsolvable(w as i64, rhs.rem_euclid(md), md));
    }
    let a = build_a(&ctx.field, ctx.omega, w, l);
    let x = build_x(&ctx.field, ctx.omega, w, c);
    let word = SemilinearWord::new(s, 0, GraphKind::None, x);
    let lhs = word.apply(&a)?;
    let scalar = ctx.field.pow(ctx.omega, c);
    if lhs != a.scale(scalar) {
        return Err(Error::Internal("unitary block identity failed".into()));
    }
    Ok(scalar)
}

/// Supplement for a maximal abelian `T` of `Out(PSU_n(q))`, `n >= 3`.
pub fn psu_supplement(om: &OutModel, ctx: &UnitaryContext, t: &AbelianT) -> Result<Supplement> {
    if !om.is_abelian(&t.elements) {
        return Err(Error::NotAbelian);
    }
    let n = om.n;
    let d = om.d as i64;
    let p = om.p as i64;
    let omega = ctx.omega;
    let rho_ctx = ctx.rho_ctx();
    let center = CenterSpec::ScalarsOfOrderDividing(ctx.q + 1);

    // T = <delta^k, phi^s delta^j>, t := d/k divides p^s - 1
    let k = delta_exponent(om, t);
    if k == d {
        // trivial diagonal part: T is cyclic, lift a generator
        let x = t
            .elements
            .iter()
            .copied()
            .find(|&x| om.closure(&[x]) == t.elements)
            .ok_or(Error::NotInModel)?;
        let word = cyclic_lift_word(om, &ctx.field, omega, GraphKind::None, &rho_ctx, n, x)?;
        return Ok(Supplement {
            words: vec![word],
            target: t.clone(),
            center,
            route: "cyclic-lift".into(),
        });
    }
    let s = phi_generator_exponent(om, t)?;
    let g = t
        .elements
        .iter()
        .copied()
        .find(|e| e.phi == s as u16 && e.tau == 0)
        .ok_or(Error::NotInModel)?;
    let tt = d / k;
    let x_int = p.pow(s as u32) - 1;
    if x_int % tt != 0 {
        return Err(Error::NotAbelian);
    }

    if tt == n as i64 {
        let c = x_int / n as i64;
        let a = build_a(&ctx.field, omega, n, 1);
        let x = build_x(&ctx.field, omega, n, c);
        return Ok(Supplement {
            words: vec![
                SemilinearWord::linear(a),
                SemilinearWord::new(s, 0, GraphKind::None, x),
            ],
            target: t.clone(),
            center,
            route: "construction:psu-t-eq-n".into(),
        });
    }

    let y = find_y(n as i64, d, ctx.q as i64 + 1, tt)?;
    let r = x_int / tt;
    let w1 = tt as usize;
    let w2 = n - w1;
    if w1 < 2 || w2 < 2 {
        return Err(Error::BlockTooSmall(w1.min(w2)));
    }
    let a = block_diag(&[
        build_a(&ctx.field, omega, w1, y),
        build_a(&ctx.field, omega, w2, k - y),
    ])?;
    let x = block_diag(&[
        build_x(&ctx.field, omega, w1, y * r),
        build_x(&ctx.field, omega, w2, y * r),
    ])?;
    let (g1, ca, cb) = ext_gcd(y, tt);
    debug_assert_eq!(g1, 1);
    let c0 = build_a(&ctx.field, omega, w1, y)
        .pow(ca)?
        .scale(ctx.field.pow(omega, cb));
    let c = block_diag(&[c0, Mat::identity(ctx.field.clone(), w2)])?;
    for e in 0..om.d.max(1) as i64 {
        let word = SemilinearWord::new(s, 0, GraphKind::None, x.mul(&c.pow(e)?));
        if crate::outgroup::rho_image(om, &word, &rho_ctx)? == g {
            return Ok(Supplement {
                words: vec![SemilinearWord::linear(a), word],
                target: t.clone(),
                center,
                route: "construction:psu-steps".into(),
            });
        }
    }
    Err(Error::Internal("psu correction power not found".into()))
}

/// Least positive `s` generating the image of `T` in `<phi>`.
fn phi_generator_exponent(om: &OutModel, t: &AbelianT) -> Result<u32> {
    let mut exps: Vec<u32> = t
        .elements
        .iter()
        .filter(|e| e.phi > 0)
        .map(|e| e.phi as u32)
        .collect();
    exps.sort_unstable();
    exps.dedup();
    if exps.is_empty() {
        return Ok(0); // pure diagonal subgroup
    }
    let wanted = exps.len() + 1; // subgroup of a cyclic group
    for &s in &exps {
        let ord = om.phi_order() / crate::field::gcd(om.phi_order() as u64, s as u64) as u32;
        if ord as usize == wanted {
            return Ok(s);
        }
    }
    Err(Error::NotInModel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DEFAULT_TABLE_BOUND;
    use crate::outgroup::{out_model, Family};
    use crate::semimat::word_commutator_central;

    fn ctx(q: u64) -> UnitaryContext {
        unitary_context(q, DEFAULT_TABLE_BOUND).unwrap()
    }

    #[test]
    fn unitarity_examples() {
        let c = ctx(3);
        assert!(is_unitary(&c, &Mat::identity(c.field.clone(), 2)));
        // X_{2,1} over F_9: diagonal entries have order dividing q + 1
        let x = build_x(&c.field, c.omega, 2, 1);
        assert!(is_unitary(&c, &x));
        // diag(nu, 1) has nu of order q^2 - 1, not unitary
        let bad = Mat::diag(c.field.clone(), &[c.nu, FieldElement::ONE]);
        assert!(!is_unitary(&c, &bad));
        // A_{w,l} and scalar omega are unitary too
        assert!(is_unitary(&c, &build_a(&c.field, c.omega, 3, 2)));
        assert!(is_unitary(&c, &Mat::scalar(c.field.clone(), 3, c.omega)));
    }

    #[test]
    fn ublock_examples() {
        let c3 = ctx(3);
        assert_eq!(ublock_scalar(&c3, 2, 0, 0, 0).unwrap(), c3.field.one());
        // q=3, w=2, l=1, s=1: 2c = 2 mod 4 -> c = 1, scalar omega
        assert_eq!(ublock_scalar(&c3, 2, 1, 1, 1).unwrap(), c3.omega);
        // q=5, w=3, l=1, s=1: 3c = 4 mod 6 unsolvable
        let c5 = ctx(5);
        assert!(matches!(
            ublock_scalar(&c5, 3, 1, 1, 1),
            Err(Error::CongruenceUnsolvable(..))
        ));
    }

    #[test]
    fn psu_t_eq_n_branch() {
        // n = 5, q = 64: d = (5, 65) = 5 = n and 5 | 2^4 - 1, so
        // T = <delta, phi^4> hits the t = n branch with X_{5, 3}.
        let om = out_model(Family::Psu, 5, 64).unwrap();
        let c = ctx(64);
        let t = om.subgroup(&[om.delta_pow(1), om.phi_pow(4)]);
        assert!(om.is_abelian(&t.elements));
        let s = psu_supplement(&om, &c, &t).unwrap();
        assert_eq!(s.route, "construction:psu-t-eq-n");
        assert_eq!(s.words[1].x, build_x(&c.field, c.omega, 5, 3));
        let sc = word_commutator_central(&s.words[0], &s.words[1], s.center).unwrap();
        assert_eq!(sc, Some(c.field.pow(c.omega, 3)));
        for w in &s.words {
            assert!(is_unitary(&c, &w.x));
        }
    }

    #[test]
    fn psu_block_shape() {
        // n = 4, q = 3, T = <delta^2, phi>: t = 2, block A_{2,y} + A_{2,k-y}
        let om = out_model(Family::Psu, 4, 3).unwrap();
        let c = ctx(3);
        let t = om.subgroup(&[om.delta_pow(2), om.phi_pow(1)]);
        assert!(om.is_abelian(&t.elements));
        let s = psu_supplement(&om, &c, &t).unwrap();
        assert_eq!(s.route, "construction:psu-steps");
        let sc = word_commutator_central(&s.words[0], &s.words[1], s.center).unwrap();
        assert!(sc.is_some(), "commutator must be central");
        for w in &s.words {
            assert!(is_unitary(&c, &w.x), "all matrix parts unitary");
        }
    }

    #[test]
    fn cyclic_lift_is_unitary() {
        let om = out_model(Family::Psu, 3, 3).unwrap();
        let c = ctx(3);
        let t = om.subgroup(&[om.phi_pow(1)]);
        let s = psu_supplement(&om, &c, &t).unwrap();
        assert_eq!(s.route, "cyclic-lift");
        assert!(is_unitary(&c, &s.words[0].x));
    }
}
