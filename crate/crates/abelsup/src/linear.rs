//! Supplements for linear socles: the PSL2 pair, the companion/diagonal
//! matrix families `A_{w,l}` and `X_{w,c}`, and the dispatcher that realizes
//! a supplement for every maximal abelian subgroup of `Out(PSL_n(q))`.

use crate::field::{ext_gcd, gcd_i, FieldElement, FieldSpec};
use crate::outgroup::{AbelianT, OutElement, OutModel, RhoContext};
use crate::semimat::{block_diag, CenterSpec, GraphKind, Mat, SemilinearWord};
use crate::{Error, Result};
use std::sync::Arc;

/// A constructed supplement candidate: the words, the target subgroup, the
/// center to quotient by, and the construction route that produced it.
#[derive(Debug, Clone)]
pub struct Supplement {
    pub words: Vec<SemilinearWord>,
    pub target: AbelianT,
    pub center: CenterSpec,
    pub route: String,
}

/// `A_{w,l}`: the cyclic-shift matrix with top-right entry `(-1)^(w-1) base^l`.
pub fn build_a(field: &Arc<FieldSpec>, base: FieldElement, w: usize, l: i64) -> Mat {
    assert!(w >= 2, "A_{{w,l}} needs w >= 2");
    let mut m = Mat::zero(field.clone(), w);
    let mut top = field.pow(base, l);
    if (w - 1) % 2 == 1 {
        top = field.neg(top);
    }
    m[(0, w - 1)] = top;
    for i in 1..w {
        m[(i, i - 1)] = FieldElement::ONE;
    }
    m
}

/// `X_{w,c} = diag(base^(c(w-1)), ..., base^c, 1)`.
pub fn build_x(field: &Arc<FieldSpec>, base: FieldElement, w: usize, c: i64) -> Mat {
    assert!(w >= 2, "X_{{w,c}} needs w >= 2");
    let entries: Vec<FieldElement> = (0..w)
        .map(|i| field.pow(base, c * (w - 1 - i) as i64))
        .collect();
    Mat::diag(field.clone(), &entries)
}

/// Least `y` in `1..=modulus` with `y n = d (mod modulus)` and `(y, t) = 1`.
pub fn find_y(n: i64, d: i64, modulus: i64, t: i64) -> Result<i64> {
    for y in 1..=modulus.max(1) {
        if (y * n - d).rem_euclid(modulus.max(1)) == 0 && gcd_i(y, t) == 1 {
            return Ok(y);
        }
    }
    Err(Error::Internal(format!(
        "no y with y*{n} = {d} mod {modulus} coprime to {t}"
    )))
}

/// Minimal positive `k` with `delta^k` in `T` (`d` when the intersection with
/// the diagonal part is trivial).
pub fn delta_exponent(om: &OutModel, t: &AbelianT) -> i64 {
    let d = om.d as i64;
    t.elements
        .iter()
        .filter(|e| e.phi == 0 && e.tau == 0 && e.rho == 0 && e.delta[0] > 0)
        .map(|e| e.delta[0] as i64)
        .min()
        .unwrap_or(d)
}

/// Image of `T` modulo the diagonal part, as (phi, tau) pairs.
fn pi_image(om: &OutModel, t: &AbelianT) -> Vec<(u16, u8)> {
    let mut pairs: Vec<(u16, u8)> = t.elements.iter().map(|e| (e.phi, e.tau)).collect();
    pairs.sort();
    pairs.dedup();
    let _ = om;
    pairs
}

fn pi_cyclic_generator(om: &OutModel, pairs: &[(u16, u8)]) -> Option<(u16, u8)> {
    let phi_ord = om.phi_order() as i64;
    for &(a, e) in pairs {
        let mut seen = vec![(0u16, 0u8)];
        let (mut ca, mut ce) = (a as i64, e as i64);
        while (ca, ce) != (0, 0) {
            seen.push((ca as u16, ce as u8));
            ca = (ca + a as i64) % phi_ord;
            ce = (ce + e as i64) % 2;
        }
        seen.sort();
        seen.dedup();
        if seen.len() == pairs.len() {
            return Some((a, e));
        }
    }
    None
}

fn element_with_pi(t: &AbelianT, pi: (u16, u8)) -> Option<OutElement> {
    t.elements
        .iter()
        .copied()
        .find(|e| (e.phi, e.tau) == pi && e.rho == 0)
}

/// Lift a single outer element to a word: diagonal matrix part with the
/// delta exponent solved against the model.
pub fn cyclic_lift_word(
    om: &OutModel,
    field: &Arc<FieldSpec>,
    base: FieldElement,
    graph: GraphKind,
    ctx: &RhoContext,
    n_dim: usize,
    x: OutElement,
) -> Result<SemilinearWord> {
    for u in 0..om.d.max(1) {
        let mut diag = vec![FieldElement::ONE; n_dim];
        diag[0] = field.pow(base, u as i64);
        let word = SemilinearWord::new(x.phi as u32, x.tau, graph, Mat::diag(field.clone(), &diag));
        if crate::outgroup::rho_image(om, &word, ctx)? == x {
            return Ok(word);
        }
    }
    Err(Error::ShapeNotRecognized)
}

/// The PSL2 supplement: for odd `q` the pair `(A, phi B)`; for even `q` the
/// outer group is cyclic and a single lifted word suffices.
pub fn psl2_supplement(om: &OutModel, field: &Arc<FieldSpec>, t: &AbelianT) -> Result<Supplement> {
    assert_eq!(om.n, 2);
    let ctx = RhoContext::Linear { field };
    let whole = om.q % 2 == 1 && t.elements.len() == om.size();
    if !whole {
        // Out is abelian, so any proper T here is cyclic
        return try_cyclic(om, t, |x| {
            cyclic_lift_word(om, field, field.omega, GraphKind::InverseTranspose, &ctx, 2, x)
        })?
        .ok_or(Error::NotInModel);
    }
    let w = field.omega;
    let a = {
        let mut m = Mat::zero(field.clone(), 2);
        m[(0, 1)] = field.neg(w);
        m[(1, 0)] = FieldElement::ONE;
        m
    };
    let b = Mat::diag(
        field.clone(),
        &[field.pow(w, (om.p as i64 - 1) / 2), FieldElement::ONE],
    );
    Ok(Supplement {
        words: vec![
            SemilinearWord::linear(a),
            SemilinearWord::new(1, 0, GraphKind::InverseTranspose, b),
        ],
        target: t.clone(),
        center: CenterSpec::AllScalars,
        route: "construction:psl2".into(),
    })
}

/// If `T` is cyclic, produce the one-generator supplement via `lift`.
fn try_cyclic(
    om: &OutModel,
    t: &AbelianT,
    lift: impl Fn(OutElement) -> Result<SemilinearWord>,
) -> Result<Option<Supplement>> {
    let gen = t
        .elements
        .iter()
        .copied()
        .find(|&x| om.closure(&[x]) == t.elements);
    match gen {
        None => Ok(None),
        Some(x) => Ok(Some(Supplement {
            words: vec![lift(x)?],
            target: t.clone(),
            center: CenterSpec::AllScalars,
            route: "cyclic-lift".into(),
        })),
    }
}

/// Supplement for a maximal abelian `T` of `Out(PSL_n(q))`, following the
/// case split of the main linear theorem.
pub fn psl_supplement(om: &OutModel, field: &Arc<FieldSpec>, t: &AbelianT) -> Result<Supplement> {
    if !om.is_abelian(&t.elements) {
        return Err(Error::NotAbelian);
    }
    if om.n == 2 {
        return psl2_supplement(om, field, t);
    }
    let n = om.n;
    let d = om.d as i64;
    let p = om.p as i64;
    let omega = field.omega;
    let ctx = RhoContext::Linear { field };

    let k = delta_exponent(om, t);
    let pairs = pi_image(om, t);

    if k == d {
        // trivial diagonal part; with cyclic pi(T) the subgroup itself is
        // cyclic and a single lifted word suffices
        if let Some(s) = try_cyclic(om, t, |x| {
            cyclic_lift_word(om, field, omega, GraphKind::InverseTranspose, &ctx, n, x)
        })? {
            return Ok(s);
        }
    }

    if k < d && pi_cyclic_generator(om, &pairs).is_some() {
        let (s, eps) = pi_cyclic_generator(om, &pairs).unwrap();
        // T = <delta^k, phi^s gamma^eps delta^j> with k | d, k != d
        let g = element_with_pi(t, (s, eps)).ok_or(Error::NotInModel)?;
        let (s, eps) = (s as i64, eps as i64);
        let tt = d / k;
        let x_int = if eps % 2 == 0 { 1 } else { -1 } * p.pow(s as u32) - 1;
        if x_int % tt != 0 {
            return Err(Error::NotAbelian);
        }
        if tt == n as i64 {
            // t = d = n, k = 1: <A_{n,1}, phi^s gamma^eps X_{n, x/n}>
            let c = x_int / n as i64;
            let a = build_a(field, omega, n, 1);
            let x = build_x(field, omega, n, c);
            return Ok(Supplement {
                words: vec![
                    SemilinearWord::linear(a),
                    SemilinearWord::new(s as u32, eps as u8, GraphKind::InverseTranspose, x),
                ],
                target: t.clone(),
                center: CenterSpec::AllScalars,
                route: "construction:psl-t-eq-n".into(),
            });
        }
        // general two-generator case
        let y = find_y(n as i64, d, om.q as i64 - 1, tt)?;
        let r = x_int / tt;
        let w1 = tt as usize;
        let w2 = n - w1;
        let a = block_diag(&[
            build_a(field, omega, w1, y),
            build_a(field, omega, w2, k - y),
        ])?;
        let x = block_diag(&[
            build_x(field, omega, w1, y * r),
            build_x(field, omega, w2, y * r),
        ])?;
        // C: commutes with A, det = omega  (ay + bt = 1)
        let (g1, ca, cb) = ext_gcd(y, tt);
        debug_assert_eq!(g1, 1);
        let c0 = build_a(field, omega, w1, y)
            .pow(ca)?
            .scale(field.pow(omega, cb));
        let c = block_diag(&[c0, Mat::identity(field.clone(), w2)])?;
        debug_assert_eq!(c.det(), omega);
        // pick the C-power that lands the word exactly on g and closes T
        for e in 0..om.d.max(1) as i64 {
            let word = SemilinearWord::new(
                s as u32,
                eps as u8,
                GraphKind::InverseTranspose,
                x.mul(&c.pow(e)?),
            );
            let img = crate::outgroup::rho_image(om, &word, &ctx)?;
            if img == g {
                return Ok(Supplement {
                    words: vec![SemilinearWord::linear(a), word],
                    target: t.clone(),
                    center: CenterSpec::AllScalars,
                    route: "construction:psl-pgammal".into(),
                });
            }
        }
        return Err(Error::Internal("pgammal correction power not found".into()));
    }

    // pi(T) is non-cyclic, hence <phi^s, gamma>
    let s = pairs
        .iter()
        .filter(|&&(a, e)| e == 0 && a > 0)
        .map(|&(a, _)| a)
        .min()
        .ok_or(Error::NotInModel)? as i64;
    let g_gamma = element_with_pi(t, (0, 1)).ok_or(Error::NotInModel)?;
    let kk = g_gamma.delta[0] as i64;

    if d % 2 == 1 {
        // gamma delta^k is conjugate to gamma; the conjugated T is the plain
        // graph-field section <phi^s, gamma>.
        let inv2 = (1..d).find(|e| (2 * e) % d == 1).unwrap_or(0);
        let e = (-kk * inv2).rem_euclid(d);
        let r_back = diag_with_det(field, n, -e);
        let words0 = [
            SemilinearWord::new(s as u32, 0, GraphKind::InverseTranspose, Mat::identity(field.clone(), n)),
            SemilinearWord::new(0, 1, GraphKind::InverseTranspose, Mat::identity(field.clone(), n)),
        ];
        let words = words0
            .iter()
            .map(|w| w.conjugate_by(&r_back))
            .collect::<Result<Vec<_>>>()?;
        return Ok(Supplement {
            words,
            target: t.clone(),
            center: CenterSpec::AllScalars,
            route: "construction:psl-section".into(),
        });
    }

    // d even: three-generator case <delta^(d/2), phi^s delta^j, gamma delta^k>
    if !t.elements.contains(&om.delta_pow(d / 2)) {
        return Err(Error::NotInModel);
    }
    let y = find_y(n as i64, d, om.q as i64 - 1, 2)?;
    debug_assert_eq!(y % 2, 1);
    let r = (p.pow(s as u32) - 1) / 2;
    let w2 = n - 2;
    let a = block_diag(&[
        build_a(field, omega, 2, y),
        build_a(field, omega, w2, d / 2 - y),
    ])?;
    let x_phi = block_diag(&[
        build_x(field, omega, 2, y * r),
        build_x(field, omega, w2, y * r),
    ])?;
    let x_gamma = block_diag(&[
        build_x(field, omega, 2, -y),
        build_x(field, omega, w2, -y),
    ])?;
    let y_phi = build_x(field, omega, 2, y * r).mul(&build_a(field, omega, 2, y).pow(-r)?);
    let y_gamma = build_x(field, omega, 2, -y).mul(&build_a(field, omega, 2, y));
    let x_phi2 = block_diag(&[y_phi, build_x(field, omega, w2, y * r)])?;
    let x_gamma2 = block_diag(&[y_gamma, build_x(field, omega, w2, -y)])?;

    let u1 = field.dlog(x_gamma.det())? as i64 % d;
    let u2 = field.dlog(x_gamma2.det())? as i64 % d;
    let (xp, xg, u) = if (u1 - kk) % 2 == 0 {
        (x_phi, x_gamma, u1)
    } else {
        debug_assert_eq!((u2 - kk).rem_euclid(2), 0);
        (x_phi2, x_gamma2, u2)
    };
    let e = ((kk - u) / 2).rem_euclid(d);
    let r_mat = diag_with_det(field, n, e);
    let words = [
        SemilinearWord::linear(a),
        SemilinearWord::new(s as u32, 0, GraphKind::InverseTranspose, xp),
        SemilinearWord::new(0, 1, GraphKind::InverseTranspose, xg),
    ]
    .iter()
    .map(|w| w.conjugate_by(&r_mat))
    .collect::<Result<Vec<_>>>()?;
    Ok(Supplement {
        words,
        target: t.clone(),
        center: CenterSpec::AllScalars,
        route: "construction:psl-3gen".into(),
    })
}

/// `diag(omega^e, 1, ..., 1)`.
pub fn diag_with_det(field: &Arc<FieldSpec>, n: usize, e: i64) -> Mat {
    let mut entries = vec![FieldElement::ONE; n];
    entries[0] = field.pow(field.omega, e);
    Mat::diag(field.clone(), &entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;
    use crate::outgroup::{out_model, Family};
    use crate::semimat::word_commutator_central;

    #[test]
    fn build_a_examples() {
        let f5 = Arc::new(make_field(5, 1).unwrap());
        let a = build_a(&f5, f5.omega, 2, 1);
        assert_eq!(a, Mat::from_ints(f5.clone(), &[&[0, -2], &[1, 0]]));
        assert_eq!(build_a(&f5, f5.omega, 2, 0).det(), f5.one());
        let f7 = Arc::new(make_field(7, 1).unwrap());
        assert_eq!(build_a(&f7, f7.omega, 3, 2).det(), f7.omega_pow(2));
    }

    #[test]
    fn build_x_examples() {
        let f5 = Arc::new(make_field(5, 1).unwrap());
        let x = build_x(&f5, f5.omega, 2, 2);
        assert_eq!(x, Mat::diag(f5.clone(), &[FieldElement(4), FieldElement(1)]));
        assert!(build_x(&f5, f5.omega, 3, 0).is_identity());
        let f7 = Arc::new(make_field(7, 1).unwrap());
        let x = build_x(&f7, f7.omega, 3, 1);
        assert_eq!(
            x,
            Mat::diag(
                f7.clone(),
                &[f7.omega_pow(2), f7.omega_pow(1), f7.one()]
            )
        );
    }

    #[test]
    fn find_y_examples() {
        assert_eq!(find_y(4, 4, 4, 2).unwrap(), 1);
        assert_eq!(find_y(3, 3, 6, 3).unwrap(), 1);
        // t = 1: gcd condition vacuous, least solution of y n = d
        assert_eq!(find_y(2, 2, 8, 1).unwrap(), 1);
    }

    #[test]
    fn psl2_q5() {
        let om = out_model(Family::Psl, 2, 5).unwrap();
        let f = Arc::new(make_field(5, 1).unwrap());
        let t = &om.enumerate_maximal_abelian().unwrap()[0];
        let s = psl2_supplement(&om, &f, t).unwrap();
        assert_eq!(s.words.len(), 2);
        let scalar = word_commutator_central(&s.words[0], &s.words[1], s.center)
            .unwrap()
            .unwrap();
        assert_eq!(scalar, FieldElement(4)); // omega^((p-1)/2) = 2^2
    }

    #[test]
    fn psl_t_eq_n_branch() {
        // n=3, q=4, T = <delta, phi*gamma>: the t = n branch with X_{3,-1}
        let om = out_model(Family::Psl, 3, 4).unwrap();
        let f = Arc::new(make_field(2, 2).unwrap());
        let t = om.subgroup(&[om.delta_pow(1), om.mul(om.phi_pow(1), om.graph_gen())]);
        assert!(om.is_abelian(&t.elements));
        let s = psl_supplement(&om, &f, &t).unwrap();
        assert_eq!(s.route, "construction:psl-t-eq-n");
        assert_eq!(s.words[1].x, build_x(&f, f.omega, 3, -1));
    }

    #[test]
    fn cyclic_lift_of_phi() {
        let om = out_model(Family::Psl, 3, 4).unwrap();
        let f = Arc::new(make_field(2, 2).unwrap());
        let t = om.subgroup(&[om.phi_pow(1)]);
        let s = psl_supplement(&om, &f, &t).unwrap();
        assert_eq!(s.route, "cyclic-lift");
        assert!(s.words[0].x.is_identity());
        assert_eq!(s.words[0].s, 1);
    }

    #[test]
    fn pgammal_internal_c_matrix() {
        // Step 3 of the two-generator case: [A, C] = 1 and det C = omega.
        let om = out_model(Family::Psl, 6, 7).unwrap();
        let f = Arc::new(make_field(7, 1).unwrap());
        // T = <delta^3, gamma>: k = 3, t = 2
        let t = om.subgroup(&[om.delta_pow(3), om.graph_gen()]);
        assert!(om.is_abelian(&t.elements));
        let s = psl_supplement(&om, &f, &t).unwrap();
        assert_eq!(s.route, "construction:psl-pgammal");
        // commutator of the two words must be scalar
        let sc = word_commutator_central(&s.words[0], &s.words[1], s.center).unwrap();
        assert!(sc.is_some());
    }

    #[test]
    fn threegen_internal_identities() {
        // d even: [phi^s X_phi, gamma X_gamma] = 1 for both variants.
        let om = out_model(Family::Psl, 4, 9).unwrap();
        let f = Arc::new(make_field(3, 2).unwrap());
        let d = om.d as i64;
        let y = find_y(4, d, 8, 2).unwrap();
        let s = 1i64;
        let r = (3i64.pow(s as u32) - 1) / 2;
        let x_phi = block_diag(&[build_x(&f, f.omega, 2, y * r), build_x(&f, f.omega, 2, y * r)]).unwrap();
        let x_gamma = block_diag(&[build_x(&f, f.omega, 2, -y), build_x(&f, f.omega, 2, -y)]).unwrap();
        let u = SemilinearWord::new(1, 0, GraphKind::InverseTranspose, x_phi);
        let v = SemilinearWord::new(0, 1, GraphKind::InverseTranspose, x_gamma);
        assert!(u.commutator(&v).unwrap().is_identity());

        let y_phi = build_x(&f, f.omega, 2, y * r)
            .mul(&build_a(&f, f.omega, 2, y).pow(-r).unwrap());
        let y_gamma = build_x(&f, f.omega, 2, -y).mul(&build_a(&f, f.omega, 2, y));
        let xp2 = block_diag(&[y_phi, build_x(&f, f.omega, 2, y * r)]).unwrap();
        let xg2 = block_diag(&[y_gamma, build_x(&f, f.omega, 2, -y)]).unwrap();
        let u2 = SemilinearWord::new(1, 0, GraphKind::InverseTranspose, xp2);
        let v2 = SemilinearWord::new(0, 1, GraphKind::InverseTranspose, xg2);
        assert!(u2.commutator(&v2).unwrap().is_identity());
    }
}
