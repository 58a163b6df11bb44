use polycurve::curve::{mat3_det, Mat3};
use polycurve::decomposition::{classify_regions, d2_decompose, CellKind, Region};
use polycurve::jacobian::{
    jacobian_direct, jacobian_integral, JacobianEngine, QuadratureSpec, Triple,
};
use polycurve::operator::{pairing, MeasurableSet};
use polycurve::poly::{det3, DEFAULT_CLUSTER_TOL};
use polycurve::verify::geometric_ratio;
use polycurve::{AffineMap3, ComplexPolynomial, CurveGamma, C64};
use proptest::prelude::*;

fn c64() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn small_point() -> impl Strategy<Value = C64> {
    (-1.5..1.5f64, -1.5..1.5f64).prop_map(|(a, b)| C64::new(a, b))
}

/// Polynomial of exact degree `deg` with a leading coefficient of modulus >= 1/2.
fn poly_of_degree(deg: usize) -> impl Strategy<Value = ComplexPolynomial> {
    (
        prop::collection::vec(c64(), deg),
        0.5..2.0f64,
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(mut cs, r, th)| {
            cs.push(C64::from_polar(r, th));
            ComplexPolynomial::new(cs)
        })
}

fn poly_up_to(max_deg: usize) -> impl Strategy<Value = ComplexPolynomial> {
    (1..=max_deg).prop_flat_map(poly_of_degree)
}

/// Curve whose components have degrees 1..=n with the top one of degree n.
fn curve(min_n: usize, max_n: usize) -> impl Strategy<Value = CurveGamma> {
    (min_n..=max_n)
        .prop_flat_map(|n| (poly_up_to(n - 1), poly_up_to(n - 1), poly_of_degree(n)))
        .prop_map(|(a, b, c)| CurveGamma::from_components([a, b, c]))
        .prop_filter("nondegenerate torsion", |c| !c.is_degenerate())
}

fn matrix() -> impl Strategy<Value = Mat3> {
    prop::array::uniform3(prop::array::uniform3(c64()))
        .prop_filter("well-conditioned", |m| mat3_det(m).norm() > 0.1)
}

fn rel_close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

fn compose(p: &ComplexPolynomial, s: C64) -> ComplexPolynomial {
    // p(s z)
    let mut f = C64::new(1.0, 0.0);
    ComplexPolynomial::new(
        p.coeffs()
            .iter()
            .map(|&c| {
                let v = c * f;
                f *= s;
                v
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_evaluates_as_product(p in poly_up_to(8), q in poly_up_to(8), zs in prop::collection::vec(c64(), 100)) {
        let pq = &p * &q;
        for z in zs {
            prop_assert!(rel_close(pq.eval(z), p.eval(z) * q.eval(z), 1e-10 * (p.eval_abs(z) * q.eval_abs(z)).max(1.0)));
        }
    }

    #[test]
    fn roots_reconstruct_round_trip(p in poly_up_to(6)) {
        let rs = p.roots(DEFAULT_CLUSTER_TOL).unwrap();
        prop_assert_eq!(rs.total_multiplicity(), p.degree().unwrap());
        let back = rs.reconstruct();
        let scale = p.max_coeff_modulus();
        for k in 0..=p.degree().unwrap() {
            prop_assert!((back.coeff(k) - p.coeff(k)).norm() <= 1e-6 * scale, "k = {}", k);
        }
    }

    #[test]
    fn derivative_is_linear(p in poly_up_to(8), q in poly_up_to(8), a in c64(), b in c64()) {
        let lhs = (&p.scale(a) + &q.scale(b)).derivative();
        let rhs = &p.derivative().scale(a) + &q.derivative().scale(b);
        // exact up to the same floating-point operations in both orders
        for k in 0..8 {
            prop_assert!((lhs.coeff(k) - rhs.coeff(k)).norm() <= 1e-13 * (1.0 + rhs.coeff(k).norm()));
        }
    }

    #[test]
    fn det3_with_equal_rows_vanishes(r in prop::array::uniform3(poly_up_to(4)), s in prop::array::uniform3(poly_up_to(4))) {
        // cancellation is exact in exact arithmetic; in floating point the
        // cofactor products are associated differently
        let scale: f64 = r.iter().chain(&s).map(|p| p.max_coeff_modulus()).fold(0.0, f64::max).powi(3);
        prop_assert!(det3(&[r.clone(), s.clone(), r.clone()]).is_negligible(1e-13 * scale));
        prop_assert!(det3(&[r.clone(), r, s]).is_negligible(1e-13 * scale));
    }

    #[test]
    fn torsion_scales_by_determinant(c in curve(3, 6), m in matrix(), off in prop::array::uniform3(c64()), zs in prop::collection::vec(small_point(), 20)) {
        let map = AffineMap3::new(m, off);
        let l3 = c.torsion_triple().l3;
        let l3a = c.affine_apply(&map).torsion_triple().l3;
        for z in zs {
            let want = map.determinant * l3.eval(z);
            let scale = (map.determinant.norm() * l3.eval_abs(z)).max(1e-300);
            prop_assert!((l3a.eval(z) - want).norm() <= 1e-8 * scale.max(want.norm()) * 10.0);
        }
    }

    #[test]
    fn normalization_is_idempotent(c in curve(3, 6)) {
        prop_assume!(c.torsion_triple().l3.eval(C64::new(0.0, 0.0)).norm() > 0.05);
        let (n1, _) = c.normalize_at_origin().unwrap();
        let (n2, _) = n1.normalize_at_origin().unwrap();
        let tol = 1e-9 * n1.coefficient_scale().max(1.0);
        for i in 0..3 {
            let (a, b) = (&n1.components()[i], &n2.components()[i]);
            for k in 0..=n1.degree_bound() {
                prop_assert!((a.coeff(k) - b.coeff(k)).norm() <= tol);
            }
        }
    }

    #[test]
    fn offspring_of_equal_shifts_is_the_shifted_curve(c in curve(3, 6), h in c64()) {
        for k in [1usize, 2] {
            let off = c.offspring(&vec![h; k]).unwrap();
            for i in 0..3 {
                prop_assert_eq!(&off.components()[i], &c.components()[i].shift(h));
            }
        }
    }

    #[test]
    fn offspring_torsion_degree_is_bounded(c in curve(3, 6), hs in prop::collection::vec(c64(), 1..5)) {
        let off = c.offspring(&hs).unwrap();
        let n = c.degree_bound();
        let l3 = off.torsion_triple().l3.chop(1e-9 * off.coefficient_scale().powi(3).max(1.0));
        prop_assert!(l3.degree_or_zero() <= 3 * n - 6);
    }

    #[test]
    fn direct_jacobian_is_antisymmetric(c in curve(3, 6), z1 in c64(), z2 in c64(), z3 in c64()) {
        let j = jacobian_direct(&c, &Triple::new(z1, z2, z3));
        let s = jacobian_direct(&c, &Triple::new(z2, z1, z3));
        prop_assert_eq!(s, -j);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integral_matches_direct_and_converges(c in curve(3, 6), z1 in small_point(), z2 in small_point(), z3 in small_point()) {
        let t = Triple::new(z1, z2, z3);
        prop_assume!(t.min_separation() > 1e-3);
        let eng = JacobianEngine::new(&c).unwrap();
        prop_assume!(eng.precheck(&t).is_ok());
        let n = 6 * c.degree_bound();
        let q = QuadratureSpec::new(n).unwrap();
        let (a, b) = match (eng.integral(&t, &q), eng.integral(&t, &QuadratureSpec::new(2 * n).unwrap())) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Ok(()),
        };
        let direct = jacobian_direct(&c, &t);
        prop_assert!((a - direct).norm() <= 1e-6 * direct.norm().max(1.0), "{} vs {}", a, direct);
        prop_assert!((a - b).norm() <= 1e-8 * b.norm().max(1.0));
    }

    #[test]
    fn collapse_is_linear_in_the_gap(c in curve(3, 5), z1 in small_point(), z2 in small_point(), dir in 0.0..std::f64::consts::TAU) {
        prop_assume!((z1 - z2).norm() > 0.2);
        let q = QuadratureSpec::default();
        let step = C64::from_polar(1.0, dir);
        let slopes: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .filter_map(|&d| jacobian_integral(&c, &Triple::new(z1, z2, z2 + step * d), &q).ok().map(|j| j.norm() / d))
            .collect();
        prop_assume!(slopes.len() == 3);
        let scale = slopes[2].max(1e-8);
        prop_assert!((slopes[1] - slopes[2]).abs() <= 0.05 * scale + 1e-8);
    }

    #[test]
    fn ratio_is_permutation_invariant(c in curve(3, 6), z in prop::array::uniform3(small_point())) {
        let base = match geometric_ratio(&c, &Triple::new(z[0], z[1], z[2])) {
            Ok(r) => r.ratio,
            Err(_) => return Ok(()),
        };
        for p in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let r = geometric_ratio(&c, &Triple::new(z[p[0]], z[p[1]], z[p[2]])).unwrap().ratio;
            prop_assert!((r - base).abs() <= 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn ratio_is_unimodular_invariant(c in curve(3, 6), m in matrix(), z in prop::array::uniform3(small_point())) {
        let d = mat3_det(&m);
        // rescale the first row so det = 1
        let mut u = m;
        for v in u[0].iter_mut() {
            *v /= d;
        }
        let t = Triple::new(z[0], z[1], z[2]);
        let (a, b) = match (geometric_ratio(&c, &t), geometric_ratio(&c.affine_apply(&AffineMap3::linear(u)), &t)) {
            (Ok(a), Ok(b)) => (a.ratio, b.ratio),
            _ => return Ok(()),
        };
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-12));
    }

    #[test]
    fn ratio_is_scaling_covariant(c in curve(3, 6), z in prop::array::uniform3(small_point())) {
        for s in [C64::new(2.0, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 1.0)] {
            let cs = CurveGamma::from_components(std::array::from_fn(|i| compose(&c.components()[i], s)));
            let t = Triple::new(z[0], z[1], z[2]);
            let ts = Triple::new(z[0] / s, z[1] / s, z[2] / s);
            let (a, b) = match (geometric_ratio(&c, &t), geometric_ratio(&cs, &ts)) {
                (Ok(a), Ok(b)) => (a.ratio, b.ratio),
                _ => return Ok(()),
            };
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-12));
        }
    }

    #[test]
    fn d2_skips_vanishing_taylor_coefficients(base in poly_of_degree(5), gap in 1usize..5, b in c64()) {
        // p has no z^gap term; q(z) = p(z - b) has no (z - b)^gap term
        let cs: Vec<C64> = base.coeffs().iter().enumerate().map(|(k, &c)| if k == gap { C64::new(0.0, 0.0) } else { c }).collect();
        let q = ComplexPolynomial::new(cs).shift(-b);
        let pieces = d2_decompose(&q, b, &Region::whole_plane(50.0)).unwrap();
        prop_assert!(!pieces.iter().any(|p| p.kind == CellKind::Gap && p.exponent == gap));
    }

    #[test]
    fn pairing_identities_hold(r_e in 0.3..2.0f64, r_f in 0.3..2.0f64, c in prop::array::uniform3(c64()), seed in any::<u64>()) {
        let e = MeasurableSet::ball(c, r_e);
        let f = MeasurableSet::cube([C64::new(0.0, 0.0); 3], r_f);
        let rep = pairing(&CurveGamma::moment(), &e, &f, 2.0, 2000, seed).unwrap();
        prop_assert!((rep.alpha * f.volume - rep.pairing).abs() <= 1e-10 * rep.pairing.max(1e-300));
        prop_assert!((rep.beta * e.volume - rep.pairing).abs() <= 1e-10 * rep.pairing.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn decomposition_regions_are_table_consistent(c in curve(3, 4)) {
        let rep = match classify_regions(&c.torsion_triple(), None) {
            Ok(r) => r,
            Err(_) => return Ok(()),
        };
        prop_assert!(!rep.regions.is_empty());
        for r in &rep.regions {
            prop_assert!(r.sigma.is_consistent(), "region {}", r.id);
            for cmp in &r.comparability {
                prop_assert!(cmp.c_star.is_finite() && cmp.c_star >= 1.0);
            }
        }
    }
}
