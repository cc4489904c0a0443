use approx::assert_abs_diff_eq;
use lame_core::hs::solve_all_p2;
use lame_core::lame::{sigma, LameOperator};
use lame_core::periods::{chebotarev_center, germ_chart, periods, star_cycles};
use lame_core::poly::{sort_complex, Poly};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn point(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(a, b)| C64::new(a, b))
}

fn min_gap(z: &[C64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            g = g.min((z[i] - z[j]).norm());
        }
    }
    g
}

/// Three poles that are well separated and not nearly collinear.
fn triangle() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(point(2.0), 3).prop_filter("fat triangle", |t| {
        let area = ((t[1] - t[0]).conj() * (t[2] - t[0])).im.abs() / 2.0;
        min_gap(t) > 0.3 && area > 0.15
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn roots_of_product_are_recovered(roots in prop::collection::vec(point(2.0), 1..8)) {
        prop_assume!(min_gap(&roots) > 0.05);
        let mut got = Poly::from_roots(&roots).roots(1e-12).unwrap();
        let mut want = roots.clone();
        sort_complex(&mut got);
        sort_complex(&mut want);
        for (a, b) in got.iter().zip(&want) {
            prop_assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn germ_periods_sum_to_one(poles in triangle(), t in (0.1f64..0.8, 0.1f64..0.8)) {
        prop_assume!(t.0 + t.1 < 0.9);
        let v = poles[0] + (poles[1] - poles[0]) * t.0 + (poles[2] - poles[0]) * t.1;
        let pv = periods(&germ_chart(&poles, v).unwrap(), &star_cycles(2)).unwrap();
        prop_assert!(pv.sum_error < 1e-10, "{}", pv.sum_error);
    }

    #[test]
    fn chebotarev_masses(poles in triangle()) {
        let ch = chebotarev_center(&poles, 1e-13).unwrap();
        assert_abs_diff_eq!(ch.m.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
        prop_assert!(ch.m.iter().all(|&m| m > 0.0));
        prop_assert!(ch.length_mismatch < 1e-7);
        // the center is invariant under moving and rotating the triangle
        let rot = C64::from_polar(1.0, 0.7);
        let moved: Vec<C64> = poles.iter().map(|&a| rot * a + C64::new(0.4, -1.1)).collect();
        let ch2 = chebotarev_center(&moved, 1e-13).unwrap();
        prop_assert!((ch2.v_star - (rot * ch.v_star + C64::new(0.4, -1.1))).norm() < 1e-7);
    }

    #[test]
    fn three_pole_certificates(poles in triangle(), b in (point(1.0), point(1.0)), n in 1usize..8) {
        let bp = Poly::new(vec![b.0, b.1, C64::new(3.0, 0.0)]);
        let op = LameOperator::new(&poles, bp, n).unwrap();
        let rep = solve_all_p2(&op, 1e-9).unwrap();
        prop_assert_eq!(rep.expected_count, sigma(n, 2));
        for p in &rep.pairs {
            prop_assert!(p.ode_res <= 1e-9, "{}", p.ode_res);
            prop_assert!(p.v.is_monic() && p.q.is_monic() && p.q.degree() == n);
        }
    }
}
