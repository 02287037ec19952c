use nalgebra::DMatrix;
use proptest::prelude::*;

use semitall::polyfactor::{alpha_closed, real_selections};
use semitall::recurrence::build_n;
use semitall::tensor::{
    make_base_tensor, mu, nu, pencil_eval, psi, sigma, span_dim, tau, Flattening, Format, Tensor3,
    CHART_CONDITION_LIMIT,
};

fn small_format() -> impl Strategy<Value = Format> {
    (3usize..=5)
        .prop_flat_map(|m| (Just(m), m..=6))
        .prop_map(|(m, n)| Format::critical(m, n).unwrap())
}

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

fn close(x: &[f64], y: &[f64], tol: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_bilinear(
        (fmt, a1, a2, b, s) in small_format().prop_flat_map(|f| (Just(f), vec_of(f.m), vec_of(f.m), vec_of(f.n), -2.0f64..2.0))
    ) {
        let sum: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x + s * y).collect();
        let lhs = psi(&sum, &b, fmt).unwrap();
        let p1 = psi(&a1, &b, fmt).unwrap();
        let p2 = psi(&a2, &b, fmt).unwrap();
        let rhs: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| x + s * y).collect();
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let bs: Vec<f64> = b.iter().map(|x| s * x).collect();
        let scaled: Vec<f64> = p1.iter().map(|x| s * x).collect();
        prop_assert!(close(&psi(&a1, &bs, fmt).unwrap(), &scaled, 1e-12));
    }

    #[test]
    fn pencil_is_linear_in_a(
        (shape, data, a1, a2) in (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(d1, d2, d3)| {
            (Just([d1, d2, d3]), vec_of(d1 * d2 * d3), vec_of(d3), vec_of(d3))
        })
    ) {
        let t = Tensor3::new(shape, data).unwrap();
        let sum: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| x + y).collect();
        let lhs = pencil_eval(&sum, &t).unwrap();
        let rhs = pencil_eval(&a1, &t).unwrap() + pencil_eval(&a2, &t).unwrap();
        prop_assert!((lhs - rhs).abs().max() < 1e-12);
    }

    #[test]
    fn flattenings_are_bijections(
        (shape, data) in (1usize..5, 1usize..5, 1usize..5)
            .prop_flat_map(|(d1, d2, d3)| (Just([d1, d2, d3]), vec_of(d1 * d2 * d3)))
    ) {
        let t = Tensor3::new(shape, data).unwrap();
        let [d1, d2, d3] = shape;
        let back1 = Tensor3::unflatten_fl1(&t.flatten(Flattening::Fl1), d2, d3).unwrap();
        let back2 = Tensor3::unflatten_fl2(&t.flatten(Flattening::Fl2), d1, d3).unwrap();
        prop_assert_eq!(&back1, &t);
        prop_assert_eq!(&back2, &t);
    }

    #[test]
    fn chart_maps_invert_each_other(
        (fmt, data) in small_format().prop_flat_map(|f| (Just(f), vec_of(f.u * f.p)))
    ) {
        let w = DMatrix::from_row_slice(fmt.u, fmt.p, &data);
        let back = sigma(&tau(&w, fmt).unwrap(), fmt, CHART_CONDITION_LIMIT).unwrap();
        prop_assert!((back - &w).abs().max() < 1e-10);
        let back = nu(&mu(&w, fmt).unwrap(), fmt, CHART_CONDITION_LIMIT).unwrap();
        prop_assert!((back - &w).abs().max() < 1e-10);
    }

    #[test]
    fn base_pencil_matches_banded_matrix(
        (fmt, a) in small_format().prop_flat_map(|f| (Just(f), vec_of(f.m - 1)))
    ) {
        let mut full = a.clone();
        full.push(-1.0);
        let pencil = pencil_eval(&full, &make_base_tensor(fmt.m, fmt.n).unwrap()).unwrap();
        let banded = build_n(&full, fmt.m, fmt.n).unwrap();
        prop_assert_eq!(pencil, banded);
    }

    #[test]
    fn span_dim_bounded_by_count_and_length(
        vectors in prop::collection::vec(vec_of(6), 0..9)
    ) {
        let d = span_dim(&vectors, 1e-8).unwrap();
        prop_assert!(d <= vectors.len().min(6));
    }
}

#[test]
fn alpha_matches_count_of_real_selections() {
    for m in 3..=10 {
        for n in m..=14 {
            let count = real_selections(m + n - 2, m - 1).unwrap().len();
            assert_eq!(alpha_closed(m, n).unwrap(), count.into(), "({m},{n})");
        }
    }
}
