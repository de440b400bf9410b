use proptest::prelude::*;

use warpcost_core::evaluation::evaluate_models;
use warpcost_core::gmm::GmmModel;
use warpcost_core::models::{census_cost, csad_cost, BaselineModel};
use warpcost_core::patches::{split_pairs, Split};
use warpcost_core::pyramid::upscale_flow;
use warpcost_core::warp::{backward_warp, warp_error};
use warpcost_core::{DensityModel, FlowField, Image, PatchSet};

/// Multiples of 1/64 in [-2, 2]: sums and differences stay exact.
fn dyadic() -> impl Strategy<Value = f64> {
    (-128i32..=128).prop_map(|k| k as f64 / 64.0)
}

fn patch(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(dyadic(), p * p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gcl2_constant_shift_only_moves_the_epsilon_term(d in patch(3), c in dyadic(), lam in 0.1f64..20.0, eps in 0.01f64..2.0) {
        let m = BaselineModel::gcl2(3, lam, eps).unwrap();
        let shifted: Vec<f64> = d.iter().map(|v| v + c).collect();
        let sq = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let lhs = m.logpdf(&shifted).unwrap() - m.logpdf(&d).unwrap();
        let rhs = -eps * (sq(&shifted) - sq(&d));
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs() + m.energy(&d)));
    }

    #[test]
    fn census_and_csad_ignore_constant_offsets(a in patch(5), b in patch(5), c1 in dyadic(), c2 in dyadic()) {
        let a2: Vec<f64> = a.iter().map(|v| v + c1).collect();
        let b2: Vec<f64> = b.iter().map(|v| v + c2).collect();
        prop_assert_eq!(census_cost(&a, &b, 5).unwrap(), census_cost(&a2, &b2, 5).unwrap());
        prop_assert_eq!(csad_cost(&a, &b, 5).unwrap(), csad_cost(&a2, &b2, 5).unwrap());
        prop_assert_eq!(census_cost(&a, &a2, 5).unwrap(), 0);
    }

    #[test]
    fn ranking_ignores_patch_order(data in prop::collection::vec(-1.0f64..1.0, 4 * 30), seed in any::<u64>()) {
        let set = PatchSet::from_flat(2, Split::Test, data).unwrap();
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = set.select(&order);
        let a: DensityModel = BaselineModel::bcl2(2, 2.0).unwrap().into();
        let b: DensityModel = BaselineModel::bcl1(2, 1.5).unwrap().into();
        let g: DensityModel = GmmModel::new(vec![0.5, 0.5], vec![
            nalgebra::DMatrix::identity(4, 4) * 0.1,
            nalgebra::DMatrix::identity(4, 4) * 0.5,
        ]).unwrap().into();
        let names = |set: &PatchSet| -> Vec<String> {
            evaluate_models([("a", &a), ("b", &b), ("g", &g)], set).rows.into_iter().map(|r| r.model).collect()
        };
        prop_assert_eq!(names(&set), names(&shuffled));
    }

    #[test]
    fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_pairs(n, frac, seed).unwrap();
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!train.is_empty() && !test.is_empty());
    }

    #[test]
    fn bilinear_warp_is_exact_on_affine_images(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0,
                                                u in -3.0f64..3.0, v in -3.0f64..3.0) {
        let (w, h) = (12, 10);
        let img = Image::from_fn(w, h, |x, y| a * x as f64 + b * y as f64 + c);
        let flow = FlowField::from_fn(w, h, |_, _| (u, v));
        let out = backward_warp(&img, &flow).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + u, y as f64 + v);
                let inside = px >= 0.0 && py >= 0.0 && px <= (w - 1) as f64 && py <= (h - 1) as f64;
                prop_assert_eq!(out.valid[y * w + x], inside);
                if inside {
                    prop_assert!((out.image.get(x, y) - (a * px + b * py + c)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn warp_error_of_a_translated_ramp_is_zero(a in -1.0f64..1.0, u in -2.0f64..2.0) {
        let (w, h) = (16, 6);
        let i1 = Image::from_fn(w, h, |x, _| a * x as f64);
        let i2 = Image::from_fn(w, h, |x, _| a * (x as f64 - u));
        let flow = FlowField::from_fn(w, h, |_, _| (u, 0.0));
        let e = warp_error(&i1, &i2, &flow).unwrap();
        for (i, ok) in e.valid.iter().enumerate() {
            if *ok {
                prop_assert!(e.image.as_slice()[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_flow_upscales_by_the_size_ratio(u in -4.0f64..4.0, v in -4.0f64..4.0, w in 2usize..20, h in 2usize..20) {
        let f = FlowField::from_fn(w, h, |_, _| (u, v));
        let up = upscale_flow(&f, 2 * w, 2 * h);
        for y in 0..2 * h {
            for x in 0..2 * w {
                let (a, b) = up.get(x, y);
                prop_assert!((a - 2.0 * u).abs() < 1e-12 && (b - 2.0 * v).abs() < 1e-12);
            }
        }
    }
}
