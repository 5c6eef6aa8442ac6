mod common;

use common::*;
use proptest::prelude::*;
use qstop_core::linalg::{identity, max_abs, projection_defect};
use qstop_core::secondquant::{second_quantize_slot, slot_operator};
use qstop_core::{
    ccr_flow, conditional_vacuum, exponential_vector, p_tail_projection, shift, CMatrix, CVector, FockOperator,
    FockVector, OneParticleProjection, StepFunction, C64,
};

#[test]
fn exponential_norm_matches_series() {
    for (d, cap) in [(1, 1), (1, 3), (2, 2), (3, 1)] {
        let cfg = grid(2, d, cap, 1);
        let mut r = rng(1 + d as u64 * 10 + cap as u64);
        let f = qstop_core::random::random_step_function(&cfg, 2, 0.9, &mut r);
        let g = qstop_core::random::random_step_function(&cfg, 2, 0.7, &mut r);
        let ef = exponential_vector(&cfg, &f).unwrap();
        let eg = exponential_vector(&cfg, &g).unwrap();
        let expected = truncated_kernel(&cfg, &f, &g);
        assert!((ef.inner(&eg) - expected).norm() < 1e-12, "d={d} cap={cap}");
        assert!((ef.norm().powi(2) - truncated_kernel(&cfg, &f, &f).re).abs() < 1e-12);
    }
}

#[test]
fn single_slot_amplitudes() {
    let cfg = qstop_core::SliceConfig::new(1, 0.1, 1, 1, 1).unwrap();
    let c = C64::new(0.7, -0.4);
    let f = StepFunction::new(&cfg, vec![vec![c]]).unwrap();
    let e = exponential_vector(&cfg, &f).unwrap();
    assert!((e.amplitudes()[1] - c * 0.1f64.sqrt()).norm() < 1e-15);
    assert!((e.norm().powi(2) - (1.0 + c.norm_sqr() * 0.1)).abs() < 1e-14);
}

#[test]
fn split_of_exponential_vector_is_a_product() {
    let cfg = grid(4, 1, 2, 1);
    let mut r = rng(2);
    let f = qstop_core::random::random_step_function(&cfg, 4, 1.0, &mut r);
    let e = exponential_vector(&cfg, &f).unwrap();
    for t in 0..=4 {
        let m = e.tensor_split(t).unwrap();
        let before = exponential_vector(&cfg, &f.restrict_before(t)).unwrap();
        // f from t on, moved back to the start of the grid
        let mut tail = StepFunction::zero(&cfg);
        for j in t..4 {
            tail.values[j - t] = f.values[j].clone();
        }
        let after = exponential_vector(&cfg, &tail).unwrap();
        let a = before.amplitudes().rows(0, cfg.prefix_dim(t)).clone_owned();
        let b = after.amplitudes().rows(0, cfg.prefix_dim(4 - t)).clone_owned();
        assert!(close(&m, &(a * b.transpose()), 1e-13), "t={t}");
    }
}

#[test]
fn vacuum_split_is_rank_one() {
    let cfg = grid(3, 1, 1, 1);
    for t in 0..=3 {
        let m = FockVector::vacuum(&cfg).tensor_split(t).unwrap();
        assert_eq!(m.rank(1e-12), 1);
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
    }
}

#[test]
fn ampliation_pairs_inner_products() {
    let cfg = grid(2, 1, 1, 2);
    let mut r = rng(3);
    let x = random_local(&cfg, 2, false, &mut r);
    let v = random_vector(&cfg, 2, &mut r);
    let u = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
    let uv = v.ampliate_with(&u).unwrap();
    let lhs = uv.inner(&x.ampliate().unwrap().apply(&uv).unwrap());
    let rhs = v.inner(&x.apply(&v).unwrap());
    assert!((lhs - rhs).norm() < 1e-12);
    let restricted = x.ampliate().unwrap().restrict_initial(&u, &u).unwrap();
    assert!(close(restricted.matrix(), x.matrix(), 1e-12));
    assert_eq!(FockOperator::identity(&cfg).ampliate().unwrap().matrix(), &identity(8));
    let e = conditional_vacuum(&cfg, 1).unwrap().ampliate().unwrap();
    assert!(projection_defect(e.matrix()) < 1e-15);
}

#[test]
fn conditional_vacuum_on_exponential_vectors() {
    let cfg = grid(3, 2, 1, 1);
    let f = step(&cfg, &[&[0.5, -0.2], &[0.1, 0.3], &[-0.4, 0.2]]);
    let e = exponential_vector(&cfg, &f).unwrap();
    for t in 0..=3 {
        let et = conditional_vacuum(&cfg, t).unwrap();
        let projected = et.apply(&e).unwrap();
        let expected = exponential_vector(&cfg, &f.restrict_before(t)).unwrap();
        assert!(close_vec(projected.amplitudes(), expected.amplitudes(), 1e-14));
        let norm2 = truncated_kernel(&cfg, &f.restrict_before(t), &f.restrict_before(t)).re;
        assert!((projected.norm().powi(2) - norm2).abs() < 1e-13);
    }
}

#[test]
fn conditional_vacua_nest() {
    let cfg = grid(3, 1, 2, 1);
    for s in 0..=3 {
        for t in 0..=3 {
            let prod = &conditional_vacuum(&cfg, s).unwrap() * &conditional_vacuum(&cfg, t).unwrap();
            assert_eq!(prod.matrix(), conditional_vacuum(&cfg, s.min(t)).unwrap().matrix());
        }
    }
}

#[test]
fn shift_moves_exponential_vectors() {
    let cfg = grid(4, 1, 2, 1);
    let f = step(&cfg, &[&[0.3], &[-0.6]]);
    let e = exponential_vector(&cfg, &f).unwrap();
    for s in 0..=2 {
        let shifted = shift(&cfg, s).unwrap().apply(&e).unwrap();
        let expected = exponential_vector(&cfg, &f.shifted(s)).unwrap();
        assert!(close_vec(shifted.amplitudes(), expected.amplitudes(), 1e-15));
        assert!((shifted.norm() - e.norm()).abs() < 1e-14);
    }
    let err = shift(&cfg, 3).unwrap().apply(&e).unwrap_err();
    assert!(matches!(err, qstop_core::Error::Horizon { .. }));
    let vac = FockVector::vacuum(&cfg);
    assert_eq!(shift(&cfg, 4).unwrap().apply(&vac).unwrap(), vac);
}

#[test]
fn shift_algebra_on_admissible_vectors() {
    let cfg = grid(4, 1, 1, 1);
    let mut r = rng(4);
    for s in 0..=4 {
        let gs = shift(&cfg, s).unwrap();
        let dom = gs.domain_projection().unwrap();
        let gram = gs.matrix().adjoint() * gs.matrix();
        assert!(close(&gram, dom.matrix(), 0.0));
        for t in 0..=(4 - s) {
            let gt = shift(&cfg, t).unwrap();
            let gst = shift(&cfg, s + t).unwrap();
            let v = random_vector(&cfg, 4 - s - t, &mut r);
            let composed = gs.apply(&gt.apply(&v).unwrap()).unwrap();
            assert!(close_vec(composed.amplitudes(), gst.apply(&v).unwrap().amplitudes(), 0.0));
            // covariance E_{s+t} Γ_s = Γ_s E_t
            let w = random_vector(&cfg, 4 - s, &mut r);
            let lhs = conditional_vacuum(&cfg, s + t).unwrap().apply(&gs.apply(&w).unwrap()).unwrap();
            let rhs = gs.apply(&conditional_vacuum(&cfg, t).unwrap().apply(&w).unwrap()).unwrap();
            assert!(close_vec(lhs.amplitudes(), rhs.amplitudes(), 1e-15));
        }
    }
}

#[test]
fn flow_intertwines_shift() {
    let cfg = grid(4, 1, 1, 1);
    let mut r = rng(5);
    for t in 0..=4 {
        for h in 0..=(4 - t) {
            let x = random_local(&cfg, h, false, &mut r);
            let v = random_vector(&cfg, 4 - t, &mut r);
            let gt = shift(&cfg, t).unwrap();
            let lhs = ccr_flow(t, &x).unwrap().apply(&gt.apply(&v).unwrap()).unwrap();
            let rhs = gt.apply(&x.apply(&v).unwrap()).unwrap();
            assert!(close_vec(lhs.amplitudes(), rhs.amplitudes(), 1e-12), "t={t} h={h}");
        }
    }
}

#[test]
fn flow_against_matrix_conjugation() {
    let cfg = grid(3, 1, 1, 2);
    let mut r = rng(6);
    let z = random_local(&cfg, 2, true, &mut r);
    let flowed = ccr_flow(1, &z).unwrap();
    let d = cfg.slot_dim();
    let fock = cfg.fock_dim();
    let zm = z.matrix();
    let expected = CMatrix::from_fn(2 * fock, 2 * fock, |row, col| {
        let (u, x) = (row / fock, row % fock);
        let (v, y) = (col / fock, col % fock);
        // slot 0 untouched, slots 1 and 2 carry the operator's slots 0 and 1
        if x % d != y % d {
            return C64::new(0.0, 0.0);
        }
        let xs = x / d;
        let ys = y / d;
        zm[(u * fock + xs, v * fock + ys)]
    });
    assert!(close(flowed.matrix(), &expected, 0.0));
}

#[test]
fn flow_is_a_unital_homomorphism() {
    let cfg = grid(4, 1, 1, 2);
    let mut r = rng(7);
    for t in 0..=4 {
        let h = 4 - t;
        let x = random_local(&cfg, h, false, &mut r);
        let y = random_local(&cfg, h, false, &mut r);
        let fx = ccr_flow(t, &x).unwrap();
        let fy = ccr_flow(t, &y).unwrap();
        assert!(close((&fx * &fy).matrix(), ccr_flow(t, &(&x * &y)).unwrap().matrix(), 1e-10));
        assert!(close(&fx.matrix().adjoint(), ccr_flow(t, &x.adjoint()).unwrap().matrix(), 0.0));
        assert_eq!(ccr_flow(t, &FockOperator::identity(&cfg)).unwrap().matrix(), &identity(16));
        let z = random_local(&cfg, h, true, &mut r);
        let a = FockOperator::initial(&cfg, &qstop_core::random::gaussian_matrix(2, 2, &mut r)).unwrap();
        assert_eq!(ccr_flow(t, &a).unwrap().matrix(), a.matrix());
        let fz = ccr_flow(t, &z).unwrap();
        assert!(close((&fz * &a).matrix(), ccr_flow(t, &(&z * &a)).unwrap().matrix(), 1e-10));
    }
    for s in 0..=2 {
        for t in 0..=2 {
            let x = random_local(&cfg, 4 - s - t, false, &mut r);
            let twice = ccr_flow(s, &ccr_flow(t, &x).unwrap()).unwrap();
            assert_eq!(twice.matrix(), ccr_flow(s + t, &x).unwrap().matrix());
        }
    }
    let x = random_local(&cfg, 3, false, &mut r);
    assert!(ccr_flow(2, &x).is_err());
}

#[test]
fn horizon_commutation() {
    // an operator with horizon h commutes with anything localized in slots >= h
    let cfg = grid(3, 1, 1, 1);
    let mut r = rng(8);
    for h in 0..=3 {
        let x = random_local(&cfg, h, false, &mut r);
        let y = random_local(&cfg, h, false, &mut r);
        let xy = &x * &y;
        assert!(xy.support_horizon() <= h);
        for slot in h..3 {
            let a = qstop_core::random::gaussian_matrix(2, 2, &mut r);
            let local = slot_operator(&cfg, slot, &a);
            let local = match local {
                Ok(op) => op,
                Err(_) => continue,
            };
            let comm = xy.matrix() * local.matrix() - local.matrix() * xy.matrix();
            assert!(max_abs(&comm) < 1e-10, "h={h} slot={slot}");
        }
    }
}

#[test]
fn p_tail_projections() {
    let cfg = grid(3, 2, 1, 1);
    let mut q = CMatrix::zeros(2, 2);
    q[(0, 0)] = C64::new(0.5, 0.0);
    q[(0, 1)] = C64::new(0.5, 0.0);
    q[(1, 0)] = C64::new(0.5, 0.0);
    q[(1, 1)] = C64::new(0.5, 0.0);
    let p = OneParticleProjection::new(q.clone()).unwrap();
    for s in 0..=3 {
        let ps = p_tail_projection(&cfg, &p, s).unwrap();
        assert!(projection_defect(ps.matrix()) < 1e-14);
        for t in 0..=3 {
            let prod = &ps * &p_tail_projection(&cfg, &p, t).unwrap();
            assert!(close(prod.matrix(), p_tail_projection(&cfg, &p, s.min(t)).unwrap().matrix(), 1e-14));
        }
    }
    // P_{[t} ε(f) = ε(f before t + p f from t)
    let f = step(&cfg, &[&[0.4, 0.1], &[-0.3, 0.5], &[0.2, 0.2]]);
    for t in 0..=3 {
        let mut g = f.clone();
        for j in t..3 {
            g.values[j] = f.map_channels(&q).values[j].clone();
        }
        let lhs = p_tail_projection(&cfg, &p, t).unwrap().apply(&exponential_vector(&cfg, &f).unwrap()).unwrap();
        let rhs = exponential_vector(&cfg, &g).unwrap();
        assert!(close_vec(lhs.amplitudes(), rhs.amplitudes(), 1e-14));
    }
    assert!(OneParticleProjection::new(identity(2) * C64::new(0.5, 0.0)).is_err());
}

#[test]
fn second_quantization_is_a_representation() {
    let mut r = rng(9);
    for (d, cap) in [(1, 3), (2, 2), (3, 1)] {
        let a = qstop_core::random::gaussian_matrix(d, d, &mut r);
        let b = qstop_core::random::gaussian_matrix(d, d, &mut r);
        let ga = second_quantize_slot(d, cap, &a);
        let gb = second_quantize_slot(d, cap, &b);
        assert!(close(&(&ga * &gb), &second_quantize_slot(d, cap, &(&a * &b)), 1e-10));
        assert!(close(&ga.adjoint(), &second_quantize_slot(d, cap, &a.adjoint()), 1e-12));
    }
    // single-channel oracle: Γ(c) is diag(c^k)
    let c = C64::new(0.3, 0.8);
    let g = second_quantize_slot(1, 3, &CMatrix::from_element(1, 1, c));
    for k in 0..4 {
        assert!((g[(k, k)] - c.powu(k as u32)).norm() < 1e-15);
    }
}

#[test]
fn truncation_error_shrinks_with_cap() {
    // real f, g: every per-slot series has non-negative terms
    let base = grid(3, 2, 1, 1);
    let f = step(&base, &[&[0.8, 0.3], &[0.5, -0.2], &[0.1, 0.4]]);
    let g = step(&base, &[&[0.6, 0.2], &[0.4, -0.5], &[0.3, 0.3]]);
    assert!(f.norm(base.dt) <= 1.0 && g.norm(base.dt) <= 1.0);
    let exact = f.inner(&g, base.dt).exp();
    let mut last = f64::INFINITY;
    for cap in 0..=4 {
        let cfg = base.with_cap(cap).unwrap();
        let ef = exponential_vector(&cfg, &f).unwrap();
        let eg = exponential_vector(&cfg, &g).unwrap();
        let err = (ef.inner(&eg) - exact).norm();
        assert!(err <= last, "cap={cap}: {err} > {last}");
        last = err;
    }
    assert!(last < 1e-5);
}

#[test]
fn taylor_remainder_single_slot() {
    let base = qstop_core::SliceConfig::new(1, 0.1, 1, 1, 1).unwrap();
    let f = step(&base, &[&[1.0]]);
    let x: f64 = 0.1;
    for (cap, order) in [(1, x * x / 2.0), (2, x.powi(3) / 6.0)] {
        let cfg = base.with_cap(cap).unwrap();
        let e = exponential_vector(&cfg, &f).unwrap();
        let err = (e.norm().powi(2) - x.exp()).abs();
        assert!(err > order && err < order * 1.1, "cap={cap} err={err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn split_join_round_trip(seed in any::<u64>(), t in 0usize..=4) {
        let cfg = grid(4, 1, 2, 1);
        let mut r = rng(seed);
        let v = random_vector(&cfg, 4, &mut r);
        let m = v.tensor_split(t).unwrap();
        let back = FockVector::tensor_join(&cfg, &m, t).unwrap();
        prop_assert_eq!(back.amplitudes(), v.amplitudes());
        prop_assert!((m.norm_squared() - v.norm().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn operator_horizon_never_grows(seed in any::<u64>(), h1 in 0usize..=3, h2 in 0usize..=3) {
        let cfg = grid(3, 1, 1, 1);
        let mut r = rng(seed);
        let x = random_local(&cfg, h1, false, &mut r);
        let y = random_local(&cfg, h2, false, &mut r);
        let h = h1.max(h2);
        prop_assert!((&x * &y).support_horizon() <= h);
        prop_assert!((&x + &y).support_horizon() <= h);
        let inferred = FockOperator::from_matrix(&cfg, (&x * &y).into_matrix(), false).unwrap();
        prop_assert!(inferred.support_horizon() <= h);
    }

    #[test]
    fn kernel_oracle(seed in any::<u64>(), d in 1usize..=2, cap in 0usize..=3) {
        let cfg = grid(2, d, cap, 1);
        let mut r = rng(seed);
        let f = qstop_core::random::random_step_function(&cfg, 2, 1.0, &mut r);
        let g = qstop_core::random::random_step_function(&cfg, 2, 1.0, &mut r);
        let lhs = exponential_vector(&cfg, &f).unwrap().inner(&exponential_vector(&cfg, &g).unwrap());
        prop_assert!((lhs - truncated_kernel(&cfg, &f, &g)).norm() < 1e-12);
    }
}
