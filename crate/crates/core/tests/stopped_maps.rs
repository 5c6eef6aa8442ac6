mod common;

use common::*;
use proptest::prelude::*;
use qstop_core::linalg::{identity, isometry_defect, kron, max_abs, projection_defect, rank_above};
use qstop_core::random::{gaussian_matrix, random_atom_times, random_step_function, random_stop_time};
use qstop_core::secondquant::slot_number_operator;
use qstop_core::stopped::{
    embed_pre_s, stopped_flow, stopped_flow_on, stopped_projection, stopped_projection_on, stopped_shift,
    stopped_shift_on, Factorization,
};
use qstop_core::{
    conditional_vacuum, exponential_vector, shift, CMatrix, DiscreteStopTime, FockOperator, FockVector, SliceConfig,
    StoppedBundle, Tail, C64,
};

fn two_atom(cfg: &SliceConfig, seed: u64, max_atom: usize) -> DiscreteStopTime {
    let mut r = rng(seed);
    loop {
        let s = random_stop_time(cfg, &random_atom_times(max_atom, 2, &mut r), &mut r).unwrap();
        if s.atoms().len() == 2 {
            return s;
        }
    }
}

/// Operators localized on slots `< h`, one per matrix unit of the local algebra.
fn local_units(cfg: &SliceConfig, h: usize, ampliated: bool) -> Vec<FockOperator> {
    let n = cfg.ini_dim(ampliated) * cfg.prefix_dim(h);
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let mut m = CMatrix::zeros(n, n);
            m[(a, b)] = C64::new(1.0, 0.0);
            out.push(FockOperator::from_local(cfg, &m, h, Tail::Identity, ampliated).unwrap());
        }
    }
    out
}

#[test]
fn first_arrival_projection_by_hand() {
    let cfg = grid(2, 1, 1, 1);
    let fa = DiscreteStopTime::first_arrival(&cfg, 2).unwrap();
    let e = stopped_projection(&fa);
    // P1 E1 keeps |1,0⟩ (index 1); P2 keeps |0,·⟩ (indices 0, 2)
    let expected = CMatrix::from_diagonal(&qstop_core::CVector::from_vec(
        [1.0, 1.0, 1.0, 0.0].iter().map(|&x| C64::new(x, 0.0)).collect(),
    ));
    assert_eq!(e.matrix(), &expected);
    let amp = e.ampliate().unwrap();
    assert_eq!(amp.matrix(), &kron(&identity(1), &expected));
}

#[test]
fn deterministic_bundle() {
    let cfg = grid(4, 1, 1, 2);
    for t in 1..=4 {
        let d = DiscreteStopTime::deterministic(&cfg, t).unwrap();
        let bundle = StoppedBundle::new(&d).unwrap();
        assert_eq!(bundle.e_s.matrix(), conditional_vacuum(&cfg, t).unwrap().matrix());
        assert_eq!(bundle.gamma_s.matrix(), shift(&cfg, t).unwrap().matrix());
        // j_δt is the canonical join at t
        let f = &bundle.factorization;
        let mut r = rng(t as u64);
        let x_local = gaussian_matrix(cfg.prefix_dim(t), 1, &mut r);
        let y = random_vector(&cfg, 4 - t, &mut r);
        let mut x_amps = qstop_core::CVector::zeros(cfg.fock_dim());
        x_amps.rows_mut(0, x_local.nrows()).copy_from(&x_local.column(0));
        let x = FockVector::from_amplitudes(&cfg, x_amps, false).unwrap();
        let y_local = y.amplitudes().rows(0, cfg.prefix_dim(4 - t)).clone_owned();
        let joined = FockVector::tensor_join(&cfg, &(&x_local * y_local.transpose()), t).unwrap();
        let via_j = f.apply(&x, &y).unwrap();
        assert!(close_vec(via_j.amplitudes(), joined.amplitudes(), 1e-12));
    }
}

#[test]
fn stopped_shift_is_isometric() {
    let cfg = grid(5, 1, 1, 1);
    let s = two_atom(&cfg, 3, 3);
    let g = stopped_shift(&s).unwrap();
    assert_eq!(g.admissible_horizon(), 2);
    let gram = g.matrix().adjoint() * g.matrix();
    assert!(close(&gram, g.domain_projection().unwrap().matrix(), TOL));
    let vac = FockVector::vacuum(&cfg);
    assert!((g.apply(&vac).unwrap().norm() - 1.0).abs() < 1e-14);
    let mut r = rng(4);
    let f = random_step_function(&cfg, 2, 1.0, &mut r);
    let e = exponential_vector(&cfg, &f).unwrap();
    assert!((g.apply(&e).unwrap().norm() - e.norm()).abs() < 1e-12);
    let too_long = random_step_function(&cfg, 3, 1.0, &mut r);
    assert!(g.apply(&exponential_vector(&cfg, &too_long).unwrap()).is_err());
}

#[test]
fn factorization_on_exponential_vectors() {
    // j_S(E_S ε(f) ⊗ ε(g)) = Σ_j S({t_j}) ε(f·1_{[0,t_j)} + θ_{t_j} g)
    let cfg = grid(5, 1, 2, 1);
    let s = two_atom(&cfg, 5, 3);
    let f_s = Factorization::new(&s).unwrap();
    let mut r = rng(6);
    let f = random_step_function(&cfg, 5, 0.8, &mut r);
    let g = random_step_function(&cfg, 2, 0.8, &mut r);
    let e_s = stopped_projection(&s);
    let x = e_s.apply(&exponential_vector(&cfg, &f).unwrap()).unwrap();
    let y = exponential_vector(&cfg, &g).unwrap();
    let lhs = f_s.apply(&x, &y).unwrap();
    let mut rhs = qstop_core::CVector::zeros(cfg.fock_dim());
    for atom in s.atoms() {
        let mut h = f.restrict_before(atom.time);
        let moved = g.shifted(atom.time);
        for j in atom.time..cfg.n_slots {
            h.values[j] = moved.values[j].clone();
        }
        rhs += atom.projection.matrix() * exponential_vector(&cfg, &h).unwrap().amplitudes();
    }
    assert!(close_vec(lhs.amplitudes(), &rhs, 1e-12));
}

#[test]
fn sj_on_full_operator_bases() {
    let cfg = grid(5, 1, 1, 2);
    let s = two_atom(&cfg, 7, 3);
    let f = Factorization::new(&s).unwrap();
    assert!(isometry_defect(f.matrix()) <= TOL);
    assert!(isometry_defect(&f.ampliated()) <= TOL);
    let h = f.post_horizon();
    let j = f.matrix();
    let jt = f.ampliated();
    for x in local_units(&cfg, h, false) {
        let flowed = stopped_flow(&s, &x).unwrap();
        assert!(close(&(flowed.matrix() * j), &f.intertwined(&x).unwrap(), TOL));
        let pi = f.range_projection();
        assert!(close(&(&pi * flowed.matrix() * &pi), &f.flow_representation(&x).unwrap(), TOL));
    }
    for z in local_units(&cfg, h, true) {
        let flowed = stopped_flow(&s, &z).unwrap();
        assert!(close(&(flowed.matrix() * &jt), &f.intertwined(&z).unwrap(), TOL));
    }
}

#[test]
fn sj_with_number_operator() {
    let cfg = grid(4, 1, 2, 1);
    let s = two_atom(&cfg, 8, 2);
    let f = Factorization::new(&s).unwrap();
    let n0 = slot_number_operator(&cfg, 0).unwrap();
    let flowed = stopped_flow(&s, &n0).unwrap();
    assert!(close(&(flowed.matrix() * f.matrix()), &f.intertwined(&n0).unwrap(), TOL));
}

#[test]
fn embedding_pre_stop_operators() {
    let cfg = grid(5, 1, 1, 1);
    let s = two_atom(&cfg, 9, 3);
    let f = Factorization::new(&s).unwrap();
    let b = f.pre_basis();
    let pi = f.range_projection();
    let r = f.pre_dim();
    assert!(close(embed_pre_s(&f, &identity(r)).unwrap().matrix(), &pi, TOL));
    for atom in s.atoms() {
        let coords = b.adjoint() * atom.projection.matrix() * b;
        let embedded = embed_pre_s(&f, &coords).unwrap();
        assert!(close(embedded.matrix(), &(atom.projection.matrix() * &pi), TOL));
    }
    let mut rg = rng(10);
    let a = gaussian_matrix(r, r, &mut rg);
    let embedded = embed_pre_s(&f, &a).unwrap();
    let x = random_local(&cfg, f.post_horizon(), false, &mut rg);
    let flowed = stopped_flow(&s, &x).unwrap();
    let comm = embedded.matrix() * flowed.matrix() - flowed.matrix() * embedded.matrix();
    assert!(max_abs(&comm) <= TOL);
    assert!(embed_pre_s(&f, &identity(r + 1)).is_err());
}

#[test]
fn pre_stop_dimension() {
    let cfg = grid(5, 1, 1, 1);
    for seed in 0..6 {
        let s = two_atom(&cfg, 20 + seed, 4);
        let e = stopped_projection(&s);
        let trace: f64 = (0..cfg.fock_dim()).map(|i| e.matrix()[(i, i)].re).sum();
        let f = Factorization::new(&s).unwrap();
        assert_eq!(f.pre_dim(), trace.round() as usize);
        assert_eq!(f.pre_dim(), rank_above(e.matrix(), 0.5));
    }
}

#[test]
fn flow_fixes_initial_operators() {
    let cfg = grid(4, 1, 1, 2);
    let s = two_atom(&cfg, 11, 3);
    let mut r = rng(12);
    let a = FockOperator::initial(&cfg, &gaussian_matrix(2, 2, &mut r)).unwrap();
    assert!(close(stopped_flow(&s, &a).unwrap().matrix(), a.matrix(), TOL));
    let x = random_local(&cfg, 2, false, &mut r);
    assert!(stopped_flow(&s, &x).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stopped_objects(seed in any::<u64>(), m in 1usize..=4) {
        let cfg = grid(5, 1, 1, 2);
        let mut r = rng(seed);
        let s = random_stop_time(&cfg, &random_atom_times(m, 3, &mut r), &mut r).unwrap();
        let e = stopped_projection(&s);
        prop_assert!(projection_defect(e.matrix()) <= TOL);
        let g = stopped_shift(&s).unwrap();
        let gram = g.matrix().adjoint() * g.matrix();
        prop_assert!(close(&gram, g.domain_projection().unwrap().matrix(), TOL));
        let h = 5 - s.max_atom();
        let x = random_local(&cfg, h, false, &mut r);
        let y = random_local(&cfg, h, false, &mut r);
        let fx = stopped_flow(&s, &x).unwrap();
        let fy = stopped_flow(&s, &y).unwrap();
        prop_assert!(close((&fx * &fy).matrix(), stopped_flow(&s, &(&x * &y)).unwrap().matrix(), 1e-9));
        prop_assert!(close(&fx.matrix().adjoint(), stopped_flow(&s, &x.adjoint()).unwrap().matrix(), 1e-12));
        let one = stopped_flow(&s, &FockOperator::identity(&cfg)).unwrap();
        prop_assert!(close(one.matrix(), &identity(32), 1e-12));
    }

    #[test]
    fn refinement_stability(seed in any::<u64>()) {
        let cfg = grid(5, 1, 1, 1);
        let mut r = rng(seed);
        let s = random_stop_time(&cfg, &random_atom_times(3, 2, &mut r), &mut r).unwrap();
        let atoms = s.times();
        let mut finer: Vec<usize> = (1..=5).collect();
        finer.retain(|t| atoms.contains(t) || (t % 2 == 0));
        let x = random_local(&cfg, 2, false, &mut r);
        for pi in [atoms.clone(), (1..=5).collect::<Vec<_>>(), finer] {
            let e = stopped_projection_on(&s, &pi).unwrap();
            prop_assert!(close(e.matrix(), stopped_projection(&s).matrix(), 1e-12));
            let g = stopped_shift_on(&s, &pi).unwrap();
            prop_assert!(close(g.matrix(), stopped_shift(&s).unwrap().matrix(), 1e-12));
            let fx = stopped_flow_on(&s, &pi, &x).unwrap();
            prop_assert!(close(fx.matrix(), stopped_flow(&s, &x).unwrap().matrix(), 1e-12));
        }
    }

    #[test]
    fn conditional_vacuum_of_convolution(seed in any::<u64>()) {
        let cfg = grid(5, 1, 1, 1);
        let mut r = rng(seed);
        let s = random_stop_time(&cfg, &random_atom_times(2, 2, &mut r), &mut r).unwrap();
        let t = random_stop_time(&cfg, &random_atom_times(3, 2, &mut r), &mut r).unwrap();
        let lhs = stopped_projection(&s.convolve(&t).unwrap());
        let rhs = stopped_flow(&s, &stopped_projection(&t)).unwrap();
        prop_assert!(close(lhs.matrix(), rhs.matrix(), TOL));
    }
}
