use margin_forge::qsim::amplitude::{self, AmplitudeCircuit};
use margin_forge::qsim::density::{self, DensityState};
use margin_forge::qsim::state::{prepare_real_state, tilde_states};
use margin_forge::qsim::walk::{self, WalkContext};
use margin_forge::qsim::{self, C64};
use margin_forge::rng;
use margin_forge::svm::{self, KernelSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn random_density<R: Rng>(n: usize, rng: &mut R) -> DensityState {
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityState::new(m / t).unwrap()
}

/// Swap on C^n (x) C^n as an explicit n^2 x n^2 permutation matrix.
fn swap_matrix(n: usize) -> DMatrix<C64> {
    let mut s = DMatrix::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            s[(j * n + i, i * n + j)] = C64::new(1.0, 0.0);
        }
    }
    s
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

fn partial_trace_first(m: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |r, c| (0..n).map(|i| m[(i * n + r, i * n + c)]).sum())
}

#[test]
fn density_step_matches_brute_force_partial_trace() {
    let mut r = rng::stream(3, "density-bf");
    for n in [2, 3, 4] {
        let rho = random_density(n, &mut r);
        let sigma = random_density(n, &mut r);
        let dt = 0.37;
        let u = (swap_matrix(n) * C64::new(0.0, -dt)).exp();
        let joint = kron(rho.matrix(), sigma.matrix());
        let evolved = &u * joint * u.adjoint();
        let oracle = partial_trace_first(&evolved, n);
        let got = qsim::density_exponentiation_step(&rho, &sigma, dt).unwrap();
        assert!((got.matrix() - oracle).norm() < 1e-12);
    }
}

#[test]
fn density_step_first_order_term() {
    let mut r = rng::stream(4, "density-richardson");
    let rho = random_density(3, &mut r);
    let sigma = random_density(3, &mut r);
    let comm = rho.matrix() * sigma.matrix() - sigma.matrix() * rho.matrix();
    let mut ratios = Vec::new();
    for dt in [1e-2, 1e-3, 1e-4] {
        let got = qsim::density_exponentiation_step(&rho, &sigma, dt).unwrap();
        let first = sigma.matrix() - &comm * C64::new(0.0, dt);
        ratios.push((got.matrix() - first).norm() / (dt * dt));
    }
    // The remainder is O(dt^2) with a stable constant.
    assert!(ratios.iter().all(|c| (c / ratios[2] - 1.0).abs() < 0.05), "{ratios:?}");
}

#[test]
fn iterated_exponentiation_approaches_unitary_evolution() {
    let mut r = rng::stream(5, "density-iter");
    let rho = random_density(2, &mut r);
    let sigma = random_density(2, &mut r);
    let exact = density::exact_evolution(&rho, &sigma, 1.0).unwrap();
    let e10 = density::distance(&density::simulate_exponentiation(&rho, &sigma, 1.0, 10).unwrap(), &exact);
    let e100 = density::distance(&density::simulate_exponentiation(&rho, &sigma, 1.0, 100).unwrap(), &exact);
    assert!(e100 < e10 / 5.0);
}

#[test]
fn swap_test_reproduces_tilde_inner() {
    let mut r = rng::stream(6, "swap");
    for _ in 0..20 {
        let n = r.random_range(2..6);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| r.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let sol = svm::fit(&pts, &y, KernelSpec::Linear, 10.0).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.random::<f64>() - 0.5).collect();
        let (u, v) = tilde_states(&sol, &pts, &x).unwrap();
        let p = qsim::swap_test_probability(&u, &v).unwrap();
        let inner = svm::tilde_inner(&sol, &pts, &x).unwrap();
        assert!((p - 0.5 * (1.0 - inner)).abs() < 1e-10);
    }
}

#[test]
fn full_simulation_matches_closed_form_distribution() {
    for j in [8u64, 16, 64] {
        for a in [0.0, 0.1, 0.25, 0.5, 0.83, 1.0] {
            let c = AmplitudeCircuit::from_probability(a).unwrap();
            let full = amplitude::full_simulation_distribution(&c, j).unwrap();
            let closed = amplitude::outcome_distribution(a, j);
            for (f, g) in full.iter().zip(&closed) {
                assert!((f - g).abs() < 1e-9, "J = {j}, a = {a}");
            }
        }
    }
}

#[test]
fn full_simulation_on_a_wider_register() {
    // Three work qubits, marked probability spread over several basis states.
    let psi: Vec<C64> = [0.1, 0.3, 0.2, 0.5, 0.4, 0.3, 0.5, 0.3].iter().map(|&v| C64::new(v, 0.0)).collect();
    let n = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let psi: Vec<C64> = psi.into_iter().map(|z| z / n).collect();
    let marked = vec![false, true, false, true, false, false, true, false];
    let c = AmplitudeCircuit::new(psi, marked).unwrap();
    let full = amplitude::full_simulation_distribution(&c, 32).unwrap();
    let closed = amplitude::outcome_distribution(c.probability(), 32);
    for (f, g) in full.iter().zip(&closed) {
        assert!((f - g).abs() < 1e-9);
    }
    assert!(amplitude::full_simulation_distribution(&c, 256).is_err());
}

#[test]
fn sampled_outcomes_follow_distribution() {
    let (a, j) = (0.3, 16u64);
    let probs = amplitude::outcome_distribution(a, j);
    let mut r = rng::stream(8, "ae-sample");
    let draws = 40_000;
    let mut counts = vec![0usize; j as usize];
    for _ in 0..draws {
        counts[amplitude::sample_outcome(a, j, &mut r) as usize] += 1;
    }
    for (c, p) in counts.iter().zip(&probs) {
        let expected = p * draws as f64;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!((*c as f64 - expected).abs() < 5.0 * sd, "count {c} vs {expected}");
    }
}

#[test]
fn median_lemma_bound_holds_empirically() {
    // Per-trial success 0.75; the median of beta trials fails when most trials fail.
    let delta = 0.25;
    let mut r = rng::stream(9, "median");
    for beta in [1u32, 3, 5, 7] {
        let trials = 10_000;
        let mut fail = 0;
        for _ in 0..trials {
            let est: Vec<f64> = (0..beta).map(|_| if r.random::<f64>() < delta { 1.0 } else { 0.0 }).collect();
            if amplitude::median_amplify(&est).unwrap() != 0.0 {
                fail += 1;
            }
        }
        let freq = fail as f64 / trials as f64;
        let se = (freq * (1.0 - freq) / trials as f64).sqrt();
        assert!(freq <= amplitude::median_failure_bound(delta, beta) + 3.0 * se, "beta = {beta}");
    }
}

#[test]
fn median_lemma_tail_exceeds_two_to_minus_beta_minus_one_at_success_three_quarters() {
    // Exact binomial tail for beta = 3, per-trial failure 1/4: P(at least 2 of 3 fail).
    let tail = 3.0 * 0.25f64.powi(2) * 0.75 + 0.25f64.powi(3);
    assert!((tail - 0.15625).abs() < 1e-15);
    assert!(tail > 2f64.powi(-4));
    assert!(tail <= amplitude::median_failure_bound(0.25, 3));
    // The 2^{-beta-1} form does hold once per-trial failure is small enough.
    for beta in [1u32, 3, 5, 9] {
        assert!(amplitude::median_failure_bound(0.06, beta) <= 2f64.powi(-(beta as i32) - 1));
    }
}

#[test]
fn isometry_is_norm_preserving() {
    let mut r = rng::stream(10, "iso");
    for n in [1usize, 2, 5, 9] {
        let mut m = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() * 2.0 - 1.0);
        m = (&m + m.transpose()) * 0.5;
        for j in 0..n {
            m[(j, j)] = m[(j, j)].abs();
        }
        let ctx = WalkContext::new(m, None).unwrap();
        for _ in 0..5 {
            let v = DVector::from_fn(n, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
            let tv = ctx.isometry_apply(&v);
            assert!((tv.norm() - v.norm()).abs() < 1e-12);
            let back = ctx.isometry_adjoint(&tv);
            assert!((back - &v).norm() < 1e-12);
        }
    }
}

fn symmetric_strategy() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=16).prop_flat_map(|n| {
        proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            let mut m = (&a + a.transpose()) * 0.5;
            for j in 0..n {
                m[(j, j)] = m[(j, j)].abs();
            }
            m
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chebyshev_block_matches_dense(m in symmetric_strategy(), seed in any::<u64>()) {
        let n = m.nrows();
        let mut r = rng::stream(seed, "prop-walk");
        let v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let ctx = WalkContext::new(m, None).unwrap();
        let (psi, _) = prepare_real_state(&v).unwrap();
        let out = qsim::chebyshev_apply(&ctx, &psi).unwrap();
        let dense = ctx.m_bar() * psi.leading(n).unwrap().map(|z| z.re);
        for i in 0..n {
            prop_assert!((out.block[i] - C64::new(dense[i], 0.0)).norm() < 1e-9);
        }
        prop_assert!((out.a0 * out.a0 + out.orthogonal_norm.powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn states_stay_normalized(v in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
        let (s, n) = prepare_real_state(&v).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-9);
        let direct = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - direct).abs() <= 1e-12 * direct);
    }
}

#[test]
fn chebyshev_norm_recovery_with_unit_scale() {
    let mut r = rng::stream(11, "cheb-norm");
    let a = DMatrix::from_fn(4, 4, |_, _| r.random::<f64>());
    let m = (&a + a.transpose()) * 0.5;
    let ctx = WalkContext::new(m.clone(), Some(1.0)).unwrap();
    let v = [0.5, -1.0, 2.0, 0.25];
    let (psi, vn) = prepare_real_state(&v).unwrap();
    let out = qsim::chebyshev_apply(&ctx, &psi).unwrap();
    let dense = (&m * DVector::from_column_slice(&v)).norm();
    assert!((walk::recover_norm_chebyshev(out.a0, vn, &ctx) - dense).abs() < 1e-12 * dense);
}
