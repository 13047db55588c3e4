//! One PASS/FAIL line per acceptance criterion. Every tolerance is pinned below.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use margin_forge::data::{self, LabeledDataset, LabeledPoint, ManifoldKind, ManifoldSpec, PNorm};
use margin_forge::dequant::fkv::best_rank_residual;
use margin_forge::dequant::{fkv_low_rank, DequantConfig, FkvConfig, SqMatrix};
use margin_forge::informativeness::{self, Backend, QsimConfig, ScoreSettings};
use margin_forge::qsim::amplitude::{self, AeConfig, AeMode, AmplitudeCircuit};
use margin_forge::qsim::density::{self, DensityState};
use margin_forge::qsim::state::prepare_real_state;
use margin_forge::qsim::walk::{self, WalkContext};
use margin_forge::qsim::{self, C64};
use margin_forge::robustness::{self, Cover, CoverMethod};
use margin_forge::strategies::{self, even_pool, run_trials, StrategyKind, StrategyParams, SweepParam, DEFAULT_M_MAX};
use margin_forge::{rng, svm};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

// Criterion 1
const C1_INSTANCES: u64 = 50;
const C1_AE_J: u64 = 1 << 14;
const C1_EIG_BITS: u32 = 24;
const C1_GAMMA: f64 = 10.0;
const C1_DEQUANT_REL: f64 = 0.05;
const C1_DEQUANT_RATE: f64 = 0.95;
const C1_BUDGET: Duration = Duration::from_secs(120);
// Criterion 2
const C2_MATRICES: u64 = 200;
const C2_EIG_BITS: u32 = 20;
const C2_FIDELITY: f64 = 1.0 - 1e-6;
const C2_BUDGET: Duration = Duration::from_secs(60);
// Criterion 3
const C3_MATRICES: u64 = 200;
const C3_TOL: f64 = 1e-9;
// Criterion 4
const C4_J: [u64; 2] = [64, 256];
// Criterion 5
const C5_STEPS: [usize; 3] = [10, 100, 1000];
const C5_SLOPE: f64 = -1.0;
const C5_SLOPE_TOL: f64 = 0.2;
// Criterion 6
const C6_C: [f64; 3] = [2.0, 10.0, 100.0];
const C6_BETA: [f64; 3] = [2.0, 3.0, 5.0];
const C6_TRIALS: u64 = 2000;
const C6_POOL: usize = 4096;
const C6_SIGMA: f64 = 0.01;
const C6_EPSILON: f64 = 0.2;
const C6_BUDGET: Duration = Duration::from_secs(600);
// Criterion 7
const C7_TRIALS: u64 = 200;
const C7_TOL: f64 = 0.3;
// Criterion 8
const C8_TRIALS: u64 = 500;
const C8_EPSILON: f64 = 0.1;
const C8_DELTA: f64 = 0.1;
// Criterion 9
const C9_R_P: f64 = 1.0;
const C9_EPSILON0: f64 = 0.2;
const C9_DELTA: f64 = 0.5;
const C9_BAD_DELTA: f64 = 1.5;
const C9_TRIALS: usize = 10_000;
// Criterion 10
const C10_TRIALS: u64 = 10_000;
const C10_A: [f64; 3] = [0.1, 0.25, 0.5];
const C10_J: u64 = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_instance(seed: u64) -> (LabeledDataset, Vec<f64>) {
    let mut r = rng::substream(seed, "acceptance/instance", 0);
    let m = r.random_range(1..=4);
    let n = r.random_range(2..=8);
    let points = (0..n)
        .map(|i| {
            let class = i % 2;
            let shift = if class == 0 { 0.5 } else { -0.5 };
            LabeledPoint::of_class((0..m).map(|_| r.random::<f64>() * 2.0 - 1.0 + shift).collect(), class)
        })
        .collect();
    let x = (0..m).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
    (LabeledDataset::new(points, m).unwrap(), x)
}

/// `1.01 / lambda_min` of `F / |F|`, the effective condition number the qsim backend uses.
fn kappa_eff(points: &[Vec<f64>], gamma: f64) -> f64 {
    let f = svm::assemble_f(&svm::kernel_matrix(points, svm::KernelSpec::Linear).unwrap(), gamma).unwrap();
    let ev = SymmetricEigen::new(f).eigenvalues;
    let max = ev.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, l| m.min(l.abs()));
    1.01 * max / min
}

fn dequant_rate(gamma: f64, seeds: u64) -> (u64, u64) {
    let settings = ScoreSettings { gamma, ..Default::default() };
    let backend = Backend::Dequant(DequantConfig::default());
    let mut ok = 0;
    for seed in 0..seeds {
        let (s, x) = random_instance(seed);
        let exact = informativeness::score(&Backend::Exact, &settings, &s, &x, &mut rng::stream(seed, "acceptance/exact")).unwrap();
        if let Ok(d) = informativeness::score(&backend, &settings, &s, &x, &mut rng::stream(seed, "acceptance/dequant")) {
            if (d.value - exact.value).abs() <= C1_DEQUANT_REL * exact.value.abs() {
                ok += 1;
            }
        }
    }
    (ok, seeds)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let qcfg = QsimConfig { kappa_eff: None, eig_bits: C1_EIG_BITS, ae: AeConfig::new(C1_AE_J, 1, AeMode::Grid) };
    let settings = ScoreSettings { gamma: C1_GAMMA, ..Default::default() };
    let mut qsim_ok = 0;
    let mut worst = 0.0f64;
    for seed in 0..C1_INSTANCES {
        let (s, x) = random_instance(seed);
        let (points, y) = s.labeled();
        let exact = informativeness::score(&Backend::Exact, &settings, &s, &x, &mut rng::stream(seed, "acceptance/exact")).unwrap();
        let q = informativeness::score(&Backend::Qsim(qcfg), &settings, &s, &x, &mut rng::stream(seed, "acceptance/qsim")).unwrap();
        let mut aug = points.clone();
        aug.push(x.clone());
        let kappa = kappa_eff(&points, C1_GAMMA).max(kappa_eff(&aug, C1_GAMMA));
        let eps_total = qcfg.amplitude_error() + (-(C1_EIG_BITS as f64)).exp2() * kappa + 1.0 / (y.len() as f64).sqrt();
        let rel = (q.value - exact.value).abs() / exact.value.abs();
        worst = worst.max(rel / eps_total);
        if rel <= eps_total {
            qsim_ok += 1;
        }
    }
    let (deq_ok, deq_n) = dequant_rate(C1_GAMMA, C1_INSTANCES);
    let elapsed = start.elapsed();
    let (hard_ok, hard_n) = dequant_rate(1e6, 10);
    println!("INFO criterion 1: at gamma = 1e6 the dequant backend is within {C1_DEQUANT_REL} on {hard_ok}/{hard_n} seeds");
    let pass = qsim_ok == C1_INSTANCES && deq_ok as f64 >= C1_DEQUANT_RATE * deq_n as f64 && elapsed <= C1_BUDGET;
    outcome(
        pass,
        format!(
            "qsim within eps_total on {qsim_ok}/{C1_INSTANCES} (worst error/eps_total {worst:.3e}); dequant within {C1_DEQUANT_REL} on {deq_ok}/{deq_n} (need {C1_DEQUANT_RATE}); {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn random_orthogonal<R: Rng>(n: usize, r: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| r.sample::<f64, _>(StandardNormal)).qr().q()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let kappa = 20.0;
    let mut worst = 1.0f64;
    for t in 0..C2_MATRICES {
        let mut r = rng::substream(2, "acceptance/hhl", t);
        let n = r.random_range(1..=8);
        let q = random_orthogonal(n, &mut r);
        let lambda = DVector::from_fn(n, |_, _| 1.0 / kappa + r.random::<f64>() * (1.0 - 1.0 / kappa));
        let f = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
        let f = (&f + f.transpose()) * 0.5;
        let y: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let res = qsim::hhl_solve(&f, &y, kappa, C2_EIG_BITS).unwrap();
        let direct = f.clone().lu().solve(&DVector::from_vec(y)).unwrap();
        let direct = &direct / direct.norm();
        let got = res.solution.leading(n).unwrap().map(|z| z.re);
        worst = worst.min(got.dot(&direct).powi(2));
    }
    // Diagonal matrices: exactly the components below 1/kappa vanish.
    let mut filter_ok = true;
    for t in 0..50u64 {
        let mut r = rng::substream(2, "acceptance/hhl-diag", t);
        let n = r.random_range(2..=8);
        let d: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { r.random::<f64>() }).collect();
        let y: Vec<f64> = (0..n).map(|_| 0.5 + r.random::<f64>()).collect();
        let f = DMatrix::from_diagonal(&DVector::from_vec(d.clone()));
        let res = qsim::hhl_solve(&f, &y, kappa, C2_EIG_BITS).unwrap();
        let sol = res.solution.leading(n).unwrap();
        let below = d.iter().filter(|&&l| l < 1.0 / kappa).count();
        filter_ok &= res.filtered == below;
        filter_ok &= d.iter().zip(sol.iter()).all(|(&l, z)| (l < 1.0 / kappa) == (z.norm() == 0.0));
    }
    let elapsed = start.elapsed();
    outcome(
        worst >= C2_FIDELITY && filter_ok && elapsed <= C2_BUDGET,
        format!("min fidelity {worst:.12} (need {C2_FIDELITY}); diagonal filtering exact: {filter_ok}; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn random_walk_matrix<R: Rng>(n: usize, r: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() * 2.0 - 1.0);
    let mut m = (&a + a.transpose()) * 0.5;
    for j in 0..n {
        m[(j, j)] = m[(j, j)].abs();
    }
    m
}

fn criterion_3() -> Outcome {
    let mut block_err = 0.0f64;
    let mut split_err = 0.0f64;
    for t in 0..C3_MATRICES {
        let mut r = rng::substream(3, "acceptance/walk", t);
        let n = r.random_range(1..=16);
        let ctx = WalkContext::new(random_walk_matrix(n, &mut r), None).unwrap();
        let v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
        let (psi, _) = prepare_real_state(&v).unwrap();
        let out = qsim::chebyshev_apply(&ctx, &psi).unwrap();
        let dense = ctx.m_bar() * psi.leading(n).unwrap().map(|z| z.re);
        for i in 0..n {
            block_err = block_err.max((out.block[i] - C64::new(dense[i], 0.0)).norm());
        }
        let eig = SymmetricEigen::new(ctx.m_bar());
        for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
            let u: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let (psi, _) = prepare_real_state(&u).unwrap();
            let out = qsim::chebyshev_apply(&ctx, &psi).unwrap();
            split_err = split_err.max((out.a0 - lambda.abs()).abs());
            split_err = split_err.max((out.orthogonal_norm - (1.0 - lambda * lambda).max(0.0).sqrt()).abs());
            for i in 0..n {
                split_err = split_err.max((out.block[i] - C64::new(lambda * u[i], 0.0)).norm());
            }
        }
    }
    outcome(
        block_err <= C3_TOL && split_err <= C3_TOL,
        format!("max block error {block_err:.2e}, max eigenvector split error {split_err:.2e} (tolerance {C3_TOL:e})"),
    )
}

/// Interval for `sqrt(a)` implied by an AE estimate within the bound of the true `a`.
fn within_ae_bound(a: f64, est: f64, j: u64) -> bool {
    (est - a).abs() <= amplitude::error_bound(a, j, 1) * (1.0 + 1e-12) + 1e-15
}

fn criterion_4() -> Outcome {
    let mut failures = 0;
    let mut checks = 0;
    for &j in &C4_J {
        let cfg = AeConfig::new(j, 1, AeMode::Grid);
        for t in 0..100u64 {
            let mut r = rng::substream(4, "acceptance/norm", t);
            // Chebyshev route.
            let n = r.random_range(2..=8);
            let m = random_walk_matrix(n, &mut r);
            let ctx = WalkContext::new(m.clone(), None).unwrap();
            let v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
            let (psi, vn) = prepare_real_state(&v).unwrap();
            let out = qsim::chebyshev_apply(&ctx, &psi).unwrap();
            let a = (out.a0 * out.a0).min(1.0);
            let est = amplitude::amplitude_estimate(&AmplitudeCircuit::from_probability(a).unwrap(), &cfg, &mut r).unwrap();
            let dense = (&m * DVector::from_vec(v)).norm();
            let scale = dense / out.a0;
            let recovered = walk::recover_norm_chebyshev(est.sqrt(), vn, &ctx);
            let bound = amplitude::error_bound(a, j, 1);
            let lo = (a - bound).max(0.0).sqrt() * scale;
            let hi = (a + bound).sqrt() * scale;
            checks += 1;
            if !(within_ae_bound(a, est, j) && recovered >= lo * (1.0 - 1e-12) && recovered <= hi * (1.0 + 1e-12)) {
                failures += 1;
            }

            // LCU route with random orthogonal terms.
            let terms = r.random_range(1..=4);
            let coeffs: Vec<f64> = (0..terms).map(|_| 0.2 + r.random::<f64>()).collect();
            let us: Vec<DMatrix<f64>> = (0..terms).map(|_| random_orthogonal(4, &mut r)).collect();
            let us_c: Vec<DMatrix<C64>> = us.iter().map(|u| u.map(|x| C64::new(x, 0.0))).collect();
            let v: Vec<f64> = (0..4).map(|_| r.random::<f64>() - 0.5).collect();
            let (psi, vn) = prepare_real_state(&v).unwrap();
            let res = qsim::lcu_apply(&coeffs, &us_c, &psi).unwrap();
            let mat = us.iter().zip(&coeffs).fold(DMatrix::zeros(4, 4), |acc, (u, c)| acc + u * *c);
            let dense = (&mat * DVector::from_vec(v)).norm();
            let a = (res.flag_amplitude * res.flag_amplitude).min(1.0);
            let est = amplitude::amplitude_estimate(&AmplitudeCircuit::from_probability(a).unwrap(), &cfg, &mut r).unwrap();
            let reg = (res.register_size as f64).sqrt();
            let recovered = qsim::recover_norm_lcu(est.sqrt() * reg, vn, &coeffs);
            let scale = dense / res.flag_amplitude;
            let bound = amplitude::error_bound(a, j, 1);
            let lo = (a - bound).max(0.0).sqrt() * scale;
            let hi = (a + bound).sqrt() * scale;
            checks += 1;
            if !(within_ae_bound(a, est, j) && recovered >= lo * (1.0 - 1e-12) && recovered <= hi * (1.0 + 1e-12)) {
                failures += 1;
            }
        }
    }
    // Endpoints: a = 0 always, a = 1 for even J, in every mode.
    let mut endpoints = true;
    let mut r = rng::stream(4, "acceptance/endpoints");
    for mode in [AeMode::Grid, AeMode::Sampled, AeMode::FullSimulation] {
        for &j in &C4_J {
            let cfg = AeConfig::new(j, 1, mode);
            for (a, want) in [(0.0, 0.0), (1.0, 1.0)] {
                let c = AmplitudeCircuit::from_probability(a).unwrap();
                for _ in 0..5 {
                    endpoints &= amplitude::amplitude_estimate(&c, &cfg, &mut r).unwrap() == want;
                }
            }
        }
    }
    outcome(failures == 0 && endpoints, format!("{} of {checks} recoveries outside the AE bound; endpoints exact: {endpoints}", failures))
}

fn random_density<R: Rng>(n: usize, r: &mut R) -> DensityState {
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    DensityState::new(rho / tr).unwrap()
}

fn criterion_5() -> Outcome {
    let instances = 10;
    let mut errors = vec![0.0; C5_STEPS.len()];
    for t in 0..instances {
        let mut r = rng::substream(5, "acceptance/density", t);
        let rho = random_density(2, &mut r);
        let sigma = random_density(2, &mut r);
        let exact = density::exact_evolution(&rho, &sigma, 1.0).unwrap();
        for (e, &steps) in errors.iter_mut().zip(&C5_STEPS) {
            *e += density::distance(&density::simulate_exponentiation(&rho, &sigma, 1.0, steps).unwrap(), &exact) / instances as f64;
        }
    }
    let xs: Vec<f64> = C5_STEPS.iter().map(|&s| (s as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = strategies::fit_slope(&xs, &ys).unwrap();
    outcome(
        (slope - C5_SLOPE).abs() <= C5_SLOPE_TOL,
        format!("mean errors {errors:?} at T = {C5_STEPS:?}; slope {slope:.3} (need {C5_SLOPE} +- {C5_SLOPE_TOL})"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let means = even_pool(C6_POOL);
    let kinds = [
        (StrategyKind::GreedyDeterministic, 0.0),
        (StrategyKind::GreedyStochastic, C6_SIGMA),
        (StrategyKind::ThresholdClassical, C6_SIGMA),
        (StrategyKind::ThresholdQuantum, 0.0),
    ];
    let mut failed = Vec::new();
    let mut cells = 0;
    for (kind, sigma) in kinds {
        for &c_ratio in &C6_C {
            for &beta in &C6_BETA {
                let p = StrategyParams { c_ratio, beta, epsilon: C6_EPSILON, sigma, m_max: DEFAULT_M_MAX };
                let s = run_trials(kind, &means, &p, C6_TRIALS, 6).unwrap();
                let floor = 1.0 - (-beta).exp() - 3.0 * s.stderr;
                cells += 1;
                if s.success_rate < floor {
                    failed.push(format!("{} C={c_ratio} beta={beta}: {:.4} < {floor:.4}", kind.name(), s.success_rate));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failed.is_empty() && elapsed <= C6_BUDGET,
        format!("{}/{cells} cells meet 1 - e^-beta - 3 stderr over {C6_TRIALS} trials {failed:?}; {:.1}s", cells - failed.len(), elapsed.as_secs_f64()),
    )
}

fn criterion_7() -> Outcome {
    let table = strategies::complexity_table(&strategies::default_sweeps(C7_TRIALS), 7).unwrap();
    let mut parts = Vec::new();
    let mut pass = true;
    for fit in &table.slopes {
        let want = match (fit.strategy, fit.vary) {
            (StrategyKind::GreedyDeterministic, SweepParam::C) => 1.0,
            (StrategyKind::GreedyStochastic, SweepParam::Beta) => 2.0,
            (StrategyKind::ThresholdClassical, SweepParam::Epsilon) => -2.0,
            (StrategyKind::ThresholdQuantum, SweepParam::Epsilon) => -1.0,
            _ => continue,
        };
        let ok = (fit.slope - want).abs() <= C7_TOL;
        pass &= ok;
        parts.push(format!("{} {:.3} (want {want} +- {C7_TOL})", fit.strategy.name(), fit.slope));
    }
    outcome(pass && parts.len() == 4, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut held = 0;
    for t in 0..C8_TRIALS {
        let mut r = rng::substream(8, "acceptance/fkv", t);
        let rank = r.random_range(1..=4);
        let u = DMatrix::from_fn(32, rank, |_, _| r.sample::<f64, _>(StandardNormal));
        let v = DMatrix::from_fn(rank, 32, |_, _| r.sample::<f64, _>(StandardNormal));
        let noise = DMatrix::from_fn(32, 32, |_, _| 0.01 * r.sample::<f64, _>(StandardNormal));
        let a = u * v + noise;
        let fro = a.norm();
        let sigma = 16.0 * C8_EPSILON * C8_EPSILON * fro;
        let f = fkv_low_rank(&SqMatrix::new(&a).unwrap(), &FkvConfig::new(sigma, C8_EPSILON, C8_DELTA), &mut r).unwrap();
        // Exact-SVD oracle for |A - A_l|_F^2.
        let lhs = (&a - f.approximation(&a)).norm_squared();
        if lhs <= best_rank_residual(&a, f.l) + C8_EPSILON * fro * fro {
            held += 1;
        }
    }
    let need = (1.0 - C8_DELTA) * C8_TRIALS as f64;
    outcome(held as f64 >= need, format!("guarantee held in {held}/{C8_TRIALS} (need {need})"))
}

fn criterion_9() -> Outcome {
    let spec = ManifoldSpec { kind: ManifoldKind::ParallelSegments, k: 1, m: 2, r_p: C9_R_P, samples_per_class: 400, seed: 9 };
    let ds = data::generate_manifold(&spec).unwrap();
    let cover = |class: usize, delta: f64| {
        let pts: Vec<Vec<f64>> = ds.class_points(class).iter().map(|p| p.to_vec()).collect();
        robustness::build_delta_cover(&pts, class, delta, PNorm::L2, CoverMethod::GreedyCoverage).unwrap()
    };
    let covers = [cover(0, C9_DELTA), cover(1, C9_DELTA)];
    let report = robustness::certify(&covers, &spec, C9_EPSILON0, C9_TRIALS, 9).unwrap();
    // Hard assertion inside the certified regime.
    assert!(!report.theorem_condition_met || report.misclassified == 0, "certified regime misclassified {}", report.misclassified);

    let bad = [
        Cover::from_centers(0, vec![vec![0.0, 0.0]], C9_BAD_DELTA, PNorm::L2).unwrap(),
        Cover::from_centers(1, vec![vec![1.0, 1.0]], C9_BAD_DELTA, PNorm::L2).unwrap(),
    ];
    let all: Vec<Vec<f64>> = ds.points.iter().map(|p| p.x.clone()).collect();
    let valid = bad[0].verify(&all[..spec.samples_per_class]) && bad[1].verify(&all[spec.samples_per_class..]);
    let violation = robustness::check_probe(&bad, &spec, 0, C9_EPSILON0, &[1.0, 0.2]).unwrap();
    let sampled = robustness::find_violation(&bad, &spec, C9_EPSILON0, C9_TRIALS, 9).unwrap();
    outcome(
        report.theorem_condition_met && report.misclassified == 0 && valid && violation.is_some() && sampled.is_some(),
        format!(
            "delta {C9_DELTA}: {} misclassified over {C9_TRIALS} per class ({:?} centers); delta {C9_BAD_DELTA}: probe violation {}, sampled violation {}",
            report.misclassified,
            report.centers,
            violation.is_some(),
            sampled.is_some()
        ),
    )
}

fn criterion_10() -> Outcome {
    let cfg = AeConfig::new(C10_J, 1, AeMode::FullSimulation);
    let floor = amplitude::SUCCESS_PROBABILITY_K1;
    let mut parts = Vec::new();
    let mut pass = true;
    for &a in &C10_A {
        let circuit = AmplitudeCircuit::from_probability(a).unwrap();
        let mut r = rng::stream(10, "acceptance/ae");
        let hits = (0..C10_TRIALS)
            .filter(|_| {
                let est = amplitude::amplitude_estimate(&circuit, &cfg, &mut r).unwrap();
                (est - a).abs() <= amplitude::error_bound(a, C10_J, 1)
            })
            .count();
        let freq = hits as f64 / C10_TRIALS as f64;
        let se = (freq * (1.0 - freq) / C10_TRIALS as f64).sqrt();
        pass &= freq >= floor - 3.0 * se;
        parts.push(format!("a={a}: {freq:.4}"));
    }
    outcome(pass, format!("{} (need >= {floor:.4} - 3 stderr)", parts.join(", ")))
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands = ["score", "active-round", "strategies", "dequant-check", "certify", "complexity-table"];
    let mut differing = Vec::new();
    for cmd in commands {
        let cfg = format!("configs/{cmd}.json");
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{cmd}-{run}.json"));
            let csv = dir.path().join(format!("{cmd}-{run}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_margin-forge"))
                .current_dir(workspace_root())
                .args([cmd, "--config", &cfg, "--out", out.to_str().unwrap(), "--csv_path", csv.to_str().unwrap()])
                .status()
                .unwrap();
            let report = std::fs::read(&out).unwrap_or_default();
            let table = std::fs::read(&csv).unwrap_or_default();
            outputs.push((status.code(), report, table));
        }
        if outputs[0] != outputs[1] || outputs[0].0 != Some(0) {
            differing.push(cmd);
        }
    }
    outcome(differing.is_empty(), format!("{} commands byte-identical across two runs; differing or failed: {differing:?}", commands.len() - differing.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("backend equivalence", criterion_1),
        ("HHL semantics", criterion_2),
        ("Chebyshev walk", criterion_3),
        ("norm recovery", criterion_4),
        ("density exponentiation", criterion_5),
        ("strategy guarantees", criterion_6),
        ("complexity-table slopes", criterion_7),
        ("FKV guarantee", criterion_8),
        ("cover certification", criterion_9),
        ("AE statistical contract", criterion_10),
        ("reproducibility", criterion_11),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
