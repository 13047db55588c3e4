//! Builds typed inputs from a resolved config and runs one command.

use std::path::Path;

use serde_json::{json, Value};

use super::config::{Command, ExperimentConfig};
use crate::data::{self, LabeledDataset, ManifoldKind, ManifoldSpec, PNorm};
use crate::dequant::{self, DequantConfig, SqMatrix};
use crate::error::{Error, Result};
use crate::informativeness::{self, Backend, CandidateSource, QsimConfig, ScoreSettings};
use crate::qsim::amplitude::{AeConfig, AeMode};
use crate::robustness::{self, CoverMethod};
use crate::rng;
use crate::strategies::{self, StrategyKind, StrategyParams};
use crate::svm::{self, Activation, KernelSpec};

/// What a command produced: the report body and, optionally, CSV text.
pub struct Outcome {
    pub result: Value,
    pub csv: Option<String>,
}

pub fn backend(cfg: &ExperimentConfig) -> Result<Backend> {
    let b = match cfg.string("backend.kind")? {
        "exact" => Backend::Exact,
        "qsim" => Backend::Qsim(QsimConfig {
            kappa_eff: cfg.opt_f64("backend.qsim.kappa_eff")?,
            eig_bits: cfg.u64("backend.qsim.eig_bits")? as u32,
            ae: AeConfig {
                j: cfg.u64("backend.qsim.ae.j")?,
                k: cfg.u64("backend.qsim.ae.k")? as u32,
                beta: cfg.u64("backend.qsim.ae.beta")? as u32,
                mode: cfg.enum_value::<AeMode>("backend.qsim.ae.mode", "one of grid, sampled, full-simulation")?,
            },
        }),
        "dequant" => Backend::Dequant(DequantConfig {
            sigma_ratio: cfg.f64("backend.dequant.sigma_ratio")?,
            fkv_epsilon: cfg.opt_f64("backend.dequant.fkv_epsilon")?,
            delta: cfg.f64("backend.dequant.delta")?,
            tolerance: cfg.f64("backend.dequant.tolerance")?,
            max_samples: cfg.u64("backend.dequant.max_samples")?,
        }),
        other => return Err(Error::invalid(format!("backend.kind must be exact, qsim or dequant, got {other:?}"))),
    };
    b.validate()?;
    Ok(b)
}

pub fn score_settings(cfg: &ExperimentConfig) -> Result<ScoreSettings> {
    let kernel = match cfg.string("svm.kernel.kind")? {
        "linear" => KernelSpec::Linear,
        "polynomial" => KernelSpec::Polynomial { order: cfg.u64("svm.kernel.order")? as u32 },
        "rbf" => KernelSpec::Rbf { width: cfg.f64("svm.kernel.width")? },
        other => return Err(Error::invalid(format!("svm.kernel.kind must be linear, polynomial or rbf, got {other:?}"))),
    };
    let activation = match cfg.string("svm.activation.kind")? {
        "linear-clip" => Activation::LinearClip,
        "sigmoid" => Activation::Sigmoid { scale: cfg.f64("svm.activation.scale")? },
        other => return Err(Error::invalid(format!("svm.activation.kind must be linear-clip or sigmoid, got {other:?}"))),
    };
    let fixed_class = cfg.opt_u64("svm.fixed_class")?.map(|c| c as usize);
    Ok(ScoreSettings { gamma: cfg.f64("svm.gamma")?, kernel, activation, fixed_class })
}

pub fn manifold(cfg: &ExperimentConfig) -> Result<ManifoldSpec> {
    let spec = ManifoldSpec {
        kind: cfg.enum_value::<ManifoldKind>("dataset.manifold.kind", "one of parallel-segments, concentric-arcs, parallel-disks")?,
        k: cfg.u64("dataset.manifold.k")? as usize,
        m: cfg.u64("dataset.manifold.m")? as usize,
        r_p: cfg.f64("dataset.manifold.r_p")?,
        samples_per_class: cfg.u64("dataset.manifold.samples_per_class")? as usize,
        seed: match cfg.opt_u64("dataset.manifold.seed")? {
            Some(s) => s,
            None => cfg.u64("seed")?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

/// The dataset file if `dataset.path` is set, otherwise the generated manifold.
pub fn dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    let tau = cfg.f64("dataset.tau")?;
    let ds = match cfg.opt_string("dataset.path")? {
        Some(p) => {
            let path = Path::new(p);
            let unreadable = |e: Error| Error::invalid(format!("cannot read dataset {p}: {e}"));
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                let file = std::fs::File::open(path).map_err(|e| unreadable(e.into()))?;
                LabeledDataset::read_csv(file).map_err(unreadable)?
            } else {
                LabeledDataset::load(path).map_err(unreadable)?
            }
        }
        None => data::generate_manifold(&manifold(cfg)?)?,
    };
    LabeledDataset::with_tau(ds.points, ds.m, tau)
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn run_score(cfg: &ExperimentConfig) -> Result<Outcome> {
    let backend = backend(cfg)?;
    let settings = score_settings(cfg)?;
    let s = dataset(cfg)?;
    if !cfg.is_set("x") {
        return Err(Error::invalid("score needs the candidate point \"x\""));
    }
    let x = cfg.vector("x")?;
    let mut r = rng::stream(cfg.u64("seed")?, "informativeness");
    let score = informativeness::score(&backend, &settings, &s, &x, &mut r)?;
    Ok(Outcome { result: json!({"backend": backend.name(), "x": x, "score": to_value(&score)?}), csv: None })
}

fn run_active_round(cfg: &ExperimentConfig) -> Result<Outcome> {
    let backend = backend(cfg)?;
    let settings = score_settings(cfg)?;
    let s = dataset(cfg)?;
    let pool;
    let source = if cfg.is_set("candidates.pool") {
        pool = cfg.points("candidates.pool")?;
        CandidateSource::Pool(&pool)
    } else {
        CandidateSource::inflated_box(&s)?
    };
    let round = informativeness::best_of_c(&backend, &settings, &s, &source, cfg.f64("C")?, cfg.f64("beta")?, cfg.u64("seed")?)?;
    let mut result = to_value(&round)?;
    result["backend"] = json!(backend.name());
    Ok(Outcome { result, csv: None })
}

fn strategy_params(cfg: &ExperimentConfig) -> Result<StrategyParams> {
    Ok(StrategyParams {
        c_ratio: cfg.f64("C")?,
        beta: cfg.f64("beta")?,
        epsilon: cfg.f64("epsilon")?,
        sigma: cfg.f64("sigma")?,
        m_max: cfg.u64("strategies.m_max")?,
    })
}

fn run_strategies(cfg: &ExperimentConfig) -> Result<Outcome> {
    let params = strategy_params(cfg)?;
    let means = if cfg.is_set("strategies.pool") {
        cfg.vector("strategies.pool")?
    } else {
        strategies::even_pool(cfg.u64("strategies.pool_size")? as usize)
    };
    let kinds: Vec<StrategyKind> = if cfg.is_set("strategies.names") {
        cfg.enum_value("strategies.names", "an array of strategy names")?
    } else if params.sigma == 0.0 {
        vec![StrategyKind::GreedyDeterministic, StrategyKind::ThresholdClassical, StrategyKind::ThresholdQuantum]
    } else {
        vec![StrategyKind::GreedyStochastic, StrategyKind::ThresholdClassical]
    };
    let trials = cfg.u64("strategies.trials")?;
    let seed = cfg.u64("seed")?;
    let mut reports = serde_json::Map::new();
    let mut rows = Vec::new();
    for kind in kinds {
        let mut oracle = strategies::ScoreOracle::new(means.clone(), params.sigma)?;
        let mut r = rng::stream(seed, &format!("strategies/{}", kind.name()));
        let report = kind.run(&mut oracle, &params, &mut r)?;
        let summary = strategies::run_trials(kind, &means, &params, trials, seed)?;
        let top = strategies::TopSet::new(&means, params.c_ratio)?;
        let in_top = report.chosen.map(|i| top.contains_value(means[i]));
        reports.insert(
            kind.name().to_string(),
            json!({"report": to_value(&report)?, "in_top": in_top, "trials": to_value(&summary)?}),
        );
        rows.push(summary);
    }
    let mut csv = Vec::new();
    strategies::write_csv(&rows, &mut csv)?;
    Ok(Outcome { result: json!({"pool_size": means.len(), "strategies": reports}), csv: Some(String::from_utf8_lossy(&csv).into_owned()) })
}

fn run_dequant_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Backend::Dequant(dcfg) = backend(cfg)? else {
        return Err(Error::invalid("dequant-check needs backend.kind = dequant"));
    };
    let settings = score_settings(cfg)?;
    if settings.kernel != KernelSpec::Linear {
        return Err(Error::invalid("dequant-check supports the linear kernel only"));
    }
    let tolerance = cfg.f64("dequant_check.tolerance")?;
    let s = dataset(cfg)?;
    s.require_both_classes()?;
    let (points, y) = s.labeled();
    let f = svm::assemble_f(&svm::kernel_matrix(&points, KernelSpec::Linear)?, settings.gamma)?;
    let rhs: Vec<f64> = std::iter::once(0.0).chain(y.iter().copied()).collect();
    let exact = svm::solve_lssvm(&f, &y, settings.gamma)?;
    let exact_w = svm::weight_vector(&exact, &points)?.norm;

    let mut r = rng::stream(cfg.u64("seed")?, "dequant");
    let approx = dequant::dequant_solve(&SqMatrix::new(&f)?, &rhs, &dcfg, &mut r)?;
    let exact_stacked = exact.stacked();
    let diff: f64 = approx.solution.iter().zip(&exact_stacked).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let solution_error = diff / svm::norm2(&exact_stacked);
    let weights = crate::qsim::walk::weight_matrix(&points)?;
    let w_est = dequant::dequant_norm_aw_relative(&weights, &approx.solution, dcfg.tolerance, dcfg.delta, &mut r)?;
    let w_error = (w_est.value - exact_w).abs() / exact_w;
    let mut result = json!({
        "n": points.len(),
        "m": s.m,
        "rank_kept": approx.sigma.len(),
        "singular_values": approx.sigma,
        "solution_relative_error": solution_error,
        "w_norm_exact": exact_w,
        "w_norm_dequant": w_est.value,
        "w_norm_relative_error": w_error,
        "samples": (approx.samples + w_est.samples).to_string(),
        "tolerance": tolerance,
        "within_tolerance": w_error <= tolerance,
    });
    if cfg.is_set("x") {
        let x = cfg.vector("x")?;
        let inner_exact = svm::tilde_inner(&exact, &points, &x)?;
        let approx_sol = svm::SvmSolution::new(approx.solution[0], approx.solution[1..].to_vec(), settings.gamma);
        let inner = dequant::tilde_inner_estimate(&approx_sol, &points, &x, dcfg.tolerance, dcfg.delta, &mut r)?;
        result["tilde_inner_exact"] = json!(inner_exact);
        result["tilde_inner_dequant"] = json!(inner.value);
    }
    Ok(Outcome { result, csv: None })
}

fn run_certify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let spec = manifold(cfg)?;
    let norm = match cfg.get("robustness.norm") {
        Value::Number(n) => PNorm::from_p(n.as_f64().unwrap_or(f64::NAN))?,
        _ => cfg.enum_value::<PNorm>("robustness.norm", "one of 1, 2, inf")?,
    };
    let method: CoverMethod = cfg.enum_value("robustness.method", "greedy-coverage or farthest-point")?;
    let delta = cfg.f64("robustness.delta")?;
    let epsilon0 = cfg.f64("robustness.epsilon0")?;
    if !(epsilon0 >= 0.0) {
        return Err(Error::invalid("robustness.epsilon0 must be non-negative"));
    }
    let trials = cfg.u64("robustness.trials")? as usize;
    let ds = data::generate_manifold(&spec)?;
    let covers = [0usize, 1].map(|class| {
        let samples: Vec<Vec<f64>> = ds.class_points(class).iter().map(|p| p.to_vec()).collect();
        robustness::build_delta_cover(&samples, class, delta, norm, method)
    });
    let [c0, c1] = covers;
    let covers = [c0?, c1?];
    let seed = cfg.u64("seed")?;
    let report = robustness::certify(&covers, &spec, epsilon0, trials, seed)?;
    let violation = if report.misclassified > 0 { robustness::find_violation(&covers, &spec, epsilon0, trials, seed)? } else { None };
    Ok(Outcome {
        result: json!({
            "certification": to_value(&report)?,
            "misclassified": report.misclassified,
            "violation": to_value(&violation)?,
            "covers": to_value(&covers)?,
        }),
        csv: None,
    })
}

fn run_complexity_table(cfg: &ExperimentConfig) -> Result<Outcome> {
    let trials = cfg.u64("complexity.trials")?;
    let table = strategies::complexity_table(&strategies::default_sweeps(trials), cfg.u64("seed")?)?;
    let mut csv = Vec::new();
    strategies::write_csv(&table.rows, &mut csv)?;
    Ok(Outcome {
        result: json!({"rows": to_value(&table.rows)?, "slopes": to_value(&strategies::slope_map(&table))?}),
        csv: Some(String::from_utf8_lossy(&csv).into_owned()),
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Score => run_score(cfg),
        Command::ActiveRound => run_active_round(cfg),
        Command::Strategies => run_strategies(cfg),
        Command::DequantCheck => run_dequant_check(cfg),
        Command::Certify => run_certify(cfg),
        Command::ComplexityTable => run_complexity_table(cfg),
    }
}
