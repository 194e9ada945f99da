use serde::Serialize;
use serde_json::json;

use super::config::{build_spec, load, QfimJob, ScanJob, SenseJob, SuperposeJob, ThetaMode, TrainJob};
use super::output::{header, theta_hash, write_csv};
use super::{Cli, CliError, Command, QfimArgs, ScanArgs, SenseArgs, SuperposeArgs, TrainArgs};
use crate::exec::Exec;
use crate::geometry::qfim_with;
use crate::metrology::{crao_bounds, crao_check_with, sense_experiment, summarize, SenseConfig};
use crate::npqc::Variant;
use crate::rng;
use crate::superposition::{superposition_sweep, SweepConfig};
use crate::train::{mean_std, random_params, single_step_scan, training_study, Init, Method};

pub(super) fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Qfim(a) => qfim(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Scan(a) => scan(cli, a),
        Command::Sense(a) => sense(cli, a),
        Command::Superpose(a) => superpose(cli, a),
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn set_list<T: Clone>(slot: &mut Vec<T>, v: &[T]) {
    if !v.is_empty() {
        *slot = v.to_vec();
    }
}

fn init_name(i: Init) -> &'static str {
    match i {
        Init::Reference => "reference",
        Init::Random => "random",
    }
}

#[derive(Serialize)]
struct QfimEntry {
    i: usize,
    j: usize,
    value: f64,
}

#[derive(Serialize)]
struct QfimSummary {
    #[serde(rename = "N")]
    n: usize,
    p: usize,
    variant: Variant,
    theta: ThetaMode,
    #[serde(rename = "M")]
    m: usize,
    max_dev_identity: f64,
    trace: f64,
    inverse_trace: Option<f64>,
    min_eigenvalue: f64,
    rank: usize,
    trace_bound_ok: bool,
}

fn qfim(cli: &Cli, a: &QfimArgs) -> Result<(), CliError> {
    let mut job: QfimJob = load(cli.config.as_deref(), "qfim")?;
    set(&mut job.n, a.spec.n);
    set(&mut job.p, a.spec.p);
    set(&mut job.variant, a.variant);
    set(&mut job.theta, a.theta);
    set(&mut job.seed, cli.seed);

    let spec = build_spec(job.n, job.p, job.variant)?;
    let m = spec.num_params();
    let theta = match job.theta {
        ThetaMode::Reference => spec.reference_params(),
        ThetaMode::Random => random_params(m, &mut rng::stream(job.seed, 0)),
    };
    let f = qfim_with(&spec, &theta, Exec::default())?;
    let crao = crao_bounds(&f);
    let head = header("qfim", &job, json!({ "M": m, "theta_sha256": theta_hash(&theta) }))?;
    let entries = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| QfimEntry {
            i,
            j,
            value: f.get(i, j),
        });
    write_csv(&cli.out, "qfim.csv", &head, entries)?;
    let summary = QfimSummary {
        n: job.n,
        p: job.p,
        variant: job.variant,
        theta: job.theta,
        m,
        max_dev_identity: f.max_deviation_from_identity(),
        trace: crao.trace,
        inverse_trace: crao.inverse_trace,
        min_eigenvalue: crao.min_eigenvalue,
        rank: crao.rank,
        trace_bound_ok: crao.trace_ok,
    };
    println!(
        "M = {m}  max|F − I| = {:.3e}  Tr F = {:.6}  Tr F⁻¹ = {}  λ_min = {:.3e}  rank = {}",
        summary.max_dev_identity,
        summary.trace,
        summary
            .inverse_trace
            .map_or("n/a (singular)".into(), |x| format!("{x:.6}")),
        summary.min_eigenvalue,
        summary.rank
    );
    write_csv(&cli.out, "qfim_summary.csv", &head, [summary])?;
    Ok(())
}

#[derive(Serialize)]
struct TrainRow {
    iteration: usize,
    fidelity: f64,
    grad_norm: f64,
    rate: f64,
    method: &'static str,
    seed: u64,
}

#[derive(Serialize)]
struct TrainSummaryRow {
    seed: u64,
    method: &'static str,
    iterations_to_threshold: Option<usize>,
    final_infidelity: f64,
    iterations: usize,
    gradient_evals: usize,
    fidelity_evals: usize,
    stationary: bool,
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<(), CliError> {
    let mut job: TrainJob = load(cli.config.as_deref(), "train")?;
    set(&mut job.n, a.spec.n);
    set(&mut job.p, a.spec.p);
    set_list(&mut job.methods, &a.method);
    set(&mut job.init, a.init);
    set(&mut job.infidelity, a.dk);
    set(&mut job.seeds, a.seeds);
    set(&mut job.optimizer.max_iters, a.max_iters);
    set(&mut job.optimizer.target_infidelity, a.target);
    set(&mut job.threshold, a.threshold);
    set(&mut job.seed, cli.seed);
    if job.methods.is_empty() {
        return Err(CliError::Usage("at least one method is required".into()));
    }

    let spec = build_spec(job.n, job.p, Variant::Full)?;
    let traces = training_study(
        &spec,
        job.init,
        job.infidelity,
        &job.methods,
        &job.optimizer,
        job.seeds,
        job.seed,
        Exec::default(),
    )?;
    let head = header("train", &job, json!({ "M": spec.num_params() }))?;
    let rows = traces.iter().flat_map(|t| {
        t.records.iter().map(move |r| TrainRow {
            iteration: r.iteration,
            fidelity: r.fidelity,
            grad_norm: r.grad_norm,
            rate: r.rate,
            method: t.method.name(),
            seed: t.seed,
        })
    });
    write_csv(&cli.out, "train.csv", &head, rows)?;
    let summary: Vec<TrainSummaryRow> = traces
        .iter()
        .map(|t| TrainSummaryRow {
            seed: t.seed,
            method: t.method.name(),
            iterations_to_threshold: t.iterations_to(job.threshold),
            final_infidelity: t.final_infidelity(),
            iterations: t.records.len().saturating_sub(1),
            gradient_evals: t.gradient_evals,
            fidelity_evals: t.fidelity_evals,
            stationary: t.stationary,
        })
        .collect();

    println!("iterations to infidelity {:e} over {} seeds", job.threshold, job.seeds);
    for &method in &job.methods {
        let its: Vec<f64> = summary
            .iter()
            .filter(|s| s.method == method.name())
            .filter_map(|s| s.iterations_to_threshold.map(|i| i as f64))
            .collect();
        let (mean, _) = mean_std(&its);
        println!(
            "  {:<12} reached {:>3}/{}  mean {:.1}",
            method.name(),
            its.len(),
            job.seeds,
            mean
        );
    }
    if job.methods.contains(&Method::AdaptiveGa) {
        for &other in job.methods.iter().filter(|&&m| m != Method::AdaptiveGa) {
            let wins = (0..job.seeds as u64)
                .filter(|&s| {
                    let get = |m: Method| {
                        summary
                            .iter()
                            .find(|r| r.seed == s && r.method == m.name())
                            .and_then(|r| r.iterations_to_threshold)
                    };
                    match (get(Method::AdaptiveGa), get(other)) {
                        (Some(a), Some(b)) => a < b,
                        (Some(_), None) => true,
                        _ => false,
                    }
                })
                .count();
            println!(
                "  adaptive_ga faster than {:<12} in {wins}/{} seeds",
                other.name(),
                job.seeds
            );
        }
    }
    write_csv(&cli.out, "train_summary.csv", &head, summary)?;
    Ok(())
}

#[derive(Serialize)]
struct ScanSample {
    init: &'static str,
    infidelity_before: f64,
    instance: usize,
    infidelity_after: f64,
}

#[derive(Serialize)]
struct ScanSummaryRow {
    init: &'static str,
    infidelity_before: f64,
    mean_infidelity_after: f64,
    std_infidelity_after: f64,
    instances: usize,
}

#[derive(Serialize)]
struct FitRow {
    init: &'static str,
    c: Option<f64>,
    nu: Option<f64>,
}

fn scan(cli: &Cli, a: &ScanArgs) -> Result<(), CliError> {
    let mut job: ScanJob = load(cli.config.as_deref(), "scan")?;
    set(&mut job.n, a.spec.n);
    set(&mut job.p, a.spec.p);
    set_list(&mut job.inits, &a.init);
    set_list(&mut job.infidelities, &a.dk);
    set(&mut job.seeds, a.seeds);
    set(&mut job.seed, cli.seed);
    if job.infidelities.iter().any(|&x| !(0.0..1.0).contains(&x)) {
        return Err(CliError::Usage("initial infidelities must lie in [0, 1)".into()));
    }

    let spec = build_spec(job.n, job.p, Variant::Full)?;
    let (mut samples, mut rows, mut fits) = (Vec::new(), Vec::new(), Vec::new());
    for &init in &job.inits {
        let res = single_step_scan(&spec, &job.infidelities, init, job.seeds, job.seed, Exec::default())?;
        let name = init_name(init);
        for (row, xs) in res.rows.iter().zip(&res.samples) {
            samples.extend(xs.iter().enumerate().map(|(instance, &after)| ScanSample {
                init: name,
                infidelity_before: row.infidelity_before,
                instance,
                infidelity_after: after,
            }));
            rows.push(ScanSummaryRow {
                init: name,
                infidelity_before: row.infidelity_before,
                mean_infidelity_after: row.mean_infidelity_after,
                std_infidelity_after: row.std_infidelity_after,
                instances: row.instances,
            });
        }
        match res.fit {
            Some(f) => println!("{name:<9} ΔK_after ≈ {:.4}·(−log K)^{:.3}", f.c, f.nu),
            None => println!("{name:<9} too few usable points for a fit"),
        }
        fits.push(FitRow {
            init: name,
            c: res.fit.map(|f| f.c),
            nu: res.fit.map(|f| f.nu),
        });
    }
    let head = header("scan", &job, json!({ "M": spec.num_params() }))?;
    write_csv(&cli.out, "scan.csv", &head, samples)?;
    write_csv(&cli.out, "scan_summary.csv", &head, rows)?;
    write_csv(&cli.out, "scan_fit.csv", &head, fits)?;
    Ok(())
}

#[derive(Serialize)]
struct SenseRow {
    #[serde(rename = "N")]
    n: usize,
    p: usize,
    #[serde(rename = "M")]
    m: usize,
    norm_dtheta: f64,
    shots: i64,
    instance: usize,
    rel_rmse: f64,
    leakage_fraction: f64,
    seed: u64,
}

#[derive(Serialize)]
struct SenseSummaryRow {
    norm_dtheta: f64,
    shots: i64,
    instances: usize,
    rmse: f64,
    rel_rmse: f64,
    max_abs_error: f64,
    leakage_fraction: f64,
}

#[derive(Serialize)]
struct CraoRow {
    theta: &'static str,
    draw: usize,
    #[serde(rename = "M")]
    m: usize,
    rank: usize,
    trace: f64,
    inverse_trace: Option<f64>,
    trace_ok: bool,
    inverse_ok: Option<bool>,
}

fn shots_code(s: Option<u64>) -> i64 {
    s.map_or(-1, |n| n as i64)
}

fn sense(cli: &Cli, a: &SenseArgs) -> Result<(), CliError> {
    let mut job: SenseJob = load(cli.config.as_deref(), "sense")?;
    set(&mut job.n, a.spec.n);
    set(&mut job.p, a.spec.p);
    set_list(&mut job.norms, &a.norm);
    set(&mut job.shots, a.shots.clone().map(|s| s.0));
    if a.exact {
        job.shots.clear();
        job.exact = true;
    }
    set(&mut job.instances, a.instances);
    set(&mut job.crao_draws, a.crao_draws);
    set(&mut job.seed, cli.seed);
    if job.norms.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(CliError::Usage("shift norms must be positive".into()));
    }

    let spec = build_spec(job.n, job.p, Variant::YOnly)?;
    let cfg = SenseConfig {
        norms: job.norms.clone(),
        shots: job.shots.clone(),
        exact: job.exact,
        instances: job.instances,
        seed: job.seed,
    };
    let reports = sense_experiment(&spec, &cfg, Exec::default())?;
    let m = spec.num_params();
    let head = header(
        "sense",
        &job,
        json!({ "M": m, "rmse_normalization": "mean |dtheta_i| over entries and instances" }),
    )?;
    let rows = reports.iter().map(|r| SenseRow {
        n: r.n_qubits,
        p: r.n_layers,
        m: r.m,
        norm_dtheta: r.norm_dtheta,
        shots: shots_code(r.shots),
        instance: r.instance,
        rel_rmse: r.rel_rmse,
        leakage_fraction: r.leakage_fraction,
        seed: r.seed,
    });
    write_csv(&cli.out, "sense.csv", &head, rows)?;
    let summary: Vec<SenseSummaryRow> = summarize(&reports)
        .into_iter()
        .map(|s| SenseSummaryRow {
            norm_dtheta: s.norm_dtheta,
            shots: shots_code(s.shots),
            instances: s.instances,
            rmse: s.rmse,
            rel_rmse: s.rel_rmse,
            max_abs_error: s.max_abs_error,
            leakage_fraction: s.leakage_fraction,
        })
        .collect();
    println!("{:>10} {:>10} {:>12}", "|Δθ|", "shots", "rel. RMSE");
    for s in &summary {
        let shots = if s.shots < 0 {
            "exact".to_string()
        } else {
            s.shots.to_string()
        };
        println!("{:>10.4} {:>10} {:>12.5}", s.norm_dtheta, shots, s.rel_rmse);
    }
    write_csv(&cli.out, "sense_summary.csv", &head, summary)?;

    let mut crao = Vec::with_capacity(job.crao_draws + 1);
    for draw in 0..=job.crao_draws {
        let (name, theta) = if draw == 0 {
            ("reference", spec.reference_params())
        } else {
            (
                "random",
                random_params(m, &mut rng::substream(job.seed, draw as u64, 1)),
            )
        };
        let r = crao_check_with(&spec, &theta, Exec::default())?;
        crao.push(CraoRow {
            theta: name,
            draw,
            m,
            rank: r.rank,
            trace: r.trace,
            inverse_trace: r.inverse_trace,
            trace_ok: r.trace_ok,
            inverse_ok: r.inverse_ok,
        });
    }
    if let Some(r) = crao.first() {
        println!(
            "Cramér-Rao at θ_r: Tr F⁻¹ = {}  (M = {m})",
            r.inverse_trace.map_or("n/a".into(), |x| format!("{x:.9}"))
        );
    }
    write_csv(&cli.out, "crao.csv", &head, crao)?;
    Ok(())
}

#[derive(Serialize)]
struct SuperposeRow {
    #[serde(rename = "K_rs")]
    k_rs: f64,
    #[serde(rename = "K_ts")]
    k_ts: f64,
    cos_angle: f64,
    feasible: bool,
    #[serde(rename = "delta_C")]
    delta_c: Option<f64>,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "dK_rt")]
    dk_rt: f64,
    seed: u64,
    p: usize,
    instance: usize,
}

#[derive(Serialize)]
struct SuperposeSummaryRow {
    p: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "dK_rt")]
    dk_rt: f64,
    requests: usize,
    feasible: usize,
    mean_delta_c: f64,
    std_delta_c: f64,
}

fn superpose(cli: &Cli, a: &SuperposeArgs) -> Result<(), CliError> {
    let mut job: SuperposeJob = load(cli.config.as_deref(), "superpose")?;
    set(&mut job.n, a.n);
    set_list(&mut job.layers, &a.p);
    set_list(&mut job.infidelities, &a.dk);
    set(&mut job.targets, a.targets);
    set(&mut job.requests, a.requests);
    if a.grid.is_some() {
        job.grid = a.grid;
    }
    set(&mut job.perp, a.perp);
    set(&mut job.seed, cli.seed);
    if job.infidelities.iter().any(|&x| !(0.0..1.0).contains(&x)) {
        return Err(CliError::Usage("ΔK_t(θ_r) must lie in [0, 1)".into()));
    }
    if job.grid == Some(0) {
        return Err(CliError::Usage("--grid must be at least 1".into()));
    }

    let (mut rows, mut summary) = (Vec::new(), Vec::new());
    for &p in &job.layers {
        let spec = build_spec(job.n, p, Variant::Full)?;
        for &dk in &job.infidelities {
            let cfg = SweepConfig {
                dk_rt: dk,
                targets: job.targets,
                requests: job.requests,
                grid: job.grid,
                perp: job.perp.choice(job.seed),
                seed: job.seed,
            };
            let sweep = superposition_sweep(&spec, &cfg, Exec::default())?;
            let dc: Vec<f64> = sweep.iter().filter_map(|r| r.delta_c).collect();
            let (mean, std) = mean_std(&dc);
            println!(
                "p = {p:>2}  M = {:>3}  ΔK = {dk:.2}  feasible {:>4}/{:<4} ⟨ΔC⟩ = {mean:.5}",
                spec.num_params(),
                dc.len(),
                sweep.len()
            );
            summary.push(SuperposeSummaryRow {
                p,
                m: spec.num_params(),
                dk_rt: dk,
                requests: sweep.len(),
                feasible: dc.len(),
                mean_delta_c: mean,
                std_delta_c: std,
            });
            rows.extend(sweep.into_iter().map(|r| SuperposeRow {
                k_rs: r.k_rs,
                k_ts: r.k_ts,
                cos_angle: r.cos_angle,
                feasible: r.feasible,
                delta_c: r.delta_c,
                m: r.m,
                dk_rt: r.dk_rt,
                seed: r.seed,
                p,
                instance: r.instance,
            }));
        }
    }
    let head = header("superpose", &job, json!({}))?;
    write_csv(&cli.out, "superpose.csv", &head, rows)?;
    write_csv(&cli.out, "superpose_summary.csv", &head, summary)?;
    Ok(())
}
