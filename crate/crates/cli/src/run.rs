//! Executes a validated experiment and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sqg_core::coupling::{delta0_constant, lambda_next, p_critical, Coupler, SyncRecord};
use sqg_core::diagnostics::{default_burn_in, lp_moment_check, time_average, MomentBoundSpec, Observable};
use sqg_core::dynamics::PhysicalParams;
use sqg_core::integrate::{simulate_ensemble, DiagnosticsRecord, Integrator, SimConfig, SimOutput};
use sqg_core::noise::{check_hypothesis_E2, AdditiveSpectralNoise, NoiseModel};
use sqg_core::spectral::{lp_norm, snapshot, EmpiricalConstants};
use sqg_core::verify::{run_plan, sync_rate};
use sqg_core::{Grid, SpectralField};

use crate::checkpoint;
use crate::config::{
    sync_constants, CoupleSpec, ErgodicSpec, ExperimentSpec, SimulateSpec, SpectrumSpec, VerifySpec,
};
use crate::error::{CliError, CliResult};
use crate::output::{hash_mismatches, Artifacts, Manifest, MANIFEST_FORMAT, PLOT_SCRIPT};

/// Where and how to run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses rayon's default.
    pub threads: usize,
}

/// What a kind runner hands back to the driver.
struct Outcome {
    certificates: Value,
    steps: u64,
    /// Set when artifacts were written but the run should still exit nonzero.
    failure: Option<CliError>,
}

impl Outcome {
    fn ok(certificates: Value, steps: u64) -> Self {
        Outcome {
            certificates,
            steps,
            failure: None,
        }
    }
}

/// Runs `spec` into `opts.out_dir`. Artifacts and the manifest are written
/// even when the run ends in a runtime or verification failure, which is then
/// returned as the error.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> CliResult<Manifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let mut art = Artifacts::create(&opts.out_dir)?;
    let start = Instant::now();
    log::info!(
        "{} run into {} on {threads} threads",
        spec.kind().as_str(),
        opts.out_dir.display()
    );
    let outcome = pool.install(|| match spec {
        ExperimentSpec::Simulate(s) => run_simulate(s, &mut art),
        ExperimentSpec::Couple(s) => run_couple(s, &mut art),
        ExperimentSpec::Ergodic(s) => run_ergodic(s, &mut art),
        ExperimentSpec::Verify(s) => run_verify(s, &mut art),
        ExperimentSpec::Spectrum(s) => run_spectrum(s, &mut art),
    })?;
    art.write("plot.py", PLOT_SCRIPT.as_bytes())?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: spec.kind().as_str().to_string(),
        root_seed: spec.seed(),
        config: spec.to_json(),
        certificates: outcome.certificates,
        steps: outcome.steps,
        wall_clock_s: start.elapsed().as_secs_f64(),
        threads,
        outputs: Vec::new(),
    };
    let manifest = art.finish(manifest)?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

/// Reruns the experiment recorded in a manifest and compares every listed
/// artifact hash.
pub fn rerun_manifest(path: &Path, opts: &RunOptions) -> CliResult<Manifest> {
    let old = Manifest::read(path)?;
    let spec = ExperimentSpec::from_json(&old.config)?;
    if let Ok(a) = std::fs::canonicalize(path.parent().unwrap_or(Path::new("."))) {
        if std::fs::canonicalize(&opts.out_dir).is_ok_and(|b| a == b) {
            return Err(CliError::Config(
                "rerun output directory must differ from the original run".into(),
            ));
        }
    }
    let new = run_experiment(&spec, opts)?;
    let bad = hash_mismatches(&opts.out_dir, &old.outputs);
    if bad.is_empty() {
        log::info!("all {} artifacts reproduced", old.outputs.len());
        Ok(new)
    } else {
        Err(CliError::Verification(format!(
            "rerun differs: {}",
            bad.join("; ")
        )))
    }
}

fn additive_certificates(a: &AdditiveSpectralNoise) -> Value {
    json!({
        "provenance": a.provenance,
        "trace_partial": a.certificates.trace_partial,
        "trace_tail": a.certificates.trace_tail,
        "trace_bound": a.certificates.trace_bound(),
        "e0": finite_or_null(a.certificates.e0()),
        "e0_partial": a.certificates.e0_partial,
        "e0_tail": finite_or_null(a.certificates.e0_tail),
        "smoothing_margin": a.certificates.smoothing_margin,
        "e1_holds": a.certificates.e1_holds,
        "smooth_regime": a.certificates.smooth_regime,
    })
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn noise_certificates(noise: Option<&NoiseModel>) -> Value {
    match noise {
        None => json!({ "noise": "none" }),
        Some(NoiseModel::Additive(a)) => additive_certificates(a),
        Some(m @ NoiseModel::Multiplicative(_)) => {
            let (l0, r2) = m.growth_constants();
            json!({ "noise": "multiplicative", "lambda0": l0, "rho2": r2 })
        }
    }
}

/// (E2) status, `λ_{N+1}` and `δ₀` for a ball of radius `n`.
fn ergodicity_certificates(
    noise: Option<&AdditiveSpectralNoise>,
    grid: &Grid,
    params: &PhysicalParams,
    n: u32,
) -> CliResult<Value> {
    let ln = lambda_next(grid, params, n)?;
    let e2 = match noise {
        None => json!({ "n": n, "holds": false, "reason": "no noise" }),
        Some(a) => match check_hypothesis_E2(a, n) {
            Ok(g) => json!({ "n": n, "holds": true, "g_norm": g.norm }),
            Err(e) => json!({ "n": n, "holds": false, "reason": e.to_string() }),
        },
    };
    let mut out = json!({ "e2": e2, "lambda_next": ln });
    if params.alpha > 0.5 {
        let c = sync_constants(grid, params);
        let e0 = noise.map_or(0.0, |a| a.certificates.e0());
        out["p_critical"] = json!(p_critical(params.alpha));
        out["delta0"] = finite_or_null(delta0_constant(params, e0, ln, &c));
        out["constants"] = json!({ "empirical": true, "values": c });
    }
    Ok(out)
}

#[derive(Serialize)]
struct SigmaRow {
    kx: i32,
    ky: i32,
    sigma: f64,
}

fn write_sigma(art: &mut Artifacts, a: &AdditiveSpectralNoise) -> CliResult<()> {
    art.write_csv(
        "sigma.csv",
        a.sigma_table()
            .into_iter()
            .map(|(kx, ky, sigma)| SigmaRow { kx, ky, sigma }),
    )
}

fn step_of(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

fn write_trajectory(
    art: &mut Artifacts,
    cfg: &SimConfig,
    label: Option<usize>,
    record: &DiagnosticsRecord,
    snaps: &[(f64, SpectralField)],
) -> CliResult<()> {
    let name = match label {
        Some(i) => format!("diagnostics_{i:04}.csv"),
        None => "diagnostics.csv".to_string(),
    };
    art.write_csv(&name, &record.rows)?;
    for (t, f) in snaps {
        let step = step_of(*t, cfg.dt);
        let name = match label {
            Some(i) => format!("snapshots/traj_{i:04}_step_{step:08}.bin"),
            None => format!("snapshots/step_{step:08}.bin"),
        };
        art.write(&name, &snapshot::encode(f))?;
    }
    Ok(())
}

fn run_simulate(s: &SimulateSpec, art: &mut Artifacts) -> CliResult<Outcome> {
    let cfg = &s.sim;
    let integ = Integrator::new(cfg)?;
    if let Some(a) = integ.additive_noise() {
        write_sigma(art, a)?;
    }
    let mut certificates = json!({ "noise": noise_certificates(integ.noise()) });
    if s.trajectories == 1 {
        let (mut state, traj) = match &s.resume_from {
            Some(dir) => checkpoint::load(dir, cfg, integ.grid())?,
            None => (integ.initial_state()?, 0),
        };
        let first = state.step;
        let n = cfg.n_steps();
        let mut record = DiagnosticsRecord {
            lp_exponent: cfg.lp_exponent,
            rows: Vec::new(),
        };
        let mut snaps = Vec::new();
        let mut failure = None;
        loop {
            let target = s
                .checkpoint_stride
                .map_or(n, |c| ((state.step / c + 1) * c).min(n));
            if let Err(e) = integ.run(&mut state, traj, target, &mut record, &mut snaps) {
                failure = Some(CliError::from(e));
                break;
            }
            if s.checkpoint_stride.is_some() {
                art.remove_dir(checkpoint::DIR)?;
                checkpoint::save(art, &state, cfg, traj)?;
            }
            if state.step >= n {
                break;
            }
        }
        write_trajectory(art, cfg, None, &record, &snaps)?;
        return Ok(Outcome {
            certificates,
            steps: state.step - first,
            failure,
        });
    }
    let outs: Vec<SimOutput> = match simulate_ensemble(cfg, s.trajectories) {
        Ok(o) => o,
        Err(f) => {
            art.write_csv("diagnostics_failed.csv", &f.record.rows)?;
            return Ok(Outcome {
                certificates,
                steps: 0,
                failure: Some(f.error.into()),
            });
        }
    };
    for (i, o) in outs.iter().enumerate() {
        write_trajectory(art, cfg, Some(i), &o.record, &o.snapshots)?;
    }
    let steps = cfg.n_steps() * s.trajectories as u64;
    let mut failure = None;
    if let Some(m) = &s.moment {
        let p = cfg.lp_exponent;
        let c_sobolev = m
            .c_sobolev
            .unwrap_or_else(|| EmpiricalConstants::frozen_or_measure(integ.grid(), p, 2.0).c_sobolev);
        let a = integ.additive_noise().expect("validated additive");
        let spec = MomentBoundSpec {
            p,
            initial_lp_pow: lp_norm(&integ.initial_state()?.theta(), p).powf(p),
            lambda1: cfg.params.lambda1(),
            c_sobolev,
            e0: a.certificates.e0(),
            slack_factor: m.slack_factor,
        };
        let recs: Vec<DiagnosticsRecord> = outs.into_iter().map(|o| o.record).collect();
        let report = lp_moment_check(&recs, &spec)?;
        art.write_csv("moment.csv", &report.points)?;
        certificates["moment"] = json!({
            "pass": report.pass,
            "worst_ratio": report.worst_ratio,
            "c_sobolev": c_sobolev,
            "c_sobolev_empirical": true,
            "stationary_level": spec.stationary_level(),
            "slack_factor": m.slack_factor,
        });
        if !report.pass {
            failure = Some(CliError::Verification(format!(
                "moment bound exceeded (worst mean/bound ratio {:.4})",
                report.worst_ratio
            )));
        }
    }
    Ok(Outcome {
        certificates,
        steps,
        failure,
    })
}

#[derive(Serialize)]
struct PairSummary {
    pair: usize,
    d0: f64,
    d_end: f64,
    /// Fitted exponential rate; `None` when `d` vanishes or the fit fails.
    rate: Option<f64>,
    gamma_hat_end: f64,
    h_sq_total: f64,
    initial_high_norms: (f64, f64),
}

fn pair_summary(i: usize, rec: &SyncRecord, fit_from: f64) -> PairSummary {
    let first = rec.rows.first().expect("at least the initial row");
    let last = rec.rows.last().expect("at least the initial row");
    let rate = if rec.rows.iter().all(|r| r.d_hminushalf == 0.0) {
        None
    } else {
        Some(sync_rate(rec, fit_from)).filter(|r| r.is_finite())
    };
    PairSummary {
        pair: i,
        d0: first.d_hminushalf,
        d_end: last.d_hminushalf,
        rate,
        gamma_hat_end: last.gamma_hat,
        h_sq_total: last.h_sq_cum,
        initial_high_norms: rec.initial_high_norms,
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn run_couple(s: &CoupleSpec, art: &mut Artifacts) -> CliResult<Outcome> {
    let cfg = &s.couple;
    let grid = Grid::new(cfg.base.grid)?;
    let constants = sync_constants(&grid, &cfg.base.params);
    let coupler = Coupler::new(cfg, constants)?;
    let integ = coupler.integrator();
    if let Some(a) = integ.additive_noise() {
        write_sigma(art, a)?;
    }
    let mut certificates = ergodicity_certificates(integ.additive_noise(), &grid, &cfg.base.params, cfg.n)?;
    certificates["noise"] = noise_certificates(integ.noise());
    certificates["k0"] = json!(coupler.k0());
    let results: Vec<_> = (0..cfg.pairs as u64)
        .into_par_iter()
        .map(|i| coupler.run(i))
        .collect();
    let mut records = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                return Ok(Outcome {
                    certificates,
                    steps: 0,
                    failure: Some(e.into()),
                })
            }
        }
    }
    let mut pairs = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        art.write_csv(&format!("sync_{i:04}.csv"), &rec.rows)?;
        pairs.push(pair_summary(i, rec, s.fit_from));
    }
    let rates: Vec<f64> = pairs.iter().filter_map(|p| p.rate).collect();
    let summary = json!({
        "p": cfg.p_critical(),
        "k0": coupler.k0(),
        "n": cfg.n,
        "lambda_next": coupler.lambda_next(),
        "fit_from": s.fit_from,
        "median_rate": median(rates),
        "pairs": pairs,
    });
    art.write_json("sync_summary.json", &summary)?;
    Ok(Outcome::ok(certificates, cfg.base.n_steps() * cfg.pairs as u64))
}

fn observable_name(o: &Observable) -> String {
    match o {
        Observable::L2Sq => "l2-sq".into(),
        Observable::HAlphaSq => "h-alpha-sq".into(),
        Observable::LpPow => "lp-pow".into(),
        Observable::ModeRe { k1, k2 } => format!("mode-re({k1};{k2})"),
    }
}

/// Samples `(t, ψ_j(θ(t)))` on the diagnostic stride.
fn sample_run(integ: &Integrator, traj: u64, obs: &[Observable]) -> sqg_core::Result<Vec<(f64, Vec<f64>)>> {
    let cfg = integ.config();
    let eval = |th: &SpectralField| -> Vec<f64> {
        obs.iter()
            .map(|o| o.eval(th, cfg.params.alpha, cfg.lp_exponent))
            .collect()
    };
    let mut state = integ.initial_state()?;
    let mut out = vec![(state.t, eval(&state.theta()))];
    let n = cfg.n_steps();
    while state.step < n {
        integ.step(&mut state, traj)?;
        if state.step % cfg.diagnostic_stride == 0 {
            out.push((state.t, eval(&state.theta())));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct AverageRow {
    run: usize,
    observable: String,
    mean: f64,
    stderr: f64,
    batches: usize,
    burn_in: f64,
    samples: usize,
}

#[derive(Serialize)]
struct RunningRow<'a> {
    run: usize,
    observable: &'a str,
    t: f64,
    average: f64,
}

/// Running averages are thinned to about this many points per series.
const RUNNING_POINTS: usize = 1000;

fn run_ergodic(s: &ErgodicSpec, art: &mut Artifacts) -> CliResult<Outcome> {
    let cfg = &s.sim;
    let e = &s.ergodic;
    let integ = Integrator::new(cfg)?;
    let burn_in = e.burn_in.unwrap_or_else(|| default_burn_in(&cfg.params));
    if burn_in >= cfg.t_end {
        return Err(CliError::Config(format!(
            "ergodic.burn_in: default 20/lambda_1 = {burn_in} is not below t_end = {}",
            cfg.t_end
        )));
    }
    let certificates = json!({ "noise": noise_certificates(integ.noise()), "burn_in": burn_in });
    let results: Vec<_> = (0..e.runs as u64)
        .into_par_iter()
        .map(|r| sample_run(&integ, r, &e.observables))
        .collect();
    let mut runs = Vec::new();
    for r in results {
        match r {
            Ok(v) => runs.push(v),
            Err(err) => {
                return Ok(Outcome {
                    certificates,
                    steps: 0,
                    failure: Some(err.into()),
                })
            }
        }
    }
    let names: Vec<String> = e.observables.iter().map(observable_name).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Runtime(format!("observables.csv: {e}"));
    let mut header = vec!["run".to_string(), "t".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, samples) in runs.iter().enumerate() {
        for (t, vals) in samples {
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(vals.iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(format!("observables.csv: {e}")))?;
    art.write("observables.csv", &bytes)?;

    let mut averages = Vec::new();
    let mut running = Vec::new();
    for (i, samples) in runs.iter().enumerate() {
        for (j, name) in names.iter().enumerate() {
            let series: Vec<(f64, f64)> = samples.iter().map(|(t, v)| (*t, v[j])).collect();
            let avg = time_average(&series, burn_in, e.batches)?;
            let thin = (avg.running.len() / RUNNING_POINTS).max(1);
            running.extend(avg.running.iter().enumerate().filter(|(k, _)| k % thin == 0).map(
                |(_, &(t, a))| RunningRow {
                    run: i,
                    observable: name.as_str(),
                    t,
                    average: a,
                },
            ));
            averages.push(AverageRow {
                run: i,
                observable: name.clone(),
                mean: avg.mean,
                stderr: avg.stderr,
                batches: avg.batches,
                burn_in,
                samples: avg.running.len(),
            });
        }
    }
    art.write_csv("ergodic.csv", &averages)?;
    art.write_csv("running.csv", &running)?;
    Ok(Outcome::ok(certificates, cfg.n_steps() * e.runs as u64))
}

fn run_verify(s: &VerifySpec, art: &mut Artifacts) -> CliResult<Outcome> {
    let reports = run_plan(&s.verify)?;
    let total: usize = reports.iter().map(|r| r.claims.len()).sum();
    let failed: usize = reports
        .iter()
        .map(|r| r.claims.iter().filter(|c| !c.pass).count())
        .sum();
    let doc = json!({
        "profile": s.verify.profile,
        "seed": s.verify.seed,
        "pass": failed == 0,
        "claims_total": total,
        "claims_failed": failed,
        "suites": reports,
    });
    art.write_json("verify_report.json", &doc)?;
    let mut txt = String::new();
    for r in &reports {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        txt.push_str(&format!(
            "{verdict} criterion {} {}\n",
            r.criterion,
            r.suite.name()
        ));
        for c in &r.claims {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            txt.push_str(&format!(
                "  {verdict} {} observed={:e} bound={:e}{}\n",
                c.id,
                c.observed,
                c.bound,
                if c.detail.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", c.detail)
                }
            ));
        }
    }
    txt.push_str(&format!("{} of {total} claims passed\n", total - failed));
    art.write("verify_report.txt", txt.as_bytes())?;
    let failure = (failed > 0).then(|| CliError::Verification(format!("{failed} of {total} claims failed")));
    Ok(Outcome {
        certificates: json!({}),
        steps: 0,
        failure,
    })
}

fn run_spectrum(s: &SpectrumSpec, art: &mut Artifacts) -> CliResult<Outcome> {
    let grid = Grid::new(s.grid)?;
    let NoiseModel::Additive(a) = s.noise.build(&s.params, &grid)? else {
        return Err(CliError::Config(
            "noise: the spectrum kind needs additive (e1/e3) noise".into(),
        ));
    };
    write_sigma(art, &a)?;
    let mut certificates = ergodicity_certificates(Some(&a), &grid, &s.params, s.n_ball)?;
    certificates["noise"] = additive_certificates(&a);
    certificates["lambda1"] = json!(s.params.lambda1());
    art.write_json("certificates.json", &certificates)?;
    Ok(Outcome::ok(certificates, 0))
}
