//! Acceptance run at full problem sizes: one PASS/FAIL line per criterion.
//!
//! Criteria 1-12 run the property suites at the `acceptance` profile and are
//! also held to their wall-clock budgets. Criterion 13 drives the binary and
//! reruns each experiment from its manifest at a different thread count.
//!
//! A criterion FAIL is printed but does not fail the test binary unless
//! `SQG_ACCEPTANCE_STRICT=1`; a suite that errors out always does.
//! `SQG_ACCEPTANCE_ONLY=1,13` restricts the run to the listed criteria.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use sqg_core::verify::{run_suite, Profile, Suite};

const SEED: u64 = 0;

struct Line {
    criterion: u32,
    name: String,
    pass: bool,
    note: String,
}

fn print(l: &Line) {
    let verdict = if l.pass { "PASS" } else { "FAIL" };
    println!("{verdict} criterion {:>2} {}: {}", l.criterion, l.name, l.note);
}

fn suite_line(suite: Suite) -> Result<Line, String> {
    let start = Instant::now();
    let claims = run_suite(suite, Profile::Acceptance, SEED).map_err(|e| format!("{}: {e}", suite.name()))?;
    let secs = start.elapsed().as_secs_f64();
    let limit = suite.runtime_limit();
    let failed: Vec<String> = claims
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} observed {:.4e} vs bound {:.4e}", c.id, c.observed, c.bound))
        .collect();
    let in_time = secs <= limit;
    let mut note = format!(
        "{}/{} claims, {secs:.1} s of {limit:.0} s",
        claims.len() - failed.len(),
        claims.len()
    );
    if let [c] = claims.as_slice() {
        note.push_str(&format!(
            "; {} observed {:.4e} vs bound {:.4e}",
            c.id, c.observed, c.bound
        ));
    }
    if !failed.is_empty() {
        note.push_str(&format!("; failed: {}", failed.join(", ")));
    }
    if !in_time {
        note.push_str("; over the runtime budget");
    }
    Ok(Line {
        criterion: suite.criterion(),
        name: suite.name().to_string(),
        pass: failed.is_empty() && in_time,
        note,
    })
}

fn sqg(args: &[&str], dir: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "sqg {} exited {:?}: {}",
            args.join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

const ENSEMBLE: &str = r#"
kind = "simulate"
trajectories = 8
[sim]
params = { kappa = 1.0, alpha = 0.75 }
grid = { modes_per_dim = 16 }
dt = 0.01
t_end = 2.0
seed = 13
diagnostic_stride = 5
snapshot_stride = 100
initial_condition = { kind = "random", seed = 2, l2_norm = 1.0 }
[sim.noise]
kind = "e3"
s_reg = 2.0
"#;

const COUPLED: &str = r#"
kind = "couple"
[couple]
n = 2
pairs = 4
theta0_tilde = { kind = "random", seed = 21, l2_norm = 3.0 }
[couple.base]
params = { kappa = 1.0, alpha = 0.75 }
grid = { modes_per_dim = 16 }
dt = 0.005
t_end = 2.0
seed = 13
diagnostic_stride = 10
initial_condition = { kind = "random", seed = 20, l2_norm = 3.0 }
[couple.base.noise]
kind = "e3"
s_reg = 2.0
q0_scale = 100.0
"#;

const ERGODIC: &str = r#"
kind = "ergodic"
[ergodic]
observables = [{ name = "l2-sq" }, { name = "lp-pow" }]
burn_in = 2.0
runs = 3
[sim]
params = { kappa = 1.0, alpha = 0.75 }
grid = { modes_per_dim = 16 }
dt = 0.02
t_end = 20.0
seed = 13
[sim.noise]
kind = "e3"
s_reg = 2.0
"#;

/// Runs each experiment on one thread, reruns it from the manifest on four,
/// and compares every CSV byte for byte.
fn reproducibility() -> Result<Line, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut csvs = 0;
    for (kind, text) in [("simulate", ENSEMBLE), ("couple", COUPLED), ("ergodic", ERGODIC)] {
        fs::write(d.join(format!("{kind}.toml")), text).map_err(|e| e.to_string())?;
        let a = format!("{kind}_a");
        let b = format!("{kind}_b");
        sqg(
            &[
                kind,
                "--config",
                &format!("{kind}.toml"),
                "--out",
                &a,
                "--threads",
                "1",
            ],
            d,
        )?;
        sqg(
            &[
                kind,
                "--manifest",
                &format!("{a}/manifest.json"),
                "--out",
                &b,
                "--threads",
                "4",
            ],
            d,
        )?;
        for e in fs::read_dir(d.join(&a)).map_err(|e| e.to_string())? {
            let p = e.map_err(|e| e.to_string())?.path();
            if p.extension().is_some_and(|x| x == "csv") {
                let name = p.file_name().unwrap();
                let other = d.join(&b).join(name);
                if fs::read(&p).ok() != fs::read(&other).ok() {
                    return Err(format!("{kind}: {} differs after rerun", name.to_string_lossy()));
                }
                csvs += 1;
            }
        }
    }
    Ok(Line {
        criterion: 13,
        name: "reproducibility".into(),
        pass: true,
        note: format!(
            "{csvs} CSVs byte-identical across 1 and 4 threads, {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    })
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("SQG_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |c: u32| only.as_ref().is_none_or(|v| v.contains(&c));
    let strict = std::env::var("SQG_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut lines = Vec::new();
    let mut errors = Vec::new();
    for suite in Suite::ALL {
        if !wanted(suite.criterion()) {
            continue;
        }
        match suite_line(suite) {
            Ok(l) => {
                print(&l);
                lines.push(l);
            }
            Err(e) => {
                println!(
                    "FAIL criterion {:>2} {}: error: {e}",
                    suite.criterion(),
                    suite.name()
                );
                errors.push(e);
            }
        }
    }
    if wanted(13) {
        match reproducibility() {
            Ok(l) => {
                print(&l);
                lines.push(l);
            }
            Err(e) => {
                println!("FAIL criterion 13 reproducibility: {e}");
                errors.push(e);
            }
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!(
        "acceptance: {passed} of {} criteria passed",
        lines.len() + errors.len()
    );
    if !errors.is_empty() || (strict && passed < lines.len()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
