//! Experiment files: one TOML document per run, selected by `kind`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqg_core::coupling::{CoupledConfig, Coupler};
use sqg_core::diagnostics::Observable;
use sqg_core::dynamics::PhysicalParams;
use sqg_core::integrate::{InitialCondition, Integrator, SimConfig};
use sqg_core::noise::{NoiseModel, NoiseSpec};
use sqg_core::spectral::{EmpiricalConstants, Grid, GridSpec};
use sqg_core::verify::VerifyPlan;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Couple,
    Ergodic,
    Verify,
    Spectrum,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Couple => "couple",
            Kind::Ergodic => "ergodic",
            Kind::Verify => "verify",
            Kind::Spectrum => "spectrum",
        }
    }
}

fn one() -> usize {
    1
}
fn two() -> f64 {
    2.0
}
fn twenty() -> usize {
    20
}
fn default_ball() -> u32 {
    2
}
fn default_observables() -> Vec<Observable> {
    vec![Observable::L2Sq]
}

/// Compare the ensemble mean of `‖θ‖^p_{L^p}` with the moment bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSection {
    #[serde(default = "two")]
    pub slack_factor: f64,
    /// Overrides the frozen or measured `Ĉ_S`.
    #[serde(default)]
    pub c_sobolev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub kind: Kind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub sim: SimConfig,
    #[serde(default = "one")]
    pub trajectories: usize,
    /// Save a resumable checkpoint every this many steps.
    #[serde(default)]
    pub checkpoint_stride: Option<u64>,
    /// Continue from a checkpoint directory instead of `t = 0`.
    #[serde(default)]
    pub resume_from: Option<PathBuf>,
    #[serde(default)]
    pub moment: Option<MomentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleSpec {
    pub kind: Kind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub couple: CoupledConfig,
    /// Start of the window used for the rate fit.
    #[serde(default)]
    pub fit_from: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicSection {
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    /// Defaults to `20/λ_1`.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "twenty")]
    pub batches: usize,
    /// Independent runs on trajectory keys `0..runs`.
    #[serde(default = "one")]
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicSpec {
    pub kind: Kind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub sim: SimConfig,
    pub ergodic: ErgodicSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub kind: Kind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub kind: Kind,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub noise: NoiseSpec,
    /// Radius `N` of the ball checked for non-degenerate noise.
    #[serde(default = "default_ball")]
    pub n_ball: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentSpec {
    Simulate(SimulateSpec),
    Couple(CoupleSpec),
    Ergodic(ErgodicSpec),
    Verify(VerifySpec),
    Spectrum(SpectrumSpec),
}

#[derive(Deserialize)]
struct Head {
    kind: Kind,
}

fn toml_err(origin: &str, e: toml::de::Error) -> CliError {
    CliError::Config(format!("{origin}: {e}"))
}

fn json_err(origin: &str, e: serde_json::Error) -> CliError {
    CliError::Config(format!("{origin}: {e}"))
}

impl ExperimentSpec {
    pub fn kind(&self) -> Kind {
        match self {
            ExperimentSpec::Simulate(_) => Kind::Simulate,
            ExperimentSpec::Couple(_) => Kind::Couple,
            ExperimentSpec::Ergodic(_) => Kind::Ergodic,
            ExperimentSpec::Verify(_) => Kind::Verify,
            ExperimentSpec::Spectrum(_) => Kind::Spectrum,
        }
    }

    pub fn out_dir(&self) -> Option<&Path> {
        match self {
            ExperimentSpec::Simulate(s) => s.out_dir.as_deref(),
            ExperimentSpec::Couple(s) => s.out_dir.as_deref(),
            ExperimentSpec::Ergodic(s) => s.out_dir.as_deref(),
            ExperimentSpec::Verify(s) => s.out_dir.as_deref(),
            ExperimentSpec::Spectrum(s) => s.out_dir.as_deref(),
        }
    }

    /// Root seed of the Wiener stream, when the kind has one.
    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentSpec::Simulate(s) => Some(s.sim.seed),
            ExperimentSpec::Couple(s) => Some(s.couple.base.seed),
            ExperimentSpec::Ergodic(s) => Some(s.sim.seed),
            ExperimentSpec::Verify(s) => Some(s.verify.seed),
            ExperimentSpec::Spectrum(_) => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentSpec::Simulate(s) => s.sim.seed = seed,
            ExperimentSpec::Couple(s) => s.couple.base.seed = seed,
            ExperimentSpec::Ergodic(s) => s.sim.seed = seed,
            ExperimentSpec::Verify(s) => s.verify.seed = seed,
            ExperimentSpec::Spectrum(_) => {}
        }
    }

    /// The resolved spec as JSON (all defaults filled in).
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            ExperimentSpec::Simulate(s) => serde_json::to_value(s),
            ExperimentSpec::Couple(s) => serde_json::to_value(s),
            ExperimentSpec::Ergodic(s) => serde_json::to_value(s),
            ExperimentSpec::Verify(s) => serde_json::to_value(s),
            ExperimentSpec::Spectrum(s) => serde_json::to_value(s),
        };
        v.expect("specs serialize")
    }

    /// Reads the echo stored in a manifest.
    pub fn from_json(value: &serde_json::Value) -> CliResult<Self> {
        let origin = "manifest config";
        let head: Head = serde_json::from_value(value.clone()).map_err(|e| json_err(origin, e))?;
        let v = value.clone();
        let spec = match head.kind {
            Kind::Simulate => {
                ExperimentSpec::Simulate(serde_json::from_value(v).map_err(|e| json_err(origin, e))?)
            }
            Kind::Couple => {
                ExperimentSpec::Couple(serde_json::from_value(v).map_err(|e| json_err(origin, e))?)
            }
            Kind::Ergodic => {
                ExperimentSpec::Ergodic(serde_json::from_value(v).map_err(|e| json_err(origin, e))?)
            }
            Kind::Verify => {
                ExperimentSpec::Verify(serde_json::from_value(v).map_err(|e| json_err(origin, e))?)
            }
            Kind::Spectrum => {
                ExperimentSpec::Spectrum(serde_json::from_value(v).map_err(|e| json_err(origin, e))?)
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks everything that can be checked without running: parameter
    /// ranges, scheme compatibility and the noise trace certificates.
    pub fn validate(&self) -> CliResult<()> {
        match self {
            ExperimentSpec::Simulate(s) => {
                expect_kind(s.kind, Kind::Simulate)?;
                let integ = Integrator::new(&s.sim)?;
                if s.trajectories == 0 {
                    return Err(CliError::Config("trajectories: must be >= 1".into()));
                }
                if (s.checkpoint_stride.is_some() || s.resume_from.is_some()) && s.trajectories != 1 {
                    return Err(CliError::Config(
                        "checkpoint_stride/resume_from: only available with trajectories = 1".into(),
                    ));
                }
                if s.checkpoint_stride == Some(0) {
                    return Err(CliError::Config("checkpoint_stride: must be >= 1".into()));
                }
                if let Some(m) = &s.moment {
                    if integ.additive_noise().is_none() {
                        return Err(CliError::Config("moment: needs additive noise".into()));
                    }
                    if s.trajectories < 16 {
                        return Err(CliError::Config(format!(
                            "moment: needs at least 16 trajectories (got {})",
                            s.trajectories
                        )));
                    }
                    if !(m.slack_factor >= 1.0) {
                        return Err(CliError::Config(format!(
                            "moment.slack_factor: must be >= 1 (got {})",
                            m.slack_factor
                        )));
                    }
                }
                Ok(())
            }
            ExperimentSpec::Couple(s) => {
                expect_kind(s.kind, Kind::Couple)?;
                s.couple.validate()?;
                let grid = Grid::new(s.couple.base.grid)?;
                Coupler::new(&s.couple, sync_constants(&grid, &s.couple.base.params))?;
                Ok(())
            }
            ExperimentSpec::Ergodic(s) => {
                expect_kind(s.kind, Kind::Ergodic)?;
                Integrator::new(&s.sim)?;
                let e = &s.ergodic;
                if e.observables.is_empty() {
                    return Err(CliError::Config("ergodic.observables: must not be empty".into()));
                }
                if e.batches < 2 {
                    return Err(CliError::Config(format!(
                        "ergodic.batches: must be >= 2 (got {})",
                        e.batches
                    )));
                }
                if e.runs == 0 {
                    return Err(CliError::Config("ergodic.runs: must be >= 1".into()));
                }
                if let Some(b) = e.burn_in {
                    if !(b >= 0.0 && b < s.sim.t_end) {
                        return Err(CliError::Config(format!(
                            "ergodic.burn_in: must lie in [0, t_end) (got {b})"
                        )));
                    }
                }
                Ok(())
            }
            ExperimentSpec::Verify(s) => {
                expect_kind(s.kind, Kind::Verify)?;
                if s.verify.suites.as_ref().is_some_and(|v| v.is_empty()) {
                    return Err(CliError::Config("verify.suites: must not be empty".into()));
                }
                Ok(())
            }
            ExperimentSpec::Spectrum(s) => {
                expect_kind(s.kind, Kind::Spectrum)?;
                let grid = Grid::new(s.grid)?;
                if let NoiseModel::Additive(_) = s.noise.build(&s.params, &grid)? {
                    Ok(())
                } else {
                    Err(CliError::Config(
                        "noise: the spectrum kind needs additive (e1/e3) noise".into(),
                    ))
                }
            }
        }
    }

    /// Makes file references absolute, relative to `base`.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_ic = |ic: &mut InitialCondition| {
            if let InitialCondition::Snapshot { path } = ic {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        match self {
            ExperimentSpec::Simulate(s) => {
                fix_ic(&mut s.sim.initial_condition);
                if let Some(p) = s.resume_from.as_mut() {
                    fix(p);
                }
            }
            ExperimentSpec::Couple(s) => {
                fix_ic(&mut s.couple.base.initial_condition);
                fix_ic(&mut s.couple.theta0_tilde);
            }
            ExperimentSpec::Ergodic(s) => fix_ic(&mut s.sim.initial_condition),
            ExperimentSpec::Verify(_) | ExperimentSpec::Spectrum(_) => {}
        }
    }
}

fn expect_kind(got: Kind, want: Kind) -> CliResult<()> {
    if got == want {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "kind: expected `{}`, got `{}`",
            want.as_str(),
            got.as_str()
        )))
    }
}

/// Constants for the decay functional at the critical exponent.
pub fn sync_constants(grid: &Grid, params: &PhysicalParams) -> EmpiricalConstants {
    EmpiricalConstants::frozen_or_measure_sync(grid, sqg_core::coupling::p_critical(params.alpha))
}

/// Parses and validates an experiment document. `origin` labels errors and
/// `base` anchors relative paths.
pub fn parse_config_str(text: &str, origin: &str, base: &Path) -> CliResult<ExperimentSpec> {
    let head: Head = toml::from_str(text).map_err(|e| toml_err(origin, e))?;
    let mut spec = match head.kind {
        Kind::Simulate => ExperimentSpec::Simulate(toml::from_str(text).map_err(|e| toml_err(origin, e))?),
        Kind::Couple => ExperimentSpec::Couple(toml::from_str(text).map_err(|e| toml_err(origin, e))?),
        Kind::Ergodic => ExperimentSpec::Ergodic(toml::from_str(text).map_err(|e| toml_err(origin, e))?),
        Kind::Verify => ExperimentSpec::Verify(toml::from_str(text).map_err(|e| toml_err(origin, e))?),
        Kind::Spectrum => ExperimentSpec::Spectrum(toml::from_str(text).map_err(|e| toml_err(origin, e))?),
    };
    spec.resolve_paths(base);
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> CliResult<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &path.display().to_string(), &base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> CliResult<ExperimentSpec> {
        parse_config_str(text, "test.toml", Path::new("/tmp"))
    }

    const MINIMAL: &str = r#"
kind = "simulate"
[sim]
params = { kappa = 1.0, alpha = 0.75 }
grid = { modes_per_dim = 16 }
dt = 0.01
t_end = 1.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let ExperimentSpec::Simulate(s) = parse(MINIMAL).unwrap() else {
            panic!("wrong kind")
        };
        assert_eq!(s.trajectories, 1);
        assert_eq!(s.sim.diagnostic_stride, 1);
        assert_eq!(s.sim.h1_ceiling, 1e6);
        assert_eq!(s.sim.lp_exponent, 4.0);
        assert!(s.sim.noise.is_none());
        let echo = ExperimentSpec::Simulate(s.clone()).to_json();
        assert_eq!(echo["sim"]["scheme"], "exp-euler-additive");
        assert_eq!(
            ExperimentSpec::from_json(&echo).unwrap(),
            ExperimentSpec::Simulate(s)
        );
    }

    #[test]
    fn alpha_out_of_range() {
        let e = parse(&MINIMAL.replace("alpha = 0.75", "alpha = 1.2")).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("alpha must lie in (0,1)"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let e = parse(&MINIMAL.replace("t_end = 1.0", "t_end = 1.0\ntend = 2.0")).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("tend") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse("kind = \"simulate\"\n[sim\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn divergent_margin_names_the_exponent() {
        let text = format!("{MINIMAL}[sim.noise]\nkind = \"e3\"\ns_reg = 1.0\nsmoothing_margin = 2.0\n");
        let e = parse(&text).unwrap_err();
        let msg = e.to_string();
        assert_eq!(e.exit_code(), 1);
        assert!(
            msg.contains("divergent trace") && msg.contains("tail exponent"),
            "{msg}"
        );
    }

    #[test]
    fn kind_must_be_known() {
        assert!(parse("kind = \"bogus\"").is_err());
    }

    #[test]
    fn relative_snapshot_paths_resolve_against_the_config() {
        let text = MINIMAL.replace(
            "t_end = 1.0",
            "t_end = 1.0\ninitial_condition = { kind = \"snapshot\", path = \"theta0.bin\" }",
        );
        // the file does not exist, so building the state fails later; parsing
        // only fixes the path
        let head: SimulateSpec = toml::from_str(&text).unwrap();
        let mut spec = ExperimentSpec::Simulate(head);
        spec.resolve_paths(Path::new("/data"));
        let ExperimentSpec::Simulate(s) = spec else {
            unreachable!()
        };
        assert_eq!(
            s.sim.initial_condition,
            InitialCondition::Snapshot {
                path: "/data/theta0.bin".into()
            }
        );
    }
}
