//! Time stepping with an exact integrating factor for `A_α`.
//!
//! Schemes:
//! - `exp-euler-additive`: `z` by the exact OU step, `v = θ - z` by
//!   `v' = e^{-A dt}(v + dt·N(v + z))`.
//! - `euler-maruyama`: `θ' = e^{-A dt}(θ + dt·N(θ)) + G(θ)ΔW`.
//! - `deterministic-rk4`: integrating-factor (Lawson) RK4 on the drift.
//!
//! With `delta_mollify` set, `N` uses the delayed velocity `U_δ` instead of
//! `R^⊥θ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advect, mollified_velocity, nonlinear_term, HistoryBuffer, PhysicalParams};
use crate::error::{Error, Result};
use crate::noise::{
    wiener_increment_refined, AdditiveSpectralNoise, NoiseModel, NoiseSpec, OuStepper, WienerStream,
};
use crate::spectral::{
    lp_norm, poisson_filter, random_field, riesz_perp, snapshot, sobolev_norm, Grid, GridSpec, Level,
    RandomFieldSpec, SpectralField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ExpEulerAdditive,
    EulerMaruyama,
    DeterministicRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Cos,
    Sin,
}

/// Named generator for `θ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// `amplitude·cos(k·ξ)` or `amplitude·sin(k·ξ)`.
    Mode {
        k1: i32,
        k2: i32,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default = "cos_phase")]
        phase: Phase,
    },
    /// Sum of modes.
    Modes {
        modes: Vec<ModeTerm>,
    },
    Random {
        seed: u64,
        #[serde(default = "default_slope")]
        slope: f64,
        #[serde(default)]
        band: Option<i32>,
        #[serde(default)]
        l2_norm: Option<f64>,
    },
    Snapshot {
        path: std::path::PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeTerm {
    pub k1: i32,
    pub k2: i32,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default = "cos_phase")]
    pub phase: Phase,
}

fn unit() -> f64 {
    1.0
}
fn cos_phase() -> Phase {
    Phase::Cos
}
fn default_slope() -> f64 {
    2.0
}

fn mode_field(grid: &Grid, k1: i32, k2: i32, amplitude: f64, phase: Phase) -> Result<SpectralField> {
    if grid.index(k1, k2).is_none() || (k1, k2) == (0, 0) {
        return Err(Error::param(
            "initial_condition",
            format!("mode ({k1}, {k2}) is not a retained nonzero wavenumber"),
            format!("({k1}, {k2})"),
        ));
    }
    Ok(match phase {
        Phase::Cos => SpectralField::cos_mode(grid, k1, k2, amplitude),
        Phase::Sin => SpectralField::sin_mode(grid, k1, k2, amplitude),
    })
}

impl InitialCondition {
    pub fn build(&self, grid: &Grid) -> Result<SpectralField> {
        match self {
            InitialCondition::Zero => Ok(SpectralField::zeros(grid)),
            InitialCondition::Mode {
                k1,
                k2,
                amplitude,
                phase,
            } => mode_field(grid, *k1, *k2, *amplitude, *phase),
            InitialCondition::Modes { modes } => {
                let mut f = SpectralField::zeros(grid);
                for m in modes {
                    f += &mode_field(grid, m.k1, m.k2, m.amplitude, m.phase)?;
                }
                Ok(f)
            }
            InitialCondition::Random {
                seed,
                slope,
                band,
                l2_norm,
            } => {
                let spec = RandomFieldSpec {
                    slope: *slope,
                    band: *band,
                    l2_norm: *l2_norm,
                };
                Ok(random_field(grid, &spec, &mut ChaCha8Rng::seed_from_u64(*seed)))
            }
            InitialCondition::Snapshot { path } => {
                let bytes = std::fs::read(path)
                    .map_err(|e| Error::Snapshot(format!("cannot read {}: {e}", path.display())))?;
                snapshot::decode(&bytes, grid)
            }
        }
    }
}

fn default_stride() -> u64 {
    1
}
fn default_ceiling() -> f64 {
    1e6
}
fn default_lp() -> f64 {
    4.0
}
fn default_substeps() -> u32 {
    1
}
fn default_scheme() -> Scheme {
    Scheme::ExpEulerAdditive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub params: PhysicalParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "zero_ic")]
    pub initial_condition: InitialCondition,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
    /// Field snapshots every this many steps; none when absent.
    #[serde(default)]
    pub snapshot_stride: Option<u64>,
    #[serde(default = "default_stride")]
    pub diagnostic_stride: u64,
    /// Activates the delayed, mollified velocity.
    #[serde(default)]
    pub delta_mollify: Option<f64>,
    /// Also smooth noise increments by the Poisson kernel `k_δ`.
    #[serde(default)]
    pub mollify_noise: bool,
    /// Abort when `‖θ‖_{H^1}` exceeds this value.
    #[serde(default = "default_ceiling")]
    pub h1_ceiling: f64,
    /// Exponent of the `L^p` norm recorded in diagnostics.
    #[serde(default = "default_lp")]
    pub lp_exponent: f64,
    /// Each increment is summed from this many finer draws, so that runs at
    /// `dt` and `dt/m` share a Brownian path.
    #[serde(default = "default_substeps")]
    pub noise_substeps: u32,
}

fn zero_ic() -> InitialCondition {
    InitialCondition::Zero
}

impl SimConfig {
    /// Config with documented defaults for the optional fields.
    pub fn new(params: PhysicalParams, grid: GridSpec, dt: f64, t_end: f64) -> Self {
        SimConfig {
            params,
            grid,
            noise: None,
            dt,
            t_end,
            initial_condition: InitialCondition::Zero,
            scheme: Scheme::ExpEulerAdditive,
            seed: 0,
            snapshot_stride: None,
            diagnostic_stride: 1,
            delta_mollify: None,
            mollify_noise: false,
            h1_ceiling: default_ceiling(),
            lp_exponent: default_lp(),
            noise_substeps: 1,
        }
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "dt must be positive", self.dt));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::param("t_end", "t_end must be >= dt", self.t_end));
        }
        if self.diagnostic_stride == 0 {
            return Err(Error::param("diagnostic_stride", "stride must be >= 1", 0));
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::param("snapshot_stride", "stride must be >= 1", 0));
        }
        if self.noise_substeps == 0 {
            return Err(Error::param("noise_substeps", "must be >= 1", 0));
        }
        if !(self.lp_exponent >= 1.0) {
            return Err(Error::param("lp_exponent", "p must be >= 1", self.lp_exponent));
        }
        if !(self.h1_ceiling > 0.0) {
            return Err(Error::param(
                "h1_ceiling",
                "ceiling must be positive",
                self.h1_ceiling,
            ));
        }
        let multiplicative = matches!(self.noise, Some(NoiseSpec::Multiplicative(_)));
        match self.scheme {
            Scheme::ExpEulerAdditive if multiplicative => {
                return Err(Error::param(
                    "scheme",
                    "exp-euler-additive needs additive noise (use euler-maruyama)",
                    "exp-euler-additive",
                ))
            }
            Scheme::DeterministicRk4 if self.noise.is_some() => {
                return Err(Error::param(
                    "scheme",
                    "deterministic-rk4 does not accept a noise section",
                    "deterministic-rk4",
                ))
            }
            _ => {}
        }
        if let Some(delta) = self.delta_mollify {
            if !(delta > 0.0) {
                return Err(Error::param("delta_mollify", "delta must be positive", delta));
            }
            if self.scheme == Scheme::ExpEulerAdditive {
                return Err(Error::param(
                    "delta_mollify",
                    "the delayed velocity is available with euler-maruyama and deterministic-rk4",
                    delta,
                ));
            }
            if self.dt > delta / 8.0 {
                return Err(Error::param("dt", "dt must be <= delta_mollify/8", self.dt));
            }
        } else if self.mollify_noise {
            return Err(Error::param("mollify_noise", "requires delta_mollify", "true"));
        }
        Ok(())
    }
}

/// State of one trajectory. When decomposed, `θ = v + z`.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    pub t: f64,
    pub step: u64,
    pub v: SpectralField,
    pub z: Option<SpectralField>,
    pub history: Option<HistoryBuffer>,
    /// `∫_0^t ‖θ‖^2_{H^α} ds` (left Riemann sum).
    pub dissipation_integral: f64,
}

impl TrajectoryState {
    pub fn theta(&self) -> SpectralField {
        match &self.z {
            Some(z) => &self.v + z,
            None => self.v.clone(),
        }
    }
}

/// One diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub l2: f64,
    pub h_alpha: f64,
    pub h1: f64,
    pub lp: f64,
    /// Fraction of `|θ|^2` in the outer third of the spectrum.
    pub tail_fraction: f64,
    /// `∫_0^t ‖θ‖^2_{H^α} ds`.
    pub diss_int: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub lp_exponent: f64,
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsRecord {
    pub fn last(&self) -> Option<&DiagnosticsRow> {
        self.rows.last()
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub record: DiagnosticsRecord,
    pub snapshots: Vec<(f64, SpectralField)>,
    pub final_state: TrajectoryState,
}

/// A failed run together with the diagnostics gathered up to the failure.
#[derive(Debug, Clone)]
pub struct SimFailure {
    pub error: Error,
    pub record: DiagnosticsRecord,
}

impl From<SimFailure> for Error {
    fn from(f: SimFailure) -> Self {
        f.error
    }
}

impl From<Error> for SimFailure {
    fn from(error: Error) -> Self {
        SimFailure {
            error,
            record: DiagnosticsRecord {
                lp_exponent: f64::NAN,
                rows: Vec::new(),
            },
        }
    }
}

/// Prepared stepper for one configuration.
#[derive(Debug, Clone)]
pub struct Integrator {
    config: SimConfig,
    grid: Grid,
    noise: Option<NoiseModel>,
    stream: WienerStream,
    expo: Vec<f64>,
    expo_half: Vec<f64>,
    ou: Option<OuStepper>,
}

impl Integrator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::new(config.grid)?;
        let noise = config
            .noise
            .as_ref()
            .map(|n| n.build(&config.params, &grid))
            .transpose()?;
        Self::with_noise(config, grid, noise)
    }

    /// Uses an already-built noise model (must match `config.grid`).
    pub fn with_noise(config: &SimConfig, grid: Grid, noise: Option<NoiseModel>) -> Result<Self> {
        config.validate()?;
        let kabs = grid.kabs();
        let dt = config.dt;
        let expo: Vec<f64> = kabs
            .iter()
            .map(|&k| (-config.params.eigenvalue(k) * dt).exp())
            .collect();
        let expo_half: Vec<f64> = kabs
            .iter()
            .map(|&k| (-config.params.eigenvalue(k) * dt * 0.5).exp())
            .collect();
        let ou = match (&config.scheme, noise.as_ref().and_then(|n| n.as_additive())) {
            (Scheme::ExpEulerAdditive, Some(a)) => Some(OuStepper::new(a, &config.params, dt)),
            _ => None,
        };
        Ok(Integrator {
            config: config.clone(),
            grid,
            noise,
            stream: WienerStream::new(config.seed),
            expo,
            expo_half,
            ou,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn noise(&self) -> Option<&NoiseModel> {
        self.noise.as_ref()
    }

    pub fn additive_noise(&self) -> Option<&AdditiveSpectralNoise> {
        self.noise.as_ref().and_then(|n| n.as_additive())
    }

    pub fn stream(&self) -> &WienerStream {
        &self.stream
    }

    /// State at `t = 0` from the configured initial condition.
    pub fn initial_state(&self) -> Result<TrajectoryState> {
        let theta0 = self.config.initial_condition.build(&self.grid)?;
        Ok(self.state_from(theta0))
    }

    pub fn state_from(&self, theta0: SpectralField) -> TrajectoryState {
        let z = match self.config.scheme {
            Scheme::ExpEulerAdditive => Some(SpectralField::zeros(&self.grid)),
            _ => None,
        };
        let history = self.config.delta_mollify.map(|d| {
            let mut h = HistoryBuffer::new(d).expect("validated delta");
            h.push(0.0, theta0.clone());
            h
        });
        TrajectoryState {
            t: 0.0,
            step: 0,
            v: theta0,
            z,
            history,
            dissipation_integral: 0.0,
        }
    }

    fn expo_apply(&self, f: &SpectralField, half: bool) -> SpectralField {
        let e = if half { &self.expo_half } else { &self.expo };
        let mut i = 0;
        f.map_modes(|_, _| {
            let v = e[i];
            i += 1;
            v
        })
    }

    /// Advective part at time `t` (delayed velocity when mollifying).
    fn advective(&self, x: &SpectralField, history: Option<&HistoryBuffer>, t: f64) -> Result<SpectralField> {
        match history {
            Some(h) => {
                let (u1, u2) = mollified_velocity(h, t, x)?;
                Ok(advect(&u1, &u2, x))
            }
            None => Ok(nonlinear_term(x)),
        }
    }

    pub fn increment(&self, traj: u64, step: u64) -> Vec<f64> {
        wiener_increment_refined(
            &self.stream,
            traj,
            step,
            self.config.dt,
            self.config.noise_substeps,
            &self.grid,
        )
    }

    /// Advances `state` by one step of trajectory `traj`.
    pub fn step(&self, state: &mut TrajectoryState, traj: u64) -> Result<()> {
        let dt = self.config.dt;
        let t = state.t;
        let theta = state.theta();
        state.dissipation_integral += dt * sobolev_norm(&theta, self.config.params.alpha).powi(2);
        match self.config.scheme {
            Scheme::ExpEulerAdditive => {
                let z = state.z.as_ref().expect("decomposed state");
                let mut w = state.v.clone();
                w.axpy(dt, &nonlinear_term(&theta));
                let v_new = self.expo_apply(&w, false);
                let z_new = match &self.ou {
                    Some(ou) => ou.step(z, &self.increment(traj, state.step)),
                    None => self.expo_apply(z, false),
                };
                state.v = v_new;
                state.z = Some(z_new);
            }
            Scheme::EulerMaruyama => {
                let mut w = theta.clone();
                w.axpy(dt, &self.advective(&theta, state.history.as_ref(), t)?);
                let mut out = self.expo_apply(&w, false);
                if let Some(noise) = &self.noise {
                    let xi = self.increment(traj, state.step);
                    let mut dw = noise.apply(&theta, &xi)?;
                    if self.config.mollify_noise {
                        dw = poisson_filter(&dw, self.config.delta_mollify.expect("validated"));
                    }
                    out += &dw;
                }
                state.v = out;
            }
            Scheme::DeterministicRk4 => {
                let h = state.history.as_ref();
                let u = &theta;
                let k1 = self.advective(u, h, t)?;
                let mut a = u.clone();
                a.axpy(0.5 * dt, &k1);
                let a = self.expo_apply(&a, true);
                let k2 = self.advective(&a, h, t + 0.5 * dt)?;
                let eu_half = self.expo_apply(u, true);
                let mut b = eu_half.clone();
                b.axpy(0.5 * dt, &k2);
                let k3 = self.advective(&b, h, t + 0.5 * dt)?;
                let mut c = self.expo_apply(&eu_half, true);
                c.axpy(dt, &self.expo_apply(&k3, true));
                let k4 = self.advective(&c, h, t + dt)?;
                // u' = E u + dt/6 (E k1 + 2 E_h (k2 + k3) + k4)
                let mut mid = &k2 + &k3;
                mid = self.expo_apply(&mid, true).scale(2.0);
                mid += &self.expo_apply(&k1, false);
                mid += &k4;
                let mut out = self.expo_apply(u, false);
                out.axpy(dt / 6.0, &mid);
                state.v = out;
            }
        }
        state.step += 1;
        state.t = state.step as f64 * dt;
        if let Some(h) = state.history.as_mut() {
            h.push(state.t, state.v.clone());
        }
        self.guard(state)
    }

    fn guard(&self, state: &TrajectoryState) -> Result<()> {
        let finite = state.v.is_finite() && state.z.as_ref().is_none_or(|z| z.is_finite());
        if !finite {
            return Err(Error::BlowUp {
                t: state.t,
                step: state.step,
                reason: "non-finite coefficient".into(),
            });
        }
        let h1 = sobolev_norm(&state.theta(), 1.0);
        if h1 > self.config.h1_ceiling {
            return Err(Error::BlowUp {
                t: state.t,
                step: state.step,
                reason: format!("H^1 norm {h1:.3e} exceeds ceiling {:.3e}", self.config.h1_ceiling),
            });
        }
        Ok(())
    }

    pub fn diagnostics_row(&self, state: &TrajectoryState) -> DiagnosticsRow {
        let theta = state.theta();
        DiagnosticsRow {
            t: state.t,
            l2: theta.l2_sq().sqrt(),
            h_alpha: sobolev_norm(&theta, self.config.params.alpha),
            h1: sobolev_norm(&theta, 1.0),
            lp: lp_norm(&theta, self.config.lp_exponent),
            tail_fraction: theta.tail_fraction(),
            diss_int: state.dissipation_integral,
        }
    }

    /// Logs once when `dt` exceeds `0.5/(k_max·max|u|)`.
    fn cfl_advisory(&self, state: &TrajectoryState, warned: &mut bool) {
        if *warned {
            return;
        }
        let (u1, u2) = riesz_perp(&state.theta());
        let p1 = u1.to_physical(Level::Padded);
        let p2 = u2.to_physical(Level::Padded);
        let umax = p1.iter().zip(&p2).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max);
        let limit = 0.5 / (self.grid.kmax() as f64 * umax);
        if self.config.dt > limit {
            log::warn!(
                "dt = {} exceeds the advective advisory {:.3e} at t = {:.3}",
                self.config.dt,
                limit,
                state.t
            );
            *warned = true;
        }
    }

    /// Runs `state` forward to step `n_steps`, recording diagnostics on the
    /// stride schedule (steps divisible by the stride).
    pub fn run(
        &self,
        state: &mut TrajectoryState,
        traj: u64,
        n_steps: u64,
        record: &mut DiagnosticsRecord,
        snapshots: &mut Vec<(f64, SpectralField)>,
    ) -> std::result::Result<(), Error> {
        let ds = self.config.diagnostic_stride;
        let ss = self.config.snapshot_stride;
        let mut warned = false;
        let mut emit = |this: &Self, st: &TrajectoryState, warned: &mut bool| {
            if st.step.is_multiple_of(ds) {
                record.rows.push(this.diagnostics_row(st));
                this.cfl_advisory(st, warned);
            }
            if ss.is_some_and(|s| st.step.is_multiple_of(s)) {
                snapshots.push((st.t, st.theta()));
            }
        };
        if state.step == 0 {
            emit(self, state, &mut warned);
        }
        while state.step < n_steps {
            self.step(state, traj)?;
            emit(self, state, &mut warned);
        }
        Ok(())
    }

    /// Full run of trajectory `traj` from the configured initial condition.
    pub fn simulate_traj(&self, traj: u64) -> std::result::Result<SimOutput, SimFailure> {
        let mut state = self.initial_state()?;
        self.simulate_from(&mut state, traj)
            .map(|(record, snapshots)| SimOutput {
                record,
                snapshots,
                final_state: state,
            })
    }

    /// Continues `state` to `t_end`. Rows for steps already taken are not
    /// repeated, so a resumed run appends exactly the missing rows.
    pub fn simulate_from(
        &self,
        state: &mut TrajectoryState,
        traj: u64,
    ) -> std::result::Result<(DiagnosticsRecord, Vec<(f64, SpectralField)>), SimFailure> {
        let mut record = DiagnosticsRecord {
            lp_exponent: self.config.lp_exponent,
            rows: Vec::new(),
        };
        let mut snaps = Vec::new();
        match self.run(state, traj, self.config.n_steps(), &mut record, &mut snaps) {
            Ok(()) => Ok((record, snaps)),
            Err(error) => Err(SimFailure { error, record }),
        }
    }
}

/// One step of `state` under `config` (builds the integrator each call; use
/// [`Integrator`] in loops).
pub fn step(state: &mut TrajectoryState, config: &SimConfig, traj: u64) -> Result<()> {
    Integrator::new(config)?.step(state, traj)
}

/// Runs trajectory 0 of `config` to `t_end`.
pub fn simulate(config: &SimConfig) -> std::result::Result<SimOutput, SimFailure> {
    Integrator::new(config)?.simulate_traj(0)
}

/// Independent trajectories `0..count` in parallel; results are ordered by
/// trajectory id and do not depend on the thread count.
pub fn simulate_ensemble(
    config: &SimConfig,
    count: usize,
) -> std::result::Result<Vec<SimOutput>, SimFailure> {
    use rayon::prelude::*;
    let integ = Integrator::new(config)?;
    (0..count as u64)
        .into_par_iter()
        .map(|traj| integ.simulate_traj(traj))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams {
        PhysicalParams::new(1.0, 0.75).unwrap()
    }

    #[test]
    fn row_count_matches_stride() {
        let mut c = SimConfig::new(params(), GridSpec::new(8), 0.01, 0.25);
        c.initial_condition = InitialCondition::Random {
            seed: 1,
            slope: 2.0,
            band: None,
            l2_norm: Some(1.0),
        };
        c.diagnostic_stride = 4;
        c.snapshot_stride = Some(10);
        let out = simulate(&c).unwrap();
        assert_eq!(out.record.rows.len(), 25 / 4 + 1);
        assert_eq!(out.snapshots.len(), 25 / 10 + 1);
    }

    #[test]
    fn validation_rules() {
        let mut c = SimConfig::new(params(), GridSpec::new(8), 0.01, 1.0);
        c.scheme = Scheme::DeterministicRk4;
        c.noise = Some(NoiseSpec::E3(crate::noise::E3Spec {
            s_reg: 2.0,
            q0_scale: 1.0,
            smoothing_margin: None,
        }));
        assert!(c.validate().is_err());
        c.noise = None;
        c.delta_mollify = Some(0.05);
        assert!(c.validate().is_err(), "dt > delta/8");
        c.dt = 0.005;
        c.validate().unwrap();
    }

    #[test]
    fn mean_stays_zero() {
        let mut c = SimConfig::new(params(), GridSpec::new(8), 0.01, 0.2);
        c.scheme = Scheme::EulerMaruyama;
        c.noise = Some(NoiseSpec::E3(crate::noise::E3Spec {
            s_reg: 2.0,
            q0_scale: 1.0,
            smoothing_margin: None,
        }));
        let out = simulate(&c).unwrap();
        assert_eq!(out.final_state.theta().mean_coeff().norm(), 0.0);
    }
}
