//! Nudged auxiliary process `θ̃` driven by the same noise as `θ`, the control
//! shift `h` and the synchronization diagnostics.

use serde::{Deserialize, Serialize};

use crate::dynamics::{nonlinear_term, rhs_sqg, PhysicalParams};
use crate::error::{Error, Result};
use crate::integrate::{InitialCondition, Integrator, Scheme, SimConfig};
use crate::noise::{check_hypothesis_E2, GMap, NoiseModel, OuStepper};
use crate::spectral::{apply_lambda_s, lp_norm, EmpiricalConstants, Grid, SpectralField};

/// Critical exponent `p = (α+1)/(α-1/2)`; requires `α > 1/2`.
pub fn p_critical(alpha: f64) -> f64 {
    (alpha + 1.0) / (alpha - 0.5)
}

/// `λ_{N+1} = κ·(min_{|k|>N} |k|^2)^α` on the retained spectrum.
pub fn lambda_next(grid: &Grid, params: &PhysicalParams, n: u32) -> Result<f64> {
    let s = grid
        .next_shell_sq(n)
        .ok_or_else(|| Error::param("n", "ball |k| <= N must leave some retained mode outside", n))?;
    Ok(params.kappa * (s as f64).powf(params.alpha))
}

fn default_pairs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledConfig {
    /// `θ_0` is `base.initial_condition`; the noise must be additive.
    pub base: SimConfig,
    /// Nudging gain `K_0`; defaults to `2λ_{N+1}`.
    #[serde(default)]
    pub k0: Option<f64>,
    /// Radius of the nudged ball `|k| <= N`.
    pub n: u32,
    pub theta0_tilde: InitialCondition,
    /// Number of independent shared-noise pairs.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
}

impl CoupledConfig {
    pub fn p_critical(&self) -> f64 {
        p_critical(self.base.params.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.base.params.alpha > 0.5) {
            return Err(Error::param(
                "alpha",
                "synchronization needs alpha > 1/2 (critical exponent p)",
                self.base.params.alpha,
            ));
        }
        match &self.base.noise {
            Some(n) if n.as_additive().is_none() => {
                return Err(Error::param(
                    "noise",
                    "coupling needs additive noise",
                    "multiplicative",
                ))
            }
            _ => {}
        }
        if !matches!(self.base.scheme, Scheme::ExpEulerAdditive | Scheme::EulerMaruyama) {
            return Err(Error::param(
                "scheme",
                "coupling supports exp-euler-additive and euler-maruyama",
                format!("{:?}", self.base.scheme),
            ));
        }
        if self.base.delta_mollify.is_some() {
            return Err(Error::param(
                "delta_mollify",
                "not supported for coupled runs",
                "set",
            ));
        }
        if let Some(k0) = self.k0 {
            if !(k0 >= 0.0) || !k0.is_finite() {
                return Err(Error::param("k0", "K0 must be finite and >= 0", k0));
            }
        }
        if self.pairs == 0 {
            return Err(Error::param("pairs", "need at least one pair", 0));
        }
        Ok(())
    }
}

/// `rhs_sqg(θ̃) - K_0 P_N(θ̃ - θ)`.
pub fn rhs_nudged(
    theta_tilde: &SpectralField,
    theta: &SpectralField,
    params: &PhysicalParams,
    k0: f64,
    n: u32,
) -> Result<SpectralField> {
    theta.same_grid(theta_tilde)?;
    let mut out = rhs_sqg(theta_tilde, params);
    out.axpy(-k0, &(theta_tilde - theta).project_ball(n));
    Ok(out)
}

/// `h = -g K_0 P_N(θ̃ - θ)` and `|h|^2`, so that `G h = -K_0 P_N(θ̃ - θ)`.
pub fn control_shift(
    theta: &SpectralField,
    theta_tilde: &SpectralField,
    k0: f64,
    gmap: &GMap,
) -> Result<(SpectralField, f64)> {
    theta.same_grid(theta_tilde)?;
    let rho = (theta_tilde - theta).project_ball(gmap.n);
    let h = gmap.apply(&rho).scale(-k0);
    let sq = h.l2_sq();
    Ok((h, sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncRow {
    pub t: f64,
    /// `|Λ^{-1/2} ρ|`.
    pub d_hminushalf: f64,
    pub rho_l2: f64,
    /// `‖θ‖_{L^p}` at the critical `p`.
    pub theta_lp: f64,
    /// `∫_0^t |h|^2 ds`.
    pub h_sq_cum: f64,
    pub gamma_hat: f64,
    /// `|θ̃|`, for the fourth-moment check.
    pub theta_tilde_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub p: f64,
    pub k0: f64,
    pub n: u32,
    pub lambda_next: f64,
    /// `L^{2m(p-1)}` norms of `(θ_0, θ̃_0)` with `m = 6`, recorded only.
    pub initial_high_norms: (f64, f64),
    pub high_norm_exponent: f64,
    pub rows: Vec<SyncRow>,
}

impl SyncRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d_hminushalf).collect()
    }
}

/// `C_1^r (κ/2)^{1-r}` prefactor pieces of `Γ` with `r = p`.
fn gamma_terms(kappa: f64, p: f64, constants: &EmpiricalConstants) -> f64 {
    let c1 = constants.c_sobolev * constants.c_riesz;
    2.0 * c1.powf(p) * (kappa / 2.0).powf(1.0 - p)
}

/// `Γ̂(t) = -λ_{N+1} + 2 C_1^p (κ/2)^{1-p} (1/t)∫_0^t ‖θ‖^p_{L^p}`, with the
/// time average taken by the trapezoid rule over the recorded rows (the
/// value at `t = 0` is the integrand itself).
pub fn gamma_estimate(record: &SyncRecord, kappa: f64, constants: &EmpiricalConstants) -> Vec<f64> {
    let pre = gamma_terms(kappa, record.p, constants);
    let mut out = Vec::with_capacity(record.rows.len());
    let mut integral = 0.0;
    for (i, r) in record.rows.iter().enumerate() {
        let f = r.theta_lp.powf(record.p);
        let avg = if i == 0 {
            f
        } else {
            let prev = &record.rows[i - 1];
            integral += 0.5 * (r.t - prev.t) * (f + prev.theta_lp.powf(record.p));
            integral / r.t
        };
        out.push(-record.lambda_next + pre * avg);
    }
    out
}

/// `δ_0 = λ_{N+1} - 2^{p/2} C_R^p C_S^{2p} κ^{1-p} [p(p-1)]^{p/2} λ_1^{-p/2} 𝓔_0^{p/2}`
/// with `p = (α+1)/(α-1/2)` and empirical constants.
pub fn delta0_constant(
    params: &PhysicalParams,
    e0: f64,
    lambda_next: f64,
    constants: &EmpiricalConstants,
) -> f64 {
    let p = p_critical(params.alpha);
    let half = p / 2.0;
    let term = 2f64.powf(half)
        * constants.c_riesz.powf(p)
        * constants.c_sobolev.powf(2.0 * p)
        * params.kappa.powf(1.0 - p)
        * (p * (p - 1.0)).powf(half)
        * params.lambda1().powf(-half)
        * e0.powf(half);
    lambda_next - term
}

/// Prepared coupled stepper.
#[derive(Debug, Clone)]
pub struct Coupler {
    cfg: CoupledConfig,
    integ: Integrator,
    k0: f64,
    lambda_next: f64,
    gmap: Option<GMap>,
    constants: EmpiricalConstants,
    ou: Option<OuStepper>,
    expo: Vec<f64>,
}

/// Pair state. With the decomposed scheme both processes share `z`.
#[derive(Debug, Clone)]
pub struct PairState {
    pub t: f64,
    pub step: u64,
    pub v: SpectralField,
    pub v_tilde: SpectralField,
    pub z: Option<SpectralField>,
    pub h_sq_cum: f64,
}

impl PairState {
    pub fn theta(&self) -> SpectralField {
        match &self.z {
            Some(z) => &self.v + z,
            None => self.v.clone(),
        }
    }

    pub fn theta_tilde(&self) -> SpectralField {
        match &self.z {
            Some(z) => &self.v_tilde + z,
            None => self.v_tilde.clone(),
        }
    }

    /// `ρ = θ̃ - θ` (the shared `z` cancels exactly).
    pub fn rho(&self) -> SpectralField {
        &self.v_tilde - &self.v
    }
}

impl Coupler {
    /// `constants` should come from [`EmpiricalConstants::for_synchronization`].
    pub fn new(cfg: &CoupledConfig, constants: EmpiricalConstants) -> Result<Self> {
        cfg.validate()?;
        let integ = Integrator::new(&cfg.base)?;
        let lambda_next = lambda_next(integ.grid(), &cfg.base.params, cfg.n)?;
        let k0 = cfg.k0.unwrap_or(2.0 * lambda_next);
        let gmap = match integ.additive_noise() {
            Some(a) if a.certificates.trace_partial > 0.0 => Some(check_hypothesis_E2(a, cfg.n)?),
            _ => None,
        };
        if k0 > 0.0 && k0 <= lambda_next {
            log::warn!("K0 = {k0} does not exceed lambda_(N+1) = {lambda_next}");
        }
        let ou = match (cfg.base.scheme, integ.additive_noise()) {
            (Scheme::ExpEulerAdditive, Some(a)) => Some(OuStepper::new(a, &cfg.base.params, cfg.base.dt)),
            _ => None,
        };
        let expo = integ
            .grid()
            .kabs()
            .iter()
            .map(|&k| (-cfg.base.params.eigenvalue(k) * cfg.base.dt).exp())
            .collect();
        Ok(Coupler {
            cfg: cfg.clone(),
            integ,
            k0,
            lambda_next,
            gmap,
            constants,
            ou,
            expo,
        })
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn lambda_next(&self) -> f64 {
        self.lambda_next
    }

    pub fn gmap(&self) -> Option<&GMap> {
        self.gmap.as_ref()
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integ
    }

    pub fn initial_state(&self) -> Result<PairState> {
        let grid = self.integ.grid();
        let theta0 = self.cfg.base.initial_condition.build(grid)?;
        let tilde0 = self.cfg.theta0_tilde.build(grid)?;
        let z = match self.cfg.base.scheme {
            Scheme::ExpEulerAdditive => Some(SpectralField::zeros(grid)),
            _ => None,
        };
        Ok(PairState {
            t: 0.0,
            step: 0,
            v: theta0,
            v_tilde: tilde0,
            z,
            h_sq_cum: 0.0,
        })
    }

    fn expo(&self, f: &SpectralField) -> SpectralField {
        let mut i = 0;
        f.map_modes(|_, _| {
            let e = self.expo[i];
            i += 1;
            e
        })
    }

    /// One lockstep update of both processes on the shared increment.
    pub fn step(&self, st: &mut PairState, traj: u64) -> Result<()> {
        let dt = self.cfg.base.dt;
        let theta = st.theta();
        let tilde = st.theta_tilde();
        let rho_n = st.rho().project_ball(self.cfg.n);
        if let Some(g) = &self.gmap {
            st.h_sq_cum += dt * gmap_sq(g, &rho_n, self.k0);
        }
        let mut w = st.v.clone();
        w.axpy(dt, &nonlinear_term(&theta));
        let mut wt = st.v_tilde.clone();
        wt.axpy(dt, &nonlinear_term(&tilde));
        wt.axpy(-dt * self.k0, &rho_n);
        let mut v = self.expo(&w);
        let mut vt = self.expo(&wt);
        match (self.cfg.base.scheme, self.integ.noise()) {
            (Scheme::ExpEulerAdditive, Some(NoiseModel::Additive(_))) => {
                let ou = self.ou.as_ref().expect("built with the noise");
                let xi = self.integ.increment(traj, st.step);
                st.z = Some(ou.step(st.z.as_ref().expect("decomposed"), &xi));
            }
            (Scheme::ExpEulerAdditive, _) => {
                st.z = Some(self.expo(st.z.as_ref().expect("decomposed")));
            }
            (_, Some(noise)) => {
                let xi = self.integ.increment(traj, st.step);
                let dw = noise.apply(&theta, &xi)?;
                v += &dw;
                vt += &dw;
            }
            (_, None) => {}
        }
        st.v = v;
        st.v_tilde = vt;
        st.step += 1;
        st.t = st.step as f64 * dt;
        let ok = st.v.is_finite() && st.v_tilde.is_finite() && st.z.as_ref().is_none_or(|z| z.is_finite());
        if !ok {
            return Err(Error::BlowUp {
                t: st.t,
                step: st.step,
                reason: "non-finite coefficient in coupled pair".into(),
            });
        }
        let ceiling = self.cfg.base.h1_ceiling;
        for f in [st.theta(), st.theta_tilde()] {
            let h1 = crate::spectral::sobolev_norm(&f, 1.0);
            if h1 > ceiling {
                return Err(Error::BlowUp {
                    t: st.t,
                    step: st.step,
                    reason: format!("H^1 norm {h1:.3e} exceeds ceiling {ceiling:.3e}"),
                });
            }
        }
        Ok(())
    }

    fn row(&self, st: &PairState, p: f64) -> SyncRow {
        let rho = st.rho();
        SyncRow {
            t: st.t,
            d_hminushalf: apply_lambda_s(&rho, -0.5).l2_sq().sqrt(),
            rho_l2: rho.l2_sq().sqrt(),
            theta_lp: lp_norm(&st.theta(), p),
            h_sq_cum: st.h_sq_cum,
            gamma_hat: f64::NAN,
            theta_tilde_l2: st.theta_tilde().l2_sq().sqrt(),
        }
    }

    /// Runs pair `traj` to `t_end`, recording on the diagnostic stride.
    pub fn run(&self, traj: u64) -> Result<SyncRecord> {
        let p = self.cfg.p_critical();
        let mut st = self.initial_state()?;
        let m = 6.0;
        let hp = 2.0 * m * (p - 1.0);
        let initial_high_norms = (lp_norm(&st.theta(), hp), lp_norm(&st.theta_tilde(), hp));
        let stride = self.cfg.base.diagnostic_stride;
        let n_steps = self.cfg.base.n_steps();
        let mut rows = vec![self.row(&st, p)];
        while st.step < n_steps {
            self.step(&mut st, traj)?;
            if st.step % stride == 0 {
                rows.push(self.row(&st, p));
            }
        }
        let mut rec = SyncRecord {
            p,
            k0: self.k0,
            n: self.cfg.n,
            lambda_next: self.lambda_next,
            initial_high_norms,
            high_norm_exponent: hp,
            rows,
        };
        let gamma = gamma_estimate(&rec, self.cfg.base.params.kappa, &self.constants);
        rec.rows.iter_mut().zip(gamma).for_each(|(r, g)| r.gamma_hat = g);
        Ok(rec)
    }
}

fn gmap_sq(g: &GMap, rho_n: &SpectralField, k0: f64) -> f64 {
    k0 * k0 * g.apply(rho_n).l2_sq()
}

/// One synchronization run of pair `traj`.
pub fn run_synchronization(
    cfg: &CoupledConfig,
    traj: u64,
    constants: EmpiricalConstants,
) -> Result<SyncRecord> {
    Coupler::new(cfg, constants)?.run(traj)
}

/// `cfg.pairs` independent pairs in parallel, ordered by pair id.
pub fn run_synchronization_ensemble(
    cfg: &CoupledConfig,
    constants: EmpiricalConstants,
) -> Result<Vec<SyncRecord>> {
    use rayon::prelude::*;
    let c = Coupler::new(cfg, constants)?;
    (0..cfg.pairs as u64).into_par_iter().map(|i| c.run(i)).collect()
}
