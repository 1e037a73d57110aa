//! Right-hand sides: the full drift, the pathwise equation for `v = θ - z`,
//! the mollified/delayed approximation, the cut-off drift and its
//! linearization.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    apply_lambda_s, dealiased_products_with, poisson_filter, riesz_perp, sobolev_norm, SpectralField,
};

/// Viscosity `κ` and dissipation exponent `α` of `A_α = κ(-Δ)^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    pub kappa: f64,
    pub alpha: f64,
}

impl PhysicalParams {
    pub fn new(kappa: f64, alpha: f64) -> Result<Self> {
        let p = PhysicalParams { kappa, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::param("kappa", "kappa must be positive", self.kappa));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", "alpha must lie in (0,1)", self.alpha));
        }
        Ok(())
    }

    /// Eigenvalue of `A_α` at wavenumber magnitude `|k|`.
    #[inline]
    pub fn eigenvalue(&self, kabs: f64) -> f64 {
        self.kappa * kabs.powf(2.0 * self.alpha)
    }

    /// Smallest eigenvalue `λ_1 = κ` (the lowest shell has `|k| = 1`).
    pub fn lambda1(&self) -> f64 {
        self.kappa
    }

    /// `-A_α f`.
    pub fn dissipation(&self, f: &SpectralField) -> SpectralField {
        f.map_radial(|k| -self.eigenvalue(k))
    }
}

/// `-∇·(u b)` for a divergence-free `u`, which equals `-u·∇b`.
pub fn advect(u1: &SpectralField, u2: &SpectralField, b: &SpectralField) -> SpectralField {
    let (f1, f2) = dealiased_products_with(u1, u2, b);
    SpectralField::divergence(&f1, &f2).scale(-1.0)
}

/// `-u·∇θ` with `u = R^⊥θ`, computed in divergence form.
pub fn nonlinear_term(theta: &SpectralField) -> SpectralField {
    let (u1, u2) = riesz_perp(theta);
    advect(&u1, &u2, theta)
}

/// Drift of the full equation: `-A_α θ - u·∇θ`.
pub fn rhs_sqg(theta: &SpectralField, params: &PhysicalParams) -> SpectralField {
    let mut out = params.dissipation(theta);
    out += &nonlinear_term(theta);
    out
}

/// Drift of the random PDE for `v = θ - z`: `-A_α v - (u_v + u_z)·∇(v + z)`.
pub fn rhs_v_equation(
    v: &SpectralField,
    z: &SpectralField,
    params: &PhysicalParams,
) -> Result<SpectralField> {
    v.same_grid(z)?;
    let mut out = params.dissipation(v);
    out += &nonlinear_term(&(v + z));
    Ok(out)
}

/// Smooth bump `exp(-1/(1-(2τ-3)^2))` supported on `(1, 2)`.
fn bump(tau: f64) -> f64 {
    let x = 2.0 * tau - 3.0;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

const PROFILE_NODES: usize = 32;

/// Past trajectory used by the delayed velocity
/// `U_δ[θ](t) = ∫ φ(τ) (k_δ * R^⊥θ)(t - δτ) dτ`, with `θ(t) = 0` for `t < 0`.
///
/// Snapshots are interpolated linearly in time.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    delta: f64,
    snapshots: VecDeque<(f64, SpectralField)>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", "delta must be positive", delta));
        }
        // midpoint rule: spectrally accurate for a bump vanishing to all orders
        let h = 1.0 / PROFILE_NODES as f64;
        let nodes: Vec<f64> = (0..PROFILE_NODES).map(|i| 1.0 + (i as f64 + 0.5) * h).collect();
        let raw: Vec<f64> = nodes.iter().map(|&t| bump(t)).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.into_iter().map(|w| w / total).collect();
        Ok(HistoryBuffer {
            delta,
            snapshots: VecDeque::new(),
            nodes,
            weights,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Profile quadrature `(τ_i, w_i)`, `Σ w_i = 1`.
    pub fn profile(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Appends a snapshot (times must increase) and drops those no longer
    /// needed for evaluations at times `>= t`.
    pub fn push(&mut self, t: f64, field: SpectralField) {
        if let Some((last, _)) = self.snapshots.back() {
            assert!(t > *last, "history snapshots must be pushed in time order");
        }
        self.snapshots.push_back((t, field));
        let horizon = t - 2.0 * self.delta;
        while self.snapshots.len() > 2 && self.snapshots[1].0 <= horizon {
            self.snapshots.pop_front();
        }
    }

    /// Buffered `(t, θ(t))` pairs, oldest first.
    pub fn snapshots(&self) -> impl Iterator<Item = &(f64, SpectralField)> + '_ {
        self.snapshots.iter()
    }

    /// `(earliest, latest)` buffered time.
    pub fn coverage(&self) -> Option<(f64, f64)> {
        Some((self.snapshots.front()?.0, self.snapshots.back()?.0))
    }

    /// Interpolated `θ(s)`; zero for `s < 0`.
    pub fn field_at(&self, s: f64, template: &SpectralField) -> Result<SpectralField> {
        if s < 0.0 {
            return Ok(SpectralField::zeros(template.grid()));
        }
        let (lo, hi) = self.coverage().ok_or(Error::InsufficientHistory {
            need_from: s,
            need_to: s,
            have_from: f64::NAN,
            have_to: f64::NAN,
        })?;
        let tol = 1e-12 * (1.0 + s.abs());
        if s < lo - tol || s > hi + tol {
            return Err(Error::InsufficientHistory {
                need_from: s,
                need_to: s,
                have_from: lo,
                have_to: hi,
            });
        }
        let j = self.snapshots.partition_point(|(t, _)| *t < s);
        if j == 0 {
            return Ok(self.snapshots[0].1.clone());
        }
        if j == self.snapshots.len() {
            return Ok(self.snapshots[j - 1].1.clone());
        }
        let (t0, f0) = &self.snapshots[j - 1];
        let (t1, f1) = &self.snapshots[j];
        let w = (s - t0) / (t1 - t0);
        let mut out = f0.scale(1.0 - w);
        out.axpy(w, f1);
        Ok(out)
    }

    /// `Σ_i w_i θ(t - δτ_i)`.
    pub fn delayed_average(&self, t: f64, template: &SpectralField) -> Result<SpectralField> {
        let need_to = t - self.delta;
        if need_to >= 0.0 {
            let need_from = (t - 2.0 * self.delta).max(0.0);
            let ok = self.coverage().is_some_and(|(lo, hi)| {
                let tol = 1e-12 * (1.0 + t.abs());
                lo <= need_from + tol && hi >= need_to - tol
            });
            if !ok {
                let (have_from, have_to) = self.coverage().unwrap_or((f64::NAN, f64::NAN));
                return Err(Error::InsufficientHistory {
                    need_from,
                    need_to,
                    have_from,
                    have_to,
                });
            }
        }
        let mut acc = SpectralField::zeros(template.grid());
        for (tau, w) in self.profile() {
            let s = t - self.delta * tau;
            if s < 0.0 {
                continue;
            }
            acc.axpy(w, &self.field_at(s, template)?);
        }
        Ok(acc)
    }
}

/// `U_δ[θ](t)`: Poisson-filtered, time-delayed Riesz velocity.
pub fn mollified_velocity(
    history: &HistoryBuffer,
    t: f64,
    template: &SpectralField,
) -> Result<(SpectralField, SpectralField)> {
    let avg = history.delayed_average(t, template)?;
    Ok(riesz_perp(&poisson_filter(&avg, history.delta())))
}

/// Drift of the approximating equation: `-A_α θ_n - U_δ[θ_n]·∇θ_n`.
/// Affine in `θ_n` because the velocity only sees the past.
pub fn rhs_approx(
    theta_n: &SpectralField,
    history: &HistoryBuffer,
    t: f64,
    params: &PhysicalParams,
) -> Result<SpectralField> {
    let (u1, u2) = mollified_velocity(history, t, theta_n)?;
    let mut out = params.dissipation(theta_n);
    out += &advect(&u1, &u2, theta_n);
    Ok(out)
}

/// Cut-off `χ_R` applied to `|θ|^2_{H^s}`.
///
/// `χ_R = 1` on `[0, R]`, `0` on `[R+1, ∞)` and linear in between, so
/// `|χ_R(a) - χ_R(b)| <= |a - b|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    /// Cut-off level `R`.
    pub r: f64,
    /// Regularity index `s > 1` of the norm being cut off.
    pub s_reg: f64,
}

impl CutoffSpec {
    pub fn new(r: f64, s_reg: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::param("r", "cutoff level must be positive", r));
        }
        if !(s_reg > 1.0) {
            return Err(Error::param("s_reg", "s_reg must exceed 1", s_reg));
        }
        Ok(CutoffSpec { r, s_reg })
    }

    pub fn chi(&self, a: f64) -> f64 {
        (self.r + 1.0 - a).clamp(0.0, 1.0)
    }

    /// Derivative of [`CutoffSpec::chi`]; zero at the two kinks.
    pub fn chi_prime(&self, a: f64) -> f64 {
        if a > self.r && a < self.r + 1.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// `|θ|^2_𝒲`.
    pub fn level(&self, theta: &SpectralField) -> f64 {
        sobolev_norm(theta, self.s_reg).powi(2)
    }
}

/// `-A_α θ - χ_R(|θ|^2_𝒲) u·∇θ`.
pub fn rhs_cutoff(theta: &SpectralField, cut: &CutoffSpec, params: &PhysicalParams) -> SpectralField {
    let mut out = params.dissipation(theta);
    let chi = cut.chi(cut.level(theta));
    if chi > 0.0 {
        out.axpy(chi, &nonlinear_term(theta));
    }
    out
}

/// Linearization of [`rhs_cutoff`] at `theta` applied to `dtheta`:
/// `-A_α Dθ - χ_R (Du·∇θ + u·∇Dθ) - 2χ_R' ⟨θ, Dθ⟩_𝒲 u·∇θ`.
pub fn tangent_rhs(
    theta: &SpectralField,
    dtheta: &SpectralField,
    cut: &CutoffSpec,
    params: &PhysicalParams,
) -> Result<SpectralField> {
    theta.same_grid(dtheta)?;
    let mut out = params.dissipation(dtheta);
    let level = cut.level(theta);
    let chi = cut.chi(level);
    let chi_p = cut.chi_prime(level);
    if chi == 0.0 && chi_p == 0.0 {
        return Ok(out);
    }
    let (u1, u2) = riesz_perp(theta);
    if chi > 0.0 {
        let (du1, du2) = riesz_perp(dtheta);
        out.axpy(chi, &advect(&du1, &du2, theta));
        out.axpy(chi, &advect(&u1, &u2, dtheta));
    }
    if chi_p != 0.0 {
        let w = theta.inner_sobolev(dtheta, cut.s_reg);
        out.axpy(2.0 * chi_p * w, &advect(&u1, &u2, theta));
    }
    Ok(out)
}

/// `-κΛ^{2α}` applied through the spectral helper; kept for callers that
/// want the operator without constructing params.
pub fn fractional_dissipation(f: &SpectralField, kappa: f64, alpha: f64) -> SpectralField {
    apply_lambda_s(f, 2.0 * alpha).scale(-kappa)
}
