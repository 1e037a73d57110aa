//! Estimators for the moment, positivity, energy and rate statements.

use serde::{Deserialize, Serialize};

use crate::dynamics::PhysicalParams;
use crate::error::{Error, Result};
use crate::integrate::DiagnosticsRecord;
use crate::spectral::{apply_lambda_s, lp_norm_samples, Level, SpectralField};

/// `∫ |θ|^{p-2} θ (κΛ^{2α} - 2λ_1/p) θ` by quadrature.
pub fn positivity_functional(theta: &SpectralField, p: f64, params: &PhysicalParams) -> f64 {
    let th = theta.to_physical(Level::Quadrature);
    let lt = apply_lambda_s(theta, 2.0 * params.alpha)
        .scale(params.kappa)
        .to_physical(Level::Quadrature);
    let c = 2.0 * params.lambda1() / p;
    let n = theta.grid().quad_size();
    let cell = (2.0 * std::f64::consts::PI / n as f64).powi(2);
    th.iter()
        .zip(&lt)
        .map(|(&a, &l)| a.abs().powf(p - 2.0) * a * (l - c * a))
        .sum::<f64>()
        * cell
}

/// `t ↦ ‖x‖^p e^{-λ_1 t} + Ĉ_S^p [p(p-1)/2]^{p/2} λ_1^{-p/2} 𝓔_0^{p/2} (1 - e^{-λ_1 t})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundSpec {
    pub p: f64,
    /// `‖θ_0‖^p_{L^p}`.
    pub initial_lp_pow: f64,
    pub lambda1: f64,
    pub c_sobolev: f64,
    pub e0: f64,
    pub slack_factor: f64,
}

impl MomentBoundSpec {
    pub fn stationary_level(&self) -> f64 {
        let p = self.p;
        self.c_sobolev.powf(p)
            * (0.5 * p * (p - 1.0)).powf(p / 2.0)
            * self.lambda1.powf(-p / 2.0)
            * self.e0.powf(p / 2.0)
    }

    pub fn bound_curve(&self, t: f64) -> f64 {
        let e = (-self.lambda1 * t).exp();
        self.initial_lp_pow * e + self.stationary_level() * (1.0 - e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub points: Vec<MomentPoint>,
    pub pass: bool,
    /// Largest `mean / bound` over the times.
    pub worst_ratio: f64,
}

fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Rows at the same index must share a time across the ensemble.
fn check_aligned(ensemble: &[DiagnosticsRecord], need: usize) -> Result<usize> {
    if ensemble.len() < need {
        return Err(Error::EnsembleTooSmall {
            got: ensemble.len(),
            need,
        });
    }
    let rows = ensemble.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    Ok(rows)
}

/// Monte-Carlo mean of `‖θ(t)‖^p_{L^p}` against `bound_curve·slack`.
/// The records must use `lp_exponent == spec.p`.
pub fn lp_moment_check(ensemble: &[DiagnosticsRecord], spec: &MomentBoundSpec) -> Result<MomentReport> {
    let rows = check_aligned(ensemble, 16)?;
    if let Some(r) = ensemble.iter().find(|r| r.lp_exponent != spec.p) {
        return Err(Error::param(
            "p",
            "records carry a different L^p exponent",
            r.lp_exponent,
        ));
    }
    let mut points = Vec::with_capacity(rows);
    let mut worst: f64 = 0.0;
    for i in 0..rows {
        let t = ensemble[0].rows[i].t;
        let vals: Vec<f64> = ensemble.iter().map(|r| r.rows[i].lp.powf(spec.p)).collect();
        let (mean, stderr) = mean_stderr(&vals);
        let bound = spec.bound_curve(t) * spec.slack_factor;
        worst = worst.max(mean / bound);
        points.push(MomentPoint {
            t,
            mean,
            stderr,
            bound,
            pass: mean <= bound,
        });
    }
    let pass = points.iter().all(|p| p.pass);
    Ok(MomentReport {
        points,
        pass,
        worst_ratio: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    /// `E|θ(t)|^2 + 2κ E∫_0^t ‖θ‖^2_{H^α}`.
    pub lhs: f64,
    /// `|θ_0|^2 + t·Tr(GG*)`.
    pub rhs: f64,
    pub stderr: f64,
    /// `|lhs - rhs| / rhs`.
    pub rel_discrepancy: f64,
    /// `3·(stderr/rhs + 2·dt)`.
    pub threshold: f64,
    pub pass: bool,
}

/// Itô energy balance at the last common diagnostic time.
pub fn energy_balance_check(
    ensemble: &[DiagnosticsRecord],
    params: &PhysicalParams,
    trace: f64,
    theta0_l2_sq: f64,
    dt: f64,
) -> Result<EnergyReport> {
    let rows = check_aligned(ensemble, 16)?;
    if rows == 0 {
        return Err(Error::EnsembleTooSmall { got: 0, need: 1 });
    }
    let i = rows - 1;
    let t = ensemble[0].rows[i].t;
    let vals: Vec<f64> = ensemble
        .iter()
        .map(|r| {
            let row = &r.rows[i];
            row.l2 * row.l2 + 2.0 * params.kappa * row.diss_int
        })
        .collect();
    let (lhs, stderr) = mean_stderr(&vals);
    let rhs = theta0_l2_sq + t * trace;
    let rel = (lhs - rhs).abs() / rhs;
    let threshold = 3.0 * (stderr / rhs + 2.0 * dt);
    Ok(EnergyReport {
        t,
        lhs,
        rhs,
        stderr,
        rel_discrepancy: rel,
        threshold,
        pass: rel < threshold,
    })
}

/// Functionals available to [`time_average`] callers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    L2Sq,
    HAlphaSq,
    LpPow,
    /// `Re c_k` of the orthonormal coefficient.
    ModeRe {
        k1: i32,
        k2: i32,
    },
}

impl Observable {
    /// Evaluates the observable from a diagnostics row where possible.
    pub fn from_row(&self, row: &crate::integrate::DiagnosticsRow, p: f64) -> Option<f64> {
        match *self {
            Observable::L2Sq => Some(row.l2 * row.l2),
            Observable::HAlphaSq => Some(row.h_alpha * row.h_alpha),
            Observable::LpPow => Some(row.lp.powf(p)),
            Observable::ModeRe { .. } => None,
        }
    }

    pub fn eval(&self, theta: &SpectralField, alpha: f64, p: f64) -> f64 {
        match *self {
            Observable::L2Sq => theta.l2_sq(),
            Observable::HAlphaSq => crate::spectral::sobolev_norm(theta, alpha).powi(2),
            Observable::LpPow => crate::spectral::lp_norm(theta, p).powf(p),
            Observable::ModeRe { k1, k2 } => theta.coeff(k1, k2).re,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub mean: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    pub batches: usize,
    /// `(t, running average)` after burn-in.
    pub running: Vec<(f64, f64)>,
}

/// Default burn-in `20/λ_1`.
pub fn default_burn_in(params: &PhysicalParams) -> f64 {
    20.0 / params.lambda1()
}

/// Running average of equally spaced samples `(t, ψ)` with `t >= burn_in`,
/// and its batch-means error over `batches` contiguous batches.
pub fn time_average(series: &[(f64, f64)], burn_in: f64, batches: usize) -> Result<TimeAverage> {
    let kept: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= burn_in).collect();
    let batches = batches.max(2);
    if kept.len() < batches {
        return Err(Error::EnsembleTooSmall {
            got: kept.len(),
            need: batches,
        });
    }
    let mut running = Vec::with_capacity(kept.len());
    let mut sum = 0.0;
    for (i, (t, v)) in kept.iter().enumerate() {
        sum += v;
        running.push((*t, sum / (i + 1) as f64));
    }
    let mean = sum / kept.len() as f64;
    let per = kept.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| kept[b * per..(b + 1) * per].iter().map(|x| x.1).sum::<f64>() / per as f64)
        .collect();
    let (_, stderr) = mean_stderr(&means);
    Ok(TimeAverage {
        mean,
        stderr,
        batches,
        running,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayModel {
    /// `a·e^{-bt}`
    Exponential,
    /// `a·(1+t)^{-q}`
    Polynomial,
}

/// Least-squares fit of `log d` against `t` or `log(1+t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub a: f64,
    /// `b` or `q`.
    pub rate: f64,
    /// 95% normal-approximation intervals.
    pub a_ci: (f64, f64),
    pub rate_ci: (f64, f64),
    /// RMS of the log residuals.
    pub residual_rms: f64,
    pub points: usize,
}

/// Fits `model` to all points of `series`, which must be positive.
pub fn fit_decay(series: &[(f64, f64)], model: DecayModel) -> Result<DecayFit> {
    if let Some((i, &(_, v))) = series.iter().enumerate().find(|(_, (_, v))| !(*v > 0.0)) {
        return Err(Error::NonPositiveSeries { index: i, value: v });
    }
    if series.len() < 3 {
        return Err(Error::EnsembleTooSmall {
            got: series.len(),
            need: 3,
        });
    }
    let xs: Vec<f64> = series
        .iter()
        .map(|&(t, _)| match model {
            DecayModel::Exponential => t,
            DecayModel::Polynomial => (1.0 + t).ln(),
        })
        .collect();
    let ys: Vec<f64> = series.iter().map(|&(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * xm;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum();
    let s2 = rss / (n - 2.0);
    let se_slope = (s2 / sxx).sqrt();
    let se_icpt = (s2 * (1.0 / n + xm * xm / sxx)).sqrt();
    let z = 1.96;
    Ok(DecayFit {
        model,
        a: icpt.exp(),
        rate: -slope,
        a_ci: ((icpt - z * se_icpt).exp(), (icpt + z * se_icpt).exp()),
        rate_ci: (-slope - z * se_slope, -slope + z * se_slope),
        residual_rms: (rss / n).sqrt(),
        points: series.len(),
    })
}

/// Both fits and the preferred model (smaller residual; both have two
/// parameters, so this is the AIC choice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayComparison {
    pub exponential: DecayFit,
    pub polynomial: DecayFit,
    pub preferred: DecayModel,
    /// `log(rms_poly / rms_exp)`; positive favours the exponential model.
    pub score: f64,
}

pub fn compare_decay(series: &[(f64, f64)]) -> Result<DecayComparison> {
    let e = fit_decay(series, DecayModel::Exponential)?;
    let p = fit_decay(series, DecayModel::Polynomial)?;
    let score = (p.residual_rms.max(f64::MIN_POSITIVE) / e.residual_rms.max(f64::MIN_POSITIVE)).ln();
    Ok(DecayComparison {
        preferred: if score >= 0.0 {
            DecayModel::Exponential
        } else {
            DecayModel::Polynomial
        },
        exponential: e,
        polynomial: p,
        score,
    })
}

/// Points of `series` with `t >= t_min`, stopping before the first value
/// below `floor_ratio` times the first kept value (the rounding floor).
pub fn decay_window(series: &[(f64, f64)], t_min: f64, floor_ratio: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut first = None;
    for &(t, v) in series {
        if t < t_min {
            continue;
        }
        let f0 = *first.get_or_insert(v);
        if !(v > f0 * floor_ratio) {
            break;
        }
        out.push((t, v));
    }
    out
}

/// `‖f‖_{L^p}` of physical samples, re-exported for report code.
pub fn sample_lp(samples: &[f64], p: f64) -> f64 {
    lp_norm_samples(samples, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_fit_recovers_parameters() {
        let s: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.2;
                (t, 2.0 * (-0.3 * t).exp())
            })
            .collect();
        let f = fit_decay(&s, DecayModel::Exponential).unwrap();
        assert!((f.a - 2.0).abs() < 0.02 && (f.rate - 0.3).abs() < 0.003);
        assert_eq!(compare_decay(&s).unwrap().preferred, DecayModel::Exponential);
    }

    #[test]
    fn polynomial_fit_recovers_exponent() {
        let s: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.5;
                (t, 5.0 * (1.0 + t).powf(-2.0))
            })
            .collect();
        let f = fit_decay(&s, DecayModel::Polynomial).unwrap();
        assert!((f.rate - 2.0).abs() < 0.02);
        assert_eq!(compare_decay(&s).unwrap().preferred, DecayModel::Polynomial);
    }

    #[test]
    fn rejects_non_positive() {
        let s = [(0.0, 1.0), (1.0, 0.0), (2.0, 0.5)];
        assert_eq!(
            fit_decay(&s, DecayModel::Exponential).unwrap_err(),
            Error::NonPositiveSeries { index: 1, value: 0.0 }
        );
    }

    #[test]
    fn constant_observable_average() {
        let s: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 3.5)).collect();
        let a = time_average(&s, 10.0, 10).unwrap();
        assert_eq!(a.mean, 3.5);
        assert_eq!(a.stderr, 0.0);
        assert!(a.running.iter().all(|&(_, v)| v == 3.5));
    }

    #[test]
    fn window_stops_at_floor() {
        let s: Vec<(f64, f64)> = (0..40).map(|i| (i as f64, (10f64).powi(-i).max(1e-16))).collect();
        let w = decay_window(&s, 1.0, 1e-10);
        assert_eq!(w.first().unwrap().0, 1.0);
        assert_eq!(w.len(), 10);
    }
}
