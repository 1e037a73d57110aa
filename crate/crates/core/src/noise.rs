//! Noise operators `G`, reproducible Wiener increments on the truncated basis
//! and the exact Ornstein-Uhlenbeck step.
//!
//! Mode-indexed vectors (`xi`, `h`, `σ`) use the grid's coefficient index:
//! entry `i` is the coordinate along the real basis function `e_k` with
//! `k = grid.wavenumber(i)`. The entry at the zero mode is unused and 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::PhysicalParams;
use crate::error::{Error, Result};
use crate::spectral::{poisson_filter, Grid, Level, SpectralField};

/// Power-law intensities `σ_k = amplitude·|k|^{-decay}`, optionally only on
/// `|k| <= max_shell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E1Spec {
    pub amplitude: f64,
    pub decay: f64,
    #[serde(default)]
    pub max_shell: Option<f64>,
    /// `σ` in `Tr(Λ^{4-2α+2σ}GG*)`; defaults to half the admissible range.
    #[serde(default)]
    pub smoothing_margin: Option<f64>,
}

/// `G = A_α^{-(s+α)/(2α)} Q_0^{1/2}` with `Q_0 = q0_scale·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct E3Spec {
    pub s_reg: f64,
    #[serde(default = "one")]
    pub q0_scale: f64,
    #[serde(default)]
    pub smoothing_margin: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// `G(θ)y = Σ_k b_k ⟨y, e_k⟩ g(θ) e_k` with `b_k = amplitude·|k|^{-decay}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicativeSpec {
    pub amplitude: f64,
    pub decay: f64,
    #[serde(default)]
    pub max_shell: Option<f64>,
    pub profile: GProfile,
}

/// Noise section of a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    E1(E1Spec),
    E3(E3Spec),
    Multiplicative(MultiplicativeSpec),
}

/// The additive subset of [`NoiseSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum AdditiveSpec {
    E1(E1Spec),
    E3(E3Spec),
}

impl NoiseSpec {
    pub fn as_additive(&self) -> Option<AdditiveSpec> {
        match self {
            NoiseSpec::E1(s) => Some(AdditiveSpec::E1(s.clone())),
            NoiseSpec::E3(s) => Some(AdditiveSpec::E3(s.clone())),
            NoiseSpec::Multiplicative(_) => None,
        }
    }

    pub fn build(&self, params: &PhysicalParams, grid: &Grid) -> Result<NoiseModel> {
        match self {
            NoiseSpec::Multiplicative(m) => {
                Ok(NoiseModel::Multiplicative(MultiplicativeDiagNoise::new(grid, m)?))
            }
            other => {
                let spec = other.as_additive().expect("additive variant");
                Ok(NoiseModel::Additive(build_additive_noise(params, &spec, grid)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    E1Generic {
        amplitude: f64,
        decay: f64,
        max_shell: Option<f64>,
    },
    E3PowerLaw {
        s_reg: f64,
        q0_scale: f64,
    },
}

/// Truncated traces with explicit bounds for the discarded modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCertificates {
    /// `Σ σ_k^2` over retained modes (the trace the simulation sees).
    pub trace_partial: f64,
    /// Upper bound for `Σ σ_k^2` over modes outside the truncation.
    pub trace_tail: f64,
    pub smoothing_margin: f64,
    /// `Σ |k|^{4-2α+2σ} σ_k^2` over retained modes.
    pub e0_partial: f64,
    /// Tail bound for the same sum; `+∞` when it diverges.
    pub e0_tail: f64,
    /// `σ > 0` and `𝓔_0 < ∞`.
    pub e1_holds: bool,
    /// `s > 3 - 2α` for power-law noise built from `A_α` (then (E1) and
    /// (E2) hold). `None` for other noises.
    pub smooth_regime: Option<bool>,
}

impl TraceCertificates {
    pub fn trace_bound(&self) -> f64 {
        self.trace_partial + self.trace_tail
    }

    /// `𝓔_0` including the tail bound.
    pub fn e0(&self) -> f64 {
        self.e0_partial + self.e0_tail
    }
}

/// Upper bound for `Σ_{k ∉ [-K,K]^2} |k|^β`, valid for `β < -2`, `K >= 2`.
///
/// Each lattice point's unit cell lies in `|x| >= |k| - √2/2`, so the sum is
/// dominated by `∫_{|x| >= K - c} (|x| - c)^β dx` with `c = √2/2`.
pub fn lattice_tail_bound(kmax: i32, beta: f64) -> f64 {
    if beta >= -2.0 {
        return f64::INFINITY;
    }
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let r0 = kmax as f64 - 2.0 * c;
    assert!(r0 > 0.0, "tail bound needs K >= 2");
    2.0 * std::f64::consts::PI
        * (r0.powf(beta + 2.0) / (-beta - 2.0) + c * r0.powf(beta + 1.0) / (-beta - 1.0))
}

/// Diagonal additive noise `G e_k = σ_k e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveSpectralNoise {
    grid: Grid,
    sigma: Vec<f64>,
    pub provenance: Provenance,
    pub certificates: TraceCertificates,
}

impl AdditiveSpectralNoise {
    /// Noise with explicit per-mode intensities (symmetric in `k ↔ -k`),
    /// certified as E1 with no tail.
    pub fn from_sigma(grid: &Grid, params: &PhysicalParams, sigma: Vec<f64>, margin: f64) -> Result<Self> {
        if sigma.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some((i, &s)) = sigma
            .iter()
            .enumerate()
            .find(|(_, s)| !(**s >= 0.0) || !s.is_finite())
        {
            let (k1, k2) = grid.wavenumber(i);
            return Err(Error::param(
                "sigma",
                format!("sigma at k = ({k1}, {k2}) must be finite and >= 0"),
                s,
            ));
        }
        let mut sigma = sigma;
        sigma[grid.center()] = 0.0;
        let power = 4.0 - 2.0 * params.alpha + 2.0 * margin;
        let (trace_partial, e0_partial) = partial_sums(grid, &sigma, power);
        Ok(AdditiveSpectralNoise {
            grid: grid.clone(),
            sigma,
            provenance: Provenance::E1Generic {
                amplitude: f64::NAN,
                decay: f64::NAN,
                max_shell: None,
            },
            certificates: TraceCertificates {
                trace_partial,
                trace_tail: 0.0,
                smoothing_margin: margin,
                e0_partial,
                e0_tail: 0.0,
                e1_holds: margin > 0.0,
                smooth_regime: None,
            },
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `σ_k` by coefficient index.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn sigma_at(&self, k1: i32, k2: i32) -> f64 {
        self.grid.index(k1, k2).map_or(0.0, |i| self.sigma[i])
    }

    /// `G ξ`.
    pub fn apply(&self, xi: &[f64]) -> SpectralField {
        let x: Vec<f64> = xi.iter().zip(&self.sigma).map(|(a, s)| a * s).collect();
        SpectralField::from_real_modes(&self.grid, &x)
    }

    /// `G` applied to a field (diagonal, so coefficient-wise).
    pub fn apply_field(&self, f: &SpectralField) -> SpectralField {
        let mut i = 0;
        let sigma = &self.sigma;
        f.map_modes(|_, _| {
            let s = sigma[i];
            i += 1;
            s
        })
    }

    /// `(kx, ky, σ)` for every retained mode, zero mode excluded.
    pub fn sigma_table(&self) -> Vec<(i32, i32, f64)> {
        (0..self.grid.len())
            .filter(|&i| i != self.grid.center())
            .map(|i| {
                let (k1, k2) = self.grid.wavenumber(i);
                (k1, k2, self.sigma[i])
            })
            .collect()
    }
}

fn partial_sums(grid: &Grid, sigma: &[f64], power: f64) -> (f64, f64) {
    let kabs = grid.kabs();
    let c = grid.center();
    let mut tr = 0.0;
    let mut e0 = 0.0;
    for (i, &s) in sigma.iter().enumerate() {
        if i == c {
            continue;
        }
        tr += s * s;
        e0 += kabs[i].powf(power) * s * s;
    }
    (tr, e0)
}

/// Builds E1/E3 power-law noise with its trace certificates.
///
/// An explicitly requested smoothing margin whose `𝓔_0` tail diverges is an
/// error; the default margin is half the admissible range, or 0 (with
/// `e1_holds = false`) when no positive margin is admissible.
pub fn build_additive_noise(
    params: &PhysicalParams,
    spec: &AdditiveSpec,
    grid: &Grid,
) -> Result<AdditiveSpectralNoise> {
    params.validate()?;
    if grid.kmax() < 2 {
        return Err(Error::InvalidGrid("noise certificates need M >= 4".into()));
    }
    // σ_k = amp·|k|^{-decay} on |k| <= shell
    let (amp, decay, shell, requested, provenance, smooth_regime) = match spec {
        AdditiveSpec::E1(s) => {
            if !(s.amplitude >= 0.0) {
                return Err(Error::param("amplitude", "amplitude must be >= 0", s.amplitude));
            }
            if !s.decay.is_finite() {
                return Err(Error::param("decay", "decay must be finite", s.decay));
            }
            (
                s.amplitude,
                s.decay,
                s.max_shell,
                s.smoothing_margin,
                Provenance::E1Generic {
                    amplitude: s.amplitude,
                    decay: s.decay,
                    max_shell: s.max_shell,
                },
                None,
            )
        }
        AdditiveSpec::E3(s) => {
            if !(s.s_reg >= 1.0) {
                return Err(Error::param("s_reg", "s_reg must be >= 1", s.s_reg));
            }
            if !(s.q0_scale >= 0.0) {
                return Err(Error::param("q0_scale", "q0_scale must be >= 0", s.q0_scale));
            }
            let e = (s.s_reg + params.alpha) / (2.0 * params.alpha);
            (
                params.kappa.powf(-e) * s.q0_scale.sqrt(),
                s.s_reg + params.alpha,
                None,
                s.smoothing_margin,
                Provenance::E3PowerLaw {
                    s_reg: s.s_reg,
                    q0_scale: s.q0_scale,
                },
                Some(s.s_reg > 3.0 - 2.0 * params.alpha),
            )
        }
    };

    let kmax = grid.kmax();
    let kabs = grid.kabs();
    let sigma: Vec<f64> = (0..grid.len())
        .map(|i| {
            if i == grid.center() || shell.is_some_and(|r| kabs[i] > r) {
                0.0
            } else {
                amp * kabs[i].powf(-decay)
            }
        })
        .collect();

    // the tail vanishes when the support is inside the retained square
    let finite_support = shell.is_some_and(|r| r < (kmax + 1) as f64);
    let base = 4.0 - 2.0 * params.alpha;
    let tail = |power: f64| -> f64 {
        if finite_support || amp == 0.0 {
            0.0
        } else {
            amp * amp * lattice_tail_bound(kmax, power - 2.0 * decay)
        }
    };
    // admissible margins: base + 2σ - 2·decay < -2
    let sup_margin = if finite_support || amp == 0.0 {
        f64::INFINITY
    } else {
        decay - 1.0 - base / 2.0
    };
    let margin = match requested {
        Some(m) => {
            if !(m > 0.0) {
                return Err(Error::param(
                    "smoothing_margin",
                    "smoothing margin must be > 0",
                    m,
                ));
            }
            let beta = base + 2.0 * m - 2.0 * decay;
            if !(finite_support || amp == 0.0) && beta >= -2.0 {
                return Err(Error::DivergentTrace {
                    exponent_power: base + 2.0 * m,
                    tail_exponent: beta,
                    smoothing_margin: m,
                });
            }
            m
        }
        None if sup_margin.is_infinite() => 0.5,
        None if sup_margin > 0.0 => sup_margin / 2.0,
        None => 0.0,
    };
    let power = base + 2.0 * margin;
    let (trace_partial, e0_partial) = partial_sums(grid, &sigma, power);
    let e0_tail = tail(power);
    let certificates = TraceCertificates {
        trace_partial,
        trace_tail: tail(0.0),
        smoothing_margin: margin,
        e0_partial,
        e0_tail,
        e1_holds: margin > 0.0 && e0_tail.is_finite(),
        smooth_regime,
    };
    Ok(AdditiveSpectralNoise {
        grid: grid.clone(),
        sigma,
        provenance,
        certificates,
    })
}

/// Diagonal right inverse of `G` on the ball `|k| <= N`: `G g = P_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GMap {
    pub n: u32,
    entries: Vec<f64>,
    /// `‖g‖ = max_{|k| <= N} 1/σ_k` (0 for the empty ball).
    pub norm: f64,
}

impl GMap {
    /// `g_k` by coefficient index (0 outside the ball).
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `g f` as a mode-indexed field.
    pub fn apply(&self, f: &SpectralField) -> SpectralField {
        let mut i = 0;
        let e = &self.entries;
        f.map_modes(|_, _| {
            let v = e[i];
            i += 1;
            v
        })
    }
}

fn in_ball(k1: i32, k2: i32, n: u32) -> bool {
    (k1 as i64).pow(2) + (k2 as i64).pow(2) <= (n as i64).pow(2)
}

/// Checks (E2) on the ball `|k| <= N` and returns the map `g`.
#[allow(non_snake_case)]
pub fn check_hypothesis_E2(noise: &AdditiveSpectralNoise, n: u32) -> Result<GMap> {
    let grid = &noise.grid;
    let c = grid.center();
    let kabs = grid.kabs();
    let mut ball: Vec<usize> = ((c + 1)..grid.len())
        .filter(|&i| {
            let (k1, k2) = grid.wavenumber(i);
            in_ball(k1, k2, n)
        })
        .collect();
    ball.sort_by(|&a, &b| kabs[a].total_cmp(&kabs[b]).then(a.cmp(&b)));
    if let Some(&i) = ball.iter().find(|&&i| noise.sigma[i] == 0.0) {
        let (k1, k2) = grid.wavenumber(i);
        return Err(Error::DegenerateMode { k1, k2 });
    }
    let mut entries = vec![0.0; grid.len()];
    let mut norm: f64 = 0.0;
    for &i in &ball {
        let g = 1.0 / noise.sigma[i];
        entries[i] = g;
        entries[grid.conj_index(i)] = g;
        norm = norm.max(g);
    }
    Ok(GMap { n, entries, norm })
}

/// Scalar amplitude `g` of multiplicative noise, Lipschitz with linear growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GProfile {
    /// `g(a) = value`.
    Constant { value: f64 },
    /// `g(a) = offset + slope·a`.
    Affine { offset: f64, slope: f64 },
    /// `g(a) = scale·tanh(a)`.
    Tanh { scale: f64 },
}

impl GProfile {
    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        match *self {
            GProfile::Constant { value } => value,
            GProfile::Affine { offset, slope } => offset + slope * a,
            GProfile::Tanh { scale } => scale * a.tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            GProfile::Constant { .. } => 0.0,
            GProfile::Affine { slope, .. } => slope.abs(),
            GProfile::Tanh { scale } => scale.abs(),
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.eval(0.0)
    }
}

/// `G(θ)y = P[g(θ)·Σ_k b_k y_k e_k]`, with `P` the projection onto the
/// retained zero-mean modes.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeDiagNoise {
    grid: Grid,
    b: Vec<f64>,
    pub profile: GProfile,
    /// `Σ b_k^2`.
    pub b_sq_sum: f64,
}

impl MultiplicativeDiagNoise {
    pub fn new(grid: &Grid, spec: &MultiplicativeSpec) -> Result<Self> {
        if !(spec.amplitude >= 0.0) {
            return Err(Error::param(
                "amplitude",
                "amplitude must be >= 0",
                spec.amplitude,
            ));
        }
        let kabs = grid.kabs();
        let b: Vec<f64> = (0..grid.len())
            .map(|i| {
                if i == grid.center() || spec.max_shell.is_some_and(|r| kabs[i] > r) {
                    0.0
                } else {
                    spec.amplitude * kabs[i].powf(-spec.decay)
                }
            })
            .collect();
        let b_sq_sum = b.iter().map(|x| x * x).sum();
        Ok(MultiplicativeDiagNoise {
            grid: grid.clone(),
            b,
            profile: spec.profile,
            b_sq_sum,
        })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `(λ_0, ρ_2)` with `‖G(θ)‖^2_{L_2} <= λ_0|θ|^2 + ρ_2`.
    ///
    /// Uses `sup|e_k| = 1/(π√2)` and `|g(a)| <= |g(0)| + L|a|`.
    pub fn growth_constants(&self) -> (f64, f64) {
        let l = self.profile.lipschitz();
        let g0 = self.profile.at_zero().abs();
        let pi2 = std::f64::consts::PI.powi(2);
        (self.b_sq_sum * l * l / pi2, 4.0 * self.b_sq_sum * g0 * g0)
    }

    /// Hilbert-Schmidt norm `Σ_k |G(θ)e_k|^2` by direct summation.
    pub fn hs_norm_sq(&self, theta: &SpectralField) -> f64 {
        let g = &self.grid;
        let gth: Vec<f64> = theta
            .to_physical(Level::Quadrature)
            .into_iter()
            .map(|a| self.profile.eval(a))
            .collect();
        let mut total = 0.0;
        let mut unit = vec![0.0; g.len()];
        for i in 0..g.len() {
            if self.b[i] == 0.0 {
                continue;
            }
            unit[i] = self.b[i];
            let e = SpectralField::from_real_modes(g, &unit).to_physical(Level::Quadrature);
            unit[i] = 0.0;
            let prod: Vec<f64> = e.iter().zip(&gth).map(|(x, y)| x * y).collect();
            total += SpectralField::from_physical(g, &prod, Level::Quadrature).l2_sq();
        }
        total
    }
}

/// `G(θ)ξ` for multiplicative noise: `g(θ)` is evaluated pointwise on the
/// quadrature grid, multiplied by `Σ b_k ξ_k e_k` and projected back.
pub fn apply_multiplicative(
    noise: &MultiplicativeDiagNoise,
    theta: &SpectralField,
    xi: &[f64],
) -> Result<SpectralField> {
    if theta.grid() != &noise.grid || xi.len() != noise.grid.len() {
        return Err(Error::GridMismatch);
    }
    let x: Vec<f64> = xi.iter().zip(&noise.b).map(|(a, b)| a * b).collect();
    let eta = SpectralField::from_real_modes(&noise.grid, &x);
    if let GProfile::Constant { value } = noise.profile {
        return Ok(eta.scale(value));
    }
    let pe = eta.to_physical(Level::Quadrature);
    let pt = theta.to_physical(Level::Quadrature);
    let prod: Vec<f64> = pe
        .iter()
        .zip(&pt)
        .map(|(e, t)| e * noise.profile.eval(*t))
        .collect();
    Ok(SpectralField::from_physical(
        &noise.grid,
        &prod,
        Level::Quadrature,
    ))
}

/// Either kind of noise operator.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Additive(AdditiveSpectralNoise),
    Multiplicative(MultiplicativeDiagNoise),
}

impl NoiseModel {
    /// `G(θ)ξ`.
    pub fn apply(&self, theta: &SpectralField, xi: &[f64]) -> Result<SpectralField> {
        match self {
            NoiseModel::Additive(a) => Ok(a.apply(xi)),
            NoiseModel::Multiplicative(m) => apply_multiplicative(m, theta, xi),
        }
    }

    pub fn as_additive(&self) -> Option<&AdditiveSpectralNoise> {
        match self {
            NoiseModel::Additive(a) => Some(a),
            NoiseModel::Multiplicative(_) => None,
        }
    }

    /// `(λ_0, ρ_2)` of the linear growth bound; additive noise has `λ_0 = 0`.
    pub fn growth_constants(&self) -> (f64, f64) {
        match self {
            NoiseModel::Additive(a) => (0.0, a.certificates.trace_partial),
            NoiseModel::Multiplicative(m) => m.growth_constants(),
        }
    }
}

/// Keyed source of cylindrical Wiener increments.
///
/// The draw for `(traj, step, mode)` depends only on those values and the
/// root seed: ChaCha8 keyed by `(root_seed, traj)`, stream `step`, with the
/// mode draws taken in coefficient-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WienerStream {
    pub root_seed: u64,
}

impl WienerStream {
    pub fn new(root_seed: u64) -> Self {
        WienerStream { root_seed }
    }

    fn rng(&self, traj: u64, step: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.root_seed.to_le_bytes());
        key[8..16].copy_from_slice(&traj.to_le_bytes());
        key[16..24].copy_from_slice(b"sqg-wien");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(step);
        rng
    }

    /// Standard normals for one `(traj, step)` key, one per retained mode.
    pub fn standard_normals(&self, traj: u64, step: u64, grid: &Grid) -> Vec<f64> {
        let mut rng = self.rng(traj, step);
        let c = grid.center();
        (0..grid.len())
            .map(|i| if i == c { 0.0 } else { rng.sample(StandardNormal) })
            .collect()
    }
}

/// `ΔW` for step `step`: independent `N(0, dt)` per retained mode.
pub fn wiener_increment(stream: &WienerStream, traj: u64, step: u64, dt: f64, grid: &Grid) -> Vec<f64> {
    let s = dt.sqrt();
    let mut x = stream.standard_normals(traj, step, grid);
    x.iter_mut().for_each(|v| *v *= s);
    x
}

/// `ΔW` over coarse step `step` built from `substeps` fine increments, so runs
/// with `dt` and `dt/substeps` see the same Brownian path.
pub fn wiener_increment_refined(
    stream: &WienerStream,
    traj: u64,
    step: u64,
    dt: f64,
    substeps: u32,
    grid: &Grid,
) -> Vec<f64> {
    if substeps <= 1 {
        return wiener_increment(stream, traj, step, dt, grid);
    }
    let m = substeps as u64;
    let fine = dt / substeps as f64;
    let mut acc = vec![0.0; grid.len()];
    for j in 0..m {
        let inc = wiener_increment(stream, traj, step * m + j, fine, grid);
        acc.iter_mut().zip(&inc).for_each(|(a, b)| *a += b);
    }
    acc
}

/// Per-mode factors of the exact OU step for a fixed `dt`.
#[derive(Debug, Clone)]
pub struct OuStepper {
    decay: Vec<f64>,
    /// `σ_k sqrt((1 - e^{-2λ_k dt}) / (2λ_k dt))`
    gain: Vec<f64>,
    grid: Grid,
}

impl OuStepper {
    pub fn new(noise: &AdditiveSpectralNoise, params: &PhysicalParams, dt: f64) -> Self {
        let grid = noise.grid.clone();
        let kabs = grid.kabs();
        let c = grid.center();
        let mut decay = vec![0.0; grid.len()];
        let mut gain = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            if i == c {
                continue;
            }
            let l = params.eigenvalue(kabs[i]);
            decay[i] = (-l * dt).exp();
            let x = 2.0 * l * dt;
            gain[i] = noise.sigma[i] * (-(-x).exp_m1() / x).sqrt();
        }
        OuStepper { decay, gain, grid }
    }

    /// `z' = e^{-λdt} z + σ η`, with `η` the rescaled `ξ ~ N(0, dt)`.
    pub fn step(&self, z: &SpectralField, xi: &[f64]) -> SpectralField {
        let x: Vec<f64> = xi.iter().zip(&self.gain).map(|(a, g)| a * g).collect();
        let mut i = 0;
        let d = &self.decay;
        let mut out = z.map_modes(|_, _| {
            let v = d[i];
            i += 1;
            v
        });
        out += &SpectralField::from_real_modes(&self.grid, &x);
        out
    }

    /// Noise part of the step alone.
    pub fn forcing(&self, xi: &[f64]) -> SpectralField {
        let x: Vec<f64> = xi.iter().zip(&self.gain).map(|(a, g)| a * g).collect();
        SpectralField::from_real_modes(&self.grid, &x)
    }
}

/// One distributionally exact step of `dz + A_α z dt = G dW`.
pub fn ou_exact_step(
    z: &SpectralField,
    noise: &AdditiveSpectralNoise,
    params: &PhysicalParams,
    dt: f64,
    xi: &[f64],
) -> SpectralField {
    OuStepper::new(noise, params, dt).step(z, xi)
}

/// Noise increment smoothed by the Poisson kernel `k_δ`.
pub fn mollify_increment(f: &SpectralField, delta: f64) -> SpectralField {
    poisson_filter(f, delta)
}
