//! Resolution bookkeeping and the FFT plans shared by every field on a grid.
//!
//! Coefficients are stored for every wavenumber `k = (k1, k2)` with
//! `|k1|, |k2| <= K` where `K = M/2`, row-major with `k2` as the slow index:
//! `index(k1, k2) = (k2 + K) * (2K + 1) + (k1 + K)`. With this layout the
//! conjugate partner of index `i` is `len - 1 - i` and the zero mode sits at
//! the centre.
//!
//! Physical samples on an `n x n` grid are stored as `phys[i1 * n + i2]`,
//! the value at `(2π i1 / n, 2π i2 / n)`.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn default_padding() -> f64 {
    1.5
}

/// User-facing resolution description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// `M`: retained wavenumbers satisfy `|k_i| <= M/2`.
    pub modes_per_dim: usize,
    /// Oversampling used for quadratic products, at least 3/2.
    #[serde(default = "default_padding")]
    pub padding_factor: f64,
    /// Points per dimension of the L^p quadrature grid. Defaults to twice the
    /// padded size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
}

impl GridSpec {
    pub fn new(modes_per_dim: usize) -> Self {
        GridSpec {
            modes_per_dim,
            padding_factor: default_padding(),
            quad_points: None,
        }
    }
}

/// Smallest even size `>= min` whose prime factors are 2, 3 and 5.
fn fft_friendly(min: usize) -> usize {
    let mut n = min.max(2);
    loop {
        if n.is_multiple_of(2) {
            let mut m = n;
            for p in [2, 3, 5] {
                while m.is_multiple_of(p) {
                    m /= p;
                }
            }
            if m == 1 {
                return n;
            }
        }
        n += 1;
    }
}

pub(crate) struct Plan {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plan {
    fn new(planner: &mut FftPlanner<f64>, n: usize) -> Self {
        Plan {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }
}

struct GridInner {
    spec: GridSpec,
    kmax: i32,
    side: usize,
    kabs: Vec<f64>,
    padded: Plan,
    quad: Plan,
}

/// Shared, immutable grid. Cloning is cheap.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("modes_per_dim", &self.0.spec.modes_per_dim)
            .field("padded", &self.0.padded.n)
            .field("quad", &self.0.quad.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.kmax == other.0.kmax
                && self.0.padded.n == other.0.padded.n
                && self.0.quad.n == other.0.quad.n)
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        let m = spec.modes_per_dim;
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "modes_per_dim must be even and >= 2, got {m}"
            )));
        }
        if !(spec.padding_factor >= 1.5) || !spec.padding_factor.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "padding_factor must be >= 3/2, got {}",
                spec.padding_factor
            )));
        }
        let kmax = (m / 2) as i32;
        // products of two fields with |k_i| <= K reach 2K; the alias k - n must
        // stay outside [-K, K], hence n >= 3K + 1
        let min_pad = ((spec.padding_factor * m as f64).ceil() as usize).max(3 * m / 2 + 1);
        let padded = fft_friendly(min_pad);
        let quad = match spec.quad_points {
            Some(q) => {
                if q % 2 != 0 || q < padded {
                    return Err(Error::InvalidGrid(format!(
                        "quad_points must be even and >= padded size {padded}, got {q}"
                    )));
                }
                q
            }
            None => 2 * padded,
        };
        let side = 2 * kmax as usize + 1;
        let mut kabs = Vec::with_capacity(side * side);
        for k2 in -kmax..=kmax {
            for k1 in -kmax..=kmax {
                kabs.push(((k1 * k1 + k2 * k2) as f64).sqrt());
            }
        }
        let mut planner = FftPlanner::new();
        let padded_plan = Plan::new(&mut planner, padded);
        let quad_plan = Plan::new(&mut planner, quad);
        Ok(Grid(Arc::new(GridInner {
            spec,
            kmax,
            side,
            kabs,
            padded: padded_plan,
            quad: quad_plan,
        })))
    }

    pub fn spec(&self) -> GridSpec {
        self.0.spec
    }

    /// `K = M/2`.
    pub fn kmax(&self) -> i32 {
        self.0.kmax
    }

    pub fn side(&self) -> usize {
        self.0.side
    }

    /// Number of stored coefficients, `(2K+1)^2`.
    pub fn len(&self) -> usize {
        self.0.side * self.0.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center(&self) -> usize {
        (self.len() - 1) / 2
    }

    pub fn padded_size(&self) -> usize {
        self.0.padded.n
    }

    pub fn quad_size(&self) -> usize {
        self.0.quad.n
    }

    #[inline]
    pub fn index(&self, k1: i32, k2: i32) -> Option<usize> {
        let k = self.0.kmax;
        if k1.abs() > k || k2.abs() > k {
            return None;
        }
        Some(((k2 + k) as usize) * self.0.side + (k1 + k) as usize)
    }

    #[inline]
    pub fn wavenumber(&self, idx: usize) -> (i32, i32) {
        let k = self.0.kmax;
        let side = self.0.side;
        ((idx % side) as i32 - k, (idx / side) as i32 - k)
    }

    /// Index of `-k`.
    #[inline]
    pub fn conj_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// `|k|` per stored index.
    pub fn kabs(&self) -> &[f64] {
        &self.0.kabs
    }

    /// True for the half-plane `k2 > 0` or `k2 = 0, k1 > 0`, whose real basis
    /// function is `sin(k·ξ)`; the mirrored half carries `cos`.
    #[inline]
    pub fn is_upper(&self, idx: usize) -> bool {
        idx > self.center()
    }

    /// Smallest `|k|^2` strictly greater than `n^2` among retained modes.
    pub fn next_shell_sq(&self, n: u32) -> Option<i64> {
        let n2 = (n as i64) * (n as i64);
        let k = self.0.kmax as i64;
        let mut best: Option<i64> = None;
        for k2 in -k..=k {
            for k1 in -k..=k {
                let s = k1 * k1 + k2 * k2;
                if s > n2 && best.is_none_or(|b| s < b) {
                    best = Some(s);
                }
            }
        }
        best
    }

    pub(crate) fn plan(&self, level: Level) -> &Plan {
        match level {
            Level::Padded => &self.0.padded,
            Level::Quadrature => &self.0.quad,
        }
    }

    /// Samples of the real field with orthonormal coefficients `coeffs`,
    /// the value at `ξ = 2π(j1, j2)/n` stored at `j1*n + j2`.
    pub fn to_physical(&self, coeffs: &[Complex64], level: Level) -> Vec<f64> {
        let buf = self.inverse(level, |i| coeffs[i]);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Two real fields through one complex transform.
    pub fn to_physical_pair(&self, a: &[Complex64], b: &[Complex64], level: Level) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let buf = self.inverse(level, |j| a[j] + i * b[j]);
        buf.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    /// Orthonormal coefficients of the retained modes of a sampled real field.
    /// The zero mode is dropped.
    pub fn from_physical(&self, phys: &[f64], level: Level) -> Vec<Complex64> {
        let n = self.plan(level).n;
        let scale = TWO_PI / (n * n) as f64;
        let buf: Vec<Complex64> = phys.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let spec = self.forward(level, buf);
        let mut out = vec![Complex64::new(0.0, 0.0); self.len()];
        for (idx, o) in out.iter_mut().enumerate() {
            let (k1, k2) = self.wavenumber(idx);
            *o = spec[wrap(k2, n) * n + wrap(k1, n)] * scale;
        }
        out[self.center()] = Complex64::new(0.0, 0.0);
        out
    }

    pub fn from_physical_pair(&self, a: &[f64], b: &[f64], level: Level) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.plan(level).n;
        let scale = TWO_PI / (n * n) as f64;
        let buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        let spec = self.forward(level, buf);
        let zero = Complex64::new(0.0, 0.0);
        let mut oa = vec![zero; self.len()];
        let mut ob = vec![zero; self.len()];
        for idx in 0..self.len() {
            let (k1, k2) = self.wavenumber(idx);
            let f = spec[wrap(k2, n) * n + wrap(k1, n)];
            let g = spec[wrap(-k2, n) * n + wrap(-k1, n)].conj();
            oa[idx] = (f + g) * (0.5 * scale);
            // (f - g) / 2i
            let d = (f - g) * (0.5 * scale);
            ob[idx] = Complex64::new(d.im, -d.re);
        }
        oa[self.center()] = zero;
        ob[self.center()] = zero;
        (oa, ob)
    }

    fn inverse(&self, level: Level, coeff: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
        let plan = self.plan(level);
        let n = plan.n;
        let k = self.0.kmax;
        let scale = 1.0 / TWO_PI;
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for idx in 0..self.len() {
            let (k1, k2) = self.wavenumber(idx);
            buf[wrap(k2, n) * n + wrap(k1, n)] = coeff(idx) * scale;
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.inv.get_inplace_scratch_len()];
        for k2 in -k..=k {
            let r = wrap(k2, n);
            plan.inv
                .process_with_scratch(&mut buf[r * n..(r + 1) * n], &mut scratch);
        }
        transpose(&mut buf, n);
        plan.inv.process_with_scratch(&mut buf, &mut scratch);
        buf
    }

    fn forward(&self, level: Level, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        let plan = self.plan(level);
        let n = plan.n;
        let k = self.0.kmax;
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.fwd.get_inplace_scratch_len()];
        plan.fwd.process_with_scratch(&mut buf, &mut scratch);
        transpose(&mut buf, n);
        for k2 in -k..=k {
            let r = wrap(k2, n);
            plan.fwd
                .process_with_scratch(&mut buf[r * n..(r + 1) * n], &mut scratch);
        }
        buf
    }
}

/// Which physical grid a transform targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// Oversampled grid on which quadratic products are alias-free.
    Padded,
    /// Finer grid used for L^p quadrature and pointwise nonlinearities.
    Quadrature,
}

#[inline]
fn wrap(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padded_size_is_alias_free_and_fft_friendly() {
        for m in [2usize, 8, 16, 32, 64] {
            let g = Grid::new(GridSpec::new(m)).unwrap();
            assert!(g.padded_size() > 3 * m / 2);
            assert!(g.padded_size().is_multiple_of(2));
            assert!(g.quad_size() >= g.padded_size());
        }
        assert_eq!(fft_friendly(97), 100);
        assert_eq!(fft_friendly(49), 50);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec::new(7)).is_err());
        let mut s = GridSpec::new(8);
        s.padding_factor = 1.2;
        assert!(Grid::new(s).is_err());
        let mut s = GridSpec::new(8);
        s.quad_points = Some(13);
        assert!(Grid::new(s).is_err());
    }

    #[test]
    fn index_layout() {
        let g = Grid::new(GridSpec::new(8)).unwrap();
        assert_eq!(g.index(0, 0), Some(g.center()));
        for idx in 0..g.len() {
            let (k1, k2) = g.wavenumber(idx);
            assert_eq!(g.index(k1, k2), Some(idx));
            assert_eq!(g.wavenumber(g.conj_index(idx)), (-k1, -k2));
            let upper = k2 > 0 || (k2 == 0 && k1 > 0);
            assert_eq!(g.is_upper(idx), upper);
        }
        assert_eq!(g.next_shell_sq(2), Some(5));
        assert_eq!(g.next_shell_sq(0), Some(1));
    }

    #[test]
    fn pair_transforms_roundtrip() {
        let g = Grid::new(GridSpec::new(8)).unwrap();
        let n = g.padded_size();
        let a: Vec<f64> = (0..n * n).map(|i| ((i * 7 % 13) as f64).sin()).collect();
        let b: Vec<f64> = (0..n * n).map(|i| ((i * 3 % 11) as f64).cos()).collect();
        let (ca, cb) = g.from_physical_pair(&a, &b, Level::Padded);
        let ca1 = g.from_physical(&a, Level::Padded);
        let cb1 = g.from_physical(&b, Level::Padded);
        for i in 0..g.len() {
            assert!((ca[i] - ca1[i]).norm() < 1e-13);
            assert!((cb[i] - cb1[i]).norm() < 1e-13);
        }
        let (pa, pb) = g.to_physical_pair(&ca, &cb, Level::Padded);
        let pa1 = g.to_physical(&ca, Level::Padded);
        let pb1 = g.to_physical(&cb, Level::Padded);
        for i in 0..n * n {
            assert!((pa[i] - pa1[i]).abs() < 1e-13);
            assert!((pb[i] - pb1[i]).abs() < 1e-13);
        }
    }
}
