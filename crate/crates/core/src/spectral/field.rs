use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rustfft::num_complex::Complex64;

use super::grid::{Grid, Level};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A real zero-mean field on the torus, stored as Fourier coefficients with
/// respect to the orthonormal trigonometric basis (Parseval constant 1):
/// `|f|^2_{L^2} = Σ_k |c_k|^2`.
///
/// The physical field is `f(ξ) = (1/2π) Σ_k c_k e^{i k·ξ}`.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(grid: &Grid) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![ZERO; grid.len()],
        }
    }

    /// Builds a field from raw coefficients and restores Hermitian symmetry and
    /// zero mean by averaging conjugate partners.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut f = SpectralField {
            grid: grid.clone(),
            coeffs,
        };
        f.enforce_invariants();
        Ok(f)
    }

    /// Trusted constructor: `coeffs` must already be Hermitian.
    pub(crate) fn from_raw(grid: &Grid, mut coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        coeffs[grid.center()] = ZERO;
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    /// Coefficients along the real orthonormal basis `e_k`
    /// (`sin(k·ξ)/(π√2)` on the upper half-plane, `cos(k·ξ)/(π√2)` on the lower).
    pub fn from_real_modes(grid: &Grid, x: &[f64]) -> Self {
        let mut c = vec![ZERO; grid.len()];
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for idx in (grid.center() + 1)..grid.len() {
            let j = grid.conj_index(idx);
            let (a, b) = (x[j], x[idx]);
            c[idx] = Complex64::new(a * r, -b * r);
            c[j] = Complex64::new(a * r, b * r);
        }
        SpectralField::from_raw(grid, c)
    }

    /// Inverse of [`SpectralField::from_real_modes`].
    pub fn to_real_modes(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut x = vec![0.0; g.len()];
        let s = std::f64::consts::SQRT_2;
        for idx in (g.center() + 1)..g.len() {
            let c = self.coeffs[idx];
            x[g.conj_index(idx)] = s * c.re;
            x[idx] = -s * c.im;
        }
        x
    }

    /// `amp · cos(k·ξ)`.
    pub fn cos_mode(grid: &Grid, k1: i32, k2: i32, amp: f64) -> Self {
        let mut f = SpectralField::zeros(grid);
        if let Some(i) = grid.index(k1, k2) {
            if i != grid.center() {
                let v = Complex64::new(std::f64::consts::PI * amp, 0.0);
                f.coeffs[i] += v;
                f.coeffs[grid.conj_index(i)] += v;
            }
        }
        f
    }

    /// `amp · sin(k·ξ)`.
    pub fn sin_mode(grid: &Grid, k1: i32, k2: i32, amp: f64) -> Self {
        let mut f = SpectralField::zeros(grid);
        if let Some(i) = grid.index(k1, k2) {
            if i != grid.center() {
                let v = Complex64::new(0.0, -std::f64::consts::PI * amp);
                f.coeffs[i] += v;
                f.coeffs[grid.conj_index(i)] += v.conj();
            }
        }
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k1: i32, k2: i32) -> Complex64 {
        self.grid.index(k1, k2).map_or(ZERO, |i| self.coeffs[i])
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Symmetrizes conjugate partners and zeroes the mean.
    pub fn enforce_invariants(&mut self) {
        let n = self.coeffs.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let avg = (self.coeffs[i] + self.coeffs[j].conj()) * 0.5;
            self.coeffs[i] = avg;
            self.coeffs[j] = avg.conj();
        }
        self.coeffs[n / 2] = ZERO;
    }

    /// Largest `|c(-k) - conj c(k)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.coeffs.len();
        (0..n)
            .map(|i| (self.coeffs[n - 1 - i] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn mean_coeff(&self) -> Complex64 {
        self.coeffs[self.grid.center()]
    }

    /// Multiplies every coefficient by a real function of `|k|` (never called
    /// at `k = 0`).
    pub fn map_radial(&self, mut mult: impl FnMut(f64) -> f64) -> Self {
        let c = self.grid.center();
        let kabs = self.grid.kabs();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == c { ZERO } else { v * mult(kabs[i]) })
            .collect();
        SpectralField::from_raw(&self.grid, coeffs)
    }

    /// Multiplies coefficients by a real function of the wavenumber.
    pub fn map_modes(&self, mut mult: impl FnMut(i32, i32) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let (k1, k2) = self.grid.wavenumber(i);
                v * mult(k1, k2)
            })
            .collect();
        SpectralField::from_raw(&self.grid, coeffs)
    }

    /// `⟨f, g⟩_{L^2}`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// `Σ |k|^{2s} Re(c_f conj c_g)`, the `H^s` inner product.
    pub fn inner_sobolev(&self, other: &SpectralField, s: f64) -> f64 {
        let kabs = self.grid.kabs();
        let c = self.grid.center();
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .filter(|(i, _)| *i != c)
            .map(|(i, (a, b))| kabs[i].powf(2.0 * s) * (a.re * b.re + a.im * b.im))
            .sum()
    }

    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        for (y, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += v * a;
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        SpectralField::from_raw(&self.grid, self.coeffs.iter().map(|c| c * a).collect())
    }

    /// `∂_1 f` and `∂_2 f`.
    pub fn gradient(&self) -> (SpectralField, SpectralField) {
        let g = &self.grid;
        let mut d1 = Vec::with_capacity(g.len());
        let mut d2 = Vec::with_capacity(g.len());
        for (i, &c) in self.coeffs.iter().enumerate() {
            let (k1, k2) = g.wavenumber(i);
            let ic = Complex64::new(-c.im, c.re);
            d1.push(ic * k1 as f64);
            d2.push(ic * k2 as f64);
        }
        (SpectralField::from_raw(g, d1), SpectralField::from_raw(g, d2))
    }

    /// `∂_1 a + ∂_2 b`.
    pub fn divergence(a: &SpectralField, b: &SpectralField) -> SpectralField {
        let g = &a.grid;
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .enumerate()
            .map(|(i, (&x, &y))| {
                let (k1, k2) = g.wavenumber(i);
                let s = x * k1 as f64 + y * k2 as f64;
                Complex64::new(-s.im, s.re)
            })
            .collect();
        SpectralField::from_raw(g, coeffs)
    }

    /// Samples on the requested physical grid.
    pub fn to_physical(&self, level: Level) -> Vec<f64> {
        self.grid.to_physical(&self.coeffs, level)
    }

    /// Projection of sampled values onto the retained modes (mean removed).
    pub fn from_physical(grid: &Grid, phys: &[f64], level: Level) -> Self {
        SpectralField::from_raw(grid, grid.from_physical(phys, level))
    }

    /// Keeps modes with `|k| <= n`.
    pub fn project_ball(&self, n: u32) -> Self {
        let r2 = (n as i64) * (n as i64);
        self.map_modes(|k1, k2| {
            if (k1 as i64).pow(2) + (k2 as i64).pow(2) <= r2 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Fraction of `|f|^2` carried by modes with `max(|k1|,|k2|) > 2K/3`.
    pub fn tail_fraction(&self) -> f64 {
        let total = self.l2_sq();
        if total == 0.0 {
            return 0.0;
        }
        let cut = 2.0 * self.grid.kmax() as f64 / 3.0;
        let tail: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let (k1, k2) = self.grid.wavenumber(*i);
                k1.abs().max(k2.abs()) as f64 > cut
            })
            .map(|(_, c)| c.norm_sqr())
            .sum();
        tail / total
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert!(self.grid == rhs.grid, "grid mismatch");
        let c = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
        SpectralField::from_raw(&self.grid, c)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert!(self.grid == rhs.grid, "grid mismatch");
        let c = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        SpectralField::from_raw(&self.grid, c)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scale(a)
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        assert!(self.grid == rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        assert!(self.grid == rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::GridSpec;

    fn grid() -> Grid {
        Grid::new(GridSpec::new(8)).unwrap()
    }

    #[test]
    fn real_mode_roundtrip_preserves_norm() {
        let g = grid();
        let x: Vec<f64> = (0..g.len())
            .map(|i| {
                if i == g.center() {
                    0.0
                } else {
                    (i as f64 * 0.37).sin()
                }
            })
            .collect();
        let f = SpectralField::from_real_modes(&g, &x);
        assert!(f.hermitian_defect() == 0.0);
        let y = f.to_real_modes();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        let nx: f64 = x.iter().map(|v| v * v).sum();
        assert!((nx - f.l2_sq()).abs() < 1e-12 * nx);
    }

    #[test]
    fn sin_mode_samples() {
        let g = grid();
        let f = SpectralField::sin_mode(&g, 1, 0, 1.0);
        let n = g.padded_size();
        let p = f.to_physical(Level::Padded);
        for i1 in 0..n {
            let x1 = 2.0 * std::f64::consts::PI * i1 as f64 / n as f64;
            for i2 in 0..n {
                assert!((p[i1 * n + i2] - x1.sin()).abs() < 1e-14);
            }
        }
        let c = SpectralField::cos_mode(&g, 0, 2, 3.0);
        let p = c.to_physical(Level::Padded);
        for i2 in 0..n {
            let x2 = 2.0 * std::f64::consts::PI * i2 as f64 / n as f64;
            assert!((p[5 * n + i2] - 3.0 * (2.0 * x2).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn enforce_invariants_zeroes_mean() {
        let g = grid();
        let mut c = vec![Complex64::new(1.0, 2.0); g.len()];
        c[3] = Complex64::new(0.5, -1.0);
        let f = SpectralField::from_coeffs(&g, c).unwrap();
        assert_eq!(f.mean_coeff(), ZERO);
        assert!(f.hermitian_defect() < 1e-15);
    }
}
