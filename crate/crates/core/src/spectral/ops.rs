//! Fourier multipliers, norms and alias-free products.

use rustfft::num_complex::Complex64;

use super::field::SpectralField;
use super::grid::Level;
use crate::error::Result;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// `Λ^s f`, multiplier `|k|^s`.
pub fn apply_lambda_s(f: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return f.clone();
    }
    f.map_radial(|k| k.powf(s))
}

/// `k_δ * f` with the periodic Poisson kernel, multiplier `e^{-δ|k|}`.
pub fn poisson_filter(f: &SpectralField, delta: f64) -> SpectralField {
    f.map_radial(|k| (-delta * k).exp())
}

/// `u = R^⊥θ = (-R_2 θ, R_1 θ)` with `R_j ↔ -i k_j/|k|`.
///
/// Equivalently `u = (-∂_2 ψ, ∂_1 ψ)` with `Λψ = -θ`.
pub fn riesz_perp(theta: &SpectralField) -> (SpectralField, SpectralField) {
    let g = theta.grid();
    let kabs = g.kabs();
    let c = g.center();
    let mut u1 = Vec::with_capacity(g.len());
    let mut u2 = Vec::with_capacity(g.len());
    for (i, &t) in theta.coeffs().iter().enumerate() {
        if i == c {
            u1.push(Complex64::new(0.0, 0.0));
            u2.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let (k1, k2) = g.wavenumber(i);
        // w = i θ / |k|
        let w = Complex64::new(-t.im, t.re) / kabs[i];
        u1.push(w * k2 as f64);
        u2.push(-(w * k1 as f64));
    }
    (SpectralField::from_raw(g, u1), SpectralField::from_raw(g, u2))
}

/// Largest `|k·û(k)|` over retained modes.
pub fn spectral_divergence_max(u1: &SpectralField, u2: &SpectralField) -> f64 {
    let g = u1.grid();
    u1.coeffs()
        .iter()
        .zip(u2.coeffs())
        .enumerate()
        .map(|(i, (a, b))| {
            let (k1, k2) = g.wavenumber(i);
            (a * k1 as f64 + b * k2 as f64).norm()
        })
        .fold(0.0, f64::max)
}

/// `(Σ_k |k|^{2s} |c_k|^2)^{1/2}`; for `s = 0` this is the L² norm.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    if s == 0.0 {
        return f.l2_sq().sqrt();
    }
    let kabs = f.grid().kabs();
    let c = f.grid().center();
    f.coeffs()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != c)
        .map(|(i, v)| kabs[i].powf(2.0 * s) * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// L^p norm by equal-weight quadrature on the quadrature grid; `p = ∞`
/// returns the grid maximum of `|f|`.
pub fn lp_norm(f: &SpectralField, p: f64) -> f64 {
    let phys = f.to_physical(Level::Quadrature);
    lp_norm_samples(&phys, p)
}

/// L^p norm of samples on an equispaced `n x n` grid of the torus.
pub fn lp_norm_samples(phys: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return phys.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let cell = TWO_PI * TWO_PI / phys.len() as f64;
    let sum: f64 = if p == 2.0 {
        phys.iter().map(|v| v * v).sum()
    } else {
        phys.iter().map(|v| v.abs().powf(p)).sum()
    };
    (cell * sum).powf(1.0 / p)
}

/// Retained-mode projection of `f·g`, mean removed, computed on the padded
/// grid where the quadratic product is alias-free.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.same_grid(g)?;
    let grid = f.grid();
    let (pf, pg) = grid.to_physical_pair(f.coeffs(), g.coeffs(), Level::Padded);
    let prod: Vec<f64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
    Ok(SpectralField::from_physical(grid, &prod, Level::Padded))
}

/// Two dealiased products sharing one forward transform: `(a·c, b·c)`.
pub(crate) fn dealiased_products_with(
    a: &SpectralField,
    b: &SpectralField,
    c: &SpectralField,
) -> (SpectralField, SpectralField) {
    let grid = a.grid();
    let (pa, pb) = grid.to_physical_pair(a.coeffs(), b.coeffs(), Level::Padded);
    let pc = grid.to_physical(c.coeffs(), Level::Padded);
    let ac: Vec<f64> = pa.iter().zip(&pc).map(|(x, y)| x * y).collect();
    let bc: Vec<f64> = pb.iter().zip(&pc).map(|(x, y)| x * y).collect();
    let (fa, fb) = grid.from_physical_pair(&ac, &bc, Level::Padded);
    (
        SpectralField::from_raw(grid, fa),
        SpectralField::from_raw(grid, fb),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, Grid, GridSpec, RandomFieldSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(m: usize) -> Grid {
        Grid::new(GridSpec::new(m)).unwrap()
    }

    #[test]
    fn lambda_on_single_modes() {
        let g = grid(8);
        let f = SpectralField::sin_mode(&g, 1, 0, 1.0);
        assert_eq!(apply_lambda_s(&f, 1.0), f);
        let c = SpectralField::cos_mode(&g, 2, 0, 1.0);
        let r = sobolev_norm(&apply_lambda_s(&c, 1.0), 0.0) / sobolev_norm(&c, 0.0);
        assert!((r - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_composition_matches_direct_multiplier() {
        let g = grid(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field(&g, &RandomFieldSpec::default(), &mut rng);
        for (s, t) in [(0.3, 0.9), (-0.5, 1.5), (1.25, -2.0)] {
            let a = apply_lambda_s(&apply_lambda_s(&f, s), t);
            let b = apply_lambda_s(&f, s + t);
            for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
                assert!((x - y).norm() <= 1e-14 * y.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn riesz_of_cosine_and_sine() {
        let g = grid(8);
        // stream-function oracle: ψ = -Λ^{-1}θ, u = (-∂_2ψ, ∂_1ψ)
        let theta = SpectralField::cos_mode(&g, 1, 0, 1.0);
        let psi = apply_lambda_s(&theta, -1.0).scale(-1.0);
        let (d1, d2) = psi.gradient();
        let (u1, u2) = riesz_perp(&theta);
        assert!((&u1 + &d2).max_abs_coeff() < 1e-15);
        assert!((&u2 - &d1).max_abs_coeff() < 1e-15);
        assert!((&u2 - &SpectralField::sin_mode(&g, 1, 0, 1.0)).max_abs_coeff() < 1e-15);
        assert!(u1.max_abs_coeff() == 0.0);

        let theta = SpectralField::sin_mode(&g, 0, 1, 1.0);
        let (u1, u2) = riesz_perp(&theta);
        assert!((&u1 - &SpectralField::cos_mode(&g, 0, 1, 1.0)).max_abs_coeff() < 1e-15);
        assert!(u2.max_abs_coeff() == 0.0);
    }

    #[test]
    fn sobolev_norm_single_modes() {
        let g = grid(8);
        // orthonormal e_k with |k| = 2: cos(2ξ1)/(π√2)
        let e = SpectralField::cos_mode(&g, 2, 0, 1.0 / (PI * 2f64.sqrt()));
        assert!((sobolev_norm(&e, 0.0) - 1.0).abs() < 1e-15);
        assert!((sobolev_norm(&e, 1.0) - 2.0).abs() < 1e-14);
        let f = SpectralField::sin_mode(&g, 3, 4, 0.7);
        for s in [-1.0, 0.5, 2.0] {
            let want = 5f64.powf(s) * sobolev_norm(&f, 0.0);
            assert!((sobolev_norm(&f, s) - want).abs() < 1e-13 * want);
        }
    }

    #[test]
    fn lp_norm_of_sine() {
        let g = grid(8);
        let f = SpectralField::sin_mode(&g, 1, 0, 1.0);
        assert!((lp_norm(&f, 2.0) - (2.0 * PI * PI).sqrt()).abs() < 1e-12);
        assert!((lp_norm(&f, f64::INFINITY) - 1.0).abs() < 1e-12);
        let z = SpectralField::zeros(&g);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&z, p), 0.0);
        }
    }

    #[test]
    fn product_of_cosines() {
        let g = grid(8);
        let f = SpectralField::cos_mode(&g, 1, 0, 1.0);
        let p = dealiased_product(&f, &f).unwrap();
        let want = SpectralField::cos_mode(&g, 2, 0, 0.5);
        assert!((&p - &want).max_abs_coeff() < 1e-14);
        let z = dealiased_product(&f, &SpectralField::zeros(&g)).unwrap();
        // the pair transform leaks rounding between its two halves
        assert!(z.max_abs_coeff() < 1e-14);
    }

    #[test]
    fn product_grid_mismatch() {
        let a = SpectralField::zeros(&grid(8));
        let b = SpectralField::zeros(&grid(16));
        assert!(dealiased_product(&a, &b).is_err());
    }
}
