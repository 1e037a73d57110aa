use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use sqg_core::spectral::{
    apply_lambda_s, dealiased_product, lp_norm, random_field, riesz_perp, sobolev_norm, Grid, GridSpec,
    Level, RandomFieldSpec, SpectralField,
};

fn grid(m: usize) -> Grid {
    Grid::new(GridSpec::new(m)).unwrap()
}

fn field(g: &Grid, seed: u64, band: Option<i32>) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RandomFieldSpec {
        slope: 1.0,
        band,
        l2_norm: Some(1.0),
    };
    random_field(g, &spec, &mut rng)
}

/// Samples at `ξ = 2π(j1, j2)/n`, stored `j1*n + j2`.
fn sample(g: &Grid, f: impl Fn(f64, f64) -> f64, level: Level) -> Vec<f64> {
    let n = match level {
        Level::Padded => g.padded_size(),
        Level::Quadrature => g.quad_size(),
    };
    let h = 2.0 * PI / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j1 in 0..n {
        for j2 in 0..n {
            out.push(f(j1 as f64 * h, j2 as f64 * h));
        }
    }
    out
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn physical_samples_match_closed_form() {
    let g = grid(16);
    let f = &SpectralField::cos_mode(&g, 2, -3, 1.5) + &SpectralField::sin_mode(&g, 1, 4, -0.5);
    let want = sample(
        &g,
        |x, y| 1.5 * (2.0 * x - 3.0 * y).cos() - 0.5 * (x + 4.0 * y).sin(),
        Level::Padded,
    );
    let got = f.to_physical(Level::Padded);
    assert!(max_gap(&got, &want) < 1e-13);
}

#[test]
fn riesz_matches_stream_function_form() {
    // R_j cos(k·ξ) = (k_j/|k|) sin(k·ξ), u = (-R_2 θ, R_1 θ)
    let g = grid(16);
    let (k1, k2) = (3.0, -2.0);
    let kn = f64::hypot(k1, k2);
    let th = SpectralField::cos_mode(&g, 3, -2, 2.0);
    let (u1, u2) = riesz_perp(&th);
    let w1 = sample(
        &g,
        |x, y| -2.0 * k2 / kn * (k1 * x + k2 * y).sin(),
        Level::Quadrature,
    );
    let w2 = sample(
        &g,
        |x, y| 2.0 * k1 / kn * (k1 * x + k2 * y).sin(),
        Level::Quadrature,
    );
    assert!(max_gap(&u1.to_physical(Level::Quadrature), &w1) < 1e-13);
    assert!(max_gap(&u2.to_physical(Level::Quadrature), &w2) < 1e-13);
}

#[test]
fn dealiased_product_matches_direct_convolution() {
    let g = grid(8);
    let f = field(&g, 1, None);
    let h = field(&g, 2, None);
    let got = dealiased_product(&f, &h).unwrap();
    let k = g.kmax();
    // (1/2π) Σ_{a+b=m} f_a h_b, truncated to the retained square, mean dropped
    for m2 in -k..=k {
        for m1 in -k..=k {
            if m1 == 0 && m2 == 0 {
                assert_eq!(got.coeff(0, 0), Complex64::new(0.0, 0.0));
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for a2 in -k..=k {
                for a1 in -k..=k {
                    let (b1, b2) = (m1 - a1, m2 - a2);
                    if b1.abs() <= k && b2.abs() <= k {
                        acc += f.coeff(a1, a2) * h.coeff(b1, b2);
                    }
                }
            }
            acc /= 2.0 * PI;
            assert!((got.coeff(m1, m2) - acc).norm() < 1e-14, "mode ({m1},{m2})");
        }
    }
}

#[test]
fn lp_norms_of_cosine() {
    let g = grid(16);
    let f = SpectralField::cos_mode(&g, 1, 0, 1.0);
    // ∫_T² |cos ξ1|^p = 2π ∫_0^{2π} |cos|^p
    for (p, one_d) in [(2.0, PI), (4.0, 3.0 * PI / 4.0), (6.0, 5.0 * PI / 8.0)] {
        let want = (2.0 * PI * one_d).powf(1.0 / p);
        assert!((lp_norm(&f, p) - want).abs() < 1e-12 * want, "p = {p}");
    }
    assert!((sobolev_norm(&f, 0.0) - PI * 2f64.sqrt()).abs() < 1e-13);
}

#[test]
fn sobolev_norm_of_single_mode() {
    let g = grid(16);
    let f = SpectralField::sin_mode(&g, 3, 4, 0.7);
    let base = 0.7 * PI * 2f64.sqrt();
    for s in [-1.0, -0.5, 0.5, 1.5] {
        assert!((sobolev_norm(&f, s) - 5f64.powf(s) * base).abs() < 1e-12 * base);
    }
}

#[test]
fn real_mode_round_trip() {
    let g = grid(12);
    let f = field(&g, 3, None);
    let back = SpectralField::from_real_modes(&g, &f.to_real_modes());
    assert!((&back - &f).max_abs_coeff() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lambda_composes(seed in any::<u64>(), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let g = grid(16);
        let f = field(&g, seed, None);
        let a = apply_lambda_s(&apply_lambda_s(&f, s), t);
        let b = apply_lambda_s(&f, s + t);
        prop_assert!((&a - &b).max_abs_coeff() <= 1e-12 * b.max_abs_coeff());
    }

    #[test]
    fn products_stay_real_and_zero_mean(seed in any::<u64>()) {
        let g = grid(16);
        let p = dealiased_product(&field(&g, seed, None), &field(&g, seed ^ 7, None)).unwrap();
        prop_assert!(p.hermitian_defect() <= 1e-15 * p.max_abs_coeff());
        prop_assert!(p.mean_coeff().norm() == 0.0);
    }

    #[test]
    fn parseval_by_quadrature(seed in any::<u64>(), band in 1i32..8) {
        let g = grid(16);
        let f = field(&g, seed, Some(band));
        let phys = f.to_physical(Level::Quadrature);
        let n = g.quad_size();
        let quad = phys.iter().map(|x| x * x).sum::<f64>() * (2.0 * PI / n as f64).powi(2);
        prop_assert!((quad - f.l2_sq()).abs() <= 1e-12 * f.l2_sq());
    }

    #[test]
    fn interpolation_with_unit_constant(seed in any::<u64>(), s1 in -1.0f64..0.5, gap in 0.1f64..2.0, w in 0.0f64..1.0) {
        let g = grid(16);
        let f = field(&g, seed, None);
        let s2 = s1 + gap;
        let s = w * s1 + (1.0 - w) * s2;
        let lhs = sobolev_norm(&f, s);
        let rhs = sobolev_norm(&f, s1).powf(w) * sobolev_norm(&f, s2).powf(1.0 - w);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn velocity_is_divergence_free(seed in any::<u64>()) {
        let g = grid(16);
        let (u1, u2) = riesz_perp(&field(&g, seed, None));
        let div = SpectralField::divergence(&u1, &u2);
        prop_assert!(div.max_abs_coeff() <= 1e-14 * u1.max_abs_coeff().max(u2.max_abs_coeff()));
    }
}
