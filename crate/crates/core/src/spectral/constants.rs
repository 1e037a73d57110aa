//! Empirical constants for the embedding, Riesz, product and commutator
//! inequalities, measured as the largest left/right ratio over a random
//! corpus of band-limited fields. These are regression values, not proofs.

use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::{Grid, Level};
use super::ops::{apply_lambda_s, dealiased_product, lp_norm, lp_norm_samples, riesz_perp, sobolev_norm};
use super::random::random_corpus;

/// Default corpus parameters shared by every consumer of the constants.
pub const CORPUS_SIZE: usize = 200;
pub const CORPUS_SEED: u64 = 0x0506_01e5;

/// `‖f‖_{L^q}`, using the exact Parseval value for `q = 2`.
fn norm_q(f: &SpectralField, q: f64) -> f64 {
    if q == 2.0 {
        sobolev_norm(f, 0.0)
    } else {
        lp_norm(f, q)
    }
}

/// Exponent `σ` with `1/p + σ/2 = 1/q`.
pub fn sobolev_exponent(p: f64, q: f64) -> f64 {
    2.0 * (1.0 / q - 1.0 / p)
}

/// Largest `‖f‖_{L^p} / ‖Λ^σ f‖_{L^q}` over the corpus.
pub fn sobolev_ratio_max(corpus: &[SpectralField], p: f64, q: f64) -> f64 {
    let sigma = sobolev_exponent(p, q);
    corpus
        .iter()
        .map(|f| lp_norm(f, p) / norm_q(&apply_lambda_s(f, sigma), q))
        .fold(0.0, f64::max)
}

/// Largest `‖Λ^s u_j‖_{L^p} / ‖Λ^s θ‖_{L^p}` over the corpus and `j = 1, 2`.
pub fn riesz_ratio_max(corpus: &[SpectralField], s: f64, p: f64) -> f64 {
    corpus
        .iter()
        .map(|theta| {
            let (u1, u2) = riesz_perp(theta);
            let den = norm_q(&apply_lambda_s(theta, s), p);
            let a = norm_q(&apply_lambda_s(&u1, s), p);
            let b = norm_q(&apply_lambda_s(&u2, s), p);
            a.max(b) / den
        })
        .fold(0.0, f64::max)
}

/// Largest ratio for the product estimate
/// `‖Λ^s(fg)‖_{L^2} <= C (‖f‖_{L^4}‖Λ^s g‖_{L^4} + ‖g‖_{L^4}‖Λ^s f‖_{L^4})`
/// over consecutive pairs of the corpus. Pairs must be band-limited to
/// `K/2` so the product is fully retained.
pub fn product_ratio_max(corpus: &[SpectralField], s: f64) -> f64 {
    corpus
        .windows(2)
        .map(|w| {
            let (f, g) = (&w[0], &w[1]);
            let fg = dealiased_product(f, g).expect("corpus shares one grid");
            let lhs = sobolev_norm(&fg, s);
            let rhs = lp_norm(f, 4.0) * lp_norm(&apply_lambda_s(g, s), 4.0)
                + lp_norm(g, 4.0) * lp_norm(&apply_lambda_s(f, s), 4.0);
            lhs / rhs
        })
        .fold(0.0, f64::max)
}

/// Largest ratio for the commutator estimate
/// `‖Λ^s(fg) - fΛ^s g‖_{L^2} <= C (‖∇f‖_{L^4}‖Λ^{s-1}g‖_{L^4} + ‖g‖_{L^4}‖Λ^s f‖_{L^4})`.
pub fn commutator_ratio_max(corpus: &[SpectralField], s: f64) -> f64 {
    corpus
        .windows(2)
        .map(|w| {
            let (f, g) = (&w[0], &w[1]);
            let fg = dealiased_product(f, g).expect("corpus shares one grid");
            let a = apply_lambda_s(&fg, s).to_physical(Level::Quadrature);
            let pf = f.to_physical(Level::Quadrature);
            let pg = apply_lambda_s(g, s).to_physical(Level::Quadrature);
            let diff: Vec<f64> = a
                .iter()
                .zip(pf.iter().zip(&pg))
                .map(|(x, (y, z))| x - y * z)
                .collect();
            let lhs = lp_norm_samples(&diff, 2.0);
            let (d1, d2) = f.gradient();
            let p1 = d1.to_physical(Level::Quadrature);
            let p2 = d2.to_physical(Level::Quadrature);
            let grad: Vec<f64> = p1.iter().zip(&p2).map(|(x, y)| x.hypot(*y)).collect();
            let rhs = lp_norm_samples(&grad, 4.0) * lp_norm(&apply_lambda_s(g, s - 1.0), 4.0)
                + lp_norm(g, 4.0) * lp_norm(&apply_lambda_s(f, s), 4.0);
            lhs / rhs
        })
        .fold(0.0, f64::max)
}

/// Frozen values of [`EmpiricalConstants::measure`] at `(p, q) = (4, 2)` and
/// [`EmpiricalConstants::for_synchronization`] at `p = 7`, on the default
/// corpus. A unit test re-measures them.
pub const FROZEN: &[EmpiricalConstants] = &[
    frozen_entry(16, 4.0, 0.49485679670065236, 0.946455660727882),
    frozen_entry(16, 7.0 / 3.0, 0.8060375739930604, 0.9400815771758226),
    frozen_entry(32, 4.0, 0.4992799622404991, 0.9545729995843314),
    frozen_entry(32, 7.0 / 3.0, 0.8078798427564469, 0.9540919873438137),
];

const fn frozen_entry(m: usize, p: f64, c_sobolev: f64, c_riesz: f64) -> EmpiricalConstants {
    EmpiricalConstants {
        c_sobolev,
        c_riesz,
        p,
        q: 2.0,
        modes_per_dim: m,
        corpus_size: CORPUS_SIZE,
        corpus_seed: CORPUS_SEED,
    }
}

/// The two constants entering the moment bound, the decay functional and the
/// ergodicity margin. Always labeled empirical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalConstants {
    /// `Ĉ_S` for the embedding `‖f‖_{L^p} <= C ‖Λ^σ f‖_{L^q}`.
    pub c_sobolev: f64,
    /// `Ĉ_R` for `‖u_j‖_{L^p} <= C ‖θ‖_{L^p}`.
    pub c_riesz: f64,
    pub p: f64,
    pub q: f64,
    pub modes_per_dim: usize,
    pub corpus_size: usize,
    pub corpus_seed: u64,
}

impl EmpiricalConstants {
    /// Measures `Ĉ_S(p, q)` and `Ĉ_R(p)` on the default corpus.
    pub fn measure(grid: &Grid, p: f64, q: f64) -> Self {
        Self::measure_with(grid, p, q, CORPUS_SIZE, CORPUS_SEED)
    }

    pub fn measure_with(grid: &Grid, p: f64, q: f64, corpus_size: usize, seed: u64) -> Self {
        let corpus = random_corpus(grid, corpus_size, seed, grid.kmax());
        EmpiricalConstants {
            c_sobolev: sobolev_ratio_max(&corpus, p, q),
            c_riesz: riesz_ratio_max(&corpus, 0.0, p),
            p,
            q,
            modes_per_dim: grid.spec().modes_per_dim,
            corpus_size,
            corpus_seed: seed,
        }
    }

    /// Entry of [`FROZEN`] for this grid size and `(p, q)`.
    pub fn frozen(modes_per_dim: usize, p: f64, q: f64) -> Option<Self> {
        FROZEN
            .iter()
            .find(|c| c.modes_per_dim == modes_per_dim && (c.p - p).abs() < 1e-12 && c.q == q)
            .copied()
    }

    /// Frozen value when available, otherwise measured.
    pub fn frozen_or_measure(grid: &Grid, p: f64, q: f64) -> Self {
        Self::frozen(grid.spec().modes_per_dim, p, q).unwrap_or_else(|| Self::measure(grid, p, q))
    }

    /// Frozen or measured constants for the decay functional at `p`.
    pub fn frozen_or_measure_sync(grid: &Grid, p: f64) -> Self {
        let p1 = 2.0 * p / (p - 1.0);
        Self::frozen(grid.spec().modes_per_dim, p1, 2.0).unwrap_or_else(|| Self::for_synchronization(grid, p))
    }

    /// Constants for the decay functional at the critical exponent `p`:
    /// the embedding `H^{1/p} ↪ L^{p1}` with `1/p + 2/p1 = 1` and the
    /// Riesz bound in `L^p`.
    pub fn for_synchronization(grid: &Grid, p: f64) -> Self {
        let p1 = 2.0 * p / (p - 1.0);
        let corpus = random_corpus(grid, CORPUS_SIZE, CORPUS_SEED, grid.kmax());
        EmpiricalConstants {
            c_sobolev: sobolev_ratio_max(&corpus, p1, 2.0),
            c_riesz: riesz_ratio_max(&corpus, 0.0, p),
            p: p1,
            q: 2.0,
            modes_per_dim: grid.spec().modes_per_dim,
            corpus_size: CORPUS_SIZE,
            corpus_seed: CORPUS_SEED,
        }
    }
}
