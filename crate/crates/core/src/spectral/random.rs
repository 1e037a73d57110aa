use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::field::SpectralField;
use super::grid::Grid;

/// Gaussian random band-limited field: independent `N(0,1)·|k|^{-slope}`
/// along each real basis function with `max(|k1|,|k2|) <= band`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFieldSpec {
    #[serde(default = "default_slope")]
    pub slope: f64,
    /// Defaults to the full retained range.
    #[serde(default)]
    pub band: Option<i32>,
    /// Rescale to this L² norm when set.
    #[serde(default)]
    pub l2_norm: Option<f64>,
}

fn default_slope() -> f64 {
    1.5
}

impl Default for RandomFieldSpec {
    fn default() -> Self {
        RandomFieldSpec {
            slope: default_slope(),
            band: None,
            l2_norm: None,
        }
    }
}

pub fn random_field<R: Rng + ?Sized>(grid: &Grid, spec: &RandomFieldSpec, rng: &mut R) -> SpectralField {
    let band = spec.band.unwrap_or(grid.kmax()).min(grid.kmax());
    let kabs = grid.kabs();
    let x: Vec<f64> = (0..grid.len())
        .map(|i| {
            // draw for every mode so the stream layout does not depend on band
            let z: f64 = rng.sample(StandardNormal);
            let (k1, k2) = grid.wavenumber(i);
            if i == grid.center() || k1.abs().max(k2.abs()) > band {
                0.0
            } else {
                z * kabs[i].powf(-spec.slope)
            }
        })
        .collect();
    let f = SpectralField::from_real_modes(grid, &x);
    match spec.l2_norm {
        Some(target) => {
            let n = f.l2_sq().sqrt();
            if n > 0.0 {
                f.scale(target / n)
            } else {
                f
            }
        }
        None => f,
    }
}

/// Reproducible corpus of fields with varied slopes and band limits, used to
/// estimate the embedding constants.
pub fn random_corpus(grid: &Grid, count: usize, seed: u64, max_band: i32) -> Vec<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_band = max_band.clamp(1, grid.kmax());
    (0..count)
        .map(|_| {
            let spec = RandomFieldSpec {
                slope: rng.random_range(0.0..3.0),
                band: Some(rng.random_range(1..=max_band)),
                l2_norm: Some(1.0),
            };
            random_field(grid, &spec, &mut rng)
        })
        .collect()
}
