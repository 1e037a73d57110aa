//! Binary field snapshots.
//!
//! Layout (all little-endian):
//!
//! | offset | size | content                                   |
//! |--------|------|-------------------------------------------|
//! | 0      | 4    | magic `SQGF`                              |
//! | 4      | 4    | format version (`u32`, currently 1)       |
//! | 8      | 4    | `M` = modes per dimension (`u32`)         |
//! | 12     | 8    | padding factor (`f64`)                    |
//! | 20     | 16·L | `(re, im)` pairs of `f64`, `L = (M+1)^2`  |
//!
//! Coefficients follow the grid's row-major order: `k2` from `-M/2` to `M/2`
//! outermost, `k1` innermost, orthonormal-basis normalization.

use rustfft::num_complex::Complex64;

use super::field::SpectralField;
use super::grid::{Grid, GridSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SQGF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode(field: &SpectralField) -> Vec<u8> {
    let spec = field.grid().spec();
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.coeffs().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.modes_per_dim as u32).to_le_bytes());
    out.extend_from_slice(&spec.padding_factor.to_le_bytes());
    for c in field.coeffs() {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

/// Reads the header only.
pub fn decode_spec(bytes: &[u8]) -> Result<GridSpec> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Snapshot(format!(
            "truncated header ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let m = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let padding_factor = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    Ok(GridSpec {
        modes_per_dim: m,
        padding_factor,
        quad_points: None,
    })
}

/// Decodes onto `grid`, which must match the header's `M` and padding.
pub fn decode(bytes: &[u8], grid: &Grid) -> Result<SpectralField> {
    let spec = decode_spec(bytes)?;
    let gs = grid.spec();
    if spec.modes_per_dim != gs.modes_per_dim || spec.padding_factor != gs.padding_factor {
        return Err(Error::Snapshot(format!(
            "snapshot grid (M={}, pad={}) does not match target grid (M={}, pad={})",
            spec.modes_per_dim, spec.padding_factor, gs.modes_per_dim, gs.padding_factor
        )));
    }
    let body = &bytes[HEADER_LEN..];
    if body.len() != 16 * grid.len() {
        return Err(Error::Snapshot(format!(
            "expected {} coefficient bytes, found {}",
            16 * grid.len(),
            body.len()
        )));
    }
    let coeffs: Vec<Complex64> = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    let field = SpectralField::from_raw(grid, coeffs.clone());
    if coeffs[grid.center()] != Complex64::new(0.0, 0.0) {
        return Err(Error::Snapshot("nonzero mean coefficient".into()));
    }
    let scale = field.max_abs_coeff().max(f64::MIN_POSITIVE);
    if field.hermitian_defect() > 1e-12 * scale {
        return Err(Error::Snapshot("coefficients are not Hermitian-symmetric".into()));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, RandomFieldSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), m in prop::sample::select(vec![2usize, 4, 8, 16])) {
            let g = Grid::new(GridSpec::new(m)).unwrap();
            let f = random_field(&g, &RandomFieldSpec::default(), &mut ChaCha8Rng::seed_from_u64(seed));
            let bytes = encode(&f);
            prop_assert_eq!(bytes.len(), 20 + 16 * (m + 1) * (m + 1));
            let back = decode(&bytes, &g).unwrap();
            prop_assert_eq!(back, f);
        }
    }

    #[test]
    fn header_layout() {
        let g = Grid::new(GridSpec::new(4)).unwrap();
        let f = SpectralField::cos_mode(&g, 1, 0, 1.0);
        let b = encode(&f);
        assert_eq!(&b[0..4], b"SQGF");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(b[12..20].try_into().unwrap()), 1.5);
        // first coefficient is k = (-2, -2)
        let idx = g.index(1, 0).unwrap();
        let off = 20 + 16 * idx;
        assert_eq!(
            f64::from_le_bytes(b[off..off + 8].try_into().unwrap()),
            std::f64::consts::PI
        );
    }

    #[test]
    fn rejects_corruption() {
        let g = Grid::new(GridSpec::new(4)).unwrap();
        let f = SpectralField::sin_mode(&g, 1, 1, 1.0);
        let mut b = encode(&f);
        b[0] = b'X';
        assert!(decode(&b, &g).is_err());
        let mut b = encode(&f);
        b.pop();
        assert!(decode(&b, &g).is_err());
        let g8 = Grid::new(GridSpec::new(8)).unwrap();
        assert!(decode(&encode(&f), &g8).is_err());
        let mut b = encode(&f);
        let idx = g.index(1, 1).unwrap();
        let off = 20 + 16 * idx;
        b[off..off + 8].copy_from_slice(&5.0f64.to_le_bytes());
        assert!(decode(&b, &g).is_err());
    }
}
