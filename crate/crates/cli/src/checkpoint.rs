//! Resumable single-trajectory checkpoints.
//!
//! A checkpoint directory holds `state.json` plus field snapshots in the
//! binary snapshot format: `v.bin`, `z.bin` (decomposed scheme only) and
//! `history_NNNN.bin` (delayed velocity only). Scalars are stored as the hex
//! of their IEEE bits so a resumed run continues bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sqg_core::dynamics::HistoryBuffer;
use sqg_core::integrate::{SimConfig, TrajectoryState};
use sqg_core::spectral::snapshot;
use sqg_core::Grid;

use crate::error::{CliError, CliResult};
use crate::output::Artifacts;

pub const DIR: &str = "checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointState {
    pub step: u64,
    pub t_bits: String,
    pub diss_bits: String,
    pub traj: u64,
    pub seed: u64,
    pub config: SimConfig,
    pub has_z: bool,
    pub history_delta_bits: Option<String>,
    pub history_t_bits: Vec<String>,
}

fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn unbits(s: &str) -> CliResult<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| CliError::Config(format!("checkpoint: bad float bits `{s}`: {e}")))
}

/// Writes the checkpoint under `checkpoint/` of the run directory.
pub fn save(art: &mut Artifacts, state: &TrajectoryState, config: &SimConfig, traj: u64) -> CliResult<()> {
    let mut history_t_bits = Vec::new();
    let mut history_delta_bits = None;
    if let Some(h) = &state.history {
        history_delta_bits = Some(bits(h.delta()));
        for (i, (t, f)) in h.snapshots().enumerate() {
            history_t_bits.push(bits(*t));
            art.write(&format!("{DIR}/history_{i:04}.bin"), &snapshot::encode(f))?;
        }
    }
    art.write(&format!("{DIR}/v.bin"), &snapshot::encode(&state.v))?;
    if let Some(z) = &state.z {
        art.write(&format!("{DIR}/z.bin"), &snapshot::encode(z))?;
    }
    let st = CheckpointState {
        step: state.step,
        t_bits: bits(state.t),
        diss_bits: bits(state.dissipation_integral),
        traj,
        seed: config.seed,
        config: config.clone(),
        has_z: state.z.is_some(),
        history_delta_bits,
        history_t_bits,
    };
    art.write_json(&format!("{DIR}/state.json"), &st)
}

fn read_field(dir: &Path, name: &str, grid: &Grid) -> CliResult<sqg_core::SpectralField> {
    let path = dir.join(name);
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    snapshot::decode(&bytes, grid).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Loads a checkpoint for `config`. Only `t_end` may differ from the run that
/// wrote it.
pub fn load(dir: &Path, config: &SimConfig, grid: &Grid) -> CliResult<(TrajectoryState, u64)> {
    let path = dir.join("state.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let st: CheckpointState =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut saved = st.config.clone();
    saved.t_end = config.t_end;
    if &saved != config {
        return Err(CliError::Config(format!(
            "resume_from: checkpoint {} was written with different settings (only t_end may change)",
            dir.display()
        )));
    }
    if st.step > config.n_steps() {
        return Err(CliError::Config(format!(
            "resume_from: checkpoint is at step {} but t_end gives {} steps",
            st.step,
            config.n_steps()
        )));
    }
    let v = read_field(dir, "v.bin", grid)?;
    let z = if st.has_z {
        Some(read_field(dir, "z.bin", grid)?)
    } else {
        None
    };
    let history = match &st.history_delta_bits {
        Some(d) => {
            let mut h = HistoryBuffer::new(unbits(d)?)?;
            for (i, tb) in st.history_t_bits.iter().enumerate() {
                h.push(
                    unbits(tb)?,
                    read_field(dir, &format!("history_{i:04}.bin"), grid)?,
                );
            }
            Some(h)
        }
        None => None,
    };
    let state = TrajectoryState {
        t: unbits(&st.t_bits)?,
        step: st.step,
        v,
        z,
        history,
        dissipation_integral: unbits(&st.diss_bits)?,
    };
    Ok((state, st.traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_round_trip() {
        for x in [0.1, -0.0, 1e-310, f64::MAX] {
            assert_eq!(unbits(&bits(x)).unwrap().to_bits(), x.to_bits());
        }
    }
}
