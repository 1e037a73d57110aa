//! Artifact writing: CSV tables, JSON documents, the manifest and the plot
//! script. Every file goes through [`Artifacts`] so the manifest inventory is
//! complete.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub root_seed: Option<u64>,
    /// Resolved experiment spec; enough to rerun.
    pub config: serde_json::Value,
    pub certificates: serde_json::Value,
    pub steps: u64,
    pub wall_clock_s: f64,
    pub threads: usize,
    pub outputs: Vec<OutputEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects the files of one run directory.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    entries: Vec<OutputEntry>,
}

impl Artifacts {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Artifacts {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }

    /// Writes `bytes` to `rel` and records its hash.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.entries.retain(|e| e.path != rel);
        self.entries.push(OutputEntry {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Deletes a subdirectory and forgets its entries.
    pub fn remove_dir(&mut self, rel: &str) -> CliResult<()> {
        let path = self.root.join(rel);
        if path.exists() {
            fs::remove_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        }
        let prefix = format!("{rel}/");
        self.entries.retain(|e| !e.path.starts_with(&prefix));
        Ok(())
    }

    pub fn write_csv<R: Serialize>(&mut self, rel: &str, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
        let bytes = csv_bytes(rows).map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        self.write(rel, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        let mut bytes =
            serde_json::to_vec_pretty(value).map_err(|e| CliError::Runtime(format!("{rel}: {e}")))?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Writes the manifest last; it is not part of its own inventory.
    pub fn finish(mut self, mut manifest: Manifest) -> CliResult<Manifest> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.outputs = self.entries;
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let path = self.root.join(MANIFEST_NAME);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

pub fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// Entries of `expected` whose file under `root` is missing or differs.
pub fn hash_mismatches(root: &Path, expected: &[OutputEntry]) -> Vec<String> {
    expected
        .iter()
        .filter_map(|e| match fs::read(root.join(&e.path)) {
            Ok(b) if sha256_hex(&b) == e.sha256 => None,
            Ok(_) => Some(format!("{}: content hash differs", e.path)),
            Err(err) => Some(format!("{}: {err}", e.path)),
        })
        .collect()
}

/// Renders the standard figures from whichever CSVs sit next to it.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Figures for one run directory: norm decay, synchronization distance with
rate fits, moment bound against its curve, ergodic running averages.

usage: python3 plot.py [run_dir]
"""
import csv
import glob
import math
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    cols = {}
    for r in rows:
        for k, v in r.items():
            try:
                cols.setdefault(k, []).append(float(v))
            except ValueError:
                cols.setdefault(k, []).append(v)
    return cols


def fit_rate(t, d):
    pts = [(a, math.log(b)) for a, b in zip(t, d) if b > 0 and a >= 1.0]
    if len(pts) < 3:
        return None
    n = len(pts)
    mt = sum(p[0] for p in pts) / n
    ml = sum(p[1] for p in pts) / n
    sxx = sum((p[0] - mt) ** 2 for p in pts)
    if sxx == 0:
        return None
    slope = sum((p[0] - mt) * (p[1] - ml) for p in pts) / sxx
    return -slope, math.exp(ml - slope * mt)


def norms(run, out):
    files = sorted(glob.glob(os.path.join(run, "diagnostics*.csv")))
    if not files:
        return
    fig, ax = plt.subplots()
    for i, f in enumerate(files):
        c = read(f)
        label = "|theta|" if i == 0 else None
        ax.semilogy(c["t"], c["l2"], color="C0", alpha=0.6, label=label)
        ax.semilogy(c["t"], c["lp"], color="C1", alpha=0.6, label="Lp" if i == 0 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend()
    fig.savefig(os.path.join(out, "norms.png"), dpi=120)


def sync(run, out):
    files = sorted(glob.glob(os.path.join(run, "sync_*.csv")))
    if not files:
        return
    fig, ax = plt.subplots()
    for i, f in enumerate(files):
        c = read(f)
        t, d = c["t"], c["d_hminushalf"]
        if max(d) <= 0:
            ax.plot(t, d, color=f"C{i % 10}", label=f"pair {i}: d = 0")
            continue
        ax.semilogy(t, d, color=f"C{i % 10}", label=f"pair {i}")
        fit = fit_rate(t, d)
        if fit:
            rate, a = fit
            ax.semilogy(t, [a * math.exp(-rate * s) for s in t], "--", color=f"C{i % 10}",
                        label=f"fit rate {rate:.3g}")
    ax.set_xlabel("t")
    ax.set_ylabel("|Lambda^(-1/2) rho|")
    ax.legend(fontsize="small")
    fig.savefig(os.path.join(out, "sync.png"), dpi=120)


def moment(run, out):
    path = os.path.join(run, "moment.csv")
    if not os.path.exists(path):
        return
    c = read(path)
    fig, ax = plt.subplots()
    lo = [m - 2 * s for m, s in zip(c["mean"], c["stderr"])]
    hi = [m + 2 * s for m, s in zip(c["mean"], c["stderr"])]
    ax.fill_between(c["t"], lo, hi, alpha=0.3)
    ax.plot(c["t"], c["mean"], label="ensemble mean")
    ax.plot(c["t"], c["bound"], "k--", label="bound x slack")
    ax.set_xlabel("t")
    ax.legend()
    fig.savefig(os.path.join(out, "moment.png"), dpi=120)


def ergodic(run, out):
    path = os.path.join(run, "running.csv")
    if not os.path.exists(path):
        return
    c = read(path)
    fig, ax = plt.subplots()
    keys = sorted(set(zip(c["run"], c["observable"])))
    for r, o in keys:
        idx = [i for i in range(len(c["t"])) if c["run"][i] == r and c["observable"][i] == o]
        ax.plot([c["t"][i] for i in idx], [c["average"][i] for i in idx], label=f"run {int(r)} {o}")
    ax.set_xlabel("t")
    ax.set_ylabel("running average")
    ax.legend(fontsize="small")
    fig.savefig(os.path.join(out, "ergodic.png"), dpi=120)


def main():
    run = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    out = os.path.join(run, "figures")
    os.makedirs(out, exist_ok=True)
    for f in (norms, sync, moment, ergodic):
        f(run, out)


if __name__ == "__main__":
    main()
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        x: f64,
    }

    #[test]
    fn csv_round_trips_floats_exactly() {
        let v = [0.1 + 0.2, 1e-300, -3.5e17];
        let b = csv_bytes(v.iter().map(|&x| Row { t: 1.0, x })).unwrap();
        let mut r = csv::Reader::from_reader(&b[..]);
        let back: Vec<f64> = r.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
        assert_eq!(back, v);
    }

    #[test]
    fn mismatches_detect_edits() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(dir.path()).unwrap();
        a.write("x/a.csv", b"t\n1\n").unwrap();
        let entries = a.entries().to_vec();
        assert!(hash_mismatches(dir.path(), &entries).is_empty());
        fs::write(dir.path().join("x/a.csv"), b"t\n2\n").unwrap();
        assert_eq!(hash_mismatches(dir.path(), &entries).len(), 1);
    }
}
