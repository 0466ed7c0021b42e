//! CSV and JSON files plus the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use quorum_core::freq::BodePoint;
use quorum_core::model::{CellMatrix, SimConfig, SpeciesId, Trajectory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::config_hash;
use crate::error::{CliError, CliResult};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TRAJECTORY_HEADER: [&str; 6] = ["time", "rho_B", "rho_F", "a", "m_mean_B", "m_mean_F"];
pub const BODE_HEADER: [&str; 6] = ["freq_hz", "species", "gain", "gain_db", "phase_rad", "reliable"];

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn write_rows<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_trajectory_csv(path: &Path, tr: &Trajectory) -> CliResult<()> {
    let header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    let (b, f) = (SpeciesId::Bacteroidetes, SpeciesId::Firmicutes);
    let rows = (0..tr.len()).map(|i| {
        [tr.times[i], tr.rho(b)[i], tr.rho(f)[i], tr.a[i], tr.m_mean(b)[i], tr.m_mean(f)[i]]
            .map(fmt_f64)
            .to_vec()
    });
    write_rows(path, &header, rows)
}

/// One row per recorded time: `time, cell_0, cell_1, ...`.
pub fn write_cells_csv(path: &Path, times: &[f64], cells: &CellMatrix) -> CliResult<()> {
    let mut header = vec!["time".to_string()];
    header.extend((0..cells.n_cells()).map(|c| format!("cell_{c}")));
    let rows = times.iter().enumerate().map(|(t, &time)| {
        let mut row = Vec::with_capacity(cells.n_cells() + 1);
        row.push(fmt_f64(time));
        row.extend(cells.row(t).iter().map(|&v| fmt_f64(v)));
        row
    });
    write_rows(path, &header, rows)
}

pub fn write_bode_csv(path: &Path, points: &[BodePoint]) -> CliResult<()> {
    let header: Vec<String> = BODE_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = points.iter().map(|p| {
        vec![
            fmt_f64(p.freq),
            p.species.tag().to_string(),
            fmt_f64(p.gain),
            fmt_f64(p.gain_db),
            fmt_f64(p.phase),
            p.reliable.to_string(),
        ]
    });
    write_rows(path, &header, rows)
}

fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let row = rec
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    CliError::Io(format!("{}: row {}: `{v}` is not a number", path.display(), i + 2))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Columns of a trajectory CSV, indexed as in [`TRAJECTORY_HEADER`].
pub fn read_trajectory_columns(path: &Path) -> CliResult<[Vec<f64>; 6]> {
    let (header, rows) = read_table(path)?;
    if header != TRAJECTORY_HEADER {
        return Err(CliError::Io(format!(
            "{}: expected header {}, found {}",
            path.display(),
            TRAJECTORY_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut cols: [Vec<f64>; 6] = Default::default();
    for row in rows {
        for (c, v) in row.into_iter().enumerate() {
            cols[c].push(v);
        }
    }
    Ok(cols)
}

pub fn read_cells_csv(path: &Path) -> CliResult<CellMatrix> {
    let (header, rows) = read_table(path)?;
    let n_cells = header.len().saturating_sub(1);
    let data: Vec<f64> = rows.into_iter().flat_map(|r| r.into_iter().skip(1)).collect();
    CellMatrix::from_rows(n_cells, data).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Who produced what, and from which inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: usize,
}

impl Provenance {
    pub fn new(cfg: &SimConfig, replicates: usize) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            replicates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// `manifest.json`: enough to re-run the command and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub provenance: Provenance,
    /// Replicate trajectory files in replicate order.
    pub trajectories: Vec<ReplicateFiles>,
    pub files: Vec<FileEntry>,
    pub config: SimConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFiles {
    pub seed: u64,
    pub trajectory: String,
    /// `[Bacteroidetes, Firmicutes]` per-cell matrices, when written.
    pub cells: Option<[String; 2]>,
}

pub const MANIFEST: &str = "manifest.json";

impl Manifest {
    pub fn new(command: &str, cfg: &SimConfig, replicates: usize) -> Self {
        Manifest {
            command: command.to_string(),
            provenance: Provenance::new(cfg, replicates),
            trajectories: Vec::new(),
            files: Vec::new(),
            config: cfg.clone(),
        }
    }

    /// Hashes `names` inside `dir` and writes the manifest there.
    pub fn finish(mut self, dir: &Path, names: &[String]) -> CliResult<PathBuf> {
        for name in names {
            self.files.push(FileEntry {
                path: name.clone(),
                sha256: sha256_file(&dir.join(name))?,
            });
        }
        let path = dir.join(MANIFEST);
        write_json(&path, &self)?;
        Ok(path)
    }
}

/// File names for replicate `r`.
pub fn replicate_names(r: usize) -> (String, [String; 2]) {
    let suffix = if r == 0 { String::new() } else { format!("_r{r}") };
    (
        format!("trajectory{suffix}.csv"),
        SpeciesId::ALL.map(|id| format!("cells_{}{suffix}.csv", id.tag())),
    )
}

/// Rebuilds a trajectory from files written by `simulate`. Without per-cell files the
/// matrices are empty and only the cell means are available.
pub fn load_trajectory(dir: &Path, files: &ReplicateFiles) -> CliResult<Trajectory> {
    let [times, rho_b, rho_f, a, mb, mf] = read_trajectory_columns(&dir.join(&files.trajectory))?;
    let n = times.len();
    let cells = match &files.cells {
        Some(names) => {
            let [cb, cf] = [0, 1].map(|s| read_cells_csv(&dir.join(&names[s])));
            let (cb, cf) = (cb?, cf?);
            for (name, c) in names.iter().zip([&cb, &cf]) {
                if c.n_times() != n {
                    return Err(CliError::Io(format!(
                        "{name}: {} rows, expected {n} to match {}",
                        c.n_times(),
                        files.trajectory
                    )));
                }
            }
            [cb, cf]
        }
        None => [CellMatrix::with_capacity(0, 0), CellMatrix::with_capacity(0, 0)],
    };
    Ok(Trajectory {
        times,
        rho: [rho_b, rho_f],
        a,
        m: cells,
        m_mean: [mb, mf],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, 0.0, 1800.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1800.0), "1800.0");
    }

    #[test]
    fn replicate_file_names() {
        assert_eq!(replicate_names(0).0, "trajectory.csv");
        assert_eq!(replicate_names(2).1[1], "cells_F_r2.csv");
    }
}
