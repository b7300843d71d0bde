//! Snapshot, progress and report writers, plus run-directory naming.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! CSV snapshot reloads to the same bits and identical states give
//! identical files.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::analysis::DisplacementCurve;
use crate::error::{Error, Result};
use crate::integrator::{Simulation, StepInfo};
use crate::scalar::{to_f64, Real};
use crate::scenarios::{Observer, Outcome, SafetyReport, SweepReport};
use crate::state::ParticleSystem;

/// Per-particle columns of a snapshot, in file order after `x, y`.
pub const SNAPSHOT_FIELDS: [&str; 12] = [
    "p", "sqrt_j2", "sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "eps_p", "u_norm", "v_norm", "J", "kind", "epoch",
];

/// One particle as stored in a snapshot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotRow {
    pub x: f64,
    pub y: f64,
    pub values: [f64; 12],
}

/// Snapshot rows of `sys`; `J` is taken as `det F`.
pub fn snapshot_rows<T: Real>(sys: &ParticleSystem<T>, epoch: usize) -> Vec<SnapshotRow> {
    (0..sys.len())
        .map(|i| {
            let s = sys.stress[i];
            let inv = s.invariants();
            SnapshotRow {
                x: to_f64(sys.pos[i].x),
                y: to_f64(sys.pos[i].y),
                values: [
                    to_f64(inv.pressure),
                    to_f64(inv.j2.sqrt()),
                    to_f64(s.xx),
                    to_f64(s.yy),
                    to_f64(s.zz),
                    to_f64(s.xy),
                    to_f64(sys.eps_p[i]),
                    to_f64(sys.displacement(i).norm()),
                    to_f64(sys.vel[i].norm()),
                    to_f64(sys.def_grad[i].det()),
                    f64::from(sys.kind[i].code()),
                    epoch as f64,
                ],
            }
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// CSV text of a snapshot.
pub fn snapshot_csv(rows: &[SnapshotRow]) -> String {
    let mut out = String::from("x,y");
    for f in SNAPSHOT_FIELDS {
        out.push(',');
        out.push_str(f);
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.x, r.y);
        for v in r.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Legacy-VTK polydata text of a snapshot.
pub fn snapshot_vtk(rows: &[SnapshotRow], time: f64) -> String {
    let n = rows.len();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "geosph particles t={time}");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET POLYDATA");
    let _ = writeln!(out, "POINTS {n} double");
    for r in rows {
        let _ = writeln!(out, "{} {} 0", r.x, r.y);
    }
    let _ = writeln!(out, "VERTICES {n} {}", 2 * n);
    for i in 0..n {
        let _ = writeln!(out, "1 {i}");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    for (k, f) in SNAPSHOT_FIELDS.iter().enumerate() {
        let _ = writeln!(out, "SCALARS {f} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        for r in rows {
            let _ = writeln!(out, "{}", r.values[k]);
        }
    }
    out
}

/// Writes `<stem>.vtk` and `<stem>.csv` into `dir`.
pub fn write_snapshot<T: Real>(
    sys: &ParticleSystem<T>,
    epoch: usize,
    time: T,
    dir: &Path,
    stem: &str,
) -> Result<(PathBuf, PathBuf)> {
    let rows = snapshot_rows(sys, epoch);
    let vtk = dir.join(format!("{stem}.vtk"));
    let csv = dir.join(format!("{stem}.csv"));
    write_all(&vtk, &snapshot_vtk(&rows, to_f64(time)))?;
    write_all(&csv, &snapshot_csv(&rows))?;
    Ok((vtk, csv))
}

/// Parses snapshot CSV text.
pub fn parse_snapshot_csv(text: &str, path: &Path) -> Result<Vec<SnapshotRow>> {
    let bad = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let expect = std::iter::once("x")
        .chain(std::iter::once("y"))
        .chain(SNAPSHOT_FIELDS)
        .collect::<Vec<_>>()
        .join(",");
    if header != expect {
        return Err(bad(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let nums = nums.map_err(|_| bad(k + 2, "non-numeric field"))?;
        if nums.len() != 2 + SNAPSHOT_FIELDS.len() {
            return Err(bad(k + 2, "wrong column count"));
        }
        let mut values = [0.0; 12];
        values.copy_from_slice(&nums[2..]);
        rows.push(SnapshotRow {
            x: nums[0],
            y: nums[1],
            values,
        });
    }
    Ok(rows)
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<SnapshotRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot_csv(&text, path)
}

/// `base/run-<hash>-<unix seconds>`, created; a numeric suffix avoids
/// collisions within the same second.
pub fn create_run_dir(base: &Path, hash: &str) -> Result<PathBuf> {
    fs::create_dir_all(base).map_err(|e| Error::io(base, e))?;
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let stem = format!("run-{hash}-{secs}");
    let mut dir = base.join(&stem);
    let mut k = 1;
    while dir.exists() {
        dir = base.join(format!("{stem}-{k}"));
        k += 1;
    }
    fs::create_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Line-buffered CSV file with a fixed header.
pub struct CsvLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvLog {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut out = create(path)?;
        writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn row(&mut self, line: &str) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub const PROGRESS_HEADER: &str = "step,t,d_max,max_displacement,kinetic_energy";
pub const DIAGNOSTICS_HEADER: &str = "step,t,epoch,updates,d_max,tension_cutoffs,correction_fallbacks,event";

/// Writes progress and diagnostics CSVs and periodic snapshots into one
/// run directory.
pub struct RunWriter {
    dir: PathBuf,
    progress: CsvLog,
    diagnostics: CsvLog,
    progress_every: usize,
    snapshot_interval: f64,
    next_snapshot: f64,
    snapshots: usize,
}

impl RunWriter {
    pub fn new(dir: &Path, progress_every: usize, snapshot_interval: f64) -> Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            progress: CsvLog::create(&dir.join("progress.csv"), PROGRESS_HEADER)?,
            diagnostics: CsvLog::create(&dir.join("diagnostics.csv"), DIAGNOSTICS_HEADER)?,
            progress_every: progress_every.max(1),
            snapshot_interval,
            next_snapshot: 0.0,
            snapshots: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn snapshot<T: Real>(&mut self, sim: &Simulation<T>) -> Result<()> {
        let stem = format!("snapshot_{:04}", self.snapshots);
        write_snapshot(&sim.system, sim.diagnostics.epoch, sim.time, &self.dir, &stem)?;
        self.snapshots += 1;
        Ok(())
    }

    fn diagnostics_row<T: Real>(&mut self, sim: &Simulation<T>, d_max: T, event: &str) -> Result<()> {
        let d = &sim.diagnostics;
        let line = format!(
            "{},{},{},{},{},{},{},{}",
            sim.steps,
            to_f64(sim.time),
            d.epoch,
            d.updates,
            to_f64(d_max),
            d.step_tension_cutoffs,
            d.correction_fallbacks,
            event
        );
        self.diagnostics.row(&line)
    }
}

impl<T: Real> Observer<T> for RunWriter {
    fn step(&mut self, sim: &Simulation<T>, info: &StepInfo<T>) -> Result<()> {
        if self.snapshots == 0 || (self.snapshot_interval > 0.0 && to_f64(sim.time) + 1e-12 >= self.next_snapshot) {
            self.snapshot(sim)?;
            self.next_snapshot += self.snapshot_interval;
        }
        if sim.steps % self.progress_every == 0 {
            let line = format!(
                "{},{},{},{},{}",
                sim.steps,
                to_f64(sim.time),
                to_f64(info.d_max),
                to_f64(sim.system.max_displacement()),
                to_f64(sim.system.kinetic_energy())
            );
            self.progress.row(&line)?;
            self.diagnostics_row(sim, info.d_max, "")?;
        } else if info.updated {
            self.diagnostics_row(sim, info.d_max, "configuration-update")?;
        }
        Ok(())
    }

    fn finish(&mut self, sim: &Simulation<T>, outcome: &Outcome<T>) -> Result<()> {
        let event = match outcome {
            Outcome::Completed => "completed".to_string(),
            Outcome::NegativeJacobian { .. } => "negative-jacobian".to_string(),
            Outcome::Aborted { .. } => "aborted".to_string(),
        };
        self.diagnostics_row(sim, sim.diagnostics.d_max, &event)?;
        let stem = "final";
        write_snapshot(&sim.system, sim.diagnostics.epoch, sim.time, &self.dir, stem)?;
        self.progress.flush()?;
        self.diagnostics.flush()
    }
}

/// Sweep summary as CSV text.
pub fn sweep_report_csv<T: Real>(report: &SweepReport<T>) -> String {
    let mut out = String::from(
        "parameter,value,outcome,time,steps,updates,max_displacement,runout_width,shear_bands,clumping_min,tension_cutoffs\n",
    );
    for p in &report.points {
        let s = &p.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            report.parameter.name(),
            p.value.label(),
            s.outcome.label(),
            to_f64(s.time),
            s.steps,
            s.updates,
            to_f64(s.max_displacement),
            to_f64(s.runout_width),
            s.shear_bands,
            s.clumping_min.map(|c| to_f64(c).to_string()).unwrap_or_default(),
            s.tension_cutoffs
        );
    }
    out
}

/// Strength-reduction results as CSV text: one row per factor.
pub fn safety_report_csv<T: Real>(report: &SafetyReport<T>) -> String {
    let mut out = String::from("fs,class,final_max_displacement,outcome\n");
    for t in &report.trials {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            to_f64(t.factor),
            t.class.name(),
            to_f64(t.curve.final_displacement().unwrap_or_else(T::zero)),
            t.outcome.label()
        );
    }
    out
}

/// All displacement curves of a sweep, long format.
pub fn curves_csv<T: Real>(curves: &[(T, &DisplacementCurve<T>)]) -> String {
    let mut out = String::from("fs,t,max_displacement\n");
    for (f, c) in curves {
        for &(t, d) in c.samples() {
            let _ = writeln!(out, "{},{},{}", to_f64(*f), to_f64(t), to_f64(d));
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_all(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_block, Walls};
    use crate::tensor::SymTensor2;

    #[test]
    fn empty_and_four_particles() {
        let empty = ParticleSystem::<f64>::new(0.1);
        let rows = snapshot_rows(&empty, 0);
        assert_eq!(snapshot_csv(&rows).lines().count(), 1);
        assert!(snapshot_vtk(&rows, 0.0).contains("POINTS 0 double"));
        let s = build_block(1.0, 1.0, 0.5, 1850.0, &Walls::none()).unwrap();
        let rows = snapshot_rows(&s, 0);
        assert_eq!(snapshot_csv(&rows).lines().count(), 5);
        assert!(snapshot_vtk(&rows, 0.0).contains("POINTS 4 double"));
    }

    #[test]
    fn csv_reload_is_exact() {
        let mut s = build_block(0.3, 0.3, 0.1, 1850.0, &Walls::none()).unwrap();
        s.pos[0].x = 0.1 + 0.2;
        s.pos[1].y = 1.0 / 3.0;
        s.stress[2] = SymTensor2::new(-1.0e5 / 7.0, 2.5, 0.0, std::f64::consts::PI);
        let rows = snapshot_rows(&s, 3);
        let text = snapshot_csv(&rows);
        let back = parse_snapshot_csv(&text, Path::new("mem")).unwrap();
        assert_eq!(back, rows);
        assert_eq!(snapshot_csv(&back), text);
    }

    #[test]
    fn rejects_malformed_rows() {
        let mut text = snapshot_csv(&[]);
        text.push_str("1,2,3\n");
        assert!(parse_snapshot_csv(&text, Path::new("mem")).is_err());
    }
}
