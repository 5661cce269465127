//! File schemas: measurement CSVs at two rates, a campaign manifest tying
//! them together, result tables, and trajectory exports. All writes are
//! atomic (temp file + rename) and all numbers are full-precision decimal.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::{ForceSignal, Trajectory};
use crate::error::{Error, Result};
use crate::sigproc::TimeSeries;
use crate::synth::{MeasurementCase, TestType};

pub const FAST_HEADER: [&str; 4] = ["time_s", "force_N", "accel_lo_ms2", "accel_so_ms2"];
pub const TENSION_HEADER: [&str; 2] = ["time_s", "tension_N"];
pub const MANIFEST_HEADER: [&str; 7] = [
    "case_id",
    "test_type",
    "preload_N",
    "amplitude_N",
    "seed",
    "fast_file",
    "tension_file",
];
pub const MODAL_HEADER: [&str; 6] = [
    "preload_N",
    "f1_Hz",
    "zeta1",
    "k_c_Npm",
    "c_c_Nspm",
    "warnings",
];
pub const GAMMA_HEADER: [&str; 6] = [
    "case_id",
    "preload_N",
    "gamma",
    "objective_N",
    "evals",
    "status",
];
pub const TRAJECTORY_HEADER: [&str; 6] = ["t", "x_lo", "v_lo", "x_so", "v_so", "tension"];

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_csv<W: FnMut(&mut csv::Writer<Vec<u8>>) -> Result<()>>(
    path: &Path,
    header: &[&str],
    mut body: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    body(&mut w)?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv flush failed: {e}")))?;
    atomic_write(path, &bytes)
}

fn parse_field(record: &csv::StringRecord, idx: usize, path: &Path) -> Result<f64> {
    let pos = record.position().map(|p| p.line()).unwrap_or(0);
    let raw = record.get(idx).ok_or_else(|| {
        Error::Validation(format!(
            "{}:{pos}: missing column {idx}",
            path.display()
        ))
    })?;
    raw.trim().parse::<f64>().map_err(|_| {
        Error::Validation(format!(
            "{}:{pos}: cannot parse '{raw}' as a number",
            path.display()
        ))
    })
}

/// Read a two-column (time, value) CSV with a header row.
pub fn read_two_column_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        times.push(parse_field(&record, 0, path)?);
        values.push(parse_field(&record, 1, path)?);
    }
    if times.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: needs at least 2 data rows",
            path.display()
        )));
    }
    Ok((times, values))
}

pub fn write_fast_csv(path: &Path, case: &MeasurementCase) -> Result<()> {
    write_csv(path, &FAST_HEADER, |w| {
        for i in 0..case.accel_lo.len() {
            let t = case.accel_lo.time(i);
            w.write_record(&[
                format!("{t}"),
                format!("{}", case.force.value_at(t)),
                format!("{}", case.accel_lo.values[i]),
                format!("{}", case.accel_so.values[i]),
            ])?;
        }
        Ok(())
    })
}

pub fn write_tension_csv(path: &Path, tension: &TimeSeries) -> Result<()> {
    write_csv(path, &TENSION_HEADER, |w| {
        for i in 0..tension.len() {
            w.write_record(&[format!("{}", tension.time(i)), format!("{}", tension.values[i])])?;
        }
        Ok(())
    })
}

/// One manifest row describing a stored case.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub case_id: String,
    pub test_type: TestType,
    pub preload_n: f64,
    pub amplitude_n: f64,
    pub seed: u64,
    pub fast_file: String,
    pub tension_file: String,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    write_csv(path, &MANIFEST_HEADER, |w| {
        for e in entries {
            w.write_record(&[
                e.case_id.clone(),
                e.test_type.as_str().to_string(),
                format!("{}", e.preload_n),
                format!("{}", e.amplitude_n),
                format!("{}", e.seed),
                e.fast_file.clone(),
                e.tension_file.clone(),
            ])?;
        }
        Ok(())
    })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let pos = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| {
                Error::Validation(format!("{}:{pos}: missing column {idx}", path.display()))
            })
        };
        entries.push(ManifestEntry {
            case_id: get(0)?.to_string(),
            test_type: get(1)?.parse()?,
            preload_n: parse_field(&record, 2, path)?,
            amplitude_n: parse_field(&record, 3, path)?,
            seed: parse_field(&record, 4, path)? as u64,
            fast_file: get(5)?.to_string(),
            tension_file: get(6)?.to_string(),
        });
    }
    Ok(entries)
}

/// Store a case as (fast CSV, tension CSV) next to the manifest.
pub fn write_case(dir: &Path, case: &MeasurementCase) -> Result<ManifestEntry> {
    let fast_file = format!("{}_fast.csv", case.case_id);
    let tension_file = format!("{}_tension.csv", case.case_id);
    write_fast_csv(&dir.join(&fast_file), case)?;
    write_tension_csv(&dir.join(&tension_file), &case.tension)?;
    let amplitude = case
        .force
        .values()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    Ok(ManifestEntry {
        case_id: case.case_id.clone(),
        test_type: case.test_type,
        preload_n: case.preload_n,
        amplitude_n: amplitude,
        seed: 0,
        fast_file,
        tension_file,
    })
}

/// Load a case from its manifest entry. The force signal keeps only the
/// non-zero span (plus one sample each side) so the simulator's step cap
/// applies to the impulse, not the whole record.
pub fn read_case(dir: &Path, entry: &ManifestEntry) -> Result<MeasurementCase> {
    let fast_path = dir.join(&entry.fast_file);
    let mut reader = csv::Reader::from_path(&fast_path)?;
    let mut times = Vec::new();
    let mut force = Vec::new();
    let mut accel_lo = Vec::new();
    let mut accel_so = Vec::new();
    for record in reader.records() {
        let record = record?;
        times.push(parse_field(&record, 0, &fast_path)?);
        force.push(parse_field(&record, 1, &fast_path)?);
        accel_lo.push(parse_field(&record, 2, &fast_path)?);
        accel_so.push(parse_field(&record, 3, &fast_path)?);
    }
    if times.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: needs at least 2 data rows",
            fast_path.display()
        )));
    }
    let dt = times[1] - times[0];
    let accel_lo = TimeSeries::new(times[0], dt, accel_lo)?;
    let accel_so = TimeSeries::new(times[0], dt, accel_so)?;

    let first_nz = force.iter().position(|&v| v != 0.0);
    let force_signal = match first_nz {
        Some(first) => {
            let last = force.iter().rposition(|&v| v != 0.0).unwrap();
            let lo = first.saturating_sub(1);
            let hi = (last + 1).min(force.len() - 1);
            ForceSignal::new(times[lo..=hi].to_vec(), force[lo..=hi].to_vec())?
        }
        None => ForceSignal::zero(),
    };

    let (t_times, t_values) = read_two_column_csv(&dir.join(&entry.tension_file))?;
    let t_dt = t_times[1] - t_times[0];
    let tension = TimeSeries::new(t_times[0], t_dt, t_values)?;

    Ok(MeasurementCase {
        case_id: entry.case_id.clone(),
        test_type: entry.test_type,
        force: force_signal,
        accel_lo: accel_lo.clone(),
        accel_so,
        tension: tension.clone(),
        preload_n: entry.preload_n,
        accel_rate_hz: 1.0 / dt,
        tension_rate_hz: 1.0 / t_dt,
    })
}

/// One row of the modal-identification table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalRow {
    pub preload_n: f64,
    pub f1_hz: f64,
    pub zeta1: f64,
    pub k_c_npm: f64,
    pub c_c_nspm: f64,
    pub warnings: String,
}

pub fn write_modal_csv(path: &Path, rows: &[ModalRow]) -> Result<()> {
    write_csv(path, &MODAL_HEADER, |w| {
        for r in rows {
            w.write_record(&[
                format!("{}", r.preload_n),
                format!("{}", r.f1_hz),
                format!("{}", r.zeta1),
                format!("{}", r.k_c_npm),
                format!("{}", r.c_c_nspm),
                r.warnings.clone(),
            ])?;
        }
        Ok(())
    })
}

pub fn read_modal_csv(path: &Path) -> Result<Vec<ModalRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(ModalRow {
            preload_n: parse_field(&record, 0, path)?,
            f1_hz: parse_field(&record, 1, path)?,
            zeta1: parse_field(&record, 2, path)?,
            k_c_npm: parse_field(&record, 3, path)?,
            c_c_nspm: parse_field(&record, 4, path)?,
            warnings: record.get(5).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

/// One row of the loosening-rate table.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRow {
    pub case_id: String,
    pub preload_n: f64,
    pub gamma: f64,
    pub objective_n: f64,
    pub evals: u64,
    pub status: String,
}

pub fn write_gamma_csv(path: &Path, rows: &[GammaRow]) -> Result<()> {
    write_csv(path, &GAMMA_HEADER, |w| {
        for r in rows {
            w.write_record(&[
                r.case_id.clone(),
                format!("{}", r.preload_n),
                format!("{}", r.gamma),
                format!("{}", r.objective_n),
                format!("{}", r.evals),
                r.status.clone(),
            ])?;
        }
        Ok(())
    })
}

pub fn read_gamma_csv(path: &Path) -> Result<Vec<GammaRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let pos = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push(GammaRow {
            case_id: record
                .get(0)
                .ok_or_else(|| {
                    Error::Validation(format!("{}:{pos}: missing case_id", path.display()))
                })?
                .to_string(),
            preload_n: parse_field(&record, 1, path)?,
            gamma: parse_field(&record, 2, path)?,
            objective_n: parse_field(&record, 3, path)?,
            evals: parse_field(&record, 4, path)? as u64,
            status: record.get(5).unwrap_or("").to_string(),
        });
    }
    Ok(rows)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    write_csv(path, &TRAJECTORY_HEADER, |w| {
        for (t, s) in traj.times.iter().zip(&traj.states) {
            w.write_record(&[
                format!("{t}"),
                format!("{}", s.x_lo),
                format!("{}", s.v_lo),
                format!("{}", s.x_so),
                format!("{}", s.v_so),
                format!("{}", s.tension),
            ])?;
        }
        Ok(())
    })
}

/// Directory layout of a synthetic campaign.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.csv")
}
