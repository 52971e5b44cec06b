//! File formats: IMU / ground-truth / trajectory CSV, line-delimited event
//! logs, stack and toy-report CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::LieEvent;
use crate::lie::{Manifold, Pose, Rotation3, Twist};
use crate::preint::RawImuSample;
use crate::stack::EventStack;
use crate::synth::ToyRow;
use crate::traj::{Trajectory, TrajectorySample};

/// Allowed deviation of a stored quaternion from unit norm.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;
/// Allowed deviation of a stored polarity from unit norm.
pub const POLARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{source_name}: {err}")]
    Io {
        source_name: String,
        #[source]
        err: std::io::Error,
    },
    #[error("{source_name}, line {line}: {message}")]
    Parse { source_name: String, line: u64, message: String },
    #[error("{0}: no data rows")]
    Empty(String),
}

fn parse_err(source_name: &str, line: u64, message: impl Into<String>) -> IoError {
    IoError::Parse {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|err| IoError::Io {
        source_name: path.display().to_string(),
        err,
    })
}

fn create(path: &Path) -> Result<File, IoError> {
    File::create(path).map_err(|err| IoError::Io {
        source_name: path.display().to_string(),
        err,
    })
}

fn io_err(source_name: &str) -> impl Fn(std::io::Error) -> IoError + '_ {
    move |err| IoError::Io {
        source_name: source_name.to_string(),
        err,
    }
}

#[derive(Debug, Deserialize)]
struct ImuRow {
    t: f64,
    wx: f64,
    wy: f64,
    wz: f64,
    ax: f64,
    ay: f64,
    az: f64,
}

#[derive(Debug, Deserialize)]
struct GtRow {
    t: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    px: f64,
    py: f64,
    pz: f64,
    #[serde(default)]
    vx: f64,
    #[serde(default)]
    vy: f64,
    #[serde(default)]
    vz: f64,
    #[serde(default)]
    bgx: f64,
    #[serde(default)]
    bgy: f64,
    #[serde(default)]
    bgz: f64,
    #[serde(default)]
    bax: f64,
    #[serde(default)]
    bay: f64,
    #[serde(default)]
    baz: f64,
}

fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(
    reader: R,
    source_name: &str,
) -> Result<Vec<(u64, T)>, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<T>() {
        match rec {
            Ok(row) => {
                let line = out.len() as u64 + 2;
                out.push((line, row));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(out.len() as u64 + 2);
                return Err(parse_err(source_name, line, e.to_string()));
            }
        }
    }
    Ok(out)
}

fn check_monotone(source_name: &str, times: &[(u64, f64)]) -> Result<(), IoError> {
    for w in times.windows(2) {
        if !(w[1].1 > w[0].1) {
            return Err(parse_err(
                source_name,
                w[1].0,
                format!("timestamp {} not after {}", w[1].1, w[0].1),
            ));
        }
    }
    for (line, t) in times {
        if !t.is_finite() {
            return Err(parse_err(source_name, *line, "non-finite timestamp"));
        }
    }
    Ok(())
}

/// IMU CSV with header `t,wx,wy,wz,ax,ay,az`.
pub fn parse_imu_csv<R: Read>(reader: R, source_name: &str) -> Result<Vec<RawImuSample>, IoError> {
    let rows: Vec<(u64, ImuRow)> = read_rows(reader, source_name)?;
    if rows.is_empty() {
        return Err(IoError::Empty(source_name.to_string()));
    }
    check_monotone(source_name, &rows.iter().map(|(l, r)| (*l, r.t)).collect::<Vec<_>>())?;
    rows.into_iter()
        .map(|(line, r)| {
            let s = RawImuSample::new(r.t, Vector3::new(r.wx, r.wy, r.wz), Vector3::new(r.ax, r.ay, r.az));
            if s.omega.iter().chain(s.accel.iter()).all(|x| x.is_finite()) {
                Ok(s)
            } else {
                Err(parse_err(source_name, line, "non-finite IMU value"))
            }
        })
        .collect()
}

pub fn read_imu_csv(path: &Path) -> Result<Vec<RawImuSample>, IoError> {
    parse_imu_csv(open(path)?, &path.display().to_string())
}

/// Ground-truth or trajectory CSV: `t,qw,qx,qy,qz,px,py,pz` with optional
/// `vx,vy,vz` and bias columns.
pub fn parse_trajectory_csv<R: Read>(reader: R, source_name: &str) -> Result<Trajectory, IoError> {
    let rows: Vec<(u64, GtRow)> = read_rows(reader, source_name)?;
    if rows.is_empty() {
        return Err(IoError::Empty(source_name.to_string()));
    }
    check_monotone(source_name, &rows.iter().map(|(l, r)| (*l, r.t)).collect::<Vec<_>>())?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        let qn = (r.qw * r.qw + r.qx * r.qx + r.qy * r.qy + r.qz * r.qz).sqrt();
        if !((qn - 1.0).abs() <= QUATERNION_TOLERANCE) {
            return Err(parse_err(source_name, line, format!("quaternion norm {qn} is not 1")));
        }
        out.push(TrajectorySample {
            t: r.t,
            rotation: Rotation3::from_quaternion(r.qw, r.qx, r.qy, r.qz),
            position: Vector3::new(r.px, r.py, r.pz),
            velocity: Vector3::new(r.vx, r.vy, r.vz),
            bias_gyro: Vector3::new(r.bgx, r.bgy, r.bgz),
            bias_accel: Vector3::new(r.bax, r.bay, r.baz),
        });
    }
    Ok(Trajectory::new(out))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory, IoError> {
    parse_trajectory_csv(open(path)?, &path.display().to_string())
}

#[derive(Debug, Deserialize)]
struct VelocityRow {
    t: f64,
    vx: f64,
    vy: f64,
    vz: f64,
}

/// Velocity CSV `t,vx,vy,vz`, returned as a trajectory with identity poses.
pub fn parse_velocity_csv<R: Read>(reader: R, source_name: &str) -> Result<Trajectory, IoError> {
    let rows: Vec<(u64, VelocityRow)> = read_rows(reader, source_name)?;
    if rows.is_empty() {
        return Err(IoError::Empty(source_name.to_string()));
    }
    check_monotone(source_name, &rows.iter().map(|(l, r)| (*l, r.t)).collect::<Vec<_>>())?;
    Ok(Trajectory::new(
        rows.into_iter()
            .map(|(_, r)| TrajectorySample::new(r.t, Rotation3::identity(), Vector3::zeros(), Vector3::new(r.vx, r.vy, r.vz)))
            .collect(),
    ))
}

pub fn read_velocity_csv(path: &Path) -> Result<Trajectory, IoError> {
    parse_velocity_csv(open(path)?, &path.display().to_string())
}

pub const TRAJECTORY_HEADER: &str = "t,qw,qx,qy,qz,px,py,pz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz";
pub const IMU_HEADER: &str = "t,wx,wy,wz,ax,ay,az";

/// Full-precision trajectory CSV (shortest round-trip float formatting).
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &traj.samples {
        let q = s.rotation.to_quaternion();
        write!(w, "{}", s.t)?;
        for x in q
            .iter()
            .chain(s.position.iter())
            .chain(s.velocity.iter())
            .chain(s.bias_gyro.iter())
            .chain(s.bias_accel.iter())
        {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_imu_csv<W: Write>(mut w: W, samples: &[RawImuSample]) -> std::io::Result<()> {
    writeln!(w, "{IMU_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.t, s.omega.x, s.omega.y, s.omega.z, s.accel.x, s.accel.y, s.accel.z
        )?;
    }
    Ok(())
}

pub fn save_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let name = path.display().to_string();
    let mut f = std::io::BufWriter::new(create(path)?);
    write_trajectory_csv(&mut f, traj).map_err(io_err(&name))?;
    f.flush().map_err(io_err(&name))
}

pub fn save_imu_csv(path: &Path, samples: &[RawImuSample]) -> Result<(), IoError> {
    let name = path.display().to_string();
    let mut f = std::io::BufWriter::new(create(path)?);
    write_imu_csv(&mut f, samples).map_err(io_err(&name))?;
    f.flush().map_err(io_err(&name))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

/// One event-log line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub p: Option<[f64; 6]>,
    #[serde(rename = "ref")]
    pub reference: ReferenceRecord,
    pub w: [f64; 3],
    pub a: [f64; 3],
}

impl From<&LieEvent> for EventRecord {
    fn from(e: &LieEvent) -> Self {
        Self {
            t: e.tau,
            p: e.polarity.map(|p| p.to_array()),
            reference: ReferenceRecord {
                q: e.reference.rotation.to_quaternion(),
                t: e.reference.translation.into(),
            },
            w: e.omega_hat.into(),
            a: e.accel_hat.into(),
        }
    }
}

impl EventRecord {
    pub fn to_event(&self, manifold: Manifold) -> LieEvent {
        let [qw, qx, qy, qz] = self.reference.q;
        LieEvent {
            tau: self.t,
            polarity: self.p.map(Twist::from_array),
            reference: Pose::new(
                manifold,
                Rotation3::from_quaternion(qw, qx, qy, qz),
                Vector3::from(self.reference.t),
            ),
            omega_hat: Vector3::from(self.w),
            accel_hat: Vector3::from(self.a),
        }
    }
}

pub fn write_event_log<W: Write>(mut w: W, records: &[EventRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads line-delimited records; polarities must be unit and times
/// non-decreasing.
pub fn parse_event_log<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<EventRecord>, IoError> {
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(io_err(source_name))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: EventRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(source_name, line_no, e.to_string()))?;
        if let Some(p) = r.p {
            let n = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !((n - 1.0).abs() <= POLARITY_TOLERANCE) {
                return Err(parse_err(source_name, line_no, format!("polarity norm {n} is not 1")));
            }
        }
        if let Some(prev) = out.last() {
            if r.t < prev.t {
                return Err(parse_err(source_name, line_no, format!("event time {} before {}", r.t, prev.t)));
            }
        }
        out.push(r);
    }
    Ok(out)
}

pub fn read_event_log(path: &Path) -> Result<Vec<EventRecord>, IoError> {
    parse_event_log(BufReader::new(open(path)?), &path.display().to_string())
}

pub const STACK_HEADER: &str = "window,bin,count,ax,ay,az,wx,wy,wz,p0,p1,p2,p3,p4,p5";

/// Appends the rows of `stack` tagged with `window`.
pub fn write_stack_rows<W: Write>(mut w: W, window: usize, stack: &EventStack) -> std::io::Result<()> {
    for b in 0..stack.bins {
        write!(w, "{window},{b},{}", stack.occupancy[b])?;
        for x in stack.row(b) {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub const TOY_HEADER: &str = "reference,phi,correction,theta,chamfer_pct";

pub fn write_toy_csv<W: Write>(mut w: W, rows: &[ToyRow]) -> std::io::Result<()> {
    writeln!(w, "{TOY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.reference.label(),
            r.phi_label(),
            if r.corrected { "yes" } else { "no" },
            r.theta,
            r.chamfer_pct
        )?;
    }
    Ok(())
}
