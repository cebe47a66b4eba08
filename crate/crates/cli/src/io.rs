//! File formats: trajectory CSV, segmentation JSON, trace and curve CSV.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cplass_core::{ChainTrace, McmcConfig, ScoreBreakdown, ScoreConfig, Segmentation, Trajectory};

use crate::error::{CliError, Result};

/// Allowed relative deviation of any time step from the grid spacing.
pub const GRID_JITTER: f64 = 1e-6;

pub const UNITS_LINE: &str = "# units: s, um";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn comment_value(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().strip_prefix(key))
        .filter_map(|l| l.trim_start().strip_prefix(':'))
        .find_map(|v| v.trim().parse().ok())
}

/// Column names after `t`: `x,y` or `x1..xd`.
fn coordinate_columns(header: &csv::StringRecord) -> Option<usize> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return None;
    }
    let rest = &cols[1..];
    if rest == ["x", "y"] {
        return Some(2);
    }
    rest.iter()
        .enumerate()
        .all(|(i, c)| *c == format!("x{}", i + 1))
        .then_some(rest.len())
}

/// Reads a trajectory CSV with header `t,x1,..,xd` (or `t,x,y`). Lines
/// starting with `#` are comments; `# dt:` and `# t0:` comments written by
/// [`trajectory_csv`] are honoured when consistent with the time column.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let text = read_text(path)?;
    parse_trajectory(&text, path)
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory> {
    let parse_err = |line: u64, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let d = coordinate_columns(&header)
        .ok_or_else(|| parse_err(1, format!("expected header t,x1,..,xd or t,x,y, got {}", header.iter().collect::<Vec<_>>().join(","))))?;

    let mut times = Vec::new();
    let mut positions = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut vals = rec.iter().map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("missing or non-numeric value {f:?}")))
        });
        times.push(vals.next().expect("header fixes the width")?);
        for v in vals {
            positions.push(v?);
        }
    }
    if times.len() < 2 {
        return Err(parse_err(1, format!("need at least 2 observations, got {}", times.len())));
    }

    let n = times.len();
    let mut dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(CliError::Grid { path: path.to_path_buf(), row: 2, step: times[1] - times[0], dt });
    }
    for (i, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > GRID_JITTER * dt {
            return Err(CliError::Grid { path: path.to_path_buf(), row: i + 2, step, dt });
        }
    }
    if let Some(c) = comment_value(text, "dt").filter(|c| (c - dt).abs() <= GRID_JITTER * dt) {
        dt = c;
    }
    let mut t0 = times[0] - dt;
    if let Some(c) = comment_value(text, "t0").filter(|c| (c - t0).abs() <= GRID_JITTER * dt) {
        t0 = c;
    }
    Ok(Trajectory::with_origin(t0, dt, d, positions)?)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = format!("{UNITS_LINE}\n# dt: {}\n# t0: {}\n", traj.dt(), traj.t0());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.d()).map(|l| format!("x{l}")));
    w.write_record(&header).expect("in-memory write");
    for i in 0..traj.n() {
        let mut row = vec![traj.time(i).to_string()];
        row.extend(traj.row(i).iter().map(f64::to_string));
        w.write_record(&row).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii"));
    out
}

/// Major version of the segmentation JSON schema this build reads and
/// writes.
pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreJson {
    pub total: f64,
    pub log_rss_term: f64,
    pub ssic_term: f64,
    pub speed_term: f64,
}

impl From<ScoreBreakdown> for ScoreJson {
    fn from(s: ScoreBreakdown) -> Self {
        Self { total: s.total, log_rss_term: s.log_rss_term, ssic_term: s.ssic_term, speed_term: s.speed_term }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigJson {
    pub score: ScoreConfig,
    pub mcmc: McmcConfig,
}

/// On-disk form of a detected or simulated segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationFile {
    pub schema_version: String,
    /// `"detection"` or `"truth"`.
    pub kind: String,
    pub n: usize,
    pub d: usize,
    pub dt: f64,
    pub t0: f64,
    pub k: usize,
    pub tau: Vec<f64>,
    pub intercept: Vec<f64>,
    #[serde(rename = "V")]
    pub velocities: Vec<Vec<f64>>,
    pub speeds: Vec<f64>,
    pub durations: Vec<f64>,
    pub rss: f64,
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub changepoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<ScoreJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SegmentationFile {
    pub fn new(kind: &str, seg: &Segmentation) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            kind: kind.into(),
            n: seg.n,
            d: seg.d,
            dt: seg.dt,
            t0: seg.t0,
            k: seg.num_segments(),
            tau: seg.tau.clone(),
            intercept: seg.intercept.clone(),
            velocities: seg.velocities.clone(),
            speeds: seg.speeds.clone(),
            durations: seg.durations.clone(),
            rss: seg.rss,
            sigma2: seg.sigma2_hat,
            changepoints: seg.changepoint_vector().ok().map(|r| r.indices()),
            score: None,
            config: None,
            seed: None,
        }
    }

    pub fn to_segmentation(&self) -> Segmentation {
        let w = self
            .velocities
            .iter()
            .enumerate()
            .map(|(j, v)| match j {
                0 => v.clone(),
                _ => v.iter().zip(&self.velocities[j - 1]).map(|(a, b)| a - b).collect(),
            })
            .collect();
        Segmentation {
            n: self.n,
            d: self.d,
            dt: self.dt,
            t0: self.t0,
            tau: self.tau.clone(),
            intercept: self.intercept.clone(),
            w,
            velocities: self.velocities.clone(),
            speeds: self.speeds.clone(),
            durations: self.durations.clone(),
            rss: self.rss,
            sigma2_hat: self.sigma2,
        }
    }

    fn check(&self, path: &Path) -> Result<()> {
        let bad = |msg: String| CliError::Parse { path: path.to_path_buf(), line: 0, msg };
        let k = self.velocities.len();
        if k == 0 || self.k != k || self.speeds.len() != k || self.durations.len() != k || self.tau.len() + 1 != k {
            return Err(bad(format!("inconsistent segment counts (k = {})", self.k)));
        }
        if self.velocities.iter().any(|v| v.len() != self.d) || self.intercept.len() != self.d {
            return Err(bad(format!("rows do not match d = {}", self.d)));
        }
        if self.durations.iter().any(|x| !(*x > 0.0)) {
            return Err(bad("segment durations must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

fn schema_major(version: &str) -> Option<u32> {
    version.split('.').next()?.parse().ok()
}

/// Loads a segmentation JSON, rejecting unknown major schema versions.
pub fn read_segmentation(path: &Path) -> Result<SegmentationFile> {
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    let version = value.get("schema_version").and_then(|v| v.as_str()).unwrap_or("");
    if schema_major(version) != Some(SCHEMA_MAJOR) {
        return Err(CliError::Schema { path: path.to_path_buf(), found: version.to_string(), supported: SCHEMA_MAJOR });
    }
    let file: SegmentationFile =
        serde_json::from_value(value).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    file.check(path)?;
    Ok(file)
}

pub fn read_segmentations(paths: &[PathBuf]) -> Result<Vec<Segmentation>> {
    paths.iter().map(|p| read_segmentation(p).map(|f| f.to_segmentation())).collect()
}

fn number(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

/// `iter,score,accepted,proposal_type,num_changepoints`; the initial state
/// has proposal type 0.
pub fn trace_csv(trace: &ChainTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "score", "accepted", "proposal_type", "num_changepoints"]).expect("in-memory write");
    for rec in &trace.records {
        w.write_record([
            rec.iter.to_string(),
            number(rec.score),
            (rec.accepted as u8).to_string(),
            rec.proposal.map_or(0, |p| p.number()).to_string(),
            rec.num_changepoints.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii")
}

/// Column-oriented numeric table with optional comment lines.
pub struct Table {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { comments: vec![UNITS_LINE.trim_start_matches("# ").to_string()], header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| number(x)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out: String = self.comments.iter().map(|c| format!("# {c}\n")).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
        out
    }
}

pub fn fmt_number(x: f64) -> String {
    number(x)
}
