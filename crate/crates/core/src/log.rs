//! Per-tick trajectory log and its CSV form.
//!
//! The file starts with `# schema-version: 1`, then `# key: value` metadata
//! lines, then a header row. Floats are written in Rust's shortest
//! round-trip form, so a log read back is bit-identical to the one written.

use std::io::Write;

use thiserror::Error;

use crate::passivity::StorageSample;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("log schema: {0}")]
    Schema(String),
    #[error("log csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("log row {row}, column {column}: cannot parse {value:?}")]
    Value { row: usize, column: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRow {
    pub t: f64,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// `G + τ_c + τ_n` before saturation.
    pub tau_total: Vec<f64>,
    pub tau_c: Vec<f64>,
    pub tau_n: Vec<f64>,
    pub tau_ext: Vec<f64>,
    /// Tool position.
    pub p: [f64; 3],
    /// Tool roll, pitch, yaw.
    pub r: [f64; 3],
    /// `[ṗ; ṙ]` with Euler rates.
    pub twist: [f64; 6],
    pub p_tilde_d: [f64; 3],
    pub p_tilde_d_dot: [f64; 3],
    /// Summed contact wrench `[f; m]`.
    pub wrench: [f64; 6],
    pub storage: StorageSample,
    /// Classical reference position (zero for the other variants).
    pub p_ref: [f64; 3],
    pub qdot_d: Vec<f64>,
    /// Torque actually applied after saturation.
    pub tau_applied: Vec<f64>,
    /// Index of the active interaction event, −1 if none.
    pub event: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub dof: usize,
    /// Ordered `key: value` pairs written into the file header.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<LogRow>,
}

fn vec_cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

fn named<'a>(names: &'a [&'a str]) -> impl Iterator<Item = String> + 'a {
    names.iter().map(|s| s.to_string())
}

/// Column names in file order.
pub fn columns(dof: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend(vec_cols("q", dof));
    c.extend(vec_cols("qdot", dof));
    c.extend(vec_cols("tau_total", dof));
    c.extend(vec_cols("tau_c", dof));
    c.extend(vec_cols("tau_n", dof));
    c.extend(vec_cols("tau_ext", dof));
    c.extend(named(&["px", "py", "pz", "roll", "pitch", "yaw"]));
    c.extend(named(&["vx", "vy", "vz", "roll_rate", "pitch_rate", "yaw_rate"]));
    c.extend(named(&["pd_x", "pd_y", "pd_z", "vd_x", "vd_y", "vd_z"]));
    c.extend(named(&["fx", "fy", "fz", "mx", "my", "mz"]));
    c.extend(named(&["S1", "S2", "S3", "S", "Sdot", "supply", "margin"]));
    c.extend(named(&["pref_x", "pref_y", "pref_z"]));
    c.extend(vec_cols("qdot_d", dof));
    c.extend(vec_cols("tau_applied", dof));
    c.extend(named(&["dissipation", "friction_residual", "event"]));
    c
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

impl LogRow {
    fn fields(&self) -> Vec<String> {
        let s = &self.storage;
        let mut out = vec![fmt(self.t)];
        for v in [&self.q, &self.qdot, &self.tau_total, &self.tau_c, &self.tau_n, &self.tau_ext] {
            out.extend(v.iter().map(|x| fmt(*x)));
        }
        out.extend(self.p.iter().chain(&self.r).chain(&self.twist).map(|x| fmt(*x)));
        out.extend(self.p_tilde_d.iter().chain(&self.p_tilde_d_dot).chain(&self.wrench).map(|x| fmt(*x)));
        out.extend([s.s1, s.s2, s.s3, s.s, s.sdot, s.supply, s.margin].iter().map(|x| fmt(*x)));
        out.extend(self.p_ref.iter().map(|x| fmt(*x)));
        out.extend(self.qdot_d.iter().chain(&self.tau_applied).map(|x| fmt(*x)));
        out.push(fmt(s.dissipation));
        out.push(fmt(s.friction_residual));
        out.push(self.event.to_string());
        out
    }

    /// Contact force magnitude.
    pub fn force_norm(&self) -> f64 {
        (self.wrench[0].powi(2) + self.wrench[1].powi(2) + self.wrench[2].powi(2)).sqrt()
    }
}

impl TrajectoryLog {
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, f: impl Fn(&LogRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), LogError> {
        writeln!(out, "# schema-version: {SCHEMA_VERSION}")?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {}", v.replace('\n', " "))?;
        }
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(columns(self.dof))?;
        for row in &self.rows {
            let fields = row.fields();
            if fields.len() != columns(self.dof).len() {
                return Err(LogError::Schema(format!("row at t = {} has the wrong width", row.t)));
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, LogError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| LogError::Schema(e.to_string()))
    }

    pub fn from_csv_str(text: &str) -> Result<TrajectoryLog, LogError> {
        let mut lines = text.split_inclusive('\n');
        let first = lines.next().ok_or_else(|| LogError::Schema("empty file".into()))?;
        let version = first
            .trim_end()
            .strip_prefix("# schema-version:")
            .ok_or_else(|| LogError::Schema("first line must be `# schema-version: N`".into()))?
            .trim();
        if version != SCHEMA_VERSION.to_string() {
            return Err(LogError::Schema(format!("unsupported schema version {version:?}")));
        }
        let mut meta = Vec::new();
        let mut consumed = first.len();
        for line in lines {
            let Some(rest) = line.trim_end().strip_prefix('#') else { break };
            consumed += line.len();
            let (k, v) = rest
                .split_once(':')
                .ok_or_else(|| LogError::Schema(format!("bad metadata line {line:?}")))?;
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
        let body = &text[consumed..];

        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        let dof = header.iter().filter(|h| h.len() > 1 && h.starts_with('q') && h[1..].parse::<usize>().is_ok()).count();
        if dof == 0 {
            return Err(LogError::Schema("no joint columns".into()));
        }
        if header != columns(dof) {
            return Err(LogError::Schema("header does not match the schema column order".into()));
        }

        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != header.len() {
                return Err(LogError::Schema(format!("row {} has {} fields", i + 1, record.len())));
            }
            let mut cur = Cursor {
                record: &record,
                header: &header,
                row: i + 1,
                idx: 0,
            };
            let t = cur.num()?;
            let q = cur.vec(dof)?;
            let qdot = cur.vec(dof)?;
            let tau_total = cur.vec(dof)?;
            let tau_c = cur.vec(dof)?;
            let tau_n = cur.vec(dof)?;
            let tau_ext = cur.vec(dof)?;
            let p = cur.arr()?;
            let r = cur.arr()?;
            let twist = cur.arr()?;
            let p_tilde_d = cur.arr()?;
            let p_tilde_d_dot = cur.arr()?;
            let wrench = cur.arr()?;
            let [s1, s2, s3, s, sdot, supply, margin] = cur.arr()?;
            let p_ref = cur.arr()?;
            let qdot_d = cur.vec(dof)?;
            let tau_applied = cur.vec(dof)?;
            let [dissipation, friction_residual] = cur.arr()?;
            let event = cur.parse::<i64>()?;
            let storage = StorageSample {
                s1,
                s2,
                s3,
                s,
                sdot,
                supply,
                margin,
                dissipation,
                friction_residual,
            };
            rows.push(LogRow {
                t,
                q,
                qdot,
                tau_total,
                tau_c,
                tau_n,
                tau_ext,
                p,
                r,
                twist,
                p_tilde_d,
                p_tilde_d_dot,
                wrench,
                storage,
                p_ref,
                qdot_d,
                tau_applied,
                event,
            });
        }
        Ok(TrajectoryLog { dof, meta, rows })
    }
}

struct Cursor<'a> {
    record: &'a csv::StringRecord,
    header: &'a [String],
    row: usize,
    idx: usize,
}

impl Cursor<'_> {
    fn parse<T: std::str::FromStr>(&mut self) -> Result<T, LogError> {
        let raw = &self.record[self.idx];
        let v = raw.parse::<T>().map_err(|_| LogError::Value {
            row: self.row,
            column: self.header[self.idx].clone(),
            value: raw.to_string(),
        })?;
        self.idx += 1;
        Ok(v)
    }

    fn num(&mut self) -> Result<f64, LogError> {
        self.parse()
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>, LogError> {
        (0..n).map(|_| self.num()).collect()
    }

    fn arr<const N: usize>(&mut self) -> Result<[f64; N], LogError> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = self.num()?;
        }
        Ok(out)
    }
}
