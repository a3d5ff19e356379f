//! Versioned CSV files.
//!
//! The first line is `#schema=airpid-<name>/<version>`, the second the
//! column header. Readers reject unknown schema names, versions and headers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read};
use std::path::Path;

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schema {
    pub name: &'static str,
    pub version: u32,
    pub columns: &'static [&'static str],
}

impl Schema {
    pub fn tag(&self) -> String {
        format!("#schema=airpid-{}/{}", self.name, self.version)
    }
}

pub const TRAINING: Schema = Schema {
    name: "training",
    version: 1,
    columns: &[
        "iteration",
        "timestep",
        "mean_reward_raw",
        "mean_leg_effective_speed",
        "settling_time_s",
        "overshoot_m",
        "surrogate",
        "value_loss",
        "entropy",
        "clip_fraction",
        "mean_episode_length",
        "legs_closed",
        "legs_completed",
    ],
};

pub const TRAIN_LEGS: Schema = Schema {
    name: "train-legs",
    version: 1,
    columns: &[
        "iteration",
        "timestep",
        "leg_id",
        "status",
        "steps",
        "distance",
        "effective_speed",
        "settling_time_s",
        "overshoot_m",
        "final_error",
    ],
};

pub const TRAJECTORY: Schema = Schema {
    name: "trajectory",
    version: 1,
    columns: &[
        "t", "x", "y", "z", "vx", "vy", "vz", "kp", "ki", "kd", "cmd_x", "cmd_y", "cmd_z", "pe", "leg_id",
    ],
};

pub const EVAL_LEGS: Schema = Schema {
    name: "legs",
    version: 1,
    columns: &[
        "controller",
        "episode",
        "leg_id",
        "status",
        "outcome",
        "steps",
        "start_x",
        "start_y",
        "start_z",
        "target_x",
        "target_y",
        "target_z",
        "effective_speed",
        "settling_time_s",
        "overshoot_m",
        "final_error",
    ],
};

pub const SUMMARY: Schema = Schema {
    name: "summary",
    version: 1,
    columns: &[
        "controller",
        "kp",
        "ki",
        "kd",
        "legs",
        "judged_legs",
        "success_rate",
        "effective_speed",
        "settling_time_s",
        "overshoot_m",
        "not_settled_rate",
    ],
};

pub const IMPROVEMENT: Schema = Schema {
    name: "improvement",
    version: 1,
    columns: &["adaptive_vs", "speed_pct", "settling_pct", "overshoot_pct"],
};

pub const GAINS: Schema = Schema {
    name: "gains",
    version: 1,
    columns: &["t", "leg_id", "pe", "kp", "ki", "kd"],
};

pub const WAYPOINTS: Schema = Schema {
    name: "waypoints",
    version: 1,
    columns: &["index", "i", "j", "k", "x", "y", "z"],
};

pub const SETPOINTS: Schema = Schema {
    name: "setpoints",
    version: 1,
    columns: &["t", "x", "y", "z"],
};

pub const ALL: &[Schema] = &[TRAINING, TRAIN_LEGS, TRAJECTORY, EVAL_LEGS, SUMMARY, IMPROVEMENT, GAINS, WAYPOINTS, SETPOINTS];

pub type CsvWriter = csv::Writer<BufWriter<File>>;

/// Creates `path` and writes the schema tag and header.
pub fn create(path: &Path, schema: &Schema) -> Result<CsvWriter, AppError> {
    use std::io::Write;
    let file = File::create(path).map_err(AppError::io(path))?;
    let mut buf = BufWriter::new(file);
    writeln!(buf, "{}", schema.tag()).map_err(AppError::io(path))?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(schema.columns).map_err(|e| csv_err(path, e))?;
    Ok(w)
}

pub fn write_row(w: &mut CsvWriter, path: &Path, row: &[String]) -> Result<(), AppError> {
    w.write_record(row).map_err(|e| csv_err(path, e))
}

pub fn finish(mut w: CsvWriter, path: &Path) -> Result<(), AppError> {
    w.flush().map_err(AppError::io(path))
}

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    AppError::Other(format!("{}: {e}", path.display()))
}

/// Shortest round-trip representation; empty for undefined values.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Rows of a schema-checked CSV, still as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: Schema,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.schema.columns.iter().position(|c| *c == name)
    }

    /// Parses one column as numbers; empty cells become `None`. Errors name
    /// the offending data row (1-based, header excluded).
    pub fn numbers(&self, path: &Path, name: &str) -> Result<Vec<Option<f64>>, AppError> {
        let col = self
            .column(name)
            .ok_or_else(|| AppError::corrupt(path, format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r[col].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>()
                    .map(Some)
                    .map_err(|_| AppError::corrupt(path, format!("row {}: column `{name}` is not a number: {cell:?}", i + 1)))
            })
            .collect()
    }
}

fn parse_tag(line: &str) -> Option<(&str, u32)> {
    let rest = line.trim_end().strip_prefix("#schema=airpid-")?;
    let (name, version) = rest.rsplit_once('/')?;
    Some((name, version.parse().ok()?))
}

/// Reads a CSV written by [`create`], accepting only the listed schemas.
pub fn read(path: &Path, accept: &[Schema]) -> Result<Table, AppError> {
    let file = File::open(path).map_err(AppError::io(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(AppError::io(path))?;
    let (name, version) = parse_tag(&first).ok_or_else(|| AppError::corrupt(path, "missing `#schema=` line"))?;
    let schema = *accept
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| AppError::corrupt(path, format!("unexpected schema `{name}`")))?;
    if schema.version != version {
        return Err(AppError::corrupt(path, format!("unsupported {name} schema version {version} (expected {})", schema.version)));
    }
    let mut rest = String::new();
    reader.read_to_string(&mut rest).map_err(AppError::io(path))?;
    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(rest.as_bytes());
    let header = csv.headers().map_err(|e| AppError::corrupt(path, e.to_string()))?;
    if header.iter().ne(schema.columns.iter().copied()) {
        return Err(AppError::corrupt(path, format!("header does not match the {name} schema")));
    }
    let mut rows = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| AppError::corrupt(path, format!("row {}: {e}", i + 1)))?;
        if rec.len() != schema.columns.len() {
            return Err(AppError::corrupt(
                path,
                format!("row {}: expected {} fields, found {}", i + 1, schema.columns.len(), rec.len()),
            ));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { schema, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let mut w = create(&p, &GAINS).unwrap();
        write_row(&mut w, &p, &["0.04".into(), "0".into(), "1.5".into(), "2".into(), "0.1".into(), "".into()]).unwrap();
        finish(w, &p).unwrap();
        let t = read(&p, &[GAINS]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.numbers(&p, "kd").unwrap(), vec![None]);
        assert_eq!(t.numbers(&p, "pe").unwrap(), vec![Some(1.5)]);

        let text = fs::read_to_string(&p).unwrap().replace("gains/1", "gains/2");
        fs::write(&p, text).unwrap();
        assert!(matches!(read(&p, &[GAINS]), Err(AppError::Corrupt { .. })));
    }

    #[test]
    fn bad_cell_names_its_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        fs::write(&p, "#schema=airpid-setpoints/1\nt,x,y,z\n0,1,2,3\n1,1,oops,3\n").unwrap();
        let t = read(&p, &[SETPOINTS]).unwrap();
        let err = t.numbers(&p, "y").unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn float_text_is_round_trip_exact() {
        for v in [0.1, 1.0 / 3.0, 22026.465794806718, -0.0, 1e-300] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
