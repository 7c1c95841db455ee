//! Per-step episode records and their CSV form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::reward::Branch;

pub const CSV_HEADER: &str = "t,xD,yD,zD,xT,yT,reward,visible,branch";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: u32,
    pub uav: [f64; 3],
    pub target: [f64; 2],
    pub reward: f64,
    pub visible: bool,
    pub branch: Branch,
}

impl TrajectoryRow {
    pub fn planar_distance(&self) -> f64 {
        (self.uav[0] - self.target[0]).hypot(self.uav[1] - self.target[1])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryLog {
    pub fn new(seed: u64, config_hash: impl Into<String>) -> Self {
        Self { seed, config_hash: config_hash.into(), rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn uav_path(&self) -> Vec<[f64; 2]> {
        self.rows.iter().map(|r| [r.uav[0], r.uav[1]]).collect()
    }

    pub fn target_path(&self) -> Vec<[f64; 2]> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// CSV text. Metadata goes in leading `#` comment lines; floats use the
    /// shortest representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# seed={}", self.seed).unwrap();
        writeln!(s, "# config_hash={}", self.config_hash).unwrap();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.t,
                r.uav[0],
                r.uav[1],
                r.uav[2],
                r.target[0],
                r.target[1],
                r.reward,
                u8::from(r.visible),
                r.branch.as_str()
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut log = TrajectoryLog::default();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let bad = |msg: String| Error::Format(format!("trajectory line {}: {msg}", i + 1));
            if let Some(meta) = line.strip_prefix('#') {
                match meta.trim().split_once('=') {
                    Some(("seed", v)) => log.seed = v.parse().map_err(|_| bad(format!("bad seed {v:?}")))?,
                    Some(("config_hash", v)) => log.config_hash = v.to_string(),
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if line != CSV_HEADER {
                    return Err(bad(format!("expected header {CSV_HEADER:?}, got {line:?}")));
                }
                header_seen = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 9 {
                return Err(bad(format!("expected 9 columns, got {}", cols.len())));
            }
            let num = |j: usize| cols[j].parse::<f64>().map_err(|_| bad(format!("bad number {:?}", cols[j])));
            let row = TrajectoryRow {
                t: cols[0].parse().map_err(|_| bad(format!("bad step {:?}", cols[0])))?,
                uav: [num(1)?, num(2)?, num(3)?],
                target: [num(4)?, num(5)?],
                reward: num(6)?,
                visible: match cols[7] {
                    "0" => false,
                    "1" => true,
                    v => return Err(bad(format!("bad visible flag {v:?}"))),
                },
                branch: Branch::parse(cols[8]).ok_or_else(|| bad(format!("bad branch {:?}", cols[8])))?,
            };
            if let Some(prev) = log.rows.last() {
                if row.t <= prev.t {
                    return Err(bad("steps must increase".into()));
                }
            }
            log.rows.push(row);
        }
        if !header_seen {
            return Err(Error::Format("trajectory file has no header".into()));
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut log = TrajectoryLog::new(42, "abc");
        for t in 0..5 {
            log.rows.push(TrajectoryRow {
                t,
                uav: [t as f64, -3.0, 8.333333333333334],
                target: [20.0, t as f64 * 2.0],
                reward: -25.0 * (-2.0 * t as f64).exp(),
                visible: t % 2 == 0,
                branch: if t % 2 == 0 { Branch::Visible } else { Branch::NonVisible },
            });
        }
        let csv = log.to_csv();
        assert!(csv.lines().any(|l| l == CSV_HEADER));
        assert_eq!(TrajectoryLog::from_csv(&csv).unwrap(), log);
    }

    #[test]
    fn rejects_wrong_header() {
        assert!(TrajectoryLog::from_csv("t,x\n").is_err());
    }
}
