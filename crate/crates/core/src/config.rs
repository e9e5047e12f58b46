//! Run configuration: defaults, a plain `key = value` file, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::curvature::{FdSteps, DEFAULT_SAMPLE_SEED};
use crate::error::{Error, Result};
use crate::mesh::MAX_MESH_SIZE;
use crate::qdiff::DEFAULT_TRUNCATION;

/// Overrides the cache directory of the file and the default, but not the command line.
pub const CACHE_DIR_ENV: &str = "TEICHCURVE_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NormTag {
    Raw,
    Wp,
    PointD,
}

impl NormTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormTag::Raw => "raw",
            NormTag::Wp => "wp",
            NormTag::PointD => "pointD",
        }
    }
}

impl FromStr for NormTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(NormTag::Raw),
            "wp" => Ok(NormTag::Wp),
            "pointD" => Ok(NormTag::PointD),
            _ => Err(Error::Config(format!("normalization must be raw, wp or pointD, got {s:?}"))),
        }
    }
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("format must be csv or json, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub h: f64,
    pub truncation_length: usize,
    pub normalization: NormTag,
    pub sample_seed: u64,
    pub sample_count: usize,
    pub fd_steps: FdSteps,
    /// Base step of the energy-Hessian differences.
    pub t_step: f64,
    /// Floor of the curvature oracle tolerance.
    pub oracle_floor: f64,
    /// Floor of the Christoffel-table tolerance.
    pub table_floor: f64,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            h: 0.05,
            truncation_length: DEFAULT_TRUNCATION,
            normalization: NormTag::Wp,
            sample_seed: DEFAULT_SAMPLE_SEED,
            sample_count: 10,
            fd_steps: FdSteps::default(),
            t_step: 0.02,
            oracle_floor: 1e-2,
            table_floor: 1e-6,
            cache_dir: PathBuf::from(".teichcurve-cache"),
            output_dir: PathBuf::from("teichcurve-out"),
            format: OutputFormat::Csv,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Defaults, then the environment cache override.
    pub fn from_env() -> Self {
        let mut c = RunConfig::default();
        c.apply_env();
        c
    }

    fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
            self.cache_dir = PathBuf::from(dir);
        }
    }

    /// Set one key. Keys: `h`, `L`, `norm`, `seed`, `points`, `fd_fiber`, `fd_param`,
    /// `t_step`, `oracle_floor`, `table_floor`, `cache_dir`, `out`, `format`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "h" => self.h = parse_num(key, value)?,
            "L" => self.truncation_length = parse_num(key, value)?,
            "norm" => self.normalization = value.parse()?,
            "seed" => self.sample_seed = parse_num(key, value)?,
            "points" => self.sample_count = parse_num(key, value)?,
            "fd_fiber" => self.fd_steps.fiber = parse_num(key, value)?,
            "fd_param" => self.fd_steps.param = parse_num(key, value)?,
            "t_step" => self.t_step = parse_num(key, value)?,
            "oracle_floor" => self.oracle_floor = parse_num(key, value)?,
            "table_floor" => self.table_floor = parse_num(key, value)?,
            "cache_dir" => self.cache_dir = PathBuf::from(value),
            "out" => self.output_dir = PathBuf::from(value),
            "format" => self.format = value.parse()?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Defaults, then `path`, then the environment cache override.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut c = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            c.apply_text(&text)?;
        }
        c.apply_env();
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("fd_fiber", self.fd_steps.fiber),
            ("fd_param", self.fd_steps.param),
            ("t_step", self.t_step),
            ("oracle_floor", self.oracle_floor),
            ("table_floor", self.table_floor),
        ];
        for (k, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if self.h > MAX_MESH_SIZE {
            return Err(Error::Config(format!("h must be at most {MAX_MESH_SIZE}, got {}", self.h)));
        }
        if self.truncation_length == 0 {
            return Err(Error::Config("L must be positive".into()));
        }
        if self.sample_count == 0 {
            return Err(Error::Config("points must be positive".into()));
        }
        if 2.0 * self.t_step > crate::bochner::DEFAULT_T_MAX {
            return Err(Error::Config(format!(
                "t_step must be at most {}, got {}",
                crate::bochner::DEFAULT_T_MAX / 2.0,
                self.t_step
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_text() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nh = 0.1\nL=3 # trailing\n\nnorm = pointD\nformat=json\n")
            .unwrap();
        assert_eq!(c.h, 0.1);
        assert_eq!(c.truncation_length, 3);
        assert_eq!(c.normalization, NormTag::PointD);
        assert_eq!(c.format, OutputFormat::Json);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("h 0.1").is_err());
        assert!(c.set("norm", "euclid").is_err());
        assert!(c.set("nope", "1").is_err());
        c.set("h", "-0.1").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("h", "0.6").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("t_step", "0.2").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn norm_tags_round_trip() {
        for t in [NormTag::Raw, NormTag::Wp, NormTag::PointD] {
            assert_eq!(t.as_str().parse::<NormTag>().unwrap(), t);
        }
    }
}
