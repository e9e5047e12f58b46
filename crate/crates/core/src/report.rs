//! Report rows and their CSV/JSON encodings.
//!
//! Floats are written in shortest round-trip form in both encodings, so identical inputs give
//! byte-identical files and the two encodings carry the same numbers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::OutputFormat;
use crate::curvature::{
    k_fiber_closed, k_germ_closed, k_mixed_closed, oracle_tolerance, sectional_fd, CurvatureReport, FdSteps,
};
use crate::disk::C64;
use crate::error::{Error, Result};
use crate::jets::{build_curve_jet, build_germ_jet};
use crate::qdiff::{BasisSet, QuadDifferential};
use crate::surface::Surface;

/// One verification assertion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub suite: String,
    pub check: String,
    /// The formula or statement the check certifies.
    pub anchor: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub value: f64,
    pub reference: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CheckRow {
    /// `|value − reference| ≤ tol`.
    pub fn close(suite: &str, check: impl Into<String>, anchor: &str, z: Option<C64>, value: f64, reference: f64, tol: f64) -> Self {
        let gap = (value - reference).abs();
        Self::with_gap(suite, check, anchor, z, value, reference, gap, tol)
    }

    /// `value ≤ bound + tol`; the gap is the excess over the bound (0 if below).
    pub fn at_most(suite: &str, check: impl Into<String>, anchor: &str, z: Option<C64>, value: f64, bound: f64, tol: f64) -> Self {
        let gap = (value - bound).max(0.0);
        Self::with_gap(suite, check, anchor, z, value, bound, gap, tol)
    }

    /// `value ≥ bound − tol`.
    pub fn at_least(suite: &str, check: impl Into<String>, anchor: &str, z: Option<C64>, value: f64, bound: f64, tol: f64) -> Self {
        let gap = (bound - value).max(0.0);
        Self::with_gap(suite, check, anchor, z, value, bound, gap, tol)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_gap(
        suite: &str,
        check: impl Into<String>,
        anchor: &str,
        z: Option<C64>,
        value: f64,
        reference: f64,
        gap: f64,
        tol: f64,
    ) -> Self {
        CheckRow {
            suite: suite.into(),
            check: check.into(),
            anchor: anchor.into(),
            x: z.map(|z| z.re),
            y: z.map(|z| z.im),
            value,
            reference,
            gap,
            tol,
            pass: gap.is_finite() && gap <= tol,
        }
    }
}

/// One `(point, plane)` entry of the curvature table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureRow {
    pub point: usize,
    pub x: f64,
    pub y: f64,
    pub plane: String,
    pub closed_form: f64,
    pub oracle: f64,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CurvatureRow {
    pub fn from_report(point: usize, r: &CurvatureReport) -> Self {
        CurvatureRow {
            point,
            x: r.point[0],
            y: r.point[1],
            plane: r.plane.clone(),
            closed_form: r.closed_form,
            oracle: r.oracle,
            gap: r.gap,
            tol: r.tolerance,
            pass: r.pass,
        }
    }
}

/// Shortest round-trip decimal form; non-finite values are written as `NaN`, `inf`, `-inf`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn check_rows_csv(rows: &[CheckRow]) -> String {
    let mut s = String::from("suite,check,anchor,x,y,value,reference,gap,tol,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.suite),
            csv_field(&r.check),
            csv_field(&r.anchor),
            opt(r.x),
            opt(r.y),
            fmt_f64(r.value),
            fmt_f64(r.reference),
            fmt_f64(r.gap),
            fmt_f64(r.tol),
            r.pass
        );
    }
    s
}

pub fn curvature_rows_csv(rows: &[CurvatureRow]) -> String {
    let mut s = String::from("point,x,y,plane,closed_form,oracle,gap,tol,pass\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.point,
            fmt_f64(r.x),
            fmt_f64(r.y),
            csv_field(&r.plane),
            fmt_f64(r.closed_form),
            fmt_f64(r.oracle),
            fmt_f64(r.gap),
            fmt_f64(r.tol),
            r.pass
        );
    }
    s
}

pub fn to_json<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::parse("json", e))?;
    s.push('\n');
    Ok(s)
}

/// Write rows as `<stem>.csv` or `<stem>.json` under `dir`.
pub fn write_rows(dir: &Path, stem: &str, format: OutputFormat, csv: String, json: impl FnOnce() -> Result<String>) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let text = match format {
        OutputFormat::Csv => csv,
        OutputFormat::Json => json()?,
    };
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Parse a points file: one `x y` or `x,y` pair per line, `#` comments.
pub fn parse_points(text: &str) -> Result<Vec<C64>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        let bad = || Error::parse("points file", format!("line {}: expected two numbers", n + 1));
        if parts.len() != 2 {
            return Err(bad());
        }
        let x: f64 = parts[0].parse().map_err(|_| bad())?;
        let y: f64 = parts[1].parse().map_err(|_| bad())?;
        let z = C64::new(x, y);
        if !(z.norm() < 1.0) {
            return Err(Error::Domain(format!("point {z} on line {} is not in the disk", n + 1)));
        }
        out.push(z);
    }
    if out.is_empty() {
        return Err(Error::parse("points file", "no points"));
    }
    Ok(out)
}

/// Curve-jet planes `(x,y)` and the four mixed planes per basis element, then the germ
/// planes `(x,y)`, `(x,t)`, `(y,t)`, at one point.
pub fn curvature_rows_at(
    surface: &Surface,
    basis: &BasisSet,
    phi0: &QuadDifferential,
    index: usize,
    z0: C64,
    steps: FdSteps,
    floor: f64,
) -> Result<Vec<CurvatureRow>> {
    let derr = surface.d_error()?;
    let tol = |est: f64| oracle_tolerance(est, derr).max(floor);
    let mut rows = Vec::new();
    let mut push = |r: CurvatureReport| rows.push(CurvatureRow::from_report(index, &r));

    let jet = build_curve_jet(surface, basis, z0)?;
    let labels = jet.labels();
    let fd = sectional_fd(&jet, (0, 1), steps)?;
    push(CurvatureReport::new(z0, "curve (x,y)", k_fiber_closed(basis, z0), fd.value, tol(fd.estimate)));
    for l in 0..basis.len() {
        let closed = k_mixed_closed(surface, basis, l, z0)?;
        for (a, b) in [(0, 2 + 2 * l), (1, 2 + 2 * l), (0, 3 + 2 * l), (1, 3 + 2 * l)] {
            let fd = sectional_fd(&jet, (a, b), steps)?;
            let plane = format!("curve ({},{})", labels[a], labels[b]);
            push(CurvatureReport::new(z0, plane, closed, fd.value, tol(fd.estimate)));
        }
    }

    let germ = build_germ_jet(surface, phi0, z0)?;
    let (kf, km) = k_germ_closed(surface, phi0, z0)?;
    for (plane, closed, ab) in [("germ (x,y)", kf, (0, 1)), ("germ (x,t)", km, (0, 2)), ("germ (y,t)", km, (1, 2))] {
        let fd = sectional_fd(&germ, ab, steps)?;
        push(CurvatureReport::new(z0, plane, closed, fd.value, tol(fd.estimate)));
    }
    Ok(rows)
}

/// The curvature table at every point, in point order.
pub fn curvature_table(
    surface: &Surface,
    basis: &BasisSet,
    phi0: &QuadDifferential,
    points: &[C64],
    steps: FdSteps,
    floor: f64,
) -> Result<Vec<CurvatureRow>> {
    use rayon::prelude::*;
    let per_point = points
        .par_iter()
        .enumerate()
        .map(|(i, &z)| curvature_rows_at(surface, basis, phi0, i, z, steps, floor))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_point.into_iter().flatten().collect())
}
