//! On-disk build cache for the group elements, the mesh and the basis.
//!
//! Each artifact is stored next to a `.sha256` file holding the digest of its contents. An
//! artifact whose digest or contents do not check out is rebuilt with a warning.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{NormTag, RunConfig};
use crate::disk::C64;
use crate::error::{Error, Result};
use crate::fuchsian::{build_genus2_octagon, enumerate_group, GroupCache, DEFAULT_ELEMENT_CAP};
use crate::mesh::{mesh_domain, SurfaceMesh};
use crate::qdiff::{BasisDescriptor, BasisSet, SeriesBank, NUM_SEEDS};
use crate::surface::Surface;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArtifactStatus {
    pub name: String,
    pub path: PathBuf,
    pub sha256: String,
    pub reused: bool,
}

pub struct Build {
    pub surface: Surface,
    /// The configured basis; the pointwise-D normalization is taken at the centroid.
    pub basis: BasisSet,
    pub artifacts: Vec<ArtifactStatus>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File names of the three artifacts for a configuration.
pub fn artifact_names(config: &RunConfig, vertex_radius: f64) -> [String; 3] {
    [
        format!("group-L{}.json", config.truncation_length),
        format!("mesh-h{:?}-r{:.12}.txt", config.h, vertex_radius),
        format!(
            "basis-h{:?}-L{}-{}.json",
            config.h, config.truncation_length, config.normalization
        ),
    ]
}

fn digest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".sha256");
    PathBuf::from(s)
}

enum Loaded<T> {
    Missing,
    Corrupt(String),
    Valid(T, String),
}

fn load<T>(path: &Path, parse: impl FnOnce(&str) -> Result<T>) -> Loaded<T> {
    let Ok(bytes) = std::fs::read(path) else {
        return Loaded::Missing;
    };
    let digest = sha256_hex(&bytes);
    match std::fs::read_to_string(digest_path(path)) {
        Ok(d) if d.trim() == digest => {}
        Ok(_) => return Loaded::Corrupt("content hash mismatch".into()),
        Err(_) => return Loaded::Corrupt("missing hash file".into()),
    }
    let text = match String::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => return Loaded::Corrupt(e.to_string()),
    };
    match parse(&text) {
        Ok(v) => Loaded::Valid(v, digest),
        Err(e) => Loaded::Corrupt(e.to_string()),
    }
}

fn store(path: &Path, text: &str) -> Result<String> {
    let digest = sha256_hex(text.as_bytes());
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let dp = digest_path(path);
    std::fs::write(&dp, format!("{digest}\n")).map_err(|e| Error::io(&dp, e))?;
    Ok(digest)
}

/// Load a cached artifact or build and store it.
fn cached<T>(
    dir: &Path,
    name: &str,
    parse: impl FnOnce(&str) -> Result<T>,
    build: impl FnOnce() -> Result<(T, String)>,
    statuses: &mut Vec<ArtifactStatus>,
    warnings: &mut Vec<String>,
) -> Result<T> {
    let path = dir.join(name);
    match load(&path, parse) {
        Loaded::Valid(v, sha256) => {
            statuses.push(ArtifactStatus {
                name: name.into(),
                path,
                sha256,
                reused: true,
            });
            return Ok(v);
        }
        Loaded::Corrupt(why) => {
            let msg = format!("cache artifact {} is unusable ({why}); rebuilding", path.display());
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Loaded::Missing => {}
    }
    let (v, text) = build()?;
    let sha256 = store(&path, &text)?;
    statuses.push(ArtifactStatus {
        name: name.into(),
        path,
        sha256,
        reused: false,
    });
    Ok(v)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::parse("json", e))
}

fn basis_from_descriptor(bank: Arc<SeriesBank>, d: &BasisDescriptor) -> Result<BasisSet> {
    let rows = d.recombination.len();
    if rows == 0 || d.recombination.iter().any(|r| r.len() != NUM_SEEDS) {
        return Err(Error::parse("basis descriptor", "bad recombination shape"));
    }
    let recombination = DMatrix::from_fn(rows, NUM_SEEDS, |i, k| {
        let [re, im] = d.recombination[i][k];
        C64::new(re, im)
    });
    Ok(BasisSet {
        bank,
        recombination,
        normalization: d.normalization,
    })
}

/// Build (or load) everything the verification suites need.
pub fn build(config: &RunConfig) -> Result<Build> {
    config.validate()?;
    let dir = &config.cache_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (group, domain) = build_genus2_octagon()?;
    let [group_name, mesh_name, basis_name] = artifact_names(config, group.vertex_radius);
    let mut statuses = Vec::new();
    let mut warnings = Vec::new();
    let l = config.truncation_length;

    let records = cached(
        dir,
        &group_name,
        |text| {
            let c: GroupCache = serde_json::from_str(text).map_err(|e| Error::parse("group cache", e))?;
            if c.max_word_length != l || c.vertex_radius != group.vertex_radius {
                return Err(Error::parse("group cache", "key mismatch"));
            }
            Ok(c)
        },
        || {
            let elements = enumerate_group(&group, l, DEFAULT_ELEMENT_CAP)?;
            let c = GroupCache::new(&group, l, &elements);
            let text = to_json(&c)?;
            Ok((c, text))
        },
        &mut statuses,
        &mut warnings,
    )?;
    let bank = Arc::new(SeriesBank::from_elements(
        l,
        records.elements().into_iter().map(|e| e.map).collect(),
    ));

    let h = config.h;
    let mesh = cached(
        dir,
        &mesh_name,
        |text| {
            let m = SurfaceMesh::from_text(text)?;
            if m.h != h {
                return Err(Error::parse("mesh cache", "key mismatch"));
            }
            Ok(m)
        },
        || {
            let m = mesh_domain(&group, &domain, h)?;
            let text = m.to_text();
            Ok((m, text))
        },
        &mut statuses,
        &mut warnings,
    )?;

    let surface = Surface::from_parts(group, domain, mesh, bank.clone());
    let norm = config.normalization;
    let basis = cached(
        dir,
        &basis_name,
        |text| {
            let d: BasisDescriptor = serde_json::from_str(text).map_err(|e| Error::parse("basis cache", e))?;
            if d.truncation_length != l || d.normalization.tag() != norm.as_str() {
                return Err(Error::parse("basis cache", "key mismatch"));
            }
            basis_from_descriptor(bank.clone(), &d)
        },
        || {
            let raw = surface.raw_basis();
            let b = match norm {
                NormTag::Raw => raw,
                NormTag::Wp => surface.orthonormalize_wp(&raw)?,
                NormTag::PointD => surface.normalize_pointwise_d(&raw, surface.domain.centroid())?,
            };
            let text = to_json(&b.descriptor())?;
            Ok((b, text))
        },
        &mut statuses,
        &mut warnings,
    )?;

    Ok(Build {
        surface,
        basis,
        artifacts: statuses,
        warnings,
    })
}
