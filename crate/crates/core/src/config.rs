//! Run configuration: one JSON document naming the family, scan region,
//! loops and evolution settings.

use std::collections::BTreeMap;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::branches::SortKey;
use crate::dynamics::EvolutionConfig;
use crate::error::{Error, Result};
use crate::family::{FamilyFile, MatrixFamily};
use crate::path::Path;
use crate::scenarios::builtin_loops;
use crate::singular::Region;

/// A built-in name, a path to a family file, or an inline family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySource {
    Reference(String),
    Inline(FamilyFile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySource,
    pub region: Region,
    pub grid_n: usize,
    pub key: SortKey,
    /// Loops by name; these extend and override the built-in ones.
    pub paths: BTreeMap<String, Path>,
    pub evolution: EvolutionConfig,
    pub out: PathBuf,
    /// Directory against which relative file references resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: FamilySource::Reference("paper4".into()),
            region: Region::default(),
            grid_n: 200,
            key: SortKey::ReAsc,
            paths: BTreeMap::new(),
            evolution: EvolutionConfig::default(),
            out: PathBuf::from("out"),
            base_dir: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
        if cfg.out.is_relative() {
            cfg.out = cfg.base_dir.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.region.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.grid_n < 16 {
            return Err(Error::Config(format!("grid_n must be at least 16, got {}", self.grid_n)));
        }
        let ev = &self.evolution;
        if ev.omega == 0.0 || !ev.omega.is_finite() || !(ev.rtol > 0.0) || !(ev.atol > 0.0) {
            return Err(Error::Config("evolution needs nonzero finite omega and positive tolerances".into()));
        }
        for (name, p) in &self.paths {
            if !p.is_closed() {
                return Err(Error::Config(format!("path `{name}` is not closed")));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<MatrixFamily> {
        let r = match &self.family {
            FamilySource::Reference(name) if name == "paper4" => MatrixFamily::resolve(name),
            FamilySource::Reference(file) => {
                let p = FsPath::new(file);
                let full = if p.is_relative() { self.base_dir.join(p) } else { p.to_path_buf() };
                MatrixFamily::load(&full)
            }
            FamilySource::Inline(spec) => MatrixFamily::from_file_spec("inline", spec.clone()),
        };
        r.map_err(|e| Error::Config(format!("family: {e}")))
    }

    /// Built-in loops overlaid with the configured ones.
    pub fn loops(&self) -> BTreeMap<String, Path> {
        let mut all = builtin_loops();
        all.extend(self.paths.iter().map(|(k, v)| (k.clone(), v.clone())));
        all
    }

    pub fn find_loop(&self, name: &str) -> Result<Path> {
        self.loops().remove(name).ok_or_else(|| Error::Config(format!("no loop named `{name}`")))
    }

    /// Evolution settings with the run's sort key.
    pub fn evolution_config(&self) -> EvolutionConfig {
        EvolutionConfig { key: self.key, ..self.evolution.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.grid_n, 200);
        assert_eq!(cfg.region, Region::square(3.0));
        assert_eq!(cfg.family().unwrap().dim(), 4);
        assert!(cfg.loops().contains_key("loop4"));
    }

    #[test]
    fn full_document() {
        let text = r#"{
            "family": {"n": 2, "params": {"g": [1, 0]}, "entries": [["i*g", "kappa"], ["kappa", "-i*g"]]},
            "region": {"re": [-2, 2], "im": [-1, 1]},
            "grid_n": 64,
            "key": "im_desc",
            "paths": {"ring": {"segments": [{"type": "circle_arc", "center": [1, 0], "radius": 0.2, "start": 0, "end": 6.283185307179586}]}},
            "evolution": {"omega": -0.001, "samples": 10},
            "out": "results"
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.key, SortKey::ImDesc);
        assert_eq!(cfg.evolution_config().key, SortKey::ImDesc);
        assert_eq!(cfg.evolution.omega, -0.001);
        assert_eq!(cfg.evolution.rtol, 1e-8);
        assert!(cfg.find_loop("ring").is_ok());
        assert_eq!(cfg.family().unwrap().dim(), 2);
    }

    #[test]
    fn invalid_documents() {
        for bad in [
            r#"{"grid_n": 4}"#,
            r#"{"unknown": 1}"#,
            r#"{"region": {"re": [1, -1], "im": [0, 1]}}"#,
            r#"{"evolution": {"omega": 0}}"#,
            r#"{"paths": {"open": {"segments": [{"type": "line", "from": [0, 0], "to": [1, 0]}]}}}"#,
            "not json",
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
        let cfg = RunConfig { family: FamilySource::Reference("/nonexistent/family.json".into()), ..Default::default() };
        assert!(matches!(cfg.family(), Err(Error::Config(_))));
        assert!(matches!(cfg.find_loop("nope"), Err(Error::Config(_))));
    }
}
