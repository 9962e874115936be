//! File-backed run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::field::{OpticalConfig, DEFAULT_PIXEL_PITCH, WAVELENGTH_RED};
use crate::solvers::SolverConfig;
use crate::targeting::{RgbdScene, TargetingParams};

use super::scene::{load_scene, synthetic_scene};

/// Optics of one simulated channel and the scene channel it draws from.
pub type ChannelPlan = (OpticalConfig, usize);

/// Scene input: an image/depth pair on disk, or the built-in procedural
/// scene at `height`×`width` with `channels` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            image: None,
            depth: None,
            height: 256,
            width: 256,
            channels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpticsSection {
    /// One entry per simulated channel, meters.
    pub wavelengths: Vec<f64>,
    pub pixel_pitch: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            wavelengths: vec![WAVELENGTH_RED],
            pixel_pitch: DEFAULT_PIXEL_PITCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seeds every random choice of the run; overrides `solver.seed`.
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Add the odd-row π grating to exported holograms.
    pub grating: bool,
    pub scene: SceneSection,
    pub optics: OpticsSection,
    pub targeting: TargetingParams,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            grating: false,
            scene: SceneSection::default(),
            optics: OpticsSection::default(),
            targeting: TargetingParams::default(),
            solver: SolverConfig::default(),
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Parses `path`; relative scene paths are resolved against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for p in [&mut cfg.scene.image, &mut cfg.scene.depth].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| config_err(e.to_string()))
    }

    /// Applies a `dotted.key=value` override. Values are read as TOML
    /// scalars or arrays, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("override '{assignment}' is not key=value")))?;
        let key = key.trim();
        let mut root = toml::Value::try_from(&*self).map_err(|e| config_err(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, path) = parts.split_last().ok_or_else(|| config_err("empty override key"))?;
        let mut node = &mut root;
        for part in path {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(*part))
                .ok_or_else(|| config_err(format!("unknown config section '{part}' in '{key}'")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| config_err(format!("'{key}' does not name a field")))?;
        if !table.contains_key(*last) && !Self::optional_key(&parts) {
            return Err(config_err(format!("unknown config key '{key}'")));
        }
        table.insert((*last).to_string(), parse_scalar(raw.trim()));
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| config_err(format!("override '{key}': {e}")))?;
        Ok(())
    }

    fn optional_key(parts: &[&str]) -> bool {
        matches!(
            parts,
            ["scene", "image"] | ["scene", "depth"] | ["solver", "band_limit"]
        )
    }

    /// Checks field ranges and that referenced files exist.
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.targeting.validate()?;
        if self.optics.wavelengths.is_empty() {
            return Err(config_err("at least one wavelength is required"));
        }
        if self.optics.wavelengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(config_err("wavelengths must be positive"));
        }
        match (&self.scene.image, &self.scene.depth) {
            (Some(i), Some(d)) => {
                for p in [i, d] {
                    if !p.exists() {
                        return Err(config_err(format!("scene file {} does not exist", p.display())));
                    }
                }
            }
            (None, None) => {
                if self.scene.channels != 1 && self.scene.channels != 3 {
                    return Err(config_err("built-in scene has 1 or 3 channels"));
                }
                self.optics(0)?;
            }
            _ => return Err(config_err("scene.image and scene.depth must be given together")),
        }
        Ok(())
    }

    /// Solver settings with the run seed applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            seed: self.seed,
            ..self.solver.clone()
        }
    }

    /// Optics of channel `idx` at the configured scene size.
    pub fn optics(&self, idx: usize) -> Result<OpticalConfig> {
        let wavelength = *self
            .optics
            .wavelengths
            .get(idx)
            .ok_or_else(|| config_err(format!("no wavelength for channel {idx}")))?;
        OpticalConfig::new(wavelength, self.optics.pixel_pitch, self.scene.height, self.scene.width)
    }

    /// Loads the scene and pairs each wavelength with the scene channel it
    /// simulates. A grayscale scene is broadcast to every wavelength.
    pub fn load(&self) -> Result<(RgbdScene<f64>, Vec<ChannelPlan>)> {
        let scene = match (&self.scene.image, &self.scene.depth) {
            (Some(i), Some(d)) => load_scene(i, d)?,
            (None, None) => synthetic_scene(self.scene.height, self.scene.width, self.scene.channels)?,
            _ => return Err(config_err("scene.image and scene.depth must be given together")),
        };
        let (h, w) = scene.dims();
        let n = self.optics.wavelengths.len();
        let channels = scene.n_channels();
        if channels != 1 && channels != n {
            return Err(config_err(format!(
                "scene has {channels} channels but {n} wavelengths are configured"
            )));
        }
        let plan = self
            .optics
            .wavelengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                Ok((
                    OpticalConfig::new(l, self.optics.pixel_pitch, h, w)?,
                    if channels == 1 { 0 } else { i },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((scene, plan))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Algorithm;
    use crate::targeting::TargetingMode;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_toml_str("seed = 4\n[solver]\nalgorithm = \"gs\"\n[targeting]\nmode = \"naive\"\n")
            .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.solver.algorithm, Algorithm::Gs);
        assert_eq!(cfg.targeting.mode, TargetingMode::Naive);
        assert_eq!(cfg.solver.iterations, 200);
        assert_eq!(cfg.solver_config().seed, 4);
    }

    #[test]
    fn dotted_overrides() {
        let mut cfg = RunConfig::default();
        cfg.set("solver.learning_rate=0.05").unwrap();
        cfg.set("targeting.n_planes = 4").unwrap();
        cfg.set("optics.wavelengths=[6.39e-7, 5.15e-7]").unwrap();
        cfg.set("solver.regime=far").unwrap();
        cfg.set("solver.band_limit=true").unwrap();
        cfg.set("output_dir=results").unwrap();
        assert_eq!(cfg.solver.learning_rate, 0.05);
        assert_eq!(cfg.targeting.n_planes, 4);
        assert_eq!(cfg.optics.wavelengths.len(), 2);
        assert_eq!(cfg.solver.band_limit, Some(true));
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert!(cfg.set("solver.nope=1").is_err());
        assert!(cfg.set("solver.iterations=many").is_err());
        assert!(cfg.set("novalue").is_err());
    }

    #[test]
    fn type_errors_are_reported() {
        assert!(RunConfig::from_toml_str("seed = \"x\"").is_err());
    }

    #[test]
    fn grayscale_broadcasts_across_wavelengths() {
        let mut cfg = RunConfig::default();
        cfg.scene.height = 16;
        cfg.scene.width = 16;
        cfg.optics.wavelengths = vec![639e-9, 515e-9, 473e-9];
        let (scene, plan) = cfg.load().unwrap();
        assert_eq!(scene.n_channels(), 1);
        assert_eq!(plan.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0, 0, 0]);

        cfg.scene.channels = 3;
        let (_, plan) = cfg.load().unwrap();
        assert_eq!(plan.iter().map(|p| p.1).collect::<Vec<_>>(), vec![0, 1, 2]);

        cfg.optics.wavelengths = vec![639e-9, 515e-9];
        assert!(cfg.load().is_err());
    }

    #[test]
    fn missing_files_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.scene.image = Some("/nonexistent/a.png".into());
        assert!(cfg.validate().is_err());
        cfg.scene.depth = Some("/nonexistent/b.png".into());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[scene]\nimage = \"img.png\"\ndepth = \"d.png\"\n").unwrap();
        let cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.scene.image.unwrap(), dir.path().join("img.png"));
    }
}
