//! Run configuration: defaults, config-file loading, flag overrides, and the
//! reproducibility hash embedded in every output file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spinphonon::bath::{EffectiveMethod, Flavor};
use spinphonon::dynamics::ModeSource;

/// Fully resolved run parameters. Execution-only knobs (`jobs`, `out`) are
/// excluded from the reproducibility hash so results are byte-identical
/// across worker counts and output locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub temps_k: Vec<f64>,
    pub fields_t: Vec<f64>,
    pub flavor: Flavor,
    pub broadening_cm1: f64,
    pub sv_threshold: f64,
    pub secular: bool,
    pub cross_correlations: bool,
    pub method: ModeSource,
    pub effective_method: EffectiveMethod,
    pub cutoff_frac: f64,
    pub compare_tolerance: f64,
    pub spin: f64,
    pub seed: u64,
    pub grid_points: usize,
    // Synthetic-dataset generation.
    pub synth_modes: usize,
    pub synth_freq_min_cm1: f64,
    pub synth_freq_max_cm1: f64,
    pub synth_grad_sigma: f64,
    pub synth_field_t: [f64; 3],
    // Trajectory / oracle windows.
    pub trajectory: bool,
    pub traj_span_t1: f64,
    pub traj_points: usize,
    pub oracle_levels: usize,
    pub oracle_span_ps: f64,
    // Execution-only (not hashed).
    pub jobs: Option<usize>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            temps_k: vec![300.0],
            fields_t: vec![1.0],
            flavor: Flavor::Quantum,
            broadening_cm1: 16.0,
            sv_threshold: spinphonon::embed::DEFAULT_SV_THRESHOLD,
            secular: true,
            cross_correlations: false,
            method: ModeSource::Full,
            effective_method: EffectiveMethod::Exact,
            cutoff_frac: 0.35,
            compare_tolerance: 0.01,
            spin: 0.5,
            seed: 42,
            grid_points: 8192,
            synth_modes: 50,
            synth_freq_min_cm1: 50.0,
            synth_freq_max_cm1: 1600.0,
            synth_grad_sigma: 1e-3,
            synth_field_t: [0.0, 0.0, 1.0],
            trajectory: false,
            traj_span_t1: 3.0,
            traj_points: 200,
            oracle_levels: 0,
            oracle_span_ps: 1000.0,
            jobs: None,
            out: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Load a TOML or JSON config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .with_context(|| format!("invalid JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("invalid TOML config {}", path.display()))?
        };
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temps_k.is_empty() {
            bail!("temperature list is empty");
        }
        if self.fields_t.is_empty() {
            bail!("field list is empty");
        }
        if self.broadening_cm1 <= 0.0 || self.broadening_cm1.is_nan() {
            bail!("broadening must be positive, got {}", self.broadening_cm1);
        }
        if self.grid_points < 16 {
            bail!("grid needs at least 16 points");
        }
        Ok(())
    }

    /// Reproducibility hash over the physics-relevant configuration plus the
    /// dataset file content. Excludes `jobs` and `out`.
    pub fn reproducibility_hash(&self, command: &str) -> Result<String> {
        let mut hashed = self.clone();
        hashed.jobs = None;
        hashed.out = PathBuf::new();
        let dataset_hash = match &self.dataset {
            Some(path) => {
                let bytes = std::fs::read(path)
                    .with_context(|| format!("cannot read dataset {}", path.display()))?;
                fnv1a64(&bytes)
            }
            None => 0,
        };
        hashed.dataset = None;
        let canonical = serde_json::to_string(&hashed).expect("config serializes");
        let mut h = fnv1a64(canonical.as_bytes());
        h ^= dataset_hash.rotate_left(17);
        h = h.wrapping_mul(0x100000001b3).wrapping_add(fnv1a64(command.as_bytes()));
        Ok(format!("{h:016x}"))
    }
}

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn hash_ignores_jobs_and_out() {
        let a = RunConfig::default();
        let b = RunConfig {
            jobs: Some(7),
            out: PathBuf::from("/elsewhere"),
            ..RunConfig::default()
        };
        assert_eq!(
            a.reproducibility_hash("relax").unwrap(),
            b.reproducibility_hash("relax").unwrap()
        );
    }

    #[test]
    fn hash_tracks_physics_fields() {
        let a = RunConfig::default();
        let b = RunConfig {
            broadening_cm1: 8.0,
            ..RunConfig::default()
        };
        assert_ne!(
            a.reproducibility_hash("relax").unwrap(),
            b.reproducibility_hash("relax").unwrap()
        );
    }

    #[test]
    fn toml_roundtrip() {
        let config = RunConfig::default();
        let text = toml::to_string(&config).unwrap();
        let dir = std::env::temp_dir().join("spd-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.toml");
        std::fs::write(&path, &text).unwrap();
        let loaded = RunConfig::from_file(&path).unwrap();
        assert_eq!(loaded.temps_k, config.temps_k);
        assert_eq!(loaded.seed, config.seed);
    }
}
