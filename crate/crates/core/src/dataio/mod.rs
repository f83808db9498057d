//! File formats and the synthetic dataset generator.

mod generate;
mod oracle;

pub use generate::{
    oracle_stepper, press_profile, simulate_press, trajectory_rng, OracleConfig, PressPath,
};
pub use oracle::{MassSpring, Material, OracleStepper};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read_json, write_json};
use crate::mesh::Mesh;
use crate::simulate::Trajectory;

pub fn load_mesh(path: &Path) -> Result<Mesh> {
    let mesh: Mesh = read_json(path)?;
    mesh.check()?;
    Ok(mesh)
}

pub fn save_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    write_json(path, mesh)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let traj: Trajectory = read_json(path)?;
    traj.validate()?;
    Ok(traj)
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_json(path, traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::Parameter(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub split: Split,
    pub path_params: PressPath,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub generator: OracleConfig,
    pub trajectories: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let manifest: DatasetManifest = read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate(&base)?;
        Ok((manifest, base))
    }

    pub fn validate(&self, base: &Path) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.trajectories {
            if !seen.insert(&e.path) {
                return Err(Error::Data(format!("{} is listed more than once", e.path)));
            }
            if !base.join(&e.path).is_file() {
                return Err(Error::Data(format!("missing trajectory file {}", e.path)));
            }
        }
        Ok(())
    }

    pub fn paths(&self, base: &Path, split: Split) -> Vec<PathBuf> {
        self.trajectories
            .iter()
            .filter(|e| e.split == split)
            .map(|e| base.join(&e.path))
            .collect()
    }
}

/// Generates `counts` trajectories for train, valid and test into `dir` and
/// writes the manifest last.
pub fn generate_dataset(
    config: &OracleConfig,
    counts: [usize; 3],
    seed: u64,
    dir: &Path,
) -> Result<DatasetManifest> {
    config.validate()?;
    let splits = [Split::Train, Split::Valid, Split::Test];
    let mut jobs = Vec::new();
    for (split, &count) in splits.iter().zip(&counts) {
        for i in 0..count {
            jobs.push((*split, i));
        }
    }
    let run = |(k, &(split, i)): (usize, &(Split, usize))| -> Result<ManifestEntry> {
        let mut rng = trajectory_rng(seed, k as u64);
        let params = PressPath::sample(config, &mut rng);
        let traj = simulate_press(config, params)?;
        let name = format!(
            "{}_{i:03}.json",
            serde_json::to_value(split).unwrap().as_str().unwrap()
        );
        save_trajectory(&dir.join(&name), &traj)?;
        Ok(ManifestEntry {
            path: name,
            split,
            path_params: params,
        })
    };
    #[cfg(feature = "parallel")]
    let entries: Vec<ManifestEntry> = {
        use rayon::prelude::*;
        jobs.par_iter()
            .enumerate()
            .map(run)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let entries: Vec<ManifestEntry> = jobs.iter().enumerate().map(run).collect::<Result<_>>()?;
    let manifest = DatasetManifest {
        seed,
        generator: config.clone(),
        trajectories: entries,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests;
