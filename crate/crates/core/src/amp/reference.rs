use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::AMP_WINDOW;
use crate::envs::{amp_state_dim, EnvName, EnvParams, Environment};
use crate::error::{Error, Result};
use crate::preference::PreferenceVector;
use crate::rng::RngStream;

/// Sidecar describing a binary window file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeta {
    pub env: EnvName,
    pub generator: String,
    pub generator_seed: u64,
    pub episodes: usize,
    pub shape: [usize; 2],
}

/// Sliding windows over scripted-controller trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDataset {
    pub meta: ReferenceMeta,
    pub windows: Array2<f32>,
}

fn scripted_episode(env: &mut Environment, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    env.reset(PreferenceVector::balanced());
    let mut frames = Vec::new();
    match env {
        Environment::Upright(e) => {
            e.set_state(std::f64::consts::PI + rng.uniform_range(-0.3, 0.3), rng.uniform_range(-0.5, 0.5));
            for _ in 0..e.config.horizon {
                let tau = e.scripted_torque();
                e.integrate(tau);
                frames.push(vec![crate::envs::wrap_angle(e.theta())]);
            }
        }
        Environment::Glide(e) => {
            e.set_velocity([rng.uniform_range(0.0, 1.5), rng.uniform_range(-0.5, 0.5)]);
            for _ in 0..e.config.horizon {
                let a = e.scripted_action();
                let step = e.step(&a)?;
                frames.push(e.velocity().to_vec());
                if step.done {
                    break;
                }
            }
        }
    }
    Ok(frames)
}

/// Rolls out the scripted controller `n_episodes` times from randomized
/// starts (disturbances off) and cuts every episode into overlapping
/// windows, `episode_length − AMP_WINDOW + 1` each.
pub fn generate_reference(
    name: EnvName,
    params: &EnvParams,
    rng: &RngStream,
    n_episodes: usize,
) -> Result<ReferenceDataset> {
    let params = params.with_disturbances(false);
    let mut env = Environment::new(name, &params, rng.split(0))?;
    let mut starts = rng.split(1);
    let dim = AMP_WINDOW * amp_state_dim(name);
    let mut flat = Vec::new();
    for _ in 0..n_episodes {
        let frames = scripted_episode(&mut env, &mut starts)?;
        for w in frames.windows(AMP_WINDOW) {
            flat.extend(w.iter().flatten().map(|&v| v as f32));
        }
    }
    let rows = flat.len() / dim;
    let windows = Array2::from_shape_vec((rows, dim), flat).expect("whole windows");
    let generator = match name {
        EnvName::Upright => "upright-energy-pump",
        EnvName::Glide => "glide-velocity-tracker",
    };
    Ok(ReferenceDataset {
        meta: ReferenceMeta {
            env: name,
            generator: generator.into(),
            generator_seed: rng.seed(),
            episodes: n_episodes,
            shape: [rows, dim],
        },
        windows,
    })
}

impl ReferenceDataset {
    pub fn len(&self) -> usize {
        self.windows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.nrows() == 0
    }

    /// Writes `<path>` (little-endian f32, row-major) and `<path>.json`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.windows.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let side = sidecar(path);
        fs::write(&side, serde_json::to_vec_pretty(&self.meta)?).map_err(|e| Error::io(&side, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = sidecar(path);
        let meta: ReferenceMeta = serde_json::from_slice(&fs::read(&side).map_err(|e| Error::io(&side, e))?)?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let [rows, cols] = meta.shape;
        if bytes.len() != rows * cols * 4 {
            return Err(Error::invalid(format!(
                "{}: expected {} bytes, found {}",
                path.display(),
                rows * cols * 4,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let windows = Array2::from_shape_vec((rows, cols), values).expect("checked length");
        Ok(Self { meta, windows })
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_count_and_determinism() {
        let p = EnvParams::default();
        let a = generate_reference(EnvName::Upright, &p, &RngStream::new(4), 3).unwrap();
        let b = generate_reference(EnvName::Upright, &p, &RngStream::new(4), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3 * (500 - (AMP_WINDOW - 1)));
        assert!(a.len() >= 1000);
        assert_eq!(a.windows.ncols(), AMP_WINDOW);
        let g = generate_reference(EnvName::Glide, &p, &RngStream::new(4), 1).unwrap();
        assert_eq!(g.windows.ncols(), 2 * AMP_WINDOW);
        assert_eq!(g.len(), 500 - (AMP_WINDOW - 1));
    }

    #[test]
    fn upright_reference_reaches_top() {
        let p = EnvParams::default();
        let d = generate_reference(EnvName::Upright, &p, &RngStream::new(9), 2).unwrap();
        let last = d.windows.row(d.len() - 1);
        assert!(last.iter().all(|v| v.abs() < 0.25));
    }

    #[test]
    fn binary_round_trip() {
        let p = EnvParams::default();
        let d = generate_reference(EnvName::Glide, &p, &RngStream::new(1), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.bin");
        d.save(&path).unwrap();
        assert!(dir.path().join("ref.bin.json").exists());
        assert_eq!(ReferenceDataset::load(&path).unwrap(), d);
    }
}
