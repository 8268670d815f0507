use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Architecture, PolicyParams};
use crate::error::{Error, Result};

/// Saved policy: flat parameters, the architecture that reads them, and the
/// environment and configuration they were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub env: String,
    pub config_hash: String,
    pub architecture: Architecture,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn new(env: &str, config_hash: &str, params: &PolicyParams) -> Self {
        Checkpoint {
            env: env.to_string(),
            config_hash: config_hash.to_string(),
            architecture: params.architecture().clone(),
            theta: params.theta.clone(),
        }
    }

    pub fn params(&self) -> Result<PolicyParams> {
        PolicyParams::from_theta(self.architecture.clone(), self.theta.clone())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| Error::Usage(format!("cannot encode checkpoint: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::params::PolicyHead;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let arch = Architecture {
            obs_dim: 4,
            hidden: vec![8],
            head: PolicyHead::Gaussian { dim: 2 },
            input_scale: vec![2.0, 2.0, 2.5, 2.5],
        };
        let params = PolicyParams::init(arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let ck = Checkpoint::new("pointmass", "abc", &params);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.params().unwrap(), params);
    }
}
