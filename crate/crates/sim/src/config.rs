//! Scenario configuration, read from TOML.
//!
//! ```toml
//! framework = "II"
//! seed = 7
//! shape = "10,(5,5),10"
//! users = 4
//!
//! [events]
//! count = 200
//! request = 5
//! revoke = 1
//! update = 2
//!
//! [bloom]
//! target_fp = 1e-4
//! ```

use serde::{Deserialize, Serialize};
use treevault::actors::OwnerConfig;
use treevault::bloom::{choose_parameters, DEFAULT_BITS_PER_KEYWORD, DEFAULT_HASHES, MAX_HASHES};
use treevault::crypto::Profile;

use crate::error::{invalid, Result, SimError};
use crate::shape::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_framework")]
    pub framework: String,
    #[serde(default)]
    pub seed: u64,
    pub shape: String,
    /// Optional cross-check against the shape's file count.
    #[serde(default)]
    pub files: Option<usize>,
    #[serde(default = "default_users")]
    pub users: u32,
    #[serde(default)]
    pub events: EventMix,
    #[serde(default)]
    pub bloom: BloomConfig,
    /// Off only to reproduce the add-without-update leak.
    #[serde(default = "default_true")]
    pub add_by_update: bool,
}

/// Number of events and the relative weight of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventMix {
    pub count: u32,
    pub request: f64,
    pub revoke: f64,
    pub update: f64,
    pub add: f64,
    pub delete: f64,
}

impl Default for EventMix {
    fn default() -> Self {
        EventMix { count: 0, request: 1.0, revoke: 0.0, update: 0.0, add: 0.0, delete: 0.0 }
    }
}

impl EventMix {
    pub fn weights(&self) -> [f64; 5] {
        [self.request, self.revoke, self.update, self.add, self.delete]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BloomConfig {
    pub bits_per_keyword: Option<u64>,
    pub hashes: Option<u32>,
    /// Derives both of the above; excludes them.
    pub target_fp: Option<f64>,
}

fn default_framework() -> String {
    "I".into()
}

fn default_users() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

impl ScenarioConfig {
    pub fn new(profile: Profile, shape: &str, seed: u64) -> Self {
        ScenarioConfig {
            framework: profile.to_string(),
            seed,
            shape: shape.to_string(),
            files: None,
            users: default_users(),
            events: EventMix::default(),
            bloom: BloomConfig::default(),
            add_by_update: true,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ScenarioConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| SimError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn profile(&self) -> Result<Profile> {
        self.framework.parse().map_err(invalid)
    }

    pub fn parsed_shape(&self) -> Result<Shape> {
        Shape::parse(&self.shape)
    }

    pub fn validate(&self) -> Result<()> {
        self.profile()?;
        let shape = self.parsed_shape()?;
        let n = shape.file_count();
        if n == 0 {
            return Err(invalid("shape holds no files"));
        }
        if let Some(files) = self.files {
            if files != n {
                return Err(invalid(format!("files = {files} but shape {} holds {n}", self.shape)));
            }
        }
        if self.users == 0 {
            return Err(invalid("users must be at least 1"));
        }
        let w = self.events.weights();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(invalid("event weights must be finite and non-negative"));
        }
        if self.events.count > 0 && w.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("events requested but every weight is zero"));
        }
        self.owner_config().map(|_| ())
    }

    pub fn owner_config(&self) -> Result<OwnerConfig> {
        let b = &self.bloom;
        let (bits, hashes) = match b.target_fp {
            Some(t) => {
                if b.bits_per_keyword.is_some() || b.hashes.is_some() {
                    return Err(invalid("target_fp excludes bits_per_keyword and hashes"));
                }
                if !(t > 0.0 && t < 1.0) {
                    return Err(invalid("target_fp must lie in (0, 1)"));
                }
                let p = choose_parameters(1, t);
                (p.m, p.k)
            }
            None => (b.bits_per_keyword.unwrap_or(DEFAULT_BITS_PER_KEYWORD), b.hashes.unwrap_or(DEFAULT_HASHES as u32)),
        };
        if bits == 0 {
            return Err(invalid("bits_per_keyword must be at least 1"));
        }
        if hashes == 0 || hashes > MAX_HASHES as u32 {
            return Err(invalid(format!("hashes must lie in 1..={MAX_HASHES}")));
        }
        Ok(OwnerConfig { bits_per_keyword: bits, hashes, add_by_update: self.add_by_update })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let c = ScenarioConfig::from_toml(
            r#"
            framework = "II"
            seed = 9
            shape = "10,(5,5),10"
            files = 30
            users = 4
            [events]
            count = 50
            request = 3
            update = 1
            [bloom]
            target_fp = 1e-4
            "#,
        )
        .unwrap();
        assert_eq!(c.profile().unwrap(), Profile::FrameworkII);
        assert_eq!(c.events.count, 50);
        let o = c.owner_config().unwrap();
        assert_eq!((o.bits_per_keyword, o.hashes), (20, 14));
    }

    #[test]
    fn defaults() {
        let c = ScenarioConfig::from_toml("shape = \"3\"").unwrap();
        assert_eq!(c.profile().unwrap(), Profile::FrameworkI);
        assert_eq!(c.users, 1);
        assert_eq!(c.events.count, 0);
        let o = c.owner_config().unwrap();
        assert_eq!((o.bits_per_keyword, o.hashes, o.add_by_update), (20, 14, true));
    }

    #[test]
    fn rejects_invalid() {
        for bad in [
            "shape = \"3\"\nframework = \"III\"",
            "shape = \"0\"",
            "shape = \"3\"\nfiles = 4",
            "shape = \"3\"\nusers = 0",
            "shape = \"3\"\n[events]\ncount = 1\nrequest = 0",
            "shape = \"3\"\n[events]\nrequest = -1",
            "shape = \"3\"\n[bloom]\ntarget_fp = 2.0",
            "shape = \"3\"\n[bloom]\ntarget_fp = 0.01\nhashes = 3",
            "shape = \"3\"\n[bloom]\nhashes = 65",
            "shape = \"3\"\nunknown = 1",
            "seed = 1",
        ] {
            assert!(matches!(ScenarioConfig::from_toml(bad), Err(SimError::ConfigInvalid(_))), "{bad:?}");
        }
    }
}
