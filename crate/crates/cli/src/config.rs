//! Flat TOML campaign configuration with an explicit schema version.

use std::fs;
use std::path::{Path, PathBuf};

use lazyattack::models::BlobParams;
use lazyattack::{AttackConfig, ImageSpec};
use serde::{Deserialize, Serialize};

use crate::formats::FormatError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Untargeted,
    Targeted,
}

impl ModeKind {
    pub fn name(self) -> &'static str {
        match self {
            ModeKind::Untargeted => "untargeted",
            ModeKind::Targeted => "targeted",
        }
    }
}

impl std::str::FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "untargeted" => Ok(ModeKind::Untargeted),
            "targeted" => Ok(ModeKind::Targeted),
            _ => Err(format!("unknown mode {s:?} (untargeted, targeted)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetRule {
    /// Uniform over the classes other than the label, seeded per image.
    RandomPerImage,
}

/// Every key is optional in the file except `schema_version`; absent keys
/// take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub mode: ModeKind,
    pub epsilon: f64,
    pub initial_k: usize,
    pub batch_size: usize,
    pub max_queries: u64,
    pub max_rounds: usize,
    pub clip: bool,
    pub seed: u64,
    /// Number of correctly classified images to attack.
    pub images: usize,
    pub target_rule: TargetRule,
    pub model: Option<PathBuf>,
    pub data_images: Option<PathBuf>,
    pub data_labels: Option<PathBuf>,
    /// Synthetic data, used when no IDX files are named. The test split is
    /// drawn with `synthetic_sample_seed`.
    pub synthetic_classes: usize,
    pub synthetic_height: usize,
    pub synthetic_width: usize,
    pub synthetic_channels: usize,
    pub synthetic_seed: u64,
    pub synthetic_sample_seed: u64,
    pub pgd_steps: usize,
    /// Defaults to `2.5 ε / pgd_steps`.
    pub pgd_step_size: Option<f64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let attack = AttackConfig::default();
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            mode: ModeKind::Untargeted,
            epsilon: attack.epsilon,
            initial_k: attack.initial_k,
            batch_size: attack.batch_size,
            max_queries: attack.max_queries,
            max_rounds: attack.max_rounds,
            clip: attack.clip,
            seed: 0,
            images: 100,
            target_rule: TargetRule::RandomPerImage,
            model: None,
            data_images: None,
            data_labels: None,
            synthetic_classes: 10,
            synthetic_height: 28,
            synthetic_width: 28,
            synthetic_channels: 1,
            synthetic_seed: 0,
            synthetic_sample_seed: 1,
            pgd_steps: 20,
            pgd_step_size: None,
        }
    }
}

/// Where a campaign's images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Synthetic {
        classes: usize,
        spec: ImageSpec,
        seed: u64,
        sample_seed: u64,
        params: BlobParams,
    },
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, FormatError> {
        // Version first, so an unknown schema is reported as such rather than
        // as an unknown key.
        #[derive(Deserialize)]
        struct Version {
            schema_version: Option<u32>,
        }
        let malformed = |e: toml::de::Error| FormatError::Malformed {
            path: path.to_owned(),
            offset: e.span().map_or(0, |s| s.start as u64),
            msg: e.message().to_string(),
        };
        let schema = |msg: String| FormatError::Schema {
            path: path.to_owned(),
            msg,
        };
        let version: Version = toml::from_str(text).map_err(malformed)?;
        match version.schema_version {
            Some(CONFIG_SCHEMA_VERSION) => {}
            Some(v) => return Err(schema(format!("schema_version {v}, expected {CONFIG_SCHEMA_VERSION}"))),
            None => return Err(schema("missing schema_version".into())),
        }
        let cfg: Self = toml::from_str(text).map_err(malformed)?;
        cfg.validate().map_err(schema)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialise")
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.initial_k == 0 || !self.initial_k.is_power_of_two() {
            return Err(format!("initial_k must be a power of two, got {}", self.initial_k));
        }
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if self.images == 0 {
            return Err("images must be positive".into());
        }
        if self.pgd_steps == 0 {
            return Err("pgd_steps must be positive".into());
        }
        if let Some(s) = self.pgd_step_size {
            if !(s > 0.0 && s.is_finite()) {
                return Err(format!("pgd_step_size must be positive, got {s}"));
            }
        }
        if self.data_images.is_some() != self.data_labels.is_some() {
            return Err("data_images and data_labels go together".into());
        }
        if self.data_images.is_none() && self.synthetic_classes < 2 {
            return Err("synthetic data needs at least two classes".into());
        }
        Ok(())
    }

    pub fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            epsilon: self.epsilon,
            initial_k: self.initial_k,
            batch_size: self.batch_size,
            max_queries: self.max_queries,
            max_rounds: self.max_rounds,
            clip: self.clip,
            stop_on_success: true,
        }
    }

    pub fn pgd_step(&self) -> f64 {
        self.pgd_step_size.unwrap_or(2.5 * self.epsilon / self.pgd_steps as f64)
    }

    pub fn data_source(&self) -> Result<DataSource, String> {
        match (&self.data_images, &self.data_labels) {
            (Some(images), Some(labels)) => Ok(DataSource::Idx {
                images: images.clone(),
                labels: labels.clone(),
            }),
            (None, None) => Ok(DataSource::Synthetic {
                classes: self.synthetic_classes,
                spec: ImageSpec::new(self.synthetic_height, self.synthetic_width, self.synthetic_channels)
                    .map_err(|e| e.to_string())?,
                seed: self.synthetic_seed,
                sample_seed: self.synthetic_sample_seed,
                params: BlobParams::default(),
            }),
            _ => Err("data_images and data_labels go together".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let cfg = CampaignConfig {
            mode: ModeKind::Targeted,
            epsilon: 0.3,
            model: Some("m.json".into()),
            ..CampaignConfig::default()
        };
        let back = CampaignConfig::parse(&cfg.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, cfg);
        let minimal = CampaignConfig::parse("schema_version = 1\n", Path::new("c.toml")).unwrap();
        assert_eq!(minimal, CampaignConfig::default());
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("c.toml");
        assert!(matches!(
            CampaignConfig::parse("epsilon = 0.1", p),
            Err(FormatError::Schema { .. })
        ));
        assert!(matches!(
            CampaignConfig::parse("schema_version = 2", p),
            Err(FormatError::Schema { .. })
        ));
        let e = CampaignConfig::parse("schema_version = 1\nepsilon = \"x\"\n", p).unwrap_err();
        assert!(
            matches!(e, FormatError::Malformed { offset, .. } if offset >= 19),
            "{e}"
        );
        assert!(CampaignConfig::parse("schema_version = 1\nbogus = 3\n", p).is_err());
        assert!(CampaignConfig::parse("schema_version = 1\nepsilon = -1.0\n", p).is_err());
        assert!(CampaignConfig::parse("schema_version = 1\ninitial_k = 3\n", p).is_err());
        assert!(CampaignConfig::parse("schema_version = 1\ndata_images = \"x\"\n", p).is_err());
    }
}
