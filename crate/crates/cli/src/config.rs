use std::path::{Path, PathBuf};

use piqflow_core::cleaning::CleaningConfig;
use piqflow_core::predictor::TrainMode;
use piqflow_core::screening::ScreeningConfig;
use piqflow_service::ServiceConfig;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const ENV_VAR: &str = "PIQFLOW_CONFIG";

/// Defaults loaded from the TOML file named by `PIQFLOW_CONFIG`. Command-line
/// flags take precedence over every value here.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub model: Option<PathBuf>,
    pub screening: ScreeningConfig,
    pub cleaning: CleaningConfig,
    pub analyze: AnalyzeSection,
    pub crop: CropSection,
    pub split: SplitSection,
    pub train: TrainSection,
    pub map: MapSection,
    pub service: ServiceConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub splits: Option<usize>,
    pub bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropSection {
    pub fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub proportions: Option<[f64; 3]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub mode: Option<TrainMode>,
    pub hidden_dim: Option<usize>,
    pub epochs: Option<usize>,
    pub steps_per_epoch: Option<usize>,
    pub base_lr: Option<f64>,
    pub l2: Option<f64>,
    pub ridge_lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub tile: Option<u32>,
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn from_env() -> CliResult<Self> {
        match std::env::var_os(ENV_VAR) {
            Some(path) if !path.is_empty() => Self::load(Path::new(&path)),
            _ => Ok(Self::default()),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
    }

    pub fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        flag.or(self.seed)
            .ok_or_else(|| CliError::validation("--seed is required (or set `seed` in the config file)"))
    }

    pub fn model_path(&self, flag: Option<PathBuf>) -> CliResult<PathBuf> {
        flag.or_else(|| self.model.clone())
            .ok_or_else(|| CliError::validation("--model is required (or set `model` in the config file)"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_parse() {
        let cfg: FileConfig = toml::from_str(
            r#"
            seed = 7
            [screening]
            repeat_tolerance = 25.0
            [train]
            mode = "ridge"
            epochs = 3
            [split]
            proportions = [0.5, 0.25, 0.25]
            [service]
            bind = "0.0.0.0:9000"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed(None).unwrap(), 7);
        assert_eq!(cfg.seed(Some(3)).unwrap(), 3);
        assert_eq!(cfg.train.mode, Some(TrainMode::Ridge));
        assert_eq!(cfg.screening.repeat_tolerance, 25.0);
        assert_eq!(cfg.service.bind, "0.0.0.0:9000");
        assert_eq!(cfg.service.max_frames, ServiceConfig::default().max_frames);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("sede = 1").is_err());
        assert!(toml::from_str::<FileConfig>("[map]\ntiles = 3").is_err());
    }

    #[test]
    fn missing_seed_is_validation() {
        let err = FileConfig::default().seed(None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
