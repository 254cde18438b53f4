use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cuechord_core::boundary::{SchedulerParams, DEFAULT_MAX_OFFSET_S, DEFAULT_SENSITIVITY_S};
use cuechord_core::chord::{DEFAULT_BOOST_GAIN, DEFAULT_DROPOUT_RATE, DEFAULT_SIMULTANEITY_EPS_MS};
use cuechord_core::emotion::{SdScaling, DEFAULT_TARGET_MAX};
use cuechord_core::generate::{SamplingParams, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE, DEFAULT_TOP_K};
use cuechord_core::scene::{DEFAULT_MIN_GAP_S, DEFAULT_SCENE_THRESHOLD};
use cuechord_core::token::{MAX_SHIFT_MS, RESOLUTION_MS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub temperature: f64,
    /// 0 keeps every token.
    pub top_k: usize,
    pub seed: u64,
    pub max_tokens: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            temperature: DEFAULT_TEMPERATURE,
            top_k: DEFAULT_TOP_K,
            seed: 0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

impl SamplingConfig {
    pub fn params(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.temperature,
            top_k: (self.top_k > 0).then_some(self.top_k),
            seed: self.seed,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// ffmpeg binary; the environment variable and then `ffmpeg` on PATH are
    /// tried when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ffmpeg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub resolution_ms: u32,
    pub max_shift_ms: u32,
    pub min_gap_s: f64,
    pub sensitivity_s: f64,
    pub max_offset_s: f64,
    pub target_max: f64,
    pub sd_scaling: SdScaling,
    pub dropout_rate: f64,
    pub boost_gain: u8,
    pub simultaneity_eps_ms: u64,
    pub scene_threshold: f64,
    pub key_root: u8,
    pub sampling: SamplingConfig,
    pub paths: PathsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution_ms: RESOLUTION_MS,
            max_shift_ms: MAX_SHIFT_MS,
            min_gap_s: DEFAULT_MIN_GAP_S,
            sensitivity_s: DEFAULT_SENSITIVITY_S,
            max_offset_s: DEFAULT_MAX_OFFSET_S,
            target_max: DEFAULT_TARGET_MAX,
            sd_scaling: SdScaling::Scaled,
            dropout_rate: DEFAULT_DROPOUT_RATE,
            boost_gain: DEFAULT_BOOST_GAIN,
            simultaneity_eps_ms: DEFAULT_SIMULTANEITY_EPS_MS,
            scene_threshold: DEFAULT_SCENE_THRESHOLD,
            key_root: 60,
            sampling: SamplingConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        // the token vocabulary fixes both values
        if self.resolution_ms != RESOLUTION_MS || self.max_shift_ms != MAX_SHIFT_MS {
            bail!(
                "resolution_ms and max_shift_ms are fixed by the token vocabulary at {RESOLUTION_MS} and {MAX_SHIFT_MS}"
            );
        }
        let positive = [
            ("min_gap_s", self.min_gap_s),
            ("sensitivity_s", self.sensitivity_s),
            ("max_offset_s", self.max_offset_s),
            ("target_max", self.target_max),
            ("scene_threshold", self.scene_threshold),
            ("sampling.temperature", self.sampling.temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if self.target_max > 1.0 {
            bail!("target_max must be at most 1, got {}", self.target_max);
        }
        if !(0.0..=1.0).contains(&self.dropout_rate) {
            bail!("dropout_rate must lie in [0, 1], got {}", self.dropout_rate);
        }
        self.scheduler()?;
        self.sampling.params().validate()?;
        Ok(())
    }

    pub fn scheduler(&self) -> anyhow::Result<SchedulerParams> {
        Ok(SchedulerParams::new(self.sensitivity_s, self.max_offset_s)?)
    }
}
