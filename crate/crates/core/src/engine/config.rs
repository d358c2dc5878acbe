//! Engine hyperparameters, their validation, and the named ablation presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::jitter::JitterRanges;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Random,
    Targeted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleAware {
    pub enabled: bool,
    /// Relative jitter applied to the sampled target side length.
    pub jitter: [f64; 2],
}

impl Default for ScaleAware {
    fn default() -> Self {
        Self {
            enabled: false,
            jitter: [0.8, 1.2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Blend {
    Off,
    Fixed { kernel: u32, sigma: f64 },
    Random { kernel: [u32; 2], sigma: [f64; 2] },
}

/// Mirrors the JSON config file; every key is optional and falls back to
/// [`OcpConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcpConfig {
    pub p_cp: f64,
    pub n_basket: usize,
    pub r_paste: [u32; 2],
    pub placement: Placement,
    pub targeted_expand: f64,
    pub min_size_ratio: f64,
    pub scale_aware: ScaleAware,
    pub blend: Blend,
    pub jitter: JitterRanges,
    pub visibility_threshold: f64,
    pub min_visible_px: u64,
    pub paste_category_ids: Vec<u64>,
    pub seed: u64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            p_cp: 0.8,
            n_basket: 3,
            r_paste: [1, 3],
            placement: Placement::Targeted,
            targeted_expand: 0.3,
            min_size_ratio: 0.03,
            scale_aware: ScaleAware::default(),
            blend: Blend::Off,
            jitter: JitterRanges::default(),
            visibility_threshold: 0.10,
            min_visible_px: 16,
            paste_category_ids: vec![1],
            seed: 0,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(ConfigError(format!("{name} must be in [0, 1], got {v}")));
    }
    Ok(())
}

fn ordered(name: &str, [lo, hi]: [f64; 2]) -> Result<(), ConfigError> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(ConfigError(format!(
            "{name} must satisfy lo <= hi, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl OcpConfig {
    /// Parses a JSON config document and validates it.
    pub fn from_json(raw: &str) -> Result<Self, ConfigError> {
        let config: OcpConfig =
            serde_json::from_str(raw).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        unit_interval("p_cp", self.p_cp)?;
        if self.n_basket == 0 {
            return Err(ConfigError("n_basket must be positive".into()));
        }
        let [lo, hi] = self.r_paste;
        if lo > hi {
            return Err(ConfigError(format!(
                "r_paste must satisfy lo <= hi, got [{lo}, {hi}]"
            )));
        }
        if !(self.targeted_expand >= 0.0) || !self.targeted_expand.is_finite() {
            return Err(ConfigError(format!(
                "targeted_expand must be non-negative, got {}",
                self.targeted_expand
            )));
        }
        if !(0.0..1.0).contains(&self.min_size_ratio) {
            return Err(ConfigError(format!(
                "min_size_ratio must be in [0, 1), got {}",
                self.min_size_ratio
            )));
        }
        ordered("scale_aware.jitter", self.scale_aware.jitter)?;
        if self.scale_aware.jitter[0] <= 0.0 {
            return Err(ConfigError(format!(
                "scale_aware.jitter must be positive, got {:?}",
                self.scale_aware.jitter
            )));
        }
        match self.blend {
            Blend::Off => {}
            Blend::Fixed { kernel, sigma } => {
                if kernel == 0 || kernel % 2 == 0 {
                    return Err(ConfigError(format!(
                        "blend.kernel must be odd and >= 1, got {kernel}"
                    )));
                }
                if !(sigma > 0.0) {
                    return Err(ConfigError(format!(
                        "blend.sigma must be positive, got {sigma}"
                    )));
                }
            }
            Blend::Random {
                kernel: [klo, khi],
                sigma,
            } => {
                if klo > khi || klo == 0 || (klo..=khi).all(|k| k % 2 == 0) {
                    return Err(ConfigError(format!(
                        "blend.kernel must be an interval >= 1 containing an odd size, got [{klo}, {khi}]"
                    )));
                }
                ordered("blend.sigma", sigma)?;
                if sigma[0] <= 0.0 {
                    return Err(ConfigError(format!(
                        "blend.sigma must be positive, got {sigma:?}"
                    )));
                }
            }
        }
        self.jitter.validate()?;
        if !(self.visibility_threshold > 0.0 && self.visibility_threshold <= 1.0) {
            return Err(ConfigError(format!(
                "visibility_threshold must be in (0, 1], got {}",
                self.visibility_threshold
            )));
        }
        Ok(())
    }

    pub fn preset(p: Preset) -> Self {
        let basic = OcpConfig {
            n_basket: 10,
            r_paste: [1, 10],
            placement: Placement::Random,
            min_size_ratio: 0.0,
            jitter: JitterRanges::disabled(),
            ..OcpConfig::default()
        };
        let minsize = OcpConfig {
            min_size_ratio: 0.03,
            ..basic.clone()
        };
        match p {
            Preset::Basic => basic,
            Preset::MinSize => minsize,
            Preset::ScaleAware => OcpConfig {
                scale_aware: ScaleAware {
                    enabled: true,
                    ..ScaleAware::default()
                },
                ..minsize
            },
            Preset::BlendFixed => OcpConfig {
                blend: Blend::Fixed {
                    kernel: 5,
                    sigma: 1.5,
                },
                ..minsize
            },
            Preset::BlendRandom => OcpConfig {
                blend: Blend::Random {
                    kernel: [3, 9],
                    sigma: [0.5, 3.0],
                },
                ..minsize
            },
            Preset::Targeted => OcpConfig {
                n_basket: 3,
                r_paste: [1, 3],
                placement: Placement::Targeted,
                ..basic
            },
            Preset::Ocp => OcpConfig::default(),
        }
    }
}

/// One named configuration per ablation row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Random placement, `r_paste = [1, 10]`, no add-ons.
    Basic,
    /// Basic plus the minimum-size filter.
    MinSize,
    /// Minimum size plus scale-aware pasting.
    ScaleAware,
    /// Minimum size plus fixed Gaussian blending.
    BlendFixed,
    /// Minimum size plus per-paste random blending.
    BlendRandom,
    /// Basic at `r_paste = [1, 3]` with targeted placement.
    Targeted,
    /// Targeted placement, instance jitter and minimum size at `r_paste = [1, 3]`.
    Ocp,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Basic,
        Preset::MinSize,
        Preset::ScaleAware,
        Preset::BlendFixed,
        Preset::BlendRandom,
        Preset::Targeted,
        Preset::Ocp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Basic => "basic",
            Preset::MinSize => "minsize",
            Preset::ScaleAware => "scale-aware",
            Preset::BlendFixed => "blend-fixed",
            Preset::BlendRandom => "blend-random",
            Preset::Targeted => "targeted",
            Preset::Ocp => "ocp",
        }
    }

    pub fn config(self) -> OcpConfig {
        OcpConfig::preset(self)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                ConfigError(format!(
                    "unknown preset '{s}', expected one of: {}",
                    names.join(", ")
                ))
            })
    }
}
