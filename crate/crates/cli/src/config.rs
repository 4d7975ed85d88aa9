//! TOML config schema shared by the subcommands.

use std::path::Path;

use serde::Deserialize;

use fraclab_core::digit_sets::DigitSetSpec;
use fraclab_core::selfsimilar::Ifs;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub set: Option<SetConfig>,
    pub estimate: Option<EstimateConfig>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    /// "periodic", "blocks", or "ifs"
    pub kind: String,
    /// explicit digit positions as a bit string (periodic)
    pub prefix: Option<String>,
    pub pattern: Option<String>,
    /// first block start (blocks)
    pub first_start: Option<u64>,
    /// block-end ratio as [numerator, denominator]
    pub theta: Option<[u64; 2]>,
    /// next-start ratio as [numerator, denominator]
    pub rho: Option<[u64; 2]>,
    pub squared: Option<bool>,
    /// similarity maps [[ratio, translation], ...] (ifs)
    pub maps: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub n_lo: Option<u32>,
    pub n_hi: Option<u32>,
    pub eps: Option<f64>,
    pub min_len: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    pub alpha: Option<f64>,
    pub order: Option<u32>,
    pub ensemble: Option<u64>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub master_seed: Option<u64>,
}

pub enum SetSpec {
    Digit(DigitSetSpec),
    Ifs(Ifs),
}

pub struct EstimateParams {
    pub n_lo: u32,
    pub n_hi: u32,
    pub eps: f64,
    pub min_len: u32,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("reading {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("parsing {}: {e}", path.display()))
    }

    pub fn set(&self) -> Result<SetSpec, String> {
        let s = self.set.as_ref().ok_or("config needs a [set] table")?;
        match s.kind.as_str() {
            "periodic" => {
                let pattern = s.pattern.as_deref().ok_or("periodic set needs pattern")?;
                let spec = match s.prefix.as_deref().filter(|p| !p.is_empty()) {
                    Some(prefix) => DigitSetSpec::periodic_with_prefix(prefix, pattern),
                    None => DigitSetSpec::periodic(pattern),
                }
                .map_err(|e| e.to_string())?;
                Ok(SetSpec::Digit(spec))
            }
            "blocks" => {
                let spec = DigitSetSpec::geometric_blocks(
                    s.first_start.ok_or("blocks set needs first_start")?,
                    s.theta.map(|t| (t[0], t[1])).ok_or("blocks set needs theta")?,
                    s.rho.map(|r| (r[0], r[1])).unwrap_or((1, 1)),
                    s.squared.unwrap_or(false),
                )
                .map_err(|e| e.to_string())?;
                Ok(SetSpec::Digit(spec))
            }
            "ifs" => {
                let maps = s
                    .maps
                    .as_ref()
                    .ok_or("ifs set needs maps = [[r, t], ...]")?
                    .iter()
                    .map(|m| (m[0], m[1]))
                    .collect();
                Ok(SetSpec::Ifs(Ifs::new(maps).map_err(|e| e.to_string())?))
            }
            other => Err(format!("unknown set kind {other:?}")),
        }
    }

    pub fn estimate_params(&self) -> EstimateParams {
        let e = self.estimate;
        EstimateParams {
            n_lo: e.and_then(|e| e.n_lo).unwrap_or(8),
            n_hi: e.and_then(|e| e.n_hi).unwrap_or(16),
            eps: e.and_then(|e| e.eps).unwrap_or(0.25),
            min_len: e.and_then(|e| e.min_len).unwrap_or(8),
        }
    }

    pub fn experiment(&self) -> Result<&ExperimentSection, String> {
        self.experiment
            .as_ref()
            .ok_or_else(|| "config needs an [experiment] table".to_string())
    }
}
