//! Config file schema. Every field is optional; command-line flags win over the
//! file and the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spoga::arch::LinkBudgetParams;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdcKind {
    Ideal,
    Quantized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Paper,
    Estimate,
    Both,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub sequential: Option<bool>,
    pub cores: Option<usize>,
    pub costs: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub log_fps: Option<bool>,
    pub occupancy_gating: Option<bool>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub scalability: ScalabilitySection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub trials: Option<u64>,
    pub gemm_jobs: Option<u64>,
    pub exhaustive: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub model: Option<String>,
    pub archs: Option<Vec<String>>,
    pub data_rate: Option<u32>,
    pub laser_power: Option<f64>,
    pub functional: Option<bool>,
    pub adc: Option<AdcKind>,
    pub adc_bits: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub models: Option<Vec<String>>,
    pub archs: Option<Vec<String>>,
    pub reference: Option<String>,
    pub iso_area: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalabilitySection {
    pub source: Option<Source>,
    pub rates: Option<Vec<f64>>,
    pub powers: Option<Vec<f64>>,
    pub link_budget: Option<LinkBudgetParams>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// First of flag, file value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Boolean switches can only be turned on from the command line.
pub fn switch(flag: bool, file: Option<bool>) -> bool {
    flag || file.unwrap_or(false)
}

/// Output directory: flag, then config file, then `SPOGA_OUT_DIR`, then `spoga-out`.
pub fn out_dir(flag: Option<PathBuf>, file: Option<PathBuf>) -> PathBuf {
    flag.or(file)
        .or_else(|| std::env::var_os("SPOGA_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("spoga-out"))
}
