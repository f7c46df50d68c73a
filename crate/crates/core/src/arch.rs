//! GEMM core organizations, the bundled scalability table, and a parameterized
//! optical link-budget estimator.
//!
//! The bundled table is the ground truth for (N, M). The link-budget solver is an
//! estimator for what-if sweeps; it is only expected to follow the table's trends,
//! never to reproduce its values.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order of the modulation, aggregation and weighting blocks in a GEMM core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Organization {
    Maw,
    Amw,
    Mwa,
}

impl Organization {
    pub const ALL: [Organization; 3] = [Organization::Maw, Organization::Amw, Organization::Mwa];

    pub fn as_str(self) -> &'static str {
        match self {
            Organization::Maw => "MAW",
            Organization::Amw => "AMW",
            Organization::Mwa => "MWA",
        }
    }

    /// Name of the published accelerator built on this organization.
    pub fn accelerator(self) -> &'static str {
        match self {
            Organization::Maw => "HOLYLIGHT",
            Organization::Amw => "DEAPCNN",
            Organization::Mwa => "SPOGA",
        }
    }

    pub fn is_bit_sliced_baseline(self) -> bool {
        self != Organization::Mwa
    }
}

impl fmt::Display for Organization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Organization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MAW" | "HOLYLIGHT" => Ok(Organization::Maw),
            "AMW" | "DEAPCNN" => Ok(Organization::Amw),
            "MWA" | "SPOGA" => Ok(Organization::Mwa),
            other => Err(Error::Config(format!(
                "unknown organization {other:?}; expected MAW/HOLYLIGHT, AMW/DEAPCNN or MWA/SPOGA"
            ))),
        }
    }
}

/// SPOGA core: dot-product units per core.
pub const SPOGA_DPUS_PER_CORE: usize = 16;
/// Laser power used when a SPOGA selector names no power.
pub const SPOGA_DEFAULT_LASER_DBM: f64 = 10.0;
pub const OPERAND_BITS: u32 = 4;

/// Structural parameters of one GEMM core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub name: String,
    pub organization: Organization,
    pub data_rate_gsps: u32,
    pub laser_power_dbm: Option<f64>,
    /// Maximum vector size per dot product (N).
    pub n_vector: usize,
    /// Dot products per time step per core (M).
    pub m_dot_products: usize,
    pub dpu_count: usize,
    pub operand_bits: u32,
}

impl ArchConfig {
    /// A core with explicit (N, M), outside the bundled table.
    pub fn custom(
        name: impl Into<String>,
        organization: Organization,
        data_rate_gsps: u32,
        n_vector: usize,
        m_dot_products: usize,
    ) -> Result<Self> {
        if data_rate_gsps == 0 || n_vector == 0 || m_dot_products == 0 {
            return Err(Error::Config(format!(
                "data rate, N and M must be positive (got {data_rate_gsps}, {n_vector}, {m_dot_products})"
            )));
        }
        Ok(ArchConfig {
            name: name.into(),
            organization,
            data_rate_gsps,
            laser_power_dbm: None,
            n_vector,
            m_dot_products,
            dpu_count: m_dot_products,
            operand_bits: OPERAND_BITS,
        })
    }

    pub fn data_rate_hz(&self) -> f64 {
        self.data_rate_gsps as f64 * 1e9
    }

    /// Parses a selector such as `SPOGA_10`, `HOLYLIGHT_5` or `SPOGA_10@5dBm`.
    pub fn from_selector(selector: &str) -> Result<Self> {
        ScalabilityTable::bundled().select(selector)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityEntry {
    pub architecture: String,
    pub organization: Organization,
    pub data_rate_gsps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser_power_dbm: Option<f64>,
    pub n: usize,
    pub m: usize,
}

impl ScalabilityEntry {
    fn key(&self) -> String {
        match self.laser_power_dbm {
            Some(p) => format!("{}/{}GS/s/{}dBm", self.organization, self.data_rate_gsps, p),
            None => format!("{}/{}GS/s", self.organization, self.data_rate_gsps),
        }
    }

    pub fn to_config(&self) -> ArchConfig {
        let name = match self.laser_power_dbm {
            Some(p) if self.organization == Organization::Mwa && p != SPOGA_DEFAULT_LASER_DBM => {
                format!("{}_{}@{}dBm", self.architecture, self.data_rate_gsps, p)
            }
            _ => format!("{}_{}", self.architecture, self.data_rate_gsps),
        };
        ArchConfig {
            name,
            organization: self.organization,
            data_rate_gsps: self.data_rate_gsps,
            laser_power_dbm: self.laser_power_dbm,
            n_vector: self.n,
            m_dot_products: self.m,
            dpu_count: self.m,
            operand_bits: OPERAND_BITS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalabilityTable {
    pub entry: Vec<ScalabilityEntry>,
}

const BUNDLED_TABLE: &str = include_str!("../data/scalability.toml");

impl ScalabilityTable {
    pub fn bundled() -> &'static ScalabilityTable {
        static TABLE: OnceLock<ScalabilityTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            ScalabilityTable::from_toml_str(BUNDLED_TABLE).expect("bundled scalability table parses")
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: ScalabilityTable = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map(|sp| s[..sp.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        for e in &table.entry {
            if e.n == 0 || e.m == 0 || e.data_rate_gsps == 0 {
                return Err(Error::Config(format!("scalability entry {} has a zero field", e.key())));
            }
        }
        Ok(table)
    }

    pub fn entries(&self) -> &[ScalabilityEntry] {
        &self.entry
    }

    fn valid_keys(&self) -> String {
        self.entry.iter().map(ScalabilityEntry::key).collect::<Vec<_>>().join(", ")
    }

    /// Exact row lookup. MAW/AMW rows carry no laser power, so it is ignored for them.
    pub fn lookup(&self, org: Organization, data_rate_gsps: u32, laser_power_dbm: Option<f64>) -> Result<ArchConfig> {
        let hit = self.entry.iter().find(|e| {
            e.organization == org
                && e.data_rate_gsps == data_rate_gsps
                && (org != Organization::Mwa || e.laser_power_dbm == laser_power_dbm)
        });
        hit.map(ScalabilityEntry::to_config).ok_or_else(|| Error::Lookup {
            key: match laser_power_dbm {
                Some(p) if org == Organization::Mwa => format!("{org}/{data_rate_gsps}GS/s/{p}dBm"),
                _ => format!("{org}/{data_rate_gsps}GS/s"),
            },
            valid: self.valid_keys(),
        })
    }

    /// Names accepted by [`ScalabilityTable::select`].
    pub fn selector_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.entry.iter().map(|e| e.to_config().name).collect();
        names.dedup();
        names
    }

    pub fn select(&self, selector: &str) -> Result<ArchConfig> {
        let unknown = || {
            Error::Config(format!(
                "unknown architecture {selector:?}; valid names: {}",
                self.selector_names().join(", ")
            ))
        };
        let (head, power) = match selector.split_once('@') {
            Some((h, p)) => {
                let p = p.trim().trim_end_matches("dBm").trim_end_matches("dbm");
                (h, Some(p.parse::<f64>().map_err(|_| unknown())?))
            }
            None => (selector, None),
        };
        let (arch, rate) = head.rsplit_once('_').ok_or_else(unknown)?;
        let org: Organization = arch.parse().map_err(|_| unknown())?;
        let rate: u32 = rate.parse().map_err(|_| unknown())?;
        let power = match org {
            Organization::Mwa => Some(power.unwrap_or(SPOGA_DEFAULT_LASER_DBM)),
            _ => power,
        };
        self.lookup(org, rate, power).map_err(|e| match e {
            Error::Lookup { .. } => unknown(),
            other => other,
        })
    }
}

/// Exact lookup in the bundled table.
pub fn lookup_config(org: Organization, data_rate_gsps: u32, laser_power_dbm: Option<f64>) -> Result<ArchConfig> {
    ScalabilityTable::bundled().lookup(org, data_rate_gsps, laser_power_dbm)
}

/// Loss and sensitivity parameters of the link-budget estimator. All losses in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudgetParams {
    pub laser_power_dbm: f64,
    /// Excess loss per 1x2 splitter stage.
    pub splitter_excess_db: f64,
    /// Loss per off-resonance microring a signal passes.
    pub mrr_through_db: f64,
    pub modulator_il_db: f64,
    /// Drop-port loss of the weighting/filter microring.
    pub filter_il_db: f64,
    pub waveguide_db: f64,
    pub penalty_db: f64,
    /// Detector sensitivity at 1 GS/s.
    pub sensitivity_dbm: f64,
    /// Sensitivity degradation per decade of data rate.
    pub sensitivity_slope_db_per_decade: f64,
    pub operand_bits: u32,
    /// Hard upper limit on N.
    pub n_limit: usize,
    /// M of the MWA (SPOGA) core, which is structural rather than power limited.
    pub mwa_dot_products: usize,
}

impl Default for LinkBudgetParams {
    fn default() -> Self {
        LinkBudgetParams {
            laser_power_dbm: 10.0,
            splitter_excess_db: 0.1,
            mrr_through_db: 0.01,
            modulator_il_db: 1.0,
            filter_il_db: 1.0,
            waveguide_db: 1.0,
            penalty_db: 1.0,
            sensitivity_dbm: -33.0,
            sensitivity_slope_db_per_decade: 10.0,
            operand_bits: OPERAND_BITS,
            n_limit: 1024,
            mwa_dot_products: SPOGA_DPUS_PER_CORE,
        }
    }
}

impl LinkBudgetParams {
    pub fn validate(&self) -> Result<()> {
        let losses = [
            ("splitter_excess_db", self.splitter_excess_db),
            ("mrr_through_db", self.mrr_through_db),
            ("modulator_il_db", self.modulator_il_db),
            ("filter_il_db", self.filter_il_db),
            ("waveguide_db", self.waveguide_db),
            ("penalty_db", self.penalty_db),
            ("sensitivity_slope_db_per_decade", self.sensitivity_slope_db_per_decade),
        ];
        for (name, v) in losses {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be a finite non-negative dB value, got {v}")));
            }
        }
        if !self.laser_power_dbm.is_finite() || !self.sensitivity_dbm.is_finite() {
            return Err(Error::Config("laser power and sensitivity must be finite".into()));
        }
        if self.operand_bits == 0 || self.operand_bits > 16 {
            return Err(Error::Config(format!("operand_bits must be in 1..=16, got {}", self.operand_bits)));
        }
        if self.n_limit == 0 || self.mwa_dot_products == 0 {
            return Err(Error::Config("n_limit and mwa_dot_products must be positive".into()));
        }
        Ok(())
    }

    /// Analog levels L = 2^bits.
    pub fn levels(&self) -> u64 {
        1u64 << self.operand_bits
    }

    pub fn sensitivity_at(&self, data_rate_gsps: f64) -> f64 {
        self.sensitivity_dbm + self.sensitivity_slope_db_per_decade * data_rate_gsps.log10()
    }

    fn through_rings(org: Organization, n: usize) -> f64 {
        let others = (n - 1) as f64;
        match org {
            Organization::Mwa => others,
            Organization::Maw => 2.0 * others,
            Organization::Amw => 3.0 * others,
        }
    }

    /// Received power per wavelength minus the power needed to resolve L levels.
    pub fn margin_db(&self, org: Organization, data_rate_gsps: f64, n: usize) -> f64 {
        // MAW/AMW split each wavelength over M = N waveguides; MWA splits each
        // DPU carrier over its N OAMEs.
        let fanout = n as f64;
        let stages = fanout.log2().ceil();
        let received = self.laser_power_dbm
            - 10.0 * fanout.log10()
            - self.splitter_excess_db * stages
            - self.modulator_il_db
            - self.filter_il_db
            - self.waveguide_db
            - self.penalty_db
            - self.mrr_through_db * Self::through_rings(org, n);
        let required = self.sensitivity_at(data_rate_gsps) + 10.0 * ((self.levels() - 1) as f64).log10();
        received - required
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudgetEstimate {
    pub n: usize,
    pub m: usize,
    /// Margin at the returned N (at N = 1 when infeasible).
    pub margin_db: f64,
    pub diagnostic: Option<String>,
}

/// Largest N whose per-wavelength margin is non-negative, by integer bisection.
/// The margin is non-increasing in N, so the feasible set is a prefix of `1..=n_limit`.
pub fn solve_link_budget(params: &LinkBudgetParams, org: Organization, data_rate_gsps: f64) -> Result<LinkBudgetEstimate> {
    params.validate()?;
    if !(data_rate_gsps > 0.0) {
        return Err(Error::Config(format!("data rate must be positive, got {data_rate_gsps}")));
    }
    let margin = |n| params.margin_db(org, data_rate_gsps, n);
    let at_one = margin(1);
    if at_one < 0.0 {
        return Ok(LinkBudgetEstimate {
            n: 0,
            m: 0,
            margin_db: at_one,
            diagnostic: Some(format!(
                "infeasible: {org} at {data_rate_gsps} GS/s is {:.2} dB short even for N = 1",
                -at_one
            )),
        });
    }
    let (mut lo, mut hi) = (1usize, params.n_limit);
    if margin(hi) >= 0.0 {
        lo = hi;
    }
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if margin(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let m = match org {
        Organization::Mwa => params.mwa_dot_products,
        _ => lo,
    };
    let diagnostic = (lo == params.n_limit).then(|| format!("N capped at n_limit = {}", params.n_limit));
    Ok(LinkBudgetEstimate {
        n: lo,
        m,
        margin_db: margin(lo),
        diagnostic,
    })
}
