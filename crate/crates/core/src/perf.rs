//! Latency, energy, area and the frame metrics built from them.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::arch::{ArchConfig, Organization, SPOGA_DEFAULT_LASER_DBM};
use crate::error::{Error, Result};
use crate::mapper::{execute_plan, plan, plan_tally, ExecMode, ExecOptions, Occupancy};
use crate::par::{self, Parallelism};
use crate::photonic::{AdcModel, ConversionTally, DeasModel};
use crate::workload::LayerManifest;

const BUNDLED_COSTS: &str = include_str!("../data/costs.toml");

/// Cores per accelerator when nothing else is configured.
pub const DEFAULT_CORE_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterCost {
    pub rate_gsps: u32,
    pub area_mm2: f64,
    pub power_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCostTable {
    pub laser_electrical_per_optical: f64,
    pub baseline_laser_power_dbm: f64,
    pub laser_area_mm2: f64,
    pub mrr_area_mm2: f64,
    pub mrr_tuning_power_mw: f64,
    pub receiver_power_mw: f64,
    pub receiver_area_mm2: f64,
    pub capacitor_bank_area_mm2: f64,
    pub capacitor_bank_power_mw: f64,
    pub deas_energy_pj_per_op: f64,
    pub deas_area_mm2: f64,
    pub memory_energy_pj_per_byte: f64,
    pub memory_buffer_area_mm2: f64,
    pub adc: Vec<ConverterCost>,
    pub dac: Vec<ConverterCost>,
}

fn lookup_converter<'a>(kind: &str, list: &'a [ConverterCost], rate: u32) -> Result<&'a ConverterCost> {
    list.iter().find(|c| c.rate_gsps == rate).ok_or_else(|| {
        let have: Vec<String> = list.iter().map(|c| c.rate_gsps.to_string()).collect();
        Error::Config(format!(
            "missing cost entry `{kind}` at {rate} GS/s (entries exist for: {})",
            have.join(", ")
        ))
    })
}

impl ComponentCostTable {
    pub fn bundled() -> Self {
        Self::from_toml_str(BUNDLED_COSTS).expect("bundled cost table is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let t: Self = toml::from_str(text).map_err(|e| Error::Config(format!("cost table: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    /// Applies a partial cost file on top of `self`. Scalars replace, converter
    /// entries replace the entry with the same rate or are appended.
    pub fn with_overrides(&self, text: &str) -> Result<Self> {
        let over: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("cost overrides: {e}")))?;
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in over {
            match (key.as_str(), value) {
                ("adc" | "dac", toml::Value::Array(items)) => {
                    let mut list: Vec<ConverterCost> = base[&key]
                        .clone()
                        .try_into()
                        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
                    for item in items {
                        let c: ConverterCost = item
                            .try_into()
                            .map_err(|e: toml::de::Error| Error::Config(format!("cost overrides `{key}`: {e}")))?;
                        match list.iter_mut().find(|x| x.rate_gsps == c.rate_gsps) {
                            Some(slot) => *slot = c,
                            None => list.push(c),
                        }
                    }
                    list.sort_by_key(|c| c.rate_gsps);
                    base.insert(key, toml::Value::try_from(list).map_err(|e| Error::Config(e.to_string()))?);
                }
                (_, value) => {
                    if !base.contains_key(&key) {
                        return Err(Error::Config(format!("cost overrides: unknown entry `{key}`")));
                    }
                    base.insert(key, value);
                }
            }
        }
        let t: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("cost overrides: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("cost table serializes")
    }

    fn scalars(&self) -> [(&'static str, f64); 13] {
        [
            ("laser_electrical_per_optical", self.laser_electrical_per_optical),
            ("baseline_laser_power_dbm", self.baseline_laser_power_dbm),
            ("laser_area_mm2", self.laser_area_mm2),
            ("mrr_area_mm2", self.mrr_area_mm2),
            ("mrr_tuning_power_mw", self.mrr_tuning_power_mw),
            ("receiver_power_mw", self.receiver_power_mw),
            ("receiver_area_mm2", self.receiver_area_mm2),
            ("capacitor_bank_area_mm2", self.capacitor_bank_area_mm2),
            ("capacitor_bank_power_mw", self.capacitor_bank_power_mw),
            ("deas_energy_pj_per_op", self.deas_energy_pj_per_op),
            ("deas_area_mm2", self.deas_area_mm2),
            ("memory_energy_pj_per_byte", self.memory_energy_pj_per_byte),
            ("memory_buffer_area_mm2", self.memory_buffer_area_mm2),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.scalars() {
            // dBm may be negative
            if !v.is_finite() || (v < 0.0 && name != "baseline_laser_power_dbm") {
                return Err(Error::Config(format!("cost entry `{name}` must be finite and >= 0, got {v}")));
            }
        }
        for (kind, list) in [("adc", &self.adc), ("dac", &self.dac)] {
            for (i, c) in list.iter().enumerate() {
                if !(c.area_mm2.is_finite() && c.area_mm2 >= 0.0 && c.power_mw.is_finite() && c.power_mw >= 0.0) {
                    return Err(Error::Config(format!("cost entry `{kind}` at {} GS/s must be >= 0", c.rate_gsps)));
                }
                if list[..i].iter().any(|o| o.rate_gsps == c.rate_gsps) {
                    return Err(Error::Config(format!("duplicate `{kind}` entry at {} GS/s", c.rate_gsps)));
                }
            }
        }
        Ok(())
    }

    pub fn adc_at(&self, rate_gsps: u32) -> Result<&ConverterCost> {
        lookup_converter("adc", &self.adc, rate_gsps)
    }

    pub fn dac_at(&self, rate_gsps: u32) -> Result<&ConverterCost> {
        lookup_converter("dac", &self.dac, rate_gsps)
    }

    /// A table with every cost set to zero.
    pub fn zero() -> Self {
        let zeroed = |list: &[ConverterCost]| -> Vec<ConverterCost> {
            list.iter()
                .map(|c| ConverterCost {
                    rate_gsps: c.rate_gsps,
                    area_mm2: 0.0,
                    power_mw: 0.0,
                })
                .collect()
        };
        let b = Self::bundled();
        ComponentCostTable {
            laser_electrical_per_optical: 0.0,
            baseline_laser_power_dbm: 0.0,
            laser_area_mm2: 0.0,
            mrr_area_mm2: 0.0,
            mrr_tuning_power_mw: 0.0,
            receiver_power_mw: 0.0,
            receiver_area_mm2: 0.0,
            capacitor_bank_area_mm2: 0.0,
            capacitor_bank_power_mw: 0.0,
            deas_energy_pj_per_op: 0.0,
            deas_area_mm2: 0.0,
            memory_energy_pj_per_byte: 0.0,
            memory_buffer_area_mm2: 0.0,
            adc: zeroed(&b.adc),
            dac: zeroed(&b.dac),
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Devices instantiated in one core.
///
/// SPOGA: per DPU, N OAMEs of four OAMUs (one modulator and one weighting ring
/// each), a PWAB with three BPCAs and one ADC, and four laser wavelengths. One
/// nibble DAC drives the two rings that share a nibble inside an OAME; input
/// DACs are shared by all DPUs. Baselines: four INT4 slice cores, each with N
/// lasers, per-organization rings and DACs, and one receiver and ADC per
/// waveguide, plus a DEAS unit per output lane and an intermediate buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreInventory {
    pub lasers: u64,
    pub laser_power_dbm: f64,
    pub mrrs: u64,
    pub dacs: u64,
    pub adcs: u64,
    pub receivers: u64,
    pub capacitor_banks: u64,
    pub deas_units: u64,
    pub memory_buffers: u64,
}

impl CoreInventory {
    pub fn of(arch: &ArchConfig, costs: &ComponentCostTable) -> Self {
        let n = arch.n_vector as u64;
        let m = arch.m_dot_products as u64;
        match arch.organization {
            Organization::Mwa => {
                let d = arch.dpu_count as u64;
                CoreInventory {
                    lasers: 4 * d,
                    laser_power_dbm: arch.laser_power_dbm.unwrap_or(SPOGA_DEFAULT_LASER_DBM),
                    mrrs: 8 * n * d,
                    dacs: 2 * n + 2 * n * d,
                    adcs: d,
                    receivers: 3 * d,
                    capacitor_banks: 3 * d,
                    deas_units: 0,
                    memory_buffers: 0,
                }
            }
            org => {
                let rings_per_slice = match org {
                    Organization::Maw => n + n * m,
                    _ => 2 * n * m,
                };
                CoreInventory {
                    lasers: 4 * n,
                    laser_power_dbm: costs.baseline_laser_power_dbm,
                    mrrs: 4 * rings_per_slice,
                    dacs: 4 * rings_per_slice,
                    adcs: 4 * m,
                    receivers: 4 * m,
                    capacitor_banks: 0,
                    deas_units: m,
                    memory_buffers: 1,
                }
            }
        }
    }

    /// Wall-plug laser power (W).
    pub fn laser_w(&self, costs: &ComponentCostTable) -> f64 {
        self.lasers as f64 * dbm_to_mw(self.laser_power_dbm) * costs.laser_electrical_per_optical * 1e-3
    }

    /// Static electrical power other than lasers (W).
    pub fn tuning_w(&self, costs: &ComponentCostTable) -> f64 {
        (self.mrrs as f64 * costs.mrr_tuning_power_mw + self.capacitor_banks as f64 * costs.capacitor_bank_power_mw)
            * 1e-3
    }

    pub fn area_mm2(&self, costs: &ComponentCostTable, rate_gsps: u32) -> Result<f64> {
        let adc = costs.adc_at(rate_gsps)?;
        let dac = costs.dac_at(rate_gsps)?;
        Ok(self.lasers as f64 * costs.laser_area_mm2
            + self.mrrs as f64 * costs.mrr_area_mm2
            + self.dacs as f64 * dac.area_mm2
            + self.adcs as f64 * adc.area_mm2
            + self.receivers as f64 * costs.receiver_area_mm2
            + self.capacitor_banks as f64 * costs.capacitor_bank_area_mm2
            + self.deas_units as f64 * costs.deas_area_mm2
            + self.memory_buffers as f64 * costs.memory_buffer_area_mm2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratorBudget {
    pub core_count: usize,
    pub arch: ArchConfig,
    pub cost_table: ComponentCostTable,
}

impl AcceleratorBudget {
    pub fn new(core_count: usize, arch: ArchConfig, cost_table: ComponentCostTable) -> Result<Self> {
        if core_count == 0 {
            return Err(Error::Config("core count must be at least 1".into()));
        }
        Ok(AcceleratorBudget {
            core_count,
            arch,
            cost_table,
        })
    }

    pub fn core_area_mm2(&self) -> Result<f64> {
        CoreInventory::of(&self.arch, &self.cost_table).area_mm2(&self.cost_table, self.arch.data_rate_gsps)
    }
}

pub fn area(budget: &AcceleratorBudget) -> Result<f64> {
    if budget.core_count == 0 {
        return Ok(0.0);
    }
    Ok(budget.core_count as f64 * budget.core_area_mm2()?)
}

/// Seconds for `steps` time steps plus `overhead_steps` of pipeline fill.
pub fn latency(steps: u64, data_rate_gsps: f64, overhead_steps: u64) -> f64 {
    (steps + overhead_steps) as f64 / (data_rate_gsps * 1e9)
}

/// Pipeline steps a layer pays after its last GEMM step.
pub fn overhead_steps(org: Organization) -> u64 {
    if org.is_bit_sliced_baseline() {
        DeasModel::default().pipeline_depth
    } else {
        0
    }
}

/// DAC conversions needed to stream the operands of a schedule.
pub fn dac_events(org: Organization, occ: &Occupancy) -> u64 {
    match org {
        Organization::Mwa => 2 * occ.oame_steps + 2 * occ.mac_slots,
        Organization::Maw => 4 * (occ.oame_steps + occ.mac_slots),
        Organization::Amw => 8 * occ.mac_slots,
    }
}

/// Joules per term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub laser_j: f64,
    pub tuning_j: f64,
    pub dac_j: f64,
    pub oe_j: f64,
    pub adc_j: f64,
    pub deas_j: f64,
    pub memory_j: f64,
}

impl EnergyBreakdown {
    pub const TERMS: [&'static str; 7] = ["laser", "tuning", "dac", "oe", "adc", "deas", "memory"];

    pub fn terms(&self) -> [f64; 7] {
        [
            self.laser_j,
            self.tuning_j,
            self.dac_j,
            self.oe_j,
            self.adc_j,
            self.deas_j,
            self.memory_j,
        ]
    }

    pub fn total(&self) -> f64 {
        self.terms().iter().sum()
    }
}

impl Add for EnergyBreakdown {
    type Output = EnergyBreakdown;
    fn add(self, r: Self) -> Self {
        EnergyBreakdown {
            laser_j: self.laser_j + r.laser_j,
            tuning_j: self.tuning_j + r.tuning_j,
            dac_j: self.dac_j + r.dac_j,
            oe_j: self.oe_j + r.oe_j,
            adc_j: self.adc_j + r.adc_j,
            deas_j: self.deas_j + r.deas_j,
            memory_j: self.memory_j + r.memory_j,
        }
    }
}

impl AddAssign for EnergyBreakdown {
    fn add_assign(&mut self, r: Self) {
        *self = *self + r;
    }
}

/// Schedule-level quantities of one layer (all groups).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LayerWork {
    pub occupancy: Occupancy,
    pub tally: ConversionTally,
    pub dac_events: u64,
}

/// Itemized energy of one layer run on `core_count` cores.
///
/// Static power is charged for busy core-steps plus the pipeline tail on every
/// core. With `gating`, laser power follows the fraction of occupied slots.
pub fn energy(
    work: &LayerWork,
    arch: &ArchConfig,
    costs: &ComponentCostTable,
    core_count: usize,
    gating: bool,
) -> Result<EnergyBreakdown> {
    let step_s = 1.0 / arch.data_rate_hz();
    let adc = costs.adc_at(arch.data_rate_gsps)?;
    let dac = costs.dac_at(arch.data_rate_gsps)?;
    let inv = CoreInventory::of(arch, costs);
    let occ = &work.occupancy;
    let tail = core_count as u64 * overhead_steps(arch.organization);
    let static_steps = (occ.steps + tail) as f64;
    let laser_steps = if gating && occ.capacity_slots > 0 {
        occ.steps as f64 * (occ.mac_slots as f64 / occ.capacity_slots as f64) + tail as f64
    } else {
        static_steps
    };
    let per_event = |mw: f64| mw * 1e-3 * step_s;
    Ok(EnergyBreakdown {
        laser_j: inv.laser_w(costs) * step_s * laser_steps,
        tuning_j: inv.tuning_w(costs) * step_s * static_steps,
        dac_j: work.dac_events as f64 * per_event(dac.power_mw),
        oe_j: work.tally.oe as f64 * per_event(costs.receiver_power_mw),
        adc_j: work.tally.adc as f64 * per_event(adc.power_mw),
        deas_j: work.tally.deas_ops as f64 * costs.deas_energy_pj_per_op * 1e-12,
        memory_j: work.tally.memory_bytes as f64 * costs.memory_energy_pj_per_byte * 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SimMode {
    #[default]
    CountsOnly,
    /// Runs every GEMM on synthetic operands; jobs are seeded from `seed`.
    Functional { seed: u64, adc: AdcModel },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub mode: SimMode,
    pub occupancy_gating: bool,
    pub parallelism: Parallelism,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            mode: SimMode::CountsOnly,
            occupancy_gating: false,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub index: usize,
    pub name: String,
    pub kind: &'static str,
    pub groups: usize,
    /// Per-group GEMM shape.
    pub t_rows: usize,
    pub k_depth: usize,
    pub m_cols: usize,
    pub macs: u64,
    pub work: LayerWork,
    pub latency_s: f64,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub model: String,
    pub arch: ArchConfig,
    pub core_count: usize,
    pub layers: Vec<LayerReport>,
    pub steps: u64,
    pub tally: ConversionTally,
    pub frame_latency_s: f64,
    pub energy: EnergyBreakdown,
    pub energy_j: f64,
    pub power_w: f64,
    pub area_mm2: f64,
    pub fps: f64,
    pub fps_per_watt: f64,
    pub fps_per_watt_per_mm2: f64,
}

fn job_seed(seed: u64, layer: usize, group: usize) -> u64 {
    seed ^ ((layer as u64) << 32 | group as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn simulate_layer(
    index: usize,
    layer: &crate::workload::Layer,
    budget: &AcceleratorBudget,
    opts: &SimOptions,
) -> Result<LayerReport> {
    let arch = &budget.arch;
    let jobs = layer.jobs()?;
    let mut work = LayerWork::default();
    let mut macs = 0;
    for (g, job) in jobs.iter().enumerate() {
        let p = plan(job, arch);
        let tally = match opts.mode {
            SimMode::CountsOnly => plan_tally(&p, arch)?,
            SimMode::Functional { seed, adc } => {
                let job = job.clone().with_synthetic(job_seed(seed, index, g));
                let ex = ExecOptions {
                    mode: ExecMode::Functional,
                    adc,
                    parallelism: opts.parallelism,
                    fault: None,
                };
                execute_plan(&p, &job, arch, &ex)?.tally
            }
        };
        work.occupancy += p.occupancy();
        work.tally += tally;
        macs += job.macs();
    }
    work.dac_events = dac_events(arch.organization, &work.occupancy);
    let per_core = work.occupancy.steps.div_ceil(budget.core_count as u64);
    let latency_s = latency(per_core, arch.data_rate_gsps as f64, overhead_steps(arch.organization));
    let energy = energy(&work, arch, &budget.cost_table, budget.core_count, opts.occupancy_gating)?;
    let (t_rows, k_depth, m_cols) = jobs[0].dims();
    Ok(LayerReport {
        index,
        name: layer.name.clone(),
        kind: layer.kind_str(),
        groups: jobs.len(),
        t_rows,
        k_depth,
        m_cols,
        macs,
        work,
        latency_s,
        energy,
    })
}

/// Runs a model layer by layer on the whole accelerator.
pub fn simulate(manifest: &LayerManifest, budget: &AcceleratorBudget, opts: &SimOptions) -> Result<RunReport> {
    if budget.core_count == 0 {
        return Err(Error::Config("core count must be at least 1".into()));
    }
    let layers = par::map_range(opts.parallelism, manifest.layers.len(), |i| {
        simulate_layer(i, &manifest.layers[i], budget, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut steps = 0;
    let mut tally = ConversionTally::default();
    let mut energy = EnergyBreakdown::default();
    let mut frame_latency_s = 0.0;
    for l in &layers {
        steps += l.work.occupancy.steps;
        tally += l.work.tally;
        energy += l.energy;
        frame_latency_s += l.latency_s;
    }
    let energy_j = energy.total();
    let power_w = energy_j / frame_latency_s;
    let area_mm2 = area(budget)?;
    let fps = 1.0 / frame_latency_s;
    let fps_per_watt = fps / power_w;
    Ok(RunReport {
        model: manifest.model.clone(),
        arch: budget.arch.clone(),
        core_count: budget.core_count,
        layers,
        steps,
        tally,
        frame_latency_s,
        energy,
        energy_j,
        power_w,
        area_mm2,
        fps,
        fps_per_watt,
        fps_per_watt_per_mm2: fps_per_watt / area_mm2,
    })
}

pub fn gmean(values: &[f64]) -> f64 {
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub sim: SimOptions,
    pub core_count: usize,
    /// Give every non-reference architecture as many cores as fit in the
    /// reference accelerator's area.
    pub iso_area: bool,
    /// Index of the reference architecture.
    pub reference: usize,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            sim: SimOptions::default(),
            core_count: DEFAULT_CORE_COUNT,
            iso_area: false,
            reference: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmeanRatio {
    pub reference: String,
    pub other: String,
    pub fps: f64,
    pub fps_per_watt: f64,
    pub fps_per_watt_per_mm2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Model-major, then architecture in the given order.
    pub reports: Vec<RunReport>,
    /// One ratio row per non-reference architecture.
    pub ratios: Vec<GmeanRatio>,
}

pub fn compare(
    models: &[LayerManifest],
    archs: &[ArchConfig],
    costs: &ComponentCostTable,
    opts: &CompareOptions,
) -> Result<Comparison> {
    if models.is_empty() {
        return Err(Error::Input("comparison needs at least one model".into()));
    }
    if archs.len() < 2 {
        return Err(Error::Config("comparison needs at least two architectures".into()));
    }
    if opts.reference >= archs.len() {
        return Err(Error::Config(format!("reference index {} out of range", opts.reference)));
    }
    let reference = AcceleratorBudget::new(opts.core_count, archs[opts.reference].clone(), costs.clone())?;
    let ref_area = area(&reference)?;
    let budgets = archs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut b = AcceleratorBudget::new(opts.core_count, a.clone(), costs.clone())?;
            if opts.iso_area && i != opts.reference {
                let core = b.core_area_mm2()?;
                b.core_count = if core > 0.0 { ((ref_area / core).floor() as usize).max(1) } else { opts.core_count };
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairs = models.len() * archs.len();
    let reports = par::map_range(opts.sim.parallelism, pairs, |i| {
        simulate(&models[i / archs.len()], &budgets[i % archs.len()], &opts.sim)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ratio = |a: usize, metric: fn(&RunReport) -> f64| {
        let r: Vec<f64> = (0..models.len())
            .map(|m| metric(&reports[m * archs.len() + opts.reference]) / metric(&reports[m * archs.len() + a]))
            .collect();
        gmean(&r)
    };
    let ratios = (0..archs.len())
        .filter(|&a| a != opts.reference)
        .map(|a| GmeanRatio {
            reference: archs[opts.reference].name.clone(),
            other: archs[a].name.clone(),
            fps: ratio(a, |r| r.fps),
            fps_per_watt: ratio(a, |r| r.fps_per_watt),
            fps_per_watt_per_mm2: ratio(a, |r| r.fps_per_watt_per_mm2),
        })
        .collect();
    Ok(Comparison { reports, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::lookup_config;
    use crate::mapper::GemmJob;

    fn rel_eq(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs())
    }

    fn one_fc() -> LayerManifest {
        LayerManifest::parse("spoga-manifest v1\nmodel t\nfc name=f in_features=300 out_features=20\n").unwrap()
    }

    #[test]
    fn converter_defaults_verbatim() {
        let t = ComponentCostTable::bundled();
        let got: Vec<_> = t.adc.iter().map(|c| (c.rate_gsps, c.area_mm2, c.power_mw)).collect();
        assert_eq!(got, vec![(1, 0.002, 2.55), (5, 0.021, 11.0), (10, 0.103, 29.0)]);
        let got: Vec<_> = t.dac.iter().map(|c| (c.rate_gsps, c.area_mm2, c.power_mw)).collect();
        assert_eq!(got, vec![(1, 0.00007, 0.12), (5, 0.06, 26.0), (10, 0.06, 30.0)]);
    }

    #[test]
    fn adc_energy_example() {
        let arch = lookup_config(Organization::Mwa, 10, Some(10.0)).unwrap();
        let work = LayerWork {
            tally: ConversionTally::new(0, 320, 0, 0),
            ..Default::default()
        };
        let e = energy(&work, &arch, &ComponentCostTable::bundled(), 1, false).unwrap();
        // 29 mW for 0.1 ns per conversion
        assert!(rel_eq(e.adc_j, 320.0 * 0.029 / 10e9, 1e-12), "{}", e.adc_j);
        assert!(rel_eq(e.adc_j, 9.28e-10, 1e-12));
        assert_eq!(e.total(), e.adc_j);
        let slow = ArchConfig::custom("s", Organization::Mwa, 1, 10, 4).unwrap();
        let costs = ComponentCostTable::bundled()
            .with_overrides("[[adc]]\nrate_gsps = 1\narea_mm2 = 0.103\npower_mw = 29.0\n")
            .unwrap();
        let e = energy(&work, &slow, &costs, 1, false).unwrap();
        assert!(rel_eq(e.adc_j, 9.28e-9, 1e-12));
    }

    #[test]
    fn single_converter_areas() {
        let t = ComponentCostTable::bundled();
        let one = |adcs, dacs| CoreInventory {
            lasers: 0,
            laser_power_dbm: 0.0,
            mrrs: 0,
            dacs,
            adcs,
            receivers: 0,
            capacitor_banks: 0,
            deas_units: 0,
            memory_buffers: 0,
        };
        assert_eq!(one(1, 0).area_mm2(&t, 10).unwrap(), 0.103);
        assert_eq!(one(0, 1).area_mm2(&t, 1).unwrap(), 0.00007);
    }

    #[test]
    fn zero_costs_give_zero_energy_and_zero_cores_zero_area() {
        for org in Organization::ALL {
            let power = (org == Organization::Mwa).then_some(10.0);
            let arch = lookup_config(org, 10, power).unwrap();
            let budget = AcceleratorBudget::new(2, arch, ComponentCostTable::zero()).unwrap();
            let r = simulate(&one_fc(), &budget, &SimOptions::default()).unwrap();
            assert_eq!(r.energy_j, 0.0);
            assert_eq!(r.area_mm2, 0.0);
        }
        let arch = lookup_config(Organization::Maw, 10, None).unwrap();
        let empty = AcceleratorBudget {
            core_count: 0,
            arch,
            cost_table: ComponentCostTable::bundled(),
        };
        assert_eq!(area(&empty).unwrap(), 0.0);
        assert!(AcceleratorBudget::new(0, empty.arch.clone(), ComponentCostTable::bundled()).is_err());
    }

    #[test]
    fn latency_examples() {
        assert_eq!(latency(1_000_000_000, 1.0, 0), 1.0);
        assert_eq!(latency(0, 1.0, 4), 4e-9);
        assert_eq!(overhead_steps(Organization::Mwa), 0);
        assert_eq!(overhead_steps(Organization::Amw), 4);
    }

    #[test]
    fn missing_entry_is_named() {
        let arch = ArchConfig::custom("x", Organization::Mwa, 7, 10, 4).unwrap();
        let work = LayerWork::default();
        match energy(&work, &arch, &ComponentCostTable::bundled(), 1, false) {
            Err(Error::Config(m)) => assert!(m.contains("`adc` at 7 GS/s"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_merge() {
        let base = ComponentCostTable::bundled();
        let t = base
            .with_overrides("receiver_power_mw = 4.0\n[[adc]]\nrate_gsps = 10\narea_mm2 = 0.2\npower_mw = 40.0\n[[dac]]\nrate_gsps = 7\narea_mm2 = 0.01\npower_mw = 5.0\n")
            .unwrap();
        assert_eq!(t.receiver_power_mw, 4.0);
        assert_eq!(t.adc_at(10).unwrap().power_mw, 40.0);
        assert_eq!(t.adc_at(1).unwrap(), base.adc_at(1).unwrap());
        assert_eq!(t.dac_at(7).unwrap().area_mm2, 0.01);
        assert!(base.with_overrides("laser_colour = 3\n").is_err());
        assert!(base.with_overrides("mrr_area_mm2 = -1.0\n").is_err());
        assert_eq!(ComponentCostTable::from_toml_str(&base.to_toml_string()).unwrap(), base);
    }

    #[test]
    fn gmean_definition() {
        assert!(rel_eq(gmean(&[2.0, 8.0]), 4.0, 1e-12));
        assert_eq!(gmean(&[1.0, 1.0, 1.0]), 1.0);
    }

    #[test]
    fn metric_identities() {
        let arch = lookup_config(Organization::Mwa, 5, Some(5.0)).unwrap();
        let budget = AcceleratorBudget::new(3, arch, ComponentCostTable::bundled()).unwrap();
        let r = simulate(&one_fc(), &budget, &SimOptions::default()).unwrap();
        assert_eq!(r.fps, 1.0 / r.frame_latency_s);
        assert_eq!(r.fps_per_watt, r.fps / r.power_w);
        assert_eq!(r.fps_per_watt_per_mm2, r.fps_per_watt / r.area_mm2);
        assert!(rel_eq(r.fps * r.frame_latency_s, 1.0, 1e-15));
        assert_eq!(r.tally, ConversionTally::SPOGA * r.layers[0].work.occupancy.dot_products);
    }

    #[test]
    fn monotone_in_costs_and_cores() {
        let m = LayerManifest::parse(
            "spoga-manifest v1\nmodel t\nconv name=c in_h=9 in_w=9 in_c=20 out_c=30 kernel_h=3 kernel_w=3 stride=1 padding=1\nfc name=f in_features=300 out_features=50\n",
        )
        .unwrap();
        let base = ComponentCostTable::bundled();
        for arch in [
            lookup_config(Organization::Mwa, 10, Some(10.0)).unwrap(),
            lookup_config(Organization::Maw, 5, None).unwrap(),
            lookup_config(Organization::Amw, 1, None).unwrap(),
        ] {
            let run = |t: &ComponentCostTable, cores| {
                let b = AcceleratorBudget::new(cores, arch.clone(), t.clone()).unwrap();
                simulate(&m, &b, &SimOptions::default()).unwrap()
            };
            let r0 = run(&base, 2);
            for (name, _) in base.scalars() {
                let bumped = base.with_overrides(&format!("{name} = {}\n", base.scalars().iter().find(|s| s.0 == name).unwrap().1 * 2.0 + 1.0)).unwrap();
                let r1 = run(&bumped, 2);
                assert!(r1.energy_j >= r0.energy_j && r1.area_mm2 >= r0.area_mm2, "{name}");
            }
            let mut prev = run(&base, 1);
            for cores in 2..12 {
                let r = run(&base, cores);
                assert!(r.energy_j >= prev.energy_j && r.area_mm2 >= prev.area_mm2, "{cores}");
                prev = r;
            }
        }
    }

    #[test]
    fn conversion_terms_are_quarter_and_three_quarters() {
        let job = GemmJob::new(17, 700, 45).unwrap();
        let costs = ComponentCostTable::bundled();
        for rate in [1, 5, 10] {
            let spoga = ArchConfig::custom("s", Organization::Mwa, rate, 40, 12).unwrap();
            for org in [Organization::Maw, Organization::Amw] {
                let base = ArchConfig::custom("b", org, rate, 40, 12).unwrap();
                let work = |a: &ArchConfig| {
                    let p = plan(&job, a);
                    LayerWork {
                        occupancy: p.occupancy(),
                        tally: plan_tally(&p, a).unwrap(),
                        dac_events: dac_events(a.organization, &p.occupancy()),
                    }
                };
                let es = energy(&work(&spoga), &spoga, &costs, 1, false).unwrap();
                let eb = energy(&work(&base), &base, &costs, 1, false).unwrap();
                assert_eq!(es.adc_j * 4.0, eb.adc_j);
                assert!(rel_eq(es.oe_j / eb.oe_j, 0.75, 1e-12));
                assert!(eb.adc_j >= 4.0 * es.adc_j && eb.memory_j > 0.0 && eb.deas_j > 0.0);
                assert_eq!(es.memory_j + es.deas_j, 0.0);
            }
        }
    }

    #[test]
    fn functional_and_counts_tallies_agree() {
        let m = LayerManifest::parse(
            "spoga-manifest v1\nmodel t\nconv name=c in_h=6 in_w=6 in_c=8 out_c=8 kernel_h=3 kernel_w=3 stride=1 padding=1 groups=4\nfc name=f in_features=300 out_features=20\n",
        )
        .unwrap();
        for arch in [
            lookup_config(Organization::Mwa, 10, Some(10.0)).unwrap(),
            lookup_config(Organization::Amw, 10, None).unwrap(),
        ] {
            let b = AcceleratorBudget::new(2, arch, ComponentCostTable::bundled()).unwrap();
            let counts = simulate(&m, &b, &SimOptions::default()).unwrap();
            let functional = SimOptions {
                mode: SimMode::Functional {
                    seed: 7,
                    adc: AdcModel::Ideal,
                },
                ..Default::default()
            };
            assert_eq!(simulate(&m, &b, &functional).unwrap(), counts);
        }
    }

    #[test]
    fn compare_shapes_and_identity() {
        let a = lookup_config(Organization::Mwa, 10, Some(10.0)).unwrap();
        let costs = ComponentCostTable::bundled();
        let c = compare(&[one_fc(), one_fc()], &[a.clone(), a.clone()], &costs, &CompareOptions::default()).unwrap();
        assert_eq!(c.reports.len(), 4);
        assert_eq!(c.ratios.len(), 1);
        let r = &c.ratios[0];
        assert_eq!((r.fps, r.fps_per_watt, r.fps_per_watt_per_mm2), (1.0, 1.0, 1.0));
        assert!(matches!(compare(&[], &[a.clone(), a.clone()], &costs, &CompareOptions::default()), Err(Error::Input(_))));
        assert!(compare(&[one_fc()], &[a], &costs, &CompareOptions::default()).is_err());
    }

    #[test]
    fn iso_area_fits_within_reference_area() {
        let costs = ComponentCostTable::bundled();
        let archs = [
            lookup_config(Organization::Mwa, 10, Some(10.0)).unwrap(),
            lookup_config(Organization::Maw, 10, None).unwrap(),
        ];
        let opts = CompareOptions {
            iso_area: true,
            ..Default::default()
        };
        let c = compare(&[one_fc()], &archs, &costs, &opts).unwrap();
        let (s, h) = (&c.reports[0], &c.reports[1]);
        assert_eq!(s.core_count, DEFAULT_CORE_COUNT);
        assert!(h.area_mm2 <= s.area_mm2 || h.core_count == 1);
        let per_core = h.area_mm2 / h.core_count as f64;
        assert!(h.area_mm2 + per_core > s.area_mm2);
    }
}
