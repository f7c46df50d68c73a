//! Functional model of the SPOGA dot-product unit and the bit-sliced baselines.
//!
//! Signals travel the same path the hardware would: each OAME produces four
//! INT4 products on wavelengths λ1..λ4, the products are routed onto the
//! positive or negative rail of the aggregation lane set for their radix
//! position, each lane set is integrated by a balanced photo-charge accumulator
//! (BPCA) whose capacitor applies the radix weight, and the PWAB adds the three
//! voltages before a single ADC conversion.
//!
//! Optical power and photocharge are exact reals in normalized units, one unit
//! per INT4 product count. Same-wavelength signals add in power.

use std::ops::{Add, AddAssign, Mul};

use crate::arch::Organization;
use crate::bitslice::{SlicedInt8, Sign};
use crate::error::{Error, Result};

/// Carrier wavelength of one OAMU inside an OAME.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wavelength {
    /// MSN x MSN
    L1,
    /// MSN(input) x LSN(weight)
    L2,
    /// LSN(input) x MSN(weight)
    L3,
    /// LSN x LSN
    L4,
}

impl Wavelength {
    pub const ALL: [Wavelength; 4] = [Wavelength::L1, Wavelength::L2, Wavelength::L3, Wavelength::L4];

    pub fn radix(self) -> Radix {
        match self {
            Wavelength::L1 => Radix::R256,
            Wavelength::L2 | Wavelength::L3 => Radix::R16,
            Wavelength::L4 => Radix::R1,
        }
    }
}

/// Radix position weight of an aggregation lane set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Radix {
    R256,
    R16,
    R1,
}

impl Radix {
    pub const ALL: [Radix; 3] = [Radix::R256, Radix::R16, Radix::R1];

    pub fn weight(self) -> i64 {
        match self {
            Radix::R256 => 256,
            Radix::R16 => 16,
            Radix::R1 => 1,
        }
    }

    /// The accumulation capacitor that realizes this weight.
    pub fn capacitor(self) -> Capacitor {
        match self {
            Radix::R256 => Capacitor::C0Over256,
            Radix::R16 => Capacitor::C0Over16,
            Radix::R1 => Capacitor::C0,
        }
    }

    fn index(self) -> usize {
        match self {
            Radix::R256 => 0,
            Radix::R16 => 1,
            Radix::R1 => 2,
        }
    }
}

/// Selectable accumulation capacitor of a BPCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capacitor {
    C0Over256,
    C0Over16,
    C0,
}

impl Capacitor {
    /// Capacitance in units of C0.
    pub fn relative_capacitance(self) -> f64 {
        match self {
            Capacitor::C0Over256 => 1.0 / 256.0,
            Capacitor::C0Over16 => 1.0 / 16.0,
            Capacitor::C0 => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedProduct {
    pub value: u8,
    pub wavelength: Wavelength,
    pub sign: Sign,
}

/// One OAME holding an input/weight pair and its four nibble products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OameState {
    pub input: SlicedInt8,
    pub weight: SlicedInt8,
    /// Ordered hh, hl, lh, ll on λ1..λ4.
    pub products: [TaggedProduct; 4],
}

impl OameState {
    pub fn hh(&self) -> u8 {
        self.products[0].value
    }
    pub fn hl(&self) -> u8 {
        self.products[1].value
    }
    pub fn lh(&self) -> u8 {
        self.products[2].value
    }
    pub fn ll(&self) -> u8 {
        self.products[3].value
    }
}

pub fn oame_evaluate(input: SlicedInt8, weight: SlicedInt8) -> OameState {
    let sign = input.sign() * weight.sign();
    let values = [
        input.msn() * weight.msn(),
        input.msn() * weight.lsn(),
        input.lsn() * weight.msn(),
        input.lsn() * weight.lsn(),
    ];
    let mut products = [TaggedProduct {
        value: 0,
        wavelength: Wavelength::L1,
        sign,
    }; 4];
    for (i, wl) in Wavelength::ALL.into_iter().enumerate() {
        products[i] = TaggedProduct {
            value: values[i],
            wavelength: wl,
            sign,
        };
    }
    OameState {
        input,
        weight,
        products,
    }
}

/// One radix lane set: a positive and a negative rail of optical power samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationLaneSet {
    radix: Radix,
    positive: Vec<f64>,
    negative: Vec<f64>,
}

impl AggregationLaneSet {
    pub fn new(radix: Radix) -> Self {
        AggregationLaneSet {
            radix,
            positive: Vec::new(),
            negative: Vec::new(),
        }
    }

    /// Builds a lane set from explicit rail contents.
    pub fn with_rails(radix: Radix, positive: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if positive.iter().chain(&negative).any(|&p| !(p >= 0.0)) {
            return Err(Error::Input("rail contributions must be non-negative".into()));
        }
        Ok(AggregationLaneSet {
            radix,
            positive,
            negative,
        })
    }

    pub fn radix(&self) -> Radix {
        self.radix
    }

    pub fn positive_rail(&self) -> &[f64] {
        &self.positive
    }

    pub fn negative_rail(&self) -> &[f64] {
        &self.negative
    }

    pub fn positive_power(&self) -> f64 {
        self.positive.iter().sum()
    }

    pub fn negative_power(&self) -> f64 {
        self.negative.iter().sum()
    }

    fn push(&mut self, p: &TaggedProduct) {
        debug_assert_eq!(p.wavelength.radix(), self.radix);
        let power = p.value as f64;
        match p.sign {
            Sign::Positive => self.positive.push(power),
            Sign::Negative => self.negative.push(power),
        }
    }
}

/// Lane sets ordered by radix: 256, 16, 1.
pub type LaneSets = [AggregationLaneSet; 3];

pub fn route_to_lanes(oames: &[OameState]) -> LaneSets {
    let mut lanes = Radix::ALL.map(AggregationLaneSet::new);
    for oame in oames {
        for p in &oame.products {
            lanes[p.wavelength.radix().index()].push(p);
        }
    }
    lanes
}

/// Charge and voltage state of one BPCA after a time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogAccumulator {
    lane: Radix,
    selector: Capacitor,
    charge: f64,
    output_voltage: f64,
}

impl AnalogAccumulator {
    pub fn from_charge(lane: Radix, selector: Capacitor, charge: f64) -> Self {
        AnalogAccumulator {
            lane,
            selector,
            charge,
            output_voltage: charge / selector.relative_capacitance(),
        }
    }

    pub fn lane(&self) -> Radix {
        self.lane
    }
    pub fn selector(&self) -> Capacitor {
        self.selector
    }
    pub fn charge(&self) -> f64 {
        self.charge
    }
    pub fn output_voltage(&self) -> f64 {
        self.output_voltage
    }
}

fn integrate(lane: &AggregationLaneSet, selector: Capacitor) -> AnalogAccumulator {
    let charge = lane.positive_power() - lane.negative_power();
    AnalogAccumulator::from_charge(lane.radix, selector, charge)
}

/// Balanced detection of a lane set onto the selected capacitor.
pub fn bpca_integrate(lane: &AggregationLaneSet, selector: Capacitor) -> Result<AnalogAccumulator> {
    if lane.radix.capacitor() != selector {
        return Err(Error::Config(format!(
            "capacitor {selector:?} does not realize radix weight {}",
            lane.radix.weight()
        )));
    }
    Ok(integrate(lane, selector))
}

/// Final-result ADC.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AdcModel {
    /// Exact pass-through, rounded to the nearest integer.
    #[default]
    Ideal,
    /// Mid-rise quantizer with `2^bits` uniform levels over `[-full_scale, full_scale]`.
    Quantized { bits: u32, full_scale: f64 },
}

impl AdcModel {
    pub const DEFAULT_BITS: u32 = 16;

    /// 16-bit converter scaled to the largest dot product `oame_count` OAMEs can produce.
    pub fn finite_default(oame_count: usize, adjust: f64) -> Self {
        AdcModel::Quantized {
            bits: Self::DEFAULT_BITS,
            full_scale: oame_count as f64 * 255.0 * 255.0 * adjust,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AdcModel::Ideal => Ok(()),
            AdcModel::Quantized { bits, full_scale } => {
                if bits == 0 || bits > 52 {
                    return Err(Error::Config(format!("ADC bits must be in 1..=52, got {bits}")));
                }
                if !(full_scale > 0.0) || !full_scale.is_finite() {
                    return Err(Error::Config(format!("ADC full scale must be positive, got {full_scale}")));
                }
                Ok(())
            }
        }
    }

    /// Maps an analog voltage onto the nearest representable level.
    pub fn quantize(&self, v: f64) -> f64 {
        match *self {
            AdcModel::Ideal => v,
            AdcModel::Quantized { bits, full_scale } => {
                let levels = (1u64 << bits) as f64;
                let step = 2.0 * full_scale / levels;
                let idx = ((v + full_scale) / step).floor().clamp(0.0, levels - 1.0);
                -full_scale + step * (idx + 0.5)
            }
        }
    }

    /// Digital output code as a signed integer.
    pub fn convert(&self, v: f64) -> i64 {
        self.quantize(v).round() as i64
    }
}

/// Adds the three weighted BPCA voltages and digitizes the sum once.
pub fn pwab_readout(
    v256: &AnalogAccumulator,
    v16: &AnalogAccumulator,
    v1: &AnalogAccumulator,
    adc: &AdcModel,
) -> Result<i64> {
    let lanes = [v256.lane, v16.lane, v1.lane];
    if lanes[0] == lanes[1] || lanes[0] == lanes[2] || lanes[1] == lanes[2] {
        return Err(Error::Config(format!(
            "PWAB needs three distinct radix lanes, got {lanes:?}"
        )));
    }
    let sum = v256.output_voltage + v16.output_voltage + v1.output_voltage;
    Ok(adc.convert(sum))
}

/// Conversion and post-processing events attributed to dot products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct ConversionTally {
    /// Optical-to-electrical conversions.
    pub oe: u64,
    /// Analog-to-digital conversions.
    pub adc: u64,
    /// Digital shift-add operations.
    pub deas_ops: u64,
    /// Bytes of intermediate results written to memory.
    pub memory_bytes: u64,
}

impl ConversionTally {
    pub const fn new(oe: u64, adc: u64, deas_ops: u64, memory_bytes: u64) -> Self {
        ConversionTally {
            oe,
            adc,
            deas_ops,
            memory_bytes,
        }
    }

    /// Per dot product on a SPOGA DPU: three BPCAs, one ADC.
    pub const SPOGA: ConversionTally = ConversionTally::new(3, 1, 0, 0);
}

impl Add for ConversionTally {
    type Output = ConversionTally;
    fn add(self, r: ConversionTally) -> ConversionTally {
        ConversionTally {
            oe: self.oe + r.oe,
            adc: self.adc + r.adc,
            deas_ops: self.deas_ops + r.deas_ops,
            memory_bytes: self.memory_bytes + r.memory_bytes,
        }
    }
}

impl AddAssign for ConversionTally {
    fn add_assign(&mut self, r: ConversionTally) {
        *self = *self + r;
    }
}

impl Mul<u64> for ConversionTally {
    type Output = ConversionTally;
    fn mul(self, n: u64) -> ConversionTally {
        ConversionTally {
            oe: self.oe * n,
            adc: self.adc * n,
            deas_ops: self.deas_ops * n,
            memory_bytes: self.memory_bytes * n,
        }
    }
}

/// Forces one BPCA onto a given capacitor, bypassing the radix check.
/// Only used to prove that the verification sweeps catch a miswired PWAB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectorFault {
    pub lane: Radix,
    pub selector: Capacitor,
}

impl SelectorFault {
    /// The 16^1 BPCA left on the C0 capacitor.
    pub const FLIPPED_MIDDLE: SelectorFault = SelectorFault {
        lane: Radix::R16,
        selector: Capacitor::C0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpuConfig {
    pub oame_count: usize,
    pub adc: AdcModel,
    pub fault: Option<SelectorFault>,
}

impl DpuConfig {
    pub fn new(oame_count: usize, adc: AdcModel) -> Result<Self> {
        if oame_count == 0 {
            return Err(Error::Config("a DPU needs at least one OAME".into()));
        }
        adc.validate()?;
        Ok(DpuConfig {
            oame_count,
            adc,
            fault: None,
        })
    }

    pub fn ideal(oame_count: usize) -> Result<Self> {
        Self::new(oame_count, AdcModel::Ideal)
    }

    pub fn with_fault(mut self, fault: SelectorFault) -> Self {
        self.fault = Some(fault);
        self
    }
}

fn check_operands(a: &[SlicedInt8], b: &[SlicedInt8], capacity: usize) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() > capacity {
        return Err(Error::Capacity {
            len: a.len(),
            capacity,
        });
    }
    Ok(())
}

/// One dot product through OAMEs, lanes, BPCAs, PWAB and ADC.
pub fn dpu_dot(config: &DpuConfig, a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<(i64, ConversionTally)> {
    check_operands(a, b, config.oame_count)?;
    let oames: Vec<OameState> = a.iter().zip(b).map(|(&x, &y)| oame_evaluate(x, y)).collect();
    let lanes = route_to_lanes(&oames);

    let mut acc = [AnalogAccumulator::from_charge(Radix::R1, Capacitor::C0, 0.0); 3];
    for (slot, lane) in acc.iter_mut().zip(&lanes) {
        *slot = match config.fault {
            Some(f) if f.lane == lane.radix => integrate(lane, f.selector),
            _ => bpca_integrate(lane, lane.radix.capacitor())?,
        };
    }
    let value = pwab_readout(&acc[0], &acc[1], &acc[2], &config.adc)?;
    Ok((value, ConversionTally::SPOGA))
}

/// Cost parameters of the digital shift-and-add post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeasModel {
    /// Shift-adds to merge four intermediates into one result.
    pub shift_adds_per_dot: u64,
    /// Pipeline stages added to every layer's latency.
    pub pipeline_depth: u64,
}

impl Default for DeasModel {
    fn default() -> Self {
        DeasModel {
            shift_adds_per_dot: 3,
            pipeline_depth: 4,
        }
    }
}

/// Bits per stored INT4-slice dot product: 8 product bits plus 2*ceil(log2 N) growth.
pub fn intermediate_width_bits(n_vector: usize) -> u64 {
    let log2 = if n_vector <= 1 {
        0
    } else {
        (usize::BITS - (n_vector - 1).leading_zeros()) as u64
    };
    8 + 2 * log2
}

/// A bit-sliced baseline core group: four INT4 cores of vector size `n_vector`
/// whose digitized outputs are buffered and merged by a DEAS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineCore {
    pub organization: Organization,
    pub n_vector: usize,
    pub adc: AdcModel,
    pub deas: DeasModel,
}

impl BaselineCore {
    pub fn new(organization: Organization, n_vector: usize, adc: AdcModel) -> Result<Self> {
        if organization == Organization::Mwa {
            return Err(Error::Config("MWA is not a bit-sliced baseline organization".into()));
        }
        if n_vector == 0 {
            return Err(Error::Config("baseline vector size must be positive".into()));
        }
        adc.validate()?;
        Ok(BaselineCore {
            organization,
            n_vector,
            adc,
            deas: DeasModel::default(),
        })
    }

    /// Per-dot-product tally; independent of operand values.
    pub fn tally(&self) -> ConversionTally {
        let bits = 4 * intermediate_width_bits(self.n_vector);
        ConversionTally::new(4, 4, self.deas.shift_adds_per_dot, bits.div_ceil(8))
    }
}

/// The same dot product as four separate INT4 dot products, each detected,
/// digitized and stored, then merged by shift-and-add.
pub fn baseline_dot(core: &BaselineCore, a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<(i64, ConversionTally)> {
    check_operands(a, b, core.n_vector)?;
    // one BPD per slice core: signed sum of that slice pair's products
    let mut sums = [0.0f64; 4];
    for (x, y) in a.iter().zip(b) {
        let s = (x.sign() * y.sign()).as_i64() as f64;
        sums[0] += s * (x.msn() * y.msn()) as f64;
        sums[1] += s * (x.msn() * y.lsn()) as f64;
        sums[2] += s * (x.lsn() * y.msn()) as f64;
        sums[3] += s * (x.lsn() * y.lsn()) as f64;
    }
    let [hh, hl, lh, ll] = sums.map(|v| core.adc.convert(v));
    // DEAS: (hh << 8) + (hl << 4) + (lh << 4) + ll
    let value = (hh << 8) + (hl << 4) + (lh << 4) + ll;
    Ok((value, core.tally()))
}
