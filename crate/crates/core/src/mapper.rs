//! Spatio-temporal mapping of integer GEMMs onto a GEMM core.
//!
//! A job `I (T x K) * W (K x Mc)` is folded into `ceil(K / N)` vector chunks and
//! `ceil(Mc / M)` column blocks. One time step handles one input row, one vector
//! chunk and one column block. Steps are ordered row-major: rows outermost, then
//! vector chunks, then column blocks. Chunk results of one output are digitized
//! per step and summed digitally in order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::{ArchConfig, Organization};
use crate::bitslice::{IntMatrix, SlicedInt8};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::photonic::{baseline_dot, dpu_dot, AdcModel, BaselineCore, ConversionTally, DpuConfig, SelectorFault};

/// Convolution layer geometry. Channels are split into `groups` independent GEMMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConvLayer {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvLayer {
    pub fn new(
        (in_h, in_w, in_c): (usize, usize, usize),
        out_c: usize,
        (kernel_h, kernel_w): (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Self {
        ConvLayer {
            in_h,
            in_w,
            in_c,
            out_c,
            kernel_h,
            kernel_w,
            stride,
            padding,
            groups: 1,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    fn out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
        let padded = input + 2 * padding;
        (padded >= kernel).then(|| (padded - kernel) / stride + 1)
    }

    /// Output height and width; errors on invalid geometry.
    pub fn output_dims(&self) -> Result<(usize, usize)> {
        if self.stride == 0 {
            return Err(Error::Geometry("stride must be at least 1".into()));
        }
        if [self.in_h, self.in_w, self.in_c, self.out_c, self.kernel_h, self.kernel_w].contains(&0) {
            return Err(Error::Geometry(format!("zero-sized dimension in {self:?}")));
        }
        if self.groups == 0 || !self.in_c.is_multiple_of(self.groups) || !self.out_c.is_multiple_of(self.groups) {
            return Err(Error::Geometry(format!(
                "groups = {} must divide in_c = {} and out_c = {}",
                self.groups, self.in_c, self.out_c
            )));
        }
        let oh = Self::out_dim(self.in_h, self.kernel_h, self.stride, self.padding);
        let ow = Self::out_dim(self.in_w, self.kernel_w, self.stride, self.padding);
        match (oh, ow) {
            (Some(h), Some(w)) if h > 0 && w > 0 => Ok((h, w)),
            _ => Err(Error::Geometry(format!(
                "kernel {}x{} does not fit a {}x{} input with padding {}",
                self.kernel_h, self.kernel_w, self.in_h, self.in_w, self.padding
            ))),
        }
    }

    /// Number of GEMM jobs this layer lowers to.
    pub fn group_count(&self) -> usize {
        self.groups
    }
}

/// Where the operand values of a job come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operands {
    /// Shapes only; functional execution is unavailable.
    CountsOnly,
    Matrices { input: IntMatrix, weight: IntMatrix },
    /// Uniform random operands drawn from a seeded ChaCha8 stream.
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GemmJob {
    pub t_rows: usize,
    pub k_depth: usize,
    pub m_cols: usize,
    pub operands: Operands,
}

impl GemmJob {
    pub fn new(t_rows: usize, k_depth: usize, m_cols: usize) -> Result<Self> {
        if t_rows == 0 || k_depth == 0 || m_cols == 0 {
            return Err(Error::Geometry(format!(
                "GEMM dims must be positive, got T={t_rows} K={k_depth} M={m_cols}"
            )));
        }
        Ok(GemmJob {
            t_rows,
            k_depth,
            m_cols,
            operands: Operands::CountsOnly,
        })
    }

    pub fn from_matrices(input: IntMatrix, weight: IntMatrix) -> Result<Self> {
        if input.cols() != weight.rows() {
            return Err(Error::Shape(format!(
                "input is {}x{} but weight is {}x{}",
                input.rows(),
                input.cols(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(GemmJob {
            t_rows: input.rows(),
            k_depth: input.cols(),
            m_cols: weight.cols(),
            operands: Operands::Matrices { input, weight },
        })
    }

    pub fn with_synthetic(mut self, seed: u64) -> Self {
        self.operands = Operands::Synthetic { seed };
        self
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.t_rows, self.k_depth, self.m_cols)
    }

    pub fn macs(&self) -> u64 {
        self.t_rows as u64 * self.k_depth as u64 * self.m_cols as u64
    }

    /// Resolves operand matrices, generating synthetic ones on demand.
    pub fn materialize(&self) -> Result<Option<(IntMatrix, IntMatrix)>> {
        match &self.operands {
            Operands::CountsOnly => Ok(None),
            Operands::Matrices { input, weight } => Ok(Some((input.clone(), weight.clone()))),
            Operands::Synthetic { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let input = IntMatrix::random(&mut rng, self.t_rows, self.k_depth)?;
                let weight = IntMatrix::random(&mut rng, self.k_depth, self.m_cols)?;
                Ok(Some((input, weight)))
            }
        }
    }
}

/// Lowers one group of a convolution to a GEMM: T = out_h*out_w,
/// K = kernel_h*kernel_w*(in_c/groups), Mc = out_c/groups.
pub fn im2col(layer: &ConvLayer) -> Result<GemmJob> {
    let (oh, ow) = layer.output_dims()?;
    GemmJob::new(
        oh * ow,
        layer.kernel_h * layer.kernel_w * (layer.in_c / layer.groups),
        layer.out_c / layer.groups,
    )
}

/// Height x width x channel activation tensor, channel fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tensor3 {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    data: Vec<SlicedInt8>,
}

impl Tensor3 {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<SlicedInt8>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::Shape(format!("{h}x{w}x{c} tensor needs {} values, got {}", h * w * c, data.len())));
        }
        Ok(Tensor3 { h, w, c, data })
    }

    pub fn get(&self, y: usize, x: usize, ch: usize) -> SlicedInt8 {
        self.data[(y * self.w + x) * self.c + ch]
    }
}

/// Index-arithmetic view of the im2col matrix of a single-group convolution.
/// Column k decomposes as `(ky * kernel_w + kx) * in_c + ch`.
#[derive(Debug, Clone, Copy)]
pub struct Im2ColView<'a> {
    layer: ConvLayer,
    out_w: usize,
    tensor: &'a Tensor3,
}

impl<'a> Im2ColView<'a> {
    pub fn new(layer: &ConvLayer, tensor: &'a Tensor3) -> Result<Self> {
        let (_, out_w) = layer.output_dims()?;
        if layer.groups != 1 {
            return Err(Error::Geometry("im2col view covers single-group convolutions".into()));
        }
        if (tensor.h, tensor.w, tensor.c) != (layer.in_h, layer.in_w, layer.in_c) {
            return Err(Error::Shape(format!(
                "tensor is {}x{}x{} but layer expects {}x{}x{}",
                tensor.h, tensor.w, tensor.c, layer.in_h, layer.in_w, layer.in_c
            )));
        }
        Ok(Im2ColView {
            layer: *layer,
            out_w,
            tensor,
        })
    }

    pub fn get(&self, t: usize, k: usize) -> SlicedInt8 {
        let l = &self.layer;
        let (oy, ox) = (t / self.out_w, t % self.out_w);
        let ch = k % l.in_c;
        let kk = k / l.in_c;
        let (ky, kx) = (kk / l.kernel_w, kk % l.kernel_w);
        let y = (oy * l.stride + ky) as isize - l.padding as isize;
        let x = (ox * l.stride + kx) as isize - l.padding as isize;
        if y < 0 || x < 0 || y >= l.in_h as isize || x >= l.in_w as isize {
            SlicedInt8::ZERO
        } else {
            self.tensor.get(y as usize, x as usize, ch)
        }
    }

    /// Copies the full im2col matrix.
    pub fn materialize(&self) -> Result<IntMatrix> {
        let job = im2col(&self.layer)?;
        let mut data = Vec::with_capacity(job.t_rows * job.k_depth);
        for t in 0..job.t_rows {
            data.extend((0..job.k_depth).map(|k| self.get(t, k)));
        }
        IntMatrix::new(job.t_rows, job.k_depth, data)
    }
}

/// Row access for the functional executor.
pub trait InputRows: Sync {
    fn fill_row(&self, t: usize, out: &mut Vec<SlicedInt8>);
}

impl InputRows for IntMatrix {
    fn fill_row(&self, t: usize, out: &mut Vec<SlicedInt8>) {
        out.clear();
        out.extend_from_slice(self.row(t));
    }
}

impl InputRows for Im2ColView<'_> {
    fn fill_row(&self, t: usize, out: &mut Vec<SlicedInt8>) {
        out.clear();
        let k_depth = self.layer.kernel_h * self.layer.kernel_w * self.layer.in_c;
        out.extend((0..k_depth).map(|k| self.get(t, k)));
    }
}

/// One scheduled time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub row: usize,
    pub k_chunk: usize,
    pub col_block: usize,
    /// Vector elements in this chunk (OAMEs / wavelengths in use).
    pub active_oames: usize,
    /// Output columns in this block (DPUs / waveguides in use).
    pub active_dpus: usize,
}

/// Sums over all steps of a plan, in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Occupancy {
    pub steps: u64,
    pub dot_products: u64,
    /// Sum of active OAMEs per step.
    pub oame_steps: u64,
    /// Sum of active OAMEs x active DPUs per step (useful MACs).
    pub mac_slots: u64,
    /// Capacity N*M summed over steps.
    pub capacity_slots: u64,
}

impl std::ops::AddAssign for Occupancy {
    fn add_assign(&mut self, r: Occupancy) {
        self.steps += r.steps;
        self.dot_products += r.dot_products;
        self.oame_steps += r.oame_steps;
        self.mac_slots += r.mac_slots;
        self.capacity_slots += r.capacity_slots;
    }
}

/// Deterministic schedule of a job on one core. Steps are generated lazily.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingPlan {
    pub t_rows: usize,
    pub k_depth: usize,
    pub m_cols: usize,
    pub n_vector: usize,
    pub m_dot_products: usize,
    pub k_chunks: usize,
    pub col_blocks: usize,
    pub steps_total: u64,
}

impl MappingPlan {
    fn chunk_len(total: usize, width: usize, idx: usize) -> usize {
        (total - idx * width).min(width)
    }

    pub fn step(&self, index: u64) -> Step {
        let per_row = (self.k_chunks * self.col_blocks) as u64;
        let row = (index / per_row) as usize;
        let rem = (index % per_row) as usize;
        let (k_chunk, col_block) = (rem / self.col_blocks, rem % self.col_blocks);
        Step {
            row,
            k_chunk,
            col_block,
            active_oames: Self::chunk_len(self.k_depth, self.n_vector, k_chunk),
            active_dpus: Self::chunk_len(self.m_cols, self.m_dot_products, col_block),
        }
    }

    pub fn steps(&self) -> impl Iterator<Item = Step> + '_ {
        (0..self.steps_total).map(move |i| self.step(i))
    }

    pub fn dot_products(&self) -> u64 {
        self.t_rows as u64 * self.k_chunks as u64 * self.m_cols as u64
    }

    pub fn occupancy(&self) -> Occupancy {
        let t = self.t_rows as u64;
        Occupancy {
            steps: self.steps_total,
            dot_products: self.dot_products(),
            oame_steps: t * self.k_depth as u64 * self.col_blocks as u64,
            mac_slots: t * self.k_depth as u64 * self.m_cols as u64,
            capacity_slots: self.steps_total * (self.n_vector * self.m_dot_products) as u64,
        }
    }

    fn check(&self, job: &GemmJob, arch: &ArchConfig) -> Result<()> {
        if job.dims() != (self.t_rows, self.k_depth, self.m_cols) {
            return Err(Error::PlanStale(format!(
                "plan is for {:?}, job is {:?}",
                (self.t_rows, self.k_depth, self.m_cols),
                job.dims()
            )));
        }
        if (arch.n_vector, arch.m_dot_products) != (self.n_vector, self.m_dot_products) {
            return Err(Error::PlanStale(format!(
                "plan targets N={} M={}, architecture {} has N={} M={}",
                self.n_vector, self.m_dot_products, arch.name, arch.n_vector, arch.m_dot_products
            )));
        }
        Ok(())
    }
}

pub fn plan(job: &GemmJob, arch: &ArchConfig) -> MappingPlan {
    let k_chunks = job.k_depth.div_ceil(arch.n_vector);
    let col_blocks = job.m_cols.div_ceil(arch.m_dot_products);
    MappingPlan {
        t_rows: job.t_rows,
        k_depth: job.k_depth,
        m_cols: job.m_cols,
        n_vector: arch.n_vector,
        m_dot_products: arch.m_dot_products,
        k_chunks,
        col_blocks,
        steps_total: job.t_rows as u64 * k_chunks as u64 * col_blocks as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Functional,
    #[default]
    CountsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExecOptions {
    pub mode: ExecMode,
    pub adc: AdcModel,
    pub parallelism: Parallelism,
    pub fault: Option<SelectorFault>,
}

impl ExecOptions {
    pub fn functional() -> Self {
        ExecOptions {
            mode: ExecMode::Functional,
            ..Default::default()
        }
    }
}

/// Row-major output matrix of exact (or ADC-quantized) dot products.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl OutputMatrix {
    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub output: Option<OutputMatrix>,
    pub tally: ConversionTally,
    pub dot_products: u64,
    pub steps: u64,
}

/// The per-dot-product datapath of an architecture.
#[derive(Debug, Clone, Copy)]
enum Datapath {
    Spoga(DpuConfig),
    Baseline(BaselineCore),
}

impl Datapath {
    fn new(arch: &ArchConfig, adc: AdcModel, fault: Option<SelectorFault>) -> Result<Self> {
        Ok(match arch.organization {
            Organization::Mwa => {
                let mut cfg = DpuConfig::new(arch.n_vector, adc)?;
                cfg.fault = fault;
                Datapath::Spoga(cfg)
            }
            org => Datapath::Baseline(BaselineCore::new(org, arch.n_vector, adc)?),
        })
    }

    fn tally(&self) -> ConversionTally {
        match self {
            Datapath::Spoga(_) => ConversionTally::SPOGA,
            Datapath::Baseline(core) => core.tally(),
        }
    }

    fn dot(&self, a: &[SlicedInt8], b: &[SlicedInt8]) -> Result<(i64, ConversionTally)> {
        match self {
            Datapath::Spoga(cfg) => dpu_dot(cfg, a, b),
            Datapath::Baseline(core) => baseline_dot(core, a, b),
        }
    }
}

/// Conversion tally of a whole plan without touching operand values.
pub fn plan_tally(plan: &MappingPlan, arch: &ArchConfig) -> Result<ConversionTally> {
    Ok(Datapath::new(arch, AdcModel::Ideal, None)?.tally() * plan.dot_products())
}

fn run_functional<I: InputRows>(
    plan: &MappingPlan,
    input: &I,
    weight: &IntMatrix,
    path: &Datapath,
    parallelism: Parallelism,
) -> Result<(OutputMatrix, ConversionTally)> {
    let columns = weight.transpose();
    let rows = par::map_range(parallelism, plan.t_rows, |t| -> Result<(Vec<i64>, ConversionTally)> {
        let mut row = Vec::with_capacity(plan.k_depth);
        input.fill_row(t, &mut row);
        let mut out = vec![0i64; plan.m_cols];
        let mut tally = ConversionTally::default();
        for kc in 0..plan.k_chunks {
            let k0 = kc * plan.n_vector;
            let k1 = (k0 + plan.n_vector).min(plan.k_depth);
            for cb in 0..plan.col_blocks {
                let c0 = cb * plan.m_dot_products;
                let c1 = (c0 + plan.m_dot_products).min(plan.m_cols);
                for c in c0..c1 {
                    let (v, t) = path.dot(&row[k0..k1], &columns.row(c)[k0..k1])?;
                    out[c] += v;
                    tally += t;
                }
            }
        }
        Ok((out, tally))
    });
    let mut data = Vec::with_capacity(plan.t_rows * plan.m_cols);
    let mut tally = ConversionTally::default();
    for r in rows {
        let (row, t) = r?;
        data.extend(row);
        tally += t;
    }
    Ok((
        OutputMatrix {
            rows: plan.t_rows,
            cols: plan.m_cols,
            data,
        },
        tally,
    ))
}

/// Drives the datapath over every scheduled step.
pub fn execute_plan(plan: &MappingPlan, job: &GemmJob, arch: &ArchConfig, opts: &ExecOptions) -> Result<Execution> {
    plan.check(job, arch)?;
    let path = Datapath::new(arch, opts.adc, opts.fault)?;
    let (output, tally) = match opts.mode {
        ExecMode::CountsOnly => (None, path.tally() * plan.dot_products()),
        ExecMode::Functional => {
            let (input, weight) = job
                .materialize()?
                .ok_or_else(|| Error::Input("functional mode requires operand matrices".into()))?;
            let (out, tally) = run_functional(plan, &input, &weight, &path, opts.parallelism)?;
            (Some(out), tally)
        }
    };
    Ok(Execution {
        output,
        tally,
        dot_products: plan.dot_products(),
        steps: plan.steps_total,
    })
}

/// Functional convolution through a virtual im2col view.
pub fn execute_conv(
    layer: &ConvLayer,
    tensor: &Tensor3,
    weight: &IntMatrix,
    arch: &ArchConfig,
    opts: &ExecOptions,
) -> Result<Execution> {
    let view = Im2ColView::new(layer, tensor)?;
    let job = im2col(layer)?;
    if (weight.rows(), weight.cols()) != (job.k_depth, job.m_cols) {
        return Err(Error::Shape(format!(
            "conv weight must be {}x{}, got {}x{}",
            job.k_depth,
            job.m_cols,
            weight.rows(),
            weight.cols()
        )));
    }
    let plan = plan(&job, arch);
    let path = Datapath::new(arch, opts.adc, opts.fault)?;
    let (out, tally) = run_functional(&plan, &view, weight, &path, opts.parallelism)?;
    Ok(Execution {
        output: Some(out),
        tally,
        dot_products: plan.dot_products(),
        steps: plan.steps_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::lookup_config;
    use crate::bitslice::{random_vector, slice};
    use rand::Rng;

    fn mwa249() -> ArchConfig {
        lookup_config(Organization::Mwa, 1, Some(10.0)).unwrap()
    }

    #[test]
    fn im2col_examples() {
        let j = im2col(&ConvLayer::new((56, 56, 64), 128, (3, 3), 1, 1)).unwrap();
        assert_eq!(j.dims(), (3136, 576, 128));
        let j = im2col(&ConvLayer::new((28, 28, 256), 64, (1, 1), 1, 0)).unwrap();
        assert_eq!(j.dims(), (784, 256, 64));
        let j = im2col(&ConvLayer::new((224, 224, 3), 32, (3, 3), 2, 1)).unwrap();
        assert_eq!(j.dims(), (112 * 112, 27, 32));
        let dw = ConvLayer::new((112, 112, 32), 32, (3, 3), 1, 1).with_groups(32);
        assert_eq!(im2col(&dw).unwrap().dims(), (112 * 112, 9, 1));
    }

    #[test]
    fn im2col_geometry_errors() {
        assert!(matches!(im2col(&ConvLayer::new((2, 2, 1), 1, (5, 5), 1, 0)), Err(Error::Geometry(_))));
        assert!(im2col(&ConvLayer::new((8, 8, 1), 1, (3, 3), 0, 0)).is_err());
        assert!(im2col(&ConvLayer::new((8, 8, 6), 4, (3, 3), 1, 0).with_groups(4)).is_err());
        assert!(im2col(&ConvLayer::new((2, 2, 1), 1, (5, 5), 1, 2)).is_ok());
    }

    #[test]
    fn plan_examples() {
        let arch = mwa249();
        assert_eq!(plan(&GemmJob::new(1, 249, 16).unwrap(), &arch).steps_total, 1);
        assert_eq!(plan(&GemmJob::new(2, 498, 17).unwrap(), &arch).steps_total, 8);
        assert_eq!(plan(&GemmJob::new(2, 500, 17).unwrap(), &arch).steps_total, 12);
        let holy = lookup_config(Organization::Maw, 1, None).unwrap();
        assert_eq!(plan(&GemmJob::new(37, 43, 43).unwrap(), &holy).steps_total, 37);
    }

    #[test]
    fn steps_tile_iteration_space_exactly_once() {
        let arch = ArchConfig::custom("t", Organization::Mwa, 1, 7, 3).unwrap();
        for (t, k, m) in [(3, 20, 8), (1, 1, 1), (2, 7, 3), (4, 6, 10), (1, 15, 1)] {
            let job = GemmJob::new(t, k, m).unwrap();
            let p = plan(&job, &arch);
            let mut marks = vec![0u8; t * k * m];
            let mut count = 0u64;
            for s in p.steps() {
                assert!(s.active_oames <= 7 && s.active_dpus <= 3);
                for kk in s.k_chunk * 7..s.k_chunk * 7 + s.active_oames {
                    for mm in s.col_block * 3..s.col_block * 3 + s.active_dpus {
                        marks[(s.row * k + kk) * m + mm] += 1;
                    }
                }
                count += 1;
            }
            assert!(marks.iter().all(|&x| x == 1));
            assert_eq!(count, p.steps_total);
            let occ = p.occupancy();
            let summed: u64 = p.steps().map(|s| s.active_oames as u64).sum();
            assert_eq!(occ.oame_steps, summed);
            let macs: u64 = p.steps().map(|s| (s.active_oames * s.active_dpus) as u64).sum();
            assert_eq!(occ.mac_slots, macs);
        }
    }

    #[test]
    fn steps_are_row_major() {
        let arch = ArchConfig::custom("t", Organization::Mwa, 1, 2, 2).unwrap();
        let p = plan(&GemmJob::new(2, 3, 3).unwrap(), &arch);
        let order: Vec<_> = p.steps().map(|s| (s.row, s.k_chunk, s.col_block)).collect();
        assert_eq!(
            order,
            vec![(0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1)]
        );
    }

    #[test]
    fn identity_weight_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = IntMatrix::random(&mut rng, 4, 4).unwrap();
        let job = GemmJob::from_matrices(input.clone(), IntMatrix::identity(4).unwrap()).unwrap();
        let arch = mwa249();
        let ex = execute_plan(&plan(&job, &arch), &job, &arch, &ExecOptions::functional()).unwrap();
        let out = ex.output.unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(out.get(r, c), input.get(r, c).value() as i64);
            }
        }
    }

    #[test]
    fn folded_gemm_matches_triple_loop_and_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = IntMatrix::random(&mut rng, 8, 300).unwrap();
        let weight = IntMatrix::random(&mut rng, 300, 20).unwrap();
        let job = GemmJob::from_matrices(input.clone(), weight.clone()).unwrap();
        let arch = mwa249();
        let p = plan(&job, &arch);
        let ex = execute_plan(&p, &job, &arch, &ExecOptions::functional()).unwrap();
        let out = ex.output.unwrap();
        for t in 0..8 {
            for m in 0..20 {
                let mut acc = 0i64;
                for k in 0..300 {
                    acc += input.get(t, k).value() as i64 * weight.get(k, m).value() as i64;
                }
                assert_eq!(out.get(t, m), acc);
            }
        }
        assert_eq!(ex.dot_products, 320);
        assert_eq!((ex.tally.oe, ex.tally.adc), (960, 320));
        let counts = execute_plan(&p, &job, &arch, &ExecOptions::default()).unwrap();
        assert_eq!(counts.tally, ex.tally);
        assert!(counts.output.is_none());
    }

    #[test]
    fn stale_plan_and_missing_operands() {
        let arch = mwa249();
        let job = GemmJob::new(2, 3, 4).unwrap();
        let other = GemmJob::new(2, 3, 5).unwrap();
        let p = plan(&job, &arch);
        assert!(matches!(execute_plan(&p, &other, &arch, &ExecOptions::default()), Err(Error::PlanStale(_))));
        let holy = lookup_config(Organization::Maw, 1, None).unwrap();
        assert!(matches!(execute_plan(&p, &job, &holy, &ExecOptions::default()), Err(Error::PlanStale(_))));
        assert!(matches!(execute_plan(&p, &job, &arch, &ExecOptions::functional()), Err(Error::Input(_))));
    }

    #[test]
    fn virtual_im2col_matches_explicit_and_direct_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = ConvLayer::new((7, 6, 3), 5, (3, 2), 2, 1);
        let tensor = Tensor3::new(7, 6, 3, random_vector(&mut rng, 7 * 6 * 3)).unwrap();
        let job = im2col(&layer).unwrap();
        let weight = IntMatrix::random(&mut rng, job.k_depth, job.m_cols).unwrap();
        let arch = ArchConfig::custom("small", Organization::Mwa, 1, 4, 2).unwrap();

        let via_view = execute_conv(&layer, &tensor, &weight, &arch, &ExecOptions::functional()).unwrap();
        let explicit = Im2ColView::new(&layer, &tensor).unwrap().materialize().unwrap();
        let ejob = GemmJob::from_matrices(explicit, weight.clone()).unwrap();
        let via_copy = execute_plan(&plan(&ejob, &arch), &ejob, &arch, &ExecOptions::functional()).unwrap();
        assert_eq!(via_view, via_copy);

        // direct sliding-window convolution
        let (oh, ow) = layer.output_dims().unwrap();
        let out = via_view.output.unwrap();
        for oy in 0..oh {
            for ox in 0..ow {
                for oc in 0..5 {
                    let mut acc = 0i64;
                    for ky in 0..3 {
                        for kx in 0..2 {
                            let y = (oy * 2 + ky) as isize - 1;
                            let x = (ox * 2 + kx) as isize - 1;
                            if y < 0 || x < 0 || y >= 7 || x >= 6 {
                                continue;
                            }
                            for ch in 0..3 {
                                let w = weight.get((ky * 2 + kx) * 3 + ch, oc).value() as i64;
                                acc += tensor.get(y as usize, x as usize, ch).value() as i64 * w;
                            }
                        }
                    }
                    assert_eq!(out.get(oy * ow + ox, oc), acc);
                }
            }
        }
    }

    #[test]
    fn baseline_and_spoga_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (t, k, m) = (rng.random_range(1..5), rng.random_range(1..60), rng.random_range(1..30));
            let job = GemmJob::new(t, k, m).unwrap().with_synthetic(rng.random());
            let spoga = ArchConfig::custom("s", Organization::Mwa, 10, 16, 16).unwrap();
            let mut outs = vec![];
            for org in Organization::ALL {
                let arch = ArchConfig { organization: org, ..spoga.clone() };
                let ex = execute_plan(&plan(&job, &arch), &job, &arch, &ExecOptions::functional()).unwrap();
                outs.push(ex.output.unwrap());
            }
            assert_eq!(outs[0], outs[1]);
            assert_eq!(outs[1], outs[2]);
        }
    }

    #[test]
    fn deterministic_across_parallelism() {
        let job = GemmJob::new(40, 300, 33).unwrap().with_synthetic(77);
        let arch = mwa249();
        let p = plan(&job, &arch);
        let par = execute_plan(&p, &job, &arch, &ExecOptions::functional()).unwrap();
        let seq = execute_plan(
            &p,
            &job,
            &arch,
            &ExecOptions { parallelism: Parallelism::Sequential, ..ExecOptions::functional() },
        )
        .unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn fault_corrupts_gemm() {
        let job = GemmJob::from_matrices(
            IntMatrix::new(1, 1, vec![slice(17).unwrap()]).unwrap(),
            IntMatrix::new(1, 1, vec![slice(17).unwrap()]).unwrap(),
        )
        .unwrap();
        let arch = mwa249();
        let opts = ExecOptions { fault: Some(SelectorFault::FLIPPED_MIDDLE), ..ExecOptions::functional() };
        let ex = execute_plan(&plan(&job, &arch), &job, &arch, &opts).unwrap();
        assert_ne!(ex.output.unwrap().get(0, 0), 289);
    }
}
