//! Oracle sweeps: the functional datapaths against exact integer arithmetic.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{ArchConfig, Organization};
use crate::bitslice::{random_vector, IntMatrix, SlicedInt8, MAX_MAGNITUDE};
use crate::error::Result;
use crate::mapper::{execute_plan, plan, ExecOptions, GemmJob};
use crate::par::{self, Parallelism};
use crate::photonic::{
    baseline_dot, dpu_dot, intermediate_width_bits, AdcModel, AnalogAccumulator, BaselineCore, Capacitor,
    ConversionTally, DpuConfig, Radix, SelectorFault,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x005E_ED0F_5B0A;

/// Longest vector a DPU accepts in the bundled table.
pub const MAX_VECTOR_LEN: usize = 249;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Random vector pairs per dot-product suite.
    pub trials: u64,
    /// Random GEMM jobs checked end to end.
    pub gemm_jobs: u64,
    pub seed: u64,
    /// Adds the full length-1 operand grid (511 x 511 cases).
    pub exhaustive: bool,
    pub fault: Option<SelectorFault>,
    pub parallelism: Parallelism,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            trials: 10_000,
            gemm_jobs: 100,
            seed: DEFAULT_SEED,
            exhaustive: false,
            fault: None,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: u64,
    pub mismatches: u64,
    /// Lowest-index failing case.
    pub first_counterexample: Option<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<18} {:>9} cases {:>7} mismatches  {}",
            self.name,
            self.cases,
            self.mismatches,
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        if let Some(c) = &self.first_counterexample {
            write!(f, "\n    first counterexample: {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn mismatches(&self) -> u64 {
        self.suites.iter().map(|s| s.mismatches).sum()
    }
}

/// Deterministic per-case RNG, independent of scheduling.
pub fn case_rng(seed: u64, suite: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(suite);
    rng.set_word_pos(u128::from(index) << 20);
    rng
}

fn run_suite<F>(name: &'static str, cases: u64, parallelism: Parallelism, check: F) -> SuiteResult
where
    F: Fn(u64) -> Option<String> + Sync + Send,
{
    let outcomes = par::map_range(parallelism, cases as usize, |i| check(i as u64));
    let mut mismatches = 0;
    let mut first = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        if let Some(msg) = o {
            mismatches += 1;
            first.get_or_insert_with(|| format!("case {i}: {msg}"));
        }
    }
    SuiteResult {
        name,
        cases,
        mismatches,
        first_counterexample: first,
    }
}

/// Plain integer dot product on the decoded values.
fn naive_dot(a: &[SlicedInt8], b: &[SlicedInt8]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x.value() as i64 * y.value() as i64).sum()
}

fn show(v: &[SlicedInt8]) -> String {
    let vals: Vec<i32> = v.iter().map(|x| x.value()).collect();
    if vals.len() <= 8 {
        format!("{vals:?}")
    } else {
        format!("{:?}.. (len {})", &vals[..8], vals.len())
    }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (Vec<SlicedInt8>, Vec<SlicedInt8>) {
    let len = rng.random_range(1..=MAX_VECTOR_LEN);
    (random_vector(rng, len), random_vector(rng, len))
}

fn baseline_tally(n: usize) -> ConversionTally {
    ConversionTally::new(4, 4, 3, (4 * intermediate_width_bits(n)).div_ceil(8))
}

fn check_spoga(dpu: &DpuConfig, a: &[SlicedInt8], b: &[SlicedInt8]) -> Option<String> {
    let want = naive_dot(a, b);
    match dpu_dot(dpu, a, b) {
        Ok((got, tally)) if got == want && tally == ConversionTally::SPOGA => None,
        Ok((got, tally)) => Some(format!("a={} b={} dpu={got} oracle={want} tally={tally:?}", show(a), show(b))),
        Err(e) => Some(format!("a={} b={} error: {e}", show(a), show(b))),
    }
}

fn dpu(cfg: &VerifyConfig) -> Result<DpuConfig> {
    let mut d = DpuConfig::ideal(MAX_VECTOR_LEN)?;
    d.fault = cfg.fault;
    Ok(d)
}

/// DPU against the oracle on random vector pairs.
pub fn dpu_sweep(cfg: &VerifyConfig) -> Result<SuiteResult> {
    let d = dpu(cfg)?;
    Ok(run_suite("dpu_dot", cfg.trials, cfg.parallelism, |i| {
        let (a, b) = random_pair(&mut case_rng(cfg.seed, 1, i));
        check_spoga(&d, &a, &b)
    }))
}

/// Every length-1 operand pair.
pub fn exhaustive_grid(cfg: &VerifyConfig) -> Result<SuiteResult> {
    let d = dpu(cfg)?;
    let side = (2 * MAX_MAGNITUDE + 1) as u64;
    Ok(run_suite("dpu_dot_grid", side * side, cfg.parallelism, |i| {
        let x = (i / side) as i32 - MAX_MAGNITUDE;
        let y = (i % side) as i32 - MAX_MAGNITUDE;
        let a = [SlicedInt8::try_from(x).expect("in range")];
        let b = [SlicedInt8::try_from(y).expect("in range")];
        check_spoga(&d, &a, &b)
    }))
}

/// MAW and AMW bit-sliced dataflows against the DPU and the oracle.
pub fn baseline_sweep(cfg: &VerifyConfig) -> Result<SuiteResult> {
    let d = dpu(cfg)?;
    let cores = [
        BaselineCore::new(Organization::Maw, MAX_VECTOR_LEN, AdcModel::Ideal)?,
        BaselineCore::new(Organization::Amw, MAX_VECTOR_LEN, AdcModel::Ideal)?,
    ];
    let want_tally = baseline_tally(MAX_VECTOR_LEN);
    Ok(run_suite("baseline_dot", cfg.trials, cfg.parallelism, |i| {
        let (a, b) = random_pair(&mut case_rng(cfg.seed, 2, i));
        let want = naive_dot(&a, &b);
        if let Some(m) = check_spoga(&d, &a, &b) {
            return Some(m);
        }
        for core in &cores {
            match baseline_dot(core, &a, &b) {
                Ok((got, t)) if got == want && t == want_tally && t.memory_bytes > 0 => {}
                Ok((got, t)) => {
                    return Some(format!(
                        "{} a={} b={} baseline={got} oracle={want} tally={t:?}",
                        core.organization,
                        show(&a),
                        show(&b)
                    ))
                }
                Err(e) => return Some(format!("{}: {e}", core.organization)),
            }
        }
        None
    }))
}

/// Triple-loop GEMM on decoded values.
pub fn naive_gemm(input: &IntMatrix, weight: &IntMatrix) -> Vec<i64> {
    let (t, k, m) = (input.rows(), input.cols(), weight.cols());
    let mut out = vec![0i64; t * m];
    for r in 0..t {
        for c in 0..m {
            let mut acc = 0i64;
            for j in 0..k {
                acc += input.get(r, j).value() as i64 * weight.get(j, c).value() as i64;
            }
            out[r * m + c] = acc;
        }
    }
    out
}

/// Random GEMM jobs, including k_depth > N, through the full plan executor
/// on all three organizations.
pub fn gemm_sweep(cfg: &VerifyConfig) -> Result<SuiteResult> {
    Ok(run_suite("execute_plan", cfg.gemm_jobs, cfg.parallelism, |i| {
        let mut rng = case_rng(cfg.seed, 3, i);
        let n = rng.random_range(1..=64);
        let m = rng.random_range(1..=16);
        let t = rng.random_range(1..=6);
        let k = rng.random_range(1..=3 * n);
        let cols = rng.random_range(1..=2 * m);
        let input = IntMatrix::random(&mut rng, t, k).expect("valid dims");
        let weight = IntMatrix::random(&mut rng, k, cols).expect("valid dims");
        let want = naive_gemm(&input, &weight);
        let job = GemmJob::from_matrices(input, weight).expect("matching dims");
        let opts = ExecOptions {
            fault: cfg.fault,
            parallelism: Parallelism::Sequential,
            ..ExecOptions::functional()
        };
        for org in Organization::ALL {
            let arch = ArchConfig::custom("sweep", org, 10, n, m).expect("positive dims");
            let p = plan(&job, &arch);
            let got = match execute_plan(&p, &job, &arch, &opts) {
                Ok(ex) => ex.output.map(|o| o.data),
                Err(e) => return Some(format!("{org} {:?}: {e}", job.dims())),
            };
            if got.as_deref() != Some(&want[..]) {
                return Some(format!("{org} job {:?} on N={n} M={m}: output differs from triple loop", job.dims()));
            }
        }
        None
    }))
}

/// Voltage ratios of the three capacitor selectors for fixed charge.
pub fn radix_check() -> SuiteResult {
    let charges = [1.0, 3.0, 255.0 * 255.0 * 249.0, 1e-3, 7.5];
    run_suite("capacitor_radix", charges.len() as u64, Parallelism::Sequential, |i| {
        let q = charges[i as usize];
        let v = |c: Capacitor| AnalogAccumulator::from_charge(Radix::R1, c, q).output_voltage();
        let (v0, v16, v256) = (v(Capacitor::C0), v(Capacitor::C0Over16), v(Capacitor::C0Over256));
        let ok = ((v16 / v0) - 16.0).abs() <= 16.0 * 1e-12 && ((v256 / v0) - 256.0).abs() <= 256.0 * 1e-12;
        (!ok).then(|| format!("charge {q}: voltages {v0} {v16} {v256}"))
    })
}

/// All suites in a fixed order.
pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut suites = vec![dpu_sweep(cfg)?];
    if cfg.exhaustive {
        suites.push(exhaustive_grid(cfg)?);
    }
    suites.push(baseline_sweep(cfg)?);
    suites.push(gemm_sweep(cfg)?);
    suites.push(radix_check());
    Ok(VerifyReport { suites })
}
