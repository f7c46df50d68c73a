use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use spoga::arch::{ArchConfig, LinkBudgetParams, ScalabilityTable};
use spoga::par::Parallelism;
use spoga::perf::{
    compare, simulate, AcceleratorBudget, CompareOptions, ComponentCostTable, SimMode, SimOptions,
    DEFAULT_CORE_COUNT,
};
use spoga::photonic::{AdcModel, SelectorFault};
use spoga::report::{
    comparison_csv, layers_csv, metric_charts, scalability_csv, scalability_rows, summary_csv, ScalabilitySource,
};
use spoga::verify::{run_all, VerifyConfig, DEFAULT_SEED};
use spoga::workload::{resolve_model, BUNDLED_MODELS};

use crate::config::{out_dir, pick, switch, AdcKind, FileConfig, Source};
use crate::{Cli, Command, CompareArgs, CostArgs, Failure, ScalabilityArgs, SimulateArgs, VerifyArgs};

const DEFAULT_COMPARE_ARCHS: [&str; 3] = ["SPOGA_10", "DEAPCNN_10", "HOLYLIGHT_10"];
const DEFAULT_RATES: [f64; 3] = [1.0, 5.0, 10.0];
const DEFAULT_POWERS: [f64; 3] = [1.0, 5.0, 10.0];

struct Runtime {
    threads: Option<usize>,
    parallelism: Parallelism,
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(Failure::Config("--threads must be at least 1".into()));
    }
    let sequential = switch(cli.sequential, file.sequential);
    let rt = Runtime {
        threads,
        parallelism: if sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        },
    };
    init_threads(threads)?;
    match cli.command {
        Command::Verify(a) => verify(a, &file, &rt),
        Command::Simulate(a) => simulate_cmd(a, &file, &rt),
        Command::Scalability(a) => scalability(a, &file, &rt),
        Command::Compare(a) => compare_cmd(a, &file, &rt),
    }
}

#[cfg(feature = "parallel")]
fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(_threads: Option<usize>) -> Result<(), Failure> {
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn echo_config<T: Serialize>(dir: &Path, cfg: &T) -> Result<(), Failure> {
    let text = toml::to_string(cfg).map_err(|e| Failure::Other(format!("config echo: {e}")))?;
    write(dir, "effective_config.toml", &text).map(|_| ())
}

fn load_costs(path: Option<&Path>) -> Result<ComponentCostTable, Failure> {
    let base = ComponentCostTable::bundled();
    match path {
        None => Ok(base),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Ok(base.with_overrides(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?)
        }
    }
}

/// Selector such as `SPOGA_10`, or a bare name completed from rate and power.
fn resolve_arch(sel: &str, rate: Option<u32>, power: Option<f64>) -> Result<ArchConfig, Failure> {
    if sel.contains('_') {
        return Ok(ArchConfig::from_selector(sel)?);
    }
    let mut s = format!("{sel}_{}", rate.unwrap_or(10));
    if let Some(p) = power {
        s.push_str(&format!("@{p}dBm"));
    }
    Ok(ArchConfig::from_selector(&s)?)
}

fn file_name_part(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

#[derive(Serialize)]
struct VerifyEcho {
    command: &'static str,
    trials: u64,
    gemm_jobs: u64,
    seed: u64,
    exhaustive: bool,
    inject_fault: bool,
    sequential: bool,
    threads: Option<usize>,
}

fn verify(a: VerifyArgs, file: &FileConfig, rt: &Runtime) -> Result<(), Failure> {
    let cfg = VerifyConfig {
        trials: pick(a.trials, file.verify.trials, 10_000),
        gemm_jobs: pick(a.gemm_jobs, file.verify.gemm_jobs, 100),
        seed: pick(a.seed, file.seed, DEFAULT_SEED),
        exhaustive: switch(a.exhaustive, file.verify.exhaustive),
        fault: a.inject_fault.then_some(SelectorFault::FLIPPED_MIDDLE),
        parallelism: rt.parallelism,
    };
    if cfg.trials == 0 {
        return Err(Failure::Config("--trials must be at least 1".into()));
    }
    let echo = VerifyEcho {
        command: "verify",
        trials: cfg.trials,
        gemm_jobs: cfg.gemm_jobs,
        seed: cfg.seed,
        exhaustive: cfg.exhaustive,
        inject_fault: a.inject_fault,
        sequential: rt.parallelism == Parallelism::Sequential,
        threads: rt.threads,
    };
    print!("{}", toml::to_string(&echo).map_err(|e| Failure::Other(e.to_string()))?);
    let report = run_all(&cfg)?;
    for s in &report.suites {
        println!("{s}");
    }
    println!("per dot product: SPOGA (O/E 3, ADC 1, DEAS 0, memory 0); baseline (O/E 4, ADC 4, DEAS 3, memory > 0)");
    if report.passed() {
        println!("verify: PASS, 0 mismatches");
        Ok(())
    } else {
        Err(Failure::Verification(format!("{} mismatches", report.mismatches())))
    }
}

#[derive(Serialize)]
struct SimulateEcho {
    command: &'static str,
    model: String,
    archs: Vec<String>,
    cores: usize,
    functional: bool,
    seed: u64,
    adc: AdcKind,
    adc_bits: u32,
    occupancy_gating: bool,
    log_fps: bool,
    out_dir: PathBuf,
    costs_file: Option<PathBuf>,
    sequential: bool,
    threads: Option<usize>,
    costs: ComponentCostTable,
}

struct Common {
    cores: usize,
    costs_file: Option<PathBuf>,
    costs: ComponentCostTable,
    out_dir: PathBuf,
    gating: bool,
    log_fps: bool,
}

fn common(c: CostArgs, file: &FileConfig) -> Result<Common, Failure> {
    let cores = pick(c.cores, file.cores, DEFAULT_CORE_COUNT);
    if cores == 0 {
        return Err(Failure::Config("--cores must be at least 1".into()));
    }
    let costs_file = c.costs.or(file.costs.clone());
    Ok(Common {
        cores,
        costs: load_costs(costs_file.as_deref())?,
        costs_file,
        out_dir: out_dir(c.out, file.out_dir.clone()),
        gating: switch(c.occupancy_gating, file.occupancy_gating),
        log_fps: !c.linear_fps && file.log_fps.unwrap_or(true),
    })
}

fn write_charts(dir: &Path, reports: &[spoga::perf::RunReport], log_fps: bool) -> Result<(), Failure> {
    for (name, chart) in metric_charts(reports, log_fps) {
        write(dir, &format!("chart_{name}.svg"), &chart.to_svg())?;
    }
    Ok(())
}

fn simulate_cmd(a: SimulateArgs, file: &FileConfig, rt: &Runtime) -> Result<(), Failure> {
    let s = &file.simulate;
    let model_name = a
        .model
        .clone()
        .or(s.model.clone())
        .ok_or_else(|| Failure::Config(format!("--model is required (bundled: {})", BUNDLED_MODELS.join(", "))))?;
    let sels = if a.archs.is_empty() { s.archs.clone().unwrap_or_default() } else { a.archs.clone() };
    if sels.is_empty() {
        return Err(Failure::Config("at least one --arch is required, e.g. --arch SPOGA_10".into()));
    }
    let rate = a.data_rate.or(s.data_rate);
    let power = a.laser_power.or(s.laser_power);
    if (rate.is_some() || power.is_some()) && sels.iter().all(|s| s.contains('_')) {
        return Err(Failure::Config(
            "--data-rate/--laser-power apply to bare names like SPOGA, but every --arch is a full selector".into(),
        ));
    }
    let archs = sels
        .iter()
        .map(|sel| resolve_arch(sel, rate, power))
        .collect::<Result<Vec<_>, _>>()?;
    let functional = switch(a.functional, s.functional);
    let adc = pick(a.adc, s.adc, AdcKind::Ideal);
    let adc_bits = pick(a.adc_bits, s.adc_bits, AdcModel::DEFAULT_BITS);
    if (a.adc.is_some() || a.adc_bits.is_some()) && !functional {
        return Err(Failure::Config("--adc and --adc-bits only apply with --functional".into()));
    }
    if a.adc_bits.is_some() && adc != AdcKind::Quantized {
        return Err(Failure::Config("--adc-bits requires --adc quantized".into()));
    }
    let seed = pick(a.seed, file.seed, DEFAULT_SEED);
    let c = common(a.common, file)?;
    let manifest = resolve_model(&model_name)?;

    let mut reports = Vec::new();
    for arch in &archs {
        let mode = if functional {
            let adc = match adc {
                AdcKind::Ideal => AdcModel::Ideal,
                AdcKind::Quantized => AdcModel::Quantized {
                    bits: adc_bits,
                    full_scale: arch.n_vector as f64 * 255.0 * 255.0,
                },
            };
            adc.validate()?;
            SimMode::Functional { seed, adc }
        } else {
            SimMode::CountsOnly
        };
        let opts = SimOptions {
            mode,
            occupancy_gating: c.gating,
            parallelism: rt.parallelism,
        };
        let budget = AcceleratorBudget::new(c.cores, arch.clone(), c.costs.clone())?;
        reports.push(simulate(&manifest, &budget, &opts)?);
    }

    prepare_dir(&c.out_dir)?;
    for r in &reports {
        let name = format!("layers_{}_{}.csv", file_name_part(&r.model), file_name_part(&r.arch.name));
        write(&c.out_dir, &name, &layers_csv(r)?)?;
    }
    write(&c.out_dir, "summary.csv", &summary_csv(&reports)?)?;
    if reports.len() >= 2 {
        write_charts(&c.out_dir, &reports, c.log_fps)?;
    }
    echo_config(
        &c.out_dir,
        &SimulateEcho {
            command: "simulate",
            model: model_name,
            archs: archs.iter().map(|a| a.name.clone()).collect(),
            cores: c.cores,
            functional,
            seed,
            adc,
            adc_bits,
            occupancy_gating: c.gating,
            log_fps: c.log_fps,
            out_dir: c.out_dir.clone(),
            costs_file: c.costs_file.clone(),
            sequential: rt.parallelism == Parallelism::Sequential,
            threads: rt.threads,
            costs: c.costs.clone(),
        },
    )?;
    for r in &reports {
        println!(
            "{} on {} ({} cores): {} layers, {:.4e} s/frame, {:.2} FPS, {:.4} FPS/W, {:.4e} FPS/W/mm2",
            r.model,
            r.arch.name,
            r.core_count,
            r.layers.len(),
            r.frame_latency_s,
            r.fps,
            r.fps_per_watt,
            r.fps_per_watt_per_mm2
        );
    }
    println!("wrote {}", c.out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct ScalabilityEcho {
    command: &'static str,
    source: Source,
    rates: Vec<f64>,
    powers: Vec<f64>,
    out_dir: PathBuf,
    link_budget: LinkBudgetParams,
}

fn scalability(a: ScalabilityArgs, file: &FileConfig, _rt: &Runtime) -> Result<(), Failure> {
    let s = &file.scalability;
    let source = pick(a.source, s.source, Source::Paper);
    if source == Source::Paper && (a.rates.is_some() || a.powers.is_some()) {
        return Err(Failure::Config("--rates/--powers need --source estimate or both".into()));
    }
    let rates = pick(a.rates, s.rates.clone(), DEFAULT_RATES.to_vec());
    let powers = pick(a.powers, s.powers.clone(), DEFAULT_POWERS.to_vec());
    let params = s.link_budget.clone().unwrap_or_default();
    params.validate()?;
    let src = match source {
        Source::Paper => ScalabilitySource::Paper,
        Source::Estimate => ScalabilitySource::Estimate,
        Source::Both => ScalabilitySource::Both,
    };
    let rows = scalability_rows(ScalabilityTable::bundled(), src, &params, &rates, &powers)?;
    let dir = out_dir(a.out, file.out_dir.clone());
    prepare_dir(&dir)?;
    let path = write(&dir, "scalability.csv", &scalability_csv(&rows)?)?;
    echo_config(
        &dir,
        &ScalabilityEcho {
            command: "scalability",
            source,
            rates,
            powers,
            out_dir: dir.clone(),
            link_budget: params,
        },
    )?;
    for r in &rows {
        println!(
            "{:<8} {:<9} {} {:>4} GS/s {:>6} dBm  N={:<4} M={}",
            r.source,
            r.architecture,
            r.organization,
            r.data_rate_gsps,
            r.laser_power_dbm.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
            r.n,
            r.m
        );
    }
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

#[derive(Serialize)]
struct CompareEcho {
    command: &'static str,
    models: Vec<String>,
    archs: Vec<String>,
    reference: String,
    cores: usize,
    iso_area: bool,
    occupancy_gating: bool,
    log_fps: bool,
    out_dir: PathBuf,
    costs_file: Option<PathBuf>,
    sequential: bool,
    threads: Option<usize>,
    costs: ComponentCostTable,
}

fn compare_cmd(a: CompareArgs, file: &FileConfig, rt: &Runtime) -> Result<(), Failure> {
    let s = &file.compare;
    let model_names = if a.models.is_empty() {
        s.models.clone().unwrap_or_else(|| BUNDLED_MODELS.iter().map(|m| m.to_string()).collect())
    } else {
        a.models.clone()
    };
    if model_names.is_empty() {
        return Err(Failure::Config("at least one model is required".into()));
    }
    let sels = if a.archs.is_empty() {
        s.archs
            .clone()
            .unwrap_or_else(|| DEFAULT_COMPARE_ARCHS.iter().map(|a| a.to_string()).collect())
    } else {
        a.archs.clone()
    };
    if sels.len() < 2 {
        return Err(Failure::Config("compare needs at least two --arch values".into()));
    }
    let archs = sels
        .iter()
        .map(|sel| resolve_arch(sel, None, None))
        .collect::<Result<Vec<_>, _>>()?;
    let reference_sel = a.reference.clone().or(s.reference.clone()).unwrap_or_else(|| sels[0].clone());
    let reference_arch = resolve_arch(&reference_sel, None, None)?;
    let reference = archs
        .iter()
        .position(|x| x.name == reference_arch.name)
        .ok_or_else(|| Failure::Config(format!("reference {reference_sel:?} is not among the --arch values")))?;
    let iso_area = switch(a.iso_area, s.iso_area);
    let c = common(a.common, file)?;
    let models = model_names
        .iter()
        .map(|m| resolve_model(m))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = CompareOptions {
        sim: SimOptions {
            mode: SimMode::CountsOnly,
            occupancy_gating: c.gating,
            parallelism: rt.parallelism,
        },
        core_count: c.cores,
        iso_area,
        reference,
    };
    let cmp = compare(&models, &archs, &c.costs, &opts)?;

    prepare_dir(&c.out_dir)?;
    write(&c.out_dir, "comparison.csv", &comparison_csv(&cmp)?)?;
    write(&c.out_dir, "summary.csv", &summary_csv(&cmp.reports)?)?;
    write_charts(&c.out_dir, &cmp.reports, c.log_fps)?;
    echo_config(
        &c.out_dir,
        &CompareEcho {
            command: "compare",
            models: model_names,
            archs: archs.iter().map(|a| a.name.clone()).collect(),
            reference: archs[reference].name.clone(),
            cores: c.cores,
            iso_area,
            occupancy_gating: c.gating,
            log_fps: c.log_fps,
            out_dir: c.out_dir.clone(),
            costs_file: c.costs_file.clone(),
            sequential: rt.parallelism == Parallelism::Sequential,
            threads: rt.threads,
            costs: c.costs.clone(),
        },
    )?;
    println!("{:<28} {:>12} {:>12} {:>12}", "gmean ratio", "FPS", "FPS/W", "FPS/W/mm2");
    for g in &cmp.ratios {
        println!(
            "{:<28} {:>12.4} {:>12.4} {:>12.4}",
            format!("{}/{}", g.reference, g.other),
            g.fps,
            g.fps_per_watt,
            g.fps_per_watt_per_mm2
        );
    }
    println!("wrote {}", c.out_dir.display());
    Ok(())
}
