use std::fs;
use std::process::{Command, Output};

fn spoga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spoga"))
        .args(args)
        .env_remove("SPOGA_OUT_DIR")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_arch_lists_valid_names() {
    let o = spoga(&["simulate", "--model", "resnet50", "--arch", "TPU_10"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("TPU_10") && e.contains("HOLYLIGHT_5") && e.contains("SPOGA_10@5dBm"), "{e}");
}

#[test]
fn unknown_model_is_a_config_error() {
    let o = spoga(&["simulate", "--model", "vgg16", "--arch", "SPOGA_10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("resnet50"));
}

#[test]
fn zero_trials_rejected() {
    assert_eq!(spoga(&["verify", "--trials", "0"]).status.code(), Some(2));
}

#[test]
fn injected_fault_exits_3() {
    let o = spoga(&["verify", "--trials", "50", "--gemm-jobs", "3", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("counterexample"));
}

#[test]
fn paper_source_rejects_sweep_flags() {
    assert_eq!(spoga(&["scalability", "--rates", "1,5"]).status.code(), Some(2));
}

#[test]
fn empty_sweep_writes_header_only() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = spoga(&["scalability", "--source", "estimate", "--rates", "--powers", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("scalability.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("source,architecture,organization"));
}

#[test]
fn both_sources_append_estimates() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = spoga(&["scalability", "--source", "both", "--rates", "1", "--powers", "10", "--out", out]);
    assert!(o.status.success());
    let text = fs::read_to_string(d.path().join("scalability.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("paper,")).count(), 15);
    assert_eq!(text.lines().filter(|l| l.starts_with("estimate,")).count(), 3);
}

#[test]
fn config_file_is_read_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    let file_out = d.path().join("from_file");
    fs::write(
        &cfg,
        format!(
            "cores = 2\nout_dir = {:?}\n[simulate]\nmodel = \"shufflenet_v2\"\narchs = [\"DEAPCNN_5\"]\n",
            file_out.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = spoga(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(file_out.join("effective_config.toml")).unwrap();
    assert!(echo.contains("cores = 2") && echo.contains("model = \"shufflenet_v2\""));
    assert!(file_out.join("layers_shufflenet_v2_DEAPCNN_5.csv").exists());

    let flag_out = d.path().join("from_flag");
    let o = spoga(&[
        "--config",
        cfg.to_str().unwrap(),
        "simulate",
        "--cores",
        "3",
        "--out",
        flag_out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let echo = fs::read_to_string(flag_out.join("effective_config.toml")).unwrap();
    assert!(echo.contains("cores = 3"));
}

#[test]
fn config_errors_and_io_errors_have_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.toml");
    fs::write(&bad, "colors = 3\n").unwrap();
    assert_eq!(spoga(&["--config", bad.to_str().unwrap(), "verify"]).status.code(), Some(2));
    let missing = d.path().join("missing.toml");
    assert_eq!(spoga(&["--config", missing.to_str().unwrap(), "verify"]).status.code(), Some(4));

    let blocker = d.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = spoga(&["scalability", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bare_name_takes_rate_and_power() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = spoga(&[
        "simulate", "--model", "googlenet", "--arch", "SPOGA", "--data-rate", "5", "--laser-power", "1", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.path().join("layers_googlenet_SPOGA_5_1dBm.csv").exists());
    let o = spoga(&["simulate", "--model", "googlenet", "--arch", "SPOGA_5", "--data-rate", "5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn adc_bits_need_quantized_functional_mode() {
    let o = spoga(&["simulate", "--model", "resnet50", "--arch", "SPOGA_10", "--adc-bits", "8"]);
    assert_eq!(o.status.code(), Some(2));
    let o = spoga(&[
        "simulate", "--model", "resnet50", "--arch", "SPOGA_10", "--functional", "--adc-bits", "8",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_writes_ratios_and_charts() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = spoga(&[
        "compare", "--model", "resnet50", "--model", "googlenet", "--arch", "SPOGA_5", "--arch", "HOLYLIGHT_5",
        "--iso-area", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(d.path().join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("run,")).count(), 4);
    assert_eq!(csv.lines().filter(|l| l.starts_with("gmean_ratio,")).count(), 1);
    for m in ["fps", "fps_per_watt", "fps_per_watt_per_mm2"] {
        let svg = fs::read_to_string(d.path().join(format!("chart_{m}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("SPOGA_5/HOLYLIGHT_5"));
}

#[test]
fn compare_needs_two_archs_and_known_reference() {
    assert_eq!(spoga(&["compare", "--arch", "SPOGA_10"]).status.code(), Some(2));
    assert_eq!(spoga(&["compare", "--reference", "SPOGA_1"]).status.code(), Some(2));
}

#[test]
fn out_dir_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_spoga"))
        .args(["scalability"])
        .env("SPOGA_OUT_DIR", d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("scalability.csv").exists());
}
