//! CSV and SVG emitters. Column schemas are stable; floats use the shortest
//! representation that round-trips, so equal runs give equal bytes.

use std::fmt::Write as _;

use crate::arch::{solve_link_budget, LinkBudgetParams, Organization, ScalabilityTable};
use crate::error::{Error, Result};
use crate::perf::{Comparison, EnergyBreakdown, RunReport};

pub const LAYER_COLUMNS: [&str; 27] = [
    "model",
    "arch",
    "layer_index",
    "layer",
    "kind",
    "groups",
    "t_rows",
    "k_depth",
    "m_cols",
    "macs",
    "steps",
    "dot_products",
    "oe",
    "adc",
    "deas_ops",
    "memory_bytes",
    "dac_events",
    "occupancy",
    "latency_s",
    "energy_laser_j",
    "energy_tuning_j",
    "energy_dac_j",
    "energy_oe_j",
    "energy_adc_j",
    "energy_deas_j",
    "energy_memory_j",
    "energy_j",
];

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "model",
    "arch",
    "cores",
    "steps",
    "oe",
    "adc",
    "deas_ops",
    "memory_bytes",
    "latency_s",
    "energy_j",
    "power_w",
    "area_mm2",
    "fps",
    "fps_per_watt",
    "fps_per_watt_per_mm2",
    "data_rate_gsps",
];

pub const COMPARISON_COLUMNS: [&str; 10] = [
    "row",
    "model",
    "arch",
    "cores",
    "area_mm2",
    "power_w",
    "latency_s",
    "fps",
    "fps_per_watt",
    "fps_per_watt_per_mm2",
];

pub const SCALABILITY_COLUMNS: [&str; 9] = [
    "source",
    "architecture",
    "organization",
    "data_rate_gsps",
    "laser_power_dbm",
    "n",
    "m",
    "margin_db",
    "diagnostic",
];

fn f(v: f64) -> String {
    format!("{v}")
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io {
        path: "<csv>".into(),
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn energy_cells(e: &EnergyBreakdown) -> impl Iterator<Item = String> + '_ {
    e.terms().into_iter().map(f).chain(std::iter::once(f(e.total())))
}

/// One row per layer, then a `frame` row with the totals.
pub fn layers_csv(report: &RunReport) -> Result<String> {
    let mut rows = Vec::with_capacity(report.layers.len() + 1);
    for l in &report.layers {
        let w = &l.work;
        let occ = if w.occupancy.capacity_slots == 0 {
            0.0
        } else {
            w.occupancy.mac_slots as f64 / w.occupancy.capacity_slots as f64
        };
        let mut row = vec![
            report.model.clone(),
            report.arch.name.clone(),
            l.index.to_string(),
            l.name.clone(),
            l.kind.to_string(),
            l.groups.to_string(),
            l.t_rows.to_string(),
            l.k_depth.to_string(),
            l.m_cols.to_string(),
            l.macs.to_string(),
            w.occupancy.steps.to_string(),
            w.occupancy.dot_products.to_string(),
            w.tally.oe.to_string(),
            w.tally.adc.to_string(),
            w.tally.deas_ops.to_string(),
            w.tally.memory_bytes.to_string(),
            w.dac_events.to_string(),
            f(occ),
            f(l.latency_s),
        ];
        row.extend(energy_cells(&l.energy));
        rows.push(row);
    }
    let macs: u64 = report.layers.iter().map(|l| l.macs).sum();
    let dots: u64 = report.layers.iter().map(|l| l.work.occupancy.dot_products).sum();
    let dacs: u64 = report.layers.iter().map(|l| l.work.dac_events).sum();
    let mac_slots: u64 = report.layers.iter().map(|l| l.work.occupancy.mac_slots).sum();
    let capacity: u64 = report.layers.iter().map(|l| l.work.occupancy.capacity_slots).sum();
    let mut row = vec![
        report.model.clone(),
        report.arch.name.clone(),
        String::new(),
        "frame".into(),
        "frame".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        macs.to_string(),
        report.steps.to_string(),
        dots.to_string(),
        report.tally.oe.to_string(),
        report.tally.adc.to_string(),
        report.tally.deas_ops.to_string(),
        report.tally.memory_bytes.to_string(),
        dacs.to_string(),
        f(if capacity == 0 { 0.0 } else { mac_slots as f64 / capacity as f64 }),
        f(report.frame_latency_s),
    ];
    row.extend(energy_cells(&report.energy));
    rows.push(row);
    csv_string(&LAYER_COLUMNS, rows)
}

pub fn summary_csv(reports: &[RunReport]) -> Result<String> {
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.arch.name.clone(),
                r.core_count.to_string(),
                r.steps.to_string(),
                r.tally.oe.to_string(),
                r.tally.adc.to_string(),
                r.tally.deas_ops.to_string(),
                r.tally.memory_bytes.to_string(),
                f(r.frame_latency_s),
                f(r.energy_j),
                f(r.power_w),
                f(r.area_mm2),
                f(r.fps),
                f(r.fps_per_watt),
                f(r.fps_per_watt_per_mm2),
                r.arch.data_rate_gsps.to_string(),
            ]
        })
        .collect();
    csv_string(&SUMMARY_COLUMNS, rows)
}

/// Per model and architecture rows, then one `gmean_ratio` row per
/// non-reference architecture whose metric columns hold reference/other.
pub fn comparison_csv(c: &Comparison) -> Result<String> {
    let mut rows: Vec<Vec<String>> = c
        .reports
        .iter()
        .map(|r| {
            vec![
                "run".into(),
                r.model.clone(),
                r.arch.name.clone(),
                r.core_count.to_string(),
                f(r.area_mm2),
                f(r.power_w),
                f(r.frame_latency_s),
                f(r.fps),
                f(r.fps_per_watt),
                f(r.fps_per_watt_per_mm2),
            ]
        })
        .collect();
    for g in &c.ratios {
        rows.push(vec![
            "gmean_ratio".into(),
            "gmean".into(),
            format!("{}/{}", g.reference, g.other),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            f(g.fps),
            f(g.fps_per_watt),
            f(g.fps_per_watt_per_mm2),
        ]);
    }
    csv_string(&COMPARISON_COLUMNS, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalabilitySource {
    Paper,
    Estimate,
    Both,
}

impl std::str::FromStr for ScalabilitySource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "estimate" => Ok(Self::Estimate),
            "both" => Ok(Self::Both),
            _ => Err(Error::Config(format!("unknown source {s:?}; expected paper, estimate or both"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalabilityRow {
    pub source: &'static str,
    pub architecture: String,
    pub organization: Organization,
    pub data_rate_gsps: f64,
    pub laser_power_dbm: Option<f64>,
    pub n: usize,
    pub m: usize,
    pub margin_db: Option<f64>,
    pub diagnostic: Option<String>,
}

/// Bundled rows and/or estimator rows for every organization, rate and power
/// of the sweep (organization-major, then rate, then power).
pub fn scalability_rows(
    table: &ScalabilityTable,
    source: ScalabilitySource,
    params: &LinkBudgetParams,
    rates: &[f64],
    powers: &[f64],
) -> Result<Vec<ScalabilityRow>> {
    let mut rows = Vec::new();
    if source != ScalabilitySource::Estimate {
        rows.extend(table.entries().iter().map(|e| ScalabilityRow {
            source: "paper",
            architecture: e.architecture.clone(),
            organization: e.organization,
            data_rate_gsps: e.data_rate_gsps as f64,
            laser_power_dbm: e.laser_power_dbm,
            n: e.n,
            m: e.m,
            margin_db: None,
            diagnostic: None,
        }));
    }
    if source != ScalabilitySource::Paper {
        for org in Organization::ALL {
            for &rate in rates {
                for &power in powers {
                    let p = LinkBudgetParams {
                        laser_power_dbm: power,
                        ..params.clone()
                    };
                    let est = solve_link_budget(&p, org, rate)?;
                    rows.push(ScalabilityRow {
                        source: "estimate",
                        architecture: org.accelerator().to_string(),
                        organization: org,
                        data_rate_gsps: rate,
                        laser_power_dbm: Some(power),
                        n: est.n,
                        m: est.m,
                        margin_db: Some(est.margin_db),
                        diagnostic: est.diagnostic,
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn scalability_csv(rows: &[ScalabilityRow]) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                r.source.to_string(),
                r.architecture.clone(),
                r.organization.to_string(),
                f(r.data_rate_gsps),
                r.laser_power_dbm.map(f).unwrap_or_default(),
                r.n.to_string(),
                r.m.to_string(),
                r.margin_db.map(f).unwrap_or_default(),
                r.diagnostic.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_string(&SCALABILITY_COLUMNS, rows)
}

/// Grouped bar chart: one group per category, one bar per series.
#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<(String, Vec<f64>)>,
    pub log_scale: bool,
}

const PALETTE: [&str; 6] = ["#1b6ca8", "#e07a1f", "#3a9d5d", "#b8336a", "#7d5ba6", "#5f6b73"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl BarChart {
    pub fn to_svg(&self) -> String {
        let (w, h) = (760.0, 420.0);
        let (left, right, top, bottom) = (80.0, 170.0, 40.0, 70.0);
        let plot_w = w - left - right;
        let plot_h = h - top - bottom;
        let values: Vec<f64> = self
            .series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .filter(|v| v.is_finite() && (!self.log_scale || *v > 0.0))
            .collect();
        let (lo, hi) = if self.log_scale {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if values.is_empty() {
                (0.0, 1.0)
            } else {
                (min.log10().floor(), max.log10().ceil().max(min.log10().floor() + 1.0))
            }
        } else {
            let max = values.iter().copied().fold(0.0, f64::max);
            (0.0, if max > 0.0 { max * 1.1 } else { 1.0 })
        };
        let scale = |v: f64| -> f64 {
            let x = if self.log_scale { v.max(10f64.powf(lo)).log10() } else { v };
            ((x - lo) / (hi - lo)).clamp(0.0, 1.0) * plot_h
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            left + plot_w / 2.0,
            esc(&self.title)
        );
        let y_label = if self.log_scale {
            format!("{} (log scale)", self.y_label)
        } else {
            self.y_label.clone()
        };
        let _ = writeln!(
            s,
            r#"<text transform="translate(18,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            top + plot_h / 2.0,
            esc(&y_label)
        );
        let ticks: Vec<f64> = if self.log_scale {
            (lo as i64..=hi as i64).map(|e| e as f64).collect()
        } else {
            (0..=5).map(|i| hi * i as f64 / 5.0).collect()
        };
        for t in ticks {
            let y = top + plot_h - (t - lo) / (hi - lo) * plot_h;
            let label = if self.log_scale { format!("1e{t}") } else { format!("{t:.3e}") };
            let _ = writeln!(
                s,
                r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                left + plot_w,
                left - 6.0,
                y + 4.0
            );
        }
        let n_cat = self.categories.len().max(1) as f64;
        let group_w = plot_w / n_cat;
        let bar_w = group_w * 0.8 / self.series.len().max(1) as f64;
        for (ci, cat) in self.categories.iter().enumerate() {
            let gx = left + ci as f64 * group_w + group_w * 0.1;
            for (si, (_, vals)) in self.series.iter().enumerate() {
                let v = vals.get(ci).copied().unwrap_or(0.0);
                let bh = if v.is_finite() { scale(v) } else { 0.0 };
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{bh:.2}" fill="{}"><title>{}</title></rect>"#,
                    gx + si as f64 * bar_w,
                    top + plot_h - bh,
                    bar_w,
                    PALETTE[si % PALETTE.len()],
                    f(v)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                gx + group_w * 0.4,
                top + plot_h + 18.0,
                esc(cat)
            );
        }
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#333333"/>"##,
            top + plot_h,
            left + plot_w,
            top + plot_h
        );
        for (si, (name, _)) in self.series.iter().enumerate() {
            let y = top + 10.0 + si as f64 * 20.0;
            let x = left + plot_w + 15.0;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                y - 10.0,
                PALETTE[si % PALETTE.len()],
                x + 18.0,
                y,
                esc(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// FPS, FPS/W and FPS/W/mm² charts over the runs, grouped by model.
pub fn metric_charts(reports: &[RunReport], log_fps: bool) -> Vec<(&'static str, BarChart)> {
    let mut models: Vec<String> = Vec::new();
    let mut archs: Vec<String> = Vec::new();
    for r in reports {
        if !models.contains(&r.model) {
            models.push(r.model.clone());
        }
        if !archs.contains(&r.arch.name) {
            archs.push(r.arch.name.clone());
        }
    }
    let chart = |title: &str, label: &str, log: bool, metric: fn(&RunReport) -> f64| BarChart {
        title: title.into(),
        y_label: label.into(),
        categories: models.clone(),
        series: archs
            .iter()
            .map(|a| {
                let vals = models
                    .iter()
                    .map(|m| {
                        reports
                            .iter()
                            .find(|r| &r.model == m && &r.arch.name == a)
                            .map(metric)
                            .unwrap_or(0.0)
                    })
                    .collect();
                (a.clone(), vals)
            })
            .collect(),
        log_scale: log,
    };
    vec![
        ("fps", chart("Frames per second", "FPS", log_fps, |r| r.fps)),
        ("fps_per_watt", chart("Energy efficiency", "FPS/W", false, |r| r.fps_per_watt)),
        (
            "fps_per_watt_per_mm2",
            chart("Area efficiency", "FPS/W/mm²", false, |r| r.fps_per_watt_per_mm2),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::ArchConfig;
    use crate::perf::{compare, simulate, AcceleratorBudget, CompareOptions, ComponentCostTable, SimOptions};
    use crate::workload::LayerManifest;

    fn manifest() -> LayerManifest {
        LayerManifest::parse(
            "spoga-manifest v1\nmodel tiny\nconv name=c1 in_h=8 in_w=8 in_c=3 out_c=4 kernel_h=3 kernel_w=3 stride=1 padding=1\nfc name=\"odd,name\" in_features=256 out_features=10\n",
        )
        .unwrap()
    }

    #[test]
    fn layers_csv_shape_and_quoting() {
        let b = AcceleratorBudget::new(2, ArchConfig::from_selector("SPOGA_10").unwrap(), ComponentCostTable::bundled())
            .unwrap();
        let r = simulate(&manifest(), &b, &SimOptions::default()).unwrap();
        let text = layers_csv(&r).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), LAYER_COLUMNS);
        let recs: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(recs.len(), 3);
        assert_eq!(&recs[1][3], "\"odd,name\"");
        assert_eq!(&recs[2][4], "frame");
        let total: f64 = recs[2][26].parse().unwrap();
        assert_eq!(total, r.energy_j);
        let lat: f64 = recs[2][18].parse().unwrap();
        assert_eq!(lat, r.frame_latency_s);
    }

    #[test]
    fn comparison_rows_then_ratios() {
        let archs: Vec<_> = ["SPOGA_10", "DEAPCNN_10", "HOLYLIGHT_10"]
            .iter()
            .map(|s| ArchConfig::from_selector(s).unwrap())
            .collect();
        let models = [manifest(), manifest()];
        let c = compare(&models, &archs, &ComponentCostTable::bundled(), &CompareOptions::default()).unwrap();
        let text = comparison_csv(&c).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 6 + 2);
        assert!(lines[7].starts_with("gmean_ratio,gmean,SPOGA_10/DEAPCNN_10,"));
    }

    #[test]
    fn scalability_sources() {
        let t = ScalabilityTable::bundled();
        let p = LinkBudgetParams::default();
        let paper = scalability_rows(t, ScalabilitySource::Paper, &p, &[1.0], &[1.0]).unwrap();
        assert_eq!(paper.len(), 15);
        let none = scalability_rows(t, ScalabilitySource::Estimate, &p, &[], &[1.0, 2.0]).unwrap();
        assert_eq!(scalability_csv(&none).unwrap(), SCALABILITY_COLUMNS.join(",") + "\n");
        let both = scalability_rows(t, ScalabilitySource::Both, &p, &[1.0, 10.0], &[5.0]).unwrap();
        assert_eq!(both.len(), 15 + 3 * 2);
        assert!("nope".parse::<ScalabilitySource>().is_err());
    }

    #[test]
    fn svg_is_well_formed_and_deterministic() {
        let chart = BarChart {
            title: "t <1>".into(),
            y_label: "FPS".into(),
            categories: vec!["a".into(), "b".into()],
            series: vec![("x".into(), vec![1.0, 1000.0]), ("y".into(), vec![0.5, 20.0])],
            log_scale: true,
        };
        let s = chart.to_svg();
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("t &lt;1&gt;") && s.contains("(log scale)"));
        assert_eq!(s.matches("<rect").count(), 1 + 4 + 2);
        assert_eq!(s, chart.to_svg());
        let flat = BarChart { log_scale: false, ..chart };
        assert!(!flat.to_svg().contains("log scale"));
    }
}
