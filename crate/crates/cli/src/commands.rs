//! The four experiment commands. Each has a pure `*_report` function that
//! computes results and a `write_*` function that emits the output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nd_core::analysis::{analyze, AnalysisParams};
use nd_core::deployment::avg_neighbors_analytic;
use nd_core::engine::{mean_std, run_many, AggregateMetrics, ThresholdStats};
use nd_core::phy::UnpackCache;
use nd_core::{BaseAlgorithm, SimConfig, Variant};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::specs::{BaseSetting, CompareSpec, SweepSpec};

pub const TOOL: &str = "ndsim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed for the Monte Carlo unpack table behind every theory evaluation.
pub const ANALYSIS_SEED: u64 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
}

impl Provenance {
    fn new(command: &'static str) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
        }
    }
}

fn create_dir(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError {
    let path = path.display().to_string();
    move |e| CliError::Output {
        path: path.clone(),
        message: e.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file =
        File::create(path).map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

/// Shortest decimal form that round-trips, so CSV bodies are stable.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub total_directed_pairs: usize,
    pub slots_simulated: usize,
    pub final_fraction: f64,
    /// `(threshold, slot)`; slot is null when the budget ran out first.
    pub slots_to_threshold: Vec<(f64, Option<u64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimSummary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub slots_to_threshold: Vec<ThresholdStats>,
    pub per_seed: Vec<SeedSummary>,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub aggregate: AggregateMetrics,
    pub summary: SimSummary,
}

pub fn sim_report(config: &SimConfig) -> CliResult<SimReport> {
    config.validate()?;
    let aggregate = run_many(config, &config.seed_list())?;
    let mut thresholds = config.thresholds.clone();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let per_seed = aggregate
        .runs
        .iter()
        .map(|r| SeedSummary {
            seed: r.seed,
            total_directed_pairs: r.metrics.total_directed_pairs,
            slots_simulated: r.metrics.fraction_curve.len(),
            final_fraction: r.metrics.fraction_at(config.slot_budget),
            slots_to_threshold: thresholds
                .iter()
                .map(|&t| (t, r.metrics.slots_to(t)))
                .collect(),
        })
        .collect();
    let summary = SimSummary {
        provenance: Provenance::new("sim"),
        config: config.clone(),
        seeds: aggregate.seeds.clone(),
        slots_to_threshold: aggregate.thresholds.clone(),
        per_seed,
    };
    Ok(SimReport { aggregate, summary })
}

/// `curve.csv`: slot, fraction_mean, fraction_std, seeds.
pub fn write_sim(report: &SimReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    create_dir(out)?;
    let curve = out.join("curve.csv");
    let mut w = csv_writer(&curve)?;
    let e = csv_err(&curve);
    w.write_record(["slot", "fraction_mean", "fraction_std", "seeds"])
        .map_err(&e)?;
    let seeds = report.aggregate.seeds.len().to_string();
    for (i, (m, s)) in report
        .aggregate
        .mean_curve
        .iter()
        .zip(&report.aggregate.std_curve)
        .enumerate()
    {
        w.write_record([(i + 1).to_string(), num(*m), num(*s), seeds.clone()])
            .map_err(&e)?;
    }
    w.flush()
        .map_err(|e| CliError::io("flushing curve.csv", e))?;
    let summary = out.join("summary.json");
    write_json(&summary, &report.summary)?;
    Ok(vec![curve, summary])
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub config: SimConfig,
    pub analysis_seed: u64,
    pub n_bar: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K_int")]
    pub k_int: i64,
    pub n0: u32,
    /// Null when some step has zero probability.
    #[serde(rename = "E_T_all")]
    pub e_t_all: Option<f64>,
    pub pbar: Vec<f64>,
    pub discovery_prob: Vec<f64>,
    /// `j` values whose probability was clamped to [0, 1].
    pub clamped_at: Vec<i64>,
}

#[derive(Debug, Clone)]
pub struct TheoryReport {
    pub params: AnalysisParams,
    pub curve: Vec<f64>,
    pub summary: TheorySummary,
}

pub fn theory_report(config: &SimConfig, cache: &UnpackCache) -> CliResult<TheoryReport> {
    let params = AnalysisParams::from_config(config, cache, ANALYSIS_SEED)?;
    let result = analyze(&params, config.slot_budget)?;
    let clamped_at = (0..params.k_int())
        .filter(|&j| {
            nd_core::analysis::discovery_terms(&params, j)
                .map(|t| t.clamped)
                .unwrap_or(false)
        })
        .collect();
    let summary = TheorySummary {
        provenance: Provenance::new("theory"),
        config: config.clone(),
        analysis_seed: ANALYSIS_SEED,
        n_bar: avg_neighbors_analytic(&config.arena())?,
        k: params.k,
        k_int: params.k_int(),
        n0: params.n0,
        e_t_all: Some(result.expected_total_slots).filter(|e| e.is_finite()),
        pbar: params.pbar.clone(),
        discovery_prob: result.discovery_prob,
        clamped_at,
    };
    Ok(TheoryReport {
        params,
        curve: result.theory_curve,
        summary,
    })
}

/// `theory.csv`: slot, expected_fraction.
pub fn write_theory(report: &TheoryReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    create_dir(out)?;
    let path = out.join("theory.csv");
    let mut w = csv_writer(&path)?;
    let e = csv_err(&path);
    w.write_record(["slot", "expected_fraction"]).map_err(&e)?;
    for (i, f) in report.curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), num(*f)]).map_err(&e)?;
    }
    w.flush()
        .map_err(|e| CliError::io("flushing theory.csv", e))?;
    let json = out.join("theory.json");
    write_json(&json, &report.summary)?;
    Ok(vec![path, json])
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub point: usize,
    pub values: Vec<Value>,
    pub metric: String,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub spec: SweepSpec,
    pub points: Vec<SweepPointSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPointSummary {
    pub point: usize,
    pub values: Vec<Value>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis_names: Vec<String>,
    pub rows: Vec<MetricRow>,
    pub aggregates: Vec<AggregateMetrics>,
    pub summary: SweepSummary,
}

pub fn threshold_metric(t: f64) -> String {
    format!("slots_to_{t}")
}

pub fn fraction_metric(slot: u64) -> String {
    format!("fraction_at_{slot}")
}

pub fn sweep_report(spec: &SweepSpec) -> CliResult<SweepReport> {
    let grid = spec.grid()?;
    let aggregates: Vec<AggregateMetrics> = grid
        .par_iter()
        .map(|p| run_many(&p.config, &p.config.seed_list()))
        .collect::<nd_core::Result<_>>()?;
    let mut rows = Vec::new();
    for (i, (p, agg)) in grid.iter().zip(&aggregates).enumerate() {
        for stats in &agg.thresholds {
            rows.push(MetricRow {
                point: i,
                values: p.values.clone(),
                metric: threshold_metric(stats.threshold),
                mean: stats.mean,
                std: stats.std,
                count: stats.reached,
            });
        }
        let mut slots = spec.fraction_at.clone();
        slots.push(p.config.slot_budget);
        slots.sort_unstable();
        slots.dedup();
        for slot in slots {
            let values: Vec<f64> = agg
                .runs
                .iter()
                .map(|r| r.metrics.fraction_at(slot))
                .collect();
            let (m, s) = mean_std(&values);
            rows.push(MetricRow {
                point: i,
                values: p.values.clone(),
                metric: fraction_metric(slot),
                mean: Some(m),
                std: Some(s),
                count: values.len(),
            });
        }
    }
    let summary = SweepSummary {
        provenance: Provenance::new("sweep"),
        spec: spec.clone(),
        points: grid
            .iter()
            .enumerate()
            .map(|(i, p)| SweepPointSummary {
                point: i,
                values: p.values.clone(),
                seeds: p.config.seed_list(),
            })
            .collect(),
    };
    Ok(SweepReport {
        axis_names: spec.axes.iter().map(|a| a.name.clone()).collect(),
        rows,
        aggregates,
        summary,
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        other => other.to_string(),
    }
}

/// `results.csv`: point, one column per axis, metric, mean, std, count.
pub fn write_sweep(report: &SweepReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    create_dir(out)?;
    let path = out.join("results.csv");
    let mut w = csv_writer(&path)?;
    let e = csv_err(&path);
    let mut header = vec!["point".to_string()];
    header.extend(report.axis_names.iter().cloned());
    header.extend(["metric", "mean", "std", "count"].map(String::from));
    w.write_record(&header).map_err(&e)?;
    for row in &report.rows {
        let mut rec = vec![row.point.to_string()];
        rec.extend(row.values.iter().map(cell));
        rec.push(row.metric.clone());
        rec.push(opt_num(row.mean));
        rec.push(opt_num(row.std));
        rec.push(row.count.to_string());
        w.write_record(&rec).map_err(&e)?;
    }
    w.flush()
        .map_err(|e| CliError::io("flushing results.csv", e))?;
    let json = out.join("sweep.json");
    write_json(&json, &report.summary)?;
    Ok(vec![path, json])
}

/// Theory against simulation for one variant at one node count.
#[derive(Debug, Clone, Serialize)]
pub struct Overlay {
    pub node_count: usize,
    pub variant: Variant,
    pub theory: Vec<f64>,
    pub sim_mean: Vec<f64>,
    pub sim_std: Vec<f64>,
    pub max_gap: f64,
    pub max_gap_slot: u64,
    /// Per-seed slots to the compare threshold.
    pub slots_to: Vec<(u64, Option<u64>)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reduction {
    pub node_count: usize,
    pub base: BaseAlgorithm,
    pub variant: Variant,
    pub base_mean: Option<f64>,
    pub variant_mean: Option<f64>,
    /// `100 (1 - variant_mean / base_mean)`.
    pub reduction_pct: Option<f64>,
    /// Seeds where both reached the threshold.
    pub pairs: usize,
    /// Mean over those seeds of `100 (1 - variant / base)`.
    pub paired_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanReduction {
    pub base: BaseAlgorithm,
    pub variant: Variant,
    pub node_counts: Vec<usize>,
    pub mean_reduction_pct: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSummary {
    pub node_count: usize,
    pub variant: Variant,
    pub max_gap: f64,
    pub max_gap_slot: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub spec: CompareSpec,
    pub seeds: Vec<u64>,
    pub analysis_seed: u64,
    pub gaps: Vec<GapSummary>,
    pub reductions: Vec<Reduction>,
    pub mean_reductions: Vec<MeanReduction>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub overlays: Vec<Overlay>,
    pub summary: CompareSummary,
}

fn overlay(
    spec: &CompareSpec,
    setting: &BaseSetting,
    variant: Variant,
    node_count: usize,
    cache: &UnpackCache,
) -> CliResult<Overlay> {
    let config = spec.config_for(setting, variant, node_count);
    let agg = run_many(&config, &config.seed_list())?;
    let params = AnalysisParams::from_config(&config, cache, ANALYSIS_SEED)?;
    let theory = nd_core::analysis::theory_curve(&params, config.slot_budget)?;
    let n = config.slot_budget as usize;
    let mut sim_mean = Vec::with_capacity(n);
    let mut sim_std = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(agg.runs.len());
    for slot in 1..=config.slot_budget {
        column.clear();
        column.extend(agg.runs.iter().map(|r| r.metrics.fraction_at(slot)));
        let (m, s) = mean_std(&column);
        sim_mean.push(m);
        sim_std.push(s);
    }
    let (max_gap, max_gap_slot) = theory
        .iter()
        .zip(&sim_mean)
        .enumerate()
        .map(|(i, (t, s))| ((t - s).abs(), i as u64 + 1))
        .fold(
            (0.0, 0),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        );
    Ok(Overlay {
        node_count,
        variant,
        theory,
        sim_mean,
        sim_std,
        max_gap,
        max_gap_slot,
        slots_to: agg
            .runs
            .iter()
            .map(|r| (r.seed, r.metrics.slots_to(spec.threshold)))
            .collect(),
    })
}

fn reduction(node_count: usize, base: &Overlay, other: &Overlay) -> Reduction {
    let reached = |o: &Overlay| -> Vec<f64> {
        o.slots_to
            .iter()
            .filter_map(|(_, s)| s.map(|v| v as f64))
            .collect()
    };
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| mean_std(&v).0);
    let base_mean = mean(reached(base));
    let variant_mean = mean(reached(other));
    let reduction_pct = match (base_mean, variant_mean) {
        (Some(b), Some(v)) if b > 0.0 => Some(100.0 * (1.0 - v / b)),
        _ => None,
    };
    let paired: Vec<f64> = base
        .slots_to
        .iter()
        .zip(&other.slots_to)
        .filter_map(|((_, b), (_, v))| match (b, v) {
            (Some(b), Some(v)) => Some(100.0 * (1.0 - *v as f64 / *b as f64)),
            _ => None,
        })
        .collect();
    Reduction {
        node_count,
        base: base.variant.base,
        variant: other.variant,
        base_mean,
        variant_mean,
        reduction_pct,
        pairs: paired.len(),
        paired_reduction_pct: mean(paired),
    }
}

pub fn compare_report(spec: &CompareSpec, cache: &UnpackCache) -> CliResult<CompareReport> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for setting in &spec.bases {
        for n in spec.node_counts() {
            for v in spec.variants(setting.base) {
                jobs.push((*setting, v, n));
            }
        }
    }
    let overlays: Vec<Overlay> = jobs
        .par_iter()
        .map(|(s, v, n)| overlay(spec, s, *v, *n, cache))
        .collect::<CliResult<_>>()?;

    let mut reductions = Vec::new();
    for chunk in overlays.chunks(3) {
        reductions.push(reduction(chunk[0].node_count, &chunk[0], &chunk[1]));
        reductions.push(reduction(chunk[0].node_count, &chunk[0], &chunk[2]));
    }
    let mut mean_reductions = Vec::new();
    for setting in &spec.bases {
        for v in &spec.variants(setting.base)[1..] {
            let rows: Vec<&Reduction> = reductions.iter().filter(|r| r.variant == *v).collect();
            let pcts: Vec<f64> = rows.iter().filter_map(|r| r.reduction_pct).collect();
            mean_reductions.push(MeanReduction {
                base: setting.base,
                variant: *v,
                node_counts: rows.iter().map(|r| r.node_count).collect(),
                mean_reduction_pct: (pcts.len() == rows.len() && !pcts.is_empty())
                    .then(|| mean_std(&pcts).0),
            });
        }
    }
    let summary = CompareSummary {
        provenance: Provenance::new("compare"),
        spec: spec.clone(),
        seeds: spec.base.seed_list(),
        analysis_seed: ANALYSIS_SEED,
        gaps: overlays
            .iter()
            .map(|o| GapSummary {
                node_count: o.node_count,
                variant: o.variant,
                max_gap: o.max_gap,
                max_gap_slot: o.max_gap_slot,
            })
            .collect(),
        reductions,
        mean_reductions,
    };
    Ok(CompareReport { overlays, summary })
}

/// `overlay.csv`: node_count, variant, slot, theory, sim_mean, sim_std.
/// `reductions.csv`: node_count, base, variant, base_mean, variant_mean,
/// reduction_pct, pairs, paired_reduction_pct.
pub fn write_compare(report: &CompareReport, out: &Path) -> CliResult<Vec<PathBuf>> {
    create_dir(out)?;
    let overlay_path = out.join("overlay.csv");
    let mut w = csv_writer(&overlay_path)?;
    let e = csv_err(&overlay_path);
    w.write_record([
        "node_count",
        "variant",
        "slot",
        "theory",
        "sim_mean",
        "sim_std",
    ])
    .map_err(&e)?;
    for o in &report.overlays {
        let name = o.variant.to_string();
        for (i, ((t, m), s)) in o.theory.iter().zip(&o.sim_mean).zip(&o.sim_std).enumerate() {
            w.write_record([
                o.node_count.to_string(),
                name.clone(),
                (i + 1).to_string(),
                num(*t),
                num(*m),
                num(*s),
            ])
            .map_err(&e)?;
        }
    }
    w.flush()
        .map_err(|e| CliError::io("flushing overlay.csv", e))?;

    let red_path = out.join("reductions.csv");
    let mut w = csv_writer(&red_path)?;
    let e = csv_err(&red_path);
    w.write_record([
        "node_count",
        "base",
        "variant",
        "base_mean",
        "variant_mean",
        "reduction_pct",
        "pairs",
        "paired_reduction_pct",
    ])
    .map_err(&e)?;
    for r in &report.summary.reductions {
        w.write_record([
            r.node_count.to_string(),
            r.base.to_string(),
            r.variant.to_string(),
            opt_num(r.base_mean),
            opt_num(r.variant_mean),
            opt_num(r.reduction_pct),
            r.pairs.to_string(),
            opt_num(r.paired_reduction_pct),
        ])
        .map_err(&e)?;
    }
    w.flush()
        .map_err(|e| CliError::io("flushing reductions.csv", e))?;

    let json = out.join("compare.json");
    write_json(&json, &report.summary)?;
    Ok(vec![overlay_path, red_path, json])
}
