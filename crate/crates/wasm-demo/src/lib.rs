//! Browser bindings. Every export takes plain numbers and strings and returns
//! a JSON string, so the page needs no generated TypeScript types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use rrbsight_core::ensemble::{EnsembleConfig, MetricsReport, Variant};
use rrbsight_core::experiment::{self, CorpusConfig};
use rrbsight_core::pipeline::{self, PipelineConfig, ThroughputSeries};
use rrbsight_core::profiles;
use rrbsight_core::sim::run_simulation;
use rrbsight_core::sniffer::{reconstruct_throughput, VictimTrace};

const MAX_SUBFRAMES: u64 = 120_000;

#[derive(Serialize)]
struct ClassInfo {
    label: String,
    shape: String,
    qos: &'static str,
}

#[derive(Serialize)]
struct Throughput {
    label: String,
    crnti: u16,
    bin_ms: f64,
    partial_last_bin: bool,
    ul_raw: Vec<f64>,
    dl_raw: Vec<f64>,
    ul_norm: Vec<f64>,
    dl_norm: Vec<f64>,
}

#[derive(Serialize)]
struct Cdfs {
    label: String,
    normalized: bool,
    ul: Vec<(f64, f64)>,
    dl: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct Classification {
    classes: usize,
    traces: usize,
    random_forest: MetricsReport,
    extra_trees: MetricsReport,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn sniff_one(label: &str, seed: u64, duration: u64, bin: u64, bystanders: usize) -> Result<VictimTrace, String> {
    if duration == 0 || duration > MAX_SUBFRAMES {
        return Err(format!("duration must be between 1 and {MAX_SUBFRAMES} subframes"));
    }
    let victim = profiles::find(label).ok_or_else(|| format!("unknown class {label:?}"))?;
    let corpus = CorpusConfig {
        seed,
        duration_subframes: duration,
        bin_subframes: bin,
        bystanders,
        ..CorpusConfig::default()
    };
    let sim = corpus.trace_sim_config(&victim, 0, 0);
    let (log, truth) = run_simulation(&sim).map_err(|e| e.to_string())?;
    reconstruct_throughput(&log, truth.ues[0].crnti, bin, 1.0).map_err(|e| e.to_string())
}

pub fn catalogue_json() -> Result<String, String> {
    let list: Vec<ClassInfo> = profiles::catalogue()
        .into_iter()
        .map(|p| ClassInfo {
            shape: format!("{:?}", p.shape),
            qos: if p.qos.is_gbr() { "GBR" } else { "NonGBR" },
            label: p.class_label,
        })
        .collect();
    to_json(&list)
}

pub fn throughput_json(label: &str, seed: u64, duration: u64, bin: u64, bystanders: usize) -> Result<String, String> {
    let t = sniff_one(label, seed, duration, bin, bystanders)?;
    let cfg = PipelineConfig::default();
    let norm = |s: &ThroughputSeries| pipeline::rolling_normalize(s, &cfg).values;
    to_json(&Throughput {
        label: label.to_string(),
        crnti: t.crnti.0,
        bin_ms: t.ul.bin_width_ms,
        partial_last_bin: t.partial_last_bin,
        ul_norm: norm(&t.ul),
        dl_norm: norm(&t.dl),
        ul_raw: t.ul.values,
        dl_raw: t.dl.values,
    })
}

pub fn cdf_json(label: &str, seed: u64, duration: u64, bin: u64, normalize: bool) -> Result<String, String> {
    let t = sniff_one(label, seed, duration, bin, 1)?;
    let cfg = PipelineConfig::default();
    let curve = |s| pipeline::series_cdf(s, &cfg, normalize).map(|c| c.points).map_err(|e| e.to_string());
    to_json(&Cdfs {
        label: label.to_string(),
        normalized: normalize,
        ul: curve(&t.ul)?,
        dl: curve(&t.dl)?,
    })
}

/// Small end-to-end run: `traces_per_class` traces for every class, both ensembles.
pub fn classify_json(seed: u64, traces_per_class: usize, duration: u64, trees: usize) -> Result<String, String> {
    if !(3..=20).contains(&traces_per_class) {
        return Err("traces per class must be between 3 and 20".into());
    }
    if !(1..=200).contains(&trees) {
        return Err("trees must be between 1 and 200".into());
    }
    if !(1_000..=MAX_SUBFRAMES).contains(&duration) {
        return Err(format!("duration must be between 1000 and {MAX_SUBFRAMES} subframes"));
    }
    let corpus = CorpusConfig {
        seed,
        traces_per_class,
        duration_subframes: duration,
        ..CorpusConfig::default()
    };
    let err = |e: rrbsight_core::Error| e.to_string();
    let traces = experiment::generate_corpus(&corpus).map_err(err)?;
    let (rows, _) = experiment::featurize(&traces, &PipelineConfig::default(), 1).map_err(err)?;
    let fit = |variant| {
        let cfg = EnsembleConfig {
            n_estimators: trees,
            seed,
            ..EnsembleConfig::new(variant)
        };
        experiment::train_and_evaluate(&rows, &cfg, 0.7, false).map(|t| t.report)
    };
    to_json(&Classification {
        classes: profiles::catalogue().len(),
        traces: traces.len(),
        random_forest: fit(Variant::RandomForest).map_err(err)?,
        extra_trees: fit(Variant::ExtraTrees).map_err(err)?,
    })
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn catalogue() -> Result<String, JsError> {
    js(catalogue_json())
}

/// Sniffed UL/DL bytes per bin for one class, raw and rolling-normalised.
#[wasm_bindgen]
pub fn throughput(label: &str, seed: u64, duration: u32, bin: u32, bystanders: u32) -> Result<String, JsError> {
    js(throughput_json(label, seed, duration.into(), bin.into(), bystanders as usize))
}

#[wasm_bindgen]
pub fn cdf(label: &str, seed: u64, duration: u32, bin: u32, normalize: bool) -> Result<String, JsError> {
    js(cdf_json(label, seed, duration.into(), bin.into(), normalize))
}

#[wasm_bindgen]
pub fn classify(seed: u64, traces_per_class: u32, duration: u32, trees: u32) -> Result<String, JsError> {
    js(classify_json(seed, traces_per_class as usize, duration.into(), trees as usize))
}
