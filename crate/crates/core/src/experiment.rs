//! Seeded end-to-end synthetic attack: simulate every class, sniff the
//! victim, extract features, then train and score both ensembles.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensemble::{self, Dataset, EnsembleConfig, ForestModel, MetricsReport, Variant};
use crate::error::{Error, Result};
use crate::pipeline::{self, average_iterations, FeatureVector, PipelineConfig, ThroughputSeries};
use crate::profiles::{self, AppProfile};
use crate::radio::CellConfig;
use crate::seed;
use crate::sim::{run_simulation, ProfileRef, SimConfig, UeSpec};
use crate::sniffer::{reconstruct_throughput, VictimTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub traces_per_class: usize,
    pub duration_subframes: u64,
    pub bin_subframes: u64,
    /// Other UEs sharing the cell with the victim, drawn from non-GBR classes.
    pub bystanders: usize,
    /// Relative iteration-to-iteration spread of profile rates and periods.
    pub jitter: f64,
    pub cell: CellConfig,
    /// Restrict to these catalogue classes; empty means all.
    pub classes: Vec<String>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            traces_per_class: 20,
            duration_subframes: 30_000,
            bin_subframes: 100,
            bystanders: 1,
            jitter: 0.08,
            cell: CellConfig::default(),
            classes: Vec::new(),
        }
    }
}

impl CorpusConfig {
    pub fn profiles(&self) -> Result<Vec<AppProfile>> {
        if self.classes.is_empty() {
            return Ok(profiles::catalogue());
        }
        self.classes
            .iter()
            .map(|c| profiles::find(c).ok_or_else(|| Error::Config(format!("unknown class {c:?}"))))
            .collect()
    }

    /// Simulation for one (class, iteration) cell. UE 0 is the victim.
    pub fn trace_sim_config(&self, victim: &AppProfile, class_index: usize, iteration: usize) -> SimConfig {
        let trace_seed = seed::derive(&[self.seed, class_index as u64, iteration as u64]);
        let mut rng = seed::rng(seed::derive(&[trace_seed, 0x5EED]));
        let mut ues = vec![UeSpec {
            crnti: None,
            profile: ProfileRef::Inline(Box::new(victim.jittered(&mut rng, self.jitter))),
        }];
        let pool: Vec<AppProfile> = profiles::catalogue().into_iter().filter(|p| !p.qos.is_gbr()).collect();
        for _ in 0..self.bystanders {
            let other = pool.choose(&mut rng).expect("catalogue has non-GBR classes");
            ues.push(UeSpec {
                crnti: None,
                profile: ProfileRef::Inline(Box::new(other.jittered(&mut rng, self.jitter))),
            });
        }
        SimConfig {
            cell: self.cell,
            ues,
            duration_subframes: self.duration_subframes,
            seed: trace_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    pub label: String,
    pub iteration: usize,
    pub trace: VictimTrace,
}

fn simulate_one(cfg: &CorpusConfig, victim: &AppProfile, class_index: usize, iteration: usize) -> Result<LabeledTrace> {
    let sim = cfg.trace_sim_config(victim, class_index, iteration);
    let (log, truth) = run_simulation(&sim)?;
    let crnti = truth.ues[0].crnti;
    let trace = reconstruct_throughput(&log, crnti, cfg.bin_subframes, f64::from(cfg.cell.subframe_ms))?;
    Ok(LabeledTrace {
        label: victim.class_label.clone(),
        iteration,
        trace,
    })
}

/// Every class × iteration trace, ordered by class then iteration.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<LabeledTrace>> {
    if cfg.traces_per_class == 0 {
        return Err(Error::Config("traces_per_class must be >= 1".into()));
    }
    let profiles = cfg.profiles()?;
    let jobs: Vec<(usize, usize)> = (0..profiles.len())
        .flat_map(|c| (0..cfg.traces_per_class).map(move |i| (c, i)))
        .collect();
    let run = |&(c, i): &(usize, usize)| simulate_one(cfg, &profiles[c], c, i);
    #[cfg(feature = "parallel")]
    let traces = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let traces = jobs.iter().map(run).collect::<Result<Vec<_>>>()?;
    Ok(traces)
}

/// Feature rows for a corpus. With `average > 1`, consecutive groups of that
/// many iterations of a class are averaged into one trace first. Traces that
/// are empty after zero removal are skipped and counted.
pub fn featurize(traces: &[LabeledTrace], cfg: &PipelineConfig, average: usize) -> Result<(Vec<FeatureVector>, usize)> {
    featurize_series(
        traces.iter().map(|t| (t.label.as_str(), &t.trace.ul, &t.trace.dl)),
        cfg,
        average,
    )
}

/// [`featurize`] over bare `(label, ul, dl)` triples. Rows come out grouped
/// by label in sorted order, iterations in input order.
pub fn featurize_series<'a, I>(items: I, cfg: &PipelineConfig, average: usize) -> Result<(Vec<FeatureVector>, usize)>
where
    I: IntoIterator<Item = (&'a str, &'a ThroughputSeries, &'a ThroughputSeries)>,
{
    cfg.validate()?;
    let mut by_label: BTreeMap<&str, Vec<(&ThroughputSeries, &ThroughputSeries)>> = BTreeMap::new();
    for (label, ul, dl) in items {
        by_label.entry(label).or_default().push((ul, dl));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (label, traces) in &by_label {
        for group in traces.chunks(average.max(1)) {
            let ul = average_iterations(&group.iter().map(|t| t.0.clone()).collect::<Vec<_>>())?;
            let dl = average_iterations(&group.iter().map(|t| t.1.clone()).collect::<Vec<_>>())?;
            match pipeline::extract_features(&ul, &dl, cfg) {
                Ok(mut fv) => {
                    fv.label = Some(label.to_string());
                    rows.push(fv);
                }
                Err(Error::DegenerateTrace(_)) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok((rows, skipped))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedVariant {
    pub model: ForestModel,
    pub report: MetricsReport,
}

/// Stratified split, fit and evaluate one variant.
pub fn train_and_evaluate(
    rows: &[FeatureVector],
    cfg: &EnsembleConfig,
    train_fraction: f64,
    parallel: bool,
) -> Result<TrainedVariant> {
    let ds = Dataset::from_features(rows)?;
    let (train, test) = ensemble::train_test_split(&ds, train_fraction, cfg.seed)?;
    let model = ensemble::fit_with(&train, cfg, parallel)?;
    let report = ensemble::evaluate(&model, &test)?;
    Ok(TrainedVariant { model, report })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files an end-to-end run produces, keyed by relative path.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    pub rf: TrainedVariant,
    pub et: TrainedVariant,
    pub skipped_traces: usize,
    pub n_traces: usize,
    /// Wall-clock seconds per stage; not part of any artifact.
    pub stage_seconds: Vec<(String, f64)>,
}

impl RunArtifacts {
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(k, v)| (k.clone(), sha256_hex(v))).collect()
    }
}

/// Full synthetic attack from one top-level seed.
pub fn run_end_to_end(corpus: &CorpusConfig, pipeline_cfg: &PipelineConfig, n_estimators: usize) -> Result<RunArtifacts> {
    let mut stage_seconds = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str| {
        stage_seconds.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let traces = generate_corpus(corpus)?;
    let mut files = BTreeMap::new();
    for t in &traces {
        let mut buf = Vec::new();
        t.trace.write_csv(&mut buf)?;
        files.insert(format!("traces/{}/{:03}.csv", t.label, t.iteration), buf);
    }
    lap("simulate_and_sniff");
    let (rows, skipped) = featurize(&traces, pipeline_cfg, 1)?;
    let mut features = Vec::new();
    pipeline::write_features_csv(&rows, &mut features)?;
    files.insert("features.csv".into(), features);
    lap("features");

    let mut trained = Vec::new();
    for (name, variant) in [("rf", Variant::RandomForest), ("et", Variant::ExtraTrees)] {
        let cfg = EnsembleConfig {
            n_estimators,
            seed: corpus.seed,
            ..EnsembleConfig::new(variant)
        };
        let tv = train_and_evaluate(&rows, &cfg, 0.7, cfg!(feature = "parallel"))?;
        files.insert(format!("{name}_model.json"), tv.model.to_json()?.into_bytes());
        files.insert(format!("{name}_report.json"), tv.report.to_json()?.into_bytes());
        trained.push(tv);
        lap(&format!("train_eval_{name}"));
    }
    let et = trained.pop().expect("two variants");
    let rf = trained.pop().expect("two variants");
    Ok(RunArtifacts {
        files,
        rf,
        et,
        skipped_traces: skipped,
        n_traces: traces.len(),
        stage_seconds,
    })
}
