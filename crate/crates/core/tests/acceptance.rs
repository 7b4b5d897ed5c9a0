//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;

use rrbsight_core::ensemble::{self, Dataset, EnsembleConfig, Variant};
use rrbsight_core::experiment::{self, CorpusConfig};
use rrbsight_core::pipeline::{self, PipelineConfig, ThroughputSeries, Unit};
use rrbsight_core::profiles::{self, AppProfile, DirectionParams, Shape};
use rrbsight_core::radio::{rb_count, CellConfig, Crnti, Direction, QosClass};
use rrbsight_core::seed;
use rrbsight_core::sim::{run_simulation, ProfileRef, SimConfig, UeSpec};
use rrbsight_core::sniffer::reconstruct_throughput;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn classification() -> Outcome {
    let start = Instant::now();
    let corpus = CorpusConfig::default();
    let traces = match experiment::generate_corpus(&corpus) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("corpus: {e}")),
    };
    let (rows, skipped) = match experiment::featurize(&traces, &PipelineConfig::default(), 1) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("features: {e}")),
    };
    let rf = experiment::train_and_evaluate(&rows, &EnsembleConfig::new(Variant::RandomForest), 0.7, true);
    let et = experiment::train_and_evaluate(&rows, &EnsembleConfig::new(Variant::ExtraTrees), 0.7, true);
    let elapsed = start.elapsed().as_secs_f64();
    match (rf, et) {
        (Ok(rf), Ok(et)) => {
            let r = &rf.report;
            let pass = traces.len() == 440
                && r.classes.len() == 22
                && r.accuracy >= 0.90
                && r.macro_f1 >= 0.88
                && et.report.accuracy >= 0.85
                && elapsed < 60.0;
            outcome(
                pass,
                format!(
                    "{} traces ({skipped} skipped), RF acc {:.4} macro-F1 {:.4} (lowest {:.3} {}), ET acc {:.4} macro-F1 {:.4}, {elapsed:.1}s",
                    traces.len(),
                    r.accuracy,
                    r.macro_f1,
                    r.lowest_f1,
                    r.lowest_f1_label,
                    et.report.accuracy,
                    et.report.macro_f1
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("training: {e}")),
    }
}

/// Reference percentile for whole-number `p`: integer rank arithmetic, then
/// one interpolation step.
fn interp_percentile(sorted: &[f64], p: f64) -> f64 {
    let p = p as usize;
    let rank_pct = p * (sorted.len() - 1);
    let (lo, rem) = (rank_pct / 100, rank_pct % 100);
    let (a, b) = (sorted[lo], sorted.get(lo + 1).copied().unwrap_or(sorted[lo]));
    if rem == 0 || a == b {
        a
    } else {
        let w = rem as f64 / 100.0;
        (1.0 - w) * a + w * b
    }
}

fn brute_force_cap(data: &[f64]) -> Vec<f64> {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    let q1 = interp_percentile(&s, 25.0);
    let q3 = interp_percentile(&s, 75.0);
    let limit = q3 + 2.0 * (q3 - q1);
    let cap = interp_percentile(&s, 95.0);
    data.iter().map(|&x| if x > limit { cap } else { x }).collect()
}

fn random_array(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let style = rng.gen_range(0..3);
    (0..len)
        .map(|_| match style {
            0 => f64::from(rng.gen_range(0u32..20)),
            1 => rng.gen_range(0.0..1.0e4),
            _ => {
                if rng.gen_bool(0.05) {
                    rng.gen_range(1.0e5..1.0e7)
                } else {
                    rng.gen_range(0.0..500.0)
                }
            }
        })
        .collect()
}

fn iqr_oracle() -> Outcome {
    let cfg = PipelineConfig::default();
    let worked = pipeline::iqr_cap(&[1.0, 2.0, 3.0, 4.0, 100.0], &cfg).unwrap();
    if worked != [1.0, 2.0, 3.0, 4.0, 80.8] {
        return outcome(false, format!("worked case gave {worked:?}"));
    }
    let mut rng = seed::rng(0x1A);
    let mut capped_any = 0;
    for case in 0..1000 {
        let len = rng.gen_range(5..=500);
        let data = random_array(&mut rng, len);
        let got = pipeline::iqr_cap(&data, &cfg).unwrap();
        let want = brute_force_cap(&data);
        if got != want {
            return outcome(false, format!("case {case} (len {len}) differs"));
        }
        if got != data {
            capped_any += 1;
        }
    }
    outcome(true, format!("1000 arrays exact, {capped_any} had outliers capped; worked case exact"))
}

fn rel_close(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= 1e-9 * scale
}

fn naive_features(data: &[f64]) -> [f64; 5] {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (mut sx, mut sy, mut sxy, mut sxx) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in data.iter().enumerate() {
        let x = i as f64;
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    [mean, var.sqrt(), slope, interp_percentile(&s, 25.0), interp_percentile(&s, 75.0)]
}

fn feature_oracle() -> Outcome {
    if pipeline::slope(&[0.0, 2.0, 4.0]).unwrap() != 2.0 {
        return outcome(false, "slope([0,2,4]) != 2");
    }
    let cfg = PipelineConfig::default();
    let mut rng = seed::rng(0xFEA7);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let len = rng.gen_range(2..=400);
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(1.0..1.0e5)).collect();
        let got = [
            pipeline::mean(&data),
            pipeline::std_dev(&data),
            pipeline::slope(&data).unwrap(),
            pipeline::percentile(&data, 25.0).unwrap(),
            pipeline::percentile(&data, 75.0).unwrap(),
        ];
        let want = naive_features(&data);
        // The full extractor must agree with the oracle on the cleaned series.
        let series = ThroughputSeries::new(100.0, data.clone(), Unit::RawBytes).unwrap();
        let fv = pipeline::extract_features(&series, &series, &cfg).unwrap();
        let via_pipeline = naive_features(&brute_force_cap(&data));
        let full = fv.to_array();
        for k in 0..5 {
            if !rel_close(got[k], want[k]) || !rel_close(full[k], via_pipeline[k]) {
                return outcome(false, format!("case {case} feature {k}: {} vs {}", got[k], want[k]));
            }
            let scale = want[k].abs().max(1e-300);
            worst = worst.max((got[k] - want[k]).abs() / scale);
        }
    }
    outcome(true, format!("1000 series, worst relative error {worst:.2e}; slope([0,2,4]) == 2"))
}

fn random_sim_config(rng: &mut impl Rng, case: u64) -> SimConfig {
    let catalogue = profiles::catalogue();
    let (gbr, non_gbr): (Vec<AppProfile>, Vec<AppProfile>) = catalogue.into_iter().partition(|p| p.qos.is_gbr());
    let cell = CellConfig {
        total_rbs: *[24u32, 48, 100].choose(rng).unwrap(),
        ..CellConfig::default()
    };
    let mut ues = Vec::new();
    let mut used = [0u32; 2];
    for _ in 0..rng.gen_range(0..=2) {
        let p = gbr.choose(rng).unwrap().clone();
        let need = [p.uplink.persistent_rbs, p.downlink.persistent_rbs];
        if used[0] + need[0] <= cell.total_rbs && used[1] + need[1] <= cell.total_rbs {
            used = [used[0] + need[0], used[1] + need[1]];
            ues.push(p);
        }
    }
    for _ in 0..rng.gen_range(1..=5) {
        ues.push(non_gbr.choose(rng).unwrap().jittered(rng, 0.2));
    }
    ues.shuffle(rng);
    SimConfig {
        cell,
        ues: ues
            .into_iter()
            .map(|p| UeSpec {
                crnti: None,
                profile: ProfileRef::Inline(Box::new(p)),
            })
            .collect(),
        duration_subframes: rng.gen_range(50..=3000),
        seed: seed::derive(&[0x51, case]),
    }
}

fn sniffer_lossless() -> Outcome {
    let mut rng = seed::rng(0x5A1F);
    let mut checked = 0usize;
    for case in 0..50 {
        let cfg = random_sim_config(&mut rng, case);
        let (log, truth) = match run_simulation(&cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("config {case}: {e}")),
        };
        for ue in &truth.ues {
            let trace = reconstruct_throughput(&log, ue.crnti, 1, 1.0).unwrap();
            for dir in Direction::BOTH {
                let want: Vec<f64> = ue.granted[dir.index()].iter().map(|&b| b as f64).collect();
                if trace.series(dir).values != want {
                    return outcome(false, format!("config {case} rnti {} {dir} differs", ue.crnti.0));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("50 configs, {checked} UE-direction series byte-exact"))
}

fn scheduler_invariants() -> Outcome {
    let mut rng = seed::rng(0x5C4E);
    let mut subframes = 0u64;
    for case in 0..50 {
        let cfg = random_sim_config(&mut rng, 1000 + case);
        let (log, truth) = run_simulation(&cfg).unwrap();
        let cell = cfg.cell;
        let ues = cfg.build_ues().unwrap();
        let mut used: BTreeMap<(u64, Direction), u32> = BTreeMap::new();
        let mut per_ue: BTreeMap<(Crnti, Direction, u64), u32> = BTreeMap::new();
        for g in &log.grants {
            let rbs = rb_count(&g.bitmap, &cell).unwrap();
            *used.entry((g.subframe, g.direction)).or_default() += rbs;
            *per_ue.entry((g.rnti, g.direction, g.subframe)).or_default() += rbs;
        }
        if let Some(((sf, dir), rbs)) = used.iter().find(|(_, &r)| r > cell.total_rbs) {
            return outcome(false, format!("config {case} subframe {sf} {dir}: {rbs} RBs"));
        }
        for ue in ues.iter().filter(|u| u.profile.qos.is_gbr()) {
            for dir in Direction::BOTH {
                let want = ue.profile.params(dir).persistent_rbs;
                for sf in 0..cfg.duration_subframes {
                    let got = per_ue.get(&(ue.identity, dir, sf)).copied().unwrap_or(0);
                    if got != want {
                        return outcome(false, format!("config {case} GBR {} {dir} sf {sf}: {got} != {want}", ue.identity.0));
                    }
                }
            }
        }
        for ue in &truth.ues {
            for d in 0..2 {
                let arrived: u64 = ue.arrivals[d].iter().sum();
                let drained: u64 = ue.drained[d].iter().sum();
                if drained + ue.final_buffer[d] != arrived {
                    return outcome(false, format!("config {case} rnti {} not conserved", ue.crnti.0));
                }
                let mut buffered = 0u64;
                for t in 0..ue.arrivals[d].len() {
                    buffered += ue.arrivals[d][t];
                    if ue.drained[d][t] != buffered.min(ue.granted[d][t]) {
                        return outcome(false, format!("config {case} rnti {} drain rule broken at {t}", ue.crnti.0));
                    }
                    buffered -= ue.drained[d][t];
                }
            }
        }
        subframes += cfg.duration_subframes;
    }
    outcome(true, format!("50 configs, {subframes} subframes: capacity, GBR constancy, conservation hold"))
}

fn noiseless(p: &AppProfile) -> AppProfile {
    let mut p = p.clone();
    p.uplink.noise_std = 0.0;
    p.downlink.noise_std = 0.0;
    p
}

fn arrival_correlation() -> Outcome {
    let shop = noiseless(&profiles::find("shop-amazon").unwrap());
    let vod = noiseless(&profiles::find("youtube-vod-hd").unwrap());
    let ott = noiseless(&profiles::find("ott-netflix").unwrap());
    // Flat arrivals have no variance to correlate, so the linear case drifts.
    let drift = |base: f64, trend: f64| DirectionParams {
        trend,
        ..DirectionParams::flat(base)
    };
    let linear = AppProfile {
        class_label: "linear-drift".into(),
        shape: Shape::Linear,
        uplink: drift(200.0, 0.2),
        downlink: drift(900.0, 0.5),
        qos: QosClass::browsing(),
    };
    let mut lines = Vec::new();
    let mut pass = true;
    for (p, duration) in [(&shop, 20_000u64), (&vod, 20_000), (&ott, 60_000), (&linear, 5_000)] {
        let cfg = SimConfig {
            cell: CellConfig::default(),
            ues: vec![UeSpec {
                crnti: Some(0x4601),
                profile: ProfileRef::Inline(Box::new(p.clone())),
            }],
            duration_subframes: duration,
            seed: 7,
        };
        let (log, truth) = run_simulation(&cfg).unwrap();
        let trace = reconstruct_throughput(&log, Crnti(0x4601), 1, 1.0).unwrap();
        let mut rs = Vec::new();
        let mut evaluated = 0;
        for dir in Direction::BOTH {
            let arrivals: Vec<f64> = truth.ues[0].arrivals[dir.index()].iter().map(|&b| b as f64).collect();
            // Arrivals that never exceed one RBG are granted exactly one RBG
            // every subframe; the grid cannot resolve their shape at bin 1.
            let peak = arrivals.iter().copied().fold(0.0, f64::max);
            if peak <= cfg.cell.rbg_bytes() as f64 {
                rs.push(format!("{dir} sub-RBG, not resolvable"));
                continue;
            }
            evaluated += 1;
            match pipeline::pearson_correlation(&arrivals, &trace.series(dir).values) {
                Ok(r) => {
                    pass &= r >= 0.90;
                    rs.push(format!("{dir} {r:.3}"));
                }
                Err(e) => {
                    pass = false;
                    rs.push(format!("{dir} {e}"));
                }
            }
        }
        pass &= evaluated > 0;
        lines.push(format!("{:?} [{}]", p.shape, rs.join(", ")));
    }
    outcome(pass, lines.join("; "))
}

fn determinism() -> Outcome {
    let corpus = CorpusConfig::default();
    let cfg = PipelineConfig::default();
    let a = experiment::run_end_to_end(&corpus, &cfg, 100);
    let b = experiment::run_end_to_end(&corpus, &cfg, 100);
    let (a, b) = match (a, b) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("run: {e}")),
    };
    let same_digests = a.digests() == b.digests();
    let (rows, _) = experiment::featurize(&experiment::generate_corpus(&corpus).unwrap(), &cfg, 1).unwrap();
    let ds = Dataset::from_features(&rows).unwrap();
    let mut same_models = true;
    for variant in [Variant::RandomForest, Variant::ExtraTrees] {
        let ec = EnsembleConfig::new(variant);
        let par = ensemble::fit_with(&ds, &ec, true).unwrap();
        let ser = ensemble::fit_with(&ds, &ec, false).unwrap();
        same_models &= par.to_json().unwrap() == ser.to_json().unwrap();
    }
    outcome(
        same_digests && same_models,
        format!(
            "{} artifacts, digests identical: {same_digests}; parallel == serial models: {same_models}",
            a.files.len()
        ),
    )
}

fn cdf_properties() -> Outcome {
    let traces = experiment::generate_corpus(&CorpusConfig::default()).unwrap();
    let cfg = PipelineConfig::default();
    let mut curves = 0;
    for t in &traces {
        for dir in Direction::BOTH {
            for normalize in [true, false] {
                let cdf = match pipeline::series_cdf(t.trace.series(dir), &cfg, normalize) {
                    Ok(c) => c,
                    Err(e) => return outcome(false, format!("{} #{} {dir}: {e}", t.label, t.iteration)),
                };
                let monotone = cdf.points.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1);
                if !monotone || cdf.points.last().map(|p| p.1) != Some(1.0) {
                    return outcome(false, format!("{} #{} {dir} malformed", t.label, t.iteration));
                }
                curves += 1;
            }
        }
    }
    outcome(traces.len() == 440, format!("{} traces, {curves} curves monotone and ending at 1.0", traces.len()))
}

fn normalization_range() -> Outcome {
    use proptest::prelude::*;
    let mut runner = TestRunner::new(PtConfig {
        cases: 10_000,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let strategy = (
        proptest::collection::vec(
            prop_oneof![0.0..1.0e9f64, Just(0.0), (0u32..4).prop_map(f64::from)],
            1..300,
        ),
        0.01f64..1.0,
        1usize..20,
    );
    let result = runner.run(&strategy, |(values, window_fraction, min_window)| {
        let cfg = PipelineConfig {
            window_fraction,
            min_window,
            ..PipelineConfig::default()
        };
        let s = ThroughputSeries::new(100.0, values, Unit::RawBytes).unwrap();
        let out = pipeline::rolling_normalize(&s, &cfg);
        if out.values.iter().all(|v| (0.0..=1.0).contains(v)) {
            Ok(())
        } else {
            Err(TestCaseError::fail("value outside [0,1]"))
        }
    });
    match result {
        Ok(()) => outcome(true, "10000 fuzzed series, all outputs in [0,1]"),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 9] = [
        ("synthetic 22-class attack (RF/ET accuracy, macro F1, runtime)", classification),
        ("iqr_cap oracle equivalence", iqr_oracle),
        ("feature oracle", feature_oracle),
        ("sniffer losslessness", sniffer_lossless),
        ("scheduler invariants", scheduler_invariants),
        ("arrival/reconstruction correlation per shape", arrival_correlation),
        ("end-to-end determinism", determinism),
        ("CDF properties", cdf_properties),
        ("rolling_normalize range", normalization_range),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag}  {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
