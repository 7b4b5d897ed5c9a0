use rrbsight_core::experiment::CorpusConfig;
use rrbsight_core::profiles;
use rrbsight_core::radio::Direction;
use rrbsight_core::sim::{run_simulation, DciLog};
use rrbsight_core::sniffer::{identify_victims, read_trace_csv, reconstruct_throughput};

#[test]
fn sniffing_a_written_log_matches_sniffing_in_memory() {
    let corpus = CorpusConfig {
        bystanders: 3,
        duration_subframes: 1_500,
        ..CorpusConfig::default()
    };
    let victim = profiles::find("video-zoom").unwrap();
    let sim = corpus.trace_sim_config(&victim, 0, 0);
    let (log, truth) = run_simulation(&sim).unwrap();

    let mut grants = Vec::new();
    let mut rar = Vec::new();
    log.write_grants_csv(&mut grants).unwrap();
    log.write_rar_csv(&mut rar).unwrap();
    let reread = DciLog::read_csv(grants.as_slice(), rar.as_slice(), Some(sim.duration_subframes))
        .and_then(|l| l.fit_to_cell(&sim.cell))
        .unwrap();
    assert_eq!(reread, log);

    let victims = identify_victims(&reread).unwrap();
    assert_eq!(victims.len(), 4);
    for ue in &truth.ues {
        assert!(victims.contains(&ue.crnti));
        let a = reconstruct_throughput(&log, ue.crnti, 100, 1.0).unwrap();
        let b = reconstruct_throughput(&reread, ue.crnti, 100, 1.0).unwrap();
        assert_eq!(a, b);
        for dir in Direction::BOTH {
            let total: u64 = ue.granted[dir.index()].iter().sum();
            assert_eq!(a.series(dir).values.iter().sum::<f64>(), total as f64);
        }
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let (ul, dl) = read_trace_csv(csv.as_slice(), 100.0).unwrap();
        assert_eq!((ul, dl), (a.ul.clone(), a.dl.clone()));
    }
}

#[test]
fn victim_grants_are_stable_under_bystander_load() {
    // The GBR victim's grants do not depend on who else is in the cell.
    let victim = profiles::find("voice-telegram").unwrap();
    let mut totals = Vec::new();
    for bystanders in [0, 4] {
        let corpus = CorpusConfig {
            bystanders,
            duration_subframes: 800,
            ..CorpusConfig::default()
        };
        let sim = corpus.trace_sim_config(&victim, 5, 1);
        let (log, truth) = run_simulation(&sim).unwrap();
        let t = reconstruct_throughput(&log, truth.ues[0].crnti, 1, 1.0).unwrap();
        totals.push((t.ul.values, t.dl.values));
    }
    assert_eq!(totals[0], totals[1]);
}
