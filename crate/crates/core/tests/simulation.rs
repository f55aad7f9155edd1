use cdss_core::radio::Transmitter;
use cdss_core::topology::Area;
use cdss_core::{parse_scenario, run_simulation, Case, MetricsStore, RunSpec, ScenarioConfig};

fn run(case: Case, seed: u64) -> MetricsStore {
    run_simulation(&RunSpec::new(ScenarioConfig::default(), case, seed)).unwrap()
}

#[test]
fn sms_runs_once_per_period() {
    let store = run(Case::CdssHighDemand, 1);
    assert_eq!(store.sms_invocations, 40);
    // One row per group per step.
    assert_eq!(store.timeline.len(), 40 * 3);
    let epochs: Vec<u64> = store.timeline.iter().step_by(3).map(|r| r.epoch).collect();
    assert_eq!(epochs, (1..=40).map(|k| k * 25).collect::<Vec<_>>());
}

#[test]
fn timeline_rows_conserve_and_order() {
    let store = run(Case::CdssLowDemand, 2);
    let cfg = ScenarioConfig::default();
    for w in store.timeline.windows(2) {
        assert!(w[1].step >= w[0].step);
        assert!(w[1].version >= w[0].version);
    }
    for row in store.timeline.iter().filter(|r| r.coordinated) {
        let size = store.plan.groups[row.group].size();
        assert_eq!(row.tn_rbs + row.guard_rbs + row.ntn_rbs, size);
        assert_eq!(row.guard_rbs, cfg.cdss.guard_rbs);
        assert!(row.tn_rbs >= cfg.cdss.tn_min && row.ntn_rbs >= cfg.cdss.ntn_min);
    }
    // Only coordinated groups are ever adjusted.
    assert!(store
        .timeline
        .iter()
        .filter(|r| !r.coordinated)
        .all(|r| r.delta == 0 && r.avg_load.is_none()));
}

#[test]
fn ld_shrinks_tn_to_minimum() {
    let store = run(Case::CdssLowDemand, 3);
    let summary = store.summary(12);
    assert_eq!(summary.tn_rbs, 12 + 12 + 53);
    assert!(summary.tn_min_reached_s.unwrap() < 5.0);
}

#[test]
fn tn_only_uses_whole_band() {
    for case in [Case::TnOnlyLowDemand, Case::TnOnlyHighDemand] {
        let store = run(case, 4);
        assert_eq!(store.tn_rbs(), 160);
        assert!(store.grants.is_empty());
        assert!(store.ues.iter().all(|u| !matches!(u.serving, Some(Transmitter::Beam(_)))));
    }
}

#[test]
fn throughput_never_exceeds_demand() {
    for case in Case::ALL {
        let store = run(case, 5);
        for ue in &store.ues {
            // One epoch of slack: arrivals during warmup may be served after it.
            let limit = ue.demand_bps * (1.0 + store.epoch_s / store.measured_s);
            assert!(
                store.throughput_bps(ue) <= limit + 1e-6,
                "{case} UE {} at {} of {}",
                ue.ue_id,
                store.throughput_bps(ue),
                ue.demand_bps
            );
        }
    }
}

#[test]
fn bytes_reconcile_between_ues_and_transmitters() {
    for case in Case::ALL {
        let store = run(case, 6);
        assert_eq!(store.total_rx_bytes(), store.served_bytes());
    }
}

#[test]
fn utilization_samples_are_fractions() {
    let store = run(Case::CdssHighDemand, 7);
    assert!(!store.utilization.is_empty());
    assert!(store
        .utilization
        .iter()
        .all(|s| (0.0..=1.0).contains(&s.utilization)));
}

#[test]
fn some_but_not_most_tn_area_ues_attach_to_ntn() {
    let cfg = ScenarioConfig::default();
    let mut on_ntn = 0;
    let mut tn_area = 0;
    for seed in cfg.sim.seeds.clone() {
        let store = run(Case::CdssLowDemand, seed);
        for ue in store.ues.iter().filter(|u| matches!(u.area, Area::TnCell(_))) {
            tn_area += 1;
            on_ntn += usize::from(matches!(ue.serving, Some(Transmitter::Beam(_))));
        }
    }
    let frac = on_ntn as f64 / tn_area as f64;
    assert!(frac > 0.0 && frac < 0.5, "{frac}");
}

#[test]
fn remote_beam_ues_are_served_by_their_beam() {
    let store = run(Case::CdssLowDemand, 8);
    let beam_area = store.ues.iter().filter(|u| u.area == Area::Beam(2));
    for ue in beam_area {
        assert_eq!(ue.serving, Some(Transmitter::Beam(2)), "UE {}", ue.ue_id);
    }
}

#[test]
fn shorter_epoch_keeps_period_in_seconds() {
    let cfg = parse_scenario("[sim]\nepoch_ms = 5.0\ntotal_s = 2.0\nwarmup_s = 1.0\n").unwrap();
    let store = run_simulation(&RunSpec::new(cfg, Case::CdssHighDemand, 1)).unwrap();
    assert_eq!(store.sms_invocations, 8);
    assert_eq!(store.timeline[0].epoch, 50);
}

#[test]
fn case_changes_do_not_move_ues() {
    let a = run(Case::TnOnlyLowDemand, 9);
    let b = run(Case::CdssHighDemand, 9);
    let areas = |s: &MetricsStore| s.ues.iter().map(|u| u.area).collect::<Vec<_>>();
    assert_eq!(areas(&a), areas(&b));
}
