//! Cross-cutting behavioral properties of the simulation engine.

use gmac_core::engine::{TraceLabel, TraceRecord};
use gmac_core::monitors::MonitorSet;
use gmac_core::{
    run_simulation, DeliveryPolicy, DriftPolicy, ProtocolParams, RunConfig, RunOutcome,
    Topology,
};

fn run(
    p: &ProtocolParams,
    t: &Topology,
    policy: &DriftPolicy,
    config: &RunConfig,
) -> RunOutcome {
    run_simulation(p, t, policy, config).unwrap()
}

fn recv_lines(out: &RunOutcome) -> Vec<String> {
    out.trace
        .records()
        .iter()
        .filter(|r| {
            matches!(
                r,
                TraceRecord::Transition {
                    label: TraceLabel::Recv,
                    ..
                }
            )
        })
        .map(|r| r.to_csv_line())
        .collect()
}

#[test]
fn identical_runs_produce_identical_traces() {
    let p = ProtocolParams::uniform(4, 10, 4, vec![0, 1, 2, 3], 29, 3, 2, 99, 100);
    let t = Topology::clique(4);
    let config = RunConfig {
        horizon_frames: 20,
        ..RunConfig::default()
    };
    for policy in [
        DriftPolicy::Perfect,
        DriftPolicy::FixedRate(vec![99, 100, 99, 100]),
        DriftPolicy::SeededJitter(0xFEED),
    ] {
        let a = run(&p, &t, &policy, &config);
        let b = run(&p, &t, &policy, &config);
        assert_eq!(a.trace.to_csv(), b.trace.to_csv());
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn different_seeds_usually_differ() {
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 3, 0, 99, 100);
    let t = Topology::clique(3);
    let config = RunConfig {
        horizon_frames: 5,
        monitors: MonitorSet::none(),
        ..RunConfig::default()
    };
    let a = run(&p, &t, &DriftPolicy::SeededJitter(1), &config);
    let b = run(&p, &t, &DriftPolicy::SeededJitter(2), &config);
    assert_ne!(a.trace.to_csv(), b.trace.to_csv());
}

#[test]
fn zero_drift_keeps_every_phase_metric_at_zero() {
    let configs: Vec<(ProtocolParams, Topology)> = vec![
        (
            ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1),
            Topology::clique(3),
        ),
        (
            ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 3, 2, 1, 1),
            Topology::line(3),
        ),
        (
            ProtocolParams::uniform(4, 10, 4, vec![0, 1, 2, 3], 29, 3, 2, 1, 1),
            Topology::clique(4),
        ),
        (
            ProtocolParams::uniform(5, 10, 3, vec![0, 1, 2, 0, 1], 29, 3, 2, 1, 1),
            Topology::line(5),
        ),
        (
            ProtocolParams::uniform(6, 10, 4, vec![0, 1, 2, 3, 0, 1], 29, 2, 0, 1, 1),
            Topology::from_edges(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)])
                .unwrap(),
        ),
    ];
    for (p, t) in configs {
        let config = RunConfig {
            horizon_frames: 30,
            ..RunConfig::default()
        };
        let out = run(&p, &t, &DriftPolicy::Perfect, &config);
        assert!(out.verdict.is_ok());
        assert_eq!(out.stats.max_abs_phase_error, 0);
        assert_eq!(out.stats.max_abs_offset, 0);
        assert_eq!(out.stats.max_phase_spread, 0);
    }
}

#[test]
fn synchronized_pairs_measure_zero_for_all_guard_switch_combinations() {
    for g in 1..=6u32 {
        for r in 0..g {
            for tx in [vec![0u32, 1], vec![1, 0]] {
                let p = ProtocolParams::uniform(2, 10, 2, tx.clone(), 29, g, r, 1, 1);
                let t = Topology::clique(2);
                let config = RunConfig {
                    horizon_frames: 5,
                    record_trace: false,
                    ..RunConfig::default()
                };
                let out = run(&p, &t, &DriftPolicy::Perfect, &config);
                assert!(out.verdict.is_ok(), "g={g} r={r} tx={tx:?}");
                assert_eq!(
                    out.stats.max_abs_phase_error, 0,
                    "g={g} r={r} tx={tx:?}"
                );
                assert_eq!(out.stats.max_abs_offset, 0, "g={g} r={r} tx={tx:?}");
                // Two messages per frame must actually flow.
                assert!(out.stats.messages_delivered > 0);
            }
        }
    }
}

#[test]
fn monitors_never_change_the_trace() {
    // Clean configuration: identical traces with and without monitors.
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1);
    let t = Topology::clique(3);
    let on = RunConfig {
        horizon_frames: 10,
        ..RunConfig::default()
    };
    let off = RunConfig {
        monitors: MonitorSet::none(),
        ..on.clone()
    };
    let with = run(&p, &t, &DriftPolicy::Perfect, &on);
    let without = run(&p, &t, &DriftPolicy::Perfect, &off);
    assert_eq!(with.trace.to_csv(), without.trace.to_csv());

    // Violating configuration: the monitored trace is a prefix of the
    // unmonitored one.
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 3, 5, 1, 1);
    let with = run(&p, &t, &DriftPolicy::Perfect, &on);
    let without = run(&p, &t, &DriftPolicy::Perfect, &off);
    assert!(!with.verdict.is_ok());
    assert!(without.verdict.is_ok());
    let monitored = with.trace.to_csv();
    let free = without.trace.to_csv();
    assert!(free.starts_with(&monitored));
    assert!(free.len() > monitored.len());
}

#[test]
fn delivery_policies_agree_when_inv1_holds() {
    let configs: Vec<(ProtocolParams, Topology)> = vec![
        (
            ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1),
            Topology::clique(3),
        ),
        (
            ProtocolParams::uniform(4, 10, 4, vec![0, 1, 2, 3], 29, 3, 2, 1, 1),
            Topology::clique(4),
        ),
    ];
    for (p, t) in configs {
        let end_instant = run(
            &p,
            &t,
            &DriftPolicy::Perfect,
            &RunConfig {
                horizon_frames: 10,
                ..RunConfig::default()
            },
        );
        let full_overlap = run(
            &p,
            &t,
            &DriftPolicy::Perfect,
            &RunConfig {
                horizon_frames: 10,
                delivery: DeliveryPolicy::FullOverlap,
                ..RunConfig::default()
            },
        );
        assert!(end_instant.verdict.is_ok());
        assert_eq!(recv_lines(&end_instant), recv_lines(&full_overlap));
    }
}

#[test]
fn late_radio_switch_splits_the_delivery_policies() {
    // With the switch slower than the guard, the receiver that listens
    // right after its own TX slot turns around mid-transmission: the radio
    // catches the end of the message but missed its start.
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 3, 5, 1, 1);
    let t = Topology::clique(3);
    let base = RunConfig {
        horizon_frames: 3,
        monitors: MonitorSet::none(),
        ..RunConfig::default()
    };
    let end_instant = run(&p, &t, &DriftPolicy::Perfect, &base);
    let full_overlap = run(
        &p,
        &t,
        &DriftPolicy::Perfect,
        &RunConfig {
            delivery: DeliveryPolicy::FullOverlap,
            ..base
        },
    );
    let end_recvs = recv_lines(&end_instant);
    let full_recvs = recv_lines(&full_overlap);
    assert!(end_recvs.len() > full_recvs.len());
    // Every full-overlap delivery is also an end-instant delivery.
    for line in &full_recvs {
        assert!(end_recvs.contains(line));
    }
}

#[test]
fn each_node_transmits_exactly_once_per_frame() {
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 3, 2, 1, 1);
    let t = Topology::clique(3);
    let out = run(
        &p,
        &t,
        &DriftPolicy::Perfect,
        &RunConfig {
            horizon_frames: 10,
            ..RunConfig::default()
        },
    );
    let mut begins = vec![0u32; 3];
    let mut ends = vec![0u32; 3];
    for rec in out.trace.records() {
        if let TraceRecord::Transition { node, label, .. } = rec {
            match label {
                TraceLabel::TxBegin => begins[*node] += 1,
                TraceLabel::TxEnd => ends[*node] += 1,
                _ => {}
            }
        }
    }
    assert_eq!(begins, vec![10, 10, 10]);
    assert_eq!(ends, vec![10, 10, 10]);
}

#[test]
fn offset_decisions_are_recorded_every_frame() {
    let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1);
    let t = Topology::clique(3);
    let out = run(
        &p,
        &t,
        &DriftPolicy::Perfect,
        &RunConfig {
            horizon_frames: 7,
            ..RunConfig::default()
        },
    );
    let offsets = out
        .trace
        .records()
        .iter()
        .filter(|r| matches!(r, TraceRecord::Offset { .. }))
        .count();
    assert_eq!(offsets, 3 * 7);
}

#[test]
fn initial_phase_offsets_are_honored_and_bounded_checked() {
    let p = ProtocolParams::uniform(2, 10, 2, vec![0, 1], 29, 2, 0, 1, 1);
    let t = Topology::clique(2);
    let config = RunConfig {
        horizon_frames: 2,
        initial_phase: vec![0, 3],
        monitors: MonitorSet::none(),
        ..RunConfig::default()
    };
    let out = run(&p, &t, &DriftPolicy::Perfect, &config);
    // A 3-tick head start never fully corrects within two frames.
    assert!(out.stats.max_phase_spread >= 2);

    let bad = RunConfig {
        initial_phase: vec![1],
        ..config
    };
    assert!(run_simulation(&p, &t, &DriftPolicy::Perfect, &bad).is_err());
}
