//! Subcommand dispatch: simulate, explore, analyze, sweep.
//!
//! Exit status is the machine contract: 0 for a clean or expected outcome,
//! 1 for a violation or an expectation mismatch, 2 for usage and
//! configuration errors.

use std::fs;
use std::io::Write;
use std::path::Path;

use gmac_core::analysis::{
    effective_sync_graph, find_disjoint_communities, run_sweep, ExpectedOutcome, SweepResult,
    SweepRow, SweepScenario,
};
use gmac_core::explorer::{explore, ExploreConfig, ExploreVerdict};
use gmac_core::{run_simulation, DriftPolicy, RunOutcome, RunVerdict};

use crate::scenario::{load_scenario, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const USAGE: &str = "\
usage:
  gmac-sim simulate --scenario FILE [--trace OUT] [--horizon FRAMES]
  gmac-sim explore  --scenario FILE (--depth INSTANTS | --frames FRAMES) [--trace OUT]
  gmac-sim analyze  --scenario FILE
  gmac-sim sweep    --dir DIR [--threads N]

exit status: 0 ok/expected, 1 violation/unexpected, 2 usage or config error
";

struct Flags {
    scenario: Option<String>,
    trace: Option<String>,
    horizon: Option<u64>,
    depth: Option<u64>,
    frames: Option<u64>,
    dir: Option<String>,
    threads: Option<usize>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        scenario: None,
        trace: None,
        horizon: None,
        depth: None,
        frames: None,
        dir: None,
        threads: None,
    };
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = || {
            it.next()
                .map(String::as_str)
                .ok_or_else(|| format!("flag {flag} needs a value"))
        };
        match flag.as_str() {
            "--scenario" => flags.scenario = Some(value()?.to_string()),
            "--trace" => flags.trace = Some(value()?.to_string()),
            "--horizon" => {
                flags.horizon =
                    Some(value()?.parse().map_err(|_| "bad --horizon".to_string())?)
            }
            "--depth" => {
                flags.depth = Some(value()?.parse().map_err(|_| "bad --depth".to_string())?)
            }
            "--frames" => {
                flags.frames = Some(value()?.parse().map_err(|_| "bad --frames".to_string())?)
            }
            "--dir" => flags.dir = Some(value()?.to_string()),
            "--threads" => {
                flags.threads =
                    Some(value()?.parse().map_err(|_| "bad --threads".to_string())?)
            }
            other => return Err(format!("unknown flag `{other}`")),
        }
    }
    Ok(flags)
}

fn load_scenario_file(path: &str) -> Result<Scenario, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read scenario {path}: {e}"))?;
    load_scenario(&text).map_err(|e| format!("{path}: {e}"))
}

fn write_trace(path: &str, csv: &str) -> Result<(), String> {
    fs::write(path, csv).map_err(|e| format!("cannot write trace {path}: {e}"))
}

/// Maps a run outcome onto the exit code, honoring an expectation when the
/// scenario declares one.
fn outcome_exit(expect: Option<ExpectedOutcome>, verdict: &RunVerdict) -> i32 {
    let matched = match (expect, verdict) {
        (None, v) => v.is_ok(),
        (Some(ExpectedOutcome::Ok), v) => v.is_ok(),
        (Some(ExpectedOutcome::AnyViolation), RunVerdict::Violation(_)) => true,
        (Some(ExpectedOutcome::Invariant(id)), RunVerdict::Violation(v)) => v.invariant == id,
        (Some(_), _) => false,
    };
    if matched {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    }
}

fn print_run_outcome(out: &mut dyn Write, outcome: &RunOutcome) {
    match &outcome.verdict {
        RunVerdict::Ok => {
            let _ = writeln!(out, "verdict: OK");
        }
        RunVerdict::Violation(v) => {
            let _ = writeln!(out, "verdict: VIOLATION");
            let _ = writeln!(out, "violation: {}", v.to_line());
            if let Some(frame) = outcome.stats.frame_of_violation {
                let _ = writeln!(out, "frame_of_violation: {frame}");
            }
        }
        RunVerdict::Aborted { node, time } => {
            let _ = writeln!(
                out,
                "verdict: ABORT (phase buffer overflow at node {node}, time {time})"
            );
        }
    }
    let _ = writeln!(out, "frames_completed: {}", outcome.stats.frames_completed);
    let _ = writeln!(out, "messages_delivered: {}", outcome.stats.messages_delivered);
    let _ = writeln!(out, "max_phase_spread: {}", outcome.stats.max_phase_spread);
    if outcome.stats.oversized_offsets > 0 {
        let _ = writeln!(
            out,
            "diagnostic: {} offsets exceeded half the sleeping period",
            outcome.stats.oversized_offsets
        );
    }
}

fn cmd_simulate(flags: Flags, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(path) = flags.scenario else {
        let _ = writeln!(err, "simulate: --scenario is required");
        return EXIT_USAGE;
    };
    let mut scenario = match load_scenario_file(&path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    if let Some(horizon) = flags.horizon {
        scenario.horizon_frames = horizon;
    }
    let outcome = match run_simulation(
        &scenario.params,
        &scenario.topology,
        &scenario.policy,
        &scenario.run_config(),
    ) {
        Ok(outcome) => outcome,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    print_run_outcome(out, &outcome);
    if let Some(trace_path) = flags.trace {
        if let Err(e) = write_trace(&trace_path, &outcome.trace.to_csv()) {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
        let _ = writeln!(
            out,
            "trace: {trace_path} ({} records, {} dropped)",
            outcome.trace.len(),
            outcome.trace.dropped()
        );
    }
    outcome_exit(scenario.expect, &outcome.verdict)
}

fn cmd_explore(flags: Flags, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(path) = flags.scenario else {
        let _ = writeln!(err, "explore: --scenario is required");
        return EXIT_USAGE;
    };
    let scenario = match load_scenario_file(&path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    let depth = match (flags.depth, flags.frames) {
        (Some(depth), None) => depth,
        (None, Some(frames)) => frames * scenario.params.frame_len(),
        (None, None) => {
            let _ = writeln!(err, "explore: one of --depth or --frames is required");
            return EXIT_USAGE;
        }
        (Some(_), Some(_)) => {
            let _ = writeln!(err, "explore: --depth and --frames are mutually exclusive");
            return EXIT_USAGE;
        }
    };
    let outcome = explore(
        &scenario.params,
        &scenario.topology,
        &ExploreConfig {
            max_depth: depth,
            monitors: scenario.monitors,
            ..ExploreConfig::default()
        },
    );
    let _ = writeln!(out, "states_explored: {}", outcome.states_explored);
    match &outcome.verdict {
        ExploreVerdict::ExhaustedOk { depth } => {
            let _ = writeln!(out, "verdict: EXHAUSTED-OK (depth {depth})");
            match scenario.expect {
                None | Some(ExpectedOutcome::Ok) => EXIT_OK,
                Some(_) => EXIT_VIOLATION,
            }
        }
        ExploreVerdict::Violation { violation, path } => {
            let _ = writeln!(out, "verdict: VIOLATION");
            let _ = writeln!(out, "violation: {}", violation.to_line());
            let _ = writeln!(out, "instants: {}", path.instants);
            if let Some(trace_path) = flags.trace {
                // Replay the path through the engine to export the trace.
                let replay = run_simulation(
                    &scenario.params,
                    &scenario.topology,
                    &DriftPolicy::Schedule(path.schedule.clone()),
                    &scenario.run_config(),
                );
                match replay {
                    Ok(replay) => {
                        if let Err(e) = write_trace(&trace_path, &replay.trace.to_csv()) {
                            let _ = writeln!(err, "{e}");
                            return EXIT_USAGE;
                        }
                        let _ = writeln!(out, "trace: {trace_path}");
                    }
                    Err(e) => {
                        let _ = writeln!(err, "replay failed: {e}");
                        return EXIT_USAGE;
                    }
                }
            }
            let matched = match scenario.expect {
                Some(ExpectedOutcome::AnyViolation) => true,
                Some(ExpectedOutcome::Invariant(id)) => violation.invariant == id,
                _ => false,
            };
            if matched {
                EXIT_OK
            } else {
                EXIT_VIOLATION
            }
        }
        ExploreVerdict::Inconclusive {
            states_explored,
            depth,
        } => {
            let _ = writeln!(
                out,
                "verdict: INCONCLUSIVE (budget exhausted: {states_explored} states, depth {depth})"
            );
            EXIT_VIOLATION
        }
        ExploreVerdict::Aborted { node } => {
            let _ = writeln!(out, "verdict: ABORT (phase buffer overflow at node {node})");
            EXIT_VIOLATION
        }
    }
}

fn format_set(members: impl IntoIterator<Item = usize>) -> String {
    let items: Vec<String> = members.into_iter().map(|m| m.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn cmd_analyze(flags: Flags, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(path) = flags.scenario else {
        let _ = writeln!(err, "analyze: --scenario is required");
        return EXIT_USAGE;
    };
    let scenario = match load_scenario_file(&path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            return EXIT_USAGE;
        }
    };

    match find_disjoint_communities(&scenario.topology) {
        Ok(Some((a, b))) => {
            let _ = writeln!(
                out,
                "communities: {} {}",
                format_set(a.members.iter().copied()),
                format_set(b.members.iter().copied())
            );
        }
        Ok(None) => {
            let _ = writeln!(out, "communities: none");
        }
        Err(e) => {
            let _ = writeln!(out, "communities: skipped ({e})");
        }
    }

    let graph = effective_sync_graph(&scenario.params, &scenario.topology);
    for (node, sources) in graph.influences.iter().enumerate() {
        let _ = writeln!(
            out,
            "influences: {node} <- {}",
            if sources.is_empty() {
                "-".to_string()
            } else {
                sources
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            }
        );
    }
    let components: Vec<String> = graph
        .components
        .iter()
        .map(|c| format_set(c.iter().copied()))
        .collect();
    let _ = writeln!(out, "sync_components: {}", components.join(" "));
    let _ = writeln!(
        out,
        "sync_graph_partitioned: {}",
        if graph.components.len() >= 2 {
            "yes"
        } else {
            "no"
        }
    );
    EXIT_OK
}

/// Runs sweep scenarios across worker threads; rows come back in input
/// order so the table is independent of scheduling.
pub fn run_sweep_parallel(scenarios: &[SweepScenario], threads: usize) -> SweepResult {
    let threads = threads.clamp(1, scenarios.len().max(1));
    if threads <= 1 || scenarios.len() <= 1 {
        return run_sweep(scenarios);
    }
    let mut indexed: Vec<(usize, SweepRow)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|worker| {
                scope.spawn(move || {
                    scenarios
                        .iter()
                        .enumerate()
                        .skip(worker)
                        .step_by(threads)
                        .map(|(index, scenario)| {
                            let mut result = run_sweep(std::slice::from_ref(scenario));
                            (index, result.rows.pop().expect("one row per scenario"))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    indexed.sort_by_key(|(index, _)| *index);
    let rows: Vec<SweepRow> = indexed.into_iter().map(|(_, row)| row).collect();
    let mismatches = rows.iter().filter(|r| r.is_mismatch()).count();
    SweepResult { rows, mismatches }
}

fn cmd_sweep(flags: Flags, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(dir) = flags.dir else {
        let _ = writeln!(err, "sweep: --dir is required");
        return EXIT_USAGE;
    };
    let entries = match fs::read_dir(Path::new(&dir)) {
        Ok(entries) => entries,
        Err(e) => {
            let _ = writeln!(err, "cannot read directory {dir}: {e}");
            return EXIT_USAGE;
        }
    };
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "scn"))
        .collect();
    paths.sort();

    let mut scenarios = Vec::new();
    for path in &paths {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match load_scenario_file(&path.display().to_string()) {
            Ok(s) => scenarios.push(s.to_sweep(name)),
            Err(e) => {
                let _ = writeln!(err, "{e}");
                return EXIT_USAGE;
            }
        }
    }

    let threads = flags
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let result = run_sweep_parallel(&scenarios, threads);
    let _ = writeln!(out, "scenario,verdict,frames_to_violation,max_phase_spread");
    let _ = write!(out, "{}", result.to_csv());
    let _ = writeln!(out, "mismatches: {}", result.mismatches);
    if result.mismatches > 0 {
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}

/// Entry point shared by `main` and the tests.
pub fn run_cli(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(command) = args.first() else {
        let _ = write!(err, "{USAGE}");
        return EXIT_USAGE;
    };
    let flags = match parse_flags(&args[1..]) {
        Ok(flags) => flags,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            let _ = write!(err, "{USAGE}");
            return EXIT_USAGE;
        }
    };
    match command.as_str() {
        "simulate" => cmd_simulate(flags, out, err),
        "explore" => cmd_explore(flags, out, err),
        "analyze" => cmd_analyze(flags, out, err),
        "sweep" => cmd_sweep(flags, out, err),
        other => {
            let _ = writeln!(err, "unknown subcommand `{other}`");
            let _ = write!(err, "{USAGE}");
            EXIT_USAGE
        }
    }
}
