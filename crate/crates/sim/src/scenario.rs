//! Line-oriented scenario files.
//!
//! A scenario fully describes one run: parameters, topology, clock policy,
//! horizon, and an optional expected outcome. The format is `key = value`
//! lines under `[nodes]`, `[topology]`, `[clocks]`, and `[run]` sections,
//! with `#` comments. Example:
//!
//! ```text
//! [nodes]
//! count = 3
//! slots_per_frame = 10
//! active_slots = 3
//! ticks_per_slot = 29
//! guard = 2
//! switch_time = 0
//! tx_slots = 0, 1, 2
//!
//! [topology]
//! kind = clique
//!
//! [clocks]
//! tick_min = 1
//! tick_max = 1
//! policy = perfect
//!
//! [run]
//! horizon_frames = 100
//! expect = ok
//! ```

use std::fmt;

use gmac_core::analysis::{ExpectedOutcome, SweepMode, SweepScenario};
use gmac_core::monitors::{InvariantId, MonitorSet};
use gmac_core::{
    validate_params, validate_slot_allocation, DeliveryPolicy, DriftPolicy, ProtocolParams,
    Topology,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ProtocolParams,
    pub topology: Topology,
    pub policy: DriftPolicy,
    pub initial_phase: Vec<i64>,
    pub horizon_frames: u64,
    pub delivery: DeliveryPolicy,
    pub monitors: MonitorSet,
    pub expect: Option<ExpectedOutcome>,
    pub trace_limit: Option<usize>,
    /// Instant depth for the explorer leg of a sweep.
    pub explore_depth: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    /// 1-based line of the offending entry; 0 for whole-file problems.
    pub line: usize,
    pub message: String,
}

impl ScenarioError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "scenario: {}", self.message)
        } else {
            write!(f, "scenario line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Nodes,
    Topology,
    Clocks,
    Run,
}

#[derive(Default)]
struct Builder {
    count: Option<usize>,
    slots_per_frame: Option<u32>,
    active_slots: Option<u32>,
    ticks_per_slot: Option<u32>,
    guard: Option<u32>,
    switch_time: Option<u32>,
    tx_slots: Option<Vec<u32>>,
    kind: Option<String>,
    edges: Option<(usize, Vec<(usize, usize)>)>,
    tick_min: Option<Vec<u64>>,
    tick_max: Option<Vec<u64>>,
    policy: Option<(usize, String)>,
    initial_phase: Option<Vec<i64>>,
    horizon_frames: Option<u64>,
    delivery: Option<DeliveryPolicy>,
    monitors: Option<MonitorSet>,
    expect: Option<ExpectedOutcome>,
    trace_limit: Option<usize>,
    explore_depth: Option<u64>,
}

fn parse_num<T: core::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ScenarioError> {
    value
        .trim()
        .parse()
        .map_err(|_| ScenarioError::at(line, format!("key `{key}`: cannot parse `{value}`")))
}

fn parse_list<T: core::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<Vec<T>, ScenarioError> {
    value
        .split(',')
        .map(|item| parse_num(line, key, item))
        .collect()
}

/// Scalar values broadcast over all nodes once the node count is known.
fn broadcast<T: Clone>(mut list: Vec<T>, n: usize) -> Vec<T> {
    if list.len() == 1 && n > 1 {
        let v = list[0].clone();
        list = vec![v; n];
    }
    list
}

fn parse_edges(line: usize, value: &str) -> Result<Vec<(usize, usize)>, ScenarioError> {
    value
        .split(',')
        .map(|pair| {
            let (a, b) = pair.trim().split_once('-').ok_or_else(|| {
                ScenarioError::at(line, format!("key `edges`: malformed edge `{pair}`"))
            })?;
            Ok((
                parse_num::<usize>(line, "edges", a)?,
                parse_num::<usize>(line, "edges", b)?,
            ))
        })
        .collect()
}

fn parse_policy(line: usize, value: &str, n: usize) -> Result<DriftPolicy, ScenarioError> {
    let value = value.trim();
    if value == "perfect" {
        return Ok(DriftPolicy::Perfect);
    }
    if let Some(rest) = value.strip_prefix("fixed:") {
        let cycles: Vec<u64> = parse_list(line, "policy", rest)?;
        return Ok(DriftPolicy::FixedRate(broadcast(cycles, n)));
    }
    if let Some(rest) = value.strip_prefix("jitter:") {
        return Ok(DriftPolicy::SeededJitter(parse_num(line, "policy", rest)?));
    }
    Err(ScenarioError::at(
        line,
        format!("key `policy`: expected perfect | fixed:<cycles> | jitter:<seed>, got `{value}`"),
    ))
}

fn parse_monitors(line: usize, value: &str) -> Result<MonitorSet, ScenarioError> {
    let value = value.trim();
    if value == "none" {
        return Ok(MonitorSet::none());
    }
    let mut set = MonitorSet::none();
    for item in value.split(',') {
        match item.trim() {
            "inv1" => set.inv1 = true,
            "inv2" => set.inv2 = true,
            other => {
                return Err(ScenarioError::at(
                    line,
                    format!("key `monitors`: unknown monitor `{other}`"),
                ))
            }
        }
    }
    Ok(set)
}

fn parse_expect(line: usize, value: &str) -> Result<ExpectedOutcome, ScenarioError> {
    match value.trim() {
        "ok" => Ok(ExpectedOutcome::Ok),
        "violation" => Ok(ExpectedOutcome::AnyViolation),
        "inv1" => Ok(ExpectedOutcome::Invariant(InvariantId::Inv1)),
        "inv2" => Ok(ExpectedOutcome::Invariant(InvariantId::Inv2)),
        other => Err(ScenarioError::at(
            line,
            format!("key `expect`: expected ok | violation | inv1 | inv2, got `{other}`"),
        )),
    }
}

/// Parses and fully validates a scenario.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut section = Section::None;
    let mut b = Builder::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ScenarioError::at(line, "unterminated section header"))?;
            section = match name {
                "nodes" => Section::Nodes,
                "topology" => Section::Topology,
                "clocks" => Section::Clocks,
                "run" => Section::Run,
                other => {
                    return Err(ScenarioError::at(line, format!("unknown section `{other}`")))
                }
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ScenarioError::at(line, format!("expected `key = value`: `{content}`")))?;
        let key = key.trim();
        let value = value.trim();

        match (section, key) {
            (Section::Nodes, "count") => b.count = Some(parse_num(line, key, value)?),
            (Section::Nodes, "slots_per_frame") => {
                b.slots_per_frame = Some(parse_num(line, key, value)?)
            }
            (Section::Nodes, "active_slots") => {
                b.active_slots = Some(parse_num(line, key, value)?)
            }
            (Section::Nodes, "ticks_per_slot") => {
                b.ticks_per_slot = Some(parse_num(line, key, value)?)
            }
            (Section::Nodes, "guard") => b.guard = Some(parse_num(line, key, value)?),
            (Section::Nodes, "switch_time") => b.switch_time = Some(parse_num(line, key, value)?),
            (Section::Nodes, "tx_slots") => b.tx_slots = Some(parse_list(line, key, value)?),
            (Section::Topology, "kind") => b.kind = Some(value.to_string()),
            (Section::Topology, "edges") => b.edges = Some((line, parse_edges(line, value)?)),
            (Section::Clocks, "tick_min") => b.tick_min = Some(parse_list(line, key, value)?),
            (Section::Clocks, "tick_max") => b.tick_max = Some(parse_list(line, key, value)?),
            (Section::Clocks, "policy") => b.policy = Some((line, value.to_string())),
            (Section::Clocks, "initial_phase") => {
                b.initial_phase = Some(parse_list(line, key, value)?)
            }
            (Section::Run, "horizon_frames") => {
                b.horizon_frames = Some(parse_num(line, key, value)?)
            }
            (Section::Run, "delivery") => {
                b.delivery = Some(match value {
                    "end-instant" => DeliveryPolicy::EndInstant,
                    "full-overlap" => DeliveryPolicy::FullOverlap,
                    other => {
                        return Err(ScenarioError::at(
                            line,
                            format!(
                                "key `delivery`: expected end-instant | full-overlap, got `{other}`"
                            ),
                        ))
                    }
                })
            }
            (Section::Run, "monitors") => b.monitors = Some(parse_monitors(line, value)?),
            (Section::Run, "expect") => b.expect = Some(parse_expect(line, value)?),
            (Section::Run, "trace_limit") => b.trace_limit = Some(parse_num(line, key, value)?),
            (Section::Run, "explore_depth") => {
                b.explore_depth = Some(parse_num(line, key, value)?)
            }
            (Section::None, _) => {
                return Err(ScenarioError::at(
                    line,
                    format!("key `{key}` before any section header"),
                ))
            }
            (_, other) => {
                return Err(ScenarioError::at(line, format!("unknown key `{other}`")))
            }
        }
    }

    let require = |line: usize, what: &str| ScenarioError::at(line, format!("missing key `{what}`"));
    let count = b.count.ok_or_else(|| require(0, "nodes.count"))?;
    let params = ProtocolParams {
        n_nodes: count,
        slots_per_frame: b
            .slots_per_frame
            .ok_or_else(|| require(0, "nodes.slots_per_frame"))?,
        active_slots: b
            .active_slots
            .ok_or_else(|| require(0, "nodes.active_slots"))?,
        tx_slot: b.tx_slots.ok_or_else(|| require(0, "nodes.tx_slots"))?,
        ticks_per_slot: b
            .ticks_per_slot
            .ok_or_else(|| require(0, "nodes.ticks_per_slot"))?,
        guard: b.guard.ok_or_else(|| require(0, "nodes.guard"))?,
        switch_time: b.switch_time.unwrap_or(0),
        tick_min: broadcast(
            b.tick_min.ok_or_else(|| require(0, "clocks.tick_min"))?,
            count,
        ),
        tick_max: broadcast(
            b.tick_max.ok_or_else(|| require(0, "clocks.tick_max"))?,
            count,
        ),
    };

    let violations = validate_params(&params);
    if !violations.is_empty() {
        let summary: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(ScenarioError::at(0, summary.join("; ")));
    }

    let kind = b.kind.ok_or_else(|| require(0, "topology.kind"))?;
    let topology = match kind.as_str() {
        "clique" => Topology::clique(count),
        "line" => Topology::line(count),
        "edges" => {
            let (line, edges) = b.edges.ok_or_else(|| require(0, "topology.edges"))?;
            Topology::from_edges(count, edges)
                .map_err(|e| ScenarioError::at(line, e.to_string()))?
        }
        other => {
            return Err(ScenarioError::at(
                0,
                format!("topology.kind: expected clique | line | edges, got `{other}`"),
            ))
        }
    };

    let conflicts = validate_slot_allocation(&params, &topology);
    if !conflicts.is_empty() {
        return Err(ScenarioError::at(
            0,
            format!("neighbors share a TX slot: {conflicts:?}"),
        ));
    }

    let policy = match b.policy {
        Some((line, text)) => parse_policy(line, &text, count)?,
        None => DriftPolicy::Perfect,
    };
    let initial_phase = match b.initial_phase {
        Some(list) => {
            let list = broadcast(list, count);
            if list.len() != count {
                return Err(ScenarioError::at(
                    0,
                    format!(
                        "initial_phase has {} entries, expected {count}",
                        list.len()
                    ),
                ));
            }
            list
        }
        None => Vec::new(),
    };

    Ok(Scenario {
        params,
        topology,
        policy,
        initial_phase,
        horizon_frames: b.horizon_frames.unwrap_or(100),
        delivery: b.delivery.unwrap_or_default(),
        monitors: b.monitors.unwrap_or_default(),
        expect: b.expect,
        trace_limit: b.trace_limit,
        explore_depth: b.explore_depth,
    })
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text form; `load_scenario(serialize_scenario(s)) == s`.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let p = &s.params;
    out.push_str("[nodes]\n");
    out.push_str(&format!("count = {}\n", p.n_nodes));
    out.push_str(&format!("slots_per_frame = {}\n", p.slots_per_frame));
    out.push_str(&format!("active_slots = {}\n", p.active_slots));
    out.push_str(&format!("ticks_per_slot = {}\n", p.ticks_per_slot));
    out.push_str(&format!("guard = {}\n", p.guard));
    out.push_str(&format!("switch_time = {}\n", p.switch_time));
    out.push_str(&format!("tx_slots = {}\n", join(p.tx_slot.iter())));
    out.push_str("\n[topology]\nkind = edges\n");
    let edges: Vec<String> = s
        .topology
        .edges()
        .map(|(a, b)| format!("{a}-{b}"))
        .collect();
    out.push_str(&format!("edges = {}\n", edges.join(", ")));
    out.push_str("\n[clocks]\n");
    out.push_str(&format!("tick_min = {}\n", join(p.tick_min.iter())));
    out.push_str(&format!("tick_max = {}\n", join(p.tick_max.iter())));
    match &s.policy {
        DriftPolicy::Perfect => out.push_str("policy = perfect\n"),
        DriftPolicy::FixedRate(cycles) => {
            out.push_str(&format!("policy = fixed: {}\n", join(cycles.iter())))
        }
        DriftPolicy::SeededJitter(seed) => out.push_str(&format!("policy = jitter: {seed}\n")),
        DriftPolicy::Schedule(_) => out.push_str("policy = perfect\n"),
    }
    if !s.initial_phase.is_empty() {
        out.push_str(&format!("initial_phase = {}\n", join(s.initial_phase.iter())));
    }
    out.push_str("\n[run]\n");
    out.push_str(&format!("horizon_frames = {}\n", s.horizon_frames));
    out.push_str(&format!(
        "delivery = {}\n",
        match s.delivery {
            DeliveryPolicy::EndInstant => "end-instant",
            DeliveryPolicy::FullOverlap => "full-overlap",
        }
    ));
    let monitors = match (s.monitors.inv1, s.monitors.inv2) {
        (true, true) => "inv1, inv2".to_string(),
        (true, false) => "inv1".to_string(),
        (false, true) => "inv2".to_string(),
        (false, false) => "none".to_string(),
    };
    out.push_str(&format!("monitors = {monitors}\n"));
    if let Some(expect) = s.expect {
        let text = match expect {
            ExpectedOutcome::Ok => "ok",
            ExpectedOutcome::AnyViolation => "violation",
            ExpectedOutcome::Invariant(InvariantId::Inv1) => "inv1",
            ExpectedOutcome::Invariant(InvariantId::Inv2) => "inv2",
            ExpectedOutcome::Invariant(InvariantId::Inv3) => "violation",
        };
        out.push_str(&format!("expect = {text}\n"));
    }
    if let Some(limit) = s.trace_limit {
        out.push_str(&format!("trace_limit = {limit}\n"));
    }
    if let Some(depth) = s.explore_depth {
        out.push_str(&format!("explore_depth = {depth}\n"));
    }
    out
}

impl Scenario {
    pub fn run_config(&self) -> gmac_core::RunConfig {
        gmac_core::RunConfig {
            horizon_frames: self.horizon_frames,
            delivery: self.delivery,
            monitors: self.monitors,
            initial_phase: self.initial_phase.clone(),
            record_trace: true,
            trace_limit: self.trace_limit.unwrap_or(1 << 20),
        }
    }

    /// Sweep entry; traces stay off for throughput.
    pub fn to_sweep(&self, name: String) -> SweepScenario {
        let mut config = self.run_config();
        config.record_trace = false;
        SweepScenario {
            name,
            params: self.params.clone(),
            topology: self.topology.clone(),
            policy: self.policy.clone(),
            config,
            mode: match self.explore_depth {
                Some(depth) => SweepMode::SimulateAndExplore { depth },
                None => SweepMode::Simulate,
            },
            expected: self.expect,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# reference configuration
[nodes]
count = 3
slots_per_frame = 10
active_slots = 3
ticks_per_slot = 29
guard = 2
switch_time = 0
tx_slots = 0, 1, 2

[topology]
kind = clique

[clocks]
tick_min = 1
tick_max = 1
policy = perfect

[run]
horizon_frames = 100
expect = ok
";

    #[test]
    fn reference_scenario_loads() {
        let s = load_scenario(REFERENCE).unwrap();
        assert_eq!(s.params.n_nodes, 3);
        assert_eq!(s.params.ticks_per_slot, 29);
        assert_eq!(s.topology.edges().count(), 3);
        assert_eq!(s.policy, DriftPolicy::Perfect);
        assert_eq!(s.horizon_frames, 100);
        assert_eq!(s.expect, Some(ExpectedOutcome::Ok));
    }

    #[test]
    fn round_trip_is_identity() {
        let s = load_scenario(REFERENCE).unwrap();
        let text = serialize_scenario(&s);
        let reloaded = load_scenario(&text).unwrap();
        assert_eq!(s, reloaded);
    }

    #[test]
    fn round_trip_with_all_options() {
        let mut s = load_scenario(REFERENCE).unwrap();
        s.policy = DriftPolicy::FixedRate(vec![1, 1, 1]);
        s.initial_phase = vec![0, 2, -1];
        s.delivery = DeliveryPolicy::FullOverlap;
        s.monitors = MonitorSet {
            inv1: true,
            inv2: false,
        };
        s.expect = Some(ExpectedOutcome::Invariant(InvariantId::Inv1));
        s.trace_limit = Some(512);
        s.explore_depth = Some(870);
        let reloaded = load_scenario(&serialize_scenario(&s)).unwrap();
        assert_eq!(s, reloaded);
    }

    #[test]
    fn zero_guard_is_a_constraint_error() {
        let text = REFERENCE.replace("guard = 2", "guard = 0");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.message.contains("0 < g"), "{err}");
    }

    #[test]
    fn reflexive_edge_is_rejected_with_its_line() {
        let text = REFERENCE.replace("kind = clique", "kind = edges\nedges = 0-0");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.message.contains("reflexive"), "{err}");
        assert!(err.line > 0);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = REFERENCE.replace("guard = 2", "guard = 2\nbogus = 1");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.message.contains("unknown key `bogus`"), "{err}");
        assert_eq!(err.line, 8);
    }

    #[test]
    fn conflicting_allocation_is_rejected() {
        let text = REFERENCE.replace("tx_slots = 0, 1, 2", "tx_slots = 0, 0, 1");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.message.contains("share a TX slot"), "{err}");
    }

    #[test]
    fn scalar_clock_bounds_broadcast() {
        let text = REFERENCE
            .replace("tick_min = 1", "tick_min = 99")
            .replace("tick_max = 1", "tick_max = 100")
            .replace("policy = perfect", "policy = fixed: 100, 99, 99");
        let s = load_scenario(&text).unwrap();
        assert_eq!(s.params.tick_min, vec![99, 99, 99]);
        assert_eq!(s.params.tick_max, vec![100, 100, 100]);
        assert_eq!(s.policy, DriftPolicy::FixedRate(vec![100, 99, 99]));
    }

    #[test]
    fn malformed_lines_report_position() {
        let text = REFERENCE.replace("count = 3", "count");
        let err = load_scenario(&text).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("key = value"));
    }
}
