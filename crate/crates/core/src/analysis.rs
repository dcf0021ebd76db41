//! Topology intelligence and experiment orchestration: community detection,
//! the effective synchronization graph, and scenario sweeps.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::engine::{run_simulation, DriftPolicy, RunConfig, RunVerdict};
use crate::explorer::{explore, ExploreConfig, ExploreVerdict};
use crate::monitors::InvariantId;
use crate::params::{NodeId, ProtocolParams};
use crate::topology::Topology;

/// A node subset in which every member has strictly more neighbors inside
/// the subset than outside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Community {
    pub members: BTreeSet<NodeId>,
}

impl Community {
    fn from_mask(mask: u32) -> Self {
        let members = (0..32).filter(|&i| mask & (1 << i) != 0).collect();
        Self { members }
    }
}

/// Independent check of the community predicate for one subset.
pub fn is_community(t: &Topology, members: &BTreeSet<NodeId>) -> bool {
    if members.is_empty() {
        return false;
    }
    members.iter().all(|&i| {
        let inside = t.neighbors(i).iter().filter(|j| members.contains(j)).count();
        let outside = t.degree(i) - inside;
        inside > outside
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    /// Exhaustive subset search is limited to small networks.
    SizeOverBudget { n_nodes: usize, limit: usize },
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::SizeOverBudget { n_nodes, limit } => write!(
                f,
                "exhaustive community search limited to {limit} nodes, got {n_nodes}"
            ),
        }
    }
}

const COMMUNITY_SEARCH_LIMIT: usize = 16;

/// Exhaustively searches for two disjoint communities. Returns the first
/// pair found in a deterministic enumeration order (subsets ordered by
/// size, then by bitmask), or `None` when no such pair exists.
pub fn find_disjoint_communities(
    t: &Topology,
) -> Result<Option<(Community, Community)>, AnalysisError> {
    let n = t.n_nodes();
    if n > COMMUNITY_SEARCH_LIMIT {
        return Err(AnalysisError::SizeOverBudget {
            n_nodes: n,
            limit: COMMUNITY_SEARCH_LIMIT,
        });
    }

    let mut communities: Vec<u32> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let members: BTreeSet<NodeId> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        if is_community(t, &members) {
            communities.push(mask);
        }
    }
    communities.sort_by_key(|m| (m.count_ones(), *m));

    for (i, &a) in communities.iter().enumerate() {
        for &b in &communities[i + 1..] {
            if (a.count_ones() + b.count_ones()) as usize > n {
                break;
            }
            if a & b == 0 {
                return Ok(Some((Community::from_mask(a), Community::from_mask(b))));
            }
        }
    }
    Ok(None)
}

/// Directed graph of whose message can influence whose clock correction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncGraph {
    /// `influences[i]`: nodes whose messages can contribute to node `i`'s
    /// offset, ascending.
    pub influences: Vec<Vec<NodeId>>,
    /// Weakly-connected components, each ascending, ordered by smallest
    /// member. Two or more components predict desynchronization
    /// susceptibility.
    pub components: Vec<Vec<NodeId>>,
}

/// Computes the effective synchronization graph under a static allocation
/// with no message loss. A node hearing one or two messages per frame
/// corrects on the first of them, so only the neighbor earliest in its
/// listening schedule contributes; listening covers the slots before the
/// node's own TX slot and the active slots after it, in slot order, so the
/// first heard neighbor is the one with the smallest TX slot (ties broken
/// by node id, mirroring the delivery order of simultaneous transmissions).
/// A node hearing three or more corrects on the median, to which every
/// neighbor contributes.
pub fn effective_sync_graph(p: &ProtocolParams, t: &Topology) -> SyncGraph {
    let n = t.n_nodes();
    let mut influences: Vec<Vec<NodeId>> = Vec::with_capacity(n);
    for i in 0..n {
        let neighbors = t.neighbors(i);
        let sources = match neighbors.len() {
            0 => Vec::new(),
            1 | 2 => {
                let first = neighbors
                    .iter()
                    .copied()
                    .min_by_key(|&j| (p.tx_slot[j], j))
                    .expect("nonempty");
                vec![first]
            }
            _ => neighbors,
        };
        influences.push(sources);
    }

    // Weak connectivity over the influence edges.
    let mut component_of: Vec<Option<usize>> = vec![None; n];
    let mut components: Vec<Vec<NodeId>> = Vec::new();
    for start in 0..n {
        if component_of[start].is_some() {
            continue;
        }
        let id = components.len();
        let mut stack = vec![start];
        let mut members = Vec::new();
        component_of[start] = Some(id);
        while let Some(u) = stack.pop() {
            members.push(u);
            let mut linked: Vec<NodeId> = influences[u].clone();
            for (v, sources) in influences.iter().enumerate() {
                if sources.contains(&u) {
                    linked.push(v);
                }
            }
            for v in linked {
                if component_of[v].is_none() {
                    component_of[v] = Some(id);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }

    SyncGraph {
        influences,
        components,
    }
}

/// Expected outcome of a sweep scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedOutcome {
    Ok,
    AnyViolation,
    Invariant(InvariantId),
}

/// Which checkers a sweep scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Simulate,
    /// Simulation plus bounded exploration to the given instant depth.
    SimulateAndExplore { depth: u64 },
}

/// One sweep entry: a fully specified run plus an optional expectation.
#[derive(Debug, Clone)]
pub struct SweepScenario {
    pub name: String,
    pub params: ProtocolParams,
    pub topology: Topology,
    pub policy: DriftPolicy,
    pub config: RunConfig,
    pub mode: SweepMode,
    pub expected: Option<ExpectedOutcome>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepVerdict {
    Ok,
    Violation(InvariantId),
    Aborted,
    ConfigError(String),
}

impl fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepVerdict::Ok => write!(f, "OK"),
            SweepVerdict::Violation(id) => write!(f, "{id}"),
            SweepVerdict::Aborted => write!(f, "ABORT"),
            SweepVerdict::ConfigError(_) => write!(f, "ERROR"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepRow {
    pub name: String,
    pub verdict: SweepVerdict,
    /// Node-0 frame index of the violation, when there is one.
    pub frames_to_violation: Option<u64>,
    pub max_phase_spread: u64,
    /// Comparison against the expectation, when one was given.
    pub matched: Option<bool>,
}

impl SweepRow {
    /// A row counts as a mismatch when it contradicts its expectation or
    /// failed to run at all.
    pub fn is_mismatch(&self) -> bool {
        self.matched == Some(false) || matches!(self.verdict, SweepVerdict::ConfigError(_))
    }

    /// `name,verdict,frames-to-violation-or-OK,max-spread`
    pub fn to_csv_line(&self) -> String {
        let frames = match (&self.verdict, self.frames_to_violation) {
            (SweepVerdict::Ok, _) => String::from("OK"),
            (_, Some(frame)) => format!("{frame}"),
            (_, None) => String::from("-"),
        };
        format!(
            "{},{},{},{}",
            self.name, self.verdict, frames, self.max_phase_spread
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Scenarios whose outcome contradicted their expectation (config
    /// errors always count as mismatches).
    pub mismatches: usize,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }
}

fn matches_expectation(verdict: &SweepVerdict, expected: ExpectedOutcome) -> bool {
    match (expected, verdict) {
        (ExpectedOutcome::Ok, SweepVerdict::Ok) => true,
        (ExpectedOutcome::AnyViolation, SweepVerdict::Violation(_)) => true,
        (ExpectedOutcome::Invariant(want), SweepVerdict::Violation(got)) => want == *got,
        _ => false,
    }
}

/// Runs every scenario (engine, plus the explorer when requested) and
/// tabulates verdicts against expectations. Scenarios are independent;
/// callers may partition them across threads and reassemble rows by index.
pub fn run_sweep(scenarios: &[SweepScenario]) -> SweepResult {
    let rows: Vec<SweepRow> = scenarios.iter().map(run_one).collect();
    let mismatches = rows.iter().filter(|r| r.is_mismatch()).count();
    SweepResult { rows, mismatches }
}

fn run_one(scenario: &SweepScenario) -> SweepRow {
    let outcome = match run_simulation(
        &scenario.params,
        &scenario.topology,
        &scenario.policy,
        &scenario.config,
    ) {
        Ok(outcome) => outcome,
        Err(e) => {
            return SweepRow {
                name: scenario.name.clone(),
                verdict: SweepVerdict::ConfigError(format!("{e}")),
                frames_to_violation: None,
                max_phase_spread: 0,
                matched: None,
            };
        }
    };

    let mut verdict = match &outcome.verdict {
        RunVerdict::Ok => SweepVerdict::Ok,
        RunVerdict::Violation(v) => SweepVerdict::Violation(v.invariant),
        RunVerdict::Aborted { .. } => SweepVerdict::Aborted,
    };
    let mut frames = outcome.stats.frame_of_violation;

    if let SweepMode::SimulateAndExplore { depth } = scenario.mode {
        if matches!(verdict, SweepVerdict::Ok) {
            let explored = explore(
                &scenario.params,
                &scenario.topology,
                &ExploreConfig {
                    max_depth: depth,
                    monitors: scenario.config.monitors,
                    ..ExploreConfig::default()
                },
            );
            match explored.verdict {
                ExploreVerdict::Violation { violation, .. } => {
                    verdict = SweepVerdict::Violation(violation.invariant);
                    frames = None;
                }
                ExploreVerdict::Aborted { .. } => verdict = SweepVerdict::Aborted,
                ExploreVerdict::ExhaustedOk { .. } | ExploreVerdict::Inconclusive { .. } => {}
            }
        }
    }

    let matched = scenario
        .expected
        .map(|expected| matches_expectation(&verdict, expected));

    SweepRow {
        name: scenario.name.clone(),
        verdict,
        frames_to_violation: frames,
        max_phase_spread: outcome.stats.max_phase_spread,
        matched,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::monitors::MonitorSet;

    /// Two triangles joined by one edge between nodes 2 and 3.
    pub(crate) fn two_triangles() -> Topology {
        Topology::from_edges(
            6,
            [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5), (2, 3)],
        )
        .unwrap()
    }

    #[test]
    fn triangle_has_no_disjoint_communities() {
        let t = Topology::clique(3);
        // Brute-force cross-check: no proper nonempty subset is a community.
        for mask in 1u32..7 {
            let members: BTreeSet<NodeId> =
                (0..3).filter(|&i| mask & (1 << i) != 0).collect();
            assert!(!is_community(&t, &members), "mask {mask:#b}");
        }
        assert_eq!(find_disjoint_communities(&t).unwrap(), None);
    }

    #[test]
    fn whole_clique_is_a_community_but_has_no_partner() {
        let t = Topology::clique(3);
        let all: BTreeSet<NodeId> = (0..3).collect();
        assert!(is_community(&t, &all));
    }

    #[test]
    fn two_isolated_edges_form_disjoint_communities() {
        let t = Topology::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let (a, b) = find_disjoint_communities(&t).unwrap().expect("pair");
        assert!(is_community(&t, &a.members));
        assert!(is_community(&t, &b.members));
        let union: BTreeSet<NodeId> = a.members.union(&b.members).copied().collect();
        assert_eq!(union.len(), a.members.len() + b.members.len());
    }

    #[test]
    fn bridged_triangles_split_into_the_triangles() {
        let t = two_triangles();
        let (a, b) = find_disjoint_communities(&t).unwrap().expect("pair");
        let left: BTreeSet<NodeId> = [0, 1, 2].into_iter().collect();
        let right: BTreeSet<NodeId> = [3, 4, 5].into_iter().collect();
        assert_eq!(
            (a.members.clone(), b.members.clone()),
            (left, right),
            "smallest pair should be the two triangles"
        );
    }

    #[test]
    fn oversized_search_is_refused() {
        let t = Topology::clique(17);
        assert_eq!(
            find_disjoint_communities(&t),
            Err(AnalysisError::SizeOverBudget {
                n_nodes: 17,
                limit: 16
            })
        );
    }

    #[test]
    fn partitioned_line_sync_graph() {
        // Line 0-1-2-3 transmitting in slots 1, 2, 3, 1: the ends hear only
        // their inner neighbor, the inner nodes hear the slot-1 end first.
        let p = ProtocolParams::uniform(4, 10, 4, vec![1, 2, 3, 1], 29, 3, 0, 99, 100);
        let t = Topology::line(4);
        let g = effective_sync_graph(&p, &t);
        assert_eq!(g.influences, vec![vec![1], vec![0], vec![3], vec![2]]);
        assert_eq!(g.components, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn clique_of_three_is_one_component() {
        let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1);
        let t = Topology::clique(3);
        let g = effective_sync_graph(&p, &t);
        assert_eq!(g.influences, vec![vec![1], vec![0], vec![0]]);
        assert_eq!(g.components.len(), 1);
    }

    #[test]
    fn high_degree_nodes_hear_everyone() {
        let p = ProtocolParams::uniform(4, 10, 4, vec![0, 1, 2, 3], 29, 3, 0, 1, 1);
        let t = Topology::clique(4);
        let g = effective_sync_graph(&p, &t);
        for i in 0..4 {
            assert_eq!(g.influences[i], t.neighbors(i));
        }
        assert_eq!(g.components.len(), 1);
    }

    #[test]
    fn component_count_is_invariant_under_relabeling() {
        use crate::rng::SplitMix64;
        let base_p = ProtocolParams::uniform(4, 10, 4, vec![1, 2, 3, 1], 29, 3, 0, 99, 100);
        let base_t = Topology::line(4);
        let base = effective_sync_graph(&base_p, &base_t).components.len();

        let mut rng = SplitMix64::new(31);
        for _ in 0..20 {
            // Random permutation of node ids.
            let mut perm: Vec<NodeId> = (0..4).collect();
            for i in (1..4).rev() {
                let j = rng.below(i as u64 + 1) as usize;
                perm.swap(i, j);
            }
            let edges: Vec<(NodeId, NodeId)> = base_t
                .edges()
                .map(|(a, b)| (perm[a], perm[b]))
                .collect();
            let t = Topology::from_edges(4, edges).unwrap();
            let mut p = base_p.clone();
            for (old, &new) in perm.iter().enumerate() {
                p.tx_slot[new] = base_p.tx_slot[old];
            }
            assert_eq!(effective_sync_graph(&p, &t).components.len(), base);
        }
    }

    #[test]
    fn empty_sweep_is_empty_and_clean() {
        let result = run_sweep(&[]);
        assert!(result.rows.is_empty());
        assert_eq!(result.mismatches, 0);
        assert_eq!(result.to_csv(), "");
    }

    #[test]
    fn sweep_checks_expectations() {
        let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1);
        let t = Topology::clique(3);
        let ok = SweepScenario {
            name: String::from("clean"),
            params: p.clone(),
            topology: t.clone(),
            policy: DriftPolicy::Perfect,
            config: RunConfig {
                horizon_frames: 5,
                record_trace: false,
                ..RunConfig::default()
            },
            mode: SweepMode::Simulate,
            expected: Some(ExpectedOutcome::Ok),
        };
        let mut broken = ok.clone();
        broken.name = String::from("slow-switch");
        broken.params.guard = 3;
        broken.params.switch_time = 5;
        broken.expected = Some(ExpectedOutcome::Ok); // deliberately wrong

        let result = run_sweep(&[ok, broken]);
        assert_eq!(result.rows.len(), 2);
        assert_eq!(result.rows[0].matched, Some(true));
        assert_eq!(result.rows[0].to_csv_line(), "clean,OK,OK,0");
        assert_eq!(result.rows[1].matched, Some(false));
        assert_eq!(
            result.rows[1].verdict,
            SweepVerdict::Violation(InvariantId::Inv1)
        );
        assert_eq!(result.mismatches, 1);
    }

    #[test]
    fn sweep_runs_the_explorer_when_asked() {
        let p = ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, 2, 0, 1, 1);
        let t = Topology::clique(3);
        let scenario = SweepScenario {
            name: String::from("explored"),
            params: p,
            topology: t,
            policy: DriftPolicy::Perfect,
            config: RunConfig {
                horizon_frames: 2,
                record_trace: false,
                monitors: MonitorSet::all(),
                ..RunConfig::default()
            },
            mode: SweepMode::SimulateAndExplore { depth: 300 },
            expected: Some(ExpectedOutcome::Ok),
        };
        let result = run_sweep(&[scenario]);
        assert_eq!(result.rows[0].matched, Some(true));
    }
}
