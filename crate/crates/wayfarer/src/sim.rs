//! The sequential decision process: traveler state, transitions, realized
//! and expected net gain, and the episode engine.
//!
//! Policies only ever see a [`PolicyContext`], which exposes topology,
//! covariates, and the traveler's own belief - never the hidden truths.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, GpPosterior, GpPrior};
use crate::error::{Error, Result};
use crate::graph::{GraphInstance, NodeId};

/// `S_t`: current node, visited set, belief (observation sets), step count.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelerState {
    pub current: NodeId,
    pub visited: BTreeSet<NodeId>,
    pub belief: BeliefState,
    pub step: usize,
}

/// Episode configuration knobs.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeConfig {
    /// Condition the reward GP on the start node's (zeroed) reward at t=0.
    /// Off by default: the fixture's nodes 1 and 3 share identical features,
    /// and conditioning on the zeroed start pins node 3's posterior to zero.
    pub observe_start_reward: bool,
    /// Overrides the instance horizon when set.
    pub horizon: Option<usize>,
    /// Include self-loop costs in the cost grand mean (off by default).
    pub cost_mean_with_self_loops: bool,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            observe_start_reward: false,
            horizon: None,
            cost_mean_with_self_loops: false,
        }
    }
}

impl TravelerState {
    /// Initial state at the instance's start node with grand-mean priors.
    pub fn initial(inst: &GraphInstance, cfg: &EpisodeConfig) -> Result<Self> {
        let cost_mean = if cfg.cost_mean_with_self_loops {
            inst.cost_mean_with_self_loops()
        } else {
            inst.prior_means.cost
        };
        let mut belief = BeliefState::new(
            GpPrior::new(cost_mean),
            GpPrior::new(inst.prior_means.reward),
        );
        let mut visited = BTreeSet::new();
        visited.insert(inst.start);
        if cfg.observe_start_reward {
            let node = inst.node(inst.start)?;
            belief.reward.obs.insert(&node.features, node.true_reward)?;
        }
        Ok(TravelerState {
            current: inst.start,
            visited,
            belief,
            step: 0,
        })
    }
}

/// Net gain actually realized by moving to `j`, from the hidden truths:
/// reward minus cost for a first visit, cost only for a revisit, zero for
/// the self-loop.
pub fn realized_net_gain(inst: &GraphInstance, state: &TravelerState, j: NodeId) -> Result<f64> {
    if j == state.current {
        return Ok(0.0);
    }
    if !inst.is_adjacent(state.current, j) {
        return Err(Error::NotAdjacent {
            from: state.current,
            to: j,
        });
    }
    let cost = inst.edge(state.current, j)?.true_cost;
    if state.visited.contains(&j) {
        Ok(-cost)
    } else {
        Ok(inst.node(j)?.true_reward - cost)
    }
}

/// Applies decision `j`: moves the traveler, extends the visited set, and
/// appends the newly observed (feature, value) pairs, if any.
pub fn transition(inst: &GraphInstance, state: &TravelerState, j: NodeId) -> Result<TravelerState> {
    if j != state.current && !inst.is_adjacent(state.current, j) {
        return Err(Error::NotAdjacent {
            from: state.current,
            to: j,
        });
    }
    let mut next = state.clone();
    next.step += 1;
    if j == state.current {
        return Ok(next);
    }
    let edge = inst.edge(state.current, j)?;
    next.belief.cost.obs.insert(&edge.features, edge.true_cost)?;
    if !state.visited.contains(&j) {
        let node = inst.node(j)?;
        next.belief.reward.obs.insert(&node.features, node.true_reward)?;
        next.visited.insert(j);
    }
    next.current = j;
    Ok(next)
}

/// Read-only decision-epoch view handed to policies: topology, covariates,
/// and factored posteriors. Hidden truths are unreachable through this type.
pub struct PolicyContext<'a> {
    inst: &'a GraphInstance,
    state: &'a TravelerState,
    cost_post: GpPosterior<'a>,
    reward_post: GpPosterior<'a>,
}

impl<'a> PolicyContext<'a> {
    pub fn new(inst: &'a GraphInstance, state: &'a TravelerState) -> Result<Self> {
        Ok(PolicyContext {
            inst,
            state,
            cost_post: GpPosterior::new(&state.belief.cost.prior, &state.belief.cost.obs)?,
            reward_post: GpPosterior::new(&state.belief.reward.prior, &state.belief.reward.obs)?,
        })
    }

    pub fn current(&self) -> NodeId {
        self.state.current
    }

    pub fn step(&self) -> usize {
        self.state.step
    }

    pub fn start(&self) -> NodeId {
        self.inst.start
    }

    pub fn node_count(&self) -> usize {
        self.inst.node_count()
    }

    pub fn non_self_edge_count(&self) -> usize {
        self.inst.non_self_edge_count()
    }

    pub fn is_visited(&self, j: NodeId) -> bool {
        self.state.visited.contains(&j)
    }

    pub fn visited(&self) -> &BTreeSet<NodeId> {
        &self.state.visited
    }

    /// Neighbors of `i` including `i` itself.
    pub fn neighbors(&self, i: NodeId) -> Result<&[NodeId]> {
        self.inst.neighbors(i)
    }

    pub fn is_adjacent(&self, i: NodeId, j: NodeId) -> bool {
        self.inst.is_adjacent(i, j)
    }

    pub fn node_features(&self, i: NodeId) -> Result<&[f64]> {
        Ok(&self.inst.node(i)?.features)
    }

    pub fn edge_features(&self, i: NodeId, j: NodeId) -> Result<&[f64]> {
        Ok(&self.inst.edge(i, j)?.features)
    }

    /// Whether the edge's (feature, value) pair is in the cost set.
    pub fn edge_observed(&self, i: NodeId, j: NodeId) -> Result<bool> {
        Ok(self.state.belief.cost.obs.contains(&self.inst.edge(i, j)?.features))
    }

    /// Whether the node's (feature, value) pair is in the reward set.
    pub fn node_observed(&self, j: NodeId) -> Result<bool> {
        Ok(self.state.belief.reward.obs.contains(&self.inst.node(j)?.features))
    }

    pub fn reward_mean(&self, j: NodeId) -> Result<f64> {
        Ok(self.reward_post.mean(&self.inst.node(j)?.features))
    }

    pub fn cost_mean(&self, i: NodeId, j: NodeId) -> Result<f64> {
        Ok(self.cost_post.mean(&self.inst.edge(i, j)?.features))
    }

    pub fn cost_posterior(&self) -> &GpPosterior<'a> {
        &self.cost_post
    }

    pub fn reward_posterior(&self) -> &GpPosterior<'a> {
        &self.reward_post
    }

    /// Posterior expectation of the net gain of moving to `j`.
    pub fn expected_net_gain(&self, j: NodeId) -> Result<f64> {
        if j == self.state.current {
            return Ok(0.0);
        }
        if !self.inst.is_adjacent(self.state.current, j) {
            return Err(Error::NotAdjacent {
                from: self.state.current,
                to: j,
            });
        }
        let cost = self.cost_mean(self.state.current, j)?;
        if self.state.visited.contains(&j) {
            Ok(-cost)
        } else {
            Ok(self.reward_mean(j)? - cost)
        }
    }

    /// Posterior variance of the net gain: the reward and cost terms enter
    /// according to whether their (feature, value) pairs are already stored.
    pub fn net_gain_variance(&self, j: NodeId) -> Result<f64> {
        if j == self.state.current {
            return Ok(0.0);
        }
        if !self.inst.is_adjacent(self.state.current, j) {
            return Err(Error::NotAdjacent {
                from: self.state.current,
                to: j,
            });
        }
        let edge_known = self.edge_observed(self.state.current, j)?;
        let node_known = self.node_observed(j)? || self.state.visited.contains(&j);
        let mut var = 0.0;
        if !edge_known {
            let (_, v) = self
                .cost_post
                .mean_var(&self.inst.edge(self.state.current, j)?.features);
            var += v;
        }
        if !node_known {
            let (_, v) = self.reward_post.mean_var(&self.inst.node(j)?.features);
            var += v;
        }
        Ok(var)
    }
}

/// A single decision rule driving episodes.
pub trait Policy {
    fn decide(&mut self, ctx: &PolicyContext) -> Result<NodeId>;
    fn descriptor(&self) -> String;
    fn seed(&self) -> u64 {
        0
    }
}

/// Replays a fixed node sequence, then stays put.
pub struct ScriptedPolicy {
    walk: Vec<NodeId>,
    next: usize,
}

impl ScriptedPolicy {
    /// `walk` includes the start node as its first entry.
    pub fn new(walk: &[usize]) -> Self {
        ScriptedPolicy {
            walk: walk.iter().map(|&i| NodeId(i)).collect(),
            next: 1,
        }
    }
}

impl Policy for ScriptedPolicy {
    fn decide(&mut self, ctx: &PolicyContext) -> Result<NodeId> {
        match self.walk.get(self.next) {
            Some(&j) => {
                self.next += 1;
                Ok(j)
            }
            None => Ok(ctx.current()),
        }
    }

    fn descriptor(&self) -> String {
        format!(
            "scripted:{}",
            self.walk
                .iter()
                .map(|n| n.0.to_string())
                .collect::<Vec<_>>()
                .join("-")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub from: NodeId,
    pub to: NodeId,
    pub realized_gain: f64,
    /// Present only when the edge was newly observed at this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_cost: Option<f64>,
    /// Present only when the node was newly observed at this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub instance_hash: String,
    pub policy: String,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

impl EpisodeLog {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    /// Node sequence of the walk, starting at the start node. Terminal
    /// self-loops are dropped.
    pub fn walk(&self, start: NodeId) -> Vec<NodeId> {
        let mut walk = vec![start];
        for rec in &self.records {
            if rec.to != rec.from {
                walk.push(rec.to);
            }
        }
        walk
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }

    /// One-line CSV summary: instance id, policy, seed, steps, total.
    pub fn csv_summary(&self) -> String {
        format!(
            "{},{},{},{},{:.6}",
            self.instance_hash,
            self.policy,
            self.seed,
            self.steps(),
            self.total
        )
    }
}

/// Runs one full episode. The start node enters the visited set at t=0 and
/// (when configured) its reward conditions the belief. The episode ends at
/// the first self-loop decision or when the horizon is exhausted. A policy
/// returning a non-adjacent node aborts the episode with a fault record.
pub fn run_episode(
    inst: &GraphInstance,
    policy: &mut dyn Policy,
    cfg: &EpisodeConfig,
) -> Result<EpisodeLog> {
    let horizon = cfg.horizon.unwrap_or(inst.horizon);
    if horizon == 0 {
        return Err(Error::Validation("horizon: must be positive".into()));
    }
    let mut state = TravelerState::initial(inst, cfg)?;
    let mut log = EpisodeLog {
        instance_hash: inst.hash_hex(),
        policy: policy.descriptor(),
        seed: policy.seed(),
        records: Vec::new(),
        total: 0.0,
        fault: None,
    };
    for t in 0..horizon {
        let j = {
            let ctx = PolicyContext::new(inst, &state)?;
            policy.decide(&ctx)?
        };
        if j != state.current && !inst.is_adjacent(state.current, j) {
            log.fault = Some(
                Error::PolicyFault {
                    from: state.current,
                    to: j,
                    step: t,
                }
                .to_string(),
            );
            return Ok(log);
        }
        let gain = realized_net_gain(inst, &state, j)?;
        let edge_new = j != state.current && !state.belief.cost.obs.contains(&inst.edge(state.current, j)?.features);
        let node_new = j != state.current
            && !state.visited.contains(&j)
            && !state.belief.reward.obs.contains(&inst.node(j)?.features);
        log.records.push(StepRecord {
            t,
            from: state.current,
            to: j,
            realized_gain: gain,
            observed_cost: edge_new.then(|| inst.edge(state.current, j).unwrap().true_cost),
            observed_reward: node_new.then(|| inst.node(j).unwrap().true_reward),
        });
        log.total += gain;
        if j == state.current {
            break;
        }
        state = transition(inst, &state, j)?;
    }
    Ok(log)
}

/// Set-based recomputation of the episode total from the truths: rewards of
/// distinct visited nodes (excluding the start) minus the cost of every
/// traversal. Must agree with the incremental sum to 1e-9.
pub fn total_contribution(inst: &GraphInstance, log: &EpisodeLog) -> Result<f64> {
    let mut visited: BTreeSet<NodeId> = BTreeSet::new();
    let mut cost_sum = 0.0;
    for rec in &log.records {
        if rec.to == rec.from {
            continue;
        }
        cost_sum += inst.edge(rec.from, rec.to)?.true_cost;
        if rec.to != inst.start {
            visited.insert(rec.to);
        }
    }
    let reward_sum: f64 = visited
        .iter()
        .map(|&j| inst.node(j).map(|n| n.true_reward))
        .sum::<Result<f64>>()?;
    Ok(reward_sum - cost_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_fixture_illustrative;
    use approx::assert_abs_diff_eq;

    fn fixture_state() -> (GraphInstance, TravelerState) {
        let inst = build_fixture_illustrative();
        let state = TravelerState::initial(&inst, &EpisodeConfig::default()).unwrap();
        (inst, state)
    }

    #[test]
    fn realized_gain_cases() {
        let (inst, state) = fixture_state();
        // First move 1 -> 5 (ids 0 -> 4): 61.36 - 5.38.
        assert_abs_diff_eq!(
            realized_net_gain(&inst, &state, NodeId(4)).unwrap(),
            55.98,
            epsilon = 0.01
        );
        assert_eq!(realized_net_gain(&inst, &state, NodeId(0)).unwrap(), 0.0);
        // Revisit of the start along edge (1,2) costs 3.16.
        let state2 = transition(&inst, &state, NodeId(1)).unwrap();
        assert_abs_diff_eq!(
            realized_net_gain(&inst, &state2, NodeId(0)).unwrap(),
            -3.16,
            epsilon = 0.01
        );
    }

    #[test]
    fn expected_gain_under_grand_mean_priors() {
        let (inst, state) = fixture_state();
        let ctx = PolicyContext::new(&inst, &state).unwrap();
        for j in [1usize, 2, 3, 4] {
            assert_abs_diff_eq!(
                ctx.expected_net_gain(NodeId(j)).unwrap(),
                63.26 - 6.75,
                epsilon = 0.01
            );
        }
        assert_eq!(ctx.expected_net_gain(NodeId(0)).unwrap(), 0.0);
    }

    #[test]
    fn expected_gain_interpolates_observed_edge() {
        let (inst, state) = fixture_state();
        // 0 -> 1 -> back: the revisit expectation is minus the observed cost.
        let state = transition(&inst, &state, NodeId(1)).unwrap();
        let ctx = PolicyContext::new(&inst, &state).unwrap();
        assert_abs_diff_eq!(
            ctx.expected_net_gain(NodeId(0)).unwrap(),
            -inst.edge(NodeId(0), NodeId(1)).unwrap().true_cost,
            epsilon = 1e-6
        );
    }

    #[test]
    fn net_gain_variance_cases() {
        let (inst, state) = fixture_state();
        let ctx = PolicyContext::new(&inst, &state).unwrap();
        // Nothing observed: prior variances sum to 2 under unit kernels.
        assert_abs_diff_eq!(ctx.net_gain_variance(NodeId(3)).unwrap(), 2.0, epsilon = 1e-9);
        drop(ctx);

        // 0 -> 3 -> 0: both the edge and node 3 observed; variance of a
        // repeat move to 3 is 0, and the start's own features have been
        // conditioned through nothing - moving to a visited node over the
        // observed edge also gives 0.
        let s1 = transition(&inst, &state, NodeId(3)).unwrap();
        let s2 = transition(&inst, &s1, NodeId(0)).unwrap();
        let ctx = PolicyContext::new(&inst, &s2).unwrap();
        assert_abs_diff_eq!(ctx.net_gain_variance(NodeId(3)).unwrap(), 0.0, epsilon = 1e-9);
        // Node 1 unvisited over untraversed edge: both terms, each < 1 now
        // that some data exists, and the edge term must match the marginal.
        let v = ctx.net_gain_variance(NodeId(1)).unwrap();
        let (_, ve) = ctx
            .cost_posterior()
            .mean_var(&inst.edge(NodeId(0), NodeId(1)).unwrap().features);
        let (_, vr) = ctx
            .reward_posterior()
            .mean_var(&inst.node(NodeId(1)).unwrap().features);
        assert_abs_diff_eq!(v, ve + vr, epsilon = 1e-9);
    }

    #[test]
    fn variance_node_observed_edge_untraversed() {
        // 0 -> 3 -> 0, then consider moving to 3 via... only one edge
        // exists; instead build the case on node 2 (label 3) which shares
        // features with the start: visit 4 (label 5), whose features equal
        // node 1's (label 2). Simpler: after visiting 3, node 3 reached over
        // a NEW edge does not exist in the fixture, so synthesize it by
        // checking the reward term drops once the node value is known.
        let (inst, state) = fixture_state();
        let s1 = transition(&inst, &state, NodeId(1)).unwrap(); // visit label 2
        let ctx = PolicyContext::new(&inst, &s1).unwrap();
        // Node 4 (label 5) shares features with node 1 (label 2), so its
        // reward pair is effectively observed; edge (2,5) is untraversed.
        assert!(ctx.node_observed(NodeId(4)).unwrap());
        let v = ctx.net_gain_variance(NodeId(4)).unwrap();
        let (_, ve) = ctx
            .cost_posterior()
            .mean_var(&inst.edge(NodeId(1), NodeId(4)).unwrap().features);
        assert_abs_diff_eq!(v, ve, epsilon = 1e-9);
    }

    #[test]
    fn transition_observation_counting() {
        let (inst, state) = fixture_state();
        // First visit over a new edge: both sets grow.
        let s1 = transition(&inst, &state, NodeId(4)).unwrap();
        assert_eq!(s1.belief.cost.obs.len(), 1);
        assert_eq!(s1.belief.reward.obs.len(), 1);
        assert_eq!(s1.step, 1);
        // Revisit over the traversed edge: unchanged.
        let s2 = transition(&inst, &s1, NodeId(0)).unwrap();
        let s3 = transition(&inst, &s2, NodeId(4)).unwrap();
        assert_eq!(s3.belief.cost.obs.len(), s2.belief.cost.obs.len());
        assert_eq!(s3.belief.reward.obs.len(), s2.belief.reward.obs.len());
        // Visited node over an untraversed edge: only the cost set grows.
        let s4 = transition(&inst, &s3, NodeId(2)).unwrap(); // visit label 3
        let s5 = transition(&inst, &s4, NodeId(0)).unwrap(); // back over new edge (1,3)
        assert_eq!(s5.belief.cost.obs.len(), s4.belief.cost.obs.len() + 1);
        assert_eq!(s5.belief.reward.obs.len(), s4.belief.reward.obs.len());
    }

    #[test]
    fn scripted_replays_match_reference_totals() {
        let inst = build_fixture_illustrative();
        // Walks in 1-based node labels translated to ids.
        let cases: [(&[usize], f64); 5] = [
            (&[0, 3, 0, 1, 4, 2], 219.60), // optimal
            (&[0, 4, 2, 1], 175.16),       // myopic row
            (&[0, 2, 4, 1], 177.03),       // UCB row
            (&[0, 3, 0, 2, 4, 1], 214.70), // HP row
            (&[0, 3, 2, 4, 1], 214.75),    // SC row
        ];
        for (walk, want) in cases {
            let mut policy = ScriptedPolicy::new(walk);
            let log = run_episode(&inst, &mut policy, &EpisodeConfig::default()).unwrap();
            assert_abs_diff_eq!(log.total, want, epsilon = 0.01);
            let recomputed = total_contribution(&inst, &log).unwrap();
            assert_abs_diff_eq!(log.total, recomputed, epsilon = 1e-9);
        }
    }

    #[test]
    fn stay_policy_ends_immediately() {
        let inst = build_fixture_illustrative();
        struct Stay;
        impl Policy for Stay {
            fn decide(&mut self, ctx: &PolicyContext) -> Result<NodeId> {
                Ok(ctx.current())
            }
            fn descriptor(&self) -> String {
                "stay".into()
            }
        }
        let log = run_episode(&inst, &mut Stay, &EpisodeConfig::default()).unwrap();
        assert_eq!(log.total, 0.0);
        assert_eq!(log.steps(), 1);
    }

    #[test]
    fn non_adjacent_decision_faults() {
        let inst = build_fixture_illustrative();
        struct Bad;
        impl Policy for Bad {
            fn decide(&mut self, _ctx: &PolicyContext) -> Result<NodeId> {
                Ok(NodeId(9))
            }
            fn descriptor(&self) -> String {
                "bad".into()
            }
        }
        let log = run_episode(&inst, &mut Bad, &EpisodeConfig::default()).unwrap();
        assert!(log.fault.is_some());
    }

    #[test]
    fn observe_start_reward_modes() {
        let inst = build_fixture_illustrative();
        let off = TravelerState::initial(&inst, &EpisodeConfig::default()).unwrap();
        assert!(off.belief.reward.obs.is_empty());
        let cfg = EpisodeConfig {
            observe_start_reward: true,
            ..Default::default()
        };
        let on = TravelerState::initial(&inst, &cfg).unwrap();
        assert_eq!(on.belief.reward.obs.len(), 1);
        // Conditioning on the zeroed start pins node 3 (identical features).
        let ctx = PolicyContext::new(&inst, &on).unwrap();
        assert_abs_diff_eq!(ctx.reward_mean(NodeId(2)).unwrap(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_walk_total_is_zero() {
        let inst = build_fixture_illustrative();
        let log = EpisodeLog {
            instance_hash: inst.hash_hex(),
            policy: "none".into(),
            seed: 0,
            records: Vec::new(),
            total: 0.0,
            fault: None,
        };
        assert_eq!(total_contribution(&inst, &log).unwrap(), 0.0);
    }
}
