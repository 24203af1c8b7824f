//! The four online decision rules and their sub-solvers: myopic argmax,
//! mean-plus-variance exploration, rolling-horizon path planning (with an
//! exhaustive solver and a 2-opt-style neighborhood search), and the
//! speculating-clairvoyant label-setting heuristic.
//!
//! Every decision is a pure function of (context, parameters, seed); all
//! stochastic choices draw from a per-decision-epoch seed stream so that
//! episodes replay exactly. Arg-max ties break toward the lowest node id.

use std::collections::BTreeSet;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::generalized_variance;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::sim::{Policy, PolicyContext};

/// Sub-solver for the rolling-horizon path policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HpSolver {
    /// Exhaustive enumeration of the H-path set (guarded; fixture scale).
    Exhaustive,
    /// Neighborhood search over adjacent-edge substitutions (sweep scale).
    LocalSearch,
}

/// Walk-length cap for the speculating clairvoyant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkCap {
    /// Twice the non-self edge count of the instance.
    TwiceEdges,
    Fixed(usize),
}

impl WalkCap {
    pub fn resolve(&self, non_self_edges: usize) -> usize {
        match self {
            WalkCap::TwiceEdges => 2 * non_self_edges.max(1),
            WalkCap::Fixed(v) => (*v).max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyParams {
    Myopic,
    Ucb {
        lambda: f64,
    },
    Hp {
        alpha: f64,
        horizon: usize,
        solver: HpSolver,
    },
    Sc {
        beta: usize,
        cap: WalkCap,
    },
}

impl PolicyParams {
    pub fn descriptor(&self) -> String {
        match self {
            PolicyParams::Myopic => "M".into(),
            PolicyParams::Ucb { lambda } => format!("UCB:lambda={lambda}"),
            PolicyParams::Hp {
                alpha,
                horizon,
                solver,
            } => {
                let s = match solver {
                    HpSolver::Exhaustive => "exhaustive",
                    HpSolver::LocalSearch => "local",
                };
                format!("HP:alpha={alpha},H={horizon},solver={s}")
            }
            PolicyParams::Sc { beta, cap } => match cap {
                WalkCap::TwiceEdges => format!("SC:beta={beta},V=2E"),
                WalkCap::Fixed(v) => format!("SC:beta={beta},V={v}"),
            },
        }
    }
}

impl FromStr for PolicyParams {
    type Err = Error;

    /// Accepts `M`, `UCB:lambda=1`, `HP:alpha=1,H=3[,solver=exhaustive]`,
    /// `SC:beta=100[,V=2E]`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, r),
            None => (s, ""),
        };
        let mut fields = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Validation(format!("policy spec: bad field `{part}`")))?;
            fields.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
        }
        let num = |fields: &std::collections::BTreeMap<String, String>, key: &str| -> Result<Option<f64>> {
            match fields.get(key) {
                None => Ok(None),
                Some(v) => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::Validation(format!("policy spec: `{key}={v}` is not a number"))),
            }
        };
        match kind.trim().to_ascii_uppercase().as_str() {
            "M" => Ok(PolicyParams::Myopic),
            "UCB" => {
                let lambda = num(&fields, "lambda")?.unwrap_or(1.0);
                if lambda < 0.0 {
                    return Err(Error::Validation("policy spec: lambda must be >= 0".into()));
                }
                Ok(PolicyParams::Ucb { lambda })
            }
            "HP" => {
                let alpha = num(&fields, "alpha")?.unwrap_or(1.0);
                let horizon = num(&fields, "h")?.unwrap_or(3.0) as usize;
                if alpha < 0.0 || horizon == 0 {
                    return Err(Error::Validation(
                        "policy spec: need alpha >= 0 and H >= 1".into(),
                    ));
                }
                let solver = match fields.get("solver").map(String::as_str) {
                    None | Some("local") => HpSolver::LocalSearch,
                    Some("exhaustive") => HpSolver::Exhaustive,
                    Some(other) => {
                        return Err(Error::Validation(format!(
                            "policy spec: unknown solver `{other}`"
                        )))
                    }
                };
                Ok(PolicyParams::Hp {
                    alpha,
                    horizon,
                    solver,
                })
            }
            "SC" => {
                let beta = num(&fields, "beta")?.unwrap_or(1.0) as usize;
                if beta == 0 {
                    return Err(Error::Validation("policy spec: beta must be >= 1".into()));
                }
                let cap = match fields.get("v").map(String::as_str) {
                    None | Some("2E") | Some("2e") => WalkCap::TwiceEdges,
                    Some(v) => WalkCap::Fixed(v.parse::<usize>().map_err(|_| {
                        Error::Validation(format!("policy spec: `V={v}` is not a number"))
                    })?),
                };
                Ok(PolicyParams::Sc { beta, cap })
            }
            other => Err(Error::Validation(format!(
                "policy spec: unknown policy `{other}`"
            ))),
        }
    }
}

/// Mixes the policy seed with the decision epoch (splitmix64 finalizer) so
/// each epoch draws from an independent, replayable stream.
fn epoch_seed(seed: u64, epoch: u64) -> u64 {
    let mut z = seed ^ epoch.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded dispatcher over [`PolicyParams`], usable as a [`Policy`].
pub struct StandardPolicy {
    params: PolicyParams,
    seed: u64,
    epoch: u64,
}

impl StandardPolicy {
    pub fn new(params: PolicyParams, seed: u64) -> Self {
        StandardPolicy {
            params,
            seed,
            epoch: 0,
        }
    }
}

impl Policy for StandardPolicy {
    fn decide(&mut self, ctx: &PolicyContext) -> Result<NodeId> {
        let es = epoch_seed(self.seed, self.epoch);
        self.epoch += 1;
        match self.params {
            PolicyParams::Myopic => myopic_decide(ctx),
            PolicyParams::Ucb { lambda } => ucb_decide(ctx, lambda),
            PolicyParams::Hp {
                alpha,
                horizon,
                solver,
            } => hp_decide(ctx, alpha, horizon, solver, es),
            PolicyParams::Sc { beta, cap } => {
                sc_decide(ctx, beta, cap.resolve(ctx.non_self_edge_count()), es)
            }
        }
    }

    fn descriptor(&self) -> String {
        self.params.descriptor()
    }

    fn seed(&self) -> u64 {
        self.seed
    }
}

/// Arg-max of the expected net gain over the neighbors and the self-loop.
pub fn myopic_decide(ctx: &PolicyContext) -> Result<NodeId> {
    argmax_by_score(ctx, |j| ctx.expected_net_gain(j))
}

/// Arg-max of expected net gain plus `lambda` times the net-gain variance.
/// `lambda = 0` reproduces the myopic decision exactly.
pub fn ucb_decide(ctx: &PolicyContext, lambda: f64) -> Result<NodeId> {
    argmax_by_score(ctx, |j| {
        Ok(ctx.expected_net_gain(j)? + lambda * ctx.net_gain_variance(j)?)
    })
}

fn argmax_by_score(
    ctx: &PolicyContext,
    score: impl Fn(NodeId) -> Result<f64>,
) -> Result<NodeId> {
    let mut best: Option<(f64, NodeId)> = None;
    // Adjacency is sorted ascending and includes the self-loop, so keeping
    // the first strict maximum implements the lowest-id tie-break.
    for &j in ctx.neighbors(ctx.current())? {
        let s = score(j)?;
        if best.map_or(true, |(bs, _)| s > bs) {
            best = Some((s, j));
        }
    }
    Ok(best.expect("adjacency always contains the self-loop").1)
}

/// A candidate lookahead plan: a path (no repeated nodes) from the current
/// node, possibly padded with trailing self-loops when it dead-ends before
/// the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// Node sequence starting at the planning origin.
    pub nodes: Vec<NodeId>,
    /// Trailing self-loop steps.
    pub pads: usize,
}

impl PlannedPath {
    pub fn stay(origin: NodeId, horizon: usize) -> Self {
        PlannedPath {
            nodes: vec![origin],
            pads: horizon,
        }
    }

    pub fn first_step(&self) -> NodeId {
        *self.nodes.get(1).unwrap_or(&self.nodes[0])
    }

    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Exhaustive enumeration of the H-path neighborhood of the current node:
/// every path of at most `h` hops padded to length `h` with self-loops
/// (a zero-cost self-loop is a legal step, so stopping early is always an
/// admissible H-walk), including the pure-stay plan.
pub fn enumerate_paths(ctx: &PolicyContext, h: usize) -> Result<Vec<PlannedPath>> {
    if h > 6 && ctx.node_count() > 12 {
        return Err(Error::EnumerationGuard {
            h,
            n: ctx.node_count(),
        });
    }
    let origin = ctx.current();
    let mut plans = vec![PlannedPath::stay(origin, h)];
    let mut stack = vec![origin];
    enumerate_rec(ctx, h, &mut stack, &mut plans)?;
    Ok(plans)
}

fn enumerate_rec(
    ctx: &PolicyContext,
    h: usize,
    stack: &mut Vec<NodeId>,
    plans: &mut Vec<PlannedPath>,
) -> Result<()> {
    if stack.len() > 1 {
        plans.push(PlannedPath {
            nodes: stack.clone(),
            pads: h + 1 - stack.len(),
        });
    }
    if stack.len() == h + 1 {
        return Ok(());
    }
    let last = *stack.last().unwrap();
    for &j in ctx.neighbors(last)? {
        if stack.contains(&j) {
            continue;
        }
        stack.push(j);
        enumerate_rec(ctx, h, stack, plans)?;
        stack.pop();
    }
    Ok(())
}

/// Objective of Problem P1 for one plan: the sum of expected net gains under
/// synthetic states (position and visited set roll forward, beliefs stay
/// frozen at the decision epoch) plus `alpha` times the generalized variance
/// of the plan's unobserved edge costs and unvisited node rewards. The
/// determinant over an empty index set is 0.
pub fn hp_objective(plan: &PlannedPath, ctx: &PolicyContext, alpha: f64) -> Result<f64> {
    let mut gain = 0.0;
    let mut rolled: BTreeSet<NodeId> = ctx.visited().clone();
    let mut edge_feats: Vec<&[f64]> = Vec::new();
    let mut node_feats: Vec<&[f64]> = Vec::new();
    for pair in plan.nodes.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let cost = ctx.cost_mean(u, v)?;
        if rolled.contains(&v) {
            gain -= cost;
        } else {
            gain += ctx.reward_mean(v)? - cost;
            rolled.insert(v);
        }
        if !ctx.edge_observed(u, v)? {
            edge_feats.push(ctx.edge_features(u, v)?);
        }
        if !ctx.is_visited(v) && !ctx.node_observed(v)? {
            node_feats.push(ctx.node_features(v)?);
        }
    }
    let mut reg = 0.0;
    if !edge_feats.is_empty() {
        reg += generalized_variance(&ctx.cost_posterior().joint(&edge_feats)?);
    }
    if !node_feats.is_empty() {
        reg += generalized_variance(&ctx.reward_posterior().joint(&node_feats)?);
    }
    Ok(gain + alpha * reg)
}

/// Exhaustive P1 solver: arg-max of [`hp_objective`] over the enumerated
/// plan set, ties toward the lowest first-step id then the lexicographically
/// smaller node sequence.
pub fn hp_exhaustive(ctx: &PolicyContext, alpha: f64, h: usize) -> Result<(PlannedPath, f64)> {
    let plans = enumerate_paths(ctx, h)?;
    let mut best: Option<(f64, PlannedPath)> = None;
    for plan in plans {
        let obj = hp_objective(&plan, ctx, alpha)?;
        // Exact comparisons: with H=1 and alpha=0 this reduces to the
        // myopic arg-max including its lowest-id tie-break.
        let better = match &best {
            None => true,
            Some((bo, bp)) => {
                obj > *bo
                    || (obj == *bo
                        && (plan.first_step().0, &plan.nodes) < (bp.first_step().0, &bp.nodes))
            }
        };
        if better {
            best = Some((obj, plan));
        }
    }
    let (obj, plan) = best.expect("plan set contains at least the stay plan");
    Ok((plan, obj))
}

/// Algorithm-1-style neighborhood search: start from a greedy feasible
/// path, then repeatedly remove a pair of adjacent edges (an interior or
/// terminal node) and substitute the first reconnection that improves the
/// objective. The objective sequence is non-decreasing and the search
/// terminates at a local optimum. Random restarts (seeded) are used when
/// the greedy start dead-ends short of the horizon.
pub fn hp_neighborhood_search(
    ctx: &PolicyContext,
    alpha: f64,
    h: usize,
    seed: u64,
) -> Result<(PlannedPath, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let greedy = greedy_initial_path(ctx, h)?;
    let mut best = local_improve(ctx, alpha, greedy, h)?;
    best = best_prefix(ctx, alpha, best, h)?;

    // Stay plan is always a candidate; same tie-break as the exhaustive
    // solver (higher objective, then lower first-step id).
    let stay = PlannedPath::stay(ctx.current(), h);
    let stay_obj = hp_objective(&stay, ctx, alpha)?;
    if stay_obj > best.1 || (stay_obj == best.1 && stay.first_step().0 < best.0.first_step().0) {
        best = (stay, stay_obj);
    }

    if best.0.hop_count() < h {
        for _ in 0..4 {
            let Some(start) = random_initial_path(ctx, h, &mut rng)? else {
                break;
            };
            let cand = best_prefix(ctx, alpha, local_improve(ctx, alpha, start, h)?, h)?;
            if cand.1 > best.1 + 1e-12 {
                best = cand;
            }
        }
    }
    Ok(best)
}

fn greedy_initial_path(ctx: &PolicyContext, h: usize) -> Result<PlannedPath> {
    let mut nodes = vec![ctx.current()];
    while nodes.len() < h + 1 {
        let last = *nodes.last().unwrap();
        let mut pick: Option<(f64, NodeId)> = None;
        for &j in ctx.neighbors(last)? {
            if nodes.contains(&j) {
                continue;
            }
            let score = if ctx.is_visited(j) && !nodes.iter().skip(1).any(|&v| v == j) {
                -ctx.cost_mean(last, j)?
            } else {
                ctx.reward_mean(j)? - ctx.cost_mean(last, j)?
            };
            if pick.map_or(true, |(ps, _)| score > ps) {
                pick = Some((score, j));
            }
        }
        match pick {
            Some((_, j)) => nodes.push(j),
            None => break,
        }
    }
    let pads = h + 1 - nodes.len();
    Ok(PlannedPath { nodes, pads })
}

fn random_initial_path(
    ctx: &PolicyContext,
    h: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<PlannedPath>> {
    let mut nodes = vec![ctx.current()];
    while nodes.len() < h + 1 {
        let last = *nodes.last().unwrap();
        let candidates: Vec<NodeId> = ctx
            .neighbors(last)?
            .iter()
            .copied()
            .filter(|j| !nodes.contains(j))
            .collect();
        match candidates.choose(rng) {
            Some(&j) => nodes.push(j),
            None => break,
        }
    }
    if nodes.len() == 1 {
        return Ok(None);
    }
    let pads = h + 1 - nodes.len();
    Ok(Some(PlannedPath { nodes, pads }))
}

/// Stopping early is always admissible (pads are free), so keep the
/// best-scoring prefix of a locally optimal plan.
fn best_prefix(
    ctx: &PolicyContext,
    alpha: f64,
    found: (PlannedPath, f64),
    h: usize,
) -> Result<(PlannedPath, f64)> {
    let (plan, mut obj) = found;
    let mut best = plan.clone();
    for len in 2..plan.nodes.len() {
        let prefix = PlannedPath {
            nodes: plan.nodes[..len].to_vec(),
            pads: h + 1 - len,
        };
        let p_obj = hp_objective(&prefix, ctx, alpha)?;
        if p_obj > obj + 1e-12 {
            best = prefix;
            obj = p_obj;
        }
    }
    Ok((best, obj))
}

/// First-improvement substitution over every path position until no
/// substitution improves the objective.
fn local_improve(
    ctx: &PolicyContext,
    alpha: f64,
    start: PlannedPath,
    h: usize,
) -> Result<(PlannedPath, f64)> {
    let mut plan = start;
    let mut obj = hp_objective(&plan, ctx, alpha)?;
    loop {
        let mut improved = false;
        'scan: for k in 1..plan.nodes.len() {
            let prev = plan.nodes[k - 1];
            let next = plan.nodes.get(k + 1).copied();
            for &w in ctx.neighbors(prev)? {
                if plan.nodes.contains(&w) {
                    continue;
                }
                if let Some(nx) = next {
                    if !ctx.is_adjacent(w, nx) {
                        continue;
                    }
                }
                let mut cand = plan.clone();
                cand.nodes[k] = w;
                let cand_obj = hp_objective(&cand, ctx, alpha)?;
                if cand_obj > obj + 1e-12 {
                    plan = cand;
                    obj = cand_obj;
                    improved = true;
                    break 'scan;
                }
            }
        }
        if !improved {
            break;
        }
    }
    debug_assert!(plan.hop_count() + plan.pads == h || plan.hop_count() <= h);
    Ok((plan, obj))
}

/// Rolling-horizon decision: solve (or approximate) P1 and take the first
/// step of the preferred plan; the self-loop when the stay plan wins.
pub fn hp_decide(
    ctx: &PolicyContext,
    alpha: f64,
    h: usize,
    solver: HpSolver,
    seed: u64,
) -> Result<NodeId> {
    let (plan, _) = match solver {
        HpSolver::Exhaustive => hp_exhaustive(ctx, alpha, h)?,
        HpSolver::LocalSearch => hp_neighborhood_search(ctx, alpha, h, seed)?,
    };
    // The stay plan competes inside the solvers, so a losing lookahead
    // already resolved to the self-loop there.
    Ok(plan.first_step())
}

/// Expected total gain of a walk under synthetic states: rewards count once
/// per distinct newly visited node, posterior-mean costs accrue on every
/// traversal, beliefs stay frozen.
pub fn walk_expected_gain(walk: &[NodeId], ctx: &PolicyContext) -> Result<f64> {
    if walk.is_empty() || walk[0] != ctx.current() {
        return Err(Error::DisconnectedWalk(
            walk.first().copied().unwrap_or(ctx.current()),
        ));
    }
    let mut rolled: BTreeSet<NodeId> = ctx.visited().clone();
    let mut gain = 0.0;
    for pair in walk.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v {
            continue;
        }
        if !ctx.is_adjacent(u, v) {
            return Err(Error::DisconnectedWalk(v));
        }
        let cost = ctx.cost_mean(u, v)?;
        if rolled.contains(&v) {
            gain -= cost;
        } else {
            gain += ctx.reward_mean(v)? - cost;
            rolled.insert(v);
        }
    }
    Ok(gain)
}

/// Algorithm-2-style label-setting heuristic for Problem P2.
///
/// For each of `beta` restarts the directed edge list is reshuffled and `N`
/// (node count) relaxation sweeps run; a relaxation extends the head's
/// predecessor sequence by the tail. Reward terms apply only when the head
/// is globally unvisited and absent from the tail's predecessor sequence.
/// Each restart's best label is reconstructed into a walk and re-valued
/// with [`walk_expected_gain`] (the raw label may overestimate); the best
/// recomputed value across restarts wins, ties toward the earlier restart.
pub fn sc_label_setting(
    ctx: &PolicyContext,
    beta: usize,
    cap: usize,
    seed: u64,
) -> Result<(Vec<NodeId>, f64)> {
    let n = ctx.node_count();
    let origin = ctx.current();

    let mut directed: Vec<(NodeId, NodeId)> = Vec::new();
    let mut cost_mean = std::collections::HashMap::new();
    for i in 0..n {
        let i = NodeId(i);
        for &j in ctx.neighbors(i)? {
            if j != i && j.0 > i.0 {
                let mu = ctx.cost_mean(i, j)?;
                cost_mean.insert((i, j), mu);
                cost_mean.insert((j, i), mu);
                directed.push((i, j));
                directed.push((j, i));
            }
        }
    }
    let mut reward_mean = vec![0.0; n];
    for i in 0..n {
        reward_mean[i] = ctx.reward_mean(NodeId(i))?;
    }

    let mut best: Option<(Vec<NodeId>, f64)> = None;
    for k in 0..beta as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(seed, k));
        let mut order = directed.clone();
        order.shuffle(&mut rng);

        let mut z = vec![f64::NEG_INFINITY; n];
        let mut omega: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        z[origin.0] = 0.0;
        for _ in 0..n {
            for &(i, j) in &order {
                if z[i.0] == f64::NEG_INFINITY || omega[i.0].len() + 1 > cap {
                    continue;
                }
                let delta = if !ctx.is_visited(j) && !omega[i.0].contains(&j) {
                    reward_mean[j.0] - cost_mean[&(i, j)]
                } else {
                    -cost_mean[&(i, j)]
                };
                if z[i.0] + delta > z[j.0] {
                    z[j.0] = z[i.0] + delta;
                    let mut seq = omega[i.0].clone();
                    seq.push(i);
                    omega[j.0] = seq;
                }
            }
        }

        let mut target = origin;
        for i in 0..n {
            if z[i] > z[target.0] {
                target = NodeId(i);
            }
        }
        let mut walk = omega[target.0].clone();
        walk.push(target);
        if walk[0] != origin {
            // Label chain must begin at the origin; skip degenerate labels.
            continue;
        }
        let value = walk_expected_gain(&walk, ctx)?;
        if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
            best = Some((walk, value));
        }
    }
    Ok(best.unwrap_or((vec![origin], 0.0)))
}

/// Speculating-clairvoyant decision: first node of the label-setting walk,
/// or the self-loop when the walk is empty or its recomputed value is
/// non-positive.
pub fn sc_decide(ctx: &PolicyContext, beta: usize, cap: usize, seed: u64) -> Result<NodeId> {
    let (walk, value) = sc_label_setting(ctx, beta, cap, seed)?;
    if walk.len() >= 2 && value > 0.0 {
        Ok(walk[1])
    } else {
        Ok(ctx.current())
    }
}
