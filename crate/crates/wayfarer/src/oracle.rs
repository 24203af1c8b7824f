//! Exact clairvoyant solver: depth-first branch-and-bound over walks under
//! perfect knowledge of rewards and costs, with structural pruning rules
//! (repeated circuits, bridge traversal counts, acyclic visit/length caps),
//! a dominated-circuit audit, and the Hamiltonian-path reduction harness.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::{hamiltonian_reduction, EdgeKey, GraphInstance, NodeId};

/// Search limits and pruning toggles for [`clairvoyant_exact`].
#[derive(Debug, Clone)]
pub struct OracleCaps {
    pub max_expansions: u64,
    /// Walk-length cap in steps; `None` selects 2|E| for acyclic instances
    /// (provably sufficient) and 2|E|+2 otherwise.
    pub length_cap: Option<usize>,
    pub prune_repeated_circuits: bool,
    pub prune_bridges: bool,
    pub acyclic_visit_caps: bool,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps {
            max_expansions: 100_000_000,
            length_cap: None,
            prune_repeated_circuits: true,
            prune_bridges: true,
            acyclic_visit_caps: true,
        }
    }
}

impl OracleCaps {
    /// Bound pruning and the global length cap only; used to cross-check
    /// that the structural rules never change the optimum.
    pub fn unpruned() -> Self {
        OracleCaps {
            prune_repeated_circuits: false,
            prune_bridges: false,
            acyclic_visit_caps: false,
            ..OracleCaps::default()
        }
    }
}

/// One frontier state of the branch-and-bound search.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub current: NodeId,
    pub visited: BTreeSet<NodeId>,
    pub walk: Vec<NodeId>,
    pub value: f64,
    pub edge_counts: std::collections::BTreeMap<EdgeKey, usize>,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: f64,
    /// Node sequence including the start; a single entry means no step was
    /// worth taking.
    pub walk: Vec<NodeId>,
    pub expansions: u64,
    /// True when the search terminated with a certificate: the expansion
    /// budget was not exhausted and no branch cut by the length cap could
    /// have beaten the returned value.
    pub proved: bool,
}

struct Search<'a> {
    inst: &'a GraphInstance,
    caps: OracleCaps,
    length_cap: usize,
    length_cap_provable: bool,
    bridges: BTreeSet<EdgeKey>,
    visit_cap: Vec<usize>,
    best_value: f64,
    best_walk: Vec<NodeId>,
    expansions: u64,
    exhausted: bool,
    /// Largest admissible bound seen at a branch cut by the length cap.
    capped_bound: f64,
}

/// Exact perfect-information optimum from the instance start node.
///
/// Upper bound at a state: value so far plus the positive uncollected
/// rewards; branches are pruned when the bound cannot beat the incumbent.
/// Children are explored in ascending node order and the incumbent only
/// replaced on strict improvement, so the reported walk is the
/// lexicographically smallest optimal one.
pub fn clairvoyant_exact(inst: &GraphInstance, caps: OracleCaps) -> Result<OracleResult> {
    let e = inst.non_self_edge_count();
    let acyclic = inst.is_acyclic();
    let length_cap = caps
        .length_cap
        .unwrap_or(if acyclic { 2 * e } else { 2 * e + 2 });
    let length_cap_provable = acyclic && caps.length_cap.is_none();
    let mut visit_cap = vec![usize::MAX; inst.node_count()];
    if caps.acyclic_visit_caps && acyclic {
        for i in 0..inst.node_count() {
            visit_cap[i] = 2 * inst.degree(NodeId(i))?;
        }
    }
    let bridges = if caps.prune_bridges {
        find_bridges(inst)
    } else {
        BTreeSet::new()
    };

    let mut search = Search {
        inst,
        caps,
        length_cap,
        length_cap_provable,
        bridges,
        visit_cap,
        best_value: 0.0,
        best_walk: vec![inst.start],
        expansions: 0,
        exhausted: false,
        capped_bound: f64::NEG_INFINITY,
    };

    let mut node = SearchNode {
        current: inst.start,
        visited: BTreeSet::from([inst.start]),
        walk: vec![inst.start],
        value: 0.0,
        edge_counts: Default::default(),
    };
    let mut uncollected = 0.0;
    let mut visits = vec![0usize; inst.node_count()];
    visits[inst.start.0] = 1;
    for n in inst.nodes() {
        if n.id != inst.start {
            uncollected += n.true_reward.max(0.0);
        }
    }
    dfs(&mut search, &mut node, uncollected, &mut visits)?;

    let proved = !search.exhausted
        && (search.length_cap_provable || search.capped_bound <= search.best_value + 1e-9);
    Ok(OracleResult {
        value: search.best_value,
        walk: search.best_walk,
        expansions: search.expansions,
        proved,
    })
}

fn dfs(
    search: &mut Search,
    node: &mut SearchNode,
    uncollected: f64,
    visits: &mut Vec<usize>,
) -> Result<()> {
    search.expansions += 1;
    if search.expansions > search.caps.max_expansions {
        search.exhausted = true;
        return Ok(());
    }
    if node.value > search.best_value + 1e-12 {
        search.best_value = node.value;
        search.best_walk = node.walk.clone();
    }
    let steps = node.walk.len() - 1;
    if steps >= search.length_cap {
        let bound = node.value + uncollected;
        if bound > search.capped_bound {
            search.capped_bound = bound;
        }
        return Ok(());
    }
    let current = node.current;
    let neighbors: Vec<NodeId> = search.inst.neighbors(current)?.to_vec();
    for j in neighbors {
        if j == current {
            continue;
        }
        if visits[j.0] + 1 > search.visit_cap[j.0] {
            continue;
        }
        let key = EdgeKey::new(current, j);
        let count = node.edge_counts.get(&key).copied().unwrap_or(0);
        if search.caps.prune_bridges && search.bridges.contains(&key) && count + 1 > 2 {
            continue;
        }
        let edge = search.inst.edge(current, j)?;
        let newly = !node.visited.contains(&j);
        let gain = if newly {
            search.inst.node(j)?.true_reward - edge.true_cost
        } else {
            -edge.true_cost
        };
        let child_uncollected = if newly {
            uncollected - search.inst.node(j)?.true_reward.max(0.0)
        } else {
            uncollected
        };
        let bound = node.value + gain + child_uncollected;
        if bound <= search.best_value + 1e-9 {
            continue;
        }

        node.walk.push(j);
        node.current = j;
        node.value += gain;
        *node.edge_counts.entry(key).or_insert(0) += 1;
        let inserted = node.visited.insert(j);
        visits[j.0] += 1;

        let cut = search.caps.prune_repeated_circuits && prune_repeated_circuit(node);
        if !cut {
            dfs(search, node, child_uncollected, visits)?;
        }

        visits[j.0] -= 1;
        if inserted {
            node.visited.remove(&j);
        }
        *node.edge_counts.get_mut(&key).unwrap() -= 1;
        node.value -= gain;
        node.walk.pop();
        node.current = current;
        if search.exhausted {
            return Ok(());
        }
    }
    Ok(())
}

/// True when the just-closed circuit (the segment from the previous
/// occurrence of the current node, if it repeats no edge) duplicates an
/// earlier circuit with the same edge set and endpoint. A walk like
/// a-b-a-b is not pruned: its closing segment repeats edge (a,b) and is
/// therefore not a circuit.
pub fn prune_repeated_circuit(node: &SearchNode) -> bool {
    let walk = &node.walk;
    let v = node.current;
    let last = walk.len() - 1;
    let occurrences: Vec<usize> = (0..last).filter(|&i| walk[i] == v).collect();
    let Some(&prev) = occurrences.last() else {
        return false;
    };
    let Some(closing) = circuit_edge_set(&walk[prev..=last]) else {
        return false;
    };
    for w in occurrences.windows(2) {
        if let Some(earlier) = circuit_edge_set(&walk[w[0]..=w[1]]) {
            if earlier == closing {
                return true;
            }
        }
    }
    // Also compare against non-consecutive occurrence pairs.
    for (ai, &a) in occurrences.iter().enumerate() {
        for &b in &occurrences[ai + 1..] {
            if let Some(earlier) = circuit_edge_set(&walk[a..=b]) {
                if earlier == closing {
                    return true;
                }
            }
        }
    }
    false
}

/// The edge set of a closed segment, or `None` when any edge repeats
/// (a circuit may repeat nodes but not edges).
fn circuit_edge_set(segment: &[NodeId]) -> Option<BTreeSet<EdgeKey>> {
    let mut edges = BTreeSet::new();
    for pair in segment.windows(2) {
        if !edges.insert(EdgeKey::new(pair[0], pair[1])) {
            return None;
        }
    }
    Some(edges)
}

/// True when the step just taken crossed a bridge for the third time.
pub fn prune_bridge_count(node: &SearchNode, bridges: &BTreeSet<EdgeKey>) -> bool {
    let last = node.walk.len() - 1;
    if last == 0 {
        return false;
    }
    let key = EdgeKey::new(node.walk[last - 1], node.walk[last]);
    bridges.contains(&key) && node.edge_counts.get(&key).copied().unwrap_or(0) > 2
}

/// Exact bridge set of the non-self edges via a low-link traversal.
pub fn find_bridges(inst: &GraphInstance) -> BTreeSet<EdgeKey> {
    let n = inst.node_count();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut bridges = BTreeSet::new();
    let mut timer = 0usize;
    // Iterative DFS with explicit parent edges.
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        let mut stack: Vec<(usize, Option<usize>, usize)> = vec![(root, None, 0)];
        while let Some(&mut (u, parent, ref mut idx)) = stack.last_mut() {
            if *idx == 0 {
                disc[u] = timer;
                low[u] = timer;
                timer += 1;
            }
            let neighbors = inst.neighbors(NodeId(u)).expect("valid node");
            if *idx < neighbors.len() {
                let v = neighbors[*idx].0;
                *idx += 1;
                if v == u || Some(v) == parent {
                    continue;
                }
                if disc[v] == usize::MAX {
                    stack.push((v, Some(u), 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridges.insert(EdgeKey::new(NodeId(p), NodeId(u)));
                    }
                }
            }
        }
    }
    bridges
}

/// Walk-length cap for acyclic instances: 2|E| steps, with per-node visit
/// counts separately capped at twice the degree during search.
pub fn acyclic_walk_cap(inst: &GraphInstance) -> Result<usize> {
    if !inst.is_acyclic() {
        return Err(Error::NotAcyclic);
    }
    Ok(2 * inst.non_self_edge_count())
}

/// A dominated-circuit violation: two disjoint closed segments of the walk
/// (by index range) with the same endpoint whose distinct-node sets are in
/// strict containment. Optimal walks exhibit none; used to audit heuristic
/// walks post hoc.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitViolation {
    pub inner: (usize, usize),
    pub outer: (usize, usize),
    pub endpoint: NodeId,
}

pub fn dominated_circuit_check(walk: &[NodeId], _inst: &GraphInstance) -> Vec<CircuitViolation> {
    let mut circuits: Vec<(usize, usize, BTreeSet<NodeId>)> = Vec::new();
    for p in 0..walk.len() {
        for q in (p + 1)..walk.len() {
            if walk[p] != walk[q] || circuit_edge_set(&walk[p..=q]).is_none() {
                continue;
            }
            let nodes: BTreeSet<NodeId> = walk[p..=q].iter().copied().collect();
            circuits.push((p, q, nodes));
        }
    }
    let mut violations = Vec::new();
    for (i, a) in circuits.iter().enumerate() {
        for b in circuits.iter().skip(i + 1) {
            // Disjoint index ranges (shared endpoints allowed).
            let disjoint = a.1 <= b.0 || b.1 <= a.0;
            if !disjoint || walk[a.0] != walk[b.0] {
                continue;
            }
            let (inner, outer) = if a.2.len() < b.2.len() { (a, b) } else { (b, a) };
            if inner.2.len() < outer.2.len() && inner.2.is_subset(&outer.2) {
                violations.push(CircuitViolation {
                    inner: (inner.0, inner.1),
                    outer: (outer.0, outer.1),
                    endpoint: walk[a.0],
                });
            }
        }
    }
    violations
}

/// Decides Hamiltonian-path existence for the simple graph `(n_h, h_edges)`
/// by solving the reduced traversal instance exactly. In the reduction
/// every non-self edge costs 1 and every original node rewards 2, so the
/// optimum is `n_h` exactly when a Hamiltonian path exists and at most
/// `n_h - 1` otherwise.
pub fn hamiltonian_decision(n_h: usize, h_edges: &[(usize, usize)]) -> Result<bool> {
    let inst = hamiltonian_reduction(n_h, h_edges)?;
    let result = clairvoyant_exact(&inst, OracleCaps::default())?;
    if !result.proved {
        return Err(Error::Indeterminate);
    }
    Ok(result.value >= n_h as f64 - 1e-9)
}
