//! Transfer graphs over operator sparsity and the finite-controllability
//! verdict.
//!
//! The verdict is a sufficient-condition check calibrated to the five model
//! families: every operator must be a matching (disjoint two-level blocks),
//! and the union graph must be connected and acyclic. When all three hold,
//! leaf-edge rotations can peel any finite superposition down to the root, so
//! the check emits a machine-checkable peel certificate; otherwise it emits
//! the obstruction witness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{ControlOperator, SystemModel};

/// Operator-sparsity graph: one edge per nonzero strict-upper-triangle entry.
#[derive(Debug, Clone)]
pub struct TransferGraph {
    pub vertices: usize,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphEdge {
    pub i: usize,
    pub j: usize,
    pub op: String,
    pub weight: f64,
}

pub fn build_transfer_graph(ops: &[ControlOperator]) -> Result<TransferGraph> {
    let dim = ops.first().map(|op| op.dim()).unwrap_or(0);
    let mut edges = Vec::new();
    for op in ops {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: op.dim(),
            });
        }
        for (i, j, c) in &op.edges {
            edges.push(GraphEdge {
                i: *i,
                j: *j,
                op: op.id.clone(),
                weight: c.norm(),
            });
        }
    }
    Ok(TransferGraph {
        vertices: dim,
        edges,
    })
}

/// `None` when every vertex has degree <= 1 in this operator's own edge set,
/// otherwise the first vertex of degree >= 2.
pub fn check_matching(op: &ControlOperator) -> Option<usize> {
    let mut degree = vec![0usize; op.dim()];
    for (i, j, _) in &op.edges {
        degree[*i] += 1;
        degree[*j] += 1;
    }
    degree.iter().position(|&d| d >= 2)
}

/// One step of a peel certificate: `vertex` is a leaf of the residual graph
/// and `edge` (carried by operator `op`) is its unique remaining edge.
#[derive(Debug, Clone, Serialize)]
pub struct PeelStep {
    pub vertex: usize,
    pub edge: (usize, usize),
    pub op: String,
}

#[derive(Debug, Clone)]
pub enum ControllabilityVerdict {
    FinitelyControllable {
        root: usize,
        peel_order: Vec<PeelStep>,
    },
    Disconnected {
        components: Vec<Vec<usize>>,
    },
    CyclicObstruction {
        cycle: Vec<usize>,
    },
    OperatorNotMatching {
        op: String,
        vertex: usize,
    },
}

impl ControllabilityVerdict {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllabilityVerdict::FinitelyControllable { .. } => "finitely-controllable",
            ControllabilityVerdict::Disconnected { .. } => "disconnected",
            ControllabilityVerdict::CyclicObstruction { .. } => "cyclic-obstruction",
            ControllabilityVerdict::OperatorNotMatching { .. } => "operator-not-matching",
        }
    }

    pub fn is_controllable(&self) -> bool {
        matches!(self, ControllabilityVerdict::FinitelyControllable { .. })
    }

    pub fn to_report(&self) -> VerdictReport {
        let mut report = VerdictReport {
            kind: self.kind().to_string(),
            root: None,
            peel_order: None,
            components: None,
            cycle: None,
            witness_op: None,
        };
        match self {
            ControllabilityVerdict::FinitelyControllable { root, peel_order } => {
                report.root = Some(*root);
                report.peel_order = Some(peel_order.clone());
            }
            ControllabilityVerdict::Disconnected { components } => {
                report.components = Some(components.clone());
            }
            ControllabilityVerdict::CyclicObstruction { cycle } => {
                report.cycle = Some(cycle.clone());
            }
            ControllabilityVerdict::OperatorNotMatching { op, vertex } => {
                report.witness_op = Some(WitnessOp {
                    op: op.clone(),
                    vertex: *vertex,
                });
            }
        }
        report
    }
}

/// Serialization form with the fixed key set
/// `{"kind", "root", "peel_order", "components", "cycle", "witness_op"}`.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    pub kind: String,
    pub root: Option<usize>,
    pub peel_order: Option<Vec<PeelStep>>,
    pub components: Option<Vec<Vec<usize>>>,
    pub cycle: Option<Vec<usize>>,
    pub witness_op: Option<WitnessOp>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessOp {
    pub op: String,
    pub vertex: usize,
}

fn adjacency(graph: &TransferGraph) -> Vec<Vec<(usize, usize)>> {
    // adj[v] = sorted (neighbor, edge index)
    let mut adj = vec![Vec::new(); graph.vertices];
    for (eid, e) in graph.edges.iter().enumerate() {
        adj[e.i].push((e.j, eid));
        adj[e.j].push((e.i, eid));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn components(graph: &TransferGraph) -> Vec<Vec<usize>> {
    let adj = adjacency(graph);
    let mut seen = vec![false; graph.vertices];
    let mut comps = Vec::new();
    for start in 0..graph.vertices {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// First fundamental cycle of a depth-first traversal with ascending vertex
/// order, or `None` when the graph is a forest. Parallel edges count as
/// 2-cycles.
fn find_cycle(graph: &TransferGraph) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    let adj = adjacency(graph);
    let n = graph.vertices;
    let mut color = vec![Color::White; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    for root in 0..n {
        if color[root] != Color::White {
            continue;
        }
        color[root] = Color::Gray;
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            if *cursor == adj[v].len() {
                color[v] = Color::Black;
                stack.pop();
                continue;
            }
            let (w, eid) = adj[v][*cursor];
            *cursor += 1;
            if Some(eid) == parent[v].map(|(_, pe)| pe) {
                continue;
            }
            match color[w] {
                Color::White => {
                    color[w] = Color::Gray;
                    parent[w] = Some((v, eid));
                    stack.push((w, 0));
                }
                Color::Gray => {
                    // back edge to an ancestor: read the cycle off the tree path
                    let mut chain = vec![v];
                    let mut cur = v;
                    while cur != w {
                        let (p, _) = parent[cur].expect("gray vertices chain to the root");
                        cur = p;
                        chain.push(cur);
                    }
                    chain.reverse();
                    return Some(chain);
                }
                Color::Black => {}
            }
        }
    }
    None
}

/// Peel order for a tree: repeatedly remove the leaf farthest from `root`
/// (smallest index on ties). Each removed leaf is recorded with its unique
/// residual edge.
fn peel_order(graph: &TransferGraph, root: usize) -> Vec<PeelStep> {
    let n = graph.vertices;
    let adj = adjacency(graph);

    let mut depth = vec![usize::MAX; n];
    depth[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &(w, _) in &adj[v] {
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                queue.push_back(w);
            }
        }
    }

    let mut active = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|v| adj[v].len()).collect();
    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    for _ in 0..n.saturating_sub(1) {
        let mut pick: Option<usize> = None;
        for v in 0..n {
            if !active[v] || v == root || degree[v] != 1 {
                continue;
            }
            match pick {
                None => pick = Some(v),
                Some(best) => {
                    if depth[v] > depth[best] {
                        pick = Some(v);
                    }
                }
            }
        }
        let v = pick.expect("tree peel always finds a leaf");
        let &(w, eid) = adj[v]
            .iter()
            .find(|&&(w, _)| active[w])
            .expect("leaf has one active edge");
        let e = &graph.edges[eid];
        steps.push(PeelStep {
            vertex: v,
            edge: (e.i, e.j),
            op: e.op.clone(),
        });
        active[v] = false;
        degree[v] = 0;
        degree[w] -= 1;
    }
    steps
}

/// Verdict over explicit operators with a chosen root vertex.
pub fn verdict_for_operators(
    ops: &[ControlOperator],
    root: usize,
) -> Result<ControllabilityVerdict> {
    for op in ops {
        if let Some(vertex) = check_matching(op) {
            return Ok(ControllabilityVerdict::OperatorNotMatching {
                op: op.id.clone(),
                vertex,
            });
        }
    }
    let graph = build_transfer_graph(ops)?;
    let comps = components(&graph);
    if comps.len() > 1 {
        return Ok(ControllabilityVerdict::Disconnected { components: comps });
    }
    if let Some(cycle) = find_cycle(&graph) {
        return Ok(ControllabilityVerdict::CyclicObstruction { cycle });
    }
    Ok(ControllabilityVerdict::FinitelyControllable {
        root,
        peel_order: peel_order(&graph, root),
    })
}

/// Finite-controllability decision for a model: matching operators plus a
/// connected acyclic union graph, rooted at the canonical ground state.
pub fn fct_verdict(
    model: &SystemModel,
    ops: &[ControlOperator],
) -> Result<ControllabilityVerdict> {
    if let Some(op) = ops.iter().find(|op| op.dim() != model.dim()) {
        return Err(Error::DimensionMismatch {
            left: model.dim(),
            right: op.dim(),
        });
    }
    verdict_for_operators(ops, 0)
}

/// Restricts operators to the subspace spanned by `vertices` (ascending),
/// reindexing edges accordingly.
pub fn restrict_operators(
    ops: &[ControlOperator],
    vertices: &[usize],
) -> Result<Vec<ControlOperator>> {
    let map: std::collections::BTreeMap<usize, usize> = vertices
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    ops.iter()
        .map(|op| {
            let mut m: crate::numeric::CMatrix =
                ndarray::Array2::zeros((vertices.len(), vertices.len()));
            for (&old_i, &new_i) in &map {
                for (&old_j, &new_j) in &map {
                    m[[new_i, new_j]] = op.matrix[[old_i, old_j]];
                }
            }
            ControlOperator::from_matrix(op.id.clone(), m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_operators, Family, Scheme, SystemModel};

    fn model(family: Family, scheme: Option<Scheme>, n_max: usize, guard: usize) -> SystemModel {
        let mut m = SystemModel::new(family, scheme, 0.1, n_max).unwrap();
        m.guard = guard;
        m
    }

    #[test]
    fn carrier_red_is_a_path_graph() {
        let m = model(Family::SpinOscillator, Some(Scheme::CarrierRed), 2, 0);
        let ops = build_operators(&m).unwrap();
        let g = build_transfer_graph(&ops).unwrap();
        assert_eq!(g.vertices, 6);
        let mut pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.i, e.j)).collect();
        pairs.sort_unstable();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
    }

    #[test]
    fn red_blue_splits_into_two_components() {
        let m = model(Family::SpinOscillator, Some(Scheme::RedBlue), 3, 0);
        let ops = build_operators(&m).unwrap();
        match fct_verdict(&m, &ops).unwrap() {
            ControllabilityVerdict::Disconnected { components } => {
                assert_eq!(components.len(), 2);
                // indices: down,n = 2n; up,n = 2n+1
                assert_eq!(components[0], vec![0, 3, 4, 7]);
                assert_eq!(components[1], vec![1, 2, 5, 6]);
            }
            other => panic!("expected disconnected, got {}", other.kind()),
        }
    }

    #[test]
    fn red_blue_components_are_trees_on_their_own() {
        let m = model(Family::SpinOscillator, Some(Scheme::RedBlue), 5, 0);
        let ops = build_operators(&m).unwrap();
        let comps = match fct_verdict(&m, &ops).unwrap() {
            ControllabilityVerdict::Disconnected { components } => components,
            other => panic!("expected disconnected, got {}", other.kind()),
        };
        for comp in comps {
            let sub = restrict_operators(&ops, &comp).unwrap();
            let verdict = verdict_for_operators(&sub, 0).unwrap();
            assert!(verdict.is_controllable(), "component {comp:?}");
        }
    }

    #[test]
    fn electron_cycle_is_the_hexagon() {
        let m = model(Family::SpinTwoOscillators, None, 1, 0);
        let ops = build_operators(&m).unwrap();
        match fct_verdict(&m, &ops).unwrap() {
            ControllabilityVerdict::CyclicObstruction { cycle } => {
                assert_eq!(cycle.len(), 6);
                let mut sorted = cycle.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, vec![0, 1, 2, 5, 6, 7]);
                // consecutive cycle vertices really are edges of the graph
                let g = build_transfer_graph(&ops).unwrap();
                let has_edge = |a: usize, b: usize| {
                    g.edges
                        .iter()
                        .any(|e| (e.i, e.j) == (a.min(b), a.max(b)))
                };
                for k in 0..cycle.len() {
                    assert!(has_edge(cycle[k], cycle[(k + 1) % cycle.len()]));
                }
            }
            other => panic!("expected cyclic obstruction, got {}", other.kind()),
        }
    }

    #[test]
    fn matching_witnesses() {
        let ion = model(Family::SpinOscillator, Some(Scheme::CarrierRed), 4, 0);
        for op in build_operators(&ion).unwrap() {
            assert_eq!(check_matching(&op), None);
        }
        let ho = model(Family::HarmonicOscillator, None, 4, 0);
        let ops = build_operators(&ho).unwrap();
        assert_eq!(check_matching(&ops[1]), Some(1));
        match fct_verdict(&ho, &ops).unwrap() {
            ControllabilityVerdict::OperatorNotMatching { op, vertex } => {
                assert_eq!(op, "B");
                assert_eq!(vertex, 1);
            }
            other => panic!("expected not-matching, got {}", other.kind()),
        }
        let block = model(Family::BlockExample, None, 7, 0);
        for op in build_operators(&block).unwrap() {
            assert_eq!(check_matching(&op), None);
        }
    }

    #[test]
    fn peel_order_is_a_valid_leaf_elimination() {
        for scheme in [Scheme::CarrierRed] {
            let m = model(Family::SpinOscillator, Some(scheme), 6, 3);
            let ops = build_operators(&m).unwrap();
            let verdict = fct_verdict(&m, &ops).unwrap();
            let (root, steps) = match &verdict {
                ControllabilityVerdict::FinitelyControllable { root, peel_order } => {
                    (*root, peel_order)
                }
                other => panic!("expected controllable, got {}", other.kind()),
            };
            assert_eq!(root, 0);
            let g = build_transfer_graph(&ops).unwrap();
            let mut active_degree = vec![0usize; g.vertices];
            for e in &g.edges {
                active_degree[e.i] += 1;
                active_degree[e.j] += 1;
            }
            let mut seen = vec![false; g.vertices];
            for step in steps {
                assert_eq!(active_degree[step.vertex], 1, "vertex {}", step.vertex);
                assert!(!seen[step.vertex]);
                seen[step.vertex] = true;
                let (i, j) = step.edge;
                assert!(step.vertex == i || step.vertex == j);
                active_degree[i] -= 1;
                active_degree[j] -= 1;
            }
            assert!(!seen[root]);
            assert_eq!(seen.iter().filter(|&&s| s).count(), g.vertices - 1);
        }
    }

    #[test]
    fn verdict_invariant_under_relabeling_and_rescaling() {
        let m = model(Family::NLevelOscillator, Some(Scheme::SchemeB), 4, 1);
        let ops = build_operators(&m).unwrap();
        let base = fct_verdict(&m, &ops).unwrap();

        let renamed: Vec<_> = ops
            .iter()
            .enumerate()
            .map(|(k, op)| {
                ControlOperator::from_matrix(format!("op{k}"), op.matrix.clone()).unwrap()
            })
            .collect();
        let scaled: Vec<_> = ops
            .iter()
            .map(|op| {
                ControlOperator::from_matrix(op.id.clone(), op.matrix.mapv(|z| z * 3.7)).unwrap()
            })
            .collect();
        assert_eq!(base.kind(), fct_verdict(&m, &renamed).unwrap().kind());
        assert_eq!(base.kind(), fct_verdict(&m, &scaled).unwrap().kind());
    }

    #[test]
    fn controllable_verdict_is_monotone_in_truncation() {
        for n_max in 1..=12 {
            let m = model(Family::SpinOscillator, Some(Scheme::CarrierRed), n_max, 0);
            let ops = build_operators(&m).unwrap();
            assert!(fct_verdict(&m, &ops).unwrap().is_controllable(), "n_max={n_max}");
        }
    }

    #[test]
    fn n_level_schemes_are_controllable() {
        for scheme in [Scheme::SchemeA, Scheme::SchemeB] {
            let m = model(Family::NLevelOscillator, Some(scheme), 3, 0);
            let ops = build_operators(&m).unwrap();
            assert!(fct_verdict(&m, &ops).unwrap().is_controllable());
        }
    }
}
