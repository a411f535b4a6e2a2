//! Bounded solution graphs.
//!
//! Nodes are equations reached by the solver's stages, identified by
//! canonical form, stage, and the letter counts behind each derived letter
//! (pruning looks at those counts, so two nodes that differ only there may
//! have different children). Edges carry the stage choice that links them,
//! stated in the canonical letter ids of the source node. Replaying a path
//! from the root to a terminal node, with every witness of each parametric
//! block edge up to a cap, yields solutions of the input equation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use num_bigint::BigUint;
use serde::Serialize;
use serde_json::json;

use crate::dioph::{self, enumerate_witnesses, VarShape};
use crate::model::{canonical_form, AlphabetRegistry, Equation, LetterId, Problem, Renaming, Substitution, VarId};
use crate::recompress::{
    apply_block_choice, apply_pair_choice, default_block_cap, BlockChoice, CutGuess, PairChoice, RecompressError,
    TransformRecord, VarPop,
};
use crate::solver::reconstruct::{reconstruct, solve_trivial, verify, Verdict};
use crate::solver::{choices, prune, solve, Outcome, SolverConfig, Stage, StageChoice};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphLimits {
    /// Largest number of nodes kept.
    pub node_budget: usize,
    /// Block-stage nodes at this phase are not expanded.
    pub max_phases: usize,
    /// Nodes are at most `length_factor * n` long.
    pub length_factor: usize,
    /// Node budget of the satisfiability check run first.
    pub decide_budget: u64,
}

impl Default for GraphLimits {
    fn default() -> Self {
        GraphLimits { node_budget: 2000, max_phases: 3, length_factor: 85, decide_budget: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NodeStage {
    /// The input, before any variable is guessed empty.
    Root,
    Stage(Stage),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphNode {
    /// Canonical form.
    pub equation: Equation,
    pub stage: NodeStage,
    pub phase: usize,
    /// Trivial, or free of variables with equal sides.
    pub terminal: bool,
    /// Whether the children of this node were generated.
    pub expanded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum EdgeLabel {
    Erase(BTreeSet<VarId>),
    Stage(StageChoice),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
    /// Records of the representative application, in its own letter ids.
    pub records: Vec<TransformRecord>,
}

#[derive(Clone, Debug)]
pub struct SolutionGraph {
    pub problem: Problem,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub root: Option<usize>,
    /// Some node was left unexpanded by the budget or the phase limit.
    pub incomplete: bool,
    pub diagnostic: Option<String>,
    pub length_cap: usize,
}

type NodeKey = (Equation, NodeStage, Vec<Vec<u64>>);

// A concrete equation standing for a node, with the registry it lives in.
struct Rep {
    equation: Equation,
    registry: AlphabetRegistry,
}

fn node_key(eq: &Equation, registry: &AlphabetRegistry, stage: NodeStage) -> (NodeKey, Renaming) {
    let (canon, renaming) = canonical_form(eq, registry);
    let mut by_new: Vec<(LetterId, LetterId)> = renaming.iter().map(|(&old, &new)| (new, old)).collect();
    by_new.sort();
    let counts = by_new.iter().map(|&(_, old)| registry.parikh(old).map(<[u64]>::to_vec).unwrap_or_default()).collect();
    ((canon, stage, counts), renaming)
}

fn is_terminal(eq: &Equation) -> bool {
    eq.is_trivial() || !eq.has_vars()
}

// A terminal that actually has a solution.
fn terminal_ok(eq: &Equation) -> bool {
    if eq.has_vars() {
        solve_trivial(eq, None).is_some()
    } else {
        eq.lhs == eq.rhs
    }
}

/// Build the graph of `problem` breadth first within `limits`.
pub fn build_graph(problem: &Problem, limits: &GraphLimits) -> SolutionGraph {
    let n = problem.equation.len().max(1);
    let mut graph = SolutionGraph {
        problem: problem.clone(),
        nodes: Vec::new(),
        edges: Vec::new(),
        root: None,
        incomplete: false,
        diagnostic: None,
        length_cap: limits.length_factor.saturating_mul(n),
    };
    let check = SolverConfig { node_budget: Some(limits.decide_budget), ..SolverConfig::decide() };
    match solve(problem, &check).map(|r| r.outcome) {
        Ok(Outcome::Unsat) => {
            graph.diagnostic = Some("unsatisfiable: the equation has no solution".into());
            return graph;
        }
        Ok(Outcome::Unknown(_)) => {
            graph.diagnostic = Some("satisfiability not settled within the check budget".into());
        }
        _ => {}
    }
    let block_cap = default_block_cap(n);
    let mut index: HashMap<NodeKey, usize> = HashMap::new();
    let mut reps: Vec<Option<Rep>> = Vec::new();
    let mut queue = VecDeque::new();
    let add = |graph: &mut SolutionGraph,
               index: &mut HashMap<NodeKey, usize>,
               reps: &mut Vec<Option<Rep>>,
               queue: &mut VecDeque<usize>,
               key: NodeKey,
               rep: Rep,
               phase: usize|
     -> Option<usize> {
        if let Some(&i) = index.get(&key) {
            return Some(i);
        }
        if graph.nodes.len() >= limits.node_budget {
            graph.incomplete = true;
            return None;
        }
        let i = graph.nodes.len();
        let terminal = is_terminal(&rep.equation);
        graph.nodes.push(GraphNode { equation: key.0.clone(), stage: key.1, phase, terminal, expanded: false });
        index.insert(key, i);
        reps.push(Some(rep));
        queue.push_back(i);
        Some(i)
    };
    let (key, _) = node_key(&problem.equation, &problem.registry, NodeStage::Root);
    let rep = Rep { equation: problem.equation.clone(), registry: problem.registry.clone() };
    graph.root = add(&mut graph, &mut index, &mut reps, &mut queue, key, rep, 0);
    while let Some(i) = queue.pop_front() {
        let node = graph.nodes[i].clone();
        if node.terminal {
            continue;
        }
        if node.stage == NodeStage::Stage(Stage::Block) && node.phase >= limits.max_phases {
            graph.incomplete = true;
            continue;
        }
        let Rep { equation: eq, registry: mut reg } = reps[i].take().expect("each node is expanded once");
        let (_, renaming) = canonical_form(&eq, &reg);
        let to_canon = |a: LetterId| *renaming.get(&a).unwrap_or(&a);
        graph.nodes[i].expanded = true;
        let children: Vec<(EdgeLabel, NodeStage, usize, Option<StageChoice>)> = match node.stage {
            NodeStage::Root => choices::erase_choices(&eq)
                .into_iter()
                .map(|e| (EdgeLabel::Erase(e), NodeStage::Stage(Stage::Block), 0, None))
                .collect(),
            NodeStage::Stage(stage) => {
                let next_phase = if stage == Stage::Pair2 { node.phase + 1 } else { node.phase };
                let opts: Vec<StageChoice> = match stage {
                    Stage::Block => choices::param_block_choices(&eq, &reg, None).map(StageChoice::Block).collect(),
                    _ => choices::pair_choices(&eq, reg.clone(), None).map(StageChoice::Pair).collect(),
                };
                opts.into_iter()
                    .map(|c| {
                        let label = EdgeLabel::Stage(map_choice(&c, &to_canon));
                        (label, NodeStage::Stage(stage.next()), next_phase, Some(c))
                    })
                    .collect()
            }
        };
        for (label, stage, phase, choice) in children {
            let mark = reg.len();
            let applied = match (&label, &choice) {
                (EdgeLabel::Erase(e), _) => Ok(choices::apply_erase(&eq, e)),
                (_, Some(StageChoice::Block(c))) => apply_block_choice(&eq, &mut reg, c, &block_cap),
                (_, Some(StageChoice::Pair(c))) => apply_pair_choice(&eq, &mut reg, c),
                _ => unreachable!("stage edges carry a choice"),
            };
            let Ok((next, records)) = applied else {
                reg.truncate(mark);
                continue;
            };
            let keep = if is_terminal(&next) {
                terminal_ok(&next)
            } else {
                next.len() <= graph.length_cap && !prune::is_dead(&next, &reg)
            };
            if keep {
                let (key, _) = node_key(&next, &reg, stage);
                let rep = Rep { equation: next, registry: reg.clone() };
                if let Some(to) = add(&mut graph, &mut index, &mut reps, &mut queue, key, rep, phase) {
                    graph.edges.push(GraphEdge { from: i, to, label, records });
                }
            }
            reg.truncate(mark);
        }
    }
    graph
}

fn map_shape(s: &VarShape, f: &dyn Fn(LetterId) -> LetterId) -> VarShape {
    VarShape { first: f(s.first), last: f(s.last), ..*s }
}

/// The same choice with every letter renamed by `f`.
pub fn map_choice(c: &StageChoice, f: &dyn Fn(LetterId) -> LetterId) -> StageChoice {
    match c {
        StageChoice::Block(BlockChoice::Param { pss, empties, partition, witness }) => {
            StageChoice::Block(BlockChoice::Param {
                pss: pss.iter().map(|(&x, s)| (x, map_shape(s, f))).collect(),
                empties: empties.clone(),
                partition: partition.clone(),
                witness: witness.clone(),
            })
        }
        StageChoice::Block(BlockChoice::Explicit { plan }) => StageChoice::Block(BlockChoice::Explicit {
            plan: plan
                .iter()
                .map(|(&x, g)| (x, CutGuess { first: f(g.first), last: f(g.last), ..g.clone() }))
                .collect(),
        }),
        StageChoice::Pair(p) => StageChoice::Pair(PairChoice {
            left: p.left.iter().map(|&a| f(a)).collect(),
            right: p.right.iter().map(|&a| f(a)).collect(),
            pops: p
                .pops
                .iter()
                .map(|(&x, v)| (x, VarPop { left: v.left.map(f), right: v.right.map(f), ..*v }))
                .collect(),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayCaps {
    /// Most root-to-terminal paths followed.
    pub max_paths: usize,
    /// Most edges on a path.
    pub max_depth: usize,
    /// Witnesses tried per parametric block edge, each component at most this.
    pub witness_cap: u64,
    /// Solutions whose expansion is longer than this are dropped.
    pub expansion_cap: usize,
}

impl Default for ReplayCaps {
    fn default() -> Self {
        ReplayCaps { max_paths: 100_000, max_depth: 16, witness_cap: 6, expansion_cap: 64 }
    }
}

/// A solution of the input found by replaying one path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Replayed {
    /// Values over input letters.
    pub substitution: Substitution,
    /// Edge indices from the root.
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReplayStats {
    pub paths: usize,
    /// Replayed values that failed verification on the input. Always zero
    /// unless there is a bug.
    pub rejected: usize,
    pub truncated: bool,
}

// Nodes from which some terminal can be reached.
fn productive(graph: &SolutionGraph) -> Vec<bool> {
    let mut good: Vec<bool> = graph.nodes.iter().map(|n| n.terminal).collect();
    loop {
        let mut changed = false;
        for e in &graph.edges {
            if good[e.to] && !good[e.from] {
                good[e.from] = true;
                changed = true;
            }
        }
        if !changed {
            return good;
        }
    }
}

struct Replayer<'g> {
    graph: &'g SolutionGraph,
    caps: &'g ReplayCaps,
    out_edges: Vec<Vec<usize>>,
    good: Vec<bool>,
    block_cap: BigUint,
    found: BTreeMap<Substitution, Vec<usize>>,
    stats: ReplayStats,
    path: Vec<usize>,
    records: Vec<TransformRecord>,
}

/// Solutions of the root equation read off root-to-terminal paths, keyed
/// by their expanded values. Every one is verified.
pub fn replay_paths(graph: &SolutionGraph, caps: &ReplayCaps) -> (Vec<Replayed>, ReplayStats) {
    let Some(root) = graph.root else {
        return (Vec::new(), ReplayStats::default());
    };
    let mut out_edges = vec![Vec::new(); graph.nodes.len()];
    for (k, e) in graph.edges.iter().enumerate() {
        out_edges[e.from].push(k);
    }
    let mut r = Replayer {
        graph,
        caps,
        out_edges,
        good: productive(graph),
        block_cap: default_block_cap(graph.problem.equation.len().max(1)),
        found: BTreeMap::new(),
        stats: ReplayStats::default(),
        path: Vec::new(),
        records: Vec::new(),
    };
    let mut reg = graph.problem.registry.clone();
    r.walk(root, &graph.problem.equation, &mut reg);
    let out = r.found.into_iter().map(|(substitution, path)| Replayed { substitution, path }).collect();
    (out, r.stats)
}

impl Replayer<'_> {
    fn walk(&mut self, node: usize, eq: &Equation, reg: &mut AlphabetRegistry) {
        if self.stats.paths >= self.caps.max_paths {
            self.stats.truncated = true;
            return;
        }
        if self.graph.nodes[node].terminal {
            self.stats.paths += 1;
            self.finish(eq, reg);
            return;
        }
        if self.path.len() >= self.caps.max_depth {
            self.stats.truncated = true;
            return;
        }
        let (_, renaming) = canonical_form(eq, reg);
        let back: BTreeMap<LetterId, LetterId> = renaming.iter().map(|(&old, &new)| (new, old)).collect();
        let from_canon = |a: LetterId| *back.get(&a).unwrap_or(&a);
        for k in self.out_edges[node].clone() {
            let edge = &self.graph.edges[k];
            if !self.good[edge.to] {
                continue;
            }
            let steps: Vec<Result<(Equation, Vec<TransformRecord>), RecompressError>> = match &edge.label {
                EdgeLabel::Erase(e) => vec![Ok(choices::apply_erase(eq, e))],
                EdgeLabel::Stage(c) => match map_choice(c, &from_canon) {
                    StageChoice::Pair(p) => vec![apply_pair_choice(eq, reg, &p)],
                    StageChoice::Block(b) => self.block_variants(eq, reg, &b),
                },
            };
            for step in steps {
                let Ok((next, recs)) = step else { continue };
                let mark = reg.len();
                let nrec = self.records.len();
                self.records.extend(recs);
                self.path.push(k);
                self.walk(edge.to, &next, reg);
                self.path.pop();
                self.records.truncate(nrec);
                reg.truncate(mark);
            }
        }
    }

    // One application per witness of the edge's block system, up to the cap.
    fn block_variants(
        &self,
        eq: &Equation,
        reg: &mut AlphabetRegistry,
        b: &BlockChoice,
    ) -> Vec<Result<(Equation, Vec<TransformRecord>), RecompressError>> {
        let BlockChoice::Param { pss, empties, partition, .. } = b else {
            return vec![apply_block_choice(eq, reg, b, &self.block_cap)];
        };
        let system = dioph::pref_suff_parametric(eq, pss, empties)
            .map(|(t, _)| dioph::collect_param_blocks(&t))
            .and_then(|blocks| dioph::word_to_diophantine(&blocks, partition));
        let Ok(system) = system else { return Vec::new() };
        enumerate_witnesses(&system, self.caps.witness_cap, usize::MAX)
            .into_iter()
            .map(|w| {
                let choice = BlockChoice::Param {
                    pss: pss.clone(),
                    empties: empties.clone(),
                    partition: partition.clone(),
                    witness: w,
                };
                apply_block_choice(eq, reg, &choice, &self.block_cap)
            })
            .collect()
    }

    fn finish(&mut self, eq: &Equation, reg: &mut AlphabetRegistry) {
        let problem = &self.graph.problem;
        let trivials: Vec<Substitution> = if !eq.has_vars() {
            vec![Substitution::new()]
        } else if eq.vars().len() == 2 {
            reg.input_letters().filter_map(|a| solve_trivial(eq, Some(a))).collect()
        } else {
            solve_trivial(eq, None).into_iter().collect()
        };
        for t in trivials {
            let mark = reg.len();
            if let Ok(mut sigma) = reconstruct(&self.records, &t, reg) {
                for x in problem.equation.vars() {
                    if !sigma.is_assigned(x) {
                        sigma.set(x, Vec::new());
                    }
                }
                let vars = problem.equation.vars();
                let sigma: Substitution = sigma.iter().filter(|(x, _)| vars.contains(x)).map(|(x, w)| (x, w.to_vec())).collect();
                let cap = self.caps.expansion_cap;
                match sigma.expanded(reg, cap) {
                    Some(flat) if flat.iter().map(|(_, w)| w.len()).sum::<usize>() <= cap => {
                        if verify(&problem.equation, &flat, &problem.registry, cap.saturating_mul(problem.equation.len()).max(1))
                            == Verdict::Equal
                        {
                            self.found.entry(flat).or_insert_with(|| self.path.clone());
                        } else {
                            self.stats.rejected += 1;
                        }
                    }
                    _ => {}
                }
            }
            reg.truncate(mark);
        }
    }
}

fn stage_name(s: NodeStage) -> &'static str {
    match s {
        NodeStage::Root => "root",
        NodeStage::Stage(Stage::Block) => "block",
        NodeStage::Stage(Stage::Pair1) => "pair1",
        NodeStage::Stage(Stage::Pair2) => "pair2",
    }
}

/// Short text for an edge.
pub fn edge_summary(graph: &SolutionGraph, e: &GraphEdge) -> String {
    let p = &graph.problem;
    let reg = &p.registry;
    let names = |s: &BTreeSet<LetterId>| s.iter().map(|&a| reg.name(a)).collect::<Vec<_>>().join(",");
    match &e.label {
        EdgeLabel::Erase(vars) if vars.is_empty() => "keep all".into(),
        EdgeLabel::Erase(vars) => {
            format!("erase {}", vars.iter().map(|&x| p.var_name(x)).collect::<Vec<_>>().join(","))
        }
        EdgeLabel::Stage(StageChoice::Pair(c)) => {
            let mut s = format!("pairs {{{}}}x{{{}}}", names(&c.left), names(&c.right));
            for (&x, v) in &c.pops {
                let _ = write!(
                    s,
                    " {}:{}|{}",
                    p.var_name(x),
                    v.left.map(|a| reg.name(a)).unwrap_or_default(),
                    v.right.map(|a| reg.name(a)).unwrap_or_default()
                );
            }
            s
        }
        EdgeLabel::Stage(StageChoice::Block(BlockChoice::Param { pss, empties, partition, .. })) => {
            let mut s = format!("blocks {} classes", partition.len());
            for (&x, sh) in pss {
                let _ = write!(
                    s,
                    " {}:{}..{}{}",
                    p.var_name(x),
                    reg.name(sh.first),
                    reg.name(sh.last),
                    if empties.contains(&x) { "!" } else { "" }
                );
            }
            s
        }
        EdgeLabel::Stage(StageChoice::Block(BlockChoice::Explicit { plan })) => format!("explicit cut of {} vars", plan.len()),
    }
}

/// Graphviz text: nodes labelled with their equations, edges with summaries.
pub fn to_dot(graph: &SolutionGraph) -> String {
    let p = &graph.problem;
    let mut s = String::from("digraph solutions {\n  node [shape=box, fontname=monospace];\n");
    for (i, n) in graph.nodes.iter().enumerate() {
        let label = format!("{} [{} {}]", p.show(&p.registry, &n.equation), stage_name(n.stage), n.phase);
        let style = if n.terminal { ", peripheries=2" } else { "" };
        let _ = writeln!(s, "  n{i} [label={}{style}];", dot_quote(&label));
    }
    for e in &graph.edges {
        let _ = writeln!(s, "  n{} -> n{} [label={}];", e.from, e.to, dot_quote(&edge_summary(graph, e)));
    }
    s.push_str("}\n");
    s
}

fn dot_quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Adjacency document with nodes, edges and flags.
pub fn to_json(graph: &SolutionGraph) -> serde_json::Value {
    let p = &graph.problem;
    let nodes: Vec<_> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            json!({
                "id": i,
                "equation": p.show(&p.registry, &n.equation),
                "stage": stage_name(n.stage),
                "phase": n.phase,
                "terminal": n.terminal,
                "expanded": n.expanded,
            })
        })
        .collect();
    let edges: Vec<_> = graph
        .edges
        .iter()
        .map(|e| {
            json!({
                "from": e.from,
                "to": e.to,
                "summary": edge_summary(graph, e),
                "choice": e.label,
            })
        })
        .collect();
    json!({
        "schema": 1,
        "input": p.to_string(),
        "root": graph.root,
        "incomplete": graph.incomplete,
        "diagnostic": graph.diagnostic,
        "length_cap": graph.length_cap,
        "nodes": nodes,
        "edges": edges,
    })
}
