//! Tree decompositions of primal graphs: greedy min-fill and exact
//! elimination orders, nice normalization, verification and PACE/JSON I/O.

use crate::formula::PrimalGraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// Largest graph the exact strategy accepts by default.
pub const DEFAULT_EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompError {
    #[error("exact treewidth limited to {limit} vertices, graph has {n}")]
    ExactTooLarge { n: usize, limit: usize },
    #[error("malformed decomposition: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    GreedyMinFill,
    Exact,
}

/// Bags on the nodes of a tree, given as an undirected edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl TreeDecomposition {
    /// Largest bag size minus one (zero for an empty decomposition).
    pub fn width(&self) -> usize {
        self.bags.iter().map(BTreeSet::len).max().unwrap_or(0).saturating_sub(1)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        adj
    }

    /// Tree shape, vertex and edge coverage, and connectivity of occurrences.
    pub fn is_valid_for(&self, g: &PrimalGraph) -> bool {
        let m = self.bags.len();
        if m == 0 || self.edges.len() != m - 1 {
            return false;
        }
        if self.edges.iter().any(|&(a, b)| a >= m || b >= m || a == b) {
            return false;
        }
        let adj = self.adjacency();
        if reachable(&adj, 0, |_| true).len() != m {
            return false;
        }
        if self.bags.iter().flatten().any(|&v| v >= g.len()) {
            return false;
        }
        for v in 0..g.len() {
            let holders: Vec<usize> = (0..m).filter(|&i| self.bags[i].contains(&v)).collect();
            let Some(&first) = holders.first() else { return false };
            if reachable(&adj, first, |i| self.bags[i].contains(&v)).len() != holders.len() {
                return false;
            }
        }
        g.edges.iter().all(|&(a, b)| self.bags.iter().any(|bag| bag.contains(&a) && bag.contains(&b)))
    }

    /// PACE `.td` text (1-based bag and vertex ids).
    pub fn to_pace(&self, n: usize) -> String {
        let max_bag = self.bags.iter().map(BTreeSet::len).max().unwrap_or(0);
        let mut out = format!("s td {} {} {}\n", self.bags.len(), max_bag, n);
        for (i, bag) in self.bags.iter().enumerate() {
            let _ = write!(out, "b {}", i + 1);
            for v in bag {
                let _ = write!(out, " {}", v + 1);
            }
            out.push('\n');
        }
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{} {}", a + 1, b + 1);
        }
        out
    }

    /// Parses PACE `.td` text; returns the decomposition and the vertex count.
    pub fn from_pace(text: &str) -> Result<(Self, usize), DecompError> {
        let bad = |line: usize, msg: &str| DecompError::Malformed(format!("line {line}: {msg}"));
        let mut header: Option<(usize, usize)> = None;
        let mut bags: Vec<Option<BTreeSet<usize>>> = Vec::new();
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lno = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad(lno, "expected a number"));
            match fields.first().copied() {
                None | Some("c") => {}
                Some("s") => {
                    if fields.len() != 5 || fields[1] != "td" {
                        return Err(bad(lno, "expected `s td <bags> <max bag> <vertices>`"));
                    }
                    let nb = num(fields[2])?;
                    header = Some((nb, num(fields[4])?));
                    bags = vec![None; nb];
                }
                Some("b") => {
                    let (nb, n) = header.ok_or_else(|| bad(lno, "bag before header"))?;
                    let id = num(fields.get(1).ok_or_else(|| bad(lno, "missing bag id"))?)?;
                    if id == 0 || id > nb {
                        return Err(bad(lno, "bag id out of range"));
                    }
                    let mut bag = BTreeSet::new();
                    for f in &fields[2..] {
                        let v = num(f)?;
                        if v == 0 || v > n {
                            return Err(bad(lno, "vertex out of range"));
                        }
                        bag.insert(v - 1);
                    }
                    bags[id - 1] = Some(bag);
                }
                Some(_) => {
                    let (nb, _) = header.ok_or_else(|| bad(lno, "edge before header"))?;
                    if fields.len() != 2 {
                        return Err(bad(lno, "expected `<bag> <bag>`"));
                    }
                    let (a, b) = (num(fields[0])?, num(fields[1])?);
                    if a == 0 || b == 0 || a > nb || b > nb {
                        return Err(bad(lno, "bag id out of range"));
                    }
                    edges.push((a - 1, b - 1));
                }
            }
        }
        let (_, n) = header.ok_or_else(|| DecompError::Malformed("missing `s td` header".into()))?;
        let bags = bags
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.ok_or_else(|| DecompError::Malformed(format!("bag {} not listed", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((TreeDecomposition { bags, edges }, n))
    }
}

fn reachable(adj: &[Vec<usize>], start: usize, allowed: impl Fn(usize) -> bool) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if allowed(y) && seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen
}

/// Min-fill elimination order; ties go to the earlier-declared vertex.
pub fn min_fill_order(g: &PrimalGraph) -> Vec<usize> {
    let mut adj = g.adjacency();
    let mut alive: BTreeSet<usize> = (0..g.len()).collect();
    let mut order = Vec::with_capacity(g.len());
    while !alive.is_empty() {
        let fill = |v: usize| {
            let nb: Vec<usize> = adj[v].iter().copied().collect();
            let mut missing = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                missing += nb[i + 1..].iter().filter(|&&b| !adj[a].contains(&b)).count();
            }
            missing
        };
        let v = *alive.iter().min_by_key(|&&v| (fill(v), v)).expect("nonempty");
        eliminate(&mut adj, v);
        alive.remove(&v);
        order.push(v);
    }
    order
}

fn eliminate(adj: &mut [BTreeSet<usize>], v: usize) {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    for &a in &nb {
        adj[a].remove(&v);
        for &b in &nb {
            if a != b {
                adj[a].insert(b);
            }
        }
    }
    adj[v].clear();
}

/// Decomposition induced by eliminating vertices in `order`, with bags that
/// are subsets of a neighbouring bag contracted away.
pub fn decomposition_from_order(g: &PrimalGraph, order: &[usize]) -> TreeDecomposition {
    let n = g.len();
    if n == 0 {
        return TreeDecomposition { bags: vec![BTreeSet::new()], edges: Vec::new() };
    }
    assert_eq!(order.len(), n, "order must list every vertex");
    let mut position = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        position[v] = i;
    }
    let mut adj = g.adjacency();
    let mut bags = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    for &v in order {
        let later: BTreeSet<usize> = adj[v].clone();
        parent.push(later.iter().min_by_key(|&&w| position[w]).map(|&w| position[w]));
        let mut bag = later;
        bag.insert(v);
        bags.push(bag);
        eliminate(&mut adj, v);
    }
    // Join the forest's roots into one tree.
    let roots: Vec<usize> = (0..n).filter(|&i| parent[i].is_none()).collect();
    let mut edges: Vec<(usize, usize)> = (0..n).filter_map(|i| parent[i].map(|p| (i, p))).collect();
    if let Some((&last, rest)) = roots.split_last() {
        edges.extend(rest.iter().map(|&r| (r, last)));
    }
    contract(bags, edges)
}

/// Merges every bag contained in a neighbour into that neighbour.
fn contract(mut bags: Vec<BTreeSet<usize>>, edges: Vec<(usize, usize)>) -> TreeDecomposition {
    let m = bags.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut alive = vec![true; m];
    loop {
        let found = (0..m)
            .filter(|&i| alive[i])
            .find_map(|i| adj[i].iter().find(|&&j| bags[i].is_subset(&bags[j])).map(|&j| (i, j)));
        let Some((i, j)) = found else { break };
        let others: Vec<usize> = adj[i].iter().copied().filter(|&k| k != j).collect();
        for k in others {
            adj[k].remove(&i);
            adj[k].insert(j);
            adj[j].insert(k);
        }
        adj[j].remove(&i);
        adj[i].clear();
        alive[i] = false;
        bags[i].clear();
    }
    let mut index = vec![usize::MAX; m];
    let mut kept = Vec::new();
    for i in 0..m {
        if alive[i] {
            index[i] = kept.len();
            kept.push(std::mem::take(&mut bags[i]));
        }
    }
    let mut out_edges = Vec::new();
    for i in 0..m {
        for &j in &adj[i] {
            if i < j && alive[i] && alive[j] {
                out_edges.push((index[i], index[j]));
            }
        }
    }
    TreeDecomposition { bags: kept, edges: out_edges }
}

/// Treewidth and an optimal elimination order, by dynamic programming over
/// vertex subsets. `limit` bounds the vertex count.
pub fn exact_order(g: &PrimalGraph, limit: usize) -> Result<(usize, Vec<usize>), DecompError> {
    let n = g.len();
    if n > limit || n > 24 {
        return Err(DecompError::ExactTooLarge { n, limit: limit.min(24) });
    }
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let nbr: Vec<u32> = g.adjacency().iter().map(|s| s.iter().fold(0u32, |m, &v| m | (1 << v))).collect();
    // q(S, v): vertices outside S ∪ {v} reachable from v through S.
    let q = |s: u32, v: usize| -> u32 {
        let mut reach = 1u32 << v;
        let mut frontier = reach;
        while frontier != 0 {
            let mut next = 0u32;
            let mut f = frontier;
            while f != 0 {
                let x = f.trailing_zeros() as usize;
                f &= f - 1;
                next |= nbr[x] & s;
            }
            frontier = next & !reach;
            reach |= next;
        }
        let mut out = 0u32;
        let mut r = reach;
        while r != 0 {
            let x = r.trailing_zeros() as usize;
            r &= r - 1;
            out |= nbr[x];
        }
        (out & !s & !(1 << v)).count_ones()
    };
    let full = (1u32 << n) - 1;
    let size = 1usize << n;
    // tw[S] + 1, so that the empty set is 0.
    let mut best = vec![u32::MAX; size];
    let mut choice = vec![0u8; size];
    best[0] = 0;
    for s in 1..=full {
        let mut bits = s;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let rest = s & !(1 << v);
            let cand = best[rest as usize].max(q(rest, v) + 1);
            if cand < best[s as usize] {
                best[s as usize] = cand;
                choice[s as usize] = v as u8;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let v = choice[s as usize] as usize;
        order.push(v);
        s &= !(1 << v);
    }
    order.reverse();
    Ok(((best[full as usize] - 1) as usize, order))
}

pub fn compute_decomposition(g: &PrimalGraph, strategy: Strategy) -> Result<TreeDecomposition, DecompError> {
    compute_decomposition_with_limit(g, strategy, DEFAULT_EXACT_LIMIT)
}

pub fn compute_decomposition_with_limit(
    g: &PrimalGraph,
    strategy: Strategy,
    exact_limit: usize,
) -> Result<TreeDecomposition, DecompError> {
    let order = match strategy {
        Strategy::GreedyMinFill => min_fill_order(g),
        Strategy::Exact => exact_order(g, exact_limit)?.1,
    };
    Ok(decomposition_from_order(g, &order))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Leaf,
    Introduce(usize),
    Forget(usize),
    Join,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceNode {
    /// Sorted variable indices.
    pub bag: Vec<usize>,
    pub kind: NodeKind,
    pub children: Vec<usize>,
}

/// Rooted decomposition with empty root and leaf bags whose other nodes
/// introduce, forget or join.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NiceTreeDecomposition {
    pub nodes: Vec<NiceNode>,
    pub root: usize,
}

impl NiceTreeDecomposition {
    pub fn width(&self) -> usize {
        self.nodes.iter().map(|n| n.bag.len()).max().unwrap_or(0).saturating_sub(1)
    }

    /// Node ids in preorder from the root, children in stored order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(x) = stack.pop() {
            out.push(x);
            stack.extend(self.nodes[x].children.iter().rev());
        }
        out
    }

    /// Node ids in breadth-first order from the root.
    pub fn bfs(&self) -> Vec<usize> {
        let mut out = vec![self.root];
        let mut i = 0;
        while i < out.len() {
            out.extend(self.nodes[out[i]].children.iter().copied());
            i += 1;
        }
        out
    }

    /// `parent[i]`, `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                parent[c] = Some(i);
            }
        }
        parent
    }

    pub fn to_json(&self, names: &[String]) -> NiceJson {
        let name = |v: usize| names[v].clone();
        NiceJson {
            root: self.root,
            nodes: self
                .nodes
                .iter()
                .map(|n| {
                    let (kind, variable) = match n.kind {
                        NodeKind::Leaf => ("leaf", None),
                        NodeKind::Introduce(v) => ("introduce", Some(name(v))),
                        NodeKind::Forget(v) => ("forget", Some(name(v))),
                        NodeKind::Join => ("join", None),
                    };
                    NiceNodeJson {
                        kind: kind.into(),
                        variable,
                        bag: n.bag.iter().map(|&v| name(v)).collect(),
                        children: n.children.clone(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(j: &NiceJson, names: &[String]) -> Result<Self, DecompError> {
        let lookup = |s: &str| {
            names.iter().position(|n| n == s).ok_or_else(|| DecompError::Malformed(format!("unknown variable `{s}`")))
        };
        let mut nodes = Vec::with_capacity(j.nodes.len());
        for n in &j.nodes {
            let var = || -> Result<usize, DecompError> {
                lookup(n.variable.as_deref().ok_or_else(|| DecompError::Malformed(format!("{} without variable", n.kind)))?)
            };
            let kind = match n.kind.as_str() {
                "leaf" => NodeKind::Leaf,
                "introduce" => NodeKind::Introduce(var()?),
                "forget" => NodeKind::Forget(var()?),
                "join" => NodeKind::Join,
                other => return Err(DecompError::Malformed(format!("unknown node kind `{other}`"))),
            };
            let mut bag = n.bag.iter().map(|s| lookup(s)).collect::<Result<Vec<_>, _>>()?;
            bag.sort_unstable();
            if n.children.iter().any(|&c| c >= j.nodes.len()) {
                return Err(DecompError::Malformed("child id out of range".into()));
            }
            nodes.push(NiceNode { bag, kind, children: n.children.clone() });
        }
        if j.root >= nodes.len() {
            return Err(DecompError::Malformed("root id out of range".into()));
        }
        Ok(Self { nodes, root: j.root })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceJson {
    pub root: usize,
    pub nodes: Vec<NiceNodeJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceNodeJson {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
    pub bag: Vec<String>,
    pub children: Vec<usize>,
}

struct NiceBuilder {
    nodes: Vec<NiceNode>,
}

impl NiceBuilder {
    fn push(&mut self, bag: Vec<usize>, kind: NodeKind, children: Vec<usize>) -> usize {
        self.nodes.push(NiceNode { bag, kind, children });
        self.nodes.len() - 1
    }

    /// Walks from `from` (whose bag is `have`) to a node with bag `want`:
    /// forget the surplus in descending order, then introduce ascending.
    fn bridge(&mut self, mut from: usize, have: &BTreeSet<usize>, want: &BTreeSet<usize>) -> usize {
        let mut bag: BTreeSet<usize> = have.clone();
        for &v in have.difference(want).collect::<Vec<_>>().iter().rev() {
            bag.remove(v);
            from = self.push(bag.iter().copied().collect(), NodeKind::Forget(*v), vec![from]);
        }
        for &v in want.difference(have) {
            bag.insert(v);
            from = self.push(bag.iter().copied().collect(), NodeKind::Introduce(v), vec![from]);
        }
        from
    }

    fn build(&mut self, t: usize, children: &[Vec<usize>], bags: &[BTreeSet<usize>]) -> usize {
        let mut tops = Vec::new();
        if children[t].is_empty() {
            let leaf = self.push(Vec::new(), NodeKind::Leaf, Vec::new());
            tops.push(self.bridge(leaf, &BTreeSet::new(), &bags[t]));
        }
        for &c in &children[t] {
            let sub = self.build(c, children, bags);
            tops.push(self.bridge(sub, &bags[c], &bags[t]));
        }
        let bag: Vec<usize> = bags[t].iter().copied().collect();
        let mut acc = tops[0];
        for &next in &tops[1..] {
            acc = self.push(bag.clone(), NodeKind::Join, vec![acc, next]);
        }
        acc
    }
}

/// Nice form of `t`, rooted at node 0.
pub fn make_nice(t: &TreeDecomposition) -> NiceTreeDecomposition {
    let mut b = NiceBuilder { nodes: Vec::new() };
    if t.bags.is_empty() {
        let leaf = b.push(Vec::new(), NodeKind::Leaf, Vec::new());
        return NiceTreeDecomposition { nodes: b.nodes, root: leaf };
    }
    let adj = t.adjacency();
    let mut children = vec![Vec::new(); t.bags.len()];
    let mut seen = vec![false; t.bags.len()];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                children[x].push(y);
                queue.push_back(y);
            }
        }
    }
    let top = b.build(0, &children, &t.bags);
    let root = b.bridge(top, &t.bags[0], &BTreeSet::new());
    NiceTreeDecomposition { nodes: b.nodes, root }
}

/// Checks every defining property of a nice tree decomposition of `g`.
pub fn verify_nice(nt: &NiceTreeDecomposition, g: &PrimalGraph) -> bool {
    let m = nt.nodes.len();
    if nt.root >= m || !nt.nodes[nt.root].bag.is_empty() {
        return false;
    }
    // Tree shape: each non-root node has exactly one parent, all reachable.
    let mut indegree = vec![0usize; m];
    for n in &nt.nodes {
        for &c in &n.children {
            if c >= m {
                return false;
            }
            indegree[c] += 1;
        }
    }
    if indegree[nt.root] != 0 || (0..m).any(|i| i != nt.root && indegree[i] != 1) {
        return false;
    }
    if nt.bfs().len() != m {
        return false;
    }
    for n in &nt.nodes {
        if n.bag.windows(2).any(|w| w[0] >= w[1]) || n.bag.iter().any(|&v| v >= g.len()) {
            return false;
        }
        let child = |k: usize| &nt.nodes[n.children[k]].bag;
        let ok = match n.kind {
            NodeKind::Leaf => n.children.is_empty() && n.bag.is_empty(),
            NodeKind::Join => n.children.len() == 2 && *child(0) == n.bag && *child(1) == n.bag,
            NodeKind::Introduce(v) => {
                n.children.len() == 1 && !child(0).contains(&v) && {
                    let mut expect = child(0).clone();
                    expect.push(v);
                    expect.sort_unstable();
                    expect == n.bag
                }
            }
            NodeKind::Forget(v) => {
                n.children.len() == 1 && child(0).contains(&v) && {
                    let expect: Vec<usize> = child(0).iter().copied().filter(|&x| x != v).collect();
                    expect == n.bag
                }
            }
        };
        if !ok {
            return false;
        }
    }
    // Each variable occurs in exactly one connected subtree.
    let parent = nt.parents();
    for v in 0..g.len() {
        let tops = (0..m)
            .filter(|&i| nt.nodes[i].bag.contains(&v))
            .filter(|&i| parent[i].is_none_or(|p| !nt.nodes[p].bag.contains(&v)))
            .count();
        if tops != 1 {
            return false;
        }
    }
    g.edges.iter().all(|&(a, b)| nt.nodes.iter().any(|n| n.bag.contains(&a) && n.bag.contains(&b)))
}
