//! Generators that encode 3-SAT and multicolored clique as formulas.

use crate::formula::{Atom, CounterfactEvent, DomainSpec, Formula, Intervention, LinearConstraint, PostIntEvent, PropEvent, Relation, Term};
use crate::rational::{int, one, zero};
use num_rational::BigRational;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("clause {0} has more than three literals")]
    WideClause(usize),
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("colors must be exactly 1..={k}; vertex `{vertex}` has color {color}")]
    BadColor { vertex: String, color: usize, k: usize },
    #[error("coloring is not proper: edge {0}-{1} joins equal colors")]
    ImproperColoring(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    /// Zero-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    /// From a DIMACS literal (`3` or `-3`, one-based).
    pub fn from_dimacs(x: i64) -> Self {
        assert!(x != 0, "zero is not a literal");
        Literal { var: x.unsigned_abs() as usize - 1, positive: x > 0 }
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }
}

/// 3-CNF formula. Shorter clauses are padded by repeating their last literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfInstance {
    pub vars: usize,
    pub clauses: Vec<[Literal; 3]>,
}

impl CnfInstance {
    /// Builds an instance from DIMACS-style clauses.
    pub fn new(vars: usize, clauses: &[Vec<i64>]) -> Result<Self, ReductionError> {
        let mut out = Vec::with_capacity(clauses.len());
        for (i, c) in clauses.iter().enumerate() {
            let lits: Vec<Literal> = c.iter().map(|&x| Literal::from_dimacs(x)).collect();
            out.push(pad(i, &lits)?);
        }
        let vars = vars.max(out.iter().flatten().map(|l| l.var + 1).max().unwrap_or(0));
        Ok(Self { vars, clauses: out })
    }

    pub fn from_dimacs(text: &str) -> Result<Self, ReductionError> {
        let mut declared = 0usize;
        let mut clauses = Vec::new();
        let mut current: Vec<Literal> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let fields: Vec<&str> = rest.split_whitespace().collect();
                if fields.len() != 3 || fields[0] != "cnf" {
                    return Err(ReductionError::Parse { line: lno, msg: "expected `p cnf <vars> <clauses>`".into() });
                }
                declared = fields[1]
                    .parse()
                    .map_err(|_| ReductionError::Parse { line: lno, msg: "bad variable count".into() })?;
                continue;
            }
            for tok in line.split_whitespace() {
                let x: i64 = tok
                    .parse()
                    .map_err(|_| ReductionError::Parse { line: lno, msg: format!("bad literal `{tok}`") })?;
                if x == 0 {
                    clauses.push(pad(clauses.len(), &current)?);
                    current.clear();
                } else {
                    current.push(Literal::from_dimacs(x));
                }
            }
        }
        if !current.is_empty() {
            clauses.push(pad(clauses.len(), &current)?);
        }
        let used = clauses.iter().flatten().map(|l: &Literal| l.var + 1).max().unwrap_or(0);
        Ok(Self { vars: declared.max(used), clauses })
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.vars, self.clauses.len());
        for c in &self.clauses {
            let lits: Vec<String> = c.iter().map(|l| l.to_dimacs().to_string()).collect();
            out.push_str(&lits.join(" "));
            out.push_str(" 0\n");
        }
        out
    }

    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|l| assignment[l.var] == l.positive))
    }

    /// Every variable occurs exactly twice positively and twice negatively.
    pub fn balanced_occurrences(&self) -> bool {
        let mut count = vec![(0usize, 0usize); self.vars];
        for l in self.clauses.iter().flatten() {
            if l.positive {
                count[l.var].0 += 1;
            } else {
                count[l.var].1 += 1;
            }
        }
        count.iter().all(|&c| c == (2, 2))
    }
}

fn pad(index: usize, lits: &[Literal]) -> Result<[Literal; 3], ReductionError> {
    match *lits {
        [] => Err(ReductionError::EmptyClause(index)),
        [a] => Ok([a, a, a]),
        [a, b] => Ok([a, b, b]),
        [a, b, c] => Ok([a, b, c]),
        _ => Err(ReductionError::WideClause(index)),
    }
}

/// Graph whose vertices carry colors `1..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoredGraph {
    pub names: Vec<String>,
    pub colors: Vec<usize>,
    /// Pairs `(a, b)` with `a < b`.
    pub edges: BTreeSet<(usize, usize)>,
}

impl ColoredGraph {
    pub fn new(colors: Vec<usize>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let names = (1..=colors.len()).map(|i| i.to_string()).collect();
        let edges = edges.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
        Self { names, colors, edges }
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Text format: `v <id> <color>` and `e <id> <id>` lines, `#` comments.
    pub fn parse(text: &str) -> Result<Self, ReductionError> {
        let mut names = Vec::new();
        let mut colors = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut edges = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let lno = i + 1;
            let err = |msg: String| ReductionError::Parse { line: lno, msg };
            let fields: Vec<&str> = line.split('#').next().unwrap_or("").split_whitespace().collect();
            match fields.as_slice() {
                [] => {}
                ["v", id, color] => {
                    if !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                        return Err(err(format!("vertex id `{id}` must be alphanumeric")));
                    }
                    let color: usize = color.parse().map_err(|_| err(format!("bad color `{color}`")))?;
                    if index.insert(id.to_string(), names.len()).is_some() {
                        return Err(err(format!("vertex `{id}` declared twice")));
                    }
                    names.push(id.to_string());
                    colors.push(color);
                }
                ["e", a, b] => {
                    let look = |s: &str| index.get(s).copied().ok_or_else(|| err(format!("unknown vertex `{s}`")));
                    let (a, b) = (look(a)?, look(b)?);
                    if a == b {
                        return Err(err("self-loop".into()));
                    }
                    edges.insert((a.min(b), a.max(b)));
                }
                _ => return Err(err("expected `v <id> <color>` or `e <id> <id>`".into())),
            }
        }
        Ok(Self { names, colors, edges })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (n, c) in self.names.iter().zip(&self.colors) {
            out.push_str(&format!("v {n} {c}\n"));
        }
        for &(a, b) in &self.edges {
            out.push_str(&format!("e {} {}\n", self.names[a], self.names[b]));
        }
        out
    }

    /// Colors lie in `1..=k` and no edge is monochromatic.
    pub fn check_coloring(&self, k: usize) -> Result<(), ReductionError> {
        for (i, &c) in self.colors.iter().enumerate() {
            if c == 0 || c > k {
                return Err(ReductionError::BadColor { vertex: self.names[i].clone(), color: c, k });
            }
        }
        for &(a, b) in &self.edges {
            if self.colors[a] == self.colors[b] {
                return Err(ReductionError::ImproperColoring(self.names[a].clone(), self.names[b].clone()));
            }
        }
        Ok(())
    }
}

fn literal_atom(l: Literal) -> PropEvent {
    PropEvent::atom(l.var, usize::from(l.positive))
}

fn unit(event: PropEvent, relation: Relation, rhs: BigRational) -> LinearConstraint {
    LinearConstraint::new(vec![(one(), Term::prop(event))], relation, rhs)
}

/// One binary variable per CNF variable and `P[g(l1) | g(l2) | g(l3)] = 1`
/// per clause, where `g(x) = (Vx=1)` and `g(!x) = (Vx=0)`.
pub fn gen_threesat_probbase(cnf: &CnfInstance) -> Formula {
    let mut f = Formula::new(DomainSpec::numeric(2), (1..=cnf.vars).map(|i| format!("V{i}")).collect());
    for c in &cnf.clauses {
        let event = literal_atom(c[0]).or(literal_atom(c[1])).or(literal_atom(c[2]));
        f.constraints.push(unit(event, Relation::Eq, one()));
    }
    f
}

/// Variables `V1..Vk` ranging over the vertices; a vertex of the wrong color
/// and a non-adjacent pair both get probability zero.
pub fn gen_clique_probbase(g: &ColoredGraph, k: usize) -> Result<Formula, ReductionError> {
    g.check_coloring(k)?;
    let values: Vec<String> = g.names.iter().map(|n| format!("v{n}")).collect();
    let domain = DomainSpec::new(values).map_err(|e| ReductionError::Parse { line: 0, msg: e.to_string() })?;
    let mut f = Formula::new(domain, (1..=k).map(|i| format!("V{i}")).collect());
    let r = g.names.len();
    for i in 0..k {
        for a in 0..r {
            if g.colors[a] != i + 1 {
                f.constraints.push(unit(PropEvent::atom(i, a), Relation::Le, zero()));
            }
        }
    }
    for a in 0..r {
        for b in a + 1..r {
            if !g.has_edge(a, b) {
                let (i, j) = (g.colors[a] - 1, g.colors[b] - 1);
                let event = PropEvent::atom(i, a).and(PropEvent::atom(j, b));
                f.constraints.push(unit(event, Relation::Le, zero()));
            }
        }
    }
    Ok(f)
}

/// Variables `Vi` and `Wi` (the negated copy) per CNF variable, each pair
/// forced to be ordered one way or the other, plus one linear row per clause.
pub fn gen_threesat_causal(cnf: &CnfInstance) -> Formula {
    let mut names = Vec::with_capacity(2 * cnf.vars);
    for i in 1..=cnf.vars {
        names.push(format!("V{i}"));
        names.push(format!("W{i}"));
    }
    let mut f = Formula::new(DomainSpec::numeric(2), names);
    let post = |target: usize, var: usize| {
        let g = Intervention::new([Atom::new(target, 1)]).expect("single atom");
        Term::new(CounterfactEvent::Leaf(PostIntEvent { intervention: g, body: PropEvent::atom(var, 1) }))
    };
    for i in 0..cnf.vars {
        let (v, w) = (2 * i, 2 * i + 1);
        f.constraints.push(LinearConstraint::new(vec![(one(), post(v, w))], Relation::Eq, zero()));
        f.constraints.push(LinearConstraint::new(vec![(one(), post(w, v))], Relation::Eq, zero()));
    }
    for c in &cnf.clauses {
        // Like terms are merged: (x | x | x) becomes 3 P[V1=1] >= 1.
        let mut lhs: Vec<(BigRational, usize)> = Vec::new();
        for l in c {
            let var = 2 * l.var + usize::from(!l.positive);
            match lhs.iter_mut().find(|(_, v)| *v == var) {
                Some((k, _)) => *k += int(1),
                None => lhs.push((one(), var)),
            }
        }
        let lhs = lhs.into_iter().map(|(k, v)| (k, Term::prop(PropEvent::atom(v, 1)))).collect();
        f.constraints.push(LinearConstraint::new(lhs, Relation::Ge, one()));
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{Breadth, Depth};

    #[test]
    fn dimacs_round_trip() {
        let text = "c demo\np cnf 3 2\n1 -2 3 0\n-1 0\n";
        let cnf = CnfInstance::from_dimacs(text).unwrap();
        assert_eq!(cnf.vars, 3);
        assert_eq!(cnf.clauses[1], [Literal::from_dimacs(-1); 3]);
        assert_eq!(CnfInstance::from_dimacs(&cnf.to_dimacs()).unwrap(), cnf);
        assert!(matches!(CnfInstance::from_dimacs("1 2 3 4 0"), Err(ReductionError::WideClause(0))));
    }

    #[test]
    fn threesat_base_clause() {
        let cnf = CnfInstance::new(3, &[vec![1, -2, 3]]).unwrap();
        let f = gen_threesat_probbase(&cnf);
        assert_eq!(f.to_string(), "domain {0, 1};\nvars V1, V2, V3;\nP[V1=1 | V2=0 | V3=1] = 1;\n");
        assert_eq!(f.classify().depth, Depth::Prob);
        assert_eq!(f.classify().breadth, Breadth::Base);
    }

    #[test]
    fn empty_cnf_gives_empty_formula() {
        let f = gen_threesat_probbase(&CnfInstance::new(0, &[]).unwrap());
        assert!(f.constraints.is_empty());
    }

    #[test]
    fn balanced_occurrence_check() {
        let cnf = CnfInstance::new(1, &[vec![1, 1, -1], vec![-1]]).unwrap();
        assert!(!cnf.balanced_occurrences());
        let cnf = CnfInstance::new(1, &[vec![1, 1, -1], vec![-1, 1, 1], vec![-1, -1, -1]]).unwrap();
        assert!(!cnf.balanced_occurrences());
        let clauses = [vec![1, -1, 2], vec![1, -1, -2], vec![2, 3, -3], vec![-2, 3, -3]];
        assert!(CnfInstance::new(3, &clauses).unwrap().balanced_occurrences());
    }

    #[test]
    fn clique_on_a_triangle() {
        let g = ColoredGraph::new(vec![1, 2, 3], [(0, 1), (1, 2), (0, 2)]);
        let f = gen_clique_probbase(&g, 3).unwrap();
        assert_eq!(f.n(), 3);
        assert!(f.constraints.iter().all(|c| c.lhs[0].1.variables().len() == 1));
        assert_eq!(f.constraints.len(), 6);
    }

    #[test]
    fn clique_on_a_path() {
        let g = ColoredGraph::new(vec![1, 2, 3], [(0, 1), (1, 2)]);
        let f = gen_clique_probbase(&g, 3).unwrap();
        assert_eq!(f.constraints.len(), 7);
        let last = f.constraint_to_string(f.constraints.last().unwrap());
        assert_eq!(last, "P[V1=v1 & V3=v3] <= 0;");
    }

    #[test]
    fn clique_rejects_bad_colors() {
        let g = ColoredGraph::new(vec![1, 4], [(0, 1)]);
        assert!(matches!(gen_clique_probbase(&g, 3), Err(ReductionError::BadColor { .. })));
        let g = ColoredGraph::new(vec![1, 1], [(0, 1)]);
        assert!(matches!(gen_clique_probbase(&g, 2), Err(ReductionError::ImproperColoring(..))));
    }

    #[test]
    fn colored_graph_text() {
        let text = "# triangle\nv a 1\nv b 2\nv c 3\ne a b\ne b c\n";
        let g = ColoredGraph::parse(text).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!(ColoredGraph::parse(&g.to_text()).unwrap(), g);
        assert!(ColoredGraph::parse("e a b\n").is_err());
    }

    #[test]
    fn causal_image_of_a_unit_clause() {
        let cnf = CnfInstance::new(1, &[vec![1, 1, 1]]).unwrap();
        let f = gen_threesat_causal(&cnf);
        assert_eq!(
            f.to_string(),
            "domain {0, 1};\nvars V1, W1;\nP[[V1=1] W1=1] = 0;\nP[[W1=1] V1=1] = 0;\n3 P[V1=1] >= 1;\n"
        );
        assert_eq!(f.classify().depth, Depth::Causal);
        assert_eq!(f.classify().breadth, Breadth::Lin);
    }

    #[test]
    fn causal_primal_graph_is_a_matching() {
        let cnf = CnfInstance::new(3, &[vec![1, -2, 3], vec![-1, 2, -3]]).unwrap();
        let g = gen_threesat_causal(&cnf).primal_graph();
        assert_eq!(g.edges.iter().copied().collect::<Vec<_>>(), vec![(0, 1), (2, 3), (4, 5)]);
    }
}
