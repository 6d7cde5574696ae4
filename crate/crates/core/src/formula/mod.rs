//! Formulas: sets of linear constraints over probabilities of (possibly
//! interventional or counterfactual) events, over a finite shared domain.
//!
//! Variables and domain values are referenced by index into the formula's
//! declaration lists; names only matter for parsing and printing.

mod parse;
mod print;

use num_rational::BigRational;
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("undeclared domain value `{value}` at {line}:{col}")]
    UndeclaredValue { value: String, line: usize, col: usize },
    #[error("conflicting intervention on `{var}`: both `{first}` and `{second}`")]
    ConflictingIntervention { var: String, first: String, second: String },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate domain value `{0}`")]
    DuplicateValue(String),
    #[error("domain must contain at least one value")]
    EmptyDomain,
    #[error("constraint {0} has no terms")]
    EmptyConstraint(usize),
    #[error("constraint {constraint}: atom references out-of-range index")]
    BadIndex { constraint: usize },
}

/// The finite domain `D` shared by all endogenous variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    values: Vec<String>,
}

impl DomainSpec {
    pub fn new<I, S>(values: I) -> Result<Self, FormulaError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let values: Vec<String> = values.into_iter().map(Into::into).collect();
        if values.is_empty() {
            return Err(FormulaError::EmptyDomain);
        }
        let mut seen = BTreeSet::new();
        for v in &values {
            if !seen.insert(v.as_str()) {
                return Err(FormulaError::DuplicateValue(v.clone()));
            }
        }
        Ok(Self { values })
    }

    /// `{0, 1, ..., d-1}`.
    pub fn numeric(d: usize) -> Self {
        Self::new((0..d.max(1)).map(|i| i.to_string())).expect("distinct")
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.values.iter().position(|v| v == symbol)
    }
}

/// `V = v`, with both sides as declaration indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub var: usize,
    pub value: usize,
}

impl Atom {
    pub fn new(var: usize, value: usize) -> Self {
        Self { var, value }
    }
}

/// Propositional event over atoms. Disjunction is desugared on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropEvent {
    Atom(Atom),
    Not(Box<PropEvent>),
    And(Box<PropEvent>, Box<PropEvent>),
}

impl PropEvent {
    pub fn atom(var: usize, value: usize) -> Self {
        PropEvent::Atom(Atom::new(var, value))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        PropEvent::Not(Box::new(self))
    }

    pub fn and(self, other: Self) -> Self {
        PropEvent::And(Box::new(self), Box::new(other))
    }

    /// `a | b` as `!(!a & !b)`.
    pub fn or(self, other: Self) -> Self {
        self.not().and(other.not()).not()
    }

    /// Evaluates against a full assignment indexed by variable.
    pub fn eval(&self, values: &[usize]) -> bool {
        match self {
            PropEvent::Atom(a) => values[a.var] == a.value,
            PropEvent::Not(e) => !e.eval(values),
            PropEvent::And(l, r) => l.eval(values) && r.eval(values),
        }
    }

    /// Evaluates with a caller-supplied truth value for each atom.
    pub fn holds(&self, atom: &impl Fn(&Atom) -> bool) -> bool {
        match self {
            PropEvent::Atom(a) => atom(a),
            PropEvent::Not(e) => !e.holds(atom),
            PropEvent::And(l, r) => l.holds(atom) && r.holds(atom),
        }
    }

    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            PropEvent::Atom(a) => f(a),
            PropEvent::Not(e) => e.for_each_atom(f),
            PropEvent::And(l, r) => {
                l.for_each_atom(f);
                r.for_each_atom(f);
            }
        }
    }

    fn map_atoms(&self, f: &impl Fn(Atom) -> Atom) -> Self {
        match self {
            PropEvent::Atom(a) => PropEvent::Atom(f(*a)),
            PropEvent::Not(e) => PropEvent::Not(Box::new(e.map_atoms(f))),
            PropEvent::And(l, r) => PropEvent::And(Box::new(l.map_atoms(f)), Box::new(r.map_atoms(f))),
        }
    }
}

/// Conjunction of assignments `[V1=v1, ..., Vk=vk]`; empty means no intervention.
///
/// Sorted by variable; a variable appears at most once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intervention {
    assignments: Vec<Atom>,
}

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    /// Collapses identical duplicates. Returns the offending pair on conflict.
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, (Atom, Atom)> {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        for a in atoms {
            if let Some(&prev) = map.get(&a.var) {
                if prev != a.value {
                    return Err((Atom::new(a.var, prev), a));
                }
            }
            map.insert(a.var, a.value);
        }
        Ok(Self { assignments: map.into_iter().map(|(var, value)| Atom { var, value }).collect() })
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.assignments
    }

    pub fn value_of(&self, var: usize) -> Option<usize> {
        self.assignments
            .binary_search_by_key(&var, |a| a.var)
            .ok()
            .map(|i| self.assignments[i].value)
    }
}

/// `[γ] ε`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PostIntEvent {
    pub intervention: Intervention,
    pub body: PropEvent,
}

/// Boolean combination of post-interventional events, all evaluated on the
/// same draw of the hidden variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CounterfactEvent {
    Leaf(PostIntEvent),
    Not(Box<CounterfactEvent>),
    And(Box<CounterfactEvent>, Box<CounterfactEvent>),
}

impl CounterfactEvent {
    pub fn prop(body: PropEvent) -> Self {
        CounterfactEvent::Leaf(PostIntEvent { intervention: Intervention::none(), body })
    }

    pub fn intervened(intervention: Intervention, body: PropEvent) -> Self {
        CounterfactEvent::Leaf(PostIntEvent { intervention, body })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        CounterfactEvent::Not(Box::new(self))
    }

    pub fn and(self, other: Self) -> Self {
        CounterfactEvent::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Self) -> Self {
        self.not().and(other.not()).not()
    }

    /// Combines leaf verdicts with the Boolean structure.
    pub fn eval(&self, leaf: &mut impl FnMut(&PostIntEvent) -> bool) -> bool {
        match self {
            CounterfactEvent::Leaf(p) => leaf(p),
            CounterfactEvent::Not(e) => !e.eval(leaf),
            CounterfactEvent::And(l, r) => l.eval(leaf) && r.eval(leaf),
        }
    }

    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a PostIntEvent)) {
        match self {
            CounterfactEvent::Leaf(p) => f(p),
            CounterfactEvent::Not(e) => e.for_each_leaf(f),
            CounterfactEvent::And(l, r) => {
                l.for_each_leaf(f);
                r.for_each_leaf(f);
            }
        }
    }

    /// The plain propositional event, if every leaf is intervention-free.
    ///
    /// Leaves are merged back into a single `PropEvent` preserving structure.
    pub fn as_prop(&self) -> Option<PropEvent> {
        match self {
            CounterfactEvent::Leaf(p) if p.intervention.is_empty() => Some(p.body.clone()),
            CounterfactEvent::Leaf(_) => None,
            CounterfactEvent::Not(e) => Some(e.as_prop()?.not()),
            CounterfactEvent::And(l, r) => Some(l.as_prop()?.and(r.as_prop()?)),
        }
    }

    fn map_atoms(&self, f: &impl Fn(Atom) -> Atom) -> Self {
        match self {
            CounterfactEvent::Leaf(p) => CounterfactEvent::Leaf(PostIntEvent {
                intervention: Intervention::new(p.intervention.atoms().iter().map(|a| f(*a)))
                    .expect("remapping preserves consistency"),
                body: p.body.map_atoms(f),
            }),
            CounterfactEvent::Not(e) => CounterfactEvent::Not(Box::new(e.map_atoms(f))),
            CounterfactEvent::And(l, r) => CounterfactEvent::And(Box::new(l.map_atoms(f)), Box::new(r.map_atoms(f))),
        }
    }
}

/// A probability term `P[ε]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub event: CounterfactEvent,
}

impl Term {
    pub fn new(event: CounterfactEvent) -> Self {
        Self { event }
    }

    pub fn prop(body: PropEvent) -> Self {
        Self::new(CounterfactEvent::prop(body))
    }

    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        self.event.for_each_leaf(&mut |leaf| {
            leaf.intervention.atoms().iter().for_each(&mut *f);
            leaf.body.for_each_atom(f);
        });
    }

    /// Number of atoms, counting those inside interventions.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.for_each_atom(&mut |_| n += 1);
        n
    }

    /// Every variable the term mentions, including intervened ones.
    pub fn variables(&self) -> BTreeSet<usize> {
        let mut vars = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            vars.insert(a.var);
        });
        vars
    }

    pub fn is_intervention_free(&self) -> bool {
        let mut free = true;
        self.event.for_each_leaf(&mut |leaf| free &= leaf.intervention.is_empty());
        free
    }

    /// All leaves share one intervention, i.e. the term is a single `[γ] ε`.
    fn single_world(&self) -> bool {
        let mut first: Option<&Intervention> = None;
        let mut same = true;
        self.event.for_each_leaf(&mut |leaf| match first {
            None => first = Some(&leaf.intervention),
            Some(g) => same &= *g == leaf.intervention,
        });
        same
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: &BigRational, rhs: &BigRational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub lhs: Vec<(BigRational, Term)>,
    pub relation: Relation,
    pub rhs: BigRational,
}

impl LinearConstraint {
    pub fn new(lhs: Vec<(BigRational, Term)>, relation: Relation, rhs: BigRational) -> Self {
        Self { lhs, relation, rhs }
    }

    /// Evaluates `lhs REL rhs` given each term's probability.
    pub fn holds_with(&self, mut prob: impl FnMut(&Term) -> BigRational) -> bool {
        let mut total = crate::rational::zero();
        for (c, t) in &self.lhs {
            total += c * prob(t);
        }
        self.relation.holds(&total, &self.rhs)
    }

    fn is_base(&self) -> bool {
        let one = BigRational::one();
        match self.lhs.as_slice() {
            [(c, _)] => *c == one,
            [(a, _), (b, _)] => {
                let minus = -one.clone();
                self.rhs == crate::rational::zero()
                    && ((*a == one && *b == minus) || (*a == minus && *b == one))
            }
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub domain: DomainSpec,
    pub variables: Vec<String>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Prob,
    Causal,
    Counterfact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breadth {
    Base,
    Lin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct FragmentClass {
    pub depth: Depth,
    pub breadth: Breadth,
}

impl fmt::Display for FragmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.depth {
            Depth::Prob => "prob",
            Depth::Causal => "causal",
            Depth::Counterfact => "counterfact",
        };
        let b = match self.breadth {
            Breadth::Base => "base",
            Breadth::Lin => "lin",
        };
        write!(f, "{d}/{b}")
    }
}

/// Undirected graph on the formula's variables; `{V, W}` is an edge iff some
/// term mentions both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimalGraph {
    pub vertices: Vec<String>,
    /// Each edge `(a, b)` has `a < b`; sorted.
    pub edges: BTreeSet<(usize, usize)>,
}

impl PrimalGraph {
    pub fn new(vertices: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        Self { vertices, edges }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.len()];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency().iter().map(BTreeSet::len).max().unwrap_or(0)
    }
}

impl Formula {
    pub fn new(domain: DomainSpec, variables: Vec<String>) -> Self {
        Self { domain, variables, constraints: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn d(&self) -> usize {
        self.domain.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.constraints.iter().flat_map(|c| c.lhs.iter().map(|(_, t)| t))
    }

    /// Total atom count over all terms (`|φ|`).
    pub fn size(&self) -> usize {
        self.terms().map(Term::size).sum()
    }

    /// Checks structural invariants and returns the least containing fragment.
    pub fn validate_and_classify(&self) -> Result<FragmentClass, FormulaError> {
        self.validate()?;
        Ok(self.classify())
    }

    pub fn validate(&self) -> Result<(), FormulaError> {
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v) {
                return Err(FormulaError::DuplicateVariable(v.clone()));
            }
        }
        let (n, d) = (self.n(), self.d());
        for (i, c) in self.constraints.iter().enumerate() {
            if c.lhs.is_empty() {
                return Err(FormulaError::EmptyConstraint(i));
            }
            let mut ok = true;
            for (_, t) in &c.lhs {
                t.for_each_atom(&mut |a| ok &= a.var < n && a.value < d);
            }
            if !ok {
                return Err(FormulaError::BadIndex { constraint: i });
            }
        }
        Ok(())
    }

    /// Least fragment containing the formula. Assumes `validate` passed.
    pub fn classify(&self) -> FragmentClass {
        let breadth = if self.constraints.iter().all(LinearConstraint::is_base) {
            Breadth::Base
        } else {
            Breadth::Lin
        };
        let depth = if self.terms().all(Term::is_intervention_free) {
            Depth::Prob
        } else if self.terms().all(Term::single_world) {
            Depth::Causal
        } else {
            Depth::Counterfact
        };
        FragmentClass { depth, breadth }
    }

    pub fn primal_graph(&self) -> PrimalGraph {
        let mut edges = BTreeSet::new();
        for t in self.terms() {
            let vars: Vec<usize> = t.variables().into_iter().collect();
            for (i, &a) in vars.iter().enumerate() {
                for &b in &vars[i + 1..] {
                    edges.insert((a, b));
                }
            }
        }
        PrimalGraph { vertices: self.variables.clone(), edges }
    }

    /// Domain values mentioned by some atom, as a sorted index set.
    pub fn mentioned_values(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        for t in self.terms() {
            t.for_each_atom(&mut |a| {
                seen.insert(a.value);
            });
        }
        seen
    }

    /// Restricts the domain to the mentioned values plus one unmentioned
    /// representative (the first one in declaration order), if any exists.
    ///
    /// Every unmentioned value is indistinguishable to the formula, so they can
    /// all be contracted into a single one. When every value is mentioned the
    /// domain is returned unchanged: adding a value outside the original domain
    /// could turn an unsatisfiable formula into a satisfiable one.
    pub fn reduce_domain(&self) -> Formula {
        let mentioned = self.mentioned_values();
        let spare = (0..self.d()).find(|v| !mentioned.contains(v));
        let keep: Vec<usize> = (0..self.d()).filter(|v| mentioned.contains(v) || Some(*v) == spare).collect();
        let mut remap = vec![usize::MAX; self.d()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let domain = DomainSpec::new(keep.iter().map(|&v| self.domain.values()[v].clone())).expect("nonempty subset");
        let f = |a: Atom| Atom::new(a.var, remap[a.value]);
        let constraints = self
            .constraints
            .iter()
            .map(|c| LinearConstraint {
                lhs: c.lhs.iter().map(|(k, t)| (k.clone(), Term::new(t.event.map_atoms(&f)))).collect(),
                relation: c.relation,
                rhs: c.rhs.clone(),
            })
            .collect();
        Formula { domain, variables: self.variables.clone(), constraints }
    }
}

impl std::str::FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests;
