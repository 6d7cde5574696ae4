//! Satisfiability for intervention-free formulas via an LP over the bag
//! marginals of a nice tree decomposition of the primal graph.
//!
//! The LP has one variable `p[B=v]` per distinct nonempty bag `B` and value
//! tuple `v`, normalization per bag, consistency between adjacent bags, and
//! one row per formula constraint where each term is summed inside a bag that
//! covers its variables. A feasible point is turned back into a structural
//! causal model by walking the decomposition from the root.

use crate::decomp::{compute_decomposition_with_limit, make_nice, verify_nice, DecompError, NiceJson, NiceTreeDecomposition, NodeKind, Strategy, DEFAULT_EXACT_LIMIT};
use crate::formula::{Depth, Formula, FormulaError, PropEvent, Relation};
use crate::lpcore::{solve_feasibility, FarkasCertificate, LpError, LpOptions, LpOutcome, RationalLinearProgram};
use crate::rational::{format_rational, one, parse_rational, zero};
use crate::scm::{Distribution, HiddenVariable, Mechanism, Output, Scm};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("formula is not intervention-free; use the counterfactual solver")]
    NotProb,
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no bag covers the variables of a term in constraint {0}")]
    NoCoveringBag(usize),
    #[error("decomposition does not fit the formula's primal graph")]
    BadDecomposition,
    #[error("malformed certificate: {0}")]
    Certificate(String),
}

/// `d^len` value tuples in mixed radix, first position most significant.
pub(crate) fn decode(mut index: usize, d: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

pub(crate) fn encode(tuple: impl IntoIterator<Item = usize>, d: usize) -> usize {
    tuple.into_iter().fold(0, |acc, x| acc * d + x)
}

fn tuple_count(d: usize, len: usize) -> usize {
    d.checked_pow(len as u32).expect("bag tuple count overflows")
}

/// The LP for one formula and decomposition, with the bookkeeping needed to
/// read a certificate back out of a solution.
#[derive(Debug, Clone)]
pub struct BagLp {
    pub lp: RationalLinearProgram,
    /// Distinct nonempty bags (sorted variable lists), in preorder of first use.
    pub bags: Vec<Vec<usize>>,
    /// First LP variable of each bag.
    pub offsets: Vec<usize>,
    /// `assignment[c][k]`: bag used for term `k` of constraint `c`.
    pub assignment: Vec<Vec<usize>>,
    /// Adjacent distinct bags `(smaller, larger)` that get consistency rows.
    pub pairs: Vec<(usize, usize)>,
}

impl BagLp {
    /// Bag marginals read from an LP point.
    pub fn marginals(&self, point: &[BigRational], d: usize) -> Vec<Vec<BigRational>> {
        self.bags
            .iter()
            .zip(&self.offsets)
            .map(|(b, &o)| point[o..o + tuple_count(d, b.len())].to_vec())
            .collect()
    }
}

/// Distinct nonempty bags in preorder, and each node's bag index.
fn distinct_bags(nt: &NiceTreeDecomposition) -> (Vec<Vec<usize>>, Vec<Option<usize>>) {
    let mut bags: Vec<Vec<usize>> = Vec::new();
    let mut index: BTreeMap<&[usize], usize> = BTreeMap::new();
    let mut node_bag = vec![None; nt.nodes.len()];
    for id in nt.preorder() {
        let bag = &nt.nodes[id].bag;
        if bag.is_empty() {
            continue;
        }
        let k = *index.entry(bag.as_slice()).or_insert_with(|| {
            bags.push(bag.clone());
            bags.len() - 1
        });
        node_bag[id] = Some(k);
    }
    (bags, node_bag)
}

fn adjacent_pairs(nt: &NiceTreeDecomposition, node_bag: &[Option<usize>], bags: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::new();
    for id in nt.preorder() {
        for &c in &nt.nodes[id].children {
            if let (Some(a), Some(b)) = (node_bag[id], node_bag[c]) {
                if a != b {
                    let pair = if bags[a].len() < bags[b].len() { (a, b) } else { (b, a) };
                    if seen.insert(pair) {
                        pairs.push(pair);
                    }
                }
            }
        }
    }
    pairs
}

/// Smallest bag containing `vars`; earlier bags win ties.
fn covering_bag(bags: &[Vec<usize>], vars: &BTreeSet<usize>) -> Option<usize> {
    (0..bags.len())
        .filter(|&k| vars.iter().all(|v| bags[k].binary_search(v).is_ok()))
        .min_by_key(|&k| (bags[k].len(), k))
}

/// Tuples of `bag` (indices) on which `event` holds.
fn satisfying_tuples(event: &PropEvent, bag: &[usize], d: usize) -> Vec<usize> {
    (0..tuple_count(d, bag.len()))
        .filter(|&t| {
            let tuple = decode(t, d, bag.len());
            event.holds(&|a| bag.binary_search(&a.var).is_ok_and(|pos| tuple[pos] == a.value))
        })
        .collect()
}

fn lp_name(f: &Formula, bag: &[usize], tuple: &[usize]) -> String {
    let parts: Vec<String> = bag
        .iter()
        .zip(tuple)
        .map(|(&v, &x)| format!("{}={}", f.variables[v], f.domain.values()[x]))
        .collect();
    format!("p[{}]", parts.join(","))
}

/// Builds the bag-marginal LP of `f` over `nt`.
pub fn build_lp(f: &Formula, nt: &NiceTreeDecomposition) -> Result<BagLp, ProbError> {
    let d = f.d();
    let (bags, node_bag) = distinct_bags(nt);
    let mut lp = RationalLinearProgram::new();
    let mut offsets = Vec::with_capacity(bags.len());
    for bag in &bags {
        offsets.push(lp.num_variables());
        for t in 0..tuple_count(d, bag.len()) {
            lp.add_nonneg(lp_name(f, bag, &decode(t, d, bag.len())));
        }
    }
    for (bag, &o) in bags.iter().zip(&offsets) {
        let vars = (0..tuple_count(d, bag.len())).map(|t| (o + t, one()));
        lp.add_constraint(vars, Relation::Eq, one());
    }
    let pairs = adjacent_pairs(nt, &node_bag, &bags);
    for &(small, large) in &pairs {
        let (sb, lb) = (&bags[small], &bags[large]);
        let extra = *lb.iter().find(|v| sb.binary_search(v).is_err()).expect("bags differ by one variable");
        let pos = lb.binary_search(&extra).expect("present");
        for t in 0..tuple_count(d, sb.len()) {
            let base = decode(t, d, sb.len());
            let mut row = vec![(offsets[small] + t, one())];
            for x in 0..d {
                let mut ext = base.clone();
                ext.insert(pos, x);
                row.push((offsets[large] + encode(ext, d), -one()));
            }
            lp.add_constraint(row, Relation::Eq, zero());
        }
    }
    let mut assignment = Vec::with_capacity(f.constraints.len());
    for (ci, c) in f.constraints.iter().enumerate() {
        let mut row = Vec::new();
        let mut bags_used = Vec::with_capacity(c.lhs.len());
        for (coef, term) in &c.lhs {
            let event = term.event.as_prop().ok_or(ProbError::NotProb)?;
            let k = covering_bag(&bags, &term.variables()).ok_or(ProbError::NoCoveringBag(ci))?;
            bags_used.push(k);
            for t in satisfying_tuples(&event, &bags[k], d) {
                row.push((offsets[k] + t, coef.clone()));
            }
        }
        lp.add_constraint(row, c.relation, c.rhs.clone());
        assignment.push(bags_used);
    }
    Ok(BagLp { lp, bags, offsets, assignment, pairs })
}

/// Bag marginals witnessing satisfiability, with the decomposition they live on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BagMarginalCertificate {
    pub variables: Vec<String>,
    /// Domain the marginals range over; a subset of the formula's domain.
    pub domain: Vec<String>,
    pub decomposition: NiceTreeDecomposition,
    pub bags: Vec<Vec<usize>>,
    pub marginals: Vec<Vec<BigRational>>,
    pub assignment: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbStats {
    pub n: usize,
    pub d: usize,
    pub width: usize,
    pub nodes: usize,
    pub lp_variables: usize,
    pub lp_constraints: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbVerdict {
    Sat(Box<BagMarginalCertificate>),
    Unsat(FarkasCertificate),
}

#[derive(Debug, Clone)]
pub struct ProbOutcome {
    pub verdict: ProbVerdict,
    pub stats: ProbStats,
}

impl ProbOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self.verdict, ProbVerdict::Sat(_))
    }
}

#[derive(Debug, Clone)]
pub struct ProbOptions {
    pub strategy: Strategy,
    pub exact_limit: usize,
    pub lp: LpOptions,
    /// Skip the domain reduction step.
    pub keep_domain: bool,
}

impl Default for ProbOptions {
    fn default() -> Self {
        Self { strategy: Strategy::GreedyMinFill, exact_limit: DEFAULT_EXACT_LIMIT, lp: LpOptions::default(), keep_domain: false }
    }
}

/// Nice decomposition of `f`'s primal graph under `strategy`.
pub fn decompose(f: &Formula, strategy: Strategy, exact_limit: usize) -> Result<NiceTreeDecomposition, ProbError> {
    let g = f.primal_graph();
    Ok(make_nice(&compute_decomposition_with_limit(&g, strategy, exact_limit)?))
}

pub fn solve(f: &Formula, opts: &ProbOptions) -> Result<ProbOutcome, ProbError> {
    let class = f.validate_and_classify()?;
    if class.depth != Depth::Prob {
        return Err(ProbError::NotProb);
    }
    let nt = decompose(f, opts.strategy, opts.exact_limit)?;
    solve_with(f, nt, opts)
}

/// Solves over a caller-supplied decomposition.
pub fn solve_with(f: &Formula, nt: NiceTreeDecomposition, opts: &ProbOptions) -> Result<ProbOutcome, ProbError> {
    let class = f.validate_and_classify()?;
    if class.depth != Depth::Prob {
        return Err(ProbError::NotProb);
    }
    if !verify_nice(&nt, &f.primal_graph()) {
        return Err(ProbError::BadDecomposition);
    }
    let work = if opts.keep_domain { f.clone() } else { f.reduce_domain() };
    let built = build_lp(&work, &nt)?;
    let stats = ProbStats {
        n: work.n(),
        d: work.d(),
        width: nt.width(),
        nodes: nt.nodes.len(),
        lp_variables: built.lp.num_variables(),
        lp_constraints: built.lp.num_constraints(),
    };
    let verdict = match solve_feasibility(&built.lp, &opts.lp)? {
        LpOutcome::Feasible { point } => ProbVerdict::Sat(Box::new(BagMarginalCertificate {
            variables: work.variables.clone(),
            domain: work.domain.values().to_vec(),
            marginals: built.marginals(&point, work.d()),
            decomposition: nt,
            bags: built.bags,
            assignment: built.assignment,
        })),
        LpOutcome::Infeasible { farkas } => ProbVerdict::Unsat(farkas),
    };
    Ok(ProbOutcome { verdict, stats })
}

/// One step of the model construction: variable `var` joins context bag
/// `context` (or the empty bag) to form bag `bag`.
struct Step {
    var: usize,
    context: Option<usize>,
    bag: usize,
}

impl BagMarginalCertificate {
    fn d(&self) -> usize {
        self.domain.len()
    }

    fn bag_index(&self, bag: &[usize]) -> Option<usize> {
        if bag.is_empty() {
            return None;
        }
        self.bags.iter().position(|b| b == bag)
    }

    fn mass(&self, bag: Option<usize>, tuple: &[usize]) -> BigRational {
        match bag {
            None => one(),
            Some(k) => self.marginals[k][encode(tuple.iter().copied(), self.d())].clone(),
        }
    }

    /// Introduction steps in breadth-first order from the root.
    fn steps(&self) -> Vec<Step> {
        let nt = &self.decomposition;
        let mut out = Vec::new();
        for id in nt.bfs() {
            let node = &nt.nodes[id];
            if let NodeKind::Forget(v) = node.kind {
                let child = &nt.nodes[node.children[0]];
                out.push(Step {
                    var: v,
                    context: self.bag_index(&node.bag),
                    bag: self.bag_index(&child.bag).expect("nonempty bag"),
                });
            }
        }
        out
    }

    /// Probability of a full assignment (value indices into `self.domain`)
    /// under the model `reconstruct_scm` builds.
    pub fn joint_probability(&self, assignment: &[usize]) -> BigRational {
        let mut p = one();
        for s in self.steps() {
            let ctx_vars: &[usize] = s.context.map_or(&[], |k| &self.bags[k]);
            let ctx: Vec<usize> = ctx_vars.iter().map(|&v| assignment[v]).collect();
            let full: Vec<usize> = self.bags[s.bag].iter().map(|&v| assignment[v]).collect();
            let denom = self.mass(s.context, &ctx);
            if denom.is_zero() {
                return zero();
            }
            p *= self.mass(Some(s.bag), &full) / denom;
            if p.is_zero() {
                return p;
            }
        }
        p
    }

    /// A model with independent hidden variables whose bag marginals are the
    /// certificate's.
    pub fn reconstruct_scm(&self) -> Scm {
        let d = self.d();
        let mut order = Vec::new();
        let mut mechanisms: BTreeMap<usize, Mechanism> = BTreeMap::new();
        let mut hidden = Vec::new();
        let mut marginals = Vec::new();
        for s in self.steps() {
            let ctx_vars: Vec<usize> = s.context.map_or_else(Vec::new, |k| self.bags[k].clone());
            let bag = &self.bags[s.bag];
            let pos = bag.binary_search(&s.var).expect("introduced variable in bag");
            let mut cases = Vec::new();
            for t in 0..tuple_count(d, ctx_vars.len()) {
                let ctx = decode(t, d, ctx_vars.len());
                let denom = self.mass(s.context, &ctx);
                if denom.is_zero() {
                    cases.push(Output::Const(0));
                    continue;
                }
                let dist: Vec<BigRational> = (0..d)
                    .map(|x| {
                        let mut full = ctx.clone();
                        full.insert(pos, x);
                        self.mass(Some(s.bag), &full) / &denom
                    })
                    .collect();
                let name = if ctx_vars.is_empty() {
                    format!("U_{}", self.variables[s.var])
                } else {
                    let parts: Vec<String> = ctx_vars
                        .iter()
                        .zip(&ctx)
                        .map(|(&v, &x)| format!("{}={}", self.variables[v], self.domain[x]))
                        .collect();
                    format!("U_{}|{}", self.variables[s.var], parts.join(","))
                };
                cases.push(Output::Hidden(hidden.len()));
                hidden.push(HiddenVariable { name, values: self.domain.clone() });
                marginals.push(dist);
            }
            order.push(s.var);
            mechanisms.insert(s.var, Mechanism::Switch { on: ctx_vars, cases });
        }
        // Re-index endogenous references into construction order.
        let mut position = vec![0usize; self.variables.len()];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        let mechanisms = order
            .iter()
            .map(|v| match mechanisms.remove(v).expect("one mechanism per variable") {
                Mechanism::Switch { on, cases } => {
                    Mechanism::Switch { on: on.iter().map(|&j| position[j]).collect(), cases }
                }
                m => m,
            })
            .collect();
        Scm {
            domain: self.domain.clone(),
            variables: order.iter().map(|&v| self.variables[v].clone()).collect(),
            hidden,
            mechanisms,
            distribution: Distribution::Independent(marginals),
        }
    }

    pub fn to_json(&self) -> CertificateJson {
        let names = |bag: &[usize]| bag.iter().map(|&v| self.variables[v].clone()).collect();
        CertificateJson {
            kind: CERTIFICATE_KIND.into(),
            variables: self.variables.clone(),
            domain: self.domain.clone(),
            decomposition: self.decomposition.to_json(&self.variables),
            bags: self
                .bags
                .iter()
                .zip(&self.marginals)
                .map(|(b, m)| BagJson { variables: names(b), marginal: m.iter().map(format_rational).collect() })
                .collect(),
            assignment: self.assignment.clone(),
        }
    }

    pub fn from_json(j: &CertificateJson) -> Result<Self, ProbError> {
        let bad = |m: String| ProbError::Certificate(m);
        if j.kind != CERTIFICATE_KIND {
            return Err(bad(format!("expected kind `{CERTIFICATE_KIND}`, found `{}`", j.kind)));
        }
        let decomposition = NiceTreeDecomposition::from_json(&j.decomposition, &j.variables)?;
        let mut bags = Vec::new();
        let mut marginals = Vec::new();
        for b in &j.bags {
            let mut vars = b
                .variables
                .iter()
                .map(|s| j.variables.iter().position(|v| v == s).ok_or_else(|| bad(format!("unknown variable `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            vars.sort_unstable();
            bags.push(vars);
            marginals.push(
                b.marginal
                    .iter()
                    .map(|s| parse_rational(s).ok_or_else(|| bad(format!("bad rational `{s}`"))))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Ok(Self {
            variables: j.variables.clone(),
            domain: j.domain.clone(),
            decomposition,
            bags,
            marginals,
            assignment: j.assignment.clone(),
        })
    }
}

pub const CERTIFICATE_KIND: &str = "bag-marginal";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub kind: String,
    pub variables: Vec<String>,
    pub domain: Vec<String>,
    pub decomposition: NiceJson,
    pub bags: Vec<BagJson>,
    pub assignment: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagJson {
    pub variables: Vec<String>,
    pub marginal: Vec<String>,
}

/// Exact re-check of a certificate against `f`, independent of the LP code.
pub fn verify_certificate(f: &Formula, cert: &BagMarginalCertificate) -> bool {
    if f.validate().is_err() || f.classify().depth != Depth::Prob || cert.variables != f.variables {
        return false;
    }
    // Certificate values must be formula values; others are simply never taken.
    let value_map: Option<Vec<usize>> = cert.domain.iter().map(|s| f.domain.index_of(s)).collect();
    let Some(value_map) = value_map else { return false };
    if cert.domain.is_empty() || cert.domain.iter().collect::<BTreeSet<_>>().len() != cert.domain.len() {
        return false;
    }
    let d = cert.d();
    let nt = &cert.decomposition;
    if !verify_nice(nt, &f.primal_graph()) {
        return false;
    }
    let (bags, node_bag) = distinct_bags(nt);
    if bags != cert.bags || cert.marginals.len() != bags.len() {
        return false;
    }
    for (bag, m) in bags.iter().zip(&cert.marginals) {
        if m.len() != tuple_count(d, bag.len()) || m.iter().any(Signed::is_negative) {
            return false;
        }
        if m.iter().sum::<BigRational>() != one() {
            return false;
        }
    }
    // Consistency along every tree edge between distinct bags.
    for id in 0..nt.nodes.len() {
        for &c in &nt.nodes[id].children {
            let (Some(a), Some(b)) = (node_bag[id], node_bag[c]) else { continue };
            if a == b {
                continue;
            }
            let (small, large) = if bags[a].len() < bags[b].len() { (a, b) } else { (b, a) };
            let mut summed = vec![zero(); cert.marginals[small].len()];
            for (t, p) in cert.marginals[large].iter().enumerate() {
                let tuple = decode(t, d, bags[large].len());
                let proj = bags[small].iter().map(|v| tuple[bags[large].binary_search(v).expect("superset")]);
                summed[encode(proj, d)] += p;
            }
            if summed != cert.marginals[small] {
                return false;
            }
        }
    }
    if cert.assignment.len() != f.constraints.len() {
        return false;
    }
    for (c, used) in f.constraints.iter().zip(&cert.assignment) {
        if used.len() != c.lhs.len() {
            return false;
        }
        let mut total = zero();
        for ((coef, term), &k) in c.lhs.iter().zip(used) {
            let Some(bag) = bags.get(k) else { return false };
            if !term.variables().iter().all(|v| bag.binary_search(v).is_ok()) {
                return false;
            }
            let Some(event) = term.event.as_prop() else { return false };
            for (t, p) in cert.marginals[k].iter().enumerate() {
                let tuple = decode(t, d, bag.len());
                let holds = event.holds(&|a| {
                    let pos = bag.binary_search(&a.var).expect("covered");
                    value_map[tuple[pos]] == a.value
                });
                if holds {
                    total += coef * p;
                }
            }
        }
        if !c.relation.holds(&total, &c.rhs) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_formula, random_prob_formula, EXAMPLE_FORMULA};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn sat_cert(f: &Formula) -> BagMarginalCertificate {
        match solve(f, &ProbOptions::default()).unwrap().verdict {
            ProbVerdict::Sat(c) => *c,
            ProbVerdict::Unsat(_) => panic!("expected SAT"),
        }
    }

    #[test]
    fn example_lp_shape() {
        let f = example_formula();
        let nt = decompose(&f, Strategy::GreedyMinFill, DEFAULT_EXACT_LIMIT).unwrap();
        let built = build_lp(&f, &nt).unwrap();
        // Bags {V1}, {V1,V3}, {V3}, {V3,V4}, {V2,V3}, {V2}: 3*2 + 3*4 variables.
        assert_eq!(built.lp.num_variables(), 18);
        assert_eq!(built.pairs.len(), 5);
        // 6 normalizations + 5 pairs * 2 tuples + 3 formula rows.
        assert_eq!(built.lp.num_constraints(), 6 + 10 + 3);
        let first = &built.lp.constraints()[16];
        let names: Vec<&str> = first.coeffs.iter().map(|(j, _)| built.lp.names()[*j].as_str()).collect();
        assert_eq!(names, vec!["p[V1=1,V3=1]"]);
        assert_eq!(first.rhs, q(1, 2));
    }

    #[test]
    fn single_variable_lp() {
        let f: Formula = "domain {0,1}; vars V; P[V=0] >= 1;".parse().unwrap();
        let nt = decompose(&f, Strategy::GreedyMinFill, DEFAULT_EXACT_LIMIT).unwrap();
        let built = build_lp(&f, &nt).unwrap();
        assert_eq!(built.lp.names(), &["p[V=0]", "p[V=1]"]);
        assert_eq!(built.lp.num_constraints(), 2);
        assert!(solve(&f, &ProbOptions::default()).unwrap().is_sat());
    }

    #[test]
    fn example_is_sat_and_certified() {
        let f = example_formula();
        let cert = sat_cert(&f);
        assert!(verify_certificate(&f, &cert));
        let m = cert.reconstruct_scm();
        assert!(m.satisfies(&f).unwrap());
    }

    #[test]
    fn contradictory_marginals_are_unsat() {
        let f: Formula = "domain {0,1}; vars V; P[V=0] = 1; P[V=1] = 1;".parse().unwrap();
        let out = solve(&f, &ProbOptions::default()).unwrap();
        assert!(!out.is_sat());
    }

    #[test]
    fn interventional_formulas_are_refused() {
        let f: Formula = "domain {0,1}; vars V, W; P[[V=1] W=1] = 0;".parse().unwrap();
        assert_eq!(solve(&f, &ProbOptions::default()).unwrap_err(), ProbError::NotProb);
    }

    #[test]
    fn empty_formula_is_sat() {
        let f: Formula = "".parse().unwrap();
        let cert = sat_cert(&f);
        assert!(verify_certificate(&f, &cert));
        assert!(cert.reconstruct_scm().satisfies(&f).unwrap());
    }

    #[test]
    fn perturbed_certificate_fails() {
        let f = example_formula();
        let mut cert = sat_cert(&f);
        let k = cert.marginals.iter().position(|m| m.len() == 4).unwrap();
        cert.marginals[k][0] += q(1, 100);
        cert.marginals[k][1] -= q(1, 100);
        // Normalization still holds but consistency with a neighbour breaks.
        assert!(!verify_certificate(&f, &cert));
    }

    #[test]
    fn certificate_json_round_trip() {
        let f = example_formula();
        let cert = sat_cert(&f);
        let text = serde_json::to_string(&cert.to_json()).unwrap();
        let back: CertificateJson = serde_json::from_str(&text).unwrap();
        assert_eq!(BagMarginalCertificate::from_json(&back).unwrap(), cert);
    }

    #[test]
    fn deterministic_chain_gives_point_masses() {
        let f: Formula = "domain {0,1}; vars A, B; P[A=1] = 1; P[A=1 & B=0] = 1;".parse().unwrap();
        let cert = sat_cert(&f);
        let m = cert.reconstruct_scm();
        let Distribution::Independent(margs) = &m.distribution else { panic!() };
        for marg in margs {
            assert!(marg.iter().all(|p| p.is_zero() || *p == one()));
        }
        let s = m.simplify_deterministic();
        assert!(s.hidden.is_empty());
        assert!(s.satisfies(&f).unwrap());
    }

    #[test]
    fn raised_example_rhs() {
        let f: Formula = EXAMPLE_FORMULA.replace("1/3", "3/4").parse().unwrap();
        let out = solve(&f, &ProbOptions::default()).unwrap();
        let oracle = crate::oracle::prob_joint_oracle(&f, crate::oracle::DEFAULT_JOINT_CAP).unwrap();
        assert_eq!(out.is_sat(), oracle.is_sat());
    }

    #[test]
    fn joint_probability_recovers_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..60 {
            let f = random_prob_formula(&mut rng, 3, 3, 3);
            let out = solve(&f, &ProbOptions::default()).unwrap();
            let ProbVerdict::Sat(cert) = out.verdict else { continue };
            let (n, d) = (cert.variables.len(), cert.domain.len());
            let mut sums: Vec<Vec<BigRational>> = cert.marginals.iter().map(|m| vec![zero(); m.len()]).collect();
            let mut total = zero();
            for a in 0..tuple_count(d, n) {
                let full = decode(a, d, n);
                let p = cert.joint_probability(&full);
                total += &p;
                for (k, bag) in cert.bags.iter().enumerate() {
                    sums[k][encode(bag.iter().map(|&v| full[v]), d)] += &p;
                }
            }
            assert_eq!(total, one());
            assert_eq!(sums, cert.marginals);
            checked += 1;
        }
        assert!(checked > 10, "only {checked} satisfiable samples");
    }

    #[test]
    fn example_joint_probability() {
        // The marginals from the worked solution: V1 = V3 = V4 a fair coin, V2 = 1.
        let f = example_formula();
        let nt = decompose(&f, Strategy::GreedyMinFill, DEFAULT_EXACT_LIMIT).unwrap();
        let built = build_lp(&f, &nt).unwrap();
        let point: Vec<BigRational> = built
            .lp
            .names()
            .iter()
            .map(|name| match name.as_str() {
                "p[V2=1]" => one(),
                "p[V1=0]" | "p[V1=1]" | "p[V3=0]" | "p[V3=1]" => q(1, 2),
                "p[V1=0,V3=0]" | "p[V1=1,V3=1]" | "p[V2=1,V3=0]" | "p[V2=1,V3=1]" | "p[V3=0,V4=0]"
                | "p[V3=1,V4=1]" => q(1, 2),
                _ => zero(),
            })
            .collect();
        assert!(built.lp.check_point(&point));
        let cert = BagMarginalCertificate {
            variables: f.variables.clone(),
            domain: f.domain.values().to_vec(),
            marginals: built.marginals(&point, 2),
            decomposition: nt,
            bags: built.bags,
            assignment: built.assignment,
        };
        assert!(verify_certificate(&f, &cert));
        assert_eq!(cert.joint_probability(&[1, 1, 1, 1]), q(1, 2));
        assert_eq!(cert.joint_probability(&[1, 0, 1, 1]), zero());
        let m = cert.reconstruct_scm();
        let names: Vec<&str> = m.hidden.iter().map(|h| h.name.as_str()).collect();
        assert_eq!(&names[..3], &["U_V1", "U_V3|V1=0", "U_V3|V1=1"]);
        let Distribution::Independent(margs) = &m.distribution else { panic!() };
        assert_eq!(margs[0], vec![q(1, 2), q(1, 2)]);
        assert_eq!(margs[1], vec![one(), zero()]);
        assert_eq!(margs[2], vec![zero(), one()]);
        assert!(m.satisfies(&f).unwrap());
    }
}
