//! Satisfiability for interventional and counterfactual formulas.
//!
//! For each ordering of the variables, every model is equivalent to one with
//! a single hidden variable `U` ranging over tuples `q = (q_1, ..., q_n)`,
//! where `q_i` is a function from the values of the first `i - 1` variables
//! to `D`. The formula becomes an LP over the probabilities `p_q`.

use crate::formula::{Depth, Formula, FormulaError, Intervention, Relation, Term};
use crate::lpcore::{solve_feasibility, FarkasCertificate, LpError, LpOptions, LpOutcome, RationalLinearProgram};
use crate::par;
use crate::rational::{format_rational, one, parse_rational};
use crate::scm::{Distribution, HiddenVariable, Input, Mechanism, Scm, ScmError};
use crate::Execution;
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use thiserror::Error;

/// Default cap on the number of function tuples per ordering.
pub const DEFAULT_FUNCTION_CAP: usize = 1_000_000;
pub const CERTIFICATE_KIND: &str = "canonical-model";

/// `base^exponent`, kept symbolic because the exponent grows as `d^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Power {
    pub base: usize,
    pub exponent: BigUint,
}

impl Power {
    pub fn value(&self) -> Option<BigUint> {
        let e = self.exponent.to_u32().filter(|&e| e <= 1 << 16)?;
        Some(BigUint::from(self.base).pow(e))
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) if v.bits() <= 256 => write!(f, "{v}"),
            _ => write!(f, "{}^{}", self.base, self.exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfError {
    #[error("function space has {size} tuples per ordering, over the cap of {cap}")]
    FunctionSpaceTooLarge { size: Power, cap: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("malformed certificate: {0}")]
    Certificate(String),
}

/// Number of function tuples for `n` variables over `d` values:
/// `d^(1 + d + ... + d^(n-1))`.
pub fn function_space_size(n: usize, d: usize) -> Power {
    let mut exponent = BigUint::zero();
    let mut term = BigUint::one();
    for _ in 0..n {
        exponent += &term;
        term *= d;
    }
    Power { base: d, exponent }
}

/// The sets `Q_i` for one ordering, each enumerated by index.
///
/// Function `k` of `Q_i` has truth table `digits_d(k)` over the `d^(i-1)`
/// inputs, first input most significant; inputs are the values of the
/// earlier variables in mixed radix, earliest most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpace {
    /// Variable indices in causal order.
    pub ordering: Vec<usize>,
    pub d: usize,
    /// `|Q_i|` per position.
    pub cardinalities: Vec<usize>,
    /// `d^(d^(i-1) - 1 - k)` per position and input `k`.
    weights: Vec<Vec<usize>>,
    pub size: usize,
}

impl FunctionSpace {
    /// Input count of the functions at position `i`.
    pub fn arity_rows(&self, i: usize) -> usize {
        self.weights[i].len()
    }

    /// Function indices of the tuple numbered `q` (first position most significant).
    pub fn decode(&self, mut q: usize) -> Vec<usize> {
        let mut out = vec![0; self.ordering.len()];
        for (slot, &c) in out.iter_mut().zip(&self.cardinalities).rev() {
            *slot = q % c;
            q /= c;
        }
        out
    }

    pub fn encode(&self, functions: &[usize]) -> usize {
        functions.iter().zip(&self.cardinalities).fold(0, |acc, (&f, &c)| acc * c + f)
    }

    /// Output of function `f` of `Q_i` on input row `k`.
    pub fn apply(&self, i: usize, f: usize, k: usize) -> usize {
        f / self.weights[i][k] % self.d
    }

    pub fn table(&self, i: usize, f: usize) -> Vec<usize> {
        (0..self.arity_rows(i)).map(|k| self.apply(i, f, k)).collect()
    }

    /// Values of all variables (indexed by formula variable) under tuple
    /// `functions` with the variables in `forced` held fixed.
    pub fn world(&self, functions: &[usize], forced: &[Option<usize>]) -> Vec<usize> {
        let mut values = vec![0; self.ordering.len()];
        let mut row = 0usize;
        for (i, &v) in self.ordering.iter().enumerate() {
            let x = forced[v].unwrap_or_else(|| self.apply(i, functions[i], row));
            values[v] = x;
            row = row * self.d + x;
        }
        values
    }
}

pub fn enumerate_function_space(f: &Formula, ordering: &[usize], cap: usize) -> Result<FunctionSpace, CfError> {
    let (n, d) = (f.n(), f.d());
    assert_eq!(ordering.len(), n, "ordering must list every variable");
    let too_large = || CfError::FunctionSpaceTooLarge { size: function_space_size(n, d), cap };
    let mut cardinalities = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut size = 1usize;
    let mut rows = 1usize;
    for _ in 0..n {
        let card = u32::try_from(rows).ok().and_then(|r| d.checked_pow(r)).ok_or_else(too_large)?;
        size = size.checked_mul(card).filter(|&s| s <= cap).ok_or_else(too_large)?;
        let mut w = vec![1usize; rows];
        for k in (0..rows.saturating_sub(1)).rev() {
            w[k] = w[k + 1] * d;
        }
        cardinalities.push(card);
        weights.push(w);
        rows = rows.checked_mul(d).ok_or_else(too_large)?;
    }
    Ok(FunctionSpace { ordering: ordering.to_vec(), d, cardinalities, weights, size })
}

/// Distinct terms and interventions of a formula, prepared for evaluation
/// against function tuples.
struct TermTable<'a> {
    terms: Vec<&'a Term>,
    interventions: Vec<Intervention>,
    forced: Vec<Vec<Option<usize>>>,
}

impl<'a> TermTable<'a> {
    fn new(f: &'a Formula) -> Self {
        let mut terms: Vec<&Term> = Vec::new();
        let mut interventions: Vec<Intervention> = Vec::new();
        for t in f.terms() {
            if !terms.contains(&t) {
                terms.push(t);
            }
            t.event.for_each_leaf(&mut |leaf| {
                if !interventions.contains(&leaf.intervention) {
                    interventions.push(leaf.intervention.clone());
                }
            });
        }
        let forced = interventions
            .iter()
            .map(|g| {
                let mut v = vec![None; f.n()];
                for a in g.atoms() {
                    v[a.var] = Some(a.value);
                }
                v
            })
            .collect();
        Self { terms, interventions, forced }
    }

    fn index(&self, t: &Term) -> usize {
        self.terms.iter().position(|s| *s == t).expect("term collected")
    }

    /// Which terms hold under the function tuple `q`.
    fn signature(&self, fs: &FunctionSpace, q: usize) -> Vec<bool> {
        let functions = fs.decode(q);
        let worlds: Vec<Vec<usize>> = self.forced.iter().map(|g| fs.world(&functions, g)).collect();
        self.terms
            .iter()
            .map(|t| {
                t.event.eval(&mut |leaf| {
                    let w = self.interventions.iter().position(|g| *g == leaf.intervention).expect("collected");
                    leaf.body.eval(&worlds[w])
                })
            })
            .collect()
    }
}

/// The LP over `p_q` for one ordering.
pub fn build_lp_for_ordering(f: &Formula, fs: &FunctionSpace) -> RationalLinearProgram {
    build_lp_with(f, fs, Execution::default())
}

pub fn build_lp_with(f: &Formula, fs: &FunctionSpace, exec: Execution) -> RationalLinearProgram {
    let table = TermTable::new(f);
    let signatures = par::map_range(exec, fs.size, |q| table.signature(fs, q));

    let mut lp = RationalLinearProgram::new();
    for q in 0..fs.size {
        lp.add_nonneg(format!("p[q{q}]"));
    }
    lp.add_constraint((0..fs.size).map(|q| (q, one())), Relation::Eq, one());

    let mut coefficient: HashMap<&[bool], Vec<BigRational>> = HashMap::new();
    for s in &signatures {
        coefficient.entry(s.as_slice()).or_insert_with(|| {
            f.constraints
                .iter()
                .map(|c| {
                    c.lhs
                        .iter()
                        .filter(|(_, t)| s[table.index(t)])
                        .map(|(k, _)| k.clone())
                        .sum::<BigRational>()
                })
                .collect()
        });
    }
    for (i, c) in f.constraints.iter().enumerate() {
        let row = signatures.iter().enumerate().filter_map(|(q, s)| {
            let k = &coefficient[s.as_slice()][i];
            (!k.is_zero()).then(|| (q, k.clone()))
        });
        lp.add_constraint(row, c.relation, c.rhs.clone());
    }
    lp
}

/// One support point of a canonical model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportEntry {
    /// `functions[i]` is the truth table of the mechanism at position `i`.
    pub functions: Vec<Vec<usize>>,
    pub probability: BigRational,
}

/// Model with one hidden variable over function tuples and mechanisms
/// `V_i = U[i](V_1, ..., V_{i-1})` along `ordering`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalModel {
    /// Variable names in causal order.
    pub ordering: Vec<String>,
    pub domain: Vec<String>,
    pub support: Vec<SupportEntry>,
}

impl CanonicalModel {
    fn rows(&self, i: usize) -> Option<usize> {
        u32::try_from(i).ok().and_then(|i| self.domain.len().checked_pow(i))
    }

    fn well_shaped(&self) -> bool {
        let d = self.domain.len();
        let n = self.ordering.len();
        d > 0
            && self.support.iter().all(|e| {
                e.functions.len() == n
                    && e.functions
                        .iter()
                        .enumerate()
                        .all(|(i, t)| Some(t.len()) == self.rows(i) && t.iter().all(|&x| x < d))
            })
    }

    /// Index of an entry's tuple in the canonical enumeration.
    pub fn q_index(&self, entry: &SupportEntry) -> BigUint {
        let d = self.domain.len();
        let mut q = BigUint::zero();
        for t in &entry.functions {
            for &x in t {
                q = q * d + x;
            }
        }
        q
    }

    /// The model as an explicit SCM over the support only.
    pub fn to_scm(&self) -> Result<Scm, ScmError> {
        if !self.well_shaped() {
            return Err(ScmError::Invalid("function tables do not match the ordering".into()));
        }
        let values = self.support.iter().map(|e| format!("q{}", self.q_index(e))).collect();
        let mechanisms = (0..self.ordering.len())
            .map(|i| {
                let mut inputs = vec![Input::Hidden(0)];
                inputs.extend((0..i).map(Input::Endogenous));
                let table = self.support.iter().flat_map(|e| e.functions[i].iter().copied()).collect();
                Mechanism::Table { inputs, table }
            })
            .collect();
        let distribution =
            Distribution::Joint(self.support.iter().enumerate().map(|(s, e)| (vec![s], e.probability.clone())).collect());
        let scm = Scm {
            domain: self.domain.clone(),
            variables: self.ordering.clone(),
            hidden: vec![HiddenVariable { name: "U".into(), values }],
            mechanisms,
            distribution,
        };
        scm.validate()?;
        Ok(scm)
    }

    pub fn to_json(&self) -> CanonicalJson {
        let d = self.domain.len();
        CanonicalJson {
            kind: CERTIFICATE_KIND.into(),
            ordering: self.ordering.clone(),
            domain: self.domain.clone(),
            support: self
                .support
                .iter()
                .map(|e| SupportJson {
                    q: Some(self.q_index(e).to_string()),
                    functions: e.functions.iter().map(|t| table_to_string(t, d)).collect(),
                    probability: format_rational(&e.probability),
                })
                .collect(),
        }
    }

    pub fn from_json(j: &CanonicalJson) -> Result<Self, CfError> {
        let bad = |m: String| CfError::Certificate(m);
        if j.kind != CERTIFICATE_KIND {
            return Err(bad(format!("expected kind `{CERTIFICATE_KIND}`, found `{}`", j.kind)));
        }
        let support = j
            .support
            .iter()
            .map(|s| {
                let functions = s.functions.iter().map(|t| table_from_string(t)).collect::<Option<Vec<_>>>();
                Ok(SupportEntry {
                    functions: functions.ok_or_else(|| bad("unreadable function table".into()))?,
                    probability: parse_rational(&s.probability)
                        .ok_or_else(|| bad(format!("bad probability `{}`", s.probability)))?,
                })
            })
            .collect::<Result<Vec<_>, CfError>>()?;
        let m = CanonicalModel { ordering: j.ordering.clone(), domain: j.domain.clone(), support };
        for (s, e) in j.support.iter().zip(&m.support) {
            if let Some(q) = &s.q {
                if m.well_shaped() && *q != m.q_index(e).to_string() {
                    return Err(bad(format!("tuple index {q} does not match its tables")));
                }
            }
        }
        Ok(m)
    }
}

/// Digits run together when `d <= 10`, otherwise comma separated.
fn table_to_string(t: &[usize], d: usize) -> String {
    let digits: Vec<String> = t.iter().map(usize::to_string).collect();
    digits.join(if d <= 10 { "" } else { "," })
}

fn table_from_string(s: &str) -> Option<Vec<usize>> {
    if s.contains(',') {
        s.split(',').map(|x| x.trim().parse().ok()).collect()
    } else {
        s.chars().map(|c| c.to_digit(10).map(|x| x as usize)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalJson {
    pub kind: String,
    pub ordering: Vec<String>,
    pub domain: Vec<String>,
    pub support: Vec<SupportJson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    pub functions: Vec<String>,
    pub probability: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CfStats {
    pub n: usize,
    pub d: usize,
    pub function_space: usize,
    /// Orderings up to and including the reported one (all of them on UNSAT).
    pub orderings_tried: usize,
    pub lp_variables: usize,
    pub lp_constraints: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CfVerdict {
    Sat(Box<CanonicalModel>),
    /// One refutation per ordering, in lexicographic order.
    Unsat(Vec<(Vec<usize>, FarkasCertificate)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfOutcome {
    pub verdict: CfVerdict,
    pub stats: CfStats,
}

impl CfOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self.verdict, CfVerdict::Sat(_))
    }
}

#[derive(Debug, Clone)]
pub struct CfOptions {
    pub cap: usize,
    pub exec: Execution,
    pub lp: LpOptions,
    /// Skip the domain reduction step.
    pub keep_domain: bool,
}

impl Default for CfOptions {
    fn default() -> Self {
        Self { cap: DEFAULT_FUNCTION_CAP, exec: Execution::default(), lp: LpOptions::default(), keep_domain: false }
    }
}

/// The `k`-th permutation of `0..n` in lexicographic order.
pub fn nth_permutation(n: usize, mut k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    let mut fact: Vec<usize> = vec![1; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1].saturating_mul(i);
    }
    let mut out = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let j = k / fact[i];
        k %= fact[i];
        out.push(pool.remove(j));
    }
    out
}

pub fn solve(f: &Formula, opts: &CfOptions) -> Result<CfOutcome, CfError> {
    let class = f.validate_and_classify()?;
    debug_assert!(matches!(class.depth, Depth::Prob | Depth::Causal | Depth::Counterfact));
    let work = if opts.keep_domain { f.clone() } else { f.reduce_domain() };
    let (n, d) = (work.n(), work.d());
    let identity: Vec<usize> = (0..n).collect();
    let probe = enumerate_function_space(&work, &identity, opts.cap)?;
    // With one value every ordering yields the same single model.
    let orderings = if d == 1 {
        1
    } else {
        (1..=n).try_fold(1usize, |a, i| a.checked_mul(i)).ok_or_else(|| CfError::FunctionSpaceTooLarge {
            size: function_space_size(n, d),
            cap: opts.cap,
        })?
    };

    let attempt = |k: usize| -> Result<(Vec<usize>, RationalLinearProgram, LpOutcome), CfError> {
        let ordering = nth_permutation(n, k);
        let fs = enumerate_function_space(&work, &ordering, opts.cap)?;
        let lp = build_lp_with(&work, &fs, opts.exec);
        let outcome = solve_feasibility(&lp, &opts.lp)?;
        Ok((ordering, lp, outcome))
    };

    let found = par::find_map_first(opts.exec, orderings, |k| match attempt(k) {
        Ok((_, _, LpOutcome::Infeasible { .. })) => None,
        other => Some((k, other)),
    });

    let mut stats = CfStats {
        n,
        d,
        function_space: probe.size,
        orderings_tried: orderings,
        lp_variables: probe.size,
        lp_constraints: work.constraints.len() + 1,
    };
    match found {
        Some((k, result)) => {
            let (ordering, lp, outcome) = result?;
            let LpOutcome::Feasible { point } = outcome else { unreachable!("filtered above") };
            stats.orderings_tried = k + 1;
            stats.lp_constraints = lp.num_constraints();
            let fs = enumerate_function_space(&work, &ordering, opts.cap)?;
            let support = point
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.is_zero())
                .map(|(q, p)| {
                    let functions = fs.decode(q).iter().enumerate().map(|(i, &fi)| fs.table(i, fi)).collect();
                    SupportEntry { functions, probability: p.clone() }
                })
                .collect();
            let model = CanonicalModel {
                ordering: ordering.iter().map(|&v| work.variables[v].clone()).collect(),
                domain: work.domain.values().to_vec(),
                support,
            };
            Ok(CfOutcome { verdict: CfVerdict::Sat(Box::new(model)), stats })
        }
        None => {
            let refutations = par::map_range(opts.exec, orderings, |k| match attempt(k) {
                Ok((ordering, _, LpOutcome::Infeasible { farkas })) => Ok((ordering, farkas)),
                Ok(_) => Err(CfError::Lp(LpError::Internal("ordering became feasible on re-solve".into()))),
                Err(e) => Err(e),
            })
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
            Ok(CfOutcome { verdict: CfVerdict::Unsat(refutations), stats })
        }
    }
}

/// Checks the model's shape against `f`, the support bound, and the
/// constraints by exact evaluation of the explicit SCM.
pub fn verify_certificate(f: &Formula, m: &CanonicalModel) -> bool {
    let names: BTreeSet<&String> = m.ordering.iter().collect();
    if m.ordering.len() != f.n() || names.len() != f.n() || f.variables.iter().any(|v| !names.contains(v)) {
        return false;
    }
    let symbols: BTreeSet<&String> = m.domain.iter().collect();
    if symbols.len() != m.domain.len() || m.domain.iter().any(|s| f.domain.index_of(s).is_none()) {
        return false;
    }
    if m.support.len() > f.constraints.len() + 1
        || m.support.iter().any(|e| e.probability.is_negative())
        || m.support.iter().map(|e| &e.probability).sum::<BigRational>() != one()
    {
        return false;
    }
    let Ok(scm) = m.to_scm() else { return false };
    scm.satisfies(f).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::example_formula;

    fn parse(s: &str) -> Formula {
        s.parse().unwrap()
    }

    const CLAUSE: &str = "domain {0,1}; vars V, W; P[[V=1] W=1] = 0; P[[W=1] V=1] = 0; 3 P[V=1] >= 1;";

    #[test]
    fn function_space_sizes() {
        let f = parse("domain {0,1}; vars A, B, C;");
        let two = parse("domain {0,1}; vars A, B;");
        let fs = enumerate_function_space(&two, &[0, 1], 100).unwrap();
        assert_eq!((fs.cardinalities.clone(), fs.size), (vec![2, 4], 8));
        let fs = enumerate_function_space(&f, &[0, 1, 2], 1000).unwrap();
        assert_eq!((fs.cardinalities.clone(), fs.size), (vec![2, 4, 16], 128));
        let three = parse("domain {a,b,c}; vars A;");
        assert_eq!(enumerate_function_space(&three, &[0], 10).unwrap().cardinalities, vec![3]);
    }

    #[test]
    fn oversized_space_reports_exact_size() {
        let f = parse("domain {0,1}; vars A, B, C, D, E;");
        let err = enumerate_function_space(&f, &[0, 1, 2, 3, 4], DEFAULT_FUNCTION_CAP).unwrap_err();
        let CfError::FunctionSpaceTooLarge { size, .. } = &err else { panic!() };
        assert_eq!(size.value().unwrap(), BigUint::from(1u64 << 31));
        assert!(err.to_string().contains("2147483648"));
        assert_eq!(function_space_size(60, 2).to_string(), "2^1152921504606846975");
    }

    #[test]
    fn tables_enumerate_lexicographically() {
        let f = parse("domain {0,1}; vars A, B;");
        let fs = enumerate_function_space(&f, &[0, 1], 100).unwrap();
        let tables: Vec<Vec<usize>> = (0..4).map(|k| fs.table(1, k)).collect();
        assert_eq!(tables, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(fs.decode(5), vec![1, 1]);
        assert_eq!(fs.encode(&[1, 1]), 5);
    }

    #[test]
    fn permutations_in_lexicographic_order() {
        let all: Vec<Vec<usize>> = (0..6).map(|k| nth_permutation(3, k)).collect();
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[1], vec![0, 2, 1]);
        assert_eq!(all[5], vec![2, 1, 0]);
    }

    #[test]
    fn trivial_single_variable_lp() {
        let f = parse("domain {0,1}; vars V; P[V=0] >= 1;");
        let fs = enumerate_function_space(&f, &[0], 10).unwrap();
        let lp = build_lp_for_ordering(&f, &fs);
        assert_eq!(lp.num_variables(), 2);
        assert_eq!(lp.constraints()[1].coeffs, vec![(0, one())]);
    }

    #[test]
    fn intervention_row_sums_matching_tuples() {
        let f = parse(CLAUSE);
        let fs = enumerate_function_space(&f, &[0, 1], 100).unwrap();
        let lp = build_lp_for_ordering(&f, &fs);
        // Under V:=1, W = q_2(1), the second entry of W's table.
        let expected: Vec<usize> = (0..8).filter(|&q| fs.apply(1, fs.decode(q)[1], 1) == 1).collect();
        let got: Vec<usize> = lp.constraints()[1].coeffs.iter().map(|(j, _)| *j).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn satisfiable_clause_image() {
        let f = parse(CLAUSE);
        let out = solve(&f, &CfOptions::default()).unwrap();
        let CfVerdict::Sat(m) = &out.verdict else { panic!("expected SAT") };
        assert!(verify_certificate(&f, m));
        // V reads W, so W comes first: W = 0, V = 1 - W.
        assert_eq!(m.ordering, vec!["W", "V"]);
        assert_eq!(out.stats.function_space, 8);
    }

    #[test]
    fn contradictory_clause_image() {
        let f = parse(&format!("{CLAUSE} 3 P[W=1] >= 1;"));
        let out = solve(&f, &CfOptions::default()).unwrap();
        let CfVerdict::Unsat(refs) = &out.verdict else { panic!("expected UNSAT") };
        assert_eq!(refs.len(), 2);
        for (ordering, farkas) in refs {
            let fs = enumerate_function_space(&f, ordering, 100).unwrap();
            assert!(farkas.verify(&build_lp_for_ordering(&f, &fs)));
        }
    }

    #[test]
    fn intervention_forbids_joint_mass() {
        let f = parse("domain {0,1}; vars V1, V2; P[[V1=1] V2=1] = 0; P[V1=1 & V2=1] >= 1/2;");
        assert!(!solve(&f, &CfOptions::default()).unwrap().is_sat());
    }

    #[test]
    fn cyclic_interventions_are_unsat() {
        let f = parse(
            "domain {0,1}; vars A, B, C; P[[A=1] B=1] = 0; P[[B=1] C=1] = 0; P[[C=1] A=1] = 0; P[A=1 & B=1 & C=1] >= 1/2;",
        );
        let out = solve(&f, &CfOptions::default()).unwrap();
        assert_eq!(out.stats.orderings_tried, 6);
        assert!(!out.is_sat());
        // Without the joint row, A must just avoid coming before C.
        let g = parse("domain {0,1}; vars A, B, C; P[[A=1] B=1] = 0; P[[B=1] C=1] = 0; P[[C=1] A=1] = 0; P[A=1] >= 1/2;");
        let out = solve(&g, &CfOptions::default()).unwrap();
        let CfVerdict::Sat(m) = &out.verdict else { panic!() };
        assert_eq!(m.ordering, vec!["B", "C", "A"]);
        assert_eq!(out.stats.orderings_tried, 4);
        assert!(verify_certificate(&g, m));
    }

    #[test]
    fn example_agrees_with_prob_solver() {
        let f = example_formula();
        let cf = solve(&f, &CfOptions::default()).unwrap();
        let pr = crate::prob_solver::solve(&f, &Default::default()).unwrap();
        assert!(cf.is_sat() && pr.is_sat());
        let CfVerdict::Sat(m) = &cf.verdict else { unreachable!() };
        assert!(verify_certificate(&f, m));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = parse(CLAUSE);
        let seq = solve(&f, &CfOptions { exec: Execution::Sequential, ..Default::default() }).unwrap();
        let par = solve(&f, &CfOptions { exec: Execution::Parallel, ..Default::default() }).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn later_ordering_is_found() {
        // W must not depend on V, but V must copy W: only (W, V) works.
        let f = parse("domain {0,1}; vars V, W; P[[V=1] W=1] = 1/2; P[[W=0] V=0] = 1; P[[W=1] V=1] = 1;");
        let out = solve(&f, &CfOptions::default()).unwrap();
        let CfVerdict::Sat(m) = &out.verdict else { panic!() };
        assert_eq!(m.ordering, vec!["W", "V"]);
        assert_eq!(out.stats.orderings_tried, 2);
        assert!(verify_certificate(&f, m));
    }

    #[test]
    fn counterfactual_conjunction() {
        // Two worlds drawn from the same unit: V under W:=0 and under W:=1.
        let f = parse("domain {0,1}; vars W, V; P[[W=0] V=1 & [W=1] V=0] = 1;");
        let out = solve(&f, &CfOptions::default()).unwrap();
        let CfVerdict::Sat(m) = &out.verdict else { panic!() };
        assert!(verify_certificate(&f, m));
    }

    #[test]
    fn certificate_tampering_is_caught() {
        let f = parse(CLAUSE);
        let CfVerdict::Sat(m) = solve(&f, &CfOptions::default()).unwrap().verdict else { panic!() };
        let mut half = (*m).clone();
        for e in &mut half.support {
            e.probability = &e.probability / BigRational::from_integer(2.into());
        }
        assert!(!verify_certificate(&f, &half));
        let mut wrong_shape = (*m).clone();
        wrong_shape.support[0].functions[1].push(0);
        assert!(!verify_certificate(&f, &wrong_shape));
        let mut wrong_value = (*m).clone();
        wrong_value.support[0].functions[0][0] = 7;
        assert!(!verify_certificate(&f, &wrong_value));
    }

    #[test]
    fn json_round_trip() {
        let f = parse(CLAUSE);
        let CfVerdict::Sat(m) = solve(&f, &CfOptions::default()).unwrap().verdict else { panic!() };
        let j = m.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back: CanonicalJson = serde_json::from_str(&text).unwrap();
        assert_eq!(CanonicalModel::from_json(&back).unwrap(), *m);
        let mut bad = j.clone();
        bad.support[0].q = Some("999".into());
        assert!(CanonicalModel::from_json(&bad).is_err());
        assert_eq!(table_from_string("3,11"), Some(vec![3, 11]));
    }

    #[test]
    fn one_value_domain_skips_orderings() {
        let f = parse("domain {0}; vars A, B, C, D, E, F, G, H, I, J, K, L, M; P[A=0] = 1;");
        let out = solve(&f, &CfOptions::default()).unwrap();
        assert!(out.is_sat());
        assert_eq!(out.stats.orderings_tried, 1);
    }

    #[test]
    fn support_bounded_by_rows() {
        let f = example_formula();
        let CfVerdict::Sat(m) = solve(&f, &CfOptions::default()).unwrap().verdict else { panic!() };
        assert!(m.support.len() <= f.constraints.len() + 1);
    }
}
