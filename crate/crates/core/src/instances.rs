//! Instance families for tests and benchmarks.

use crate::formula::{
    Atom, CounterfactEvent, DomainSpec, Formula, Intervention, LinearConstraint, PostIntEvent, PropEvent, Relation,
    Term,
};
use crate::rational::{int, one};
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;

/// Shape of randomly generated formulas.
#[derive(Debug, Clone)]
pub struct RandomConfig {
    pub n: usize,
    pub d: usize,
    pub constraints: usize,
    /// Maximum number of terms per constraint.
    pub max_terms: usize,
    /// Maximum number of distinct variables mentioned by one term.
    pub max_term_vars: usize,
    /// Allow interventions (and thus counterfactual terms).
    pub interventions: bool,
}

impl RandomConfig {
    pub fn prob(n: usize, d: usize, constraints: usize) -> Self {
        Self { n, d, constraints, max_terms: 2, max_term_vars: 2, interventions: false }
    }
}

fn var_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("V{i}")).collect()
}

fn random_rhs(rng: &mut impl Rng) -> BigRational {
    let choices = [(0, 1), (1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1)];
    let (a, b) = choices[rng.gen_range(0..choices.len())];
    BigRational::new(a.into(), b.into())
}

fn random_coef(rng: &mut impl Rng) -> BigRational {
    let choices = [(1, 1), (1, 1), (-1, 1), (2, 1), (-2, 1), (1, 2), (-3, 2)];
    let (a, b) = choices[rng.gen_range(0..choices.len())];
    BigRational::new(a.into(), b.into())
}

fn random_prop(rng: &mut impl Rng, vars: &[usize], d: usize, depth: usize) -> PropEvent {
    let atom = |rng: &mut dyn rand::RngCore| {
        let v = vars[rng.gen_range(0..vars.len())];
        PropEvent::atom(v, rng.gen_range(0..d))
    };
    if depth == 0 {
        return atom(rng);
    }
    match rng.gen_range(0..5) {
        0 | 1 => atom(rng),
        2 => random_prop(rng, vars, d, depth - 1).not(),
        3 => random_prop(rng, vars, d, depth - 1).and(random_prop(rng, vars, d, depth - 1)),
        _ => random_prop(rng, vars, d, depth - 1).or(random_prop(rng, vars, d, depth - 1)),
    }
}

/// Event over `vars` that mentions every one of them.
fn covering_prop(rng: &mut impl Rng, vars: &[usize], d: usize) -> PropEvent {
    let mut e = random_prop(rng, &vars[..1], d, 1);
    for &v in &vars[1..] {
        let next = random_prop(rng, &[v], d, 1);
        e = if rng.gen_bool(0.6) { e.and(next) } else { e.or(next) };
    }
    e
}

fn random_intervention(rng: &mut impl Rng, n: usize, d: usize) -> Intervention {
    let count = rng.gen_range(0..=n.min(2));
    let mut vars: Vec<usize> = (0..n).collect();
    vars.shuffle(rng);
    Intervention::new(vars[..count].iter().map(|&v| Atom::new(v, rng.gen_range(0..d)))).expect("distinct variables")
}

fn random_term(rng: &mut impl Rng, cfg: &RandomConfig) -> Term {
    let mut pool: Vec<usize> = (0..cfg.n).collect();
    pool.shuffle(rng);
    let k = rng.gen_range(1..=cfg.max_term_vars.clamp(1, cfg.n));
    let vars = &pool[..k];
    if !cfg.interventions || rng.gen_bool(0.3) {
        return Term::prop(covering_prop(rng, vars, cfg.d));
    }
    let leaf = |rng: &mut dyn rand::RngCore| {
        let mut r = rng;
        CounterfactEvent::Leaf(PostIntEvent {
            intervention: random_intervention(&mut r, cfg.n, cfg.d),
            body: random_prop(&mut r, vars, cfg.d, 1),
        })
    };
    let event = match rng.gen_range(0..4) {
        0 | 1 => leaf(rng),
        2 => leaf(rng).and(leaf(rng)),
        _ => leaf(rng).and(leaf(rng).not()),
    };
    Term::new(event)
}

/// Random formula over `V1..Vn` and domain `{0..d-1}`.
pub fn random_formula(rng: &mut impl Rng, cfg: &RandomConfig) -> Formula {
    assert!(cfg.n >= 1 && cfg.d >= 1);
    let mut f = Formula::new(DomainSpec::numeric(cfg.d), var_names(cfg.n));
    for _ in 0..cfg.constraints {
        let terms = rng.gen_range(1..=cfg.max_terms.max(1));
        let lhs = (0..terms)
            .map(|i| {
                let c = if terms == 1 && i == 0 && rng.gen_bool(0.6) { one() } else { random_coef(rng) };
                (c, random_term(rng, cfg))
            })
            .collect();
        let relation = [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)];
        let rhs = if terms > 1 && rng.gen_bool(0.3) { int(0) } else { random_rhs(rng) };
        f.constraints.push(LinearConstraint::new(lhs, relation, rhs));
    }
    f
}

/// Random intervention-free formula.
pub fn random_prob_formula(rng: &mut impl Rng, n: usize, d: usize, constraints: usize) -> Formula {
    random_formula(rng, &RandomConfig::prob(n, d, constraints))
}

/// Adds `extra` unused values `x1, x2, ...` to the domain.
pub fn pad_domain(f: &Formula, extra: usize) -> Formula {
    let mut values = f.domain.values().to_vec();
    values.extend((1..=extra).map(|i| format!("x{i}")));
    Formula { domain: DomainSpec::new(values).expect("fresh names"), ..f.clone() }
}

/// Path-shaped formula over `n` binary variables (treewidth one).
///
/// Every consecutive pair is positively correlated and each variable has
/// marginal one half, so the family is satisfiable for every `n`.
pub fn chain_formula(n: usize) -> Formula {
    assert!(n >= 1);
    let mut f = Formula::new(DomainSpec::numeric(2), var_names(n));
    let half = BigRational::new(1.into(), 2.into());
    f.constraints.push(LinearConstraint::new(vec![(one(), Term::prop(PropEvent::atom(0, 1)))], Relation::Eq, half));
    for i in 0..n - 1 {
        let both = Term::prop(PropEvent::atom(i, 1).and(PropEvent::atom(i + 1, 1)));
        let differ = Term::prop(
            PropEvent::atom(i, 1)
                .and(PropEvent::atom(i + 1, 0))
                .or(PropEvent::atom(i, 0).and(PropEvent::atom(i + 1, 1))),
        );
        let next = Term::prop(PropEvent::atom(i + 1, 1));
        f.constraints.push(LinearConstraint::new(
            vec![(one(), both)],
            Relation::Ge,
            BigRational::new(1.into(), 4.into()),
        ));
        f.constraints.push(LinearConstraint::new(
            vec![(int(3), differ)],
            Relation::Le,
            one(),
        ));
        let prev = Term::prop(PropEvent::atom(i, 1));
        f.constraints.push(LinearConstraint::new(vec![(one(), next), (-one(), prev)], Relation::Eq, int(0)));
    }
    f
}

/// The four-variable running example: SAT with treewidth one.
pub const EXAMPLE_FORMULA: &str = "\
domain {0, 1};
vars V1, V2, V3, V4;
P[V1=1 & V3=1] >= 1/2;
P[V2=1 | V3=1] - 2 P[V3=1 | V4=1] >= 0;
P[V4=1] >= 1/3;
";

pub fn example_formula() -> Formula {
    EXAMPLE_FORMULA.parse().expect("example parses")
}
