use super::*;
use crate::instances::{example_formula, random_formula, RandomConfig};
use crate::rational::{int, one};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn parses_a_single_conjunction() {
    let f: Formula = "domain {0,1}; vars V1, V3; P[V1=1 & V3=1] >= 1/2;".parse().unwrap();
    assert_eq!(f.constraints.len(), 1);
    let c = &f.constraints[0];
    assert_eq!(c.lhs.len(), 1);
    assert_eq!(c.lhs[0].0, one());
    assert_eq!(c.relation, Relation::Ge);
    assert_eq!(c.rhs, q(1, 2));
    let expected = Term::prop(PropEvent::atom(0, 1).and(PropEvent::atom(1, 1)));
    assert_eq!(c.lhs[0].1, expected);
}

#[test]
fn parses_an_interventional_term() {
    let f: Formula = "domain {0,1}; vars V, W; P[[V=1] W=1] = 0;".parse().unwrap();
    let t = &f.constraints[0].lhs[0].1;
    match &t.event {
        CounterfactEvent::Leaf(p) => {
            assert_eq!(p.intervention.atoms(), &[Atom::new(0, 1)]);
            assert_eq!(p.body, PropEvent::atom(1, 1));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(t.size(), 2);
}

#[test]
fn parses_a_counterfactual_conjunction() {
    let f: Formula = "domain {0,1}; vars X, Y; P[[X=1] Y=1 & [X=1] Y=0] >= 0;".parse().unwrap();
    match &f.constraints[0].lhs[0].1.event {
        CounterfactEvent::And(l, r) => {
            assert!(matches!(**l, CounterfactEvent::Leaf(_)));
            assert!(matches!(**r, CounterfactEvent::Leaf(_)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn disjunction_is_desugared() {
    let f: Formula = "domain {0,1}; vars A, B; P[A=1 | B=0] = 1;".parse().unwrap();
    let expected = PropEvent::atom(0, 1).not().and(PropEvent::atom(1, 0).not()).not();
    assert_eq!(f.constraints[0].lhs[0].1, Term::prop(expected));
}

#[test]
fn linear_combinations_and_decimals() {
    let f: Formula = "domain {a,b}; vars X; -P[X=a] + 0.25 * P[X=b] - 3/2 P[X=a] <= -1;".parse().unwrap();
    let c = &f.constraints[0];
    let coefs: Vec<_> = c.lhs.iter().map(|(k, _)| k.clone()).collect();
    assert_eq!(coefs, vec![-one(), q(1, 4), q(-3, 2)]);
    assert_eq!(c.rhs, int(-1));
}

#[test]
fn comments_and_whitespace() {
    let src = "# header\ndomain {0, 1};  # trailing\nvars V;\n\nP[V=0] >= 1; # done\n";
    let f: Formula = src.parse().unwrap();
    assert_eq!(f.constraints.len(), 1);
}

#[test]
fn empty_input_is_the_empty_formula() {
    let f: Formula = "".parse().unwrap();
    assert!(f.constraints.is_empty());
    assert_eq!(f.n(), 0);
    assert!(f.validate().is_ok());
}

#[test]
fn errors_carry_positions() {
    let err = "domain {0,1};\nvars V;\nP[W=1] >= 0;".parse::<Formula>().unwrap_err();
    assert_eq!(err, FormulaError::UndeclaredVariable { name: "W".into(), line: 3, col: 3 });

    let err = "domain {0,1}; vars V; P[V=2] >= 0;".parse::<Formula>().unwrap_err();
    assert!(matches!(err, FormulaError::UndeclaredValue { ref value, line: 1, .. } if value == "2"));

    let err = "domain {0,1}; vars V;\nP[V=1] > 0;".parse::<Formula>().unwrap_err();
    assert!(matches!(err, FormulaError::Syntax { line: 2, ref msg, .. } if msg.contains("strict")));

    let err = "domain {0,1}; vars V; P[V=1 >= 0;".parse::<Formula>().unwrap_err();
    assert!(matches!(err, FormulaError::Syntax { .. }));
}

#[test]
fn conflicting_interventions_are_rejected() {
    let err = "domain {0,1}; vars V, W; P[[V=1, V=0] W=1] = 0;".parse::<Formula>().unwrap_err();
    assert!(matches!(err, FormulaError::ConflictingIntervention { ref var, .. } if var == "V"));

    let f: Formula = "domain {0,1}; vars V, W; P[[V=1 & V=1] W=1] = 0;".parse().unwrap();
    let CounterfactEvent::Leaf(p) = &f.constraints[0].lhs[0].1.event else { panic!() };
    assert_eq!(p.intervention.atoms().len(), 1);
}

#[test]
fn nested_interventions_are_rejected() {
    let err = "domain {0,1}; vars V, W; P[[V=1] [W=1] V=0] = 0;".parse::<Formula>().unwrap_err();
    assert!(matches!(err, FormulaError::Syntax { .. }));
}

#[test]
fn duplicate_declarations() {
    assert!(matches!("domain {0,0}; vars V;".parse::<Formula>(), Err(FormulaError::DuplicateValue(_))));
    assert!(matches!("domain {0,1}; vars V, V;".parse::<Formula>(), Err(FormulaError::DuplicateVariable(_))));
}

#[test]
fn classification() {
    let f = example_formula();
    assert_eq!(f.validate_and_classify().unwrap(), FragmentClass { depth: Depth::Prob, breadth: Breadth::Lin });

    let f: Formula = "domain {0,1}; vars V; P[V=0] >= 1;".parse().unwrap();
    assert_eq!(f.classify(), FragmentClass { depth: Depth::Prob, breadth: Breadth::Base });

    let f: Formula = "domain {0,1}; vars V, W; P[V=0] - P[W=1] = 0;".parse().unwrap();
    assert_eq!(f.classify().breadth, Breadth::Base);

    let f: Formula = "domain {0,1}; vars V, W;
        P[[V=1] W=1] = 0; P[[W=1] V=1] = 0; 3 P[V=1] >= 1;"
        .parse()
        .unwrap();
    assert_eq!(f.classify(), FragmentClass { depth: Depth::Causal, breadth: Breadth::Lin });

    let f: Formula = "domain {0,1}; vars X, Y; P[[X=1] Y=1 & [X=0] Y=0] >= 1/2;".parse().unwrap();
    assert_eq!(f.classify().depth, Depth::Counterfact);

    // Mixing an intervened world with the observational one is counterfactual.
    let f: Formula = "domain {0,1}; vars X, Y; P[X=0 & [X=1] Y=1] >= 1/2;".parse().unwrap();
    assert_eq!(f.classify().depth, Depth::Counterfact);
}

#[test]
fn primal_graph_of_the_example() {
    let g = example_formula().primal_graph();
    let edges: Vec<_> = g.edges.iter().copied().collect();
    assert_eq!(edges, vec![(0, 2), (1, 2), (2, 3)]);
    assert_eq!(g.max_degree(), 3);
}

#[test]
fn unary_terms_give_an_edgeless_graph() {
    let f: Formula = "domain {0,1}; vars A, B, C; P[A=1] >= 0; P[!(B=0)] + P[C=1 | C=0] = 1;".parse().unwrap();
    assert!(f.primal_graph().edges.is_empty());
}

#[test]
fn interventions_contribute_to_the_primal_graph() {
    let f: Formula = "domain {0,1}; vars V, W, X; P[[V=1] W=1] = 0;".parse().unwrap();
    assert_eq!(f.primal_graph().edges.into_iter().collect::<Vec<_>>(), vec![(0, 1)]);
}

#[test]
fn reduce_domain_keeps_mentioned_values_and_one_spare() {
    let f: Formula =
        "domain {0,1,2,3,4,5,6,7,8,9}; vars V, W; P[V=0 & W=1] >= 1/2; P[[W=0] V=1] = 1;".parse().unwrap();
    let r = f.reduce_domain();
    assert_eq!(r.domain.values(), &["0", "1", "2"]);
    assert_eq!(f.to_string().replace("2, 3, 4, 5, 6, 7, 8, 9", "2"), r.to_string());
}

#[test]
fn reduce_domain_never_grows_a_fully_used_domain() {
    let f: Formula = "domain {0}; vars V; P[V=0] = 0;".parse().unwrap();
    assert_eq!(f.reduce_domain(), f);
    let f: Formula = "domain {a,b}; vars V; P[V=a] + P[V=b] = 1;".parse().unwrap();
    assert_eq!(f.reduce_domain(), f);
}

#[test]
fn reduce_domain_remaps_values() {
    let f: Formula = "domain {0,1,2,3}; vars V; P[V=3] = 1;".parse().unwrap();
    let r = f.reduce_domain();
    assert_eq!(r.domain.values(), &["0", "3"]);
    assert_eq!(r.to_string(), "domain {0, 3};\nvars V;\nP[V=3] = 1;\n");
}

#[test]
fn term_size_counts_intervention_atoms() {
    let f: Formula = "domain {0,1}; vars V, W; P[[V=1, W=0] W=1 & !V=0] = 0;".parse().unwrap();
    assert_eq!(f.constraints[0].lhs[0].1.size(), 4);
    assert_eq!(f.size(), 4);
}

#[test]
fn printing_is_stable() {
    let src = "domain {0, 1};\nvars X, Y;\n\
               P[([X=1] Y=1) & !([Y=0] X=0)] = 1;\n\
               2 P[X=1 | Y=0 & !X=0] - 1/3 P[[] X=1 & [X=0] Y=1] <= 1/2;\n";
    let f: Formula = src.parse().unwrap();
    let printed = f.to_string();
    assert_eq!(printed.parse::<Formula>().unwrap(), f);
    assert_eq!(
        printed,
        "domain {0, 1};\nvars X, Y;\n\
         P[[X=1] Y=1 & ![Y=0] X=0] = 1;\n\
         2 P[X=1 | Y=0 & !X=0] - 1/3 P[[] X=1 & [X=0] Y=1] <= 1/2;\n"
    );
}

fn arbitrary_formula() -> impl Strategy<Value = Formula> {
    (any::<u64>(), 1usize..5, 1usize..4, 0usize..6, proptest::bool::ANY).prop_map(|(seed, n, d, m, cf)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = RandomConfig { n, d, constraints: m, max_terms: 3, max_term_vars: 3, interventions: cf };
        random_formula(&mut rng, &cfg)
    })
}

proptest! {
    #[test]
    fn print_then_parse_round_trips(f in arbitrary_formula()) {
        let text = f.to_string();
        let back: Formula = text.parse().map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, f);
    }

    #[test]
    fn primal_graph_is_sound(f in arbitrary_formula()) {
        let g = f.primal_graph();
        for &(a, b) in &g.edges {
            prop_assert!(a < b);
            let witnessed = f.terms().any(|t| {
                let v = t.variables();
                v.contains(&a) && v.contains(&b)
            });
            prop_assert!(witnessed);
        }
        for t in f.terms() {
            let vars: Vec<_> = t.variables().into_iter().collect();
            for (i, &a) in vars.iter().enumerate() {
                for &b in &vars[i + 1..] {
                    prop_assert!(g.has_edge(a, b));
                }
            }
        }
    }

    #[test]
    fn classification_is_least(f in arbitrary_formula()) {
        let class = f.validate_and_classify().unwrap();
        let free = f.terms().all(Term::is_intervention_free);
        prop_assert_eq!(class.depth == Depth::Prob, free);
    }
}
