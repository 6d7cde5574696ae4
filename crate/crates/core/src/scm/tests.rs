use super::*;
use crate::formula::{CounterfactEvent, PostIntEvent};
use crate::instances::{example_formula, random_formula, RandomConfig};
use crate::rational::{one, zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn binary() -> Vec<String> {
    vec!["0".into(), "1".into()]
}

/// One fair coin `U`; `V1 = U`, `V2 = 1`, `V3 = V1`, `V4 = V1`.
fn example_model() -> Scm {
    Scm {
        domain: binary(),
        variables: ["V1", "V2", "V3", "V4"].map(String::from).to_vec(),
        hidden: vec![HiddenVariable { name: "U".into(), values: binary() }],
        mechanisms: vec![
            Mechanism::Table { inputs: vec![Input::Hidden(0)], table: vec![0, 1] },
            Mechanism::constant(1),
            Mechanism::Table { inputs: vec![Input::Endogenous(0)], table: vec![0, 1] },
            Mechanism::Table { inputs: vec![Input::Endogenous(0)], table: vec![0, 1] },
        ],
        distribution: Distribution::Joint(vec![(vec![0], q(1, 2)), (vec![1], q(1, 2))]),
    }
}

/// `W = 0`, `V = 1 - W`.
fn negation_model() -> Scm {
    Scm {
        domain: binary(),
        variables: vec!["W".into(), "V".into()],
        hidden: vec![],
        mechanisms: vec![
            Mechanism::constant(0),
            Mechanism::Table { inputs: vec![Input::Endogenous(0)], table: vec![1, 0] },
        ],
        distribution: Distribution::Joint(vec![(vec![], one())]),
    }
}

fn term(f: &Formula, i: usize) -> &CounterfactEvent {
    &f.constraints[i].lhs[0].1.event
}

#[test]
fn example_event_under_u_one() {
    let f: Formula = "domain {0,1}; vars V1, V2, V3, V4; P[V1=1 & V3=1] >= 0;".parse().unwrap();
    let m = example_model();
    assert!(m.evaluate_event(&f, &[1], term(&f, 0)).unwrap());
    assert!(!m.evaluate_event(&f, &[0], term(&f, 0)).unwrap());
}

#[test]
fn example_term_probabilities() {
    let f: Formula =
        "domain {0,1}; vars V1, V2, V3, V4; P[V1=1 & V3=1] >= 0; P[V4=1] >= 0; P[V1=0 & !V1=0] >= 0;".parse().unwrap();
    let m = example_model();
    assert_eq!(m.term_probability(&f, term(&f, 0)).unwrap(), q(1, 2));
    assert_eq!(m.term_probability(&f, term(&f, 1)).unwrap(), q(1, 2));
    assert_eq!(m.term_probability(&f, term(&f, 2)).unwrap(), zero());
}

#[test]
fn example_model_satisfies_example_formula() {
    let m = example_model();
    assert!(m.satisfies(&example_formula()).unwrap());
    let raised: Formula = crate::instances::EXAMPLE_FORMULA.replace("1/3", "2/3").parse().unwrap();
    assert!(!m.satisfies(&raised).unwrap());
}

#[test]
fn empty_formula_is_always_satisfied() {
    let f: Formula = "domain {0,1}; vars V1, V2, V3, V4;".parse().unwrap();
    assert!(example_model().satisfies(&f).unwrap());
}

#[test]
fn intervention_overrides_mechanism() {
    let f: Formula = "domain {0,1}; vars V, W; P[[W=1] V=1] = 0; P[[V=1] W=1] = 0; P[V=1] = 1;".parse().unwrap();
    let m = negation_model();
    assert!(!m.evaluate_event(&f, &[], term(&f, 0)).unwrap());
    assert!(m.satisfies(&f).unwrap());
}

#[test]
fn tautology_holds_everywhere() {
    let f: Formula = "domain {0,1}; vars V1, V2, V3, V4; P[V3=1 | !V3=1] = 1;".parse().unwrap();
    let m = example_model();
    for u in 0..2 {
        assert!(m.evaluate_event(&f, &[u], term(&f, 0)).unwrap());
    }
    assert!(m.satisfies(&f).unwrap());
}

#[test]
fn counterfactual_worlds_share_the_hidden_draw() {
    // With V1 = U and V3 = V1: "V3 would be 1 had V1 been 1, and V3 is 0" has
    // probability P(U = 0) = 1/2.
    let f: Formula = "domain {0,1}; vars V1, V2, V3, V4; P[[V1=1] V3=1 & [] V3=0] = 1/2;".parse().unwrap();
    assert!(example_model().satisfies(&f).unwrap());
}

#[test]
fn variables_are_matched_by_name() {
    let f: Formula = "domain {1,0}; vars V4, V3, V2, V1; P[V4=1 & V2=1] = 1/2;".parse().unwrap();
    assert!(example_model().satisfies(&f).unwrap());
}

#[test]
fn missing_variable_or_value() {
    let f: Formula = "domain {0,1}; vars X; P[X=1] = 1;".parse().unwrap();
    assert!(matches!(example_model().satisfies(&f), Err(ScmError::UnknownVariable(_))));
    let f: Formula = "domain {0,1,2}; vars V1, V2, V3, V4; P[[V1=2] V3=2] = 0;".parse().unwrap();
    assert!(matches!(example_model().satisfies(&f), Err(ScmError::DomainMismatch(_))));
    // Observing a value the model cannot take is simply impossible.
    let f: Formula = "domain {0,1,2}; vars V1, V2, V3, V4; P[V3=2] = 0;".parse().unwrap();
    assert!(example_model().satisfies(&f).unwrap());
}

#[test]
fn invalid_models_are_rejected() {
    let mut m = example_model();
    m.distribution = Distribution::Joint(vec![(vec![1], q(1, 2))]);
    assert!(matches!(m.validate(), Err(ScmError::Invalid(_))));

    let mut m = example_model();
    m.mechanisms[0] = Mechanism::Table { inputs: vec![Input::Endogenous(2)], table: vec![0, 1] };
    assert!(matches!(m.validate(), Err(ScmError::Invalid(_))));

    let mut m = example_model();
    m.mechanisms[1] = Mechanism::constant(2);
    assert!(matches!(m.validate(), Err(ScmError::Invalid(_))));
}

#[test]
fn support_cap_is_enforced() {
    let f = example_formula();
    let m = example_model();
    let b = m.bind(&f).unwrap();
    let err = b.term_probability(term(&f, 0), 1).unwrap_err();
    assert_eq!(err, ScmError::SupportTooLarge { size: 2, cap: 1 });
}

#[test]
fn json_round_trip() {
    for m in [example_model(), negation_model()] {
        let v = m.to_json();
        assert_eq!(Scm::from_json(v.clone()).unwrap(), m);
        let text = serde_json::to_string(&v).unwrap();
        assert!(text.contains("\"1/2\"") || m.hidden.is_empty());
    }
}

#[test]
fn json_rejects_a_ragged_table() {
    let mut v = example_model().to_json();
    v["functions"][0]["table"] = serde_json::json!(["0"]);
    assert!(Scm::from_json(v).is_err());
}

// Random models: independent hidden variables, each mechanism either a table
// over a random input subset or a switch with constant or hidden outputs.
fn random_model(rng: &mut impl Rng, n: usize, d: usize) -> Scm {
    let nh = rng.gen_range(0..=3);
    let hidden: Vec<HiddenVariable> = (0..nh)
        .map(|h| {
            let k = if rng.gen_bool(0.5) { d } else { rng.gen_range(1..=3) };
            HiddenVariable { name: format!("U{h}"), values: (0..k).map(|x| x.to_string()).collect() }
        })
        .collect();
    let marginals: Vec<Vec<BigRational>> = hidden
        .iter()
        .map(|h| {
            let w: Vec<i64> = (0..h.values.len()).map(|_| rng.gen_range(0..4)).collect();
            let total: i64 = w.iter().sum();
            if total == 0 {
                let mut m = vec![zero(); w.len()];
                m[0] = one();
                m
            } else {
                w.iter().map(|&x| q(x, total)).collect()
            }
        })
        .collect();
    let mechanisms = (0..n)
        .map(|i| {
            if rng.gen_bool(0.5) {
                let mut inputs: Vec<Input> = Vec::new();
                for h in 0..nh {
                    if rng.gen_bool(0.5) {
                        inputs.push(Input::Hidden(h));
                    }
                }
                for j in 0..i {
                    if rng.gen_bool(0.5) {
                        inputs.push(Input::Endogenous(j));
                    }
                }
                let rows: usize = inputs
                    .iter()
                    .map(|inp| match inp {
                        Input::Hidden(h) => hidden[*h].values.len(),
                        Input::Endogenous(_) => d,
                    })
                    .product();
                Mechanism::Table { inputs, table: (0..rows).map(|_| rng.gen_range(0..d)).collect() }
            } else {
                let on: Vec<usize> = (0..i).filter(|_| rng.gen_bool(0.5)).collect();
                let wide: Vec<usize> = (0..nh).filter(|&h| hidden[h].values.len() == d).collect();
                let cases = (0..d.pow(on.len() as u32))
                    .map(|_| {
                        if !wide.is_empty() && rng.gen_bool(0.6) {
                            Output::Hidden(wide[rng.gen_range(0..wide.len())])
                        } else {
                            Output::Const(rng.gen_range(0..d))
                        }
                    })
                    .collect();
                Mechanism::Switch { on, cases }
            }
        })
        .collect();
    Scm {
        domain: (0..d).map(|x| x.to_string()).collect(),
        variables: (1..=n).map(|i| format!("V{i}")).collect(),
        hidden,
        mechanisms,
        distribution: Distribution::Independent(marginals),
    }
}

/// Same model with the independent product spelled out as a joint table.
fn as_joint(m: &Scm) -> Scm {
    let Distribution::Independent(marginals) = &m.distribution else { return m.clone() };
    let mut support: Vec<(Vec<usize>, BigRational)> = vec![(vec![], one())];
    for marg in marginals {
        support = support
            .into_iter()
            .flat_map(|(u, p)| {
                marg.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(move |(x, px)| {
                    let mut u = u.clone();
                    u.push(x);
                    (u, &p * px)
                })
            })
            .collect();
    }
    Scm { distribution: Distribution::Joint(support), ..m.clone() }
}

fn model_and_formula() -> impl Strategy<Value = (Scm, Formula)> {
    (any::<u64>(), 1usize..4, 1usize..4).prop_map(|(seed, n, d)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, n, d);
        let cfg = RandomConfig { n, d, constraints: 4, max_terms: 2, max_term_vars: 3, interventions: true };
        (m, random_formula(&mut rng, &cfg))
    })
}

proptest! {
    #[test]
    fn factored_evaluation_matches_enumeration((m, f) in model_and_formula()) {
        let joint = as_joint(&m);
        for t in f.terms() {
            let a = m.term_probability(&f, &t.event).unwrap();
            let b = joint.term_probability(&f, &t.event).unwrap();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(m.satisfies(&f).unwrap(), joint.satisfies(&f).unwrap());
    }

    #[test]
    fn complement_sums_to_one((m, f) in model_and_formula()) {
        for t in f.terms() {
            let p = m.term_probability(&f, &t.event).unwrap();
            let not_p = m.term_probability(&f, &t.event.clone().not()).unwrap();
            prop_assert!(p >= zero() && p <= one());
            prop_assert_eq!(p + not_p, one());
        }
    }

    #[test]
    fn empty_intervention_is_transparent((m, f) in model_and_formula()) {
        let joint = as_joint(&m);
        let Distribution::Joint(support) = &joint.distribution else { unreachable!() };
        for t in f.terms() {
            t.event.for_each_leaf(&mut |leaf| {
                let plain = CounterfactEvent::prop(leaf.body.clone());
                let wrapped = CounterfactEvent::Leaf(PostIntEvent {
                    intervention: crate::formula::Intervention::none(),
                    body: leaf.body.clone(),
                });
                for (u, _) in support {
                    assert_eq!(
                        joint.evaluate_event(&f, u, &plain).unwrap(),
                        joint.evaluate_event(&f, u, &wrapped).unwrap()
                    );
                }
            });
        }
    }

    #[test]
    fn intervened_values_are_forced((m, f) in model_and_formula()) {
        let joint = as_joint(&m);
        let Distribution::Joint(support) = &joint.distribution else { unreachable!() };
        for t in f.terms() {
            t.event.for_each_leaf(&mut |leaf| {
                for (u, _) in support {
                    let g: Vec<(usize, usize)> =
                        leaf.intervention.atoms().iter().map(|a| (a.var, a.value)).collect();
                    let world = joint.solve_world(u, &g);
                    for &(v, x) in &g {
                        assert_eq!(world[v], x);
                    }
                }
            });
        }
    }

    #[test]
    fn simplification_preserves_probabilities((m, f) in model_and_formula()) {
        let s = m.simplify_deterministic();
        for t in f.terms() {
            prop_assert_eq!(m.term_probability(&f, &t.event).unwrap(), s.term_probability(&f, &t.event).unwrap());
        }
    }

    #[test]
    fn random_models_survive_json((m, _f) in model_and_formula()) {
        prop_assert_eq!(Scm::from_json(m.to_json()).unwrap(), m.clone());
        let joint = as_joint(&m);
        prop_assert_eq!(Scm::from_json(joint.to_json()).unwrap(), joint);
    }
}

#[test]
fn independent_dp_handles_many_unused_hidden_variables() {
    // 40 binary hidden variables: the joint would have 2^40 tuples.
    let n = 40;
    let hidden: Vec<HiddenVariable> =
        (0..n).map(|i| HiddenVariable { name: format!("U{i}"), values: binary() }).collect();
    let mechanisms = (0..n)
        .map(|i| {
            if i == 0 {
                Mechanism::Switch { on: vec![], cases: vec![Output::Hidden(0)] }
            } else {
                Mechanism::Switch { on: vec![i - 1], cases: vec![Output::Const(0), Output::Hidden(i)] }
            }
        })
        .collect();
    let m = Scm {
        domain: binary(),
        variables: (0..n).map(|i| format!("X{i}")).collect(),
        hidden,
        mechanisms,
        distribution: Distribution::Independent(vec![vec![q(1, 2), q(1, 2)]; n]),
    };
    let f: Formula = format!("domain {{0,1}}; vars {}; P[X39=1] >= 0;", m.variables.join(", ")).parse().unwrap();
    let p = m.term_probability(&f, term(&f, 0)).unwrap();
    assert_eq!(p, BigRational::new(1.into(), num_bigint::BigInt::from(2).pow(40)));
}
