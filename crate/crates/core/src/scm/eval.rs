use super::*;
use crate::formula::{CounterfactEvent, Term};
use std::collections::HashMap;

const UNSET: usize = usize::MAX;

/// A model bound to a formula: variables matched by name, values by symbol.
pub struct Bound<'a> {
    pub model: &'a Scm,
    pub formula: &'a Formula,
    var: Vec<usize>,
    value: Vec<Option<usize>>,
}

impl<'a> Bound<'a> {
    pub(super) fn new(model: &'a Scm, formula: &'a Formula) -> Result<Self, ScmError> {
        model.validate()?;
        let var = formula
            .variables
            .iter()
            .map(|name| {
                model.variables.iter().position(|v| v == name).ok_or_else(|| ScmError::UnknownVariable(name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let value: Vec<Option<usize>> =
            formula.domain.values().iter().map(|sym| model.domain.iter().position(|v| v == sym)).collect();
        for t in formula.terms() {
            let mut ok = true;
            t.event.for_each_leaf(&mut |leaf| ok &= map_intervention(&leaf.intervention, &var, &value).is_some());
            if !ok {
                return Err(ScmError::DomainMismatch(format!(
                    "{} intervenes on a value outside the model domain",
                    formula.term_to_string(t)
                )));
            }
        }
        Ok(Self { model, formula, var, value })
    }

    fn atom_holds(&self, world: &[usize], a: &Atom) -> bool {
        self.value[a.value] == Some(world[self.var[a.var]])
    }

    pub fn evaluate_event(&self, u: &[usize], e: &CounterfactEvent) -> bool {
        e.eval(&mut |leaf| {
            let g = map_intervention(&leaf.intervention, &self.var, &self.value).expect("checked at bind");
            let world = self.model.solve_world(u, &g);
            leaf.body.holds(&|a| self.atom_holds(&world, a))
        })
    }

    /// Sum of `P(u)` over hidden tuples `u` under which `e` holds.
    pub fn term_probability(&self, e: &CounterfactEvent, cap: usize) -> Result<BigRational, ScmError> {
        match &self.model.distribution {
            Distribution::Joint(support) => {
                if support.len() > cap {
                    return Err(ScmError::SupportTooLarge { size: support.len(), cap });
                }
                let mut total = BigRational::zero();
                for (u, p) in support {
                    if !p.is_zero() && self.evaluate_event(u, e) {
                        total += p;
                    }
                }
                Ok(total)
            }
            Distribution::Independent(marginals) => self.independent_probability(marginals, e, cap),
        }
    }

    pub fn satisfies(&self, cap: usize) -> Result<bool, ScmError> {
        let mut cache: HashMap<&Term, BigRational> = HashMap::new();
        for c in &self.formula.constraints {
            let mut total = BigRational::zero();
            for (k, t) in &c.lhs {
                let p = match cache.get(t) {
                    Some(p) => p.clone(),
                    None => {
                        let p = self.term_probability(&t.event, cap)?;
                        cache.insert(t, p.clone());
                        p
                    }
                };
                total += k * p;
            }
            if !c.relation.holds(&total, &c.rhs) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Forward pass over the causal order for independent hidden variables.
    ///
    /// A state records, for every world (one per distinct intervention in
    /// `e`), the endogenous values still needed later, plus the hidden values
    /// drawn so far that later mechanisms still read. Hidden variables are
    /// drawn lazily on first read, so all worlds share one draw. States that
    /// agree on everything live are merged.
    fn independent_probability(
        &self,
        marginals: &[Vec<BigRational>],
        e: &CounterfactEvent,
        cap: usize,
    ) -> Result<BigRational, ScmError> {
        let m = self.model;
        let n = m.variables.len();
        let hcount = m.hidden.len();

        let mut worlds: Vec<(&Intervention, Vec<(usize, usize)>)> = Vec::new();
        let mut needed = vec![false; n];
        e.for_each_leaf(&mut |leaf| {
            if !worlds.iter().any(|(g, _)| **g == leaf.intervention) {
                let mapped = map_intervention(&leaf.intervention, &self.var, &self.value).expect("checked at bind");
                worlds.push((&leaf.intervention, mapped));
            }
            leaf.body.for_each_atom(&mut |a| needed[self.var[a.var]] = true);
        });
        let wcount = worlds.len();

        let mut last_endo: Vec<usize> = (0..n).map(|j| if needed[j] { usize::MAX } else { j }).collect();
        let mut last_hidden = vec![usize::MAX; hcount];
        let mut first_hidden_seen = vec![false; hcount];
        for (i, mech) in m.mechanisms.iter().enumerate() {
            let mut touch_endo = |j: usize| {
                if last_endo[j] != usize::MAX {
                    last_endo[j] = last_endo[j].max(i);
                }
            };
            let mut hs = Vec::new();
            match mech {
                Mechanism::Table { inputs, .. } => {
                    for inp in inputs {
                        match *inp {
                            Input::Endogenous(j) => touch_endo(j),
                            Input::Hidden(h) => hs.push(h),
                        }
                    }
                }
                Mechanism::Switch { on, cases } => {
                    on.iter().for_each(|&j| touch_endo(j));
                    hs.extend(cases.iter().filter_map(|c| match c {
                        Output::Hidden(h) => Some(*h),
                        Output::Const(_) => None,
                    }));
                }
            }
            for h in hs {
                last_hidden[h] = i;
                first_hidden_seen[h] = true;
            }
        }
        let mut kill_at: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); n];
        for (j, &l) in last_endo.iter().enumerate() {
            if l != usize::MAX {
                kill_at[l].0.push(j);
            }
        }
        for (h, &l) in last_hidden.iter().enumerate() {
            if first_hidden_seen[h] {
                kill_at[l].1.push(h);
            }
        }
        let supports: Vec<Vec<usize>> =
            marginals.iter().map(|mg| (0..mg.len()).filter(|&x| !mg[x].is_zero()).collect()).collect();

        let slot = |w: usize, j: usize| hcount + w * n + j;
        let mut states: HashMap<Vec<usize>, BigRational> = HashMap::new();
        states.insert(vec![UNSET; hcount + wcount * n], crate::rational::one());

        for i in 0..n {
            let mut next: HashMap<Vec<usize>, BigRational> = HashMap::new();
            for (key, mass) in states {
                let mut partial = vec![(key, mass)];
                for (w, (_, g)) in worlds.iter().enumerate() {
                    if let Some(&(_, x)) = g.iter().find(|(v, _)| *v == i) {
                        for (k, _) in &mut partial {
                            k[slot(w, i)] = x;
                        }
                        continue;
                    }
                    let mut expanded = Vec::with_capacity(partial.len());
                    for (k, p) in partial {
                        let reads: Vec<usize> = match &m.mechanisms[i] {
                            Mechanism::Table { inputs, .. } => inputs
                                .iter()
                                .filter_map(|inp| match inp {
                                    Input::Hidden(h) => Some(*h),
                                    Input::Endogenous(_) => None,
                                })
                                .collect(),
                            Mechanism::Switch { on, cases } => {
                                let row = on.iter().fold(0usize, |acc, &j| acc * m.d() + k[slot(w, j)]);
                                match cases[row] {
                                    Output::Hidden(h) => vec![h],
                                    Output::Const(_) => Vec::new(),
                                }
                            }
                        };
                        let mut branches = vec![(k, p)];
                        for h in reads {
                            if branches[0].0[h] != UNSET {
                                continue;
                            }
                            branches = branches
                                .into_iter()
                                .flat_map(|(k, p)| {
                                    supports[h].iter().map(move |&x| {
                                        let mut k = k.clone();
                                        k[h] = x;
                                        (k, &p * &marginals[h][x])
                                    })
                                })
                                .collect();
                        }
                        for (mut k, p) in branches {
                            let world = &k[hcount + w * n..hcount + (w + 1) * n];
                            let x = m.apply(i, world, &|h| k[h]);
                            k[slot(w, i)] = x;
                            expanded.push((k, p));
                        }
                    }
                    partial = expanded;
                }
                for (mut k, p) in partial {
                    for &j in &kill_at[i].0 {
                        for w in 0..wcount {
                            k[slot(w, j)] = UNSET;
                        }
                    }
                    for &h in &kill_at[i].1 {
                        k[h] = UNSET;
                    }
                    *next.entry(k).or_insert_with(BigRational::zero) += p;
                }
                if next.len() > cap {
                    return Err(ScmError::SupportTooLarge { size: next.len(), cap });
                }
            }
            states = next;
        }

        let mut total = BigRational::zero();
        for (k, p) in states {
            let holds = e.eval(&mut |leaf| {
                let w = worlds.iter().position(|(g, _)| **g == leaf.intervention).expect("collected");
                let world = &k[hcount + w * n..hcount + (w + 1) * n];
                leaf.body.holds(&|a| self.atom_holds(world, a))
            });
            if holds {
                total += p;
            }
        }
        Ok(total)
    }
}
