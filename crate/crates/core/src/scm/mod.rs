//! Recursive structural causal models over a finite domain, with exact
//! evaluation of (counterfactual) events and term probabilities.

mod eval;
mod json;

use crate::formula::{Atom, Formula, Intervention};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

pub use eval::Bound;
pub use json::ScmJson;

/// Default cap on enumerated hidden-value tuples (or DP states).
pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScmError {
    #[error("support of {size} tuples exceeds the cap of {cap}")]
    SupportTooLarge { size: usize, cap: usize },
    #[error("model has no endogenous variable `{0}`")]
    UnknownVariable(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenVariable {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Input {
    Hidden(usize),
    Endogenous(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Output {
    Const(usize),
    /// The value of a hidden variable whose values coincide with the domain.
    Hidden(usize),
}

/// How an endogenous variable is computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mechanism {
    /// Total table over the listed inputs, row-major with the first input
    /// most significant. Inputs not listed are ignored.
    Table { inputs: Vec<Input>, table: Vec<usize> },
    /// Case split on earlier endogenous variables; one output per joint value
    /// of `on` (same row-major layout).
    Switch { on: Vec<usize>, cases: Vec<Output> },
}

impl Mechanism {
    pub fn constant(value: usize) -> Self {
        Mechanism::Table { inputs: Vec::new(), table: vec![value] }
    }
}

/// Distribution over `Val(U)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Distribution {
    /// Sparse joint: omitted tuples have probability zero.
    Joint(Vec<(Vec<usize>, BigRational)>),
    /// Mutually independent hidden variables, one dense marginal each.
    Independent(Vec<Vec<BigRational>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scm {
    pub domain: Vec<String>,
    /// Endogenous variables in causal order.
    pub variables: Vec<String>,
    pub hidden: Vec<HiddenVariable>,
    /// `mechanisms[i]` computes `variables[i]`.
    pub mechanisms: Vec<Mechanism>,
    pub distribution: Distribution,
}

impl Scm {
    pub fn d(&self) -> usize {
        self.domain.len()
    }

    pub fn validate(&self) -> Result<(), ScmError> {
        let bad = |m: String| Err(ScmError::Invalid(m));
        let d = self.d();
        if d == 0 {
            return bad("empty domain".into());
        }
        if self.mechanisms.len() != self.variables.len() {
            return bad(format!("{} variables but {} mechanisms", self.variables.len(), self.mechanisms.len()));
        }
        for h in &self.hidden {
            if h.values.is_empty() {
                return bad(format!("hidden variable `{}` has no values", h.name));
            }
        }
        for (i, m) in self.mechanisms.iter().enumerate() {
            let name = &self.variables[i];
            match m {
                Mechanism::Table { inputs, table } => {
                    let mut rows = 1usize;
                    for inp in inputs {
                        let r = match *inp {
                            Input::Hidden(h) if h < self.hidden.len() => self.hidden[h].values.len(),
                            Input::Endogenous(j) if j < i => d,
                            _ => return bad(format!("`{name}` reads an input that is not available to it")),
                        };
                        rows = rows
                            .checked_mul(r)
                            .ok_or_else(|| ScmError::Invalid(format!("table of `{name}` too large")))?;
                    }
                    if table.len() != rows {
                        return bad(format!("table of `{name}` has {} rows, expected {rows}", table.len()));
                    }
                    if table.iter().any(|&v| v >= d) {
                        return bad(format!("table of `{name}` outputs a value outside the domain"));
                    }
                }
                Mechanism::Switch { on, cases } => {
                    if on.iter().any(|&j| j >= i) {
                        return bad(format!("`{name}` switches on a later variable"));
                    }
                    let rows = d.checked_pow(on.len() as u32).unwrap_or(usize::MAX);
                    if cases.len() != rows {
                        return bad(format!("`{name}` has {} cases, expected {rows}", cases.len()));
                    }
                    for c in cases {
                        match *c {
                            Output::Const(v) if v < d => {}
                            Output::Hidden(h) if h < self.hidden.len() && self.hidden[h].values.len() == d => {}
                            _ => return bad(format!("`{name}` has an invalid case output")),
                        }
                    }
                }
            }
        }
        let mut total = BigRational::zero();
        match &self.distribution {
            Distribution::Joint(support) => {
                for (u, p) in support {
                    if u.len() != self.hidden.len() || u.iter().zip(&self.hidden).any(|(&x, h)| x >= h.values.len()) {
                        return bad("distribution tuple does not match the hidden variables".into());
                    }
                    if p.is_negative() {
                        return bad("negative probability".into());
                    }
                    total += p;
                }
            }
            Distribution::Independent(marginals) => {
                if marginals.len() != self.hidden.len() {
                    return bad("one marginal per hidden variable is required".into());
                }
                for (m, h) in marginals.iter().zip(&self.hidden) {
                    if m.len() != h.values.len() || m.iter().any(Signed::is_negative) {
                        return bad(format!("bad marginal for `{}`", h.name));
                    }
                    let s: BigRational = m.iter().sum();
                    if s != crate::rational::one() {
                        return bad(format!("marginal of `{}` sums to {s}", h.name));
                    }
                }
                total = crate::rational::one();
            }
        }
        if total != crate::rational::one() {
            return bad(format!("probabilities sum to {total}"));
        }
        Ok(())
    }

    /// Binds the model to a formula's variable and value names.
    pub fn bind<'a>(&'a self, f: &'a Formula) -> Result<Bound<'a>, ScmError> {
        Bound::new(self, f)
    }

    /// Whether `F, u ⊨ e` for a hidden-value tuple `u`.
    pub fn evaluate_event(
        &self,
        f: &Formula,
        u: &[usize],
        e: &crate::formula::CounterfactEvent,
    ) -> Result<bool, ScmError> {
        Ok(self.bind(f)?.evaluate_event(u, e))
    }

    pub fn term_probability(&self, f: &Formula, e: &crate::formula::CounterfactEvent) -> Result<BigRational, ScmError> {
        self.bind(f)?.term_probability(e, DEFAULT_SUPPORT_CAP)
    }

    /// Exact check of every constraint of `f`.
    pub fn satisfies(&self, f: &Formula) -> Result<bool, ScmError> {
        self.bind(f)?.satisfies(DEFAULT_SUPPORT_CAP)
    }

    /// Endogenous values for hidden tuple `u` under intervention `(var, value)`
    /// pairs given in model indices.
    pub fn solve_world(&self, u: &[usize], intervention: &[(usize, usize)]) -> Vec<usize> {
        let mut vals = vec![0usize; self.variables.len()];
        for i in 0..self.variables.len() {
            vals[i] = match intervention.iter().find(|(v, _)| *v == i) {
                Some(&(_, x)) => x,
                None => self.apply(i, &vals, &|h| u[h]),
            };
        }
        vals
    }

    fn apply(&self, i: usize, vals: &[usize], hidden: &impl Fn(usize) -> usize) -> usize {
        match &self.mechanisms[i] {
            Mechanism::Table { inputs, table } => {
                let mut row = 0usize;
                for inp in inputs {
                    let (x, r) = match *inp {
                        Input::Hidden(h) => (hidden(h), self.hidden[h].values.len()),
                        Input::Endogenous(j) => (vals[j], self.d()),
                    };
                    row = row * r + x;
                }
                table[row]
            }
            Mechanism::Switch { on, cases } => {
                let row = on.iter().fold(0usize, |acc, &j| acc * self.d() + vals[j]);
                match cases[row] {
                    Output::Const(v) => v,
                    Output::Hidden(h) => hidden(h),
                }
            }
        }
    }

    /// Replaces hidden outputs with point-mass marginals by constants and drops
    /// hidden variables nothing reads any more. Only for independent models.
    pub fn simplify_deterministic(&self) -> Scm {
        let Distribution::Independent(marginals) = &self.distribution else {
            return self.clone();
        };
        let point: Vec<Option<usize>> = marginals
            .iter()
            .map(|m| {
                let nz: Vec<usize> = (0..m.len()).filter(|&x| !m[x].is_zero()).collect();
                (nz.len() == 1).then(|| nz[0])
            })
            .collect();
        let mut used = vec![false; self.hidden.len()];
        let mechanisms: Vec<Mechanism> = self
            .mechanisms
            .iter()
            .map(|m| match m {
                Mechanism::Switch { on, cases } => Mechanism::Switch {
                    on: on.clone(),
                    cases: cases
                        .iter()
                        .map(|c| match *c {
                            Output::Hidden(h) => match point[h] {
                                Some(v) => Output::Const(v),
                                None => {
                                    used[h] = true;
                                    Output::Hidden(h)
                                }
                            },
                            c => c,
                        })
                        .collect(),
                },
                Mechanism::Table { inputs, .. } => {
                    for inp in inputs {
                        if let Input::Hidden(h) = inp {
                            used[*h] = true;
                        }
                    }
                    m.clone()
                }
            })
            .collect();
        let mut remap = vec![usize::MAX; self.hidden.len()];
        let mut hidden = Vec::new();
        let mut kept = Vec::new();
        for h in 0..self.hidden.len() {
            if used[h] {
                remap[h] = hidden.len();
                hidden.push(self.hidden[h].clone());
                kept.push(marginals[h].clone());
            }
        }
        let mechanisms = mechanisms
            .into_iter()
            .map(|m| match m {
                Mechanism::Switch { on, cases } => Mechanism::Switch {
                    on,
                    cases: cases
                        .into_iter()
                        .map(|c| match c {
                            Output::Hidden(h) => Output::Hidden(remap[h]),
                            c => c,
                        })
                        .collect(),
                },
                Mechanism::Table { inputs, table } => Mechanism::Table {
                    inputs: inputs
                        .into_iter()
                        .map(|i| match i {
                            Input::Hidden(h) => Input::Hidden(remap[h]),
                            i => i,
                        })
                        .collect(),
                    table,
                },
            })
            .collect();
        Scm {
            domain: self.domain.clone(),
            variables: self.variables.clone(),
            hidden,
            mechanisms,
            distribution: Distribution::Independent(kept),
        }
    }
}

/// Intervention translated into model indices; `None` if it sets a value the
/// model's domain does not have.
pub(crate) fn map_intervention(
    g: &Intervention,
    var: &[usize],
    value: &[Option<usize>],
) -> Option<Vec<(usize, usize)>> {
    g.atoms()
        .iter()
        .map(|&Atom { var: v, value: x }| value[x].map(|mx| (var[v], mx)))
        .collect()
}

#[cfg(test)]
mod tests;
