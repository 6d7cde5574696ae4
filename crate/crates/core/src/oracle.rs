//! Brute-force deciders used to cross-check the solvers.

use crate::formula::{Depth, Formula, FormulaError, Relation};
use crate::lpcore::{solve_feasibility, FarkasCertificate, LpError, LpOptions, LpOutcome, RationalLinearProgram};
use crate::prob_solver::decode;
use crate::rational::{format_rational, one, parse_rational};
use crate::reductions::{CnfInstance, ColoredGraph};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of full assignments the joint oracle will enumerate.
pub const DEFAULT_JOINT_CAP: usize = 1 << 16;
pub const MAX_TRUTH_TABLE_VARS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("formula is not intervention-free")]
    NotProb,
    #[error("{size} full assignments exceed the cap of {cap}")]
    TooLarge { size: BigUint, cap: usize },
    #[error("{vars} variables exceed the truth-table limit of {limit}")]
    TooManyVariables { vars: usize, limit: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// A distribution over all of `D^n`, dense in mixed-radix order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointDistributionCertificate {
    pub probabilities: Vec<BigRational>,
}

impl JointDistributionCertificate {
    /// Direct exact evaluation of every constraint.
    pub fn verify(&self, f: &Formula) -> bool {
        let (n, d) = (f.n(), f.d());
        let Some(size) = d.checked_pow(n as u32) else { return false };
        if self.probabilities.len() != size
            || self.probabilities.iter().any(Signed::is_negative)
            || self.probabilities.iter().sum::<BigRational>() != one()
        {
            return false;
        }
        let tuples: Vec<Vec<usize>> = (0..size).map(|t| decode(t, d, n)).collect();
        f.constraints.iter().all(|c| {
            c.holds_with(|term| {
                let event = term.event.as_prop().expect("intervention-free");
                tuples
                    .iter()
                    .zip(&self.probabilities)
                    .filter(|(t, _)| event.eval(t))
                    .map(|(_, p)| p.clone())
                    .sum()
            })
        })
    }
}

pub const CERTIFICATE_KIND: &str = "joint-distribution";

/// On-disk form: probabilities in mixed-radix order over `domain^variables`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointJson {
    pub kind: String,
    pub variables: Vec<String>,
    pub domain: Vec<String>,
    pub probabilities: Vec<String>,
}

impl JointDistributionCertificate {
    pub fn to_json(&self, f: &Formula) -> JointJson {
        JointJson {
            kind: CERTIFICATE_KIND.into(),
            variables: f.variables.clone(),
            domain: f.domain.values().to_vec(),
            probabilities: self.probabilities.iter().map(format_rational).collect(),
        }
    }

    /// Reads a certificate written for `f`; variable and value names must match.
    pub fn from_json(j: &JointJson, f: &Formula) -> Result<Self, String> {
        if j.kind != CERTIFICATE_KIND {
            return Err(format!("expected kind `{CERTIFICATE_KIND}`, found `{}`", j.kind));
        }
        if j.variables != f.variables || j.domain != f.domain.values() {
            return Err("variables or domain differ from the formula".into());
        }
        let probabilities = j
            .probabilities
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| format!("bad probability `{s}`")))
            .collect::<Result<_, _>>()?;
        Ok(Self { probabilities })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JointVerdict {
    Sat(JointDistributionCertificate),
    Unsat(FarkasCertificate),
}

impl JointVerdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, JointVerdict::Sat(_))
    }
}

/// LP over the full joint distribution: one variable per tuple in `D^n`.
pub fn prob_joint_oracle(f: &Formula, cap: usize) -> Result<JointVerdict, OracleError> {
    if f.validate_and_classify()?.depth != Depth::Prob {
        return Err(OracleError::NotProb);
    }
    let (n, d) = (f.n(), f.d());
    let size = match d.checked_pow(n as u32) {
        Some(s) if s <= cap => s,
        _ => return Err(OracleError::TooLarge { size: BigUint::from(d).pow(n as u32), cap }),
    };
    let mut lp = RationalLinearProgram::new();
    for t in 0..size {
        lp.add_nonneg(format!("x{t}"));
    }
    lp.add_constraint((0..size).map(|t| (t, one())), Relation::Eq, one());
    let tuples: Vec<Vec<usize>> = (0..size).map(|t| decode(t, d, n)).collect();
    for c in &f.constraints {
        let mut row = Vec::new();
        for (k, term) in &c.lhs {
            let event = term.event.as_prop().ok_or(OracleError::NotProb)?;
            row.extend(tuples.iter().enumerate().filter(|(_, t)| event.eval(t)).map(|(i, _)| (i, k.clone())));
        }
        lp.add_constraint(row, c.relation, c.rhs.clone());
    }
    let opts = LpOptions { max_variables: cap.max(1) };
    Ok(match solve_feasibility(&lp, &opts)? {
        LpOutcome::Feasible { point } => JointVerdict::Sat(JointDistributionCertificate { probabilities: point }),
        LpOutcome::Infeasible { farkas } => JointVerdict::Unsat(farkas),
    })
}

/// Exhaustive satisfiability check of a CNF.
pub fn truth_table_sat(cnf: &CnfInstance) -> Result<bool, OracleError> {
    if cnf.vars > MAX_TRUTH_TABLE_VARS {
        return Err(OracleError::TooManyVariables { vars: cnf.vars, limit: MAX_TRUTH_TABLE_VARS });
    }
    let mut assignment = vec![false; cnf.vars];
    Ok((0u32..1 << cnf.vars).any(|bits| {
        for (i, a) in assignment.iter_mut().enumerate() {
            *a = bits >> i & 1 == 1;
        }
        cnf.satisfied_by(&assignment)
    }))
}

/// Whether `g` has a clique with one vertex of each color `1..=k`.
pub fn max_clique_exists(g: &ColoredGraph, k: usize) -> bool {
    fn extend(g: &ColoredGraph, k: usize, chosen: &mut Vec<usize>) -> bool {
        let color = chosen.len() + 1;
        if color > k {
            return true;
        }
        for v in 0..g.colors.len() {
            if g.colors[v] == color && chosen.iter().all(|&u| g.has_edge(u, v)) {
                chosen.push(v);
                if extend(g, k, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    extend(g, k, &mut Vec::new())
}
