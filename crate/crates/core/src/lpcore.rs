//! Exact rational LP feasibility.
//!
//! Phase-one simplex on a sparse tableau with Bland's rule. No floating point
//! is used anywhere. Every answer is self-checked before it is returned: a
//! feasible point must satisfy all constraints exactly, and an infeasibility
//! verdict carries Farkas multipliers that are verified against the input.

use crate::formula::Relation;
use crate::rational::{format_decimal, one, zero};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

pub const DEFAULT_MAX_VARIABLES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("LP has {count} variables, over the cap of {cap}")]
    TooManyVariables { count: usize, cap: usize },
    #[error("internal LP failure: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpConstraint {
    /// Sparse coefficients, sorted by variable, no zeros, no repeats.
    pub coeffs: Vec<(usize, BigRational)>,
    pub relation: Relation,
    pub rhs: BigRational,
}

impl LpConstraint {
    fn lhs_at(&self, point: &[BigRational]) -> BigRational {
        self.coeffs.iter().map(|(j, a)| a * &point[*j]).sum()
    }
}

/// Feasibility system `A x REL b` with optional lower bounds (`None` = free).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RationalLinearProgram {
    names: Vec<String>,
    lower: Vec<Option<BigRational>>,
    constraints: Vec<LpConstraint>,
}

impl RationalLinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: Option<BigRational>) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.names.len() - 1
    }

    /// Adds a variable with lower bound zero.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> usize {
        self.add_variable(name, Some(zero()))
    }

    /// Adds `Σ coeffs REL rhs`; repeated variables are summed, zeros dropped.
    pub fn add_constraint(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, BigRational)>,
        relation: Relation,
        rhs: BigRational,
    ) -> usize {
        let mut merged: Vec<(usize, BigRational)> = coeffs.into_iter().collect();
        merged.sort_by_key(|(j, _)| *j);
        let mut out: Vec<(usize, BigRational)> = Vec::with_capacity(merged.len());
        for (j, a) in merged {
            assert!(j < self.names.len(), "constraint references unknown variable {j}");
            match out.last_mut() {
                Some((k, b)) if *k == j => *b += a,
                _ => out.push((j, a)),
            }
        }
        out.retain(|(_, a)| !a.is_zero());
        self.constraints.push(LpConstraint { coeffs: out, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower_bounds(&self) -> &[Option<BigRational>] {
        &self.lower
    }

    pub fn constraints(&self) -> &[LpConstraint] {
        &self.constraints
    }

    /// True iff `point` meets every bound and constraint exactly.
    pub fn check_point(&self, point: &[BigRational]) -> bool {
        point.len() == self.names.len()
            && self.lower.iter().zip(point).all(|(l, x)| l.as_ref().is_none_or(|l| x >= l))
            && self.constraints.iter().all(|c| c.relation.holds(&c.lhs_at(point), &c.rhs))
    }

    /// CPLEX-LP text with decimal coefficients. For inspection only.
    pub fn to_cplex_lp(&self) -> String {
        let mut out = String::new();
        for (j, name) in self.names.iter().enumerate() {
            let _ = writeln!(out, "\\ x{j} = {name}");
        }
        out.push_str("Minimize\n obj:");
        if self.names.is_empty() {
            out.push_str(" 0");
        } else {
            out.push_str(" 0 x0");
        }
        out.push_str("\nSubject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            if c.coeffs.is_empty() {
                out.push_str(" 0 x0");
            }
            for (j, a) in &c.coeffs {
                let sign = if a.is_negative() { '-' } else { '+' };
                let _ = write!(out, " {sign} {} x{j}", format_decimal(&a.abs(), 12));
            }
            let _ = writeln!(out, " {} {}", c.relation.symbol(), format_decimal(&c.rhs, 12));
        }
        out.push_str("Bounds\n");
        for (j, l) in self.lower.iter().enumerate() {
            match l {
                Some(l) => {
                    let _ = writeln!(out, " x{j} >= {}", format_decimal(l, 12));
                }
                None => {
                    let _ = writeln!(out, " x{j} free");
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

/// Nonnegative combination of constraints that derives `0 <= -1`.
///
/// Each constraint is read as `a x <= b` (`>=` rows are negated first);
/// multipliers of inequality rows must be nonnegative, equality rows may take
/// any sign.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<BigRational>,
}

impl FarkasCertificate {
    /// Returns `(combined coefficients, combined rhs)` in `<=` orientation.
    fn combine(&self, lp: &RationalLinearProgram) -> (Vec<BigRational>, BigRational) {
        let mut coeffs = vec![zero(); lp.num_variables()];
        let mut rhs = zero();
        for (mu, c) in self.multipliers.iter().zip(&lp.constraints) {
            if mu.is_zero() {
                continue;
            }
            let mu = if c.relation == Relation::Ge { -mu.clone() } else { mu.clone() };
            for (j, a) in &c.coeffs {
                coeffs[*j] += &mu * a;
            }
            rhs += &mu * &c.rhs;
        }
        (coeffs, rhs)
    }

    /// Exact check that the multipliers prove infeasibility.
    pub fn verify(&self, lp: &RationalLinearProgram) -> bool {
        if self.multipliers.len() != lp.num_constraints() {
            return false;
        }
        let signs_ok = self
            .multipliers
            .iter()
            .zip(&lp.constraints)
            .all(|(mu, c)| c.relation == Relation::Eq || !mu.is_negative());
        if !signs_ok {
            return false;
        }
        let (coeffs, rhs) = self.combine(lp);
        // Σ c_j x_j >= Σ c_j l_j must hold for every x within bounds.
        let mut floor = zero();
        for (c, l) in coeffs.iter().zip(&lp.lower) {
            match l {
                None if !c.is_zero() => return false,
                None => {}
                Some(_) if c.is_negative() => return false,
                Some(l) => floor += c * l,
            }
        }
        rhs < floor
    }

    fn normalized(mut self, lp: &RationalLinearProgram) -> Self {
        let (coeffs, rhs) = self.combine(lp);
        let floor: BigRational = coeffs
            .iter()
            .zip(&lp.lower)
            .filter_map(|(c, l)| l.as_ref().map(|l| c * l))
            .sum();
        let gap = floor - rhs;
        if gap.is_positive() {
            for mu in &mut self.multipliers {
                *mu /= &gap;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Feasible { point: Vec<BigRational> },
    Infeasible { farkas: FarkasCertificate },
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Feasible { .. })
    }
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub max_variables: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self { max_variables: DEFAULT_MAX_VARIABLES }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
enum Split {
    /// `x = l + z`.
    Shift(usize, BigRational),
    /// `x = z+ - z-`.
    Free(usize, usize),
}

type Row = Vec<(usize, BigRational)>;

struct Tableau {
    rows: Vec<Row>,
    rhs: Vec<BigRational>,
    basis: Vec<usize>,
    /// Reduced costs of the phase-one objective.
    reduced: Vec<BigRational>,
    objective: BigRational,
    /// Columns at or past this index are artificial and never enter.
    first_artificial: usize,
}

fn entry(row: &Row, col: usize) -> Option<&BigRational> {
    row.binary_search_by_key(&col, |(j, _)| *j).ok().map(|k| &row[k].1)
}

/// `a - f * b` for sorted sparse rows.
fn axpy(a: &Row, f: &BigRational, b: &Row) -> Row {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut k) = (0, 0);
    while i < a.len() || k < b.len() {
        let take_a = k >= b.len() || (i < a.len() && a[i].0 < b[k].0);
        let take_b = i >= a.len() || (k < b.len() && b[k].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[k].0, -(f * &b[k].1)));
            k += 1;
        } else {
            let v = &a[i].1 - f * &b[k].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            k += 1;
        }
    }
    out
}

impl Tableau {
    fn pivot(&mut self, r: usize, q: usize) {
        let piv = entry(&self.rows[r], q).expect("pivot entry").clone();
        for (_, v) in &mut self.rows[r] {
            *v /= &piv;
        }
        self.rhs[r] /= &piv;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            if let Some(f) = entry(&self.rows[i], q).cloned() {
                self.rows[i] = axpy(&self.rows[i], &f, &pivot_row);
                let delta = &f * &self.rhs[r];
                self.rhs[i] -= delta;
            }
        }
        let dq = self.reduced[q].clone();
        if !dq.is_zero() {
            for (j, v) in &pivot_row {
                self.reduced[*j] -= &dq * v;
            }
            self.objective += &dq * &self.rhs[r];
        }
        self.rows[r] = pivot_row;
        self.basis[r] = q;
    }

    /// Bland's rule: lowest-index improving column, then lowest-index basic
    /// variable among tied ratios.
    fn run(&mut self) -> Result<(), LpError> {
        loop {
            if self.objective.is_zero() {
                return Ok(());
            }
            let Some(q) = (0..self.first_artificial).find(|&j| self.reduced[j].is_negative()) else {
                return Ok(());
            };
            let mut best: Option<(usize, BigRational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let Some(a) = entry(row, q) else { continue };
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else {
                return Err(LpError::Internal("phase-one objective unbounded".into()));
            };
            self.pivot(r, q);
        }
    }
}

/// Decides feasibility of `lp` exactly.
pub fn solve_feasibility(lp: &RationalLinearProgram, opts: &LpOptions) -> Result<LpOutcome, LpError> {
    let nvars = lp.num_variables();
    if nvars > opts.max_variables {
        return Err(LpError::TooManyVariables { count: nvars, cap: opts.max_variables });
    }
    let m = lp.num_constraints();

    // Map variables to nonnegative columns.
    let mut splits = Vec::with_capacity(nvars);
    let mut ncols = 0usize;
    for l in &lp.lower {
        match l {
            Some(l) => {
                splits.push(Split::Shift(ncols, l.clone()));
                ncols += 1;
            }
            None => {
                splits.push(Split::Free(ncols, ncols + 1));
                ncols += 2;
            }
        }
    }
    let mut columns: Vec<Row> = vec![Vec::new(); ncols];
    let mut rhs: Vec<BigRational> = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut b = c.rhs.clone();
        for (j, a) in &c.coeffs {
            match &splits[*j] {
                Split::Shift(col, l) => {
                    columns[*col].push((i, a.clone()));
                    b -= a * l;
                }
                Split::Free(p, n) => {
                    columns[*p].push((i, a.clone()));
                    columns[*n].push((i, -a.clone()));
                }
            }
        }
        rhs.push(b);
    }

    // Identical columns are interchangeable in a feasibility problem: keep the
    // first of each group and give the rest value zero.
    let mut representative: Vec<usize> = Vec::with_capacity(ncols);
    let mut kept: Vec<usize> = Vec::new();
    {
        let mut seen: HashMap<&Row, usize> = HashMap::new();
        for (col, entries) in columns.iter().enumerate() {
            let k = *seen.entry(entries).or_insert_with(|| {
                kept.push(col);
                kept.len() - 1
            });
            representative.push(k);
        }
    }
    let nstruct = kept.len();

    // Slack columns follow the structural ones, artificials come last.
    let sign: Vec<BigRational> = rhs.iter().map(|b| if b.is_negative() { -one() } else { one() }).collect();
    let mut rows: Vec<Row> = vec![Vec::new(); m];
    for (k, &col) in kept.iter().enumerate() {
        for (i, a) in &columns[col] {
            rows[*i].push((k, a * &sign[*i]));
        }
    }
    let mut slack_of = vec![None; m];
    let mut next = nstruct;
    for (i, c) in lp.constraints.iter().enumerate() {
        let s = match c.relation {
            Relation::Le => one(),
            Relation::Ge => -one(),
            Relation::Eq => continue,
        };
        rows[i].push((next, s * &sign[i]));
        slack_of[i] = Some(next);
        next += 1;
    }
    let first_artificial = next;
    let mut basis = vec![0usize; m];
    let mut unit_col = vec![0usize; m];
    let mut is_art_row = vec![false; m];
    for i in 0..m {
        match slack_of[i] {
            Some(s) if entry(&rows[i], s).is_some_and(|v| v.is_positive()) => {
                basis[i] = s;
                unit_col[i] = s;
            }
            _ => {
                rows[i].push((next, one()));
                basis[i] = next;
                unit_col[i] = next;
                is_art_row[i] = true;
                next += 1;
            }
        }
    }
    let total_cols = next;
    let rhs: Vec<BigRational> = rhs.iter().zip(&sign).map(|(b, s)| b * s).collect();

    let mut reduced = vec![zero(); total_cols];
    for c in reduced.iter_mut().skip(first_artificial) {
        *c = one();
    }
    let mut objective = zero();
    for i in 0..m {
        if is_art_row[i] {
            for (j, a) in &rows[i] {
                reduced[*j] -= a;
            }
            objective += &rhs[i];
        }
    }

    let mut t = Tableau { rows, rhs, basis, reduced, objective, first_artificial };
    t.run()?;

    if t.objective.is_zero() {
        let mut z = vec![zero(); total_cols];
        for (i, &b) in t.basis.iter().enumerate() {
            z[b] = t.rhs[i].clone();
        }
        let col_value = |col: usize| -> BigRational {
            let k = representative[col];
            if kept[k] == col {
                z[k].clone()
            } else {
                zero()
            }
        };
        let point: Vec<BigRational> = splits
            .iter()
            .map(|s| match s {
                Split::Shift(col, l) => l + col_value(*col),
                Split::Free(p, n) => col_value(*p) - col_value(*n),
            })
            .collect();
        if !lp.check_point(&point) {
            return Err(LpError::Internal("simplex point fails the exact check".into()));
        }
        return Ok(LpOutcome::Feasible { point });
    }

    // Phase-one duals y_i = c_u - d_u over each row's initial unit column;
    // w = -y satisfies w A >= 0 and w b < 0. Undo the row sign flips and
    // orient every row as `<=`.
    let multipliers: Vec<BigRational> = (0..m)
        .map(|i| {
            let cost = if is_art_row[i] { one() } else { zero() };
            let y = cost - &t.reduced[unit_col[i]];
            let w = -y * &sign[i];
            match lp.constraints[i].relation {
                Relation::Ge => -w,
                _ => w,
            }
        })
        .collect();
    let farkas = FarkasCertificate { multipliers }.normalized(lp);
    if !farkas.verify(lp) {
        return Err(LpError::Internal("Farkas multipliers fail the exact check".into()));
    }
    Ok(LpOutcome::Infeasible { farkas })
}
