//! Satisfiability checking for sets of linear constraints over probabilistic,
//! interventional and counterfactual probability terms.
//!
//! Two decision procedures are provided:
//!
//! * [`prob_solver`] handles intervention-free formulas. It builds an exact
//!   rational LP over bag marginals of a nice tree decomposition of the
//!   formula's primal graph, so its size is `O(n * d^(w+1))` for width `w`.
//! * [`cf_solver`] handles interventional and counterfactual formulas by
//!   trying every variable ordering and solving an LP over tuples of
//!   functions (one hidden variable whose values select the mechanisms).
//!
//! Both return exactly checkable certificates: bag marginals (from which a
//! structural causal model is rebuilt) or an explicit canonical model. UNSAT
//! answers carry Farkas multipliers.

pub mod cf_solver;
pub mod decomp;
pub mod formula;
pub mod instances;
pub mod lpcore;
pub mod oracle;
pub mod prob_solver;
pub mod rational;
pub mod reductions;
pub mod scm;

mod par;

pub use formula::{Formula, FragmentClass};
pub use num_rational::BigRational;
pub use scm::Scm;

/// How data-parallel loops are executed.
///
/// `Parallel` falls back to sequential execution when the crate is built
/// without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}
