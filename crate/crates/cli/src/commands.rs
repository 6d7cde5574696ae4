use crate::{Cli, Command, DecompArgs, DecompChoice, DecompFormat, Fragment, GenCommand, OracleCommand, SolveArgs, VerifyArgs};
use pchsat::cf_solver::{self, CanonicalJson, CanonicalModel, CfOptions, CfVerdict};
use pchsat::decomp::{compute_decomposition_with_limit, Strategy, DEFAULT_EXACT_LIMIT};
use pchsat::formula::{Depth, Formula};
use pchsat::lpcore::{FarkasCertificate, LpOptions};
use pchsat::oracle::{self, JointDistributionCertificate, JointJson, JointVerdict};
use pchsat::prob_solver::{self, BagMarginalCertificate, CertificateJson, ProbOptions, ProbVerdict};
use pchsat::rational::{format_rational, parse_rational};
use pchsat::reductions::{self, CnfInstance, ColoredGraph};
use pchsat::{Execution, Scm};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

const FARKAS_KIND: &str = "farkas";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Input { path: PathBuf, msg: String },
    #[error("formula is {class}, which the prob-lin solver does not accept")]
    FragmentMismatch { class: String },
    #[error("{0}")]
    Solver(String),
    #[error("certificate: {0}")]
    Certificate(String),
    #[error("certificate produced by the solver failed re-verification")]
    SelfCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Accepted,
    Rejected,
    Done,
}

impl Status {
    pub fn code(self, dimacs: bool) -> u8 {
        match (self, dimacs) {
            (Status::Sat, true) => 10,
            (Status::Unsat, true) => 20,
            (Status::Sat | Status::Accepted | Status::Done, _) => 0,
            (Status::Unsat | Status::Rejected, _) => 1,
        }
    }

    fn from_bool(sat: bool) -> Self {
        if sat {
            Status::Sat
        } else {
            Status::Unsat
        }
    }
}

pub fn run(cli: &Cli) -> Result<Status, CliError> {
    match &cli.command {
        Command::Solve(a) => solve(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::Oracle(o) => run_oracle(cli, o),
        Command::Gen(g) => generate(g),
        Command::Decomp(a) => decomp(a),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(io)?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(io)
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_json(v: &impl Serialize) {
    emit(&(serde_json::to_string_pretty(v).expect("serializable") + "\n"));
}

fn load_formula(path: &Path) -> Result<Formula, CliError> {
    let f: Formula = read(path)?.parse().map_err(|e| CliError::Input { path: path.to_path_buf(), msg: format!("{e}") })?;
    f.validate().map_err(|e| CliError::Input { path: path.to_path_buf(), msg: e.to_string() })?;
    Ok(f)
}

fn load_cnf(path: &Path) -> Result<CnfInstance, CliError> {
    CnfInstance::from_dimacs(&read(path)?).map_err(|e| CliError::Input { path: path.to_path_buf(), msg: e.to_string() })
}

fn load_graph(path: &Path) -> Result<ColoredGraph, CliError> {
    ColoredGraph::parse(&read(path)?).map_err(|e| CliError::Input { path: path.to_path_buf(), msg: e.to_string() })
}

fn strategy(c: DecompChoice) -> Strategy {
    match c {
        DecompChoice::Greedy => Strategy::GreedyMinFill,
        DecompChoice::Exact => Strategy::Exact,
    }
}

fn solver_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

#[derive(Serialize)]
struct RunReport {
    verdict: &'static str,
    fragment: String,
    solver: &'static str,
    parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    verified: Option<bool>,
    certificate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing_ms: Option<f64>,
}

fn verdict_name(sat: bool) -> &'static str {
    if sat {
        "SAT"
    } else {
        "UNSAT"
    }
}

/// UNSAT certificate: one Farkas vector per LP that was refuted.
#[derive(Debug, Serialize, Deserialize)]
struct FarkasJson {
    kind: String,
    solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decomp: Option<String>,
    #[serde(default)]
    keep_domain: bool,
    refutations: Vec<RefutationJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RefutationJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ordering: Option<Vec<String>>,
    multipliers: Vec<String>,
}

fn multipliers_json(c: &FarkasCertificate) -> Vec<String> {
    c.multipliers.iter().map(format_rational).collect()
}

fn prob_options(cli: &Cli, choice: DecompChoice, keep_domain: bool) -> ProbOptions {
    let mut o = ProbOptions { strategy: strategy(choice), keep_domain, ..Default::default() };
    if let Some(cap) = cli.cap {
        o.lp = LpOptions { max_variables: cap };
    }
    o
}

fn cf_options(cli: &Cli, keep_domain: bool, sequential: bool) -> CfOptions {
    let mut o = CfOptions { keep_domain, ..Default::default() };
    if let Some(cap) = cli.cap {
        o.cap = cap;
        o.lp = LpOptions { max_variables: cap };
    }
    if sequential {
        o.exec = Execution::Sequential;
    }
    o
}

fn solve(cli: &Cli, a: &SolveArgs) -> Result<Status, CliError> {
    let f = load_formula(&a.formula)?;
    let class = f.classify();
    let use_prob = match a.fragment {
        Fragment::Auto => class.depth == Depth::Prob,
        Fragment::ProbLin if class.depth != Depth::Prob => {
            return Err(CliError::FragmentMismatch { class: class.to_string() })
        }
        Fragment::ProbLin => true,
        Fragment::CfLin => false,
    };
    let start = Instant::now();
    let mut report = RunReport {
        verdict: "",
        fragment: class.to_string(),
        solver: if use_prob { "prob-lin" } else { "cf-lin" },
        parameters: Value::Null,
        verified: None,
        certificate: a.certificate.as_ref().map(|p| p.display().to_string()),
        timing_ms: None,
    };
    let sat;
    if use_prob {
        let opts = prob_options(cli, a.decomp, a.keep_domain);
        let out = prob_solver::solve(&f, &opts).map_err(solver_err)?;
        sat = out.is_sat();
        report.parameters = serde_json::to_value(&out.stats).expect("serializable");
        match &out.verdict {
            ProbVerdict::Sat(cert) => {
                if a.verify {
                    report.verified = Some(prob_solver::verify_certificate(&f, cert));
                }
                if let Some(p) = &a.certificate {
                    write_json(p, &cert.to_json())?;
                }
                if let Some(p) = &a.scm {
                    write_json(p, &cert.reconstruct_scm().to_json())?;
                }
            }
            ProbVerdict::Unsat(farkas) => {
                let cert = FarkasJson {
                    kind: FARKAS_KIND.into(),
                    solver: "prob-lin".into(),
                    decomp: Some(format!("{:?}", a.decomp).to_lowercase()),
                    keep_domain: a.keep_domain,
                    refutations: vec![RefutationJson { ordering: None, multipliers: multipliers_json(farkas) }],
                };
                if a.verify {
                    report.verified = Some(check_farkas(cli, &f, &cert)?);
                }
                if let Some(p) = &a.certificate {
                    write_json(p, &cert)?;
                }
            }
        }
    } else {
        let opts = cf_options(cli, a.keep_domain, a.sequential);
        let out = cf_solver::solve(&f, &opts).map_err(solver_err)?;
        sat = out.is_sat();
        report.parameters = serde_json::to_value(&out.stats).expect("serializable");
        match &out.verdict {
            CfVerdict::Sat(model) => {
                if a.verify {
                    report.verified = Some(cf_solver::verify_certificate(&f, model));
                }
                if let Some(p) = &a.certificate {
                    write_json(p, &model.to_json())?;
                }
                if let Some(p) = &a.scm {
                    write_json(p, &model.to_scm().map_err(solver_err)?.to_json())?;
                }
            }
            CfVerdict::Unsat(refs) => {
                let names = |o: &[usize]| o.iter().map(|&v| f.variables[v].clone()).collect();
                let cert = FarkasJson {
                    kind: FARKAS_KIND.into(),
                    solver: "cf-lin".into(),
                    decomp: None,
                    keep_domain: a.keep_domain,
                    refutations: refs
                        .iter()
                        .map(|(o, c)| RefutationJson { ordering: Some(names(o)), multipliers: multipliers_json(c) })
                        .collect(),
                };
                if a.verify {
                    report.verified = Some(check_farkas(cli, &f, &cert)?);
                }
                if let Some(p) = &a.certificate {
                    write_json(p, &cert)?;
                }
            }
        }
    }
    if report.verified == Some(false) {
        return Err(CliError::SelfCheck);
    }
    report.verdict = verdict_name(sat);
    if !cli.no_timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    eprintln!("{} ({}, {} solver)", report.verdict, report.fragment, report.solver);
    print_json(&report);
    Ok(Status::from_bool(sat))
}

/// Rebuilds the refuted LPs and checks each Farkas vector against them.
fn check_farkas(cli: &Cli, f: &Formula, cert: &FarkasJson) -> Result<bool, CliError> {
    let bad = |m: &str| CliError::Certificate(m.to_string());
    let work = if cert.keep_domain { f.clone() } else { f.reduce_domain() };
    let parse = |r: &RefutationJson| -> Result<FarkasCertificate, CliError> {
        let multipliers = r
            .multipliers
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| bad(&format!("bad multiplier `{s}`"))))
            .collect::<Result<_, _>>()?;
        Ok(FarkasCertificate { multipliers })
    };
    match cert.solver.as_str() {
        "prob-lin" => {
            if f.classify().depth != Depth::Prob {
                return Err(bad("prob-lin refutation for a formula with interventions"));
            }
            let choice = match cert.decomp.as_deref() {
                None | Some("greedy") => DecompChoice::Greedy,
                Some("exact") => DecompChoice::Exact,
                Some(other) => return Err(bad(&format!("unknown decomposition `{other}`"))),
            };
            let [r] = cert.refutations.as_slice() else { return Err(bad("expected exactly one refutation")) };
            let nt = prob_solver::decompose(f, strategy(choice), DEFAULT_EXACT_LIMIT).map_err(solver_err)?;
            let built = prob_solver::build_lp(&work, &nt).map_err(solver_err)?;
            Ok(parse(r)?.verify(&built.lp))
        }
        "cf-lin" => {
            let cap = cli.cap.unwrap_or(cf_solver::DEFAULT_FUNCTION_CAP);
            let n = f.n();
            let expected = if work.d() == 1 { 1 } else { (1..=n).product::<usize>() };
            if cert.refutations.len() != expected {
                return Ok(false);
            }
            for (k, r) in cert.refutations.iter().enumerate() {
                let ordering: Vec<usize> = r
                    .ordering
                    .as_ref()
                    .ok_or_else(|| bad("refutation without an ordering"))?
                    .iter()
                    .map(|name| f.var_index(name).ok_or_else(|| bad(&format!("unknown variable `{name}`"))))
                    .collect::<Result<_, _>>()?;
                if ordering != cf_solver::nth_permutation(n, k) {
                    return Ok(false);
                }
                let fs = cf_solver::enumerate_function_space(&work, &ordering, cap).map_err(solver_err)?;
                if !parse(r)?.verify(&cf_solver::build_lp_for_ordering(&work, &fs)) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        other => Err(bad(&format!("unknown solver `{other}`"))),
    }
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<Status, CliError> {
    let f = load_formula(&a.formula)?;
    let text = read(&a.certificate)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Certificate(e.to_string()))?;
    let malformed = |e: String| CliError::Certificate(e);
    let prob_only = |kind: &str| -> Result<(), CliError> {
        if f.classify().depth == Depth::Prob {
            Ok(())
        } else {
            Err(malformed(format!("a `{kind}` certificate cannot witness a formula with interventions")))
        }
    };
    let kind = v.get("kind").and_then(Value::as_str).map(str::to_string);
    let ok = match kind.as_deref() {
        Some(prob_solver::CERTIFICATE_KIND) => {
            prob_only(prob_solver::CERTIFICATE_KIND)?;
            let j: CertificateJson = serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
            let cert = BagMarginalCertificate::from_json(&j).map_err(|e| malformed(e.to_string()))?;
            prob_solver::verify_certificate(&f, &cert)
        }
        Some(cf_solver::CERTIFICATE_KIND) => {
            let j: CanonicalJson = serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
            let m = CanonicalModel::from_json(&j).map_err(|e| malformed(e.to_string()))?;
            cf_solver::verify_certificate(&f, &m)
        }
        Some(oracle::CERTIFICATE_KIND) => {
            prob_only(oracle::CERTIFICATE_KIND)?;
            let j: JointJson = serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
            JointDistributionCertificate::from_json(&j, &f).map_err(malformed)?.verify(&f)
        }
        Some(FARKAS_KIND) => {
            let j: FarkasJson = serde_json::from_value(v).map_err(|e| malformed(e.to_string()))?;
            check_farkas(cli, &f, &j)?
        }
        Some(other) => return Err(malformed(format!("unknown certificate kind `{other}`"))),
        None => {
            let scm = Scm::from_json(v).map_err(|e| malformed(e.to_string()))?;
            scm.satisfies(&f).map_err(|e| malformed(e.to_string()))?
        }
    };
    eprintln!("{}", if ok { "certificate verified" } else { "certificate REJECTED" });
    print_json(&json!({ "kind": kind.unwrap_or_else(|| "scm".into()), "verified": ok }));
    Ok(if ok { Status::Accepted } else { Status::Rejected })
}

fn run_oracle(cli: &Cli, o: &OracleCommand) -> Result<Status, CliError> {
    let start = Instant::now();
    let (sat, mut report) = match o {
        OracleCommand::Joint { formula, certificate } => {
            let f = load_formula(formula)?;
            let cap = cli.cap.unwrap_or(oracle::DEFAULT_JOINT_CAP);
            let verdict = oracle::prob_joint_oracle(&f, cap).map_err(solver_err)?;
            if let (JointVerdict::Sat(cert), Some(p)) = (&verdict, certificate) {
                write_json(p, &cert.to_json(&f))?;
            }
            let size = f.d().pow(f.n() as u32);
            (verdict.is_sat(), json!({ "oracle": "joint", "n": f.n(), "d": f.d(), "assignments": size }))
        }
        OracleCommand::Cnf { cnf } => {
            let c = load_cnf(cnf)?;
            let sat = oracle::truth_table_sat(&c).map_err(solver_err)?;
            (sat, json!({ "oracle": "truth-table", "vars": c.vars, "clauses": c.clauses.len() }))
        }
        OracleCommand::Clique { graph, k } => {
            let g = load_graph(graph)?;
            let sat = oracle::max_clique_exists(&g, *k);
            (sat, json!({ "oracle": "clique", "vertices": g.names.len(), "k": k }))
        }
    };
    report["verdict"] = json!(verdict_name(sat));
    if !cli.no_timing {
        report["timing_ms"] = json!(start.elapsed().as_secs_f64() * 1e3);
    }
    eprintln!("{}", verdict_name(sat));
    print_json(&report);
    Ok(Status::from_bool(sat))
}

fn generate(g: &GenCommand) -> Result<Status, CliError> {
    let f = match g {
        GenCommand::ThreesatBase { cnf } => {
            let c = load_cnf(cnf)?;
            if !c.balanced_occurrences() {
                eprintln!("warning: not every variable occurs twice positively and twice negatively; the degree bound of 8 may not hold");
            }
            reductions::gen_threesat_probbase(&c)
        }
        GenCommand::Clique { graph, k } => {
            let gr = load_graph(graph)?;
            reductions::gen_clique_probbase(&gr, *k).map_err(|e| CliError::Input { path: graph.clone(), msg: e.to_string() })?
        }
        GenCommand::ThreesatCausal { cnf } => reductions::gen_threesat_causal(&load_cnf(cnf)?),
    };
    emit(&f.to_string());
    Ok(Status::Done)
}

fn decomp(a: &DecompArgs) -> Result<Status, CliError> {
    let f = load_formula(&a.formula)?;
    let g = f.primal_graph();
    let td = compute_decomposition_with_limit(&g, strategy(a.decomp), DEFAULT_EXACT_LIMIT).map_err(solver_err)?;
    eprintln!("width {} with {} bags", td.width(), td.bags.len());
    match a.format {
        DecompFormat::Td => emit(&td.to_pace(g.len())),
        DecompFormat::NiceJson => print_json(&pchsat::decomp::make_nice(&td).to_json(&f.variables)),
    }
    Ok(Status::Done)
}
