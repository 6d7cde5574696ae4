use super::*;
use crate::rational::{format_rational, parse_rational};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// On-disk form of an [`Scm`].
///
/// Function tables are nested arrays indexed by the inputs in the listed order;
/// rationals are `"a/b"` strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScmJson {
    pub domain: Vec<String>,
    pub variables: Vec<String>,
    #[serde(default)]
    pub hidden: Vec<HiddenJson>,
    pub functions: Vec<FunctionJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Vec<WeightedTuple>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiddenJson {
    pub name: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FunctionJson {
    pub variable: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_on: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<CaseJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CaseJson {
    Const { value: String },
    Hidden { hidden: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedTuple {
    pub tuple: Vec<String>,
    pub p: String,
}

fn nest(table: &[usize], ranges: &[usize], domain: &[String]) -> Value {
    match ranges.split_first() {
        None => Value::String(domain[table[0]].clone()),
        Some((&r, rest)) => {
            let stride = table.len() / r.max(1);
            Value::Array((0..r).map(|x| nest(&table[x * stride..(x + 1) * stride], rest, domain)).collect())
        }
    }
}

fn flatten(v: &Value, ranges: &[usize], domain: &[String], out: &mut Vec<usize>) -> Result<(), ScmError> {
    let bad = || ScmError::Invalid("function table does not match its inputs".into());
    match ranges.split_first() {
        None => {
            let s = v.as_str().ok_or_else(bad)?;
            out.push(domain.iter().position(|d| d == s).ok_or_else(|| ScmError::DomainMismatch(s.into()))?);
        }
        Some((&r, rest)) => {
            let arr = v.as_array().ok_or_else(bad)?;
            if arr.len() != r {
                return Err(bad());
            }
            for item in arr {
                flatten(item, rest, domain, out)?;
            }
        }
    }
    Ok(())
}

impl From<&Scm> for ScmJson {
    fn from(m: &Scm) -> Self {
        let input_name = |inp: &Input| match *inp {
            Input::Hidden(h) => m.hidden[h].name.clone(),
            Input::Endogenous(j) => m.variables[j].clone(),
        };
        let functions = m
            .mechanisms
            .iter()
            .zip(&m.variables)
            .map(|(mech, var)| match mech {
                Mechanism::Table { inputs, table } => {
                    let ranges: Vec<usize> = inputs
                        .iter()
                        .map(|i| match *i {
                            Input::Hidden(h) => m.hidden[h].values.len(),
                            Input::Endogenous(_) => m.d(),
                        })
                        .collect();
                    FunctionJson {
                        variable: var.clone(),
                        inputs: Some(inputs.iter().map(input_name).collect()),
                        table: Some(nest(table, &ranges, &m.domain)),
                        ..Default::default()
                    }
                }
                Mechanism::Switch { on, cases } => FunctionJson {
                    variable: var.clone(),
                    switch_on: Some(on.iter().map(|&j| m.variables[j].clone()).collect()),
                    cases: Some(
                        cases
                            .iter()
                            .map(|c| match *c {
                                Output::Const(v) => CaseJson::Const { value: m.domain[v].clone() },
                                Output::Hidden(h) => CaseJson::Hidden { hidden: m.hidden[h].name.clone() },
                            })
                            .collect(),
                    ),
                    ..Default::default()
                },
            })
            .collect();
        let (distribution, independent) = match &m.distribution {
            Distribution::Joint(support) => (
                Some(
                    support
                        .iter()
                        .map(|(u, p)| WeightedTuple {
                            tuple: u.iter().zip(&m.hidden).map(|(&x, h)| h.values[x].clone()).collect(),
                            p: format_rational(p),
                        })
                        .collect(),
                ),
                None,
            ),
            Distribution::Independent(ms) => {
                (None, Some(ms.iter().map(|mg| mg.iter().map(format_rational).collect()).collect()))
            }
        };
        ScmJson {
            domain: m.domain.clone(),
            variables: m.variables.clone(),
            hidden: m.hidden.iter().map(|h| HiddenJson { name: h.name.clone(), values: h.values.clone() }).collect(),
            functions,
            distribution,
            independent,
        }
    }
}

impl TryFrom<ScmJson> for Scm {
    type Error = ScmError;

    fn try_from(j: ScmJson) -> Result<Self, ScmError> {
        let invalid = |m: String| ScmError::Invalid(m);
        let hidden: Vec<HiddenVariable> =
            j.hidden.iter().map(|h| HiddenVariable { name: h.name.clone(), values: h.values.clone() }).collect();
        let endo = |name: &str| j.variables.iter().position(|v| v == name);
        let hid = |name: &str| hidden.iter().position(|h| h.name == name);
        let d = j.domain.len();
        let mut mechanisms = Vec::with_capacity(j.variables.len());
        for var in &j.variables {
            let f = j
                .functions
                .iter()
                .find(|f| f.variable == *var)
                .ok_or_else(|| invalid(format!("no function for `{var}`")))?;
            if let (Some(on), Some(cases)) = (&f.switch_on, &f.cases) {
                let on = on
                    .iter()
                    .map(|n| endo(n).ok_or_else(|| invalid(format!("unknown variable `{n}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let cases = cases
                    .iter()
                    .map(|c| match c {
                        CaseJson::Const { value } => j
                            .domain
                            .iter()
                            .position(|v| v == value)
                            .map(Output::Const)
                            .ok_or_else(|| ScmError::DomainMismatch(value.clone())),
                        CaseJson::Hidden { hidden } => {
                            hid(hidden).map(Output::Hidden).ok_or_else(|| invalid(format!("unknown hidden `{hidden}`")))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                mechanisms.push(Mechanism::Switch { on, cases });
            } else if let Some(table) = &f.table {
                let mut inputs = Vec::new();
                let mut ranges = Vec::new();
                for name in f.inputs.iter().flatten() {
                    match (endo(name), hid(name)) {
                        (Some(e), None) => {
                            inputs.push(Input::Endogenous(e));
                            ranges.push(d);
                        }
                        (None, Some(h)) => {
                            inputs.push(Input::Hidden(h));
                            ranges.push(hidden[h].values.len());
                        }
                        (Some(_), Some(_)) => return Err(invalid(format!("ambiguous input name `{name}`"))),
                        (None, None) => return Err(invalid(format!("unknown input `{name}`"))),
                    }
                }
                let mut flat = Vec::new();
                flatten(table, &ranges, &j.domain, &mut flat)?;
                mechanisms.push(Mechanism::Table { inputs, table: flat });
            } else {
                return Err(invalid(format!("function for `{var}` has neither a table nor cases")));
            }
        }
        let rat = |s: &str| parse_rational(s).ok_or_else(|| invalid(format!("bad rational `{s}`")));
        let distribution = match (j.distribution, j.independent) {
            (Some(support), None) => Distribution::Joint(
                support
                    .iter()
                    .map(|wt| {
                        if wt.tuple.len() != hidden.len() {
                            return Err(invalid("tuple length does not match the hidden variables".into()));
                        }
                        let u = wt
                            .tuple
                            .iter()
                            .zip(&hidden)
                            .map(|(s, h)| {
                                h.values.iter().position(|v| v == s).ok_or_else(|| invalid(format!("bad hidden value `{s}`")))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok((u, rat(&wt.p)?))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            (None, Some(ms)) => Distribution::Independent(
                ms.iter().map(|mg| mg.iter().map(|s| rat(s)).collect::<Result<Vec<_>, _>>()).collect::<Result<_, _>>()?,
            ),
            _ => return Err(invalid("exactly one of `distribution` or `independent` is required".into())),
        };
        let m = Scm { domain: j.domain, variables: j.variables, hidden, mechanisms, distribution };
        m.validate()?;
        Ok(m)
    }
}

impl Scm {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(ScmJson::from(self)).expect("serializable")
    }

    pub fn from_json(v: Value) -> Result<Self, ScmError> {
        let j: ScmJson = serde_json::from_value(v).map_err(|e| ScmError::Invalid(e.to_string()))?;
        Scm::try_from(j)
    }
}
