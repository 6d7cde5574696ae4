use super::*;
use crate::rational::format_rational;
use num_traits::{One, Signed};
use std::fmt::Write as _;

const OR: u8 = 1;
const AND: u8 = 2;
const UNARY: u8 = 3;

struct Names<'a> {
    vars: &'a [String],
    values: &'a [String],
}

impl Names<'_> {
    fn atom(&self, a: &Atom, out: &mut String) {
        let _ = write!(out, "{}={}", self.vars[a.var], self.values[a.value]);
    }

    fn prop(&self, e: &PropEvent, prec: u8, out: &mut String) {
        if let Some((l, r)) = prop_or(e) {
            self.wrap(prec > OR, out, |s, out| {
                s.prop(l, OR, out);
                out.push_str(" | ");
                s.prop(r, AND, out);
            });
            return;
        }
        match e {
            PropEvent::Atom(a) => self.atom(a, out),
            PropEvent::Not(inner) => {
                out.push('!');
                self.prop(inner, UNARY, out);
            }
            PropEvent::And(l, r) => self.wrap(prec > AND, out, |s, out| {
                s.prop(l, AND, out);
                out.push_str(" & ");
                s.prop(r, UNARY, out);
            }),
        }
    }

    fn cevent(&self, e: &CounterfactEvent, prec: u8, out: &mut String) {
        if let Some((l, r)) = cevent_or(e) {
            self.wrap(prec > OR, out, |s, out| {
                s.cevent(l, OR, out);
                out.push_str(" | ");
                s.cevent(r, AND, out);
            });
            return;
        }
        match e {
            CounterfactEvent::Leaf(p) => {
                // `[γ] body` binds like a unary operator.
                self.wrap(prec > UNARY, out, |s, out| {
                    out.push('[');
                    for (i, a) in p.intervention.atoms().iter().enumerate() {
                        if i > 0 {
                            out.push_str(", ");
                        }
                        s.atom(a, out);
                    }
                    out.push_str("] ");
                    s.prop(&p.body, UNARY, out);
                });
            }
            CounterfactEvent::Not(inner) => {
                out.push('!');
                self.cevent(inner, UNARY, out);
            }
            CounterfactEvent::And(l, r) => self.wrap(prec > AND, out, |s, out| {
                s.cevent(l, AND, out);
                out.push_str(" & ");
                s.cevent(r, UNARY, out);
            }),
        }
    }

    fn term(&self, t: &Term, out: &mut String) {
        out.push_str("P[");
        match &t.event {
            CounterfactEvent::Leaf(p) if p.intervention.is_empty() => self.prop(&p.body, OR, out),
            e => self.cevent(e, OR, out),
        }
        out.push(']');
    }

    fn wrap(&self, parens: bool, out: &mut String, body: impl FnOnce(&Self, &mut String)) {
        if parens {
            out.push('(');
        }
        body(self, out);
        if parens {
            out.push(')');
        }
    }
}

fn prop_or(e: &PropEvent) -> Option<(&PropEvent, &PropEvent)> {
    if let PropEvent::Not(inner) = e {
        if let PropEvent::And(l, r) = inner.as_ref() {
            if let (PropEvent::Not(l), PropEvent::Not(r)) = (l.as_ref(), r.as_ref()) {
                return Some((l, r));
            }
        }
    }
    None
}

fn cevent_or(e: &CounterfactEvent) -> Option<(&CounterfactEvent, &CounterfactEvent)> {
    if let CounterfactEvent::Not(inner) = e {
        if let CounterfactEvent::And(l, r) = inner.as_ref() {
            if let (CounterfactEvent::Not(l), CounterfactEvent::Not(r)) = (l.as_ref(), r.as_ref()) {
                return Some((l, r));
            }
        }
    }
    None
}

impl Formula {
    /// Renders one term, e.g. `P[[X=1] Y=0]`.
    pub fn term_to_string(&self, t: &Term) -> String {
        let mut out = String::new();
        Names { vars: &self.variables, values: self.domain.values() }.term(t, &mut out);
        out
    }

    pub fn constraint_to_string(&self, c: &LinearConstraint) -> String {
        let names = Names { vars: &self.variables, values: self.domain.values() };
        let mut out = String::new();
        for (i, (coef, term)) in c.lhs.iter().enumerate() {
            let magnitude = coef.abs();
            match (i, coef.is_negative()) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            if !magnitude.is_one() {
                let _ = write!(out, "{} ", format_rational(&magnitude));
            }
            names.term(term, &mut out);
        }
        let _ = write!(out, " {} {};", c.relation.symbol(), format_rational(&c.rhs));
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain {{{}}};", self.domain.values().join(", "))?;
        if self.variables.is_empty() {
            writeln!(f, "vars;")?;
        } else {
            writeln!(f, "vars {};", self.variables.join(", "))?;
        }
        for c in &self.constraints {
            writeln!(f, "{}", self.constraint_to_string(c))?;
        }
        Ok(())
    }
}
