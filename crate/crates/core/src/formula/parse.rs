use super::*;
use crate::rational::parse_rational;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: &[&str] = &["<=", ">=", "=", "<", ">", ";", ",", "{", "}", "[", "]", "(", ")", "&", "|", "!", "+", "-", "*", "/"];

fn lex(src: &str) -> Result<Vec<Token>, FormulaError> {
    let mut out = Vec::new();
    for (li, line) in src.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (lno, col) = (li + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: lno, col });
            } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Number(chars[start..i].iter().collect()), line: lno, col });
            } else {
                let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let sym = SYMBOLS.iter().find(|s| rest.starts_with(**s)).ok_or_else(|| FormulaError::Syntax {
                    line: lno,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })?;
                i += sym.len();
                out.push(Token { tok: Tok::Sym(sym), line: lno, col });
            }
        }
    }
    let (line, col) = out.last().map_or((1, 1), |t| (t.line, t.col + 1));
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Event syntax tree before leaves are grouped into post-interventional events.
enum Raw {
    Atom(Atom),
    Not(Box<Raw>),
    And(Box<Raw>, Box<Raw>),
    Or(Box<Raw>, Box<Raw>),
    Intervened(Intervention, Box<Raw>),
}

impl Raw {
    fn has_intervention(&self) -> bool {
        match self {
            Raw::Atom(_) => false,
            Raw::Not(e) => e.has_intervention(),
            Raw::And(l, r) | Raw::Or(l, r) => l.has_intervention() || r.has_intervention(),
            Raw::Intervened(..) => true,
        }
    }

    fn into_prop(self) -> PropEvent {
        match self {
            Raw::Atom(a) => PropEvent::Atom(a),
            Raw::Not(e) => e.into_prop().not(),
            Raw::And(l, r) => l.into_prop().and(r.into_prop()),
            Raw::Or(l, r) => l.into_prop().or(r.into_prop()),
            Raw::Intervened(..) => unreachable!("checked by caller"),
        }
    }

    /// Maximal intervention-free subtrees become single leaves.
    fn into_cevent(self) -> CounterfactEvent {
        if !self.has_intervention() {
            return CounterfactEvent::prop(self.into_prop());
        }
        match self {
            Raw::Not(e) => e.into_cevent().not(),
            Raw::And(l, r) => l.into_cevent().and(r.into_cevent()),
            Raw::Or(l, r) => l.into_cevent().or(r.into_cevent()),
            Raw::Intervened(g, body) => CounterfactEvent::intervened(g, body.into_prop()),
            Raw::Atom(_) => unreachable!(),
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    domain: Option<DomainSpec>,
    variables: Option<Vec<String>>,
}

type PResult<T> = Result<T, FormulaError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(FormulaError::Syntax { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(s) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> PResult<()> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.pos += 1;
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn statement(&mut self, constraints: &mut Vec<LinearConstraint>) -> PResult<()> {
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "domain" => {
                self.pos += 1;
                if self.domain.is_some() {
                    return self.err("domain declared twice");
                }
                self.expect("{")?;
                let mut values = Vec::new();
                loop {
                    match self.bump() {
                        Tok::Ident(s) => values.push(s),
                        Tok::Number(s) if s.bytes().all(|b| b.is_ascii_digit()) => values.push(s),
                        other => {
                            self.pos -= 1;
                            return self.err(format!("expected domain value, found {}", describe(&other)));
                        }
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("}")?;
                self.expect(";")?;
                self.domain = Some(DomainSpec::new(values)?);
            }
            Tok::Ident(kw) if kw == "vars" => {
                self.pos += 1;
                if self.variables.is_some() {
                    return self.err("vars declared twice");
                }
                let mut vars: Vec<String> = Vec::new();
                if !matches!(self.peek(), Tok::Sym(";")) {
                    loop {
                        let name = self.ident()?;
                        if vars.contains(&name) {
                            return Err(FormulaError::DuplicateVariable(name));
                        }
                        vars.push(name);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect(";")?;
                self.variables = Some(vars);
            }
            _ => {
                if self.domain.is_none() || self.variables.is_none() {
                    return self.err("constraints must follow the `domain` and `vars` declarations");
                }
                let c = self.constraint()?;
                constraints.push(c);
            }
        }
        Ok(())
    }

    fn rational_literal(&mut self) -> PResult<BigRational> {
        let Tok::Number(num) = self.bump() else {
            self.pos -= 1;
            return self.err("expected number");
        };
        let text = if self.eat("/") {
            match self.bump() {
                Tok::Number(den) => format!("{num}/{den}"),
                _ => {
                    self.pos -= 1;
                    return self.err("expected denominator");
                }
            }
        } else {
            num
        };
        match parse_rational(&text) {
            Some(q) => Ok(q),
            None => self.err(format!("invalid rational `{text}`")),
        }
    }

    fn constraint(&mut self) -> PResult<LinearConstraint> {
        let mut lhs = Vec::new();
        let mut first = true;
        loop {
            let negative = self.eat("-");
            if !negative && !self.eat("+") && !first {
                break;
            }
            first = false;
            let coef = if matches!(self.peek(), Tok::Number(_)) {
                let q = self.rational_literal()?;
                self.eat("*");
                q
            } else {
                crate::rational::one()
            };
            let term = self.probability_term()?;
            lhs.push((if negative { -coef } else { coef }, term));
        }
        let relation = match self.bump() {
            Tok::Sym("<=") => Relation::Le,
            Tok::Sym(">=") => Relation::Ge,
            Tok::Sym("=") => Relation::Eq,
            Tok::Sym("<") | Tok::Sym(">") => {
                self.pos -= 1;
                return self.err("strict inequalities are not supported; use <= or >=");
            }
            other => {
                self.pos -= 1;
                return self.err(format!("expected relation, found {}", describe(&other)));
            }
        };
        let negative = self.eat("-");
        let rhs = self.rational_literal()?;
        self.expect(";")?;
        Ok(LinearConstraint { lhs, relation, rhs: if negative { -rhs } else { rhs } })
    }

    fn probability_term(&mut self) -> PResult<Term> {
        match self.peek() {
            Tok::Ident(p) if p == "P" => self.pos += 1,
            other => return self.err(format!("expected `P[`, found {}", describe(other))),
        }
        self.expect("[")?;
        let raw = self.expr()?;
        self.expect("]")?;
        Ok(Term::new(raw.into_cevent()))
    }

    fn expr(&mut self) -> PResult<Raw> {
        let mut lhs = self.conj()?;
        while self.eat("|") {
            let rhs = self.conj()?;
            lhs = Raw::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> PResult<Raw> {
        let mut lhs = self.unary()?;
        while self.eat("&") {
            let rhs = self.unary()?;
            lhs = Raw::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Raw> {
        if self.eat("!") {
            return Ok(Raw::Not(Box::new(self.unary()?)));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        if matches!(self.peek(), Tok::Sym("[")) {
            let (line, col) = self.here();
            self.pos += 1;
            let mut atoms = Vec::new();
            if !self.eat("]") {
                loop {
                    atoms.push(self.atom()?);
                    if !(self.eat(",") || self.eat("&")) {
                        break;
                    }
                }
                self.expect("]")?;
            }
            let intervention = Intervention::new(atoms).map_err(|(a, b)| self.conflict(a, b))?;
            let body = self.unary()?;
            if body.has_intervention() {
                return Err(FormulaError::Syntax { line, col, msg: "nested interventions are not allowed".into() });
            }
            return Ok(Raw::Intervened(intervention, Box::new(body)));
        }
        Ok(Raw::Atom(self.atom()?))
    }

    fn atom(&mut self) -> PResult<Atom> {
        let (line, col) = self.here();
        let name = self.ident()?;
        let var = self
            .variables
            .as_ref()
            .and_then(|vs| vs.iter().position(|v| *v == name))
            .ok_or(FormulaError::UndeclaredVariable { name, line, col })?;
        self.expect("=")?;
        let (line, col) = self.here();
        let value = match self.bump() {
            Tok::Ident(s) | Tok::Number(s) => s,
            other => {
                self.pos -= 1;
                return self.err(format!("expected domain value, found {}", describe(&other)));
            }
        };
        let value = self
            .domain
            .as_ref()
            .and_then(|d| d.index_of(&value))
            .ok_or(FormulaError::UndeclaredValue { value, line, col })?;
        Ok(Atom::new(var, value))
    }

    fn conflict(&self, a: Atom, b: Atom) -> FormulaError {
        let vars = self.variables.as_ref().expect("declared");
        let dom = self.domain.as_ref().expect("declared");
        FormulaError::ConflictingIntervention {
            var: vars[a.var].clone(),
            first: dom.values()[a.value].clone(),
            second: dom.values()[b.value].clone(),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Number(s) => format!("`{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses the textual formula format.
///
/// ```text
/// domain {0, 1};
/// vars X, Y;
/// P[[X=1] Y=1] - P[Y=1] >= 1/4;
/// ```
pub fn parse(text: &str) -> Result<Formula, FormulaError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, domain: None, variables: None };
    let mut constraints = Vec::new();
    while *p.peek() != Tok::Eof {
        p.statement(&mut constraints)?;
    }
    let domain = match p.domain {
        Some(d) => d,
        None if constraints.is_empty() => DomainSpec::numeric(2),
        None => unreachable!("constraints require a domain"),
    };
    Ok(Formula { domain, variables: p.variables.unwrap_or_default(), constraints })
}
