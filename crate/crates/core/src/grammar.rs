//! Island grammars: rule representation, the `.lhip` text format and validation.
//!
//! ```text
//! :- start s/1.
//! s(conjunct(Conj,Sl,Sr)) ~~> s(Sl), * conjunction(Conj), s(Sr).
//! np(propernoun(N,Mods)) ~~> ~ determiner(_), (? adjectives(Mods) ?), * noun(N).
//! noun(X) ~~> ( * @pussy, (? @cat ?) ; * @cat ), {X = cat}.
//! noun(missionary_camp) ~~> @missionary : @camp.
//! ann_query_separator #1.0 ~~> @terminal('téléphone', _).
//! ignore filler ~~> @euh.
//! ```
//!
//! `*` marks a head, `(? ... ?)` an optional item, `~` negation, `:` strict
//! adjacency, `;` disjunction and `,` sequence. `#T` after the left-hand side
//! sets a local coverage threshold. `{ ... }` holds builtin constraints,
//! `ignore` / `ignore(name)` invoke ignore rules and `lhip_true` is the empty
//! sequence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::syntax::{Pos, Reader, SyntaxError, Tok, VarScope};
use crate::term::{format_rational, Named, Rational, Symbol, Term};

pub type PredKey = (Symbol, usize);

pub fn pred_name(key: &PredKey) -> String {
    format!("{}/{}", key.0, key.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CompareOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CompareOp {
    fn text(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "=<",
            CompareOp::Eq => "=:=",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
        }
    }

    pub fn holds(self, a: &Rational, b: &Rational) -> bool {
        match self {
            CompareOp::Lt => a < b,
            CompareOp::Le => a <= b,
            CompareOp::Eq => a == b,
            CompareOp::Ge => a >= b,
            CompareOp::Gt => a > b,
        }
    }
}

/// The closed set of constraints allowed inside `{ ... }`.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Unify(Term, Term),
    Append(Term, Term, Term),
    MinList(Term, Term),
    Member(Term, Term),
    NonMember(Term, Term),
    Thesaurus(Symbol, Term),
    Compare(CompareOp, Term, Term),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RhsExpr {
    /// Items in order; islands may be separated by uncovered input.
    /// The empty sequence is `lhip_true`.
    Seq(Vec<RhsExpr>),
    Adjacent(Box<RhsExpr>, Box<RhsExpr>),
    Disjunction(Box<RhsExpr>, Box<RhsExpr>),
    Negation(Box<RhsExpr>),
    Optional(Box<RhsExpr>),
    Head(Box<RhsExpr>),
    Terminal { word: Term, payload: Term },
    Call(Term),
    /// `None` invokes every ignore rule as a class.
    Ignore(Option<Symbol>),
    Builtin(Builtin),
}

impl RhsExpr {
    /// True for a head marker, or an adjacency chain containing one, as seen
    /// from the enclosing sequence.
    pub fn carries_head(&self) -> bool {
        match self {
            RhsExpr::Head(_) => true,
            RhsExpr::Adjacent(l, r) => l.carries_head() || r.carries_head(),
            _ => false,
        }
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a RhsExpr)) {
        f(self);
        match self {
            RhsExpr::Seq(items) => items.iter().for_each(|i| i.visit(f)),
            RhsExpr::Adjacent(l, r) | RhsExpr::Disjunction(l, r) => {
                l.visit(f);
                r.visit(f);
            }
            RhsExpr::Negation(e) | RhsExpr::Optional(e) | RhsExpr::Head(e) => e.visit(f),
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Normal,
    Ignore,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub lhs: Term,
    pub threshold: Option<Rational>,
    pub body: RhsExpr,
    pub kind: RuleKind,
    /// Position in source order.
    pub index: usize,
    /// Source names of the rule's variables, indexed by variable id.
    pub var_names: Vec<String>,
    pub pos: Pos,
}

impl Rule {
    pub fn pred(&self) -> PredKey {
        self.lhs.functor().expect("rule heads are atoms or compounds")
    }

    pub fn var_count(&self) -> u32 {
        self.var_names.len() as u32
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grammar {
    pub rules: Vec<Rule>,
    pub start: Vec<PredKey>,
    pub default_threshold: Rational,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar {
            rules: Vec::new(),
            start: Vec::new(),
            default_threshold: Rational::from_integer(0),
        }
    }
}

impl Grammar {
    pub fn rules_for(&self, key: PredKey) -> impl Iterator<Item = &Rule> {
        self.rules
            .iter()
            .filter(move |r| r.kind == RuleKind::Normal && r.pred() == key)
    }

    pub fn ignore_rules(&self, name: Option<Symbol>) -> impl Iterator<Item = &Rule> {
        self.rules
            .iter()
            .filter(move |r| r.kind == RuleKind::Ignore && name.is_none_or(|n| r.pred().0 == n))
    }

    pub fn defines(&self, key: PredKey) -> bool {
        self.rules_for(key).next().is_some()
    }

    /// Appends the rules of `other`, renumbering them after the existing ones.
    pub fn extend(&mut self, other: Grammar) {
        let base = self.rules.len();
        for mut rule in other.rules {
            rule.index += base;
            self.rules.push(rule);
        }
        for s in other.start {
            if !self.start.contains(&s) {
                self.start.push(s);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Note,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn new(pos: Pos, severity: Severity, message: impl Into<String>) -> Self {
        Diagnostic {
            line: pos.line,
            column: pos.column,
            severity,
            message: message.into(),
        }
    }
}

impl From<SyntaxError> for Diagnostic {
    fn from(e: SyntaxError) -> Self {
        Diagnostic::new(e.pos, Severity::Error, e.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("grammar has {} error(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
pub struct GrammarError(pub Vec<Diagnostic>);

/// Parses `.lhip` source. Any syntax error rejects the whole grammar; every
/// error found (one per clause at most) is reported.
pub fn parse_grammar(src: &str) -> Result<Grammar, GrammarError> {
    let toks = crate::syntax::tokenize(src).map_err(|e| GrammarError(vec![e.into()]))?;
    let mut reader = Reader::new(toks);
    let mut grammar = Grammar::default();
    let mut errors = Vec::new();
    while !reader.at_eof() {
        match clause(&mut reader, &mut grammar) {
            Ok(()) => {}
            Err(e) => {
                errors.push(Diagnostic::from(e));
                reader.recover();
            }
        }
    }
    if errors.is_empty() {
        Ok(grammar)
    } else {
        Err(GrammarError(errors))
    }
}

fn clause(r: &mut Reader, g: &mut Grammar) -> Result<(), SyntaxError> {
    let pos = r.pos();
    if r.eat_punct(":-") {
        return directive(r, g);
    }
    let kind = match (r.peek(), r.peek_at(1)) {
        (Tok::Name(n), next) if n == "ignore" && !matches!(next, Tok::Punct("(") | Tok::Punct("~~>") | Tok::Punct("#")) => {
            r.next();
            RuleKind::Ignore
        }
        _ => RuleKind::Normal,
    };
    let mut scope = VarScope::new();
    let lhs_pos = r.pos();
    let lhs = r.term(&mut scope)?;
    if lhs.functor().is_none() {
        return Err(SyntaxError::new(lhs_pos, "rule head must be an atom or compound term"));
    }
    let threshold = if r.eat_punct("#") {
        let tpos = r.pos();
        match r.next().tok {
            Tok::Number(t) => {
                if t < Rational::from_integer(0) || t > Rational::from_integer(1) {
                    return Err(SyntaxError::new(
                        tpos,
                        format!("threshold {} out of range [0,1]", format_rational(&t)),
                    ));
                }
                Some(t)
            }
            other => return Err(SyntaxError::new(tpos, format!("expected threshold, found {other}"))),
        }
    } else {
        None
    };
    r.expect_punct("~~>")?;
    let body = disjunction(r, &mut scope)?;
    r.expect_end()?;
    g.rules.push(Rule {
        lhs,
        threshold,
        body,
        kind,
        index: g.rules.len(),
        var_names: scope.into_names(),
        pos,
    });
    Ok(())
}

fn directive(r: &mut Reader, g: &mut Grammar) -> Result<(), SyntaxError> {
    let pos = r.pos();
    match r.next().tok {
        Tok::Name(n) if n == "start" => {
            loop {
                let key = r.predicate_indicator()?;
                if !g.start.contains(&key) {
                    g.start.push(key);
                }
                if !r.eat_punct(",") {
                    break;
                }
            }
            r.expect_end()
        }
        Tok::Name(n) if n == "threshold" => {
            let tpos = r.pos();
            match r.next().tok {
                Tok::Number(t) if t >= Rational::from_integer(0) && t <= Rational::from_integer(1) => {
                    g.default_threshold = t;
                    r.expect_end()
                }
                Tok::Number(t) => Err(SyntaxError::new(
                    tpos,
                    format!("threshold {} out of range [0,1]", format_rational(&t)),
                )),
                other => Err(SyntaxError::new(tpos, format!("expected threshold, found {other}"))),
            }
        }
        other => Err(SyntaxError::new(pos, format!("unknown directive {other}"))),
    }
}

fn disjunction(r: &mut Reader, scope: &mut VarScope) -> Result<RhsExpr, SyntaxError> {
    let left = sequence(r, scope)?;
    if r.eat_punct(";") {
        let right = disjunction(r, scope)?;
        Ok(RhsExpr::Disjunction(Box::new(left), Box::new(right)))
    } else {
        Ok(left)
    }
}

fn sequence(r: &mut Reader, scope: &mut VarScope) -> Result<RhsExpr, SyntaxError> {
    let mut items = vec![adjacency(r, scope)?];
    while r.eat_punct(",") {
        items.push(adjacency(r, scope)?);
    }
    Ok(if items.len() == 1 {
        items.pop().expect("one item")
    } else {
        RhsExpr::Seq(items)
    })
}

fn adjacency(r: &mut Reader, scope: &mut VarScope) -> Result<RhsExpr, SyntaxError> {
    let mut left = unary(r, scope)?;
    while r.eat_punct(":") {
        let right = unary(r, scope)?;
        left = RhsExpr::Adjacent(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn unary(r: &mut Reader, scope: &mut VarScope) -> Result<RhsExpr, SyntaxError> {
    if r.eat_punct("~") {
        return Ok(RhsExpr::Negation(Box::new(unary(r, scope)?)));
    }
    if r.eat_punct("*") {
        return Ok(RhsExpr::Head(Box::new(unary(r, scope)?)));
    }
    primary(r, scope)
}

fn primary(r: &mut Reader, scope: &mut VarScope) -> Result<RhsExpr, SyntaxError> {
    let pos = r.pos();
    if r.eat_punct("(?") {
        let inner = disjunction(r, scope)?;
        r.expect_punct("?)")?;
        return Ok(RhsExpr::Optional(Box::new(inner)));
    }
    if r.eat_punct("(") {
        let inner = disjunction(r, scope)?;
        r.expect_punct(")")?;
        return Ok(inner);
    }
    if r.eat_punct("@") {
        let t = r.term(scope)?;
        return Ok(match t {
            Term::Compound(f, mut args) if f.as_str() == "terminal" && args.len() == 2 => {
                let payload = args.pop().expect("two args");
                let word = args.pop().expect("two args");
                RhsExpr::Terminal { word, payload }
            }
            word => RhsExpr::Terminal {
                word,
                payload: Term::Var(scope.get("_")),
            },
        });
    }
    if r.eat_punct("{") {
        let mut items = vec![RhsExpr::Builtin(builtin(r, scope)?)];
        while r.eat_punct(",") {
            items.push(RhsExpr::Builtin(builtin(r, scope)?));
        }
        r.expect_punct("}")?;
        return Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            RhsExpr::Seq(items)
        });
    }
    let t = r.term(scope)?;
    match &t {
        Term::Atom(a) if a.as_str() == "lhip_true" => Ok(RhsExpr::Seq(Vec::new())),
        Term::Atom(a) if a.as_str() == "ignore" => Ok(RhsExpr::Ignore(None)),
        Term::Compound(f, args) if f.as_str() == "ignore" && args.len() == 1 => match &args[0] {
            Term::Atom(name) => Ok(RhsExpr::Ignore(Some(*name))),
            _ => Err(SyntaxError::new(pos, "ignore/1 takes an ignore rule name")),
        },
        Term::Atom(_) | Term::Compound(..) => Ok(RhsExpr::Call(t)),
        _ => Err(SyntaxError::new(pos, format!("`{t}` cannot be called"))),
    }
}

fn builtin(r: &mut Reader, scope: &mut VarScope) -> Result<Builtin, SyntaxError> {
    let pos = r.pos();
    let left = r.term(scope)?;
    let op = match r.peek() {
        Tok::Punct("=") => None,
        Tok::Punct("<") => Some(CompareOp::Lt),
        Tok::Punct("=<") => Some(CompareOp::Le),
        Tok::Punct("=:=") => Some(CompareOp::Eq),
        Tok::Punct(">=") => Some(CompareOp::Ge),
        Tok::Punct(">") => Some(CompareOp::Gt),
        _ => {
            return match left {
                Term::Compound(f, mut args) => {
                    let name = f.as_str();
                    match (name, args.len()) {
                        ("append", 3) => {
                            let c = args.pop().expect("arity");
                            let b = args.pop().expect("arity");
                            let a = args.pop().expect("arity");
                            Ok(Builtin::Append(a, b, c))
                        }
                        ("minlist" | "min_list", 2) => {
                            let b = args.pop().expect("arity");
                            Ok(Builtin::MinList(args.pop().expect("arity"), b))
                        }
                        ("member", 2) => {
                            let b = args.pop().expect("arity");
                            Ok(Builtin::Member(args.pop().expect("arity"), b))
                        }
                        ("nonmember", 2) => {
                            let b = args.pop().expect("arity");
                            Ok(Builtin::NonMember(args.pop().expect("arity"), b))
                        }
                        ("thesaurus", 2) => {
                            let out = args.pop().expect("arity");
                            match args.pop().expect("arity") {
                                Term::Atom(cat) => Ok(Builtin::Thesaurus(cat, out)),
                                _ => Err(SyntaxError::new(pos, "thesaurus/2 category must be an atom")),
                            }
                        }
                        _ => Err(SyntaxError::new(pos, format!("unknown builtin {name}/{}", args.len()))),
                    }
                }
                other => Err(SyntaxError::new(pos, format!("unknown builtin `{other}`"))),
            };
        }
    };
    r.next();
    let right = r.term(scope)?;
    Ok(match op {
        None => Builtin::Unify(left, right),
        Some(op) => Builtin::Compare(op, left, right),
    })
}

// ---------------------------------------------------------------------------
// Pretty printing

struct Printer<'a> {
    names: &'a [String],
}

impl Printer<'_> {
    fn term(&self, t: &Term) -> String {
        Named { term: t, names: self.names }.to_string()
    }

    fn builtin(&self, b: &Builtin) -> String {
        match b {
            Builtin::Unify(a, b) => format!("{} = {}", self.term(a), self.term(b)),
            Builtin::Compare(op, a, b) => format!("{} {} {}", self.term(a), op.text(), self.term(b)),
            Builtin::Append(a, b, c) => {
                format!("append({}, {}, {})", self.term(a), self.term(b), self.term(c))
            }
            Builtin::MinList(a, b) => format!("minlist({}, {})", self.term(a), self.term(b)),
            Builtin::Member(a, b) => format!("member({}, {})", self.term(a), self.term(b)),
            Builtin::NonMember(a, b) => format!("nonmember({}, {})", self.term(a), self.term(b)),
            Builtin::Thesaurus(c, out) => {
                format!("thesaurus({}, {})", Term::Atom(*c), self.term(out))
            }
        }
    }

    /// Precedence levels: 0 disjunction, 1 sequence, 2 adjacency, 3 unary.
    fn expr(&self, e: &RhsExpr, level: u8) -> String {
        let (text, own) = match e {
            RhsExpr::Disjunction(l, r) => (format!("{} ; {}", self.expr(l, 1), self.expr(r, 0)), 0),
            RhsExpr::Seq(items) if items.is_empty() => ("lhip_true".to_owned(), 3),
            RhsExpr::Seq(items) if items.iter().all(|i| matches!(i, RhsExpr::Builtin(_))) => {
                let inner: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        RhsExpr::Builtin(b) => self.builtin(b),
                        _ => unreachable!(),
                    })
                    .collect();
                (format!("{{{}}}", inner.join(", ")), 3)
            }
            RhsExpr::Seq(items) => {
                let parts: Vec<String> = items.iter().map(|i| self.expr(i, 2)).collect();
                (parts.join(", "), 1)
            }
            RhsExpr::Adjacent(l, r) => (format!("{} : {}", self.expr(l, 2), self.expr(r, 3)), 2),
            RhsExpr::Negation(inner) => (format!("~ {}", self.expr(inner, 3)), 3),
            RhsExpr::Head(inner) => (format!("* {}", self.expr(inner, 3)), 3),
            RhsExpr::Optional(inner) => (format!("(? {} ?)", self.expr(inner, 0)), 3),
            RhsExpr::Terminal { word, payload } => {
                let anonymous = matches!(payload, Term::Var(v)
                    if self.names.get(v.0 as usize).map(String::as_str) == Some("_"));
                if anonymous && word.functor() != Some((Symbol::intern("terminal"), 2)) {
                    (format!("@{}", self.term(word)), 3)
                } else {
                    (format!("@terminal({}, {})", self.term(word), self.term(payload)), 3)
                }
            }
            RhsExpr::Call(t) => (self.term(t), 3),
            RhsExpr::Ignore(None) => ("ignore".to_owned(), 3),
            RhsExpr::Ignore(Some(n)) => (format!("ignore({})", Term::Atom(*n)), 3),
            RhsExpr::Builtin(b) => (format!("{{{}}}", self.builtin(b)), 3),
        };
        if own < level {
            format!("({text})")
        } else {
            text
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = Printer { names: &self.var_names };
        if self.kind == RuleKind::Ignore {
            f.write_str("ignore ")?;
        }
        f.write_str(&p.term(&self.lhs))?;
        if let Some(t) = &self.threshold {
            write!(f, " #{}", threshold_text(t))?;
        }
        write!(f, " ~~> {}.", p.expr(&self.body, 0))
    }
}

fn threshold_text(t: &Rational) -> String {
    let s = format_rational(t);
    if t.is_integer() {
        format!("{s}.0")
    } else {
        s
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.start.is_empty() {
            let names: Vec<String> = self.start.iter().map(|k| {
                let mut s = String::new();
                let _ = crate::term::write_atom(&mut s, k.0.as_str());
                format!("{s}/{}", k.1)
            }).collect();
            writeln!(f, ":- start {}.", names.join(", "))?;
        }
        if self.default_threshold != Rational::from_integer(0) {
            writeln!(f, ":- threshold {}.", threshold_text(&self.default_threshold))?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Validation

/// Reports undefined nonterminals, head scoping notes, duplicate heads and
/// rules unreachable from the declared start symbols.
pub fn validate(g: &Grammar) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let defined: BTreeSet<PredKey> = g
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::Normal)
        .map(Rule::pred)
        .collect();
    let ignore_names: BTreeSet<Symbol> = g
        .rules
        .iter()
        .filter(|r| r.kind == RuleKind::Ignore)
        .map(|r| r.pred().0)
        .collect();

    for rule in &g.rules {
        rule.body.visit(&mut |e| match e {
            RhsExpr::Call(t) => {
                let key = t.functor().expect("calls are callable");
                if !defined.contains(&key) {
                    out.push(Diagnostic::new(
                        rule.pos,
                        Severity::Error,
                        format!("undefined nonterminal {} called from {}", pred_name(&key), pred_name(&rule.pred())),
                    ));
                }
            }
            RhsExpr::Ignore(Some(name)) if !ignore_names.contains(name) => {
                out.push(Diagnostic::new(
                    rule.pos,
                    Severity::Error,
                    format!("no ignore rule named {name}"),
                ));
            }
            RhsExpr::Ignore(None) if ignore_names.is_empty() => {
                out.push(Diagnostic::new(
                    rule.pos,
                    Severity::Warning,
                    "ignore class invoked but the grammar has no ignore rules",
                ));
            }
            RhsExpr::Seq(items) => {
                let heads = items.iter().filter(|i| i.carries_head()).count();
                if heads > 1 {
                    out.push(Diagnostic::new(
                        rule.pos,
                        Severity::Warning,
                        format!("{heads} heads in one sequence of {}; the first one is used", pred_name(&rule.pred())),
                    ));
                }
            }
            RhsExpr::Negation(inner) | RhsExpr::Optional(inner) if contains_head(inner) && matches!(e, RhsExpr::Negation(_)) => {
                out.push(Diagnostic::new(
                    rule.pos,
                    Severity::Note,
                    format!("head inside a negation in {} is local to the negation", pred_name(&rule.pred())),
                ));
            }
            RhsExpr::Disjunction(l, r) if contains_head(l) || contains_head(r) => {
                out.push(Diagnostic::new(
                    rule.pos,
                    Severity::Note,
                    format!("head inside a disjunction in {} is local to its disjunct", pred_name(&rule.pred())),
                ));
            }
            _ => {}
        });
        if let Some(t) = &rule.threshold {
            if *t < Rational::from_integer(0) || *t > Rational::from_integer(1) {
                out.push(Diagnostic::new(rule.pos, Severity::Error, "threshold out of range [0,1]"));
            }
        }
    }

    if !g.start.is_empty() {
        for key in &g.start {
            if !defined.contains(key) {
                out.push(Diagnostic::new(
                    Pos { line: 1, column: 1 },
                    Severity::Error,
                    format!("start symbol {} has no rules", pred_name(key)),
                ));
            }
        }
        let reachable = reachable_preds(g);
        for rule in &g.rules {
            let live = match rule.kind {
                RuleKind::Normal => reachable.preds.contains(&rule.pred()),
                RuleKind::Ignore => {
                    reachable.ignore_class || reachable.ignore_names.contains(&rule.pred().0)
                }
            };
            if !live {
                out.push(Diagnostic::new(
                    rule.pos,
                    Severity::Warning,
                    format!("rule for {} is unreachable from the start symbols", pred_name(&rule.pred())),
                ));
            }
        }
    }
    out
}

fn contains_head(e: &RhsExpr) -> bool {
    let mut found = false;
    e.visit(&mut |x| found |= matches!(x, RhsExpr::Head(_)));
    found
}

struct Reachable {
    preds: BTreeSet<PredKey>,
    ignore_names: BTreeSet<Symbol>,
    ignore_class: bool,
}

fn reachable_preds(g: &Grammar) -> Reachable {
    let mut by_pred: BTreeMap<PredKey, Vec<&Rule>> = BTreeMap::new();
    for r in &g.rules {
        by_pred.entry(r.pred()).or_default().push(r);
    }
    let mut seen = Reachable {
        preds: BTreeSet::new(),
        ignore_names: BTreeSet::new(),
        ignore_class: false,
    };
    let mut work: Vec<&Rule> = Vec::new();
    for key in &g.start {
        if seen.preds.insert(*key) {
            work.extend(g.rules_for(*key));
        }
    }
    while let Some(rule) = work.pop() {
        rule.body.visit(&mut |e| match e {
            RhsExpr::Call(t) => {
                let key = t.functor().expect("callable");
                if seen.preds.insert(key) {
                    work.extend(g.rules_for(key));
                }
            }
            RhsExpr::Ignore(Some(n)) => {
                if seen.ignore_names.insert(*n) {
                    work.extend(g.ignore_rules(Some(*n)));
                }
            }
            RhsExpr::Ignore(None)
                if !seen.ignore_class => {
                    seen.ignore_class = true;
                    work.extend(g.ignore_rules(None));
                }
            _ => {}
        });
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_rule(src: &str) -> Rule {
        let g = parse_grammar(src).unwrap();
        assert_eq!(g.rules.len(), 1);
        g.rules.into_iter().next().unwrap()
    }

    #[test]
    fn adjacency_rule() {
        let r = one_rule("noun(missionary_camp) ~~> @missionary : @camp.");
        match &r.body {
            RhsExpr::Adjacent(l, r) => {
                assert!(matches!(&**l, RhsExpr::Terminal { word, .. } if *word == Term::atom("missionary")));
                assert!(matches!(&**r, RhsExpr::Terminal { word, .. } if *word == Term::atom("camp")));
            }
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn negation_optional_head_rule() {
        let r = one_rule("np(propernoun(N,Mods)) ~~> ~determiner(_), (? adjectives(Mods) ?), * noun(N).");
        match &r.body {
            RhsExpr::Seq(items) => {
                assert_eq!(items.len(), 3);
                assert!(matches!(&items[0], RhsExpr::Negation(c) if matches!(&**c, RhsExpr::Call(_))));
                assert!(matches!(&items[1], RhsExpr::Optional(c) if matches!(&**c, RhsExpr::Call(_))));
                assert!(matches!(&items[2], RhsExpr::Head(c) if matches!(&**c, RhsExpr::Call(_))));
            }
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn empty_source_is_empty_grammar() {
        let g = parse_grammar("").unwrap();
        assert!(g.rules.is_empty());
        let g = parse_grammar("  % only a comment\n").unwrap();
        assert!(g.rules.is_empty());
    }

    #[test]
    fn thresholds_parse_exactly() {
        let r = one_rule("ann_query_separator #1.0 ~~> @terminal('téléphone',_).");
        assert_eq!(r.threshold, Some(Rational::from_integer(1)));
        let r = one_rule("x #0.75 ~~> @a.");
        assert_eq!(r.threshold, Some(Rational::new(3, 4)));
        assert_eq!(crate::term::rational_to_f64(&r.threshold.unwrap()), 0.75);
    }

    #[test]
    fn threshold_out_of_range_is_positioned() {
        let err = parse_grammar("x #1.5 ~~> @a.").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!((err.0[0].line, err.0[0].column), (1, 4));
        assert!(err.0[0].message.contains("out of range"));
    }

    #[test]
    fn unbalanced_delimiters_are_rejected() {
        let err = parse_grammar("a ~~> (b, c.\nd ~~> e.").unwrap_err();
        assert_eq!(err.0[0].line, 1);
        let err = parse_grammar("a ~~> (? b.").unwrap_err();
        assert!(!err.0.is_empty());
        let err = parse_grammar("a ~~> $.").unwrap_err();
        assert!(err.0[0].message.contains("unexpected character"));
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_grammar("a ~~> .\nb ~~> c.\nd #2 ~~> e.").unwrap_err();
        assert_eq!(err.0.len(), 2);
        assert_eq!(err.0[1].line, 3);
    }

    #[test]
    fn ignore_rules_and_calls() {
        let g = parse_grammar(
            "ignore filler ~~> @euh.\nignore(x) ~~> @b.\nlist ~~> @a, ignore, ignore(filler), @b.",
        )
        .unwrap();
        assert_eq!(g.rules[0].kind, RuleKind::Ignore);
        assert_eq!(g.rules[0].pred(), (Symbol::intern("filler"), 0));
        // `ignore(x)` as a head is an ordinary rule for ignore/1
        assert_eq!(g.rules[1].kind, RuleKind::Normal);
        match &g.rules[2].body {
            RhsExpr::Seq(items) => {
                assert_eq!(items[1], RhsExpr::Ignore(None));
                assert_eq!(items[2], RhsExpr::Ignore(Some(Symbol::intern("filler"))));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtins_parse() {
        let r = one_rule("street_type(terminal(X,P)) ~~> @terminal(X,P), {thesaurus(street,W), member(X,W)}.");
        match &r.body {
            RhsExpr::Seq(items) => {
                assert!(matches!(&items[0], RhsExpr::Terminal { .. }));
                assert!(matches!(&items[1], RhsExpr::Seq(b) if b.len() == 2));
            }
            other => panic!("{other:?}"),
        }
        let r = one_rule("f(W) ~~> a(C1), b(C2), {minlist([C1,C2],W), C1 >= 0.5, X = cat}.");
        assert!(r.to_string().contains("minlist([C1,C2], W), C1 >= 0.5, X = cat"));
        assert!(parse_grammar("f ~~> {frobnicate(X)}.").is_err());
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let src = r#"
:- start s/1, frame/6.
s(conjunct(Conj,Sl,Sr)) ~~> s(Sl), * conjunction(Conj), s(Sr).
np(propernoun(N,Mods)) ~~> ~determiner(_), (? adjectives(Mods) ?), * noun(N).
noun(X) ~~> ( * @pussy, (? @cat ?); * @cat), {X=cat}.
noun(missionary_camp) ~~> @missionary : @camp.
ann_query_separator #1.0 ~~> (@terminal('numéro',_) : @terminal('de',_) : (? @terminal('téléphone',_) ?)).
hyp_street_name([],1) ~~> ~found_street_name(_,_), lhip_true.
ignore spelling #1.0 ~~> letter(_) : (? ignore(spelling) ?).
x ~~> (a ; b), (c, d), ~ (e : f), * (g ; h).
"#;
        let g1 = parse_grammar(src).unwrap();
        let printed = g1.to_string();
        let g2 = parse_grammar(&printed).unwrap();
        assert_eq!(g1.rules.len(), g2.rules.len());
        for (a, b) in g1.rules.iter().zip(&g2.rules) {
            assert_eq!(a.body, b.body, "{a}");
            assert_eq!(a.lhs, b.lhs);
            assert_eq!(a.threshold, b.threshold);
            assert_eq!(a.kind, b.kind);
        }
        assert_eq!(g2.to_string(), printed);
        assert_eq!(g2.start, g1.start);
    }

    #[test]
    fn source_order_indices_increase() {
        let g = parse_grammar("a ~~> @x.\nb ~~> @y.\na ~~> @z.").unwrap();
        let idx: Vec<usize> = g.rules.iter().map(|r| r.index).collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn undefined_nonterminal_is_reported_once() {
        let g = parse_grammar("s(S) ~~> np(S), * @runs.").unwrap();
        let diags = validate(&g);
        let undefined: Vec<_> = diags.iter().filter(|d| d.message.contains("undefined nonterminal np/1")).collect();
        assert_eq!(undefined.len(), 1);
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn head_in_disjunction_is_only_a_note() {
        let g = parse_grammar("noun(X) ~~> ( * @pussy, (? @cat ?) ; * @cat), {X=cat}.").unwrap();
        let diags = validate(&g);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Note);
        assert!(diags[0].message.contains("local to its disjunct"));
    }

    #[test]
    fn multiple_heads_and_unreachable_rules_warn() {
        let g = parse_grammar(":- start s/0.\ns ~~> * @a, * @b.\nt ~~> @c.").unwrap();
        let diags = validate(&g);
        assert!(diags.iter().any(|d| d.message.contains("2 heads")));
        assert!(diags.iter().any(|d| d.message.contains("t/0 is unreachable")));
    }
}
