//! Named definite-clause theories, composition and bounded proof search.
//!
//! ```text
//! theory rules.
//! locality(City) :- caller_prefix(X), prefix(X, City).
//! ```
//!
//! `P ≺ Q` keeps the predicates of `P` that `Q` does not define, `P ∪ Q`
//! concatenates clause lists and `P isa Q` is `P ∪ (Q ≺ P)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::grammar::{pred_name, PredKey};
use crate::syntax::{Reader, SyntaxError, Tok, VarScope};
use crate::term::{apply, unify, Named, Substitution, Symbol, Term, Var, VarGen};

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    pub var_names: Vec<String>,
}

impl Clause {
    pub fn fact(head: Term) -> Self {
        let n = head.max_var().map_or(0, |m| m + 1);
        Clause { head, body: Vec::new(), var_names: (0..n).map(|i| format!("_G{i}")).collect() }
    }

    pub fn pred(&self) -> PredKey {
        self.head.functor().expect("clause heads are callable")
    }

    fn var_span(&self) -> u32 {
        let from_terms = std::iter::once(&self.head)
            .chain(&self.body)
            .filter_map(Term::max_var)
            .max()
            .map_or(0, |m| m + 1);
        from_terms.max(self.var_names.len() as u32)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let named = |t| Named { term: t, names: &self.var_names };
        write!(f, "{}", named(&self.head))?;
        if !self.body.is_empty() {
            let goals: Vec<String> = self.body.iter().map(|g| named(g).to_string()).collect();
            write!(f, " :- {}", goals.join(", "))?;
        }
        f.write_str(".")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theory {
    pub name: Symbol,
    /// Predicates in first-definition order.
    order: Vec<PredKey>,
    preds: BTreeMap<PredKey, Vec<Clause>>,
}

impl Theory {
    pub fn new(name: &str) -> Self {
        Theory { name: Symbol::intern(name), order: Vec::new(), preds: BTreeMap::new() }
    }

    pub fn push(&mut self, clause: Clause) {
        let key = clause.pred();
        if !self.preds.contains_key(&key) {
            self.order.push(key);
        }
        self.preds.entry(key).or_default().push(clause);
    }

    pub fn defines(&self, key: PredKey) -> bool {
        self.preds.contains_key(&key)
    }

    pub fn clauses(&self, key: PredKey) -> &[Clause] {
        self.preds.get(&key).map_or(&[], Vec::as_slice)
    }

    pub fn predicates(&self) -> impl Iterator<Item = PredKey> + '_ {
        self.order.iter().copied()
    }

    pub fn all_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.order.iter().flat_map(|k| self.preds[k].iter())
    }

    pub fn len(&self) -> usize {
        self.preds.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    fn renamed(mut self, name: Symbol) -> Self {
        self.name = name;
        self
    }
}

impl fmt::Display for Theory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory {}.", Term::Atom(self.name))?;
        for c in self.all_clauses() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TheoryError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("theory {0} is not defined")]
    Unbound(String),
    #[error("proof search exceeded {0} steps")]
    Budget(u64),
}

/// Parses one or more `theory name.` sections.
pub fn parse_theories(src: &str) -> Result<Vec<Theory>, TheoryError> {
    let mut r = Reader::from_source(src)?;
    let mut out: Vec<Theory> = Vec::new();
    while !r.at_eof() {
        let pos = r.pos();
        if matches!(r.peek(), Tok::Name(n) if n == "theory") && matches!(r.peek_at(1), Tok::Name(_) | Tok::Quoted(_)) && matches!(r.peek_at(2), Tok::End) {
            r.next();
            let name = match r.next().tok {
                Tok::Name(n) | Tok::Quoted(n) => n,
                _ => unreachable!(),
            };
            r.expect_end()?;
            out.push(Theory::new(&name));
            continue;
        }
        let Some(theory) = out.last_mut() else {
            return Err(SyntaxError::new(pos, "clause before any `theory name.` header").into());
        };
        let mut scope = VarScope::new();
        let head = r.term(&mut scope)?;
        if head.functor().is_none() {
            return Err(SyntaxError::new(pos, "clause head must be an atom or compound term").into());
        }
        let mut body = Vec::new();
        if r.eat_punct(":-") {
            loop {
                let gpos = r.pos();
                if r.is_punct("\\+") {
                    return Err(SyntaxError::new(gpos, "negation is not allowed in theory clauses").into());
                }
                let g = r.term(&mut scope)?;
                if g.functor().is_none() {
                    return Err(SyntaxError::new(gpos, format!("`{g}` is not a callable goal")).into());
                }
                body.push(g);
                if !r.eat_punct(",") {
                    break;
                }
            }
        }
        r.expect_end()?;
        theory.push(Clause { head, body, var_names: scope.into_names() });
    }
    Ok(out)
}

pub fn parse_theory(src: &str) -> Result<Theory, TheoryError> {
    let mut all = parse_theories(src)?;
    match all.len() {
        1 => Ok(all.pop().expect("one theory")),
        0 => Err(SyntaxError::new(crate::syntax::Pos { line: 1, column: 1 }, "missing `theory name.` header").into()),
        n => Err(SyntaxError::new(crate::syntax::Pos { line: 1, column: 1 }, format!("expected one theory, found {n}")).into()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TheoryExpr {
    Leaf(String),
    Union(Box<TheoryExpr>, Box<TheoryExpr>),
    Retract(Box<TheoryExpr>, Box<TheoryExpr>),
    Isa(Box<TheoryExpr>, Box<TheoryExpr>),
}

impl TheoryExpr {
    pub fn leaf(name: &str) -> Self {
        TheoryExpr::Leaf(name.to_owned())
    }

    pub fn union(self, other: TheoryExpr) -> Self {
        TheoryExpr::Union(Box::new(self), Box::new(other))
    }

    pub fn retract(self, other: TheoryExpr) -> Self {
        TheoryExpr::Retract(Box::new(self), Box::new(other))
    }

    pub fn isa(self, other: TheoryExpr) -> Self {
        TheoryExpr::Isa(Box::new(self), Box::new(other))
    }

    /// Rewrites every `isa` into union and retraction.
    pub fn normalize(&self) -> TheoryExpr {
        match self {
            TheoryExpr::Leaf(_) => self.clone(),
            TheoryExpr::Union(l, r) => l.normalize().union(r.normalize()),
            TheoryExpr::Retract(l, r) => l.normalize().retract(r.normalize()),
            TheoryExpr::Isa(p, q) => {
                let p = p.normalize();
                p.clone().union(q.normalize().retract(p))
            }
        }
    }

    /// Parses `(query isa query_defaults) ∪ rules ∪ kb`. `+` may stand for
    /// `∪` and `<` for `≺`; `isa` and `≺` bind tighter than `∪`.
    pub fn parse(src: &str) -> Result<TheoryExpr, String> {
        let toks = expr_tokens(src)?;
        let mut pos = 0;
        let e = expr_union(&toks, &mut pos)?;
        if pos != toks.len() {
            return Err(format!("unexpected `{}`", toks[pos]));
        }
        Ok(e)
    }
}

impl fmt::Display for TheoryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryExpr::Leaf(n) => f.write_str(n),
            TheoryExpr::Union(l, r) => write!(f, "({l} ∪ {r})"),
            TheoryExpr::Retract(l, r) => write!(f, "({l} ≺ {r})"),
            TheoryExpr::Isa(l, r) => write!(f, "({l} isa {r})"),
        }
    }
}

fn expr_tokens(src: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | '∪' | '≺' | '+' | '<' => {
                out.push(c.to_string());
                chars.next();
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut w = String::new();
                while let Some(&ch) = chars.peek() {
                    if !(ch.is_alphanumeric() || ch == '_') {
                        break;
                    }
                    w.push(ch);
                    chars.next();
                }
                out.push(w);
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

fn expr_union(t: &[String], pos: &mut usize) -> Result<TheoryExpr, String> {
    let mut left = expr_isa(t, pos)?;
    while matches!(t.get(*pos).map(String::as_str), Some("∪") | Some("+")) {
        *pos += 1;
        left = left.union(expr_isa(t, pos)?);
    }
    Ok(left)
}

fn expr_isa(t: &[String], pos: &mut usize) -> Result<TheoryExpr, String> {
    let mut left = expr_atom(t, pos)?;
    loop {
        match t.get(*pos).map(String::as_str) {
            Some("isa") => {
                *pos += 1;
                left = left.isa(expr_atom(t, pos)?);
            }
            Some("≺") | Some("<") => {
                *pos += 1;
                left = left.retract(expr_atom(t, pos)?);
            }
            _ => return Ok(left),
        }
    }
}

fn expr_atom(t: &[String], pos: &mut usize) -> Result<TheoryExpr, String> {
    match t.get(*pos).map(String::as_str) {
        Some("(") => {
            *pos += 1;
            let e = expr_union(t, pos)?;
            if t.get(*pos).map(String::as_str) != Some(")") {
                return Err("missing `)`".into());
            }
            *pos += 1;
            Ok(e)
        }
        Some(w) if w != ")" && w != "isa" && w.chars().all(|c| c.is_alphanumeric() || c == '_') => {
            *pos += 1;
            Ok(TheoryExpr::leaf(w))
        }
        Some(w) => Err(format!("unexpected `{w}`")),
        None => Err("unexpected end of expression".into()),
    }
}

pub type Env = BTreeMap<String, Theory>;

pub fn env_from(theories: impl IntoIterator<Item = Theory>) -> Env {
    theories.into_iter().map(|t| (t.name.to_string(), t)).collect()
}

pub fn compose(e: &TheoryExpr, env: &Env) -> Result<Theory, TheoryError> {
    match e {
        TheoryExpr::Leaf(name) => env.get(name).cloned().ok_or_else(|| TheoryError::Unbound(name.clone())),
        TheoryExpr::Union(l, r) => {
            let mut out = compose(l, env)?;
            let right = compose(r, env)?;
            for c in right.all_clauses() {
                out.push(c.clone());
            }
            Ok(out.renamed(Symbol::intern(&e.to_string())))
        }
        TheoryExpr::Retract(l, r) => {
            let left = compose(l, env)?;
            let right = compose(r, env)?;
            let mut out = Theory::new(&e.to_string());
            for c in left.all_clauses() {
                if !right.defines(c.pred()) {
                    out.push(c.clone());
                }
            }
            Ok(out)
        }
        TheoryExpr::Isa(..) => Ok(compose(&e.normalize(), env)?.renamed(Symbol::intern(&e.to_string()))),
    }
}

pub const DEFAULT_BUDGET: u64 = 100_000;

/// Depth-first, leftmost-goal resolution in clause order. Each solution binds
/// exactly the goal's variables. `budget` bounds successful resolution steps.
pub fn demo(e: &TheoryExpr, goal: &Term, env: &Env, budget: u64) -> Result<Vec<Substitution>, TheoryError> {
    let program = compose(e, env)?;
    solve(&program, goal, budget)
}

pub fn solve(program: &Theory, goal: &Term, budget: u64) -> Result<Vec<Substitution>, TheoryError> {
    let goal_vars: Vec<Var> = goal.vars();
    let mut gen = VarGen::above([goal]);
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<Term>, Substitution)> = vec![(vec![goal.clone()], Substitution::new())];
    let mut steps = 0u64;
    while let Some((mut goals, s)) = stack.pop() {
        let Some(first) = goals.pop() else {
            out.push(s.restrict(&goal_vars));
            continue;
        };
        let g = apply(&s, &first);
        let Some(key) = g.functor() else { continue };
        let mut alternatives = Vec::new();
        for c in program.clauses(key) {
            let offset = gen.reserve(c.var_span());
            let head = c.head.offset_vars(offset);
            if let Some(s2) = unify(&head, &g, &s) {
                steps += 1;
                if steps > budget {
                    return Err(TheoryError::Budget(budget));
                }
                let mut next = goals.clone();
                next.extend(c.body.iter().rev().map(|b| b.offset_vars(offset)));
                alternatives.push((next, s2));
            }
        }
        // goals are kept reversed so the leftmost one is popped first
        stack.extend(alternatives.into_iter().rev());
    }
    Ok(out)
}

/// Values a single-variable goal takes, in solution order without repeats.
pub fn demo_values(e: &TheoryExpr, goal: &Term, env: &Env, budget: u64) -> Result<Vec<Term>, TheoryError> {
    let vars = goal.vars();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in demo(e, goal, env, budget)? {
        let val = match vars.first() {
            Some(v) => apply(&s, &Term::Var(*v)),
            None => Term::atom("true"),
        };
        if seen.insert(val.to_string()) {
            out.push(val);
        }
    }
    Ok(out)
}

pub fn describe_pred(key: &PredKey) -> String {
    pred_name(key)
}
