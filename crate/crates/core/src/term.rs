//! First-order terms, logical variables and syntactic unification.
//!
//! Terms carry rule arguments, semantic values built by grammar rules and the
//! clauses of the theory engine. Atoms are interned [`Symbol`]s so comparing
//! two words is an integer comparison.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{OnceLock, RwLock};

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

/// Exact rational used for numbers in terms, thresholds and confidences.
pub type Rational = Ratio<i64>;

struct Interner {
    ids: HashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(|| {
        RwLock::new(Interner {
            ids: HashMap::new(),
            names: Vec::new(),
        })
    })
}

/// An interned string. Equality and hashing use the id; ordering uses the text
/// so that sorted output does not depend on interning order.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol(u32);

impl Symbol {
    pub fn intern(text: &str) -> Symbol {
        if let Some(&id) = interner().read().expect("interner poisoned").ids.get(text) {
            return Symbol(id);
        }
        let mut table = interner().write().expect("interner poisoned");
        if let Some(&id) = table.ids.get(text) {
            return Symbol(id);
        }
        let leaked: &'static str = Box::leak(text.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Symbol(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().expect("interner poisoned").names[self.0 as usize]
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.0 == other.0 {
            std::cmp::Ordering::Equal
        } else {
            self.as_str().cmp(other.as_str())
        }
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.as_str())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl serde::Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::intern(s)
    }
}

/// A logical variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(Symbol),
    Number(Rational),
    Var(Var),
    /// Always has at least one argument; nullary compounds are atoms.
    Compound(Symbol, Vec<Term>),
    /// `items` followed by `tail`; `tail == None` is a proper list.
    List(Vec<Term>, Option<Box<Term>>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(Symbol::intern(name))
    }

    pub fn int(value: i64) -> Term {
        Term::Number(Rational::from_integer(value))
    }

    pub fn number(value: Rational) -> Term {
        Term::Number(value)
    }

    pub fn var(id: u32) -> Term {
        Term::Var(Var(id))
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        Term::make_compound(Symbol::intern(functor), args)
    }

    pub fn make_compound(functor: Symbol, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn nil() -> Term {
        Term::List(Vec::new(), None)
    }

    pub fn list(items: Vec<Term>) -> Term {
        Term::List(items, None)
    }

    /// Builds `[items | tail]`, merging a tail that is itself a list.
    pub fn list_with_tail(mut items: Vec<Term>, tail: Term) -> Term {
        match tail {
            Term::List(rest, rest_tail) => {
                items.extend(rest);
                if items.is_empty() {
                    match rest_tail {
                        Some(t) => *t,
                        None => Term::nil(),
                    }
                } else {
                    Term::List(items, rest_tail)
                }
            }
            other if items.is_empty() => other,
            other => Term::List(items, Some(Box::new(other))),
        }
    }

    pub fn as_atom(&self) -> Option<Symbol> {
        match self {
            Term::Atom(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_number(&self) -> Option<Rational> {
        match self {
            Term::Number(n) => Some(*n),
            _ => None,
        }
    }

    /// Elements of a proper list.
    pub fn as_list(&self) -> Option<&[Term]> {
        match self {
            Term::List(items, None) => Some(items),
            _ => None,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    /// Functor and arity, for atoms and compounds.
    pub fn functor(&self) -> Option<(Symbol, usize)> {
        match self {
            Term::Atom(s) => Some((*s, 0)),
            Term::Compound(f, args) => Some((*f, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Number(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            Term::List(items, tail) => {
                items.iter().all(Term::is_ground) && tail.as_deref().is_none_or(Term::is_ground)
            }
        }
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Term::Atom(_) | Term::Number(_) => {}
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::List(items, tail) => {
                items.iter().for_each(|a| a.collect_vars(out));
                if let Some(t) = tail {
                    t.collect_vars(out);
                }
            }
        }
    }

    pub fn max_var(&self) -> Option<u32> {
        self.vars().into_iter().map(|v| v.0).max()
    }

    /// Renames variables to `0, 1, ...` in order of first occurrence.
    /// Two terms are variants of each other iff their canonical forms are equal.
    pub fn canonical(&self) -> Term {
        let mut map = HashMap::new();
        self.rename(&mut |v| {
            let next = map.len() as u32;
            Var(*map.entry(v).or_insert(next))
        })
    }

    pub fn is_variant(&self, other: &Term) -> bool {
        self.canonical() == other.canonical()
    }

    pub(crate) fn rename(&self, f: &mut impl FnMut(Var) -> Var) -> Term {
        match self {
            Term::Var(v) => Term::Var(f(*v)),
            Term::Atom(_) | Term::Number(_) => self.clone(),
            Term::Compound(name, args) => {
                Term::Compound(*name, args.iter().map(|a| a.rename(f)).collect())
            }
            Term::List(items, tail) => Term::List(
                items.iter().map(|a| a.rename(f)).collect(),
                tail.as_ref().map(|t| Box::new(t.rename(f))),
            ),
        }
    }

    /// Adds `offset` to every variable id.
    pub fn offset_vars(&self, offset: u32) -> Term {
        self.rename(&mut |v| Var(v.0 + offset))
    }
}

/// Per-derivation source of fresh variables.
#[derive(Clone, Debug, Default)]
pub struct VarGen {
    next: u32,
}

impl VarGen {
    pub fn new() -> Self {
        VarGen { next: 0 }
    }

    /// A generator whose ids never collide with variables already in `terms`.
    pub fn above<'a>(terms: impl IntoIterator<Item = &'a Term>) -> Self {
        let next = terms
            .into_iter()
            .filter_map(Term::max_var)
            .max()
            .map_or(0, |m| m + 1);
        VarGen { next }
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var(self.next);
        self.next += 1;
        v
    }

    /// Reserves `n` consecutive ids and returns the first.
    pub fn reserve(&mut self, n: u32) -> u32 {
        let base = self.next;
        self.next += n;
        base
    }
}

/// Renames every variable of `term` to a fresh one, consistently within the call.
pub fn freshen(term: &Term, ctx: &mut VarGen) -> Term {
    let mut map: HashMap<Var, Var> = HashMap::new();
    term.rename(&mut |v| *map.entry(v).or_insert_with(|| ctx.fresh()))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.bindings.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    /// Follows variable bindings until an unbound variable or a non-variable.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Binds `v` to `t` if that does not create a cyclic term.
    pub fn bind(&mut self, v: Var, t: Term) -> bool {
        if self.occurs(v, &t) {
            return false;
        }
        self.bindings.insert(v, t);
        true
    }

    fn occurs(&self, v: Var, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => *w == v,
            Term::Atom(_) | Term::Number(_) => false,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(v, a)),
            Term::List(items, tail) => {
                items.iter().any(|a| self.occurs(v, a))
                    || tail.as_deref().is_some_and(|t| self.occurs(v, t))
            }
        }
    }

    /// Restricts the substitution to the given variables, fully resolved.
    pub fn restrict(&self, vars: &[Var]) -> Substitution {
        let bindings = vars
            .iter()
            .filter_map(|v| {
                let t = apply(self, &Term::Var(*v));
                (t != Term::Var(*v)).then_some((*v, t))
            })
            .collect();
        Substitution { bindings }
    }
}

/// Replaces bound variables in `t`, recursively, to a fixed point.
pub fn apply(s: &Substitution, t: &Term) -> Term {
    match s.walk(t) {
        Term::Var(v) => Term::Var(*v),
        Term::Atom(a) => Term::Atom(*a),
        Term::Number(n) => Term::Number(*n),
        Term::Compound(f, args) => Term::Compound(*f, args.iter().map(|a| apply(s, a)).collect()),
        Term::List(items, tail) => {
            let items = items.iter().map(|a| apply(s, a)).collect();
            match tail {
                None => Term::List(items, None),
                Some(t) => Term::list_with_tail(items, apply(s, t)),
            }
        }
    }
}

/// Most general unifier of `a` and `b` extending `s`, with occurs check.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut s = s.clone();
    unify_in_place(a, b, &mut s).then_some(s)
}

pub(crate) fn unify_in_place(a: &Term, b: &Term, s: &mut Substitution) -> bool {
    let mut stack: Vec<(Term, Term)> = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = stack.pop() {
        let x = s.walk(&x).clone();
        let y = s.walk(&y).clone();
        match (x, y) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => {
                if !s.bind(v, t) {
                    return false;
                }
            }
            (Term::Atom(p), Term::Atom(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Number(p), Term::Number(q)) => {
                if p != q {
                    return false;
                }
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return false;
                }
                stack.extend(xs.into_iter().zip(ys));
            }
            (Term::List(mut xs, xt), Term::List(mut ys, yt)) => {
                if xs.is_empty() {
                    if let Some(t) = xt {
                        stack.push((*t, Term::List(ys, yt)));
                        continue;
                    }
                }
                if ys.is_empty() {
                    if let Some(t) = yt {
                        stack.push((Term::List(xs, xt), *t));
                        continue;
                    }
                }
                if xs.is_empty() || ys.is_empty() {
                    if xs.is_empty() && ys.is_empty() {
                        continue;
                    }
                    return false;
                }
                let common = xs.len().min(ys.len());
                let x_rest = xs.split_off(common);
                let y_rest = ys.split_off(common);
                let x_tail = xt.map_or_else(Term::nil, |t| *t);
                let y_tail = yt.map_or_else(Term::nil, |t| *t);
                stack.push((
                    Term::list_with_tail(x_rest, x_tail),
                    Term::list_with_tail(y_rest, y_tail),
                ));
                stack.extend(xs.into_iter().zip(ys));
            }
            _ => return false,
        }
    }
    true
}

pub(crate) fn atom_needs_quotes(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return true,
    }
    !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn write_atom(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    if atom_needs_quotes(name) {
        f.write_char('\'')?;
        for c in name.chars() {
            match c {
                '\'' => f.write_str("\\'")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                c => f.write_char(c)?,
            }
        }
        f.write_char('\'')
    } else {
        f.write_str(name)
    }
}

/// Exact decimal text when the denominator divides a power of ten, `n/d` otherwise.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut den = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scale = 10i128.pow(digits);
    let scaled = (*r.numer() as i128) * scale / (*r.denom() as i128);
    let sign = if scaled < 0 { "-" } else { "" };
    let scaled = scaled.abs();
    let int_part = scaled / scale;
    let frac = scaled % scale;
    format!("{sign}{int_part}.{frac:0width$}", width = digits as usize)
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `"0.75"`, `"1"`, `"3/4"` or `"-2.5"` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let value = if let Some((n, d)) = body.split_once('/') {
        let d: i64 = d.parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Rational::new(n.parse().ok()?, d)
    } else if let Some((int, frac)) = body.split_once('.') {
        if int.is_empty() || frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = 10i64.checked_pow(frac.len() as u32)?;
        let int: i64 = int.parse().ok()?;
        let frac: i64 = frac.parse().ok()?;
        Rational::new(int.checked_mul(scale)?.checked_add(frac)?, scale)
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        Rational::from_integer(body.parse().ok()?)
    };
    Some(if neg { -value } else { value })
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => write_atom(f, a.as_str()),
            Term::Number(n) => f.write_str(&format_rational(n)),
            Term::Var(v) => write!(f, "_G{}", v.0),
            Term::Compound(name, args) => {
                write_atom(f, name.as_str())?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::List(items, tail) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                if let Some(t) = tail {
                    write!(f, "|{t}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Displays a term using source variable names (`names[id]`), falling back to `_G<id>`.
pub struct Named<'a> {
    pub term: &'a Term,
    pub names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_named(f, self.term, self.names)
    }
}

fn write_named(f: &mut fmt::Formatter<'_>, t: &Term, names: &[String]) -> fmt::Result {
    match t {
        Term::Var(v) => match names.get(v.0 as usize) {
            Some(n) => f.write_str(n),
            None => write!(f, "_G{}", v.0),
        },
        Term::Atom(_) | Term::Number(_) => write!(f, "{t}"),
        Term::Compound(name, args) => {
            write_atom(f, name.as_str())?;
            f.write_str("(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_named(f, a, names)?;
            }
            f.write_str(")")
        }
        Term::List(items, tail) => {
            f.write_str("[")?;
            for (i, a) in items.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write_named(f, a, names)?;
            }
            if let Some(t) = tail {
                f.write_str("|")?;
                write_named(f, t, names)?;
            }
            f.write_str("]")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var(0)
    }
    fn y() -> Term {
        Term::var(1)
    }

    #[test]
    fn binds_variable_to_atom() {
        let s = unify(&x(), &Term::atom("cat"), &Substitution::new()).unwrap();
        assert_eq!(apply(&s, &x()), Term::atom("cat"));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn decomposes_compounds() {
        let pattern = Term::compound("conjunct", vec![Term::var(0), Term::var(1), Term::var(2)]);
        let value = Term::compound(
            "conjunct",
            vec![Term::atom("and"), Term::atom("a"), Term::atom("b")],
        );
        let s = unify(&pattern, &value, &Substitution::new()).unwrap();
        assert_eq!(apply(&s, &Term::var(0)), Term::atom("and"));
        assert_eq!(apply(&s, &Term::var(1)), Term::atom("a"));
        assert_eq!(apply(&s, &Term::var(2)), Term::atom("b"));
    }

    #[test]
    fn distinct_atoms_fail() {
        assert!(unify(&Term::atom("cat"), &Term::atom("dog"), &Substitution::new()).is_none());
    }

    #[test]
    fn occurs_check_fails_cleanly() {
        let fx = Term::compound("f", vec![x()]);
        assert!(unify(&x(), &fx, &Substitution::new()).is_none());
    }

    #[test]
    fn apply_resolves_chains() {
        let mut s = Substitution::new();
        assert!(s.bind(Var(0), Term::compound("f", vec![y()])));
        assert!(s.bind(Var(1), Term::atom("a")));
        assert_eq!(apply(&s, &x()), Term::compound("f", vec![Term::atom("a")]));
        assert_eq!(
            apply(&s, &Term::compound("noun", vec![y()])),
            Term::compound("noun", vec![Term::atom("a")])
        );
        assert_eq!(apply(&Substitution::new(), &x()), x());
    }

    #[test]
    fn freshen_preserves_sharing() {
        let mut ctx = VarGen::above([&Term::var(16)]);
        let t = Term::compound("f", vec![x(), x()]);
        let fresh = freshen(&t, &mut ctx);
        match &fresh {
            Term::Compound(_, args) => {
                assert_eq!(args[0], args[1]);
                assert_ne!(args[0], x());
                assert_eq!(args[0], Term::var(17));
            }
            _ => panic!("expected compound"),
        }
        assert!(fresh.is_variant(&t));
        assert_eq!(freshen(&Term::atom("cat"), &mut ctx), Term::atom("cat"));
    }

    #[test]
    fn partial_lists_unify() {
        // [a|T] = [a,b,c]
        let partial = Term::list_with_tail(vec![Term::atom("a")], x());
        let full = Term::list(vec![Term::atom("a"), Term::atom("b"), Term::atom("c")]);
        let s = unify(&partial, &full, &Substitution::new()).unwrap();
        assert_eq!(
            apply(&s, &x()),
            Term::list(vec![Term::atom("b"), Term::atom("c")])
        );
        assert_eq!(apply(&s, &partial), full);
        assert!(unify(&Term::nil(), &Term::list(vec![Term::atom("a")]), &Substitution::new()).is_none());
        assert!(unify(&Term::nil(), &Term::nil(), &Substitution::new()).is_some());
        // [X|T] = []
        assert!(unify(&Term::list_with_tail(vec![x()], y()), &Term::nil(), &Substitution::new()).is_none());
    }

    #[test]
    fn rationals_print_exactly() {
        assert_eq!(format_rational(&Rational::new(3, 10)), "0.3");
        assert_eq!(format_rational(&Rational::new(3, 4)), "0.75");
        assert_eq!(format_rational(&Rational::from_integer(1)), "1");
        assert_eq!(format_rational(&Rational::new(1, 3)), "1/3");
        assert_eq!(format_rational(&Rational::new(-1, 8)), "-0.125");
        assert_eq!(parse_rational("0.75"), Some(Rational::new(3, 4)));
        assert_eq!(parse_rational("1.0"), Some(Rational::from_integer(1)));
        assert_eq!(parse_rational("1/3"), Some(Rational::new(1, 3)));
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn quoting_follows_canonical_syntax() {
        assert_eq!(Term::atom("cat").to_string(), "cat");
        assert_eq!(Term::atom("téléphone").to_string(), "'téléphone'");
        assert_eq!(Term::atom("Plant").to_string(), "'Plant'");
        assert_eq!(Term::atom("c'est").to_string(), "'c\\'est'");
        assert_eq!(
            Term::compound("ADV", vec![Term::int(1), Term::int(1), Term::int(14)]).to_string(),
            "'ADV'(1,1,14)"
        );
    }

    #[test]
    fn symbols_order_by_text() {
        let b = Symbol::intern("zeta_order_b");
        let a = Symbol::intern("alpha_order_a");
        assert!(a < b);
        assert_eq!(Symbol::intern("alpha_order_a"), a);
    }
}
