//! Head-driven island parsing over token sequences.
//!
//! A rule evaluated in a window `[lo, hi)` yields islands anywhere inside the
//! window. Within a sequence the head is placed first, then the items to its
//! left from right to left, then the items to its right from left to right;
//! each item is confined to the gap left by its already placed neighbours.
//! Constraints run once every island of the sequence is placed, negations
//! last.
//!
//! Calls are tabled per `(goal, lo, hi)` and evaluated to a fixpoint, so
//! left-recursive or cyclic rules terminate as long as their answer set is
//! finite.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::grammar::{pred_name, Builtin, Grammar, PredKey, RhsExpr, Rule, RuleKind};
use crate::term::{
    apply, freshen, rational_to_f64, unify, Rational, Substitution, Symbol, Term, VarGen,
};
use crate::thesaurus::{fold_case, Thesaurus};

pub type Cover = FixedBitSet;

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub surface: Symbol,
    pub payload: Term,
}

impl Token {
    pub fn new(surface: &str, payload: Term) -> Self {
        Token { surface: Symbol::intern(surface), payload }
    }

    pub fn word(surface: &str) -> Self {
        Token::new(surface, Term::nil())
    }
}

/// Whitespace-separated words with empty payloads.
pub fn tokens(text: &str) -> Vec<Token> {
    text.split_whitespace().map(Token::word).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    /// Source index of the rule that produced this island.
    pub rule: usize,
    pub pred: PredKey,
    pub span: (usize, usize),
    pub covered: Cover,
    pub ignored: Cover,
    pub term: Term,
    pub children: Vec<Arc<Analysis>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AnalysisKey {
    pub pred: PredKey,
    pub span: (usize, usize),
    pub covered: Cover,
    pub ignored: Cover,
    pub term: Term,
}

impl Analysis {
    pub fn span_len(&self) -> usize {
        self.span.1 - self.span.0
    }

    pub fn covered_count(&self) -> usize {
        self.covered.count_ones(..)
    }

    pub fn covered_indices(&self) -> Vec<usize> {
        self.covered.ones().collect()
    }

    pub fn ignored_indices(&self) -> Vec<usize> {
        self.ignored.ones().collect()
    }

    /// `|covered| / span length`; an empty span has ratio 1.
    pub fn ratio(&self) -> Rational {
        ratio_of(self.covered_count(), self.span_len())
    }

    pub fn is_epsilon(&self) -> bool {
        self.span.0 == self.span.1
    }

    pub fn key(&self) -> AnalysisKey {
        AnalysisKey {
            pred: self.pred,
            span: self.span,
            covered: self.covered.clone(),
            ignored: self.ignored.clone(),
            term: self.term.clone(),
        }
    }

    /// The covered tokens joined by single spaces.
    pub fn covered_text(&self, tokens: &[Token]) -> String {
        self.covered
            .ones()
            .map(|i| tokens[i].surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// This analysis followed by all its descendants, preorder.
    pub fn descendants(self: &Arc<Self>) -> Vec<Arc<Analysis>> {
        let mut out = Vec::new();
        let mut stack = vec![Arc::clone(self)];
        while let Some(a) = stack.pop() {
            stack.extend(a.children.iter().rev().cloned());
            out.push(a);
        }
        out
    }

    pub fn report(&self) -> AnalysisReport {
        AnalysisReport {
            rule: self.rule,
            pred: pred_name(&self.pred),
            span: [self.span.0, self.span.1],
            covered: self.covered_indices(),
            ignored: self.ignored_indices(),
            ratio: rational_to_f64(&self.ratio()),
            term: self.term.to_string(),
            children: self.children.iter().map(|c| c.report()).collect(),
        }
    }
}

fn ratio_of(covered: usize, len: usize) -> Rational {
    if len == 0 {
        Rational::from_integer(1)
    } else {
        Rational::new(covered as i64, len as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub rule: usize,
    pub pred: String,
    pub span: [usize; 2],
    pub covered: Vec<usize>,
    pub ignored: Vec<usize>,
    pub ratio: f64,
    pub term: String,
    pub children: Vec<AnalysisReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Global coverage threshold for rules without their own `#T`.
    pub threshold: Rational,
    /// Maximum nesting of tabled calls.
    pub max_depth: usize,
    /// Cap on analyses kept per call table and on the final stream.
    pub max_analyses: Option<usize>,
    /// Evaluation steps allowed for one parse.
    pub step_budget: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            threshold: Rational::from_integer(0),
            max_depth: 200,
            max_analyses: None,
            step_budget: 5_000_000,
        }
    }
}

impl EngineConfig {
    /// Defaults with the threshold taken from the grammar's `:- threshold` directive.
    pub fn for_grammar(g: &Grammar) -> Self {
        EngineConfig { threshold: g.default_threshold, ..Self::default() }
    }

    pub fn with_threshold(mut self, t: Rational) -> Self {
        self.threshold = t;
        self
    }
}

pub fn effective_threshold(rule: &Rule, cfg: &EngineConfig) -> Rational {
    rule.threshold.unwrap_or(cfg.threshold)
}

pub fn threshold_check(a: &Analysis, t: &Rational) -> bool {
    a.ratio() >= *t
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub steps: u64,
    pub tables: usize,
    pub depth_exceeded: u64,
    pub budget_exhausted: bool,
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CallKey {
    Pred(Symbol, usize),
    IgnoreNamed(Symbol),
    IgnoreClass,
}

#[derive(Clone, Debug)]
pub struct ChartEntry {
    pub analysis: Arc<Analysis>,
    pub call: CallKey,
    /// Window the producing call was evaluated in.
    pub window: (usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RuleCounts {
    pub successes: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Chart {
    pub successes: BTreeMap<(PredKey, usize), Vec<ChartEntry>>,
    pub failures: BTreeSet<(PredKey, usize)>,
    pub rule_counts: BTreeMap<usize, RuleCounts>,
    pub stats: Stats,
    seen: HashSet<AnalysisKey>,
}

impl Chart {
    fn record(&mut self, entry: ChartEntry) {
        if self.seen.insert(entry.analysis.key()) {
            self.rule_counts.entry(entry.analysis.rule).or_default().successes += 1;
            self.successes
                .entry((entry.analysis.pred, entry.analysis.span.0))
                .or_default()
                .push(entry);
        }
    }

    /// Every recorded success, ordered by start index then predicate.
    pub fn entries(&self) -> Vec<&ChartEntry> {
        let mut all: Vec<&ChartEntry> = self.successes.values().flatten().collect();
        all.sort_by_key(|e| e.analysis.span.0);
        all
    }

    pub fn contains(&self, a: &Analysis) -> bool {
        self.seen.contains(&a.key())
    }

    /// Re-runs the call that produced `entry` and checks the analysis comes back.
    pub fn replay(&self, parser: &Parser<'_>, tokens: &[Token], entry: &ChartEntry) -> bool {
        on_deep_stack(|| {
            let mut run = Run::new(parser, tokens);
            let answers = run.call_table((entry.call, entry.window.0, entry.window.1));
            answers.iter().any(|a| **a == *entry.analysis)
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("start symbol {0} is not defined by the grammar")]
    UndefinedStart(String),
    #[error("grammar declares no start symbol")]
    NoStart,
}

#[derive(Clone, Debug)]
pub struct ParseOutcome {
    pub analyses: Vec<Arc<Analysis>>,
    pub chart: Chart,
}

impl ParseOutcome {
    pub fn stats(&self) -> &Stats {
        &self.chart.stats
    }
}

/// A grammar bound to an optional lexicon and a configuration.
#[derive(Clone, Debug)]
pub struct Parser<'a> {
    grammar: &'a Grammar,
    lexicon: Option<&'a Thesaurus>,
    cfg: EngineConfig,
}

impl<'a> Parser<'a> {
    pub fn new(grammar: &'a Grammar) -> Self {
        Parser { grammar, lexicon: None, cfg: EngineConfig::for_grammar(grammar) }
    }

    pub fn with_lexicon(mut self, lexicon: &'a Thesaurus) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn with_config(mut self, cfg: EngineConfig) -> Self {
        self.cfg = cfg;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn grammar(&self) -> &Grammar {
        self.grammar
    }

    /// All analyses of `start` over the input, ordered by rule then start index.
    pub fn parse(&self, start: PredKey, tokens: &[Token]) -> Result<ParseOutcome, EngineError> {
        if !self.grammar.defines(start) {
            return Err(EngineError::UndefinedStart(pred_name(&start)));
        }
        Ok(self.run_starts(&[start], tokens))
    }

    /// Parses with every declared start symbol, concatenating the streams in
    /// declaration order.
    pub fn parse_start(&self, tokens: &[Token]) -> Result<ParseOutcome, EngineError> {
        let starts = &self.grammar.start;
        if starts.is_empty() {
            return Err(EngineError::NoStart);
        }
        for s in starts {
            if !self.grammar.defines(*s) {
                return Err(EngineError::UndefinedStart(pred_name(s)));
            }
        }
        Ok(self.run_starts(starts, tokens))
    }

    fn run_starts(&self, starts: &[PredKey], tokens: &[Token]) -> ParseOutcome {
        on_deep_stack(|| {
            let mut run = Run::new(self, tokens);
            let mut analyses = Vec::new();
            for s in starts {
                let mut part = run.call_table((CallKey::Pred(s.0, s.1), 0, tokens.len())).to_vec();
                part.sort_by_key(|a| (a.rule, a.span.0));
                analyses.extend(part);
            }
            if let Some(cap) = self.cfg.max_analyses {
                if analyses.len() > cap {
                    analyses.truncate(cap);
                    run.stats.truncated = true;
                }
            }
            ParseOutcome { analyses, chart: run.finish() }
        })
    }
}

/// Convenience wrapper around [`Parser::parse`].
pub fn analyses(
    g: &Grammar,
    start: PredKey,
    tokens: &[Token],
    cfg: &EngineConfig,
) -> Result<ParseOutcome, EngineError> {
    Parser::new(g).with_config(cfg.clone()).parse(start, tokens)
}

// ---------------------------------------------------------------------------
// Evaluation

const PARSE_STACK: usize = 512 << 20;

/// Evaluation recurses once per nested call table; run it on a thread whose
/// stack is sized for `max_depth` nesting rather than the caller's.
fn on_deep_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .name("lhip-parse".into())
            .stack_size(PARSE_STACK)
            .spawn_scoped(scope, f)
            .expect("spawn parse thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

type TableKey = (CallKey, usize, usize);

#[derive(Clone, Copy, Debug)]
enum TableState {
    Evaluating { depth: usize },
    Incomplete { epoch: u64, low: usize },
    Complete,
}

struct Table {
    state: TableState,
    answers: Arc<Vec<Arc<Analysis>>>,
    seen: HashSet<AnalysisKey>,
    per_rule: BTreeMap<usize, usize>,
}

/// One contribution of an expression: bindings plus the islands it placed.
#[derive(Clone)]
struct Piece {
    subst: Substitution,
    extent: Option<(usize, usize)>,
    covered: Cover,
    ignored: Cover,
    children: Vec<Arc<Analysis>>,
}

struct Run<'p, 'a> {
    parser: &'p Parser<'a>,
    tokens: &'p [Token],
    n: usize,
    tables: HashMap<TableKey, Table>,
    lowlinks: Vec<usize>,
    incomplete: Vec<TableKey>,
    epoch: u64,
    answer_counter: u64,
    stats: Stats,
    chart: Chart,
}

impl<'p, 'a> Run<'p, 'a> {
    fn new(parser: &'p Parser<'a>, tokens: &'p [Token]) -> Self {
        Run {
            parser,
            tokens,
            n: tokens.len(),
            tables: HashMap::new(),
            lowlinks: Vec::new(),
            incomplete: Vec::new(),
            epoch: 0,
            answer_counter: 0,
            stats: Stats::default(),
            chart: Chart::default(),
        }
    }

    fn finish(mut self) -> Chart {
        self.stats.tables = self.tables.len();
        self.chart.stats = self.stats;
        self.chart
    }

    fn rules_for(&self, key: CallKey) -> Vec<&'a Rule> {
        let g: &'a Grammar = self.parser.grammar;
        match key {
            CallKey::Pred(f, n) => g.rules_for((f, n)).collect(),
            CallKey::IgnoreNamed(name) => g.ignore_rules(Some(name)).collect(),
            CallKey::IgnoreClass => g.ignore_rules(None).collect(),
        }
    }

    fn note_low(&mut self, d: usize) {
        if let Some(top) = self.lowlinks.last_mut() {
            *top = (*top).min(d);
        }
    }

    fn call_table(&mut self, key: TableKey) -> Arc<Vec<Arc<Analysis>>> {
        if let Some(t) = self.tables.get(&key) {
            match t.state {
                TableState::Complete => return Arc::clone(&t.answers),
                TableState::Evaluating { depth } => {
                    let answers = Arc::clone(&t.answers);
                    self.note_low(depth);
                    return answers;
                }
                TableState::Incomplete { epoch, low } if epoch == self.epoch => {
                    let answers = Arc::clone(&t.answers);
                    self.note_low(low);
                    return answers;
                }
                TableState::Incomplete { .. } => {}
            }
        }
        if self.lowlinks.len() >= self.parser.cfg.max_depth {
            self.stats.depth_exceeded += 1;
            return Arc::new(Vec::new());
        }
        let depth = self.lowlinks.len();
        self.lowlinks.push(depth);
        let mark = self.incomplete.len();
        self.tables
            .entry(key)
            .or_insert_with(|| Table {
                state: TableState::Complete,
                answers: Arc::new(Vec::new()),
                seen: HashSet::new(),
                per_rule: BTreeMap::new(),
            })
            .state = TableState::Evaluating { depth };

        loop {
            let before = self.answer_counter;
            self.evaluate_rules(key);
            let low = self.lowlinks[depth];
            if low < depth {
                let epoch = self.epoch;
                self.table_mut(key).state = TableState::Incomplete { epoch, low };
                self.incomplete.push(key);
                self.lowlinks.pop();
                self.note_low(low);
                return Arc::clone(&self.tables[&key].answers);
            }
            if self.answer_counter == before || self.stats.budget_exhausted {
                break;
            }
            self.epoch += 1;
            self.lowlinks[depth] = depth;
        }
        let members: Vec<TableKey> = self.incomplete.drain(mark..).collect();
        for k in members {
            self.complete(k);
        }
        self.complete(key);
        self.lowlinks.pop();
        Arc::clone(&self.tables[&key].answers)
    }

    fn table_mut(&mut self, key: TableKey) -> &mut Table {
        self.tables.get_mut(&key).expect("table exists")
    }

    fn complete(&mut self, key: TableKey) {
        if matches!(self.tables[&key].state, TableState::Complete) {
            return;
        }
        let rules: Vec<usize> = self.rules_for(key.0).iter().map(|r| r.index).collect();
        let table = self.tables.get_mut(&key).expect("table exists");
        table.state = TableState::Complete;
        let answers = Arc::clone(&table.answers);
        for r in rules {
            if table.per_rule.get(&r).copied().unwrap_or(0) == 0 {
                self.chart.rule_counts.entry(r).or_default().failures += 1;
            }
        }
        if answers.is_empty() {
            if let CallKey::Pred(f, n) = key.0 {
                self.chart.failures.insert(((f, n), key.1));
            }
        }
        for a in answers.iter() {
            self.chart.record(ChartEntry { analysis: Arc::clone(a), call: key.0, window: (key.1, key.2) });
        }
    }

    fn evaluate_rules(&mut self, key: TableKey) {
        let (call, lo, hi) = key;
        for rule in self.rules_for(call) {
            let mut gen = VarGen::new();
            gen.reserve(rule.var_count());
            let pieces = self.eval(&rule.body, lo, hi, &Substitution::new(), &mut gen);
            let threshold = effective_threshold(rule, &self.parser.cfg);
            for p in pieces {
                let (span, len) = match p.extent {
                    Some((s, e)) => ((s, e), e - s),
                    None => ((lo, lo), 0),
                };
                if ratio_of(p.covered.count_ones(..), len) < threshold {
                    continue;
                }
                let children = p
                    .children
                    .into_iter()
                    .map(|c| if c.is_epsilon() { relocate(&c, span.0) } else { c })
                    .collect();
                let analysis = Analysis {
                    rule: rule.index,
                    pred: rule.pred(),
                    span,
                    covered: p.covered,
                    ignored: p.ignored,
                    term: apply(&p.subst, &rule.lhs).canonical(),
                    children,
                };
                self.add_answer(key, analysis);
            }
        }
    }

    fn add_answer(&mut self, key: TableKey, a: Analysis) {
        let cap = self.parser.cfg.max_analyses;
        let table = self.tables.get_mut(&key).expect("table exists");
        if cap.is_some_and(|c| table.answers.len() >= c) {
            if !table.seen.contains(&a.key()) {
                self.stats.truncated = true;
            }
            return;
        }
        if table.seen.insert(a.key()) {
            *table.per_rule.entry(a.rule).or_default() += 1;
            Arc::make_mut(&mut table.answers).push(Arc::new(a));
            self.answer_counter += 1;
        }
    }

    fn tick(&mut self) -> bool {
        self.stats.steps += 1;
        if self.stats.steps > self.parser.cfg.step_budget {
            self.stats.budget_exhausted = true;
        }
        !self.stats.budget_exhausted
    }

    fn epsilon(&self, s: &Substitution) -> Piece {
        Piece {
            subst: s.clone(),
            extent: None,
            covered: Cover::with_capacity(self.n),
            ignored: Cover::with_capacity(self.n),
            children: Vec::new(),
        }
    }

    fn eval(&mut self, e: &RhsExpr, lo: usize, hi: usize, s: &Substitution, gen: &mut VarGen) -> Vec<Piece> {
        if !self.tick() {
            return Vec::new();
        }
        match e {
            RhsExpr::Terminal { word, payload } => {
                let mut out = Vec::new();
                for i in lo..hi {
                    let tok = &self.tokens[i];
                    let Some(s1) = unify(word, &Term::Atom(tok.surface), s) else { continue };
                    let Some(s2) = unify(payload, &tok.payload, &s1) else { continue };
                    let mut p = self.epsilon(&s2);
                    p.extent = Some((i, i + 1));
                    p.covered.insert(i);
                    out.push(p);
                }
                out
            }
            RhsExpr::Call(goal) => {
                let goal = apply(s, goal);
                let (f, n) = goal.functor().expect("calls are callable");
                let answers = self.call_table((CallKey::Pred(f, n), lo, hi));
                let mut out = Vec::new();
                for a in answers.iter() {
                    let t = freshen(&a.term, gen);
                    if let Some(s2) = unify(&t, &goal, s) {
                        out.push(self.piece_from(a, s2, false));
                    }
                }
                out
            }
            RhsExpr::Ignore(name) => {
                let call = match name {
                    Some(n) => CallKey::IgnoreNamed(*n),
                    None => CallKey::IgnoreClass,
                };
                let answers = self.call_table((call, lo, hi));
                answers.iter().map(|a| self.piece_from(a, s.clone(), true)).collect()
            }
            RhsExpr::Builtin(b) => {
                let sols = self.builtin(b, s);
                sols.into_iter().map(|s2| self.epsilon(&s2)).collect()
            }
            RhsExpr::Seq(items) => self.eval_seq(items, lo, hi, s, gen),
            RhsExpr::Adjacent(l, r) => self.eval_adjacent(l, r, lo, hi, s, gen),
            RhsExpr::Disjunction(l, r) => {
                let mut out = self.eval(l, lo, hi, s, gen);
                out.extend(self.eval(r, lo, hi, s, gen));
                out
            }
            RhsExpr::Negation(inner) => {
                if self.eval(inner, lo, hi, s, gen).is_empty() {
                    vec![self.epsilon(s)]
                } else {
                    Vec::new()
                }
            }
            RhsExpr::Optional(inner) => {
                let mut out = self.eval(inner, lo, hi, s, gen);
                out.push(self.epsilon(s));
                out
            }
            RhsExpr::Head(inner) => self.eval(inner, lo, hi, s, gen),
        }
    }

    fn piece_from(&self, a: &Arc<Analysis>, subst: Substitution, ignored: bool) -> Piece {
        Piece {
            subst,
            extent: if a.is_epsilon() { None } else { Some(a.span) },
            covered: a.covered.clone(),
            ignored: if ignored { a.covered.clone() } else { a.ignored.clone() },
            children: vec![Arc::clone(a)],
        }
    }

    fn eval_adjacent(
        &mut self,
        l: &RhsExpr,
        r: &RhsExpr,
        lo: usize,
        hi: usize,
        s: &Substitution,
        gen: &mut VarGen,
    ) -> Vec<Piece> {
        let mut out = Vec::new();
        if r.carries_head() && !l.carries_head() {
            for pr in self.eval(r, lo, hi, s, gen) {
                let hi2 = pr.extent.map_or(hi, |e| e.0);
                for pl in self.eval(l, lo, hi2, &pr.subst, gen) {
                    if let (Some(a), Some(b)) = (pl.extent, pr.extent) {
                        if a.1 != b.0 {
                            continue;
                        }
                    }
                    out.push(merge(pl.clone(), &pr, pl.subst.clone()));
                }
            }
        } else {
            for pl in self.eval(l, lo, hi, s, gen) {
                let lo2 = pl.extent.map_or(lo, |e| e.1);
                for pr in self.eval(r, lo2, hi, &pl.subst, gen) {
                    if let (Some(a), Some(b)) = (pl.extent, pr.extent) {
                        if a.1 != b.0 {
                            continue;
                        }
                    }
                    let subst = pr.subst.clone();
                    out.push(merge(pl.clone(), &pr, subst));
                }
            }
        }
        out
    }

    fn eval_seq(
        &mut self,
        items: &[RhsExpr],
        lo: usize,
        hi: usize,
        s: &Substitution,
        gen: &mut VarGen,
    ) -> Vec<Piece> {
        if items.is_empty() {
            return vec![self.epsilon(s)];
        }
        let positional: Vec<usize> = (0..items.len())
            .filter(|&i| !is_constraint(&items[i]) && !matches!(items[i], RhsExpr::Negation(_)))
            .collect();
        let mut order = Vec::with_capacity(items.len());
        if let Some(&h) = positional.iter().find(|&&i| items[i].carries_head()).or(positional.first()) {
            order.push(h);
            order.extend(positional.iter().rev().filter(|&&i| i < h));
            order.extend(positional.iter().filter(|&&i| i > h));
        }

        struct State {
            subst: Substitution,
            placed: Vec<Option<Option<(usize, usize)>>>,
            covered: Cover,
            ignored: Cover,
            children: Vec<Vec<Arc<Analysis>>>,
        }
        let mut states = vec![State {
            subst: s.clone(),
            placed: vec![None; items.len()],
            covered: Cover::with_capacity(self.n),
            ignored: Cover::with_capacity(self.n),
            children: vec![Vec::new(); items.len()],
        }];

        let window = |placed: &[Option<Option<(usize, usize)>>], i: usize| {
            let l = placed[..i].iter().rev().find_map(|p| p.flatten()).map_or(lo, |e| e.1);
            let r = placed[i + 1..].iter().find_map(|p| p.flatten()).map_or(hi, |e| e.0);
            (l, r)
        };

        for &i in &order {
            let mut next = Vec::new();
            for st in states {
                let (wl, wr) = window(&st.placed, i);
                if wl > wr {
                    continue;
                }
                for p in self.eval(&items[i], wl, wr, &st.subst, gen) {
                    let mut placed = st.placed.clone();
                    placed[i] = Some(p.extent);
                    let mut covered = st.covered.clone();
                    covered.union_with(&p.covered);
                    let mut ignored = st.ignored.clone();
                    ignored.union_with(&p.ignored);
                    let mut children = st.children.clone();
                    children[i] = p.children;
                    next.push(State { subst: p.subst, placed, covered, ignored, children });
                }
            }
            states = next;
            if states.is_empty() {
                return Vec::new();
            }
        }

        for item in items.iter().filter(|i| is_constraint(i)) {
            let mut next = Vec::new();
            for st in states {
                for p in self.eval(item, lo, hi, &st.subst, gen) {
                    next.push(State {
                        subst: p.subst,
                        placed: st.placed.clone(),
                        covered: st.covered.clone(),
                        ignored: st.ignored.clone(),
                        children: st.children.clone(),
                    });
                }
            }
            states = next;
        }

        for (i, item) in items.iter().enumerate() {
            let RhsExpr::Negation(inner) = item else { continue };
            let mut kept = Vec::new();
            for st in states {
                let (wl, wr) = window(&st.placed, i);
                if wl > wr || self.eval(inner, wl, wr, &st.subst, gen).is_empty() {
                    kept.push(st);
                }
            }
            states = kept;
        }

        states
            .into_iter()
            .map(|st| {
                let extent = st.placed.iter().filter_map(|p| p.flatten()).fold(None, |acc, e| {
                    Some(match acc {
                        None => e,
                        Some((a, b)) => (usize::min(a, e.0), usize::max(b, e.1)),
                    })
                });
                Piece {
                    subst: st.subst,
                    extent,
                    covered: st.covered,
                    ignored: st.ignored,
                    children: st.children.into_iter().flatten().collect(),
                }
            })
            .collect()
    }

    fn builtin(&self, b: &Builtin, s: &Substitution) -> Vec<Substitution> {
        match b {
            Builtin::Unify(x, y) => unify(x, y, s).into_iter().collect(),
            Builtin::Compare(op, x, y) => {
                match (apply(s, x).as_number(), apply(s, y).as_number()) {
                    (Some(a), Some(b)) if op.holds(&a, &b) => vec![s.clone()],
                    _ => Vec::new(),
                }
            }
            Builtin::Append(a, b, c) => {
                let av = apply(s, a);
                if let Some(items) = proper_list(&av) {
                    return unify(&Term::list_with_tail(items, apply(s, b)), c, s).into_iter().collect();
                }
                let cv = apply(s, c);
                let Some(items) = proper_list(&cv) else { return Vec::new() };
                let mut out = Vec::new();
                for k in 0..=items.len() {
                    if let Some(s1) = unify(a, &Term::list(items[..k].to_vec()), s) {
                        if let Some(s2) = unify(b, &Term::list(items[k..].to_vec()), &s1) {
                            out.push(s2);
                        }
                    }
                }
                out
            }
            Builtin::MinList(list, out) => {
                let Some(items) = proper_list(&apply(s, list)) else { return Vec::new() };
                let mut min = Rational::from_integer(1);
                for (k, it) in items.iter().enumerate() {
                    let Some(v) = it.as_number() else { return Vec::new() };
                    if k == 0 || v < min {
                        min = v;
                    }
                }
                unify(out, &Term::number(min), s).into_iter().collect()
            }
            Builtin::Member(x, list) => {
                let Some(items) = proper_list(&apply(s, list)) else { return Vec::new() };
                let xv = apply(s, x);
                items.iter().filter_map(|it| member_match(&xv, it, s)).collect()
            }
            Builtin::NonMember(x, list) => {
                let Some(items) = proper_list(&apply(s, list)) else { return Vec::new() };
                let xv = apply(s, x);
                if items.iter().any(|it| member_match(&xv, it, s).is_some()) {
                    Vec::new()
                } else {
                    vec![s.clone()]
                }
            }
            Builtin::Thesaurus(cat, out) => {
                let words = self
                    .parser
                    .lexicon
                    .and_then(|l| l.category(cat.as_str()))
                    .map(|ws| ws.iter().map(|w| Term::Atom(*w)).collect())
                    .unwrap_or_default();
                unify(out, &Term::list(words), s).into_iter().collect()
            }
        }
    }
}

fn is_constraint(e: &RhsExpr) -> bool {
    match e {
        RhsExpr::Builtin(_) => true,
        RhsExpr::Seq(items) => items.iter().all(is_constraint),
        _ => false,
    }
}

fn proper_list(t: &Term) -> Option<Vec<Term>> {
    match t {
        Term::List(items, None) => Some(items.clone()),
        _ => None,
    }
}

/// Atoms match case-insensitively; anything else must unify.
fn member_match(x: &Term, item: &Term, s: &Substitution) -> Option<Substitution> {
    if let (Term::Atom(a), Term::Atom(b)) = (x, item) {
        return (fold_case(a.as_str()) == fold_case(b.as_str())).then(|| s.clone());
    }
    unify(x, item, s)
}

fn merge(mut left: Piece, right: &Piece, subst: Substitution) -> Piece {
    left.extent = match (left.extent, right.extent) {
        (None, e) | (e, None) => e,
        (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
    };
    left.covered.union_with(&right.covered);
    left.ignored.union_with(&right.ignored);
    left.children.extend(right.children.iter().cloned());
    left.subst = subst;
    left
}

fn relocate(a: &Arc<Analysis>, at: usize) -> Arc<Analysis> {
    if a.span == (at, at) {
        return Arc::clone(a);
    }
    Arc::new(Analysis {
        span: (at, at),
        children: a.children.iter().map(|c| relocate(c, at)).collect(),
        ..(**a).clone()
    })
}

// ---------------------------------------------------------------------------
// Selection tools

/// Analyses with the largest number of covered tokens.
pub fn maximal_coverage(xs: &[Arc<Analysis>]) -> Vec<Arc<Analysis>> {
    let Some(best) = xs.iter().map(|a| a.covered_count()).max() else { return Vec::new() };
    xs.iter().filter(|a| a.covered_count() == best).cloned().collect()
}

/// Analyses with the shortest span.
pub fn minimal_spans(xs: &[Arc<Analysis>]) -> Vec<Arc<Analysis>> {
    let Some(best) = xs.iter().map(|a| a.span_len()).min() else { return Vec::new() };
    xs.iter().filter(|a| a.span_len() == best).cloned().collect()
}

/// Analyses with the highest coverage ratio.
pub fn maximal_threshold(xs: &[Arc<Analysis>]) -> Vec<Arc<Analysis>> {
    let Some(best) = xs.iter().map(|a| a.ratio()).max() else { return Vec::new() };
    xs.iter().filter(|a| a.ratio() == best).cloned().collect()
}

/// Chart successes that do not occur in the derivation of any accepted analysis.
pub fn unattached_constituents(chart: &Chart, accepted: &[Arc<Analysis>]) -> Vec<Arc<Analysis>> {
    let attached: HashSet<AnalysisKey> = accepted
        .iter()
        .flat_map(|a| a.descendants())
        .map(|a| a.key())
        .collect();
    chart
        .entries()
        .into_iter()
        .filter(|e| !attached.contains(&e.analysis.key()))
        .map(|e| Arc::clone(&e.analysis))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RuleFeedback {
    pub rule: usize,
    pub pred: String,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeedbackReport {
    pub tokens: usize,
    pub uncovered: Vec<usize>,
    pub rules: Vec<RuleFeedback>,
    pub best_ratio: Option<f64>,
    pub best_coverage: usize,
}

/// Coverage summary of a parse. Tokens count as covered when some analysis of
/// a start symbol covers them; with no declared start symbol any normal
/// rule's analysis counts.
pub fn grammar_feedback(g: &Grammar, chart: &Chart, n_tokens: usize) -> FeedbackReport {
    let mut covered = Cover::with_capacity(n_tokens);
    let mut best: Option<Rational> = None;
    let mut best_coverage = 0;
    for e in chart.entries() {
        let a = &e.analysis;
        let relevant = if g.start.is_empty() {
            g.rules.get(a.rule).is_some_and(|r| r.kind == RuleKind::Normal)
        } else {
            g.start.contains(&a.pred)
        };
        if !relevant {
            continue;
        }
        covered.union_with(&a.covered);
        let r = a.ratio();
        if best.is_none_or(|b| r > b) {
            best = Some(r);
        }
        best_coverage = best_coverage.max(a.covered_count());
    }
    let rules = g
        .rules
        .iter()
        .map(|r| {
            let c = chart.rule_counts.get(&r.index).copied().unwrap_or_default();
            RuleFeedback { rule: r.index, pred: pred_name(&r.pred()), successes: c.successes, failures: c.failures }
        })
        .collect();
    FeedbackReport {
        tokens: n_tokens,
        uncovered: (0..n_tokens).filter(|i| !covered.contains(*i)).collect(),
        rules,
        best_ratio: best.map(|b| rational_to_f64(&b)),
        best_coverage,
    }
}
