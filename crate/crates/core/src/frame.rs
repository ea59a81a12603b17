//! Query frames from discourse-level island analyses.
//!
//! The discourse grammar supplies `frame/8`, whose children are the
//! `hyp_*` hypotheses for each slot. Confidences are exact fractions and are
//! combined by minimum.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::engine::{Analysis, EngineConfig, EngineError, Parser, Stats};
use crate::grammar::{parse_grammar, Grammar, PredKey};
use crate::term::{rational_to_f64, Rational, Symbol, Term};
use crate::theory::{self, Env, Theory, TheoryError, TheoryExpr};
use crate::thesaurus::{fold_case, Thesaurus};
use crate::treepath::{is_ancestor_path, lca, ArcId, PathSentence, PathWord};

pub const DISCOURSE_GRAMMAR: &str = include_str!("../data/discourse.lhip");
pub const THESAURUS: &str = include_str!("../data/thesaurus.txt");

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("unknown slot `{0}`")]
    UnknownSlot(String),
    #[error("confidence {0} lies outside [0, 1]")]
    Confidence(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("unexpected `{0}` in a slot value")]
    Malformed(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    CallerTitle,
    CallerName,
    TargetTitle,
    TargetName,
    StreetName,
    StreetNumber,
    Locality,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::CallerTitle,
        Slot::CallerName,
        Slot::TargetTitle,
        Slot::TargetName,
        Slot::StreetName,
        Slot::StreetNumber,
        Slot::Locality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::CallerTitle => "caller_title",
            Slot::CallerName => "caller_name",
            Slot::TargetTitle => "target_title",
            Slot::TargetName => "target_name",
            Slot::StreetName => "street_name",
            Slot::StreetNumber => "street_number",
            Slot::Locality => "locality",
        }
    }

    /// Hypothesis predicate, argument holding the words, argument holding the confidence.
    fn source(self) -> (&'static str, usize, usize, usize) {
        match self {
            Slot::CallerTitle => ("hyp_caller", 3, 0, 2),
            Slot::CallerName => ("hyp_caller", 3, 1, 2),
            Slot::TargetTitle => ("hyp_target", 3, 0, 2),
            Slot::TargetName => ("hyp_target", 3, 1, 2),
            Slot::StreetName => ("hyp_street_name", 2, 0, 1),
            Slot::StreetNumber => ("hyp_street_number", 2, 0, 1),
            Slot::Locality => ("hyp_locality_name", 2, 0, 1),
        }
    }

    fn pred(self) -> PredKey {
        let (name, arity, ..) = self.source();
        (Symbol::intern(name), arity)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Slot {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, FrameError> {
        Slot::ALL
            .into_iter()
            .find(|slot| slot.as_str() == s)
            .ok_or_else(|| FrameError::UnknownSlot(s.to_owned()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedChunk {
    pub slot: Slot,
    pub words: Vec<PathWord>,
    pub confidence: Rational,
    /// Token span of the hypothesis that produced the chunk.
    pub span: (usize, usize),
}

impl WeightedChunk {
    pub fn empty(slot: Slot, at: usize) -> Self {
        WeightedChunk { slot, words: Vec::new(), confidence: Rational::from_integer(1), span: (at, at) }
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn text(&self) -> String {
        join(&self.words)
    }

    pub fn report(&self) -> ChunkReport {
        ChunkReport {
            slot: self.slot,
            words: self.words.iter().map(|w| w.surface.to_string()).collect(),
            confidence: rational_to_f64(&self.confidence),
            span: [self.span.0, self.span.1],
        }
    }

    fn key(&self) -> (Slot, Vec<Symbol>, Rational, (usize, usize)) {
        (self.slot, self.words.iter().map(|w| w.surface).collect(), self.confidence, self.span)
    }
}

fn join(words: &[PathWord]) -> String {
    words.iter().map(|w| w.surface.as_str()).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChunkReport {
    pub slot: Slot,
    pub words: Vec<String>,
    pub confidence: f64,
    pub span: [usize; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameHypothesis {
    /// One chunk per slot, in [`Slot::ALL`] order.
    pub chunks: Vec<WeightedChunk>,
    pub weight: Rational,
    pub span: (usize, usize),
    pub covered: usize,
    pub rule: usize,
    /// False when some empty slot could have been filled from tokens the
    /// frame leaves unclaimed.
    pub exclusive: bool,
}

impl FrameHypothesis {
    pub fn chunk(&self, slot: Slot) -> &WeightedChunk {
        &self.chunks[slot as usize]
    }

    pub fn report(&self) -> HypothesisReport {
        HypothesisReport {
            weight: rational_to_f64(&self.weight),
            rule: self.rule,
            span: [self.span.0, self.span.1],
            covered: self.covered,
            exclusive: self.exclusive,
            chunks: self.chunks.iter().filter(|c| !c.is_empty()).map(WeightedChunk::report).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub weight: f64,
    pub rule: usize,
    pub span: [usize; 2],
    pub covered: usize,
    pub exclusive: bool,
    pub chunks: Vec<ChunkReport>,
}

/// The discourse grammar and word knowledge it consults.
#[derive(Clone, Debug)]
pub struct Discourse {
    pub grammar: Grammar,
    pub thesaurus: Thesaurus,
    pub config: EngineConfig,
}

impl Discourse {
    pub fn new(grammar: Grammar, thesaurus: Thesaurus) -> Self {
        let config = EngineConfig { max_analyses: Some(20_000), ..EngineConfig::for_grammar(&grammar) };
        Discourse { grammar, thesaurus, config }
    }

    /// The shipped grammar and thesaurus.
    pub fn builtin() -> Self {
        let g = parse_grammar(DISCOURSE_GRAMMAR).expect("shipped discourse grammar parses");
        let th = Thesaurus::parse(THESAURUS).expect("shipped thesaurus parses");
        Discourse::new(g, th)
    }

    pub fn with_config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    fn parse(&self, pred: PredKey, s: &PathSentence) -> Result<Vec<Arc<Analysis>>, FrameError> {
        Ok(self.parse_traced(pred, s)?.0)
    }

    fn parse_traced(&self, pred: PredKey, s: &PathSentence) -> Result<(Vec<Arc<Analysis>>, Stats), FrameError> {
        let out = Parser::new(&self.grammar)
            .with_lexicon(&self.thesaurus)
            .with_config(self.config.clone())
            .parse(pred, &s.tokens())?;
        let stats = out.stats().clone();
        Ok((out.analyses, stats))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    AnnQuerySeparator,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub span: (usize, usize),
    pub confidence: f64,
}

/// Every separator occurrence, leftmost first, longer first at equal starts.
pub fn detect_separators(d: &Discourse, s: &PathSentence) -> Result<Vec<Marker>, FrameError> {
    let mut spans: Vec<(usize, usize)> = d
        .parse((Symbol::intern("ann_query_separator"), 0), s)?
        .iter()
        .map(|a| a.span)
        .collect();
    spans.sort_by_key(|&(lo, hi)| (lo, std::cmp::Reverse(hi)));
    spans.dedup();
    Ok(spans
        .into_iter()
        .map(|span| Marker { kind: MarkerKind::AnnQuerySeparator, span, confidence: 1.0 })
        .collect())
}

/// The leftmost, longest street introducer in the segment.
pub fn detect_street_intro(d: &Discourse, s: &PathSentence) -> Result<Option<(Vec<PathWord>, Rational)>, FrameError> {
    let found = d.parse((Symbol::intern("street_intro"), 2), s)?;
    let best = found.iter().min_by_key(|a| (a.span.0, std::cmp::Reverse(a.span.1)));
    match best {
        None => Ok(None),
        Some(a) => {
            let words = words_of(&a.term.args()[0])?;
            let conf = confidence_of(&a.term.args()[1])?;
            Ok(Some((words, conf)))
        }
    }
}

/// All hypotheses for one slot over a region. A single empty chunk of
/// confidence 1 stands in when no non-empty hypothesis exists.
pub fn hypothesize_slot(d: &Discourse, slot: Slot, s: &PathSentence) -> Result<Vec<WeightedChunk>, FrameError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for a in d.parse(slot.pred(), s)? {
        let c = chunk_of(slot, &a)?;
        if !c.is_empty() && seen.insert(c.key()) {
            out.push(c);
        }
    }
    if out.is_empty() {
        out.push(WeightedChunk::empty(slot, 0));
    }
    Ok(out)
}

pub fn combine_confidences(cs: &[Rational]) -> Result<Rational, FrameError> {
    let zero = Rational::from_integer(0);
    let one = Rational::from_integer(1);
    for c in cs {
        if *c < zero || *c > one {
            return Err(FrameError::Confidence(crate::term::format_rational(c)));
        }
    }
    Ok(cs.iter().copied().min().unwrap_or(one))
}

/// Frame hypotheses by weight, then covered tokens, then enumeration order.
/// Hypotheses with identical chunks are reported once. Hypotheses that are
/// not [`FrameHypothesis::exclusive`] follow all those that are.
pub fn assemble_frames(d: &Discourse, s: &PathSentence) -> Result<Vec<FrameHypothesis>, FrameError> {
    Ok(assemble_frames_traced(d, s)?.0)
}

/// [`assemble_frames`] along with the engine statistics of the parse.
pub fn assemble_frames_traced(d: &Discourse, s: &PathSentence) -> Result<(Vec<FrameHypothesis>, Stats), FrameError> {
    let (analyses, stats) = d.parse_traced((Symbol::intern("frame"), 8), s)?;
    // token sets each weighted slot can fill anywhere in the utterance
    let mut fillers: Vec<(Slot, Vec<Vec<usize>>)> = Vec::new();
    for slot in WEIGHTED {
        let mut sets = Vec::new();
        for a in d.parse(slot.pred(), s)? {
            if !chunk_of(slot, &a)?.is_empty() {
                sets.push(a.covered_indices());
            }
        }
        fillers.push((slot, sets));
    }
    let mut out = Vec::with_capacity(analyses.len());
    for a in &analyses {
        let mut h = hypothesis_of(a)?;
        let claimed: HashSet<usize> = a.covered_indices().into_iter().collect();
        h.exclusive = fillers.iter().all(|(slot, sets)| {
            !h.chunk(*slot).is_empty() || sets.iter().all(|set| set.iter().any(|i| claimed.contains(i)))
        });
        out.push(h);
    }
    // stable sort keeps enumeration order among equals
    out.sort_by(|x, y| y.exclusive.cmp(&x.exclusive).then(y.weight.cmp(&x.weight)).then(y.covered.cmp(&x.covered)));
    let mut seen = HashSet::new();
    out.retain(|h| seen.insert(h.chunks.iter().map(WeightedChunk::key).collect::<Vec<_>>()));
    Ok((out, stats))
}

/// Slots whose confidence enters the frame weight; titles share their name's.
const WEIGHTED: [Slot; 5] = [Slot::CallerName, Slot::TargetName, Slot::StreetName, Slot::StreetNumber, Slot::Locality];

fn hypothesis_of(a: &Analysis) -> Result<FrameHypothesis, FrameError> {
    let mut chunks = Vec::with_capacity(Slot::ALL.len());
    for slot in Slot::ALL {
        let child = a.children.iter().find(|c| c.pred == slot.pred());
        chunks.push(match child {
            Some(c) => chunk_of(slot, c)?,
            None => WeightedChunk::empty(slot, a.span.0),
        });
    }
    let mut confs: Vec<Rational> = Vec::new();
    for c in &chunks {
        // title and name share one confidence
        if matches!(c.slot, Slot::CallerTitle | Slot::TargetTitle) {
            continue;
        }
        confs.push(c.confidence);
    }
    let weight = combine_confidences(&confs)?;
    Ok(FrameHypothesis { chunks, weight, span: a.span, covered: a.covered_count(), rule: a.rule, exclusive: true })
}

fn chunk_of(slot: Slot, a: &Analysis) -> Result<WeightedChunk, FrameError> {
    let (_, _, words_at, conf_at) = slot.source();
    let args = a.term.args();
    let words = words_of(&args[words_at])?;
    let confidence = confidence_of(&args[conf_at])?;
    if !(Rational::from_integer(0)..=Rational::from_integer(1)).contains(&confidence) {
        return Err(FrameError::Confidence(crate::term::format_rational(&confidence)));
    }
    Ok(WeightedChunk { slot, words, confidence, span: a.span })
}

fn confidence_of(t: &Term) -> Result<Rational, FrameError> {
    t.as_number().ok_or_else(|| FrameError::Malformed(t.to_string()))
}

/// Reads a list of `terminal(Word, Path)` terms.
fn words_of(t: &Term) -> Result<Vec<PathWord>, FrameError> {
    let items = t.as_list().ok_or_else(|| FrameError::Malformed(t.to_string()))?;
    items
        .iter()
        .map(|w| match w {
            Term::Compound(f, args) if f.as_str() == "terminal" && args.len() == 2 => {
                let surface = args[0].as_atom().ok_or_else(|| FrameError::Malformed(w.to_string()))?;
                let path = match args[1].as_list() {
                    Some(arcs) => arcs.iter().filter_map(ArcId::from_term).collect(),
                    None => Vec::new(),
                };
                Ok(PathWord { surface, path })
            }
            _ => Err(FrameError::Malformed(w.to_string())),
        })
        .collect()
}

/// Moves hypotheses whose multi-word name chunks all sit in a proper subtree
/// ahead of the rest. Order within each class is kept.
pub fn structural_filter(hs: Vec<FrameHypothesis>, s: &PathSentence) -> Vec<FrameHypothesis> {
    let Ok(whole) = lca(&s.words) else { return hs };
    let grouped = |h: &FrameHypothesis| {
        let mut any = false;
        for slot in [Slot::CallerName, Slot::TargetName, Slot::StreetName, Slot::Locality] {
            let words = &h.chunk(slot).words;
            if words.len() < 2 || words.iter().any(|w| w.path.is_empty()) {
                continue;
            }
            match lca(words) {
                Ok(p) if p.len() > whole.len() && is_ancestor_path(&whole, &p) => any = true,
                _ => return false,
            }
        }
        any
    };
    let (mut first, rest): (Vec<_>, Vec<_>) = hs.into_iter().partition(|h| grouped(h));
    first.extend(rest);
    first
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FullQueryFrame {
    #[serde(default, skip_serializing_if = "Caller::is_empty")]
    pub caller: Caller,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_identification: Option<TargetIdentification>,
    #[serde(default)]
    pub target_address: TargetAddress,
    #[serde(default)]
    pub request: Request,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caller {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locality: Option<String>,
}

impl Caller {
    pub fn is_empty(&self) -> bool {
        self.title.is_none() && self.name.is_none() && self.locality.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetIdentification {
    Person(Person),
    Company(Company),
}

impl TargetIdentification {
    pub fn kind(&self) -> &'static str {
        match self {
            TargetIdentification::Person(_) => "person",
            TargetIdentification::Company(_) => "company",
        }
    }

    /// Family name of a person, name of a company.
    pub fn name(&self) -> Option<&str> {
        match self {
            TargetIdentification::Person(p) => p.family_name.as_deref(),
            TargetIdentification::Company(c) => c.name.as_deref(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<Occupation>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occupation {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Company {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_person: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetAddress {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appart_n: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub building: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub village: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub npa: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc_type: Option<String>,
    #[serde(default, skip_serializing_if = "Locality::is_empty")]
    pub locality: Locality,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locality {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canton: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub telephone_prefix: Option<String>,
}

impl Locality {
    pub fn is_empty(&self) -> bool {
        self.city.is_none()
            && self.environs.is_none()
            && self.region.is_none()
            && self.canton.is_none()
            && self.telephone_prefix.is_none()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_status: Option<String>,
}

impl FullQueryFrame {
    pub fn has_target_name(&self) -> bool {
        self.target_identification.as_ref().and_then(TargetIdentification::name).is_some()
    }

    pub fn has_locality(&self) -> bool {
        !self.target_address.locality.is_empty() || self.target_address.village.is_some()
    }
}

/// Cardinal value of spoken French number words, `quatre-vingt-dix` style
/// compounds included. Digit strings pass through.
pub fn french_number<'a>(words: impl IntoIterator<Item = &'a str>) -> Option<u32> {
    let parts: Vec<String> = words
        .into_iter()
        .flat_map(|w| w.split('-').map(fold_case).collect::<Vec<_>>())
        .filter(|w| !w.is_empty() && w != "et")
        .collect();
    if parts.is_empty() {
        return None;
    }
    if parts.len() == 1 && parts[0].chars().all(|c| c.is_ascii_digit()) {
        return parts[0].parse().ok();
    }
    let (mut total, mut current) = (0u32, 0u32);
    for p in &parts {
        let v = match p.as_str() {
            "zéro" => 0,
            "un" | "une" => 1,
            "deux" => 2,
            "trois" => 3,
            "quatre" => 4,
            "cinq" => 5,
            "six" => 6,
            "sept" => 7,
            "huit" => 8,
            "neuf" => 9,
            "dix" => 10,
            "onze" => 11,
            "douze" => 12,
            "treize" => 13,
            "quatorze" => 14,
            "quinze" => 15,
            "seize" => 16,
            "vingt" | "vingts" => {
                if current % 100 == 4 {
                    current += 76;
                } else {
                    current += 20;
                }
                continue;
            }
            "trente" => 30,
            "quarante" => 40,
            "cinquante" => 50,
            "soixante" => 60,
            "cent" | "cents" => {
                current = current.max(1) * 100;
                continue;
            }
            "mille" => {
                total += current.max(1) * 1000;
                current = 0;
                continue;
            }
            "bis" | "ter" => continue,
            _ => return None,
        };
        current += v;
    }
    Some(total + current)
}

/// Maps chunks onto the query schema. Names are upper-cased, the way the
/// directory stores them; street names keep their spoken form.
pub fn to_full_frame(h: &FrameHypothesis, th: &Thesaurus) -> FullQueryFrame {
    let mut f = FullQueryFrame::default();
    let upper = |ws: &[PathWord]| -> Option<String> {
        (!ws.is_empty()).then(|| ws.iter().map(|w| w.surface.as_str().to_uppercase()).collect::<Vec<_>>().join(" "))
    };
    let plain = |ws: &[PathWord]| (!ws.is_empty()).then(|| join(ws));

    f.caller.title = plain(&h.chunk(Slot::CallerTitle).words);
    f.caller.name = upper(&h.chunk(Slot::CallerName).words);

    let names = &h.chunk(Slot::TargetName).words;
    let title = plain(&h.chunk(Slot::TargetTitle).words);
    if let Some(company_word) = names.iter().find(|w| th.contains("company", w.surface.as_str())) {
        f.target_identification = Some(TargetIdentification::Company(Company {
            name: upper(names),
            category: Some(fold_case(company_word.surface.as_str())),
            ..Company::default()
        }));
    } else if !names.is_empty() || title.is_some() {
        let (mut given, mut family): (Vec<&PathWord>, Vec<&PathWord>) =
            names.iter().partition(|w| th.contains("first_names", w.surface.as_str()));
        if family.is_empty() && given.len() >= 2 {
            family.push(given.remove(0));
        }
        let up = |w: &PathWord| w.surface.as_str().to_uppercase();
        f.target_identification = Some(TargetIdentification::Person(Person {
            family_name: (!family.is_empty()).then(|| family.iter().map(|w| up(w)).collect::<Vec<_>>().join(" ")),
            title,
            first_name: given.first().map(|w| up(w)),
            second_name: (given.len() > 1).then(|| given[1..].iter().map(|w| up(w)).collect::<Vec<_>>().join(" ")),
            occupation: None,
        }));
    }

    f.target_address.street_name = plain(&h.chunk(Slot::StreetName).words);
    let number = &h.chunk(Slot::StreetNumber).words;
    f.target_address.street_n = french_number(number.iter().map(|w| w.surface.as_str()));
    f.target_address.locality.city = upper(&h.chunk(Slot::Locality).words);

    let status = if f.has_target_name() && f.has_locality() { "ok" } else { "missing-information" };
    f.request.request_status = Some(status.to_owned());
    f
}

/// Key used to look a display string up among knowledge-base atoms:
/// lower case, accents stripped, spaces as underscores.
pub fn kb_key(s: &str) -> String {
    s.nfd()
        .filter(|c| !unicode_normalization::char::is_combining_mark(*c))
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

fn query_theory(f: &FullQueryFrame) -> Theory {
    let mut q = Theory::new("query");
    let mut fact = |name: &str, value: &str| {
        q.push(theory::Clause::fact(Term::compound(name, vec![Term::atom(value)])));
    };
    if let Some(t) = &f.target_identification {
        fact("identification", t.kind());
    }
    if let Some(p) = &f.request.phone_type {
        fact("phone_type", p);
    }
    if let Some(lt) = &f.target_address.loc_type {
        fact("loc_type", lt);
    }
    if let Some(city) = &f.target_address.locality.city {
        fact("locality", &kb_key(city));
    }
    q
}

fn leaf_union(names: &[&str], env: &Env) -> Option<TheoryExpr> {
    names
        .iter()
        .filter(|n| env.contains_key(**n))
        .map(|n| TheoryExpr::leaf(n))
        .reduce(TheoryExpr::union)
}

fn first_value(e: &TheoryExpr, pred: &str, env: &Env) -> Result<Option<String>, TheoryError> {
    let goal = Term::compound(pred, vec![Term::var(0)]);
    let values = theory::demo_values(e, &goal, env, theory::DEFAULT_BUDGET)?;
    Ok(values.first().map(|v| match v.as_atom() {
        Some(a) => a.to_string(),
        None => v.to_string(),
    }))
}

/// Fills empty defaulted slots. A value derivable from the frame, `rules`
/// and `kb` is preferred; `query_defaults` supplies the rest.
pub fn complete_query(f: &FullQueryFrame, env: &Env) -> Result<FullQueryFrame, TheoryError> {
    let mut f = f.clone();
    for slot in ["locality", "identification", "phone_type", "loc_type"] {
        let filled = match slot {
            "locality" => f.has_locality(),
            "identification" => f.target_identification.is_some(),
            "phone_type" => f.request.phone_type.is_some(),
            _ => f.target_address.loc_type.is_some(),
        };
        if filled {
            continue;
        }
        let mut env = env.clone();
        env.insert("query".into(), query_theory(&f));
        let derived = leaf_union(&["query", "rules", "kb"], &env).expect("query is bound");
        let mut value = first_value(&derived, slot, &env)?;
        if value.is_none() && env.contains_key("query_defaults") {
            let defaulted = TheoryExpr::leaf("query").isa(TheoryExpr::leaf("query_defaults"));
            let full = match leaf_union(&["rules", "kb"], &env) {
                Some(rest) => defaulted.union(rest),
                None => defaulted,
            };
            value = first_value(&full, slot, &env)?;
        }
        let Some(v) = value else { continue };
        match slot {
            "locality" => {
                f.target_address.locality.city = Some(v.to_uppercase());
                let goal = Term::compound("prefix", vec![Term::var(0), Term::atom(&v)]);
                if let Some(kb) = leaf_union(&["kb"], &env) {
                    let prefixes = theory::demo_values(&kb, &goal, &env, theory::DEFAULT_BUDGET)?;
                    f.target_address.locality.telephone_prefix =
                        prefixes.first().and_then(Term::as_atom).map(|a| a.to_string());
                }
            }
            "identification" => {
                f.target_identification = Some(if v == "company" {
                    TargetIdentification::Company(Company::default())
                } else {
                    TargetIdentification::Person(Person::default())
                });
            }
            "phone_type" => f.request.phone_type = Some(v),
            _ => f.target_address.loc_type = Some(v),
        }
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MandatorySlot {
    TargetName,
    Locality,
    StreetName,
    StreetNumber,
}

impl MandatorySlot {
    pub const DEFAULT: [MandatorySlot; 2] = [MandatorySlot::TargetName, MandatorySlot::Locality];

    pub fn as_str(self) -> &'static str {
        match self {
            MandatorySlot::TargetName => "target_name",
            MandatorySlot::Locality => "locality",
            MandatorySlot::StreetName => "street_name",
            MandatorySlot::StreetNumber => "street_number",
        }
    }

    fn filled(self, f: &FullQueryFrame) -> bool {
        match self {
            MandatorySlot::TargetName => f.has_target_name(),
            MandatorySlot::Locality => f.has_locality(),
            MandatorySlot::StreetName => f.target_address.street_name.is_some(),
            MandatorySlot::StreetNumber => f.target_address.street_n.is_some(),
        }
    }
}

impl FromStr for MandatorySlot {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, FrameError> {
        [MandatorySlot::TargetName, MandatorySlot::Locality, MandatorySlot::StreetName, MandatorySlot::StreetNumber]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| FrameError::UnknownSlot(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Correct,
    Incomplete,
    Incoherent,
}

impl QueryKind {
    pub fn request_status(self) -> &'static str {
        match self {
            QueryKind::Correct => "ok",
            QueryKind::Incomplete => "missing-information",
            QueryKind::Incoherent => "ill-formed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QueryClass {
    pub class: QueryKind,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

fn kb_values(kb: &Theory, goal: Term) -> Vec<Term> {
    // ground lookups over facts stay far below the budget
    theory::solve(kb, &goal, theory::DEFAULT_BUDGET)
        .unwrap_or_default()
        .iter()
        .map(|s| crate::term::apply(s, &goal))
        .collect()
}

/// Incoherent when a filled slot contradicts `kb`, otherwise incomplete when
/// a mandatory slot is empty, otherwise correct.
pub fn classify_query(f: &FullQueryFrame, kb: &Theory, mandatory: &[MandatorySlot]) -> QueryClass {
    let mut violations = Vec::new();
    if let Some(city) = &f.target_address.locality.city {
        let key = kb_key(city);
        let types: Vec<String> = kb_values(kb, Term::compound("gis", vec![Term::atom(&key), Term::var(0)]))
            .iter()
            .filter_map(|t| t.args().get(1).and_then(Term::as_atom).map(|a| a.to_string()))
            .collect();
        let prefixed = !kb_values(kb, Term::compound("prefix", vec![Term::var(0), Term::atom(&key)])).is_empty();
        if types.is_empty() && !prefixed {
            violations.push(format!("locality {city} is not in the knowledge base"));
        } else if let Some(lt) = &f.target_address.loc_type {
            if !types.is_empty() && !types.contains(lt) {
                violations.push(format!("{city} is a {} but the frame says {lt}", types.join("/")));
            }
        }
    }
    let missing: Vec<String> =
        mandatory.iter().filter(|m| !m.filled(f)).map(|m| m.as_str().to_owned()).collect();
    let class = if !violations.is_empty() {
        QueryKind::Incoherent
    } else if !missing.is_empty() {
        QueryKind::Incomplete
    } else {
        QueryKind::Correct
    };
    QueryClass { class, missing, violations }
}
