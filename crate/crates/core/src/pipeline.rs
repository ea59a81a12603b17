//! Corpus records, the end-to-end extraction pipeline and its evaluation.
//!
//! A record is a block of `key:value` lines:
//!
//! ```text
//! id:cd1/b00/f0000o06:sid17733
//! prompt:1
//! adr1:MOTTAZ MONIQUE
//! adr2:rue du PRINTEMPS 4
//! adr3:SAIGNELEGIER
//! text[123]: Bonjour j'aimerais un numéro de téléphone ...
//! sample:0.200000:10.820000:88160:42801
//! ```
//!
//! Blank lines separate records in a corpus file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::engine::{grammar_feedback, EngineConfig, Parser, RuleFeedback, Stats};
use crate::frame::{
    assemble_frames_traced, classify_query, complete_query, structural_filter, to_full_frame, Discourse,
    FullQueryFrame, HypothesisReport, MandatorySlot, QueryClass, QueryKind, DISCOURSE_GRAMMAR, THESAURUS,
};
use crate::grammar::{parse_grammar, Grammar, GrammarError, PredKey};
use crate::term::Rational;
use crate::theory::{env_from, parse_theories, Env, Theory, TheoryError};
use crate::thesaurus::{Thesaurus, ThesaurusError};
use crate::treepath::{encode_tree, parse_tree, PathSentence};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PolyphoneRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<i64>,
    pub adr1: String,
    pub adr2: String,
    pub adr3: String,
    pub text: String,
    /// Character count declared in `text[N]:`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub declared_len: Option<usize>,
    pub sample: String,
    /// Unrecognised keys, in input order.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RecordError {
    #[error("record has no id line")]
    MissingId,
    #[error("record {0} has no text line")]
    MissingText(String),
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
}

impl PolyphoneRecord {
    /// Warnings that do not prevent processing.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(n) = self.declared_len {
            let actual = self.text.nfc().count();
            if n != actual {
                w.push(format!("declared text length {n} but the utterance has {actual} characters"));
            }
        }
        if self.adr1.is_empty() {
            w.push("adr1 is empty, gold name unavailable".into());
        }
        w
    }

    pub fn serialize(&self) -> String {
        let mut s = format!("id:{}\n", self.id);
        if let Some(p) = self.prompt {
            s.push_str(&format!("prompt:{p}\n"));
        }
        s.push_str(&format!("adr1:{}\nadr2:{}\nadr3:{}\n", self.adr1, self.adr2, self.adr3));
        match self.declared_len {
            Some(n) => s.push_str(&format!("text[{n}]: {}\n", self.text)),
            None => s.push_str(&format!("text: {}\n", self.text)),
        }
        if !self.sample.is_empty() {
            s.push_str(&format!("sample:{}\n", self.sample));
        }
        for (k, v) in &self.extras {
            s.push_str(&format!("{k}:{v}\n"));
        }
        s
    }
}

pub fn parse_record(block: &str) -> Result<PolyphoneRecord, RecordError> {
    parse_record_at(block, 1)
}

fn parse_record_at(block: &str, first_line: usize) -> Result<PolyphoneRecord, RecordError> {
    let mut r = PolyphoneRecord::default();
    let (mut has_id, mut has_text) = (false, false);
    for (i, line) in block.lines().enumerate() {
        let line_no = first_line + i;
        let line = line.trim_end();
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(RecordError::BadLine { line: line_no, message: format!("expected key:value, got `{line}`") });
        };
        let key = key.trim();
        let value = value.trim();
        if let Some(n) = key.strip_prefix("text[").and_then(|k| k.strip_suffix(']')) {
            let n = n.parse().map_err(|_| RecordError::BadLine {
                line: line_no,
                message: format!("bad text length `{n}`"),
            })?;
            r.declared_len = Some(n);
            r.text = value.to_owned();
            has_text = true;
            continue;
        }
        match key {
            "id" => {
                r.id = value.to_owned();
                has_id = true;
            }
            "prompt" => {
                r.prompt = Some(value.parse().map_err(|_| RecordError::BadLine {
                    line: line_no,
                    message: format!("prompt `{value}` is not an integer"),
                })?)
            }
            "adr1" => r.adr1 = value.to_owned(),
            "adr2" => r.adr2 = value.to_owned(),
            "adr3" => r.adr3 = value.to_owned(),
            "text" => {
                r.text = value.to_owned();
                has_text = true;
            }
            "sample" => r.sample = value.to_owned(),
            _ => r.extras.push((key.to_owned(), value.to_owned())),
        }
    }
    if !has_id {
        return Err(RecordError::MissingId);
    }
    if !has_text {
        return Err(RecordError::MissingText(r.id));
    }
    Ok(r)
}

/// Splits a corpus file on blank lines.
pub fn parse_corpus(src: &str) -> Result<Vec<PolyphoneRecord>, RecordError> {
    let mut out = Vec::new();
    let mut block = String::new();
    let mut start = 1;
    for (i, line) in src.lines().chain(std::iter::once("")).enumerate() {
        if line.trim().is_empty() {
            if !block.trim().is_empty() {
                out.push(parse_record_at(&block, start)?);
            }
            block.clear();
            start = i + 2;
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoldLabels {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    pub town: String,
}

impl GoldLabels {
    /// The address split into street name and a leading-digit house number.
    pub fn street(&self) -> Option<(String, Option<u32>)> {
        let addr = self.address.as_deref()?;
        let mut words: Vec<&str> = addr.split_whitespace().collect();
        let number = match words.last() {
            Some(w) if w.starts_with(|c: char| c.is_ascii_digit()) => {
                let digits: String = w.chars().take_while(char::is_ascii_digit).collect();
                words.pop();
                digits.parse().ok()
            }
            _ => None,
        };
        Some((words.join(" "), number))
    }
}

/// `adr2` is the address when `adr3` is present, the town otherwise.
pub fn gold_labels(r: &PolyphoneRecord) -> GoldLabels {
    if r.adr3.trim().is_empty() {
        GoldLabels { name: r.adr1.clone(), address: None, town: r.adr2.clone() }
    } else {
        GoldLabels { name: r.adr1.clone(), address: Some(r.adr2.clone()), town: r.adr3.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    /// `<...>` annotation markers that were dropped.
    pub skipped: Vec<String>,
}

const ELISIONS: [&str; 12] = ["l", "d", "j", "m", "t", "s", "c", "n", "qu", "jusqu", "lorsqu", "puisqu"];

/// Whitespace tokens with punctuation split off and elided articles
/// (`j'`, `l'`, ...) separated. Case and accents are kept.
pub fn tokenize(utterance: &str) -> TokenSequence {
    let mut out = TokenSequence::default();
    let text: String = utterance.nfc().map(|c| if c == '’' { '\'' } else { c }).collect();
    let mut rest = text.as_str();
    while let Some(ch) = rest.chars().next() {
        if ch.is_whitespace() {
            rest = &rest[ch.len_utf8()..];
            continue;
        }
        if ch == '<' {
            if let Some(end) = rest.find('>') {
                out.skipped.push(rest[..=end].to_owned());
                rest = &rest[end + 1..];
                continue;
            }
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..end];
        rest = &rest[end..];
        split_word(word, &mut out.tokens);
    }
    out
}

fn split_word(word: &str, out: &mut Vec<String>) {
    let is_punct = |c: char| matches!(c, ',' | '.' | '?' | '!' | ';' | ':' | '"' | '(' | ')' | '«' | '»');
    let mut core = word;
    let mut lead = Vec::new();
    while let Some(c) = core.chars().next().filter(|c| is_punct(*c)) {
        lead.push(c.to_string());
        core = &core[c.len_utf8()..];
    }
    let mut trail = Vec::new();
    while let Some(c) = core.chars().last().filter(|c| is_punct(*c)) {
        // keep abbreviation dots such as `m.`
        if c == '.' && core.chars().count() <= 3 && core.chars().filter(|c| c.is_alphabetic()).count() <= 2 && core.len() > 1 {
            break;
        }
        trail.push(c.to_string());
        core = &core[..core.len() - c.len_utf8()];
    }
    out.extend(lead);
    while let Some(at) = core.find('\'') {
        let prefix = &core[..at];
        if at + 1 < core.len() && ELISIONS.contains(&prefix.to_lowercase().as_str()) {
            out.push(core[..=at].to_owned());
            core = &core[at + 1..];
        } else {
            break;
        }
    }
    if !core.is_empty() {
        out.push(core.to_owned());
    }
    out.extend(trail.into_iter().rev());
}

/// Lower case with accents removed, whitespace collapsed. Matching only.
pub fn match_key(s: &str) -> String {
    s.nfd()
        .filter(|c| !unicode_normalization::char::is_combining_mark(*c))
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InputDigest {
    pub name: String,
    pub sha256: String,
}

/// The texts a pipeline is built from.
#[derive(Clone, Debug)]
pub struct Sources {
    pub discourse: (String, String),
    pub thesaurus: (String, String),
    pub theories: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}: {1}")]
    Grammar(String, GrammarError),
    #[error("{0}: {1}")]
    Thesaurus(String, ThesaurusError),
    #[error("{0}: {1}")]
    Theory(String, TheoryError),
}

pub fn read_file(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_owned(), source })
}

impl Sources {
    pub fn builtin() -> Self {
        Sources {
            discourse: ("discourse.lhip".into(), DISCOURSE_GRAMMAR.into()),
            thesaurus: ("thesaurus.txt".into(), THESAURUS.into()),
            theories: vec![
                ("kb.theory".into(), include_str!("../data/theories/kb.theory").into()),
                ("query_defaults.theory".into(), include_str!("../data/theories/query_defaults.theory").into()),
                ("rules.theory".into(), include_str!("../data/theories/rules.theory").into()),
            ],
        }
    }

    /// Built-in texts, each replaced by a file when one is given. A theory
    /// directory contributes every `*.theory` file in name order.
    pub fn load(discourse: Option<&Path>, thesaurus: Option<&Path>, theories: Option<&Path>) -> Result<Self, PipelineError> {
        let mut s = Sources::builtin();
        let named = |p: &Path| -> Result<(String, String), PipelineError> { Ok((p.display().to_string(), read_file(p)?)) };
        if let Some(p) = discourse {
            s.discourse = named(p)?;
        }
        if let Some(p) = thesaurus {
            s.thesaurus = named(p)?;
        }
        if let Some(dir) = theories {
            s.theories = theory_files(dir)?
                .iter()
                .map(|p| named(p))
                .collect::<Result<_, _>>()?;
        }
        Ok(s)
    }

    pub fn digests(&self) -> Vec<InputDigest> {
        std::iter::once(&self.discourse)
            .chain(std::iter::once(&self.thesaurus))
            .chain(&self.theories)
            .map(|(name, text)| InputDigest { name: name.clone(), sha256: hex::encode(Sha256::digest(text.as_bytes())) })
            .collect()
    }
}

pub fn theory_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|source| PipelineError::Io { path: dir.to_owned(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "theory"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_env(theories: &[(String, String)]) -> Result<Env, PipelineError> {
    let mut all: Vec<Theory> = Vec::new();
    for (name, text) in theories {
        all.extend(parse_theories(text).map_err(|e| PipelineError::Theory(name.clone(), e))?);
    }
    Ok(env_from(all))
}

/// Engine settings a pipeline run may override.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub threshold: Option<Rational>,
    pub max_analyses: Option<usize>,
    pub step_budget: Option<u64>,
    pub mandatory: Option<Vec<MandatorySlot>>,
    /// How many ranked hypotheses each record report keeps.
    pub top_k: Option<usize>,
}

pub struct Pipeline {
    pub discourse: Discourse,
    pub env: Env,
    pub mandatory: Vec<MandatorySlot>,
    pub top_k: usize,
    pub inputs: Vec<InputDigest>,
    config_hash: String,
}

impl Pipeline {
    pub fn builtin() -> Self {
        Pipeline::new(&Sources::builtin(), &RunOptions::default()).expect("shipped data loads")
    }

    pub fn new(sources: &Sources, opts: &RunOptions) -> Result<Self, PipelineError> {
        let grammar = parse_grammar(&sources.discourse.1).map_err(|e| PipelineError::Grammar(sources.discourse.0.clone(), e))?;
        let thesaurus =
            Thesaurus::parse(&sources.thesaurus.1).map_err(|e| PipelineError::Thesaurus(sources.thesaurus.0.clone(), e))?;
        let env = load_env(&sources.theories)?;
        let mut discourse = Discourse::new(grammar, thesaurus);
        if let Some(t) = opts.threshold {
            discourse.config.threshold = t;
        }
        if opts.max_analyses.is_some() {
            discourse.config.max_analyses = opts.max_analyses;
        }
        if let Some(b) = opts.step_budget {
            discourse.config.step_budget = b;
        }
        let mandatory = opts.mandatory.clone().unwrap_or_else(|| MandatorySlot::DEFAULT.to_vec());
        let top_k = opts.top_k.unwrap_or(5);
        let inputs = sources.digests();

        let mut h = Sha256::new();
        for d in &inputs {
            h.update(d.sha256.as_bytes());
        }
        let c = &discourse.config;
        h.update(format!("{:?}|{:?}|{}|{mandatory:?}|{top_k}", c.threshold, c.max_analyses, c.step_budget));
        let config_hash = hex::encode(h.finalize());
        Ok(Pipeline { discourse, env, mandatory, top_k, inputs, config_hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn kb(&self) -> Theory {
        self.env.get("kb").cloned().unwrap_or_else(|| Theory::new("kb"))
    }

    pub fn run_utterance(&self, id: &str, text: &str) -> RecordReport {
        let record = PolyphoneRecord { id: id.to_owned(), text: text.to_owned(), ..PolyphoneRecord::default() };
        let mut report = self.run(&record);
        report.gold = None;
        report.matches = None;
        report.warnings.retain(|w| !w.starts_with("adr1"));
        report
    }

    /// tokenize, attach paths, assemble and filter frames, map the best one
    /// onto the schema, complete it from the theories and classify it.
    pub fn run(&self, r: &PolyphoneRecord) -> RecordReport {
        let toks = tokenize(&r.text);
        let mut report = RecordReport {
            id: r.id.clone(),
            tokens: toks.tokens.clone(),
            skipped_markers: toks.skipped.clone(),
            warnings: r.warnings(),
            gold: Some(gold_labels(r)),
            ..RecordReport::default()
        };
        let sentence = match r.extras.iter().find(|(k, _)| k == "tree") {
            Some((_, tree)) => match parse_tree(tree).and_then(|t| encode_tree(&t)) {
                Ok(s) if s.words.iter().map(|w| w.surface.as_str()).eq(toks.tokens.iter().map(String::as_str)) => s,
                Ok(_) => {
                    report.warnings.push("tree leaves differ from the tokens, using flat paths".into());
                    PathSentence::flat(toks.tokens.iter().map(String::as_str))
                }
                Err(e) => {
                    report.warnings.push(format!("unreadable tree ({e}), using flat paths"));
                    PathSentence::flat(toks.tokens.iter().map(String::as_str))
                }
            },
            None => PathSentence::flat(toks.tokens.iter().map(String::as_str)),
        };

        let (hyps, stats) = match assemble_frames_traced(&self.discourse, &sentence) {
            Ok(x) => x,
            Err(e) => {
                report.error = Some(format!("frame assembly: {e}"));
                (Vec::new(), Stats::default())
            }
        };
        report.stats = RunStats {
            hypotheses: hyps.len(),
            steps: stats.steps,
            truncated: stats.truncated,
            budget_exhausted: stats.budget_exhausted,
        };
        let hyps = structural_filter(hyps, &sentence);
        report.hypotheses = hyps.iter().take(self.top_k).map(|h| h.report()).collect();

        let frame = hyps.first().map(|h| to_full_frame(h, &self.discourse.thesaurus)).unwrap_or_else(|| {
            let mut f = FullQueryFrame::default();
            f.request.request_status = Some("missing-information".into());
            f
        });
        let frame = match complete_query(&frame, &self.env) {
            Ok(f) => f,
            Err(e) => {
                if matches!(e, TheoryError::Budget(_)) {
                    report.stats.budget_exhausted = true;
                }
                report.error.get_or_insert(format!("completion: {e}"));
                frame
            }
        };
        let class = classify_query(&frame, &self.kb(), &self.mandatory);
        let mut frame = frame;
        frame.request.request_status = Some(class.class.request_status().to_owned());
        report.matches = report.gold.as_ref().map(|g| SlotMatches::compare(&frame, g));
        report.frame = Some(frame);
        report.class = Some(class);
        report
    }

    pub fn extract(&self, records: &[PolyphoneRecord]) -> PipelineReport {
        let records: Vec<RecordReport> = records.iter().map(|r| self.run(r)).collect();
        let metrics = Metrics::from_reports(&records);
        PipelineReport { config_hash: self.config_hash.clone(), inputs: self.inputs.clone(), records, metrics }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub hypotheses: usize,
    pub steps: u64,
    pub truncated: bool,
    pub budget_exhausted: bool,
}

/// Per-slot agreement with the gold labels; `None` when gold has no value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SlotMatches {
    pub name: Option<bool>,
    pub town: Option<bool>,
    pub street_name: Option<bool>,
    pub street_number: Option<bool>,
}

impl SlotMatches {
    pub fn compare(f: &FullQueryFrame, g: &GoldLabels) -> Self {
        let words = |s: &str| {
            let mut w: Vec<String> = match_key(s).split(' ').filter(|x| !x.is_empty()).map(str::to_owned).collect();
            w.sort();
            w
        };
        let found_name = match &f.target_identification {
            Some(crate::frame::TargetIdentification::Person(p)) => [&p.family_name, &p.first_name, &p.second_name]
                .iter()
                .filter_map(|x| x.as_deref())
                .collect::<Vec<_>>()
                .join(" "),
            Some(crate::frame::TargetIdentification::Company(c)) => c.name.clone().unwrap_or_default(),
            None => String::new(),
        };
        let present = |s: &str| !s.trim().is_empty();
        let name = present(&g.name).then(|| words(&found_name) == words(&g.name));
        let town = present(&g.town).then(|| {
            f.target_address.locality.city.as_deref().is_some_and(|c| match_key(c) == match_key(&g.town))
        });
        let (street_name, street_number) = match g.street() {
            Some((street, number)) => (
                present(&street).then(|| {
                    f.target_address.street_name.as_deref().is_some_and(|s| match_key(s) == match_key(&street))
                }),
                number.map(|n| f.target_address.street_n == Some(n)),
            ),
            None => (None, None),
        };
        SlotMatches { name, town, street_name, street_number }
    }

    fn slots(&self) -> [(&'static str, Option<bool>); 4] {
        [
            ("name", self.name),
            ("town", self.town),
            ("street_name", self.street_name),
            ("street_number", self.street_number),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RecordReport {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped_markers: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub stats: RunStats,
    pub hypotheses: Vec<HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<FullQueryFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<QueryClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldLabels>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<SlotMatches>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SlotScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub records: usize,
    pub slots: BTreeMap<String, SlotScore>,
    pub classes: BTreeMap<String, usize>,
    /// Records whose best hypothesis fills no slot at all.
    pub empty_hypotheses: usize,
    pub errors: usize,
    /// Mean share of tokens covered by the best hypothesis.
    pub coverage: f64,
}

impl Metrics {
    pub fn from_reports(reports: &[RecordReport]) -> Self {
        let mut m = Metrics { records: reports.len(), ..Metrics::default() };
        for slot in ["name", "town", "street_name", "street_number"] {
            m.slots.insert(slot.to_owned(), SlotScore::default());
        }
        let mut coverage = 0.0;
        for r in reports {
            if let Some(matches) = &r.matches {
                for (slot, hit) in matches.slots() {
                    if let Some(hit) = hit {
                        let s = m.slots.get_mut(slot).expect("slot registered");
                        s.total += 1;
                        s.correct += usize::from(hit);
                    }
                }
            }
            if let Some(c) = &r.class {
                let name = match c.class {
                    QueryKind::Correct => "correct",
                    QueryKind::Incomplete => "incomplete",
                    QueryKind::Incoherent => "incoherent",
                };
                *m.classes.entry(name.to_owned()).or_default() += 1;
            }
            match r.hypotheses.first() {
                Some(h) if !h.chunks.is_empty() => {
                    if !r.tokens.is_empty() {
                        coverage += h.covered as f64 / r.tokens.len() as f64;
                    }
                }
                _ => m.empty_hypotheses += 1,
            }
            m.errors += usize::from(r.error.is_some());
        }
        for s in m.slots.values_mut() {
            s.accuracy = if s.total == 0 { 0.0 } else { s.correct as f64 / s.total as f64 };
        }
        if !reports.is_empty() {
            m.coverage = coverage / reports.len() as f64;
        }
        m
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub inputs: Vec<InputDigest>,
    pub records: Vec<RecordReport>,
    pub metrics: Metrics,
}

pub fn evaluate(records: &[PolyphoneRecord], p: &Pipeline) -> Metrics {
    p.extract(records).metrics
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusFeedback {
    pub records: usize,
    pub tokens: usize,
    pub uncovered_tokens: usize,
    pub coverage: f64,
    pub rules: Vec<RuleFeedback>,
    /// Uncovered words by descending count, then alphabetically.
    pub uncovered_words: Vec<(String, usize)>,
    pub budget_exhausted: bool,
}

/// Rule success and failure counts and token coverage summed over a corpus.
pub fn corpus_feedback(
    g: &Grammar,
    lexicon: &Thesaurus,
    cfg: &EngineConfig,
    start: Option<PredKey>,
    records: &[PolyphoneRecord],
) -> Result<CorpusFeedback, crate::engine::EngineError> {
    let parser = Parser::new(g).with_lexicon(lexicon).with_config(cfg.clone());
    let mut out = CorpusFeedback { records: records.len(), ..CorpusFeedback::default() };
    let mut words: BTreeMap<String, usize> = BTreeMap::new();
    let mut rules: BTreeMap<usize, RuleFeedback> = BTreeMap::new();
    for r in records {
        let toks = tokenize(&r.text);
        let sentence = PathSentence::flat(toks.tokens.iter().map(String::as_str));
        let tokens = sentence.tokens();
        let outcome = match start {
            Some(p) => parser.parse(p, &tokens)?,
            None => parser.parse_start(&tokens)?,
        };
        out.budget_exhausted |= outcome.stats().budget_exhausted;
        let fb = grammar_feedback(g, &outcome.chart, tokens.len());
        out.tokens += fb.tokens;
        out.uncovered_tokens += fb.uncovered.len();
        for i in &fb.uncovered {
            *words.entry(toks.tokens[*i].clone()).or_default() += 1;
        }
        for rf in fb.rules {
            let e = rules.entry(rf.rule).or_insert_with(|| RuleFeedback { successes: 0, failures: 0, ..rf.clone() });
            e.successes += rf.successes;
            e.failures += rf.failures;
        }
    }
    out.coverage = if out.tokens == 0 { 0.0 } else { 1.0 - out.uncovered_tokens as f64 / out.tokens as f64 };
    out.rules = rules.into_values().collect();
    let mut ranked: Vec<(String, usize)> = words.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.uncovered_words = ranked;
    Ok(out)
}

/// Every record of every corpus file under `dir` (recursively), files in path order.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<PolyphoneRecord>, CorpusError> {
    let mut files = Vec::new();
    collect_files(dir, &mut files).map_err(|source| CorpusError::Io { path: dir.to_owned(), source })?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_corpus_file(&f)?);
    }
    Ok(out)
}

pub fn load_corpus_file(path: &Path) -> Result<Vec<PolyphoneRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    parse_corpus(&text).map_err(|source| CorpusError::Record { path: path.to_owned(), source })
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    if dir.is_file() {
        out.push(dir.to_owned());
        return Ok(());
    }
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else if p.extension().is_some_and(|x| x == "txt" || x == "rec") {
            out.push(p);
        }
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Record { path: PathBuf, source: RecordError },
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}
