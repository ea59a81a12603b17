//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable input, 3 budget exhausted.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser as ClapParser, Subcommand, ValueEnum};
use serde::Serialize;

use lhip::engine::{tokens, AnalysisReport, EngineConfig, Parser, Stats};
use lhip::frame::{classify_query, complete_query, FullQueryFrame, MandatorySlot, QueryClass};
use lhip::grammar::{parse_grammar, pred_name, validate, Diagnostic, Grammar, PredKey};
use lhip::pipeline::{
    corpus_feedback, load_corpus_dir, read_file, tokenize, Pipeline, PolyphoneRecord, RunOptions, Sources,
};
use lhip::term::{parse_rational, Rational, Symbol};
use lhip::thesaurus::Thesaurus;
use lhip::treepath::{encode_tree, group_ranges, lca, parse_path_sentence, parse_tree, path_text, PathSentence};

#[derive(ClapParser)]
#[command(name = "lhip", version, about = "Island parsing and query-frame extraction")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

/// Enumeration order of analyses. Only the strict order is implemented.
#[derive(Clone, Copy, ValueEnum)]
enum SeedOrder {
    Strict,
}

#[derive(Subcommand)]
enum Command {
    /// Parse one utterance with a grammar and list its analyses.
    Parse(ParseArgs),
    /// Least common ancestor and subtree groups of a parsed sentence.
    Groups(GroupsArgs),
    /// Run the extraction pipeline over records or a single utterance.
    Extract(ExtractArgs),
    /// Complete a query frame from the theories and classify it.
    Complete(CompleteArgs),
    /// Per-slot accuracy against gold labels.
    Eval(EvalArgs),
    /// Rule firing counts and uncovered words over a corpus.
    Feedback(FeedbackArgs),
}

#[derive(Args)]
struct EngineArgs {
    /// Coverage threshold, `0.5` or `1/2`.
    #[arg(long, value_parser = threshold_arg)]
    threshold: Option<Rational>,
    #[arg(long)]
    max_analyses: Option<usize>,
    /// Evaluation steps allowed per parse.
    #[arg(long)]
    step_budget: Option<u64>,
    #[arg(long, value_enum, default_value_t = SeedOrder::Strict)]
    seed_order: SeedOrder,
}

#[derive(Args)]
struct ParseArgs {
    /// Grammar file; the discourse grammar when omitted.
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    thesaurus: Option<PathBuf>,
    /// Start symbol as `name/arity`; the declared start symbols otherwise.
    #[arg(long, value_parser = pred_arg)]
    start: Option<PredKey>,
    /// Read the input as a path-annotated sentence.
    #[arg(long)]
    paths: bool,
    #[command(flatten)]
    engine: EngineArgs,
    /// The utterance, or `@FILE` to read it from a file.
    input: String,
}

#[derive(Args)]
struct GroupsArgs {
    /// Read the input as a bracketed tree rather than a path-annotated sentence.
    #[arg(long)]
    tree: bool,
    /// Input file, `-` for stdin.
    input: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    discourse: Option<PathBuf>,
    #[arg(long)]
    thesaurus: Option<PathBuf>,
    /// Directory of `*.theory` files.
    #[arg(long)]
    theories: Option<PathBuf>,
    /// Comma-separated mandatory slots.
    #[arg(long, value_delimiter = ',')]
    mandatory: Option<Vec<MandatorySlot>>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Extract from this utterance instead of record files.
    #[arg(long, conflicts_with = "corpus")]
    text: Option<String>,
    /// Ranked hypotheses kept per record.
    #[arg(long, default_value_t = 5)]
    top: usize,
    /// Record files or directories.
    #[arg(required_unless_present = "text")]
    corpus: Vec<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    theories: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    mandatory: Option<Vec<MandatorySlot>>,
    /// Frame as JSON, `-` for stdin.
    frame: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
}

#[derive(Args)]
struct FeedbackArgs {
    /// Grammar file; the discourse grammar when omitted.
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    thesaurus: Option<PathBuf>,
    #[arg(long, value_parser = pred_arg)]
    start: Option<PredKey>,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(required = true)]
    corpus: Vec<PathBuf>,
}

fn threshold_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s)
        .filter(|t| (Rational::from_integer(0)..=Rational::from_integer(1)).contains(t))
        .ok_or_else(|| format!("`{s}` is not a number between 0 and 1"))
}

fn pred_arg(s: &str) -> Result<PredKey, String> {
    let (name, arity) = s.rsplit_once('/').ok_or_else(|| format!("expected name/arity, got `{s}`"))?;
    let arity = arity.parse().map_err(|_| format!("bad arity in `{s}`"))?;
    Ok((Symbol::intern(name), arity))
}

/// An input failure, reported with exit code 2.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<bool, InputError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Parse(a) => cmd_parse(a, cli.format),
        Command::Groups(a) => cmd_groups(a, cli.format),
        Command::Extract(a) => cmd_extract(a, cli.format),
        Command::Complete(a) => cmd_complete(a, cli.format),
        Command::Eval(a) => cmd_eval(a, cli.format),
        Command::Feedback(a) => cmd_feedback(a, cli.format),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("lhip: evaluation budget exhausted, results are partial");
            ExitCode::from(3)
        }
        Err(InputError(msg)) => {
            eprintln!("lhip: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_input(path: &Path) -> Result<String, InputError> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(read_file(path)?)
    }
}

fn emit<T: Serialize>(value: &T, format: Format, text: impl FnOnce() -> String) -> Result<(), InputError> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
        Format::Text => print!("{}", text()),
    }
    Ok(())
}

fn engine_config(g: &Grammar, a: &EngineArgs) -> EngineConfig {
    let mut cfg = EngineConfig::for_grammar(g);
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    cfg.max_analyses = a.max_analyses;
    if let Some(b) = a.step_budget {
        cfg.step_budget = b;
    }
    cfg
}

fn load_grammar(path: Option<&Path>) -> Result<Grammar, InputError> {
    let src = match path {
        Some(p) => read_input(p)?,
        None => lhip::frame::DISCOURSE_GRAMMAR.to_owned(),
    };
    parse_grammar(&src).map_err(|e| {
        let lines: Vec<String> = e.0.iter().map(ToString::to_string).collect();
        InputError(format!("grammar rejected:\n{}", lines.join("\n")))
    })
}

fn load_thesaurus(path: Option<&Path>) -> Result<Thesaurus, InputError> {
    let src = match path {
        Some(p) => read_input(p)?,
        None => lhip::frame::THESAURUS.to_owned(),
    };
    Ok(Thesaurus::parse(&src)?)
}

#[derive(Serialize)]
struct ParseReport {
    start: Vec<String>,
    tokens: Vec<String>,
    diagnostics: Vec<Diagnostic>,
    stats: Stats,
    analyses: Vec<AnalysisReport>,
}

fn cmd_parse(a: &ParseArgs, format: Format) -> Outcome {
    let g = load_grammar(a.grammar.as_deref())?;
    let th = load_thesaurus(a.thesaurus.as_deref())?;
    let text = match a.input.strip_prefix('@') {
        Some(file) => read_input(Path::new(file))?,
        None => a.input.clone(),
    };
    let toks = if a.paths {
        parse_path_sentence(&text)?.tokens()
    } else {
        tokens(&tokenize(&text).tokens.join(" "))
    };
    let parser = Parser::new(&g).with_lexicon(&th).with_config(engine_config(&g, &a.engine));
    let out = match a.start {
        Some(key) => parser.parse(key, &toks)?,
        None => parser.parse_start(&toks)?,
    };
    let report = ParseReport {
        start: match a.start {
            Some(k) => vec![pred_name(&k)],
            None => g.start.iter().map(pred_name).collect(),
        },
        tokens: toks.iter().map(|t| t.surface.to_string()).collect(),
        diagnostics: validate(&g),
        stats: out.stats().clone(),
        analyses: out.analyses.iter().map(|x| x.report()).collect(),
    };
    emit(&report, format, || {
        let mut s = String::new();
        for d in &report.diagnostics {
            s.push_str(&format!("{d}\n"));
        }
        for (x, full) in report.analyses.iter().zip(&out.analyses) {
            s.push_str(&format!("[{}, {}) {:.3} {}\n", x.span[0], x.span[1], x.ratio, full.covered_text(&toks)));
        }
        s.push_str(&format!("{} analyses, {} steps\n", report.analyses.len(), report.stats.steps));
        s
    })?;
    Ok(report.stats.budget_exhausted)
}

#[derive(Serialize)]
struct GroupOut {
    span: [usize; 2],
    words: Vec<String>,
    lca: String,
}

#[derive(Serialize)]
struct GroupsReport {
    words: Vec<String>,
    lca: String,
    groups: Vec<GroupOut>,
}

fn cmd_groups(a: &GroupsArgs, format: Format) -> Outcome {
    let src = read_input(&a.input)?;
    let sentence: PathSentence = if a.tree { encode_tree(&parse_tree(&src)?)? } else { parse_path_sentence(&src)? };
    let words = &sentence.words;
    let surfaces = |ws: &[lhip::treepath::PathWord]| ws.iter().map(|w| w.surface.to_string()).collect::<Vec<_>>();
    let whole = lca(words).map(|p| path_text(&p)).unwrap_or_else(|_| "[]".into());
    let groups = group_ranges(words)
        .into_iter()
        .map(|(s, e)| GroupOut {
            span: [s, e],
            words: surfaces(&words[s..e]),
            lca: path_text(&lca(&words[s..e]).expect("groups are non-empty")),
        })
        .collect();
    let report = GroupsReport { words: surfaces(words), lca: whole, groups };
    emit(&report, format, || {
        let mut s = format!("lca {}\n", report.lca);
        for g in &report.groups {
            s.push_str(&format!("[{}, {}) {} {}\n", g.span[0], g.span[1], g.words.join(" "), g.lca));
        }
        s
    })?;
    Ok(false)
}

fn build_pipeline(d: &DataArgs, top: usize) -> Result<Pipeline, InputError> {
    let sources = Sources::load(d.discourse.as_deref(), d.thesaurus.as_deref(), d.theories.as_deref())?;
    let opts = RunOptions {
        threshold: d.engine.threshold,
        max_analyses: d.engine.max_analyses,
        step_budget: d.engine.step_budget,
        mandatory: d.mandatory.clone(),
        top_k: Some(top),
    };
    Ok(Pipeline::new(&sources, &opts)?)
}

fn load_records(paths: &[PathBuf]) -> Result<Vec<PolyphoneRecord>, InputError> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(load_corpus_dir(p)?);
    }
    Ok(out)
}

fn cmd_extract(a: &ExtractArgs, format: Format) -> Outcome {
    let p = build_pipeline(&a.data, a.top)?;
    let records = match &a.text {
        Some(t) => vec![PolyphoneRecord { id: "input".into(), text: t.clone(), ..PolyphoneRecord::default() }],
        None => load_records(&a.corpus)?,
    };
    let mut report = p.extract(&records);
    if a.text.is_some() {
        for r in &mut report.records {
            r.gold = None;
            r.matches = None;
            r.warnings.retain(|w| !w.starts_with("adr1"));
        }
        report.metrics = lhip::pipeline::Metrics::from_reports(&report.records);
    }
    emit(&report, format, || {
        let mut s = format!("config {}\n", report.config_hash);
        for r in &report.records {
            let class = r.class.as_ref().map_or("-", |c| c.class.request_status());
            s.push_str(&format!("{} {class}\n", r.id));
            if let Some(h) = r.hypotheses.first() {
                for c in &h.chunks {
                    s.push_str(&format!("  {} = {} ({})\n", c.slot.as_str(), c.words.join(" "), c.confidence));
                }
            }
        }
        s
    })?;
    Ok(report.records.iter().any(|r| r.stats.budget_exhausted))
}

#[derive(Serialize)]
struct CompleteReport {
    frame: FullQueryFrame,
    class: QueryClass,
}

fn cmd_complete(a: &CompleteArgs, format: Format) -> Outcome {
    let frame: FullQueryFrame = serde_json::from_str(&read_input(&a.frame)?)?;
    let sources = Sources::load(None, None, a.theories.as_deref())?;
    let env = lhip::pipeline::load_env(&sources.theories)?;
    let mut frame = match complete_query(&frame, &env) {
        Ok(f) => f,
        Err(lhip::theory::TheoryError::Budget(_)) => return Ok(true),
        Err(e) => return Err(e.into()),
    };
    let kb = env.get("kb").cloned().unwrap_or_else(|| lhip::theory::Theory::new("kb"));
    let mandatory = a.mandatory.clone().unwrap_or_else(|| MandatorySlot::DEFAULT.to_vec());
    let class = classify_query(&frame, &kb, &mandatory);
    frame.request.request_status = Some(class.class.request_status().to_owned());
    let report = CompleteReport { frame, class };
    emit(&report, format, || format!("{}\n", report.class.class.request_status()))?;
    Ok(false)
}

fn cmd_eval(a: &EvalArgs, format: Format) -> Outcome {
    let p = build_pipeline(&a.data, 1)?;
    let records = load_records(&a.corpus)?;
    let report = p.extract(&records);
    #[derive(Serialize)]
    struct EvalReport<'a> {
        config_hash: &'a str,
        metrics: &'a lhip::pipeline::Metrics,
    }
    let out = EvalReport { config_hash: &report.config_hash, metrics: &report.metrics };
    emit(&out, format, || {
        let m = &report.metrics;
        let mut s = format!("{} records\n", m.records);
        for (slot, score) in &m.slots {
            s.push_str(&format!("{slot:<14} {:>3}/{:<3} {:.3}\n", score.correct, score.total, score.accuracy));
        }
        for (class, n) in &m.classes {
            s.push_str(&format!("{class:<14} {n}\n"));
        }
        s
    })?;
    Ok(report.records.iter().any(|r| r.stats.budget_exhausted))
}

fn cmd_feedback(a: &FeedbackArgs, format: Format) -> Outcome {
    let g = load_grammar(a.grammar.as_deref())?;
    let th = load_thesaurus(a.thesaurus.as_deref())?;
    let records = load_records(&a.corpus)?;
    let fb = corpus_feedback(&g, &th, &engine_config(&g, &a.engine), a.start, &records)?;
    emit(&fb, format, || {
        let mut s = format!("coverage {:.3} ({} of {} tokens uncovered)\n", fb.coverage, fb.uncovered_tokens, fb.tokens);
        for (w, n) in fb.uncovered_words.iter().take(20) {
            s.push_str(&format!("  {n:>4} {w}\n"));
        }
        for r in fb.rules.iter().filter(|r| r.successes == 0) {
            s.push_str(&format!("never succeeded: rule {} ({})\n", r.rule, r.pred));
        }
        s
    })?;
    Ok(fb.budget_exhausted)
}
