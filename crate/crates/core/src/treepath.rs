//! Parse trees as path-sentences: every word carries the arcs from its
//! preterminal up to the root, so structural tests reduce to list suffixes.
//!
//! ```
//! use lhip::treepath::{group, lca, parse_path_sentence};
//!
//! let s = parse_path_sentence(
//!     "[terminal(ici,['ADV'(1,1,14),'P'(2,1,12),'P'(2,1,11)]),
//!       terminal(madame,['N'(1,1,19),'SN'(1,1,17),'SN'(2,1,16),'P'(2,2,15),'P'(2,1,11)]),
//!       terminal('Plant',['NPR'(1,1,24),'SNOMPR'(1,1,22),'SN'(1,1,21),'SN'(2,2,20),'P'(2,2,15),'P'(2,1,11)])]",
//! ).unwrap();
//! assert_eq!(lca(&s.words).unwrap().len(), 1);
//! let groups = group(&s.words);
//! assert_eq!(groups[0].len(), 2);
//! ```

use std::fmt;

use serde::Serialize;

use crate::engine::Token;
use crate::syntax::SyntaxError;
use crate::term::{write_atom, Symbol, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArcId {
    pub category: Symbol,
    /// Number of children of the parent node.
    pub node_count: u32,
    /// 1-based position among those children.
    pub node_index: u32,
    pub identifier: u32,
}

impl ArcId {
    pub fn new(category: &str, node_count: u32, node_index: u32, identifier: u32) -> Self {
        ArcId { category: Symbol::intern(category), node_count, node_index, identifier }
    }

    pub fn to_term(&self) -> Term {
        Term::make_compound(
            self.category,
            vec![
                Term::int(self.node_count as i64),
                Term::int(self.node_index as i64),
                Term::int(self.identifier as i64),
            ],
        )
    }

    pub fn from_term(t: &Term) -> Option<Self> {
        let (cat, 3) = t.functor()? else { return None };
        let nums: Vec<u32> = t
            .args()
            .iter()
            .map(|a| {
                let n = a.as_number()?;
                (n.is_integer() && *n.numer() > 0).then(|| *n.numer() as u32)
            })
            .collect::<Option<_>>()?;
        if nums[1] > nums[0] {
            return None;
        }
        Some(ArcId { category: cat, node_count: nums[0], node_index: nums[1], identifier: nums[2] })
    }
}

impl fmt::Display for ArcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

impl Serialize for ArcId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub type Path = Vec<ArcId>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathWord {
    pub surface: Symbol,
    /// Arc above the leaf first, root arc last.
    pub path: Path,
}

impl PathWord {
    pub fn new(surface: &str, path: Path) -> Self {
        PathWord { surface: Symbol::intern(surface), path }
    }

    pub fn path_term(&self) -> Term {
        Term::list(self.path.iter().map(ArcId::to_term).collect())
    }

    pub fn to_term(&self) -> Term {
        Term::compound("terminal", vec![Term::Atom(self.surface), self.path_term()])
    }

    /// The word as an engine token whose payload is its path.
    pub fn token(&self) -> Token {
        Token { surface: self.surface, payload: self.path_term() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PathSentence {
    pub words: Vec<PathWord>,
}

impl PathSentence {
    /// Every word a direct child of a single root node.
    pub fn flat<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let root = ArcId::new("root", 1, 1, 1);
        PathSentence { words: words.into_iter().map(|w| PathWord::new(w, vec![root])).collect() }
    }

    pub fn tokens(&self) -> Vec<Token> {
        self.words.iter().map(PathWord::token).collect()
    }

    pub fn to_term(&self) -> Term {
        Term::list(self.words.iter().map(PathWord::to_term).collect())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl fmt::Display for PathSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_term())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TreeError {
    #[error("empty tree")]
    Empty,
    #[error("empty word list")]
    NoWords,
    #[error("{0}")]
    Syntax(String),
    #[error("word {0} has no arcs or does not share the sentence root")]
    BadPath(String),
}

impl From<SyntaxError> for TreeError {
    fn from(e: SyntaxError) -> Self {
        TreeError::Syntax(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tree {
    Node { label: Symbol, children: Vec<Tree> },
    Leaf(Symbol),
}

impl Tree {
    pub fn node(label: &str, children: Vec<Tree>) -> Self {
        Tree::Node { label: Symbol::intern(label), children }
    }

    pub fn leaf(word: &str) -> Self {
        Tree::Leaf(Symbol::intern(word))
    }
}

/// Parses `(P (ADV ici) (P (SN madame) (SN Plant)))`. Labels and words are
/// whitespace-delimited; a label may be single-quoted.
pub fn parse_tree(src: &str) -> Result<Tree, TreeError> {
    let toks = tree_tokens(src)?;
    let mut pos = 0;
    let tree = tree_at(&toks, &mut pos)?;
    if pos != toks.len() {
        return Err(TreeError::Syntax(format!("trailing input after tree: {}", toks[pos])));
    }
    Ok(tree)
}

fn tree_tokens(src: &str) -> Result<Vec<String>, TreeError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' || c == ')' {
            out.push(c.to_string());
            chars.next();
        } else if c == '\'' {
            chars.next();
            let mut w = String::new();
            loop {
                match chars.next() {
                    Some('\'') => break,
                    Some(ch) => w.push(ch),
                    None => return Err(TreeError::Syntax("unterminated quote".into())),
                }
            }
            out.push(w);
        } else {
            let mut w = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '(' || ch == ')' {
                    break;
                }
                w.push(ch);
                chars.next();
            }
            out.push(w);
        }
    }
    Ok(out)
}

fn tree_at(toks: &[String], pos: &mut usize) -> Result<Tree, TreeError> {
    match toks.get(*pos).map(String::as_str) {
        None => Err(TreeError::Empty),
        Some("(") => {
            *pos += 1;
            let label = match toks.get(*pos).map(String::as_str) {
                Some("(") | Some(")") | None => return Err(TreeError::Syntax("node without label".into())),
                Some(l) => l.to_owned(),
            };
            *pos += 1;
            let mut children = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        break;
                    }
                    None => return Err(TreeError::Syntax("unbalanced parentheses".into())),
                    _ => children.push(tree_at(toks, pos)?),
                }
            }
            Ok(Tree::node(&label, children))
        }
        Some(")") => Err(TreeError::Syntax("unexpected `)`".into())),
        Some(w) => {
            *pos += 1;
            Ok(Tree::leaf(w))
        }
    }
}

/// One path-word per leaf, left to right. Arc identifiers number the nodes in
/// preorder from 1; the root arc is `(1,1,1)`.
pub fn encode_tree(t: &Tree) -> Result<PathSentence, TreeError> {
    let Tree::Node { children, .. } = t else { return Err(TreeError::Empty) };
    if children.is_empty() {
        return Err(TreeError::Empty);
    }
    let mut words = Vec::new();
    let mut next_id = 1;
    let mut above = Vec::new();
    encode_at(t, 1, 1, &mut next_id, &mut above, &mut words)?;
    Ok(PathSentence { words })
}

fn encode_at(
    t: &Tree,
    count: u32,
    index: u32,
    next_id: &mut u32,
    above: &mut Vec<ArcId>,
    out: &mut Vec<PathWord>,
) -> Result<(), TreeError> {
    match t {
        Tree::Leaf(w) => {
            let path: Path = above.iter().rev().copied().collect();
            if path.is_empty() {
                return Err(TreeError::Empty);
            }
            out.push(PathWord { surface: *w, path });
        }
        Tree::Node { label, children } => {
            if children.is_empty() {
                return Err(TreeError::Empty);
            }
            let arc = ArcId { category: *label, node_count: count, node_index: index, identifier: *next_id };
            *next_id += 1;
            above.push(arc);
            let n = children.len() as u32;
            for (i, c) in children.iter().enumerate() {
                encode_at(c, n, i as u32 + 1, next_id, above, out)?;
            }
            above.pop();
        }
    }
    Ok(())
}

/// Parses the `[terminal(word, [arc, ...]), ...]` listing.
pub fn parse_path_sentence(src: &str) -> Result<PathSentence, TreeError> {
    let t = crate::syntax::parse_term(src)?;
    path_sentence_from_term(&t)
}

pub fn path_sentence_from_term(t: &Term) -> Result<PathSentence, TreeError> {
    let items = match t {
        Term::List(items, None) => items,
        _ => return Err(TreeError::Syntax("expected a list of terminal/2 terms".into())),
    };
    let mut words = Vec::new();
    for item in items {
        let bad = || TreeError::Syntax(format!("expected terminal(Word, Path), found {item}"));
        if item.functor() != Some((Symbol::intern("terminal"), 2)) {
            return Err(bad());
        }
        let surface = item.args()[0].as_atom().ok_or_else(bad)?;
        let arcs = match &item.args()[1] {
            Term::List(arcs, None) => arcs,
            _ => return Err(bad()),
        };
        let path: Path = arcs.iter().map(ArcId::from_term).collect::<Option<_>>().ok_or_else(bad)?;
        words.push(PathWord { surface, path });
    }
    let s = PathSentence { words };
    validate_sentence(&s)?;
    Ok(s)
}

fn validate_sentence(s: &PathSentence) -> Result<(), TreeError> {
    let root = s.words.first().and_then(|w| w.path.last().copied());
    for w in &s.words {
        if w.path.is_empty() || w.path.last().copied() != root {
            return Err(TreeError::BadPath(w.surface.to_string()));
        }
    }
    Ok(())
}

/// True when `p` is a tail of `q`: the node `p` leads to is `q`'s node or one
/// of its ancestors.
pub fn is_ancestor_path(p: &[ArcId], q: &[ArcId]) -> bool {
    p.len() <= q.len() && q[q.len() - p.len()..] == *p
}

/// Path of the least common ancestor: the longest common tail of all paths.
pub fn lca(words: &[PathWord]) -> Result<Path, TreeError> {
    let (first, rest) = words.split_first().ok_or(TreeError::NoWords)?;
    let mut common = first.path.len();
    for w in rest {
        let shared = first
            .path
            .iter()
            .rev()
            .zip(w.path.iter().rev())
            .take_while(|(a, b)| a == b)
            .count();
        common = common.min(shared);
    }
    Ok(first.path[first.path.len() - common..].to_vec())
}

/// Contiguous runs of two or more words whose lca lies strictly below the
/// lca of the whole segment, as half-open index ranges. Longest runs come
/// first, then leftmost.
pub fn group_ranges(words: &[PathWord]) -> Vec<(usize, usize)> {
    let Ok(whole) = lca(words) else { return Vec::new() };
    let n = words.len();
    let mut out = Vec::new();
    for len in (2..=n).rev() {
        for start in 0..=n - len {
            let sub = lca(&words[start..start + len]).expect("non-empty");
            if sub.len() > whole.len() && is_ancestor_path(&whole, &sub) {
                out.push((start, start + len));
            }
        }
    }
    out
}

/// The word runs of [`group_ranges`]. An empty segment yields one empty group.
pub fn group(words: &[PathWord]) -> Vec<Vec<PathWord>> {
    if words.is_empty() {
        return vec![Vec::new()];
    }
    group_ranges(words).into_iter().map(|(s, e)| words[s..e].to_vec()).collect()
}

/// `'cat'(n,i,id)` rendering of a path, used in text reports.
pub fn path_text(p: &[ArcId]) -> String {
    let parts: Vec<String> = p
        .iter()
        .map(|a| {
            let mut s = String::new();
            let _ = write_atom(&mut s, a.category.as_str());
            format!("{s}({},{},{})", a.node_count, a.node_index, a.identifier)
        })
        .collect();
    format!("[{}]", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ici() -> PathSentence {
        parse_path_sentence(include_str!("../data/fixtures/ici_madame_plant.paths")).unwrap()
    }

    #[test]
    fn fixture_parses() {
        let s = ici();
        assert_eq!(s.len(), 3);
        assert_eq!(
            s.words[0],
            PathWord::new(
                "ici",
                vec![ArcId::new("ADV", 1, 1, 14), ArcId::new("P", 2, 1, 12), ArcId::new("P", 2, 1, 11)]
            )
        );
        assert_eq!(s.words[2].surface.as_str(), "Plant");
    }

    #[test]
    fn lca_examples() {
        let s = ici();
        assert_eq!(lca(&s.words[1..]).unwrap(), vec![ArcId::new("P", 2, 2, 15), ArcId::new("P", 2, 1, 11)]);
        assert_eq!(lca(&s.words).unwrap(), vec![ArcId::new("P", 2, 1, 11)]);
        assert_eq!(lca(&s.words[..1]).unwrap(), s.words[0].path);
        assert_eq!(lca(&[]), Err(TreeError::NoWords));
    }

    #[test]
    fn ancestor_examples() {
        let p11 = ArcId::new("P", 2, 1, 11);
        let p15 = ArcId::new("P", 2, 2, 15);
        let p12 = ArcId::new("P", 2, 1, 12);
        assert!(is_ancestor_path(&[p11], &[p15, p11]));
        assert!(is_ancestor_path(&[p15, p11], &[p15, p11]));
        assert!(!is_ancestor_path(&[ArcId::new("ADV", 1, 1, 14)], &[p12, p11]));
    }

    #[test]
    fn group_examples() {
        let s = ici();
        let groups = group(&s.words);
        assert_eq!(groups, vec![s.words[1..].to_vec()]);
        assert_eq!(group(&[]), vec![Vec::<PathWord>::new()]);
        let flat = PathSentence::flat(["a", "b", "c"]);
        assert!(group(&flat.words).is_empty());
    }

    #[test]
    fn encode_examples() {
        let single = encode_tree(&Tree::node("root", vec![Tree::leaf("word")])).unwrap();
        assert_eq!(single.words, vec![PathWord::new("word", vec![ArcId::new("root", 1, 1, 1)])]);

        let two = encode_tree(&parse_tree("(S (A x) (B y))").unwrap()).unwrap();
        assert_eq!(two.words[0].path.last(), two.words[1].path.last());
        assert_eq!(two.words[0].path, vec![ArcId::new("A", 2, 1, 2), ArcId::new("S", 1, 1, 1)]);
        assert_eq!(two.words[1].path, vec![ArcId::new("B", 2, 2, 3), ArcId::new("S", 1, 1, 1)]);

        assert_eq!(encode_tree(&Tree::node("S", vec![])), Err(TreeError::Empty));
        assert_eq!(encode_tree(&Tree::leaf("w")), Err(TreeError::Empty));
    }

    #[test]
    fn encoded_shape_matches_fixture() {
        let t = parse_tree("(P (P (ADV ici)) (P (SN (SN (N madame))) (SN (SN (SNOMPR (NPR Plant))))))").unwrap();
        let s = encode_tree(&t).unwrap();
        let shape = |p: &Path| p.iter().map(|a| (a.category, a.node_count, a.node_index)).collect::<Vec<_>>();
        let fixture = ici();
        for (a, b) in s.words.iter().zip(&fixture.words) {
            assert_eq!(a.surface, b.surface);
            assert_eq!(shape(&a.path)[..a.path.len() - 1], shape(&b.path)[..b.path.len() - 1]);
        }
        assert_eq!(group_ranges(&s.words), vec![(1, 3)]);
    }

    #[test]
    fn text_round_trip() {
        let s = ici();
        let again = parse_path_sentence(&s.to_string()).unwrap();
        assert_eq!(s, again);
        assert_eq!(path_text(&s.words[0].path), "['ADV'(1,1,14),'P'(2,1,12),'P'(2,1,11)]");
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(parse_tree("(S (A x)").is_err());
        assert!(parse_tree("").is_err());
        assert!(parse_path_sentence("[terminal(a,[])]").is_err());
        assert!(parse_path_sentence("[terminal(a,[r(1,1,1)]), terminal(b,[q(1,1,2)])]").is_err());
        assert!(parse_path_sentence("[foo(a)]").is_err());
    }
}
