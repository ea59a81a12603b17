//! Word categories used by `thesaurus/2` lookups.
//!
//! The file format is a list of sections:
//!
//! ```text
//! # comment
//! [street]
//! rue avenue chemin
//! route
//! [closed_class]
//! @street
//! le la de
//! ```
//!
//! `@name` inside a section pulls in every word of section `name`.

use std::collections::{BTreeMap, BTreeSet};

use unicode_normalization::UnicodeNormalization;

use crate::term::Symbol;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ThesaurusError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("section {0} includes itself")]
    Cycle(String),
    #[error("section {from} includes unknown section {missing}")]
    UnknownSection { from: String, missing: String },
}

/// Lowercased, NFC-normalised form used to compare words. Accents are kept.
pub fn fold_case(word: &str) -> String {
    word.nfc().collect::<String>().to_lowercase()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Thesaurus {
    categories: BTreeMap<String, Vec<Symbol>>,
    folded: BTreeMap<String, BTreeSet<String>>,
}

impl Thesaurus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(src: &str) -> Result<Self, ThesaurusError> {
        let mut raw: Vec<(String, Vec<String>)> = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let line = match line.find('#') {
                Some(at) => &line[..at],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ThesaurusError::Syntax {
                    line: i + 1,
                    message: "unterminated section header".into(),
                })?;
                let name = fold_case(name.trim());
                if name.is_empty() {
                    return Err(ThesaurusError::Syntax { line: i + 1, message: "empty section name".into() });
                }
                raw.push((name, Vec::new()));
                continue;
            }
            let Some((_, words)) = raw.last_mut() else {
                return Err(ThesaurusError::Syntax {
                    line: i + 1,
                    message: "words before the first section".into(),
                });
            };
            words.extend(line.split_whitespace().map(str::to_owned));
        }

        let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (name, words) in raw {
            sections.entry(name).or_default().extend(words);
        }
        let mut th = Thesaurus::new();
        for name in sections.keys() {
            let mut words = Vec::new();
            let mut stack = Vec::new();
            expand(name, &sections, &mut stack, &mut words)?;
            th.insert(name, words.iter().map(String::as_str));
        }
        Ok(th)
    }

    /// Adds words to a category, keeping first-seen order and dropping case duplicates.
    pub fn insert<'a>(&mut self, category: &str, words: impl IntoIterator<Item = &'a str>) {
        let key = fold_case(category);
        let folded = self.folded.entry(key.clone()).or_default();
        let list = self.categories.entry(key).or_default();
        for w in words {
            if folded.insert(fold_case(w)) {
                list.push(Symbol::intern(w));
            }
        }
    }

    pub fn category(&self, name: &str) -> Option<&[Symbol]> {
        self.categories.get(&fold_case(name)).map(Vec::as_slice)
    }

    pub fn contains(&self, category: &str, word: &str) -> bool {
        self.folded
            .get(&fold_case(category))
            .is_some_and(|set| set.contains(&fold_case(word)))
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }
}

fn expand(
    name: &str,
    sections: &BTreeMap<String, Vec<String>>,
    stack: &mut Vec<String>,
    out: &mut Vec<String>,
) -> Result<(), ThesaurusError> {
    if stack.iter().any(|s| s == name) {
        return Err(ThesaurusError::Cycle(name.to_owned()));
    }
    stack.push(name.to_owned());
    for w in &sections[name] {
        if let Some(inc) = w.strip_prefix('@') {
            let inc = fold_case(inc);
            if !sections.contains_key(&inc) {
                return Err(ThesaurusError::UnknownSection { from: name.to_owned(), missing: inc });
            }
            expand(&inc, sections, stack, out)?;
        } else {
            out.push(w.clone());
        }
    }
    stack.pop();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_includes_and_case() {
        let th = Thesaurus::parse("[street]\nrue avenue\nChemin\n[closed]\n@street de # prep\n").unwrap();
        assert!(th.contains("street", "RUE"));
        assert!(th.contains("Street", "chemin"));
        assert!(th.contains("closed", "avenue"));
        assert!(th.contains("closed", "de"));
        assert!(!th.contains("street", "de"));
        assert_eq!(th.category("street").unwrap().len(), 3);
    }

    #[test]
    fn accents_are_not_folded() {
        let th = Thesaurus::parse("[w]\nnuméro\n").unwrap();
        assert!(th.contains("w", "NUMÉRO"));
        assert!(!th.contains("w", "numero"));
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(matches!(Thesaurus::parse("rue\n"), Err(ThesaurusError::Syntax { line: 1, .. })));
        assert!(matches!(Thesaurus::parse("[a]\n@a\n"), Err(ThesaurusError::Cycle(_))));
        assert!(matches!(Thesaurus::parse("[a]\n@b\n"), Err(ThesaurusError::UnknownSection { .. })));
    }
}
