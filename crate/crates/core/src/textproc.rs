//! Tokenization, rule-based sentence splitting and a rule + exception
//! lemmatizer. All functions are deterministic.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");
const DEFAULT_LEMMA_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    /// Index in the token stream of the enclosing article.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub tokens: Vec<Token>,
    pub index: usize,
}

/// Abbreviation list and lemma exception table.
#[derive(Debug, Clone)]
pub struct TextConfig {
    abbreviations: HashSet<String>,
    lemma_exceptions: HashMap<String, String>,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self::from_strs(DEFAULT_ABBREVIATIONS, DEFAULT_LEMMA_EXCEPTIONS).expect("embedded text config parses")
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

impl TextConfig {
    pub fn from_strs(abbreviations: &str, lemma_exceptions: &str) -> std::result::Result<Self, (usize, String)> {
        let abbreviations = content_lines(abbreviations).map(|(_, l)| l.to_string()).collect();
        let mut table = HashMap::new();
        for (lineno, l) in content_lines(lemma_exceptions) {
            let mut parts = l.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(form), Some(lemma), None) => {
                    table.insert(form.to_lowercase(), lemma.to_lowercase());
                }
                _ => return Err((lineno, format!("expected `form lemma`, got `{l}`"))),
            }
        }
        Ok(Self {
            abbreviations,
            lemma_exceptions: table,
        })
    }

    /// Loads overrides from disk; a `None` path keeps the shipped default.
    pub fn load(abbreviations: Option<&Path>, lemma_exceptions: Option<&Path>) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let abbr = match abbreviations {
            Some(p) => read(p)?,
            None => DEFAULT_ABBREVIATIONS.to_string(),
        };
        let (lem, lem_path) = match lemma_exceptions {
            Some(p) => (read(p)?, p.to_path_buf()),
            None => (DEFAULT_LEMMA_EXCEPTIONS.to_string(), "<embedded>".into()),
        };
        Self::from_strs(&abbr, &lem).map_err(|(line, message)| Error::Parse {
            path: lem_path,
            line,
            message,
        })
    }

    pub fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(word)
    }

    pub fn abbreviation_count(&self) -> usize {
        self.abbreviations.len()
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_apostrophe(c)
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Byte spans of tokens: maximal runs of letters, digits and apostrophes,
/// with leading and trailing apostrophes trimmed.
fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let push = |s: usize, e: usize, spans: &mut Vec<(usize, usize)>| {
        let word = &text[s..e];
        let trimmed_start = word.len() - word.trim_start_matches(is_apostrophe).len();
        let trimmed = word.trim_matches(is_apostrophe);
        if !trimmed.is_empty() {
            spans.push((s + trimmed_start, s + trimmed_start + trimmed.len()));
        }
    };
    for (i, c) in text.char_indices() {
        match (is_word_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                push(s, i, &mut spans);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        push(s, text.len(), &mut spans);
    }
    spans
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_from(text, 0)
}

fn tokenize_from(text: &str, first_position: usize) -> Vec<Token> {
    token_spans(text)
        .into_iter()
        .enumerate()
        .map(|(i, (s, e))| {
            let surface = &text[s..e];
            Token {
                surface: surface.to_string(),
                lower: surface.to_lowercase(),
                position: first_position + i,
            }
        })
        .collect()
}

const TERMINATORS: [char; 3] = ['.', '!', '?'];
const CLOSERS: [char; 7] = ['"', '\'', '\u{201D}', '\u{2019}', ')', ']', '.'];
const OPENERS: [char; 5] = ['"', '\'', '\u{201C}', '\u{2018}', '('];

/// Splits on `.`, `!` or `?` followed by whitespace and a capital letter or
/// digit, unless the word ending in `.` is a configured abbreviation.
pub fn split_sentences(text: &str, config: &TextConfig) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
    let mut pieces: Vec<&str> = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !TERMINATORS.contains(&c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (TERMINATORS.contains(&chars[j].1) || CLOSERS.contains(&chars[j].1)) {
            j += 1;
        }
        if j >= chars.len() || !chars[j].1.is_whitespace() {
            i = j.max(i + 1);
            continue;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let mut probe = k;
        while probe < chars.len() && OPENERS.contains(&chars[probe].1) {
            probe += 1;
        }
        let starts_new = chars
            .get(probe)
            .is_some_and(|&(_, n)| n.is_uppercase() || n.is_ascii_digit());
        if starts_new && !(c == '.' && ends_with_abbreviation(&text[start..byte_at(i + 1)], config)) {
            pieces.push(&text[start..byte_at(j)]);
            start = byte_at(k);
            i = k;
        } else {
            i = j;
        }
    }
    pieces.push(&text[start..]);

    let mut position = 0;
    pieces
        .into_iter()
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(index, p)| {
            let tokens = tokenize_from(p, position);
            position += tokens.len();
            Sentence {
                text: p.to_string(),
                tokens,
                index,
            }
        })
        .collect()
}

fn ends_with_abbreviation(segment: &str, config: &TextConfig) -> bool {
    let word = segment.split_whitespace().last().unwrap_or("");
    let word = word.trim_start_matches(|c| OPENERS.contains(&c));
    config.is_abbreviation(word)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| is_vowel(b) || b == b'y')
}

/// Undoes consonant doubling and restores a silent `e` after stripping
/// `-ing` or `-ed`.
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if n == 3 && !is_vowel(b[0]) && is_vowel(b[1]) && !is_vowel(b[2]) && !matches!(b[2], b'w' | b'x' | b'y') {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn suffix_rule(w: &str) -> Option<String> {
    if !w.bytes().all(|b| b.is_ascii_lowercase()) || w.len() <= 3 {
        return None;
    }
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.len() >= 2 {
            return Some(format!("{stem}y"));
        }
        return None;
    }
    for suf in ["sses", "xes", "ches", "shes", "zzes"] {
        if w.ends_with(suf) {
            return Some(w[..w.len() - 2].to_string());
        }
    }
    if w.ends_with('s') && !["ss", "us", "is", "ous"].iter().any(|s| w.ends_with(s)) {
        return Some(w[..w.len() - 1].to_string());
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if stem.len() >= 3 && has_vowel(stem) {
            return Some(repair_stem(stem));
        }
        return None;
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if stem.len() >= 3 && has_vowel(stem) && !stem.ends_with('e') {
            return Some(repair_stem(stem));
        }
    }
    None
}

/// Possessive and contraction endings are dropped before lookup.
fn strip_clitic(mut w: &str) -> &str {
    'outer: loop {
        for suf in ["'s", "\u{2019}s"] {
            if let Some(stem) = w.strip_suffix(suf) {
                if !stem.is_empty() {
                    w = stem;
                    continue 'outer;
                }
            }
        }
        return w;
    }
}

/// Lemma of a single word. Iterates exception lookup and suffix rules to a
/// fixed point, which makes the function idempotent.
pub fn lemmatize_word(word: &str, config: &TextConfig) -> String {
    let mut current = strip_clitic(&word.to_lowercase()).to_string();
    let mut seen = HashSet::new();
    loop {
        let next = match config.lemma_exceptions.get(&current) {
            Some(l) => l.clone(),
            None => match suffix_rule(&current) {
                Some(l) => l,
                None => return current,
            },
        };
        if next == current || !seen.insert(current.clone()) {
            return current;
        }
        current = next;
    }
}

pub fn lemmatize(token: &Token, config: &TextConfig) -> String {
    lemmatize_word(&token.lower, config)
}
