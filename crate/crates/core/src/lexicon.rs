//! Population-group schemes and the word, phrase and name rules that tie
//! tokens to groups.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textproc::{tokenize, Sentence, Token};

pub const DEMO_OCCUPATIONS: &str = include_str!("../data/occupations.txt");
pub const DEMO_NAMES: &str = include_str!("../data/names.csv");

const FEMALE_WORDS: [&str; 20] = [
    "she",
    "daughter",
    "hers",
    "her",
    "mother",
    "woman",
    "girl",
    "herself",
    "female",
    "sister",
    "daughters",
    "mothers",
    "women",
    "girls",
    "females",
    "sisters",
    "aunt",
    "aunts",
    "niece",
    "nieces",
];
const MALE_WORDS: [&str; 20] = [
    "he", "son", "his", "him", "father", "man", "boy", "himself", "male", "brother", "sons", "fathers", "men", "boys",
    "males", "brothers", "uncle", "uncles", "nephew", "nephews",
];

/// A bias dimension and its ordered population groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Gender,
    Race,
}

impl Scheme {
    pub fn groups(self) -> &'static [&'static str] {
        match self {
            Scheme::Gender => &["female", "male"],
            Scheme::Race => &["White", "Black", "Asian"],
        }
    }

    /// Number of population groups, excluding neutral.
    pub fn m(self) -> usize {
        self.groups().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Gender => "gender",
            Scheme::Race => "race",
        }
    }

    /// Case-insensitive label lookup.
    pub fn group_index(self, label: &str) -> Option<usize> {
        self.groups().iter().position(|g| g.eq_ignore_ascii_case(label.trim()))
    }

    pub fn label(self, group: usize) -> &'static str {
        self.groups()[group]
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gender" => Ok(Scheme::Gender),
            "race" => Ok(Scheme::Race),
            other => Err(format!("unknown scheme `{other}` (expected gender or race)")),
        }
    }
}

/// Group assigned to a sentence; ties and zero counts are neutral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SentenceGroup {
    Group(usize),
    Neutral,
}

impl SentenceGroup {
    /// Column in a contingency table with `m` groups plus neutral.
    pub fn column(self, m: usize) -> usize {
        match self {
            SentenceGroup::Group(g) => g,
            SentenceGroup::Neutral => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupCounts {
    pub scheme: Scheme,
    pub counts: Vec<u64>,
}

impl GroupCounts {
    pub fn zero(scheme: Scheme) -> Self {
        Self {
            scheme,
            counts: vec![0; scheme.m()],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, group: usize) -> u64 {
        self.counts[group]
    }
}

/// Lexicon file locations. Gender needs none; race needs both files.
#[derive(Debug, Clone, Default)]
pub struct LexiconPaths {
    pub gender_words: Option<PathBuf>,
    pub occupations: Option<PathBuf>,
    pub names: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct GroupLexicon {
    scheme: Scheme,
    word_lists: Vec<HashSet<String>>,
    descriptors: Vec<String>,
    occupations: HashSet<Vec<String>>,
    max_occupation_len: usize,
    names: HashMap<Vec<String>, usize>,
    max_name_len: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl GroupLexicon {
    /// The 20 + 20 gender word table.
    pub fn gender_default() -> Self {
        let word_lists = vec![
            FEMALE_WORDS.iter().map(|w| w.to_string()).collect(),
            MALE_WORDS.iter().map(|w| w.to_string()).collect(),
        ];
        Self::gender_from_lists(word_lists)
    }

    fn gender_from_lists(word_lists: Vec<HashSet<String>>) -> Self {
        Self {
            scheme: Scheme::Gender,
            word_lists,
            descriptors: Vec::new(),
            occupations: HashSet::new(),
            max_occupation_len: 0,
            names: HashMap::new(),
            max_name_len: 0,
        }
    }

    /// Gender lexicon from a JSON object mapping group label to word list.
    pub fn gender_from_json(json: &str) -> std::result::Result<Self, String> {
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(json).map_err(|e| e.to_string())?;
        let mut lists = vec![HashSet::new(); Scheme::Gender.m()];
        for (label, words) in map {
            let g = Scheme::Gender
                .group_index(&label)
                .ok_or_else(|| format!("unknown gender group `{label}`"))?;
            lists[g] = words.into_iter().map(|w| w.trim().to_lowercase()).collect();
        }
        Ok(Self::gender_from_lists(lists))
    }

    /// Race lexicon from an occupation list (one phrase per line) and a
    /// `name,group` CSV. Errors carry 1-based line numbers.
    pub fn race_from_strs(occupations: &str, names: &str) -> std::result::Result<Self, (usize, String)> {
        Ok(Self::race_from_parts(
            parse_occupations(occupations)?,
            parse_names(names)?,
        ))
    }

    fn race_from_parts(occupations: HashSet<Vec<String>>, names: HashMap<Vec<String>, usize>) -> Self {
        Self {
            scheme: Scheme::Race,
            word_lists: vec![HashSet::new(); Scheme::Race.m()],
            descriptors: Scheme::Race.groups().iter().map(|g| g.to_lowercase()).collect(),
            max_occupation_len: occupations.iter().map(Vec::len).max().unwrap_or(0),
            occupations,
            max_name_len: names.keys().map(Vec::len).max().unwrap_or(0),
            names,
        }
    }

    /// Race lexicon built from the shipped demonstration files.
    pub fn race_demo() -> Self {
        Self::race_from_strs(DEMO_OCCUPATIONS, DEMO_NAMES).expect("embedded race lexicon parses")
    }

    pub fn load(scheme: Scheme, paths: &LexiconPaths) -> Result<Self> {
        match scheme {
            Scheme::Gender => match &paths.gender_words {
                None => Ok(Self::gender_default()),
                Some(p) => Self::gender_from_json(&read(p)?).map_err(|message| Error::Parse {
                    path: p.clone(),
                    line: 1,
                    message,
                }),
            },
            Scheme::Race => {
                let occ_path = paths
                    .occupations
                    .as_ref()
                    .ok_or(Error::MissingLexiconFile("occupations"))?;
                let name_path = paths.names.as_ref().ok_or(Error::MissingLexiconFile("name table"))?;
                let at = |path: &PathBuf| {
                    let path = path.clone();
                    move |(line, message): (usize, String)| Error::Parse { path, line, message }
                };
                let occ = parse_occupations(&read(occ_path)?).map_err(at(occ_path))?;
                let names = parse_names(&read(name_path)?).map_err(at(name_path))?;
                Ok(Self::race_from_parts(occ, names))
            }
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn words(&self, group: usize) -> &HashSet<String> {
        &self.word_lists[group]
    }

    pub fn has_occupation(&self, phrase: &[&str]) -> bool {
        let key: Vec<String> = phrase.iter().map(|s| s.to_string()).collect();
        self.occupations.contains(&key)
    }

    pub fn name_group(&self, name: &[&str]) -> Option<usize> {
        let key: Vec<String> = name.iter().map(|s| s.to_string()).collect();
        self.names.get(&key).copied()
    }

    /// SHA-256 over a canonical rendering of the lexicon contents.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.scheme.name());
        for list in &self.word_lists {
            let mut words: Vec<&String> = list.iter().collect();
            words.sort();
            h.update(format!(
                "|{}",
                words.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
            ));
        }
        let mut occ: Vec<String> = self.occupations.iter().map(|p| p.join(" ")).collect();
        occ.sort();
        h.update(format!("|{}", occ.join(",")));
        let mut names: Vec<String> = self.names.iter().map(|(k, g)| format!("{}={g}", k.join(" "))).collect();
        names.sort();
        h.update(format!("|{}", names.join(",")));
        hex::encode(h.finalize())
    }

    fn longest_name(&self, tokens: &[Token], start: usize) -> Option<(usize, usize)> {
        let max = self.max_name_len.min(tokens.len() - start);
        (1..=max).rev().find_map(|len| {
            let key: Vec<String> = tokens[start..start + len].iter().map(|t| t.surface.clone()).collect();
            self.names.get(&key).map(|&g| (len, g))
        })
    }

    fn longest_occupation(&self, tokens: &[Token], start: usize) -> Option<usize> {
        let max = self.max_occupation_len.min(tokens.len().saturating_sub(start));
        (1..=max).rev().find(|&len| {
            let key: Vec<String> = tokens[start..start + len].iter().map(|t| t.lower.clone()).collect();
            self.occupations.contains(&key)
        })
    }
}

type LineError = (usize, String);

fn parse_occupations(text: &str) -> std::result::Result<HashSet<Vec<String>>, LineError> {
    let mut occ = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let phrase: Vec<String> = tokenize(line).into_iter().map(|t| t.lower).collect();
        if phrase.is_empty() {
            return Err((i + 1, format!("occupation `{line}` has no tokens")));
        }
        occ.insert(phrase);
    }
    Ok(occ)
}

/// Names keep their surface casing; matching is case-sensitive.
fn parse_names(text: &str) -> std::result::Result<HashMap<Vec<String>, usize>, LineError> {
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.eq_ignore_ascii_case("name,group")) {
            continue;
        }
        let (name, label) = line
            .rsplit_once(',')
            .ok_or_else(|| (i + 1, format!("expected `name,group`, got `{line}`")))?;
        let group = Scheme::Race
            .group_index(label)
            .ok_or_else(|| (i + 1, format!("unknown race group `{}`", label.trim())))?;
        let key: Vec<String> = tokenize(name).into_iter().map(|t| t.surface).collect();
        if key.is_empty() {
            return Err((i + 1, "empty name".into()));
        }
        table.insert(key, group);
    }
    Ok(table)
}

/// Counts group-related words in a token stream.
///
/// Gender: a token counts for a group when its lowercase form is in that
/// group's word list. Race: a name from the table (longest case-sensitive
/// match) counts once for its group; a descriptor counts when the tokens
/// right after it begin an occupation phrase. Matched spans are consumed.
pub fn count_group_words(tokens: &[Token], lex: &GroupLexicon) -> GroupCounts {
    let mut out = GroupCounts::zero(lex.scheme);
    match lex.scheme {
        Scheme::Gender => {
            for t in tokens {
                for (g, list) in lex.word_lists.iter().enumerate() {
                    if list.contains(&t.lower) {
                        out.counts[g] += 1;
                    }
                }
            }
        }
        Scheme::Race => {
            let mut i = 0;
            while i < tokens.len() {
                if let Some((len, g)) = lex.longest_name(tokens, i) {
                    out.counts[g] += 1;
                    i += len;
                    continue;
                }
                if let Some(g) = lex.descriptors.iter().position(|d| *d == tokens[i].lower) {
                    if let Some(len) = lex.longest_occupation(tokens, i + 1) {
                        out.counts[g] += 1;
                        i += 1 + len;
                        continue;
                    }
                }
                i += 1;
            }
        }
    }
    out
}

/// Argmax group of a count vector; all-zero or tied maxima give neutral.
pub fn argmax_group(counts: &GroupCounts) -> SentenceGroup {
    let max = counts.counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return SentenceGroup::Neutral;
    }
    let mut winners = counts.counts.iter().enumerate().filter(|(_, &c)| c == max);
    let (g, _) = winners.next().unwrap();
    if winners.next().is_some() {
        SentenceGroup::Neutral
    } else {
        SentenceGroup::Group(g)
    }
}

pub fn assign_sentence_group(sentence: &Sentence, lex: &GroupLexicon) -> SentenceGroup {
    argmax_group(&count_group_words(&sentence.tokens, lex))
}
