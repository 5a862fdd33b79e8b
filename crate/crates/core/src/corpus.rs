//! Article collections: JSONL loading, headline-keyed pairing, summary stats.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Reference,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Unbiased,
    Biased,
    None,
}

impl PromptKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::Unbiased => "unbiased",
            PromptKind::Biased => "biased",
            PromptKind::None => "none",
        }
    }
}

/// One news document, either human-written or machine-generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    /// Headline key shared by a reference article and its generated mates.
    pub id: String,
    pub source: String,
    pub headline: String,
    pub body: String,
    pub origin: Origin,
    pub generator: Option<String>,
    pub prompt_kind: PromptKind,
}

impl Article {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.origin == Origin::Reference && self.prompt_kind != PromptKind::None {
            return Err(format!(
                "reference article {} has prompt_kind {}",
                self.id,
                self.prompt_kind.as_str()
            ));
        }
        if self.origin == Origin::Reference && self.body.trim().is_empty() {
            return Err(format!("reference article {} has an empty body", self.id));
        }
        Ok(())
    }

    pub fn word_count(&self) -> usize {
        self.body.split_whitespace().count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArticlePair {
    pub reference: Article,
    pub generated: Article,
}

impl ArticlePair {
    pub fn id(&self) -> &str {
        &self.reference.id
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing {
    pub pairs: Vec<ArticlePair>,
    /// Generated ids with no reference mate, in generated order.
    pub orphans: Vec<String>,
    /// Reference ids with no generated mate, in reference order.
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub article_count: usize,
    pub mean_word_count: f64,
}

/// Loads a JSONL article file and checks every line against `origin`.
pub fn load_articles(path: &Path, origin: Origin) -> Result<Vec<Article>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut articles = Vec::new();
    let mut seen: HashMap<String, Vec<usize>> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message,
        };
        let article: Article = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        article.validate().map_err(parse_err)?;
        if article.origin != origin {
            return Err(parse_err(format!(
                "expected origin {:?}, found {:?}",
                origin, article.origin
            )));
        }
        seen.entry(article.id.clone()).or_default().push(lineno);
        articles.push(article);
    }
    let mut duplicates: Vec<(String, Vec<usize>)> = seen.into_iter().filter(|(_, lines)| lines.len() > 1).collect();
    if !duplicates.is_empty() {
        duplicates.sort_by_key(|(_, lines)| lines[0]);
        return Err(Error::DuplicateId {
            path: path.to_path_buf(),
            duplicates,
        });
    }
    Ok(articles)
}

pub fn write_articles(path: &Path, articles: &[Article]) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for a in articles {
        let line = serde_json::to_string(a)?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Matches generated articles to references by id. Pair order follows the
/// reference list.
pub fn pair_articles(reference: &[Article], generated: &[Article]) -> Pairing {
    let mut by_id: HashMap<&str, &Article> = HashMap::with_capacity(generated.len());
    for g in generated {
        by_id.entry(g.id.as_str()).or_insert(g);
    }
    let ref_ids: HashSet<&str> = reference.iter().map(|r| r.id.as_str()).collect();
    let mut out = Pairing::default();
    for r in reference {
        match by_id.get(r.id.as_str()) {
            Some(g) => out.pairs.push(ArticlePair {
                reference: r.clone(),
                generated: (*g).clone(),
            }),
            None => out.unmatched.push(r.id.clone()),
        }
    }
    out.orphans = generated
        .iter()
        .filter(|g| !ref_ids.contains(g.id.as_str()))
        .map(|g| g.id.clone())
        .collect();
    out
}

pub fn corpus_stats(articles: &[Article]) -> Result<CorpusStats> {
    if articles.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let words: usize = articles.iter().map(Article::word_count).sum();
    Ok(CorpusStats {
        article_count: articles.len(),
        mean_word_count: words as f64 / articles.len() as f64,
    })
}

/// Splits generated articles by the prompt that produced them.
pub fn split_by_prompt(articles: Vec<Article>) -> BTreeMap<PromptKind, Vec<Article>> {
    let mut out: BTreeMap<PromptKind, Vec<Article>> = BTreeMap::new();
    for a in articles {
        out.entry(a.prompt_kind).or_default().push(a);
    }
    out
}
