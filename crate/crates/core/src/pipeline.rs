//! Runs the three audit levels over a set of article pairs.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, ArticlePair};
use crate::doc_bias::{
    associate_topics, build_contingency, chi_squared_test, corpus_doc_bias, doc_prejudice_stats, pair_doc_bias,
    standardized_residuals, ChiSquared, ContingencyMatrix, DocPairResult, TopicAssociation, SR_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::lexicon::{assign_sentence_group, GroupLexicon, Scheme, SentenceGroup};
use crate::prejudice::{CorpusBiasSummary, Direction, PrejudiceStats};
use crate::sentence_bias::{
    checked_score, corpus_sentence_bias, sentence_prejudice_stats, GroupScoreProfile, SentencePairResult,
    SentenceScorer,
};
use crate::textproc::{lemmatize, split_sentences, Sentence, TextConfig};
use crate::topics::TopicModel;
use crate::word_bias::{
    corpus_word_bias, group_share_difference, pair_word_bias, prejudice_stats_word, ShareDifference, WordBiasPairResult,
};

/// Shared text resources for an audit.
pub struct TextResources {
    pub text: TextConfig,
    pub lexicon: GroupLexicon,
    pub stopwords: HashSet<String>,
}

impl TextResources {
    pub fn scheme(&self) -> Scheme {
        self.lexicon.scheme()
    }

    /// Lowercase alphabetic lemmas minus stopwords, as fed to the topic model.
    pub fn topic_lemmas(&self, sentence: &Sentence) -> Vec<String> {
        sentence
            .tokens
            .iter()
            .filter(|t| t.lower.chars().count() > 1 && t.lower.chars().all(char::is_alphabetic))
            .filter(|t| !self.stopwords.contains(&t.lower))
            .map(|t| lemmatize(t, &self.text))
            .filter(|l| !self.stopwords.contains(l))
            .collect()
    }

    pub fn article_lemmas(&self, article: &Article) -> Vec<String> {
        split_sentences(&article.body, &self.text)
            .iter()
            .flat_map(|s| self.topic_lemmas(s))
            .collect()
    }
}

/// Splits off pairs whose generated article is empty (declined
/// generations); returns the remaining pairs and the number removed.
pub fn drop_refused(pairs: Vec<ArticlePair>) -> (Vec<ArticlePair>, usize) {
    let before = pairs.len();
    let kept: Vec<ArticlePair> = pairs
        .into_iter()
        .filter(|p| !p.generated.body.trim().is_empty())
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

/// One lemma sequence per article, for LDA training.
pub fn training_docs(articles: &[Article], res: &TextResources) -> Vec<Vec<String>> {
    articles.par_iter().map(|a| res.article_lemmas(a)).collect()
}

/// Runs `f` for every group of the scheme, keeping groups with eligible pairs.
fn per_group(scheme: Scheme, f: impl Fn(usize) -> Result<PrejudiceStats>) -> BTreeMap<String, PrejudiceStats> {
    (0..scheme.m())
        .filter_map(|g| f(g).ok().map(|s| (scheme.label(g).to_string(), s)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct WordLevel {
    pub results: Vec<WordBiasPairResult>,
    pub summary: CorpusBiasSummary,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
    pub share_diffs: Vec<ShareDifference>,
}

pub fn audit_word(pairs: &[ArticlePair], lex: &GroupLexicon) -> Result<WordLevel> {
    let results: Vec<WordBiasPairResult> = pairs.par_iter().map(|p| pair_word_bias(p, lex)).collect();
    let summary = corpus_word_bias(&results)?;
    let scheme = lex.scheme();
    let prejudice = per_group(scheme, |g| prejudice_stats_word(&results, g));
    let share_diffs = (0..scheme.m())
        .map(|g| group_share_difference(&results, g))
        .collect::<Result<_>>()?;
    Ok(WordLevel {
        results,
        summary,
        prejudice,
        share_diffs,
    })
}

#[derive(Debug, Clone)]
pub struct ScoredMetric {
    pub results: Vec<SentencePairResult>,
    pub summary: CorpusBiasSummary,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
}

#[derive(Debug, Clone)]
pub struct SentenceLevel {
    pub sentiment: ScoredMetric,
    pub toxicity: ScoredMetric,
}

fn article_profiles(
    article: &Article,
    res: &TextResources,
    sentiment: &dyn SentenceScorer,
    toxicity: &dyn SentenceScorer,
) -> Result<(GroupScoreProfile, GroupScoreProfile)> {
    let scheme = res.scheme();
    let mut sent = Vec::new();
    let mut tox = Vec::new();
    for s in split_sentences(&article.body, &res.text) {
        let g = assign_sentence_group(&s, &res.lexicon);
        if g != SentenceGroup::Neutral {
            sent.push((g, checked_score(sentiment, &s)?));
            tox.push((g, checked_score(toxicity, &s)?));
        }
    }
    Ok((
        GroupScoreProfile::from_scored(scheme, sent),
        GroupScoreProfile::from_scored(scheme, tox),
    ))
}

pub fn audit_sentence(
    pairs: &[ArticlePair],
    res: &TextResources,
    sentiment: &dyn SentenceScorer,
    toxicity: &dyn SentenceScorer,
) -> Result<SentenceLevel> {
    let profiles = pairs
        .par_iter()
        .map(|p| {
            let h = article_profiles(&p.generated, res, sentiment, toxicity)?;
            let o = article_profiles(&p.reference, res, sentiment, toxicity)?;
            Ok((
                SentencePairResult::new(p.id(), h.0, o.0),
                SentencePairResult::new(p.id(), h.1, o.1),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sent, tox): (Vec<_>, Vec<_>) = profiles.into_iter().unzip();
    let scheme = res.scheme();
    let metric = |results: Vec<SentencePairResult>, name: &str, dir: Direction| -> Result<ScoredMetric> {
        let summary = corpus_sentence_bias(&results, name)?;
        let prejudice = per_group(scheme, |g| sentence_prejudice_stats(&results, scheme, g, dir, name));
        Ok(ScoredMetric {
            results,
            summary,
            prejudice,
        })
    };
    Ok(SentenceLevel {
        sentiment: metric(sent, "sentiment", Direction::Lower)?,
        toxicity: metric(tox, "toxicity", Direction::Higher)?,
    })
}

/// Per-corpus sentence labelling against a trained topic model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusTopics {
    pub contingency: ContingencyMatrix,
    pub chi_squared: Option<ChiSquared>,
    pub association: TopicAssociation,
    /// Sentences with no in-vocabulary lemma, left out of the table.
    pub skipped_sentences: usize,
}

/// `(group, topic)` labels of every sentence with at least one known lemma,
/// plus the count of skipped sentences.
pub fn sentence_labels(
    articles: &[&Article],
    model: &TopicModel,
    res: &TextResources,
) -> (Vec<(SentenceGroup, usize)>, usize) {
    let per_article: Vec<(Vec<(SentenceGroup, usize)>, usize)> = articles
        .par_iter()
        .map(|a| {
            let mut labels = Vec::new();
            let mut skipped = 0;
            for s in split_sentences(&a.body, &res.text) {
                let (topic, empty) = model.assign_sentence_topic(&res.topic_lemmas(&s));
                if empty {
                    skipped += 1;
                } else {
                    labels.push((assign_sentence_group(&s, &res.lexicon), topic));
                }
            }
            (labels, skipped)
        })
        .collect();
    let skipped = per_article.iter().map(|p| p.1).sum();
    (per_article.into_iter().flat_map(|p| p.0).collect(), skipped)
}

pub fn corpus_topics(
    labels: &[(SentenceGroup, usize)],
    skipped: usize,
    model: &TopicModel,
    scheme: Scheme,
) -> Result<CorpusTopics> {
    let contingency = build_contingency(labels, model.k(), scheme)?;
    let chi_squared = chi_squared_test(&contingency).ok();
    let association = associate_topics(&standardized_residuals(&contingency), scheme, SR_THRESHOLD);
    Ok(CorpusTopics {
        contingency,
        chi_squared,
        association,
        skipped_sentences: skipped,
    })
}

#[derive(Debug, Clone)]
pub struct DocumentLevel {
    pub generated: CorpusTopics,
    pub reference: CorpusTopics,
    /// Both sides used the association of the pooled sentence table.
    pub shared_association: Option<CorpusTopics>,
    pub results: Vec<DocPairResult>,
    pub summary: CorpusBiasSummary,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
}

impl DocumentLevel {
    pub fn association_generated(&self) -> &TopicAssociation {
        &self.shared_association.as_ref().unwrap_or(&self.generated).association
    }

    pub fn association_reference(&self) -> &TopicAssociation {
        &self.shared_association.as_ref().unwrap_or(&self.reference).association
    }
}

pub fn audit_document(
    pairs: &[ArticlePair],
    model: &TopicModel,
    res: &TextResources,
    shared_association: bool,
) -> Result<DocumentLevel> {
    let scheme = res.scheme();
    let gen_articles: Vec<&Article> = pairs.iter().map(|p| &p.generated).collect();
    let ref_articles: Vec<&Article> = pairs.iter().map(|p| &p.reference).collect();
    let (gen_labels, gen_skipped) = sentence_labels(&gen_articles, model, res);
    let (ref_labels, ref_skipped) = sentence_labels(&ref_articles, model, res);
    let generated = corpus_topics(&gen_labels, gen_skipped, model, scheme)?;
    let reference = corpus_topics(&ref_labels, ref_skipped, model, scheme)?;
    let shared = if shared_association {
        let pooled: Vec<_> = gen_labels.iter().chain(&ref_labels).copied().collect();
        Some(corpus_topics(&pooled, gen_skipped + ref_skipped, model, scheme)?)
    } else {
        None
    };
    let mut level = DocumentLevel {
        generated,
        reference,
        shared_association: shared,
        results: Vec::new(),
        summary: CorpusBiasSummary {
            metric: String::new(),
            mean: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            n: 0,
        },
        prejudice: BTreeMap::new(),
    };
    let results = pairs
        .par_iter()
        .map(|p| {
            let th = model.infer_doc_topics(&res.article_lemmas(&p.generated));
            let to = model.infer_doc_topics(&res.article_lemmas(&p.reference));
            pair_doc_bias(
                p.id(),
                &th.t,
                &to.t,
                level.association_generated(),
                level.association_reference(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    level.summary = corpus_doc_bias(&results).map_err(|e| match e {
        Error::NoUsablePairs(_) => {
            let sizes = |a: &TopicAssociation| {
                a.group_sets()
                    .iter()
                    .map(|s| s.len().to_string())
                    .collect::<Vec<_>>()
                    .join("/")
            };
            Error::NoUsablePairs(format!(
                "document (group-associated topics: generated {}, reference {})",
                sizes(level.association_generated()),
                sizes(level.association_reference())
            ))
        }
        other => other,
    })?;
    level.prejudice = per_group(scheme, |g| doc_prejudice_stats(&results, scheme, g));
    level.results = results;
    Ok(level)
}
