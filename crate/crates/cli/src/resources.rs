//! Loading of corpora, lexicons, scorers and topic models from options.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aigcbias::corpus::{load_articles, Article, Origin, PromptKind};
use aigcbias::lexicon::{GroupLexicon, LexiconPaths, Scheme};
use aigcbias::pipeline::{training_docs, TextResources};
use aigcbias::report::sha256_hex;
use aigcbias::sentence_bias::{ExternalScorer, LexiconSentiment, LexiconToxicity, SentenceScorer};
use aigcbias::textproc::TextConfig;
use aigcbias::topics::{default_stopwords, train_lda, LdaParams, TopicModel, DEFAULT_K};
use aigcbias::Error;

use crate::args::{AuditOpts, SchemeArg};
use crate::{CliError, CliResult};

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

pub fn scheme(opts: &AuditOpts) -> Scheme {
    match opts.scheme.unwrap_or(SchemeArg::Gender) {
        SchemeArg::Gender => Scheme::Gender,
        SchemeArg::Race => Scheme::Race,
    }
}

pub fn thread_pool(jobs: Option<usize>) -> CliResult<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Data(e.to_string()))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Input file name (not path) → content hash, so reports do not depend on
/// where the inputs live.
pub fn input_hashes(paths: &[&Path]) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for p in paths {
        let name = p
            .file_name()
            .map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
        let mut key = name.clone();
        let mut i = 2;
        while out.contains_key(&key) {
            key = format!("{name}#{i}");
            i += 1;
        }
        out.insert(key, file_sha256(p)?);
    }
    Ok(out)
}

/// Generated articles grouped by generator and prompt kind. A missing
/// `generator` field falls back to the file stem; `none` counts as unbiased.
pub type GeneratedCorpora = BTreeMap<String, BTreeMap<PromptKind, Vec<Article>>>;

pub fn load_generated(paths: &[PathBuf]) -> CliResult<GeneratedCorpora> {
    let mut out = GeneratedCorpora::new();
    for path in paths {
        let stem = path
            .file_stem()
            .map_or("generated".into(), |s| s.to_string_lossy().into_owned());
        let stem = stem.split('.').next().unwrap_or("generated").to_string();
        for a in load_articles(path, Origin::Generated)? {
            let gen = a.generator.clone().unwrap_or_else(|| stem.clone());
            let kind = if a.prompt_kind == PromptKind::None {
                PromptKind::Unbiased
            } else {
                a.prompt_kind
            };
            out.entry(gen).or_default().entry(kind).or_default().push(a);
        }
    }
    Ok(out)
}

pub fn text_resources(opts: &AuditOpts) -> CliResult<TextResources> {
    let text = TextConfig::load(opts.abbreviations.as_deref(), opts.lemma_exceptions.as_deref())?;
    let lexicon = GroupLexicon::load(
        scheme(opts),
        &LexiconPaths {
            gender_words: opts.gender_words.clone(),
            occupations: opts.occupations.clone(),
            names: opts.names.clone(),
        },
    )?;
    Ok(TextResources {
        text,
        lexicon,
        stopwords: default_stopwords(),
    })
}

fn scorer(
    spec: Option<&str>,
    lexicon: impl FnOnce() -> CliResult<Box<dyn SentenceScorer>>,
    range: (f64, f64),
) -> CliResult<Box<dyn SentenceScorer>> {
    match spec.unwrap_or("lexicon") {
        "lexicon" => lexicon(),
        s => match s.strip_prefix("external:") {
            Some(cmd) if !cmd.trim().is_empty() => Ok(Box::new(ExternalScorer::spawn(cmd, range)?)),
            _ => Err(CliError::Usage(format!(
                "scorer must be `lexicon` or `external:COMMAND`, got `{s}`"
            ))),
        },
    }
}

pub fn scorers(opts: &AuditOpts) -> CliResult<(Box<dyn SentenceScorer>, Box<dyn SentenceScorer>)> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::from(Error::io(p, e)));
    let sentiment = scorer(
        opts.scorer.as_deref(),
        || {
            Ok(match &opts.polarity {
                Some(p) => Box::new(LexiconSentiment::from_csv(&read(p)?)?),
                None => Box::new(LexiconSentiment::default()),
            })
        },
        (-1.0, 1.0),
    )?;
    let toxicity = scorer(
        opts.toxicity_scorer.as_deref(),
        || {
            Ok(match &opts.toxicity_lexicon {
                Some(p) => Box::new(LexiconToxicity::from_csv(&read(p)?)?),
                None => Box::new(LexiconToxicity::default()),
            })
        },
        (0.0, 1.0),
    )?;
    Ok((sentiment, toxicity))
}

pub fn lda_params(opts: &AuditOpts, seed: u64) -> CliResult<LdaParams> {
    let k = opts.k.unwrap_or(DEFAULT_K);
    if k < 2 {
        return Err(CliError::Usage(format!("--k must be at least 2, got {k}")));
    }
    let mut p = LdaParams::new(k, seed);
    if let Some(a) = opts.alpha {
        p.alpha = a;
    }
    if let Some(b) = opts.beta {
        p.beta = b;
    }
    if let Some(n) = opts.burn_in {
        p.burn_in = n;
    }
    if let Some(n) = opts.samples {
        p.sample_sweeps = n;
    }
    Ok(p)
}

/// Reference plus every generated article, lemmatized for LDA.
pub fn topic_corpus(reference: &[Article], generated: &GeneratedCorpora, res: &TextResources) -> Vec<Vec<String>> {
    let mut all: Vec<Article> = reference.to_vec();
    for kinds in generated.values() {
        for articles in kinds.values() {
            all.extend(articles.iter().filter(|a| !a.body.trim().is_empty()).cloned());
        }
    }
    training_docs(&all, res)
}

fn docs_digest(docs: &[Vec<String>], params: &LdaParams) -> String {
    let mut text = serde_json::to_string(params).unwrap_or_default();
    for d in docs {
        text.push('\n');
        text.push_str(&d.join(" "));
    }
    sha256_hex(text.as_bytes())
}

/// Loads `--model`, reuses a cached model trained on identical input, or
/// trains a new one (and caches it when `--cache` is set).
pub fn obtain_model(opts: &AuditOpts, docs: &[Vec<String>], params: &LdaParams) -> CliResult<TopicModel> {
    if let Some(dir) = &opts.model {
        return Ok(TopicModel::load(dir)?);
    }
    let cached = opts
        .cache
        .as_ref()
        .map(|c| c.join(format!("lda-{}", &docs_digest(docs, params)[..16])));
    if let Some(dir) = &cached {
        if dir.exists() {
            log::info!("reusing topic model from {}", dir.display());
            return Ok(TopicModel::load(dir)?);
        }
    }
    log::info!("training LDA: K = {}, {} documents", params.k, docs.len());
    let model = train_lda(docs, params)?;
    if let Some(dir) = &cached {
        model.save(dir)?;
    }
    Ok(model)
}
