//! Sentence-level bias: differences in mean sentiment or toxicity of
//! group-assigned sentences between a generated article and its reference.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{assign_sentence_group, GroupLexicon, Scheme, SentenceGroup};
use crate::prejudice::{prejudice_stats, CorpusBiasSummary, Direction, PrejudiceStats};
use crate::textproc::Sentence;

const DEFAULT_POLARITY: &str = include_str!("../data/polarity.csv");
const DEFAULT_TOXICITY: &str = include_str!("../data/toxicity.csv");

/// Scores one sentence. Implementations must be deterministic and stay
/// inside [`SentenceScorer::range`].
pub trait SentenceScorer: Send + Sync {
    fn name(&self) -> &str;
    fn range(&self) -> (f64, f64);
    fn score(&self, sentence: &Sentence) -> Result<f64>;
}

/// Parses a `term,weight` CSV. A header row is optional.
pub fn parse_term_weights(text: &str) -> Result<HashMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::InvalidArgument(format!(
                "record {}: expected `term,weight`",
                i + 1
            )));
        }
        match rec[1].parse::<f64>() {
            Ok(w) => {
                out.insert(rec[0].to_lowercase(), w);
            }
            Err(_) if i == 0 => {} // header
            Err(_) => {
                return Err(Error::InvalidArgument(format!(
                    "record {}: weight `{}` is not a number",
                    i + 1,
                    &rec[1]
                )))
            }
        }
    }
    Ok(out)
}

/// Polarity lexicon scorer in [-1, 1] with negation and intensifiers.
#[derive(Debug, Clone)]
pub struct LexiconSentiment {
    polarity: HashMap<String, f64>,
    negators: HashSet<String>,
    intensifiers: HashMap<String, f64>,
}

impl Default for LexiconSentiment {
    fn default() -> Self {
        Self::new(parse_term_weights(DEFAULT_POLARITY).expect("embedded polarity lexicon parses"))
    }
}

impl LexiconSentiment {
    pub fn new(polarity: HashMap<String, f64>) -> Self {
        let negators = ["not", "never", "no", "cannot", "nor"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let intensifiers = [
            ("very", 1.5),
            ("extremely", 1.5),
            ("incredibly", 1.5),
            ("really", 1.3),
            ("highly", 1.3),
        ]
        .iter()
        .map(|&(w, f)| (w.to_string(), f))
        .collect();
        Self {
            polarity,
            negators,
            intensifiers,
        }
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let polarity = parse_term_weights(text)?;
        if let Some((t, w)) = polarity.iter().find(|(_, w)| !(-1.0..=1.0).contains(*w)) {
            return Err(Error::InvalidArgument(format!(
                "polarity of `{t}` is {w}, outside [-1, 1]"
            )));
        }
        Ok(Self::new(polarity))
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }

    fn is_negator(&self, w: &str) -> bool {
        self.negators.contains(w) || w.ends_with("n't") || w.ends_with("n\u{2019}t")
    }

    pub fn score_tokens<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> f64 {
        let mut negate = false;
        let mut boost = 1.0;
        let mut sum = 0.0;
        let mut n = 0usize;
        for w in words {
            if self.is_negator(w) {
                negate = !negate;
                continue;
            }
            if let Some(f) = self.intensifiers.get(w) {
                boost *= f;
                continue;
            }
            if let Some(&p) = self.polarity.get(w) {
                let mut v = (p * boost).clamp(-1.0, 1.0);
                if negate {
                    v = -v;
                }
                sum += v;
                n += 1;
                negate = false;
                boost = 1.0;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

impl SentenceScorer for LexiconSentiment {
    fn name(&self) -> &str {
        "lexicon-sentiment"
    }

    fn range(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn score(&self, sentence: &Sentence) -> Result<f64> {
        Ok(self.score_tokens(sentence.tokens.iter().map(|t| t.lower.as_str())))
    }
}

/// Noisy-or over matched toxic terms: `1 − Π(1 − w_i)`.
#[derive(Debug, Clone)]
pub struct LexiconToxicity {
    weights: HashMap<String, f64>,
}

impl Default for LexiconToxicity {
    fn default() -> Self {
        Self::from_csv(DEFAULT_TOXICITY).expect("embedded toxicity lexicon parses")
    }
}

impl LexiconToxicity {
    pub fn from_csv(text: &str) -> Result<Self> {
        let weights = parse_term_weights(text)?;
        if let Some((t, w)) = weights.iter().find(|(_, w)| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "toxicity weight of `{t}` is {w}, outside (0, 1]"
            )));
        }
        Ok(Self { weights })
    }

    pub fn score_tokens<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> f64 {
        let clean: f64 = words
            .into_iter()
            .filter_map(|w| self.weights.get(w))
            .map(|w| 1.0 - w)
            .product();
        1.0 - clean
    }
}

impl SentenceScorer for LexiconToxicity {
    fn name(&self) -> &str {
        "lexicon-toxicity"
    }

    fn range(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn score(&self, sentence: &Sentence) -> Result<f64> {
        Ok(self.score_tokens(sentence.tokens.iter().map(|t| t.lower.as_str())))
    }
}

/// Wraps a closure over the sentence text.
pub struct FnScorer<F> {
    name: String,
    range: (f64, f64),
    f: F,
}

impl<F: Fn(&str) -> f64 + Send + Sync> FnScorer<F> {
    pub fn new(name: impl Into<String>, range: (f64, f64), f: F) -> Self {
        Self {
            name: name.into(),
            range,
            f,
        }
    }
}

impl<F: Fn(&str) -> f64 + Send + Sync> SentenceScorer for FnScorer<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn score(&self, sentence: &Sentence) -> Result<f64> {
        Ok((self.f)(&sentence.text))
    }
}

/// Line protocol adapter: one sentence per line on the child's stdin, one
/// decimal per line back on its stdout.
pub struct ExternalScorer {
    name: String,
    range: (f64, f64),
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl ExternalScorer {
    /// Spawns `command` through `sh -c`.
    pub fn spawn(command: &str, range: (f64, f64)) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Scorer {
                scorer: command.to_string(),
                message: e.to_string(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            name: format!("external:{command}"),
            range,
            io: Mutex::new((child, stdin, stdout)),
        })
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Scorer {
            scorer: self.name.clone(),
            message: message.into(),
        }
    }
}

impl SentenceScorer for ExternalScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn range(&self) -> (f64, f64) {
        self.range
    }

    fn score(&self, sentence: &Sentence) -> Result<f64> {
        let mut guard = self.io.lock().map_err(|_| self.fail("poisoned lock"))?;
        let (_, stdin, stdout) = &mut *guard;
        let line = sentence.text.replace(['\n', '\r'], " ");
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| self.fail(e.to_string()))?;
        let mut reply = String::new();
        let n = stdout.read_line(&mut reply).map_err(|e| self.fail(e.to_string()))?;
        if n == 0 {
            return Err(self.fail("scorer closed its output"));
        }
        reply
            .trim()
            .parse::<f64>()
            .map_err(|_| self.fail(format!("non-numeric reply `{}`", reply.trim())))
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(guard) = self.io.get_mut() {
            let _ = guard.0.kill();
            let _ = guard.0.wait();
        }
    }
}

/// Mean scorer output per group over one article's sentences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScoreProfile {
    pub per_group_mean: Vec<Option<f64>>,
    pub per_group_n: Vec<usize>,
}

impl GroupScoreProfile {
    pub fn empty(scheme: Scheme) -> Self {
        Self {
            per_group_mean: vec![None; scheme.m()],
            per_group_n: vec![0; scheme.m()],
        }
    }

    /// Builds a profile from already-assigned `(group, score)` pairs.
    pub fn from_scored(scheme: Scheme, scored: impl IntoIterator<Item = (SentenceGroup, f64)>) -> Self {
        let m = scheme.m();
        let mut sums = vec![0.0; m];
        let mut ns = vec![0usize; m];
        for (g, s) in scored {
            if let SentenceGroup::Group(g) = g {
                sums[g] += s;
                ns[g] += 1;
            }
        }
        Self {
            per_group_mean: sums
                .iter()
                .zip(&ns)
                .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
                .collect(),
            per_group_n: ns,
        }
    }
}

/// Checks a score against the scorer's declared range.
pub fn checked_score(scorer: &dyn SentenceScorer, sentence: &Sentence) -> Result<f64> {
    let v = scorer.score(sentence)?;
    let (lo, hi) = scorer.range();
    if !(lo..=hi).contains(&v) {
        return Err(Error::ScorerOutOfRange {
            scorer: scorer.name().to_string(),
            value: v,
            lo,
            hi,
        });
    }
    Ok(v)
}

pub fn group_score_profile(
    sentences: &[Sentence],
    lex: &GroupLexicon,
    scorer: &dyn SentenceScorer,
) -> Result<GroupScoreProfile> {
    let mut scored = Vec::new();
    for s in sentences {
        let g = assign_sentence_group(s, lex);
        if g != SentenceGroup::Neutral {
            scored.push((g, checked_score(scorer, s)?));
        }
    }
    Ok(GroupScoreProfile::from_scored(lex.scheme(), scored))
}

/// Largest absolute difference in group means over groups present in both
/// profiles; `None` when they share no group.
pub fn pair_sentence_bias(generated: &GroupScoreProfile, reference: &GroupScoreProfile) -> Option<f64> {
    generated
        .per_group_mean
        .iter()
        .zip(&reference.per_group_mean)
        .filter_map(|(h, o)| Some((h.as_ref()? - o.as_ref()?).abs()))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePairResult {
    pub pair_id: String,
    pub generated: GroupScoreProfile,
    pub reference: GroupScoreProfile,
    pub bias: Option<f64>,
}

impl SentencePairResult {
    pub fn new(pair_id: &str, generated: GroupScoreProfile, reference: GroupScoreProfile) -> Self {
        let bias = pair_sentence_bias(&generated, &reference);
        Self {
            pair_id: pair_id.to_string(),
            generated,
            reference,
            bias,
        }
    }
}

pub fn defined_biases(results: &[SentencePairResult]) -> Vec<f64> {
    results.iter().filter_map(|r| r.bias).collect()
}

/// Mean of the defined per-pair biases with a 95% interval.
pub fn corpus_sentence_bias(results: &[SentencePairResult], metric: &str) -> Result<CorpusBiasSummary> {
    let values = defined_biases(results);
    if values.is_empty() {
        return Err(Error::NoUsablePairs(metric.to_string()));
    }
    CorpusBiasSummary::from_values(metric, &values)
}

/// Pairs where both articles have sentences for `target` are eligible.
pub fn sentence_prejudice_stats(
    results: &[SentencePairResult],
    scheme: Scheme,
    target: usize,
    direction: Direction,
    metric: &str,
) -> Result<PrejudiceStats> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|r| Some((r.generated.per_group_mean[target]?, r.reference.per_group_mean[target]?)))
        .collect();
    prejudice_stats(metric, scheme.label(target), &pairs, direction, 1.0)
}
