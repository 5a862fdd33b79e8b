//! Latent Dirichlet allocation by collapsed Gibbs sampling, fold-in
//! inference for unseen documents, held-out perplexity and K selection.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ARCHIVE_FORMAT: &str = "aigcbias-lda";
pub const ARCHIVE_VERSION: u32 = 1;
pub const HEADER_FILE: &str = "header.json";
pub const COUNTS_FILE: &str = "topic_word_counts.txt";
pub const DEFAULT_K: usize = 250;
pub const RELEVANCE_LAMBDA: f64 = 0.6;
pub const TOP_WORDS: usize = 15;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Function words dropped before topic modelling.
pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub burn_in: usize,
    /// Sweeps after burn-in whose counts are averaged into the model.
    pub sample_sweeps: usize,
    pub infer_burn_in: usize,
    pub infer_samples: usize,
    pub seed: u64,
}

impl LdaParams {
    /// `alpha = 50/K`, `beta = 0.01`, 800 burn-in plus 200 sample sweeps.
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            burn_in: 800,
            sample_sweeps: 200,
            infer_burn_in: 50,
            infer_samples: 50,
            seed,
        }
    }

    pub fn iterations(&self) -> usize {
        self.burn_in + self.sample_sweeps
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("LDA needs K >= 2, got {}", self.k)));
        }
        if self.k > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("K = {} is too large", self.k)));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha and beta must be positive, got {} and {}",
                self.alpha, self.beta
            )));
        }
        if self.sample_sweeps == 0 || self.infer_samples == 0 {
            return Err(Error::InvalidArgument("sample sweep counts must be positive".into()));
        }
        Ok(())
    }
}

/// splitmix64 finaliser over a combined pair.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(a << 6)
        .wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn content_hash(ids: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &id in ids {
        for b in id.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Collapsed Gibbs state over encoded documents.
pub struct GibbsSampler {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<u32>>,
    z: Vec<Vec<u32>>,
    /// doc-major `n_dk[d*K + k]`
    n_dk: Vec<u32>,
    /// word-major `n_wk[w*K + k]`
    n_wk: Vec<u32>,
    n_k: Vec<u32>,
    rng: ChaCha8Rng,
    p: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(docs: Vec<Vec<u32>>, v: usize, params: &LdaParams) -> Result<Self> {
        params.validate()?;
        let k = params.k;
        if let Some(&bad) = docs.iter().flatten().find(|&&w| w as usize >= v) {
            return Err(Error::InvalidArgument(format!(
                "word id {bad} outside vocabulary of {v}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut n_dk = vec![0u32; docs.len() * k];
        let mut n_wk = vec![0u32; v * k];
        let mut n_k = vec![0u32; k];
        let z = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let t = rng.random_range(0..k);
                        n_dk[d * k + t] += 1;
                        n_wk[w as usize * k + t] += 1;
                        n_k[t] += 1;
                        t as u32
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            v,
            alpha: params.alpha,
            beta: params.beta,
            docs,
            z,
            n_dk,
            n_wk,
            n_k,
            rng,
            p: vec![0.0; k],
        })
    }

    pub fn sweep(&mut self) {
        let (k, vbeta) = (self.k, self.v as f64 * self.beta);
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.z[d][i] as usize;
                let dk = &mut self.n_dk[d * k..(d + 1) * k];
                let wk = &mut self.n_wk[w * k..(w + 1) * k];
                dk[old] -= 1;
                wk[old] -= 1;
                self.n_k[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + self.alpha) * (wk[t] as f64 + self.beta) / (self.n_k[t] as f64 + vbeta);
                    self.p[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.p.partition_point(|&c| c <= u).min(k - 1);
                dk[new] += 1;
                wk[new] += 1;
                self.n_k[new] += 1;
                self.z[d][i] = new as u32;
            }
        }
    }

    /// Assignments in range and every count table agrees with them.
    pub fn is_consistent(&self) -> bool {
        let k = self.k;
        let mut n_dk = vec![0u32; self.docs.len() * k];
        let mut n_wk = vec![0u32; self.v * k];
        let mut n_k = vec![0u32; k];
        for (d, (doc, z)) in self.docs.iter().zip(&self.z).enumerate() {
            for (&w, &t) in doc.iter().zip(z) {
                let t = t as usize;
                if t >= k {
                    return false;
                }
                n_dk[d * k + t] += 1;
                n_wk[w as usize * k + t] += 1;
                n_k[t] += 1;
            }
        }
        let tokens: usize = self.docs.iter().map(Vec::len).sum();
        n_dk == self.n_dk
            && n_wk == self.n_wk
            && n_k == self.n_k
            && self.n_k.iter().map(|&c| c as usize).sum::<usize>() == tokens
    }

    /// Adds the current topic-major `K×V` counts into `acc`.
    fn accumulate(&self, acc: &mut [u64]) {
        for w in 0..self.v {
            for t in 0..self.k {
                acc[t * self.v + w] += self.n_wk[w * self.k + t] as u64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution {
    pub t: Vec<f64>,
    /// No in-vocabulary tokens; `t` is uniform.
    pub empty: bool,
}

impl TopicDistribution {
    /// Most probable topic, lowest id on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.t.iter().enumerate() {
            if v > self.t[best] {
                best = k;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelHeader {
    pub format: String,
    pub version: u32,
    pub params: LdaParams,
    pub vocabulary: Vec<String>,
    pub training_docs: usize,
    pub training_tokens: usize,
}

#[derive(Debug, Clone)]
pub struct TopicModel {
    header: ModelHeader,
    /// Topic-major `K×V`, summed over the sample sweeps.
    topic_word_counts: Vec<u64>,
    topic_totals: Vec<u64>,
    index: HashMap<String, u32>,
    /// Word-major `V×K` smoothed topic-word probabilities.
    phi_wk: Vec<f64>,
}

impl TopicModel {
    fn from_parts(header: ModelHeader, topic_word_counts: Vec<u64>) -> Result<Self> {
        header.params.validate()?;
        let (k, v) = (header.params.k, header.vocabulary.len());
        if v == 0 {
            return Err(Error::Model("empty vocabulary".into()));
        }
        if topic_word_counts.len() != k * v {
            return Err(Error::Model(format!(
                "expected {} topic-word counts, found {}",
                k * v,
                topic_word_counts.len()
            )));
        }
        let index: HashMap<String, u32> = header
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        if index.len() != v {
            return Err(Error::Model("duplicate vocabulary entries".into()));
        }
        let topic_totals: Vec<u64> = topic_word_counts.chunks(v).map(|row| row.iter().sum()).collect();
        let s = header.params.sample_sweeps as f64;
        let beta = header.params.beta;
        let mut phi_wk = vec![0.0; v * k];
        for t in 0..k {
            let denom = topic_totals[t] as f64 / s + v as f64 * beta;
            for w in 0..v {
                phi_wk[w * k + t] = (topic_word_counts[t * v + w] as f64 / s + beta) / denom;
            }
        }
        Ok(Self {
            header,
            topic_word_counts,
            topic_totals,
            index,
            phi_wk,
        })
    }

    /// Untrained model: every topic is uniform over `vocabulary`.
    pub fn uniform(params: LdaParams, vocabulary: Vec<String>) -> Result<Self> {
        let n = params.k * vocabulary.len();
        Self::from_parts(
            ModelHeader {
                format: ARCHIVE_FORMAT.into(),
                version: ARCHIVE_VERSION,
                params,
                vocabulary,
                training_docs: 0,
                training_tokens: 0,
            },
            vec![0; n],
        )
    }

    pub fn k(&self) -> usize {
        self.header.params.k
    }

    pub fn vocab_size(&self) -> usize {
        self.header.vocabulary.len()
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.header.vocabulary
    }

    pub fn params(&self) -> &LdaParams {
        &self.header.params
    }

    pub fn header(&self) -> &ModelHeader {
        &self.header
    }

    pub fn topic_word_counts(&self) -> &[u64] {
        &self.topic_word_counts
    }

    pub fn word_id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn phi(&self, topic: usize, word: usize) -> f64 {
        self.phi_wk[word * self.k() + topic]
    }

    pub fn topic_word_distribution(&self, topic: usize) -> Vec<f64> {
        (0..self.vocab_size()).map(|w| self.phi(topic, w)).collect()
    }

    /// In-vocabulary word ids of `doc`; unknown words are skipped.
    pub fn encode<S: AsRef<str>>(&self, doc: &[S]) -> Vec<u32> {
        doc.iter().filter_map(|w| self.word_id(w.as_ref())).collect()
    }

    /// Posterior mean topic proportions with frozen topics.
    fn fold_in(&self, ids: &[u32]) -> Vec<f64> {
        let p = &self.header.params;
        let k = p.k;
        let n = ids.len() as f64;
        if ids.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(p.seed, content_hash(ids)));
        let mut n_k = vec![0u32; k];
        let mut z: Vec<usize> = ids
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                n_k[t] += 1;
                t
            })
            .collect();
        let mut cdf = vec![0.0; k];
        let mut theta = vec![0.0; k];
        for sweep in 0..p.infer_burn_in + p.infer_samples {
            for (i, &w) in ids.iter().enumerate() {
                n_k[z[i]] -= 1;
                let phi = &self.phi_wk[w as usize * k..(w as usize + 1) * k];
                let mut total = 0.0;
                for t in 0..k {
                    total += (n_k[t] as f64 + p.alpha) * phi[t];
                    cdf[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let t = cdf.partition_point(|&c| c <= u).min(k - 1);
                n_k[t] += 1;
                z[i] = t;
            }
            if sweep >= p.infer_burn_in {
                for t in 0..k {
                    theta[t] += (n_k[t] as f64 + p.alpha) / (n + k as f64 * p.alpha);
                }
            }
        }
        let s = p.infer_samples as f64;
        theta.iter_mut().for_each(|x| *x /= s);
        theta
    }

    /// Topic distribution of an unseen document. Deterministic: the sampler
    /// seed is derived from the model seed and the document content.
    pub fn infer_doc_topics<S: AsRef<str>>(&self, doc: &[S]) -> TopicDistribution {
        let ids = self.encode(doc);
        TopicDistribution {
            t: self.fold_in(&ids),
            empty: ids.is_empty(),
        }
    }

    /// Most probable topic of a sentence and whether it had no known words.
    pub fn assign_sentence_topic<S: AsRef<str>>(&self, lemmas: &[S]) -> (usize, bool) {
        let d = self.infer_doc_topics(lemmas);
        (d.argmax(), d.empty)
    }

    /// Document-completion perplexity: topic proportions are folded in from
    /// the even-position tokens and the odd-position tokens are scored.
    /// A single-token document is scored under the prior. Unknown words
    /// are ignored.
    pub fn perplexity<S: AsRef<str> + Sync>(&self, heldout: &[Vec<S>]) -> Result<f64> {
        if heldout.is_empty() {
            return Err(Error::InsufficientData("empty held-out set".into()));
        }
        let k = self.k();
        let parts: Vec<(f64, usize)> = heldout
            .par_iter()
            .map(|doc| {
                let ids = self.encode(doc);
                let (fold, eval): (Vec<u32>, Vec<u32>) = if ids.len() == 1 {
                    (Vec::new(), ids)
                } else {
                    let fold = ids.iter().step_by(2).copied().collect();
                    let eval = ids.iter().skip(1).step_by(2).copied().collect();
                    (fold, eval)
                };
                let theta = self.fold_in(&fold);
                let ll: f64 = eval
                    .iter()
                    .map(|&w| {
                        let phi = &self.phi_wk[w as usize * k..(w as usize + 1) * k];
                        theta.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>().ln()
                    })
                    .sum();
                (ll, eval.len())
            })
            .collect();
        let (ll, n) = parts.iter().fold((0.0, 0usize), |(a, b), &(l, c)| (a + l, b + c));
        if n == 0 {
            return Err(Error::InsufficientData(
                "held-out set has no in-vocabulary tokens".into(),
            ));
        }
        Ok((-ll / n as f64).exp())
    }

    /// `λ·ln φ_kw + (1−λ)·ln(φ_kw / p_w)`, with `p_w` the corpus word frequency.
    pub fn top_relevant_words(&self, topic: usize, n: usize, lambda: f64) -> Vec<(String, f64)> {
        let v = self.vocab_size();
        let total: u64 = self.topic_totals.iter().sum();
        let mut scored: Vec<(usize, f64)> = (0..v)
            .map(|w| {
                let phi = self.phi(topic, w);
                let freq: u64 = (0..self.k()).map(|t| self.topic_word_counts[t * v + w]).sum();
                let pw = if total == 0 {
                    1.0 / v as f64
                } else {
                    freq.max(1) as f64 / total as f64
                };
                (w, lambda * phi.ln() + (1.0 - lambda) * (phi / pw).ln())
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(n)
            .map(|(w, r)| (self.header.vocabulary[w].clone(), r))
            .collect()
    }

    /// CSV of the top relevance-ranked words of every topic.
    pub fn write_top_words(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Model(format!("{other:?}")),
        })?;
        w.write_record(["topic", "rank", "word", "relevance", "probability"])?;
        for t in 0..self.k() {
            for (rank, (word, rel)) in self
                .top_relevant_words(t, TOP_WORDS, RELEVANCE_LAMBDA)
                .into_iter()
                .enumerate()
            {
                let id = self.index[&word] as usize;
                w.write_record([
                    t.to_string(),
                    (rank + 1).to_string(),
                    word,
                    format!("{rel:.6}"),
                    format!("{:.6}", self.phi(t, id)),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes the header and the flat count file into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = dir.join(HEADER_FILE);
        let json = serde_json::to_string_pretty(&self.header)?;
        fs::write(&header, json + "\n").map_err(|e| Error::io(&header, e))?;
        let v = self.vocab_size();
        let mut body = String::with_capacity(self.topic_word_counts.len() * 2);
        for row in self.topic_word_counts.chunks(v) {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            body.push_str(&line.join(" "));
            body.push('\n');
        }
        let counts = dir.join(COUNTS_FILE);
        fs::write(&counts, body).map_err(|e| Error::io(&counts, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join(HEADER_FILE);
        let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
        let header: ModelHeader = serde_json::from_str(&text)?;
        if header.format != ARCHIVE_FORMAT || header.version != ARCHIVE_VERSION {
            return Err(Error::Model(format!(
                "unsupported archive {} v{}",
                header.format, header.version
            )));
        }
        let counts_path = dir.join(COUNTS_FILE);
        let body = fs::read_to_string(&counts_path).map_err(|e| Error::io(&counts_path, e))?;
        let counts = body
            .split_ascii_whitespace()
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| Error::Model(format!("bad count `{s}` in {COUNTS_FILE}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(header, counts)
    }
}

/// Sorted vocabulary of every word in `docs`.
pub fn build_vocabulary<S: AsRef<str>>(docs: &[Vec<S>]) -> Vec<String> {
    docs.iter()
        .flatten()
        .map(|w| w.as_ref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect()
}

pub fn train_lda<S: AsRef<str>>(docs: &[Vec<S>], params: &LdaParams) -> Result<TopicModel> {
    params.validate()?;
    if docs.is_empty() {
        return Err(Error::InsufficientData("no training documents".into()));
    }
    let vocabulary = build_vocabulary(docs);
    if vocabulary.is_empty() {
        return Err(Error::InsufficientData(
            "training documents have an empty vocabulary".into(),
        ));
    }
    let index: HashMap<&str, u32> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.as_str(), i as u32))
        .collect();
    let encoded: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| d.iter().map(|w| index[w.as_ref()]).collect())
        .collect();
    let tokens = encoded.iter().map(Vec::len).sum();
    let v = vocabulary.len();
    let mut sampler = GibbsSampler::new(encoded, v, params)?;
    for _ in 0..params.burn_in {
        sampler.sweep();
    }
    let mut acc = vec![0u64; params.k * v];
    for _ in 0..params.sample_sweeps {
        sampler.sweep();
        sampler.accumulate(&mut acc);
    }
    debug_assert!(sampler.is_consistent());
    TopicModel::from_parts(
        ModelHeader {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            params: params.clone(),
            vocabulary,
            training_docs: docs.len(),
            training_tokens: tokens,
        },
        acc,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen: usize,
    /// `(K, held-out perplexity)` in candidate order.
    pub perplexities: Vec<(usize, f64)>,
}

/// Deterministic 90/10 train/held-out split (at least one held-out doc).
pub fn heldout_split<S: Clone>(docs: &[Vec<S>], seed: u64) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5EED));
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let n_held = (docs.len().div_ceil(10)).max(1).min(docs.len().saturating_sub(1));
    let held = order[..n_held].iter().map(|&i| docs[i].clone()).collect();
    let train = order[n_held..].iter().map(|&i| docs[i].clone()).collect();
    (train, held)
}

/// Trains one model per candidate K (in parallel) and keeps the lowest
/// held-out perplexity; ties go to the smaller K. `base` supplies every
/// parameter except K, alpha and the per-candidate seed.
pub fn select_k<S: AsRef<str> + Clone + Sync + Send>(
    docs: &[Vec<S>],
    candidates: &[usize],
    base: &LdaParams,
) -> Result<KSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate K values".into()));
    }
    if docs.len() < 2 {
        return Err(Error::InsufficientData(
            "K selection needs at least two documents".into(),
        ));
    }
    let (train, held) = heldout_split(docs, base.seed);
    let perplexities = candidates
        .par_iter()
        .map(|&k| {
            let mut p = base.clone();
            p.k = k;
            p.alpha = 50.0 / k as f64;
            p.seed = mix_seed(base.seed, k as u64);
            let model = train_lda(&train, &p)?;
            Ok((k, model.perplexity(&held)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let chosen = perplexities
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|&(k, _)| k)
        .expect("nonempty");
    Ok(KSelection { chosen, perplexities })
}
