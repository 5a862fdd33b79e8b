//! Document-level bias: topic × group contingency tables, chi-squared test,
//! standardized residuals, topic association and topic-based group shares.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Scheme, SentenceGroup};
use crate::prejudice::{prejudice_stats, CorpusBiasSummary, Direction, PrejudiceStats};
use crate::scalar::Real;
use crate::special;
use crate::topics::{TopicModel, RELEVANCE_LAMBDA, TOP_WORDS};
use crate::transport::{wasserstein_01, Distribution};

pub const SR_THRESHOLD: f64 = 3.0;

/// Sentence counts per topic (rows) and group (columns, neutral last).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyMatrix {
    pub scheme: Scheme,
    pub k: usize,
    /// Row-major `K×(M+1)`.
    pub counts: Vec<u64>,
}

impl ContingencyMatrix {
    pub fn zeros(k: usize, scheme: Scheme) -> Self {
        Self {
            scheme,
            k,
            counts: vec![0; k * (scheme.m() + 1)],
        }
    }

    pub fn from_rows(scheme: Scheme, rows: &[Vec<u64>]) -> Result<Self> {
        let cols = scheme.m() + 1;
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::InvalidArgument(format!(
                "row of length {} for {cols} columns",
                r.len()
            )));
        }
        Ok(Self {
            scheme,
            k: rows.len(),
            counts: rows.concat(),
        })
    }

    pub fn cols(&self) -> usize {
        self.scheme.m() + 1
    }

    pub fn get(&self, topic: usize, col: usize) -> u64 {
        self.counts[topic * self.cols() + col]
    }

    pub fn row_total(&self, topic: usize) -> u64 {
        self.counts[topic * self.cols()..(topic + 1) * self.cols()].iter().sum()
    }

    pub fn col_total(&self, col: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, col)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn column_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.scheme.groups().iter().map(|s| s.to_string()).collect();
        labels.push("neutral".into());
        labels
    }

    fn add(mut self, other: &Self) -> Self {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self
    }
}

/// Tallies `(group, topic)` sentence labels.
pub fn build_contingency(labels: &[(SentenceGroup, usize)], k: usize, scheme: Scheme) -> Result<ContingencyMatrix> {
    if let Some(&(_, t)) = labels.iter().find(|(_, t)| *t >= k) {
        return Err(Error::InvalidArgument(format!("topic id {t} out of range for K = {k}")));
    }
    let m = scheme.m();
    Ok(labels
        .par_chunks(4096)
        .map(|chunk| {
            let mut o = ContingencyMatrix::zeros(k, scheme);
            for &(g, t) in chunk {
                o.counts[t * (m + 1) + g.column(m)] += 1;
            }
            o
        })
        .reduce(|| ContingencyMatrix::zeros(k, scheme), |a, b| a.add(&b)))
}

/// `E[k][m] = row_k · col_m / N`, row-major like the counts.
pub fn expected<T: Real>(o: &ContingencyMatrix) -> Vec<T> {
    let n = T::from_u64(o.total()).unwrap();
    let cols = o.cols();
    let col_totals: Vec<T> = (0..cols).map(|c| T::from_u64(o.col_total(c)).unwrap()).collect();
    let mut e = Vec::with_capacity(o.counts.len());
    for t in 0..o.k {
        let row = T::from_u64(o.row_total(t)).unwrap();
        for &c in &col_totals {
            e.push(if n > T::zero() { row * c / n } else { T::zero() });
        }
    }
    e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquared {
    pub stat: f64,
    pub dof: usize,
    pub p: f64,
    /// Rows (topics) with no sentences, left out of the degrees of freedom.
    pub empty_rows: usize,
    pub empty_cols: usize,
}

pub fn chi_squared_test(o: &ContingencyMatrix) -> Result<ChiSquared> {
    if o.total() == 0 {
        return Err(Error::InsufficientData("chi-squared test on an empty table".into()));
    }
    let e = expected::<f64>(o);
    let stat: f64 = o
        .counts
        .iter()
        .zip(&e)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&obs, &e)| (obs as f64 - e).powi(2) / e)
        .sum();
    let empty_rows = (0..o.k).filter(|&t| o.row_total(t) == 0).count();
    let empty_cols = (0..o.cols()).filter(|&c| o.col_total(c) == 0).count();
    if empty_rows + empty_cols > 0 {
        log::warn!(
            "chi-squared: excluding {empty_rows} empty topic rows and {empty_cols} empty group columns from dof"
        );
    }
    let dof = (o.k - empty_rows).saturating_sub(1) * (o.cols() - empty_cols).saturating_sub(1);
    let p = if dof == 0 {
        1.0
    } else {
        special::chi_squared_sf(stat, dof as f64)
    };
    Ok(ChiSquared {
        stat,
        dof,
        p,
        empty_rows,
        empty_cols,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals<T = f64> {
    pub k: usize,
    pub cols: usize,
    /// Row-major; undefined cells hold 0.
    pub sr: Vec<T>,
    pub undefined: Vec<bool>,
}

impl<T: Real> Residuals<T> {
    pub fn get(&self, topic: usize, col: usize) -> T {
        self.sr[topic * self.cols + col]
    }
}

/// `(O − E) / sqrt(E·(1 − row/N)·(1 − col/N))`.
pub fn standardized_residuals<T: Real>(o: &ContingencyMatrix) -> Residuals<T> {
    let e = expected::<T>(o);
    let n = T::from_u64(o.total()).unwrap();
    let cols = o.cols();
    let col_frac: Vec<T> = (0..cols).map(|c| T::from_u64(o.col_total(c)).unwrap() / n).collect();
    let mut sr = Vec::with_capacity(e.len());
    let mut undefined = Vec::with_capacity(e.len());
    for t in 0..o.k {
        let row_frac = T::from_u64(o.row_total(t)).unwrap() / n;
        for c in 0..cols {
            let i = t * cols + c;
            let var = e[i] * (T::one() - row_frac) * (T::one() - col_frac[c]);
            if n > T::zero() && var > T::zero() {
                sr.push((T::from_u64(o.counts[i]).unwrap() - e[i]) / var.sqrt());
                undefined.push(false);
            } else {
                sr.push(T::zero());
                undefined.push(true);
            }
        }
    }
    Residuals {
        k: o.k,
        cols,
        sr,
        undefined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Association {
    Group(usize),
    Neutral,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAssociation {
    pub scheme: Scheme,
    pub threshold: f64,
    /// One entry per topic.
    pub assignment: Vec<Association>,
    pub sr: Residuals<f64>,
}

impl TopicAssociation {
    /// Topic sets `U_m`, one per population group.
    pub fn group_sets(&self) -> Vec<BTreeSet<usize>> {
        let mut sets = vec![BTreeSet::new(); self.scheme.m()];
        for (t, a) in self.assignment.iter().enumerate() {
            if let Association::Group(g) = a {
                sets[*g].insert(t);
            }
        }
        sets
    }

    pub fn label(&self, topic: usize) -> String {
        match self.assignment[topic] {
            Association::Group(g) => self.scheme.label(g).to_string(),
            Association::Neutral => "neutral".into(),
            Association::None => "none".into(),
        }
    }

    /// Writes topic id, its top relevance words, the association and the
    /// winning residual for every associated topic.
    pub fn write_csv(&self, path: &Path, model: &TopicModel) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Model(format!("{other:?}")),
        })?;
        w.write_record(["topic", "top_words", "group", "sr"])?;
        let m = self.scheme.m();
        for (t, a) in self.assignment.iter().enumerate() {
            let col = match a {
                Association::Group(g) => *g,
                Association::Neutral => m,
                Association::None => continue,
            };
            let words: Vec<String> = model
                .top_relevant_words(t, TOP_WORDS, RELEVANCE_LAMBDA)
                .into_iter()
                .map(|(w, _)| w)
                .collect();
            w.write_record([
                t.to_string(),
                words.join(" "),
                self.label(t),
                format!("{:.4}", self.sr.get(t, col)),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Associates each topic with the column whose residual exceeds
/// `threshold` by the most (earlier column on ties). The neutral column
/// competes like any group.
pub fn associate_topics(sr: &Residuals<f64>, scheme: Scheme, threshold: f64) -> TopicAssociation {
    let m = scheme.m();
    let assignment = (0..sr.k)
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for c in 0..sr.cols {
                let v = sr.get(t, c);
                if v > threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((c, v));
                }
            }
            match best {
                Some((c, _)) if c == m => Association::Neutral,
                Some((c, _)) => Association::Group(c),
                None => Association::None,
            }
        })
        .collect();
    TopicAssociation {
        scheme,
        threshold,
        assignment,
        sr: sr.clone(),
    }
}

/// Share of group-associated topic mass held by each group; `None` when
/// the document puts no mass on any group-associated topic.
pub fn doc_semantic_share<T: Real>(t: &[T], assoc: &TopicAssociation) -> Option<Distribution<T>> {
    let mut mass = vec![T::zero(); assoc.scheme.m()];
    for (k, a) in assoc.assignment.iter().enumerate() {
        if let Association::Group(g) = a {
            mass[*g] = mass[*g] + t[k];
        }
    }
    Distribution::from_weights(assoc.scheme, &mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPairResult {
    pub pair_id: String,
    pub g_generated: Option<Vec<f64>>,
    pub g_reference: Option<Vec<f64>>,
    pub w: Option<f64>,
}

/// `t_h` is scored under the generated corpus's association, `t_o` under
/// the reference corpus's.
pub fn pair_doc_bias(
    pair_id: &str,
    t_h: &[f64],
    t_o: &[f64],
    assoc_generated: &TopicAssociation,
    assoc_reference: &TopicAssociation,
) -> Result<DocPairResult> {
    let gh = doc_semantic_share(t_h, assoc_generated);
    let go = doc_semantic_share(t_o, assoc_reference);
    let w = match (&gh, &go) {
        (Some(a), Some(b)) => Some(wasserstein_01(a, b)?),
        _ => None,
    };
    Ok(DocPairResult {
        pair_id: pair_id.to_string(),
        g_generated: gh.map(|d| d.p),
        g_reference: go.map(|d| d.p),
        w,
    })
}

pub fn corpus_doc_bias(results: &[DocPairResult]) -> Result<CorpusBiasSummary> {
    let values: Vec<f64> = results.iter().filter_map(|r| r.w).collect();
    if values.is_empty() {
        return Err(Error::NoUsablePairs("document".into()));
    }
    CorpusBiasSummary::from_values("document", &values)
}

/// Eligible pairs have both shares defined and a reference share of
/// `target` above zero; deltas are in percentage points.
pub fn doc_prejudice_stats(results: &[DocPairResult], scheme: Scheme, target: usize) -> Result<PrejudiceStats> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|r| match (&r.g_generated, &r.g_reference) {
            (Some(h), Some(o)) if o[target] > 0.0 => Some((h[target], o[target])),
            _ => None,
        })
        .collect();
    prejudice_stats(
        "document_prejudice",
        scheme.label(target),
        &pairs,
        Direction::Lower,
        100.0,
    )
}
