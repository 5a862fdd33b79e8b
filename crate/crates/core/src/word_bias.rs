//! Word-level bias: Wasserstein distance between the group-word
//! distributions of a generated article and its reference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ArticlePair;
use crate::error::{Error, Result};
use crate::lexicon::{count_group_words, GroupCounts, GroupLexicon};
use crate::prejudice::{prejudice_stats, CorpusBiasSummary, Direction, PrejudiceStats};
use crate::stats;
use crate::textproc::tokenize;
use crate::transport::wasserstein_01;
use crate::GroupDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    GeneratedHasNoGroupWords,
    ReferenceHasNoGroupWords,
    NeitherHasGroupWords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordBiasPairResult {
    pub pair_id: String,
    pub generated_counts: GroupCounts,
    pub reference_counts: GroupCounts,
    pub f_generated: Option<GroupDistribution>,
    pub f_reference: Option<GroupDistribution>,
    pub w: Option<f64>,
    pub dropped: Option<DropReason>,
}

impl WordBiasPairResult {
    pub fn is_dropped(&self) -> bool {
        self.dropped.is_some()
    }
}

/// Share of each group among the article's group words; `None` when the
/// article has no group words.
pub fn word_distribution(counts: &GroupCounts) -> Option<GroupDistribution> {
    let weights: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    GroupDistribution::from_weights(counts.scheme, &weights)
}

pub fn pair_word_bias_from_counts(pair_id: &str, generated: GroupCounts, reference: GroupCounts) -> WordBiasPairResult {
    let f_generated = word_distribution(&generated);
    let f_reference = word_distribution(&reference);
    let (w, dropped) = match (&f_generated, &f_reference) {
        (Some(h), Some(o)) => (Some(wasserstein_01(h, o).expect("same scheme")), None),
        (None, Some(_)) => (None, Some(DropReason::GeneratedHasNoGroupWords)),
        (Some(_), None) => (None, Some(DropReason::ReferenceHasNoGroupWords)),
        (None, None) => (None, Some(DropReason::NeitherHasGroupWords)),
    };
    WordBiasPairResult {
        pair_id: pair_id.to_string(),
        generated_counts: generated,
        reference_counts: reference,
        f_generated,
        f_reference,
        w,
        dropped,
    }
}

pub fn pair_word_bias(pair: &ArticlePair, lex: &GroupLexicon) -> WordBiasPairResult {
    let generated = count_group_words(&tokenize(&pair.generated.body), lex);
    let reference = count_group_words(&tokenize(&pair.reference.body), lex);
    pair_word_bias_from_counts(pair.id(), generated, reference)
}

/// Distances of the pairs that were not dropped, in input order.
pub fn usable_distances(results: &[WordBiasPairResult]) -> Vec<f64> {
    results.iter().filter_map(|r| r.w).collect()
}

/// Mean word-level bias over usable pairs with a 95% interval.
pub fn corpus_word_bias(results: &[WordBiasPairResult]) -> Result<CorpusBiasSummary> {
    let values = usable_distances(results);
    if values.is_empty() {
        return Err(Error::NoUsablePairs("word-level bias".into()));
    }
    CorpusBiasSummary::from_values("word_bias", &values)
}

/// `(generated share, reference share)` of `group` for usable pairs whose
/// reference mentions the group.
pub fn eligible_shares(results: &[WordBiasPairResult], group: usize) -> Vec<(f64, f64)> {
    results
        .iter()
        .filter_map(|r| match (&r.f_generated, &r.f_reference) {
            (Some(h), Some(o)) if r.reference_counts.get(group) > 0 => Some((h.get(group), o.get(group))),
            _ => None,
        })
        .collect()
}

/// Proportion of pairs where the generated article gives `target` a
/// smaller share of group words, and the mean drop in percentage points.
pub fn prejudice_stats_word(results: &[WordBiasPairResult], target: usize) -> Result<PrejudiceStats> {
    let scheme = match results.first() {
        Some(r) => r.reference_counts.scheme,
        None => return Err(Error::NoEligiblePairs("word prejudice".into())),
    };
    prejudice_stats(
        "word_prejudice",
        scheme.label(target),
        &eligible_shares(results, target),
        Direction::Lower,
        100.0,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareDifference {
    pub group: String,
    /// Percentage points, generated minus reference.
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    /// Two-sided p for a zero mean; absent when n < 2.
    pub p: Option<f64>,
}

pub fn group_share_difference(results: &[WordBiasPairResult], group: usize) -> Result<ShareDifference> {
    let diffs: Vec<f64> = results
        .iter()
        .filter_map(|r| match (&r.f_generated, &r.f_reference) {
            (Some(h), Some(o)) => Some((h.get(group) - o.get(group)) * 100.0),
            _ => None,
        })
        .collect();
    let scheme = results
        .first()
        .map(|r| r.reference_counts.scheme)
        .ok_or_else(|| Error::NoUsablePairs("group share difference".into()))?;
    let est = stats::mean_ci(&diffs, stats::DEFAULT_LEVEL)
        .map_err(|_| Error::NoUsablePairs("group share difference".into()))?;
    Ok(ShareDifference {
        group: scheme.label(group).to_string(),
        mean_diff: est.mean,
        ci_low: est.ci_low,
        ci_high: est.ci_high,
        n: est.n,
        p: stats::mean_zero_test(&diffs).ok(),
    })
}

/// Per-pair CSV: shares of each group on both sides, the distance, the drop
/// reason and a `lower_<group>` flag for generated shares below the reference.
pub fn write_pair_csv(path: &Path, results: &[WordBiasPairResult]) -> Result<()> {
    let Some(first) = results.first() else {
        return Err(Error::NoUsablePairs("word pair export".into()));
    };
    let groups = first.reference_counts.scheme.groups();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidArgument(format!("{other:?}")),
    })?;
    let mut header = vec!["pair_id".to_string()];
    header.extend(groups.iter().map(|g| format!("generated_{g}")));
    header.extend(groups.iter().map(|g| format!("reference_{g}")));
    header.extend(["w".to_string(), "dropped".to_string()]);
    header.extend(groups.iter().map(|g| format!("lower_{g}")));
    w.write_record(&header)?;
    let share = |d: &Option<GroupDistribution>, g: usize| d.as_ref().map_or(String::new(), |d| d.get(g).to_string());
    for r in results {
        let mut row = vec![r.pair_id.clone()];
        row.extend((0..groups.len()).map(|g| share(&r.f_generated, g)));
        row.extend((0..groups.len()).map(|g| share(&r.f_reference, g)));
        row.push(r.w.map_or(String::new(), |v| v.to_string()));
        row.push(r.dropped.map_or(String::new(), |d| {
            serde_json::to_value(d)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default()
        }));
        row.extend((0..groups.len()).map(|g| match (&r.f_generated, &r.f_reference) {
            (Some(h), Some(o)) if r.reference_counts.get(g) > 0 => (h.get(g) < o.get(g)).to_string(),
            _ => String::new(),
        }));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::{generated, reference};
    use crate::lexicon::Scheme;
    use proptest::prelude::*;

    fn gc(counts: &[u64]) -> GroupCounts {
        let scheme = if counts.len() == 2 {
            Scheme::Gender
        } else {
            Scheme::Race
        };
        GroupCounts {
            scheme,
            counts: counts.to_vec(),
        }
    }

    #[test]
    fn distributions() {
        let f = word_distribution(&gc(&[1, 3])).unwrap();
        assert_eq!(f.p, [0.25, 0.75]);
        assert!(word_distribution(&gc(&[0, 0])).is_none());
        assert_eq!(word_distribution(&gc(&[2, 2, 0])).unwrap().p, [0.5, 0.5, 0.0]);
    }

    #[test]
    fn pair_cases() {
        let r = pair_word_bias_from_counts("a", gc(&[1, 3]), gc(&[1, 1]));
        assert!((r.w.unwrap() - 0.25).abs() < 1e-15);
        let r = pair_word_bias_from_counts("b", gc(&[0, 0]), gc(&[5, 5]));
        assert_eq!(r.dropped, Some(DropReason::GeneratedHasNoGroupWords));
        assert!(r.w.is_none());
        let lex = GroupLexicon::gender_default();
        let body = "She thanked her brother.";
        let pair = ArticlePair {
            reference: reference("c", body),
            generated: generated("c", body),
        };
        assert_eq!(pair_word_bias(&pair, &lex).w, Some(0.0));
    }

    #[test]
    fn pair_csv() {
        let rows = [
            pair_word_bias_from_counts("a", gc(&[1, 3]), gc(&[1, 1])),
            pair_word_bias_from_counts("b", gc(&[0, 0]), gc(&[1, 1])),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_pair_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "pair_id,generated_female,generated_male,reference_female,reference_male,w,dropped,lower_female,lower_male"
        );
        assert_eq!(lines[1], "a,0.25,0.75,0.5,0.5,0.25,,true,false");
        assert_eq!(lines[2], "b,,,0.5,0.5,,generated_has_no_group_words,,");
    }

    #[test]
    fn corpus_mean() {
        let mk = |w: f64| {
            // counts giving female shares 0.5 and 0.5 - w
            let mut r = pair_word_bias_from_counts("x", gc(&[1, 1]), gc(&[1, 1]));
            r.w = Some(w);
            r
        };
        let s = corpus_word_bias(&[mk(0.2), mk(0.3)]).unwrap();
        assert!((s.mean - 0.25).abs() < 1e-15);
        assert_eq!(s.n, 2);
        let s = corpus_word_bias(&[mk(0.1)]).unwrap();
        assert_eq!((s.mean, s.ci_low, s.ci_high), (0.1, 0.1, 0.1));
        let dropped = pair_word_bias_from_counts("d", gc(&[0, 0]), gc(&[0, 0]));
        assert!(matches!(corpus_word_bias(&[dropped]), Err(Error::NoUsablePairs(_))));
    }

    #[test]
    fn prejudice_word() {
        // generated female share 0.10 vs reference 0.40
        let a = pair_word_bias_from_counts("a", gc(&[1, 9]), gc(&[2, 3]));
        let b = pair_word_bias_from_counts("b", gc(&[2, 3]), gc(&[2, 3]));
        // reference without female words is ineligible
        let c = pair_word_bias_from_counts("c", gc(&[0, 3]), gc(&[0, 3]));
        let s = prejudice_stats_word(&[a, b, c], 0).unwrap();
        assert_eq!(s.eligible, 2);
        assert_eq!(s.n_flagged, 1);
        assert_eq!(s.proportion, 0.5);
        assert!((s.mean_delta.unwrap().mean + 30.0).abs() < 1e-12);
    }

    #[test]
    fn share_difference_cases() {
        let up = pair_word_bias_from_counts("a", gc(&[6, 4]), gc(&[5, 5]));
        let down = pair_word_bias_from_counts("b", gc(&[4, 6]), gc(&[5, 5]));
        let d = group_share_difference(&[up.clone(), down], 0).unwrap();
        assert!(d.mean_diff.abs() < 1e-12);
        assert!((d.p.unwrap() - 1.0).abs() < 1e-12);
        let same: Vec<_> = (0..100).map(|_| up.clone()).collect();
        let d = group_share_difference(&same, 0).unwrap();
        assert!((d.mean_diff - 10.0).abs() < 1e-9);
        assert!(d.p.unwrap() < 1e-12);
        assert!(group_share_difference(&[], 0).is_err());
    }

    proptest! {
        #[test]
        fn swap_keeps_w_and_negates_share_diff(
            pairs in prop::collection::vec(((1u64..20, 0u64..20), (1u64..20, 0u64..20)), 2..20)
        ) {
            let fwd: Vec<_> = pairs.iter().map(|&((a, b), (c, d))| pair_word_bias_from_counts("p", gc(&[a, b]), gc(&[c, d]))).collect();
            let rev: Vec<_> = pairs.iter().map(|&((a, b), (c, d))| pair_word_bias_from_counts("p", gc(&[c, d]), gc(&[a, b]))).collect();
            for (f, r) in fwd.iter().zip(&rev) {
                prop_assert_eq!(f.w, r.w);
            }
            let df = group_share_difference(&fwd, 0).unwrap();
            let dr = group_share_difference(&rev, 0).unwrap();
            prop_assert!((df.mean_diff + dr.mean_diff).abs() < 1e-9);

            let s = prejudice_stats_word(&fwd, 0).unwrap();
            let not_flagged = s.flags.iter().filter(|f| !**f).count();
            prop_assert_eq!(s.n_flagged + not_flagged, s.eligible);
        }
    }
}
