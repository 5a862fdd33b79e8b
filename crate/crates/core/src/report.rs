//! Per-generator bias reports, canonical JSON, figure tables and manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::doc_bias::{Association, ChiSquared};
use crate::error::{Error, Result};
use crate::lexicon::Scheme;
use crate::pipeline::{CorpusTopics, DocumentLevel, ScoredMetric, SentenceLevel, WordLevel};
use crate::prejudice::{CorpusBiasSummary, PrejudiceStats};
use crate::sentence_bias::defined_biases;
use crate::stats::{mean, proportion_ci, two_sample_test, DEFAULT_LEVEL};
use crate::word_bias::{usable_distances, ShareDifference};

pub const REPORT_FORMAT: &str = "aigcbias-report";
pub const REPORT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sorts object keys recursively, whatever map type serde_json was built with.
fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&sort_keys(serde_json::to_value(value)?))? + "\n")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSection {
    pub summary: CorpusBiasSummary,
    pub pairs: usize,
    pub dropped: usize,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
    pub share_diffs: Vec<ShareDifference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSection {
    pub summary: CorpusBiasSummary,
    pub pairs: usize,
    /// Pairs with no group in common, left out of the mean.
    pub undefined: usize,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSection {
    pub sentiment: MetricSection,
    pub toxicity: MetricSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub sentences: u64,
    pub skipped_sentences: usize,
    pub chi_squared: Option<ChiSquared>,
    /// Associated topic ids per group label, plus `neutral`.
    pub topics: BTreeMap<String, Vec<usize>>,
}

impl TableSummary {
    fn from_corpus(c: &CorpusTopics) -> Self {
        let mut topics: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (t, a) in c.association.assignment.iter().enumerate() {
            if *a != Association::None {
                topics.entry(c.association.label(t)).or_default().push(t);
            }
        }
        Self {
            sentences: c.contingency.total(),
            skipped_sentences: c.skipped_sentences,
            chi_squared: c.chi_squared.clone(),
            topics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSection {
    pub summary: CorpusBiasSummary,
    pub pairs: usize,
    pub dropped: usize,
    pub prejudice: BTreeMap<String, PrejudiceStats>,
    pub generated_table: TableSummary,
    pub reference_table: TableSummary,
    pub shared_table: Option<TableSummary>,
    /// Association CSV written alongside the report, relative to it.
    pub association_export: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptDelta {
    pub metric: String,
    pub unbiased_mean: f64,
    pub biased_mean: f64,
    /// Biased minus unbiased.
    pub delta: f64,
    /// Two-sample test; absent when either side has fewer than two values.
    pub p: Option<f64>,
    pub n_unbiased: usize,
    pub n_biased: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefusalRate {
    pub refused: usize,
    pub n: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl RefusalRate {
    pub fn new(refused: usize, n: usize) -> Result<Self> {
        let e = proportion_ci(refused, n, DEFAULT_LEVEL)?;
        Ok(Self {
            refused,
            n,
            rate: e.mean,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSection {
    pub deltas: Vec<PromptDelta>,
    pub refusal_rate: Option<RefusalRate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub burn_in: usize,
    pub sample_sweeps: usize,
    pub infer_burn_in: usize,
    pub infer_samples: usize,
    pub vocabulary_size: usize,
    pub training_docs: usize,
    pub counts_sha256: String,
}

impl ModelProvenance {
    pub fn from_model(model: &crate::topics::TopicModel) -> Self {
        let p = model.params();
        let mut bytes = Vec::with_capacity(model.topic_word_counts().len() * 8);
        for c in model.topic_word_counts() {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        Self {
            k: p.k,
            alpha: p.alpha,
            beta: p.beta,
            seed: p.seed,
            burn_in: p.burn_in,
            sample_sweeps: p.sample_sweeps,
            infer_burn_in: p.infer_burn_in,
            infer_samples: p.infer_samples,
            vocabulary_size: model.vocab_size(),
            training_docs: model.header().training_docs,
            counts_sha256: sha256_hex(&bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub lexicon_sha256: String,
    /// Input file name → content hash.
    pub inputs: BTreeMap<String, String>,
    /// Role (`sentiment`, `toxicity`) → scorer name.
    pub scorers: BTreeMap<String, String>,
    pub model: Option<ModelProvenance>,
    pub shared_association: bool,
    pub stopwords: usize,
    pub abbreviations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub generator: String,
    pub scheme: Scheme,
    pub word: Option<WordSection>,
    pub sentence: Option<SentenceSection>,
    pub document: Option<DocumentSection>,
    pub prompts: Option<PromptSection>,
    pub provenance: Provenance,
}

/// Everything written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub reports: Vec<BiasReport>,
}

impl ReportFile {
    pub fn new(mut reports: Vec<BiasReport>) -> Self {
        reports.sort_by(|a, b| a.generator.cmp(&b.generator));
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            reports,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, to_canonical_json(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        if file.format != REPORT_FORMAT || file.version != REPORT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: unsupported report format {} v{}",
                path.display(),
                file.format,
                file.version
            )));
        }
        Ok(file)
    }
}

/// Level outputs of one generated corpus.
#[derive(Debug, Clone, Default)]
pub struct LevelRun {
    pub word: Option<WordLevel>,
    pub sentence: Option<SentenceLevel>,
    pub document: Option<DocumentLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Levels {
    pub word: bool,
    pub sentence: bool,
    pub document: bool,
}

impl Levels {
    pub const ALL: Levels = Levels {
        word: true,
        sentence: true,
        document: true,
    };
}

pub struct ReportInputs<'a> {
    pub generator: String,
    pub scheme: Scheme,
    pub required: Levels,
    pub run: &'a LevelRun,
    /// Same generator under the biased prompt, with `(refused, total)`.
    pub biased: Option<(&'a LevelRun, Option<(usize, usize)>)>,
    pub association_export: Option<String>,
    pub provenance: Provenance,
}

fn check(what: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Consistency(format!(
            "{what}: summary n = {got}, source has {expected}"
        )));
    }
    Ok(())
}

fn check_prejudice(level: &str, stats: &BTreeMap<String, PrejudiceStats>) -> Result<()> {
    for (g, s) in stats {
        let what = format!("{level} prejudice ({g})");
        check(&what, s.flags.len(), s.eligible)?;
        check(&what, s.deltas.len(), s.n_flagged)?;
        check(&what, s.n_flagged, s.mean_delta.as_ref().map_or(0, |d| d.n))?;
    }
    Ok(())
}

/// Copy without the per-pair vectors, which are not serialized.
fn published(stats: &BTreeMap<String, PrejudiceStats>) -> BTreeMap<String, PrejudiceStats> {
    stats
        .iter()
        .map(|(g, s)| {
            let mut s = s.clone();
            s.flags.clear();
            s.deltas.clear();
            (g.clone(), s)
        })
        .collect()
}

fn metric_section(name: &str, m: &ScoredMetric) -> Result<MetricSection> {
    let defined = defined_biases(&m.results).len();
    check(name, defined, m.summary.n)?;
    check_prejudice(name, &m.prejudice)?;
    Ok(MetricSection {
        summary: m.summary.clone(),
        pairs: m.results.len(),
        undefined: m.results.len() - defined,
        prejudice: published(&m.prejudice),
    })
}

fn push_delta(out: &mut Vec<PromptDelta>, metric: String, unbiased: &[f64], biased: &[f64]) {
    let (Some(mu), Some(mb)) = (mean(unbiased), mean(biased)) else {
        return;
    };
    out.push(PromptDelta {
        metric,
        unbiased_mean: mu,
        biased_mean: mb,
        delta: mb - mu,
        p: two_sample_test(biased, unbiased).ok(),
        n_unbiased: unbiased.len(),
        n_biased: biased.len(),
    });
}

fn prejudice_deltas(
    out: &mut Vec<PromptDelta>,
    level: &str,
    u: &BTreeMap<String, PrejudiceStats>,
    b: &BTreeMap<String, PrejudiceStats>,
) {
    for (g, su) in u {
        if let Some(sb) = b.get(g) {
            push_delta(
                out,
                format!("{level}_prejudice_proportion.{g}"),
                &su.indicators(),
                &sb.indicators(),
            );
            push_delta(out, format!("{level}_prejudice_delta.{g}"), &su.deltas, &sb.deltas);
        }
    }
}

/// Biased-minus-unbiased differences for every metric both runs produced.
pub fn prompt_deltas(unbiased: &LevelRun, biased: &LevelRun) -> Vec<PromptDelta> {
    let mut out = Vec::new();
    if let (Some(u), Some(b)) = (&unbiased.word, &biased.word) {
        push_delta(
            &mut out,
            "word".into(),
            &usable_distances(&u.results),
            &usable_distances(&b.results),
        );
        prejudice_deltas(&mut out, "word", &u.prejudice, &b.prejudice);
    }
    if let (Some(u), Some(b)) = (&unbiased.sentence, &biased.sentence) {
        for (name, mu, mb) in [
            ("sentiment", &u.sentiment, &b.sentiment),
            ("toxicity", &u.toxicity, &b.toxicity),
        ] {
            push_delta(
                &mut out,
                name.into(),
                &defined_biases(&mu.results),
                &defined_biases(&mb.results),
            );
            prejudice_deltas(&mut out, name, &mu.prejudice, &mb.prejudice);
        }
    }
    if let (Some(u), Some(b)) = (&unbiased.document, &biased.document) {
        let w = |d: &DocumentLevel| d.results.iter().filter_map(|r| r.w).collect::<Vec<_>>();
        push_delta(&mut out, "document".into(), &w(u), &w(b));
        prejudice_deltas(&mut out, "document", &u.prejudice, &b.prejudice);
    }
    out
}

/// Builds a report, failing closed on missing levels or inconsistent counts.
pub fn assemble_report(inputs: ReportInputs<'_>) -> Result<BiasReport> {
    let run = inputs.run;
    let missing = |name: &str| Error::MissingSection(format!("{name} (generator {})", inputs.generator));
    if inputs.required.word && run.word.is_none() {
        return Err(missing("word"));
    }
    if inputs.required.sentence && run.sentence.is_none() {
        return Err(missing("sentence"));
    }
    if inputs.required.document && run.document.is_none() {
        return Err(missing("document"));
    }
    if inputs.provenance.tool_version.is_empty() {
        return Err(missing("provenance"));
    }
    let word = run
        .word
        .as_ref()
        .map(|w| -> Result<WordSection> {
            let usable = usable_distances(&w.results).len();
            check("word", usable, w.summary.n)?;
            check_prejudice("word", &w.prejudice)?;
            Ok(WordSection {
                summary: w.summary.clone(),
                pairs: w.results.len(),
                dropped: w.results.len() - usable,
                prejudice: published(&w.prejudice),
                share_diffs: w.share_diffs.clone(),
            })
        })
        .transpose()?;
    let sentence = run
        .sentence
        .as_ref()
        .map(|s| -> Result<SentenceSection> {
            Ok(SentenceSection {
                sentiment: metric_section("sentiment", &s.sentiment)?,
                toxicity: metric_section("toxicity", &s.toxicity)?,
            })
        })
        .transpose()?;
    let document = run
        .document
        .as_ref()
        .map(|d| -> Result<DocumentSection> {
            let usable = d.results.iter().filter(|r| r.w.is_some()).count();
            check("document", usable, d.summary.n)?;
            check_prejudice("document", &d.prejudice)?;
            Ok(DocumentSection {
                summary: d.summary.clone(),
                pairs: d.results.len(),
                dropped: d.results.len() - usable,
                prejudice: published(&d.prejudice),
                generated_table: TableSummary::from_corpus(&d.generated),
                reference_table: TableSummary::from_corpus(&d.reference),
                shared_table: d.shared_association.as_ref().map(TableSummary::from_corpus),
                association_export: inputs.association_export.clone(),
            })
        })
        .transpose()?;
    let prompts = inputs
        .biased
        .map(|(b, refusal)| -> Result<PromptSection> {
            Ok(PromptSection {
                deltas: prompt_deltas(run, b),
                refusal_rate: refusal.map(|(k, n)| RefusalRate::new(k, n)).transpose()?,
            })
        })
        .transpose()?;
    Ok(BiasReport {
        generator: inputs.generator,
        scheme: inputs.scheme,
        word,
        sentence,
        document,
        prompts,
        provenance: inputs.provenance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omitted {
    pub panel: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub report_sha256: Option<String>,
    pub files: Vec<ManifestEntry>,
    pub omitted: Vec<Omitted>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, to_canonical_json(self)?).map_err(|e| Error::io(path, e))
    }
}

type Row = Vec<String>;

const SUMMARY_HEADER: [&str; 5] = ["generator", "mean", "ci_low", "ci_high", "n"];

fn summary_row(generator: &str, s: &CorpusBiasSummary) -> Row {
    vec![
        generator.into(),
        s.mean.to_string(),
        s.ci_low.to_string(),
        s.ci_high.to_string(),
        s.n.to_string(),
    ]
}

fn proportion_row(generator: &str, s: &PrejudiceStats) -> Option<Row> {
    let e = proportion_ci(s.n_flagged, s.eligible, DEFAULT_LEVEL).ok()?;
    Some(vec![
        generator.into(),
        e.mean.to_string(),
        e.ci_low.to_string(),
        e.ci_high.to_string(),
        e.n.to_string(),
    ])
}

struct Panels {
    order: Vec<String>,
    headers: BTreeMap<String, Vec<&'static str>>,
    rows: BTreeMap<String, Vec<Row>>,
}

impl Panels {
    fn declare(&mut self, name: String, header: &[&'static str]) {
        if !self.headers.contains_key(&name) {
            self.order.push(name.clone());
            self.headers.insert(name.clone(), header.to_vec());
            self.rows.insert(name, Vec::new());
        }
    }

    fn push(&mut self, name: &str, row: Option<Row>) {
        if let (Some(rows), Some(row)) = (self.rows.get_mut(name), row) {
            rows.push(row);
        }
    }

    fn prejudice(
        &mut self,
        prefix: &str,
        scheme: Scheme,
        generator: &str,
        stats: Option<&BTreeMap<String, PrejudiceStats>>,
    ) {
        for g in scheme.groups() {
            let s = stats.and_then(|m| m.get(*g));
            let prop = format!("{prefix}_prejudice_proportion_{g}");
            let delta = format!("{prefix}_prejudice_delta_{g}");
            self.declare(prop.clone(), &SUMMARY_HEADER);
            self.declare(delta.clone(), &SUMMARY_HEADER);
            self.push(&prop, s.and_then(|s| proportion_row(generator, s)));
            self.push(
                &delta,
                s.and_then(|s| s.mean_delta.as_ref()).map(|d| summary_row(generator, d)),
            );
        }
    }
}

/// Writes one CSV per figure panel into `dir` (created if needed). Panels
/// without any row are skipped and listed as omitted.
pub fn emit_figure_tables(report: &ReportFile, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut panels = Panels {
        order: Vec::new(),
        headers: BTreeMap::new(),
        rows: BTreeMap::new(),
    };
    for r in &report.reports {
        let gen = r.generator.as_str();
        let scheme = r.scheme;
        let sn = scheme.name();
        panels.declare(format!("{sn}_word_bias"), &SUMMARY_HEADER);
        panels.push(
            &format!("{sn}_word_bias"),
            r.word.as_ref().map(|w| summary_row(gen, &w.summary)),
        );
        panels.prejudice(
            &format!("{sn}_word"),
            scheme,
            gen,
            r.word.as_ref().map(|w| &w.prejudice),
        );
        let share = format!("{sn}_word_share_difference");
        panels.declare(
            share.clone(),
            &["generator", "group", "mean", "ci_low", "ci_high", "n", "p"],
        );
        for d in r.word.iter().flat_map(|w| &w.share_diffs) {
            panels.push(
                &share,
                Some(vec![
                    gen.into(),
                    d.group.clone(),
                    d.mean_diff.to_string(),
                    d.ci_low.to_string(),
                    d.ci_high.to_string(),
                    d.n.to_string(),
                    d.p.map_or(String::new(), |p| p.to_string()),
                ]),
            );
        }
        for (name, m) in [
            ("sentiment", r.sentence.as_ref().map(|s| &s.sentiment)),
            ("toxicity", r.sentence.as_ref().map(|s| &s.toxicity)),
        ] {
            let panel = format!("{sn}_{name}_bias");
            panels.declare(panel.clone(), &SUMMARY_HEADER);
            panels.push(&panel, m.map(|m| summary_row(gen, &m.summary)));
            panels.prejudice(&format!("{sn}_{name}"), scheme, gen, m.map(|m| &m.prejudice));
        }
        panels.declare(format!("{sn}_document_bias"), &SUMMARY_HEADER);
        panels.push(
            &format!("{sn}_document_bias"),
            r.document.as_ref().map(|d| summary_row(gen, &d.summary)),
        );
        panels.prejudice(
            &format!("{sn}_document"),
            scheme,
            gen,
            r.document.as_ref().map(|d| &d.prejudice),
        );
        let deltas = format!("{sn}_prompt_deltas");
        panels.declare(
            deltas.clone(),
            &[
                "generator",
                "metric",
                "unbiased_mean",
                "biased_mean",
                "delta",
                "p",
                "n_unbiased",
                "n_biased",
            ],
        );
        for d in r.prompts.iter().flat_map(|p| &p.deltas) {
            panels.push(
                &deltas,
                Some(vec![
                    gen.into(),
                    d.metric.clone(),
                    d.unbiased_mean.to_string(),
                    d.biased_mean.to_string(),
                    d.delta.to_string(),
                    d.p.map_or(String::new(), |p| p.to_string()),
                    d.n_unbiased.to_string(),
                    d.n_biased.to_string(),
                ]),
            );
        }
        let refusal = format!("{sn}_refusal_rate");
        panels.declare(refusal.clone(), &SUMMARY_HEADER);
        panels.push(
            &refusal,
            r.prompts.as_ref().and_then(|p| p.refusal_rate.as_ref()).map(|rr| {
                vec![
                    gen.into(),
                    rr.rate.to_string(),
                    rr.ci_low.to_string(),
                    rr.ci_high.to_string(),
                    rr.n.to_string(),
                ]
            }),
        );
    }
    let mut manifest = Manifest::default();
    for name in &panels.order {
        let rows = &panels.rows[name];
        if rows.is_empty() {
            manifest.omitted.push(Omitted {
                panel: name.clone(),
                reason: "no data for any generator".into(),
            });
            continue;
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&panels.headers[name])?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Consistency(e.to_string()))?;
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
        manifest.files.push(ManifestEntry {
            path: file,
            sha256: sha256_hex(&bytes),
            rows: rows.len(),
        });
    }
    Ok(manifest)
}
