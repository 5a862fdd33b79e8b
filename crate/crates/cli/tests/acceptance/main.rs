//! Acceptance checks. Prints one `criterion N: PASS|FAIL` line each and
//! exits non-zero when any fails. Pass a criterion number to run only it.

#[path = "../common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use aigcbias::corpus::{pair_articles, Article, ArticlePair, Origin, PromptKind};
use aigcbias::doc_bias::{
    associate_topics, chi_squared_test, corpus_doc_bias, pair_doc_bias, standardized_residuals, Association,
    ContingencyMatrix, SR_THRESHOLD,
};
use aigcbias::lexicon::{GroupLexicon, Scheme};
use aigcbias::pipeline::{audit_document, audit_sentence, audit_word, TextResources};
use aigcbias::report::ReportFile;
use aigcbias::sentence_bias::FnScorer;
use aigcbias::special::{chi_squared_sf, normal_cdf};
use aigcbias::textproc::TextConfig;
use aigcbias::topics::{default_stopwords, select_k, train_lda, LdaParams, TopicModel};
use aigcbias::transport::{emd_lp, total_variation, wasserstein_01, zero_one_cost, Distribution};
use aigcbias_llm::mock::{MockEndpoint, Reply};
use aigcbias_llm::refusal::detect_refusal;
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

const Z95: f64 = 1.959_963_984_540_054;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn sample_sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Exact fraction with a positive denominator.
#[derive(Debug, Clone, Copy)]
struct Frac(i128, i128);

impl Frac {
    fn new(n: i128, d: i128) -> Self {
        let g = gcd(n.abs(), d.abs()).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Frac(s * n / g, s * d / g)
    }
    fn add(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 + o.0 * self.1, self.1 * o.1)
    }
    fn sub(self, o: Frac) -> Frac {
        Frac::new(self.0 * o.1 - o.0 * self.1, self.1 * o.1)
    }
    fn abs(self) -> Frac {
        Frac(self.0.abs(), self.1)
    }
    fn lt(self, o: Frac) -> bool {
        self.0 * o.1 < o.0 * self.1
    }
    fn f64(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_lp, mut worst_closed) = (0.0f64, 0.0f64);
    for m in 2..=6 {
        let cost = zero_one_cost::<f64>(m);
        for _ in 0..1000 {
            let (p, q) = (simplex(&mut rng, m), simplex(&mut rng, m));
            let w = match m {
                2 => ok(wasserstein_01(
                    &ok(Distribution::new(Scheme::Gender, p.clone()))?,
                    &ok(Distribution::new(Scheme::Gender, q.clone()))?,
                ))?,
                3 => ok(wasserstein_01(
                    &ok(Distribution::new(Scheme::Race, p.clone()))?,
                    &ok(Distribution::new(Scheme::Race, q.clone()))?,
                ))?,
                _ => total_variation(&p, &q),
            };
            worst_lp = worst_lp.max((w - ok(emd_lp(&p, &q, &cost))?).abs());
            let closed = match m {
                2 => Some((p[0] - q[0]).abs()),
                3 => Some(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)),
                _ => None,
            };
            if let Some(c) = closed {
                worst_closed = worst_closed.max((w - c).abs());
            }
        }
    }
    ensure(worst_lp <= 1e-9, || format!("LP oracle gap {worst_lp:e} > 1e-9"))?;
    ensure(worst_closed <= 4.0 * f64::EPSILON, || {
        format!("closed-form gap {worst_closed:e}")
    })?;
    let d = |s, p: &[f64]| Distribution::new(s, p.to_vec()).unwrap();
    let w2 = ok(wasserstein_01(
        &d(Scheme::Gender, &[0.75, 0.25]),
        &d(Scheme::Gender, &[0.5, 0.5]),
    ))?;
    ensure(w2 == 0.25, || format!("M=2 example gave {w2}"))?;
    let w3 = ok(wasserstein_01(
        &d(Scheme::Race, &[0.3, 0.2, 0.5]),
        &d(Scheme::Race, &[0.6, 0.2, 0.2]),
    ))?;
    ensure((w3 - 0.3).abs() <= 1e-15, || format!("M=3 example gave {w3}"))?;
    Ok(format!(
        "5000 pairs, max |W - LP| = {worst_lp:.1e}, max |W - closed form| = {worst_closed:.1e}"
    ))
}

const FEMALE_SENTENCES: [&str; 4] = [
    "She spoke today.",
    "The woman agreed.",
    "A mother waved.",
    "The girl smiled.",
];
const MALE_SENTENCES: [&str; 4] = [
    "He spoke today.",
    "The man agreed.",
    "A father waved.",
    "The boy smiled.",
];

fn counted_body(f: usize, m: usize) -> String {
    let mut parts = vec!["Markets closed higher on Monday."];
    parts.extend((0..f).map(|i| FEMALE_SENTENCES[i % 4]));
    parts.extend((0..m).map(|i| MALE_SENTENCES[i % 4]));
    parts.join(" ")
}

fn article(i: usize, body: String, origin: Origin) -> Article {
    Article {
        id: id(i),
        source: "fixture".into(),
        headline: headline(i),
        body,
        origin,
        generator: (origin == Origin::Generated).then(|| "fixture".into()),
        prompt_kind: if origin == Origin::Generated {
            PromptKind::Unbiased
        } else {
            PromptKind::None
        },
    }
}

fn criterion_2() -> Outcome {
    let plan: Vec<[usize; 4]> = (0..200)
        .map(|i| [i % 4, (i / 4) % 4, (i * 7 + 1) % 5, (i * 3 + 2) % 4])
        .collect();
    let pairs: Vec<ArticlePair> = plan
        .iter()
        .enumerate()
        .map(|(i, &[fh, mh, fo, mo])| ArticlePair {
            reference: article(i, counted_body(fo, mo), Origin::Reference),
            generated: article(i, counted_body(fh, mh), Origin::Generated),
        })
        .collect();
    let level = ok(audit_word(&pairs, &GroupLexicon::gender_default()))?;

    let share = |f: usize, m: usize| Frac::new(f as i128, (f + m) as i128);
    let mut sum = Frac(0, 1);
    let mut usable = 0;
    let (mut eligible, mut flagged, mut drop_sum) = (0, 0, Frac(0, 1));
    for &[fh, mh, fo, mo] in &plan {
        if fh + mh == 0 || fo + mo == 0 {
            continue;
        }
        usable += 1;
        sum = sum.add(share(fh, mh).sub(share(fo, mo)).abs());
        if fo > 0 {
            eligible += 1;
            if share(fh, mh).lt(share(fo, mo)) {
                flagged += 1;
                drop_sum = drop_sum.add(share(fh, mh).sub(share(fo, mo)));
            }
        }
    }
    let mean = Frac::new(sum.0, sum.1 * usable as i128).f64();
    let mean_drop = Frac::new(100 * drop_sum.0, drop_sum.1 * flagged as i128).f64();

    ensure(level.summary.n == usable, || {
        format!("n = {}, planted {usable}", level.summary.n)
    })?;
    ensure((level.summary.mean - mean).abs() <= 1e-12, || {
        format!("mean W {} vs hand {mean}", level.summary.mean)
    })?;
    let female = &level.prejudice["female"];
    ensure(female.eligible == eligible && female.n_flagged == flagged, || {
        format!(
            "flagged {}/{} vs planted {flagged}/{eligible}",
            female.n_flagged, female.eligible
        )
    })?;
    ensure(female.proportion == flagged as f64 / eligible as f64, || {
        "proportion differs".into()
    })?;
    let got_drop = female.mean_delta.as_ref().ok_or("no mean decrease")?.mean;
    ensure((got_drop - mean_drop).abs() <= 1e-12, || {
        format!("mean decrease {got_drop} vs hand {mean_drop}")
    })?;
    Ok(format!(
        "W = {mean:.12} over {usable} pairs, prejudice {flagged}/{eligible}, mean decrease {mean_drop:.6} points"
    ))
}

/// Planted sentences per article: `(group, sentiment, toxicity)` with
/// group 0 female, 1 male, 2 neutral.
fn scripted_articles(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<(usize, f64, f64)>, Vec<(usize, f64, f64)>)> {
    let side = |rng: &mut ChaCha8Rng| {
        let len = rng.random_range(1..8);
        (0..len)
            .map(|_| {
                let g = rng.random_range(0..3);
                (g, rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0))
            })
            .collect::<Vec<_>>()
    };
    (0..n).map(|_| (side(rng), side(rng))).collect()
}

fn scripted_text(pair: usize, side: &str, sentences: &[(usize, f64, f64)]) -> (String, Vec<String>) {
    let texts: Vec<String> = sentences
        .iter()
        .enumerate()
        .map(|(j, (g, _, _))| format!("{} noted item{pair}{side}{j}.", ["She", "He", "It"][*g]))
        .collect();
    (texts.join(" "), texts)
}

fn group_means(sentences: &[(usize, f64, f64)], pick: fn(&(usize, f64, f64)) -> f64) -> [Option<f64>; 2] {
    let mut out = [None; 2];
    for (g, slot) in out.iter_mut().enumerate() {
        let v: Vec<f64> = sentences.iter().filter(|s| s.0 == g).map(pick).collect();
        if !v.is_empty() {
            *slot = Some(v.iter().sum::<f64>() / v.len() as f64);
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let planted = scripted_articles(&mut rng, 60);
    let mut sentiment = HashMap::new();
    let mut toxicity = HashMap::new();
    let mut pairs = Vec::new();
    for (i, (gen, refr)) in planted.iter().enumerate() {
        let (gb, gt) = scripted_text(i, "g", gen);
        let (rb, rt) = scripted_text(i, "r", refr);
        for (texts, side) in [(&gt, gen), (&rt, refr)] {
            for (t, s) in texts.iter().zip(side) {
                sentiment.insert(t.clone(), s.1);
                toxicity.insert(t.clone(), s.2);
            }
        }
        pairs.push(ArticlePair {
            reference: article(i, rb, Origin::Reference),
            generated: article(i, gb, Origin::Generated),
        });
    }
    let res = TextResources {
        text: TextConfig::default(),
        lexicon: GroupLexicon::gender_default(),
        stopwords: default_stopwords(),
    };
    let lookup = |table: HashMap<String, f64>, shift: f64| {
        FnScorer::new("scripted", (-1e6, 1e6), move |s: &str| table[s.trim()] + shift)
    };
    let level = ok(audit_sentence(
        &pairs,
        &res,
        &lookup(sentiment.clone(), 0.0),
        &lookup(toxicity.clone(), 0.0),
    ))?;

    let mut checked = 0;
    for (metric, pick, got) in [
        (
            "sentiment",
            (|s: &(usize, f64, f64)| s.1) as fn(&(usize, f64, f64)) -> f64,
            &level.sentiment,
        ),
        ("toxicity", |s: &(usize, f64, f64)| s.2, &level.toxicity),
    ] {
        let mut biases = Vec::new();
        let mut by_group: [Vec<(f64, f64)>; 2] = [Vec::new(), Vec::new()];
        for (gen, refr) in &planted {
            let (h, o) = (group_means(gen, pick), group_means(refr, pick));
            let mut s: Option<f64> = None;
            for g in 0..2 {
                if let (Some(a), Some(b)) = (h[g], o[g]) {
                    s = Some(s.map_or((a - b).abs(), |x| x.max((a - b).abs())));
                    by_group[g].push((a, b));
                }
            }
            biases.extend(s);
        }
        let n = biases.len();
        let mean = biases.iter().sum::<f64>() / n as f64;
        let half = Z95 * sample_sd(&biases) / (n as f64).sqrt();
        let summary = &got.summary;
        ensure(summary.n == n, || format!("{metric}: n {} vs {n}", summary.n))?;
        for (what, a, b) in [
            ("mean", summary.mean, mean),
            ("ci_low", summary.ci_low, mean - half),
            ("ci_high", summary.ci_high, mean + half),
        ] {
            ensure((a - b).abs() <= 1e-12, || format!("{metric} {what}: {a} vs hand {b}"))?;
            checked += 1;
        }
        for (g, label) in ["female", "male"].iter().enumerate() {
            let flagged: Vec<f64> = by_group[g]
                .iter()
                .filter(|(a, b)| if metric == "sentiment" { a < b } else { a > b })
                .map(|(a, b)| a - b)
                .collect();
            let stats = &got.prejudice[*label];
            ensure(
                stats.eligible == by_group[g].len() && stats.n_flagged == flagged.len(),
                || format!("{metric} {label}: flagged {}/{}", stats.n_flagged, stats.eligible),
            )?;
            let hand = flagged.iter().sum::<f64>() / flagged.len() as f64;
            let got_delta = stats.mean_delta.as_ref().ok_or("no flagged pairs")?.mean;
            ensure((got_delta - hand).abs() <= 1e-12, || {
                format!("{metric} {label} delta {got_delta} vs {hand}")
            })?;
            checked += 1;
        }
    }

    let base: Vec<Option<f64>> = level.sentiment.results.iter().map(|r| r.bias).collect();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = rng.random_range(-5.0..5.0);
        let shifted = ok(audit_sentence(
            &pairs,
            &res,
            &lookup(sentiment.clone(), c),
            &lookup(toxicity.clone(), c),
        ))?;
        for (a, b) in base.iter().zip(&shifted.sentiment.results) {
            match (a, b.bias) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                _ => return Err("definedness changed under a shift".into()),
            }
        }
    }
    ensure(worst <= 1e-12, || format!("shift changed S by {worst:e}"))?;
    Ok(format!(
        "{checked} aggregates match to 1e-12 over {} pairs; 100 shifts move S by at most {worst:.1e}",
        pairs.len()
    ))
}

fn criterion_4() -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/special_functions.json");
    let fixtures: Value = ok(serde_json::from_str(&ok(fs::read_to_string(&path))?))?;
    let num = |v: &Value| match v {
        Value::String(s) => s.parse::<f64>().unwrap(),
        other => other.as_f64().unwrap(),
    };
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    let mut count = 0;
    for c in fixtures["normal_cdf"].as_array().ok_or("missing normal_cdf")? {
        worst = worst.max(rel(normal_cdf(num(&c["x"])), num(&c["cdf"])));
        count += 1;
    }
    for c in fixtures["chi_squared_sf"].as_array().ok_or("missing chi_squared_sf")? {
        worst = worst.max(rel(chi_squared_sf(num(&c["stat"]), num(&c["dof"])), num(&c["sf"])));
        count += 1;
    }
    ensure(worst <= 1e-10, || format!("fixture relative error {worst:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_table = 0.0f64;
    for _ in 0..500 {
        let [a, b, c, d]: [u64; 4] = std::array::from_fn(|_| rng.random_range(1..2000));
        let table = ok(ContingencyMatrix::from_rows(
            Scheme::Gender,
            &[vec![a, b, 0], vec![c, d, 0]],
        ))?;
        let stat = ok(chi_squared_test(&table))?.stat;
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        let n = a + b + c + d;
        let closed = n * (a * d - b * c).powi(2) / ((a + b) * (c + d) * (a + c) * (b + d));
        worst_table = worst_table.max((stat - closed).abs() / closed.max(1.0));
    }
    ensure(worst_table <= 1e-9, || format!("2x2 relative gap {worst_table:e}"))?;
    Ok(format!(
        "{count} fixtures within {worst:.1e} relative; 500 2x2 tables within {worst_table:.1e}"
    ))
}

/// Planted topic `k` puts 90% of its mass evenly on words `20k..20k+20`
/// and 10% evenly on all 60 words.
fn planted_phi(k: usize) -> Vec<f64> {
    (0..60)
        .map(|v| if v / 20 == k { 0.9 / 20.0 } else { 0.0 } + 0.1 / 60.0)
        .collect()
}

fn planted_lda_docs(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<Vec<String>> {
    (0..n)
        .map(|_| {
            let main = rng.random_range(0..3);
            (0..len)
                .map(|_| {
                    let topic = if rng.random_bool(0.8) {
                        main
                    } else {
                        rng.random_range(0..3)
                    };
                    let v = if rng.random_bool(0.9) {
                        20 * topic + rng.random_range(0..20)
                    } else {
                        rng.random_range(0..60)
                    };
                    format!("v{v:02}")
                })
                .collect()
        })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

const PERMS3: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let docs = planted_lda_docs(&mut rng, 500, 60);
    let heldout = planted_lda_docs(&mut rng, 100, 60);
    let params = LdaParams::new(3, 17);
    let model = ok(train_lda(&docs, &params))?;
    ensure(model.vocab_size() == 60, || {
        format!("vocabulary of {}", model.vocab_size())
    })?;
    let learned: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let dist = model.topic_word_distribution(k);
            (0..60)
                .map(|v| dist[model.word_id(&format!("v{v:02}")).unwrap() as usize])
                .collect()
        })
        .collect();
    let min_cos = PERMS3
        .iter()
        .map(|perm| {
            (0..3)
                .map(|k| cosine(&planted_phi(k), &learned[perm[k]]))
                .fold(1.0, f64::min)
        })
        .fold(0.0, f64::max);
    ensure(min_cos >= 0.9, || format!("worst matched cosine {min_cos:.4}"))?;

    let ppl = ok(model.perplexity(&heldout))?;
    let tokens: usize = heldout.iter().map(Vec::len).sum();
    let analytic = (-(tokens as f64) * (1.0f64 / 60.0).ln() / tokens as f64).exp();
    let uniform = ok(ok(TopicModel::uniform(params.clone(), model.vocabulary().to_vec()))?.perplexity(&heldout))?;
    ensure(
        (uniform - 60.0).abs() <= 1e-9 && (analytic - 60.0).abs() <= 1e-9,
        || format!("uniform perplexity {uniform}, analytic {analytic}"),
    )?;
    ensure(ppl < uniform, || {
        format!("trained perplexity {ppl} not below {uniform}")
    })?;

    let sel = ok(select_k(&docs, &[3, 30], &params))?;
    ensure(sel.chosen == 3, || {
        format!("select_k chose {} ({:?})", sel.chosen, sel.perplexities)
    })?;
    Ok(format!(
        "min matched cosine {min_cos:.4}, perplexity {ppl:.2} < {uniform:.0}, select_k {:?} -> {}",
        sel.perplexities, sel.chosen
    ))
}

const PLAIN: Profile = Profile {
    female: 0.35,
    male: 0.35,
    female_polar: &[],
    male_polar: &[],
    toxic: 0.0,
    sentences: 10,
};

const SKEWED: Profile = Profile {
    female: 0.2,
    male: 0.5,
    ..PLAIN
};

/// Learned topic → planted topic, by the planted block holding most of its mass.
fn planted_of(model: &TopicModel, world: &World) -> Vec<usize> {
    (0..model.k())
        .map(|k| {
            let dist = model.topic_word_distribution(k);
            let mass = |t: usize| -> f64 {
                (0..world.words_per_topic)
                    .filter_map(|i| model.word_id(&nonce(t, i)))
                    .map(|w| dist[w as usize])
                    .sum()
            };
            (0..world.topics())
                .max_by(|&a, &b| mass(a).total_cmp(&mass(b)))
                .unwrap()
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let world = World {
        per_group: 2,
        words_per_topic: 12,
    };
    let res = TextResources {
        text: TextConfig::default(),
        lexicon: GroupLexicon::gender_default(),
        stopwords: default_stopwords(),
    };
    let pairs: Vec<ArticlePair> = (0..200)
        .map(|i| ArticlePair {
            reference: article(i, body(&world, &PLAIN, 61, i), Origin::Reference),
            generated: article(i, body(&world, &SKEWED, 62, i), Origin::Generated),
        })
        .collect();
    let docs: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| [res.article_lemmas(&p.reference), res.article_lemmas(&p.generated)])
        .collect();
    let model = ok(train_lda(&docs, &LdaParams::new(world.topics(), 6)))?;
    let planted = planted_of(&model, &world);
    let mut sorted = planted.clone();
    sorted.sort();
    ensure(sorted == (0..world.topics()).collect::<Vec<_>>(), || {
        format!("learned topics map to planted {planted:?}")
    })?;

    let level = ok(audit_document(&pairs, &model, &res, false))?;
    let want = |k: usize| match planted[k] / world.per_group {
        2 => Association::Neutral,
        g => Association::Group(g),
    };
    let mut min_sr = f64::INFINITY;
    for (side, assoc) in [
        ("generated", level.association_generated()),
        ("reference", level.association_reference()),
    ] {
        for k in 0..model.k() {
            ensure(assoc.assignment[k] == want(k), || {
                format!(
                    "{side} topic {k} associated {:?}, planted {:?}",
                    assoc.assignment[k],
                    want(k)
                )
            })?;
            let col = (planted[k] / world.per_group).min(2);
            min_sr = min_sr.min(assoc.sr.get(k, col));
        }
    }
    ensure(min_sr > SR_THRESHOLD, || format!("planted cell residual {min_sr}"))?;

    let mut ws = Vec::new();
    for p in &pairs {
        let female_share = |a: &Article| {
            let t = model.infer_doc_topics(&res.article_lemmas(a)).t;
            let mass = |g: usize| {
                (0..model.k())
                    .filter(|&k| planted[k] / world.per_group == g)
                    .map(|k| t[k])
                    .sum::<f64>()
            };
            mass(0) / (mass(0) + mass(1))
        };
        ws.push((female_share(&p.generated) - female_share(&p.reference)).abs());
    }
    let oracle = ws.iter().sum::<f64>() / ws.len() as f64;
    ensure((level.summary.mean - oracle).abs() <= 1e-9, || {
        format!("pipeline W_doc {} vs recomputed {oracle}", level.summary.mean)
    })?;

    // Planted tables and topic mixtures in twentieths, checked against exact fractions.
    let rows: Vec<Vec<u64>> = vec![
        vec![40, 0, 0],
        vec![30, 0, 0],
        vec![0, 35, 0],
        vec![0, 25, 0],
        vec![0, 0, 50],
        vec![0, 0, 20],
    ];
    let assoc = associate_topics(
        &standardized_residuals(&ok(ContingencyMatrix::from_rows(Scheme::Gender, &rows))?),
        Scheme::Gender,
        SR_THRESHOLD,
    );
    let planted_assoc: Vec<Association> = (0..6)
        .map(|k| {
            if k < 4 {
                Association::Group(k / 2)
            } else {
                Association::Neutral
            }
        })
        .collect();
    ensure(assoc.assignment == planted_assoc, || {
        format!("table association {:?}", assoc.assignment)
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mixture = |rng: &mut ChaCha8Rng| -> Vec<i128> {
        let mut t = vec![1i128; 6];
        for _ in 0..14 {
            t[rng.random_range(0..6)] += 1;
        }
        t
    };
    let mut results = Vec::new();
    let mut hand = Frac(0, 1);
    for i in 0..50 {
        let (th, to) = (mixture(&mut rng), mixture(&mut rng));
        let f = |t: &[i128]| Frac::new(t[0] + t[1], t[0] + t[1] + t[2] + t[3]);
        hand = hand.add(f(&th).sub(f(&to)).abs());
        let as_f = |t: &[i128]| t.iter().map(|&x| x as f64 / 20.0).collect::<Vec<f64>>();
        results.push(ok(pair_doc_bias(&id(i), &as_f(&th), &as_f(&to), &assoc, &assoc))?);
    }
    let hand = Frac::new(hand.0, hand.1 * 50).f64();
    let got = ok(corpus_doc_bias(&results))?.mean;
    ensure((got - hand).abs() <= 1e-9, || {
        format!("planted W_doc {got} vs hand {hand}")
    })?;
    Ok(format!(
        "association exact on both corpora, min planted SR {min_sr:.1}; W_doc {:.6} matches recomputation; planted-mixture W_doc {got:.9} matches exact {hand:.9}",
        level.summary.mean
    ))
}

fn mock_reply(world: World, prompt: &str) -> Reply {
    let Some(i) = index_in(prompt) else {
        return Reply::Status(400);
    };
    if prompt.contains("Androcentrism") {
        if i % 5 == 0 {
            Reply::Content(include_str!("../fixtures/refusal.txt").trim().to_string())
        } else {
            Reply::Content(body(&world, &BIASED, 72, i))
        }
    } else {
        Reply::Content(body(&world, &UNBIASED, 71, i))
    }
}

fn checked_run(args: &[&str]) -> Result<(), String> {
    let o = run(args);
    ensure(o.status.success(), || {
        format!(
            "`{}` exited {:?}: {}",
            args[..2].join(" "),
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

fn protocol_run(root: &Path, url: &str, world: &World) -> Result<(Vec<u8>, Vec<u8>), String> {
    ok(fs::create_dir_all(root))?;
    let r = write(&root.join("reference.jsonl"), &reference(world, 60, 70));
    let (gen, cache, audit, figs) = (
        root.join("gen"),
        root.join("cache"),
        root.join("audit"),
        root.join("figs"),
    );
    for mode in ["unbiased", "biased"] {
        checked_run(&[
            "generate",
            "--reference",
            s(&r),
            "--endpoint-url",
            url,
            "--endpoint-id",
            "mock",
            "--prompt-mode",
            mode,
            "--out",
            s(&gen),
            "--cache",
            s(&cache),
            "--backoff-ms",
            "1",
        ])?;
    }
    checked_run(&[
        "audit",
        "all",
        "--reference",
        s(&r),
        "--generated",
        s(&gen.join("mock.unbiased.jsonl")),
        "--generated",
        s(&gen.join("mock.biased.jsonl")),
        "--seed",
        "5",
        "--k",
        "6",
        "--burn-in",
        "200",
        "--samples",
        "50",
        "--out",
        s(&audit),
    ])?;
    checked_run(&["report", "--input", s(&audit.join("report.json")), "--out", s(&figs)])?;
    Ok((
        ok(fs::read(audit.join("report.json")))?,
        ok(fs::read(figs.join("manifest.json")))?,
    ))
}

fn criterion_7() -> Outcome {
    let refusal = include_str!("../fixtures/refusal.txt");
    ensure(detect_refusal(refusal), || "quoted refusal not detected".into())?;
    let bodies: Vec<&str> = include_str!("../fixtures/news_bodies.txt").lines().collect();
    ensure(bodies.len() == 50, || format!("{} news bodies", bodies.len()))?;
    if let Some(b) = bodies.iter().find(|b| detect_refusal(b)) {
        return Err(format!("news body flagged as refusal: {b}"));
    }

    let world = World {
        per_group: 2,
        words_per_topic: 12,
    };
    let mock = ok(MockEndpoint::start(move |p| mock_reply(world, p)))?;
    let url = mock.url();
    let dir = ok(tempfile::tempdir())?;
    let (report_a, manifest_a) = protocol_run(&dir.path().join("a"), &url, &world)?;
    let (report_b, manifest_b) = protocol_run(&dir.path().join("b"), &url, &world)?;
    ensure(report_a == report_b, || "report.json differs between runs".into())?;
    ensure(manifest_a == manifest_b, || "manifest.json differs between runs".into())?;

    let file = ok(ReportFile::read(&dir.path().join("a/audit/report.json")))?;
    let prompts = file.reports[0].prompts.as_ref().ok_or("no prompt section")?;
    let rr = prompts.refusal_rate.as_ref().ok_or("no refusal rate")?;
    ensure(rr.refused == 12 && rr.n == 60, || {
        format!("refusals {}/{}", rr.refused, rr.n)
    })?;
    let mut expected = Vec::new();
    for level in ["word", "sentiment", "toxicity", "document"] {
        expected.push(level.to_string());
        for kind in ["proportion", "delta"] {
            for g in ["female", "male"] {
                expected.push(format!("{level}_prejudice_{kind}.{g}"));
            }
        }
    }
    for metric in &expected {
        let d = prompts
            .deltas
            .iter()
            .find(|d| &d.metric == metric)
            .ok_or_else(|| format!("no delta for {metric}"))?;
        ensure(
            d.delta.is_finite() && d.p.is_some_and(|p| (0.0..=1.0).contains(&p)),
            || format!("{metric}: delta {} p {:?}", d.delta, d.p),
        )?;
    }
    Ok(format!(
        "refusal fixture detected, 0/50 news bodies flagged; {} deltas with p-values, refusal rate {:.2}; reruns byte-identical",
        expected.len(),
        rr.rate
    ))
}

#[cfg(unix)]
fn children_peak_rss_bytes() -> Option<u64> {
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage fills the struct it is given.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, usage.as_mut_ptr()) };
    (rc == 0).then(|| {
        // SAFETY: initialised by the successful call above.
        let kb = unsafe { usage.assume_init() }.ru_maxrss;
        kb as u64 * 1024
    })
}

#[cfg(not(unix))]
fn children_peak_rss_bytes() -> Option<u64> {
    None
}

fn criterion_8() -> Outcome {
    let world = World {
        per_group: 17,
        words_per_topic: 20,
    };
    let dir = ok(tempfile::tempdir())?;
    let mut big = UNBIASED;
    big.sentences = 14;
    let mut refs = reference(&world, 500, 80);
    for (i, a) in refs.iter_mut().enumerate() {
        a.body = body(
            &world,
            &Profile {
                sentences: 14,
                ..REFERENCE
            },
            80,
            i,
        );
    }
    let gens: Vec<Article> = (0..500)
        .map(|i| {
            let mut a = article(i, body(&world, &big, 81, i), Origin::Generated);
            a.generator = Some("synthetic".into());
            a
        })
        .collect();
    ensure(pair_articles(&refs, &gens).pairs.len() == 500, || {
        "pairing failed".into()
    })?;
    let r = write(&dir.path().join("reference.jsonl"), &refs);
    let g = write(&dir.path().join("synthetic.jsonl"), &gens);
    let out = dir.path().join("audit");
    let start = Instant::now();
    checked_run(&[
        "audit",
        "all",
        "--reference",
        s(&r),
        "--generated",
        s(&g),
        "--seed",
        "1",
        "--k",
        "50",
        "--jobs",
        "4",
        "--out",
        s(&out),
    ])?;
    let elapsed = start.elapsed();
    let peak = children_peak_rss_bytes();
    ensure(elapsed < Duration::from_secs(300), || {
        format!("audit took {:.1} s", elapsed.as_secs_f64())
    })?;
    if let Some(p) = peak {
        ensure(p < 2 << 30, || format!("peak memory {} MiB", p >> 20))?;
    }
    let file = ok(ReportFile::read(&out.join("report.json")))?;
    let rep = &file.reports[0];
    ensure(
        rep.word.is_some() && rep.sentence.is_some() && rep.document.is_some(),
        || "missing level".into(),
    )?;
    let model = rep.provenance.model.as_ref().ok_or("no model provenance")?;
    ensure(
        model.k == 50 && model.burn_in == 800 && model.sample_sweeps == 200,
        || {
            format!(
                "model K {} with {} + {} sweeps",
                model.k, model.burn_in, model.sample_sweeps
            )
        },
    )?;
    Ok(format!(
        "500 pairs, K = 50 (800 + 200 sweeps), audit all in {:.1} s, peak child RSS {}",
        elapsed.as_secs_f64(),
        peak.map_or("unavailable".into(), |p| format!("{} MiB", p >> 20))
    ))
}

struct Criterion {
    n: u8,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let only: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria = [
        Criterion {
            n: 1,
            limit: Some(Duration::from_secs(5)),
            run: criterion_1,
        },
        Criterion {
            n: 2,
            limit: Some(Duration::from_secs(10)),
            run: criterion_2,
        },
        Criterion {
            n: 3,
            limit: None,
            run: criterion_3,
        },
        Criterion {
            n: 4,
            limit: None,
            run: criterion_4,
        },
        Criterion {
            n: 5,
            limit: Some(Duration::from_secs(60)),
            run: criterion_5,
        },
        Criterion {
            n: 6,
            limit: Some(Duration::from_secs(60)),
            run: criterion_6,
        },
        Criterion {
            n: 7,
            limit: None,
            run: criterion_7,
        },
        Criterion {
            n: 8,
            limit: Some(Duration::from_secs(300)),
            run: criterion_8,
        },
    ];
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.n)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if start.elapsed() > limit => {
                Err(format!("took {secs:.1} s, limit {} s", limit.as_secs()))
            }
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS ({secs:.2} s) {detail}", c.n),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL ({secs:.2} s) {why}", c.n);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
