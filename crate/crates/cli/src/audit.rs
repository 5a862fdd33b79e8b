use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aigcbias::corpus::{load_articles, pair_articles, Article, Origin, PromptKind};
use aigcbias::pipeline::{audit_document, audit_sentence, audit_word, drop_refused, TextResources};
use aigcbias::report::{
    assemble_report, BiasReport, LevelRun, Levels, ModelProvenance, Provenance, ReportFile, ReportInputs,
};
use aigcbias::sentence_bias::SentenceScorer;
use aigcbias::topics::TopicModel;
use aigcbias::word_bias::write_pair_csv;
use aigcbias::Error;

use crate::args::{merge_config, AuditOpts, PromptMode};
use crate::resources::{
    input_hashes, lda_params, load_generated, obtain_model, require, scheme, scorers, text_resources, thread_pool,
    topic_corpus,
};
use crate::{CliError, CliResult};

pub fn levels(word: bool, sentence: bool, document: bool) -> Levels {
    Levels {
        word,
        sentence,
        document,
    }
}

struct Context<'a> {
    levels: Levels,
    res: &'a TextResources,
    sentiment: &'a dyn SentenceScorer,
    toxicity: &'a dyn SentenceScorer,
    model: Option<&'a TopicModel>,
    shared_association: bool,
}

fn run_levels(ctx: &Context<'_>, reference: &[Article], generated: &[Article], label: &str) -> CliResult<LevelRun> {
    let (pairs, refused) = drop_refused(pair_articles(reference, generated).pairs);
    if pairs.is_empty() {
        return Err(CliError::Data(format!(
            "{label}: no article shares an id with the reference corpus"
        )));
    }
    if refused > 0 {
        log::info!("{label}: {refused} empty generations left out");
    }
    let with_label = |e: Error| CliError::Data(format!("{label}: {e}"));
    let mut run = LevelRun::default();
    if ctx.levels.word {
        run.word = Some(audit_word(&pairs, &ctx.res.lexicon).map_err(with_label)?);
    }
    if ctx.levels.sentence {
        run.sentence = Some(audit_sentence(&pairs, ctx.res, ctx.sentiment, ctx.toxicity).map_err(with_label)?);
    }
    if let (true, Some(model)) = (ctx.levels.document, ctx.model) {
        run.document = Some(audit_document(&pairs, model, ctx.res, ctx.shared_association).map_err(with_label)?);
    }
    Ok(run)
}

fn write_side_outputs(
    out: &Path,
    generator: &str,
    run: &LevelRun,
    model: Option<&TopicModel>,
) -> CliResult<Option<String>> {
    if let Some(w) = &run.word {
        write_pair_csv(&out.join(format!("word_pairs.{generator}.csv")), &w.results)?;
    }
    match (&run.document, model) {
        (Some(d), Some(m)) => {
            let name = format!("association.{generator}.csv");
            d.association_generated().write_csv(&out.join(&name), m)?;
            d.association_reference()
                .write_csv(&out.join(format!("association.{generator}.reference.csv")), m)?;
            Ok(Some(name))
        }
        _ => Ok(None),
    }
}

pub fn run(opts: AuditOpts, levels: Levels) -> CliResult {
    let config = opts.config.clone();
    let opts = merge_config(opts, config.as_deref())?;
    let seed = require(&opts.seed, "seed")?;
    let out = require(&opts.out, "out")?;
    let reference_path = require(&opts.reference, "reference")?;
    if opts.generated.is_empty() {
        return Err(CliError::Usage("at least one --generated corpus is required".into()));
    }
    let params = lda_params(&opts, seed)?;
    let (sentiment, toxicity) = scorers(&opts)?;
    let mode = opts.prompt_mode.unwrap_or(PromptMode::Unbiased);
    thread_pool(opts.jobs)?.install(|| {
        let reference = load_articles(&reference_path, Origin::Reference)?;
        let generated = load_generated(&opts.generated)?;
        let res = text_resources(&opts)?;
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let model = if levels.document {
            let model = obtain_model(&opts, &topic_corpus(&reference, &generated, &res), &params)?;
            model.write_top_words(&out.join("topic_words.csv"))?;
            Some(model)
        } else {
            None
        };
        let ctx = Context {
            levels,
            res: &res,
            sentiment: sentiment.as_ref(),
            toxicity: toxicity.as_ref(),
            model: model.as_ref(),
            shared_association: opts.shared_association,
        };
        let mut inputs: Vec<&Path> = vec![&reference_path];
        inputs.extend(opts.generated.iter().map(|p| p.as_path()));
        let provenance = Provenance {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            lexicon_sha256: res.lexicon.fingerprint(),
            inputs: input_hashes(&inputs)?,
            scorers: if levels.sentence {
                BTreeMap::from([
                    ("sentiment".to_string(), sentiment.name().to_string()),
                    ("toxicity".to_string(), toxicity.name().to_string()),
                ])
            } else {
                BTreeMap::new()
            },
            model: model.as_ref().map(ModelProvenance::from_model),
            shared_association: opts.shared_association,
            stopwords: res.stopwords.len(),
            abbreviations: res.text.abbreviation_count(),
        };
        let primary_kind = match mode {
            PromptMode::Unbiased => PromptKind::Unbiased,
            PromptMode::Biased => PromptKind::Biased,
        };
        let mut reports: Vec<BiasReport> = Vec::new();
        for (generator, kinds) in &generated {
            let Some(primary) = kinds.get(&primary_kind) else {
                log::warn!("{generator}: no {} articles, skipped", primary_kind.as_str());
                continue;
            };
            let run = run_levels(&ctx, &reference, primary, generator)?;
            let biased = match (mode, kinds.get(&PromptKind::Biased)) {
                (PromptMode::Unbiased, Some(b)) => {
                    let refused = b.iter().filter(|a| a.body.trim().is_empty()).count();
                    Some((
                        run_levels(&ctx, &reference, b, &format!("{generator} (biased)"))?,
                        (refused, b.len()),
                    ))
                }
                _ => None,
            };
            let export = write_side_outputs(&out, generator, &run, model.as_ref())?;
            reports.push(assemble_report(ReportInputs {
                generator: generator.clone(),
                scheme: scheme(&opts),
                required: levels,
                run: &run,
                biased: biased.as_ref().map(|(r, refusal)| (r, Some(*refusal))),
                association_export: export,
                provenance: provenance.clone(),
            })?);
            print_summary(generator, reports.last().expect("just pushed"));
        }
        if reports.is_empty() {
            return Err(CliError::Data(format!(
                "no generator has {} articles",
                primary_kind.as_str()
            )));
        }
        let path = out.join("report.json");
        ReportFile::new(reports).write(&path)?;
        println!("report written to {}", path.display());
        Ok(())
    })
}

fn print_summary(generator: &str, r: &BiasReport) {
    let line = |name: &str, s: &aigcbias::prejudice::CorpusBiasSummary| {
        println!(
            "{generator} {name}: {:.4} [{:.4}, {:.4}] n = {}",
            s.mean, s.ci_low, s.ci_high, s.n
        )
    };
    if let Some(w) = &r.word {
        line("word", &w.summary);
    }
    if let Some(s) = &r.sentence {
        line("sentiment", &s.sentiment.summary);
        line("toxicity", &s.toxicity.summary);
    }
    if let Some(d) = &r.document {
        line("document", &d.summary);
    }
    if let Some(rr) = r.prompts.as_ref().and_then(|p| p.refusal_rate.as_ref()) {
        println!("{generator} refusal rate: {:.4} ({} of {})", rr.rate, rr.refused, rr.n);
    }
}
