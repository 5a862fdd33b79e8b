use std::fs;

use aigcbias::corpus::{load_articles, Origin};
use aigcbias::report::to_canonical_json;
use aigcbias::topics::{select_k as choose_k, train_lda};
use aigcbias::Error;

use crate::args::{merge_config, AuditOpts, SelectKArgs};
use crate::resources::{lda_params, load_generated, require, text_resources, thread_pool, topic_corpus};
use crate::CliResult;

fn corpus(opts: &AuditOpts) -> CliResult<Vec<Vec<String>>> {
    let reference = load_articles(&require(&opts.reference, "reference")?, Origin::Reference)?;
    let generated = load_generated(&opts.generated)?;
    let res = text_resources(opts)?;
    Ok(topic_corpus(&reference, &generated, &res))
}

pub fn train(opts: AuditOpts) -> CliResult {
    let config = opts.config.clone();
    let opts = merge_config(opts, config.as_deref())?;
    let seed = require(&opts.seed, "seed")?;
    let out = require(&opts.out, "out")?;
    let params = lda_params(&opts, seed)?;
    thread_pool(opts.jobs)?.install(|| {
        let docs = corpus(&opts)?;
        let model = train_lda(&docs, &params)?;
        let dir = out.join("model");
        model.save(&dir)?;
        model.write_top_words(&out.join("topic_words.csv"))?;
        println!(
            "trained K = {} on {} documents ({} words); model in {}",
            model.k(),
            docs.len(),
            model.vocab_size(),
            dir.display()
        );
        Ok(())
    })
}

pub fn select_k(args: SelectKArgs) -> CliResult {
    let config = args.opts.config.clone();
    let opts = merge_config(args.opts, config.as_deref())?;
    let seed = require(&opts.seed, "seed")?;
    let base = lda_params(&opts, seed)?;
    thread_pool(opts.jobs)?.install(|| {
        let docs = corpus(&opts)?;
        let sel = choose_k(&docs, &args.candidates, &base)?;
        for (k, p) in &sel.perplexities {
            println!("K = {k}: perplexity {p:.4}");
        }
        println!("chosen K = {}", sel.chosen);
        if let Some(out) = &opts.out {
            fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let path = out.join("k_selection.json");
            fs::write(&path, to_canonical_json(&sel)?).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    })
}
