use std::fs;

use aigcbias::corpus::{load_articles, write_articles, Origin, PromptKind};
use aigcbias::report::to_canonical_json;
use aigcbias::Error;
use aigcbias_llm::{refusal_rate, Cache, Client, DecodingParams, EndpointConfig, PromptSpec, RefusalDetector};
use serde_json::json;

use crate::args::{merge_config, GenerateArgs, PromptMode};
use crate::resources::require;
use crate::{CliError, CliResult};

pub fn run(args: GenerateArgs) -> CliResult {
    let config = args.config.clone();
    let args = merge_config(args, config.as_deref())?;
    let reference = require(&args.reference, "reference")?;
    let url = require(&args.endpoint_url, "endpoint-url")?;
    let out = require(&args.out, "out")?;
    let endpoint_id = args.endpoint_id.clone().unwrap_or_else(|| "endpoint".into());
    let generator = args.generator.clone().unwrap_or_else(|| endpoint_id.clone());
    if generator.contains(['/', '\\']) || generator.starts_with('.') {
        return Err(CliError::Usage(format!(
            "generator name `{generator}` is not a plain file name"
        )));
    }
    let kind = match args.prompt_mode.unwrap_or(PromptMode::Unbiased) {
        PromptMode::Unbiased => PromptKind::Unbiased,
        PromptMode::Biased => PromptKind::Biased,
    };
    let mut endpoint = EndpointConfig::new(
        endpoint_id,
        url,
        args.model_name.clone().unwrap_or_else(|| "default".into()),
    );
    endpoint.api_key_env = args.api_key_env.clone();
    if let Some(n) = args.concurrency {
        endpoint.concurrency = n.max(1);
    }
    if let Some(n) = args.max_attempts {
        endpoint.max_attempts = n.max(1);
    }
    if let Some(ms) = args.backoff_ms {
        endpoint.backoff_base_ms = ms;
    }
    let mut params = DecodingParams::default();
    if let Some(t) = args.temperature {
        params.temperature = t;
    }
    if let Some(m) = args.max_tokens {
        params.max_tokens = m;
    }
    let mut detector = RefusalDetector::default();
    if let Some(p) = &args.refusal_patterns {
        detector.extend_from_file(p)?;
    }
    let cache = args.cache.as_deref().map(Cache::open).transpose()?;

    let articles = load_articles(&reference, Origin::Reference)?;
    let prompts = articles
        .iter()
        .map(|a| PromptSpec::new(a.id.clone(), a.headline.clone(), kind))
        .collect::<Result<Vec<_>, _>>()?;
    let client = Client::new(endpoint, params, cache, detector)?;
    let mut records = Vec::with_capacity(prompts.len());
    let mut failures = Vec::new();
    for (p, r) in prompts.iter().zip(client.generate_all(&prompts)) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(format!("{}: {e}", p.id)),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Data(format!(
            "{} of {} generations failed; first: {}",
            failures.len(),
            prompts.len(),
            failures[0]
        )));
    }
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let generated: Vec<_> = records.iter().map(|r| r.to_article(&generator)).collect();
    let path = out.join(format!("{generator}.{}.jsonl", kind.as_str()));
    write_articles(&path, &generated)?;
    let rate = refusal_rate(&records)?;
    let summary = json!({
        "generator": generator,
        "prompt_kind": kind.as_str(),
        "endpoint_id": client.endpoint().id,
        "model": client.endpoint().model,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "n": records.len(),
        "refused": records.iter().filter(|r| r.refused).count(),
        "refusal_rate": rate,
    });
    let summary_path = out.join(format!("{generator}.{}.generation.json", kind.as_str()));
    fs::write(&summary_path, to_canonical_json(&summary)?).map_err(|e| Error::io(&summary_path, e))?;
    println!(
        "{}: {} articles, refusal rate {:.4} [{:.4}, {:.4}], {} requests",
        path.display(),
        records.len(),
        rate.mean,
        rate.ci_low,
        rate.ci_high,
        client.requests_sent()
    );
    Ok(())
}
