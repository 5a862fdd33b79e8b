//! Command-line surface and config-file merging.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "aigcbias",
    version,
    about = "Gender and racial bias audit of generated news against reference articles"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate article corpora and report pairing coverage.
    Ingest(IngestArgs),
    /// Generate articles for every reference headline through a chat endpoint.
    Generate(GenerateArgs),
    /// Train a topic model or choose K by held-out perplexity.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Run bias metrics and write report.json.
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Turn report.json into figure tables and a manifest.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum TopicsCommand {
    Train(AuditOpts),
    SelectK(SelectKArgs),
}

#[derive(Debug, Subcommand)]
pub enum AuditCommand {
    Word(AuditOpts),
    Sentence(AuditOpts),
    Document(AuditOpts),
    All(AuditOpts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeArg {
    Gender,
    Race,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Unbiased,
    Biased,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub generated: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectKArgs {
    /// Comma-separated K values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub candidates: Vec<usize>,
    #[command(flatten)]
    pub opts: AuditOpts,
}

/// Options shared by `audit` and `topics`; every field may also come from
/// the `--config` TOML file (kebab-case keys). Flags win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct AuditOpts {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Generated corpus file; repeat for several generators or prompt modes.
    #[arg(long)]
    pub generated: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of topics when training.
    #[arg(long)]
    pub k: Option<usize>,
    /// Trained model directory; skips training.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// `lexicon` or `external:COMMAND`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// `lexicon` or `external:COMMAND`.
    #[arg(long)]
    pub toxicity_scorer: Option<String>,
    /// Which generated articles are audited; `unbiased` also compares
    /// against biased-prompt articles when present.
    #[arg(long, value_enum)]
    pub prompt_mode: Option<PromptMode>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Use one pooled association table for both sides of every pair.
    #[arg(long)]
    pub shared_association: bool,
    #[arg(long)]
    pub gender_words: Option<PathBuf>,
    #[arg(long)]
    pub occupations: Option<PathBuf>,
    #[arg(long)]
    pub names: Option<PathBuf>,
    #[arg(long)]
    pub abbreviations: Option<PathBuf>,
    #[arg(long)]
    pub lemma_exceptions: Option<PathBuf>,
    #[arg(long)]
    pub polarity: Option<PathBuf>,
    #[arg(long)]
    pub toxicity_lexicon: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenerateArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Reference corpus supplying ids and headlines.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub endpoint_url: Option<String>,
    #[arg(long)]
    pub endpoint_id: Option<String>,
    #[arg(long)]
    pub model_name: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Generator label written into articles; defaults to the endpoint id.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long, value_enum)]
    pub prompt_mode: Option<PromptMode>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long)]
    pub max_attempts: Option<u32>,
    #[arg(long)]
    pub backoff_ms: Option<u64>,
    /// Extra refusal patterns, one per line.
    #[arg(long)]
    pub refusal_patterns: Option<PathBuf>,
}

const PATH_KEYS: [&str; 14] = [
    "reference",
    "generated",
    "model",
    "out",
    "cache",
    "gender-words",
    "occupations",
    "names",
    "abbreviations",
    "lemma-exceptions",
    "polarity",
    "toxicity-lexicon",
    "refusal-patterns",
    "input",
];

fn absent(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Bool(b) => !b,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

fn resolve(v: Value, base: &Path) -> Value {
    match v {
        Value::String(s) if Path::new(&s).is_relative() => Value::String(base.join(s).to_string_lossy().into_owned()),
        Value::Array(items) => Value::Array(items.into_iter().map(|i| resolve(i, base)).collect()),
        other => other,
    }
}

/// Fills options missing from the command line with values from `config`.
/// Relative paths in the file are taken relative to the file.
pub fn merge_config<T>(flags: T, config: Option<&Path>) -> Result<T, CliError>
where
    T: Serialize + for<'de> Deserialize<'de>,
{
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let file: Value = serde_json::to_value(table).map_err(|e| CliError::Usage(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut merged = serde_json::to_value(&flags).map_err(|e| CliError::Usage(e.to_string()))?;
    let obj = merged.as_object_mut().expect("options serialize to an object");
    for (key, value) in file.as_object().into_iter().flatten() {
        if !obj.contains_key(key) {
            return Err(CliError::Usage(format!("{}: unknown key `{key}`", path.display())));
        }
        if absent(&obj[key]) {
            let value = if PATH_KEYS.contains(&key.as_str()) {
                resolve(value.clone(), base)
            } else {
                value.clone()
            };
            obj.insert(key.clone(), value);
        }
    }
    serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
