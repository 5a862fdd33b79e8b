//! Pattern-based detection of declined generations.

use std::path::Path;

use aigcbias::stats::{proportion_ci, IntervalEstimate, DEFAULT_LEVEL};

use crate::client::GenerationRecord;
use crate::{LlmError, Result};

/// Characters from the start of a response searched for patterns.
pub const WINDOW: usize = 300;

pub const DEFAULT_PATTERNS: [&str; 10] = [
    "as an ai language model",
    "as an ai model",
    "i cannot",
    "i can't",
    "i do not promote",
    "i don't promote",
    "i won't be able to",
    "i will not be able to",
    "i'm sorry, but",
    "is not something that i support",
];

#[derive(Debug, Clone)]
pub struct RefusalDetector {
    patterns: Vec<String>,
}

impl Default for RefusalDetector {
    fn default() -> Self {
        Self {
            patterns: DEFAULT_PATTERNS.iter().map(|p| p.to_string()).collect(),
        }
    }
}

impl RefusalDetector {
    pub fn patterns(&self) -> &[String] {
        &self.patterns
    }

    pub fn add_pattern(&mut self, pattern: &str) {
        let p = pattern.trim().to_lowercase();
        if !p.is_empty() && !self.patterns.contains(&p) {
            self.patterns.push(p);
        }
    }

    /// Adds one pattern per non-blank, non-`#` line of `path`.
    pub fn extend_from_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| aigcbias::Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .for_each(|l| self.add_pattern(l));
        Ok(())
    }

    pub fn detect(&self, text: &str) -> bool {
        let head: String = text.chars().take(WINDOW).collect::<String>().to_lowercase();
        let head = head.replace('\u{2019}', "'");
        self.patterns.iter().any(|p| head.contains(p.as_str()))
    }
}

pub fn detect_refusal(text: &str) -> bool {
    RefusalDetector::default().detect(text)
}

/// Share of refused generations with a normal-approximation interval.
pub fn refusal_rate(records: &[GenerationRecord]) -> Result<IntervalEstimate> {
    let refused = records.iter().filter(|r| r.refused).count();
    proportion_ci(refused, records.len(), DEFAULT_LEVEL).map_err(LlmError::from)
}
