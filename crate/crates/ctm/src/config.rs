//! TOML run configuration. Command-line flags override values read here, which
//! in turn override built-in defaults.

use std::path::{Path, PathBuf};

use ctm_core::corpus::{parse_stopwords, DEFAULT_STOPWORDS};
use ctm_core::{EctmConfig, LldaConfig, PreprocessRules};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every stage derives its own seed from it.
    pub seed: Option<u64>,
    pub preprocess: PreprocessSection,
    /// The `seed` field is ignored in favour of the root seed.
    pub llda: LldaConfig,
    pub prior: PriorSection,
    /// `num_topics` and `embed_dim` are taken from the reference and the
    /// embedding file; `seed` is derived from the root seed.
    pub ectm: EctmConfig,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub max_doc_frequency: f64,
    pub min_word_count: usize,
    pub lowercase: bool,
    /// Replaces the built-in English list.
    pub stopwords_file: Option<PathBuf>,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let rules = PreprocessRules::default();
        PreprocessSection {
            max_doc_frequency: rules.max_doc_frequency,
            min_word_count: rules.min_word_count,
            lowercase: rules.lowercase,
            stopwords_file: None,
        }
    }
}

impl PreprocessSection {
    pub fn rules(&self) -> Result<PreprocessRules> {
        let stopwords = match &self.stopwords_file {
            Some(p) => parse_stopwords(&formats::read_text(p)?),
            None => parse_stopwords(DEFAULT_STOPWORDS),
        };
        let rules = PreprocessRules {
            max_doc_frequency: self.max_doc_frequency,
            min_word_count: self.min_word_count,
            stopwords,
            lowercase: self.lowercase,
        };
        rules.validate()?;
        Ok(rules)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub hard: bool,
    pub tau: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection { hard: false, tau: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub coherence_top_n: usize,
    pub diversity_top_n: usize,
    pub coherence_corpus: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            coherence_top_n: ctm_core::metrics::COHERENCE_TOP_N,
            diversity_top_n: ctm_core::metrics::DIVERSITY_TOP_N,
            coherence_corpus: None,
        }
    }
}

/// Default locations for inputs, used when the matching flag is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub prior: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = formats::read_text(path)?;
        let cfg: RunConfig = toml::from_str(&text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].lines().count().max(1));
            Error::parse(path, line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks value ranges and that every configured input path exists.
    pub fn validate(&self) -> Result<()> {
        self.llda.validate()?;
        if !(self.prior.tau > 0.0 && self.prior.tau < 1.0) {
            return Err(Error::Invalid(format!("prior.tau must lie in (0, 1), got {}", self.prior.tau)));
        }
        let p = &self.paths;
        let listed = [&p.corpus, &p.reference, &p.prior, &p.embeddings, &p.scores, &p.model];
        let extra = [&self.preprocess.stopwords_file, &self.eval.coherence_corpus];
        for path in listed.into_iter().chain(extra).flatten() {
            require_exists(path)?;
        }
        Ok(())
    }
}

pub fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")))
    }
}
