//! JSON run configuration. Every tunable has an explicit default so a
//! serialized config fully describes a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{FitOptions, ModelForm};
use crate::intensity::IntensityFamily;
use crate::observation::{CountFamily, ModelSpec, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Fit,
    Filter,
    Diagnose,
    Reproduce,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Filter => "filter",
            Command::Diagnose => "diagnose",
            Command::Reproduce => "reproduce",
        }
    }
}

/// Model choice; `params` is needed only by commands that do not estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: CountFamily,
    pub intensity: IntensityFamily,
    /// NB form index, 0 or 1.
    #[serde(default)]
    pub c: u8,
    #[serde(default)]
    pub params: Option<Params>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            family: CountFamily::Zmp,
            intensity: IntensityFamily::Gar1,
            c: 0,
            params: None,
        }
    }
}

impl ModelConfig {
    pub fn form(&self) -> ModelForm {
        ModelForm::new(self.family, self.intensity, self.c)
    }

    /// Full model with parameters; `c` from the model block wins over any in `params`.
    pub fn spec(&self) -> Result<ModelSpec> {
        let params = self.params.ok_or_else(|| {
            Error::InvalidInput("model.params is required for this command".into())
        })?;
        ModelSpec::new(
            self.family,
            self.intensity,
            Params {
                c: self.c,
                ..params
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Largest lag for ACF/PACF and the Ljung–Box test on residuals.
    pub max_lag: usize,
    /// Largest count listed in the probability table.
    pub kmax: u64,
    /// Intensity draws for Monte-Carlo marginal probabilities.
    pub mc_draws: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            max_lag: 20,
            kmax: 10,
            mc_draws: crate::diagnostics::DEFAULT_MC_DRAWS,
        }
    }
}

/// How replicate fits in an experiment are started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentStart {
    /// Use the fit options' initialization strategy on each simulated series.
    Data,
    /// Start every replicate at the generating parameters.
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub replicates: usize,
    pub start: ExperimentStart,
    /// Generating parameters, one table row each.
    pub rows: Vec<Params>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            replicates: 200,
            start: ExperimentStart::Data,
            rows: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, must agree with the subcommand being run.
    pub command: Option<Command>,
    pub model: ModelConfig,
    /// Required by stochastic commands.
    pub seed: Option<u64>,
    /// Length of simulated series.
    pub n: usize,
    /// Also write the latent intensity path when simulating.
    pub write_intensity: bool,
    pub input: Option<PathBuf>,
    pub column: Option<String>,
    /// Fit JSON used by `filter` and `diagnose`.
    pub fit_result: Option<PathBuf>,
    pub out: PathBuf,
    /// Worker threads; `None` uses every core.
    pub jobs: Option<usize>,
    pub fit: FitOptions,
    /// Parametric bootstrap replicates for fit standard errors; 0 disables.
    pub bootstrap_reps: usize,
    pub diagnostics: DiagnosticsConfig,
    pub experiment: Option<ExperimentConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            model: ModelConfig::default(),
            seed: None,
            n: 1000,
            write_intensity: true,
            input: None,
            column: None,
            fit_result: None,
            out: PathBuf::from("out"),
            jobs: None,
            fit: FitOptions::default(),
            bootstrap_reps: 0,
            diagnostics: DiagnosticsConfig::default(),
            experiment: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks the parts of the config that `command` relies on.
    pub fn validate_for(&self, command: Command) -> Result<()> {
        if let Some(c) = self.command {
            if c != command {
                return Err(Error::InvalidInput(format!(
                    "config is for `{}` but `{}` was run",
                    c.name(),
                    command.name()
                )));
            }
        }
        if self.model.c > 1 {
            return Err(Error::InvalidSpec(format!(
                "c must be 0 or 1, got {}",
                self.model.c
            )));
        }
        let needs_seed = match command {
            Command::Simulate | Command::Reproduce => true,
            Command::Fit => self.bootstrap_reps > 0,
            Command::Diagnose => {
                self.model.family == CountFamily::Zmnb
                    || self.model.intensity == IntensityFamily::Ear1
            }
            Command::Filter => false,
        };
        if needs_seed && self.seed.is_none() {
            return Err(Error::InvalidInput(format!(
                "`{}` needs a seed (--seed or \"seed\" in the config)",
                command.name()
            )));
        }
        match command {
            Command::Simulate => {
                self.model.spec()?;
                if self.n == 0 {
                    return Err(Error::InvalidInput("n must be positive".into()));
                }
            }
            Command::Fit | Command::Filter | Command::Diagnose => {
                if self.input.is_none() {
                    return Err(Error::InvalidInput(format!(
                        "`{}` needs an input file (--input)",
                        command.name()
                    )));
                }
                if command != Command::Fit && self.fit_result.is_none() {
                    self.model.spec()?;
                }
            }
            Command::Reproduce => {
                let exp = self
                    .experiment
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("config has no experiment block".into()))?;
                if exp.rows.is_empty() || exp.replicates == 0 || exp.n < 3 {
                    return Err(Error::InvalidInput(
                        "experiment needs rows, replicates ≥ 1 and n ≥ 3".into(),
                    ));
                }
                for row in &exp.rows {
                    ModelSpec::new(
                        self.model.family,
                        self.model.intensity,
                        Params {
                            c: self.model.c,
                            ..*row
                        },
                    )?;
                }
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidInput("jobs must be at least 1".into()));
        }
        Ok(())
    }
}
