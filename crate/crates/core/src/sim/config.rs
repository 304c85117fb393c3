use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, HammersteinModel, LedCurve, MemoryPolynomialModel};
use crate::coding::{ConvCode, PamConstellation};
use crate::error::{Error, Result};
use crate::turbo::{CovarianceEstimator, DecompositionPoint, RetrainMethod, TurboConfig};

/// The shipped default experiment.
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub master_seed: u64,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_info_bits")]
    pub info_bits: usize,
    /// Defaults for receivers that do not override them.
    pub training_length: usize,
    pub hidden_nodes: usize,
    pub window: usize,
    pub iterations: usize,
    #[serde(default)]
    pub stopping: Stopping,
    pub constellation: ConstellationSpec,
    #[serde(default)]
    pub code: ConvCode,
    pub channel: ChannelModel,
    pub receivers: Vec<ReceiverSpec>,
}

fn default_info_bits() -> usize {
    1024
}

/// Monte Carlo stopping rule. Frames run in batches of `batch_frames`; a
/// point stops after the first batch that reaches `min_errors` bit errors
/// or `max_frames` frames, so the result does not depend on thread count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stopping {
    pub min_errors: u64,
    pub max_frames: usize,
    pub batch_frames: usize,
    /// Run at least this many frames even when errors come early.
    pub min_frames: usize,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_frames: 2000,
            batch_frames: 16,
            min_frames: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSpec {
    pub bits_per_symbol: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ConstellationSpec {
    pub fn build(&self) -> Result<PamConstellation> {
        PamConstellation::new(self.bits_per_symbol, self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverKind {
    RlsPoly,
    ElmNoniter,
    ElmTurbo,
    ElmTurboDataAided,
    GenieTurbo,
    /// Uncoded nearest-level decisions on the channel bits; calibration only.
    UncodedHard,
}

impl ReceiverKind {
    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::RlsPoly => "rls-poly",
            ReceiverKind::ElmNoniter => "elm-noniter",
            ReceiverKind::ElmTurbo => "elm-turbo",
            ReceiverKind::ElmTurboDataAided => "elm-turbo-data-aided",
            ReceiverKind::GenieTurbo => "genie-turbo",
            ReceiverKind::UncodedHard => "uncoded-hard",
        }
    }

    pub fn is_turbo(self) -> bool {
        matches!(
            self,
            ReceiverKind::ElmTurbo | ReceiverKind::ElmTurboDataAided | ReceiverKind::GenieTurbo
        )
    }

    /// Whether the receiver consumes a training sequence.
    pub fn needs_training(self) -> bool {
        !matches!(self, ReceiverKind::GenieTurbo | ReceiverKind::UncodedHard)
    }
}

/// One receiver of the sweep. Unset fields fall back to the experiment
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub kind: ReceiverKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default = "default_poly_order")]
    pub poly_order: usize,
    #[serde(default = "default_poly_memory")]
    pub poly_memory: usize,
    #[serde(default = "default_forgetting")]
    pub forgetting: f64,
    #[serde(default)]
    pub virtual_length: usize,
    #[serde(default)]
    pub early_stop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceEstimator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition_point: Option<DecompositionPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtract_zero_reference: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrain: Option<RetrainMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

fn default_poly_order() -> usize {
    7
}
fn default_poly_memory() -> usize {
    4
}
fn default_forgetting() -> f64 {
    0.999
}

impl ReceiverSpec {
    pub fn new(kind: ReceiverKind) -> Self {
        Self {
            kind,
            label: None,
            training_length: None,
            hidden_nodes: None,
            window: None,
            iterations: None,
            poly_order: default_poly_order(),
            poly_memory: default_poly_memory(),
            forgetting: default_forgetting(),
            virtual_length: 0,
            early_stop: false,
            covariance: None,
            decomposition_point: None,
            subtract_zero_reference: None,
            retrain: None,
            ridge: None,
        }
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.kind.name().to_string())
    }
}

/// A receiver spec with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedReceiver {
    pub label: String,
    pub kind: ReceiverKind,
    pub training_length: usize,
    pub hidden_nodes: usize,
    pub window: usize,
    pub poly_order: usize,
    pub poly_memory: usize,
    pub forgetting: f64,
    pub turbo: TurboConfig,
}

impl ExperimentConfig {
    pub fn default_config() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("shipped default config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(
                "snr grid must be non-empty and finite".into(),
            ));
        }
        if self.stopping.batch_frames == 0 {
            return Err(Error::Config("batch_frames must be >= 1".into()));
        }
        if self.info_bits == 0 {
            return Err(Error::Config("info_bits must be >= 1".into()));
        }
        self.constellation.build()?;
        ConvCode::new(
            self.code.generators,
            self.code.constraint_length,
            self.code.zero_tail,
        )?;
        self.validate_channel()?;
        if self.receivers.is_empty() {
            return Err(Error::Config("no receivers configured".into()));
        }
        let mut labels = std::collections::HashSet::new();
        for r in &self.receivers {
            let res = self.resolve(r)?;
            if !labels.insert(res.label.clone()) {
                return Err(Error::Config(format!(
                    "duplicate receiver label {}",
                    res.label
                )));
            }
        }
        Ok(())
    }

    fn validate_channel(&self) -> Result<()> {
        match &self.channel {
            ChannelModel::Hammerstein(h) => {
                HammersteinModel::new(h.static_coeffs.clone(), h.taps.clone())?;
            }
            ChannelModel::MemoryPolynomial(m) => {
                MemoryPolynomialModel::new(m.coeffs().to_vec())?;
            }
            ChannelModel::Static(c) => {
                LedCurve::new(c.coeffs.clone(), c.lo, c.hi)?;
            }
        }
        Ok(())
    }

    /// Length of the shared preamble: the longest training sequence any
    /// receiver uses, and at least the experiment default.
    pub fn preamble_length(&self) -> usize {
        self.receivers
            .iter()
            .filter(|r| r.kind.needs_training())
            .map(|r| r.training_length.unwrap_or(self.training_length))
            .fold(self.training_length, usize::max)
    }

    pub fn resolve(&self, r: &ReceiverSpec) -> Result<ResolvedReceiver> {
        let training_length = r.training_length.unwrap_or(self.training_length);
        let hidden_nodes = r.hidden_nodes.unwrap_or(self.hidden_nodes);
        let window = r.window.unwrap_or(self.window);
        let iterations = r.iterations.unwrap_or(self.iterations);
        let defaults = TurboConfig::default();
        let turbo = TurboConfig {
            max_iterations: iterations,
            window,
            hidden_nodes,
            training_length,
            data_aided: r.kind == ReceiverKind::ElmTurboDataAided,
            virtual_data_length: r.virtual_length,
            early_stop: r.early_stop,
            subtract_zero_reference: r
                .subtract_zero_reference
                .unwrap_or(defaults.subtract_zero_reference),
            decomposition_point: r
                .decomposition_point
                .unwrap_or(defaults.decomposition_point),
            ridge: r.ridge.unwrap_or(defaults.ridge),
            covariance: r.covariance.unwrap_or(defaults.covariance),
            retrain: r.retrain.unwrap_or(defaults.retrain),
        };
        turbo.validate()?;
        if r.kind.needs_training() && training_length <= 2 * window.max(r.poly_memory) + 1 {
            return Err(Error::Config(format!(
                "receiver {}: training length {training_length} too short",
                r.label()
            )));
        }
        if r.kind == ReceiverKind::RlsPoly && !(0.9..=1.0).contains(&r.forgetting) {
            return Err(Error::Config(format!(
                "receiver {}: forgetting factor {} outside [0.9, 1]",
                r.label(),
                r.forgetting
            )));
        }
        if !(turbo.ridge >= 0.0) {
            return Err(Error::Config(format!(
                "receiver {}: negative ridge",
                r.label()
            )));
        }
        Ok(ResolvedReceiver {
            label: r.label(),
            kind: r.kind,
            training_length,
            hidden_nodes,
            window,
            poly_order: r.poly_order,
            poly_memory: r.poly_memory,
            forgetting: r.forgetting,
            turbo,
        })
    }

    pub fn receiver(&self, label: &str) -> Result<ResolvedReceiver> {
        let spec = self
            .receivers
            .iter()
            .find(|r| r.label() == label)
            .ok_or_else(|| Error::Config(format!("no receiver labelled {label}")))?;
        self.resolve(spec)
    }
}
