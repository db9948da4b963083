//! JSON experiment description. Rates and times are in units of γ.

use std::path::PathBuf;

use jcbeat_core::trajectories::Unraveling;
use jcbeat_core::{EmissionChannel, GridSpec, SystemParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ExperimentKind {
    Steady,
    Transient,
    WignerGrid,
    WignerOrigin,
    G2,
    Trajectory,
    Ensemble,
    FigurePreset,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Steady => "steady",
            Self::Transient => "transient",
            Self::WignerGrid => "wigner_grid",
            Self::WignerOrigin => "wigner_origin",
            Self::G2 => "g2",
            Self::Trajectory => "trajectory",
            Self::Ensemble => "ensemble",
            Self::FigurePreset => "figure_preset",
        }
    }
}

/// Which dynamics to use where both are available.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Four dressed levels, closed-form where possible.
    #[default]
    Effective,
    /// Master equation on the truncated Hilbert space.
    Full,
}

/// Uniform grid start, start + step, … up to and including `end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl TimeGrid {
    pub fn validate(&self) -> Result<(), CliError> {
        let finite = [self.start, self.end, self.step].iter().all(|v| v.is_finite());
        if !finite || self.start < 0.0 || self.step <= 0.0 || self.end < self.start {
            return Err(CliError::Config(format!("invalid time grid {self:?}")));
        }
        if (self.end - self.start) / self.step > 5e7 {
            return Err(CliError::Config("time grid has more than 5e7 points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        let mut t: Vec<f64> = (0..=n).map(|k| self.start + k as f64 * self.step).collect();
        if self.end - t[n] > 1e-9 * self.step {
            t.push(self.end);
        }
        t
    }
}

/// Initial state of stochastic records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryInit {
    #[default]
    Ground,
    /// |1,−⟩.
    OnePhoton,
    /// 2/3 ground, 1/3 |1,−⟩: the state left by a side emission.
    SideMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySettings {
    pub method: Unraveling,
    #[serde(default)]
    pub init: TrajectoryInit,
    pub t_end: f64,
    pub sample_dt: f64,
    /// Number of records for ensembles.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub noise_dt: Option<f64>,
    /// Stream of the record for single trajectories.
    #[serde(default)]
    pub stream: u64,
    /// Also integrate the master equation for comparison.
    #[serde(default)]
    pub reference: bool,
}

fn default_count() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be omitted when the command line names the experiment.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub params: SystemParams,
    #[serde(default)]
    pub model: Model,
    /// Detection that prepares the initial state; none means the steady
    /// state (steady, wigner_grid) or the ground state (transient).
    #[serde(default)]
    pub channel: Option<EmissionChannel>,
    #[serde(default)]
    pub times: Option<TimeGrid>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Snapshot time for wigner_grid.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Also write the grid in the binary layout.
    #[serde(default)]
    pub binary: bool,
    #[serde(default)]
    pub trajectory: Option<TrajectorySettings>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Preset name for figure_preset.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, params: SystemParams) -> Self {
        Self {
            experiment: Some(experiment),
            params,
            model: Model::Effective,
            channel: None,
            times: None,
            grid: None,
            tau: None,
            binary: false,
            trajectory: None,
            seed: None,
            preset: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn kind(&self) -> Result<ExperimentKind, CliError> {
        self.experiment.ok_or_else(|| CliError::Config("no experiment given".into()))
    }

    fn require_times(&self) -> Result<TimeGrid, CliError> {
        let t = self.times.ok_or_else(|| CliError::Config(format!("{} needs `times`", self.kind_name())))?;
        t.validate()?;
        Ok(t)
    }

    fn kind_name(&self) -> &'static str {
        self.experiment.map_or("experiment", |k| k.name())
    }

    pub fn time_grid(&self) -> Result<Vec<f64>, CliError> {
        Ok(self.require_times()?.points())
    }

    pub fn trajectory_settings(&self) -> Result<TrajectorySettings, CliError> {
        self.trajectory.ok_or_else(|| CliError::Config(format!("{} needs `trajectory`", self.kind_name())))
    }

    /// Checks every field the chosen experiment reads.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if let Some(t) = self.tau {
            if !t.is_finite() || t < 0.0 {
                return Err(CliError::Config(format!("tau must be finite and >= 0, got {t}")));
            }
        }
        if let Some(t) = &self.times {
            t.validate()?;
        }
        let kind = self.kind()?;
        match kind {
            ExperimentKind::Transient | ExperimentKind::WignerOrigin | ExperimentKind::G2 => {
                self.require_times()?;
            }
            ExperimentKind::Trajectory | ExperimentKind::Ensemble => {
                let s = self.trajectory_settings()?;
                let finite = [s.t_end, s.sample_dt, s.tolerance].iter().all(|v| v.is_finite() && *v > 0.0);
                if !finite || s.noise_dt.is_some_and(|d| !(d.is_finite() && d > 0.0)) {
                    return Err(CliError::Config(format!("invalid trajectory settings {s:?}")));
                }
                if kind == ExperimentKind::Ensemble && s.count < 2 {
                    return Err(CliError::Config("an ensemble needs at least 2 records".into()));
                }
            }
            ExperimentKind::FigurePreset => {
                let name = self.preset.as_deref().ok_or_else(|| CliError::Config("figure_preset needs `preset`".into()))?;
                crate::presets::PresetName::parse(name)?;
            }
            ExperimentKind::Steady | ExperimentKind::WignerGrid => {}
        }
        if kind == ExperimentKind::G2 && self.model == Model::Effective && self.channel.is_some_and(|c| c != EmissionChannel::Forward) {
            return Err(CliError::Config("g2 is defined for the forward channel only".into()));
        }
        Ok(())
    }

    /// Hash of every field that can change the numbers written.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
