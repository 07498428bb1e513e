//! Command-line description of one experiment.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use fockfilter_core::pulse::Normalization;
use fockfilter_core::{AtomModel, Ket2, ModelParams, PulseEnvelope};

use crate::error::{CliError, Result};
use crate::io::{read_pulse_csv, read_rho0, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Unconditional atom state on a time grid.
    Apriori,
    /// Monte-Carlo ensemble of the photon-counting filter.
    Traj,
    /// Elements of the three-outcome count POVM.
    Povm,
    /// Count distribution, moments and Mandel Q.
    Stats,
    /// Repeated-interaction chain: sampled records or convergence table.
    Collision,
    /// Mean detected photon number for six pulses, ground-state start.
    Figure1,
    /// Run the acceptance checks.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Apriori => "apriori",
            Command::Traj => "traj",
            Command::Povm => "povm",
            Command::Stats => "stats",
            Command::Collision => "collision",
            Command::Figure1 => "figure1",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseSpec {
    Square,
    Exponential,
    File(PathBuf),
}

impl FromStr for PulseSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "square" => Ok(PulseSpec::Square),
            "exponential" => Ok(PulseSpec::Exponential),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(PulseSpec::File(p.into())),
                _ => Err(format!("expected square, exponential or file:<path>, got {s:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Ground,
    Excited,
    Plus,
    File(PathBuf),
}

impl FromStr for StateSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "g" => Ok(StateSpec::Ground),
            "e" => Ok(StateSpec::Excited),
            "plus" => Ok(StateSpec::Plus),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(StateSpec::File(p.into())),
                _ => Err(format!("expected g, e, plus or file:<path>, got {s:?}")),
            },
        }
    }
}

/// How trajectory dumps are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum DumpLayout {
    /// One long-format file with a trajectory column.
    #[default]
    Combined,
    /// One file per trajectory, named `<stem>_<index>.<ext>`.
    PerTrajectory,
}

/// Horizon used by `figure1` when `--t-end` is not given.
pub const FIGURE1_T_END: f64 = 100.0;
pub const DEFAULT_T_END: f64 = 10.0;

#[derive(Debug, Clone, Parser)]
#[command(name = "fockfilter", version, allow_negative_numbers = true, about = "Photon counting for a two-level atom driven by a single-photon pulse")]
pub struct ExperimentSpec {
    #[arg(value_enum)]
    pub command: Command,

    /// square, exponential or file:<path> (CSV columns t, re, [im]).
    #[arg(long, default_value = "exponential")]
    pub pulse: PulseSpec,

    /// Pulse bandwidth Ω.
    #[arg(long = "omega", default_value_t = 0.5)]
    pub omega: f64,

    /// Decay rate Γ.
    #[arg(long = "gamma", default_value_t = 1.0)]
    pub gamma: f64,

    /// Detuning Δ₀.
    #[arg(long = "delta0", default_value_t = 0.0)]
    pub delta0: f64,

    /// g, e, plus or file:<path> (two rows: re, im, re, im).
    #[arg(long, default_value = "g")]
    pub rho0: StateSpec,

    /// Final time; 10 for most commands, 100 for figure1.
    #[arg(long)]
    pub t_end: Option<f64>,

    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,

    /// Filter time step, and collision time τ.
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,

    #[arg(long, default_value_t = 10_000)]
    pub n_traj: usize,

    #[arg(long, default_value_t = 1, env = "FOCKFILTER_SEED")]
    pub seed: u64,

    /// Worker threads for ensembles; all cores by default.
    #[arg(long, env = "FOCKFILTER_THREADS")]
    pub threads: Option<usize>,

    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Rescale a tabulated pulse to unit norm instead of rejecting it.
    #[arg(long)]
    pub renormalize: bool,

    /// traj: also write the first `--dump-count` trajectories here.
    #[arg(long)]
    pub dump: Option<PathBuf>,

    #[arg(long, default_value_t = 10)]
    pub dump_count: usize,

    #[arg(long, value_enum, default_value_t = DumpLayout::Combined)]
    pub dump_layout: DumpLayout,

    /// collision: number of sampled chains to export.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,

    /// collision: emit the zero-record convergence table at τ = 4dt, 2dt, dt.
    #[arg(long)]
    pub convergence: bool,

    /// verify: comma-separated criterion numbers to run (default all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,

    /// verify: multiply every tolerance by this factor (test hook).
    #[arg(long, default_value_t = 1.0, hide = true)]
    pub tolerance_scale: f64,
}

impl ExperimentSpec {
    /// Defaults for `command`, as if no flags were given.
    pub fn defaults(command: Command) -> Self {
        ExperimentSpec::parse_from(["fockfilter", command.name()])
    }

    pub fn t_end(&self) -> f64 {
        self.t_end.unwrap_or(match self.command {
            Command::Figure1 => FIGURE1_T_END,
            _ => DEFAULT_T_END,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::usage(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("omega", self.omega)?;
        positive("dt", self.dt)?;
        positive("t-end", self.t_end())?;
        if !self.delta0.is_finite() {
            return Err(CliError::usage("delta0 must be finite"));
        }
        if self.grid_points < 2 {
            return Err(CliError::usage("grid-points must be at least 2"));
        }
        if self.n_traj == 0 {
            return Err(CliError::usage("n-traj must be positive"));
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("threads must be positive"));
        }
        if self.dt > self.t_end() {
            return Err(CliError::usage("dt must not exceed t-end"));
        }
        if !(self.tolerance_scale >= 0.0) {
            return Err(CliError::usage("tolerance-scale must be non-negative"));
        }
        Ok(())
    }

    /// `grid_points` equally spaced times from 0 to `t_end`.
    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.grid_points;
        let t_end = self.t_end();
        (0..n)
            .map(|i| if i + 1 == n { t_end } else { t_end * i as f64 / (n - 1) as f64 })
            .collect()
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.gamma, self.delta0)?)
    }

    pub fn pulse_envelope(&self) -> Result<PulseEnvelope> {
        Ok(match &self.pulse {
            PulseSpec::Square => PulseEnvelope::square(self.omega)?,
            PulseSpec::Exponential => PulseEnvelope::exponential(self.omega)?,
            PulseSpec::File(path) => {
                let norm = if self.renormalize { Normalization::Renormalize } else { Normalization::Strict };
                read_pulse_csv(path, norm)?
            }
        })
    }

    pub fn model(&self) -> Result<AtomModel> {
        let params = self.params()?;
        let pulse = self.pulse_envelope()?;
        let model = match &self.rho0 {
            StateSpec::Ground => AtomModel::pure(params, pulse, Ket2::ground())?,
            StateSpec::Excited => AtomModel::pure(params, pulse, Ket2::excited())?,
            StateSpec::Plus => AtomModel::pure(params, pulse, Ket2::plus())?,
            StateSpec::File(path) => {
                let rho = read_rho0(path)?;
                AtomModel::mixed(params, pulse, rho).map_err(|e| CliError::Format {
                    path: path.clone(),
                    message: e.to_string(),
                })?
            }
        };
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = ExperimentSpec::defaults(Command::Apriori);
        assert_eq!((s.gamma, s.delta0, s.omega), (1.0, 0.0, 0.5));
        assert_eq!(s.t_end(), 10.0);
        assert_eq!((s.grid_points, s.dt, s.n_traj), (200, 1e-3, 10_000));
        assert_eq!(s.format, Format::Csv);
        assert_eq!(ExperimentSpec::defaults(Command::Figure1).t_end(), FIGURE1_T_END);
        let grid = s.time_grid();
        assert_eq!(grid.len(), 200);
        assert_eq!((grid[0], grid[199]), (0.0, 10.0));
    }

    #[test]
    fn parses_sources() {
        assert_eq!("file:a.csv".parse::<PulseSpec>().unwrap(), PulseSpec::File("a.csv".into()));
        assert!("file:".parse::<PulseSpec>().is_err());
        assert!("gauss".parse::<PulseSpec>().is_err());
        assert_eq!("plus".parse::<StateSpec>().unwrap(), StateSpec::Plus);
        assert!("x".parse::<StateSpec>().is_err());
        let s = ExperimentSpec::try_parse_from(["fockfilter", "traj", "--delta0", "-0.5", "--pulse", "square"]).unwrap();
        assert_eq!(s.delta0, -0.5);
        assert_eq!(s.pulse, PulseSpec::Square);
    }

    #[test]
    fn rejects_invalid_values() {
        for args in [
            vec!["apriori", "--gamma", "0"],
            vec!["apriori", "--omega", "-1"],
            vec!["apriori", "--grid-points", "1"],
            vec!["apriori", "--dt", "0"],
            vec!["apriori", "--t-end", "nan"],
        ] {
            let s = ExperimentSpec::try_parse_from(std::iter::once("fockfilter").chain(args)).unwrap();
            assert_eq!(s.validate().unwrap_err().exit_code(), 1);
        }
    }
}
