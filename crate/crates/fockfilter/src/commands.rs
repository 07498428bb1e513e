//! The named experiments. Each `*_rows` function returns the table that
//! [`execute`] serializes.

use std::path::{Path, PathBuf};

use fockfilter_core::apriori::{apriori_closed_form, excitation_prob};
use fockfilter_core::collision::{convergence_study, run_chain, CollisionConfig, DiscretePulse};
use fockfilter_core::filter::{run_trajectory, SdeConfig};
use fockfilter_core::povm::{closed_form_moments, count_probs, povm};
use fockfilter_core::{AtomModel, Ket2, ModelParams, PulseEnvelope};
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{parallel_ensemble, with_threads};
use crate::error::{CliError, Result};
use crate::io::{emit, render, write_atomic};
use crate::spec::{Command, DumpLayout, ExperimentSpec, StateSpec};
use crate::verify::{self, VerifyOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriRow {
    pub t: f64,
    pub rho_gg: f64,
    pub rho_ee: f64,
    pub re_rho_ge: f64,
    pub im_rho_ge: f64,
    /// Excitation probability; only for a ground-state start.
    pub excitation: Option<f64>,
}

pub fn apriori_rows(spec: &ExperimentSpec) -> Result<Vec<AprioriRow>> {
    let model = spec.model()?;
    let ground = spec.rho0 == StateSpec::Ground;
    spec.time_grid()
        .into_iter()
        .map(|t| {
            let rho = apriori_closed_form(&model, t)?;
            Ok(AprioriRow {
                t,
                rho_gg: rho.gg().re,
                rho_ee: rho.ee().re,
                re_rho_ge: rho.ge().re,
                im_rho_ge: rho.ge().im,
                excitation: if ground { Some(excitation_prob(&model, t)?) } else { None },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajRow {
    pub t: f64,
    pub rho_gg: f64,
    pub rho_ee: f64,
    pub re_rho_ge: f64,
    pub im_rho_ge: f64,
    pub se_rho_gg: f64,
    pub se_rho_ee: f64,
    pub se_re_rho_ge: f64,
    pub se_im_rho_ge: f64,
    pub freq_0: f64,
    pub freq_1: f64,
    pub freq_2: f64,
    pub freq_more: f64,
    pub mean_counts: f64,
    pub se_mean_counts: f64,
    pub mean_intensity: f64,
    pub se_mean_intensity: f64,
}

fn sde_config(spec: &ExperimentSpec) -> SdeConfig {
    SdeConfig {
        dt: spec.dt,
        t_end: spec.t_end(),
        n_traj: spec.n_traj,
        seed0: spec.seed,
        output_grid: spec.time_grid(),
    }
}

pub fn traj_rows(spec: &ExperimentSpec) -> Result<Vec<TrajRow>> {
    let model = spec.model()?;
    let cfg = sde_config(spec);
    if cfg.jump_probability_too_large(&model) {
        log::warn!(
            "dt = {} allows a click probability of {:.3} per step; results carry a large time-step bias",
            cfg.dt,
            cfg.max_jump_probability(&model)
        );
    }
    let acc = with_threads(spec.threads, || parallel_ensemble(&model, &cfg))??;
    if acc.excess_jumps() > 0 {
        log::warn!("{} clicks beyond the second were recorded", acc.excess_jumps());
    }
    if let Some(path) = &spec.dump {
        write_dump(spec, &model, &cfg, path)?;
    }
    Ok(acc
        .finish()
        .into_iter()
        .map(|p| TrajRow {
            t: p.t,
            rho_gg: p.mean.gg().re,
            rho_ee: p.mean.ee().re,
            re_rho_ge: p.mean.ge().re,
            im_rho_ge: p.mean.ge().im,
            se_rho_gg: p.std_err[0],
            se_rho_ee: p.std_err[1],
            se_re_rho_ge: p.std_err[2],
            se_im_rho_ge: p.std_err[3],
            freq_0: p.count_frequencies[0],
            freq_1: p.count_frequencies[1],
            freq_2: p.count_frequencies[2],
            freq_more: p.count_frequencies[3],
            mean_counts: p.mean_counts,
            se_mean_counts: p.mean_counts_se,
            mean_intensity: p.mean_intensity,
            se_mean_intensity: p.mean_intensity_se,
        })
        .collect())
}

/// One sampled filter state of a dumped trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DumpRow {
    pub trajectory: u64,
    pub t: f64,
    pub re_rho_gg: f64,
    pub im_rho_gg: f64,
    pub re_rho_ge: f64,
    pub im_rho_ge: f64,
    pub re_rho_eg: f64,
    pub im_rho_eg: f64,
    pub re_rho_ee: f64,
    pub im_rho_ee: f64,
    pub k: f64,
    pub jumps: usize,
}

pub fn dump_rows(model: &AtomModel, cfg: &SdeConfig, trajectory: u64) -> Result<Vec<DumpRow>> {
    let record = run_trajectory(model, cfg, trajectory)?;
    Ok(record
        .samples
        .iter()
        .map(|s| {
            let r = &s.state.rho;
            DumpRow {
                trajectory,
                t: s.t,
                re_rho_gg: r.gg().re,
                im_rho_gg: r.gg().im,
                re_rho_ge: r.ge().re,
                im_rho_ge: r.ge().im,
                re_rho_eg: r.eg().re,
                im_rho_eg: r.eg().im,
                re_rho_ee: r.ee().re,
                im_rho_ee: r.ee().im,
                k: s.state.k,
                jumps: s.jumps,
            }
        })
        .collect())
}

/// `dir/stem_index.ext` next to `path`.
pub fn per_trajectory_path(path: &Path, index: u64) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{index}.{ext}"),
        None => format!("{stem}_{index}"),
    };
    path.with_file_name(name)
}

fn write_dump(spec: &ExperimentSpec, model: &AtomModel, cfg: &SdeConfig, path: &Path) -> Result<()> {
    let count = spec.dump_count.min(spec.n_traj) as u64;
    let runs = with_threads(spec.threads, || {
        (0..count)
            .into_par_iter()
            .map(|i| dump_rows(model, cfg, i))
            .collect::<Result<Vec<_>>>()
    })??;
    match spec.dump_layout {
        DumpLayout::Combined => {
            let rows: Vec<DumpRow> = runs.into_iter().flatten().collect();
            write_atomic(path, &render("trajectory", spec.format, &rows)?)
        }
        DumpLayout::PerTrajectory => {
            for (i, rows) in runs.iter().enumerate() {
                write_atomic(&per_trajectory_path(path, i as u64), &render("trajectory", spec.format, rows)?)?;
            }
            Ok(())
        }
    }
}

/// Diagonal entries of the count POVM elements (the off-diagonal entries
/// vanish identically).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PovmRow {
    pub t: f64,
    pub m0_gg: f64,
    pub m0_ee: f64,
    pub m1_gg: f64,
    pub m1_ee: f64,
    pub m2_gg: f64,
    pub m2_ee: f64,
    pub completeness_defect: f64,
    pub min_eigenvalue: f64,
}

pub fn povm_rows(spec: &ExperimentSpec) -> Result<Vec<PovmRow>> {
    let model = spec.model()?;
    spec.time_grid()
        .into_iter()
        .map(|t| {
            let set = povm(&model, t)?;
            Ok(PovmRow {
                t,
                m0_gg: set.m0.gg().re,
                m0_ee: set.m0.ee().re,
                m1_gg: set.m1.gg().re,
                m1_ee: set.m1.ee().re,
                m2_gg: set.m2.gg().re,
                m2_ee: set.m2.ee().re,
                completeness_defect: set.completeness_defect(),
                min_eigenvalue: set.min_eigenvalue(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub t: f64,
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Undefined while the mean count is zero.
    pub mandel_q: Option<f64>,
}

pub fn stats_rows(spec: &ExperimentSpec) -> Result<Vec<StatsRow>> {
    let model = spec.model()?;
    spec.time_grid()
        .into_iter()
        .map(|t| {
            let s = count_probs(&model, t)?;
            Ok(StatsRow {
                t,
                p0: s.p0,
                p1: s.p1,
                p2: s.p2,
                mean: s.mean,
                second_moment: s.second_moment,
                variance: s.variance(),
                mandel_q: s.mandel_q,
            })
        })
        .collect()
}

/// One measured bath qubit of a sampled chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRow {
    pub run: u64,
    pub step: usize,
    pub t: f64,
    pub outcome: u8,
    pub record_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub tau: f64,
    pub max_error: f64,
    pub fitted_order: f64,
}

pub fn collision_rows(spec: &ExperimentSpec) -> Result<Vec<OutcomeRow>> {
    let model = spec.model()?;
    let cfg = CollisionConfig::from_model(&model, spec.dt, spec.t_end())?;
    // Fail early on a bad τ before spawning runs.
    DiscretePulse::sample(&cfg.pulse, cfg.tau)?;
    let runs = with_threads(spec.threads, || {
        (0..spec.runs as u64)
            .into_par_iter()
            .map(|run| run_chain(&cfg, spec.seed, run, &[]).map(|c| (run, c)))
            .collect::<std::result::Result<Vec<_>, _>>()
    })??;
    let mut rows = Vec::with_capacity(runs.len() * cfg.n_steps);
    for (run, chain) in runs {
        for (j, (&o, &w)) in chain.outcomes.iter().zip(&chain.weights).enumerate() {
            rows.push(OutcomeRow {
                run,
                step: j + 1,
                t: (j + 1) as f64 * cfg.tau,
                outcome: o as u8,
                record_weight: w,
            });
        }
    }
    Ok(rows)
}

pub fn convergence_rows(spec: &ExperimentSpec) -> Result<Vec<ConvergenceRow>> {
    let model = spec.model()?;
    let taus = [4.0 * spec.dt, 2.0 * spec.dt, spec.dt];
    let table = convergence_study(&model, &taus, spec.t_end(), spec.grid_points)?;
    Ok(table
        .rows
        .iter()
        .map(|&(tau, max_error)| ConvergenceRow {
            tau,
            max_error,
            fitted_order: table.order,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Figure1Row {
    pub pulse: String,
    pub omega_ratio: f64,
    pub t: f64,
    pub mean_counts: f64,
}

pub const FIGURE1_RATIOS: [f64; 3] = [0.75, 0.30, 0.15];

/// Mean detected photon number for square and exponential pulses at
/// `Ω/Γ ∈ {0.75, 0.30, 0.15}`, atom starting in `|g⟩`.
pub fn figure1_rows(spec: &ExperimentSpec) -> Result<Vec<Figure1Row>> {
    let params = ModelParams::new(spec.gamma, spec.delta0)?;
    let grid = spec.time_grid();
    let mut rows = Vec::with_capacity(6 * grid.len());
    for name in ["square", "exponential"] {
        for ratio in FIGURE1_RATIOS {
            let omega = ratio * spec.gamma;
            let pulse = match name {
                "square" => PulseEnvelope::square(omega)?,
                _ => PulseEnvelope::exponential(omega)?,
            };
            let model = AtomModel::pure(params, pulse, Ket2::ground())?;
            for &t in &grid {
                rows.push(Figure1Row {
                    pulse: name.to_string(),
                    omega_ratio: ratio,
                    t,
                    mean_counts: closed_form_moments(&model, t)?.0,
                });
            }
        }
    }
    Ok(rows)
}

/// Serialized output of `spec.command`. For `verify` a failing suite is
/// returned as the error, together with the report bytes.
pub fn execute(spec: &ExperimentSpec) -> Result<(Vec<u8>, Option<CliError>)> {
    spec.validate()?;
    let name = spec.command.name();
    let bytes = match spec.command {
        Command::Apriori => render(name, spec.format, &apriori_rows(spec)?)?,
        Command::Traj => render(name, spec.format, &traj_rows(spec)?)?,
        Command::Povm => render(name, spec.format, &povm_rows(spec)?)?,
        Command::Stats => render(name, spec.format, &stats_rows(spec)?)?,
        Command::Collision if spec.convergence => render("convergence", spec.format, &convergence_rows(spec)?)?,
        Command::Collision => render(name, spec.format, &collision_rows(spec)?)?,
        Command::Figure1 => render(name, spec.format, &figure1_rows(spec)?)?,
        Command::Verify => {
            let opts = VerifyOptions::from_spec(spec)?;
            let report = with_threads(spec.threads, || verify::run(&opts))?;
            let bytes = render(name, spec.format, &report.rows())?;
            let failed = report.failed();
            let err = (!failed.is_empty()).then_some(CliError::ChecksFailed(failed));
            return Ok((bytes, err));
        }
    };
    Ok((bytes, None))
}

/// Run `spec` and write its output.
pub fn run(spec: &ExperimentSpec) -> Result<()> {
    let (bytes, failure) = execute(spec)?;
    emit(spec.out.as_deref(), &bytes)?;
    failure.map_or(Ok(()), Err)
}

