//! Monte-Carlo integration of the photon-counting filter for a single-photon
//! input. The filter carries four operators `(ρ, ρ⁰¹, ρ¹⁰, ρ⁰⁰)`; the
//! detector clicks with intensity
//! `k = Tr(L†Lρ + Lρ¹⁰ξ* + ρ⁰¹L†ξ + ρ⁰⁰|ξ|²)`.
//!
//! Each step draws one uniform `u`: a click happens when `u < k·dt`,
//! otherwise the state follows the no-click drift over the step. All four
//! operators are then divided by `Tr ρ`.
//!
//! The no-click drift is linear and is propagated exactly with `ξ` held at
//! its value at the start of the step. Writing
//! `W = [[ρ⁰⁰, ρ⁰¹], [ρ¹⁰, ρ − T_t ρ⁰⁰]]` with `T_t = ∫_t^∞|ξ|²`, the drift is
//! `Ẇ = AW + WA†` with `A = [[G, 0], [−ξL†, G]]` and `G = −iH − L†L/2`, so
//! the step is `W ← e^{A dt} W e^{A† dt}`. `W` stays positive, and with it
//! `ρ` and `k`; an explicit Euler step does not near zeros of `k`. Since `G`
//! is diagonal, `e^{A dt}` has a closed form.

use alloc::vec::Vec;

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::apriori::Lindbladian;
use crate::error::{Error, Result};
use crate::linalg::{Operator2, Operator4, C64, ZERO};
use crate::pulse::{phi1, PulseEnvelope};
use crate::rng::CounterRng;
use crate::trajectory::AtomModel;

/// Intensities within this distance below zero are roundoff and clipped.
pub const INTENSITY_CLIP: f64 = 1e-12;

/// Jump probability per step above which a configuration is flagged.
pub const JUMP_PROBABILITY_WARNING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub rho: Operator2,
    pub rho01: Operator2,
    pub rho10: Operator2,
    pub rho00: Operator2,
    pub t: f64,
    /// Click intensity at `t`, evaluated with the pulse value on `[t, t + dt)`.
    pub k: f64,
}

/// Per-model constants of the filter.
#[derive(Debug, Clone, Copy)]
pub struct FilterKernel {
    l: Operator2,
    ld: Operator2,
    ldl: Operator2,
    /// Diagonal of `G = −iH − L†L/2`.
    g: [C64; 2],
    /// `(√Γ + sup|ξ|)²`, an upper bound on the intensity.
    rate_bound: f64,
    /// Propagator factors for the most recently prepared step size.
    factors: StepFactors,
}

/// The `ξ`-independent parts of `e^{A dt}`: `D = e^{G dt}` and the feed
/// entry `⟨e|∫₀^dt e^{G(dt−s)} L† e^{Gs} ds|g⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StepFactors {
    dt: f64,
    d: [C64; 2],
    /// `d_i d_j*`
    dd: [[C64; 2]; 2],
    feed: C64,
}

impl StepFactors {
    fn new(g: [C64; 2], ld: &Operator2, dt: f64) -> Self {
        let d = [(g[0] * dt).exp(), (g[1] * dt).exp()];
        let mut dd = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                dd[i][j] = d[i] * d[j].conj();
            }
        }
        StepFactors {
            dt,
            d,
            dd,
            feed: ld.0[1][0] * d[0] * phi1(g[1] - g[0], dt),
        }
    }
}

fn hadamard(a: &Operator2, b: &[[C64; 2]; 2]) -> Operator2 {
    Operator2([[a.0[0][0] * b[0][0], a.0[0][1] * b[0][1]], [a.0[1][0] * b[1][0], a.0[1][1] * b[1][1]]])
}

impl FilterKernel {
    pub fn new(model: &AtomModel) -> Self {
        let lind = Lindbladian::new(model);
        let l = lind.coupling();
        let ld = l.dagger();
        let g = lind.hamiltonian().scale(C64::new(0.0, -1.0)) - (ld * l).scale_re(0.5);
        let g = [g.gg(), g.ee()];
        FilterKernel {
            l,
            ld,
            ldl: ld * l,
            g,
            rate_bound: rate_bound(model),
            factors: StepFactors::new(g, &ld, 0.0),
        }
    }

    /// Kernel with the propagator factors for step `dt` precomputed; other
    /// step sizes still work but recompute them on every call.
    pub fn with_step(model: &AtomModel, dt: f64) -> Self {
        let mut k = FilterKernel::new(model);
        k.factors = StepFactors::new(k.g, &k.ld, dt);
        k
    }

    fn factors(&self, dt: f64) -> StepFactors {
        if self.factors.dt == dt {
            self.factors
        } else {
            StepFactors::new(self.g, &self.ld, dt)
        }
    }

    pub fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    /// Raw intensity, before clipping.
    pub fn raw_intensity(&self, s: &FilterState, xi: C64) -> f64 {
        let v = (self.ldl * s.rho).trace()
            + (self.l * s.rho10).trace() * xi.conj()
            + (s.rho01 * self.ld).trace() * xi
            + s.rho00.trace() * xi.norm_sqr();
        v.re
    }

    pub fn intensity(&self, s: &FilterState, xi: C64) -> Result<f64> {
        let k = self.raw_intensity(s, xi);
        if k >= 0.0 {
            Ok(k)
        } else if k >= -INTENSITY_CLIP {
            Ok(0.0)
        } else {
            Err(Error::Integration {
                message: alloc::format!("negative click intensity at t = {}", s.t),
                estimate: k,
                error: -k,
            })
        }
    }

    fn jump_parts(&self, s: &FilterState, xi: C64) -> (Operator2, Operator2, Operator2, Operator2) {
        let l = self.l;
        let ld = self.ld;
        let jump = l * s.rho * ld
            + (l * s.rho10).scale(xi.conj())
            + (s.rho01 * ld).scale(xi)
            + s.rho00.scale_re(xi.norm_sqr());
        let jump01 = l * s.rho01 * ld + (l * s.rho00).scale(xi.conj());
        let jump10 = l * s.rho10 * ld + (s.rho00 * ld).scale(xi);
        let jump00 = l * s.rho00 * ld;
        (jump, jump01, jump10, jump00)
    }

    /// `e^{A dt}` for `A = [[G, 0], [−ξL†, G]]`.
    pub fn no_click_propagator(&self, xi: C64, dt: f64) -> Operator4 {
        let f = self.factors(dt);
        let diag = Operator2::new(f.d[0], ZERO, ZERO, f.d[1]);
        let lower = Operator2::new(ZERO, ZERO, -xi * f.feed, ZERO);
        Operator4::from_blocks([[diag, Operator2::ZERO], [lower, diag]])
    }

    /// Exact no-click propagation of the unnormalized operators over
    /// `[s.t, s.t + dt]` with `ξ` frozen at `xi`. This is `W ← VWV†` with
    /// `V` from [`no_click_propagator`](Self::no_click_propagator), written
    /// out for `V = [[D, 0], [X, D]]`, `D` diagonal and `X = x|e⟩⟨g|`.
    fn no_click_flow(&self, pulse: &PulseEnvelope, s: &FilterState, xi: C64, dt: f64) -> FilterState {
        let f = self.factors(dt);
        let x = -xi * f.feed;
        let w00 = s.rho00;
        let w01 = s.rho01;
        let w10 = s.rho10;
        let w11 = s.rho - s.rho00.scale_re(pulse.tail_at(s.t));

        let rho00 = hadamard(&w00, &f.dd);
        // D W₀₀ X† fills column g→e of ρ⁰¹; X W₀₀ D† fills row e of ρ¹⁰.
        let mut rho01 = hadamard(&w01, &f.dd);
        let mut rho10 = hadamard(&w10, &f.dd);
        let mut v11 = hadamard(&w11, &f.dd);
        for i in 0..2 {
            let col = f.d[i] * x.conj();
            let row = x * f.d[i].conj();
            rho01.0[i][1] += col * w00.0[i][0];
            rho10.0[1][i] += row * w00.0[0][i];
            v11.0[i][1] += col * w10.0[i][0];
            v11.0[1][i] += row * w01.0[0][i];
        }
        v11.0[1][1] += w00.0[0][0] * x.norm_sqr();

        let t = s.t + dt;
        FilterState {
            rho: v11 + rho00.scale_re(pulse.tail_at(t)),
            rho01,
            rho10,
            rho00,
            t,
            k: 0.0,
        }
    }

    /// One step from `s` over `[t, t + dt)` with uniform draw `u`.
    /// Returns the new state and whether a click occurred.
    pub fn step(&self, model: &AtomModel, s: &FilterState, dt: f64, u: f64) -> Result<(FilterState, bool)> {
        let pulse = model.pulse();
        let xi = pulse.at_right(s.t);
        let k = self.intensity(s, xi)?;
        let jumped = u < k * dt;
        let (rho, rho01, rho10, rho00) = if jumped {
            self.jump_parts(s, xi)
        } else {
            let f = self.no_click_flow(pulse, s, xi, dt);
            (f.rho, f.rho01, f.rho10, f.rho00)
        };
        let norm = rho.trace().re;
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Integration {
                message: alloc::format!("filter state lost its trace at t = {}", s.t),
                estimate: norm,
                error: f64::NAN,
            });
        }
        let inv = 1.0 / norm;
        let mut next = FilterState {
            rho: rho.scale_re(inv),
            rho01: rho01.scale_re(inv),
            rho10: rho10.scale_re(inv),
            rho00: rho00.scale_re(inv),
            t: s.t + dt,
            k: 0.0,
        };
        if !(next.rho.is_finite() && next.rho01.is_finite() && next.rho10.is_finite() && next.rho00.is_finite()) {
            return Err(Error::Integration {
                message: alloc::format!("non-finite filter state at t = {}", s.t),
                estimate: f64::NAN,
                error: f64::NAN,
            });
        }
        next.k = self.intensity(&next, pulse.at_right(next.t))?;
        Ok((next, jumped))
    }

    /// One step of the linear, unnormalized no-click equations; the
    /// normalized filter is this map followed by division by `Tr ρ`.
    pub fn linear_no_jump_step(&self, model: &AtomModel, s: &FilterState, dt: f64) -> FilterState {
        let xi = model.pulse().at_right(s.t);
        let mut next = self.no_click_flow(model.pulse(), s, xi, dt);
        next.k = self.raw_intensity(s, xi);
        next
    }
}

impl FilterState {
    /// `ρ = ρ⁰⁰ = ρ₀`, `ρ⁰¹ = ρ¹⁰ = 0` at `t = 0`.
    pub fn initial(model: &AtomModel) -> Self {
        let rho0 = *model.rho0();
        let mut s = FilterState {
            rho: rho0,
            rho01: Operator2::ZERO,
            rho10: Operator2::ZERO,
            rho00: rho0,
            t: 0.0,
            k: 0.0,
        };
        let xi = model.pulse().at_right(0.0);
        s.k = FilterKernel::new(model).raw_intensity(&s, xi).max(0.0);
        s
    }

    /// `max |ρ¹⁰ − (ρ⁰¹)†|`
    pub fn adjoint_defect(&self) -> f64 {
        self.rho10.max_abs_diff(&self.rho01.dagger())
    }
}

/// One filter step; see [`FilterKernel::step`].
fn rate_bound(model: &AtomModel) -> f64 {
    let root = model.params().decay().sqrt() + model.pulse().peak_amplitude();
    root * root
}

pub fn filter_step(s: &FilterState, model: &AtomModel, dt: f64, u: f64) -> Result<(FilterState, bool)> {
    FilterKernel::new(model).step(model, s, dt, u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed0: u64,
    /// Times at which states are recorded, non-decreasing within `[0, t_end]`.
    pub output_grid: Vec<f64>,
}

impl SdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end must be finite and non-negative"));
        }
        if self.output_grid.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end * (1.0 + 1e-12)))
            || self.output_grid.windows(2).any(|w| w[1] < w[0])
        {
            return Err(Error::invalid("output grid must be non-decreasing within [0, t_end]"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Upper bound on `k·dt` over the run, from `k ≤ (√Γ + |ξ|)²`.
    pub fn max_jump_probability(&self, model: &AtomModel) -> f64 {
        rate_bound(model) * self.dt
    }

    pub fn jump_probability_too_large(&self, model: &AtomModel) -> bool {
        self.max_jump_probability(model) > JUMP_PROBABILITY_WARNING
    }

    fn sample_steps(&self) -> Vec<usize> {
        self.output_grid
            .iter()
            .map(|t| ((t / self.dt).round() as usize).min(self.n_steps()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: FilterState,
    /// Clicks recorded in `[0, t)`.
    pub jumps: usize,
    /// `∫₀ᵗ k_s ds` along this trajectory.
    pub integrated_intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub trajectory: u64,
    pub jump_times: Vec<f64>,
    pub samples: Vec<TrajectorySample>,
    /// Clicks beyond the second. Zero for every valid run; counted rather
    /// than dropped so that a violation is visible.
    pub excess_jumps: usize,
}

/// Most clicks a two-level atom fed one photon can produce.
pub const MAX_JUMPS: usize = 2;

/// One realization of the filter, a pure function of
/// `(model, cfg.dt, cfg.t_end, cfg.output_grid, cfg.seed0, trajectory)`.
pub fn run_trajectory(model: &AtomModel, cfg: &SdeConfig, trajectory: u64) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let kernel = FilterKernel::with_step(model, cfg.dt);
    let rng = CounterRng::new(cfg.seed0);
    let n = cfg.n_steps();
    let sample_at = cfg.sample_steps();
    let mut next_sample = 0;
    let mut state = FilterState::initial(model);
    let mut jump_times = Vec::new();
    let mut samples = Vec::with_capacity(sample_at.len());
    let mut integrated = 0.0;
    let mut excess = 0;

    let mut record = |step: usize, state: &FilterState, jumps: usize, integrated: f64, next: &mut usize| {
        while *next < sample_at.len() && sample_at[*next] == step {
            samples.push(TrajectorySample {
                t: step as f64 * cfg.dt,
                state: *state,
                jumps,
                integrated_intensity: integrated,
            });
            *next += 1;
        }
    };

    record(0, &state, 0, 0.0, &mut next_sample);
    for step in 0..n {
        state.t = step as f64 * cfg.dt;
        let u = rng.uniform(trajectory, step as u64);
        integrated += state.k * cfg.dt;
        let (next, jumped) = kernel.step(model, &state, cfg.dt, u)?;
        if jumped {
            if jump_times.len() >= MAX_JUMPS {
                excess += 1;
            }
            jump_times.push(state.t);
        }
        state = next;
        record(step + 1, &state, jump_times.len(), integrated, &mut next_sample);
    }
    Ok(TrajectoryRecord {
        seed: cfg.seed0,
        trajectory,
        jump_times,
        samples,
        excess_jumps: excess,
    })
}

/// Mergeable partial sums over trajectories, one slot per output time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    times: Vec<f64>,
    n: u64,
    sum: Vec<Operator2>,
    /// Sums of squares of `(ρ_gg, ρ_ee, Re ρ_ge, Im ρ_ge)`.
    sum_sq: Vec<[f64; 4]>,
    /// Histogram of click counts `0, 1, 2, more`.
    counts: Vec<[u64; 4]>,
    intensity: Vec<f64>,
    intensity_sq: Vec<f64>,
    excess_jumps: u64,
}

fn entries(rho: &Operator2) -> [f64; 4] {
    [rho.gg().re, rho.ee().re, rho.ge().re, rho.ge().im]
}

impl EnsembleAccumulator {
    pub fn new(times: &[f64]) -> Self {
        let m = times.len();
        EnsembleAccumulator {
            times: times.to_vec(),
            n: 0,
            sum: alloc::vec![Operator2::ZERO; m],
            sum_sq: alloc::vec![[0.0; 4]; m],
            counts: alloc::vec![[0; 4]; m],
            intensity: alloc::vec![0.0; m],
            intensity_sq: alloc::vec![0.0; m],
            excess_jumps: 0,
        }
    }

    pub fn add(&mut self, record: &TrajectoryRecord) {
        for (i, s) in record.samples.iter().enumerate().take(self.times.len()) {
            self.sum[i] += s.state.rho;
            for (acc, v) in self.sum_sq[i].iter_mut().zip(entries(&s.state.rho)) {
                *acc += v * v;
            }
            self.counts[i][s.jumps.min(3)] += 1;
            self.intensity[i] += s.integrated_intensity;
            self.intensity_sq[i] += s.integrated_intensity * s.integrated_intensity;
        }
        self.n += 1;
        self.excess_jumps += record.excess_jumps as u64;
    }

    /// Combine two partial ensembles over the same output times.
    pub fn merge(mut self, other: EnsembleAccumulator) -> Self {
        debug_assert_eq!(self.times, other.times);
        self.n += other.n;
        self.excess_jumps += other.excess_jumps;
        for i in 0..self.times.len() {
            self.sum[i] += other.sum[i];
            for c in 0..4 {
                self.sum_sq[i][c] += other.sum_sq[i][c];
                self.counts[i][c] += other.counts[i][c];
            }
            self.intensity[i] += other.intensity[i];
            self.intensity_sq[i] += other.intensity_sq[i];
        }
        self
    }

    pub fn trajectories(&self) -> u64 {
        self.n
    }

    pub fn excess_jumps(&self) -> u64 {
        self.excess_jumps
    }

    pub fn finish(&self) -> Vec<EnsemblePoint> {
        let n = self.n.max(1) as f64;
        let se = |sum: f64, sq: f64| {
            let mean = sum / n;
            let var = (sq / n - mean * mean).max(0.0);
            (var / (n - 1.0).max(1.0)).sqrt()
        };
        (0..self.times.len())
            .map(|i| {
                let mean = self.sum[i].scale_re(1.0 / n);
                let m = entries(&self.sum[i]);
                let mut std_err = [0.0; 4];
                for c in 0..4 {
                    std_err[c] = se(m[c], self.sum_sq[i][c]);
                }
                let h = self.counts[i];
                let freq = [h[0] as f64 / n, h[1] as f64 / n, h[2] as f64 / n, h[3] as f64 / n];
                let mean_counts = freq[1] + 2.0 * freq[2] + 3.0 * freq[3];
                let second = freq[1] + 4.0 * freq[2] + 9.0 * freq[3];
                EnsemblePoint {
                    t: self.times[i],
                    mean,
                    std_err,
                    count_frequencies: freq,
                    mean_counts,
                    mean_counts_se: ((second - mean_counts * mean_counts).max(0.0) / (n - 1.0).max(1.0)).sqrt(),
                    mean_intensity: self.intensity[i] / n,
                    mean_intensity_se: se(self.intensity[i], self.intensity_sq[i]),
                }
            })
            .collect()
    }
}

/// Ensemble statistics at one output time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsemblePoint {
    pub t: f64,
    pub mean: Operator2,
    /// Standard errors of `(ρ_gg, ρ_ee, Re ρ_ge, Im ρ_ge)`.
    pub std_err: [f64; 4],
    /// Fractions of trajectories with 0, 1, 2 and more clicks by `t`.
    pub count_frequencies: [f64; 4],
    pub mean_counts: f64,
    pub mean_counts_se: f64,
    pub mean_intensity: f64,
    pub mean_intensity_se: f64,
}

/// Smallest ensemble accepted by [`ensemble_average`].
pub const MIN_TRAJECTORIES: usize = 100;

/// Serial ensemble over trajectories `0..cfg.n_traj`.
pub fn ensemble_average(model: &AtomModel, cfg: &SdeConfig) -> Result<Vec<EnsemblePoint>> {
    Ok(ensemble_range(model, cfg, 0..cfg.n_traj as u64)?.finish())
}

/// Partial ensemble over a range of trajectory indices.
pub fn ensemble_range(
    model: &AtomModel,
    cfg: &SdeConfig,
    range: core::ops::Range<u64>,
) -> Result<EnsembleAccumulator> {
    if cfg.n_traj < MIN_TRAJECTORIES {
        return Err(Error::precondition("ensemble averages need at least 100 trajectories"));
    }
    cfg.validate()?;
    let mut acc = EnsembleAccumulator::new(&cfg.output_grid);
    for traj in range {
        acc.add(&run_trajectory(model, cfg, traj)?);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Ket2;
    use crate::pulse::ModelParams;

    fn model(psi: Ket2, pulse: PulseEnvelope) -> AtomModel {
        AtomModel::pure(ModelParams::new(1.0, 0.0).unwrap(), pulse, psi).unwrap()
    }

    #[test]
    fn closed_form_propagator_matches_matrix_exponential() {
        for (decay, detuning) in [(1.0, 0.0), (0.7, 0.4), (2.0, -1.3)] {
            let m = AtomModel::pure(
                ModelParams::new(decay, detuning).unwrap(),
                PulseEnvelope::square(0.5).unwrap(),
                Ket2::ground(),
            )
            .unwrap();
            let kernel = FilterKernel::new(&m);
            let lind = Lindbladian::new(&m);
            let l = lind.coupling();
            let g = lind.hamiltonian().scale(C64::new(0.0, -1.0)) - (l.dagger() * l).scale_re(0.5);
            let xi = C64::new(0.3, -0.2);
            for dt in [1e-3, 0.1, 1.0] {
                let a = Operator4::from_blocks([[g, Operator2::ZERO], [l.dagger().scale(-xi), g]]);
                let exact = crate::linalg::expm4(&a.scale(C64::new(dt, 0.0))).unwrap();
                assert!(kernel.no_click_propagator(xi, dt).max_abs_diff(&exact) < 1e-14);
            }
        }
    }

    #[test]
    fn structured_flow_matches_dense_sandwich() {
        let c = C64::new;
        let pulse = PulseEnvelope::exponential(0.7).unwrap();
        let m = AtomModel::pure(ModelParams::new(1.3, 0.4).unwrap(), pulse.clone(), Ket2::plus()).unwrap();
        let s = FilterState {
            rho: Operator2::new(c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)),
            rho01: Operator2::new(c(0.3, 0.1), c(-0.2, 0.05), c(0.07, 0.3), c(0.2, -0.4)),
            rho10: Operator2::new(c(0.3, -0.1), c(0.07, -0.3), c(-0.2, -0.05), c(0.2, 0.4)),
            rho00: Operator2::new(c(0.5, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)),
            t: 0.8,
            k: 0.0,
        };
        let xi = c(0.45, -0.1);
        for dt in [1e-3, 0.05] {
            for kernel in [FilterKernel::new(&m), FilterKernel::with_step(&m, dt)] {
                let v = kernel.no_click_propagator(xi, dt);
                let w = Operator4::from_blocks([
                    [s.rho00, s.rho01],
                    [s.rho10, s.rho - s.rho00.scale_re(pulse.tail_at(s.t))],
                ]);
                let w = v * w * v.dagger();
                let f = kernel.no_click_flow(&pulse, &s, xi, dt);
                assert!(f.rho00.max_abs_diff(&w.block(0, 0)) < 1e-15);
                assert!(f.rho01.max_abs_diff(&w.block(0, 1)) < 1e-15);
                assert!(f.rho10.max_abs_diff(&w.block(1, 0)) < 1e-15);
                let rho = w.block(1, 1) + w.block(0, 0).scale_re(pulse.tail_at(s.t + dt));
                assert!(f.rho.max_abs_diff(&rho) < 1e-15);
            }
        }
    }

    #[test]
    fn ground_state_without_field_is_fixed() {
        let m = model(Ket2::ground(), PulseEnvelope::vacuum());
        let s = FilterState::initial(&m);
        assert_eq!(s.k, 0.0);
        let (next, jumped) = filter_step(&s, &m, 1e-3, 0.0).unwrap();
        assert!(!jumped);
        assert!(next.rho.max_abs_diff(&s.rho) < 1e-16);
    }

    #[test]
    fn excited_jump_lands_in_ground() {
        let m = model(Ket2::excited(), PulseEnvelope::vacuum());
        let s = FilterState::initial(&m);
        assert!((s.k - 1.0).abs() < 1e-15);
        let (next, jumped) = filter_step(&s, &m, 1e-3, 0.0).unwrap();
        assert!(jumped);
        assert!(next.rho.max_abs_diff(&Ket2::ground().projector()) < 1e-15);
    }

    #[test]
    fn drift_keeps_unit_trace() {
        let m = model(Ket2::plus(), PulseEnvelope::square(0.5).unwrap());
        let mut s = FilterState::initial(&m);
        for _ in 0..500 {
            s = filter_step(&s, &m, 1e-3, 0.999_999).unwrap().0;
            assert!((s.rho.trace().re - 1.0).abs() < 1e-14);
            assert!(s.adjoint_defect() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = SdeConfig {
            dt: 1e-3,
            t_end: 1.0,
            n_traj: 10,
            seed0: 1,
            output_grid: alloc::vec![0.0, 2.0],
        };
        assert!(cfg.validate().is_err());
        let m = model(Ket2::ground(), PulseEnvelope::square(0.5).unwrap());
        let cfg = SdeConfig {
            output_grid: alloc::vec![0.0, 1.0],
            ..cfg
        };
        assert!(matches!(ensemble_average(&m, &cfg), Err(Error::Precondition(_))));
    }
}
