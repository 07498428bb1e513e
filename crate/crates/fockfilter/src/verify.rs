//! The acceptance checks, shared by `fockfilter verify` and the
//! `acceptance` test target.
//!
//! Each criterion produces one or more measured residuals with a
//! tolerance; criteria with a time budget also report their runtime as a
//! measure. A criterion passes when all its measures do.

use std::time::Instant;

use fockfilter_core::apriori::{apriori_closed_form, apriori_from_counting, integrate_hierarchy};
use fockfilter_core::collision::convergence_study;
use fockfilter_core::filter::SdeConfig;
use fockfilter_core::linalg::trace_distance;
use fockfilter_core::povm::{count_probs, povm, verify_povm_identities};
use fockfilter_core::trajectory::{first_count_normalization, prob_no_count, second_count_normalization};
use fockfilter_core::{AtomModel, Ket2, ModelParams, PulseEnvelope};
use serde::Serialize;

use crate::commands::{figure1_rows, Figure1Row, FIGURE1_RATIOS};
use crate::ensemble::parallel_ensemble;
use crate::error::{CliError, Result};
use crate::spec::{Command, ExperimentSpec};

/// `figure1` output at default settings, recorded from the closed form.
pub const FIGURE1_BASELINE: &str = include_str!("../tests/data/figure1_baseline.csv");

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "povm completeness"),
    (2, "povm reduction identities"),
    (3, "three-route a-priori agreement"),
    (4, "monte-carlo consistency"),
    (5, "collision convergence order"),
    (6, "limits"),
    (7, "detection-density normalizations"),
    (8, "mean-count curves"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Criteria to run, all when empty.
    pub only: Vec<u8>,
    pub seed: u64,
    /// Factor applied to every tolerance; 1 in normal use.
    pub tolerance_scale: f64,
    pub mc_trajectories: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            only: Vec::new(),
            seed: 1,
            tolerance_scale: 1.0,
            mc_trajectories: 20_000,
        }
    }
}

impl VerifyOptions {
    pub fn from_spec(spec: &ExperimentSpec) -> Result<Self> {
        if let Some(bad) = spec.only.iter().find(|c| !(1..=8).contains(*c)) {
            return Err(CliError::usage(format!("no criterion {bad}; expected 1 to 8")));
        }
        Ok(VerifyOptions {
            only: spec.only.clone(),
            seed: spec.seed,
            tolerance_scale: spec.tolerance_scale,
            ..VerifyOptions::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measure {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub measures: Vec<Measure>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.measures.iter().all(|m| m.passed)
    }

    pub fn label(&self) -> String {
        format!("criterion {}: {}", self.id, self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub criteria: Vec<CriterionReport>,
}

/// One output row per measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub criterion: u8,
    pub check: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(CriterionReport::passed)
    }

    /// `criterion N: name / measure` for each failed measure.
    pub fn failed(&self) -> Vec<String> {
        self.criteria
            .iter()
            .flat_map(|c| {
                c.measures
                    .iter()
                    .filter(|m| !m.passed)
                    .map(move |m| format!("{} / {}", c.label(), m.name))
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<VerifyRow> {
        self.criteria
            .iter()
            .flat_map(|c| {
                c.measures.iter().map(move |m| VerifyRow {
                    criterion: c.id,
                    check: m.name.clone(),
                    passed: m.passed,
                    residual: m.residual,
                    tolerance: m.tolerance,
                })
            })
            .collect()
    }
}

/// Collects measures of one criterion.
struct Checker {
    scale: f64,
    measures: Vec<Measure>,
}

impl Checker {
    /// Record `residual ≤ tolerance`; a NaN residual fails.
    fn at_most(&mut self, name: impl Into<String>, residual: f64, tolerance: f64) {
        let tolerance = tolerance * self.scale;
        self.measures.push(Measure {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        });
    }

    fn within(&mut self, name: impl Into<String>, value: f64, lo: f64, hi: f64) {
        // Residual is the distance outside [lo, hi], zero inside.
        let residual = if value.is_nan() { f64::NAN } else { (lo - value).max(value - hi).max(0.0) };
        self.at_most(format!("{} = {value:.4} in [{lo}, {hi}]", name.into()), residual, 0.0);
    }
}

fn params(detuning: f64) -> ModelParams {
    ModelParams::new(1.0, detuning).expect("valid rates")
}

fn presets() -> [(&'static str, PulseEnvelope); 2] {
    [
        ("square", PulseEnvelope::square(0.5).expect("valid bandwidth")),
        ("exponential", PulseEnvelope::exponential(0.5).expect("valid bandwidth")),
    ]
}

fn starts() -> [(&'static str, Ket2); 3] {
    [("g", Ket2::ground()), ("e", Ket2::excited()), ("plus", Ket2::plus())]
}

fn model(detuning: f64, pulse: &PulseEnvelope, psi: Ket2) -> Result<AtomModel> {
    Ok(AtomModel::pure(params(detuning), pulse.clone(), psi)?)
}

fn povm_completeness(c: &mut Checker) -> Result<()> {
    for (name, pulse) in presets() {
        for detuning in [0.0, 0.5] {
            let m = model(detuning, &pulse, Ket2::ground())?;
            let mut worst: f64 = 0.0;
            for i in 0..50 {
                worst = worst.max(povm(&m, 6.0 * i as f64 / 49.0)?.completeness_defect());
            }
            c.at_most(format!("{name}, delta0 = {detuning}"), worst, 1e-9);
        }
    }
    Ok(())
}

fn reduction_identities(c: &mut Checker) -> Result<()> {
    let [(sq, square), (ex, exponential)] = presets();
    for (name, pulse, detuning) in [(sq, &square, 0.0), (ex, &exponential, 0.0), (ex, &exponential, 0.5)] {
        let m = model(detuning, pulse, Ket2::ground())?;
        let mut worst: f64 = 0.0;
        for t in [0.5, 2.0, 6.0] {
            worst = worst.max(verify_povm_identities(&m, t, 1e-10)?.max());
        }
        c.at_most(format!("{name}, delta0 = {detuning}"), worst, 1e-7);
    }
    Ok(())
}

fn three_routes(c: &mut Checker) -> Result<()> {
    let grid: Vec<f64> = (0..=20).map(|i| 0.25 * i as f64).collect();
    for (pname, pulse) in presets() {
        for (sname, psi) in starts() {
            let m = model(0.0, &pulse, psi)?;
            let mut worst: f64 = 0.0;
            for s in integrate_hierarchy(&m, &grid)? {
                let closed = apriori_closed_form(&m, s.t)?;
                let counting = apriori_from_counting(&m, s.t, 1e-11)?;
                worst = worst
                    .max(trace_distance(&closed, &s.varrho)?)
                    .max(trace_distance(&closed, &counting)?)
                    .max(trace_distance(&s.varrho, &counting)?);
            }
            c.at_most(format!("{pname}, rho0 = {sname}"), worst, 1e-6);
        }
    }
    Ok(())
}

/// Largest `|f − p|/σ` over the count outcomes, with `σ` the binomial
/// standard deviation of a frequency over `n` trials. An outcome of zero
/// probability must never occur.
fn count_z_score(freq: &[f64; 4], probs: [f64; 3], n: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for m in 0..4 {
        let p = if m < 3 { probs[m].clamp(0.0, 1.0) } else { 0.0 };
        let sigma = (p * (1.0 - p) / n).sqrt();
        let gap = (freq[m] - p).abs();
        let z = if sigma > 0.0 {
            gap / sigma
        } else if gap > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(z);
    }
    worst
}

fn monte_carlo(c: &mut Checker, opts: &VerifyOptions) -> Result<()> {
    let pulse = PulseEnvelope::exponential(0.5)?;
    let m = model(0.0, &pulse, Ket2::ground())?;
    let cfg = SdeConfig {
        dt: 1e-3,
        t_end: 10.0,
        n_traj: opts.mc_trajectories,
        seed0: opts.seed,
        output_grid: (0..=20).map(|i| 0.5 * i as f64).collect(),
    };
    let acc = parallel_ensemble(&m, &cfg)?;
    let n = acc.trajectories() as f64;
    let mut distance: f64 = 0.0;
    let mut z: f64 = 0.0;
    for p in acc.finish() {
        distance = distance.max(trace_distance(&p.mean, &apriori_closed_form(&m, p.t)?)?);
        let probs = povm(&m, p.t)?.probabilities(m.rho0());
        z = z.max(count_z_score(&p.count_frequencies, probs, n));
    }
    c.at_most("trace distance of the ensemble mean", distance, 0.01);
    c.at_most("count distribution, max |z|", z, 3.0);
    c.at_most("clicks beyond the second", acc.excess_jumps() as f64, 0.0);
    Ok(())
}

fn collision_order(c: &mut Checker) -> Result<()> {
    for (name, pulse) in presets() {
        let m = model(0.0, &pulse, Ket2::ground())?;
        let table = convergence_study(&m, &[4e-3, 2e-3, 1e-3], 6.0, 60)?;
        c.within(format!("{name}, fitted order"), table.order, 0.8, 1.2);
    }
    Ok(())
}

fn limits(c: &mut Checker) -> Result<()> {
    for (pname, pulse) in presets() {
        for (sname, psi, excited) in [("g", Ket2::ground(), 0.0), ("e", Ket2::excited(), 1.0)] {
            let m = model(0.0, &pulse, psi)?;
            let tag = format!("{pname}, rho0 = {sname}");
            c.at_most(format!("{tag}: |P_0(0) - 1|"), (prob_no_count(&m, 0.0)? - 1.0).abs(), 0.0);
            c.at_most(format!("{tag}: P_40(0)"), prob_no_count(&m, 40.0)?.abs(), 1e-6);
            let mean = count_probs(&m, 40.0)?.mean;
            c.at_most(format!("{tag}: |mean_40 - (1 + p_e)|"), (mean - 1.0 - excited).abs(), 1e-3);
        }
        let m = model(0.0, &pulse, Ket2::ground())?;
        let mut worst: f64 = 0.0;
        for i in 1..=400 {
            let s = count_probs(&m, 0.1 * i as f64)?;
            let q = s.mandel_q.ok_or_else(|| CliError::usage("mean count vanished on the check grid"))?;
            worst = worst.max((q + s.mean).abs());
        }
        c.at_most(format!("{pname}, rho0 = g: |Q + mean|"), worst, 1e-9);
    }
    Ok(())
}

fn normalizations(c: &mut Checker) -> Result<()> {
    for (pname, pulse) in presets() {
        for (sname, psi) in starts() {
            let m = model(0.0, &pulse, psi)?;
            let one = first_count_normalization(&m, 1e-10)?;
            c.at_most(format!("{pname}, rho0 = {sname}: first count"), (one - 1.0).abs(), 1e-6);
        }
        let m = model(0.0, &pulse, Ket2::excited())?;
        let two = second_count_normalization(&m, 1e-10)?;
        c.at_most(format!("{pname}, rho0 = e: count pair"), (two - 1.0).abs(), 1e-6);
    }
    Ok(())
}

fn parse_baseline(text: &str) -> Result<Vec<Figure1Row>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<Figure1Row>, _>>()
        .map_err(|e| CliError::Format {
            path: "figure1 baseline".into(),
            message: e.to_string(),
        })
}

fn figure1(c: &mut Checker) -> Result<()> {
    let rows = figure1_rows(&ExperimentSpec::defaults(Command::Figure1))?;
    let mut curves = 0;
    for name in ["square", "exponential"] {
        for ratio in FIGURE1_RATIOS {
            let curve: Vec<&Figure1Row> = rows.iter().filter(|r| r.pulse == name && r.omega_ratio == ratio).collect();
            if curve.is_empty() {
                continue;
            }
            curves += 1;
            let drop = curve
                .windows(2)
                .map(|w| w[0].mean_counts - w[1].mean_counts)
                .fold(0.0, f64::max);
            let tag = format!("{name}, omega/gamma = {ratio}");
            c.at_most(format!("{tag}: largest decrease"), drop, 1e-12);
            let last = curve.last().expect("non-empty curve").mean_counts;
            c.at_most(format!("{tag}: |final - 1|"), (last - 1.0).abs(), 1e-6);
        }
    }
    c.at_most("missing curves", (6 - curves) as f64, 0.0);

    let baseline = parse_baseline(FIGURE1_BASELINE)?;
    let mut worst: f64 = if baseline.len() == rows.len() { 0.0 } else { f64::INFINITY };
    for (a, b) in rows.iter().zip(&baseline) {
        if a.pulse != b.pulse || a.omega_ratio != b.omega_ratio || a.t != b.t {
            worst = f64::INFINITY;
            break;
        }
        worst = worst.max((a.mean_counts - b.mean_counts).abs());
    }
    c.at_most("deviation from the recorded baseline", worst, 1e-12);
    Ok(())
}

/// Wall-clock limit per criterion, where one applies.
pub fn budget_seconds(id: u8) -> Option<f64> {
    match id {
        1 => Some(5.0),
        2 => Some(10.0),
        3 => Some(60.0),
        4 => Some(120.0),
        5 => Some(60.0),
        7 => Some(30.0),
        _ => None,
    }
}

/// Run one criterion. Errors raised by the library become failed measures.
pub fn run_criterion(id: u8, opts: &VerifyOptions) -> CriterionReport {
    let name = CRITERIA.iter().find(|(i, _)| *i == id).map_or("unknown", |(_, n)| n);
    let mut c = Checker {
        scale: opts.tolerance_scale,
        measures: Vec::new(),
    };
    let start = Instant::now();
    let outcome = match id {
        1 => povm_completeness(&mut c),
        2 => reduction_identities(&mut c),
        3 => three_routes(&mut c),
        4 => monte_carlo(&mut c, opts),
        5 => collision_order(&mut c),
        6 => limits(&mut c),
        7 => normalizations(&mut c),
        8 => figure1(&mut c),
        _ => Err(CliError::usage(format!("no criterion {id}"))),
    };
    let seconds = start.elapsed().as_secs_f64();
    if let Err(e) = outcome {
        c.measures.push(Measure {
            name: format!("error: {e}"),
            residual: f64::NAN,
            tolerance: 0.0,
            passed: false,
        });
    }
    if let Some(limit) = budget_seconds(id) {
        // Runtime limits are not scaled by the tolerance hook.
        c.measures.push(Measure {
            name: "runtime seconds".into(),
            residual: seconds,
            tolerance: limit,
            passed: seconds <= limit,
        });
    }
    CriterionReport {
        id,
        name,
        measures: c.measures,
        seconds,
    }
}

pub fn run(opts: &VerifyOptions) -> Report {
    let criteria = CRITERIA
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| opts.only.is_empty() || opts.only.contains(id))
        .map(|id| {
            let r = run_criterion(id, opts);
            log::info!("{} {} ({:.2} s)", if r.passed() { "PASS" } else { "FAIL" }, r.label(), r.seconds);
            r
        })
        .collect();
    Report { criteria }
}
