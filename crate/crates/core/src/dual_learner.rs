//! The online dual-price learner.
//!
//! One price vector p ∈ C° is maintained across the horizon. Each step t:
//! the local oracle solves max { r - p·y : Ω^t } and commits its decision;
//! the goal set supplies a support point v̂ ∈ argmax_{v∈Q} p·v; and the
//! price takes a projected subgradient step
//!
//!   p ← proj_{C°}( p - η^t (v̂ - ŷ) ).
//!
//! The same machinery evaluates the offline dual objective
//! D(p) = T·h_Ψ(p) + Σ_t max { r - p·y : Ω^t } for p ∈ C° (infinite
//! outside), estimates its infimum by projected subgradient descent as the
//! benchmark upper bound on the convexified offline optimum, and computes
//! the dual regret of a recorded run against such a reference value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goalset::{GoalSpec, InstanceConstants};
use crate::oracles::{LocalDecision, LocalOracle};
use crate::vecmath::{add_assign, add_scaled, dot, norm2};

/// Price vectors must stay within this distance of the polar cone after
/// every projection; exceeding it means the projection logic is broken.
pub const POLAR_GUARD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    Diminishing,
    Constant,
}

/// Stepsize schedule η^t: diminishing min(γ/m, γ/√(mt)) needs no horizon;
/// constant γ/√(mT) requires one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub gamma: f64,
    pub mode: ScheduleMode,
    pub horizon: Option<usize>,
}

impl StepSchedule {
    pub fn diminishing(gamma: f64) -> Self {
        StepSchedule {
            gamma,
            mode: ScheduleMode::Diminishing,
            horizon: None,
        }
    }

    pub fn constant(gamma: f64, horizon: usize) -> Self {
        StepSchedule {
            gamma,
            mode: ScheduleMode::Constant,
            horizon: Some(horizon),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "stepsize scale gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.mode == ScheduleMode::Constant && self.horizon.map_or(true, |t| t == 0) {
            return Err(Error::Config(
                "constant stepsize mode requires a positive horizon".into(),
            ));
        }
        Ok(())
    }

    pub fn step_size(&self, t: usize, m: usize) -> Result<f64> {
        debug_assert!(t >= 1 && m >= 1);
        match self.mode {
            ScheduleMode::Diminishing => {
                let mf = m as f64;
                Ok((self.gamma / mf).min(self.gamma / (mf * t as f64).sqrt()))
            }
            ScheduleMode::Constant => {
                let horizon = self.horizon.ok_or_else(|| {
                    Error::Config("constant stepsize mode requires a horizon".into())
                })?;
                Ok(self.gamma / ((m * horizon) as f64).sqrt())
            }
        }
    }
}

/// Mutable state of one online run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualState {
    pub price: Vec<f64>,
    pub t: usize,
    pub cum_impact: Vec<f64>,
    pub cum_reward: f64,
}

impl DualState {
    pub fn new(m: usize) -> Self {
        DualState {
            price: vec![0.0; m],
            t: 1,
            cum_impact: vec![0.0; m],
            cum_reward: 0.0,
        }
    }

    fn advance(
        &mut self,
        goal: &GoalSpec,
        eta: f64,
        decision: &LocalDecision,
        support: &[f64],
    ) -> Result<()> {
        self.cum_reward += decision.reward;
        add_assign(&mut self.cum_impact, &decision.impact);
        let drift: Vec<f64> = support
            .iter()
            .zip(&decision.impact)
            .map(|(v, y)| v - y)
            .collect();
        let raw = add_scaled(&self.price, -eta, &drift);
        self.price = goal.project_polar(&raw);
        let residual = goal.polar_residual(&self.price);
        if residual > POLAR_GUARD_TOL {
            return Err(Error::PolarDrift {
                t: self.t,
                residual,
            });
        }
        self.t += 1;
        Ok(())
    }
}

/// Everything recorded about step t: the price norm entering the step, the
/// committed reward/impact, the support point, the stepsize, and the
/// oracle's objective r̂ - p·ŷ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub p_norm: f64,
    pub reward: f64,
    pub impact: Vec<f64>,
    pub support: Vec<f64>,
    pub eta: f64,
    pub oracle_obj: f64,
}

/// Result of checking the price-norm guarantee on a finished trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceNormCheck {
    pub bound: f64,
    pub max_norm: f64,
    pub violations: usize,
}

/// Full record of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub goal: GoalSpec,
    pub constants: Option<InstanceConstants>,
    pub schedule: StepSchedule,
    /// Steps whose impact fell outside the restriction box of a
    /// box-restricted run; always zero for the standard variant.
    pub box_warnings: usize,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn cumulative_impact(&self) -> Vec<f64> {
        let m = self.goal.dim();
        let mut acc = vec![0.0; m];
        for rec in &self.records {
            add_assign(&mut acc, &rec.impact);
        }
        acc
    }

    pub fn max_price_norm(&self) -> f64 {
        self.records.iter().map(|r| r.p_norm).fold(0.0, f64::max)
    }

    /// Replays the price recursion from the records; element t is the price
    /// entering step t+1 of the run (starting from zero). The replay uses
    /// the identical arithmetic as the run, so it reproduces prices bitwise.
    pub fn replay_prices(&self) -> Vec<Vec<f64>> {
        let m = self.goal.dim();
        let mut p = vec![0.0; m];
        let mut out = Vec::with_capacity(self.records.len());
        for rec in &self.records {
            out.push(p.clone());
            let drift: Vec<f64> = rec
                .support
                .iter()
                .zip(&rec.impact)
                .map(|(v, y)| v - y)
                .collect();
            p = self.goal.project_polar(&add_scaled(&p, -rec.eta, &drift));
        }
        out
    }

    /// Checks max_t ‖p^t‖₂ against the guaranteed bound
    /// (d_y² + 2 d_r) / (2 d̲) + d_y/√m. The guarantee only applies when
    /// every stepsize is at most 1/m; returns None when constants are
    /// missing or that premise fails.
    pub fn price_norm_check(&self) -> Option<PriceNormCheck> {
        let constants = self.constants?;
        let m = self.goal.dim() as f64;
        let eta_max = self.records.iter().map(|r| r.eta).fold(0.0, f64::max);
        if eta_max > 1.0 / m + 1e-12 {
            return None;
        }
        let bound = constants.price_norm_bound();
        let violations = self
            .records
            .iter()
            .filter(|r| r.p_norm > bound)
            .count();
        Some(PriceNormCheck {
            bound,
            max_norm: self.max_price_norm(),
            violations,
        })
    }
}

fn check_stream(stream: &[LocalOracle], goal: &GoalSpec) -> Result<usize> {
    if stream.is_empty() {
        return Err(Error::Config("decision stream is empty".into()));
    }
    goal.validate()?;
    let m = goal.dim();
    for step in stream {
        if step.impact_dim() != m {
            return Err(Error::Dimension {
                expected: m,
                got: step.impact_dim(),
            });
        }
    }
    Ok(m)
}

fn run_loop(
    stream: &[LocalOracle],
    goal: GoalSpec,
    sched: &StepSchedule,
    constants: Option<InstanceConstants>,
    warn_box: Option<(&[f64], &[f64])>,
) -> Result<RunTrace> {
    let m = check_stream(stream, &goal)?;
    sched.validate()?;
    if let Some(c) = &constants {
        c.validate()?;
    }

    let mut state = DualState::new(m);
    let mut records = Vec::with_capacity(stream.len());
    let mut box_warnings = 0usize;

    for (idx, oracle) in stream.iter().enumerate() {
        let t = idx + 1;
        let eta = sched.step_size(t, m)?;
        let decision = oracle.solve(&state.price)?;
        let support = goal.support_point(&state.price);
        let oracle_obj = decision.reward - dot(&state.price, &decision.impact);
        if let Some((lo, hi)) = warn_box {
            let outside = decision
                .impact
                .iter()
                .enumerate()
                .any(|(i, y)| *y < lo[i] - 1e-9 || *y > hi[i] + 1e-9);
            if outside {
                box_warnings += 1;
            }
        }
        records.push(StepRecord {
            t,
            p_norm: norm2(&state.price),
            reward: decision.reward,
            impact: decision.impact.clone(),
            support: support.clone(),
            eta,
            oracle_obj,
        });
        state.advance(&goal, eta, &decision, &support)?;
    }

    Ok(RunTrace {
        records,
        goal,
        constants,
        schedule: sched.clone(),
        box_warnings,
    })
}

/// Runs the online loop over the stream in order. Decisions are committed
/// step by step: the oracle for step t sees only the price formed by steps
/// 1..t-1.
pub fn run_online(
    stream: &[LocalOracle],
    goal: &GoalSpec,
    sched: &StepSchedule,
    constants: Option<InstanceConstants>,
) -> Result<RunTrace> {
    run_loop(stream, goal.clone(), sched, constants, None)
}

/// Box-restricted variant: the goal is replaced by its intersection with
/// [y_lower, y_upper], treated as compact, so no price projection happens.
/// Impacts escaping the box are counted as warnings on the trace, since the
/// variant's guarantees assume the box contains every reachable impact.
pub fn run_online_boxed(
    stream: &[LocalOracle],
    inner_goal: &GoalSpec,
    y_lower: &[f64],
    y_upper: &[f64],
    sched: &StepSchedule,
    constants: Option<InstanceConstants>,
) -> Result<RunTrace> {
    let goal = GoalSpec::boxed(inner_goal.clone(), y_lower.to_vec(), y_upper.to_vec());
    run_loop(
        stream,
        goal,
        sched,
        constants,
        Some((y_lower, y_upper)),
    )
}

/// Offline dual objective D(p) = T·h_Ψ(p) + Σ_t max{ r - p·y : Ω^t } for
/// p ∈ C°; signals an infinite value outside the polar cone.
pub fn dual_objective(stream: &[LocalOracle], goal: &GoalSpec, p: &[f64]) -> Result<f64> {
    check_stream(stream, goal)?;
    let residual = goal.polar_residual(p);
    if residual > POLAR_GUARD_TOL {
        return Err(Error::InfiniteDual { residual });
    }
    let support = goal.support_point(p);
    let h = dot(p, &support);
    let mut total = stream.len() as f64 * h;
    for step in stream {
        total += step.value(p)?;
    }
    Ok(total)
}

/// One evaluation of the dual objective together with its subgradient
/// T·v̂(p) - Σ_t ŷ^t(p).
fn dual_value_and_subgradient(
    stream: &[LocalOracle],
    goal: &GoalSpec,
    p: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let support = goal.support_point(p);
    let t = stream.len() as f64;
    let mut value = t * dot(p, &support);
    let mut grad: Vec<f64> = support.iter().map(|v| v * t).collect();
    for step in stream {
        let d = step.solve(p)?;
        value += d.reward - dot(p, &d.impact);
        for (g, y) in grad.iter_mut().zip(&d.impact) {
            *g -= y;
        }
    }
    Ok((value, grad))
}

/// Estimates inf_p D(p) by projected subgradient descent with steps
/// R/(G√k), where R is a structural bound on the optimal price norm
/// (max one-step reward over the goal's interior radius) and G tracks the
/// largest subgradient norm seen. Returns the best iterate and its value;
/// by weak duality the value upper-bounds the convexified offline optimum
/// no matter how well the descent converged. Deterministic given the seed,
/// which only drives the extra random restarts used for larger budgets.
pub fn estimate_dual_optimum(
    stream: &[LocalOracle],
    goal: &GoalSpec,
    iters: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let m = check_stream(stream, goal)?;
    if iters == 0 {
        return Err(Error::Config("estimator needs at least one iteration".into()));
    }

    let zeros = vec![0.0; m];
    let mut r_max: f64 = 0.0;
    for step in stream {
        r_max = r_max.max(step.value(&zeros)?);
    }
    let radius = (r_max / goal.interior_radius()).max(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_starts = if iters >= 30 { 3 } else { 1 };
    let budget = (iters / n_starts).max(1);

    let mut best_p = zeros.clone();
    let mut best_val = f64::INFINITY;

    for start in 0..n_starts {
        let mut p = if start == 0 {
            zeros.clone()
        } else {
            let span = radius / (m as f64).sqrt();
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(-span..span)).collect();
            goal.project_polar(&raw)
        };
        let mut grad_scale = 0.0f64;
        for k in 1..=budget {
            let (value, grad) = dual_value_and_subgradient(stream, goal, &p)?;
            if value < best_val {
                best_val = value;
                best_p = p.clone();
            }
            let gnorm = norm2(&grad);
            grad_scale = grad_scale.max(gnorm);
            if grad_scale <= 0.0 {
                break;
            }
            let step = radius / (grad_scale * (k as f64).sqrt());
            p = goal.project_polar(&add_scaled(&p, -step, &grad));
        }
        let (value, _) = dual_value_and_subgradient(stream, goal, &p)?;
        if value < best_val {
            best_val = value;
            best_p = p;
        }
    }

    Ok((best_p, best_val))
}

/// Dual regret of a finished run against a reference dual optimum:
/// Σ_t [p^t·v̂^t + (r̂^t - p^t·ŷ^t)] - z_ref, prices replayed from the
/// recorded updates.
pub fn dual_regret(trace: &RunTrace, z_ref: f64) -> f64 {
    let prices = trace.replay_prices();
    let mut total = 0.0;
    for (p, rec) in prices.iter().zip(&trace.records) {
        total += dot(p, &rec.support) + rec.oracle_obj;
    }
    total - z_ref
}
