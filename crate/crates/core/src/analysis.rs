//! Evaluation machinery: per-run metric series and cross-seed aggregation,
//! the partition unevenness measure (a 1-D optimal transport distance in the
//! cumulative-stepsize metric), exact offline baselines by enumeration,
//! log-log rate fitting, and the two-phase adversarial gap demonstration.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dual_learner::{run_online, RunTrace, StepSchedule};
use crate::error::{Error, Result};
use crate::goalset::{GoalSpec, MEMBERSHIP_TOL};
use crate::input_models::Partition;
use crate::instances::{gen_two_phase, TwoPhaseScenario};
use crate::oracles::{LocalDecision, LocalOracle};

/// Default cap on the product of per-step decision counts in
/// [`offline_bruteforce`].
pub const BRUTEFORCE_LIMIT: f64 = 2e7;

/// Per-run trajectories on the 1..=T grid: running average reward,
/// running average goal violation (distance of the impact average to the
/// goal set), the price norm seen by each step, and the stepsize used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub t: Vec<usize>,
    pub reward_avg: Vec<f64>,
    pub goalvio_avg: Vec<f64>,
    pub p_norm: Vec<f64>,
    pub eta: Vec<f64>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_reward_avg(&self) -> Option<f64> {
        self.reward_avg.last().copied()
    }

    pub fn final_goalvio_avg(&self) -> Option<f64> {
        self.goalvio_avg.last().copied()
    }
}

/// Running averages from a trace. The violation at t is the exact Euclidean
/// distance of the impact average to the goal set, zero inside it.
pub fn compute_metrics(trace: &RunTrace) -> MetricSeries {
    let n = trace.len();
    let mut out = MetricSeries {
        t: Vec::with_capacity(n),
        reward_avg: Vec::with_capacity(n),
        goalvio_avg: Vec::with_capacity(n),
        p_norm: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
    };
    let m = trace.goal.dim();
    let mut cum_reward = 0.0;
    let mut cum_impact = vec![0.0; m];
    let mut avg = vec![0.0; m];
    for rec in &trace.records {
        cum_reward += rec.reward;
        for (c, y) in cum_impact.iter_mut().zip(&rec.impact) {
            *c += y;
        }
        let t = rec.t as f64;
        for (a, c) in avg.iter_mut().zip(&cum_impact) {
            *a = c / t;
        }
        out.t.push(rec.t);
        out.reward_avg.push(cum_reward / t);
        out.goalvio_avg.push(trace.goal.distance_to_goal(&avg));
        out.p_norm.push(rec.p_norm);
        out.eta.push(rec.eta);
    }
    out
}

/// Pointwise mean/min/max across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats3 {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

fn stats_of<F: Fn(&MetricSeries) -> &[f64]>(series: &[MetricSeries], field: F) -> Stats3 {
    let n = series[0].len();
    let mut stats = Stats3 {
        mean: vec![0.0; n],
        min: vec![f64::INFINITY; n],
        max: vec![f64::NEG_INFINITY; n],
    };
    for s in series {
        for (i, &v) in field(s).iter().enumerate() {
            stats.mean[i] += v;
            stats.min[i] = stats.min[i].min(v);
            stats.max[i] = stats.max[i].max(v);
        }
    }
    let k = series.len() as f64;
    for v in &mut stats.mean {
        *v /= k;
    }
    stats
}

/// Cross-seed aggregate view on a shared time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub t: Vec<usize>,
    pub reward_avg: Stats3,
    pub goalvio_avg: Stats3,
    pub p_norm: Stats3,
}

pub fn aggregate(series: &[MetricSeries]) -> Result<AggregateSeries> {
    let first = series
        .first()
        .ok_or_else(|| Error::Config("aggregate needs at least one series".into()))?;
    if series.iter().any(|s| s.t != first.t) {
        return Err(Error::Config(
            "aggregate needs series on identical time grids".into(),
        ));
    }
    Ok(AggregateSeries {
        t: first.t.clone(),
        reward_avg: stats_of(series, |s| &s.reward_avg),
        goalvio_avg: stats_of(series, |s| &s.goalvio_avg),
        p_norm: stats_of(series, |s| &s.p_norm),
    })
}

/// Unevenness of a partition under a stepsize schedule: per-group transport
/// distances w^k between the group's time marks and the full horizon, both
/// placed on the cumulative-stepsize axis, and the weighted total
/// W = sum_k m |T^k| w^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnevennessReport {
    pub group_w: Vec<f64>,
    pub total: f64,
    /// Ground-metric positions S_t = sum of stepsizes before t.
    pub positions: Vec<f64>,
}

/// Exact 1-D optimal transport via the monotone coupling: the cost between
/// the uniform distribution on a group's positions and the uniform
/// distribution on all positions is the integral of |F_k - Fbar| over the
/// position axis, and both CDFs only change at the S_t.
pub fn unevenness(
    partition: &Partition,
    sched: &StepSchedule,
    m: usize,
) -> Result<UnevennessReport> {
    if m == 0 {
        return Err(Error::Config("unevenness needs m >= 1".into()));
    }
    let t_total = partition.horizon();
    let mut positions = Vec::with_capacity(t_total);
    let mut s = 0.0;
    for t in 1..=t_total {
        positions.push(s);
        s += sched.step_size(t, m)?;
    }

    let mut group_w = Vec::with_capacity(partition.len());
    let mut total = 0.0;
    for group in partition.groups() {
        let size = group.len() as f64;
        let mut in_group = 0usize;
        let mut next = 0usize;
        let mut w = 0.0;
        for t in 1..t_total {
            if next < group.len() && group[next] == t {
                in_group += 1;
                next += 1;
            }
            let f_k = in_group as f64 / size;
            let f_bar = t as f64 / t_total as f64;
            w += (f_k - f_bar).abs() * (positions[t] - positions[t - 1]);
        }
        total += m as f64 * size * w;
        group_w.push(w);
    }
    Ok(UnevennessReport {
        group_w,
        total,
        positions,
    })
}

/// Least-squares slope of log(value) against log(t) over the window.
/// Nonpositive samples carry no rate information on a log scale (for a
/// distance series they mean the goal was met outright at that step), so
/// the fit runs on the positive samples; when fewer than two of those
/// remain the series has essentially collapsed to zero and the slope is
/// reported as negative infinity, faster than any power rate.
pub fn loglog_slope(
    ts: &[usize],
    values: &[f64],
    window: RangeInclusive<usize>,
) -> Result<f64> {
    if ts.len() != values.len() {
        return Err(Error::Dimension {
            expected: ts.len(),
            got: values.len(),
        });
    }
    let mut in_window = 0usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in ts.iter().zip(values) {
        if window.contains(&t) {
            in_window += 1;
            if v > 0.0 {
                xs.push((t as f64).ln());
                ys.push(v.ln());
            }
        }
    }
    if in_window < 2 {
        return Err(Error::Config(format!(
            "log-log window {:?} holds {in_window} points, need at least 2",
            window
        )));
    }
    if xs.len() < 2 {
        return Ok(f64::NEG_INFINITY);
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - x_mean) * (y - y_mean);
        var += (x - x_mean) * (x - x_mean);
    }
    Ok(cov / var)
}

/// Exact offline optimum by enumerating every combination of local
/// decisions whose summed impact averages into the goal set.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub z_star: f64,
    pub decisions: Vec<Vec<f64>>,
}

/// Enumerates the full decision product (within `limit`, default 2e7) and
/// maximizes total reward subject to goal membership of the impact average.
/// Per-step menus are sorted by descending reward so the running
/// reward-plus-best-suffix bound can cut branches that cannot beat the
/// incumbent; the bound never cuts a strictly better leaf, so the optimum
/// is exact.
pub fn offline_bruteforce(
    steps: &[LocalOracle],
    goal: &GoalSpec,
    limit: Option<f64>,
) -> Result<OfflineSolution> {
    if steps.is_empty() {
        return Err(Error::Config("offline baseline needs at least one step".into()));
    }
    goal.validate()?;
    let m = goal.dim();
    for step in steps {
        step.validate()?;
        if step.impact_dim() != m {
            return Err(Error::Dimension {
                expected: m,
                got: step.impact_dim(),
            });
        }
    }
    let limit = limit.unwrap_or(BRUTEFORCE_LIMIT);
    let size: f64 = steps.iter().map(|s| s.decision_space_size()).product();
    if !(size <= limit) {
        return Err(Error::EnumerationLimit { size, limit });
    }

    let mut menus: Vec<Vec<LocalDecision>> = Vec::with_capacity(steps.len());
    for step in steps {
        let mut menu = Vec::new();
        step.for_each_decision(&mut |d| menu.push(d));
        menu.sort_by(|a, b| b.reward.total_cmp(&a.reward));
        menus.push(menu);
    }
    let mut suffix_best = vec![0.0; menus.len() + 1];
    for (i, menu) in menus.iter().enumerate().rev() {
        suffix_best[i] = suffix_best[i + 1] + menu[0].reward;
    }

    let mut search = Search {
        menus: &menus,
        suffix_best: &suffix_best,
        goal,
        t_total: steps.len() as f64,
        impact: vec![0.0; m],
        avg: vec![0.0; m],
        choice: vec![0; menus.len()],
        best: f64::NEG_INFINITY,
        best_choice: Vec::new(),
    };
    search.dfs(0, 0.0);
    if search.best_choice.is_empty() {
        return Err(Error::Infeasible);
    }
    let decisions = search
        .best_choice
        .iter()
        .enumerate()
        .map(|(t, &c)| menus[t][c].decision.clone())
        .collect();
    Ok(OfflineSolution {
        z_star: search.best,
        decisions,
    })
}

struct Search<'a> {
    menus: &'a [Vec<LocalDecision>],
    suffix_best: &'a [f64],
    goal: &'a GoalSpec,
    t_total: f64,
    impact: Vec<f64>,
    avg: Vec<f64>,
    choice: Vec<usize>,
    best: f64,
    best_choice: Vec<usize>,
}

impl Search<'_> {
    fn dfs(&mut self, idx: usize, reward: f64) {
        if reward + self.suffix_best[idx] <= self.best {
            return;
        }
        if idx == self.menus.len() {
            for (a, c) in self.avg.iter_mut().zip(&self.impact) {
                *a = c / self.t_total;
            }
            if self.goal.distance_to_goal(&self.avg) <= MEMBERSHIP_TOL && reward > self.best {
                self.best = reward;
                self.best_choice = self.choice.clone();
            }
            return;
        }
        for c in 0..self.menus[idx].len() {
            let d = &self.menus[idx][c];
            for (acc, y) in self.impact.iter_mut().zip(&d.impact) {
                *acc += y;
            }
            self.choice[idx] = c;
            let r = d.reward;
            self.dfs(idx + 1, reward + r);
            let d = &self.menus[idx][c];
            for (acc, y) in self.impact.iter_mut().zip(&d.impact) {
                *acc -= y;
            }
        }
    }
}

/// Reward ratios of the online algorithm against the offline optimum on the
/// two-phase budget instance, one ratio per second-phase scenario. The
/// offline optima are T/2 (accept everything early when the second phase is
/// a bust) and T (hold back for the boom).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseGap {
    pub ratio_accept_all: f64,
    pub ratio_reject_then_accept: f64,
}

pub fn two_phase_gap(t_total: usize) -> Result<TwoPhaseGap> {
    if t_total < 2 || t_total % 2 != 0 {
        return Err(Error::Config("two-phase horizon must be even and >= 2".into()));
    }
    let sched = StepSchedule::diminishing(1.0);
    let mut rewards = [0.0; 2];
    for (slot, scenario) in [TwoPhaseScenario::Bust, TwoPhaseScenario::Boom]
        .into_iter()
        .enumerate()
    {
        let inst = gen_two_phase(t_total, scenario)?;
        let trace = run_online(&inst.steps, &inst.goal, &sched, None)?;
        rewards[slot] = trace.total_reward();
    }
    Ok(TwoPhaseGap {
        ratio_accept_all: rewards[0] / (t_total as f64 / 2.0),
        ratio_reject_then_accept: rewards[1] / t_total as f64,
    })
}
