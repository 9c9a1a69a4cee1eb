//! Per-step local oracles: price-directed optimization over the hard
//! feasible set of a single step, max { r - p·y : (r, x, y) ∈ Ω }.
//!
//! Three families are supported. A 0-1 knapsack whose impact is a utility
//! matrix applied to the selection, solved exactly by branch and bound with
//! a fractional-greedy bound. A cardinality-capped assortment under MNL
//! choice, solved by exact subset enumeration with a safe pruning bound.
//! And a task-assignment step that decomposes per task into a closed-form
//! argmax. All solvers are exact: the only tolerance in the system lives in
//! the floating-point padding of pruning bounds, which is chosen so a true
//! optimum can never be cut.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::dot;

/// Enumeration cap for the assortment oracle: beyond this many products the
/// exact mode refuses to run rather than silently approximate.
pub const ASSORTMENT_EXACT_LIMIT: usize = 25;

/// Item cap for the exhaustive knapsack reference solver.
pub const KNAPSACK_EXHAUSTIVE_LIMIT: usize = 20;

/// One step's committed outcome: reward, the raw decision vector, and the
/// m-dimensional impact that counts against the goal constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDecision {
    pub reward: f64,
    pub decision: Vec<f64>,
    pub impact: Vec<f64>,
}

/// 0-1 knapsack step: pick items under a weight capacity. The impact of a
/// selection is `utility * x` (one row per stakeholder), and the reward is
/// `profit · x`. For the utilitarian variant the profit of an item is the
/// column sum of its utilities, so reward = 1ᵀ U x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackStep {
    pub weights: Vec<f64>,
    pub capacity: f64,
    /// m rows (stakeholders) by n columns (items), nonnegative.
    pub utility: Vec<Vec<f64>>,
    pub profit: Vec<f64>,
}

impl KnapsackStep {
    /// Utilitarian reward: each item is worth the total utility it creates.
    pub fn utilitarian(weights: Vec<f64>, capacity: f64, utility: Vec<Vec<f64>>) -> Self {
        let n = weights.len();
        let mut profit = vec![0.0; n];
        for row in &utility {
            for (j, u) in row.iter().enumerate() {
                profit[j] += u;
            }
        }
        KnapsackStep {
            weights,
            capacity,
            utility,
            profit,
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn m(&self) -> usize {
        self.utility.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.profit.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: self.profit.len(),
            });
        }
        if !(self.capacity >= 0.0) || !self.capacity.is_finite() {
            return Err(Error::Config("knapsack capacity must be >= 0".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("knapsack weights must be positive".into()));
        }
        if self.profit.iter().any(|o| !(*o >= 0.0)) {
            return Err(Error::Config("knapsack profits must be nonnegative".into()));
        }
        for row in &self.utility {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            if row.iter().any(|u| !(*u >= 0.0) || !u.is_finite()) {
                return Err(Error::Config("utilities must be nonnegative".into()));
            }
        }
        Ok(())
    }

    fn impact_of(&self, x: &[bool]) -> Vec<f64> {
        self.utility
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x)
                    .filter(|(_, &sel)| sel)
                    .map(|(u, _)| u)
                    .sum()
            })
            .collect()
    }

    fn reward_of(&self, x: &[bool]) -> f64 {
        self.profit
            .iter()
            .zip(x)
            .filter(|(_, &sel)| sel)
            .map(|(o, _)| o)
            .sum()
    }

    /// Per-item objective coefficients at price p: profit_j - p·U[:,j].
    /// The charge accumulates separately and is subtracted once, so at the
    /// all-ones price a utilitarian profit cancels bitwise.
    fn adjusted_profits(&self, p: &[f64]) -> Vec<f64> {
        let mut charge = vec![0.0; self.n()];
        for (pi, row) in p.iter().zip(&self.utility) {
            for (cj, u) in charge.iter_mut().zip(row) {
                *cj += pi * u;
            }
        }
        self.profit
            .iter()
            .zip(&charge)
            .map(|(o, c)| o - c)
            .collect()
    }

    fn decision_from(&self, x: &[bool]) -> LocalDecision {
        LocalDecision {
            reward: self.reward_of(x),
            decision: x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            impact: self.impact_of(x),
        }
    }
}

/// Additive slack that makes a pruning bound safely optimistic under
/// floating-point summation error without keeping exact ties alive.
fn prune_pad(bound: f64) -> f64 {
    1e-9 + 1e-12 * bound.abs()
}

/// Exact knapsack solve by depth-first branch and bound. Items are visited
/// in decreasing profit-density order with a fractional-greedy upper bound;
/// a branch is cut only when even the padded bound cannot beat the
/// incumbent, so exact-value ties always survive and resolve toward the
/// lexicographically smallest selection vector.
pub fn knapsack_solve(step: &KnapsackStep, p: &[f64]) -> LocalDecision {
    let n = step.n();
    let c = step.adjusted_profits(p);

    // Only items with positive adjusted profit can improve the objective.
    let mut order: Vec<usize> = (0..n).filter(|&j| c[j] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let da = c[a] / step.weights[a];
        let db = c[b] / step.weights[b];
        db.partial_cmp(&da)
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut best_obj = 0.0;
    let mut best_x = vec![false; n];
    let mut cur_x = vec![false; n];

    struct Ctx<'a> {
        order: &'a [usize],
        c: &'a [f64],
        w: &'a [f64],
        cap: f64,
    }

    fn greedy_bound(ctx: &Ctx, from: usize, room: f64) -> f64 {
        let mut room = room;
        let mut acc = 0.0;
        for &j in &ctx.order[from..] {
            if ctx.w[j] <= room {
                acc += ctx.c[j];
                room -= ctx.w[j];
            } else {
                acc += ctx.c[j] * room / ctx.w[j];
                break;
            }
        }
        acc
    }

    fn dfs(
        ctx: &Ctx,
        idx: usize,
        obj: f64,
        used: f64,
        cur_x: &mut [bool],
        best_obj: &mut f64,
        best_x: &mut Vec<bool>,
    ) {
        let bound = obj + greedy_bound(ctx, idx, ctx.cap - used);
        if bound + prune_pad(bound) <= *best_obj {
            return;
        }
        if idx == ctx.order.len() {
            if obj > *best_obj || (obj == *best_obj && lex_less(cur_x, best_x)) {
                *best_obj = obj;
                best_x.copy_from_slice(cur_x);
            }
            return;
        }
        let j = ctx.order[idx];
        if used + ctx.w[j] <= ctx.cap {
            cur_x[j] = true;
            dfs(ctx, idx + 1, obj + ctx.c[j], used + ctx.w[j], cur_x, best_obj, best_x);
            cur_x[j] = false;
        }
        dfs(ctx, idx + 1, obj, used, cur_x, best_obj, best_x);
    }

    let ctx = Ctx {
        order: &order,
        c: &c,
        w: &step.weights,
        cap: step.capacity,
    };
    dfs(&ctx, 0, 0.0, 0.0, &mut cur_x, &mut best_obj, &mut best_x);
    step.decision_from(&best_x)
}

/// Reference solver: full enumeration over all 2^n selections.
pub fn knapsack_exhaustive(step: &KnapsackStep, p: &[f64]) -> Result<LocalDecision> {
    let n = step.n();
    if n > KNAPSACK_EXHAUSTIVE_LIMIT {
        return Err(Error::ExactModeLimit {
            got: n,
            limit: KNAPSACK_EXHAUSTIVE_LIMIT,
        });
    }
    let c = step.adjusted_profits(p);
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_x = vec![false; n];
    let mut x = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        let mut weight = 0.0;
        let mut obj = 0.0;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (mask >> j) & 1 == 1;
            if *xj {
                weight += step.weights[j];
                obj += c[j];
            }
        }
        if weight <= step.capacity && (obj > best_obj || (obj == best_obj && lex_less(&x, &best_x)))
        {
            best_obj = obj;
            best_x.copy_from_slice(&x);
        }
    }
    Ok(step.decision_from(&best_x))
}

fn lex_less(a: &[bool], b: &[bool]) -> bool {
    a < b
}

/// Assortment step under MNL choice: offer a set S with |S| ≤ cardinality;
/// a type-`type_id` customer buys product i ∈ S with probability
/// pref_i / (1 + Σ_{j∈S} pref_j). Impact is the offer indicator itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortmentStep {
    pub revenue: Vec<f64>,
    pub pref: Vec<f64>,
    pub cardinality: usize,
    pub type_id: usize,
}

impl AssortmentStep {
    pub fn m(&self) -> usize {
        self.revenue.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if self.pref.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: self.pref.len(),
            });
        }
        if self.cardinality == 0 || self.cardinality > m {
            return Err(Error::Config(format!(
                "cardinality cap must lie in 1..={m}, got {}",
                self.cardinality
            )));
        }
        if self.revenue.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::Config("revenues must be nonnegative".into()));
        }
        if self.pref.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("preference weights must be positive".into()));
        }
        Ok(())
    }

    /// Expected revenue of the offer set encoded by x.
    pub fn expected_revenue(&self, x: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 1.0;
        for i in 0..self.m() {
            if x[i] {
                num += self.revenue[i] * self.pref[i];
                den += self.pref[i];
            }
        }
        num / den
    }

    fn decision_from(&self, x: &[bool]) -> LocalDecision {
        LocalDecision {
            reward: self.expected_revenue(x),
            decision: x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            impact: x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Exact assortment solve by subset enumeration with pruning.
///
/// The bound uses that each offered product contributes at most
/// revenue_i * pref_i / (1 + pref_i) to expected revenue (the denominator
/// only grows as the set fills up), so any extension of a partial set S0 is
/// worth at most Σ_{i∈S0} b_i plus the best remaining positive b_i, where
/// b_i is that cap minus the price p_i. Exact ties survive pruning and
/// resolve toward the lexicographically smallest indicator vector.
pub fn assortment_solve(step: &AssortmentStep, p: &[f64]) -> Result<LocalDecision> {
    assortment_solve_with_limit(step, p, ASSORTMENT_EXACT_LIMIT)
}

pub fn assortment_solve_with_limit(
    step: &AssortmentStep,
    p: &[f64],
    limit: usize,
) -> Result<LocalDecision> {
    let m = step.m();
    if m > limit {
        return Err(Error::ExactModeLimit { got: m, limit });
    }
    // Per-item optimistic contributions, explored in decreasing order.
    let b: Vec<f64> = (0..m)
        .map(|i| step.revenue[i] * step.pref[i] / (1.0 + step.pref[i]) - p[i])
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| b[j].partial_cmp(&b[i]).unwrap().then(i.cmp(&j)));
    // pos_prefix[k] = sum of positive parts of the k best contributions.
    let mut pos_prefix = vec![0.0; m + 1];
    for k in 0..m {
        pos_prefix[k + 1] = pos_prefix[k] + b[order[k]].max(0.0);
    }

    struct Ctx<'a> {
        step: &'a AssortmentStep,
        p: &'a [f64],
        b: &'a [f64],
        order: &'a [usize],
        pos_prefix: &'a [f64],
        s: usize,
    }

    struct Best {
        obj: f64,
        x: Vec<bool>,
    }

    fn dfs(
        ctx: &Ctx,
        idx: usize,
        chosen: usize,
        num: f64,
        den: f64,
        price_sum: f64,
        chosen_b: f64,
        x: &mut [bool],
        best: &mut Best,
    ) {
        let obj = num / den - price_sum;
        if obj > best.obj || (obj == best.obj && lex_less(x, &best.x)) {
            best.obj = obj;
            best.x.copy_from_slice(x);
        }
        if chosen == ctx.s || idx == ctx.order.len() {
            return;
        }
        let room = ctx.s - chosen;
        let hi = (idx + room).min(ctx.order.len());
        let bound = chosen_b + (ctx.pos_prefix[hi] - ctx.pos_prefix[idx]);
        if bound + prune_pad(bound) <= best.obj {
            return;
        }
        for next in idx..ctx.order.len() {
            let i = ctx.order[next];
            x[i] = true;
            dfs(
                ctx,
                next + 1,
                chosen + 1,
                num + ctx.step.revenue[i] * ctx.step.pref[i],
                den + ctx.step.pref[i],
                price_sum + ctx.p[i],
                chosen_b + ctx.b[i],
                x,
                best,
            );
            x[i] = false;
        }
    }

    let ctx = Ctx {
        step,
        p,
        b: &b,
        order: &order,
        pos_prefix: &pos_prefix,
        s: step.cardinality,
    };
    let mut best = Best {
        obj: 0.0,
        x: vec![false; m],
    };
    let mut x = vec![false; m];
    dfs(&ctx, 0, 0, 0.0, 1.0, 0.0, 0.0, &mut x, &mut best);
    Ok(step.decision_from(&best.x))
}

/// Reference solver: every subset of size ≤ cardinality, no pruning.
pub fn assortment_exhaustive(step: &AssortmentStep, p: &[f64]) -> Result<LocalDecision> {
    let m = step.m();
    if m > 20 {
        return Err(Error::ExactModeLimit { got: m, limit: 20 });
    }
    let mut best_obj = f64::NEG_INFINITY;
    let mut best_x = vec![false; m];
    let mut x = vec![false; m];
    for mask in 0u64..(1u64 << m) {
        if (mask.count_ones() as usize) > step.cardinality {
            continue;
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = (mask >> i) & 1 == 1;
        }
        let obj = step.expected_revenue(&x)
            - x.iter()
                .zip(p)
                .filter(|(&sel, _)| sel)
                .map(|(_, pi)| pi)
                .sum::<f64>();
        if obj > best_obj || (obj == best_obj && lex_less(&x, &best_x)) {
            best_obj = obj;
            best_x.copy_from_slice(&x);
        }
    }
    Ok(step.decision_from(&best_x))
}

/// Assignment step: every task must go to exactly one agent. Profits and
/// workloads are per (agent, task); the impact is each agent's total
/// assigned workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentStep {
    /// m rows (agents) by n_t columns (tasks).
    pub profit: Vec<Vec<f64>>,
    pub workload: Vec<Vec<f64>>,
}

impl AssignmentStep {
    pub fn m(&self) -> usize {
        self.profit.len()
    }

    pub fn tasks(&self) -> usize {
        self.profit.first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::Config("assignment needs at least one agent".into()));
        }
        if self.workload.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: self.workload.len(),
            });
        }
        let n_t = self.tasks();
        for (q_row, w_row) in self.profit.iter().zip(&self.workload) {
            if q_row.len() != n_t || w_row.len() != n_t {
                return Err(Error::Dimension {
                    expected: n_t,
                    got: q_row.len().max(w_row.len()),
                });
            }
            if q_row.iter().any(|q| !(*q >= 0.0)) || w_row.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::Config(
                    "assignment profits and workloads must be nonnegative".into(),
                ));
            }
        }
        Ok(())
    }

    /// Decision for an explicit task → agent map.
    pub fn decision_from(&self, agent_of: &[usize]) -> LocalDecision {
        let m = self.m();
        let n_t = self.tasks();
        let mut x = vec![0.0; m * n_t];
        let mut impact = vec![0.0; m];
        let mut reward = 0.0;
        for (j, &i) in agent_of.iter().enumerate() {
            x[i * n_t + j] = 1.0;
            impact[i] += self.workload[i][j];
            reward += self.profit[i][j];
        }
        LocalDecision {
            reward,
            decision: x,
            impact,
        }
    }
}

/// Closed-form assignment solve: tasks decouple, each goes to the agent
/// maximizing profit minus priced workload; ties to the smallest index.
pub fn assignment_solve(step: &AssignmentStep, p: &[f64]) -> LocalDecision {
    let n_t = step.tasks();
    let mut agent_of = vec![0usize; n_t];
    for (j, slot) in agent_of.iter_mut().enumerate() {
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..step.m() {
            let score = step.profit[i][j] - p[i] * step.workload[i][j];
            if score > best_score {
                best_score = score;
                *slot = i;
            }
        }
    }
    step.decision_from(&agent_of)
}

/// A single step's feasible set, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LocalOracle {
    Knapsack(KnapsackStep),
    Assortment(AssortmentStep),
    Assignment(AssignmentStep),
}

impl LocalOracle {
    /// Dimension of the impact vector.
    pub fn impact_dim(&self) -> usize {
        match self {
            LocalOracle::Knapsack(s) => s.m(),
            LocalOracle::Assortment(s) => s.m(),
            LocalOracle::Assignment(s) => s.m(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LocalOracle::Knapsack(s) => s.validate(),
            LocalOracle::Assortment(s) => s.validate(),
            LocalOracle::Assignment(s) => s.validate(),
        }
    }

    /// Exact solve of max { r - p·y : (r, x, y) ∈ Ω } at price p.
    pub fn solve(&self, p: &[f64]) -> Result<LocalDecision> {
        debug_assert_eq!(p.len(), self.impact_dim());
        match self {
            LocalOracle::Knapsack(s) => Ok(knapsack_solve(s, p)),
            LocalOracle::Assortment(s) => assortment_solve(s, p),
            LocalOracle::Assignment(s) => Ok(assignment_solve(s, p)),
        }
    }

    /// Optimal objective value r̂ - p·ŷ; the negated Fenchel conjugate of
    /// the step's reward structure evaluated at p.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        let d = self.solve(p)?;
        Ok(d.reward - dot(p, &d.impact))
    }

    /// Upper bound on the number of feasible decisions, as a float so T-fold
    /// products cannot overflow. Used to gate brute-force enumeration.
    pub fn decision_space_size(&self) -> f64 {
        match self {
            LocalOracle::Knapsack(s) => 2f64.powi(s.n() as i32),
            LocalOracle::Assortment(s) => {
                let m = s.m();
                let mut total = 0.0;
                let mut level = 1.0;
                for k in 0..=s.cardinality.min(m) {
                    if k > 0 {
                        level = level * (m - k + 1) as f64 / k as f64;
                    }
                    total += level;
                }
                total
            }
            LocalOracle::Assignment(s) => (s.m() as f64).powi(s.tasks() as i32),
        }
    }

    /// Visits every feasible decision of this step exactly once.
    pub fn for_each_decision(&self, f: &mut dyn FnMut(LocalDecision)) {
        match self {
            LocalOracle::Knapsack(s) => {
                let n = s.n();
                assert!(n <= 30, "enumeration over 2^{n} selections");
                let mut x = vec![false; n];
                for mask in 0u64..(1u64 << n) {
                    let mut weight = 0.0;
                    for (j, xj) in x.iter_mut().enumerate() {
                        *xj = (mask >> j) & 1 == 1;
                        if *xj {
                            weight += s.weights[j];
                        }
                    }
                    if weight <= s.capacity {
                        f(s.decision_from(&x));
                    }
                }
            }
            LocalOracle::Assortment(s) => {
                let m = s.m();
                assert!(m <= 30, "enumeration over 2^{m} subsets");
                let mut x = vec![false; m];
                for mask in 0u64..(1u64 << m) {
                    if (mask.count_ones() as usize) > s.cardinality {
                        continue;
                    }
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi = (mask >> i) & 1 == 1;
                    }
                    f(s.decision_from(&x));
                }
            }
            LocalOracle::Assignment(s) => {
                let n_t = s.tasks();
                let m = s.m();
                let mut agent_of = vec![0usize; n_t];
                loop {
                    f(s.decision_from(&agent_of));
                    // Odometer increment over base-m digits.
                    let mut pos = 0;
                    loop {
                        if pos == n_t {
                            return;
                        }
                        agent_of[pos] += 1;
                        if agent_of[pos] < m {
                            break;
                        }
                        agent_of[pos] = 0;
                        pos += 1;
                    }
                }
            }
        }
    }
}
