//! Seeded instance generators for the four experiment families, plus a
//! versioned on-disk container (JSON-lines canonical form, packed binary
//! alternative) and content hashing for reproducibility checks.
//!
//! Families:
//! - `fair_knapsack`: per-step 0/1 knapsacks whose stakeholder utilities
//!   must average into a max-min gap band.
//! - `assortment_visibility`: mixed-logit assortment steps with per-product
//!   visibility floors as the goal box.
//! - `fair_assignment`: task assignment balancing cumulative agent workloads.
//! - `two_phase_budget`: the two-phase adversarial budget stream with a
//!   bust or boom second half.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::goalset::{GoalSpec, InstanceConstants};
use crate::input_models::stream_rng;
use crate::oracles::{AssignmentStep, AssortmentStep, KnapsackStep, LocalOracle};

/// A generated problem: the step sequence in natural time order, the goal
/// set, and (where the family supports them) the constants behind the price
/// norm bound. `config` echoes the generator parameters for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub family: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub goal: GoalSpec,
    pub constants: Option<InstanceConstants>,
    pub steps: Vec<LocalOracle>,
}

impl Instance {
    pub fn m(&self) -> usize {
        self.goal.dim()
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.goal.validate()?;
        if self.steps.is_empty() {
            return Err(Error::Config("instance has no steps".into()));
        }
        for step in &self.steps {
            step.validate()?;
            if step.impact_dim() != self.m() {
                return Err(Error::Dimension {
                    expected: self.m(),
                    got: step.impact_dim(),
                });
            }
        }
        if let Some(c) = &self.constants {
            c.validate()?;
            if c.m != self.m() {
                return Err(Error::Dimension {
                    expected: self.m(),
                    got: c.m,
                });
            }
        }
        Ok(())
    }
}

/// Knapsack family parameters. Reference scale is 50 items, 10
/// stakeholders, horizon 10^4, gap 100; defaults are kept at that scale and
/// tests shrink them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FairKnapsackConfig {
    pub items: usize,
    pub stakeholders: usize,
    pub horizon: usize,
    pub rho: f64,
    pub seed: u64,
}

impl Default for FairKnapsackConfig {
    fn default() -> Self {
        FairKnapsackConfig {
            items: 50,
            stakeholders: 10,
            horizon: 10_000,
            rho: 100.0,
            seed: 0,
        }
    }
}

impl FairKnapsackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.items == 0 || self.stakeholders == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "fair_knapsack needs items, stakeholders, horizon >= 1".into(),
            ));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!(
                "fair_knapsack needs rho > 0, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Item weights Uniform(1, 1000), capacity 0.3 of total weight, stakeholder
/// utilities Uniform(w_j - 20i, w_j + 40i) clamped at zero (draws can go
/// negative while utilities must be nonnegative; the clamp is recorded in
/// the config echo by construction), reward = total utility of the
/// selection. Goal: nonnegative max-min gap band of width rho.
pub fn gen_fair_knapsack(cfg: &FairKnapsackConfig) -> Result<Instance> {
    cfg.validate()?;
    let (n, m) = (cfg.items, cfg.stakeholders);
    let mut rng = stream_rng(cfg.seed, 0);
    let zero_price = vec![0.0; m];
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut max_rowsum = 0.0f64;
    let mut max_reward = 0.0f64;
    for _ in 0..cfg.horizon {
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..1000.0)).collect();
        let capacity = 0.3 * weights.iter().sum::<f64>();
        let utility: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let spread = (i + 1) as f64;
                (0..n)
                    .map(|j| {
                        rng.random_range(weights[j] - 20.0 * spread..weights[j] + 40.0 * spread)
                            .max(0.0)
                    })
                    .collect()
            })
            .collect();
        for row in &utility {
            max_rowsum = max_rowsum.max(row.iter().sum());
        }
        let step = LocalOracle::Knapsack(KnapsackStep::utilitarian(weights, capacity, utility));
        max_reward = max_reward.max(step.solve(&zero_price)?.reward);
        steps.push(step);
    }
    let constants = InstanceConstants {
        d_y: max_rowsum.max(cfg.rho),
        d_r: max_reward,
        d_lower: cfg.rho / 2.0,
        m,
    };
    constants.validate()?;
    Ok(Instance {
        family: "fair_knapsack".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        goal: GoalSpec::max_min_gap(cfg.rho, m, true),
        constants: Some(constants),
        steps,
    })
}

/// Assortment family parameters. Defaults sit at desk scale (15 products, 4
/// types, cap 5) where the exact oracle is comfortably inside its subset
/// enumeration limit; the reference setup (40 products, 16 types, cap 10)
/// is reachable by overriding fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssortmentVisibilityConfig {
    pub products: usize,
    pub types: usize,
    pub cardinality: usize,
    pub horizon: usize,
    pub no_purchase_rate: f64,
    pub type_weights: Vec<f64>,
    pub seed: u64,
}

impl Default for AssortmentVisibilityConfig {
    fn default() -> Self {
        AssortmentVisibilityConfig {
            products: 15,
            types: 4,
            cardinality: 5,
            horizon: 1500,
            no_purchase_rate: 0.5,
            type_weights: vec![1.0; 4],
            seed: 0,
        }
    }
}

impl AssortmentVisibilityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.products == 0 || self.types == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "assortment_visibility needs products, types, horizon >= 1".into(),
            ));
        }
        if self.cardinality == 0 || self.cardinality > self.products {
            return Err(Error::Config(format!(
                "assortment cardinality must lie in 1..={}, got {}",
                self.products, self.cardinality
            )));
        }
        if !(self.no_purchase_rate > 0.0 && self.no_purchase_rate < 1.0) {
            return Err(Error::Config(format!(
                "no_purchase_rate must lie in (0,1), got {}",
                self.no_purchase_rate
            )));
        }
        if self.type_weights.len() != self.types {
            return Err(Error::Dimension {
                expected: self.types,
                got: self.type_weights.len(),
            });
        }
        if self.type_weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite())
            || self.type_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Config(
                "type_weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(())
    }
}

fn draw_type(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random_range(0.0..total);
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

fn draw_subset(rng: &mut ChaCha8Rng, m: usize, size: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..m).collect();
    for i in 0..size {
        let j = rng.random_range(i..m);
        idx.swap(i, j);
    }
    idx.truncate(size);
    idx
}

/// Per-type preference weights are log-normal(0, 1) draws rescaled by one
/// common factor so the average no-purchase probability over random size-s
/// assortments (types drawn by arrival weight) matches the configured rate;
/// the factor is found by bisection on a fixed Monte-Carlo sample, so
/// generation stays deterministic. Revenues Uniform(1, 10). Visibility
/// floors Uniform(0, s/2m) keep their sum at most s/2, leaving the goal box
/// reachable with slack.
pub fn gen_assortment_visibility(cfg: &AssortmentVisibilityConfig) -> Result<Instance> {
    cfg.validate()?;
    let (m, k_types, s) = (cfg.products, cfg.types, cfg.cardinality);
    let mut rng = stream_rng(cfg.seed, 0);
    let lognorm = LogNormal::new(0.0, 1.0).expect("valid parameters");
    let raw_prefs: Vec<Vec<f64>> = (0..k_types)
        .map(|_| (0..m).map(|_| lognorm.sample(&mut rng)).collect())
        .collect();

    let calib: Vec<(usize, Vec<usize>)> = (0..4096)
        .map(|_| {
            let k = draw_type(&mut rng, &cfg.type_weights);
            (k, draw_subset(&mut rng, m, s))
        })
        .collect();
    let no_purchase = |scale: f64| -> f64 {
        calib
            .iter()
            .map(|(k, set)| {
                let v: f64 = set.iter().map(|&i| raw_prefs[*k][i]).sum();
                1.0 / (1.0 + scale * v)
            })
            .sum::<f64>()
            / calib.len() as f64
    };
    let mut hi = 1.0;
    while no_purchase(hi) > cfg.no_purchase_rate && hi < 1e12 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if no_purchase(mid) > cfg.no_purchase_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = 0.5 * (lo + hi);
    let prefs: Vec<Vec<f64>> = raw_prefs
        .iter()
        .map(|row| row.iter().map(|v| scale * v).collect())
        .collect();

    let revenue: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..10.0)).collect();
    let floor_cap = s as f64 / (2.0 * m as f64);
    let floors: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..floor_cap)).collect();
    let floor_sum: f64 = floors.iter().sum();
    if floor_sum > s as f64 {
        return Err(Error::Config(format!(
            "visibility floors sum to {floor_sum}, exceeding cardinality {s}"
        )));
    }

    let steps: Vec<LocalOracle> = (0..cfg.horizon)
        .map(|_| {
            let k = draw_type(&mut rng, &cfg.type_weights);
            LocalOracle::Assortment(AssortmentStep {
                revenue: revenue.clone(),
                pref: prefs[k].clone(),
                cardinality: s,
                type_id: k,
            })
        })
        .collect();

    // Interior point f + delta*1 of the goal box is a mixture of size-s
    // assortments since its coordinate sum stays below s.
    let delta = (s as f64 - floor_sum) / (2.0 * m as f64);
    let max_floor = floors.iter().cloned().fold(0.0, f64::max);
    let d_lower = delta.min(1.0 - max_floor - delta);
    let max_revenue = revenue.iter().cloned().fold(0.0, f64::max);
    let constants = InstanceConstants {
        d_y: 1.0,
        d_r: max_revenue,
        d_lower,
        m,
    };
    constants.validate()?;
    Ok(Instance {
        family: "assortment_visibility".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        goal: GoalSpec::Box {
            lower: floors,
            upper: vec![1.0; m],
        },
        constants: Some(constants),
        steps,
    })
}

/// Assignment family parameters. One task per step by default, matching the
/// regime where the constants reduce to the max workload and max profit
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FairAssignmentConfig {
    pub agents: usize,
    pub tasks_min: usize,
    pub tasks_max: usize,
    pub horizon: usize,
    pub rho: f64,
    pub seed: u64,
}

impl Default for FairAssignmentConfig {
    fn default() -> Self {
        FairAssignmentConfig {
            agents: 5,
            tasks_min: 1,
            tasks_max: 1,
            horizon: 1000,
            rho: 5.0,
            seed: 0,
        }
    }
}

impl FairAssignmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.agents == 0 || self.horizon == 0 {
            return Err(Error::Config("fair_assignment needs agents, horizon >= 1".into()));
        }
        if self.tasks_min == 0 || self.tasks_min > self.tasks_max {
            return Err(Error::Config(format!(
                "task count range {}..={} is invalid",
                self.tasks_min, self.tasks_max
            )));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!(
                "fair_assignment needs rho > 0, got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Profits and workloads Uniform(0, 10). The goal is a signed max-min gap
/// band: only workload differences matter. A zero workload draw would make
/// every split fair for that task (assign everything to the free agent);
/// the continuous distribution makes that a measure-zero corner.
pub fn gen_fair_assignment(cfg: &FairAssignmentConfig) -> Result<Instance> {
    cfg.validate()?;
    let m = cfg.agents;
    let mut rng = stream_rng(cfg.seed, 0);
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut max_load = 0.0f64;
    let mut max_profit = 0.0f64;
    for _ in 0..cfg.horizon {
        let n_t = rng.random_range(cfg.tasks_min..=cfg.tasks_max);
        let profit: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_t).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let workload: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_t).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        for row in &workload {
            max_load = max_load.max(row.iter().sum());
        }
        let best_reward: f64 = (0..n_t)
            .map(|j| {
                (0..m)
                    .map(|i| profit[i][j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        max_profit = max_profit.max(best_reward);
        steps.push(LocalOracle::Assignment(AssignmentStep { profit, workload }));
    }
    let constants = InstanceConstants {
        d_y: max_load,
        d_r: max_profit,
        d_lower: cfg.rho / 2.0,
        m,
    };
    constants.validate()?;
    Ok(Instance {
        family: "fair_assignment".into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg)?,
        goal: GoalSpec::max_min_gap(cfg.rho, m, false),
        constants: Some(constants),
        steps,
    })
}

/// Second-phase regime of the two-phase budget stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoPhaseScenario {
    /// Second half is worthless: nothing can be taken.
    Bust,
    /// Second half doubles the reward at the same weight.
    Boom,
}

/// Two-phase budget stream on one resource with average-weight budget 1
/// (goal box [0, 1]). Phase 1 items: weight 2, reward 1. Phase 2: bust
/// items cannot be taken at all (capacity zero stands in for "weight 0,
/// reward 0" while keeping weights positive), boom items have weight 2,
/// reward 2. Both scenarios are identical through the first half, which is
/// what makes the stream adversarial. Offline optima: T/2 (bust, take all
/// of phase 1) and T (boom, take all of phase 2). No bound constants: the
/// bust phase has no decision with an interior impact mixture.
pub fn gen_two_phase(t_total: usize, scenario: TwoPhaseScenario) -> Result<Instance> {
    if t_total < 2 || t_total % 2 != 0 {
        return Err(Error::Config(format!(
            "two_phase_budget needs an even horizon >= 2, got {t_total}"
        )));
    }
    let phase1 = LocalOracle::Knapsack(KnapsackStep {
        weights: vec![2.0],
        capacity: 2.0,
        utility: vec![vec![2.0]],
        profit: vec![1.0],
    });
    let phase2 = match scenario {
        TwoPhaseScenario::Bust => LocalOracle::Knapsack(KnapsackStep {
            weights: vec![2.0],
            capacity: 0.0,
            utility: vec![vec![2.0]],
            profit: vec![0.0],
        }),
        TwoPhaseScenario::Boom => LocalOracle::Knapsack(KnapsackStep {
            weights: vec![2.0],
            capacity: 2.0,
            utility: vec![vec![2.0]],
            profit: vec![2.0],
        }),
    };
    let half = t_total / 2;
    let mut steps = vec![phase1; half];
    steps.extend(std::iter::repeat_n(phase2, half));
    Ok(Instance {
        family: "two_phase_budget".into(),
        seed: 0,
        config: serde_json::json!({ "horizon": t_total, "scenario": scenario }),
        goal: GoalSpec::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        },
        constants: None,
        steps,
    })
}

const JSONL_FORMAT: &str = "odmp-instance";
const JSONL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceHeader {
    format: String,
    version: u32,
    family: String,
    seed: u64,
    horizon: usize,
    config: serde_json::Value,
    goal: GoalSpec,
    constants: Option<InstanceConstants>,
}

/// Canonical text container: one JSON header line, then one step per line.
pub fn write_jsonl<W: Write>(inst: &Instance, mut out: W) -> Result<()> {
    let header = InstanceHeader {
        format: JSONL_FORMAT.into(),
        version: JSONL_VERSION,
        family: inst.family.clone(),
        seed: inst.seed,
        horizon: inst.horizon(),
        config: inst.config.clone(),
        goal: inst.goal.clone(),
        constants: inst.constants.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for step in &inst.steps {
        serde_json::to_writer(&mut out, step)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Instance> {
    let mut lines = input.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("empty instance file".into()))??;
    let header: InstanceHeader = serde_json::from_str(&header_line)?;
    if header.format != JSONL_FORMAT {
        return Err(Error::Format(format!(
            "unexpected container format '{}'",
            header.format
        )));
    }
    if header.version != JSONL_VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {}",
            header.version
        )));
    }
    let mut steps = Vec::with_capacity(header.horizon);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(&line)?);
    }
    if steps.len() != header.horizon {
        return Err(Error::Format(format!(
            "header promises {} steps, file holds {}",
            header.horizon,
            steps.len()
        )));
    }
    let inst = Instance {
        family: header.family,
        seed: header.seed,
        config: header.config,
        goal: header.goal,
        constants: header.constants,
        steps,
    };
    inst.validate()?;
    Ok(inst)
}

pub fn write_jsonl_path<P: AsRef<Path>>(inst: &Instance, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_jsonl(inst, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_jsonl_path<P: AsRef<Path>>(path: P) -> Result<Instance> {
    read_jsonl(BufReader::new(File::open(path)?))
}

const BINARY_MAGIC: &[u8; 8] = b"ODMPBIN1";
const TAG_KNAPSACK: u8 = 0;
const TAG_ASSORTMENT: u8 = 1;
const TAG_ASSIGNMENT: u8 = 2;

fn put_u32<W: Write>(out: &mut W, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write>(out: &mut W, vs: &[f64]) -> Result<()> {
    for v in vs {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn get_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        input.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// Packed binary container: magic, JSON header block, then raw
/// little-endian numeric blocks per step. Bit-exact round trip.
pub fn write_binary<W: Write>(inst: &Instance, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    let header = InstanceHeader {
        format: JSONL_FORMAT.into(),
        version: JSONL_VERSION,
        family: inst.family.clone(),
        seed: inst.seed,
        horizon: inst.horizon(),
        config: inst.config.clone(),
        goal: inst.goal.clone(),
        constants: inst.constants.clone(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    put_u32(&mut out, header_bytes.len() as u32)?;
    out.write_all(&header_bytes)?;
    for step in &inst.steps {
        match step {
            LocalOracle::Knapsack(s) => {
                out.write_all(&[TAG_KNAPSACK])?;
                put_u32(&mut out, s.n() as u32)?;
                put_u32(&mut out, s.m() as u32)?;
                put_f64s(&mut out, &s.weights)?;
                put_f64s(&mut out, &[s.capacity])?;
                for row in &s.utility {
                    put_f64s(&mut out, row)?;
                }
                put_f64s(&mut out, &s.profit)?;
            }
            LocalOracle::Assortment(s) => {
                out.write_all(&[TAG_ASSORTMENT])?;
                put_u32(&mut out, s.m() as u32)?;
                put_u32(&mut out, s.cardinality as u32)?;
                put_u32(&mut out, s.type_id as u32)?;
                put_f64s(&mut out, &s.revenue)?;
                put_f64s(&mut out, &s.pref)?;
            }
            LocalOracle::Assignment(s) => {
                out.write_all(&[TAG_ASSIGNMENT])?;
                put_u32(&mut out, s.m() as u32)?;
                put_u32(&mut out, s.tasks() as u32)?;
                for row in &s.profit {
                    put_f64s(&mut out, row)?;
                }
                for row in &s.workload {
                    put_f64s(&mut out, row)?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Instance> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("bad binary instance magic".into()));
    }
    let header_len = get_u32(&mut input)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: InstanceHeader = serde_json::from_slice(&header_bytes)?;
    if header.format != JSONL_FORMAT || header.version != JSONL_VERSION {
        return Err(Error::Format("unsupported binary instance header".into()));
    }
    let mut steps = Vec::with_capacity(header.horizon);
    for _ in 0..header.horizon {
        let mut tag = [0u8; 1];
        input.read_exact(&mut tag)?;
        let step = match tag[0] {
            TAG_KNAPSACK => {
                let n = get_u32(&mut input)? as usize;
                let m = get_u32(&mut input)? as usize;
                let weights = get_f64s(&mut input, n)?;
                let capacity = get_f64s(&mut input, 1)?[0];
                let utility: Vec<Vec<f64>> = (0..m)
                    .map(|_| get_f64s(&mut input, n))
                    .collect::<Result<_>>()?;
                let profit = get_f64s(&mut input, n)?;
                LocalOracle::Knapsack(KnapsackStep {
                    weights,
                    capacity,
                    utility,
                    profit,
                })
            }
            TAG_ASSORTMENT => {
                let m = get_u32(&mut input)? as usize;
                let cardinality = get_u32(&mut input)? as usize;
                let type_id = get_u32(&mut input)? as usize;
                let revenue = get_f64s(&mut input, m)?;
                let pref = get_f64s(&mut input, m)?;
                LocalOracle::Assortment(AssortmentStep {
                    revenue,
                    pref,
                    cardinality,
                    type_id,
                })
            }
            TAG_ASSIGNMENT => {
                let m = get_u32(&mut input)? as usize;
                let n_t = get_u32(&mut input)? as usize;
                let profit: Vec<Vec<f64>> = (0..m)
                    .map(|_| get_f64s(&mut input, n_t))
                    .collect::<Result<_>>()?;
                let workload: Vec<Vec<f64>> = (0..m)
                    .map(|_| get_f64s(&mut input, n_t))
                    .collect::<Result<_>>()?;
                LocalOracle::Assignment(AssignmentStep { profit, workload })
            }
            other => return Err(Error::Format(format!("unknown step tag {other}"))),
        };
        steps.push(step);
    }
    let inst = Instance {
        family: header.family,
        seed: header.seed,
        config: header.config,
        goal: header.goal,
        constants: header.constants,
        steps,
    };
    inst.validate()?;
    Ok(inst)
}

pub fn write_binary_path<P: AsRef<Path>>(inst: &Instance, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_binary(inst, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_binary_path<P: AsRef<Path>>(path: P) -> Result<Instance> {
    read_binary(BufReader::new(File::open(path)?))
}

/// SHA-256 of the canonical JSON-lines form, as lowercase hex.
pub fn instance_hash(inst: &Instance) -> Result<String> {
    let mut buf = Vec::new();
    write_jsonl(inst, &mut buf)?;
    let digest = Sha256::digest(&buf);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
