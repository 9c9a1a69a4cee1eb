//! Arrival-order models over a fixed family of steps: uniform random
//! permutation, grouped random permutation over a partition of time, the
//! deterministic batched (group-contiguous) order, and the named partitions
//! used by the unevenness analysis.
//!
//! All randomness flows through a pinned generator (ChaCha8 seeded from a
//! 64-bit value) with hand-rolled Fisher-Yates, so orders are reproducible
//! across platforms and releases. Grouped shuffles derive one independent
//! stream per (seed, group) by mixing the group index into the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of the time indices {1..T} into disjoint nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    labels: Vec<String>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        if groups.is_empty() || groups.len() != labels.len() {
            return Err(Error::Config(
                "partition needs matching nonempty groups and labels".into(),
            ));
        }
        let total: usize = groups.iter().map(|g| g.len()).sum();
        let mut seen = vec![false; total + 1];
        for group in &groups {
            if group.is_empty() {
                return Err(Error::Config("partition groups must be nonempty".into()));
            }
            for &t in group {
                if t == 0 || t > total || seen[t] {
                    return Err(Error::Config(format!(
                        "partition must cover 1..={total} exactly once, bad index {t}"
                    )));
                }
                seen[t] = true;
            }
        }
        let mut groups = groups;
        for g in &mut groups {
            g.sort_unstable();
        }
        Ok(Partition { groups, labels })
    }

    /// One group holding the whole horizon.
    pub fn single(t: usize) -> Self {
        Partition {
            groups: vec![(1..=t).collect()],
            labels: vec!["all".into()],
        }
    }

    pub fn horizon(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups steps by an arbitrary per-step key (for example customer
    /// types), ordered by first appearance of each key.
    pub fn from_keys(keys: &[usize]) -> Result<Self> {
        let mut order: Vec<usize> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (idx, &k) in keys.iter().enumerate() {
            let slot = match order.iter().position(|&o| o == k) {
                Some(s) => s,
                None => {
                    order.push(k);
                    groups.push(Vec::new());
                    order.len() - 1
                }
            };
            groups[slot].push(idx + 1);
        }
        let labels = order.iter().map(|k| format!("type_{k}")).collect();
        Partition::new(groups, labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    WeekdayWeekend,
    HalfHalf,
    KPeriodic,
}

/// The named partitions: weekday/weekend (t mod 7 in 1..=5 vs the rest),
/// half/half (first and second half of the horizon), and K-periodic
/// (group k holds {t : ((t-1) mod K) + 1 = k}).
pub fn named_partition(kind: PartitionKind, t_total: usize, k: Option<usize>) -> Result<Partition> {
    match kind {
        PartitionKind::WeekdayWeekend => {
            if t_total < 6 {
                return Err(Error::Config(
                    "weekday/weekend partition needs T >= 6".into(),
                ));
            }
            let weekday: Vec<usize> = (1..=t_total)
                .filter(|t| (1..=5).contains(&(t % 7)))
                .collect();
            let weekend: Vec<usize> = (1..=t_total)
                .filter(|t| !(1..=5).contains(&(t % 7)))
                .collect();
            Partition::new(
                vec![weekday, weekend],
                vec!["weekday".into(), "weekend".into()],
            )
        }
        PartitionKind::HalfHalf => {
            if t_total < 2 {
                return Err(Error::Config("half/half partition needs T >= 2".into()));
            }
            let mid = t_total / 2;
            Partition::new(
                vec![(1..=mid).collect(), (mid + 1..=t_total).collect()],
                vec!["first_half".into(), "second_half".into()],
            )
        }
        PartitionKind::KPeriodic => {
            let k = k.ok_or_else(|| Error::Config("k_periodic partition needs K".into()))?;
            if k == 0 || k > t_total {
                return Err(Error::Config(format!(
                    "k_periodic needs 1 <= K <= T, got K={k}, T={t_total}"
                )));
            }
            let mut groups = vec![Vec::new(); k];
            for t in 1..=t_total {
                groups[(t - 1) % k].push(t);
            }
            let labels = (1..=k).map(|g| format!("period_{g}")).collect();
            Partition::new(groups, labels)
        }
    }
}

/// A permutation of {1..T}: slot t of the run draws the step originally at
/// position order[t-1].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalOrder {
    order: Vec<usize>,
    provenance: String,
}

impl ArrivalOrder {
    fn new(order: Vec<usize>, provenance: String) -> Self {
        debug_assert!(is_bijection(&order));
        ArrivalOrder { order, provenance }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Reorders a slice of steps: output slot t holds items[order[t]-1].
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        if items.len() != self.order.len() {
            return Err(Error::Dimension {
                expected: self.order.len(),
                got: items.len(),
            });
        }
        Ok(self.order.iter().map(|&src| items[src - 1].clone()).collect())
    }
}

fn is_bijection(order: &[usize]) -> bool {
    let mut seen = vec![false; order.len() + 1];
    order.iter().all(|&t| {
        if t == 0 || t > order.len() || seen[t] {
            false
        } else {
            seen[t] = true;
            true
        }
    })
}

/// 64-bit mixer used to derive independent substreams from one seed.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stream seed for (seed, lane); lane 0 is the main stream, lanes 1.. are
/// per-group streams of grouped shuffles.
pub(crate) fn stream_rng(seed: u64, lane: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(lane)))
}

fn fisher_yates(rng: &mut ChaCha8Rng, v: &mut [usize]) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

pub fn identity_order(t_total: usize) -> ArrivalOrder {
    ArrivalOrder::new((1..=t_total).collect(), "identity".into())
}

pub fn uniform_permutation(t_total: usize, seed: u64) -> ArrivalOrder {
    let mut order: Vec<usize> = (1..=t_total).collect();
    let mut rng = stream_rng(seed, 0);
    fisher_yates(&mut rng, &mut order);
    ArrivalOrder::new(order, format!("uniform(seed={seed})"))
}

/// Shuffles each group's steps among that group's own time slots,
/// independently per group.
pub fn grouped_permutation(partition: &Partition, seed: u64) -> ArrivalOrder {
    let t_total = partition.horizon();
    let mut order = vec![0usize; t_total];
    for (g, group) in partition.groups().iter().enumerate() {
        let mut items = group.clone();
        let mut rng = stream_rng(seed, g as u64 + 1);
        fisher_yates(&mut rng, &mut items);
        for (slot, item) in group.iter().zip(items) {
            order[slot - 1] = item;
        }
    }
    ArrivalOrder::new(order, format!("grouped(seed={seed})"))
}

/// Deterministic group-contiguous order: all of group 1 in ascending time,
/// then group 2, and so on.
pub fn batched_order(partition: &Partition) -> ArrivalOrder {
    let mut order = Vec::with_capacity(partition.horizon());
    for group in partition.groups() {
        order.extend_from_slice(group);
    }
    ArrivalOrder::new(order, "batched".into())
}
