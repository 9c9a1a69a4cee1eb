//! Shared test oracles.
#![allow(dead_code)]

/// Minimum cost of moving `src_mass` at `src_pos` onto `dst_mass` at
/// `dst_pos` under the |x - y| ground metric, solved exactly by enumerating
/// every basic solution of the transportation polytope (spanning trees of
/// the complete bipartite graph). Exponential; intended for tiny cases.
///
/// Total source and destination mass must agree.
pub fn transport_min_cost(
    src_pos: &[f64],
    src_mass: &[f64],
    dst_pos: &[f64],
    dst_mass: &[f64],
) -> f64 {
    let r = src_pos.len();
    let c = dst_pos.len();
    assert_eq!(r, src_mass.len());
    assert_eq!(c, dst_mass.len());
    let total_src: f64 = src_mass.iter().sum();
    let total_dst: f64 = dst_mass.iter().sum();
    assert!(
        (total_src - total_dst).abs() <= 1e-9,
        "unbalanced: {total_src} vs {total_dst}"
    );

    let edges: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    let need = r + c - 1;
    let mut state = Search {
        r,
        c,
        src_pos,
        src_mass,
        dst_pos,
        dst_mass,
        edges: &edges,
        chosen: Vec::with_capacity(need),
        need,
        best: f64::INFINITY,
    };
    let parent: Vec<usize> = (0..r + c).collect();
    state.recurse(0, parent);
    assert!(state.best.is_finite(), "no feasible transportation basis");
    state.best
}

struct Search<'a> {
    r: usize,
    c: usize,
    src_pos: &'a [f64],
    src_mass: &'a [f64],
    dst_pos: &'a [f64],
    dst_mass: &'a [f64],
    edges: &'a [(usize, usize)],
    chosen: Vec<usize>,
    need: usize,
    best: f64,
}

impl Search<'_> {
    fn recurse(&mut self, idx: usize, parent: Vec<usize>) {
        if self.chosen.len() == self.need {
            if let Some(cost) = self.tree_cost() {
                if cost < self.best {
                    self.best = cost;
                }
            }
            return;
        }
        if idx == self.edges.len() || self.chosen.len() + (self.edges.len() - idx) < self.need {
            return;
        }
        let (i, j) = self.edges[idx];
        let (a, b) = (find(&parent, i), find(&parent, self.r + j));
        if a != b {
            let mut merged = parent.clone();
            merged[a] = b;
            self.chosen.push(idx);
            self.recurse(idx + 1, merged);
            self.chosen.pop();
        }
        self.recurse(idx + 1, parent);
    }

    /// Flows forced by the tree via leaf stripping; `None` when any flow
    /// would have to be negative.
    fn tree_cost(&self) -> Option<f64> {
        let n = self.r + self.c;
        let mut residual: Vec<f64> = self
            .src_mass
            .iter()
            .chain(self.dst_mass.iter())
            .copied()
            .collect();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (slot, &e) in self.chosen.iter().enumerate() {
            let (i, j) = self.edges[e];
            incident[i].push(slot);
            incident[self.r + j].push(slot);
        }
        let mut degree: Vec<usize> = incident.iter().map(Vec::len).collect();
        let mut done = vec![false; self.need];
        let mut stack: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        let mut cost = 0.0;
        let mut resolved = 0;
        while let Some(v) = stack.pop() {
            if degree[v] != 1 {
                continue;
            }
            let &slot = incident[v].iter().find(|&&s| !done[s]).unwrap();
            done[slot] = true;
            resolved += 1;
            let (i, j) = self.edges[self.chosen[slot]];
            let flow = residual[v];
            if flow < -1e-12 {
                return None;
            }
            cost += flow.max(0.0) * (self.src_pos[i] - self.dst_pos[j]).abs();
            for end in [i, self.r + j] {
                residual[end] -= flow;
                degree[end] -= 1;
                if degree[end] == 1 {
                    stack.push(end);
                }
            }
        }
        (resolved == self.need).then_some(cost)
    }
}

fn find(parent: &[usize], mut v: usize) -> usize {
    while parent[v] != v {
        v = parent[v];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::transport_min_cost;

    #[test]
    fn point_source_pays_mean_distance() {
        let w = transport_min_cost(&[0.0], &[1.0], &[0.0, 1.0, 2.0], &[1.0 / 3.0; 3]);
        assert!((w - 1.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn identical_distributions_cost_nothing() {
        let pos = [0.0, 0.5, 2.0];
        let mass = [0.2, 0.3, 0.5];
        let w = transport_min_cost(&pos, &mass, &pos, &mass);
        assert!(w.abs() < 1e-12, "{w}");
    }

    #[test]
    fn shifted_mass_pays_the_shift() {
        let w = transport_min_cost(&[0.0, 1.0], &[0.5, 0.5], &[3.0, 4.0], &[0.5, 0.5]);
        assert!((w - 3.0).abs() < 1e-12, "{w}");
    }
}
