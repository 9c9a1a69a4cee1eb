//! Goal sets and the primitives the online learner needs from them.
//!
//! A goal set is a closed convex set Ψ ⊆ R^m written in decomposed form
//! Ψ = Q + C, where Q is compact convex and C is a closed convex cone (the
//! recession cone of Ψ). The learner only ever touches Ψ through four
//! operations, all exact here:
//!
//! * `support_point`: argmax over Q of ⟨p, v⟩ (the compact part carries the
//!   support function of Ψ whenever p lies in the polar cone of C);
//! * `project_polar`: Euclidean projection onto the polar cone
//!   C° = {u : ⟨u, c⟩ ≤ 0 for all c ∈ C};
//! * `distance_to_goal`: Euclidean distance to Ψ, which is the per-step
//!   goal-violation metric after scaling;
//! * `contains`: membership up to tolerance.
//!
//! All supported shapes are axis-aligned boxes, spread-bounded sets
//! ("max minus min at most rho"), and box-restricted versions of those, so
//! every operation reduces to a closed form or a one-dimensional scan over
//! anchor positions of a sliding window. No numerical solver is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecmath::sum;

/// Default tolerance for membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// A goal set Ψ = Q + C in one of the supported shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalSpec {
    /// Axis-aligned box {y : lower ≤ y ≤ upper}. Compact, so C = {0} and
    /// the polar cone is all of R^m.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Spread-bounded set {y : max_i y_i - min_i y_i ≤ rho}, intersected
    /// with the nonnegative orthant when `nonneg` is set. Q = [0, rho]^m;
    /// C is the diagonal ray (nonneg) or the full diagonal line (signed).
    MaxMinGap { rho: f64, dim: usize, nonneg: bool },
    /// Inner goal intersected with a bounding box. The intersection is
    /// compact, so Q is the whole set and the polar cone is all of R^m.
    /// Used by the box-restricted variant of the learner.
    Boxed {
        inner: Box<GoalSpec>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl GoalSpec {
    pub fn max_min_gap(rho: f64, dim: usize, nonneg: bool) -> Self {
        GoalSpec::MaxMinGap { rho, dim, nonneg }
    }

    pub fn boxed(inner: GoalSpec, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        GoalSpec::Boxed {
            inner: Box::new(inner),
            lower,
            upper,
        }
    }

    /// Ambient dimension m.
    pub fn dim(&self) -> usize {
        match self {
            GoalSpec::Box { lower, .. } => lower.len(),
            GoalSpec::MaxMinGap { dim, .. } => *dim,
            GoalSpec::Boxed { inner, .. } => inner.dim(),
        }
    }

    /// Checks shape invariants: matching dimensions, strict full
    /// dimensionality (lower < upper, rho > 0), and for the box-restricted
    /// form a nonempty interior of the intersection. Nested box
    /// restrictions are rejected.
    pub fn validate(&self) -> Result<()> {
        match self {
            GoalSpec::Box { lower, upper } => validate_box(lower, upper),
            GoalSpec::MaxMinGap { rho, dim, .. } => {
                if *dim == 0 {
                    return Err(Error::Config("goal dimension must be positive".into()));
                }
                if !(*rho > 0.0) || !rho.is_finite() {
                    return Err(Error::Config(format!(
                        "spread bound rho must be positive and finite, got {rho}"
                    )));
                }
                Ok(())
            }
            GoalSpec::Boxed {
                inner,
                lower,
                upper,
            } => {
                inner.validate()?;
                validate_box(lower, upper)?;
                if lower.len() != inner.dim() {
                    return Err(Error::Dimension {
                        expected: inner.dim(),
                        got: lower.len(),
                    });
                }
                match inner.as_ref() {
                    GoalSpec::Boxed { .. } => {
                        Err(Error::Config("nested box restriction is not supported".into()))
                    }
                    GoalSpec::Box {
                        lower: il,
                        upper: iu,
                    } => {
                        for i in 0..lower.len() {
                            if lower[i].max(il[i]) >= upper[i].min(iu[i]) {
                                return Err(Error::Config(format!(
                                    "restricted goal is empty or flat in coordinate {i}"
                                )));
                            }
                        }
                        Ok(())
                    }
                    GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                        let el: Vec<f64> = effective_lower(lower, *nonneg);
                        for i in 0..lower.len() {
                            if el[i] >= upper[i] {
                                return Err(Error::Config(format!(
                                    "restricted goal is empty or flat in coordinate {i}"
                                )));
                            }
                        }
                        let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
                        let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
                        if a_lo >= a_hi {
                            return Err(Error::Config(
                                "restricted goal has empty interior: box too spread out for rho"
                                    .into(),
                            ));
                        }
                        Ok(())
                    }
                }
            }
        }
    }

    /// A maximizer of ⟨p, v⟩ over the compact part Q. Ties are broken
    /// deterministically: a zero coefficient selects the lower end of its
    /// coordinate range, and window scans prefer the smallest anchor.
    pub fn support_point(&self, p: &[f64]) -> Vec<f64> {
        debug_assert_eq!(p.len(), self.dim());
        match self {
            GoalSpec::Box { lower, upper } => box_support(p, lower, upper),
            GoalSpec::MaxMinGap { rho, dim, .. } => {
                let zeros = vec![0.0; *dim];
                let tops = vec![*rho; *dim];
                box_support(p, &zeros, &tops)
            }
            GoalSpec::Boxed {
                inner,
                lower,
                upper,
            } => match inner.as_ref() {
                GoalSpec::Box {
                    lower: il,
                    upper: iu,
                } => {
                    let lo: Vec<f64> = lower.iter().zip(il).map(|(a, b)| a.max(*b)).collect();
                    let hi: Vec<f64> = upper.iter().zip(iu).map(|(a, b)| a.min(*b)).collect();
                    box_support(p, &lo, &hi)
                }
                GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                    let el = effective_lower(lower, *nonneg);
                    windowed_support(p, &el, upper, *rho)
                }
                GoalSpec::Boxed { .. } => unreachable!("rejected by validate"),
            },
        }
    }

    /// Euclidean projection onto the polar cone C°.
    pub fn project_polar(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.dim());
        match self.polar_cone() {
            PolarCone::Full => u.to_vec(),
            PolarCone::SumZero => {
                let shift = sum(u) / u.len() as f64;
                u.iter().map(|x| x - shift).collect()
            }
            PolarCone::SumNonpos => {
                let s = sum(u);
                if s <= 0.0 {
                    u.to_vec()
                } else {
                    let shift = s / u.len() as f64;
                    u.iter().map(|x| x - shift).collect()
                }
            }
        }
    }

    /// Euclidean distance from `u` to the polar cone C°; zero means the
    /// point is a valid dual price.
    pub fn polar_residual(&self, u: &[f64]) -> f64 {
        let m = u.len() as f64;
        match self.polar_cone() {
            PolarCone::Full => 0.0,
            PolarCone::SumZero => sum(u).abs() / m.sqrt(),
            PolarCone::SumNonpos => sum(u).max(0.0) / m.sqrt(),
        }
    }

    /// Euclidean distance from y to Ψ.
    pub fn distance_to_goal(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.dim());
        self.distance_sq(y).sqrt()
    }

    /// Nearest point of Ψ to y.
    pub fn project_onto_goal(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.dim());
        match self {
            GoalSpec::Box { lower, upper } => clamp_to_box(y, lower, upper),
            GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                let a_min = if *nonneg { 0.0 } else { f64::NEG_INFINITY };
                let (_, a) = window_scan(y, *rho, None, None, a_min, f64::INFINITY);
                clamp_to_window(y, *rho, None, None, a)
            }
            GoalSpec::Boxed {
                inner,
                lower,
                upper,
            } => match inner.as_ref() {
                GoalSpec::Box {
                    lower: il,
                    upper: iu,
                } => {
                    let lo: Vec<f64> = lower.iter().zip(il).map(|(a, b)| a.max(*b)).collect();
                    let hi: Vec<f64> = upper.iter().zip(iu).map(|(a, b)| a.min(*b)).collect();
                    clamp_to_box(y, &lo, &hi)
                }
                GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                    let el = effective_lower(lower, *nonneg);
                    let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
                    let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
                    let (_, a) = window_scan(y, *rho, Some(&el), Some(upper), a_lo, a_hi);
                    clamp_to_window(y, *rho, Some(&el), Some(upper), a)
                }
                GoalSpec::Boxed { .. } => unreachable!("rejected by validate"),
            },
        }
    }

    /// Membership in Ψ up to Euclidean tolerance.
    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.distance_to_goal(y) <= tol
    }

    /// Radius of a Euclidean ball guaranteed to fit inside Ψ around some
    /// interior point. A structural lower bound used to calibrate dual
    /// step scales; it does not have to be tight.
    pub fn interior_radius(&self) -> f64 {
        match self {
            GoalSpec::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| (u - l) / 2.0)
                .fold(f64::INFINITY, f64::min),
            GoalSpec::MaxMinGap { rho, .. } => rho / 2.0,
            GoalSpec::Boxed {
                inner,
                lower,
                upper,
            } => match inner.as_ref() {
                GoalSpec::Box {
                    lower: il,
                    upper: iu,
                } => (0..lower.len())
                    .map(|i| (upper[i].min(iu[i]) - lower[i].max(il[i])) / 2.0)
                    .fold(f64::INFINITY, f64::min),
                GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                    // Place the window at the midpoint anchor of its
                    // feasible range and take the narrowest coordinate.
                    let el = effective_lower(lower, *nonneg);
                    let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
                    let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
                    let a = 0.5 * (a_lo + a_hi);
                    (0..el.len())
                        .map(|i| (upper[i].min(a + rho) - el[i].max(a)) / 2.0)
                        .fold(f64::INFINITY, f64::min)
                }
                GoalSpec::Boxed { .. } => unreachable!("rejected by validate"),
            },
        }
    }

    fn distance_sq(&self, y: &[f64]) -> f64 {
        match self {
            GoalSpec::Box { lower, upper } => box_distance_sq(y, lower, upper),
            GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                let a_min = if *nonneg { 0.0 } else { f64::NEG_INFINITY };
                window_scan(y, *rho, None, None, a_min, f64::INFINITY).0
            }
            GoalSpec::Boxed {
                inner,
                lower,
                upper,
            } => match inner.as_ref() {
                GoalSpec::Box {
                    lower: il,
                    upper: iu,
                } => {
                    let lo: Vec<f64> = lower.iter().zip(il).map(|(a, b)| a.max(*b)).collect();
                    let hi: Vec<f64> = upper.iter().zip(iu).map(|(a, b)| a.min(*b)).collect();
                    box_distance_sq(y, &lo, &hi)
                }
                GoalSpec::MaxMinGap { rho, nonneg, .. } => {
                    let el = effective_lower(lower, *nonneg);
                    let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
                    let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
                    window_scan(y, *rho, Some(&el), Some(upper), a_lo, a_hi).0
                }
                GoalSpec::Boxed { .. } => unreachable!("rejected by validate"),
            },
        }
    }

    fn polar_cone(&self) -> PolarCone {
        match self {
            GoalSpec::Box { .. } | GoalSpec::Boxed { .. } => PolarCone::Full,
            GoalSpec::MaxMinGap { nonneg, .. } => {
                if *nonneg {
                    PolarCone::SumNonpos
                } else {
                    PolarCone::SumZero
                }
            }
        }
    }
}

/// The polar cones that arise from the supported recession cones: C = {0}
/// gives all of R^m, the diagonal line gives the sum-zero hyperplane, and
/// the diagonal ray gives the sum-nonpositive halfspace.
enum PolarCone {
    Full,
    SumZero,
    SumNonpos,
}

fn validate_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != upper.len() {
        return Err(Error::Dimension {
            expected: lower.len(),
            got: upper.len(),
        });
    }
    if lower.is_empty() {
        return Err(Error::Config("goal dimension must be positive".into()));
    }
    for i in 0..lower.len() {
        if !lower[i].is_finite() || !upper[i].is_finite() {
            return Err(Error::Config(format!("box bound {i} is not finite")));
        }
        if lower[i] >= upper[i] {
            return Err(Error::Config(format!(
                "box must satisfy lower < upper, violated in coordinate {i}"
            )));
        }
    }
    Ok(())
}

fn effective_lower(lower: &[f64], nonneg: bool) -> Vec<f64> {
    if nonneg {
        lower.iter().map(|l| l.max(0.0)).collect()
    } else {
        lower.to_vec()
    }
}

fn box_support(p: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    p.iter()
        .zip(lower.iter().zip(upper))
        .map(|(pi, (l, u))| if *pi > 0.0 { *u } else { *l })
        .collect()
}

fn clamp_to_box(y: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| v.clamp(*l, *u))
        .collect()
}

fn box_distance_sq(y: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(v, (l, u))| {
            let d = (l - v).max(0.0).max(v - u);
            d * d
        })
        .sum()
}

/// Coordinate interval at window anchor `a`: [max(lo_i, a), min(hi_i, a+rho)]
/// with lo = -inf and hi = +inf when absent. The goal set is the union of
/// these boxes over the feasible anchor range.
fn window_interval(i: usize, a: f64, rho: f64, lo: Option<&[f64]>, hi: Option<&[f64]>) -> (f64, f64) {
    let l = lo.map_or(f64::NEG_INFINITY, |v| v[i]).max(a);
    let h = hi.map_or(f64::INFINITY, |v| v[i]).min(a + rho);
    // Callers keep a inside the anchor range, where the interval is nonempty;
    // h < l can only be `a + rho` rounding past lo[i] by an ulp. Collapse it.
    (l, h.max(l))
}

fn window_eval(y: &[f64], a: f64, rho: f64, lo: Option<&[f64]>, hi: Option<&[f64]>) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let (l, h) = window_interval(i, a, rho, lo, hi);
        let d = (l - y[i]).max(0.0).max(y[i] - h);
        acc += d * d;
    }
    acc
}

fn clamp_to_window(y: &[f64], rho: f64, lo: Option<&[f64]>, hi: Option<&[f64]>, a: f64) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let (l, h) = window_interval(i, a, rho, lo, hi);
            y[i].clamp(l, h)
        })
        .collect()
}

/// Minimizes f(a) = sum_i dist(y_i, [max(lo_i,a), min(hi_i,a+rho)])^2 over
/// a in [a_min, a_max]. f is convex piecewise quadratic; its pieces break
/// only where some y_i, y_i - rho, lo_i, or hi_i - rho crosses a, so the
/// exact minimum is attained either at a breakpoint or at the analytic
/// vertex of one piece. Returns (min value, minimizing anchor), preferring
/// the smallest anchor on ties.
fn window_scan(
    y: &[f64],
    rho: f64,
    lo: Option<&[f64]>,
    hi: Option<&[f64]>,
    a_min: f64,
    a_max: f64,
) -> (f64, f64) {
    let clamp_range = |v: f64| v.clamp(a_min, a_max);
    let mut pts: Vec<f64> = Vec::with_capacity(4 * y.len() + 2);
    for (i, &yi) in y.iter().enumerate() {
        pts.push(clamp_range(yi));
        pts.push(clamp_range(yi - rho));
        if let Some(l) = lo {
            pts.push(clamp_range(l[i]));
        }
        if let Some(h) = hi {
            pts.push(clamp_range(h[i] - rho));
        }
    }
    if a_min.is_finite() {
        pts.push(a_min);
    }
    if a_max.is_finite() {
        pts.push(a_max);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();

    // Vertices of the interior pieces. The outermost pieces are monotone
    // toward the breakpoint hull, so their minima are already covered by
    // the endpoint candidates.
    let mut candidates = pts.clone();
    for w in pts.windows(2) {
        let (left, right) = (w[0], w[1]);
        if right - left <= 0.0 {
            continue;
        }
        let mid = 0.5 * (left + right);
        // Quadratic piece f(a) = qa*a^2 + qb*a + const, classified at the
        // interior point `mid`.
        let mut qa = 0.0;
        let mut qb = 0.0;
        for i in 0..y.len() {
            let (l, h) = window_interval(i, mid, rho, lo, hi);
            if y[i] < l {
                // Active lower edge; varies with a only when a > lo_i.
                if lo.map_or(true, |v| mid > v[i]) {
                    qa += 1.0;
                    qb += -2.0 * y[i];
                }
            } else if y[i] > h {
                // Active upper edge; varies with a only when a+rho < hi_i.
                if hi.map_or(true, |v| mid + rho < v[i]) {
                    qa += 1.0;
                    qb += 2.0 * (rho - y[i]);
                }
            }
        }
        if qa > 0.0 {
            let vertex = -qb / (2.0 * qa);
            if vertex > left && vertex < right {
                candidates.push(vertex);
            }
        }
    }

    let mut best = (f64::INFINITY, f64::NAN);
    for &a in &candidates {
        let v = window_eval(y, a, rho, lo, hi);
        if v < best.0 {
            best = (v, a);
        }
    }
    debug_assert!(best.1.is_finite(), "window scan found no candidate anchor");
    best
}

/// Maximizes ⟨p, v⟩ over the windowed set by scanning the anchors where the
/// concave piecewise-linear objective can kink. Ties prefer the smallest
/// anchor so support points are deterministic.
fn windowed_support(p: &[f64], lo: &[f64], hi: &[f64], rho: f64) -> Vec<f64> {
    let a_lo = lo.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
    let a_hi = hi.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut pts: Vec<f64> = vec![a_lo, a_hi];
    for i in 0..p.len() {
        pts.push(lo[i].clamp(a_lo, a_hi));
        pts.push((hi[i] - rho).clamp(a_lo, a_hi));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();

    let value_at = |a: f64| -> f64 {
        (0..p.len())
            .map(|i| {
                let (l, h) = window_interval(i, a, rho, Some(lo), Some(hi));
                if p[i] > 0.0 {
                    p[i] * h
                } else {
                    p[i] * l
                }
            })
            .sum()
    };

    let mut best_a = pts[0];
    let mut best_v = value_at(pts[0]);
    for &a in &pts[1..] {
        let v = value_at(a);
        if v > best_v {
            best_v = v;
            best_a = a;
        }
    }
    (0..p.len())
        .map(|i| {
            let (l, h) = window_interval(i, best_a, rho, Some(lo), Some(hi));
            if p[i] > 0.0 {
                h
            } else {
                l
            }
        })
        .collect()
}

/// Instance-level constants used by step-size safety checks and price-norm
/// guarantees: d_y bounds the one-step impact discrepancy, d_r the one-step
/// reward, and d_lower is an interior-ball radius of the goal set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceConstants {
    pub d_y: f64,
    pub d_r: f64,
    pub d_lower: f64,
    pub m: usize,
}

impl InstanceConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_y >= 0.0) || !(self.d_r >= 0.0) {
            return Err(Error::Config(
                "impact and reward bounds must be nonnegative".into(),
            ));
        }
        if !(self.d_lower > 0.0) {
            return Err(Error::Config("interior radius must be positive".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        Ok(())
    }

    /// Worst-case bound on the Euclidean norm of any dual price produced by
    /// the online update with step sizes at most 1/m:
    /// (d_y^2 + 2 d_r) / (2 d_lower) + d_y / sqrt(m).
    pub fn price_norm_bound(&self) -> f64 {
        (self.d_y * self.d_y + 2.0 * self.d_r) / (2.0 * self.d_lower)
            + self.d_y / (self.m as f64).sqrt()
    }

    /// Norm bound for any optimal dual price: d_r / d_lower.
    pub fn dual_opt_norm_bound(&self) -> f64 {
        self.d_r / self.d_lower
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecmath::dot;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn box01(m: usize) -> GoalSpec {
        GoalSpec::Box {
            lower: vec![0.0; m],
            upper: vec![1.0; m],
        }
    }

    #[test]
    fn box_support_picks_corners() {
        let g = box01(2);
        assert_eq!(g.support_point(&[1.0, -1.0]), vec![1.0, 0.0]);
        assert_eq!(g.support_point(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn gap_support_examples() {
        let g = GoalSpec::max_min_gap(100.0, 2, true);
        assert_eq!(g.support_point(&[0.0, 0.0]), vec![0.0, 0.0]);
        let g3 = GoalSpec::max_min_gap(100.0, 3, true);
        assert_eq!(g3.support_point(&[3.0, -1.0, 0.0]), vec![100.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_coefficients_take_lower_bounds() {
        let g = GoalSpec::Box {
            lower: vec![-2.0, 5.0],
            upper: vec![3.0, 9.0],
        };
        assert_eq!(g.support_point(&[0.0, 0.0]), vec![-2.0, 5.0]);
        let g = GoalSpec::max_min_gap(7.0, 3, false);
        assert_eq!(g.support_point(&[0.0, 2.0, 0.0]), vec![0.0, 7.0, 0.0]);
    }

    #[test]
    fn polar_projection_closed_forms() {
        // Signed diagonal line: project onto the sum-zero hyperplane.
        let g = GoalSpec::max_min_gap(1.0, 2, false);
        assert_eq!(g.project_polar(&[3.0, 1.0]), vec![1.0, -1.0]);
        // Nonnegative ray: halfspace projection only when the sum is positive.
        let g = GoalSpec::max_min_gap(1.0, 2, true);
        assert_eq!(g.project_polar(&[-3.0, 1.0]), vec![-3.0, 1.0]);
        assert_eq!(g.project_polar(&[3.0, 1.0]), vec![1.0, -1.0]);
        // Compact goals leave prices untouched.
        let g = box01(2);
        assert_eq!(g.project_polar(&[5.0, -7.0]), vec![5.0, -7.0]);
    }

    #[test]
    fn box_distance_is_clamp_distance() {
        let g = box01(2);
        assert_close(g.distance_to_goal(&[1.1, 0.5]), 0.1, 1e-12);
        assert!(g.contains(&[1.0, 0.0], MEMBERSHIP_TOL));
        assert!(!g.contains(&[1.1, 0.5], MEMBERSHIP_TOL));
    }

    #[test]
    fn gap_distance_matches_hand_solution() {
        // For y = (0, 3) and windows [a, a+1] with a >= 0, the best anchor
        // is a = 1, giving projection (1, 2) at distance sqrt(2).
        let g = GoalSpec::max_min_gap(1.0, 2, true);
        assert_close(g.distance_to_goal(&[0.0, 3.0]), 2.0_f64.sqrt(), 1e-12);
        let proj = g.project_onto_goal(&[0.0, 3.0]);
        assert_close(proj[0], 1.0, 1e-12);
        assert_close(proj[1], 2.0, 1e-12);
        assert!(g.contains(&proj, 1e-9));
    }

    #[test]
    fn gap_distance_matches_dense_grid() {
        // Independent check of the scan: brute-force the anchor on a fine
        // grid and compare. Grid resolution bounds the error via the
        // Lipschitz constant of the squared distance, so keep tol loose.
        let mut rng = StdRng::seed_from_u64(7);
        for case in 0..50 {
            let m = 2 + case % 4;
            let rho = rng.random_range(0.2..3.0);
            let nonneg = case % 2 == 0;
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..6.0)).collect();
            let g = GoalSpec::max_min_gap(rho, m, nonneg);
            let got = g.distance_to_goal(&y);

            let lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - rho - 1.0;
            let lo = if nonneg { lo.max(0.0) } else { lo };
            let hi = (y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0).max(lo + 1.0);
            let mut best = f64::INFINITY;
            let steps = 200_000;
            for k in 0..=steps {
                let a = lo + (hi - lo) * k as f64 / steps as f64;
                best = best.min(window_eval(&y, a, rho, None, None));
            }
            assert!(got * got <= best + 1e-9, "scan must not exceed grid min");
            assert_close(got * got, best, 1e-4);
        }
    }

    #[test]
    fn boxed_distance_matches_dense_grid() {
        let mut rng = StdRng::seed_from_u64(11);
        for case in 0..50 {
            let m = 2 + case % 3;
            let rho = rng.random_range(0.5..2.5);
            let lower = vec![-1.0; m];
            let upper: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..2.0)).collect();
            let g = GoalSpec::boxed(
                GoalSpec::max_min_gap(rho, m, true),
                lower.clone(),
                upper.clone(),
            );
            g.validate().unwrap();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..4.0)).collect();
            let got = g.distance_to_goal(&y);

            let el = effective_lower(&lower, true);
            let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
            let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut best = f64::INFINITY;
            let steps = 200_000;
            for k in 0..=steps {
                let a = a_lo + (a_hi - a_lo) * k as f64 / steps as f64;
                best = best.min(window_eval(&y, a, rho, Some(&el), Some(&upper)));
            }
            assert!(got * got <= best + 1e-9);
            assert_close(got * got, best, 1e-4);
        }
    }

    #[test]
    fn projection_variational_inequality() {
        // P(u) must lie in the cone and satisfy <u - P(u), c - P(u)> <= 0
        // for every c in the cone.
        let mut rng = StdRng::seed_from_u64(3);
        let goals = [
            GoalSpec::max_min_gap(1.0, 4, false),
            GoalSpec::max_min_gap(1.0, 4, true),
            box01(4),
        ];
        for case in 0..1000 {
            let g = &goals[case % goals.len()];
            let u: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let proj = g.project_polar(&u);
            assert!(g.polar_residual(&proj) <= 1e-12);

            // Direct construction of a cone member: shift to sum -m*slack.
            let z: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let slack: f64 = rng.random_range(0.0..2.0);
            let shift = sum(&z) / 4.0 + if matches!(g, GoalSpec::MaxMinGap { nonneg: true, .. }) { slack } else { 0.0 };
            let c: Vec<f64> = match g {
                GoalSpec::Box { .. } | GoalSpec::Boxed { .. } => z.clone(),
                GoalSpec::MaxMinGap { .. } => z.iter().map(|v| v - shift).collect(),
            };
            assert!(g.polar_residual(&c) <= 1e-9);
            let gap: f64 = (0..4).map(|i| (u[i] - proj[i]) * (c[i] - proj[i])).sum();
            assert!(gap <= 1e-9, "variational inequality violated: {gap}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..200 {
            let g = GoalSpec::max_min_gap(1.0, 5, rng.random_bool(0.5));
            let u: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p1 = g.project_polar(&u);
            let p2 = g.project_polar(&p1);
            for i in 0..5 {
                assert_close(p1[i], p2[i], 1e-12);
            }
        }
    }

    #[test]
    fn goal_projection_survives_anchor_rounding() {
        // With the anchor at lower[0] - rho, re-adding rho lands one ulp
        // below lower[0]; the window interval must not invert.
        let g = GoalSpec::boxed(
            GoalSpec::max_min_gap(7.209242291483136, 1, false),
            vec![0.35979798291050286],
            vec![3.9644191286520707],
        );
        let y = [0.0];
        let proj = g.project_onto_goal(&y);
        assert!(g.contains(&proj, 1e-9));
        assert_close(
            (y[0] - proj[0]).abs(),
            g.distance_to_goal(&y),
            1e-9,
        );
    }

    #[test]
    fn support_point_dominates_samples() {
        let mut rng = StdRng::seed_from_u64(5);
        for case in 0..100 {
            let m = 3;
            let g = match case % 3 {
                0 => box01(m),
                1 => GoalSpec::max_min_gap(2.0, m, true),
                _ => GoalSpec::boxed(
                    GoalSpec::max_min_gap(2.0, m, true),
                    vec![0.2; m],
                    vec![3.0; m],
                ),
            };
            let p: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = g.support_point(&p);
            assert!(g.contains(&v, 1e-9), "support point must lie in the goal");
            // Random members of the compact part.
            for _ in 0..20 {
                let q: Vec<f64> = match &g {
                    GoalSpec::Box { lower, upper } => (0..m)
                        .map(|i| rng.random_range(lower[i]..upper[i]))
                        .collect(),
                    GoalSpec::MaxMinGap { rho, .. } => {
                        (0..m).map(|_| rng.random_range(0.0..*rho)).collect()
                    }
                    GoalSpec::Boxed { inner, lower, upper } => {
                        let rho = match inner.as_ref() {
                            GoalSpec::MaxMinGap { rho, .. } => *rho,
                            _ => unreachable!(),
                        };
                        let el = effective_lower(lower, true);
                        let a_lo = el.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rho;
                        let a_hi = upper.iter().cloned().fold(f64::INFINITY, f64::min);
                        // Strictly interior anchor so every coordinate
                        // interval has positive width.
                        let a = a_lo + (a_hi - a_lo) * rng.random_range(0.05..0.95);
                        (0..m)
                            .map(|i| {
                                let (l, h) = window_interval(i, a, rho, Some(&el), Some(upper));
                                rng.random_range(l..h)
                            })
                            .collect()
                    }
                };
                assert!(dot(&p, &v) >= dot(&p, &q) - 1e-9);
            }
        }
    }

    #[test]
    fn points_built_from_decomposition_have_zero_distance() {
        let mut rng = StdRng::seed_from_u64(6);
        for _ in 0..200 {
            let m = 4;
            let g = GoalSpec::max_min_gap(1.5, m, true);
            let q: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.5)).collect();
            let lambda: f64 = rng.random_range(0.0..10.0);
            let y: Vec<f64> = q.iter().map(|v| v + lambda).collect();
            assert!(g.distance_to_goal(&y) <= 1e-9);

            let g = GoalSpec::max_min_gap(1.5, m, false);
            let shift: f64 = rng.random_range(-10.0..10.0);
            let y: Vec<f64> = q.iter().map(|v| v + shift).collect();
            assert!(g.distance_to_goal(&y) <= 1e-9);
        }
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        assert!(GoalSpec::max_min_gap(0.0, 2, true).validate().is_err());
        assert!(GoalSpec::max_min_gap(-1.0, 2, true).validate().is_err());
        let flat = GoalSpec::Box {
            lower: vec![0.0, 1.0],
            upper: vec![1.0, 1.0],
        };
        assert!(flat.validate().is_err());
        let nested = GoalSpec::boxed(
            GoalSpec::boxed(box01(2), vec![0.0; 2], vec![1.0; 2]),
            vec![0.0; 2],
            vec![1.0; 2],
        );
        assert!(nested.validate().is_err());
        // Box so spread out that no window fits inside it.
        let empty = GoalSpec::boxed(
            GoalSpec::max_min_gap(1.0, 2, true),
            vec![0.0, 10.0],
            vec![1.0, 11.0],
        );
        assert!(empty.validate().is_err());
        assert!(box01(3).validate().is_ok());
    }

    #[test]
    fn serde_round_trip() {
        let g = GoalSpec::boxed(
            GoalSpec::max_min_gap(2.5, 3, true),
            vec![-1.0; 3],
            vec![4.0; 3],
        );
        let s = serde_json::to_string(&g).unwrap();
        let back: GoalSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn price_norm_bound_formula() {
        let c = InstanceConstants {
            d_y: 2.0,
            d_r: 3.0,
            d_lower: 0.5,
            m: 4,
        };
        c.validate().unwrap();
        assert_close(c.price_norm_bound(), 11.0, 1e-12);
        assert_close(c.dual_opt_norm_bound(), 6.0, 1e-12);
        let bad = InstanceConstants {
            d_lower: 0.0,
            ..c
        };
        assert!(bad.validate().is_err());
    }
}
