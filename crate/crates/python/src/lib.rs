//! Python bindings for the online decision making toolkit: instance
//! generators, the dual-price learner, metrics, and the offline baselines,
//! wrapped as plain classes and functions. Vectors cross the boundary as
//! Python lists; series come back as dicts of lists so they drop straight
//! into a dataframe.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use odmp_core::analysis::{
    compute_metrics, loglog_slope, offline_bruteforce, two_phase_gap, unevenness,
};
use odmp_core::dual_learner::{
    dual_regret as core_dual_regret, estimate_dual_optimum, run_online, run_online_boxed,
    RunTrace, StepSchedule,
};
use odmp_core::goalset::GoalSpec;
use odmp_core::input_models::{
    batched_order, grouped_permutation, named_partition, uniform_permutation, PartitionKind,
};
use odmp_core::instances::{
    gen_assortment_visibility, gen_fair_assignment, gen_fair_knapsack, gen_two_phase,
    instance_hash, read_jsonl_path, write_jsonl_path, AssortmentVisibilityConfig,
    FairAssignmentConfig, FairKnapsackConfig, Instance as CoreInstance, TwoPhaseScenario,
};
use odmp_core::Error as CoreError;

fn to_py(e: CoreError) -> PyErr {
    match e {
        CoreError::Config(_) | CoreError::Dimension { .. } | CoreError::ExactModeLimit { .. } => {
            PyValueError::new_err(e.to_string())
        }
        CoreError::Io(_) => PyIOError::new_err(e.to_string()),
        CoreError::Json(_) | CoreError::Format(_) => PyValueError::new_err(e.to_string()),
        CoreError::InfiniteDual { .. }
        | CoreError::PolarDrift { .. }
        | CoreError::EnumerationLimit { .. }
        | CoreError::Infeasible => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_partition(kind: &str) -> PyResult<PartitionKind> {
    match kind {
        "weekday_weekend" => Ok(PartitionKind::WeekdayWeekend),
        "half_half" => Ok(PartitionKind::HalfHalf),
        "k_periodic" => Ok(PartitionKind::KPeriodic),
        other => Err(PyValueError::new_err(format!(
            "unknown partition kind {other:?}; use weekday_weekend, half_half or k_periodic"
        ))),
    }
}

/// A goal set: where the time-averaged impact vector should end up.
#[pyclass(frozen, name = "Goal", skip_from_py_object)]
#[derive(Clone)]
struct Goal {
    inner: GoalSpec,
}

#[pymethods]
impl Goal {
    /// Axis-aligned box {y : lower <= y <= upper}.
    #[staticmethod]
    #[pyo3(name = "box")]
    fn box_goal(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        let inner = GoalSpec::Box { lower, upper };
        inner.validate().map_err(to_py)?;
        Ok(Goal { inner })
    }

    /// Spread band {y : max_i y_i - min_i y_i <= rho}, optionally cut to
    /// the nonnegative orthant.
    #[staticmethod]
    #[pyo3(signature = (rho, dim, nonneg = true))]
    fn max_min_gap(rho: f64, dim: usize, nonneg: bool) -> PyResult<Self> {
        let inner = GoalSpec::max_min_gap(rho, dim, nonneg);
        inner.validate().map_err(to_py)?;
        Ok(Goal { inner })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Euclidean distance from y to the goal set; zero inside it.
    fn distance(&self, y: Vec<f64>) -> PyResult<f64> {
        self.check_dim(y.len())?;
        Ok(self.inner.distance_to_goal(&y))
    }

    #[pyo3(signature = (y, tol = 1e-9))]
    fn contains(&self, y: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.check_dim(y.len())?;
        Ok(self.inner.contains(&y, tol))
    }

    /// Maximizer of <p, v> over the compact part of the goal set.
    fn support_point(&self, p: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_dim(p.len())?;
        Ok(self.inner.support_point(&p))
    }

    /// Euclidean projection onto the polar cone of dual prices.
    fn project_polar(&self, u: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check_dim(u.len())?;
        Ok(self.inner.project_polar(&u))
    }

    fn __repr__(&self) -> String {
        format!("Goal(dim={})", self.inner.dim())
    }
}

impl Goal {
    fn check_dim(&self, got: usize) -> PyResult<()> {
        if got != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a vector of length {}, got {got}",
                self.inner.dim()
            )));
        }
        Ok(())
    }
}

/// A stepsize schedule for the dual update.
#[pyclass(frozen, name = "Schedule", skip_from_py_object)]
#[derive(Clone)]
struct Schedule {
    inner: StepSchedule,
}

#[pymethods]
impl Schedule {
    /// eta_t = min(gamma/m, gamma/sqrt(m t)); no horizon needed.
    #[staticmethod]
    #[pyo3(signature = (gamma = 1.0))]
    fn diminishing(gamma: f64) -> PyResult<Self> {
        let inner = StepSchedule::diminishing(gamma);
        inner.validate().map_err(to_py)?;
        Ok(Schedule { inner })
    }

    /// eta = gamma/sqrt(m T) throughout.
    #[staticmethod]
    fn constant(gamma: f64, horizon: usize) -> PyResult<Self> {
        let inner = StepSchedule::constant(gamma, horizon);
        inner.validate().map_err(to_py)?;
        Ok(Schedule { inner })
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn __repr__(&self) -> String {
        format!("Schedule({:?}, gamma={})", self.inner.mode, self.inner.gamma)
    }
}

/// A generated problem: steps in arrival order plus the goal set.
#[pyclass(name = "Instance", skip_from_py_object)]
#[derive(Clone)]
struct Instance {
    inner: CoreInstance,
}

#[pymethods]
impl Instance {
    /// Online knapsack with a fairness-over-time goal across stakeholders.
    #[staticmethod]
    #[pyo3(signature = (items = 50, stakeholders = 10, horizon = 10_000, rho = 100.0, seed = 0))]
    fn fair_knapsack(
        items: usize,
        stakeholders: usize,
        horizon: usize,
        rho: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = FairKnapsackConfig {
            items,
            stakeholders,
            horizon,
            rho,
            seed,
        };
        Ok(Instance {
            inner: gen_fair_knapsack(&cfg).map_err(to_py)?,
        })
    }

    /// Assortment offers under MMNL choice with per-product visibility
    /// floors and a cardinality cap.
    #[staticmethod]
    #[pyo3(signature = (products = 15, types = 4, cardinality = 5, horizon = 1500,
                        no_purchase_rate = 0.5, type_weights = None, seed = 0))]
    fn assortment_visibility(
        products: usize,
        types: usize,
        cardinality: usize,
        horizon: usize,
        no_purchase_rate: f64,
        type_weights: Option<Vec<f64>>,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = AssortmentVisibilityConfig {
            products,
            types,
            cardinality,
            horizon,
            no_purchase_rate,
            type_weights: type_weights.unwrap_or_else(|| vec![1.0; types]),
            seed,
        };
        Ok(Instance {
            inner: gen_assortment_visibility(&cfg).map_err(to_py)?,
        })
    }

    /// Task-to-agent assignment with a workload spread band.
    #[staticmethod]
    #[pyo3(signature = (agents = 5, tasks_min = 1, tasks_max = 1, horizon = 1000, rho = 5.0, seed = 0))]
    fn fair_assignment(
        agents: usize,
        tasks_min: usize,
        tasks_max: usize,
        horizon: usize,
        rho: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = FairAssignmentConfig {
            agents,
            tasks_min,
            tasks_max,
            horizon,
            rho,
            seed,
        };
        Ok(Instance {
            inner: gen_fair_assignment(&cfg).map_err(to_py)?,
        })
    }

    /// Adversarial two-phase budget stream; scenario is "bust" or "boom".
    #[staticmethod]
    fn two_phase_budget(horizon: usize, scenario: &str) -> PyResult<Self> {
        let scenario = match scenario {
            "bust" => TwoPhaseScenario::Bust,
            "boom" => TwoPhaseScenario::Boom,
            other => {
                return Err(PyValueError::new_err(format!(
                    "scenario must be \"bust\" or \"boom\", got {other:?}"
                )))
            }
        };
        Ok(Instance {
            inner: gen_two_phase(horizon, scenario).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read_jsonl(path: &str) -> PyResult<Self> {
        Ok(Instance {
            inner: read_jsonl_path(path).map_err(to_py)?,
        })
    }

    fn write_jsonl(&self, path: &str) -> PyResult<()> {
        write_jsonl_path(&self.inner, path).map_err(to_py)
    }

    /// SHA-256 of the canonical serialization.
    fn hash(&self) -> PyResult<String> {
        instance_hash(&self.inner).map_err(to_py)
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn goal(&self) -> Goal {
        Goal {
            inner: self.inner.goal.clone(),
        }
    }

    /// Same instance with steps shuffled by a uniform random permutation.
    fn reorder_uniform(&self, seed: u64) -> PyResult<Self> {
        let order = uniform_permutation(self.inner.horizon(), seed);
        let mut inner = self.inner.clone();
        inner.steps = order.apply(&inner.steps).map_err(to_py)?;
        Ok(Instance { inner })
    }

    /// Shuffle within the groups of a named partition, keeping group slots.
    #[pyo3(signature = (kind, seed, k = None))]
    fn reorder_grouped(&self, kind: &str, seed: u64, k: Option<usize>) -> PyResult<Self> {
        let partition =
            named_partition(parse_partition(kind)?, self.inner.horizon(), k).map_err(to_py)?;
        let order = grouped_permutation(&partition, seed);
        let mut inner = self.inner.clone();
        inner.steps = order.apply(&inner.steps).map_err(to_py)?;
        Ok(Instance { inner })
    }

    /// Concatenate the groups of a named partition in order.
    #[pyo3(signature = (kind, k = None))]
    fn reorder_batched(&self, kind: &str, k: Option<usize>) -> PyResult<Self> {
        let partition =
            named_partition(parse_partition(kind)?, self.inner.horizon(), k).map_err(to_py)?;
        let order = batched_order(&partition);
        let mut inner = self.inner.clone();
        inner.steps = order.apply(&inner.steps).map_err(to_py)?;
        Ok(Instance { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(family={:?}, m={}, horizon={})",
            self.inner.family,
            self.inner.m(),
            self.inner.horizon()
        )
    }
}

/// Record of one online run.
#[pyclass(frozen, name = "Trace")]
struct Trace {
    inner: RunTrace,
}

#[pymethods]
impl Trace {
    #[getter]
    fn total_reward(&self) -> f64 {
        self.inner.total_reward()
    }

    #[getter]
    fn box_warnings(&self) -> usize {
        self.inner.box_warnings
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Running metrics as {"t", "reward_avg", "goalvio_avg", "p_norm", "eta"}.
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let series = compute_metrics(&self.inner);
        let out = PyDict::new(py);
        out.set_item("t", series.t)?;
        out.set_item("reward_avg", series.reward_avg)?;
        out.set_item("goalvio_avg", series.goalvio_avg)?;
        out.set_item("p_norm", series.p_norm)?;
        out.set_item("eta", series.eta)?;
        Ok(out)
    }

    #[getter]
    fn final_reward_avg(&self) -> f64 {
        self.inner.total_reward() / self.inner.len() as f64
    }

    #[getter]
    fn final_goalvio_avg(&self) -> f64 {
        let total = self.inner.cumulative_impact();
        let t = self.inner.len() as f64;
        let avg: Vec<f64> = total.iter().map(|y| y / t).collect();
        self.inner.goal.distance_to_goal(&avg)
    }

    /// {"bound", "max_norm", "violations"} when the price norm guarantee
    /// applies to this run, else None.
    fn price_norm_check<'py>(&self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        match self.inner.price_norm_check() {
            None => Ok(None),
            Some(check) => {
                let out = PyDict::new(py);
                out.set_item("bound", check.bound)?;
                out.set_item("max_norm", check.max_norm)?;
                out.set_item("violations", check.violations)?;
                Ok(Some(out))
            }
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace(steps={}, total_reward={:.6})",
            self.inner.len(),
            self.inner.total_reward()
        )
    }
}

/// Run the online dual-price learner over the instance in its stored order.
#[pyfunction]
fn run(instance: &Instance, schedule: &Schedule) -> PyResult<Trace> {
    let inner = run_online(
        &instance.inner.steps,
        &instance.inner.goal,
        &schedule.inner,
        instance.inner.constants,
    )
    .map_err(to_py)?;
    Ok(Trace { inner })
}

/// Box-restricted variant: goal replaced by its intersection with
/// [y_lower, y_upper]; prices are never projected.
#[pyfunction]
fn run_boxed(
    instance: &Instance,
    schedule: &Schedule,
    y_lower: Vec<f64>,
    y_upper: Vec<f64>,
) -> PyResult<Trace> {
    let inner = run_online_boxed(
        &instance.inner.steps,
        &instance.inner.goal,
        &y_lower,
        &y_upper,
        &schedule.inner,
        None,
    )
    .map_err(to_py)?;
    Ok(Trace { inner })
}

/// Subgradient estimate of the dual optimum; returns (price, value). The
/// value upper-bounds the offline optimum regardless of convergence.
#[pyfunction]
#[pyo3(signature = (instance, iters = 60, seed = 0))]
fn dual_upper_bound(instance: &Instance, iters: usize, seed: u64) -> PyResult<(Vec<f64>, f64)> {
    estimate_dual_optimum(&instance.inner.steps, &instance.inner.goal, iters, seed).map_err(to_py)
}

/// OCO regret of a finished run's price sequence against a reference dual
/// value.
#[pyfunction]
fn dual_regret(trace: &Trace, z_ref: f64) -> f64 {
    core_dual_regret(&trace.inner, z_ref)
}

/// Exact offline optimum by enumeration; grows with the product of the
/// per-step decision counts, so keep instances tiny.
#[pyfunction]
#[pyo3(signature = (instance, limit = None))]
fn offline_optimum(instance: &Instance, limit: Option<f64>) -> PyResult<f64> {
    offline_bruteforce(&instance.inner.steps, &instance.inner.goal, limit)
        .map(|sol| sol.z_star)
        .map_err(to_py)
}

/// Wasserstein unevenness of a named partition under a schedule:
/// {"group_w": [...], "total": W}.
#[pyfunction]
#[pyo3(signature = (kind, horizon, schedule, m, k = None))]
fn partition_unevenness<'py>(
    py: Python<'py>,
    kind: &str,
    horizon: usize,
    schedule: &Schedule,
    m: usize,
    k: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let partition = named_partition(parse_partition(kind)?, horizon, k).map_err(to_py)?;
    let report = unevenness(&partition, &schedule.inner, m).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("group_w", report.group_w)?;
    out.set_item("total", report.total)?;
    Ok(out)
}

/// Least-squares slope of log(value) vs log(t) over t in [lo, hi].
#[pyfunction]
fn fit_loglog_slope(ts: Vec<usize>, values: Vec<f64>, lo: usize, hi: usize) -> PyResult<f64> {
    loglog_slope(&ts, &values, lo..=hi).map_err(to_py)
}

/// Competitive ratios of the two-phase budget stream:
/// {"ratio_accept_all", "ratio_reject_then_accept"}.
#[pyfunction]
fn two_phase_ratios<'py>(py: Python<'py>, horizon: usize) -> PyResult<Bound<'py, PyDict>> {
    let gap = two_phase_gap(horizon).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("ratio_accept_all", gap.ratio_accept_all)?;
    out.set_item("ratio_reject_then_accept", gap.ratio_reject_then_accept)?;
    Ok(out)
}

#[pymodule]
fn odmp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Goal>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Instance>()?;
    m.add_class::<Trace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(run_boxed, m)?)?;
    m.add_function(wrap_pyfunction!(dual_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(dual_regret, m)?)?;
    m.add_function(wrap_pyfunction!(offline_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(partition_unevenness, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog_slope, m)?)?;
    m.add_function(wrap_pyfunction!(two_phase_ratios, m)?)?;
    Ok(())
}
