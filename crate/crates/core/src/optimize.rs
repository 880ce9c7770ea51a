//! BFGS with a strong-Wolfe line search.
//!
//! Every objective evaluation, line-search probes included, is appended to
//! the cost trace. Gradient calls advance the evaluation counter by
//! [`Objective::gradient_evaluations`] without adding trace rows, so the
//! evaluation index of a trace row is the total number of cost evaluations
//! spent up to and including it.

use serde::{Deserialize, Serialize};

use crate::error::{QaeError, Result};

pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Result<f64>;

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>>;

    /// Cost evaluations consumed by one [`Objective::gradient`] call.
    fn gradient_evaluations(&self) -> usize {
        0
    }
}

/// Adapts a pair of closures.
pub struct FnObjective<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.value)(x))
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.gradient)(x))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Budget of cost evaluations, gradient shifts included.
    pub max_evaluations: usize,
    /// Stop once `‖∇f‖∞` drops below this.
    pub gradient_tolerance: f64,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub initial_hessian_scale: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 20_000,
            gradient_tolerance: 1e-6,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            initial_hessian_scale: 1.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(QaeError::invalid(format!(
                "Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={} c2={}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.gradient_tolerance > 0.0 && self.initial_hessian_scale > 0.0) {
            return Err(QaeError::invalid("tolerance and Hessian scale must be positive"));
        }
        if self.max_evaluations == 0 {
            return Err(QaeError::invalid("evaluation budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub evaluation: usize,
    pub cost: f64,
}

/// Objective values in evaluation order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostTrace {
    pub records: Vec<TraceRecord>,
}

impl CostTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_cost(&self) -> Option<f64> {
        self.records.first().map(|r| r.cost)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "evaluation,cost")?;
        for r in &self.records {
            writeln!(out, "{},{}", r.evaluation, r.cost)?;
        }
        out.flush()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientConverged,
    MaxEvals,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub theta_opt: Vec<f64>,
    pub final_cost: f64,
    pub trace: CostTrace,
    /// Trace positions of the initial point and of every accepted step.
    pub accepted: Vec<usize>,
    pub iterations: usize,
    /// Total cost evaluations, gradient shifts included.
    pub evaluations: usize,
    pub termination: Termination,
}

struct Evaluator<'a, O: Objective + ?Sized, S: FnMut(&TraceRecord)> {
    objective: &'a mut O,
    sink: S,
    trace: CostTrace,
    evaluations: usize,
    budget: usize,
}

impl<O: Objective + ?Sized, S: FnMut(&TraceRecord)> Evaluator<'_, O, S> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn value(&mut self, x: &[f64]) -> Result<f64> {
        let cost = self.objective.value(x)?;
        if !cost.is_finite() {
            return Err(QaeError::Numeric(format!(
                "objective returned {cost} at evaluation {}",
                self.evaluations + 1
            )));
        }
        self.evaluations += 1;
        let record = TraceRecord {
            evaluation: self.evaluations,
            cost,
        };
        (self.sink)(&record);
        self.trace.records.push(record);
        Ok(cost)
    }

    fn gradient(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.objective.gradient(x)?;
        if g.len() != x.len() {
            return Err(QaeError::invalid(format!(
                "gradient has length {}, expected {}",
                g.len(),
                x.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(QaeError::Numeric("gradient has non-finite components".into()));
        }
        self.evaluations += self.objective.gradient_evaluations();
        Ok(g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

/// Minimizes `objective` from `theta0`.
pub fn bfgs_minimize<O: Objective + ?Sized>(
    objective: &mut O,
    theta0: &[f64],
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    bfgs_minimize_with_sink(objective, theta0, config, |_| {})
}

/// As [`bfgs_minimize`], streaming each trace record to `sink` as it is
/// produced.
pub fn bfgs_minimize_with_sink<O, S>(
    objective: &mut O,
    theta0: &[f64],
    config: &OptimizerConfig,
    sink: S,
) -> Result<OptimizationResult>
where
    O: Objective + ?Sized,
    S: FnMut(&TraceRecord),
{
    config.validate()?;
    if theta0.iter().any(|v| !v.is_finite()) {
        return Err(QaeError::invalid("initial point has non-finite components"));
    }
    let n = theta0.len();
    let mut ev = Evaluator {
        objective,
        sink,
        trace: CostTrace::default(),
        evaluations: 0,
        budget: config.max_evaluations,
    };

    let mut x = theta0.to_vec();
    let mut f = ev.value(&x)?;
    let mut accepted = vec![0];
    let mut g = ev.gradient(&x)?;
    let mut h = scaled_identity(n, config.initial_hessian_scale);
    let mut iterations = 0;

    let termination = loop {
        if g.iter().fold(0.0f64, |m, v| m.max(v.abs())) < config.gradient_tolerance {
            break Termination::GradientConverged;
        }
        if ev.exhausted() {
            break Termination::MaxEvals;
        }

        let mut p = matvec_neg(&h, &g);
        if dot(&p, &g) >= 0.0 {
            // lost positive definiteness; restart from steepest descent
            h = scaled_identity(n, config.initial_hessian_scale);
            p = matvec_neg(&h, &g);
        }

        let step = match line_search(&mut ev, &x, f, &g, &p, config)? {
            LineSearch::Accepted(step) => step,
            LineSearch::Failed => break Termination::LineSearchFailed,
            LineSearch::Exhausted => break Termination::MaxEvals,
        };
        iterations += 1;

        let s: Vec<f64> = p.iter().map(|v| step.alpha * v).collect();
        let y: Vec<f64> = step.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = step.x;
        f = step.value;
        g = step.grad;
        accepted.push(step.trace_index);
    };

    Ok(OptimizationResult {
        theta_opt: x,
        final_cost: f,
        trace: ev.trace,
        accepted,
        iterations,
        evaluations: ev.evaluations,
        termination,
    })
}

fn scaled_identity(n: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { scale } else { 0.0 }).collect())
        .collect()
}

fn matvec_neg(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    h.iter().map(|row| -dot(row, g)).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ` with `ρ = 1 / yᵀs`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i][j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

struct Step {
    alpha: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    trace_index: usize,
}

enum LineSearch {
    Accepted(Step),
    Failed,
    Exhausted,
}

struct Probe {
    alpha: f64,
    value: f64,
    /// Directional derivative, only known once the probe passed the
    /// sufficient-decrease test.
    slope: Option<f64>,
}

const MAX_BRACKET_STEPS: usize = 25;
const MAX_ZOOM_STEPS: usize = 30;

/// Strong-Wolfe search along `p` (bracketing then zoom). Gradients are only
/// requested at probes that already satisfy sufficient decrease.
fn line_search<O, S>(
    ev: &mut Evaluator<'_, O, S>,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    p: &[f64],
    config: &OptimizerConfig,
) -> Result<LineSearch>
where
    O: Objective + ?Sized,
    S: FnMut(&TraceRecord),
{
    let slope0 = dot(g0, p);
    let (c1, c2) = (config.wolfe_c1, config.wolfe_c2);
    let armijo = |alpha: f64, value: f64| value <= f0 + c1 * alpha * slope0;

    let mut prev = Probe {
        alpha: 0.0,
        value: f0,
        slope: Some(slope0),
    };
    let mut alpha = 1.0;
    for i in 0..MAX_BRACKET_STEPS {
        if ev.exhausted() {
            return Ok(LineSearch::Exhausted);
        }
        let xa = axpy(x, alpha, p);
        let value = ev.value(&xa)?;
        if !armijo(alpha, value) || (i > 0 && value >= prev.value) {
            let hi = Probe {
                alpha,
                value,
                slope: None,
            };
            return zoom(ev, x, f0, slope0, p, prev, hi, config);
        }
        let trace_index = ev.trace.len() - 1;
        if ev.exhausted() {
            return Ok(LineSearch::Exhausted);
        }
        let grad = ev.gradient(&xa)?;
        let slope = dot(&grad, p);
        if slope.abs() <= -c2 * slope0 {
            return Ok(LineSearch::Accepted(Step {
                alpha,
                x: xa,
                value,
                grad,
                trace_index,
            }));
        }
        let current = Probe {
            alpha,
            value,
            slope: Some(slope),
        };
        if slope >= 0.0 {
            return zoom(ev, x, f0, slope0, p, current, prev, config);
        }
        prev = current;
        alpha *= 2.0;
    }
    Ok(LineSearch::Failed)
}

#[allow(clippy::too_many_arguments)]
fn zoom<O, S>(
    ev: &mut Evaluator<'_, O, S>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    p: &[f64],
    mut lo: Probe,
    mut hi: Probe,
    config: &OptimizerConfig,
) -> Result<LineSearch>
where
    O: Objective + ?Sized,
    S: FnMut(&TraceRecord),
{
    let (c1, c2) = (config.wolfe_c1, config.wolfe_c2);
    for _ in 0..MAX_ZOOM_STEPS {
        if ev.exhausted() {
            return Ok(LineSearch::Exhausted);
        }
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        if (b - a) < 1e-14 * b.max(1.0) {
            return Ok(LineSearch::Failed);
        }
        let alpha = interpolate(&lo, &hi).filter(|t| {
            let margin = 0.1 * (b - a);
            *t > a + margin && *t < b - margin
        });
        let alpha = alpha.unwrap_or(0.5 * (a + b));

        let xa = axpy(x, alpha, p);
        let value = ev.value(&xa)?;
        if value > f0 + c1 * alpha * slope0 || value >= lo.value {
            hi = Probe {
                alpha,
                value,
                slope: None,
            };
            continue;
        }
        let trace_index = ev.trace.len() - 1;
        if ev.exhausted() {
            return Ok(LineSearch::Exhausted);
        }
        let grad = ev.gradient(&xa)?;
        let slope = dot(&grad, p);
        if slope.abs() <= -c2 * slope0 {
            return Ok(LineSearch::Accepted(Step {
                alpha,
                x: xa,
                value,
                grad,
                trace_index,
            }));
        }
        if slope * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = Probe {
            alpha,
            value,
            slope: Some(slope),
        };
    }
    Ok(LineSearch::Failed)
}

/// Minimizer of the cubic through both probes when both slopes are known,
/// otherwise of the quadratic through `lo`'s value and slope and `hi`'s value.
fn interpolate(lo: &Probe, hi: &Probe) -> Option<f64> {
    let d = hi.alpha - lo.alpha;
    let lo_slope = lo.slope?;
    match hi.slope {
        Some(hi_slope) => {
            let d1 = lo_slope + hi_slope - 3.0 * (lo.value - hi.value) / (lo.alpha - hi.alpha);
            let disc = d1 * d1 - lo_slope * hi_slope;
            if disc < 0.0 {
                return None;
            }
            let d2 = disc.sqrt() * d.signum();
            let t = hi.alpha - d * (hi_slope + d2 - d1) / (hi_slope - lo_slope + 2.0 * d2);
            t.is_finite().then_some(t)
        }
        None => {
            let denom = 2.0 * (hi.value - lo.value - lo_slope * d);
            if denom <= 0.0 {
                return None;
            }
            let t = lo.alpha - lo_slope * d * d / denom;
            t.is_finite().then_some(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock() -> FnObjective<impl FnMut(&[f64]) -> f64, impl FnMut(&[f64]) -> Vec<f64>> {
        FnObjective {
            value: |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            gradient: |x: &[f64]| {
                vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ]
            },
        }
    }

    #[test]
    fn rosenbrock_from_standard_start() {
        let config = OptimizerConfig {
            gradient_tolerance: 1e-10,
            ..Default::default()
        };
        let res = bfgs_minimize(&mut rosenbrock(), &[-1.2, 1.0], &config).unwrap();
        assert_eq!(res.termination, Termination::GradientConverged);
        assert!((res.theta_opt[0] - 1.0).abs() < 1e-6, "{:?}", res.theta_opt);
        assert!((res.theta_opt[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_converges_quickly() {
        // f = ½ xᵀAx − bᵀx with A = diag(1..=d) + 0.1 off-diagonal coupling
        let d = 6;
        let a: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { (i + 1) as f64 } else { 0.1 }).collect())
            .collect();
        let b: Vec<f64> = (0..d).map(|i| (i as f64) - 2.0).collect();
        let (a1, b1, a2, b2) = (a.clone(), b.clone(), a.clone(), b.clone());
        let mut obj = FnObjective {
            value: move |x: &[f64]| {
                let ax: Vec<f64> = a1.iter().map(|r| dot(r, x)).collect();
                0.5 * dot(x, &ax) - dot(&b1, x)
            },
            gradient: move |x: &[f64]| a2.iter().zip(&b2).map(|(r, bi)| dot(r, x) - bi).collect(),
        };
        let config = OptimizerConfig {
            gradient_tolerance: 1e-10,
            ..Default::default()
        };
        let res = bfgs_minimize(&mut obj, &vec![0.0; d], &config).unwrap();
        assert_eq!(res.termination, Termination::GradientConverged);
        assert!(res.iterations <= d + 5, "{} iterations", res.iterations);
        // residual Ax − b
        for (row, bi) in a.iter().zip(&b) {
            assert!((dot(row, &res.theta_opt) - bi).abs() < 1e-8);
        }
    }

    #[test]
    fn accepted_steps_strictly_decrease() {
        let res = bfgs_minimize(&mut rosenbrock(), &[-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        let costs: Vec<f64> = res.accepted.iter().map(|&i| res.trace.records[i].cost).collect();
        for w in costs.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert_eq!(*costs.last().unwrap(), res.final_cost);
        for (i, r) in res.trace.records.iter().enumerate() {
            assert_eq!(r.evaluation, i + 1);
        }
    }

    #[test]
    fn budget_stops_run() {
        let config = OptimizerConfig {
            max_evaluations: 15,
            gradient_tolerance: 1e-14,
            ..Default::default()
        };
        let res = bfgs_minimize(&mut rosenbrock(), &[-1.2, 1.0], &config).unwrap();
        assert_eq!(res.termination, Termination::MaxEvals);
        assert!(res.evaluations <= 15);
    }

    #[test]
    fn nan_objective_aborts() {
        let mut obj = FnObjective {
            value: |_: &[f64]| f64::NAN,
            gradient: |x: &[f64]| x.to_vec(),
        };
        assert!(matches!(
            bfgs_minimize(&mut obj, &[1.0], &OptimizerConfig::default()),
            Err(QaeError::Numeric(_))
        ));
    }

    #[test]
    fn inconsistent_gradient_fails_line_search() {
        // gradient points the wrong way: no step can satisfy sufficient decrease
        let mut obj = FnObjective {
            value: |x: &[f64]| x[0] * x[0],
            gradient: |x: &[f64]| vec![-2.0 * x[0]],
        };
        let res = bfgs_minimize(&mut obj, &[1.0], &OptimizerConfig::default()).unwrap();
        assert_eq!(res.termination, Termination::LineSearchFailed);
        assert_eq!(res.theta_opt, vec![1.0]);
        assert_eq!(res.final_cost, 1.0);
    }

    #[test]
    fn config_validation() {
        let bad = OptimizerConfig {
            wolfe_c1: 0.9,
            wolfe_c2: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sink_sees_every_record() {
        let mut seen = Vec::new();
        let res = bfgs_minimize_with_sink(&mut rosenbrock(), &[-1.2, 1.0], &OptimizerConfig::default(), |r| {
            seen.push(*r)
        })
        .unwrap();
        assert_eq!(seen, res.trace.records);
    }
}
