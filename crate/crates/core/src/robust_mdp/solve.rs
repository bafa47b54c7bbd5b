use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IntervalMDP, Transition, FEASIBILITY_TOLERANCE};
use crate::interval::ProbabilityInterval;

/// Convergence threshold of the stationary (unbounded horizon) mode.
pub const STATIONARY_TOLERANCE: f64 = 1e-6;
pub const STATIONARY_MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("intervals admit no distribution: sum of lows {sum_low}, sum of highs {sum_high}")]
    Infeasible { sum_low: f64, sum_high: f64 },
    #[error("infeasible intervals for action {action} in state {state} at step {step}")]
    InfeasibleChoice {
        state: usize,
        action: usize,
        step: usize,
    },
    #[error("{values} values for {intervals} intervals")]
    LengthMismatch { values: usize, intervals: usize },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("action {action} in state {state} has a non-degenerate interval")]
    NotPointModel { state: usize, action: usize },
}

/// Finite-horizon solution.
///
/// Time runs forward: `values[k]` is the value at time `k` with `horizon − k`
/// steps remaining, so `values[horizon]` holds the terminal values and
/// `values[0]` the certificate. `policy[k][s]` is the action to take at time
/// `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolution {
    pub values: Vec<Vec<f64>>,
    pub policy: Vec<Vec<Option<usize>>>,
    pub horizon: usize,
    pub confidence: f64,
}

impl RobustSolution {
    pub fn value(&self, k: usize, state: usize) -> f64 {
        self.values[k][state]
    }

    pub fn action(&self, k: usize, state: usize) -> Option<usize> {
        self.policy.get(k).and_then(|p| p[state])
    }

    pub fn initial_values(&self) -> &[f64] {
        &self.values[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySolution {
    pub values: Vec<f64>,
    pub policy: Vec<Option<usize>>,
    pub iterations: usize,
    pub converged: bool,
    pub confidence: f64,
}

/// Worst-case expectation `min Σ pᵢ vᵢ` over `{ p : low ≤ p ≤ high, Σ p = 1 }`.
///
/// Every successor starts at its lower bound, then the free mass
/// `1 − Σ low` is poured into successors in ascending order of value (ties by
/// index) up to their upper bounds. Returns the optimum and a minimizing
/// distribution.
pub fn inner_min(
    values: &[f64],
    intervals: &[ProbabilityInterval],
) -> Result<(f64, Vec<f64>), SolveError> {
    if values.len() != intervals.len() {
        return Err(SolveError::LengthMismatch {
            values: values.len(),
            intervals: intervals.len(),
        });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut p: Vec<f64> = intervals.iter().map(|i| i.low()).collect();
    let (sum_low, sum_high) = sums(intervals.iter().copied());
    check_feasible(sum_low, sum_high)?;
    let mut free = 1.0 - sum_low;
    for &i in &order {
        if free <= 0.0 {
            break;
        }
        let add = intervals[i].width().min(free);
        p[i] += add;
        free -= add;
    }
    let value = p.iter().zip(values).map(|(p, v)| p * v).sum();
    Ok((value, p))
}

fn sums(it: impl Iterator<Item = ProbabilityInterval>) -> (f64, f64) {
    it.fold((0.0, 0.0), |(l, h), i| (l + i.low(), h + i.high()))
}

fn check_feasible(sum_low: f64, sum_high: f64) -> Result<(), SolveError> {
    if sum_low > 1.0 + FEASIBILITY_TOLERANCE || sum_high < 1.0 - FEASIBILITY_TOLERANCE {
        Err(SolveError::Infeasible { sum_low, sum_high })
    } else {
        Ok(())
    }
}

/// Allocation-light [`inner_min`] over a sparse distribution.
fn worst_case(dist: &[Transition], values: &[f64], order: &mut Vec<usize>) -> Result<f64, SolveError> {
    let (sum_low, sum_high) = sums(dist.iter().map(|t| t.interval));
    check_feasible(sum_low, sum_high)?;
    order.clear();
    order.extend(0..dist.len());
    // dist is sorted by successor, so position order is index order
    order.sort_by(|&a, &b| {
        values[dist[a].successor]
            .total_cmp(&values[dist[b].successor])
            .then(a.cmp(&b))
    });
    let mut value = 0.0;
    let mut free = 1.0 - sum_low;
    for t in dist {
        value += t.interval.low() * values[t.successor];
    }
    for &i in order.iter() {
        if free <= 0.0 {
            break;
        }
        let add = dist[i].interval.width().min(free);
        value += add * values[dist[i].successor];
        free -= add;
    }
    Ok(value)
}

fn expectation(dist: &[Transition], values: &[f64]) -> f64 {
    dist.iter().map(|t| t.interval.low() * values[t.successor]).sum()
}

fn terminal_values(imdp: &IntervalMDP) -> Vec<f64> {
    imdp.kinds().iter().map(|k| k.terminal_value()).collect()
}

/// One backup: per-distribution values, then the best action per state
/// (lowest action id on ties). Sinks keep their terminal value; states
/// without actions get 0.
fn backup<F>(
    imdp: &IntervalMDP,
    next: &[f64],
    step: usize,
    evaluate: F,
) -> Result<(Vec<f64>, Vec<Option<usize>>), SolveError>
where
    F: Fn(&[Transition], &[f64], &mut Vec<usize>) -> Result<f64, SolveError> + Sync,
{
    let dist_values: Vec<Result<f64, SolveError>> = (0..imdp.num_distributions())
        .into_par_iter()
        .map_init(Vec::new, |order, d| evaluate(imdp.distribution(d), next, order))
        .collect();
    let rows: Vec<Result<(f64, Option<usize>), SolveError>> = (0..imdp.num_states())
        .into_par_iter()
        .map(|s| {
            let kind = imdp.kind(s);
            if kind.is_sink() {
                return Ok((kind.terminal_value(), None));
            }
            let mut best: Option<(f64, usize)> = None;
            for c in imdp.choices(s) {
                let v = match &dist_values[c.distribution] {
                    Ok(v) => *v,
                    Err(SolveError::Infeasible { .. }) => {
                        return Err(SolveError::InfeasibleChoice {
                            state: s,
                            action: c.action,
                            step,
                        })
                    }
                    Err(e) => return Err(e.clone()),
                };
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, c.action));
                }
            }
            Ok(match best {
                Some((v, a)) => (v.clamp(0.0, 1.0), Some(a)),
                None => (0.0, None),
            })
        })
        .collect();
    let mut values = Vec::with_capacity(rows.len());
    let mut policy = Vec::with_capacity(rows.len());
    for r in rows {
        let (v, a) = r?;
        values.push(v);
        policy.push(a);
    }
    Ok((values, policy))
}

fn finite_horizon<F>(imdp: &IntervalMDP, horizon: usize, evaluate: F) -> Result<RobustSolution, SolveError>
where
    F: Fn(&[Transition], &[f64], &mut Vec<usize>) -> Result<f64, SolveError> + Sync,
{
    if horizon == 0 {
        return Err(SolveError::ZeroHorizon);
    }
    let mut values = vec![Vec::new(); horizon + 1];
    let mut policy = vec![Vec::new(); horizon];
    values[horizon] = terminal_values(imdp);
    for k in (0..horizon).rev() {
        let (v, p) = backup(imdp, &values[k + 1], k, &evaluate)?;
        values[k] = v;
        policy[k] = p;
    }
    Ok(RobustSolution {
        values,
        policy,
        horizon,
        confidence: imdp.confidence(),
    })
}

/// Maximizes the worst-case probability of reaching `Goal` within `horizon`
/// steps while avoiding `Unsafe`/`Out`. The adversary re-picks a distribution
/// within the intervals at every backup.
pub fn robust_value_iteration(imdp: &IntervalMDP, horizon: usize) -> Result<RobustSolution, SolveError> {
    finite_horizon(imdp, horizon, worst_case)
}

/// The same recursion for a model whose intervals are all degenerate.
pub fn nominal_value_iteration(imdp: &IntervalMDP, horizon: usize) -> Result<RobustSolution, SolveError> {
    for s in 0..imdp.num_states() {
        for c in imdp.choices(s) {
            if imdp
                .distribution(c.distribution)
                .iter()
                .any(|t| !t.interval.is_degenerate())
            {
                return Err(SolveError::NotPointModel {
                    state: s,
                    action: c.action,
                });
            }
        }
    }
    finite_horizon(imdp, horizon, |d, v, _| Ok(expectation(d, v)))
}

/// Unbounded-horizon robust reachability: iterate the backup from the
/// terminal values until the sup-norm change drops below `tolerance`.
pub fn robust_value_iteration_stationary(
    imdp: &IntervalMDP,
    tolerance: f64,
    max_iterations: usize,
) -> Result<StationarySolution, SolveError> {
    let mut values = terminal_values(imdp);
    let mut policy = vec![None; imdp.num_states()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iterations {
        let (next, p) = backup(imdp, &values, iterations, worst_case)?;
        iterations += 1;
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        policy = p;
        if delta < tolerance {
            converged = true;
            break;
        }
    }
    Ok(StationarySolution {
        values,
        policy,
        iterations,
        converged,
        confidence: imdp.confidence(),
    })
}
