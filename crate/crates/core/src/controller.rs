//! Piecewise-affine feedback controller extracted from a robust policy, and
//! Monte Carlo validation of its certificate.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractAction;
use crate::dynamics::{simulate, FeedbackLaw, LinearSystem, Outcome, Trace};
use crate::interval::{clopper_pearson, IntervalError};
use crate::partition::{Partition, RegionId, RegionLabel};
use crate::robust_mdp::RobustSolution;
use crate::seed::{derive_seed, rng_from_seed};

/// Significance of the binomial interval reported by [`validate`].
pub const VALIDATION_SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("solution, partition, actions and system do not match: {0}")]
    Mismatch(String),
    #[error("initial state {0:?} lies outside the partition domain")]
    OutsideDomain(Vec<f64>),
    #[error("validation needs at least one run")]
    NoRuns,
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

type Result<T, E = ControllerError> = std::result::Result<T, E>;

/// `c(x, k) = B⁺ (d − A x − q)` where `d` is the target of the action chosen
/// at step `k` in the region containing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackController {
    partition: Partition,
    /// Action targets indexed by action id.
    targets: Vec<DVector<f64>>,
    /// `policy[k][region]`.
    policy: Vec<Vec<Option<usize>>>,
    /// Step-0 robust value of every region.
    certificate: Vec<f64>,
    confidence: f64,
    a: DMatrix<f64>,
    b_pinv: DMatrix<f64>,
    q: DVector<f64>,
}

pub fn refine(
    solution: &RobustSolution,
    part: &Partition,
    actions: &[AbstractAction],
    sys: &LinearSystem,
) -> Result<FeedbackController> {
    let n = sys.state_dim();
    let r = part.num_regions();
    let mismatch = |m: String| Err(ControllerError::Mismatch(m));
    if part.dim() != n {
        return mismatch(format!("partition has dimension {}, system {n}", part.dim()));
    }
    if solution.values.is_empty() || solution.values[0].len() < r {
        return mismatch(format!("solution covers fewer than {r} regions"));
    }
    if solution.policy.len() != solution.horizon {
        return mismatch(format!(
            "policy has {} steps for horizon {}",
            solution.policy.len(),
            solution.horizon
        ));
    }
    if let Some(a) = actions.iter().enumerate().find(|(i, a)| a.id != *i || a.target.len() != n) {
        return mismatch(format!("action {} has id {} or wrong dimension", a.0, a.1.id));
    }
    let mut policy = Vec::with_capacity(solution.horizon);
    for (k, step) in solution.policy.iter().enumerate() {
        if step.len() < r {
            return mismatch(format!("policy step {k} covers fewer than {r} regions"));
        }
        let row: Vec<Option<usize>> = step[..r].to_vec();
        for (region, act) in row.iter().enumerate() {
            if let Some(a) = *act {
                let ok = actions
                    .get(a)
                    .is_some_and(|act| act.enabled_in.binary_search(&RegionId(region)).is_ok());
                if !ok {
                    return mismatch(format!("action {a} is not enabled in region {region}"));
                }
            }
        }
        policy.push(row);
    }
    Ok(FeedbackController {
        partition: part.clone(),
        targets: actions.iter().map(|a| a.target.clone()).collect(),
        policy,
        certificate: solution.values[0][..r].to_vec(),
        confidence: solution.confidence,
        a: sys.a().clone(),
        b_pinv: sys.b_pinv().clone(),
        q: sys.q().clone(),
    })
}

impl FeedbackController {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn horizon(&self) -> usize {
        self.policy.len()
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_pinv.nrows()
    }

    /// Action chosen at step `k` for the region containing `x`.
    pub fn action_at(&self, x: &DVector<f64>, k: usize) -> Option<usize> {
        let r = self.partition.region_of(x)?;
        self.policy.get(k)?[r.0]
    }

    pub fn target(&self, action: usize) -> &DVector<f64> {
        &self.targets[action]
    }

    /// Certified lower bound on the reach-avoid probability from `x0`.
    /// Goal cells are certain, critical cells hopeless.
    pub fn certified_bound(&self, x0: &DVector<f64>) -> Result<f64> {
        let r = self
            .partition
            .region_of(x0)
            .ok_or_else(|| ControllerError::OutsideDomain(x0.iter().copied().collect()))?;
        Ok(match self.partition.label(r) {
            RegionLabel::Goal => 1.0,
            RegionLabel::Critical => 0.0,
            RegionLabel::Free => self.certificate[r.0],
        })
    }

    fn check_system(&self, sys: &LinearSystem) -> Result<()> {
        if sys.state_dim() != self.state_dim() || sys.input_dim() != self.input_dim() {
            return Err(ControllerError::Mismatch(format!(
                "controller is {}x{}, system is {}x{}",
                self.state_dim(),
                self.input_dim(),
                sys.state_dim(),
                sys.input_dim()
            )));
        }
        Ok(())
    }
}

impl FeedbackLaw for FeedbackController {
    fn control(&self, x: &DVector<f64>, k: usize) -> Option<DVector<f64>> {
        let a = self.action_at(x, k)?;
        Some(&self.b_pinv * (&self.targets[a] - &self.a * x - &self.q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub runs: u64,
    pub successes: u64,
    pub critical: u64,
    pub timeouts: u64,
    pub empirical: f64,
    /// Two-sided Clopper–Pearson interval on the success probability.
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_level: f64,
    pub certified: f64,
    pub horizon: usize,
    pub seed: u64,
    /// The certificate is consistent with the simulations: `ci_high ≥ certified`.
    pub pass: bool,
}

impl ValidationReport {
    /// `√(p̂(1 − p̂)/M)`.
    pub fn std_error(&self) -> f64 {
        (self.empirical * (1.0 - self.empirical) / self.runs as f64).sqrt()
    }
}

/// Rollout number `run` of the batch seeded by `seed`.
pub fn simulate_run(
    sys: &LinearSystem,
    ctrl: &FeedbackController,
    x0: &DVector<f64>,
    horizon: usize,
    seed: u64,
    run: u64,
) -> Trace {
    let mut rng = rng_from_seed(derive_seed(seed, run));
    simulate(sys, ctrl, x0, horizon, ctrl.partition(), &mut rng)
}

/// `runs` closed-loop simulations of `horizon` steps from `x0`. Leaving the
/// domain, entering a critical cell or reaching a cell without an action
/// counts as failure.
pub fn validate(
    sys: &LinearSystem,
    ctrl: &FeedbackController,
    x0: &DVector<f64>,
    horizon: usize,
    runs: u64,
    seed: u64,
) -> Result<ValidationReport> {
    if runs == 0 {
        return Err(ControllerError::NoRuns);
    }
    ctrl.check_system(sys)?;
    if x0.len() != ctrl.state_dim() {
        return Err(ControllerError::Mismatch(format!(
            "initial state has dimension {}",
            x0.len()
        )));
    }
    let certified = ctrl.certified_bound(x0)?;
    let (successes, critical, timeouts) = (0..runs)
        .into_par_iter()
        .map(|i| match simulate_run(sys, ctrl, x0, horizon, seed, i).outcome {
            Outcome::ReachedGoal(_) => (1, 0, 0),
            Outcome::HitCritical(_) => (0, 1, 0),
            Outcome::Timeout(_) => (0, 0, 1),
        })
        .reduce(|| (0u64, 0u64, 0u64), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let ci = clopper_pearson(successes, runs, VALIDATION_SIGNIFICANCE)?;
    Ok(ValidationReport {
        runs,
        successes,
        critical,
        timeouts,
        empirical: successes as f64 / runs as f64,
        ci_low: ci.low(),
        ci_high: ci.high(),
        ci_level: 1.0 - VALIDATION_SIGNIFICANCE,
        certified,
        horizon,
        seed,
        pass: ci.high() >= certified,
    })
}
