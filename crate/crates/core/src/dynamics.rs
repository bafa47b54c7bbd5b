//! Discrete-time linear stochastic dynamics
//!
//! ```text
//! x_{k+1} = A x_k + B u_k + q + η_k,   u_k ∈ U,   η_k i.i.d.
//! ```
//!
//! The noise is only ever accessed through its sampler: the abstraction
//! never looks at densities or moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Triangular};
use thiserror::Error;

use crate::geometry::AxisBox;

/// Slack allowed when checking `u ∈ U`.
pub const INPUT_TOLERANCE: f64 = 1e-9;
/// Largest admissible `‖A x + B u + q − d‖∞` for exact steering.
pub const STEERING_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0} contains non-finite entries")]
    NonFinite(&'static str),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("input {input:?} lies outside the input set (violation {violation:e})")]
    InputOutOfBounds { input: Vec<f64>, violation: f64 },
    #[error(
        "B has rank {rank} < state dimension {n}; steering residual {residual:e} (lift the system to more steps)"
    )]
    RankDeficient { rank: usize, n: usize, residual: f64 },
    #[error("lift needs at least one step")]
    ZeroLift,
}

pub type Result<T, E = DynamicsError> = std::result::Result<T, E>;

/// Seedable additive noise. Construct through the named constructors; the
/// variant data are validated there.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    dim: usize,
}

#[derive(Debug, Clone)]
enum NoiseKind {
    Gaussian {
        mean: DVector<f64>,
        /// `factor * factorᵀ = covariance`; symmetric eigen square root so
        /// singular covariances work.
        factor: DMatrix<f64>,
    },
    UniformBox {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    Triangular(Vec<Triangular<f64>>),
    Mixture {
        cumulative: Vec<f64>,
        components: Vec<NoiseModel>,
    },
    /// `Σ_i weights[i] · η_i` with `η_i` drawn independently from `base`.
    Lifted {
        base: Box<NoiseModel>,
        weights: Vec<DMatrix<f64>>,
    },
}

impl NoiseModel {
    pub fn gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) {
            return Err(DynamicsError::Dimension(format!(
                "covariance is {:?}, mean has length {n}",
                covariance.shape()
            )));
        }
        if !mean.iter().chain(covariance.iter()).all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("gaussian noise"));
        }
        let scale = covariance.amax().max(1.0);
        if (&covariance - covariance.transpose()).amax() > 1e-12 * scale {
            return Err(DynamicsError::InvalidNoise("covariance is not symmetric".into()));
        }
        let eig = covariance.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
            return Err(DynamicsError::InvalidNoise(
                "covariance is not positive semidefinite".into(),
            ));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(NoiseModel {
            kind: NoiseKind::Gaussian { mean, factor },
            dim: n,
        })
    }

    /// Noise that is identically zero (a gaussian with zero covariance).
    pub fn zero(n: usize) -> Self {
        NoiseModel {
            kind: NoiseKind::Gaussian {
                mean: DVector::zeros(n),
                factor: DMatrix::zeros(n, n),
            },
            dim: n,
        }
    }

    pub fn uniform_box(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        let dim = lo.len();
        let b = AxisBox::new(lo, hi)
            .ok_or_else(|| DynamicsError::InvalidNoise("uniform box needs finite lo <= hi".into()))?;
        Ok(NoiseModel {
            kind: NoiseKind::UniformBox { lo: b.lo, hi: b.hi },
            dim,
        })
    }

    /// Independent triangular marginals.
    pub fn triangular(lo: DVector<f64>, mode: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        let n = lo.len();
        if mode.len() != n || hi.len() != n {
            return Err(DynamicsError::Dimension("triangular lo/mode/hi lengths differ".into()));
        }
        let marginals = (0..n)
            .map(|i| {
                if !(lo[i].is_finite() && mode[i].is_finite() && hi[i].is_finite()) {
                    return Err(DynamicsError::NonFinite("triangular noise"));
                }
                Triangular::new(lo[i], hi[i], mode[i]).map_err(|e| {
                    DynamicsError::InvalidNoise(format!("triangular marginal {i}: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NoiseModel {
            kind: NoiseKind::Triangular(marginals),
            dim: n,
        })
    }

    pub fn mixture(components: Vec<(f64, NoiseModel)>) -> Result<Self> {
        let Some(dim) = components.first().map(|(_, m)| m.dim) else {
            return Err(DynamicsError::InvalidNoise("mixture without components".into()));
        };
        if components.iter().any(|(_, m)| m.dim != dim) {
            return Err(DynamicsError::Dimension("mixture components differ in dimension".into()));
        }
        if components.iter().any(|(w, _)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(DynamicsError::InvalidNoise("mixture weights must be nonnegative".into()));
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(DynamicsError::InvalidNoise(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(components.len());
        let mut models = Vec::with_capacity(components.len());
        for (w, m) in components {
            acc += w;
            cumulative.push(acc);
            models.push(m);
        }
        Ok(NoiseModel {
            kind: NoiseKind::Mixture {
                cumulative,
                components: models,
            },
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One i.i.d. draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match &self.kind {
            NoiseKind::Gaussian { mean, factor } => {
                let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                mean + factor * z
            }
            NoiseKind::UniformBox { lo, hi } => {
                DVector::from_fn(self.dim, |i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>())
            }
            NoiseKind::Triangular(marginals) => {
                DVector::from_fn(self.dim, |i, _| marginals[i].sample(rng))
            }
            NoiseKind::Mixture {
                cumulative,
                components,
            } => {
                let r: f64 = rng.random();
                let idx = cumulative
                    .iter()
                    .position(|&c| r < c)
                    .unwrap_or(components.len() - 1);
                components[idx].sample(rng)
            }
            NoiseKind::Lifted { base, weights } => {
                let mut acc = DVector::zeros(self.dim);
                for w in weights {
                    acc += w * base.sample(rng);
                }
                acc
            }
        }
    }
}

/// `x⁺ = A x + B u + q + η`, with the input set `U` an axis-aligned box.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DVector<f64>,
    input_set: AxisBox,
    noise: NoiseModel,
    b_pinv: DMatrix<f64>,
    b_rank: usize,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        q: DVector<f64>,
        input_set: AxisBox,
        noise: NoiseModel,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(DynamicsError::Dimension(format!("A must be square, got {:?}", a.shape())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(DynamicsError::Dimension(format!(
                "B must be {n}×p with p > 0, got {:?}",
                b.shape()
            )));
        }
        if q.len() != n {
            return Err(DynamicsError::Dimension(format!("q has length {}, expected {n}", q.len())));
        }
        if input_set.dim() != b.ncols() {
            return Err(DynamicsError::Dimension(format!(
                "input set has dimension {}, B has {} columns",
                input_set.dim(),
                b.ncols()
            )));
        }
        if noise.dim() != n {
            return Err(DynamicsError::Dimension(format!(
                "noise has dimension {}, expected {n}",
                noise.dim()
            )));
        }
        if !a.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("A"));
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("B"));
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite("q"));
        }
        let svd = b.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = (n.max(b.ncols()) as f64) * smax * f64::EPSILON;
        let b_rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let b_pinv = svd
            .pseudo_inverse(tol)
            .map_err(|e| DynamicsError::Dimension(e.to_string()))?;
        Ok(LinearSystem {
            a,
            b,
            q,
            input_set,
            noise,
            b_pinv,
            b_rank,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn input_set(&self) -> &AxisBox {
        &self.input_set
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Moore–Penrose pseudoinverse of `B`.
    pub fn b_pinv(&self) -> &DMatrix<f64> {
        &self.b_pinv
    }

    pub fn b_rank(&self) -> usize {
        self.b_rank
    }

    pub fn has_full_row_rank(&self) -> bool {
        self.b_rank == self.state_dim()
    }

    pub fn input_feasible(&self, u: &DVector<f64>) -> bool {
        self.input_set.contains_within(u, INPUT_TOLERANCE)
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(DynamicsError::Dimension(format!(
                "input has length {}, expected {}",
                u.len(),
                self.input_dim()
            )));
        }
        if !self.input_feasible(u) {
            let violation = (0..u.len())
                .map(|i| (self.input_set.lo[i] - u[i]).max(u[i] - self.input_set.hi[i]))
                .fold(f64::NAN, f64::max);
            return Err(DynamicsError::InputOutOfBounds {
                input: u.iter().copied().collect(),
                violation,
            });
        }
        Ok(())
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(DynamicsError::Dimension(format!(
                "state has length {}, expected {}",
                x.len(),
                self.state_dim()
            )));
        }
        Ok(())
    }

    /// `A x + B u + q + η` with a fresh noise draw.
    pub fn step<R: Rng + ?Sized>(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let mean = self.step_deterministic(x, u)?;
        Ok(mean + self.noise.sample(rng))
    }

    /// `A x + B u + q`.
    pub fn step_deterministic(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(x)?;
        self.check_input(u)?;
        Ok(&self.a * x + &self.b * u + &self.q)
    }

    /// Minimum-norm input `B⁺ (d − A x − q)` steering `x` exactly onto `d`
    /// (ignoring noise). Membership in `U` is the caller's business.
    pub fn input_for_target(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_state(x)?;
        self.check_state(d)?;
        let rhs = d - &self.a * x - &self.q;
        let u = &self.b_pinv * &rhs;
        let residual = (&self.b * &u - &rhs).amax();
        if !(residual <= STEERING_TOLERANCE) {
            return Err(DynamicsError::RankDeficient {
                rank: self.b_rank,
                n: self.state_dim(),
                residual,
            });
        }
        Ok(u)
    }

    /// Groups `steps` consecutive time steps into one:
    /// `Ā = Aˢ`, `B̄ = [Aˢ⁻¹B | … | AB | B]`, `q̄ = Σ Aⁱ q`, `Ū = Uˢ`, and
    /// noise `Σ Aˢ⁻¹⁻ⁱ ηᵢ`. The lifted input stacks `(u_0, …, u_{s−1})`.
    pub fn lift(&self, steps: usize) -> Result<LinearSystem> {
        if steps == 0 {
            return Err(DynamicsError::ZeroLift);
        }
        if steps == 1 {
            return Ok(self.clone());
        }
        let n = self.state_dim();
        let p = self.input_dim();
        // powers[i] = A^i
        let mut powers = Vec::with_capacity(steps + 1);
        powers.push(DMatrix::identity(n, n));
        for i in 1..=steps {
            let next = &powers[i - 1] * &self.a;
            powers.push(next);
        }
        let mut b_lift = DMatrix::zeros(n, p * steps);
        for i in 0..steps {
            let block = &powers[steps - 1 - i] * &self.b;
            b_lift.view_mut((0, i * p), (n, p)).copy_from(&block);
        }
        let mut q_lift = DVector::zeros(n);
        for power in powers.iter().take(steps) {
            q_lift += power * &self.q;
        }
        let weights = (0..steps).map(|i| powers[steps - 1 - i].clone()).collect();
        let noise = NoiseModel {
            kind: NoiseKind::Lifted {
                base: Box::new(self.noise.clone()),
                weights,
            },
            dim: n,
        };
        LinearSystem::new(
            powers[steps].clone(),
            b_lift,
            q_lift,
            self.input_set.power(steps),
            noise,
        )
    }
}

/// Classification of a continuous state for reach-avoid purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    Goal,
    /// Obstacle or outside the modeled domain.
    Unsafe,
    Free,
}

pub trait ZoneMap {
    fn zone(&self, x: &DVector<f64>) -> Zone;
}

impl<F> ZoneMap for F
where
    F: Fn(&DVector<f64>) -> Zone,
{
    fn zone(&self, x: &DVector<f64>) -> Zone {
        self(x)
    }
}

/// Time-varying state feedback `c(x, k)`. `None` means no admissible input.
pub trait FeedbackLaw {
    fn control(&self, x: &DVector<f64>, k: usize) -> Option<DVector<f64>>;
}

impl<F> FeedbackLaw for F
where
    F: Fn(&DVector<f64>, usize) -> Option<DVector<f64>>,
{
    fn control(&self, x: &DVector<f64>, k: usize) -> Option<DVector<f64>> {
        self(x, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    ReachedGoal(usize),
    HitCritical(usize),
    /// Horizon exhausted, or the controller had no admissible input at this
    /// step.
    Timeout(usize),
}

impl Outcome {
    pub fn is_success(&self) -> bool {
        matches!(self, Outcome::ReachedGoal(_))
    }

    pub fn step(&self) -> usize {
        match *self {
            Outcome::ReachedGoal(k) | Outcome::HitCritical(k) | Outcome::Timeout(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub states: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
    pub outcome: Outcome,
}

/// Closed-loop rollout for at most `horizon` steps. Stops on the first goal
/// or unsafe state. A missing or infeasible input ends the run as a timeout.
pub fn simulate<L, Z, R>(
    sys: &LinearSystem,
    law: &L,
    x0: &DVector<f64>,
    horizon: usize,
    zones: &Z,
    rng: &mut R,
) -> Trace
where
    L: FeedbackLaw + ?Sized,
    Z: ZoneMap + ?Sized,
    R: Rng + ?Sized,
{
    let mut states = vec![x0.clone()];
    let mut inputs = Vec::new();
    let outcome = |zone: Zone, k: usize| match zone {
        Zone::Goal => Some(Outcome::ReachedGoal(k)),
        Zone::Unsafe => Some(Outcome::HitCritical(k)),
        Zone::Free => None,
    };
    if let Some(o) = outcome(zones.zone(x0), 0) {
        return Trace {
            states,
            inputs,
            outcome: o,
        };
    }
    for k in 0..horizon {
        let x = &states[k];
        let Some(u) = law.control(x, k) else {
            return Trace {
                states,
                inputs,
                outcome: Outcome::Timeout(k),
            };
        };
        let Ok(next) = sys.step(x, &u, rng) else {
            return Trace {
                states,
                inputs,
                outcome: Outcome::Timeout(k),
            };
        };
        let zone = zones.zone(&next);
        inputs.push(u);
        states.push(next);
        if let Some(o) = outcome(zone, k + 1) {
            return Trace {
                states,
                inputs,
                outcome: o,
            };
        }
    }
    Trace {
        states,
        inputs,
        outcome: Outcome::Timeout(horizon),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use nalgebra::{dmatrix, dvector};

    fn system(a: DMatrix<f64>, b: DMatrix<f64>, noise: NoiseModel) -> LinearSystem {
        let n = a.nrows();
        let p = b.ncols();
        let u = AxisBox::new(DVector::from_element(p, -10.0), DVector::from_element(p, 10.0))
            .unwrap();
        LinearSystem::new(a, b, DVector::zeros(n), u, noise).unwrap()
    }

    fn double_integrator() -> LinearSystem {
        system(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![0.5; 1.0], NoiseModel::zero(2))
    }

    #[test]
    fn identity_step() {
        let sys = system(DMatrix::identity(2, 2), DMatrix::identity(2, 2), NoiseModel::zero(2));
        let mut rng = rng_from_seed(0);
        let x = dvector![1.0, 2.0];
        let u = dvector![0.0, 0.0];
        assert_eq!(sys.step(&x, &u, &mut rng).unwrap(), x);
        assert_eq!(sys.step_deterministic(&x, &u).unwrap(), x);
    }

    #[test]
    fn double_integrator_step() {
        let sys = double_integrator();
        let mut rng = rng_from_seed(0);
        let x = dvector![0.0, 1.0];
        let u = dvector![0.0];
        assert_eq!(sys.step(&x, &u, &mut rng).unwrap(), dvector![1.0, 1.0]);
        assert_eq!(sys.step_deterministic(&x, &u).unwrap(), dvector![1.0, 1.0]);
    }

    #[test]
    fn seeded_uniform_step_is_mean_plus_recorded_draw() {
        let noise = NoiseModel::uniform_box(dvector![-0.1, -0.1], dvector![0.1, 0.1]).unwrap();
        let sys = system(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![0.5; 1.0], noise.clone());
        let x = dvector![0.0, 1.0];
        let u = dvector![0.0];
        let draw = noise.sample(&mut rng_from_seed(42));
        assert!(draw.iter().all(|v| v.abs() <= 0.1));
        let got = sys.step(&x, &u, &mut rng_from_seed(42)).unwrap();
        assert_eq!(got, dvector![1.0, 1.0] + &draw);
        // recorded once from ChaCha8 seeded with 42
        assert_eq!(draw.as_slice(), &[0.036379238461334285, 0.09005508153449679]);
    }

    #[test]
    fn out_of_bounds_input_rejected() {
        let sys = double_integrator();
        let err = sys.step_deterministic(&dvector![0.0, 0.0], &dvector![10.5]).unwrap_err();
        assert!(matches!(err, DynamicsError::InputOutOfBounds { .. }));
        // inside tolerance
        assert!(sys
            .step_deterministic(&dvector![0.0, 0.0], &dvector![10.0 + 1e-10])
            .is_ok());
    }

    #[test]
    fn steering_examples() {
        let sys = system(DMatrix::identity(2, 2), DMatrix::identity(2, 2), NoiseModel::zero(2));
        assert_eq!(
            sys.input_for_target(&dvector![0.0, 0.0], &dvector![0.0, 0.0]).unwrap(),
            dvector![0.0, 0.0]
        );
        let u_set = AxisBox::from_slices(&[-10.0, -10.0], &[10.0, 10.0]).unwrap();
        let shifted = LinearSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            dvector![1.0, 0.0],
            u_set,
            NoiseModel::zero(2),
        )
        .unwrap();
        let u = shifted.input_for_target(&dvector![2.0, 3.0], &dvector![4.0, 4.0]).unwrap();
        assert!((u - dvector![1.0, 1.0]).amax() < 1e-12);
    }

    #[test]
    fn rank_deficient_steering_errors() {
        let sys = double_integrator();
        assert!(!sys.has_full_row_rank());
        let err = sys.input_for_target(&dvector![0.0, 0.0], &dvector![3.0, -2.0]).unwrap_err();
        assert!(matches!(err, DynamicsError::RankDeficient { rank: 1, n: 2, .. }));
    }

    #[test]
    fn lift_one_is_identity() {
        let sys = double_integrator();
        let l = sys.lift(1).unwrap();
        assert_eq!(l.a(), sys.a());
        assert_eq!(l.b(), sys.b());
        assert_eq!(l.q(), sys.q());
        assert_eq!(l.input_set(), sys.input_set());
        assert_eq!(sys.lift(0).unwrap_err(), DynamicsError::ZeroLift);
    }

    #[test]
    fn lift_double_integrator_two_steps() {
        let l = double_integrator().lift(2).unwrap();
        assert_eq!(l.a(), &dmatrix![1.0, 2.0; 0.0, 1.0]);
        assert_eq!(l.b(), &dmatrix![1.5, 0.5; 1.0, 1.0]);
        assert_eq!(l.input_set().dim(), 2);
        assert!(l.has_full_row_rank());
        assert!((l.b().determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lift_composes_affine_offset() {
        let u_set = AxisBox::from_slices(&[-1.0], &[1.0]).unwrap();
        let sys = LinearSystem::new(
            dmatrix![2.0],
            dmatrix![1.0],
            dvector![1.0],
            u_set,
            NoiseModel::zero(1),
        )
        .unwrap();
        let l = sys.lift(3).unwrap();
        // q + A q + A² q = 1 + 2 + 4
        assert_eq!(l.q()[0], 7.0);
        let x = dvector![0.5];
        let us = [0.1, -0.3, 0.7];
        let mut y = x.clone();
        for u in us {
            y = sys.step_deterministic(&y, &dvector![u]).unwrap();
        }
        let lifted = l.step_deterministic(&x, &dvector![0.1, -0.3, 0.7]).unwrap();
        assert!((lifted - y).amax() < 1e-12);
    }

    #[test]
    fn simulate_terminal_cases() {
        let sys = system(dmatrix![1.0], dmatrix![1.0], NoiseModel::zero(1));
        let zones = |x: &DVector<f64>| {
            if x[0] >= 3.0 {
                Zone::Goal
            } else if x[0] < -1.0 {
                Zone::Unsafe
            } else {
                Zone::Free
            }
        };
        let law = |_: &DVector<f64>, _: usize| Some(dvector![1.0]);
        let mut rng = rng_from_seed(1);
        let t = simulate(&sys, &law, &dvector![3.5], 10, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::ReachedGoal(0));
        assert!(t.inputs.is_empty());
        let t = simulate(&sys, &law, &dvector![-2.0], 10, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::HitCritical(0));
        // 0 → 1 → 2 → 3
        let t = simulate(&sys, &law, &dvector![0.0], 10, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::ReachedGoal(3));
        assert_eq!(t.states.len(), t.inputs.len() + 1);
        assert_eq!(t.states[3], dvector![3.0]);
        // horizon too short
        let t = simulate(&sys, &law, &dvector![0.0], 2, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::Timeout(2));
        // no action
        let none = |_: &DVector<f64>, _: usize| None;
        let t = simulate(&sys, &none, &dvector![0.0], 5, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::Timeout(0));
        // infeasible input counts as timeout
        let big = |_: &DVector<f64>, _: usize| Some(dvector![50.0]);
        let t = simulate(&sys, &big, &dvector![0.0], 5, &zones, &mut rng);
        assert_eq!(t.outcome, Outcome::Timeout(0));
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(NoiseModel::gaussian(dvector![0.0, 0.0], dmatrix![1.0, 0.5; 0.0, 1.0]).is_err());
        assert!(NoiseModel::gaussian(dvector![0.0, 0.0], dmatrix![1.0, 2.0; 2.0, 1.0]).is_err());
        assert!(NoiseModel::triangular(dvector![0.0], dvector![2.0], dvector![1.0]).is_err());
        let a = NoiseModel::zero(1);
        assert!(NoiseModel::mixture(vec![(0.5, a.clone()), (0.4, a.clone())]).is_err());
        assert!(NoiseModel::mixture(vec![(0.5, a.clone()), (0.5, NoiseModel::zero(2))]).is_err());
        assert!(NoiseModel::mixture(vec![(0.5, a.clone()), (0.5, a)]).is_ok());
    }

    #[test]
    fn samplers_are_seed_deterministic() {
        let models = vec![
            NoiseModel::gaussian(dvector![0.0, 1.0], dmatrix![1.0, 0.3; 0.3, 0.5]).unwrap(),
            NoiseModel::uniform_box(dvector![-1.0, 0.0], dvector![1.0, 2.0]).unwrap(),
            NoiseModel::triangular(dvector![0.0, -1.0], dvector![0.5, 0.0], dvector![1.0, 1.0])
                .unwrap(),
            double_integrator().lift(3).unwrap().noise().clone(),
        ];
        for m in models {
            let a: Vec<_> = {
                let mut r = rng_from_seed(9);
                (0..20).map(|_| m.sample(&mut r)).collect()
            };
            let b: Vec<_> = {
                let mut r = rng_from_seed(9);
                (0..20).map(|_| m.sample(&mut r)).collect()
            };
            assert_eq!(a, b);
        }
    }
}
