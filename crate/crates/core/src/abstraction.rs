//! Finite interval-MDP abstraction of a linear stochastic system.
//!
//! An abstract action is a target point `d`. From any state `x` the input
//! `u = B⁺(d − A x − q)` lands the noiseless successor exactly on `d`, so the
//! true successor is `d + η` no matter where the action was taken. One set of
//! noise samples therefore estimates the successor distribution of every
//! action, and the estimate is shared by all regions where it is enabled.
//!
//! An action is enabled in a region when the steering input is admissible at
//! every vertex of the cell. The input is affine in `x` and `U` is convex, so
//! this certifies the whole cell lies in the backward reachable set of `d`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, LinearSystem, NoiseModel, INPUT_TOLERANCE};
use crate::geometry::AxisBox;
use crate::interval::{
    clopper_pearson, ClopperPearson, IntervalError, IntervalEstimator, PointEstimate,
    ProbabilityInterval,
};
use crate::partition::{box_vertices, Partition, RegionId, RegionLabel};
use crate::robust_mdp::{IntervalMDP, ModelError, StateKind, Transition};
use crate::seed::rng_from_seed;

/// Fraction of its width by which the sample support box grows on each side
/// before zero-count cells outside it are dropped.
pub const SUPPORT_INFLATION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("B has rank {rank} but the state dimension is {n}; lift the system over more steps")]
    NotFullRowRank { rank: usize, n: usize },
    #[error("system has state dimension {system}, partition has {partition}")]
    DimensionMismatch { system: usize, partition: usize },
    #[error("invalid abstraction config: {0}")]
    Config(String),
    #[error("no region has an enabled action; refine the partition or enlarge the input set")]
    Vacuous,
    #[error("action {0} does not exist")]
    UnknownAction(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = AbstractionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractAction {
    pub id: usize,
    pub target: DVector<f64>,
    /// Regions where the action may be chosen, ascending.
    pub enabled_in: Vec<RegionId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractionConfig {
    /// Number of noise samples `N`.
    pub samples: usize,
    /// Overall confidence budget: every interval holds simultaneously with
    /// probability at least `1 − beta`.
    pub beta: f64,
    pub seed: u64,
    pub lift_steps: usize,
}

impl AbstractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(AbstractionError::Config("samples must be at least 1".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(AbstractionError::Config(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.lift_steps == 0 {
            return Err(AbstractionError::Config("lift_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One action per region, aimed at the region's center. `enabled_in` is left
/// empty.
pub fn default_actions(part: &Partition) -> Vec<AbstractAction> {
    part.regions()
        .map(|r| AbstractAction {
            id: r.0,
            target: part.region_center(r).expect("region from partition"),
            enabled_in: Vec::new(),
        })
        .collect()
}

/// Literal vertex certificate: `input_for_target(v, target) ∈ U` at all
/// `2ⁿ` corners of `cell`.
pub fn enabled_by_vertices(sys: &LinearSystem, cell: &AxisBox, target: &DVector<f64>) -> Result<bool> {
    for v in box_vertices(cell) {
        let u = sys.input_for_target(&v, target)?;
        if !sys.input_feasible(&u) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Fills `enabled_in` for every action with the vertex certificate. Goal and
/// critical regions never enable actions.
///
/// The input splits as `u(v) = B⁺(d − q) − B⁺A v`; the per-coordinate extremes
/// of `B⁺A v` over each cell's vertices are computed once, which turns the
/// per-(action, region) vertex test into `p` interval comparisons.
pub fn enabled_actions(
    sys: &LinearSystem,
    part: &Partition,
    mut actions: Vec<AbstractAction>,
) -> Result<Vec<AbstractAction>> {
    let n = sys.state_dim();
    if part.dim() != n {
        return Err(AbstractionError::DimensionMismatch {
            system: n,
            partition: part.dim(),
        });
    }
    if !sys.has_full_row_rank() {
        return Err(AbstractionError::NotFullRowRank {
            rank: sys.b_rank(),
            n,
        });
    }
    if let Some(a) = actions.iter().find(|a| a.target.len() != n) {
        return Err(AbstractionError::DimensionMismatch {
            system: n,
            partition: a.target.len(),
        });
    }
    let p = sys.input_dim();
    let gain: DMatrix<f64> = sys.b_pinv() * sys.a();
    let free = part.free_regions();
    // per free region: (min_v (B⁺A v)_i, max_v (B⁺A v)_i)
    let ranges: Vec<(DVector<f64>, DVector<f64>)> = free
        .par_iter()
        .map(|&r| {
            let verts = part.region_vertices(r).expect("region from partition");
            let mut lo = DVector::from_element(p, f64::INFINITY);
            let mut hi = DVector::from_element(p, f64::NEG_INFINITY);
            for v in &verts {
                let g = &gain * v;
                for i in 0..p {
                    lo[i] = lo[i].min(g[i]);
                    hi[i] = hi[i].max(g[i]);
                }
            }
            (lo, hi)
        })
        .collect();
    let u = sys.input_set();
    actions.par_iter_mut().for_each(|action| {
        let offset = sys.b_pinv() * (&action.target - sys.q());
        action.enabled_in = free
            .iter()
            .zip(&ranges)
            .filter(|(_, (lo, hi))| {
                (0..p).all(|i| {
                    offset[i] - hi[i] >= u.lo[i] - INPUT_TOLERANCE
                        && offset[i] - lo[i] <= u.hi[i] + INPUT_TOLERANCE
                })
            })
            .map(|(&r, _)| r)
            .collect();
    });
    Ok(actions)
}

/// `count` i.i.d. draws from `noise`, reproducible from `seed`.
pub fn sample_noise_set(noise: &NoiseModel, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| noise.sample(&mut rng)).collect()
}

/// Where the samples of one action landed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountRow {
    pub regions: BTreeMap<RegionId, u64>,
    /// Samples that left the domain.
    pub outside: u64,
}

impl CountRow {
    pub fn total(&self) -> u64 {
        self.regions.values().sum::<u64>() + self.outside
    }

    pub fn count(&self, r: RegionId) -> u64 {
        self.regions.get(&r).copied().unwrap_or(0)
    }
}

/// Buckets `target + η` for every sample.
pub fn count_successors(part: &Partition, target: &DVector<f64>, samples: &[DVector<f64>]) -> CountRow {
    let mut row = CountRow::default();
    let mut y = target.clone();
    for eta in samples {
        y.copy_from(target);
        y += eta;
        match part.region_of(&y) {
            Some(r) => *row.regions.entry(r).or_insert(0) += 1,
            None => row.outside += 1,
        }
    }
    row
}

/// Clopper–Pearson interval for `k` hits out of `n` at per-interval
/// significance `beta_per`.
pub fn interval_from_counts(k: u64, n: u64, beta_per: f64) -> Result<ProbabilityInterval> {
    Ok(clopper_pearson(k, n, beta_per)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    /// Indexed by action id.
    pub rows: Vec<CountRow>,
    pub samples: u64,
}

/// Abstraction data before intervals are attached: actions with their
/// enabled sets, successor counts and the sample support.
#[derive(Debug, Clone)]
pub struct Abstraction {
    partition: Partition,
    actions: Vec<AbstractAction>,
    counts: TransitionCounts,
    noise_support: AxisBox,
    beta: f64,
}

/// Index of the goal sink in models built here; `Unsafe` and `Out` follow.
pub fn goal_state(part: &Partition) -> usize {
    part.num_regions()
}

pub fn unsafe_state(part: &Partition) -> usize {
    part.num_regions() + 1
}

pub fn out_state(part: &Partition) -> usize {
    part.num_regions() + 2
}

impl Abstraction {
    /// Samples the noise once and counts successors for every action that is
    /// enabled somewhere. `actions` must already carry their enabled sets.
    pub fn build(
        sys: &LinearSystem,
        part: &Partition,
        actions: Vec<AbstractAction>,
        config: &AbstractionConfig,
    ) -> Result<Self> {
        config.validate()?;
        if part.dim() != sys.state_dim() {
            return Err(AbstractionError::DimensionMismatch {
                system: sys.state_dim(),
                partition: part.dim(),
            });
        }
        if let Some((i, _)) = actions.iter().enumerate().find(|(i, a)| a.id != *i) {
            return Err(AbstractionError::UnknownAction(i));
        }
        if actions.iter().all(|a| a.enabled_in.is_empty()) {
            return Err(AbstractionError::Vacuous);
        }
        let samples = sample_noise_set(sys.noise(), config.samples, config.seed);
        let noise_support = AxisBox::bounding(&samples).expect("at least one sample");
        let rows = actions
            .par_iter()
            .map(|a| {
                if a.enabled_in.is_empty() {
                    CountRow::default()
                } else {
                    count_successors(part, &a.target, &samples)
                }
            })
            .collect();
        Ok(Abstraction {
            partition: part.clone(),
            actions,
            counts: TransitionCounts {
                rows,
                samples: config.samples as u64,
            },
            noise_support,
            beta: config.beta,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn actions(&self) -> &[AbstractAction] {
        &self.actions
    }

    pub fn counts(&self) -> &TransitionCounts {
        &self.counts
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Actions enabled in at least one region.
    pub fn active_actions(&self) -> impl Iterator<Item = &AbstractAction> {
        self.actions.iter().filter(|a| !a.enabled_in.is_empty())
    }

    /// Number of estimated intervals `I = |active actions| × (R_free + 3)`
    /// sharing the confidence budget.
    pub fn interval_count(&self) -> usize {
        self.active_actions().count() * (self.partition.free_regions().len() + 3)
    }

    /// `β / I`.
    pub fn significance_per_interval(&self) -> f64 {
        self.beta / self.interval_count() as f64
    }

    /// Inflated box outside of which zero-count successors of `action` are
    /// dropped.
    pub fn support_box(&self, action: &AbstractAction) -> AxisBox {
        AxisBox {
            lo: &action.target + &self.noise_support.lo,
            hi: &action.target + &self.noise_support.hi,
        }
        .inflated(SUPPORT_INFLATION)
    }

    /// PAC interval MDP with confidence `1 − β`.
    pub fn imdp(&self) -> Result<IntervalMDP> {
        let est = ClopperPearson {
            significance: self.significance_per_interval(),
        };
        self.model_with(&est, true, 1.0 - self.beta)
    }

    /// Same states and actions with frequentist point probabilities `k/N`.
    pub fn point_mdp(&self) -> Result<IntervalMDP> {
        self.model_with(&PointEstimate, false, 0.0)
    }

    /// Builds a model with any interval estimator. With `zero_buckets`, every
    /// successor the samples could plausibly reach but never hit gets
    /// `estimator(0, N)`, and the mass of dropped buckets is bounded by one
    /// more `estimator(0, N)` routed to `Unsafe`.
    pub fn model_with(
        &self,
        estimator: &dyn IntervalEstimator,
        zero_buckets: bool,
        confidence: f64,
    ) -> Result<IntervalMDP> {
        let part = &self.partition;
        let n = self.counts.samples;
        let (goal, unsafe_, out) = (goal_state(part), unsafe_state(part), out_state(part));
        let mut kinds: Vec<StateKind> = part.regions().map(StateKind::Region).collect();
        kinds.extend([StateKind::Goal, StateKind::Unsafe, StateKind::Out]);

        // aggregated successor counts per active action
        let aggregated: Vec<(usize, BTreeMap<usize, u64>)> = self
            .active_actions()
            .map(|a| {
                let row = &self.counts.rows[a.id];
                let mut agg: BTreeMap<usize, u64> = BTreeMap::new();
                for (&r, &k) in &row.regions {
                    let s = match part.label(r) {
                        RegionLabel::Free => r.0,
                        RegionLabel::Goal => goal,
                        RegionLabel::Critical => unsafe_,
                    };
                    *agg.entry(s).or_insert(0) += k;
                }
                if row.outside > 0 {
                    agg.insert(out, row.outside);
                }
                (a.id, agg)
            })
            .collect();

        let mut needed: BTreeSet<u64> = aggregated.iter().flat_map(|(_, m)| m.values().copied()).collect();
        needed.insert(0);
        let table: HashMap<u64, ProbabilityInterval> = needed
            .into_par_iter()
            .map(|k| estimator.interval(k, n).map(|i| (k, i)))
            .collect::<std::result::Result<_, _>>()?;
        let zero = table[&0];

        let free_count = part.free_regions().len();
        let has_goal = !part.goal_regions().is_empty();
        let has_critical = !part.critical_regions().is_empty();

        let distributions: Vec<(usize, Vec<Transition>)> = aggregated
            .into_par_iter()
            .map(|(id, agg)| {
                let mut intervals: BTreeMap<usize, ProbabilityInterval> =
                    agg.iter().map(|(&s, k)| (s, table[k])).collect();
                if zero_buckets {
                    let support = self.support_box(&self.actions[id]);
                    let mut free_seen = 0usize;
                    let (mut goal_near, mut critical_near) = (false, false);
                    for r in part.regions_meeting(&support) {
                        match part.label(r) {
                            RegionLabel::Free => {
                                free_seen += 1;
                                intervals.entry(r.0).or_insert(zero);
                            }
                            RegionLabel::Goal => goal_near = true,
                            RegionLabel::Critical => critical_near = true,
                        }
                    }
                    let out_near = !support.is_subset_of(part.domain());
                    let mut pruned = free_seen < free_count;
                    for (near, state, exists) in [
                        (goal_near, goal, has_goal),
                        (critical_near, unsafe_, has_critical),
                        (out_near, out, true),
                    ] {
                        if intervals.contains_key(&state) {
                            continue;
                        }
                        if near && exists {
                            intervals.insert(state, zero);
                        } else {
                            pruned = true;
                        }
                    }
                    if pruned {
                        let residual = match intervals.get(&unsafe_) {
                            Some(i) => i.widen_high(zero.high()),
                            None => zero,
                        };
                        intervals.insert(unsafe_, residual);
                    }
                }
                let dist = intervals
                    .into_iter()
                    .map(|(successor, interval)| Transition {
                        successor,
                        interval,
                    })
                    .collect();
                (id, dist)
            })
            .collect();

        let mut imdp = IntervalMDP::new(kinds, confidence)?;
        for (id, dist) in distributions {
            let d = imdp.add_distribution(dist)?;
            for r in &self.actions[id].enabled_in {
                imdp.enable(r.0, id, d)?;
            }
        }
        Ok(imdp)
    }
}

/// Enabled sets, sampling and counting, then the PAC interval MDP.
pub fn build_imdp(
    sys: &LinearSystem,
    part: &Partition,
    actions: Vec<AbstractAction>,
    config: &AbstractionConfig,
) -> Result<IntervalMDP> {
    Abstraction::build(sys, part, actions, config)?.imdp()
}

/// [`build_imdp`] with point probabilities `k/N`.
pub fn build_point_mdp(
    sys: &LinearSystem,
    part: &Partition,
    actions: Vec<AbstractAction>,
    config: &AbstractionConfig,
) -> Result<IntervalMDP> {
    Abstraction::build(sys, part, actions, config)?.point_mdp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::Rng;

    fn bx(lo: &[f64], hi: &[f64]) -> AxisBox {
        AxisBox::from_slices(lo, hi).unwrap()
    }

    fn integrator(n: usize, u_bound: f64, noise: NoiseModel) -> LinearSystem {
        LinearSystem::new(
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DVector::zeros(n),
            AxisBox::new(DVector::from_element(n, -u_bound), DVector::from_element(n, u_bound)).unwrap(),
            noise,
        )
        .unwrap()
    }

    fn config(samples: usize) -> AbstractionConfig {
        AbstractionConfig {
            samples,
            beta: 0.01,
            seed: 3,
            lift_steps: 1,
        }
    }

    #[test]
    fn default_actions_target_centers() {
        let p = Partition::new(bx(&[0.0, 0.0], &[2.0, 2.0]), vec![2, 2]).unwrap();
        let acts = default_actions(&p);
        let targets: Vec<_> = acts.iter().map(|a| a.target.clone()).collect();
        assert_eq!(
            targets,
            vec![dvector![0.5, 0.5], dvector![0.5, 1.5], dvector![1.5, 0.5], dvector![1.5, 1.5]]
        );
        for a in &acts {
            assert_eq!(p.region_of(&a.target), Some(RegionId(a.id)));
            assert!(a.enabled_in.is_empty());
        }
        let single = Partition::new(bx(&[0.0, 0.0], &[2.0, 4.0]), vec![1, 1]).unwrap();
        assert_eq!(default_actions(&single)[0].target, dvector![1.0, 2.0]);
    }

    #[test]
    fn wide_input_set_enables_everything() {
        let sys = integrator(2, 10.0, NoiseModel::zero(2));
        let p = Partition::new(bx(&[0.0, 0.0], &[2.0, 2.0]), vec![2, 2])
            .unwrap()
            .with_default_labels(&[bx(&[1.0, 1.0], &[2.0, 2.0])], &[bx(&[0.0, 1.2], &[0.8, 2.0])])
            .unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        for a in &acts {
            assert_eq!(a.enabled_in, p.free_regions());
        }
        assert_eq!(p.free_regions().len(), 2);
    }

    #[test]
    fn narrow_input_set_fails_vertex_check() {
        let sys = integrator(2, 0.4, NoiseModel::zero(2));
        let p = Partition::new(bx(&[0.0, 0.0], &[2.0, 2.0]), vec![2, 2]).unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        // vertex (0,0) needs u = (0.5, 0.5)
        assert!(!acts[0].enabled_in.contains(&RegionId(0)));
        assert!(!enabled_by_vertices(&sys, &p.region_box(RegionId(0)).unwrap(), &acts[0].target).unwrap());
    }

    #[test]
    fn rank_deficient_system_is_rejected() {
        let u = bx(&[-1.0], &[1.0]);
        let sys = LinearSystem::new(
            dmatrix![1.0, 1.0; 0.0, 1.0],
            dmatrix![0.5; 1.0],
            DVector::zeros(2),
            u,
            NoiseModel::zero(2),
        )
        .unwrap();
        let p = Partition::new(bx(&[0.0, 0.0], &[1.0, 1.0]), vec![1, 1]).unwrap();
        assert!(matches!(
            enabled_actions(&sys, &p, default_actions(&p)),
            Err(AbstractionError::NotFullRowRank { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn fast_path_agrees_with_literal_vertex_test() {
        let sys = LinearSystem::new(
            dmatrix![1.0, 2.0; 0.0, 1.0],
            dmatrix![1.5, 0.5; 1.0, 1.0],
            dvector![0.1, -0.2],
            bx(&[-1.0, -1.0], &[1.0, 1.0]),
            NoiseModel::zero(2),
        )
        .unwrap();
        let p = Partition::new(bx(&[-2.0, -1.0], &[2.0, 1.0]), vec![4, 2]).unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        for a in &acts {
            for r in p.regions() {
                let literal = enabled_by_vertices(&sys, &p.region_box(r).unwrap(), &a.target).unwrap();
                assert_eq!(a.enabled_in.contains(&r), literal, "action {} region {}", a.id, r.0);
            }
        }
    }

    #[test]
    fn lifted_enabled_sets_agree_with_rejection_sampling() {
        // U = [-1, 1]² enables nothing on this grid; [-3, 3]² enables some pairs
        for (bound, expect_some) in [(1.0, false), (3.0, true)] {
            let base = LinearSystem::new(
                dmatrix![1.0, 1.0; 0.0, 1.0],
                dmatrix![0.5; 1.0],
                DVector::zeros(2),
                bx(&[-bound], &[bound]),
                NoiseModel::zero(2),
            )
            .unwrap();
            let sys = base.lift(2).unwrap();
            let p = Partition::new(bx(&[-2.0, -1.0], &[2.0, 1.0]), vec![4, 2]).unwrap();
            let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
            let mut rng = rng_from_seed(8);
            let mut enabled = 0;
            for a in &acts {
                for r in p.regions() {
                    let cell = p.region_box(r).unwrap();
                    let all_feasible = (0..10_000).all(|_| {
                        let x = DVector::from_fn(2, |i, _| rng.random_range(cell.lo[i]..=cell.hi[i]));
                        sys.input_feasible(&sys.input_for_target(&x, &a.target).unwrap())
                    });
                    let verdict = a.enabled_in.contains(&r);
                    if verdict {
                        enabled += 1;
                        assert!(all_feasible, "action {} wrongly enabled in {}", a.id, r.0);
                    }
                    if !all_feasible {
                        assert!(!verdict);
                    }
                }
            }
            assert_eq!(enabled > 0, expect_some, "U bound {bound}: {enabled} enabled pairs");
        }
    }

    #[test]
    fn uniform_marginals_pass_kolmogorov_smirnov() {
        let noise = NoiseModel::uniform_box(dvector![-1.0, 2.0], dvector![1.0, 5.0]).unwrap();
        let n = 10_000;
        let samples = sample_noise_set(&noise, n, 21);
        // 1% critical value of the one-sample KS statistic, asymptotic form
        let critical = 1.628 / (n as f64).sqrt();
        for (i, (lo, hi)) in [(-1.0, 1.0), (2.0, 5.0)].into_iter().enumerate() {
            let mut u: Vec<f64> = samples.iter().map(|s| (s[i] - lo) / (hi - lo)).collect();
            u.sort_by(f64::total_cmp);
            let d = u
                .iter()
                .enumerate()
                .map(|(k, &x)| ((k + 1) as f64 / n as f64 - x).max(x - k as f64 / n as f64))
                .fold(0.0, f64::max);
            assert!(d < critical, "axis {i}: D = {d}");
        }
    }

    #[test]
    fn sample_sets_are_reproducible() {
        let noise = NoiseModel::uniform_box(dvector![-1.0], dvector![1.0]).unwrap();
        assert_eq!(sample_noise_set(&noise, 1, 5).len(), 1);
        assert_eq!(sample_noise_set(&noise, 50, 5), sample_noise_set(&noise, 50, 5));
        assert_ne!(sample_noise_set(&noise, 50, 5), sample_noise_set(&noise, 50, 6));
    }

    #[test]
    fn counting_edge_cases() {
        let p = Partition::new(bx(&[0.0, 0.0], &[2.0, 2.0]), vec![2, 2]).unwrap();
        let zeros = sample_noise_set(&NoiseModel::zero(2), 25, 1);
        let row = count_successors(&p, &dvector![0.5, 1.5], &zeros);
        assert_eq!(row.count(RegionId(1)), 25);
        assert_eq!(row.total(), 25);
        let tiny = NoiseModel::uniform_box(dvector![-1e-3, -1e-3], dvector![1e-3, 1e-3]).unwrap();
        let row = count_successors(&p, &dvector![5.0, 5.0], &sample_noise_set(&tiny, 25, 1));
        assert_eq!(row.outside, 25);
        assert!(row.regions.is_empty());
    }

    #[test]
    fn boundary_straddling_noise_splits_counts() {
        let p = Partition::new(bx(&[0.0], &[2.0]), vec![2]).unwrap();
        let noise = NoiseModel::uniform_box(dvector![-0.5], dvector![0.5]).unwrap();
        let samples = sample_noise_set(&noise, 1000, 11);
        let row = count_successors(&p, &dvector![1.0], &samples);
        // independent recount: a point belongs to the upper cell iff it is >= 1
        let upper = samples.iter().filter(|e| 1.0 + e[0] >= 1.0).count() as u64;
        assert_eq!(row.count(RegionId(1)), upper);
        assert_eq!(row.count(RegionId(0)), 1000 - upper);
        assert!((upper as i64 - 500).abs() < 60);
    }

    #[test]
    fn noiseless_model_has_single_successor() {
        let sys = integrator(2, 10.0, NoiseModel::zero(2));
        let p = Partition::new(bx(&[0.0, 0.0], &[2.0, 2.0]), vec![2, 2]).unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        let abs = Abstraction::build(&sys, &p, acts, &config(400)).unwrap();
        let imdp = abs.imdp().unwrap();
        let point = abs.point_mdp().unwrap();
        let beta_per = abs.significance_per_interval();
        assert_eq!(abs.interval_count(), 4 * (4 + 3));
        for s in 0..4 {
            for c in imdp.choices(s) {
                let dist = imdp.distribution(c.distribution);
                let hit = dist.iter().find(|t| t.successor == c.action).unwrap();
                let expected = clopper_pearson(400, 400, beta_per).unwrap();
                assert_eq!(hit.interval, expected);
                assert_eq!(hit.interval.high(), 1.0);
                assert!(hit.interval.low() > 0.97);
                let pd = point.transitions(s, c.action).unwrap();
                assert_eq!(pd.len(), 1);
                assert_eq!(pd[0].interval, ProbabilityInterval::point(1.0).unwrap());
            }
        }
    }

    #[test]
    fn goal_mass_is_redirected() {
        let sys = integrator(1, 10.0, NoiseModel::zero(1));
        let p = Partition::new(bx(&[0.0], &[3.0]), vec![3])
            .unwrap()
            .with_default_labels(&[bx(&[1.0], &[2.0])], &[])
            .unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        assert!(acts[1].enabled_in.contains(&RegionId(0)));
        let point = build_point_mdp(&sys, &p, acts, &config(10)).unwrap();
        let t = point.transitions(0, 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].successor, goal_state(&p));
        assert!(point.choices(1).is_empty());
        assert_eq!(point.kind(goal_state(&p)), StateKind::Goal);
        assert_eq!(point.kind(out_state(&p)), StateKind::Out);
    }

    #[test]
    fn vacuous_abstraction_is_an_error() {
        let sys = integrator(1, 1e-3, NoiseModel::zero(1));
        let p = Partition::new(bx(&[0.0], &[3.0]), vec![3]).unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        assert!(matches!(
            build_imdp(&sys, &p, acts, &config(10)),
            Err(AbstractionError::Vacuous)
        ));
    }

    #[test]
    fn intervals_admit_distributions_and_nest_point_estimates() {
        let noise = NoiseModel::gaussian(dvector![0.0, 0.0], dmatrix![0.3, 0.05; 0.05, 0.2]).unwrap();
        let sys = integrator(2, 1.5, noise);
        let p = Partition::new(bx(&[-3.0, -3.0], &[3.0, 3.0]), vec![6, 6])
            .unwrap()
            .with_default_labels(&[bx(&[1.0, 1.0], &[3.0, 3.0])], &[bx(&[-1.0, 0.5], &[0.0, 3.0])])
            .unwrap();
        let acts = enabled_actions(&sys, &p, default_actions(&p)).unwrap();
        let abs = Abstraction::build(&sys, &p, acts, &config(300)).unwrap();
        for (a, row) in abs.actions().iter().zip(&abs.counts().rows) {
            if !a.enabled_in.is_empty() {
                assert_eq!(row.total(), 300);
            }
        }
        let imdp = abs.imdp().unwrap();
        let point = abs.point_mdp().unwrap();
        for s in 0..imdp.num_states() {
            assert_eq!(imdp.choices(s).len(), point.choices(s).len());
            for c in imdp.choices(s) {
                let dist = imdp.distribution(c.distribution);
                let lo: f64 = dist.iter().map(|t| t.interval.low()).sum();
                let hi: f64 = dist.iter().map(|t| t.interval.high()).sum();
                assert!(lo <= 1.0 && hi >= 1.0);
                for pt in point.transitions(s, c.action).unwrap() {
                    let t = dist.iter().find(|t| t.successor == pt.successor).unwrap();
                    assert!(t.interval.low() <= pt.interval.low() && pt.interval.low() <= t.interval.high());
                }
            }
        }
    }
}
