//! Interval Markov decision processes for reach-avoid objectives.
//!
//! A model has region states plus three absorbing sinks: `Goal` (value 1),
//! `Unsafe` and `Out` (value 0). Every enabled `(state, action)` pair points
//! to an interval distribution. Distributions are stored once and may be
//! shared by many states, which is how abstract actions keep the same
//! successor distribution wherever they are chosen.

mod explicit;
mod solve;

pub use explicit::{
    export_explicit, import_explicit, read_explicit_files, write_explicit_files, ExplicitError,
};
pub use solve::{
    inner_min, nominal_value_iteration, robust_value_iteration, robust_value_iteration_stationary,
    RobustSolution, SolveError, StationarySolution, STATIONARY_MAX_ITERATIONS,
    STATIONARY_TOLERANCE,
};

use thiserror::Error;

use crate::interval::ProbabilityInterval;
use crate::partition::RegionId;

/// Tolerance on `Σ low ≤ 1 ≤ Σ high`.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateKind {
    Region(RegionId),
    Goal,
    Unsafe,
    Out,
}

impl StateKind {
    pub fn is_sink(&self) -> bool {
        !matches!(self, StateKind::Region(_))
    }

    /// Terminal reach-avoid value.
    pub fn terminal_value(&self) -> f64 {
        match self {
            StateKind::Goal => 1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub successor: usize,
    pub interval: ProbabilityInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub action: usize,
    pub distribution: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("state {0} does not exist")]
    UnknownState(usize),
    #[error("distribution {0} does not exist")]
    UnknownDistribution(usize),
    #[error("successor {successor} listed twice")]
    DuplicateSuccessor { successor: usize },
    #[error("successor {0} does not exist")]
    UnknownSuccessor(usize),
    #[error("intervals admit no distribution: sum of lows {sum_low}, sum of highs {sum_high}")]
    Infeasible { sum_low: f64, sum_high: f64 },
    #[error("state {0} is an absorbing sink and cannot enable actions")]
    SinkAction(usize),
    #[error("action {action} already enabled in state {state}")]
    DuplicateAction { state: usize, action: usize },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
}

#[derive(Debug, Clone)]
pub struct IntervalMDP {
    kinds: Vec<StateKind>,
    choices: Vec<Vec<Choice>>,
    distributions: Vec<Vec<Transition>>,
    confidence: f64,
}

impl IntervalMDP {
    pub fn new(kinds: Vec<StateKind>, confidence: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::Confidence(confidence));
        }
        let n = kinds.len();
        Ok(IntervalMDP {
            kinds,
            choices: vec![Vec::new(); n],
            distributions: Vec::new(),
            confidence,
        })
    }

    /// Registers a distribution; transitions are sorted by successor.
    pub fn add_distribution(&mut self, mut transitions: Vec<Transition>) -> Result<usize, ModelError> {
        transitions.sort_by_key(|t| t.successor);
        for w in transitions.windows(2) {
            if w[0].successor == w[1].successor {
                return Err(ModelError::DuplicateSuccessor {
                    successor: w[0].successor,
                });
            }
        }
        if let Some(t) = transitions.iter().find(|t| t.successor >= self.kinds.len()) {
            return Err(ModelError::UnknownSuccessor(t.successor));
        }
        let sum_low: f64 = transitions.iter().map(|t| t.interval.low()).sum();
        let sum_high: f64 = transitions.iter().map(|t| t.interval.high()).sum();
        if sum_low > 1.0 + FEASIBILITY_TOLERANCE || sum_high < 1.0 - FEASIBILITY_TOLERANCE {
            return Err(ModelError::Infeasible { sum_low, sum_high });
        }
        self.distributions.push(transitions);
        Ok(self.distributions.len() - 1)
    }

    /// Enables `action` in `state` with the given distribution.
    pub fn enable(&mut self, state: usize, action: usize, distribution: usize) -> Result<(), ModelError> {
        let kind = *self.kinds.get(state).ok_or(ModelError::UnknownState(state))?;
        if kind.is_sink() {
            return Err(ModelError::SinkAction(state));
        }
        if distribution >= self.distributions.len() {
            return Err(ModelError::UnknownDistribution(distribution));
        }
        let list = &mut self.choices[state];
        match list.binary_search_by_key(&action, |c| c.action) {
            Ok(_) => Err(ModelError::DuplicateAction { state, action }),
            Err(pos) => {
                list.insert(pos, Choice {
                    action,
                    distribution,
                });
                Ok(())
            }
        }
    }

    pub fn num_states(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, state: usize) -> StateKind {
        self.kinds[state]
    }

    pub fn kinds(&self) -> &[StateKind] {
        &self.kinds
    }

    /// Index of the first state of the given kind.
    pub fn find(&self, kind: StateKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    /// Enabled choices of `state`, sorted by action id.
    pub fn choices(&self, state: usize) -> &[Choice] {
        &self.choices[state]
    }

    pub fn distribution(&self, index: usize) -> &[Transition] {
        &self.distributions[index]
    }

    pub fn num_distributions(&self) -> usize {
        self.distributions.len()
    }

    /// Transitions of `action` in `state`, if enabled.
    pub fn transitions(&self, state: usize, action: usize) -> Option<&[Transition]> {
        let c = self.choices[state].iter().find(|c| c.action == action)?;
        Some(&self.distributions[c.distribution])
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }

    /// Number of `(state, action, successor)` triples.
    pub fn num_transitions(&self) -> usize {
        self.choices
            .iter()
            .flatten()
            .map(|c| self.distributions[c.distribution].len())
            .sum()
    }

    /// Same structure with every interval replaced through `f`.
    pub fn map_intervals<F>(&self, mut f: F) -> Self
    where
        F: FnMut(ProbabilityInterval) -> ProbabilityInterval,
    {
        let mut out = self.clone();
        for dist in &mut out.distributions {
            for t in dist.iter_mut() {
                t.interval = f(t.interval);
            }
        }
        out
    }
}

/// Structural equality: same states, same enabled actions and identical
/// transitions, regardless of how distributions are shared internally.
impl PartialEq for IntervalMDP {
    fn eq(&self, other: &Self) -> bool {
        if self.kinds != other.kinds || self.confidence.to_bits() != other.confidence.to_bits() {
            return false;
        }
        (0..self.num_states()).all(|s| {
            let (a, b) = (&self.choices[s], &other.choices[s]);
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| {
                    x.action == y.action
                        && self.distributions[x.distribution] == other.distributions[y.distribution]
                })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(l: f64, h: f64) -> ProbabilityInterval {
        ProbabilityInterval::new(l, h).unwrap()
    }

    fn t(s: usize, l: f64, h: f64) -> Transition {
        Transition {
            successor: s,
            interval: iv(l, h),
        }
    }

    #[test]
    fn validation() {
        let kinds = vec![StateKind::Region(RegionId(0)), StateKind::Goal, StateKind::Unsafe];
        let mut m = IntervalMDP::new(kinds, 0.99).unwrap();
        assert!(matches!(
            m.add_distribution(vec![t(1, 0.6, 0.7), t(2, 0.6, 0.7)]),
            Err(ModelError::Infeasible { .. })
        ));
        assert!(matches!(
            m.add_distribution(vec![t(1, 0.1, 0.4), t(2, 0.1, 0.4)]),
            Err(ModelError::Infeasible { .. })
        ));
        assert_eq!(
            m.add_distribution(vec![t(1, 0.5, 0.5), t(1, 0.5, 0.5)]),
            Err(ModelError::DuplicateSuccessor { successor: 1 })
        );
        assert_eq!(m.add_distribution(vec![t(7, 1.0, 1.0)]), Err(ModelError::UnknownSuccessor(7)));
        let d = m.add_distribution(vec![t(2, 0.0, 0.1), t(1, 0.9, 1.0)]).unwrap();
        assert_eq!(m.distribution(d)[0].successor, 1);
        assert_eq!(m.enable(1, 0, d), Err(ModelError::SinkAction(1)));
        m.enable(0, 3, d).unwrap();
        assert_eq!(m.enable(0, 3, d), Err(ModelError::DuplicateAction { state: 0, action: 3 }));
        m.enable(0, 1, d).unwrap();
        let acts: Vec<_> = m.choices(0).iter().map(|c| c.action).collect();
        assert_eq!(acts, vec![1, 3]);
        assert_eq!(m.num_transitions(), 4);
        assert_eq!(m.num_distributions(), 1);
    }
}
