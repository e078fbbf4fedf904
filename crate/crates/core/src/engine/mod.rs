//! The N-BRW: branching followed by selection of the `N` rightmost children.
//!
//! A step lets every particle of the population reproduce independently
//! according to a [`PointProcessLaw`], then keeps the `N` largest children
//! (with multiplicity). Parents are processed in rank order and each one
//! consumes exactly one call to [`PointProcessLaw::sample_into`], so a seeded
//! run is fully determined by the stream and the initial population.

mod coupling;
mod genealogy;
mod select;
mod speed;

pub use coupling::{coupled_step, measure_leq};
pub use genealogy::{find_ascending_window, leader_ancestry};
pub use select::{select_rightmost, Selector};
pub use speed::{
    default_checkpoints, estimate_speed, speed_traces, summarize_traces, CheckpointRow,
    CloudRow, CloudStats, ReplicaTrace, SpeedEstimate,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::laws::PointProcessLaw;

/// `N` particle positions sorted nonincreasing, plus the generation count.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    positions: Vec<f64>,
    generation: u64,
}

impl Population {
    /// Sorts `positions`; rejects empty or non-finite input.
    pub fn new(mut positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Precondition("population must be nonempty".into()));
        }
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::Precondition(format!("non-finite position {x}")));
        }
        positions.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { positions, generation: 0 })
    }

    /// `n` particles at `x`.
    pub fn at(n: usize, x: f64) -> Self {
        assert!(n > 0 && x.is_finite());
        Self { positions: vec![x; n], generation: 0 }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// `x(1)`, the rightmost particle.
    pub fn leader(&self) -> f64 {
        self.positions[0]
    }

    /// `x(N)`, the leftmost particle.
    pub fn last(&self) -> f64 {
        self.positions[self.positions.len() - 1]
    }

    pub fn diameter(&self) -> f64 {
        self.leader() - self.last()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            positions: self.positions.iter().map(|x| x + c).collect(),
            generation: self.generation,
        }
    }
}

/// Reusable buffers for repeated steps with one law.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    law: &'a PointProcessLaw,
    selector: Selector,
    points: Vec<f64>,
    next: Vec<f64>,
}

impl<'a> Engine<'a> {
    pub fn new(law: &'a PointProcessLaw, n: usize) -> Self {
        Self { law, selector: Selector::new(n), points: Vec::new(), next: Vec::new() }
    }

    /// Advances `pop` by one branching-selection step in place.
    pub fn step<R: Rng + ?Sized>(&mut self, pop: &mut Population, rng: &mut R) {
        assert_eq!(pop.len(), self.selector.n(), "population size differs from engine N");
        for &x in &pop.positions {
            self.law.sample_into(rng, &mut self.points);
            for &l in &self.points {
                self.selector.push(x + l);
            }
        }
        let full = self.selector.finish_into(&mut self.next);
        assert!(full, "every parent has at least one child");
        std::mem::swap(&mut pop.positions, &mut self.next);
        pop.generation += 1;
    }
}

pub fn branch_select_step<R: Rng + ?Sized>(
    pop: &Population,
    law: &PointProcessLaw,
    rng: &mut R,
) -> Population {
    let mut next = pop.clone();
    Engine::new(law, pop.len()).step(&mut next, rng);
    next
}
