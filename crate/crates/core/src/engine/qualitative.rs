//! Qualitative reachability on MDPs.

use crate::graph::{can_avoid, exists_reach, prob1_max, prob1_min};
use crate::model::{Mdp, StateSet};

use super::objective::Direction;

/// States with optimal reachability probability 0 and 1 for `goal`.
pub fn qualitative_reach(mdp: &Mdp, goal: &StateSet, mode: Direction) -> (StateSet, StateSet) {
    let g = goal.bits();
    let (zero, one) = match mode {
        Direction::Maximize => {
            let reach = exists_reach(mdp, g, None);
            (reach.iter().map(|r| !r).collect(), prob1_max(mdp, g, None))
        }
        Direction::Minimize => (can_avoid(mdp, g, None), prob1_min(mdp, g, None)),
    };
    (StateSet::from_bits(zero), StateSet::from_bits(one))
}
