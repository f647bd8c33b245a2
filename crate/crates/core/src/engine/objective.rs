//! Objectives and their normalization to the maximizing form.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::StateSet;
use crate::transform::{StepInterval, TimeInterval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Less,
    LessEq,
    Greater,
    GreaterEq,
}

impl Relation {
    pub fn direction(self) -> Direction {
        match self {
            Relation::Greater | Relation::GreaterEq => Direction::Maximize,
            Relation::Less | Relation::LessEq => Direction::Minimize,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Less | Relation::Greater)
    }

    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::Less => value < bound,
            Relation::LessEq => value <= bound,
            Relation::Greater => value > bound,
            Relation::GreaterEq => value >= bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Less => "<",
            Relation::LessEq => "<=",
            Relation::Greater => ">",
            Relation::GreaterEq => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub relation: Relation,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectiveKind {
    UntimedReach { goal: StateSet },
    TimedReach { goal: StateSet, interval: TimeInterval },
    /// Expected reward `reward` accumulated until `goal` is reached.
    ExpReward { reward: usize, goal: StateSet },
    /// Expected time until `goal`; expands to a reward of rate 1 on Markovian states.
    ExpTime { goal: StateSet },
}

impl ObjectiveKind {
    pub fn goal(&self) -> &StateSet {
        match self {
            ObjectiveKind::UntimedReach { goal }
            | ObjectiveKind::TimedReach { goal, .. }
            | ObjectiveKind::ExpReward { goal, .. }
            | ObjectiveKind::ExpTime { goal } => goal,
        }
    }

    pub fn is_reward(&self) -> bool {
        matches!(self, ObjectiveKind::ExpReward { .. } | ObjectiveKind::ExpTime { .. })
    }

    pub fn interval(&self) -> Option<&TimeInterval> {
        match self {
            ObjectiveKind::TimedReach { interval, .. } => Some(interval),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub direction: Direction,
    pub threshold: Option<Threshold>,
    /// Human-readable form, e.g. `Pmax[F "goal"]`.
    pub text: String,
}

impl Objective {
    fn new(kind: ObjectiveKind, direction: Direction, text: String) -> Self {
        Objective { kind, direction, threshold: None, text }
    }

    pub fn reach(goal: StateSet, direction: Direction) -> Self {
        let text = format!("P{}[F {}]", dir_text(direction), set_text(&goal));
        Objective::new(ObjectiveKind::UntimedReach { goal }, direction, text)
    }

    pub fn timed_reach(goal: StateSet, interval: TimeInterval, direction: Direction) -> Self {
        let text = format!("P{}[F{} {}]", dir_text(direction), bound_text(&interval), set_text(&goal));
        if interval.is_trivial() {
            return Objective { text, ..Objective::reach(goal, direction) };
        }
        Objective::new(ObjectiveKind::TimedReach { goal, interval }, direction, text)
    }

    pub fn reward(reward: usize, goal: StateSet, direction: Direction) -> Self {
        let text = format!("R{}{{#{reward}}}[F {}]", dir_text(direction), set_text(&goal));
        Objective::new(ObjectiveKind::ExpReward { reward, goal }, direction, text)
    }

    pub fn time(goal: StateSet, direction: Direction) -> Self {
        let text = format!("T{}[F {}]", dir_text(direction), set_text(&goal));
        Objective::new(ObjectiveKind::ExpTime { goal }, direction, text)
    }

    /// Attaches a threshold; the direction follows the relation.
    pub fn with_threshold(mut self, relation: Relation, value: f64) -> Self {
        self.direction = relation.direction();
        self.threshold = Some(Threshold { relation, value });
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    /// `+1` for maximizing objectives, `-1` for minimizing ones.
    pub fn sign(&self) -> f64 {
        match self.direction {
            Direction::Maximize => 1.0,
            Direction::Minimize => -1.0,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn dir_text(d: Direction) -> &'static str {
    match d {
        Direction::Maximize => "max",
        Direction::Minimize => "min",
    }
}

fn set_text(goal: &StateSet) -> String {
    let states: Vec<String> = goal.iter().map(|s| s.to_string()).collect();
    format!("{{{}}}", states.join(","))
}

fn bound_text(i: &TimeInterval) -> String {
    match i.upper {
        Some(b) => format!("[{},{}]", i.lower, b),
        None => format!("[{},inf]", i.lower),
    }
}

/// Objective in maximizing form.
///
/// Values of minimizing objectives are negated; `sign` converts back.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedObjective {
    pub kind: ObjectiveKind,
    pub sign: f64,
    /// Threshold on the negated scale for minimizing objectives.
    pub threshold: Option<Threshold>,
    /// Step bound on the digitization; `None` for untimed objectives.
    pub step_bound: Option<StepInterval>,
}

impl NormalizedObjective {
    pub fn from_objective(obj: &Objective, step_bound: Option<StepInterval>) -> Self {
        let sign = obj.sign();
        let threshold = obj.threshold.map(|t| {
            if sign > 0.0 {
                t
            } else {
                let relation = match t.relation {
                    Relation::Less => Relation::Greater,
                    Relation::LessEq => Relation::GreaterEq,
                    r => r,
                };
                Threshold { relation, value: -t.value }
            }
        });
        NormalizedObjective { kind: obj.kind.clone(), sign, threshold, step_bound }
    }

    pub fn is_minimizing(&self) -> bool {
        self.sign < 0.0
    }

    /// Converts a value on the normalized scale back to the objective's scale.
    pub fn report(&self, v: f64) -> f64 {
        self.sign * v
    }
}
