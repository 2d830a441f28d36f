//! Relation table: base dependence kinds, their inverses and a self loop.

use serde::{Deserialize, Serialize};

use crate::depgraph::DepKind;

/// Which direction-specific weight a relation uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Original edge direction.
    Out,
    /// Inverse edge.
    In,
    SelfLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Base(DepKind),
    Inverse(DepKind),
    SelfLoop,
}

pub const NUM_BASE: usize = 4;
pub const NUM_RELATIONS: usize = 2 * NUM_BASE + 1;
pub const SELF_INDEX: usize = NUM_RELATIONS - 1;

impl Relation {
    pub fn all() -> [Relation; NUM_RELATIONS] {
        let mut out = [Relation::SelfLoop; NUM_RELATIONS];
        for k in DepKind::ALL {
            out[k.index()] = Relation::Base(k);
            out[NUM_BASE + k.index()] = Relation::Inverse(k);
        }
        out
    }

    pub fn index(self) -> usize {
        match self {
            Relation::Base(k) => k.index(),
            Relation::Inverse(k) => NUM_BASE + k.index(),
            Relation::SelfLoop => SELF_INDEX,
        }
    }

    pub fn from_index(i: usize) -> Option<Relation> {
        Relation::all().get(i).copied()
    }

    pub fn inverse(self) -> Relation {
        match self {
            Relation::Base(k) => Relation::Inverse(k),
            Relation::Inverse(k) => Relation::Base(k),
            Relation::SelfLoop => Relation::SelfLoop,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Relation::Base(_) => Direction::Out,
            Relation::Inverse(_) => Direction::In,
            Relation::SelfLoop => Direction::SelfLoop,
        }
    }

    pub fn name(self) -> String {
        match self {
            Relation::Base(k) => k.to_string(),
            Relation::Inverse(k) => format!("{k}^-1"),
            Relation::SelfLoop => "Self".into(),
        }
    }
}
