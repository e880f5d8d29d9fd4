use crate::error::{Error, Result};

/// Training stage. Constraints are enforced one after another and phases
/// only move forward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Unconstrained,
    Connection,
    Discreteness,
    Done,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Unconstrained => "unconstrained",
            Phase::Connection => "connection",
            Phase::Discreteness => "discreteness",
            Phase::Done => "done",
        }
    }

    pub fn next(self) -> Phase {
        match self {
            Phase::Unconstrained => Phase::Connection,
            Phase::Connection => Phase::Discreteness,
            Phase::Discreteness | Phase::Done => Phase::Done,
        }
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Phase::Unconstrained, Phase::Connection, Phase::Discreteness, Phase::Done]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

/// Multipliers of the linear (`lambda`) and quadratic (`nu`) penalty terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlmState {
    pub lambda1: f64,
    pub lambda2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub delta_nu: f64,
    pub phase: Phase,
}

impl AlmState {
    /// All multipliers zero, in the unconstrained phase.
    pub fn new(delta_nu: f64) -> Self {
        AlmState { lambda1: 0.0, lambda2: 0.0, nu1: 0.0, nu2: 0.0, delta_nu, phase: Phase::Unconstrained }
    }

    /// `lambda1 += nu1 * conn_total; nu1 += delta_nu` in the connection
    /// phase, `lambda2 += nu2 * p_total; nu2 += delta_nu` in the
    /// discreteness phase.
    pub fn multiplier_update(&self, conn_total: f64, p_total: f64, which: Phase) -> Result<AlmState> {
        if which != self.phase || !matches!(which, Phase::Connection | Phase::Discreteness) {
            return Err(Error::PhaseMismatch { requested: which.as_str(), actual: self.phase.as_str() });
        }
        let mut next = *self;
        if which == Phase::Connection {
            next.lambda1 += self.nu1 * conn_total;
            next.nu1 += self.delta_nu;
        } else {
            next.lambda2 += self.nu2 * p_total;
            next.nu2 += self.delta_nu;
        }
        Ok(next)
    }
}
