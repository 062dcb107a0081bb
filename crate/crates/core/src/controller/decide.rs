use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Accept,
    RetryStageA,
    EscalateStageB,
    /// Stage B already ran and failed, or a hard limit was hit; the episode
    /// ends without a passing design.
    Terminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionReason {
    Passed,
    ZBelowTau,
    BudgetExhausted,
    /// Not below threshold and attempts remain.
    Continue,
    StageBFailed,
    ToolBudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub reason: DecisionReason,
}

impl Decision {
    pub const fn new(kind: DecisionKind, reason: DecisionReason) -> Self {
        Decision { kind, reason }
    }

    pub fn escalates(&self) -> bool {
        self.kind == DecisionKind::EscalateStageB
    }
}

/// Escalate iff `Z < τ` or `attempts ≥ r`, unless the design passed or Stage B
/// was already used. When both conditions hold the budget is reported.
pub fn decide(
    z: f64,
    tau: f64,
    attempts_used: usize,
    r: usize,
    passed: bool,
    escalated_already: bool,
) -> Decision {
    use DecisionKind::*;
    use DecisionReason::*;
    if passed {
        return Decision::new(Accept, Passed);
    }
    if escalated_already {
        return Decision::new(Terminate, StageBFailed);
    }
    if attempts_used >= r {
        return Decision::new(EscalateStageB, BudgetExhausted);
    }
    if z < tau {
        return Decision::new(EscalateStageB, ZBelowTau);
    }
    Decision::new(RetryStageA, Continue)
}
