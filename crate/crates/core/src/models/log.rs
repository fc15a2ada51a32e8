use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Which update produced a log line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// A diffusion-model update.
    Train,
    Critic,
    Generator,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Critic => "critic",
            Phase::Generator => "generator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    EpochLimit,
    BatchLimit,
    BudgetExhausted,
}

impl HaltReason {
    pub fn as_str(self) -> &'static str {
        match self {
            HaltReason::EpochLimit => "epoch_limit",
            HaltReason::BatchLimit => "batch_limit",
            HaltReason::BudgetExhausted => "budget_exhausted",
        }
    }
}

/// One processed batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub epoch: usize,
    pub batch: usize,
    pub phase: Phase,
    pub loss: f64,
    /// Running ε after this update; 0 for unprivatized runs.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub halt: HaltReason,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str = "epoch,batch,phase,loss,epsilon";

    pub fn losses(&self, phase: Phase) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.phase == phase)
            .map(|e| e.loss)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.epoch,
                e.batch,
                e.phase.as_str(),
                e.loss,
                e.epsilon
            );
        }
        out
    }
}
