use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Action, ModelError, UiSnapshot};
use crate::device::ActionOutcome;
use crate::prompt::Decision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Done,
    RoundCap,
    BudgetCap,
    Stagnation,
    ParseFailure,
}

impl Terminal {
    pub fn as_str(&self) -> &'static str {
        match self {
            Terminal::Done => "done",
            Terminal::RoundCap => "round_cap",
            Terminal::BudgetCap => "budget_cap",
            Terminal::Stagnation => "stagnation",
            Terminal::ParseFailure => "parse_failure",
        }
    }
}

/// Who chose the action of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initiator {
    #[default]
    Llm,
    /// Engine-side pop-up dismissal; never attributed to the model.
    Engine,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRound {
    pub snapshot: UiSnapshot,
    pub decision: Decision,
    /// Absent for rounds that ended without an executed action (done,
    /// unparseable).
    #[serde(default)]
    pub outcome: Option<ActionOutcome>,
    #[serde(default)]
    pub initiator: Initiator,
}

impl TraceRound {
    pub fn action(&self) -> Option<&Action> {
        match &self.decision {
            Decision::Act { action } => Some(action),
            _ => None,
        }
    }

    /// Whether the page structure differs before and after this round.
    pub fn changed_page(&self) -> bool {
        self.outcome
            .as_ref()
            .is_some_and(|o| o.new_snapshot.page_fingerprint() != self.snapshot.page_fingerprint())
    }
}

/// Record of one exploration dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub scenario_name: String,
    pub rounds: Vec<TraceRound>,
    pub terminal: Terminal,
    /// Fingerprint of the last page observed by the engine.
    pub final_fingerprint: String,
}

/// Closing record of a JSON-lines trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub scenario_name: String,
    pub terminal: Terminal,
    pub rounds: usize,
    pub llm_rounds: usize,
    pub final_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TraceLine {
    Round(TraceRound),
    Summary(TraceSummary),
}

impl ExplorationTrace {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.terminal == Terminal::Done
            && !matches!(self.rounds.last().map(|r| &r.decision), Some(Decision::Done { .. }))
        {
            return Err(ModelError::InvalidTrace("terminal done without a final Done decision"));
        }
        Ok(())
    }

    /// Rounds where the model, not the engine, chose.
    pub fn llm_rounds(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.initiator == Initiator::Llm)
            .count()
    }

    pub fn summary(&self) -> TraceSummary {
        TraceSummary {
            scenario_name: self.scenario_name.clone(),
            terminal: self.terminal,
            rounds: self.rounds.len(),
            llm_rounds: self.llm_rounds(),
            final_fingerprint: self.final_fingerprint.clone(),
        }
    }

    /// Writes one round per line followed by the summary record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for round in &self.rounds {
            let line = serde_json::to_string(&TraceLine::Round(round.clone()))?;
            writeln!(out, "{line}")?;
        }
        writeln!(out, "{}", serde_json::to_string(&TraceLine::Summary(self.summary()))?)?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ModelError> {
        let mut rounds = Vec::new();
        let mut summary = None;
        for (number, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ModelError::TraceFile(format!("line {}: {e}", number + 1)))?;
            if line.trim().is_empty() {
                continue;
            }
            if summary.is_some() {
                return Err(ModelError::TraceFile(format!("line {}: data after summary", number + 1)));
            }
            match serde_json::from_str(&line)
                .map_err(|e| ModelError::TraceFile(format!("line {}: {e}", number + 1)))?
            {
                TraceLine::Round(round) => rounds.push(round),
                TraceLine::Summary(s) => summary = Some(s),
            }
        }
        let summary = summary.ok_or_else(|| ModelError::TraceFile("missing summary line".into()))?;
        let trace = ExplorationTrace {
            scenario_name: summary.scenario_name,
            rounds,
            terminal: summary.terminal,
            final_fingerprint: summary.final_fingerprint,
        };
        trace.validate()?;
        Ok(trace)
    }
}
