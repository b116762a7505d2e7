use std::fmt;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    GoalPushed,
    RuleTried,
    RuleFired,
    RuleSkipped,
    ValueAssigned,
    QuestionEmitted,
    AnswerReceived,
    RemoteCall,
    CacheHit,
    Note,
}

impl TraceKind {
    pub const ALL: [TraceKind; 10] = [
        TraceKind::GoalPushed,
        TraceKind::RuleTried,
        TraceKind::RuleFired,
        TraceKind::RuleSkipped,
        TraceKind::ValueAssigned,
        TraceKind::QuestionEmitted,
        TraceKind::AnswerReceived,
        TraceKind::RemoteCall,
        TraceKind::CacheHit,
        TraceKind::Note,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceKind::GoalPushed => "goal_pushed",
            TraceKind::RuleTried => "rule_tried",
            TraceKind::RuleFired => "rule_fired",
            TraceKind::RuleSkipped => "rule_skipped",
            TraceKind::ValueAssigned => "value_assigned",
            TraceKind::QuestionEmitted => "question",
            TraceKind::AnswerReceived => "answer",
            TraceKind::RemoteCall => "remote_call",
            TraceKind::CacheHit => "cache_hit",
            TraceKind::Note => "note",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TraceKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One step of an inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: TraceKind,
    /// Frame level the step happened at.
    pub frame: String,
    /// Frame the value is for.
    pub origin: String,
    pub slot: String,
    /// Index of the action within its frame.
    pub rule: Option<usize>,
    pub value: Option<Value>,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>4} {:<14} {}.{}", self.seq, self.kind.name(), self.origin, self.slot)?;
        if self.frame != self.origin && !self.frame.is_empty() {
            write!(f, " @{}", self.frame)?;
        }
        if let Some(r) = self.rule {
            write!(f, " #{r}")?;
        }
        if let Some(v) = &self.value {
            write!(f, " = {v}")?;
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}
