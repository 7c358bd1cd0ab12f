//! Session state machine: classify, hold or forward, resolve decisions.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use literacy_core::coach::{CoachError, PromptCoach};
use literacy_core::config::GatewayConfig;
use literacy_core::disclosure::{interventions_for, DisclosureMonitor, RuleError};
use literacy_core::lexicon::LexiconError;
use literacy_core::model::{
    ClarityAssessment, DisclosureLabel, DisclosureReport, GuidanceLevel, Intervention,
    InterventionKind, InterventionOption, OptionAction, SkillProfile, UserTurn,
};
use literacy_core::tallies::{MetricsTallies, SessionMetricsReport};
use literacy_core::transparency::{
    detect_trigger, maybe_emit, CooldownState, TransparencyTopic, TriggerPatterns,
};
use serde::Serialize;
use thiserror::Error;
use tokio::sync::Mutex as AsyncMutex;

use crate::metrics_file::MetricsFile;
use crate::transport::Transport;
use crate::upstream::{ChatMessage, UpstreamClient, UpstreamError};

pub trait Clock: Send + Sync {
    /// Seconds since the Unix epoch.
    fn now_secs(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_secs(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new(start: u64) -> Self {
        Self(Arc::new(AtomicU64::new(start)))
    }

    pub fn advance(&self, secs: u64) {
        self.0.fetch_add(secs, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_secs(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Pipeline stages, in the order a forwarded turn passes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Disclosure,
    Clarity,
    Interventions,
    Trigger,
    Upstream,
    Transparency,
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Coach(#[from] CoachError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("session already has a pending turn awaiting a decision")]
    SessionBusy,
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Upstream(#[from] UpstreamError),
    #[error("no pending turn for this session")]
    NoPending,
    #[error("pending_id does not match the pending turn")]
    PendingIdMismatch,
    #[error("continuing is disabled for high-risk messages")]
    ContinueForbidden,
    #[error("unknown session")]
    UnknownSession,
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SessionBusy => "session_busy",
            Self::EmptyInput(_) => "empty_input",
            Self::Upstream(_) => "upstream_error",
            Self::NoPending => "no_pending",
            Self::PendingIdMismatch => "pending_id_mismatch",
            Self::ContinueForbidden => "continue_forbidden",
            Self::UnknownSession => "unknown_session",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClaritySummary {
    pub score: u8,
    pub guidance_level: GuidanceLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TurnOutcome {
    Forwarded {
        assistant_text: String,
        interventions: Vec<Intervention>,
        clarity: ClaritySummary,
        #[serde(skip)]
        trace: Vec<Stage>,
    },
    Held {
        pending_id: String,
        interventions: Vec<Intervention>,
        clarity: ClaritySummary,
        #[serde(skip)]
        trace: Vec<Stage>,
    },
}

impl TurnOutcome {
    pub fn is_forwarded(&self) -> bool {
        matches!(self, Self::Forwarded { .. })
    }

    pub fn interventions(&self) -> &[Intervention] {
        match self {
            Self::Forwarded { interventions, .. } | Self::Held { interventions, .. } => {
                interventions
            }
        }
    }

    pub fn trace(&self) -> &[Stage] {
        match self {
            Self::Forwarded { trace, .. } | Self::Held { trace, .. } => trace,
        }
    }

    pub fn pending_id(&self) -> Option<&str> {
        match self {
            Self::Held { pending_id, .. } => Some(pending_id),
            Self::Forwarded { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Continue,
    Rephrase(String),
}

/// Everything computed before anything leaves the machine.
#[derive(Debug, Clone)]
pub struct PreInference {
    pub report: DisclosureReport,
    pub clarity: ClarityAssessment,
    /// Blocking interventions first, then prompt hints.
    pub interventions: Vec<Intervention>,
    pub trigger: Option<TransparencyTopic>,
    pub trace: Vec<Stage>,
}

impl PreInference {
    pub fn blocks(&self) -> bool {
        self.interventions.iter().any(|i| i.blocking)
    }
}

#[derive(Debug, Clone)]
pub struct PendingTurn {
    pub pending_id: String,
    pub original_turn: UserTurn,
    pub pre: PreInference,
    pub created_at: u64,
}

#[derive(Debug, Clone, Default)]
pub struct SessionState {
    pub skill: SkillProfile,
    pub cooldowns: CooldownState,
    pub pending: Option<PendingTurn>,
    /// Accepted (forwarded) user turns so far.
    pub next_turn_index: u64,
    pub tallies: MetricsTallies,
    /// Confirmed exchanges only.
    pub history: Vec<ChatMessage>,
}

/// Classification engines, shared read-only across sessions.
#[derive(Debug, Clone)]
pub struct Engines {
    pub config: GatewayConfig,
    pub monitor: DisclosureMonitor,
    pub coach: PromptCoach,
    pub triggers: TriggerPatterns,
}

impl Engines {
    pub fn from_config(config: GatewayConfig) -> Result<Self, SetupError> {
        Ok(Self {
            monitor: DisclosureMonitor::from_config(&config)?,
            coach: PromptCoach::from_config(&config)?,
            triggers: TriggerPatterns::from_config(&config)?,
            config,
        })
    }

    /// Disclosure report, clarity and hints, blocking interventions and
    /// transparency trigger, in that order.
    pub fn pre_inference(&self, turn: &UserTurn, skill: &SkillProfile) -> PreInference {
        let mut trace = Vec::with_capacity(6);
        let report = self.monitor.build_report(&turn.text);
        trace.push(Stage::Disclosure);
        let clarity = self.coach.assess(&turn.text, skill);
        trace.push(Stage::Clarity);
        let mut interventions = if self.config.limits.disclosure_monitor {
            interventions_for(&report, &self.config)
        } else {
            Vec::new()
        };
        interventions.extend(hint_interventions(&clarity));
        trace.push(Stage::Interventions);
        let trigger = detect_trigger(turn, &report, &self.triggers);
        trace.push(Stage::Trigger);
        PreInference {
            report,
            clarity,
            interventions,
            trigger,
            trace,
        }
    }
}

/// One PromptHint per hint; the rephrase options ride on the first.
fn hint_interventions(clarity: &ClarityAssessment) -> Vec<Intervention> {
    clarity
        .hints
        .iter()
        .enumerate()
        .map(|(i, hint)| {
            let iv = Intervention::new(InterventionKind::PromptHint, hint.clone());
            if i == 0 && !clarity.rephrase_options.is_empty() {
                iv.with_options(
                    clarity
                        .rephrase_options
                        .iter()
                        .map(|o| InterventionOption {
                            label: o.clone(),
                            action: OptionAction::RephraseWith(o.clone()),
                        })
                        .collect(),
                )
            } else {
                iv
            }
        })
        .collect()
}

pub struct Gateway {
    engines: Arc<Engines>,
    upstream: UpstreamClient,
    sessions: Mutex<HashMap<String, Arc<AsyncMutex<SessionState>>>>,
    clock: Arc<dyn Clock>,
    metrics: Option<MetricsFile>,
}

impl Gateway {
    /// Metrics snapshots go to `config.metrics.path`.
    pub fn new(config: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, SetupError> {
        let metrics = Some(MetricsFile::new(config.metrics.path.clone()));
        let upstream = UpstreamClient::new(config.upstream.clone(), transport);
        Ok(Self {
            engines: Arc::new(Engines::from_config(config)?),
            upstream,
            sessions: Mutex::new(HashMap::new()),
            clock: Arc::new(SystemClock),
            metrics,
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// `None` disables the metrics file.
    pub fn with_metrics_path(mut self, path: Option<PathBuf>) -> Self {
        self.metrics = path.map(MetricsFile::new);
        self
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.engines.config
    }

    pub fn engines(&self) -> &Engines {
        &self.engines
    }

    fn session(&self, id: &str, create: bool) -> Option<Arc<AsyncMutex<SessionState>>> {
        let mut map = self.sessions.lock().expect("session map lock");
        if create {
            Some(map.entry(id.to_string()).or_default().clone())
        } else {
            map.get(id).cloned()
        }
    }

    fn expire_pending(&self, state: &mut SessionState) {
        let ttl = self.engines.config.limits.pending_ttl_secs;
        let now = self.clock.now_secs();
        if state
            .pending
            .as_ref()
            .is_some_and(|p| now.saturating_sub(p.created_at) >= ttl)
        {
            state.pending = None;
        }
    }

    pub async fn handle_turn(&self, session_id: &str, text: &str) -> Result<TurnOutcome, GatewayError> {
        if session_id.trim().is_empty() {
            return Err(GatewayError::EmptyInput("session_id"));
        }
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyInput("text"));
        }
        let session = self.session(session_id, true).expect("created");
        let mut state = session.lock().await;
        self.expire_pending(&mut state);
        if state.pending.is_some() {
            return Err(GatewayError::SessionBusy);
        }
        let outcome = self.process(&mut state, session_id, text).await?;
        self.snapshot(session_id, &state);
        Ok(outcome)
    }

    pub async fn resolve_pending(
        &self,
        session_id: &str,
        pending_id: &str,
        decision: Decision,
    ) -> Result<TurnOutcome, GatewayError> {
        let session = self
            .session(session_id, false)
            .ok_or(GatewayError::NoPending)?;
        let mut state = session.lock().await;
        self.expire_pending(&mut state);
        let pending = state.pending.as_ref().ok_or(GatewayError::NoPending)?;
        if pending.pending_id != pending_id {
            return Err(GatewayError::PendingIdMismatch);
        }
        match decision {
            Decision::Continue => {
                if pending.pre.report.label == DisclosureLabel::HighRisk
                    && self.engines.config.limits.block_high_risk_forwarding
                {
                    return Err(GatewayError::ContinueForbidden);
                }
                let pending = state.pending.take().expect("checked above");
                let text = pending.original_turn.text.clone();
                let mut pre = pending.pre.clone();
                // hints were shown with the held card
                pre.interventions.clear();
                match self.forward(&mut state, &text, pre).await {
                    Ok(outcome) => {
                        state.tallies.continue_chosen += 1;
                        self.snapshot(session_id, &state);
                        Ok(outcome)
                    }
                    Err(e) => {
                        state.pending = Some(pending);
                        Err(e)
                    }
                }
            }
            Decision::Rephrase(text) => {
                if text.trim().is_empty() {
                    return Err(GatewayError::EmptyInput("text"));
                }
                let pending = state.pending.take().expect("checked above");
                match self.process(&mut state, session_id, &text).await {
                    Ok(outcome) => {
                        state.tallies.rephrase_accepted += 1;
                        self.snapshot(session_id, &state);
                        Ok(outcome)
                    }
                    Err(e) => {
                        state.pending = Some(pending);
                        Err(e)
                    }
                }
            }
        }
    }

    pub async fn export_metrics(&self, session_id: &str) -> Result<SessionMetricsReport, GatewayError> {
        let session = self
            .session(session_id, false)
            .ok_or(GatewayError::UnknownSession)?;
        let state = session.lock().await;
        Ok(SessionMetricsReport::from_tallies(
            session_id,
            &state.tallies,
            state.skill,
        ))
    }

    /// Full pipeline for a new text at the session's next turn index.
    async fn process(
        &self,
        state: &mut SessionState,
        session_id: &str,
        text: &str,
    ) -> Result<TurnOutcome, GatewayError> {
        let turn = UserTurn {
            session_id: session_id.to_string(),
            turn_index: state.next_turn_index,
            text: text.to_string(),
            received_at: self.clock.now_secs(),
        };
        let pre = self.engines.pre_inference(&turn, &state.skill);
        if !pre.blocks() {
            return self.forward(state, text, pre).await;
        }
        let pending_id = uuid::Uuid::new_v4().to_string();
        for iv in &pre.interventions {
            state.tallies.interventions.record(iv.kind);
        }
        let outcome = TurnOutcome::Held {
            pending_id: pending_id.clone(),
            interventions: pre.interventions.clone(),
            clarity: ClaritySummary {
                score: pre.clarity.score,
                guidance_level: state.skill.guidance_level,
            },
            trace: pre.trace.clone(),
        };
        state.pending = Some(PendingTurn {
            pending_id,
            original_turn: turn,
            pre,
            created_at: self.clock.now_secs(),
        });
        Ok(outcome)
    }

    /// Sends confirmed text upstream and runs the post-inference pass. On
    /// error the session state is left untouched.
    async fn forward(
        &self,
        state: &mut SessionState,
        text: &str,
        pre: PreInference,
    ) -> Result<TurnOutcome, GatewayError> {
        let assistant_text = self.upstream.complete(&state.history, text).await?;
        let mut trace = pre.trace;
        trace.push(Stage::Upstream);
        let (note, cooldowns) = maybe_emit(
            pre.trigger,
            &state.cooldowns,
            state.next_turn_index,
            &self.engines.config,
        );
        trace.push(Stage::Transparency);
        state.cooldowns = cooldowns;
        let mut interventions = pre.interventions;
        interventions.extend(note);
        state.history.push(ChatMessage::user(text));
        state.history.push(ChatMessage::assistant(assistant_text.clone()));
        state.skill = self.engines.coach.update_skill(&state.skill, pre.clarity.score);
        state.tallies.record_turn(pre.report.label, pre.clarity.score);
        for iv in &interventions {
            state.tallies.interventions.record(iv.kind);
        }
        state.next_turn_index += 1;
        Ok(TurnOutcome::Forwarded {
            assistant_text,
            interventions,
            clarity: ClaritySummary {
                score: pre.clarity.score,
                guidance_level: state.skill.guidance_level,
            },
            trace,
        })
    }

    fn snapshot(&self, session_id: &str, state: &SessionState) {
        if let Some(file) = &self.metrics {
            let report = SessionMetricsReport::from_tallies(session_id, &state.tallies, state.skill);
            if let Err(e) = file.append(&report) {
                tracing::warn!(path = %file.path().display(), error = %e, "metrics append failed");
            }
        }
    }
}
