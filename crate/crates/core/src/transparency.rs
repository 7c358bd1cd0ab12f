//! Transparency engine: decides when a data-handling note is warranted and
//! rate-limits label-driven notes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{GatewayConfig, TransparencyTemplates};
use crate::lexicon::{parse_word_list, read_word_list, LexiconError, PhraseMatcher};
use crate::model::{DisclosureLabel, DisclosureReport, Intervention, InterventionKind, UserTurn};

const BUNDLED_PRIVACY: &str = include_str!("../lexicons/privacy_triggers.txt");
const BUNDLED_SYSTEM: &str = include_str!("../lexicons/system_triggers.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransparencyTopic {
    DataCollected,
    DataUse,
    DataNotStored,
    SystemBehavior,
}

impl TransparencyTopic {
    pub const ALL: [TransparencyTopic; 4] = [
        Self::DataCollected,
        Self::DataUse,
        Self::DataNotStored,
        Self::SystemBehavior,
    ];

    /// Only explicit privacy questions map to `DataUse`; those skip the
    /// cooldown.
    pub fn bypasses_cooldown(&self) -> bool {
        matches!(self, Self::DataUse)
    }

    pub fn template<'a>(&self, t: &'a TransparencyTemplates) -> &'a str {
        match self {
            Self::DataCollected => &t.data_collected,
            Self::DataUse => &t.data_use,
            Self::DataNotStored => &t.data_not_stored,
            Self::SystemBehavior => &t.system_behavior,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooldownState {
    pub last_note_turn: BTreeMap<TransparencyTopic, u64>,
    pub global_last_note_turn: Option<u64>,
}

/// Phrase lists for explicit privacy and system-behaviour questions.
#[derive(Debug, Clone)]
pub struct TriggerPatterns {
    privacy: PhraseMatcher,
    system: PhraseMatcher,
}

impl TriggerPatterns {
    pub fn new<S: AsRef<str>>(privacy: &[S], system: &[S]) -> Result<Self, LexiconError> {
        Ok(Self {
            privacy: PhraseMatcher::new("privacy_triggers", privacy, false)?,
            system: PhraseMatcher::new("system_triggers", system, false)?,
        })
    }

    pub fn bundled() -> Self {
        Self::new(
            &parse_word_list(BUNDLED_PRIVACY),
            &parse_word_list(BUNDLED_SYSTEM),
        )
        .expect("bundled trigger lists are valid")
    }

    pub fn from_config(config: &GatewayConfig) -> Result<Self, LexiconError> {
        let load = |path: &Option<std::path::PathBuf>, bundled: &str| match path {
            Some(p) => read_word_list(p),
            None => Ok(parse_word_list(bundled)),
        };
        Self::new(
            &load(&config.lexicons.privacy_triggers, BUNDLED_PRIVACY)?,
            &load(&config.lexicons.system_triggers, BUNDLED_SYSTEM)?,
        )
    }

    pub fn is_privacy_question(&self, text: &str) -> bool {
        self.privacy.is_match(text)
    }

    pub fn is_system_question(&self, text: &str) -> bool {
        self.system.is_match(text)
    }
}

/// Precedence: explicit privacy question, then a non-safe label, then a
/// question about how the assistant works.
pub fn detect_trigger(
    turn: &UserTurn,
    report: &DisclosureReport,
    patterns: &TriggerPatterns,
) -> Option<TransparencyTopic> {
    if patterns.is_privacy_question(&turn.text) {
        Some(TransparencyTopic::DataUse)
    } else if report.label != DisclosureLabel::Safe {
        Some(TransparencyTopic::DataNotStored)
    } else if patterns.is_system_question(&turn.text) {
        Some(TransparencyTopic::SystemBehavior)
    } else {
        None
    }
}

/// Fills the `{upstream_host}` and `{pending_ttl_minutes}` slots.
pub fn render_template(template: &str, config: &GatewayConfig) -> String {
    let host = config
        .upstream
        .endpoint
        .host_str()
        .unwrap_or("the configured endpoint");
    let host = match config.upstream.endpoint.port() {
        Some(port) => format!("{host}:{port}"),
        None => host.to_string(),
    };
    template
        .replace("{upstream_host}", &host)
        .replace(
            "{pending_ttl_minutes}",
            &(config.limits.pending_ttl_secs / 60).to_string(),
        )
}

pub fn render_topic(topic: TransparencyTopic, config: &GatewayConfig) -> String {
    render_template(topic.template(&config.transparency), config)
}

/// Every topic's rendered note, in topic order.
pub fn rendered_notes(config: &GatewayConfig) -> Vec<(TransparencyTopic, String)> {
    TransparencyTopic::ALL
        .iter()
        .map(|&t| (t, render_topic(t, config)))
        .collect()
}

/// Emits a non-blocking note when a topic is present and either the
/// cooldown since the last note has elapsed or the topic bypasses it.
pub fn maybe_emit(
    topic: Option<TransparencyTopic>,
    cooldown: &CooldownState,
    turn_index: u64,
    config: &GatewayConfig,
) -> (Option<Intervention>, CooldownState) {
    let Some(topic) = topic else {
        return (None, cooldown.clone());
    };
    let elapsed = match cooldown.global_last_note_turn {
        None => true,
        Some(last) => turn_index.saturating_sub(last) >= u64::from(config.limits.cooldown_turns),
    };
    if !(elapsed || topic.bypasses_cooldown()) {
        return (None, cooldown.clone());
    }
    let mut next = cooldown.clone();
    next.last_note_turn.insert(topic, turn_index);
    next.global_last_note_turn = Some(
        cooldown
            .global_last_note_turn
            .map_or(turn_index, |last| last.max(turn_index)),
    );
    let note = Intervention::new(InterventionKind::TransparencyNote, render_topic(topic, config));
    (Some(note), next)
}
