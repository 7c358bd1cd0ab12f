//! Privacy-preserving AI literacy layer: disclosure detection and redaction,
//! prompt-clarity coaching, transparency notes, count-only tallies and an
//! offline transcript harness. No I/O beyond reading local files.

pub mod coach;
pub mod config;
pub mod disclosure;
pub mod harness;
pub mod lexicon;
pub mod model;
pub mod tallies;
pub mod transparency;

pub use coach::PromptCoach;
pub use config::{load_config, parse_config, ConfigError, GatewayConfig};
pub use disclosure::{interventions_for, redact, DisclosureMonitor, SpanDetector};
pub use model::*;
pub use transparency::{detect_trigger, maybe_emit, CooldownState, TransparencyTopic, TriggerPatterns};
