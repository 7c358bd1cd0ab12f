#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use literacy_core::config::{GatewayConfig, ReferralEntry};
use literacy_gateway::transport::{TransportError, TransportResponse};
use literacy_gateway::{Gateway, RecordingTransport, Transport};
use serde_json::{json, Value};
use url::Url;

pub const ENDPOINT: &str = "http://127.0.0.1:8081/v1/chat/completions";

pub fn config() -> GatewayConfig {
    GatewayConfig::with_defaults(
        ENDPOINT.parse().unwrap(),
        vec![
            ReferralEntry {
                name: "Campus counselling".into(),
                url: "https://counselling.example.org".into(),
                region: "NS".into(),
            },
            ReferralEntry {
                name: "Crisis line".into(),
                url: "https://crisis.example.org".into(),
                region: String::new(),
            },
        ],
    )
}

/// In-process upstream: replies `echo: <last user message>`, or with the
/// next scripted status if one is queued.
#[derive(Default)]
pub struct MockUpstream {
    failures: Mutex<VecDeque<u16>>,
}

impl MockUpstream {
    pub fn fail_next(&self, status: u16) {
        self.failures.lock().unwrap().push_back(status);
    }
}

pub fn last_user_text(body: &Value) -> String {
    body["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_string()
}

#[async_trait]
impl Transport for MockUpstream {
    async fn post_json(
        &self,
        _url: &Url,
        _bearer: Option<&str>,
        body: &Value,
        _timeout: Duration,
    ) -> Result<TransportResponse, TransportError> {
        if let Some(status) = self.failures.lock().unwrap().pop_front() {
            return Ok(TransportResponse {
                status,
                body: "{\"error\":\"scripted\"}".into(),
            });
        }
        let reply = json!({"choices": [{"message": {"role": "assistant",
            "content": format!("echo: {}", last_user_text(body))}}]});
        Ok(TransportResponse {
            status: 200,
            body: reply.to_string(),
        })
    }
}

pub struct Harness {
    pub gateway: Arc<Gateway>,
    pub recorder: RecordingTransport,
    pub mock: Arc<MockUpstream>,
}

pub fn harness_with(config: GatewayConfig) -> Harness {
    let mock = Arc::new(MockUpstream::default());
    let recorder = RecordingTransport::new(mock.clone());
    let gateway = Gateway::new(config, Arc::new(recorder.clone()))
        .unwrap()
        .with_metrics_path(None);
    Harness {
        gateway: Arc::new(gateway),
        recorder,
        mock,
    }
}

pub fn harness() -> Harness {
    harness_with(config())
}

impl Harness {
    pub fn upstream_texts(&self) -> Vec<String> {
        self.recorder
            .requests()
            .iter()
            .map(|r| last_user_text(&r.body))
            .collect()
    }

    /// Every recorded request went to the configured endpoint.
    pub fn assert_local(&self) {
        let endpoint = &self.gateway.config().upstream.endpoint;
        for r in self.recorder.requests() {
            assert_eq!(&r.url, endpoint, "unexpected outbound target");
        }
    }
}

// ---- randomized interleaved sessions ----

use literacy_core::{DisclosureLabel, OptionAction};
use literacy_gateway::{Decision, TurnOutcome};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub const SAFE_TEXTS: &[&str] = &[
    "I felt anxious today.",
    "How can I stop procrastinating on my essay?",
    "Give me two tips for sleeping better this week.",
    "What is a good way to take study breaks?",
];
pub const PERSONAL_TEXTS: &[&str] = &[
    "My friend Sarah is ignoring me.",
    "I live in Halifax and feel lonely.",
    "My sister Priya keeps comparing me to her.",
    "You can text me at 902-555-0143.",
];
pub const CRISIS_TEXTS: &[&str] = &["I want to end my life.", "I keep thinking about killing myself."];

#[derive(Debug, Default, Clone)]
pub struct RunStats {
    pub sessions: usize,
    pub turns: usize,
    pub held: usize,
    pub forwarded: usize,
    pub requests: usize,
    pub violations: Vec<String>,
}

/// Letters-only tag, so it cannot trip any digit-based rule.
fn tag(session: usize, turn: usize) -> String {
    let enc = |mut n: usize| {
        let mut s = String::new();
        loop {
            s.push((b'a' + (n % 26) as u8) as char);
            n /= 26;
            if n == 0 {
                break s;
            }
        }
    };
    format!("zq{}x{}", enc(session), enc(turn))
}

fn requests_containing(h: &Harness, needle: &str) -> usize {
    h.recorder.count(|r| last_user_text(&r.body).contains(needle))
}

async fn run_session(h: Arc<Harness>, session: usize, seed: u64) -> RunStats {
    let mut rng = StdRng::seed_from_u64(seed);
    let sid = format!("session-{session}");
    let block = h.gateway.config().limits.block_high_risk_forwarding;
    let mut stats = RunStats::default();
    let turns = rng.random_range(3..9);
    for turn in 0..turns {
        let pool = match rng.random_range(0..10) {
            0..=4 => SAFE_TEXTS,
            5..=8 => PERSONAL_TEXTS,
            _ => CRISIS_TEXTS,
        };
        let marker = tag(session, turn);
        let text = format!("{} {marker}", pool[rng.random_range(0..pool.len())]);
        let label = h.gateway.engines().monitor.build_report(&text).label;
        stats.turns += 1;
        let mut outcome = h.gateway.handle_turn(&sid, &text).await.unwrap();
        let mut rounds = 0;
        while let TurnOutcome::Held { pending_id, interventions, .. } = &outcome {
            stats.held += 1;
            if label == DisclosureLabel::Safe && rounds == 0 {
                stats.violations.push(format!("{sid}: safe text held: {text}"));
            }
            if requests_containing(&h, &marker) != 0 {
                stats.violations.push(format!("{sid}: held text reached upstream: {text}"));
            }
            tokio::task::yield_now().await;
            let may_continue = !(label == DisclosureLabel::HighRisk && block);
            let suggested = interventions[0].options.iter().find_map(|o| match &o.action {
                OptionAction::RephraseWith(t) => Some(t.clone()),
                _ => None,
            });
            let decision = if may_continue && rounds == 0 && rng.random_bool(0.5) {
                Decision::Continue
            } else {
                Decision::Rephrase(suggested.expect("reflection offers a rephrase"))
            };
            let continued = decision == Decision::Continue;
            outcome = h
                .gateway
                .resolve_pending(&sid, pending_id, decision)
                .await
                .unwrap();
            rounds += 1;
            if continued && requests_containing(&h, &text) != 1 {
                stats.violations.push(format!("{sid}: continue did not forward once: {text}"));
            }
            if rounds > 3 {
                stats.violations.push(format!("{sid}: rephrase loop on {text}"));
                break;
            }
        }
        if outcome.is_forwarded() {
            stats.forwarded += 1;
            if outcome.trace().last() != Some(&literacy_gateway::Stage::Transparency) {
                stats.violations.push(format!("{sid}: incomplete trace"));
            }
        }
        if label != DisclosureLabel::Safe && rounds == 0 {
            stats.violations.push(format!("{sid}: sensitive text forwarded unheld: {text}"));
        }
        if requests_containing(&h, &marker) != 1 {
            stats.violations.push(format!("{sid}: turn {turn} not forwarded exactly once"));
        }
        tokio::task::yield_now().await;
    }
    stats
}

/// Runs `sessions` concurrent randomized sessions against one gateway.
pub async fn run_interleaved(h: Arc<Harness>, sessions: usize, seed: u64) -> RunStats {
    let mut master = StdRng::seed_from_u64(seed);
    let tasks: Vec<_> = (0..sessions)
        .map(|s| tokio::spawn(run_session(h.clone(), s, master.random())))
        .collect();
    let mut total = RunStats {
        sessions,
        ..RunStats::default()
    };
    for t in tasks {
        let s = t.await.unwrap();
        total.turns += s.turns;
        total.held += s.held;
        total.forwarded += s.forwarded;
        total.violations.extend(s.violations);
    }
    total.requests = h.recorder.len();
    if total.requests != total.forwarded {
        total.violations.push(format!(
            "{} upstream requests for {} forwarded outcomes",
            total.requests, total.forwarded
        ));
    }
    let endpoint = &h.gateway.config().upstream.endpoint;
    if h.recorder.requests().iter().any(|r| &r.url != endpoint) {
        total.violations.push("request to a non-configured target".into());
    }
    total
}
