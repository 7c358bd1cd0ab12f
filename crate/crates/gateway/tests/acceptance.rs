//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Runs without the libtest harness so the lines are
//! always shown.

mod common;

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use literacy_core::coach::{
    generate_hints, score_features, update_skill, ClarityRubric, HintTemplateSet, SkillParams,
};
use literacy_core::disclosure::{interventions_for, redact, CrisisLexicon, DisclosureMonitor};
use literacy_core::harness::{compute_metrics, load_transcript, parse_transcript, Annotator, Condition};
use literacy_core::transparency::{maybe_emit, CooldownState, TransparencyTopic};
use literacy_core::{
    ClarityAssessment, ClarityFeatures, DisclosureLabel, GuidanceLevel, InterventionKind,
    LengthBand, PromptCoach, SensitiveSpan, SkillProfile, SpanCategory, TriggerPatterns, UserTurn,
};
use literacy_gateway::{router, Decision, Gateway, RecordingTransport, ReqwestTransport};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use serde_json::json;

const TAXONOMY_BUDGET: Duration = Duration::from_secs(1);
const GOLD_MIN_UTTERANCES: usize = 60;
const GOLD_MIN_PER_CLASS: usize = 20;
const GOLD_MIN_AGREEMENT: f64 = 0.90;
const GOLD_BUDGET: Duration = Duration::from_secs(5);
const REDACTION_CASES: u32 = 1_000;
const RANDOM_SESSIONS: usize = 100;
const CLARITY_TEXT_CASES: u32 = 1_000;
const SKILL_MAX_UPDATES: i32 = 10;
const EMA_TOLERANCE: f64 = 1e-12;
const COOLDOWN_SEQUENCES: u32 = 10_000;
const LATENCY_BUDGET: Duration = Duration::from_millis(50);
const LATENCY_MAX_CHARS: usize = 1_000;
const LATENCY_SAMPLES: usize = 300;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config() -> literacy_core::GatewayConfig {
    common::config()
}

fn taxonomy() -> Outcome {
    let start = Instant::now();
    let monitor = DisclosureMonitor::bundled();
    let cfg = config();
    let safe = monitor.build_report("I felt anxious today.").label;
    check(safe == DisclosureLabel::Safe, format!("anxious example -> {safe}"))?;
    let personal = monitor.build_report("My friend Sarah\u{2026}").label;
    check(
        personal == DisclosureLabel::Personal,
        format!("Sarah example -> {personal}"),
    )?;
    let phrases = CrisisLexicon::bundled().phrases().to_vec();
    for phrase in &phrases {
        for text in [phrase.clone(), format!("Lately I feel like I {phrase}.")] {
            let report = monitor.build_report(&text);
            check(
                report.label == DisclosureLabel::HighRisk,
                format!("{text:?} -> {}", report.label),
            )?;
            let referral = interventions_for(&report, &cfg)
                .into_iter()
                .find(|i| i.kind == InterventionKind::CrisisReferral);
            check(
                referral.is_some_and(|r| r.referral_links.len() == cfg.referrals.len()),
                format!("{text:?}: no referral with registry links"),
            )?;
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < TAXONOMY_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "2 exemplars + {} crisis phrases (bare and in a sentence) in {elapsed:.2?}",
        phrases.len()
    ))
}

fn annotator() -> Annotator {
    Annotator::new(
        DisclosureMonitor::bundled(),
        PromptCoach::bundled(),
        TriggerPatterns::bundled(),
        config(),
    )
}

fn gold_corpus() -> Outcome {
    let start = Instant::now();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/gold_corpus.jsonl");
    let turns = load_transcript(&path).map_err(|e| e.to_string())?;
    let labeled = turns.iter().filter(|t| t.gold_label.is_some()).count();
    check(labeled >= GOLD_MIN_UTTERANCES, format!("{labeled} labeled"))?;
    for label in DisclosureLabel::ALL {
        let n = turns.iter().filter(|t| t.gold_label == Some(label)).count();
        check(n >= GOLD_MIN_PER_CLASS, format!("{n} {label}"))?;
    }
    let report = compute_metrics(&annotator().annotate(&turns)).map_err(|e| e.to_string())?;
    let a = &report.agreement;
    let agreement = a.label_agreement.unwrap_or(0.0);
    let hr_safe = a.confusions(DisclosureLabel::HighRisk, DisclosureLabel::Safe);
    let elapsed = start.elapsed();
    check(agreement >= GOLD_MIN_AGREEMENT, format!("agreement {agreement:.3}"))?;
    check(hr_safe == 0, format!("{hr_safe} high_risk->safe"))?;
    check(elapsed < GOLD_BUDGET, format!("took {elapsed:?}"))?;
    Ok(format!(
        "{labeled} utterances, agreement {agreement:.3}, high_risk->safe {hr_safe}, {elapsed:.2?}"
    ))
}

fn text_and_spans() -> impl Strategy<Value = (String, Vec<SensitiveSpan>)> {
    let filler = "[a-z ,.]{0,12}";
    let token = ("[a-zA-Z]{0,4}", "[0-9éßøж]", "[a-zA-Z0-9éж]{0,5}")
        .prop_map(|(a, b, c)| a + &b + &c);
    (
        filler,
        prop::collection::vec(
            (token, prop::sample::select(SpanCategory::ALL.to_vec()), filler),
            0..6,
        ),
    )
        .prop_map(|(head, parts)| {
            let mut text = head;
            let mut spans = Vec::new();
            for (token, category, tail) in parts {
                let start = text.len();
                text.push_str(&token);
                spans.push(SensitiveSpan {
                    start,
                    end: text.len(),
                    category,
                    matched_text: token,
                    rule_id: "gen".into(),
                });
                text.push_str(&tail);
            }
            (text, spans)
        })
}

fn redaction() -> Outcome {
    let mut runner = TestRunner::new(PtConfig {
        cases: REDACTION_CASES,
        failure_persistence: None,
        ..PtConfig::default()
    });
    runner
        .run(&text_and_spans(), |(text, spans)| {
            let out = redact(&text, &spans).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for s in &spans {
                prop_assert!(!out.contains(&s.matched_text));
            }
            // outside text survives: strip placeholders in order and compare
            let mut expected = String::new();
            let mut cursor = 0;
            for s in &spans {
                expected.push_str(&text[cursor..s.start]);
                expected.push_str(s.category.placeholder());
                cursor = s.end;
            }
            expected.push_str(&text[cursor..]);
            prop_assert_eq!(out, expected);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{REDACTION_CASES} generated cases"))
}

async fn hold_before_forward() -> Outcome {
    let h = common::harness();
    // scripted
    let out = h
        .gateway
        .handle_turn("scripted", "My friend Sarah\u{2026}")
        .await
        .map_err(|e| e.to_string())?;
    check(!out.is_forwarded() && h.recorder.is_empty(), "personal turn reached upstream")?;
    let id = out.pending_id().unwrap().to_string();
    h.gateway
        .resolve_pending("scripted", &id, Decision::Continue)
        .await
        .map_err(|e| e.to_string())?;
    check(h.recorder.len() == 1, "continue did not forward exactly once")?;
    let out = h
        .gateway
        .handle_turn("scripted-2", "I want to end my life.")
        .await
        .map_err(|e| e.to_string())?;
    check(!out.is_forwarded() && h.recorder.len() == 1, "high-risk turn reached upstream")?;
    h.gateway
        .handle_turn("scripted-3", "I felt anxious today.")
        .await
        .map_err(|e| e.to_string())?;
    check(h.recorder.len() == 2, "safe turn not forwarded exactly once")?;

    let h = Arc::new(common::harness());
    let stats = common::run_interleaved(h, RANDOM_SESSIONS, 2024).await;
    check(
        stats.violations.is_empty(),
        format!("{} violations, first: {:?}", stats.violations.len(), stats.violations.first()),
    )?;
    Ok(format!(
        "{} interleaved sessions, {} turns, {} holds, {} requests = {} forwarded",
        stats.sessions, stats.turns, stats.held, stats.requests, stats.forwarded
    ))
}

async fn locality() -> Outcome {
    use axum::body::Body;
    use axum::http::Request;
    use tower::ServiceExt;

    let mut observed = Vec::new();
    let mut configured = Vec::new();

    // in-process gateway driven over its HTTP router
    let h = common::harness();
    let app = router(h.gateway.clone());
    for text in [
        "I felt anxious today.",
        "My friend Sarah lives in Halifax",
        "Is my data stored anywhere?",
        "I want to end my life.",
        "call me at 902-555-0143",
    ] {
        let req = Request::post("/v1/chat")
            .header("content-type", "application/json")
            .body(Body::from(json!({"session_id": text, "text": text}).to_string()))
            .unwrap();
        app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
    }
    let rs = common::run_interleaved(Arc::new(common::harness()), 20, 7).await;
    check(rs.violations.is_empty(), "randomized run reported violations")?;
    observed.extend(h.recorder.requests().into_iter().map(|r| r.url));
    configured.push(h.gateway.config().upstream.endpoint.clone());

    // real sockets: mock upstream on loopback, real HTTP transport
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let addr = listener.local_addr().unwrap();
    let upstream = axum::Router::new().route(
        "/v1/chat/completions",
        axum::routing::post(|| async {
            axum::Json(json!({"choices": [{"message": {"content": "ok"}}]}))
        }),
    );
    tokio::spawn(async move { axum::serve(listener, upstream).await });
    let mut cfg = config();
    cfg.upstream.endpoint = format!("http://{addr}/v1/chat/completions").parse().unwrap();
    let recorder = RecordingTransport::new(Arc::new(
        ReqwestTransport::new().map_err(|e| e.to_string())?,
    ));
    let gw = Gateway::new(cfg, Arc::new(recorder.clone()))
        .map_err(|e| e.to_string())?
        .with_metrics_path(None);
    for (sid, text) in [("a", "I felt anxious today."), ("b", "My friend Sarah is upset")] {
        let out = gw.handle_turn(sid, text).await.map_err(|e| e.to_string())?;
        if let Some(id) = out.pending_id() {
            gw.resolve_pending(sid, id, Decision::Rephrase("My friend is upset".into()))
                .await
                .map_err(|e| e.to_string())?;
        }
    }
    observed.extend(recorder.requests().into_iter().map(|r| r.url));
    configured.push(gw.config().upstream.endpoint.clone());
    let leaked = recorder.count(|r| r.body.to_string().contains("Sarah"));
    check(leaked == 0, "held text observed on the wire")?;

    let stray: Vec<_> = observed.iter().filter(|u| !configured.contains(u)).collect();
    check(stray.is_empty(), format!("unexpected targets: {stray:?}"))?;
    check(!observed.is_empty(), "no requests observed")?;
    Ok(format!(
        "{} outbound requests observed, all to the configured endpoint",
        observed.len() + rs.requests
    ))
}

fn all_feature_vectors() -> Vec<ClarityFeatures> {
    let mut out = Vec::new();
    for has_topic in [false, true] {
        for has_goal in [false, true] {
            for specificity_hits in 0..=3 {
                for length_band in [LengthBand::TooShort, LengthBand::Ok, LengthBand::TooLong] {
                    for ambiguity_flags in 0..=4 {
                        out.push(ClarityFeatures {
                            has_topic,
                            has_goal,
                            specificity_hits,
                            length_band,
                            ambiguity_flags,
                        });
                    }
                }
            }
        }
    }
    out
}

/// `a <= b` componentwise in the "better prompt" order.
fn dominated(a: &ClarityFeatures, b: &ClarityFeatures) -> bool {
    a.has_topic <= b.has_topic
        && a.has_goal <= b.has_goal
        && a.specificity_hits <= b.specificity_hits
        && (a.length_band == b.length_band || b.length_band == LengthBand::Ok)
        && a.ambiguity_flags >= b.ambiguity_flags
}

fn clarity() -> Outcome {
    let vectors = all_feature_vectors();
    let mut pairs = 0usize;
    for a in &vectors {
        let sa = score_features(a);
        check((1..=5).contains(&sa), format!("{a:?} scored {sa}"))?;
        for b in &vectors {
            if dominated(a, b) {
                pairs += 1;
                let sb = score_features(b);
                check(sa <= sb, format!("{a:?}={sa} > {b:?}={sb}"))?;
            }
        }
    }
    let rubric = ClarityRubric::bundled();
    let mut runner = TestRunner::new(PtConfig {
        cases: CLARITY_TEXT_CASES,
        failure_persistence: None,
        ..PtConfig::default()
    });
    runner
        .run(&"\\PC{0,400}", |text| {
            let s = literacy_core::coach::assess_clarity(&text, &rubric).score;
            prop_assert!((1..=5).contains(&s));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let features = ClarityFeatures {
        has_topic: false,
        has_goal: true,
        specificity_hits: 1,
        length_band: LengthBand::Ok,
        ambiguity_flags: 0,
    };
    let assessment = ClarityAssessment {
        score: score_features(&features),
        features,
        hints: vec![],
        rephrase_options: vec![],
    };
    let (hints, _) = generate_hints(
        "Can you give me two tips for this week?",
        &assessment,
        &SkillProfile::default(),
        &HintTemplateSet::default(),
        5,
    );
    let want = "Would you like to focus on stress, relationships, or study pressure?";
    check(hints.first().map(String::as_str) == Some(want), format!("hint was {hints:?}"))?;
    Ok(format!(
        "{} vectors, {pairs} ordered pairs monotone; {CLARITY_TEXT_CASES} texts in range; topic hint verbatim",
        vectors.len()
    ))
}

fn dynamic_difficulty() -> Outcome {
    let params = SkillParams::default();
    let mut p = SkillProfile::default();
    let mut reached = None;
    for n in 1..=SKILL_MAX_UPDATES {
        let next = update_skill(&p, 5, &params);
        let oracle = 5.0 - 4.0 * 0.7f64.powi(n);
        check(
            (next.rolling_clarity - oracle).abs() <= EMA_TOLERANCE,
            format!("update {n}: {} vs oracle {oracle}", next.rolling_clarity),
        )?;
        check(next.guidance_level >= p.guidance_level, format!("regressed at {n}"))?;
        if reached.is_none() && next.guidance_level == GuidanceLevel::Subtle {
            reached = Some(n);
        }
        p = next;
    }
    let n = reached.ok_or("never reached Subtle")?;
    // closed form: first n with 5 - 4 * 0.7^n >= 3.75
    let oracle_n = (1..).find(|&k| 5.0 - 4.0 * 0.7f64.powi(k) >= 3.75).unwrap();
    check(n == oracle_n, format!("reached at {n}, oracle {oracle_n}"))?;
    let mut regressions = 0;
    for start in 0..=400 {
        let rolling = 1.0 + f64::from(start) / 100.0;
        let q = SkillProfile {
            rolling_clarity: rolling,
            turns_observed: 0,
            guidance_level: params.level_for(rolling),
        };
        if update_skill(&q, 5, &params).guidance_level < q.guidance_level {
            regressions += 1;
        }
    }
    check(regressions == 0, format!("{regressions} regressions"))?;
    Ok(format!("Subtle after {n} updates (oracle {oracle_n}); no regressions over 401 starts"))
}

fn rate_limit() -> Outcome {
    let topic = prop_oneof![
        3 => Just(None),
        3 => Just(Some(TransparencyTopic::DataNotStored)),
        2 => Just(Some(TransparencyTopic::SystemBehavior)),
        1 => Just(Some(TransparencyTopic::DataUse)),
    ];
    let strategy = (1u32..8, prop::collection::vec((1u64..4, topic), 1..30));
    let mut runner = TestRunner::new(PtConfig {
        cases: COOLDOWN_SEQUENCES,
        failure_persistence: None,
        ..PtConfig::default()
    });
    let base = config();
    runner
        .run(&strategy, |(cooldown, steps)| {
            let mut cfg = base.clone();
            cfg.limits.cooldown_turns = cooldown;
            let mut state = CooldownState::default();
            let mut turn = 0u64;
            let mut last: Option<u64> = None;
            for (gap, t) in steps {
                turn += gap;
                let (note, next) = maybe_emit(t, &state, turn, &cfg);
                let expected = match t {
                    None => false,
                    Some(TransparencyTopic::DataUse) => true,
                    Some(_) => last.is_none_or(|l| turn - l >= u64::from(cooldown)),
                };
                prop_assert_eq!(note.is_some(), expected);
                if note.is_some() {
                    last = Some(turn);
                }
                state = next;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{COOLDOWN_SEQUENCES} random sequences"))
}

fn session_lines(id: &str, cond: &str, counts: (usize, usize, usize)) -> Vec<String> {
    let texts = std::iter::repeat_n("I felt anxious today.", counts.0)
        .chain(std::iter::repeat_n("My friend Sarah is upset.", counts.1))
        .chain(std::iter::repeat_n("I want to end my life.", counts.2));
    texts
        .enumerate()
        .map(|(i, t)| {
            json!({"session_id": id, "turn_index": i, "speaker": "user", "text": t,
                   "condition": cond})
            .to_string()
        })
        .collect()
}

fn harness_arithmetic() -> Outcome {
    let a = annotator();
    let turns = parse_transcript(&session_lines("s", "literacy", (7, 2, 1)).join("\n"))
        .map_err(|e| e.to_string())?;
    let r = compute_metrics(&a.annotate(&turns)).map_err(|e| e.to_string())?;
    let p = r.conditions[&Condition::Literacy].proportions.ok_or("no data")?;
    check(
        (p.safe, p.personal, p.high_risk) == (0.7, 0.2, 0.1),
        format!("{p:?}"),
    )?;
    let mut lines = session_lines("b1", "baseline", (4, 4, 2));
    lines.extend(session_lines("b2", "baseline", (4, 4, 2)));
    lines.extend(session_lines("l1", "literacy", (8, 2, 0)));
    lines.extend(session_lines("l2", "literacy", (8, 2, 0)));
    let corpus = lines.join("\n");
    let run = || -> Result<(String, String, f64), String> {
        let turns = parse_transcript(&corpus).map_err(|e| e.to_string())?;
        let r = compute_metrics(&a.annotate(&turns)).map_err(|e| e.to_string())?;
        let b = r.conditions[&Condition::Baseline].proportions.ok_or("no data")?;
        let l = r.conditions[&Condition::Literacy].proportions.ok_or("no data")?;
        Ok((r.to_json(), r.to_markdown(), l.safe - b.safe))
    };
    let first = run()?;
    let second = run()?;
    check(first.0 == second.0 && first.1 == second.1, "runs differ")?;
    // by construction: 16/20 safe vs 8/20 safe
    check(first.2 == 16.0 / 20.0 - 8.0 / 20.0, format!("gap {}", first.2))?;
    Ok(format!(
        "7/2/1 -> {:.3}/{:.3}/{:.3}; byte-identical reruns; safe gap {:.3}",
        p.safe, p.personal, p.high_risk, first.2
    ))
}

fn latency() -> Outcome {
    let cfg = config();
    let engines = literacy_gateway::service::Engines::from_config(cfg).map_err(|e| e.to_string())?;
    let mut runner = TestRunner::deterministic();
    let words = prop::collection::vec(
        prop_oneof![
            "[a-z]{1,9}",
            Just("Sarah".to_string()),
            Just("Halifax".to_string()),
            Just("902-555-0143".to_string()),
            Just("sam@example.org".to_string()),
            Just("end my life".to_string()),
            Just("it".to_string()),
        ],
        1..300,
    );
    let mut worst = Duration::ZERO;
    let mut total = Duration::ZERO;
    for i in 0..LATENCY_SAMPLES {
        let mut text = words
            .new_tree(&mut runner)
            .map_err(|e| e.to_string())?
            .current()
            .join(" ");
        if i % 3 == 0 {
            // push some samples to the length limit
            while text.chars().count() < LATENCY_MAX_CHARS {
                text.push_str(" and then I was diagnosed with asthma in Toronto");
            }
        }
        let text: String = text.chars().take(LATENCY_MAX_CHARS).collect();
        let turn = UserTurn {
            session_id: "latency".into(),
            turn_index: i as u64,
            text,
            received_at: 0,
        };
        let start = Instant::now();
        let pre = engines.pre_inference(&turn, &SkillProfile::default());
        let took = start.elapsed();
        std::hint::black_box(pre);
        worst = worst.max(took);
        total += took;
    }
    check(worst < LATENCY_BUDGET, format!("worst {worst:?}"))?;
    Ok(format!(
        "{LATENCY_SAMPLES} texts <= {LATENCY_MAX_CHARS} chars: worst {worst:.2?}, mean {:.2?}",
        total / LATENCY_SAMPLES as u32
    ))
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .unwrap();
    let results: Vec<(&str, Outcome)> = vec![
        ("taxonomy fidelity", taxonomy()),
        ("gold-corpus agreement", gold_corpus()),
        ("redaction soundness", redaction()),
        ("hold-before-forward", rt.block_on(hold_before_forward())),
        ("locality", rt.block_on(locality())),
        ("clarity rubric properties", clarity()),
        ("dynamic difficulty", dynamic_difficulty()),
        ("transparency rate limit", rate_limit()),
        ("harness determinism & arithmetic", harness_arithmetic()),
        ("latency budget", latency()),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
