//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any fails.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use specassist_core::kb::{AnnotatedRecord, RejectionReason, SampleStatus, ValidationConfig, VocabProvenance};
use specassist_core::{
    build_formula, label, parse_formula, render_formal, tokenize, CmpOp, Comparison, ConditionSlot, ConditionValue,
    DaySet, KeywordFrame, KnowledgeBase, LearnedSample, Polarity, Provenance, Recurrence, Session, SessionState,
    SlotKind, SlotValue, SynthesisControls, TimeSlot, TimeSpec,
};
use specassist_service::{router, AppState, ServiceConfig};
use tower::ServiceExt;

const R1: &str = "The indoor concentrations of carbon monoxide should be no more than 7 mg/m3 in any 24 hours period in all the buildings.";
const IVC: &str = "In all the buildings, during weekdays from 2pm to 5pm, the average concentration of tetrachloroethylene should be no more than 0.25 mg/m3.";

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn confirmation() -> Check {
    let kb = KnowledgeBase::seed();
    let mut s = Session::open("acceptance");
    let r = s.handle_message(R1, &kb).map_err(|e| e.to_string())?;
    let f = r.frame_view.ok_or("no frame after R1")?;
    let text = |v: Option<&SlotValue>| v.map(|v| v.text.clone()).unwrap_or_default();
    let got = [
        text(f.entity.as_ref()),
        text(f.quantifier.as_ref()),
        text(f.location.as_ref()),
        text(f.time.as_ref().map(|t| &t.value)),
        text(f.condition.as_ref().map(|c| &c.value)),
    ];
    let want = ["indoor concentrations", "carbon monoxide", "buildings", "24 hours period", "7 mg/m3"];
    ensure(got == want, format!("frame {got:?}"))?;
    let r = s.handle_message("yes", &kb).map_err(|e| e.to_string())?;
    ensure(r.state_after == SessionState::Finalized, format!("state {:?}", r.state_after))?;
    let formal = r.spec_view.ok_or("no spec after yes")?.formal;
    parse_formula(&formal).map_err(|e| format!("{formal}: {e}"))?;
    Ok(formal)
}

fn correction() -> Check {
    let kb = KnowledgeBase::seed();
    let mut s = Session::open("acceptance");
    let before = s.handle_message(R1, &kb).map_err(|e| e.to_string())?.frame_view.ok_or("no frame")?;
    let r = s.handle_message("location all the buildings", &kb).map_err(|e| e.to_string())?;
    ensure(r.state_after == SessionState::AwaitingConfirmation, format!("state {:?}", r.state_after))?;
    ensure(r.spec_view.is_none(), "spec emitted on correction")?;
    let after = r.frame_view.ok_or("no frame after correction")?;
    ensure(after.location.as_ref().map(|l| l.text.as_str()) == Some("all the buildings"), "location not changed")?;
    let mut expected = before;
    expected.location = after.location.clone();
    ensure(after == expected, "other slots changed")?;
    let r = s.handle_message("yes", &kb).map_err(|e| e.to_string())?;
    ensure(r.spec_view.is_some(), "no spec after second confirmation")?;
    Ok("location only; second confirmation required".into())
}

fn clarification() -> Check {
    let kb = KnowledgeBase::seed();
    let mut s = Session::open("acceptance");
    let r = s.handle_message(IVC, &kb).map_err(|e| e.to_string())?;
    ensure(
        r.state_after == SessionState::AwaitingClarification { slot: SlotKind::Time },
        format!("state {:?}", r.state_after),
    )?;
    let r = s.handle_message("weekdays from 2pm to 5pm", &kb).map_err(|e| e.to_string())?;
    let frame = r.frame_view.ok_or("no frame")?;
    let spec = frame.time.as_ref().map(|t| t.spec.clone());
    let want = TimeSpec::Recurrence(Recurrence::new(DaySet::WEEKDAYS, 50_400, 61_200).ok_or("bad recurrence")?);
    ensure(spec == Some(want), format!("time {spec:?}"))?;
    ensure(r.state_after == SessionState::AwaitingConfirmation, format!("state {:?}", r.state_after))?;
    s.handle_message("yes", &kb).map_err(|e| e.to_string())?;
    s.start_new_requirement();
    let r = s.handle_message(IVC, &kb).map_err(|e| e.to_string())?;
    ensure(r.state_after == SessionState::AwaitingConfirmation, "resend needed a clarification")?;
    let again = r.frame_view.ok_or("no frame on resend")?;
    let bytes = |f: &KeywordFrame| serde_json::to_vec(f).expect("frame serializes");
    ensure(bytes(&again) == bytes(&frame), "frame differs on resend")?;
    Ok("Recurrence{Mon-Fri, 50400, 61200}; resend reuses frame".into())
}

fn long_term_learning() -> Check {
    let kb = KnowledgeBase::seed();
    let mut s = Session::open("planner");
    s.handle_message(IVC, &kb).map_err(|e| e.to_string())?;
    s.handle_message("weekdays from 2pm to 5pm", &kb).map_err(|e| e.to_string())?;
    let mut samples = s.close_session();
    samples.push(LearnedSample::pending(IVC, SlotKind::Time, "purple elephants", "mallory"));
    let (next, report) = kb.flush_learned(&samples, &ValidationConfig::default());
    ensure(next.version() == kb.version() + 1, "version did not increment")?;
    let e = next.entry("weekdays from 2pm to 5pm", SlotKind::Time).ok_or("time phrase not learned")?;
    ensure(e.provenance == VocabProvenance::Learned && e.validated, "entry not learned+validated")?;
    let rejected = next.rejection_log().iter().any(|s| {
        s.clarified_value == "purple elephants"
            && s.status == SampleStatus::Rejected(RejectionReason::SpanNotFoundAndUnparseable)
    });
    ensure(rejected, "purple elephants not rejected as SpanNotFoundAndUnparseable")?;
    for snapshot in [&kb, &next] {
        ensure(snapshot.vocabulary().iter().all(|e| e.phrase != "purple elephants"), "rejected phrase in vocabulary")?;
    }
    let mut fresh = Session::open("someone else");
    let r = fresh.handle_message(IVC, &next).map_err(|e| e.to_string())?;
    ensure(r.state_after == SessionState::AwaitingConfirmation, format!("new session state {:?}", r.state_after))?;
    Ok(format!("version {} -> {}, accepted {}, rejected {}", kb.version(), next.version(), report.accepted, report.rejected))
}

fn spans(record: &AnnotatedRecord, kb: &KnowledgeBase) -> Result<BTreeSet<(SlotKind, usize, usize)>, String> {
    let tokens = tokenize(&record.text).map_err(|e| e.to_string())?;
    Ok(label(&tokens, kb).spans().into_iter().map(|s| (s.kind, tokens[s.first].start, tokens[s.last - 1].end)).collect())
}

fn synthesis() -> Check {
    let kb = KnowledgeBase::seed();
    let records = kb.synthesize(&SynthesisControls::with_default_rates(1000, 0)).map_err(|e| e.to_string())?;
    let mut report = Vec::new();
    for (kind, rate) in [(SlotKind::Location, 0.276), (SlotKind::Quantifier, 0.291), (SlotKind::Time, 0.90)] {
        let missing =
            records.iter().filter(|r| r.spans.iter().all(|s| s.kind != kind)).count() as f64 / records.len() as f64;
        ensure((missing - rate).abs() <= 0.03, format!("{kind} missing {missing:.3} vs {rate}"))?;
        report.push(format!("{kind} {missing:.3}"));
    }
    let closed = kb.synthesize(&SynthesisControls::new(1000, 1)).map_err(|e| e.to_string())?;
    let mut recovered = 0;
    for r in &closed {
        let planted: BTreeSet<_> = r.spans.iter().map(|s| (s.kind, s.start, s.end)).collect();
        if spans(r, &kb)? == planted {
            recovered += 1;
        }
    }
    ensure(recovered == closed.len(), format!("zero-rate closure {recovered}/{}", closed.len()))?;
    Ok(format!("{}; closure {recovered}/{}", report.join(", "), closed.len()))
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const FIRST: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    const REST: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789 ,.'/%&#:()-";
    let len = rng.random_range(0..20);
    let mut s = String::new();
    s.push(FIRST[rng.random_range(0..FIRST.len())] as char);
    for _ in 0..len {
        s.push(REST[rng.random_range(0..REST.len())] as char);
    }
    s
}

fn random_frame(rng: &mut ChaCha8Rng, kb: &KnowledgeBase) -> KeywordFrame {
    let v = |t: String| SlotValue::new(t, Provenance::Extracted);
    let spec = match rng.random_range(0..4) {
        0 => TimeSpec::Always,
        1 => TimeSpec::Window { duration: rng.random_range(1..10_000_000) },
        2 => TimeSpec::Horizon { duration: rng.random_range(1..10_000_000) },
        _ => loop {
            let days = DaySet::from_bits(rng.random_range(1..128)).expect("7 bits");
            let a = rng.random_range(0..86_400);
            let b = rng.random_range(0..86_400);
            if let Some(r) = Recurrence::new(days, a.min(b), a.max(b)) {
                break TimeSpec::Recurrence(r);
            }
        },
    };
    let op = CmpOp::ALL[rng.random_range(0..CmpOp::ALL.len())];
    let (text, value) = if rng.random_bool(0.7) {
        let magnitude = match rng.random_range(0..3) {
            0 => rng.random_range(-1.0e6..1.0e6),
            1 => f64::from_bits(rng.random::<u64>() & !(0x7ff << 52) | (rng.random_range(1..2046u64) << 52)),
            _ => rng.random_range(0..1000) as f64,
        };
        let units = ["", "mg/m3", "dB", "%", "km/h", "parts per million", "µg/m3"];
        let unit = units[rng.random_range(0..units.len())].to_string();
        (format!("{magnitude} {unit}"), ConditionValue::Number { magnitude, unit })
    } else {
        let levels = ["hazardous", "moderate", "good", "quiet"];
        let level = levels[rng.random_range(0..levels.len())];
        let (scale, index) = kb.find_level(level).expect("default scale");
        (level.to_string(), ConditionValue::Ordinal { level: level.into(), scale: scale.into(), index })
    };
    KeywordFrame {
        entity: Some(v(random_text(rng))),
        quantifier: rng.random_bool(0.5).then(|| v(random_text(rng))),
        location: Some(v(random_text(rng))),
        time: Some(TimeSlot { value: v("time".into()), spec }),
        condition: Some(ConditionSlot {
            value: v(text),
            polarity: Some(Polarity { op, negated: rng.random_bool(0.2) }),
            comparison: Some(Comparison { op, value }),
        }),
    }
}

fn round_trip() -> Check {
    let kb = KnowledgeBase::seed();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut failures = 0;
    let mut first = None;
    for _ in 0..1000 {
        let frame = random_frame(&mut rng, &kb);
        let f = build_formula(&frame).map_err(|e| e.to_string())?;
        let text = render_formal(&f);
        if parse_formula(&text).ok().as_ref() != Some(&f) {
            failures += 1;
            first.get_or_insert(text);
        }
    }
    ensure(failures == 0, format!("{failures} failures, first: {first:?}"))?;
    Ok("1000 frames, 0 failures".into())
}

fn batch_parity() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input: String = KnowledgeBase::seed_records().iter().map(|r| r.text.clone() + "\n").collect();
    let kb_path = dir.path().join("kb.json");
    let in_path = dir.path().join("reqs.txt");
    let out_path = dir.path().join("out.jsonl");
    std::fs::write(&kb_path, KnowledgeBase::seed().save()).map_err(|e| e.to_string())?;
    std::fs::write(&in_path, &input).map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_specassist"))
        .args(["convert", "--input"])
        .arg(&in_path)
        .arg("--kb")
        .arg(&kb_path)
        .arg("--output")
        .arg(&out_path)
        .env("NO_COLOR", "1")
        .output()
        .map_err(|e| e.to_string())?
        .status;
    ensure(matches!(status.code(), Some(0 | 2)), format!("convert exited {status}"))?;
    let cli: Vec<Value> = std::fs::read_to_string(&out_path)
        .map_err(|e| e.to_string())?
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;

    let kb = KnowledgeBase::load(&std::fs::read(&kb_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let app = router(AppState::new(ServiceConfig::default(), kb));
    let api: Value = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?.block_on(async {
        let req = Request::post("/api/batch").header("content-type", "text/plain").body(Body::from(input)).unwrap();
        let resp = app.oneshot(req).await.unwrap();
        serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
    });
    ensure(Value::Array(cli.clone()) == api, "CLI and API outcomes differ")?;
    ensure(cli.len() == 6, format!("{} outcomes", cli.len()))?;
    ensure(cli[..4].iter().all(|o| o["status"] == "ok"), "R1-R4 not all ok")?;
    for o in &cli {
        match o["status"].as_str() {
            Some("ok") => {}
            Some("needs_clarification") => ensure(!o["missing"].as_array().is_none_or(Vec::is_empty), "empty missing")?,
            other => return Err(format!("line {}: status {other:?}", o["line"])),
        }
    }
    // A line lacking a required slot must not be guessed.
    let kb = KnowledgeBase::seed();
    let incomplete = specassist_core::convert_batch(IVC, &kb);
    ensure(
        matches!(&incomplete[0], specassist_core::BatchOutcome::NeedsClarification { missing, .. } if missing == &[SlotKind::Time]),
        "unseen time was guessed",
    )?;
    let statuses: Vec<&str> = cli.iter().filter_map(|o| o["status"].as_str()).collect();
    Ok(format!("identical; {statuses:?}"))
}

fn is_affirmative(text: &str) -> bool {
    let t = text.trim().trim_end_matches(['!', '.']).to_lowercase();
    matches!(t.as_str(), "yes" | "y" | "confirm" | "correct" | "ok")
}

fn safety() -> Check {
    let kb = KnowledgeBase::seed();
    let vocab = [
        R1,
        IVC,
        "hello world",
        "yes",
        "Yes!",
        "ok.",
        "no",
        "nope",
        "",
        "   ",
        "weekdays from 2pm to 5pm",
        "purple elephants",
        "location all the buildings",
        "time every day",
        "condition at most 3 mg/m3",
        "entity noise level",
        "buildings",
        "__new__",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sequences = 2000;
    let mut specs = 0;
    for seq in 0..sequences {
        let mut s = Session::open("acceptance");
        for step in 0..rng.random_range(1..25) {
            let msg = vocab[rng.random_range(0..vocab.len())];
            if msg == "__new__" {
                s.start_new_requirement();
                continue;
            }
            let before = s.state();
            let Ok(reply) = s.handle_message(msg, &kb) else { continue };
            if reply.spec_view.is_some() {
                specs += 1;
                let allowed = before == SessionState::AwaitingConfirmation && is_affirmative(msg);
                ensure(allowed, format!("sequence {seq} step {step}: spec after {msg:?} in {before:?}"))?;
                ensure(reply.state_after == SessionState::Finalized, "spec without Finalized")?;
            }
        }
    }
    ensure(specs > 0, "no spec was ever emitted")?;
    Ok(format!("{sequences} sequences, {specs} specs, 0 violations"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("Confirmation transcript", Duration::from_secs(1), confirmation),
        ("Correction transcript", Duration::from_secs(1), correction),
        ("Clarification transcript", Duration::from_secs(1), clarification),
        ("Long-term learning", Duration::from_secs(1), long_term_learning),
        ("Synthesis controls", Duration::from_secs(10), synthesis),
        ("Formula round-trip", Duration::from_secs(5), round_trip),
        ("Batch parity", Duration::from_secs(2), batch_parity),
        ("State-machine safety", Duration::MAX, safety),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:.0?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("[PASS] {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
