use std::sync::Arc;

use pronunciation_core::diagnosis::DEFAULT_ALPHA;
use pronunciation_core::synth::{synthesize, SynthOptions};
use pronunciation_core::{PhonemeClassTable, ProficiencyBand, RatioTable};
use pronunciation_trainer::course::CourseKind;
use pronunciation_trainer::service::SentenceInput;
use pronunciation_trainer::store::{replay, EventLog};
use pronunciation_trainer::{CustomCourseRequest, ErrorCode, ServiceConfig, TrainerService};

fn open(dir: &std::path::Path) -> TrainerService {
    TrainerService::open(ServiceConfig::with_data_dir(dir)).unwrap()
}

/// A second synthetic speaker saying `symbols`.
fn speak(symbols: &[&str]) -> Vec<u8> {
    let opts = SynthOptions {
        f0_hz: 105.0,
        tempo: 0.9,
        seed: 11,
        ..SynthOptions::default()
    };
    synthesize(symbols, &PhonemeClassTable::default(), &opts)
        .unwrap()
        .audio
        .to_wav_bytes()
}

const TEA: [&str; 6] = ["T", "IY", "P", "L", "IY", "Z"];

#[test]
fn matching_attempt_scores_high_and_produces_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let learner = svc.create_learner("Ana").unwrap();
    let bundle = svc
        .submit_attempt(&learner.learner_id, Some("cafe"), "cafe-tea", &speak(&TEA))
        .unwrap();
    assert_eq!(bundle.scorecard.segments.len(), TEA.len());
    let mean = bundle.scorecard.mean_score().unwrap();
    assert!(mean >= 70.0, "{mean}");
    assert!(bundle.scorecard.segments.contains(&bundle.target));
    for id in [
        &bundle.artifacts.recording,
        &bundle.artifacts.exaggerated_audio,
        &bundle.artifacts.animation_script,
    ] {
        assert!(!svc.artifact(id).unwrap().0.is_empty());
    }
    let script =
        String::from_utf8(svc.artifact(&bundle.artifacts.animation_script).unwrap().0).unwrap();
    pronunciation_core::visual::parse_script(&script).unwrap();
}

#[test]
fn consecutive_attempts_accumulate() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let id = svc.create_learner("Ben").unwrap().learner_id;
    let first = svc
        .submit_attempt(&id, None, "cafe-tea", &speak(&TEA))
        .unwrap();
    let other = speak(&["T", "IY", "B", "L", "IY", "Z"]);
    let second = svc.submit_attempt(&id, None, "cafe-tea", &other).unwrap();

    let r1 = first.scorecard.class_means();
    let r2 = second.scorecard.class_means();
    let report = svc.get_report(&id).unwrap();
    assert_eq!(report.attempts, 2);
    for row in &report.classes {
        let expected =
            DEFAULT_ALPHA * r2[&row.class_id] + (1.0 - DEFAULT_ALPHA) * r1[&row.class_id];
        assert!((row.accumulated - expected).abs() < 1e-9, "{row:?}");
        assert_eq!(row.count, 2);
    }
}

#[test]
fn low_band_uses_low_ratio_rows() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let id = svc.create_learner("Cy").unwrap().learner_id;
    // Hissing where a stop and vowel belong scores far below 50.
    let bundle = svc
        .submit_attempt(
            &id,
            Some("cafe"),
            "cafe-tea",
            &speak(&["T", "IY", "S", "S", "IY", "Z"]),
        )
        .unwrap();
    assert_eq!(bundle.band, ProficiencyBand::Low, "{:?}", bundle.target);
    let class = &bundle.target.segment.phoneme.class_id;
    let table = RatioTable::default_table();
    assert_eq!(
        bundle.plan.ratios,
        table.lookup(ProficiencyBand::Low, class)
    );
    assert_eq!(bundle.visual_levels.movement.name(), "strong");
}

#[test]
fn unknown_things_are_reported_by_code() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let id = svc.create_learner("Di").unwrap().learner_id;
    fn code<T>(r: Result<T, pronunciation_trainer::ServiceError>) -> ErrorCode {
        r.map(|_| ()).unwrap_err().code
    }
    assert_eq!(code(svc.get_report("nobody")), ErrorCode::UnknownLearner);
    assert_eq!(
        code(svc.submit_attempt(&id, Some("nope"), "x", b"")),
        ErrorCode::UnknownCourse
    );
    assert_eq!(
        code(svc.submit_attempt(&id, None, "x", b"")),
        ErrorCode::UnknownNode
    );
    assert_eq!(
        code(svc.submit_attempt(&id, None, "cafe-tea", b"RIFF")),
        ErrorCode::BadAudio
    );
    assert_eq!(code(svc.create_learner("  ")), ErrorCode::ValidationError);
    assert_eq!(code(svc.artifact("../etc")), ErrorCode::UnknownArtifact);
}

#[test]
fn branching_and_linear_courses_advance() {
    let dir = tempfile::tempdir().unwrap();
    let svc = open(dir.path());
    let id = svc.create_learner("Eve").unwrap().learner_id;
    let tea = svc.advance_course(&id, "cafe", "cafe-hello", 0).unwrap();
    let coffee = svc.advance_course(&id, "cafe", "cafe-hello", 1).unwrap();
    assert_eq!(tea.node.unwrap().node_id, "cafe-tea");
    assert_eq!(coffee.node.unwrap().node_id, "cafe-coffee");
    assert_eq!(
        svc.advance_course(&id, "cafe", "cafe-hello", 2)
            .unwrap_err()
            .code,
        ErrorCode::UnknownChoice
    );
    let done = svc.advance_course(&id, "cafe", "cafe-thanks", 0).unwrap();
    assert!(done.complete && done.node.is_none());

    let mut at = svc.course_script("basics").unwrap().entry;
    let mut visited = vec![at.clone()];
    loop {
        let out = svc.advance_course(&id, "basics", &at, 0).unwrap();
        match out.node {
            Some(n) => {
                at = n.node_id;
                visited.push(at.clone());
            }
            None => break,
        }
    }
    assert_eq!(visited, ["basics-morning", "basics-water", "basics-bye"]);
}

#[test]
fn custom_courses_are_validated_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let course_id;
    {
        let svc = open(dir.path());
        let id = svc.create_learner("Fay").unwrap().learner_id;
        let sentence = |text: &str, phonemes: &str| SentenceInput {
            text: text.into(),
            phonemes: phonemes.into(),
            reference_wav: None,
            alignment: None,
        };
        let bad = CustomCourseRequest {
            learner_id: Some(id.clone()),
            title: None,
            sentences: vec![sentence("see", "S IY"), sentence("huh", "S QQ")],
        };
        assert_eq!(
            svc.create_custom_course(&bad).unwrap_err().code,
            ErrorCode::UnknownPhoneme
        );
        let empty = CustomCourseRequest {
            learner_id: None,
            title: None,
            sentences: vec![],
        };
        assert_eq!(
            svc.create_custom_course(&empty).unwrap_err().code,
            ErrorCode::ValidationError
        );

        let good = CustomCourseRequest {
            learner_id: Some(id.clone()),
            title: Some("Mine".into()),
            sentences: vec![sentence("see you", "s iy y uw"), sentence("tea", "T IY")],
        };
        let script = svc.create_custom_course(&good).unwrap();
        assert_eq!(script.kind, CourseKind::Custom);
        assert_eq!(script.nodes.len(), 2);
        assert_eq!(script.nodes[0].reference.phonemes, ["S", "IY", "Y", "UW"]);
        course_id = script.course_id.clone();
        svc.submit_attempt(
            &id,
            Some(&course_id),
            &script.entry,
            &speak(&["S", "IY", "Y", "UW"]),
        )
        .unwrap();
    }
    let svc = open(dir.path());
    let script = svc.course_script(&course_id).unwrap();
    assert_eq!(script.title, "Mine");
}

#[test]
fn restart_and_replay_reproduce_the_profile() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        snapshot_every: 2,
        ..ServiceConfig::with_data_dir(dir.path())
    };
    let (id, before, state) = {
        let svc = TrainerService::open(config.clone()).unwrap();
        let id = svc.create_learner("Gus").unwrap().learner_id;
        for symbols in [&TEA[..], &["T", "IY", "B", "L", "IY", "Z"], &TEA[..]] {
            svc.submit_attempt(&id, Some("cafe"), "cafe-tea", &speak(symbols))
                .unwrap();
        }
        (
            id.clone(),
            svc.get_report(&id).unwrap(),
            svc.learner_state(&id).unwrap(),
        )
    };
    // Snapshot after attempt 2 plus one replayed attempt.
    let svc = TrainerService::open(config).unwrap();
    assert_eq!(svc.get_report(&id).unwrap(), before);
    assert_eq!(svc.learner_state(&id).unwrap().profile, state.profile);

    let (_, events) = EventLog::open(&dir.path().join("events.jsonl")).unwrap();
    let replayed = replay(&events);
    assert_eq!(replayed[&id].profile, state.profile);
    assert_eq!(replayed[&id].attempts, 3);
}

#[test]
fn concurrent_attempts_serialize_per_learner() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Arc::new(open(dir.path()));
    let id = svc.create_learner("Hal").unwrap().learner_id;
    let audios = [speak(&TEA), speak(&["T", "IY", "B", "L", "IY", "Z"])];
    let handles: Vec<_> = (0..4)
        .map(|i| {
            let (svc, id, wav) = (svc.clone(), id.clone(), audios[i % 2].clone());
            std::thread::spawn(move || svc.submit_attempt(&id, None, "cafe-tea", &wav).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let live = svc.learner_state(&id).unwrap();
    assert_eq!(live.attempts, 4);
    let (_, events) = EventLog::open(&dir.path().join("events.jsonl")).unwrap();
    assert_eq!(replay(&events)[&id].profile, live.profile);
}
