//! The training loop behind the HTTP API.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use base64::Engine;
use pronunciation_core::alignment::{align, load_alignment};
use pronunciation_core::diagnosis::{
    score_attempt, select_target_phoneme, TemplateBank, TemplateScorer,
};
use pronunciation_core::exaggeration::{apply_plan, plan_exaggeration};
use pronunciation_core::phoneme::FORMAT_VERSION;
use pronunciation_core::ratios::load_ratio_table;
use pronunciation_core::synth::{self, SynthOptions};
use pronunciation_core::visual::{
    build_script, retime_for_stretch, serialize_script, AnnotationLibrary, VisemeLibrary,
    VisualLevels,
};
use pronunciation_core::{AudioBuffer, PhonemeClassTable, PhonemeSegment, RatioTable};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::course::{
    bundled_sources, parse_phonemes, Choice, CourseError, CourseKind, CourseNode, CourseScript,
    CourseSource, NodeReference,
};
use crate::model::{
    AttemptRecord, FeedbackArtifacts, FeedbackBundle, Learner, LearnerState, Report,
};
use crate::store::{
    apply_event, ArtifactKind, ArtifactStore, Event, EventLog, SnapshotStore, StoreError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Request,
    Ingest,
    Alignment,
    Scoring,
    Selection,
    AudioExaggeration,
    VisualExaggeration,
    Course,
    Storage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownLearner,
    UnknownCourse,
    UnknownNode,
    AmbiguousNode,
    UnknownChoice,
    UnknownArtifact,
    UnknownPhoneme,
    BadAudio,
    ValidationError,
    PipelineError,
    StorageError,
}

macro_rules! snake_display {
    ($ty:ty) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = serde_json::to_value(self).expect("unit variant");
                f.write_str(v.as_str().expect("string"))
            }
        }
    };
}
snake_display!(Stage);
snake_display!(ErrorCode);

/// Error body `{stage, code, message}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceError {
    pub stage: Stage,
    pub code: ErrorCode,
    pub message: String,
}

impl ServiceError {
    pub fn new(stage: Stage, code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            stage,
            code,
            message: message.into(),
        }
    }

    fn pipeline(stage: Stage, err: impl fmt::Display) -> Self {
        Self::new(stage, ErrorCode::PipelineError, err.to_string())
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(Stage::Request, ErrorCode::ValidationError, message)
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed ({}): {}", self.stage, self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        Self::new(Stage::Storage, ErrorCode::StorageError, e.to_string())
    }
}

impl From<CourseError> for ServiceError {
    fn from(e: CourseError) -> Self {
        let code = match e {
            CourseError::UnknownPhoneme { .. } => ErrorCode::UnknownPhoneme,
            _ => ErrorCode::ValidationError,
        };
        Self::new(Stage::Course, code, e.to_string())
    }
}

fn unknown_learner(id: &str) -> ServiceError {
    ServiceError::new(
        Stage::Request,
        ErrorCode::UnknownLearner,
        format!("no learner {id}"),
    )
}

fn unknown_course(id: &str) -> ServiceError {
    ServiceError::new(
        Stage::Request,
        ErrorCode::UnknownCourse,
        format!("no course {id}"),
    )
}

fn unknown_node(id: &str) -> ServiceError {
    ServiceError::new(
        Stage::Request,
        ErrorCode::UnknownNode,
        format!("no node {id}"),
    )
}

/// Reference material of one course node, ready for scoring.
struct NodeAssets {
    audio: AudioBuffer,
    segments: Vec<PhonemeSegment>,
    bank: TemplateBank,
}

struct CourseEntry {
    script: CourseScript,
    assets: BTreeMap<String, Arc<NodeAssets>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseSummary {
    pub course_id: String,
    pub kind: CourseKind,
    pub title: String,
    pub entry: String,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvanceOutcome {
    pub format_version: u32,
    pub course_id: String,
    pub complete: bool,
    pub node: Option<CourseNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceInput {
    pub text: String,
    /// Space-separated phoneme symbols.
    pub phonemes: String,
    /// Base64 WAV; synthesized when absent.
    #[serde(default)]
    pub reference_wav: Option<String>,
    /// Interval-format alignment of `reference_wav`.
    #[serde(default)]
    pub alignment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomCourseRequest {
    #[serde(default)]
    pub learner_id: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
    pub sentences: Vec<SentenceInput>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct TrainerService {
    config: ServiceConfig,
    classes: PhonemeClassTable,
    ratios: RatioTable,
    visemes: VisemeLibrary,
    annotations: AnnotationLibrary,
    scorer: TemplateScorer,
    log: Mutex<EventLog>,
    artifacts: ArtifactStore,
    snapshots: SnapshotStore,
    learners: RwLock<BTreeMap<String, Arc<Mutex<LearnerState>>>>,
    courses: RwLock<BTreeMap<String, Arc<CourseEntry>>>,
}

impl TrainerService {
    /// Opens the data directory, replaying the event log on top of any snapshots.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let classes = PhonemeClassTable::default();
        let ratios = match &config.ratio_table {
            Some(path) => {
                let doc = std::fs::read_to_string(path).map_err(|e| {
                    ServiceError::validation(format!("ratio table {}: {e}", path.display()))
                })?;
                load_ratio_table(&doc, &classes)
                    .map_err(|e| ServiceError::validation(e.to_string()))?
            }
            None => RatioTable::default_table(),
        };
        let dir = &config.data_dir;
        std::fs::create_dir_all(dir).map_err(|e| StoreError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let (log, events) = EventLog::open(&dir.join("events.jsonl"))?;
        let service = Self {
            artifacts: ArtifactStore::open(&dir.join("artifacts"))?,
            snapshots: SnapshotStore::open(&dir.join("snapshots"))?,
            config,
            classes,
            ratios,
            visemes: VisemeLibrary::default(),
            annotations: AnnotationLibrary::default(),
            scorer: TemplateScorer::default(),
            log: Mutex::new(log),
            learners: RwLock::new(BTreeMap::new()),
            courses: RwLock::new(BTreeMap::new()),
        };
        for source in bundled_sources() {
            let script = service.resolve_source(&source)?;
            service.register_course(script)?;
        }
        service.restore(&events)?;
        Ok(service)
    }

    fn restore(&self, events: &[(u64, Event)]) -> Result<(), ServiceError> {
        let mut learners = BTreeMap::new();
        for (seq, event) in events {
            match event {
                Event::LearnerCreated(l) => {
                    let state = match self.snapshots.load(l)? {
                        Some(snap) => snap,
                        None => LearnerState::new(l.clone(), *seq),
                    };
                    learners.insert(l.learner_id.clone(), state);
                }
                Event::CourseCreated(script) => self.register_course(script.clone())?,
                Event::AttemptRecorded(_) => apply_event(&mut learners, *seq, event),
            }
        }
        let mut map = self.learners.write().unwrap_or_else(|e| e.into_inner());
        for (id, state) in learners {
            map.insert(id, Arc::new(Mutex::new(state)));
        }
        Ok(())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn classes(&self) -> &PhonemeClassTable {
        &self.classes
    }

    fn synthesize_reference(
        &self,
        course_id: &str,
        node_id: &str,
        symbols: &[String],
    ) -> Result<NodeReference, ServiceError> {
        let refs: Vec<&str> = symbols.iter().map(String::as_str).collect();
        let utt =
            synth::synthesize(&refs, &self.classes, &SynthOptions::default()).map_err(|e| {
                ServiceError::new(Stage::Course, ErrorCode::UnknownPhoneme, e.to_string())
            })?;
        let audio_id = format!("ref-{course_id}-{node_id}");
        self.artifacts
            .put_if_absent(&audio_id, ArtifactKind::Wav, &utt.audio.to_wav_bytes())?;
        Ok(NodeReference {
            phonemes: symbols.to_vec(),
            audio_id,
            segments: utt.segments,
        })
    }

    fn resolve_source(&self, source: &CourseSource) -> Result<CourseScript, ServiceError> {
        let nodes = source
            .node
            .iter()
            .map(|n| {
                let symbols = parse_phonemes(&n.node_id, &n.phonemes, &self.classes)?;
                Ok(CourseNode {
                    node_id: n.node_id.clone(),
                    prompt: n.prompt.clone(),
                    text: n.text.clone(),
                    reference: self.synthesize_reference(
                        &source.course_id,
                        &n.node_id,
                        &symbols,
                    )?,
                    choices: n.choices.clone(),
                })
            })
            .collect::<Result<Vec<_>, ServiceError>>()?;
        Ok(CourseScript {
            format_version: FORMAT_VERSION,
            course_id: source.course_id.clone(),
            kind: source.kind,
            title: source.title.clone(),
            entry: source.entry.clone(),
            nodes,
        })
    }

    fn register_course(&self, script: CourseScript) -> Result<(), ServiceError> {
        script.validate()?;
        let mut assets = BTreeMap::new();
        for node in &script.nodes {
            let (bytes, _) = self
                .artifacts
                .get(&node.reference.audio_id)?
                .ok_or_else(|| {
                    ServiceError::new(
                        Stage::Storage,
                        ErrorCode::UnknownArtifact,
                        format!("reference audio {} is missing", node.reference.audio_id),
                    )
                })?;
            let audio = AudioBuffer::from_wav_bytes(&bytes).map_err(|e| {
                ServiceError::new(Stage::Course, ErrorCode::BadAudio, e.to_string())
            })?;
            let bank = TemplateBank::from_reference(&audio, &node.reference.segments)
                .map_err(|e| ServiceError::pipeline(Stage::Scoring, e))?;
            assets.insert(
                node.node_id.clone(),
                Arc::new(NodeAssets {
                    audio,
                    segments: node.reference.segments.clone(),
                    bank,
                }),
            );
        }
        self.courses
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(
                script.course_id.clone(),
                Arc::new(CourseEntry { script, assets }),
            );
        Ok(())
    }

    pub fn create_learner(&self, display_name: &str) -> Result<Learner, ServiceError> {
        let name = display_name.trim();
        if name.is_empty() {
            return Err(ServiceError::validation("display name is empty"));
        }
        let learner = Learner {
            learner_id: format!("l-{}", uuid::Uuid::new_v4().simple()),
            display_name: name.to_owned(),
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let mut map = self.learners.write().unwrap_or_else(|e| e.into_inner());
        let seq = lock(&self.log).append(&Event::LearnerCreated(learner.clone()))?;
        map.insert(
            learner.learner_id.clone(),
            Arc::new(Mutex::new(LearnerState::new(learner.clone(), seq))),
        );
        Ok(learner)
    }

    fn learner(&self, id: &str) -> Result<Arc<Mutex<LearnerState>>, ServiceError> {
        self.learners
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| unknown_learner(id))
    }

    pub fn learner_state(&self, id: &str) -> Result<LearnerState, ServiceError> {
        let learner = self.learner(id)?;
        let state = lock(&learner).clone();
        Ok(state)
    }

    fn course(&self, id: &str) -> Result<Arc<CourseEntry>, ServiceError> {
        self.courses
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| unknown_course(id))
    }

    pub fn course_script(&self, id: &str) -> Result<CourseScript, ServiceError> {
        Ok(self.course(id)?.script.clone())
    }

    pub fn list_courses(&self) -> Vec<CourseSummary> {
        self.courses
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .map(|c| CourseSummary {
                course_id: c.script.course_id.clone(),
                kind: c.script.kind,
                title: c.script.title.clone(),
                entry: c.script.entry.clone(),
                nodes: c.script.nodes.len(),
            })
            .collect()
    }

    /// Finds the node, searching every course when `course_id` is absent.
    fn resolve_node(
        &self,
        course_id: Option<&str>,
        node_id: &str,
    ) -> Result<(String, Arc<NodeAssets>), ServiceError> {
        if let Some(cid) = course_id {
            let course = self.course(cid)?;
            let assets = course
                .assets
                .get(node_id)
                .ok_or_else(|| unknown_node(node_id))?;
            return Ok((cid.to_owned(), assets.clone()));
        }
        let courses = self.courses.read().unwrap_or_else(|e| e.into_inner());
        let mut hits = courses.values().filter_map(|c| {
            c.assets
                .get(node_id)
                .map(|a| (c.script.course_id.clone(), a.clone()))
        });
        let first = hits.next().ok_or_else(|| unknown_node(node_id))?;
        if hits.next().is_some() {
            return Err(ServiceError::new(
                Stage::Request,
                ErrorCode::AmbiguousNode,
                format!("node {node_id} exists in several courses; give course_id"),
            ));
        }
        Ok(first)
    }

    /// Align, score, accumulate, select, band, then render audio and visual feedback.
    pub fn submit_attempt(
        &self,
        learner_id: &str,
        course_id: Option<&str>,
        node_id: &str,
        wav: &[u8],
    ) -> Result<FeedbackBundle, ServiceError> {
        let learner = self.learner(learner_id)?;
        let (course_id, assets) = self.resolve_node(course_id, node_id)?;
        let audio = AudioBuffer::from_wav_bytes(wav)
            .map_err(|e| ServiceError::new(Stage::Ingest, ErrorCode::BadAudio, e.to_string()))?;
        let attempt_id = format!("a-{}", uuid::Uuid::new_v4().simple());

        let aligned = align(&audio, &assets.audio, &assets.segments)
            .map_err(|e| ServiceError::pipeline(Stage::Alignment, e))?;
        let scorecard = score_attempt(
            &attempt_id,
            &audio,
            &aligned.segments,
            &assets.bank,
            &self.scorer,
        )
        .map_err(|e| ServiceError::pipeline(Stage::Scoring, e))?;

        // Held until the attempt is logged so accumulation follows log order.
        let mut state = lock(&learner);
        let projected = state.profile.accumulated(&scorecard);
        let target = select_target_phoneme(&scorecard, &projected)
            .map_err(|e| ServiceError::pipeline(Stage::Selection, e))?
            .clone();
        let index = scorecard
            .segments
            .iter()
            .position(|s| *s == target)
            .expect("selected segment belongs to the scorecard");
        let ref_target = &assets.segments[index];
        let band = projected.band_of(&target.segment.phoneme.class_id);

        let plan = plan_exaggeration(&assets.segments, ref_target, band, &self.ratios)
            .map_err(|e| ServiceError::pipeline(Stage::AudioExaggeration, e))?;
        let exaggerated = apply_plan(&assets.audio, &plan)
            .map_err(|e| ServiceError::pipeline(Stage::AudioExaggeration, e))?;
        let retimed = retime_for_stretch(&assets.segments, ref_target, exaggerated.target_end_ms);
        let visual_levels = VisualLevels::for_band(band);
        let script = build_script(
            &retimed,
            &retimed[index],
            visual_levels,
            &self.visemes,
            &self.annotations,
        )
        .map_err(|e| ServiceError::pipeline(Stage::VisualExaggeration, e))?;

        let artifacts = FeedbackArtifacts {
            recording: format!("{attempt_id}-recording"),
            exaggerated_audio: format!("{attempt_id}-audio"),
            animation_script: format!("{attempt_id}-script"),
        };
        self.artifacts
            .put(&artifacts.recording, ArtifactKind::Wav, wav)?;
        self.artifacts.put(
            &artifacts.exaggerated_audio,
            ArtifactKind::Wav,
            &exaggerated.audio.to_wav_bytes(),
        )?;
        self.artifacts.put(
            &artifacts.animation_script,
            ArtifactKind::Json,
            serialize_script(&script).as_bytes(),
        )?;

        let record = AttemptRecord {
            attempt_id: attempt_id.clone(),
            learner_id: learner_id.to_owned(),
            course_id: course_id.clone(),
            node_id: node_id.to_owned(),
            scorecard: scorecard.clone(),
            target: target.clone(),
            band,
            plan: plan.clone(),
            visual_levels,
            artifacts: artifacts.clone(),
            warnings: exaggerated.warnings.clone(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let seq = lock(&self.log).append(&Event::AttemptRecorded(Box::new(record)))?;
        state.apply(&scorecard, seq);
        debug_assert_eq!(state.profile, projected);
        if self.config.snapshot_every > 0 && state.attempts % self.config.snapshot_every == 0 {
            if let Err(e) = self.snapshots.save(&state) {
                log::warn!("snapshot of {learner_id} failed: {e}");
            }
        }

        let bands = scorecard
            .class_means()
            .keys()
            .map(|c| (c.clone(), state.profile.band_of(c)))
            .collect();
        Ok(FeedbackBundle {
            format_version: FORMAT_VERSION,
            attempt_id,
            learner_id: learner_id.to_owned(),
            course_id,
            node_id: node_id.to_owned(),
            accumulated: state.touched(&scorecard),
            scorecard,
            target,
            band,
            plan,
            visual_levels,
            bands,
            artifacts,
            warnings: exaggerated.warnings,
            warp_cost: aligned.warp_cost,
        })
    }

    pub fn get_report(&self, learner_id: &str) -> Result<Report, ServiceError> {
        let learner = self.learner(learner_id)?;
        let report = lock(&learner).report(&self.classes);
        Ok(report)
    }

    /// Follows choice `choice` out of `node_id`; a node without choices completes the course.
    pub fn advance_course(
        &self,
        learner_id: &str,
        course_id: &str,
        node_id: &str,
        choice: usize,
    ) -> Result<AdvanceOutcome, ServiceError> {
        self.learner(learner_id)?;
        let course = self.course(course_id)?;
        let node = course
            .script
            .node(node_id)
            .ok_or_else(|| unknown_node(node_id))?;
        if node.choices.is_empty() {
            return Ok(AdvanceOutcome {
                format_version: FORMAT_VERSION,
                course_id: course_id.to_owned(),
                complete: true,
                node: None,
            });
        }
        let next = node.choices.get(choice).ok_or_else(|| {
            ServiceError::new(
                Stage::Request,
                ErrorCode::UnknownChoice,
                format!(
                    "node {node_id} has {} choices, got index {choice}",
                    node.choices.len()
                ),
            )
        })?;
        Ok(AdvanceOutcome {
            format_version: FORMAT_VERSION,
            course_id: course_id.to_owned(),
            complete: false,
            node: course.script.node(&next.next).cloned(),
        })
    }

    /// Builds and persists a linear course, one node per sentence.
    pub fn create_custom_course(
        &self,
        request: &CustomCourseRequest,
    ) -> Result<CourseScript, ServiceError> {
        if let Some(id) = &request.learner_id {
            self.learner(id)?;
        }
        if request.sentences.is_empty() {
            return Err(ServiceError::validation("no sentences"));
        }
        let course_id = format!(
            "custom-{}",
            &uuid::Uuid::new_v4().simple().to_string()[..12]
        );
        let node_ids: Vec<String> = (1..=request.sentences.len())
            .map(|i| format!("{course_id}-{i}"))
            .collect();
        let mut nodes = Vec::with_capacity(request.sentences.len());
        for (i, s) in request.sentences.iter().enumerate() {
            let node_id = &node_ids[i];
            if s.text.trim().is_empty() {
                return Err(ServiceError::validation(format!(
                    "sentence {} has no text",
                    i + 1
                )));
            }
            let symbols = parse_phonemes(node_id, &s.phonemes, &self.classes)?;
            let reference = match (&s.reference_wav, &s.alignment) {
                (None, None) => self.synthesize_reference(&course_id, node_id, &symbols)?,
                (Some(wav), Some(alignment)) => {
                    self.supplied_reference(&course_id, node_id, &symbols, wav, alignment)?
                }
                _ => {
                    return Err(ServiceError::validation(format!(
                        "sentence {}: reference_wav and alignment go together",
                        i + 1
                    )))
                }
            };
            nodes.push(CourseNode {
                node_id: node_id.clone(),
                prompt: format!("Say: {}", s.text.trim()),
                text: s.text.trim().to_owned(),
                reference,
                choices: node_ids
                    .get(i + 1)
                    .map(|next| Choice {
                        text: "Next".into(),
                        next: next.clone(),
                    })
                    .into_iter()
                    .collect(),
            });
        }
        let script = CourseScript {
            format_version: FORMAT_VERSION,
            course_id: course_id.clone(),
            kind: CourseKind::Custom,
            title: request
                .title
                .clone()
                .filter(|t| !t.trim().is_empty())
                .unwrap_or_else(|| "Custom course".into()),
            entry: node_ids[0].clone(),
            nodes,
        };
        self.register_course(script.clone())?;
        lock(&self.log).append(&Event::CourseCreated(script.clone()))?;
        Ok(script)
    }

    fn supplied_reference(
        &self,
        course_id: &str,
        node_id: &str,
        symbols: &[String],
        wav_b64: &str,
        alignment: &str,
    ) -> Result<NodeReference, ServiceError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(wav_b64.trim())
            .map_err(|e| ServiceError::new(Stage::Ingest, ErrorCode::BadAudio, e.to_string()))?;
        let audio = AudioBuffer::from_wav_bytes(&bytes)
            .map_err(|e| ServiceError::new(Stage::Ingest, ErrorCode::BadAudio, e.to_string()))?;
        let segments = load_alignment(alignment, &self.classes)
            .map_err(|e| ServiceError::validation(format!("node {node_id}: {e}")))?;
        let got: Vec<&str> = segments.iter().map(|s| s.symbol()).collect();
        if got != symbols {
            return Err(ServiceError::validation(format!(
                "node {node_id}: alignment phonemes {got:?} differ from {symbols:?}"
            )));
        }
        if segments
            .last()
            .is_some_and(|s| s.end_ms > audio.duration_ms() + 0.05)
        {
            return Err(ServiceError::validation(format!(
                "node {node_id}: alignment runs past the audio"
            )));
        }
        let audio_id = format!("ref-{course_id}-{node_id}");
        self.artifacts
            .put(&audio_id, ArtifactKind::Wav, &audio.to_wav_bytes())?;
        Ok(NodeReference {
            phonemes: symbols.to_vec(),
            audio_id,
            segments,
        })
    }

    pub fn artifact(&self, id: &str) -> Result<(Vec<u8>, ArtifactKind), ServiceError> {
        self.artifacts
            .get(id)
            .map_err(|e| match e {
                StoreError::InvalidArtifactId(_) => {
                    ServiceError::new(Stage::Request, ErrorCode::UnknownArtifact, e.to_string())
                }
                other => other.into(),
            })?
            .ok_or_else(|| {
                ServiceError::new(
                    Stage::Request,
                    ErrorCode::UnknownArtifact,
                    format!("no artifact {id}"),
                )
            })
    }

    /// Writes a snapshot for every learner.
    pub fn snapshot_all(&self) -> Result<(), ServiceError> {
        let learners: Vec<_> = self
            .learners
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        for l in learners {
            self.snapshots.save(&lock(&l))?;
        }
        Ok(())
    }

    pub fn learner_ids(&self) -> Vec<String> {
        self.learners
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }
}

/// Used by tests and the demo to fetch reference audio without HTTP.
pub fn reference_audio(
    service: &TrainerService,
    course_id: &str,
    node_id: &str,
) -> Result<Vec<u8>, ServiceError> {
    let script = service.course_script(course_id)?;
    let node = script.node(node_id).ok_or_else(|| unknown_node(node_id))?;
    Ok(service.artifact(&node.reference.audio_id)?.0)
}
