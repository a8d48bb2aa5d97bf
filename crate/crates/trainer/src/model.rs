//! Learner state, attempt records and reports.

use std::collections::{BTreeMap, VecDeque};

use pronunciation_core::diagnosis::{
    AttemptScorecard, ClassProficiency, ProficiencyProfile, ScoredSegment,
};
use pronunciation_core::exaggeration::{ExaggerationPlan, Warning};
use pronunciation_core::phoneme::FORMAT_VERSION;
use pronunciation_core::visual::VisualLevels;
use pronunciation_core::{ClassId, PhonemeClassTable, ProficiencyBand};
use serde::{Deserialize, Serialize};

/// Results per class kept for the report trend.
pub const TREND_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Learner {
    pub learner_id: String,
    pub display_name: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackArtifacts {
    pub recording: String,
    pub exaggerated_audio: String,
    pub animation_script: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_id: String,
    pub learner_id: String,
    pub course_id: String,
    pub node_id: String,
    pub scorecard: AttemptScorecard,
    pub target: ScoredSegment,
    pub band: ProficiencyBand,
    pub plan: ExaggerationPlan,
    pub visual_levels: VisualLevels,
    pub artifacts: FeedbackArtifacts,
    pub warnings: Vec<Warning>,
    pub timestamp: String,
}

/// In-memory state of one learner, rebuilt from the event log.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub learner: Learner,
    pub profile: ProficiencyProfile,
    /// Latest per-class attempt results, oldest first.
    pub recent: BTreeMap<ClassId, VecDeque<f64>>,
    pub attempts: u64,
    /// Sequence number of the last event folded into this state.
    pub last_seq: u64,
}

impl LearnerState {
    pub fn new(learner: Learner, seq: u64) -> Self {
        Self {
            learner,
            profile: ProficiencyProfile::default(),
            recent: BTreeMap::new(),
            attempts: 0,
            last_seq: seq,
        }
    }

    /// Folds one attempt's scorecard into the state.
    pub fn apply(&mut self, scorecard: &AttemptScorecard, seq: u64) {
        self.profile.accumulate(scorecard);
        for (class, mean) in scorecard.class_means() {
            let q = self.recent.entry(class).or_default();
            q.push_back(mean);
            while q.len() > TREND_WINDOW {
                q.pop_front();
            }
        }
        self.attempts += 1;
        self.last_seq = seq;
    }

    pub fn report(&self, classes: &PhonemeClassTable) -> Report {
        let rows = self
            .profile
            .classes()
            .filter(|(_, c)| c.count > 0)
            .map(|(id, c)| ClassReport {
                class_id: id.clone(),
                class_name: classes.class_name(id).map(str::to_owned),
                accumulated: c.accumulated,
                count: c.count,
                band: self.profile.band_of(id),
                trend: self
                    .recent
                    .get(id)
                    .and_then(|q| trend_slope(&q.iter().copied().collect::<Vec<_>>())),
            })
            .collect();
        Report {
            format_version: FORMAT_VERSION,
            learner_id: self.learner.learner_id.clone(),
            display_name: self.learner.display_name.clone(),
            attempts: self.attempts,
            classes: rows,
            overall: self.profile.overall(),
        }
    }

    pub fn touched(&self, scorecard: &AttemptScorecard) -> BTreeMap<ClassId, ClassProficiency> {
        scorecard
            .class_means()
            .keys()
            .filter_map(|id| self.profile.class(id).map(|c| (id.clone(), *c)))
            .collect()
    }
}

/// Least-squares slope of `y` against `0, 1, ..`; `None` below two points.
pub fn trend_slope(y: &[f64]) -> Option<f64> {
    let n = y.len();
    if n < 2 {
        return None;
    }
    let xm = (n - 1) as f64 / 2.0;
    let ym = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: ClassId,
    pub class_name: Option<String>,
    pub accumulated: f64,
    pub count: u64,
    pub band: ProficiencyBand,
    /// Slope of the latest per-class results per attempt.
    pub trend: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub learner_id: String,
    pub display_name: String,
    pub attempts: u64,
    pub classes: Vec<ClassReport>,
    pub overall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBundle {
    pub format_version: u32,
    pub attempt_id: String,
    pub learner_id: String,
    pub course_id: String,
    pub node_id: String,
    pub scorecard: AttemptScorecard,
    pub target: ScoredSegment,
    pub band: ProficiencyBand,
    pub plan: ExaggerationPlan,
    pub visual_levels: VisualLevels,
    /// Accumulated state of every class this attempt touched.
    pub accumulated: BTreeMap<ClassId, ClassProficiency>,
    pub bands: BTreeMap<ClassId, ProficiencyBand>,
    pub artifacts: FeedbackArtifacts,
    pub warnings: Vec<Warning>,
    pub warp_cost: f64,
}
