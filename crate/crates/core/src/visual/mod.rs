//! Articulatory animation scripts with an exaggerated target phoneme.
//!
//! A script holds pose keyframes (played back with a cosine ease between
//! neighbours), a tongue-saturation track (linear between points) and
//! annotations confined to the target window.

mod library;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::PhonemeSegment;
use crate::phoneme::FORMAT_VERSION;
use crate::ratios::ProficiencyBand;

pub use library::{AnnotationEntry, AnnotationLibrary, VisemeLibrary};

/// Length of the saturation ramps at each edge of the target window.
pub const COLOR_RAMP_MS: f64 = 50.0;

#[derive(Debug, Error, PartialEq)]
pub enum VisualError {
    #[error("no segments to animate")]
    EmptyScript,
    #[error("no viseme for phoneme {0}")]
    MissingViseme(String),
    #[error("no annotation entry for class {0}")]
    MissingAnnotationEntry(String),
    #[error("pose parameter {name} = {value} outside [0, 1]")]
    InvalidPose { name: &'static str, value: f64 },
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("unknown level {0}")]
    UnknownLevel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported format_version {0}")]
    FormatVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArticulatorPose {
    pub jaw_open: f64,
    pub lip_aperture: f64,
    pub lip_rounding: f64,
    pub tongue_tip_height: f64,
    pub tongue_body_height: f64,
    pub tongue_frontness: f64,
    pub velum_open: f64,
}

impl ArticulatorPose {
    pub const NAMES: [&'static str; 7] = [
        "jaw_open",
        "lip_aperture",
        "lip_rounding",
        "tongue_tip_height",
        "tongue_body_height",
        "tongue_frontness",
        "velum_open",
    ];

    pub const NEUTRAL: Self = Self {
        jaw_open: 0.5,
        lip_aperture: 0.5,
        lip_rounding: 0.5,
        tongue_tip_height: 0.5,
        tongue_body_height: 0.5,
        tongue_frontness: 0.5,
        velum_open: 0.5,
    };

    pub fn from_array(v: [f64; 7]) -> Result<Self, VisualError> {
        let pose = Self::from_array_unchecked(v);
        pose.validate()?;
        Ok(pose)
    }

    fn from_array_unchecked(v: [f64; 7]) -> Self {
        Self {
            jaw_open: v[0],
            lip_aperture: v[1],
            lip_rounding: v[2],
            tongue_tip_height: v[3],
            tongue_body_height: v[4],
            tongue_frontness: v[5],
            velum_open: v[6],
        }
    }

    pub fn as_array(&self) -> [f64; 7] {
        [
            self.jaw_open,
            self.lip_aperture,
            self.lip_rounding,
            self.tongue_tip_height,
            self.tongue_body_height,
            self.tongue_frontness,
            self.velum_open,
        ]
    }

    pub fn validate(&self) -> Result<(), VisualError> {
        for (name, value) in Self::NAMES.iter().zip(self.as_array()) {
            if !(0.0..=1.0).contains(&value) {
                return Err(VisualError::InvalidPose { name, value });
            }
        }
        Ok(())
    }

    /// `clamp(neutral + gain * (pose - neutral))` per parameter.
    pub fn scaled(&self, gain: f64) -> Self {
        let n = Self::NEUTRAL.as_array();
        let mut v = self.as_array();
        for (x, c) in v.iter_mut().zip(n) {
            *x = (c + gain * (*x - c)).clamp(0.0, 1.0);
        }
        Self::from_array_unchecked(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisemeKeyframe {
    pub time_ms: f64,
    pub pose: ArticulatorPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MovementLevel {
    M1,
    M2,
    M3,
    M4,
}

impl MovementLevel {
    pub const ALL: [Self; 4] = [Self::M1, Self::M2, Self::M3, Self::M4];

    pub fn gain(self) -> f64 {
        match self {
            Self::M1 => 1.0,
            Self::M2 => 1.2,
            Self::M3 => 1.45,
            Self::M4 => 1.7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::M1 => "zero",
            Self::M2 => "slight",
            Self::M3 => "medium",
            Self::M4 => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColorLevel {
    C1,
    C2,
    C3,
}

impl ColorLevel {
    pub const ALL: [Self; 3] = [Self::C1, Self::C2, Self::C3];
    pub const BASELINE: f64 = 0.25;

    pub fn saturation(self) -> f64 {
        match self {
            Self::C1 => Self::BASELINE,
            Self::C2 => 0.6,
            Self::C3 => 0.95,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::C1 => "zero",
            Self::C2 => "medium",
            Self::C3 => "strong",
        }
    }
}

macro_rules! level_parsing {
    ($ty:ty) => {
        impl FromStr for $ty {
            type Err = VisualError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .into_iter()
                    .find(|l| {
                        format!("{l:?}").eq_ignore_ascii_case(s) || l.name().eq_ignore_ascii_case(s)
                    })
                    .ok_or_else(|| VisualError::UnknownLevel(s.to_owned()))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{self:?}")
            }
        }
    };
}

level_parsing!(MovementLevel);
level_parsing!(ColorLevel);

/// Movement and color levels used together for one learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualLevels {
    pub movement: MovementLevel,
    pub color: ColorLevel,
}

impl VisualLevels {
    /// Slight exaggeration for high proficiency, strong for low. Color has no
    /// slight level, so high proficiency gets the middle one.
    pub fn for_band(band: ProficiencyBand) -> Self {
        match band {
            ProficiencyBand::High => Self {
                movement: MovementLevel::M2,
                color: ColorLevel::C2,
            },
            ProficiencyBand::Low => Self {
                movement: MovementLevel::M4,
                color: ColorLevel::C3,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ms: f64,
    pub end_ms: f64,
}

impl TimeWindow {
    pub fn new(start_ms: f64, end_ms: f64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn of(segment: &PhonemeSegment) -> Self {
        Self::new(segment.start_ms, segment.end_ms)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_ms && t <= self.end_ms
    }

    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorPoint {
    pub time_ms: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Arrow,
    Airflow,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Articulator {
    Jaw,
    Lips,
    TongueTip,
    TongueBody,
    Velum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub window: TimeWindow,
    pub kind: AnnotationKind,
    pub text: String,
    pub anchor: Articulator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationScript {
    pub format_version: u32,
    pub keyframes: Vec<VisemeKeyframe>,
    pub color_track: Vec<ColorPoint>,
    pub annotations: Vec<Annotation>,
    pub target_window: TimeWindow,
}

impl AnimationScript {
    /// A script with a flat baseline color track and no annotations.
    pub fn new(
        keyframes: Vec<VisemeKeyframe>,
        target_window: TimeWindow,
    ) -> Result<Self, VisualError> {
        let (Some(first), Some(last)) = (keyframes.first(), keyframes.last()) else {
            return Err(VisualError::EmptyScript);
        };
        let color_track = flat_track(first.time_ms, last.time_ms);
        let script = Self {
            format_version: FORMAT_VERSION,
            keyframes,
            color_track,
            annotations: Vec::new(),
            target_window,
        };
        script.validate()?;
        Ok(script)
    }

    pub fn start_ms(&self) -> f64 {
        self.keyframes.first().map_or(0.0, |k| k.time_ms)
    }

    pub fn end_ms(&self) -> f64 {
        self.keyframes.last().map_or(0.0, |k| k.time_ms)
    }

    pub fn validate(&self) -> Result<(), VisualError> {
        let bad = |m: String| Err(VisualError::InvalidScript(m));
        if self.format_version != FORMAT_VERSION {
            return Err(VisualError::FormatVersion(self.format_version));
        }
        if self.keyframes.is_empty() {
            return Err(VisualError::EmptyScript);
        }
        if self
            .keyframes
            .windows(2)
            .any(|w| w[0].time_ms >= w[1].time_ms)
        {
            return bad("keyframes are not strictly time-ordered".into());
        }
        for k in &self.keyframes {
            k.pose.validate()?;
        }
        if self
            .color_track
            .windows(2)
            .any(|w| w[0].time_ms >= w[1].time_ms)
        {
            return bad("color track is not strictly time-ordered".into());
        }
        if let Some(p) = self
            .color_track
            .iter()
            .find(|p| !(0.0..=1.0).contains(&p.saturation))
        {
            return bad(format!("saturation {} outside [0, 1]", p.saturation));
        }
        let w = self.target_window;
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(w.start_ms < w.end_ms) {
            return bad("target window is empty".into());
        }
        if self
            .annotations
            .windows(2)
            .any(|a| a[0].window.start_ms > a[1].window.start_ms)
        {
            return bad("annotations are not time-ordered".into());
        }
        for a in &self.annotations {
            if a.window.start_ms < w.start_ms
                || a.window.end_ms > w.end_ms
                || a.window.start_ms > a.window.end_ms
            {
                return bad("annotation outside the target window".into());
            }
        }
        Ok(())
    }

    /// Saturation at `t`, linear between track points and constant beyond them.
    pub fn saturation_at(&self, t: f64) -> f64 {
        let track = &self.color_track;
        match track.iter().position(|p| p.time_ms >= t) {
            None => track.last().map_or(ColorLevel::BASELINE, |p| p.saturation),
            Some(0) => track[0].saturation,
            Some(i) => {
                let (a, b) = (track[i - 1], track[i]);
                let f = (t - a.time_ms) / (b.time_ms - a.time_ms);
                a.saturation + f * (b.saturation - a.saturation)
            }
        }
    }

    /// Pose at `t` with a cosine ease between neighbouring keyframes.
    pub fn pose_at(&self, t: f64) -> ArticulatorPose {
        let k = &self.keyframes;
        match k.iter().position(|f| f.time_ms >= t) {
            None => k.last().map_or(ArticulatorPose::NEUTRAL, |f| f.pose),
            Some(0) => k[0].pose,
            Some(i) => {
                let (a, b) = (k[i - 1], k[i]);
                let f = (t - a.time_ms) / (b.time_ms - a.time_ms);
                let w = 0.5 - 0.5 * (std::f64::consts::PI * f).cos();
                let (pa, pb) = (a.pose.as_array(), b.pose.as_array());
                let mut v = [0.0; 7];
                for j in 0..7 {
                    v[j] = pa[j] + w * (pb[j] - pa[j]);
                }
                ArticulatorPose::from_array_unchecked(v)
            }
        }
    }
}

fn flat_track(start: f64, end: f64) -> Vec<ColorPoint> {
    let mut track = vec![ColorPoint {
        time_ms: start,
        saturation: ColorLevel::BASELINE,
    }];
    if end > start {
        track.push(ColorPoint {
            time_ms: end,
            saturation: ColorLevel::BASELINE,
        });
    }
    track
}

/// Neutral keyframes at the utterance edges and each phoneme's pose at its midpoint.
pub fn build_timeline(
    segments: &[PhonemeSegment],
    visemes: &VisemeLibrary,
) -> Result<Vec<VisemeKeyframe>, VisualError> {
    let (Some(first), Some(last)) = (segments.first(), segments.last()) else {
        return Err(VisualError::EmptyScript);
    };
    let mut keyframes = vec![VisemeKeyframe {
        time_ms: first.start_ms,
        pose: ArticulatorPose::NEUTRAL,
    }];
    for seg in segments {
        keyframes.push(VisemeKeyframe {
            time_ms: 0.5 * (seg.start_ms + seg.end_ms),
            pose: *visemes.pose(seg.symbol())?,
        });
    }
    keyframes.push(VisemeKeyframe {
        time_ms: last.end_ms,
        pose: ArticulatorPose::NEUTRAL,
    });
    Ok(keyframes)
}

pub fn exaggerate_movement(
    keyframes: &[VisemeKeyframe],
    window: TimeWindow,
    level: MovementLevel,
) -> Vec<VisemeKeyframe> {
    exaggerate_movement_by(keyframes, window, level.gain())
}

/// Scales poses of keyframes inside `window` away from neutral by `gain`.
pub fn exaggerate_movement_by(
    keyframes: &[VisemeKeyframe],
    window: TimeWindow,
    gain: f64,
) -> Vec<VisemeKeyframe> {
    keyframes
        .iter()
        .map(|k| {
            if window.contains(k.time_ms) {
                VisemeKeyframe {
                    time_ms: k.time_ms,
                    pose: k.pose.scaled(gain),
                }
            } else {
                *k
            }
        })
        .collect()
}

pub fn exaggerate_color(
    script: &AnimationScript,
    window: TimeWindow,
    level: ColorLevel,
) -> AnimationScript {
    exaggerate_color_to(script, window, level.saturation())
}

/// Replaces the color track with a baseline track that rises linearly to
/// `saturation` inside `window`. Ramps are 50 ms, or half the window when
/// it is shorter than 100 ms.
pub fn exaggerate_color_to(
    script: &AnimationScript,
    window: TimeWindow,
    saturation: f64,
) -> AnimationScript {
    let (t0, t1) = (script.start_ms(), script.end_ms());
    let mut out = script.clone();
    let base = ColorLevel::BASELINE;
    if saturation == base {
        out.color_track = flat_track(t0, t1);
        return out;
    }
    let ws = window.start_ms.clamp(t0, t1);
    let we = window.end_ms.clamp(t0, t1);
    let ramp = COLOR_RAMP_MS.min(0.5 * (we - ws));
    let points = [
        (t0, base),
        (ws, base),
        (ws + ramp, saturation),
        (we - ramp, saturation),
        (we, base),
        (t1, base),
    ];
    let mut track: Vec<ColorPoint> = Vec::with_capacity(points.len());
    for (time_ms, saturation) in points {
        match track.last() {
            Some(p) if p.time_ms >= time_ms => {}
            _ => track.push(ColorPoint {
                time_ms,
                saturation,
            }),
        }
    }
    out.color_track = track;
    out
}

/// Adds the target's graphic and text annotations spanning its window.
pub fn add_annotations(
    script: &AnimationScript,
    target: &PhonemeSegment,
    library: &AnnotationLibrary,
) -> Result<AnimationScript, VisualError> {
    let entry = library.entry(&target.phoneme)?;
    let window = TimeWindow::of(target);
    let mut out = script.clone();
    out.annotations.push(Annotation {
        window,
        kind: entry.graphic,
        text: entry.cue,
        anchor: entry.anchor,
    });
    out.annotations.push(Annotation {
        window,
        kind: AnnotationKind::Text,
        text: entry.text,
        anchor: entry.anchor,
    });
    out.annotations
        .sort_by(|a, b| a.window.start_ms.total_cmp(&b.window.start_ms));
    Ok(out)
}

/// Moves the target's end to `new_end_ms` and shifts every later segment by
/// the same amount, matching audio whose target was stretched in place.
pub fn retime_for_stretch(
    segments: &[PhonemeSegment],
    target: &PhonemeSegment,
    new_end_ms: f64,
) -> Vec<PhonemeSegment> {
    let delta = new_end_ms - target.end_ms;
    segments
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if s.start_ms >= target.end_ms {
                s.start_ms += delta;
                s.end_ms += delta;
            } else if s == *target {
                s.end_ms = new_end_ms;
            }
            s
        })
        .collect()
}

/// Timeline, movement, color and annotations for one exaggerated target.
pub fn build_script(
    segments: &[PhonemeSegment],
    target: &PhonemeSegment,
    levels: VisualLevels,
    visemes: &VisemeLibrary,
    annotations: &AnnotationLibrary,
) -> Result<AnimationScript, VisualError> {
    let window = TimeWindow::of(target);
    let keyframes =
        exaggerate_movement(&build_timeline(segments, visemes)?, window, levels.movement);
    let script = AnimationScript::new(keyframes, window)?;
    let script = exaggerate_color(&script, window, levels.color);
    add_annotations(&script, target, annotations)
}

/// Canonical JSON: keys sorted, two-space indent, trailing newline.
pub fn serialize_script(script: &AnimationScript) -> String {
    // serde_json's default map is ordered by key, which sorts every object.
    let value = serde_json::to_value(script).expect("script serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

pub fn parse_script(document: &str) -> Result<AnimationScript, VisualError> {
    let version: serde_json::Value =
        serde_json::from_str(document).map_err(|e| VisualError::Parse(e.to_string()))?;
    match version.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => return Err(VisualError::FormatVersion(v as u32)),
        None => return Err(VisualError::Parse("missing format_version".into())),
    }
    let script: AnimationScript =
        serde_json::from_value(version).map_err(|e| VisualError::Parse(e.to_string()))?;
    script.validate()?;
    Ok(script)
}
