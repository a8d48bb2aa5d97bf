use std::fmt;
use std::path::Path;

use pronunciation_core::alignment::{self, format_alignment, load_alignment};
use pronunciation_core::diagnosis::{
    score_attempt, select_target_phoneme, AttemptScorecard, ProficiencyProfile, TemplateBank,
    TemplateScorer,
};
use pronunciation_core::evaluation::{
    fit_ratio_table, improvement_rate, one_tailed_t_test, read_ratings, FitBounds, Grouping,
    MetricSummary, RatingRecord,
};
use pronunciation_core::exaggeration::{apply_plan, plan_exaggeration, ExaggerationPlan};
use pronunciation_core::phoneme::FORMAT_VERSION;
use pronunciation_core::ratios::load_ratio_table;
use pronunciation_core::visual::{
    build_script, serialize_script, AnnotationLibrary, ColorLevel, MovementLevel, VisemeLibrary,
    VisualLevels,
};
use pronunciation_core::{
    AudioBuffer, PhonemeClassTable, PhonemeSegment, ProficiencyBand, RatioTable, RatioTriple,
};
use pronunciation_trainer::{ServiceConfig, TrainerService};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Domain(m) => f.write_str(m),
        }
    }
}

fn domain(e: impl fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

type Output = Result<Option<Value>, CliError>;

/// Serializes `value` with `format_version` added to a top-level object.
fn versioned<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("output serializes");
    if let Value::Object(map) = &mut v {
        map.entry("format_version").or_insert(FORMAT_VERSION.into());
    }
    v
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn read_wav(path: &Path) -> Result<AudioBuffer, CliError> {
    AudioBuffer::open_wav(path).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn read_segments(
    path: &Path,
    classes: &PhonemeClassTable,
) -> Result<Vec<PhonemeSegment>, CliError> {
    load_alignment(&read_text(path)?, classes)
        .map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn read_scorecard(path: &Path) -> Result<AttemptScorecard, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn read_profile(path: Option<&Path>) -> Result<ProficiencyProfile, CliError> {
    match path {
        Some(p) => ProficiencyProfile::from_toml(&read_text(p)?)
            .map_err(|e| domain(format!("{}: {e}", p.display()))),
        None => Ok(ProficiencyProfile::default()),
    }
}

fn read_ratio_table(
    path: Option<&Path>,
    classes: &PhonemeClassTable,
) -> Result<RatioTable, CliError> {
    match path {
        Some(p) => load_ratio_table(&read_text(p)?, classes)
            .map_err(|e| domain(format!("{}: {e}", p.display()))),
        None => Ok(RatioTable::default_table()),
    }
}

fn read_ratings_file(path: &Path) -> Result<Vec<RatingRecord>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
    read_ratings(file).map_err(|e| domain(format!("{}: {e}", path.display())))
}

fn parse_band(s: &str) -> Result<ProficiencyBand, CliError> {
    s.parse()
        .map_err(|_| usage(format!("unknown band {s:?}; use low or high")))
}

fn target_segment(segments: &[PhonemeSegment], index: usize) -> Result<&PhonemeSegment, CliError> {
    segments.get(index).ok_or_else(|| {
        usage(format!(
            "--target {index} is out of range for {} segments",
            segments.len()
        ))
    })
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

pub fn align(learner: &Path, reference: &Path, segments: &Path, out: Option<&Path>) -> Output {
    let classes = PhonemeClassTable::default();
    let segs = read_segments(segments, &classes)?;
    let result =
        alignment::align(&read_wav(learner)?, &read_wav(reference)?, &segs).map_err(domain)?;
    if let Some(p) = out {
        write_file(p, format_alignment(&result.segments).as_bytes())?;
    }
    Ok(Some(versioned(&result)))
}

pub fn score(
    learner: &Path,
    segments: &Path,
    reference: &Path,
    reference_segments: &Path,
    id: Option<&str>,
    out: Option<&Path>,
) -> Output {
    let classes = PhonemeClassTable::default();
    let reference_audio = read_wav(reference)?;
    let bank = TemplateBank::from_reference(
        &reference_audio,
        &read_segments(reference_segments, &classes)?,
    )
    .map_err(domain)?;
    let stem = learner
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "utterance".into());
    let card = score_attempt(
        id.unwrap_or(&stem),
        &read_wav(learner)?,
        &read_segments(segments, &classes)?,
        &bank,
        &TemplateScorer::default(),
    )
    .map_err(domain)?;
    if let Some(p) = out {
        let text = serde_json::to_string_pretty(&card).expect("scorecard serializes") + "\n";
        write_file(p, text.as_bytes())?;
    }
    Ok(Some(versioned(&card)))
}

pub fn exaggerate_audio(
    input: &Path,
    segments: &Path,
    target: usize,
    band: &str,
    ratio_table: Option<&Path>,
    ratios: Option<&str>,
    out: &Path,
) -> Output {
    let classes = PhonemeClassTable::default();
    let band = parse_band(band)?;
    let audio = read_wav(input)?;
    let segs = read_segments(segments, &classes)?;
    let seg = target_segment(&segs, target)?;
    let plan = match ratios {
        Some(text) => {
            let v = parse_numbers(text).map_err(usage)?;
            let [p, d, e] = v[..] else {
                return Err(usage("--ratios takes pitch,duration,energy"));
            };
            let auto = plan_exaggeration(&segs, seg, band, &RatioTable::default_table())
                .map_err(domain)?;
            ExaggerationPlan {
                ratios: RatioTriple::new(p, d, e).map_err(usage)?,
                ..auto
            }
        }
        None => {
            let table = read_ratio_table(ratio_table, &classes)?;
            plan_exaggeration(&segs, seg, band, &table).map_err(domain)?
        }
    };
    let result = apply_plan(&audio, &plan).map_err(domain)?;
    result
        .audio
        .save_wav(out)
        .map_err(|e| domain(format!("{}: {e}", out.display())))?;
    Ok(Some(versioned(&json!({
        "plan": plan,
        "target_start_ms": result.target_start_ms,
        "target_end_ms": result.target_end_ms,
        "duration_ms": result.audio.duration_ms(),
        "warnings": result.warnings,
        "out": out.display().to_string(),
    }))))
}

pub fn exaggerate_visual(
    segments: &Path,
    target: usize,
    band: &str,
    level: Option<&str>,
    color: Option<&str>,
    out: Option<&Path>,
) -> Output {
    let classes = PhonemeClassTable::default();
    let mut levels = VisualLevels::for_band(parse_band(band)?);
    if let Some(l) = level {
        levels.movement = l.parse::<MovementLevel>().map_err(usage)?;
    }
    if let Some(c) = color {
        levels.color = c.parse::<ColorLevel>().map_err(usage)?;
    }
    let segs = read_segments(segments, &classes)?;
    let script = build_script(
        &segs,
        target_segment(&segs, target)?,
        levels,
        &VisemeLibrary::default(),
        &AnnotationLibrary::default(),
    )
    .map_err(domain)?;
    let text = serialize_script(&script);
    if let Some(p) = out {
        write_file(p, text.as_bytes())?;
    }
    Ok(Some(
        serde_json::from_str(&text).expect("script is valid JSON"),
    ))
}

fn profile_document(profile: &ProficiencyProfile) -> Value {
    let classes: Map<String, Value> = profile
        .classes()
        .map(|(id, c)| {
            (
                id.to_string(),
                json!({
                    "accumulated": c.accumulated,
                    "count": c.count,
                    "band": profile.band_of(id),
                }),
            )
        })
        .collect();
    json!({
        "format_version": FORMAT_VERSION,
        "alpha": profile.alpha(),
        "classes": classes,
        "overall": profile.overall(),
    })
}

pub fn accumulate(
    scorecards: &[std::path::PathBuf],
    profile: Option<&Path>,
    alpha: Option<f64>,
    out: Option<&Path>,
) -> Output {
    let mut profile = match alpha {
        Some(a) => ProficiencyProfile::new(a).map_err(usage)?,
        None => read_profile(profile)?,
    };
    for path in scorecards {
        profile.accumulate(&read_scorecard(path)?);
    }
    if let Some(p) = out {
        write_file(p, profile.to_toml().as_bytes())?;
    }
    Ok(Some(profile_document(&profile)))
}

pub fn select(scorecard: &Path, profile: Option<&Path>, ratio_table: Option<&Path>) -> Output {
    let classes = PhonemeClassTable::default();
    let card = read_scorecard(scorecard)?;
    let projected = read_profile(profile)?.accumulated(&card);
    let target = select_target_phoneme(&card, &projected).map_err(domain)?;
    let index = card
        .segments
        .iter()
        .position(|s| s == target)
        .expect("selected segment belongs to the scorecard");
    let class = &target.segment.phoneme.class_id;
    let band = projected.band_of(class);
    let table = read_ratio_table(ratio_table, &classes)?;
    Ok(Some(versioned(&json!({
        "index": index,
        "target": target,
        "class_id": class,
        "accumulated": projected.class(class).map(|c| c.accumulated),
        "band": band,
        "ratios": table.lookup(band, class),
        "visual_levels": VisualLevels::for_band(band),
    }))))
}

pub fn eval_metrics(input: &Path) -> Output {
    let records = read_ratings_file(input)?;
    let overall = MetricSummary::from_records(&records).map_err(domain)?;
    let mut bands = Map::new();
    for band in ProficiencyBand::ALL {
        let subset: Vec<_> = records.iter().filter(|r| r.band == band).cloned().collect();
        if !subset.is_empty() {
            let s = MetricSummary::from_records(&subset).map_err(domain)?;
            bands.insert(
                band.as_str().into(),
                serde_json::to_value(s).expect("summary serializes"),
            );
        }
    }
    Ok(Some(json!({
        "format_version": FORMAT_VERSION,
        "overall": overall,
        "bands": bands,
    })))
}

pub fn fit_ratios(
    input: &Path,
    grouping: &str,
    bounds: Option<&str>,
    out: Option<&Path>,
) -> Output {
    let grouping = match grouping {
        "per-class" | "per_class" => Grouping::PerClass,
        "global" => Grouping::Global,
        other => {
            return Err(usage(format!(
                "unknown grouping {other:?}; use per-class or global"
            )))
        }
    };
    let bounds = match bounds {
        Some(text) => {
            let v = parse_numbers(text).map_err(usage)?;
            let [lo, hi] = v[..] else {
                return Err(usage("--bounds takes lo,hi"));
            };
            FitBounds::uniform(lo, hi)
        }
        None => FitBounds::default(),
    };
    let records = read_ratings_file(input)?;
    let classes = PhonemeClassTable::default();
    let (table, fits) = fit_ratio_table(&records, grouping, &bounds, &classes).map_err(domain)?;
    if let Some(p) = out {
        write_file(p, table.to_toml().as_bytes())?;
    }
    Ok(Some(versioned(
        &json!({ "grouping": grouping, "fits": fits }),
    )))
}

pub fn ttest(a: &Path, b: &Path) -> Output {
    let read = |p: &Path| -> Result<Vec<f64>, CliError> {
        parse_numbers(&read_text(p)?).map_err(|e| domain(format!("{}: {e}", p.display())))
    };
    let result = one_tailed_t_test(&read(a)?, &read(b)?).map_err(domain)?;
    Ok(Some(versioned(&result)))
}

pub fn improvement(before: f64, after: f64) -> Output {
    let rate = improvement_rate(before, after).map_err(domain)?;
    Ok(Some(json!({
        "format_version": FORMAT_VERSION,
        "before": before,
        "after": after,
        "improvement_rate": rate,
    })))
}

pub fn serve(config: Option<&Path>) -> Output {
    let config = ServiceConfig::load(config).map_err(domain)?;
    let runtime = tokio::runtime::Runtime::new().map_err(domain)?;
    runtime
        .block_on(pronunciation_trainer::serve(config))
        .map_err(domain)?;
    Ok(None)
}

const DEMO_ATTEMPTS: [(&str, &[u8]); 2] = [
    (
        "tea_learner.wav",
        include_bytes!("../data/fixtures/tea_learner.wav"),
    ),
    (
        "tea_learner_b.wav",
        include_bytes!("../data/fixtures/tea_learner_b.wav"),
    ),
];

pub fn demo(data_dir: Option<&Path>) -> Output {
    let temp;
    let dir = match data_dir {
        Some(d) => d,
        None => {
            temp = tempfile::tempdir().map_err(domain)?;
            temp.path()
        }
    };
    let service = TrainerService::open(ServiceConfig::with_data_dir(dir)).map_err(domain)?;
    let learner = service.create_learner("demo").map_err(domain)?;
    let mut attempts = Vec::new();
    for (name, wav) in DEMO_ATTEMPTS {
        let b = service
            .submit_attempt(&learner.learner_id, Some("cafe"), "cafe-tea", wav)
            .map_err(domain)?;
        let scores: Vec<Value> = b
            .scorecard
            .segments
            .iter()
            .map(|s| json!({ "phoneme": s.segment.symbol(), "score": s.score }))
            .collect();
        attempts.push(json!({
            "recording": name,
            "scores": scores,
            "target": b.target.segment.symbol(),
            "target_class": b.target.segment.phoneme.class_id,
            "band": b.band,
            "ratios": b.plan.ratios,
            "visual_levels": b.visual_levels,
            "accumulated": b.accumulated,
            "warnings": b.warnings,
        }));
    }
    let report = service.get_report(&learner.learner_id).map_err(domain)?;
    Ok(Some(json!({
        "format_version": FORMAT_VERSION,
        "course_id": "cafe",
        "node_id": "cafe-tea",
        "attempts": attempts,
        "report": { "attempts": report.attempts, "classes": report.classes, "overall": report.overall },
    })))
}
