//! `ptrain`: batch access to every pipeline stage.
//!
//! Every subcommand prints one JSON document on standard output; errors go to
//! standard error. Exit status is 0 on success, 1 on a domain error and 2 on
//! a usage error.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ptrain",
    version,
    about = "Pronunciation diagnosis and exaggerated feedback toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transfer reference phoneme boundaries onto a learner recording.
    Align(AlignArgs),
    /// Score every phoneme of an aligned learner recording against a reference.
    Score(ScoreArgs),
    /// Exaggerate one reference segment in pitch, duration and energy.
    ExaggerateAudio(ExaggerateAudioArgs),
    /// Build an animation script emphasizing one segment.
    ExaggerateVisual(ExaggerateVisualArgs),
    /// Fold scorecards into a proficiency profile.
    Accumulate(AccumulateArgs),
    /// Pick the phoneme to train from a scorecard and profile.
    Select(SelectArgs),
    /// Distinguishability, understandability, perception and V from a ratings file.
    EvalMetrics(EvalMetricsArgs),
    /// Fit the best ratio triple per band and class from a ratings file.
    FitRatios(FitRatiosArgs),
    /// One-tailed Welch t-test that group A is below group B.
    Ttest(TtestArgs),
    /// Relative improvement between two scores.
    Improvement(ImprovementArgs),
    /// Run the HTTP training service.
    Serve(ServeArgs),
    /// Run the full training loop on bundled fixture audio.
    Demo(DemoArgs),
}

#[derive(Args)]
struct AlignArgs {
    /// Learner WAV.
    #[arg(long)]
    learner: PathBuf,
    /// Reference WAV.
    #[arg(long)]
    reference: PathBuf,
    /// Interval file for the reference.
    #[arg(long)]
    segments: PathBuf,
    /// Write the learner alignment as an interval file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Learner WAV.
    #[arg(long)]
    learner: PathBuf,
    /// Interval file for the learner, e.g. from `align --out`.
    #[arg(long)]
    segments: PathBuf,
    /// Reference WAV providing the phoneme templates.
    #[arg(long)]
    reference: PathBuf,
    /// Interval file for the reference.
    #[arg(long)]
    reference_segments: PathBuf,
    /// Utterance id recorded in the scorecard; defaults to the learner file stem.
    #[arg(long)]
    id: Option<String>,
    /// Also write the scorecard to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExaggerateAudioArgs {
    /// Reference WAV.
    #[arg(long = "in")]
    input: PathBuf,
    /// Interval file for the reference.
    #[arg(long)]
    segments: PathBuf,
    /// Zero-based index of the target segment.
    #[arg(long)]
    target: usize,
    /// Proficiency band selecting the ratio row.
    #[arg(long, default_value = "low")]
    band: String,
    /// Ratio table TOML; the bundled table otherwise.
    #[arg(long)]
    ratio_table: Option<PathBuf>,
    /// Explicit `pitch,duration,energy` ratios, overriding the table.
    #[arg(long)]
    ratios: Option<String>,
    /// Output WAV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExaggerateVisualArgs {
    /// Interval file of the utterance.
    #[arg(long)]
    segments: PathBuf,
    /// Zero-based index of the target segment.
    #[arg(long)]
    target: usize,
    /// Band whose default movement and color levels apply.
    #[arg(long, default_value = "low")]
    band: String,
    /// Movement level (M1..M4 or its name), overriding the band default.
    #[arg(long)]
    level: Option<String>,
    /// Color level (C1..C3 or its name), overriding the band default.
    #[arg(long)]
    color: Option<String>,
    /// Also write the script to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AccumulateArgs {
    /// Scorecard JSON files, folded in the order given.
    #[arg(long = "scorecard", required = true)]
    scorecards: Vec<PathBuf>,
    /// Profile TOML to start from; an empty profile otherwise.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Weight of the latest result for a new profile.
    #[arg(long, conflicts_with = "profile")]
    alpha: Option<f64>,
    /// Write the updated profile TOML here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Scorecard JSON of the attempt.
    #[arg(long)]
    scorecard: PathBuf,
    /// Profile TOML before the attempt; an empty profile otherwise.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Ratio table TOML used to report the ratios for the chosen target.
    #[arg(long)]
    ratio_table: Option<PathBuf>,
}

#[derive(Args)]
struct EvalMetricsArgs {
    /// Ratings CSV.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct FitRatiosArgs {
    /// Ratings CSV.
    #[arg(long = "in")]
    input: PathBuf,
    /// `per-class` or `global`.
    #[arg(long, default_value = "per-class")]
    grouping: String,
    /// Search bounds `lo,hi` applied to every ratio.
    #[arg(long)]
    bounds: Option<String>,
    /// Write the fitted ratio table TOML here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TtestArgs {
    /// File of numbers for group A.
    #[arg(long)]
    a: PathBuf,
    /// File of numbers for group B.
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct ImprovementArgs {
    #[arg(long, allow_hyphen_values = true)]
    before: f64,
    #[arg(long, allow_hyphen_values = true)]
    after: f64,
}

#[derive(Args)]
struct ServeArgs {
    /// Service configuration TOML.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    /// Data directory for the service; a temporary one otherwise.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Align(a) => {
            commands::align(&a.learner, &a.reference, &a.segments, a.out.as_deref())
        }
        Command::Score(a) => commands::score(
            &a.learner,
            &a.segments,
            &a.reference,
            &a.reference_segments,
            a.id.as_deref(),
            a.out.as_deref(),
        ),
        Command::ExaggerateAudio(a) => commands::exaggerate_audio(
            &a.input,
            &a.segments,
            a.target,
            &a.band,
            a.ratio_table.as_deref(),
            a.ratios.as_deref(),
            &a.out,
        ),
        Command::ExaggerateVisual(a) => commands::exaggerate_visual(
            &a.segments,
            a.target,
            &a.band,
            a.level.as_deref(),
            a.color.as_deref(),
            a.out.as_deref(),
        ),
        Command::Accumulate(a) => commands::accumulate(
            &a.scorecards,
            a.profile.as_deref(),
            a.alpha,
            a.out.as_deref(),
        ),
        Command::Select(a) => {
            commands::select(&a.scorecard, a.profile.as_deref(), a.ratio_table.as_deref())
        }
        Command::EvalMetrics(a) => commands::eval_metrics(&a.input),
        Command::FitRatios(a) => {
            commands::fit_ratios(&a.input, &a.grouping, a.bounds.as_deref(), a.out.as_deref())
        }
        Command::Ttest(a) => commands::ttest(&a.a, &a.b),
        Command::Improvement(a) => commands::improvement(a.before, a.after),
        Command::Serve(a) => commands::serve(a.config.as_deref()),
        Command::Demo(a) => commands::demo(a.data_dir.as_deref()),
    };
    match result {
        Ok(Some(doc)) => {
            let text = serde_json::to_string_pretty(&doc).expect("value serializes");
            // A closed pipe is not an error of the command.
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
