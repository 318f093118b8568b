//! Subcommands. [`run`] writes its report to `out` and maps failures to
//! [`CliError`], whose [`CliError::exit_code`] is what the binary returns.

use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alfa_core::classifier::{evaluate, load_model, save_model, train, ClassifierError, ForestModel, TrainParams};
use alfa_core::dataset::{read_table, write_table, FeatureRow};
use alfa_core::extract::UNIDENTIFIABLE_MESSAGE;
use alfa_core::fast::fast;
use alfa_core::features::GridSource;
use alfa_core::grid::BinaryGrid;
use alfa_core::image::{load_image, ImageError};
use alfa_core::pipeline::{analyze, Analysis, PipelineOptions};
use alfa_core::protocol::EccLevel;
use alfa_core::synth::corpus::{parse_manifest, parse_url_list, write_corpus};
use alfa_core::synth::{make_corpus, render, synthetic_urls, StyleAssignment, StyleSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::classify_bytes;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("cannot identify fancy QR code")]
    Unidentifiable,
    #[error("model error: {0}")]
    Model(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Invalid(_) => 1,
            CliError::Unidentifiable => 2,
            CliError::Model(_) => 3,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        CliError::Model(e.to_string())
    }
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "alfa", version, about = "Structural classifier for fancy QR codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract and report the module grid of an image.
    Inspect(InspectArgs),
    /// Classify an image with a trained model.
    Classify(ClassifyArgs),
    /// Run function-pattern recovery on a grid file or image.
    Recover(RecoverArgs),
    /// Generate a labelled specimen corpus.
    Synth(SynthArgs),
    /// Compute the feature table of a corpus.
    Featurize(FeaturizeArgs),
    /// Train a model on a feature table.
    Train(TrainArgs),
    /// Evaluate a model on a feature table.
    Eval(EvalArgs),
    /// Serve the model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Raw,
    Fast,
}

impl SourceArg {
    fn options(self) -> PipelineOptions {
        match self {
            SourceArg::Raw => PipelineOptions::raw(),
            SourceArg::Fast => PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub image: PathBuf,
    /// Skip function-pattern recovery.
    #[arg(long)]
    pub no_fast: bool,
    /// Write the grid in text form.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
    /// Write a plain black-on-white PPM render of the grid.
    #[arg(long)]
    pub render_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub image: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Print the response as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long, value_enum, default_value = "fast")]
    pub grid_source: SourceArg,
    /// Decision threshold on the phishing score (defaults to the model's).
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Grid text file or PGM/PPM image.
    pub input: PathBuf,
    /// Write the recovered grid here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AssignmentArg {
    Cross,
    OnePerUrl,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// `url,label` lines; synthetic URLs are generated when absent.
    #[arg(long)]
    pub urls: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub phishing: usize,
    #[arg(long, default_value_t = 50)]
    pub legitimate: usize,
    /// Comma-separated style presets.
    #[arg(long, value_delimiter = ',', default_value = "plain,circle,rounded,diamond,dots,color,logo,inverted")]
    pub styles: Vec<String>,
    #[arg(long, default_value = "H")]
    pub ecc: EccLevel,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "one-per-url")]
    pub assignment: AssignmentArg,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Corpus directory containing manifest.csv.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "fast")]
    pub grid_source: SourceArg,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "evaluation")]
    pub title: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Inspect(a) => inspect(&a, out),
        Command::Classify(a) => classify_cmd(&a, out),
        Command::Recover(a) => recover(&a, out),
        Command::Synth(a) => synth(&a, out),
        Command::Featurize(a) => featurize(&a, out),
        Command::Train(a) => train_cmd(&a, out),
        Command::Eval(a) => eval(&a, out),
        Command::Serve(a) => serve_cmd(&a),
    }
}

fn load(path: &Path) -> Result<ForestModel, CliError> {
    load_model(path).map_err(|e| CliError::Model(format!("{}: {e}", path.display())))
}

fn inspect_report(a: &Analysis) -> String {
    let ex = &a.extraction;
    let lines = [
        ("version", ex.grid.version().to_string()),
        ("side", ex.grid.side().to_string()),
        ("ecc", ex.format.ecc.to_string()),
        ("mask", ex.format.mask.to_string()),
        ("format_copy1_valid", ex.format.copy1_valid.to_string()),
        ("format_copy2_valid", ex.format.copy2_valid.to_string()),
        ("format_copies_disagree", ex.format.copies_disagree.to_string()),
        ("inverted", a.pre.inverted.to_string()),
        ("otsu_threshold", a.pre.otsu_threshold.to_string()),
        ("white_ratio", format!("{:.4}", a.pre.white_ratio)),
        ("threshold_used", ex.threshold_used.to_string()),
        ("light_fraction_first_pass", format!("{:.4}", ex.light_fraction_first_pass)),
        ("module_size", format!("{:.3}", ex.module_size)),
        ("finder_fixes", a.recovery.finder_fixes.to_string()),
        ("alignment_fixes", a.recovery.alignment_fixes.to_string()),
        ("separator_fixes", a.recovery.separator_fixes.to_string()),
        ("timing_fixes", a.recovery.timing_fixes.to_string()),
        ("total_fixes", a.recovery.total_fixes().to_string()),
    ];
    lines.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn inspect(a: &InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let img = load_image(&a.image)?;
    let opts = PipelineOptions {
        use_fast: !a.no_fast,
        grid_source: if a.no_fast { GridSource::Raw } else { GridSource::Fast },
        ..PipelineOptions::default()
    };
    let analysis = analyze(&img, &opts).map_err(|_| CliError::Unidentifiable)?;
    if let Some(p) = &a.grid_out {
        fs::write(p, analysis.recovered.to_text()).map_err(io_at(p))?;
    }
    if let Some(p) = &a.render_out {
        fs::write(p, render(&analysis.recovered, &StyleSpec::plain()).to_ppm()).map_err(io_at(p))?;
    }
    out.write_all(inspect_report(&analysis).as_bytes())?;
    Ok(())
}

fn classify_cmd(a: &ClassifyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.model)?;
    let bytes = fs::read(&a.image).map_err(io_at(&a.image))?;
    let resp = classify_bytes(&bytes, &model, &a.grid_source.options(), a.threshold)?;
    if a.json {
        out.write_all(resp.to_json().as_bytes())?;
    } else if let Some(err) = &resp.error {
        writeln!(out, "error={err}")?;
    } else {
        let fast = resp.fast_report.expect("set on success");
        writeln!(out, "label={}", resp.label.as_deref().unwrap_or_default())?;
        writeln!(out, "score={:.6}", resp.score.unwrap_or_default())?;
        writeln!(out, "version={}", resp.version.unwrap_or_default())?;
        writeln!(out, "ecc={}", resp.ecc.map(|e| e.to_string()).unwrap_or_default())?;
        writeln!(out, "mask={}", resp.mask.unwrap_or_default())?;
        writeln!(out, "threshold_used={}", resp.threshold_used.unwrap_or_default())?;
        writeln!(out, "inverted={}", resp.inverted.unwrap_or_default())?;
        writeln!(
            out,
            "fast_fixes={},{},{},{}",
            fast.finder, fast.alignment, fast.separator, fast.timing
        )?;
    }
    if resp.is_error() {
        return Err(CliError::Unidentifiable);
    }
    Ok(())
}

fn recover(a: &RecoverArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = fs::read(&a.input).map_err(io_at(&a.input))?;
    let before = if bytes.starts_with(b"version") {
        let text = String::from_utf8(bytes).map_err(|e| CliError::Invalid(e.to_string()))?;
        BinaryGrid::from_text(&text).map_err(|e| CliError::Invalid(e.to_string()))?
    } else {
        let img = alfa_core::image::decode_gray(&bytes)?;
        analyze(&img, &PipelineOptions::raw())
            .map_err(|_| CliError::Unidentifiable)?
            .extraction
            .grid
    };
    let (after, report) = fast(&before);
    if let Some(p) = &a.out {
        fs::write(p, after.to_text()).map_err(io_at(p))?;
    }
    write!(out, "before:\n{}after:\n{}", before.to_text(), after.to_text())?;
    writeln!(out, "finder_fixes={}", report.finder_fixes)?;
    writeln!(out, "alignment_fixes={}", report.alignment_fixes)?;
    writeln!(out, "separator_fixes={}", report.separator_fixes)?;
    writeln!(out, "timing_fixes={}", report.timing_fixes)?;
    writeln!(out, "total_fixes={}", report.total_fixes())?;
    writeln!(out, "total_function_modules={}", report.total_function_modules)?;
    Ok(())
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let urls = match &a.urls {
        Some(p) => parse_url_list(&fs::read_to_string(p).map_err(io_at(p))?).map_err(CliError::Invalid)?,
        None => synthetic_urls(a.phishing, a.legitimate, a.seed),
    };
    let styles = a
        .styles
        .iter()
        .map(|name| {
            StyleSpec::preset(name)
                .map(|s| (name.clone(), s))
                .ok_or_else(|| CliError::Invalid(format!("unknown style {name:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let assignment = match a.assignment {
        AssignmentArg::Cross => StyleAssignment::Cross,
        AssignmentArg::OnePerUrl => StyleAssignment::OnePerUrl,
    };
    let items = make_corpus(&urls, &styles, a.ecc, a.seed, assignment);
    write_corpus(&a.out, &items).map_err(io_at(&a.out))?;
    let failed = items.iter().filter(|i| i.specimen.is_err()).count();
    writeln!(
        out,
        "wrote {} specimens ({failed} encode errors) to {}",
        items.len() - failed,
        a.out.display()
    )?;
    Ok(())
}

/// Feature rows for every rendered specimen in a corpus directory; scans
/// that fail are kept as unsuccessful rows.
pub fn featurize_corpus(dir: &Path, opts: &PipelineOptions) -> Result<Vec<FeatureRow>, CliError> {
    let manifest_path = dir.join("manifest.csv");
    let manifest = fs::read_to_string(&manifest_path).map_err(io_at(&manifest_path))?;
    let rows = parse_manifest(&manifest).map_err(CliError::Invalid)?;
    let mut table = Vec::new();
    for row in rows.into_iter().filter(|r| !r.path.is_empty()) {
        let img = load_image(dir.join(&row.path))?;
        table.push(FeatureRow {
            features: analyze(&img, opts).ok().map(|a| a.features),
            label: row.label,
        });
    }
    Ok(table)
}

fn featurize(a: &FeaturizeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = featurize_corpus(&a.corpus, &a.grid_source.options())?;
    fs::write(&a.out, write_table(&table)).map_err(io_at(&a.out))?;
    let failed = table.iter().filter(|r| r.features.is_none()).count();
    writeln!(out, "featurized {} specimens ({failed} unsuccessful)", table.len())?;
    Ok(())
}

fn read_features(path: &Path) -> Result<Vec<FeatureRow>, CliError> {
    read_table(&fs::read_to_string(path).map_err(io_at(path))?).map_err(CliError::Invalid)
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let rows: Vec<_> = read_features(&a.features)?
        .into_iter()
        .filter_map(|r| r.features.map(|f| (f, r.label)))
        .collect();
    let params = TrainParams {
        n_trees: a.trees,
        max_depth: a.depth,
        seed: a.seed,
    };
    let model = train(&rows, params)?;
    save_model(&model, &a.out)?;
    writeln!(out, "trained {} trees on {} rows", model.n_trees, rows.len())?;
    Ok(())
}

fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load(&a.model)?;
    let rows: Vec<_> = read_features(&a.features)?
        .into_iter()
        .map(|r| (r.features, r.label))
        .collect();
    out.write_all(evaluate(&model, &rows).table(&a.title).as_bytes())?;
    Ok(())
}

fn serve_cmd(a: &ServeArgs) -> Result<(), CliError> {
    let model = Arc::new(load(&a.model)?);
    let app = crate::service::router(model, PipelineOptions::default(), a.threshold);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crate::service::serve(SocketAddr::new(a.host, a.port), app))?;
    Ok(())
}

/// Message printed on stderr for a failed command.
pub fn describe(err: &CliError) -> String {
    match err {
        CliError::Unidentifiable => UNIDENTIFIABLE_MESSAGE.to_string(),
        other => format!("error: {other}"),
    }
}
