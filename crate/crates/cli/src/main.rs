//! `facsca`: rule tables, pattern database, training, ingestion, query and evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use facsca::ca::rule_table;
use facsca::config::Config;
use facsca::facs::{
    classify_au_set, expand_expression, expression_def, parse_pattern, pattern_database, render_pattern,
    render_pattern_database, AuSet, ExpressionLabel, RenderMode,
};
use facsca::features::templates::save_template_dir;
use facsca::image::save_image;
use facsca::pipeline::{ingest, Models, ShotManifest, FACES_DIR};
use facsca::retrieval::{
    evaluate_all, load_index, metrics_from_counts, metrics_table, query, save_index, truth_from_manifest, Probe,
    QueryResult, ShotIndex,
};
use facsca::synth::{face_chip_gray, face_chip_rgb, frame, template_chip, IDENTITIES};
use facsca::{Error, Result};

#[derive(Parser)]
#[command(name = "facsca", version, about = "Facial-expression indexing and retrieval for video shots")]
struct Cli {
    /// Flat `key = value` config file; unset keys keep their defaults.
    #[arg(long, global = true, env = "FACSCA_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print all 512 neighbourhood rules as `rule_number: mask` lines.
    Rules(OutArgs),
    /// Write the expression pattern database (`<expression>\t<pattern>` lines).
    BuildPatterns(BuildPatternsArgs),
    /// Train eigenface and AU-template models from a gallery directory.
    Train(TrainArgs),
    /// Analyse the shots in a manifest and write a shot index.
    Ingest(IngestArgs),
    /// Retrieve shots matching an AU set or a probe frame.
    Query(QueryArgs),
    /// Score per-expression retrieval against ground-truth labels.
    Eval(EvalArgs),
    /// Generate a synthetic gallery, frames and manifests.
    Fixtures(FixturesArgs),
    /// Print the effective configuration.
    Config,
}

#[derive(Args)]
struct OutArgs {
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// All six segments, each terminated by `$`.
    Canonical,
    /// Compressed form: lip segments only when active.
    Paper,
}

impl From<Mode> for RenderMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Canonical => RenderMode::Canonical,
            Mode::Paper => RenderMode::PaperCompat,
        }
    }
}

#[derive(Args)]
struct BuildPatternsArgs {
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Pattern rendering.
    #[arg(long, value_enum, default_value_t = Mode::Canonical)]
    mode: Mode,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of `<region>_<au>.pgm` templates with a `faces/` subdirectory.
    #[arg(long, value_name = "DIR")]
    gallery: PathBuf,
    /// Output model directory.
    #[arg(long, value_name = "DIR")]
    models: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    /// JSON shot manifest.
    #[arg(long, value_name = "PATH")]
    manifest: PathBuf,
    /// Trained model directory; required unless every shot carries `aus`.
    #[arg(long, value_name = "DIR")]
    models: Option<PathBuf>,
    /// Output index path.
    #[arg(long, value_name = "PATH", default_value = "index.json")]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Shot index written by `ingest`.
    #[arg(long, value_name = "PATH", default_value = "index.json")]
    index: PathBuf,
    /// Probe AU set, e.g. `6,12`.
    #[arg(long, value_name = "CSV", conflicts_with = "frame", required_unless_present = "frame")]
    aus: Option<String>,
    /// Probe frame image (PPM); needs `--models`.
    #[arg(long, value_name = "PATH")]
    frame: Option<PathBuf>,
    /// Trained model directory, used by frame probes.
    #[arg(long, value_name = "DIR")]
    models: Option<PathBuf>,
    /// Rendering of the probe pattern.
    #[arg(long, value_enum, default_value_t = Mode::Canonical)]
    mode: Mode,
    /// Also write the result as JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Shot index written by `ingest`.
    #[arg(long, value_name = "PATH", default_value = "index.json")]
    index: PathBuf,
    /// Manifest supplying ground-truth labels; defaults to the labels stored in the index.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Also write the metrics as JSON.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Frames per generated shot.
    #[arg(long, default_value_t = 3)]
    frames: usize,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn build_patterns(args: &BuildPatternsArgs) -> Result<()> {
    let mode = RenderMode::from(args.mode);
    let mut rows = pattern_database();
    if !matches!(mode, RenderMode::Canonical) {
        for (_, p) in &mut rows {
            *p = render_pattern(&parse_pattern(p)?, mode);
        }
        rows.sort_by(|a, b| (a.0.name(), &a.1).cmp(&(b.0.name(), &b.1)));
        rows.dedup();
    }
    emit(&render_pattern_database(&rows), args.out.as_deref())
}

fn train(args: &TrainArgs, config: &Config) -> Result<()> {
    let models = Models::train_from_dir(&args.gallery, config)?;
    models.save(&args.models)?;
    println!(
        "trained {} eigenfaces, {} gallery faces -> {}",
        models.eigen.components(),
        models.eigen.gallery().len(),
        args.models.display()
    );
    Ok(())
}

fn ingest_cmd(args: &IngestArgs, config: &Config) -> Result<()> {
    let manifest = ShotManifest::load(&args.manifest)?;
    let models = args.models.as_deref().map(|d| Models::load(d, config)).transpose()?;
    let outcomes = ingest(&manifest, models.as_ref());
    let index = ShotIndex::build(&outcomes);
    save_index(&index, &args.out)?;
    for r in &index.records {
        println!("{}\t{}\t{} frames", r.shot_id, r.shot_expression, r.frame_count);
    }
    for f in &index.failures {
        eprintln!("WARN shot {}: {}", f.shot_id, f.error);
    }
    println!(
        "indexed {} shots ({} failed) -> {}",
        index.records.len(),
        index.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn render_query(result: &QueryResult, mode: RenderMode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "label\t{}", result.label);
    let _ = writeln!(out, "pattern\t{}", render_pattern(&result.pattern, mode));
    for h in &result.hits {
        let _ = writeln!(
            out,
            "{}\tscore={}\tframes=0-{}",
            h.shot_id,
            h.score,
            h.frame_count.saturating_sub(1)
        );
    }
    out
}

fn query_cmd(args: &QueryArgs, config: &Config) -> Result<()> {
    let index = load_index(&args.index)?;
    let probe = match (&args.aus, &args.frame) {
        (Some(csv), _) => Probe::Aus(csv.parse::<AuSet>()?),
        (None, Some(path)) => Probe::Frame(path.clone()),
        (None, None) => unreachable!("clap requires one probe"),
    };
    let models = args.models.as_deref().map(|d| Models::load(d, config)).transpose()?;
    let result = query(&index, &probe, models.as_ref(), &config.retrieval)?;
    print!("{}", render_query(&result, args.mode.into()));
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&result).expect("query result serialises");
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

fn eval_cmd(args: &EvalArgs, config: &Config) -> Result<()> {
    let index = load_index(&args.index)?;
    let truth: BTreeMap<String, ExpressionLabel> = match &args.manifest {
        Some(path) => truth_from_manifest(&ShotManifest::load(path)?)?,
        None => index.truth(),
    };
    let beta = config.retrieval.beta;
    let metrics = evaluate_all(&index, &truth, beta)?;
    let (tp, fp, fn_) = metrics
        .iter()
        .fold((0, 0, 0), |(a, b, c), m| (a + m.tp, b + m.fp, c + m.fn_));
    let micro = metrics_from_counts(ExpressionLabel::Unknown, tp, fp, fn_, 0, beta);
    print!("{}", metrics_table(&metrics));
    println!(
        "micro precision={:.4} recall={:.4} F={:.4}",
        micro.precision, micro.recall, micro.f_measure
    );
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&metrics).expect("metrics serialise");
        write_file(path, &(json + "\n"))?;
    }
    Ok(())
}

/// First expansion of each expression that classifies back to it.
fn representative(label: ExpressionLabel) -> AuSet {
    expand_expression(expression_def(label).expect("expression has a definition"))
        .into_iter()
        .find(|&s| classify_au_set(s).label == label)
        .expect("every expression has a self-classifying expansion")
}

fn fixtures(args: &FixturesArgs, config: &Config) -> Result<()> {
    let size = config.features.chip_size;
    let gallery = args.out.join("gallery");
    let mut templates = BTreeMap::new();
    for region in facsca::facs::Region::CANONICAL {
        templates.insert((region, None), template_chip(region, None, size));
        for &au in region.au_list() {
            templates.insert((region, Some(au)), template_chip(region, Some(au), size));
        }
    }
    save_template_dir(&gallery, &templates)?;
    let faces = gallery.join(FACES_DIR);
    std::fs::create_dir_all(&faces).map_err(|e| Error::io(&faces, e))?;
    for id in 0..IDENTITIES {
        save_image(&face_chip_gray(id, AuSet::EMPTY, size), &faces.join(format!("actor{id}_0.pgm")))?;
    }

    let frames_dir = args.out.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let (w, h) = (size * 2, size * 2);
    let mut vision = Vec::new();
    let mut bypass = Vec::new();
    for (k, &label) in ExpressionLabel::EXPRESSIONS.iter().enumerate() {
        let aus = representative(label);
        let shot_id = format!("shot{k:02}");
        let mut frames = Vec::new();
        for f in 0..args.frames {
            let name = format!("{shot_id}_f{f}.ppm");
            let img = frame(w, h, &[(size / 4 + f % 4, size / 4, face_chip_rgb(k % IDENTITIES, aus, size))]);
            save_image(&img, &frames_dir.join(&name))?;
            frames.push(format!("frames/{name}"));
        }
        vision.push(serde_json::json!({"shot_id": shot_id, "frames": frames, "label": label.name()}));
        let sets: Vec<AuSet> = vec![aus; args.frames];
        bypass.push(serde_json::json!({"shot_id": shot_id, "aus": sets, "label": label.name()}));
    }
    let pretty = |v: &Vec<serde_json::Value>| serde_json::to_string_pretty(v).expect("json") + "\n";
    write_file(&args.out.join("manifest.json"), &pretty(&vision))?;
    write_file(&args.out.join("aus_manifest.json"), &pretty(&bypass))?;
    println!("wrote fixtures to {}", args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Rules(a) => emit(&rule_table(), a.out.as_deref()),
        Command::BuildPatterns(a) => build_patterns(a),
        Command::Train(a) => train(a, &config),
        Command::Ingest(a) => ingest_cmd(a, &config),
        Command::Query(a) => query_cmd(a, &config),
        Command::Eval(a) => eval_cmd(a, &config),
        Command::Fixtures(a) => fixtures(a, &config),
        Command::Config => emit(&config.echo(), None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("ERROR usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
