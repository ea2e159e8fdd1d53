//! Command-line front end for the place-name harvesting pipeline.
//!
//! `run` executes the whole pipeline from a JSON config; the other
//! subcommands expose each stage boundary so every intermediate is an
//! inspectable file: `ingest` → deduped.csv, `extract` → candidates.csv,
//! `rank` → ranked.csv, `curve` → curve.csv, `select-threshold` → stdout,
//! `footprint` → footprints.geojson, `compare` → matches_<source>.csv.
//! `synth` fabricates a corpus with known ground truth for trying the
//! pipeline end to end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal invariant violation.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use placeharvest::cluster::{
    rank_candidates, read_ranked_csv, spatial_filter, write_ranked_csv, NormalizationMode,
    ScaleSet, DEFAULT_ALPHA_M, DEFAULT_MIN_POINTS,
};
use placeharvest::config::{load_config, NamedInput};
use placeharvest::corpus::{dedup, load_corpus, write_ads_csv};
use placeharvest::error::{Error, Result};
use placeharvest::eval::{
    load_annotation_records, majority_vote, pr_curve, read_curve_csv, select_threshold,
    write_curve_csv, DEFAULT_QUORUM, DEFAULT_TOP_N,
};
use placeharvest::extract::{
    extract_builtin, load_external_annotations, read_candidates_csv, union_candidates,
    write_candidates_csv, ExtractorConfig,
};
use placeharvest::footprint::kde::{DEFAULT_CELL_SIZE_M, DEFAULT_MASS_LEVEL};
use placeharvest::footprint::{convex_hull, kde_contour, kde_surface, write_geojson, Footprint};
use placeharvest::gazetteer::{compare, load_gazetteer, write_match_report_csv};
use placeharvest::pipeline::{run_pipeline, PipelineReport};
use placeharvest::synth::{synth_to_dir, SynthSpec};

#[derive(Parser)]
#[command(
    name = "placeharvest",
    version,
    about = "Harvest local place names from geotagged rental-ad corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an ads CSV, drop malformed rows, collapse reposts and
    /// near-duplicate texts, and write the cleaned corpus.
    Ingest(IngestArgs),
    /// Propose candidate place names from ad texts (and optional external
    /// annotation files) and pool them into candidates.csv.
    Extract(ExtractArgs),
    /// Score pooled candidates by spatial clusterness into ranked.csv.
    Rank(RankArgs),
    /// Sweep the score threshold against annotator ground truth into
    /// curve.csv.
    Curve(CurveArgs),
    /// Pick the operating threshold from a curve and print it.
    SelectThreshold(SelectThresholdArgs),
    /// Build GeoJSON footprints for a list of accepted terms.
    Footprint(FootprintArgs),
    /// Diff accepted terms against gazetteers.
    Compare(CompareArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Run the whole pipeline from a JSON config file; flags override
    /// config values.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Ads CSV file.
    #[arg(long)]
    ads: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Region label recorded in the corpus.
    #[arg(long, default_value = "region")]
    region: String,
}

#[derive(Args)]
struct ExtractArgs {
    /// Cleaned ads CSV (the ingest output).
    #[arg(long)]
    ads: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Region label recorded in the corpus.
    #[arg(long, default_value = "region")]
    region: String,
    /// Disable the capitalized-run extractor.
    #[arg(long)]
    no_capitalized: bool,
    /// Disable the location-cue extractor.
    #[arg(long)]
    no_cue: bool,
    /// External annotation JSONL as SOURCE=PATH; repeatable.
    #[arg(long = "annotation", value_name = "SOURCE=PATH", value_parser = parse_named_input)]
    annotations: Vec<NamedInput>,
    /// Accept only these labels from external annotations; repeatable.
    #[arg(long = "label", value_name = "LABEL")]
    labels: Vec<String>,
}

#[derive(Args)]
struct RankArgs {
    /// Pooled candidates CSV (the extract output).
    #[arg(long)]
    candidates: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Distance ladder base, meters (> 1).
    #[arg(long, default_value_t = DEFAULT_ALPHA_M)]
    alpha: f64,
    /// Entropy-sum count discount.
    #[arg(long, default_value = "inv_sqrt", value_parser = parse_mode)]
    mode: NormalizationMode,
    /// Minimum surviving points for a term to be scored.
    #[arg(long, default_value_t = DEFAULT_MIN_POINTS)]
    min_points: usize,
    /// Worker thread cap; 0 lets the runtime decide.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct CurveArgs {
    /// Ranked terms CSV (the rank output).
    #[arg(long)]
    ranked: PathBuf,
    /// Annotator ground-truth JSONL.
    #[arg(long)]
    ground_truth: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Distinct annotators that must agree on a name.
    #[arg(long, default_value_t = DEFAULT_QUORUM)]
    quorum: usize,
}

#[derive(Args)]
struct SelectThresholdArgs {
    /// Precision-recall curve CSV (the curve output).
    #[arg(long)]
    curve: PathBuf,
    /// Size of the best-F shortlist searched for the highest recall.
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FootprintMethod {
    /// Convex hull of the term's filtered points.
    Hull,
    /// Kernel-density contour enclosing most of the density mass.
    Kde,
}

#[derive(Args)]
struct FootprintArgs {
    /// Pooled candidates CSV with the terms' ad locations.
    #[arg(long)]
    candidates: PathBuf,
    /// Accepted terms, one per line.
    #[arg(long)]
    terms: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Footprint construction method.
    #[arg(long, value_enum, default_value_t = FootprintMethod::Hull)]
    method: FootprintMethod,
    /// Density mass the KDE contour must enclose, in (0, 1].
    #[arg(long, default_value_t = DEFAULT_MASS_LEVEL)]
    mass_level: f64,
    /// KDE grid cell size, meters.
    #[arg(long, default_value_t = DEFAULT_CELL_SIZE_M)]
    cell_size: f64,
    /// KDE bandwidth override, meters (default: Scott's rule).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Worker thread cap; 0 lets the runtime decide.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct CompareArgs {
    /// Accepted terms, one per line.
    #[arg(long)]
    terms: PathBuf,
    /// Gazetteer CSV as SOURCE=PATH; repeatable, at least one.
    #[arg(long = "gazetteer", value_name = "SOURCE=PATH", value_parser = parse_named_input, required = true)]
    gazetteers: Vec<NamedInput>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for ads.csv, ground_truth.jsonl, centers.csv.
    #[arg(long)]
    out: PathBuf,
    /// Place terms planted as spatial clusters.
    #[arg(long, default_value_t = 10)]
    places: usize,
    /// Noise terms scattered uniformly over the region box.
    #[arg(long, default_value_t = 10)]
    noise: usize,
    /// Ads generated per term.
    #[arg(long, default_value_t = 15)]
    mentions: usize,
    /// Cluster standard deviation, meters per axis.
    #[arg(long, default_value_t = 300.0)]
    sigma: f64,
    /// Region box side length, kilometers.
    #[arg(long, default_value_t = 40.0)]
    box_km: f64,
    /// RNG seed; reruns with the same seed are byte-identical.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct RunArgs {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap for the rank and footprint stages.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the configured count discount.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<NormalizationMode>,
    /// Override the configured ladder base, meters.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the configured minimum point count.
    #[arg(long)]
    min_points: Option<usize>,
    /// Override (or supply) the score cutoff for the final list.
    #[arg(long)]
    threshold: Option<f64>,
}

fn parse_named_input(s: &str) -> std::result::Result<NamedInput, String> {
    let (source, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected SOURCE=PATH, got `{s}`"))?;
    if source.is_empty() || path.is_empty() {
        return Err(format!("expected SOURCE=PATH with both parts non-empty, got `{s}`"));
    }
    Ok(NamedInput {
        source: source.to_string(),
        path: PathBuf::from(path),
    })
}

fn parse_mode(s: &str) -> std::result::Result<NormalizationMode, String> {
    NormalizationMode::from_str(s).map_err(|e| e.to_string())
}

fn open_file(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn create_in(dir: &Path, name: &str) -> Result<(PathBuf, std::fs::File)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((path, file))
}

fn read_terms(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn worker_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let load = load_corpus(&args.ads, &args.region)?;
    let corpus = dedup(&load.corpus);
    let (path, file) = create_in(&args.out, "deduped.csv")?;
    write_ads_csv(&corpus.ads, file)?;
    for skip in load.skipped.iter().take(5) {
        eprintln!("skipped line {}: {}", skip.line, skip.reason);
    }
    if load.skipped.len() > 5 {
        eprintln!("... and {} more skipped rows", load.skipped.len() - 5);
    }
    println!(
        "{} ads loaded, {} rows skipped, {} after duplicate removal -> {}",
        load.corpus.ads.len(),
        load.skipped.len(),
        corpus.ads.len(),
        path.display()
    );
    Ok(())
}

fn cmd_extract(args: ExtractArgs) -> Result<()> {
    let load = load_corpus(&args.ads, &args.region)?;
    let corpus = load.corpus;
    let mut cfg = ExtractorConfig::default();
    if !args.labels.is_empty() {
        cfg.label_allowlist = Some(args.labels.iter().cloned().collect());
    }
    let mut spans = extract_builtin(&corpus, &cfg, !args.no_capitalized, !args.no_cue);
    for input in &args.annotations {
        let loaded = load_external_annotations(&input.path, &input.source, &cfg)?;
        if !loaded.skipped_lines.is_empty() {
            eprintln!(
                "{}: {} malformed lines skipped",
                input.path.display(),
                loaded.skipped_lines.len()
            );
        }
        spans.extend(loaded.spans);
    }
    let n_spans = spans.len();
    let (set, report) = union_candidates(&corpus, &spans);
    let dropped = report.unknown_post + report.bad_offsets + report.surface_mismatch;
    if dropped > 0 {
        eprintln!(
            "{dropped} spans did not match the corpus ({} unknown ads, {} bad offsets, {} text mismatches)",
            report.unknown_post, report.bad_offsets, report.surface_mismatch
        );
    }
    let (path, file) = create_in(&args.out, "candidates.csv")?;
    write_candidates_csv(&set, file)?;
    println!(
        "{n_spans} spans pooled into {} candidate terms -> {}",
        set.entries.len(),
        path.display()
    );
    Ok(())
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let set = read_candidates_csv(open_file(&args.candidates)?, &args.candidates)?;
    let scales = ScaleSet::new(args.alpha)?;
    let pool = worker_pool(args.threads)?;
    let ranked = pool.install(|| rank_candidates(&set, &scales, args.mode, args.min_points))?;
    let (path, file) = create_in(&args.out, "ranked.csv")?;
    write_ranked_csv(&ranked, file)?;
    println!(
        "{} of {} terms scored -> {}",
        ranked.len(),
        set.entries.len(),
        path.display()
    );
    Ok(())
}

fn cmd_curve(args: CurveArgs) -> Result<()> {
    let ranked = read_ranked_csv(open_file(&args.ranked)?, &args.ranked)?;
    let records = load_annotation_records(&args.ground_truth)?;
    let truth = majority_vote(&records, args.quorum)?;
    let curve = pr_curve(&ranked, &truth)?;
    let (path, file) = create_in(&args.out, "curve.csv")?;
    write_curve_csv(&curve, file)?;
    println!("{} thresholds swept -> {}", curve.points.len(), path.display());
    Ok(())
}

fn cmd_select_threshold(args: SelectThresholdArgs) -> Result<()> {
    let curve = read_curve_csv(open_file(&args.curve)?, &args.curve)?;
    let threshold = select_threshold(&curve, args.top_n)?;
    println!("{threshold}");
    Ok(())
}

fn cmd_footprint(args: FootprintArgs) -> Result<()> {
    let set = read_candidates_csv(open_file(&args.candidates)?, &args.candidates)?;
    let terms = read_terms(&args.terms)?;
    let pool = worker_pool(args.threads)?;
    let per_term: Vec<Vec<(String, Footprint)>> = pool.install(|| {
        terms
            .par_iter()
            .map(|term| -> Result<Vec<(String, Footprint)>> {
                let entry = set.entries.get(term).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "term `{term}` is not in the candidates file"
                    ))
                })?;
                let filtered = spatial_filter(&entry.points)?;
                match args.method {
                    FootprintMethod::Hull => match convex_hull(&filtered) {
                        Ok(poly) => Ok(vec![(term.clone(), Footprint::Polygon(poly))]),
                        Err(Error::DegenerateGeometry(_)) => {
                            Ok(vec![(term.clone(), Footprint::Points(filtered))])
                        }
                        Err(e) => Err(e),
                    },
                    FootprintMethod::Kde => {
                        let contours = kde_surface(&filtered, args.bandwidth, args.cell_size)
                            .and_then(|grid| kde_contour(&grid, args.mass_level));
                        match contours {
                            Ok(polys) => Ok(polys
                                .into_iter()
                                .map(|p| (term.clone(), Footprint::Polygon(p)))
                                .collect()),
                            // Too few or zero-variance points carry no
                            // density surface; ship the points themselves.
                            Err(Error::InvalidInput(_) | Error::ZeroVariance(_)) => {
                                Ok(vec![(term.clone(), Footprint::Points(filtered))])
                            }
                            Err(e) => Err(e),
                        }
                    }
                }
            })
            .collect::<Result<_>>()
    })?;
    let features: Vec<(String, Footprint)> = per_term.into_iter().flatten().collect();
    let (path, file) = create_in(&args.out, "footprints.geojson")?;
    write_geojson(&features, file)?;
    println!(
        "{} features for {} terms -> {}",
        features.len(),
        terms.len(),
        path.display()
    );
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let terms = read_terms(&args.terms)?;
    for g in &args.gazetteers {
        let loaded = load_gazetteer(&g.path, &g.source)?;
        if !loaded.skipped.is_empty() {
            eprintln!(
                "{}: {} unusable rows skipped",
                g.path.display(),
                loaded.skipped.len()
            );
        }
        let report = compare(&terms, &loaded.entries);
        let (direct, indirect, unmatched) = report.counts();
        let (path, file) = create_in(&args.out, &format!("matches_{}.csv", g.source))?;
        write_match_report_csv(&report, file)?;
        println!(
            "{}: {direct} direct, {indirect} indirect, {unmatched} unmatched -> {}",
            g.source,
            path.display()
        );
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_place_terms: args.places,
        n_noise_terms: args.noise,
        mentions_per_term: args.mentions,
        cluster_sigma_m: args.sigma,
        region_box_km: args.box_km,
        seed: args.seed,
    };
    let (out, files) = synth_to_dir(&spec, &args.out)?;
    println!(
        "{} ads over {} place and {} noise terms",
        out.corpus.ads.len(),
        out.places.len(),
        out.noise_terms.len()
    );
    for path in [&files.ads, &files.ground_truth, &files.centers] {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = load_config(&args.config)?;
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    if let Some(mode) = args.mode {
        config.mode = mode;
    }
    if let Some(alpha) = args.alpha {
        config.alpha_m = alpha;
    }
    if let Some(min_points) = args.min_points {
        config.min_points = min_points;
    }
    if let Some(threshold) = args.threshold {
        config.threshold = Some(threshold);
    }
    let report = run_pipeline(&config, args.threads)?;
    print_report(&report);
    Ok(())
}

fn print_report(report: &PipelineReport) {
    println!("region: {}", report.region_id);
    println!(
        "ingest: {} ads loaded, {} rows skipped, {} after duplicate removal",
        report.ads_loaded, report.rows_skipped, report.ads_deduped
    );
    let spans: Vec<String> = report
        .spans_by_source
        .iter()
        .map(|(source, n)| format!("{source}={n}"))
        .collect();
    println!(
        "extract: {}",
        if spans.is_empty() {
            "no spans".to_string()
        } else {
            spans.join(" ")
        }
    );
    let dropped = report.union.unknown_post
        + report.union.bad_offsets
        + report.union.surface_mismatch
        + report.union.empty_term;
    println!(
        "union: {} candidate terms ({dropped} spans dropped)",
        report.candidate_terms
    );
    println!("rank: {} terms scored", report.ranked_terms);
    println!(
        "threshold: {} ({})",
        report.threshold,
        if report.threshold_selected {
            "selected from curve"
        } else {
            "from configuration"
        }
    );
    println!(
        "selected: {} terms ({} excluded)",
        report.selected_terms.len(),
        report.excluded_terms
    );
    for path in &report.artifacts {
        println!("wrote {}", path.display());
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Curve(args) => cmd_curve(args),
        Command::SelectThreshold(args) => cmd_select_threshold(args),
        Command::Footprint(args) => cmd_footprint(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Run(args) => cmd_run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
