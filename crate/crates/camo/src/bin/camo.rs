//! Command-line front end: score candidate honeyfile names against a
//! directory, fit and dump a directory's name mixture, run the
//! local-vs-sampled evaluation over a manifest, scan filesystems, and emit
//! directory-size histograms.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use camo::camouflage::{fit_directory_mixture, rank_candidates, reports_to_csv, DirectoryContext};
use camo::corpus::{
    enumerate_directories, filter_repositories, load_manifest, scan_filesystem, SamplePlan,
    ScanOptions,
};
use camo::embedding::{load_text_vectors, EmbeddingProvider, HashedProvider, NgramConfig};
use camo::error::CamoError;
use camo::stats::{
    log_histogram, per_directory_csv, pooled_scores_csv, power_law_fit, run_experiment,
    ExperimentOptions,
};
use camo::vmf::{FitConfig, MixtureDump};

#[derive(Parser)]
#[command(name = "camo", version, about = "Honeyfile name camouflage scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct CommonOpts {
    /// Seed for every random choice (embedding hashing, EM restarts, sampling)
    #[arg(long, env = "CAMO_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads; output does not depend on this
    #[arg(long, env = "CAMO_JOBS")]
    jobs: Option<usize>,
    /// Minimum n-gram length
    #[arg(long, default_value_t = 3)]
    min_n: usize,
    /// Maximum n-gram length
    #[arg(long, default_value_t = 6)]
    max_n: usize,
    /// Embedding dimension
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Hash bucket count for the default embedder
    #[arg(long, default_value_t = 2_000_000)]
    buckets: u64,
    /// Optional textual vector file; out-of-vocabulary names fall back to
    /// the hashed embedder
    #[arg(long)]
    vec_file: Option<PathBuf>,
    /// Smallest mixture order to try
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    /// Largest mixture order to try
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    /// EM restarts per k
    #[arg(long, default_value_t = 4)]
    restarts: usize,
    /// EM iteration cap
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    /// Relative log-likelihood tolerance for EM convergence
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl CommonOpts {
    fn ngram_config(&self) -> NgramConfig {
        NgramConfig {
            min_n: self.min_n,
            max_n: self.max_n,
            dim: self.dim,
            bucket_count: self.buckets,
            seed: self.seed,
        }
    }

    fn fit_config(&self) -> FitConfig {
        FitConfig {
            k: self.k_min,
            max_iters: self.max_iters,
            tol: self.tol,
            restarts: self.restarts,
            seed: self.seed,
        }
    }

    fn provider(&self) -> Result<Box<dyn EmbeddingProvider>, CamoError> {
        let cfg = self.ngram_config();
        match &self.vec_file {
            Some(path) => Ok(Box::new(load_text_vectors(path, &cfg)?)),
            None => Ok(Box::new(HashedProvider::new(cfg)?)),
        }
    }

    fn init_threads(&self) {
        if let Some(jobs) = self.jobs {
            // ignore the error if a pool already exists (tests)
            let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score candidate honeyfile names against a directory
    Score {
        #[command(flatten)]
        common: CommonOpts,
        /// Directory whose filenames form the camouflage context
        #[arg(long)]
        dir: PathBuf,
        /// Candidate names to score
        #[arg(required = true)]
        candidates: Vec<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        /// Write to this file instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Include subdirectory names in the context
        #[arg(long)]
        include_subdirs: bool,
    },
    /// Fit a vMF mixture to a directory's filenames and dump it
    Fit {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        dir: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        include_subdirs: bool,
    },
    /// Run the local-vs-sampled evaluation over a repository manifest
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        /// JSON-Lines manifest, one repository per line
        #[arg(long)]
        manifest: PathBuf,
        /// Cap on the number of directories (seeded subsample)
        #[arg(long)]
        max_directories: Option<usize>,
        /// Decoy names sampled per directory
        #[arg(long, default_value_t = 1)]
        samples_per_dir: usize,
        /// Directory for report.json and the two CSVs
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Score subdirectory names too
        #[arg(long)]
        include_subdirs: bool,
    },
    /// Walk a filesystem tree and list per-directory item counts
    Scan {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        max_depth: Option<usize>,
        /// Skip dotfiles
        #[arg(long)]
        no_hidden: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: OutputFormat,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Histogram of directory item counts, with a power-law fit when possible
    Histogram {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn exit_code_for(err: &CamoError) -> u8 {
    match err {
        CamoError::DegenerateVector
        | CamoError::DegenerateMean
        | CamoError::DegenerateDirectory
        | CamoError::DegenerateDistribution(_) => 3,
        _ => 2,
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CamoError> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(CamoError::Io),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                // a closed pipe (e.g. `camo ... | head`) is not our error
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(CamoError::Io),
            }
        }
    }
}

/// Immediate children of a filesystem directory, files only unless
/// `include_subdirs`, sorted for determinism.
fn directory_names(dir: &Path, include_subdirs: bool) -> Result<Vec<String>, CamoError> {
    if !dir.is_dir() {
        return Err(CamoError::InvalidInput(format!("{} is not a directory", dir.display())));
    }
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let ft = entry.file_type()?;
        if ft.is_dir() && !include_subdirs {
            continue;
        }
        names.push(entry.file_name().to_string_lossy().into_owned());
    }
    names.sort();
    Ok(names)
}

fn cmd_score(
    common: &CommonOpts,
    dir: &Path,
    candidates: &[String],
    format: OutputFormat,
    output: Option<&Path>,
    include_subdirs: bool,
) -> Result<(), CamoError> {
    let provider = common.provider()?;
    let names = directory_names(dir, include_subdirs)?;
    let ctx = DirectoryContext::new(dir.display().to_string(), names, provider.as_ref())?;
    let reports = rank_candidates(candidates, &ctx, provider.as_ref(), &common.fit_config())?;
    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&reports)
            .map_err(|e| CamoError::InvalidInput(e.to_string()))?,
        OutputFormat::Csv => reports_to_csv(&reports)?,
    };
    emit(&text, output)
}

#[derive(Serialize)]
struct FitOutput {
    k_star: usize,
    ms_by_k: std::collections::BTreeMap<usize, f64>,
    collapse_warning: bool,
    assignments: Vec<usize>,
    names: Vec<String>,
    mixture: MixtureDump,
}

fn cmd_fit(
    common: &CommonOpts,
    dir: &Path,
    output: Option<&Path>,
    include_subdirs: bool,
) -> Result<(), CamoError> {
    let provider = common.provider()?;
    let names = directory_names(dir, include_subdirs)?;
    if names.len() < 5 {
        return Err(CamoError::DegenerateDirectory);
    }
    let ctx = DirectoryContext::new(dir.display().to_string(), names, provider.as_ref())?;
    let fit_cfg = common.fit_config();
    let sel = fit_directory_mixture(&ctx, &fit_cfg)?.expect("size checked above");
    // the selection keeps only the winning mixture; rerun that k for its likelihood
    let (_, _, ll) = camo::vmf::fit_mixture(&ctx.vectors, &fit_cfg.with_k(sel.k_star))?;
    let dump = FitOutput {
        k_star: sel.k_star,
        ms_by_k: sel.ms_by_k.clone(),
        collapse_warning: sel.collapse_warning,
        assignments: sel.assignments.clone(),
        names: ctx.names.clone(),
        mixture: MixtureDump {
            dim: sel.mixture.dim,
            k: sel.mixture.k(),
            weights: sel.mixture.weights.clone(),
            components: sel.mixture.components.clone(),
            log_likelihood: ll,
            seed: common.seed,
        },
    };
    let text =
        serde_json::to_string_pretty(&dump).map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    emit(&text, output)
}

fn cmd_evaluate(
    common: &CommonOpts,
    manifest: &Path,
    max_directories: Option<usize>,
    samples_per_dir: usize,
    output_dir: &Path,
    include_subdirs: bool,
) -> Result<(), CamoError> {
    let provider = common.provider()?;
    let manifests = filter_repositories(load_manifest(manifest)?);
    let plan = SamplePlan { seed: common.seed, samples_per_directory: samples_per_dir };
    let opts = ExperimentOptions { max_directories, include_subdirs };
    let report =
        run_experiment(&manifests, provider.as_ref(), &common.fit_config(), &plan, &opts)?;

    std::fs::create_dir_all(output_dir)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    std::fs::write(output_dir.join("report.json"), &json)?;
    std::fs::write(output_dir.join("per_directory.csv"), per_directory_csv(&report)?)?;
    std::fs::write(output_dir.join("pooled_scores.csv"), pooled_scores_csv(&report)?)?;

    println!("directories evaluated: {}", report.directories);
    println!(
        "simple:  local median {:.4}, sampled median {:.4}, KS {:.4} (p = {:.3e})",
        report.simple.local_median,
        report.simple.sampled_median,
        report.simple.ks.statistic,
        report.simple.ks.p_value
    );
    println!(
        "cluster: local median {:.4}, sampled median {:.4}, KS {:.4} (p = {:.3e})",
        report.cluster.local_median,
        report.cluster.sampled_median,
        report.cluster.ks.statistic,
        report.cluster.ks.p_value
    );
    if let Some(pl) = &report.power_law {
        println!(
            "directory sizes: power law alpha {:.2}, cutoff {}, KS distance {:.4}",
            pl.alpha, pl.x_min, pl.ks_distance
        );
    }
    Ok(())
}

fn cmd_scan(
    root: &Path,
    max_depth: Option<usize>,
    no_hidden: bool,
    format: OutputFormat,
    output: Option<&Path>,
) -> Result<(), CamoError> {
    let records =
        scan_filesystem(root, &ScanOptions { include_hidden: !no_hidden, max_depth })?;
    let text = match format {
        OutputFormat::Json => serde_json::to_string_pretty(&records)
            .map_err(|e| CamoError::InvalidInput(e.to_string()))?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["dir_path", "item_count", "item_names"])
                .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
            for r in &records {
                w.write_record([
                    r.dir_path.as_str(),
                    &r.item_count.to_string(),
                    &r.item_names.join(";"),
                ])
                .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| CamoError::InvalidInput(e.to_string()))?)
                .expect("csv output is utf-8")
        }
    };
    emit(&text, output)
}

fn cmd_histogram(manifest: &Path, bins: usize, output: Option<&Path>) -> Result<(), CamoError> {
    let manifests = filter_repositories(load_manifest(manifest)?);
    let counts: Vec<u64> = enumerate_directories(&manifests)
        .iter()
        .map(|d| d.item_count as u64)
        .collect();
    if counts.is_empty() {
        return Err(CamoError::InvalidInput("no eligible directories".into()));
    }
    let rows = log_histogram(&counts, bins)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_low", "bin_high", "count"])
        .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    for (lo, hi, count) in &rows {
        w.write_record([&format!("{lo:.4}"), &format!("{hi:.4}"), &count.to_string()])
            .map_err(|e| CamoError::InvalidInput(e.to_string()))?;
    }
    let text =
        String::from_utf8(w.into_inner().map_err(|e| CamoError::InvalidInput(e.to_string()))?)
            .expect("csv output is utf-8");
    emit(&text, output)?;
    match power_law_fit(&counts) {
        Ok(pl) => eprintln!(
            "power law: alpha {:.3}, cutoff {}, KS distance {:.4}, tail n {}",
            pl.alpha, pl.x_min, pl.ks_distance, pl.n_tail
        ),
        Err(e) => eprintln!("power-law fit unavailable: {e}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CamoError> {
    match &cli.command {
        Command::Score { common, dir, candidates, format, output, include_subdirs } => {
            common.init_threads();
            cmd_score(common, dir, candidates, *format, output.as_deref(), *include_subdirs)
        }
        Command::Fit { common, dir, output, include_subdirs } => {
            common.init_threads();
            cmd_fit(common, dir, output.as_deref(), *include_subdirs)
        }
        Command::Evaluate {
            common,
            manifest,
            max_directories,
            samples_per_dir,
            output_dir,
            include_subdirs,
        } => {
            common.init_threads();
            cmd_evaluate(
                common,
                manifest,
                *max_directories,
                *samples_per_dir,
                output_dir,
                *include_subdirs,
            )
        }
        Command::Scan { common, root, max_depth, no_hidden, format, output } => {
            common.init_threads();
            cmd_scan(root, *max_depth, *no_hidden, *format, output.as_deref())
        }
        Command::Histogram { common, manifest, bins, output } => {
            common.init_threads();
            cmd_histogram(manifest, *bins, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
