//! `cbir`: operate a CBIR store from the command line.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use cbir_core::config::{derive_label, EngineConfig, Labeling};
use cbir_core::error::{Error, Result};
use cbir_core::executor::{Engine, Executor, NewImage, QueryMode, QueryOptions};
use cbir_core::model::{ImageRecord, IndexParams};
use cbir_core::simulation::{simulate_multi_query, split_dataset};
use cbir_core::store::Store;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "cbir", version, about = "Content-based image retrieval over a local store")]
struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "STORE_PATH", default_value = "cbir-store")]
    store: PathBuf,
    /// Engine configuration file (TOML).
    #[arg(long, global = true, env = "CONFIG_FILE")]
    config: Option<PathBuf>,
    /// Output format for results printed on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Tsv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Insert every PNG and JPEG file below a directory.
    Ingest {
        dir: PathBuf,
        /// Where class labels come from; defaults to the configured scheme.
        #[arg(long, value_enum)]
        labeling: Option<LabelingArg>,
    },
    /// Precompute descriptor sets.
    Extract {
        /// Every stored image lacking descriptors.
        #[arg(long, required = true)]
        all: bool,
    },
    /// Build a visual vocabulary and index every stored image.
    BuildIndex {
        #[command(flatten)]
        params: IndexArgs,
        /// Seed for k-means++ initialization.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank the indexed images against a query image file.
    Query {
        image: PathBuf,
        #[arg(long)]
        index: u64,
        #[command(flatten)]
        criterion: Criterion,
    },
    /// Split the corpus, query with the held-out images and report precision/recall.
    Simulate {
        /// Index to evaluate; built over the index side of the split when omitted.
        #[arg(long)]
        index: Option<u64>,
        /// Fraction of each class kept on the index side.
        #[arg(long, default_value_t = 0.9)]
        split: f64,
        /// Seeds the split and, when the index is built here, k-means++.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV report destination; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        criterion: Criterion,
        #[command(flatten)]
        index_args: IndexArgs,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LabelingArg {
    Directory,
    FilenamePrefix,
}

impl From<LabelingArg> for Labeling {
    fn from(arg: LabelingArg) -> Self {
        match arg {
            LabelingArg::Directory => Labeling::Directory,
            LabelingArg::FilenamePrefix => Labeling::FilenamePrefix,
        }
    }
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Vocabulary size.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence threshold on centroid displacement.
    #[arg(long)]
    eps: Option<f64>,
}

impl IndexArgs {
    fn resolve(&self, defaults: &IndexParams, seed: Option<u64>) -> IndexParams {
        IndexParams {
            k: self.k.unwrap_or(defaults.k),
            max_iterations: self.max_iter.unwrap_or(defaults.max_iterations),
            convergence_eps: self.eps.unwrap_or(defaults.convergence_eps),
            seed: seed.unwrap_or(defaults.seed),
        }
    }
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct Criterion {
    /// Return the N most similar images.
    #[arg(long)]
    top_k: Option<usize>,
    /// Return every image at least this similar.
    #[arg(long)]
    min_sim: Option<f64>,
}

impl Criterion {
    fn resolve(&self, config: &EngineConfig, index_id: u64) -> QueryOptions {
        let mut options = config.query_options(index_id);
        if let Some(k) = self.top_k {
            options.mode = QueryMode::TopK;
            options.top_k = k;
        }
        if let Some(min) = self.min_sim {
            options.mode = QueryMode::Threshold;
            options.min_similarity = min;
        }
        options
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.code());
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    let open = || -> Result<Engine> { Engine::surf(Arc::new(Store::open(&cli.store)?), config.extractor) };
    let mut out = std::io::stdout().lock();

    match &cli.command {
        Command::Ingest { dir, labeling } => {
            let labeling = labeling.map(Labeling::from).unwrap_or(config.labeling);
            let (inserted, skipped) = ingest(&open()?, dir, labeling)?;
            if inserted == 0 && skipped == 0 {
                eprintln!("warning: no PNG or JPEG files found under {}", dir.display());
            }
            Table::record(["inserted", "skipped"], [inserted.into(), skipped.into()])
                .write(&mut out, cli.format)?;
        }
        Command::Extract { .. } => {
            let extracted = open()?.extract_all()?;
            Table::record(["extracted"], [extracted.into()]).write(&mut out, cli.format)?;
        }
        Command::BuildIndex { params, seed } => {
            let params = params.resolve(&config.indexer, *seed);
            let id = open()?.create_index(&params)?;
            Table::record(["indexId"], [id.into()]).write(&mut out, cli.format)?;
        }
        Command::Query { image, index, criterion } => {
            let bytes = read_file(image)?;
            let engine = open()?;
            let options = criterion.resolve(&config, *index);
            let result = engine.execute_query(&bytes, &options)?;
            let mut t = Table::new(["rank", "imageId", "name", "similarity"]);
            engine.store().read(|v| {
                for (rank, e) in result.entries.iter().enumerate() {
                    let name = v.find::<ImageRecord>(e.image_id).map(|i| i.name.clone()).unwrap_or_default();
                    t.row([(rank + 1).into(), e.image_id.into(), name.into(), e.similarity.into()]);
                }
            });
            t.write(&mut out, cli.format)?;
        }
        Command::Simulate {
            index,
            split,
            seed,
            out: report_path,
            criterion,
            index_args,
        } => {
            let engine = open()?;
            let images: Vec<ImageRecord> = engine.store().read(|v| v.iter().cloned().collect());
            let parts = split_dataset(&images, *split, *seed)?;
            let index_id = match index {
                Some(id) => *id,
                None => {
                    let params = index_args.resolve(&config.indexer, Some(*seed));
                    let id = engine.create_index_over(&params, &parts.index_set)?;
                    eprintln!("built index {id} over {} images", parts.index_set.len());
                    id
                }
            };
            let options = criterion.resolve(&config, index_id);
            let report = simulate_multi_query(&engine, &parts.query_set, index_id, &options)?;
            match report_path {
                Some(path) => {
                    let file = std::fs::File::create(path)
                        .map_err(|e| Error::Storage(format!("cannot create {}: {e}", path.display())))?;
                    let mut file = std::io::BufWriter::new(file);
                    report.write_csv(&mut file)?;
                    file.flush()?;
                    output::aggregate(&mut out, cli.format, index_id, &report)?;
                }
                None => output::report(&mut out, cli.format, &report)?,
            }
        }
        Command::Serve { host, port } => {
            init_tracing();
            let service = cbir_service::ServiceConfig {
                host: host.clone(),
                port: *port,
                store_path: cli.store.clone(),
                config_file: cli.config.clone(),
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime
                .block_on(cbir_service::run(service))
                .map_err(|e| match e.downcast::<Error>() {
                    Ok(err) => *err,
                    Err(other) => Error::Storage(other.to_string()),
                })?;
        }
    }
    out.flush()?;
    Ok(())
}

fn init_tracing() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::validation(format!("cannot read {}: {e}", path.display())))
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Inserts the images below `dir` in path order. Files that fail to decode
/// are reported on stderr and skipped.
fn ingest(engine: &Engine, dir: &Path, labeling: Labeling) -> Result<(usize, usize)> {
    if !dir.is_dir() {
        return Err(Error::validation(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Storage(format!("cannot walk {}: {e}", dir.display())))?;
        if entry.file_type().is_file() && is_image(entry.path()) {
            files.push(entry.into_path());
        }
    }
    let (mut inserted, mut skipped) = (0, 0);
    for path in files {
        let relative = path.strip_prefix(dir).unwrap_or(&path);
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let image = NewImage {
            name,
            class_label: Some(derive_label(relative, labeling)),
            bytes: read_file(&path)?,
        };
        match engine.insert_image(image) {
            Ok(_) => inserted += 1,
            Err(err @ (Error::Decode(_) | Error::Validation(_))) => {
                eprintln!("skipped {}: {err}", path.display());
                skipped += 1;
            }
            Err(err) => return Err(err),
        }
    }
    Ok((inserted, skipped))
}
