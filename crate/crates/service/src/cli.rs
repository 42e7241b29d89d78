use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scatteruq_core::dataio::{
    load_bundle, load_idx, load_tabular_json, parse_idx_images, save_bundle, Dataset, ModelBundle, IMAGES_MAGIC,
    FASHION_MNIST_LABELS,
};
use scatteruq_core::embednet::TrainConfig;
use scatteruq_core::experiment::{run_protocol, ProtocolConfig, TestSet};
use scatteruq_core::uqhead::HeadConfig;

use crate::api::{router, AppState, PredictInput};

#[derive(Debug, Parser)]
#[command(name = "scatteruq", version, about = "Uncertainty-aware prototypical networks with local projection plots")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an embedding network and write a model bundle.
    Train(TrainArgs),
    /// Score inputs with a bundle and write the predictions as JSON.
    Predict(PredictArgs),
    /// Compare projection methods and local vs. global plots, writing a CSV report.
    EvalDr(EvalDrArgs),
    /// Serve the JSON API (and optionally the UI assets).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// IDX image file.
    #[arg(long, requires = "labels", conflicts_with = "tabular")]
    pub images: Option<PathBuf>,
    /// IDX label file.
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
    /// Tabular JSON file with `field_names` and labelled `rows`.
    #[arg(long, required_unless_present = "images")]
    pub tabular: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub support: usize,
    #[arg(long, default_value_t = 5)]
    pub query: usize,
    #[arg(long, default_value_t = 100)]
    pub episodes_per_epoch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Training examples kept per class for local plots.
    #[arg(long, default_value_t = 10)]
    pub examples_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep only the first N rows of each class.
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Name IDX classes with the Fashion-MNIST labels instead of digits.
    #[arg(long)]
    pub fashion_labels: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// JSON array of `{"input": [..]}` objects, or an IDX image file.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDrArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Directory with `t10k-images-idx3-ubyte` and `t10k-labels-idx1-ubyte`.
    #[arg(long)]
    pub mnist: PathBuf,
    /// Directory with the Fashion-MNIST train and t10k IDX files.
    #[arg(long)]
    pub fashion: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub example_sets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory of UI assets served under `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

pub async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => tokio::task::spawn_blocking(move || train(&a)).await?,
        Command::Predict(a) => tokio::task::spawn_blocking(move || predict(&a)).await?,
        Command::EvalDr(a) => tokio::task::spawn_blocking(move || eval_dr(&a)).await?,
        Command::Serve(a) => serve(a).await,
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn load_training_data(a: &TrainArgs) -> Result<Dataset> {
    let data = match (&a.images, &a.labels, &a.tabular) {
        (Some(images), Some(labels), None) => {
            require_file(images)?;
            require_file(labels)?;
            let ds = load_idx(images, labels).with_context(|| format!("reading {}", images.display()))?;
            if a.fashion_labels {
                ds.with_label_names(FASHION_MNIST_LABELS.iter().map(|s| s.to_string()).collect())?
            } else {
                ds
            }
        }
        (None, None, Some(path)) => {
            require_file(path)?;
            load_tabular_json(path).with_context(|| format!("reading {}", path.display()))?
        }
        _ => bail!("pass either --images and --labels, or --tabular"),
    };
    Ok(match a.per_class {
        Some(n) => data.stratified_head(n),
        None => data,
    })
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let data = load_training_data(a)?;
    tracing::info!(rows = data.len(), classes = data.num_classes(), dim = data.input_dim(), "loaded training data");
    let tc = TrainConfig {
        epochs: a.epochs,
        episodes_per_epoch: a.episodes_per_epoch,
        n_support: a.support,
        n_query: a.query,
        learning_rate: a.learning_rate,
        rng_seed: a.seed,
        embedding_dim: a.embedding_dim,
        ..TrainConfig::default()
    };
    let hc = HeadConfig {
        examples_per_class: a.examples_per_class,
        seed: a.seed,
        ..HeadConfig::default()
    };
    let bundle = ModelBundle::fit(&data, &tc, &hc)?;
    save_bundle(&bundle, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    tracing::info!(path = %a.out.display(), "wrote bundle");
    Ok(())
}

fn open_bundle(path: &Path) -> Result<ModelBundle> {
    require_file(path)?;
    load_bundle(path).with_context(|| format!("loading bundle {}", path.display()))
}

fn read_inputs(path: &Path) -> Result<Vec<PredictInput>> {
    require_file(path)?;
    let bytes = fs::read(path)?;
    if bytes.len() >= 4 && u32::from_be_bytes(bytes[..4].try_into()?) == IMAGES_MAGIC {
        let images = parse_idx_images(&bytes)?;
        let px = images.rows * images.cols;
        return Ok(images
            .pixels
            .chunks_exact(px)
            .map(|img| PredictInput {
                input: img.iter().map(|&b| f64::from(b) / 255.0).collect(),
                img_src: None,
                json_src: None,
            })
            .collect());
    }
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).with_context(|| format!("parsing {}", path.display()))
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let bundle = open_bundle(&a.bundle)?;
    let inputs = read_inputs(&a.input)?;
    let state = AppState::new(bundle);
    let records = state.predict_batch(inputs)?;
    fs::write(&a.out, serde_json::to_vec_pretty(&records)?).with_context(|| format!("writing {}", a.out.display()))?;
    tracing::info!(count = records.len(), path = %a.out.display(), "wrote predictions");
    Ok(())
}

fn idx_split(dir: &Path, split: &str) -> Result<Dataset> {
    let images = dir.join(format!("{split}-images-idx3-ubyte"));
    let labels = dir.join(format!("{split}-labels-idx1-ubyte"));
    require_file(&images)?;
    require_file(&labels)?;
    load_idx(&images, &labels).with_context(|| format!("reading {}", images.display()))
}

pub fn eval_dr(a: &EvalDrArgs) -> Result<()> {
    let bundle = open_bundle(&a.bundle)?;
    let names = bundle.labels().to_vec();
    let train = idx_split(&a.fashion, "train")?.with_label_names(names.clone())?;
    let fashion = idx_split(&a.fashion, "t10k")?.with_label_names(names)?;
    let mnist = idx_split(&a.mnist, "t10k")?;
    let cfg = ProtocolConfig {
        example_sets: a.example_sets,
        examples_per_class: bundle.store.examples_per_class(),
        seed: a.seed,
        ..ProtocolConfig::default()
    };
    let sets = [
        TestSet { name: "MNIST", data: &mnist },
        TestSet { name: "Fashion-MNIST", data: &fashion },
    ];
    let report = run_protocol(&bundle.model, &bundle.head, &train, &sets, &cfg)?;
    for b in &report.buckets {
        tracing::info!(test_set = %b.test_set, use_case = %b.use_case, size = b.bucket_size, fallback = ?b.fallback, "bucket");
    }
    tracing::info!(local = report.local_plot_count, global = report.global_plot_count, "plots");
    fs::write(&a.out, report.to_csv()).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

pub async fn serve(a: ServeArgs) -> Result<()> {
    let bundle = open_bundle(&a.bundle)?;
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            bail!("{} is not a directory", dir.display());
        }
    }
    let state = Arc::new(AppState::new(bundle));
    let app = router(state, a.static_dir.clone()).layer(tower_http::trace::TraceLayer::new_for_http());
    let listener = tokio::net::TcpListener::bind(SocketAddr::new(a.host, a.port))
        .await
        .with_context(|| format!("binding port {}", a.port))?;
    println!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
