//! Local vs global projection study: repeated example sets, local plots per
//! use case and test set, and global plots, summarised per method.

use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, Payload};
use crate::dimred::{pca2, project, Method};
use crate::drmetrics::DRQuality;
use crate::embednet::EmbeddingModel;
use crate::error::{Error, Result};
use crate::linalg::{mean, std_dev};
use crate::plotengine::{local_points, route, select_classes, Thresholds, UseCase};
use crate::uqhead::{embed_rows, Prediction, TrainingExampleStore, UqHead};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Number of independently sampled training-example sets.
    pub example_sets: usize,
    pub examples_per_class: usize,
    /// Test samples per use case, test set and example set.
    pub samples_per_use_case: usize,
    /// Test samples per true class and test set in each global plot.
    pub global_per_class: usize,
    /// Slider positions that define the use-case buckets.
    pub bucket_thresholds: Thresholds,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            example_sets: 10,
            examples_per_class: 10,
            samples_per_use_case: 10,
            global_per_class: 25,
            bucket_thresholds: Thresholds::default(),
            methods: vec![Method::Pca, Method::Tsne, Method::Mds],
            seed: 0,
        }
    }
}

pub struct TestSet<'a> {
    pub name: &'a str,
    pub data: &'a Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// The bucket had enough distinct samples.
    None,
    /// Fewer samples than needed: drawn with replacement.
    WithReplacement,
    /// Empty bucket: the samples closest to it were plotted as that use case.
    Ranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketNote {
    pub test_set: String,
    pub use_case: UseCase,
    pub bucket_size: usize,
    pub fallback: Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(xs: &[f64]) -> Self {
        Self {
            mean: mean(xs),
            std: std_dev(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// `methods` for the method comparison, `scenarios` for local vs global.
    pub table: String,
    pub method: Method,
    pub scenario: String,
    pub plots: usize,
    pub time: Summary,
    pub stress: Summary,
    pub shepard: Summary,
    pub continuity: Summary,
    pub trust: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub local_plot_count: usize,
    pub global_plot_count: usize,
    /// Distinct point counts seen across local plots.
    pub local_plot_sizes: Vec<usize>,
    pub global_points_per_plot: usize,
    pub buckets: Vec<BucketNote>,
    pub rows: Vec<ReportRow>,
}

impl ProtocolReport {
    pub fn row(&self, table: &str, method: Method, scenario: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.table == table && r.method == method && r.scenario == scenario)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "table,method,scenario,plots,time_mean,time_std,stress_mean,stress_std,shepard_mean,shepard_std,\
             continuity_mean,continuity_std,trust_mean,trust_std\n",
        );
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{}", r.table, r.method, r.scenario, r.plots);
            for s in [r.time, r.stress, r.shepard, r.continuity, r.trust] {
                let _ = write!(out, ",{:.6e},{:.6e}", s.mean, s.std);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Default)]
struct Samples {
    time: Vec<f64>,
    stress: Vec<f64>,
    shepard: Vec<f64>,
    continuity: Vec<f64>,
    trust: Vec<f64>,
}

impl Samples {
    fn push(&mut self, seconds: f64, q: &DRQuality) {
        self.time.push(seconds);
        self.stress.push(q.normalized_stress);
        self.shepard.push(q.shepard_goodness);
        self.continuity.push(q.continuity);
        self.trust.push(q.trustworthiness);
    }

    fn row(&self, table: &str, method: Method, scenario: &str) -> ReportRow {
        ReportRow {
            table: table.to_string(),
            method,
            scenario: scenario.to_string(),
            plots: self.time.len(),
            time: Summary::of(&self.time),
            stress: Summary::of(&self.stress),
            shepard: Summary::of(&self.shepard),
            continuity: Summary::of(&self.continuity),
            trust: Summary::of(&self.trust),
        }
    }
}

fn predict_all(model: &EmbeddingModel, head: &UqHead, data: &Dataset) -> Result<Vec<Prediction>> {
    let rows: Vec<usize> = (0..data.len()).collect();
    embed_rows(model, data, &rows)?
        .into_iter()
        .map(|z| head.predict_embedding(z, Payload::default()))
        .collect()
}

// Larger is closer to the use case; used only when its bucket is empty.
fn affinity(p: &Prediction, uc: UseCase) -> f64 {
    match uc {
        UseCase::OutOfDistribution => p.outlier_score,
        UseCase::ClassConfusion => -p.max_confidence() - p.outlier_score,
        UseCase::HighConfidence => p.max_confidence() - p.outlier_score,
    }
}

fn pick_samples(
    preds: &[Prediction],
    bucket: &[usize],
    uc: UseCase,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Fallback) {
    if bucket.len() >= n {
        return (bucket.choose_multiple(rng, n).copied().collect(), Fallback::None);
    }
    if !bucket.is_empty() {
        return ((0..n).map(|_| *bucket.choose(rng).expect("non-empty")).collect(), Fallback::WithReplacement);
    }
    let mut ranked: Vec<usize> = (0..preds.len()).collect();
    ranked.sort_by(|&a, &b| affinity(&preds[b], uc).total_cmp(&affinity(&preds[a], uc)).then(a.cmp(&b)));
    ranked.truncate(n);
    (ranked, Fallback::Ranked)
}

fn scenario_name(test_set: &str, uc: UseCase) -> String {
    format!("local {test_set} {uc}")
}

/// Runs the full protocol. Store sets are drawn from `train`; buckets come
/// from routing every test prediction at `cfg.bucket_thresholds`.
pub fn run_protocol(
    model: &EmbeddingModel,
    head: &UqHead,
    train: &Dataset,
    test_sets: &[TestSet<'_>],
    cfg: &ProtocolConfig,
) -> Result<ProtocolReport> {
    if cfg.example_sets == 0 || cfg.samples_per_use_case == 0 || cfg.methods.is_empty() {
        return Err(Error::invalid("protocol needs example sets, samples and at least one method"));
    }
    if !cfg.methods.contains(&Method::Pca) {
        return Err(Error::invalid("PCA must be among the compared methods"));
    }
    let candidates = train.indices_by_class();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut predictions = Vec::with_capacity(test_sets.len());
    let mut buckets = Vec::new();
    let mut bucket_members = Vec::new();
    for ts in test_sets {
        let preds = predict_all(model, head, ts.data)?;
        let mut members = vec![Vec::new(); UseCase::ALL.len()];
        for (i, p) in preds.iter().enumerate() {
            members[route(p, &cfg.bucket_thresholds) as usize].push(i);
        }
        bucket_members.push(members);
        predictions.push(preds);
    }

    let mut per_method: Vec<Samples> = cfg.methods.iter().map(|_| Samples::default()).collect();
    let mut pca_by_scenario: Vec<(String, Samples)> = Vec::new();
    let mut global = Samples::default();
    let mut sizes = Vec::new();
    let mut local_count = 0;
    let mut global_points = 0;

    for set in 0..cfg.example_sets {
        let set_seed = cfg.seed.wrapping_add(1 + set as u64);
        let store = TrainingExampleStore::sample(model, head, train, &candidates, cfg.examples_per_class, set_seed)?;

        for (t, ts) in test_sets.iter().enumerate() {
            for uc in UseCase::ALL {
                let bucket = &bucket_members[t][uc as usize];
                let (picked, fallback) = pick_samples(&predictions[t], bucket, uc, cfg.samples_per_use_case, &mut rng);
                if set == 0 {
                    buckets.push(BucketNote {
                        test_set: ts.name.to_string(),
                        use_case: uc,
                        bucket_size: bucket.len(),
                        fallback,
                    });
                }
                let scenario = scenario_name(ts.name, uc);
                for (s, &i) in picked.iter().enumerate() {
                    let pred = &predictions[t][i];
                    let classes = select_classes(pred, uc, head)?;
                    let high = local_points(pred, &classes, &store)?;
                    if !sizes.contains(&high.len()) {
                        sizes.push(high.len());
                    }
                    local_count += 1;
                    for (m, &method) in cfg.methods.iter().enumerate() {
                        let seed = set_seed ^ ((t as u64) << 32) ^ ((uc as u64) << 24) ^ s as u64;
                        let proj = project(&high, method, seed)?;
                        let q = DRQuality::compute(&high, &proj.rows())?;
                        per_method[m].push(proj.elapsed_seconds, &q);
                        if method == Method::Pca {
                            match pca_by_scenario.iter_mut().find(|(name, _)| *name == scenario) {
                                Some((_, acc)) => acc.push(proj.elapsed_seconds, &q),
                                None => {
                                    let mut acc = Samples::default();
                                    acc.push(proj.elapsed_seconds, &q);
                                    pca_by_scenario.push((scenario.clone(), acc));
                                }
                            }
                        }
                    }
                }
            }
        }

        let mut high: Vec<Vec<f64>> = Vec::new();
        for (t, ts) in test_sets.iter().enumerate() {
            for mut class_rows in ts.data.indices_by_class() {
                if class_rows.len() < cfg.global_per_class {
                    return Err(Error::invalid(format!(
                        "test set {} has a class with {} samples, global plots need {}",
                        ts.name,
                        class_rows.len(),
                        cfg.global_per_class
                    )));
                }
                class_rows.shuffle(&mut rng);
                high.extend(
                    class_rows[..cfg.global_per_class]
                        .iter()
                        .map(|&i| predictions[t][i].embedding.clone()),
                );
            }
        }
        high.extend(store.all_points().map(|e| e.prediction.embedding.clone()));
        global_points = high.len();
        let proj = pca2(&high)?;
        global.push(proj.elapsed_seconds, &DRQuality::compute(&high, &proj.rows())?);
    }

    let mut rows: Vec<ReportRow> = cfg
        .methods
        .iter()
        .zip(&per_method)
        .map(|(&m, acc)| acc.row("methods", m, "local"))
        .collect();
    let pca_local = &per_method[cfg.methods.iter().position(|&m| m == Method::Pca).expect("checked above")];
    rows.extend(pca_by_scenario.iter().map(|(name, acc)| acc.row("scenarios", Method::Pca, name)));
    rows.push(pca_local.row("scenarios", Method::Pca, "local"));
    rows.push(global.row("scenarios", Method::Pca, "global"));
    sizes.sort_unstable();

    Ok(ProtocolReport {
        local_plot_count: local_count,
        global_plot_count: cfg.example_sets,
        local_plot_sizes: sizes,
        global_points_per_plot: global_points,
        buckets,
        rows,
    })
}
