//! End-to-end orchestration of the three stages, with every intermediate
//! result persisted under one output directory:
//!
//! ```text
//! stage1/  dag.json  adjacency.csv  cpds.json  metadata.json  reports/<node>.csv
//! stage2/  clusters.json  labels.csv  dunn_scan.csv
//! stage3/  model.json  history.csv  demographics.csv  demographics.json  report.json
//! ```
//!
//! Each stage can be re-run on its own from the previous stage's files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterModel, KSelection};
use crate::cpd::{self, BayesNet};
use crate::dag::Dag;
use crate::data::{
    encode, load_csv_with, CategoricalTable, Encoding, FeatureMatrix, LoadOptions, SplitSpec, TableMetadata,
};
use crate::demographic::{self, DemographicTable};
use crate::dsid::{self, MlpModel, MultiHead, TrainConfig, TrainHistory};
use crate::structure::{self, ScoredDag, SearchConfig};
use crate::{Error, Result};

/// Severity nodes reported when the configuration does not name any.
pub const DEFAULT_SEVERITY_NODES: [&str; 4] = ["G", "N", "O", "P"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Estimator {
    Mle,
    Bayesian { ess: f64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Bayesian { ess: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSettings {
    /// Fixed K; when absent K is chosen by the Dunn scan over `k_min..=k_max`.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub encoding: Encoding,
    /// Explicit clustering features; defaults to the ancestors of the targets.
    pub features: Option<Vec<String>>,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        Self {
            k: None,
            k_min: 2,
            k_max: 30,
            seed: 0,
            max_iter: clustering::DEFAULT_MAX_ITER,
            tol: 0.0,
            encoding: Encoding::OneHot,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSettings {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub split: SplitSpec,
    /// Classifier inputs; defaults to the clustering features.
    pub features: Option<Vec<String>>,
    /// Also train the per-attribute multi-head baseline on the raw targets.
    pub baseline: bool,
    pub init_seed: u64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 64, 64, 32],
            train: TrainConfig::default(),
            split: SplitSpec::default(),
            features: None,
            baseline: false,
            init_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub load: LoadOptions,
    /// Demographic target variables; the first varies slowest in the
    /// demographic category order.
    pub targets: Vec<String>,
    pub structure: SearchConfig,
    /// Use this graph instead of learning one.
    pub fixed_dag: Option<PathBuf>,
    pub estimator: Estimator,
    pub severity_nodes: Option<Vec<String>>,
    pub clustering: ClusterSettings,
    pub classifier: ClassifierSettings,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            load: LoadOptions::default(),
            targets: vec!["V".into(), "D".into()],
            structure: SearchConfig::default(),
            fixed_dag: None,
            estimator: Estimator::default(),
            severity_nodes: None,
            clustering: ClusterSettings::default(),
            classifier: ClassifierSettings::default(),
            out: PathBuf::from("cpdforge-out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Checks parameter ranges (dataset-dependent checks happen per stage).
    pub fn validate(&self) -> Result<()> {
        let s = &self.structure;
        SearchConfig::new(s.score(), s.max_parents(), s.max_iterations(), s.restarts(), s.seed())?;
        if let Estimator::Bayesian { ess } = self.estimator {
            if !(ess > 0.0 && ess.is_finite()) {
                return Err(Error::Config(format!("estimator ess must be positive, got {ess}")));
            }
        }
        let c = &self.clustering;
        match c.k {
            Some(k) if k < 1 => return Err(Error::Config("clustering.k must be at least 1".into())),
            None if c.k_min < 2 || c.k_min > c.k_max => {
                return Err(Error::Config(format!(
                    "clustering k range must satisfy 2 <= k_min <= k_max, got {}..={}",
                    c.k_min, c.k_max
                )))
            }
            _ => {}
        }
        if c.max_iter < 1 {
            return Err(Error::Config("clustering.max_iter must be at least 1".into()));
        }
        let (tr, va, te) = self.classifier.split.ratios();
        SplitSpec::new(tr, va, te, self.classifier.split.seed())?;
        self.classifier.train.validate()?;
        if self.classifier.hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target variable is required".into()));
        }
        Ok(())
    }

    pub fn stage_dir(&self, stage: u8) -> PathBuf {
        self.out.join(format!("stage{stage}"))
    }

    pub fn load_input(&self) -> Result<CategoricalTable> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::Config("no input file configured".into()))?;
        load_csv_with(path, &self.load)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn resolve(table: &CategoricalTable, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            table
                .index_of(n)
                .ok_or_else(|| Error::Config(format!("variable `{n}` is not in the dataset")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Stage1 {
    pub dag: Dag,
    pub net: BayesNet,
    /// Search result when the graph was learned rather than supplied.
    pub search: Option<ScoredDag>,
}

/// Learns (or loads) the graph only.
pub fn learn_structure(config: &PipelineConfig, table: &CategoricalTable) -> Result<(Dag, Option<ScoredDag>)> {
    if let Some(path) = &config.fixed_dag {
        let dag = Dag::load(path)?;
        if dag.names() != table.variables() {
            return Err(Error::VariableMismatch(format!(
                "graph nodes {:?} differ from dataset columns {:?}",
                dag.names(),
                table.variables()
            )));
        }
        return Ok((dag, None));
    }
    if table.n_vars() < 2 {
        return Ok((Dag::empty(table.variables().to_vec()), None));
    }
    let scored = structure::hill_climb(table, &config.structure)?;
    Ok((scored.dag.clone(), Some(scored)))
}

pub fn fit_cpds(config: &PipelineConfig, table: &CategoricalTable, dag: &Dag) -> Result<BayesNet> {
    match config.estimator {
        Estimator::Mle => cpd::fit_mle(table, dag),
        Estimator::Bayesian { ess } => cpd::fit_bayesian(table, dag, ess),
    }
}

/// Severity nodes to report: the configured list (all must exist) or the
/// default list restricted to nodes present in the graph.
pub fn severity_nodes(config: &PipelineConfig, dag: &Dag) -> Result<Vec<usize>> {
    match &config.severity_nodes {
        Some(names) => names
            .iter()
            .map(|n| {
                dag.index_of(n)
                    .map_err(|_| Error::Config(format!("severity node `{n}` is not in the graph")))
            })
            .collect(),
        None => Ok(DEFAULT_SEVERITY_NODES
            .iter()
            .filter_map(|n| dag.index_of(n).ok())
            .collect()),
    }
}

/// Writes the DAG, CPDs, dataset metadata and severity reports.
pub fn write_stage1(config: &PipelineConfig, table: &CategoricalTable, stage: &Stage1) -> Result<()> {
    let dir = config.stage_dir(1);
    match &stage.search {
        Some(s) => write_json(&dir.join("dag.json"), &s.to_json())?,
        None => write_json(&dir.join("dag.json"), &stage.dag.to_json())?,
    }
    write_file(&dir.join("adjacency.csv"), &stage.dag.to_adjacency_csv())?;
    write_json(&dir.join("cpds.json"), &stage.net.to_json())?;
    write_json(&dir.join("metadata.json"), &table.metadata())?;
    for v in severity_nodes(config, &stage.dag)? {
        let report = cpd::severity_report(&stage.net, v)?;
        write_file(
            &dir.join("reports").join(format!("{}.csv", stage.dag.name(v))),
            &report.to_csv(),
        )?;
    }
    Ok(())
}

pub fn run_stage1(config: &PipelineConfig, table: &CategoricalTable) -> Result<Stage1> {
    let (dag, search) = learn_structure(config, table)?;
    let net = fit_cpds(config, table, &dag)?;
    let stage = Stage1 { dag, net, search };
    write_stage1(config, table, &stage)?;
    Ok(stage)
}

/// Graph persisted by stage 1.
pub fn load_stage1_dag(config: &PipelineConfig) -> Result<Dag> {
    let path = config.stage_dir(1).join("dag.json");
    // the extra score fields of a learned graph are ignored
    let json: crate::dag::DagJson = read_json(&path)?;
    Dag::from_json(&json)
}

#[derive(Debug, Clone)]
pub struct Stage2 {
    /// Clustering variables (column indices of the dataset).
    pub features: Vec<usize>,
    pub matrix: FeatureMatrix,
    pub selection: Option<KSelection>,
    pub model: ClusterModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClustersJson {
    pub features: Vec<String>,
    pub encoding: Encoding,
    #[serde(flatten)]
    pub model: clustering::ClusterModelJson,
}

/// Clustering variables: the configured list, or the ancestors of the
/// targets in `dag`.
pub fn clustering_features(config: &PipelineConfig, table: &CategoricalTable, dag: &Dag) -> Result<Vec<usize>> {
    if let Some(names) = &config.clustering.features {
        if names.is_empty() {
            return Err(Error::Config("clustering.features is empty".into()));
        }
        return resolve(table, names);
    }
    let targets = resolve(table, &config.targets)?;
    if dag.names() != table.variables() {
        return Err(Error::VariableMismatch(
            "graph nodes differ from dataset columns".into(),
        ));
    }
    let anc = dag.ancestors(&targets)?;
    if anc.is_empty() {
        return Err(Error::Config(format!(
            "targets {:?} have no ancestors in the graph; set clustering.features to a fixed feature list",
            config.targets
        )));
    }
    Ok(anc.into_iter().collect())
}

pub fn encode_features(table: &CategoricalTable, features: &[usize], encoding: Encoding) -> Result<FeatureMatrix> {
    encode(&table.select(features)?, encoding)
}

/// Chooses K (fixed or by Dunn scan) and clusters at that K.
pub fn cluster(config: &PipelineConfig, matrix: &FeatureMatrix) -> Result<(Option<KSelection>, ClusterModel)> {
    let c = &config.clustering;
    let (selection, k) = match c.k {
        Some(k) => (None, k),
        None => {
            let k_max = c.k_max.min(matrix.n_rows());
            let sel = clustering::select_k(matrix, c.k_min, k_max, c.seed)?;
            let k = sel.chosen_k;
            (Some(sel), k)
        }
    };
    let model = clustering::kmeans(matrix, k, clustering::seed_for_k(c.seed, k), c.max_iter, c.tol)?;
    Ok((selection, model))
}

pub fn run_stage2(config: &PipelineConfig, table: &CategoricalTable, dag: &Dag) -> Result<Stage2> {
    let features = clustering_features(config, table, dag)?;
    let matrix = encode_features(table, &features, config.clustering.encoding)?;
    let (selection, model) = cluster(config, &matrix)?;
    let dir = config.stage_dir(2);
    write_json(
        &dir.join("clusters.json"),
        &ClustersJson {
            features: features.iter().map(|&v| table.variables()[v].clone()).collect(),
            encoding: config.clustering.encoding,
            model: model.to_json(),
        },
    )?;
    write_file(&dir.join("labels.csv"), &clustering::labels_to_csv(&model.assignments))?;
    if let Some(sel) = &selection {
        write_file(&dir.join("dunn_scan.csv"), &sel.to_csv())?;
    }
    Ok(Stage2 {
        features,
        matrix,
        selection,
        model,
    })
}

/// Cluster labels persisted by stage 2.
pub fn load_stage2_labels(config: &PipelineConfig) -> Result<Vec<usize>> {
    clustering::read_labels(&config.stage_dir(2).join("labels.csv"))
}

pub fn load_stage2_clusters(config: &PipelineConfig) -> Result<ClustersJson> {
    read_json(&config.stage_dir(2).join("clusters.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage3Report {
    pub k: usize,
    pub input_features: Vec<String>,
    pub input_dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub test_accuracy: f64,
    /// Maximum class probability over the test rows.
    pub prediction_score: ScoreSummary,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    /// Averaged per-attribute accuracy of the multi-head baseline trained on
    /// the raw targets, when enabled.
    pub baseline_accuracy: Option<f64>,
    pub demographic_targets: Vec<String>,
    /// Most probable demographic category per class.
    pub top_categories: Vec<TopCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCategory {
    pub class: usize,
    pub category: String,
    pub probability: f64,
    pub zero_support: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Stage3 {
    pub model: MlpModel,
    pub history: TrainHistory,
    pub demographics: DemographicTable,
    pub report: Stage3Report,
}

fn classifier_features(
    config: &PipelineConfig,
    table: &CategoricalTable,
    cluster_features: &[usize],
) -> Result<Vec<usize>> {
    match &config.classifier.features {
        Some(names) if names.is_empty() => Err(Error::Config("classifier.features is empty".into())),
        Some(names) => resolve(table, names),
        None => Ok(cluster_features.to_vec()),
    }
}

fn gather_rows(m: &FeatureMatrix, idx: &[usize]) -> Result<FeatureMatrix> {
    if idx.is_empty() {
        return Err(Error::EmptyInput);
    }
    FeatureMatrix::from_rows(&idx.iter().map(|&i| m.row(i).to_vec()).collect::<Vec<_>>())
}

/// Trains the classifier on the stage-2 labels, fits the demographic table
/// and writes the stage-3 artifacts.
pub fn run_stage3(
    config: &PipelineConfig,
    table: &CategoricalTable,
    cluster_features: &[usize],
    labels: &[usize],
) -> Result<Stage3> {
    if labels.len() != table.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: table.n_rows(),
            got: labels.len(),
        });
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let cls = &config.classifier;
    let inputs = classifier_features(config, table, cluster_features)?;
    let x = encode_features(table, &inputs, Encoding::OneHot)?;
    let (tr, va, te) = cls.split.ratios();
    let [i_tr, i_va, i_te] = SplitSpec::new(tr, va, te, cls.split.seed())?.indices(table.n_rows())?;
    let (x_tr, x_va, x_te) = (
        gather_rows(&x, &i_tr)?,
        gather_rows(&x, &i_va)?,
        gather_rows(&x, &i_te)?,
    );
    let pick = |idx: &[usize]| idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();

    let mut dims = vec![x.n_cols()];
    dims.extend_from_slice(&cls.hidden);
    dims.push(k);
    let init = dsid::init_model(&dims, cls.init_seed)?;
    let (model, history) = dsid::train(&init, &x_tr, &pick(&i_tr), &x_va, &pick(&i_va), &cls.train)?;
    let y_te = pick(&i_te);
    let test_accuracy = dsid::accuracy(&model, &x_te, &y_te)?;
    let scores: Vec<f64> = x_te
        .rows()
        .map(|r| dsid::predict_class(&model, r).map(|p| p.1))
        .collect::<Result<_>>()?;
    let prediction_score = ScoreSummary {
        min: scores.iter().cloned().fold(f64::INFINITY, f64::min),
        max: scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean: scores.iter().sum::<f64>() / scores.len() as f64,
    };

    let targets = resolve(table, &config.targets)?;
    let (categories, demo_index) = demographic::demographic_categories(table, &targets)?;
    let demographics = demographic::fit_demographic_table(labels, &demo_index, categories, k)?;
    let top_categories = (0..k)
        .map(|c| {
            let (g, p) = demographic::argmax_demographic(&demographics, c)?;
            let zero = demographic::zero_support_categories(&demographics, c)?;
            Ok(TopCategory {
                class: c,
                category: demographics.category(g).to_string(),
                probability: p,
                zero_support: zero.iter().map(|&z| demographics.category(z).to_string()).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let baseline_accuracy = if cls.baseline {
        let heads: Vec<usize> = targets.iter().map(|&t| table.cardinality(t)).collect();
        let raw = |idx: &[usize]| -> Vec<usize> {
            idx.iter()
                .flat_map(|&i| targets.iter().map(move |&t| table.rows()[i][t]))
                .collect()
        };
        let mh = MultiHead::init(x.n_cols(), &cls.hidden, &heads, cls.init_seed)?;
        let (mh, _) = mh.train(&x_tr, &raw(&i_tr), &x_va, &raw(&i_va), &cls.train)?;
        Some(mh.accuracy(&x_te, &raw(&i_te))?)
    } else {
        None
    };

    let report = Stage3Report {
        k,
        input_features: inputs.iter().map(|&v| table.variables()[v].clone()).collect(),
        input_dim: x.n_cols(),
        n_train: i_tr.len(),
        n_val: i_va.len(),
        n_test: i_te.len(),
        test_accuracy,
        prediction_score,
        stopped_epoch: history.stopped_epoch,
        best_epoch: history.best_epoch,
        baseline_accuracy,
        demographic_targets: config.targets.clone(),
        top_categories,
    };
    let dir = config.stage_dir(3);
    write_json(&dir.join("model.json"), &model.to_json())?;
    write_file(&dir.join("history.csv"), &history.to_csv())?;
    write_file(&dir.join("demographics.csv"), &demographics.to_csv())?;
    write_json(&dir.join("demographics.json"), &demographics)?;
    write_json(&dir.join("report.json"), &report)?;
    Ok(Stage3 {
        model,
        history,
        demographics,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub score: f64,
    pub category: String,
    pub probability: f64,
}

/// Predicted class of an encoded record and that class's most probable
/// demographic category.
pub fn predict(model: &MlpModel, demographics: &DemographicTable, x: &[f64]) -> Result<Prediction> {
    let (class, score) = dsid::predict_class(model, x)?;
    let (g, probability) = demographic::argmax_demographic(demographics, class)?;
    Ok(Prediction {
        class,
        score,
        category: demographics.category(g).to_string(),
        probability,
    })
}

/// Loads the input named by the configuration and re-runs stage 2 on the
/// graph persisted by stage 1.
pub fn run_stage2_from_artifacts(config: &PipelineConfig) -> Result<(CategoricalTable, Stage2)> {
    let table = config.load_input()?;
    let dag = load_stage1_dag(config)?;
    let stage = run_stage2(config, &table, &dag)?;
    Ok((table, stage))
}

/// Re-runs stage 3 on the features and labels persisted by stage 2.
pub fn run_stage3_from_artifacts(config: &PipelineConfig) -> Result<Stage3> {
    let table = config.load_input()?;
    let clusters = load_stage2_clusters(config)?;
    let features = resolve(&table, &clusters.features)?;
    let labels = load_stage2_labels(config)?;
    run_stage3(config, &table, &features, &labels)
}

/// One-hot encodes `features` of `table` against recorded state lists, so
/// rows of a new file line up with the columns a model was trained on.
pub fn encode_against(table: &CategoricalTable, meta: &TableMetadata, features: &[String]) -> Result<FeatureMatrix> {
    let mut plan = Vec::with_capacity(features.len());
    for name in features {
        let col = table
            .index_of(name)
            .ok_or_else(|| Error::VariableMismatch(format!("input has no column `{name}`")))?;
        let var = meta
            .variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::VariableMismatch(format!("`{name}` was not a training variable")))?;
        let known = &meta.states[var];
        let map = table.states()[col]
            .iter()
            .map(|label| known.iter().position(|k| k == label))
            .collect::<Vec<_>>();
        plan.push((col, known.len(), map));
    }
    let width: usize = plan.iter().map(|p| p.1).sum();
    let rows = table
        .rows()
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut x = vec![0.0; width];
            let mut at = 0;
            for (col, card, map) in &plan {
                let s = map[row[*col]].ok_or_else(|| {
                    Error::Assignment(format!(
                        "row {}: `{}` is not a known state of `{}`",
                        r + 1,
                        table.states()[*col][row[*col]],
                        table.variables()[*col]
                    ))
                })?;
                x[at + s] = 1.0;
                at += card;
            }
            Ok(x)
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_rows(&rows)
}

/// Predictions for every row of the configured input, using the persisted
/// stage-1 metadata and stage-3 model and demographic table.
pub fn predict_from_artifacts(config: &PipelineConfig) -> Result<Vec<Prediction>> {
    let table = config.load_input()?;
    let meta: TableMetadata = read_json(&config.stage_dir(1).join("metadata.json"))?;
    let report: Stage3Report = read_json(&config.stage_dir(3).join("report.json"))?;
    let model = MlpModel::load(&config.stage_dir(3).join("model.json"))?;
    let demographics: DemographicTable = read_json(&config.stage_dir(3).join("demographics.json"))?;
    let x = encode_against(&table, &meta, &report.input_features)?;
    x.rows().map(|r| predict(&model, &demographics, r)).collect()
}

pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["class", "score", "category", "probability"])
        .expect("in-memory write");
    for p in predictions {
        w.write_record([
            p.class.to_string(),
            format!("{:?}", p.score),
            p.category.clone(),
            format!("{:?}", p.probability),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub stage1: Stage1,
    pub stage2: Stage2,
    pub stage3: Stage3,
}

pub fn run_all(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let table = config.load_input()?;
    run_all_on(config, &table)
}

/// Runs every stage on an in-memory table.
pub fn run_all_on(config: &PipelineConfig, table: &CategoricalTable) -> Result<PipelineRun> {
    config.validate()?;
    resolve(table, &config.targets)?;
    let stage1 = run_stage1(config, table)?;
    let stage2 = run_stage2(config, table, &stage1.dag)?;
    let stage3 = run_stage3(config, table, &stage2.features, &stage2.model.assignments)?;
    Ok(PipelineRun { stage1, stage2, stage3 })
}
