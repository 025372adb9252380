use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cpdforge::cpd::{self, BayesNet};
use cpdforge::data::SplitSpec;
use cpdforge::pipeline::{self, Estimator, PipelineConfig};
use cpdforge::sampling::{self, Fixture, FixtureKind, SampleConfig};
use cpdforge::structure::{Score, SearchConfig};
use cpdforge::{clustering, Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "cpdforge",
    version,
    about = "Bayesian-network structure learning, clustering and symptom-class identification on categorical data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a DAG from a CSV and write stage1/dag.json and adjacency.csv.
    LearnStructure(Common),
    /// Fit CPDs over the stage-1 graph (or `fixed_dag`) and write cpds.json.
    FitCpds(Common),
    /// Write severity reports from stage1/cpds.json.
    ReportSeverity {
        #[command(flatten)]
        common: Common,
        /// Nodes to report (comma separated); defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
    },
    /// Cluster records on the ancestors of the targets (stage 2).
    Cluster(Common),
    /// Run only the Dunn-index scan over the configured k range.
    SelectK(Common),
    /// Train the classifier on the stage-2 labels (stage 3).
    TrainDsid(Common),
    /// Predict class and top demographic category for every input row.
    Predict(Common),
    /// Write a synthetic dataset drawn from a built-in fixture.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "table2")]
        fixture: FixtureArg,
        /// Number of rows (network fixtures) or rows per cluster (mixture).
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Run all three stages.
    RunAll(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    Chain3,
    Collider3,
    Table2,
    Mixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Bic,
    Bdeu,
}

#[derive(Args, Clone)]
struct Common {
    /// Input CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random component.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed number of clusters.
    #[arg(long)]
    k: Option<usize>,
    /// Demographic target variables (comma separated).
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<String>>,
    #[arg(long, value_enum)]
    score: Option<ScoreArg>,
    /// Equivalent sample size for the Bayesian estimator and BDeu.
    #[arg(long)]
    ess: Option<f64>,
    /// Output directory (for `sample`, the output CSV path).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> cpdforge::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(input) = &self.input {
            cfg.input = Some(input.clone());
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(k) = self.k {
            cfg.clustering.k = Some(k);
        }
        if let Some(t) = &self.targets {
            cfg.targets = t.clone();
        }
        if let Some(ess) = self.ess {
            cfg.estimator = Estimator::Bayesian { ess };
        }
        let s = &cfg.structure;
        let score = match (self.score, s.score()) {
            (Some(ScoreArg::Bic), _) => Score::Bic,
            (Some(ScoreArg::Bdeu), Score::Bdeu { ess }) => Score::Bdeu {
                ess: self.ess.unwrap_or(ess),
            },
            (Some(ScoreArg::Bdeu), Score::Bic) => Score::Bdeu {
                ess: self.ess.unwrap_or(1.0),
            },
            (None, Score::Bdeu { ess }) => Score::Bdeu {
                ess: self.ess.unwrap_or(ess),
            },
            (None, Score::Bic) => Score::Bic,
        };
        let seed = self.seed.unwrap_or(s.seed());
        cfg.structure = SearchConfig::new(score, s.max_parents(), s.max_iterations(), s.restarts(), seed)?;
        if let Some(seed) = self.seed {
            cfg.clustering.seed = seed;
            cfg.classifier.train.seed = seed;
            cfg.classifier.init_seed = seed;
            let (tr, va, te) = cfg.classifier.split.ratios();
            cfg.classifier.split = SplitSpec::new(tr, va, te, seed)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write(path: &Path, text: &str) -> cpdforge::Result<()> {
    let io = |p: &Path, e: std::io::Error| Error::Config(format!("{}: {e}", p.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn json<T: serde::Serialize>(value: &T) -> cpdforge::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> cpdforge::Result<()> {
    match cli.command {
        Command::LearnStructure(common) => {
            let cfg = common.config()?;
            let table = cfg.load_input()?;
            let (dag, search) = pipeline::learn_structure(&cfg, &table)?;
            let dir = cfg.stage_dir(1);
            match &search {
                Some(s) => write(&dir.join("dag.json"), &json(&s.to_json())?)?,
                None => write(&dir.join("dag.json"), &json(&dag.to_json())?)?,
            }
            write(&dir.join("adjacency.csv"), &dag.to_adjacency_csv())?;
            println!("{} nodes, {} edges", dag.n_nodes(), dag.n_edges());
        }
        Command::FitCpds(common) => {
            let cfg = common.config()?;
            let table = cfg.load_input()?;
            let dag = match &cfg.fixed_dag {
                Some(_) => pipeline::learn_structure(&cfg, &table)?.0,
                None => pipeline::load_stage1_dag(&cfg)?,
            };
            let net = pipeline::fit_cpds(&cfg, &table, &dag)?;
            let dir = cfg.stage_dir(1);
            write(&dir.join("cpds.json"), &json(&net.to_json())?)?;
            write(&dir.join("metadata.json"), &json(&table.metadata())?)?;
        }
        Command::ReportSeverity { common, nodes } => {
            let mut cfg = common.config()?;
            if !nodes.is_empty() {
                cfg.severity_nodes = Some(nodes);
            }
            let net = BayesNet::load(&cfg.stage_dir(1).join("cpds.json"))?;
            for v in pipeline::severity_nodes(&cfg, net.dag())? {
                let report = cpd::severity_report(&net, v)?;
                let path = cfg
                    .stage_dir(1)
                    .join("reports")
                    .join(format!("{}.csv", net.dag().name(v)));
                write(&path, &report.to_csv())?;
                print!("{}", report.to_csv());
            }
        }
        Command::Cluster(common) => {
            let cfg = common.config()?;
            let (_, stage) = pipeline::run_stage2_from_artifacts(&cfg)?;
            println!("k = {}, sse = {}", stage.model.k, stage.model.sse);
        }
        Command::SelectK(common) => {
            let cfg = common.config()?;
            let table = cfg.load_input()?;
            let dag = match &cfg.clustering.features {
                Some(_) => cpdforge::dag::Dag::empty(table.variables().to_vec()),
                None => pipeline::load_stage1_dag(&cfg)?,
            };
            let features = pipeline::clustering_features(&cfg, &table, &dag)?;
            let m = pipeline::encode_features(&table, &features, cfg.clustering.encoding)?;
            let c = &cfg.clustering;
            let sel = clustering::select_k(&m, c.k_min, c.k_max.min(m.n_rows()), c.seed)?;
            write(&cfg.stage_dir(2).join("dunn_scan.csv"), &sel.to_csv())?;
            print!("{}", sel.to_csv());
            println!("chosen k = {}", sel.chosen_k);
        }
        Command::TrainDsid(common) => {
            let cfg = common.config()?;
            let stage = pipeline::run_stage3_from_artifacts(&cfg)?;
            print!("{}", json(&stage.report)?);
        }
        Command::Predict(common) => {
            let cfg = common.config()?;
            let preds = pipeline::predict_from_artifacts(&cfg)?;
            let text = pipeline::predictions_to_csv(&preds);
            write(&cfg.stage_dir(3).join("predictions.csv"), &text)?;
            print!("{text}");
        }
        Command::Sample { common, fixture, n } => {
            let seed = common.seed.unwrap_or(0);
            let out = common
                .out
                .clone()
                .ok_or_else(|| Error::Config("--out is required for `sample`".into()))?;
            let kind = match fixture {
                FixtureArg::Chain3 => FixtureKind::Chain3,
                FixtureArg::Collider3 => FixtureKind::Collider3,
                FixtureArg::Table2 => FixtureKind::Table2Dag,
                FixtureArg::Mixture => FixtureKind::MixtureK {
                    k: common.k.unwrap_or(3),
                },
            };
            match sampling::make_fixture(kind)? {
                Fixture::Network(net) => {
                    let table = sampling::forward_sample(&net, &SampleConfig::new(n, seed)?)?;
                    table.write_csv(&out)?;
                }
                Fixture::Mixture(_) => {
                    let opts = sampling::MixtureOptions {
                        n_per_cluster: n,
                        seed,
                        ..Default::default()
                    };
                    let mix = sampling::mixture(common.k.unwrap_or(3), opts)?;
                    mix.table.write_csv(&out)?;
                    write(
                        &out.with_extension("labels.csv"),
                        &clustering::labels_to_csv(&mix.labels),
                    )?;
                }
            }
        }
        Command::RunAll(common) => {
            let cfg = common.config()?;
            let run = pipeline::run_all(&cfg)?;
            print!("{}", json(&run.stage3.report)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CPDFORGE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // an already-initialised pool is not an error worth failing on
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
