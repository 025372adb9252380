//! Forward sampling and canned ground-truth fixtures.
//!
//! Record `i` of a sample is drawn from its own PCG stream `(seed, i)`, so
//! records can be generated in parallel and the output depends only on the
//! seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpd::{BayesNet, Cpd, SeverityReport};
use crate::dag::Dag;
use crate::data::{CategoricalTable, FeatureMatrix};
use crate::demographic::DemographicTable;
use crate::rng::SeededRng;
use crate::{Error, Result};

const TABLE2_ADJACENCY: &str = include_str!("../fixtures/table2_adjacency.csv");
const ICU_CPD: &str = include_str!("../fixtures/icu_cpd.csv");
const MECHVENT_CPD: &str = include_str!("../fixtures/mechvent_cpd.csv");
const TABLE6_DEMOGRAPHICS: &str = include_str!("../fixtures/table6_demographics.csv");

/// Seed used to draw the synthetic CPDs of the 24-node fixture.
const TABLE2_CPD_SEED: u64 = 0x7ab1_e2da;

pub const AGE_GROUPS: [&str; 9] = [
    "0 - 9 Years",
    "10 - 19 Years",
    "20 - 29 Years",
    "30 - 39 Years",
    "40 - 49 Years",
    "50 - 59 Years",
    "60 - 69 Years",
    "70 - 79 Years",
    "80+ Years",
];

pub const GENDERS: [&str; 2] = ["Female", "Male"];

pub const RACES: [&str; 6] = [
    "American Indian/Alaska Native",
    "Asian",
    "Black",
    "Multiple/Other",
    "Native Hawaiian/Other Pacific Islander",
    "White",
];

/// Human-readable names of the 24 lettered features.
pub const TABLE2_FEATURES: [(&str, &str); 24] = [
    ("A", "abdominal pain"),
    ("B", "abnormal chest X-ray"),
    ("C", "acute respiratory distress syndrome"),
    ("D", "age group"),
    ("E", "chills"),
    ("F", "cough"),
    ("G", "death"),
    ("H", "diarrhea"),
    ("I", "fever"),
    ("J", "subjective fever"),
    ("K", "health care worker"),
    ("L", "headache"),
    ("M", "hospitalized"),
    ("N", "intensive care unit (ICU)"),
    ("O", "mechanical ventilation"),
    ("P", "medical condition"),
    ("Q", "muscle aches (myalgia)"),
    ("R", "nausea or vomiting"),
    ("S", "pneumonia"),
    ("T", "race"),
    ("U", "runny nose"),
    ("V", "gender"),
    ("W", "shortness of breath"),
    ("X", "sore throat"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    n_samples: usize,
    seed: u64,
}

impl SampleConfig {
    pub fn new(n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples < 1 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        Ok(Self { n_samples, seed })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws one record: nodes in topological order, each state from the CPD row
/// selected by the already-sampled parents.
fn sample_record(net: &BayesNet, order: &[usize], rng: &mut SeededRng) -> Vec<usize> {
    let mut rec = vec![0; net.n_nodes()];
    let mut parent_states = Vec::new();
    for &v in order {
        let cpd = net.cpd(v);
        parent_states.clear();
        parent_states.extend(cpd.parents().iter().map(|&p| rec[p]));
        let row = cpd.row(cpd.config_index(&parent_states));
        rec[v] = rng.categorical(row).expect("CPD rows are normalized");
    }
    rec
}

pub fn forward_sample(net: &BayesNet, config: &SampleConfig) -> Result<CategoricalTable> {
    let order = net.dag().topological_order();
    let rows: Vec<Vec<usize>> = (0..config.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeededRng::with_stream(config.seed, i as u64);
            sample_record(net, &order, &mut rng)
        })
        .collect();
    CategoricalTable::new(net.names().to_vec(), net.states().to_vec(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Chain3,
    Collider3,
    Table2Dag,
    MixtureK { k: usize },
}

/// Planted-cluster data. `features` holds Gaussian noise around hypercube
/// corners; `table` is the categorical analogue (corner bits with rare flips).
#[derive(Debug, Clone)]
pub struct MixtureData {
    pub k: usize,
    pub features: FeatureMatrix,
    pub table: CategoricalTable,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Fixture {
    Network(BayesNet),
    Mixture(MixtureData),
}

pub fn make_fixture(kind: FixtureKind) -> Result<Fixture> {
    Ok(match kind {
        FixtureKind::Chain3 => Fixture::Network(chain3()),
        FixtureKind::Collider3 => Fixture::Network(collider3()),
        FixtureKind::Table2Dag => Fixture::Network(table2_net()?),
        FixtureKind::MixtureK { k } => Fixture::Mixture(mixture(k, MixtureOptions::default())?),
    })
}

fn yes_no() -> Vec<String> {
    vec!["no".into(), "yes".into()]
}

fn bernoulli_rows(p_yes: &[f64]) -> Vec<Vec<f64>> {
    p_yes.iter().map(|&p| vec![1.0 - p, p]).collect()
}

fn abc() -> Vec<String> {
    vec!["A".into(), "B".into(), "C".into()]
}

/// A -> B -> C with conditional gaps of 0.75 and 0.65.
pub fn chain3() -> BayesNet {
    let dag = Dag::new(abc(), &[(0, 1), (1, 2)]).expect("static graph");
    let cpds = vec![
        Cpd::new(0, vec![], vec![], 2, bernoulli_rows(&[0.4])),
        Cpd::new(1, vec![0], vec![2], 2, bernoulli_rows(&[0.1, 0.85])),
        Cpd::new(2, vec![1], vec![2], 2, bernoulli_rows(&[0.15, 0.8])),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("static CPDs");
    BayesNet::new(dag, vec![yes_no(); 3], cpds).expect("static net")
}

/// A <- C -> B with conditional gaps of 0.7 on both children.
pub fn collider3() -> BayesNet {
    let dag = Dag::new(abc(), &[(2, 0), (2, 1)]).expect("static graph");
    let cpds = vec![
        Cpd::new(0, vec![2], vec![2], 2, bernoulli_rows(&[0.1, 0.8])),
        Cpd::new(1, vec![2], vec![2], 2, bernoulli_rows(&[0.2, 0.9])),
        Cpd::new(2, vec![], vec![], 2, bernoulli_rows(&[0.5])),
    ]
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .expect("static CPDs");
    BayesNet::new(dag, vec![yes_no(); 3], cpds).expect("static net")
}

/// The 24-node, 109-edge graph of the reference study.
pub fn table2_dag() -> Dag {
    Dag::from_adjacency_csv(TABLE2_ADJACENCY).expect("embedded fixture is a valid DAG")
}

/// State labels for the 24-node fixture: age group (D), race (T) and gender
/// (V) are multi-state, everything else is No/Yes.
pub fn table2_states() -> Vec<Vec<String>> {
    TABLE2_FEATURES
        .iter()
        .map(|(letter, _)| match *letter {
            "D" => AGE_GROUPS.iter().map(|s| s.to_string()).collect(),
            "T" => RACES.iter().map(|s| s.to_string()).collect(),
            "V" => GENDERS.iter().map(|s| s.to_string()).collect(),
            _ => vec!["No".to_string(), "Yes".to_string()],
        })
        .collect()
}

/// The published ICU table, `P(N | B, C, M)`, in report layout.
pub fn icu_report() -> SeverityReport {
    SeverityReport::from_csv(ICU_CPD).expect("embedded fixture parses")
}

/// The published mechanical-ventilation table, `P(O | C, M, N, S)`.
pub fn mechvent_report() -> SeverityReport {
    SeverityReport::from_csv(MECHVENT_CPD).expect("embedded fixture parses")
}

/// The published per-class demographic distribution (27 classes, two-decimal
/// values as printed).
pub fn table6_demographics() -> DemographicTable {
    DemographicTable::from_csv(TABLE6_DEMOGRAPHICS, 0.05).expect("embedded fixture parses")
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Synthetic CPD with strong parent effects: each row is a softmax of a base
/// logit vector plus one additive effect vector per parent state.
fn synthetic_cpd(v: usize, parents: &[usize], states: &[Vec<String>], rng: &mut SeededRng) -> Result<Cpd> {
    let card = states[v].len();
    let parent_cards: Vec<usize> = parents.iter().map(|&p| states[p].len()).collect();
    let base: Vec<f64> = (0..card).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let effects: Vec<Vec<Vec<f64>>> = parent_cards
        .iter()
        .map(|&pc| {
            (0..pc)
                .map(|_| (0..card).map(|_| rng.uniform_range(-2.0, 2.0)).collect())
                .collect()
        })
        .collect();
    let q: usize = parent_cards.iter().product();
    let mut table = Vec::with_capacity(q);
    let mut config = vec![0usize; parents.len()];
    for _ in 0..q {
        let mut logits = base.clone();
        for (k, &s) in config.iter().enumerate() {
            for (l, e) in logits.iter_mut().zip(&effects[k][s]) {
                *l += e;
            }
        }
        table.push(softmax(&logits));
        // mixed-radix increment, last parent fastest
        for k in (0..config.len()).rev() {
            config[k] += 1;
            if config[k] < parent_cards[k] {
                break;
            }
            config[k] = 0;
        }
    }
    Cpd::new(v, parents.to_vec(), parent_cards, card, table)
}

/// The 24-node graph with synthetic CPDs. ICU (N) and mechanical ventilation
/// (O) carry the published two-decimal tables; every other node gets a
/// seeded synthetic CPD.
pub fn table2_net() -> Result<BayesNet> {
    let dag = table2_dag();
    let states = table2_states();
    let icu = icu_report();
    let mechvent = mechvent_report();
    let mut rng = SeededRng::new(TABLE2_CPD_SEED);
    let cpds = (0..dag.n_nodes())
        .map(|v| match dag.name(v) {
            "N" => icu.to_cpd(&dag, &states),
            "O" => mechvent.to_cpd(&dag, &states),
            _ => synthetic_cpd(v, dag.parents(v), &states, &mut rng),
        })
        .collect::<Result<Vec<_>>>()?;
    BayesNet::new(dag, states, cpds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureOptions {
    pub n_per_cluster: usize,
    pub dims: usize,
    /// Standard deviation of the Gaussian noise around each corner.
    pub sigma: f64,
    /// Per-bit flip probability for the categorical table.
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for MixtureOptions {
    fn default() -> Self {
        Self {
            n_per_cluster: 60,
            dims: 12,
            sigma: 0.05,
            flip_prob: 0.005,
            seed: 0,
        }
    }
}

/// Greedy lexicode: corners of `{0,1}^dims` in increasing integer order,
/// keeping each one at Hamming distance ≥ `min_dist` from all kept so far.
fn lexicode(dims: usize, min_dist: u32, count: usize) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for w in 0u64..(1u64 << dims) {
        if out.iter().all(|&c| (c ^ w).count_ones() >= min_dist) {
            out.push(w);
            if out.len() == count {
                break;
            }
        }
    }
    out
}

pub fn mixture(k: usize, opts: MixtureOptions) -> Result<MixtureData> {
    if k < 1 || opts.n_per_cluster < 1 {
        return Err(Error::InvalidParameter(
            "mixture needs k >= 1 and n_per_cluster >= 1".into(),
        ));
    }
    if !(1..=20).contains(&opts.dims) {
        return Err(Error::InvalidParameter("mixture dims must be in 1..=20".into()));
    }
    let min_dist = (opts.dims as u32 / 2).max(1);
    let corners = lexicode(opts.dims, min_dist, k);
    if corners.len() < k {
        return Err(Error::InvalidParameter(format!(
            "cannot place {k} separated corners in {} dimensions",
            opts.dims
        )));
    }
    let mut rng = SeededRng::new(opts.seed);
    let mut points = Vec::with_capacity(k * opts.n_per_cluster);
    let mut rows = Vec::with_capacity(k * opts.n_per_cluster);
    let mut labels = Vec::with_capacity(k * opts.n_per_cluster);
    for (c, &corner) in corners.iter().enumerate() {
        for _ in 0..opts.n_per_cluster {
            let bits: Vec<usize> = (0..opts.dims).map(|d| ((corner >> d) & 1) as usize).collect();
            points.push(
                bits.iter()
                    .map(|&b| b as f64 + opts.sigma * rng.normal())
                    .collect::<Vec<_>>(),
            );
            rows.push(
                bits.iter()
                    .map(|&b| if rng.uniform() < opts.flip_prob { 1 - b } else { b })
                    .collect::<Vec<_>>(),
            );
            labels.push(c);
        }
    }
    let names = (0..opts.dims).map(|d| format!("b{d}")).collect();
    let table = CategoricalTable::new(names, vec![vec!["0".to_string(), "1".to_string()]; opts.dims], rows)?;
    Ok(MixtureData {
        k,
        features: FeatureMatrix::from_rows(&points)?,
        table,
        labels,
    })
}
