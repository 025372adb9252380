//! Conditional probability tables over a fixed DAG.
//!
//! A [`Cpd`] stores one probability row per parent configuration. Parents are
//! listed in ascending node order and configurations are indexed mixed-radix
//! with the first parent most significant, so the last parent varies fastest.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::data::CategoricalTable;
use crate::structure::count_family;
use crate::{Error, Result};

/// Tolerance for the sum-to-one check on every CPD row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpd {
    variable: usize,
    parents: Vec<usize>,
    parent_cards: Vec<usize>,
    card: usize,
    table: Vec<Vec<f64>>,
    /// Rows filled with the uniform fallback because the configuration was
    /// never observed.
    unseen: Vec<bool>,
}

impl Cpd {
    pub fn new(
        variable: usize,
        parents: Vec<usize>,
        parent_cards: Vec<usize>,
        card: usize,
        table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let unseen = vec![false; table.len()];
        Self::with_flags(variable, parents, parent_cards, card, table, unseen)
    }

    fn with_flags(
        variable: usize,
        parents: Vec<usize>,
        parent_cards: Vec<usize>,
        card: usize,
        table: Vec<Vec<f64>>,
        unseen: Vec<bool>,
    ) -> Result<Self> {
        if parents.len() != parent_cards.len() {
            return Err(Error::DimensionMismatch {
                expected: parents.len(),
                got: parent_cards.len(),
            });
        }
        if parents.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("CPD parents must be strictly ascending".into()));
        }
        let q: usize = parent_cards.iter().product();
        if table.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: table.len(),
            });
        }
        if unseen.len() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                got: unseen.len(),
            });
        }
        for row in &table {
            if row.len() != card {
                return Err(Error::DimensionMismatch {
                    expected: card,
                    got: row.len(),
                });
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Numeric(format!("CPD entry outside [0, 1] for node #{variable}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Numeric(format!("CPD row for node #{variable} sums to {s}")));
            }
        }
        Ok(Self {
            variable,
            parents,
            parent_cards,
            card,
            table,
            unseen,
        })
    }

    pub fn variable(&self) -> usize {
        self.variable
    }

    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn parent_cards(&self) -> &[usize] {
        &self.parent_cards
    }

    pub fn cardinality(&self) -> usize {
        self.card
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn unseen_flags(&self) -> &[bool] {
        &self.unseen
    }

    pub fn n_configs(&self) -> usize {
        self.table.len()
    }

    /// Mixed-radix index of a parent assignment (states listed in parent order).
    pub fn config_index(&self, parent_states: &[usize]) -> usize {
        parent_states
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |j, (&s, &c)| j * c + s)
    }

    /// Inverse of [`Cpd::config_index`].
    pub fn config_states(&self, mut j: usize) -> Vec<usize> {
        let mut out = vec![0; self.parent_cards.len()];
        for (slot, &c) in out.iter_mut().zip(&self.parent_cards).rev() {
            *slot = j % c;
            j /= c;
        }
        out
    }

    pub fn row(&self, config: usize) -> &[f64] {
        &self.table[config]
    }
}

/// A DAG with one CPD per node, plus the state labels of every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    dag: Dag,
    states: Vec<Vec<String>>,
    cpds: Vec<Cpd>,
}

impl BayesNet {
    pub fn new(dag: Dag, states: Vec<Vec<String>>, cpds: Vec<Cpd>) -> Result<Self> {
        let n = dag.n_nodes();
        if states.len() != n || cpds.len() != n {
            return Err(Error::VariableMismatch(format!(
                "{n} nodes, {} state lists, {} CPDs",
                states.len(),
                cpds.len()
            )));
        }
        for (v, cpd) in cpds.iter().enumerate() {
            if cpd.variable != v {
                return Err(Error::VariableMismatch(format!(
                    "CPD #{v} describes node #{}",
                    cpd.variable
                )));
            }
            if cpd.parents != dag.parents(v) {
                return Err(Error::VariableMismatch(format!(
                    "CPD parents of `{}` differ from the graph",
                    dag.name(v)
                )));
            }
            if cpd.card != states[v].len() {
                return Err(Error::DimensionMismatch {
                    expected: states[v].len(),
                    got: cpd.card,
                });
            }
            for (&p, &c) in cpd.parents.iter().zip(&cpd.parent_cards) {
                if states[p].len() != c {
                    return Err(Error::DimensionMismatch {
                        expected: states[p].len(),
                        got: c,
                    });
                }
            }
        }
        Ok(Self { dag, states, cpds })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn states(&self) -> &[Vec<String>] {
        &self.states
    }

    pub fn cpds(&self) -> &[Cpd] {
        &self.cpds
    }

    pub fn cpd(&self, v: usize) -> &Cpd {
        &self.cpds[v]
    }

    pub fn n_nodes(&self) -> usize {
        self.dag.n_nodes()
    }

    pub fn names(&self) -> &[String] {
        self.dag.names()
    }

    pub fn state_index(&self, var: usize, label: &str) -> Result<usize> {
        self.states[var]
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::Assignment(format!("`{label}` is not a state of `{}`", self.dag.name(var))))
    }

    pub fn to_json(&self) -> NetJson {
        NetJson {
            variables: self.dag.names().to_vec(),
            states: self.states.clone(),
            cpds: self
                .cpds
                .iter()
                .map(|c| CpdJson {
                    variable: self.dag.name(c.variable).to_string(),
                    parents: c.parents.iter().map(|&p| self.dag.name(p).to_string()).collect(),
                    parent_cards: c.parent_cards.clone(),
                    table: c.table.clone(),
                    flags: c.unseen.clone(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &NetJson) -> Result<Self> {
        let index = |name: &str| {
            json.variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::UnknownNode(name.to_string()))
        };
        let mut edges = Vec::new();
        let mut cpds: Vec<Option<Cpd>> = vec![None; json.variables.len()];
        for c in &json.cpds {
            let v = index(&c.variable)?;
            let pairs: Vec<(usize, usize)> = c
                .parents
                .iter()
                .zip(&c.parent_cards)
                .map(|(p, &card)| index(p).map(|i| (i, card)))
                .collect::<Result<_>>()?;
            if pairs.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidParameter(format!(
                    "parents of `{}` must be listed in ascending node order",
                    c.variable
                )));
            }
            edges.extend(pairs.iter().map(|&(p, _)| (p, v)));
            let flags = if c.flags.is_empty() {
                vec![false; c.table.len()]
            } else {
                c.flags.clone()
            };
            let card = json.states.get(v).map(Vec::len).unwrap_or(0);
            cpds[v] = Some(Cpd::with_flags(
                v,
                pairs.iter().map(|&(p, _)| p).collect(),
                pairs.iter().map(|&(_, c)| c).collect(),
                card,
                c.table.clone(),
                flags,
            )?);
        }
        let dag = Dag::new(json.variables.clone(), &edges)?;
        let cpds = cpds
            .into_iter()
            .enumerate()
            .map(|(v, c)| c.ok_or_else(|| Error::VariableMismatch(format!("no CPD for `{}`", json.variables[v]))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dag, json.states.clone(), cpds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

/// Persisted CPD of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpdJson {
    pub variable: String,
    pub parents: Vec<String>,
    pub parent_cards: Vec<usize>,
    pub table: Vec<Vec<f64>>,
    #[serde(default)]
    pub flags: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetJson {
    pub variables: Vec<String>,
    pub states: Vec<Vec<String>>,
    pub cpds: Vec<CpdJson>,
}

fn check_variables(table: &CategoricalTable, dag: &Dag) -> Result<()> {
    if table.variables() != dag.names() {
        return Err(Error::VariableMismatch(format!(
            "graph nodes {:?} do not match table variables {:?}",
            dag.names(),
            table.variables()
        )));
    }
    Ok(())
}

/// Shared fitting path: `P(s | j) = (N_js + α) / (N_j + α r)`, with `α = 0`
/// for maximum likelihood. Rows with `N_j + α r = 0` fall back to uniform.
fn fit_with(table: &CategoricalTable, dag: &Dag, alpha_for: impl Fn(usize, usize) -> f64 + Sync) -> Result<BayesNet> {
    check_variables(table, dag)?;
    let cpds = (0..dag.n_nodes())
        .into_par_iter()
        .map(|v| {
            let parents = dag.parents(v).to_vec();
            let parent_cards: Vec<usize> = parents.iter().map(|&p| table.cardinality(p)).collect();
            let card = table.cardinality(v);
            let q: usize = parent_cards.iter().product();
            let counts = count_family(table, v, &parents);
            let (counts, _) = counts
                .dense()
                .ok_or_else(|| Error::Numeric(format!("CPD of `{}` is too large to tabulate", dag.name(v))))?;
            let alpha = alpha_for(card, q);
            let mut rows = Vec::with_capacity(q);
            let mut unseen = Vec::with_capacity(q);
            for chunk in counts.chunks_exact(card) {
                let nj: u32 = chunk.iter().sum();
                let denom = nj as f64 + alpha * card as f64;
                unseen.push(nj == 0);
                if denom > 0.0 {
                    rows.push(chunk.iter().map(|&n| (n as f64 + alpha) / denom).collect());
                } else {
                    rows.push(vec![1.0 / card as f64; card]);
                }
            }
            Cpd::with_flags(v, parents, parent_cards, card, rows, unseen)
        })
        .collect::<Result<Vec<_>>>()?;
    BayesNet::new(dag.clone(), table.states().to_vec(), cpds)
}

/// Relative-frequency estimate. Unobserved parent configurations get a
/// uniform row and are flagged.
pub fn fit_mle(table: &CategoricalTable, dag: &Dag) -> Result<BayesNet> {
    fit_with(table, dag, |_, _| 0.0)
}

/// Dirichlet pseudo-count estimate with `ess` spread evenly over every cell:
/// `α = ess / (r · q)`.
pub fn fit_bayesian(table: &CategoricalTable, dag: &Dag, ess: f64) -> Result<BayesNet> {
    if !(ess > 0.0 && ess.is_finite()) {
        return Err(Error::InvalidParameter(format!("ess must be positive, got {ess}")));
    }
    fit_with(table, dag, |card, q| ess / (card as f64 * q as f64))
}

/// The stored row of `var` for an assignment covering exactly its parents.
pub fn cpd_lookup<'a>(net: &'a BayesNet, var: usize, parent_assignment: &BTreeMap<usize, usize>) -> Result<&'a [f64]> {
    if var >= net.n_nodes() {
        return Err(Error::UnknownNode(format!("#{var}")));
    }
    let cpd = net.cpd(var);
    let given: Vec<usize> = parent_assignment.keys().copied().collect();
    if given != cpd.parents() {
        let missing: Vec<&str> = cpd
            .parents()
            .iter()
            .filter(|p| !parent_assignment.contains_key(p))
            .map(|&p| net.dag().name(p))
            .collect();
        let extra: Vec<String> = given
            .iter()
            .filter(|g| !cpd.parents().contains(g))
            .map(|&g| net.names().get(g).cloned().unwrap_or_else(|| format!("#{g}")))
            .collect();
        return Err(Error::Assignment(format!(
            "parents of `{}`: missing {missing:?}, unexpected {extra:?}",
            net.dag().name(var)
        )));
    }
    let mut states = Vec::with_capacity(cpd.parents().len());
    for (&p, &s) in parent_assignment {
        if s >= net.states()[p].len() {
            return Err(Error::Assignment(format!(
                "state {s} out of range for `{}`",
                net.dag().name(p)
            )));
        }
        states.push(s);
    }
    Ok(cpd.row(cpd.config_index(&states)))
}

/// [`cpd_lookup`] keyed by variable and state labels.
pub fn cpd_lookup_labels<'a>(net: &'a BayesNet, var: &str, parent_assignment: &[(&str, &str)]) -> Result<&'a [f64]> {
    let v = net.dag().index_of(var)?;
    let mut map = BTreeMap::new();
    for &(name, label) in parent_assignment {
        let p = net.dag().index_of(name)?;
        map.insert(p, net.state_index(p, label)?);
    }
    cpd_lookup(net, v, &map)
}

/// `Π_i P(v_i | parents)`, accumulated in log space. `assignment[v]` is the
/// state of node `v`.
pub fn joint_probability(net: &BayesNet, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != net.n_nodes() {
        return Err(Error::Assignment(format!(
            "expected a state for each of {} nodes, got {}",
            net.n_nodes(),
            assignment.len()
        )));
    }
    let mut log_p = 0.0;
    for (v, cpd) in net.cpds().iter().enumerate() {
        let s = assignment[v];
        if s >= cpd.cardinality() {
            return Err(Error::Assignment(format!(
                "state {s} out of range for `{}`",
                net.dag().name(v)
            )));
        }
        let parent_states: Vec<usize> = cpd.parents().iter().map(|&p| assignment[p]).collect();
        let p = cpd.row(cpd.config_index(&parent_states))[s];
        if p == 0.0 {
            return Ok(0.0);
        }
        log_p += p.ln();
    }
    Ok(log_p.exp())
}

/// CPD of one node laid out with parent configurations as columns and the
/// node's states as rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityReport {
    pub target: String,
    pub parents: Vec<String>,
    /// One entry per column: the parent state labels, in parent order.
    pub columns: Vec<Vec<String>>,
    /// `(state label, probability per column)`.
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Two-decimal rendering: `1.0`, `0.8`, `0.91`.
pub fn format_2dp(p: f64) -> String {
    let r = (p * 100.0).round() / 100.0;
    // `{:?}` prints the shortest round-trip form and keeps a trailing `.0`
    format!("{:?}", r + 0.0)
}

impl SeverityReport {
    pub fn to_csv(&self) -> String {
        let label = |name: &str, state: &str| format!("{name} ({})", title_case(state));
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, parent) in self.parents.iter().enumerate() {
            let mut rec = vec![String::new()];
            rec.extend(self.columns.iter().map(|col| label(parent, &col[k])));
            w.write_record(&rec).expect("in-memory write");
        }
        for (state, probs) in &self.rows {
            let mut rec = vec![label(&self.target, state)];
            rec.extend(probs.iter().map(|&p| format_2dp(p)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
    }
}

/// Splits a `"Name (State)"` cell.
fn parse_label(cell: &str) -> Option<(&str, &str)> {
    let open = cell.rfind(" (")?;
    let inner = cell[open + 2..].strip_suffix(')')?;
    Some((&cell[..open], inner))
}

impl SeverityReport {
    /// Parses the layout written by [`SeverityReport::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut parents = Vec::new();
        let mut columns: Vec<Vec<String>> = Vec::new();
        let mut rows = Vec::new();
        let mut target: Option<String> = None;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |msg: String| Error::Format { row: i + 1, msg };
            let first = rec.get(0).unwrap_or("");
            if first.is_empty() {
                if !rows.is_empty() {
                    return Err(bad("parent header after probability rows".into()));
                }
                let mut name = None;
                for (j, cell) in rec.iter().skip(1).enumerate() {
                    let (n, st) = parse_label(cell).ok_or_else(|| bad(format!("bad header cell `{cell}`")))?;
                    if name.is_some_and(|x| x != n) {
                        return Err(bad(format!("mixed parent names in header row: `{cell}`")));
                    }
                    name = Some(n);
                    if columns.len() <= j {
                        columns.push(Vec::new());
                    }
                    columns[j].push(st.to_string());
                }
                parents.push(name.ok_or_else(|| bad("empty header row".into()))?.to_string());
            } else {
                let (n, st) = parse_label(first).ok_or_else(|| bad(format!("bad row label `{first}`")))?;
                if target.as_deref().is_some_and(|t| t != n) {
                    return Err(bad(format!(
                        "row for `{n}` in report of `{}`",
                        target.as_deref().unwrap_or("")
                    )));
                }
                target = Some(n.to_string());
                let probs = rec
                    .iter()
                    .skip(1)
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|_| bad(format!("bad probability `{c}`")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push((st.to_string(), probs));
            }
        }
        let target = target.ok_or(Error::EmptyInput)?;
        if parents.is_empty() {
            columns = vec![Vec::new()];
        }
        for (_, probs) in &rows {
            if probs.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    got: probs.len(),
                });
            }
        }
        Ok(Self {
            target,
            parents,
            columns,
            rows,
        })
    }

    /// Builds the CPD this report describes for node `target` of `dag`.
    /// Parent names, column order and state labels must all agree with the
    /// graph and `states` (labels compared case-insensitively).
    pub fn to_cpd(&self, dag: &Dag, states: &[Vec<String>]) -> Result<Cpd> {
        let v = dag.index_of(&self.target)?;
        let parents = dag.parents(v).to_vec();
        let names: Vec<&str> = parents.iter().map(|&p| dag.name(p)).collect();
        if names != self.parents {
            return Err(Error::VariableMismatch(format!(
                "report parents {:?} differ from graph parents {names:?}",
                self.parents
            )));
        }
        let find = |var: usize, label: &str| {
            states[var]
                .iter()
                .position(|s| s.eq_ignore_ascii_case(label))
                .ok_or_else(|| Error::Assignment(format!("`{label}` is not a state of `{}`", dag.name(var))))
        };
        let parent_cards: Vec<usize> = parents.iter().map(|&p| states[p].len()).collect();
        let card = states[v].len();
        let q: usize = parent_cards.iter().product();
        if self.columns.len() != q || self.rows.len() != card {
            return Err(Error::DimensionMismatch {
                expected: q * card,
                got: self.columns.len() * self.rows.len(),
            });
        }
        let mut table = vec![vec![0.0; card]; q];
        let mut filled = vec![false; q];
        for (col, labels) in self.columns.iter().enumerate() {
            let mut j = 0;
            for ((&p, &c), label) in parents.iter().zip(&parent_cards).zip(labels) {
                j = j * c + find(p, label)?;
            }
            filled[j] = true;
            for (state, probs) in &self.rows {
                table[j][find(v, state)?] = probs[col];
            }
        }
        if filled.contains(&false) {
            return Err(Error::Format {
                row: 0,
                msg: "report repeats a parent configuration".into(),
            });
        }
        Cpd::new(v, parents, parent_cards, card, table)
    }
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn severity_report(net: &BayesNet, target: usize) -> Result<SeverityReport> {
    if target >= net.n_nodes() {
        return Err(Error::UnknownNode(format!("#{target}")));
    }
    let cpd = net.cpd(target);
    let columns = (0..cpd.n_configs())
        .map(|j| {
            cpd.config_states(j)
                .iter()
                .zip(cpd.parents())
                .map(|(&s, &p)| net.states()[p][s].clone())
                .collect()
        })
        .collect();
    let rows = net.states()[target]
        .iter()
        .enumerate()
        .map(|(s, label)| (label.clone(), cpd.rows().iter().map(|r| r[s]).collect()))
        .collect();
    Ok(SeverityReport {
        target: net.dag().name(target).to_string(),
        parents: cpd.parents().iter().map(|&p| net.dag().name(p).to_string()).collect(),
        columns,
        rows,
    })
}
