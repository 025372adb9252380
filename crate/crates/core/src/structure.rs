//! Score-based structure learning.
//!
//! Scores are decomposable: the score of a DAG is the sum of one local term
//! per variable given its parent set. Two scores are available, BIC
//! (log-likelihood minus `ln(n)/2` per free parameter) and BDeu.
//!
//! Search is either exhaustive over every DAG (at most five variables) or a
//! greedy hill-climb over single-edge additions, deletions and reversals.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dag::{Dag, DagJson};
use crate::data::CategoricalTable;
use crate::rng::{derive_seed, SeededRng};
use crate::{Error, Result};

/// Largest variable count accepted by [`exhaustive_search`].
pub const EXHAUSTIVE_MAX_VARS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Score {
    Bic,
    Bdeu { ess: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    score: Score,
    max_parents: Option<usize>,
    max_iterations: usize,
    restarts: usize,
    seed: u64,
}

impl SearchConfig {
    pub fn new(
        score: Score,
        max_parents: Option<usize>,
        max_iterations: usize,
        restarts: usize,
        seed: u64,
    ) -> Result<Self> {
        if max_iterations < 1 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        if restarts < 1 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if let Score::Bdeu { ess } = score {
            if !(ess > 0.0 && ess.is_finite()) {
                return Err(Error::InvalidParameter(format!("BDeu ess must be positive, got {ess}")));
            }
        }
        Ok(Self {
            score,
            max_parents,
            max_iterations,
            restarts,
            seed,
        })
    }

    pub fn score(&self) -> Score {
        self.score
    }

    pub fn max_parents(&self) -> Option<usize> {
        self.max_parents
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn parent_limit(&self) -> usize {
        self.max_parents.unwrap_or(usize::MAX)
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            score: Score::Bic,
            max_parents: Some(5),
            max_iterations: 10_000,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDag {
    pub dag: Dag,
    pub score: f64,
    pub iterations_used: usize,
    /// Score after each accepted move, starting with the initial graph.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDagJson {
    #[serde(flatten)]
    pub dag: DagJson,
    pub score: f64,
    pub iterations: usize,
}

impl ScoredDag {
    pub fn to_json(&self) -> ScoredDagJson {
        ScoredDagJson {
            dag: self.dag.to_json(),
            score: self.score,
            iterations: self.iterations_used,
        }
    }
}

/// Joint counts `N(v = s, parents = j)`, indexed `[j * card + s]`, with the
/// parent configuration `j` in mixed radix (first parent most significant).
/// Configurations that would not fit a dense table are kept sparse.
pub(crate) enum FamilyCounts {
    Dense { counts: Vec<u32>, card: usize },
    Sparse { counts: HashMap<u128, Vec<u32>> },
}

const DENSE_LIMIT: usize = 1 << 22;

pub(crate) fn count_family(table: &CategoricalTable, var: usize, parents: &[usize]) -> FamilyCounts {
    let card = table.cardinality(var);
    let cards: Vec<usize> = parents.iter().map(|&p| table.cardinality(p)).collect();
    let n_configs = cards.iter().try_fold(1usize, |acc, &c| acc.checked_mul(c));
    match n_configs
        .and_then(|q| q.checked_mul(card))
        .filter(|&cells| cells <= DENSE_LIMIT)
    {
        Some(cells) => {
            let mut counts = vec![0u32; cells];
            for row in table.rows() {
                let mut j = 0usize;
                for (&p, &c) in parents.iter().zip(&cards) {
                    j = j * c + row[p];
                }
                counts[j * card + row[var]] += 1;
            }
            FamilyCounts::Dense { counts, card }
        }
        None => {
            let mut counts: HashMap<u128, Vec<u32>> = HashMap::new();
            for row in table.rows() {
                let mut j = 0u128;
                for (&p, &c) in parents.iter().zip(&cards) {
                    j = j.wrapping_mul(c as u128).wrapping_add(row[p] as u128);
                }
                counts.entry(j).or_insert_with(|| vec![0; card])[row[var]] += 1;
            }
            FamilyCounts::Sparse { counts }
        }
    }
}

impl FamilyCounts {
    /// Observed parent configurations (in index order for the dense case)
    /// as count slices over the child states.
    fn observed_rows(&self) -> Vec<&[u32]> {
        match self {
            FamilyCounts::Dense { counts, card } => counts
                .chunks_exact(*card)
                .filter(|r| r.iter().any(|&x| x > 0))
                .collect(),
            FamilyCounts::Sparse { counts, .. } => {
                let mut keys: Vec<_> = counts.keys().copied().collect();
                keys.sort_unstable();
                keys.into_iter().map(|k| counts[&k].as_slice()).collect()
            }
        }
    }

    pub(crate) fn dense(&self) -> Option<(&[u32], usize)> {
        match self {
            FamilyCounts::Dense { counts, card } => Some((counts, *card)),
            FamilyCounts::Sparse { .. } => None,
        }
    }
}

fn validate_family(table: &CategoricalTable, var: usize, parents: &[usize]) -> Result<()> {
    let n = table.n_vars();
    if var >= n {
        return Err(Error::UnknownNode(format!("#{var}")));
    }
    for (i, &p) in parents.iter().enumerate() {
        if p >= n {
            return Err(Error::UnknownNode(format!("#{p}")));
        }
        if p == var {
            return Err(Error::InvalidParameter(format!(
                "variable `{}` cannot be its own parent",
                table.variables()[var]
            )));
        }
        if parents[..i].contains(&p) {
            return Err(Error::InvalidParameter(format!("duplicate parent #{p}")));
        }
    }
    if table.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Local score of `var` given `parents`.
///
/// BIC: `Σ_j Σ_s N_js ln(N_js / N_j) − ln(n)/2 · (r − 1) · q`, where `r` is the
/// child cardinality and `q` the number of parent configurations; `0 ln 0 = 0`.
///
/// BDeu with equivalent sample size `ess`: `α_j = ess/q`, `α_js = ess/(q r)`,
/// `Σ_j [lnΓ(α_j) − lnΓ(α_j + N_j)] + Σ_js [lnΓ(α_js + N_js) − lnΓ(α_js)]`.
pub fn local_score(table: &CategoricalTable, var: usize, parents: &[usize], config: &SearchConfig) -> Result<f64> {
    validate_family(table, var, parents)?;
    Ok(local_score_unchecked(table, var, parents, config.score))
}

fn local_score_unchecked(table: &CategoricalTable, var: usize, parents: &[usize], score: Score) -> f64 {
    let counts = count_family(table, var, parents);
    let r = table.cardinality(var) as f64;
    let q: f64 = parents.iter().map(|&p| table.cardinality(p) as f64).product();
    let rows = counts.observed_rows();
    match score {
        Score::Bic => {
            let mut ll = 0.0;
            for row in rows {
                let nj: u32 = row.iter().sum();
                let nj = nj as f64;
                for &nk in row {
                    if nk > 0 {
                        let nk = nk as f64;
                        ll += nk * (nk / nj).ln();
                    }
                }
            }
            let n = table.n_rows() as f64;
            ll - 0.5 * n.ln() * (r - 1.0) * q
        }
        Score::Bdeu { ess } => {
            let a_j = ess / q;
            let a_jk = ess / (q * r);
            let lg_a_j = ln_gamma(a_j);
            let lg_a_jk = ln_gamma(a_jk);
            let mut s = 0.0;
            // unobserved configurations contribute exactly zero
            for row in rows {
                let nj: u32 = row.iter().sum();
                s += lg_a_j - ln_gamma(a_j + nj as f64);
                for &nk in row {
                    if nk > 0 {
                        s += ln_gamma(a_jk + nk as f64) - lg_a_jk;
                    }
                }
            }
            s
        }
    }
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

pub fn total_score(table: &CategoricalTable, dag: &Dag, config: &SearchConfig) -> Result<f64> {
    check_variables(table, dag)?;
    (0..dag.n_nodes())
        .map(|v| local_score(table, v, dag.parents(v), config))
        .sum()
}

/// Memoized local scores keyed by (variable, sorted parent list).
struct ScoreCache<'a> {
    table: &'a CategoricalTable,
    score: Score,
    memo: HashMap<(usize, Vec<usize>), f64>,
}

impl<'a> ScoreCache<'a> {
    fn new(table: &'a CategoricalTable, score: Score) -> Self {
        Self {
            table,
            score,
            memo: HashMap::new(),
        }
    }

    fn get(&mut self, var: usize, parents: &[usize]) -> f64 {
        if let Some(&s) = self.memo.get(&(var, parents.to_vec())) {
            return s;
        }
        let s = local_score_unchecked(self.table, var, parents, self.score);
        self.memo.insert((var, parents.to_vec()), s);
        s
    }

    /// Computes every missing family in parallel. Values are pure functions of
    /// the key, so the cache contents do not depend on scheduling.
    fn fill(&mut self, families: Vec<(usize, Vec<usize>)>) {
        let mut missing: Vec<_> = families.into_iter().filter(|k| !self.memo.contains_key(k)).collect();
        missing.sort();
        missing.dedup();
        let (table, score) = (self.table, self.score);
        let computed: Vec<f64> = missing
            .par_iter()
            .map(|(v, ps)| local_score_unchecked(table, *v, ps, score))
            .collect();
        self.memo.extend(missing.into_iter().zip(computed));
    }

    fn dag_score(&mut self, dag: &Dag) -> f64 {
        (0..dag.n_nodes()).map(|v| self.get(v, dag.parents(v))).sum()
    }
}

fn with_parent(parents: &[usize], p: usize) -> Vec<usize> {
    let mut out = parents.to_vec();
    if let Err(i) = out.binary_search(&p) {
        out.insert(i, p);
    }
    out
}

fn without_parent(parents: &[usize], p: usize) -> Vec<usize> {
    parents.iter().copied().filter(|&x| x != p).collect()
}

/// True when `a` and `b` are equal up to floating-point noise.
pub fn scores_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Every DAG over `n` labelled nodes. Each unordered pair is absent, forward
/// or backward (`3^(n(n−1)/2)` candidates) and cyclic candidates are dropped.
pub fn enumerate_dags(names: &[String]) -> Vec<Dag> {
    let n = names.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    let mut out = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut dag = Dag::empty(names.to_vec());
        let mut ok = true;
        for &(i, j) in &pairs {
            let choice = c % 3;
            c /= 3;
            let added = match choice {
                0 => true,
                1 => dag.try_add_edge(i, j),
                _ => dag.try_add_edge(j, i),
            };
            if !added {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(dag);
        }
    }
    out
}

/// `Less` when `a` is preferred: higher score, then fewer edges, then the
/// lexicographically smaller edge list.
fn prefer(a: (&Dag, f64), b: (&Dag, f64)) -> Ordering {
    if !scores_tie(a.1, b.1) {
        return b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal);
    }
    a.0.n_edges()
        .cmp(&b.0.n_edges())
        .then_with(|| a.0.edges().cmp(&b.0.edges()))
}

pub fn exhaustive_search(table: &CategoricalTable, config: &SearchConfig) -> Result<ScoredDag> {
    let n = table.n_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(Error::TooManyVariables(n));
    }
    if table.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let limit = config.parent_limit();
    let candidates: Vec<Dag> = enumerate_dags(table.variables())
        .into_iter()
        .filter(|d| (0..n).all(|v| d.parents(v).len() <= limit))
        .collect();
    let mut cache = ScoreCache::new(table, config.score);
    cache.fill(
        candidates
            .iter()
            .flat_map(|d| (0..n).map(|v| (v, d.parents(v).to_vec())))
            .collect(),
    );
    let mut best: Option<(Dag, f64)> = None;
    for dag in candidates {
        let s = cache.dag_score(&dag);
        let better = match &best {
            None => true,
            Some((bd, bs)) => prefer((&dag, s), (bd, *bs)) == Ordering::Less,
        };
        if better {
            best = Some((dag, s));
        }
    }
    let (dag, score) = best.expect("the empty graph is always a candidate");
    Ok(ScoredDag {
        dag,
        score,
        iterations_used: 0,
        trace: vec![score],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MoveKind {
    Add,
    Delete,
    Reverse,
}

#[derive(Debug, Clone, Copy)]
struct Move {
    parent: usize,
    child: usize,
    kind: MoveKind,
}

fn legal_moves(dag: &Dag, limit: usize) -> Vec<Move> {
    let n = dag.n_nodes();
    let mut moves = Vec::new();
    for p in 0..n {
        for c in 0..n {
            if p == c {
                continue;
            }
            if dag.has_edge(p, c) {
                moves.push(Move {
                    parent: p,
                    child: c,
                    kind: MoveKind::Delete,
                });
                // reversing p->c is acyclic iff no other path p ~> c exists
                if dag.parents(p).len() < limit {
                    let mut probe = dag.clone();
                    probe.remove_edge(p, c);
                    if !probe.reaches(p, c) {
                        moves.push(Move {
                            parent: p,
                            child: c,
                            kind: MoveKind::Reverse,
                        });
                    }
                }
            } else if !dag.has_edge(c, p) && dag.parents(c).len() < limit && !dag.reaches(c, p) {
                moves.push(Move {
                    parent: p,
                    child: c,
                    kind: MoveKind::Add,
                });
            }
        }
    }
    moves
}

fn move_families(dag: &Dag, m: Move) -> Vec<(usize, Vec<usize>)> {
    let pc = dag.parents(m.child);
    match m.kind {
        MoveKind::Add => vec![(m.child, with_parent(pc, m.parent))],
        MoveKind::Delete => vec![(m.child, without_parent(pc, m.parent))],
        MoveKind::Reverse => vec![
            (m.child, without_parent(pc, m.parent)),
            (m.parent, with_parent(dag.parents(m.parent), m.child)),
        ],
    }
}

fn move_delta(cache: &mut ScoreCache<'_>, dag: &Dag, m: Move) -> f64 {
    let pc = dag.parents(m.child);
    let old_child = cache.get(m.child, pc);
    match m.kind {
        MoveKind::Add => cache.get(m.child, &with_parent(pc, m.parent)) - old_child,
        MoveKind::Delete => cache.get(m.child, &without_parent(pc, m.parent)) - old_child,
        MoveKind::Reverse => {
            let pp = dag.parents(m.parent);
            cache.get(m.child, &without_parent(pc, m.parent)) - old_child
                + cache.get(m.parent, &with_parent(pp, m.child))
                - cache.get(m.parent, pp)
        }
    }
}

fn apply_move(dag: &mut Dag, m: Move) {
    match m.kind {
        MoveKind::Add => {
            dag.try_add_edge(m.parent, m.child);
        }
        MoveKind::Delete => {
            dag.remove_edge(m.parent, m.child);
        }
        MoveKind::Reverse => {
            dag.remove_edge(m.parent, m.child);
            dag.try_add_edge(m.child, m.parent);
        }
    }
}

/// Random DAG for restarts: edges only go forward in a random node order.
fn random_dag(names: &[String], limit: usize, rng: &mut SeededRng) -> Dag {
    let n = names.len();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut dag = Dag::empty(names.to_vec());
    let p_edge = (1.5 / n as f64).min(0.5);
    for j in 0..n {
        for i in 0..j {
            if rng.uniform() < p_edge && dag.parents(order[j]).len() < limit {
                dag.try_add_edge(order[i], order[j]);
            }
        }
    }
    dag
}

fn climb(cache: &mut ScoreCache<'_>, start: Dag, limit: usize, max_iterations: usize) -> ScoredDag {
    let mut dag = start;
    let mut score = cache.dag_score(&dag);
    let mut trace = vec![score];
    let mut iterations = 0;
    while iterations < max_iterations {
        let moves = legal_moves(&dag, limit);
        cache.fill(moves.iter().flat_map(|&m| move_families(&dag, m)).collect());
        // sequential reduction in (parent, child, kind) order; strict '>' keeps
        // the first, i.e. lowest, pair on ties
        let mut best: Option<(Move, f64)> = None;
        for m in moves {
            let d = move_delta(cache, &dag, m);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((m, d));
            }
        }
        let threshold = 1e-9 * score.abs().max(1.0);
        match best {
            Some((m, d)) if d > threshold => {
                apply_move(&mut dag, m);
                score = cache.dag_score(&dag);
                trace.push(score);
                iterations += 1;
            }
            _ => break,
        }
    }
    ScoredDag {
        dag,
        score,
        iterations_used: iterations,
        trace,
    }
}

/// Greedy hill-climb. The first restart starts from the empty graph, later
/// restarts from seeded random DAGs; the best result over restarts wins.
pub fn hill_climb(table: &CategoricalTable, config: &SearchConfig) -> Result<ScoredDag> {
    if table.n_vars() < 2 {
        return Err(Error::InvalidParameter(
            "hill-climb needs at least two variables".into(),
        ));
    }
    if table.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let limit = config.parent_limit();
    let mut cache = ScoreCache::new(table, config.score);
    let mut best: Option<ScoredDag> = None;
    for restart in 0..config.restarts {
        let start = if restart == 0 {
            Dag::empty(table.variables().to_vec())
        } else {
            let mut rng = SeededRng::new(derive_seed(config.seed, restart as u64));
            random_dag(table.variables(), limit, &mut rng)
        };
        let result = climb(&mut cache, start, limit, config.max_iterations);
        let better = match &best {
            None => true,
            Some(b) => prefer((&result.dag, result.score), (&b.dag, b.score)) == Ordering::Less,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
