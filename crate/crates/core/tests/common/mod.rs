#![allow(dead_code)]

use std::collections::BTreeSet;

use cpdforge::cpd::{BayesNet, Cpd};
use cpdforge::dag::Dag;
use cpdforge::data::{CategoricalTable, FeatureMatrix};
use cpdforge::rng::SeededRng;

pub fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
}

/// Random DAG: each forward pair of a random node order gets an edge with
/// probability `p_edge`.
pub fn random_dag(rng: &mut SeededRng, n: usize, p_edge: f64) -> Dag {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < p_edge {
                edges.push((order[i], order[j]));
            }
        }
    }
    Dag::new(names(n), &edges).unwrap()
}

pub fn random_row(rng: &mut SeededRng, card: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..card).map(|_| 0.05 + rng.uniform()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random network over `dag` with cardinalities drawn from `2..=max_card`.
pub fn random_net(rng: &mut SeededRng, dag: Dag, max_card: usize) -> BayesNet {
    let n = dag.n_nodes();
    let cards: Vec<usize> = (0..n).map(|_| 2 + rng.below(max_card - 1)).collect();
    let states = cards
        .iter()
        .map(|&c| (0..c).map(|s| format!("s{s}")).collect())
        .collect();
    let cpds = (0..n)
        .map(|v| {
            let parents = dag.parents(v).to_vec();
            let pc: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
            let q: usize = pc.iter().product();
            let table = (0..q).map(|_| random_row(rng, cards[v])).collect();
            Cpd::new(v, parents, pc, cards[v], table).unwrap()
        })
        .collect();
    BayesNet::new(dag, states, cpds).unwrap()
}

/// Random categorical table with the given cardinalities.
pub fn random_table(rng: &mut SeededRng, cards: &[usize], n_rows: usize) -> CategoricalTable {
    let rows = (0..n_rows)
        .map(|_| cards.iter().map(|&c| rng.below(c)).collect())
        .collect();
    let states = cards
        .iter()
        .map(|&c| (0..c).map(|s| format!("s{s}")).collect())
        .collect();
    CategoricalTable::new(names(cards.len()), states, rows).unwrap()
}

pub fn skeleton(dag: &Dag) -> BTreeSet<(usize, usize)> {
    dag.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Straight all-pairs Dunn index.
pub fn brute_dunn(data: &FeatureMatrix, labels: &[usize]) -> f64 {
    let n = data.n_rows();
    let mut min_inter = f64::INFINITY;
    let mut max_diam = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = euclid(data.row(i), data.row(j));
            if labels[i] == labels[j] {
                max_diam = max_diam.max(d);
            } else {
                min_inter = min_inter.min(d);
            }
        }
    }
    if max_diam == 0.0 {
        f64::INFINITY
    } else {
        min_inter / max_diam
    }
}

/// Best agreement between two labelings over all one-to-one relabelings
/// (greedy on the contingency table, exact for near-perfect agreement).
pub fn matched_agreement(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let mut cells: Vec<(usize, usize, usize)> = (0..ka)
        .flat_map(|i| (0..kb).map(move |j| (i, j)))
        .map(|(i, j)| (table[i][j], i, j))
        .collect();
    cells.sort_unstable_by(|p, q| q.cmp(p));
    let (mut used_a, mut used_b) = (vec![false; ka], vec![false; kb]);
    let mut matched = 0;
    for (c, i, j) in cells {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            matched += c;
        }
    }
    matched as f64 / a.len() as f64
}
