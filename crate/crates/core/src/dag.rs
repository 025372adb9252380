//! Directed acyclic graphs over variable indices.
//!
//! Node identity is the positional index; names are carried as metadata. The
//! adjacency encoding follows the usual convention: cell `(i, j) = 1` means an
//! edge from node `i` to node `j`.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    /// Sorted ascending.
    parents: Vec<Vec<usize>>,
    /// Sorted ascending.
    children: Vec<Vec<usize>>,
}

/// JSON form: `{"names": [...], "edges": [[parent, child], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagJson {
    pub names: Vec<String>,
    pub edges: Vec<[usize; 2]>,
}

impl Dag {
    /// Graph over `names` with no edges.
    pub fn empty(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            parents: vec![Vec::new(); n],
            children: vec![Vec::new(); n],
        }
    }

    pub fn new(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = Self::empty(names);
        let n = dag.n_nodes();
        for &(p, c) in edges {
            if p >= n || c >= n {
                return Err(Error::UnknownNode(format!("#{}", p.max(c))));
            }
            if p == c {
                return Err(Error::SelfLoop(dag.names[p].clone()));
            }
            dag.insert_edge(p, c);
        }
        if let Some(cycle) = dag.find_cycle() {
            return Err(Error::Cycle(cycle.into_iter().map(|i| dag.names[i].clone()).collect()));
        }
        Ok(dag)
    }

    pub fn from_adjacency(matrix: &[Vec<u8>], names: Vec<String>) -> Result<Self> {
        let n = names.len();
        if matrix.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.len(),
            });
        }
        let mut edges = Vec::new();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                match x {
                    0 => {}
                    1 if i == j => return Err(Error::SelfLoop(names[i].clone())),
                    1 => edges.push((i, j)),
                    other => {
                        return Err(Error::Format {
                            row: i,
                            msg: format!("adjacency entry must be 0 or 1, found {other}"),
                        })
                    }
                }
            }
        }
        Self::new(names, &edges)
    }

    pub fn to_adjacency(&self) -> Vec<Vec<u8>> {
        let n = self.n_nodes();
        let mut m = vec![vec![0u8; n]; n];
        for (p, c) in self.edges() {
            m[p][c] = 1;
        }
        m
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, p: usize, c: usize) -> bool {
        self.parents[c].binary_search(&p).is_ok()
    }

    /// Edges sorted by (parent, child).
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (p, ch) in self.children.iter().enumerate() {
            out.extend(ch.iter().map(|&c| (p, c)));
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All nodes with a directed path into any of `targets`, excluding the
    /// targets themselves.
    pub fn ancestors(&self, targets: &[usize]) -> Result<BTreeSet<usize>> {
        self.reach(targets, |v| &self.parents[v])
    }

    /// All nodes reachable from any of `targets`, excluding the targets.
    pub fn descendants(&self, targets: &[usize]) -> Result<BTreeSet<usize>> {
        self.reach(targets, |v| &self.children[v])
    }

    pub fn ancestors_by_name(&self, targets: &[&str]) -> Result<BTreeSet<usize>> {
        let idx = targets.iter().map(|t| self.index_of(t)).collect::<Result<Vec<_>>>()?;
        self.ancestors(&idx)
    }

    pub fn descendants_by_name(&self, targets: &[&str]) -> Result<BTreeSet<usize>> {
        let idx = targets.iter().map(|t| self.index_of(t)).collect::<Result<Vec<_>>>()?;
        self.descendants(&idx)
    }

    /// Nodes that are neither `v`, its parents, nor its descendants.
    pub fn non_descendants(&self, v: usize) -> Result<BTreeSet<usize>> {
        let desc = self.descendants(&[v])?;
        Ok((0..self.n_nodes())
            .filter(|u| *u != v && !desc.contains(u) && !self.has_edge(*u, v))
            .collect())
    }

    fn reach<'a, F>(&'a self, targets: &[usize], next: F) -> Result<BTreeSet<usize>>
    where
        F: Fn(usize) -> &'a [usize],
    {
        for &t in targets {
            if t >= self.n_nodes() {
                return Err(Error::UnknownNode(format!("#{t}")));
            }
        }
        let mut seen = vec![false; self.n_nodes()];
        let mut queue: VecDeque<usize> = targets.iter().copied().collect();
        for &t in targets {
            seen[t] = true;
        }
        let mut out = BTreeSet::new();
        while let Some(v) = queue.pop_front() {
            for &u in next(v) {
                if !seen[u] {
                    seen[u] = true;
                    out.insert(u);
                    queue.push_back(u);
                }
            }
        }
        for t in targets {
            out.remove(t);
        }
        Ok(out)
    }

    /// Kahn's algorithm, always emitting the smallest ready index next.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..self.n_nodes()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.n_nodes());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    /// True when a directed path `from ⇝ to` exists (length ≥ 0).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let mut seen = vec![false; self.n_nodes()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if c == to {
                    return true;
                }
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        false
    }

    /// Adds `p -> c` if it keeps the graph acyclic. Returns whether the edge
    /// was added.
    pub fn try_add_edge(&mut self, p: usize, c: usize) -> bool {
        if p == c || self.has_edge(p, c) || self.reaches(c, p) {
            return false;
        }
        self.insert_edge(p, c);
        true
    }

    pub fn remove_edge(&mut self, p: usize, c: usize) -> bool {
        match self.parents[c].binary_search(&p) {
            Ok(i) => {
                self.parents[c].remove(i);
                let j = self.children[p].binary_search(&c).expect("adjacency lists in sync");
                self.children[p].remove(j);
                true
            }
            Err(_) => false,
        }
    }

    fn insert_edge(&mut self, p: usize, c: usize) {
        if let Err(i) = self.parents[c].binary_search(&p) {
            self.parents[c].insert(i, p);
        }
        if let Err(i) = self.children[p].binary_search(&c) {
            self.children[p].insert(i, c);
        }
    }

    /// One directed cycle as a node sequence, if any exists.
    fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let n = self.n_nodes();
        let mut mark = vec![Mark::New; n];
        let mut parent_of = vec![usize::MAX; n];
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            // iterative DFS with explicit child cursor
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Active;
            while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
                if let Some(&c) = self.children[v].get(*cursor) {
                    *cursor += 1;
                    match mark[c] {
                        Mark::New => {
                            mark[c] = Mark::Active;
                            parent_of[c] = v;
                            stack.push((c, 0));
                        }
                        Mark::Active => {
                            let mut cycle = vec![v];
                            let mut u = v;
                            while u != c {
                                u = parent_of[u];
                                cycle.push(u);
                            }
                            cycle.reverse();
                            cycle.push(c);
                            return Some(cycle);
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[v] = Mark::Done;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn to_json(&self) -> DagJson {
        DagJson {
            names: self.names.clone(),
            edges: self.edges().into_iter().map(|(p, c)| [p, c]).collect(),
        }
    }

    pub fn from_json(json: &DagJson) -> Result<Self> {
        let edges: Vec<(usize, usize)> = json.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(json.names.clone(), &edges)
    }

    /// Adjacency CSV: header row and first column carry node names, cells 0/1.
    pub fn to_adjacency_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (i, row) in self.to_adjacency().iter().enumerate() {
            let mut rec = vec![self.names[i].clone()];
            rec.extend(row.iter().map(u8::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 input")
    }

    pub fn from_adjacency_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = rdr.records();
        let header = records.next().ok_or(Error::EmptyInput)??;
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut matrix = Vec::with_capacity(names.len());
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if rec.get(0) != names.get(i).map(String::as_str) {
                return Err(Error::Format {
                    row: i + 2,
                    msg: format!("row label `{}` does not match column order", rec.get(0).unwrap_or("")),
                });
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.parse::<u8>().map_err(|_| Error::Format {
                        row: i + 2,
                        msg: format!("invalid adjacency cell `{c}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            matrix.push(row);
        }
        Self::from_adjacency(&matrix, names)
    }

    /// Loads either the JSON or the adjacency-CSV form, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "csv") {
            Self::from_adjacency_csv(&text)
        } else {
            let json: DagJson = serde_json::from_str(&text)?;
            Self::from_json(&json)
        }
    }
}
