//! Per-class distribution over demographic categories, and the most-likely
//! category query.

use serde::{Deserialize, Serialize};

use crate::cpd::format_2dp;
use crate::data::CategoricalTable;
use crate::{Error, Result};

/// Tolerance on the row sums of a fitted table.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicTable {
    categories: Vec<String>,
    /// `probs[class][category]`.
    probs: Vec<Vec<f64>>,
    /// Classes with no rows; their distribution is uniform.
    empty: Vec<bool>,
}

impl DemographicTable {
    pub fn new(categories: Vec<String>, probs: Vec<Vec<f64>>, tolerance: f64) -> Result<Self> {
        if categories.is_empty() || probs.is_empty() {
            return Err(Error::EmptyInput);
        }
        for (c, row) in probs.iter().enumerate() {
            if row.len() != categories.len() {
                return Err(Error::DimensionMismatch {
                    expected: categories.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Numeric(format!("class {c} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tolerance {
                return Err(Error::Numeric(format!("class {c} sums to {s}")));
            }
        }
        let empty = vec![false; probs.len()];
        Ok(Self {
            categories,
            probs,
            empty,
        })
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category(&self, i: usize) -> &str {
        &self.categories[i]
    }

    pub fn row(&self, class: usize) -> Result<&[f64]> {
        self.probs
            .get(class)
            .map(Vec::as_slice)
            .ok_or_else(|| out_of_range(class, self.k()))
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn empty_flags(&self) -> &[bool] {
        &self.empty
    }

    /// Categories as rows, classes `C0..` as columns, two decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![String::new()];
        header.extend((0..self.k()).map(|c| format!("C{c}")));
        w.write_record(&header).expect("in-memory write");
        for (g, cat) in self.categories.iter().enumerate() {
            let mut rec = vec![cat.clone()];
            rec.extend(self.probs.iter().map(|row| format_2dp(row[g])));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
    }

    /// Parses the layout of [`DemographicTable::to_csv`]. Printed tables are
    /// rounded, so column sums are checked against `tolerance`.
    pub fn from_csv(text: &str, tolerance: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let k = rdr.headers()?.len().saturating_sub(1);
        let mut categories = Vec::new();
        let mut probs = vec![Vec::new(); k];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            categories.push(rec.get(0).unwrap_or("").to_string());
            for (c, cell) in rec.iter().skip(1).enumerate() {
                let p = cell.trim().parse::<f64>().map_err(|_| Error::Format {
                    row: i + 2,
                    msg: format!("bad probability `{cell}`"),
                })?;
                probs[c].push(p);
            }
        }
        Self::new(categories, probs, tolerance)
    }
}

fn out_of_range(class: usize, k: usize) -> Error {
    Error::InvalidParameter(format!("class {class} out of range for {k} classes"))
}

/// Category labels and per-row category index for the joint states of
/// `targets`, the first target varying slowest. Labels join the state names
/// with a space, e.g. `Female 20 - 29 Years` for targets `[gender, age]`.
pub fn demographic_categories(table: &CategoricalTable, targets: &[usize]) -> Result<(Vec<String>, Vec<usize>)> {
    if targets.is_empty() {
        return Err(Error::InvalidParameter("no demographic targets".into()));
    }
    for &t in targets {
        if t >= table.n_vars() {
            return Err(Error::UnknownNode(format!("#{t}")));
        }
    }
    let mut labels = vec![String::new()];
    for &t in targets {
        labels = labels
            .iter()
            .flat_map(|prefix| {
                table.states()[t].iter().map(move |s| {
                    if prefix.is_empty() {
                        s.clone()
                    } else {
                        format!("{prefix} {s}")
                    }
                })
            })
            .collect();
    }
    let index = table
        .rows()
        .iter()
        .map(|r| targets.iter().fold(0, |acc, &t| acc * table.cardinality(t) + r[t]))
        .collect();
    Ok((labels, index))
}

/// Maximum-likelihood category frequencies per class. A class with no rows
/// gets a uniform row and is flagged.
pub fn fit_demographic_table(
    labels: &[usize],
    demographics: &[usize],
    categories: Vec<String>,
    k: usize,
) -> Result<DemographicTable> {
    if labels.len() != demographics.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: demographics.len(),
        });
    }
    if k == 0 || categories.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one class and one category".into(),
        ));
    }
    let g = categories.len();
    let mut counts = vec![vec![0u64; g]; k];
    for (&c, &d) in labels.iter().zip(demographics) {
        if c >= k {
            return Err(out_of_range(c, k));
        }
        if d >= g {
            return Err(Error::InvalidParameter(format!(
                "category {d} out of range for {g} categories"
            )));
        }
        counts[c][d] += 1;
    }
    let mut empty = vec![false; k];
    let probs = counts
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: u64 = row.iter().sum();
            if n == 0 {
                empty[c] = true;
                vec![1.0 / g as f64; g]
            } else {
                row.iter().map(|&x| x as f64 / n as f64).collect()
            }
        })
        .collect();
    Ok(DemographicTable {
        categories,
        probs,
        empty,
    })
}

/// Most probable category of a class; ties go to the lowest index.
pub fn argmax_demographic(table: &DemographicTable, class: usize) -> Result<(usize, f64)> {
    let row = table.row(class)?;
    let mut best = (0, row[0]);
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > best.1 {
            best = (i, p);
        }
    }
    Ok(best)
}

/// Categories with probability exactly zero in a class.
pub fn zero_support_categories(table: &DemographicTable, class: usize) -> Result<Vec<usize>> {
    Ok(table
        .row(class)?
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == 0.0)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cats(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("g{i}")).collect()
    }

    #[test]
    fn even_split() {
        let t = fit_demographic_table(&[0, 0, 0, 0], &[0, 1, 0, 1], cats(2), 1).unwrap();
        assert_eq!(t.row(0).unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn single_category_class() {
        let t = fit_demographic_table(&[0, 0, 1], &[2, 2, 0], cats(18), 2).unwrap();
        assert_eq!(t.row(0).unwrap()[2], 1.0);
        assert_eq!(argmax_demographic(&t, 0).unwrap(), (2, 1.0));
        assert_eq!(zero_support_categories(&t, 0).unwrap().len(), 17);
    }

    #[test]
    fn empty_class_is_uniform_and_flagged() {
        let t = fit_demographic_table(&[0], &[1], cats(4), 2).unwrap();
        assert_eq!(t.row(1).unwrap(), &[0.25; 4]);
        assert_eq!(t.empty_flags(), &[false, true]);
        assert_eq!(argmax_demographic(&t, 1).unwrap(), (0, 0.25));
        assert!(zero_support_categories(&t, 1).unwrap().is_empty());
    }

    #[test]
    fn errors() {
        assert!(fit_demographic_table(&[0, 1], &[0], cats(2), 2).is_err());
        assert!(fit_demographic_table(&[3], &[0], cats(2), 2).is_err());
        let t = fit_demographic_table(&[0], &[0], cats(2), 1).unwrap();
        assert!(argmax_demographic(&t, 1).is_err());
    }

    #[test]
    fn categories_gender_major() {
        let table = CategoricalTable::new(
            vec!["age".into(), "sex".into()],
            vec![
                vec!["0 - 9".into(), "10 - 19".into(), "20 - 29".into()],
                vec!["Female".into(), "Male".into()],
            ],
            vec![vec![2, 0], vec![0, 1]],
        )
        .unwrap();
        let (labels, idx) = demographic_categories(&table, &[1, 0]).unwrap();
        assert_eq!(labels[0], "Female 0 - 9");
        assert_eq!(labels[5], "Male 20 - 29");
        assert_eq!(idx, vec![2, 3]);
    }

    #[test]
    fn csv_round_trip() {
        let t = fit_demographic_table(&[0, 0, 1, 1, 1], &[0, 1, 1, 1, 2], cats(3), 2).unwrap();
        let text = t.to_csv();
        assert!(text.starts_with(",C0,C1\ng0,0.5,0.0\n"));
        let back = DemographicTable::from_csv(&text, 0.02).unwrap();
        assert_eq!(back.categories(), t.categories());
        assert_eq!(back.row(0).unwrap(), &[0.5, 0.5, 0.0]);
    }
}
