//! Complete discrete datasets and the contingency counts scores consume.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::model::{parent_config_count, Network};

/// Rows of 0-based state indices, one column per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    cards: Vec<usize>,
    /// Row-major, `n_rows * n_vars`.
    cells: Vec<u16>,
}

impl Dataset {
    /// Empty dataset with default names `x1..xN`.
    pub fn new(cards: Vec<usize>) -> Result<Self> {
        let names = (1..=cards.len()).map(|i| format!("x{i}")).collect();
        Self::with_names(names, cards)
    }

    pub fn with_names(names: Vec<String>, cards: Vec<usize>) -> Result<Self> {
        if names.len() != cards.len() {
            return Err(domain(format!("{} names for {} variables", names.len(), cards.len())));
        }
        if let Some(&r) = cards.iter().find(|&&r| r < 2 || r > u16::MAX as usize) {
            return Err(domain(format!("cardinality {r} outside [2, {}]", u16::MAX)));
        }
        Ok(Self {
            names,
            cards,
            cells: Vec::new(),
        })
    }

    /// Empty dataset shaped after `network`.
    pub fn for_network(network: &Network) -> Self {
        Self {
            names: network.names(),
            cards: network.cards(),
            cells: Vec::new(),
        }
    }

    pub fn from_rows(cards: Vec<usize>, rows: &[Vec<usize>]) -> Result<Self> {
        let mut data = Self::new(cards)?;
        for row in rows {
            data.push_row(row)?;
        }
        Ok(data)
    }

    pub fn push_row(&mut self, row: &[usize]) -> Result<()> {
        if row.len() != self.cards.len() {
            return Err(domain(format!(
                "row has {} cells, expected {}",
                row.len(),
                self.cards.len()
            )));
        }
        for (i, (&s, &r)) in row.iter().zip(&self.cards).enumerate() {
            if s >= r {
                return Err(domain(format!(
                    "state {s} out of range for variable {} (cardinality {r})",
                    self.names[i]
                )));
            }
        }
        self.cells.extend(row.iter().map(|&s| s as u16));
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.cards.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.cards.is_empty() {
            0
        } else {
            self.cells.len() / self.cards.len()
        }
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[u16] {
        let n = self.n_vars();
        &self.cells[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> + '_ {
        self.cells.chunks_exact(self.n_vars().max(1))
    }

    /// The first `n` rows.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.n_rows());
        Self {
            names: self.names.clone(),
            cards: self.cards.clone(),
            cells: self.cells[..n * self.n_vars()].to_vec(),
        }
    }

    /// Reads the data CSV format: a header of variable names, then rows of
    /// comma-separated state indices. Every cell must parse and be in range.
    pub fn read_csv<R: Read>(reader: R, cards: &[usize]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.len() != cards.len() {
            return Err(Error::Format(format!(
                "header has {} columns, expected {}",
                names.len(),
                cards.len()
            )));
        }
        let mut data = Self::with_names(names, cards.to_vec())?;
        let mut row = vec![0usize; cards.len()];
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != cards.len() {
                return Err(Error::Format(format!(
                    "data row {} has {} cells, expected {}",
                    line + 1,
                    record.len(),
                    cards.len()
                )));
            }
            for (slot, cell) in row.iter_mut().zip(record.iter()) {
                *slot = cell.parse().map_err(|_| {
                    Error::Format(format!("data row {}: invalid state {cell:?}", line + 1))
                })?;
            }
            data.push_row(&row)
                .map_err(|e| Error::Format(format!("data row {}: {e}", line + 1)))?;
        }
        Ok(data)
    }

    pub fn read_csv_file(path: impl AsRef<Path>, cards: &[usize]) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, cards)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::Never)
            .from_writer(writer);
        w.write_record(&self.names)?;
        let mut buf = Vec::with_capacity(self.n_vars());
        for row in self.rows() {
            buf.clear();
            buf.extend(row.iter().map(|s| s.to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("ASCII output")
    }

    /// SHA-256 of the CSV serialization, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

/// Counts `n_ijk` (q × r) and row totals `n_ij` for one family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyStats {
    pub child: usize,
    pub parents: Vec<usize>,
    pub counts: Array2<u64>,
    pub row_totals: Vec<u64>,
}

impl FamilyStats {
    pub fn r(&self) -> usize {
        self.counts.ncols()
    }

    pub fn q(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> u64 {
        self.row_totals.iter().sum()
    }

    /// Builds stats from an explicit count matrix (rows = parent configurations).
    pub fn from_counts(child: usize, parents: Vec<usize>, counts: Array2<u64>) -> Self {
        let row_totals = counts.rows().into_iter().map(|r| r.sum()).collect();
        Self {
            child,
            parents,
            counts,
            row_totals,
        }
    }
}

/// Tallies the family `(child, parents)` over every row.
pub fn count_family(data: &Dataset, child: usize, parents: &[usize]) -> Result<FamilyStats> {
    let n = data.n_vars();
    if child >= n {
        return Err(domain(format!("child index {child} out of range for {n} variables")));
    }
    for w in parents.windows(2) {
        if w[0] >= w[1] {
            return Err(domain("parent list must be sorted and duplicate-free"));
        }
    }
    if let Some(&p) = parents.iter().find(|&&p| p >= n || p == child) {
        return Err(domain(format!("invalid parent index {p} for child {child}")));
    }
    let cards = data.cards();
    let r = cards[child];
    let q = parent_config_count(parents, cards);
    let mut counts = Array2::<u64>::zeros((q, r));
    for row in data.rows() {
        let j = parents
            .iter()
            .fold(0usize, |j, &p| j * cards[p] + row[p] as usize);
        counts[[j, row[child] as usize]] += 1;
    }
    Ok(FamilyStats::from_counts(child, parents.to_vec(), counts))
}

/// Stats for every family of `dag`.
pub fn count_all(data: &Dataset, dag: &crate::model::Dag) -> Result<Vec<FamilyStats>> {
    if dag.n_vars() != data.n_vars() {
        return Err(domain(format!(
            "graph has {} variables, dataset has {}",
            dag.n_vars(),
            data.n_vars()
        )));
    }
    (0..dag.n_vars())
        .map(|i| count_family(data, i, dag.parents(i)))
        .collect()
}
