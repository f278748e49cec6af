//! Link-based partition scoring in the MUC style: recall counts coreference
//! links missing from the response, precision counts wrong links, both via
//! partition-intersection counting.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::ReId;
use crate::error::{Error, Result};

/// A partition of RE ids into disjoint, non-empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    cells: Vec<BTreeSet<ReId>>,
}

impl Partition {
    /// Validates disjointness and non-emptiness.
    pub fn new(cells: Vec<BTreeSet<ReId>>) -> Result<Self> {
        let mut seen: BTreeSet<&ReId> = BTreeSet::new();
        for cell in &cells {
            if cell.is_empty() {
                return Err(Error::Validation("empty partition cell".to_string()));
            }
            for id in cell {
                if !seen.insert(id) {
                    return Err(Error::Validation(format!(
                        "RE {id} appears in two partition cells"
                    )));
                }
            }
        }
        Ok(Partition { cells })
    }

    pub fn cells(&self) -> &[BTreeSet<ReId>] {
        &self.cells
    }

    pub fn universe(&self) -> BTreeSet<ReId> {
        self.cells.iter().flatten().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Link counts and derived scores for one key/response comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Minimum spanning links implied by the key cells.
    pub key_links: usize,
    /// Minimum spanning links implied by the response cells.
    pub response_links: usize,
    pub missing_links: usize,
    pub wrong_links: usize,
}

/// Scores a response partition against a key partition.
///
/// REs present in one partition but absent from the other are treated as
/// singletons on the missing side first; singleton cells carry no links, so
/// this keeps both directions total without changing either score. An empty
/// link denominator yields a score of 1.0.
pub fn muc_score(key: &Partition, response: &Partition) -> ScoreReport {
    let universe: BTreeSet<ReId> = key.universe().union(&response.universe()).cloned().collect();
    let key_cells = complete(key, &universe);
    let response_cells = complete(response, &universe);

    let (key_links, missing_links) = links_and_splits(&key_cells, &response_cells);
    let (response_links, wrong_links) = links_and_splits(&response_cells, &key_cells);

    let recall = ratio(key_links - missing_links, key_links);
    let precision = ratio(response_links - wrong_links, response_links);
    let f1 = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    };
    ScoreReport {
        recall,
        precision,
        f1,
        key_links,
        response_links,
        missing_links,
        wrong_links,
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn complete(partition: &Partition, universe: &BTreeSet<ReId>) -> Vec<BTreeSet<ReId>> {
    let mut cells = partition.cells.clone();
    let covered: BTreeSet<&ReId> = partition.cells.iter().flatten().collect();
    for id in universe {
        if !covered.contains(id) {
            cells.push(BTreeSet::from([id.clone()]));
        }
    }
    cells
}

/// For each gold cell S: spanning links |S|-1, and the links missing when S
/// is split into |p(S)| pieces by intersection with the other partition.
fn links_and_splits(gold: &[BTreeSet<ReId>], other: &[BTreeSet<ReId>]) -> (usize, usize) {
    let mut cell_of: BTreeMap<&ReId, usize> = BTreeMap::new();
    for (i, cell) in other.iter().enumerate() {
        for id in cell {
            cell_of.insert(id, i);
        }
    }
    let mut links = 0;
    let mut splits = 0;
    for cell in gold {
        let pieces: BTreeSet<usize> = cell
            .iter()
            .map(|id| *cell_of.get(id).expect("completed partitions share a universe"))
            .collect();
        links += cell.len() - 1;
        splits += pieces.len() - 1;
    }
    (links, splits)
}

/// Renders labeled score reports as CSV with a fixed column order.
pub fn report_csv(reports: &[(String, ScoreReport)]) -> Result<String> {
    let mut seen = BTreeSet::new();
    let mut out = String::from("label,recall,precision,f1\n");
    for (label, report) in reports {
        if !seen.insert(label) {
            return Err(Error::Validation(format!("duplicate report label {label}")));
        }
        out.push_str(&format!(
            "{label},{:.2},{:.2},{:.2}\n",
            report.recall, report.precision, report.f1
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// KEY-line partition IO (same syntax as the corpus key records)
// ---------------------------------------------------------------------------

/// Parses `KEY <label>: id,id,...` lines into labeled cells.
pub fn parse_partition(input: &str) -> Result<Vec<(String, Vec<ReId>)>> {
    let mut cells = Vec::new();
    let mut labels = BTreeSet::new();
    for (lineno, raw) in input.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line
            .strip_prefix("KEY ")
            .ok_or_else(|| Error::parse(lineno, "expected `KEY <label>: <id>,...`"))?;
        let (label, ids) = rest
            .split_once(':')
            .ok_or_else(|| Error::parse(lineno, "expected `KEY <label>: <id>,...`"))?;
        let label = label.trim().to_string();
        if label.is_empty() {
            return Err(Error::parse(lineno, "empty partition label"));
        }
        if !labels.insert(label.clone()) {
            return Err(Error::Validation(format!(
                "duplicate partition label {label} (line {lineno})"
            )));
        }
        let ids: Vec<ReId> = ids
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(ReId::from)
            .collect();
        if ids.is_empty() {
            return Err(Error::parse(lineno, format!("cell {label} lists no REs")));
        }
        cells.push((label, ids));
    }
    Ok(cells)
}

/// Renders labeled cells as KEY lines.
pub fn write_partition(cells: &[(String, Vec<ReId>)]) -> String {
    let mut out = String::new();
    for (label, ids) in cells {
        let list: Vec<String> = ids.iter().map(ToString::to_string).collect();
        out.push_str(&format!("KEY {label}: {}\n", list.join(",")));
    }
    out
}

/// Drops the labels and validates the cell sets.
pub fn to_partition(cells: &[(String, Vec<ReId>)]) -> Result<Partition> {
    Partition::new(
        cells
            .iter()
            .map(|(_, ids)| ids.iter().cloned().collect())
            .collect(),
    )
}
