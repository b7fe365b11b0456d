//! Vote records in the `legislator_id,item_id,cast_code` layout, the
//! unanimity / attendance filter, and the optional legislator roster.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::error::IoError;
use crate::model::{Item, Legislator, Vote, VoteMatrix};

/// Maps cast codes 0–9 to votes. Default: 1–3 yea, 4–6 nay, 0 and 7–9
/// missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CastCodeMap {
    codes: [Vote; 10],
}

impl Default for CastCodeMap {
    fn default() -> Self {
        let mut codes = [Vote::Missing; 10];
        codes[1..=3].fill(Vote::Yea);
        codes[4..=6].fill(Vote::Nay);
        Self { codes }
    }
}

impl CastCodeMap {
    /// Codes in `yea` map to Yea, codes in `nay` to Nay, all others to
    /// Missing.
    pub fn from_lists(yea: &[u8], nay: &[u8]) -> Result<Self, IoError> {
        let mut codes = [Vote::Missing; 10];
        for (list, vote) in [(yea, Vote::Yea), (nay, Vote::Nay)] {
            for &c in list {
                let slot = codes
                    .get_mut(c as usize)
                    .ok_or_else(|| IoError::Config(format!("cast code {c} outside 0-9")))?;
                if *slot != Vote::Missing {
                    return Err(IoError::Config(format!("cast code {c} mapped twice")));
                }
                *slot = vote;
            }
        }
        Ok(Self { codes })
    }

    pub fn vote(&self, code: u8) -> Option<Vote> {
        self.codes.get(code as usize).copied()
    }
}

/// Counts removed at each filter stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterReport {
    pub initial_legislators: usize,
    pub initial_items: usize,
    pub unanimous_items: usize,
    pub sparse_legislators: usize,
    /// Items that became unanimous once sparse legislators were removed.
    pub recheck_items: usize,
    /// Extra rounds needed after the re-check before nothing changed.
    pub extra_rounds: usize,
    pub legislators: usize,
    pub items: usize,
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} input; dropped {} unanimous items, {} legislators missing >40%, {} items on re-check",
            self.initial_legislators,
            self.initial_items,
            self.unanimous_items,
            self.sparse_legislators,
            self.recheck_items
        )?;
        if self.extra_rounds > 0 {
            write!(f, " ({} further rounds)", self.extra_rounds)?;
        }
        write!(f, "; {}x{} kept", self.legislators, self.items)
    }
}

fn unanimous_items(m: &VoteMatrix, rows: &[usize], cols: &[usize]) -> Vec<bool> {
    cols.iter()
        .map(|&j| {
            let mut seen_yea = false;
            let mut seen_nay = false;
            for &i in rows {
                match m.get(i, j) {
                    Vote::Yea => seen_yea = true,
                    Vote::Nay => seen_nay = true,
                    Vote::Missing => {}
                }
            }
            !(seen_yea && seen_nay)
        })
        .collect()
}

fn sparse_legislators(m: &VoteMatrix, rows: &[usize], cols: &[usize]) -> Vec<bool> {
    rows.iter()
        .map(|&i| {
            let missing = cols.iter().filter(|&&j| m.get(i, j) == Vote::Missing).count();
            // missing / J > 0.4
            5 * missing > 2 * cols.len()
        })
        .collect()
}

fn keep(indices: &[usize], drop: &[bool]) -> Vec<usize> {
    indices
        .iter()
        .zip(drop)
        .filter(|(_, d)| !**d)
        .map(|(i, _)| *i)
        .collect()
}

/// Drop unanimous items (all observed votes equal, or none observed), then
/// legislators missing more than 40% of the remaining items, then
/// unanimous items again. If that re-check still leaves a violation the
/// two steps repeat until neither changes anything, so the result always
/// satisfies both rules and filtering it again is a no-op.
pub fn filter_votes(m: &VoteMatrix) -> Result<(VoteMatrix, FilterReport), IoError> {
    let mut report = FilterReport {
        initial_legislators: m.n_legislators(),
        initial_items: m.n_items(),
        ..Default::default()
    };
    let mut rows: Vec<usize> = (0..m.n_legislators()).collect();
    let mut cols: Vec<usize> = (0..m.n_items()).collect();

    let drop = unanimous_items(m, &rows, &cols);
    report.unanimous_items = drop.iter().filter(|d| **d).count();
    cols = keep(&cols, &drop);

    let drop = sparse_legislators(m, &rows, &cols);
    report.sparse_legislators = drop.iter().filter(|d| **d).count();
    rows = keep(&rows, &drop);

    let drop = unanimous_items(m, &rows, &cols);
    report.recheck_items = drop.iter().filter(|d| **d).count();
    cols = keep(&cols, &drop);

    loop {
        let drop_rows = sparse_legislators(m, &rows, &cols);
        let drop_cols = unanimous_items(m, &rows, &cols);
        let n_rows = drop_rows.iter().filter(|d| **d).count();
        let n_cols = drop_cols.iter().filter(|d| **d).count();
        if n_rows == 0 && n_cols == 0 {
            break;
        }
        report.extra_rounds += 1;
        report.sparse_legislators += n_rows;
        rows = keep(&rows, &drop_rows);
        let drop_cols = unanimous_items(m, &rows, &cols);
        report.recheck_items += drop_cols.iter().filter(|d| **d).count();
        cols = keep(&cols, &drop_cols);
    }
    report.legislators = rows.len();
    report.items = cols.len();
    if rows.is_empty() || cols.is_empty() {
        return Err(IoError::EmptyAfterFilter {
            report: report.to_string(),
        });
    }
    Ok((m.select(&rows, &cols), report))
}

/// Parse vote records into an unfiltered matrix. Legislators and items are
/// ordered by first appearance; pairs without a record are Missing.
pub fn read_vote_records(path: &Path, codes: &CastCodeMap) -> Result<VoteMatrix, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_vote_records(&text, path, codes)
}

pub(crate) fn parse_vote_records(text: &str, path: &Path, codes: &CastCodeMap) -> Result<VoteMatrix, IoError> {
    let malformed = |line: usize, message: String| IoError::Malformed {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    check_header(path, &headers, &["legislator_id", "item_id", "cast_code"])?;

    let mut leg_index: HashMap<String, usize> = HashMap::new();
    let mut item_index: HashMap<String, usize> = HashMap::new();
    let mut legislators = Vec::new();
    let mut items = Vec::new();
    let mut records: Vec<(usize, usize, Vote, usize)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(malformed(line, format!("expected 3 fields, found {}", record.len())));
        }
        let (leg, item, code) = (&record[0], &record[1], &record[2]);
        if leg.is_empty() || item.is_empty() {
            return Err(malformed(line, "empty legislator or item id".into()));
        }
        let vote = code
            .parse::<u8>()
            .ok()
            .and_then(|c| codes.vote(c))
            .ok_or_else(|| malformed(line, format!("cast code {code:?} is not an integer 0-9")))?;
        let i = *leg_index.entry(leg.to_string()).or_insert_with(|| {
            legislators.push(Legislator::new(leg));
            legislators.len() - 1
        });
        let j = *item_index.entry(item.to_string()).or_insert_with(|| {
            items.push(Item::new(item));
            items.len() - 1
        });
        records.push((i, j, vote, line));
    }
    let n_items = items.len();
    let mut cells = vec![Vote::Missing; legislators.len() * n_items];
    let mut seen = vec![false; cells.len()];
    for (i, j, vote, line) in records {
        let k = i * n_items + j;
        if seen[k] {
            return Err(IoError::Duplicate {
                path: path.to_path_buf(),
                line,
                legislator: legislators[i].id.clone(),
                item: items[j].id.clone(),
            });
        }
        seen[k] = true;
        cells[k] = vote;
    }
    Ok(VoteMatrix::new(legislators, items, cells).expect("cell count matches"))
}

pub(crate) fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<(), IoError> {
    for (position, want) in expected.iter().enumerate() {
        let got = found.get(position).unwrap_or("");
        if got != *want {
            return Err(IoError::Schema {
                path: path.to_path_buf(),
                position,
                expected: want.to_string(),
                found: got.to_string(),
            });
        }
    }
    if found.len() > expected.len() {
        return Err(IoError::Schema {
            path: path.to_path_buf(),
            position: expected.len(),
            expected: String::new(),
            found: found[expected.len()].to_string(),
        });
    }
    Ok(())
}

/// Read, filter and, if `roster` is given, attach names and party labels.
pub fn load_votes(
    path: &Path,
    codes: &CastCodeMap,
    roster: Option<&Path>,
) -> Result<(VoteMatrix, FilterReport), IoError> {
    let mut raw = read_vote_records(path, codes)?;
    if let Some(roster) = roster {
        attach_roster(&mut raw, &read_roster(roster)?);
    }
    filter_votes(&raw)
}

/// `legislator_id,name,party` rows keyed by id.
pub type RosterMap = HashMap<String, (Option<String>, Option<String>)>;

pub fn read_roster(path: &Path) -> Result<RosterMap, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    check_header(path, &headers, &["legislator_id", "name", "party"])?;
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Malformed {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        out.insert(record[0].to_string(), (opt(&record[1]), opt(&record[2])));
    }
    Ok(out)
}

pub fn attach_roster(m: &mut VoteMatrix, roster: &RosterMap) {
    for leg in m.legislators_mut() {
        if let Some((name, party)) = roster.get(&leg.id) {
            leg.name = name.clone();
            leg.party = party.clone();
        }
    }
}

/// Write every cell, Missing included, with codes 1 (yea), 6 (nay) and 9
/// (missing).
pub fn write_votes(path: &Path, m: &VoteMatrix) -> Result<(), IoError> {
    let mut out = String::from("legislator_id,item_id,cast_code\n");
    for (i, leg) in m.legislators().iter().enumerate() {
        for (j, item) in m.items().iter().enumerate() {
            let code = match m.get(i, j) {
                Vote::Yea => 1,
                Vote::Nay => 6,
                Vote::Missing => 9,
            };
            out.push_str(&format!("{},{},{}\n", csv_field(&leg.id), csv_field(&item.id), code));
        }
    }
    std::fs::write(path, out).map_err(|e| IoError::file(path, e))
}

pub fn write_roster(path: &Path, m: &VoteMatrix) -> Result<(), IoError> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| IoError::file(path, e))?);
    let mut body = String::from("legislator_id,name,party\n");
    for leg in m.legislators() {
        body.push_str(&format!(
            "{},{},{}\n",
            csv_field(&leg.id),
            csv_field(leg.name.as_deref().unwrap_or("")),
            csv_field(leg.party.as_deref().unwrap_or(""))
        ));
    }
    file.write_all(body.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|e| IoError::file(path, e))
}

/// Quote a field if it contains a separator, quote or line break.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
