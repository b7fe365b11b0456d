//! Draws directory: one CSV per parameter block, a roster of legislators
//! and items, the effective configuration, and a manifest recording how far
//! the run got.
//!
//! ```text
//! beta.csv        iter,beta_1..beta_I
//! alpha.csv       iter,j,alpha1,alpha2          (J rows per draw)
//! delta.csv       iter,j,delta1,delta2          (J rows per draw)
//! z.csv           iter,z_1..z_J
//! loglik.csv      iter,total,per_legislator_1..per_legislator_I
//! legislators.csv index,legislator_id,name,party
//! items.csv       index,item_id
//! config.toml     effective configuration
//! manifest.toml   status, n_draws, block_size, n_legislators, n_items
//! ```
//!
//! Rows are appended in blocks of [`BLOCK_SIZE`] draws and the manifest is
//! rewritten after each block, so a killed run leaves a readable prefix.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{IoError, SamplerError};
use crate::model::{ItemParams, Orthant, VoteMatrix};
use crate::sampler::{Draw, DrawSink, DrawStore, RunOutcome};

use super::votes::{check_header, csv_field};

pub const BLOCK_SIZE: u64 = 100;

pub const MANIFEST: &str = "manifest.toml";
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub status: RunStatus,
    pub n_draws: u64,
    pub block_size: u64,
    pub n_legislators: usize,
    pub n_items: usize,
}

/// Legislator and item identifiers as stored alongside the draws.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Roster {
    pub legislators: Vec<String>,
    pub items: Vec<String>,
}

impl Roster {
    pub fn of(votes: &VoteMatrix) -> Self {
        Self {
            legislators: votes.legislators().iter().map(|l| l.id.clone()).collect(),
            items: votes.items().iter().map(|i| i.id.clone()).collect(),
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Streams retained draws to a directory.
pub struct DrawWriter {
    dir: PathBuf,
    n_legislators: usize,
    n_items: usize,
    buffers: [String; 5],
    pending: u64,
    written: u64,
}

const FILES: [&str; 5] = ["beta.csv", "alpha.csv", "delta.csv", "z.csv", "loglik.csv"];

fn headers(n_leg: usize, n_items: usize) -> [String; 5] {
    let numbered = |prefix: &str, n: usize| (1..=n).map(|k| format!(",{prefix}_{k}")).collect::<String>();
    [
        format!("iter{}\n", numbered("beta", n_leg)),
        "iter,j,alpha1,alpha2\n".to_string(),
        "iter,j,delta1,delta2\n".to_string(),
        format!("iter{}\n", numbered("z", n_items)),
        format!("iter,total{}\n", numbered("per_legislator", n_leg)),
    ]
}

fn write_file(path: &Path, body: &str) -> Result<(), IoError> {
    std::fs::write(path, body).map_err(|e| IoError::file(path, e))
}

impl DrawWriter {
    /// Create (or overwrite) the directory's files and write headers, the
    /// roster, the configuration echo and a `running` manifest.
    pub fn create(dir: &Path, votes: &VoteMatrix, config_echo: &str) -> Result<Self, IoError> {
        std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;
        let (n_leg, n_items) = (votes.n_legislators(), votes.n_items());
        for (name, header) in FILES.iter().zip(headers(n_leg, n_items)) {
            write_file(&dir.join(name), &header)?;
        }
        let mut legs = String::from("index,legislator_id,name,party\n");
        for (i, l) in votes.legislators().iter().enumerate() {
            legs.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                csv_field(&l.id),
                csv_field(l.name.as_deref().unwrap_or("")),
                csv_field(l.party.as_deref().unwrap_or(""))
            ));
        }
        write_file(&dir.join("legislators.csv"), &legs)?;
        let mut items = String::from("index,item_id\n");
        for (j, it) in votes.items().iter().enumerate() {
            items.push_str(&format!("{},{}\n", j + 1, csv_field(&it.id)));
        }
        write_file(&dir.join("items.csv"), &items)?;
        write_file(&dir.join(CONFIG_ECHO), config_echo)?;
        let writer = Self {
            dir: dir.to_path_buf(),
            n_legislators: n_leg,
            n_items,
            buffers: Default::default(),
            pending: 0,
            written: 0,
        };
        writer.write_manifest(RunStatus::Running)?;
        Ok(writer)
    }

    fn write_manifest(&self, status: RunStatus) -> Result<(), IoError> {
        let manifest = Manifest {
            status,
            n_draws: self.written,
            block_size: BLOCK_SIZE,
            n_legislators: self.n_legislators,
            n_items: self.n_items,
        };
        let body = toml::to_string(&manifest).expect("manifest serialises");
        let tmp = self.dir.join("manifest.toml.tmp");
        write_file(&tmp, &body)?;
        let dest = self.dir.join(MANIFEST);
        std::fs::rename(&tmp, &dest).map_err(|e| IoError::file(dest, e))
    }

    fn flush_block(&mut self) -> Result<(), IoError> {
        for (name, buf) in FILES.iter().zip(self.buffers.iter_mut()) {
            if buf.is_empty() {
                continue;
            }
            let path = self.dir.join(name);
            let mut f = OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|e| IoError::file(&path, e))?;
            f.write_all(buf.as_bytes()).map_err(|e| IoError::file(&path, e))?;
            buf.clear();
        }
        self.written += self.pending;
        self.pending = 0;
        Ok(())
    }

    fn push(&mut self, draw: &Draw<'_>) {
        let it = draw.iteration;
        let [beta, alpha, delta, z, loglik] = &mut self.buffers;
        beta.push_str(&it.to_string());
        for b in draw.beta {
            beta.push(',');
            beta.push_str(&fmt_f64(*b));
        }
        beta.push('\n');
        z.push_str(&it.to_string());
        for (j, item) in draw.items.iter().enumerate() {
            let [a1, a2] = item.alpha();
            let [d1, d2] = item.delta();
            alpha.push_str(&format!("{it},{},{},{}\n", j + 1, fmt_f64(a1), fmt_f64(a2)));
            delta.push_str(&format!("{it},{},{},{}\n", j + 1, fmt_f64(d1), fmt_f64(d2)));
            z.push_str(&format!(",{}", item.z().as_i8()));
        }
        z.push('\n');
        let total: f64 = draw.loglik.iter().sum();
        loglik.push_str(&format!("{it},{}", fmt_f64(total)));
        for l in draw.loglik {
            loglik.push(',');
            loglik.push_str(&fmt_f64(*l));
        }
        loglik.push('\n');
    }
}

impl DrawSink for DrawWriter {
    fn record(&mut self, draw: &Draw<'_>) -> Result<(), SamplerError> {
        self.push(draw);
        self.pending += 1;
        if self.pending == BLOCK_SIZE {
            self.flush_block()?;
            self.write_manifest(RunStatus::Running)?;
        }
        Ok(())
    }

    fn finish(&mut self, outcome: &RunOutcome) -> Result<(), SamplerError> {
        self.flush_block()?;
        let status = if outcome.interrupted {
            RunStatus::Truncated
        } else {
            RunStatus::Complete
        };
        self.write_manifest(status)?;
        Ok(())
    }
}

/// Write an in-memory store as a complete draws directory.
pub fn write_draws(store: &DrawStore, dir: &Path, votes: &VoteMatrix, config_echo: &str) -> Result<(), IoError> {
    let mut writer = DrawWriter::create(dir, votes, config_echo)?;
    for d in 0..store.len() {
        let draw = Draw {
            iteration: store.iterations()[d],
            beta: &store.beta()[d],
            items: &store.items()[d],
            loglik: &store.loglik()[d],
        };
        writer.record(&draw).map_err(sampler_to_io)?;
    }
    let outcome = RunOutcome {
        iterations: store.iterations().last().copied().unwrap_or(0),
        draws: store.len() as u64,
        interrupted: false,
    };
    writer.finish(&outcome).map_err(sampler_to_io)
}

fn sampler_to_io(e: SamplerError) -> IoError {
    match e {
        SamplerError::Io(e) => e,
        other => IoError::Config(other.to_string()),
    }
}

/// Contents of a draws directory.
#[derive(Debug, Clone)]
pub struct DrawsDir {
    pub store: DrawStore,
    pub roster: Roster,
    pub manifest: Manifest,
    pub config_echo: String,
    /// Set when fewer draws than the manifest promises could be read.
    pub truncation: Option<String>,
}

struct Table {
    path: PathBuf,
    rows: Vec<Vec<String>>,
}

/// Read a CSV, ignoring a final line that lacks its newline.
fn read_table(dir: &Path, name: &str, expected_header: &[String]) -> Result<Table, IoError> {
    let path = dir.join(name);
    let mut text = std::fs::read_to_string(&path).map_err(|e| IoError::file(&path, e))?;
    if !text.ends_with('\n') {
        let cut = text.rfind('\n').map_or(0, |p| p + 1);
        text.truncate(cut);
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| IoError::Malformed {
            path: path.clone(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected: Vec<&str> = expected_header.iter().map(String::as_str).collect();
    check_header(&path, &header, &expected)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Malformed {
            path: path.clone(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table { path, rows })
}

fn header_fields(line: &str) -> Vec<String> {
    line.trim_end().split(',').map(str::to_string).collect()
}

fn parse_num<T: std::str::FromStr>(table: &Table, row: usize, col: usize) -> Result<T, IoError> {
    let s = &table.rows[row][col];
    s.parse().map_err(|_| IoError::Malformed {
        path: table.path.clone(),
        line: row + 2,
        message: format!("cannot parse {s:?} in column {}", col + 1),
    })
}

/// Read a draws directory, validating headers and cross-file consistency.
/// A run that stopped mid-block yields every complete block.
pub fn read_draws(dir: &Path) -> Result<DrawsDir, IoError> {
    let manifest_path = dir.join(MANIFEST);
    let manifest_text = std::fs::read_to_string(&manifest_path).map_err(|e| IoError::file(&manifest_path, e))?;
    let manifest: Manifest = toml::from_str(&manifest_text).map_err(|e| IoError::Malformed {
        path: manifest_path.clone(),
        line: 0,
        message: e.to_string(),
    })?;
    let (n_leg, n_items) = (manifest.n_legislators, manifest.n_items);
    let config_path = dir.join(CONFIG_ECHO);
    let config_echo = std::fs::read_to_string(&config_path).map_err(|e| IoError::file(&config_path, e))?;

    let legs = read_table(dir, "legislators.csv", &header_fields("index,legislator_id,name,party"))?;
    let items_table = read_table(dir, "items.csv", &header_fields("index,item_id"))?;
    if legs.rows.len() != n_leg || items_table.rows.len() != n_items {
        return Err(IoError::Truncated {
            path: dir.to_path_buf(),
            message: format!(
                "roster lists {} legislators and {} items, manifest says {n_leg} and {n_items}",
                legs.rows.len(),
                items_table.rows.len()
            ),
        });
    }
    let roster = Roster {
        legislators: legs.rows.iter().map(|r| r[1].clone()).collect(),
        items: items_table.rows.iter().map(|r| r[1].clone()).collect(),
    };

    let hdr = headers(n_leg, n_items);
    let tables: Vec<Table> = FILES
        .iter()
        .zip(&hdr)
        .map(|(name, h)| read_table(dir, name, &header_fields(h)))
        .collect::<Result<_, _>>()?;
    let [beta_t, alpha_t, delta_t, z_t, loglik_t] = <[Table; 5]>::try_from(tables).ok().expect("five tables");

    let per_item = |t: &Table| t.rows.len().checked_div(n_items).map_or(u64::MAX, |n| n as u64);
    let available = [
        beta_t.rows.len() as u64,
        per_item(&alpha_t),
        per_item(&delta_t),
        z_t.rows.len() as u64,
        loglik_t.rows.len() as u64,
    ]
    .into_iter()
    .min()
    .unwrap_or(0);

    let mut truncation = None;
    let retained = if available >= manifest.n_draws {
        let longest = [&beta_t, &z_t, &loglik_t]
            .iter()
            .map(|t| t.rows.len() as u64)
            .max()
            .unwrap_or(0);
        if manifest.status == RunStatus::Complete && longest > manifest.n_draws {
            return Err(IoError::Truncated {
                path: dir.to_path_buf(),
                message: format!("manifest records {} draws but files hold {longest}", manifest.n_draws),
            });
        }
        manifest.n_draws
    } else {
        let kept = available / manifest.block_size.max(1) * manifest.block_size.max(1);
        truncation = Some(format!(
            "manifest records {} draws ({:?}) but only {available} are complete on disk; kept {kept}",
            manifest.n_draws, manifest.status
        ));
        kept
    } as usize;

    let mut iterations = Vec::with_capacity(retained);
    let mut beta = Vec::with_capacity(retained);
    let mut items = Vec::with_capacity(retained);
    let mut loglik = Vec::with_capacity(retained);
    for d in 0..retained {
        let it: u64 = parse_num(&beta_t, d, 0)?;
        for (t, row) in [(&z_t, d), (&loglik_t, d)] {
            let other: u64 = parse_num(t, row, 0)?;
            if other != it {
                return Err(IoError::Malformed {
                    path: t.path.clone(),
                    line: row + 2,
                    message: format!("iteration {other} does not match {it} in beta.csv"),
                });
            }
        }
        iterations.push(it);
        beta.push(
            (1..=n_leg)
                .map(|c| parse_num(&beta_t, d, c))
                .collect::<Result<Vec<f64>, _>>()?,
        );
        loglik.push(
            (2..2 + n_leg)
                .map(|c| parse_num(&loglik_t, d, c))
                .collect::<Result<Vec<f64>, _>>()?,
        );
        let mut row = Vec::with_capacity(n_items);
        for j in 0..n_items {
            let r = d * n_items + j;
            for t in [&alpha_t, &delta_t] {
                let (ri, rj): (u64, usize) = (parse_num(t, r, 0)?, parse_num(t, r, 1)?);
                if ri != it || rj != j + 1 {
                    return Err(IoError::Malformed {
                        path: t.path.clone(),
                        line: r + 2,
                        message: format!("expected iteration {it}, item {}; found {ri}, {rj}", j + 1),
                    });
                }
            }
            let alpha = [parse_num(&alpha_t, r, 2)?, parse_num(&alpha_t, r, 3)?];
            let delta = [parse_num(&delta_t, r, 2)?, parse_num(&delta_t, r, 3)?];
            let z_raw: i8 = parse_num(&z_t, d, j + 1)?;
            let bad = |message: String| IoError::Malformed {
                path: z_t.path.clone(),
                line: d + 2,
                message,
            };
            let z = Orthant::from_i8(z_raw).ok_or_else(|| bad(format!("z must be 1 or -1, found {z_raw}")))?;
            row.push(ItemParams::new(alpha, delta, z).map_err(|e| bad(e.to_string()))?);
        }
        items.push(row);
    }
    let store = DrawStore::from_parts(iterations, beta, items, loglik).map_err(|e| IoError::Config(e.to_string()))?;
    Ok(DrawsDir {
        store,
        roster,
        manifest,
        config_echo,
        truncation,
    })
}
