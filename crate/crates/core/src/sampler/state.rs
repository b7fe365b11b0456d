use crate::model::{ItemParams, Vote, VoteMatrix};

/// Latent utilities and mixture component labels for one vote cell.
/// Index 0 and 2 belong to the two "nay" options, index 1 to "yea".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    pub utility: [f64; 3],
    /// 0-based mixture component of each shock.
    pub component: [u8; 3],
}

impl Cell {
    /// Whether the utilities agree with the recorded vote.
    pub fn consistent_with(&self, yea: bool) -> bool {
        let [u1, u2, u3] = self.utility;
        if yea {
            u2 > u1.max(u3)
        } else {
            u2 < u1.max(u3)
        }
    }
}

/// Augmentation variables for every cell, row-major; entries for missing
/// votes are carried but never read.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    n_items: usize,
    cells: Vec<Cell>,
}

impl LatentState {
    pub fn new(n_legislators: usize, n_items: usize) -> Self {
        Self {
            n_items,
            cells: vec![Cell::default(); n_legislators * n_items],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.n_items + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut Cell {
        &mut self.cells[i * self.n_items + j]
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [Cell] {
        &mut self.cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub beta: Vec<f64>,
    pub items: Vec<ItemParams>,
    pub latent: LatentState,
    pub iteration: u64,
}

impl ChainState {
    /// Every observed cell's utilities agree with its vote.
    pub fn is_vote_consistent(&self, votes: &VoteMatrix) -> bool {
        (0..votes.n_legislators()).all(|i| {
            votes.row(i).iter().enumerate().all(|(j, v)| match v {
                Vote::Missing => true,
                v => self.latent.get(i, j).consistent_with(*v == Vote::Yea),
            })
        })
    }
}

/// Observed cells grouped by row and by column, with the vote as a flag.
#[derive(Debug, Clone)]
pub struct ObservedIndex {
    rows: Vec<Vec<(u32, bool)>>,
    cols: Vec<Vec<(u32, bool)>>,
}

impl ObservedIndex {
    pub fn new(votes: &VoteMatrix) -> Self {
        let mut rows = vec![Vec::new(); votes.n_legislators()];
        let mut cols = vec![Vec::new(); votes.n_items()];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in votes.row(i).iter().enumerate() {
                if v.is_observed() {
                    let yea = *v == Vote::Yea;
                    row.push((j as u32, yea));
                    cols[j].push((i as u32, yea));
                }
            }
        }
        Self { rows, cols }
    }

    /// `(item, yea)` for each observed vote of legislator `i`.
    #[inline]
    pub fn row(&self, i: usize) -> &[(u32, bool)] {
        &self.rows[i]
    }

    /// `(legislator, yea)` for each observed vote on item `j`.
    #[inline]
    pub fn col(&self, j: usize) -> &[(u32, bool)] {
        &self.cols[j]
    }

    pub fn n_legislators(&self) -> usize {
        self.rows.len()
    }

    pub fn n_items(&self) -> usize {
        self.cols.len()
    }
}
