//! Tiled Smith-Waterman local alignment.
//!
//! The root allocates one promise per tile, then spawns one task per tile and
//! moves that tile's promise into it. A tile waits for its upper, left and
//! upper-left neighbours and publishes its last row, last column and best
//! score.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vow::{spawn, Promise, Result};

pub const TILE: usize = 25;
const MATCH: i32 = 2;
const MISMATCH: i32 = -1;
const GAP: i32 = -1;

pub fn sequence(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
}

fn score(x: u8, y: u8) -> i32 {
    if x == y {
        MATCH
    } else {
        MISMATCH
    }
}

/// Best local alignment score, row by row.
pub fn sequential(a: &[u8], b: &[u8]) -> i32 {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    let mut best = 0;
    for &x in a {
        for j in 1..=b.len() {
            let h = (prev[j - 1] + score(x, b[j - 1]))
                .max(prev[j] + GAP)
                .max(cur[j - 1] + GAP)
                .max(0);
            cur[j] = h;
            best = best.max(h);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub struct Tile {
    bottom: Vec<i32>,
    right: Vec<i32>,
    best: i32,
}

/// Fills rows `rows` by columns `cols` from the row above (`top`, with the
/// corner value first) and the column to the left.
fn fill(a: &[u8], b: &[u8], corner: i32, top: &[i32], left: &[i32]) -> Tile {
    let w = b.len();
    let mut prev: Vec<i32> = std::iter::once(corner).chain(top.iter().copied()).collect();
    let mut cur = vec![0; w + 1];
    let mut right = Vec::with_capacity(a.len());
    let mut best = 0;
    for (i, &x) in a.iter().enumerate() {
        cur[0] = left[i];
        for j in 1..=w {
            let h = (prev[j - 1] + score(x, b[j - 1]))
                .max(prev[j] + GAP)
                .max(cur[j - 1] + GAP)
                .max(0);
            cur[j] = h;
            best = best.max(h);
        }
        right.push(cur[w]);
        std::mem::swap(&mut prev, &mut cur);
    }
    Tile {
        bottom: prev[1..].to_vec(),
        right,
        best,
    }
}

/// Best local alignment score, one task per `tile`-sized block.
pub fn smithwaterman(a: Arc<Vec<u8>>, b: Arc<Vec<u8>>, tile: usize) -> Result<i32> {
    let tile = tile.max(1);
    let rows = a.len().div_ceil(tile);
    let cols = b.len().div_ceil(tile);
    let grid: Arc<Vec<Vec<Promise<Tile>>>> = Arc::new(
        (0..rows)
            .map(|_| (0..cols).map(|_| Promise::new()).collect())
            .collect::<Result<_>>()?,
    );
    for i in 0..rows {
        for j in 0..cols {
            let (a, b, grid2) = (a.clone(), b.clone(), grid.clone());
            spawn(&[&grid[i][j]], move || -> Result<()> {
                let ra = i * tile..((i + 1) * tile).min(a.len());
                let rb = j * tile..((j + 1) * tile).min(b.len());
                let top = match i {
                    0 => vec![0; rb.len()],
                    _ => grid2[i - 1][j].get()?.bottom.clone(),
                };
                let left = match j {
                    0 => vec![0; ra.len()],
                    _ => grid2[i][j - 1].get()?.right.clone(),
                };
                let corner = match (i, j) {
                    (0, _) | (_, 0) => 0,
                    _ => *grid2[i - 1][j - 1].get()?.bottom.last().expect("tiles are non-empty"),
                };
                grid2[i][j].set(fill(&a[ra], &b[rb], corner, &top, &left))
            })?;
        }
    }
    let mut best = 0;
    for row in grid.iter() {
        for t in row {
            best = best.max(t.get()?.best);
        }
    }
    Ok(best)
}
