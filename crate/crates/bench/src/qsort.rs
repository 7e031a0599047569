//! Divide-and-conquer quicksort. Each half is sorted by a child task that
//! returns its result through a promise; a finish scope joins both children.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vow::{finish, Promise, Result};

/// Below this length a slice is sorted sequentially.
pub const CUTOFF: usize = 1000;

pub fn input(len: usize, seed: u64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1_000_000..1_000_000)).collect()
}

pub fn qsort(mut v: Vec<i64>, cutoff: usize) -> Result<Vec<i64>> {
    if v.len() <= cutoff.max(1) {
        v.sort_unstable();
        return Ok(v);
    }
    let pivot = median3(v[0], v[v.len() / 2], v[v.len() - 1]);
    let mut lo = Vec::new();
    let mut eq = Vec::new();
    let mut hi = Vec::new();
    for x in v {
        match x.cmp(&pivot) {
            std::cmp::Ordering::Less => lo.push(x),
            std::cmp::Ordering::Equal => eq.push(x),
            std::cmp::Ordering::Greater => hi.push(x),
        }
    }
    let left = Promise::new()?;
    let right = Promise::new()?;
    finish(|scope| -> Result<()> {
        for (part, out) in [(lo, &left), (hi, &right)] {
            let out2 = out.clone();
            scope.spawn(&[out], move || -> Result<()> { out2.set(qsort(part, cutoff)?) })?;
        }
        Ok(())
    })??;
    let mut sorted = left.get()?.clone();
    sorted.extend(eq);
    sorted.extend_from_slice(right.get()?);
    Ok(sorted)
}

fn median3(a: i64, b: i64, c: i64) -> i64 {
    a.max(b).min(a.min(b).max(c))
}

/// Order-sensitive digest of a sorted vector.
pub fn digest(v: &[i64]) -> u64 {
    v.iter().fold(0xcbf2_9ce4_8422_2325, |h: u64, &x| {
        (h ^ x as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_three() {
        for (a, b, c) in [(1, 2, 3), (3, 2, 1), (2, 3, 1), (1, 1, 0), (5, 5, 5)] {
            let mut v = [a, b, c];
            v.sort();
            assert_eq!(median3(a, b, c), v[1]);
        }
    }

    #[test]
    fn sorts_like_the_standard_library() {
        for (len, cutoff) in [(0, 4), (1, 4), (50, 4), (5000, 64)] {
            let v = input(len, len as u64);
            let mut want = v.clone();
            want.sort();
            let report = vow::run_root(move || qsort(v, cutoff)).unwrap();
            assert!(report.is_ok(), "{:?}", report.alarms);
            assert_eq!(report.value.unwrap().unwrap(), want);
        }
    }
}
