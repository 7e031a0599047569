//! Prime sieve as a pipeline of filter tasks connected by channels.
//!
//! A generator streams the candidates. Whenever a number reaches the end of
//! the pipeline it is prime: the root records it and appends a filter task
//! that drops its multiples. Every value flows through a chain of tasks, each
//! waiting on a promise owned by its upstream neighbour.

use vow::{spawn, Channel, Result};

/// Primes below `limit`, as `(count, sum)`.
pub fn sieve(limit: u32) -> Result<(u64, u64)> {
    let source = Channel::new()?;
    let tx = source.clone();
    spawn(&[&source], move || -> Result<()> {
        for n in 2..limit {
            tx.send(n)?;
        }
        tx.close()
    })?;

    let mut input = source;
    let (mut count, mut sum) = (0u64, 0u64);
    while let Some(p) = input.recv()? {
        count += 1;
        sum += u64::from(p);
        let output = Channel::new()?;
        let (rx, tx) = (input, output.clone());
        spawn(&[&output], move || -> Result<()> {
            while let Some(n) = rx.recv()? {
                if n % p != 0 {
                    tx.send(n)?;
                }
            }
            tx.close()
        })?;
        input = output;
    }
    Ok((count, sum))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(limit: u32) -> (u64, u64) {
        let primes: Vec<u64> = (2..limit)
            .filter(|&n| (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0))
            .map(u64::from)
            .collect();
        (primes.len() as u64, primes.iter().sum())
    }

    #[test]
    fn matches_trial_division() {
        for limit in [0, 2, 3, 10, 100, 1000] {
            let report = vow::run_root(move || sieve(limit)).unwrap();
            assert!(report.is_ok(), "{:?}", report.alarms);
            assert_eq!(report.value.unwrap().unwrap(), trial_division(limit), "{limit}");
        }
    }
}
