//! Overhead benchmarks: four task-parallel workloads timed with ownership and
//! deadlock checking on (`verified`) and off (`baseline`).

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use vow::{Alarm, Mode, Runtime};

pub mod qsort;
pub mod randomized;
pub mod sieve;
pub mod smithwaterman;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Benchmark {
    Sieve,
    QSort,
    Randomized,
    SmithWaterman,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Sieve,
        Benchmark::QSort,
        Benchmark::Randomized,
        Benchmark::SmithWaterman,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sieve => "sieve",
            Benchmark::QSort => "qsort",
            Benchmark::Randomized => "randomized",
            Benchmark::SmithWaterman => "smithwaterman",
        }
    }

    /// One run inside the current root task. `scale` 1.0 is the default size.
    /// Returns a digest of the functional output.
    fn run(self, scale: f64) -> vow::Result<u64> {
        let sized = |n: f64| ((n * scale).round() as usize).max(1);
        match self {
            Benchmark::Sieve => {
                let (count, sum) = sieve::sieve(sized(20_000.0) as u32)?;
                Ok(count << 40 ^ sum)
            }
            Benchmark::QSort => {
                let v = qsort::input(sized(100_000.0), 7);
                Ok(qsort::digest(&qsort::qsort(v, qsort::CUTOFF)?))
            }
            Benchmark::Randomized => {
                let shape = randomized::Shape {
                    tasks: sized(254.0),
                    promises: sized(500.0),
                    ..randomized::Shape::default()
                };
                randomized::randomized(Arc::new(randomized::Plan::new(shape)))
            }
            Benchmark::SmithWaterman => {
                let n = sized(2_000.0);
                let a = Arc::new(smithwaterman::sequence(n, 11));
                let b = Arc::new(smithwaterman::sequence(n, 12));
                Ok(smithwaterman::smithwaterman(a, b, smithwaterman::TILE)? as u64)
            }
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| BenchError::UnknownBenchmark(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}` (expected sieve, qsort, randomized or smithwaterman)")]
    UnknownBenchmark(String),
    #[error("iterations must be at least 1")]
    NoIterations,
    #[error("{name} ({mode}) raised {} alarm(s): {}", alarms.len(), alarms.iter().map(|a| a.to_json_line()).collect::<Vec<_>>().join("; "))]
    Alarm {
        name: String,
        mode: Mode,
        alarms: Vec<Alarm>,
    },
    #[error("{name} ({mode}) failed: {message}")]
    Failed {
        name: String,
        mode: Mode,
        message: String,
    },
    #[error("{name} ({mode}) did different work across iterations")]
    Unstable { name: String, mode: Mode },
    #[error("no {mode} result for {name}")]
    MissingMode { name: String, mode: Mode },
    #[error("{name}: verified and baseline runs disagree ({what})")]
    Mismatch { name: String, what: &'static str },
    #[error("no results to report")]
    Empty,
}

/// Measurements of one benchmark in one mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub name: String,
    pub mode: Mode,
    pub iterations: usize,
    /// Wall time of each measured iteration.
    pub times_s: Vec<f64>,
    pub tasks: u64,
    pub gets: u64,
    pub sets: u64,
    /// Process high-water resident set size, where the OS reports it.
    pub peak_rss_bytes: Option<u64>,
    /// Digest of the functional output.
    pub output: u64,
}

impl BenchResult {
    pub fn mean_s(&self) -> f64 {
        self.times_s.iter().sum::<f64>() / self.times_s.len() as f64
    }

    /// Sample standard deviation; zero for a single iteration.
    pub fn stddev_s(&self) -> f64 {
        let n = self.times_s.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_s();
        let ss: f64 = self.times_s.iter().map(|t| (t - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

/// [`run_benchmark_scaled`] at the default size.
pub fn run_benchmark(
    name: &str,
    mode: Mode,
    iterations: usize,
    warmup: usize,
) -> Result<BenchResult, BenchError> {
    run_benchmark_scaled(name, mode, iterations, warmup, 1.0)
}

/// Runs `warmup` unmeasured and then `iterations` measured runs of a
/// benchmark on a fresh runtime. Any alarm fails the benchmark.
pub fn run_benchmark_scaled(
    name: &str,
    mode: Mode,
    iterations: usize,
    warmup: usize,
    scale: f64,
) -> Result<BenchResult, BenchError> {
    let bench: Benchmark = name.parse()?;
    if iterations == 0 {
        return Err(BenchError::NoIterations);
    }
    let rt = Runtime::with_mode(mode);
    let mut times_s = Vec::with_capacity(iterations);
    let mut work = None;
    for i in 0..warmup + iterations {
        let start = Instant::now();
        let report = rt
            .run_root(move || bench.run(scale))
            .map_err(|e| failed(bench, mode, e))?;
        let elapsed = start.elapsed().as_secs_f64();
        if !report.alarms.is_empty() {
            return Err(BenchError::Alarm {
                name: bench.name().into(),
                mode,
                alarms: report.alarms,
            });
        }
        let output = match report.value {
            Some(Ok(v)) => v,
            Some(Err(e)) => return Err(failed(bench, mode, e)),
            None => return Err(failed(bench, mode, format!("{:?}", report.cause))),
        };
        let this = (report.stats, output);
        if *work.get_or_insert(this) != this {
            return Err(BenchError::Unstable {
                name: bench.name().into(),
                mode,
            });
        }
        if i >= warmup {
            times_s.push(elapsed);
        }
    }
    let (stats, output) = work.expect("at least one iteration ran");
    Ok(BenchResult {
        name: bench.name().into(),
        mode,
        iterations,
        times_s,
        tasks: stats.tasks,
        gets: stats.gets,
        sets: stats.sets,
        peak_rss_bytes: peak_rss_bytes(),
        output,
    })
}

fn failed(bench: Benchmark, mode: Mode, e: impl fmt::Display) -> BenchError {
    BenchError::Failed {
        name: bench.name().into(),
        mode,
        message: e.to_string(),
    }
}

/// `VmHWM` from `/proc/self/status`.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// One benchmark's verified run against its baseline run.
#[derive(Clone, Debug, PartialEq)]
pub struct Overhead {
    pub name: String,
    pub baseline_s: f64,
    pub verified_s: f64,
    pub tasks: u64,
    pub gets: u64,
    pub sets: u64,
}

impl Overhead {
    pub fn ratio(&self) -> f64 {
        self.verified_s / self.baseline_s
    }
}

/// Pairs each benchmark's two modes, in order of first appearance. Both runs
/// must have done the same work and produced the same output.
pub fn overheads(results: &[BenchResult]) -> Result<Vec<Overhead>, BenchError> {
    if results.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut names: Vec<&str> = Vec::new();
    for r in results {
        if !names.contains(&r.name.as_str()) {
            names.push(&r.name);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let find = |mode| {
                results
                    .iter()
                    .find(|r| r.name == name && r.mode == mode)
                    .ok_or_else(|| BenchError::MissingMode {
                        name: name.into(),
                        mode,
                    })
            };
            let (b, v) = (find(Mode::Baseline)?, find(Mode::Verified)?);
            let mismatch = |what| BenchError::Mismatch {
                name: name.into(),
                what,
            };
            if b.output != v.output {
                return Err(mismatch("output"));
            }
            if (b.tasks, b.gets, b.sets) != (v.tasks, v.gets, v.sets) {
                return Err(mismatch("operation counts"));
            }
            Ok(Overhead {
                name: name.into(),
                baseline_s: b.mean_s(),
                verified_s: v.mean_s(),
                tasks: b.tasks,
                gets: b.gets,
                sets: b.sets,
            })
        })
        .collect()
}

pub fn geomean(ratios: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = ratios
        .into_iter()
        .fold((0.0, 0usize), |(s, n), r| (s + r.ln(), n + 1));
    (sum / n as f64).exp()
}

/// Baseline time, overhead, and operation rates per benchmark, then the
/// geometric mean of the overheads.
pub fn report_table(results: &[BenchResult]) -> Result<String, BenchError> {
    let rows = overheads(results)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>12} {:>9} {:>8} {:>10} {:>10}",
        "benchmark", "baseline (s)", "overhead", "tasks", "gets/ms", "sets/ms"
    );
    for r in &rows {
        let ms = r.baseline_s * 1e3;
        let _ = writeln!(
            out,
            "{:<14} {:>12.4} {:>8.2}x {:>8} {:>10.1} {:>10.1}",
            r.name,
            r.baseline_s,
            r.ratio(),
            r.tasks,
            r.gets as f64 / ms,
            r.sets as f64 / ms
        );
    }
    let _ = writeln!(
        out,
        "{:<14} {:>12} {:>8.2}x",
        "geomean",
        "",
        geomean(rows.iter().map(Overhead::ratio))
    );
    Ok(out)
}

pub const CSV_HEADER: &str = "name,mode,mean_s,stddev_s,tasks,gets,sets,peak_rss_bytes";

/// One line per result under [`CSV_HEADER`]. Unknown memory is left empty.
pub fn report_csv(results: &[BenchResult]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{},{},{},{}",
            r.name,
            r.mode,
            r.mean_s(),
            r.stddev_s(),
            r.tasks,
            r.gets,
            r.sets,
            r.peak_rss_bytes.map(|b| b.to_string()).unwrap_or_default()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(name: &str, mode: Mode, times: &[f64]) -> BenchResult {
        BenchResult {
            name: name.into(),
            mode,
            iterations: times.len(),
            times_s: times.to_vec(),
            tasks: 3,
            gets: 10,
            sets: 4,
            peak_rss_bytes: Some(1 << 20),
            output: 99,
        }
    }

    #[test]
    fn names_round_trip() {
        for b in Benchmark::ALL {
            assert_eq!(b.name().parse::<Benchmark>().unwrap(), b);
        }
        assert!(matches!("heat".parse::<Benchmark>(), Err(BenchError::UnknownBenchmark(_))));
    }

    #[test]
    fn mean_and_sample_stddev() {
        let r = result("x", Mode::Baseline, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.mean_s(), 2.5);
        assert!((r.stddev_s() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(result("x", Mode::Baseline, &[1.0]).stddev_s(), 0.0);
    }

    #[test]
    fn geomean_of_ratios() {
        assert!((geomean([2.0, 8.0]) - 4.0).abs() < 1e-12);
        assert!((geomean([1.5]) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn table_has_a_row_per_benchmark_and_a_geomean() {
        let results = [
            result("a", Mode::Baseline, &[1.0]),
            result("a", Mode::Verified, &[2.0]),
            result("b", Mode::Verified, &[4.0]),
            result("b", Mode::Baseline, &[2.0]),
        ];
        let table = report_table(&results).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4, "{table}");
        assert!(lines[0].contains("gets/ms"));
        assert!(lines[1].starts_with("a ") && lines[1].contains("2.00x"));
        assert!(lines[3].starts_with("geomean") && lines[3].contains("2.00x"));
        // 10 gets over 1000 ms of baseline time.
        assert!(lines[1].contains("0.0"), "{}", lines[1]);
    }

    #[test]
    fn missing_mode_names_the_benchmark() {
        let err = report_table(&[result("solo", Mode::Verified, &[1.0])]).unwrap_err();
        assert!(matches!(&err, BenchError::MissingMode { name, mode: Mode::Baseline } if name == "solo"));
        assert!(err.to_string().contains("solo"));
        assert!(matches!(report_table(&[]), Err(BenchError::Empty)));
    }

    #[test]
    fn differing_outputs_are_rejected() {
        let mut v = result("a", Mode::Verified, &[1.0]);
        v.output = 1;
        let err = overheads(&[result("a", Mode::Baseline, &[1.0]), v]).unwrap_err();
        assert!(matches!(err, BenchError::Mismatch { what: "output", .. }));
    }

    #[test]
    fn csv_columns() {
        let mut r = result("a", Mode::Baseline, &[1.0, 3.0]);
        let csv = report_csv(&[r.clone()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "name,mode,mean_s,stddev_s,tasks,gets,sets,peak_rss_bytes");
        assert_eq!(lines[1], "a,baseline,2.000000,1.414214,3,10,4,1048576");
        r.peak_rss_bytes = None;
        assert!(report_csv(&[r]).lines().nth(1).unwrap().ends_with(",4,"));
    }

    #[test]
    fn peak_rss_is_readable_on_linux() {
        if cfg!(target_os = "linux") {
            assert!(peak_rss_bytes().unwrap() > 0);
        }
    }

    #[test]
    fn zero_iterations_and_unknown_names_are_errors() {
        assert!(matches!(run_benchmark("qsort", Mode::Verified, 0, 0), Err(BenchError::NoIterations)));
        assert!(matches!(run_benchmark("conway", Mode::Verified, 1, 0), Err(BenchError::UnknownBenchmark(_))));
    }
}
