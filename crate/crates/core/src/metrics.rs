//! Detection performance: false alarm and detection probabilities, mean time
//! to false alarm, mean detection delay, ROC sweeps and runtime benchmarks.
//!
//! Times are sample indices; the change happens at `t0`.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

/// Alarm instants of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlarmRecord {
    /// Sorted, distinct.
    pub alarms: Vec<usize>,
    pub t0: usize,
    pub n_t: usize,
}

impl AlarmRecord {
    pub fn new(mut alarms: Vec<usize>, t0: usize, n_t: usize) -> Result<Self> {
        alarms.sort_unstable();
        alarms.dedup();
        if alarms.last().is_some_and(|&a| a > n_t) {
            return Err(Error::validation(format!("alarm after horizon {n_t}")));
        }
        Ok(Self { alarms, t0, n_t })
    }

    /// Alarms at every index where `trace` exceeds `threshold` (NaN never
    /// alarms).
    pub fn from_trace(trace: &[f64], threshold: f64, t0: usize) -> Self {
        let alarms = trace.iter().enumerate().filter(|(_, &v)| v > threshold).map(|(t, _)| t).collect();
        Self { alarms, t0, n_t: trace.len().saturating_sub(1) }
    }

    pub fn first_false(&self) -> Option<usize> {
        self.alarms.first().copied().filter(|&a| a < self.t0)
    }

    pub fn first_detection(&self) -> Option<usize> {
        self.alarms.iter().copied().find(|&a| a >= self.t0 && a <= self.n_t)
    }
}

fn nonempty(records: &[AlarmRecord]) -> Result<()> {
    if records.is_empty() {
        return Err(Error::validation("no alarm records"));
    }
    Ok(())
}

/// Fraction of runs with an alarm before `t0`.
pub fn pfa(records: &[AlarmRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(records.iter().filter(|r| r.first_false().is_some()).count() as f64 / records.len() as f64)
}

/// Fraction of runs with an alarm in `[t0, n_t]`.
pub fn pd(records: &[AlarmRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(records.iter().filter(|r| r.first_detection().is_some()).count() as f64 / records.len() as f64)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Mean first alarm instant over runs whose first alarm precedes `t0`.
pub fn mtfa(records: &[AlarmRecord]) -> Option<f64> {
    mean(records.iter().filter_map(AlarmRecord::first_false).map(|a| a as f64))
}

/// Mean over every alarm raised before `t0`, in all runs.
pub fn mtfa_all_alarms(records: &[AlarmRecord]) -> Option<f64> {
    mean(records.iter().flat_map(|r| r.alarms.iter().filter(move |&&a| a < r.t0)).map(|&a| a as f64))
}

/// Mean delay from `t0` to the first alarm at or after `t0`.
pub fn mtd(records: &[AlarmRecord]) -> Option<f64> {
    mean(records.iter().filter_map(|r| r.first_detection().map(|a| (a - r.t0) as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
    pub mtfa: Option<f64>,
    pub mtd: Option<f64>,
}

/// Operating points sorted by increasing threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Detection probability at the smallest swept threshold whose false
    /// alarm probability does not exceed `target`.
    pub fn pd_at_pfa(&self, target: f64) -> Option<f64> {
        self.points.iter().find(|p| p.pfa <= target).map(|p| p.pd)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "threshold,pfa,pd,mtfa,mtd")?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, fmt_f64);
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(p.threshold),
                fmt_f64(p.pfa),
                fmt_f64(p.pd),
                opt(p.mtfa),
                opt(p.mtd)
            )?;
        }
        Ok(())
    }
}

/// Thresholds every statistic trace (indexed by sample, `NaN` before
/// warm-up) at each level and summarizes the resulting alarms.
pub fn roc(traces: &[Vec<f64>], t0: usize, thresholds: &[f64]) -> Result<RocCurve> {
    if thresholds.len() < 2 {
        return Err(Error::validation("ROC needs at least 2 thresholds"));
    }
    if traces.is_empty() {
        return Err(Error::validation("no statistic traces"));
    }
    let mut th = thresholds.to_vec();
    th.sort_by(f64::total_cmp);
    let points = th
        .iter()
        .map(|&xi| {
            let recs: Vec<AlarmRecord> = traces.iter().map(|tr| AlarmRecord::from_trace(tr, xi, t0)).collect();
            Ok(RocPoint { threshold: xi, pfa: pfa(&recs)?, pd: pd(&recs)?, mtfa: mtfa(&recs), mtd: mtd(&recs) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RocCurve { points })
}

/// `n` thresholds at evenly spaced empirical quantiles of the pooled
/// pre-change statistics.
pub fn default_thresholds(traces: &[Vec<f64>], t0: usize, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::validation("need at least 2 thresholds"));
    }
    let mut pool: Vec<f64> = traces.iter().flat_map(|tr| tr.iter().take(t0).copied().filter(|v| !v.is_nan())).collect();
    if pool.is_empty() {
        return Err(Error::data("no pre-change statistics to take quantiles of"));
    }
    pool.sort_by(f64::total_cmp);
    let last = pool.len() - 1;
    Ok((0..n).map(|i| pool[(i * last + (n - 1) / 2) / (n - 1)]).collect())
}

/// Smallest threshold among the per-run pre-change maxima whose false alarm
/// probability is at most `target`.
pub fn threshold_for_pfa(traces: &[Vec<f64>], t0: usize, target: f64) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::validation("no statistic traces"));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::validation(format!("target PFA must be in [0, 1]; got {target}")));
    }
    let mut maxima: Vec<f64> = traces
        .iter()
        .map(|tr| tr.iter().take(t0).copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    maxima.sort_by(f64::total_cmp);
    let n = maxima.len();
    let allowed = (target * n as f64).floor() as usize;
    Ok(if allowed >= n { f64::NEG_INFINITY } else { maxima[n - allowed - 1] })
}

/// Median wall time of `repetitions` calls of `f(l)` for every `l` in `sizes`.
pub fn bench_runtime<F>(sizes: &[usize], repetitions: usize, mut f: F) -> Result<Vec<(usize, f64)>>
where
    F: FnMut(usize) -> Result<()>,
{
    if repetitions < 3 {
        return Err(Error::validation("benchmark needs at least 3 repetitions"));
    }
    sizes
        .iter()
        .map(|&l| {
            let mut times = Vec::with_capacity(repetitions);
            for _ in 0..repetitions {
                let start = Instant::now();
                f(l)?;
                times.push(start.elapsed().as_secs_f64());
            }
            Ok((l, median(&mut times)))
        })
        .collect()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn write_bench_csv<W: Write>(mut w: W, name: &str, rows: &[(usize, f64)]) -> Result<()> {
    writeln!(w, "detector,L,median_seconds")?;
    for (l, s) in rows {
        writeln!(w, "{name},{l},{}", fmt_f64(*s))?;
    }
    Ok(())
}
