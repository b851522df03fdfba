//! Data-parallel helpers with a sequential fallback.
//!
//! Sums are split into fixed-size chunks, each chunk is accumulated with
//! Neumaier compensation and the chunk totals are combined in index order, so
//! the result is bit-identical whether the chunks run on rayon or in a loop.

use std::sync::atomic::{AtomicU8, Ordering};

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

/// Selects the execution mode for subsequent calls. Without the `parallel`
/// feature every mode runs sequentially.
pub fn set_mode(mode: Mode) {
    MODE.store(matches!(mode, Mode::Parallel) as u8, Ordering::Relaxed);
}

pub fn mode() -> Mode {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        Mode::Parallel
    } else {
        Mode::Sequential
    }
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn compensated(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    values.into_iter().for_each(|v| acc.add(v));
    acc.value()
}

fn chunk_bounds(start: u64, end: u64) -> Vec<(u64, u64)> {
    if end < start {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(((end - start) / CHUNK + 1) as usize);
    let mut lo = start;
    while lo <= end {
        let hi = (lo + CHUNK - 1).min(end);
        out.push((lo, hi));
        if hi == end {
            break;
        }
        lo = hi + 1;
    }
    out
}

/// Deterministic compensated sum of `f(k)` for `k` in `start..=end`.
pub fn sum_range<F>(start: u64, end: u64, f: F) -> Complex64
where
    F: Fn(u64) -> Complex64 + Sync,
{
    let chunk_sum = |&(lo, hi): &(u64, u64)| {
        let mut acc = CompensatedComplexSum::default();
        for k in lo..=hi {
            acc.add(f(k));
        }
        acc.value()
    };
    let chunks = chunk_bounds(start, end);
    let partials: Vec<Complex64> = match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => chunks.par_iter().map(chunk_sum).collect(),
        _ => chunks.iter().map(chunk_sum).collect(),
    };
    let mut acc = CompensatedComplexSum::default();
    partials.into_iter().for_each(|z| acc.add(z));
    acc.value()
}

/// Real-valued variant of [`sum_range`].
pub fn sum_range_real<F>(start: u64, end: u64, f: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    sum_range(start, end, |k| Complex64::new(f(k), 0.0)).re
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Mode::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1e16, 1.0, -1e16];
        values.extend(std::iter::repeat_n(1e-3, 1000));
        let s = compensated(values);
        assert!((s - 2.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn chunked_sum_is_mode_independent() {
        let f = |k: u64| Complex64::new(1.0 / (k as f64).powi(2), (k as f64).sin());
        set_mode(Mode::Sequential);
        let a = sum_range(1, 100_000, f);
        set_mode(Mode::Parallel);
        let b = sum_range(1, 100_000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_range_is_zero() {
        assert_eq!(
            sum_range(5, 4, |_| Complex64::new(1.0, 0.0)),
            Complex64::new(0.0, 0.0)
        );
        assert_eq!(chunk_bounds(1, 1), vec![(1, 1)]);
    }
}
