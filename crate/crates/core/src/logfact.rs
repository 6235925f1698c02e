use crate::error::{argument, Result};
use crate::sum::NeumaierSum;

/// Precomputed `ln(k!)` for `k = 0..=max`.
///
/// Built by compensated accumulation of `ln k`, which keeps every entry
/// within a few ulps of the true value. Growth doubles the capacity; a
/// shared table must be grown before it is handed to other threads.
#[derive(Debug, Clone)]
pub struct LogFactorialTable {
    lf: Vec<f64>,
    acc: NeumaierSum,
}

impl LogFactorialTable {
    pub fn new(max: usize) -> Self {
        let mut table = Self {
            lf: vec![0.0],
            acc: NeumaierSum::new(),
        };
        table.extend_to(max);
        table
    }

    /// Largest `k` with a stored `ln(k!)`.
    pub fn max(&self) -> usize {
        self.lf.len() - 1
    }

    /// Grow so that `ln(max!)` is available, at least doubling when growing.
    pub fn ensure(&mut self, max: usize) {
        if max > self.max() {
            self.extend_to(max.max(2 * self.max()));
        }
    }

    fn extend_to(&mut self, max: usize) {
        self.lf.reserve(max + 1 - self.lf.len());
        for k in self.lf.len()..=max {
            self.acc.add((k as f64).ln());
            self.lf.push(self.acc.value());
        }
    }

    pub fn ln_factorial(&self, k: usize) -> Result<f64> {
        self.lf.get(k).copied().ok_or_else(|| {
            argument(format!(
                "ln({k}!) requested beyond table range {}",
                self.max()
            ))
        })
    }

    /// Unchecked-range accessor for hot loops; panics out of range.
    #[inline]
    pub fn lf(&self, k: usize) -> f64 {
        self.lf[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.lf
    }

    /// `ln C(n, k)`.
    pub fn log_binomial(&self, n: usize, k: usize) -> Result<f64> {
        if k > n {
            return Err(argument(format!("binomial coefficient with k={k} > n={n}")));
        }
        Ok(self.ln_factorial(n)? - self.lf(k) - self.lf(n - k))
    }

    /// `ln( n! / (k_1! ... k_d!) )` with `n = sum k_i`.
    pub fn log_multinomial(&self, parts: &[usize]) -> Result<f64> {
        let n: usize = parts.iter().sum();
        let mut acc = self.ln_factorial(n)?;
        for &k in parts {
            acc -= self.lf(k);
        }
        Ok(acc)
    }
}

/// `ln C(n, k)` using a freshly sized table.
pub fn log_binomial(n: usize, k: usize) -> Result<f64> {
    LogFactorialTable::new(n).log_binomial(n, k)
}
