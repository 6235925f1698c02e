//! Log-space m-test probability kernels.
//!
//! The two-sided probability of a `d x m` table integrates the shared
//! multinomial likelihood over the uniform density on the probability
//! simplex, which evaluates to
//!
//! ```text
//! P = (d-1)! · Π_j multinomial(n_j; o_1j..o_dj) · Π_r R_r! / (N + d - 1)!
//! ```
//!
//! with row sums `R_r` and grand total `N`. For two rows this is
//! `Π_j C(n_j, s_j) · S! F! / (N+1)!`. The multiplicative and additive
//! recurrences are kept alongside the closed form as a cross-check and to
//! drive the one-sided chain, which has no simple closed form.

use std::fmt;

use crate::error::{argument, Result};
use crate::logfact::LogFactorialTable;
use crate::table::{MarginalSpec, TableCounts};

/// A probability stored as its natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ONE: LogProb = LogProb(0.0);

    pub fn new(value: f64) -> Self {
        LogProb(value)
    }

    pub fn from_prob(p: f64) -> Self {
        LogProb(p.ln())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    /// `ln(e^a + e^b)`; never below either argument.
    #[inline]
    pub fn log_add(self, other: LogProb) -> LogProb {
        let (hi, lo) = if self.0 >= other.0 { (self.0, other.0) } else { (other.0, self.0) };
        if lo == f64::NEG_INFINITY {
            return LogProb(hi);
        }
        LogProb(hi + (lo - hi).exp().ln_1p())
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Closed-form two-sided log probability.
///
/// Needs `lf` to cover `N + d - 1`.
pub fn two_sided_log_prob(lf: &LogFactorialTable, t: &TableCounts) -> Result<LogProb> {
    let d = t.rows();
    let n_total = t.total();
    let mut acc = lf.ln_factorial(n_total + d - 1).map(|top| -top)?;
    acc += lf.lf(d - 1);
    for c in 0..t.cols() {
        acc += lf.log_multinomial(&t.column(c))?;
    }
    for r in t.row_sums() {
        acc += lf.lf(r);
    }
    Ok(LogProb(acc))
}

/// Probability of the table with every count in the last row:
/// `(d-1)! N! / (N+d-1)!`, which is `1/(N+1)` for two rows.
pub fn two_sided_base(lf: &LogFactorialTable, spec: &MarginalSpec) -> Result<LogProb> {
    let d = spec.rows();
    let n_total = spec.total();
    let top = lf.ln_factorial(n_total + d - 1)?;
    Ok(LogProb(lf.lf(d - 1) + lf.lf(n_total) - top))
}

/// Move one count in column `col` from `row_from` to `row_to`, updating
/// `logp` (the log probability of `t`) by the exact multiplicative ratio
/// `o_from (1 + R_to) / ((o_to + 1) R_from)`.
pub fn two_sided_step(
    t: &TableCounts,
    logp: LogProb,
    col: usize,
    row_to: usize,
    row_from: usize,
) -> Result<LogProb> {
    if col >= t.cols() || row_to >= t.rows() || row_from >= t.rows() {
        return Err(argument("step index out of range"));
    }
    if row_to == row_from {
        return Err(argument("step needs distinct source and target rows"));
    }
    let from = t.get(row_from, col);
    if from == 0 {
        return Err(argument(format!(
            "cannot move a count out of empty cell ({row_from}, {col})"
        )));
    }
    let to = t.get(row_to, col);
    let r_to: usize = t.row(row_to).iter().sum();
    let r_from: usize = t.row(row_from).iter().sum();
    Ok(LogProb(
        logp.0 + (from as f64).ln() + ((1 + r_to) as f64).ln()
            - ((to + 1) as f64).ln()
            - (r_from as f64).ln(),
    ))
}

/// Reconstructs the two-sided log probability of `t` by starting at the
/// base table and moving counts out of the last row one at a time.
pub fn two_sided_log_prob_by_recurrence(
    lf: &LogFactorialTable,
    t: &TableCounts,
) -> Result<LogProb> {
    let spec = t.marginals()?;
    let d = t.rows();
    let mut logp = two_sided_base(lf, &spec)?;
    let mut work = TableCounts::from_flat(d, t.cols(), vec![0; d * t.cols()])?;
    for c in 0..t.cols() {
        work.set(d - 1, c, spec.marginals()[c]);
    }
    for c in 0..t.cols() {
        for r in 0..d - 1 {
            for _ in 0..t.get(r, c) {
                logp = two_sided_step(&work, logp, c, r, d - 1)?;
                work.set(r, c, work.get(r, c) + 1);
                work.set(d - 1, c, work.get(d - 1, c) - 1);
            }
        }
    }
    Ok(logp)
}

/// Two-row, two-column closed form `C(n1,s1) C(n2,s2) S! F! / (N+1)!`.
#[inline]
pub(crate) fn two_sided_2x2(lf: &LogFactorialTable, s1: usize, f1: usize, s2: usize, f2: usize) -> f64 {
    let n1 = s1 + f1;
    let n2 = s2 + f2;
    lf.lf(n1) - lf.lf(s1) - lf.lf(f1) + lf.lf(n2) - lf.lf(s2) - lf.lf(f2) + lf.lf(s1 + s2)
        + lf.lf(f1 + f2)
        - lf.lf(n1 + n2 + 1)
}

fn check_range(lf: &LogFactorialTable, needed: usize) -> Result<()> {
    if needed > lf.max() {
        return Err(argument(format!(
            "log-factorial table covers {} but {needed} is needed",
            lf.max()
        )));
    }
    Ok(())
}

/// `P⁻` of the table `s1=0, f1=n1, s2=n2, f2=0`:
/// `1 / ((N+1)(N+2) C(N, n1))`.
pub fn one_sided_base(lf: &LogFactorialTable, n1: usize, n2: usize) -> Result<LogProb> {
    if n1 == 0 || n2 == 0 {
        return Err(argument("one-sided base needs n1, n2 >= 1"));
    }
    let n = n1 + n2;
    let log_c = lf.log_binomial(n, n1)?;
    Ok(LogProb(-((n + 1) as f64).ln() - ((n + 2) as f64).ln() - log_c))
}

/// `P⁻(s1+1, f1-1, s2, f2)` from `P⁻(s1, f1, s2, f2)` by adding the
/// augmented two-sided term `P(s1+1, f1, s2, f2) / (n1+1)`.
pub fn one_sided_step_s1(
    lf: &LogFactorialTable,
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    logpm: LogProb,
) -> Result<LogProb> {
    if f1 == 0 {
        return Err(argument("s1 step needs f1 >= 1"));
    }
    check_range(lf, s1 + f1 + s2 + f2 + 2)?;
    let aug = two_sided_2x2(lf, s1 + 1, f1, s2, f2) - ((s1 + f1 + 1) as f64).ln();
    Ok(logpm.log_add(LogProb(aug)))
}

/// `P⁻(s1, f1, s2-1, f2+1)` from `P⁻(s1, f1, s2, f2)` by adding the
/// augmented two-sided term `P(s1, f1, s2, f2+1) / (n2+1)`.
pub fn one_sided_step_s2(
    lf: &LogFactorialTable,
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    logpm: LogProb,
) -> Result<LogProb> {
    if s2 == 0 {
        return Err(argument("s2 step needs s2 >= 1"));
    }
    check_range(lf, s1 + f1 + s2 + f2 + 2)?;
    let aug = two_sided_2x2(lf, s1, f1, s2, f2 + 1) - ((s2 + f2 + 1) as f64).ln();
    Ok(logpm.log_add(LogProb(aug)))
}

/// One-sided log probability by walking the chain: base, then `s1`
/// increments, then `n2 - s2` decrements of `s2`.
pub fn one_sided_log_prob(
    lf: &LogFactorialTable,
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
) -> Result<LogProb> {
    let (n1, n2) = (s1 + f1, s2 + f2);
    let mut p = one_sided_base(lf, n1, n2)?;
    for i in 0..s1 {
        p = one_sided_step_s1(lf, i, n1 - i, n2, 0, p)?;
    }
    for k in 0..(n2 - s2) {
        p = one_sided_step_s2(lf, s1, f1, n2 - k, k, p)?;
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn two_sided_examples() {
        let lf = LogFactorialTable::new(64);
        let t = TableCounts::binomial(&[0, 0], &[10, 7]).unwrap();
        assert!(close(two_sided_log_prob(&lf, &t).unwrap().prob(), 1.0 / 18.0, 1e-12));
        let t = TableCounts::binomial(&[1, 0], &[0, 1]).unwrap();
        assert!(close(two_sided_log_prob(&lf, &t).unwrap().prob(), 1.0 / 6.0, 1e-12));
        let t = TableCounts::new(vec![vec![2], vec![0], vec![0]]).unwrap();
        assert!(close(two_sided_log_prob(&lf, &t).unwrap().prob(), 1.0 / 6.0, 1e-12));
    }

    #[test]
    fn base_examples() {
        let lf = LogFactorialTable::new(64);
        let b = |d, n: Vec<usize>| two_sided_base(&lf, &MarginalSpec::new(d, n).unwrap()).unwrap().prob();
        assert!(close(b(2, vec![10, 7]), 1.0 / 18.0, 1e-12));
        assert!(close(b(2, vec![1]), 0.5, 1e-12));
        assert!(close(b(3, vec![2]), 1.0 / 6.0, 1e-12));
    }

    #[test]
    fn step_examples() {
        let lf = LogFactorialTable::new(64);
        let t = TableCounts::binomial(&[0, 0], &[10, 7]).unwrap();
        let base = two_sided_log_prob(&lf, &t).unwrap();
        let next = two_sided_step(&t, base, 0, 0, 1).unwrap();
        assert!(close(next.prob(), 10.0 / (17.0 * 18.0), 1e-12));

        // n = (2): 1/3 at every s
        let mut t = TableCounts::binomial(&[0], &[2]).unwrap();
        let mut lp = two_sided_log_prob(&lf, &t).unwrap();
        for s in 0..=2 {
            assert!(close(lp.prob(), 1.0 / 3.0, 1e-12), "s={s}");
            if s < 2 {
                lp = two_sided_step(&t, lp, 0, 0, 1).unwrap();
                t.set(0, 0, s + 1);
                t.set(1, 0, 1 - s);
            }
        }
    }

    #[test]
    fn step_rejects_empty_source() {
        let t = TableCounts::binomial(&[0], &[2]).unwrap();
        assert!(two_sided_step(&t, LogProb::ONE, 0, 1, 0).is_err());
        assert!(two_sided_step(&t, LogProb::ONE, 0, 1, 1).is_err());
        assert!(two_sided_step(&t, LogProb::ONE, 3, 0, 1).is_err());
    }

    #[test]
    fn one_sided_examples() {
        let lf = LogFactorialTable::new(64);
        assert!(close(one_sided_base(&lf, 1, 1).unwrap().prob(), 1.0 / 24.0, 1e-12));
        assert!(close(one_sided_base(&lf, 1, 2).unwrap().prob(), 1.0 / 60.0, 1e-12));
        let c17_10 = 19448.0;
        assert!(close(
            one_sided_base(&lf, 10, 7).unwrap().prob(),
            1.0 / (18.0 * 19.0 * c17_10),
            1e-12
        ));

        let p = one_sided_step_s1(&lf, 0, 1, 1, 0, LogProb::from_prob(1.0 / 24.0)).unwrap();
        assert!(close(p.prob(), 1.0 / 8.0, 1e-12));
        let p = one_sided_step_s1(&lf, 0, 1, 0, 1, LogProb::from_prob(1.0 / 8.0)).unwrap();
        assert!(close(p.prob(), 5.0 / 24.0, 1e-12));
        let p = one_sided_step_s2(&lf, 0, 1, 1, 0, LogProb::from_prob(1.0 / 24.0)).unwrap();
        assert!(close(p.prob(), 1.0 / 8.0, 1e-12));
        let p = one_sided_step_s2(&lf, 1, 0, 1, 0, LogProb::from_prob(1.0 / 8.0)).unwrap();
        assert!(close(p.prob(), 5.0 / 24.0, 1e-12));

        assert!(one_sided_step_s1(&lf, 1, 0, 0, 1, LogProb::ONE).is_err());
        assert!(one_sided_step_s2(&lf, 0, 1, 0, 1, LogProb::ONE).is_err());

        assert!(close(one_sided_log_prob(&lf, 0, 1, 1, 0).unwrap().prob(), 1.0 / 24.0, 1e-12));
        assert!(close(one_sided_log_prob(&lf, 1, 0, 1, 0).unwrap().prob(), 1.0 / 8.0, 1e-12));
        let total: f64 = [(0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1), (1, 0, 1, 0)]
            .iter()
            .map(|&(a, b, c, d)| one_sided_log_prob(&lf, a, b, c, d).unwrap().prob())
            .sum();
        assert!(close(total, 0.5, 1e-12));
    }

    #[test]
    fn one_sided_range_checked() {
        let lf = LogFactorialTable::new(4);
        assert!(one_sided_log_prob(&lf, 2, 2, 2, 2).is_err());
    }

    #[test]
    fn log_add_handles_zero() {
        let z = LogProb::new(f64::NEG_INFINITY);
        assert_eq!(z.log_add(LogProb::new(-3.0)).value(), -3.0);
        let s = LogProb::from_prob(0.25).log_add(LogProb::from_prob(0.5));
        assert!(close(s.prob(), 0.75, 1e-15));
    }
}
