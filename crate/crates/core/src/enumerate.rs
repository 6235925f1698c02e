//! Table-space enumeration and offset-algorithm p-values.
//!
//! A p-value is the total probability of every table sharing the observed
//! column marginals whose probability does not exceed the observed one.
//! Comparisons happen in log-space with an absolute tie tolerance of
//! [`TIE_TOLERANCE`], so exact rational ties (symmetry partners) are
//! included even when their floating-point evaluations differ by an ulp.

use std::fmt;

use num::{BigUint, One, ToPrimitive};
use rayon::prelude::*;

use crate::error::{argument, Error, Result};
use crate::exactprob::{
    one_sided_base, one_sided_log_prob, one_sided_step_s1, one_sided_step_s2, two_sided_2x2,
    two_sided_log_prob, LogProb,
};
use crate::logfact::LogFactorialTable;
use crate::sum::NeumaierSum;
use crate::table::{MarginalSpec, TableCounts};

/// Absolute log-space slack under which a probability counts as a tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Default cap on the number of tables a single p-value may enumerate.
pub const DEFAULT_MAX_TABLES: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sided {
    Two,
    One,
}

impl fmt::Display for Sided {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sided::Two => "two",
            Sided::One => "one",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValueOptions {
    /// Refuse to enumerate table spaces larger than this.
    pub max_tables: u64,
    /// Worker threads; `None` uses the global rayon pool. Results do not
    /// depend on this value.
    pub threads: Option<usize>,
    pub tie_tolerance: f64,
}

impl Default for PValueOptions {
    fn default() -> Self {
        Self {
            max_tables: DEFAULT_MAX_TABLES,
            threads: None,
            tie_tolerance: TIE_TOLERANCE,
        }
    }
}

impl PValueOptions {
    pub fn single_threaded() -> Self {
        Self {
            threads: Some(1),
            ..Self::default()
        }
    }
}

/// A p-value with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueResult {
    /// Clamped to `[0, 1]`.
    pub p_value: f64,
    /// Before clamping; the one-sided doubling can exceed 1 for central tables.
    pub p_value_unclamped: f64,
    /// `ln` of the unclamped p-value, finite even when `p_value` underflows.
    pub log_p_value: f64,
    /// Log probability of the observed table.
    pub offset_log_prob: LogProb,
    pub tables_total: BigUint,
    pub tables_included: u64,
    pub sided: Sided,
}

/// All compositions of `n` into `parts` nonnegative parts, in ascending
/// lexicographic order; the first is `(0, .., 0, n)`.
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=n {
            prefix.push(first);
            rec(n - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(n, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// `Π_j C(n_j + d - 1, d - 1)`.
pub fn count_tables(spec: &MarginalSpec) -> BigUint {
    let k = spec.rows() - 1;
    spec.marginals().iter().fold(BigUint::one(), |acc, &n| {
        let mut c = BigUint::one();
        for i in 0..k {
            c = c * BigUint::from(n + k - i) / BigUint::from(i + 1);
        }
        acc * c
    })
}

/// Odometer over every table with the given column marginals.
///
/// Each column runs through its compositions in lexicographic order and
/// the leftmost column turns fastest.
#[derive(Debug, Clone)]
pub struct TableCursor {
    columns: Vec<Vec<Vec<usize>>>,
    idx: Vec<usize>,
    current: TableCounts,
    fresh: bool,
    done: bool,
}

impl TableCursor {
    pub fn new(spec: &MarginalSpec) -> Self {
        let d = spec.rows();
        let columns: Vec<_> = spec.marginals().iter().map(|&n| compositions(n, d)).collect();
        let m = columns.len();
        let mut current = TableCounts::from_flat(d, m, vec![0; d * m]).expect("valid spec");
        for (c, comps) in columns.iter().enumerate() {
            for (r, &v) in comps[0].iter().enumerate() {
                current.set(r, c, v);
            }
        }
        Self {
            idx: vec![0; m],
            columns,
            current,
            fresh: true,
            done: false,
        }
    }

    pub fn current(&self) -> &TableCounts {
        &self.current
    }

    /// Step to the next table; false once the space is exhausted.
    pub fn advance(&mut self) -> bool {
        if self.done {
            return false;
        }
        for c in 0..self.columns.len() {
            let next = self.idx[c] + 1;
            let wrapped = next == self.columns[c].len();
            self.idx[c] = if wrapped { 0 } else { next };
            for (r, &v) in self.columns[c][self.idx[c]].iter().enumerate() {
                self.current.set(r, c, v);
            }
            if !wrapped {
                return true;
            }
        }
        self.done = true;
        false
    }
}

impl Iterator for TableCursor {
    type Item = TableCounts;

    fn next(&mut self) -> Option<TableCounts> {
        if self.fresh {
            self.fresh = false;
            return Some(self.current.clone());
        }
        if self.advance() {
            Some(self.current.clone())
        } else {
            None
        }
    }
}

pub fn enumerate_tables(spec: &MarginalSpec) -> TableCursor {
    TableCursor::new(spec)
}

fn check_capacity(total: &BigUint, cap: u64) -> Result<()> {
    if *total > BigUint::from(cap) {
        return Err(Error::Capacity(format!(
            "table space holds {total} tables, above the cap of {cap}"
        )));
    }
    Ok(())
}

fn run_with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(argument("thread count must be positive")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Precomputed per-column compositions and log multinomials.
struct ColumnTerms {
    d: usize,
    comps: Vec<usize>,
    log_multinomial: Vec<f64>,
}

impl ColumnTerms {
    fn new(lf: &LogFactorialTable, n: usize, d: usize) -> Self {
        let list = compositions(n, d);
        let log_multinomial = list
            .iter()
            .map(|c| lf.log_multinomial(c).expect("table sized for N"))
            .collect();
        Self {
            d,
            comps: list.into_iter().flatten().collect(),
            log_multinomial,
        }
    }

    fn len(&self) -> usize {
        self.log_multinomial.len()
    }

    #[inline]
    fn comp(&self, i: usize) -> &[usize] {
        &self.comps[i * self.d..(i + 1) * self.d]
    }
}

/// Two-sided table space with everything the inner loop needs.
struct TwoSidedSpace {
    lf: LogFactorialTable,
    columns: Vec<ColumnTerms>,
    constant: f64,
}

impl TwoSidedSpace {
    fn new(spec: &MarginalSpec) -> Self {
        let d = spec.rows();
        let top = spec.total() + d - 1;
        let lf = LogFactorialTable::new(top);
        let columns = spec
            .marginals()
            .iter()
            .map(|&n| ColumnTerms::new(&lf, n, d))
            .collect();
        let constant = lf.lf(d - 1) - lf.lf(top);
        Self {
            lf,
            columns,
            constant,
        }
    }

    fn partitions(&self) -> usize {
        self.columns.last().map_or(0, ColumnTerms::len)
    }

    /// Visit the log probability of every table whose last column takes its
    /// `part`-th composition, in odometer order.
    fn for_each_in_partition(&self, part: usize, mut visit: impl FnMut(f64)) {
        let m = self.columns.len();
        let (free, last) = self.columns.split_at(m - 1);
        let last = &last[0];
        let lf = self.lf.as_slice();
        let mut idx = vec![0usize; m - 1];
        let mut rows = last.comp(part).to_vec();
        for col in free {
            for (r, v) in col.comp(0).iter().enumerate() {
                rows[r] += v;
            }
        }
        let head = self.constant + last.log_multinomial[part];
        loop {
            let mut logp = head;
            for (col, &i) in free.iter().zip(&idx) {
                logp += col.log_multinomial[i];
            }
            for &r in &rows {
                logp += lf[r];
            }
            visit(logp);

            let mut j = 0;
            loop {
                if j == m - 1 {
                    return;
                }
                let col = &free[j];
                let old = idx[j];
                let new = if old + 1 < col.len() { old + 1 } else { 0 };
                idx[j] = new;
                for ((row, &a), &b) in rows.iter_mut().zip(col.comp(new)).zip(col.comp(old)) {
                    *row = *row + a - b;
                }
                if new != 0 {
                    break;
                }
                j += 1;
            }
        }
    }
}

/// Two-sided m-test p-value of `t`.
pub fn two_sided_pvalue(t: &TableCounts, opts: &PValueOptions) -> Result<PValueResult> {
    let spec = t.marginals()?;
    let tables_total = count_tables(&spec);
    check_capacity(&tables_total, opts.max_tables)?;
    let space = TwoSidedSpace::new(&spec);
    let offset = two_sided_log_prob(&space.lf, t)?.value();
    let threshold = offset + opts.tie_tolerance;

    let partial = |part: usize| {
        let mut sum = NeumaierSum::new();
        let mut included = 0u64;
        space.for_each_in_partition(part, |logp| {
            if logp <= threshold {
                sum.add((logp - offset).exp());
                included += 1;
            }
        });
        (sum, included)
    };
    let parts: Vec<(NeumaierSum, u64)> = if opts.threads == Some(1) {
        (0..space.partitions()).map(partial).collect()
    } else {
        run_with_threads(opts.threads, || {
            (0..space.partitions()).into_par_iter().map(partial).collect()
        })?
    };

    let mut scaled = NeumaierSum::new();
    let mut included = 0u64;
    for (s, k) in &parts {
        scaled.merge(s);
        included += k;
    }
    finish(offset, scaled.value(), 1.0, tables_total, included, Sided::Two)
}

fn finish(
    offset: f64,
    scaled: f64,
    factor: f64,
    tables_total: BigUint,
    tables_included: u64,
    sided: Sided,
) -> Result<PValueResult> {
    let log_p_value = offset + scaled.ln() + factor.ln();
    if !log_p_value.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite log p-value (offset {offset}, scaled sum {scaled})"
        )));
    }
    let p_value_unclamped = log_p_value.exp();
    Ok(PValueResult {
        p_value: p_value_unclamped.clamp(0.0, 1.0),
        p_value_unclamped,
        log_p_value,
        offset_log_prob: LogProb::new(offset),
        tables_total,
        tables_included,
        sided,
    })
}

/// Walks the one-sided chain row by row (`s1` ascending, `s2` descending)
/// and hands every `(s1, s2, ln P⁻)` to `visit`. When `visit` returns false
/// the rest of the row is skipped; when it does so on the first entry of a
/// row the walk stops.
fn walk_one_sided(
    lf: &LogFactorialTable,
    n1: usize,
    n2: usize,
    mut visit: impl FnMut(usize, usize, f64) -> bool,
) -> Result<()> {
    let mut head = one_sided_base(lf, n1, n2)?;
    for s1 in 0..=n1 {
        if s1 > 0 {
            head = one_sided_step_s1(lf, s1 - 1, n1 - s1 + 1, n2, 0, head)?;
        }
        let mut cur = head;
        for f2 in 0..=n2 {
            let s2 = n2 - f2;
            if f2 > 0 {
                cur = one_sided_step_s2(lf, s1, n1 - s1, s2 + 1, f2 - 1, cur)?;
            }
            if !visit(s1, s2, cur.value()) {
                if f2 == 0 {
                    return Ok(());
                }
                break;
            }
        }
    }
    Ok(())
}

fn one_sided_impl(
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    opts: &PValueOptions,
    early_stop: bool,
) -> Result<PValueResult> {
    let (n1, n2) = (s1 + f1, s2 + f2);
    if n1 == 0 || n2 == 0 {
        return Err(argument("one-sided p-value needs n1, n2 >= 1"));
    }
    let tables_total = BigUint::from(n1 + 1) * BigUint::from(n2 + 1);
    check_capacity(&tables_total, opts.max_tables)?;
    let lf = LogFactorialTable::new(n1 + n2 + 2);
    let offset = one_sided_log_prob(&lf, s1, f1, s2, f2)?.value();
    let threshold = offset + opts.tie_tolerance;
    let mut sum = NeumaierSum::new();
    let mut included = 0u64;
    walk_one_sided(&lf, n1, n2, |_, _, logp| {
        if logp <= threshold {
            sum.add((logp - offset).exp());
            included += 1;
            true
        } else {
            // P⁻ only grows along a row and down the heads
            !early_stop
        }
    })?;
    finish(offset, sum.value(), 2.0, tables_total, included, Sided::One)
}

/// One-sided m-test p-value of the 2 x 2 table `[[s1, s2], [f1, f2]]`
/// against the null that column 1 has the higher success probability.
///
/// The sum of `P⁻` is doubled because only half of the parameter square is
/// integrated. Rows are cut short as soon as `P⁻` exceeds the offset.
pub fn one_sided_pvalue(
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    opts: &PValueOptions,
) -> Result<PValueResult> {
    one_sided_impl(s1, f1, s2, f2, opts, true)
}

/// [`one_sided_pvalue`] without early termination; visits every table.
pub fn one_sided_pvalue_exhaustive(
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    opts: &PValueOptions,
) -> Result<PValueResult> {
    one_sided_impl(s1, f1, s2, f2, opts, false)
}

/// Dispatch on sidedness; one-sided requires a 2 x 2 table.
pub fn pvalue(t: &TableCounts, sided: Sided, opts: &PValueOptions) -> Result<PValueResult> {
    match sided {
        Sided::Two => two_sided_pvalue(t, opts),
        Sided::One => {
            let (s1, f1, s2, f2) = t.as_two_by_two()?;
            one_sided_pvalue(s1, f1, s2, f2, opts)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub s1: usize,
    pub s2: usize,
    pub probability: f64,
}

/// Every probability of a 2 x 2 table space, `s1` outer and `s2` inner,
/// both ascending.
pub fn probability_grid(spec: &MarginalSpec, sided: Sided) -> Result<Vec<GridRow>> {
    if spec.rows() != 2 || spec.cols() != 2 {
        return Err(argument("probability grids are defined for 2 x 2 tables"));
    }
    let (n1, n2) = (spec.marginals()[0], spec.marginals()[1]);
    let lf = LogFactorialTable::new(n1 + n2 + 2);
    let mut rows = Vec::with_capacity((n1 + 1) * (n2 + 1));
    match sided {
        Sided::Two => {
            for s1 in 0..=n1 {
                for s2 in 0..=n2 {
                    rows.push(GridRow {
                        s1,
                        s2,
                        probability: two_sided_2x2(&lf, s1, n1 - s1, s2, n2 - s2).exp(),
                    });
                }
            }
        }
        Sided::One => {
            let mut grid = vec![0.0; (n1 + 1) * (n2 + 1)];
            walk_one_sided(&lf, n1, n2, |s1, s2, logp| {
                grid[s1 * (n2 + 1) + s2] = logp.exp();
                true
            })?;
            for s1 in 0..=n1 {
                for s2 in 0..=n2 {
                    rows.push(GridRow {
                        s1,
                        s2,
                        probability: grid[s1 * (n2 + 1) + s2],
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Total two-sided probability over a table space; 1 up to rounding.
pub fn two_sided_total(spec: &MarginalSpec, opts: &PValueOptions) -> Result<f64> {
    check_capacity(&count_tables(spec), opts.max_tables)?;
    let space = TwoSidedSpace::new(spec);
    let mut total = NeumaierSum::new();
    for part in 0..space.partitions() {
        space.for_each_in_partition(part, |logp| total.add(logp.exp()));
    }
    Ok(total.value())
}

/// `count_tables` as an `f64`, saturating to infinity.
pub fn count_tables_f64(spec: &MarginalSpec) -> f64 {
    count_tables(spec).to_f64().unwrap_or(f64::INFINITY)
}
