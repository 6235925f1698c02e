use std::fmt;

use crate::error::{argument, Result};

/// Fixed column totals of a table space plus its number of outcome rows.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarginalSpec {
    n: Vec<usize>,
    d: usize,
}

impl MarginalSpec {
    pub fn new(d: usize, n: Vec<usize>) -> Result<Self> {
        if d < 2 {
            return Err(argument(format!("need at least 2 outcome rows, got {d}")));
        }
        if n.is_empty() {
            return Err(argument("need at least one column marginal"));
        }
        if let Some(j) = n.iter().position(|&nj| nj == 0) {
            return Err(argument(format!("column marginal {} is zero", j + 1)));
        }
        Ok(Self { n, d })
    }

    /// Two-row (success/failure) spec.
    pub fn binomial(n: Vec<usize>) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.n.len()
    }

    pub fn marginals(&self) -> &[usize] {
        &self.n
    }

    /// Grand total `N`.
    pub fn total(&self) -> usize {
        self.n.iter().sum()
    }
}

/// A `d x m` matrix of outcome counts: rows are outcomes, columns experiments.
///
/// For two-row tables row 0 holds successes and row 1 failures.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableCounts {
    d: usize,
    m: usize,
    // row-major
    counts: Vec<usize>,
}

impl TableCounts {
    pub fn new(rows: Vec<Vec<usize>>) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(argument(format!("need at least 2 rows, got {d}")));
        }
        let m = rows[0].len();
        if m == 0 {
            return Err(argument("need at least one column"));
        }
        if let Some(r) = rows.iter().position(|row| row.len() != m) {
            return Err(argument(format!(
                "row {} has {} entries, expected {m}",
                r + 1,
                rows[r].len()
            )));
        }
        Ok(Self {
            d,
            m,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    /// Build from a row-major flat buffer.
    pub fn from_flat(d: usize, m: usize, counts: Vec<usize>) -> Result<Self> {
        if d < 2 || m == 0 || counts.len() != d * m {
            return Err(argument(format!(
                "flat buffer of length {} does not describe a {d} x {m} table",
                counts.len()
            )));
        }
        Ok(Self { d, m, counts })
    }

    /// 2 x 2 table `[[s1, s2], [f1, f2]]`.
    pub fn two_by_two(s1: usize, f1: usize, s2: usize, f2: usize) -> Self {
        Self {
            d: 2,
            m: 2,
            counts: vec![s1, s2, f1, f2],
        }
    }

    /// Two-row table from per-column successes and failures.
    pub fn binomial(successes: &[usize], failures: &[usize]) -> Result<Self> {
        Self::new(vec![successes.to_vec(), failures.to_vec()])
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.counts[row * self.m + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: usize) {
        self.counts[row * self.m + col] = value;
    }

    pub fn row(&self, row: usize) -> &[usize] {
        &self.counts[row * self.m..(row + 1) * self.m]
    }

    pub fn column(&self, col: usize) -> Vec<usize> {
        (0..self.d).map(|r| self.get(r, col)).collect()
    }

    pub fn as_flat(&self) -> &[usize] {
        &self.counts
    }

    pub fn row_sums(&self) -> Vec<usize> {
        (0..self.d).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<usize> {
        (0..self.m)
            .map(|c| (0..self.d).map(|r| self.get(r, c)).sum())
            .collect()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// The marginal spec this table belongs to; fails on an empty column.
    pub fn marginals(&self) -> Result<MarginalSpec> {
        MarginalSpec::new(self.d, self.column_sums())
    }

    /// `(s1, f1, s2, f2)` of a 2 x 2 table.
    pub fn as_two_by_two(&self) -> Result<(usize, usize, usize, usize)> {
        if self.d != 2 || self.m != 2 {
            return Err(argument(format!(
                "expected a 2 x 2 table, got {} x {}",
                self.d, self.m
            )));
        }
        Ok((self.get(0, 0), self.get(1, 0), self.get(0, 1), self.get(1, 1)))
    }

    /// Rows swapped in reverse order (successes <-> failures for d = 2).
    pub fn reversed_rows(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.d {
            for c in 0..self.m {
                out.set(r, c, self.get(self.d - 1 - r, c));
            }
        }
        out
    }

    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.d];
        if perm.len() != self.d || perm.iter().any(|&p| p >= self.d || std::mem::replace(&mut seen[p], true)) {
            return Err(argument("row permutation is not a permutation"));
        }
        let mut out = self.clone();
        for (r, &src) in perm.iter().enumerate() {
            for c in 0..self.m {
                out.set(r, c, self.get(src, c));
            }
        }
        Ok(out)
    }
}

/// Formats as `r1c1,r1c2;r2c1,r2c2`.
impl fmt::Display for TableCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.d {
            if r > 0 {
                f.write_str(";")?;
            }
            for (c, v) in self.row(r).iter().enumerate() {
                if c > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_degenerate() {
        assert!(TableCounts::new(vec![vec![1, 2], vec![3]]).is_err());
        assert!(TableCounts::new(vec![vec![1, 2]]).is_err());
        assert!(TableCounts::new(vec![vec![], vec![]]).is_err());
        assert!(MarginalSpec::new(1, vec![3]).is_err());
        assert!(MarginalSpec::new(2, vec![3, 0]).is_err());
        assert!(MarginalSpec::new(2, vec![]).is_err());
    }

    #[test]
    fn sums_and_layout() {
        let t = TableCounts::binomial(&[0, 0], &[10, 7]).unwrap();
        assert_eq!(t.column_sums(), vec![10, 7]);
        assert_eq!(t.row_sums(), vec![0, 17]);
        assert_eq!(t.as_two_by_two().unwrap(), (0, 10, 0, 7));
        assert_eq!(t.to_string(), "0,0;10,7");
        assert_eq!(t.reversed_rows().to_string(), "10,7;0,0");
        assert_eq!(t.marginals().unwrap(), MarginalSpec::binomial(vec![10, 7]).unwrap());
    }

    #[test]
    fn permutation_checks() {
        let t = TableCounts::new(vec![vec![1], vec![2], vec![3]]).unwrap();
        assert_eq!(t.permute_rows(&[2, 0, 1]).unwrap().column(0), vec![3, 1, 2]);
        assert!(t.permute_rows(&[0, 0, 1]).is_err());
    }
}
