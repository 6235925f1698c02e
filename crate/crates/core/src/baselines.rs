//! Fisher's and Barnard's exact tests for 2 x 2 tables, used as power
//! comparison baselines.

use crate::enumerate::TIE_TOLERANCE;
use crate::error::Result;
use crate::logfact::LogFactorialTable;
use crate::sum::NeumaierSum;
use crate::table::TableCounts;

pub const DEFAULT_BARNARD_GRID: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherSided {
    Two,
    /// Upper tail of the success count in the first column.
    Greater,
}

/// Fisher's exact test with both margins fixed.
///
/// The two-sided p-value sums every conditional table no more probable
/// than the observed one. A table with an empty row or column gives 1.
pub fn fisher_pvalue(t: &TableCounts, sided: FisherSided) -> Result<f64> {
    let (a, c, b, d) = t.as_two_by_two()?;
    let n1 = a + c;
    let row1 = a + b;
    let n = a + b + c + d;
    if n1 == 0 || b + d == 0 || row1 == 0 || c + d == 0 {
        return Ok(1.0);
    }
    let lf = LogFactorialTable::new(n);
    let log_hyper = |x: usize| {
        lf.lf(row1) - lf.lf(x) - lf.lf(row1 - x) + lf.lf(n - row1) - lf.lf(n1 - x)
            - lf.lf(n + x - row1 - n1)
            - (lf.lf(n) - lf.lf(n1) - lf.lf(n - n1))
    };
    let lo = n1.saturating_sub(n - row1);
    let hi = row1.min(n1);
    let observed = log_hyper(a);
    let mut sum = NeumaierSum::new();
    for x in lo..=hi {
        let lp = log_hyper(x);
        let keep = match sided {
            FisherSided::Two => lp <= observed + TIE_TOLERANCE,
            FisherSided::Greater => x >= a,
        };
        if keep {
            sum.add(lp.exp());
        }
    }
    Ok(sum.value().min(1.0))
}

/// Pooled-variance score statistic `|p1 - p2| / sqrt(p (1-p) (1/n1 + 1/n2))`,
/// zero when the pooled proportion is 0 or 1.
pub fn score_statistic(s1: usize, n1: usize, s2: usize, n2: usize) -> f64 {
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    if pooled <= 0.0 || pooled >= 1.0 {
        return 0.0;
    }
    let diff = s1 as f64 / n1 as f64 - s2 as f64 / n2 as f64;
    diff.abs() / (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarnardOptions {
    /// Nuisance values at the midpoints `(k - 0.5) / grid_points`.
    pub grid_points: usize,
    /// Polish the best grid point with a golden-section search over its
    /// neighbouring cells.
    pub refine: bool,
}

impl Default for BarnardOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_BARNARD_GRID,
            refine: true,
        }
    }
}

/// Barnard's unconditional test with column margins fixed, maximizing the
/// rejection-region probability over the nuisance success rate.
pub fn barnard_pvalue(t: &TableCounts, grid_points: usize) -> Result<f64> {
    barnard_pvalue_with(
        t,
        &BarnardOptions {
            grid_points,
            ..BarnardOptions::default()
        },
    )
}

pub fn barnard_pvalue_with(t: &TableCounts, opts: &BarnardOptions) -> Result<f64> {
    let (s1, f1, s2, f2) = t.as_two_by_two()?;
    if opts.grid_points < 2 {
        return Err(crate::error::argument("Barnard grid needs at least 2 points"));
    }
    let (n1, n2) = (s1 + f1, s2 + f2);
    if n1 == 0 || n2 == 0 {
        return Ok(1.0);
    }
    let n = n1 + n2;
    let lf = LogFactorialTable::new(n);
    let observed = score_statistic(s1, n1, s2, n2);
    // (successes, failures, ln C(n1,u1) C(n2,u2)) of the rejection region
    let mut region = Vec::new();
    for u1 in 0..=n1 {
        for u2 in 0..=n2 {
            if score_statistic(u1, n1, u2, n2) >= observed - 1e-12 {
                let lc = lf.log_binomial(n1, u1)? + lf.log_binomial(n2, u2)?;
                region.push(((u1 + u2) as f64, (n - u1 - u2) as f64, lc));
            }
        }
    }
    let mass = |theta: f64| -> f64 {
        let (lt, lu) = (theta.ln(), (1.0 - theta).ln());
        region
            .iter()
            .map(|&(s, f, lc)| (lc + s * lt + f * lu).exp())
            .collect::<NeumaierSum>()
            .value()
    };

    let g = opts.grid_points;
    let theta_at = |k: usize| (k as f64 - 0.5) / g as f64;
    let (mut best_k, mut best) = (1, f64::NEG_INFINITY);
    for k in 1..=g {
        let v = mass(theta_at(k));
        if v > best {
            best = v;
            best_k = k;
        }
    }
    if opts.refine {
        let lo = if best_k > 1 { theta_at(best_k - 1) } else { theta_at(1) * 1e-3 };
        let hi = if best_k < g { theta_at(best_k + 1) } else { 1.0 - (1.0 - theta_at(g)) * 1e-3 };
        best = best.max(golden_max(&mass, lo, hi));
    }
    Ok(best.min(1.0))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a < 1e-13 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}
