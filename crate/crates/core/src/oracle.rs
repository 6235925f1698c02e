//! Exact rational and quadrature reference values.
//!
//! Nothing here is fast. Every function computes its value from the
//! integral definition through the Beta/Dirichlet identity
//! `∫ θ^a (1-θ)^b dθ = a! b! / (a+b+1)!`, independently of the log-space
//! kernels, so the kernels can be checked against it.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use crate::error::{argument, Error, Result};
use crate::table::TableCounts;

/// Default cap on the grand total `N` accepted by the rational oracles.
pub const DEFAULT_MAX_TOTAL: usize = 500;

/// Maximum bisection depth of the adaptive Simpson rule.
pub const QUADRATURE_MAX_DEPTH: u32 = 48;

pub fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Exact two-sided probability with a custom cost guard on `N`.
pub fn rational_two_sided_with_limit(t: &TableCounts, max_total: usize) -> Result<BigRational> {
    let n_total = t.total();
    if n_total > max_total {
        return Err(Error::Capacity(format!(
            "rational oracle limited to N <= {max_total}, got {n_total}"
        )));
    }
    let d = t.rows();
    let mut num = factorial(d - 1);
    let mut den = factorial(n_total + d - 1);
    for c in 0..t.cols() {
        let col = t.column(c);
        num *= factorial(col.iter().sum());
        for o in col {
            den *= factorial(o);
        }
    }
    for r in t.row_sums() {
        num *= factorial(r);
    }
    Ok(ratio(num, den))
}

/// Exact `(d-1)! · Π_j multinomial(n_j; o_·j) · Π_r R_r! / (N+d-1)!`.
pub fn rational_two_sided(t: &TableCounts) -> Result<BigRational> {
    rational_two_sided_with_limit(t, DEFAULT_MAX_TOTAL)
}

/// Exact one-sided probability `P⁻`, expanding the inner integral with the
/// binomial theorem and integrating each outer term as a Beta integral.
pub fn rational_one_sided(s1: usize, f1: usize, s2: usize, f2: usize) -> Result<BigRational> {
    let n_total = s1 + f1 + s2 + f2;
    if n_total > DEFAULT_MAX_TOTAL {
        return Err(Error::Capacity(format!(
            "rational oracle limited to N <= {DEFAULT_MAX_TOTAL}, got {n_total}"
        )));
    }
    let mut acc = BigRational::zero();
    for k in 0..=f2 {
        // ∫ θ^{s1} (1-θ)^{f1} · θ^{s2+k+1} / (s2+k+1) dθ
        let a = s1 + s2 + k + 1;
        let beta = ratio(factorial(a) * factorial(f1), factorial(a + f1 + 1));
        let term = BigRational::from_integer(binomial(f2, k)) * beta / int(s2 + k + 1);
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    let prefactor = binomial(s1 + f1, s1) * binomial(s2 + f2, s2);
    Ok(acc * BigRational::from_integer(prefactor))
}

/// Exact version of the multiplicative step: moves one count of `col` from
/// `row_from` to `row_to`, given the exact probability `p` of `t`.
pub fn rational_two_sided_step(
    t: &TableCounts,
    p: &BigRational,
    col: usize,
    row_to: usize,
    row_from: usize,
) -> Result<BigRational> {
    let from = t.get(row_from, col);
    if from == 0 || row_to == row_from {
        return Err(argument("step needs a nonzero source cell and distinct rows"));
    }
    let sums = t.row_sums();
    let factor = ratio(
        BigInt::from(from) * BigInt::from(1 + sums[row_to]),
        BigInt::from(t.get(row_to, col) + 1) * BigInt::from(sums[row_from]),
    );
    Ok(p * factor)
}

/// Exact `P⁻` of the all-extreme table `s1=0, f1=n1, s2=n2, f2=0`.
pub fn rational_one_sided_base(n1: usize, n2: usize) -> BigRational {
    let n = n1 + n2;
    ratio(
        BigInt::one(),
        BigInt::from(n + 1) * BigInt::from(n + 2) * binomial(n, n1),
    )
}

fn rational_two_sided_2x2(s1: usize, f1: usize, s2: usize, f2: usize) -> BigRational {
    let n = s1 + f1 + s2 + f2;
    ratio(
        binomial(s1 + f1, s1) * binomial(s2 + f2, s2) * factorial(s1 + s2) * factorial(f1 + f2),
        factorial(n + 1),
    )
}

/// `P⁻(s1+1, f1-1, s2, f2) = P⁻(s1, f1, s2, f2) + P(s1+1, f1, s2, f2) / (n1+1)`.
pub fn rational_one_sided_step_s1(
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    pm: &BigRational,
) -> Result<BigRational> {
    if f1 == 0 {
        return Err(argument("s1 step needs f1 >= 1"));
    }
    Ok(pm + rational_two_sided_2x2(s1 + 1, f1, s2, f2) / int(s1 + f1 + 1))
}

/// `P⁻(s1, f1, s2-1, f2+1) = P⁻(s1, f1, s2, f2) + P(s1, f1, s2, f2+1) / (n2+1)`.
pub fn rational_one_sided_step_s2(
    s1: usize,
    f1: usize,
    s2: usize,
    f2: usize,
    pm: &BigRational,
) -> Result<BigRational> {
    if s2 == 0 {
        return Err(argument("s2 step needs s2 >= 1"));
    }
    Ok(pm + rational_two_sided_2x2(s1, f1, s2, f2 + 1) / int(s2 + f2 + 1))
}

/// Exact `P⁻` obtained by walking the additive recurrences from the base
/// table: all `s1` increments first, then the `s2` decrements.
pub fn rational_one_sided_chain(s1: usize, f1: usize, s2: usize, f2: usize) -> Result<BigRational> {
    let (n1, n2) = (s1 + f1, s2 + f2);
    if n1 == 0 || n2 == 0 {
        return Err(argument("one-sided probabilities need n1, n2 >= 1"));
    }
    let mut p = rational_one_sided_base(n1, n2);
    for i in 0..s1 {
        p = rational_one_sided_step_s1(i, n1 - i, n2, 0, &p)?;
    }
    for k in 0..(n2 - s2) {
        p = rational_one_sided_step_s2(s1, f1, n2 - k, k, &p)?;
    }
    Ok(p)
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Adaptive Simpson evaluation of the two-sided integral for a two-row
/// table: `Π C(n_j, s_j) ∫ θ^S (1-θ)^F dθ`, absolute error at most `tol`.
pub fn quadrature_two_sided(t: &TableCounts, tol: f64) -> Result<f64> {
    if t.rows() != 2 {
        return Err(argument("quadrature oracle handles two-row tables only"));
    }
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(argument(format!("tolerance {tol} outside [1e-14, 1e-6]")));
    }
    let prefactor = (0..t.cols())
        .map(|c| to_f64(&BigRational::from_integer(binomial(t.get(0, c) + t.get(1, c), t.get(0, c)))))
        .product::<f64>();
    let s = t.row(0).iter().sum::<usize>() as i32;
    let f = t.row(1).iter().sum::<usize>() as i32;
    let integrand = |x: f64| prefactor * x.powi(s) * (1.0 - x).powi(f);
    adaptive_simpson(&integrand, 0.0, 1.0, tol)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, QUADRATURE_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Require at least a few levels so narrow peaks are not missed.
    if depth + 6 <= QUADRATURE_MAX_DEPTH && delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numeric(format!(
            "adaptive Simpson did not converge on [{a}, {b}]"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn two_sided_worked_values() {
        let t = TableCounts::binomial(&[0, 0], &[10, 7]).unwrap();
        assert_eq!(rational_two_sided(&t).unwrap(), q(1, 18));
        let t = TableCounts::binomial(&[1, 0], &[0, 1]).unwrap();
        assert_eq!(rational_two_sided(&t).unwrap(), q(1, 6));
        let t = TableCounts::new(vec![vec![1], vec![1], vec![0]]).unwrap();
        assert_eq!(rational_two_sided(&t).unwrap(), q(1, 6));
        let t = TableCounts::new(vec![vec![2], vec![0], vec![0]]).unwrap();
        assert_eq!(rational_two_sided(&t).unwrap(), q(1, 6));
    }

    #[test]
    fn one_sided_worked_values() {
        assert_eq!(rational_one_sided(0, 1, 1, 0).unwrap(), q(1, 24));
        assert_eq!(rational_one_sided(1, 0, 0, 1).unwrap(), q(5, 24));
        assert_eq!(rational_one_sided(1, 0, 1, 0).unwrap(), q(1, 8));
        assert_eq!(rational_one_sided(0, 1, 0, 1).unwrap(), q(1, 8));
        assert_eq!(rational_one_sided_base(1, 1), q(1, 24));
        assert_eq!(rational_one_sided_base(1, 2), q(1, 60));
        assert_eq!(
            rational_one_sided(0, 10, 7, 0).unwrap(),
            BigRational::new(BigInt::one(), BigInt::from(18 * 19) * binomial(17, 10))
        );
    }

    #[test]
    fn one_sided_sums_to_half() {
        let (n1, n2) = (3, 2);
        let mut acc = BigRational::zero();
        for s1 in 0..=n1 {
            for s2 in 0..=n2 {
                acc += rational_one_sided(s1, n1 - s1, s2, n2 - s2).unwrap();
            }
        }
        assert_eq!(acc, q(1, 2));
    }

    #[test]
    fn chain_equals_expansion() {
        for n1 in 1..=4 {
            for n2 in 1..=4 {
                for s1 in 0..=n1 {
                    for s2 in 0..=n2 {
                        assert_eq!(
                            rational_one_sided_chain(s1, n1 - s1, s2, n2 - s2).unwrap(),
                            rational_one_sided(s1, n1 - s1, s2, n2 - s2).unwrap()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn step_guards() {
        let t = TableCounts::binomial(&[0], &[2]).unwrap();
        assert!(rational_two_sided_step(&t, &q(1, 3), 0, 1, 0).is_err());
        assert!(rational_one_sided_step_s1(1, 0, 0, 1, &q(5, 24)).is_err());
        assert!(rational_one_sided_step_s2(0, 1, 0, 1, &q(1, 8)).is_err());
    }

    #[test]
    fn guard_trips() {
        let t = TableCounts::binomial(&[300], &[300]).unwrap();
        assert!(matches!(rational_two_sided(&t), Err(Error::Capacity(_))));
    }

    #[test]
    fn to_f64_is_accurate() {
        assert_eq!(to_f64(&q(1, 6)), 1.0 / 6.0);
        assert_eq!(to_f64(&q(-5, 24)), -5.0 / 24.0);
        let huge = BigRational::new(BigInt::one(), factorial(150));
        let expected = -(1..=150).map(|k| (k as f64).ln()).sum::<f64>();
        assert!((to_f64(&huge).ln() - expected).abs() < 1e-10);
    }

    #[test]
    fn quadrature_values() {
        let t = TableCounts::binomial(&[1, 0], &[0, 1]).unwrap();
        let v = quadrature_two_sided(&t, 1e-12).unwrap();
        assert!((v - 1.0 / 6.0).abs() <= 1e-12);
        let t = TableCounts::binomial(&[0, 0], &[10, 7]).unwrap();
        let v = quadrature_two_sided(&t, 1e-10).unwrap();
        assert!((v - 1.0 / 18.0).abs() <= 1e-10);
        assert!(quadrature_two_sided(&t, 1e-3).is_err());
    }
}
