//! Table simulation under null and alternative models, and ROC/power
//! summaries of competing tests.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{barnard_pvalue, fisher_pvalue, FisherSided, DEFAULT_BARNARD_GRID};
use crate::enumerate::{two_sided_pvalue, PValueOptions};
use crate::error::{argument, Error, Result};
use crate::table::{MarginalSpec, TableCounts};

/// Simulations drawn from one RNG substream. Fixed so the stream does not
/// depend on the number of workers.
pub const SHARD_SIZE: usize = 1024;

/// Outcome probabilities for one experiment, kept alongside the sorted cut
/// points that define the outcome intervals `[r_{i-1}, r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    p: Vec<f64>,
    cuts: Vec<f64>,
}

impl ProbabilityVector {
    /// From explicit probabilities; they must lie in `[0, 1]` and sum to 1
    /// within `1e-12`.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(argument("a probability vector needs at least 2 outcomes"));
        }
        if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(argument("probabilities must lie in [0, 1]"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(argument(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cuts = p[..p.len() - 1]
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        Ok(Self { p, cuts })
    }

    /// From `d - 1` cut points in `[0, 1]`, in any order.
    pub fn from_cut_points(mut cuts: Vec<f64>) -> Result<Self> {
        if cuts.is_empty() {
            return Err(argument("need at least one cut point"));
        }
        if cuts.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(argument("cut points must lie in [0, 1]"));
        }
        cuts.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        let mut p: Vec<f64> = cuts
            .iter()
            .map(|&r| {
                let width = r - prev;
                prev = r;
                width
            })
            .collect();
        p.push(1.0 - prev);
        Ok(Self { p, cuts })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn cut_points(&self) -> &[f64] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Outcome index of a trial number `u` in `[0, 1)`.
    #[inline]
    pub fn outcome(&self, u: f64) -> usize {
        self.cuts.partition_point(|&r| r <= u)
    }
}

/// Draw `d - 1` uniforms, sort them, and use the gaps as probabilities.
pub fn assign_probabilities<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<ProbabilityVector> {
    if d < 2 {
        return Err(argument("need at least 2 outcomes"));
    }
    let cuts = (0..d - 1).map(|_| rng.random::<f64>()).collect();
    ProbabilityVector::from_cut_points(cuts)
}

/// `n` categorical trials by interval membership; returns per-outcome counts.
pub fn sample_column<R: Rng + ?Sized>(n: usize, pv: &ProbabilityVector, rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0; pv.len()];
    for _ in 0..n {
        counts[pv.outcome(rng.random::<f64>())] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    /// One probability vector per table, shared by every column.
    NullShared,
    /// A fresh probability vector for every column.
    AlternativeIndependent,
    /// 2 x 2 only: column 1 gets the larger of two uniform success rates.
    OneSidedNull,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::NullShared => "null",
            Hypothesis::AlternativeIndependent => "alternative",
            Hypothesis::OneSidedNull => "one-sided-null",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" | "null_shared" => Ok(Hypothesis::NullShared),
            "alternative" | "alternative_independent" => Ok(Hypothesis::AlternativeIndependent),
            "one-sided-null" | "one_sided_null" => Ok(Hypothesis::OneSidedNull),
            _ => Err(argument(format!("unknown hypothesis '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: MarginalSpec,
    pub n_sims: usize,
    pub hypothesis: Hypothesis,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_sims == 0 {
            return Err(argument("need at least one simulation"));
        }
        if self.hypothesis == Hypothesis::OneSidedNull
            && (self.spec.rows() != 2 || self.spec.cols() != 2)
        {
            return Err(argument("the one-sided null model needs a 2 x 2 table"));
        }
        Ok(())
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for substream `shard` of `seed`.
pub fn shard_rng(seed: u64, shard: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed) ^ shard.wrapping_mul(0xD605_BBB5_8C8A_BBA5)))
}

fn simulate_one<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> TableCounts {
    let d = cfg.spec.rows();
    let marg = cfg.spec.marginals();
    let m = marg.len();
    let mut table = TableCounts::from_flat(d, m, vec![0; d * m]).expect("valid spec");
    let mut fill = |c: usize, col: Vec<usize>| {
        for (r, v) in col.into_iter().enumerate() {
            table.set(r, c, v);
        }
    };
    match cfg.hypothesis {
        Hypothesis::NullShared => {
            let pv = assign_probabilities(d, rng).expect("d >= 2");
            for (c, &n) in marg.iter().enumerate() {
                fill(c, sample_column(n, &pv, rng));
            }
        }
        Hypothesis::AlternativeIndependent => {
            for (c, &n) in marg.iter().enumerate() {
                let pv = assign_probabilities(d, rng).expect("d >= 2");
                fill(c, sample_column(n, &pv, rng));
            }
        }
        Hypothesis::OneSidedNull => {
            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            let rates = [u.max(v), u.min(v)];
            for (c, &n) in marg.iter().enumerate() {
                let pv = ProbabilityVector::from_cut_points(vec![rates[c]]).expect("rate in [0,1)");
                fill(c, sample_column(n, &pv, rng));
            }
        }
    }
    table
}

/// Lazily generated stream of `n_sims` simulated tables.
#[derive(Debug, Clone)]
pub struct Simulation {
    cfg: SimConfig,
    rng: ChaCha8Rng,
    produced: usize,
}

impl Iterator for Simulation {
    type Item = TableCounts;

    fn next(&mut self) -> Option<TableCounts> {
        if self.produced == self.cfg.n_sims {
            return None;
        }
        if self.produced.is_multiple_of(SHARD_SIZE) {
            self.rng = shard_rng(self.cfg.seed, (self.produced / SHARD_SIZE) as u64);
        }
        self.produced += 1;
        Some(simulate_one(&self.cfg, &mut self.rng))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.cfg.n_sims - self.produced;
        (left, Some(left))
    }
}

pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    Ok(Simulation {
        cfg: cfg.clone(),
        rng: shard_rng(cfg.seed, 0),
        produced: 0,
    })
}

/// Same stream as [`simulate`], generated shard-parallel.
pub fn simulate_parallel(cfg: &SimConfig) -> Result<Vec<TableCounts>> {
    cfg.validate()?;
    let shards = cfg.n_sims.div_ceil(SHARD_SIZE);
    let chunks: Vec<Vec<TableCounts>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = shard_rng(cfg.seed, s as u64);
            let len = SHARD_SIZE.min(cfg.n_sims - s * SHARD_SIZE);
            (0..len).map(|_| simulate_one(cfg, &mut rng)).collect()
        })
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub alpha: f64,
    pub test: String,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerCurve {
    pub rows: Vec<PowerRow>,
}

impl PowerCurve {
    pub fn for_test<'a>(&'a self, test: &'a str) -> impl Iterator<Item = &'a PowerRow> + 'a {
        self.rows.iter().filter(move |r| r.test == test)
    }

    pub fn row(&self, test: &str, alpha: f64) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.test == test && r.alpha == alpha)
    }
}

fn fraction_at_most(sorted: &[f64], alpha: f64) -> f64 {
    sorted.partition_point(|&p| p <= alpha) as f64 / sorted.len() as f64
}

fn sorted(ps: &[f64]) -> Vec<f64> {
    let mut v = ps.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// False and true positive rates of one test at each significance level.
pub fn roc_power(test: &str, p_null: &[f64], p_alt: &[f64], alphas: &[f64]) -> Result<PowerCurve> {
    if p_null.is_empty() || p_alt.is_empty() || alphas.is_empty() {
        return Err(argument("power curves need nonempty p-value and alpha lists"));
    }
    if alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) || alphas.windows(2).any(|w| w[0] > w[1]) {
        return Err(argument("alphas must be ascending within (0, 1]"));
    }
    let (null, alt) = (sorted(p_null), sorted(p_alt));
    Ok(PowerCurve {
        rows: alphas
            .iter()
            .map(|&alpha| PowerRow {
                alpha,
                test: test.to_string(),
                tpr: fraction_at_most(&alt, alpha),
                fpr: fraction_at_most(&null, alpha),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Full empirical ROC: one point per distinct p-value threshold, from
/// `(0, 0)` to `(1, 1)`.
pub fn roc_curve(p_null: &[f64], p_alt: &[f64]) -> Vec<RocPoint> {
    let (null, alt) = (sorted(p_null), sorted(p_alt));
    let mut thresholds: Vec<f64> = null.iter().chain(&alt).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut pts = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    pts.extend(thresholds.into_iter().map(|t| RocPoint {
        fpr: fraction_at_most(&null, t),
        tpr: fraction_at_most(&alt, t),
    }));
    pts.push(RocPoint { fpr: 1.0, tpr: 1.0 });
    pts
}

/// TPR at a given FPR, linearly interpolated between ROC points.
pub fn tpr_at_fpr(curve: &[RocPoint], fpr: f64) -> f64 {
    let mut best = 0.0f64;
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        if fpr < a.fpr || fpr > b.fpr {
            continue;
        }
        let t = if b.fpr > a.fpr {
            a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr)
        } else {
            a.tpr.max(b.tpr)
        };
        best = best.max(t);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    MTest,
    Fisher,
    Barnard,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::MTest => "mtest",
            TestKind::Fisher => "fisher",
            TestKind::Barnard => "barnard",
        }
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mtest" | "m-test" => Ok(TestKind::MTest),
            "fisher" => Ok(TestKind::Fisher),
            "barnard" => Ok(TestKind::Barnard),
            _ => Err(argument(format!("unknown test '{s}'"))),
        }
    }
}

/// Two-sided p-value of `t` under `test`.
pub fn test_pvalue(test: TestKind, t: &TableCounts, opts: &PValueOptions, barnard_grid: usize) -> Result<f64> {
    match test {
        TestKind::MTest => Ok(two_sided_pvalue(t, opts)?.p_value),
        TestKind::Fisher => fisher_pvalue(t, FisherSided::Two),
        TestKind::Barnard => barnard_pvalue(t, barnard_grid),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudy {
    pub spec: MarginalSpec,
    pub n_sims: usize,
    /// Null tables use this seed; alternative tables use `splitmix64(seed)`.
    pub seed: u64,
    pub tests: Vec<TestKind>,
    pub alphas: Vec<f64>,
    pub barnard_grid: usize,
    pub pvalue: PValueOptions,
}

impl PowerStudy {
    pub fn new(spec: MarginalSpec, n_sims: usize, seed: u64) -> Self {
        Self {
            spec,
            n_sims,
            seed,
            tests: vec![TestKind::MTest, TestKind::Fisher, TestKind::Barnard],
            alphas: vec![0.01, 0.05, 0.1],
            barnard_grid: DEFAULT_BARNARD_GRID,
            pvalue: PValueOptions {
                threads: Some(1),
                ..PValueOptions::default()
            },
        }
    }

    pub fn alternative_seed(&self) -> u64 {
        splitmix64(self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudyResult {
    pub curve: PowerCurve,
    /// Per test, in `tests` order.
    pub null_pvalues: Vec<Vec<f64>>,
    pub alt_pvalues: Vec<Vec<f64>>,
}

impl PowerStudyResult {
    pub fn roc(&self, test_index: usize) -> Vec<RocPoint> {
        roc_curve(&self.null_pvalues[test_index], &self.alt_pvalues[test_index])
    }
}

/// Simulate null and alternative tables and evaluate every test on them.
/// Each distinct table is evaluated once.
pub fn run_power_study(study: &PowerStudy) -> Result<PowerStudyResult> {
    let null = simulate_parallel(&SimConfig {
        spec: study.spec.clone(),
        n_sims: study.n_sims,
        hypothesis: Hypothesis::NullShared,
        seed: study.seed,
    })?;
    let alt = simulate_parallel(&SimConfig {
        spec: study.spec.clone(),
        n_sims: study.n_sims,
        hypothesis: Hypothesis::AlternativeIndependent,
        seed: study.alternative_seed(),
    })?;
    let mut distinct: Vec<&TableCounts> = null.iter().chain(&alt).collect();
    distinct.sort_by(|a, b| a.as_flat().cmp(b.as_flat()));
    distinct.dedup();

    let mut curve = PowerCurve::default();
    let mut null_pvalues = Vec::new();
    let mut alt_pvalues = Vec::new();
    for &test in &study.tests {
        let values: Vec<f64> = distinct
            .par_iter()
            .map(|t| test_pvalue(test, t, &study.pvalue, study.barnard_grid))
            .collect::<Result<_>>()?;
        let lookup: HashMap<&TableCounts, f64> = distinct.iter().copied().zip(values).collect();
        let pn: Vec<f64> = null.iter().map(|t| lookup[t]).collect();
        let pa: Vec<f64> = alt.iter().map(|t| lookup[t]).collect();
        curve.rows.extend(roc_power(test.name(), &pn, &pa, &study.alphas)?.rows);
        null_pvalues.push(pn);
        alt_pvalues.push(pa);
    }
    Ok(PowerStudyResult {
        curve,
        null_pvalues,
        alt_pvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_points_define_intervals() {
        let pv = ProbabilityVector::from_cut_points(vec![0.3]).unwrap();
        assert_eq!(pv.probs(), &[0.3, 0.7]);
        let pv = ProbabilityVector::from_cut_points(vec![0.8, 0.2]).unwrap();
        let p = pv.probs();
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15 && (p[2] - 0.2).abs() < 1e-15);
        assert_eq!(pv.outcome(0.0), 0);
        assert_eq!(pv.outcome(0.2), 1);
        assert_eq!(pv.outcome(0.79), 1);
        assert_eq!(pv.outcome(0.8), 2);
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbabilityVector::new(vec![1.0]).is_err());
        assert!(ProbabilityVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityVector::from_cut_points(vec![]).is_err());
        assert!(ProbabilityVector::from_cut_points(vec![1.2]).is_err());
    }

    #[test]
    fn degenerate_column() {
        let pv = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let mut rng = shard_rng(7, 0);
        assert_eq!(sample_column(5, &pv, &mut rng), vec![5, 0]);
    }

    #[test]
    fn seeded_columns_repeat() {
        let pv = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let a = sample_column(10, &pv, &mut shard_rng(3, 1));
        let b = sample_column(10, &pv, &mut shard_rng(3, 1));
        assert_eq!(a, b);
        assert_eq!(a.iter().sum::<usize>(), 10);
    }

    #[test]
    fn config_validation() {
        let spec = MarginalSpec::new(3, vec![2, 2]).unwrap();
        let cfg = SimConfig {
            spec,
            n_sims: 5,
            hypothesis: Hypothesis::OneSidedNull,
            seed: 1,
        };
        assert!(simulate(&cfg).is_err());
        let cfg = SimConfig {
            n_sims: 0,
            hypothesis: Hypothesis::NullShared,
            ..cfg
        };
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn roc_power_examples() {
        let c = roc_power("t", &[0.01, 0.5, 1.0], &[0.01, 0.02, 0.9], &[0.05, 1.0]).unwrap();
        assert!((c.rows[0].fpr - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.rows[0].tpr - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((c.rows[1].fpr, c.rows[1].tpr), (1.0, 1.0));
        assert!(roc_power("t", &[], &[0.1], &[0.05]).is_err());
        assert!(roc_power("t", &[0.1], &[0.1], &[0.1, 0.05]).is_err());
        assert!(roc_power("t", &[0.1], &[0.1], &[0.0]).is_err());
    }

    #[test]
    fn roc_interpolation() {
        let curve = roc_curve(&[0.1, 0.5, 0.9, 1.0], &[0.01, 0.1, 0.2, 1.0]);
        assert_eq!(curve.first().unwrap().fpr, 0.0);
        assert_eq!(curve.last().unwrap().tpr, 1.0);
        assert_eq!(tpr_at_fpr(&curve, 0.25), 0.75);
        assert!((tpr_at_fpr(&curve, 0.125) - 0.375).abs() < 1e-15);
        assert_eq!(tpr_at_fpr(&curve, 1.0), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for h in [Hypothesis::NullShared, Hypothesis::AlternativeIndependent, Hypothesis::OneSidedNull] {
            assert_eq!(h.name().parse::<Hypothesis>().unwrap(), h);
        }
        for t in [TestKind::MTest, TestKind::Fisher, TestKind::Barnard] {
            assert_eq!(t.name().parse::<TestKind>().unwrap(), t);
        }
        assert!("nope".parse::<TestKind>().is_err());
    }
}
