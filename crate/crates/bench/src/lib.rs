//! Fixed workloads shared by the benchmarks.

use mtest::TableCounts;

/// 2 x 2 table with both column marginals 400 (160,801 tables).
pub fn two_by_two_400() -> TableCounts {
    TableCounts::two_by_two(150, 250, 250, 150)
}

/// 2 x 5 table with every column marginal 16 (1,419,857 tables).
pub fn two_by_five_16() -> TableCounts {
    TableCounts::binomial(&[8, 6, 9, 7, 8], &[8, 10, 7, 9, 8]).expect("valid table")
}

/// 3 x 3 table with marginals 12 (753,571 tables).
pub fn three_by_three_12() -> TableCounts {
    TableCounts::new(vec![vec![5, 3, 4], vec![4, 5, 2], vec![3, 4, 6]]).expect("valid table")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_sizes() {
        let size = |t: &TableCounts| mtest::count_tables(&t.marginals().unwrap()).to_string();
        assert_eq!(size(&two_by_two_400()), "160801");
        assert_eq!(size(&two_by_five_16()), "1419857");
        assert_eq!(size(&three_by_three_12()), "753571");
    }
}
