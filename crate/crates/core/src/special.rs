//! Log-space combinatorics: factorials, binomials, double factorials and
//! restricted integer partitions.

use std::f64::consts::{LN_2, PI};
use std::sync::{OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

const TABLE_SIZE: usize = 1 << 16;
const SERIES_FROM: u64 = 256;

fn stirling(n: u64) -> f64 {
    let x = n as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x
        + 0.5 * (2.0 * PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_SIZE);
        let mut acc = 0.0f64;
        t.push(0.0);
        for n in 1..TABLE_SIZE as u64 {
            if n < SERIES_FROM {
                acc += (n as f64).ln();
                t.push(acc);
            } else {
                t.push(stirling(n));
            }
        }
        t
    })
}

/// ln n!
#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < TABLE_SIZE {
        table()[n as usize]
    } else {
        stirling(n)
    }
}

/// ln C(n, k); negative infinity when k > n.
#[inline]
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln m!! for even m, i.e. (m/2) ln 2 + ln (m/2)!.
#[inline]
pub fn ln_double_factorial_even(m: u64) -> f64 {
    debug_assert!(m % 2 == 0);
    let h = m / 2;
    h as f64 * LN_2 + ln_factorial(h)
}

/// Largest `m` for which `ln q(m, n)` is taken from the exact table.
pub const EXACT_PARTITION_LIMIT: u64 = 4096;

struct PartitionTable {
    max_m: u64,
    max_n: u64,
    // cols[n - 1][m - n] = ln q(m, n) for n <= m <= max_m
    cols: Vec<Vec<f64>>,
}

impl PartitionTable {
    fn covers(&self, m: u64, n: u64) -> bool {
        m <= self.max_m && n <= self.max_n
    }

    fn get(&self, m: u64, n: u64) -> f64 {
        self.cols[(n - 1) as usize][(m - n) as usize]
    }

    fn build(max_m: u64, max_n: u64) -> Self {
        let len = max_m as usize + 1;
        let mut col: Vec<BigUint> = (0..len).map(|m| if m == 0 { BigUint::one() } else { BigUint::zero() }).collect();
        let mut cols = Vec::with_capacity(max_n as usize);
        for n in 1..=max_n as usize {
            for m in n..len {
                let (lo, hi) = col.split_at_mut(m);
                hi[0] += &lo[m - n];
            }
            cols.push(col[n..].iter().map(ln_big).collect());
        }
        PartitionTable { max_m, max_n, cols }
    }
}

fn ln_big(x: &BigUint) -> f64 {
    match x.to_f64() {
        Some(v) if v.is_finite() => v.ln(),
        _ => {
            let bits = x.bits();
            let shift = bits.saturating_sub(64);
            let top = (x >> shift).to_f64().unwrap_or(f64::MAX);
            top.ln() + shift as f64 * LN_2
        }
    }
}

fn partition_table() -> &'static RwLock<PartitionTable> {
    static Q: OnceLock<RwLock<PartitionTable>> = OnceLock::new();
    Q.get_or_init(|| RwLock::new(PartitionTable::build(64, 64)))
}

/// ln q(m, n), the log number of partitions of `m` into at most `n` parts.
///
/// Exact for `m <= EXACT_PARTITION_LIMIT`, from a shared table grown on
/// demand. Larger `m` use the uniform asymptotic expansion of Szekeres.
pub fn ln_restricted_partitions(m: u64, n: u64) -> f64 {
    let n = n.min(m);
    if m == 0 {
        return 0.0;
    }
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    if n == 1 {
        return 0.0;
    }
    if m > EXACT_PARTITION_LIMIT {
        return ln_restricted_partitions_asymptotic(m, n);
    }
    {
        let t = partition_table().read().expect("partition table poisoned");
        if t.covers(m, n) {
            return t.get(m, n);
        }
    }
    let mut t = partition_table().write().expect("partition table poisoned");
    if !t.covers(m, n) {
        let max_m = (t.max_m * 2).max(m).min(EXACT_PARTITION_LIMIT);
        let max_n = (t.max_n * 2).max(n).min(max_m);
        *t = PartitionTable::build(max_m, max_n);
    }
    t.get(m, n)
}

/// Exact q(m, n) with arbitrary precision, computed afresh.
pub fn restricted_partitions_exact(m: u64, n: u64) -> BigUint {
    let n = n.min(m) as usize;
    let len = m as usize + 1;
    let mut col: Vec<BigUint> = (0..len).map(|i| if i == 0 { BigUint::one() } else { BigUint::zero() }).collect();
    for k in 1..=n {
        for i in k..len {
            let (lo, hi) = col.split_at_mut(i);
            hi[0] += &lo[i - k];
        }
    }
    col[m as usize].clone()
}

/// Dilogarithm Li2(z) for z in [0, 1].
pub fn dilog(z: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&z));
    if z == 1.0 {
        return PI * PI / 6.0;
    }
    if z > 0.5 {
        let w = 1.0 - z;
        return PI * PI / 6.0 - z.ln() * w.ln() - dilog_series(w);
    }
    dilog_series(z)
}

fn dilog_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut p = z;
    let mut k = 1.0f64;
    while p > 1e-18 * k * k {
        sum += p / (k * k);
        p *= z;
        k += 1.0;
    }
    sum
}

fn ln_restricted_partitions_asymptotic(m: u64, n: u64) -> f64 {
    let mf = m as f64;
    let nf = n as f64;
    if nf < mf.powf(0.25) {
        return ln_binomial(m - 1, n - 1) - ln_factorial(n);
    }
    let u = nf / mf.sqrt();
    let mut v = u;
    for _ in 0..10_000 {
        let next = u * dilog(1.0 - (-v).exp()).sqrt();
        let done = (next - v).abs() < 1e-12;
        v = next;
        if done {
            break;
        }
    }
    let lf = v.ln() - 0.5 * (-(-v).exp() * (1.0 + u * u / 2.0)).ln_1p() - 1.5 * LN_2 - u.ln() - PI.ln();
    let g = 2.0 * v / u - u * (-(-v).exp()).ln_1p();
    lf - mf.ln() + mf.sqrt() * g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partitions_brute(m: u64, max_part: u64, parts_left: u64) -> u64 {
        if m == 0 {
            return 1;
        }
        if parts_left == 0 {
            return 0;
        }
        (1..=max_part.min(m)).map(|p| partitions_brute(m - p, p, parts_left - 1)).sum()
    }

    #[test]
    fn factorial_matches_direct_sum() {
        let mut acc = 0.0;
        for n in 1..5000u64 {
            acc += (n as f64).ln();
            assert!((ln_factorial(n) - acc).abs() < 1e-9 * acc.max(1.0));
        }
        assert_eq!(ln_factorial(0), 0.0);
        let big = 1u64 << 20;
        let x = big as f64;
        assert!((ln_factorial(big) - ln_factorial(big - 1) - x.ln()).abs() < 1e-8);
    }

    #[test]
    fn small_partition_values() {
        assert!((ln_restricted_partitions(4, 2) - 3f64.ln()).abs() < 1e-12);
        assert!((ln_restricted_partitions(5, 5) - 7f64.ln()).abs() < 1e-12);
        for m in 0..40 {
            assert_eq!(ln_restricted_partitions(m, 1), 0.0);
        }
        assert_eq!(ln_restricted_partitions(0, 0), 0.0);
        assert_eq!(ln_restricted_partitions(3, 0), f64::NEG_INFINITY);
        assert!((ln_restricted_partitions(3, 9) - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exact_table_matches_enumeration() {
        for m in 0..=30u64 {
            for n in 0..=32u64 {
                let brute = partitions_brute(m, m, n);
                assert_eq!(restricted_partitions_exact(m, n), BigUint::from(brute));
                let l = ln_restricted_partitions(m, n);
                if brute == 0 {
                    assert_eq!(l, f64::NEG_INFINITY);
                } else {
                    assert!((l - (brute as f64).ln()).abs() < 1e-12, "{m} {n}");
                }
            }
        }
    }

    #[test]
    fn monotone_in_parts() {
        for m in [17u64, 100, 333] {
            let mut prev = f64::NEG_INFINITY;
            for n in 0..=m + 2 {
                let v = ln_restricted_partitions(m, n);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn table_growth_is_consistent() {
        let a = ln_restricted_partitions(700, 300);
        let exact = ln_big(&restricted_partitions_exact(700, 300));
        assert!((a - exact).abs() < 1e-10);
    }

    #[test]
    fn dilog_reference_values() {
        assert!((dilog(0.5) - (PI * PI / 12.0 - LN_2 * LN_2 / 2.0)).abs() < 1e-14);
        assert!((dilog(1.0) - PI * PI / 6.0).abs() < 1e-15);
        assert_eq!(dilog(0.0), 0.0);
        // Li2(0.9) reference
        assert!((dilog(0.9) - 1.299_714_723_004_958_8).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_agrees_with_exact_near_limit() {
        let m = EXACT_PARTITION_LIMIT;
        for n in [2u64, 5, 30, 200, 1000, 4096] {
            let exact = ln_restricted_partitions(m, n);
            let approx = ln_restricted_partitions_asymptotic(m, n);
            assert!((exact - approx).abs() < 0.02, "n={n}: {exact} vs {approx}");
        }
    }
}
