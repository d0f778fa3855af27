//! Binomial probabilities evaluated in log space.

use crate::scalar::Real;

fn ln_factorials<T: Real>(n: u32) -> Vec<T> {
    let mut table = Vec::with_capacity(n as usize + 1);
    let mut acc = T::zero();
    table.push(acc);
    for i in 1..=n {
        acc += T::count(i as usize).ln();
        table.push(acc);
    }
    table
}

/// `ln P(X = k)` for every `k` in `0..=n`, `X ~ Binomial(n, p)`.
pub fn log_pmf<T: Real>(n: u32, p: T) -> Vec<T> {
    let n_us = n as usize;
    if p <= T::zero() || p >= T::one() {
        let hit = if p <= T::zero() { 0 } else { n_us };
        return (0..=n_us)
            .map(|k| if k == hit { T::zero() } else { T::neg_infinity() })
            .collect();
    }
    let lf = ln_factorials::<T>(n);
    let lp = p.ln();
    let lq = (-p).ln_1p();
    (0..=n_us)
        .map(|k| lf[n_us] - lf[k] - lf[n_us - k] + T::count(k) * lp + T::count(n_us - k) * lq)
        .collect()
}

pub fn pmf<T: Real>(n: u32, p: T) -> Vec<T> {
    log_pmf(n, p).into_iter().map(exp_or_zero).collect()
}

fn log_sum_exp<T: Real>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + terms.iter().map(|&t| (t - max).exp()).sum::<T>().ln()
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn upper_tail<T: Real>(n: u32, k: u64, p: T) -> T {
    if k == 0 {
        return T::one();
    }
    if k > u64::from(n) {
        return T::zero();
    }
    let terms = log_pmf(n, p);
    exp_or_zero(log_sum_exp(&terms[k as usize..])).min(T::one())
}

fn exp_or_zero<T: Real>(x: T) -> T {
    if x == T::neg_infinity() {
        T::zero()
    } else {
        x.exp()
    }
}
