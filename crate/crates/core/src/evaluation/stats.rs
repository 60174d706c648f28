use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::EvalError;

/// ln(i!) for i in 0..=n, built by cumulative summation so that
/// `ln C(n, 0) = ln C(n, n) = 0` exactly.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        table.push(acc);
    }
    table
}

/// Exact upper tail P(X ≥ k) for X ~ Binomial(n, p0), summed in log space.
pub fn binomial_test_one_sided(k: u64, n: u64, p0: f64) -> Result<f64, EvalError> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(EvalError::InvalidInput(format!("p0 = {p0} is not a probability")));
    }
    if k > n {
        return Ok(0.0);
    }
    if k == 0 {
        return Ok(1.0);
    }
    if p0 == 0.0 {
        return Ok(0.0);
    }
    if p0 == 1.0 {
        return Ok(1.0);
    }
    let n_us = usize::try_from(n).map_err(|_| EvalError::InvalidInput("n too large".into()))?;
    let lf = ln_factorials(n_us);
    let (lp, lq) = (p0.ln(), (-p0).ln_1p());
    let terms: Vec<f64> = (k as usize..=n_us)
        .map(|i| lf[n_us] - lf[i] - lf[n_us - i] + i as f64 * lp + (n_us - i) as f64 * lq)
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok((max + sum.ln()).exp().min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwuMode {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    pub n_x: usize,
    pub n_y: usize,
    /// Pairs with x > y, ties counting one half.
    pub u_x: f64,
    pub u_y: f64,
    pub p_two_sided: f64,
    /// P(U ≥ u_x): evidence that x tends to be larger.
    pub p_greater: f64,
    /// P(U ≤ u_x).
    pub p_less: f64,
    /// The method actually used.
    pub method: MwuMode,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of tie groups in `values`.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Frequencies of U = 0..=m·n under H0 (no ties): coefficients of the
/// Gaussian binomial [m+n choose m], built as Π (1 − q^(n+i)) / (1 − q^i).
fn exact_u_counts(m: usize, n: usize) -> Vec<i128> {
    let (m, n) = if m <= n { (m, n) } else { (n, m) };
    let len = m * n + 1;
    let mut poly = vec![0i128; len];
    poly[0] = 1;
    for i in 1..=m {
        let shift = n + i;
        for d in (shift..len).rev() {
            poly[d] -= poly[d - shift];
        }
        for d in i..len {
            poly[d] += poly[d - i];
        }
    }
    poly
}

pub fn mann_whitney_u(x: &[f64], y: &[f64], mode: MwuMode) -> Result<MannWhitney, EvalError> {
    if x.is_empty() || y.is_empty() {
        return Err(EvalError::InvalidInput("both samples must be non-empty".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::InvalidInput("samples must be finite".into()));
    }
    let (n_x, n_y) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r_x: f64 = ranks[..n_x].iter().sum();
    let u_x = r_x - (n_x * (n_x + 1)) as f64 / 2.0;
    let mn = (n_x * n_y) as f64;
    let u_y = mn - u_x;
    let ties = tie_groups(&pooled);
    let has_ties = ties.iter().any(|&t| t > 1);

    if mode == MwuMode::Exact && n_x.min(n_y) <= 8 && !has_ties {
        let counts = exact_u_counts(n_x, n_y);
        let total: i128 = counts.iter().sum();
        let u = u_x.round() as usize;
        let upper: i128 = counts[u..].iter().sum();
        let lower: i128 = counts[..=u].iter().sum();
        let p_greater = upper as f64 / total as f64;
        let p_less = lower as f64 / total as f64;
        return Ok(MannWhitney {
            n_x,
            n_y,
            u_x,
            u_y,
            p_two_sided: (2.0 * p_greater.min(p_less)).min(1.0),
            p_greater,
            p_less,
            method: MwuMode::Exact,
        });
    }

    let n = (n_x + n_y) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = mn / 12.0 * ((n + 1.0) - tie_term);
    let mean = mn / 2.0;
    let (p_two_sided, p_greater, p_less) = if var <= 0.0 {
        (1.0, 1.0, 1.0)
    } else {
        let sd = var.sqrt();
        let z2 = ((u_x - mean).abs() - 0.5).max(0.0) / sd;
        let z_hi = (u_x - mean - 0.5) / sd;
        let z_lo = (u_x - mean + 0.5) / sd;
        (
            erfc(z2 / std::f64::consts::SQRT_2).min(1.0),
            0.5 * erfc(z_hi / std::f64::consts::SQRT_2),
            0.5 * erfc(-z_lo / std::f64::consts::SQRT_2),
        )
    };
    Ok(MannWhitney {
        n_x,
        n_y,
        u_x,
        u_y,
        p_two_sided,
        p_greater: p_greater.min(1.0),
        p_less: p_less.min(1.0),
        method: MwuMode::NormalApprox,
    })
}
