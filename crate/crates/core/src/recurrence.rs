//! The sequence `λ_t` attached to a point `(a_1, ..., a_{m-1}, -1)` of the
//! base pencil, the matrix `N = M((a, -1), A)`, and the five equivalent
//! tests for `rank N < n`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg;
use crate::polyfactor::ComplexPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LambdaMode {
    /// Linear recurrence from the seed values.
    Recurrence,
    /// Banded Toeplitz determinant for each index.
    Determinant,
}

/// `λ_1, ..., λ_T` for a point `a = (a_1, ..., a_{m-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSeq {
    pub a: Vec<f64>,
    pub values: Vec<f64>,
}

impl LambdaSeq {
    /// `λ_t`, 1-based.
    pub fn get(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

pub fn lambda_seq(a: &[f64], t_max: usize, mode: LambdaMode) -> Result<LambdaSeq> {
    let m = a.len() + 1;
    if a.is_empty() {
        return domain("need at least one coefficient a_1");
    }
    if t_max < m - 1 {
        return domain(format!("T={t_max} must be at least m-1={}", m - 1));
    }
    let mut values = vec![0.0; t_max];
    values[m - 2] = 1.0;
    match mode {
        LambdaMode::Recurrence => {
            for t in m..=t_max {
                // λ_t = Σ_{k=1}^{m-1} a_{m-k} λ_{t-k}
                values[t - 1] = (1..m).map(|k| a[m - k - 1] * values[t - k - 1]).sum();
            }
        }
        LambdaMode::Determinant => {
            for t in m..=t_max {
                values[t - 1] = linalg::determinant(&toeplitz_band(a, t + 1 - m));
            }
        }
    }
    Ok(LambdaSeq {
        a: a.to_vec(),
        values,
    })
}

/// The `s × s` matrix with `a_{m-1}, a_{m-2}, ..., a_1` on the diagonal and
/// superdiagonals and `-1` on the subdiagonal.
fn toeplitz_band(a: &[f64], s: usize) -> DMatrix<f64> {
    let m = a.len() + 1;
    DMatrix::from_fn(s, s, |i, j| {
        if j >= i && j - i <= m - 2 {
            a[m - 2 - (j - i)]
        } else if i == j + 1 {
            -1.0
        } else {
            0.0
        }
    })
}

/// `N = M((a_1, ..., a_{m-1}, -1), A)` written out as its banded pattern:
/// column `j` carries `a_1, ..., a_{m-1}` from row `j` down, `-1` in row
/// `j+m-1` for `j < n-1`, and the last column has `+1` in the first row.
pub fn build_n(a_full: &[f64], m: usize, n: usize) -> Result<DMatrix<f64>> {
    if m < 3 || m > n {
        return domain(format!("need 3 <= m <= n, got m={m}, n={n}"));
    }
    if a_full.len() != m {
        return domain(format!("point has length {}, expected m={m}", a_full.len()));
    }
    if a_full[m - 1] != -1.0 {
        return domain(format!(
            "chart violation: last coordinate is {}, expected -1",
            a_full[m - 1]
        ));
    }
    let u = m + n - 2;
    let mut out = DMatrix::zeros(u, n);
    for j in 0..n {
        for (i, &ai) in a_full[..m - 1].iter().enumerate() {
            out[(j + i, j)] += ai;
        }
        if j + 1 < n {
            out[(j + m - 1, j)] -= 1.0;
        }
    }
    out[(0, n - 1)] += 1.0;
    Ok(out)
}

/// `h(y) = y^{m-1} - a_{m-1} y^{m-2} - ... - a_2 y - a_1`.
pub fn h_poly(a: &[f64]) -> ComplexPoly {
    let mut coeffs: Vec<f64> = a.iter().map(|x| -x).collect();
    coeffs.push(1.0);
    ComplexPoly::from_real(&coeffs)
}

/// Outcome of the five rank-deficiency tests with the quantities they used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `rank N < n`, by singular values.
    pub c1: bool,
    /// The minors `[i, m, m+1, ..., u]_N` vanish for `1 <= i <= m-1`.
    pub c2: bool,
    /// `λ_{u+t} = 0` for `1 <= t <= m-2` and `λ_{u+m-1} = -1`.
    pub c3: bool,
    /// `λ_{u+t} = -λ_t` on `1 <= t <= 2(m-1)`.
    pub c4: bool,
    /// `h(y)` divides `y^u + 1`.
    pub c5: bool,
    pub sigma_ratio: f64,
    pub minors: Vec<f64>,
    pub lambda_tail: Vec<f64>,
    pub remainder: Vec<f64>,
}

impl ConditionReport {
    pub fn all(&self) -> [bool; 5] {
        [self.c1, self.c2, self.c3, self.c4, self.c5]
    }

    pub fn consistent(&self) -> bool {
        let v = self.all();
        v.iter().all(|&c| c == v[0])
    }
}

pub fn rank_conditions(a: &[f64], m: usize, n: usize, tol: f64) -> Result<ConditionReport> {
    if tol <= 0.0 {
        return domain("tolerance must be positive");
    }
    if a.len() + 1 != m {
        return domain(format!("point has length {}, expected m-1={}", a.len(), m - 1));
    }
    let u = m + n - 2;
    let mut full = a.to_vec();
    full.push(-1.0);
    let big_n = build_n(&full, m, n)?;

    let sv = linalg::singular_values(&big_n);
    let sigma_ratio = sv[n - 1] / sv[0];
    let c1 = sigma_ratio < tol;

    // rows i and m..u (1-based), normalized by the Hadamard bound
    let mut minors = Vec::with_capacity(m - 1);
    let mut c2 = true;
    for i in 0..m - 1 {
        let rows: Vec<usize> = std::iter::once(i).chain(m - 1..u).collect();
        let sub = big_n.select_rows(&rows);
        let det = linalg::determinant(&sub);
        let bound: f64 = sub.row_iter().map(|r| r.norm()).product();
        minors.push(det);
        if det.abs() >= tol * bound.max(f64::MIN_POSITIVE) {
            c2 = false;
        }
    }

    let seq = lambda_seq(a, u + 2 * (m - 1), LambdaMode::Recurrence)?;
    let scale = seq.max_abs().max(1.0);
    let lambda_tail: Vec<f64> = (1..m).map(|t| seq.get(u + t)).collect();
    let c3 = (1..m - 1).all(|t| seq.get(u + t).abs() < tol * scale)
        && (seq.get(u + m - 1) + 1.0).abs() < tol * scale;
    let c4 = (1..=2 * (m - 1)).all(|t| (seq.get(u + t) + seq.get(t)).abs() < tol * scale);

    let h = h_poly(a);
    let (q, r) = ComplexPoly::neg_unit_binomial(u).div_rem_monic(&h)?;
    let remainder = r.real_coeffs();
    let rem_norm = remainder.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q_max = q.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h_max = h.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let c5 = rem_norm < tol * (q_max * h_max).max(1.0);

    Ok(ConditionReport {
        c1,
        c2,
        c3,
        c4,
        c5,
        sigma_ratio,
        minors,
        lambda_tail,
        remainder,
    })
}

/// Membership of `f` (real coefficients, lowest first) in the ideal of
/// polynomials annihilating the shifted sequence `λ`: `Σ_k c_k λ_{k+t} = 0`
/// for all `t >= 1`. The window `t <= m-1` suffices because the shifted
/// sums obey the same order-`(m-1)` recurrence.
pub fn in_sequence_ideal(f: &[f64], a: &[f64], tol: f64) -> Result<bool> {
    let m = a.len() + 1;
    let seq = lambda_seq(a, (f.len() + m).max(m - 1), LambdaMode::Recurrence)?;
    let weight: f64 = f.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    let scale = seq.max_abs().max(1.0) * weight;
    Ok((1..m).all(|t| {
        let s: f64 = f.iter().enumerate().map(|(k, c)| c * seq.get(k + t)).sum();
        s.abs() < tol * scale
    }))
}

/// Same ideal tested through its generator: `h(y) | f(y)`.
pub fn divisible_by_h(f: &[f64], a: &[f64], tol: f64) -> Result<bool> {
    let h = h_poly(a);
    let (q, r) = ComplexPoly::from_real(f).div_rem_monic(&h)?;
    let r_norm = r.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let q_max = q.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h_max = h.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Ok(r_norm < tol * (q_max * h_max).max(1.0))
}
