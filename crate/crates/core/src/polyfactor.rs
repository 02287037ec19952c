//! Roots of `y^u + 1`, its monic divisors, and the count of real ones.
//!
//! Roots are addressed by angle index: root `k` is `exp(iπ(2k+1)/u)` and its
//! complex conjugate is root `u-1-k`. Whether a divisor has real
//! coefficients is decided on these indices, so counting is exact and
//! floating point only enters when coefficients are expanded.

use std::f64::consts::PI;

use itertools::Itertools;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest number of subsets [`alpha_brute`] agrees to walk through.
pub const BRUTE_ENUMERATION_LIMIT: u64 = 1_000_000_000;

/// Index of one root of `y^u + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootIndex {
    pub u: usize,
    pub k: usize,
}

impl RootIndex {
    pub fn new(u: usize, k: usize) -> Result<Self> {
        if u == 0 || k >= u {
            return domain(format!("root index k={k} invalid for u={u}"));
        }
        Ok(Self { u, k })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(1.0, PI * (2 * self.k + 1) as f64 / self.u as f64)
    }

    pub fn conjugate(&self) -> Self {
        Self {
            u: self.u,
            k: self.u - 1 - self.k,
        }
    }

    /// True for the root `-1`, which exists only when `u` is odd.
    pub fn is_real(&self) -> bool {
        2 * self.k + 1 == self.u
    }
}

/// The `u` roots of `y^u + 1`, ordered by angle index.
pub fn neg_roots(u: usize) -> Result<Vec<Complex64>> {
    if u == 0 {
        return domain("y^u + 1 needs u >= 1");
    }
    Ok((0..u).map(|k| RootIndex { u, k }.value()).collect())
}

/// Univariate polynomial with complex coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoly {
    pub coeffs: Vec<Complex64>,
    pub monic: bool,
}

impl ComplexPoly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let monic = coeffs.last().is_some_and(|c| *c == Complex64::one());
        Self { coeffs, monic }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `y^u + 1`.
    pub fn neg_unit_binomial(u: usize) -> Self {
        let mut coeffs = vec![Complex64::zero(); u + 1];
        coeffs[0] = Complex64::one();
        coeffs[u] += Complex64::one();
        Self::new(coeffs)
    }

    /// Product of `(y - r)` over the given roots, by incremental
    /// multiplication in Leja order (keeps partial products well scaled).
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut coeffs = vec![Complex64::one()];
        for r in leja_order(roots) {
            coeffs.push(Complex64::zero());
            for i in (1..coeffs.len()).rev() {
                let lower = coeffs[i - 1];
                coeffs[i] = lower - r * coeffs[i];
            }
            coeffs[0] *= -r;
        }
        Self::new(coeffs)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, y: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::zero(), |acc, &c| acc * y + c)
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.max_imag() < tol
    }

    pub fn real_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    pub fn mul(&self, other: &ComplexPoly) -> ComplexPoly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return ComplexPoly::new(Vec::new());
        }
        let mut out = vec![Complex64::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &x) in self.coeffs.iter().enumerate() {
            for (j, &y) in other.coeffs.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        ComplexPoly::new(out)
    }

    /// Quotient and remainder of division by a monic polynomial.
    pub fn div_rem_monic(&self, divisor: &ComplexPoly) -> Result<(ComplexPoly, ComplexPoly)> {
        if !divisor.monic || divisor.coeffs.is_empty() {
            return domain("division requires a monic divisor");
        }
        let dd = divisor.degree();
        if self.coeffs.len() <= dd {
            return Ok((ComplexPoly::new(vec![]), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let qlen = rem.len() - dd;
        let mut quot = vec![Complex64::zero(); qlen];
        for i in (0..qlen).rev() {
            let c = rem[i + dd];
            quot[i] = c;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= c * dc;
            }
        }
        rem.truncate(dd);
        Ok((ComplexPoly::new(quot), ComplexPoly::new(rem)))
    }
}

fn leja_order(roots: &[Complex64]) -> Vec<Complex64> {
    let mut rest = roots.to_vec();
    let mut out = Vec::with_capacity(roots.len());
    // first: largest modulus, ties broken by index
    let mut score: Vec<f64> = rest.iter().map(|r| r.norm().ln()).collect();
    while !rest.is_empty() {
        let (best, _) = score
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        let chosen = rest.swap_remove(best);
        score.swap_remove(best);
        for (s, r) in score.iter_mut().zip(&rest) {
            *s += (r - chosen).norm().max(f64::MIN_POSITIVE).ln();
        }
        out.push(chosen);
    }
    out
}

/// A choice of `d` roots of `y^u + 1`, naming the divisor with exactly those roots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DivisorSelection {
    pub u: usize,
    pub subset: Vec<usize>,
}

impl DivisorSelection {
    pub fn new(u: usize, mut subset: Vec<usize>) -> Result<Self> {
        subset.sort_unstable();
        if u == 0 || subset.iter().any(|&k| k >= u) {
            return domain(format!("selection {subset:?} out of range for u={u}"));
        }
        if subset.windows(2).any(|w| w[0] == w[1]) {
            return domain(format!("selection {subset:?} repeats a root"));
        }
        Ok(Self { u, subset })
    }

    pub fn degree(&self) -> usize {
        self.subset.len()
    }

    /// Real coefficients happen exactly when the subset is closed under `k ↔ u-1-k`.
    pub fn is_conjugation_closed(&self) -> bool {
        self.subset
            .iter()
            .all(|&k| self.subset.binary_search(&(self.u - 1 - k)).is_ok())
    }

    pub fn roots(&self) -> Vec<Complex64> {
        self.subset
            .iter()
            .map(|&k| RootIndex { u: self.u, k }.value())
            .collect()
    }

    pub fn expand(&self) -> ComplexPoly {
        ComplexPoly::from_roots(&self.roots())
    }

    /// Expanded divisor with imaginary parts dropped, for closed subsets only.
    pub fn real_poly(&self) -> Option<ComplexPoly> {
        if !self.is_conjugation_closed() {
            return None;
        }
        let p = self.expand();
        let mut coeffs: Vec<Complex64> =
            p.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect();
        if let Some(last) = coeffs.last_mut() {
            *last = Complex64::one();
        }
        Some(ComplexPoly::new(coeffs))
    }
}

/// Every `d`-subset of the roots of `y^u + 1`, in lexicographic order.
pub fn all_selections(u: usize, d: usize) -> impl Iterator<Item = DivisorSelection> {
    (0..u)
        .combinations(d)
        .map(move |subset| DivisorSelection { u, subset })
}

/// Conjugation-closed `d`-subsets, built from conjugate pairs plus the root
/// `-1` when `u` is odd.
pub fn real_selections(u: usize, d: usize) -> Result<Vec<DivisorSelection>> {
    if d == 0 || d > u {
        return domain(format!("need 1 <= d <= u, got d={d}, u={u}"));
    }
    let pairs = u / 2;
    let middle = (u % 2 == 1).then_some((u - 1) / 2);
    let mut out = Vec::new();
    let mut push_pairs = |extra: Option<usize>, n_pairs: usize| {
        for chosen in (0..pairs).combinations(n_pairs) {
            let mut subset: Vec<usize> = chosen.iter().flat_map(|&k| [k, u - 1 - k]).collect();
            subset.extend(extra);
            subset.sort_unstable();
            out.push(DivisorSelection { u, subset });
        }
    };
    if d.is_multiple_of(2) {
        if d / 2 <= pairs {
            push_pairs(None, d / 2);
        }
    } else if let Some(mid) = middle {
        if (d - 1) / 2 <= pairs {
            push_pairs(Some(mid), (d - 1) / 2);
        }
    }
    out.sort_by(|a, b| a.subset.cmp(&b.subset));
    Ok(out)
}

/// All monic degree-`d` divisors of `y^u + 1` with real coefficients.
pub fn real_divisors(u: usize, d: usize) -> Result<Vec<ComplexPoly>> {
    Ok(real_selections(u, d)?
        .iter()
        .filter_map(DivisorSelection::real_poly)
        .collect())
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn check_mn(m: usize, n: usize) -> Result<()> {
    if m < 3 || m > n {
        return domain(format!("need 3 <= m <= n, got m={m}, n={n}"));
    }
    Ok(())
}

/// Number of real monic degree-`(m-1)` divisors of `y^u + 1`, `u = m+n-2`,
/// from the parity closed form.
pub fn alpha_closed(m: usize, n: usize) -> Result<BigUint> {
    check_mn(m, n)?;
    let u = (m + n - 2) as u64;
    let m = m as u64;
    Ok(match (m % 2 == 1, n % 2 == 1) {
        (true, true) => binomial(u / 2, (m - 1) / 2),
        (false, true) => binomial((u - 1) / 2, (m - 2) / 2),
        (true, false) => binomial((u - 1) / 2, (m - 1) / 2),
        (false, false) => BigUint::zero(),
    })
}

/// Same count as [`alpha_closed`], by walking every `(m-1)`-subset of the
/// `u` roots as a bitmask and testing closure under bit reversal.
pub fn alpha_brute(m: usize, n: usize) -> Result<u64> {
    check_mn(m, n)?;
    let u = m + n - 2;
    let d = m - 1;
    if u >= 64 {
        return Err(Error::Resource(format!("u={u} exceeds the 63-bit mask width")));
    }
    let total = binomial(u as u64, d as u64);
    if total > BigUint::from(BRUTE_ENUMERATION_LIMIT) {
        return Err(Error::Resource(format!(
            "C({u},{d}) = {total} subsets exceeds the enumeration limit {BRUTE_ENUMERATION_LIMIT}"
        )));
    }
    let shift = 64 - u as u32;
    let last: u64 = ((1u64 << d) - 1) << (u - d);
    let mut mask: u64 = (1u64 << d) - 1;
    let mut count = 0u64;
    loop {
        if mask.reverse_bits() >> shift == mask {
            count += 1;
        }
        if mask == last {
            break;
        }
        // next subset with the same popcount
        let low = mask & mask.wrapping_neg();
        let ripple = mask + low;
        mask = (((ripple ^ mask) >> 2) / low) | ripple;
    }
    Ok(count)
}

/// Maps a real monic `h(y) = y^{m-1} - a_{m-1} y^{m-2} - ... - a_1` to the
/// point `(a_1, ..., a_{m-1}, -1)`.
pub fn divisor_to_point(h: &ComplexPoly, m: usize, tol: f64) -> Result<Vec<f64>> {
    if !h.monic {
        return domain("divisor must be monic");
    }
    if h.degree() + 1 != m {
        return domain(format!("divisor degree {} != m-1 = {}", h.degree(), m - 1));
    }
    if !h.is_real(tol) {
        return domain(format!("divisor has imaginary part {:.3e}", h.max_imag()));
    }
    let mut point: Vec<f64> = h.coeffs[..m - 1].iter().map(|c| -c.re).collect();
    point.push(-1.0);
    Ok(point)
}

/// Complex analogue of [`divisor_to_point`] for an arbitrary selection.
pub fn selection_point(sel: &DivisorSelection) -> Vec<Complex64> {
    let h = match sel.real_poly() {
        Some(h) => h,
        None => sel.expand(),
    };
    let d = sel.degree();
    let mut point: Vec<Complex64> = h.coeffs[..d].iter().map(|c| -c).collect();
    point.push(Complex64::new(-1.0, 0.0));
    point
}
