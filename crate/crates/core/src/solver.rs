//! Homotopy continuation for the bilinear system `M(a, B) b = 0`.
//!
//! Unknowns live in the charts `a_m = -1` and `c · b = 1` (a fixed random
//! real vector `c`), which turns the projective problem into a square
//! system of `u + 2` equations in `m + n` unknowns. The start system is the
//! reordered base tensor `A'`, whose `C(u, m-1)` solutions come from the
//! monic divisors of `y^u + 1`; every start is tracked along
//! `B(t) = (1-t)·γ·A' + t·B`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, complex_norm};
use crate::polyfactor::{all_selections, binomial, selection_point, DivisorSelection};
use crate::random::{gaussian_complex_vec, gaussian_vec, stream_rng};
use crate::tensor::{make_start_frame, pencil_eval_complex, remap_point, Format, Tensor3};

/// Largest number of paths a single solve will attempt.
pub const PATH_BUDGET: u64 = 10_000;

const GAMMA_STREAM: u64 = 1;
const CHART_STREAM: u64 = 2;
const RETRY_STREAM: u64 = 3;

/// Step control and tolerances for the tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_newton_iters: usize,
    /// Residual tolerance relative to `1 + ‖B(t)‖·‖a‖·‖b‖`.
    pub corrector_tol: f64,
    pub gamma: Complex64,
    pub max_steps: usize,
    /// Norm of `(a, b)` beyond which a path is declared at infinity.
    pub blowup: f64,
    /// Seeds the chart vector `c` and the retry chart on `a`.
    pub seed: u64,
    pub real_tol: f64,
    pub dedup_tol: f64,
    /// `σ_{n-1} / σ_1` below which a kernel counts as two-dimensional.
    pub kernel_tol: f64,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self::seeded(0)
    }
}

impl TrackOptions {
    /// Defaults with `γ` drawn from `seed`.
    pub fn seeded(seed: u64) -> Self {
        Self {
            initial_step: 0.02,
            min_step: 1e-12,
            max_step: 0.1,
            max_newton_iters: 3,
            corrector_tol: 1e-12,
            gamma: sample_gamma(seed),
            max_steps: 50_000,
            blowup: 1e8,
            seed,
            real_tol: 1e-8,
            dedup_tol: 1e-6,
            kernel_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.initial_step,
            self.min_step,
            self.max_step,
            self.corrector_tol,
            self.blowup,
            self.real_tol,
            self.dedup_tol,
            self.kernel_tol,
        ];
        if positive.iter().any(|x| !(*x > 0.0)) || self.max_newton_iters == 0 || self.max_steps == 0
        {
            return domain("track options must all be positive");
        }
        if self.gamma.norm() == 0.0 {
            return domain("gamma must be nonzero");
        }
        Ok(())
    }
}

/// Unit complex number with argument kept away from `0` and `π`.
pub fn sample_gamma(seed: u64) -> Complex64 {
    let mut rng = stream_rng(seed, GAMMA_STREAM);
    loop {
        let theta: f64 = rng.random_range(0.0..2.0 * PI);
        let dist_to_one = theta.min(2.0 * PI - theta);
        if dist_to_one > 0.2 && (theta - PI).abs() > 0.2 {
            return Complex64::from_polar(1.0, theta);
        }
    }
}

/// Random real chart vector `c` for `b`, normalized to unit length.
pub fn b_chart(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, CHART_STREAM);
    let c = gaussian_vec(&mut rng, n);
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.into_iter().map(|x| x / norm).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionSource {
    Divisor { selection: DivisorSelection },
    Tracked { path: usize },
}

/// One solution `(a, b)` with `a_m = -1` and `c · b = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// `‖M(a, B) b‖` at the owning tensor.
    pub residual: f64,
    pub is_real: bool,
    pub source: SolutionSource,
}

impl Solution {
    fn coords(&self) -> Vec<Complex64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    pub fn distance(&self, other: &Solution) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `b` divided by its entry of largest modulus.
    pub fn b_normalized(&self) -> Vec<Complex64> {
        let pivot = self
            .b
            .iter()
            .copied()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap_or(Complex64::new(1.0, 0.0));
        self.b.iter().map(|x| x / pivot).collect()
    }

    /// Largest imaginary part after the realness rescaling, relative to the
    /// size of `a`.
    pub fn imag_defect(&self) -> f64 {
        let a_scale = self.a.iter().map(|x| x.norm()).fold(1.0, f64::max);
        let a_im = self.a.iter().map(|x| x.im.abs()).fold(0.0, f64::max) / a_scale;
        let b_im = self
            .b_normalized()
            .iter()
            .map(|x| x.im.abs())
            .fold(0.0, f64::max);
        a_im.max(b_im)
    }

    /// Real representative `(a, b)`; meaningful only for real solutions.
    pub fn real_parts(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.a.iter().map(|x| x.re).collect(),
            self.b_normalized().iter().map(|x| x.re).collect(),
        )
    }

    pub fn conj(&self) -> Solution {
        Solution {
            a: self.a.iter().map(|x| x.conj()).collect(),
            b: self.b.iter().map(|x| x.conj()).collect(),
            ..self.clone()
        }
    }
}

/// Why a path did not produce a usable endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathFailure {
    /// Step size fell below the minimum, or the step budget ran out.
    PathStall { t: f64 },
    /// Newton failed to converge or the Jacobian became singular.
    PathDiverge { t: f64 },
    /// `(a, b)` grew beyond the blowup threshold.
    AtInfinity { t: f64 },
    /// The endpoint has `a_m ≈ 0` and cannot be written with `a_m = -1`.
    ChartEscape,
    /// The endpoint coincides with the endpoint of an earlier path.
    WarnMultiplicity { duplicate_of: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub path: usize,
    pub reason: PathFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub format: Format,
    pub n_paths: usize,
    pub solutions: Vec<Solution>,
    pub failures: Vec<FailureRecord>,
    pub real_count: usize,
    pub gamma: Complex64,
    pub chart: Vec<f64>,
    pub seed: u64,
    pub max_residual: f64,
}

impl SolveReport {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn real_solutions(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.is_real)
    }
}

/// Accepts a solution as real when [`Solution::imag_defect`] is below `tol`.
pub fn real_filter(solutions: &[Solution], tol: f64) -> Vec<Solution> {
    solutions
        .iter()
        .filter(|s| s.imag_defect() < tol)
        .map(|s| Solution {
            is_real: true,
            ..s.clone()
        })
        .collect()
}

pub fn path_count(m: usize, n: usize) -> BigUint {
    binomial((m + n - 2) as u64, (m - 1) as u64)
}

fn check_budget(m: usize, n: usize) -> Result<usize> {
    let count = path_count(m, n);
    match count.to_u64() {
        Some(c) if c <= PATH_BUDGET => Ok(c as usize),
        _ => Err(Error::Resource(format!(
            "C({}, {}) = {count} paths exceeds the budget {PATH_BUDGET}",
            m + n - 2,
            m - 1
        ))),
    }
}

fn kernel_vector(
    mat: &DMatrix<Complex64>,
    chart: &[f64],
) -> Option<(Vec<Complex64>, f64)> {
    let (v, sv) = linalg::smallest_right_singular_vector(mat)?;
    let n = mat.ncols();
    let ratio = if n >= 2 && sv[0] > 0.0 { sv[n - 2] / sv[0] } else { 1.0 };
    let cb: Complex64 = v.iter().zip(chart).map(|(x, c)| x * *c).sum();
    if cb.norm() < 1e-14 {
        return None;
    }
    Some((v.iter().map(|x| x / cb).collect(), ratio))
}

fn residual(a: &[Complex64], b: &[Complex64], tensor: &Tensor3) -> f64 {
    let mat = pencil_eval_complex(a, tensor).expect("shape checked by caller");
    complex_norm((mat * DVector::from_column_slice(b)).as_slice())
}

/// The `C(u, m-1)` solutions of `M(a, A') b = 0`, one per monic degree-`(m-1)`
/// divisor of `y^u + 1`.
///
/// Each divisor point `(a_1, ..., a_{m-1}, -1)` of the base tensor is moved
/// to the coordinates of `A'` by the slice reordering and then put back in
/// the chart `a_m = -1`; `b` is the kernel vector normalized to `c · b = 1`.
pub fn start_solutions(m: usize, n: usize, chart: &[f64], opts: &TrackOptions) -> Result<Vec<Solution>> {
    let fmt = Format::critical(m, n)?;
    check_budget(m, n)?;
    if chart.len() != n {
        return domain(format!("chart has length {}, expected n={n}", chart.len()));
    }
    let frame = make_start_frame(m, n)?;
    let mut out = Vec::new();
    for (index, sel) in all_selections(fmt.u, m - 1).enumerate() {
        let point = selection_point(&sel);
        let moved = remap_point(&point);
        let scale = -moved[m - 1];
        if scale.norm() < 1e-12 {
            return Err(Error::Internal(format!(
                "divisor {index} leaves the chart a_m = -1"
            )));
        }
        let a: Vec<Complex64> = moved.iter().map(|x| x / scale).collect();
        let mat = pencil_eval_complex(&a, &frame.aprime)?;
        let (b, ratio) = kernel_vector(&mat, chart)
            .ok_or_else(|| Error::Internal(format!("kernel of divisor {index} is orthogonal to the chart")))?;
        if ratio < opts.kernel_tol {
            return Err(Error::DegenerateStart { index, ratio });
        }
        let res = complex_norm((&mat * DVector::from_column_slice(&b)).as_slice());
        let mut sol = Solution {
            a,
            b,
            residual: res,
            is_real: false,
            source: SolutionSource::Divisor { selection: sel },
        };
        sol.is_real = sol.imag_defect() < opts.real_tol;
        out.push(sol);
    }
    Ok(out)
}

/// The square system along `B(t) = (1-t)·γ·from + t·to`.
struct Homotopy {
    from: Vec<DMatrix<Complex64>>,
    to: Vec<DMatrix<Complex64>>,
    gamma: Complex64,
    chart_a: Vec<Complex64>,
    chart_b: Vec<f64>,
    m: usize,
    n: usize,
    u: usize,
}

impl Homotopy {
    fn new(from: &Tensor3, to: &Tensor3, gamma: Complex64, chart_a: Vec<Complex64>, chart_b: Vec<f64>) -> Self {
        let cplx = |t: &Tensor3| -> Vec<DMatrix<Complex64>> {
            t.slices().iter().map(|s| s.map(|x| Complex64::new(x, 0.0))).collect()
        };
        let [u, n, m] = from.shape;
        Self {
            from: cplx(from),
            to: cplx(to),
            gamma,
            chart_a,
            chart_b,
            m,
            n,
            u,
        }
    }

    fn slices_at(&self, t: f64) -> Vec<DMatrix<Complex64>> {
        let w = self.gamma * (1.0 - t);
        self.from
            .iter()
            .zip(&self.to)
            .map(|(f, g)| f * w + g * Complex64::new(t, 0.0))
            .collect()
    }

    fn split<'z>(&self, z: &'z DVector<Complex64>) -> (&'z [Complex64], DVector<Complex64>) {
        let a = &z.as_slice()[..self.m];
        let b = DVector::from_column_slice(&z.as_slice()[self.m..]);
        (a, b)
    }

    fn eval(&self, z: &DVector<Complex64>, slices: &[DMatrix<Complex64>]) -> DVector<Complex64> {
        let (a, b) = self.split(z);
        let mut out = DVector::zeros(self.u + 2);
        for (ak, sk) in a.iter().zip(slices) {
            let col = sk * &b * *ak;
            let mut head = out.rows_mut(0, self.u);
            head += &col;
        }
        out[self.u] = a.iter().zip(&self.chart_a).map(|(x, l)| x * l).sum::<Complex64>()
            - Complex64::new(1.0, 0.0);
        out[self.u + 1] = b.iter().zip(&self.chart_b).map(|(x, c)| x * *c).sum::<Complex64>()
            - Complex64::new(1.0, 0.0);
        out
    }

    fn jacobian(&self, z: &DVector<Complex64>, slices: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
        let (a, b) = self.split(z);
        let dim = self.m + self.n;
        let mut jac = DMatrix::zeros(self.u + 2, dim);
        let mut pencil = DMatrix::<Complex64>::zeros(self.u, self.n);
        for (k, (ak, sk)) in a.iter().zip(slices).enumerate() {
            jac.view_mut((0, k), (self.u, 1)).copy_from(&(sk * &b));
            pencil += sk * *ak;
        }
        jac.view_mut((0, self.m), (self.u, self.n)).copy_from(&pencil);
        for k in 0..self.m {
            jac[(self.u, k)] = self.chart_a[k];
        }
        for j in 0..self.n {
            jac[(self.u + 1, self.m + j)] = Complex64::new(self.chart_b[j], 0.0);
        }
        jac
    }

    /// `∂H/∂t`.
    fn dt(&self, z: &DVector<Complex64>) -> DVector<Complex64> {
        let (a, b) = self.split(z);
        let mut out = DVector::zeros(self.u + 2);
        for ((ak, f), g) in a.iter().zip(&self.from).zip(&self.to) {
            let col = (g - f * self.gamma) * &b * *ak;
            let mut head = out.rows_mut(0, self.u);
            head += &col;
        }
        out
    }

    fn scale(&self, z: &DVector<Complex64>, slices: &[DMatrix<Complex64>]) -> f64 {
        let (a, b) = self.split(z);
        let b_norm: f64 = slices.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt();
        1.0 + b_norm * complex_norm(a) * b.norm()
    }
}

enum NewtonOutcome {
    Converged(DVector<Complex64>),
    Failed,
}

fn newton(
    h: &Homotopy,
    mut z: DVector<Complex64>,
    t: f64,
    max_iters: usize,
    tol: f64,
) -> NewtonOutcome {
    let slices = h.slices_at(t);
    let mut prev_step = f64::INFINITY;
    for _ in 0..max_iters {
        let f = h.eval(&z, &slices);
        if f.norm() <= tol * h.scale(&z, &slices) {
            return NewtonOutcome::Converged(z);
        }
        let Some(delta) = h.jacobian(&z, &slices).lu().solve(&(-f)) else {
            return NewtonOutcome::Failed;
        };
        let step = delta.norm();
        if step > 0.5 * prev_step {
            return NewtonOutcome::Failed;
        }
        z += &delta;
        if step <= tol * (1.0 + z.norm()) {
            return NewtonOutcome::Converged(z);
        }
        prev_step = step;
    }
    let f = h.eval(&z, &slices);
    if f.norm() <= tol * h.scale(&z, &slices) {
        NewtonOutcome::Converged(z)
    } else {
        NewtonOutcome::Failed
    }
}

/// Tracks one path with the given chart on `a`. Returns the endpoint in that chart.
fn run_path(
    h: &Homotopy,
    z0: DVector<Complex64>,
    opts: &TrackOptions,
) -> std::result::Result<DVector<Complex64>, PathFailure> {
    let mut z = z0;
    let mut t = 0.0;
    let mut step = opts.initial_step.min(opts.max_step);
    let mut streak = 0;
    let mut steps = 0;
    while t < 1.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(PathFailure::PathStall { t });
        }
        let slices = h.slices_at(t);
        let jac = h.jacobian(&z, &slices);
        let Some(tangent) = jac.lu().solve(&(-h.dt(&z))) else {
            return Err(PathFailure::PathDiverge { t });
        };
        let last = step >= 1.0 - t;
        let h_eff = if last { 1.0 - t } else { step };
        let t_next = if last { 1.0 } else { t + h_eff };
        let predicted = &z + &tangent * Complex64::new(h_eff, 0.0);
        match newton(h, predicted, t_next, opts.max_newton_iters, opts.corrector_tol) {
            NewtonOutcome::Converged(zc) => {
                z = zc;
                t = t_next;
                streak += 1;
                if streak >= 3 {
                    step = (step * 2.0).min(opts.max_step);
                    streak = 0;
                }
                if z.norm() > opts.blowup {
                    return Err(PathFailure::AtInfinity { t });
                }
            }
            NewtonOutcome::Failed => {
                step *= 0.5;
                streak = 0;
                if step < opts.min_step {
                    return Err(PathFailure::PathStall { t });
                }
            }
        }
    }
    match newton(h, z, 1.0, opts.max_newton_iters + 5, opts.corrector_tol) {
        NewtonOutcome::Converged(z) => Ok(z),
        NewtonOutcome::Failed => Err(PathFailure::PathDiverge { t: 1.0 }),
    }
}

fn to_vector(sol: &Solution) -> DVector<Complex64> {
    DVector::from_iterator(sol.a.len() + sol.b.len(), sol.a.iter().chain(&sol.b).copied())
}

/// Tracks `s0` from `b_from` to `b_to`. Tries the chart `a_m = -1` first and
/// retries once with a random complex chart on `a` when that fails.
pub fn track_path(
    b_from: &Tensor3,
    b_to: &Tensor3,
    s0: &Solution,
    opts: &TrackOptions,
) -> std::result::Result<Solution, PathFailure> {
    let [_, n, m] = b_from.shape;
    assert_eq!(b_from.shape, b_to.shape, "homotopy endpoints must share a shape");
    let chart_b = b_chart(n, opts.seed);
    let mut default_chart = vec![Complex64::new(0.0, 0.0); m];
    default_chart[m - 1] = Complex64::new(-1.0, 0.0);

    let h = Homotopy::new(b_from, b_to, opts.gamma, default_chart, chart_b.clone());
    let first = run_path(&h, to_vector(s0), opts);
    let endpoint = match first {
        Ok(z) => z,
        Err(_) => {
            let mut rng = stream_rng(opts.seed, RETRY_STREAM);
            let chart_a = gaussian_complex_vec(&mut rng, m);
            let la: Complex64 = s0.a.iter().zip(&chart_a).map(|(x, l)| x * l).sum();
            if la.norm() < 1e-12 {
                return first.map(|_| unreachable!());
            }
            let mut z0 = to_vector(s0);
            for k in 0..m {
                z0[k] /= la;
            }
            let h = Homotopy::new(b_from, b_to, opts.gamma, chart_a, chart_b);
            match run_path(&h, z0, opts) {
                Ok(z) => z,
                Err(_) => return first.map(|_| unreachable!()),
            }
        }
    };

    let a_m = endpoint[m - 1];
    let a_norm = complex_norm(&endpoint.as_slice()[..m]);
    if a_m.norm() <= 1e-10 * a_norm {
        return Err(PathFailure::ChartEscape);
    }
    let factor = Complex64::new(-1.0, 0.0) / a_m;
    let mut a: Vec<Complex64> = endpoint.as_slice()[..m].iter().map(|x| x * factor).collect();
    a[m - 1] = Complex64::new(-1.0, 0.0);
    let b: Vec<Complex64> = endpoint.as_slice()[m..].to_vec();
    let res = residual(&a, &b, b_to);
    if a.iter().chain(&b).any(|x| !x.is_finite()) {
        return Err(PathFailure::PathDiverge { t: 1.0 });
    }
    let mut sol = Solution {
        a,
        b,
        residual: res,
        is_real: false,
        source: s0.source.clone(),
    };
    sol.is_real = sol.imag_defect() < opts.real_tol;
    Ok(sol)
}

/// Tracks every start solution of `A'` to `b` and collects the endpoints.
pub fn solve_all(b: &Tensor3, opts: &TrackOptions) -> Result<SolveReport> {
    opts.validate()?;
    let fmt = Format::from_y_shape(b.shape)?;
    let (m, n) = (fmt.m, fmt.n);
    let n_paths = check_budget(m, n)?;
    let frame = make_start_frame(m, n)?;
    let chart = b_chart(n, opts.seed);
    let starts = start_solutions(m, n, &chart, opts)?;

    // the solution set is invariant under scaling of the target
    let norm = b.frobenius_norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return domain("target tensor must be finite and nonzero");
    }
    let target = b.scaled(frame.aprime.frobenius_norm() / norm);

    let results: Vec<std::result::Result<Solution, PathFailure>> = starts
        .par_iter()
        .map(|s| track_path(&frame.aprime, &target, s, opts))
        .collect();

    let mut solutions: Vec<Solution> = Vec::new();
    let mut owners: Vec<usize> = Vec::new();
    let mut failures = Vec::new();
    for (path, result) in results.into_iter().enumerate() {
        match result {
            Ok(mut sol) => {
                sol.residual = residual(&sol.a, &sol.b, b);
                sol.source = SolutionSource::Tracked { path };
                let scale = 1.0 + complex_norm(&sol.a) + complex_norm(&sol.b);
                if let Some(k) = solutions
                    .iter()
                    .position(|other| sol.distance(other) < opts.dedup_tol * scale)
                {
                    failures.push(FailureRecord {
                        path,
                        reason: PathFailure::WarnMultiplicity {
                            duplicate_of: owners[k],
                        },
                    });
                } else {
                    solutions.push(sol);
                    owners.push(path);
                }
            }
            Err(reason) => failures.push(FailureRecord { path, reason }),
        }
    }
    let real_count = real_filter(&solutions, opts.real_tol).len();
    let max_residual = solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(SolveReport {
        format: fmt,
        n_paths,
        solutions,
        failures,
        real_count,
        gamma: opts.gamma,
        chart,
        seed: opts.seed,
        max_residual,
    })
}

/// `A' + ε R` with `R` standard normal, drawn from `(seed, stream)`.
pub fn perturbed_start_tensor(m: usize, n: usize, eps: f64, seed: u64, stream: u64) -> Result<Tensor3> {
    let frame = make_start_frame(m, n)?;
    let mut rng = stream_rng(seed, stream);
    let noise = crate::random::gaussian_tensor(&mut rng, frame.aprime.shape);
    frame.aprime.add(&noise.scaled(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfactor::alpha_closed;
    use crate::random::gaussian_tensor;
    use crate::tensor::make_base_tensor;

    fn alpha(m: usize, n: usize) -> usize {
        alpha_closed(m, n).unwrap().to_usize().unwrap()
    }

    #[test]
    fn gamma_is_unit_and_off_axis() {
        for seed in 0..200 {
            let g = sample_gamma(seed);
            assert!((g.norm() - 1.0).abs() < 1e-15);
            assert!((g - 1.0).norm() > 0.19 && (g + 1.0).norm() > 0.19);
        }
    }

    #[test]
    fn start_counts_and_residuals() {
        let opts = TrackOptions::seeded(1);
        for (m, n, total) in [(3, 3, 6), (3, 4, 10), (4, 4, 20)] {
            let chart = b_chart(n, 1);
            let starts = start_solutions(m, n, &chart, &opts).unwrap();
            assert_eq!(starts.len(), total);
            assert_eq!(starts.iter().filter(|s| s.is_real).count(), alpha(m, n));
            for s in &starts {
                assert!(s.residual < 1e-10);
                assert_eq!(s.a[m - 1], Complex64::new(-1.0, 0.0));
                let cb: Complex64 = s.b.iter().zip(&chart).map(|(x, c)| x * *c).sum();
                assert!((cb - 1.0).norm() < 1e-12);
                let SolutionSource::Divisor { selection } = &s.source else { panic!() };
                assert_eq!(s.is_real, selection.is_conjugation_closed());
            }
        }
    }

    #[test]
    fn start_residuals_up_to_seven() {
        let opts = TrackOptions::seeded(2);
        for n in 3..=7 {
            for m in 3..=n {
                let chart = b_chart(n, 2);
                let starts = start_solutions(m, n, &chart, &opts).unwrap();
                let worst = starts.iter().map(|s| s.residual).fold(0.0, f64::max);
                assert!(worst < 1e-10, "m={m} n={n} worst={worst}");
                assert_eq!(starts.iter().filter(|s| s.is_real).count(), alpha(m, n));
            }
        }
    }

    #[test]
    fn corrupted_base_sign_breaks_start_residuals() {
        let opts = TrackOptions::seeded(3);
        let chart = b_chart(3, 3);
        let starts = start_solutions(3, 3, &chart, &opts).unwrap();
        let frame = make_start_frame(3, 3).unwrap();
        let mut bad = frame.aprime.clone();
        let v = bad.get(0, 0, 0);
        bad.set(0, 0, 0, -v + if v == 0.0 { 1.0 } else { 0.0 });
        let worst = starts
            .iter()
            .map(|s| residual(&s.a, &s.b, &bad))
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn real_filter_basics() {
        let opts = TrackOptions::seeded(4);
        let starts = start_solutions(3, 3, &b_chart(3, 4), &opts).unwrap();
        let real = real_filter(&starts, 1e-8);
        assert_eq!(real.len(), 2);
        for s in &starts {
            let c = s.conj();
            assert_eq!(
                real_filter(std::slice::from_ref(s), 1e-8).len(),
                real_filter(&[c], 1e-8).len()
            );
        }
        let pure = Solution {
            a: vec![Complex64::new(0.3, 0.0), Complex64::new(-1.0, 0.0)],
            b: vec![Complex64::new(2.0, 0.0), Complex64::new(-0.5, 0.0)],
            residual: 0.0,
            is_real: false,
            source: SolutionSource::Tracked { path: 0 },
        };
        assert_eq!(real_filter(std::slice::from_ref(&pure), 1e-300).len(), 1);
        // a real solution multiplied by a phase in b is still real
        let phased = Solution {
            b: pure.b.iter().map(|x| x * Complex64::from_polar(1.0, 0.7)).collect(),
            ..pure
        };
        assert_eq!(real_filter(&[phased], 1e-12).len(), 1);
    }

    #[test]
    fn identity_path_returns_start() {
        let mut opts = TrackOptions::seeded(5);
        opts.gamma = Complex64::new(1.0, 0.0);
        let frame = make_start_frame(3, 4).unwrap();
        let starts = start_solutions(3, 4, &b_chart(4, 5), &opts).unwrap();
        for s in &starts {
            let end = track_path(&frame.aprime, &frame.aprime, s, &opts).unwrap();
            assert!(end.distance(s) < 1e-12);
        }
    }

    #[test]
    fn near_start_real_count() {
        let opts = TrackOptions::seeded(6);
        for (m, n) in [(3, 3), (3, 4), (3, 5), (4, 4)] {
            let b = perturbed_start_tensor(m, n, 1e-3, 6, 0).unwrap();
            let rep = solve_all(&b, &opts).unwrap();
            assert!(rep.complete(), "{:?}", rep.failures);
            assert_eq!(rep.solutions.len(), rep.n_paths);
            assert_eq!(rep.real_count, alpha(m, n));
            for s in &rep.solutions {
                assert!(s.residual < 1e-9, "residual {}", s.residual);
            }
        }
    }

    #[test]
    fn near_start_endpoints_match_direct_solves() {
        // each endpoint must be a kernel point of the target: re-solve b by SVD
        let opts = TrackOptions::seeded(7);
        let b = perturbed_start_tensor(3, 4, 1e-3, 7, 1).unwrap();
        let rep = solve_all(&b, &opts).unwrap();
        for s in &rep.solutions {
            let mat = pencil_eval_complex(&s.a, &b).unwrap();
            let (v, _) = kernel_vector(&mat, &rep.chart).unwrap();
            let diff = complex_norm(
                &v.iter().zip(&s.b).map(|(x, y)| x - y).collect::<Vec<_>>(),
            );
            assert!(diff < 1e-8, "{diff}");
        }
    }

    #[test]
    fn conjugation_symmetry_random_targets() {
        for trial in 0..20 {
            let opts = TrackOptions::seeded(100 + trial);
            let mut rng = stream_rng(trial, 9);
            let b = gaussian_tensor(&mut rng, [4, 3, 3]);
            let rep = solve_all(&b, &opts).unwrap();
            if !rep.complete() {
                continue;
            }
            assert_eq!(rep.real_count % 2, 0, "6 solutions => even real count");
            for s in &rep.solutions {
                let c = s.conj();
                let best = rep
                    .solutions
                    .iter()
                    .map(|o| o.distance(&c))
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-6 * (1.0 + complex_norm(&s.a)), "trial {trial}: {best}");
            }
        }
    }

    #[test]
    fn random_gaussian_three_three() {
        let mut complete = 0;
        for trial in 0..10 {
            let opts = TrackOptions::seeded(trial);
            let mut rng = stream_rng(trial, 10);
            let b = gaussian_tensor(&mut rng, [4, 3, 3]);
            let rep = solve_all(&b, &opts).unwrap();
            assert_eq!(rep.solutions.len() + rep.failures.len(), 6);
            if rep.complete() {
                complete += 1;
                assert!([0, 2, 4, 6].contains(&rep.real_count));
            }
        }
        assert!(complete >= 9);
    }

    #[test]
    fn solve_rejects_bad_shapes() {
        let opts = TrackOptions::seeded(0);
        assert!(solve_all(&Tensor3::zeros([5, 3, 3]), &opts).is_err());
        assert!(solve_all(&Tensor3::zeros([4, 3, 3]), &opts).is_err());
        let a = make_base_tensor(3, 3).unwrap();
        assert!(solve_all(&a, &opts).is_ok());
    }
}
