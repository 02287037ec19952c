//! Rank-`p` certificates for `n × p × m` tensors and the Monte Carlo
//! experiments built on them.
//!
//! For `T` in the chart, `rank T = p` exactly when the real points of
//! `M(a, Y) b = 0` with `Y = μ(σ(T))` give `ψ`-vectors spanning `R^p`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::singular_values;
use crate::polyfactor::alpha_closed;
use crate::random::{gaussian_matrix, gaussian_tensor, gaussian_vec, stream_rng};
use crate::solver::{solve_all, SolveReport, TrackOptions};
use crate::tensor::{make_start_frame, mu, pencil_eval, psi, sigma, span_dim, tau, Format, Tensor3, CHART_CONDITION_LIMIT};

/// Stream offset for per-trial generators, clear of the solver's streams.
const TRIAL_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RankVerdict {
    RankP,
    RankGtP,
    Inconclusive,
}

impl RankVerdict {
    pub fn name(&self) -> &'static str {
        match self {
            RankVerdict::RankP => "RANK_P",
            RankVerdict::RankGtP => "RANK_GT_P",
            RankVerdict::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub track: TrackOptions,
    /// Relative singular-value cutoff for `dim U`.
    pub span_tol: f64,
    /// Condition-number guard for `σ`.
    pub cond_limit: f64,
}

impl CertifyOptions {
    pub fn seeded(seed: u64) -> Self {
        Self {
            track: TrackOptions::seeded(seed),
            span_tol: SPAN_TOL,
            cond_limit: CHART_CONDITION_LIMIT,
        }
    }
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self::seeded(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub span_tol: f64,
    pub real_tol: f64,
    pub kernel_tol: f64,
    pub corrector_tol: f64,
    pub dedup_tol: f64,
    pub cond_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCertificate {
    pub verdict: RankVerdict,
    pub format: Format,
    pub dim_u: usize,
    pub real_points: usize,
    pub paths_failed: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
    /// One row per real point.
    pub psi_vectors: Vec<Vec<f64>>,
    pub reason: Option<String>,
}

/// Certifies `T` (shape `n × p × m`). A chart violation in `σ` is an error.
pub fn certify(t: &Tensor3, opts: &CertifyOptions) -> Result<RankCertificate> {
    let fmt = Format::from_t_shape(t.shape)?;
    if !(opts.span_tol > 0.0) {
        return domain("span tolerance must be positive");
    }
    let w = sigma(t, fmt, opts.cond_limit)?;
    let y = mu(&w, fmt)?;
    let report = solve_all(&y, &opts.track)?;
    certificate_from_report(&report, &y, fmt, opts)
}

fn certificate_from_report(
    report: &SolveReport,
    y: &Tensor3,
    fmt: Format,
    opts: &CertifyOptions,
) -> Result<RankCertificate> {
    let track = &opts.track;
    let mut psi_vectors = Vec::new();
    let mut degenerate = Vec::new();
    for sol in report.real_solutions() {
        let (a, b) = sol.real_parts();
        let pencil = pencil_eval(&a, y)?;
        let sv = singular_values(&pencil);
        let ratio = if sv[0] > 0.0 { sv[fmt.n - 2] / sv[0] } else { 0.0 };
        if ratio < track.kernel_tol {
            degenerate.push(ratio);
        }
        psi_vectors.push(psi(&a, &b, fmt)?);
    }
    let dim_u = span_dim(&psi_vectors, opts.span_tol)?;
    let paths_failed = report.failures.len();

    let (verdict, reason) = if paths_failed > 0 {
        (
            RankVerdict::Inconclusive,
            Some(format!("{paths_failed} of {} paths failed", report.n_paths)),
        )
    } else if !degenerate.is_empty() {
        (
            RankVerdict::Inconclusive,
            Some(format!(
                "{} real point(s) have a kernel of dimension >= 2 (smallest sigma ratio {:.3e})",
                degenerate.len(),
                degenerate.iter().copied().fold(f64::INFINITY, f64::min)
            )),
        )
    } else if dim_u == fmt.p {
        (RankVerdict::RankP, None)
    } else {
        (RankVerdict::RankGtP, None)
    };

    Ok(RankCertificate {
        verdict,
        format: fmt,
        dim_u,
        real_points: psi_vectors.len(),
        paths_failed,
        n_paths: report.n_paths,
        seed: track.seed,
        tolerances: Tolerances {
            span_tol: opts.span_tol,
            real_tol: track.real_tol,
            kernel_tol: track.kernel_tol,
            corrector_tol: track.corrector_tol,
            dedup_tol: track.dedup_tol,
            cond_limit: opts.cond_limit,
        },
        psi_vectors,
        reason,
    })
}

/// `Σ_{i<terms} x_i ⊗ y_i ⊗ z_i` with standard normal factors, shape `n × p × m`.
pub fn random_low_rank<R: Rng + ?Sized>(fmt: Format, terms: usize, rng: &mut R) -> Tensor3 {
    let mut t = Tensor3::zeros(fmt.t_shape());
    for _ in 0..terms {
        let x = gaussian_vec(rng, fmt.n);
        let y = gaussian_vec(rng, fmt.p);
        let z = gaussian_vec(rng, fmt.m);
        t = t.add(&Tensor3::outer(&x, &y, &z)).expect("shapes agree");
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub verdict: RankVerdict,
    pub dim_u: usize,
    pub real_points: usize,
    pub paths_failed: usize,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub experiment: String,
    pub format: Format,
    pub eps: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub rank_p: usize,
    pub rank_gt_p: usize,
    pub inconclusive: usize,
    pub mean_dim_u: f64,
    pub max_dim_u: usize,
    pub alpha: u64,
    pub per_trial: Vec<TrialSummary>,
}

impl ExperimentStats {
    pub fn fraction(&self, verdict: RankVerdict) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let count = match verdict {
            RankVerdict::RankP => self.rank_p,
            RankVerdict::RankGtP => self.rank_gt_p,
            RankVerdict::Inconclusive => self.inconclusive,
        };
        count as f64 / self.trials as f64
    }
}

/// Default relative cutoff for `dim U`.
pub const SPAN_TOL: f64 = 1e-8;

fn run_trials<F>(
    experiment: &str,
    fmt: Format,
    eps: Option<f64>,
    trials: usize,
    seed: u64,
    span_tol: f64,
    make: F,
) -> Result<ExperimentStats>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Tensor3> + Sync,
{
    if !fmt.is_critical() {
        return domain("experiments need the critical format");
    }
    let alpha = alpha_closed(fmt.m, fmt.n)?
        .try_into()
        .map_err(|_| crate::Error::Resource("alpha exceeds u64".into()))?;
    let per_trial: Vec<TrialSummary> = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialSummary> {
            let mut rng = stream_rng(seed, TRIAL_STREAM_BASE + trial as u64);
            let t = make(&mut rng)?;
            let opts = CertifyOptions {
                span_tol,
                ..CertifyOptions::seeded(rng.random())
            };
            match certify(&t, &opts) {
                Ok(c) => Ok(TrialSummary {
                    trial,
                    verdict: c.verdict,
                    dim_u: c.dim_u,
                    real_points: c.real_points,
                    paths_failed: c.paths_failed,
                    reason: c.reason,
                }),
                Err(e @ crate::Error::ChartViolation { .. }) => Ok(TrialSummary {
                    trial,
                    verdict: RankVerdict::Inconclusive,
                    dim_u: 0,
                    real_points: 0,
                    paths_failed: 0,
                    reason: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let count = |v: RankVerdict| per_trial.iter().filter(|s| s.verdict == v).count();
    let mean_dim_u = if trials == 0 {
        0.0
    } else {
        per_trial.iter().map(|s| s.dim_u as f64).sum::<f64>() / trials as f64
    };
    Ok(ExperimentStats {
        experiment: experiment.to_string(),
        format: fmt,
        eps,
        seed,
        trials,
        rank_p: count(RankVerdict::RankP),
        rank_gt_p: count(RankVerdict::RankGtP),
        inconclusive: count(RankVerdict::Inconclusive),
        mean_dim_u,
        max_dim_u: per_trial.iter().map(|s| s.dim_u).max().unwrap_or(0),
        alpha,
        per_trial,
    })
}

/// Certifies `τ(W₀ + εR)` for `trials` independent standard normal `R`.
pub fn perturb_experiment(fmt: Format, eps: f64, trials: usize, seed: u64) -> Result<ExperimentStats> {
    perturb_experiment_with(fmt, eps, trials, seed, SPAN_TOL)
}

pub fn perturb_experiment_with(
    fmt: Format,
    eps: f64,
    trials: usize,
    seed: u64,
    span_tol: f64,
) -> Result<ExperimentStats> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return domain("eps must be a finite non-negative number");
    }
    let w0 = make_start_frame(fmt.m, fmt.n)?.w0;
    run_trials("perturb", fmt, Some(eps), trials, seed, span_tol, |rng| {
        let r = gaussian_matrix(rng, fmt.u, fmt.p);
        tau(&(&w0 + r * eps), fmt)
    })
}

/// Certifies tensors with independent standard normal entries.
pub fn global_experiment(fmt: Format, trials: usize, seed: u64) -> Result<ExperimentStats> {
    global_experiment_with(fmt, trials, seed, SPAN_TOL)
}

pub fn global_experiment_with(fmt: Format, trials: usize, seed: u64, span_tol: f64) -> Result<ExperimentStats> {
    run_trials("global", fmt, None, trials, seed, span_tol, |rng| {
        Ok(gaussian_tensor(rng, fmt.t_shape()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn assert_invariants(c: &RankCertificate) {
        match c.verdict {
            RankVerdict::RankP => assert_eq!(c.dim_u, c.format.p),
            RankVerdict::RankGtP => assert!(c.dim_u < c.format.p && c.paths_failed == 0),
            RankVerdict::Inconclusive => assert!(c.reason.is_some()),
        }
        if c.paths_failed > 0 {
            assert_eq!(c.verdict, RankVerdict::Inconclusive);
        }
        assert!(c.dim_u <= c.real_points.min(c.format.p));
    }

    #[test]
    fn perturbed_w0_is_rank_gt_p() {
        let fmt = Format::critical(3, 5).unwrap();
        let w0 = make_start_frame(3, 5).unwrap().w0;
        let mut rng = stream_rng(11, 0);
        let r = gaussian_matrix(&mut rng, fmt.u, fmt.p);
        let t = tau(&(&w0 + r * 1e-3), fmt).unwrap();
        let c = certify(&t, &CertifyOptions::seeded(4)).unwrap();
        assert_invariants(&c);
        assert_eq!(c.verdict, RankVerdict::RankGtP);
        assert_eq!(c.real_points, 3);
        assert!(c.dim_u <= 3);
        assert_eq!(c.psi_vectors.len(), c.real_points);
    }

    #[test]
    fn low_rank_sums_are_never_rank_gt_p() {
        for (m, n) in [(3, 3), (3, 4)] {
            let fmt = Format::critical(m, n).unwrap();
            let mut rank_p = 0;
            for trial in 0..100 {
                let mut rng = stream_rng(5, trial);
                let t = random_low_rank(fmt, fmt.p, &mut rng);
                let Ok(c) = certify(&t, &CertifyOptions::seeded(trial)) else { continue };
                assert_ne!(c.verdict, RankVerdict::RankGtP, "({m},{n}) trial {trial}");
                assert_invariants(&c);
                rank_p += (c.verdict == RankVerdict::RankP) as usize;
            }
            assert!(rank_p >= 90, "({m},{n}): {rank_p}");
        }
    }

    #[test]
    fn verdict_invariant_under_slice_action() {
        let fmt = Format::critical(3, 3).unwrap();
        let mut checked = 0;
        for trial in 0..20u64 {
            let mut rng = stream_rng(21, trial);
            let t = gaussian_tensor(&mut rng, fmt.t_shape());
            let p = gaussian_matrix(&mut rng, fmt.n, fmt.n);
            let q = gaussian_matrix(&mut rng, fmt.p, fmt.p);
            let moved = t.transform(&p, &q).unwrap();
            let opts = CertifyOptions::seeded(trial);
            let (Ok(a), Ok(b)) = (certify(&t, &opts), certify(&moved, &opts)) else { continue };
            assert_invariants(&a);
            assert_invariants(&b);
            if a.verdict == RankVerdict::Inconclusive || b.verdict == RankVerdict::Inconclusive {
                continue;
            }
            assert_eq!(a.verdict, b.verdict, "trial {trial}");
            checked += 1;
        }
        assert!(checked >= 15, "{checked}");
    }

    #[test]
    fn global_four_by_four_finds_rank_gt_p() {
        let stats = global_experiment(Format::critical(4, 4).unwrap(), 20, 2).unwrap();
        assert!(stats.rank_gt_p > 0);
        assert_eq!(stats.alpha, 0);
    }

    #[test]
    fn singular_leading_block_is_refused() {
        let fmt = Format::critical(3, 3).unwrap();
        let t = Tensor3::zeros(fmt.t_shape());
        assert!(matches!(
            certify(&t, &CertifyOptions::default()),
            Err(Error::ChartViolation { .. })
        ));
    }

    #[test]
    fn experiments_are_deterministic() {
        let fmt = Format::critical(3, 3).unwrap();
        let a = perturb_experiment(fmt, 1e-3, 6, 9).unwrap();
        let b = perturb_experiment(fmt, 1e-3, 6, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rank_p + a.rank_gt_p + a.inconclusive, 6);
        let g1 = global_experiment(fmt, 6, 3).unwrap();
        let g2 = global_experiment(fmt, 6, 3).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn zero_eps_and_zero_trials() {
        let fmt = Format::critical(3, 3).unwrap();
        let stats = perturb_experiment(fmt, 0.0, 3, 1).unwrap();
        assert_eq!(stats.rank_gt_p, 3);
        let dims: Vec<_> = stats.per_trial.iter().map(|s| (s.dim_u, s.real_points)).collect();
        assert!(dims.iter().all(|d| *d == dims[0]));
        assert_eq!(dims[0].1, 2);

        let empty = global_experiment(fmt, 0, 1).unwrap();
        assert_eq!(empty.trials, 0);
        assert_eq!(empty.mean_dim_u, 0.0);
        assert!(perturb_experiment(fmt, -1.0, 1, 1).is_err());
    }

    #[test]
    fn tau_w0_recovers_start_tensor() {
        let fmt = Format::critical(3, 4).unwrap();
        let frame = make_start_frame(3, 4).unwrap();
        let t = tau(&frame.w0, fmt).unwrap();
        let w = sigma(&t, fmt, CHART_CONDITION_LIMIT).unwrap();
        let y = mu(&w, fmt).unwrap();
        assert_eq!(y.max_abs_diff(&frame.aprime), 0.0);
    }
}
