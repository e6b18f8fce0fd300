//! Reproducible Monte Carlo engine.
//!
//! Every replication index owns its own ChaCha8 stream derived from the
//! master seed, so each path can be regenerated in isolation and results are
//! a pure function of `(master seed, replication count)`. Work is split into
//! fixed-size chunks whose partial results are merged in index order, which
//! makes the output bit-identical for every worker count.

use crate::families::{
    FamilyError, NullSampler, SequentialState, Standardizer, TestConfig, TestFamilyId,
};
use crate::special::{MathError, Z_975};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Replications per scheduling chunk; partial histograms are merged in chunk
/// order regardless of which worker produced them.
const CHUNK_REPS: u64 = 16_384;

/// Error type for the engine entry points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    /// A replication count, worker count, or exponent was out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    /// Configuration or statistic evaluation failed.
    #[error(transparent)]
    Family(#[from] FamilyError),
    /// A special-function evaluation failed.
    #[error(transparent)]
    Math(#[from] MathError),
    /// The worker pool could not be constructed.
    #[error("worker pool: {0}")]
    WorkerPool(String),
}

/// Master seed plus the per-replication stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    master_seed: u64,
}

impl RngSpec {
    /// Spec with the given master seed.
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    /// The master seed.
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Generator for one replication: ChaCha8 keyed by the master seed on
    /// stream `replication`, independent of every other replication.
    pub fn replication_rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replication);
        rng
    }
}

/// A mean together with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanWithSe {
    pub mean: f64,
    pub se: f64,
}

fn mean_with_se(sum: f64, sumsq: f64, reps: u64) -> MeanWithSe {
    let nf = reps as f64;
    let mean = sum / nf;
    let var = ((sumsq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    MeanWithSe { mean, se: (var / nf).sqrt() }
}

/// Wilson score interval for a binomial proportion at 95% coverage.
fn wilson_ci95(successes: u64, reps: u64) -> (f64, f64) {
    let z = Z_975;
    let nf = reps as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    (((center - half) / denom).max(0.0), ((center + half) / denom).min(1.0))
}

/// Monte Carlo estimate of the inflated level and everything derived from it.
///
/// `se` and `ci95` quantify `alpha_hat_nk`; the corresponding uncertainty on
/// `rho_hat` is available through [`InflationEstimate::rho_se`] and
/// [`InflationEstimate::rho_ci95`].
#[derive(Debug, Clone, PartialEq)]
pub struct InflationEstimate {
    pub config: TestConfig,
    pub reps: u64,
    /// `first_rejection[l]` counts paths whose first rejection happened at
    /// sample size `n + l`; index 0 is the initial test.
    pub first_rejection: Vec<u64>,
    /// Paths rejecting at any sample size in `n..=n+k`.
    pub reject_any: u64,
    /// Paths rejecting already at the initial sample size.
    pub reject_initial: u64,
    pub alpha_hat_nk: f64,
    pub alpha_hat_n: f64,
    pub rho_hat: f64,
    pub se: f64,
    pub ci95: (f64, f64),
}

impl InflationEstimate {
    fn from_histogram(config: TestConfig, reps: u64, first_rejection: Vec<u64>) -> Self {
        let reject_any: u64 = first_rejection.iter().sum();
        let reject_initial = first_rejection[0];
        let nf = reps as f64;
        let alpha_hat_nk = reject_any as f64 / nf;
        let alpha_hat_n = reject_initial as f64 / nf;
        let alpha = config.alpha.get();
        let rho_hat = alpha_hat_nk / alpha - 1.0;
        let se = (alpha_hat_nk * (1.0 - alpha_hat_nk) / nf).sqrt();
        let ci95 = wilson_ci95(reject_any, reps);
        Self {
            config,
            reps,
            first_rejection,
            reject_any,
            reject_initial,
            alpha_hat_nk,
            alpha_hat_n,
            rho_hat,
            se,
            ci95,
        }
    }

    /// Standard error of `rho_hat`.
    pub fn rho_se(&self) -> f64 {
        self.se / self.config.alpha.get()
    }

    /// 95% Wilson interval mapped to the `rho` scale.
    pub fn rho_ci95(&self) -> (f64, f64) {
        let alpha = self.config.alpha.get();
        (self.ci95.0 / alpha - 1.0, self.ci95.1 / alpha - 1.0)
    }
}

/// Per-sample-size critical values, cached once so the hot loop never
/// evaluates a quantile. `rejects_at` reproduces the arithmetic of
/// [`crate::families::statistic`] exactly.
struct Thresholds {
    cvs: Vec<f64>,
    sqrt_m: Vec<f64>,
    uses_sd: bool,
}

impl Thresholds {
    fn for_config(config: &TestConfig) -> Result<Self, EngineError> {
        let mut cvs = Vec::with_capacity(config.k as usize + 1);
        let mut sqrt_m = Vec::with_capacity(config.k as usize + 1);
        for m in config.n..=config.horizon() {
            cvs.push(crate::families::critical_value(config.family, m, config.alpha)?);
            sqrt_m.push((m as f64).sqrt());
        }
        Ok(Self { cvs, sqrt_m, uses_sd: config.family == TestFamilyId::StudentT })
    }

    #[inline]
    fn rejects_at(&self, state: &SequentialState, l: usize) -> bool {
        let mean_scaled = state.s1() / self.sqrt_m[l];
        let statistic = if self.uses_sd {
            let (sd, _) = state.sample_sd_clamped();
            mean_scaled - self.cvs[l] * sd
        } else {
            mean_scaled - self.cvs[l]
        };
        statistic > 0.0
    }
}

/// Simulates the sequential testing scheme: draw `n` null observations, test
/// at level `alpha`, then keep appending one of the `k` optional extra
/// observations and re-testing until the first rejection (the path stops
/// there) or the horizon is reached.
///
/// Returns counts and estimates for the inflated level
/// `alpha_{n,k} = P(reject at some sample size in n..=n+k)`.
pub fn simulate_alpha_nk(
    config: &TestConfig,
    reps: u64,
    rng: RngSpec,
    workers: usize,
) -> Result<InflationEstimate, EngineError> {
    if reps == 0 {
        return Err(EngineError::InvalidArgument("reps must be at least 1"));
    }
    if workers == 0 {
        return Err(EngineError::InvalidArgument("workers must be at least 1"));
    }
    let thresholds = Thresholds::for_config(config)?;
    let n = config.n;
    let k = config.k as usize;
    let n_chunks = reps.div_ceil(CHUNK_REPS);

    let run_chunk = |chunk: u64| -> Vec<u64> {
        let lo = chunk * CHUNK_REPS;
        let hi = (lo + CHUNK_REPS).min(reps);
        let mut hist = vec![0u64; k + 1];
        for r in lo..hi {
            let mut gen = rng.replication_rng(r);
            let mut sampler = NullSampler::for_config(config);
            let mut state = SequentialState::new();
            for _ in 0..n {
                state.push_score(sampler.next_score(&mut gen));
            }
            if thresholds.rejects_at(&state, 0) {
                hist[0] += 1;
                continue;
            }
            #[allow(clippy::needless_range_loop)]
            for l in 1..=k {
                state.push_score(sampler.next_score(&mut gen));
                if thresholds.rejects_at(&state, l) {
                    hist[l] += 1;
                    break;
                }
            }
        }
        hist
    };

    let partials: Vec<Vec<u64>> = if workers == 1 {
        (0..n_chunks).map(run_chunk).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| EngineError::WorkerPool(e.to_string()))?;
        pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect())
    };

    let mut first_rejection = vec![0u64; k + 1];
    for partial in partials {
        for (total, part) in first_rejection.iter_mut().zip(partial) {
            *total += part;
        }
    }
    Ok(InflationEstimate::from_histogram(*config, reps, first_rejection))
}

/// Monte Carlo estimates of the expected positive parts `E(S_l)_+` of the
/// score walk, all horizons sharing the same simulated paths.
///
/// The per-path running maximum and the per-path weighted sum
/// `sum_l (S_l)_+ / l` are accumulated alongside, together with their
/// difference, whose mean is zero by the prefix-maximum identity; `kac_gap`
/// therefore measures the identity directly with the shared-path variance.
#[derive(Debug, Clone, PartialEq)]
pub struct EslEstimate {
    pub family: TestFamilyId,
    pub ell_max: u64,
    pub reps: u64,
    /// `per_ell[l - 1]` estimates `E(S_l)_+`.
    pub per_ell: Vec<MeanWithSe>,
    /// Mean of `sum_l (S_l)_+ / l` per path.
    pub spitzer_sum: MeanWithSe,
    /// Mean of `max_{0 <= l <= ell_max} S_l` per path.
    pub prefix_max: MeanWithSe,
    /// Mean of `prefix_max - spitzer_sum` per path; statistically zero.
    pub kac_gap: MeanWithSe,
}

/// Estimates `E(S_l)_+` for `l = 1..=ell_max` from `reps` simulated score
/// walks of the family's null distribution.
pub fn estimate_esl_plus(
    family: TestFamilyId,
    ell_max: u64,
    reps: u64,
    rng: RngSpec,
) -> Result<EslEstimate, EngineError> {
    if ell_max == 0 {
        return Err(EngineError::InvalidArgument("ell_max must be at least 1"));
    }
    if reps < 2 {
        return Err(EngineError::InvalidArgument("standard errors need at least 2 replications"));
    }
    let standardizer = match family {
        TestFamilyId::Exponential => Standardizer::Rate { lambda0: 1.0 },
        _ => Standardizer::Affine { mu0: 0.0, sigma0: 1.0 },
    };
    let lm = ell_max as usize;
    let mut sum = vec![0.0f64; lm];
    let mut sumsq = vec![0.0f64; lm];
    let mut agg = [0.0f64; 6];
    for r in 0..reps {
        let mut gen = rng.replication_rng(r);
        let mut sampler = NullSampler::new(standardizer);
        let mut s = 0.0f64;
        let mut run_max = 0.0f64;
        let mut spitzer = 0.0f64;
        for l in 1..=lm {
            s += sampler.next_score(&mut gen);
            let pos = if s > 0.0 { s } else { 0.0 };
            sum[l - 1] += pos;
            sumsq[l - 1] += pos * pos;
            spitzer += pos / l as f64;
            if s > run_max {
                run_max = s;
            }
        }
        let gap = run_max - spitzer;
        agg[0] += spitzer;
        agg[1] += spitzer * spitzer;
        agg[2] += run_max;
        agg[3] += run_max * run_max;
        agg[4] += gap;
        agg[5] += gap * gap;
    }
    let per_ell = sum
        .iter()
        .zip(&sumsq)
        .map(|(&s, &sq)| mean_with_se(s, sq, reps))
        .collect();
    Ok(EslEstimate {
        family,
        ell_max,
        reps,
        per_ell,
        spitzer_sum: mean_with_se(agg[0], agg[1], reps),
        prefix_max: mean_with_se(agg[2], agg[3], reps),
        kac_gap: mean_with_se(agg[4], agg[5], reps),
    })
}

/// Score distribution for the pair-sum moment check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VbeKernel {
    /// Standard normal scores.
    GaussProduct,
    /// Centered unit-rate exponential scores.
    ExponentialProduct,
}

/// Both sides of the pair-sum moment bound
/// `E|sum_{i<j} x_i x_j|^p <= 4 E sum_{i<j} |x_i x_j|^p`, each with its
/// standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct VbeCheck {
    pub kernel: VbeKernel,
    pub n: u64,
    pub p: f64,
    pub reps: u64,
    pub lhs: MeanWithSe,
    pub rhs: MeanWithSe,
    /// Whether the estimated left side is below the estimated right side.
    pub holds: bool,
    /// `(rhs - lhs) / sqrt(se_lhs^2 + se_rhs^2)`.
    pub margin_sigmas: f64,
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v.abs()
    } else if p == 2.0 {
        v * v
    } else if p == 1.5 {
        let a = v.abs();
        a * a.sqrt()
    } else {
        v.abs().powf(p)
    }
}

/// Estimates both sides of the pair-sum moment bound for `n` i.i.d. scores
/// and exponent `p in [1, 2]`.
///
/// Per replication the left side contributes `|M|^p` with
/// `M = ((sum x)^2 - sum x^2) / 2`, and the right side contributes
/// `4 * ((sum |x|^p)^2 - sum |x|^{2p}) / 2`, which is the same pair sum
/// applied to `|x_i|^p`.
pub fn vbe_bound_check(
    kernel: VbeKernel,
    n: u64,
    p: f64,
    reps: u64,
    rng: RngSpec,
) -> Result<VbeCheck, EngineError> {
    if n < 2 {
        return Err(EngineError::InvalidArgument("pair sum needs at least 2 observations"));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(EngineError::InvalidArgument("exponent must lie in [1, 2]"));
    }
    if reps < 2 {
        return Err(EngineError::InvalidArgument("standard errors need at least 2 replications"));
    }
    let standardizer = match kernel {
        VbeKernel::GaussProduct => Standardizer::Affine { mu0: 0.0, sigma0: 1.0 },
        VbeKernel::ExponentialProduct => Standardizer::Rate { lambda0: 1.0 },
    };
    let mut lhs_sum = 0.0f64;
    let mut lhs_sumsq = 0.0f64;
    let mut rhs_sum = 0.0f64;
    let mut rhs_sumsq = 0.0f64;
    for r in 0..reps {
        let mut gen = rng.replication_rng(r);
        let mut sampler = NullSampler::new(standardizer);
        let mut sx = 0.0f64;
        let mut sx2 = 0.0f64;
        let mut sp = 0.0f64;
        let mut sp2 = 0.0f64;
        for _ in 0..n {
            let x = sampler.next_score(&mut gen);
            sx += x;
            sx2 += x * x;
            let a = abs_pow(x, p);
            sp += a;
            sp2 += a * a;
        }
        let pair_sum = 0.5 * (sx * sx - sx2);
        let lhs_sample = abs_pow(pair_sum, p);
        let rhs_sample = 2.0 * (sp * sp - sp2);
        lhs_sum += lhs_sample;
        lhs_sumsq += lhs_sample * lhs_sample;
        rhs_sum += rhs_sample;
        rhs_sumsq += rhs_sample * rhs_sample;
    }
    let lhs = mean_with_se(lhs_sum, lhs_sumsq, reps);
    let rhs = mean_with_se(rhs_sum, rhs_sumsq, reps);
    let spread = (lhs.se * lhs.se + rhs.se * rhs.se).sqrt();
    Ok(VbeCheck {
        kernel,
        n,
        p,
        reps,
        lhs,
        rhs,
        holds: lhs.mean <= rhs.mean,
        margin_sigmas: (rhs.mean - lhs.mean) / spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::esl_plus_closed_form;
    use crate::families::rejects;
    use crate::special::Probability;

    fn prob(p: f64) -> Probability {
        Probability::new(p).unwrap()
    }

    fn gauss_config(n: u64, k: u64, alpha: f64) -> TestConfig {
        TestConfig::with_default_null(TestFamilyId::Gauss, prob(alpha), n, k).unwrap()
    }

    #[test]
    fn worker_count_does_not_change_a_single_bit() {
        let config = gauss_config(10, 3, 0.1);
        let spec = RngSpec::new(42);
        let one = simulate_alpha_nk(&config, 40_000, spec, 1).unwrap();
        let two = simulate_alpha_nk(&config, 40_000, spec, 2).unwrap();
        let eight = simulate_alpha_nk(&config, 40_000, spec, 8).unwrap();
        assert_eq!(one.first_rejection, two.first_rejection);
        assert_eq!(one.first_rejection, eight.first_rejection);
        assert_eq!(one.alpha_hat_nk.to_bits(), eight.alpha_hat_nk.to_bits());
        assert_eq!(one.rho_hat.to_bits(), eight.rho_hat.to_bits());
    }

    #[test]
    fn histogram_decomposes_the_rejection_count() {
        let config = gauss_config(5, 4, 0.2);
        let est = simulate_alpha_nk(&config, 30_000, RngSpec::new(7), 1).unwrap();
        assert_eq!(est.first_rejection.len(), 5);
        assert_eq!(est.first_rejection.iter().sum::<u64>(), est.reject_any);
        assert_eq!(est.first_rejection[0], est.reject_initial);
        assert_eq!(est.alpha_hat_nk, est.reject_any as f64 / 30_000.0);
        assert!(est.ci95.0 <= est.alpha_hat_nk && est.alpha_hat_nk <= est.ci95.1);
    }

    #[test]
    fn level_inflation_is_monotone_in_k_under_a_shared_seed() {
        let spec = RngSpec::new(99);
        let mut prev = -1.0;
        let mut initial_counts = Vec::new();
        for k in 0..=4 {
            let config = gauss_config(8, k, 0.1);
            let est = simulate_alpha_nk(&config, 20_000, spec, 1).unwrap();
            assert!(
                est.alpha_hat_nk >= prev,
                "alpha_hat dropped when k grew to {k}: {} < {prev}",
                est.alpha_hat_nk
            );
            prev = est.alpha_hat_nk;
            initial_counts.push(est.reject_initial);
        }
        assert!(
            initial_counts.windows(2).all(|w| w[0] == w[1]),
            "initial-test rejections changed with k: {initial_counts:?}"
        );
    }

    #[test]
    fn engine_matches_a_replay_through_the_public_statistic() {
        let configs = [
            TestConfig::with_default_null(TestFamilyId::Gauss, prob(0.2), 4, 3).unwrap(),
            TestConfig::with_default_null(TestFamilyId::Exponential, prob(0.2), 4, 3).unwrap(),
            TestConfig::with_default_null(TestFamilyId::StudentT, prob(0.2), 4, 3).unwrap(),
        ];
        let reps = 2_000u64;
        let spec = RngSpec::new(1234);
        for config in configs {
            let est = simulate_alpha_nk(&config, reps, spec, 1).unwrap();
            let mut hist = vec![0u64; config.k as usize + 1];
            for r in 0..reps {
                let mut gen = spec.replication_rng(r);
                let mut sampler = NullSampler::for_config(&config);
                let mut state = SequentialState::new();
                for _ in 0..config.n {
                    state.push_score(sampler.next_score(&mut gen));
                }
                if rejects(config.family, &state, config.alpha).unwrap() {
                    hist[0] += 1;
                    continue;
                }
                #[allow(clippy::needless_range_loop)]
                for l in 1..=config.k as usize {
                    state.push_score(sampler.next_score(&mut gen));
                    if rejects(config.family, &state, config.alpha).unwrap() {
                        hist[l] += 1;
                        break;
                    }
                }
            }
            assert_eq!(
                est.first_rejection, hist,
                "engine and statistic replay disagree for {:?}",
                config.family
            );
        }
    }

    #[test]
    fn shortfall_estimates_match_closed_forms() {
        for family in [TestFamilyId::Gauss, TestFamilyId::Exponential] {
            let est = estimate_esl_plus(family, 5, 200_000, RngSpec::new(5)).unwrap();
            for (i, point) in est.per_ell.iter().enumerate() {
                let ell = (i + 1) as u64;
                let want = esl_plus_closed_form(family, ell).unwrap();
                let gap = (point.mean - want).abs();
                assert!(
                    gap <= 4.0 * point.se,
                    "{family:?} ell={ell}: mean {:.6e} vs closed {want:.6e}, {:.1} se",
                    point.mean,
                    gap / point.se
                );
            }
        }
    }

    #[test]
    fn prefix_max_identity_holds_within_noise_on_shared_paths() {
        for family in [TestFamilyId::Gauss, TestFamilyId::Exponential] {
            let est = estimate_esl_plus(family, 5, 100_000, RngSpec::new(17)).unwrap();
            assert!(
                est.kac_gap.mean.abs() <= 4.0 * est.kac_gap.se,
                "{family:?}: prefix-max gap {:.3e} exceeds 4 se ({:.3e})",
                est.kac_gap.mean,
                est.kac_gap.se
            );
            let direct = est.prefix_max.mean - est.spitzer_sum.mean;
            assert!((direct - est.kac_gap.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_sum_bound_is_exactly_four_fold_at_n_2() {
        let check =
            vbe_bound_check(VbeKernel::GaussProduct, 2, 1.5, 50_000, RngSpec::new(3)).unwrap();
        let ratio = check.rhs.mean / check.lhs.mean;
        assert!(
            (ratio - 4.0).abs() < 1e-12,
            "n=2 ratio should be 4 up to round-off, got {ratio:.17}"
        );
        assert!(check.holds);
    }

    #[test]
    fn pair_sum_moments_match_known_normal_values() {
        let check =
            vbe_bound_check(VbeKernel::GaussProduct, 5, 2.0, 200_000, RngSpec::new(11)).unwrap();
        assert!(
            (check.lhs.mean - 10.0).abs() <= 6.0 * check.lhs.se,
            "E|M|^2 for 5 normals: {:.4} (se {:.4})",
            check.lhs.mean,
            check.lhs.se
        );
        assert!(
            (check.rhs.mean - 40.0).abs() <= 6.0 * check.rhs.se,
            "bound side for 5 normals: {:.4} (se {:.4})",
            check.rhs.mean,
            check.rhs.se
        );
    }

    #[test]
    fn engine_rejects_degenerate_arguments() {
        let config = gauss_config(10, 1, 0.05);
        assert!(simulate_alpha_nk(&config, 0, RngSpec::new(1), 1).is_err());
        assert!(simulate_alpha_nk(&config, 10, RngSpec::new(1), 0).is_err());
        assert!(estimate_esl_plus(TestFamilyId::Gauss, 0, 10, RngSpec::new(1)).is_err());
        assert!(estimate_esl_plus(TestFamilyId::Gauss, 3, 1, RngSpec::new(1)).is_err());
        assert!(vbe_bound_check(VbeKernel::GaussProduct, 1, 1.5, 10, RngSpec::new(1)).is_err());
        assert!(vbe_bound_check(VbeKernel::GaussProduct, 4, 2.5, 10, RngSpec::new(1)).is_err());
        assert!(vbe_bound_check(VbeKernel::GaussProduct, 4, 0.5, 10, RngSpec::new(1)).is_err());
    }

    #[test]
    fn replication_streams_are_reproducible_and_distinct() {
        let spec = RngSpec::new(2024);
        let mut a = spec.replication_rng(0);
        let mut b = spec.replication_rng(0);
        let mut c = spec.replication_rng(1);
        use rand_chacha::rand_core::RngCore;
        let va = a.next_u64();
        assert_eq!(va, b.next_u64());
        assert_ne!(va, c.next_u64());
    }
}
