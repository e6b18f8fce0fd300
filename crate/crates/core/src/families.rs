//! Test families and the streaming per-path state they share.
//!
//! Each family rejects its null at level `alpha` after `m` observations when
//! a statistic `T_m` exceeds zero. Observations enter as raw draws and are
//! standardized to scores with zero mean and unit variance under the null,
//! so downstream code only ever sees score sums:
//!
//! * `Gauss`: known-variance z-test, `T = s1 / sqrt(m) - z_{1-alpha}`.
//! * `Exponential`: rate test with an exact finite-sample critical value
//!   derived from the Gamma(m) distribution of the raw sum.
//! * `StudentT`: unknown-variance t-test with the exact t critical value on
//!   `m - 1` degrees of freedom.

use crate::special::{
    gamma_quantile, std_normal_upper_quantile, student_t_quantile, MathError, Probability,
};
use rand_chacha::rand_core::RngCore;
use thiserror::Error;

/// Error type for configuration and statistic evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FamilyError {
    /// A pushed observation (or its standardized score) was NaN or infinite.
    #[error("observation must be finite")]
    NonFiniteSample,
    /// The statistic was requested for fewer observations than the family
    /// supports.
    #[error("{family:?} needs at least {min} observations, state holds {got}")]
    TooFewObservations { family: TestFamilyId, min: u64, got: u64 },
    /// The configuration mixes a family with the wrong kind of null
    /// parameters, or a parameter is out of range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    /// A special-function evaluation failed.
    #[error(transparent)]
    Math(#[from] MathError),
}

/// The three one-sample test families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFamilyId {
    /// z-test for the mean of a normal with known variance.
    Gauss,
    /// test for the rate of an exponential.
    Exponential,
    /// t-test for the mean of a normal with unknown variance.
    StudentT,
}

impl TestFamilyId {
    /// Smallest sample size at which the family's statistic is defined.
    pub fn min_sample_size(self) -> u64 {
        match self {
            TestFamilyId::StudentT => 2,
            _ => 1,
        }
    }
}

/// Maps raw observations to standardized scores with zero mean and unit
/// variance under the null.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Standardizer {
    /// `y = (x - mu0) / sigma0`, for the normal families.
    Affine { mu0: f64, sigma0: f64 },
    /// `y = lambda0 * x - 1`, for the exponential family.
    Rate { lambda0: f64 },
}

impl Standardizer {
    /// Standardized score of a raw observation.
    pub fn score(&self, x: f64) -> f64 {
        match *self {
            Standardizer::Affine { mu0, sigma0 } => (x - mu0) / sigma0,
            Standardizer::Rate { lambda0 } => lambda0 * x - 1.0,
        }
    }

    fn validate(&self) -> Result<(), FamilyError> {
        match *self {
            Standardizer::Affine { mu0, sigma0 } => {
                if !mu0.is_finite() || !sigma0.is_finite() || sigma0 <= 0.0 {
                    return Err(FamilyError::InvalidConfig("affine null needs finite mu0 and sigma0 > 0"));
                }
            }
            Standardizer::Rate { lambda0 } => {
                if !lambda0.is_finite() || lambda0 <= 0.0 {
                    return Err(FamilyError::InvalidConfig("rate null needs finite lambda0 > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Complete description of one sequential testing problem: the family, the
/// nominal level, the initial sample size `n`, the number of optional extra
/// observations `k`, and the null parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub family: TestFamilyId,
    pub alpha: Probability,
    pub n: u64,
    pub k: u64,
    pub standardizer: Standardizer,
}

impl TestConfig {
    /// Builds and validates a configuration.
    pub fn new(
        family: TestFamilyId,
        alpha: Probability,
        n: u64,
        k: u64,
        standardizer: Standardizer,
    ) -> Result<Self, FamilyError> {
        let a = alpha.get();
        if a <= 0.0 || a >= 1.0 {
            return Err(FamilyError::InvalidConfig("alpha must lie strictly inside (0, 1)"));
        }
        if n < family.min_sample_size() {
            return Err(FamilyError::InvalidConfig("initial sample size too small for this family"));
        }
        standardizer.validate()?;
        match (family, standardizer) {
            (TestFamilyId::Exponential, Standardizer::Rate { .. }) => {}
            (TestFamilyId::Exponential, _) => {
                return Err(FamilyError::InvalidConfig("exponential family needs a rate null"));
            }
            (_, Standardizer::Affine { .. }) => {}
            (_, _) => {
                return Err(FamilyError::InvalidConfig("normal families need an affine null"));
            }
        }
        n.checked_add(k).ok_or(FamilyError::InvalidConfig("n + k overflows"))?;
        Ok(Self { family, alpha, n, k, standardizer })
    }

    /// Configuration with the canonical null parameters: standard normal for
    /// the normal families, unit rate for the exponential.
    pub fn with_default_null(
        family: TestFamilyId,
        alpha: Probability,
        n: u64,
        k: u64,
    ) -> Result<Self, FamilyError> {
        let standardizer = match family {
            TestFamilyId::Exponential => Standardizer::Rate { lambda0: 1.0 },
            _ => Standardizer::Affine { mu0: 0.0, sigma0: 1.0 },
        };
        Self::new(family, alpha, n, k, standardizer)
    }

    /// Largest sample size reached when all optional observations are used.
    pub fn horizon(&self) -> u64 {
        self.n + self.k
    }
}

/// Compensated accumulator so that score sums keep near-full precision over
/// millions of pushes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    #[inline]
    fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum
    }
}

/// Streaming state of one test path: the number of scores pushed so far and
/// the compensated sums of scores and squared scores.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SequentialState {
    m: u64,
    s1: KahanSum,
    s2: KahanSum,
}

impl SequentialState {
    /// Empty state.
    pub fn new() -> Self {
        Self::default()
    }

    /// Standardizes `x` through `std` and folds the score into the sums.
    #[inline]
    pub fn push(&mut self, x: f64, std: &Standardizer) -> Result<(), FamilyError> {
        let y = std.score(x);
        if !y.is_finite() {
            return Err(FamilyError::NonFiniteSample);
        }
        self.push_score(y);
        Ok(())
    }

    /// Folds an already-standardized score into the sums.
    #[inline]
    pub fn push_score(&mut self, y: f64) {
        self.m += 1;
        self.s1.add(y);
        self.s2.add(y * y);
    }

    /// Number of observations pushed.
    pub fn len(&self) -> u64 {
        self.m
    }

    /// Whether no observations have been pushed.
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Sum of scores.
    pub fn s1(&self) -> f64 {
        self.s1.value()
    }

    /// Sum of squared scores.
    pub fn s2(&self) -> f64 {
        self.s2.value()
    }

    /// Sample standard deviation of the scores, clamped to zero when
    /// round-off drives the variance estimate slightly negative.
    ///
    /// The second component reports whether clamping occurred.
    pub fn sample_sd_clamped(&self) -> (f64, bool) {
        let m = self.m as f64;
        let var = (self.s2.value() - self.s1.value() * self.s1.value() / m) / (m - 1.0);
        if var < 0.0 {
            (0.0, true)
        } else {
            (var.sqrt(), false)
        }
    }
}

/// Critical value for the family at sample size `m` and level `alpha`.
///
/// For `Gauss` and `Exponential` this is the threshold that `s1 / sqrt(m)`
/// must exceed; for `StudentT` it is the multiplier of the sample standard
/// deviation. The exponential value is exact at every finite `m` (derived
/// from the Gamma(m) law of the raw sum) and tends to the Gaussian
/// `z_{1-alpha}` as `m` grows.
pub fn critical_value(family: TestFamilyId, m: u64, alpha: Probability) -> Result<f64, FamilyError> {
    if m < family.min_sample_size() {
        return Err(FamilyError::TooFewObservations {
            family,
            min: family.min_sample_size(),
            got: m,
        });
    }
    let value = match family {
        TestFamilyId::Gauss => std_normal_upper_quantile(alpha)?,
        TestFamilyId::Exponential => {
            let mf = m as f64;
            (gamma_quantile(mf, alpha.complement())? - mf) / mf.sqrt()
        }
        TestFamilyId::StudentT => student_t_quantile(m - 1, alpha.complement())?,
    };
    Ok(value)
}

/// One-sided test statistic; the test rejects exactly when this is positive.
pub fn statistic(
    family: TestFamilyId,
    state: &SequentialState,
    alpha: Probability,
) -> Result<f64, FamilyError> {
    let m = state.len();
    let cv = critical_value(family, m, alpha)?;
    let mf = m as f64;
    let mean_scaled = state.s1() / mf.sqrt();
    Ok(match family {
        TestFamilyId::Gauss | TestFamilyId::Exponential => mean_scaled - cv,
        TestFamilyId::StudentT => {
            let (sd, _) = state.sample_sd_clamped();
            mean_scaled - cv * sd
        }
    })
}

/// Whether the family rejects at level `alpha` given the current state.
pub fn rejects(
    family: TestFamilyId,
    state: &SequentialState,
    alpha: Probability,
) -> Result<bool, FamilyError> {
    Ok(statistic(family, state, alpha)? > 0.0)
}

/// Uniform draw on the half-open interval `[0, 1)` with 53 random bits.
#[inline]
fn u53_half_open<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Uniform draw on the half-open interval `(0, 1]`, safe to pass to `ln`.
#[inline]
fn u53_open_closed<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
}

/// Draws raw observations from the family's null distribution.
///
/// Gaussian draws use the Box-Muller transform with the second variate
/// cached, so every requested sample consumes a bounded number of generator
/// words and no draw is ever discarded.
#[derive(Debug, Clone)]
pub struct NullSampler {
    standardizer: Standardizer,
    spare: Option<f64>,
}

impl NullSampler {
    /// Sampler for the null distribution described by `standardizer`.
    pub fn new(standardizer: Standardizer) -> Self {
        Self { standardizer, spare: None }
    }

    /// Sampler for the canonical null of `config`.
    pub fn for_config(config: &TestConfig) -> Self {
        Self::new(config.standardizer)
    }

    /// One raw observation from the null distribution.
    #[inline]
    pub fn next_raw<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        match self.standardizer {
            Standardizer::Affine { mu0, sigma0 } => mu0 + sigma0 * self.next_standard_normal(rng),
            Standardizer::Rate { lambda0 } => -u53_open_closed(rng).ln() / lambda0,
        }
    }

    /// One standardized score from the null distribution.
    #[inline]
    pub fn next_score<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        let raw = self.next_raw(rng);
        self.standardizer.score(raw)
    }

    #[inline]
    fn next_standard_normal<R: RngCore>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * u53_open_closed(rng).ln()).sqrt();
        let theta = std::f64::consts::TAU * u53_half_open(rng);
        let (sin, cos) = theta.sin_cos();
        self.spare = Some(r * sin);
        r * cos
    }
}
