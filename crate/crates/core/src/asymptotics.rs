//! Closed-form predictors for the inflated level and, for the Gaussian
//! one-extra-observation case, a deterministic quadrature that pins the
//! inflation exactly at finite `n`.
//!
//! The central quantity is the relative inflation
//! `rho = alpha_{n,k} / alpha - 1`. Two asymptotic predictors are provided:
//!
//! * the sum formula `rho = (h / sqrt(n)) * sqrt(2 pi) * sum_l E(S_l)_+ / l`,
//!   driven by expected positive parts of the score walk, and
//! * the square-root limit `rho = 2 h sqrt(k / n)`, accurate when `k` is
//!   large but still small next to `n`.
//!
//! For Gaussian scores `E(S_l)_+ = sqrt(l / 2 pi)` and the sum formula
//! collapses to `(h / sqrt(n)) * sum_l 1 / sqrt(l)`.

use crate::families::TestFamilyId;
use crate::special::{
    h_alpha, log_gamma, std_normal_pdf, std_normal_sf, std_normal_upper_quantile,
    stirling_correction, HValue, MathError, Probability, SQRT_2PI,
};
use std::sync::OnceLock;

/// Which asymptotic formula produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Per-step sum over expected positive parts of the score walk.
    SumFormula,
    /// Two-term square-root limit `2 h sqrt(k / n)`.
    SqrtLimit,
}

/// Where the expected positive parts fed into the sum formula came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EslSource {
    /// `sqrt(l / 2 pi)`, exact for Gaussian scores.
    ClosedFormGauss,
    /// `(l / e)^l / (l - 1)!`, exact for centered exponential scores.
    ClosedFormExponential,
    /// Monte Carlo estimates.
    MonteCarlo,
}

/// A predicted relative inflation together with everything that went into it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBreakdown {
    /// Predicted relative inflation `rho`.
    pub rho: f64,
    /// The inflation constant `h(alpha)`.
    pub h: HValue,
    /// Per-extra-observation contributions; `rho = h / sqrt(n) * sum(terms)`.
    /// Empty in `SqrtLimit` mode.
    pub terms: Vec<f64>,
    /// Formula used.
    pub mode: PredictionMode,
    /// Provenance of the expected positive parts; `None` in `SqrtLimit` mode.
    pub esl_source: Option<EslSource>,
}

/// Closed-form `E(S_l)_+` for a walk of `l` i.i.d. standardized scores.
///
/// Gaussian (and Student-t) scores give `sqrt(l / 2 pi)`; centered
/// exponential scores give `(l / e)^l / (l - 1)!`, evaluated in log space so
/// it stays finite for large `l`.
pub fn esl_plus_closed_form(family: TestFamilyId, ell: u64) -> Result<f64, MathError> {
    if ell == 0 {
        return Err(MathError::Domain("expected positive part needs ell >= 1"));
    }
    let lf = ell as f64;
    Ok(match family {
        TestFamilyId::Gauss | TestFamilyId::StudentT => {
            (lf / (2.0 * std::f64::consts::PI)).sqrt()
        }
        TestFamilyId::Exponential => {
            if lf < 18.0 {
                (lf * (lf.ln() - 1.0) - log_gamma(lf)).exp()
            } else {
                // Stirling rearrangement of the same expression; the direct
                // form would difference two logs of size ell ln ell.
                (lf / (2.0 * std::f64::consts::PI)).sqrt() * (-stirling_correction(lf)).exp()
            }
        }
    })
}

/// Sum-formula prediction of the relative inflation, with the expected
/// positive parts `esl[l - 1] = E(S_l)_+` supplied by the caller (closed
/// form or Monte Carlo).
pub fn predict_rho_sum(
    n: u64,
    k: u64,
    alpha: Probability,
    esl: &[f64],
    source: EslSource,
) -> Result<PredictionBreakdown, MathError> {
    if n == 0 {
        return Err(MathError::Domain("initial sample size must be at least 1"));
    }
    if k == 0 {
        return Err(MathError::Domain("prediction needs at least one extra observation"));
    }
    if (esl.len() as u64) < k {
        return Err(MathError::Domain("one expected positive part per extra observation is required"));
    }
    if esl.iter().take(k as usize).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(MathError::Domain("expected positive parts must be finite and nonnegative"));
    }
    let h = h_alpha(alpha)?;
    let terms: Vec<f64> = (1..=k).map(|l| SQRT_2PI * esl[(l - 1) as usize] / l as f64).collect();
    let rho = h.get() / (n as f64).sqrt() * terms.iter().sum::<f64>();
    Ok(PredictionBreakdown {
        rho,
        h,
        terms,
        mode: PredictionMode::SumFormula,
        esl_source: Some(source),
    })
}

/// Square-root-limit prediction `rho = 2 h sqrt(k / n)`.
pub fn predict_rho_sqrt(n: u64, k: u64, alpha: Probability) -> Result<PredictionBreakdown, MathError> {
    if n == 0 {
        return Err(MathError::Domain("initial sample size must be at least 1"));
    }
    if k == 0 {
        return Err(MathError::Domain("prediction needs at least one extra observation"));
    }
    let h = h_alpha(alpha)?;
    let rho = 2.0 * h.get() * (k as f64 / n as f64).sqrt();
    Ok(PredictionBreakdown {
        rho,
        h,
        terms: Vec::new(),
        mode: PredictionMode::SqrtLimit,
        esl_source: None,
    })
}

/// Whether `(n, k)` sits outside the regime where the square-root limit is
/// trustworthy; callers should surface a warning when this returns true.
pub fn sqrt_regime_strained(n: u64, k: u64) -> bool {
    k as f64 > 0.1 * n as f64
}

/// Result of the adaptive quadrature: the inflated level, an a-posteriori
/// error estimate, and the number of panels in the final refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub est_error: f64,
    pub panels: u32,
}

/// 64-point Gauss-Legendre nodes and weights on `[-1, 1]`, computed once by
/// Newton iteration on the Legendre recurrence.
fn gauss_legendre_64() -> &'static ([f64; 64], [f64; 64]) {
    static TABLE: OnceLock<([f64; 64], [f64; 64])> = OnceLock::new();
    TABLE.get_or_init(|| {
        const N: usize = 64;
        let mut nodes = [0.0f64; N];
        let mut weights = [0.0f64; N];
        let nf = N as f64;
        for i in 0..N.div_ceil(2) {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 0..N {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
                }
                pp = nf * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[N - 1 - i] = z;
            weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
            weights[N - 1 - i] = weights[i];
        }
        (nodes, weights)
    })
}

const QUAD_UPPER: f64 = 45.0;
const QUAD_BASE_PANELS: u32 = 45;
const QUAD_MAX_LEVEL: u32 = 6;

/// Inflated level `alpha_{n,1}` of the Gaussian z-test with one optional
/// extra observation, by deterministic quadrature:
///
/// `alpha_{n,1} = alpha + (1 / sqrt(n)) * Int_0^inf
///     (1 - Phi(c + u)) * phi(z - u / sqrt(n)) du`
///
/// with `z = Phi^{-1}(1 - alpha)` and `c = z / (sqrt(n+1) + sqrt(n))`.
/// Panel density is doubled until two successive refinements agree to within
/// `tol` on the level scale.
pub fn exact_gauss_k1(n: u64, alpha: Probability, tol: f64) -> Result<QuadratureResult, MathError> {
    if n == 0 {
        return Err(MathError::Domain("initial sample size must be at least 1"));
    }
    let a = alpha.get();
    if a <= 0.0 || a >= 1.0 {
        return Err(MathError::Domain("level must lie strictly inside (0, 1)"));
    }
    if tol <= 0.0 || !tol.is_finite() {
        return Err(MathError::Domain("quadrature tolerance must be positive and finite"));
    }
    let z = std_normal_upper_quantile(alpha)?;
    let nf = n as f64;
    let rn = nf.sqrt();
    let c = z / ((nf + 1.0).sqrt() + rn);
    let (nodes, weights) = gauss_legendre_64();

    let mut prev = f64::NAN;
    for level in 0..=QUAD_MAX_LEVEL {
        let panels = QUAD_BASE_PANELS << level;
        let width = QUAD_UPPER / panels as f64;
        let half = 0.5 * width;
        let mut integral = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            let mut acc = 0.0;
            for j in 0..64 {
                let u = mid + half * nodes[j];
                acc += weights[j] * std_normal_sf(c + u) * std_normal_pdf(z - u / rn);
            }
            integral += acc * half;
        }
        if !prev.is_nan() {
            let est_error = (integral - prev).abs() / rn;
            if est_error <= tol {
                return Ok(QuadratureResult { value: a + integral / rn, est_error, panels });
            }
        }
        prev = integral;
    }
    Err(MathError::NoConvergence {
        what: "quadrature panel refinement",
        iters: QUAD_MAX_LEVEL as usize,
    })
}

/// One row of the shortfall lower-bound table: the closed-form `E(S_l)_+`
/// next to the bound `sqrt(l / 2) * E(S_1)_+` it must dominate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EslBoundRow {
    pub ell: u64,
    pub closed_form: f64,
    pub lower_bound: f64,
}

/// Tabulates closed-form expected positive parts against the
/// `sqrt(l / 2) * E(S_1)_+` lower bound for `l = 1..=ell_max`, without
/// asserting the comparison.
pub fn esl_lower_bound_check(
    family: TestFamilyId,
    ell_max: u64,
) -> Result<Vec<EslBoundRow>, MathError> {
    if ell_max == 0 {
        return Err(MathError::Domain("lower-bound table needs ell_max >= 1"));
    }
    let first = esl_plus_closed_form(family, 1)?;
    (1..=ell_max)
        .map(|ell| {
            Ok(EslBoundRow {
                ell,
                closed_form: esl_plus_closed_form(family, ell)?,
                lower_bound: (ell as f64 / 2.0).sqrt() * first,
            })
        })
        .collect()
}
