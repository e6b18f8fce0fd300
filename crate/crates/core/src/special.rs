//! Scalar special functions backing every other module: standard normal
//! pdf/cdf/quantile, Mills' ratio, the inflation constant `h`, log-gamma,
//! the regularized lower incomplete gamma function with its inverse, and
//! the Student-t cdf with its inverse.
//!
//! All kernels are hand-rolled in double precision. Complementary forms are
//! computed directly rather than as `1 - cdf` so that tail probabilities keep
//! full relative accuracy, and large-argument gamma prefactors are evaluated
//! through `ln(1+d) - d` plus a Stirling correction so that absolute accuracy
//! holds up to shape parameters of 1e6 and beyond.

use thiserror::Error;

/// Square root of 2*pi.
pub const SQRT_2PI: f64 = 2.5066282746310002;
/// 1 / sqrt(2*pi).
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;
/// ln(2*pi) / 2.
const HALF_LN_2PI: f64 = 0.9189385332046727;
/// sqrt(pi/2), the value of Mills' ratio at zero.
const SQRT_PI_OVER_2: f64 = 1.2533141373155003;
/// Two-sided 95% normal critical value, `Phi^{-1}(0.975)`.
pub const Z_975: f64 = 1.959963984540054;

/// Error type for the numeric kernels in this module.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    /// An argument was outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(&'static str),
    /// An iterative scheme exhausted its iteration budget.
    #[error("{what} did not converge within {iters} iterations")]
    NoConvergence { what: &'static str, iters: usize },
}

/// A probability, validated once at construction to lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    /// Wraps `p` after checking it is finite and inside `[0, 1]`.
    pub fn new(p: f64) -> Result<Self, MathError> {
        if p.is_finite() && (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(MathError::Domain("probability must be finite and in [0, 1]"))
        }
    }

    /// Returns the wrapped value.
    pub fn get(self) -> f64 {
        self.0
    }

    /// Returns the complementary probability `1 - p`.
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

/// Value of the inflation constant `h(alpha)`; always strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HValue(f64);

impl HValue {
    /// Returns the wrapped value.
    pub fn get(self) -> f64 {
        self.0
    }
}

// Rational approximations for erf, erfc, and the scaled complement erfcx,
// following W. J. Cody, "Rational Chebyshev approximation for the error
// function", Math. Comp. 23 (1969), as implemented in SPECFUN's CALERF.
// Relative accuracy is about 1e-16 on each branch.

const ERF_THRESHOLD: f64 = 0.46875;
const ERFC_XBIG: f64 = 26.543;
const ERFCX_XNEG: f64 = -26.628;
const ONE_OVER_SQRT_PI: f64 = 5.6418958354775628695e-1;

const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

#[derive(Clone, Copy, PartialEq)]
enum ErfKind {
    Erf,
    Erfc,
    Erfcx,
}

/// Splits `exp(-y*y)` as `exp(-ysq*ysq) * exp(-del)` with `ysq` a multiple of
/// 1/16, which keeps the argument reduction error of the exponential small.
fn exp_neg_square(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

fn calerf(x: f64, kind: ErfKind) -> f64 {
    let y = x.abs();
    let mut result;
    if y <= ERF_THRESHOLD {
        let ysq = if y > 1.11e-16 { y * y } else { 0.0 };
        let mut num = ERF_A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + ERF_A[i]) * ysq;
            den = (den + ERF_B[i]) * ysq;
        }
        let erf = x * (num + ERF_A[3]) / (den + ERF_B[3]);
        return match kind {
            ErfKind::Erf => erf,
            ErfKind::Erfc => 1.0 - erf,
            ErfKind::Erfcx => ysq.exp() * (1.0 - erf),
        };
    } else if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        result = (num + ERF_C[7]) / (den + ERF_D[7]);
        if kind != ErfKind::Erfcx {
            result *= exp_neg_square(y);
        }
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let r = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        result = (ONE_OVER_SQRT_PI - r) / y;
        if kind != ErfKind::Erfcx {
            result = if y > ERFC_XBIG { 0.0 } else { result * exp_neg_square(y) };
        }
    }
    match kind {
        ErfKind::Erf => {
            let erf = (0.5 - result) + 0.5;
            if x < 0.0 {
                -erf
            } else {
                erf
            }
        }
        ErfKind::Erfc => {
            if x < 0.0 {
                2.0 - result
            } else {
                result
            }
        }
        ErfKind::Erfcx => {
            if x < 0.0 {
                if x < ERFCX_XNEG {
                    f64::INFINITY
                } else {
                    let ysq = (x * 16.0).trunc() / 16.0;
                    let del = (x - ysq) * (x + ysq);
                    let e = (ysq * ysq).exp() * del.exp();
                    (e + e) - result
                }
            } else {
                result
            }
        }
    }
}

/// Error function `erf(x)`.
pub fn erf(x: f64) -> f64 {
    calerf(x, ErfKind::Erf)
}

/// Complementary error function `erfc(x) = 1 - erf(x)`, accurate in the far
/// tail where the direct subtraction would lose all digits.
pub fn erfc(x: f64) -> f64 {
    calerf(x, ErfKind::Erfc)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
///
/// Saturates to `+inf` for `x` below about -26.6 where the scaling factor
/// overflows.
pub fn erfcx(x: f64) -> f64 {
    calerf(x, ErfKind::Erfcx)
}

/// Standard normal density `phi(x)`.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function `Phi(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`, computed without
/// cancellation for large `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

// Initial guess for the normal quantile: P. J. Acklam's piecewise rational
// approximation (relative error below 1.15e-9), refined here by two Halley
// steps against the cdf kernel above.

const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const ACKLAM_P_LOW: f64 = 0.02425;

/// Acklam initial estimate for `p` in `(0, 0.5]`.
fn acklam_lower(p: f64) -> f64 {
    if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        let num = ((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5];
        let den = (((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0;
        num / den
    } else {
        let q = p - 0.5;
        let r = q * q;
        let num = ((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5];
        let den = ((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
            + ACKLAM_B[4])
            * r
            + 1.0;
        num * q / den
    }
}

/// Normal quantile for raw `p` assumed to lie strictly inside `(0, 1)`.
fn std_normal_quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        return -std_normal_quantile_unchecked(1.0 - p);
    }
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let f = std_normal_cdf(x) - p;
        let u = f / std_normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Standard normal quantile `Phi^{-1}(p)`.
///
/// Absolute error stays below 1e-13 in quantile units across
/// `p in [1e-10, 1 - 1e-10]`; the endpoints `p = 0` and `p = 1` are rejected.
pub fn std_normal_quantile(p: Probability) -> Result<f64, MathError> {
    let p = p.get();
    if p <= 0.0 || p >= 1.0 {
        return Err(MathError::Domain("normal quantile requires p strictly inside (0, 1)"));
    }
    Ok(std_normal_quantile_unchecked(p))
}

/// Upper-tail standard normal quantile: the `z` with `1 - Phi(z) = p`.
///
/// Symmetry gives `z = -Phi^{-1}(p)` directly, so small tail levels keep
/// their full precision instead of being rounded away inside `1 - p`.
pub fn std_normal_upper_quantile(p: Probability) -> Result<f64, MathError> {
    Ok(-std_normal_quantile(p)?)
}

/// Mills' ratio `(1 - Phi(x)) / phi(x)`, evaluated through the scaled
/// complementary error function so it stays accurate far into the upper tail.
pub fn mills_ratio(x: f64) -> f64 {
    SQRT_PI_OVER_2 * erfcx(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// The inflation constant `h(alpha) = phi(z) / (alpha * sqrt(2*pi))` where
/// `z = Phi^{-1}(1 - alpha)`.
///
/// Equivalently `1 / (sqrt(2*pi) * R(z))` with `R` the Mills ratio, so `h`
/// grows like `z / sqrt(2*pi)` as `alpha` shrinks.
pub fn h_alpha(alpha: Probability) -> Result<HValue, MathError> {
    let a = alpha.get();
    if a <= 0.0 || a >= 1.0 {
        return Err(MathError::Domain("h(alpha) requires alpha strictly inside (0, 1)"));
    }
    // Symmetry instead of the quantile of 1 - a, which would lose the small
    // levels to the rounding of the complement.
    let z = -std_normal_quantile_unchecked(a);
    Ok(HValue(std_normal_pdf(z) / (a * SQRT_2PI)))
}

// Log-gamma via the Lanczos expansion with g = 10.900511 and 11 terms, after
// Pugh, "An analysis of the Lanczos gamma approximation" (2004). Relative
// accuracy is about 1e-14 over the positive axis.

const LANCZOS_R: f64 = 10.900511;
const LANCZOS_DK: [f64; 11] = [
    2.48574089138753565546e-5,
    1.05142378581721974210e0,
    -3.45687097222016235469e0,
    4.51227709466894823700e0,
    -2.98285225323576655721e0,
    1.05639711577126713077e0,
    -1.95428773191645869583e-1,
    1.70970543404441224307e-2,
    -5.71926117404305781283e-4,
    4.63399473359905636708e-6,
    -2.71994908488607703910e-9,
];
const LN_2_SQRT_E_OVER_PI: f64 = 0.6207822376352452;

/// Natural log of the gamma function for `x > 0`; returns NaN outside that
/// domain.
pub fn log_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x < 0.5 {
        let mut s = LANCZOS_DK[0];
        for (i, dk) in LANCZOS_DK.iter().enumerate().skip(1) {
            s += dk / (i as f64 - x);
        }
        std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - s.ln()
            - LN_2_SQRT_E_OVER_PI
            - (0.5 - x) * ((0.5 - x + LANCZOS_R) / std::f64::consts::E).ln()
    } else {
        let mut s = LANCZOS_DK[0];
        for (i, dk) in LANCZOS_DK.iter().enumerate().skip(1) {
            s += dk / (x + i as f64 - 1.0);
        }
        s.ln() + LN_2_SQRT_E_OVER_PI + (x - 0.5) * ((x - 0.5 + LANCZOS_R) / std::f64::consts::E).ln()
    }
}

/// `ln(1 + x) - x`, summed as a series for small `x` where the direct form
/// cancels.
fn ln_1p_minus_x(x: f64) -> f64 {
    if x.abs() >= 0.5 {
        return x.ln_1p() - x;
    }
    let mut power = -x;
    let mut sum = 0.0;
    for j in 2..200u32 {
        power *= -x;
        let term = -power / f64::from(j);
        sum += term;
        if term.abs() <= f64::EPSILON * sum.abs() {
            break;
        }
    }
    sum
}

/// Stirling series correction `ln Gamma(a) - [(a - 1/2) ln a - a + ln(2 pi)/2]`
/// for large `a`.
pub(crate) fn stirling_correction(a: f64) -> f64 {
    let r = 1.0 / a;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0))))
}

/// Log of the gamma prefactor `x^a e^{-x} / Gamma(a)`.
///
/// For large `a` the exponent is rearranged as
/// `a * (ln(1 + d) - d) + ln(a / 2 pi) / 2 - stirling(a)` with `d = (x-a)/a`,
/// which avoids the catastrophic cancellation between `a ln x` and `x` when
/// `x` is near `a`.
fn log_gamma_prefactor(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a < 18.0 {
        return a * x.ln() - x - log_gamma(a);
    }
    let d = (x - a) / a;
    a * ln_1p_minus_x(d) + 0.5 * a.ln() - HALF_LN_2PI - stirling_correction(a)
}

const GAMMA_FPMIN: f64 = 1e-300;

/// Regularized lower incomplete gamma function `P(a, x)`.
///
/// Uses the power series for `x < a + 1` and the Lentz continued fraction for
/// the complement otherwise. Absolute error stays below 1e-13 up to
/// `a = 1e6`.
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64, MathError> {
    if a <= 0.0 || !a.is_finite() {
        return Err(MathError::Domain("gamma shape must be positive and finite"));
    }
    if x < 0.0 || !x.is_finite() {
        return Err(MathError::Domain("gamma argument must be nonnegative and finite"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let max_iter = 400 + (20.0 * a.sqrt()) as usize;
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..max_iter {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * f64::EPSILON {
                let p = sum * log_gamma_prefactor(a, x).exp();
                return Ok(p.clamp(0.0, 1.0));
            }
        }
        Err(MathError::NoConvergence { what: "incomplete gamma series", iters: max_iter })
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / GAMMA_FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=max_iter {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < GAMMA_FPMIN {
                d = GAMMA_FPMIN;
            }
            c = b + an / c;
            if c.abs() < GAMMA_FPMIN {
                c = GAMMA_FPMIN;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() <= f64::EPSILON {
                let q = h * log_gamma_prefactor(a, x).exp();
                return Ok((1.0 - q).clamp(0.0, 1.0));
            }
        }
        Err(MathError::NoConvergence { what: "incomplete gamma continued fraction", iters: max_iter })
    }
}

/// Quantile of the Gamma(a, 1) distribution: the `x` with `P(a, x) = p`.
///
/// Wilson-Hilferty initial guess followed by bracketed Newton iteration;
/// the result satisfies `|P(a, q) - p| <= 1e-10`.
pub fn gamma_quantile(a: f64, p: Probability) -> Result<f64, MathError> {
    if a <= 0.0 || !a.is_finite() {
        return Err(MathError::Domain("gamma shape must be positive and finite"));
    }
    let p = p.get();
    if p <= 0.0 || p >= 1.0 {
        return Err(MathError::Domain("gamma quantile requires p strictly inside (0, 1)"));
    }
    let z = std_normal_quantile_unchecked(p);
    let t = 2.0 / (9.0 * a);
    let wh = 1.0 - t + z * t.sqrt();
    let mut x = a * wh * wh * wh;
    if x <= 0.0 || !x.is_finite() {
        x = (p.ln() + log_gamma(a + 1.0)).exp().powf(1.0 / a).max(GAMMA_FPMIN);
        if x <= 0.0 || !x.is_finite() {
            x = a.min(1.0) * 0.5;
        }
    }
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    let max_iter = 120;
    for _ in 0..max_iter {
        let f = regularized_gamma_p(a, x)? - p;
        if f >= 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        if f.abs() <= 1e-13 {
            return Ok(x);
        }
        let log_pdf = log_gamma_prefactor(a, x) - x.ln();
        let mut next = if log_pdf > -700.0 { x - f * (-log_pdf).exp() } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { x * 2.0 };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return Ok(next);
        }
        x = next;
    }
    Err(MathError::NoConvergence { what: "gamma quantile", iters: max_iter })
}

// Regularized incomplete beta function, needed only for the Student-t cdf.
// Continued fraction after Numerical Recipes' betacf, with the complementary
// argument passed in explicitly so that x near 1 keeps full accuracy.

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64, MathError> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < GAMMA_FPMIN {
        d = GAMMA_FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    let max_iter = 500;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < GAMMA_FPMIN {
            d = GAMMA_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < GAMMA_FPMIN {
            c = GAMMA_FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < GAMMA_FPMIN {
            d = GAMMA_FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < GAMMA_FPMIN {
            c = GAMMA_FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            return Ok(h);
        }
    }
    Err(MathError::NoConvergence { what: "incomplete beta continued fraction", iters: max_iter })
}

/// `ln Gamma(a + b) - ln Gamma(a)` for `b >= 0`, through the Stirling
/// expansion once `a` is large, so two logs of size `a ln a` are never
/// differenced directly.
fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 18.0 {
        return log_gamma(a + b) - log_gamma(a);
    }
    (a - 0.5) * (b / a).ln_1p() + b * (a + b).ln() - b + stirling_correction(a + b)
        - stirling_correction(a)
}

/// Log of the beta function `B(a, b)`.
fn ln_beta(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    log_gamma(lo) - ln_gamma_ratio(hi, lo)
}

/// Regularized incomplete beta `I_x(a, b)` with the complement `xc = 1 - x`
/// and both logs supplied by the caller, so no accuracy is lost when `x` is
/// within an ulp of 0 or 1.
fn regularized_inc_beta(
    a: f64,
    b: f64,
    x: f64,
    xc: f64,
    ln_x: f64,
    ln_xc: f64,
) -> Result<f64, MathError> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if xc <= 0.0 {
        return Ok(1.0);
    }
    let ln_bt = a * ln_x + b * ln_xc - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_bt.exp() * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - ln_bt.exp() * beta_continued_fraction(b, a, xc)? / b)
    }
}

/// Student-t distribution function with `nu >= 1` degrees of freedom.
pub fn student_t_cdf(nu: u64, t: f64) -> Result<f64, MathError> {
    if nu == 0 {
        return Err(MathError::Domain("Student-t requires at least one degree of freedom"));
    }
    if !t.is_finite() {
        return Err(MathError::Domain("Student-t argument must be finite"));
    }
    let nuf = nu as f64;
    let tt = t * t;
    let x = nuf / (nuf + tt);
    let xc = tt / (nuf + tt);
    let ln_x = -(tt / nuf).ln_1p();
    let ln_xc = if t == 0.0 { f64::NEG_INFINITY } else { 2.0 * t.abs().ln() - (nuf + tt).ln() };
    let two_tail = regularized_inc_beta(0.5 * nuf, 0.5, x, xc, ln_x, ln_xc)?;
    Ok(if t > 0.0 { 1.0 - 0.5 * two_tail } else { 0.5 * two_tail })
}

/// Log of the Student-t density with `nu` degrees of freedom.
fn student_t_log_pdf(nuf: f64, t: f64) -> f64 {
    log_gamma(0.5 * (nuf + 1.0)) - log_gamma(0.5 * nuf)
        - 0.5 * (nuf * std::f64::consts::PI).ln()
        - 0.5 * (nuf + 1.0) * (t * t / nuf).ln_1p()
}

/// Student-t quantile: the `t` with `cdf(nu, t) = p`.
///
/// Bracketed Newton iteration seeded from the normal quantile; the result
/// satisfies `|cdf(nu, q) - p| <= 1e-10`.
pub fn student_t_quantile(nu: u64, p: Probability) -> Result<f64, MathError> {
    if nu == 0 {
        return Err(MathError::Domain("Student-t requires at least one degree of freedom"));
    }
    let p = p.get();
    if p <= 0.0 || p >= 1.0 {
        return Err(MathError::Domain("Student-t quantile requires p strictly inside (0, 1)"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-student_t_quantile(nu, Probability::new(1.0 - p)?)?);
    }
    let nuf = nu as f64;
    let z = std_normal_quantile_unchecked(p);
    let init = z + (z * z * z + z) / (4.0 * nuf);
    let mut hi = init.abs().max(1.0);
    let mut guard = 0;
    while student_t_cdf(nu, hi)? < p {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 {
            return Err(MathError::NoConvergence { what: "Student-t quantile bracket", iters: guard });
        }
    }
    let mut lo = 0.0f64;
    let mut x = init.clamp(lo, hi);
    let max_iter = 200;
    for _ in 0..max_iter {
        let f = student_t_cdf(nu, x)? - p;
        if f >= 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        if f.abs() <= 1e-13 {
            return Ok(x);
        }
        let log_pdf = student_t_log_pdf(nuf, x);
        let mut next = if log_pdf > -700.0 { x - f * (-log_pdf).exp() } else { f64::NAN };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Err(MathError::NoConvergence { what: "Student-t quantile", iters: max_iter })
}
