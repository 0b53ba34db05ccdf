//! Black-Scholes gamma and delta, no smile adjustment.
//!
//! Time to expiry is year-fractioned as calendar days / 365. The standard
//! normal CDF is built on Cody's rational Chebyshev erfc approximation
//! (relative error ~1e-15 across all three segments), which keeps even the
//! finite-difference delta-slope check accurate deep into the tails.

use serde::{Deserialize, Serialize};

/// One trading hour in years; stands in for T = 0 at-the-money where gamma
/// is unbounded. Keeps same-day (0DTE) gamma finite and large.
pub const EXPIRY_LIMIT_YEARS: f64 = 1.0 / (252.0 * 6.5);

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// Inputs for a single Black-Scholes evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingInputs {
    pub spot: f64,
    pub strike: f64,
    /// Years; 0 is handled as the expiry-limit case.
    pub time_to_expiry: f64,
    /// Annualized volatility fraction, > 0.
    pub implied_vol: f64,
    /// Annualized risk-free rate; structural GEX work runs this at 0.
    pub rate: f64,
}

impl PricingInputs {
    pub fn new(spot: f64, strike: f64, time_to_expiry: f64, implied_vol: f64, rate: f64) -> Self {
        Self {
            spot,
            strike,
            time_to_expiry,
            implied_vol,
            rate,
        }
    }
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF: 0.5 * erfc(-x / sqrt(2)) with Cody's erfc.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, W. J. Cody's rational Chebyshev
/// approximation (Math. Comp. 23, 1969; the SPECFUN CALERF segments).
/// Coefficients kept verbatim from the publication.
#[allow(clippy::excessive_precision)]
fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let result = if y <= 0.46875 {
        // erfc = 1 - erf on the central interval.
        const A: [f64; 5] = [
            3.16112374387056560e0,
            1.13864154151050156e2,
            3.77485237685302021e2,
            3.20937758913846947e3,
            1.85777706184603153e-1,
        ];
        const B: [f64; 4] = [
            2.36012909523441209e1,
            2.44024637934444173e2,
            1.28261652607737228e3,
            2.84423683343917062e3,
        ];
        let ysq = if y > 1.11e-16 { y * y } else { 0.0 };
        let mut num = A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + A[i]) * ysq;
            den = (den + B[i]) * ysq;
        }
        return 1.0 - x * (num + A[3]) / (den + B[3]);
    } else if y <= 4.0 {
        const C: [f64; 9] = [
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
        const D: [f64; 8] = [
            1.57449261107098347e1,
            1.17693950891312499e2,
            5.37181101862009858e2,
            1.62138957456669019e3,
            3.29079923573345963e3,
            4.36261909014324716e3,
            3.43936767414372164e3,
            1.23033935480374942e3,
        ];
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        let ratio = (num + C[7]) / (den + D[7]);
        scaled_tail(y, ratio)
    } else {
        const P: [f64; 6] = [
            3.05326634961232344e-1,
            3.60344899949804439e-1,
            1.25781726111229246e-1,
            1.60837851487422766e-2,
            6.58749161529837803e-4,
            1.63153871373020978e-2,
        ];
        const Q: [f64; 5] = [
            2.56852019228982242e0,
            1.87295284992346047e0,
            5.27905102951428412e-1,
            6.05183413124413191e-2,
            2.33520497626869185e-3,
        ];
        const SQRPI: f64 = 5.6418958354775628695e-1;
        if y >= 26.6 {
            // erfc underflows; the reflected branch saturates at 2.
            if x < 0.0 {
                return 2.0;
            }
            return 0.0;
        }
        let ysq = 1.0 / (y * y);
        let mut num = P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + P[i]) * ysq;
            den = (den + Q[i]) * ysq;
        }
        let ratio = (SQRPI - ysq * (num + P[4]) / (den + Q[4])) / y;
        scaled_tail(y, ratio)
    };
    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// exp(-y^2) * ratio, split to avoid cancellation in the exponent.
fn scaled_tail(y: f64, ratio: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * ratio
}

fn d1(inputs: &PricingInputs) -> f64 {
    let vol_sqrt_t = inputs.implied_vol * inputs.time_to_expiry.sqrt();
    ((inputs.spot / inputs.strike).ln()
        + (inputs.rate + 0.5 * inputs.implied_vol * inputs.implied_vol) * inputs.time_to_expiry)
        / vol_sqrt_t
}

/// Per-share gamma; identical for calls and puts, never negative.
///
/// T = 0 off-strike has no convexity and returns 0. T = 0 exactly at the
/// strike returns the gamma one trading hour before expiry
/// ([`EXPIRY_LIMIT_YEARS`]) instead of an infinity.
pub fn bs_gamma(inputs: &PricingInputs) -> f64 {
    if inputs.time_to_expiry <= 0.0 {
        if inputs.spot == inputs.strike {
            let limit = PricingInputs {
                time_to_expiry: EXPIRY_LIMIT_YEARS,
                ..*inputs
            };
            return bs_gamma(&limit);
        }
        return 0.0;
    }
    let g = norm_pdf(d1(inputs))
        / (inputs.spot * inputs.implied_vol * inputs.time_to_expiry.sqrt());
    g.max(0.0)
}

/// Delta fraction: call in [0, 1], put in [-1, 0].
///
/// T = 0 returns the exercise step function (0.5 at the strike).
pub fn bs_delta(inputs: &PricingInputs, kind: OptionKind) -> f64 {
    let call_delta = if inputs.time_to_expiry <= 0.0 {
        if inputs.spot > inputs.strike {
            1.0
        } else if inputs.spot < inputs.strike {
            0.0
        } else {
            0.5
        }
    } else {
        norm_cdf(d1(inputs))
    };
    match kind {
        OptionKind::Call => call_delta,
        OptionKind::Put => call_delta - 1.0,
    }
}
