//! Executable oracles for the scalar inequalities used in the error
//! analysis, each checkable at any point of its validity range. Ranges are
//! enforced strictly: the inequalities claim nothing outside them.

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("x = {x} outside the validity range [{lo}, {hi}] of {bound:?}")]
    OutOfRange {
        bound: BoundId,
        x: f64,
        lo: f64,
        hi: f64,
    },
    #[error("lambda must be positive and finite, got {0}")]
    BadLambda(f64),
    #[error("|t| must be <= 1, got {0}")]
    BadT(f64),
}

/// The checkable scalar inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundId {
    /// `1 + 2x + x^2 <= (1+x)/(1-x) <= 1 + 2x + 4x^2` and
    /// `x^2 <= ((1+x)/(1-x) - 1)^2 <= 16 x^2`, for `-1 <= x <= 1/2`.
    Ratio,
    /// `-x - x^2 <= log(1 - x)` for `|x| <= 1/2`.
    LogOneMinus,
    /// `2x - 4x^2 <= log((1+x)/(1-x)) <= 2x + 4x^2` for `|x| <= 1/2`.
    LogRatio,
    /// `0 <= x log((1+x)/(1-x)) <= 4x^2` for `|x| <= 1/2`.
    LogRatioProduct,
    /// `(log x)^2 >= (x-1)^2 / 2` for `0 < x < sqrt(2)`.
    LogSquared,
    /// `(log((1+x)/(1-x)))^2 >= x^2 / 2` for `-1 < x < (sqrt(2)-1)/(sqrt(2)+1)`.
    LogRatioSquared,
    /// Sub-exponential bound on the centered Poisson moment generating
    /// function, via [`poisson_mgf_slack`].
    PoissonMgf,
}

impl BoundId {
    /// Validity interval; booleans mark whether each endpoint is included.
    pub fn range(&self) -> (f64, bool, f64, bool) {
        let upper_18 = (std::f64::consts::SQRT_2 - 1.0) / (std::f64::consts::SQRT_2 + 1.0);
        match self {
            Self::Ratio => (-1.0, true, 0.5, true),
            Self::LogOneMinus | Self::LogRatio | Self::LogRatioProduct => (-0.5, true, 0.5, true),
            Self::LogSquared => (0.0, false, std::f64::consts::SQRT_2, false),
            Self::LogRatioSquared => (-1.0, false, upper_18, false),
            Self::PoissonMgf => (-1.0, true, 1.0, true),
        }
    }

    fn contains(&self, x: f64) -> bool {
        let (lo, lo_closed, hi, hi_closed) = self.range();
        let above = if lo_closed { x >= lo } else { x > lo };
        let below = if hi_closed { x <= hi } else { x < hi };
        above && below
    }
}

/// Outcome of checking one inequality at one point. `lhs`/`rhs` are the
/// lemma's central expression and its binding bound; `holds` covers every
/// inequality of the lemma at `x`.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub bound_id: BoundId,
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `log((1+x)/(1-x))` evaluated stably near zero.
fn log_ratio(x: f64) -> f64 {
    x.ln_1p() - (-x).ln_1p()
}

/// Check one scalar inequality at `x`.
pub fn scalar_bound_check(bound_id: BoundId, x: f64) -> Result<BoundCheck, BoundsError> {
    if !x.is_finite() || !bound_id.contains(x) {
        let (lo, _, hi, _) = bound_id.range();
        return Err(BoundsError::OutOfRange {
            bound: bound_id,
            x,
            lo,
            hi,
        });
    }
    let (lhs, rhs, holds) = match bound_id {
        BoundId::Ratio => {
            let ratio = (1.0 + x) / (1.0 - x);
            let lower = 1.0 + 2.0 * x + x * x;
            let upper = 1.0 + 2.0 * x + 4.0 * x * x;
            let centered_sq = (ratio - 1.0) * (ratio - 1.0);
            let holds = lower <= ratio
                && ratio <= upper
                && x * x <= centered_sq
                && centered_sq <= 16.0 * x * x;
            (ratio, upper, holds)
        }
        BoundId::LogOneMinus => {
            let lhs = -x - x * x;
            let rhs = (-x).ln_1p();
            (lhs, rhs, lhs <= rhs)
        }
        BoundId::LogRatio => {
            let lr = log_ratio(x);
            let lower = 2.0 * x - 4.0 * x * x;
            let upper = 2.0 * x + 4.0 * x * x;
            (lr, upper, lower <= lr && lr <= upper)
        }
        BoundId::LogRatioProduct => {
            let product = x * log_ratio(x);
            let upper = 4.0 * x * x;
            (product, upper, 0.0 <= product && product <= upper)
        }
        BoundId::LogSquared => {
            let lhs = x.ln() * x.ln();
            let rhs = (x - 1.0) * (x - 1.0) / 2.0;
            (lhs, rhs, lhs >= rhs)
        }
        BoundId::LogRatioSquared => {
            let lr = log_ratio(x);
            let lhs = lr * lr;
            let rhs = x * x / 2.0;
            (lhs, rhs, lhs >= rhs)
        }
        BoundId::PoissonMgf => {
            let slack = poisson_mgf_slack(1.0, x)?;
            (x * x, x * x - slack, slack >= -1e-12)
        }
    };
    Ok(BoundCheck {
        bound_id,
        x,
        lhs,
        rhs,
        holds,
    })
}

/// Slack `t^2 lambda - log E[exp(t(X - lambda))]` for `X ~ Poisson(lambda)`,
/// using the closed-form log-MGF `lambda (e^t - 1) - t lambda`. Non-negative
/// for `|t| <= 1`, which is the sub-exponential property of the centered
/// Poisson.
pub fn poisson_mgf_slack(lambda: f64, t: f64) -> Result<f64, BoundsError> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(BoundsError::BadLambda(lambda));
    }
    if t.is_nan() || t.abs() > 1.0 {
        return Err(BoundsError::BadT(t));
    }
    // exp_m1 keeps the cancellation near t = 0 under control.
    let log_mgf = lambda * t.exp_m1() - t * lambda;
    Ok(t * t * lambda - log_mgf)
}
