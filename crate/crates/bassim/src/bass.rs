//! Bit-adjusted sample size: the effective sample size of a distributed
//! network under per-machine bit budgets, plus the quantities derived from
//! it (estimation rate, block size, maximum resolution level).
//!
//! All logarithms are base 2 so that the fixed point, the block layout and
//! the bit ledger stay mutually consistent; switching bases only moves
//! constants.

/// Relative tolerance for the fixed-point bisection.
const BISECTION_REL_TOL: f64 = 1e-12;
const BISECTION_MAX_ITERS: u32 = 200;

/// Network shape plus one bit budget per machine.
#[derive(Debug, Clone)]
pub struct NetworkConfig {
    /// Local sample size (>= 2).
    pub n: u64,
    /// Machine count (>= 1).
    pub m: u64,
    /// Per-machine bit budgets, one entry per machine.
    pub budgets: Vec<f64>,
    /// Smoothness of the target function class (> 0).
    pub r: f64,
}

impl NetworkConfig {
    pub fn symmetric(n: u64, m: u64, budget: f64, r: f64) -> Self {
        Self {
            n,
            m,
            budgets: vec![budget; m as usize],
            r,
        }
    }

    /// Total sample size across machines.
    pub fn total(&self) -> u64 {
        self.n * self.m
    }

    fn validate(&self) {
        assert!(self.n >= 2, "need n >= 2");
        assert!(self.m >= 1, "need m >= 1");
        assert_eq!(self.budgets.len() as u64, self.m, "one budget per machine");
        assert!(self
            .budgets
            .iter()
            .all(|b| *b >= 0.0 && b.is_finite() || b.is_infinite() && *b > 0.0));
        assert!(self.r > 0.0 && self.r.is_finite());
        assert!(self.total() >= 4, "need n*m >= 4 so log2(N) >= 2");
    }
}

/// Budget regime of the symmetric closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Budget large enough that nothing is lost to communication.
    Full,
    /// Budget-limited band where the value depends on B.
    Intermediate,
    /// Budget so small that a single machine's data is as good.
    Local,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Intermediate => "intermediate",
            Self::Local => "local",
        }
    }
}

/// A computed bit-adjusted sample size.
#[derive(Debug, Clone, Copy)]
pub struct BassResult {
    pub value: f64,
    /// Regime tag; only the symmetric closed form assigns one.
    pub regime: Option<Regime>,
    /// Relative fixed-point residual of `value`.
    pub residual: f64,
}

/// Right-hand side of the defining fixed-point equation at candidate `x`.
fn fixed_point_rhs(cfg: &NetworkConfig, x: f64) -> f64 {
    let n = cfg.n as f64;
    let log_n_total = (cfg.total() as f64).log2();
    let damp = x.powf(1.0 / (1.0 + 2.0 * cfg.r));
    let sum: f64 = cfg
        .budgets
        .iter()
        .map(|&b| (b * log_n_total / damp).min(1.0))
        .sum();
    (n * log_n_total).max(n * sum)
}

fn relative_residual(cfg: &NetworkConfig, x: f64) -> f64 {
    (fixed_point_rhs(cfg, x) - x) / x
}

/// Solve the fixed-point equation `x = max(n log N, n sum_k min(B_k log N /
/// x^{1/(1+2r)}, 1))` by bisection. The left side is increasing and the right
/// side non-increasing in `x`, so the solution is unique and bracketed by
/// `[n log N, max(N, n log N)]`.
pub fn bass_general(cfg: &NetworkConfig) -> BassResult {
    cfg.validate();
    let n = cfg.n as f64;
    let total = cfg.total() as f64;
    let log_n_total = total.log2();

    let mut lo = n * log_n_total;
    let mut hi = total.max(lo);
    if relative_residual(cfg, lo) <= 0.0 {
        // The budget sum never lifts the right side above its floor.
        return BassResult {
            value: lo,
            regime: None,
            residual: relative_residual(cfg, lo),
        };
    }
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if fixed_point_rhs(cfg, mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= BISECTION_REL_TOL * hi {
            break;
        }
    }
    let value = 0.5 * (lo + hi);
    BassResult {
        value,
        regime: None,
        residual: relative_residual(cfg, value),
    }
}

/// Closed form for equal budgets: `N` in the full regime,
/// `(N B log N)^{(1+2r)/(2+2r)}` in the intermediate band, `n log N` in the
/// local regime. When `m <= log2 N` the fixed point equals `n log N` for
/// every budget and is tagged local.
pub fn bass_symmetric(n: u64, m: u64, budget: f64, r: f64) -> BassResult {
    let cfg = NetworkConfig::symmetric(n, m, budget, r);
    cfg.validate();
    let n_f = n as f64;
    let total = cfg.total() as f64;
    let log_n_total = total.log2();
    let exponent = 1.0 / (1.0 + 2.0 * r);

    let (value, regime) = if m as f64 <= log_n_total {
        // n log N >= N: the floor arm dominates regardless of budget.
        (n_f * log_n_total, Regime::Local)
    } else if budget >= total.powf(exponent) / log_n_total {
        (total, Regime::Full)
    } else if budget >= (n_f * log_n_total).powf(exponent) / m as f64 {
        (
            (total * budget * log_n_total).powf((1.0 + 2.0 * r) / (2.0 + 2.0 * r)),
            Regime::Intermediate,
        )
    } else {
        (n_f * log_n_total, Regime::Local)
    };

    BassResult {
        value,
        regime: Some(regime),
        residual: relative_residual(&cfg, value),
    }
}

/// Estimation rate implied by a bit-adjusted sample size:
/// `bass^{-r/(1+2r)}`. The reported mean squared error scales as its square.
pub fn minimax_rate(n: u64, m: u64, budget: f64, r: f64) -> f64 {
    bass_symmetric(n, m, budget, r)
        .value
        .powf(-r / (1.0 + 2.0 * r))
}

/// Number of machines per block:
/// `max(1, floor((B m / log2 N)^{(1+2r)/(2+2r)} n^{-1/(2+2r)}) min m)`.
pub fn block_size_kappa(budget: f64, n: u64, m: u64, r: f64) -> u64 {
    assert!(n * m >= 4);
    let log_n_total = ((n * m) as f64).log2();
    let q_eff = budget / log_n_total;
    let raw = (q_eff * m as f64).powf((1.0 + 2.0 * r) / (2.0 + 2.0 * r))
        * (n as f64).powf(-1.0 / (2.0 + 2.0 * r));
    (raw.floor() as u64).min(m).max(1)
}

/// Maximum resolution level estimable from an effective sample of `n * kappa`
/// observations per coefficient: `floor(log2(n kappa) / (1 + 2r))`.
pub fn max_resolution(n: u64, kappa: u64, r: f64) -> u32 {
    assert!(n * kappa >= 1);
    (((n * kappa) as f64).log2() / (1.0 + 2.0 * r)).floor() as u32
}
