//! The five data-generating models and their per-machine wavelet
//! coefficient estimators.
//!
//! Every model draws design points uniformly on `[0,1]` (the density model
//! draws observations directly from the target density). Estimators are the
//! unbiased sample means `mean(h(x) psi_{jh}(t))` with `h(x) = x` except for
//! the variance model, which uses `h(x) = x^2`; the density model averages
//! `psi_{jh}(x)` itself.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::wavelets::{synthesize_cells, CoeffIndex, CoefficientTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("cannot estimate from an empty dataset")]
    EmptyDataset,
    #[error("{0}")]
    InvalidFunction(#[from] ConstraintViolation),
}

/// Which range constraint a candidate function violated.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstraintViolation {
    #[error("function must be non-negative, found minimum {min}")]
    Negative { min: f64 },
    #[error("function must be at most 1, found maximum {max}")]
    AboveOne { max: f64 },
    #[error("function must be strictly positive, found minimum {min}")]
    NotStrictlyPositive { min: f64 },
    #[error("density must integrate to 1, found father coefficient {father}")]
    NotADensity { father: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `X | T ~ N(f(T), 1)`.
    GaussianRegression,
    /// `X ~ f` for a density `f` on `[0,1]`.
    Density,
    /// `X | T ~ Bernoulli(f(T))`.
    BinaryRegression,
    /// `X | T ~ Poisson(f(T))`.
    PoissonRegression,
    /// `X | T ~ N(0, f(T))`; the target is the variance function.
    HeteroskedasticRegression,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::GaussianRegression,
        ModelKind::Density,
        ModelKind::BinaryRegression,
        ModelKind::PoissonRegression,
        ModelKind::HeteroskedasticRegression,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Self::GaussianRegression),
            "density" => Some(Self::Density),
            "binary" => Some(Self::BinaryRegression),
            "poisson" => Some(Self::PoissonRegression),
            "heteroskedastic" => Some(Self::HeteroskedasticRegression),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianRegression => "gaussian",
            Self::Density => "density",
            Self::BinaryRegression => "binary",
            Self::PoissonRegression => "poisson",
            Self::HeteroskedasticRegression => "heteroskedastic",
        }
    }
}

/// Check the range constraints a model places on its target function, by
/// exact min/max over the function's dyadic cells.
pub fn validate_function(
    kind: ModelKind,
    table: &CoefficientTable,
) -> Result<(), ConstraintViolation> {
    let cells = synthesize_cells(table, table.max_level() + 1);
    let min = cells.iter().copied().fold(f64::INFINITY, f64::min);
    let max = cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match kind {
        ModelKind::GaussianRegression => Ok(()),
        ModelKind::Density => {
            let father = table.get(CoeffIndex::Father);
            if (father - 1.0).abs() > 1e-9 {
                return Err(ConstraintViolation::NotADensity { father });
            }
            if min < 0.0 {
                return Err(ConstraintViolation::Negative { min });
            }
            Ok(())
        }
        ModelKind::BinaryRegression => {
            if min < 0.0 {
                return Err(ConstraintViolation::Negative { min });
            }
            if max > 1.0 {
                return Err(ConstraintViolation::AboveOne { max });
            }
            Ok(())
        }
        ModelKind::PoissonRegression | ModelKind::HeteroskedasticRegression => {
            if min <= 0.0 {
                return Err(ConstraintViolation::NotStrictlyPositive { min });
            }
            Ok(())
        }
    }
}

/// A validated model: kind, true coefficient table, and precomputed caches
/// for fast evaluation and (for the density model) exact inverse-CDF
/// sampling.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    kind: ModelKind,
    truth: CoefficientTable,
    cells: Vec<f64>,
    /// Cumulative cell masses, present only for the density model.
    density_cdf: Option<Vec<f64>>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, truth: CoefficientTable) -> Result<Self, ConstraintViolation> {
        validate_function(kind, &truth)?;
        let cells = synthesize_cells(&truth, truth.max_level() + 1);
        let density_cdf = if kind == ModelKind::Density {
            let width = 1.0 / cells.len() as f64;
            let mut acc = 0.0;
            Some(
                cells
                    .iter()
                    .map(|v| {
                        acc += v * width;
                        acc
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(Self {
            kind,
            truth,
            cells,
            density_cdf,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Ground-truth coefficients; error measurement reads these directly.
    pub fn truth(&self) -> &CoefficientTable {
        &self.truth
    }

    /// Exact value of the target function at `t` (cell lookup; breakpoints
    /// resolve to the cell on their left, matching basis evaluation).
    pub fn value_at(&self, t: f64) -> f64 {
        let count = self.cells.len() as f64;
        let cell = (t * count).ceil() as usize;
        self.cells[cell.saturating_sub(1).min(self.cells.len() - 1)]
    }
}

/// One machine's sample. For regression models each pair is `(t, x)`; the
/// density model stores its observations in both slots.
#[derive(Debug, Clone, Default)]
pub struct LocalDataset {
    pub pairs: Vec<(f64, f64)>,
}

impl LocalDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Debug dump as `t,x` CSV rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x")?;
        for (t, x) in &self.pairs {
            writeln!(out, "{t},{x}")?;
        }
        Ok(())
    }
}

/// Draw `n` observations from the model.
pub fn sample(spec: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> LocalDataset {
    let mut pairs = Vec::with_capacity(n);
    match spec.kind {
        ModelKind::GaussianRegression => {
            for _ in 0..n {
                let t: f64 = rng.random();
                let z: f64 = StandardNormal.sample(rng);
                pairs.push((t, spec.value_at(t) + z));
            }
        }
        ModelKind::BinaryRegression => {
            for _ in 0..n {
                let t: f64 = rng.random();
                let u: f64 = rng.random();
                pairs.push((t, f64::from(u < spec.value_at(t))));
            }
        }
        ModelKind::PoissonRegression => {
            for _ in 0..n {
                let t: f64 = rng.random();
                let lambda = spec.value_at(t);
                let x = Poisson::new(lambda)
                    .expect("validated positive mean")
                    .sample(rng);
                pairs.push((t, x));
            }
        }
        ModelKind::HeteroskedasticRegression => {
            for _ in 0..n {
                let t: f64 = rng.random();
                let z: f64 = StandardNormal.sample(rng);
                pairs.push((t, spec.value_at(t).sqrt() * z));
            }
        }
        ModelKind::Density => {
            let cdf = spec.density_cdf.as_ref().expect("density cache");
            let width = 1.0 / cdf.len() as f64;
            for _ in 0..n {
                let u: f64 = rng.random();
                let x = inverse_cdf(cdf, width, u);
                pairs.push((x, x));
            }
        }
    }
    LocalDataset { pairs }
}

/// Exact inverse CDF over the dyadic partition: locate the cell containing
/// mass `u`, then place the point proportionally inside it (the density is
/// constant there).
fn inverse_cdf(cdf: &[f64], width: f64, u: f64) -> f64 {
    let cell = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
    let below = if cell == 0 { 0.0 } else { cdf[cell - 1] };
    let mass = cdf[cell] - below;
    let frac = if mass > 0.0 {
        ((u - below) / mass).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (cell as f64 + frac) * width
}

/// The model's estimator transform `h`.
#[inline]
pub(crate) fn h_transform(kind: ModelKind, x: f64) -> f64 {
    match kind {
        ModelKind::HeteroskedasticRegression => x * x,
        _ => x,
    }
}

/// Unbiased local estimate of one wavelet coefficient from one machine's
/// sample: `mean(h(x) psi(t))`, or `mean(psi(x))` for the density model.
pub fn local_coefficient_estimate(
    spec: &ModelSpec,
    data: &LocalDataset,
    idx: CoeffIndex,
) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let sum: f64 = match spec.kind {
        ModelKind::Density => data
            .pairs
            .iter()
            .map(|&(_, x)| crate::wavelets::eval_basis(idx, x))
            .sum(),
        kind => data
            .pairs
            .iter()
            .map(|&(t, x)| h_transform(kind, x) * crate::wavelets::eval_basis(idx, t))
            .sum(),
    };
    Ok(sum / data.len() as f64)
}

/// Local estimates for a contiguous flat-index range `[lo, hi)`, equivalent
/// to calling [`local_coefficient_estimate`] per index but accumulating all
/// levels in one pass over the data.
pub fn local_estimates_for_range(
    spec: &ModelSpec,
    data: &LocalDataset,
    lo: u64,
    hi: u64,
) -> Result<Vec<f64>, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if hi <= lo {
        return Ok(Vec::new());
    }
    let mut sums = vec![0.0; (hi - lo) as usize];
    if lo == 0 {
        // Father slot: psi = 1 everywhere, so this is just the weight sum.
        sums[0] = match spec.kind {
            ModelKind::Density => data.len() as f64,
            kind => data.pairs.iter().map(|&(_, x)| h_transform(kind, x)).sum(),
        };
    }
    // Only levels intersecting [lo, hi) can contribute; contiguous flats
    // cover a contiguous band of levels.
    let first_wavelet = lo.max(1);
    if hi > first_wavelet {
        let level_lo = 63 - first_wavelet.leading_zeros();
        let level_hi = 63 - (hi - 1).leading_zeros();
        for j in level_lo..=level_hi {
            let scale = (1u64 << j) as f64;
            let amp = scale.sqrt();
            let top = (1u64 << j) - 1;
            for &(t, x) in &data.pairs {
                let (point, weight) = match spec.kind {
                    ModelKind::Density => (x, 1.0),
                    kind => (t, h_transform(kind, x)),
                };
                let u = point * scale;
                // Cell owner under the left-limit convention of eval_basis.
                let h = (u.ceil() as u64).saturating_sub(1).min(top);
                let flat = (1u64 << j) + h;
                if flat < lo || flat >= hi {
                    continue;
                }
                let value = if u - h as f64 <= 0.5 { amp } else { -amp };
                sums[(flat - lo) as usize] += weight * value;
            }
        }
    }
    let n = data.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}
