//! Experiment harness: single runs, parameter sweeps with replicated
//! Monte-Carlo scoring, CSV emission, and log-log slope fitting against the
//! predicted rate.

pub mod chart;

use rayon::prelude::*;

use crate::bass::{bass_symmetric, minimax_rate, Regime};
use crate::models::{ModelKind, ModelSpec};
use crate::protocol::{estimate_with, Transport};
use crate::wavelets::{make_test_function, CoefficientTable, TestFunctionKind};

/// Header of the per-run CSV row emitted by [`run_single`].
pub const RUN_CSV_HEADER: &str =
    "model,r,n,m,B,kappa,j_n,nbass,rate_pred,mse_trunc,mse_tail,max_bits,seed";

/// Header of the per-replicate results CSV written by [`sweep`].
pub const RESULTS_CSV_HEADER: &str =
    "model,r,n,m,B,replicate,kappa,j_n,nbass,rate_pred,mse_trunc,mse_tail,max_bits,seed";

/// Header of the per-point summary CSV written by [`sweep`].
pub const SUMMARY_CSV_HEADER: &str =
    "model,r,n,m,B,kappa,j_n,nbass,regime,rate_pred,replicates,median_mse_trunc,median_mse_tail";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("line {line}: expected `key = value`")]
    BadLine { line: usize },
    #[error("key `{key}`: {problem}")]
    BadValue { key: String, problem: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid has {0} points; at most 255 are supported")]
    GridTooLarge(usize),
    #[error("replicates must be >= 1")]
    NoReplicates,
    #[error("grid point (n={n}, m={m}): {problem}")]
    BadGridPoint { n: u64, m: u64, problem: String },
    #[error("model function invalid: {0}")]
    InvalidFunction(#[from] crate::models::ConstraintViolation),
    #[error("{0}")]
    BadFunction(#[from] crate::wavelets::WaveletError),
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: u64,
    pub m: u64,
    pub budget: f64,
}

/// Test-function selection shared by all grid points of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct FunctionSpec {
    pub kind: TestFunctionKind,
    pub r: f64,
    pub l: f64,
    pub c0: f64,
}

impl FunctionSpec {
    pub fn build(&self) -> Result<CoefficientTable, crate::wavelets::WaveletError> {
        make_test_function(self.kind, self.r, self.l, self.c0)
    }
}

/// Full sweep configuration.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub function: FunctionSpec,
    pub grid: Vec<GridPoint>,
    pub replicates: u32,
    pub seed: u64,
}

impl SweepConfig {
    /// Parse the flat `key = value` config format. Grid points are either an
    /// explicit `grid.points = n:m:B; n:m:B; ...` list or the cross product
    /// of `grid.n`, `grid.m`, `grid.b` comma lists.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_seed(text, None)
    }

    /// [`parse`](Self::parse) with a seed supplied out of band (e.g. a CLI
    /// flag); it overrides any `seed` key in the file.
    pub fn parse_with_seed(text: &str, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let mut model = None;
        let mut kind = None;
        let mut r = None;
        let mut l = None;
        let mut c0 = 0.0;
        let mut points: Option<Vec<GridPoint>> = None;
        let mut grid_n: Option<Vec<u64>> = None;
        let mut grid_m: Option<Vec<u64>> = None;
        let mut grid_b: Option<Vec<f64>> = None;
        let mut replicates = None;
        let mut seed = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine { line: lineno + 1 })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |problem: &str| ConfigError::BadValue {
                key: key.to_string(),
                problem: problem.to_string(),
            };
            match key {
                "model" => {
                    model = Some(ModelKind::parse(value).ok_or_else(|| bad("unknown model kind"))?)
                }
                "func.kind" => {
                    kind = Some(
                        TestFunctionKind::parse(value)
                            .ok_or_else(|| bad("unknown function kind"))?,
                    )
                }
                "func.r" => r = Some(value.parse().map_err(|_| bad("not a number"))?),
                "func.l" => l = Some(value.parse().map_err(|_| bad("not a number"))?),
                "func.c0" => c0 = value.parse().map_err(|_| bad("not a number"))?,
                "grid.points" => {
                    let mut list = Vec::new();
                    for piece in value.split(';') {
                        let piece = piece.trim();
                        if piece.is_empty() {
                            continue;
                        }
                        let mut it = piece.split(':');
                        let n = it
                            .next()
                            .and_then(|s| s.trim().parse().ok())
                            .ok_or_else(|| bad("expected n:m:B"))?;
                        let m = it
                            .next()
                            .and_then(|s| s.trim().parse().ok())
                            .ok_or_else(|| bad("expected n:m:B"))?;
                        let budget = it
                            .next()
                            .and_then(|s| s.trim().parse().ok())
                            .ok_or_else(|| bad("expected n:m:B"))?;
                        list.push(GridPoint { n, m, budget });
                    }
                    points = Some(list);
                }
                "grid.n" => grid_n = Some(parse_list(value).map_err(|p| bad(&p))?),
                "grid.m" => grid_m = Some(parse_list(value).map_err(|p| bad(&p))?),
                "grid.b" => grid_b = Some(parse_list(value).map_err(|p| bad(&p))?),
                "replicates" => {
                    replicates = Some(value.parse().map_err(|_| bad("not an integer"))?)
                }
                "seed" => seed = Some(value.parse().map_err(|_| bad("not an integer"))?),
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }

        let grid = match points {
            Some(p) => p,
            None => {
                let ns = grid_n.ok_or(ConfigError::MissingKey("grid.n or grid.points"))?;
                let ms = grid_m.ok_or(ConfigError::MissingKey("grid.m"))?;
                let bs = grid_b.ok_or(ConfigError::MissingKey("grid.b"))?;
                let mut all = Vec::new();
                for &n in &ns {
                    for &m in &ms {
                        for &budget in &bs {
                            all.push(GridPoint { n, m, budget });
                        }
                    }
                }
                all
            }
        };

        let config = SweepConfig {
            model: model.ok_or(ConfigError::MissingKey("model"))?,
            function: FunctionSpec {
                kind: kind.ok_or(ConfigError::MissingKey("func.kind"))?,
                r: r.ok_or(ConfigError::MissingKey("func.r"))?,
                l: l.ok_or(ConfigError::MissingKey("func.l"))?,
                c0,
            },
            grid,
            replicates: replicates.ok_or(ConfigError::MissingKey("replicates"))?,
            seed: seed_override
                .or(seed)
                .ok_or(ConfigError::MissingKey("seed (file key or --seed)"))?,
        };
        config.validated()
    }

    /// Check grid shape and model-validity of the function at every point.
    pub fn validated(self) -> Result<Self, ConfigError> {
        if self.grid.is_empty() {
            return Err(ConfigError::EmptyGrid);
        }
        if self.grid.len() > 255 {
            return Err(ConfigError::GridTooLarge(self.grid.len()));
        }
        if self.replicates == 0 {
            return Err(ConfigError::NoReplicates);
        }
        for p in &self.grid {
            if p.n < 2 || p.m < 1 || p.n * p.m < 4 {
                return Err(ConfigError::BadGridPoint {
                    n: p.n,
                    m: p.m,
                    problem: "need n >= 2, m >= 1, n*m >= 4".to_string(),
                });
            }
            if p.budget.is_nan() || p.budget < 0.0 {
                return Err(ConfigError::BadGridPoint {
                    n: p.n,
                    m: p.m,
                    problem: format!("budget {} must be non-negative", p.budget),
                });
            }
        }
        let table = self.function.build()?;
        crate::models::validate_function(self.model, &table)?;
        Ok(self)
    }

    pub fn build_spec(&self) -> Result<ModelSpec, ConfigError> {
        Ok(ModelSpec::new(self.model, self.function.build()?)?)
    }
}

fn parse_list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| format!("bad list element `{}`", s.trim()))
        })
        .collect()
}

/// Format one result as a CSV row under [`RUN_CSV_HEADER`].
pub fn run_csv_row(model: ModelKind, result: &crate::protocol::ExperimentResult) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        model.name(),
        result.r,
        result.n,
        result.m,
        result.budget,
        result.kappa,
        result.j_n,
        result.nbass,
        rate_prediction(result.n, result.m, result.budget, result.r),
        result.mse_truncated,
        result.mse_with_tail,
        result.max_bits(),
        result.seed,
    )
}

/// Predicted mean squared error: the squared estimation rate.
pub fn rate_prediction(n: u64, m: u64, budget: f64, r: f64) -> f64 {
    let rate = minimax_rate(n, m, budget, r);
    rate * rate
}

/// Run one configured point once and return (result, CSV row).
pub fn run_single(
    config: &SweepConfig,
    point: GridPoint,
) -> Result<(crate::protocol::ExperimentResult, String), ConfigError> {
    let spec = config.build_spec()?;
    let result = estimate_with(
        &spec,
        point.n,
        point.m,
        point.budget,
        config.function.r,
        config.seed,
        0,
        0,
        Transport::Codec,
    );
    let row = run_csv_row(config.model, &result);
    Ok((result, row))
}

/// Per-point aggregate of a sweep.
#[derive(Debug, Clone)]
pub struct PointSummary {
    pub point: GridPoint,
    pub kappa: u64,
    pub j_n: u32,
    pub nbass: f64,
    pub regime: Regime,
    pub rate_prediction: f64,
    pub median_mse_truncated: f64,
    pub median_mse_with_tail: f64,
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in logs {
        cov += (x - mean_x) * (y - mean_y);
        var += (x - mean_x) * (x - mean_x);
    }
    if var == 0.0 {
        return None;
    }
    Some(cov / var)
}

/// A completed sweep: both CSV artifacts plus the fitted slope.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub results_csv: String,
    pub summary_csv: String,
    pub points: Vec<PointSummary>,
    /// Slope of log(median MSE) vs log(nbass) over intermediate-regime
    /// points; `None` when fewer than two qualify.
    pub slope_intermediate: Option<f64>,
    /// True when the grid spans more than one budget regime, which flattens
    /// slope fits.
    pub mixed_regimes: bool,
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in MSE"));
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

/// Run every grid point for `replicates` Monte-Carlo rounds (parallel across
/// point x replicate), then summarize. Output is a pure function of
/// (config, seed): replicates use disjoint counter-based RNG streams and
/// rows are emitted in grid order.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutcome, ConfigError> {
    let spec = config.build_spec()?;
    let jobs: Vec<(usize, u32)> = (0..config.grid.len())
        .flat_map(|p| (0..config.replicates).map(move |rep| (p, rep)))
        .collect();

    let results: Vec<crate::protocol::ExperimentResult> = jobs
        .par_iter()
        .map(|&(point_idx, replicate)| {
            let point = config.grid[point_idx];
            estimate_with(
                &spec,
                point.n,
                point.m,
                point.budget,
                config.function.r,
                config.seed,
                point_idx as u32,
                replicate,
                Transport::Codec,
            )
        })
        .collect();

    let mut results_csv = String::from(RESULTS_CSV_HEADER);
    results_csv.push('\n');
    for result in &results {
        use std::fmt::Write;
        writeln!(
            results_csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.model.name(),
            result.r,
            result.n,
            result.m,
            result.budget,
            result.replicate,
            result.kappa,
            result.j_n,
            result.nbass,
            rate_prediction(result.n, result.m, result.budget, result.r),
            result.mse_truncated,
            result.mse_with_tail,
            result.max_bits(),
            result.seed,
        )
        .expect("write to string");
    }

    let mut points = Vec::with_capacity(config.grid.len());
    let mut summary_csv = String::from(SUMMARY_CSV_HEADER);
    summary_csv.push('\n');
    for (point_idx, &point) in config.grid.iter().enumerate() {
        let chunk = &results
            [point_idx * config.replicates as usize..(point_idx + 1) * config.replicates as usize];
        let mut trunc: Vec<f64> = chunk.iter().map(|r| r.mse_truncated).collect();
        let mut tail: Vec<f64> = chunk.iter().map(|r| r.mse_with_tail).collect();
        let bass = bass_symmetric(point.n, point.m, point.budget, config.function.r);
        let summary = PointSummary {
            point,
            kappa: chunk[0].kappa,
            j_n: chunk[0].j_n,
            nbass: bass.value,
            regime: bass.regime.expect("symmetric budgets"),
            rate_prediction: rate_prediction(point.n, point.m, point.budget, config.function.r),
            median_mse_truncated: median(&mut trunc),
            median_mse_with_tail: median(&mut tail),
        };
        use std::fmt::Write;
        writeln!(
            summary_csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.model.name(),
            config.function.r,
            point.n,
            point.m,
            point.budget,
            summary.kappa,
            summary.j_n,
            summary.nbass,
            summary.regime.name(),
            summary.rate_prediction,
            config.replicates,
            summary.median_mse_truncated,
            summary.median_mse_with_tail,
        )
        .expect("write to string");
        points.push(summary);
    }

    let intermediate: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.regime == Regime::Intermediate)
        .map(|p| (p.nbass, p.median_mse_with_tail))
        .collect();
    let slope_intermediate = fit_loglog_slope(&intermediate);
    let regimes: std::collections::BTreeSet<&str> =
        points.iter().map(|p| p.regime.name()).collect();

    Ok(SweepOutcome {
        results_csv,
        summary_csv,
        points,
        slope_intermediate,
        mixed_regimes: regimes.len() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG_TEXT: &str = "\
# comment lines and blanks are ignored

model = gaussian
func.kind = rough
func.r = 0.5
func.l = 1.0
func.c0 = 0.0
grid.points = 64:8:40 ; 64:8:66
replicates = 3
seed = 9
";

    #[test]
    fn parses_flat_config() {
        let config = SweepConfig::parse(CONFIG_TEXT).unwrap();
        assert_eq!(config.model, ModelKind::GaussianRegression);
        assert_eq!(config.grid.len(), 2);
        assert_eq!(
            config.grid[0],
            GridPoint {
                n: 64,
                m: 8,
                budget: 40.0
            }
        );
        assert_eq!(config.replicates, 3);
        assert_eq!(config.seed, 9);
    }

    #[test]
    fn cross_product_grid() {
        let text = "\
model = poisson
func.kind = rough
func.r = 0.5
func.l = 1.0
func.c0 = 1.0
grid.n = 64,128
grid.m = 4
grid.b = 30,60
replicates = 1
seed = 1
";
        let config = SweepConfig::parse(text).unwrap();
        assert_eq!(config.grid.len(), 4);
        assert_eq!(config.grid[3].n, 128);
        assert_eq!(config.grid[3].budget, 60.0);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            SweepConfig::parse("model = gaussian\nbogus = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            SweepConfig::parse("model gaussian"),
            Err(ConfigError::BadLine { line: 1 })
        ));
        // Binary model with an out-of-range function is a config error.
        let text = CONFIG_TEXT.replace("model = gaussian", "model = binary");
        assert!(matches!(
            SweepConfig::parse(&text),
            Err(ConfigError::InvalidFunction(_))
        ));
    }

    #[test]
    fn run_single_row_shape() {
        let config = SweepConfig::parse(CONFIG_TEXT).unwrap();
        let (result, row) = run_single(&config, config.grid[0]).unwrap();
        assert_eq!(row.split(',').count(), RUN_CSV_HEADER.split(',').count());
        assert!(row.starts_with("gaussian,0.5,64,8,40,"));
        assert!(result.mse_with_tail >= result.mse_truncated);

        // rate_pred column is the squared rate.
        let rate_pred: f64 = row.split(',').nth(8).unwrap().parse().unwrap();
        let want = crate::bass::minimax_rate(64, 8, 40.0, 0.5).powi(2);
        assert!((rate_pred - want).abs() <= 1e-12);
    }

    #[test]
    fn single_point_sweep_and_determinism() {
        let mut config = SweepConfig::parse(CONFIG_TEXT).unwrap();
        config.grid.truncate(1);
        config.replicates = 1;
        let once = sweep(&config).unwrap();
        assert_eq!(once.results_csv.lines().count(), 2); // header + 1 row
        let twice = sweep(&config).unwrap();
        assert_eq!(once.results_csv, twice.results_csv);
        assert_eq!(once.summary_csv, twice.summary_csv);
    }

    #[test]
    fn full_regime_slope_equals_slope_vs_total() {
        // All-full grid: nbass = N, so the intermediate fit is empty but a
        // direct fit against N equals a fit against nbass.
        // m must exceed log2(N), otherwise the fixed point pins to n log N.
        let mut config = SweepConfig::parse(CONFIG_TEXT).unwrap();
        config.grid = vec![
            GridPoint {
                n: 64,
                m: 32,
                budget: 1e5,
            },
            GridPoint {
                n: 128,
                m: 32,
                budget: 1e5,
            },
            GridPoint {
                n: 256,
                m: 32,
                budget: 1e5,
            },
        ];
        config.replicates = 4;
        let outcome = sweep(&config).unwrap();
        assert!(outcome.slope_intermediate.is_none());
        assert!(!outcome.mixed_regimes);
        let vs_nbass: Vec<(f64, f64)> = outcome
            .points
            .iter()
            .map(|p| (p.nbass, p.median_mse_with_tail))
            .collect();
        let vs_total: Vec<(f64, f64)> = outcome
            .points
            .iter()
            .map(|p| ((p.point.n * p.point.m) as f64, p.median_mse_with_tail))
            .collect();
        let a = fit_loglog_slope(&vs_nbass).unwrap();
        let b = fit_loglog_slope(&vs_total).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn slope_fit_recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|i| {
                let x = 10f64.powi(i);
                (x, 3.0 * x.powf(-0.5))
            })
            .collect();
        let slope = fit_loglog_slope(&pts).unwrap();
        assert!((slope + 0.5).abs() <= 1e-12);
    }
}
