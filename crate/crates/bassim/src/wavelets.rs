//! Haar wavelet basis on `[0,1]`: analysis/synthesis between functions and
//! sparse coefficient tables, Besov norms, and sieve-style test functions.
//!
//! The basis is the father function `phi == 1` plus the Haar children
//! `psi_{jh}(t) = 2^{j/2} psi(2^j t - h)`. Everything a Haar table represents
//! is piecewise constant on a dyadic grid, which lets quadrature, range
//! checks and inner products be exact.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Highest resolution level used when constructing deterministic test
/// functions.
pub const TEST_FUNCTION_MAX_LEVEL: u32 = 14;

/// Exponent buffer that keeps generated test functions strictly inside the
/// smoothness ball instead of on its boundary.
pub const TEST_FUNCTION_DELTA: f64 = 0.01;

/// Extra dyadic levels used when integrating functions that are not declared
/// piecewise constant; keeps midpoint-rule error below ~1e-8 for Lipschitz
/// inputs.
const QUADRATURE_EXTRA_LEVELS: u32 = 10;

/// Errors from basis-index construction and table constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WaveletError {
    #[error("translation {h} out of range for level {j} (need h < 2^j)")]
    TranslationOutOfRange { j: u32, h: u64 },
    #[error("sieve size {d} is not a power of 2")]
    SieveSizeNotPowerOfTwo { d: u64 },
    #[error("sign vector length {got} does not match sieve size {d}")]
    SignLengthMismatch { d: u64, got: usize },
    #[error("smoothness r = {r} unsupported: the Haar mother wavelet has one vanishing moment, so only r < 1 is representable")]
    UnsupportedSmoothness { r: f64 },
}

/// Index of one Haar child wavelet: resolution level `j` and translation
/// `0 <= h < 2^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    j: u32,
    h: u64,
}

impl BasisIndex {
    pub fn new(j: u32, h: u64) -> Result<Self, WaveletError> {
        if j >= 63 || h >= (1u64 << j) {
            return Err(WaveletError::TranslationOutOfRange { j, h });
        }
        Ok(Self { j, h })
    }

    pub fn level(&self) -> u32 {
        self.j
    }

    pub fn translation(&self) -> u64 {
        self.h
    }
}

/// Index of one coefficient slot: the father function or a child wavelet.
///
/// The flat ordering puts the father at `t = 0` and `psi_{jh}` at
/// `t = 2^j + h`, so the wavelet flats start at 1 and the map is a bijection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CoeffIndex {
    Father,
    Wavelet(BasisIndex),
}

impl CoeffIndex {
    pub fn wavelet(j: u32, h: u64) -> Result<Self, WaveletError> {
        Ok(Self::Wavelet(BasisIndex::new(j, h)?))
    }

    /// Flat index: 0 for the father, `2^j + h` for a wavelet.
    pub fn flat(&self) -> u64 {
        match self {
            Self::Father => 0,
            Self::Wavelet(b) => (1u64 << b.j) + b.h,
        }
    }

    pub fn from_flat(t: u64) -> Self {
        if t == 0 {
            return Self::Father;
        }
        let j = 63 - t.leading_zeros();
        let h = t - (1u64 << j);
        Self::Wavelet(BasisIndex { j, h })
    }

    /// Resolution level; the father slot counts as level 0.
    pub fn level(&self) -> u32 {
        match self {
            Self::Father => 0,
            Self::Wavelet(b) => b.j,
        }
    }
}

impl fmt::Display for CoeffIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Father => write!(f, "father"),
            Self::Wavelet(b) => write!(f, "({},{})", b.j, b.h),
        }
    }
}

/// Evaluate one basis function at `t` in `[0,1]`.
///
/// Piecewise-constant conventions: a point on a dyadic breakpoint takes the
/// value from the cell to its left (`t = 0` belongs to the first cell), so
/// `psi_{1,0}(0.25) = +sqrt(2)` and `psi_{0,0}(0.75) = -1`. The father is 1
/// on all of `[0,1]`.
pub fn eval_basis(idx: CoeffIndex, t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t), "t = {t} outside [0,1]");
    match idx {
        CoeffIndex::Father => 1.0,
        CoeffIndex::Wavelet(b) => {
            let scale = (1u64 << b.j) as f64;
            let u = t * scale - b.h as f64;
            let amp = scale.sqrt();
            if u == 0.0 {
                if b.h == 0 {
                    amp
                } else {
                    0.0
                }
            } else if u > 0.0 && u <= 0.5 {
                amp
            } else if u > 0.5 && u <= 1.0 {
                -amp
            } else {
                0.0
            }
        }
    }
}

/// Sparse map from coefficient index to real coefficient value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientTable {
    entries: BTreeMap<u64, f64>,
}

impl CoefficientTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, idx: CoeffIndex, value: f64) {
        self.entries.insert(idx.flat(), value);
    }

    pub fn get(&self, idx: CoeffIndex) -> f64 {
        self.entries.get(&idx.flat()).copied().unwrap_or(0.0)
    }

    pub fn get_flat(&self, t: u64) -> f64 {
        self.entries.get(&t).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, idx: CoeffIndex) -> bool {
        self.entries.contains_key(&idx.flat())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Highest wavelet level present; 0 for a table with at most a father
    /// entry.
    pub fn max_level(&self) -> u32 {
        self.entries
            .keys()
            .map(|&t| CoeffIndex::from_flat(t).level())
            .max()
            .unwrap_or(0)
    }

    /// Entries in ascending flat order.
    pub fn iter(&self) -> impl Iterator<Item = (CoeffIndex, f64)> + '_ {
        self.entries
            .iter()
            .map(|(&t, &v)| (CoeffIndex::from_flat(t), v))
    }

    /// L2 norm of the represented function; equals the Euclidean norm of the
    /// stored coefficients because the basis is orthonormal.
    pub fn l2_norm(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Write as CSV rows `(j, h, value)`; the father row is `(-1, 0, value)`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,h,value")?;
        for (idx, v) in self.iter() {
            match idx {
                CoeffIndex::Father => writeln!(out, "-1,0,{v}")?,
                CoeffIndex::Wavelet(b) => writeln!(out, "{},{},{v}", b.j, b.h)?,
            }
        }
        Ok(())
    }

    /// Parse the CSV format written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, String> {
        let mut table = Self::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| format!("line {}: {e}", lineno + 1))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line == "j,h,value") {
                continue;
            }
            let mut parts = line.split(',');
            let bad = || format!("line {}: expected j,h,value", lineno + 1);
            let j: i64 = parts
                .next()
                .ok_or_else(bad)?
                .trim()
                .parse()
                .map_err(|_| bad())?;
            let h: u64 = parts
                .next()
                .ok_or_else(bad)?
                .trim()
                .parse()
                .map_err(|_| bad())?;
            let v: f64 = parts
                .next()
                .ok_or_else(bad)?
                .trim()
                .parse()
                .map_err(|_| bad())?;
            let idx = if j < 0 {
                CoeffIndex::Father
            } else {
                CoeffIndex::wavelet(j as u32, h).map_err(|e| format!("line {}: {e}", lineno + 1))?
            };
            table.set(idx, v);
        }
        Ok(table)
    }
}

/// Point evaluation of the function a table represents.
pub fn synthesize(table: &CoefficientTable, t: f64) -> f64 {
    table.iter().map(|(idx, v)| v * eval_basis(idx, t)).sum()
}

/// Expand a table into its exact cell values on the dyadic grid at `level`
/// (`2^level` cells). Must satisfy `level > max_level` of the table, so every
/// stored wavelet is constant on each cell.
pub fn synthesize_cells(table: &CoefficientTable, level: u32) -> Vec<f64> {
    assert!(
        table.is_empty() || level > table.max_level(),
        "cell level {level} too coarse for table at level {}",
        table.max_level()
    );
    let mut values = vec![table.get(CoeffIndex::Father)];
    for j in 0..level {
        let amp = ((1u64 << j) as f64).sqrt();
        let mut next = vec![0.0; values.len() * 2];
        for (h, &s) in values.iter().enumerate() {
            let d = table.get_flat((1u64 << j) + h as u64) * amp;
            next[2 * h] = s + d;
            next[2 * h + 1] = s - d;
        }
        values = next;
    }
    values
}

/// Exact analysis of a function declared piecewise constant on the dyadic
/// grid: `cells` holds the `2^J` cell values. Returns every coefficient with
/// level `<= j_max` (requires `j_max < J`).
pub fn analyze_cells(cells: &[f64], j_max: u32) -> CoefficientTable {
    assert!(
        cells.len().is_power_of_two(),
        "cell count must be a power of 2"
    );
    let big_j = cells.len().trailing_zeros();
    assert!(j_max < big_j, "need j_max < declared level {big_j}");

    let mut table = CoefficientTable::new();
    let mut averages = cells.to_vec();
    let mut details: Vec<Vec<f64>> = Vec::with_capacity(big_j as usize);
    for _ in 0..big_j {
        let half = averages.len() / 2;
        let mut avg = vec![0.0; half];
        let mut det = vec![0.0; half];
        for h in 0..half {
            avg[h] = 0.5 * (averages[2 * h] + averages[2 * h + 1]);
            det[h] = 0.5 * (averages[2 * h] - averages[2 * h + 1]);
        }
        details.push(det);
        averages = avg;
    }
    details.reverse(); // details[j] now holds level-j differences

    table.set(CoeffIndex::Father, averages[0]);
    for j in 0..=j_max {
        let amp = ((1u64 << j) as f64).sqrt();
        for (h, &d) in details[j as usize].iter().enumerate() {
            // <f, psi_{jh}> = 2^{-j/2} * (first-half avg - second-half avg)/2
            table.set(CoeffIndex::Wavelet(BasisIndex { j, h: h as u64 }), d / amp);
        }
    }
    table
}

/// Analysis of an arbitrary bounded function by dyadic midpoint quadrature at
/// level `j_max + 10`; exact whenever `f` is piecewise constant at that
/// resolution.
pub fn analyze<F: Fn(f64) -> f64>(f: F, j_max: u32) -> CoefficientTable {
    let level = j_max + QUADRATURE_EXTRA_LEVELS;
    let count = 1usize << level;
    let width = 1.0 / count as f64;
    let cells: Vec<f64> = (0..count).map(|i| f((i as f64 + 0.5) * width)).collect();
    analyze_cells(&cells, j_max)
}

/// Besov `B^r_{2,2}` norm. The father slot is grouped with level 0.
pub fn besov_norm(table: &CoefficientTable, r: f64) -> f64 {
    let mut per_level: BTreeMap<u32, f64> = BTreeMap::new();
    for (idx, v) in table.iter() {
        *per_level.entry(idx.level()).or_insert(0.0) += v * v;
    }
    per_level
        .iter()
        .map(|(&j, &sum_sq)| 2f64.powf(2.0 * j as f64 * r) * sum_sq)
        .sum::<f64>()
        .sqrt()
}

/// Specification of one sieve element: `d` same-level wavelets with signs
/// `beta` and common magnitude `amplitude * d^{-(r+1/2)}`, plus a constant
/// shift `c0`.
#[derive(Debug, Clone)]
pub struct SieveSpec {
    pub d: u64,
    pub c0: f64,
    /// Scale of the sieve element (distinct from the estimation rate).
    pub sieve_amplitude: f64,
    pub beta: Vec<i8>,
    pub r: f64,
}

/// Build the coefficient table of a sieve element. Haar wavelets at one level
/// have pairwise disjoint supports, so all `2^j` of them can be used.
pub fn make_sieve(spec: &SieveSpec) -> Result<CoefficientTable, WaveletError> {
    if !spec.d.is_power_of_two() {
        return Err(WaveletError::SieveSizeNotPowerOfTwo { d: spec.d });
    }
    if spec.beta.len() as u64 != spec.d {
        return Err(WaveletError::SignLengthMismatch {
            d: spec.d,
            got: spec.beta.len(),
        });
    }
    let j = spec.d.trailing_zeros();
    let magnitude = spec.sieve_amplitude * (spec.d as f64).powf(-(spec.r + 0.5));
    let mut table = CoefficientTable::new();
    if spec.c0 != 0.0 {
        table.set(CoeffIndex::Father, spec.c0);
    }
    for (h, &sign) in spec.beta.iter().enumerate() {
        table.set(
            CoeffIndex::Wavelet(BasisIndex { j, h: h as u64 }),
            magnitude * f64::from(sign),
        );
    }
    Ok(table)
}

/// Families of deterministic test functions for rate experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunctionKind {
    /// Constant `c0`: no wavelet content.
    Zero,
    /// Coefficients at every level up to [`TEST_FUNCTION_MAX_LEVEL`] decaying
    /// at the slowest admissible rate for smoothness `r`.
    Rough,
    /// Same construction with one extra unit of decay; well inside the ball.
    Smooth,
}

impl TestFunctionKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(Self::Zero),
            "rough" => Some(Self::Rough),
            "smooth" => Some(Self::Smooth),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Rough => "rough",
            Self::Smooth => "smooth",
        }
    }
}

/// Deterministic member of the smoothness ball of radius `l`: coefficients
/// `sign * c * 2^{-j(r + 1/2 + delta + extra)}` with a fixed seeded sign
/// pattern, scaled so the wavelet part has Besov norm exactly `0.9 * l`, then
/// shifted by `c0`.
pub fn make_test_function(
    kind: TestFunctionKind,
    r: f64,
    l: f64,
    c0: f64,
) -> Result<CoefficientTable, WaveletError> {
    if r >= 1.0 {
        return Err(WaveletError::UnsupportedSmoothness { r });
    }

    let mut table = CoefficientTable::new();
    if let TestFunctionKind::Zero = kind {
        table.set(CoeffIndex::Father, c0);
        return Ok(table);
    }
    let extra = match kind {
        TestFunctionKind::Zero => unreachable!(),
        TestFunctionKind::Rough => 0.0,
        TestFunctionKind::Smooth => 0.5,
    };
    let decay = r + 0.5 + TEST_FUNCTION_DELTA + extra;

    // Besov^2 of the unscaled pattern: sum_j 2^{2jr} * 2^j * 2^{-2j*decay}.
    let mut norm_sq = 0.0;
    for j in 0..=TEST_FUNCTION_MAX_LEVEL {
        norm_sq += 2f64.powf(2.0 * j as f64 * r + j as f64 - 2.0 * j as f64 * decay);
    }
    let scale = 0.9 * l / norm_sq.sqrt();

    // Fixed sign pattern; any implementation-stable source of signs works.
    let mut rng = ChaCha8Rng::seed_from_u64(0x007e_57f0_5167);
    for j in 0..=TEST_FUNCTION_MAX_LEVEL {
        let magnitude = scale * 2f64.powf(-(j as f64) * decay);
        for h in 0..(1u64 << j) {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            table.set(CoeffIndex::Wavelet(BasisIndex { j, h }), sign * magnitude);
        }
    }
    if c0 != 0.0 {
        table.set(CoeffIndex::Father, c0);
    }
    Ok(table)
}
