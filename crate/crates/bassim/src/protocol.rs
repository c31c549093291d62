//! The one-round distributed estimation protocol: machines are grouped into
//! blocks, each block estimates a disjoint range of coefficients, encodes
//! them under the per-machine bit budget, and the central machine averages
//! the decoded values per block.
//!
//! Block layout: with `q = floor(B / W)` codewords per machine (`W` the
//! codeword width at precision exponent 1/2), block `l = 0, 1, ...` owns
//! machines `l*kappa + 1 ..= (l+1)*kappa` and the flat coefficient range
//! `[l*q, (l+1)*q)`, clipped to the resolution cap. Flat index 0 is the
//! father coefficient, so the constant shift is always estimated by the
//! first block and every machine transmits exactly `q` codewords --- the
//! budget constraint `q * W <= B` holds with certainty, not merely in
//! expectation.

use rand_chacha::ChaCha8Rng;

use crate::bass::{bass_symmetric, block_size_kappa, max_resolution, Regime};
use crate::codec::{self, BitReader, BitWriter, Codeword};
use crate::models::{local_estimates_for_range, sample, ModelSpec};
use crate::rng::{stream_rng, ORACLE_MACHINE};
use crate::wavelets::{CoeffIndex, CoefficientTable};

/// Precision exponent used for every transmitted codeword.
pub const PRECISION_D: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("expected one message per machine ({want}), got {got}")]
    WrongMessageCount { want: u64, got: usize },
    #[error("machine {machine}: message has {got} bits, expected {want}")]
    BadMessageLength {
        machine: u64,
        want: usize,
        got: usize,
    },
    #[error("machine {machine}: {source}")]
    Decode {
        machine: u64,
        source: codec::CodecError,
    },
}

/// How estimates travel from machines to the center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    /// Budgeted fixed-width codewords (the real protocol).
    Codec,
    /// Estimates pass through losslessly; reference mode for isolating the
    /// quantization contribution.
    Identity,
}

/// Assignment of machines to blocks and blocks to coefficient ranges.
#[derive(Debug, Clone)]
pub struct BlockAssignment {
    pub n: u64,
    pub m: u64,
    pub budget: f64,
    pub r: f64,
    /// Machines per block.
    pub kappa: u64,
    /// Codewords per machine.
    pub q: u64,
    /// Maximum resolution level.
    pub j_n: u32,
    /// Codeword width in bits.
    pub width: u32,
    /// False when the budget cannot carry even one codeword; the protocol
    /// then degenerates to a single machine's local estimate with no
    /// transmission.
    pub distributed: bool,
}

impl BlockAssignment {
    pub fn total(&self) -> u64 {
        self.n * self.m
    }

    pub fn block_count(&self) -> u64 {
        self.m.div_ceil(self.kappa)
    }

    /// Block owning a (1-based) machine index.
    pub fn block_of_machine(&self, machine: u64) -> u64 {
        debug_assert!(machine >= 1 && machine <= self.m);
        (machine - 1) / self.kappa
    }

    /// Number of machines in a block; only the last block can be short.
    pub fn block_members(&self, block: u64) -> u64 {
        let first = block * self.kappa;
        (self.m - first).min(self.kappa)
    }

    /// One past the largest assignable flat index.
    pub fn coefficient_cap(&self) -> u64 {
        1u64 << (self.j_n + 1)
    }

    /// Flat coefficient range `[lo, hi)` owned by a block.
    pub fn coeff_range(&self, block: u64) -> (u64, u64) {
        let cap = self.coefficient_cap();
        let lo = (block * self.q).min(cap);
        let hi = ((block + 1) * self.q).min(cap);
        (lo, hi)
    }

    /// Total number of distinct assigned coefficients.
    pub fn assigned_count(&self) -> u64 {
        (self.block_count() * self.q).min(self.coefficient_cap())
    }
}

/// Derive the block layout for a symmetric-budget network. Requires
/// `B >= W` for the distributed path; below that the degenerate local-only
/// assignment is returned.
pub fn assign_blocks(n: u64, m: u64, budget: f64, r: f64) -> BlockAssignment {
    let total = n * m;
    let width = codec::codeword_width(total, PRECISION_D);
    // Saturating cast keeps infinite budgets finite.
    let q_raw = (budget / f64::from(width)).floor() as u64;
    if q_raw == 0 {
        // Too little budget for a single codeword: estimate locally on one
        // machine and transmit nothing.
        return BlockAssignment {
            n,
            m,
            budget,
            r,
            kappa: 1,
            q: 0,
            j_n: max_resolution(n, 1, r),
            width,
            distributed: false,
        };
    }
    let kappa = block_size_kappa(budget, n, m, r);
    let j_n = max_resolution(n, kappa, r);
    // No machine ever needs more codewords than the coefficient universe;
    // sending fewer bits than the budget allows is always legal.
    let q = q_raw.min(1u64 << (j_n + 1));
    BlockAssignment {
        n,
        m,
        budget,
        r,
        kappa,
        q,
        j_n,
        width,
        distributed: true,
    }
}

/// One machine's transmission: `q` codewords concatenated in ascending flat
/// order, zero-padded past the end of the block's clipped range.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineMessage {
    pub machine: u64,
    pub bytes: Vec<u8>,
    pub bit_count: usize,
}

/// Run one machine: draw its sample, estimate its block's coefficients,
/// encode them. The message length is exactly `q * width` bits.
pub fn run_machine(
    spec: &ModelSpec,
    n: u64,
    assignment: &BlockAssignment,
    machine: u64,
    rng: &mut ChaCha8Rng,
) -> MachineMessage {
    assert!(assignment.distributed, "no transmission in local-only mode");
    let data = sample(spec, n as usize, rng);
    let (lo, hi) = assignment.coeff_range(assignment.block_of_machine(machine));
    let estimates = local_estimates_for_range(spec, &data, lo, hi).expect("n >= 1");

    let mut writer = BitWriter::new();
    for est in &estimates {
        let cw = codec::encode(*est, assignment.total(), PRECISION_D).expect("finite estimate");
        writer.push_codeword(&cw);
    }
    for _ in estimates.len() as u64..assignment.q {
        writer.push_codeword(&Codeword::zero(assignment.width));
    }
    let bit_count = writer.bit_len();
    debug_assert_eq!(bit_count as u64, assignment.q * u64::from(assignment.width));
    let (bytes, _) = writer.into_parts();
    MachineMessage {
        machine,
        bytes,
        bit_count,
    }
}

/// Central aggregation: decode every message and average per block, dividing
/// by the block's actual member count. Summation runs in ascending machine
/// order so the reduction is deterministic.
pub fn aggregate(
    messages: &[MachineMessage],
    assignment: &BlockAssignment,
) -> Result<CoefficientTable, ProtocolError> {
    if messages.len() as u64 != assignment.m {
        return Err(ProtocolError::WrongMessageCount {
            want: assignment.m,
            got: messages.len(),
        });
    }
    let expected_bits = (assignment.q * u64::from(assignment.width)) as usize;
    let mut sums = vec![0.0; assignment.assigned_count() as usize];

    for (i, message) in messages.iter().enumerate() {
        let machine = i as u64 + 1;
        if message.bit_count != expected_bits {
            return Err(ProtocolError::BadMessageLength {
                machine,
                want: expected_bits,
                got: message.bit_count,
            });
        }
        let (lo, hi) = assignment.coeff_range(assignment.block_of_machine(machine));
        let mut reader = BitReader::new(&message.bytes, message.bit_count);
        for slot in 0..assignment.q {
            let cw = reader
                .read_codeword(assignment.width)
                .map_err(|source| ProtocolError::Decode { machine, source })?;
            let flat = lo + slot;
            if flat < hi {
                sums[flat as usize] += codec::decode(&cw, assignment.total(), PRECISION_D)
                    .map_err(|source| ProtocolError::Decode { machine, source })?;
            }
        }
    }

    let mut table = CoefficientTable::new();
    for (flat, sum) in sums.iter().enumerate() {
        let block = flat as u64 / assignment.q;
        table.set(
            CoeffIndex::from_flat(flat as u64),
            sum / assignment.block_members(block) as f64,
        );
    }
    Ok(table)
}

/// Squared L2 errors between a true table and an estimate: the sum over
/// levels `<= j_eval` of squared coefficient differences, and the same plus
/// the true mass above `j_eval`.
pub fn l2_error(truth: &CoefficientTable, estimate: &CoefficientTable, j_eval: u32) -> (f64, f64) {
    debug_assert!(estimate.is_empty() || estimate.max_level() <= j_eval);
    let mut truncated = 0.0;
    let mut tail = 0.0;
    for (idx, v) in truth.iter() {
        if idx.level() <= j_eval {
            let d = v - estimate.get(idx);
            truncated += d * d;
        } else {
            tail += v * v;
        }
    }
    for (idx, v) in estimate.iter() {
        if idx.level() <= j_eval && !truth.contains(idx) {
            // Estimated slots the truth does not carry.
            truncated += v * v;
        }
    }
    (truncated, truncated + tail)
}

/// Outcome of one full protocol run.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub estimate: CoefficientTable,
    /// Bits transmitted per machine, in machine order; empty in identity
    /// transport and local-only modes.
    pub bit_ledger: Vec<usize>,
    pub mse_truncated: f64,
    pub mse_with_tail: f64,
    pub kappa: u64,
    pub q: u64,
    pub j_n: u32,
    pub nbass: f64,
    pub regime: Regime,
    pub distributed: bool,
    pub n: u64,
    pub m: u64,
    pub budget: f64,
    pub r: f64,
    pub seed: u64,
    pub replicate: u32,
}

impl ExperimentResult {
    pub fn max_bits(&self) -> usize {
        self.bit_ledger.iter().copied().max().unwrap_or(0)
    }
}

/// Run the full pipeline once: assign blocks, run every machine, aggregate,
/// and score against the spec's true table.
pub fn estimate(
    spec: &ModelSpec,
    n: u64,
    m: u64,
    budget: f64,
    r: f64,
    seed: u64,
    replicate: u32,
) -> ExperimentResult {
    estimate_with(spec, n, m, budget, r, seed, 0, replicate, Transport::Codec)
}

/// [`estimate`] with an explicit grid-point stream index and transport; the
/// knobs the sweep harness and the reference oracles need.
#[allow(clippy::too_many_arguments)]
pub fn estimate_with(
    spec: &ModelSpec,
    n: u64,
    m: u64,
    budget: f64,
    r: f64,
    seed: u64,
    point: u32,
    replicate: u32,
    transport: Transport,
) -> ExperimentResult {
    let assignment = assign_blocks(n, m, budget, r);
    let bass = bass_symmetric(n, m, budget, r);

    let (estimate, bit_ledger) = if !assignment.distributed {
        // Local-only path: the center estimates everything from one sample.
        let mut rng = stream_rng(seed, point, replicate, 1);
        let data = sample(spec, n as usize, &mut rng);
        let cap = assignment.coefficient_cap();
        let values = local_estimates_for_range(spec, &data, 0, cap).expect("n >= 1");
        let mut table = CoefficientTable::new();
        for (flat, v) in values.into_iter().enumerate() {
            table.set(CoeffIndex::from_flat(flat as u64), v);
        }
        (table, Vec::new())
    } else {
        match transport {
            Transport::Codec => {
                let mut messages = Vec::with_capacity(m as usize);
                for machine in 1..=m {
                    let mut rng = stream_rng(seed, point, replicate, machine as u32);
                    messages.push(run_machine(spec, n, &assignment, machine, &mut rng));
                }
                let ledger: Vec<usize> = messages.iter().map(|msg| msg.bit_count).collect();
                for (i, &bits) in ledger.iter().enumerate() {
                    assert!(
                        bits as f64 <= budget,
                        "machine {} exceeded its budget: {bits} > {budget}",
                        i + 1
                    );
                }
                let table = aggregate(&messages, &assignment).expect("self-built messages");
                (table, ledger)
            }
            Transport::Identity => {
                let mut sums = vec![0.0; assignment.assigned_count() as usize];
                for machine in 1..=m {
                    let mut rng = stream_rng(seed, point, replicate, machine as u32);
                    let data = sample(spec, n as usize, &mut rng);
                    let (lo, hi) = assignment.coeff_range(assignment.block_of_machine(machine));
                    let ests = local_estimates_for_range(spec, &data, lo, hi).expect("n >= 1");
                    for (offset, est) in ests.into_iter().enumerate() {
                        sums[lo as usize + offset] += est;
                    }
                }
                let mut table = CoefficientTable::new();
                for (flat, sum) in sums.iter().enumerate() {
                    let block = flat as u64 / assignment.q;
                    table.set(
                        CoeffIndex::from_flat(flat as u64),
                        sum / assignment.block_members(block) as f64,
                    );
                }
                (table, Vec::new())
            }
        }
    };

    let (mse_truncated, mse_with_tail) = l2_error(spec.truth(), &estimate, assignment.j_n);
    ExperimentResult {
        estimate,
        bit_ledger,
        mse_truncated,
        mse_with_tail,
        kappa: assignment.kappa,
        q: assignment.q,
        j_n: assignment.j_n,
        nbass: bass.value,
        regime: bass.regime.expect("symmetric budgets"),
        distributed: assignment.distributed,
        n,
        m,
        budget,
        r,
        seed,
        replicate,
    }
}

/// Non-distributed reference: the same estimator fed one pooled sample of
/// size `n_total`, identity transport, all coefficients up to `j_n`.
pub fn oracle_estimate(
    spec: &ModelSpec,
    n_total: u64,
    j_n: u32,
    r: f64,
    seed: u64,
    point: u32,
    replicate: u32,
) -> ExperimentResult {
    let mut rng = stream_rng(seed, point, replicate, ORACLE_MACHINE);
    let data = sample(spec, n_total as usize, &mut rng);
    let cap = 1u64 << (j_n + 1);
    let values = local_estimates_for_range(spec, &data, 0, cap).expect("n >= 1");
    let mut table = CoefficientTable::new();
    for (flat, v) in values.into_iter().enumerate() {
        table.set(CoeffIndex::from_flat(flat as u64), v);
    }
    let (mse_truncated, mse_with_tail) = l2_error(spec.truth(), &table, j_n);
    ExperimentResult {
        estimate: table,
        bit_ledger: Vec::new(),
        mse_truncated,
        mse_with_tail,
        kappa: 1,
        q: 0,
        j_n,
        nbass: n_total as f64,
        regime: Regime::Full,
        distributed: false,
        n: n_total,
        m: 1,
        budget: f64::INFINITY,
        r,
        seed,
        replicate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::wavelets::{make_test_function, TestFunctionKind};

    fn zero_spec() -> ModelSpec {
        let table = make_test_function(TestFunctionKind::Zero, 0.5, 1.0, 0.0).unwrap();
        ModelSpec::new(ModelKind::GaussianRegression, table).unwrap()
    }

    #[test]
    fn figure_one_layout() {
        // kappa = 2, q = 3, m = 4: two blocks, flats {0,1,2} and {3,4,5}.
        let assignment = BlockAssignment {
            n: 64,
            m: 4,
            budget: 21.0,
            r: 0.5,
            kappa: 2,
            q: 3,
            j_n: 3,
            width: 7,
            distributed: true,
        };
        assert_eq!(assignment.block_count(), 2);
        assert_eq!(assignment.coeff_range(0), (0, 3));
        assert_eq!(assignment.coeff_range(1), (3, 6));
        assert_eq!(assignment.block_of_machine(1), 0);
        assert_eq!(assignment.block_of_machine(2), 0);
        assert_eq!(assignment.block_of_machine(3), 1);
        assert_eq!(assignment.block_of_machine(4), 1);
        assert_eq!(
            assignment.assigned_count(),
            (assignment.block_count() * assignment.q).min(1 << (assignment.j_n + 1))
        );
    }

    #[test]
    fn one_block_when_kappa_is_m() {
        // Huge budget: every machine lands in one block covering the first
        // q coefficients (clipped by the resolution cap).
        let assignment = assign_blocks(1024, 16, 1e6, 0.5);
        assert!(assignment.distributed);
        assert_eq!(assignment.kappa, 16);
        assert_eq!(assignment.block_count(), 1);
        let (lo, hi) = assignment.coeff_range(0);
        assert_eq!(lo, 0);
        assert_eq!(hi, assignment.coefficient_cap());
    }

    #[test]
    fn ranges_partition_a_prefix() {
        let assignment = assign_blocks(256, 48, 40.0, 0.5);
        assert!(assignment.distributed);
        let mut next = 0u64;
        for block in 0..assignment.block_count() {
            let (lo, hi) = assignment.coeff_range(block);
            assert_eq!(lo, next.min(assignment.coefficient_cap()));
            assert!(hi >= lo);
            next = hi;
        }
        assert_eq!(next, assignment.assigned_count());
    }

    #[test]
    fn degenerate_assignment_below_one_codeword() {
        let assignment = assign_blocks(1024, 16, 5.0, 0.5);
        assert!(!assignment.distributed);
        assert_eq!(assignment.q, 0);
        assert_eq!(assignment.j_n, 5); // floor(log2(1024)/2)

        let result = estimate(&zero_spec(), 1024, 16, 5.0, 0.5, 11, 0);
        assert!(!result.distributed);
        assert!(result.bit_ledger.is_empty());
        assert_eq!(result.max_bits(), 0);
    }

    #[test]
    fn message_bits_meet_budget_exactly() {
        let spec = zero_spec();
        let budget = 64.0;
        let assignment = assign_blocks(64, 8, budget, 0.5);
        assert!(assignment.distributed);
        let mut rng = stream_rng(3, 0, 0, 1);
        let message = run_machine(&spec, 64, &assignment, 1, &mut rng);
        assert_eq!(
            message.bit_count as u64,
            assignment.q * u64::from(assignment.width)
        );
        assert!(message.bit_count as f64 <= budget);

        // Determinism: same stream, same bytes.
        let mut rng2 = stream_rng(3, 0, 0, 1);
        let again = run_machine(&spec, 64, &assignment, 1, &mut rng2);
        assert_eq!(message, again);
    }

    #[test]
    fn aggregate_averages_per_block() {
        // kappa = 2: one machine sends v, the other the zero sentinel; the
        // aggregate is v divided by the block size.
        let assignment = BlockAssignment {
            n: 8,
            m: 2,
            budget: 10.0,
            r: 0.5,
            kappa: 2,
            q: 1,
            j_n: 1,
            width: codec::codeword_width(16, PRECISION_D),
            distributed: true,
        };
        let encode_one = |x: f64| {
            let mut w = BitWriter::new();
            w.push_codeword(&codec::encode(x, 16, PRECISION_D).unwrap());
            let bits = w.bit_len();
            let (bytes, _) = w.into_parts();
            (bytes, bits)
        };
        let (b1, l1) = encode_one(0.5);
        let (b2, l2) = encode_one(0.0);
        let messages = vec![
            MachineMessage {
                machine: 1,
                bytes: b1,
                bit_count: l1,
            },
            MachineMessage {
                machine: 2,
                bytes: b2,
                bit_count: l2,
            },
        ];
        let table = aggregate(&messages, &assignment).unwrap();
        assert_eq!(table.get(CoeffIndex::Father), 0.25);

        let short = vec![messages[0].clone()];
        assert!(matches!(
            aggregate(&short, &assignment),
            Err(ProtocolError::WrongMessageCount { .. })
        ));
    }

    #[test]
    fn l2_error_examples() {
        let mut truth = CoefficientTable::new();
        truth.set(CoeffIndex::wavelet(2, 1).unwrap(), 0.5);
        truth.set(CoeffIndex::wavelet(4, 3).unwrap(), 2f64.powi(-6));

        let (trunc, tail) = l2_error(&truth, &truth, 10);
        assert_eq!(trunc, 0.0);
        assert_eq!(tail, 0.0);

        // Estimate matches below j_eval = 3; the level-4 entry is tail mass.
        let mut below = CoefficientTable::new();
        below.set(CoeffIndex::wavelet(2, 1).unwrap(), 0.5);
        let (trunc, tail) = l2_error(&truth, &below, 3);
        assert_eq!(trunc, 0.0);
        assert!((tail - 2f64.powi(-12)).abs() <= 1e-18);

        // One coefficient off by delta adds delta^2.
        let mut off = below.clone();
        off.set(CoeffIndex::wavelet(2, 1).unwrap(), 0.75);
        let (trunc, _) = l2_error(&truth, &off, 3);
        assert!((trunc - 0.0625).abs() <= 1e-15);
    }

    #[test]
    fn estimate_is_deterministic_and_budgeted() {
        let table = make_test_function(TestFunctionKind::Rough, 0.5, 1.0, 0.0).unwrap();
        let spec = ModelSpec::new(ModelKind::GaussianRegression, table).unwrap();
        let a = estimate(&spec, 128, 8, 40.0, 0.5, 99, 0);
        let b = estimate(&spec, 128, 8, 40.0, 0.5, 99, 0);
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.bit_ledger, b.bit_ledger);
        assert!(a.max_bits() as f64 <= 40.0);
        assert!(a.mse_with_tail >= a.mse_truncated);
        assert!(a.mse_truncated >= 0.0);

        let c = estimate(&spec, 128, 8, 40.0, 0.5, 100, 0);
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn quantization_contribution_is_bounded() {
        let table = make_test_function(TestFunctionKind::Rough, 0.5, 1.0, 0.0).unwrap();
        let spec = ModelSpec::new(ModelKind::GaussianRegression, table).unwrap();
        let (n, m, budget, r) = (256u64, 8u64, 60.0, 0.5);
        let coded = estimate_with(&spec, n, m, budget, r, 5, 0, 0, Transport::Codec);
        let exact = estimate_with(&spec, n, m, budget, r, 5, 0, 0, Transport::Identity);
        let bound = ((n * m) as f64).powf(-0.5);
        for (idx, v) in exact.estimate.iter() {
            let diff = (coded.estimate.get(idx) - v).abs();
            assert!(diff <= bound + 1e-12, "{idx}: {diff} > {bound}");
        }
    }

    #[test]
    fn zero_function_error_matches_variance_oracle() {
        // All true coefficients are zero, so the squared error is the sum of
        // the aggregated estimators' squares: mean ~ sum of variances
        // = sum_blocks members^{-1} * sigma^2 / n, plus a quantization term
        // bounded by assigned * 1/N.
        let spec = zero_spec();
        let (n, m, budget, r) = (64u64, 8u64, 66.0, 0.5);
        let assignment = assign_blocks(n, m, budget, r);
        assert!(assignment.distributed);

        let replicates = 200;
        let mses: Vec<f64> = (0..replicates)
            .map(|rep| estimate(&spec, n, m, budget, r, 2024, rep).mse_truncated)
            .collect();
        let mean = mses.iter().sum::<f64>() / replicates as f64;
        let sd = (mses.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (replicates - 1) as f64)
            .sqrt();
        let se = sd / (replicates as f64).sqrt();

        let mut predicted = 0.0;
        for block in 0..assignment.block_count() {
            let (lo, hi) = assignment.coeff_range(block);
            predicted += (hi - lo) as f64 / (n as f64 * assignment.block_members(block) as f64);
        }
        let quant_slack = assignment.assigned_count() as f64 / (n * m) as f64;
        assert!(
            (mean - predicted).abs() <= 4.0 * se + quant_slack,
            "mean {mean}, predicted {predicted}, se {se}"
        );
    }
}
