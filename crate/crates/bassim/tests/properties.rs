//! Property tests for the library invariants.

use proptest::prelude::*;

use bassim::bass::{bass_general, bass_symmetric, NetworkConfig};
use bassim::codec;
use bassim::wavelets::{analyze_cells, besov_norm, synthesize_cells, CoeffIndex, CoefficientTable};

/// Sample sizes for which the fixed-width format represents the whole
/// `[-sqrt(N), sqrt(N)]` range at full precision (even power-of-two
/// exponents, plus the acceptance sizes).
const EXACT_TOTALS: [u64; 5] = [16, 256, 1024, 16_384, 65_536];

fn arb_table(max_level: u32) -> impl Strategy<Value = CoefficientTable> {
    let slots = (1u64 << (max_level + 1)) as usize;
    prop::collection::vec(-2.0..2.0f64, 1..slots).prop_map(|values| {
        let mut table = CoefficientTable::new();
        for (flat, v) in values.into_iter().enumerate() {
            table.set(CoeffIndex::from_flat(flat as u64), v);
        }
        table
    })
}

proptest! {
    #[test]
    fn codec_roundtrip_error_bound(
        idx in 0usize..EXACT_TOTALS.len(),
        frac in -1.0..1.0f64,
    ) {
        let total = EXACT_TOTALS[idx];
        let x = frac * (total as f64).sqrt();
        let cw = codec::encode(x, total, 0.5).unwrap();
        prop_assert_eq!(cw.width(), codec::codeword_width(total, 0.5));
        let y = codec::decode(&cw, total, 0.5).unwrap();
        let bound = (total as f64).powf(-0.5);
        prop_assert!((y - x).abs() <= bound, "x = {}, y = {}", x, y);
        // Truncation moves toward zero, never past it.
        prop_assert!(y.abs() <= x.abs() + 1e-15);
        prop_assert!(x.signum() * y >= 0.0 || y == 0.0);
    }

    #[test]
    fn codec_magnitude_monotone(
        idx in 0usize..EXACT_TOTALS.len(),
        a in 0.0..1.0f64,
        b in 0.0..1.0f64,
    ) {
        let total = EXACT_TOTALS[idx];
        let root = (total as f64).sqrt();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let y_lo = codec::decode(&codec::encode(lo * root, total, 0.5).unwrap(), total, 0.5).unwrap();
        let y_hi = codec::decode(&codec::encode(hi * root, total, 0.5).unwrap(), total, 0.5).unwrap();
        prop_assert!(y_lo <= y_hi);
    }

    #[test]
    fn bass_monotone_in_budgets_and_n(
        n_exp in 1u32..10,
        m in 1u64..64,
        budgets in prop::collection::vec(0.0..200.0f64, 1..64),
        bump_idx in 0usize..64,
        extra in 0.1..100.0f64,
        r in 0.1..0.95f64,
    ) {
        let n = 1u64 << n_exp;
        let m = m.min(budgets.len() as u64);
        let budgets: Vec<f64> = budgets[..m as usize].to_vec();
        prop_assume!(n * m >= 4);

        let base = bass_general(&NetworkConfig { n, m, budgets: budgets.clone(), r }).value;

        let mut bumped = budgets.clone();
        bumped[bump_idx % m as usize] += extra;
        let more_bits = bass_general(&NetworkConfig { n, m, budgets: bumped, r }).value;
        prop_assert!(more_bits >= base * (1.0 - 1e-9));

        let more_data = bass_general(&NetworkConfig { n: n * 2, m, budgets, r }).value;
        prop_assert!(more_data >= base * (1.0 - 1e-9));
    }

    #[test]
    fn bass_closed_form_matches_bisection(
        n_exp in 1u32..12,
        m in 1u64..2048,
        budget in 0.0..500.0f64,
        r in 0.1..0.95f64,
    ) {
        let n = 1u64 << n_exp;
        prop_assume!(n * m >= 4);
        let closed = bass_symmetric(n, m, budget, r).value;
        let general = bass_general(&NetworkConfig::symmetric(n, m, budget, r)).value;
        prop_assert!(
            (closed - general).abs() <= 1e-9 * closed,
            "closed {} vs bisection {}", closed, general
        );
    }

    #[test]
    fn parseval_on_random_tables(table in arb_table(5)) {
        let level = 7;
        let cells = synthesize_cells(&table, level);
        let width = 1.0 / cells.len() as f64;
        let integral: f64 = cells.iter().map(|v| v * v * width).sum();
        let coeff_sq: f64 = table.iter().map(|(_, v)| v * v).sum();
        prop_assert!((integral - coeff_sq).abs() <= 1e-10 * coeff_sq.max(1.0));
    }

    #[test]
    fn analysis_inverts_synthesis(table in arb_table(4)) {
        let cells = synthesize_cells(&table, 5);
        let back = analyze_cells(&cells, 4);
        for (idx, v) in table.iter() {
            prop_assert!((back.get(idx) - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn besov_norm_absolutely_homogeneous(table in arb_table(4), alpha in -4.0..4.0f64) {
        let r = 0.6;
        let mut scaled = CoefficientTable::new();
        for (idx, v) in table.iter() {
            scaled.set(idx, alpha * v);
        }
        let lhs = besov_norm(&scaled, r);
        let rhs = alpha.abs() * besov_norm(&table, r);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }
}
