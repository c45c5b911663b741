//! Property tests for the spec-level invariants, plus the deterministic
//! cross-estimator agreement checks at full scale.

mod common;

use common::*;
use fsdim::dimension::{block_entropy_dimension, family_dimension, ChainFamily, EstimatorOptions};
use fsdim::empirical::{run_trace, state_gap, CheckpointSchedule};
use fsdim::infotheory::{conditional_entropy, conditional_kl_to_fair, entropy, kl, pinsker_gap};
use fsdim::machine::{absorption_prefix, ergodic_analysis, irreducible_completion, Machine};
use fsdim::markov::induce_chain;
use fsdim::selection::{apply_selector, lambda_of};
use fsdim::sequence::{generate, Bits, SourceKind};
use proptest::prelude::*;

fn arb_machine(max_states: usize) -> impl Strategy<Value = Machine> {
    (2..=max_states).prop_flat_map(|states| {
        (
            proptest::collection::vec((0..states, 0..states), states),
            0..states,
            proptest::collection::vec(any::<bool>(), states),
        )
            .prop_map(move |(edges, start, select)| {
                let names = (0..states).map(|i| format!("s{i}")).collect();
                let delta = edges.into_iter().map(|(a, b)| [a, b]).collect();
                Machine::new(names, start, delta, Some(select), None).unwrap()
            })
    })
}

fn arb_bits(max_len: usize) -> impl Strategy<Value = Bits> {
    proptest::collection::vec(0..2u8, 1..max_len).prop_map(|v| v.into_iter().collect())
}

fn arb_joint(states: usize) -> impl Strategy<Value = fsdim::empirical::JointDistribution> {
    proptest::collection::vec(0.0..1.0f64, 2 * states).prop_map(move |raw| {
        let total: f64 = raw.iter().sum();
        let mass = raw
            .chunks(2)
            .map(|c| {
                if total > 0.0 {
                    [c[0] / total, c[1] / total]
                } else {
                    [1.0 / (2.0 * states as f64); 2]
                }
            })
            .collect();
        fsdim::empirical::JointDistribution::new(mass)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generate_is_prefix_of_longer_generate(n in 0usize..200, extra in 1usize..50) {
        for kind in [
            SourceKind::Champernowne,
            SourceKind::Diluted(Box::new(SourceKind::Champernowne)),
            SourceKind::Zeros,
            SourceKind::parse("periodic:0110").unwrap(),
        ] {
            let long = generate(&kind, n + extra).unwrap();
            let short = generate(&kind, n).unwrap();
            prop_assert_eq!(short.as_slice(), &long.as_slice()[..n]);
        }
    }

    #[test]
    fn diluted_odd_indices_are_zero(n in 1usize..200) {
        let kind = SourceKind::Diluted(Box::new(SourceKind::Champernowne));
        let bits = generate(&kind, 2 * n).unwrap();
        for i in 0..n {
            prop_assert_eq!(bits[2 * i + 1], 0);
        }
    }

    #[test]
    fn completion_is_irreducible_with_the_stated_state_count(m in arb_machine(8)) {
        let w = absorption_prefix(&m);
        let completed = irreducible_completion(&m, &w).unwrap();
        let analysis = ergodic_analysis(&completed);
        prop_assert!(analysis.irreducible);
        let entry = m.run(&w);
        let ergodic_len = ergodic_analysis(&m)
            .ergodic_sets
            .iter()
            .find(|set| set.binary_search(&entry).is_ok())
            .unwrap()
            .len();
        prop_assert_eq!(completed.state_count(), ergodic_len + w.len() + 1);
    }

    #[test]
    fn empirical_counts_are_exact_integers(m in arb_machine(8), x in arb_bits(400)) {
        let n = x.len() as u64;
        let trace = run_trace(&m, &x, &CheckpointSchedule::Geometric { points: 6 }.materialize(n))
            .unwrap();
        for snapshot in &trace.snapshots {
            let total: u64 = snapshot.counts.iter().map(|c| c[0] + c[1]).sum();
            prop_assert_eq!(total, snapshot.n);
            // marginal agrees with an independent state-visit count
            let mut visits = vec![0u64; m.state_count()];
            let mut q = m.start();
            for i in 0..snapshot.n as usize {
                visits[q] += 1;
                q = m.step(q, x[i]);
            }
            let marginal = snapshot.joint().state_marginal();
            for (state, &v) in visits.iter().enumerate() {
                let expected = v as f64 / snapshot.n as f64;
                prop_assert!((marginal[state] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_equality(raw_p in proptest::collection::vec(0.01..1.0f64, 3), raw_q in proptest::collection::vec(0.01..1.0f64, 3)) {
        let norm = |raw: &[f64]| {
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect::<Vec<_>>()
        };
        let p = norm(&raw_p);
        let q = norm(&raw_q);
        prop_assert!(kl(&p, &q) >= 0.0);
        prop_assert!(kl(&p, &p).abs() <= 1e-12);
        let l1: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum();
        if l1 > 1e-6 {
            prop_assert!(kl(&p, &q) > 0.0);
        }
    }

    #[test]
    fn pivot_identity_holds_for_random_joints(joint in (2usize..10).prop_flat_map(arb_joint)) {
        let lhs = conditional_kl_to_fair(&joint);
        let rhs = 1.0 - conditional_entropy(&joint);
        prop_assert!((lhs - rhs).abs() <= 1e-12, "lhs {} rhs {}", lhs, rhs);
        prop_assert!(lhs >= -1e-12);
        prop_assert!(fsdim::infotheory::conditional_kl(&joint, &joint).abs() <= 1e-12);
    }

    #[test]
    fn pinsker_holds_with_boundary_masses(raw_p in proptest::collection::vec(0.0..1.0f64, 4), raw_q in proptest::collection::vec(0.0..1.0f64, 4)) {
        let norm = |raw: &[f64]| {
            let total: f64 = raw.iter().sum();
            if total == 0.0 {
                let mut v = vec![0.0; raw.len()];
                v[0] = 1.0;
                v
            } else {
                raw.iter().map(|v| v / total).collect()
            }
        };
        let (p, q) = (norm(&raw_p), norm(&raw_q));
        let (l1, bound) = pinsker_gap(&p, &q);
        prop_assert!(l1 <= bound + 1e-12);
    }

    #[test]
    fn entropy_is_bounded_by_log_support(raw in proptest::collection::vec(0.01..1.0f64, 2..16)) {
        let total: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.len() as f64).log2() + 1e-12);
    }

    #[test]
    fn selection_partitions_the_prefix(m in arb_machine(8), x in arb_bits(500)) {
        let split = apply_selector(&m, &x).unwrap();
        prop_assert_eq!(split.selected.len() + split.complement.len(), x.len());
        prop_assert_eq!(split.positions.len(), split.selected.len());
        let mut rebuilt = vec![2u8; x.len()];
        for (offset, &i) in split.positions.iter().enumerate() {
            rebuilt[i] = split.selected[offset];
        }
        let mut comp = split.complement.iter();
        for cell in rebuilt.iter_mut() {
            if *cell == 2 {
                *cell = comp.next().unwrap();
            }
        }
        prop_assert_eq!(&rebuilt, x.as_slice());
    }

    #[test]
    fn lambda_and_complement_lambda_sum_to_one(m in arb_machine(8)) {
        prop_assume!(ergodic_analysis(&m).irreducible);
        let selecting = m.selecting().unwrap().to_vec();
        let flipped: Vec<usize> = (0..m.state_count()).filter(|&q| !selecting[q]).collect();
        let complement = m.clone().with_selecting(&flipped);
        let total = lambda_of(&m).unwrap() + lambda_of(&complement).unwrap();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn selection_rate_is_lambda_up_to_state_gap(m in arb_machine(6), x in arb_bits(800)) {
        prop_assume!(ergodic_analysis(&m).irreducible);
        let n = x.len();
        let chain = induce_chain(&m);
        let split = apply_selector(&m, &x).unwrap();
        let trace = run_trace(&chain, &x, &[n as u64]).unwrap();
        let gap = state_gap(&chain, &trace).unwrap();
        let lambda = lambda_of(&m).unwrap();
        let rate = split.selected.len() as f64 / n as f64;
        prop_assert!(
            (rate - lambda).abs() <= gap + m.state_count() as f64 / n as f64 + 1e-12,
            "rate {} lambda {} gap {}", rate, lambda, gap
        );
    }

    #[test]
    fn dimension_bounds_are_ordered(x in arb_bits(2000)) {
        let family = ChainFamily::parse("blocks:2+phase:2").unwrap();
        let n = x.len() as u64;
        let report = family_dimension(&x, n, &family, &EstimatorOptions::default()).unwrap();
        prop_assert!(report.dim_est >= 0.0);
        prop_assert!(report.dim_est <= report.strong_dim_est + 1e-12);
        prop_assert!(report.strong_dim_est <= 1.0);
    }
}

// ---------------------------------------------------------------------------
// Deterministic full-scale invariants
// ---------------------------------------------------------------------------

/// The depth-k block chain reproduces k-block statistics, so the family and
/// block-entropy estimators must agree at matched depths. The block-entropy
/// floor for a period-p sequence is log₂(p)/K, hence the deeper K on the
/// periodic and diluted inputs.
#[test]
fn family_and_block_entropy_estimates_agree_at_scale() {
    let n: u64 = 1_000_000;
    let opts = EstimatorOptions::default();
    let schedule = CheckpointSchedule::default();
    let champ = champernowne(n as usize);
    let diluted = diluted_champernowne(n as usize);
    let alternating = generate(
        &SourceKind::Periodic(Bits::parse_ascii("01", "t").unwrap()),
        n as usize,
    )
    .unwrap();
    let zeros = generate(&SourceKind::Zeros, n as usize).unwrap();

    let cases: [(&str, &Bits, &str, u32); 4] = [
        ("champernowne", &champ, "blocks:8", 8),
        ("diluted", &diluted, "blocks:4+phase:2", 16),
        ("periodic-01", &alternating, "blocks:4", 12),
        ("zeros", &zeros, "blocks:4", 4),
    ];
    for (name, x, family_spec, max_k) in cases {
        let family = ChainFamily::parse(family_spec).unwrap();
        let family_est = family_dimension(x, n, &family, &opts).unwrap().dim_est;
        let (block_est, _) = block_entropy_dimension(x, n, max_k, &schedule).unwrap();
        assert!(
            (family_est - block_est).abs() <= 0.1,
            "{name}: family({family_spec}) = {family_est} vs block K={max_k} = {block_est}"
        );
    }
}

#[test]
fn enlarging_the_family_never_raises_the_estimate_at_scale() {
    let n: u64 = 200_000;
    let x = diluted_champernowne(n as usize);
    let opts = EstimatorOptions::default();
    let nested = [
        "blocks:1",
        "blocks:2",
        "blocks:2+phase:2",
        "blocks:4+phase:2",
    ];
    let mut last = f64::INFINITY;
    for spec in nested {
        let family = ChainFamily::parse(spec).unwrap();
        let est = family_dimension(&x, n, &family, &opts).unwrap().dim_est;
        assert!(est <= last + 1e-12, "{spec}: {est} > {last}");
        last = est;
    }
}
