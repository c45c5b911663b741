//! Empirical joint distributions of (state, transition) visits along a run.
//!
//! Running an automaton on the first `n` bits of a sequence gives the exact
//! count-based joint `P_n(q, e) = #{i < n : q_i = q, edge e taken} / n`, its
//! state marginal `Q_n`, and the conditional edge-given-state distribution.
//! Snapshots are recorded at a checkpoint schedule (geometric by default) and
//! the tail snapshots are clustered into representatives — the finite-`n`
//! surrogate for the set of limiting distributions of the run.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::machine::Automaton;
use crate::markov::{l1_distance, FairChain, StationaryMethod};
use crate::sequence::Bits;
use crate::{Error, Result};

/// A probability distribution over the (state, edge) cells of a chain, with
/// the two out-edges of state `q` stored as `mass[q][bit]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    mass: Vec<[f64; 2]>,
}

impl JointDistribution {
    pub fn new(mass: Vec<[f64; 2]>) -> Self {
        JointDistribution { mass }
    }

    /// The joint with uniform state marginal and fair conditionals — the
    /// stationary joint of a fair chain whose stationary distribution is
    /// uniform, and a valid fair reference for any chain on the same states.
    pub fn fair_reference(states: usize) -> Self {
        let cell = 1.0 / (2.0 * states as f64);
        JointDistribution {
            mass: vec![[cell, cell]; states],
        }
    }

    pub fn state_count(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self, q: usize, bit: u8) -> f64 {
        self.mass[q][bit as usize]
    }

    pub fn cells(&self) -> &[[f64; 2]] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().map(|m| m[0] + m[1]).sum()
    }

    /// State marginal `Q(q) = Σ_e mass(q, e)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m[0] + m[1]).collect()
    }

    /// Conditional edge distribution at `q`, or `None` on zero marginal.
    pub fn conditional(&self, q: usize) -> Option<[f64; 2]> {
        let total = self.mass[q][0] + self.mass[q][1];
        if total > 0.0 {
            Some([self.mass[q][0] / total, self.mass[q][1] / total])
        } else {
            None
        }
    }

    pub fn l1_distance(&self, other: &JointDistribution) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs())
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .mass
            .iter()
            .flatten()
            .any(|&v| v < 0.0 || !v.is_finite())
        {
            return Err(Error::BadDistribution {
                reason: "negative or non-finite mass".into(),
            });
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution {
                reason: format!("total mass {total}"),
            });
        }
        Ok(())
    }
}

/// Exact integer visit counts at one checkpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub n: u64,
    pub counts: Vec<[u64; 2]>,
}

impl Snapshot {
    pub fn joint(&self) -> JointDistribution {
        let n = self.n as f64;
        JointDistribution::new(
            self.counts
                .iter()
                .map(|c| [c[0] as f64 / n, c[1] as f64 / n])
                .collect(),
        )
    }
}

/// Empirical joints recorded at an increasing schedule of prefix lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointTrace {
    pub checkpoints: Vec<u64>,
    pub snapshots: Vec<Snapshot>,
    pub final_state_path_length: u64,
}

impl CheckpointTrace {
    /// The last-half snapshots used as the limiting-distribution surrogate.
    pub fn tail(&self) -> &[Snapshot] {
        let len = self.snapshots.len();
        &self.snapshots[len - len.div_ceil(2)..]
    }

    pub fn final_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Prefix lengths at which to snapshot a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckpointSchedule {
    /// `⌈n · (2/3)^(points−i)⌉` for `i = 1..=points`, deduplicated.
    Geometric { points: usize },
    /// An explicit list (sorted and deduplicated before use).
    List(Vec<u64>),
}

impl Default for CheckpointSchedule {
    fn default() -> Self {
        CheckpointSchedule::Geometric { points: 24 }
    }
}

impl CheckpointSchedule {
    pub fn materialize(&self, n: u64) -> Vec<u64> {
        let mut points = match self {
            CheckpointSchedule::Geometric { points } => {
                let k = *points;
                (1..=k)
                    .map(|i| {
                        let scale = (2.0f64 / 3.0).powi((k - i) as i32);
                        ((n as f64) * scale).ceil() as u64
                    })
                    .collect::<Vec<_>>()
            }
            CheckpointSchedule::List(list) => list.clone(),
        };
        points.retain(|&p| p >= 1 && p <= n);
        points.sort_unstable();
        points.dedup();
        points
    }

    pub fn spec_string(&self) -> String {
        match self {
            CheckpointSchedule::Geometric { points } => format!("geometric:{points}"),
            CheckpointSchedule::List(list) => {
                let items: Vec<String> = list.iter().map(|p| p.to_string()).collect();
                format!("list:{}", items.join(","))
            }
        }
    }
}

/// Run an automaton on a prefix of `x`, snapshotting the exact count-based
/// joint at each checkpoint. Checkpoints must not exceed `|x|`; the run stops
/// at the largest one.
pub fn run_trace<A: Automaton>(m: &A, x: &Bits, checkpoints: &[u64]) -> Result<CheckpointTrace> {
    let mut points = checkpoints.to_vec();
    points.sort_unstable();
    points.dedup();
    if points.first().is_some_and(|&p| p == 0) {
        return Err(Error::Invalid(
            "checkpoint 0 has no empirical distribution".into(),
        ));
    }
    if let Some(&last) = points.last() {
        if last > x.len() as u64 {
            return Err(Error::CheckpointBeyondInput {
                checkpoint: last,
                len: x.len() as u64,
            });
        }
    }

    let mut counts = vec![[0u64; 2]; m.state_count()];
    let mut snapshots = Vec::with_capacity(points.len());
    let mut next_point = points.iter().copied().peekable();
    let mut q = m.start();
    let mut steps: u64 = 0;
    for bit in x.iter() {
        if next_point.peek().is_none() {
            break;
        }
        counts[q][bit as usize] += 1;
        q = m.step(q, bit);
        steps += 1;
        while next_point.peek() == Some(&steps) {
            next_point.next();
            snapshots.push(Snapshot {
                n: steps,
                counts: counts.clone(),
            });
        }
    }
    Ok(CheckpointTrace {
        checkpoints: points,
        snapshots,
        final_state_path_length: steps,
    })
}

/// Greedily merge the tail snapshots into representatives pairwise at least
/// `tol` apart in L1. The first snapshot landing in a new ball becomes its
/// representative.
pub fn cluster_set(trace: &CheckpointTrace, tol: f64) -> Result<Vec<JointDistribution>> {
    if trace.snapshots.is_empty() {
        return Err(Error::Invalid("cannot cluster an empty trace".into()));
    }
    let mut representatives: Vec<JointDistribution> = Vec::new();
    for snapshot in trace.tail() {
        let joint = snapshot.joint();
        if representatives
            .iter()
            .all(|rep| rep.l1_distance(&joint) >= tol)
        {
            representatives.push(joint);
        }
    }
    Ok(representatives)
}

/// `‖Q_n − π‖₁` at the final checkpoint, with π from the linear solve.
pub fn state_gap(chain: &FairChain, trace: &CheckpointTrace) -> Result<f64> {
    let snapshot = trace
        .final_snapshot()
        .ok_or_else(|| Error::Invalid("trace has no snapshots".into()))?;
    let pi = chain.stationary(StationaryMethod::LinearSolve)?;
    Ok(l1_distance(&snapshot.joint().state_marginal(), &pi))
}

/// The stationary joint of a fair chain: mass `π(q)/2` on each out-edge.
pub fn stationary_joint(chain: &FairChain) -> Result<JointDistribution> {
    let pi = chain.stationary(StationaryMethod::LinearSolve)?;
    Ok(JointDistribution::new(
        pi.iter().map(|&p| [p / 2.0, p / 2.0]).collect(),
    ))
}

/// Minimum sliding-window frequency over all words of length `word_len` in
/// the first `n` bits: `min_w #occurrences(w) / (n − word_len + 1)`. Words
/// that never occur make the result 0.
pub fn word_min_frequency(x: &Bits, n: usize, word_len: u32) -> Result<f64> {
    const MAX_WORD_LEN: u32 = 16;
    if word_len > MAX_WORD_LEN {
        return Err(Error::WordTooLong {
            n: word_len,
            max: MAX_WORD_LEN,
        });
    }
    if word_len == 0 {
        return Err(Error::Invalid("word length must be at least 1".into()));
    }
    let k = word_len as usize;
    if n < k || n > x.len() {
        return Err(Error::Invalid(format!(
            "prefix length {n} must lie in [{k}, {}]",
            x.len()
        )));
    }
    let mask: u32 = (1u32 << k) - 1;
    let mut counts = vec![0u64; 1 << k];
    let mut window: u32 = 0;
    for i in 0..n {
        window = ((window << 1) | x[i] as u32) & mask;
        if i + 1 >= k {
            counts[window as usize] += 1;
        }
    }
    let windows = (n - k + 1) as f64;
    Ok(counts.iter().copied().min().unwrap_or(0) as f64 / windows)
}

/// One JSON-lines record per snapshot: `n`, the sparse joint counts keyed
/// `"q:b->q'"`, the state marginal, and the conditional per visited state.
pub fn trace_to_jsonl(trace: &CheckpointTrace, chain: &FairChain) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        n: u64,
        joint: BTreeMap<String, u64>,
        marginal: BTreeMap<&'a str, f64>,
        conditional: BTreeMap<&'a str, [f64; 2]>,
    }

    let mut out = String::new();
    for snapshot in &trace.snapshots {
        let mut joint = BTreeMap::new();
        for (q, cells) in snapshot.counts.iter().enumerate() {
            for bit in 0..2u8 {
                let count = cells[bit as usize];
                if count > 0 {
                    let key = format!(
                        "{}:{}->{}",
                        chain.name(q),
                        bit,
                        chain.name(chain.step(q, bit))
                    );
                    joint.insert(key, count);
                }
            }
        }
        let dist = snapshot.joint();
        let marginal: BTreeMap<&str, f64> = dist
            .state_marginal()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(q, &m)| (chain.name(q), m))
            .collect();
        let conditional: BTreeMap<&str, [f64; 2]> = (0..dist.state_count())
            .filter_map(|q| dist.conditional(q).map(|c| (chain.name(q), c)))
            .collect();
        let line = Line {
            n: snapshot.n,
            joint,
            marginal,
            conditional,
        };
        out.push_str(&serde_json::to_string(&line).expect("trace line serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{parse_spec, Machine};
    use crate::markov::induce_chain;
    use crate::sequence::{generate, SourceKind};

    fn fig1() -> Machine {
        parse_spec("states: a b c d\nstart: a\ntrans: a 0 b\ntrans: a 1 b\ntrans: b 0 a\ntrans: b 1 c\ntrans: c 0 d\ntrans: c 1 d\ntrans: d 0 a\ntrans: d 1 c\n").unwrap()
    }

    fn one_state() -> Machine {
        parse_spec("states: s\nstart: s\ntrans: s 0 s\ntrans: s 1 s\n").unwrap()
    }

    #[test]
    fn four_step_run_counts_each_transition_once() {
        let m = fig1();
        let x = Bits::parse_ascii("0110", "test").unwrap();
        let trace = run_trace(&m, &x, &[4]).unwrap();
        let snapshot = &trace.snapshots[0];
        // path a,b,c,d,a: transitions (a,0) (b,1) (c,1) (d,0)
        assert_eq!(snapshot.counts, vec![[1, 0], [0, 1], [0, 1], [1, 0]]);
        let joint = snapshot.joint();
        for q in 0..4 {
            let expected = if q == 0 || q == 3 {
                [0.25, 0.0]
            } else {
                [0.0, 0.25]
            };
            assert_eq!([joint.mass(q, 0), joint.mass(q, 1)], expected);
        }
    }

    #[test]
    fn marginal_sums_to_one_and_counts_are_integers() {
        let m = fig1();
        let x = generate(&SourceKind::Champernowne, 1000).unwrap();
        let trace = run_trace(&m, &x, &CheckpointSchedule::default().materialize(1000)).unwrap();
        for snapshot in &trace.snapshots {
            let total: u64 = snapshot.counts.iter().map(|c| c[0] + c[1]).sum();
            assert_eq!(total, snapshot.n);
            let joint = snapshot.joint();
            assert!((joint.total() - 1.0).abs() < 1e-12);
            assert!((joint.state_marginal().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            joint.validate().unwrap();
        }
    }

    #[test]
    fn one_state_machine_splits_mass_by_bit() {
        let m = one_state();
        let x = Bits::parse_ascii("01", "test").unwrap();
        let trace = run_trace(&m, &x, &[2]).unwrap();
        let joint = trace.snapshots[0].joint();
        assert_eq!([joint.mass(0, 0), joint.mass(0, 1)], [0.5, 0.5]);
    }

    #[test]
    fn checkpoint_beyond_input_is_rejected() {
        let m = one_state();
        let x = Bits::parse_ascii("0101", "test").unwrap();
        match run_trace(&m, &x, &[5]) {
            Err(Error::CheckpointBeyondInput {
                checkpoint: 5,
                len: 4,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conditional_defined_exactly_on_visited_states() {
        let m = fig1();
        let x = Bits::parse_ascii("0110", "test").unwrap();
        let joint = run_trace(&m, &x, &[2]).unwrap().snapshots[0].joint();
        assert!(joint.conditional(0).is_some());
        assert!(joint.conditional(1).is_some());
        assert!(joint.conditional(2).is_none());
        let [c0, c1] = joint.conditional(0).unwrap();
        assert!((c0 + c1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn convergent_tail_collapses_to_one_representative() {
        // periodic input keeps every tail snapshot within O(1/n) of (½, ½)
        let m = one_state();
        let pattern = Bits::parse_ascii("0110", "t").unwrap();
        let x = generate(&SourceKind::Periodic(pattern), 100_000).unwrap();
        let trace = run_trace(&m, &x, &CheckpointSchedule::default().materialize(100_000)).unwrap();
        let reps = cluster_set(&trace, 0.02).unwrap();
        assert_eq!(reps.len(), 1);
    }

    #[test]
    fn parity_machine_on_alternating_bits_merges_at_large_n() {
        // state = running parity of ones; on 0101… the joint differs by
        // O(1/n) between odd and even checkpoints
        let m = parse_spec("states: even odd\nstart: even\ntrans: even 0 even\ntrans: even 1 odd\ntrans: odd 0 odd\ntrans: odd 1 even\n").unwrap();
        let x = generate(
            &SourceKind::Periodic(Bits::parse_ascii("01", "t").unwrap()),
            200_000,
        )
        .unwrap();
        let mut checkpoints = Vec::new();
        for base in [50_000u64, 80_000, 110_000, 140_000, 170_000] {
            checkpoints.push(base);
            checkpoints.push(base + 1);
        }
        let trace = run_trace(&m, &x, &checkpoints).unwrap();
        let reps = cluster_set(&trace, 0.01).unwrap();
        assert_eq!(reps.len(), 1);
    }

    #[test]
    fn oscillating_block_sequence_keeps_two_representatives() {
        // 0^2 1^2 0^4 1^4 …: the ones frequency swings between ≈1/3 and ≈1/2
        // forever, so geometric tail snapshots cannot all merge
        let mut x = Bits::new();
        let mut bit = 0u8;
        let mut len = 2usize;
        while x.len() < 1 << 20 {
            for _ in 0..len {
                x.push(bit);
            }
            if bit == 1 {
                len *= 2;
            }
            bit ^= 1;
        }
        let n = x.len() as u64;
        let trace = run_trace(
            &one_state(),
            &x,
            &CheckpointSchedule::default().materialize(n),
        )
        .unwrap();
        let reps = cluster_set(&trace, 0.02).unwrap();
        assert!(reps.len() >= 2, "got {} representatives", reps.len());
    }

    #[test]
    fn cluster_tolerance_extremes() {
        let m = one_state();
        let x = generate(&SourceKind::Champernowne, 4096).unwrap();
        let trace = run_trace(&m, &x, &CheckpointSchedule::default().materialize(4096)).unwrap();
        assert_eq!(cluster_set(&trace, f64::INFINITY).unwrap().len(), 1);
        let tiny = cluster_set(&trace, 1e-15).unwrap();
        let mut distinct: Vec<_> = trace.tail().iter().map(|s| s.joint()).collect();
        distinct.dedup_by(|a, b| a.l1_distance(b) < 1e-15);
        assert_eq!(tiny.len(), distinct.len());
    }

    #[test]
    fn state_gap_on_forced_alternation_is_tiny() {
        let m = parse_spec(
            "states: p q\nstart: p\ntrans: p 0 q\ntrans: p 1 q\ntrans: q 0 p\ntrans: q 1 p\n",
        )
        .unwrap();
        let chain = induce_chain(&m);
        let x = generate(&SourceKind::Champernowne, 10_000).unwrap();
        let trace = run_trace(&m, &x, &[10_000]).unwrap();
        let gap = state_gap(&chain, &trace).unwrap();
        assert!(gap <= 2.0 / 10_000.0 + 1e-12, "gap {gap}");
    }

    #[test]
    fn state_gap_of_single_state_chain_is_zero() {
        let m = one_state();
        let chain = induce_chain(&m);
        let x = generate(&SourceKind::Zeros, 100).unwrap();
        let trace = run_trace(&m, &x, &[100]).unwrap();
        assert_eq!(state_gap(&chain, &trace).unwrap(), 0.0);
    }

    #[test]
    fn min_frequency_spots_missing_words() {
        let zeros = generate(&SourceKind::Zeros, 1000).unwrap();
        assert_eq!(word_min_frequency(&zeros, 1000, 1).unwrap(), 0.0);

        let alternating = generate(
            &SourceKind::Periodic(Bits::parse_ascii("01", "t").unwrap()),
            1000,
        )
        .unwrap();
        assert_eq!(word_min_frequency(&alternating, 1000, 2).unwrap(), 0.0);
    }

    #[test]
    fn min_frequency_near_quarter_on_champernowne() {
        let x = generate(&SourceKind::Champernowne, 1_000_000).unwrap();
        let f = word_min_frequency(&x, 1_000_000, 2).unwrap();
        assert!(f >= 0.2, "min 2-word frequency {f}");
    }

    #[test]
    fn min_frequency_rejects_oversized_words() {
        let x = generate(&SourceKind::Zeros, 100).unwrap();
        assert!(matches!(
            word_min_frequency(&x, 100, 17),
            Err(Error::WordTooLong { n: 17, max: 16 })
        ));
    }

    #[test]
    fn geometric_schedule_is_increasing_and_ends_at_n() {
        let points = CheckpointSchedule::default().materialize(1_000_000);
        assert!(points.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*points.last().unwrap(), 1_000_000);
        assert_eq!(points.len(), 24);
    }

    #[test]
    fn jsonl_export_is_deterministic_and_sparse() {
        let m = fig1();
        let chain = induce_chain(&m);
        let x = Bits::parse_ascii("0110", "test").unwrap();
        let trace = run_trace(&m, &x, &[2, 4]).unwrap();
        let jsonl = trace_to_jsonl(&trace, &chain);
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            r#"{"n":2,"joint":{"a:0->b":1,"b:1->c":1},"marginal":{"a":0.5,"b":0.5},"conditional":{"a":[1.0,0.0],"b":[0.0,1.0]}}"#
        );
        assert_eq!(jsonl, trace_to_jsonl(&trace, &chain));
    }
}
