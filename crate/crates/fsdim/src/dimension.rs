//! Finite-state dimension estimation.
//!
//! Per chain, the dimension upper bound is `1 − max_μ D_KL(μ(E|Q) ‖ fair)`
//! over the cluster representatives μ of the run — equivalently the minimum
//! conditional entropy over clusters — and the strong-dimension bound swaps
//! max for min (equivalently the maximum conditional entropy). Per family,
//! both are minimized over the member chains. A finite family replaces the
//! supremum over all fair irreducible chains, so the estimates are upper
//! bounds by construction and every report is labeled accordingly.
//!
//! The default family mixes depth-k block chains (state = last k bits),
//! which reproduce k-block statistics, with phase-augmented block chains
//! (state = position mod d plus the last k bits), which witness diluted
//! sequences. An independent cross-check estimates dimension from sliding
//! k-block entropies directly, with no chain machinery in the path.
//!
//! Martingale capital is tracked in log₂ domain: a bet of β on 0 adds
//! `log₂(2β)` on a 0 and `log₂(2(1−β))` on a 1, so an all-in bet on the
//! wrong bit drops the capital to `−∞` — a legal value, not an error.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::empirical::{cluster_set, run_trace, CheckpointSchedule, JointDistribution};
use crate::infotheory::{conditional_entropy, conditional_kl_to_fair};
use crate::machine::Machine;
use crate::markov::{induce_chain, FairChain};
use crate::sequence::Bits;
use crate::{Error, Result};

/// Knobs shared by the estimators; the defaults are the reported ones.
#[derive(Clone, Debug)]
pub struct EstimatorOptions {
    pub schedule: CheckpointSchedule,
    pub cluster_tol: f64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            schedule: CheckpointSchedule::default(),
            cluster_tol: 0.02,
        }
    }
}

/// One cluster representative with its information quantities.
#[derive(Clone, Debug)]
pub struct ClusterStat {
    pub joint: JointDistribution,
    pub conditional_entropy: f64,
    pub kl_to_fair: f64,
}

/// Per-chain dimension bounds.
#[derive(Clone, Debug)]
pub struct ChainDimension {
    pub dim_upper: f64,
    pub strong_dim_upper: f64,
    pub clusters: Vec<ClusterStat>,
}

impl ChainDimension {
    /// Index of the cluster attaining the dimension bound (max KL).
    pub fn witness_cluster_index(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.clusters.iter().enumerate() {
            if c.conditional_entropy < self.clusters[best].conditional_entropy {
                best = i;
            }
        }
        best
    }
}

/// Dimension bounds from a single irreducible chain run on the first `n`
/// bits of `x`: `dim ≤ min` / `Dim ≤ max` conditional entropy over the
/// cluster representatives of the tail snapshots.
pub fn chain_dimension(
    chain: &FairChain,
    x: &Bits,
    n: u64,
    opts: &EstimatorOptions,
) -> Result<ChainDimension> {
    if !chain.ergodic_analysis().irreducible {
        return Err(Error::ReducibleChain {
            ergodic_sets: chain.ergodic_analysis().ergodic_sets.len(),
        });
    }
    let trace = run_trace(chain, x, &opts.schedule.materialize(n))?;
    let clusters: Vec<ClusterStat> = cluster_set(&trace, opts.cluster_tol)?
        .into_iter()
        .map(|joint| {
            let h = conditional_entropy(&joint);
            let kl = conditional_kl_to_fair(&joint);
            ClusterStat {
                joint,
                conditional_entropy: h,
                kl_to_fair: kl,
            }
        })
        .collect();
    let dim_upper = clusters
        .iter()
        .map(|c| c.conditional_entropy)
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0);
    let strong_dim_upper = clusters
        .iter()
        .map(|c| c.conditional_entropy)
        .fold(f64::NEG_INFINITY, f64::max)
        .clamp(0.0, 1.0);
    Ok(ChainDimension {
        dim_upper,
        strong_dim_upper,
        clusters,
    })
}

/// Depth-k block chain: the state is the last k bits (one state for k = 0).
/// Irreducible with uniform stationary distribution; its run on `x`
/// reproduces the sliding (k+1)-block statistics of `x`.
pub fn block_machine(k: u32) -> Machine {
    let states = 1usize << k;
    let mask = states - 1;
    let names = (0..states)
        .map(|s| {
            if k == 0 {
                "-".to_string()
            } else {
                format!("{s:0width$b}", width = k as usize)
            }
        })
        .collect();
    let delta = (0..states)
        .map(|s| [(s << 1) & mask, ((s << 1) | 1) & mask])
        .collect();
    Machine::new(names, 0, delta, None, None).expect("block machine is well-formed")
}

/// Phase-augmented block chain: the state is (position mod d, last k bits).
pub fn phase_machine(d: usize, k: u32) -> Machine {
    assert!(d >= 1);
    let contexts = 1usize << k;
    let mask = contexts - 1;
    let mut names = Vec::with_capacity(d * contexts);
    let mut delta = Vec::with_capacity(d * contexts);
    for phase in 0..d {
        for ctx in 0..contexts {
            names.push(if k == 0 {
                format!("p{phase}")
            } else {
                format!("p{phase}|{ctx:0width$b}", width = k as usize)
            });
            let next_phase = (phase + 1) % d;
            delta.push([
                next_phase * contexts + ((ctx << 1) & mask),
                next_phase * contexts + (((ctx << 1) | 1) & mask),
            ]);
        }
    }
    Machine::new(names, 0, delta, None, None).expect("phase machine is well-formed")
}

/// A named list of candidate chains.
#[derive(Clone, Debug)]
pub struct ChainFamily {
    spec: String,
    members: Vec<(String, Machine)>,
}

const MAX_BLOCK_DEPTH: u32 = 20;
const MAX_PHASE: usize = 64;

impl ChainFamily {
    /// Parse a family spec: `blocks:K`, `phase:D[,K']`, and `file:PATH`
    /// joined by `+`. `blocks:K` contributes the depth-k chains for
    /// `k ≤ K`; `phase:D[,K']` contributes the (d, k) chains for `d ≤ D`,
    /// `k ≤ K'` (K' defaults to 0).
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |reason: String| Error::BadFamilySpec {
            spec: spec.to_string(),
            reason,
        };
        let mut members = Vec::new();
        for part in spec.split('+') {
            let part = part.trim();
            match part.split_once(':') {
                Some(("blocks", depth)) => {
                    let max_k: u32 = depth
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad depth {depth:?}")))?;
                    if max_k > MAX_BLOCK_DEPTH {
                        return Err(bad(format!(
                            "block depth {max_k} exceeds {MAX_BLOCK_DEPTH}"
                        )));
                    }
                    for k in 0..=max_k {
                        members.push((format!("blocks:{k}"), block_machine(k)));
                    }
                }
                Some(("phase", args)) => {
                    let (d_str, k_str) = match args.split_once(',') {
                        Some((d, k)) => (d, k),
                        None => (args, "0"),
                    };
                    let max_d: usize = d_str
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad period {d_str:?}")))?;
                    let max_k: u32 = k_str
                        .trim()
                        .parse()
                        .map_err(|_| bad(format!("bad depth {k_str:?}")))?;
                    if max_d == 0 || max_d > MAX_PHASE {
                        return Err(bad(format!("phase period must be in 1..={MAX_PHASE}")));
                    }
                    if max_k > 16 {
                        return Err(bad("phase block depth exceeds 16".into()));
                    }
                    for d in 1..=max_d {
                        for k in 0..=max_k {
                            members.push((format!("phase:{d},{k}"), phase_machine(d, k)));
                        }
                    }
                }
                Some(("file", path)) => {
                    let path = path.trim();
                    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                        path: path.to_string(),
                        source,
                    })?;
                    members.push((format!("file:{path}"), crate::machine::parse_spec(&text)?));
                }
                _ => return Err(bad(format!("unknown family part {part:?}"))),
            }
        }
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(ChainFamily {
            spec: spec.to_string(),
            members,
        })
    }

    pub fn from_members(spec: &str, members: Vec<(String, Machine)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(ChainFamily {
            spec: spec.to_string(),
            members,
        })
    }

    pub fn spec_string(&self) -> &str {
        &self.spec
    }

    pub fn members(&self) -> &[(String, Machine)] {
        &self.members
    }
}

/// Per-member summary kept in the report diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct MemberReport {
    pub name: String,
    pub states: usize,
    pub dim_upper: f64,
    pub strong_dim_upper: f64,
    pub clusters: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub n: u64,
    pub family: String,
    pub schedule: String,
    pub cluster_tol: f64,
    /// Finite families under-approximate the supremum over all chains, so
    /// the estimates over-approximate the dimensions.
    pub estimate_kind: &'static str,
    pub strong_witness_chain: String,
    pub members: Vec<MemberReport>,
}

/// Family-level dimension estimates with the witnessing chain and cluster.
#[derive(Clone, Debug, Serialize)]
pub struct DimensionReport {
    pub dim_est: f64,
    pub strong_dim_est: f64,
    pub witness_chain: String,
    /// Sparse `"q:b->q'" → mass` view of the cluster attaining the
    /// witnessing chain's extremum.
    pub witness_cluster: BTreeMap<String, f64>,
    pub diagnostics: Diagnostics,
}

/// Sparse map view of a joint over a chain's labeled edges.
pub fn joint_to_sparse(chain: &FairChain, joint: &JointDistribution) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for q in 0..joint.state_count() {
        for bit in 0..2u8 {
            let mass = joint.mass(q, bit);
            if mass > 0.0 {
                map.insert(
                    format!(
                        "{}:{}->{}",
                        chain.name(q),
                        bit,
                        chain.name(chain.step(q, bit))
                    ),
                    mass,
                );
            }
        }
    }
    map
}

/// Evaluate every family member on the first `n` bits of `x` and take the
/// minimum of the per-chain bounds (for both dimension forms). Members run
/// concurrently; the merge is a fold in family order, so the report does not
/// depend on scheduling.
pub fn family_dimension(
    x: &Bits,
    n: u64,
    family: &ChainFamily,
    opts: &EstimatorOptions,
) -> Result<DimensionReport> {
    if family.members.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let evaluated: Vec<(String, FairChain, ChainDimension)> = family
        .members
        .par_iter()
        .map(|(name, machine)| {
            let chain = induce_chain(machine);
            if !chain.ergodic_analysis().irreducible {
                return Err(Error::ReducibleMember { name: name.clone() });
            }
            let result = chain_dimension(&chain, x, n, opts)?;
            Ok((name.clone(), chain, result))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best_dim = 0usize;
    let mut best_strong = 0usize;
    for (i, (_, _, result)) in evaluated.iter().enumerate() {
        if result.dim_upper < evaluated[best_dim].2.dim_upper {
            best_dim = i;
        }
        if result.strong_dim_upper < evaluated[best_strong].2.strong_dim_upper {
            best_strong = i;
        }
    }

    let (witness_name, witness_chain, witness_result) = &evaluated[best_dim];
    let witness_cluster = joint_to_sparse(
        witness_chain,
        &witness_result.clusters[witness_result.witness_cluster_index()].joint,
    );

    let members = evaluated
        .iter()
        .map(|(name, chain, result)| MemberReport {
            name: name.clone(),
            states: chain.state_count(),
            dim_upper: result.dim_upper,
            strong_dim_upper: result.strong_dim_upper,
            clusters: result.clusters.len(),
        })
        .collect();

    Ok(DimensionReport {
        dim_est: witness_result.dim_upper,
        strong_dim_est: evaluated[best_strong].2.strong_dim_upper,
        witness_chain: witness_name.clone(),
        witness_cluster,
        diagnostics: Diagnostics {
            n,
            family: family.spec.clone(),
            schedule: opts.schedule.spec_string(),
            cluster_tol: opts.cluster_tol,
            estimate_kind: "dim_upper_bound",
            strong_witness_chain: evaluated[best_strong].0.clone(),
            members,
        },
    })
}

/// Chain-free cross-check: `min_k H_k(n)/k` over empirical sliding k-block
/// distributions for the plain estimate, and `min_k max` over the tail
/// checkpoints for the strong estimate.
pub fn block_entropy_dimension(
    x: &Bits,
    n: u64,
    max_k: u32,
    schedule: &CheckpointSchedule,
) -> Result<(f64, f64)> {
    if max_k > 16 {
        return Err(Error::WordTooLong { n: max_k, max: 16 });
    }
    if max_k == 0 {
        return Err(Error::Invalid("block depth must be at least 1".into()));
    }
    if n > x.len() as u64 {
        return Err(Error::CheckpointBeyondInput {
            checkpoint: n,
            len: x.len() as u64,
        });
    }
    let checkpoints = schedule.materialize(n);
    if checkpoints.is_empty() {
        return Err(Error::Invalid("no checkpoints at or below n".into()));
    }
    let ks: Vec<usize> = (1..=max_k as usize).collect();
    let mut counts: Vec<Vec<u64>> = ks.iter().map(|&k| vec![0u64; 1 << k]).collect();
    // rates[j][i] = H_k / k for k = ks[j] at checkpoint i (NaN when n_i < k)
    let mut rates: Vec<Vec<f64>> = vec![Vec::new(); ks.len()];

    let mut window: u32 = 0;
    let mut next = checkpoints.iter().copied().peekable();
    for i in 0..n as usize {
        window = (window << 1) | x[i] as u32;
        for (j, &k) in ks.iter().enumerate() {
            if i + 1 >= k {
                counts[j][(window & ((1u32 << k) - 1)) as usize] += 1;
            }
        }
        let pos = (i + 1) as u64;
        while next.peek() == Some(&pos) {
            next.next();
            for (j, &k) in ks.iter().enumerate() {
                if pos >= k as u64 {
                    let total = (pos - k as u64 + 1) as f64;
                    let h = entropy_of_counts(&counts[j], total);
                    rates[j].push((h / k as f64).clamp(0.0, 1.0));
                } else {
                    rates[j].push(f64::NAN);
                }
            }
        }
    }

    let taken = rates[0].len();
    let tail_start = taken - taken.div_ceil(2);
    let mut dim_est = f64::INFINITY;
    let mut strong_dim_est = f64::INFINITY;
    for series in &rates {
        if let Some(&last) = series.last().filter(|v| !v.is_nan()) {
            dim_est = dim_est.min(last);
        }
        let tail_max = series[tail_start..]
            .iter()
            .copied()
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max);
        if tail_max.is_finite() {
            strong_dim_est = strong_dim_est.min(tail_max);
        }
    }
    if !dim_est.is_finite() || !strong_dim_est.is_finite() {
        return Err(Error::Invalid(
            "prefix shorter than every block length".into(),
        ));
    }
    Ok((dim_est, strong_dim_est))
}

fn entropy_of_counts(counts: &[u64], total: f64) -> f64 {
    let mut acc = 0.0;
    for &c in counts {
        if c > 0 {
            acc += c as f64 * (c as f64).log2();
        }
    }
    total.log2() - acc / total
}

/// The bettor that turns an empirical joint into capital growth:
/// β(q) = μ(0-edge | q) on visited states, 1/2 elsewhere, with the chain's
/// own transition structure. Run on the prefix that produced μ = P_n, its
/// log₂ capital is n·(1 − H(E|Q)) — the divergence rate against fair odds.
pub fn witness_martingale(chain: &FairChain, mu: &JointDistribution) -> Machine {
    let bets = (0..chain.state_count())
        .map(|q| mu.conditional(q).map_or(0.5, |c| c[0]))
        .collect();
    chain
        .to_machine()
        .with_betting(bets)
        .expect("betting matches the chain state set")
}

/// Log₂ capital of a martingale run, indexed by prefix length (entry 0 is 0,
/// the empty-prefix capital 1). `−∞` marks a bankrupt all-in bet.
#[derive(Clone, Debug)]
pub struct CapitalTrace {
    pub log2_capital: Vec<f64>,
    pub machine: Machine,
}

impl CapitalTrace {
    pub fn final_log2_capital(&self) -> f64 {
        *self
            .log2_capital
            .last()
            .expect("trace has the empty prefix")
    }
}

/// Run the capital recursion in the log domain over all of `x`.
pub fn run_martingale(m: &Machine, x: &Bits) -> Result<CapitalTrace> {
    let bets = m.betting().ok_or(Error::MissingBetting)?;
    let mut trace = Vec::with_capacity(x.len() + 1);
    let mut value = 0.0f64;
    trace.push(value);
    let mut q = m.start();
    for bit in x.iter() {
        let beta = bets[q];
        let stake = if bit == 0 { beta } else { 1.0 - beta };
        value += (2.0 * stake).log2();
        trace.push(value);
        q = m.step(q, bit);
    }
    Ok(CapitalTrace {
        log2_capital: trace,
        machine: m.clone(),
    })
}

/// Result of running several accounts side by side, each with initial
/// capital 1/N.
#[derive(Clone, Debug)]
pub struct MultiAccountRun {
    pub accounts: Vec<CapitalTrace>,
    /// Pointwise maximum over accounts of (trace − log₂ N).
    pub best: Vec<f64>,
    /// Account attaining the maximum at the final step (first on ties).
    pub best_index: usize,
}

pub fn multi_account_run(machines: &[Machine], x: &Bits) -> Result<MultiAccountRun> {
    if machines.is_empty() {
        return Err(Error::Invalid(
            "multi-account run needs at least one account".into(),
        ));
    }
    let accounts: Vec<CapitalTrace> = machines
        .iter()
        .map(|m| run_martingale(m, x))
        .collect::<Result<_>>()?;
    let offset = (machines.len() as f64).log2();
    let steps = x.len() + 1;
    let mut best = vec![f64::NEG_INFINITY; steps];
    for account in &accounts {
        for (b, &v) in best.iter_mut().zip(&account.log2_capital) {
            *b = b.max(v - offset);
        }
    }
    let mut best_index = 0;
    for (i, account) in accounts.iter().enumerate() {
        if account.final_log2_capital() > accounts[best_index].final_log2_capital() {
            best_index = i;
        }
    }
    Ok(MultiAccountRun {
        accounts,
        best,
        best_index,
    })
}
