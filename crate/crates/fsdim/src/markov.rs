//! Induced fair Markov chains and stationary-distribution solvers.
//!
//! The induced chain of an automaton keeps its transition graph and assigns
//! probability 1/2 to each of the two labeled edges out of every state, so
//! the stationary conditional edge distribution is exactly fair. Stationary
//! vectors are computed two ways: a direct linear solve of `π(I − P) = 0`
//! with the all-ones normalization row (mirroring `π = b M⁻¹`), and power
//! iteration with Cesàro averaging over a trailing window so periodic chains
//! (cycles) converge too. Chains with transient states get stationary mass
//! exactly 0 there by restricting the solve to the unique ergodic set.

use crate::machine::{analyze_adjacency, Automaton, ErgodicAnalysis, Machine, StateId};
use crate::{Error, Result};

/// How to compute a stationary distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationaryMethod {
    LinearSolve,
    PowerIteration,
}

/// The fair Markov chain induced by an automaton: same states and labeled
/// edges, each edge with probability 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct FairChain {
    names: Vec<String>,
    start: StateId,
    delta: Vec<[StateId; 2]>,
}

/// Build the induced chain of a machine (decorations are dropped).
pub fn induce_chain(m: &Machine) -> FairChain {
    FairChain {
        names: m.names().to_vec(),
        start: m.start(),
        delta: m.delta().to_vec(),
    }
}

impl FairChain {
    pub fn state_count(&self) -> usize {
        self.names.len()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn name(&self, q: StateId) -> &str {
        &self.names[q]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn step(&self, q: StateId, bit: u8) -> StateId {
        self.delta[q][bit as usize]
    }

    pub fn delta(&self) -> &[[StateId; 2]] {
        &self.delta
    }

    /// The 2|Q| labeled edges (q, b, δ(q, b)).
    pub fn edges(&self) -> Vec<(StateId, u8, StateId)> {
        let mut edges = Vec::with_capacity(2 * self.state_count());
        for (q, row) in self.delta.iter().enumerate() {
            edges.push((q, 0, row[0]));
            edges.push((q, 1, row[1]));
        }
        edges
    }

    /// Dense row-stochastic transition matrix (1/2 per edge; a state whose
    /// two edges share a target gets a single entry of 1).
    pub fn transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.state_count();
        let mut p = vec![vec![0.0; n]; n];
        for (q, row) in self.delta.iter().enumerate() {
            p[q][row[0]] += 0.5;
            p[q][row[1]] += 0.5;
        }
        p
    }

    pub fn ergodic_analysis(&self) -> ErgodicAnalysis {
        crate::machine::analyze_delta(&self.delta)
    }

    /// A machine view of the chain (no selector or betting decorations),
    /// usable anywhere a plain automaton is expected.
    pub fn to_machine(&self) -> Machine {
        Machine::new(
            self.names.clone(),
            self.start,
            self.delta.clone(),
            None,
            None,
        )
        .expect("chain state set is consistent")
    }

    /// Stationary distribution over all states. Transient states get exactly
    /// 0; errors if the chain has more than one ergodic set.
    pub fn stationary(&self, method: StationaryMethod) -> Result<Vec<f64>> {
        let analysis = self.ergodic_analysis();
        let ergodic = unique_ergodic_set(&analysis)?;
        let pi_e = match method {
            StationaryMethod::LinearSolve => {
                let p_e = restrict_matrix(&self.transition_matrix(), ergodic);
                linear_solve_stationary(&p_e)?
            }
            StationaryMethod::PowerIteration => self.power_iteration(ergodic),
        };
        Ok(embed(&pi_e, ergodic, self.state_count()))
    }

    /// Cesàro-averaged power iteration restricted to the ergodic set. The
    /// averaging window is the last 10% of steps, rounded up to a multiple of
    /// the chain period so cyclic-class oscillation cancels exactly.
    fn power_iteration(&self, ergodic: &[StateId]) -> Vec<f64> {
        let k = ergodic.len();
        if k == 1 {
            return vec![1.0];
        }
        let mut local = vec![usize::MAX; self.state_count()];
        for (i, &q) in ergodic.iter().enumerate() {
            local[q] = i;
        }
        let edges: Vec<[usize; 2]> = ergodic
            .iter()
            .map(|&q| [local[self.delta[q][0]], local[self.delta[q][1]]])
            .collect();
        let period = chain_period(&edges).max(1);

        let mut x = vec![1.0 / k as f64; k];
        let mut next = vec![0.0; k];
        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut total_steps: u64 = 1024;
        loop {
            let window_raw = (total_steps / 10).max(1) as usize;
            let window = window_raw.div_ceil(period) * period;
            let burn = (total_steps as usize).saturating_sub(window);
            for _ in 0..burn {
                step_fair(&edges, &x, &mut next);
                std::mem::swap(&mut x, &mut next);
            }
            let mut sum = vec![0.0; k];
            for _ in 0..window {
                step_fair(&edges, &x, &mut next);
                std::mem::swap(&mut x, &mut next);
                for (s, v) in sum.iter_mut().zip(&x) {
                    *s += v;
                }
            }
            let mut avg: Vec<f64> = sum.iter().map(|s| s / window as f64).collect();
            let norm: f64 = avg.iter().sum();
            for a in &mut avg {
                *a /= norm;
            }
            step_fair(&edges, &avg, &mut next);
            let residual = avg
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, avg));
            }
            if residual < 1e-13 {
                return best.expect("at least one round ran").1;
            }
            if total_steps >= 1 << 24 {
                let (residual, avg) = best.expect("at least one round ran");
                log::warn!(
                    "power iteration stopped at the step cap with residual {residual:.3e}"
                );
                return avg;
            }
            total_steps *= 2;
        }
    }
}

impl Automaton for FairChain {
    fn state_count(&self) -> usize {
        self.names.len()
    }

    fn start(&self) -> StateId {
        self.start
    }

    fn step(&self, q: StateId, bit: u8) -> StateId {
        self.delta[q][bit as usize]
    }
}

fn step_fair(edges: &[[usize; 2]], x: &[f64], next: &mut [f64]) {
    next.iter_mut().for_each(|v| *v = 0.0);
    for (q, targets) in edges.iter().enumerate() {
        let half = 0.5 * x[q];
        next[targets[0]] += half;
        next[targets[1]] += half;
    }
}

/// Period of an irreducible chain: gcd of (level(u) + 1 − level(v)) over all
/// edges u → v, with levels from a BFS spanning tree.
fn chain_period(edges: &[[usize; 2]]) -> usize {
    let n = edges.len();
    let mut level = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    level[0] = 0;
    queue.push_back(0usize);
    while let Some(q) = queue.pop_front() {
        for &t in &edges[q] {
            if level[t] == usize::MAX {
                level[t] = level[q] + 1;
                queue.push_back(t);
            }
        }
    }
    let mut g: u64 = 0;
    for (q, targets) in edges.iter().enumerate() {
        for &t in targets {
            g = gcd(g, (level[q] as i64 + 1 - level[t] as i64).unsigned_abs());
        }
    }
    g.max(1) as usize
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn unique_ergodic_set(analysis: &ErgodicAnalysis) -> Result<&[StateId]> {
    match analysis.ergodic_sets.len() {
        1 => Ok(&analysis.ergodic_sets[0]),
        n => Err(Error::ReducibleChain { ergodic_sets: n }),
    }
}

fn restrict_matrix(p: &[Vec<f64>], states: &[StateId]) -> Vec<Vec<f64>> {
    states
        .iter()
        .map(|&q| states.iter().map(|&t| p[q][t]).collect())
        .collect()
}

fn embed(pi_e: &[f64], states: &[StateId], n: usize) -> Vec<f64> {
    let mut pi = vec![0.0; n];
    for (&q, &v) in states.iter().zip(pi_e) {
        pi[q] = v;
    }
    pi
}

/// Stationary distribution of an arbitrary row-stochastic matrix, restricted
/// to its unique ergodic set (transient states get 0). The sensitivity check
/// needs this generality: perturbed chains are no longer fair.
pub fn stationary_of_matrix(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    for (row, r) in p.iter().enumerate() {
        if r.len() != n {
            return Err(Error::DimensionMismatch {
                left: n,
                right: r.len(),
            });
        }
        if r.iter().any(|&v| v < 0.0) {
            return Err(Error::NotStochastic { row, sum: f64::NAN });
        }
        let sum: f64 = r.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic { row, sum });
        }
    }
    let adjacency: Vec<Vec<usize>> = p
        .iter()
        .map(|row| (0..n).filter(|&j| row[j] > 0.0).collect())
        .collect();
    let analysis = analyze_adjacency(&adjacency);
    let ergodic = unique_ergodic_set(&analysis)?;
    let pi_e = linear_solve_stationary(&restrict_matrix(p, ergodic))?;
    Ok(embed(&pi_e, ergodic, n))
}

/// `(‖P − P′‖∞, ‖π − π′‖₁)` for two irreducible row-stochastic matrices on
/// the same state set. The matrix norm is the entrywise maximum; stationary
/// vectors come from the linear solve.
pub fn stationary_sensitivity(p: &[Vec<f64>], p_prime: &[Vec<f64>]) -> Result<(f64, f64)> {
    if p.len() != p_prime.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: p_prime.len(),
        });
    }
    let pi = stationary_of_matrix(p)?;
    let pi_prime = stationary_of_matrix(p_prime)?;
    let mut dp = 0.0f64;
    for (row, row_prime) in p.iter().zip(p_prime) {
        if row.len() != row_prime.len() {
            return Err(Error::DimensionMismatch {
                left: row.len(),
                right: row_prime.len(),
            });
        }
        for (a, b) in row.iter().zip(row_prime) {
            dp = dp.max((a - b).abs());
        }
    }
    Ok((dp, l1_distance(&pi, &pi_prime)))
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Solve for π with π P = π and Σπ = 1 on an irreducible matrix: transpose
/// `I − P`, replace the first row with all ones, and solve against e₀ with
/// partial pivoting. Warns when the 1-norm condition estimate exceeds 1e12.
fn linear_solve_stationary(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == 0 {
                1.0
            } else {
                (if i == j { 1.0 } else { 0.0 }) - p[j][i]
            };
        }
    }
    let mut b = vec![0.0; n];
    b[0] = 1.0;

    let lu = Lu::factor(a)?;
    if n <= 512 {
        let cond = lu.condition_estimate();
        if cond > 1e12 {
            log::warn!("stationary solve is ill-conditioned: cond₁ ≈ {cond:.3e}");
        }
    }
    let mut pi = lu.solve(&b);
    for v in &mut pi {
        *v = v.max(0.0);
    }
    let sum: f64 = pi.iter().sum();
    if sum <= 0.0 {
        return Err(Error::SingularSystem);
    }
    for v in &mut pi {
        *v /= sum;
    }
    Ok(pi)
}

/// Dense LU factorization with partial pivoting.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
    norm1: f64,
}

impl Lu {
    fn factor(a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| a[i][j].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let mut lu = a;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| lu[i][col].abs().total_cmp(&lu[j][col].abs()))
                .expect("nonempty column");
            if lu[pivot][col].abs() < 1e-300 {
                return Err(Error::SingularSystem);
            }
            lu.swap(col, pivot);
            perm.swap(col, pivot);
            for row in col + 1..n {
                let factor = lu[row][col] / lu[col][col];
                lu[row][col] = factor;
                let (upper, lower) = lu.split_at_mut(row);
                for (target, &pivot_cell) in
                    lower[0][col + 1..].iter_mut().zip(&upper[col][col + 1..])
                {
                    *target -= factor * pivot_cell;
                }
            }
        }
        Ok(Lu { lu, perm, norm1 })
    }

    #[allow(clippy::needless_range_loop)] // triangular sweeps read clearest indexed
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// κ₁ = ‖A‖₁ · ‖A⁻¹‖₁, with the inverse norm taken column by column.
    fn condition_estimate(&self) -> f64 {
        let n = self.perm.len();
        let mut inv_norm = 0.0f64;
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            inv_norm = inv_norm.max(col.iter().map(|v| v.abs()).sum());
        }
        self.norm1 * inv_norm
    }
}
