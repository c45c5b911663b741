//! Finite-state selectors and the λ-weighted selection inequality.
//!
//! A selector outputs the bit read whenever it sits in a selecting state
//! (the state *before* consuming the bit); the complementary selector uses
//! the remaining states, so the two subsequences partition the input.
//! `λ_S` is the total stationary mass of the selecting states — the
//! asymptotic selection rate when the empirical state distribution converges
//! to stationary, but not otherwise: on the diluted sequence the four-state
//! example selector visits only half its chain, which is exactly what makes
//! the weighted inequality
//! `λ·dim(selected) + (1−λ)·Dim(complement) ≥ dim(input)` fail, hold
//! tightly, or hold strictly depending on the selecting set.

use serde::Serialize;

use crate::dimension::{family_dimension, ChainFamily, DimensionReport, EstimatorOptions};
use crate::empirical::{run_trace, state_gap};
use crate::machine::Machine;
use crate::markov::{induce_chain, StationaryMethod};
use crate::sequence::Bits;
use crate::{Error, Result};

/// A selector run split into its two output streams.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionSplit {
    pub selected: Bits,
    pub complement: Bits,
    /// Input positions at which the selector was in a selecting state.
    pub positions: Vec<usize>,
}

/// Run the selector over `x`, splitting it into the selected subsequence and
/// the complement (the subsequence the complementary selector picks).
pub fn apply_selector(s: &Machine, x: &Bits) -> Result<SelectionSplit> {
    let selecting = s.selecting().ok_or(Error::MissingSelecting)?;
    let mut selected = Bits::new();
    let mut complement = Bits::new();
    let mut positions = Vec::new();
    let mut q = s.start();
    for (i, bit) in x.iter().enumerate() {
        if selecting[q] {
            selected.push(bit);
            positions.push(i);
        } else {
            complement.push(bit);
        }
        q = s.step(q, bit);
    }
    Ok(SelectionSplit {
        selected,
        complement,
        positions,
    })
}

/// `λ_S = Σ_{q ∈ S} π(q)` for the selector's induced chain.
pub fn lambda_of(s: &Machine) -> Result<f64> {
    let selecting = s.selecting().ok_or(Error::MissingSelecting)?;
    let chain = induce_chain(s);
    if !chain.ergodic_analysis().irreducible {
        return Err(Error::ReducibleChain {
            ergodic_sets: chain.ergodic_analysis().ergodic_sets.len(),
        });
    }
    let pi = chain.stationary(StationaryMethod::LinearSolve)?;
    Ok(pi
        .iter()
        .zip(selecting)
        .filter(|(_, &sel)| sel)
        .map(|(p, _)| p)
        .sum())
}

/// The d-state cycle selector for the j-th arithmetic progression: state i
/// steps to (i+1) mod d on both bits and state j selects, so positions
/// j, j+d, j+2d, … are picked and λ = 1/d.
pub fn ap_selector(d: usize, j: usize) -> Result<Machine> {
    if d == 0 || j >= d {
        return Err(Error::Invalid(format!("need 0 ≤ j < d, got d={d}, j={j}")));
    }
    let names = (0..d).map(|i| format!("r{i}")).collect();
    let delta = (0..d).map(|i| [(i + 1) % d; 2]).collect();
    let machine = Machine::new(names, 0, delta, None, None)?;
    Ok(machine.with_selecting(&[j]))
}

/// Product bettor that plays `g1` on the bits the selector picks and `g2` on
/// the rest. The state is the triple (selector, g1, g2); on every bit the
/// selector steps and exactly the account that bet steps. Its log capital
/// decomposes exactly into g1's on the selected subsequence plus g2's on the
/// complement.
pub fn combine_selector_martingale(s: &Machine, g1: &Machine, g2: &Machine) -> Result<Machine> {
    let selecting = s.selecting().ok_or(Error::MissingSelecting)?;
    let bets1 = g1.betting().ok_or(Error::MissingBetting)?;
    let bets2 = g2.betting().ok_or(Error::MissingBetting)?;
    let (ns, n1, n2) = (s.state_count(), g1.state_count(), g2.state_count());

    let index = |qs: usize, q1: usize, q2: usize| (qs * n1 + q1) * n2 + q2;
    let mut names = Vec::with_capacity(ns * n1 * n2);
    let mut delta = Vec::with_capacity(ns * n1 * n2);
    let mut bets = Vec::with_capacity(ns * n1 * n2);
    #[allow(clippy::needless_range_loop)] // q-indices feed both machines and the index map
    for qs in 0..ns {
        for q1 in 0..n1 {
            for q2 in 0..n2 {
                names.push(format!("{}|{}|{}", s.name(qs), g1.name(q1), g2.name(q2)));
                let step = |bit: u8| {
                    if selecting[qs] {
                        index(s.step(qs, bit), g1.step(q1, bit), q2)
                    } else {
                        index(s.step(qs, bit), q1, g2.step(q2, bit))
                    }
                };
                delta.push([step(0), step(1)]);
                bets.push(if selecting[qs] { bets1[q1] } else { bets2[q2] });
            }
        }
    }
    Machine::new(
        names,
        index(s.start(), g1.start(), g2.start()),
        delta,
        None,
        Some(bets),
    )
}

/// How a report's left-hand side compares to the input dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Verdict {
    /// lhs ≥ dim − ε for the configured tolerance ε (but below the tight band).
    HoldsWithin { epsilon: f64 },
    /// lhs < dim − tight_tol (and below any configured ε).
    FailsBy { gap: f64 },
    /// |lhs − dim| ≤ tight_tol.
    Tight,
    /// lhs > dim + tight_tol.
    Strict,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::HoldsWithin { epsilon } => write!(f, "holds_within({epsilon})"),
            Verdict::FailsBy { gap } => write!(f, "fails_by({gap:.4})"),
            Verdict::Tight => write!(f, "tight"),
            Verdict::Strict => write!(f, "strict"),
        }
    }
}

/// Thresholds for the verdict; `tight_tol` defaults to 0.05.
#[derive(Clone, Copy, Debug)]
pub struct VerdictConfig {
    pub tight_tol: f64,
    /// When set, a shortfall within ε still counts as the inequality holding.
    pub epsilon: Option<f64>,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        VerdictConfig {
            tight_tol: 0.05,
            epsilon: None,
        }
    }
}

/// Evaluation of the λ-weighted selection inequality on a prefix.
#[derive(Clone, Debug, Serialize)]
pub struct AgafonovReport {
    pub lambda: f64,
    pub dim_selected: f64,
    pub strong_dim_complement: f64,
    pub dim_input: f64,
    /// `λ·dim_selected + (1−λ)·strong_dim_complement`.
    pub lhs: f64,
    pub verdict: Verdict,
    pub n: u64,
    pub selected_len: u64,
    pub complement_len: u64,
    /// `|positions| / n`; approaches λ only under empirical convergence.
    pub empirical_selection_rate: f64,
    pub input_report: DimensionReport,
    pub selected_report: Option<DimensionReport>,
    pub complement_report: Option<DimensionReport>,
}

/// Lower bound on the selected subsequence's dimension, from dividing the
/// selection inequality by λ, next to the measured value. The state gap is
/// the convergence diagnostic the bound's hypothesis asks about.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionLowerBound {
    pub lambda: f64,
    pub dim_input: f64,
    /// `(dim_input − (1 − λ)) / λ`.
    pub bound: f64,
    pub measured: f64,
    pub state_gap: f64,
}

fn degenerate_check(s: &Machine) -> Result<()> {
    let selecting = s.selecting().ok_or(Error::MissingSelecting)?;
    let chain = induce_chain(s);
    let analysis = chain.ergodic_analysis();
    if !analysis.irreducible {
        return Err(Error::ReducibleChain {
            ergodic_sets: analysis.ergodic_sets.len(),
        });
    }
    let ergodic = analysis.unique_ergodic_set().expect("irreducible chain");
    let in_set = ergodic.iter().filter(|&&q| selecting[q]).count();
    if in_set == 0 {
        return Err(Error::DegenerateSelector { which: "no" });
    }
    if in_set == ergodic.len() {
        return Err(Error::DegenerateSelector { which: "all" });
    }
    Ok(())
}

/// Dimension estimate of a (possibly short or empty) subsequence on its own
/// length. An empty subsequence reports 0 with no witness report.
fn subsequence_dimension(
    bits: &Bits,
    family: &ChainFamily,
    opts: &EstimatorOptions,
) -> Result<(f64, f64, Option<DimensionReport>)> {
    if bits.is_empty() {
        return Ok((0.0, 0.0, None));
    }
    let report = family_dimension(bits, bits.len() as u64, family, opts)?;
    Ok((report.dim_est, report.strong_dim_est, Some(report)))
}

/// Evaluate `λ·dim(S(x)) + (1−λ)·Dim(Sᶜ(x))` against `dim(x)` on the first
/// `n` bits. The subsequence dimensions are estimated on their own lengths;
/// both lengths are reported since short subsequences widen estimator error.
pub fn agafonov_report(
    s: &Machine,
    x: &Bits,
    n: u64,
    family: &ChainFamily,
    opts: &EstimatorOptions,
    cfg: &VerdictConfig,
) -> Result<AgafonovReport> {
    degenerate_check(s)?;
    if n > x.len() as u64 {
        return Err(Error::CheckpointBeyondInput {
            checkpoint: n,
            len: x.len() as u64,
        });
    }
    let prefix = x.prefix(n as usize);
    let lambda = lambda_of(s)?;
    let split = apply_selector(s, &prefix)?;

    let input_report = family_dimension(&prefix, n, family, opts)?;
    let dim_input = input_report.dim_est;
    let (dim_selected, _, selected_report) = subsequence_dimension(&split.selected, family, opts)?;
    let (_, strong_dim_complement, complement_report) =
        subsequence_dimension(&split.complement, family, opts)?;

    let lhs = lambda * dim_selected + (1.0 - lambda) * strong_dim_complement;
    let gap = lhs - dim_input;
    let verdict = if gap.abs() <= cfg.tight_tol {
        Verdict::Tight
    } else if gap > 0.0 {
        Verdict::Strict
    } else if cfg.epsilon.is_some_and(|eps| gap >= -eps) {
        Verdict::HoldsWithin {
            epsilon: cfg.epsilon.expect("checked"),
        }
    } else {
        Verdict::FailsBy { gap: -gap }
    };

    Ok(AgafonovReport {
        lambda,
        dim_selected,
        strong_dim_complement,
        dim_input,
        lhs,
        verdict,
        n,
        selected_len: split.selected.len() as u64,
        complement_len: split.complement.len() as u64,
        empirical_selection_rate: split.positions.len() as f64 / n as f64,
        input_report,
        selected_report,
        complement_report,
    })
}

/// `dim(S(x)) ≥ (dim(x) − (1−λ)) / λ` under empirical convergence; returns
/// the bound, the measured estimate, and the state-gap diagnostic.
pub fn selection_lower_bound(
    s: &Machine,
    x: &Bits,
    n: u64,
    family: &ChainFamily,
    opts: &EstimatorOptions,
) -> Result<SelectionLowerBound> {
    degenerate_check(s).or_else(|e| match e {
        // a selector picking everything still has a well-defined bound
        Error::DegenerateSelector { which: "all" } => Ok(()),
        other => Err(other),
    })?;
    if n > x.len() as u64 {
        return Err(Error::CheckpointBeyondInput {
            checkpoint: n,
            len: x.len() as u64,
        });
    }
    let prefix = x.prefix(n as usize);
    let lambda = lambda_of(s)?;
    let split = apply_selector(s, &prefix)?;
    let chain = induce_chain(s);
    let trace = run_trace(&chain, &prefix, &[n])?;
    let gap = state_gap(&chain, &trace)?;
    let dim_input = family_dimension(&prefix, n, family, opts)?.dim_est;
    let (measured, _, _) = subsequence_dimension(&split.selected, family, opts)?;
    Ok(SelectionLowerBound {
        lambda,
        dim_input,
        bound: (dim_input - (1.0 - lambda)) / lambda,
        measured,
        state_gap: gap,
    })
}
