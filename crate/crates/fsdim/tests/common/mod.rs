//! Shared fixtures for the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use fsdim::machine::{parse_spec, Machine};
use fsdim::sequence::{generate, Bits, SourceKind};
use rand::Rng;

pub const FIG1_SPEC: &str = "\
states: a b c d
start: a
trans: a 0 b
trans: a 1 b
trans: b 0 a
trans: b 1 c
trans: c 0 d
trans: c 1 d
trans: d 0 a
trans: d 1 c
";

pub fn fig1() -> Machine {
    parse_spec(FIG1_SPEC).unwrap()
}

pub fn fig1_selecting(names: &[&str]) -> Machine {
    let m = fig1();
    let ids: Vec<_> = names.iter().map(|n| m.state_index(n).unwrap()).collect();
    m.with_selecting(&ids)
}

pub fn champernowne(n: usize) -> Bits {
    generate(&SourceKind::Champernowne, n).unwrap()
}

pub fn diluted_champernowne(n: usize) -> Bits {
    generate(&SourceKind::Diluted(Box::new(SourceKind::Champernowne)), n).unwrap()
}

pub fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Bits {
    (0..n).map(|_| rng.gen_range(0..2u8)).collect()
}

/// Random total automaton; bets (when present) stay inside [low, high].
pub fn random_machine<R: Rng>(
    rng: &mut R,
    states: usize,
    bets: Option<(f64, f64)>,
    selecting: bool,
) -> Machine {
    let names = (0..states).map(|i| format!("s{i}")).collect();
    let delta = (0..states)
        .map(|_| [rng.gen_range(0..states), rng.gen_range(0..states)])
        .collect();
    let betting = bets.map(|(low, high)| (0..states).map(|_| rng.gen_range(low..=high)).collect());
    let select = selecting.then(|| (0..states).map(|_| rng.gen_bool(0.5)).collect());
    Machine::new(names, rng.gen_range(0..states), delta, select, betting).unwrap()
}

/// Random machine whose chain has no transient states: bit 0 walks a full
/// cycle through every state, bit 1 is arbitrary.
pub fn random_cyclic_machine<R: Rng>(rng: &mut R, states: usize) -> Machine {
    let names = (0..states).map(|i| format!("s{i}")).collect();
    let delta = (0..states)
        .map(|q| [(q + 1) % states, rng.gen_range(0..states)])
        .collect();
    Machine::new(names, 0, delta, None, None).unwrap()
}

/// Random joint distribution over a chain's (state, edge) cells.
pub fn random_joint<R: Rng>(rng: &mut R, states: usize) -> fsdim::empirical::JointDistribution {
    let mut mass: Vec<[f64; 2]> = (0..states)
        .map(|_| {
            [
                if rng.gen_bool(0.9) {
                    rng.gen::<f64>()
                } else {
                    0.0
                },
                if rng.gen_bool(0.9) {
                    rng.gen::<f64>()
                } else {
                    0.0
                },
            ]
        })
        .collect();
    let total: f64 = mass.iter().flatten().sum();
    if total == 0.0 {
        mass[0][0] = 1.0;
    } else {
        for cell in mass.iter_mut().flatten() {
            *cell /= total;
        }
    }
    fsdim::empirical::JointDistribution::new(mass)
}
