//! Deterministic binary automata, selectors, and finite-state martingales.
//!
//! A [`Machine`] is a total transition map over a finite state set, optionally
//! decorated with a selecting-state subset (making it a selector) and/or a
//! betting function `β : Q → [0,1]` (making it a martingale; `β(q)` is the
//! fraction of capital bet on the next bit being 0). The module also computes
//! communication classes and ergodic sets, and builds the irreducible
//! completion of a machine: a fresh transient path that reads a given prefix
//! and then hands over to the restriction of the machine to the ergodic set
//! it has reached, preserving bets and selections along the way.

use std::collections::HashMap;
use std::fmt;

use crate::sequence::Bits;
use crate::{Error, Result};

pub type StateId = usize;

/// Anything that can be stepped as a deterministic binary automaton.
pub trait Automaton {
    fn state_count(&self) -> usize;
    fn start(&self) -> StateId;
    fn step(&self, q: StateId, bit: u8) -> StateId;
}

/// A deterministic binary automaton with optional selector / martingale
/// decorations. Immutable after construction; analyses are pure functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Machine {
    names: Vec<String>,
    start: StateId,
    delta: Vec<[StateId; 2]>,
    selecting: Option<Vec<bool>>,
    betting: Option<Vec<f64>>,
}

impl Machine {
    /// Build a machine from parts. `delta[q][b]` is the successor of state
    /// `q` on bit `b`; all entries must be valid state indices.
    pub fn new(
        names: Vec<String>,
        start: StateId,
        delta: Vec<[StateId; 2]>,
        selecting: Option<Vec<bool>>,
        betting: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::Invalid("machine needs at least one state".into()));
        }
        if delta.len() != n || start >= n {
            return Err(Error::Invalid(
                "machine parts disagree on the state count".into(),
            ));
        }
        for (q, row) in delta.iter().enumerate() {
            for &target in row {
                if target >= n {
                    return Err(Error::Invalid(format!(
                        "state {q} has a transition to out-of-range state {target}"
                    )));
                }
            }
        }
        if let Some(sel) = &selecting {
            if sel.len() != n {
                return Err(Error::Invalid("selecting set length mismatch".into()));
            }
        }
        if let Some(bets) = &betting {
            if bets.len() != n {
                return Err(Error::Invalid("betting length mismatch".into()));
            }
            for (q, &b) in bets.iter().enumerate() {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::Invalid(format!(
                        "bet {b} of state {q} outside [0,1]"
                    )));
                }
            }
        }
        Ok(Machine {
            names,
            start,
            delta,
            selecting,
            betting,
        })
    }

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

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn step(&self, q: StateId, bit: u8) -> StateId {
        self.delta[q][bit as usize]
    }

    pub fn delta(&self) -> &[[StateId; 2]] {
        &self.delta
    }

    pub fn is_selecting(&self, q: StateId) -> bool {
        self.selecting.as_ref().is_some_and(|s| s[q])
    }

    pub fn selecting(&self) -> Option<&[bool]> {
        self.selecting.as_deref()
    }

    pub fn selecting_states(&self) -> Option<Vec<StateId>> {
        self.selecting
            .as_ref()
            .map(|s| (0..self.state_count()).filter(|&q| s[q]).collect())
    }

    pub fn betting(&self) -> Option<&[f64]> {
        self.betting.as_deref()
    }

    pub fn bet(&self, q: StateId) -> Option<f64> {
        self.betting.as_ref().map(|b| b[q])
    }

    /// Replace the selecting set (used by the CLI `--select` override).
    pub fn with_selecting(mut self, states: &[StateId]) -> Self {
        let mut sel = vec![false; self.state_count()];
        for &q in states {
            sel[q] = true;
        }
        self.selecting = Some(sel);
        self
    }

    pub fn with_betting(mut self, bets: Vec<f64>) -> Result<Self> {
        if bets.len() != self.state_count() {
            return Err(Error::Invalid("betting length mismatch".into()));
        }
        self.betting = Some(bets);
        Ok(self)
    }

    /// State reached after reading `w` from the start state.
    pub fn run(&self, w: &Bits) -> StateId {
        let mut q = self.start;
        for bit in w.iter() {
            q = self.step(q, bit);
        }
        q
    }

    /// States visited while reading `w`: `path[i]` is the state before bit
    /// `i`, so the path has `|w| + 1` entries.
    pub fn run_path(&self, w: &Bits) -> Vec<StateId> {
        let mut path = Vec::with_capacity(w.len() + 1);
        let mut q = self.start;
        path.push(q);
        for bit in w.iter() {
            q = self.step(q, bit);
            path.push(q);
        }
        path
    }
}

impl Automaton for Machine {
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

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "states: {}", self.names.join(" "))?;
        writeln!(f, "start: {}", self.names[self.start])?;
        for (q, row) in self.delta.iter().enumerate() {
            for (bit, &target) in row.iter().enumerate() {
                writeln!(f, "trans: {} {} {}", self.names[q], bit, self.names[target])?;
            }
        }
        if let Some(states) = self.selecting_states() {
            let names: Vec<_> = states.iter().map(|&q| self.names[q].as_str()).collect();
            writeln!(f, "select: {}", names.join(" "))?;
        }
        if let Some(bets) = &self.betting {
            for (q, bet) in bets.iter().enumerate() {
                writeln!(f, "bet: {} {}", self.names[q], bet)?;
            }
        }
        Ok(())
    }
}

/// Parse the line-oriented machine spec format:
///
/// ```text
/// # comment
/// states: a b c d
/// start: a
/// trans: a 0 b
/// select: a c          (optional)
/// bet: a 0.5           (optional; rationals like 1/3 are accepted)
/// ```
pub fn parse_spec(text: &str) -> Result<Machine> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, StateId> = HashMap::new();
    let mut start: Option<StateId> = None;
    let mut delta: Vec<[Option<(StateId, usize)>; 2]> = Vec::new();
    let mut selecting: Option<Vec<bool>> = None;
    let mut bets: Vec<Option<f64>> = Vec::new();
    let mut saw_bets = false;

    let err = |line: usize, message: String| Error::MachineSpec { line, message };
    let lookup = |index: &HashMap<String, StateId>, name: &str, line: usize| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| err(line, format!("unknown state name {name:?}")))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, rest) = content
            .split_once(':')
            .ok_or_else(|| err(line, format!("expected `key: …`, got {content:?}")))?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        match key.trim() {
            "states" => {
                if !names.is_empty() {
                    return Err(err(line, "duplicate states declaration".into()));
                }
                if fields.is_empty() {
                    return Err(err(line, "states declaration is empty".into()));
                }
                for name in fields {
                    if index.contains_key(name) {
                        return Err(err(line, format!("duplicate state {name:?}")));
                    }
                    index.insert(name.to_string(), names.len());
                    names.push(name.to_string());
                }
                delta = vec![[None, None]; names.len()];
                bets = vec![None; names.len()];
            }
            "start" => {
                let [name] = fields[..] else {
                    return Err(err(line, "start takes exactly one state".into()));
                };
                if start.is_some() {
                    return Err(err(line, "duplicate start declaration".into()));
                }
                start = Some(lookup(&index, name, line)?);
            }
            "trans" => {
                let [from, bit, to] = fields[..] else {
                    return Err(err(line, "trans takes `state bit state`".into()));
                };
                let from = lookup(&index, from, line)?;
                let to = lookup(&index, to, line)?;
                let bit = match bit {
                    "0" => 0usize,
                    "1" => 1,
                    other => return Err(err(line, format!("bit must be 0 or 1, got {other:?}"))),
                };
                if let Some((_, first)) = delta[from][bit] {
                    return Err(err(
                        line,
                        format!(
                            "duplicate transition for ({}, {bit}), first given on line {first}",
                            names[from]
                        ),
                    ));
                }
                delta[from][bit] = Some((to, line));
            }
            "select" => {
                let sel = selecting.get_or_insert_with(|| vec![false; names.len()]);
                for name in fields {
                    sel[lookup(&index, name, line)?] = true;
                }
            }
            "bet" => {
                let [name, value] = fields[..] else {
                    return Err(err(line, "bet takes `state value`".into()));
                };
                let q = lookup(&index, name, line)?;
                let bet = parse_bet(value)
                    .ok_or_else(|| err(line, format!("cannot parse bet value {value:?}")))?;
                if !(0.0..=1.0).contains(&bet) {
                    return Err(err(line, format!("bet {value} outside [0,1]")));
                }
                if bets[q].is_some() {
                    return Err(err(line, format!("duplicate bet for state {name:?}")));
                }
                bets[q] = Some(bet);
                saw_bets = true;
            }
            other => return Err(err(line, format!("unknown declaration {other:?}"))),
        }
    }

    if names.is_empty() {
        return Err(Error::MachineSpec {
            line: 0,
            message: "missing states declaration".into(),
        });
    }
    let start = start.ok_or(Error::MachineSpec {
        line: 0,
        message: "missing start declaration".into(),
    })?;
    let mut full_delta = Vec::with_capacity(names.len());
    for (q, row) in delta.iter().enumerate() {
        let mut full = [0usize; 2];
        for bit in 0..2 {
            match row[bit] {
                Some((target, _)) => full[bit] = target,
                None => {
                    return Err(Error::MissingTransition {
                        state: names[q].clone(),
                        bit: bit as u8,
                    })
                }
            }
        }
        full_delta.push(full);
    }
    let betting = if saw_bets {
        let mut all = Vec::with_capacity(names.len());
        for (q, bet) in bets.into_iter().enumerate() {
            all.push(bet.ok_or_else(|| Error::MissingBet {
                state: names[q].clone(),
            })?);
        }
        Some(all)
    } else {
        None
    };
    Machine::new(names, start, full_delta, selecting, betting)
}

fn parse_bet(value: &str) -> Option<f64> {
    if let Some((num, den)) = value.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        Some(num / den)
    } else {
        value.parse().ok()
    }
}

/// Communication-class decomposition of a machine's transition graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErgodicAnalysis {
    /// Communication classes, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<StateId>>,
    /// The closed classes (no transition leaves them), in the same order.
    pub ergodic_sets: Vec<Vec<StateId>>,
    /// True iff there is a unique ergodic set and every state reaches it
    /// (transient prefixes allowed).
    pub irreducible: bool,
}

impl ErgodicAnalysis {
    /// The unique ergodic set, when the machine is irreducible.
    pub fn unique_ergodic_set(&self) -> Option<&[StateId]> {
        if self.ergodic_sets.len() == 1 {
            Some(&self.ergodic_sets[0])
        } else {
            None
        }
    }
}

pub fn ergodic_analysis(m: &Machine) -> ErgodicAnalysis {
    analyze_delta(m.delta())
}

pub(crate) fn analyze_delta(delta: &[[StateId; 2]]) -> ErgodicAnalysis {
    let adjacency: Vec<Vec<usize>> = delta.iter().map(|row| row.to_vec()).collect();
    analyze_adjacency(&adjacency)
}

/// Communication classes and ergodic sets of an arbitrary directed graph.
pub(crate) fn analyze_adjacency(adjacency: &[Vec<usize>]) -> ErgodicAnalysis {
    let n = adjacency.len();
    let comp_of = scc(adjacency);
    let comp_count = comp_of.iter().copied().max().map_or(0, |m| m + 1);

    let mut classes: Vec<Vec<StateId>> = vec![Vec::new(); comp_count];
    for q in 0..n {
        classes[comp_of[q]].push(q);
    }
    for class in &mut classes {
        class.sort_unstable();
    }
    classes.sort_by_key(|class| class[0]);

    let ergodic_sets: Vec<Vec<StateId>> = classes
        .iter()
        .filter(|class| {
            class.iter().all(|&q| {
                adjacency[q]
                    .iter()
                    .all(|&t| comp_of[t] == comp_of[class[0]])
            })
        })
        .cloned()
        .collect();

    // With a total transition map every state reaches some closed class, so a
    // unique ergodic set is reachable from everywhere; assert it anyway.
    let irreducible = ergodic_sets.len() == 1 && {
        let target = &ergodic_sets[0];
        let mut reaches = vec![false; n];
        for &q in target {
            reaches[q] = true;
        }
        let mut changed = true;
        while changed {
            changed = false;
            for q in 0..n {
                if !reaches[q] && adjacency[q].iter().any(|&t| reaches[t]) {
                    reaches[q] = true;
                    changed = true;
                }
            }
        }
        reaches.iter().all(|&r| r)
    };

    ErgodicAnalysis {
        classes,
        ergodic_sets,
        irreducible,
    }
}

/// Iterative Tarjan, so depth-`2^k` block chains do not overflow the stack.
/// Returns the component index of every node.
fn scc(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp_of = vec![usize::MAX; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comp_count = 0usize;

    // Explicit DFS frames: (node, next edge to explore).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(frame) = frames.last_mut() {
            let v = frame.0;
            if frame.1 < adjacency[v].len() {
                let w = adjacency[v][frame.1];
                frame.1 += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp_of[w] = comp_count;
                        if w == v {
                            break;
                        }
                    }
                    comp_count += 1;
                }
            }
        }
    }
    comp_of
}

/// Shortest bit-string that drives the machine from its start state into one
/// of its ergodic sets (the empty string when the start state is already
/// ergodic). BFS over states, so the prefix has length < |Q|.
pub fn absorption_prefix(m: &Machine) -> Bits {
    let analysis = ergodic_analysis(m);
    let mut ergodic = vec![false; m.state_count()];
    for set in &analysis.ergodic_sets {
        for &q in set {
            ergodic[q] = true;
        }
    }
    if ergodic[m.start()] {
        return Bits::new();
    }
    let mut parent: Vec<Option<(StateId, u8)>> = vec![None; m.state_count()];
    let mut seen = vec![false; m.state_count()];
    let mut queue = std::collections::VecDeque::new();
    seen[m.start()] = true;
    queue.push_back(m.start());
    while let Some(q) = queue.pop_front() {
        for bit in 0..2u8 {
            let t = m.step(q, bit);
            if !seen[t] {
                seen[t] = true;
                parent[t] = Some((q, bit));
                if ergodic[t] {
                    let mut bits_rev = Vec::new();
                    let mut cur = t;
                    while let Some((p, b)) = parent[cur] {
                        bits_rev.push(b);
                        cur = p;
                    }
                    return bits_rev.into_iter().rev().collect();
                }
                queue.push_back(t);
            }
        }
    }
    unreachable!("every state of a total automaton reaches an ergodic set")
}

/// Irreducible completion: a machine that reads `w` along a fresh transient
/// path (reproducing the original bets and selections on it) and then runs
/// the restriction of `m` to the ergodic set reached after `w`.
///
/// Off-prefix transitions of the path states route to the same next path
/// state; behavior off sequences extending `w` is deliberately unspecified.
/// The result has `|E| + |w| + 1` states: the fresh start, one state per
/// symbol of `w` (the last acting as a copy of the entry state), and `E`.
pub fn irreducible_completion(m: &Machine, w: &Bits) -> Result<Machine> {
    let analysis = ergodic_analysis(m);
    let path = m.run_path(w);
    let entry = *path.last().expect("run path is never empty");
    let ergodic_set = analysis
        .ergodic_sets
        .iter()
        .find(|set| set.binary_search(&entry).is_ok())
        .ok_or_else(|| Error::NotInErgodicSet {
            state: m.name(entry).to_string(),
        })?;

    let path_len = w.len() + 1;
    let mut names: Vec<String> = Vec::with_capacity(path_len + ergodic_set.len());
    let taken: std::collections::HashSet<&str> =
        ergodic_set.iter().map(|&q| m.name(q)).collect();
    for i in 0..path_len {
        let mut candidate = format!("·{i}");
        while taken.contains(candidate.as_str()) {
            candidate.insert(0, '·');
        }
        names.push(candidate);
    }
    let mut core_index = HashMap::new();
    for &q in ergodic_set {
        core_index.insert(q, names.len());
        names.push(m.name(q).to_string());
    }

    let mut delta = Vec::with_capacity(names.len());
    let mut selecting = m.selecting().map(|_| Vec::with_capacity(names.len()));
    let mut betting = m.betting().map(|_| Vec::with_capacity(names.len()));
    for (i, &orig) in path.iter().enumerate() {
        if i < w.len() {
            // both bits advance the path; only the on-prefix bit is meaningful
            delta.push([i + 1, i + 1]);
        } else {
            // last path state acts as a copy of the entry state
            delta.push([core_index[&m.step(orig, 0)], core_index[&m.step(orig, 1)]]);
        }
        if let Some(sel) = &mut selecting {
            sel.push(m.is_selecting(orig));
        }
        if let Some(bets) = &mut betting {
            bets.push(m.bet(orig).expect("betting present"));
        }
    }
    for &q in ergodic_set {
        delta.push([core_index[&m.step(q, 0)], core_index[&m.step(q, 1)]]);
        if let Some(sel) = &mut selecting {
            sel.push(m.is_selecting(q));
        }
        if let Some(bets) = &mut betting {
            bets.push(m.bet(q).expect("betting present"));
        }
    }

    Machine::new(names, 0, delta, selecting, betting)
}
