//! Interaction weight slices: the coefficients that turn a value tensor
//! into interaction components by plain contraction over routing words.
//!
//! For an interaction set `S` of the target order `k`, the word coefficient
//! collapses to a single closed-form term, because a keep-set `U` splits
//! uniquely into `U \ S` (the context part) and `U ∩ S` (the
//! inclusion-exclusion part). Lower-order sets (`|S| < k`) get the discrete
//! derivative at the empty context, encoded as a slice supported only on
//! words that impute everything outside `S`. One contraction therefore
//! produces all orders at once.
//!
//! The same coefficients arise from a finite-state automaton scanning the
//! word left to right: its state is the count of kept features outside `S`
//! plus the membership pattern of kept features inside `S`. Unrolling the
//! automaton layer by layer yields an exact tensor-train whose interior
//! cores are 0/1 transition indicators and whose terminal core folds in the
//! scalar weights; bond ranks are bounded by `(n - |S| + 1) * 2^{|S|}`,
//! polynomial in `n` for fixed order.

use std::collections::HashMap;

use ndarray::Array3;

use crate::game::binomial;
use crate::tt::TensorTrain;
use crate::value::word_modes;
use crate::{Error, Result};

/// Dense slices refuse feature counts past this (`2^n` table entries).
pub const DENSE_SLICE_CAP: usize = 24;

fn check_slice_args(n: usize, k: usize, s: u32) -> Result<()> {
    if n == 0 || n > 31 {
        return Err(Error::invalid(format!("feature count {n} out of range")));
    }
    if (s as u64) >= (1u64 << n) {
        return Err(Error::invalid(format!(
            "interaction set {s:#b} not within {n} features"
        )));
    }
    let s_size = s.count_ones() as usize;
    if s_size == 0 {
        return Err(Error::invalid("interaction set must be nonempty"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("order {k} out of range for {n} features")));
    }
    if s_size > k {
        return Err(Error::invalid(format!(
            "interaction set of size {s_size} exceeds order {k}"
        )));
    }
    Ok(())
}

/// Closed-form word coefficient for a set of exactly the target order.
///
/// The keep-set decomposition `U = (U \ S) ∪ (U ∩ S)` is unique, so the
/// defining double sum collapses to
/// `(k/n) * (-1)^{|S| - |U ∩ S|} / C(n-1, |U \ S|)`.
pub fn alpha_dense(n: usize, k: usize, s: u32, keep_mask: u32) -> Result<f64> {
    check_slice_args(n, k, s)?;
    let s_size = s.count_ones() as usize;
    if s_size != k {
        return Err(Error::invalid(format!(
            "closed-form coefficient needs |S| = k, got |S| = {s_size}, k = {k}"
        )));
    }
    if (keep_mask as u64) >= (1u64 << n) {
        return Err(Error::invalid(format!(
            "word mask {keep_mask:#b} not within {n} features"
        )));
    }
    let w = (keep_mask & s).count_ones() as usize;
    let t = (keep_mask & !s).count_ones() as usize;
    let sign = if (s_size - w).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(k as f64 / n as f64 * sign / binomial(n - 1, t))
}

#[derive(Debug, Clone)]
enum SliceBacking {
    /// Coefficient per keep mask, all `2^n` words.
    Dense(Vec<f64>),
    /// Train over `n` binary routing modes (mode `0 = keep`).
    Tt(TensorTrain),
}

/// The weight row for one interaction set: a coefficient per routing word.
///
/// Immutable; construction for different sets is independent and safe to
/// run in parallel.
#[derive(Debug, Clone)]
pub struct WeightSlice {
    n: usize,
    k: usize,
    s: u32,
    backing: SliceBacking,
}

impl WeightSlice {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn subset(&self) -> u32 {
        self.s
    }

    pub fn is_tt(&self) -> bool {
        matches!(self.backing, SliceBacking::Tt(_))
    }

    pub fn as_tt(&self) -> Option<&TensorTrain> {
        match &self.backing {
            SliceBacking::Tt(tt) => Some(tt),
            SliceBacking::Dense(_) => None,
        }
    }

    /// Bond ranks (unit boundaries included); all ones for a dense slice.
    pub fn ranks(&self) -> Vec<usize> {
        match &self.backing {
            SliceBacking::Tt(tt) => tt.ranks(),
            SliceBacking::Dense(_) => vec![1; self.n + 1],
        }
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Coefficient of the routing word with the given keep set.
    pub fn entry(&self, keep_mask: u32) -> Result<f64> {
        if (keep_mask as u64) >= (1u64 << self.n) {
            return Err(Error::bounds(format!(
                "word mask {keep_mask:#b} out of range for {} features",
                self.n
            )));
        }
        match &self.backing {
            SliceBacking::Dense(table) => Ok(table[keep_mask as usize]),
            SliceBacking::Tt(tt) => tt.entry(&word_modes(keep_mask, self.n)),
        }
    }

    /// All coefficients as a table indexed by keep mask.
    pub fn to_table(&self) -> Result<Vec<f64>> {
        if self.n > DENSE_SLICE_CAP {
            return Err(Error::capacity(format!(
                "slice table over 2^{} words refused",
                self.n
            )));
        }
        match &self.backing {
            SliceBacking::Dense(table) => Ok(table.clone()),
            SliceBacking::Tt(tt) => {
                // One chain expansion, then reindex words to keep masks
                // (mode 0 = keep lives at bit value 1 of the mask).
                let dense = tt.to_dense()?;
                let n = self.n;
                let mut table = vec![0.0; 1usize << n];
                for (flat, &v) in dense.entries().iter().enumerate() {
                    let mut mask = 0u32;
                    for i in 0..n {
                        let mode = flat >> (n - 1 - i) & 1;
                        if mode == 0 {
                            mask |= 1 << i;
                        }
                    }
                    table[mask as usize] = v;
                }
                Ok(table)
            }
        }
    }
}

/// Dense weight slice by definition.
pub fn mwct_dense(n: usize, k: usize, s: u32) -> Result<WeightSlice> {
    check_slice_args(n, k, s)?;
    if n > DENSE_SLICE_CAP {
        return Err(Error::capacity(format!(
            "dense slice over 2^{n} words refused (cap {DENSE_SLICE_CAP})"
        )));
    }
    let s_size = s.count_ones() as usize;
    let table: Vec<f64> = (0..(1u32 << n))
        .map(|u| {
            if s_size == k {
                alpha_dense(n, k, s, u).expect("arguments validated above")
            } else if u & !s != 0 {
                // Lower order: support only where everything outside S is imputed.
                0.0
            } else {
                let w = u.count_ones() as usize;
                if (s_size - w).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
        })
        .collect();
    Ok(WeightSlice {
        n,
        k,
        s,
        backing: SliceBacking::Dense(table),
    })
}

/// Automaton state while scanning a routing word left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct State {
    /// Count of kept features outside the interaction set.
    kept_outside: u8,
    /// Kept members of the interaction set, bits in ascending position order.
    members_kept: u8,
}

struct SliceAutomaton {
    n: usize,
    k: usize,
    s: u32,
    s_size: usize,
    /// member_index[i] = rank of feature i within S, for i in S.
    member_index: Vec<u8>,
}

impl SliceAutomaton {
    fn new(n: usize, k: usize, s: u32) -> Self {
        let mut member_index = vec![0u8; n];
        let mut next = 0u8;
        for (i, slot) in member_index.iter_mut().enumerate() {
            if s >> i & 1 == 1 {
                *slot = next;
                next += 1;
            }
        }
        SliceAutomaton {
            n,
            k,
            s,
            s_size: s.count_ones() as usize,
            member_index,
        }
    }

    /// Successor state for feature `i` under route `0 = keep`, `1 = impute`;
    /// `None` marks words with coefficient zero.
    fn step(&self, state: State, i: usize, route: usize) -> Option<State> {
        if route == 1 {
            return Some(state);
        }
        if self.s >> i & 1 == 1 {
            Some(State {
                kept_outside: state.kept_outside,
                members_kept: state.members_kept | (1 << self.member_index[i]),
            })
        } else if self.s_size == self.k {
            Some(State {
                kept_outside: state.kept_outside + 1,
                members_kept: state.members_kept,
            })
        } else {
            // Lower-order slices vanish once anything outside S is kept.
            None
        }
    }

    /// Scalar weight folded into the terminal core.
    fn terminal_weight(&self, state: State) -> f64 {
        let kept_members = state.members_kept.count_ones() as usize;
        let sign = if (self.s_size - kept_members).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        if self.s_size == self.k {
            self.k as f64 / self.n as f64 * sign
                / binomial(self.n - 1, state.kept_outside as usize)
        } else {
            sign
        }
    }
}

/// TT weight slice, built by unrolling the slice automaton.
///
/// Interior cores are 0/1 transition indicators over the reachable state
/// layers; all scalar weight mass sits in the terminal core. Bond ranks
/// never exceed `(n - |S| + 1) * 2^{|S|}`.
pub fn mwct_tt(n: usize, k: usize, s: u32) -> Result<WeightSlice> {
    check_slice_args(n, k, s)?;
    let automaton = SliceAutomaton::new(n, k, s);
    let start = State {
        kept_outside: 0,
        members_kept: 0,
    };

    // Reachable state layers per bond; layer 0 is the single start state.
    let mut layers: Vec<Vec<State>> = vec![vec![start]];
    for i in 0..n - 1 {
        let mut next: Vec<State> = Vec::new();
        for &st in &layers[i] {
            for route in 0..2 {
                if let Some(successor) = automaton.step(st, i, route) {
                    next.push(successor);
                }
            }
        }
        next.sort();
        next.dedup();
        layers.push(next);
    }

    let mut cores = Vec::with_capacity(n);
    for i in 0..n {
        let from = &layers[i];
        if i + 1 < n {
            let to = &layers[i + 1];
            let index: HashMap<State, usize> =
                to.iter().enumerate().map(|(j, &st)| (st, j)).collect();
            let mut core = Array3::zeros((from.len(), 2, to.len()));
            for (a, &st) in from.iter().enumerate() {
                for route in 0..2 {
                    if let Some(next) = automaton.step(st, i, route) {
                        core[[a, route, index[&next]]] = 1.0;
                    }
                }
            }
            cores.push(core);
        } else {
            let mut core = Array3::zeros((from.len(), 2, 1));
            for (a, &st) in from.iter().enumerate() {
                for route in 0..2 {
                    if let Some(next) = automaton.step(st, i, route) {
                        core[[a, route, 0]] = automaton.terminal_weight(next);
                    }
                }
            }
            cores.push(core);
        }
    }
    Ok(WeightSlice {
        n,
        k,
        s,
        backing: SliceBacking::Tt(TensorTrain::new(cores)?),
    })
}

/// Bound on the automaton bond ranks for a slice of size `|S|`.
pub fn slice_rank_bound(n: usize, s_size: usize) -> usize {
    (n - s_size + 1) * (1usize << s_size)
}

/// The joint first-order weight family: one train of cores whose left
/// boundary index selects the feature being attributed.
///
/// Core shapes are `(n, 2, r_1)`, `(r_i, 2, r_{i+1})`, `(r_{n-1}, 2, 1)`
/// with every `r_i <= n^2`. Fixing the boundary index `i` gives a slice
/// whose expansion carries the signed first-order kernel weights: positive
/// sign when feature `i` is kept, negative when imputed, magnitude equal to
/// the Shapley kernel at the number of other kept features.
#[derive(Debug, Clone)]
pub struct MstWeightCores {
    n: usize,
    cores: Vec<Array3<f64>>,
}

/// Scanner state for the joint first-order family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum MstState {
    /// The attributed feature sits at a later position; counts kept so far.
    Ahead { position: u8, kept: u8 },
    /// The attributed feature was passed with the given route sign.
    Passed { positive: bool, kept: u8 },
}

fn mst_step(state: MstState, i: usize, route: usize) -> MstState {
    let keep = route == 0;
    match state {
        MstState::Ahead { position, kept } if position as usize == i => MstState::Passed {
            positive: keep,
            kept,
        },
        MstState::Ahead { position, kept } => MstState::Ahead {
            position,
            kept: kept + keep as u8,
        },
        MstState::Passed { positive, kept } => MstState::Passed {
            positive,
            kept: kept + keep as u8,
        },
    }
}

/// Builds the joint first-order core family for `n >= 2` features.
pub fn mst_weight_cores(n: usize) -> Result<MstWeightCores> {
    if !(2..=31).contains(&n) {
        return Err(Error::invalid(format!(
            "first-order core family needs 2..=31 features, got {n}"
        )));
    }
    // Layer 0 is indexed by the attributed feature itself.
    let mut layers: Vec<Vec<MstState>> = vec![(0..n)
        .map(|i| MstState::Ahead {
            position: i as u8,
            kept: 0,
        })
        .collect()];
    for i in 0..n - 1 {
        let mut next: Vec<MstState> = layers[i]
            .iter()
            .flat_map(|&st| [mst_step(st, i, 0), mst_step(st, i, 1)])
            .collect();
        next.sort();
        next.dedup();
        layers.push(next);
    }

    let mut cores = Vec::with_capacity(n);
    for i in 0..n {
        let from = &layers[i];
        if i + 1 < n {
            let to = &layers[i + 1];
            let index: HashMap<MstState, usize> =
                to.iter().enumerate().map(|(j, &st)| (st, j)).collect();
            let mut core = Array3::zeros((from.len(), 2, to.len()));
            for (a, &st) in from.iter().enumerate() {
                for route in 0..2 {
                    core[[a, route, index[&mst_step(st, i, route)]]] = 1.0;
                }
            }
            cores.push(core);
        } else {
            let mut core = Array3::zeros((from.len(), 2, 1));
            for (a, &st) in from.iter().enumerate() {
                for route in 0..2 {
                    if let MstState::Passed { positive, kept } = mst_step(st, i, route) {
                        let sign = if positive { 1.0 } else { -1.0 };
                        core[[a, route, 0]] =
                            sign / (n as f64 * binomial(n - 1, kept as usize));
                    }
                }
            }
            cores.push(core);
        }
    }
    Ok(MstWeightCores { n, cores })
}

impl MstWeightCores {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    /// Bond dimensions including the feature-indexed left boundary.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.cores[0].dim().0];
        r.extend(self.cores.iter().map(|c| c.dim().2));
        r
    }

    /// The slice for one attributed feature as a standalone train.
    pub fn feature_slice(&self, i: usize) -> Result<TensorTrain> {
        if i >= self.n {
            return Err(Error::bounds(format!(
                "feature {i} out of range for {} features",
                self.n
            )));
        }
        let first = &self.cores[0];
        let (_, modes, r1) = first.dim();
        let mut head = Array3::zeros((1, modes, r1));
        for m in 0..modes {
            for b in 0..r1 {
                head[[0, m, b]] = first[[i, m, b]];
            }
        }
        let mut cores = vec![head];
        cores.extend(self.cores[1..].iter().cloned());
        TensorTrain::new(cores)
    }
}
