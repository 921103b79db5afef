//! Exact set-function machinery: discrete derivatives, Shapley values,
//! interaction indices of both definitions, and the multilinear-extension
//! identities used as independent cross-checks.
//!
//! Subsets of the feature set `{0, .., n-1}` are bitmask integers, feature
//! `i` living at bit `i`; iteration order is increasing mask value. All
//! arithmetic is 64-bit floating point; combinatorial weights such as
//! `1/C(n-1, |T|)` stay well within range for the feature counts handled
//! here.

use std::sync::Arc;

use itertools::Itertools;

use crate::{Error, Result};

/// Every operation in this module is exact enumeration; permutation
/// averaging above this feature count is refused outright.
pub const PERMUTATION_FEATURE_CAP: usize = 10;

type EvalFn = dyn Fn(u32) -> Vec<f64> + Send + Sync;

enum Backing {
    /// Row `mask` holds the `n_out` outputs, masks in increasing order.
    Table(Vec<f64>),
    Callback(Arc<EvalFn>),
}

/// A value function `F: 2^[n] -> R^{n_out}`, either a dense table over all
/// `2^n` subsets or a lazily evaluated callback.
///
/// Evaluation must be pure: all operations here are read-only and safe to
/// run concurrently across interaction sets.
pub struct SetFunction {
    n: usize,
    n_out: usize,
    backing: Backing,
}

impl SetFunction {
    /// Dense table backing; `table` holds `2^n * n_out` values, the row for
    /// subset `mask` starting at `mask * n_out`.
    pub fn from_table(n: usize, n_out: usize, table: Vec<f64>) -> Result<Self> {
        if n > 31 {
            return Err(Error::capacity(format!("{n} features cannot be tabulated")));
        }
        if n_out == 0 {
            return Err(Error::invalid("output dimension must be positive"));
        }
        let expected = (1usize << n) * n_out;
        if table.len() != expected {
            return Err(Error::shape(format!(
                "table has {} values, expected {expected}",
                table.len()
            )));
        }
        Ok(SetFunction {
            n,
            n_out,
            backing: Backing::Table(table),
        })
    }

    /// Callback backing for domains too large to tabulate.
    pub fn from_fn(
        n: usize,
        n_out: usize,
        eval: impl Fn(u32) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        SetFunction {
            n,
            n_out,
            backing: Backing::Callback(Arc::new(eval)),
        }
    }

    /// Scalar game from a plain closure, for fixtures and tests.
    pub fn scalar(n: usize, eval: impl Fn(u32) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_fn(n, 1, move |mask| vec![eval(mask)])
    }

    /// Unanimity game `u_T`: 1 exactly on supersets of `t_mask`.
    pub fn unanimity(n: usize, t_mask: u32) -> Self {
        Self::scalar(n, move |mask| {
            if mask & t_mask == t_mask {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Additive game `F(S) = sum_{i in S} v_i`.
    pub fn additive(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::scalar(n, move |mask| {
            values
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, v)| v)
                .sum()
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn eval(&self, mask: u32) -> Vec<f64> {
        debug_assert!((mask as u64) < (1u64 << self.n));
        match &self.backing {
            Backing::Table(t) => {
                let start = mask as usize * self.n_out;
                t[start..start + self.n_out].to_vec()
            }
            Backing::Callback(f) => {
                let v = f(mask);
                debug_assert_eq!(v.len(), self.n_out);
                v
            }
        }
    }

    /// First output only; convenient for scalar games.
    pub fn eval_scalar(&self, mask: u32) -> f64 {
        self.eval(mask)[0]
    }

    /// Eagerly evaluates every subset into a table-backed copy.
    pub fn tabulate(&self) -> Result<SetFunction> {
        if self.n > 24 {
            return Err(Error::capacity(format!(
                "refusing to tabulate 2^{} subsets",
                self.n
            )));
        }
        let mut table = Vec::with_capacity((1usize << self.n) * self.n_out);
        for mask in 0..(1u32 << self.n) {
            table.extend(self.eval(mask));
        }
        SetFunction::from_table(self.n, self.n_out, table)
    }

    /// Table-backed `a*f + b*g`.
    pub fn linear_combination(a: f64, f: &SetFunction, b: f64, g: &SetFunction) -> Result<Self> {
        if f.n != g.n || f.n_out != g.n_out {
            return Err(Error::shape(format!(
                "incompatible games: ({}, {}) vs ({}, {})",
                f.n, f.n_out, g.n, g.n_out
            )));
        }
        let mut table = Vec::with_capacity((1usize << f.n) * f.n_out);
        for mask in 0..(1u32 << f.n) {
            let fv = f.eval(mask);
            let gv = g.eval(mask);
            table.extend(fv.iter().zip(&gv).map(|(x, y)| a * x + b * y));
        }
        SetFunction::from_table(f.n, f.n_out, table)
    }
}

/// Iterates the submasks of `mask`, including the empty set and `mask`
/// itself, in increasing mask order.
pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut current = 0u32;
    let mut exhausted = false;
    std::iter::from_fn(move || {
        if exhausted {
            return None;
        }
        let out = current;
        if current == mask {
            exhausted = true;
        } else {
            current = current.wrapping_sub(mask) & mask;
        }
        Some(out)
    })
}

/// All interaction sets `1 <= |S| <= k`, sorted by `(|S|, mask)`.
pub fn interaction_sets(n: usize, k: usize) -> Vec<u32> {
    let mut sets: Vec<u32> = (1..(1u32 << n))
        .filter(|m| (m.count_ones() as usize) <= k)
        .collect();
    sets.sort_by_key(|m| (m.count_ones(), *m));
    sets
}

/// Binomial coefficient as a float, exact within 64-bit precision for the
/// feature counts handled here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 1..=k {
        acc = acc * (n - k + j) as f64 / j as f64;
    }
    acc
}

fn check_subset(n: usize, mask: u32, what: &str) -> Result<()> {
    if (mask as u64) >= (1u64 << n) {
        return Err(Error::invalid(format!(
            "{what} {mask:#b} is not a subset of a {n}-feature set"
        )));
    }
    Ok(())
}

/// Discrete derivative `delta_S F(T)`: the signed inclusion-exclusion sum
/// `sum_{W subseteq S} (-1)^{|S|-|W|} F(T cup W)`.
///
/// For `|S| = 1` this reduces to the main effect `F(T cup {i}) - F(T)`.
pub fn discrete_derivative(f: &SetFunction, s: u32, t: u32) -> Result<Vec<f64>> {
    check_subset(f.n(), s, "interaction set")?;
    check_subset(f.n(), t, "context set")?;
    if s & t != 0 {
        return Err(Error::invalid(format!(
            "interaction set {s:#b} overlaps context {t:#b}"
        )));
    }
    let s_size = s.count_ones();
    let mut acc = vec![0.0; f.n_out()];
    for w in submasks(s) {
        let sign = if (s_size - w.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let v = f.eval(t | w);
        for (slot, x) in acc.iter_mut().zip(&v) {
            *slot += sign * x;
        }
    }
    Ok(acc)
}

/// Shapley kernel `|T|! (n-|T|-1)! / n!`, equal to `1 / (n * C(n-1, |T|))`.
pub fn shapley_weight(n: usize, t_size: usize) -> Result<f64> {
    if n == 0 || t_size >= n {
        return Err(Error::invalid(format!(
            "context size {t_size} out of range for {n} features"
        )));
    }
    Ok(1.0 / (n as f64 * binomial(n - 1, t_size)))
}

/// Shapley value of feature `i`:
/// `sum_{T subseteq [n] \ {i}} w(n, |T|) (F(T cup {i}) - F(T))`.
pub fn shapley_value(f: &SetFunction, i: usize) -> Result<Vec<f64>> {
    let n = f.n();
    if i >= n {
        return Err(Error::invalid(format!(
            "feature {i} out of range for {n} features"
        )));
    }
    let bit = 1u32 << i;
    let complement = ((1u64 << n) - 1) as u32 & !bit;
    let mut acc = vec![0.0; f.n_out()];
    for t in submasks(complement) {
        let w = shapley_weight(n, t.count_ones() as usize)?;
        let with = f.eval(t | bit);
        let without = f.eval(t);
        for (slot, (a, b)) in acc.iter_mut().zip(with.iter().zip(&without)) {
            *slot += w * (a - b);
        }
    }
    Ok(acc)
}

fn check_interaction_args(f: &SetFunction, k: usize, s: u32) -> Result<()> {
    let n = f.n();
    check_subset(n, s, "interaction set")?;
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "order {k} out of range for {n} features"
        )));
    }
    let s_size = s.count_ones() as usize;
    if s_size == 0 {
        return Err(Error::invalid("interaction set must be nonempty"));
    }
    if s_size > k {
        return Err(Error::invalid(format!(
            "interaction set of size {s_size} exceeds order {k}"
        )));
    }
    Ok(())
}

/// Order-`k` interaction index by the closed form.
///
/// For `|S| < k` the defining case split applies and the result is the
/// discrete derivative at the empty context; the weighted sum over contexts
/// is used only at `|S| = k`.
pub fn stii_closed_form(f: &SetFunction, k: usize, s: u32) -> Result<Vec<f64>> {
    check_interaction_args(f, k, s)?;
    let n = f.n();
    let s_size = s.count_ones() as usize;
    if s_size < k {
        return discrete_derivative(f, s, 0);
    }
    let complement = ((1u64 << n) - 1) as u32 & !s;
    let inverse_binomials: Vec<f64> = (0..n)
        .map(|t| 1.0 / binomial(n - 1, t))
        .collect();
    let mut acc = vec![0.0; f.n_out()];
    for t in submasks(complement) {
        let coeff = inverse_binomials[t.count_ones() as usize];
        let d = discrete_derivative(f, s, t)?;
        for (slot, x) in acc.iter_mut().zip(&d) {
            *slot += coeff * x;
        }
    }
    let scale = k as f64 / n as f64;
    for slot in acc.iter_mut() {
        *slot *= scale;
    }
    Ok(acc)
}

/// Order-`k` interaction index by its permutation definition: the exact
/// average over all `n!` orderings of `delta_S F(pi_S)`, where `pi_S` is the
/// set of features placed before every element of `S`.
///
/// Literal enumeration, capped at [`PERMUTATION_FEATURE_CAP`] features.
pub fn stii_permutation(f: &SetFunction, k: usize, s: u32) -> Result<Vec<f64>> {
    check_interaction_args(f, k, s)?;
    let n = f.n();
    if n > PERMUTATION_FEATURE_CAP {
        return Err(Error::capacity(format!(
            "permutation enumeration over {n}! orderings refused (cap {PERMUTATION_FEATURE_CAP})"
        )));
    }
    if (s.count_ones() as usize) < k {
        return discrete_derivative(f, s, 0);
    }
    let mut acc = vec![0.0; f.n_out()];
    let mut count = 0u64;
    for perm in (0..n).permutations(n) {
        let mut prefix = 0u32;
        for &j in &perm {
            if s >> j & 1 == 1 {
                break;
            }
            prefix |= 1 << j;
        }
        let d = discrete_derivative(f, s, prefix)?;
        for (slot, x) in acc.iter_mut().zip(&d) {
            *slot += x;
        }
        count += 1;
    }
    for slot in acc.iter_mut() {
        *slot /= count as f64;
    }
    Ok(acc)
}

fn check_unit_cube(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::invalid(format!(
            "point has {} coordinates, game has {n} features",
            x.len()
        )));
    }
    if x.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
        return Err(Error::invalid(format!(
            "point {x:?} outside the unit cube"
        )));
    }
    Ok(())
}

/// Multilinear extension `f(x) = sum_S F(S) prod_{i in S} x_i
/// prod_{i notin S} (1 - x_i)`, evaluated by contracting one coordinate at
/// a time. At indicator vectors this interpolates `F` exactly.
pub fn multilinear_eval(f: &SetFunction, x: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    check_unit_cube(x, n)?;
    let n_out = f.n_out();
    let mut table: Vec<f64> = Vec::with_capacity((1usize << n) * n_out);
    for mask in 0..(1u32 << n) {
        table.extend(f.eval(mask));
    }
    // Fold the top feature each pass; masks keep their low bits.
    for j in (0..n).rev() {
        let half = 1usize << j;
        for m in 0..half {
            for y in 0..n_out {
                let lo = table[m * n_out + y];
                let hi = table[(m + half) * n_out + y];
                table[m * n_out + y] = (1.0 - x[j]) * lo + x[j] * hi;
            }
        }
        table.truncate(half * n_out);
    }
    Ok(table)
}

/// Sign pattern and surviving factors of one term of the differentiated
/// multilinear polynomial.
fn mixed_partial_term(mask: u32, s: u32, x: &[f64]) -> f64 {
    let mut prod = 1.0;
    for (j, &xj) in x.iter().enumerate() {
        let bit = 1u32 << j;
        let in_mask = mask & bit != 0;
        if s & bit != 0 {
            // Differentiated coordinate: the (x_j, 1-x_j) factor drops to a sign.
            if !in_mask {
                prod = -prod;
            }
        } else if in_mask {
            prod *= xj;
        } else {
            prod *= 1.0 - xj;
        }
    }
    prod
}

/// Mixed partial derivative of the multilinear extension with respect to
/// the coordinates in `s`, evaluated at `x`.
///
/// Differentiating a multilinear polynomial removes the `(x_i, 1-x_i)`
/// factors for `i in s` and inserts signs, so the value is an exact finite
/// sum, not a numerical derivative.
pub fn mixed_partial(f: &SetFunction, s: u32, x: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    check_subset(n, s, "derivative set")?;
    check_unit_cube(x, n)?;
    let mut acc = vec![0.0; f.n_out()];
    for mask in 0..(1u32 << n) {
        let coeff = mixed_partial_term(mask, s, x);
        if coeff == 0.0 {
            continue;
        }
        let v = f.eval(mask);
        for (slot, val) in acc.iter_mut().zip(&v) {
            *slot += coeff * val;
        }
    }
    Ok(acc)
}

/// Order-`k` interaction of a size-`k` set by the integral form
/// `int_0^1 k (1-t)^{k-1} Delta_S f(t, .., t) dt`.
///
/// Each term of the differentiated multilinear polynomial contributes a
/// Beta integral `k int t^a (1-t)^{b+k-1} dt`, evaluated in closed form;
/// no numerical quadrature is involved.
pub fn stii_integral(f: &SetFunction, k: usize, s: u32) -> Result<Vec<f64>> {
    check_interaction_args(f, k, s)?;
    let s_size = s.count_ones() as usize;
    if s_size != k {
        return Err(Error::invalid(format!(
            "integral form needs |S| = k, got |S| = {s_size}, k = {k}"
        )));
    }
    let n = f.n();
    let mut acc = vec![0.0; f.n_out()];
    for mask in 0..(1u32 << n) {
        // Sign from the differentiated coordinates, as in mixed_partial.
        let mut sign = 1.0;
        for j in 0..n {
            let bit = 1u32 << j;
            if s & bit != 0 && mask & bit == 0 {
                sign = -sign;
            }
        }
        let a = (mask & !s).count_ones() as usize; // power of t
        let b = n - ((mask | s).count_ones() as usize); // power of (1-t)
        // k * Beta(a+1, b+k) = k * a! (b+k-1)! / (a+b+k)!
        let m = b + k - 1;
        let integral = k as f64 / ((a + m + 1) as f64 * binomial(a + m, a));
        let v = f.eval(mask);
        for (slot, val) in acc.iter_mut().zip(&v) {
            *slot += sign * integral * val;
        }
    }
    Ok(acc)
}

/// Worst observed violation of each interaction-index axiom.
#[derive(Debug, Clone, Default)]
pub struct AxiomReport {
    pub linearity: f64,
    pub dummy: f64,
    pub symmetry: f64,
    pub efficiency: f64,
    pub interaction_distribution: f64,
}

impl AxiomReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.linearity,
            self.dummy,
            self.symmetry,
            self.efficiency,
            self.interaction_distribution,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// `(axiom name, violation)` pairs, for reporting.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("linearity", self.linearity),
            ("dummy", self.dummy),
            ("symmetry", self.symmetry),
            ("efficiency", self.efficiency),
            ("interaction_distribution", self.interaction_distribution),
        ]
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Checks the five characterizing axioms on a pair of games and returns the
/// per-axiom maximum violation over all interaction sets of order up to `k`.
///
/// Linearity is probed with `2f - g`; dummy with a copy of `f` whose last
/// feature is made exactly additive; symmetry with a cyclic relabeling;
/// interaction distribution with unanimity games on subsets of `f`'s
/// features.
pub fn axiom_suite(f: &SetFunction, g: &SetFunction, k: usize) -> Result<AxiomReport> {
    let n = f.n();
    if g.n() != n || g.n_out() != f.n_out() {
        return Err(Error::shape("axiom suite needs games of equal shape"));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("order {k} out of range")));
    }
    let sets = interaction_sets(n, k);
    let mut report = AxiomReport::default();

    // Linearity: I(2f - g) = 2 I(f) - I(g).
    let combo = SetFunction::linear_combination(2.0, f, -1.0, g)?;
    for &s in &sets {
        let lhs = stii_closed_form(&combo, k, s)?;
        let fi = stii_closed_form(f, k, s)?;
        let gi = stii_closed_form(g, k, s)?;
        let rhs: Vec<f64> = fi.iter().zip(&gi).map(|(a, b)| 2.0 * a - b).collect();
        report.linearity = report.linearity.max(max_abs_diff(&lhs, &rhs));
    }

    // Dummy: make the last feature exactly additive on top of f.
    let dummy_bit = 1u32 << (n - 1);
    let dummy_gain = 0.75;
    let f_table = f.tabulate()?;
    let base = f_table.eval(0);
    let dummy_game = {
        let shifted: Vec<f64> = (0..(1u32 << n))
            .flat_map(|mask| {
                let rest = mask & !dummy_bit;
                let mut v = f_table.eval(rest);
                for (slot, b) in v.iter_mut().zip(&base) {
                    *slot -= b;
                    if mask & dummy_bit != 0 {
                        *slot += dummy_gain;
                    }
                }
                v
            })
            .collect();
        SetFunction::from_table(n, f.n_out(), shifted)?
    };
    for &s in &sets {
        if s & dummy_bit == 0 {
            continue;
        }
        let got = stii_closed_form(&dummy_game, k, s)?;
        let expected = if s == dummy_bit { dummy_gain } else { 0.0 };
        let dev = got
            .iter()
            .map(|v| (v - expected).abs())
            .fold(0.0, f64::max);
        report.dummy = report.dummy.max(dev);
    }

    // Symmetry: cyclic relabeling sigma(i) = i+1 mod n.
    let relabeled = {
        let table: Vec<f64> = (0..(1u32 << n))
            .flat_map(|mask| {
                // Preimage of mask under sigma: rotate bits right by one.
                let lo = mask & 1;
                let pre = (mask >> 1) | (lo << (n - 1));
                f_table.eval(pre)
            })
            .collect();
        SetFunction::from_table(n, f.n_out(), table)?
    };
    for &s in &sets {
        let rotated = ((s << 1) | (s >> (n - 1))) & (((1u64 << n) - 1) as u32);
        let lhs = stii_closed_form(&relabeled, k, rotated)?;
        let rhs = stii_closed_form(f, k, s)?;
        report.symmetry = report.symmetry.max(max_abs_diff(&lhs, &rhs));
    }

    // Efficiency: components of order <= k sum to F(N) - F(empty).
    let full = ((1u64 << n) - 1) as u32;
    let mut total = vec![0.0; f.n_out()];
    for &s in &sets {
        let v = stii_closed_form(f, k, s)?;
        for (slot, x) in total.iter_mut().zip(&v) {
            *slot += x;
        }
    }
    let span: Vec<f64> = f
        .eval(full)
        .iter()
        .zip(&f.eval(0))
        .map(|(a, b)| a - b)
        .collect();
    report.efficiency = max_abs_diff(&total, &span);

    // Interaction distribution: pure interactions leave strictly lower
    // orders untouched. Vacuous at k = 1.
    if k >= 2 {
        for t_size in 2..=n.min(k + 1) {
            let t_mask = ((1u64 << t_size) - 1) as u32;
            let unanimity = SetFunction::unanimity(n, t_mask);
            for &s in &sets {
                let s_size = s.count_ones() as usize;
                if s & t_mask != s || s == t_mask || s_size >= k {
                    continue;
                }
                let v = stii_closed_form(&unanimity, k, s)?;
                let dev = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
                report.interaction_distribution = report.interaction_distribution.max(dev);
            }
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_game(rng: &mut ChaCha8Rng, n: usize, n_out: usize) -> SetFunction {
        let table: Vec<f64> = (0..(1usize << n) * n_out)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        SetFunction::from_table(n, n_out, table).unwrap()
    }

    /// Independent oracle: literal double loop over the submask lattice.
    fn derivative_oracle(f: &SetFunction, s: u32, t: u32) -> Vec<f64> {
        let mut acc = vec![0.0; f.n_out()];
        let s_size = s.count_ones() as i32;
        for w in 0..=s {
            if w & s != w {
                continue;
            }
            let sign = (-1f64).powi(s_size - w.count_ones() as i32);
            for (slot, v) in acc.iter_mut().zip(f.eval(t | w)) {
                *slot += sign * v;
            }
        }
        acc
    }

    /// Independent oracle: average marginal contribution over all orders.
    fn shapley_permutation_oracle(f: &SetFunction, i: usize) -> Vec<f64> {
        let n = f.n();
        let mut acc = vec![0.0; f.n_out()];
        let mut count = 0u64;
        for perm in (0..n).permutations(n) {
            let mut prefix = 0u32;
            for &j in &perm {
                if j == i {
                    break;
                }
                prefix |= 1 << j;
            }
            let with = f.eval(prefix | (1 << i));
            let without = f.eval(prefix);
            for (slot, (a, b)) in acc.iter_mut().zip(with.iter().zip(&without)) {
                *slot += a - b;
            }
            count += 1;
        }
        acc.iter_mut().for_each(|v| *v /= count as f64);
        acc
    }

    #[test]
    fn additive_games_have_no_pairwise_interactions() {
        let f = SetFunction::additive(vec![0.5, -1.5, 2.0, 0.25]);
        for t in [0u32, 0b1000, 0b1100] {
            let d = discrete_derivative(&f, 0b011, t).unwrap();
            assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn unanimity_pair_has_unit_second_derivative_at_empty_context() {
        let f = SetFunction::unanimity(3, 0b011);
        let d = discrete_derivative(&f, 0b011, 0).unwrap();
        assert_abs_diff_eq!(d[0], 1.0);
    }

    #[test]
    fn derivative_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let f = random_game(&mut rng, 4, 2);
        for s in [0b0001u32, 0b0110, 0b1011] {
            let complement = 0b1111 & !s;
            for t in submasks(complement) {
                let got = discrete_derivative(&f, s, t).unwrap();
                let want = derivative_oracle(&f, s, t);
                for (g, w) in got.iter().zip(&want) {
                    assert_abs_diff_eq!(g, w, epsilon = 0.0);
                }
            }
        }
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let f = SetFunction::additive(vec![1.0, 2.0]);
        assert!(matches!(
            discrete_derivative(&f, 0b01, 0b01),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn shapley_weight_matches_factorial_form() {
        for n in 1..=10 {
            for t in 0..n {
                let fact = |m: usize| (1..=m).map(|x| x as f64).product::<f64>();
                let expected = fact(t) * fact(n - t - 1) / fact(n);
                assert_abs_diff_eq!(shapley_weight(n, t).unwrap(), expected, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(shapley_weight(3, 1).unwrap(), 1.0 / 6.0);
        assert_abs_diff_eq!(shapley_weight(1, 0).unwrap(), 1.0);
        assert!(shapley_weight(3, 3).is_err());
    }

    #[test]
    fn shapley_weights_normalize() {
        for n in 1..=10 {
            let total: f64 = submasks(((1u64 << (n - 1)) - 1) as u32)
                .map(|t| shapley_weight(n, t.count_ones() as usize).unwrap())
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unanimity_shapley_values_split_evenly() {
        let f = SetFunction::unanimity(3, 0b011);
        assert_abs_diff_eq!(shapley_value(&f, 0).unwrap()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(shapley_value(&f, 2).unwrap()[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn additive_shapley_values_are_the_item_values() {
        let f = SetFunction::additive(vec![0.3, -0.9, 1.7]);
        for (i, v) in [0.3, -0.9, 1.7].into_iter().enumerate() {
            assert_abs_diff_eq!(shapley_value(&f, i).unwrap()[0], v, epsilon = 1e-14);
        }
    }

    #[test]
    fn shapley_matches_permutation_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for n in [3, 5, 6] {
            let f = random_game(&mut rng, n, 1);
            for i in 0..n {
                let got = shapley_value(&f, i).unwrap();
                let want = shapley_permutation_oracle(&f, i);
                assert_abs_diff_eq!(got[0], want[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_on_unanimity_pair_is_one() {
        // Hand sum: (2/3) * (1/C(2,0) + (1/2)/C(2,1)) = (2/3)(1 + 1/2) = 1.
        let f = SetFunction::unanimity(3, 0b011);
        let got = stii_closed_form(&f, 2, 0b011).unwrap();
        assert_abs_diff_eq!(got[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn closed_form_at_order_one_is_the_shapley_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in [2, 4, 6, 8] {
            let f = random_game(&mut rng, n, 1);
            for i in 0..n {
                let a = stii_closed_form(&f, 1, 1 << i).unwrap();
                let b = shapley_value(&f, i).unwrap();
                assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn additive_pairs_have_zero_interaction() {
        let f = SetFunction::additive(vec![1.0, 2.0, 3.0, 4.0]);
        for s in [0b0011u32, 0b0101, 0b1100] {
            assert_abs_diff_eq!(stii_closed_form(&f, 2, s).unwrap()[0], 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn oversized_interaction_set_is_rejected() {
        let f = SetFunction::additive(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            stii_closed_form(&f, 1, 0b011),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn permutation_definition_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for n in 2..=6 {
            let f = random_game(&mut rng, n, 1);
            for k in 1..=n {
                for &s in interaction_sets(n, k).iter().filter(|s| {
                    let sz = s.count_ones() as usize;
                    sz == k || sz == k.saturating_sub(1).max(1)
                }) {
                    let a = stii_permutation(&f, k, s).unwrap();
                    let b = stii_closed_form(&f, k, s).unwrap();
                    assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn low_order_permutation_case_is_context_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let f = random_game(&mut rng, 5, 1);
        let direct = discrete_derivative(&f, 0b00100, 0).unwrap();
        let perm = stii_permutation(&f, 3, 0b00100).unwrap();
        assert_abs_diff_eq!(perm[0], direct[0], epsilon = 0.0);
    }

    #[test]
    fn full_unanimity_top_order_is_one() {
        let f = SetFunction::unanimity(3, 0b111);
        let got = stii_permutation(&f, 3, 0b111).unwrap();
        assert_abs_diff_eq!(got[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn permutation_cap_is_enforced() {
        let f = SetFunction::scalar(11, |_| 0.0);
        assert!(matches!(
            stii_permutation(&f, 1, 1),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn multilinear_interpolates_at_indicators() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let f = random_game(&mut rng, 5, 2);
        for mask in [0u32, 0b10110, 0b11111] {
            let x: Vec<f64> = (0..5)
                .map(|j| if mask >> j & 1 == 1 { 1.0 } else { 0.0 })
                .collect();
            let got = multilinear_eval(&f, &x).unwrap();
            let want = f.eval(mask);
            for (g, w) in got.iter().zip(&want) {
                assert_abs_diff_eq!(g, w, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn constant_game_extension_is_constant() {
        let f = SetFunction::scalar(4, |_| 2.5);
        let got = multilinear_eval(&f, &[0.5; 4]).unwrap();
        assert_abs_diff_eq!(got[0], 2.5, epsilon = 1e-13);
    }

    #[test]
    fn multilinear_matches_direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for n in [2, 5, 8] {
            let f = random_game(&mut rng, n, 1);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut want = 0.0;
            for mask in 0..(1u32 << n) {
                let mut p = 1.0;
                for (j, &xj) in x.iter().enumerate() {
                    p *= if mask >> j & 1 == 1 { xj } else { 1.0 - xj };
                }
                want += p * f.eval_scalar(mask);
            }
            let got = multilinear_eval(&f, &x).unwrap()[0];
            assert_abs_diff_eq!(got, want, epsilon = 1e-11 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn coordinates_outside_unit_cube_are_rejected() {
        let f = SetFunction::additive(vec![1.0, 1.0]);
        assert!(matches!(
            multilinear_eval(&f, &[0.5, 1.5]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn mixed_partial_at_origin_is_low_order_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let f = random_game(&mut rng, 5, 1);
        for (k, s) in [(3usize, 0b00011u32), (2, 0b00100), (3, 0b10001)] {
            let taylor = mixed_partial(&f, s, &[0.0; 5]).unwrap();
            let index = stii_closed_form(&f, k, s).unwrap();
            assert_abs_diff_eq!(taylor[0], index[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn additive_games_have_flat_mixed_partials() {
        let f = SetFunction::additive(vec![1.0, -2.0, 0.5]);
        for x in [[0.0; 3], [0.3; 3], [1.0; 3]] {
            let d = mixed_partial(&f, 0b011, &x).unwrap();
            assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn mixed_partial_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let f = random_game(&mut rng, 5, 1);
        let s = 0b01010u32;
        let x = [0.4, 0.5, 0.6, 0.3, 0.7];
        let h = 1e-5;
        // Central second difference over the two coordinates in s.
        let mut want = 0.0;
        for (da, sa) in [(h, 1.0), (-h, -1.0)] {
            for (db, sb) in [(h, 1.0), (-h, -1.0)] {
                let mut p = x;
                p[1] += da;
                p[3] += db;
                want += sa * sb * multilinear_eval(&f, &p).unwrap()[0];
            }
        }
        want /= 4.0 * h * h;
        let got = mixed_partial(&f, s, &x).unwrap()[0];
        assert_abs_diff_eq!(got, want, epsilon = 1e-6);
    }

    #[test]
    fn integral_form_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for n in 2..=6 {
            let f = random_game(&mut rng, n, 1);
            for k in 1..=3.min(n) {
                for &s in &interaction_sets(n, k) {
                    if s.count_ones() as usize != k {
                        continue;
                    }
                    let a = stii_integral(&f, k, s).unwrap();
                    let b = stii_closed_form(&f, k, s).unwrap();
                    assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn integral_of_unanimity_at_its_own_set_is_one() {
        for size in 1..=4 {
            let n = size + 1;
            let t_mask = ((1u64 << size) - 1) as u32;
            let f = SetFunction::unanimity(n, t_mask);
            let got = stii_integral(&f, size, t_mask).unwrap();
            assert_abs_diff_eq!(got[0], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn integral_rejects_mismatched_order() {
        let f = SetFunction::additive(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            stii_integral(&f, 2, 0b001),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn axiom_suite_passes_on_random_games() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let f = random_game(&mut rng, 5, 1);
        let g = random_game(&mut rng, 5, 1);
        let report = axiom_suite(&f, &g, 2).unwrap();
        assert!(
            report.max_violation() <= 1e-10,
            "violations: {:?}",
            report.entries()
        );
    }

    #[test]
    fn interaction_distribution_is_zero_below_pure_order() {
        let f = SetFunction::unanimity(4, 0b0111);
        let got = stii_closed_form(&f, 2, 0b0001).unwrap();
        assert_abs_diff_eq!(got[0], 0.0, epsilon = 0.0);
    }

    #[test]
    fn interaction_sets_are_sorted_by_size_then_mask() {
        let sets = interaction_sets(3, 2);
        assert_eq!(sets, vec![0b001, 0b010, 0b100, 0b011, 0b101, 0b110]);
    }
}
