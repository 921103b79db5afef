//! Tensor-train representation, decomposition and contraction.
//!
//! A tensor train stores an `n`-mode tensor as a chain of third-order cores
//! `G_1, ..., G_n`, core `i` shaped `(r_{i-1}, N_i, r_i)` with boundary ranks
//! `r_0 = r_n = 1`. Entries are recovered as matrix chain products of mode
//! slices, so storage and contraction cost are governed by the bond ranks
//! rather than by `prod N_i`.
//!
//! Chain products are executed as balanced binary reductions
//! ([`chain_reduce`]), which keeps the reduction depth logarithmic in the
//! chain length; matrix multiplication is associative, so the result agrees
//! with a sequential fold up to floating-point rounding.

use ndarray::{Array2, Array3, ArrayView2};
use nalgebra::DMatrix;
use rayon::join;

use crate::{Error, Result, DEFAULT_DENSE_LIMIT};

/// Dense reference tensor: mode sizes plus a flat row-major entry buffer.
///
/// Used as decomposition input and as the oracle representation the TT
/// backend is checked against; the last mode index varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    mode_sizes: Vec<usize>,
    entries: Vec<f64>,
}

impl DenseTensor {
    /// Wraps a flat buffer, checking that its length matches the mode sizes.
    pub fn new(mode_sizes: Vec<usize>, entries: Vec<f64>) -> Result<Self> {
        if mode_sizes.is_empty() {
            return Err(Error::invalid("tensor must have at least one mode"));
        }
        if mode_sizes.contains(&0) {
            return Err(Error::invalid("mode sizes must be positive"));
        }
        let expected: usize = mode_sizes.iter().product();
        if entries.len() != expected {
            return Err(Error::shape(format!(
                "entry buffer has length {}, expected {} for modes {:?}",
                entries.len(),
                expected,
                mode_sizes
            )));
        }
        Ok(DenseTensor {
            mode_sizes,
            entries,
        })
    }

    /// All-zero tensor with the given mode sizes.
    pub fn zeros(mode_sizes: Vec<usize>) -> Result<Self> {
        let len: usize = mode_sizes.iter().product();
        Self::new(mode_sizes, vec![0.0; len])
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major
    /// order.
    pub fn from_fn(mode_sizes: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut t = Self::zeros(mode_sizes)?;
        let mut idx = vec![0usize; t.n_modes()];
        for flat in 0..t.entries.len() {
            t.unflatten_into(flat, &mut idx);
            t.entries[flat] = f(&idx);
        }
        Ok(t)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_sizes.len()
    }

    pub fn mode_sizes(&self) -> &[usize] {
        &self.mode_sizes
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Row-major flat offset of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.mode_sizes.len() {
            return Err(Error::bounds(format!(
                "index has {} components, tensor has {} modes",
                idx.len(),
                self.mode_sizes.len()
            )));
        }
        let mut flat = 0usize;
        for (&i, &n) in idx.iter().zip(&self.mode_sizes) {
            if i >= n {
                return Err(Error::bounds(format!(
                    "index {:?} out of range for modes {:?}",
                    idx, self.mode_sizes
                )));
            }
            flat = flat * n + i;
        }
        Ok(flat)
    }

    fn unflatten_into(&self, mut flat: usize, idx: &mut [usize]) {
        for (slot, &n) in idx.iter_mut().zip(&self.mode_sizes).rev() {
            *slot = flat % n;
            flat /= n;
        }
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.entries[self.flat_index(idx)?])
    }

    pub fn set(&mut self, idx: &[usize], v: f64) -> Result<()> {
        let flat = self.flat_index(idx)?;
        self.entries[flat] = v;
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Iterates multi-indices in row-major order.
    pub fn indices(&self) -> MultiIndexIter {
        MultiIndexIter::new(self.mode_sizes.clone())
    }
}

/// Row-major iterator over all multi-indices of a shape.
pub struct MultiIndexIter {
    sizes: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl MultiIndexIter {
    pub fn new(sizes: Vec<usize>) -> Self {
        let next = if sizes.contains(&0) {
            None
        } else {
            Some(vec![0; sizes.len()])
        };
        MultiIndexIter { sizes, next }
    }
}

impl Iterator for MultiIndexIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.clone()?;
        let mut succ = current.clone();
        let mut done = true;
        for pos in (0..succ.len()).rev() {
            succ[pos] += 1;
            if succ[pos] < self.sizes[pos] {
                done = false;
                break;
            }
            succ[pos] = 0;
        }
        self.next = if done { None } else { Some(succ) };
        Some(current)
    }
}

/// Tensor in tensor-train form: a chain of `(r_{i-1}, N_i, r_i)` cores.
///
/// Immutable after construction; adjacent bond ranks agree and the boundary
/// ranks are 1. Cores are gauge-non-unique, so equality of two trains is
/// only meaningful through the tensors they expand to.
#[derive(Debug, Clone)]
pub struct TensorTrain {
    cores: Vec<Array3<f64>>,
}

impl TensorTrain {
    /// Validates core shapes and wraps them.
    pub fn new(cores: Vec<Array3<f64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::invalid("tensor train must have at least one core"));
        }
        if cores[0].dim().0 != 1 {
            return Err(Error::shape(format!(
                "first core must have left rank 1, got {}",
                cores[0].dim().0
            )));
        }
        if cores[cores.len() - 1].dim().2 != 1 {
            return Err(Error::shape(format!(
                "last core must have right rank 1, got {}",
                cores[cores.len() - 1].dim().2
            )));
        }
        for i in 0..cores.len() - 1 {
            let right = cores[i].dim().2;
            let left = cores[i + 1].dim().0;
            if right != left {
                return Err(Error::shape(format!(
                    "bond rank mismatch between cores {} and {}: {} vs {}",
                    i,
                    i + 1,
                    right,
                    left
                )));
            }
        }
        if cores.iter().any(|c| c.dim().1 == 0) {
            return Err(Error::shape("mode sizes must be positive"));
        }
        Ok(TensorTrain { cores })
    }

    /// Builds a train from flat row-major core buffers, as used by the
    /// serialized container format.
    pub fn from_flat_cores(
        mode_sizes: &[usize],
        ranks: &[usize],
        cores: &[Vec<f64>],
    ) -> Result<Self> {
        if ranks.len() != mode_sizes.len() + 1 {
            return Err(Error::shape(format!(
                "{} ranks listed for {} modes; expected one more rank than modes",
                ranks.len(),
                mode_sizes.len()
            )));
        }
        if cores.len() != mode_sizes.len() {
            return Err(Error::shape(format!(
                "{} cores listed for {} modes",
                cores.len(),
                mode_sizes.len()
            )));
        }
        let built = cores
            .iter()
            .enumerate()
            .map(|(i, flat)| {
                let shape = (ranks[i], mode_sizes[i], ranks[i + 1]);
                Array3::from_shape_vec(shape, flat.clone()).map_err(|e| {
                    Error::shape(format!("core {i} does not match shape {shape:?}: {e}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(built)
    }

    /// Flat row-major entry buffer of one core.
    pub fn core_flat(&self, i: usize) -> Vec<f64> {
        self.cores[i].iter().copied().collect()
    }

    /// Rank-1 train from per-mode factor vectors (outer product).
    pub fn from_rank_one(factors: &[Vec<f64>]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("need at least one factor"));
        }
        let cores = factors
            .iter()
            .map(|f| {
                Array3::from_shape_vec((1, f.len(), 1), f.clone())
                    .map_err(|e| Error::shape(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cores)
    }

    pub fn n_modes(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// Bond ranks `r_0..r_n` including the unit boundaries.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = vec![self.cores[0].dim().0];
        r.extend(self.cores.iter().map(|c| c.dim().2));
        r
    }

    /// Largest internal bond rank (1 for a single-core train).
    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Evaluates one entry as a chain of matrix-slice products.
    ///
    /// Never materializes the dense tensor; cost is `O(n r^2)`.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.cores.len() {
            return Err(Error::bounds(format!(
                "index has {} components, train has {} modes",
                idx.len(),
                self.cores.len()
            )));
        }
        for (pos, (&i, core)) in idx.iter().zip(&self.cores).enumerate() {
            if i >= core.dim().1 {
                return Err(Error::bounds(format!(
                    "index {} out of range for mode {} (size {})",
                    i,
                    pos,
                    core.dim().1
                )));
            }
        }
        // Row vector propagated left to right.
        let mut acc: Vec<f64> = vec![1.0];
        for (&i, core) in idx.iter().zip(&self.cores) {
            let (rl, _, rr) = core.dim();
            let mut next = vec![0.0; rr];
            for (a, &va) in acc.iter().enumerate().take(rl) {
                if va == 0.0 {
                    continue;
                }
                for (b, slot) in next.iter_mut().enumerate() {
                    *slot += va * core[[a, i, b]];
                }
            }
            acc = next;
        }
        Ok(acc[0])
    }

    /// Expands to a dense tensor, refusing more than `limit` entries.
    pub fn to_dense_with_limit(&self, limit: usize) -> Result<DenseTensor> {
        let sizes = self.mode_sizes();
        let mut total: usize = 1;
        for &n in &sizes {
            total = total.checked_mul(n).ok_or_else(|| {
                Error::capacity("dense size overflows the address space".to_string())
            })?;
        }
        if total > limit {
            return Err(Error::capacity(format!(
                "dense expansion needs {} entries, limit is {}",
                total, limit
            )));
        }
        // Grow a (rows, r_i) matrix left to right; rows = prod of expanded modes.
        let mut acc: Array2<f64> = {
            let c0 = &self.cores[0];
            let (_, n0, r0) = c0.dim();
            let mut m = Array2::zeros((n0, r0));
            for i in 0..n0 {
                for b in 0..r0 {
                    m[[i, b]] = c0[[0, i, b]];
                }
            }
            m
        };
        for core in &self.cores[1..] {
            let (rl, n, rr) = core.dim();
            let core_mat = core
                .view()
                .into_shape_with_order((rl, n * rr))
                .map_err(|e| Error::shape(e.to_string()))?;
            let grown = acc.dot(&core_mat);
            let rows = grown.nrows() * n;
            acc = grown
                .into_shape_with_order((rows, rr))
                .map_err(|e| Error::shape(e.to_string()))?;
        }
        debug_assert_eq!(acc.ncols(), 1);
        let entries = acc.into_iter().collect();
        DenseTensor::new(sizes, entries)
    }

    /// Expands to a dense tensor under the default size guard.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.to_dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    /// Decomposes a dense tensor by a left-to-right sequential
    /// singular-value sweep.
    ///
    /// Per unfolding, singular values below `tol * ||t||_F / sqrt(n-1)` are
    /// discarded (plus a machine-precision dust floor), which gives a
    /// reconstruction error of at most `tol * ||t||_F` in Frobenius norm.
    /// The sweep is deterministic; no randomized sketching.
    pub fn from_dense(t: &DenseTensor, tol: f64) -> Result<Self> {
        if tol.is_nan() || tol < 0.0 {
            return Err(Error::invalid(format!(
                "tolerance must be nonnegative, got {tol}"
            )));
        }
        let n_modes = t.n_modes();
        let norm = t.frobenius_norm();
        let split_tol = if n_modes > 1 {
            tol * norm / ((n_modes - 1) as f64).sqrt()
        } else {
            0.0
        };

        let mut cores = Vec::with_capacity(n_modes);
        let mut rest: Vec<f64> = t.entries().to_vec();
        let mut r_left = 1usize;
        for k in 0..n_modes - 1 {
            let nk = t.mode_sizes()[k];
            let rows = r_left * nk;
            let cols = rest.len() / rows;
            let (u, sv) = truncated_left_factor(&rest, rows, cols, split_tol);
            let r_right = u.ncols();
            let mut core = Array3::zeros((r_left, nk, r_right));
            for a in 0..r_left {
                for i in 0..nk {
                    for b in 0..r_right {
                        core[[a, i, b]] = u[(a * nk + i, b)];
                    }
                }
            }
            cores.push(core);
            rest = sv;
            r_left = r_right;
        }
        let n_last = t.mode_sizes()[n_modes - 1];
        debug_assert_eq!(rest.len(), r_left * n_last);
        let last = Array3::from_shape_vec((r_left, n_last, 1), rest)
            .map_err(|e| Error::shape(e.to_string()))?;
        cores.push(last);
        Self::new(cores)
    }
}

/// SVD-truncates the `rows x cols` row-major matrix, returning the kept left
/// factor `U_r` and the propagated remainder `diag(S_r) V_r^T` as a flat
/// row-major buffer.
fn truncated_left_factor(
    data: &[f64],
    rows: usize,
    cols: usize,
    split_tol: f64,
) -> (DMatrix<f64>, Vec<f64>) {
    let m = DMatrix::from_row_iterator(rows, cols, data.iter().copied());
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let s = &svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap());

    let s_max = order.first().map(|&i| s[i]).unwrap_or(0.0);
    let dust = f64::EPSILON * s_max * rows.max(cols) as f64;
    let threshold = split_tol.max(dust);
    let mut rank = order.iter().take_while(|&&i| s[i] > threshold).count();
    rank = rank.max(1);

    let mut u_r = DMatrix::zeros(rows, rank);
    let mut sv = vec![0.0; rank * cols];
    for (new_col, &old) in order.iter().take(rank).enumerate() {
        for r in 0..rows {
            u_r[(r, new_col)] = u[(r, old)];
        }
        for c in 0..cols {
            sv[new_col * cols + c] = s[old] * vt[(old, c)];
        }
    }
    (u_r, sv)
}

/// Number of matrices below which a chain is multiplied sequentially rather
/// than split for parallel reduction.
const REDUCE_SPLIT_MIN: usize = 8;

/// Multiplies an ordered chain of matrices as a balanced binary reduction.
///
/// The result is independent of association order up to rounding, so callers
/// compare against a sequential fold with tolerances, not bit equality.
/// Large chains are split recursively and the halves may run on worker
/// threads, giving reduction depth `O(log len)`.
pub fn chain_reduce(mats: &[Array2<f64>]) -> Result<Array2<f64>> {
    if mats.is_empty() {
        return Err(Error::invalid("empty matrix chain"));
    }
    for i in 0..mats.len() - 1 {
        if mats[i].ncols() != mats[i + 1].nrows() {
            return Err(Error::shape(format!(
                "chain link {}: {} columns feed {} rows",
                i,
                mats[i].ncols(),
                mats[i + 1].nrows()
            )));
        }
    }
    let views: Vec<ArrayView2<f64>> = mats.iter().map(|m| m.view()).collect();
    Ok(reduce_views(&views))
}

fn reduce_views(views: &[ArrayView2<f64>]) -> Array2<f64> {
    match views.len() {
        1 => views[0].to_owned(),
        2 => views[0].dot(&views[1]),
        len if len < REDUCE_SPLIT_MIN => {
            let mid = len / 2;
            reduce_views(&views[..mid]).dot(&reduce_views(&views[mid..]))
        }
        len => {
            let mid = len / 2;
            let (left, right) = join(
                || reduce_views(&views[..mid]),
                || reduce_views(&views[mid..]),
            );
            left.dot(&right)
        }
    }
}

/// Depth of the balanced reduction tree used by [`chain_reduce`].
pub fn reduction_depth(chain_len: usize) -> usize {
    if chain_len <= 1 {
        0
    } else {
        usize::BITS as usize - (chain_len - 1).leading_zeros() as usize
    }
}

/// Contracts two trains over their shared leading modes.
///
/// `b` may carry one extra trailing mode (for example a model-output mode);
/// the contraction then returns one value per index of that mode, otherwise
/// a single value. Per-mode transfer matrices are formed independently and
/// multiplied out with [`chain_reduce`], so the sequential cost is
/// `O(n (r_a r_b)^3)` and the reduction depth logarithmic.
pub fn tt_inner(a: &TensorTrain, b: &TensorTrain) -> Result<Vec<f64>> {
    let shared = a.n_modes();
    let extra = match b.n_modes() {
        n if n == shared => None,
        n if n == shared + 1 => Some(&b.cores()[shared]),
        n => {
            return Err(Error::shape(format!(
                "cannot contract {shared}-mode train with {n}-mode train"
            )))
        }
    };
    let a_sizes = a.mode_sizes();
    let b_sizes = b.mode_sizes();
    for i in 0..shared {
        if a_sizes[i] != b_sizes[i] {
            return Err(Error::shape(format!(
                "mode {} size mismatch: {} vs {}",
                i, a_sizes[i], b_sizes[i]
            )));
        }
    }

    let transfers: Vec<Array2<f64>> = (0..shared)
        .map(|i| transfer_matrix(&a.cores()[i], &b.cores()[i]))
        .collect();
    let reduced = chain_reduce(&transfers)?;
    debug_assert_eq!(reduced.nrows(), 1);

    match extra {
        None => {
            debug_assert_eq!(reduced.ncols(), 1);
            Ok(vec![reduced[[0, 0]]])
        }
        Some(out_core) => {
            let (rl, n_out, rr) = out_core.dim();
            if rr != 1 || reduced.ncols() != rl {
                return Err(Error::shape(format!(
                    "trailing core shape ({rl}, {n_out}, {rr}) does not close a {}-wide chain",
                    reduced.ncols()
                )));
            }
            let mut out = vec![0.0; n_out];
            for (y, slot) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for r in 0..rl {
                    acc += reduced[[0, r]] * out_core[[r, y, 0]];
                }
                *slot = acc;
            }
            Ok(out)
        }
    }
}

/// Transfer matrix of a core pair: rows `(a_left, b_left)`, columns
/// `(a_right, b_right)`, summed over the shared mode index.
fn transfer_matrix(a: &Array3<f64>, b: &Array3<f64>) -> Array2<f64> {
    let (al, n, ar) = a.dim();
    let (bl, _, br) = b.dim();
    let mut m = Array2::zeros((al * bl, ar * br));
    for s in 0..n {
        for ia in 0..al {
            for ib in 0..bl {
                let row = ia * bl + ib;
                for ja in 0..ar {
                    let va = a[[ia, s, ja]];
                    if va == 0.0 {
                        continue;
                    }
                    for jb in 0..br {
                        m[[row, ja * br + jb]] += va * b[[ib, s, jb]];
                    }
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, sizes: &[usize]) -> DenseTensor {
        let len = sizes.iter().product();
        let entries = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseTensor::new(sizes.to_vec(), entries).unwrap()
    }

    fn random_tt(rng: &mut ChaCha8Rng, sizes: &[usize], rank: usize) -> TensorTrain {
        let n = sizes.len();
        let mut bonds = vec![1usize];
        for i in 1..n {
            let left: usize = sizes[..i].iter().product();
            let right: usize = sizes[i..].iter().product();
            bonds.push(rank.min(left).min(right));
        }
        bonds.push(1);
        let cores = (0..n)
            .map(|i| {
                let mut c = Array3::zeros((bonds[i], sizes[i], bonds[i + 1]));
                for v in c.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                c
            })
            .collect();
        TensorTrain::new(cores).unwrap()
    }

    #[test]
    fn rank_one_outer_product_decomposes_to_unit_ranks() {
        let u = [1.0, -2.0, 0.5];
        let v = [0.3, 0.7];
        let w = [2.0, 1.0, -1.0, 0.25];
        let t = DenseTensor::from_fn(vec![3, 2, 4], |idx| u[idx[0]] * v[idx[1]] * w[idx[2]]).unwrap();
        let tt = TensorTrain::from_dense(&t, 0.0).unwrap();
        assert_eq!(tt.ranks(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn identity_matrix_has_internal_rank_two() {
        // Hand oracle: the 2x2 unfolding of delta_ij is the identity matrix,
        // whose two singular values are both 1.
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let tt = TensorTrain::from_dense(&t, 0.0).unwrap();
        assert_eq!(tt.ranks(), vec![1, 2, 1]);
    }

    #[test]
    fn zero_tolerance_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sizes in [vec![2, 3, 2], vec![4, 4], vec![2, 2, 2, 2, 2], vec![5]] {
            let t = random_dense(&mut rng, &sizes);
            let back = TensorTrain::from_dense(&t, 0.0).unwrap().to_dense().unwrap();
            for (a, b) in t.entries().iter().zip(back.entries()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn empty_tensor_is_rejected() {
        assert!(matches!(
            DenseTensor::new(vec![], vec![]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn single_core_train_expands_to_its_vector() {
        let core = Array3::from_shape_vec((1, 4, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let tt = TensorTrain::new(vec![core]).unwrap();
        let dense = tt.to_dense().unwrap();
        assert_eq!(dense.entries(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn all_ones_cores_expand_to_all_ones() {
        let cores = (0..3)
            .map(|_| Array3::from_elem((1, 2, 1), 1.0))
            .collect::<Vec<_>>();
        let tt = TensorTrain::new(cores).unwrap();
        let dense = tt.to_dense().unwrap();
        assert!(dense.entries().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn dense_guard_refuses_oversized_expansion() {
        let cores = (0..30)
            .map(|_| Array3::from_elem((1, 2, 1), 1.0))
            .collect::<Vec<_>>();
        let tt = TensorTrain::new(cores).unwrap();
        assert!(matches!(tt.to_dense(), Err(Error::Capacity(_))));
    }

    #[test]
    fn entry_of_rank_one_train_is_separable_product() {
        let tt = TensorTrain::from_rank_one(&[vec![2.0, 3.0], vec![5.0, 7.0]]).unwrap();
        assert_abs_diff_eq!(tt.entry(&[0, 1]).unwrap(), 14.0);
        assert_abs_diff_eq!(tt.entry(&[1, 0]).unwrap(), 15.0);
    }

    #[test]
    fn entry_matches_dense_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tt = random_tt(&mut rng, &[3, 2, 4, 2], 3);
        let dense = tt.to_dense().unwrap();
        for idx in dense.indices() {
            let direct = tt.entry(&idx).unwrap();
            let expanded = dense.get(&idx).unwrap();
            assert_abs_diff_eq!(direct, expanded, epsilon = 1e-12 * (1.0 + expanded.abs()));
        }
    }

    #[test]
    fn zero_core_annihilates_every_entry() {
        let mut cores = vec![
            Array3::from_elem((1, 2, 2), 1.0),
            Array3::zeros((2, 3, 2)),
            Array3::from_elem((2, 2, 1), 1.0),
        ];
        cores[0][[0, 1, 1]] = -2.0;
        let tt = TensorTrain::new(cores).unwrap();
        for idx in MultiIndexIter::new(vec![2, 3, 2]) {
            assert_eq!(tt.entry(&idx).unwrap(), 0.0);
        }
    }

    #[test]
    fn entry_bounds_are_checked() {
        let tt = TensorTrain::from_rank_one(&[vec![1.0, 2.0]]).unwrap();
        assert!(matches!(tt.entry(&[2]), Err(Error::Bounds(_))));
        assert!(matches!(tt.entry(&[0, 0]), Err(Error::Bounds(_))));
    }

    #[test]
    fn chain_of_identities_reduces_to_identity() {
        let mats: Vec<Array2<f64>> = (0..5).map(|_| Array2::eye(3)).collect();
        let prod = chain_reduce(&mats).unwrap();
        assert_eq!(prod, Array2::eye(3));
    }

    #[test]
    fn chain_reduce_matches_sequential_fold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dims = [2usize, 4, 3, 5, 2, 6, 3, 3, 4, 2];
        let mats: Vec<Array2<f64>> = dims
            .windows(2)
            .map(|w| {
                let mut m = Array2::zeros((w[0], w[1]));
                for v in m.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                m
            })
            .collect();
        let folded = mats[1..]
            .iter()
            .fold(mats[0].clone(), |acc, m| acc.dot(m));
        let reduced = chain_reduce(&mats).unwrap();
        for (a, b) in folded.iter().zip(reduced.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn singleton_chain_is_returned_unchanged() {
        let m = Array2::from_shape_vec((2, 3), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(chain_reduce(std::slice::from_ref(&m)).unwrap(), m);
    }

    #[test]
    fn chain_reduce_rejects_dimension_mismatch() {
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((4, 2));
        assert!(matches!(chain_reduce(&[a, b]), Err(Error::Shape(_))));
    }

    #[test]
    fn inner_of_unit_rank_one_trains_is_one() {
        let t = TensorTrain::from_rank_one(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(tt_inner(&t, &t).unwrap()[0], 1.0);
    }

    #[test]
    fn inner_of_orthogonal_trains_is_zero() {
        let a = TensorTrain::from_rank_one(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = TensorTrain::from_rank_one(&[vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_abs_diff_eq!(tt_inner(&a, &b).unwrap()[0], 0.0);
    }

    #[test]
    fn inner_matches_dense_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_tt(&mut rng, &[2, 2, 2, 2], 3);
        let b = random_tt(&mut rng, &[2, 2, 2, 2], 2);
        let da = a.to_dense().unwrap();
        let db = b.to_dense().unwrap();
        let expected: f64 = da
            .entries()
            .iter()
            .zip(db.entries())
            .map(|(x, y)| x * y)
            .sum();
        let got = tt_inner(&a, &b).unwrap()[0];
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10 * (1.0 + expected.abs()));
    }

    #[test]
    fn inner_rejects_mode_mismatch() {
        let a = TensorTrain::from_rank_one(&[vec![1.0, 0.0]]).unwrap();
        let b = TensorTrain::from_rank_one(&[vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(tt_inner(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn inner_with_trailing_output_mode_returns_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_tt(&mut rng, &[2, 2, 2], 2);
        let b = random_tt(&mut rng, &[2, 2, 2, 3], 2);
        let da = a.to_dense().unwrap();
        let db = b.to_dense().unwrap();
        let got = tt_inner(&a, &b).unwrap();
        assert_eq!(got.len(), 3);
        for (y, &g) in got.iter().enumerate() {
            let mut expected = 0.0;
            for idx in da.indices() {
                let mut full = idx.clone();
                full.push(y);
                expected += da.get(&idx).unwrap() * db.get(&full).unwrap();
            }
            assert_abs_diff_eq!(g, expected, epsilon = 1e-10 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn truncation_error_respects_frobenius_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for tol in [1e-8, 1e-4, 1e-2] {
            let t = random_dense(&mut rng, &[4, 4, 4, 4]);
            let tt = TensorTrain::from_dense(&t, tol).unwrap();
            let back = tt.to_dense().unwrap();
            let err: f64 = t
                .entries()
                .iter()
                .zip(back.entries())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                err <= tol * t.frobenius_norm() + 1e-12,
                "tol {tol}: error {err} exceeds budget {}",
                tol * t.frobenius_norm()
            );
        }
    }
}
