//! Model and distribution tensors, and the value tensor over routing words.
//!
//! A routing word assigns every feature one of two routes: `keep` (use the
//! explained instance's value) or `impute` (average over the background
//! distribution). The value tensor indexes the induced value function by
//! such words; its entry at a word equals `F_x(S)` for the word's keep-set
//! `S`. Words are carried as keep-set bitmasks, and in tensor form the
//! binary mode index is `0 = keep`, `1 = impute`.
//!
//! In tensor-train form the value tensor is assembled one feature at a
//! time: a per-feature router core is contracted with that feature's model
//! and distribution cores, so the bond rank never exceeds the product of
//! the model and distribution ranks. Joint (non-product) distributions are
//! supported; marginalization on the keep route falls out of summing the
//! distribution leg with unit weights.

use ndarray::{Array2, Array3};

use crate::game::SetFunction;
use crate::tt::{DenseTensor, TensorTrain};
use crate::{Error, Result, DEFAULT_DENSE_LIMIT};

/// Maximum feature count for dense routing-word tables (`2^n` entries).
pub const DENSE_WORD_CAP: usize = 24;

/// Mode indices of a routing word for a given keep-set mask.
pub fn word_modes(keep_mask: u32, n: usize) -> Vec<usize> {
    (0..n)
        .map(|i| if keep_mask >> i & 1 == 1 { 0 } else { 1 })
        .collect()
}

/// Keep-set mask of a routing word given as mode indices.
pub fn keep_mask_of(modes: &[usize]) -> u32 {
    modes
        .iter()
        .enumerate()
        .filter(|(_, &m)| m == 0)
        .map(|(i, _)| 1u32 << i)
        .sum()
}

#[derive(Debug, Clone)]
enum Form {
    Dense(DenseTensor),
    Tt(TensorTrain),
}

/// A model over a discrete domain: outputs in `R^{n_out}` indexed by one
/// discrete value per feature.
///
/// Dense form is a tensor of shape `(N_1, .., N_n, n_out)`; TT form is a
/// train with one core per feature plus a trailing output core.
#[derive(Debug, Clone)]
pub struct ModelTensor {
    domain: Vec<usize>,
    n_out: usize,
    form: Form,
}

impl ModelTensor {
    pub fn from_dense(dense: DenseTensor, n_out: usize) -> Result<Self> {
        let sizes = dense.mode_sizes();
        if sizes.len() < 2 || sizes[sizes.len() - 1] != n_out {
            return Err(Error::shape(format!(
                "model tensor modes {:?} do not end in an output mode of size {n_out}",
                sizes
            )));
        }
        Ok(ModelTensor {
            domain: sizes[..sizes.len() - 1].to_vec(),
            n_out,
            form: Form::Dense(dense),
        })
    }

    pub fn from_tt(tt: TensorTrain, n_out: usize) -> Result<Self> {
        let sizes = tt.mode_sizes();
        if sizes.len() < 2 || sizes[sizes.len() - 1] != n_out {
            return Err(Error::shape(format!(
                "model train modes {:?} do not end in an output mode of size {n_out}",
                sizes
            )));
        }
        Ok(ModelTensor {
            domain: sizes[..sizes.len() - 1].to_vec(),
            n_out,
            form: Form::Tt(tt),
        })
    }

    pub fn n_features(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn is_tt(&self) -> bool {
        matches!(self.form, Form::Tt(_))
    }

    pub fn as_tt(&self) -> Option<&TensorTrain> {
        match &self.form {
            Form::Tt(tt) => Some(tt),
            Form::Dense(_) => None,
        }
    }

    /// Dense entries, materializing a TT form under the given entry limit.
    pub fn to_dense_with_limit(&self, limit: usize) -> Result<DenseTensor> {
        match &self.form {
            Form::Dense(d) => Ok(d.clone()),
            Form::Tt(tt) => tt.to_dense_with_limit(limit),
        }
    }

    /// Model output vector at a domain point.
    pub fn outputs_at(&self, x: &[usize]) -> Result<Vec<f64>> {
        check_instance(&self.domain, x)?;
        let mut idx = x.to_vec();
        idx.push(0);
        match &self.form {
            Form::Dense(d) => (0..self.n_out)
                .map(|y| {
                    idx[self.domain.len()] = y;
                    d.get(&idx)
                })
                .collect(),
            Form::Tt(tt) => (0..self.n_out)
                .map(|y| {
                    idx[self.domain.len()] = y;
                    tt.entry(&idx)
                })
                .collect(),
        }
    }
}

/// Negative entries smaller than this are treated as float dust and
/// clamped to zero; anything more negative is rejected.
pub const MASS_DUST: f64 = 1e-14;

/// Tolerance on the total probability mass.
pub const MASS_TOLERANCE: f64 = 1e-10;

/// A background distribution over the same discrete domain as the model.
///
/// Dense form validates nonnegativity (up to [`MASS_DUST`], clamped) and
/// unit mass; TT form validates unit mass through a ones-contraction, since
/// entrywise checks would require materialization.
#[derive(Debug, Clone)]
pub struct DistributionTensor {
    domain: Vec<usize>,
    form: Form,
}

impl DistributionTensor {
    pub fn from_dense(dense: DenseTensor) -> Result<Self> {
        let mut entries = dense.entries().to_vec();
        let mut mass = 0.0;
        for v in entries.iter_mut() {
            if *v < -MASS_DUST {
                return Err(Error::invalid(format!(
                    "distribution entry {v} is negative beyond float dust"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
            mass += *v;
        }
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!(
                "distribution mass {mass} is not 1 within {MASS_TOLERANCE}"
            )));
        }
        let domain = dense.mode_sizes().to_vec();
        Ok(DistributionTensor {
            domain: domain.clone(),
            form: Form::Dense(DenseTensor::new(domain, entries)?),
        })
    }

    pub fn from_tt(tt: TensorTrain) -> Result<Self> {
        let mass = tt_total_mass(&tt);
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!(
                "distribution mass {mass} is not 1 within {MASS_TOLERANCE}"
            )));
        }
        Ok(DistributionTensor {
            domain: tt.mode_sizes(),
            form: Form::Tt(tt),
        })
    }

    /// Uniform distribution in dense form.
    pub fn uniform_dense(domain: Vec<usize>) -> Result<Self> {
        let total: usize = domain.iter().product();
        let dense = DenseTensor::new(domain, vec![1.0 / total as f64; total])?;
        Self::from_dense(dense)
    }

    /// Uniform distribution as a rank-1 train.
    pub fn uniform_tt(domain: Vec<usize>) -> Result<Self> {
        let factors: Vec<Vec<f64>> = domain
            .iter()
            .map(|&n| vec![1.0 / n as f64; n])
            .collect();
        Self::from_tt(TensorTrain::from_rank_one(&factors)?)
    }

    pub fn domain(&self) -> &[usize] {
        &self.domain
    }

    pub fn is_tt(&self) -> bool {
        matches!(self.form, Form::Tt(_))
    }

    pub fn as_tt(&self) -> Option<&TensorTrain> {
        match &self.form {
            Form::Tt(tt) => Some(tt),
            Form::Dense(_) => None,
        }
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<DenseTensor> {
        match &self.form {
            Form::Dense(d) => Ok(d.clone()),
            Form::Tt(tt) => tt.to_dense_with_limit(limit),
        }
    }
}

/// Total mass of a train: every mode contracted with the all-ones vector.
fn tt_total_mass(tt: &TensorTrain) -> f64 {
    let mut acc: Vec<f64> = vec![1.0];
    for core in tt.cores() {
        let (rl, n, rr) = core.dim();
        let mut next = vec![0.0; rr];
        for (a, &va) in acc.iter().enumerate().take(rl) {
            for i in 0..n {
                for (b, slot) in next.iter_mut().enumerate() {
                    *slot += va * core[[a, i, b]];
                }
            }
        }
        acc = next;
    }
    acc[0]
}

fn check_instance(domain: &[usize], x: &[usize]) -> Result<()> {
    if x.len() != domain.len() {
        return Err(Error::bounds(format!(
            "instance has {} coordinates, domain has {} features",
            x.len(),
            domain.len()
        )));
    }
    for (i, (&xi, &ni)) in x.iter().zip(domain).enumerate() {
        if xi >= ni {
            return Err(Error::bounds(format!(
                "coordinate {i} is {xi}, domain size is {ni}"
            )));
        }
    }
    Ok(())
}

fn check_same_domain(m: &ModelTensor, p: &DistributionTensor) -> Result<()> {
    if m.domain() != p.domain() {
        return Err(Error::shape(format!(
            "model domain {:?} differs from distribution domain {:?}",
            m.domain(),
            p.domain()
        )));
    }
    Ok(())
}

/// Router core for one feature: legs `(route, model index, distribution
/// index)` with `route 0 = keep`, `route 1 = impute`.
///
/// The keep slice pins the model index to the instance value and leaves the
/// distribution leg free (summing it marginalizes); the impute slice ties
/// the model index to the distribution sample.
pub fn build_router_core(x_i: usize, n_i: usize) -> Result<Array3<f64>> {
    if x_i >= n_i {
        return Err(Error::bounds(format!(
            "instance value {x_i} outside feature domain of size {n_i}"
        )));
    }
    let mut core = Array3::zeros((2, n_i, n_i));
    for p in 0..n_i {
        core[[0, x_i, p]] = 1.0;
        core[[1, p, p]] = 1.0;
    }
    Ok(core)
}

/// The value function `F_x(S) = E_{x' ~ P}[ M(x_S, x'_{S^c}) ]` as a
/// [`SetFunction`].
///
/// With dense inputs the full `2^n` table is computed by summing the
/// distribution over the imputed coordinates. With TT inputs the function
/// is lazily evaluated through per-word chain products and never
/// materializes anything exponential.
pub fn value_function_of(
    m: &ModelTensor,
    p: &DistributionTensor,
    x: &[usize],
) -> Result<SetFunction> {
    check_same_domain(m, p)?;
    check_instance(m.domain(), x)?;
    if m.is_tt() && p.is_tt() {
        let vt = build_value_tt(m, p, x)?;
        let n = m.n_features();
        let n_out = m.n_out();
        return Ok(SetFunction::from_fn(n, n_out, move |mask| {
            vt.entry_all_outputs(mask)
                .expect("word table lookup cannot fail after validation")
        }));
    }
    value_function_dense(m, p, x, DEFAULT_DENSE_LIMIT)
}

fn value_function_dense(
    m: &ModelTensor,
    p: &DistributionTensor,
    x: &[usize],
    limit: usize,
) -> Result<SetFunction> {
    let n = m.n_features();
    if n > 31 || (1usize << n) > limit {
        return Err(Error::capacity(format!(
            "dense value-function table over 2^{n} subsets exceeds the limit of {limit} entries"
        )));
    }
    let n_out = m.n_out();
    let model = m.to_dense_with_limit(limit)?;
    let dist = p.to_dense_with_limit(limit)?;

    // Row-major strides of the model tensor, output mode fastest.
    let mut stride = vec![0usize; n];
    let mut acc = n_out;
    for i in (0..n).rev() {
        stride[i] = acc;
        acc *= m.domain()[i];
    }

    let x_offsets: Vec<usize> = (0..n).map(|i| stride[i] * x[i]).collect();
    let mut table = vec![0.0; (1usize << n) * n_out];
    for (flat, point) in dist.indices().enumerate() {
        let prob = dist.entries()[flat];
        if prob == 0.0 {
            continue;
        }
        let point_offsets: Vec<usize> = (0..n).map(|i| stride[i] * point[i]).collect();
        for mask in 0..(1u32 << n) {
            let mut base = 0usize;
            for i in 0..n {
                base += if mask >> i & 1 == 1 {
                    x_offsets[i]
                } else {
                    point_offsets[i]
                };
            }
            let row = mask as usize * n_out;
            for y in 0..n_out {
                table[row + y] += prob * model.entries()[base + y];
            }
        }
    }
    SetFunction::from_table(n, n_out, table)
}

#[derive(Debug, Clone)]
enum ValueBacking {
    /// Table over `2^n` words and `n_out` outputs, row = keep mask.
    Dense(Vec<f64>),
    /// Train over `n` binary routing modes plus a trailing output mode.
    Tt(TensorTrain),
}

/// The value tensor for one explained instance: entries indexed by routing
/// word and output dimension.
///
/// Immutable once built; entry evaluation is concurrent-read safe.
#[derive(Debug, Clone)]
pub struct ValueTensor {
    n: usize,
    n_out: usize,
    backing: ValueBacking,
}

impl ValueTensor {
    pub fn n_features(&self) -> usize {
        self.n
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn is_tt(&self) -> bool {
        matches!(self.backing, ValueBacking::Tt(_))
    }

    /// The backing train (routing modes plus output mode), if TT-built.
    pub fn as_tt(&self) -> Option<&TensorTrain> {
        match &self.backing {
            ValueBacking::Tt(tt) => Some(tt),
            ValueBacking::Dense(_) => None,
        }
    }

    /// Bond ranks across the routing modes (unit boundaries included).
    pub fn ranks(&self) -> Vec<usize> {
        match &self.backing {
            ValueBacking::Tt(tt) => tt.ranks(),
            ValueBacking::Dense(_) => vec![1; self.n + 1],
        }
    }

    /// Entry at a routing word, one output.
    pub fn entry(&self, keep_mask: u32, y: usize) -> Result<f64> {
        if y >= self.n_out {
            return Err(Error::bounds(format!(
                "output index {y} out of range ({})",
                self.n_out
            )));
        }
        Ok(self.entry_all_outputs(keep_mask)?[y])
    }

    /// Entries at a routing word for every output dimension.
    pub fn entry_all_outputs(&self, keep_mask: u32) -> Result<Vec<f64>> {
        if (keep_mask as u64) >= (1u64 << self.n) {
            return Err(Error::bounds(format!(
                "word mask {keep_mask:#b} out of range for {} features",
                self.n
            )));
        }
        match &self.backing {
            ValueBacking::Dense(table) => {
                let row = keep_mask as usize * self.n_out;
                Ok(table[row..row + self.n_out].to_vec())
            }
            ValueBacking::Tt(tt) => {
                let cores = tt.cores();
                let mut acc: Vec<f64> = vec![1.0];
                for (i, core) in cores.iter().take(self.n).enumerate() {
                    let s = if keep_mask >> i & 1 == 1 { 0 } else { 1 };
                    let (rl, _, rr) = core.dim();
                    let mut next = vec![0.0; rr];
                    for (a, &va) in acc.iter().enumerate().take(rl) {
                        if va == 0.0 {
                            continue;
                        }
                        for (b, slot) in next.iter_mut().enumerate() {
                            *slot += va * core[[a, s, b]];
                        }
                    }
                    acc = next;
                }
                let out_core = &cores[self.n];
                let (rl, n_out, _) = out_core.dim();
                let mut out = vec![0.0; n_out];
                for (y, slot) in out.iter_mut().enumerate() {
                    for (r, &vr) in acc.iter().enumerate().take(rl) {
                        *slot += vr * out_core[[r, y, 0]];
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Dense value tensor: a table of `F_x(S(word))` over all `2^n` routing
/// words, built by summing the distribution over imputed coordinates.
pub fn build_value_dense(
    m: &ModelTensor,
    p: &DistributionTensor,
    x: &[usize],
) -> Result<ValueTensor> {
    build_value_dense_with_limit(m, p, x, DEFAULT_DENSE_LIMIT)
}

/// [`build_value_dense`] with an explicit cap on materialized entries,
/// covering both the word table and any train expansion it requires.
pub fn build_value_dense_with_limit(
    m: &ModelTensor,
    p: &DistributionTensor,
    x: &[usize],
    limit: usize,
) -> Result<ValueTensor> {
    let n = m.n_features();
    check_same_domain(m, p)?;
    check_instance(m.domain(), x)?;
    let f = value_function_dense(m, p, x, limit)?;
    let n_out = m.n_out();
    let mut table = Vec::with_capacity((1usize << n) * n_out);
    for mask in 0..(1u32 << n) {
        table.extend(f.eval(mask));
    }
    Ok(ValueTensor {
        n,
        n_out,
        backing: ValueBacking::Dense(table),
    })
}

/// TT value tensor: router cores contracted feature-by-feature with the
/// model and distribution trains.
///
/// Every bond rank of the result is the product of the model and
/// distribution bond ranks at that position.
pub fn build_value_tt(
    m: &ModelTensor,
    p: &DistributionTensor,
    x: &[usize],
) -> Result<ValueTensor> {
    check_same_domain(m, p)?;
    check_instance(m.domain(), x)?;
    let (model_tt, dist_tt) = match (m.as_tt(), p.as_tt()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::invalid(
                "TT value tensor needs both model and distribution in TT form",
            ))
        }
    };
    let n = m.n_features();
    let mut cores = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mc = &model_tt.cores()[i];
        let pc = &dist_tt.cores()[i];
        let (am, ni, bm) = mc.dim();
        let (ap, _, bp) = pc.dim();

        // Distribution leg summed freely: marginalization on the keep route.
        let mut p_marginal = Array2::<f64>::zeros((ap, bp));
        for v in 0..ni {
            for a in 0..ap {
                for b in 0..bp {
                    p_marginal[[a, b]] += pc[[a, v, b]];
                }
            }
        }

        let mut core = Array3::zeros((am * ap, 2, bm * bp));
        for a_m in 0..am {
            for a_p in 0..ap {
                let row = a_m * ap + a_p;
                for b_m in 0..bm {
                    for b_p in 0..bp {
                        let col = b_m * bp + b_p;
                        // keep: model pinned at x_i, distribution marginalized
                        core[[row, 0, col]] = mc[[a_m, x[i], b_m]] * p_marginal[[a_p, b_p]];
                        // impute: model index tied to the distribution sample
                        let mut tied = 0.0;
                        for v in 0..ni {
                            tied += mc[[a_m, v, b_m]] * pc[[a_p, v, b_p]];
                        }
                        core[[row, 1, col]] = tied;
                    }
                }
            }
        }
        cores.push(core);
    }
    // Distribution boundary is closed after mode n, so the trailing output
    // core is the model's output core unchanged.
    cores.push(model_tt.cores()[n].clone());
    let tt = TensorTrain::new(cores)?;
    Ok(ValueTensor {
        n,
        n_out: m.n_out(),
        backing: ValueBacking::Tt(tt),
    })
}
