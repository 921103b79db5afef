//! Top-level interaction computation: contracting weight slices against the
//! value tensor on either backend, report assembly, and benchmarking.
//!
//! A report holds one component per interaction set of order up to `k`,
//! sorted by `(|S|, mask)`. The dense backend contracts explicit word
//! tables; the TT backend contracts the automaton-built weight trains
//! against the routed value train, set by set, with the per-set work spread
//! across worker threads. Both backends compute the same quantity; running
//! `Both` records their worst componentwise disagreement.

use std::time::Instant;

use rayon::prelude::*;

use crate::game::{interaction_sets, SetFunction};
use crate::tt::{reduction_depth, tt_inner};
use crate::value::{
    build_value_dense_with_limit, build_value_tt, value_function_of, DistributionTensor,
    ModelTensor, DENSE_WORD_CAP,
};
use crate::weight::{mwct_dense, mwct_tt};
use crate::{Error, Result, DEFAULT_DENSE_LIMIT};

/// Which contraction path computes the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Dense,
    Tt,
    Both,
}

impl Backend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Tt => "tt",
            Backend::Both => "both",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Default ceiling on the contracted bond rank product `r_wgt * r_val`.
pub const DEFAULT_RANK_CEILING: usize = 1 << 14;

/// One interaction component: a feature subset and its values per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub subset: u32,
    pub values: Vec<f64>,
}

/// Bond-rank bookkeeping for a TT-backed report.
#[derive(Debug, Clone, Default)]
pub struct RankInfo {
    /// Bond ranks of the value train across routing modes.
    pub value_ranks: Vec<usize>,
    /// Largest weight-train bond rank over all interaction sets.
    pub max_weight_rank: usize,
    /// Largest contracted bond rank product over all sets and bonds.
    pub max_contracted_rank: usize,
    /// Depth of the balanced reduction tree used per contraction.
    pub reduction_depth: usize,
}

/// Wall-clock phases of a report, in milliseconds.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub value_build_ms: f64,
    pub contraction_ms: f64,
}

/// Interaction values for every subset of order 1 through `k`.
#[derive(Debug, Clone)]
pub struct InteractionReport {
    n: usize,
    n_out: usize,
    order: usize,
    backend: Backend,
    components: Vec<Component>,
    pub ranks: RankInfo,
    pub timings: Timings,
    /// Worst componentwise disagreement when both backends ran.
    pub cross_backend_max_diff: Option<f64>,
}

impl InteractionReport {
    fn new(
        n: usize,
        n_out: usize,
        order: usize,
        backend: Backend,
        components: Vec<Component>,
    ) -> Result<Self> {
        let expected = interaction_sets(n, order);
        if components.len() != expected.len()
            || components
                .iter()
                .zip(&expected)
                .any(|(c, &m)| c.subset != m || c.values.len() != n_out)
        {
            return Err(Error::invalid(
                "report components must cover every interaction set exactly once",
            ));
        }
        Ok(InteractionReport {
            n,
            n_out,
            order,
            backend,
            components,
            ranks: RankInfo::default(),
            timings: Timings::default(),
            cross_backend_max_diff: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    /// Components sorted by `(|S|, mask)`.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn get(&self, subset: u32) -> Option<&[f64]> {
        self.components
            .iter()
            .find(|c| c.subset == subset)
            .map(|c| c.values.as_slice())
    }

    /// Singleton components keyed by feature index.
    pub fn first_order(&self) -> Vec<(usize, Vec<f64>)> {
        self.components
            .iter()
            .filter(|c| c.subset.count_ones() == 1)
            .map(|c| (c.subset.trailing_zeros() as usize, c.values.clone()))
            .collect()
    }

    /// Fault-injection hook for verification tooling: returns a copy with
    /// `delta` added to one component. Not part of any computation path.
    pub fn inject_component_error(&self, subset: u32, delta: f64) -> InteractionReport {
        let mut copy = self.clone();
        for c in copy.components.iter_mut() {
            if c.subset == subset {
                for v in c.values.iter_mut() {
                    *v += delta;
                }
            }
        }
        copy
    }
}

/// Worst componentwise difference between two reports of equal shape.
pub fn max_component_diff(a: &InteractionReport, b: &InteractionReport) -> Result<f64> {
    if a.n != b.n || a.order != b.order || a.n_out != b.n_out {
        return Err(Error::shape("reports have different shapes"));
    }
    let mut worst = 0.0f64;
    for (ca, cb) in a.components.iter().zip(&b.components) {
        for (x, y) in ca.values.iter().zip(&cb.values) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// A single explanation request; immutable while running.
#[derive(Debug, Clone)]
pub struct ItShapRequest<'a> {
    pub model: &'a ModelTensor,
    pub distribution: &'a DistributionTensor,
    pub instance: &'a [usize],
    pub order: usize,
    pub backend: Backend,
    /// Cross-check tolerance recorded by `Backend::Both` runs.
    pub tolerance: f64,
    /// Entry cap for dense materializations.
    pub dense_limit: usize,
    /// Cap on the contracted bond rank product.
    pub rank_ceiling: usize,
}

impl<'a> ItShapRequest<'a> {
    /// Request with the cross-checking backend on small problems and the TT
    /// backend beyond the permutation-friendly range.
    pub fn new(
        model: &'a ModelTensor,
        distribution: &'a DistributionTensor,
        instance: &'a [usize],
        order: usize,
    ) -> Self {
        let backend = if model.n_features() <= 10 {
            Backend::Both
        } else {
            Backend::Tt
        };
        ItShapRequest {
            model,
            distribution,
            instance,
            order,
            backend,
            tolerance: 1e-9,
            dense_limit: DEFAULT_DENSE_LIMIT,
            rank_ceiling: DEFAULT_RANK_CEILING,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_dense_limit(mut self, limit: usize) -> Self {
        self.dense_limit = limit;
        self
    }

    pub fn run(&self) -> Result<InteractionReport> {
        let n = self.model.n_features();
        if self.order == 0 || self.order > n {
            return Err(Error::invalid(format!(
                "order {} out of range for {n} features",
                self.order
            )));
        }
        match self.backend {
            Backend::Dense => itshap_dense(
                self.model,
                self.distribution,
                self.instance,
                self.order,
                self.dense_limit,
            ),
            Backend::Tt => itshap_tt(
                self.model,
                self.distribution,
                self.instance,
                self.order,
                self.rank_ceiling,
            ),
            Backend::Both => {
                let dense = itshap_dense(
                    self.model,
                    self.distribution,
                    self.instance,
                    self.order,
                    self.dense_limit,
                )?;
                let mut tt = itshap_tt(
                    self.model,
                    self.distribution,
                    self.instance,
                    self.order,
                    self.rank_ceiling,
                )?;
                tt.backend = Backend::Both;
                tt.cross_backend_max_diff = Some(max_component_diff(&dense, &tt)?);
                Ok(tt)
            }
        }
    }
}

fn tt_forms_required(m: &ModelTensor, p: &DistributionTensor) -> Result<()> {
    if m.as_tt().is_none() || p.as_tt().is_none() {
        return Err(Error::invalid(
            "TT backend needs model and distribution in TT form",
        ));
    }
    Ok(())
}

/// Dense-path interaction report: every component is a plain dot product of
/// a weight table with the value word table.
pub fn itshap_dense(
    model: &ModelTensor,
    distribution: &DistributionTensor,
    instance: &[usize],
    order: usize,
    dense_limit: usize,
) -> Result<InteractionReport> {
    let n = model.n_features();
    if n > DENSE_WORD_CAP {
        return Err(Error::capacity(format!(
            "dense backend refused for {n} features (cap {DENSE_WORD_CAP})"
        )));
    }
    let n_out = model.n_out();
    let started = Instant::now();
    let value = build_value_dense_with_limit(model, distribution, instance, dense_limit)?;
    let value_build_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    let words = 1u32 << n;
    let sets = interaction_sets(n, order);
    let components = sets
        .par_iter()
        .map(|&s| {
            let slice = mwct_dense(n, order, s)?;
            let mut values = vec![0.0; n_out];
            for u in 0..words {
                let coeff = slice.entry(u)?;
                if coeff == 0.0 {
                    continue;
                }
                let row = value.entry_all_outputs(u)?;
                for (slot, v) in values.iter_mut().zip(&row) {
                    *slot += coeff * v;
                }
            }
            Ok(Component { subset: s, values })
        })
        .collect::<Result<Vec<_>>>()?;
    let contraction_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut report = InteractionReport::new(n, n_out, order, Backend::Dense, components)?;
    report.timings = Timings {
        value_build_ms,
        contraction_ms,
    };
    Ok(report)
}

/// TT-path interaction report: one weight-train contraction per set, run in
/// parallel over sets, with balanced reductions inside each contraction.
pub fn itshap_tt(
    model: &ModelTensor,
    distribution: &DistributionTensor,
    instance: &[usize],
    order: usize,
    rank_ceiling: usize,
) -> Result<InteractionReport> {
    tt_forms_required(model, distribution)?;
    let n = model.n_features();
    let n_out = model.n_out();

    let started = Instant::now();
    let value = build_value_tt(model, distribution, instance)?;
    let value_build_ms = started.elapsed().as_secs_f64() * 1e3;
    let value_tt = value.as_tt().expect("TT-built value tensor");
    let value_ranks = value_tt.ranks();

    let started = Instant::now();
    let sets = interaction_sets(n, order);
    let per_set = sets
        .par_iter()
        .map(|&s| {
            let slice = mwct_tt(n, order, s)?;
            let weight_tt = slice.as_tt().expect("automaton slice is TT-backed");
            let weight_ranks = weight_tt.ranks();
            let mut max_product = 0usize;
            for (rw, rv) in weight_ranks.iter().zip(&value_ranks) {
                let product = rw * rv;
                if product > rank_ceiling {
                    return Err(Error::capacity(format!(
                        "contracted rank {product} for set {s:#b} exceeds ceiling \
                         {rank_ceiling} (weight {rw} x value {rv})"
                    )));
                }
                max_product = max_product.max(product);
            }
            let values = tt_inner(weight_tt, value_tt)?;
            let max_weight = weight_ranks.into_iter().max().unwrap_or(1);
            Ok((Component { subset: s, values }, max_weight, max_product))
        })
        .collect::<Result<Vec<_>>>()?;
    let contraction_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut max_weight_rank = 1;
    let mut max_contracted_rank = 1;
    let mut components = Vec::with_capacity(per_set.len());
    for (component, weight_rank, contracted) in per_set {
        max_weight_rank = max_weight_rank.max(weight_rank);
        max_contracted_rank = max_contracted_rank.max(contracted);
        components.push(component);
    }

    let mut report = InteractionReport::new(n, n_out, order, Backend::Tt, components)?;
    report.ranks = RankInfo {
        value_ranks,
        max_weight_rank,
        max_contracted_rank,
        reduction_depth: reduction_depth(n),
    };
    report.timings = Timings {
        value_build_ms,
        contraction_ms,
    };
    Ok(report)
}

/// Singleton components of a report, keyed by feature.
///
/// At order 1 these are exactly the per-feature attribution values.
pub fn extract_first_order(report: &InteractionReport) -> Vec<(usize, Vec<f64>)> {
    report.first_order()
}

/// Worst-output deviation of the report's component sum from
/// `F([n]) - F(empty)`.
pub fn efficiency_residual(report: &InteractionReport, f: &SetFunction) -> Result<f64> {
    if f.n() != report.n || f.n_out() != report.n_out {
        return Err(Error::shape("set function does not match the report shape"));
    }
    let full = ((1u64 << report.n) - 1) as u32;
    let mut total = vec![0.0; report.n_out];
    for c in report.components() {
        for (slot, v) in total.iter_mut().zip(&c.values) {
            *slot += v;
        }
    }
    let top = f.eval(full);
    let bottom = f.eval(0);
    let mut worst = 0.0f64;
    for y in 0..report.n_out {
        worst = worst.max((total[y] - (top[y] - bottom[y])).abs());
    }
    Ok(worst)
}

/// One benchmark configuration: a synthetic problem size.
#[derive(Debug, Clone, Copy)]
pub struct BenchCase {
    pub n: usize,
    pub k: usize,
    pub rank: usize,
    pub mode_size: usize,
    pub seed: u64,
}

impl BenchCase {
    pub fn new(n: usize, k: usize, rank: usize) -> Self {
        BenchCase {
            n,
            k,
            rank,
            mode_size: 2,
            seed: 7,
        }
    }
}

/// One measured backend run.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub backend: String,
    /// `None` when a capacity guard refused the run.
    pub wall_ms: Option<f64>,
    pub max_rank: usize,
    pub components: usize,
    /// Work proxy: value-function evaluations (enumeration) or contracted
    /// matrix entries (tensor paths).
    pub work: u64,
}

/// Repeats short measurements until the total wall time is trustworthy.
///
/// One warm-up run, then the repetition count is sized for ~25 ms per
/// batch and the best of two batches is taken, which discards one-sided
/// scheduler noise.
fn time_adaptive(mut run: impl FnMut()) -> f64 {
    run();
    let started = Instant::now();
    run();
    let first = started.elapsed().as_secs_f64() * 1e3;
    if first >= 50.0 {
        return first;
    }
    let reps = ((25.0 / first.max(0.001)).ceil() as usize).clamp(3, 256);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let started = Instant::now();
        for _ in 0..reps {
            run();
        }
        best = best.min(started.elapsed().as_secs_f64() * 1e3 / reps as f64);
    }
    best
}

/// Times the three backends on synthetic problems.
///
/// Per case: `enumeration` runs the closed-form subset sums over a
/// pre-tabulated value function; `dense` runs the full dense contraction
/// pipeline; `tt` runs the train contraction pipeline. Guard-refused runs
/// produce rows with no wall time instead of failing the whole table.
pub fn benchmark(cases: &[BenchCase]) -> Vec<BenchRow> {
    use rand::SeedableRng;
    let mut rows = Vec::with_capacity(cases.len() * 3);
    for case in cases {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(case.seed ^ case.n as u64);
        let domain = vec![case.mode_size; case.n];
        let model = crate::synth::random_tt_model(&mut rng, &domain, 1, case.rank);
        let dist = crate::synth::random_tt_distribution(&mut rng, &domain, 1);
        let x = crate::synth::random_instance(&mut rng, &domain);
        let sets = interaction_sets(case.n, case.k);

        // Enumeration: closed-form sums over a table built outside the clock.
        let enumeration = value_function_of(&model, &dist, &x)
            .and_then(|f| f.tabulate())
            .map(|table| {
                let wall = time_adaptive(|| {
                    for &s in &sets {
                        let v = crate::game::stii_closed_form(&table, case.k, s)
                            .expect("validated arguments");
                        std::hint::black_box(v);
                    }
                });
                (wall, (sets.len() as u64) << case.n)
            });
        rows.push(match enumeration {
            Ok((wall, work)) => BenchRow {
                n: case.n,
                k: case.k,
                backend: "enumeration".into(),
                wall_ms: Some(wall),
                max_rank: 1,
                components: sets.len(),
                work,
            },
            Err(_) => BenchRow {
                n: case.n,
                k: case.k,
                backend: "enumeration".into(),
                wall_ms: None,
                max_rank: 1,
                components: sets.len(),
                work: 0,
            },
        });

        // Dense contraction pipeline.
        let dense_probe = itshap_dense(&model, &dist, &x, case.k, DEFAULT_DENSE_LIMIT);
        rows.push(match dense_probe {
            Ok(_) => {
                let wall = time_adaptive(|| {
                    let r = itshap_dense(&model, &dist, &x, case.k, DEFAULT_DENSE_LIMIT)
                        .expect("probe run succeeded");
                    std::hint::black_box(r);
                });
                BenchRow {
                    n: case.n,
                    k: case.k,
                    backend: "dense".into(),
                    wall_ms: Some(wall),
                    max_rank: 1,
                    components: sets.len(),
                    work: (sets.len() as u64) << case.n,
                }
            }
            Err(_) => BenchRow {
                n: case.n,
                k: case.k,
                backend: "dense".into(),
                wall_ms: None,
                max_rank: 1,
                components: sets.len(),
                work: 0,
            },
        });

        // Train contraction pipeline.
        let tt_probe = itshap_tt(&model, &dist, &x, case.k, DEFAULT_RANK_CEILING);
        rows.push(match tt_probe {
            Ok(report) => {
                let wall = time_adaptive(|| {
                    let r = itshap_tt(&model, &dist, &x, case.k, DEFAULT_RANK_CEILING)
                        .expect("probe run succeeded");
                    std::hint::black_box(r);
                });
                let rank = report.ranks.max_contracted_rank;
                BenchRow {
                    n: case.n,
                    k: case.k,
                    backend: "tt".into(),
                    wall_ms: Some(wall),
                    max_rank: rank,
                    components: sets.len(),
                    work: sets.len() as u64 * case.n as u64 * (rank * rank) as u64,
                }
            }
            Err(_) => BenchRow {
                n: case.n,
                k: case.k,
                backend: "tt".into(),
                wall_ms: None,
                max_rank: 0,
                components: sets.len(),
                work: 0,
            },
        });
    }
    rows
}

/// Timing of the per-set loop on one thread versus the default pool.
#[derive(Debug, Clone)]
pub struct SpeedupReport {
    pub threads: usize,
    pub serial_ms: f64,
    pub parallel_ms: f64,
}

impl SpeedupReport {
    pub fn speedup(&self) -> f64 {
        if self.parallel_ms > 0.0 {
            self.serial_ms / self.parallel_ms
        } else {
            1.0
        }
    }
}

/// Measures the parallel speedup of the TT per-set loop.
pub fn measure_parallel_speedup(
    model: &ModelTensor,
    distribution: &DistributionTensor,
    instance: &[usize],
    order: usize,
) -> Result<SpeedupReport> {
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let started = Instant::now();
    single.install(|| itshap_tt(model, distribution, instance, order, DEFAULT_RANK_CEILING))?;
    let serial_ms = started.elapsed().as_secs_f64() * 1e3;

    let started = Instant::now();
    itshap_tt(model, distribution, instance, order, DEFAULT_RANK_CEILING)?;
    let parallel_ms = started.elapsed().as_secs_f64() * 1e3;

    Ok(SpeedupReport {
        threads: rayon::current_num_threads(),
        serial_ms,
        parallel_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::game;
    use crate::synth;
    use crate::value::DistributionTensor;

    fn xor_setup() -> (ModelTensor, DistributionTensor) {
        let model = synth::xor_model_dense();
        let dist = DistributionTensor::uniform_dense(vec![2, 2]).unwrap();
        (model, dist)
    }

    #[test]
    fn dense_path_matches_closed_form_of_induced_game() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for n in [3usize, 5] {
            let domain = vec![2; n];
            let model = synth::random_dense_model(&mut rng, &domain, 2);
            let dist = synth::random_dense_distribution(&mut rng, &domain);
            let x = synth::random_instance(&mut rng, &domain);
            for k in 1..=2 {
                let report = itshap_dense(&model, &dist, &x, k, DEFAULT_DENSE_LIMIT).unwrap();
                let f = value_function_of(&model, &dist, &x).unwrap();
                for c in report.components() {
                    let want = game::stii_closed_form(&f, k, c.subset).unwrap();
                    for (got, want) in c.values.iter().zip(&want) {
                        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn xor_first_order_attributions_are_symmetric() {
        let (model, dist) = xor_setup();
        let report = itshap_dense(&model, &dist, &[1, 1], 1, DEFAULT_DENSE_LIMIT).unwrap();
        let phi: Vec<f64> = report.components().iter().map(|c| c.values[0]).collect();
        assert_abs_diff_eq!(phi[0], phi[1], epsilon = 1e-14);
        assert_abs_diff_eq!(phi[0], -0.25, epsilon = 1e-14);
    }

    #[test]
    fn xor_pair_interaction_matches_permutation_oracle() {
        // Frozen from the permutation definition at n=2: every ordering
        // leaves the empty context, so the pair component is
        // F({1,2}) - F({1}) - F({2}) + F(0) = 0 - 0.5 - 0.5 + 0.5 = -0.5.
        let (model, dist) = xor_setup();
        let f = value_function_of(&model, &dist, &[1, 1]).unwrap();
        let oracle = game::stii_permutation(&f, 2, 0b11).unwrap()[0];
        assert_abs_diff_eq!(oracle, -0.5, epsilon = 1e-14);

        let report = itshap_dense(&model, &dist, &[1, 1], 2, DEFAULT_DENSE_LIMIT).unwrap();
        assert_abs_diff_eq!(report.get(0b11).unwrap()[0], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn additive_models_have_no_pair_components() {
        // Sum of the two features, encoded densely.
        let dense = crate::tt::DenseTensor::from_fn(vec![2, 2, 1], |idx| {
            idx[0] as f64 + idx[1] as f64
        })
        .unwrap();
        let model = ModelTensor::from_dense(dense, 1).unwrap();
        let dist = DistributionTensor::uniform_dense(vec![2, 2]).unwrap();
        let report = itshap_dense(&model, &dist, &[1, 0], 2, DEFAULT_DENSE_LIMIT).unwrap();
        assert_abs_diff_eq!(report.get(0b11).unwrap()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tt_matches_dense_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(103);
        for n in [4usize, 6, 8] {
            let domain = vec![2; n];
            let model = synth::random_tt_model(&mut rng, &domain, 2, 2);
            let dist = synth::random_tt_distribution(&mut rng, &domain, 2);
            let x = synth::random_instance(&mut rng, &domain);
            let dense = itshap_dense(&model, &dist, &x, 2, DEFAULT_DENSE_LIMIT).unwrap();
            let tt = itshap_tt(&model, &dist, &x, 2, DEFAULT_RANK_CEILING).unwrap();
            assert!(max_component_diff(&dense, &tt).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn rank_one_problem_contracted_rank_equals_weight_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(107);
        let domain = vec![2; 6];
        let model = synth::random_tt_model(&mut rng, &domain, 1, 1);
        let dist = synth::random_tt_distribution(&mut rng, &domain, 1);
        let x = synth::random_instance(&mut rng, &domain);
        let report = itshap_tt(&model, &dist, &x, 2, DEFAULT_RANK_CEILING).unwrap();
        assert_eq!(
            report.ranks.max_contracted_rank,
            report.ranks.max_weight_rank
        );
    }

    #[test]
    fn contracted_rank_respects_the_product_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(109);
        let domain = vec![2; 7];
        let model = synth::random_tt_model(&mut rng, &domain, 1, 3);
        let dist = synth::random_tt_distribution(&mut rng, &domain, 2);
        let x = synth::random_instance(&mut rng, &domain);
        let report = itshap_tt(&model, &dist, &x, 2, DEFAULT_RANK_CEILING).unwrap();
        let max_value_rank = report.ranks.value_ranks.iter().max().copied().unwrap();
        assert!(
            report.ranks.max_contracted_rank
                <= report.ranks.max_weight_rank * max_value_rank
        );
    }

    #[test]
    fn rank_ceiling_errors_with_diagnostic() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let domain = vec![2; 8];
        let model = synth::random_tt_model(&mut rng, &domain, 1, 3);
        let dist = synth::random_tt_distribution(&mut rng, &domain, 2);
        let x = synth::random_instance(&mut rng, &domain);
        match itshap_tt(&model, &dist, &x, 2, 4) {
            Err(Error::Capacity(msg)) => assert!(msg.contains("ceiling")),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn first_order_extraction_is_the_shapley_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let domain = vec![2; 5];
        let model = synth::random_dense_model(&mut rng, &domain, 1);
        let dist = synth::random_dense_distribution(&mut rng, &domain);
        let x = synth::random_instance(&mut rng, &domain);
        let report = itshap_dense(&model, &dist, &x, 1, DEFAULT_DENSE_LIMIT).unwrap();
        let f = value_function_of(&model, &dist, &x).unwrap();
        let firsts = extract_first_order(&report);
        assert_eq!(firsts.len(), 5);
        for (i, values) in firsts {
            let phi = game::shapley_value(&f, i).unwrap();
            assert_abs_diff_eq!(values[0], phi[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn additive_model_singletons_agree_across_orders() {
        let dense = crate::tt::DenseTensor::from_fn(vec![2, 2, 2, 1], |idx| {
            idx[0] as f64 - 2.0 * idx[1] as f64 + 0.5 * idx[2] as f64
        })
        .unwrap();
        let model = ModelTensor::from_dense(dense, 1).unwrap();
        let dist = DistributionTensor::uniform_dense(vec![2, 2, 2]).unwrap();
        let x = [1, 1, 0];
        let first = itshap_dense(&model, &dist, &x, 1, DEFAULT_DENSE_LIMIT).unwrap();
        let second = itshap_dense(&model, &dist, &x, 2, DEFAULT_DENSE_LIMIT).unwrap();
        for (i, values) in extract_first_order(&second) {
            let reference = &extract_first_order(&first)[i].1;
            assert_abs_diff_eq!(values[0], reference[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn efficiency_residual_is_small_and_reacts_to_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let domain = vec![2; 5];
        let model = synth::random_dense_model(&mut rng, &domain, 1);
        let dist = synth::random_dense_distribution(&mut rng, &domain);
        let x = synth::random_instance(&mut rng, &domain);
        let report = itshap_dense(&model, &dist, &x, 2, DEFAULT_DENSE_LIMIT).unwrap();
        let f = value_function_of(&model, &dist, &x).unwrap();
        let clean = efficiency_residual(&report, &f).unwrap();
        assert!(clean <= 1e-9 * (1.0 + f.eval(0b11111)[0].abs()));

        let corrupted = report.inject_component_error(0b00011, 1.0);
        let residual = efficiency_residual(&corrupted, &f).unwrap();
        assert_abs_diff_eq!(residual, 1.0 + clean, epsilon = 1e-9);
    }

    #[test]
    fn constant_model_yields_zero_residual() {
        let dense = crate::tt::DenseTensor::new(vec![2, 2, 1], vec![3.0; 4]).unwrap();
        let model = ModelTensor::from_dense(dense, 1).unwrap();
        let dist = DistributionTensor::uniform_dense(vec![2, 2]).unwrap();
        let report = itshap_dense(&model, &dist, &[0, 0], 2, DEFAULT_DENSE_LIMIT).unwrap();
        let f = value_function_of(&model, &dist, &[0, 0]).unwrap();
        assert_abs_diff_eq!(efficiency_residual(&report, &f).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_scaling_scales_components_and_keeps_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let domain = vec![2; 5];
        let model = synth::random_dense_model(&mut rng, &domain, 1);
        let scaled_dense = {
            let dense = model.to_dense_with_limit(1 << 20).unwrap();
            let entries: Vec<f64> = dense.entries().iter().map(|v| 3.0 * v).collect();
            crate::tt::DenseTensor::new(dense.mode_sizes().to_vec(), entries).unwrap()
        };
        let scaled = ModelTensor::from_dense(scaled_dense, 1).unwrap();
        let dist = synth::random_dense_distribution(&mut rng, &domain);
        let x = synth::random_instance(&mut rng, &domain);
        let base = itshap_dense(&model, &dist, &x, 2, DEFAULT_DENSE_LIMIT).unwrap();
        let tripled = itshap_dense(&scaled, &dist, &x, 2, DEFAULT_DENSE_LIMIT).unwrap();
        let rank_of = |r: &InteractionReport| {
            let mut order: Vec<u32> = r.components().iter().map(|c| c.subset).collect();
            order.sort_by(|&a, &b| {
                let va = r.get(a).unwrap()[0].abs();
                let vb = r.get(b).unwrap()[0].abs();
                vb.partial_cmp(&va).unwrap().then(a.cmp(&b))
            });
            order
        };
        for c in base.components() {
            assert_abs_diff_eq!(
                3.0 * c.values[0],
                tripled.get(c.subset).unwrap()[0],
                epsilon = 1e-10
            );
        }
        assert_eq!(rank_of(&base), rank_of(&tripled));
    }

    #[test]
    fn both_backend_records_cross_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let domain = vec![2; 4];
        let model = synth::random_tt_model(&mut rng, &domain, 1, 2);
        let dist = synth::random_tt_distribution(&mut rng, &domain, 1);
        let x = synth::random_instance(&mut rng, &domain);
        let report = ItShapRequest::new(&model, &dist, &x, 2).run().unwrap();
        let diff = report.cross_backend_max_diff.expect("both ran");
        assert!(diff <= 1e-9, "cross-backend diff {diff}");
    }

    #[test]
    fn empty_benchmark_is_an_empty_table() {
        assert!(benchmark(&[]).is_empty());
    }

    #[test]
    fn benchmark_emits_three_rows_per_case() {
        let rows = benchmark(&[BenchCase::new(4, 2, 2)]);
        assert_eq!(rows.len(), 3);
        let backends: Vec<&str> = rows.iter().map(|r| r.backend.as_str()).collect();
        assert_eq!(backends, vec!["enumeration", "dense", "tt"]);
        assert!(rows.iter().all(|r| r.wall_ms.is_some()));
        assert!(rows.iter().all(|r| r.components == 10));
    }

    #[test]
    fn zero_order_requests_are_rejected() {
        let (model, dist) = xor_setup();
        let request = ItShapRequest::new(&model, &dist, &[0, 0], 0);
        assert!(matches!(request.run(), Err(Error::InvalidInput(_))));
    }
}
