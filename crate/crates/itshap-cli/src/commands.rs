//! The four commands: explain, verify, decompose, bench.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;

use itshap::engine::{
    benchmark, efficiency_residual, itshap_dense, itshap_tt, max_component_diff, Backend,
    BenchCase, InteractionReport, ItShapRequest, DEFAULT_RANK_CEILING,
};
use itshap::game::{self, SetFunction};
use itshap::tt::{DenseTensor, TensorTrain};
use itshap::value::{value_function_of, DistributionTensor, ModelTensor};

use crate::format::{
    subset_to_features, BenchConfigFile, ComponentOut, DenseTensorFile, ProblemFile, RanksOut,
    ResultFile, TensorSpec, TimingsOut, TtContainerFile,
};
use crate::CliError;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Parses a comma-separated 1-based instance and converts it to 0-based.
fn parse_instance(text: &str, domain: &[usize]) -> Result<Vec<usize>, CliError> {
    let raw: Vec<usize> = text
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Parse(format!("instance component {part:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if raw.len() != domain.len() {
        return Err(CliError::Domain(format!(
            "instance has {} components, domain has {} features",
            raw.len(),
            domain.len()
        )));
    }
    raw.iter()
        .zip(domain)
        .enumerate()
        .map(|(i, (&v, &n))| {
            if v == 0 || v > n {
                Err(CliError::Domain(format!(
                    "instance component {} is {v}, expected a 1-based value in 1..={n}",
                    i + 1
                )))
            } else {
                Ok(v - 1)
            }
        })
        .collect()
}

/// Converts both inputs to train form when the requested backend contracts
/// trains; dense runs use the inputs as given.
fn prepare_forms(
    backend: Backend,
    model: ModelTensor,
    dist: DistributionTensor,
    limit: usize,
) -> Result<(ModelTensor, DistributionTensor), CliError> {
    if backend == Backend::Dense {
        return Ok((model, dist));
    }
    let model = if model.is_tt() {
        model
    } else {
        let n_out = model.n_out();
        let dense = model.to_dense_with_limit(limit)?;
        ModelTensor::from_tt(TensorTrain::from_dense(&dense, 0.0)?, n_out)?
    };
    let dist = if dist.is_tt() {
        dist
    } else {
        let dense = dist.to_dense_with_limit(limit)?;
        DistributionTensor::from_tt(TensorTrain::from_dense(&dense, 0.0)?)?
    };
    Ok((model, dist))
}

fn result_file(report: &InteractionReport, instance: &[usize], residual: f64) -> ResultFile {
    let components = report
        .components()
        .iter()
        .map(|c| ComponentOut {
            subset: subset_to_features(c.subset),
            values: c.values.clone(),
        })
        .collect();
    let ranks = if report.backend() == Backend::Dense {
        None
    } else {
        Some(RanksOut {
            value: report.ranks.value_ranks.clone(),
            weight_max: report.ranks.max_weight_rank,
            contracted_max: report.ranks.max_contracted_rank,
            reduction_depth: report.ranks.reduction_depth,
        })
    };
    ResultFile {
        instance: instance.iter().map(|&v| v + 1).collect(),
        order: report.order(),
        backend: report.backend().as_str().to_string(),
        components,
        efficiency_residual: residual,
        cross_backend_max_diff: report.cross_backend_max_diff,
        ranks,
        timings_ms: TimingsOut {
            value_build: report.timings.value_build_ms,
            contraction: report.timings.contraction_ms,
        },
    }
}

/// `explain`: compute one interaction report and write it as JSON.
pub fn cmd_explain(
    problem: &Path,
    instance: &str,
    order: usize,
    backend: Backend,
    tol: f64,
    out: &Path,
    dense_limit: usize,
) -> Result<(), CliError> {
    if order == 0 {
        return Err(CliError::Parse("order must be at least 1".into()));
    }
    let file: ProblemFile = read_json(problem)?;
    let model = file.model_tensor()?;
    let dist = file.distribution_tensor()?;
    if order > model.n_features() {
        return Err(CliError::Domain(format!(
            "order {order} exceeds the {} features of the problem",
            model.n_features()
        )));
    }
    let x = parse_instance(instance, model.domain())?;
    let (model, dist) = prepare_forms(backend, model, dist, dense_limit)?;

    let mut request = ItShapRequest::new(&model, &dist, &x, order)
        .with_backend(backend)
        .with_tolerance(tol);
    request.dense_limit = dense_limit;
    let report = request.run()?;

    let f = value_function_of(&model, &dist, &x)?;
    let residual = efficiency_residual(&report, &f)?;

    let result = result_file(&report, &x, residual);
    let mut text = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    text.push('\n');
    write_text(out, &text)?;
    println!(
        "explained {} components at order {order} via {} backend; efficiency residual {residual:.3e}",
        result.components.len(),
        report.backend()
    );
    if let Some(diff) = report.cross_backend_max_diff {
        println!("cross-backend max diff {diff:.3e}");
    }
    Ok(())
}

struct BatteryOutcome {
    name: &'static str,
    worst: f64,
    tolerance: f64,
    checks: usize,
}

impl BatteryOutcome {
    fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

fn random_game(rng: &mut ChaCha8Rng, n: usize) -> SetFunction {
    let table: Vec<f64> = (0..(1usize << n)).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SetFunction::from_table(n, 1, table).expect("table sized to n")
}

/// `verify`: randomized oracle-equivalence batteries, exit 0 only if every
/// battery passes.
pub fn cmd_verify(
    problem: &Path,
    trials: usize,
    seed: u64,
    inject_fault: Option<&str>,
) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Parse("trials must be at least 1".into()));
    }
    if let Some(fault) = inject_fault {
        if fault != "efficiency" {
            return Err(CliError::Parse(format!(
                "unknown fault injection target {fault:?}"
            )));
        }
    }
    let file: ProblemFile = read_json(problem)?;
    let model = file.model_tensor()?;
    let dist = file.distribution_tensor()?;
    let n = model.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes = Vec::new();

    // Permutation definition against the closed form, on random games.
    {
        let mut worst = 0.0f64;
        let mut checks = 0;
        for t in 0..trials {
            let n_game = 3 + t % 4;
            let k = 1 + t % 3.min(n_game);
            let f = random_game(&mut rng, n_game);
            for &s in &game::interaction_sets(n_game, k) {
                let a = game::stii_permutation(&f, k, s)?[0];
                let b = game::stii_closed_form(&f, k, s)?[0];
                worst = worst.max((a - b).abs());
                checks += 1;
            }
        }
        outcomes.push(BatteryOutcome {
            name: "permutation-vs-closed",
            worst,
            tolerance: 1e-10,
            checks,
        });
    }

    // Dense and train backends on the problem itself.
    {
        let (m_tt, p_tt) = prepare_forms(Backend::Tt, model.clone(), dist.clone(), 1 << 24)?;
        let mut worst = 0.0f64;
        let mut checks = 0;
        let order = 2.min(n);
        for _ in 0..trials.min(10) {
            let x = itshap::synth::random_instance(&mut rng, model.domain());
            let tt = itshap_tt(&m_tt, &p_tt, &x, order, DEFAULT_RANK_CEILING)?;
            match itshap_dense(&model, &dist, &x, order, 1 << 24) {
                Ok(dense) => {
                    worst = worst.max(max_component_diff(&dense, &tt)?);
                    checks += tt.components().len();
                }
                Err(itshap::Error::Capacity(_)) => {
                    // Too large to enumerate; spot-check against the closed
                    // form through the lazily evaluated value function.
                    let f = value_function_of(&m_tt, &p_tt, &x)?;
                    let sets = game::interaction_sets(n, order);
                    for _ in 0..5 {
                        let s = sets[rng.gen_range(0..sets.len())];
                        let reference = game::stii_closed_form(&f, order, s)?[0];
                        let got = tt.get(s).expect("component present")[0];
                        worst = worst.max((got - reference).abs());
                        checks += 1;
                    }
                }
                Err(other) => return Err(other.into()),
            }
        }
        outcomes.push(BatteryOutcome {
            name: "backend-equivalence",
            worst,
            tolerance: 1e-9,
            checks,
        });
    }

    // Axiom battery on random game pairs.
    {
        let mut worst = 0.0f64;
        let mut checks = 0;
        for _ in 0..trials.div_ceil(10) {
            let f = random_game(&mut rng, 5);
            let g = random_game(&mut rng, 5);
            let report = game::axiom_suite(&f, &g, 2)?;
            worst = worst.max(report.max_violation());
            checks += report.entries().len();
        }
        outcomes.push(BatteryOutcome {
            name: "axiom-suite",
            worst,
            tolerance: 1e-9,
            checks,
        });
    }

    // Efficiency of reports on the problem, with the optional fault hook.
    {
        let (m_tt, p_tt) = prepare_forms(Backend::Tt, model.clone(), dist.clone(), 1 << 24)?;
        let mut worst = 0.0f64;
        let mut checks = 0;
        let order = 2.min(n);
        for _ in 0..trials.min(10) {
            let x = itshap::synth::random_instance(&mut rng, model.domain());
            let mut report = itshap_tt(&m_tt, &p_tt, &x, order, DEFAULT_RANK_CEILING)?;
            if inject_fault == Some("efficiency") {
                report = report.inject_component_error(1, 1.0);
            }
            let f = value_function_of(&m_tt, &p_tt, &x)?;
            let scale = 1.0 + f.eval(((1u64 << n) - 1) as u32)[0].abs();
            worst = worst.max(efficiency_residual(&report, &f)? / scale);
            checks += 1;
        }
        outcomes.push(BatteryOutcome {
            name: "efficiency",
            worst,
            tolerance: 1e-9,
            checks,
        });
    }

    let mut failed = Vec::new();
    for outcome in &outcomes {
        let status = if outcome.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: worst {:.3e} over {} checks (tol {:.0e})",
            outcome.name, outcome.worst, outcome.checks, outcome.tolerance
        );
        if !outcome.passed() {
            failed.push(outcome.name);
        }
    }
    if failed.is_empty() {
        println!("all {} batteries passed (seed {seed}, trials {trials})", outcomes.len());
        Ok(())
    } else {
        Err(CliError::VerifyFailed(failed.join(", ")))
    }
}

/// `decompose`: train decomposition of a dense tensor file (or of a problem
/// file's dense model), reporting ranks and reconstruction error.
pub fn cmd_decompose(input: &Path, tol: f64, out: &Path) -> Result<(), CliError> {
    if tol.is_nan() || tol < 0.0 {
        return Err(CliError::Parse(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let text = fs::read_to_string(input)
        .map_err(|e| CliError::Parse(format!("{}: {e}", input.display())))?;
    let dense = match serde_json::from_str::<DenseTensorFile>(&text) {
        Ok(file) => DenseTensor::new(file.mode_sizes, file.entries)
            .map_err(|e| CliError::Parse(e.to_string()))?,
        Err(_) => {
            let problem: ProblemFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Parse(format!("{}: {e}", input.display())))?;
            match &problem.model {
                TensorSpec::Dense(values) => {
                    let mut sizes = problem.domain.clone();
                    sizes.push(problem.n_outputs);
                    DenseTensor::new(sizes, values.clone())
                        .map_err(|e| CliError::Parse(e.to_string()))?
                }
                TensorSpec::Tt(_) => {
                    return Err(CliError::Parse(
                        "problem model is already in train form; nothing to decompose".into(),
                    ))
                }
            }
        }
    };

    let tt = TensorTrain::from_dense(&dense, tol)?;
    let back = tt.to_dense_with_limit(dense.len())?;
    let error: f64 = dense
        .entries()
        .iter()
        .zip(back.entries())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();

    let container = TtContainerFile::from_train(&tt);
    let mut text = serde_json::to_string_pretty(&container)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    text.push('\n');
    write_text(out, &text)?;
    println!(
        "ranks {:?}, reconstruction error {error:.3e} (Frobenius)",
        tt.ranks()
    );
    Ok(())
}

/// `bench`: time the three backends on configured problem sizes and write a
/// CSV table.
pub fn cmd_bench(config: &Path, out: &Path) -> Result<(), CliError> {
    let file: BenchConfigFile = read_json(config)?;
    let mut cases = Vec::with_capacity(file.cases.len());
    for case in &file.cases {
        if case.n == 0 || case.k == 0 || case.k > case.n || case.rank == 0 || case.mode_size < 2 {
            return Err(CliError::Parse(format!(
                "invalid case (n={}, k={}, rank={}, mode_size={})",
                case.n, case.k, case.rank, case.mode_size
            )));
        }
        cases.push(BenchCase {
            n: case.n,
            k: case.k,
            rank: case.rank,
            mode_size: case.mode_size,
            seed: case.seed,
        });
    }
    let rows = benchmark(&cases);
    let mut csv = String::from("n,k,backend,wall_ms,max_rank,components\n");
    for row in &rows {
        let wall = match row.wall_ms {
            Some(ms) => format!("{ms:.3}"),
            None => "skipped".to_string(),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.n, row.k, row.backend, wall, row.max_rank, row.components
        ));
    }
    write_text(out, &csv)?;
    println!("wrote {} benchmark rows to {}", rows.len(), out.display());
    Ok(())
}
