use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ufl_doubling::geometry::{ufl_cost, PointSet, UflSolution};
use ufl_doubling::hierarchy::build_hierarchy;
use ufl_doubling::harness::{
    generate_dataset, run_dimred_experiment, run_property_suite, run_ptas_experiment, DatasetKind,
    DatasetSpec, ExperimentSpec, SuiteOptions,
};
use ufl_doubling::io::{read_points, solution_csv, to_binary, to_text};
use ufl_doubling::partition::{bottom_up_partition, check_invariants};
use ufl_doubling::projection::sample_map;
use ufl_doubling::ptas::{fallback_safety_violations, ptas_discrete, ptas_euclidean, trace_jsonl, PtasConfig};
use ufl_doubling::refine::eliminate_badly_cut;
use ufl_doubling::rng::{derive_seed, stream};
use ufl_doubling::solvers::{
    approx_ufl, approx_ufl_ids, optimal_discrete_facilities, optimal_ufl_clustering,
    weiszfeld_1median,
};

#[derive(Parser)]
#[command(name = "ufl", version, about = "Uniform facility location on doubling point sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PtasArgs {
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    ddim: f64,
    #[arg(long, default_value_t = 32.0)]
    kappa_cap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long, default_value_t = 1.0)]
    c2: f64,
    #[arg(long, default_value_t = 2.0)]
    c3: f64,
    #[arg(long, default_value_t = 4.0)]
    c4: f64,
    /// Certified factor of the constant-factor solver.
    #[arg(long, default_value_t = 6.0)]
    alpha: f64,
    /// Largest instance handed to the exact oracle.
    #[arg(long, default_value_t = 12)]
    enum_threshold: usize,
    /// Fold the last part into the one emitted before it.
    #[arg(long)]
    merge_last_two: bool,
}

impl PtasArgs {
    fn config(&self) -> Result<PtasConfig> {
        let mut cfg = PtasConfig {
            eps: self.eps,
            ddim: self.ddim,
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            c4: self.c4,
            kappa_cap: self.kappa_cap,
            seed: self.seed,
            merge_last_two: self.merge_last_two,
            ..PtasConfig::default()
        };
        cfg.solver.alpha = self.alpha;
        cfg.solver.enum_threshold = self.enum_threshold;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, default_value = "subspace")]
    kind: DatasetKind,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    intrinsic_dim: usize,
    #[arg(long, default_value_t = 4.0)]
    scale: f64,
    #[arg(long, default_value_t = 3)]
    blobs: usize,
}

impl DataArgs {
    fn spec(&self, seed: u64) -> DatasetSpec {
        DatasetSpec {
            kind: self.kind,
            n: self.n,
            d: self.d,
            intrinsic_dim: self.intrinsic_dim,
            scale: self.scale,
            blobs: self.blobs,
            seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Constant-factor solution with facilities at input points.
    Approx,
    /// Exact optimum with facilities anywhere.
    Oracle,
    /// Exact optimum with facilities at input points.
    DiscreteOracle,
    /// The Euclidean approximation scheme.
    Ptas,
    /// The approximation scheme with facilities at input points.
    Discrete,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Dimred,
    Ptas,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Gen {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        binary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and write the solution CSV.
    Solve {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "ptas")]
        method: Method,
        #[command(flatten)]
        ptas: PtasArgs,
        /// Per-part trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project a point set with a random linear map.
    Reduce {
        input: PathBuf,
        /// Target dimension; derived from the parameters when absent.
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        ptas: PtasArgs,
        #[arg(long)]
        binary: bool,
        /// Also save the map.
        #[arg(long)]
        map_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the low-value partition and write it as CSV.
    Partition {
        input: PathBuf,
        #[command(flatten)]
        ptas: PtasArgs,
        /// Move log of the refinement.
        #[arg(long)]
        moves: Option<PathBuf>,
        /// Decomposition dump.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded experiment and write per-trial CSV rows.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ptas: PtasArgs,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Override the target dimension.
        #[arg(long)]
        m: Option<usize>,
        /// Summary CSV; printed to stdout when absent.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suite and write a JSON report.
    Verify {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        ptas: PtasArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        mc_seeds: usize,
        #[arg(long, default_value_t = 2000)]
        cut_seeds: usize,
        #[arg(long, default_value_t = 10_000)]
        tail_seeds: usize,
        #[arg(long, default_value_t = 200)]
        size_seeds: usize,
        /// Break the first hierarchy on purpose.
        #[arg(long)]
        corrupt_hierarchy: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn oracle_solution(points: &PointSet, cfg: &PtasConfig) -> Result<UflSolution> {
    let (_, clusters) = optimal_ufl_clustering(points, &cfg.solver)?;
    let facilities = clusters
        .iter()
        .map(|c| Ok(weiszfeld_1median(&points.rows(c), &cfg.solver)?.center))
        .collect::<Result<Vec<_>>>()?;
    Ok(ufl_cost(points, &facilities)?)
}

fn solve(
    input: &Path,
    method: Method,
    cfg: &PtasConfig,
    trace: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    let points = read_points(input)?;
    let mut ok = true;
    let solution = match method {
        Method::Approx => approx_ufl(&points)?,
        Method::Oracle => oracle_solution(&points, cfg)?,
        Method::DiscreteOracle => {
            let (_, ids) = optimal_discrete_facilities(&points)?;
            ufl_cost(&points, &points.rows(&ids))?
        }
        Method::Ptas => {
            let run = ptas_euclidean(&points, cfg)?;
            let violations = fallback_safety_violations(&run);
            for v in &violations {
                eprintln!("check failed: {v}");
            }
            ok = violations.is_empty();
            if let Some(path) = trace {
                emit(Some(path), trace_jsonl(&run.trace).as_bytes())?;
            }
            run.solution
        }
        Method::Discrete => {
            let run = ptas_discrete(&points, cfg)?;
            if let Some(path) = trace {
                emit(Some(path), trace_jsonl(&run.trace).as_bytes())?;
            }
            run.solution.to_ufl_solution(&points)?
        }
    };
    ok &= solution.is_consistent(&points);
    emit(out, solution_csv(&points, &solution).as_bytes())?;
    eprintln!(
        "facilities {} connection {} total {}",
        solution.facilities.len(),
        solution.connection_cost,
        solution.total
    );
    Ok(ok)
}

fn partition(
    input: &Path,
    cfg: &PtasConfig,
    moves: Option<&Path>,
    dump: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    let points = read_points(input)?;
    let all: Vec<usize> = (0..points.len()).collect();
    let h = build_hierarchy(&points, derive_seed(cfg.seed, stream::HIERARCHY, 0))?;
    let f0 = approx_ufl_ids(&points, &all)?.facility_map();
    let t = eliminate_badly_cut(&points, &h, &f0, cfg.cut_params());
    let pcfg = cfg.partition_config();
    let lambda = bottom_up_partition(&h, &t, pcfg, |ids| Ok(approx_ufl_ids(&points, ids)?.total))?;
    if let Some(path) = moves {
        emit(Some(path), t.moves_csv().as_bytes())?;
    }
    if let Some(path) = dump {
        emit(Some(path), h.dump().as_bytes())?;
    }
    emit(out, lambda.to_csv().as_bytes())?;
    let report = check_invariants(&lambda, points.len(), pcfg);
    eprintln!("parts {} holes {}", lambda.len(), report.total_holes);
    Ok(report.is_clean(lambda.len()))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen {
            data,
            seed,
            binary,
            out,
        } => {
            let points = generate_dataset(&data.spec(seed))?.points;
            let bytes = if binary {
                to_binary(&points)
            } else {
                to_text(&points).into_bytes()
            };
            emit(out.as_deref(), &bytes)?;
            Ok(true)
        }
        Command::Solve {
            input,
            method,
            ptas,
            trace,
            out,
        } => solve(&input, method, &ptas.config()?, trace.as_deref(), out.as_deref()),
        Command::Reduce {
            input,
            m,
            ptas,
            binary,
            map_out,
            out,
        } => {
            let cfg = ptas.config()?;
            let points = read_points(&input)?;
            let m = match m {
                Some(m) => m,
                None => cfg.target_dim()?,
            };
            let map = sample_map(points.dim(), m, derive_seed(cfg.seed, stream::PROJECTION, 0))?;
            let projected = map.apply(&points)?;
            if let Some(path) = map_out {
                emit(Some(&path), &map.to_bytes())?;
            }
            let bytes = if binary {
                to_binary(&projected)
            } else {
                to_text(&projected).into_bytes()
            };
            emit(out.as_deref(), &bytes)?;
            Ok(true)
        }
        Command::Partition {
            input,
            ptas,
            moves,
            dump,
            out,
        } => partition(&input, &ptas.config()?, moves.as_deref(), dump.as_deref(), out.as_deref()),
        Command::Experiment {
            which,
            data,
            ptas,
            trials,
            delta,
            m,
            summary,
            out,
        } => {
            let cfg = ptas.config()?;
            let spec = ExperimentSpec {
                dataset: data.spec(0),
                trials,
                seed: cfg.seed,
                delta,
                ptas: cfg,
                target_dim: m,
            };
            let (rows, summary_csv, passed) = match which {
                Experiment::Dimred => {
                    let r = run_dimred_experiment(&spec)?;
                    (r.to_csv(), r.summary_csv(), r.passed())
                }
                Experiment::Ptas => {
                    let r = run_ptas_experiment(&spec)?;
                    (r.to_csv(), r.summary_csv(), r.passed())
                }
            };
            emit(out.as_deref(), rows.as_bytes())?;
            match summary {
                Some(path) => emit(Some(&path), summary_csv.as_bytes())?,
                None if out.is_some() => print!("{summary_csv}"),
                None => eprint!("{summary_csv}"),
            }
            Ok(passed)
        }
        Command::Verify {
            data,
            ptas,
            trials,
            mc_seeds,
            cut_seeds,
            tail_seeds,
            size_seeds,
            corrupt_hierarchy,
            out,
        } => {
            let cfg = ptas.config()?;
            let spec = ExperimentSpec {
                dataset: data.spec(0),
                trials,
                seed: cfg.seed,
                ptas: cfg,
                ..ExperimentSpec::default()
            };
            let opts = SuiteOptions {
                mc_seeds,
                cut_seeds,
                tail_seeds,
                size_seeds,
                corrupt_hierarchy,
                ..SuiteOptions::default()
            };
            let report = run_property_suite(&spec, &opts)?;
            for p in report.properties.iter().filter(|p| !p.pass) {
                eprintln!("{} failed: measured {} bound {}", p.name, p.measured, p.bound);
            }
            emit(out.as_deref(), report.to_json().as_bytes())?;
            Ok(report.all_pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(ok) => status(ok),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
