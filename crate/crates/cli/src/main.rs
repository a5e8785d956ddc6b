//! `ahlp`: generate, inspect, solve and benchmark arrowhead LPs.
//!
//! Exit codes: 0 optimal, 1 input error, 2 no convergence, 3 numerical
//! failure (including a failed `--check`), 64 usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use ahlp::ipm::{self, IpmOptions, IterationRecord, SolveReport, Status};
use ahlp::kkt::{SolverConfig, SolverRegistry};
use ahlp::oracle;
use ahlp::problem::{self, generate, to_standard_form, GeneratorParams, StandardArrowhead};
use ahlp::runtime::{ReductionMode, RuntimeConfig};
use ahlp::schur::{observation_bound, BlockKkt, Child, HierarchyOptions, SchurTree, MAX_LAYERS};
use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "ahlp", version, about = "Interior-point solver for arrowhead-structured LPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a random instance with a known optimum.
    Generate(GenerateArgs),
    /// Report the block structure and predicted Schur sparsity.
    Inspect(InspectArgs),
    /// Solve an instance.
    Solve(SolveArgs),
    /// Time full solves over a grid of rank counts and layer counts (CSV).
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    blocks: u64,
    #[arg(long, default_value_t = 4)]
    block_rows: usize,
    #[arg(long, default_value_t = 8)]
    block_cols: usize,
    #[arg(long, default_value_t = 2)]
    linking_vars: usize,
    #[arg(long, default_value_t = 1)]
    root_rows: usize,
    /// Rows per neighbouring pair: one count for all pairs, or a comma list.
    #[arg(long, default_value = "1")]
    local_links: String,
    #[arg(long, default_value_t = 1)]
    global_links: usize,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 0.0)]
    inequality_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Layer count of the proposed hierarchy.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Concurrently running ranks (default: available cores; AHLP_WORKERS overrides).
    #[arg(long)]
    workers: Option<usize>,
    /// Fold reductions in a fixed order for bitwise-reproducible runs.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    deterministic: bool,
    /// Top-level cuts `i1,i2,..` (cut i separates blocks i and i+1), or `auto`.
    #[arg(long, default_value = "auto")]
    partition: String,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Write the primal solution (original variables) as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// 1 = flat Schur decomposition, 2..=4 = hierarchical.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Simulated ranks (default: one per block).
    #[arg(long)]
    ranks: Option<usize>,
    /// KKT strategy by name; overrides the choice implied by --layers.
    #[arg(long)]
    solver: Option<String>,
    /// Also run the dense oracle and require 1e-6 relative objective agreement.
    #[arg(long)]
    check: bool,
    /// Emit json-lines records instead of a table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Rank counts to time, comma separated.
    #[arg(long, default_value = "1,2,4,8")]
    ranks: String,
    /// Layer counts to time, comma separated.
    #[arg(long, default_value = "1")]
    layers: String,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("invalid {what} {s:?}: expected comma-separated integers"))))
        .collect()
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Input(e.to_string()))
        }
    }
}

fn load(path: &PathBuf) -> Result<Arc<StandardArrowhead>, Failure> {
    let p = problem::io::load(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let s = to_standard_form(&p).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(Arc::new(s))
}

fn cmd_generate(a: GenerateArgs) -> Result<u8, Failure> {
    let n = a.blocks as usize;
    let locals = parse_list(&a.local_links, "--local-links")?;
    let local_links = match locals.as_slice() {
        [k] => vec![*k; n - 1],
        list if list.len() == n - 1 => list.to_vec(),
        list => return Err(Failure::Usage(format!("--local-links needs 1 or {} counts, got {}", n - 1, list.len()))),
    };
    let params = GeneratorParams {
        blocks: n,
        block_rows: a.block_rows,
        block_cols: a.block_cols,
        linking_vars: a.linking_vars,
        root_rows: a.root_rows,
        local_links,
        global_links: a.global_links,
        density: a.density,
        inequality_fraction: a.inequality_fraction,
        seed: a.seed,
    };
    let g = generate(&params).map_err(|e| Failure::Usage(e.to_string()))?;
    write_out(a.output.as_ref(), &problem::io::write(&g.problem))?;
    eprintln!("planted objective: {:.16e}", g.planted.objective);
    Ok(0)
}

fn shape_string(tree: &SchurTree, id: usize) -> String {
    let n = tree.node(id);
    let range = format!("[{}-{}]", n.blocks.start, n.blocks.end - 1);
    let kids: Vec<String> = n.children.iter().filter_map(|c| if let Child::Node(d) = c { Some(shape_string(tree, *d)) } else { None }).collect();
    if kids.is_empty() {
        range
    } else {
        format!("{range} {{{}}}", kids.join(" "))
    }
}

fn cmd_inspect(a: InspectArgs) -> Result<u8, Failure> {
    if !(1..=MAX_LAYERS).contains(&a.layers) {
        return Err(Failure::Usage(format!("--layers must be in 1..={MAX_LAYERS}")));
    }
    let s = load(&a.input)?;
    let kkt = BlockKkt::new(s.clone());
    let n = kkt.num_blocks();
    let local: Vec<usize> = (1..n).map(|p| kkt.local_count(p)).collect();
    let mut hist = std::collections::BTreeMap::new();
    for &l in &local {
        *hist.entry(l).or_insert(0usize) += 1;
    }
    let flat_bound = observation_bound(&local, kkt.global_count(), kkt.n0());
    let tree = SchurTree::hierarchical(&kkt, &HierarchyOptions { layers: a.layers.max(2), ..Default::default() }).map_err(|e| Failure::Usage(e.to_string()))?;
    let band = tree.band_bound();
    let shape = shape_string(&tree, if tree.hierarchical { 1 } else { 0 });
    let nvar: Vec<usize> = (1..=n).map(|j| kkt.block_nvar(j)).collect();
    let nrow: Vec<usize> = (1..=n).map(|j| kkt.block_dim(j) - kkt.block_nvar(j)).collect();
    if a.json {
        let v = json!({
            "blocks": n,
            "block_vars": nvar,
            "block_rows": nrow,
            "total_vars": nvar.iter().sum::<usize>() + kkt.n0(),
            "total_rows": s.flat_rhs().len(),
            "local_links": local,
            "local_link_histogram": hist.iter().map(|(k, v)| json!({"links": k, "pairs": v})).collect::<Vec<_>>(),
            "global_links": kkt.global_count(),
            "n0": kkt.n0(),
            "m0": kkt.m0(),
            "flat_schur_nnz_bound": flat_bound,
            "band_bound": band,
            "layers": tree.layers(),
            "hierarchy": shape,
        });
        println!("{v}");
        return Ok(0);
    }
    let mut out = String::new();
    let _ = writeln!(out, "blocks N:                 {n}");
    let _ = writeln!(out, "variables:                {} (x_0: {}, blocks: {}..{})", nvar.iter().sum::<usize>() + kkt.n0(), kkt.n0(), nvar.iter().min().unwrap_or(&0), nvar.iter().max().unwrap_or(&0));
    let _ = writeln!(out, "equality rows:            {} (root: {}, blocks: {}..{}, linking: {})", s.flat_rhs().len(), kkt.m0(), nrow.iter().min().unwrap_or(&0), nrow.iter().max().unwrap_or(&0), s.link_rows());
    let _ = writeln!(out, "local links l_i:          {}", hist.iter().map(|(k, v)| format!("{k}: {v} pair(s)")).collect::<Vec<_>>().join(", "));
    let _ = writeln!(out, "global links m_F:         {}", kkt.global_count());
    let _ = writeln!(out, "linking variables n_0:    {}", kkt.n0());
    let _ = writeln!(out, "flat Schur nnz bound:     {flat_bound}");
    let _ = writeln!(out, "inner band bound:         {band}");
    let _ = writeln!(out, "hierarchy ({} layers):     {shape}", tree.layers());
    print!("{out}");
    Ok(0)
}

fn workers(run: &RunArgs) -> Result<usize, Failure> {
    if let Ok(v) = std::env::var("AHLP_WORKERS") {
        return v.trim().parse::<usize>().ok().filter(|&w| w > 0).ok_or_else(|| Failure::Usage(format!("AHLP_WORKERS={v:?} is not a positive integer")));
    }
    match run.workers {
        Some(0) => Err(Failure::Usage("--workers must be at least 1".into())),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn validate_run(run: &RunArgs) -> Result<Option<Vec<usize>>, Failure> {
    if !(run.tol > 0.0 && run.tol < 1.0) {
        return Err(Failure::Usage(format!("--tol {} must lie in (0, 1)", run.tol)));
    }
    if run.partition == "auto" {
        Ok(None)
    } else {
        parse_list(&run.partition, "--partition").map(Some)
    }
}

fn solver_config(run: &RunArgs, ranks: usize, layers: usize, partition: Option<Vec<usize>>) -> Result<SolverConfig, Failure> {
    if !(1..=MAX_LAYERS).contains(&layers) {
        return Err(Failure::Usage(format!("--layers {layers} must be in 1..={MAX_LAYERS}")));
    }
    if ranks == 0 {
        return Err(Failure::Usage("--ranks must be at least 1".into()));
    }
    let reduction = if run.deterministic { ReductionMode::Ordered } else { ReductionMode::Tree };
    Ok(SolverConfig {
        ranks,
        layers,
        partition,
        runtime: RuntimeConfig { workers: workers(run)?, reduction, fuzz_seed: None },
        ..Default::default()
    })
}

fn run_solve(s: &Arc<StandardArrowhead>, name: &str, cfg: &SolverConfig, run: &RunArgs, on_iter: &mut dyn FnMut(&IterationRecord)) -> Result<SolveReport, Failure> {
    let registry = SolverRegistry::with_defaults();
    let mut kkt = registry.create(name, s.clone(), cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let opts = IpmOptions { tol: run.tol, max_iter: run.max_iter, ..Default::default() };
    Ok(ipm::solve_with(s, kkt.as_mut(), &opts, on_iter))
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Optimal => 0,
        Status::MaxIterations | Status::Diverged => EXIT_NO_CONVERGENCE,
        Status::NumericalFailure => EXIT_NUMERICAL,
    }
}

fn cmd_solve(a: SolveArgs) -> Result<u8, Failure> {
    let partition = validate_run(&a.run)?;
    let s = load(&a.input)?;
    let n = s.num_blocks();
    let ranks = a.ranks.unwrap_or(n);
    if ranks > n {
        return Err(Failure::Usage(format!("--ranks {ranks} exceeds the number of blocks {n}")));
    }
    let cfg = solver_config(&a.run, ranks, a.layers, partition)?;
    let name = a.solver.clone().unwrap_or_else(|| if a.layers == 1 { "flat".into() } else { "hierarchical".into() });
    if a.check {
        let order = s.flat_rhs().len() + s.problem.blocks.iter().map(|b| b.nvar()).sum::<usize>();
        if order > oracle::DEFAULT_CAP {
            return Err(Failure::Usage(format!("--check: system order {order} exceeds the oracle cap {}", oracle::DEFAULT_CAP)));
        }
    }

    let json_mode = a.json;
    if !json_mode {
        println!("{:>4} {:>15} {:>15} {:>9} {:>9} {:>9} {:>8} {:>8} {:>4}", "iter", "primal obj", "dual obj", "r_primal", "r_dual", "gap", "alpha_p", "alpha_d", "corr");
    }
    let mut on_iter = |r: &IterationRecord| {
        if json_mode {
            let mut v = serde_json::to_value(r).expect("record serializes");
            v["type"] = json!("iteration");
            println!("{v}");
        } else {
            println!(
                "{:>4} {:>15.8e} {:>15.8e} {:>9.2e} {:>9.2e} {:>9.2e} {:>8.4} {:>8.4} {:>4}",
                r.iteration, r.primal_objective, r.dual_objective, r.rel_primal, r.rel_dual, r.rel_gap, r.alpha_primal, r.alpha_dual, r.correctors
            );
        }
    };
    let report = run_solve(&s, &name, &cfg, &a.run, &mut on_iter)?;

    let mut check = None;
    if a.check && report.status == Status::Optimal {
        let o = oracle::dense_ipm_solve(&s);
        let rel = (report.objective - o.objective).abs() / (1.0 + o.objective.abs());
        check = Some((o.status, o.objective, rel));
    }

    if let Some(path) = &a.output {
        let x = s.recover(&report.blocks(&s));
        let text = serde_json::to_string_pretty(&json!({ "status": report.status, "objective": report.objective, "blocks": x })).expect("solution serializes");
        write_out(Some(path), &(text + "\n"))?;
    }

    let k = &report.kkt;
    if json_mode {
        let schur: Vec<_> = k
            .schur
            .iter()
            .map(|n| json!({"node": n.id, "dim": n.dim, "dense": n.dense, "schur_nnz": n.schur_nnz, "contribution_nnz": n.contribution_nnz, "dropped": n.dropped}))
            .collect();
        let mut v = json!({
            "type": "summary",
            "status": report.status,
            "iterations": report.iterations,
            "objective": report.objective,
            "dual_objective": report.dual_objective,
            "rel_primal": report.rel_primal,
            "rel_dual": report.rel_dual,
            "rel_gap": report.rel_gap,
            "solver": name,
            "layers": a.layers,
            "ranks": cfg.ranks,
            "times": {"factor": k.factor_seconds, "reduce": k.reduce_seconds, "solve": k.solve_seconds, "total": report.total_seconds},
            "factorizations": k.factorizations,
            "regularization_increases": k.regularization_increases,
            "schur": schur,
            "message": report.message,
        });
        if let Some((st, obj, rel)) = check {
            v["check"] = json!({"oracle_status": st, "oracle_objective": obj, "relative_difference": rel, "ok": st == Status::Optimal && rel <= 1e-6});
        }
        println!("{v}");
    } else {
        println!("status:      {}", report.status);
        if let Some(m) = &report.message {
            println!("reason:      {m}");
        }
        println!("objective:   {:.12e}", report.objective);
        println!("iterations:  {}", report.iterations);
        println!("solver:      {name} (layers {}, ranks {})", a.layers, cfg.ranks);
        println!(
            "time [s]:    factor {:.3} (reduce {:.3})  solve {:.3}  total {:.3}",
            k.factor_seconds, k.reduce_seconds, k.solve_seconds, report.total_seconds
        );
        if let Some((st, obj, rel)) = check {
            println!("check:       oracle {st}, objective {obj:.12e}, relative difference {rel:.2e}");
        }
    }
    let code = status_code(report.status);
    if let Some((st, _, rel)) = check {
        if code == 0 && (st != Status::Optimal || rel > 1e-6) {
            return Err(Failure::Numerical(format!("objective disagrees with the dense oracle (relative difference {rel:.2e})")));
        }
    }
    Ok(code)
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Failure> {
    let partition = validate_run(&a.run)?;
    let ranks = parse_list(&a.ranks, "--ranks")?;
    let layers = parse_list(&a.layers, "--layers")?;
    let s = load(&a.input)?;
    let n = s.num_blocks();
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r > n) {
        return Err(Failure::Usage(format!("rank count {r} outside 1..={n}")));
    }
    let mut csv = String::from("ranks,layers,factor_s,solve_s,total_s,iterations\n");
    let mut worst = 0;
    for &l in &layers {
        for &r in &ranks {
            let cfg = solver_config(&a.run, r, l, partition.clone())?;
            let name = if l == 1 { "flat" } else { "hierarchical" };
            let rep = run_solve(&s, name, &cfg, &a.run, &mut |_| {})?;
            worst = worst.max(status_code(rep.status));
            let _ = writeln!(csv, "{r},{l},{:.6},{:.6},{:.6},{}", rep.kkt.factor_seconds, rep.kkt.solve_seconds, rep.total_seconds, rep.iterations);
        }
    }
    write_out(a.output.as_ref(), &csv)?;
    Ok(worst)
}
