//! `asymsat` command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error (bad flags,
//! unreadable or malformed input, conflicting config), and for
//! `oracle-solve` 10 SAT / 20 UNSAT. Machine-readable output goes to stdout;
//! logs go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asymsat::circuit::{read_circuit, write_circuit};
use asymsat::cnf::{cnf_to_circuit, read_dimacs, tseitin, write_dimacs_with_comments};
use asymsat::datagen::{
    gen_random_aig, gen_sr_pair, derive_seed, read_manifest, sr_instance_from_pair, sr_params, symmetric_suite,
    write_manifest, LabeledInstance,
};
use asymsat::diagnostics::{gradient_suite, TOLERANCE};
use asymsat::model::{load_model, sidecar_path, ModelParams, ModelSidecar};
use asymsat::oracle::{dpll_solve, SolveResult};
use asymsat::training::{evaluate_solution_rate, train, EvalReport, TrainConfig};
use asymsat_autodiff::checkpoint::{load_matching, read_checkpoint};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asymsat", version, about = "Circuit-SAT data generation, oracle solving, and a learned assignment predictor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate SR(n) pairs: DIMACS files for both members plus a manifest of SAT circuits.
    GenSr {
        /// Variable count (lower bound when --n-max is given).
        #[arg(long)]
        n: usize,
        /// Draw n uniformly from n..=n-max per instance.
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate satisfiable random AIGs with oracle labels.
    GenAig {
        #[arg(long)]
        inputs: usize,
        #[arg(long)]
        gates: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the fixed ten-circuit symmetric suite.
    GenSymmetric {
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert between DIMACS CNF and the circuit text format (result on stdout).
    Convert {
        /// DIMACS file to turn into a circuit.
        #[arg(long, conflicts_with = "to_cnf", required_unless_present = "to_cnf")]
        to_circuit: Option<PathBuf>,
        /// Circuit file to Tseitin-encode.
        #[arg(long)]
        to_cnf: Option<PathBuf>,
    },
    /// Solve a DIMACS file; exits 10 if SAT, 20 if UNSAT.
    OracleSolve { file: PathBuf },
    /// Train a model from a TOML config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Measure the solution rate of a checkpoint on a dataset manifest.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Decode every input independently with the concurrent head.
        #[arg(long)]
        ablation: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Where to write the JSON-lines report (default: next to the checkpoint).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the finite-difference gradient suite; exits 1 on failure.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds to run.
        #[arg(long, default_value_t = 3)]
        seeds: u64,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type Outcome = Result<ExitCode, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn gen_sr(n: usize, n_max: Option<usize>, count: usize, seed: u64, out: &Path) -> Outcome {
    let n_max = n_max.unwrap_or(n);
    if n < 2 || n_max < n {
        return Err(usage(format!("need 2 <= n <= n-max, got {n}..={n_max}")));
    }
    let mut instances = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let (k, s) = sr_params(n, n_max, seed, i);
        let pair = gen_sr_pair(k, s).map_err(runtime)?;
        let meta = vec![format!("SR({k}) seed {s}"), format!("flipped clause {} literal {}", pair.flipped.0, pair.flipped.1.to_dimacs())];
        write_text(&out.join(format!("cnf/{i:06}.sat.cnf")), &write_dimacs_with_comments(&pair.sat, &meta))?;
        write_text(&out.join(format!("cnf/{i:06}.unsat.cnf")), &write_dimacs_with_comments(&pair.unsat, &meta))?;
        instances.push(sr_instance_from_pair(&pair, s).map_err(runtime)?);
    }
    let meta = [format!("command = \"gen-sr\""), format!("n = {n}"), format!("n_max = {n_max}"), format!("count = {count}"), format!("seed = {seed}")];
    finish_manifest(&instances, out, &meta)
}

fn finish_manifest(instances: &[LabeledInstance], out: &Path, meta: &[String]) -> Outcome {
    let path = out.join("manifest.txt");
    write_manifest(instances, &path, meta).map_err(runtime)?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn gen_aig(inputs: usize, gates: usize, count: usize, seed: u64, out: &Path) -> Outcome {
    if inputs == 0 || gates == 0 {
        return Err(usage("--inputs and --gates must be >= 1"));
    }
    let instances = (0..count as u64)
        .map(|i| gen_random_aig(inputs, gates, derive_seed(seed, i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?;
    let meta = [format!("command = \"gen-aig\""), format!("inputs = {inputs}"), format!("gates = {gates}"), format!("count = {count}"), format!("seed = {seed}")];
    finish_manifest(&instances, out, &meta)
}

fn convert(to_circuit: Option<PathBuf>, to_cnf: Option<PathBuf>) -> Outcome {
    if let Some(p) = to_circuit {
        let f = read_dimacs(&read_text(&p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let c = cnf_to_circuit(&f).map_err(usage)?;
        print!("# converted from {}\n{}", p.display(), write_circuit(&c));
    } else if let Some(p) = to_cnf {
        let c = read_circuit(&read_text(&p)?).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let (cnf, map) = tseitin(&c);
        let mut comments = vec![format!("tseitin encoding of {}", p.display())];
        comments.extend(map.input_var.iter().map(|(node, var)| format!("input node {node} -> var {var}")));
        print!("{}", write_dimacs_with_comments(&cnf, &comments));
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle_solve(file: &Path) -> Outcome {
    let f = read_dimacs(&read_text(file)?).map_err(|e| usage(format!("{}: {e}", file.display())))?;
    match dpll_solve(&f) {
        SolveResult::Sat(m) => {
            let lits: Vec<String> = m
                .iter()
                .enumerate()
                .map(|(i, &v)| if v { format!("{}", i + 1) } else { format!("-{}", i + 1) })
                .collect();
            println!("s SATISFIABLE");
            if lits.is_empty() {
                println!("v 0");
            } else {
                println!("v {} 0", lits.join(" "));
            }
            Ok(ExitCode::from(10))
        }
        SolveResult::Unsat => {
            println!("s UNSATISFIABLE");
            Ok(ExitCode::from(20))
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
}

fn train_cmd(config: &Path, seed: Option<u64>, epochs: Option<usize>, out: Option<PathBuf>, jobs: usize) -> Outcome {
    let text = read_text(config)?;
    let mut cfg: TrainConfig = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", config.display())))?;
    let base = config.parent().unwrap_or(Path::new("."));
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    cfg.out_dir = Some(match out {
        Some(o) => o,
        None => resolve(base, cfg.out_dir.as_deref().unwrap_or(Path::new("run"))),
    });
    let train_path = cfg
        .train_manifest
        .as_deref()
        .map(|p| resolve(base, p))
        .ok_or_else(|| usage("config has no train_manifest"))?;
    cfg.train_manifest = Some(train_path.clone());
    cfg.test_manifest = cfg.test_manifest.as_deref().map(|p| resolve(base, p));
    cfg.validate().map_err(usage)?;

    let train_set = read_manifest(&train_path).map_err(usage)?;
    let test_set = match &cfg.test_manifest {
        Some(p) => Some(read_manifest(p).map_err(usage)?),
        None => None,
    };
    log::info!("training on {} instances", train_set.len());
    let outcome = train(&train_set, &cfg).map_err(runtime)?;
    let dir = cfg.out_dir.clone().expect("set above");
    println!("{}", dir.join("final.ckpt").display());
    if let Some(test) = test_set {
        let report = evaluate_solution_rate(&outcome.params, &outcome.store, &test, jobs).map_err(runtime)?;
        emit_report(&report, &dir.join("report.jsonl"), &cfg.to_toml())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_report(report: &EvalReport, path: &Path, config: &str) -> Result<(), Failure> {
    let header = serde_json::json!({"kind": "config", "config": config});
    write_text(path, &format!("{header}\n{}", report.to_jsonl()))?;
    print!("{}", report.table());
    Ok(())
}

fn eval_cmd(checkpoint: &Path, dataset: &Path, ablation: bool, jobs: usize, report: Option<PathBuf>) -> Outcome {
    let data = read_manifest(dataset).map_err(usage)?;
    let (params, store, sidecar) = if ablation {
        let mut side = ModelSidecar::read(&sidecar_path(checkpoint)).map_err(usage)?;
        side.model.ablation_concurrent = true;
        let (params, mut store) = ModelParams::init(side.model.clone(), side.seed).map_err(runtime)?;
        let file = fs::File::open(checkpoint).map_err(|e| usage(format!("{}: {e}", checkpoint.display())))?;
        let loaded = read_checkpoint(std::io::BufReader::new(file)).map_err(usage)?;
        let copied = load_matching(&mut store, &loaded).map_err(usage)?;
        if copied < store.len() {
            log::warn!("{} concurrent-head tensors not in checkpoint; using seed {} initialization", store.len() - copied, side.seed);
        }
        (params, store, side)
    } else {
        load_model(checkpoint).map_err(usage)?
    };
    let r = evaluate_solution_rate(&params, &store, &data, jobs).map_err(runtime)?;
    let path = report.unwrap_or_else(|| checkpoint.with_extension("eval.jsonl"));
    let config = toml::to_string(&sidecar).map_err(runtime)?;
    emit_report(&r, &path, &format!("{config}checkpoint = {:?}\ndataset = {:?}\n", checkpoint.display().to_string(), dataset.display().to_string()))?;
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(seed: u64, seeds: u64) -> Outcome {
    let mut ok = true;
    for s in seed..seed + seeds {
        for case in gradient_suite(s).map_err(runtime)? {
            let verdict = if case.passes() { "PASS" } else { "FAIL" };
            ok &= case.passes();
            println!("{verdict} seed={s} {:<36} max_rel_error={:.3e}", case.name, case.max_rel_error);
        }
    }
    println!("tolerance {TOLERANCE:e}: {}", if ok { "all passed" } else { "FAILED" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::GenSr { n, n_max, count, seed, out } => gen_sr(n, n_max, count, seed, &out),
        Command::GenAig { inputs, gates, count, seed, out } => gen_aig(inputs, gates, count, seed, &out),
        Command::GenSymmetric { out } => finish_manifest(&symmetric_suite(), &out, &["command = \"gen-symmetric\"".to_string()]),
        Command::Convert { to_circuit, to_cnf } => convert(to_circuit, to_cnf),
        Command::OracleSolve { file } => oracle_solve(&file),
        Command::Train { config, seed, epochs, out, jobs } => train_cmd(&config, seed, epochs, out, jobs),
        Command::Eval { checkpoint, dataset, ablation, jobs, report } => eval_cmd(&checkpoint, &dataset, ablation, jobs, report),
        Command::Gradcheck { seed, seeds } => gradcheck(seed, seeds),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
