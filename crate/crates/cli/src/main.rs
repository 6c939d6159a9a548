use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use lieprune::bench::{
    bench_scaling, loglog_slope, run_bars_and_stripes, run_vqe_sweep, scaling_csv, BasConfig,
    BenchResult, ScalingConfig, VqeSweepConfig,
};
use lieprune::circuit::{build_hea, Circuit, Hamiltonian};
use lieprune::data::{exact_ground_energy, gen_bars_and_stripes, gen_tfim};
use lieprune::dualrep::{identifier, LocalityPolicy};
use lieprune::fsdist::ReferenceStrategy;
use lieprune::pruner::{prune, MergeMode, PruneConfig};
use lieprune::train::{
    finetune, trace_csv, Dataset, GradMethod, Objective, OptimizerKind, TrainConfig,
};
use lieprune::verify;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lieprune",
    version,
    about = "One-shot structured pruning of parameterized quantum circuits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the dual representation of every parameterized gate as CSV.
    Features(FeaturesArgs),
    /// Prune a circuit against a dataset or a Hamiltonian.
    Prune(PruneArgs),
    /// Train a classifier circuit on a CSV dataset.
    Train(TrainArgs),
    /// Minimize the energy of a Hamiltonian.
    Vqe(VqeArgs),
    /// VQE compression sweep on the transverse-field Ising chain.
    BenchCompression(CompressionArgs),
    /// Prune-phase wall time against circuit size.
    BenchScaling(ScalingArgs),
    /// Train, prune and fine-tune on bars and stripes.
    BenchBas(BasArgs),
    /// Run the randomized checks; exits with 3 when one fails.
    Verify(VerifyArgs),
    /// Write a hardware-efficient ansatz as JSON.
    Hea(HeaArgs),
    /// Generate a dataset or Hamiltonian.
    Gen(GenArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Task {
    /// Classification data: CSV rows of features with a trailing 0/1 label.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Hamiltonian file, one `coefficient PAULI_STRING` per line.
    #[arg(long)]
    hamiltonian: Option<PathBuf>,
}

impl Task {
    fn objective(&self, num_qubits: usize) -> anyhow::Result<Objective> {
        if let Some(path) = &self.data {
            let data =
                Dataset::load_csv(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Objective::classify(&data, num_qubits)?)
        } else if let Some(path) = &self.hamiltonian {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Objective::vqe(Hamiltonian::parse(&text)?))
        } else {
            bail!("one of --data or --hamiltonian is required")
        }
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    task: Task,
    #[arg(long, default_value = "same-layer")]
    policy: LocalityPolicy,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[command(flatten)]
    task: Task,
    /// Redundancy threshold in radians.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Pairs with a larger commutator norm use the exact distance.
    #[arg(long, default_value_t = 0.1)]
    eta_cap: f64,
    /// same-qubit | same-layer | global | block:K
    #[arg(long, default_value = "same-layer")]
    policy: LocalityPolicy,
    /// tie | replace
    #[arg(long, default_value = "tie")]
    mode: MergeMode,
    /// Candidate neighbours per gate.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Always use the exact distance.
    #[arg(long)]
    exact: bool,
    /// dominant | marginal | embed
    #[arg(long, default_value = "dominant")]
    reference: String,
    /// param-shift | finite-diff | adjoint
    #[arg(long, default_value = "param-shift")]
    sensitivity: GradMethod,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write every evaluated candidate pair as CSV.
    #[arg(long)]
    emit_distances: Option<PathBuf>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 200)]
    steps: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// gd | momentum | adam
    #[arg(long, default_value = "adam")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// param-shift | finite-diff | adjoint
    #[arg(long, default_value = "param-shift")]
    grad: GradMethod,
    /// Output circuit JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Loss trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

impl TrainFlags {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            learning_rate: self.lr,
            optimizer: self.optimizer,
            batch_size: self.batch_size,
            seed: self.seed,
            grad_method: self.grad,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct VqeArgs {
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long)]
    hamiltonian: PathBuf,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct CompressionArgs {
    #[arg(long, default_value_t = 6)]
    qubits: usize,
    #[arg(long, default_value_t = 6)]
    layers: usize,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    field: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,6")]
    ratios: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Whitespace-separated data file for gnuplot.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "96,192,384,768")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    qubits: usize,
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value = "same-layer")]
    policy: LocalityPolicy,
    #[arg(long, default_value_t = 9)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

#[derive(Args)]
struct BasArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Five times more samples per suite.
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct HeaArgs {
    #[arg(long)]
    qubits: usize,
    #[arg(long)]
    layers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    what: GenKind,
}

#[derive(Subcommand)]
enum GenKind {
    /// 4x4 bars-and-stripes CSV.
    Bas {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transverse-field Ising chain, with its exact ground energy on stderr.
    Tfim {
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long, default_value_t = 1.0)]
        field: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_circuit(path: &Path) -> anyhow::Result<Circuit> {
    Circuit::load(path).with_context(|| format!("reading {}", path.display()))
}

fn reference_strategy(name: &str) -> anyhow::Result<ReferenceStrategy> {
    Ok(match name {
        "dominant" => ReferenceStrategy::Dominant,
        "marginal" => ReferenceStrategy::Marginal,
        "embed" => ReferenceStrategy::Embed,
        _ => bail!("unknown reference strategy '{name}' (dominant | marginal | embed)"),
    })
}

fn features(args: &FeaturesArgs) -> anyhow::Result<()> {
    let circuit = load_circuit(&args.circuit)?;
    let objective = args.task.objective(circuit.num_qubits)?;
    let refs = objective.batch(args.batch_size, args.seed).initial_states();
    let mut out =
        String::from("gate,label,coefficients,displacement,qfi,support_mask,coeff_norm\n");
    for gate in circuit.gates.iter().filter(|g| g.is_parameterized()) {
        let id = identifier(gate, &refs, args.policy)?;
        let coeffs: Vec<String> = id
            .coeffs
            .iter()
            .map(|t| format!("{}:{:.12e}", t.label(), t.coeff))
            .collect();
        out.push_str(&format!(
            "{},{},{},{:.12e},{:.12e},{},{:.12e}\n",
            gate.id,
            id.label,
            coeffs.join(";"),
            id.features.displacement,
            id.features.qfi,
            id.features.support_mask,
            id.features.coeff_norm
        ));
    }
    emit(None, &out)
}

fn prune_cmd(args: &PruneArgs) -> anyhow::Result<()> {
    let circuit = load_circuit(&args.circuit)?;
    let objective = args.task.objective(circuit.num_qubits)?;
    let config = PruneConfig {
        epsilon: args.epsilon,
        eta_cap: args.eta_cap,
        batch_size: args.batch_size,
        locality_policy: args.policy,
        merge_mode: args.mode,
        use_fast_distance: !args.exact,
        max_neighbors: args.neighbors,
        seed: args.seed,
        reference_strategy: reference_strategy(&args.reference)?,
        sensitivity_method: args.sensitivity,
        ..PruneConfig::default()
    };
    let (pruned, report) = prune(&circuit, &objective, &config)?;
    if let Some(p) = &args.out {
        pruned.save(p)?;
    }
    if let Some(p) = &args.report {
        emit(Some(p), &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(p) = &args.emit_distances {
        emit(Some(p), &report.pairs_csv())?;
    }
    eprintln!(
        "params {} -> {} ({:.2}% left, {:.2}x), {} merged components, {:.3}s",
        report.params_before,
        report.params_after,
        report.left_percent,
        report.compression,
        report.merged_components().count(),
        report.timing.total
    );
    Ok(())
}

fn run_training(
    circuit: &Path,
    objective: &Objective,
    flags: &TrainFlags,
    metric: &str,
) -> anyhow::Result<()> {
    let circuit = load_circuit(circuit)?;
    let (trained, trace) = finetune(&circuit, objective, &flags.config())?;
    if let Some(p) = &flags.out {
        trained.save(p)?;
    }
    emit(flags.trace.as_deref(), &trace_csv(&trace, metric))?;
    if let Some(last) = trace.last() {
        eprintln!("final loss {:.6e}, {metric} {:.6}", last.loss, last.metric);
    }
    Ok(())
}

fn write_gnuplot(path: &Path, header: &str, rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let mut s = format!("# {header}\n");
    for r in rows {
        let cols: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
        s.push_str(&cols.join(" "));
        s.push('\n');
    }
    emit(Some(path), &s)
}

fn bench_compression(args: &CompressionArgs) -> anyhow::Result<()> {
    let config = VqeSweepConfig {
        num_qubits: args.qubits,
        num_layers: args.layers,
        coupling: args.coupling,
        field: args.field,
        ratios: args.ratios.clone(),
        seed: args.seed,
        ..VqeSweepConfig::default()
    };
    let (baseline, sweep) = run_vqe_sweep(&config)?;
    eprintln!(
        "baseline energy {:.10} (exact {:.10}, gap {:.3e})",
        baseline.energy,
        baseline.exact_energy,
        baseline.energy - baseline.exact_energy
    );
    for r in &sweep.skipped {
        eprintln!(
            "ratio {r}x is not achievable on {} qubits; skipped",
            args.qubits
        );
    }
    emit(args.out.as_deref(), &sweep.csv())?;
    if let Some(p) = &args.gnuplot {
        let rows: Vec<Vec<f64>> = sweep
            .rows
            .iter()
            .map(|r| vec![r.ratio as f64, r.params as f64, r.delta_direct, r.delta_ft])
            .collect();
        write_gnuplot(p, "ratio params delta_direct delta_ft", &rows)?;
    }
    Ok(())
}

fn bench_scaling_cmd(args: &ScalingArgs) -> anyhow::Result<()> {
    let mut config = ScalingConfig {
        num_qubits: args.qubits,
        repeats: args.repeats,
        seed: args.seed,
        ..ScalingConfig::default()
    };
    config.prune.max_neighbors = args.neighbors;
    config.prune.locality_policy = args.policy;
    let rows = bench_scaling(&args.sizes, &config)?;
    emit(args.out.as_deref(), &scaling_csv(&rows))?;
    eprintln!("log-log slope {:.4}", loglog_slope(&rows));
    if let Some(p) = &args.gnuplot {
        let data: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.gates as f64, r.seconds])
            .collect();
        write_gnuplot(p, "gates seconds", &data)?;
    }
    Ok(())
}

fn bench_bas(args: &BasArgs) -> anyhow::Result<()> {
    let mut out = format!("{}\n", BenchResult::CSV_HEADER);
    for &seed in &args.seeds {
        let (result, _) = run_bars_and_stripes(seed, &BasConfig::default())?;
        out.push_str(&result.csv_row());
        out.push('\n');
    }
    emit(args.out.as_deref(), &out)
}

fn verify_cmd(args: &VerifyArgs) -> anyhow::Result<bool> {
    let checks = verify::run_all(args.full, args.seed)?;
    for c in &checks {
        println!("{c}");
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn gen(args: &GenArgs) -> anyhow::Result<()> {
    match &args.what {
        GenKind::Bas { seed, out } => {
            let data = gen_bars_and_stripes(4, *seed)?;
            let mut s = String::new();
            for sample in &data.samples {
                let cols: Vec<String> = sample.features.iter().map(|x| x.to_string()).collect();
                s.push_str(&format!("{},{}\n", cols.join(","), sample.label));
            }
            emit(out.as_deref(), &s)
        }
        GenKind::Tfim {
            qubits,
            coupling,
            field,
            out,
        } => {
            let h = gen_tfim(*qubits, *coupling, *field)?;
            eprintln!("exact ground energy {:.12}", exact_ground_energy(&h)?);
            emit(out.as_deref(), &h.to_text())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Features(a) => features(a)?,
        Command::Prune(a) => prune_cmd(a)?,
        Command::Train(a) => {
            let circuit = load_circuit(&a.circuit)?;
            let data = Dataset::load_csv(&a.data)
                .with_context(|| format!("reading {}", a.data.display()))?;
            let objective = Objective::classify(&data, circuit.num_qubits)?;
            run_training(&a.circuit, &objective, &a.flags, "accuracy")?;
        }
        Command::Vqe(a) => {
            let text = fs::read_to_string(&a.hamiltonian)
                .with_context(|| format!("reading {}", a.hamiltonian.display()))?;
            let objective = Objective::vqe(Hamiltonian::parse(&text)?);
            run_training(&a.circuit, &objective, &a.flags, "energy")?;
        }
        Command::BenchCompression(a) => bench_compression(a)?,
        Command::BenchScaling(a) => bench_scaling_cmd(a)?,
        Command::BenchBas(a) => bench_bas(a)?,
        Command::Verify(a) => return verify_cmd(a),
        Command::Hea(a) => {
            let c = build_hea(a.qubits, a.layers, a.seed)?;
            emit(a.out.as_deref(), &c.to_json()?)?;
        }
        Command::Gen(a) => gen(a)?,
    }
    Ok(true)
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LIEPRUNE_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("LIEPRUNE_THREADS='{v}' is not a count"))?;
        if n == 0 {
            bail!("LIEPRUNE_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<lieprune::Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_VERIFY),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
