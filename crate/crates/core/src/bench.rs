//! Benchmark harness: the bars-and-stripes pipeline, the VQE compression
//! sweep and the prune-phase scaling measurement.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_hea, Circuit, StateVector};
use crate::data::{exact_ground_energy, gen_bars_and_stripes, gen_tfim};
use crate::dualrep::LocalityPolicy;
use crate::error::{Error, Result};
use crate::pruner::{prune, PruneConfig, PruneReport};
use crate::qmath::C64;
use crate::train::{finetune, GradMethod, Objective, TrainConfig};

/// Wall-clock seconds per pipeline phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub train: f64,
    pub prune: f64,
    pub finetune: f64,
}

/// One row of a pruning benchmark. Metrics are accuracy for classification
/// and energy for VQE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub task: String,
    pub seed: u64,
    pub params_before: usize,
    pub params_after: usize,
    pub compression: f64,
    pub metric_before: f64,
    pub metric_no_ft: f64,
    pub metric_ft: f64,
    pub wall_times: WallTimes,
    pub cross_label_edges: usize,
}

impl BenchResult {
    pub const CSV_HEADER: &'static str =
        "task,seed,params_before,params_after,left_percent,compression,\
metric_before,metric_no_ft,metric_ft,train_s,prune_s,finetune_s";

    pub fn left_percent(&self) -> f64 {
        100.0 * self.params_after as f64 / self.params_before as f64
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.4},{:.4},{:.12e},{:.12e},{:.12e},{:.4},{:.4},{:.4}",
            self.task,
            self.seed,
            self.params_before,
            self.params_after,
            self.left_percent(),
            self.compression,
            self.metric_before,
            self.metric_no_ft,
            self.metric_ft,
            self.wall_times.train,
            self.wall_times.prune,
            self.wall_times.finetune
        )
    }

    fn check(&self) -> Result<()> {
        for m in [self.metric_before, self.metric_no_ft, self.metric_ft] {
            if !m.is_finite() {
                return Err(Error::NonFinite(format!("metric of {}", self.task)));
            }
        }
        Ok(())
    }
}

fn seconds(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

/// Runs the stages of `schedule` one after another from `circuit`.
pub fn train_schedule(
    circuit: &Circuit,
    objective: &Objective,
    schedule: &[TrainConfig],
) -> Result<Circuit> {
    let mut current = circuit.clone();
    for stage in schedule {
        current = finetune(&current, objective, stage)?.0;
    }
    Ok(current)
}

/// Prunes a trained circuit, evaluates it, fine-tunes and evaluates again.
pub fn prune_and_finetune(
    task: &str,
    trained: &Circuit,
    objective: &Objective,
    prune_config: &PruneConfig,
    finetune_config: &TrainConfig,
) -> Result<(BenchResult, PruneReport, Circuit)> {
    let metric_before = objective.evaluate(trained)?.metric;
    let t = Instant::now();
    let (pruned, report) = prune(trained, objective, prune_config)?;
    let prune_s = seconds(t);
    let metric_no_ft = objective.evaluate(&pruned)?.metric;
    let t = Instant::now();
    let (tuned, _) = finetune(&pruned, objective, finetune_config)?;
    let finetune_s = seconds(t);
    let metric_ft = objective.evaluate(&tuned)?.metric;
    let result = BenchResult {
        task: task.to_string(),
        seed: prune_config.seed,
        params_before: report.params_before,
        params_after: report.params_after,
        compression: report.compression,
        metric_before,
        metric_no_ft,
        metric_ft,
        wall_times: WallTimes {
            train: 0.0,
            prune: prune_s,
            finetune: finetune_s,
        },
        cross_label_edges: report.cross_label_edges,
    };
    result.check()?;
    Ok((result, report, tuned))
}

/// Settings of the bars-and-stripes pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasConfig {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub train: TrainConfig,
    pub prune: PruneConfig,
    pub finetune: TrainConfig,
}

impl Default for BasConfig {
    fn default() -> Self {
        Self {
            num_qubits: 8,
            num_layers: 12,
            train: TrainConfig {
                steps: 300,
                grad_method: GradMethod::Adjoint,
                ..TrainConfig::default()
            },
            prune: PruneConfig {
                epsilon: FRAC_PI_2,
                sensitivity_method: GradMethod::Adjoint,
                ..PruneConfig::default()
            },
            // full batch: all 28 images
            finetune: TrainConfig {
                batch_size: 28,
                grad_method: GradMethod::Adjoint,
                ..TrainConfig::default()
            },
        }
    }
}

/// Train, prune, fine-tune on 4x4 bars and stripes; every stage uses `seed`.
pub fn run_bars_and_stripes(seed: u64, config: &BasConfig) -> Result<(BenchResult, PruneReport)> {
    let dataset = gen_bars_and_stripes(4, seed)?;
    let objective = Objective::classify(&dataset, config.num_qubits)?;
    let initial = build_hea(config.num_qubits, config.num_layers, seed)?;
    let t = Instant::now();
    let trained = train_schedule(
        &initial,
        &objective,
        &[TrainConfig {
            seed,
            ..config.train.clone()
        }],
    )?;
    let train_s = seconds(t);
    let (mut result, report, _) = prune_and_finetune(
        "bars-and-stripes",
        &trained,
        &objective,
        &PruneConfig {
            seed,
            ..config.prune.clone()
        },
        &TrainConfig {
            seed,
            ..config.finetune.clone()
        },
    )?;
    result.wall_times.train = train_s;
    Ok((result, report))
}

/// One compression ratio of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: usize,
    /// Qubit groups per layer and axis.
    pub groups: usize,
    pub params: usize,
    pub delta_direct: f64,
    pub delta_ft: f64,
    pub result: BenchResult,
}

/// Outcome of a sweep: rows for achievable ratios, the rest skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<usize>,
}

impl Sweep {
    pub const CSV_HEADER: &'static str =
        "compression,groups,params,delta_direct,delta_ft,metric_before,metric_no_ft,metric_ft";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.ratio,
                r.groups,
                r.params,
                r.delta_direct,
                r.delta_ft,
                r.result.metric_before,
                r.result.metric_no_ft,
                r.result.metric_ft
            ));
        }
        s
    }
}

/// Prune config that merges every qubit block of `ratio` qubits completely:
/// ε is the diameter of projective space and every node sees every other.
pub fn ratio_config(ratio: usize, base: &PruneConfig) -> PruneConfig {
    PruneConfig {
        epsilon: FRAC_PI_2,
        locality_policy: LocalityPolicy::QubitBlock(ratio),
        max_neighbors: ratio.max(1),
        ..base.clone()
    }
}

/// For each ratio `r` dividing the qubit count, ties every block of `r`
/// qubits per layer and axis, then fine-tunes. Deviations are taken against
/// the metric of `baseline`.
pub fn bench_compression_sweep(
    baseline: &Circuit,
    objective: &Objective,
    ratios: &[usize],
    prune_config: &PruneConfig,
    finetune_config: &TrainConfig,
) -> Result<Sweep> {
    let n = baseline.num_qubits;
    let mut sweep = Sweep {
        rows: Vec::new(),
        skipped: Vec::new(),
    };
    for &ratio in ratios {
        if ratio == 0 || !n.is_multiple_of(ratio) {
            sweep.skipped.push(ratio);
            continue;
        }
        let config = ratio_config(ratio, prune_config);
        let (result, _, _) = prune_and_finetune(
            &format!("compression-{ratio}x"),
            baseline,
            objective,
            &config,
            finetune_config,
        )?;
        sweep.rows.push(SweepRow {
            ratio,
            groups: n / ratio,
            params: result.params_after,
            delta_direct: result.metric_no_ft - result.metric_before,
            delta_ft: result.metric_ft - result.metric_before,
            result,
        });
    }
    Ok(sweep)
}

/// Settings of the TFIM stand-in for the VQE sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeSweepConfig {
    pub num_qubits: usize,
    pub num_layers: usize,
    pub coupling: f64,
    pub field: f64,
    pub ratios: Vec<usize>,
    /// Baseline optimization, run stage by stage.
    pub baseline: Vec<TrainConfig>,
    pub prune: PruneConfig,
    pub finetune: TrainConfig,
    pub seed: u64,
}

impl Default for VqeSweepConfig {
    fn default() -> Self {
        let stage = |steps, learning_rate| TrainConfig {
            steps,
            learning_rate,
            grad_method: GradMethod::Adjoint,
            ..TrainConfig::default()
        };
        Self {
            num_qubits: 6,
            num_layers: 6,
            coupling: 1.0,
            field: 1.0,
            ratios: vec![1, 2, 3, 6],
            baseline: vec![stage(3000, 0.02), stage(2000, 0.002)],
            prune: PruneConfig {
                sensitivity_method: GradMethod::Adjoint,
                ..PruneConfig::default()
            },
            finetune: stage(200, 0.05),
            seed: 0,
        }
    }
}

/// Baseline VQE run of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeBaseline {
    pub exact_energy: f64,
    pub energy: f64,
    pub train_seconds: f64,
}

/// Optimizes an HEA on the TFIM and sweeps the compression ratios.
pub fn run_vqe_sweep(config: &VqeSweepConfig) -> Result<(VqeBaseline, Sweep)> {
    let h = gen_tfim(config.num_qubits, config.coupling, config.field)?;
    let exact_energy = exact_ground_energy(&h)?;
    let objective = Objective::vqe(h);
    let initial = build_hea(config.num_qubits, config.num_layers, config.seed)?;
    let schedule: Vec<TrainConfig> = config
        .baseline
        .iter()
        .map(|s| TrainConfig {
            seed: config.seed,
            ..s.clone()
        })
        .collect();
    let t = Instant::now();
    let baseline = train_schedule(&initial, &objective, &schedule)?;
    let train_seconds = seconds(t);
    let energy = objective.evaluate(&baseline)?.metric;
    let sweep = bench_compression_sweep(
        &baseline,
        &objective,
        &config.ratios,
        &PruneConfig {
            seed: config.seed,
            ..config.prune.clone()
        },
        &TrainConfig {
            seed: config.seed,
            ..config.finetune.clone()
        },
    )?;
    Ok((
        VqeBaseline {
            exact_energy,
            energy,
            train_seconds,
        },
        sweep,
    ))
}

/// Haar-random pure states.
pub fn random_states(num_qubits: usize, count: usize, seed: u64) -> Result<Vec<StateVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let amps = (0..1usize << num_qubits)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            StateVector::normalized(amps)
        })
        .collect()
}

/// Prune-phase timing at one circuit size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub gates: usize,
    pub layers: usize,
    /// Median over the repeats.
    pub seconds: f64,
    pub pairs_evaluated: usize,
    pub edges: usize,
    pub cross_label_edges: usize,
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub num_qubits: usize,
    pub prune: PruneConfig,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            num_qubits: 8,
            prune: PruneConfig {
                sensitivity_method: GradMethod::Adjoint,
                ..PruneConfig::default()
            },
            repeats: 9,
            seed: 0,
        }
    }
}

/// Times `prune` on HEA circuits with the given numbers of parameterized
/// gates, which must be multiples of `3 * num_qubits`.
pub fn bench_scaling(sizes: &[usize], config: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(
            "scaling sizes must be strictly ascending".into(),
        ));
    }
    let per_layer = 3 * config.num_qubits;
    let states = random_states(config.num_qubits, config.prune.batch_size, config.seed)?;
    let targets = (0..states.len())
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let objective = Objective::classify_states(states, targets)?;
    let mut rows = Vec::new();
    for &gates in sizes {
        if gates == 0 || gates % per_layer != 0 {
            return Err(Error::Config(format!(
                "size {gates} is not a multiple of {per_layer} rotations per layer"
            )));
        }
        let layers = gates / per_layer;
        let circuit = build_hea(config.num_qubits, layers, config.seed)?;
        let mut times = Vec::new();
        let mut last = None;
        for _ in 0..config.repeats.max(1) {
            let t = Instant::now();
            let (_, report) = prune(&circuit, &objective, &config.prune)?;
            times.push(seconds(t));
            last = Some(report);
        }
        times.sort_by(f64::total_cmp);
        let report = last.expect("at least one repeat");
        rows.push(ScalingRow {
            gates,
            layers,
            seconds: times[times.len() / 2],
            pairs_evaluated: report.pairs_evaluated,
            edges: report.edges,
            cross_label_edges: report.cross_label_edges,
            threads: report.threads,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log seconds` against `log gates`.
pub fn loglog_slope(rows: &[ScalingRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.gates as f64).ln(), r.seconds.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub fn scaling_csv(rows: &[ScalingRow]) -> String {
    let mut s = String::from("gates,layers,seconds,pairs_evaluated,edges,threads\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.6e},{},{},{}\n",
            r.gates, r.layers, r.seconds, r.pairs_evaluated, r.edges, r.threads
        ));
    }
    s
}
