//! Implementations of the CLI subcommands.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use mfdlab_core::analytics::bernoulli::flow_quantiles;
use mfdlab_core::analytics::{
    detect_detaching, estimate_mfd, extreme_cuts, overlap_test, MfdEstimate, MfdProtocol,
};
use mfdlab_core::learn::{
    random_search, reinforce_td, train_supervised_extremes, RandomSearchConfig, ReinforceTdConfig,
    RewardSpec, SupervisedConfig,
};
use mfdlab_core::network::build_network;
use mfdlab_core::policy::{min_green, NeuralPolicy, Policy, PolicyKind};
use mfdlab_core::rng::{derive_seed, stream_rng, Stream};
use mfdlab_core::sim::{init_bernoulli, step};
use mfdlab_core::{Real, RealPolicy};

use crate::config::{ExperimentConfig, OutputDir};
use crate::csvio::{fmt_f64, mfd_aggregate_rows, mfd_samples_rows, read_aggregate_csv, CsvDoc};

const TOOL: &str = "mfdlab";

/// Fresh trainer weights start at this multiple of a standard normal.
/// Small draws keep the grown decision boundary centered on the queue
/// tie; larger ones freeze a lopsided boundary once the extreme states
/// saturate.
const INIT_SCALE: f64 = 0.01;

fn parse_policies(cfg: &ExperimentConfig) -> Result<Vec<PolicyKind>> {
    cfg.policy
        .split(',')
        .map(|s| s.trim().parse::<PolicyKind>().map_err(|e| anyhow!(e)))
        .collect()
}

fn load_weights(path: &Path) -> Result<NeuralPolicy<Real>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening weights file {}", path.display()))?;
    NeuralPolicy::load(&mut BufReader::new(file))
        .with_context(|| format!("parsing weights file {}", path.display()))
}

fn make_policy(kind: PolicyKind, weights: Option<&PathBuf>) -> Result<RealPolicy> {
    Ok(match kind {
        PolicyKind::Lqf => Policy::Lqf,
        PolicyKind::Sqf => Policy::Sqf,
        PolicyKind::Rnd => Policy::Rnd,
        PolicyKind::Neural => {
            let path = weights.ok_or_else(|| {
                anyhow!("invalid parameter `weights`: the neural policy needs --weights <file>")
            })?;
            Policy::Neural(load_weights(path)?)
        }
    })
}

fn protocol_of(cfg: &ExperimentConfig) -> MfdProtocol {
    MfdProtocol {
        densities: cfg.densities.clone(),
        reps: cfg.reps,
        warmup_cycles: cfg.warmup_cycles,
        measure_cycles: cfg.measure_cycles,
    }
}

/// LQF baseline aggregate: loaded from a previous `mfd` run when a path
/// is given, estimated on the spot otherwise.
fn lqf_baseline(cfg: &ExperimentConfig, baseline: Option<&PathBuf>) -> Result<MfdEstimate<Real>> {
    match baseline {
        Some(path) => {
            let est = read_aggregate_csv(path)?;
            if est.policy != "lqf" {
                bail!(
                    "invalid parameter `baseline`: {} holds a `{}` aggregate, expected lqf",
                    path.display(),
                    est.policy
                );
            }
            Ok(est)
        }
        None => {
            let seed = derive_seed(cfg.seed, Stream::Baseline);
            Ok(estimate_mfd(
                &cfg.network(),
                &RealPolicy::Lqf,
                &protocol_of(cfg),
                seed,
            )?)
        }
    }
}

pub fn simulate(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    k: f64,
    steps: usize,
    dump: bool,
) -> Result<()> {
    let kinds = parse_policies(cfg)?;
    if kinds.len() != 1 {
        bail!("invalid parameter `policy`: simulate takes exactly one policy");
    }
    let policy = make_policy(kinds[0], None)?;
    let net = build_network(&cfg.network())?;
    let mut state = init_bernoulli(&net, k, cfg.seed)?;
    let g = min_green(policy.kind(), cfg.ell, cfg.lambda)?;

    let mut doc = CsvDoc::new(TOOL, "simulate", &cfg.echo(), cfg.seed);
    doc.comment(&format!("k {k}"))
        .comment(&format!("g {g}"))
        .columns("step,moved,crossings,flow");
    let mut dump_text = String::new();
    let cells = net.total_cells() as f64;
    for t in 0..steps {
        if t > 0 && (t as u32).is_multiple_of(g) {
            mfdlab_core::sim::decide_phases(&mut state, &net, &policy, &[]);
        }
        let m = step(&mut state, &net);
        doc.row(&[
            t.to_string(),
            m.moved.to_string(),
            m.total_crossings().to_string(),
            fmt_f64(m.moved as f64 / cells),
        ]);
        if dump {
            writeln!(dump_text, "# step {t}").unwrap();
            dump_text.push_str(&state.dump());
        }
    }
    doc.write_to(&out.file("sim_metrics.csv")?)?;
    if dump {
        std::fs::write(out.file("sim_states.txt")?, dump_text)?;
    }
    println!("simulate: {steps} steps written to sim_metrics.csv");
    Ok(())
}

pub fn mfd(cfg: &ExperimentConfig, out: &OutputDir, weights: Option<&PathBuf>) -> Result<()> {
    let protocol = protocol_of(cfg);
    for kind in parse_policies(cfg)? {
        let policy = make_policy(kind, weights)?;
        let est = estimate_mfd(&cfg.network(), &policy, &protocol, cfg.seed)?;
        let label = kind.label();

        let mut samples = CsvDoc::new(TOOL, "mfd", &cfg.echo(), cfg.seed);
        mfd_samples_rows(&mut samples, &est);
        samples.write_to(&out.file(&format!("mfd_samples_{label}.csv"))?)?;

        let mut agg = CsvDoc::new(TOOL, "mfd", &cfg.echo(), cfg.seed);
        mfd_aggregate_rows(&mut agg, &est);
        agg.write_to(&out.file(&format!("mfd_aggregate_{label}.csv"))?)?;
        println!(
            "mfd: {label} peak mean flow {:.4} over {} densities",
            est.peak(),
            est.densities.len()
        );
    }
    Ok(())
}

pub fn cuts(cfg: &ExperimentConfig, out: &OutputDir) -> Result<()> {
    let cut = extreme_cuts::<Real>(cfg.lambda, cfg.delta)?;
    let mut doc = CsvDoc::new(TOOL, "cuts", &cfg.echo(), cfg.seed);
    doc.columns("lambda,delta,u0,w0").row(&[
        fmt_f64(cfg.lambda),
        fmt_f64(cfg.delta),
        fmt_f64(cut.u0),
        fmt_f64(cut.w0),
    ]);
    doc.write_to(&out.file("cuts.csv")?)?;

    let mut lines = CsvDoc::new(TOOL, "cuts", &cfg.echo(), cfg.seed);
    lines.columns("k,q_free,q_congested");
    for (k, q_free, q_cong) in cut.flow_lines(&cfg.densities) {
        lines.row(&[fmt_f64(k), fmt_f64(q_free), fmt_f64(q_cong)]);
    }
    lines.write_to(&out.file("cut_lines.csv")?)?;
    println!("cuts: u0 = w0 = {}", cut.u0);
    Ok(())
}

pub fn bernoulli(cfg: &ExperimentConfig, out: &OutputDir, cycles: &[u32]) -> Result<()> {
    let mut doc = CsvDoc::new(TOOL, "bernoulli", &cfg.echo(), cfg.seed);
    doc.columns("policy,j,ell,k,q05,q95");
    for kind in parse_policies(cfg)? {
        for &j in cycles {
            for &k in &cfg.densities {
                let q = flow_quantiles::<Real>(kind, j, cfg.ell as u32, k, &[0.05, 0.95])?;
                doc.row(&[
                    kind.label().to_string(),
                    j.to_string(),
                    cfg.ell.to_string(),
                    fmt_f64(k),
                    fmt_f64(q[0]),
                    fmt_f64(q[1]),
                ]);
            }
        }
    }
    doc.write_to(&out.file("bernoulli_bands.csv")?)?;
    println!("bernoulli: bands written for j = {cycles:?}");
    Ok(())
}

fn write_traces(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    name: &str,
    trainer: &mfdlab_core::learn::TrainerState<Real>,
) -> Result<()> {
    let mut doc = CsvDoc::new(TOOL, "train-rl", &cfg.echo(), cfg.seed);
    doc.columns("iteration,eta,grad_norm,pi_s1,pi_s2");
    for t in &trainer.traces {
        doc.row(&[
            t.iteration.to_string(),
            fmt_f64(t.eta),
            fmt_f64(t.grad_norm),
            fmt_f64(t.pi_s1),
            fmt_f64(t.pi_s2),
        ]);
    }
    doc.write_to(&out.file(name)?)?;
    Ok(())
}

fn save_weights(out: &OutputDir, name: &str, policy: &NeuralPolicy<Real>) -> Result<PathBuf> {
    let path = out.file(name)?;
    let mut buf = Vec::new();
    policy.save(&mut buf)?;
    std::fs::write(&path, buf)?;
    Ok(path)
}

#[allow(clippy::too_many_arguments)]
pub fn train_rl(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    baseline: Option<&PathBuf>,
    weights: Option<&PathBuf>,
) -> Result<()> {
    let net = build_network(&cfg.network())?;
    let g = min_green(PolicyKind::Neural, cfg.ell, cfg.lambda)?;
    let base = lqf_baseline(cfg, baseline)?;
    let spec = RewardSpec::from_mfd(&base, g)?;
    let theta0 = match weights {
        Some(path) => load_weights(path)?,
        None => {
            let mut rng = stream_rng(cfg.seed, Stream::Trainer);
            NeuralPolicy::random(cfg.hidden, &mut rng, INIT_SCALE)
        }
    };
    let rl = ReinforceTdConfig {
        training_density: cfg.training_density,
        alpha: cfg.alpha,
        beta: cfg.beta,
        iterations: cfg.iterations,
        seed: cfg.seed,
        monitored: 0,
    };
    let trainer = reinforce_td(&net, &spec, theta0, &rl)?;
    write_traces(cfg, out, "rl_trace.csv", &trainer)?;
    save_weights(out, "rl_weights.txt", &trainer.policy)?;
    let last = trainer.traces.last().unwrap();
    println!(
        "train-rl: {} iterations at k={}, final eta {:.4}, pi(s1) {:.3}, pi(s2) {:.3}",
        trainer.iteration, cfg.training_density, last.eta, last.pi_s1, last.pi_s2
    );
    Ok(())
}

pub fn train_supervised_cmd(cfg: &ExperimentConfig, out: &OutputDir, tolerance: f64) -> Result<()> {
    let mut rng = stream_rng(cfg.seed, Stream::Trainer);
    let theta0 = NeuralPolicy::<Real>::random(cfg.hidden, &mut rng, INIT_SCALE);
    let sup = SupervisedConfig {
        tolerance,
        ..SupervisedConfig::default()
    };
    let trained = train_supervised_extremes(theta0, cfg.ell, &sup)?;
    let (s1, s2) = mfdlab_core::policy::extreme_states(cfg.ell);
    save_weights(out, "sup_weights.txt", &trained)?;
    println!(
        "train-supervised: pi(s1) {:.4}, pi(s2) {:.4}, weights in sup_weights.txt",
        trained.forward(&s1),
        trained.forward(&s2)
    );
    Ok(())
}

pub fn random_search_cmd(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    trials: usize,
    baseline: Option<&PathBuf>,
) -> Result<()> {
    let base = lqf_baseline(cfg, baseline)?;
    let rs = RandomSearchConfig {
        trials,
        seed: cfg.seed,
        hidden: cfg.hidden,
        competitive_ratio: 0.9,
    };
    let results = random_search(&cfg.network(), &protocol_of(cfg), &base, &rs)?;

    let mut summary = CsvDoc::new(TOOL, "random-search", &cfg.echo(), cfg.seed);
    summary.columns("trial,min_ratio,competitive");
    let mut bands = CsvDoc::new(TOOL, "random-search", &cfg.echo(), cfg.seed);
    bands.columns("trial,k,mean,p5,p95");
    for trial in &results {
        summary.row(&[
            trial.index.to_string(),
            fmt_f64(trial.min_ratio),
            trial.competitive.to_string(),
        ]);
        for (k, band) in trial.mfd.densities.iter().zip(&trial.mfd.aggregates) {
            bands.row(&[
                trial.index.to_string(),
                fmt_f64(*k),
                fmt_f64(band.mean),
                fmt_f64(band.p5),
                fmt_f64(band.p95),
            ]);
        }
    }
    summary.write_to(&out.file("random_search_summary.csv")?)?;
    bands.write_to(&out.file("random_search_mfd.csv")?)?;
    let best = results
        .iter()
        .max_by(|a, b| a.min_ratio.partial_cmp(&b.min_ratio).unwrap())
        .unwrap();
    save_weights(out, "best_weights.txt", &best.policy)?;
    let competitive = results.iter().filter(|t| t.competitive).count();
    println!(
        "random-search: {competitive}/{trials} competitive ({:.0}%), best min ratio {:.3}",
        100.0 * competitive as f64 / trials as f64,
        best.min_ratio
    );
    Ok(())
}

pub fn detect(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    k: f64,
    horizon: Option<usize>,
    baseline: Option<&PathBuf>,
    weights: Option<&PathBuf>,
) -> Result<()> {
    let kinds = parse_policies(cfg)?;
    if kinds.len() != 1 {
        bail!("invalid parameter `policy`: detect takes exactly one policy");
    }
    let policy = make_policy(kinds[0], weights)?;
    let g = min_green(policy.kind(), cfg.ell, cfg.lambda)?;
    let horizon = horizon.unwrap_or(200 * g as usize);
    let lqf_mean: Real = match baseline {
        Some(path) => {
            let base = read_aggregate_csv(path)?;
            RewardSpec::from_mfd(&base, g)?.baseline(k)
        }
        None => {
            let protocol = MfdProtocol {
                densities: vec![k],
                ..protocol_of(cfg)
            };
            let seed = derive_seed(cfg.seed, Stream::Baseline);
            estimate_mfd(&cfg.network(), &RealPolicy::Lqf, &protocol, seed)?.aggregates[0].mean
        }
    };
    let report = detect_detaching(
        &cfg.network(),
        &policy,
        k,
        horizon,
        cfg.seed,
        Some(lqf_mean),
    )?;

    let mut doc = CsvDoc::new(TOOL, "detect", &cfg.echo(), cfg.seed);
    doc.columns(
        "policy,lambda,delta,p,k,horizon,permanent_colors,green_street_fraction,mean_flow,lqf_mean,detaching",
    );
    doc.row(&[
        kinds[0].label().to_string(),
        fmt_f64(cfg.lambda),
        fmt_f64(cfg.delta),
        fmt_f64(cfg.p),
        fmt_f64(k),
        horizon.to_string(),
        report.permanent_colors.to_string(),
        fmt_f64(report.green_street_fraction),
        fmt_f64(report.mean_flow),
        fmt_f64(lqf_mean),
        report.detaching.unwrap().to_string(),
    ]);
    doc.write_to(&out.file("detach_report.csv")?)?;
    println!(
        "detect: permanent_colors={} green_fraction={:.2} flow={:.4} lqf={:.4}",
        report.permanent_colors, report.green_street_fraction, report.mean_flow, lqf_mean
    );
    Ok(())
}

pub fn compare(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    a: &Path,
    b: &Path,
    ratio: f64,
) -> Result<()> {
    let ea = read_aggregate_csv(a)?;
    let eb = read_aggregate_csv(b)?;
    if ea.densities != eb.densities {
        bail!(
            "structural mismatch: {} and {} sample different density grids",
            a.display(),
            b.display()
        );
    }
    let overlap = overlap_test(&ea, &eb, (0.0, 1.0))?;
    let mut min_ratio = f64::INFINITY;
    let mut doc = CsvDoc::new(TOOL, "compare", &cfg.echo(), cfg.seed);
    doc.comment(&format!("a {}", ea.policy))
        .comment(&format!("b {}", eb.policy))
        .columns("k,mean_a,p5_a,p95_a,mean_b,p5_b,p95_b,ratio_a_over_b,bands_overlap");
    for (i, k) in ea.densities.iter().enumerate() {
        let (ba, bb) = (&ea.aggregates[i], &eb.aggregates[i]);
        let r = if bb.mean > 0.0 {
            ba.mean / bb.mean
        } else {
            1.0
        };
        min_ratio = min_ratio.min(r);
        let bands_overlap = ba.p5 <= bb.p95 && bb.p5 <= ba.p95;
        doc.row(&[
            fmt_f64(*k),
            fmt_f64(ba.mean),
            fmt_f64(ba.p5),
            fmt_f64(ba.p95),
            fmt_f64(bb.mean),
            fmt_f64(bb.p5),
            fmt_f64(bb.p95),
            fmt_f64(r),
            bands_overlap.to_string(),
        ]);
    }
    let competitive = min_ratio >= ratio;
    doc.comment(&format!("overlap_all {overlap}"))
        .comment(&format!("min_ratio {min_ratio}"))
        .comment(&format!("competitive {competitive}"));
    doc.write_to(&out.file("compare.csv")?)?;
    println!(
        "compare: {} vs {} overlap={overlap} min_ratio={min_ratio:.3} competitive={competitive}",
        ea.policy, eb.policy
    );
    Ok(())
}
