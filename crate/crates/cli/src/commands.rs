use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use rayon::ThreadPool;
use sparse_lqr_core::grasp::grasp_count;
use sparse_lqr_core::ispa::ispa_solve_with;
use sparse_lqr_core::ista::fista_solve_with_momentum;
use sparse_lqr_core::sparsity::{g_value, nnz};
use sparse_lqr_core::systems::{
    collect_dataset, gen_example, gen_multiagent, DatasetSpec, LabeledExample, PerturbTargets,
};
use sparse_lqr_core::unrolled::{
    example_loss, forward, nmse, train_with, GradientMode, SparsityOp, TrainOptions, UnrolledNet,
};
use sparse_lqr_core::{
    admm_solve, cost_j, grasp_solve, ista_solve, lqr_gain, AdmmConfig, Ball, GraspConfig, IspaConfig, IstaConfig, Mat,
    Plant, Regularizer, RegularizerKind, SolveResult,
};

use crate::cli::{
    Algo, AlgoArgs, BallName, Cli, Command, DatasetArgs, EvalArgs, GenArgs, GlobalArgs, ModeArg, NetArgs, OpArg,
    RegName, ReplayArgs, SetArg, SolveArgs, SweepArgs, TuneArgs,
};
use crate::error::{CliError, Result, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_OK};
use crate::files::{
    from_rows, load_net, load_plant, read_json, save_net, save_plant, to_rows, write_json, DatasetFile, DatasetHeader,
    EstimatesFile, GainFile, StartGainFile, Targets,
};
use crate::manifest::{hash_file, redirect_out, Manifest, MANIFEST_NAME};
use crate::table::{float, trace_table, Table};

/// Files read and written by one command.
struct Run<'a> {
    global: &'a GlobalArgs,
    pool: ThreadPool,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

impl Run<'_> {
    fn input(&mut self, path: &Path) -> PathBuf {
        self.inputs.push(path.to_owned());
        path.to_owned()
    }

    fn output(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_owned());
        self.global.out.join(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.output(name);
        fs::write(&path, text).map_err(|e| CliError::io(path, e))
    }
}

/// Run a parsed command line; `raw_args` are the arguments after the program
/// name, recorded in the manifest. Returns the process exit code.
pub fn execute(cli: &Cli, raw_args: &[String]) -> Result<i32> {
    let global = &cli.global;
    let started = Instant::now();
    fs::create_dir_all(&global.out).map_err(|e| CliError::io(&global.out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.jobs as usize)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", global.jobs)))?;
    let mut run = Run {
        global,
        pool,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let (name, code) = match &cli.command {
        Command::Gen(a) => ("gen", gen(&mut run, a)?),
        Command::Solve(a) => ("solve", solve(&mut run, a)?),
        Command::Sweep(a) => ("sweep", sweep(&mut run, a)?),
        Command::Dataset(a) => ("dataset", dataset(&mut run, a)?),
        Command::Tune(a) => ("tune", tune(&mut run, a)?),
        Command::Eval(a) => ("eval", eval(&mut run, a)?),
        Command::Replay(a) => return replay(global, a),
    };

    let manifest = Manifest {
        command: name.into(),
        args: raw_args.to_vec(),
        config: serde_json::to_value(cli).expect("arguments serialize to JSON"),
        inputs: run.inputs.iter().map(|p| hash_file(p)).collect::<Result<_>>()?,
        seed: global.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: run
            .outputs
            .iter()
            .map(|name| {
                let mut h = hash_file(&global.out.join(name))?;
                h.path = name.into();
                Ok(h)
            })
            .collect::<Result<_>>()?,
    };
    write_json(&global.out.join(MANIFEST_NAME), &manifest)?;
    Ok(code)
}

fn gen(run: &mut Run, a: &GenArgs) -> Result<i32> {
    let plant = gen_multiagent(a.agents as usize)?;
    let path = run.output("plant.json");
    save_plant(&plant, &path)?;
    println!(
        "wrote {} (n = {}, m = {}, K is {}x{})",
        path.display(),
        plant.n(),
        plant.m(),
        plant.m(),
        plant.n()
    );
    Ok(EXIT_OK)
}

/// A finished solve and the values reported for it.
struct Solved {
    result: SolveResult,
    j: f64,
    g: f64,
    param: f64,
}

fn regularizer(a: &AlgoArgs) -> Result<Regularizer> {
    let kind = match a.regularizer {
        RegName::L1 => RegularizerKind::L1,
        RegName::BlockL1 => RegularizerKind::BlockL1,
        RegName::WeightedL1 => RegularizerKind::WeightedL1,
        RegName::WeightedBlockL1 => RegularizerKind::WeightedBlockL1,
    };
    Ok(Regularizer::new(kind).with_epsilon(a.epsilon)?)
}

fn ista_config(a: &AlgoArgs, g: &GlobalArgs, gamma: f64) -> Result<IstaConfig> {
    let d = IstaConfig::default();
    Ok(IstaConfig {
        gamma,
        rho0: a.rho0.unwrap_or(d.rho0),
        alpha: a.alpha.unwrap_or(d.alpha),
        tol: g.tol.unwrap_or(d.tol),
        max_iter: g.max_iter.unwrap_or(d.max_iter),
        max_backtracks: a.max_backtracks,
        regularizer: regularizer(a)?,
        strict_acceptance: !a.non_strict,
    })
}

fn count_arg(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::Usage(format!(
            "{what} must be a nonnegative integer, got {v}"
        )))
    }
}

/// `G` of the unweighted counterpart of the configured regularizer.
fn plain_g(plant: &Plant, k: &Mat, kind: RegName) -> Result<f64> {
    let reg = match kind {
        RegName::L1 | RegName::WeightedL1 => Regularizer::l1(),
        RegName::BlockL1 | RegName::WeightedBlockL1 => Regularizer::block_l1(),
    };
    Ok(g_value(k, &reg, plant.partition())?)
}

fn ispa_ball(kind: BallName, radius: f64) -> Result<Ball> {
    Ok(match kind {
        BallName::L0 => Ball::L0(count_arg(radius, "l0 radius")?),
        BallName::L1 => Ball::L1(radius),
        BallName::Block => Ball::Block(radius),
    })
}

/// Solve with the settings in `a`; `value` overrides the swept parameter.
fn solve_instance(plant: &Plant, k0: &Mat, a: &AlgoArgs, g: &GlobalArgs, value: Option<f64>) -> Result<Solved> {
    let (result, param) = match a.algo {
        Algo::Ista | Algo::Fista => {
            let gamma = value.unwrap_or(a.gamma);
            let cfg = ista_config(a, g, gamma)?;
            let res = if a.algo == Algo::Ista {
                ista_solve(plant, k0, &cfg)?
            } else {
                fista_solve_with_momentum(plant, k0, &cfg, a.momentum)?
            };
            (res, gamma)
        }
        Algo::Ispa => {
            let radius = value
                .or(a.radius)
                .ok_or_else(|| CliError::Usage("ispa needs --radius".into()))?;
            let mut cfg = IspaConfig::new(ispa_ball(a.ball, radius)?);
            cfg.rho0 = a.rho0.unwrap_or(cfg.rho0);
            cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
            cfg.armijo_c = a.armijo_c;
            cfg.tol = g.tol.unwrap_or(cfg.tol);
            cfg.max_iter = g.max_iter.unwrap_or(cfg.max_iter);
            cfg.max_backtracks = a.max_backtracks;
            (ispa_solve_with(plant, k0, &cfg, &IstaConfig::default())?, radius)
        }
        Algo::Admm => {
            let d = AdmmConfig::default();
            let gamma = value.unwrap_or(a.gamma);
            let cfg = AdmmConfig {
                gamma,
                rho: a.rho,
                eps_abs: a.eps_abs,
                eps_rel: a.eps_rel,
                max_iter: g.max_iter.unwrap_or(d.max_iter),
                inner_steps: a.inner_steps.unwrap_or(d.inner_steps),
                inner_tol: a.inner_tol,
                max_backtracks: a.max_backtracks,
                regularizer: regularizer(a)?,
            };
            (admm_solve(plant, k0, &cfg)?, gamma)
        }
        Algo::Grasp => {
            let s = match value {
                Some(v) => count_arg(v, "s")?,
                None => a.s.ok_or_else(|| CliError::Usage("grasp needs --s".into()))?,
            };
            let mut cfg = GraspConfig::new(s);
            cfg.tol = g.tol.unwrap_or(cfg.tol);
            cfg.max_iter = g.max_iter.unwrap_or(cfg.max_iter);
            cfg.inner_steps = a.inner_steps.unwrap_or(cfg.inner_steps);
            cfg.step0 = a.step0;
            cfg.alpha = a.alpha.unwrap_or(cfg.alpha);
            cfg.armijo_c = a.armijo_c;
            cfg.max_backtracks = a.max_backtracks;
            cfg.max_bisections = a.max_bisections;
            cfg.exempt_diagonal = !a.no_exempt_diagonal;
            cfg.block_mode = a.block_mode;
            (grasp_solve(plant, k0, &cfg)?, s as f64)
        }
    };
    let k = &result.gain.k;
    let gv = match a.algo {
        Algo::Ista | Algo::Fista | Algo::Admm => plain_g(plant, k, a.regularizer)?,
        Algo::Ispa => ispa_ball(a.ball, param)?.value(k, plant.partition())?,
        Algo::Grasp => {
            let mut cfg = GraspConfig::new(0);
            cfg.exempt_diagonal = !a.no_exempt_diagonal;
            cfg.block_mode = a.block_mode;
            grasp_count(k, plant.partition(), &cfg) as f64
        }
    };
    let j = match result.gain.cost {
        Some(j) => j,
        None => cost_j(plant, k)?,
    };
    Ok(Solved {
        result,
        j,
        g: gv,
        param,
    })
}

fn algo_name(a: Algo) -> &'static str {
    match a {
        Algo::Ista => "ista",
        Algo::Fista => "fista",
        Algo::Ispa => "ispa",
        Algo::Admm => "admm",
        Algo::Grasp => "grasp",
    }
}

fn start_gain(run: &mut Run, plant: &Plant, k0: Option<&Path>) -> Result<Mat> {
    match k0 {
        None => Ok(lqr_gain(plant)?),
        Some(path) => {
            let path = run.input(path);
            let file: StartGainFile = read_json(&path)?;
            from_rows(&file.k, "K", Some((plant.m(), plant.n())))
        }
    }
}

fn solve(run: &mut Run, a: &SolveArgs) -> Result<i32> {
    let plant = load_plant(&run.input(&a.plant))?;
    let k0 = start_gain(run, &plant, a.k0.as_deref())?;
    let s = solve_instance(&plant, &k0, &a.algo, run.global, None)?;
    let res = &s.result;
    let gain = GainFile {
        k: to_rows(&res.gain.k),
        j: s.j,
        g: s.g,
        nnz: nnz(&res.gain.k),
        gamma_or_radius: s.param,
        algorithm: algo_name(a.algo.algo).into(),
        iterations: res.trace.iterations(),
        converged: res.converged(),
        status: res.trace.status.as_str().into(),
        abscissa: res.gain.abscissa,
    };
    write_json(&run.output("gain.json"), &gain)?;
    run.write_text("trace.csv", trace_table(&res.trace).as_str())?;
    println!(
        "{}: J = {}, G = {}, nnz = {}, {} iterations, {}",
        gain.algorithm, gain.j, gain.g, gain.nnz, gain.iterations, gain.status
    );
    Ok(if gain.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Parse `START:STOP:COUNT` into evenly spaced values.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("--range expects START:STOP:COUNT, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts[..] else {
        return Err(bad());
    };
    let start: f64 = start.parse().map_err(|_| bad())?;
    let stop: f64 = stop.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let h = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { stop } else { start + h * i as f64 })
        .collect())
}

fn sweep(run: &mut Run, a: &SweepArgs) -> Result<i32> {
    let values = match &a.range {
        Some(r) => parse_range(r)?,
        None => a.values.clone(),
    };
    if values.is_empty() {
        return Err(CliError::Usage("sweep range is empty".into()));
    }
    let plant = load_plant(&run.input(&a.plant))?;
    let k0 = lqr_gain(&plant)?;
    let global = run.global;
    let solved: Vec<Result<Solved>> = run.pool.install(|| {
        values
            .par_iter()
            .map(|&v| solve_instance(&plant, &k0, &a.algo, global, Some(v)))
            .collect()
    });
    let mut table = Table::new(&["value", "J", "G", "nnz", "iters", "lyap_solves"]);
    let mut all_converged = true;
    for (v, s) in values.iter().zip(solved) {
        let s = s?;
        all_converged &= s.result.converged();
        table.row(&[
            float(*v),
            float(s.j),
            float(s.g),
            nnz(&s.result.gain.k).to_string(),
            s.result.trace.iterations().to_string(),
            s.result.trace.lyapunov_solves.to_string(),
        ]);
    }
    run.write_text("sweep.csv", table.as_str())?;
    print!("{}", table.as_str());
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn dataset(run: &mut Run, a: &DatasetArgs) -> Result<i32> {
    let base = match &a.plant {
        Some(p) => load_plant(&run.input(p))?,
        None => gen_multiagent(a.agents as usize)?,
    };
    let spec = DatasetSpec {
        base: base.clone(),
        count: a.count,
        noise_sigma: a.sigma,
        seed: run.global.seed,
        targets: match a.targets {
            Targets::A => PerturbTargets::A,
            Targets::All => PerturbTargets::All,
        },
    };
    spec.validate()?;
    let reference = IstaConfig {
        gamma: a.gamma,
        tol: run.global.tol.unwrap_or(1e-4),
        max_iter: run.global.max_iter.unwrap_or(10_000),
        ..IstaConfig::default()
    };
    let results: Vec<_> = run.pool.install(|| {
        (0..spec.count)
            .into_par_iter()
            .map(|i| gen_example(&spec, &reference, i))
            .collect()
    });
    let ds = collect_dataset(&spec, results)?;
    let header = DatasetHeader {
        count: spec.count,
        sigma: spec.noise_sigma,
        seed: spec.seed,
        targets: a.targets,
        gamma: a.gamma,
        draws: ds.draws,
    };
    write_json(
        &run.output("dataset.json"),
        &DatasetFile::from_dataset(header, &base, &ds),
    )?;
    println!(
        "{} examples from {} draws ({} rejected)",
        ds.examples.len(),
        ds.draws,
        ds.rejections()
    );
    Ok(EXIT_OK)
}

struct Loaded {
    header: DatasetHeader,
    examples: Vec<LabeledExample>,
}

fn load_dataset(run: &mut Run, path: &Path) -> Result<Loaded> {
    let file: DatasetFile = read_json(&run.input(path))?;
    Ok(Loaded {
        examples: file.to_examples()?,
        header: file.header,
    })
}

fn untuned(a: &NetArgs, header: &DatasetHeader, depth: usize) -> Result<UnrolledNet> {
    let op = match a.op {
        OpArg::Elementwise => SparsityOp::Elementwise,
        OpArg::Block => SparsityOp::Block,
    };
    Ok(UnrolledNet::untuned(
        depth,
        a.rho0,
        a.gamma.unwrap_or(header.gamma),
        op,
    )?)
}

fn tune(run: &mut Run, a: &TuneArgs) -> Result<i32> {
    let data = load_dataset(run, &a.dataset)?;
    if a.net.train == 0 || a.net.train > data.examples.len() {
        return Err(CliError::Usage(format!(
            "--train must be in 1..={}, got {}",
            data.examples.len(),
            a.net.train
        )));
    }
    let train_set = &data.examples[..a.net.train];
    let net = untuned(&a.net, &data.header, a.layers)?;
    let opts = TrainOptions {
        epochs: a.epochs,
        step: a.step,
        perturb: a.perturb,
        batch: a.batch,
        seed: run.global.seed,
        mode: match a.mode {
            ModeArg::Spsa => GradientMode::Spsa,
            ModeArg::Fd => GradientMode::FiniteDifference,
        },
        checkpoint_every: a.checkpoint_every,
    };
    let pool = &run.pool;
    let report = train_with(&net, train_set, &opts, |n, batch| {
        pool.install(|| batch.par_iter().map(|ex| example_loss(n, ex)).collect())
    })?;
    save_net(&report.net, &run.output("net.json"))?;
    println!(
        "training loss {} -> {} ({} accepted updates)",
        report.initial_loss, report.final_loss, report.accepted
    );
    Ok(if report.improved { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn net_nmse(pool: &ThreadPool, net: &UnrolledNet, examples: &[LabeledExample]) -> Result<f64> {
    let est: Vec<Mat> = pool.install(|| {
        examples
            .par_iter()
            .map(|ex| Ok(forward(net, &ex.plant, &ex.k0)?.gain.k))
            .collect::<Result<_>>()
    })?;
    let refs: Vec<Mat> = examples.iter().map(|ex| ex.reference.k.clone()).collect();
    Ok(nmse(&est, &refs)?)
}

fn eval(run: &mut Run, a: &EvalArgs) -> Result<i32> {
    let data = load_dataset(run, &a.dataset)?;
    let split = a.net.train.min(data.examples.len());
    let set = match a.set {
        SetArg::Train => &data.examples[..split],
        SetArg::Test => &data.examples[split..],
        SetArg::All => &data.examples[..],
    };
    if set.is_empty() {
        return Err(CliError::Input("selected evaluation set is empty".into()));
    }

    if let Some(path) = &a.estimates {
        let file: EstimatesFile = read_json(&run.input(path))?;
        if file.estimates.len() != set.len() {
            return Err(CliError::Input(format!(
                "estimates: expected {} matrices, found {}",
                set.len(),
                file.estimates.len()
            )));
        }
        let shape = (set[0].reference.k.nrows(), set[0].reference.k.ncols());
        let est = file
            .estimates
            .iter()
            .enumerate()
            .map(|(i, rows)| from_rows(rows, &format!("estimates[{i}]"), Some(shape)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<Mat> = set.iter().map(|ex| ex.reference.k.clone()).collect();
        let value = nmse(&est, &refs)?;
        let mut table = Table::new(&["count", "nmse"]);
        table.row(&[set.len().to_string(), float(value)]);
        run.write_text("nmse.csv", table.as_str())?;
        print!("{}", table.as_str());
        return Ok(EXIT_OK);
    }

    let mut tuned: BTreeMap<usize, UnrolledNet> = BTreeMap::new();
    for path in &a.nets {
        let net = load_net(&run.input(path))?;
        let depth = net.depth();
        if tuned.insert(depth, net).is_some() {
            return Err(CliError::Usage(format!("two networks of depth {depth}")));
        }
    }
    let mut depths: Vec<usize> = a.depths.iter().copied().chain(tuned.keys().copied()).collect();
    depths.sort_unstable();
    depths.dedup();
    if depths.contains(&0) {
        return Err(CliError::Usage("depths must be positive".into()));
    }

    let mut table = Table::new(&["depth", "untuned_nmse", "tuned_nmse"]);
    for d in depths {
        let base = net_nmse(&run.pool, &untuned(&a.net, &data.header, d)?, set)?;
        let tuned_cell = match tuned.get(&d) {
            Some(net) => float(net_nmse(&run.pool, net, set)?),
            None => String::new(),
        };
        table.row(&[d.to_string(), float(base), tuned_cell]);
    }
    run.write_text("nmse.csv", table.as_str())?;
    print!("{}", table.as_str());
    Ok(EXIT_OK)
}

fn replay(global: &GlobalArgs, a: &ReplayArgs) -> Result<i32> {
    let manifest: Manifest = read_json(&a.manifest)?;
    for input in &manifest.inputs {
        let now = hash_file(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Input(format!(
                "{}: contents changed since the run",
                input.path.display()
            )));
        }
    }
    let args = redirect_out(&manifest.args, &global.out);
    let cli = Cli::try_parse_from(std::iter::once("sparse-lqr".into()).chain(args.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a replay manifest cannot be replayed".into()));
    }
    let raw: Vec<String> = args.iter().map(|s| s.to_string_lossy().into_owned()).collect();
    let code = execute(&cli, &raw)?;

    let mut differ = 0;
    for out in &manifest.outputs {
        let now = hash_file(&global.out.join(&out.path))?;
        let same = now.sha256 == out.sha256;
        differ += usize::from(!same);
        println!("{} {}", if same { "identical" } else { "DIFFERS" }, out.path.display());
    }
    Ok(if differ == 0 { code } else { EXIT_NUMERICAL })
}
