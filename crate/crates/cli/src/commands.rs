//! The subcommands. Each returns `Ok(())` or an error that carries its exit code.

use std::io::Write;
use std::path::{Path, PathBuf};

use selfmod_core::{
    fme_run, fresh_evaluation, hillclimb_run, init_params, run_seeds, stream_rng, trace_compare, variance_sweep,
    LayerDims, SearchOutcome, SweepResult, UpdateRule, DEFAULT_SIGMA_GRID,
};

use crate::config::{ConfigFlags, ExperimentConfig, Mode, Resolved, Toggle};
use crate::output::{read_histories_from, write_histories_to, write_sweep};
use crate::plot::{render_svg, SeriesStats};
use crate::CliError;

/// Steps of the fresh evaluation used for the swapping bandit.
pub const EVALUATION_STEPS: usize = 10_000;

fn announce(out: &mut dyn Write, resolved: &Resolved) -> Result<(), CliError> {
    writeln!(out, "config: {resolved}")?;
    Ok(())
}

fn run_resolved(resolved: &Resolved, mode: Mode, sigma: f64) -> Result<Vec<SearchOutcome>, CliError> {
    let kind = resolved.kind;
    let seeds = &resolved.config.seeds;
    let outs = match mode {
        Mode::Fme => run_seeds(&resolved.fme, seeds, |c| fme_run(c, &kind))?,
        Mode::Hillclimb => run_seeds(&resolved.fme, seeds, |c| hillclimb_run(c, sigma, &kind))?,
    };
    Ok(outs)
}

fn write_outcomes(path: &Path, seeds: &[u64], outs: &[SearchOutcome]) -> Result<(), CliError> {
    let runs: Vec<_> = seeds.iter().copied().zip(outs.iter().map(|o| &o.history)).collect();
    write_histories_to(path, &runs)
}

fn summarize(out: &mut dyn Write, seeds: &[u64], outs: &[SearchOutcome]) -> Result<(), CliError> {
    for (seed, o) in seeds.iter().zip(outs) {
        let first = o.history.first_reaching(o.history.final_best().unwrap_or(f64::NAN));
        writeln!(
            out,
            "seed {seed}: final best {:.4} (first reached at iteration {}), {} env steps",
            o.best.fitness,
            first.map_or("-".to_string(), |i| i.to_string()),
            o.history.rows.last().map_or(0, |r| r.total_env_steps)
        )?;
    }
    Ok(())
}

pub fn cmd_run(flags: &ConfigFlags, out: &mut dyn Write) -> Result<(), CliError> {
    let config = ExperimentConfig::from_flags(flags)?;
    let resolved = config.resolve()?;
    announce(out, &resolved)?;
    let outs = run_resolved(&resolved, config.mode, config.noise_sigma)?;
    write_outcomes(&config.out, &config.seeds, &outs)?;
    summarize(out, &config.seeds, &outs)?;
    writeln!(out, "wrote {}", config.out.display())?;
    Ok(())
}

pub fn parse_sigmas(s: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad sigma {p:?}"))))
        .collect::<Result<_, _>>()?;
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(CliError::Usage("sigmas must be finite and non-negative".into()));
    }
    Ok(v)
}

fn sweep_resolved(resolved: &Resolved, sigmas: &[f64]) -> Result<SweepResult, CliError> {
    Ok(variance_sweep(sigmas, &resolved.fme, &resolved.kind, &resolved.config.seeds)?)
}

pub fn cmd_sweep(flags: &ConfigFlags, sigmas: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let base = ExperimentConfig { out: PathBuf::from("sweep.csv"), ..ExperimentConfig::default() };
    let config = ExperimentConfig::layered(base, flags)?;
    let sigmas = match sigmas {
        Some(s) => parse_sigmas(s)?,
        None => DEFAULT_SIGMA_GRID.to_vec(),
    };
    let resolved = config.resolve()?;
    announce(out, &resolved)?;
    let sweep = sweep_resolved(&resolved, &sigmas)?;
    write_sweep(&config.out, &sweep)?;
    for row in &sweep.rows {
        writeln!(out, "sigma {}: mean final best {:.4}", row.sigma, row.mean_final_best)?;
    }
    writeln!(out, "best sigma: {}", sweep.best_sigma())?;
    writeln!(out, "wrote {}", config.out.display())?;
    Ok(())
}

pub fn cmd_plot(inputs: &[PathBuf], svg: &Path, title: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage("plot needs at least one CSV".into()));
    }
    let mut series = Vec::with_capacity(inputs.len());
    for path in inputs {
        let rows = read_histories_from(path)?;
        if rows.is_empty() {
            return Err(CliError::Data(format!("{}: no data rows", path.display())));
        }
        let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        series.push(SeriesStats::from_rows(label, &rows));
    }
    let title = title.unwrap_or("best fitness, mean and one standard deviation across seeds");
    std::fs::write(svg, render_svg(&series, title)).map_err(|e| CliError::io(svg, e))?;
    writeln!(out, "wrote {}", svg.display())?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EquivalenceOptions {
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub tolerance: f64,
    pub input_width: usize,
    pub hidden_width: usize,
    pub num_layers: usize,
    pub outputs: usize,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            steps: 1000,
            tolerance: 1e-12,
            input_width: 4,
            hidden_width: 32,
            num_layers: 3,
            outputs: 2,
        }
    }
}

/// Random inputs in [-2, 2) for the trace comparison.
pub fn equivalence_inputs(seed: u64, steps: usize, width: usize) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = stream_rng(seed, 1);
    (0..steps).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

pub fn cmd_verify_equivalence(opts: &EquivalenceOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let dims = LayerDims::stack(opts.input_width, opts.hidden_width, opts.num_layers, opts.outputs)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if opts.seeds.is_empty() || opts.steps == 0 {
        return Err(CliError::Usage("need at least one seed and one step".into()));
    }
    let mut failed = 0;
    for &seed in &opts.seeds {
        let params = init_params(&dims, &mut stream_rng(seed, 0))?;
        let inputs = equivalence_inputs(seed, opts.steps, opts.input_width);
        let cmp = trace_compare(&params, &inputs, opts.tolerance)?;
        writeln!(
            out,
            "seed {seed}: {} steps, max deviation {:e}: {}",
            cmp.steps,
            cmp.max_deviation,
            if cmp.passed { "match" } else { "MISMATCH" }
        )?;
        failed += usize::from(!cmp.passed);
    }
    if failed > 0 {
        return Err(CliError::Failed(format!("{failed} of {} traces differ", opts.seeds.len())));
    }
    writeln!(out, "all {} traces agree within {:e}", opts.seeds.len(), opts.tolerance)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// FME against tuned hill climbing on the two-armed bandit.
    #[value(name = "fig2-left")]
    BanditComparison,
    /// FME against tuned hill climbing on cart-pole.
    #[value(name = "fig2-right")]
    CartpoleComparison,
    /// Swapping bandit with and without the reward as input.
    #[value(name = "fig3")]
    MetaBandit,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::BanditComparison => "fig2-left",
            Preset::CartpoleComparison => "fig2-right",
            Preset::MetaBandit => "fig3",
        }
    }

    pub fn base_config(self) -> ExperimentConfig {
        let (env, iterations) = match self {
            Preset::BanditComparison => ("bandit", 200),
            Preset::CartpoleComparison => ("cartpole", 5000),
            Preset::MetaBandit => ("bandit-swap", 3000),
        };
        ExperimentConfig { env: env.into(), iterations, ..ExperimentConfig::default() }
    }
}

pub fn cmd_preset(preset: Preset, out_dir: &Path, flags: &ConfigFlags, out: &mut dyn Write) -> Result<(), CliError> {
    let config = ExperimentConfig::layered(preset.base_config(), flags)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let name = preset.name();
    let file = |suffix: &str| out_dir.join(format!("{name}-{suffix}"));
    match preset {
        Preset::BanditComparison | Preset::CartpoleComparison => {
            let resolved = config.resolve()?;
            announce(out, &resolved)?;
            let sweep = sweep_resolved(&resolved, &DEFAULT_SIGMA_GRID)?;
            write_sweep(&file("sweep.csv"), &sweep)?;
            writeln!(out, "tuned sigma: {}", sweep.best_sigma())?;

            let fme = run_resolved(&resolved, Mode::Fme, 0.0)?;
            write_outcomes(&file("fme.csv"), &config.seeds, &fme)?;
            writeln!(out, "fitness monotonic execution:")?;
            summarize(out, &config.seeds, &fme)?;

            let hc = run_resolved(&resolved, Mode::Hillclimb, sweep.best_sigma())?;
            write_outcomes(&file("hillclimb.csv"), &config.seeds, &hc)?;
            writeln!(out, "hill climbing:")?;
            summarize(out, &config.seeds, &hc)?;

            cmd_plot(&[file("fme.csv"), file("hillclimb.csv")], &out_dir.join(format!("{name}.svg")), None, out)
        }
        Preset::MetaBandit => {
            let mut eval_rows = Vec::new();
            let mut csvs = Vec::new();
            for (feed, tag) in [(Toggle::On, "reward"), (Toggle::Off, "no-reward")] {
                let resolved = ExperimentConfig { feed_reward: feed, ..config.clone() }.resolve()?;
                announce(out, &resolved)?;
                let outs = run_resolved(&resolved, Mode::Fme, 0.0)?;
                let path = file(&format!("{tag}.csv"));
                write_outcomes(&path, &config.seeds, &outs)?;
                csvs.push(path);
                for (&seed, o) in config.seeds.iter().zip(&outs) {
                    let score = fresh_evaluation(
                        &o.best.params,
                        &resolved.kind,
                        &resolved.fme.input,
                        EVALUATION_STEPS,
                        UpdateRule::SelfModify,
                        seed,
                    )?;
                    writeln!(
                        out,
                        "{tag} seed {seed}: best fitness {:.4}, fresh evaluation {score:.4}",
                        o.best.fitness
                    )?;
                    eval_rows.push((seed, resolved.feed_reward, score));
                }
            }
            let eval_path = file("eval.csv");
            let f = std::fs::File::create(&eval_path).map_err(|e| CliError::io(&eval_path, e))?;
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f);
            w.write_record(["seed", "feed_reward", "eval_reward"])?;
            for (seed, feed, score) in eval_rows {
                w.write_record([seed.to_string(), feed.to_string(), score.to_string()])?;
            }
            w.flush()?;
            writeln!(out, "wrote {}", eval_path.display())?;
            cmd_plot(&csvs, &out_dir.join(format!("{name}.svg")), None, out)
        }
    }
}
