use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ac2d_core::besov::{besov_norm_with, build_partition, BesovIndex, BlockGrid, DyadicPartition, DEFAULT_OVERSAMPLE};
use ac2d_core::dynamics::{run_galerkin, GalerkinConfig, SolverOptions};
use ac2d_core::harness::{
    moment_suite_with_constant, run_linear_rate_study, run_nonlinear_rate_study, RateReport, StudyConfig,
};
use ac2d_core::kernels::{verify_kernel_bounds, ModeSet};
use ac2d_core::noise::sample_driving_path;
use ac2d_core::wick::{renorm_constant, renorm_table, CoefficientSet};
use ac2d_core::{fft_size, GridField, SpectralField};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ac2d", version, about = "Galerkin simulation and convergence checks for the renormalized Allen-Cahn equation on the 2-D torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the renormalization constant and its doubling increments.
    Renorm {
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 4, 8, 16, 32, 64, 128, 256])]
        cutoffs: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one path at one cutoff and write grid snapshots of the solution.
    Simulate(SimulateArgs),
    /// Self-convergence study of the Wick powers of the linear solution.
    LinearRate(StudyArgs),
    /// Self-convergence study of the full equation.
    AcRate(StudyArgs),
    /// Besov norm of a grid field stored as CSV.
    BesovNorm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value = "inf")]
        p: f64,
        #[arg(long, default_value = "inf")]
        q: f64,
        #[arg(long)]
        j_max: Option<i32>,
        #[arg(long, default_value_t = DEFAULT_OVERSAMPLE)]
        oversample: f64,
    },
    /// Compare lattice kernel convolutions with their decay bounds.
    KernelCheck {
        #[arg(long, default_value_t = 2)]
        order: u32,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize, 8, 16, 32])]
        cutoffs: Vec<usize>,
        /// Modes `|m| ≤ factor · N` in one octant.
        #[arg(long, default_value_t = 2.0)]
        factor: f64,
        #[arg(long)]
        radius: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo moment checks of the stationary field and its Wick powers.
    Moments {
        #[arg(long, default_value_t = 8)]
        cutoff: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Multiplies the Wick constant; anything but 1 should fail the Wick checks.
        #[arg(long, default_value_t = 1.0)]
        constant_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 32)]
    cutoff: usize,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficients `a0,a1,a2,a3` of the Wick polynomial.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![0.0, 1.0, 0.0, -1.0])]
    coefficients: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    snapshots: usize,
    /// Grid points per side of the written snapshots; defaults to `2N+1` rounded up.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value = "simulation")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML file with `StudyConfig` keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    regularity: Option<f64>,
    #[arg(long)]
    time_weight: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    reference_cutoff: Option<usize>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    oversample: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    #[arg(long, default_value = "study")]
    out_dir: PathBuf,
    /// Also write `<series>.dat` files with columns `N mean_error`.
    #[arg(long)]
    plot: bool,
}

fn coefficient_set(v: &[f64]) -> Result<CoefficientSet> {
    match v {
        [a0, a1, a2, a3] => Ok(CoefficientSet::new(*a0, *a1, *a2, *a3)),
        _ => bail!("expected four coefficients a0,a1,a2,a3, got {}", v.len()),
    }
}

impl StudyArgs {
    fn resolve(&self, base: StudyConfig) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => base,
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(regularity, time_weight, levels, reference_cutoff, paths, step, horizon, seed, snapshots, oversample, orders);
        if let Some(c) = &self.coefficients {
            cfg.coefficients = coefficient_set(c)?;
        }
        Ok(cfg)
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_study(report: &RateReport, dir: &Path, plot: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = BufWriter::new(File::create(dir.join("levels.csv"))?);
    report.write_csv(&mut csv)?;
    csv.flush()?;
    let mut json = BufWriter::new(File::create(dir.join("report.json"))?);
    report.write_json(&mut json)?;
    json.flush()?;
    // Timing lives apart from the reproducible outputs.
    fs::write(dir.join("timing.txt"), format!("runtime_seconds {:.3}\n", report.runtime.as_secs_f64()))?;
    if plot {
        report.write_plot_data(dir)?;
    }
    for s in &report.series {
        match s.fit {
            Some(f) => println!(
                "{}: slope {:.4} (95% CI [{:.4}, {:.4}])",
                s.label, f.slope, f.ci_low, f.ci_high
            ),
            None => println!("{}: fewer than 3 levels with positive error, no slope", s.label),
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let path = sample_driving_path(args.seed, args.cutoff, args.step, args.steps)?;
    let s = args.snapshots.clamp(1, args.steps);
    let snapshot_steps: Vec<usize> = (1..=s).map(|i| (i * args.steps + s / 2) / s).collect();
    let cfg = GalerkinConfig {
        cutoff: args.cutoff,
        coefficients: coefficient_set(&args.coefficients)?,
        snapshot_steps,
        options: SolverOptions::default(),
    };
    let snaps = run_galerkin(&path, &SpectralField::zeros(0), &cfg)?;
    let g = args.grid.unwrap_or_else(|| fft_size(2 * args.cutoff + 1));
    fs::create_dir_all(&args.out_dir)?;
    let mut summary = BufWriter::new(File::create(args.out_dir.join("snapshots.csv"))?);
    writeln!(summary, "step,time,mean,sup,l2")?;
    for snap in &snaps {
        let grid = snap.solution().to_grid(g)?;
        grid.write_csv(BufWriter::new(File::create(args.out_dir.join(format!("x_{:06}.csv", snap.step)))?))?;
        let mean = grid.values().iter().sum::<f64>() / grid.values().len() as f64;
        writeln!(
            summary,
            "{},{:e},{:e},{:e},{:e}",
            snap.step,
            snap.time,
            mean,
            grid.max_abs(),
            grid.mean_square().sqrt()
        )?;
    }
    summary.flush()?;
    println!("{} snapshots written to {}", snaps.len(), args.out_dir.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Renorm { cutoffs, out } => {
            let mut w = sink(&out)?;
            writeln!(w, "N,renorm,doubling_increment")?;
            for (n, r, inc) in renorm_table(&cutoffs) {
                writeln!(w, "{n},{r:.12},{inc:.12}")?;
            }
            writeln!(w, "# doubling increment limit log(2)/(4 pi) = {:.12}", 2f64.ln() / (4.0 * std::f64::consts::PI))?;
            w.flush()?;
        }
        Command::Simulate(args) => simulate(&args)?,
        Command::LinearRate(args) => {
            let cfg = args.resolve(StudyConfig::default())?;
            write_study(&run_linear_rate_study(&cfg)?, &args.out_dir, args.plot)?;
        }
        Command::AcRate(args) => {
            let base = StudyConfig {
                regularity: 0.2,
                time_weight: 0.35,
                levels: vec![4, 8, 16],
                reference_cutoff: 64,
                paths: 32,
                step: 1e-3,
                horizon: 0.5,
                ..StudyConfig::default()
            };
            let cfg = args.resolve(base)?;
            write_study(&run_nonlinear_rate_study(&cfg)?, &args.out_dir, args.plot)?;
        }
        Command::BesovNorm {
            input,
            alpha,
            p,
            q,
            j_max,
            oversample,
        } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let grid = GridField::read_csv(BufReader::new(file))?;
            let field = grid.to_spectral(grid.cutoff())?;
            let partition = match j_max {
                Some(j) => build_partition(j)?,
                None => DyadicPartition::covering(field.cutoff().max(1))?,
            };
            let idx = BesovIndex::new(alpha, p, q)?;
            let norm = besov_norm_with(&field, idx, &partition, BlockGrid::Oversampled(oversample))?;
            println!("j,lp,weighted");
            for b in &norm.blocks {
                println!("{},{:e},{:e}", b.j, b.lp, b.weighted);
            }
            println!("# norm {:e}", norm.value);
        }
        Command::KernelCheck {
            order,
            gamma,
            eps,
            cutoffs,
            factor,
            radius,
            out,
        } => {
            let report = verify_kernel_bounds(order, gamma, eps, &cutoffs, &ModeSet::Octant(factor), radius)?;
            let mut w = sink(&out)?;
            report.write_csv(&mut w)?;
            w.flush()?;
            for &c in &cutoffs {
                eprintln!(
                    "N = {c}: max ratio full {:.4}, greater {:.4}",
                    report.max_ratio(c, |v| matches!(v, ac2d_core::kernels::Variant::Full)),
                    report.max_ratio(c, |v| matches!(v, ac2d_core::kernels::Variant::Greater(_)))
                );
            }
        }
        Command::Moments {
            cutoff,
            samples,
            seed,
            constant_scale,
            out,
        } => {
            let table = moment_suite_with_constant(cutoff, samples, seed, constant_scale * renorm_constant(cutoff))?;
            let mut w = sink(&out)?;
            table.write_csv(&mut w)?;
            w.flush()?;
            if !table.all_pass() {
                eprintln!("some checks exceed |z| = 3");
                std::process::exit(2);
            }
        }
    }
    Ok(())
}
