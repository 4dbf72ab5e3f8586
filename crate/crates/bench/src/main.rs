use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use swing_bench::cloud::gen_synthetic_cloud;
use swing_bench::mesh::{fibonacci_sphere, Mesh};
use swing_bench::normals::{normal_prediction_experiment, search_bf, NormalMethod, NormalsConfig, LAMBDA_GRID, SIGMA_GRID};
use swing_bench::report::write_csv;
use swing_bench::selftest::run_selftest;
use swing_bench::sweep::{fne_sweep, scaling_exponent, time_sweep, KernelKind, KernelParams, SweepConfig, SwingSettings, TimeSweepConfig};
use swing_core::rfeatures::{FeatureKind, ProposalSpec};
use swing_core::swing::{FactorSharing, LengthMode};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "SWING_THREADS";

#[derive(Parser, Debug)]
#[command(name = "swing-bench", version, about = "Graph random feature experiments on implicit graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic constant-density cloud in the point-cloud text format
    GenCloud {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// FNE of GRF and SWING against the exact kernel
    FneSweep(FneSweepArgs),
    /// Wall-clock scaling of the GRF and SWING pipelines
    TimeSweep(TimeSweepArgs),
    /// Masked vertex-normal prediction on a mesh
    MeshNormals(MeshNormalsArgs),
    /// Oracle-equivalence checks; exits nonzero on any failure
    Selftest,
}

#[derive(Args, Debug)]
struct KernelArgs {
    /// Diffusion rate λ
    #[arg(long, default_value_t = KernelParams::default().lambda)]
    lambda: f64,
    /// Power of the p-step kernel
    #[arg(long, default_value_t = KernelParams::default().p)]
    p_steps: u32,
    /// Shift a of the p-step kernel (aI + W)^p
    #[arg(long, default_value_t = KernelParams::default().a)]
    shift: f64,
    /// Regularization γ of (I - γW)^{-1}
    #[arg(long, default_value_t = KernelParams::default().gamma)]
    gamma: f64,
}

impl KernelArgs {
    fn params(&self) -> KernelParams {
        KernelParams { lambda: self.lambda, p: self.p_steps, a: self.shift, gamma: self.gamma }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProposalArg {
    Standard,
    Shell,
    Mixture,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LengthArg {
    Fixed,
    PerWalk,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SharingArg {
    Step,
    WalkStep,
}

#[derive(Args, Debug)]
struct SwingArgs {
    /// Softmax temperature σ²
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Bandwidth of the deposit function g (defaults to the edge bandwidth)
    #[arg(long)]
    g_bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "mixture")]
    proposal: ProposalArg,
    /// Importance-sampling shift α
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Width of each mixture component
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    /// Block-orthogonal frequencies
    #[arg(long)]
    orthogonal: bool,
    #[arg(long, value_enum, default_value = "fixed")]
    lengths: LengthArg,
    /// Sharing of the per-point Gumbel factors
    #[arg(long, value_enum, default_value = "walk-step")]
    sharing: SharingArg,
    /// Feature family for the transition map φ
    #[arg(long, value_enum, default_value = "positive")]
    phi_kind: KindArg,
    /// Feature family for the deposit map ψ
    #[arg(long, value_enum, default_value = "positive")]
    psi_kind: KindArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Positive,
    Fourier,
    /// Exact weights against the cloud, for diagnostics
    Exact,
}

impl From<KindArg> for FeatureKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Positive => FeatureKind::Positive,
            KindArg::Fourier => FeatureKind::Fourier,
            KindArg::Exact => FeatureKind::Exact,
        }
    }
}

impl SwingArgs {
    fn settings(&self) -> SwingSettings {
        SwingSettings {
            sigma2: self.sigma2,
            g_bandwidth: self.g_bandwidth,
            proposal: match self.proposal {
                ProposalArg::Standard => ProposalSpec::StandardNormal,
                ProposalArg::Shell => ProposalSpec::Shell { alpha: self.alpha },
                ProposalArg::Mixture => ProposalSpec::DataMixture { alpha: self.alpha, spread: self.spread },
            },
            orthogonal: self.orthogonal,
            length_mode: match self.lengths {
                LengthArg::Fixed => LengthMode::FixedGeometric,
                LengthArg::PerWalk => LengthMode::PerWalkGeometric,
            },
            sharing: match self.sharing {
                SharingArg::Step => FactorSharing::PerStep,
                SharingArg::WalkStep => FactorSharing::PerWalkStep,
            },
            phi_kind: self.phi_kind.into(),
            psi_kind: self.psi_kind.into(),
        }
    }
}

#[derive(Args, Debug)]
struct FneSweepArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = KernelKind::ALL)]
    kernels: Vec<KernelKind>,
    #[arg(long, value_delimiter = ',', default_value = "200")]
    n_list: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128,256,512")]
    r_list: Vec<usize>,
    /// Walks per node
    #[arg(long, default_value_t = 300)]
    m: usize,
    #[arg(long, default_value_t = 0.3)]
    p_halt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Drop self-loops from W
    #[arg(long)]
    no_diagonal: bool,
    /// Run rows of one kernel in parallel
    #[arg(long)]
    parallel: bool,
    /// Independent estimates per setting
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    swing: SwingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TimeSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,5000,10000")]
    n_list: Vec<usize>,
    #[arg(long, value_enum, default_value = "diffusion")]
    kernel_kind: KernelKind,
    #[arg(long, default_value_t = 64)]
    r: usize,
    #[arg(long, default_value_t = 8)]
    m: usize,
    #[arg(long, default_value_t = 0.3)]
    p_halt: f64,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    swing: SwingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeshNormalsArgs {
    /// OFF mesh; a Fibonacci sphere of --sphere-n vertices when omitted
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    sphere_n: usize,
    /// Fraction of vertices whose normals are hidden
    #[arg(long, default_value_t = 0.8)]
    mask: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = NormalMethod::ALL)]
    methods: Vec<NormalMethod>,
    /// Diffusion rate λ of K = exp(λW)
    #[arg(long, default_value_t = NormalsConfig::default().lambda)]
    lambda: f64,
    /// Length scale σ of W = exp(-|x - y|²/σ²)
    #[arg(long, default_value_t = NormalsConfig::default().sigma)]
    sigma: f64,
    /// Pick σ and λ by brute-force score over a small grid first
    #[arg(long)]
    search: bool,
    #[arg(long, default_value_t = NormalsConfig::default().m)]
    m: usize,
    #[arg(long, default_value_t = NormalsConfig::default().r)]
    r: usize,
    #[arg(long, default_value_t = NormalsConfig::default().p_halt)]
    p_halt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    swing: SwingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_VAR}={v} is not a thread count"))?;
        if n == 0 {
            bail!("{THREADS_VAR} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::GenCloud { n, seed, out } => {
            let cloud = gen_synthetic_cloud(n, seed)?;
            output(&out)?.write_all(cloud.to_text().as_bytes())?;
        }
        Command::FneSweep(a) => {
            let cfg = SweepConfig {
                kernels: a.kernels,
                params: a.kernel.params(),
                n_list: a.n_list,
                r_list: a.r_list,
                m: a.m,
                p_halt: a.p_halt,
                seed: a.seed,
                include_diagonal: !a.no_diagonal,
                swing: a.swing.settings(),
                parallel: a.parallel,
                repeats: a.repeats,
                ..SweepConfig::default()
            };
            let rows = fne_sweep(&cfg)?;
            write_csv(output(&a.out)?, &rows)?;
        }
        Command::TimeSweep(a) => {
            let cfg = TimeSweepConfig {
                n_list: a.n_list,
                kernel: a.kernel_kind,
                params: a.kernel.params(),
                r: a.r,
                m: a.m,
                p_halt: a.p_halt,
                repeats: a.repeats,
                seed: a.seed,
                swing: a.swing.settings(),
                ..TimeSweepConfig::default()
            };
            let rows = time_sweep(&cfg)?;
            write_csv(output(&a.out)?, &rows)?;
            if cfg.n_list.len() >= 2 {
                eprintln!(
                    "scaling exponents: swing {:.3}, grf {:.3}",
                    scaling_exponent(&rows, "swing")?,
                    scaling_exponent(&rows, "grf")?
                );
            }
        }
        Command::MeshNormals(a) => {
            let mesh = match &a.mesh {
                Some(p) => Mesh::load_off(p).with_context(|| format!("reading {}", p.display()))?,
                None => fibonacci_sphere(a.sphere_n, 1.0)?,
            };
            let mut cfg = NormalsConfig {
                mask_fraction: a.mask,
                lambda: a.lambda,
                sigma: a.sigma,
                p_halt: a.p_halt,
                m: a.m,
                r: a.r,
                seed: a.seed,
                methods: a.methods,
                swing: a.swing.settings(),
            };
            if a.search {
                let (sigma, lambda, cos) = search_bf(&mesh, &cfg, &SIGMA_GRID, &LAMBDA_GRID)?;
                eprintln!("search: sigma {sigma}, lambda {lambda}, bf cosine {cos:.4}");
                cfg.sigma = sigma;
                cfg.lambda = lambda;
            }
            let rows = normal_prediction_experiment(&mesh, &cfg)?;
            write_csv(output(&a.out)?, &rows)?;
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}  {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
    Ok(())
}
