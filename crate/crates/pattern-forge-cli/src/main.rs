mod config;
mod tasks;

use clap::{Args, Parser, Subcommand};
use config::{parse_basis, parse_grid, RunConfig, Task};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tasks::{Failure, Outcome};

#[derive(Parser)]
#[command(name = "pattern-forge", version, about = "Periodic patterns of the TN-energy: spectra, branches, lamellae, lattices")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads (PATTERN_FORGE_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Slab {
    #[arg(long)]
    kappa: f64,
    #[arg(long)]
    gamma: f64,
}

#[derive(Args)]
struct Disc {
    /// Grid points per side.
    #[arg(long)]
    n: Option<usize>,
    /// Harmonic band limit.
    #[arg(long = "k-max")]
    k_max: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Kernel identity suite.
    Verify {
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 0.7)]
        alpha: f64,
        #[arg(long, default_value_t = 1.3)]
        beta: f64,
        #[arg(long, default_value_t = 0.4)]
        delta: f64,
    },
    /// Gamma window, bifurcation point and spectral certificate of the slab.
    SlabSpectrum {
        #[command(flatten)]
        slab: Slab,
        #[arg(long = "ell-max")]
        ell_max: Option<u32>,
    },
    /// Bifurcating branch of modulated slabs.
    SlabBranch {
        #[command(flatten)]
        slab: Slab,
        /// start:stop:step or a comma list.
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[command(flatten)]
        disc: Disc,
    },
    /// Modulated lamellae continued from the slab branch.
    Lamellae {
        #[command(flatten)]
        slab: Slab,
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        eps: String,
        #[command(flatten)]
        disc: Disc,
    },
    /// Near-cylinder (dim 2) and near-sphere (dim 3) lattice patterns.
    Lattice {
        #[arg(long)]
        dim: usize,
        /// Basis vectors, e.g. "1,0;0.5,0.9".
        #[arg(long, allow_hyphen_values = true)]
        basis: String,
        #[arg(long)]
        kappa: f64,
        #[arg(long, conflicts_with = "gamma_fraction")]
        gamma: Option<f64>,
        /// gamma as a fraction of gamma_N.
        #[arg(long = "gamma-fraction")]
        gamma_fraction: Option<f64>,
        #[arg(long)]
        eps: String,
        #[arg(long = "k-max")]
        k_max: Option<usize>,
    },
}

fn build_config(cli: Cli) -> Result<RunConfig, Failure> {
    let grid = |t: &str| parse_grid(t).map_err(Failure::Config);
    let mut c = match cli.cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| Failure::Config(format!("bad config {}: {e}", config.display())))?
        }
        Cmd::Verify { kappa, alpha, beta, delta } => {
            let mut c = RunConfig::new(Task::Verify, kappa);
            c.identity_point = Some([alpha, beta, delta]);
            c
        }
        Cmd::SlabSpectrum { slab, ell_max } => {
            let mut c = RunConfig::new(Task::SlabSpectrum, slab.kappa);
            c.gamma = Some(slab.gamma);
            c.ell_max = ell_max;
            c
        }
        Cmd::SlabBranch { slab, s, disc } => {
            let mut c = RunConfig::new(Task::SlabBranch, slab.kappa);
            c.gamma = Some(slab.gamma);
            c.s_grid = grid(&s)?;
            c.n = disc.n;
            c.k_max = disc.k_max;
            c
        }
        Cmd::Lamellae { slab, s, eps, disc } => {
            let mut c = RunConfig::new(Task::Lamellae, slab.kappa);
            c.gamma = Some(slab.gamma);
            c.s_grid = grid(&s)?;
            c.epsilon_grid = grid(&eps)?;
            c.n = disc.n;
            c.k_max = disc.k_max;
            c
        }
        Cmd::Lattice { dim, basis, kappa, gamma, gamma_fraction, eps, k_max } => {
            let mut c = RunConfig::new(Task::Lattice, kappa);
            c.dim = Some(dim);
            c.lattice_basis = parse_basis(&basis).map_err(Failure::Config)?;
            c.gamma = gamma;
            c.gamma_fraction = gamma_fraction;
            c.epsilon_grid = grid(&eps)?;
            c.k_max = k_max;
            c
        }
    };
    if let Some(out) = cli.out {
        c.out_dir = out;
    }
    c.force |= cli.force;
    if cli.threads.is_some() {
        c.threads = cli.threads;
    }
    if let Ok(v) = std::env::var("PATTERN_FORGE_THREADS") {
        let n = v.trim().parse::<usize>().map_err(|_| Failure::Config(format!("PATTERN_FORGE_THREADS must be a positive integer, got '{v}'")))?;
        c.threads = Some(n);
    }
    if c.threads.is_none() {
        c.threads = Some(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    }
    Ok(c)
}

fn write_files(dir: &Path, files: &[(String, String)], force: bool) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    if !force {
        if let Some((name, _)) = files.iter().find(|(name, _)| dir.join(name).exists()) {
            return Err(Failure::Config(format!("refusing to overwrite {} (pass --force)", dir.join(name).display())));
        }
    }
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn execute(c: &RunConfig) -> Result<Outcome, Failure> {
    c.validate().map_err(Failure::Config)?;
    let threads = c.threads.unwrap_or(1);
    // the global pool can be set once per process; later calls keep the first size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let mut out = tasks::run(c)?;
    let summary_name = format!("{}_summary.txt", c.stem());
    out.files.push((summary_name, out.summary.clone()));
    write_files(&c.out_dir, &out.files, c.force)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|c| execute(&c));
    match result {
        Ok(out) => {
            print!("{}", out.summary);
            for (name, _) in &out.files {
                println!("wrote {name}");
            }
            match out.solver_failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(3)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
