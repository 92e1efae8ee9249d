use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Verify,
    SlabSpectrum,
    SlabBranch,
    Lamellae,
    Lattice,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::SlabSpectrum => "slab-spectrum",
            Task::SlabBranch => "slab-branch",
            Task::Lamellae => "lamellae",
            Task::Lattice => "lattice",
        }
    }
}

/// One run. Every field a subcommand flag can set has a config twin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub kappa: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Lattice runs only: γ as a fraction of γ_N.
    #[serde(default)]
    pub gamma_fraction: Option<f64>,
    #[serde(default)]
    pub s_grid: Vec<f64>,
    #[serde(default)]
    pub epsilon_grid: Vec<f64>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub lattice_basis: Vec<[f64; 3]>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub ell_max: Option<u32>,
    /// Integration offsets for the identity suite: α, β, δ.
    #[serde(default)]
    pub identity_point: Option<[f64; 3]>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub force: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from(".")
}

impl RunConfig {
    pub fn new(task: Task, kappa: f64) -> Self {
        RunConfig {
            task,
            kappa,
            gamma: None,
            gamma_fraction: None,
            s_grid: Vec::new(),
            epsilon_grid: Vec::new(),
            dim: None,
            lattice_basis: Vec::new(),
            n: None,
            k_max: None,
            ell_max: None,
            identity_point: None,
            out_dir: default_out(),
            threads: None,
            force: false,
        }
    }

    /// Checks the task's preconditions that do not need any computation.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(format!("kappa must be positive and finite, got {}", self.kappa));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(format!("gamma must be nonnegative, got {g}"));
            }
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        let need_gamma = matches!(self.task, Task::SlabSpectrum | Task::SlabBranch | Task::Lamellae);
        if need_gamma && self.gamma.is_none() {
            return Err(format!("{} needs gamma", self.task.name()));
        }
        if matches!(self.task, Task::SlabBranch | Task::Lamellae) && self.s_grid.is_empty() {
            return Err(format!("{} needs an s grid", self.task.name()));
        }
        if matches!(self.task, Task::Lamellae | Task::Lattice) {
            if self.epsilon_grid.is_empty() {
                return Err(format!("{} needs an epsilon grid", self.task.name()));
            }
            if self.epsilon_grid.iter().any(|e| !e.is_finite() || *e < 0.0) {
                return Err("epsilon values must be finite and nonnegative".into());
            }
        }
        if self.task == Task::Lattice {
            if self.epsilon_grid.iter().any(|e| *e == 0.0) {
                return Err("lattice runs need epsilon > 0".into());
            }
            match self.dim {
                Some(2) | Some(3) => {}
                _ => return Err("lattice runs need dim 2 or 3".into()),
            }
            if self.lattice_basis.is_empty() {
                return Err("lattice runs need at least one basis vector".into());
            }
            match (self.gamma, self.gamma_fraction) {
                (Some(_), Some(_)) => return Err("give gamma or gamma_fraction, not both".into()),
                (None, None) => return Err("lattice runs need gamma or gamma_fraction".into()),
                (_, Some(f)) if !(0.0..1.0).contains(&f) => return Err(format!("gamma_fraction must be in [0, 1), got {f}")),
                _ => {}
            }
        }
        if let Some(n) = self.n {
            if n < 8 || n % 2 == 1 {
                return Err(format!("n must be even and at least 8, got {n}"));
            }
        }
        Ok(())
    }

    /// File stem task_kappa_gamma.
    pub fn stem(&self) -> String {
        let g = match (self.gamma, self.gamma_fraction) {
            (Some(g), _) => format!("{g}"),
            (None, Some(f)) => format!("{f}gN"),
            _ => "none".into(),
        };
        format!("{}_kappa{}_gamma{}", self.task.name().replace('-', "_"), self.kappa, g)
    }
}

/// "a:b:h" (inclusive arithmetic grid) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}' in grid '{text}'"));
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range grid must be start:stop:step, got '{text}'"));
        }
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0) || b < a {
            return Err(format!("range grid needs step > 0 and stop >= start, got '{text}'"));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize;
        if count > 10_000 {
            return Err(format!("grid '{text}' has too many points"));
        }
        // a + i·h, rounded so 0.1 prints as 0.1 rather than 0.10000000000000002
        Ok((0..=count).map(|i| round12(a + i as f64 * h)).collect())
    } else {
        text.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
    }
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// "1,0;0.5,0.9" → basis vectors, padded with zeros to three components.
pub fn parse_basis(text: &str) -> Result<Vec<[f64; 3]>, String> {
    text.split(';')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            let comps: Result<Vec<f64>, String> = v
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad component '{c}' in basis '{text}'")))
                .collect();
            let comps = comps?;
            if comps.is_empty() || comps.len() > 3 {
                return Err(format!("basis vector '{v}' needs 1 to 3 components"));
            }
            let mut out = [0.0; 3];
            out[..comps.len()].copy_from_slice(&comps);
            Ok(out)
        })
        .collect()
}
