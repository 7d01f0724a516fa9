//! Turning a configuration into a kernel and site sets.

use bergman_dpp::conditional::block_zero_kernel;
use bergman_dpp::discretize::{basis_projection_kernel, build_grid, kernel_matrix, restrict};
use bergman_dpp::random::random_contraction;
use bergman_dpp::{DppKernel, Grid, RngSeed};

use crate::config::{ExperimentConfig, KernelMode, Selection};
use crate::error::CliError;

/// Stream reserved for drawing random kernels; samples use stream 0.
pub const KERNEL_STREAM: u64 = 1;

pub struct Built {
    pub kernel: DppKernel,
    pub grid: Option<Grid>,
    /// Spectral mass moved by the contraction clamp.
    pub clamp_moved: f64,
}

impl Built {
    /// Grid point behind site `i` of the (possibly restricted) kernel.
    pub fn point(&self, i: usize) -> Option<&bergman_dpp::Point> {
        self.grid.as_ref().map(|g| &g.points[self.kernel.label(i)])
    }

    pub fn select(&self, sel: &Selection, what: &str) -> Result<Vec<usize>, CliError> {
        match sel {
            Selection::Indices(v) => {
                check_indices(v, self.kernel.size(), what)?;
                Ok(v.clone())
            }
            Selection::DiskRadius(r) => {
                if self.grid.is_none() {
                    return Err(CliError::config(None, format!("{what}: `disk_radius` needs a grid kernel")));
                }
                Ok((0..self.kernel.size())
                    .filter(|&i| self.point(i).is_some_and(|p| p.norm_sqr().sqrt() < *r))
                    .collect())
            }
        }
    }
}

pub fn check_indices(v: &[usize], size: usize, what: &str) -> Result<(), CliError> {
    if let Some(bad) = v.iter().find(|&&i| i >= size) {
        return Err(CliError::config(None, format!("{what}: site {bad} outside ground set of size {size}")));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::config(None, format!("{what}: repeated site")));
    }
    Ok(())
}

/// Build instance `instance` of the configured kernel. Only random kernels
/// differ between instances.
pub fn build(cfg: &ExperimentConfig, instance: u64) -> Result<Built, CliError> {
    let mut built = match cfg.kernel.mode {
        KernelMode::Random => {
            let mut rng = RngSeed::new(cfg.seed, KERNEL_STREAM).split(instance).rng();
            let m = random_contraction(&mut rng, cfg.kernel.sites, 0.05, 0.95);
            Built {
                kernel: DppKernel::new(m)?,
                grid: None,
                clamp_moved: 0.0,
            }
        }
        mode => {
            let grid = build_grid(cfg.domain, cfg.grid.resolution, cfg.grid.inset)?;
            let (kernel, clamp_moved) = match mode {
                KernelMode::Quadrature => {
                    let d = kernel_matrix(&grid, cfg.kernel.clamp_delta)?;
                    (d.kernel, d.clamp_moved)
                }
                KernelMode::Basis => {
                    let bergman_dpp::DomainSpec::Disk { alpha } = cfg.domain else {
                        unreachable!("checked at parse time")
                    };
                    (basis_projection_kernel(alpha, cfg.kernel.basis_rank, &grid)?, 0.0)
                }
                _ => (DppKernel::zero(grid.len()), 0.0),
            };
            Built {
                kernel,
                grid: Some(grid),
                clamp_moved,
            }
        }
    };
    if let Some(sel) = &cfg.kernel.restrict {
        let idx = built.select(sel, "kernel.restrict")?;
        built.kernel = restrict(&built.kernel, &idx)?;
    }
    if cfg.kernel.zero_block {
        let b = built.select(cfg.probe.b.as_ref().expect("checked at parse time"), "probe.b")?;
        built.kernel = block_zero_kernel(&built.kernel, &b)?;
    }
    Ok(built)
}
