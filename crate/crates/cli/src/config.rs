//! Run configuration: one JSON file per run, validated before any work.

use std::path::{Path, PathBuf};

use anosov_core::map::{AnosovMap, Perturbation};
use anosov_core::potential::Potential;
use anosov_core::torus::IntMatrix2;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Verify,
    Conjugacy,
    Equilibrium,
    Exponents,
    Dimension,
    Leaf,
    Rigidity,
    Spectrum,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::Verify => "verify",
            ReportKind::Conjugacy => "conjugacy",
            ReportKind::Equilibrium => "equilibrium",
            ReportKind::Exponents => "exponents",
            ReportKind::Dimension => "dimension",
            ReportKind::Leaf => "leaf",
            ReportKind::Rigidity => "rigidity",
            ReportKind::Spectrum => "spectrum",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub matrix: [[i64; 2]; 2],
    #[serde(default)]
    pub perturbations: Vec<Perturbation>,
}

fn zero_potential() -> Potential {
    Potential::Zero
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub map: MapSpec,
    #[serde(default = "zero_potential")]
    pub potential: Potential,
    #[serde(default)]
    pub numerics: Numerics,
    pub seed: u64,
    /// Reports produced by the `report` subcommand, in this order.
    #[serde(default)]
    pub reports: Vec<ReportKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub period: u32,
    /// Coarser period for error estimates; n − 2 when absent.
    pub refinement_period: Option<u32>,
    pub cone_grid: usize,
    pub cone_halfwidth: f64,
    pub conjugacy_grid: usize,
    pub conjugacy_tol: f64,
    pub conjugacy_max_iter: usize,
    /// Period whose points are pushed through h and matched to the lattice.
    pub pushforward_period: u32,
    pub leaf_half_length: f64,
    pub leaf_generations: Vec<usize>,
    pub leaf_bins: usize,
    /// Stable-leaf offset of the second transversal in holonomy checks.
    pub holonomy_offset: f64,
    pub chart_half_size: f64,
    pub product_resolution: usize,
    pub product_generation: usize,
    pub product_shift: f64,
    pub product_center: [f64; 2],
    pub tail_tol: f64,
    /// Period of the dimension ensemble; `period` when absent.
    pub dimension_period: Option<u32>,
    pub dimension_centers: usize,
    pub box_region: [f64; 3],
    pub entry_bound: i64,
    pub m_range: [i64; 2],
    pub max_denominator: i64,
    pub fourier_modes: i64,
    pub straightening_grid: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            period: 12,
            refinement_period: None,
            cone_grid: 256,
            cone_halfwidth: 0.3,
            conjugacy_grid: 1024,
            conjugacy_tol: 1e-10,
            conjugacy_max_iter: 200,
            pushforward_period: 6,
            leaf_half_length: 0.1,
            leaf_generations: vec![10, 12],
            leaf_bins: 32,
            holonomy_offset: 0.05,
            chart_half_size: 0.2,
            product_resolution: 32,
            product_generation: 12,
            product_shift: 0.3,
            product_center: [0.5, 0.5],
            tail_tol: 1e-12,
            dimension_period: None,
            dimension_centers: 20,
            box_region: [0.5, 0.5, 0.25],
            entry_bound: 10,
            m_range: [-5, 5],
            max_denominator: 12,
            fourier_modes: 4,
            straightening_grid: 16,
        }
    }
}

impl Numerics {
    pub fn refinement(&self) -> u32 {
        self.refinement_period
            .unwrap_or_else(|| anosov_core::equilibrium::refinement_of(self.period))
    }
}

fn invalid(pointer: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn positive(pointer: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(
            pointer,
            format!("must be positive and finite, got {x}"),
        ))
    }
}

fn at_least<T: PartialOrd + std::fmt::Display>(pointer: &str, x: T, lo: T) -> Result<(), CliError> {
    if x >= lo {
        Ok(())
    } else {
        Err(invalid(pointer, format!("must be at least {lo}, got {x}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = e.path().to_string();
            invalid(&pointer, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m =
            IntMatrix2::new(self.map.matrix).map_err(|e| invalid("map.matrix", e.to_string()))?;
        if !m.is_hyperbolic() {
            return Err(invalid("map.matrix", "matrix is not hyperbolic"));
        }
        for (i, p) in self.map.perturbations.iter().enumerate() {
            let ptr = format!("map.perturbations[{i}]");
            if !(p.amplitude.is_finite()
                && p.direction.iter().all(|x| x.is_finite())
                && p.phase.is_finite())
            {
                return Err(invalid(&ptr, "non-finite perturbation parameter"));
            }
        }
        let n = &self.numerics;
        let max = anosov_core::periodic::MAX_PERIOD;
        for (ptr, p) in [
            ("numerics.period", n.period),
            ("numerics.refinement_period", n.refinement()),
            ("numerics.pushforward_period", n.pushforward_period),
            (
                "numerics.dimension_period",
                n.dimension_period.unwrap_or(n.period),
            ),
        ] {
            if p == 0 || p > max {
                return Err(invalid(ptr, format!("period {p} outside 1..={max}")));
            }
        }
        if n.refinement() > n.period {
            return Err(invalid(
                "numerics.refinement_period",
                "must not exceed numerics.period",
            ));
        }
        positive("numerics.cone_halfwidth", n.cone_halfwidth)?;
        positive("numerics.conjugacy_tol", n.conjugacy_tol)?;
        positive("numerics.leaf_half_length", n.leaf_half_length)?;
        positive("numerics.holonomy_offset", n.holonomy_offset)?;
        positive("numerics.chart_half_size", n.chart_half_size)?;
        positive("numerics.product_shift", n.product_shift)?;
        positive("numerics.tail_tol", n.tail_tol)?;
        positive("numerics.box_region[2]", n.box_region[2])?;
        if n.cone_halfwidth >= std::f64::consts::FRAC_PI_4 {
            return Err(invalid("numerics.cone_halfwidth", "must be below π/4"));
        }
        if n.chart_half_size > anosov_core::product::MAX_CHART_HALF_SIZE {
            return Err(invalid(
                "numerics.chart_half_size",
                format!(
                    "must not exceed {}",
                    anosov_core::product::MAX_CHART_HALF_SIZE
                ),
            ));
        }
        if n.leaf_half_length > anosov_core::leaves::MAX_HALF_LENGTH {
            return Err(invalid(
                "numerics.leaf_half_length",
                format!("must not exceed {}", anosov_core::leaves::MAX_HALF_LENGTH),
            ));
        }
        at_least("numerics.cone_grid", n.cone_grid, 1)?;
        at_least("numerics.conjugacy_max_iter", n.conjugacy_max_iter, 1)?;
        at_least("numerics.leaf_bins", n.leaf_bins, 2)?;
        at_least("numerics.product_resolution", n.product_resolution, 2)?;
        at_least("numerics.dimension_centers", n.dimension_centers, 1)?;
        at_least("numerics.max_denominator", n.max_denominator, 1)?;
        at_least("numerics.fourier_modes", n.fourier_modes, 1)?;
        at_least("numerics.straightening_grid", n.straightening_grid, 2)?;
        at_least("numerics.entry_bound", n.entry_bound, 1)?;
        if n.leaf_generations.is_empty() {
            return Err(invalid(
                "numerics.leaf_generations",
                "needs at least one generation",
            ));
        }
        if !n.conjugacy_grid.is_power_of_two() || n.conjugacy_grid < 256 {
            return Err(invalid(
                "numerics.conjugacy_grid",
                "must be a power of two >= 256",
            ));
        }
        if n.m_range[0] > n.m_range[1] {
            return Err(invalid("numerics.m_range", "lower end exceeds upper end"));
        }
        Ok(())
    }

    pub fn anosov_map(&self) -> Result<AnosovMap, CliError> {
        let m =
            IntMatrix2::new(self.map.matrix).map_err(|e| invalid("map.matrix", e.to_string()))?;
        AnosovMap::new(m, self.map.perturbations.clone()).map_err(|e| invalid("map", e.to_string()))
    }
}
