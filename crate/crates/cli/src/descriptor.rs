//! Run descriptors: everything a command needs, loadable from JSON and
//! echoed into `meta.json`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};

use calderon_core::scem::ElectrodeLayout;
use calderon_core::{ElementDegree, ReversionConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Forward,
    Reconstruct,
    AnalyticSweep,
    Phantom,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Cm,
    Scem,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    /// Square at 0.3 and pentagon at 0.8.
    #[default]
    TwoInclusion,
    Zero,
}

/// Whether the coarse reconstruction mesh resolves the inclusion boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshVariant {
    Aligned,
    NonAligned,
}

impl MeshVariant {
    pub fn dir_name(self) -> &'static str {
        match self {
            MeshVariant::Aligned => "aligned",
            MeshVariant::NonAligned => "non_aligned",
        }
    }
}

/// Grids of the analytic sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub grid_points: usize,
    pub kappa_range: [f64; 2],
    pub delta_range: [f64; 2],
    pub delta_points: usize,
    pub samples: usize,
    pub profile_points: usize,
    pub divergent_kappa: [f64; 2],
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid_points: 151,
            kappa_range: [-0.5, 1.0],
            delta_range: [1e-3, 1e-1],
            delta_points: 12,
            samples: 64,
            profile_points: 201,
            divergent_kappa: [-0.75, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunDescriptor {
    pub command: Command,
    pub backend: Backend,
    pub out: PathBuf,
    /// Target edge length of the data (simulation) mesh.
    pub mesh_h: f64,
    /// Target edge length of the coarse mesh whose triangles are the pixels.
    pub recon_h: f64,
    /// Uniform refinements of the coarse mesh for the reconstruction solver.
    pub refine_levels: usize,
    /// Lagrange element degree, 1 or 2.
    pub degree: u8,
    /// Number of trigonometric boundary functions `J`.
    pub basis_size: usize,
    pub reversion: ReversionConfig,
    /// Singular value threshold used instead of `reversion.svd_threshold`
    /// for the electrode model.
    pub electrode_svd_threshold: f64,
    /// Radius of the disk covered by pixels.
    pub omega_radius: f64,
    pub phantom: PhantomKind,
    pub variants: Vec<MeshVariant>,
    /// Inner radius of the concentric geometry; `None` selects the phantom
    /// geometry for the FEM backends.
    pub rho: Option<f64>,
    /// Frequencies of the analytic backend.
    pub span: Vec<u32>,
    /// `(κ₁, κ₂)` of the concentric geometry.
    pub kappa: [f64; 2],
    /// Electrode layout for the electrode model; 16 equally spaced electrodes
    /// if absent.
    pub electrodes: Option<ElectrodeLayout>,
    /// Measured matrix (CSV) for `reconstruct`; simulated if absent.
    pub datum: Option<PathBuf>,
    pub seed: u64,
    pub selftest_fault: bool,
    pub sweep: SweepSettings,
}

impl Default for RunDescriptor {
    fn default() -> Self {
        Self {
            command: Command::Selftest,
            backend: Backend::Cm,
            out: PathBuf::from("out"),
            mesh_h: 0.015,
            recon_h: 0.25,
            refine_levels: 2,
            degree: 2,
            basis_size: 20,
            reversion: ReversionConfig {
                order: 4,
                svd_threshold: 3e-5,
                contrast_cutoff: 0.1,
                ..ReversionConfig::default()
            },
            electrode_svd_threshold: 1e-2,
            omega_radius: 0.85,
            phantom: PhantomKind::TwoInclusion,
            variants: vec![MeshVariant::Aligned, MeshVariant::NonAligned],
            rho: None,
            span: vec![1, 2],
            kappa: [-0.5, 1.0],
            electrodes: None,
            datum: None,
            seed: 0,
            selftest_fault: false,
            sweep: SweepSettings::default(),
        }
    }
}

pub const DEFAULT_ELECTRODES: usize = 16;
pub const DEFAULT_ELECTRODE_COVERAGE: f64 = 0.5;
pub const DEFAULT_CONTACT_IMPEDANCE: f64 = 0.1;

/// Inner radius of the single-parameter grids when none is given.
pub const SINGLE_PARAMETER_RHO: f64 = 0.3;
/// Inner radius of the two-parameter sweep and the analytic backend.
pub const SWEEP_RHO: f64 = FRAC_1_SQRT_2;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunDescriptor {
    /// Parses a descriptor, or the `descriptor` entry of a `meta.json`.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| usage(format!("config is not valid JSON: {e}")))?;
        let inner = match value.get("descriptor") {
            Some(d) => d.clone(),
            None => value,
        };
        serde_json::from_value(inner).map_err(|e| usage(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn element_degree(&self) -> CliResult<ElementDegree> {
        ElementDegree::try_from(self.degree).map_err(|_| usage(format!("degree must be 1 or 2, got {}", self.degree)))
    }

    /// Reversion settings for the selected backend.
    pub fn reversion_config(&self) -> ReversionConfig {
        match self.backend {
            Backend::Scem => ReversionConfig {
                svd_threshold: self.electrode_svd_threshold,
                ..self.reversion.clone()
            },
            _ => self.reversion.clone(),
        }
    }

    pub fn electrode_layout(&self) -> CliResult<ElectrodeLayout> {
        let layout = match &self.electrodes {
            Some(l) => l.clone(),
            None => ElectrodeLayout::equally_spaced(
                DEFAULT_ELECTRODES,
                DEFAULT_ELECTRODE_COVERAGE,
                DEFAULT_CONTACT_IMPEDANCE,
                2.0 * std::f64::consts::PI,
            )?,
        };
        layout
            .validate(2.0 * std::f64::consts::PI)
            .map_err(|e| usage(e.to_string()))?;
        Ok(layout)
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> CliResult<()> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !in_unit(self.mesh_h) {
            return Err(usage(format!("mesh h must lie in (0, 1), got {}", self.mesh_h)));
        }
        if !in_unit(self.recon_h) {
            return Err(usage(format!(
                "reconstruction h must lie in (0, 1), got {}",
                self.recon_h
            )));
        }
        self.element_degree()?;
        if self.basis_size < 1 {
            return Err(usage("J must be at least 1"));
        }
        self.reversion_config().validate().map_err(|e| usage(e.to_string()))?;
        if !in_unit(self.omega_radius) {
            return Err(usage(format!(
                "pixel radius must lie in (0, 1), got {}",
                self.omega_radius
            )));
        }
        if let Some(rho) = self.rho {
            if !in_unit(rho) {
                return Err(usage(format!("ρ must lie in (0, 1), got {rho}")));
            }
        }
        if self.span.is_empty() || self.span.contains(&0) {
            return Err(usage("span must list positive frequencies"));
        }
        if self.kappa.iter().any(|k| !k.is_finite() || *k <= -1.0) {
            return Err(usage(format!("κ components must exceed −1, got {:?}", self.kappa)));
        }
        if self.command == Command::Phantom && self.variants.is_empty() {
            return Err(usage("phantom needs at least one mesh variant"));
        }
        if let Some(path) = &self.datum {
            if !path.is_file() {
                return Err(usage(format!("datum file {} does not exist", path.display())));
            }
        }
        if self.electrodes.is_some() {
            self.electrode_layout()?;
        }
        let s = &self.sweep;
        if s.grid_points < 2 || s.delta_points < 2 || s.samples < 1 || s.profile_points < 2 {
            return Err(usage("sweep grids need at least two points"));
        }
        if !(s.delta_range[0] > 0.0 && s.delta_range[0] < s.delta_range[1]) {
            return Err(usage("δ range must be increasing and positive"));
        }
        Ok(())
    }
}
