//! Command-line front end for series-reversion reconstruction.
//!
//! Commands: `forward` (simulate a measurement matrix), `reconstruct`
//! (reversion terms `F_1..F_K` from a simulated or supplied datum), `phantom`
//! (two-inclusion experiment on aligned and non-aligned pixel meshes),
//! `analytic-sweep` (concentric-disk error curves and convergence slopes) and
//! `selftest` (reduced invariant suite). Every run writes `meta.json`.

pub mod commands;
pub mod descriptor;
pub mod error;
pub mod geometry;
pub mod output;
pub mod phantom;
pub mod pipeline;
pub mod selftest;
pub mod svg;
pub mod sweep;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use calderon_core::fem::{space::stiffness_rule_degree, BOUNDARY_GAUSS_POINTS};
use calderon_core::scem::ELECTRODE_GAUSS_POINTS;
use clap::Parser;
use serde::Serialize;

pub use descriptor::{Backend, Command, RunDescriptor};
pub use error::{CliError, CliResult};

use output::OutDir;

/// Flags override the values loaded from `--config`.
#[derive(Debug, Parser)]
#[command(
    name = "calderon",
    version,
    about = "Series-reversion reconstruction of conductivity perturbations"
)]
pub struct Cli {
    #[arg(long, value_enum)]
    pub command: Option<Command>,
    /// Run descriptor JSON, or a `meta.json` of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    #[arg(long = "mesh-h")]
    pub mesh_h: Option<f64>,
    /// Number of boundary basis functions.
    #[arg(long = "J")]
    pub j: Option<usize>,
    /// Number of reversion terms.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Singular value threshold of the selected backend.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Contrast cutoff.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Comma-separated frequencies, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub span: Option<Vec<u32>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flip the sign of the β output of the spectral perturbation map.
    #[arg(long = "selftest-fault")]
    pub selftest_fault: bool,
}

impl Cli {
    pub fn descriptor(&self) -> CliResult<RunDescriptor> {
        let mut d = match &self.config {
            Some(path) => RunDescriptor::load(path)?,
            None => {
                let Some(command) = self.command else {
                    return Err(CliError::Usage("either --command or --config is required".into()));
                };
                RunDescriptor {
                    command,
                    ..RunDescriptor::default()
                }
            }
        };
        if let Some(v) = self.command {
            d.command = v;
        }
        if let Some(v) = &self.out {
            d.out = v.clone();
        }
        if let Some(v) = self.backend {
            d.backend = v;
        }
        if let Some(v) = self.mesh_h {
            d.mesh_h = v;
        }
        if let Some(v) = self.j {
            d.basis_size = v;
        }
        if let Some(v) = self.k {
            d.reversion.order = v;
        }
        if let Some(v) = self.alpha {
            match d.backend {
                Backend::Scem => d.electrode_svd_threshold = v,
                _ => d.reversion.svd_threshold = v,
            }
        }
        if let Some(v) = self.beta {
            d.reversion.contrast_cutoff = v;
        }
        if let Some(v) = self.rho {
            d.rho = Some(v);
        }
        if let Some(v) = &self.span {
            d.span = v.clone();
        }
        if let Some(v) = self.seed {
            d.seed = v;
        }
        if self.selftest_fault {
            d.selftest_fault = true;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureInfo {
    pub stiffness_exact_degree: usize,
    pub boundary_gauss_points_per_panel: usize,
    pub electrode_gauss_points_per_piece: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub descriptor: RunDescriptor,
    pub version: &'static str,
    pub core_version: &'static str,
    pub quadrature: QuadratureInfo,
    /// Achieved mesh sizes (longest edge) keyed by role.
    pub mesh_h: BTreeMap<String, f64>,
    pub timings_s: BTreeMap<String, f64>,
}

/// Result of one command, printed by the binary.
#[derive(Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub summary: String,
    /// Set when the command completed but reported failures (self-test).
    pub failure: Option<CliError>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }
}

/// Validates the descriptor, runs the command and writes `meta.json`.
///
/// Use [`RunOutcome::exit_code`] for the process status.
pub fn run(desc: &RunDescriptor) -> CliResult<RunOutcome> {
    desc.validate()?;
    let out = OutDir::create(&desc.out)?;
    let start = Instant::now();
    let mut mesh_h = BTreeMap::new();
    let mut timings = BTreeMap::new();
    let mut failure = None;

    let summary = match desc.command {
        Command::Phantom => {
            let r = phantom::run_phantom(desc, &out)?;
            mesh_h.insert("data".into(), r.data_h);
            timings.insert("simulation".into(), r.simulation_seconds);
            let mut lines = vec![format!(
                "data mesh: {} triangles, {} dofs",
                r.data_triangles, r.data_dofs
            )];
            for v in &r.variants {
                mesh_h.insert(format!("{}_pixels", v.variant.dir_name()), v.reconstruction.coarse_h);
                timings.insert(v.variant.dir_name().into(), v.seconds);
                let errs = v
                    .reconstruction
                    .relative_errors
                    .as_ref()
                    .unwrap_or(&v.reconstruction.l2_errors);
                let text: Vec<String> = errs.iter().map(|e| format!("{e:.4}")).collect();
                lines.push(format!(
                    "{}: {} pixels, errors by K [{}]",
                    v.variant.dir_name(),
                    v.reconstruction.pixels,
                    text.join(", ")
                ));
            }
            lines.join("\n")
        }
        Command::AnalyticSweep => {
            let r = sweep::run_analytic_sweep(desc, &out)?;
            let text: Vec<String> = r.slopes.iter().map(|s| format!("{s:.3}")).collect();
            format!("fitted slopes K=1..{}: [{}]", r.slopes.len(), text.join(", "))
        }
        Command::Forward => {
            let r = commands::run_forward(desc, &out)?;
            if let Some(h) = r.mesh_h {
                mesh_h.insert("data".into(), h);
            }
            format!(
                "{}x{} matrix, asymmetry {:.3e}",
                r.matrix_size, r.matrix_size, r.asymmetry
            )
        }
        Command::Reconstruct => {
            let r = commands::run_reconstruct(desc, &out)?;
            if let Some(rec) = &r.reconstruction {
                mesh_h.insert("pixels".into(), rec.coarse_h);
            }
            match (&r.kappa_estimates, &r.reconstruction) {
                (Some(k), _) => format!("estimates by K: {k:?}"),
                (_, Some(rec)) => format!("{} pixels, L2 errors by K {:?}", rec.pixels, rec.l2_errors),
                _ => String::new(),
            }
        }
        Command::Selftest => {
            let report = selftest::run_selftest(desc.seed, desc.selftest_fault);
            out.write("selftest.txt", report.text())?;
            if report.failures() > 0 {
                failure = Some(CliError::SelftestFailed {
                    failed: report.failures(),
                    total: report.checks.len(),
                });
            }
            report.text().trim_end().to_string()
        }
    };
    timings.insert("total".into(), start.elapsed().as_secs_f64());

    let meta = Meta {
        descriptor: desc.clone(),
        version: env!("CARGO_PKG_VERSION"),
        core_version: calderon_core::VERSION,
        quadrature: QuadratureInfo {
            stiffness_exact_degree: stiffness_rule_degree(desc.element_degree()?),
            boundary_gauss_points_per_panel: BOUNDARY_GAUSS_POINTS,
            electrode_gauss_points_per_piece: ELECTRODE_GAUSS_POINTS,
        },
        mesh_h,
        timings_s: timings,
    };
    out.write_json("meta.json", &meta)?;
    Ok(RunOutcome {
        out: desc.out.clone(),
        summary,
        failure,
    })
}
