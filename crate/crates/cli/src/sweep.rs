//! Concentric-disk experiments: single-parameter error curves, the radial
//! profile of the partial sums and the `err_K(δ)` sweep with slope fits.

use calderon_core::analytic::{
    error_sweep, linspace, loglog_slope, logspace, reconstruct_kappa, single_parameter_curves, ActiveParameters,
    ConcentricPerturbation, SpanSelection,
};
use serde::Serialize;

use crate::descriptor::{RunDescriptor, SINGLE_PARAMETER_RHO, SWEEP_RHO};
use crate::error::{CliError, CliResult};
use crate::output::{csv, OutDir};
use crate::svg::{LinePlot, Series};

#[derive(Debug, Clone, Serialize)]
pub struct DivergentCase {
    pub kappa: [f64; 2],
    pub estimates: Vec<Vec<f64>>,
    pub error_norms: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub single_parameter_rho: f64,
    pub grid_points: usize,
    /// `max |signed error|` over the annulus grid, per `K`.
    pub annulus_max_errors: Vec<f64>,
    /// Same for the disk grid.
    pub disk_max_errors: Vec<f64>,
    pub sweep_rho: f64,
    pub span: Vec<u32>,
    pub deltas: Vec<f64>,
    pub samples: usize,
    /// Fitted `log err_K / log δ` slopes, `K = 1..`.
    pub slopes: Vec<f64>,
    pub profile_kappa: [f64; 2],
    pub profile_estimates: Vec<Vec<f64>>,
    pub divergent: DivergentCase,
}

fn order_header(prefix: &str, max_order: usize) -> Vec<String> {
    (1..=max_order).map(|k| format!("{prefix}K{k}")).collect()
}

fn max_abs_per_order(curves: &[(f64, Vec<f64>)], max_order: usize) -> Vec<f64> {
    (0..max_order)
        .map(|k| curves.iter().map(|(_, e)| e[k].abs()).fold(0.0, f64::max))
        .collect()
}

fn curve_csv(label: &str, curves: &[(f64, Vec<f64>)], max_order: usize) -> String {
    let mut header = vec![label.to_string()];
    header.extend(order_header("err_", max_order));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv(
        &header,
        curves
            .iter()
            .map(|(x, e)| std::iter::once(*x).chain(e.iter().copied()).collect()),
    )
}

fn curve_plot(title: &str, x_label: &str, curves: &[(f64, Vec<f64>)], max_order: usize) -> String {
    LinePlot {
        title: title.into(),
        x_label: x_label.into(),
        y_label: "signed error".into(),
        series: (0..max_order)
            .map(|k| {
                Series::new(
                    format!("K = {}", k + 1),
                    curves.iter().map(|(x, e)| (*x, e[k])).collect(),
                )
            })
            .collect(),
        ..LinePlot::default()
    }
    .render()
}

pub fn run_analytic_sweep(desc: &RunDescriptor, out: &OutDir) -> CliResult<SweepReport> {
    let s = &desc.sweep;
    let max_order = desc.reversion.order;
    let rho_single = desc.rho.unwrap_or(SINGLE_PARAMETER_RHO);
    let rho_sweep = desc.rho.unwrap_or(SWEEP_RHO);
    let span = SpanSelection::new(desc.span.clone()).map_err(|e| CliError::Usage(e.to_string()))?;

    let grid = linspace(s.kappa_range[0], s.kappa_range[1], s.grid_points);
    let annulus = single_parameter_curves(rho_single, ActiveParameters::AnnulusOnly, &grid, max_order)?;
    let disk = single_parameter_curves(rho_single, ActiveParameters::DiskOnly, &grid, max_order)?;
    out.write("fig4_left.csv", curve_csv("kappa1", &annulus, max_order))?;
    out.write("fig4_right.csv", curve_csv("kappa2", &disk, max_order))?;
    out.write(
        "fig4_left.svg",
        curve_plot(&format!("κ₂ = 0 known, ρ = {rho_single}"), "κ₁", &annulus, max_order),
    )?;
    out.write(
        "fig4_right.svg",
        curve_plot(&format!("κ₁ = 0 known, ρ = {rho_single}"), "κ₂", &disk, max_order),
    )?;

    let kappa = desc.kappa;
    let p = ConcentricPerturbation::new(kappa[0], kappa[1], rho_sweep)?;
    let rec = reconstruct_kappa(&p, &span, ActiveParameters::Both, max_order)?;
    let radii = linspace(0.0, 1.0, s.profile_points);
    let pick = |v: &[f64], r: f64| if r < rho_sweep { v[1] } else { v[0] };
    let mut header = vec!["r".to_string(), "truth".to_string()];
    header.extend(order_header("", max_order));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = radii.iter().map(|&r| {
        let mut row = vec![r, pick(&kappa, r)];
        row.extend(rec.estimates_per_order.iter().map(|e| pick(e, r)));
        row
    });
    out.write("fig5_left.csv", csv(&header, rows))?;
    let mut series = vec![Series::new("B", radii.iter().map(|&r| (r, pick(&kappa, r))).collect()).dashed()];
    for (k, e) in rec.estimates_per_order.iter().enumerate() {
        series.push(Series::new(
            format!("K = {}", k + 1),
            radii.iter().map(|&r| (r, pick(e, r))).collect(),
        ));
    }
    out.write(
        "fig5_left.svg",
        LinePlot {
            title: format!("κ = ({}, {}), ρ = {rho_sweep:.4}", kappa[0], kappa[1]),
            x_label: "r".into(),
            y_label: "conductivity perturbation".into(),
            series,
            ..LinePlot::default()
        }
        .render(),
    )?;

    let deltas = logspace(s.delta_range[0], s.delta_range[1], s.delta_points);
    let rows = error_sweep(rho_sweep, &span, max_order, &deltas, s.samples)?;
    out.write(
        "fig5_right.csv",
        csv(
            &["delta", "K", "err"],
            rows.iter().map(|r| vec![r.delta, r.order as f64, r.err]),
        ),
    )?;
    let per_order: Vec<Vec<f64>> = (1..=max_order)
        .map(|k| rows.iter().filter(|r| r.order == k).map(|r| r.err).collect())
        .collect();
    let slopes = per_order
        .iter()
        .map(|e| loglog_slope(&deltas, e))
        .collect::<calderon_core::Result<Vec<f64>>>()?;
    out.write(
        "fig5_right.svg",
        LinePlot {
            title: format!("err_K(δ), ρ = {rho_sweep:.4}"),
            x_label: "δ".into(),
            y_label: "err_K".into(),
            log_x: true,
            log_y: true,
            series: per_order
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    Series::new(
                        format!("K = {} (slope {:.2})", k + 1, slopes[k]),
                        deltas.iter().copied().zip(e.iter().copied()).collect(),
                    )
                })
                .collect(),
        }
        .render(),
    )?;

    let dk = s.divergent_kappa;
    let bad = reconstruct_kappa(
        &ConcentricPerturbation::new(dk[0], dk[1], rho_sweep)?,
        &span,
        ActiveParameters::Both,
        max_order,
    )?;
    let divergent = DivergentCase {
        kappa: dk,
        error_norms: bad
            .signed_errors
            .iter()
            .map(|e| e.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect(),
        estimates: bad.estimates_per_order,
    };

    let report = SweepReport {
        single_parameter_rho: rho_single,
        grid_points: grid.len(),
        annulus_max_errors: max_abs_per_order(&annulus, max_order),
        disk_max_errors: max_abs_per_order(&disk, max_order),
        sweep_rho: rho_sweep,
        span: desc.span.clone(),
        deltas,
        samples: s.samples,
        slopes,
        profile_kappa: kappa,
        profile_estimates: rec.estimates_per_order,
        divergent,
    };
    out.write_json("slopes.json", &report)?;
    Ok(report)
}
