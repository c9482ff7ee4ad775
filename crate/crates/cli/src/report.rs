//! Static report rendering: CSV grids and SVG heatmaps of the plausibility
//! probability and entropy surfaces, with design points overlaid.

use std::fmt::Write as _;
use std::path::Path;

use nroy_core::acquisition::entropy;
use nroy_core::history::{Classification, PlausibilityField};
use nroy_core::{ParameterSpace, Point};

use crate::error::{CliError, CliResult};

/// Evaluation of a field on a 2-D slice of the space: the chosen parameter
/// pair varies over a cell-centered grid, all other coordinates sit at
/// their midpoints.
pub struct GridReport {
    pub pair: (usize, usize),
    pub n: usize,
    /// Cell-center coordinates along each chosen axis.
    pub axis_i: Vec<f64>,
    pub axis_j: Vec<f64>,
    /// Row-major `n x n`: probability, entropy, classification.
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub class: Vec<Classification>,
}

pub fn evaluate_grid(
    field: &PlausibilityField,
    space: &ParameterSpace,
    pair: (usize, usize),
    n: usize,
) -> CliResult<GridReport> {
    let k = space.dimension();
    let (i, j) = pair;
    if i >= k || j >= k || i == j {
        return Err(CliError::Validation(format!(
            "parameter pair ({i}, {j}) invalid for a {k}-dimensional space"
        )));
    }
    if n < 2 {
        return Err(CliError::Validation("grid needs at least 2 cells".into()));
    }
    let center = space.center();
    let axis = |idx: usize| -> Vec<f64> {
        let p = &space.params()[idx];
        (0..n)
            .map(|c| p.lower + (c as f64 + 0.5) / n as f64 * (p.upper - p.lower))
            .collect()
    };
    let axis_i = axis(i);
    let axis_j = axis(j);
    let mut p = Vec::with_capacity(n * n);
    let mut h = Vec::with_capacity(n * n);
    let mut class = Vec::with_capacity(n * n);
    for &vi in &axis_i {
        for &vj in &axis_j {
            let mut coords = center.coords().to_vec();
            coords[i] = vi;
            coords[j] = vj;
            let prob = field.plaus_prob(&Point::new(coords))?;
            p.push(prob);
            h.push(entropy(prob)?);
            class.push(field.classify_prob(prob));
        }
    }
    Ok(GridReport {
        pair,
        n,
        axis_i,
        axis_j,
        p,
        h,
        class,
    })
}

fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::Plausible => "plausible",
        Classification::Uncertain => "uncertain",
        Classification::RuledOut => "ruledout",
    }
}

/// `grid.csv`: one row per cell with coordinates, probability, entropy and
/// classification.
pub fn write_grid_csv(
    report: &GridReport,
    space: &ParameterSpace,
    path: &Path,
) -> CliResult<()> {
    let (i, j) = report.pair;
    let mut out = String::new();
    writeln!(
        out,
        "{},{},p,entropy,classification",
        space.params()[i].name,
        space.params()[j].name
    )
    .expect("string write");
    for (ri, &vi) in report.axis_i.iter().enumerate() {
        for (rj, &vj) in report.axis_j.iter().enumerate() {
            let idx = ri * report.n + rj;
            writeln!(
                out,
                "{vi},{vj},{},{},{}",
                report.p[idx],
                report.h[idx],
                class_name(report.class[idx])
            )
            .expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Which surface an SVG shows.
pub enum Surface {
    Probability,
    Entropy,
}

/// Renders a heatmap with one `<rect>` per grid cell and a `<circle>` per
/// design point. Probability cells carry their classification as a `class`
/// attribute.
pub fn write_surface_svg(
    report: &GridReport,
    space: &ParameterSpace,
    surface: Surface,
    design_points: &[Point],
    path: &Path,
) -> CliResult<()> {
    let size = 640.0f64;
    let margin = 60.0f64;
    let plot = size - 2.0 * margin;
    let n = report.n;
    let cell = plot / n as f64;
    let (pi, pj) = report.pair;
    let param_i = &space.params()[pi];
    let param_j = &space.params()[pj];

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    )
    .expect("string write");
    let title = match surface {
        Surface::Probability => "plausibility probability",
        Surface::Entropy => "entropy of the plausibility surface",
    };
    writeln!(
        svg,
        r#"<title>{title}</title>
<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#
    )
    .expect("string write");

    // axis i runs along x, axis j along y (origin bottom-left)
    for (ri, _) in report.axis_i.iter().enumerate() {
        for (rj, _) in report.axis_j.iter().enumerate() {
            let idx = ri * n + rj;
            let x = margin + ri as f64 * cell;
            let y = size - margin - (rj as f64 + 1.0) * cell;
            match surface {
                Surface::Probability => {
                    let p = report.p[idx];
                    let r = (255.0 * (1.0 - p)) as u8;
                    let g = (255.0 * (1.0 - 0.55 * p)) as u8;
                    let b = 255u8;
                    writeln!(
                        svg,
                        r#"<rect class="{}" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb({r},{g},{b})"/>"#,
                        class_name(report.class[idx])
                    )
                    .expect("string write");
                }
                Surface::Entropy => {
                    let shade = 255.0 * (1.0 - report.h[idx] / std::f64::consts::LN_2);
                    let s = shade.clamp(0.0, 255.0) as u8;
                    writeln!(
                        svg,
                        r#"<rect class="entropy" x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="rgb(255,{s},{s})"/>"#
                    )
                    .expect("string write");
                }
            }
        }
    }

    // design points
    for point in design_points {
        let c = point.coords();
        let ux = (c[pi] - param_i.lower) / (param_i.upper - param_i.lower);
        let uy = (c[pj] - param_j.lower) / (param_j.upper - param_j.lower);
        let x = margin + ux * plot;
        let y = size - margin - uy * plot;
        writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black" stroke="white" stroke-width="1"/>"#
        )
        .expect("string write");
    }

    // frame and axis labels
    writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" fill="none" stroke="black"/>
<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>
<text x="16" y="{:.1}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>
<text x="{margin}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>
<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        size / 2.0,
        size - 18.0,
        param_i.name,
        size / 2.0,
        size / 2.0,
        param_j.name,
        size - margin + 16.0,
        param_i.lower,
        size - margin,
        size - margin + 16.0,
        param_i.upper,
    )
    .expect("string write");
    writeln!(svg, "</svg>").expect("string write");
    std::fs::write(path, svg)?;
    Ok(())
}
