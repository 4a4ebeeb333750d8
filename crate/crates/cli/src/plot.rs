//! SVG rendering of trajectory-space envelopes: one panel per exported
//! channel, step-band polygons per envelope, optional raw-observation
//! scatter. Two envelopes / two cohort groups maximum per figure; the first
//! is always blue, the second red.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use cytotwin_core::channel::EXPORTED_CHANNELS;
use cytotwin_core::cohort::CohortDataset;
use cytotwin_core::envelope::EnvelopeModel;

pub const COLOR_A: &str = "#1f77b4";
pub const COLOR_B: &str = "#d62728";

const COLS: usize = 3;
const CELL_W: f64 = 290.0;
const CELL_H: f64 = 240.0;
const PAD: f64 = 10.0;
const LEGEND_H: f64 = 26.0;
// Inner axes box offsets within a cell.
const AX_L: f64 = 44.0;
const AX_T: f64 = 24.0;
const AX_R: f64 = 12.0;
const AX_B: f64 = 30.0;

pub struct PlotSpec<'a> {
    pub env_a: &'a EnvelopeModel,
    pub env_b: Option<&'a EnvelopeModel>,
    /// Raw observations, normalized for display by `env_a`'s divisors.
    pub cohort: Option<&'a CohortDataset>,
}

pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    spec.env_a.validate().map_err(anyhow::Error::from)?;
    if let Some(b) = spec.env_b {
        b.validate().map_err(anyhow::Error::from)?;
    }
    let groups: Vec<String> = match spec.cohort {
        Some(c) => {
            let mut gs: Vec<String> = c
                .patients()
                .values()
                .cloned()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            gs.sort();
            if gs.len() > 2 {
                bail!(
                    "figure supports at most two groups, cohort has {}",
                    gs.len()
                );
            }
            gs
        }
        None => Vec::new(),
    };

    let rows = EXPORTED_CHANNELS.len().div_ceil(COLS);
    let width = PAD * 2.0 + COLS as f64 * CELL_W;
    let height = PAD * 2.0 + LEGEND_H + rows as f64 * CELL_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    legend(&mut svg, spec, &groups);

    for (ci, c) in EXPORTED_CHANNELS.iter().enumerate() {
        let ox = PAD + (ci % COLS) as f64 * CELL_W;
        let oy = PAD + LEGEND_H + (ci / COLS) as f64 * CELL_H;
        let (x0, y0) = (ox + AX_L, oy + AX_T);
        let (w, h) = (CELL_W - AX_L - AX_R, CELL_H - AX_T - AX_B);

        // Shared data ranges for this channel.
        let horizon = |e: &EnvelopeModel| e.n_bins() as f64 * e.bin_width_h;
        let mut t_max = horizon(spec.env_a);
        let mut v_max = 0.0f64;
        let mut scan = |e: &EnvelopeModel| {
            for bin in 0..e.n_bins() {
                if let Some(b) = e.band(*c, bin) {
                    v_max = v_max.max(b.hi);
                }
            }
        };
        scan(spec.env_a);
        if let Some(b) = spec.env_b {
            t_max = t_max.max(horizon(b));
            scan(b);
        }
        let div = spec.env_a.divisors.get(*c);
        if let Some(cohort) = spec.cohort {
            for o in cohort.observations.iter().filter(|o| o.channel == *c) {
                t_max = t_max.max(o.time_h);
                v_max = v_max.max(o.value / div);
            }
        }
        if t_max <= 0.0 {
            t_max = 1.0;
        }
        if v_max <= 0.0 {
            v_max = 1.0;
        }
        v_max *= 1.05;
        let px = |t: f64| x0 + t / t_max * w;
        let py = |v: f64| y0 + h - (v / v_max).min(1.0) * h;

        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" font-weight="bold">{}</text>"#,
            x0,
            oy + 15.0,
            c.name()
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#999" stroke-width="1"/>"##
        );
        // Axis extent labels.
        let _ = writeln!(
            svg,
            r##"<text x="{x0}" y="{}" font-size="9" fill="#555">0</text>"##,
            y0 + h + 12.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="9" fill="#555" text-anchor="end">{t_max:.0} h</text>"##,
            x0 + w,
            y0 + h + 12.0
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-size="9" fill="#555" text-anchor="end">{v_max:.2}</text>"##,
            x0 - 3.0,
            y0 + 8.0
        );

        band_polygons(&mut svg, spec.env_a, *c, COLOR_A, &px, &py);
        if let Some(b) = spec.env_b {
            band_polygons(&mut svg, b, *c, COLOR_B, &px, &py);
        }
        if let Some(cohort) = spec.cohort {
            for o in cohort.observations.iter().filter(|o| o.channel == *c) {
                let gi = groups.iter().position(|g| *g == o.group).unwrap_or(0);
                let color = if gi == 0 { COLOR_A } else { COLOR_B };
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}" fill-opacity="0.8"/>"#,
                    px(o.time_h),
                    py(o.value / div)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One step-band polygon per contiguous run of populated bins.
fn band_polygons(
    svg: &mut String,
    env: &EnvelopeModel,
    c: cytotwin_core::channel::Channel,
    color: &str,
    px: &dyn Fn(f64) -> f64,
    py: &dyn Fn(f64) -> f64,
) {
    let w = env.bin_width_h;
    let mut run: Vec<(usize, f64, f64)> = Vec::new();
    let flush = |run: &mut Vec<(usize, f64, f64)>, svg: &mut String| {
        if run.is_empty() {
            return;
        }
        let mut pts = Vec::new();
        for &(bin, _, hi) in run.iter() {
            pts.push((px(bin as f64 * w), py(hi)));
            pts.push((px((bin + 1) as f64 * w), py(hi)));
        }
        for &(bin, lo, _) in run.iter().rev() {
            pts.push((px((bin + 1) as f64 * w), py(lo)));
            pts.push((px(bin as f64 * w), py(lo)));
        }
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.3" stroke="{color}" stroke-width="1"/>"#,
            path.join(" ")
        );
        run.clear();
    };
    for bin in 0..env.n_bins() {
        match env.band(c, bin) {
            Some(b) => run.push((bin, b.lo, b.hi)),
            None => flush(&mut run, svg),
        }
    }
    flush(&mut run, svg);
}

fn legend(svg: &mut String, spec: &PlotSpec, groups: &[String]) {
    let mut x = PAD + 4.0;
    let y = PAD + 14.0;
    let mut item = |svg: &mut String, color: &str, label: &str| {
        let _ = writeln!(
            svg,
            r#"<rect x="{x}" y="{}" width="12" height="12" fill="{color}" fill-opacity="0.5" stroke="{color}"/>"#,
            y - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" font-size="11">{label}</text>"#,
            x + 16.0
        );
        x += 20.0 + 7.0 * label.len() as f64 + 16.0;
    };
    item(svg, COLOR_A, "envelope A");
    if spec.env_b.is_some() {
        item(svg, COLOR_B, "envelope B");
    }
    for (gi, g) in groups.iter().enumerate() {
        let color = if gi == 0 { COLOR_A } else { COLOR_B };
        item(svg, color, &format!("{g} (observed)"));
    }
}
