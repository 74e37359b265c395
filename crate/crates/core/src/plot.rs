//! Self-contained SVG rendering of the accuracy/novelty trade-off:
//! novelty on the x axis, NDCG on the y axis, one polyline per sweep
//! mode. Output is byte-deterministic for a fixed report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, SubpopError};
use crate::experiment::{SweepMode, TradeoffReport};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const TICKS: usize = 5;

fn stroke(mode: SweepMode) -> &'static str {
    match mode {
        SweepMode::PpsOnly => "#d62728",
        SweepMode::SppsOnly => "#1f77b4",
        SweepMode::Combined => "#2ca02c",
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// Render a trade-off report to an SVG file. Needs at least two rows.
pub fn emit_plot(report: &TradeoffReport, path: &Path) -> Result<()> {
    if report.rows.len() < 2 {
        return Err(SubpopError::InvalidArgument(
            "plotting needs at least two report rows".into(),
        ));
    }
    let (x_lo, x_hi) = padded_range(report.rows.iter().map(|r| r.novelty));
    let (y_lo, y_hi) = padded_range(report.rows.iter().map(|r| r.ndcg));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| MARGIN_TOP + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg version="1.1" width="{WIDTH}" height="{HEIGHT}" xmlns="http://www.w3.org/2000/svg">"#
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    ));
    svg.push('\n');

    // axes
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    svg.push_str(&format!(
        r#"<path d="M{x0:.2} {:.2} L{x0:.2} {y0:.2} L{:.2} {y0:.2}" stroke="black" fill="none"/>"#,
        MARGIN_TOP,
        MARGIN_LEFT + plot_w
    ));
    svg.push('\n');
    for t in 0..=TICKS {
        let frac = t as f64 / TICKS as f64;
        let xv = x_lo + frac * (x_hi - x_lo);
        let xp = sx(xv);
        svg.push_str(&format!(
            r#"<path d="M{xp:.2} {y0:.2} L{xp:.2} {:.2}" stroke="black"/>"#,
            y0 + 6.0
        ));
        svg.push_str(&format!(
            r#"<text x="{xp:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="middle">{xv:.3}</text>"#,
            y0 + 20.0
        ));
        svg.push('\n');
        let yv = y_lo + frac * (y_hi - y_lo);
        let yp = sy(yv);
        svg.push_str(&format!(
            r#"<path d="M{x0:.2} {yp:.2} L{:.2} {yp:.2}" stroke="black"/>"#,
            x0 - 6.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="11" text-anchor="end">{yv:.4}</text>"#,
            x0 - 9.0,
            yp + 4.0
        ));
        svg.push('\n');
    }
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{:.2}" font-family="monospace" font-size="13" text-anchor="middle">Novelty@{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        report.k
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="16" y="{:.2}" font-family="monospace" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">NDCG@{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        report.k
    ));
    svg.push('\n');

    // one polyline per mode, in fixed mode order
    let mut legend_slot = 0usize;
    for mode in [SweepMode::PpsOnly, SweepMode::SppsOnly, SweepMode::Combined] {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.mode == mode).collect();
        if rows.is_empty() {
            continue;
        }
        let color = stroke(mode);
        if rows.len() > 1 {
            let points: Vec<String> = rows
                .iter()
                .map(|r| format!("{:.2},{:.2}", sx(r.novelty), sy(r.ndcg)))
                .collect();
            svg.push_str(&format!(
                r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                points.join(" ")
            ));
            svg.push('\n');
        }
        for r in &rows {
            svg.push_str(&format!(
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(r.novelty),
                sy(r.ndcg)
            ));
            svg.push('\n');
        }
        let ly = MARGIN_TOP + 14.0 + 20.0 * legend_slot as f64;
        let lx = MARGIN_LEFT + plot_w + 14.0;
        svg.push_str(&format!(
            r#"<rect x="{lx:.2}" y="{:.2}" width="14" height="14" fill="{color}"/>"#,
            ly - 11.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{ly:.2}" font-family="monospace" font-size="12">{mode}</text>"#,
            lx + 20.0
        ));
        svg.push('\n');
        legend_slot += 1;
    }
    svg.push_str("</svg>\n");

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(svg.as_bytes())?;
    w.flush()?;
    Ok(())
}
