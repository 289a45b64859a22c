//! Minimal SVG line chart of mean gap against iteration, one line per batch size.

use std::fmt::Write as _;

use crate::artifact::SummaryRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn decades(lo: f64, hi: f64) -> (f64, f64) {
    let a = lo.log10().floor();
    let b = hi.log10().ceil();
    if b > a { (a, b) } else { (a, a + 1.0) }
}

/// Log-log chart of `mean_gap` against `T`. Points with a nonpositive mean
/// are skipped. Output depends only on `rows`.
pub fn render_gap_svg(rows: &[SummaryRow]) -> String {
    let pts: Vec<&SummaryRow> = rows.iter().filter(|r| r.mean_gap > 0.0 && r.t > 0).collect();
    let mut batches: Vec<usize> = pts.iter().map(|r| r.batch_size).collect();
    batches.sort_unstable();
    batches.dedup();

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();

    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    writeln!(
        svg,
        r#"<path d="M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}" stroke="black" fill="none"/>"#
    )
    .unwrap();

    if pts.is_empty() {
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">no positive data</text>"#, (x0 + x1) / 2.0, (y0 + y1) / 2.0).unwrap();
        svg.push_str("</svg>\n");
        return svg;
    }

    let (tx_lo, tx_hi) = decades(
        pts.iter().map(|r| r.t as f64).fold(f64::INFINITY, f64::min),
        pts.iter().map(|r| r.t as f64).fold(0.0, f64::max),
    );
    let (gy_lo, gy_hi) = decades(
        pts.iter().map(|r| r.mean_gap).fold(f64::INFINITY, f64::min),
        pts.iter().map(|r| r.mean_gap).fold(0.0, f64::max),
    );
    let sx = |t: f64| x0 + (t.log10() - tx_lo) / (tx_hi - tx_lo) * (x1 - x0);
    let sy = |g: f64| y0 - (g.log10() - gy_lo) / (gy_hi - gy_lo) * (y0 - y1);

    for d in tx_lo as i32..=tx_hi as i32 {
        let x = sx(10f64.powi(d));
        writeln!(svg, r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{d}</text>"#, y0 + 20.0).unwrap();
    }
    for d in gy_lo as i32..=gy_hi as i32 {
        let y = sy(10f64.powi(d));
        writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, x0 - 8.0, y + 4.0).unwrap();
    }
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#, (x0 + x1) / 2.0, HEIGHT - 10.0).unwrap();
    writeln!(
        svg,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">restricted gap</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    )
    .unwrap();

    for (k, b) in batches.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut line: Vec<&&SummaryRow> = pts.iter().filter(|r| r.batch_size == *b).collect();
        line.sort_by_key(|r| r.t);
        let d: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(r.t as f64), sy(r.mean_gap)))
            .collect();
        writeln!(svg, r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, d.join(" ")).unwrap();
        let ly = y1 + 18.0 * k as f64 + 10.0;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            x1 + 10.0,
            x1 + 30.0
        )
        .unwrap();
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">b = {b}</text>"#, x1 + 35.0, ly + 4.0).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
