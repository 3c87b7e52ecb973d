//! Plots of the analyzer's CSV series: self-contained SVG, or a gnuplot
//! script with the data inlined.
//!
//! Curve plots draw reachable objects as a solid line and live objects as a
//! dashed line. Histograms use a logarithmic count axis; empty bins are drawn
//! at [`EMPTY_BIN_FLOOR`] so they stay visible.

use std::fmt::Write as _;

use clap::ValueEnum;
use dragtrace::analyzer::CurvePoint;

use crate::files::Series;

pub const EMPTY_BIN_FLOOR: f64 = 0.5;

const VERSION_COMMENT: &str = concat!("generated by dragtrace ", env!("CARGO_PKG_VERSION"));

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotFormat {
    Svg,
    Gnuplot,
}

impl PlotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            PlotFormat::Svg => "svg",
            PlotFormat::Gnuplot => "gp",
        }
    }
}

pub fn render(series: &Series, format: PlotFormat, title: &str) -> String {
    match (series, format) {
        (Series::Curves(points), PlotFormat::Svg) => curves_svg(points, title),
        (Series::Curves(points), PlotFormat::Gnuplot) => curves_gnuplot(points, title),
        (Series::Histogram(bins), PlotFormat::Svg) => histogram_svg(bins, title),
        (Series::Histogram(bins), PlotFormat::Gnuplot) => histogram_gnuplot(bins, title),
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Smallest "round" number (1, 2 or 5 times a power of ten) at or above `v`.
fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * magnitude)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * magnitude)
}

fn svg_open(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, "<!-- {VERSION_COMMENT} -->").unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    writeln!(
        out,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn curves_svg(points: &[CurvePoint], title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, "tick", "objects");
    let max_tick = points.last().map_or(1, |p| p.tick).max(1) as f64;
    let max_count = nice_ceiling(points.iter().map(|p| p.reachable.max(p.live)).max().unwrap_or(0) as f64);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |t: u64| LEFT + t as f64 / max_tick * plot_w;
    let y = |c: u64| HEIGHT - BOTTOM - c as f64 / max_count * plot_h;

    for i in 0..=5 {
        let frac = i as f64 / 5.0;
        let ty = HEIGHT - BOTTOM - frac * plot_h;
        let tx = LEFT + frac * plot_w;
        writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            ty + 4.0,
            (frac * max_count).round()
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{tx:.2}" y="{}" text-anchor="middle">{}</text>"#,
            HEIGHT - BOTTOM + 16.0,
            (frac * max_tick).round()
        )
        .unwrap();
    }

    let line = |f: &dyn Fn(&CurvePoint) -> u64| {
        points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.tick), y(f(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(
        out,
        r#"<polyline class="reachable" fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        line(&|p| p.reachable)
    )
    .unwrap();
    writeln!(
        out,
        r#"<polyline class="live" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6,4" points="{}"/>"#,
        line(&|p| p.live)
    )
    .unwrap();

    let lx = WIDTH - RIGHT - 150.0;
    writeln!(out, r#"<g class="legend">"#).unwrap();
    writeln!(
        out,
        r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5"/>"#,
        TOP + 10.0,
        lx + 30.0,
        TOP + 10.0
    )
    .unwrap();
    writeln!(out, r#"<text x="{}" y="{}">reachable</text>"#, lx + 36.0, TOP + 14.0).unwrap();
    writeln!(
        out,
        r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5" stroke-dasharray="6,4"/>"#,
        TOP + 28.0,
        lx + 30.0,
        TOP + 28.0
    )
    .unwrap();
    writeln!(out, r#"<text x="{}" y="{}">live</text>"#, lx + 36.0, TOP + 32.0).unwrap();
    writeln!(out, "</g>").unwrap();
    out.push_str("</svg>\n");
    out
}

fn histogram_svg(bins: &[(f64, f64, u64)], title: &str) -> String {
    let mut out = String::new();
    svg_open(&mut out, title);
    axes(&mut out, "drag (% of runtime)", "dead objects (log scale)");
    let max = bins.iter().map(|b| b.2).max().unwrap_or(0).max(1) as f64;
    let decades_top = max.log10().ceil().max(1.0);
    // The axis starts half a decade below the empty-bin floor.
    let bottom = EMPTY_BIN_FLOOR.log10() - 0.5;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| HEIGHT - BOTTOM - (v.log10() - bottom) / (decades_top - bottom) * plot_h;
    for d in 0..=decades_top as i32 {
        let v = 10f64.powi(d);
        writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0
        )
        .unwrap();
    }
    let lo = bins.first().map_or(0.0, |b| b.0);
    let hi = bins.last().map_or(100.0, |b| b.1);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let x = |v: f64| LEFT + (v - lo) / span * plot_w;
    for &(b_lo, b_hi, count) in bins {
        let plotted = if count == 0 { EMPTY_BIN_FLOOR } else { count as f64 };
        let top = y(plotted);
        let (fill, class) = if count == 0 { ("none", "bin empty") } else { ("#888888", "bin") };
        writeln!(
            out,
            r#"<rect class="{class}" data-count="{count}" data-plotted="{plotted}" x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{fill}" stroke="black"/>"#,
            x(b_lo) + 1.0,
            (x(b_hi) - x(b_lo) - 2.0).max(0.0),
            (HEIGHT - BOTTOM - top).max(0.0)
        )
        .unwrap();
    }
    for i in (0..=bins.len()).step_by(2) {
        let v = lo + span * i as f64 / bins.len().max(1) as f64;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{v}</text>"#,
            x(v),
            HEIGHT - BOTTOM + 16.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn gnuplot_head(out: &mut String, title: &str, stem: &str) {
    writeln!(out, "# {VERSION_COMMENT}").unwrap();
    writeln!(out, "set terminal svg size {WIDTH},{HEIGHT}").unwrap();
    writeln!(out, "set output '{stem}.svg'").unwrap();
    writeln!(out, "set title \"{}\"", title.replace('"', "'")).unwrap();
}

fn curves_gnuplot(points: &[CurvePoint], title: &str) -> String {
    let mut out = String::new();
    gnuplot_head(&mut out, title, title);
    out.push_str("set xlabel 'tick'\nset ylabel 'objects'\nset key top right\n");
    out.push_str("$data << EOD\n");
    for p in points {
        writeln!(out, "{} {} {}", p.tick, p.reachable, p.live).unwrap();
    }
    out.push_str("EOD\n");
    out.push_str(
        "plot $data using 1:2 with lines dt 1 lw 2 lc 'black' title 'reachable', \\\n     $data using 1:3 with lines dt 2 lw 2 lc 'black' title 'live'\n",
    );
    out
}

fn histogram_gnuplot(bins: &[(f64, f64, u64)], title: &str) -> String {
    let mut out = String::new();
    gnuplot_head(&mut out, title, title);
    out.push_str("set xlabel 'drag (% of runtime)'\nset ylabel 'dead objects (log scale)'\n");
    writeln!(out, "set logscale y\nset yrange [{}:*]", EMPTY_BIN_FLOOR / 2.0).unwrap();
    out.push_str("set style fill solid 0.5 border -1\nset boxwidth 0.9 relative\n");
    out.push_str("$data << EOD\n");
    for &(lo, hi, count) in bins {
        let plotted = if count == 0 { EMPTY_BIN_FLOOR } else { count as f64 };
        writeln!(out, "{} {} {}", (lo + hi) / 2.0, plotted, hi - lo).unwrap();
    }
    out.push_str("EOD\n");
    out.push_str("plot $data using 1:2:3 with boxes notitle\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn points(n: u64) -> Vec<CurvePoint> {
        (0..n)
            .map(|t| CurvePoint {
                tick: t,
                reachable: 100,
                live: 100 - t.min(100),
            })
            .collect()
    }

    #[test]
    fn curve_svg_structure() {
        let svg = render(&Series::Curves(points(500)), PlotFormat::Svg, "motiv");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(r#"class="legend""#));
        assert!(svg.contains(r#"class="live" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray"#));
        assert!(!svg.contains(r#"class="reachable" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray"#));
        assert_eq!(svg.matches("<!--").count(), 1);
    }

    #[test]
    fn empty_bins_use_floor() {
        let bins: Vec<_> = (0..20).map(|b| (b as f64 * 5.0, b as f64 * 5.0 + 5.0, if b == 0 { 40 } else { 0 })).collect();
        let svg = render(&Series::Histogram(bins.clone()), PlotFormat::Svg, "h");
        assert_eq!(svg.matches(r#"data-count="0" data-plotted="0.5""#).count(), 19);
        let rects: Vec<&str> = svg.lines().filter(|l| l.contains("class=\"bin empty\"")).collect();
        assert!(rects.iter().all(|r| !r.contains(r#"height="0.00""#)), "empty bins must be visible");
        let gp = render(&Series::Histogram(bins), PlotFormat::Gnuplot, "h");
        assert!(gp.contains("set logscale y"));
        assert!(gp.contains("7.5 0.5 5"));
    }

    #[test]
    fn gnuplot_curves_dash_live() {
        let gp = render(&Series::Curves(points(3)), PlotFormat::Gnuplot, "c");
        assert!(gp.contains("dt 1 lw 2 lc 'black' title 'reachable'"));
        assert!(gp.contains("dt 2 lw 2 lc 'black' title 'live'"));
        assert!(gp.contains("$data << EOD\n0 100 100\n"));
    }

    #[test]
    fn nice_ceilings() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(1001.0), 2000.0);
        assert_eq!(nice_ceiling(5.0), 5.0);
    }
}
