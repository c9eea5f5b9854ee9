//! Minimal line-plot SVG writer. Coordinates use fixed six-decimal
//! formatting so identical inputs give identical bytes.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
    pub stroke_width: f64,
    pub opacity: f64,
    /// Shown in the legend.
    pub legend: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, color: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            points,
            color: color.into(),
            stroke_width: 2.0,
            opacity: 1.0,
            legend: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub width: u32,
    pub height: u32,
    /// Fixed axis ranges; otherwise taken from the data.
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    /// Dashed y = x reference line.
    pub diagonal: bool,
    pub annotation: Option<String>,
}

impl PlotSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            width: 800,
            height: 600,
            x_range: None,
            y_range: None,
            diagonal: false,
            annotation: None,
        }
    }
}

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn data_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn render(spec: &PlotSpec) -> String {
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 160.0;
    const TOP: f64 = 50.0;
    const BOTTOM: f64 = 60.0;
    const TICKS: usize = 5;

    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let plot_w = (w - LEFT - RIGHT).max(1.0);
    let plot_h = (h - TOP - BOTTOM).max(1.0);
    let (x0, x1) = spec
        .x_range
        .unwrap_or_else(|| data_range(spec.series.iter().flat_map(|s| s.points.iter().map(|p| p.0))));
    let (y0, y1) = spec
        .y_range
        .unwrap_or_else(|| data_range(spec.series.iter().flat_map(|s| s.points.iter().map(|p| p.1))));
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, spec.width, spec.height);
    let _ = writeln!(
        s,
        r#"<text x="{:.6}" y="30" font-family="sans-serif" font-size="18" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&spec.title)
    );

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT:.6}" y="{TOP:.6}" width="{plot_w:.6}" height="{plot_h:.6}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12">"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.6}" y1="{:.6}" x2="{px:.6}" y2="{:.6}" stroke="black"/><text x="{px:.6}" y="{:.6}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.6}" y1="{py:.6}" x2="{LEFT:.6}" y2="{py:.6}" stroke="black"/><text x="{:.6}" y="{:.6}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.6}" y="{:.6}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        h - 15.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.6}" font-family="sans-serif" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.6})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(&spec.y_label)
    );

    if spec.diagonal {
        let lo = x0.max(y0);
        let hi = x1.min(y1);
        let _ = writeln!(
            s,
            r#"<line x1="{:.6}" y1="{:.6}" x2="{:.6}" y2="{:.6}" stroke="gray" stroke-dasharray="6,4"/>"#,
            sx(lo),
            sy(lo),
            sx(hi),
            sy(hi)
        );
    }

    for series in &spec.series {
        if series.points.is_empty() {
            continue;
        }
        let _ = write!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="{:.6}" stroke-opacity="{:.6}" points=""#,
            escape(&series.color),
            series.stroke_width,
            series.opacity
        );
        for (i, &(x, y)) in series.points.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.6},{:.6}", sx(x), sy(y));
        }
        let _ = writeln!(s, r#""><title>{}</title></polyline>"#, escape(&series.name));
    }

    let mut legend_y = TOP + 10.0;
    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="12">"#);
    for series in spec.series.iter().filter(|s| s.legend) {
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.6}" y1="{legend_y:.6}" x2="{:.6}" y2="{legend_y:.6}" stroke="{}" stroke-width="3"/><text x="{:.6}" y="{:.6}">{}</text>"#,
            lx + 20.0,
            escape(&series.color),
            lx + 26.0,
            legend_y + 4.0,
            escape(&series.name)
        );
        legend_y += 20.0;
    }
    if let Some(note) = &spec.annotation {
        let _ = writeln!(
            s,
            r#"<text x="{:.6}" y="{:.6}" font-size="14">{}</text>"#,
            LEFT + plot_w + 15.0,
            legend_y + 10.0,
            escape(note)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
