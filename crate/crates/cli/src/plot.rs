//! Static SVG line charts built from CSV logs.
//!
//! Output depends only on the input bytes: coordinates are printed with a
//! fixed number of decimals and series keep their first-seen order.

use std::fmt::Write as _;

use hofnet::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn read_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(format!("csv: {e}")))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(Error::Format("csv has no data rows".into()));
    }
    Ok((headers, rows))
}

fn column(headers: &[String], name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("csv has no column {name:?}")))
}

fn number(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Format(format!("row {line}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("row {line}: non-finite value {s:?}")));
    }
    Ok(v)
}

/// One series per `y` column against column `x`.
pub fn chart_from_csv(text: &str, x: &str, ys: &[&str], title: &str) -> Result<Chart> {
    let (headers, rows) = read_table(text)?;
    let xi = column(&headers, x)?;
    let mut series = Vec::new();
    for y in ys {
        let yi = column(&headers, y)?;
        let points = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((number(&r[xi], i + 1)?, number(&r[yi], i + 1)?)))
            .collect::<Result<Vec<_>>>()?;
        series.push(Series { name: y.to_string(), points });
    }
    Ok(Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: if ys.len() == 1 { ys[0].into() } else { "value".into() },
        series,
    })
}

/// One series per distinct value of column `group`.
pub fn chart_from_csv_grouped(text: &str, group: &str, x: &str, y: &str, title: &str) -> Result<Chart> {
    let (headers, rows) = read_table(text)?;
    let (gi, xi, yi) = (column(&headers, group)?, column(&headers, x)?, column(&headers, y)?);
    let mut series: Vec<Series> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let p = (number(&r[xi], i + 1)?, number(&r[yi], i + 1)?);
        match series.iter_mut().find(|s| s.name == r[gi]) {
            Some(s) => s.points.push(p),
            None => series.push(Series { name: r[gi].clone(), points: vec![p] }),
        }
    }
    Ok(Chart { title: title.into(), x_label: x.into(), y_label: y.into(), series })
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo > 0.0 {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(chart: &Chart) -> Result<String> {
    if chart.series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Format("chart has no points".into()));
    }
    let all = || chart.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&chart.title)
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#888"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="#888"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&chart.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if pts.len() == 1 {
            let (x, y) = series.points[0];
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(x), sy(y));
        } else {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            ly + 4.0,
            escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Parses `csv` and renders the `ys` columns against `x`.
pub fn emit_plot(csv: &str, x: &str, ys: &[&str], title: &str) -> Result<String> {
    render_svg(&chart_from_csv(csv, x, ys, title)?)
}
