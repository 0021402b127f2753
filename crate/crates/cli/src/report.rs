//! Output helpers: CSV metadata headers and hand-written SVG line plots.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Open an output CSV and stamp the metadata header every artifact carries.
pub fn csv_writer(path: &Path, config_sha256: &str, seed: u64) -> std::io::Result<BufWriter<File>> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# generator = atomsense {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# config_sha256 = {config_sha256}")?;
    writeln!(w, "# seed = {seed}")?;
    Ok(w)
}

/// One plotted curve.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if a >= 1e4 || a < 1e-3 {
        format!("{v:.1e}")
    } else {
        format!("{v:.4}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    }
}

/// Write a static SVG line plot. Presentation only; all acceptance checks
/// read the CSVs.
pub fn svg_plot(path: &Path, spec: &PlotSpec, series: &[Series]) -> std::io::Result<()> {
    let (w, h) = (760.0, 480.0);
    let (ml, mr, mt, mb) = (84.0, 24.0, 40.0, 56.0);
    let (pw, ph) = (w - ml - mr, h - mt - mb);
    let tx = |v: f64| if spec.log_x { v.log10() } else { v };
    let ty = |v: f64| if spec.log_y { v.log10() } else { v };
    let finite = |v: f64| v.is_finite();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0) {
                let (x, y) = (tx(x), ty(y));
                if finite(x) && finite(y) {
                    xs.push(x);
                    ys.push(y);
                }
            }
        }
    }
    let (mut x0, mut x1) = min_max(&xs);
    let (mut y0, mut y1) = min_max(&ys);
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad_y = 0.06 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| mt + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    out.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        ml + pw / 2.0,
        esc(spec.title)
    ));
    // Axes frame.
    out.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" \
         stroke=\"#333\"/>\n"
    ));
    // Ticks: 5 per axis on the transformed scale.
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let vx = if spec.log_x { 10f64.powf(fx) } else { fx };
        let vy = if spec.log_y { 10f64.powf(fy) } else { fy };
        out.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{mt}\" x2=\"{0}\" y2=\"{1}\" stroke=\"#ddd\"/>\n",
            px(fx),
            mt + ph
        ));
        out.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ddd\"/>\n",
            py(fy),
            ml + pw
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            px(fx),
            mt + ph + 18.0,
            fmt_tick(vx)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            ml - 6.0,
            py(fy) + 4.0,
            fmt_tick(vy)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        ml + pw / 2.0,
        h - 12.0,
        esc(spec.x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {})\">{}</text>\n",
        mt + ph / 2.0,
        mt + ph / 2.0,
        esc(spec.y_label)
    ));
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|&&(x, y)| (!spec.log_x || x > 0.0) && (!spec.log_y || y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(tx(x)), py(ty(y))))
            .collect();
        if pts.len() > 1 {
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
        } else if pts.len() == 1 {
            let xy: Vec<&str> = pts[0].split(',').collect();
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                xy[0], xy[1]
            ));
        }
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{color}\"/>\n",
            ml + 10.0,
            mt + 12.0 + 18.0 * si as f64
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            ml + 30.0,
            mt + 18.0 + 18.0 * si as f64,
            esc(s.label)
        ));
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-spaced octave tau grid from `tau0` up to `duration / 3`.
pub fn tau_grid(tau0: f64, duration: f64) -> Vec<f64> {
    let mut taus = Vec::new();
    let mut t = tau0;
    while t <= duration / 3.0 {
        taus.push(t);
        t *= 2.0;
    }
    taus
}
