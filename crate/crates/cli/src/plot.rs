use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jetssm_core::dataset::{load_profiles_csv, segment_depths};
use jetssm_core::{Error, Result};

use crate::checkpoint;
use crate::data;
use crate::io::write_atomic;

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Per-standoff depth statistics pooled over dwells.
#[derive(Clone, Debug, PartialEq)]
pub struct StandoffStat {
    pub standoff_mm: f64,
    pub mean_um: f64,
    pub std_um: f64,
    pub count: usize,
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Self { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn svg_frame(title: &str, xlabel: &str, ylabel: &str, ax: &Axes) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = ax.x.0 + f * (ax.x.1 - ax.x.0);
        let yv = ax.y.0 + f * (ax.y.1 - ax.y.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.4}</text>"#,
            ax.px(xv),
            y0 + 16.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{:.4}</text>"#,
            x0 - 4.0,
            ax.py(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    s
}

fn polyline(ax: &Axes, xs: &[f64], ys: &[f64], color: &str) -> String {
    let pts: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", ax.px(x), ax.py(y)))
        .collect();
    format!(
        r#"<polyline points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
        pts.join(" ")
    ) + "\n"
}

fn legend(names: &[String]) -> String {
    let mut s = String::new();
    for (i, n) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/><text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            W - MARGIN - 120.0,
            y - 9.0,
            W - MARGIN - 105.0,
            y,
            escape(n)
        );
    }
    s
}

fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let with = |ext: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(ext);
        PathBuf::from(s)
    };
    (with(".svg"), with(".csv"))
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Pools the center-column depth of every dwell across the recordings in
/// `data_dir` (the `synth` metadata supplies the dwell frames).
pub fn standoff_stats(data_dir: &Path) -> Result<Vec<StandoffStat>> {
    let mut pooled: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
    for f in data::discover(data_dir)? {
        let meta = data::load_meta(&f)?;
        let profiles = load_profiles_csv(&f.csv)?;
        for (z, d) in segment_depths(&profiles, &meta.segments) {
            pooled.entry((z * 1000.0).round() as i64).or_insert((z, Vec::new())).1.push(d);
        }
    }
    Ok(pooled
        .into_values()
        .map(|(z, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            StandoffStat {
                standoff_mm: z,
                mean_um: mean,
                std_um: var.sqrt(),
                count: v.len(),
            }
        })
        .collect())
}

/// Depth against standoff with ±1 std error bars. Writes `<prefix>.svg` and
/// `<prefix>.csv`.
pub fn plot_depth(data_dir: &Path, prefix: &Path) -> Result<Vec<StandoffStat>> {
    let stats = standoff_stats(data_dir)?;
    if stats.is_empty() {
        return Err(Error::InvalidArgument("no dwell segments to plot".into()));
    }
    let (svg_path, csv_path) = paths(prefix);
    write_atomic(&csv_path, |w| {
        writeln!(w, "standoff_mm,mean_um,std_um,count")?;
        for s in &stats {
            writeln!(w, "{},{},{},{}", s.standoff_mm, s.mean_um, s.std_um, s.count)?;
        }
        Ok(())
    })?;
    let xr = range(stats.iter().map(|s| s.standoff_mm));
    let yr = range(stats.iter().flat_map(|s| [s.mean_um - s.std_um, s.mean_um + s.std_um]));
    let ax = Axes::new((xr.0 - 0.5, xr.1 + 0.5), (yr.0.min(0.0), yr.1 * 1.05));
    let mut svg = svg_frame("Depth vs standoff", "standoff (mm)", "depth (um)", &ax);
    let bar = 0.3 * (ax.px(1.0) - ax.px(0.0));
    for s in &stats {
        let (x, top, base) = (ax.px(s.standoff_mm), ax.py(s.mean_um), ax.py(0.0_f64.max(ax.y.0)));
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
            x - bar / 2.0,
            top.min(base),
            bar,
            (base - top).abs()
        );
        let (lo, hi) = (ax.py(s.mean_um - s.std_um), ax.py(s.mean_um + s.std_um));
        let _ = writeln!(
            svg,
            r#"<path d="M{x:.2} {lo:.2} L{x:.2} {hi:.2} M{:.2} {lo:.2} L{:.2} {lo:.2} M{:.2} {hi:.2} L{:.2} {hi:.2}" stroke="black" fill="none"/>"#,
            x - 5.0,
            x + 5.0,
            x - 5.0,
            x + 5.0
        );
    }
    let xs: Vec<f64> = stats.iter().map(|s| s.standoff_mm).collect();
    let ys: Vec<f64> = stats.iter().map(|s| s.mean_um).collect();
    svg += &polyline(&ax, &xs, &ys, "#08519c");
    svg += "</svg>\n";
    write_atomic(&svg_path, |w| w.write_all(svg.as_bytes()))?;
    Ok(stats)
}

/// Truth and predicted traces of one profile column over the test half.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub frames: Vec<usize>,
    pub truth: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
}

/// Overlays predictions of each checkpoint on the truth for recording
/// `trial` (sorted order) and profile `column`. Writes `<prefix>.svg` and
/// `<prefix>.csv`.
pub fn plot_overlay(
    checkpoints: &[PathBuf],
    data_dir: &Path,
    trial: usize,
    column: usize,
    prefix: &Path,
) -> Result<Overlay> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("overlay needs at least one --checkpoint".into()));
    }
    let files = data::discover(data_dir)?;
    let file = files.get(trial).ok_or_else(|| {
        Error::InvalidArgument(format!("trial index {trial} out of range ({} recordings)", files.len()))
    })?;
    let mut overlay: Option<Overlay> = None;
    for path in checkpoints {
        let ck = checkpoint::load(path)?;
        if column >= ck.model.model_config.out_channels {
            return Err(Error::InvalidArgument(format!("column {column} out of range")));
        }
        let d = data::load_trial(file, &ck.mel)?;
        let (train_range, test_range) = jetssm_core::dataset::split_train_test(d.frames());
        debug_assert_eq!(train_range.end, test_range.start);
        let test = d.test_part()?;
        let pred = ck.model.predict_um(&test.mel, None)?;
        let o = overlay.get_or_insert_with(|| Overlay {
            frames: test_range.clone().collect(),
            truth: test.profiles.depths().column(column),
            series: Vec::new(),
        });
        let mut name = ck.model.kind.name().to_string();
        if o.series.iter().any(|(n, _)| *n == name) {
            name = format!("{name}_{}", o.series.len());
        }
        o.series.push((name, pred.column(column)));
    }
    let o = overlay.expect("at least one checkpoint");
    let (svg_path, csv_path) = paths(prefix);
    write_atomic(&csv_path, |w| {
        let names: Vec<&str> = o.series.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "frame,truth,{}", names.join(","))?;
        for (i, f) in o.frames.iter().enumerate() {
            let vals: Vec<String> = o.series.iter().map(|(_, v)| v[i].to_string()).collect();
            writeln!(w, "{f},{},{}", o.truth[i], vals.join(","))?;
        }
        Ok(())
    })?;
    let xs: Vec<f64> = o.frames.iter().map(|&f| f as f64).collect();
    let xr = range(xs.iter().copied());
    let yr = range(o.truth.iter().chain(o.series.iter().flat_map(|(_, v)| v)).copied());
    let ax = Axes::new(xr, (yr.0.min(0.0), yr.1 * 1.05 + 1e-9));
    let mut svg = svg_frame(
        &format!("Profile column {column}: prediction vs truth"),
        "frame",
        "depth (um)",
        &ax,
    );
    svg += &polyline(&ax, &xs, &o.truth, COLORS[0]);
    let mut names = vec!["truth".to_string()];
    for (i, (n, v)) in o.series.iter().enumerate() {
        svg += &polyline(&ax, &xs, v, COLORS[(i + 1) % COLORS.len()]);
        names.push(n.clone());
    }
    svg += &legend(&names);
    svg += "</svg>\n";
    write_atomic(&svg_path, |w| w.write_all(svg.as_bytes()))?;
    Ok(o)
}
