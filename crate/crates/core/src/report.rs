//! Self-contained SVG figures and the per-run manifest.
//!
//! Output is plain text with fixed numeric formatting, so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::processor::ProcessorFilter;
use crate::train::ProcessorSummary;
use crate::{Error, Result, AUDIOGRAM_FREQS};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// A curve for [`response_plot`].
#[derive(Debug, Clone)]
pub struct ResponseCurve<'a> {
    pub label: String,
    pub filter: &'a ProcessorFilter,
    pub dashed: bool,
    /// Requested gains, drawn as markers at the audiogram frequencies.
    pub anchors: Option<[f64; 6]>,
}

/// Magnitude responses on a log-frequency axis, 100 Hz to 10 kHz.
pub fn response_plot(title: &str, curves: &[ResponseCurve<'_>]) -> String {
    let (f_lo, f_hi) = (100.0f64, 10_000.0f64);
    let points = 240;
    let freqs: Vec<f64> = (0..points).map(|i| f_lo * (f_hi / f_lo).powf(i as f64 / (points - 1) as f64)).collect();
    let responses: Vec<Vec<f64>> =
        curves.iter().map(|c| freqs.iter().map(|&f| c.filter.response_db(f)).collect()).collect();
    let mut lo = responses.iter().flatten().cloned().fold(0.0f64, f64::min);
    let mut hi = responses.iter().flatten().cloned().fold(10.0f64, f64::max);
    lo = (lo / 10.0).floor() * 10.0;
    hi = (hi / 10.0).ceil() * 10.0;
    if hi - lo < 20.0 {
        hi = lo + 20.0;
    }
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let x = |f: f64| MARGIN_L + pw * (f / f_lo).log10() / (f_hi / f_lo).log10();
    let y = |db: f64| MARGIN_T + ph * (hi - db) / (hi - lo);

    let mut s = svg_open(title);
    for f in [100.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0, 10_000.0] {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4}</text>"##,
            x(f),
            MARGIN_T,
            MARGIN_T + ph,
            MARGIN_T + ph + 16.0,
            if f >= 1000.0 { format!("{}k", f / 1000.0) } else { format!("{f}") }
        );
    }
    let mut db = lo;
    while db <= hi + 1e-9 {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
            MARGIN_L,
            y(db),
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y(db) + 4.0,
            db
        );
        db += 10.0;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Frequency (Hz)</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">Gain (dB)</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );
    for (i, (c, r)) in curves.iter().zip(&responses).enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> =
            freqs.iter().zip(r).map(|(&f, &v)| format!("{:.2},{:.2}", x(f), y(v.max(lo)))).collect();
        let dash = if c.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2"{dash} points="{}"/>"#,
            path.join(" ")
        );
        if let Some(a) = c.anchors {
            for (f, g) in AUDIOGRAM_FREQS.iter().zip(a) {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, x(*f), y(g.max(lo)));
            }
        }
        let ly = MARGIN_T + 12.0 + 20.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Which summary statistic a bar chart shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarMetric {
    Haspi,
    CepstralCorrelation,
}

/// Grouped bars (one group per audiogram, one bar per processor) with
/// standard-error whiskers.
pub fn bar_chart(title: &str, summary: &[ProcessorSummary], metric: BarMetric) -> String {
    let mut groups: Vec<&str> = Vec::new();
    let mut procs: Vec<&str> = Vec::new();
    for r in summary {
        if !groups.contains(&r.audiogram.as_str()) {
            groups.push(&r.audiogram);
        }
        if !procs.contains(&r.processor.as_str()) {
            procs.push(&r.processor);
        }
    }
    let value = |r: &ProcessorSummary| match metric {
        BarMetric::Haspi => (r.mean_haspi, r.se_haspi),
        BarMetric::CepstralCorrelation => (r.mean_c_c, r.se_c_c),
    };
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let y = |v: f64| MARGIN_T + ph * (1.0 - v.clamp(0.0, 1.0));
    let group_w = pw / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / procs.len().max(1) as f64;

    let mut s = svg_open(title);
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{v:.1}</text>"##,
            MARGIN_L,
            y(v),
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y(v) + 4.0
        );
    }
    let label = match metric {
        BarMetric::Haspi => "Index",
        BarMetric::CepstralCorrelation => "Cepstral correlation",
    };
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{label}</text>"#,
        MARGIN_T + ph / 2.0
    );
    for (gi, g) in groups.iter().enumerate() {
        let gx = MARGIN_L + group_w * gi as f64 + group_w * 0.1;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + group_w * 0.4,
            MARGIN_T + ph + 18.0,
            escape(g)
        );
        for (pi, p) in procs.iter().enumerate() {
            let Some(r) = summary.iter().find(|r| r.audiogram == *g && r.processor == *p) else {
                continue;
            };
            let (v, se) = value(r);
            let bx = gx + bar_w * pi as f64;
            let colour = PALETTE[pi % PALETTE.len()];
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{colour}"/>"#,
                bx,
                y(v),
                bar_w * 0.9,
                y(0.0) - y(v)
            );
            let cx = bx + bar_w * 0.45;
            let _ = writeln!(
                s,
                r#"<path d="M{cx:.2},{:.2}V{:.2}M{:.2},{:.2}H{:.2}M{:.2},{:.2}H{:.2}" stroke="black" fill="none"/>"#,
                y(v - se),
                y(v + se),
                cx - 4.0,
                y(v - se),
                cx + 4.0,
                cx - 4.0,
                y(v + se),
                cx + 4.0
            );
        }
    }
    for (pi, p) in procs.iter().enumerate() {
        let ly = MARGIN_T + 12.0 + 20.0 * pi as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{:.1}" width="14" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly - 6.0,
            PALETTE[pi % PALETTE.len()],
            lx + 20.0,
            ly + 4.0,
            escape(p)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// What produced an output directory, sufficient to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Full argument vector, program name first.
    pub command: Vec<String>,
    /// Effective configuration in `key = value` form.
    pub config: String,
    pub seed: u64,
    pub corpus_hash: Option<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub tool_version: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn new(command: Vec<String>, config: String, seed: u64) -> Self {
        Self {
            command,
            config,
            seed,
            corpus_hash: None,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises") + "\n";
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }
}
