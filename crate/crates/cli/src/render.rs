use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use symnoise_core::basis::SectorSpectrum;
use symnoise_core::{CMatrix, Error, Result};

/// Colour mapping of the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapScale {
    #[default]
    Linear,
    /// `log10` of the magnitude, clipped at [`LOG_FLOOR`].
    Log,
}

impl std::str::FromStr for HeatmapScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(HeatmapScale::Linear),
            "log" => Ok(HeatmapScale::Log),
            other => Err(Error::Config(format!("unknown heatmap scale {other:?} (expected linear or log)"))),
        }
    }
}

pub const LOG_FLOOR: f64 = 1e-6;

/// `|rho_kl|` in the symmetry eigenbasis with sector annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub labels: Vec<String>,
    /// `(eigenvalue, multiplicity)` in basis order.
    pub sectors: Vec<(f64, usize)>,
    pub values: Vec<Vec<f64>>,
}

fn sector_label(value: f64) -> String {
    let r = (value * 1e6).round() / 1e6;
    format!("{r}")
}

impl Heatmap {
    /// Magnitudes of `rho` expressed in the eigenbasis of `spec`.
    pub fn from_state(rho: &CMatrix, spec: &SectorSpectrum) -> Self {
        let r = spec.to_eigenbasis(rho);
        let mut labels = Vec::with_capacity(spec.dim());
        for (s, range) in spec.ranges().iter().enumerate() {
            for (k, _) in range.clone().enumerate() {
                labels.push(format!("q{}_{k}", sector_label(spec.eigenvalues[s])));
            }
        }
        let n = spec.dim();
        Heatmap {
            labels,
            sectors: spec.eigenvalues.iter().copied().zip(spec.multiplicities.iter().copied()).collect(),
            values: (0..n).map(|a| (0..n).map(|b| r[(a, b)].norm()).collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// CSV: a `# sectors:` comment, a header row of labels, then one row per
    /// basis state. Values use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let sectors: Vec<String> = self.sectors.iter().map(|(v, m)| format!("{v}x{m}")).collect();
        writeln!(out, "# sectors: {}", sectors.join(" ")).unwrap();
        writeln!(out, "state,{}", self.labels.join(",")).unwrap();
        for (label, row) in self.labels.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{label},{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("heatmap CSV: {msg}"));
        let mut sectors = Vec::new();
        let mut labels: Option<Vec<String>> = None;
        let mut values = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix("# sectors:") {
                for item in rest.split_whitespace() {
                    let (v, m) = item.split_once('x').ok_or_else(|| bad(format!("bad sector entry {item:?}")))?;
                    let v: f64 = v.parse().map_err(|_| bad(format!("bad sector value {v:?}")))?;
                    let m: usize = m.parse().map_err(|_| bad(format!("bad multiplicity {m:?}")))?;
                    sectors.push((v, m));
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut cells = line.split(',');
            let first = cells.next().unwrap_or_default();
            if labels.is_none() {
                if first != "state" {
                    return Err(bad("missing header row".into()));
                }
                labels = Some(cells.map(str::to_string).collect());
                continue;
            }
            let row: Vec<f64> = cells
                .map(|c| c.parse::<f64>().map_err(|_| bad(format!("bad number {c:?}"))))
                .collect::<Result<_>>()?;
            values.push(row);
        }
        let labels = labels.ok_or_else(|| bad("missing header row".into()))?;
        let n = labels.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(bad(format!("expected a {n}x{n} matrix")));
        }
        if !sectors.is_empty() && sectors.iter().map(|s| s.1).sum::<usize>() != n {
            return Err(bad("sector multiplicities do not add up to the matrix size".into()));
        }
        Ok(Heatmap { labels, sectors, values })
    }

    /// SVG rendering with sector boundaries.
    pub fn to_svg(&self, scale: HeatmapScale) -> String {
        let n = self.dim();
        let cell = 36.0;
        let margin = 90.0;
        let bar = 24.0;
        let size = margin + n as f64 * cell;
        let width = size + 3.0 * bar + 60.0;
        let height = size + 20.0;
        let max = self.values.iter().flatten().fold(0.0f64, |m, v| m.max(*v));
        let level = |v: f64| -> f64 {
            match scale {
                HeatmapScale::Linear => {
                    if max > 0.0 {
                        v / max
                    } else {
                        0.0
                    }
                }
                HeatmapScale::Log => ((v.max(LOG_FLOOR).log10() - LOG_FLOOR.log10()) / -LOG_FLOOR.log10()).clamp(0.0, 1.0),
            }
        };

        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        for (a, row) in self.values.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let x = margin + b as f64 * cell;
                let y = margin + a as f64 * cell;
                writeln!(
                    s,
                    r#"<rect x="{x:.1}" y="{y:.1}" width="{cell:.1}" height="{cell:.1}" fill="{}"><title>{} {} {v:e}</title></rect>"#,
                    colour(level(v)),
                    self.labels[a],
                    self.labels[b]
                )
                .unwrap();
            }
        }
        for (k, label) in self.labels.iter().enumerate() {
            let c = margin + (k as f64 + 0.5) * cell;
            writeln!(s, r#"<text x="{:.1}" y="{c:.1}" font-size="10" text-anchor="end" dominant-baseline="middle">{label}</text>"#, margin - 4.0).unwrap();
            writeln!(
                s,
                r#"<text x="{c:.1}" y="{:.1}" font-size="10" text-anchor="start" transform="rotate(-60 {c:.1} {:.1})">{label}</text>"#,
                margin - 4.0,
                margin - 4.0
            )
            .unwrap();
        }
        let mut edge = 0usize;
        for (_, m) in &self.sectors {
            let x = margin + edge as f64 * cell;
            let w = *m as f64 * cell;
            writeln!(s, r#"<rect x="{x:.1}" y="{x:.1}" width="{w:.1}" height="{w:.1}" fill="none" stroke="red" stroke-width="2"/>"#).unwrap();
            edge += m;
        }
        let bx = size + bar;
        let steps = 64;
        let span = n as f64 * cell;
        for k in 0..steps {
            let t = k as f64 / steps as f64;
            let y = margin + span * (1.0 - t) - span / steps as f64;
            writeln!(s, r#"<rect x="{bx:.1}" y="{y:.2}" width="{bar:.1}" height="{:.2}" fill="{}"/>"#, span / steps as f64 + 0.5, colour(t + 0.5 / steps as f64)).unwrap();
        }
        let (top, bottom) = match scale {
            HeatmapScale::Linear => (format!("{max:.3e}"), "0".to_string()),
            HeatmapScale::Log => ("1".to_string(), format!("{LOG_FLOOR:e}")),
        };
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">{top}</text>"#, bx + bar + 4.0, margin + 8.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10">{bottom}</text>"#, bx + bar + 4.0, margin + span).unwrap();
        s.push_str("</svg>\n");
        s
    }
}

/// Piecewise-linear viridis-like colour for `t` in `[0, 1]`.
fn colour(t: f64) -> String {
    const STOPS: [(f64, [f64; 3]); 5] = [
        (0.0, [68.0, 1.0, 84.0]),
        (0.25, [59.0, 82.0, 139.0]),
        (0.5, [33.0, 145.0, 140.0]),
        (0.75, [94.0, 201.0, 98.0]),
        (1.0, [253.0, 231.0, 37.0]),
    ];
    let t = t.clamp(0.0, 1.0);
    let k = STOPS.iter().rposition(|s| s.0 <= t).unwrap_or(0).min(STOPS.len() - 2);
    let (t0, c0) = STOPS[k];
    let (t1, c1) = STOPS[k + 1];
    let f = (t - t0) / (t1 - t0);
    let mix = |i: usize| (c0[i] + f * (c1[i] - c0[i])).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(0), mix(1), mix(2))
}
