//! Inspection artifacts: per-component histograms of the leading projected
//! dimensions (CSV and SVG) and per-cluster mean images.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::FeatureMatrix;
use crate::error::{IchError, Result};

pub const MAX_PANELS: usize = 7;
pub const DEFAULT_BINS: usize = 30;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentHistogram {
    pub component: usize,
    pub lo: f64,
    pub hi: f64,
    /// `counts[group][bin]`.
    pub counts: Vec<Vec<usize>>,
    /// Marker value, e.g. the mean of the first harvested cluster.
    pub marker: Option<f64>,
}

impl ComponentHistogram {
    pub fn bins(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.bins() as f64;
        (self.lo + w * b as f64, self.lo + w * (b + 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPanelSet {
    /// One group per label; a single `all` group when unlabeled.
    pub groups: Vec<String>,
    pub panels: Vec<ComponentHistogram>,
}

/// Histograms of the first `min(7, n_dims)` columns of `projected`, split by
/// label. `marked` selects rows whose per-component mean is drawn as marker.
pub fn component_histograms(
    projected: &FeatureMatrix,
    labels: Option<&[String]>,
    marked: Option<&[usize]>,
    bins: usize,
) -> Result<HistogramPanelSet> {
    if bins == 0 {
        return Err(IchError::InvalidConfig("bins must be positive".into()));
    }
    let n = projected.n_samples();
    let (groups, group_of): (Vec<String>, Vec<usize>) = match labels {
        Some(l) => {
            if l.len() != n {
                return Err(IchError::DimensionMismatch {
                    expected: n,
                    got: l.len(),
                });
            }
            crate::data::encode_labels(l)
        }
        None => (vec!["all".into()], vec![0; n]),
    };
    let panels = (0..projected.n_dims().min(MAX_PANELS))
        .map(|c| {
            let col: Vec<f64> = projected.rows().map(|r| r[c]).collect();
            let mut lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let mut hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                lo = 0.0;
                hi = 1.0;
            }
            if hi <= lo {
                lo -= 0.5;
                hi += 0.5;
            }
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![vec![0usize; bins]; groups.len()];
            for (v, &g) in col.iter().zip(&group_of) {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[g][b] += 1;
            }
            let marker = marked
                .filter(|m| !m.is_empty())
                .map(|m| m.iter().map(|&i| col[i]).sum::<f64>() / m.len() as f64);
            ComponentHistogram {
                component: c,
                lo,
                hi,
                counts,
                marker,
            }
        })
        .collect();
    Ok(HistogramPanelSet { groups, panels })
}

impl HistogramPanelSet {
    /// `component,bin,bin_lo,bin_hi,group,count` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,bin,bin_lo,bin_hi,group,count\n");
        for p in &self.panels {
            for (g, name) in self.groups.iter().enumerate() {
                for b in 0..p.bins() {
                    let (lo, hi) = p.bin_edges(b);
                    let _ = writeln!(
                        out,
                        "{},{},{:.6},{:.6},{},{}",
                        p.component + 1,
                        b,
                        lo,
                        hi,
                        name,
                        p.counts[g][b]
                    );
                }
            }
        }
        out
    }

    /// Vertical stack of stacked-bar histograms, one panel per component.
    pub fn to_svg(&self) -> String {
        let (w, ph, gap, left, top) = (640.0, 110.0, 24.0, 48.0, 28.0);
        let legend_h = 18.0 * self.groups.len() as f64 + 8.0;
        let height = top + self.panels.len() as f64 * (ph + gap) + legend_h;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{height}" viewBox="0 0 {w} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let plot_w = w - left - 16.0;
        for (pi, p) in self.panels.iter().enumerate() {
            let y0 = top + pi as f64 * (ph + gap);
            let bins = p.bins();
            let totals: Vec<usize> = (0..bins)
                .map(|b| p.counts.iter().map(|g| g[b]).sum())
                .collect();
            let max = totals.iter().copied().max().unwrap_or(0).max(1) as f64;
            let bw = plot_w / bins as f64;
            let _ = writeln!(
                s,
                r#"<g class="panel" data-component="{}">"#,
                p.component + 1
            );
            let _ = writeln!(
                s,
                r#"<text x="4" y="{:.1}">PC{}</text>"#,
                y0 + ph / 2.0,
                p.component + 1
            );
            let _ = writeln!(
                s,
                r##"<rect x="{left}" y="{y0:.1}" width="{plot_w:.1}" height="{ph}" fill="none" stroke="#999"/>"##
            );
            for b in 0..bins {
                let mut acc = 0usize;
                for (g, counts) in p.counts.iter().enumerate() {
                    let c = counts[b];
                    if c == 0 {
                        continue;
                    }
                    let h = c as f64 / max * (ph - 4.0);
                    let y = y0 + ph - (acc as f64 / max * (ph - 4.0)) - h;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                        left + b as f64 * bw,
                        y,
                        bw.max(0.5),
                        h,
                        PALETTE[g % PALETTE.len()]
                    );
                    acc += c;
                }
            }
            if let Some(m) = p.marker {
                let x = left + (m - p.lo) / (p.hi - p.lo) * plot_w;
                let _ = writeln!(
                    s,
                    r#"<line class="marker" x1="{x:.2}" x2="{x:.2}" y1="{y0:.1}" y2="{:.1}" stroke="black" stroke-dasharray="4 2"/>"#,
                    y0 + ph
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{left}" y="{:.1}">{:.3}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
                y0 + ph + 12.0,
                p.lo,
                left + plot_w,
                y0 + ph + 12.0,
                p.hi
            );
            s.push_str("</g>\n");
        }
        let ly = top + self.panels.len() as f64 * (ph + gap);
        for (g, name) in self.groups.iter().enumerate() {
            let y = ly + g as f64 * 18.0;
            let _ = writeln!(
                s,
                r#"<rect x="{left}" y="{y:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                PALETTE[g % PALETTE.len()],
                left + 18.0,
                y + 10.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Side length if `n_dims` is a perfect square (image-backed features).
pub fn image_side(n_dims: usize) -> Option<usize> {
    let side = (n_dims as f64).sqrt().round() as usize;
    (side >= 2 && side * side == n_dims).then_some(side)
}

/// Mean feature vector of the given rows.
pub fn mean_image(features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(IchError::InvalidData("mean of an empty cluster".into()));
    }
    Ok(features.select_rows(rows)?.column_mean())
}

/// Grayscale PNG bytes of a mean image with values in `[0, 1]`.
pub fn mean_image_png(values: &[f64], side: usize) -> Result<Vec<u8>> {
    let pixels: Vec<u8> = values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(side as u32, side as u32, pixels)
        .ok_or_else(|| IchError::InvalidData("image size mismatch".into()))?;
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}
