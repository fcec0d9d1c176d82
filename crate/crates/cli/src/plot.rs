//! Minimal deterministic SVG plots: mean lines with +/-1 std bands per
//! method, over the SNR grid. Pure functions of the summary rows, so
//! regenerating from the same data is byte-identical.

use std::path::Path;

use anyhow::{Context, Result};

use crate::report::SummaryRow;
use crate::trial::{METHOD_BASELINE, METHOD_PROPOSED};

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 34.0;
const MARGIN_B: f64 = 46.0;

const COLOR_PROPOSED: &str = "#1f77b4";
const COLOR_BASELINE: &str = "#d62728";
const COLOR_TRUTH: &str = "#666666";

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s.is_empty() {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{v:.2e}")
    }
}

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    /// (x, mean, std) triples.
    points: Vec<(f64, f64, f64)>,
}

struct Panel<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    log_y: bool,
    truth: Option<f64>,
    series: Vec<Series<'a>>,
}

impl Panel<'_> {
    fn render(&self, svg: &mut String, x0: f64, y0: f64) {
        let plot_x = x0 + MARGIN_L;
        let plot_y = y0 + MARGIN_T;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;

        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, m, sd) in &s.points {
                if m.is_finite() {
                    xs.push(x);
                    ys.push(self.map_y_value(m - sd));
                    ys.push(self.map_y_value(m + sd));
                }
            }
        }
        if let Some(t) = self.truth {
            ys.push(self.map_y_value(t));
        }
        if xs.is_empty() || ys.is_empty() {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"12\">no data</text>\n",
                fmt_coord(plot_x + 8.0),
                fmt_coord(plot_y + 16.0)
            ));
            return;
        }
        let (x_min, x_max) = span(&xs);
        let (y_min, y_max) = span(&ys);
        let sx = move |x: f64| plot_x + (x - x_min) / (x_max - x_min).max(1e-12) * plot_w;
        let sy = move |y: f64| {
            plot_y + plot_h - (y - y_min) / (y_max - y_min).max(1e-12) * plot_h
        };

        // Frame and title.
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#222\" stroke-width=\"1\"/>\n",
            fmt_coord(plot_x), fmt_coord(plot_y), fmt_coord(plot_w), fmt_coord(plot_h)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-weight=\"bold\">{}</text>\n",
            fmt_coord(x0 + MARGIN_L),
            fmt_coord(y0 + 20.0),
            self.title
        ));

        // X ticks at the sample points.
        let mut tick_xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .collect();
        tick_xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        tick_xs.dedup();
        for &tx in &tick_xs {
            let px = sx(tx);
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#222\" stroke-width=\"1\"/>\n",
                fmt_coord(px),
                fmt_coord(plot_y + plot_h),
                fmt_coord(plot_y + plot_h + 4.0)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                fmt_coord(px),
                fmt_coord(plot_y + plot_h + 17.0),
                fmt_tick(tx)
            ));
        }
        // Y ticks: 5 levels.
        for i in 0..=4 {
            let frac = i as f64 / 4.0;
            let yv = y_min + frac * (y_max - y_min);
            let py = sy(yv);
            let label = if self.log_y {
                fmt_tick(10f64.powf(yv))
            } else {
                fmt_tick(yv)
            };
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#ddd\" stroke-width=\"1\"/>\n",
                fmt_coord(plot_x),
                fmt_coord(plot_x + plot_w),
                fmt_coord(py)
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                fmt_coord(plot_x - 6.0),
                fmt_coord(py + 4.0),
                label
            ));
        }
        // Axis labels.
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            fmt_coord(plot_x + plot_w / 2.0),
            fmt_coord(y0 + PANEL_H - 10.0),
            self.x_label
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>\n",
            fmt_coord(x0 + 16.0),
            fmt_coord(plot_y + plot_h / 2.0),
            fmt_coord(x0 + 16.0),
            fmt_coord(plot_y + plot_h / 2.0),
            self.y_label
        ));

        // Truth line.
        if let Some(t) = self.truth {
            let py = sy(self.map_y_value(t));
            svg.push_str(&format!(
                "<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"{3}\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n",
                fmt_coord(plot_x),
                fmt_coord(plot_x + plot_w),
                fmt_coord(py),
                COLOR_TRUTH
            ));
        }

        // Bands then lines so lines stay visible.
        for s in &self.series {
            let pts: Vec<(f64, f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|p| p.1.is_finite())
                .collect();
            if pts.len() < 2 {
                continue;
            }
            let mut poly = String::new();
            for &(x, m, sd) in &pts {
                poly.push_str(&format!(
                    "{},{} ",
                    fmt_coord(sx(x)),
                    fmt_coord(sy(self.map_y_value(m + sd)))
                ));
            }
            for &(x, m, sd) in pts.iter().rev() {
                poly.push_str(&format!(
                    "{},{} ",
                    fmt_coord(sx(x)),
                    fmt_coord(sy(self.map_y_value(m - sd)))
                ));
            }
            svg.push_str(&format!(
                "<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.18\" stroke=\"none\"/>\n",
                poly.trim_end(),
                s.color
            ));
        }
        for s in &self.series {
            let pts: Vec<(f64, f64, f64)> = s
                .points
                .iter()
                .copied()
                .filter(|p| p.1.is_finite())
                .collect();
            if pts.is_empty() {
                continue;
            }
            let line: Vec<String> = pts
                .iter()
                .map(|&(x, m, _)| {
                    format!("{},{}", fmt_coord(sx(x)), fmt_coord(sy(self.map_y_value(m))))
                })
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
                line.join(" "),
                s.color
            ));
            for &(x, m, _) in &pts {
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"2.6\" fill=\"{}\"/>\n",
                    fmt_coord(sx(x)),
                    fmt_coord(sy(self.map_y_value(m))),
                    s.color
                ));
            }
        }
        // Legend.
        let mut ly = plot_y + 10.0;
        for s in &self.series {
            svg.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n",
                fmt_coord(plot_x + plot_w - 120.0),
                fmt_coord(ly),
                s.color
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
                fmt_coord(plot_x + plot_w - 100.0),
                fmt_coord(ly + 5.0),
                s.label
            ));
            ly += 16.0;
        }
    }

    fn map_y_value(&self, v: f64) -> f64 {
        if self.log_y {
            v.max(1e-6).log10()
        } else {
            v
        }
    }
}

fn span(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.06 * (hi - lo);
    (lo - pad, hi + pad)
}

fn document(panels: &[Panel<'_>]) -> String {
    let height = PANEL_H * panels.len() as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">\n",
        PANEL_W, height, PANEL_W, height
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, p) in panels.iter().enumerate() {
        p.render(&mut svg, 0.0, i as f64 * PANEL_H);
    }
    svg.push_str("</svg>\n");
    svg
}

fn series_for<'a>(
    rows: &'a [SummaryRow],
    pick: impl Fn(&SummaryRow) -> (f64, f64) + Copy,
) -> Vec<Series<'a>> {
    let extract = |method: &'static str, color: &'static str, label: &'static str| {
        let mut pts: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| {
                let (m, s) = pick(r);
                (r.snr_db, m, s)
            })
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Series {
            label,
            color,
            points: pts,
        }
    };
    vec![
        extract(METHOD_PROPOSED, COLOR_PROPOSED, "proposed"),
        extract(METHOD_BASELINE, COLOR_BASELINE, "baseline"),
    ]
}

/// Wall-clock comparison figure (log scale).
pub fn render_timing(rows: &[SummaryRow]) -> String {
    document(&[Panel {
        title: "Localization time vs. local SNR",
        x_label: "local SNR (dB)",
        y_label: "wall clock (ms, log)",
        log_y: true,
        truth: None,
        series: series_for(rows, |r| (r.mean_wall_ms, r.std_wall_ms)),
    }])
}

/// Start/stop estimate figure.
pub fn render_localization(rows: &[SummaryRow], true_eps: f64, true_eta: f64) -> String {
    document(&[
        Panel {
            title: "Estimated start sample",
            x_label: "local SNR (dB)",
            y_label: "epsilon (sample)",
            log_y: false,
            truth: Some(true_eps),
            series: series_for(rows, |r| (r.mean_epsilon, r.std_epsilon)),
        },
        Panel {
            title: "Estimated stop sample",
            x_label: "local SNR (dB)",
            y_label: "eta (sample)",
            log_y: false,
            truth: Some(true_eta),
            series: series_for(rows, |r| (r.mean_eta, r.std_eta)),
        },
    ])
}

/// Refined amplitude / frequency / phase figure. Amplitude truth varies
/// with SNR, so that panel plots the estimate-to-truth ratio instead.
pub fn render_parameters(
    rows: &[SummaryRow],
    amp_truth: &[(f64, f64)],
    true_freq: f64,
    true_phase: f64,
) -> String {
    let amp_for = |snr: f64| -> f64 {
        amp_truth
            .iter()
            .find(|(s, _)| (*s - snr).abs() < 1e-9)
            .map(|(_, a)| *a)
            .unwrap_or(f64::NAN)
    };
    document(&[
        Panel {
            title: "Refined amplitude (relative to truth)",
            x_label: "local SNR (dB)",
            y_label: "amplitude ratio",
            log_y: false,
            truth: Some(1.0),
            series: series_for(rows, |r| {
                let a = amp_for(r.snr_db);
                (r.mean_amp / a, r.std_amp / a)
            }),
        },
        Panel {
            title: "Refined frequency",
            x_label: "local SNR (dB)",
            y_label: "frequency (Hz)",
            log_y: false,
            truth: Some(true_freq),
            series: series_for(rows, |r| (r.mean_freq, r.std_freq)),
        },
        Panel {
            title: "Refined phase",
            x_label: "local SNR (dB)",
            y_label: "phase (rad)",
            log_y: false,
            truth: Some(true_phase),
            series: series_for(rows, |r| (r.mean_phase, r.std_phase)),
        },
    ])
}

pub fn write_svg(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}
