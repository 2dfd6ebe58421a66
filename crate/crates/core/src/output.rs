//! Run artifacts: `trajectory.csv`, `report.json` and SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{self, ConsensusReport, MonotonicityVerdict};
use crate::dynamics::{Mode, Scenario, Trajectory};
use crate::protocols::ValidationReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSummary {
    pub applicable: bool,
    pub note: Option<String>,
    /// Weight `M` on the leader kinetic term (leader mode only).
    pub m_weight: Option<f64>,
    pub verdict: Option<MonotonicityVerdict>,
    pub initial: Option<f64>,
    pub last: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_fingerprint: String,
    pub mode: Mode,
    pub consensus: ConsensusReport,
    pub assumptions: ValidationReport,
    pub lyapunov: LyapunovSummary,
    /// Relative drift of the conserved quantity, when it is defined.
    pub alpha_drift: Option<f64>,
}

/// Everything derived from a finished trajectory.
#[derive(Debug, Clone)]
pub struct RunAnalysis {
    pub report: RunReport,
    pub lyapunov: Option<Vec<(f64, f64)>>,
    pub alpha: Option<Vec<Vec<f64>>>,
}

pub fn analyze_run(traj: &Trajectory, scenario: &Scenario, assumptions: ValidationReport) -> RunAnalysis {
    let consensus = analysis::assess(traj, scenario);

    let (series, note, m_weight) = match analysis::lyapunov_series(traj, scenario, None) {
        Ok(series) => {
            let m = match scenario.mode {
                Mode::Leader => analysis::leader_lyapunov_params(scenario, None)
                    .ok()
                    .map(|p| p.m_weight),
                Mode::Leaderless => None,
            };
            (Some(series), None, m)
        }
        Err(e) => (None, Some(e.to_string()), None),
    };
    let lyapunov = LyapunovSummary {
        applicable: series.is_some(),
        note,
        m_weight,
        verdict: series
            .as_deref()
            .map(|s| analysis::check_nonincreasing(s, analysis::MONOTONICITY_SLACK)),
        initial: series.as_ref().and_then(|s| s.first()).map(|x| x.1),
        last: series.as_ref().and_then(|s| s.last()).map(|x| x.1),
    };

    let alpha: Option<Vec<Vec<f64>>> = traj
        .samples
        .iter()
        .map(|s| analysis::invariant_alpha(s, &scenario.masses, &scenario.protocol))
        .collect::<crate::Result<_>>()
        .ok();
    let alpha_drift = alpha.as_ref().map(|rows| {
        let first = &rows[0];
        rows.iter()
            .flat_map(|row| row.iter().zip(first).map(|(a, a0)| (a - a0).abs() / (1.0 + a0.abs())))
            .fold(0.0, f64::max)
    });

    RunAnalysis {
        report: RunReport {
            scenario_fingerprint: traj.scenario_fingerprint.clone(),
            mode: scenario.mode,
            consensus,
            assumptions,
            lyapunov,
            alpha_drift,
        },
        lyapunov: series,
        alpha,
    }
}

/// 17 significant digits, round-trips any `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn indexed(prefix: &str, i: &str, l: usize, n_dims: usize) -> String {
    if n_dims == 1 {
        format!("{prefix}_{i}")
    } else {
        format!("{prefix}_{i}_{}", l + 1)
    }
}

/// Writes the trajectory CSV: `t, p_1..p_N, q_1..q_N[, p_L, q_L], V[, alpha_1..alpha_n]`.
/// With `n_dims > 1`, agent columns are `p_i_l`. `V` is left empty when the
/// Lyapunov function does not apply.
pub fn write_csv(traj: &Trajectory, scenario: &Scenario, run: &RunAnalysis, mut w: impl Write) -> io::Result<()> {
    let n = scenario.n_agents;
    let dims = scenario.n_dims;
    let has_leader = scenario.mode == Mode::Leader;

    let mut header = vec!["t".to_string()];
    for prefix in ["p", "q"] {
        for i in 1..=n {
            for l in 0..dims {
                header.push(indexed(prefix, &i.to_string(), l, dims));
            }
        }
    }
    if has_leader {
        for prefix in ["p", "q"] {
            for l in 0..dims {
                header.push(indexed(prefix, "L", l, dims));
            }
        }
    }
    header.push("V".into());
    if run.alpha.is_some() {
        for l in 1..=dims {
            header.push(format!("alpha_{l}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;

    let mut line = String::new();
    for (k, s) in traj.samples.iter().enumerate() {
        line.clear();
        line.push_str(&fmt_f64(s.t));
        for x in s.p.iter().chain(&s.q) {
            line.push(',');
            line.push_str(&fmt_f64(*x));
        }
        if let Some(l) = &s.leader {
            for x in l.p.iter().chain(&l.q) {
                line.push(',');
                line.push_str(&fmt_f64(*x));
            }
        }
        line.push(',');
        if let Some(v) = &run.lyapunov {
            line.push_str(&fmt_f64(v[k].1));
        }
        if let Some(alpha) = &run.alpha {
            for a in &alpha[k] {
                line.push(',');
                line.push_str(&fmt_f64(*a));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A static SVG line chart. Returns `None` if there is nothing finite to draw.
pub fn line_chart_svg(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> Option<String> {
    let (w, h) = (800.0, 420.0);
    let (left, right, top, bottom) = (70.0, 110.0, 40.0, 50.0);
    let points = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !(x0.is_finite() && y0.is_finite()) {
        return None;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            sx(fx),
            top + plot_h + 18.0,
            tick(fx)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#,
        left + plot_w / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{y_label}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );

    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", sx(x), sy(y));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        );
        let ly = top + 14.0 + 16.0 * idx as f64;
        let lx = left + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{label}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn tick(x: f64) -> String {
    if x != 0.0 && (x.abs() >= 1e4 || x.abs() < 1e-2) {
        format!("{x:.2e}")
    } else {
        format!("{x:.2}")
    }
}

/// Position and velocity charts. Component 1 only when `n_dims > 1`.
fn plots(traj: &Trajectory, scenario: &Scenario) -> Vec<(&'static str, Option<String>)> {
    let dims = scenario.n_dims;
    let collect = |pick: &dyn Fn(&crate::SystemState) -> &[f64], name: &str| {
        (0..scenario.n_agents)
            .map(|i| {
                let pts = traj.samples.iter().map(|s| (s.t, pick(s)[i * dims])).collect();
                (format!("{name}_{}", i + 1), pts)
            })
            .collect::<Vec<(String, Vec<(f64, f64)>)>>()
    };
    let mut positions = collect(&|s| &s.p, "p");
    let mut velocities = collect(&|s| &s.q, "q");
    if scenario.mode == Mode::Leader {
        positions.push((
            "p_L".into(),
            traj.samples
                .iter()
                .filter_map(|s| s.leader.as_ref().map(|l| (s.t, l.p[0])))
                .collect(),
        ));
        velocities.push((
            "q_L".into(),
            traj.samples
                .iter()
                .filter_map(|s| s.leader.as_ref().map(|l| (s.t, l.q[0])))
                .collect(),
        ));
    }
    vec![
        ("positions.svg", line_chart_svg("Positions", "p", &positions)),
        ("velocities.svg", line_chart_svg("Velocities", "q", &velocities)),
    ]
}

/// Writes `trajectory.csv`, `report.json` and, when `with_plots`, the SVG
/// charts into `out_dir`. Plot problems are returned as warnings.
pub fn write_artifacts(
    out_dir: &Path,
    traj: &Trajectory,
    scenario: &Scenario,
    run: &RunAnalysis,
    with_plots: bool,
) -> io::Result<Vec<String>> {
    fs::create_dir_all(out_dir)?;
    let csv = fs::File::create(out_dir.join("trajectory.csv"))?;
    let mut csv = io::BufWriter::new(csv);
    write_csv(traj, scenario, run, &mut csv)?;
    csv.flush()?;

    let report = serde_json::to_string_pretty(&run.report).map_err(io::Error::other)?;
    fs::write(out_dir.join("report.json"), report + "\n")?;

    let mut warnings = Vec::new();
    if with_plots {
        for (name, svg) in plots(traj, scenario) {
            match svg {
                Some(svg) => {
                    if let Err(e) = fs::write(out_dir.join(name), svg) {
                        warnings.push(format!("could not write {name}: {e}"));
                    }
                }
                None => warnings.push(format!("{name}: no finite data to plot")),
            }
        }
    }
    Ok(warnings)
}
