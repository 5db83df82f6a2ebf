//! CSV tables, figure data and plain SVG charts for a sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{PolicyResult, SweepResult};
use crate::control::PolicyKind;
use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn pdr_percent(p: &PolicyResult) -> i64 {
    p.pdr().map_or(0, |v| (v * 100.0).round() as i64)
}

fn table2(result: &SweepResult) -> String {
    let mut out = String::from("dr,sent,received,lost,pdr_percent\n");
    for p in &result.policies {
        if let PolicyKind::Fixed(dr) = p.kind {
            let _ = writeln!(out, "{dr},{},{},{},{}", p.sent(), p.received(), p.lost(), pdr_percent(p));
        }
    }
    out
}

fn table3(result: &SweepResult) -> String {
    let mut out = String::from("approach,sent,pdr_percent\n");
    for p in &result.policies {
        let _ = writeln!(out, "{},{},{}", p.kind.label(), p.sent(), pdr_percent(p));
    }
    out
}

fn summary(result: &SweepResult) -> String {
    let mut out = String::from("policy,sent,received,lost,pdr,connected_sensor_rounds\n");
    for p in &result.policies {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            p.kind,
            p.sent(),
            p.received(),
            p.lost(),
            p.pdr().unwrap_or(0.0),
            p.connected_sensor_rounds()
        );
    }
    out
}

fn per_round(result: &SweepResult) -> String {
    let mut out = String::from("policy,round,rain_mm_h,sensor_id,sent,received,final_dr\n");
    for p in &result.policies {
        for (i, r) in p.rounds.iter().enumerate() {
            for s in &r.sensors {
                let _ = writeln!(
                    out,
                    "{},{i},{},{},{},{},{}",
                    p.kind, r.rain_mm_h, s.sensor_id, s.sent, s.received, s.final_dr
                );
            }
        }
    }
    out
}

fn figure(result: &SweepResult) -> String {
    let mut out = String::from("rain_mm_h");
    for p in &result.policies {
        let _ = write!(out, ",{}", p.kind.label());
    }
    out.push('\n');
    for (i, rain) in result.grid.rains.iter().enumerate() {
        let _ = write!(out, "{rain}");
        for p in &result.policies {
            let _ = write!(out, ",{}", p.rounds[i].received());
        }
        out.push('\n');
    }
    out
}

fn comparison(result: &SweepResult) -> String {
    let mut out = String::new();
    for h in result.header_lines() {
        let _ = writeln!(out, "# {h}");
    }
    let describe = |p: &PolicyResult| {
        format!(
            "{}: delivered {} sent {} PDR {:.2}%",
            p.kind.label(),
            p.received(),
            p.sent(),
            p.pdr().unwrap_or(0.0) * 100.0
        )
    };
    let fixed = result.best_fixed();
    let adaptive = result.best_adaptive();
    if let Some(f) = fixed {
        let _ = writeln!(out, "best fixed    {}", describe(f));
    }
    if let Some(a) = adaptive {
        let _ = writeln!(out, "best adaptive {}", describe(a));
    }
    if let (Some(f), Some(a)) = (fixed, adaptive) {
        let rel = |a: u64, f: u64| if f == 0 { 0.0 } else { (a as f64 / f as f64 - 1.0) * 100.0 };
        let _ = writeln!(out, "delivered change: {:+.2}%", rel(a.received(), f.received()));
        let _ = writeln!(out, "sent change:      {:+.2}%", rel(a.sent(), f.sent()));
    }
    out
}

fn axis_max(v: u64) -> u64 {
    // round up to a "nice" number for tick labels
    let v = v.max(1);
    let mag = 10u64.pow((v as f64).log10().floor() as u32);
    v.div_ceil(mag) * mag
}

/// Received packets per round for each policy.
pub fn render_line_svg(result: &SweepResult) -> String {
    let (w, h, left, right, top, bottom) = (820.0, 440.0, 70.0, 180.0, 30.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let rains = &result.grid.rains;
    let xmin = rains.first().copied().unwrap_or(0.0);
    let xmax = rains.last().copied().unwrap_or(1.0).max(xmin + 1.0);
    let ymax = axis_max(result.policies.iter().flat_map(|p| p.rounds.iter().map(|r| r.received())).max().unwrap_or(1));
    let x = |r: f64| left + (r - xmin) / (xmax - xmin) * pw;
    let y = |v: u64| top + ph - v as f64 / ymax as f64 * ph;

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + ph,
        left + pw,
        top + ph
    );
    let _ = writeln!(s, "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>", top + ph);
    for i in 0..=5 {
        let v = ymax * i / 5;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v}</text>", left - 6.0, y(v) + 4.0);
        let rv = xmin + (xmax - xmin) * i as f64 / 5.0;
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{rv}</text>", x(rv), top + ph + 16.0);
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">rain (mm/h)</text>",
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(s, "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">received packets per round</text>", top + ph / 2.0, top + ph / 2.0);
    for (i, p) in result.policies.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = rains
            .iter()
            .zip(&p.rounds)
            .map(|(r, st)| format!("{:.1},{:.1}", x(*r), y(st.received())))
            .collect();
        let dash = if p.kind.is_adaptive() { " stroke-dasharray=\"5,3\"" } else { "" };
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = top + 14.0 * i as f64 + 6.0;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{colour}\" stroke-width=\"2\"{dash}/>",
            lx + 18.0
        );
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{}</text>", lx + 24.0, ly + 4.0, p.kind.label());
    }
    s.push_str("</svg>\n");
    s
}

/// Sent and received totals side by side for each policy.
pub fn render_bar_svg(result: &SweepResult) -> String {
    let n = result.policies.len().max(1) as f64;
    let (left, top, bottom, group) = (70.0, 30.0, 70.0, 70.0);
    let (pw, ph) = (group * n, 300.0);
    let (w, h) = (left + pw + 140.0, top + ph + bottom);
    let ymax = axis_max(result.policies.iter().map(|p| p.sent()).max().unwrap_or(1));
    let bar_h = |v: u64| v as f64 / ymax as f64 * ph;

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        top + ph,
        left + pw,
        top + ph
    );
    for i in 0..=5 {
        let v = ymax * i / 5;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{v}</text>",
            left - 6.0,
            top + ph - bar_h(v) + 4.0
        );
    }
    for (i, p) in result.policies.iter().enumerate() {
        let gx = left + group * i as f64 + 10.0;
        for (j, (v, colour)) in [(p.sent(), PALETTE[0]), (p.received(), PALETTE[1])].into_iter().enumerate() {
            let bh = bar_h(v);
            let _ = writeln!(
                s,
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"24\" height=\"{bh:.1}\" fill=\"{colour}\"/>",
                gx + 25.0 * j as f64,
                top + ph - bh
            );
        }
        let cx = gx + 25.0;
        let cy = top + ph + 12.0;
        let _ = writeln!(
            s,
            "<text x=\"{cx:.1}\" y=\"{cy:.1}\" transform=\"rotate(30 {cx:.1} {cy:.1})\">{}</text>",
            p.kind.label()
        );
    }
    let lx = left + pw + 16.0;
    for (j, (name, colour)) in [("sent", PALETTE[0]), ("received", PALETTE[1])].into_iter().enumerate() {
        let ly = top + 16.0 * j as f64;
        let _ = writeln!(s, "<rect x=\"{lx}\" y=\"{ly}\" width=\"12\" height=\"12\" fill=\"{colour}\"/>");
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\">{name}</text>", lx + 18.0, ly + 10.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Writes all report files into `dir` and returns their paths.
pub fn emit_reports(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.policies.is_empty() {
        return Err(Error::invalid("sweep result has no policies to report"));
    }
    if let Some(p) = result.policies.iter().find(|p| p.rounds.len() != result.grid.rains.len()) {
        return Err(Error::invalid(format!(
            "{} has {} rounds for a {}-round grid",
            p.kind,
            p.rounds.len(),
            result.grid.rains.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("table2.csv", table2(result)),
        ("table3.csv", table3(result)),
        ("summary.csv", summary(result)),
        ("per_round.csv", per_round(result)),
        ("figure_delivered_per_round.csv", figure(result)),
        ("comparison.txt", comparison(result)),
        ("delivered_per_round.svg", render_line_svg(result)),
        ("totals.svg", render_bar_svg(result)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
