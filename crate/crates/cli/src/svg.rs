//! Minimal scatter plot of (P, Q) sweep samples.

use std::fmt::Write;

use mcopf::analysis::SweepReport;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// One circle per optimal sample and one closed polyline per formulation.
pub fn scatter(reports: &[SweepReport]) -> String {
    let pts: Vec<(f64, f64)> = reports.iter().flat_map(|r| r.pq()).collect();
    let (mut p0, mut p1, mut q0, mut q1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |(a, b, c, d), &(p, q)| {
            (a.min(p), b.max(p), c.min(q), d.max(q))
        });
    if pts.is_empty() {
        (p0, p1, q0, q1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-3);
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (p0, p1) = pad(p0, p1);
    let (q0, q1) = pad(q0, q1);
    let sx = |p: f64| MARGIN + (p - p0) / (p1 - p0) * (WIDTH - 2.0 * MARGIN);
    let sy = |q: f64| HEIGHT - MARGIN - (q - q0) / (q1 - q0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="16">P (pu)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" font-size="16" transform="rotate(-90 20 {})">Q (pu)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (v, x) in [(p0, left), (p1, right)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle" font-size="12">{v:.4}</text>"#, bottom + 18.0);
    }
    for (v, y) in [(q0, bottom), (q1, top)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end" font-size="12">{v:.4}</text>"#, left - 6.0);
    }

    for (k, report) in reports.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pq = report.pq();
        let mut path: Vec<String> = pq.iter().map(|&(p, q)| format!("{:.2},{:.2}", sx(p), sy(q))).collect();
        if let Some(first) = path.first().cloned() {
            path.push(first);
        }
        let _ = writeln!(
            s,
            r#"<polyline class="set" data-kind="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            report.kind,
            path.join(" ")
        );
        for &(p, q) in &pq {
            let _ = writeln!(
                s,
                r#"<circle class="marker" data-kind="{}" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                report.kind,
                sx(p),
                sy(q)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="14" fill="{color}">{}</text>"#,
            right - 60.0,
            top + 18.0 * k as f64,
            report.kind
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use mcopf::analysis::SweepRecord;
    use mcopf::solvers::SolveStatus;
    use mcopf::FormulationKind;

    #[test]
    fn one_marker_per_optimal_sample() {
        let record = |p: f64, status| SweepRecord { theta: 0.0, status, p, q: p * 0.5, point: vec![] };
        let report = SweepReport {
            kind: FormulationKind::Swr1,
            samples: 3,
            records: vec![
                record(1.0, SolveStatus::Optimal),
                record(2.0, SolveStatus::Optimal),
                record(3.0, SolveStatus::MaxIterations),
            ],
        };
        let svg = scatter(&[report]);
        assert_eq!(svg.matches("class=\"marker\"").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
        assert!(svg.contains("P (pu)") && svg.contains("Q (pu)"));
    }
}
