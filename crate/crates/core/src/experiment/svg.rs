use std::fmt::Write;

use super::sweep::{CellStatus, SweepReport};

const W: f64 = 520.0;
const H: f64 = 520.0;
const PAD: f64 = 60.0;

fn px(alpha: f64) -> f64 {
    PAD + alpha * (W - 2.0 * PAD)
}

// beta grows upward
fn py(beta: f64) -> f64 {
    H - PAD - beta * (H - 2.0 * PAD)
}

fn polygon(out: &mut String, pts: &[(f64, f64)], fill: &str, label: &str) {
    let coords: Vec<String> = pts.iter().map(|&(a, b)| format!("{:.2},{:.2}", px(a), py(b))).collect();
    writeln!(out, r#"  <polygon points="{}" fill="{fill}" stroke="none"><title>{label}</title></polygon>"#, coords.join(" ")).unwrap();
}

/// Phase diagram in the `(alpha, beta)` square.
///
/// The three regions are bounded by `beta = beta_sharp(alpha)` and
/// `beta = beta_star(alpha)`, which are piecewise linear with corners at
/// `(1/2, 0)` and `(2/3, 1/3)`. Each swept `(alpha, beta)` point gets one
/// marker for the best test at the largest `p`, with radius growing in its
/// error; budget-skipped and all-skipped points are drawn hollow.
pub fn phase_diagram(report: &SweepReport) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"  <rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).unwrap();
    polygon(&mut s, &[(0.0, 0.0), (2.0 / 3.0, 1.0 / 3.0), (1.0, 1.0), (0.0, 1.0)], "#e8e8e8", "statistically impossible");
    polygon(&mut s, &[(0.0, 0.0), (0.5, 0.0), (1.0, 1.0), (2.0 / 3.0, 1.0 / 3.0)], "#f6c9a8", "hard under planted clique");
    polygon(&mut s, &[(0.5, 0.0), (1.0, 0.0), (1.0, 1.0)], "#b9dcb0", "polynomial-time easy");

    let (x0, x1, y0, y1) = (px(0.0), px(1.0), py(0.0), py(1.0));
    writeln!(s, r#"  <rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1).unwrap();
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        writeln!(s, r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, px(v), y0 + 18.0).unwrap();
        writeln!(s, r#"  <text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#, x0 - 6.0, py(v) + 4.0).unwrap();
    }
    writeln!(s, r#"  <text x="{:.2}" y="{:.2}" text-anchor="middle">alpha (k = p^alpha)</text>"#, px(0.5), H - 16.0).unwrap();
    writeln!(s, r#"  <text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">beta (lambda = p^-beta)</text>"#, py(0.5), py(0.5)).unwrap();

    let pmax = report.cells.iter().map(|c| c.p).max().unwrap_or(0);
    let mut points: Vec<(f64, f64)> = report.cells.iter().map(|c| (c.alpha, c.beta)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points.dedup();
    for (a, b) in points {
        let best = report
            .cells
            .iter()
            .filter(|c| c.alpha == a && c.beta == b && c.p == pmax && c.status == CellStatus::Ok)
            .filter_map(|c| c.error.map(|e| (e, c.test)))
            .min_by(|x, y| x.0.total_cmp(&y.0));
        let (cx, cy) = (px(a), py(b));
        match best {
            Some((err, test)) => {
                let r = 3.0 + 9.0 * err.clamp(0.0, 2.0) / 2.0;
                writeln!(
                    s,
                    r#"  <circle cx="{cx:.2}" cy="{cy:.2}" r="{r:.2}" fill="black" fill-opacity="0.75"><title>alpha={a} beta={b} p={pmax} best={test} error={err:.4}</title></circle>"#
                )
                .unwrap();
            }
            None => {
                writeln!(s, r#"  <circle cx="{cx:.2}" cy="{cy:.2}" r="6.00" fill="none" stroke="black"><title>alpha={a} beta={b} skipped</title></circle>"#).unwrap();
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
