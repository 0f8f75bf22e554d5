use std::fmt::Write;

use cordscan::classify::{combo_label, Cell};

const W: f64 = 760.0;
const H: f64 = 480.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

struct Series {
    label: String,
    /// (thr, mean, std)
    points: Vec<(f64, f64, f64)>,
}

fn series(cells: &[Cell]) -> Vec<Series> {
    let mut out: Vec<Series> = Vec::new();
    for c in cells {
        let Ok(r) = &c.result else { continue };
        let label = combo_label(&c.combo);
        let idx = match out.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                out.push(Series { label, points: Vec::new() });
                out.len() - 1
            }
        };
        out[idx].points.push((c.thr, r.auc_mean, r.auc_std));
    }
    for s in &mut out {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// AUC against lesion-fraction threshold, one line per combination with a
/// shaded band of ±1 standard deviation.
pub fn auc_plot(cells: &[Cell]) -> String {
    let series = series(cells);
    let thr: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    let (mut x0, mut x1) = thr.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.01;
        x1 += 0.01;
    }
    let lo = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1 - p.2))
        .fold(1.0f64, f64::min);
    let (y0, y1) = (((lo * 10.0).floor() / 10.0).clamp(0.0, 0.9), 1.0);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y.clamp(y0, y1) - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let mut ticks: Vec<f64> = thr.clone();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for t in ticks {
        let px = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="#333"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            (t * 1e6).round() / 1e6
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">lesion volume threshold</text>"#,
        LEFT + pw / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">ROC AUC</text>"#,
        TOP + ph / 2.0
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let upper = ser.points.iter().map(|&(t, m, sd)| format!("{:.1},{:.1}", sx(t), sy(m + sd)));
        let lower = ser.points.iter().rev().map(|&(t, m, sd)| format!("{:.1},{:.1}", sx(t), sy(m - sd)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = ser.points.iter().map(|&(t, m, _)| format!("{:.1},{:.1}", sx(t), sy(m))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use cordscan::classify::RocSummary;
    use cordscan::Metric;

    fn cell(combo: Vec<Metric>, thr: f64, auc: f64) -> Cell {
        Cell {
            result: Ok(RocSummary {
                thr,
                combo: combo.clone(),
                auc_mean: auc,
                auc_std: 0.05,
                n_splits: 10,
                n_pos: 5,
                n_neg: 5,
                n_pos_test: 2,
                n_neg_test: 2,
            }),
            combo,
            thr,
        }
    }

    #[test]
    fn one_curve_per_combination() {
        let cells = vec![
            cell(vec![Metric::Fa], 0.04, 0.7),
            cell(vec![Metric::Fa, Metric::Md], 0.04, 0.8),
            cell(vec![Metric::Fa], 0.02, 0.65),
            cell(vec![Metric::Fa, Metric::Md], 0.02, 0.75),
        ];
        let svg = auc_plot(&cells);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.contains(">FA+MD</text>"));
    }

    #[test]
    fn failed_cells_are_skipped() {
        let cells = vec![Cell {
            combo: vec![Metric::Fa],
            thr: 0.1,
            result: Err(cordscan::classify::ClassifyError::SingularCovariance),
        }];
        let svg = auc_plot(&cells);
        assert_eq!(svg.matches("<polyline").count(), 0);
    }
}
