//! Minimal scatter-plus-curves SVG rendering.

use std::fmt::Write;

use xsdr::benchmark::CurveTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

pub fn render(table: &CurveTable, x_label: &str, y_label: &str) -> String {
    let (x0, x1) = extent(table.reduced.iter().copied());
    let (y0, y1) = extent(
        table
            .response
            .iter()
            .copied()
            .chain(table.curves.iter().flatten().copied()),
    );
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (u, y) in table.reduced.iter().zip(&table.response) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="dimgray" fill-opacity="0.6"/>"#, sx(*u), sy(*y));
    }
    for (t, curve) in table.curves.iter().enumerate() {
        let points: Vec<String> = table
            .reduced
            .iter()
            .zip(curve)
            .map(|(u, f)| format!("{:.2},{:.2}", sx(*u), sy(*f)))
            .collect();
        let color = PALETTE[t % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" fill="{color}">τ = {}</text>"#,
            WIDTH - MARGIN - 70.0,
            MARGIN + 16.0 * (t as f64 + 1.0),
            table.taus[t]
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_one_polyline_per_curve() {
        let table = CurveTable {
            taus: vec![0.2, 0.8],
            index: vec![0, 1, 2],
            reduced: vec![-1.0, 0.0, 1.0],
            response: vec![0.5, 0.1, 0.9],
            curves: vec![vec![0.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
        };
        let svg = render(&table, "b1'x", "y");
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
