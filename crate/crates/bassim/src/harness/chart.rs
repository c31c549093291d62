//! Static SVG log-log chart of median MSE against the bit-adjusted sample
//! size, with the predicted power-law slope overlaid.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChartError {
    #[error("line {line}: {problem}")]
    Parse { line: usize, problem: String },
    #[error("need at least 2 summary points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy)]
struct SummaryPoint {
    nbass: f64,
    median_mse: f64,
    r: f64,
}

/// Parse the sweep summary CSV (header `model,r,n,m,B,...`), keeping the
/// columns the chart needs.
fn parse_summary(csv: &str) -> Result<Vec<SummaryPoint>, ChartError> {
    let mut lines = csv.lines().enumerate();
    let (_, header) = lines.next().ok_or(ChartError::Parse {
        line: 1,
        problem: "empty input".to_string(),
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| ChartError::Parse {
                line: 1,
                problem: format!("missing column `{name}`"),
            })
    };
    let col_r = find("r")?;
    let col_nbass = find("nbass")?;
    let col_mse = find("median_mse_tail")?;

    let mut points = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let number = |col: usize, name: &str| -> Result<f64, ChartError> {
            fields
                .get(col)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ChartError::Parse {
                    line: idx + 1,
                    problem: format!("bad `{name}` field"),
                })
        };
        points.push(SummaryPoint {
            nbass: number(col_nbass, "nbass")?,
            median_mse: number(col_mse, "median_mse_tail")?,
            r: number(col_r, "r")?,
        });
    }
    Ok(points)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Render the summary CSV as a log-log scatter SVG with the reference line
/// `mse ~ nbass^{-2r/(1+2r)}` anchored at the geometric center of the data.
pub fn emit_chart(summary_csv: &str) -> Result<String, ChartError> {
    let points = parse_summary(summary_csv)?;
    if points.len() < 2 {
        return Err(ChartError::TooFewPoints(points.len()));
    }

    let xs: Vec<f64> = points.iter().map(|p| p.nbass.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_mse.log10()).collect();
    let pad = 0.08;
    let (x_lo, x_hi) = span(&xs, pad);
    let (y_lo, y_hi) = span(&ys, pad);

    let to_px = |x: f64, y: f64| {
        let px = MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();

    // Axes.
    let (ax0, ay0) = (MARGIN, HEIGHT - MARGIN);
    writeln!(
        svg,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{}" y2="{ay0}" stroke="black"/>"#,
        WIDTH - MARGIN
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{ax0}" y1="{ay0}" x2="{ax0}" y2="{MARGIN}" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">log10 bit-adjusted sample size</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">log10 median MSE</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();

    // Decade ticks.
    for decade in x_lo.ceil() as i64..=x_hi.floor() as i64 {
        let (px, _) = to_px(decade as f64, y_lo);
        writeln!(
            svg,
            r#"<line x1="{px}" y1="{ay0}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle" font-size="11">1e{decade}</text>"#,
            ay0 + 5.0,
            ay0 + 18.0
        )
        .unwrap();
    }
    for decade in y_lo.ceil() as i64..=y_hi.floor() as i64 {
        let (_, py) = to_px(x_lo, decade as f64);
        writeln!(
            svg,
            r#"<line x1="{}" y1="{py}" x2="{ax0}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end" font-size="11">1e{decade}</text>"#,
            ax0 - 5.0,
            ax0 - 8.0,
            py + 4.0
        )
        .unwrap();
    }

    // Reference line with the predicted exponent -2r/(1+2r), through the
    // geometric center of the data.
    let r = points[0].r;
    let slope = -2.0 * r / (1.0 + 2.0 * r);
    let cx = xs.iter().sum::<f64>() / xs.len() as f64;
    let cy = ys.iter().sum::<f64>() / ys.len() as f64;
    let (lx0, ly0) = to_px(x_lo, cy + slope * (x_lo - cx));
    let (lx1, ly1) = to_px(x_hi, cy + slope * (x_hi - cx));
    writeln!(
        svg,
        r#"<line x1="{lx0}" y1="{ly0}" x2="{lx1}" y2="{ly1}" stroke="steelblue" stroke-dasharray="6 3" class="reference"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{MARGIN}" text-anchor="end" font-size="12" fill="steelblue">slope {slope:.4}</text>"#,
        WIDTH - MARGIN
    )
    .unwrap();

    // Data markers.
    for (p, (&x, &y)) in points.iter().zip(xs.iter().zip(&ys)) {
        let (px, py) = to_px(x, y);
        writeln!(
            svg,
            r#"<circle cx="{px}" cy="{py}" r="4" fill="firebrick" class="point" data-nbass="{}" data-mse="{}"/>"#,
            p.nbass, p.median_mse
        )
        .unwrap();
    }

    writeln!(svg, "</svg>").unwrap();
    Ok(svg)
}

fn span(values: &[f64], pad: f64) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let extent = (hi - lo).max(1e-9);
    (lo - pad * extent, hi + pad * extent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(rows: &[(f64, f64)]) -> String {
        let mut text = String::from(crate::harness::SUMMARY_CSV_HEADER);
        text.push('\n');
        for (nbass, mse) in rows {
            text.push_str(&format!(
                "gaussian,0.5,256,16,20,4,6,{nbass},intermediate,0.001,200,{mse},{mse}\n"
            ));
        }
        text
    }

    #[test]
    fn two_point_summary_renders_markers_and_reference() {
        let svg = emit_chart(&summary(&[(1e5, 1e-2), (1e6, 3e-3)])).unwrap();
        assert_eq!(svg.matches("class=\"point\"").count(), 2);
        assert_eq!(svg.matches("class=\"reference\"").count(), 1);
    }

    #[test]
    fn empty_and_malformed_inputs_error() {
        assert!(matches!(
            emit_chart(crate::harness::SUMMARY_CSV_HEADER),
            Err(ChartError::TooFewPoints(0))
        ));
        let bad = format!("{}\ngaussian,x,y,z\n", crate::harness::SUMMARY_CSV_HEADER);
        match emit_chart(&bad) {
            Err(ChartError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn marker_abscissas_are_logarithmic() {
        // Equal nbass ratios must give equally spaced cx values.
        let svg = emit_chart(&summary(&[(1e4, 1e-2), (1e5, 5e-3), (1e6, 2e-3)])).unwrap();
        let cxs: Vec<f64> = svg
            .lines()
            .filter(|l| l.contains("class=\"point\""))
            .map(|l| {
                let start = l.find("cx=\"").unwrap() + 4;
                let end = l[start..].find('"').unwrap() + start;
                l[start..end].parse().unwrap()
            })
            .collect();
        assert_eq!(cxs.len(), 3);
        let step1 = cxs[1] - cxs[0];
        let step2 = cxs[2] - cxs[1];
        assert!((step1 - step2).abs() <= 1e-6 * step1.abs());
    }
}
