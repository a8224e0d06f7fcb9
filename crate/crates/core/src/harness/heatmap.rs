//! Grayscale SVG heatmaps of timing matrices. A lighter pixel is a longer
//! access time.

use std::fmt::Write as _;

use crate::attacks::TimingMatrix;
use crate::error::{Error, Result};

const MARGIN_LEFT: usize = 48;
const MARGIN_TOP: usize = 12;
const MARGIN_RIGHT: usize = 12;
const MARGIN_BOTTOM: usize = 36;
const TARGET_PX: usize = 512;

/// Maps `v` linearly onto 0 (black, `min`) ..= 255 (white, `max`). A flat
/// range maps to mid-gray.
pub fn gray_level(v: f64, min: f64, max: f64) -> u8 {
    let t = if max > min { ((v - min) / (max - min)).clamp(0.0, 1.0) } else { 0.5 };
    (t * 255.0).round() as u8
}

fn cell_px(n: usize) -> usize {
    (TARGET_PX / n).clamp(1, 32)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `m` with `meta` recorded in the SVG description.
pub fn render_matrix(m: &TimingMatrix, meta: &[(String, String)]) -> Result<String> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows == 0 || cols == 0 {
        return Err(Error::Csv("matrix is empty".into()));
    }
    if m.cells.iter().any(|r| r.len() != cols) {
        return Err(Error::Csv("matrix is ragged".into()));
    }
    let (cw, ch) = (cell_px(cols), cell_px(rows));
    let (gw, gh) = (cw * cols, ch * rows);
    let width = MARGIN_LEFT + gw + MARGIN_RIGHT;
    let height = MARGIN_TOP + gh + MARGIN_BOTTOM;
    let (min, max) = (m.min(), m.max());

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">"
    );
    let desc: Vec<String> = meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(s, "<desc>{}</desc>", escape(&desc.join("; ")));
    let _ = writeln!(s, "<g shape-rendering=\"crispEdges\">");
    for (r, row) in m.cells.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let g = gray_level(v, min, max);
            let _ = writeln!(
                s,
                "<rect x=\"{}\" y=\"{}\" width=\"{cw}\" height=\"{ch}\" fill=\"#{g:02x}{g:02x}{g:02x}\"/>",
                MARGIN_LEFT + c * cw,
                MARGIN_TOP + r * ch
            );
        }
    }
    s.push_str("</g>\n");

    let text = |s: &mut String, x: usize, y: usize, anchor: &str, body: &str| {
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{y}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"{anchor}\">{}</text>",
            escape(body)
        );
    };
    let below = MARGIN_TOP + gh + 12;
    text(&mut s, MARGIN_LEFT, below, "start", "0");
    text(&mut s, MARGIN_LEFT + gw, below, "end", &(cols - 1).to_string());
    text(&mut s, MARGIN_LEFT + gw / 2, below + 14, "middle", &m.col_label);
    text(&mut s, MARGIN_LEFT - 4, MARGIN_TOP + 10, "end", "0");
    text(&mut s, MARGIN_LEFT - 4, MARGIN_TOP + gh, "end", &(rows - 1).to_string());
    let (lx, ly) = (14, MARGIN_TOP + gh / 2);
    let _ = writeln!(
        s,
        "<text x=\"{lx}\" y=\"{ly}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\" transform=\"rotate(-90 {lx} {ly})\">{}</text>",
        escape(&m.row_label)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

/// `# key=value` comment lines of a matrix CSV.
pub fn csv_meta(csv: &str) -> Vec<(String, String)> {
    csv.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim().split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Renders a matrix CSV as written by [`TimingMatrix::to_csv`].
pub fn render_heatmap(csv: &str) -> Result<String> {
    render_matrix(&TimingMatrix::from_csv(csv)?, &csv_meta(csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fills(svg: &str) -> Vec<&str> {
        svg.lines()
            .filter(|l| l.starts_with("<rect"))
            .map(|l| l.split("fill=\"").nth(1).unwrap().trim_end_matches("\"/>"))
            .collect()
    }

    #[test]
    fn one_dark_cell() {
        let m = TimingMatrix::new("r", "c", vec![vec![2.0, 164.0], vec![164.0, 164.0]]);
        let svg = render_heatmap(&m.to_csv(&[])).unwrap();
        let f = fills(&svg);
        assert_eq!(f.len(), 4);
        assert_eq!(f.iter().filter(|c| **c == "#000000").count(), 1);
        assert_eq!(f.iter().filter(|c| **c == "#ffffff").count(), 3);
    }

    #[test]
    fn constant_is_mid_gray() {
        let m = TimingMatrix::new("r", "c", vec![vec![7.0; 3]; 2]);
        let svg = render_heatmap(&m.to_csv(&[])).unwrap();
        assert!(fills(&svg).iter().all(|c| *c == "#808080"));
    }

    #[test]
    fn ragged_is_rejected() {
        assert!(render_heatmap("r,c0,c1\n0,1,2\n1,3\n").is_err());
    }

    #[test]
    fn labels_and_meta_present() {
        let m = TimingMatrix::new("input", "set", vec![vec![1.0, 2.0]]);
        let svg = render_heatmap(&m.to_csv(&[("seed", "7".into())])).unwrap();
        assert!(svg.contains(">input</text>"));
        assert!(svg.contains(">set</text>"));
        assert!(svg.contains("<desc>seed=7</desc>"));
    }

    #[test]
    fn deterministic() {
        let m = TimingMatrix::new("r", "c", vec![vec![1.0, 5.5, 3.25]; 4]);
        let csv = m.to_csv(&[("k", "v".into())]);
        assert_eq!(render_heatmap(&csv).unwrap(), render_heatmap(&csv).unwrap());
    }

    #[test]
    fn gray_is_linear() {
        assert_eq!(gray_level(0.0, 0.0, 10.0), 0);
        assert_eq!(gray_level(10.0, 0.0, 10.0), 255);
        assert_eq!(gray_level(5.0, 0.0, 10.0), 128);
    }
}
