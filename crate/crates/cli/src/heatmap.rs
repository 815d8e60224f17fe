//! Plain-text renderings of attention matrices: CSV and ASCII graymap.

use std::fmt::Write as _;

use amn_srl::tensor::Tensor;

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Matrix with a header row of column tokens and a leading column of row
/// tokens.
pub fn to_csv(weights: &Tensor, rows: &[String], cols: &[String]) -> String {
    let mut out = String::from("token");
    for c in cols {
        out.push(',');
        out.push_str(&csv_field(c));
    }
    out.push('\n');
    for (i, row) in weights.rows().into_iter().enumerate() {
        out.push_str(&csv_field(rows.get(i).map_or("", String::as_str)));
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// P2 graymap: one `cell × cell` block per entry, brightness proportional to
/// the weight clamped to `[0, 1]`.
pub fn to_pgm(weights: &Tensor, cell: usize) -> String {
    let cell = cell.max(1);
    let (h, w) = weights.dim();
    let mut out = format!("P2\n# attention weights {h}x{w}\n{} {}\n255\n", w * cell, h * cell);
    for row in weights.rows() {
        let line: Vec<String> = row
            .iter()
            .flat_map(|&v| {
                let level = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
                std::iter::repeat_n(level.to_string(), cell)
            })
            .collect();
        let line = line.join(" ");
        for _ in 0..cell {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}
