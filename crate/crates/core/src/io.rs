//! CSV export helpers for matrices and vectors.

use std::io::{self, Write};

use ndarray::Array2;

use crate::Scalar;

/// Writes `m` with a header row `{prefix}0,{prefix}1,...` and comma separators.
pub fn write_matrix_csv<F: Scalar, W: Write>(mut out: W, m: &Array2<F>, prefix: &str) -> io::Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()
}
