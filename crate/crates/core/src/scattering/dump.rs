use std::io::Write;

use super::ScatteringMatrix;

/// Writes a debug dump: header `path_order,scales,frame_0..frame_{F-1}`, one
/// row per path, 9 significant digits. Scales are `;`-separated.
pub fn write_matrix_csv<W: Write>(matrix: &ScatteringMatrix, mut out: W) -> std::io::Result<()> {
    write!(out, "path_order,scales")?;
    for t in 0..matrix.n_frames() {
        write!(out, ",frame_{t}")?;
    }
    writeln!(out)?;
    for (path, row) in matrix.paths().iter().zip(matrix.values().rows()) {
        write!(out, "{},{}", path.order, path)?;
        for v in row {
            write!(out, ",{v:.8e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
