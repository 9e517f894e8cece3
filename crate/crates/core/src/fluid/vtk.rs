//! Legacy VTK snapshots (ASCII, `STRUCTURED_POINTS`).
//!
//! Layout of each file:
//!
//! ```text
//! # vtk DataFile Version 3.0
//! swimlab t=<time>
//! ASCII
//! DATASET STRUCTURED_POINTS
//! DIMENSIONS nx ny nz
//! ORIGIN hx/2 hy/2 hz/2
//! SPACING hx hy hz
//! POINT_DATA nx*ny*nz
//! VECTORS velocity double
//! SCALARS pressure double 1
//! LOOKUP_TABLE default
//! VECTORS force double
//! ```
//!
//! Points are the cell centres, x fastest. Velocity is face-averaged to the
//! centres; pressure and force density are already cell-centred.

use std::io::{self, Write};

use super::{FluidState, ForceDensityField, GridSpec};

pub fn write_snapshot<W: Write>(
    out: &mut W,
    grid: &GridSpec,
    state: &FluidState,
    force: Option<&ForceDensityField>,
) -> io::Result<()> {
    let [nx, ny, nz] = grid.cells;
    let h = grid.spacing();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "swimlab t={:.16e}", state.t)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {nx} {ny} {nz}")?;
    writeln!(out, "ORIGIN {:e} {:e} {:e}", h.x / 2.0, h.y / 2.0, h.z / 2.0)?;
    writeln!(out, "SPACING {:e} {:e} {:e}", h.x, h.y, h.z)?;
    writeln!(out, "POINT_DATA {}", nx * ny * nz)?;
    let order = || (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..nx).map(move |i| [i, j, k])));

    writeln!(out, "VECTORS velocity double")?;
    for idx in order() {
        let v = state.u.cell_value(idx);
        writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
    }
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for idx in order() {
        writeln!(out, "{:e}", state.p[idx])?;
    }
    if let Some(f) = force {
        writeln!(out, "VECTORS force double")?;
        for idx in order() {
            let v = f.value(idx);
            writeln!(out, "{:e} {:e} {:e}", v.x, v.y, v.z)?;
        }
    }
    Ok(())
}
