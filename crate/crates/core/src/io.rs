//! File outputs: diagnostics CSV, eigen/Korn reports, legacy-VTK ASCII
//! structured-grid snapshots, geometry dumps, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dynamics::Diagnostics;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::ChartGeometry;
use crate::stokes::EigenResult;

/// Create the run directory; refuse to reuse an existing one unless forced.
pub fn prepare_run_dir(out: &Path, force: bool) -> Result<PathBuf> {
    if out.exists() {
        if !force {
            return Err(Error::Config(format!(
                "output directory {} exists (use --force to overwrite)",
                out.display()
            )));
        }
    } else {
        fs::create_dir_all(out)?;
    }
    Ok(out.to_path_buf())
}

/// Manifest written before compute starts.
pub fn write_manifest(dir: &Path, config_text: &str, command: &str, seed: u64) -> Result<()> {
    let sha = {
        let mut h = Sha256::new();
        h.update(config_text.as_bytes());
        hex_string(&h.finalize())
    };
    let manifest = serde_json::json!({
        "tool": "surfns",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": sha,
        "seed": seed,
    });
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap())?;
    fs::write(dir.join("config.toml"), config_text)?;
    Ok(())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

/// Diagnostics CSV: t, energy, dissipation, boundary_dissipation,
/// div_residual, killing_0..k, dist_to_equilibrium.
pub fn write_diagnostics_csv(path: &Path, diag: &Diagnostics) -> Result<()> {
    let mut s = String::new();
    s.push('t');
    s.push_str(",energy,dissipation,boundary_dissipation,div_residual");
    for i in 0..diag.killing_dim {
        write!(s, ",killing_{i}").unwrap();
    }
    s.push_str(",dist_to_equilibrium\n");
    for smp in &diag.samples {
        write!(
            s,
            "{},{},{},{},{}",
            smp.t, smp.energy, smp.dissipation, smp.boundary_dissipation, smp.div_residual
        )
        .unwrap();
        for c in &smp.killing {
            write!(s, ",{c}").unwrap();
        }
        writeln!(s, ",{}", smp.dist_to_equilibrium).unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// Eigen report CSV: index, eigenvalue, residual.
pub fn write_eigen_csv(path: &Path, res: &EigenResult) -> Result<()> {
    let mut s = String::from("index,eigenvalue,residual\n");
    for (i, (v, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
        writeln!(s, "{i},{v},{r}").unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// Korn report CSV: resolution, constant.
pub fn write_korn_csv(path: &Path, rows: &[(usize, f64)]) -> Result<()> {
    let mut s = String::from("resolution,constant\n");
    for (n, c) in rows {
        writeln!(s, "{n},{c}").unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}

/// Geometry dump CSV: metric, Christoffels and Ricci per node.
pub fn write_geometry_csv(path: &Path, geom: &ChartGeometry) -> Result<()> {
    let grid = &geom.grid;
    let mut s = String::from(
        "i,j,x,y,g11,g12,g22,sqrt_g,gamma1_11,gamma1_12,gamma1_22,gamma2_11,gamma2_12,gamma2_22,ric11,ric12,ric22\n",
    );
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            writeln!(
                s,
                "{i},{j},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                grid.x(i),
                grid.y(j),
                geom.g11[[i, j]],
                geom.g12[[i, j]],
                geom.g22[[i, j]],
                geom.sqrt_g[[i, j]],
                geom.gamma[0][0][[i, j]],
                geom.gamma[0][1][[i, j]],
                geom.gamma[0][2][[i, j]],
                geom.gamma[1][0][[i, j]],
                geom.gamma[1][1][[i, j]],
                geom.gamma[1][2][[i, j]],
                geom.ric11[[i, j]],
                geom.ric12[[i, j]],
                geom.ric22[[i, j]]
            )
            .unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Vector field CSV: i, j, u1, u2 (chart components).
pub fn write_field_csv(path: &Path, u: &VectorField) -> Result<()> {
    let grid = &u.geom.grid;
    let mut s = String::from("i,j,u1,u2\n");
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            writeln!(s, "{i},{j},{},{}", u.u1[[i, j]], u.u2[[i, j]]).unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Read a field written by `write_field_csv` onto the given geometry.
pub fn read_field_csv(path: &Path, geom: &std::sync::Arc<ChartGeometry>) -> Result<VectorField> {
    let text = fs::read_to_string(path)?;
    let grid = &geom.grid;
    let mut u = VectorField::zeros(geom);
    let mut seen = 0usize;
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 {
            if line.trim() != "i,j,u1,u2" {
                return Err(Error::Config(format!(
                    "field file {}: expected header 'i,j,u1,u2'",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Config(format!(
                "field file {} line {}: expected 4 columns",
                path.display(),
                ln + 1
            )));
        }
        let i: usize = parts[0].trim().parse().map_err(|_| {
            Error::Config(format!("field file line {}: bad index", ln + 1))
        })?;
        let j: usize = parts[1].trim().parse().map_err(|_| {
            Error::Config(format!("field file line {}: bad index", ln + 1))
        })?;
        if i >= grid.n1 || j >= grid.n2 {
            return Err(Error::ShapeMismatch(format!(
                "field file index ({i},{j}) outside {}x{} grid",
                grid.n1, grid.n2
            )));
        }
        u.u1[[i, j]] = parts[2].trim().parse().map_err(|_| {
            Error::Config(format!("field file line {}: bad value", ln + 1))
        })?;
        u.u2[[i, j]] = parts[3].trim().parse().map_err(|_| {
            Error::Config(format!("field file line {}: bad value", ln + 1))
        })?;
        seen += 1;
    }
    if seen != grid.n1 * grid.n2 {
        return Err(Error::ShapeMismatch(format!(
            "field file has {seen} rows, grid needs {}",
            grid.n1 * grid.n2
        )));
    }
    Ok(u)
}

/// Legacy-VTK ASCII structured grid with the field as point data, both in
/// chart components and pushed forward to R³. The periodic seam is
/// duplicated so the surface renders closed.
pub fn write_vtk_vector(path: &Path, u: &VectorField, title: &str) -> Result<()> {
    let geom = &u.geom;
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    writeln!(s, "{title}").unwrap();
    s.push_str("ASCII\nDATASET STRUCTURED_GRID\n");
    writeln!(s, "DIMENSIONS {} {} 1", n2 + 1, n1).unwrap();
    writeln!(s, "POINTS {} float", n1 * (n2 + 1)).unwrap();
    for i in 0..n1 {
        for j in 0..=n2 {
            let jj = j % n2;
            let p = geom.embed(grid.x(i), grid.y(jj));
            writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
        }
    }
    writeln!(s, "POINT_DATA {}", n1 * (n2 + 1)).unwrap();
    s.push_str("VECTORS velocity_xyz float\n");
    for i in 0..n1 {
        for j in 0..=n2 {
            let jj = j % n2;
            let v = geom.embed_vector(
                grid.x(i),
                grid.y(jj),
                [u.u1[[i, jj]], u.u2[[i, jj]]],
            );
            writeln!(s, "{} {} {}", v[0], v[1], v[2]).unwrap();
        }
    }
    s.push_str("VECTORS velocity_chart float\n");
    for i in 0..n1 {
        for j in 0..=n2 {
            let jj = j % n2;
            writeln!(s, "{} {} 0.0", u.u1[[i, jj]], u.u2[[i, jj]]).unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Legacy-VTK scalar snapshot on the same structured grid.
pub fn write_vtk_scalar(path: &Path, f: &ScalarField, name: &str) -> Result<()> {
    let geom = &f.geom;
    let grid = &geom.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    writeln!(s, "{name}").unwrap();
    s.push_str("ASCII\nDATASET STRUCTURED_GRID\n");
    writeln!(s, "DIMENSIONS {} {} 1", n2 + 1, n1).unwrap();
    writeln!(s, "POINTS {} float", n1 * (n2 + 1)).unwrap();
    for i in 0..n1 {
        for j in 0..=n2 {
            let jj = j % n2;
            let p = geom.embed(grid.x(i), grid.y(jj));
            writeln!(s, "{} {} {}", p[0], p[1], p[2]).unwrap();
        }
    }
    writeln!(s, "POINT_DATA {}", n1 * (n2 + 1)).unwrap();
    writeln!(s, "SCALARS {name} float 1\nLOOKUP_TABLE default").unwrap();
    for i in 0..n1 {
        for j in 0..=n2 {
            let jj = j % n2;
            writeln!(s, "{}", f.a[[i, jj]]).unwrap();
        }
    }
    fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_geometry, GeometryKind, GeometrySpec};
    use crate::synth;

    #[test]
    fn field_csv_round_trip() {
        let geom = build_geometry(&GeometrySpec {
            kind: GeometryKind::Disk { radius: 1.0 },
            resolution: (12, 10),
        })
        .unwrap();
        let u = synth::random_smooth_vector(&geom, 3);
        let dir = std::env::temp_dir().join("surfns_io_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        write_field_csv(&path, &u).unwrap();
        let v = read_field_csv(&path, &geom).unwrap();
        for i in 0..12 {
            for j in 0..10 {
                assert_eq!(u.u1[[i, j]], v.u1[[i, j]]);
                assert_eq!(u.u2[[i, j]], v.u2[[i, j]]);
            }
        }
    }

    #[test]
    fn run_dir_refuses_overwrite() {
        let dir = std::env::temp_dir().join("surfns_io_rundir");
        let _ = fs::remove_dir_all(&dir);
        prepare_run_dir(&dir, false).unwrap();
        assert!(prepare_run_dir(&dir, false).is_err());
        assert!(prepare_run_dir(&dir, true).is_ok());
    }
}
