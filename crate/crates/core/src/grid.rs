//! Cell-centered grids on slabs and rectangles, ghost layers, centered
//! stencils, discrete norms, and snapshot serialization.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::det_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    SlipWall,
}

impl Boundary {
    pub fn parse(s: &str) -> Result<Boundary> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "slip" | "slip-wall" => Ok(Boundary::SlipWall),
            other => Err(Error::Config(format!("unknown boundary kind `{other}`"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::SlipWall => "slip",
        })
    }
}

pub const MIN_CELLS: usize = 8;

/// Uniform box `[0, L_x] × [0, L_y]` (or the slab `[0, L_x]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    extents: [f64; 2],
    cells: [usize; 2],
    bc: [Boundary; 2],
}

impl Grid {
    pub fn new(dim: usize, extents: [f64; 2], cells: [usize; 2], bc: [Boundary; 2]) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::Usage(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        for axis in 0..dim {
            if cells[axis] < MIN_CELLS {
                return Err(Error::Usage(format!(
                    "axis {axis} has {} cells, at least {MIN_CELLS} required",
                    cells[axis]
                )));
            }
            if !(extents[axis] > 0.0) || !extents[axis].is_finite() {
                return Err(Error::Usage(format!("axis {axis} extent must be positive")));
            }
        }
        let (cells, extents, bc) = if dim == 1 {
            ([cells[0], 1], [extents[0], 1.0], [bc[0], Boundary::Periodic])
        } else {
            (cells, extents, bc)
        };
        Ok(Grid { dim, extents, cells, bc })
    }

    pub fn slab(length: f64, cells: usize, bc: Boundary) -> Result<Grid> {
        Grid::new(1, [length, 1.0], [cells, 1], [bc, Boundary::Periodic])
    }

    pub fn rectangle(extents: [f64; 2], cells: [usize; 2], bc: [Boundary; 2]) -> Result<Grid> {
        Grid::new(2, extents, cells, bc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }
    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }
    pub fn bc(&self) -> [Boundary; 2] {
        self.bc
    }
    pub fn n_cells(&self) -> usize {
        self.cells[0] * self.cells[1]
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.cells[axis] as f64
    }
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.extents[a]).product()
    }
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.cells[0] * j
    }
    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        let y = if self.dim == 2 { (j as f64 + 0.5) * self.spacing(1) } else { 0.0 };
        [(i as f64 + 0.5) * self.spacing(0), y]
    }
    pub fn centers(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_cells());
        for j in 0..self.cells[1] {
            for i in 0..self.cells[0] {
                out.push(self.center(i, j));
            }
        }
        out
    }

    /// Same box with every active axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Grid {
        let mut cells = self.cells;
        for c in cells.iter_mut().take(self.dim) {
            *c *= factor;
        }
        Grid { cells, ..self.clone() }
    }

    pub fn has_wall(&self) -> bool {
        (0..self.dim).any(|a| self.bc[a] == Boundary::SlipWall)
    }

    /// Canonical text used for hashing and snapshot headers.
    pub fn fingerprint(&self) -> String {
        format!(
            "dim={};cells={}x{};extents={:e}x{:e};bc={}/{}",
            self.dim, self.cells[0], self.cells[1], self.extents[0], self.extents[1], self.bc[0], self.bc[1]
        )
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Mirror symmetry of a field across a slip wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of velocity component `component` across walls normal to `axis`.
    pub fn velocity(component: usize, axis: usize) -> Parity {
        if component == axis {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Field padded with ghost layers.
#[derive(Debug, Clone)]
pub struct Ghosted {
    nx: usize,
    ny: usize,
    gx: usize,
    gy: usize,
    data: Vec<f64>,
    filled: bool,
}

impl Ghosted {
    /// Allocated but not yet filled; stencils reject it.
    pub fn unfilled(grid: &Grid, layers: usize) -> Ghosted {
        let [nx, ny] = grid.cells();
        let gy = if grid.dim() == 2 { layers } else { 0 };
        Ghosted {
            nx,
            ny,
            gx: layers,
            gy,
            data: vec![0.0; (nx + 2 * layers) * (ny + 2 * gy)],
            filled: false,
        }
    }

    pub fn is_filled(&self) -> bool {
        self.filled
    }

    pub fn layers(&self) -> usize {
        self.gx
    }

    #[inline]
    fn offset(&self, i: isize, j: isize) -> usize {
        let ii = (i + self.gx as isize) as usize;
        let jj = (j + self.gy as isize) as usize;
        ii + (self.nx + 2 * self.gx) * jj
    }

    /// Value at cell `(i, j)`; indices may reach into the ghost layers.
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> f64 {
        self.data[self.offset(i, j)]
    }

    fn set(&mut self, i: isize, j: isize, v: f64) {
        let o = self.offset(i, j);
        self.data[o] = v;
    }

    fn require_filled(&self) -> Result<()> {
        if self.filled {
            Ok(())
        } else {
            Err(Error::Usage("ghost cells not filled".to_string()))
        }
    }
}

/// Pads `field` with `layers` ghost cells per side. Periodic axes wrap, slip
/// walls mirror with the given parity (odd for the wall-normal velocity,
/// even for everything else).
pub fn fill_ghosts(field: &[f64], grid: &Grid, parity: [Parity; 2], layers: usize) -> Ghosted {
    assert_eq!(field.len(), grid.n_cells(), "field does not match grid");
    let mut g = Ghosted::unfilled(grid, layers);
    let (nx, ny) = (g.nx as isize, g.ny as isize);
    for j in 0..ny {
        for i in 0..nx {
            g.set(i, j, field[(i + nx * j) as usize]);
        }
    }
    let bc = grid.bc();
    let l = layers as isize;
    assert!(l <= nx, "more ghost layers than cells");
    // x ghosts on interior rows first, then y ghosts across full padded rows
    for j in 0..ny {
        for k in 1..=l {
            let (lo, hi) = match bc[0] {
                Boundary::Periodic => (g.at(nx - k, j), g.at(k - 1, j)),
                Boundary::SlipWall => {
                    let s = if parity[0] == Parity::Odd { -1.0 } else { 1.0 };
                    (s * g.at(k - 1, j), s * g.at(nx - k, j))
                }
            };
            g.set(-k, j, lo);
            g.set(nx - 1 + k, j, hi);
        }
    }
    if grid.dim() == 2 {
        for i in -l..nx + l {
            for k in 1..=l {
                let (lo, hi) = match bc[1] {
                    Boundary::Periodic => (g.at(i, ny - k), g.at(i, k - 1)),
                    Boundary::SlipWall => {
                        let s = if parity[1] == Parity::Odd { -1.0 } else { 1.0 };
                        (s * g.at(i, k - 1), s * g.at(i, ny - k))
                    }
                };
                g.set(i, -k, lo);
                g.set(i, ny - 1 + k, hi);
            }
        }
    }
    g.filled = true;
    g
}

/// Even-parity ghosting, the right choice for density and temperature.
pub fn fill_ghosts_scalar(field: &[f64], grid: &Grid, layers: usize) -> Ghosted {
    fill_ghosts(field, grid, [Parity::Even, Parity::Even], layers)
}

/// Ghosting of velocity component `component` consistent with slip walls.
pub fn fill_ghosts_velocity(field: &[f64], grid: &Grid, component: usize, layers: usize) -> Ghosted {
    fill_ghosts(field, grid, [Parity::velocity(component, 0), Parity::velocity(component, 1)], layers)
}

/// Second-order centered derivative along `axis` at every interior cell.
pub fn derivative(g: &Ghosted, grid: &Grid, axis: usize) -> Result<Vec<f64>> {
    g.require_filled()?;
    if axis >= grid.dim() {
        return Err(Error::Usage(format!("axis {axis} out of range for a {}-D grid", grid.dim())));
    }
    let h2 = 2.0 * grid.spacing(axis);
    let [nx, ny] = grid.cells();
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let d = if axis == 0 {
                g.at(i + 1, j) - g.at(i - 1, j)
            } else {
                g.at(i, j + 1) - g.at(i, j - 1)
            };
            out.push(d / h2);
        }
    }
    Ok(out)
}

/// Per-cell gradient, one vector per active axis.
pub fn gradient(g: &Ghosted, grid: &Grid) -> Result<Vec<Vec<f64>>> {
    (0..grid.dim()).map(|a| derivative(g, grid, a)).collect()
}

/// Centered divergence of a vector field given by its ghosted components.
pub fn divergence(components: &[Ghosted], grid: &Grid) -> Result<Vec<f64>> {
    if components.len() != grid.dim() {
        return Err(Error::Usage("divergence needs one component per axis".to_string()));
    }
    let mut out = vec![0.0; grid.n_cells()];
    for (axis, c) in components.iter().enumerate() {
        let d = derivative(c, grid, axis)?;
        for (o, v) in out.iter_mut().zip(d) {
            *o += v;
        }
    }
    Ok(out)
}

/// `div(k ∇f)` by differencing face fluxes with face coefficients averaged
/// from the two adjacent cells.
pub fn diffusion_operator(f: &Ghosted, coef: &Ghosted, grid: &Grid) -> Result<Vec<f64>> {
    f.require_filled()?;
    coef.require_filled()?;
    let [nx, ny] = grid.cells();
    let mut out = vec![0.0; nx * ny];
    for axis in 0..grid.dim() {
        let h = grid.spacing(axis);
        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let flux = |a: isize, b: isize| {
                    let k = 0.5 * (coef.at(a, b) + coef.at(a + di, b + dj));
                    k * (f.at(a + di, b + dj) - f.at(a, b)) / h
                };
                let v = (flux(i, j) - flux(i - di, j - dj)) / h;
                out[(i + nx as isize * j) as usize] += v;
            }
        }
    }
    Ok(out)
}

/// Cell-average-weighted `L^p` norm; `p = ∞` gives the max norm.
pub fn norm(field: &[f64], grid: &Grid, p: f64) -> f64 {
    if p.is_infinite() {
        return field.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    let w = grid.cell_volume();
    let terms: Vec<f64> = field.iter().map(|v| v.abs().powf(p) * w).collect();
    det_sum(&terms).powf(1.0 / p)
}

/// `L^p` norm of the pointwise Euclidean magnitude of a vector field.
pub fn vector_norm(components: &[Vec<f64>], grid: &Grid, p: f64) -> f64 {
    let mag = magnitude(components);
    norm(&mag, grid, p)
}

pub fn magnitude(components: &[Vec<f64>]) -> Vec<f64> {
    let n = components.first().map_or(0, |c| c.len());
    (0..n)
        .map(|k| components.iter().map(|c| c[k] * c[k]).sum::<f64>().sqrt())
        .collect()
}

/// `∫ f g` by the midpoint rule.
pub fn inner(f: &[f64], g: &[f64], grid: &Grid) -> f64 {
    let w = grid.cell_volume();
    let terms: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b * w).collect();
    det_sum(&terms)
}

/// `∫ f` by the midpoint rule.
pub fn integrate(f: &[f64], grid: &Grid) -> f64 {
    let w = grid.cell_volume();
    let terms: Vec<f64> = f.iter().map(|a| a * w).collect();
    det_sum(&terms)
}

/// Conservative averaging from a grid refined by `factor` down to `coarse`.
pub fn restrict(fine: &[f64], coarse: &Grid, factor: usize) -> Result<Vec<f64>> {
    let [nx, ny] = coarse.cells();
    let fnx = nx * factor;
    let fny = if coarse.dim() == 2 { ny * factor } else { 1 };
    if fine.len() != fnx * fny {
        return Err(Error::Usage(format!(
            "fine field has {} cells, expected {}",
            fine.len(),
            fnx * fny
        )));
    }
    let fy = if coarse.dim() == 2 { factor } else { 1 };
    let inv = 1.0 / (factor * fy) as f64;
    let mut out = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let mut acc = 0.0;
            for b in 0..fy {
                for a in 0..factor {
                    acc += fine[(i * factor + a) + fnx * (j * fy + b)];
                }
            }
            out[i + nx * j] = acc * inv;
        }
    }
    Ok(out)
}

/// A named set of fields on a grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub time: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

const SNAPSHOT_MAGIC: &str = "nsflab-snapshot 1";

impl Snapshot {
    pub fn field(&self, name: &str) -> Option<&[f64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Text header terminated by `end`, followed by little-endian `f64`
    /// arrays in the order the header lists them.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        writeln!(w, "{SNAPSHOT_MAGIC}")?;
        writeln!(w, "dim {}", g.dim())?;
        writeln!(w, "cells {} {}", g.cells()[0], g.cells()[1])?;
        writeln!(w, "extents {:?} {:?}", g.extents()[0], g.extents()[1])?;
        writeln!(w, "bc {} {}", g.bc()[0], g.bc()[1])?;
        writeln!(w, "time {:?}", self.time)?;
        let names: Vec<&str> = self.fields.iter().map(|(n, _)| n.as_str()).collect();
        writeln!(w, "fields {}", names.join(" "))?;
        writeln!(w, "end")?;
        for (_, v) in &self.fields {
            let mut buf = Vec::with_capacity(v.len() * 8);
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Snapshot> {
        let mut line = String::new();
        let mut next_line = |r: &mut R| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse("unexpected end of snapshot header".into()));
            }
            Ok(line.trim_end().to_string())
        };
        if next_line(&mut r)? != SNAPSHOT_MAGIC {
            return Err(Error::Parse("not a snapshot file".into()));
        }
        let mut dim = None;
        let mut cells = None;
        let mut extents = None;
        let mut bc = None;
        let mut time = None;
        let mut names: Vec<String> = Vec::new();
        loop {
            let l = next_line(&mut r)?;
            let mut parts = l.split_whitespace();
            let key = parts.next().unwrap_or("");
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number `{s}`")));
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad integer `{s}`")));
            match (key, rest.as_slice()) {
                ("end", []) => break,
                ("dim", [d]) => dim = Some(int(d)?),
                ("cells", [a, b]) => cells = Some([int(a)?, int(b)?]),
                ("extents", [a, b]) => extents = Some([num(a)?, num(b)?]),
                ("bc", [a, b]) => bc = Some([Boundary::parse(a)?, Boundary::parse(b)?]),
                ("time", [t]) => time = Some(num(t)?),
                ("fields", list) => names = list.iter().map(|s| s.to_string()).collect(),
                _ => return Err(Error::Parse(format!("bad snapshot header line `{l}`"))),
            }
        }
        let missing = || Error::Parse("incomplete snapshot header".into());
        let grid = Grid::new(dim.ok_or_else(missing)?, extents.ok_or_else(missing)?, cells.ok_or_else(missing)?, bc.ok_or_else(missing)?)?;
        let n = grid.n_cells();
        let mut fields = Vec::with_capacity(names.len());
        let mut buf = vec![0u8; n * 8];
        for name in names {
            r.read_exact(&mut buf)?;
            let v = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            fields.push((name, v));
        }
        Ok(Snapshot { grid, time: time.ok_or_else(missing)?, fields })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Snapshot> {
        let f = std::fs::File::open(path)?;
        Snapshot::read_from(std::io::BufReader::new(f))
    }

    /// CSV of a 1-D profile: `x` followed by every field.
    pub fn profile_csv(&self) -> Result<String> {
        if self.grid.dim() != 1 {
            return Err(Error::Usage("profile export is defined for 1-D grids only".into()));
        }
        let mut s = String::from("x");
        for (n, _) in &self.fields {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for i in 0..self.grid.cells()[0] {
            s.push_str(&format!("{:e}", self.grid.center(i, 0)[0]));
            for (_, v) in &self.fields {
                s.push_str(&format!(",{:e}", v[i]));
            }
            s.push('\n');
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sample(grid: &Grid, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        grid.centers().into_iter().map(f).collect()
    }

    #[test]
    fn grid_invariants() {
        assert!(Grid::slab(1.0, 4, Boundary::Periodic).is_err());
        assert!(Grid::new(3, [1.0, 1.0], [8, 8], [Boundary::Periodic; 2]).is_err());
        let g = Grid::rectangle([2.0, 1.0], [16, 8], [Boundary::SlipWall, Boundary::Periodic]).unwrap();
        assert_eq!(g.spacing(0), 0.125);
        assert_eq!(g.n_cells(), 128);
        assert!(g.has_wall());
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        for bc in [Boundary::Periodic, Boundary::SlipWall] {
            let g = Grid::rectangle([1.0, 1.0], [10, 12], [bc, bc]).unwrap();
            let f = vec![3.5; g.n_cells()];
            let gh = fill_ghosts_scalar(&f, &g, 1);
            for d in gradient(&gh, &g).unwrap() {
                assert!(d.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn affine_field_gradient_is_exact() {
        // interior cells only: walls mirror evenly, so affine data is not
        // wall-compatible in the boundary cells
        let g = Grid::slab(1.0, 16, Boundary::SlipWall).unwrap();
        let f = sample(&g, |x| 3.0 * x[0]);
        let d = derivative(&fill_ghosts_scalar(&f, &g, 1), &g, 0).unwrap();
        for v in &d[1..15] {
            assert!((v - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn unfilled_ghosts_rejected() {
        let g = Grid::slab(1.0, 8, Boundary::Periodic).unwrap();
        let gh = Ghosted::unfilled(&g, 1);
        assert!(matches!(derivative(&gh, &g, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn sine_derivative_converges_at_second_order() {
        let errs: Vec<f64> = [32, 64, 128]
            .iter()
            .map(|&n| {
                let g = Grid::slab(1.0, n, Boundary::Periodic).unwrap();
                let f = sample(&g, |x| (2.0 * PI * x[0]).sin());
                let d = derivative(&fill_ghosts_scalar(&f, &g, 1), &g, 0).unwrap();
                let exact = sample(&g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
                let e: Vec<f64> = d.iter().zip(&exact).map(|(a, b)| a - b).collect();
                norm(&e, &g, 2.0)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "order {order}");
        }
    }

    #[test]
    fn slip_ghosts_mirror_with_parity() {
        let g = Grid::slab(1.0, 8, Boundary::SlipWall).unwrap();
        let mut u = vec![0.0; 8];
        u[0] = 0.7;
        u[7] = -0.2;
        let gu = fill_ghosts_velocity(&u, &g, 0, 2);
        assert_eq!(gu.at(-1, 0), -0.7);
        assert_eq!(gu.at(8, 0), 0.2);
        let gt = fill_ghosts_scalar(&u, &g, 2);
        assert_eq!(gt.at(-1, 0), 0.7);
        assert_eq!(gt.at(8, 0), -0.2);
        assert_eq!(gt.at(-2, 0), u[1]);
    }

    #[test]
    fn wall_face_heat_flux_vanishes() {
        let g = Grid::slab(1.0, 16, Boundary::SlipWall).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..2.0)).collect();
        let gt = fill_ghosts_scalar(&theta, &g, 1);
        let h = g.spacing(0);
        // face-centered gradient at both walls
        assert_eq!((gt.at(0, 0) - gt.at(-1, 0)) / h, 0.0);
        assert_eq!((gt.at(16, 0) - gt.at(15, 0)) / h, 0.0);
    }

    #[test]
    fn ghost_filling_is_idempotent() {
        let g = Grid::rectangle([1.0, 1.0], [8, 9], [Boundary::SlipWall, Boundary::Periodic]).unwrap();
        let f: Vec<f64> = (0..g.n_cells()).map(|k| (k as f64).sin()).collect();
        let a = fill_ghosts_velocity(&f, &g, 0, 2);
        let b = fill_ghosts_velocity(&f, &g, 0, 2);
        assert_eq!(a.data, b.data);
        // corners are mirrored in x then wrapped in y
        assert_eq!(a.at(-1, -1), -f[g.index(0, 8)]);
    }

    #[test]
    fn diffusion_operator_vanishes_on_affine_with_constant_coefficient() {
        let g = Grid::slab(1.0, 16, Boundary::Periodic).unwrap();
        let f = sample(&g, |x| 2.0 * x[0] + 1.0);
        let gf = fill_ghosts_scalar(&f, &g, 1);
        let k = fill_ghosts_scalar(&vec![0.3; 16], &g, 1);
        let d = diffusion_operator(&gf, &k, &g).unwrap();
        // periodic wrap breaks affinity only next to the seam
        for v in &d[1..15] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn norms() {
        let g = Grid::rectangle([2.0, 3.0], [8, 8], [Boundary::Periodic; 2]).unwrap();
        let one = vec![1.0; g.n_cells()];
        for p in [2.0, 4.0, 6.0] {
            assert!((norm(&one, &g, p) - 6f64.powf(1.0 / p)).abs() < 1e-13);
        }
        assert_eq!(norm(&one, &g, f64::INFINITY), 1.0);
        let zero = vec![0.0; g.n_cells()];
        assert_eq!(norm(&zero, &g, 4.0), 0.0);
    }

    #[test]
    fn discrete_interpolation_inequality() {
        let g = Grid::slab(1.0, 64, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u: Vec<f64> = (0..64).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lhs = norm(&u, &g, 4.0);
            let rhs = norm(&u, &g, 6.0).powf(0.75) * norm(&u, &g, 2.0).powf(0.25);
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn restriction_averages() {
        let coarse = Grid::slab(1.0, 8, Boundary::Periodic).unwrap();
        let fine: Vec<f64> = (0..32).map(|k| k as f64).collect();
        let r = restrict(&fine, &coarse, 4).unwrap();
        assert_eq!(r[0], 1.5);
        assert_eq!(r[7], 29.5);
        assert!(restrict(&fine, &coarse, 2).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let g = Grid::rectangle([1.0, 0.5], [8, 8], [Boundary::SlipWall, Boundary::Periodic]).unwrap();
        let s = Snapshot {
            grid: g.clone(),
            time: 0.1 + 0.2,
            fields: vec![
                ("rho".into(), (0..64).map(|k| 1.0 + k as f64 / 7.0).collect()),
                ("etot".into(), (0..64).map(|k| (k as f64).cos()).collect()),
            ],
        };
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = Snapshot::read_from(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, s);
        assert!(Snapshot::read_from(std::io::Cursor::new(b"garbage\n".to_vec())).is_err());
    }

    #[test]
    fn profile_csv_header() {
        let g = Grid::slab(1.0, 8, Boundary::Periodic).unwrap();
        let s = Snapshot { grid: g, time: 0.0, fields: vec![("rho".into(), vec![1.0; 8])] };
        let csv = s.profile_csv().unwrap();
        assert!(csv.starts_with("x,rho\n6.25e-2,1e0\n"));
    }
}
