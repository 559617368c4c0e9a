//! Uniform 2D grids, node-aligned scalar fields and the finite-difference
//! machinery shared by every solver.
//!
//! Fields are stored row-major with `j` (the y index) as the slow axis, so
//! node `(i, j)` lives at `values[j * nx + i]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node-centred grid on `[xmin, xmin + (nx-1) dx] x [ymin, ymin + (ny-1) dy]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub xmin: f64,
    pub ymin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, xmin: f64, ymin: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacings must be positive and finite, got dx={dx}, dy={dy}"
            )));
        }
        if !(xmin.is_finite() && ymin.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            xmin,
            ymin,
        })
    }

    /// Grid with `nx x ny` nodes spanning the given closed rectangle.
    pub fn spanning(nx: usize, ny: usize, xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {nx}x{ny}"
            )));
        }
        Self::new(
            nx,
            ny,
            (xmax - xmin) / (nx - 1) as f64,
            (ymax - ymin) / (ny - 1) as f64,
            xmin,
            ymin,
        )
    }

    /// Unit square `[0,1]^2` with `n x n` nodes.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::spanning(n, n, 0.0, 1.0, 0.0, 1.0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.ymin + j as f64 * self.dy
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    pub fn xmax(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn ymax(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn max_spacing(&self) -> f64 {
        self.dx.max(self.dy)
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx.min(self.dy)
    }

    pub fn diameter(&self) -> f64 {
        (self.xmax() - self.xmin).hypot(self.ymax() - self.ymin)
    }

    fn slack(&self) -> f64 {
        1e-9 * self.max_spacing()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let s = self.slack();
        p[0] >= self.xmin - s && p[0] <= self.xmax() + s && p[1] >= self.ymin - s && p[1] <= self.ymax() + s
    }

    /// Clamp a point onto the closed grid rectangle.
    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(self.xmin, self.xmax()),
            p[1].clamp(self.ymin, self.ymax()),
        ]
    }

    /// Nearest node to a point inside the domain.
    pub fn nearest_node(&self, p: [f64; 2]) -> Result<(usize, usize)> {
        if !self.contains(p) {
            return Err(Error::OutOfDomain { x: p[0], y: p[1] });
        }
        let i = ((p[0] - self.xmin) / self.dx).round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((p[1] - self.ymin) / self.dy).round().clamp(0.0, (self.ny - 1) as f64) as usize;
        Ok((i, j))
    }

    /// Up to four axis neighbours of a node.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.ij(idx);
        let nx = self.nx;
        let ny = self.ny;
        [
            (i > 0).then(|| idx - 1),
            (i + 1 < nx).then(|| idx + 1),
            (j > 0).then(|| idx - nx),
            (j + 1 < ny).then(|| idx + nx),
        ]
        .into_iter()
        .flatten()
    }

    /// The two neighbours of a node along one axis (`minus`, `plus`), if present.
    #[inline]
    pub fn axis_neighbors(&self, idx: usize, axis: Axis) -> (Option<usize>, Option<usize>) {
        let (i, j) = self.ij(idx);
        match axis {
            Axis::X => ((i > 0).then(|| idx - 1), (i + 1 < self.nx).then(|| idx + 1)),
            Axis::Y => ((j > 0).then(|| idx - self.nx), (j + 1 < self.ny).then(|| idx + self.nx)),
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
        }
    }

    /// Same node layout, compared with a relative tolerance on the real parameters.
    pub fn matches(&self, other: &Grid2D) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        self.nx == other.nx
            && self.ny == other.ny
            && close(self.dx, other.dx)
            && close(self.dy, other.dy)
            && close(self.xmin, other.xmin)
            && close(self.ymin, other.ymin)
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.grid.index(i, j);
        self.values[idx] = v;
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert!(self.grid.matches(&other.grid));
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Set of grid nodes carrying one boundary value each (targets, depots).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeSet {
    nodes: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl NodeSet {
    pub fn new(grid: &Grid2D, nodes: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::InvalidProblem(format!(
                "node set has {} nodes but {} values",
                nodes.len(),
                values.len()
            )));
        }
        for (k, &(i, j)) in nodes.iter().enumerate() {
            if i >= grid.nx || j >= grid.ny {
                return Err(Error::InvalidProblem(format!(
                    "node ({i}, {j}) is outside the {}x{} grid",
                    grid.nx, grid.ny
                )));
            }
            if nodes[..k].contains(&(i, j)) {
                return Err(Error::InvalidProblem(format!("node ({i}, {j}) listed twice")));
            }
        }
        Ok(Self { nodes, values })
    }

    /// Nodes with value zero.
    pub fn zeros(grid: &Grid2D, nodes: Vec<(usize, usize)>) -> Result<Self> {
        let n = nodes.len();
        Self::new(grid, nodes, vec![0.0; n])
    }

    /// Snap real coordinates to their nearest nodes.
    pub fn from_points(grid: &Grid2D, points: &[[f64; 2]], values: Vec<f64>) -> Result<Self> {
        let nodes = points
            .iter()
            .map(|&p| grid.nearest_node(p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, nodes, values)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[(usize, usize)] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.nodes.iter().copied().zip(self.values.iter().copied())
    }

    pub fn contains(&self, node: (usize, usize)) -> bool {
        self.nodes.contains(&node)
    }

    /// Same nodes, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.nodes.len());
        Self {
            nodes: self.nodes.clone(),
            values,
        }
    }

    /// Node coordinates in domain units.
    pub fn points(&self, grid: &Grid2D) -> Vec<[f64; 2]> {
        self.nodes.iter().map(|&(i, j)| grid.point(i, j)).collect()
    }

    /// Boolean mask over the grid marking member nodes.
    pub fn mask(&self, grid: &Grid2D) -> Vec<bool> {
        let mut m = vec![false; grid.len()];
        for &(i, j) in &self.nodes {
            m[grid.index(i, j)] = true;
        }
        m
    }
}

/// Upwind difference `min{D+u, -D-u, 0}` at node `(i, j)`; edge nodes omit the
/// missing side.
pub fn upwind_diff(field: &ScalarField, i: usize, j: usize, axis: Axis) -> f64 {
    let grid = field.grid();
    let idx = grid.index(i, j);
    let h = grid.spacing(axis);
    let u = field.at(idx);
    let (minus, plus) = grid.axis_neighbors(idx, axis);
    let mut d: f64 = 0.0;
    if let Some(p) = plus {
        d = d.min((field.at(p) - u) / h);
    }
    if let Some(m) = minus {
        d = d.min((field.at(m) - u) / h);
    }
    d
}

/// Smaller of the two axis neighbours together with the side it lies on
/// (`-1` or `+1`). Ties prefer the minus side.
#[inline]
pub(crate) fn smaller_neighbor(values: &[f64], grid: &Grid2D, idx: usize, axis: Axis) -> Option<(f64, i8)> {
    let (minus, plus) = grid.axis_neighbors(idx, axis);
    match (minus, plus) {
        (Some(m), Some(p)) => {
            if values[p] < values[m] {
                Some((values[p], 1))
            } else {
                Some((values[m], -1))
            }
        }
        (Some(m), None) => Some((values[m], -1)),
        (None, Some(p)) => Some((values[p], 1)),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, Copy)]
struct CellLocation {
    i0: usize,
    j0: usize,
    tx: f64,
    ty: f64,
}

fn locate(grid: &Grid2D, p: [f64; 2]) -> Result<CellLocation> {
    if !grid.contains(p) || !p[0].is_finite() || !p[1].is_finite() {
        return Err(Error::OutOfDomain { x: p[0], y: p[1] });
    }
    let fx = ((p[0] - grid.xmin) / grid.dx).clamp(0.0, (grid.nx - 1) as f64);
    let fy = ((p[1] - grid.ymin) / grid.dy).clamp(0.0, (grid.ny - 1) as f64);
    let i0 = (fx.floor() as usize).min(grid.nx - 2);
    let j0 = (fy.floor() as usize).min(grid.ny - 2);
    Ok(CellLocation {
        i0,
        j0,
        tx: fx - i0 as f64,
        ty: fy - j0 as f64,
    })
}

#[inline]
fn blend(c: &CellLocation, v00: f64, v10: f64, v01: f64, v11: f64) -> f64 {
    let bottom = v00 + c.tx * (v10 - v00);
    let top = v01 + c.tx * (v11 - v01);
    bottom + c.ty * (top - bottom)
}

/// Bilinear interpolation of a field at an arbitrary point in the domain.
pub fn interp_value(field: &ScalarField, p: [f64; 2]) -> Result<f64> {
    let c = locate(field.grid(), p)?;
    Ok(blend(
        &c,
        field.get(c.i0, c.j0),
        field.get(c.i0 + 1, c.j0),
        field.get(c.i0, c.j0 + 1),
        field.get(c.i0 + 1, c.j0 + 1),
    ))
}

/// Nodal gradient: central differences inside, one-sided on the edges.
pub fn node_gradient(field: &ScalarField, i: usize, j: usize) -> [f64; 2] {
    let g = field.grid();
    let gx = if i == 0 {
        (field.get(1, j) - field.get(0, j)) / g.dx
    } else if i == g.nx - 1 {
        (field.get(i, j) - field.get(i - 1, j)) / g.dx
    } else {
        (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * g.dx)
    };
    let gy = if j == 0 {
        (field.get(i, 1) - field.get(i, 0)) / g.dy
    } else if j == g.ny - 1 {
        (field.get(i, j) - field.get(i, j - 1)) / g.dy
    } else {
        (field.get(i, j + 1) - field.get(i, j - 1)) / (2.0 * g.dy)
    };
    [gx, gy]
}

/// Interpolated gradient; `singular` is set when its magnitude vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub gradient: [f64; 2],
    pub singular: bool,
}

impl GradientSample {
    pub fn norm(&self) -> f64 {
        self.gradient[0].hypot(self.gradient[1])
    }
}

pub const SINGULAR_GRADIENT: f64 = 1e-14;

/// Bilinear blend of the nodal gradients of the enclosing cell.
pub fn interp_gradient(field: &ScalarField, p: [f64; 2]) -> Result<GradientSample> {
    let c = locate(field.grid(), p)?;
    let g00 = node_gradient(field, c.i0, c.j0);
    let g10 = node_gradient(field, c.i0 + 1, c.j0);
    let g01 = node_gradient(field, c.i0, c.j0 + 1);
    let g11 = node_gradient(field, c.i0 + 1, c.j0 + 1);
    let gradient = [
        blend(&c, g00[0], g10[0], g01[0], g11[0]),
        blend(&c, g00[1], g10[1], g01[1], g11[1]),
    ];
    let singular = gradient[0].hypot(gradient[1]) <= SINGULAR_GRADIENT;
    Ok(GradientSample { gradient, singular })
}

/// Write a field in the CSV grid format: header `nx,ny,dx,dy,xmin,ymin`,
/// then one line per row `j`, values printed with 17 significant digits.
pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_field_to(field, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_field_to(field: &ScalarField, out: &mut impl Write) -> std::io::Result<()> {
    let g = field.grid();
    writeln!(
        out,
        "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
        g.nx, g.ny, g.dx, g.dy, g.xmin, g.ymin
    )?;
    for row in field.values().chunks(g.nx) {
        let mut first = true;
        for v in row {
            if !first {
                out.write_all(b",")?;
            }
            first = false;
            write!(out, "{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut records = reader.records();

    let parse_err = |line: usize, msg: String| Error::format(path, line, msg);

    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
        None => return Err(parse_err(1, "empty file".into())),
    };
    if header.len() != 6 {
        return Err(parse_err(
            1,
            format!("header must be nx,ny,dx,dy,xmin,ymin; found {} entries", header.len()),
        ));
    }
    let int = |k: usize| -> Result<usize> {
        header[k]
            .parse::<usize>()
            .map_err(|e| parse_err(1, format!("bad header entry '{}': {e}", &header[k])))
    };
    let real = |k: usize| -> Result<f64> {
        header[k]
            .parse::<f64>()
            .map_err(|e| parse_err(1, format!("bad header entry '{}': {e}", &header[k])))
    };
    let grid = Grid2D::new(int(0)?, int(1)?, real(2)?, real(3)?, real(4)?, real(5)?)
        .map_err(|e| parse_err(1, e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0;
    for (k, record) in records.enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if rows == grid.ny {
            return Err(parse_err(line, format!("more than the declared {} rows", grid.ny)));
        }
        if record.len() != grid.nx {
            return Err(parse_err(
                line,
                format!("expected {} values, found {}", grid.nx, record.len()),
            ));
        }
        for entry in record.iter() {
            let v = entry
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("bad value '{entry}': {e}")))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows != grid.ny {
        return Err(parse_err(
            rows + 2,
            format!("header declares {} rows but {} are present", grid.ny, rows),
        ));
    }
    ScalarField::new(grid, values)
}

/// Largest change of `field` under the reflections and quarter turns of the
/// lattice that fix `center`, over node pairs that both lie in the grid.
/// Only the two axis reflections are used when `dx != dy`.
pub fn lattice_asymmetry(field: &ScalarField, center: (usize, usize)) -> f64 {
    let g = field.grid();
    let (ci, cj) = (center.0 as i64, center.1 as i64);
    let square = g.dx == g.dy;
    let maps: &[fn(i64, i64) -> (i64, i64)] = if square {
        &[
            |a, b| (-a, b),
            |a, b| (a, -b),
            |a, b| (-a, -b),
            |a, b| (b, a),
            |a, b| (-b, a),
            |a, b| (b, -a),
            |a, b| (-b, -a),
        ]
    } else {
        &[|a, b| (-a, b), |a, b| (a, -b), |a, b| (-a, -b)]
    };
    let mut worst = 0.0f64;
    for idx in 0..g.len() {
        let (i, j) = g.ij(idx);
        let (a, b) = (i as i64 - ci, j as i64 - cj);
        for map in maps {
            let (p, q) = map(a, b);
            let (ii, jj) = (ci + p, cj + q);
            if ii >= 0 && jj >= 0 && (ii as usize) < g.nx && (jj as usize) < g.ny {
                worst = worst.max((field.at(idx) - field.get(ii as usize, jj as usize)).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_field(vals: &[f64], dx: f64) -> ScalarField {
        // three nodes along x, two identical rows
        let grid = Grid2D::new(3, 2, dx, 1.0, 0.0, 0.0).unwrap();
        let mut v = vals.to_vec();
        v.extend_from_slice(vals);
        ScalarField::new(grid, v).unwrap()
    }

    #[test]
    fn upwind_at_local_minimum_is_zero() {
        let f = line_field(&[1.0, 0.0, 1.0], 1.0);
        assert_eq!(upwind_diff(&f, 1, 0, Axis::X), 0.0);
    }

    #[test]
    fn upwind_picks_descent_side() {
        let f = line_field(&[0.0, 1.0, 2.0], 1.0);
        assert_eq!(upwind_diff(&f, 1, 0, Axis::X), -1.0);
        let f = line_field(&[2.0, 1.0, 0.0], 0.5);
        assert_eq!(upwind_diff(&f, 1, 0, Axis::X), -2.0);
    }

    #[test]
    fn upwind_edge_omits_missing_neighbor() {
        let f = line_field(&[0.0, 1.0, 2.0], 1.0);
        assert_eq!(upwind_diff(&f, 2, 0, Axis::X), -1.0);
        assert_eq!(upwind_diff(&f, 0, 0, Axis::X), 0.0);
        // constant along y
        assert_eq!(upwind_diff(&f, 1, 0, Axis::Y), 0.0);
    }

    #[test]
    fn interp_on_node_and_constant_cell() {
        let grid = Grid2D::unit_square(5).unwrap();
        let f = ScalarField::from_fn(grid, |x, y| (3.0 * x).sin() + y * y);
        assert_eq!(interp_value(&f, grid.point(2, 3)).unwrap(), f.get(2, 3));
        let z = ScalarField::constant(grid, 0.0);
        assert_eq!(interp_value(&z, [0.13, 0.77]).unwrap(), 0.0);
    }

    #[test]
    fn interp_midpoint_of_x_varying_cell() {
        let grid = Grid2D::new(2, 2, 1.0, 1.0, 0.0, 0.0).unwrap();
        let f = ScalarField::new(grid, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(interp_value(&f, [0.5, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn interp_rejects_outside_points() {
        let grid = Grid2D::unit_square(5).unwrap();
        let f = ScalarField::constant(grid, 1.0);
        assert!(matches!(interp_value(&f, [1.2, 0.5]), Err(Error::OutOfDomain { .. })));
        assert!(matches!(interp_gradient(&f, [0.5, -0.1]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn gradient_of_linear_fields() {
        let grid = Grid2D::unit_square(11).unwrap();
        let f = ScalarField::from_fn(grid, |x, _| x);
        let g = interp_gradient(&f, [0.33, 0.71]).unwrap();
        assert!((g.gradient[0] - 1.0).abs() < 1e-12 && g.gradient[1].abs() < 1e-12);
        assert!(!g.singular);

        let f = ScalarField::from_fn(grid, |x, y| 2.0 * x + 3.0 * y);
        let g = interp_gradient(&f, [0.91, 0.05]).unwrap();
        assert!((g.gradient[0] - 2.0).abs() < 1e-12);
        assert!((g.gradient[1] - 3.0).abs() < 1e-12);

        let c = ScalarField::constant(grid, 4.0);
        assert!(interp_gradient(&c, [0.5, 0.5]).unwrap().singular);
    }

    #[test]
    fn snapping_picks_nearest_node() {
        let grid = Grid2D::unit_square(11).unwrap();
        assert_eq!(grid.nearest_node([0.34, 0.66]).unwrap(), (3, 7));
        assert!(grid.nearest_node([1.5, 0.0]).is_err());
    }

    #[test]
    fn node_set_rejects_duplicates() {
        let grid = Grid2D::unit_square(11).unwrap();
        assert!(NodeSet::zeros(&grid, vec![(1, 1), (1, 1)]).is_err());
        assert!(NodeSet::zeros(&grid, vec![(11, 1)]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let grid = Grid2D::new(3, 3, 0.5, 0.25, -1.0, 2.0).unwrap();
        let zeros = ScalarField::constant(grid, 0.0);
        write_field(&zeros, &path).unwrap();
        assert_eq!(read_field(&path).unwrap(), zeros);

        let tenth = ScalarField::constant(grid, 0.1);
        write_field(&tenth, &path).unwrap();
        let back = read_field(&path).unwrap();
        assert!(back.values().iter().all(|&v| v == 0.1));
    }

    #[test]
    fn csv_row_count_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "4,4,1,1,0,0\n1,2,3,4\n1,2,3,4\n1,2,3,4\n").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Format { .. })));
        std::fs::write(&path, "2,2,1,1,0,0\n1,2\n1,2,3\n").unwrap();
        match read_field(&path) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn upwind_is_nonpositive_and_monotone(
            l in -5.0f64..5.0, c in -5.0f64..5.0, r in -5.0f64..5.0, bump in 0.0f64..3.0
        ) {
            let base = upwind_diff(&line_field(&[l, c, r], 1.0), 1, 0, Axis::X);
            prop_assert!(base <= 0.0);
            let raised_nb = upwind_diff(&line_field(&[l + bump, c, r], 1.0), 1, 0, Axis::X);
            prop_assert!(raised_nb >= base);
            let raised_center = upwind_diff(&line_field(&[l, c + bump, r], 1.0), 1, 0, Axis::X);
            prop_assert!(raised_center <= base);
        }

        #[test]
        fn interpolation_exact_on_affine(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
            px in 0.0f64..1.0, py in 0.0f64..1.0
        ) {
            let grid = Grid2D::spanning(7, 9, 0.0, 1.0, 0.0, 1.0).unwrap();
            let f = ScalarField::from_fn(grid, |x, y| a + b * x + c * y);
            let v = interp_value(&f, [px, py]).unwrap();
            prop_assert!((v - (a + b * px + c * py)).abs() < 1e-12);
            let g = interp_gradient(&f, [px, py]).unwrap().gradient;
            prop_assert!((g[0] - b).abs() < 1e-10 && (g[1] - c).abs() < 1e-10);
        }

        #[test]
        fn csv_round_trip_is_lossless(vals in proptest::collection::vec(-1e6f64..1e6, 6)) {
            let grid = Grid2D::new(3, 2, 0.1, 0.3, 0.0, 0.0).unwrap();
            let f = ScalarField::new(grid, vals).unwrap();
            let mut buf = Vec::new();
            write_field_to(&f, &mut buf).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("p.csv");
            std::fs::write(&path, &buf).unwrap();
            prop_assert_eq!(read_field(&path).unwrap(), f);
        }
    }

    #[test]
    fn lattice_asymmetry_detects_tilt() {
        let grid = Grid2D::unit_square(21).unwrap();
        let round = ScalarField::from_fn(grid, |x, y| (x - 0.7).hypot(y - 0.5));
        assert!(lattice_asymmetry(&round, (14, 10)) < 1e-12);
        let tilted = ScalarField::from_fn(grid, |x, y| (x - 0.7).hypot(y - 0.5) + 0.1 * y);
        assert!((lattice_asymmetry(&tilted, (14, 10)) - 0.1).abs() < 1e-9);
    }
}
