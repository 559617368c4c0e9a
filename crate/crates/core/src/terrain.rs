//! Coefficient fields derived from an elevation raster.
//!
//! Slope sets the speed in each mode through a linear ramp that bottoms out
//! at the minimum speed, and the local roughness (RMS height after removing
//! the best-fit plane of a small window) sets the partial-breakdown rate.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{node_gradient, write_field, Grid2D, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerrainParams {
    /// Slope in degrees at which the mode-1 speed reaches its minimum.
    pub critical_slope: f64,
    pub max_speed: f64,
    pub min_speed: f64,
    /// Mode 2 divides both the critical slope and the maximum speed by this.
    pub mode2_derating: f64,
    /// Roughness window width in nodes (odd).
    pub roughness_window: usize,
    /// Rate is `roughness^2 / roughness_scale`.
    pub roughness_scale: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            critical_slope: 20.0,
            max_speed: 200.0,
            min_speed: 1.0,
            mode2_derating: 2.0,
            roughness_window: 5,
            roughness_scale: 5000.0,
        }
    }
}

impl TerrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.min_speed > 0.0 && self.min_speed < self.max_speed) {
            return bad(format!(
                "speeds need 0 < min_speed < max_speed, got {} and {}",
                self.min_speed, self.max_speed
            ));
        }
        if !(self.critical_slope > 0.0) {
            return bad(format!("critical_slope must be positive, got {}", self.critical_slope));
        }
        if !(self.mode2_derating >= 1.0) {
            return bad(format!("mode2_derating must be at least 1, got {}", self.mode2_derating));
        }
        if self.roughness_window < 3 || self.roughness_window % 2 == 0 {
            return bad(format!("roughness_window must be odd and at least 3, got {}", self.roughness_window));
        }
        if !(self.roughness_scale > 0.0) {
            return bad(format!("roughness_scale must be positive, got {}", self.roughness_scale));
        }
        if self.max_speed / self.mode2_derating <= self.min_speed {
            return bad("derated max_speed must stay above min_speed".into());
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: Self = serde_json::from_str(&text)
            .map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

/// Slope angle in degrees, `atan |grad z|`, central differences inside the grid.
pub fn slope_field(elevation: &ScalarField) -> ScalarField {
    let grid = *elevation.grid();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let g = node_gradient(elevation, i, j);
            g[0].hypot(g[1]).atan().to_degrees()
        })
        .collect();
    ScalarField::new(grid, values).expect("slope field has the elevation grid size")
}

/// Speed in `mode` (1 or 2) for a slope field in degrees.
pub fn speed_from_slope(slope: &ScalarField, params: &TerrainParams, mode: u8) -> Result<ScalarField> {
    params.validate()?;
    let derate = match mode {
        1 => 1.0,
        2 => params.mode2_derating,
        _ => return Err(Error::InvalidProblem(format!("mode must be 1 or 2, got {mode}"))),
    };
    if slope.values().iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidProblem("slope must be nonnegative".into()));
    }
    let critical = params.critical_slope / derate;
    let top = params.max_speed / derate;
    let fmin = params.min_speed;
    Ok(slope.map(|s| if s <= critical { top - (top - fmin) / critical * s } else { fmin }))
}

/// RMS of the residual heights in a `window x window` neighbourhood after
/// subtracting its least-squares plane. Windows shrink at the edges.
pub fn roughness_field(elevation: &ScalarField, window: usize) -> Result<ScalarField> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidProblem(format!("window must be odd and at least 3, got {window}")));
    }
    let grid = *elevation.grid();
    if grid.nx < 2 || grid.ny < 2 {
        return Err(Error::InvalidProblem("roughness needs at least two nodes per axis".into()));
    }
    let half = window / 2;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.ij(idx);
            let is = i.saturating_sub(half)..=(i + half).min(grid.nx - 1);
            let js = j.saturating_sub(half)..=(j + half).min(grid.ny - 1);
            detrended_rms(elevation, is, js)
        })
        .collect();
    ScalarField::new(grid, values)
}

fn detrended_rms(z: &ScalarField, is: std::ops::RangeInclusive<usize>, js: std::ops::RangeInclusive<usize>) -> f64 {
    let g = z.grid();
    let pts: Vec<(f64, f64, f64)> = js
        .flat_map(|j| is.clone().map(move |i| (i, j)))
        .map(|(i, j)| (g.x(i), g.y(j), z.get(i, j)))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy, sz) = pts.iter().fold((0.0, 0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2));
    let (mx, my, mz) = (sx / m, sy / m, sz / m);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, h) in &pts {
        let (x, y, h) = (x - mx, y - my, h - mz);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxz += x * h;
        syz += y * h;
    }
    let det = sxx * syy - sxy * sxy;
    let (b, c) = ((syy * sxz - sxy * syz) / det, (sxx * syz - sxy * sxz) / det);
    let ss: f64 = pts
        .iter()
        .map(|&(x, y, h)| (h - mz - b * (x - mx) - c * (y - my)).powi(2))
        .sum();
    (ss / m).sqrt()
}

/// Partial-breakdown rate `roughness^2 / scale`.
pub fn breakdown_rate(roughness: &ScalarField, scale: f64) -> Result<ScalarField> {
    if !(scale > 0.0) {
        return Err(Error::InvalidProblem(format!("roughness scale must be positive, got {scale}")));
    }
    if roughness.values().iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::InvalidProblem("roughness must be nonnegative".into()));
    }
    Ok(roughness.map(|r| r * r / scale))
}

/// An ESRI ASCII grid. Nodes sit at cell centres and row `j = 0` is the
/// southernmost row.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationRaster {
    pub grid: Grid2D,
    values: Vec<f64>,
    nodata: Option<f64>,
}

impl ElevationRaster {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_esri(&text, path)
    }

    pub fn is_nodata(&self, i: usize, j: usize) -> bool {
        self.nodata.is_some_and(|nd| self.values[self.grid.index(i, j)] == nd)
    }

    /// Elevation over the nodes inside `bounds = [xmin, xmax, ymin, ymax]`,
    /// or the whole raster. NODATA anywhere in that region is an error.
    pub fn elevation(&self, bounds: Option<[f64; 4]>) -> Result<ScalarField> {
        let g = self.grid;
        let (i0, i1, j0, j1) = match bounds {
            None => (0, g.nx - 1, 0, g.ny - 1),
            Some([x0, x1, y0, y1]) => {
                let first = |lo: f64, min: f64, h: f64| ((lo - min) / h - 1e-9).ceil().max(0.0) as usize;
                let last = |hi: f64, min: f64, h: f64, n: usize| {
                    (((hi - min) / h + 1e-9).floor().max(-1.0) as isize).min(n as isize - 1)
                };
                let (i0, j0) = (first(x0, g.xmin, g.dx), first(y0, g.ymin, g.dy));
                let (i1, j1) = (last(x1, g.xmin, g.dx, g.nx), last(y1, g.ymin, g.dy, g.ny));
                if i1 < i0 as isize + 1 || j1 < j0 as isize + 1 {
                    return Err(Error::InvalidProblem(format!(
                        "region [{x0}, {x1}] x [{y0}, {y1}] holds fewer than two raster nodes per axis"
                    )));
                }
                (i0, i1 as usize, j0, j1 as usize)
            }
        };
        let grid = Grid2D::new(i1 - i0 + 1, j1 - j0 + 1, g.dx, g.dy, g.x(i0), g.y(j0))?;
        let mut values = Vec::with_capacity(grid.len());
        for j in j0..=j1 {
            for i in i0..=i1 {
                if self.is_nodata(i, j) {
                    return Err(Error::InvalidProblem(format!(
                        "NODATA elevation at ({:.3}, {:.3}) inside the planning region",
                        g.x(i),
                        g.y(j)
                    )));
                }
                values.push(self.values[g.index(i, j)]);
            }
        }
        ScalarField::new(grid, values)
    }
}

fn parse_esri(text: &str, path: &Path) -> Result<ElevationRaster> {
    let mut header = std::collections::HashMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((_, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let (k, line) = lines.next().unwrap();
        let value = parts
            .next()
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::format(path, k + 1, format!("header entry '{}' has no numeric value", line.trim())))?;
        header.insert(key.to_ascii_lowercase(), (value, k + 1));
    }
    let get = |key: &str| header.get(key).map(|v| v.0);
    let need = |key: &str| get(key).ok_or_else(|| Error::format(path, 1, format!("missing header entry '{key}'")));
    let count = |key: &str| -> Result<usize> {
        let v = need(key)?;
        if v < 1.0 || v.fract() != 0.0 {
            return Err(Error::format(path, header[key].1, format!("{key} must be a positive integer")));
        }
        Ok(v as usize)
    };
    let ncols = count("ncols")?;
    let nrows = count("nrows")?;
    let (dx, dy) = match (get("cellsize"), get("dx"), get("dy")) {
        (Some(c), _, _) => (c, c),
        (None, Some(dx), Some(dy)) => (dx, dy),
        _ => return Err(Error::format(path, 1, "missing header entry 'cellsize'")),
    };
    let x0 = match (get("xllcenter"), get("xllcorner")) {
        (Some(c), _) => c,
        (None, Some(c)) => c + 0.5 * dx,
        _ => return Err(Error::format(path, 1, "missing header entry 'xllcorner'")),
    };
    let y0 = match (get("yllcenter"), get("yllcorner")) {
        (Some(c), _) => c,
        (None, Some(c)) => c + 0.5 * dy,
        _ => return Err(Error::format(path, 1, "missing header entry 'yllcorner'")),
    };
    let grid = Grid2D::new(ncols, nrows, dx, dy, x0, y0).map_err(|e| Error::format(path, 1, e.to_string()))?;

    let mut rows_top_down = Vec::with_capacity(grid.len());
    let mut last_line = 0;
    for (k, line) in lines {
        last_line = k + 1;
        for token in line.split_whitespace() {
            let v = token
                .parse::<f64>()
                .map_err(|e| Error::format(path, k + 1, format!("bad elevation '{token}': {e}")))?;
            rows_top_down.push(v);
        }
    }
    if rows_top_down.len() != grid.len() {
        return Err(Error::format(
            path,
            last_line,
            format!("expected {} elevations, found {}", grid.len(), rows_top_down.len()),
        ));
    }
    let values = rows_top_down
        .chunks(ncols)
        .rev()
        .flatten()
        .copied()
        .collect();
    Ok(ElevationRaster {
        grid,
        values,
        nodata: get("nodata_value"),
    })
}

/// Every field produced from one elevation raster.
#[derive(Debug, Clone)]
pub struct TerrainFields {
    pub slope: ScalarField,
    pub speed1: ScalarField,
    pub speed2: ScalarField,
    pub roughness: ScalarField,
    pub partial_rate: ScalarField,
}

impl TerrainFields {
    pub fn derive(elevation: &ScalarField, params: &TerrainParams) -> Result<Self> {
        params.validate()?;
        let slope = slope_field(elevation);
        let roughness = roughness_field(elevation, params.roughness_window)?;
        Ok(Self {
            speed1: speed_from_slope(&slope, params, 1)?,
            speed2: speed_from_slope(&slope, params, 2)?,
            partial_rate: breakdown_rate(&roughness, params.roughness_scale)?,
            slope,
            roughness,
        })
    }

    /// Writes `f1.csv`, `f2.csv`, `phi.csv`, `sigma.csv`, `rho.csv` and
    /// `terrain.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, params: &TerrainParams, source: Option<&Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, field) in [
            ("f1.csv", &self.speed1),
            ("f2.csv", &self.speed2),
            ("phi.csv", &self.partial_rate),
            ("sigma.csv", &self.slope),
            ("rho.csv", &self.roughness),
        ] {
            write_field(field, dir.join(name))?;
        }
        let g = self.slope.grid();
        let meta = TerrainMetadata {
            source: source.map(Path::to_path_buf),
            nx: g.nx,
            ny: g.ny,
            dx: g.dx,
            dy: g.dy,
            xmin: g.xmin,
            ymin: g.ymin,
            roughness: "rms of residuals after removing the least-squares plane of each window",
            params: *params,
        };
        let path = dir.join("terrain.json");
        let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
        fs::write(&path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Serialize)]
struct TerrainMetadata {
    source: Option<PathBuf>,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    xmin: f64,
    ymin: f64,
    roughness: &'static str,
    params: TerrainParams,
}
