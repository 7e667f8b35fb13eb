//! WGS-84 coordinates, a local planar projection, and survey-grid discretization.
//!
//! Scenes are small (a few kilometres at most), so every planar computation in
//! the crate runs on an equirectangular projection anchored at the first
//! region corner. Distances in that plane are plain Euclidean metres.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used by the local projection, in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Largest lat/lon offset from the projection origin that [`project`] accepts.
pub const MAX_PROJECTION_OFFSET_DEG: f64 = 1.0;

/// Corner edges must be orthogonal up to this absolute cosine.
pub const ORTHOGONALITY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("point ({lat}, {lon}) is more than 1 degree from the projection origin")]
    OutOfProjectionRange { lat: f64, lon: f64 },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid spacing {0}: must be a positive number of metres")]
    InvalidSpacing(f64),
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
}

/// A WGS-84 position with altitude above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Self {
        Self { lat, lon, alt }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::InvalidCoordinate(format!("lat {} outside [-90, 90]", self.lat)));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::InvalidCoordinate(format!("lon {} outside [-180, 180]", self.lon)));
        }
        if !self.alt.is_finite() || self.alt < 0.0 {
            return Err(GeoError::InvalidCoordinate(format!("alt {} is negative", self.alt)));
        }
        Ok(())
    }
}

/// Metres east (`x`) and north (`y`) of a projection origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPoint {
    pub x: f64,
    pub y: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &LocalPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Equirectangular projection of `p` into the plane tangent at `origin`.
pub fn project(origin: &GeoPoint, p: &GeoPoint) -> Result<LocalPoint, GeoError> {
    let dlat = p.lat - origin.lat;
    let dlon = p.lon - origin.lon;
    if !(dlat.abs() < MAX_PROJECTION_OFFSET_DEG && dlon.abs() < MAX_PROJECTION_OFFSET_DEG) {
        return Err(GeoError::OutOfProjectionRange { lat: p.lat, lon: p.lon });
    }
    Ok(LocalPoint {
        x: EARTH_RADIUS_M * dlon.to_radians() * origin.lat.to_radians().cos(),
        y: EARTH_RADIUS_M * dlat.to_radians(),
    })
}

/// Inverse of [`project`]. The returned point carries `alt`.
pub fn unproject(origin: &GeoPoint, p: &LocalPoint, alt: f64) -> GeoPoint {
    let lat = origin.lat + (p.y / EARTH_RADIUS_M).to_degrees();
    let lon = origin.lon + (p.x / (EARTH_RADIUS_M * origin.lat.to_radians().cos())).to_degrees();
    GeoPoint { lat, lon, alt }
}

/// The survey lattice derived from a four-corner region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub corners: [GeoPoint; 4],
    pub spacing_m: f64,
    pub points: Vec<GeoPoint>,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    /// The projection origin shared by every planar computation on this grid.
    pub fn origin(&self) -> &GeoPoint {
        &self.corners[0]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid points projected around [`GridSpec::origin`].
    pub fn local_points(&self) -> Vec<LocalPoint> {
        let origin = self.origin();
        self.points
            .iter()
            .map(|p| {
                project(origin, p).expect("grid points lie within the projection range of their own corner")
            })
            .collect()
    }

    /// Lattice position `(row, col)` of the point at serpentine index `index`.
    pub fn lattice_position(&self, index: usize) -> (usize, usize) {
        let row = index / self.cols;
        let offset = index % self.cols;
        let col = if row % 2 == 0 { offset } else { self.cols - 1 - offset };
        (row, col)
    }
}

/// Discretizes the rectangle `c0,c1,c2,c3` into a serpentine lattice.
///
/// `c0→c1` spans the columns and `c0→c3` the rows. Counts are rounded up so
/// the realized spacing never exceeds `spacing_m`.
pub fn discretize_region(corners: &[GeoPoint; 4], spacing_m: f64, altitude_m: f64) -> Result<GridSpec, GeoError> {
    if !spacing_m.is_finite() || spacing_m <= 0.0 {
        return Err(GeoError::InvalidSpacing(spacing_m));
    }
    for (i, c) in corners.iter().enumerate() {
        c.validate()
            .map_err(|e| GeoError::InvalidRegion(format!("corner c{i}: {e}")))?;
    }
    let origin = corners[0];
    let mut local = [LocalPoint::ORIGIN; 4];
    for (i, c) in corners.iter().enumerate().skip(1) {
        local[i] = project(&origin, c)
            .map_err(|_| GeoError::InvalidRegion(format!("corner c{i} is too far from c0")))?;
    }

    let u = local[1];
    let v = local[3];
    let (u_len, v_len) = (u.norm(), v.norm());
    if u_len <= 0.0 || v_len <= 0.0 {
        return Err(GeoError::InvalidRegion("zero-length edge".into()));
    }
    let cosine = (u.x * v.x + u.y * v.y) / (u_len * v_len);
    if cosine.abs() > ORTHOGONALITY_TOLERANCE {
        return Err(GeoError::InvalidRegion(format!(
            "edges c0→c1 and c0→c3 are not orthogonal (|cos| = {:.3})",
            cosine.abs()
        )));
    }
    let opposite = LocalPoint::new(u.x + v.x, u.y + v.y);
    let gap = local[2].distance(&opposite);
    if gap > ORTHOGONALITY_TOLERANCE * u_len.max(v_len) {
        return Err(GeoError::InvalidRegion(format!(
            "corner c2 is {gap:.1} m away from the rectangle completion of c0, c1, c3"
        )));
    }

    let cols = cell_count(u_len, spacing_m) + 1;
    let rows = cell_count(v_len, spacing_m) + 1;
    let mut points = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        let fr = row as f64 / (rows - 1) as f64;
        for offset in 0..cols {
            let col = if row % 2 == 0 { offset } else { cols - 1 - offset };
            let fc = col as f64 / (cols - 1) as f64;
            let p = LocalPoint::new(u.x * fc + v.x * fr, u.y * fc + v.y * fr);
            points.push(unproject(&origin, &p, altitude_m));
        }
    }

    Ok(GridSpec {
        corners: *corners,
        spacing_m,
        points,
        rows,
        cols,
    })
}

/// Relative slack absorbed before rounding up, so an edge that projects to
/// 100.0000001 m at 50 m spacing still gets two cells.
const CELL_ROUNDING_SLACK: f64 = 1e-9;

fn cell_count(edge_m: f64, spacing_m: f64) -> usize {
    ((edge_m / spacing_m) * (1.0 - CELL_ROUNDING_SLACK)).ceil().max(1.0) as usize
}

/// Builds the four corners of an axis-aligned `width × height` metre rectangle
/// whose first corner is `origin`.
pub fn rectangle_corners(origin: GeoPoint, width_m: f64, height_m: f64) -> [GeoPoint; 4] {
    let alt = origin.alt;
    [
        origin,
        unproject(&origin, &LocalPoint::new(width_m, 0.0), alt),
        unproject(&origin, &LocalPoint::new(width_m, height_m), alt),
        unproject(&origin, &LocalPoint::new(0.0, height_m), alt),
    ]
}
