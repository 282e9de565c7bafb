use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::Point;

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// Inputs are already meters; `lon` is x and `lat` is y.
    AlreadyPlanar,
    Equirectangular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    mode: ProjectionMode,
    origin_lat: f64,
    origin_lon: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("origin latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("origin longitude {0} outside [-180, 180]")]
    Longitude(f64),
}

impl ProjectionSpec {
    pub fn planar() -> Self {
        ProjectionSpec {
            mode: ProjectionMode::AlreadyPlanar,
            origin_lat: 0.0,
            origin_lon: 0.0,
        }
    }

    pub fn equirectangular(origin_lat: f64, origin_lon: f64) -> Result<Self, ProjectionError> {
        if !(-90.0..=90.0).contains(&origin_lat) {
            return Err(ProjectionError::Latitude(origin_lat));
        }
        if !(-180.0..=180.0).contains(&origin_lon) {
            return Err(ProjectionError::Longitude(origin_lon));
        }
        Ok(ProjectionSpec {
            mode: ProjectionMode::Equirectangular,
            origin_lat,
            origin_lon,
        })
    }

    pub fn mode(&self) -> ProjectionMode {
        self.mode
    }

    pub fn origin(&self) -> (f64, f64) {
        (self.origin_lat, self.origin_lon)
    }
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec::planar()
    }
}

pub fn project(lat: f64, lon: f64, proj: &ProjectionSpec) -> Point {
    match proj.mode {
        ProjectionMode::AlreadyPlanar => Point::new(lon, lat),
        ProjectionMode::Equirectangular => {
            let to_rad = PI / 180.0;
            let x = EARTH_RADIUS_M
                * (lon - proj.origin_lon)
                * to_rad
                * (proj.origin_lat * to_rad).cos();
            let y = EARTH_RADIUS_M * (lat - proj.origin_lat) * to_rad;
            Point::new(x, y)
        }
    }
}

/// Inverse of [`project`], returning `(lat, lon)`.
pub fn unproject(p: Point, proj: &ProjectionSpec) -> (f64, f64) {
    match proj.mode {
        ProjectionMode::AlreadyPlanar => (p.y, p.x),
        ProjectionMode::Equirectangular => {
            let to_deg = 180.0 / PI;
            let lat = proj.origin_lat + p.y / EARTH_RADIUS_M * to_deg;
            let lon = proj.origin_lon
                + p.x / (EARTH_RADIUS_M * (proj.origin_lat * PI / 180.0).cos()) * to_deg;
            (lat, lon)
        }
    }
}
