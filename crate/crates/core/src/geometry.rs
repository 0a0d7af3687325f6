//! Link geometry between a ground transmitter and a UAV receiver.
//!
//! Positions are projected onto a local east-north-up (ENU) tangent plane
//! centered on the transmitter's ground point using a spherical-Earth
//! equirectangular approximation, which is adequate for flights spanning less
//! than ~10 km.
//!
//! Attitude uses intrinsic Z-Y-X Euler angles (yaw about up, then pitch, then
//! roll) on a right-handed forward-left-up body frame, so the body-to-world
//! rotation is `Rz(yaw) * Ry(pitch) * Rx(roll)`. With this frame a positive
//! pitch lowers the nose and yaw is measured counter-clockwise from east.
//!
//! The tilt angle is `delta = theta - theta_gs`, where `theta` is the elevation
//! of the UAV seen from the transmitter and `theta_gs` is the depression of the
//! transmitter below the body horizontal plane. A level pose gives
//! `delta == 0` exactly; positive `delta` means the body horizontal plane leans
//! toward the transmitter.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Mean Earth radius used by the local projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Geodetic position: latitude and longitude in degrees, altitude in meters
/// above a common ground reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl Geodetic {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self> {
        let g = Self {
            lat_deg,
            lon_deg,
            alt_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(validation(format!("latitude {} outside [-90, 90]", self.lat_deg)));
        }
        if !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(validation(format!("longitude {} outside [-180, 180]", self.lon_deg)));
        }
        if !(self.alt_m >= 0.0) || !self.alt_m.is_finite() {
            return Err(validation(format!("altitude {} must be finite and >= 0", self.alt_m)));
        }
        Ok(())
    }
}

/// Local tangent-plane coordinates in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Enu {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl Enu {
    pub const fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn horizontal_distance(&self, other: &Enu) -> f64 {
        let de = self.east - other.east;
        let dn = self.north - other.north;
        (de * de + dn * dn).sqrt()
    }

    fn minus(&self, other: &Enu) -> [f64; 3] {
        [self.east - other.east, self.north - other.north, self.up - other.up]
    }
}

/// Z-Y-X Euler angles in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
}

impl EulerAngles {
    pub const fn new(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Self {
        Self {
            yaw_deg,
            pitch_deg,
            roll_deg,
        }
    }

    pub const fn level(yaw_deg: f64) -> Self {
        Self::new(yaw_deg, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-180.0..180.0).contains(&self.yaw_deg) {
            return Err(validation(format!("yaw {} outside [-180, 180)", self.yaw_deg)));
        }
        if !(-90.0..=90.0).contains(&self.pitch_deg) {
            return Err(validation(format!("pitch {} outside [-90, 90]", self.pitch_deg)));
        }
        if !(-180.0..180.0).contains(&self.roll_deg) {
            return Err(validation(format!("roll {} outside [-180, 180)", self.roll_deg)));
        }
        Ok(())
    }

    /// Body-to-world rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`, row-major.
    pub fn body_to_world(&self) -> [[f64; 3]; 3] {
        let (sa, ca) = self.yaw_deg.to_radians().sin_cos();
        let (sb, cb) = self.pitch_deg.to_radians().sin_cos();
        let (sg, cg) = self.roll_deg.to_radians().sin_cos();
        [
            [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
            [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
            [-sb, cb * sg, cb * cg],
        ]
    }

    pub fn rotate_to_world(&self, body: [f64; 3]) -> [f64; 3] {
        let r = self.body_to_world();
        std::array::from_fn(|i| r[i][0] * body[0] + r[i][1] * body[1] + r[i][2] * body[2])
    }

    pub fn rotate_to_body(&self, world: [f64; 3]) -> [f64; 3] {
        let r = self.body_to_world();
        std::array::from_fn(|i| r[0][i] * world[0] + r[1][i] * world[1] + r[2][i] * world[2])
    }
}

/// Wraps an angle into `[-180, 180)`.
pub fn wrap_deg(angle: f64) -> f64 {
    let w = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// One timestamped UAV observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub time_s: f64,
    pub position: Geodetic,
    pub attitude: EulerAngles,
    pub rsrp_dbm: f64,
}

impl MeasurementSample {
    pub fn validate(&self) -> Result<()> {
        if !self.time_s.is_finite() {
            return Err(validation("timestamp is not finite"));
        }
        if !self.rsrp_dbm.is_finite() {
            return Err(validation("rsrp is not finite"));
        }
        self.position.validate()?;
        self.attitude.validate()
    }
}

/// Per-sample geometry relative to the transmitter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// UAV position in the transmitter-centered ENU frame.
    pub position: Enu,
    pub theta_deg: f64,
    pub theta_gs_deg: f64,
    pub delta_deg: f64,
    pub d2d_m: f64,
    pub d3d_m: f64,
}

impl LinkGeometry {
    /// Horizontal distance between the UAV positions of two samples.
    pub fn horizontal_distance_to(&self, other: &LinkGeometry) -> f64 {
        self.position.horizontal_distance(&other.position)
    }
}

/// Projects `position` onto the tangent plane at `origin`.
pub fn project_enu(position: &Geodetic, origin: &Geodetic) -> Result<Enu> {
    position.validate()?;
    origin.validate()?;
    let lat0 = origin.lat_deg.to_radians();
    let north = EARTH_RADIUS_M * (position.lat_deg - origin.lat_deg).to_radians();
    let east = EARTH_RADIUS_M * lat0.cos() * (position.lon_deg - origin.lon_deg).to_radians();
    Ok(Enu::new(east, north, position.alt_m - origin.alt_m))
}

/// Inverse of [`project_enu`].
pub fn unproject_enu(enu: &Enu, origin: &Geodetic) -> Geodetic {
    let lat0 = origin.lat_deg.to_radians();
    Geodetic {
        lat_deg: origin.lat_deg + (enu.north / EARTH_RADIUS_M).to_degrees(),
        lon_deg: origin.lon_deg + (enu.east / (EARTH_RADIUS_M * lat0.cos())).to_degrees(),
        alt_m: origin.alt_m + enu.up,
    }
}

/// Elevation of `uav` seen from `tx`, in degrees; negative below the
/// transmitter.
pub fn compute_elevation(uav: &Enu, tx: &Enu) -> Result<f64> {
    let d2d = uav.horizontal_distance(tx);
    let dup = uav.up - tx.up;
    if d2d == 0.0 && dup == 0.0 {
        return Err(Error::UndefinedGeometry("UAV and transmitter coincide".into()));
    }
    Ok(dup.atan2(d2d).to_degrees())
}

/// Full link geometry including the body-frame tilt angle.
pub fn compute_tilt(uav: &Enu, attitude: &EulerAngles, tx: &Enu) -> Result<LinkGeometry> {
    attitude.validate()?;
    let theta = compute_elevation(uav, tx)?;
    let d2d = uav.horizontal_distance(tx);
    let dup = uav.up - tx.up;
    let d3d = (d2d * d2d + dup * dup).sqrt();

    // Line of sight UAV -> Tx and the body up axis, both in world axes.
    let los = tx.minus(uav);
    let up_b = attitude.rotate_to_world([0.0, 0.0, 1.0]);
    let along_up = los[0] * up_b[0] + los[1] * up_b[1] + los[2] * up_b[2];
    let h = [
        los[0] - along_up * up_b[0],
        los[1] - along_up * up_b[1],
        los[2] - along_up * up_b[2],
    ];
    let horizontal = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let theta_gs = (-along_up).atan2(horizontal).to_degrees();

    Ok(LinkGeometry {
        position: *uav,
        theta_deg: theta,
        theta_gs_deg: theta_gs,
        delta_deg: theta - theta_gs,
        d2d_m: d2d,
        d3d_m: d3d,
    })
}

/// Transmitter site: ground point (ENU origin) plus antenna height.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TxSite {
    pub ground: Geodetic,
    #[serde(default = "default_antenna_height")]
    pub antenna_height_m: f64,
}

fn default_antenna_height() -> f64 {
    1.5
}

impl TxSite {
    pub fn new(ground: Geodetic, antenna_height_m: f64) -> Self {
        Self {
            ground,
            antenna_height_m,
        }
    }

    pub fn antenna_enu(&self) -> Enu {
        Enu::new(0.0, 0.0, self.antenna_height_m)
    }

    pub fn to_enu(&self, position: &Geodetic) -> Result<Enu> {
        project_enu(position, &self.ground)
    }

    /// Geometry of a measurement relative to this site.
    pub fn locate(&self, sample: &MeasurementSample) -> Result<LinkGeometry> {
        let uav = self.to_enu(&sample.position)?;
        compute_tilt(&uav, &sample.attitude, &self.antenna_enu())
    }
}
