use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{CochlearFrame, Point, Vector};
use crate::{Error, Result};

/// Clock-face position at half-hour resolution, rendered `"HH:MM"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClockFace {
    hours: u8,
    minutes: u8,
}

impl ClockFace {
    pub fn new(hours: u8, minutes: u8) -> Result<Self> {
        if !(1..=12).contains(&hours) || !(minutes == 0 || minutes == 30) {
            return Err(Error::InvalidParameter(format!(
                "invalid clock position {hours}:{minutes:02}"
            )));
        }
        Ok(ClockFace { hours, minutes })
    }

    /// Rounds a clockwise angle from 12:00 to the nearest half hour.
    pub fn from_degrees(deg: f64) -> Self {
        let half_hours = (deg.rem_euclid(360.0) / 15.0).round() as u32 % 24;
        let hours = (half_hours / 2) as u8;
        ClockFace {
            hours: if hours == 0 { 12 } else { hours },
            minutes: if half_hours % 2 == 1 { 30 } else { 0 },
        }
    }

    pub fn hours(self) -> u8 {
        self.hours
    }

    pub fn minutes(self) -> u8 {
        self.minutes
    }

    /// Clockwise angle from 12:00 in degrees, in `[0, 360)`.
    pub fn degrees(self) -> f64 {
        ((self.hours % 12) as f64 * 30.0) + self.minutes as f64 * 0.5
    }
}

impl fmt::Display for ClockFace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hours, self.minutes)
    }
}

impl std::str::FromStr for ClockFace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("`{s}` is not an HH:MM clock position"));
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        if h.len() != 2 || m.len() != 2 {
            return Err(bad());
        }
        ClockFace::new(h.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

impl Serialize for ClockFace {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClockFace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Clock position of `direction` on a face centred at `center`, seen looking
/// along `view_axis`, with the stapes footplate at 12:00. Hours advance
/// clockwise as seen by that viewer.
pub fn clock_encode(
    frame: &CochlearFrame,
    center: &Point,
    direction: &Vector,
    view_axis: &Vector,
) -> Result<ClockFace> {
    let w = view_axis
        .try_normalize(1e-12)
        .ok_or(Error::DegenerateDirection)?;
    let flatten = |v: Vector| {
        (v - w * v.dot(&w))
            .try_normalize(1e-9)
            .ok_or(Error::DegenerateDirection)
    };
    let reference = flatten(frame.stapes_center - center)?;
    let u = flatten(*direction)?;
    Ok(ClockFace::from_degrees(clockwise_angle(&reference, &u, &w)))
}

/// Angle from `reference` to `u`, clockwise as seen looking along `w`.
pub(crate) fn clockwise_angle(reference: &Vector, u: &Vector, w: &Vector) -> f64 {
    reference
        .cross(u)
        .dot(w)
        .atan2(reference.dot(u))
        .to_degrees()
        .rem_euclid(360.0)
}

/// Angle between the insertion vector and the round-window normal, in
/// `[0, 90]`; 0 means perpendicular to the round-window plane.
pub fn tilt_angle(plan_vector: &Vector, rw_plane_normal: &Vector) -> f64 {
    let c = plan_vector
        .normalize()
        .dot(&rw_plane_normal.normalize())
        .abs()
        .min(1.0);
    c.acos().to_degrees()
}

pub(crate) fn line_plane_intersection(
    origin: &Point,
    dir: &Vector,
    plane_point: &Point,
    normal: &Vector,
) -> Result<Point> {
    let denom = dir.dot(normal);
    if denom.abs() <= 1e-12 * dir.norm() * normal.norm() {
        return Err(Error::NoIntersection);
    }
    let t = (plane_point - origin).dot(normal) / denom;
    Ok(origin + dir * t)
}

/// Signed distance of `marker` past the round-window plane, measured along
/// the unit insertion `vector` from where the trajectory through `entry`
/// crosses that plane. Positive is inside the cochlea.
pub fn base_depth(
    marker: &Point,
    entry: &Point,
    vector: &Vector,
    rw_center: &Point,
    rw_normal: &Vector,
) -> Result<f64> {
    let x = line_plane_intersection(entry, vector, rw_center, rw_normal)?;
    Ok((marker - x).dot(&vector.normalize()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Winding;

    fn frame() -> CochlearFrame {
        CochlearFrame::new(
            Vector::z(),
            Point::new(-3.0, 0.0, 0.0),
            Point::origin(),
            Vector::z(),
            Point::new(0.0, 2.0, 0.0),
            Winding::CounterClockwise,
        )
        .unwrap()
    }

    // Viewed along +z, clockwise from +y runs towards -x.
    fn at(deg: f64) -> Vector {
        let a = deg.to_radians();
        Vector::new(-a.sin(), a.cos(), 0.0)
    }

    #[test]
    fn twelve_and_half_hours() {
        let f = frame();
        let c = Point::origin();
        assert_eq!(
            clock_encode(&f, &c, &at(0.0), &Vector::z())
                .unwrap()
                .to_string(),
            "12:00"
        );
        assert_eq!(
            clock_encode(&f, &c, &at(45.0), &Vector::z())
                .unwrap()
                .to_string(),
            "01:30"
        );
        assert_eq!(
            clock_encode(&f, &c, &at(225.0), &Vector::z())
                .unwrap()
                .to_string(),
            "07:30"
        );
        assert_eq!(
            clock_encode(&f, &c, &at(345.0), &Vector::z())
                .unwrap()
                .to_string(),
            "11:30"
        );
        assert_eq!(
            clock_encode(&f, &c, &at(352.0), &Vector::z())
                .unwrap()
                .to_string(),
            "11:30"
        );
        assert_eq!(
            clock_encode(&f, &c, &at(353.0), &Vector::z())
                .unwrap()
                .to_string(),
            "12:00"
        );
    }

    #[test]
    fn degenerate_projection() {
        let f = frame();
        assert!(matches!(
            clock_encode(&f, &Point::origin(), &Vector::z(), &Vector::z()),
            Err(Error::DegenerateDirection)
        ));
    }

    #[test]
    fn tilt_examples() {
        let n = Vector::z();
        assert_eq!(tilt_angle(&n, &n), 0.0);
        assert!((tilt_angle(&Vector::x(), &n) - 90.0).abs() < 1e-12);
        let a = 35f64.to_radians();
        let v = Vector::new(a.cos(), 0.0, a.sin());
        assert!((tilt_angle(&v, &n) - 55.0).abs() < 1e-9);
    }

    #[test]
    fn depth_examples() {
        let c = Point::origin();
        let n = Vector::z();
        let v = -Vector::z();
        assert_eq!(
            base_depth(&Point::new(0.2, 0.1, 0.0), &c, &v, &c, &n).unwrap(),
            0.0
        );
        assert!(
            (base_depth(&Point::new(0.0, 0.0, 0.5), &c, &v, &c, &n).unwrap() + 0.5).abs() < 1e-12
        );
        assert!(
            (base_depth(&Point::new(0.0, 0.0, -2.0), &c, &v, &c, &n).unwrap() - 2.0).abs() < 1e-12
        );
        assert!(matches!(
            base_depth(&c, &c, &Vector::x(), &c, &n),
            Err(Error::NoIntersection)
        ));
    }

    #[test]
    fn clock_text_round_trip() {
        let c: ClockFace = "07:30".parse().unwrap();
        assert_eq!(c.degrees(), 225.0);
        assert!("7:30".parse::<ClockFace>().is_err());
        assert!("13:00".parse::<ClockFace>().is_err());
        assert_eq!(ClockFace::from_degrees(c.degrees()), c);
    }
}
