//! JSON parameter records (`schema_version = 1`).
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "units": "meters",
//!   "eps": [0.5, 0.8],
//!   "scale": [0.05, 0.05, 0.1],
//!   "rotation": [1.0, 0.0, 0.0, 0.0],
//!   "translation": [0.0, 0.0, 0.6],
//!   "shear": [0.0, 0.0, 0.0],
//!   "category_id": 13
//! }
//! ```
//!
//! `rotation` is a unit quaternion in `(w, x, y, z)` order. On input it may be
//! replaced by `euler_xyz: [rx, ry, rz]` (radians, intrinsic X then Y then Z,
//! i.e. `Rx * Ry * Rz`). Output always uses the quaternion with `w >= 0`.
//! `shear` holds the `(xy, xz, yz)` off-diagonal entries of the symmetric
//! scale factor and is only written when present.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::affine::{symmetric_from, AffinePose};
use crate::error::{Error, Result};
use crate::superquadric::{sample_unit_surface, Superquadric};
use crate::cloud::PointCloud;
use crate::metrics::CameraIntrinsics;

pub const SCHEMA_VERSION: u32 = 1;

/// Deviation from unit norm tolerated in quaternions read from disk before
/// they are normalized.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

const PARAMS_KEYS: &[&str] = &[
    "schema_version",
    "units",
    "eps",
    "scale",
    "rotation",
    "euler_xyz",
    "translation",
    "shear",
    "category_id",
];

/// A parameter record as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsFile {
    pub eps: [f64; 2],
    pub scale: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub shear: Option<Vector3<f64>>,
    pub category_id: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Raw {
    schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<String>,
    eps: [f64; 2],
    scale: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    euler_xyz: Option<[f64; 3]>,
    translation: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shear: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_id: Option<usize>,
}

/// Parses JSON and, in strict mode, rejects keys outside `allowed`.
pub(crate) fn parse_json_object<T: serde::de::DeserializeOwned>(text: &str, allowed: &[&str], strict: bool) -> Result<T> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(Error::parse(1, "expected a JSON object"));
    };
    if strict {
        if let Some(key) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Format(format!("unknown field '{key}'")));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))
}

/// Reads pinhole intrinsics `{"fx": .., "fy": .., "cx": .., "cy": ..}` in pixels.
pub fn parse_intrinsics(text: &str, strict: bool) -> Result<CameraIntrinsics> {
    parse_json_object(text, &["fx", "fy", "cx", "cy"], strict)
}

/// Intrinsic `X-Y-Z` Euler angles to a quaternion (`Rx * Ry * Rz`).
pub fn quaternion_from_euler_xyz(angles: [f64; 3]) -> UnitQuaternion<f64> {
    let [rx, ry, rz] = angles;
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), rx)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), ry)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), rz)
}

fn finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Format(format!("'{name}' has non-finite entries")))
    }
}

impl ParamsFile {
    pub fn from_superquadric(sq: &Superquadric) -> Self {
        Self {
            eps: [sq.eps1(), sq.eps2()],
            scale: sq.scale(),
            rotation: sq.rotation(),
            translation: sq.translation(),
            shear: None,
            category_id: None,
        }
    }

    /// Record of an affine pose; the rotation matrix must be proper.
    pub fn from_affine(eps1: f64, eps2: f64, pose: &AffinePose) -> Self {
        Self {
            eps: [eps1, eps2],
            scale: pose.scale,
            rotation: UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(pose.rotation)),
            translation: pose.translation,
            shear: Some(pose.shear),
            category_id: None,
        }
    }

    pub fn from_json(text: &str, strict: bool) -> Result<Self> {
        let raw: Raw = parse_json_object(text, PARAMS_KEYS, strict)?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        if let Some(units) = &raw.units {
            if units != "meters" {
                return Err(Error::Format(format!("unsupported units '{units}'; lengths must be in meters")));
            }
        }
        finite("eps", &raw.eps)?;
        finite("scale", &raw.scale)?;
        finite("translation", &raw.translation)?;
        let rotation = match (raw.rotation, raw.euler_xyz) {
            (Some(_), Some(_)) => return Err(Error::Format("give either 'rotation' or 'euler_xyz', not both".into())),
            (None, None) => return Err(Error::Format("missing 'rotation' (or 'euler_xyz')".into())),
            (Some([w, x, y, z]), None) => {
                finite("rotation", &[w, x, y, z])?;
                let q = Quaternion::new(w, x, y, z);
                if (q.norm() - 1.0).abs() > QUATERNION_NORM_TOL {
                    return Err(Error::Format(format!("rotation quaternion has norm {}, expected 1", q.norm())));
                }
                if (q.norm() - 1.0).abs() <= 1e-12 {
                    // already unit to rounding; keep the written bits so records re-serialize identically
                    UnitQuaternion::new_unchecked(q)
                } else {
                    UnitQuaternion::from_quaternion(q)
                }
            }
            (None, Some(angles)) => {
                finite("euler_xyz", &angles)?;
                quaternion_from_euler_xyz(angles)
            }
        };
        let shear = match raw.shear {
            Some(s) => {
                finite("shear", &s)?;
                Some(Vector3::from(s))
            }
            None => None,
        };
        let record = Self {
            eps: raw.eps,
            scale: Vector3::from(raw.scale),
            rotation,
            translation: Vector3::from(raw.translation),
            shear,
            category_id: raw.category_id,
        };
        // reject records that do not describe a valid primitive
        Superquadric::new(record.eps[0], record.eps[1], record.scale, record.rotation, record.translation)
            .map_err(|e| Error::Format(e.to_string()))?;
        if record.shear.is_some() {
            record.matrix().map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(record)
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let q = self.rotation.quaternion();
        let q = if q.w < 0.0 { -q } else { *q };
        let raw = Raw {
            schema_version: SCHEMA_VERSION,
            units: Some("meters".into()),
            eps: self.eps,
            scale: self.scale.into(),
            rotation: Some([q.w, q.i, q.j, q.k]),
            euler_xyz: None,
            translation: self.translation.into(),
            shear: self.shear.map(Into::into),
            category_id: self.category_id,
        };
        let mut text = serde_json::to_string_pretty(&raw).expect("parameter record serializes");
        text.push('\n');
        text
    }

    /// True when shear is absent or exactly zero.
    pub fn is_unsheared(&self) -> bool {
        self.shear.is_none_or(|s| s == Vector3::zeros())
    }

    /// The record as a plain superquadric; fails when it carries shear.
    pub fn superquadric(&self) -> Result<Superquadric> {
        if !self.is_unsheared() {
            return Err(Error::invalid("record carries shear and is not a plain superquadric"));
        }
        Superquadric::new(self.eps[0], self.eps[1], self.scale, self.rotation, self.translation)
    }

    pub fn affine(&self) -> Result<AffinePose> {
        AffinePose::new(
            self.rotation.to_rotation_matrix().into_inner(),
            self.scale,
            self.shear.unwrap_or_else(Vector3::zeros),
            self.translation,
        )
    }

    /// Combined `R * P` mapping unit-template points into the world frame
    /// (translation excluded). Fails when `P` is not positive definite.
    pub fn matrix(&self) -> Result<Matrix3<f64>> {
        let p = symmetric_from(&self.scale, &self.shear.unwrap_or_else(Vector3::zeros));
        if p.symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::invalid("scale/shear factor is not positive definite"));
        }
        Ok(self.rotation.to_rotation_matrix().into_inner() * p)
    }

    /// `n` surface samples of the record, with shear applied when present.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud> {
        if self.is_unsheared() {
            return self.superquadric()?.sample_surface(n, seed);
        }
        let m = self.matrix()?;
        let unit = sample_unit_surface(self.eps[0], self.eps[1], n, seed)?;
        Ok(PointCloud::from_vec_unchecked(unit.iter().map(|u| m * u + self.translation).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const SPHERE: &str = r#"{"schema_version": 1, "eps": [1, 1], "scale": [0.1, 0.1, 0.1],
        "rotation": [1, 0, 0, 0], "translation": [0, 0, 0.6]}"#;

    #[test]
    fn minimal_record() {
        let p = ParamsFile::from_json(SPHERE, true).unwrap();
        assert_eq!(p.eps, [1.0, 1.0]);
        assert_eq!(p.translation, Vector3::new(0.0, 0.0, 0.6));
        assert!(p.shear.is_none() && p.category_id.is_none());
        assert!(p.superquadric().is_ok());
    }

    #[test]
    fn round_trip_is_exact() {
        let sq = Superquadric::new(
            0.3,
            1.4,
            Vector3::new(0.012, 0.05, 0.2),
            UnitQuaternion::from_euler_angles(0.4, -1.1, 2.9),
            Vector3::new(-0.1, 1.0 / 3.0, 0.75),
        )
        .unwrap();
        let mut p = ParamsFile::from_superquadric(&sq);
        p.shear = Some(Vector3::new(0.001, 0.0, -0.002));
        p.category_id = Some(7);
        let text = p.to_json();
        let back = ParamsFile::from_json(&text, true).unwrap();
        assert_eq!(back.eps, p.eps);
        assert_eq!(back.scale, p.scale);
        assert_eq!(back.shear, p.shear);
        assert_eq!(back.category_id, Some(7));
        assert_relative_eq!(back.rotation.angle_to(&p.rotation), 0.0, epsilon = 1e-12);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn output_quaternion_has_non_negative_w() {
        let mut p = ParamsFile::from_json(SPHERE, true).unwrap();
        p.rotation = UnitQuaternion::from_quaternion(Quaternion::new(-0.5, 0.5, 0.5, 0.5));
        let v: Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["rotation"][0].as_f64().unwrap(), 0.5);
    }

    #[test]
    fn euler_input() {
        let text = SPHERE.replace(r#""rotation": [1, 0, 0, 0]"#, r#""euler_xyz": [0.3, 0, 0]"#);
        let p = ParamsFile::from_json(&text, true).unwrap();
        let want = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.3);
        assert_relative_eq!(p.rotation.angle_to(&want), 0.0, epsilon = 1e-12);

        let angles = [0.2, -0.5, 1.3];
        let m = quaternion_from_euler_xyz(angles).to_rotation_matrix().into_inner();
        let rx = Rotation3::from_axis_angle(&Vector3::x_axis(), 0.2).into_inner();
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), -0.5).into_inner();
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), 1.3).into_inner();
        assert_relative_eq!(m, rx * ry * rz, epsilon = 1e-12);
    }

    #[test]
    fn strictness() {
        let text = SPHERE.replace("\"eps\"", "\"colour\": \"red\", \"eps\"");
        assert!(matches!(ParamsFile::from_json(&text, true), Err(Error::Format(_))));
        assert!(ParamsFile::from_json(&text, false).is_ok());
    }

    #[test]
    fn bad_records() {
        let cases = [
            SPHERE.replace("\"schema_version\": 1", "\"schema_version\": 2"),
            SPHERE.replace("[1, 0, 0, 0]", "[1, 0.1, 0, 0]"),
            SPHERE.replace("[0.1, 0.1, 0.1]", "[0.1, -0.1, 0.1]"),
            SPHERE.replace("[1, 1]", "[1, 2.5]"),
            SPHERE.replace("\"rotation\": [1, 0, 0, 0],", ""),
        ];
        for text in &cases {
            assert!(matches!(ParamsFile::from_json(text, true), Err(Error::Format(_))), "{text}");
        }
        match ParamsFile::from_json("{\n\"eps\": [1,\n", true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn intrinsics() {
        let k = parse_intrinsics(r#"{"fx": 500, "fy": 510, "cx": 320, "cy": 240}"#, true).unwrap();
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (500.0, 510.0, 320.0, 240.0));
        let extra = r#"{"fx": 500, "fy": 510, "cx": 320, "cy": 240, "width": 640}"#;
        assert!(parse_intrinsics(extra, true).is_err());
        assert!(parse_intrinsics(extra, false).is_ok());
        assert!(matches!(parse_intrinsics(r#"{"fx": -1, "fy": 1, "cx": 0, "cy": 0}"#, false), Err(Error::Format(_))));
    }

    #[test]
    fn slightly_off_quaternion_is_normalized() {
        let text = SPHERE.replace("[1, 0, 0, 0]", "[1.0000005, 0, 0, 0]");
        let p = ParamsFile::from_json(&text, true).unwrap();
        assert_relative_eq!(p.rotation.quaternion().norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sheared_samples_follow_matrix() {
        let mut p = ParamsFile::from_json(SPHERE, true).unwrap();
        p.shear = Some(Vector3::new(0.02, 0.0, 0.0));
        let m = p.matrix().unwrap();
        let inv = m.try_inverse().unwrap();
        for x in &p.sample_surface(100, 3).unwrap() {
            let u = inv * (x - p.translation);
            assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-9);
        }
    }
}
