//! Scoring estimated parameter records against ground truth.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::canonical::{canonicalize, ANISOTROPY_TOL};
use crate::error::{Error, Result};
use crate::io::params::{ParamsFile, SCHEMA_VERSION};
use crate::metrics::{accuracy_curve, align_gauge, mspd, mssd, CameraIntrinsics, PoseHypothesis};
use crate::shape_space::{
    symmetry_group, template_points, ShapeGrid, SymmetryGroup, DEFAULT_DENSE_POINTS, DEFAULT_TEMPLATE_POINTS,
};

/// Exponent tolerance used when deciding which template symmetries the
/// estimate may be re-labeled with.
pub const GAUGE_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub template_points: usize,
    pub dense_points: usize,
    pub template_seed: u64,
    /// MSSD thresholds in meters, ascending.
    pub thresholds: Vec<f64>,
    /// MSPD thresholds in pixels, ascending.
    pub pixel_thresholds: Vec<f64>,
    pub intrinsics: Option<CameraIntrinsics>,
    /// Re-express each estimate through its template symmetries before
    /// scoring; see [`align_gauge`].
    pub align: bool,
    pub grid: ShapeGrid,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            template_points: DEFAULT_TEMPLATE_POINTS,
            dense_points: DEFAULT_DENSE_POINTS,
            template_seed: 0,
            thresholds: vec![0.005, 0.01, 0.02, 0.05],
            pixel_thresholds: vec![5.0, 10.0, 20.0, 50.0],
            intrinsics: None,
            align: true,
            grid: ShapeGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub category_id: usize,
    /// Meters.
    pub mssd: f64,
    /// Pixels; present when intrinsics were given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mspd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub units: ReportUnits,
    pub pairs: Vec<PairScore>,
    pub thresholds: Vec<f64>,
    pub mssd_accuracy: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pixel_thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mspd_accuracy: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportUnits {
    pub mssd: String,
    pub mspd: String,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Record with `eps2 <= 1`, warping plain records that are not.
fn canonical_record(record: &ParamsFile) -> Result<ParamsFile> {
    if record.eps[1] <= 1.0 {
        return Ok(record.clone());
    }
    if !record.is_unsheared() {
        return Err(Error::NotCanonical { eps2: record.eps[1] });
    }
    let result = canonicalize(&record.superquadric()?, ANISOTROPY_TOL)?;
    let c = result.canonical;
    Ok(ParamsFile::from_affine(c.eps1(), c.eps2(), &result.affine()))
}

fn hypothesis(record: &ParamsFile) -> Result<PoseHypothesis> {
    PoseHypothesis::new(record.matrix()?, record.translation)
}

/// Instance symmetries of a canonical ground-truth record. Shear breaks the
/// quarter turn, so sheared records only keep the half turns.
fn instance_symmetries(record: &ParamsFile) -> Result<SymmetryGroup> {
    let size = record.scale.max();
    let sheared = record.shear.is_some_and(|s| s.amax() > ANISOTROPY_TOL * size);
    if sheared {
        let half = |axis| UnitQuaternion::from_axis_angle(&axis, PI);
        return Ok(SymmetryGroup::generated_by(&[
            half(Vector3::x_axis()),
            half(Vector3::y_axis()),
            half(Vector3::z_axis()),
        ]));
    }
    let plain = ParamsFile {
        shear: None,
        ..record.clone()
    };
    symmetry_group(&plain.superquadric()?, ANISOTROPY_TOL)
}

/// Scores one (ground truth, estimate) pair.
pub fn score_pair(gt: &ParamsFile, est: &ParamsFile, options: &EvalOptions) -> Result<PairScore> {
    let gt = canonical_record(gt)?;
    let est = canonical_record(est)?;
    let category_id = options.grid.categorize(gt.eps[0], gt.eps[1])?;
    let category = options.grid.category(category_id).expect("categorize returns a valid id");
    let template = template_points(&category, options.template_points, options.dense_points, options.template_seed)?;
    let sym = instance_symmetries(&gt)?;

    let gt_pose = hypothesis(&gt)?;
    let mut est_pose = hypothesis(&est)?;
    if options.align {
        est_pose = align_gauge(&est_pose, &gt_pose, est.eps[0], est.eps[1], GAUGE_TOL);
    }
    let mssd = mssd(&est_pose, &gt_pose, &template, &sym)?;
    let mspd = match &options.intrinsics {
        Some(k) => Some(mspd(&est_pose, &gt_pose, &template, &sym, k)?),
        None => None,
    };
    Ok(PairScore {
        category_id,
        mssd,
        mspd,
    })
}

/// Scores every pair and summarizes them as accuracy curves.
pub fn evaluate(pairs: &[(ParamsFile, ParamsFile)], options: &EvalOptions) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let scores = pairs
        .iter()
        .map(|(gt, est)| score_pair(gt, est, options))
        .collect::<Result<Vec<_>>>()?;
    let mssd: Vec<f64> = scores.iter().map(|s| s.mssd).collect();
    let mssd_accuracy = accuracy_curve(&mssd, &options.thresholds)?;
    let (pixel_thresholds, mspd_accuracy) = if options.intrinsics.is_some() {
        let mspd: Vec<f64> = scores.iter().filter_map(|s| s.mspd).collect();
        (
            Some(options.pixel_thresholds.clone()),
            Some(accuracy_curve(&mspd, &options.pixel_thresholds)?),
        )
    } else {
        (None, None)
    };
    Ok(EvalReport {
        schema_version: SCHEMA_VERSION,
        units: ReportUnits {
            mssd: "meters".into(),
            mspd: "pixels".into(),
        },
        pairs: scores,
        thresholds: options.thresholds.clone(),
        mssd_accuracy,
        pixel_thresholds,
        mspd_accuracy,
    })
}
