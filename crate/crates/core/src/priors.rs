//! Optional placement regularizers: a user pin on a part's centre of mass
//! and a kernel-density prior over exemplar relative transforms.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::liegroup::{se3_log, RigidTransform, TransformRecord, Vec3};

pub const DEFAULT_PRIOR_SIGMA: f64 = 0.3;

/// Pulls the area centroid of one part toward a world position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinConstraint {
    pub part_id: String,
    pub target: Vec3,
    pub weight: f64,
}

impl PinConstraint {
    pub fn new(part_id: impl Into<String>, target: Vec3, weight: f64) -> Result<Self> {
        let pin = Self {
            part_id: part_id.into(),
            target,
            weight,
        };
        pin.validate()?;
        Ok(pin)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pin weight must be positive, got {}",
                self.weight
            )));
        }
        Ok(())
    }
}

/// `weight * |centroid(placement * mesh) - target|^2`, with the surface
/// area centroid standing in for the centre of mass.
pub fn pin_energy(pin: &PinConstraint, placement: &RigidTransform, part_mesh: &TriMesh) -> f64 {
    let com = placement.apply_point(&part_mesh.area_centroid());
    pin.weight * (com - pin.target).norm_squared()
}

/// Gaussian kernel density over exemplar transforms in the geodesic metric.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformPrior {
    pub exemplars: Vec<RigidTransform>,
    pub sigma: f64,
    pub label_pair: (String, String),
}

/// Stores the exemplars verbatim; the density is a uniform mixture of one
/// kernel per exemplar.
pub fn fit_prior(
    exemplars: Vec<RigidTransform>,
    sigma: f64,
    labels: (String, String),
) -> Result<TransformPrior> {
    if exemplars.is_empty() {
        return Err(Error::EmptyInput("a prior needs at least one exemplar"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "prior sigma must be positive, got {sigma}"
        )));
    }
    Ok(TransformPrior {
        exemplars,
        sigma,
        label_pair: labels,
    })
}

/// `-log p(P)` with `p(P) = mean_j (2 pi s^2)^(-1/2) exp(-|Log(E_j^-1 P)|^2 / 2 s^2)`.
/// The 1-D normalizing constant is kept although the argument is 6-D; only
/// differences of this energy matter to the optimizer.
pub fn prior_energy(prior: &TransformPrior, placement: &RigidTransform) -> Result<f64> {
    let s2 = prior.sigma * prior.sigma;
    let exponents = prior
        .exemplars
        .iter()
        .map(|e| Ok(-se3_log(&(e.inverse() * *placement))?.0.norm_squared() / (2.0 * s2)))
        .collect::<Result<Vec<f64>>>()?;
    // log-sum-exp keeps far placements finite instead of underflowing to +inf.
    let top = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|x| (x - top).exp()).sum();
    let log_mean = top + (sum / exponents.len() as f64).ln();
    Ok(0.5 * (2.0 * PI * s2).ln() - log_mean)
}

/// The mixture density itself, `exp(-prior_energy)`.
pub fn prior_density(prior: &TransformPrior, placement: &RigidTransform) -> Result<f64> {
    Ok((-prior_energy(prior, placement)?).exp())
}

/// One entry of an exemplar file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarRecord {
    pub parent_label: String,
    pub child_label: String,
    pub rotation_axis_angle: [f64; 3],
    pub translation: [f64; 3],
}

impl ExemplarRecord {
    pub fn transform(&self) -> RigidTransform {
        RigidTransform::from(&TransformRecord {
            rotation_axis_angle: self.rotation_axis_angle,
            translation: self.translation,
        })
    }
}

pub fn parse_exemplars(text: &str) -> Result<Vec<ExemplarRecord>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_exemplars(path: &Path) -> Result<Vec<ExemplarRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    parse_exemplars(&std::fs::read_to_string(path)?)
}

/// Groups exemplar records by `(parent_label, child_label)` and fits one
/// prior per pair, in label order.
pub fn priors_from_records(records: &[ExemplarRecord], sigma: f64) -> Result<Vec<TransformPrior>> {
    let mut groups: BTreeMap<(String, String), Vec<RigidTransform>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.parent_label.clone(), r.child_label.clone()))
            .or_default()
            .push(r.transform());
    }
    groups
        .into_iter()
        .map(|(labels, exemplars)| fit_prior(exemplars, sigma, labels))
        .collect()
}
