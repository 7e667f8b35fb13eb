//! Scene ground truth and the sensor models that observe it.
//!
//! The detector is a stand-in for an image model: it reports labels of objects
//! inside its footprint with configurable miss and false-positive rates.

use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LocalPoint;

/// Region tag reported when a scene defines no regions at all.
pub const UNASSIGNED_REGION: &str = "unassigned";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("duplicate scene object id {0}")]
    DuplicateObject(String),
    #[error("radiation source {0} must have positive strength")]
    NonPositiveStrength(String),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("region tag {0} is not defined")]
    UnknownRegion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub label: String,
    pub position: LocalPoint,
    pub region_tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiationSource {
    pub id: String,
    pub position: LocalPoint,
    /// Dose-rate units normalized at 1 m.
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub tag: String,
    pub centroid: LocalPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub footprint_m: f64,
    pub p_miss: f64,
    pub p_false_positive_per_obs: f64,
    pub confidence_mean: f64,
    pub confidence_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    pub noise_sd: f64,
    pub d_min_m: f64,
}

/// Everything the simulated sensors can observe. Positions are metres in the
/// survey grid's local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGroundTruth {
    pub objects: Vec<SceneObject>,
    pub sources: Vec<RadiationSource>,
    pub background: f64,
    pub regions: Vec<Region>,
    pub damaged_vegetation_regions: BTreeSet<String>,
    pub detector_params: DetectorParams,
    pub sensor_params: SensorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    /// `None` for false positives.
    pub object_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VegetationObservation {
    pub region_tag: String,
    pub damaged: bool,
}

fn check_probability(name: &str, p: f64) -> Result<(), SceneError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SceneError::InvalidParameter(format!("{name} = {p} is not a probability")))
    }
}

impl SceneGroundTruth {
    pub fn validate(&self) -> Result<(), SceneError> {
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(SceneError::DuplicateObject(o.id.clone()));
            }
        }
        for s in &self.sources {
            if !(s.strength > 0.0 && s.strength.is_finite()) {
                return Err(SceneError::NonPositiveStrength(s.id.clone()));
            }
        }
        if !(self.background >= 0.0 && self.background.is_finite()) {
            return Err(SceneError::InvalidParameter(format!("background {} is negative", self.background)));
        }
        let d = &self.detector_params;
        if !(d.footprint_m > 0.0) {
            return Err(SceneError::InvalidParameter("footprint_m must be positive".into()));
        }
        check_probability("p_miss", d.p_miss)?;
        check_probability("p_false_positive_per_obs", d.p_false_positive_per_obs)?;
        check_probability("confidence_mean", d.confidence_mean)?;
        if !(d.confidence_sd >= 0.0) {
            return Err(SceneError::InvalidParameter("confidence_sd must be non-negative".into()));
        }
        let s = &self.sensor_params;
        if !(s.noise_sd >= 0.0) {
            return Err(SceneError::InvalidParameter("noise_sd must be non-negative".into()));
        }
        if !(s.d_min_m > 0.0) {
            return Err(SceneError::InvalidParameter("d_min_m must be positive".into()));
        }
        let tags: HashSet<&str> = self.regions.iter().map(|r| r.tag.as_str()).collect();
        if tags.len() != self.regions.len() {
            return Err(SceneError::InvalidParameter("region tags must be unique".into()));
        }
        let referenced = self
            .objects
            .iter()
            .map(|o| &o.region_tag)
            .chain(&self.damaged_vegetation_regions);
        for tag in referenced {
            if !tags.contains(tag.as_str()) {
                return Err(SceneError::UnknownRegion(tag.clone()));
            }
        }
        Ok(())
    }

    /// Sorted, de-duplicated object labels; false positives draw from here.
    pub fn label_vocabulary(&self) -> Vec<String> {
        self.objects
            .iter()
            .map(|o| o.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn radiation_intensity(&self, pos: &LocalPoint) -> f64 {
        let d_min = self.sensor_params.d_min_m;
        self.background
            + self
                .sources
                .iter()
                .map(|s| {
                    let d = pos.distance(&s.position).max(d_min);
                    s.strength / (d * d)
                })
                .sum::<f64>()
    }

    /// One noisy radiation reading, truncated at zero.
    pub fn sample_sensor<R: Rng + ?Sized>(&self, pos: &LocalPoint, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (self.radiation_intensity(pos) + self.sensor_params.noise_sd * z).max(0.0)
    }

    pub fn sample_detections<R: Rng + ?Sized>(&self, pos: &LocalPoint, rng: &mut R) -> Vec<Detection> {
        let params = &self.detector_params;
        let mut detections = Vec::new();
        for object in &self.objects {
            if pos.distance(&object.position) > params.footprint_m {
                continue;
            }
            if rng.random::<f64>() < 1.0 - params.p_miss {
                detections.push(Detection {
                    label: object.label.clone(),
                    confidence: self.sample_confidence(rng),
                    object_id: Some(object.id.clone()),
                });
            }
        }
        if rng.random::<f64>() < params.p_false_positive_per_obs {
            let vocabulary = self.label_vocabulary();
            if !vocabulary.is_empty() {
                let label = vocabulary[rng.random_range(0..vocabulary.len())].clone();
                detections.push(Detection {
                    label,
                    confidence: self.sample_confidence(rng),
                    object_id: None,
                });
            }
        }
        detections
    }

    fn sample_confidence<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        let p = &self.detector_params;
        (p.confidence_mean + p.confidence_sd * z).clamp(0.0, 1.0)
    }

    /// Region containing `pos` (nearest centroid, ties to the smaller tag).
    pub fn region_at(&self, pos: &LocalPoint) -> &str {
        self.regions
            .iter()
            .min_by(|a, b| {
                pos.distance_squared(&a.centroid)
                    .total_cmp(&pos.distance_squared(&b.centroid))
                    .then_with(|| a.tag.cmp(&b.tag))
            })
            .map_or(UNASSIGNED_REGION, |r| r.tag.as_str())
    }

    pub fn vegetation_observation(&self, pos: &LocalPoint) -> VegetationObservation {
        let region_tag = self.region_at(pos).to_owned();
        let damaged = self.damaged_vegetation_regions.contains(&region_tag);
        VegetationObservation { region_tag, damaged }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> SceneGroundTruth {
        SceneGroundTruth {
            objects: vec![SceneObject {
                id: "t1".into(),
                label: "train".into(),
                position: LocalPoint::new(0.0, 0.0),
                region_tag: "rail".into(),
            }],
            sources: vec![],
            background: 0.1,
            regions: vec![
                Region { tag: "rail".into(), centroid: LocalPoint::new(0.0, 0.0) },
                Region { tag: "field".into(), centroid: LocalPoint::new(100.0, 0.0) },
            ],
            damaged_vegetation_regions: BTreeSet::new(),
            detector_params: DetectorParams {
                footprint_m: 20.0,
                p_miss: 0.0,
                p_false_positive_per_obs: 0.0,
                confidence_mean: 0.8,
                confidence_sd: 0.1,
            },
            sensor_params: SensorParams { noise_sd: 0.0, d_min_m: 1.0 },
        }
    }

    fn with_source(strength: f64) -> SceneGroundTruth {
        let mut s = scene();
        s.background = 0.0;
        s.sources.push(RadiationSource { id: "r".into(), position: LocalPoint::ORIGIN, strength });
        s
    }

    #[test]
    fn background_only_field() {
        let s = scene();
        assert_eq!(s.radiation_intensity(&LocalPoint::new(37.0, -4.0)), 0.1);
    }

    #[test]
    fn inverse_square() {
        let s = with_source(100.0);
        assert_eq!(s.radiation_intensity(&LocalPoint::new(5.0, 0.0)), 4.0);
        assert_eq!(s.radiation_intensity(&LocalPoint::new(0.0, 10.0)), 1.0);
    }

    #[test]
    fn near_field_clamps() {
        let mut s = with_source(100.0);
        s.sensor_params.d_min_m = 2.0;
        assert_eq!(s.radiation_intensity(&LocalPoint::new(0.5, 0.0)), 25.0);
        assert_eq!(s.radiation_intensity(&LocalPoint::ORIGIN), 25.0);
    }

    #[test]
    fn noiseless_sensor_reads_field() {
        let s = with_source(100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.sample_sensor(&LocalPoint::new(5.0, 0.0), &mut rng), 4.0);
    }

    #[test]
    fn sensor_is_replayable() {
        let mut s = with_source(100.0);
        s.sensor_params.noise_sd = 0.7;
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|i| s.sample_sensor(&LocalPoint::new(i as f64, 3.0), &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn detector_range_gate_and_rates() {
        let s = scene();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hits = s.sample_detections(&LocalPoint::new(5.0, 0.0), &mut rng);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].label, "train");
        assert_eq!(hits[0].object_id.as_deref(), Some("t1"));
        assert!((0.0..=1.0).contains(&hits[0].confidence));

        assert!(s.sample_detections(&LocalPoint::new(50.0, 0.0), &mut rng).is_empty());

        let mut blind = scene();
        blind.detector_params.p_miss = 1.0;
        for _ in 0..100 {
            assert!(blind.sample_detections(&LocalPoint::ORIGIN, &mut rng).is_empty());
        }
    }

    #[test]
    fn false_positives_use_scene_vocabulary() {
        let mut s = scene();
        s.detector_params.p_false_positive_per_obs = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let far = s.sample_detections(&LocalPoint::new(500.0, 0.0), &mut rng);
        assert_eq!(far.len(), 1);
        assert_eq!(far[0].label, "train");
        assert_eq!(far[0].object_id, None);
    }

    #[test]
    fn vegetation_regions() {
        let mut s = scene();
        assert!(!s.vegetation_observation(&LocalPoint::new(90.0, 0.0)).damaged);
        s.damaged_vegetation_regions.insert("field".into());
        let obs = s.vegetation_observation(&LocalPoint::new(90.0, 0.0));
        assert_eq!(obs, VegetationObservation { region_tag: "field".into(), damaged: true });
        // Equidistant from both centroids: "field" < "rail".
        assert_eq!(s.region_at(&LocalPoint::new(50.0, 10.0)), "field");
    }

    #[test]
    fn validation() {
        assert!(scene().validate().is_ok());
        let mut s = scene();
        s.objects.push(s.objects[0].clone());
        assert!(matches!(s.validate(), Err(SceneError::DuplicateObject(_))));
        let mut s = with_source(0.0);
        s.background = 0.0;
        assert!(matches!(s.validate(), Err(SceneError::NonPositiveStrength(_))));
        let mut s = scene();
        s.detector_params.p_miss = 1.5;
        assert!(s.validate().is_err());
        let mut s = scene();
        s.damaged_vegetation_regions.insert("moon".into());
        assert_eq!(s.validate(), Err(SceneError::UnknownRegion("moon".into())));
    }
}
