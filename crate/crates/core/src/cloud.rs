use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Instance id reserved for points that belong to no object.
pub const UNASSIGNED_INSTANCE: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePoint {
    pub position: Point3<f64>,
    pub color: [u8; 3],
    pub semantic_class: u32,
    pub instance_id: u32,
}

/// Colored, semantically and instance labeled scene point cloud, z-up, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePointCloud {
    pub scene_id: String,
    pub points: Vec<ScenePoint>,
    pub class_names: BTreeMap<u32, String>,
    /// Optional facing direction (xy) per instance; enables allocentric relations.
    pub orientations: BTreeMap<u32, Vector2<f64>>,
}

impl ScenePointCloud {
    pub fn new(
        scene_id: impl Into<String>,
        points: Vec<ScenePoint>,
        class_names: BTreeMap<u32, String>,
    ) -> Result<Self> {
        let cloud = ScenePointCloud {
            scene_id: scene_id.into(),
            points,
            class_names,
            orientations: BTreeMap::new(),
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::EmptyScene);
        }
        let mut instance_class: BTreeMap<u32, u32> = BTreeMap::new();
        for (i, p) in self.points.iter().enumerate() {
            if !p.position.iter().all(|c| c.is_finite()) {
                return Err(Error::Schema(format!("point {i} has a non-finite position")));
            }
            if !self.class_names.contains_key(&p.semantic_class) {
                return Err(Error::Schema(format!(
                    "semantic class {} of point {i} has no name",
                    p.semantic_class
                )));
            }
            if p.instance_id != UNASSIGNED_INSTANCE {
                let class = *instance_class.entry(p.instance_id).or_insert(p.semantic_class);
                if class != p.semantic_class {
                    return Err(Error::Schema(format!(
                        "instance {} carries semantic classes {class} and {}",
                        p.instance_id, p.semantic_class
                    )));
                }
            }
        }
        for (id, dir) in &self.orientations {
            if !dir.iter().all(|c| c.is_finite()) || dir.norm() == 0.0 {
                return Err(Error::Schema(format!("orientation of instance {id} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Point3<f64>> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn class_name(&self, class: u32) -> Option<&str> {
        self.class_names.get(&class).map(String::as_str)
    }

    /// Class ids whose name is in `names` (case-insensitive).
    pub fn class_ids_named(&self, names: &[String]) -> BTreeSet<u32> {
        self.class_names
            .iter()
            .filter(|(_, name)| names.iter().any(|n| n.eq_ignore_ascii_case(name)))
            .map(|(&id, _)| id)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(x: f64, class: u32, instance: u32) -> ScenePoint {
        ScenePoint {
            position: Point3::new(x, 0.0, 0.0),
            color: [0, 0, 0],
            semantic_class: class,
            instance_id: instance,
        }
    }

    fn names() -> BTreeMap<u32, String> {
        BTreeMap::from([(1, "floor".to_string()), (2, "chair".to_string())])
    }

    #[test]
    fn rejects_empty_scene() {
        assert!(matches!(ScenePointCloud::new("s", vec![], names()), Err(Error::EmptyScene)));
    }

    #[test]
    fn rejects_instance_with_two_classes() {
        let err = ScenePointCloud::new("s", vec![point(0.0, 1, 3), point(1.0, 2, 3)], names()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn rejects_unnamed_class_and_nan() {
        assert!(ScenePointCloud::new("s", vec![point(0.0, 9, 0)], names()).is_err());
        assert!(ScenePointCloud::new("s", vec![point(f64::NAN, 1, 0)], names()).is_err());
    }

    #[test]
    fn class_lookup_is_case_insensitive() {
        let cloud = ScenePointCloud::new("s", vec![point(0.0, 1, 0)], names()).unwrap();
        assert_eq!(cloud.class_ids_named(&["Floor".into()]), BTreeSet::from([1]));
    }
}
