//! XR-side scene state: anchors, the user's pose, and the runtime events that
//! place visualizations on anchors.
//!
//! Coordinates are right-handed, y-up, in meters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub type Vec3 = [f64; 3];

pub const COORDINATE_SYSTEM: &str = "rh_y_up_m";
pub const INSTANTIATE_VISUALIZATION: &str = "instantiate_visualization";

const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("invalid spatial data: {0}")]
    InvalidSpatial(String),
    #[error("duplicate anchor id `{0}`")]
    DuplicateAnchor(String),
    #[error("unsupported event type `{0}`")]
    UnsupportedEvent(String),
    #[error("unknown anchor `{0}`")]
    UnknownAnchor(String),
    #[error("malformed event: {0}")]
    MalformedEvent(String),
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorPoint {
    pub id: String,
    pub position: Vec3,
    pub description: String,
    #[serde(skip)]
    pub occupied_by: Option<String>,
}

impl AnchorPoint {
    pub fn new(id: impl Into<String>, position: Vec3, description: impl Into<String>) -> Self {
        AnchorPoint {
            id: id.into(),
            position,
            description: description.into(),
            occupied_by: None,
        }
    }
}

/// The user's pose. Only `center` and `facing` take part in the front test;
/// `box_extents` (half-widths) is carried for future occlusion checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserPose {
    pub center: Vec3,
    pub facing: Vec3,
    pub box_extents: Vec3,
}

impl UserPose {
    pub fn new(center: Vec3, facing: Vec3) -> Self {
        UserPose {
            center,
            facing,
            box_extents: [0.3, 0.9, 0.3],
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let finite = self
            .center
            .iter()
            .chain(&self.facing)
            .chain(&self.box_extents)
            .all(|v| v.is_finite());
        if !finite {
            return Err(SceneError::InvalidSpatial("non-finite user pose".into()));
        }
        if (norm(self.facing) - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SceneError::InvalidSpatial(format!(
                "user facing vector must be unit length, got norm {}",
                norm(self.facing)
            )));
        }
        if self.box_extents.iter().any(|e| *e < 0.0) {
            return Err(SceneError::InvalidSpatial(
                "user box extents must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `dot(p - center, facing) > 0` and `|p - center| <= max_distance`.
pub fn in_front(user: &UserPose, p: Vec3, max_distance: f64) -> bool {
    let offset = sub(p, user.center);
    dot(offset, user.facing) > 0.0 && norm(offset) <= max_distance
}

/// Structured description of the XR space sent when a session starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialData {
    pub coordinate_system: String,
    pub anchors: Vec<AnchorPoint>,
    pub supported_events: Vec<String>,
    pub user: UserPose,
}

impl SpatialData {
    pub fn new(anchors: Vec<AnchorPoint>, user: UserPose) -> Self {
        SpatialData {
            coordinate_system: COORDINATE_SYSTEM.to_string(),
            anchors,
            supported_events: vec![INSTANTIATE_VISUALIZATION.to_string()],
            user,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let data: SpatialData = serde_json::from_str(text)
            .map_err(|e| SceneError::InvalidSpatial(e.to_string()))?;
        data.validate()?;
        Ok(data)
    }

    pub fn anchor(&self, id: &str) -> Option<&AnchorPoint> {
        self.anchors.iter().find(|a| a.id == id)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if self.coordinate_system != COORDINATE_SYSTEM {
            return Err(SceneError::InvalidSpatial(format!(
                "coordinate_system must be `{COORDINATE_SYSTEM}`, got `{}`",
                self.coordinate_system
            )));
        }
        if !self
            .supported_events
            .iter()
            .any(|e| e == INSTANTIATE_VISUALIZATION)
        {
            return Err(SceneError::InvalidSpatial(format!(
                "supported_events must include `{INSTANTIATE_VISUALIZATION}`"
            )));
        }
        self.user.validate()?;
        let mut seen = BTreeSet::new();
        for a in &self.anchors {
            if a.id.is_empty() {
                return Err(SceneError::InvalidSpatial("empty anchor id".into()));
            }
            if !seen.insert(a.id.as_str()) {
                return Err(SceneError::DuplicateAnchor(a.id.clone()));
            }
            if a.description.trim().is_empty() {
                return Err(SceneError::InvalidSpatial(format!(
                    "anchor `{}` has an empty description",
                    a.id
                )));
            }
            if a.position.iter().any(|v| !v.is_finite()) {
                return Err(SceneError::InvalidSpatial(format!(
                    "anchor `{}` has a non-finite position",
                    a.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    Enabled,
    Disabled,
}

/// Wire-level scene mutation, e.g.
///
/// ```json
/// { "event": "instantiate_visualization", "visualization_type": "pie_chart",
///   "data": [{"category": "Dining", "amount": 320}],
///   "position": "anchor_12", "interaction": "enabled" }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeEvent {
    pub event: String,
    pub visualization_type: String,
    pub data: Vec<Value>,
    pub position: String,
    pub interaction: Interaction,
}

impl RuntimeEvent {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("runtime events always serialize")
    }

    /// Checks the event shape without reference to a particular scene.
    pub fn validate_shape(&self) -> Result<(), SceneError> {
        if self.event.is_empty() {
            return Err(SceneError::MalformedEvent("empty event type".into()));
        }
        let vt_ok = !self.visualization_type.is_empty()
            && self
                .visualization_type
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !vt_ok {
            return Err(SceneError::MalformedEvent(format!(
                "visualization_type `{}` must match [a-z0-9_]+",
                self.visualization_type
            )));
        }
        if self.position.is_empty() {
            return Err(SceneError::MalformedEvent("empty position".into()));
        }
        if let Some(bad) = self.data.iter().find(|d| !d.is_object()) {
            return Err(SceneError::MalformedEvent(format!(
                "data items must be objects, got {bad}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedVisualization {
    pub event: RuntimeEvent,
    pub seq: u64,
}

/// What [`SceneState::apply_event`] changed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub id: String,
    pub anchor: String,
    pub displaced: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    spatial: SpatialData,
    visualizations: BTreeMap<String, PlacedVisualization>,
    seq: u64,
}

pub fn init_scene(spatial: SpatialData) -> Result<SceneState, SceneError> {
    spatial.validate()?;
    let mut spatial = spatial;
    for a in &mut spatial.anchors {
        a.occupied_by = None;
    }
    Ok(SceneState {
        spatial,
        visualizations: BTreeMap::new(),
        seq: 0,
    })
}

impl SceneState {
    pub fn spatial(&self) -> &SpatialData {
        &self.spatial
    }

    pub fn anchors(&self) -> &[AnchorPoint] {
        &self.spatial.anchors
    }

    pub fn user(&self) -> &UserPose {
        &self.spatial.user
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    pub fn visualization(&self, id: &str) -> Option<&PlacedVisualization> {
        self.visualizations.get(id)
    }

    pub fn visualization_count(&self) -> usize {
        self.visualizations.len()
    }

    /// Checks an event against this scene without mutating it.
    pub fn check_event(&self, ev: &RuntimeEvent) -> Result<(), SceneError> {
        ev.validate_shape()?;
        if !self.spatial.supported_events.contains(&ev.event) {
            return Err(SceneError::UnsupportedEvent(ev.event.clone()));
        }
        if self.spatial.anchor(&ev.position).is_none() {
            return Err(SceneError::UnknownAnchor(ev.position.clone()));
        }
        Ok(())
    }

    /// Places a visualization and returns its id `<type>_<seq:03>`. An
    /// occupied anchor is taken over; the displaced visualization is removed
    /// and reported. On error the scene is untouched.
    pub fn apply_event(&mut self, ev: RuntimeEvent) -> Result<Placement, SceneError> {
        self.check_event(&ev)?;
        let seq = self.seq + 1;
        let id = format!("{}_{:03}", ev.visualization_type, seq);
        let anchor_id = ev.position.clone();

        let anchor = self
            .spatial
            .anchors
            .iter_mut()
            .find(|a| a.id == anchor_id)
            .expect("anchor checked above");
        let displaced = anchor.occupied_by.replace(id.clone());
        if let Some(old) = &displaced {
            self.visualizations.remove(old);
        }
        self.visualizations
            .insert(id.clone(), PlacedVisualization { event: ev, seq });
        self.seq = seq;
        Ok(Placement {
            id,
            anchor: anchor_id,
            displaced,
        })
    }

    /// Canonical JSON document of the scene. Object keys are sorted, anchors
    /// keep their spatial-data order.
    pub fn snapshot(&self) -> Value {
        let anchors: Vec<Value> = self
            .spatial
            .anchors
            .iter()
            .map(|a| {
                json!({
                    "id": a.id,
                    "position": a.position,
                    "description": a.description,
                    "occupied_by": a.occupied_by,
                })
            })
            .collect();
        let visualizations: serde_json::Map<String, Value> = self
            .visualizations
            .iter()
            .map(|(id, v)| {
                (
                    id.clone(),
                    json!({ "seq": v.seq, "event": v.event.to_json() }),
                )
            })
            .collect();
        json!({
            "coordinate_system": self.spatial.coordinate_system,
            "anchors": anchors,
            "supported_events": self.spatial.supported_events,
            "user": self.spatial.user,
            "seq": self.seq,
            "visualizations": visualizations,
        })
    }
}
