//! Per-action interaction policy: which object classes an action may target,
//! which contact constraint binds, at which frame, and the verb phrase used
//! in descriptions. Built-in entries cover sit / stand up / walk / lie down;
//! extension actions are registered through the config file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactKind {
    /// Hip vertices touch a point sampled on the target's top surface.
    HipContact,
    /// Pelvis ends on the floor near the target's footprint.
    Reach,
    /// Body rests on the target's top surface, mostly inside its footprint.
    LieOnSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorFrame {
    First,
    Last,
}

impl AnchorFrame {
    pub fn index(self, frame_count: usize) -> usize {
        match self {
            AnchorFrame::First => 0,
            AnchorFrame::Last => frame_count.saturating_sub(1),
        }
    }
}

/// Frames on which the foot–ground support constraint is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportFrames {
    All,
    First,
    Last,
}

impl SupportFrames {
    pub fn indices(self, frame_count: usize) -> Vec<usize> {
        match self {
            SupportFrames::All => (0..frame_count).collect(),
            SupportFrames::First => vec![0],
            SupportFrames::Last => vec![frame_count.saturating_sub(1)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPolicy {
    pub verb_phrase: String,
    /// Target classes; empty means any non-structural class.
    #[serde(default)]
    pub interactable: Vec<String>,
    pub contact: ContactKind,
    pub anchor: AnchorFrame,
    pub support_frames: SupportFrames,
}

impl ActionPolicy {
    pub fn builtin(action: &Action) -> Option<ActionPolicy> {
        let classes = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let sittable = classes(&["chair", "armchair", "sofa", "couch", "bed", "stool", "toilet", "table"]);
        Some(match action {
            Action::Sit => ActionPolicy {
                verb_phrase: "sit on".into(),
                interactable: sittable,
                contact: ContactKind::HipContact,
                anchor: AnchorFrame::Last,
                support_frames: SupportFrames::All,
            },
            Action::StandUp => ActionPolicy {
                verb_phrase: "stand up from".into(),
                interactable: sittable,
                contact: ContactKind::HipContact,
                anchor: AnchorFrame::First,
                support_frames: SupportFrames::All,
            },
            Action::Walk => ActionPolicy {
                verb_phrase: "walk to".into(),
                interactable: Vec::new(),
                contact: ContactKind::Reach,
                anchor: AnchorFrame::Last,
                support_frames: SupportFrames::All,
            },
            Action::LieDown => ActionPolicy {
                verb_phrase: "lie down on".into(),
                interactable: classes(&["bed", "couch", "sofa", "table"]),
                contact: ContactKind::LieOnSurface,
                anchor: AnchorFrame::Last,
                support_frames: SupportFrames::First,
            },
            Action::Extension(_) => return None,
        })
    }

    pub fn admits_class(&self, class_name: &str, structural: &[String]) -> bool {
        if self.interactable.is_empty() {
            !structural.iter().any(|s| s.eq_ignore_ascii_case(class_name))
        } else {
            self.interactable.iter().any(|c| c.eq_ignore_ascii_case(class_name))
        }
    }
}

/// Policy overrides and extensions keyed by action label; built-in actions
/// fall back to [`ActionPolicy::builtin`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicySet {
    pub actions: BTreeMap<String, ActionPolicy>,
}

impl PolicySet {
    pub fn policy(&self, action: &Action) -> Result<ActionPolicy> {
        self.actions
            .get(action.as_str())
            .cloned()
            .or_else(|| ActionPolicy::builtin(action))
            .ok_or_else(|| Error::UnknownAction(action.as_str().to_string()))
    }
}
