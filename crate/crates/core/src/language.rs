//! Referring descriptions of the form
//! `<verb> the <target> [<relation> the <anchor> [and the <anchor>]]`.
//!
//! A relation clause is only emitted when the target is the unique instance
//! of its class satisfying it, and anchors are always the sole instance of
//! their class, so the structured description resolves back to exactly one
//! object.

use nalgebra::{Point2, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::xy;
use crate::motion::Action;
use crate::scene::ObjectInstance;
use crate::seed::ForgeRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    HorizontalNear,
    HorizontalFar,
    Above,
    Below,
    Between,
    Supporting,
    SupportedBy,
    AllocentricLeft,
    AllocentricRight,
    AllocentricFront,
    AllocentricBack,
}

impl RelationKind {
    pub fn phrase(self) -> &'static str {
        match self {
            RelationKind::HorizontalNear => "near",
            RelationKind::HorizontalFar => "far from",
            RelationKind::Above => "above",
            RelationKind::Below => "below",
            RelationKind::Between => "between",
            RelationKind::Supporting => "supporting",
            RelationKind::SupportedBy => "on",
            RelationKind::AllocentricLeft => "to the left of",
            RelationKind::AllocentricRight => "to the right of",
            RelationKind::AllocentricFront => "in front of",
            RelationKind::AllocentricBack => "behind",
        }
    }

    pub fn anchor_count(self) -> usize {
        if self == RelationKind::Between {
            2
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LanguageConfig {
    /// Minimum footprint overlap (fraction of the smaller footprint) for above / below.
    pub footprint_overlap_min: f64,
    /// Maximum vertical gap for support relations, meters.
    pub support_gap_max: f64,
    /// Maximum xy distance from the segment joining two anchors, meters.
    pub between_corridor: f64,
    /// Allocentric relations need per-instance orientations.
    pub allocentric: bool,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig {
            footprint_overlap_min: 0.25,
            support_gap_max: 0.05,
            between_corridor: 0.20,
            allocentric: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub action: Action,
    pub action_phrase: String,
    pub target_class: String,
    pub relation: Option<RelationKind>,
    pub anchor_classes: Vec<String>,
    pub text: String,
    pub target_instance: u32,
}

impl Description {
    pub fn word_count(&self) -> usize {
        word_count(&self.text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("description: {m}")));
        if self.text.trim().is_empty() {
            return bad("empty text");
        }
        match self.relation {
            None if !self.anchor_classes.is_empty() => bad("anchors without relation"),
            Some(kind) if self.anchor_classes.len() != kind.anchor_count() => bad("wrong anchor count for relation"),
            _ => Ok(()),
        }
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

fn display_class(class: &str) -> String {
    class.replace('_', " ")
}

fn horizontal_distance(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    (xy(&a.centroid) - xy(&b.centroid)).norm()
}

fn footprint_overlap(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let smaller = a.footprint.area().min(b.footprint.area());
    if smaller <= 0.0 {
        return 0.0;
    }
    a.footprint.intersection(&b.footprint).area() / smaller
}

/// Single-anchor relations that hold from `target` to `anchor`. Near / far
/// are judged against the other instances of the target's class in `objects`.
/// Distances closer than this count as ties for near / far.
const DISTANCE_TIE: f64 = 1e-6;

pub fn compute_relations(
    target: &ObjectInstance,
    anchor: &ObjectInstance,
    objects: &[ObjectInstance],
    cfg: &LanguageConfig,
) -> Vec<RelationKind> {
    let mut out = Vec::new();
    if target.instance_id == anchor.instance_id {
        return out;
    }
    let d = horizontal_distance(target, anchor);
    let distractors: Vec<f64> = objects
        .iter()
        .filter(|o| o.class_name == target.class_name && o.instance_id != target.instance_id)
        .map(|o| horizontal_distance(o, anchor))
        .collect();
    if !distractors.is_empty() {
        if distractors.iter().all(|&o| d + DISTANCE_TIE < o) {
            out.push(RelationKind::HorizontalNear);
        }
        if distractors.iter().all(|&o| d > o + DISTANCE_TIE) {
            out.push(RelationKind::HorizontalFar);
        }
    }
    if footprint_overlap(target, anchor) >= cfg.footprint_overlap_min {
        let above_gap = target.aabb.min.z - anchor.aabb.max.z;
        let below_gap = anchor.aabb.min.z - target.aabb.max.z;
        if above_gap >= 0.0 {
            out.push(RelationKind::Above);
            if above_gap <= cfg.support_gap_max {
                out.push(RelationKind::SupportedBy);
            }
        }
        if below_gap >= 0.0 {
            out.push(RelationKind::Below);
            if below_gap <= cfg.support_gap_max {
                out.push(RelationKind::Supporting);
            }
        }
    }
    if cfg.allocentric {
        if let Some(front) = anchor.orientation {
            let offset: Vector2<f64> = xy(&target.centroid) - xy(&anchor.centroid);
            let left = Vector2::new(-front.y, front.x);
            let (f, l) = (offset.dot(&front), offset.dot(&left));
            if offset.norm() > 0.0 {
                out.push(match (f.abs() >= l.abs(), f > 0.0, l > 0.0) {
                    (true, true, _) => RelationKind::AllocentricFront,
                    (true, false, _) => RelationKind::AllocentricBack,
                    (false, _, true) => RelationKind::AllocentricLeft,
                    (false, _, false) => RelationKind::AllocentricRight,
                });
            }
        }
    }
    out
}

/// Whether `target`'s centroid lies in the xy corridor between two anchors.
pub fn is_between(target: &ObjectInstance, a: &ObjectInstance, b: &ObjectInstance, cfg: &LanguageConfig) -> bool {
    let (p, pa, pb): (Point2<f64>, Point2<f64>, Point2<f64>) = (xy(&target.centroid), xy(&a.centroid), xy(&b.centroid));
    let ab = pb - pa;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return false;
    }
    let t = (p - pa).dot(&ab) / len2;
    t > 0.0 && t < 1.0 && (p - (pa + ab * t)).norm() <= cfg.between_corridor
}

/// A relation clause over concrete anchor instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    Single { kind: RelationKind, anchor: u32 },
    Between { first: u32, second: u32 },
}

fn find(objects: &[ObjectInstance], id: u32) -> Option<&ObjectInstance> {
    objects.iter().find(|o| o.instance_id == id)
}

fn holds(candidate: &ObjectInstance, clause: Clause, objects: &[ObjectInstance], cfg: &LanguageConfig) -> bool {
    match clause {
        Clause::Single { kind, anchor } => find(objects, anchor)
            .is_some_and(|a| compute_relations(candidate, a, objects, cfg).contains(&kind)),
        Clause::Between { first, second } => match (find(objects, first), find(objects, second)) {
            (Some(a), Some(b)) => {
                a.instance_id != candidate.instance_id
                    && b.instance_id != candidate.instance_id
                    && is_between(candidate, a, b, cfg)
            }
            _ => false,
        },
    }
}

fn class_count(objects: &[ObjectInstance], class: &str) -> usize {
    objects.iter().filter(|o| o.class_name == class).count()
}

/// Clauses under which `target` is the only instance of its class that
/// satisfies the relation, in deterministic order.
pub fn discriminating_clauses(target: &ObjectInstance, objects: &[ObjectInstance], cfg: &LanguageConfig) -> Vec<Clause> {
    let same_class: Vec<&ObjectInstance> = objects
        .iter()
        .filter(|o| o.class_name == target.class_name && o.instance_id != target.instance_id)
        .collect();
    let mut anchors: Vec<&ObjectInstance> = objects
        .iter()
        .filter(|o| o.class_name != target.class_name && class_count(objects, &o.class_name) == 1)
        .collect();
    anchors.sort_by_key(|o| o.instance_id);

    let unique = |clause: Clause| {
        holds(target, clause, objects, cfg) && !same_class.iter().any(|o| holds(o, clause, objects, cfg))
    };
    let mut out = Vec::new();
    for a in &anchors {
        for kind in compute_relations(target, a, objects, cfg) {
            let clause = Clause::Single {
                kind,
                anchor: a.instance_id,
            };
            if unique(clause) {
                out.push(clause);
            }
        }
    }
    for (i, a) in anchors.iter().enumerate() {
        for b in &anchors[i + 1..] {
            let clause = Clause::Between {
                first: a.instance_id,
                second: b.instance_id,
            };
            if unique(clause) {
                out.push(clause);
            }
        }
    }
    out
}

/// Whether `target` can be referred to uniquely at all.
pub fn is_describable(target: &ObjectInstance, objects: &[ObjectInstance], cfg: &LanguageConfig) -> bool {
    class_count(objects, &target.class_name) == 1 || !discriminating_clauses(target, objects, cfg).is_empty()
}

fn render(verb_phrase: &str, target_class: &str, clause: Option<(RelationKind, &[String])>) -> String {
    let mut text = format!("{} the {}", verb_phrase.trim(), display_class(target_class));
    if let Some((kind, anchors)) = clause {
        match anchors {
            [a, b] => text.push_str(&format!(" {} the {} and the {}", kind.phrase(), display_class(a), display_class(b))),
            [a] => text.push_str(&format!(" {} the {}", kind.phrase(), display_class(a))),
            _ => {}
        }
    }
    text
}

pub fn generate_description(
    action: &Action,
    verb_phrase: &str,
    target: &ObjectInstance,
    objects: &[ObjectInstance],
    cfg: &LanguageConfig,
    rng: &mut ForgeRng,
) -> Result<Description> {
    if find(objects, target.instance_id).is_none() {
        return Err(Error::InvalidInput(format!("instance {} is not in the object list", target.instance_id)));
    }
    if verb_phrase.trim().is_empty() {
        return Err(Error::UnknownAction(action.as_str().to_string()));
    }
    let (relation, anchor_classes) = if class_count(objects, &target.class_name) == 1 {
        (None, Vec::new())
    } else {
        let clauses = discriminating_clauses(target, objects, cfg);
        if clauses.is_empty() {
            return Err(Error::NoUniqueReference(target.instance_id));
        }
        let class_of = |id: u32| find(objects, id).expect("anchor from object list").class_name.clone();
        match clauses[rng.random_range(0..clauses.len())] {
            Clause::Single { kind, anchor } => (Some(kind), vec![class_of(anchor)]),
            Clause::Between { first, second } => (Some(RelationKind::Between), vec![class_of(first), class_of(second)]),
        }
    };
    let text = render(verb_phrase, &target.class_name, relation.map(|k| (k, anchor_classes.as_slice())));
    Ok(Description {
        action: action.clone(),
        action_phrase: verb_phrase.trim().to_string(),
        target_class: target.class_name.clone(),
        relation,
        anchor_classes,
        text,
        target_instance: target.instance_id,
    })
}

fn unique_instance_of<'a>(objects: &'a [ObjectInstance], class: &str) -> Result<&'a ObjectInstance> {
    let mut matches = objects.iter().filter(|o| o.class_name == class);
    match (matches.next(), matches.count()) {
        (None, _) => Err(Error::NoMatch),
        (Some(o), 0) => Ok(o),
        (Some(_), rest) => Err(Error::Ambiguous(rest + 1)),
    }
}

/// Finds the single instance the structured description refers to; the
/// rendered text is ignored.
pub fn resolve_description(desc: &Description, objects: &[ObjectInstance], cfg: &LanguageConfig) -> Result<u32> {
    let candidates: Vec<&ObjectInstance> = objects.iter().filter(|o| o.class_name == desc.target_class).collect();
    if candidates.is_empty() {
        return Err(Error::NoMatch);
    }
    let clause = match desc.relation {
        None => {
            return match candidates.as_slice() {
                [only] => Ok(only.instance_id),
                many => Err(Error::Ambiguous(many.len())),
            }
        }
        Some(kind) => {
            if desc.anchor_classes.len() != kind.anchor_count() {
                return Err(Error::InvalidInput("wrong anchor count for relation".into()));
            }
            let anchors = desc
                .anchor_classes
                .iter()
                .map(|c| unique_instance_of(objects, c).map(|o| o.instance_id))
                .collect::<Result<Vec<_>>>()?;
            match anchors.as_slice() {
                [a, b] => Clause::Between { first: *a, second: *b },
                [a] => Clause::Single { kind, anchor: *a },
                _ => unreachable!("anchor count checked"),
            }
        }
    };
    let matches: Vec<u32> = candidates
        .iter()
        .filter(|c| holds(c, clause, objects, cfg))
        .map(|c| c.instance_id)
        .collect();
    match matches.as_slice() {
        [] => Err(Error::NoMatch),
        [id] => Ok(*id),
        many => Err(Error::Ambiguous(many.len())),
    }
}
