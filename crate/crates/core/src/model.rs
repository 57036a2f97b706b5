//! Symbolic vocabulary shared by every stage: entities, predicates, grounding
//! symbols and correspondence variables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate entity id `{0}`")]
    DuplicateEntity(String),
    #[error("world model must contain exactly one robot, found {0}")]
    RobotCount(usize),
    #[error("predicate `{name}` has arity {arity} but {roles} roles were given")]
    ArityMismatch { name: String, arity: u8, roles: usize },
    #[error("binary relation `{0}` cannot relate an entity to itself")]
    Reflexive(String),
    #[error("predicate `{name}` is already registered as {kind:?}")]
    PredicateCollision { name: String, kind: PredicateKind },
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error(transparent)]
    Json(#[from] JsonError),
}

/// serde_json errors are not `Clone`; keep the message.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct JsonError(pub String);

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Json(JsonError(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    Object,
    Agent,
    RegionAnchor,
    Robot,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntitySymbol {
    pub id: String,
    pub kind: EntityKind,
}

impl EntitySymbol {
    pub fn new(id: impl Into<String>, kind: EntityKind) -> Self {
        Self { id: id.into(), kind }
    }

    pub fn object(id: impl Into<String>) -> Self {
        Self::new(id, EntityKind::Object)
    }
}

impl fmt::Display for EntitySymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    ObjectClass,
    Region,
    Modifier,
    HumanAction,
    Factual,
    PlannerConstraint,
    Agent,
}

impl PredicateKind {
    /// Perceptual predicates are grounded against detections.
    pub fn is_perceptual(self) -> bool {
        matches!(
            self,
            PredicateKind::ObjectClass
                | PredicateKind::Region
                | PredicateKind::Modifier
                | PredicateKind::HumanAction
                | PredicateKind::Agent
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub name: String,
    pub arity: u8,
    pub kind: PredicateKind,
}

impl Predicate {
    pub fn new(name: impl Into<String>, arity: u8, kind: PredicateKind) -> Self {
        Self {
            name: name.into(),
            arity,
            kind,
        }
    }
}

/// A predicate applied to an ordered role tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundingSymbol {
    pub predicate: Predicate,
    pub roles: Vec<EntitySymbol>,
}

impl GroundingSymbol {
    pub fn new(predicate: Predicate, roles: Vec<EntitySymbol>) -> Result<Self, ModelError> {
        if roles.len() != predicate.arity as usize {
            return Err(ModelError::ArityMismatch {
                name: predicate.name.clone(),
                arity: predicate.arity,
                roles: roles.len(),
            });
        }
        if predicate.arity == 2 && predicate.kind.is_perceptual() && roles[0] == roles[1] {
            return Err(ModelError::Reflexive(predicate.name.clone()));
        }
        Ok(Self { predicate, roles })
    }
}

impl fmt::Display for GroundingSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let roles: Vec<&str> = self.roles.iter().map(|r| r.id.as_str()).collect();
        write!(f, "{}({})", self.predicate.name, roles.join(","))
    }
}

/// Binary correspondence between a parse constituent and a grounding symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceVar {
    pub constituent_id: usize,
    pub symbol: GroundingSymbol,
    pub value: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dist(&self, other: &Pose) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn dist_sq(&self, other: &Pose) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        dx * dx + dy * dy + dz * dz
    }

    pub fn horizontal_dist(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn lerp(&self, other: &Pose, f: f64) -> Pose {
        Pose {
            x: self.x + (other.x - self.x) * f,
            y: self.y + (other.y - self.y) * f,
            z: self.z + (other.z - self.z) * f,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMeta {
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    pub pose: Pose,
}

/// The symbolic world model: entity symbols plus their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    entities: Vec<EntitySymbol>,
    metadata: BTreeMap<String, EntityMeta>,
}

impl WorldModel {
    pub fn new(entries: Vec<(EntitySymbol, EntityMeta)>) -> Result<Self, ModelError> {
        let mut metadata = BTreeMap::new();
        let mut entities = Vec::with_capacity(entries.len());
        for (entity, meta) in entries {
            if metadata.insert(entity.id.clone(), meta).is_some() {
                return Err(ModelError::DuplicateEntity(entity.id));
            }
            entities.push(entity);
        }
        let robots = entities
            .iter()
            .filter(|e| e.kind == EntityKind::Robot)
            .count();
        if robots != 1 {
            return Err(ModelError::RobotCount(robots));
        }
        entities.sort();
        Ok(Self { entities, metadata })
    }

    /// Entities sorted by id.
    pub fn entities(&self) -> &[EntitySymbol] {
        &self.entities
    }

    pub fn objects(&self) -> impl Iterator<Item = &EntitySymbol> {
        self.entities
            .iter()
            .filter(|e| e.kind == EntityKind::Object)
    }

    pub fn agents(&self) -> impl Iterator<Item = &EntitySymbol> {
        self.entities.iter().filter(|e| e.kind == EntityKind::Agent)
    }

    pub fn robot(&self) -> &EntitySymbol {
        self.entities
            .iter()
            .find(|e| e.kind == EntityKind::Robot)
            .expect("validated on construction")
    }

    pub fn get(&self, id: &str) -> Option<&EntitySymbol> {
        self.entities
            .binary_search_by(|e| e.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.entities[i])
    }

    pub fn meta(&self, id: &str) -> Option<&EntityMeta> {
        self.metadata.get(id)
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Object classes present in the world, sorted.
    pub fn object_classes(&self) -> BTreeSet<String> {
        self.objects()
            .filter_map(|e| self.metadata.get(&e.id))
            .map(|m| m.class.clone())
            .collect()
    }
}

/// Which predicate kinds a grounding-space enumeration keeps.
#[derive(Debug, Clone, Default)]
pub struct KindFilter(BTreeSet<PredicateKind>);

impl KindFilter {
    pub fn new(kinds: impl IntoIterator<Item = PredicateKind>) -> Self {
        Self(kinds.into_iter().collect())
    }

    pub fn all() -> Self {
        Self::new([
            PredicateKind::ObjectClass,
            PredicateKind::Region,
            PredicateKind::Modifier,
            PredicateKind::HumanAction,
            PredicateKind::Factual,
            PredicateKind::PlannerConstraint,
            PredicateKind::Agent,
        ])
    }

    pub fn accepts(&self, kind: PredicateKind) -> bool {
        self.0.contains(&kind)
    }
}

/// Every grounding symbol over the world's entities whose predicate kind passes
/// the filter. Ordered by predicate name, then role ids.
pub fn grounding_space(
    world: &WorldModel,
    preds: &[Predicate],
    kinds: &KindFilter,
) -> Vec<GroundingSymbol> {
    grounding_space_over(world.entities(), preds, kinds)
}

/// [`grounding_space`] over an explicit entity list.
pub fn grounding_space_over(
    entities: &[EntitySymbol],
    preds: &[Predicate],
    kinds: &KindFilter,
) -> Vec<GroundingSymbol> {
    let mut entities = entities.to_vec();
    entities.sort();
    let mut preds: Vec<&Predicate> = preds.iter().filter(|p| kinds.accepts(p.kind)).collect();
    preds.sort_by(|a, b| a.name.cmp(&b.name).then(a.arity.cmp(&b.arity)));

    let mut out = Vec::new();
    for pred in preds {
        let mut tuple = Vec::with_capacity(pred.arity as usize);
        role_tuples(&entities, pred, &mut tuple, &mut out);
    }
    out
}

fn role_tuples(
    entities: &[EntitySymbol],
    pred: &Predicate,
    tuple: &mut Vec<EntitySymbol>,
    out: &mut Vec<GroundingSymbol>,
) {
    if tuple.len() == pred.arity as usize {
        // irreflexive: no repeated role within a tuple of a relation
        if pred.arity >= 2 {
            for (i, a) in tuple.iter().enumerate() {
                if tuple[i + 1..].contains(a) {
                    return;
                }
            }
        }
        out.push(GroundingSymbol {
            predicate: pred.clone(),
            roles: tuple.clone(),
        });
        return;
    }
    for e in entities {
        tuple.push(e.clone());
        role_tuples(entities, pred, tuple, out);
        tuple.pop();
    }
}

fn canonical_name(name: &str) -> String {
    let mut chars = name.trim().chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn key(name: &str) -> String {
    name.trim().to_lowercase().replace(['-', '_', ' '], "")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct VocabularyFile {
    predicates: Vec<Predicate>,
}

/// Predicate registry. Fact predicates may be added at runtime; every other
/// kind is fixed when the vocabulary is built.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    predicates: BTreeMap<String, Predicate>,
}

impl Vocabulary {
    pub fn from_predicates(preds: impl IntoIterator<Item = Predicate>) -> Result<Self, ModelError> {
        let mut predicates = BTreeMap::new();
        for p in preds {
            let k = key(&p.name);
            if let Some(prev) = predicates.get(&k) {
                let prev: &Predicate = prev;
                if *prev != p {
                    return Err(ModelError::PredicateCollision {
                        name: p.name,
                        kind: prev.kind,
                    });
                }
            }
            predicates.insert(k, p);
        }
        Ok(Self { predicates })
    }

    /// The representative predicate table: agents, object classes, regions,
    /// modifiers, human actions, factual concepts and planner constraints.
    pub fn default_table() -> Self {
        use PredicateKind::*;
        let mut preds = vec![
            Predicate::new("Robot", 1, Agent),
            Predicate::new("Human", 1, Agent),
        ];
        for c in ["Block", "Can", "Box", "Fruit", "Cup", "Hand"] {
            preds.push(Predicate::new(c, 1, ObjectClass));
        }
        for r in ["On", "LeftOf", "InFrontOf"] {
            preds.push(Predicate::new(r, 2, Region));
        }
        preds.push(Predicate::new("Quickly", 1, Modifier));
        preds.push(Predicate::new("Slowly", 1, Modifier));
        for m in ["Big", "Small", "Large", "Red", "Green", "Yellow"] {
            preds.push(Predicate::new(m, 2, Modifier));
        }
        for a in ["PickUp", "PutDown", "Slide", "MoveToward", "MoveAwayFrom"] {
            preds.push(Predicate::new(a, 2, HumanAction));
        }
        for f in ["Mine", "Favourite", "Forbidden", "Snack", "Oldest"] {
            preds.push(Predicate::new(f, 1, Factual));
        }
        for c in ["Intersect", "Contact", "SpatialRelation"] {
            preds.push(Predicate::new(c, 2, PlannerConstraint));
        }
        Self::from_predicates(preds).expect("default table is collision free")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: VocabularyFile = serde_json::from_str(text)?;
        Self::from_predicates(file.predicates)
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile {
            predicates: self.predicates.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn get(&self, name: &str) -> Option<&Predicate> {
        self.predicates.get(&key(name))
    }

    pub fn is_factual(&self, name: &str) -> bool {
        self.get(name)
            .is_some_and(|p| p.kind == PredicateKind::Factual)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &Predicate> {
        self.predicates.values()
    }

    pub fn of_kind(&self, kind: PredicateKind) -> Vec<Predicate> {
        self.predicates
            .values()
            .filter(|p| p.kind == kind)
            .cloned()
            .collect()
    }

    /// Registers (or returns the existing) arity-1 factual predicate.
    pub fn register_fact_predicate(&mut self, name: &str) -> Result<Predicate, ModelError> {
        let k = key(name);
        if let Some(existing) = self.predicates.get(&k) {
            if existing.kind == PredicateKind::Factual {
                return Ok(existing.clone());
            }
            return Err(ModelError::PredicateCollision {
                name: name.to_string(),
                kind: existing.kind,
            });
        }
        let p = Predicate::new(canonical_name(name), 1, PredicateKind::Factual);
        self.predicates.insert(k, p.clone());
        Ok(p)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::default_table()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(n: usize) -> WorldModel {
        let mut entries = vec![(
            EntitySymbol::new("robot", EntityKind::Robot),
            EntityMeta {
                class: "robot".into(),
                color: None,
                size: None,
                pose: Pose::default(),
            },
        )];
        for i in 0..n {
            entries.push((
                EntitySymbol::object(format!("o{i}")),
                EntityMeta {
                    class: "block".into(),
                    color: None,
                    size: None,
                    pose: Pose::new(i as f64 * 0.2, 0.0, 0.0),
                },
            ));
        }
        WorldModel::new(entries).unwrap()
    }

    fn objects(w: &WorldModel) -> Vec<EntitySymbol> {
        w.objects().cloned().collect()
    }

    #[test]
    fn unary_fact_per_entity() {
        let w = world(2);
        let preds = [Predicate::new("Mine", 1, PredicateKind::Factual)];
        let space = grounding_space_over(
            &objects(&w),
            &preds,
            &KindFilter::new([PredicateKind::Factual]),
        );
        assert_eq!(space.len(), 2);
    }

    #[test]
    fn binary_region_is_irreflexive() {
        let w = world(3);
        let preds = [Predicate::new("On", 2, PredicateKind::Region)];
        let space = grounding_space_over(
            &objects(&w),
            &preds,
            &KindFilter::new([PredicateKind::Region]),
        );
        assert_eq!(space.len(), 6);
        assert!(space.iter().all(|s| s.roles[0] != s.roles[1]));
    }

    #[test]
    fn no_predicates_gives_empty_space() {
        let w = world(3);
        assert!(grounding_space(&w, &[], &KindFilter::all()).is_empty());
    }

    #[test]
    fn closed_form_count_and_determinism() {
        let vocab = Vocabulary::default_table();
        let preds: Vec<Predicate> = vocab.predicates().cloned().collect();
        let filter = KindFilter::new([PredicateKind::Region, PredicateKind::Factual]);
        let u = preds.iter().filter(|p| filter.accepts(p.kind) && p.arity == 1).count();
        let b = preds.iter().filter(|p| filter.accepts(p.kind) && p.arity == 2).count();
        for n in 0..=6 {
            let w = world(n);
            let objs = objects(&w);
            let a = grounding_space_over(&objs, &preds, &filter);
            assert_eq!(a.len(), u * n + b * n * n.saturating_sub(1), "n = {n}");
            assert_eq!(a, grounding_space_over(&objs, &preds, &filter));
        }
    }

    #[test]
    fn space_sorted_by_name_then_roles() {
        let w = world(3);
        let preds = [
            Predicate::new("On", 2, PredicateKind::Region),
            Predicate::new("LeftOf", 2, PredicateKind::Region),
        ];
        let space = grounding_space(&w, &preds, &KindFilter::new([PredicateKind::Region]));
        let keys: Vec<(String, Vec<String>)> = space
            .iter()
            .map(|s| {
                (
                    s.predicate.name.clone(),
                    s.roles.iter().map(|r| r.id.clone()).collect(),
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn register_fact_is_idempotent() {
        let mut v = Vocabulary::default_table();
        let a = v.register_fact_predicate("frobby").unwrap();
        assert_eq!(a, Predicate::new("Frobby", 1, PredicateKind::Factual));
        let b = v.register_fact_predicate("frobby").unwrap();
        assert_eq!(a, b);
        assert_eq!(v.register_fact_predicate("mine").unwrap().name, "Mine");
    }

    #[test]
    fn register_fact_rejects_collision() {
        let mut v = Vocabulary::default_table();
        let err = v.register_fact_predicate("pickup").unwrap_err();
        assert!(matches!(
            err,
            ModelError::PredicateCollision {
                kind: PredicateKind::HumanAction,
                ..
            }
        ));
    }

    #[test]
    fn symbol_rejects_reflexive_and_bad_arity() {
        let on = Predicate::new("On", 2, PredicateKind::Region);
        let a = EntitySymbol::object("a");
        assert!(matches!(
            GroundingSymbol::new(on.clone(), vec![a.clone(), a.clone()]),
            Err(ModelError::Reflexive(_))
        ));
        assert!(matches!(
            GroundingSymbol::new(on, vec![a]),
            Err(ModelError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn world_requires_single_robot() {
        let meta = EntityMeta {
            class: "robot".into(),
            color: None,
            size: None,
            pose: Pose::default(),
        };
        assert!(matches!(WorldModel::new(vec![]), Err(ModelError::RobotCount(0))));
        let r = EntitySymbol::new("r1", EntityKind::Robot);
        let r2 = EntitySymbol::new("r2", EntityKind::Robot);
        assert!(matches!(
            WorldModel::new(vec![(r.clone(), meta.clone()), (r2, meta.clone())]),
            Err(ModelError::RobotCount(2))
        ));
        assert!(matches!(
            WorldModel::new(vec![(r.clone(), meta.clone()), (r, meta)]),
            Err(ModelError::DuplicateEntity(_))
        ));
    }

    #[test]
    fn vocabulary_json_round_trip() {
        let v = Vocabulary::default_table();
        assert_eq!(Vocabulary::from_json(&v.to_json()).unwrap(), v);
    }
}
