use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::{Aggregate, RelationRegistry, TripleStore};
use crate::error::{Error, Result};
use crate::text;
use crate::types::{EntityType, Gender};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    #[default]
    OnTopic,
    /// The last step's object becomes the proposed new focus.
    Shift,
}

/// One hop from the current binding. `inverse` walks `(?, relation, x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub relation: String,
    #[serde(default)]
    pub inverse: bool,
    pub slot: String,
}

/// A relation that must have no instance for the template to apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Absent {
    pub relation: String,
    #[serde(default)]
    pub inverse: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Gt => value > bound,
            Comparator::Ge => value >= bound,
            Comparator::Lt => value < bound,
            Comparator::Le => value <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub comparator: Comparator,
    pub bound: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateSpec {
    pub op: Aggregate,
    pub slot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTemplate {
    pub id: String,
    #[serde(default)]
    pub kind: TemplateKind,
    /// Focus types the template applies to; empty means any.
    #[serde(default)]
    pub entity_types: Vec<EntityType>,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub absent: Vec<Absent>,
    #[serde(default)]
    pub aggregate: Option<AggregateSpec>,
    /// Checked in order; the first that holds replaces `templates`.
    #[serde(default)]
    pub rules: Vec<ThresholdRule>,
    #[serde(default)]
    pub templates: Vec<String>,
    #[serde(default)]
    pub questions: Vec<String>,
    /// Usable as the fact that introduces a favorite entity.
    #[serde(default)]
    pub favorite: bool,
}

impl RelationTemplate {
    pub fn applies_to(&self, ty: Option<EntityType>) -> bool {
        self.entity_types.is_empty() || ty.is_some_and(|t| self.entity_types.contains(&t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgTemplates {
    pub relations: Vec<RelationTemplate>,
    /// Favorite introductions, slots `{entity}` and `{type_plural}`.
    pub favorite_intro: Vec<String>,
    pub favorite_question: Vec<String>,
    #[serde(default)]
    pub type_plurals: BTreeMap<EntityType, String>,
}

impl KgTemplates {
    pub fn parse(data: &str, relations: &RelationRegistry) -> Result<Self> {
        let t: KgTemplates =
            serde_json::from_str(data).map_err(|e| Error::Config(format!("kg templates: {e}")))?;
        t.validate(relations)?;
        Ok(t)
    }

    pub fn load(path: &Path, relations: &RelationRegistry) -> Result<Self> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&data, relations)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn validate(&self, relations: &RelationRegistry) -> Result<()> {
        let bad = |id: &str, why: String| Err(Error::Config(format!("template `{id}`: {why}")));
        for t in &self.relations {
            if t.steps.is_empty() {
                return bad(&t.id, "no steps".into());
            }
            if t.templates.is_empty() && t.rules.is_empty() {
                return bad(&t.id, "no templates or rules".into());
            }
            for r in t.steps.iter().map(|s| &s.relation).chain(t.absent.iter().map(|a| &a.relation)) {
                if !relations.contains(r) {
                    return bad(&t.id, format!("relation `{r}` is not registered"));
                }
            }
            let mut known: Vec<&str> = vec!["entity", "Pronoun", "pronoun"];
            known.extend(t.steps.iter().map(|s| s.slot.as_str()));
            if let Some(a) = &t.aggregate {
                let last = &t.steps.last().expect("non-empty").relation;
                let allowed = relations.get(last).is_some_and(|r| r.aggregates.contains(&a.op));
                if !allowed {
                    return bad(&t.id, format!("aggregate {:?} not declared for `{last}`", a.op));
                }
                known = vec!["entity", "Pronoun", "pronoun", a.slot.as_str()];
            }
            if !t.rules.is_empty() && t.aggregate.is_none() {
                return bad(&t.id, "threshold rules need an aggregate".into());
            }
            if t.kind == TemplateKind::Shift && t.aggregate.is_some() {
                return bad(&t.id, "shift templates cannot aggregate".into());
            }
            let texts = t
                .templates
                .iter()
                .chain(t.rules.iter().map(|r| &r.text))
                .chain(t.questions.iter());
            for s in texts {
                for slot in text::slot_names(s) {
                    if !known.contains(&slot.as_str()) {
                        return bad(&t.id, format!("slot `{{{slot}}}` cannot be filled"));
                    }
                }
            }
        }
        if self.favorite_intro.is_empty() || self.favorite_question.is_empty() {
            return Err(Error::Config("kg templates need favorite_intro and favorite_question".into()));
        }
        Ok(())
    }
}

/// One way of walking a template's steps from the focus.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    /// `(slot, object)` per step.
    pub values: Vec<(String, String)>,
    /// Whether the last object is an entity.
    pub last_is_entity: bool,
    pub last_number: Option<f64>,
}

impl Binding {
    /// Key used to avoid repeating an instance.
    pub fn key(&self, template: &str) -> String {
        let objs: Vec<&str> = self.values.iter().map(|(_, o)| o.as_str()).collect();
        format!("{template}:{}", objs.join("|"))
    }

    pub fn last(&self) -> &str {
        &self.values.last().expect("non-empty").1
    }
}

pub fn bindings(store: &TripleStore, focus: &str, t: &RelationTemplate) -> Vec<Binding> {
    let absent_hit = t.absent.iter().any(|a| {
        if a.inverse {
            store.subjects(&a.relation, focus).next().is_some()
        } else {
            store.objects(focus, &a.relation).next().is_some()
        }
    });
    if absent_hit {
        return Vec::new();
    }
    let mut frontier = vec![(focus.to_string(), Binding {
        values: Vec::new(),
        last_is_entity: true,
        last_number: None,
    })];
    for step in &t.steps {
        let mut next = Vec::new();
        for (node, b) in frontier {
            if !b.last_is_entity {
                continue;
            }
            let hops: Vec<(String, bool, Option<f64>)> = if step.inverse {
                store
                    .subjects(&step.relation, &node)
                    .map(|tr| (tr.subject.clone(), true, None))
                    .collect()
            } else {
                store
                    .objects(&node, &step.relation)
                    .map(|tr| (tr.object.clone(), tr.kind == super::store::ObjectKind::Entity, tr.number()))
                    .collect()
            };
            for (obj, is_entity, num) in hops {
                let mut nb = b.clone();
                nb.values.push((step.slot.clone(), obj.clone()));
                nb.last_is_entity = is_entity;
                nb.last_number = num;
                next.push((obj, nb));
            }
        }
        frontier = next;
    }
    frontier.into_iter().map(|(_, b)| b).collect()
}

/// How many instances of a relation may be mentioned.
#[derive(Debug, Clone, PartialEq)]
pub enum Presentation {
    Count(usize),
    Single,
    Skip,
}

/// Counts are only spoken for relations the registry marks complete.
pub fn sparse_guard(relation: &str, instances: usize, relations: &RelationRegistry) -> Presentation {
    match instances {
        0 => Presentation::Skip,
        n if relations.is_complete(relation) => Presentation::Count(n),
        _ => Presentation::Single,
    }
}

/// Slot values common to every template for `focus`.
pub fn base_slots(store: &TripleStore, focus: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("entity".to_string(), store.label(focus));
    let pronoun = store.gender(focus).map(Gender::subject_pronoun).unwrap_or("they");
    m.insert("pronoun".to_string(), pronoun.to_string());
    m.insert("Pronoun".to_string(), text::capitalize_first(pronoun));
    m
}

fn display(store: &TripleStore, value: &str, is_entity_like: bool) -> String {
    if is_entity_like && store.contains_entity(value) {
        store.label(value)
    } else {
        value.to_string()
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.1}")
    }
}

/// A realized sentence and the instance it consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub text: String,
    pub question: Option<String>,
    pub key: String,
    /// Set for shift templates: the proposed new focus.
    pub target: Option<String>,
    /// Whether a threshold rule produced the text.
    pub opinion: bool,
}

/// Picks the first unused instance of `t` for `focus` and fills its text.
/// `pick` chooses among alternative texts.
pub fn realize(
    store: &TripleStore,
    relations: &RelationRegistry,
    focus: &str,
    t: &RelationTemplate,
    used: &dyn Fn(&str) -> bool,
    pick: &mut dyn FnMut(usize) -> usize,
) -> Option<Realization> {
    let bs = bindings(store, focus, t);
    let mut slots = base_slots(store, focus);
    let (text_pool, key, target, opinion): (Vec<&String>, String, Option<String>, bool) = match &t.aggregate {
        Some(agg) => {
            let key = format!("{}:aggregate", t.id);
            if used(&key) {
                return None;
            }
            let last_rel = &t.steps.last().expect("validated").relation;
            let value = match agg.op {
                Aggregate::Count => {
                    let mut distinct: Vec<&str> = bs.iter().map(|b| b.last()).collect();
                    distinct.sort_unstable();
                    distinct.dedup();
                    match sparse_guard(last_rel, distinct.len(), relations) {
                        Presentation::Count(n) => n as f64,
                        _ => return None,
                    }
                }
                Aggregate::Mean => {
                    let nums: Vec<f64> = bs.iter().filter_map(|b| b.last_number).collect();
                    if nums.is_empty() {
                        return None;
                    }
                    nums.iter().sum::<f64>() / nums.len() as f64
                }
            };
            slots.insert(agg.slot.clone(), format_number(value));
            match t.rules.iter().find(|r| r.comparator.holds(value, r.bound)) {
                Some(rule) => (vec![&rule.text], key, None, true),
                None if t.templates.is_empty() => return None,
                None => (t.templates.iter().collect(), key, None, false),
            }
        }
        None => {
            let b = bs.iter().find(|b| !used(&b.key(&t.id)))?;
            for (slot, obj) in &b.values {
                slots.insert(slot.clone(), display(store, obj, true));
            }
            let target = (t.kind == TemplateKind::Shift && b.last_is_entity).then(|| b.last().to_string());
            if t.kind == TemplateKind::Shift && target.is_none() {
                return None;
            }
            (t.templates.iter().collect(), b.key(&t.id), target, false)
        }
    };
    let text = text::fill_slots(text_pool[pick(text_pool.len())], &slots)?;
    let question = if t.questions.is_empty() {
        None
    } else {
        text::fill_slots(&t.questions[pick(t.questions.len())], &slots)
    };
    Some(Realization {
        text,
        question,
        key,
        target,
        opinion,
    })
}
