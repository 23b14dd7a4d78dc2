//! Genotypes for RPC inputs.
//!
//! Every parameter of an action is represented by a [`Gene`] tree built from
//! its [`ParamSpec`](crate::schema::ParamSpec). Genes are randomized and
//! mutated in place without ever leaving the admissible domain of their
//! spec, and render to a [`Phenotype`] that the executor sends to the SUT.

mod builder;
pub mod regex;
mod scalar;

use std::collections::BTreeSet;

use rand::Rng;
use serde_json::{Map, Value};

pub use builder::{GeneBuilder, SeedCatalog, DEFAULT_DOUBLE_BOUND, DEFAULT_MAX_STRING_LEN, P_OPTIONAL_PRESENT};
pub use scalar::{
    days_in_month, format_decimal, BigDecimalGene, BigIntegerGene, DateFormat, DateGene, EnumGene, FloatGene,
    IntegerGene, RegexGene, StringGene, CHAR_HI, CHAR_LO, YEAR_RANGE,
};

/// Concrete value tree sent over the transport.
pub type Phenotype = Value;

/// Deepest object nesting before a field becomes a cycle placeholder.
pub const MAX_OBJECT_DEPTH: usize = 15;
/// Hard cap on elements in any rendered collection.
pub const MAX_COLLECTION_SIZE: usize = 64;
/// Collection size bound used when the parameter gives none.
pub const DEFAULT_MAX_COLLECTION_SIZE: usize = 5;
/// Chance that a seeded gene switches between its seeded and free source.
pub const P_SEED_FLIP: f64 = 0.05;
/// Chance that a present optional is dropped by a mutation.
pub const P_OPTIONAL_DROP: f64 = 0.1;

const UNIQUE_RETRIES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeneError {
    #[error("unsupported type: {0}")]
    UnsupportedType(String),
    #[error("unresolved type '{0}'")]
    UnresolvedType(String),
    #[error("gene is immutable")]
    ImmutableGene,
}

/// Whether a mutation changed the phenotype.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    Changed,
    NoOp,
}

impl Mutation {
    pub fn of(changed: bool) -> Self {
        if changed {
            Mutation::Changed
        } else {
            Mutation::NoOp
        }
    }

    pub fn changed(self) -> bool {
        self == Mutation::Changed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGene {
    pub min_size: usize,
    pub max_size: usize,
    /// SET semantics: rendered elements are pairwise distinct.
    pub unique: bool,
    pub prototype: Box<Gene>,
    pub elements: Vec<Gene>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapGene {
    pub min_size: usize,
    pub max_size: usize,
    pub key_prototype: Box<Gene>,
    pub value_prototype: Box<Gene>,
    pub entries: Vec<(Gene, Gene)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectGene {
    pub type_name: String,
    pub fields: Vec<(String, Gene)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionalGene {
    pub present: bool,
    pub inner: Box<Gene>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeededGene {
    pub gene: Box<Gene>,
    pub seeded: EnumGene,
    pub employ_seeded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gene {
    Integer(IntegerGene),
    Long(IntegerGene),
    Float(FloatGene),
    Double(FloatGene),
    BigInteger(BigIntegerGene),
    BigDecimal(BigDecimalGene),
    Boolean(bool),
    String(StringGene),
    Regex(RegexGene),
    Enum(EnumGene),
    Date(DateGene),
    Array(ArrayGene),
    Map(MapGene),
    Object(ObjectGene),
    /// Placeholder for a field that would recurse; always renders null.
    CycleObject { type_name: String },
    Optional(OptionalGene),
    Seeded(SeededGene),
    /// A value pinned by the schema.
    Fixed(Phenotype),
}

fn map_key(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Gene {
    /// False when no mutation can ever change this gene.
    pub fn is_mutable(&self) -> bool {
        match self {
            Gene::Fixed(_) | Gene::CycleObject { .. } => false,
            Gene::Object(o) => o.fields.iter().any(|(_, g)| g.is_mutable()),
            _ => true,
        }
    }

    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self {
            Gene::Integer(g) | Gene::Long(g) => g.randomize(rng),
            Gene::Float(g) | Gene::Double(g) => g.randomize(rng),
            Gene::BigInteger(g) => g.randomize(rng),
            Gene::BigDecimal(g) => g.randomize(rng),
            Gene::Boolean(b) => *b = rng.gen(),
            Gene::String(g) => g.randomize(rng),
            Gene::Regex(g) => g.randomize(rng),
            Gene::Enum(g) => g.randomize(rng),
            Gene::Date(g) => g.randomize(rng),
            Gene::Array(a) => {
                let n = rng.gen_range(a.min_size..=a.max_size);
                a.elements.clear();
                for _ in 0..n {
                    if let Some(e) = a.fresh_element(rng) {
                        a.elements.push(e);
                    }
                }
            }
            Gene::Map(m) => {
                let n = rng.gen_range(m.min_size..=m.max_size);
                m.entries.clear();
                for _ in 0..n {
                    if let Some(e) = m.fresh_entry(rng) {
                        m.entries.push(e);
                    }
                }
            }
            Gene::Object(o) => o.fields.iter_mut().for_each(|(_, g)| g.randomize(rng)),
            Gene::CycleObject { .. } | Gene::Fixed(_) => {}
            Gene::Optional(o) => {
                o.present = rng.gen_bool(P_OPTIONAL_PRESENT);
                o.inner.randomize(rng);
            }
            Gene::Seeded(s) => {
                s.gene.randomize(rng);
                s.seeded.randomize(rng);
            }
        }
    }

    /// Perturbs at least one leaf, or reports that no alternative exists.
    pub fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Mutation, GeneError> {
        Ok(match self {
            Gene::Fixed(_) => return Err(GeneError::ImmutableGene),
            Gene::CycleObject { .. } => Mutation::NoOp,
            Gene::Integer(g) | Gene::Long(g) => g.mutate(rng),
            Gene::Float(g) | Gene::Double(g) => g.mutate(rng),
            Gene::BigInteger(g) => g.mutate(rng),
            Gene::BigDecimal(g) => g.mutate(rng),
            Gene::Boolean(b) => {
                *b = !*b;
                Mutation::Changed
            }
            Gene::String(g) => g.mutate(rng),
            Gene::Regex(g) => g.mutate(rng),
            Gene::Enum(g) => g.mutate(rng),
            Gene::Date(g) => g.mutate(rng),
            Gene::Array(a) => a.mutate(rng),
            Gene::Map(m) => m.mutate(rng),
            Gene::Object(o) => mutate_subset(o.fields.iter_mut().map(|(_, g)| g), rng),
            Gene::Optional(o) => {
                if !o.present {
                    o.present = true;
                    Mutation::Changed
                } else if rng.gen_bool(P_OPTIONAL_DROP) || !o.inner.is_mutable() {
                    o.present = false;
                    Mutation::Changed
                } else {
                    match o.inner.mutate(rng)? {
                        Mutation::Changed => Mutation::Changed,
                        Mutation::NoOp => {
                            o.present = false;
                            Mutation::Changed
                        }
                    }
                }
            }
            Gene::Seeded(s) => {
                if rng.gen_bool(P_SEED_FLIP) {
                    s.employ_seeded = !s.employ_seeded;
                    Mutation::of(s.seeded.render() != s.gene.render())
                } else if s.employ_seeded {
                    s.seeded.mutate(rng)
                } else if s.gene.is_mutable() {
                    s.gene.mutate(rng)?
                } else {
                    Mutation::NoOp
                }
            }
        })
    }

    pub fn render(&self) -> Phenotype {
        match self {
            Gene::Integer(g) | Gene::Long(g) => g.render(),
            Gene::Float(g) | Gene::Double(g) => g.render(),
            Gene::BigInteger(g) => g.render(),
            Gene::BigDecimal(g) => g.render(),
            Gene::Boolean(b) => Value::Bool(*b),
            Gene::String(g) => g.render(),
            Gene::Regex(g) => g.render(),
            Gene::Enum(g) => g.render(),
            Gene::Date(g) => g.render(),
            Gene::Array(a) => Value::Array(a.elements.iter().map(Gene::render).collect()),
            Gene::Map(m) => {
                let mut out = Map::new();
                for (k, v) in &m.entries {
                    out.insert(map_key(&k.render()), v.render());
                }
                Value::Object(out)
            }
            Gene::Object(o) => {
                let mut out = Map::new();
                for (name, g) in &o.fields {
                    out.insert(name.clone(), g.render());
                }
                Value::Object(out)
            }
            Gene::CycleObject { .. } => Value::Null,
            Gene::Optional(o) => {
                if o.present {
                    o.inner.render()
                } else {
                    Value::Null
                }
            }
            Gene::Seeded(s) => {
                if s.employ_seeded {
                    s.seeded.render()
                } else {
                    s.gene.render()
                }
            }
            Gene::Fixed(v) => v.clone(),
        }
    }
}

/// Mutates each mutable gene with probability `1/m`, forcing at least one.
pub fn mutate_subset<'a, R, I>(genes: I, rng: &mut R) -> Mutation
where
    R: Rng + ?Sized,
    I: Iterator<Item = &'a mut Gene>,
{
    let mut candidates: Vec<&mut Gene> = genes.filter(|g| g.is_mutable()).collect();
    let m = candidates.len();
    if m == 0 {
        return Mutation::NoOp;
    }
    let p = 1.0 / m as f64;
    let mut chosen: Vec<usize> = (0..m).filter(|_| rng.gen_bool(p)).collect();
    if chosen.is_empty() {
        chosen.push(rng.gen_range(0..m));
    }
    let mut changed = false;
    for &i in &chosen {
        if let Ok(Mutation::Changed) = candidates[i].mutate(rng) {
            changed = true;
        }
    }
    if !changed {
        // Every chosen gene lacked an alternative; try the others once.
        for (i, g) in candidates.iter_mut().enumerate() {
            if !chosen.contains(&i) && matches!(g.mutate(rng), Ok(Mutation::Changed)) {
                return Mutation::Changed;
            }
        }
    }
    Mutation::of(changed)
}

impl ArrayGene {
    fn fresh_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Gene> {
        let taken: BTreeSet<String> = if self.unique {
            self.elements.iter().map(|e| e.render().to_string()).collect()
        } else {
            BTreeSet::new()
        };
        for _ in 0..UNIQUE_RETRIES {
            let mut g = (*self.prototype).clone();
            g.randomize(rng);
            if !self.unique || !taken.contains(&g.render().to_string()) {
                return Some(g);
            }
        }
        None
    }

    fn is_distinct_at(&self, i: usize) -> bool {
        let value = self.elements[i].render();
        self.elements.iter().enumerate().all(|(j, e)| j == i || e.render() != value)
    }

    fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let len = self.elements.len();
        let mut ops = Vec::with_capacity(3);
        if len < self.max_size {
            ops.push(0);
        }
        if len > self.min_size {
            ops.push(1);
        }
        if len > 0 && self.prototype.is_mutable() {
            ops.push(2);
        }
        if ops.is_empty() {
            return Mutation::NoOp;
        }
        match ops[rng.gen_range(0..ops.len())] {
            0 => match self.fresh_element(rng) {
                Some(e) => {
                    let i = rng.gen_range(0..=len);
                    self.elements.insert(i, e);
                    Mutation::Changed
                }
                None => Mutation::NoOp,
            },
            1 => {
                self.elements.remove(rng.gen_range(0..len));
                Mutation::Changed
            }
            _ => {
                let i = rng.gen_range(0..len);
                for _ in 0..UNIQUE_RETRIES {
                    let old = self.elements[i].clone();
                    match self.elements[i].mutate(rng) {
                        Ok(Mutation::Changed) if !self.unique || self.is_distinct_at(i) => return Mutation::Changed,
                        Ok(Mutation::Changed) => self.elements[i] = old,
                        _ => return Mutation::NoOp,
                    }
                }
                Mutation::NoOp
            }
        }
    }
}

impl MapGene {
    fn fresh_entry<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(Gene, Gene)> {
        let taken: BTreeSet<String> = self.entries.iter().map(|(k, _)| map_key(&k.render())).collect();
        for _ in 0..UNIQUE_RETRIES {
            let mut k = (*self.key_prototype).clone();
            k.randomize(rng);
            if !taken.contains(&map_key(&k.render())) {
                let mut v = (*self.value_prototype).clone();
                v.randomize(rng);
                return Some((k, v));
            }
        }
        None
    }

    fn key_is_distinct_at(&self, i: usize) -> bool {
        let key = map_key(&self.entries[i].0.render());
        self.entries
            .iter()
            .enumerate()
            .all(|(j, (k, _))| j == i || map_key(&k.render()) != key)
    }

    fn mutate<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Mutation {
        let len = self.entries.len();
        let mut ops = Vec::with_capacity(4);
        if len < self.max_size {
            ops.push(0);
        }
        if len > self.min_size {
            ops.push(1);
        }
        if len > 0 && self.key_prototype.is_mutable() {
            ops.push(2);
        }
        if len > 0 && self.value_prototype.is_mutable() {
            ops.push(3);
        }
        if ops.is_empty() {
            return Mutation::NoOp;
        }
        match ops[rng.gen_range(0..ops.len())] {
            0 => match self.fresh_entry(rng) {
                Some(e) => {
                    self.entries.push(e);
                    Mutation::Changed
                }
                None => Mutation::NoOp,
            },
            1 => {
                self.entries.remove(rng.gen_range(0..len));
                Mutation::Changed
            }
            2 => {
                let i = rng.gen_range(0..len);
                for _ in 0..UNIQUE_RETRIES {
                    let old = self.entries[i].0.clone();
                    match self.entries[i].0.mutate(rng) {
                        Ok(Mutation::Changed) if self.key_is_distinct_at(i) => return Mutation::Changed,
                        Ok(Mutation::Changed) => self.entries[i].0 = old,
                        _ => return Mutation::NoOp,
                    }
                }
                Mutation::NoOp
            }
            _ => {
                let i = rng.gen_range(0..len);
                self.entries[i].1.mutate(rng).unwrap_or(Mutation::NoOp)
            }
        }
    }
}
