use std::collections::BTreeMap;

use rand::Rng;
use serde_json::{Number, Value};

use super::regex::RegexAst;
use super::scalar::{BigDecimalGene, BigIntegerGene, DateFormat, DateGene, EnumGene, FloatGene, IntegerGene, RegexGene, StringGene};
use super::{
    ArrayGene, Gene, GeneError, MapGene, ObjectGene, OptionalGene, SeededGene, DEFAULT_MAX_COLLECTION_SIZE,
    MAX_COLLECTION_SIZE, MAX_OBJECT_DEPTH,
};
use crate::schema::{FunctionSpec, ParamSpec, RpcSchema, SupportedDataType as K};

/// Seeded candidate values keyed by `Interface.action.param` or `Type.field`.
pub type SeedCatalog = BTreeMap<String, Vec<Value>>;

pub const DEFAULT_MAX_STRING_LEN: usize = 16;
/// Strings never grow past this unless the parameter demands a longer minimum.
const HARD_MAX_STRING_LEN: usize = 256;
/// Magnitude bound for unconstrained FLOAT and DOUBLE values.
pub const DEFAULT_DOUBLE_BOUND: f64 = 1e6;
const DEFAULT_DECIMAL_PRECISION: u32 = 15;
const DEFAULT_DECIMAL_SCALE: u32 = 2;
/// Largest precision an `i128` unscaled value can carry.
const MAX_DECIMAL_PRECISION: u32 = 38;
const BIG_INTEGER_BOUND: i128 = 1_000_000_000_000_000_000_000_000_000_000;
/// Chance that a randomized nullable value is present.
pub const P_OPTIONAL_PRESENT: f64 = 0.8;

/// Builds gene trees for parameters of a schema.
pub struct GeneBuilder<'a> {
    schema: &'a RpcSchema,
    seeds: Option<&'a SeedCatalog>,
}

fn num_to_i128(n: &Number, inclusive: bool, lower: bool) -> i128 {
    if let Some(i) = n.as_i64() {
        let i = i as i128;
        return match (inclusive, lower) {
            (true, _) => i,
            (false, true) => i + 1,
            (false, false) => i - 1,
        };
    }
    if let Some(u) = n.as_u64() {
        let u = u as i128;
        return if inclusive { u } else if lower { u + 1 } else { u - 1 };
    }
    let f = n.as_f64().unwrap_or(0.0);
    let r = match (inclusive, lower) {
        (true, true) => f.ceil(),
        (false, true) => f.floor() + 1.0,
        (true, false) => f.floor(),
        (false, false) => f.ceil() - 1.0,
    };
    r.clamp(i128::MIN as f64, i128::MAX as f64) as i128
}

fn int_bounds(spec: &ParamSpec, tmin: i128, tmax: i128) -> (i128, i128) {
    let lo = spec
        .min_value
        .as_ref()
        .map_or(tmin, |n| num_to_i128(n, spec.min_inclusive, true))
        .max(tmin);
    let hi = spec
        .max_value
        .as_ref()
        .map_or(tmax, |n| num_to_i128(n, spec.max_inclusive, false))
        .min(tmax);
    (lo, hi.max(lo))
}

fn is_integral_number(n: &Number) -> bool {
    n.is_i64() || n.is_u64() || n.as_f64().is_some_and(|f| f.fract() == 0.0)
}

fn float_bounds(spec: &ParamSpec, type_max: f64) -> (f64, f64) {
    let min = spec.min_value.as_ref().and_then(Number::as_f64);
    let max = spec.max_value.as_ref().and_then(Number::as_f64);
    let mut lo = match min {
        Some(m) if spec.min_inclusive => m,
        Some(m) => m.next_up(),
        None => -DEFAULT_DOUBLE_BOUND.max(max.map_or(0.0, |m| -m + DEFAULT_DOUBLE_BOUND)),
    };
    let mut hi = match max {
        Some(m) if spec.max_inclusive => m,
        Some(m) => m.next_down(),
        None => DEFAULT_DOUBLE_BOUND.max(min.map_or(0.0, |m| m + DEFAULT_DOUBLE_BOUND)),
    };
    if let Some(p) = spec.precision {
        let int_digits = p.saturating_sub(spec.scale.unwrap_or(0)).min(300) as i32;
        let limit = 10f64.powi(int_digits);
        let limit = if spec.scale.is_some() { limit - 10f64.powi(-(spec.scale.unwrap_or(0).min(22) as i32)) } else { limit.next_down() };
        lo = lo.max(-limit);
        hi = hi.min(limit);
    }
    lo = lo.max(-type_max);
    hi = hi.min(type_max);
    (lo, hi.max(lo))
}

fn size_bounds(spec: &ParamSpec, default_max: usize, cap: usize) -> (usize, usize) {
    let min = spec.min_size.map_or(0, |m| m as usize);
    let max = spec.max_size.map_or(min.max(default_max), |m| m as usize);
    (min, max.min(cap).max(min))
}

impl<'a> GeneBuilder<'a> {
    pub fn new(schema: &'a RpcSchema) -> Self {
        GeneBuilder { schema, seeds: None }
    }

    pub fn with_seeds(mut self, seeds: &'a SeedCatalog) -> Self {
        self.seeds = Some(seeds);
        self
    }

    /// A randomized gene for a standalone spec.
    pub fn gene_from_param_spec<R: Rng + ?Sized>(&self, spec: &ParamSpec, rng: &mut R) -> Result<Gene, GeneError> {
        let mut g = self.build(spec, None)?;
        g.randomize(rng);
        Ok(g)
    }

    /// Randomized genes for every request parameter of a function.
    pub fn action_genes<R: Rng + ?Sized>(&self, f: &FunctionSpec, rng: &mut R) -> Result<Vec<Gene>, GeneError> {
        let mut genes = self.action_templates(f)?;
        genes.iter_mut().for_each(|g| g.randomize(rng));
        Ok(genes)
    }

    /// Unrandomized genes for every request parameter of a function.
    pub fn action_templates(&self, f: &FunctionSpec) -> Result<Vec<Gene>, GeneError> {
        f.request_params
            .iter()
            .map(|p| self.build(p, Some(&format!("{}.{}.{}", f.interface_id, f.action_name, p.name))))
            .collect()
    }

    /// Unrandomized gene tree; `seed_key` selects seeded candidates.
    pub fn build(&self, spec: &ParamSpec, seed_key: Option<&str>) -> Result<Gene, GeneError> {
        self.node(spec, seed_key, &mut Vec::new())
    }

    fn node(&self, spec: &ParamSpec, seed_key: Option<&str>, ancestors: &mut Vec<String>) -> Result<Gene, GeneError> {
        let base = self.base(spec, ancestors)?;
        if !spec.is_mutable {
            return Ok(Gene::Fixed(spec.default_value.clone().unwrap_or_else(|| base.render())));
        }
        if matches!(base, Gene::CycleObject { .. }) {
            return Ok(base);
        }
        let seeds = seed_key.and_then(|k| self.seeds?.get(k)).filter(|v| !v.is_empty());
        let gene = match seeds {
            Some(candidates) => Gene::Seeded(SeededGene {
                gene: Box::new(base),
                seeded: EnumGene::new(candidates.clone()),
                employ_seeded: true,
            }),
            None => base,
        };
        Ok(if spec.is_nullable {
            Gene::Optional(OptionalGene {
                present: true,
                inner: Box::new(gene),
            })
        } else {
            gene
        })
    }

    fn base(&self, spec: &ParamSpec, ancestors: &mut Vec<String>) -> Result<Gene, GeneError> {
        let integer = |tmin: i128, tmax: i128| {
            let (lo, hi) = int_bounds(spec, tmin, tmax);
            IntegerGene::new(lo as i64, hi as i64)
        };
        Ok(match spec.kind() {
            K::Int => Gene::Integer(integer(i32::MIN as i128, i32::MAX as i128)),
            K::Short => Gene::Integer(integer(i16::MIN as i128, i16::MAX as i128)),
            K::Byte => Gene::Integer(integer(i8::MIN as i128, i8::MAX as i128)),
            K::Long => Gene::Long(integer(i64::MIN as i128, i64::MAX as i128)),
            K::Boolean => Gene::Boolean(spec.default_value.as_ref().and_then(Value::as_bool).unwrap_or(false)),
            K::Double => {
                let (lo, hi) = float_bounds(spec, f64::MAX);
                Gene::Double(FloatGene::new(lo, hi, spec.scale, false))
            }
            K::Float => {
                let (lo, hi) = float_bounds(spec, f32::MAX as f64);
                Gene::Float(FloatGene::new(lo, hi, spec.scale, true))
            }
            K::BigInteger => {
                let (lo, hi) = int_bounds(spec, -BIG_INTEGER_BOUND, BIG_INTEGER_BOUND);
                let lo = match spec.precision {
                    Some(p) => lo.max(-(10i128.pow(p.min(MAX_DECIMAL_PRECISION)) - 1)),
                    None => lo,
                };
                let hi = match spec.precision {
                    Some(p) => hi.min(10i128.pow(p.min(MAX_DECIMAL_PRECISION)) - 1),
                    None => hi,
                };
                Gene::BigInteger(BigIntegerGene { min: lo, max: hi.max(lo), value: 0.clamp(lo, hi.max(lo)) })
            }
            K::BigDecimal => Gene::BigDecimal(self.decimal(spec)),
            K::Date => Gene::Date(DateGene::new(DateFormat::DateTime)),
            K::Char => Gene::String(StringGene::new(1, 1)),
            K::String | K::ByteBuffer => self.textual(spec),
            K::Enum => {
                let def = self
                    .schema
                    .resolve(&spec.type_spec.type_name)
                    .ok_or_else(|| GeneError::UnresolvedType(spec.type_spec.type_name.clone()))?;
                if def.enum_items.is_empty() {
                    return Err(GeneError::UnsupportedType(format!("enum '{}' has no items", def.type_name)));
                }
                Gene::Enum(EnumGene::new(def.enum_items.iter().map(|s| Value::from(s.as_str())).collect()))
            }
            K::List | K::Set | K::Array => {
                let elem = spec
                    .element_spec()
                    .ok_or_else(|| GeneError::UnsupportedType(format!("{:?} without element type", spec.kind())))?;
                let prototype = self.node(&elem, None, ancestors)?;
                let (min, mut max) = size_bounds(spec, DEFAULT_MAX_COLLECTION_SIZE, MAX_COLLECTION_SIZE);
                if matches!(prototype, Gene::CycleObject { .. }) {
                    max = min;
                }
                Gene::Array(ArrayGene {
                    min_size: min,
                    max_size: max,
                    unique: spec.kind() == K::Set,
                    prototype: Box::new(prototype),
                    elements: Vec::new(),
                })
            }
            K::Map => {
                let (mut k, v) = spec
                    .map_specs()
                    .ok_or_else(|| GeneError::UnsupportedType("MAP without key and value types".into()))?;
                if !matches!(k.kind(), K::Int | K::Short | K::Byte | K::Long | K::String | K::Char | K::Enum) {
                    return Err(GeneError::UnsupportedType(format!("map key {:?}", k.kind())));
                }
                k.is_nullable = false;
                let key = self.node(&k, None, ancestors)?;
                let value = self.node(&v, None, ancestors)?;
                let (min, max) = size_bounds(spec, DEFAULT_MAX_COLLECTION_SIZE, MAX_COLLECTION_SIZE);
                Gene::Map(MapGene {
                    min_size: min,
                    max_size: max,
                    key_prototype: Box::new(key),
                    value_prototype: Box::new(value),
                    entries: Vec::new(),
                })
            }
            K::CustomObject => {
                let name = &spec.type_spec.type_name;
                if ancestors.iter().any(|a| a == name) || ancestors.len() >= MAX_OBJECT_DEPTH {
                    return Ok(Gene::CycleObject { type_name: name.clone() });
                }
                let fields = if spec.inner_content.is_empty() {
                    &self
                        .schema
                        .resolve(name)
                        .ok_or_else(|| GeneError::UnresolvedType(name.clone()))?
                        .fields
                } else {
                    &spec.inner_content
                };
                ancestors.push(name.clone());
                let built = fields
                    .iter()
                    .map(|f| {
                        let key = format!("{name}.{}", f.name);
                        Ok((f.name.clone(), self.node(f, Some(&key), ancestors)?))
                    })
                    .collect::<Result<Vec<_>, GeneError>>();
                ancestors.pop();
                Gene::Object(ObjectGene {
                    type_name: name.clone(),
                    fields: built?,
                })
            }
        })
    }

    fn textual(&self, spec: &ParamSpec) -> Gene {
        if let Some(pattern) = &spec.pattern {
            match RegexAst::parse(pattern) {
                Ok(ast) => {
                    let min = spec.min_size.map_or(0, |m| m as usize);
                    let max = spec.max_size.map_or(usize::MAX, |m| m as usize);
                    return Gene::Regex(RegexGene::new(pattern, ast, min, max));
                }
                Err(e) => log::warn!("{}: pattern '{pattern}' not generated ({e}); using a plain string", spec.name),
            }
        }
        if spec.kind() == K::String && (spec.min_value.is_some() || spec.max_value.is_some()) {
            let integral = spec.min_value.iter().chain(spec.max_value.iter()).all(is_integral_number) && spec.scale.is_none();
            return if integral {
                let (lo, hi) = int_bounds(spec, i64::MIN as i128, i64::MAX as i128);
                let mut g = IntegerGene::new(lo as i64, hi as i64);
                g.as_string = true;
                Gene::Long(g)
            } else {
                let (lo, hi) = float_bounds(spec, f64::MAX);
                let mut g = FloatGene::new(lo, hi, spec.scale, false);
                g.as_string = true;
                Gene::Double(g)
            };
        }
        let (min, max) = size_bounds(spec, DEFAULT_MAX_STRING_LEN, HARD_MAX_STRING_LEN);
        Gene::String(StringGene::new(min, max))
    }

    fn decimal(&self, spec: &ParamSpec) -> BigDecimalGene {
        let scale = spec
            .scale
            .unwrap_or(if spec.precision.is_some() { 0 } else { DEFAULT_DECIMAL_SCALE })
            .min(MAX_DECIMAL_PRECISION);
        let precision = spec
            .precision
            .unwrap_or(DEFAULT_DECIMAL_PRECISION.max(scale))
            .clamp(scale.max(1), MAX_DECIMAL_PRECISION);
        let digits_bound = 10i128.pow(precision) - 1;
        let factor = 10f64.powi(scale as i32);
        let scaled = |n: &Number, inclusive: bool, lower: bool| -> i128 {
            let v = n.as_f64().unwrap_or(0.0) * factor;
            let r = match (inclusive, lower) {
                (true, true) => v.ceil(),
                (false, true) => v.floor() + 1.0,
                (true, false) => v.floor(),
                (false, false) => v.ceil() - 1.0,
            };
            r.clamp(-(digits_bound as f64), digits_bound as f64) as i128
        };
        let lo = spec.min_value.as_ref().map_or(-digits_bound, |n| scaled(n, spec.min_inclusive, true)).max(-digits_bound);
        let hi = spec.max_value.as_ref().map_or(digits_bound, |n| scaled(n, spec.max_inclusive, false)).min(digits_bound);
        let hi = hi.max(lo);
        BigDecimalGene {
            precision,
            scale,
            min_unscaled: lo,
            max_unscaled: hi,
            unscaled: 0.clamp(lo, hi),
        }
    }
}
