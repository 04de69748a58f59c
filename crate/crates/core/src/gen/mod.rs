//! Input generation: random values within schema constraints, example
//! reuse, completion of partial example objects, and the enum/optional
//! parameter combinations used as coverage seeds.

mod combos;
mod regex;

use std::collections::HashMap;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{CompositeKind, JsonValue, Number, SchemaKind, ValueSchema};

pub use self::regex::RegexGen;
pub use combos::{enum_and_optional_combinations, optional_query_params, presence_masks, InputAssignment, MAX_FULL_OPTIONALS};

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub seed: u64,
    /// Chance of reusing a declared example when a slot has any.
    pub example_probability: f64,
    pub max_string_length: usize,
    pub max_array_items: usize,
    pub max_object_depth: usize,
    pub min_integer: i64,
    pub max_integer: i64,
    /// Keep fields of example objects that the schema does not declare.
    pub keep_unknown_fields: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            example_probability: 0.5,
            max_string_length: 16,
            max_array_items: 3,
            max_object_depth: 6,
            min_integer: -1000,
            max_integer: 1000,
            keep_unknown_fields: true,
        }
    }
}

const REGEX_TRIES: usize = 100;
const ALNUM: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// Seeded value generator. Same seed and same call sequence give the same
/// values.
#[derive(Debug)]
pub struct Generator {
    pub cfg: GenConfig,
    rng: ChaCha8Rng,
    regexes: HashMap<String, Option<RegexGen>>,
    warnings: Vec<String>,
}

impl Generator {
    pub fn new(cfg: GenConfig) -> Generator {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Generator {
            cfg,
            rng,
            regexes: HashMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p.clamp(0.0, 1.0))
    }

    /// Warnings collected since the last call (unsatisfiable constraints,
    /// regexes that could not be sampled).
    pub fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }

    /// A value for `schema`, reusing its own examples with the configured
    /// probability.
    pub fn value(&mut self, schema: &ValueSchema) -> JsonValue {
        self.value_at(schema, 0)
    }

    /// A value for a slot with `examples`; also returns the index of the
    /// example used, if any. Object examples are completed against the
    /// schema.
    pub fn slot(&mut self, schema: &ValueSchema, examples: &[JsonValue]) -> (JsonValue, Option<usize>) {
        if !examples.is_empty() && self.chance(self.cfg.example_probability) {
            let i = self.rng.gen_range(0..examples.len());
            return (self.adapt_example(schema, &examples[i]), Some(i));
        }
        (self.random_value(schema, 0), None)
    }

    fn adapt_example(&mut self, schema: &ValueSchema, example: &JsonValue) -> JsonValue {
        let flat = schema.flattened();
        if matches!(flat.kind, SchemaKind::Object(_)) && example.as_object().is_some() {
            self.complete_example_object(&flat, example)
        } else {
            example.clone()
        }
    }

    fn value_at(&mut self, schema: &ValueSchema, depth: usize) -> JsonValue {
        if !schema.examples.is_empty() && self.chance(self.cfg.example_probability) {
            let ex = schema.examples.choose(&mut self.rng).cloned().unwrap_or_default();
            return self.adapt_example(schema, &ex);
        }
        self.random_value(schema, depth)
    }

    /// Keeps every field of `partial` verbatim, fills missing required
    /// fields, and leaves missing optional fields undefined.
    pub fn complete_example_object(&mut self, schema: &ValueSchema, partial: &JsonValue) -> JsonValue {
        let schema = schema.flattened();
        let Some(given) = partial.as_object() else {
            return partial.clone();
        };
        let mut out = IndexMap::new();
        for f in schema.fields() {
            match given.get(&f.name) {
                Some(v) if !v.is_undefined() => {
                    out.insert(f.name.clone(), v.clone());
                }
                _ if f.required => {
                    let v = self.value_at(&f.schema, 1);
                    out.insert(f.name.clone(), v);
                }
                _ => {}
            }
        }
        for (k, v) in given {
            if schema.field(k).is_none() {
                if self.cfg.keep_unknown_fields {
                    self.warnings
                        .push(format!("example field `{k}` is not declared in the schema; kept as is"));
                    out.insert(k.clone(), v.clone());
                } else {
                    self.warnings
                        .push(format!("example field `{k}` is not declared in the schema; dropped"));
                }
            }
        }
        JsonValue::Object(out)
    }

    fn random_value(&mut self, schema: &ValueSchema, depth: usize) -> JsonValue {
        if schema.nullable && (depth > self.cfg.max_object_depth || self.chance(0.1)) {
            return JsonValue::Null;
        }
        let enums = &schema.constraints.enum_values;
        if !enums.is_empty() {
            return enums.choose(&mut self.rng).cloned().unwrap_or_default();
        }
        match &schema.kind {
            SchemaKind::String | SchemaKind::Any => JsonValue::String(self.string(schema)),
            SchemaKind::Integer => JsonValue::Number(Number::from_i64(self.integer(schema))),
            SchemaKind::Number => JsonValue::Number(self.number(schema)),
            SchemaKind::Boolean => JsonValue::Bool(self.rng.gen()),
            SchemaKind::Array(item) => {
                let c = &schema.constraints;
                let min = c.min_items.unwrap_or(0);
                let cap = if depth >= self.cfg.max_object_depth { min } else { self.cfg.max_array_items.max(min) };
                let max = c.max_items.unwrap_or(cap).min(cap.max(min));
                if c.max_items.is_some_and(|m| m < min) {
                    self.warnings.push(format!("minItems {min} exceeds maxItems; using {min}"));
                }
                let n = self.rng.gen_range(min..=max.max(min));
                JsonValue::Array((0..n).map(|_| self.value_at(item, depth + 1)).collect())
            }
            SchemaKind::Object(fields) => {
                let mut out = IndexMap::new();
                for f in fields {
                    let include = f.required || (depth < self.cfg.max_object_depth && self.chance(0.5));
                    if include {
                        let v = self.value_at(&f.schema, depth + 1);
                        out.insert(f.name.clone(), v);
                    }
                }
                JsonValue::Object(out)
            }
            SchemaKind::Composite(CompositeKind::AllOf, _) => {
                let flat = schema.flattened();
                self.random_value(&flat, depth)
            }
            SchemaKind::Composite(_, branches) => match branches.choose(&mut self.rng) {
                Some(b) => {
                    let b = b.clone();
                    self.value_at(&b, depth)
                }
                None => JsonValue::Null,
            },
        }
    }

    fn string(&mut self, schema: &ValueSchema) -> String {
        let c = &schema.constraints;
        if let Some(p) = c.pattern.clone() {
            if let Some(s) = self.regex_string(&p) {
                return s;
            }
        }
        match schema.format.as_deref() {
            Some("date") => return self.date(),
            Some("date-time") => {
                let d = self.date();
                let (h, m, s) = (self.rng.gen_range(0..24), self.rng.gen_range(0..60), self.rng.gen_range(0..60));
                return format!("{d}T{h:02}:{m:02}:{s:02}Z");
            }
            Some("uuid") => {
                let b: [u8; 16] = self.rng.gen();
                let h = hex::encode(b);
                return format!("{}-{}-{}-{}-{}", &h[0..8], &h[8..12], &h[12..16], &h[16..20], &h[20..32]);
            }
            Some("email") => return format!("{}@example.com", self.alnum(1, 8)),
            _ => {}
        }
        let min = c.min_length.unwrap_or_else(|| c.max_length.map_or(1, |m| m.min(1)));
        let max = c.max_length.unwrap_or(self.cfg.max_string_length.max(min));
        if max < min {
            self.warnings
                .push(format!("minLength {min} exceeds maxLength {max}; generating {min} characters"));
        }
        self.alnum(min, max.max(min))
    }

    fn alnum(&mut self, min: usize, max: usize) -> String {
        let n = self.rng.gen_range(min..=max);
        (0..n).map(|_| *ALNUM.choose(&mut self.rng).unwrap() as char).collect()
    }

    fn date(&mut self) -> String {
        format!(
            "{:04}-{:02}-{:02}",
            self.rng.gen_range(2000..2030),
            self.rng.gen_range(1..=12),
            self.rng.gen_range(1..=28)
        )
    }

    fn regex_string(&mut self, pattern: &str) -> Option<String> {
        let entry = self.regexes.entry(pattern.to_string()).or_insert_with(|| RegexGen::new(pattern).ok());
        let Some(g) = entry.as_ref() else {
            self.warnings
                .push(format!("pattern `{pattern}` cannot be parsed; generating an unconstrained string"));
            return None;
        };
        let mut last = String::new();
        for _ in 0..REGEX_TRIES {
            last = g.sample(&mut self.rng);
            if g.is_match(&last) {
                return Some(last);
            }
        }
        self.warnings
            .push(format!("no sample matched pattern `{pattern}` after {REGEX_TRIES} tries; using a best-effort value"));
        Some(last)
    }

    fn integer(&mut self, schema: &ValueSchema) -> i64 {
        let c = &schema.constraints;
        let mut lo = c.minimum.map(|m| m.ceil() as i64).unwrap_or(self.cfg.min_integer);
        let mut hi = c.maximum.map(|m| m.floor() as i64).unwrap_or(self.cfg.max_integer);
        if c.exclusive_minimum && c.minimum.is_some_and(|m| m.fract() == 0.0) {
            lo += 1;
        }
        if c.exclusive_maximum && c.maximum.is_some_and(|m| m.fract() == 0.0) {
            hi -= 1;
        }
        // Keep the default window when only one bound is given.
        if c.minimum.is_some() && c.maximum.is_none() {
            hi = lo.saturating_add(self.cfg.max_integer - self.cfg.min_integer);
        } else if c.maximum.is_some() && c.minimum.is_none() {
            lo = hi.saturating_sub(self.cfg.max_integer - self.cfg.min_integer);
        }
        if lo > hi {
            self.warnings
                .push(format!("minimum {lo} exceeds maximum {hi}; using {lo}"));
            return lo;
        }
        self.rng.gen_range(lo..=hi)
    }

    fn number(&mut self, schema: &ValueSchema) -> Number {
        let c = &schema.constraints;
        let lo = c.minimum.unwrap_or(self.cfg.min_integer as f64);
        let hi = c.maximum.unwrap_or(self.cfg.max_integer as f64);
        if lo > hi {
            self.warnings
                .push(format!("minimum {lo} exceeds maximum {hi}; using {lo}"));
            return Number::from_f64(lo);
        }
        for _ in 0..16 {
            let x = (self.rng.gen_range(lo..=hi) * 100.0).round() / 100.0;
            let ok = x >= lo && x <= hi && !(c.exclusive_minimum && x == lo) && !(c.exclusive_maximum && x == hi);
            if ok {
                return Number::from_f64(x);
            }
        }
        Number::from_f64((lo + hi) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FieldSchema;
    use proptest::prelude::*;

    fn gen(p: f64) -> Generator {
        Generator::new(GenConfig {
            seed: 7,
            example_probability: p,
            ..GenConfig::default()
        })
    }

    fn field(name: &str, required: bool) -> FieldSchema {
        FieldSchema {
            name: name.into(),
            schema: ValueSchema::string(),
            required,
        }
    }

    #[test]
    fn enum_forces_membership() {
        let s = ValueSchema::integer().with_enum(vec![JsonValue::int(1), JsonValue::int(2), JsonValue::int(3)]);
        let mut g = gen(0.5);
        for _ in 0..200 {
            let v = g.value(&s);
            assert!(s.constraints.enum_values.contains(&v), "{v}");
        }
    }

    #[test]
    fn examples_with_probability_one() {
        let ex = vec![JsonValue::string("alpha"), JsonValue::string("beta")];
        let mut g = gen(1.0);
        for _ in 0..100 {
            let (v, i) = g.slot(&ValueSchema::string(), &ex);
            assert_eq!(v, ex[i.unwrap()]);
        }
    }

    #[test]
    fn complete_partial_example() {
        // 10 fields: foo, bar in the example; r1..r3 required; o1..o5 optional.
        let mut fields = vec![field("foo", false), field("bar", false)];
        fields.extend((1..=3).map(|i| field(&format!("r{i}"), true)));
        fields.extend((1..=5).map(|i| field(&format!("o{i}"), false)));
        let s = ValueSchema::object(fields);
        let partial = JsonValue::object([("foo", JsonValue::string("a")), ("bar", JsonValue::string("d"))]);
        let mut g = gen(0.5);
        for _ in 0..500 {
            let out = g.complete_example_object(&s, &partial);
            assert_eq!(out.get("foo"), &JsonValue::string("a"));
            assert_eq!(out.get("bar"), &JsonValue::string("d"));
            for i in 1..=3 {
                assert!(matches!(out.get(&format!("r{i}")), JsonValue::String(_)));
            }
            for i in 1..=5 {
                assert!(out.get(&format!("o{i}")).is_undefined());
            }
        }
    }

    #[test]
    fn complete_covering_example_is_unchanged() {
        let s = ValueSchema::object(vec![field("a", true), field("b", false)]);
        let ex = JsonValue::object([("a", JsonValue::string("x"))]);
        assert_eq!(gen(0.5).complete_example_object(&s, &ex), ex);
    }

    #[test]
    fn unsatisfiable_bounds_warn() {
        let mut s = ValueSchema::integer();
        s.constraints.minimum = Some(10.0);
        s.constraints.maximum = Some(5.0);
        let mut g = gen(0.0);
        assert_eq!(g.value(&s), JsonValue::int(10));
        assert_eq!(g.take_warnings().len(), 1);
    }

    #[test]
    fn deterministic_sequences() {
        let s = ValueSchema::object(vec![field("a", true), field("b", false)]);
        let a: Vec<_> = {
            let mut g = gen(0.5);
            (0..50).map(|_| g.value(&s)).collect()
        };
        let b: Vec<_> = {
            let mut g = gen(0.5);
            (0..50).map(|_| g.value(&s)).collect()
        };
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn regex_samples_match(seed in any::<u64>(), idx in 0usize..4) {
            let patterns = ["^[A-Z]{2}[0-9]{3}$", "^(red|green|blue)-[a-f0-9]{1,6}$", r"^\d+(\.\d{1,2})?$", "^x[^x]*x$"];
            let mut s = ValueSchema::string();
            s.constraints.pattern = Some(patterns[idx].to_string());
            let oracle = ::regex::Regex::new(patterns[idx]).unwrap();
            let mut g = Generator::new(GenConfig { seed, ..GenConfig::default() });
            for _ in 0..50 {
                let v = g.value(&s);
                prop_assert!(oracle.is_match(v.as_str().unwrap()));
            }
        }

        #[test]
        fn primitives_respect_bounds(seed in any::<u64>(), lo in -50i64..50, span in 0i64..100, len in 1usize..10) {
            let mut int = ValueSchema::integer();
            int.constraints.minimum = Some(lo as f64);
            int.constraints.maximum = Some((lo + span) as f64);
            let mut st = ValueSchema::string();
            st.constraints.max_length = Some(len);
            let mut g = Generator::new(GenConfig { seed, ..GenConfig::default() });
            for _ in 0..20 {
                let i = g.value(&int);
                let i = match &i { JsonValue::Number(n) => n.as_i64().unwrap(), _ => unreachable!() };
                prop_assert!(i >= lo && i <= lo + span);
                let s = g.value(&st);
                prop_assert!(s.as_str().unwrap().chars().count() <= len);
            }
        }
    }
}
