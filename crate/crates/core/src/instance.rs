//! Problem data: molds, planning horizon and beam types.
//!
//! Instance files are TOML documents:
//!
//! ```toml
//! unit_scale = 1000        # base units per input unit (optional, default 1000)
//! molds = [10.0, 12.5]     # mold capacities
//! periods = 3              # planning horizon T
//!
//! [[beam_types]]
//! curing_time = 3
//! lengths = [6.0, 4.5]
//! demands = [1, 2]
//! ```
//!
//! Lengths are read from their literal text, so `14.2` becomes exactly
//! `14200` base units at the default scale. Within a beam type the lengths are
//! sorted ascending and every length index `k` used elsewhere refers to that
//! canonical order.

use std::fmt;

use thiserror::Error;
use toml_edit::{DocumentMut, Item, TableLike, Value};

use crate::units::{parse_decimal, DecimalError, Length, UnitScale};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeamType {
    curing_time: u32,
    lengths: Vec<Length>,
    demands: Vec<u32>,
}

impl BeamType {
    /// Builds a beam type from `(length, demand)` pairs, sorting them by length.
    pub fn new(curing_time: u32, mut items: Vec<(Length, u32)>) -> Self {
        items.sort_by_key(|&(len, _)| len);
        let (lengths, demands) = items.into_iter().unzip();
        BeamType { curing_time, lengths, demands }
    }

    #[inline]
    pub fn curing_time(&self) -> u32 {
        self.curing_time
    }

    #[inline]
    pub fn lengths(&self) -> &[Length] {
        &self.lengths
    }

    #[inline]
    pub fn demands(&self) -> &[u32] {
        &self.demands
    }

    /// Number of distinct lengths (`q_c`).
    #[inline]
    pub fn num_lengths(&self) -> usize {
        self.lengths.len()
    }

    #[inline]
    pub fn shortest(&self) -> Option<Length> {
        self.lengths.first().copied()
    }

    pub fn total_demand(&self) -> u64 {
        self.demands.iter().map(|&d| u64::from(d)).sum()
    }

    /// Sum of `length * demand` in base units.
    pub fn demand_volume(&self) -> u128 {
        self.lengths
            .iter()
            .zip(&self.demands)
            .map(|(l, &d)| u128::from(l.base_units()) * u128::from(d))
            .sum()
    }
}

/// A complete problem instance. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    unit_scale: UnitScale,
    molds: Vec<Length>,
    periods: u32,
    beam_types: Vec<BeamType>,
}

/// A broken instance rule, reported as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("invalid instance: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Instance {
    /// Builds and validates an instance.
    pub fn new(
        unit_scale: UnitScale,
        molds: Vec<Length>,
        periods: u32,
        beam_types: Vec<BeamType>,
    ) -> Result<Self, InstanceError> {
        let inst = Self::from_parts_unchecked(unit_scale, molds, periods, beam_types);
        let violations = inst.validate();
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(InstanceError::Invalid(violations))
        }
    }

    /// Builds an instance without checking it. Everything downstream of this
    /// module assumes [`Instance::validate`] returns no violations.
    pub fn from_parts_unchecked(
        unit_scale: UnitScale,
        molds: Vec<Length>,
        periods: u32,
        beam_types: Vec<BeamType>,
    ) -> Self {
        Instance { unit_scale, molds, periods, beam_types }
    }

    #[inline]
    pub fn unit_scale(&self) -> UnitScale {
        self.unit_scale
    }

    #[inline]
    pub fn molds(&self) -> &[Length] {
        &self.molds
    }

    #[inline]
    pub fn mold(&self, m: usize) -> Length {
        self.molds[m]
    }

    #[inline]
    pub fn num_molds(&self) -> usize {
        self.molds.len()
    }

    #[inline]
    pub fn periods(&self) -> u32 {
        self.periods
    }

    #[inline]
    pub fn beam_types(&self) -> &[BeamType] {
        &self.beam_types
    }

    #[inline]
    pub fn beam_type(&self, c: usize) -> &BeamType {
        &self.beam_types[c]
    }

    #[inline]
    pub fn num_types(&self) -> usize {
        self.beam_types.len()
    }

    /// Largest curing time over all beam types (`R`).
    pub fn max_curing_time(&self) -> u32 {
        self.beam_types.iter().map(BeamType::curing_time).max().unwrap_or(0)
    }

    pub fn max_mold(&self) -> Length {
        self.molds.iter().copied().max().unwrap_or(Length::ZERO)
    }

    /// Index of the shortest mold, lowest index on ties.
    pub fn shortest_mold(&self) -> usize {
        let mut best = 0;
        for (m, &cap) in self.molds.iter().enumerate() {
            if cap < self.molds[best] {
                best = m;
            }
        }
        best
    }

    pub fn total_demand(&self) -> u64 {
        self.beam_types.iter().map(BeamType::total_demand).sum()
    }

    pub fn has_demand(&self) -> bool {
        self.total_demand() > 0
    }

    /// All rule violations, in field order. Empty means the instance is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |field: String, rule: String| out.push(Violation { field, rule });
        if self.molds.is_empty() {
            push("molds".into(), "at least one mold is required".into());
        }
        if self.periods == 0 {
            push("periods".into(), "periods must be positive".into());
        }
        if self.beam_types.is_empty() {
            push("beam_types".into(), "at least one beam type is required".into());
        }
        let scale = self.unit_scale;
        let max_mold = self.max_mold();
        for (c, bt) in self.beam_types.iter().enumerate() {
            let field = format!("beam_types[{}]", c + 1);
            if bt.curing_time == 0 {
                push(format!("{field}.curing_time"), "curing time must be at least 1".into());
            } else if self.periods > 0 && bt.curing_time > self.periods {
                push(
                    format!("{field}.curing_time"),
                    format!("curing time exceeds horizon ({} > {})", bt.curing_time, self.periods),
                );
            }
            if bt.lengths.is_empty() {
                push(format!("{field}.lengths"), "a beam type needs at least one length".into());
            }
            for (k, pair) in bt.lengths.windows(2).enumerate() {
                if pair[0] == pair[1] {
                    push(
                        format!("{field}.lengths[{}]", k + 2),
                        format!("duplicate length {} in type {}", pair[0].to_decimal(scale), c + 1),
                    );
                }
            }
            for (k, (&len, &demand)) in bt.lengths.iter().zip(&bt.demands).enumerate() {
                if len == Length::ZERO {
                    push(format!("{field}.lengths[{}]", k + 1), "lengths must be positive".into());
                } else if demand > 0 && len > max_mold {
                    push(
                        format!("{field}.lengths[{}]", k + 1),
                        format!(
                            "length {} of type {} exceeds every mold (demand at (c,k) = ({},{}))",
                            len.to_decimal(scale),
                            c + 1,
                            c + 1,
                            k + 1
                        ),
                    );
                }
            }
        }
        out
    }
}

/// Free-function form of [`Instance::validate`].
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    inst.validate()
}

/// Parses an instance document and validates it.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let doc: DocumentMut = text.parse().map_err(|err: toml_edit::TomlError| {
        let (line, column) = match err.span() {
            Some(span) => line_col(text, span.start),
            None => (1, 1),
        };
        let message = err.message().trim().to_string();
        ParseError::Syntax { line, column, message }
    })?;
    let root = doc.as_table();
    check_keys(root, "", &["unit_scale", "molds", "periods", "beam_types"])?;

    let unit_scale = match root.get("unit_scale") {
        None => UnitScale::DEFAULT,
        Some(item) => {
            let raw = integer(item, "unit_scale")?;
            let raw = u64::try_from(raw).map_err(|_| field_err("unit_scale", "must be positive"))?;
            UnitScale::new(raw).map_err(|e| field_err("unit_scale", e))?
        }
    };

    let molds_item = root.get("molds").ok_or_else(|| field_err("molds", "missing"))?;
    let molds = decimal_list(molds_item, "molds", unit_scale)?;

    let periods_item = root.get("periods").ok_or_else(|| field_err("periods", "missing"))?;
    let periods = integer(periods_item, "periods")?;
    let periods = u32::try_from(periods).map_err(|_| field_err("periods", "must be a non-negative 32-bit integer"))?;

    let types_item = root.get("beam_types").ok_or_else(|| field_err("beam_types", "missing"))?;
    let tables: Vec<&dyn TableLike> = if let Some(aot) = types_item.as_array_of_tables() {
        aot.iter().map(|t| t as &dyn TableLike).collect()
    } else if let Some(arr) = types_item.as_array() {
        arr.iter()
            .enumerate()
            .map(|(c, v)| {
                v.as_inline_table()
                    .map(|t| t as &dyn TableLike)
                    .ok_or_else(|| field_err(format!("beam_types[{}]", c + 1), "expected a table"))
            })
            .collect::<Result<_, _>>()?
    } else {
        return Err(field_err("beam_types", "expected an array of tables"));
    };

    let mut beam_types = Vec::with_capacity(tables.len());
    for (c, table) in tables.into_iter().enumerate() {
        let prefix = format!("beam_types[{}]", c + 1);
        check_keys(table, &prefix, &["curing_time", "lengths", "demands"])?;
        let get = |key: &str| table.get(key).ok_or_else(|| field_err(format!("{prefix}.{key}"), "missing"));
        let curing = integer(get("curing_time")?, &format!("{prefix}.curing_time"))?;
        let curing = u32::try_from(curing)
            .map_err(|_| field_err(format!("{prefix}.curing_time"), "must be a non-negative 32-bit integer"))?;
        let lengths = decimal_list(get("lengths")?, &format!("{prefix}.lengths"), unit_scale)?;
        let demands_field = format!("{prefix}.demands");
        let demands = get("demands")?
            .as_array()
            .ok_or_else(|| field_err(&demands_field, "expected an array of integers"))?
            .iter()
            .map(|v| {
                v.as_integer()
                    .and_then(|d| u32::try_from(d).ok())
                    .ok_or_else(|| field_err(&demands_field, format!("'{}' is not a non-negative integer", v.to_string().trim())))
            })
            .collect::<Result<Vec<u32>, _>>()?;
        if lengths.len() != demands.len() {
            return Err(field_err(
                &demands_field,
                format!("{} demands for {} lengths", demands.len(), lengths.len()),
            ));
        }
        beam_types.push(BeamType::new(curing, lengths.into_iter().zip(demands).collect()));
    }

    Instance::new(unit_scale, molds, periods, beam_types).map_err(|InstanceError::Invalid(v)| ParseError::Invalid(v))
}

/// Serializes an instance in the same format [`parse_instance`] reads.
pub fn write_instance(inst: &Instance) -> String {
    let scale = inst.unit_scale();
    let dec = |l: &Length| {
        let text = l.to_decimal(scale);
        if text.contains('.') {
            text
        } else {
            format!("{text}.0")
        }
    };
    let list = |ls: &[Length]| ls.iter().map(dec).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    out.push_str(&format!("unit_scale = {}\n", scale.factor()));
    out.push_str(&format!("molds = [{}]\n", list(inst.molds())));
    out.push_str(&format!("periods = {}\n", inst.periods()));
    for bt in inst.beam_types() {
        out.push_str("\n[[beam_types]]\n");
        out.push_str(&format!("curing_time = {}\n", bt.curing_time()));
        out.push_str(&format!("lengths = [{}]\n", list(bt.lengths())));
        let demands = bt.demands().iter().map(u32::to_string).collect::<Vec<_>>().join(", ");
        out.push_str(&format!("demands = [{demands}]\n"));
    }
    out
}

fn field_err(field: impl Into<String>, message: impl fmt::Display) -> ParseError {
    ParseError::Field { field: field.into(), message: message.to_string() }
}

fn check_keys(table: &dyn TableLike, prefix: &str, allowed: &[&str]) -> Result<(), ParseError> {
    for (key, _) in table.iter() {
        if !allowed.contains(&key) {
            let field = if prefix.is_empty() { key.to_string() } else { format!("{prefix}.{key}") };
            return Err(field_err(field, "unknown key"));
        }
    }
    Ok(())
}

fn integer(item: &Item, field: &str) -> Result<i64, ParseError> {
    item.as_integer().ok_or_else(|| field_err(field, "expected an integer"))
}

fn decimal_list(item: &Item, field: &str, scale: UnitScale) -> Result<Vec<Length>, ParseError> {
    let arr = item.as_array().ok_or_else(|| field_err(field, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            let here = format!("{field}[{}]", i + 1);
            let text = literal_text(v).ok_or_else(|| field_err(&here, "expected a decimal number"))?;
            parse_decimal(&text, scale)
                .map(Length::from_base_units)
                .map_err(|e: DecimalError| field_err(&here, e))
        })
        .collect()
}

/// Source text of a numeric literal, so floats are never rounded through f64.
fn literal_text(v: &Value) -> Option<String> {
    match v {
        Value::Integer(f) => Some(f.value().to_string()),
        Value::Float(f) => Some(
            f.as_repr()
                .and_then(|r| r.as_raw().as_str())
                .map(str::to_string)
                .unwrap_or_else(|| f.value().to_string()),
        ),
        Value::String(s) => Some(s.value().clone()),
        _ => None,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
