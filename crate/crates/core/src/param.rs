//! Exact parameter values, tunable ranges and the handover parameter vector.
//!
//! Every value lives on a fixed-point lattice of 10⁻⁴ base units (m, m/s or N).
//! All tuner arithmetic (adding a step, halving a range) stays on that lattice,
//! so comparisons against the step size are exact integer comparisons.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Ticks per base unit.
pub const TICKS_PER_UNIT: i64 = 10_000;
const FRACTION_DIGITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("value {0} is not a multiple of 0.0001")]
    NotRepresentable(String),
    #[error("invalid range for `{name}`: {reason}")]
    InvalidRange { name: String, reason: String },
    #[error("unit mismatch: expected {expected}, got {found}")]
    UnitMismatch { expected: Unit, found: Unit },
    #[error("cannot parse `{0}` as a decimal value")]
    Parse(String),
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("`{name}` = {value} lies outside [{min}, {max}]")]
    OutOfRange {
        name: String,
        value: String,
        min: String,
        max: String,
    },
    #[error("malformed spec document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m")]
    Meter,
    #[serde(rename = "m/s")]
    MeterPerSecond,
    #[serde(rename = "N")]
    Newton,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Meter => "m",
            Unit::MeterPerSecond => "m/s",
            Unit::Newton => "N",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "m" => Ok(Unit::Meter),
            "m/s" => Ok(Unit::MeterPerSecond),
            "N" => Ok(Unit::Newton),
            other => Err(ParamError::UnknownUnit(other.to_string())),
        }
    }
}

/// Parses a decimal string into ticks. Digits beyond the fourth fractional
/// place must all be zero.
pub fn parse_ticks(s: &str) -> Result<i64, ParamError> {
    let trimmed = s.trim();
    let (negative, body) = match trimmed.as_bytes().first() {
        Some(b'-') => (true, &trimmed[1..]),
        Some(b'+') => (false, &trimmed[1..]),
        _ => (false, trimmed),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(ParamError::Parse(s.to_string()));
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParamError::Parse(s.to_string()));
    }
    let (kept, dropped) = frac_part.split_at(frac_part.len().min(FRACTION_DIGITS));
    if dropped.bytes().any(|b| b != b'0') {
        return Err(ParamError::NotRepresentable(s.to_string()));
    }
    let whole: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| ParamError::Parse(s.to_string()))?
    };
    let mut frac: i64 = 0;
    for i in 0..FRACTION_DIGITS {
        let digit = kept.as_bytes().get(i).map_or(0, |b| i64::from(b - b'0'));
        frac = frac * 10 + digit;
    }
    let magnitude = whole
        .checked_mul(TICKS_PER_UNIT)
        .and_then(|w| w.checked_add(frac))
        .ok_or_else(|| ParamError::Parse(s.to_string()))?;
    Ok(if negative { -magnitude } else { magnitude })
}

/// Converts a raw float to ticks, rejecting anything off the 10⁻⁴ lattice.
pub fn ticks_from_f64(x: f64) -> Result<i64, ParamError> {
    if !x.is_finite() {
        return Err(ParamError::NotRepresentable(x.to_string()));
    }
    let scaled = x * TICKS_PER_UNIT as f64;
    let rounded = scaled.round();
    if (scaled - rounded).abs() > 1e-6 * rounded.abs().max(1.0) || rounded.abs() > 1e15 {
        return Err(ParamError::NotRepresentable(x.to_string()));
    }
    Ok(rounded as i64)
}

/// Shortest exact decimal rendering of a tick count: `4500` → `"0.45"`.
pub fn format_ticks(ticks: i64) -> String {
    let sign = if ticks < 0 { "-" } else { "" };
    let abs = ticks.unsigned_abs();
    let whole = abs / TICKS_PER_UNIT as u64;
    let frac = abs % TICKS_PER_UNIT as u64;
    if frac == 0 {
        return format!("{sign}{whole}");
    }
    let digits = format!("{frac:0width$}", width = FRACTION_DIGITS);
    format!("{sign}{whole}.{}", digits.trim_end_matches('0'))
}

/// A quantity on the 10⁻⁴ lattice with its unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParameterValue {
    ticks: i64,
    unit: Unit,
}

impl ParameterValue {
    pub const fn from_ticks(ticks: i64, unit: Unit) -> Self {
        Self { ticks, unit }
    }

    pub fn from_f64(x: f64, unit: Unit) -> Result<Self, ParamError> {
        Ok(Self::from_ticks(ticks_from_f64(x)?, unit))
    }

    pub fn parse(s: &str, unit: Unit) -> Result<Self, ParamError> {
        Ok(Self::from_ticks(parse_ticks(s)?, unit))
    }

    pub const fn ticks(self) -> i64 {
        self.ticks
    }

    pub const fn unit(self) -> Unit {
        self.unit
    }

    pub fn to_f64(self) -> f64 {
        self.ticks as f64 / TICKS_PER_UNIT as f64
    }

    /// Decimal string without the unit.
    pub fn decimal(self) -> String {
        format_ticks(self.ticks)
    }

    pub fn offset(self, delta_ticks: i64) -> Self {
        Self::from_ticks(self.ticks + delta_ticks, self.unit)
    }

    /// Absolute difference in ticks.
    pub fn distance(self, other: Self) -> i64 {
        (self.ticks - other.ticks).abs()
    }
}

impl PartialOrd for ParameterValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ParameterValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ticks.cmp(&other.ticks).then(self.unit.cmp(&other.unit))
    }
}

impl fmt::Display for ParameterValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.decimal(), self.unit)
    }
}

impl FromStr for ParameterValue {
    type Err = ParamError;

    /// Parses `"<decimal> <unit>"`, e.g. `"0.45 m/s"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (value, unit) = s
            .trim()
            .split_once(' ')
            .ok_or_else(|| ParamError::Parse(s.to_string()))?;
        ParameterValue::parse(value, unit.parse()?)
    }
}

impl Serialize for ParameterValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ParameterValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The five handover parameters, in tuning order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKey {
    VMax,
    X,
    Y,
    Z,
    FMin,
}

impl ParamKey {
    pub const ALL: [ParamKey; 5] = [ParamKey::VMax, ParamKey::X, ParamKey::Y, ParamKey::Z, ParamKey::FMin];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamKey::VMax => "v_max",
            ParamKey::X => "x",
            ParamKey::Y => "y",
            ParamKey::Z => "z",
            ParamKey::FMin => "f_min",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            ParamKey::VMax => Unit::MeterPerSecond,
            ParamKey::X | ParamKey::Y | ParamKey::Z => Unit::Meter,
            ParamKey::FMin => Unit::Newton,
        }
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamKey {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamKey::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ParamError::UnknownParameter(s.to_string()))
    }
}

/// Midpoint of a range, with a flag set when the tick sum was odd and the
/// result was rounded toward the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Midpoint {
    pub value: ParameterValue,
    pub rounded: bool,
}

/// A tunable scalar interval with its step size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRecord", into = "SpecRecord")]
pub struct ParameterSpec {
    name: String,
    unit: Unit,
    min: ParameterValue,
    max: ParameterValue,
    step: ParameterValue,
}

impl ParameterSpec {
    pub fn new(
        name: impl Into<String>,
        min: ParameterValue,
        max: ParameterValue,
        step: ParameterValue,
    ) -> Result<Self, ParamError> {
        let name = name.into();
        let unit = min.unit();
        for v in [max, step] {
            if v.unit() != unit {
                return Err(ParamError::UnitMismatch {
                    expected: unit,
                    found: v.unit(),
                });
            }
        }
        let invalid = |reason: &str| ParamError::InvalidRange {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if min >= max {
            return Err(invalid("min must be below max"));
        }
        if step.ticks() <= 0 {
            return Err(invalid("step must be positive"));
        }
        if step.ticks() > max.ticks() - min.ticks() {
            return Err(invalid("step exceeds the range width"));
        }
        Ok(Self {
            name,
            unit,
            min,
            max,
            step,
        })
    }

    /// Builds a spec from raw decimal numbers.
    pub fn make(name: &str, min: f64, max: f64, step: f64, unit: Unit) -> Result<Self, ParamError> {
        Self::new(
            name,
            ParameterValue::from_f64(min, unit)?,
            ParameterValue::from_f64(max, unit)?,
            ParameterValue::from_f64(step, unit)?,
        )
    }

    pub fn parse(name: &str, unit: Unit, min: &str, step: &str, max: &str) -> Result<Self, ParamError> {
        Self::new(
            name,
            ParameterValue::parse(min, unit)?,
            ParameterValue::parse(max, unit)?,
            ParameterValue::parse(step, unit)?,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn min(&self) -> ParameterValue {
        self.min
    }

    pub fn max(&self) -> ParameterValue {
        self.max
    }

    pub fn step(&self) -> ParameterValue {
        self.step
    }

    pub fn key(&self) -> Result<ParamKey, ParamError> {
        self.name.parse()
    }

    pub fn value(&self, ticks: i64) -> ParameterValue {
        ParameterValue::from_ticks(ticks, self.unit)
    }

    pub fn contains(&self, v: ParameterValue) -> bool {
        v.unit() == self.unit && self.min <= v && v <= self.max
    }

    pub fn midpoint(&self) -> Midpoint {
        let sum = self.min.ticks() + self.max.ticks();
        Midpoint {
            value: self.value(sum.div_euclid(2)),
            rounded: sum.rem_euclid(2) != 0,
        }
    }

    /// Hard bound on comparisons: ⌈4·(max − min)/step⌉.
    pub fn comparison_cap(&self) -> u32 {
        let width = self.max.ticks() - self.min.ticks();
        let step = self.step.ticks();
        ((4 * width + step - 1) / step) as u32
    }

    /// Number of whole steps from min that stay within the range.
    pub fn grid_len(&self) -> usize {
        ((self.max.ticks() - self.min.ticks()) / self.step.ticks()) as usize + 1
    }

    /// Points `min + k·step/2` inside the range.
    pub fn half_step_lattice(&self) -> Vec<ParameterValue> {
        let half = self.step.ticks() / 2;
        let half = half.max(1);
        (0..)
            .map(|k| self.min.ticks() + k * half)
            .take_while(|&t| t <= self.max.ticks())
            .map(|t| self.value(t))
            .collect()
    }

    fn check(&self, v: ParameterValue) -> Result<(), ParamError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(ParamError::OutOfRange {
                name: self.name.clone(),
                value: v.to_string(),
                min: self.min.to_string(),
                max: self.max.to_string(),
            })
        }
    }
}

/// Row of a spec document. All numbers are decimal strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecRecord {
    pub name: String,
    pub unit: Unit,
    pub min: String,
    pub step: String,
    pub max: String,
}

impl TryFrom<SpecRecord> for ParameterSpec {
    type Error = ParamError;

    fn try_from(r: SpecRecord) -> Result<Self, Self::Error> {
        ParameterSpec::parse(&r.name, r.unit, &r.min, &r.step, &r.max)
    }
}

impl From<ParameterSpec> for SpecRecord {
    fn from(s: ParameterSpec) -> Self {
        SpecRecord {
            name: s.name,
            unit: s.unit,
            min: s.min.decimal(),
            step: s.step.decimal(),
            max: s.max.decimal(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub parameters: Vec<ParameterSpec>,
}

/// The built-in spec document shipped with the crate.
pub const DEFAULT_SPECS_JSON: &str = include_str!("../config/default_specs.json");

pub fn parse_spec_document(text: &str) -> Result<Vec<ParameterSpec>, ParamError> {
    let doc: SpecDocument = serde_json::from_str(text).map_err(|e| ParamError::Document(e.to_string()))?;
    Ok(doc.parameters)
}

pub fn spec_document(specs: &[ParameterSpec]) -> String {
    let doc = SpecDocument {
        parameters: specs.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("spec documents always serialize")
}

/// The five handover ranges in tuning order: speed, position (x, y, z), force.
pub fn default_specs() -> Vec<ParameterSpec> {
    let spec = |name: &str, unit, min, step, max| ParameterSpec::from_ticks_unchecked(name, unit, min, max, step);
    vec![
        spec("v_max", Unit::MeterPerSecond, 1_000, 1_000, 8_000),
        spec("x", Unit::Meter, 8_000, 250, 10_000),
        spec("y", Unit::Meter, -2_000, 750, 2_000),
        spec("z", Unit::Meter, 1_500, 250, 3_500),
        spec("f_min", Unit::Newton, 130_000, 20_000, 230_000),
    ]
}

impl ParameterSpec {
    fn from_ticks_unchecked(name: &str, unit: Unit, min: i64, max: i64, step: i64) -> Self {
        Self::new(
            name,
            ParameterValue::from_ticks(min, unit),
            ParameterValue::from_ticks(max, unit),
            ParameterValue::from_ticks(step, unit),
        )
        .expect("built-in spec is valid")
    }
}

/// One full handover parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HandoverParams {
    pub v_max: ParameterValue,
    pub x: ParameterValue,
    pub y: ParameterValue,
    pub z: ParameterValue,
    pub f_min: ParameterValue,
}

impl HandoverParams {
    pub fn get(&self, key: ParamKey) -> ParameterValue {
        match key {
            ParamKey::VMax => self.v_max,
            ParamKey::X => self.x,
            ParamKey::Y => self.y,
            ParamKey::Z => self.z,
            ParamKey::FMin => self.f_min,
        }
    }

    pub fn with(mut self, key: ParamKey, value: ParameterValue) -> Self {
        *self.slot(key) = value;
        self
    }

    fn slot(&mut self, key: ParamKey) -> &mut ParameterValue {
        match key {
            ParamKey::VMax => &mut self.v_max,
            ParamKey::X => &mut self.x,
            ParamKey::Y => &mut self.y,
            ParamKey::Z => &mut self.z,
            ParamKey::FMin => &mut self.f_min,
        }
    }

    /// Handover location (x, y, z) in metres.
    pub fn location(&self) -> [f64; 3] {
        [self.x.to_f64(), self.y.to_f64(), self.z.to_f64()]
    }

    /// Builds a vector from decimal strings keyed by parameter name.
    pub fn from_decimals<'a>(mut lookup: impl FnMut(ParamKey) -> Option<&'a str>) -> Result<Self, ParamError> {
        let mut value = |key: ParamKey| -> Result<ParameterValue, ParamError> {
            let raw = lookup(key).ok_or_else(|| ParamError::UnknownParameter(key.to_string()))?;
            ParameterValue::parse(raw, key.unit())
        };
        Ok(Self {
            v_max: value(ParamKey::VMax)?,
            x: value(ParamKey::X)?,
            y: value(ParamKey::Y)?,
            z: value(ParamKey::Z)?,
            f_min: value(ParamKey::FMin)?,
        })
    }

    /// Checks every field against the spec carrying its name.
    pub fn validate(&self, specs: &[ParameterSpec]) -> Result<(), ParamError> {
        for spec in specs {
            spec.check(self.get(spec.key()?))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    v_max: String,
    x: String,
    y: String,
    z: String,
    f_min: String,
}

impl Serialize for HandoverParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ParamsRecord {
            v_max: self.v_max.decimal(),
            x: self.x.decimal(),
            y: self.y.decimal(),
            z: self.z.decimal(),
            f_min: self.f_min.decimal(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for HandoverParams {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = ParamsRecord::deserialize(deserializer)?;
        HandoverParams::from_decimals(|k| {
            Some(match k {
                ParamKey::VMax => r.v_max.as_str(),
                ParamKey::X => r.x.as_str(),
                ParamKey::Y => r.y.as_str(),
                ParamKey::Z => r.z.as_str(),
                ParamKey::FMin => r.f_min.as_str(),
            })
        })
        .map_err(serde::de::Error::custom)
    }
}

/// Midpoint of each spec, assembled into a parameter vector.
pub fn midpoint_params(specs: &[ParameterSpec]) -> Result<HandoverParams, ParamError> {
    let mid = |key: ParamKey| -> Result<ParameterValue, ParamError> {
        specs
            .iter()
            .find(|s| s.name() == key.as_str())
            .map(|s| s.midpoint().value)
            .ok_or_else(|| ParamError::UnknownParameter(key.to_string()))
    };
    Ok(HandoverParams {
        v_max: mid(ParamKey::VMax)?,
        x: mid(ParamKey::X)?,
        y: mid(ParamKey::Y)?,
        z: mid(ParamKey::Z)?,
        f_min: mid(ParamKey::FMin)?,
    })
}

/// The fixed starting handover used before tuning: every range's midpoint.
pub fn near_average_defaults() -> HandoverParams {
    midpoint_params(&default_specs()).expect("default specs cover every parameter")
}
