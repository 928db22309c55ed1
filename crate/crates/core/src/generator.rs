//! Seeded synthetic instances.
//!
//! Lengths and capacities are drawn on a grid of `step` base units so the
//! instances stay readable as decimals. The horizon is either fixed or
//! derived from the demand: `T = ceil(slack * sum_c t_c * volume_c / sum_m L_m)`,
//! clamped to `[max_c t_c, max_periods]`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{BeamType, Instance};
use crate::patterns::{build_catalog, CatalogMode};
use crate::solver::search_space;
use crate::units::{format_fixed, Length, UnitScale};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Periods {
    Fixed(u32),
    /// `slack` is a percentage; 200 doubles the volume-based estimate.
    Auto { slack_percent: u32, max_periods: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub unit_scale: UnitScale,
    pub molds: (u32, u32),
    /// Capacity range in base units.
    pub capacity: (u64, u64),
    pub types: (u32, u32),
    pub curing: (u32, u32),
    pub lengths_per_type: (u32, u32),
    /// Beam length range in base units.
    pub length: (u64, u64),
    /// Lengths and capacities are multiples of this many base units.
    pub step: u64,
    pub demand: (u32, u32),
    pub periods: Periods,
    /// Redraw until the maximal-catalog search space is at most this.
    pub max_search_space: Option<u128>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Tiny,
    Small,
    Medium,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Tiny, Preset::Small, Preset::Medium];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tiny => "tiny",
            Preset::Small => "small",
            Preset::Medium => "medium",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn config(self, seed: u64) -> GeneratorConfig {
        const U: u64 = 1000;
        match self {
            Preset::Tiny => GeneratorConfig {
                seed,
                unit_scale: UnitScale::DEFAULT,
                molds: (1, 2),
                capacity: (8 * U, 12 * U),
                types: (1, 2),
                curing: (1, 2),
                lengths_per_type: (1, 2),
                length: (2 * U, 6 * U),
                step: U / 2,
                demand: (0, 3),
                periods: Periods::Auto { slack_percent: 300, max_periods: 4 },
                max_search_space: Some(1_000_000),
            },
            Preset::Small => GeneratorConfig {
                seed,
                unit_scale: UnitScale::DEFAULT,
                molds: (2, 3),
                capacity: (10 * U, 16 * U),
                types: (2, 3),
                curing: (1, 3),
                lengths_per_type: (2, 3),
                length: (2 * U, 8 * U),
                step: U / 2,
                demand: (1, 5),
                periods: Periods::Auto { slack_percent: 200, max_periods: 10 },
                max_search_space: None,
            },
            Preset::Medium => GeneratorConfig {
                seed,
                unit_scale: UnitScale::DEFAULT,
                molds: (3, 5),
                capacity: (10 * U, 20 * U),
                types: (3, 4),
                curing: (1, 4),
                lengths_per_type: (2, 4),
                length: (2 * U, 10 * U),
                step: U / 2,
                demand: (1, 8),
                periods: Periods::Auto { slack_percent: 200, max_periods: 16 },
                max_search_space: None,
            },
        }
    }
}

impl fmt::Display for GeneratorConfig {
    /// One-line `key=value` summary, decimals in input units.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |v: u64| format_fixed(i128::from(v), self.unit_scale);
        write!(
            f,
            "seed={} unit_scale={} molds={}..{} capacity={}..{} types={}..{} curing={}..{} lengths_per_type={}..{} length={}..{} step={} demand={}..{}",
            self.seed,
            self.unit_scale.factor(),
            self.molds.0,
            self.molds.1,
            d(self.capacity.0),
            d(self.capacity.1),
            self.types.0,
            self.types.1,
            self.curing.0,
            self.curing.1,
            self.lengths_per_type.0,
            self.lengths_per_type.1,
            d(self.length.0),
            d(self.length.1),
            d(self.step),
            self.demand.0,
            self.demand.1,
        )?;
        match self.periods {
            Periods::Fixed(t) => write!(f, " periods={t}")?,
            Periods::Auto { slack_percent, max_periods } => {
                write!(f, " periods=auto slack={slack_percent}% max_periods={max_periods}")?
            }
        }
        if let Some(g) = self.max_search_space {
            write!(f, " max_search_space={g}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeneratorError {
    #[error("bad generator configuration: {0}")]
    Config(String),
    #[error("no instance within the search-space guard after {0} draws")]
    GuardExhausted(u32),
}

const MAX_DRAWS: u32 = 1000;

fn check_range<T: PartialOrd + fmt::Display>(name: &str, r: (T, T)) -> Result<(), GeneratorError> {
    if r.0 > r.1 {
        return Err(GeneratorError::Config(format!("{name} range {}..{} is empty", r.0, r.1)));
    }
    Ok(())
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: &str| Err(GeneratorError::Config(m.to_string()));
        check_range("molds", self.molds)?;
        check_range("capacity", self.capacity)?;
        check_range("types", self.types)?;
        check_range("curing", self.curing)?;
        check_range("lengths_per_type", self.lengths_per_type)?;
        check_range("length", self.length)?;
        check_range("demand", self.demand)?;
        if self.molds.0 == 0 || self.types.0 == 0 || self.lengths_per_type.0 == 0 {
            return bad("molds, types and lengths_per_type must be at least 1");
        }
        if self.curing.0 == 0 {
            return bad("curing times must be at least 1");
        }
        if self.step == 0 {
            return bad("step must be positive");
        }
        if self.length.0 == 0 {
            return bad("lengths must be positive");
        }
        if self.length.0 > self.capacity.1 {
            return bad("every length exceeds every mold");
        }
        let grid = |(lo, hi): (u64, u64)| hi / self.step >= lo.div_ceil(self.step).max(1);
        if !grid(self.capacity) || !grid((self.length.0, self.length.1.min(self.capacity.1))) {
            return bad("a length or capacity range contains no multiple of step");
        }
        let lengths_available = self.length.1.min(self.capacity.1) / self.step - self.length.0.div_ceil(self.step) + 1;
        if u64::from(self.lengths_per_type.0) > lengths_available {
            return bad("fewer distinct lengths on the grid than lengths_per_type requires");
        }
        match self.periods {
            Periods::Fixed(t) if t < self.curing.0 => bad("fixed horizon is shorter than every curing time"),
            Periods::Auto { max_periods, .. } if max_periods < self.curing.0 => {
                bad("max_periods is shorter than every curing time")
            }
            Periods::Fixed(0) => bad("periods must be positive"),
            _ => Ok(()),
        }
    }
}

fn draw_on_grid(rng: &mut ChaCha8Rng, lo: u64, hi: u64, step: u64) -> u64 {
    let a = lo.div_ceil(step).max(1);
    let b = hi / step;
    rng.gen_range(a..=b) * step
}

fn draw_once(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Instance {
    let molds_n = rng.gen_range(cfg.molds.0..=cfg.molds.1);
    let molds: Vec<u64> =
        (0..molds_n).map(|_| draw_on_grid(rng, cfg.capacity.0, cfg.capacity.1, cfg.step)).collect();
    let largest = *molds.iter().max().expect("at least one mold");
    let curing_cap = match cfg.periods {
        Periods::Fixed(t) => t,
        Periods::Auto { max_periods, .. } => max_periods,
    };
    let types_n = rng.gen_range(cfg.types.0..=cfg.types.1);
    let mut types = Vec::new();
    for _ in 0..types_n {
        let curing = rng.gen_range(cfg.curing.0..=cfg.curing.1.min(curing_cap));
        let hi = cfg.length.1.min(largest);
        let available = (hi / cfg.step).saturating_sub(cfg.length.0.div_ceil(cfg.step).max(1)) + 1;
        let want = rng.gen_range(cfg.lengths_per_type.0..=cfg.lengths_per_type.1);
        let q = u64::from(want).min(available);
        let mut lengths = Vec::new();
        while (lengths.len() as u64) < q {
            let l = draw_on_grid(rng, cfg.length.0, hi, cfg.step);
            if !lengths.contains(&l) {
                lengths.push(l);
            }
        }
        let items =
            lengths.into_iter().map(|l| (Length::from_base_units(l), rng.gen_range(cfg.demand.0..=cfg.demand.1))).collect();
        types.push(BeamType::new(curing, items));
    }
    let periods = match cfg.periods {
        Periods::Fixed(t) => t,
        Periods::Auto { slack_percent, max_periods } => {
            let work: u128 = types.iter().map(|bt| u128::from(bt.curing_time()) * bt.demand_volume()).sum();
            let capacity: u128 = molds.iter().map(|&l| u128::from(l)).sum();
            let estimate = (work * u128::from(slack_percent)).div_ceil(capacity * 100);
            let longest = types.iter().map(BeamType::curing_time).max().unwrap_or(1);
            (estimate.min(u128::from(max_periods)) as u32).max(longest).max(1)
        }
    };
    let molds = molds.into_iter().map(Length::from_base_units).collect();
    Instance::new(cfg.unit_scale, molds, periods, types).expect("generated instance validates")
}

/// Deterministic per seed. With a search-space guard, draws repeat from the
/// same stream until an instance passes.
pub fn generate(cfg: &GeneratorConfig) -> Result<Instance, GeneratorError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..MAX_DRAWS {
        let inst = draw_once(cfg, &mut rng);
        let Some(guard) = cfg.max_search_space else {
            return Ok(inst);
        };
        let cat = build_catalog(&inst, CatalogMode::Maximal).map_err(|e| GeneratorError::Config(e.to_string()))?;
        if search_space(&inst, &cat) <= guard {
            return Ok(inst);
        }
    }
    Err(GeneratorError::GuardExhausted(MAX_DRAWS))
}

/// A named, seeded instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteEntry {
    pub name: String,
    pub seed: u64,
    pub instance: Instance,
}

/// `count` instances from `preset`, seeds `seed, seed + 1, ...`.
pub fn suite(preset: Preset, seed: u64, count: usize) -> Result<Vec<SuiteEntry>, GeneratorError> {
    suite_from(&preset.config(seed), preset.name(), count)
}

pub fn suite_from(base: &GeneratorConfig, label: &str, count: usize) -> Result<Vec<SuiteEntry>, GeneratorError> {
    (0..count as u64)
        .map(|i| {
            let seed = base.seed.wrapping_add(i);
            let cfg = GeneratorConfig { seed, ..base.clone() };
            Ok(SuiteEntry { name: format!("{label}-{seed}"), seed, instance: generate(&cfg)? })
        })
        .collect()
}
