//! Casting patterns and pattern catalogs.
//!
//! A pattern is a beam type together with a count for each of that type's
//! lengths. A catalog numbers a set of patterns `1..=r` (index `0` is the
//! continuation marker, which occupies a mold while an earlier start cures)
//! and precomputes the quantities the models need: used capacity `u`,
//! duration `E`, idle cost `F = E * (L - u)`, the per-mold compatible sets
//! `Q(m)` and the per-duration sets `S(j)`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::instance::Instance;
use crate::units::Length;

/// Default maximum number of patterns a catalog may hold.
pub const DEFAULT_CATALOG_CEILING: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    beam_type: usize,
    counts: Vec<u32>,
}

impl Pattern {
    /// `beam_type` is 0-based; `counts` follows the type's canonical length order.
    pub fn new(beam_type: usize, counts: Vec<u32>) -> Self {
        Pattern { beam_type, counts }
    }

    #[inline]
    pub fn beam_type(&self) -> usize {
        self.beam_type
    }

    #[inline]
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Beams of length index `k` in the pattern (`N_i(c,k)` for the pattern's own type).
    #[inline]
    pub fn count(&self, k: usize) -> u32 {
        self.counts[k]
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&a| a == 0)
    }

    /// Number of lengths with a positive count.
    pub fn distinct_lengths(&self) -> usize {
        self.counts.iter().filter(|&&a| a > 0).count()
    }

    pub fn total_beams(&self) -> u64 {
        self.counts.iter().map(|&a| u64::from(a)).sum()
    }

    fn fits_type(&self, inst: &Instance) -> bool {
        self.beam_type < inst.num_types() && self.counts.len() == inst.beam_type(self.beam_type).num_lengths()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counts = self.counts.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        write!(f, "({}, ({}))", self.beam_type + 1, counts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern {pattern} uses {used} base units but the mold holds only {capacity}")]
    Incompatible { pattern: String, used: u64, capacity: u64 },
    #[error("{mode} catalog exceeds {limit} patterns; use the qc-maximal catalog for instances this size")]
    CatalogTooLarge { mode: CatalogMode, limit: usize },
    #[error("demanded length {length_index} of type {beam_type} fits no mold")]
    Uncoverable { beam_type: usize, length_index: usize },
    #[error("pattern {0} does not match its beam type")]
    Malformed(String),
}

/// `u(P)`: total length of the beams in the pattern.
pub fn used_capacity(p: &Pattern, inst: &Instance) -> Length {
    let lengths = inst.beam_type(p.beam_type).lengths();
    let units = p
        .counts
        .iter()
        .zip(lengths)
        .map(|(&a, l)| u64::from(a) * l.base_units())
        .sum();
    Length::from_base_units(units)
}

/// `F = E * (L - u)`: idle capacity of `mold` over the pattern's whole cure,
/// in base units times periods.
pub fn idle_cost(p: &Pattern, mold: Length, inst: &Instance) -> Result<u64, PatternError> {
    let used = used_capacity(p, inst);
    let spare = mold.checked_sub(used).ok_or_else(|| PatternError::Incompatible {
        pattern: p.to_string(),
        used: used.base_units(),
        capacity: mold.base_units(),
    })?;
    Ok(u64::from(inst.beam_type(p.beam_type).curing_time()) * spare.base_units())
}

/// True when the pattern fits `mold` and no further beam of its type does.
pub fn is_maximal(p: &Pattern, mold: Length, inst: &Instance) -> bool {
    let used = used_capacity(p, inst);
    let Some(spare) = mold.checked_sub(used) else {
        return false;
    };
    match inst.beam_type(p.beam_type).shortest() {
        Some(shortest) => spare < shortest,
        None => true,
    }
}

/// Every pattern that is maximal for mold `mold_index`, ordered by type and
/// then by descending count vector.
pub fn enumerate_maximal_patterns(inst: &Instance, mold_index: usize) -> Vec<Pattern> {
    let mut out = Vec::new();
    let capacity = inst.mold(mold_index);
    for c in 0..inst.num_types() {
        enumerate_type(inst, c, capacity, true, &mut out, usize::MAX).expect("unbounded enumeration");
    }
    out
}

/// Depth-first enumeration of the count vectors of type `c` that fit
/// `capacity`. Counts are tried from high to low so the output is in
/// descending lexicographic order.
fn enumerate_type(
    inst: &Instance,
    c: usize,
    capacity: Length,
    maximal_only: bool,
    out: &mut Vec<Pattern>,
    limit: usize,
) -> Result<(), ()> {
    let bt = inst.beam_type(c);
    let lengths: Vec<u64> = bt.lengths().iter().map(|l| l.base_units()).collect();
    let Some(&shortest) = lengths.first() else {
        return Ok(());
    };
    if shortest == 0 {
        return Ok(());
    }
    let mut counts = vec![0u32; lengths.len()];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        remaining: u64,
        lengths: &[u64],
        shortest: u64,
        counts: &mut Vec<u32>,
        c: usize,
        maximal_only: bool,
        out: &mut Vec<Pattern>,
        limit: usize,
    ) -> Result<(), ()> {
        if k == lengths.len() {
            if counts.iter().all(|&a| a == 0) {
                return Ok(());
            }
            if maximal_only && remaining >= shortest {
                return Ok(());
            }
            if out.len() >= limit {
                return Err(());
            }
            out.push(Pattern::new(c, counts.clone()));
            return Ok(());
        }
        let most = remaining / lengths[k];
        for a in (0..=most).rev() {
            counts[k] = a as u32;
            rec(k + 1, remaining - a * lengths[k], lengths, shortest, counts, c, maximal_only, out, limit)?;
        }
        counts[k] = 0;
        Ok(())
    }

    rec(0, capacity.base_units(), &lengths, shortest, &mut counts, c, maximal_only, out, limit)
}

/// Which patterns a catalog holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogMode {
    /// Every non-empty pattern fitting the largest mold; `Q(m)` by capacity.
    AllFeasible,
    /// Per-mold maximal patterns; `Q(m)` holds only patterns maximal for `m`.
    Maximal,
    /// The reduced set used by the size-reduction heuristic.
    QcMaximal,
    /// An explicit pattern list, e.g. the patterns a priority rule produced.
    Custom,
}

impl CatalogMode {
    pub fn name(self) -> &'static str {
        match self {
            CatalogMode::AllFeasible => "all",
            CatalogMode::Maximal => "maximal",
            CatalogMode::QcMaximal => "qc-maximal",
            CatalogMode::Custom => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "all" | "all-feasible" => Some(CatalogMode::AllFeasible),
            "maximal" => Some(CatalogMode::Maximal),
            "qc-maximal" => Some(CatalogMode::QcMaximal),
            "custom" => Some(CatalogMode::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for CatalogMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogOptions {
    pub ceiling: usize,
    /// qc-maximal mode only: keep every maximal pattern of the shortest mold
    /// instead of filtering by the number of distinct lengths covered.
    pub keep_all_shortest_maximal: bool,
}

impl Default for CatalogOptions {
    fn default() -> Self {
        CatalogOptions { ceiling: DEFAULT_CATALOG_CEILING, keep_all_shortest_maximal: false }
    }
}

/// Indexed pattern set with precomputed model data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternCatalog {
    mode: CatalogMode,
    patterns: Vec<Pattern>,
    used: Vec<Length>,
    duration: Vec<u32>,
    idle: Vec<Vec<Option<u64>>>,
    compatible: Vec<Vec<usize>>,
    by_curing: Vec<Vec<usize>>,
    lookup: HashMap<Pattern, usize>,
}

impl PatternCatalog {
    /// Builds a catalog over `patterns` (deduplicated, canonically sorted).
    /// `Q(m)` is the capacity test unless `member` says otherwise.
    fn assemble(
        inst: &Instance,
        mode: CatalogMode,
        patterns: impl IntoIterator<Item = Pattern>,
        member: impl Fn(&Pattern, Length, usize) -> bool,
    ) -> Self {
        let mut unique: Vec<Pattern> = patterns.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        unique.sort_by(|a, b| a.beam_type.cmp(&b.beam_type).then_with(|| b.counts.cmp(&a.counts)));

        let r = inst.max_curing_time() as usize;
        let mut used = Vec::with_capacity(unique.len());
        let mut duration = Vec::with_capacity(unique.len());
        let mut idle = Vec::with_capacity(unique.len());
        let mut compatible = vec![Vec::new(); inst.num_molds()];
        let mut by_curing = vec![Vec::new(); r];
        let mut lookup = HashMap::with_capacity(unique.len());
        for (pos, p) in unique.iter().enumerate() {
            let index = pos + 1;
            let u = used_capacity(p, inst);
            let e = inst.beam_type(p.beam_type).curing_time();
            used.push(u);
            duration.push(e);
            idle.push(inst.molds().iter().map(|&mold| idle_cost(p, mold, inst).ok()).collect());
            for (m, &mold) in inst.molds().iter().enumerate() {
                if u <= mold && member(p, mold, m) {
                    compatible[m].push(index);
                }
            }
            by_curing[e as usize - 1].push(index);
            lookup.insert(p.clone(), index);
        }
        PatternCatalog { mode, patterns: unique, used, duration, idle, compatible, by_curing, lookup }
    }

    /// Catalog over an explicit list of patterns, with `Q(m)` by capacity.
    pub fn from_patterns(inst: &Instance, patterns: impl IntoIterator<Item = Pattern>) -> Result<Self, PatternError> {
        let patterns: Vec<Pattern> = patterns.into_iter().collect();
        for p in &patterns {
            if !p.fits_type(inst) || p.is_empty() {
                return Err(PatternError::Malformed(p.to_string()));
            }
        }
        Ok(Self::assemble(inst, CatalogMode::Custom, patterns, |_, _, _| true))
    }

    #[inline]
    pub fn mode(&self) -> CatalogMode {
        self.mode
    }

    /// Number of real patterns `r` (excluding the continuation marker).
    #[inline]
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Pattern `i` for `i` in `1..=r`.
    #[inline]
    pub fn pattern(&self, i: usize) -> &Pattern {
        &self.patterns[i - 1]
    }

    pub fn patterns(&self) -> impl Iterator<Item = (usize, &Pattern)> {
        self.patterns.iter().enumerate().map(|(pos, p)| (pos + 1, p))
    }

    /// `u(P_i)`; zero for the continuation marker.
    #[inline]
    pub fn used_capacity(&self, i: usize) -> Length {
        if i == 0 {
            Length::ZERO
        } else {
            self.used[i - 1]
        }
    }

    /// `E_i`, the pattern's curing time.
    #[inline]
    pub fn duration(&self, i: usize) -> u32 {
        self.duration[i - 1]
    }

    /// `F_i^m`, or `None` if the pattern does not fit mold `m`. Zero for the
    /// continuation marker.
    #[inline]
    pub fn idle_cost(&self, i: usize, m: usize) -> Option<u64> {
        if i == 0 {
            Some(0)
        } else {
            self.idle[i - 1][m]
        }
    }

    /// `Q(m)`, ascending.
    #[inline]
    pub fn compatible(&self, m: usize) -> &[usize] {
        &self.compatible[m]
    }

    pub fn is_compatible(&self, i: usize, m: usize) -> bool {
        self.compatible[m].binary_search(&i).is_ok()
    }

    /// `S(j)` for `j` in `1..=R`.
    #[inline]
    pub fn by_curing(&self, j: u32) -> &[usize] {
        &self.by_curing[j as usize - 1]
    }

    pub fn index_of(&self, p: &Pattern) -> Option<usize> {
        self.lookup.get(p).copied()
    }

    /// One line per pattern: `index; type; counts; u; E; molds=[...]`.
    pub fn dump(&self, inst: &Instance) -> String {
        let mut out = String::new();
        for (i, p) in self.patterns() {
            let counts = p.counts.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
            let molds: Vec<String> = (0..inst.num_molds())
                .filter(|&m| self.is_compatible(i, m))
                .map(|m| (m + 1).to_string())
                .collect();
            out.push_str(&format!(
                "{i}; {}; ({counts}); {}; {}; molds=[{}]\n",
                p.beam_type + 1,
                self.used_capacity(i).to_decimal(inst.unit_scale()),
                self.duration(i),
                molds.join(",")
            ));
        }
        out
    }
}

pub fn build_catalog(inst: &Instance, mode: CatalogMode) -> Result<PatternCatalog, PatternError> {
    build_catalog_with(inst, mode, &CatalogOptions::default())
}

pub fn build_catalog_with(
    inst: &Instance,
    mode: CatalogMode,
    options: &CatalogOptions,
) -> Result<PatternCatalog, PatternError> {
    let too_large = || PatternError::CatalogTooLarge { mode, limit: options.ceiling };
    match mode {
        CatalogMode::AllFeasible => {
            let mut all = Vec::new();
            for c in 0..inst.num_types() {
                enumerate_type(inst, c, inst.max_mold(), false, &mut all, options.ceiling).map_err(|_| too_large())?;
            }
            Ok(PatternCatalog::assemble(inst, mode, all, |_, _, _| true))
        }
        CatalogMode::Maximal => {
            let mut all = Vec::new();
            for m in 0..inst.num_molds() {
                for c in 0..inst.num_types() {
                    enumerate_type(inst, c, inst.mold(m), true, &mut all, options.ceiling).map_err(|_| too_large())?;
                }
            }
            // Different molds may yield the same vectors; the ceiling applies
            // to distinct patterns.
            let distinct: BTreeSet<Pattern> = all.into_iter().collect();
            if distinct.len() > options.ceiling {
                return Err(too_large());
            }
            Ok(PatternCatalog::assemble(inst, mode, distinct, |p, mold, _| is_maximal(p, mold, inst)))
        }
        CatalogMode::QcMaximal => select_qc_maximal_with(inst, options),
        CatalogMode::Custom => Err(PatternError::Malformed("custom catalogs are built from explicit patterns".into())),
    }
}

/// The reduced pattern set of the size-reduction heuristic.
pub fn select_qc_maximal(inst: &Instance) -> Result<PatternCatalog, PatternError> {
    select_qc_maximal_with(inst, &CatalogOptions::default())
}

pub fn select_qc_maximal_with(inst: &Instance, options: &CatalogOptions) -> Result<PatternCatalog, PatternError> {
    let too_large = || PatternError::CatalogTooLarge { mode: CatalogMode::QcMaximal, limit: options.ceiling };
    let shortest = inst.shortest_mold();
    let mut selected: Vec<Pattern> = Vec::new();
    for c in 0..inst.num_types() {
        let mut candidates = Vec::new();
        enumerate_type(inst, c, inst.mold(shortest), true, &mut candidates, options.ceiling).map_err(|_| too_large())?;
        let bt = inst.beam_type(c);
        let demanded: Vec<usize> = (0..bt.num_lengths()).filter(|&k| bt.demands()[k] > 0).collect();
        let mut covered = vec![false; bt.num_lengths()];
        let take = |p: &Pattern, covered: &mut Vec<bool>, selected: &mut Vec<Pattern>| {
            for (k, &a) in p.counts.iter().enumerate() {
                if a > 0 {
                    covered[k] = true;
                }
            }
            selected.push(p.clone());
        };

        if options.keep_all_shortest_maximal {
            for p in &candidates {
                take(p, &mut covered, &mut selected);
            }
        } else {
            let best = candidates.iter().map(Pattern::distinct_lengths).max().unwrap_or(0);
            for p in candidates.iter().filter(|p| p.distinct_lengths() == best) {
                take(p, &mut covered, &mut selected);
            }
            let mut level = best;
            while level > 1 && demanded.iter().any(|&k| !covered[k]) {
                level -= 1;
                let uncovered: Vec<usize> = demanded.iter().copied().filter(|&k| !covered[k]).collect();
                for p in candidates
                    .iter()
                    .filter(|p| p.distinct_lengths() == level && uncovered.iter().any(|&k| p.counts[k] > 0))
                {
                    take(p, &mut covered, &mut selected);
                }
            }
        }

        // Demanded lengths longer than the shortest mold: cover them from the
        // smallest mold that holds them.
        for &k in &demanded {
            if covered[k] {
                continue;
            }
            let len = bt.lengths()[k];
            let host = (0..inst.num_molds())
                .filter(|&m| inst.mold(m) >= len)
                .min_by_key(|&m| (inst.mold(m), m))
                .ok_or(PatternError::Uncoverable { beam_type: c + 1, length_index: k + 1 })?;
            let mut pool = Vec::new();
            enumerate_type(inst, c, inst.mold(host), true, &mut pool, options.ceiling).map_err(|_| too_large())?;
            pool.retain(|p| p.counts[k] > 0);
            let best = pool.iter().map(Pattern::distinct_lengths).max().unwrap_or(0);
            for p in pool.iter().filter(|p| p.distinct_lengths() == best) {
                take(p, &mut covered, &mut selected);
            }
        }
    }
    if selected.len() > options.ceiling {
        return Err(too_large());
    }
    Ok(PatternCatalog::assemble(inst, CatalogMode::QcMaximal, selected, |_, _, _| true))
}
