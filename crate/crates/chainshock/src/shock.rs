//! Sector reduction rates, restriction coverage tiers, and schedules of
//! regional restriction windows.
//!
//! The shock side of the model is a per-firm, per-day capacity reduction
//! fraction δ. It is assembled from three pieces:
//!
//! 1. a [`SectorTable`] giving each sector its capacity reduction rate while
//!    restricted (a bundled table ships with the crate, see
//!    [`SectorTable::bundled`]);
//! 2. [`CoverageSets`] mapping the four coverage tiers L1..L4 (hospitality
//!    only, up to all sectors) onto concrete sector sets;
//! 3. a [`LockdownSchedule`] of `(region, start, duration, coverage)` windows.
//!
//! [`delta_at`] combines them: a firm is reduced by its sector's adjusted
//! rate on days where some active window covers its region and sector, and
//! overlapping windows never stack. Capacity snaps back to full the day a
//! window ends.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Firm, RegionId, SectorCode};

/// Default weight turning a worldwide observed reduction into the domestic
/// adjusted rate (the table's `adjusted_rate` column equals
/// `weight × worldwide_rate` up to table rounding).
pub const DEFAULT_REDUCTION_WEIGHT: f64 = 0.323;

/// Absolute slack allowed when validating the table's internal identities;
/// the published rates carry three significant digits.
pub const TABLE_ROUNDING_TOLERANCE: f64 = 5e-3;

/// Why a sector got its exposure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rationale {
    /// Demand rises under restrictions (health, welfare): no reduction.
    Substantial,
    /// Lifeline services stay open: low exposure.
    Lifeline,
    /// Partially restricted activities.
    LowExposure,
    /// Ordinary businesses, fully exposed.
    Ordinary,
    /// Explicitly ordered to close.
    Closed,
}

impl FromStr for Rationale {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Substantial" => Ok(Self::Substantial),
            "Lifeline" => Ok(Self::Lifeline),
            "LowExposure" => Ok(Self::LowExposure),
            "Ordinary" => Ok(Self::Ordinary),
            "Closed" => Ok(Self::Closed),
            _ => Err(()),
        }
    }
}

/// One sector's restriction profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorEntry {
    pub code: SectorCode,
    pub abbrev: String,
    /// Share of activity exposed to restrictions: one of 0, 0.1, 0.5, 1.
    pub exposure: f64,
    /// Share of the exposed activity that can shift to remote work.
    pub work_at_home: f64,
    /// Raw capacity reduction: `exposure × (1 − work_at_home)`.
    pub worldwide_rate: f64,
    /// Domestic reduction applied in simulations: `weight × worldwide_rate`.
    pub adjusted_rate: f64,
    pub rationale: Rationale,
}

/// Validation and parsing failures for shock inputs.
#[derive(Debug, Error)]
pub enum ShockError {
    #[error("could not access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not parse {path}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate sector code {0}")]
    DuplicateCode(SectorCode),
    #[error("sector {code}: {field} = {value} outside its allowed range")]
    BadFraction {
        code: SectorCode,
        field: &'static str,
        value: f64,
    },
    #[error(
        "sector {code}: {identity} off by {residual:.2e} (tolerance {TABLE_ROUNDING_TOLERANCE:.0e})"
    )]
    InconsistentRates {
        code: SectorCode,
        identity: &'static str,
        residual: f64,
    },
    #[error("weight must be in (0, 1], got {0}")]
    BadWeight(f64),
    #[error("sector table is empty")]
    EmptyTable,
    #[error("unknown coverage level `{0}`, expected L1..L4")]
    UnknownLevel(String),
    #[error("coverage override references sector {0} missing from the table")]
    UnknownSector(SectorCode),
    #[error(
        "window (region {region}, start {start_day}, {duration_days} days) \
         does not fit a {horizon_days}-day horizon"
    )]
    WindowPastHorizon {
        region: RegionId,
        start_day: u32,
        duration_days: u32,
        horizon_days: u32,
    },
    #[error("window duration must be positive")]
    EmptyWindow,
    #[error("could not parse schedule {path}: {message}")]
    BadSchedule { path: String, message: String },
}

/// Per-sector reduction rates keyed by sector code.
#[derive(Debug, Clone)]
pub struct SectorTable {
    entries: BTreeMap<SectorCode, SectorEntry>,
    weight: f64,
}

const BUNDLED_TABLE: &str = include_str!("../data/sector_reduction_rates.csv");

impl SectorTable {
    /// The table bundled with the crate, at the default weight.
    pub fn bundled() -> Self {
        Self::from_csv_reader(
            BUNDLED_TABLE.as_bytes(),
            DEFAULT_REDUCTION_WEIGHT,
            "<bundled sector table>",
        )
        .expect("bundled sector table is valid")
    }

    /// Load and validate `code,abbrev,adjusted_rate,worldwide_rate,work_at_home,exposure,rationale`.
    pub fn from_csv_path(path: impl AsRef<Path>, weight: f64) -> Result<Self, ShockError> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| ShockError::Io {
            path: label.clone(),
            source,
        })?;
        Self::from_csv_reader(file, weight, &label)
    }

    /// Load from any reader; `label` names the source in error messages.
    pub fn from_csv_reader(
        reader: impl std::io::Read,
        weight: f64,
        label: &str,
    ) -> Result<Self, ShockError> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(ShockError::BadWeight(weight));
        }
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let csv_err = |source| ShockError::Csv {
            path: label.to_string(),
            source,
        };
        let malformed = |line: u64, message: String| ShockError::Malformed {
            path: label.to_string(),
            line,
            message,
        };
        let headers = csv_reader.headers().map_err(csv_err)?;
        let expected = [
            "code",
            "abbrev",
            "adjusted_rate",
            "worldwide_rate",
            "work_at_home",
            "exposure",
            "rationale",
        ];
        let got: Vec<&str> = headers.iter().map(str::trim).collect();
        if got != expected {
            return Err(malformed(
                1,
                format!("unexpected header `{}`", got.join(",")),
            ));
        }

        let mut entries = BTreeMap::new();
        for record in csv_reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
            let number = |i: usize, what: &str| -> Result<f64, ShockError> {
                field(i)
                    .parse()
                    .map_err(|_| malformed(line, format!("bad {what} `{}`", field(i))))
            };
            let code = SectorCode(
                field(0)
                    .parse()
                    .map_err(|_| malformed(line, format!("bad sector code `{}`", field(0))))?,
            );
            let rationale = field(6)
                .parse()
                .map_err(|()| malformed(line, format!("unknown rationale `{}`", field(6))))?;
            let entry = SectorEntry {
                code,
                abbrev: field(1),
                adjusted_rate: number(2, "adjusted_rate")?,
                worldwide_rate: number(3, "worldwide_rate")?,
                work_at_home: number(4, "work_at_home")?,
                exposure: number(5, "exposure")?,
                rationale,
            };
            validate_entry(&entry, weight)?;
            if entries.insert(code, entry).is_some() {
                return Err(ShockError::DuplicateCode(code));
            }
        }
        if entries.is_empty() {
            return Err(ShockError::EmptyTable);
        }
        Ok(Self { entries, weight })
    }

    pub fn get(&self, code: SectorCode) -> Option<&SectorEntry> {
        self.entries.get(&code)
    }

    /// Entries in ascending code order.
    pub fn entries(&self) -> impl Iterator<Item = &SectorEntry> {
        self.entries.values()
    }

    /// Codes in ascending order.
    pub fn codes(&self) -> impl Iterator<Item = SectorCode> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Largest adjusted rate in the table; δ never exceeds this.
    pub fn max_adjusted_rate(&self) -> f64 {
        self.entries
            .values()
            .map(|e| e.adjusted_rate)
            .fold(0.0, f64::max)
    }
}

fn validate_entry(entry: &SectorEntry, weight: f64) -> Result<(), ShockError> {
    let code = entry.code;
    let fraction_checks = [
        ("work_at_home", entry.work_at_home),
        ("worldwide_rate", entry.worldwide_rate),
        ("adjusted_rate", entry.adjusted_rate),
    ];
    for (field, value) in fraction_checks {
        if !(0.0..=1.0).contains(&value) || !value.is_finite() {
            return Err(ShockError::BadFraction { code, field, value });
        }
    }
    const EXPOSURE_CLASSES: [f64; 4] = [0.0, 0.1, 0.5, 1.0];
    if !EXPOSURE_CLASSES
        .iter()
        .any(|&class| (entry.exposure - class).abs() < 1e-9)
    {
        return Err(ShockError::BadFraction {
            code,
            field: "exposure",
            value: entry.exposure,
        });
    }
    let residual = (entry.worldwide_rate - entry.exposure * (1.0 - entry.work_at_home)).abs();
    if residual > TABLE_ROUNDING_TOLERANCE {
        return Err(ShockError::InconsistentRates {
            code,
            identity: "worldwide_rate vs exposure×(1−work_at_home)",
            residual,
        });
    }
    let residual = (entry.adjusted_rate - weight * entry.worldwide_rate).abs();
    if residual > TABLE_ROUNDING_TOLERANCE {
        return Err(ShockError::InconsistentRates {
            code,
            identity: "adjusted_rate vs weight×worldwide_rate",
            residual,
        });
    }
    Ok(())
}

/// How broad a restriction window is, from hospitality-only to every sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CoverageLevel {
    /// Accommodation and amusement/recreation services.
    L1,
    /// L1 plus eating and drinking places.
    L2,
    /// L2 plus retail (except lifeline retail).
    L3,
    /// Every sector in the table.
    L4,
}

impl CoverageLevel {
    pub const ALL: [CoverageLevel; 4] = [Self::L1, Self::L2, Self::L3, Self::L4];

    /// Position in [`CoverageLevel::ALL`], usable as a bitmask bit.
    pub fn index(self) -> usize {
        match self {
            Self::L1 => 0,
            Self::L2 => 1,
            Self::L3 => 2,
            Self::L4 => 3,
        }
    }
}

impl fmt::Display for CoverageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L1 => "L1",
            Self::L2 => "L2",
            Self::L3 => "L3",
            Self::L4 => "L4",
        })
    }
}

impl FromStr for CoverageLevel {
    type Err = ShockError;
    fn from_str(s: &str) -> Result<Self, ShockError> {
        match s {
            "L1" => Ok(Self::L1),
            "L2" => Ok(Self::L2),
            "L3" => Ok(Self::L3),
            "L4" => Ok(Self::L4),
            other => Err(ShockError::UnknownLevel(other.to_string())),
        }
    }
}

/// The default sector set restricted at `level`.
///
/// L1 covers accommodation (75) and amusement/recreation services (80);
/// L2 adds eating and drinking places (76); L3 adds the retail codes
/// (560, 561, 57–61) but leaves general-merchandise lifeline retail (569)
/// open; L4 restricts everything in the table. Codes absent from `table`
/// are skipped.
pub fn coverage_sectors(level: CoverageLevel, table: &SectorTable) -> BTreeSet<SectorCode> {
    const L1_CODES: [u32; 2] = [75, 80];
    const L2_EXTRA: [u32; 1] = [76];
    const L3_EXTRA: [u32; 7] = [560, 561, 57, 58, 59, 60, 61];
    let mut set = BTreeSet::new();
    let mut extend = |codes: &[u32]| {
        set.extend(
            codes
                .iter()
                .map(|&c| SectorCode(c))
                .filter(|&c| table.get(c).is_some()),
        )
    };
    match level {
        CoverageLevel::L4 => return table.codes().collect(),
        CoverageLevel::L3 => {
            extend(&L1_CODES);
            extend(&L2_EXTRA);
            extend(&L3_EXTRA);
        }
        CoverageLevel::L2 => {
            extend(&L1_CODES);
            extend(&L2_EXTRA);
        }
        CoverageLevel::L1 => extend(&L1_CODES),
    }
    set
}

/// Concrete sector membership for each coverage level, either the defaults
/// from [`coverage_sectors`] or loaded overrides.
#[derive(Debug, Clone)]
pub struct CoverageSets {
    sets: [BTreeSet<SectorCode>; 4],
}

impl CoverageSets {
    /// Default membership for every level.
    pub fn defaults(table: &SectorTable) -> Self {
        Self {
            sets: CoverageLevel::ALL.map(|level| coverage_sectors(level, table)),
        }
    }

    /// Apply overrides from a `level,codes` CSV: each row replaces one
    /// level's membership with the listed codes (`;`-separated). Levels
    /// without a row keep their defaults.
    pub fn with_overrides(table: &SectorTable, path: impl AsRef<Path>) -> Result<Self, ShockError> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| ShockError::Io {
            path: label.clone(),
            source,
        })?;
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let mut this = Self::defaults(table);
        for record in csv_reader.records() {
            let record = record.map_err(|source| ShockError::Csv {
                path: label.clone(),
                source,
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let malformed = |message: String| ShockError::Malformed {
                path: label.clone(),
                line,
                message,
            };
            let level: CoverageLevel = record.get(0).unwrap_or("").trim().parse()?;
            let mut set = BTreeSet::new();
            for piece in record.get(1).unwrap_or("").split(';') {
                let piece = piece.trim();
                if piece.is_empty() {
                    continue;
                }
                let code = SectorCode(
                    piece
                        .parse()
                        .map_err(|_| malformed(format!("bad sector code `{piece}`")))?,
                );
                if table.get(code).is_none() {
                    return Err(ShockError::UnknownSector(code));
                }
                set.insert(code);
            }
            this.sets[level.index()] = set;
        }
        Ok(this)
    }

    pub fn sectors(&self, level: CoverageLevel) -> &BTreeSet<SectorCode> {
        &self.sets[level.index()]
    }

    pub fn contains(&self, level: CoverageLevel, sector: SectorCode) -> bool {
        self.sets[level.index()].contains(&sector)
    }
}

/// One restriction: a region, a day span, and how broadly sectors close.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestrictionWindow {
    pub region: RegionId,
    pub start_day: u32,
    pub duration_days: u32,
    pub coverage: CoverageLevel,
}

impl RestrictionWindow {
    /// Whether `day` falls inside the window (`start_day` inclusive, end
    /// exclusive — capacity is back to full the day the window ends).
    pub fn active_on(&self, day: u32) -> bool {
        day >= self.start_day && day - self.start_day < self.duration_days
    }
}

/// A set of restriction windows plus the simulation horizon they live in.
/// Windows may overlap arbitrarily; effects never stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LockdownSchedule {
    pub horizon_days: u32,
    pub windows: Vec<RestrictionWindow>,
}

impl LockdownSchedule {
    /// Validate that every window fits inside `[0, horizon_days)`.
    pub fn new(horizon_days: u32, windows: Vec<RestrictionWindow>) -> Result<Self, ShockError> {
        for w in &windows {
            if w.duration_days == 0 {
                return Err(ShockError::EmptyWindow);
            }
            let end = u64::from(w.start_day) + u64::from(w.duration_days);
            if end > u64::from(horizon_days) {
                return Err(ShockError::WindowPastHorizon {
                    region: w.region,
                    start_day: w.start_day,
                    duration_days: w.duration_days,
                    horizon_days,
                });
            }
        }
        Ok(Self {
            horizon_days,
            windows,
        })
    }

    /// A schedule with no restrictions at all.
    pub fn unshocked(horizon_days: u32) -> Self {
        Self {
            horizon_days,
            windows: Vec::new(),
        }
    }

    /// Windows active on `day`.
    pub fn active(&self, day: u32) -> impl Iterator<Item = &RestrictionWindow> {
        self.windows.iter().filter(move |w| w.active_on(day))
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self, ShockError> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let body = std::fs::read_to_string(path).map_err(|source| ShockError::Io {
            path: label.clone(),
            source,
        })?;
        let parsed: Self =
            serde_json::from_str(&body).map_err(|e| ShockError::BadSchedule {
                path: label,
                message: e.to_string(),
            })?;
        // Re-validate: the serde derive cannot check the fit invariant.
        Self::new(parsed.horizon_days, parsed.windows)
    }

    pub fn to_json_path(&self, path: impl AsRef<Path>) -> Result<(), ShockError> {
        let path = path.as_ref();
        let body = serde_json::to_string_pretty(self).expect("schedule serializes");
        std::fs::write(path, body + "\n").map_err(|source| ShockError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Capacity reduction fraction δ for `firm` on `day`: the firm's sector
/// adjusted rate if any active window covers its region and sector, else 0.
/// Overlapping windows take the max (which is the same rate), never the sum.
pub fn delta_at(
    firm: &Firm,
    day: u32,
    schedule: &LockdownSchedule,
    table: &SectorTable,
    coverage: &CoverageSets,
) -> f64 {
    let restricted = schedule
        .active(day)
        .any(|w| w.region == firm.region && coverage.contains(w.coverage, firm.sector));
    if restricted {
        table.get(firm.sector).map_or(0.0, |e| e.adjusted_rate)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::FirmId;

    fn firm(sector: u32, region: u32) -> Firm {
        Firm {
            id: FirmId(0),
            sector: SectorCode(sector),
            region: RegionId(region),
            sales: 1.0,
        }
    }

    #[test]
    fn bundled_table_loads_and_validates() {
        let table = SectorTable::bundled();
        assert_eq!(table.len(), 101);
        assert_eq!(table.weight(), DEFAULT_REDUCTION_WEIGHT);
    }

    #[test]
    fn bundled_spot_values() {
        let table = SectorTable::bundled();
        let agr = table.get(SectorCode(1)).unwrap();
        assert_eq!(agr.adjusted_rate, 0.140);
        assert_eq!(agr.worldwide_rate, 0.433);
        assert_eq!(agr.work_at_home, 0.134);
        assert_eq!(agr.exposure, 0.5);
        assert_eq!(agr.rationale, Rationale::LowExposure);

        let hlt = table.get(SectorCode(84)).unwrap();
        assert_eq!(hlt.adjusted_rate, 0.0);
        assert_eq!(hlt.worldwide_rate, 0.0);
        assert_eq!(hlt.rationale, Rationale::Substantial);

        let acm = table.get(SectorCode(75)).unwrap();
        assert_eq!(acm.adjusted_rate, 0.287);
        assert_eq!(acm.rationale, Rationale::Closed);

        // The two department-store/lifeline retail rows share a base rate but
        // differ in exposure class.
        let dpt = table.get(SectorCode(561)).unwrap();
        let gnm = table.get(SectorCode(569)).unwrap();
        assert_eq!(dpt.adjusted_rate, 0.170);
        assert_eq!(gnm.adjusted_rate, 0.0170);
        assert_eq!(dpt.exposure, 1.0);
        assert_eq!(gnm.exposure, 0.1);
    }

    #[test]
    fn every_bundled_row_satisfies_both_identities() {
        let table = SectorTable::bundled();
        for e in table.entries() {
            let worldwide = e.exposure * (1.0 - e.work_at_home);
            assert!(
                (e.worldwide_rate - worldwide).abs() <= TABLE_ROUNDING_TOLERANCE,
                "sector {}: worldwide {} vs {}",
                e.code,
                e.worldwide_rate,
                worldwide
            );
            let adjusted = table.weight() * e.worldwide_rate;
            assert!(
                (e.adjusted_rate - adjusted).abs() <= TABLE_ROUNDING_TOLERANCE,
                "sector {}: adjusted {} vs {}",
                e.code,
                e.adjusted_rate,
                adjusted
            );
        }
    }

    #[test]
    fn half_exposure_with_half_remote_work_reduces_by_26_25_percent() {
        // The worked reference case for wholesale/retail-style sectors.
        let exposure: f64 = 0.5;
        let work_at_home: f64 = 0.475;
        assert_eq!(exposure * (1.0 - work_at_home), 0.2625);
    }

    #[test]
    fn inconsistent_rows_are_rejected_with_code() {
        let bad = "code,abbrev,adjusted_rate,worldwide_rate,work_at_home,exposure,rationale\n\
                   7,X.,0.9,0.1,0.5,1,Ordinary\n";
        let err =
            SectorTable::from_csv_reader(bad.as_bytes(), DEFAULT_REDUCTION_WEIGHT, "<test>");
        match err {
            Err(ShockError::InconsistentRates { code, .. }) => assert_eq!(code, SectorCode(7)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_and_out_of_class_rows_are_rejected() {
        let dup = "code,abbrev,adjusted_rate,worldwide_rate,work_at_home,exposure,rationale\n\
                   1,A.,0.140,0.433,0.134,0.5,LowExposure\n\
                   1,B.,0.140,0.433,0.134,0.5,LowExposure\n";
        assert!(matches!(
            SectorTable::from_csv_reader(dup.as_bytes(), DEFAULT_REDUCTION_WEIGHT, "<test>"),
            Err(ShockError::DuplicateCode(SectorCode(1)))
        ));
        let class = "code,abbrev,adjusted_rate,worldwide_rate,work_at_home,exposure,rationale\n\
                     1,A.,0.065,0.2,0.33,0.3,Ordinary\n";
        assert!(matches!(
            SectorTable::from_csv_reader(class.as_bytes(), DEFAULT_REDUCTION_WEIGHT, "<test>"),
            Err(ShockError::BadFraction {
                field: "exposure",
                ..
            })
        ));
    }

    #[test]
    fn coverage_tiers_nest_and_exclude_lifeline_retail() {
        let table = SectorTable::bundled();
        let sets = CoverageSets::defaults(&table);
        let l1 = sets.sectors(CoverageLevel::L1);
        let l2 = sets.sectors(CoverageLevel::L2);
        let l3 = sets.sectors(CoverageLevel::L3);
        let l4 = sets.sectors(CoverageLevel::L4);

        let codes =
            |v: &[u32]| -> BTreeSet<SectorCode> { v.iter().map(|&c| SectorCode(c)).collect() };
        assert_eq!(*l1, codes(&[75, 80]));
        let l2_minus_l1: BTreeSet<_> = l2.difference(l1).copied().collect();
        assert_eq!(l2_minus_l1, codes(&[76]));
        let l3_minus_l2: BTreeSet<_> = l3.difference(l2).copied().collect();
        assert_eq!(l3_minus_l2, codes(&[560, 561, 57, 58, 59, 60, 61]));
        assert!(!l3.contains(&SectorCode(569)), "lifeline retail stays open");
        assert_eq!(l4.len(), table.len());
        assert!(l1.is_subset(l2) && l2.is_subset(l3) && l3.is_subset(l4));
    }

    #[test]
    fn l4_on_a_small_table_is_all_codes() {
        let small = "code,abbrev,adjusted_rate,worldwide_rate,work_at_home,exposure,rationale\n\
                     1,A.,0.140,0.433,0.134,0.5,LowExposure\n\
                     2,B.,0.206,0.637,0.363,1,Ordinary\n\
                     3,C.,0.0201,0.0623,0.377,0.1,Lifeline\n";
        let table =
            SectorTable::from_csv_reader(small.as_bytes(), DEFAULT_REDUCTION_WEIGHT, "<test>")
                .unwrap();
        let l4 = coverage_sectors(CoverageLevel::L4, &table);
        assert_eq!(l4.len(), 3);
    }

    #[test]
    fn coverage_override_replaces_single_level() {
        let table = SectorTable::bundled();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("override.csv");
        std::fs::write(&path, "level,codes\nL1,75;76;80\n").unwrap();
        let sets = CoverageSets::with_overrides(&table, &path).unwrap();
        assert!(sets.contains(CoverageLevel::L1, SectorCode(76)));
        // L2 keeps its default.
        assert_eq!(sets.sectors(CoverageLevel::L2).len(), 3);

        std::fs::write(&path, "level,codes\nL1,12345\n").unwrap();
        assert!(matches!(
            CoverageSets::with_overrides(&table, &path),
            Err(ShockError::UnknownSector(SectorCode(12345)))
        ));
    }

    fn one_window(region: u32, start: u32, days: u32, coverage: CoverageLevel) -> LockdownSchedule {
        LockdownSchedule::new(
            200,
            vec![RestrictionWindow {
                region: RegionId(region),
                start_day: start,
                duration_days: days,
                coverage,
            }],
        )
        .unwrap()
    }

    #[test]
    fn delta_is_zero_without_an_active_window() {
        let table = SectorTable::bundled();
        let sets = CoverageSets::defaults(&table);
        let schedule = one_window(1, 10, 5, CoverageLevel::L4);
        let f = firm(1, 1);
        assert_eq!(delta_at(&f, 9, &schedule, &table, &sets), 0.0);
        assert_eq!(delta_at(&f, 10, &schedule, &table, &sets), 0.140);
        assert_eq!(delta_at(&f, 14, &schedule, &table, &sets), 0.140);
        // Back to full capacity the day the window ends.
        assert_eq!(delta_at(&f, 15, &schedule, &table, &sets), 0.0);
    }

    #[test]
    fn delta_respects_region_and_coverage() {
        let table = SectorTable::bundled();
        let sets = CoverageSets::defaults(&table);
        let schedule = one_window(1, 0, 10, CoverageLevel::L1);
        // Wrong region: untouched.
        assert_eq!(delta_at(&firm(75, 2), 0, &schedule, &table, &sets), 0.0);
        // Accommodation in the restricted region: closed.
        assert_eq!(delta_at(&firm(75, 1), 0, &schedule, &table, &sets), 0.287);
        // Agriculture is outside L1.
        assert_eq!(delta_at(&firm(1, 1), 0, &schedule, &table, &sets), 0.0);
    }

    #[test]
    fn overlapping_windows_do_not_stack() {
        let table = SectorTable::bundled();
        let sets = CoverageSets::defaults(&table);
        let w = |start: u32| RestrictionWindow {
            region: RegionId(1),
            start_day: start,
            duration_days: 20,
            coverage: CoverageLevel::L4,
        };
        let both = LockdownSchedule::new(100, vec![w(0), w(5)]).unwrap();
        let single = LockdownSchedule::new(100, vec![w(0)]).unwrap();
        let f = firm(1, 1);
        for day in 0..20 {
            assert_eq!(
                delta_at(&f, day, &both, &table, &sets),
                delta_at(&f, day, &single, &table, &sets)
            );
        }
    }

    #[test]
    fn delta_never_exceeds_table_max() {
        let table = SectorTable::bundled();
        let sets = CoverageSets::defaults(&table);
        let schedule = one_window(1, 0, 50, CoverageLevel::L4);
        let max = table.max_adjusted_rate();
        assert_eq!(max, 0.287);
        for e in table.entries() {
            let f = firm(e.code.0, 1);
            let d = delta_at(&f, 25, &schedule, &table, &sets);
            assert!((0.0..=max).contains(&d));
            assert!(d < 1.0);
        }
    }

    #[test]
    fn schedule_fit_is_enforced_and_round_trips_through_json() {
        let err = LockdownSchedule::new(
            20,
            vec![RestrictionWindow {
                region: RegionId(1),
                start_day: 10,
                duration_days: 11,
                coverage: CoverageLevel::L4,
            }],
        );
        assert!(matches!(err, Err(ShockError::WindowPastHorizon { .. })));

        let schedule = one_window(3, 2, 7, CoverageLevel::L2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("schedule.json");
        schedule.to_json_path(&path).unwrap();
        let back = LockdownSchedule::from_json_path(&path).unwrap();
        assert_eq!(schedule, back);

        std::fs::write(
            &path,
            r#"{"horizon_days":5,"windows":[{"region":1,"start_day":4,"duration_days":9,"coverage":"L4"}]}"#,
        )
        .unwrap();
        assert!(matches!(
            LockdownSchedule::from_json_path(&path),
            Err(ShockError::WindowPastHorizon { .. })
        ));
    }
}
