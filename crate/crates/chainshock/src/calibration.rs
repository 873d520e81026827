//! Link-volume calibration from firm sales and a sector-level account table.
//!
//! Firm data carries who trades with whom and annual sales, but not how much
//! flows over each link. Calibration reconstructs daily volumes in two steps:
//!
//! 1. [`allocate_tentative`] splits each supplier's sales across its clients
//!    in proportion to the clients' sales;
//! 2. [`scale_to_io`] rescales those tentative flows so each supplier-sector
//!    → client-sector aggregate matches the corresponding entry of an
//!    [`IoTable`], then converts annual values to per-day, distributes
//!    sector final demand onto firms by sales weight, and derives each
//!    firm's baseline daily production.
//!
//! The result is a [`CalibratedNetwork`]: the network with volumes and final
//! consumption filled in plus a `p_ini` vector satisfying, for every firm,
//! `p_ini = Σ(outgoing volumes) + final consumption` — exactly, in the same
//! summation order the simulation kernel uses, so an unshocked simulation
//! sits perfectly still on this baseline.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::network::{SectorCode, SupplyNetwork};
use crate::numfmt::sig9;

/// Default divisor converting annual account values to daily flows.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// Calibration failures.
#[derive(Debug, Error)]
pub enum CalibrationError {
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
    #[error("sector table must be square: {sectors} sectors but {cells} transaction cells")]
    NotSquare { sectors: usize, cells: usize },
    #[error("duplicate sector {0} in account table")]
    DuplicateSector(SectorCode),
    #[error("account entry ({supplier},{client}) must be finite and >= 0, got {value}")]
    BadEntry {
        supplier: SectorCode,
        client: SectorCode,
        value: f64,
    },
    #[error("final demand of sector {sector} must be finite and >= 0, got {value}")]
    BadFinalDemand { sector: SectorCode, value: f64 },
    #[error("firm sector {0} is missing from the account table")]
    SectorMissing(SectorCode),
    #[error("tentative volumes have {got} entries for {expected} links")]
    TentativeLength { got: usize, expected: usize },
    #[error("days_per_year must be positive and finite, got {0}")]
    BadDaysPerYear(f64),
}

/// Annual sector-to-sector transaction totals plus per-sector final demand.
#[derive(Debug, Clone)]
pub struct IoTable {
    sectors: Vec<SectorCode>,
    index: BTreeMap<SectorCode, usize>,
    /// Row-major: `transactions[s * n + t]` is sales from sector `s` to `t`.
    transactions: Vec<f64>,
    final_demand: Vec<f64>,
}

impl IoTable {
    /// Build from parts; `transactions` is row-major over `sectors`².
    pub fn new(
        sectors: Vec<SectorCode>,
        transactions: Vec<f64>,
        final_demand: Vec<f64>,
    ) -> Result<Self, CalibrationError> {
        let n = sectors.len();
        if transactions.len() != n * n {
            return Err(CalibrationError::NotSquare {
                sectors: n,
                cells: transactions.len(),
            });
        }
        if final_demand.len() != n {
            return Err(CalibrationError::NotSquare {
                sectors: n,
                cells: final_demand.len(),
            });
        }
        let mut index = BTreeMap::new();
        for (i, &s) in sectors.iter().enumerate() {
            if index.insert(s, i).is_some() {
                return Err(CalibrationError::DuplicateSector(s));
            }
        }
        for (cell, &v) in transactions.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(CalibrationError::BadEntry {
                    supplier: sectors[cell / n],
                    client: sectors[cell % n],
                    value: v,
                });
            }
        }
        for (i, &v) in final_demand.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(CalibrationError::BadFinalDemand {
                    sector: sectors[i],
                    value: v,
                });
            }
        }
        Ok(Self {
            sectors,
            index,
            transactions,
            final_demand,
        })
    }

    /// Load the CSV layout written by [`IoTable::to_csv_path`]: a header
    /// `sector,<codes...>`, one row of annual transactions per supplier
    /// sector, and a last row labeled `FINAL_DEMAND`.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let label = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| CalibrationError::Io {
            path: label.clone(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let csv_err = |source| CalibrationError::Csv {
            path: label.clone(),
            source,
        };
        let malformed = |line: u64, message: String| CalibrationError::Malformed {
            path: label.clone(),
            line,
            message,
        };

        let headers = reader.headers().map_err(csv_err)?.clone();
        let mut cols = headers.iter().map(str::trim);
        if cols.next() != Some("sector") {
            return Err(malformed(1, "first header field must be `sector`".into()));
        }
        let sectors: Vec<SectorCode> = cols
            .map(|c| {
                c.parse()
                    .map(SectorCode)
                    .map_err(|_| malformed(1, format!("bad sector code `{c}` in header")))
            })
            .collect::<Result<_, _>>()?;
        let n = sectors.len();

        let mut transactions = vec![0.0; n * n];
        let mut final_demand = vec![0.0; n];
        let mut seen_rows = 0usize;
        let mut seen_final = false;
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != n + 1 {
                return Err(malformed(
                    line,
                    format!("row has {} fields, expected {}", record.len(), n + 1),
                ));
            }
            let head = record.get(0).unwrap_or("").trim();
            let mut values = Vec::with_capacity(n);
            for i in 0..n {
                let raw = record.get(i + 1).unwrap_or("").trim();
                values.push(
                    raw.parse::<f64>()
                        .map_err(|_| malformed(line, format!("bad value `{raw}`")))?,
                );
            }
            if head == "FINAL_DEMAND" {
                final_demand = values;
                seen_final = true;
            } else {
                let code = SectorCode(
                    head.parse()
                        .map_err(|_| malformed(line, format!("bad sector code `{head}`")))?,
                );
                let row = sectors.iter().position(|&s| s == code).ok_or_else(|| {
                    malformed(line, format!("sector {code} not in header"))
                })?;
                transactions[row * n..(row + 1) * n].copy_from_slice(&values);
                seen_rows += 1;
            }
        }
        if seen_rows != n || !seen_final {
            return Err(malformed(
                0,
                format!(
                    "expected {n} sector rows plus FINAL_DEMAND, got {seen_rows} rows, \
                     final demand {}",
                    if seen_final { "present" } else { "missing" }
                ),
            ));
        }
        Self::new(sectors, transactions, final_demand)
    }

    /// Write the layout read by [`IoTable::from_csv_path`].
    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<(), CalibrationError> {
        use std::io::Write;
        let path = path.as_ref();
        let io_err = |source| CalibrationError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = String::from("sector");
        for s in &self.sectors {
            out.push_str(&format!(",{s}"));
        }
        out.push('\n');
        let n = self.sectors.len();
        for (row, s) in self.sectors.iter().enumerate() {
            out.push_str(&s.to_string());
            for t in 0..n {
                out.push_str(&format!(",{}", sig9(self.transactions[row * n + t])));
            }
            out.push('\n');
        }
        out.push_str("FINAL_DEMAND");
        for v in &self.final_demand {
            out.push_str(&format!(",{}", sig9(*v)));
        }
        out.push('\n');
        let mut file = std::fs::File::create(path).map_err(io_err)?;
        file.write_all(out.as_bytes()).map_err(io_err)
    }

    pub fn sectors(&self) -> &[SectorCode] {
        &self.sectors
    }

    pub fn sector_index(&self, sector: SectorCode) -> Option<usize> {
        self.index.get(&sector).copied()
    }

    /// Annual transactions from sector `s` to sector `t`.
    pub fn transaction(&self, s: SectorCode, t: SectorCode) -> Option<f64> {
        let n = self.sectors.len();
        Some(self.transactions[self.sector_index(s)? * n + self.sector_index(t)?])
    }

    pub fn final_demand(&self, s: SectorCode) -> Option<f64> {
        Some(self.final_demand[self.sector_index(s)?])
    }
}

/// Split each supplier's annual sales across its clients in proportion to the
/// clients' sales. Returns one tentative annual volume per canonical link.
///
/// Degenerate cases: a supplier with no clients allocates nothing; a supplier
/// whose clients all report zero sales splits equally.
pub fn allocate_tentative(net: &SupplyNetwork) -> Vec<f64> {
    let mut tentative = vec![0.0; net.link_count()];
    for supplier in net.firms() {
        let range = net.out_range(supplier.id);
        if range.is_empty() {
            continue;
        }
        let clients = &net.links()[range.clone()];
        let weight_sum: f64 = clients
            .iter()
            .map(|l| net.firm(l.client).sales)
            .sum();
        if weight_sum > 0.0 {
            for (slot, link) in range.zip(clients) {
                tentative[slot] = supplier.sales * net.firm(link.client).sales / weight_sum;
            }
        } else {
            let share = supplier.sales / clients.len() as f64;
            for slot in range {
                tentative[slot] = share;
            }
        }
    }
    tentative
}

/// Share of sector sales used as final demand by [`synthesize_io_table`].
const SYNTHESIZED_DEMAND_SHARE: f64 = 0.3;

/// Build a sector account table consistent with a network's tentative link
/// allocation, for pipelines with no measured table: each annual
/// sector-pair transaction is the pair's tentative sum jittered by a
/// uniform factor in `[1 − noise, 1 + noise]`, and each sector's final
/// demand is a fixed share of its firms' total sales. Calibrating the same
/// network against the result reproduces realistic (non-degenerate)
/// scaling ratios while guaranteeing no sector pair must be dropped.
pub fn synthesize_io_table(
    net: &SupplyNetwork,
    tentative: &[f64],
    noise: f64,
    seed: u64,
) -> Result<IoTable, CalibrationError> {
    use rand::Rng;
    use rand::SeedableRng;

    if tentative.len() != net.link_count() {
        return Err(CalibrationError::TentativeLength {
            got: tentative.len(),
            expected: net.link_count(),
        });
    }
    if !(0.0..1.0).contains(&noise) {
        return Err(CalibrationError::Malformed {
            path: "synthesized table".into(),
            line: 0,
            message: format!("noise must be in [0, 1), got {noise}"),
        });
    }
    let sectors = net.sectors().to_vec();
    let n = sectors.len();
    let index: BTreeMap<SectorCode, usize> =
        sectors.iter().enumerate().map(|(i, &s)| (s, i)).collect();

    let mut transactions = vec![0.0; n * n];
    for (link, &t) in net.links().iter().zip(tentative) {
        let s = index[&net.firm(link.supplier).sector];
        let c = index[&net.firm(link.client).sector];
        transactions[s * n + c] += t;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for cell in &mut transactions {
        if *cell > 0.0 {
            *cell *= rng.random_range(1.0 - noise..=1.0 + noise);
        }
    }

    let mut final_demand = vec![0.0; n];
    for firm in net.firms() {
        final_demand[index[&firm.sector]] += firm.sales * SYNTHESIZED_DEMAND_SHARE;
    }
    IoTable::new(sectors, transactions, final_demand)
}

/// What [`scale_to_io`] had to drop or approximate.
#[derive(Debug, Clone, Default)]
pub struct CalibrationReport {
    /// Sector pairs with positive account value but no network flow to carry
    /// it: `(supplier sector, client sector, annual value)`.
    pub dropped_pairs: Vec<(SectorCode, SectorCode, f64)>,
    /// Total annual transaction mass dropped that way.
    pub dropped_transaction_mass: f64,
    /// Sectors whose final demand was split equally because every firm in the
    /// sector reports zero sales.
    pub equal_split_sectors: Vec<SectorCode>,
    /// Sectors with final demand but no firms: `(sector, annual value)`; that
    /// demand is dropped.
    pub firmless_sectors: Vec<(SectorCode, f64)>,
}

/// A network with calibrated volumes plus each firm's baseline daily
/// production.
#[derive(Debug, Clone)]
pub struct CalibratedNetwork {
    net: SupplyNetwork,
    p_ini: Vec<f64>,
}

impl CalibratedNetwork {
    /// Wrap a network whose volumes and final consumption are already set,
    /// deriving baseline production as Σ(outgoing volumes) + consumption.
    ///
    /// The sum runs over out-links in canonical order — the same order the
    /// kernel uses when it totals incoming orders — which is what makes the
    /// unshocked baseline an exact fixed point rather than one that drifts
    /// by rounding.
    pub fn new(net: SupplyNetwork) -> Self {
        let mut p_ini = vec![0.0; net.firm_count()];
        for firm in net.firms() {
            let mut total = 0.0;
            for l in net.out_links(firm.id) {
                total += l.volume;
            }
            total += net.final_consumption()[firm.id.index()];
            p_ini[firm.id.index()] = total;
        }
        Self { net, p_ini }
    }

    pub fn net(&self) -> &SupplyNetwork {
        &self.net
    }

    /// Baseline daily production per firm.
    pub fn p_ini(&self) -> &[f64] {
        &self.p_ini
    }

    pub fn into_network(self) -> SupplyNetwork {
        self.net
    }
}

/// Rescale tentative volumes so sector-pair aggregates hit the account table,
/// assign final demand to firms, and derive baseline production.
pub fn scale_to_io(
    mut net: SupplyNetwork,
    tentative: &[f64],
    io: &IoTable,
    days_per_year: f64,
) -> Result<(CalibratedNetwork, CalibrationReport), CalibrationError> {
    if tentative.len() != net.link_count() {
        return Err(CalibrationError::TentativeLength {
            got: tentative.len(),
            expected: net.link_count(),
        });
    }
    if !(days_per_year > 0.0) || !days_per_year.is_finite() {
        return Err(CalibrationError::BadDaysPerYear(days_per_year));
    }
    let n = io.sectors().len();
    let sector_of: Vec<usize> = net
        .firms()
        .iter()
        .map(|f| {
            io.sector_index(f.sector)
                .ok_or(CalibrationError::SectorMissing(f.sector))
        })
        .collect::<Result<_, _>>()?;

    // Aggregate tentative flow per (supplier sector, client sector).
    let mut pair_flow = vec![0.0; n * n];
    for (link, &t) in net.links().iter().zip(tentative) {
        let cell = sector_of[link.supplier.index()] * n + sector_of[link.client.index()];
        pair_flow[cell] += t;
    }

    let mut report = CalibrationReport::default();
    let mut ratio = vec![0.0; n * n];
    for s in 0..n {
        for t in 0..n {
            let cell = s * n + t;
            let target = io
                .transaction(io.sectors()[s], io.sectors()[t])
                .expect("sector from table");
            if pair_flow[cell] > 0.0 {
                ratio[cell] = target / pair_flow[cell];
            } else if target > 0.0 {
                report
                    .dropped_pairs
                    .push((io.sectors()[s], io.sectors()[t], target));
                report.dropped_transaction_mass += target;
            }
        }
    }

    let volumes: Vec<f64> = net
        .links()
        .iter()
        .zip(tentative)
        .map(|(link, &t)| {
            let cell = sector_of[link.supplier.index()] * n + sector_of[link.client.index()];
            t * ratio[cell] / days_per_year
        })
        .collect();
    net.set_volumes(&volumes);

    // Final demand: each sector's annual demand lands on its firms by sales
    // weight (equal split if nobody reports sales).
    let mut sector_sales = vec![0.0; n];
    let mut sector_firms = vec![0u64; n];
    for (firm, &s) in net.firms().iter().zip(&sector_of) {
        sector_sales[s] += firm.sales;
        sector_firms[s] += 1;
    }
    let mut consumption = vec![0.0; net.firm_count()];
    for (firm, &s) in net.firms().iter().zip(&sector_of) {
        let demand = io
            .final_demand(io.sectors()[s])
            .expect("sector from table");
        if demand == 0.0 {
            continue;
        }
        consumption[firm.id.index()] = if sector_sales[s] > 0.0 {
            demand * firm.sales / sector_sales[s] / days_per_year
        } else {
            demand / sector_firms[s] as f64 / days_per_year
        };
    }
    for (s, &count) in sector_firms.iter().enumerate() {
        let demand = io.final_demand(io.sectors()[s]).expect("sector from table");
        if demand > 0.0 {
            if count == 0 {
                report.firmless_sectors.push((io.sectors()[s], demand));
            } else if sector_sales[s] == 0.0 {
                report.equal_split_sectors.push(io.sectors()[s]);
            }
        }
    }
    let net = net
        .with_final_consumption(consumption)
        .expect("consumption built per firm");
    Ok((CalibratedNetwork::new(net), report))
}
