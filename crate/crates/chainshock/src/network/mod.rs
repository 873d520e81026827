//! Firm-level supply network: data model, CSV I/O, synthetic generation, and
//! structural diagnostics.
//!
//! A network is immutable once built. [`SupplyNetwork::new`] validates the
//! firm and link lists, sorts links into a canonical (supplier, client) order,
//! and precomputes forward (by supplier) and reverse (by client) adjacency
//! indices. Everything downstream — calibration, the simulation kernel,
//! diagnostics — relies on that canonical order, so link-indexed vectors
//! (volumes, inventories) always line up with [`SupplyNetwork::links`].

pub mod diagnostics;
mod io;
pub mod synthetic;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use diagnostics::{diagnostics, DiagnosticsConfig, NetworkDiagnostics};
pub use io::{
    load_final_consumption_csv, load_firms_csv, load_links_csv, load_network, load_network_dir,
    save_firms_csv, save_links_csv, save_network,
};
pub use synthetic::{generate_synthetic, SyntheticConfig};

/// Dense firm identifier; ids of a valid network form the range `0..firm_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FirmId(pub u32);

impl FirmId {
    /// Position of this firm in id-indexed vectors.
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FirmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Industry classification code (the two/three-digit scheme of the bundled
/// sector table, but any positive integer works for synthetic data).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectorCode(pub u32);

impl fmt::Display for SectorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Administrative region a firm operates in. Ids are 1-based and small;
/// restriction schedules and loss reports are keyed by them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A firm with its static attributes. `sales` is annual revenue in currency
/// units and only matters relative to other firms (calibration normalizes).
#[derive(Debug, Clone, PartialEq)]
pub struct Firm {
    pub id: FirmId,
    pub sector: SectorCode,
    pub region: RegionId,
    pub sales: f64,
}

/// A directed supplier→client relationship. `volume` is the baseline daily
/// trade volume; it is zero until calibration fills it in.
#[derive(Debug, Clone, PartialEq)]
pub struct SupplyLink {
    pub supplier: FirmId,
    pub client: FirmId,
    pub volume: f64,
}

/// Validation and I/O failures for network data.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network needs at least one firm")]
    Empty,
    #[error("firm id {id} out of range for a {count}-firm network")]
    IdOutOfRange { id: u32, count: u32 },
    #[error("duplicate firm id {0}")]
    DuplicateFirm(FirmId),
    #[error("firm {id}: sales must be finite and >= 0, got {value}")]
    BadSales { id: FirmId, value: f64 },
    #[error("link {supplier}->{client}: id {bad} is not a known firm")]
    UnknownEndpoint { supplier: u32, client: u32, bad: u32 },
    #[error("firm {0} links to itself")]
    SelfLink(FirmId),
    #[error("duplicate link {supplier}->{client}")]
    DuplicateLink { supplier: FirmId, client: FirmId },
    #[error("link {supplier}->{client}: volume must be finite and >= 0, got {value}")]
    BadVolume {
        supplier: FirmId,
        client: FirmId,
        value: f64,
    },
    #[error("final consumption of firm {id} must be finite and >= 0, got {value}")]
    BadConsumption { id: FirmId, value: f64 },
    #[error("final consumption has {got} entries for {expected} firms")]
    ConsumptionLength { got: usize, expected: usize },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: u64,
        message: String,
    },
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
    #[error("synthetic config: {0}")]
    BadConfig(String),
    #[error("degree sequence could not be wired into a simple graph: {0}")]
    Generation(String),
}

/// Immutable firm/link graph with precomputed adjacency.
///
/// Links are stored sorted by (supplier, client); `out_start` is the CSR
/// offset table of that order, and `in_ids`/`in_start` hold the same link
/// indices regrouped by client (suppliers ascending within each client).
#[derive(Debug, Clone)]
pub struct SupplyNetwork {
    firms: Vec<Firm>,
    links: Vec<SupplyLink>,
    out_start: Vec<u32>,
    in_ids: Vec<u32>,
    in_start: Vec<u32>,
    final_consumption: Vec<f64>,
    regions: Vec<RegionId>,
    sectors: Vec<SectorCode>,
}

impl SupplyNetwork {
    /// Validate and index a firm/link list. Firms may arrive in any order but
    /// their ids must form the dense range `0..len`; links must be unique,
    /// loop-free, and reference known firms. Final consumption starts at zero
    /// for every firm (see [`SupplyNetwork::with_final_consumption`]).
    pub fn new(mut firms: Vec<Firm>, mut links: Vec<SupplyLink>) -> Result<Self, NetworkError> {
        if firms.is_empty() {
            return Err(NetworkError::Empty);
        }
        let count = u32::try_from(firms.len()).expect("firm count fits u32");
        let mut seen = vec![false; firms.len()];
        for firm in &firms {
            if firm.id.0 >= count {
                return Err(NetworkError::IdOutOfRange { id: firm.id.0, count });
            }
            if std::mem::replace(&mut seen[firm.id.index()], true) {
                return Err(NetworkError::DuplicateFirm(firm.id));
            }
            if !firm.sales.is_finite() || firm.sales < 0.0 {
                return Err(NetworkError::BadSales {
                    id: firm.id,
                    value: firm.sales,
                });
            }
        }
        firms.sort_unstable_by_key(|f| f.id);

        for link in &links {
            let bad = [link.supplier.0, link.client.0]
                .into_iter()
                .find(|&id| id >= count);
            if let Some(bad) = bad {
                return Err(NetworkError::UnknownEndpoint {
                    supplier: link.supplier.0,
                    client: link.client.0,
                    bad,
                });
            }
            if link.supplier == link.client {
                return Err(NetworkError::SelfLink(link.supplier));
            }
            if !link.volume.is_finite() || link.volume < 0.0 {
                return Err(NetworkError::BadVolume {
                    supplier: link.supplier,
                    client: link.client,
                    value: link.volume,
                });
            }
        }
        links.sort_unstable_by_key(|l| (l.supplier, l.client));
        if let Some(dup) = links.windows(2).find(|w| {
            w[0].supplier == w[1].supplier && w[0].client == w[1].client
        }) {
            return Err(NetworkError::DuplicateLink {
                supplier: dup[0].supplier,
                client: dup[0].client,
            });
        }

        let n = firms.len();
        let mut out_start = vec![0u32; n + 1];
        for link in &links {
            out_start[link.supplier.index() + 1] += 1;
        }
        for i in 0..n {
            out_start[i + 1] += out_start[i];
        }

        // Reverse adjacency by counting sort over clients; because the source
        // order is supplier-major, each client's incoming links come out with
        // suppliers ascending.
        let mut in_start = vec![0u32; n + 1];
        for link in &links {
            in_start[link.client.index() + 1] += 1;
        }
        for i in 0..n {
            in_start[i + 1] += in_start[i];
        }
        let mut cursor = in_start.clone();
        let mut in_ids = vec![0u32; links.len()];
        for (id, link) in links.iter().enumerate() {
            let slot = &mut cursor[link.client.index()];
            in_ids[*slot as usize] = id as u32;
            *slot += 1;
        }

        let regions: Vec<RegionId> = firms
            .iter()
            .map(|f| f.region)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let sectors: Vec<SectorCode> = firms
            .iter()
            .map(|f| f.sector)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let final_consumption = vec![0.0; n];
        Ok(Self {
            firms,
            links,
            out_start,
            in_ids,
            in_start,
            final_consumption,
            regions,
            sectors,
        })
    }

    /// Replace the per-firm daily final-consumer demand vector (indexed by
    /// firm id).
    pub fn with_final_consumption(mut self, c: Vec<f64>) -> Result<Self, NetworkError> {
        if c.len() != self.firms.len() {
            return Err(NetworkError::ConsumptionLength {
                got: c.len(),
                expected: self.firms.len(),
            });
        }
        for (i, &value) in c.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(NetworkError::BadConsumption {
                    id: FirmId(i as u32),
                    value,
                });
            }
        }
        self.final_consumption = c;
        Ok(self)
    }

    /// Overwrite link volumes; `volumes` is indexed like [`SupplyNetwork::links`].
    pub(crate) fn set_volumes(&mut self, volumes: &[f64]) {
        assert_eq!(volumes.len(), self.links.len());
        for (link, &v) in self.links.iter_mut().zip(volumes) {
            debug_assert!(v.is_finite() && v >= 0.0);
            link.volume = v;
        }
    }

    pub fn firm_count(&self) -> usize {
        self.firms.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Firms sorted by id, so `firms()[k].id == FirmId(k)`.
    pub fn firms(&self) -> &[Firm] {
        &self.firms
    }

    pub fn firm(&self, id: FirmId) -> &Firm {
        &self.firms[id.index()]
    }

    /// Links in canonical (supplier, client) order.
    pub fn links(&self) -> &[SupplyLink] {
        &self.links
    }

    /// Outgoing links of `supplier` (clients ascending), as a slice of the
    /// canonical link array starting at index `out_range(supplier).start`.
    pub fn out_links(&self, supplier: FirmId) -> &[SupplyLink] {
        let r = self.out_range(supplier);
        &self.links[r]
    }

    /// Canonical-index range of `supplier`'s outgoing links.
    pub fn out_range(&self, supplier: FirmId) -> std::ops::Range<usize> {
        let i = supplier.index();
        self.out_start[i] as usize..self.out_start[i + 1] as usize
    }

    /// Canonical link indices of `client`'s incoming links, suppliers ascending.
    pub fn in_link_ids(&self, client: FirmId) -> &[u32] {
        let i = client.index();
        &self.in_ids[self.in_start[i] as usize..self.in_start[i + 1] as usize]
    }

    /// Daily final-consumer demand per firm (zero until calibrated).
    pub fn final_consumption(&self) -> &[f64] {
        &self.final_consumption
    }

    /// Distinct regions present, ascending.
    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    /// Dense position of `region` within [`SupplyNetwork::regions`].
    pub fn region_index(&self, region: RegionId) -> Option<usize> {
        self.regions.binary_search(&region).ok()
    }

    /// Distinct sector codes present, ascending.
    pub fn sectors(&self) -> &[SectorCode] {
        &self.sectors
    }
}
