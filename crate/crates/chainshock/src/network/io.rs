//! CSV serialization of networks.
//!
//! Three small formats, all UTF-8 with `.` decimals and a trailing newline:
//!
//! - firms: `id,sector,region,sales`
//! - links: `supplier,client` with an optional third `volume_a` column
//!   (present once calibrated)
//! - final consumption: `id,c`
//!
//! Reading goes through the `csv` crate for robust error positions; writing
//! is plain formatted output so emitted bytes are fully under our control
//! (floats use 9 significant digits, matching the report writers).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use super::{Firm, FirmId, NetworkError, RegionId, SectorCode, SupplyLink, SupplyNetwork};
use crate::numfmt::sig9;

fn io_err(path: &Path, source: std::io::Error) -> NetworkError {
    NetworkError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> NetworkError {
    NetworkError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(path: &Path, line: u64, message: impl Into<String>) -> NetworkError {
    NetworkError::Malformed {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>, NetworkError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn check_header(
    path: &Path,
    reader: &mut csv::Reader<File>,
    accepted: &[&[&str]],
) -> Result<usize, NetworkError> {
    let headers = reader.headers().map_err(|e| csv_err(path, e))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    for (variant, expected) in accepted.iter().enumerate() {
        if got == *expected {
            return Ok(variant);
        }
    }
    Err(malformed(
        path,
        1,
        format!("unexpected header `{}`, want `{}`", got.join(","), accepted[0].join(",")),
    ))
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_field<T: FromStr>(
    field: &str,
    what: &str,
    path: &Path,
    line: u64,
) -> Result<T, NetworkError> {
    field
        .trim()
        .parse()
        .map_err(|_| malformed(path, line, format!("bad {what} `{}`", field.trim())))
}

fn expect_field<'r>(
    record: &'r csv::StringRecord,
    idx: usize,
    path: &Path,
) -> Result<&'r str, NetworkError> {
    record.get(idx).ok_or_else(|| {
        malformed(
            path,
            record_line(record),
            format!("row has {} fields, expected more", record.len()),
        )
    })
}

/// Read a firm list from `id,sector,region,sales`.
pub fn load_firms_csv(path: impl AsRef<Path>) -> Result<Vec<Firm>, NetworkError> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &[&["id", "sector", "region", "sales"]])?;
    let mut firms = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record_line(&record);
        firms.push(Firm {
            id: FirmId(parse_field(expect_field(&record, 0, path)?, "firm id", path, line)?),
            sector: SectorCode(parse_field(
                expect_field(&record, 1, path)?,
                "sector code",
                path,
                line,
            )?),
            region: RegionId(parse_field(
                expect_field(&record, 2, path)?,
                "region id",
                path,
                line,
            )?),
            sales: parse_field(expect_field(&record, 3, path)?, "sales", path, line)?,
        });
    }
    Ok(firms)
}

/// Read a link list from `supplier,client[,volume_a]`; missing volumes are 0.
pub fn load_links_csv(path: impl AsRef<Path>) -> Result<Vec<SupplyLink>, NetworkError> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let variant = check_header(
        path,
        &mut reader,
        &[
            &["supplier", "client", "volume_a"],
            &["supplier", "client"],
        ],
    )?;
    let mut links = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record_line(&record);
        let volume = if variant == 0 {
            parse_field(expect_field(&record, 2, path)?, "volume_a", path, line)?
        } else {
            0.0
        };
        links.push(SupplyLink {
            supplier: FirmId(parse_field(
                expect_field(&record, 0, path)?,
                "supplier id",
                path,
                line,
            )?),
            client: FirmId(parse_field(
                expect_field(&record, 1, path)?,
                "client id",
                path,
                line,
            )?),
            volume,
        });
    }
    Ok(links)
}

/// Read per-firm daily final-consumer demand from `id,c`.
pub fn load_final_consumption_csv(
    path: impl AsRef<Path>,
) -> Result<Vec<(FirmId, f64)>, NetworkError> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &[&["id", "c"]])?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record_line(&record);
        rows.push((
            FirmId(parse_field(expect_field(&record, 0, path)?, "firm id", path, line)?),
            parse_field(expect_field(&record, 1, path)?, "consumption", path, line)?,
        ));
    }
    Ok(rows)
}

/// Assemble a network from its component files. `consumption` may be omitted
/// (all-zero final demand); rows for unknown firm ids are rejected, and firms
/// without a row default to zero.
pub fn load_network(
    firms_path: impl AsRef<Path>,
    links_path: impl AsRef<Path>,
    consumption_path: Option<&Path>,
) -> Result<SupplyNetwork, NetworkError> {
    let firms = load_firms_csv(firms_path)?;
    let links = load_links_csv(links_path)?;
    let net = SupplyNetwork::new(firms, links)?;
    match consumption_path {
        None => Ok(net),
        Some(path) => {
            let rows = load_final_consumption_csv(path)?;
            let mut c = vec![0.0; net.firm_count()];
            for (id, value) in rows {
                if id.index() >= c.len() {
                    return Err(NetworkError::IdOutOfRange {
                        id: id.0,
                        count: net.firm_count() as u32,
                    });
                }
                c[id.index()] = value;
            }
            net.with_final_consumption(c)
        }
    }
}

/// Write the firm list as `id,sector,region,sales`.
pub fn save_firms_csv(net: &SupplyNetwork, path: impl AsRef<Path>) -> Result<(), NetworkError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "id,sector,region,sales")?;
        for f in net.firms() {
            writeln!(w, "{},{},{},{}", f.id, f.sector, f.region, sig9(f.sales))?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(path, e))
}

/// Write the link list; with `include_volume` the calibrated `volume_a`
/// column is emitted.
pub fn save_links_csv(
    net: &SupplyNetwork,
    path: impl AsRef<Path>,
    include_volume: bool,
) -> Result<(), NetworkError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        if include_volume {
            writeln!(w, "supplier,client,volume_a")?;
            for l in net.links() {
                writeln!(w, "{},{},{}", l.supplier, l.client, sig9(l.volume))?;
            }
        } else {
            writeln!(w, "supplier,client")?;
            for l in net.links() {
                writeln!(w, "{},{}", l.supplier, l.client)?;
            }
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(path, e))
}

fn save_final_consumption_csv(
    net: &SupplyNetwork,
    path: impl AsRef<Path>,
) -> Result<(), NetworkError> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "id,c")?;
        for (i, c) in net.final_consumption().iter().enumerate() {
            writeln!(w, "{},{}", i, sig9(*c))?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| io_err(path, e))
}

/// Standard on-disk layout: `firms.csv`, `links.csv`, and (with volumes)
/// `consumption.csv` inside `dir`. This is the layout the command-line
/// `--net` argument expects.
pub fn save_network(
    net: &SupplyNetwork,
    dir: impl AsRef<Path>,
    include_volume: bool,
) -> Result<(), NetworkError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    save_firms_csv(net, dir.join("firms.csv"))?;
    save_links_csv(net, dir.join("links.csv"), include_volume)?;
    if include_volume {
        save_final_consumption_csv(net, dir.join("consumption.csv"))?;
    }
    Ok(())
}

/// Load the standard directory layout written by [`save_network`].
pub fn load_network_dir(dir: impl AsRef<Path>) -> Result<SupplyNetwork, NetworkError> {
    let dir = dir.as_ref();
    let consumption = dir.join("consumption.csv");
    let consumption = consumption.exists().then_some(consumption);
    load_network(
        dir.join("firms.csv"),
        dir.join("links.csv"),
        consumption.as_deref(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(path: &Path, body: &str) {
        std::fs::write(path, body).unwrap();
    }

    #[test]
    fn round_trips_a_small_network() {
        let dir = tempdir().unwrap();
        let firms = dir.path().join("firms.csv");
        let links = dir.path().join("links.csv");
        let cons = dir.path().join("c.csv");
        write(&firms, "id,sector,region,sales\n0,5,1,10\n1,5,1,20\n2,7,2,30\n");
        write(&links, "supplier,client,volume_a\n0,1,1.5\n1,2,2.5\n");
        write(&cons, "id,c\n0,3.25\n2,1.0\n");
        let net = load_network(&firms, &links, Some(&cons)).unwrap();
        assert_eq!(net.firm_count(), 3);
        assert_eq!(net.link_count(), 2);
        assert_eq!(net.final_consumption(), &[3.25, 0.0, 1.0]);
        assert_eq!(net.links()[0].volume, 1.5);

        save_network(&net, dir.path().join("out"), true).unwrap();
        let back = load_network_dir(dir.path().join("out")).unwrap();
        assert_eq!(back.firm_count(), 3);
        assert_eq!(back.final_consumption()[0], 3.25);
        assert_eq!(back.links()[1].volume, 2.5);
    }

    #[test]
    fn link_row_with_unknown_firm_is_rejected() {
        let dir = tempdir().unwrap();
        let firms = dir.path().join("firms.csv");
        let links = dir.path().join("links.csv");
        write(&firms, "id,sector,region,sales\n0,1,1,1\n1,1,1,1\n");
        write(&links, "supplier,client\n0,99\n");
        let err = load_network(&firms, &links, None).unwrap_err();
        match err {
            NetworkError::UnknownEndpoint { bad, .. } => assert_eq!(bad, 99),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_link_rows_are_rejected() {
        let dir = tempdir().unwrap();
        let firms = dir.path().join("firms.csv");
        let links = dir.path().join("links.csv");
        write(&firms, "id,sector,region,sales\n0,1,1,1\n1,1,1,1\n");
        write(&links, "supplier,client\n0,1\n0,1\n");
        let err = load_network(&firms, &links, None).unwrap_err();
        assert!(matches!(err, NetworkError::DuplicateLink { .. }));
    }

    #[test]
    fn malformed_rows_report_file_and_line() {
        let dir = tempdir().unwrap();
        let firms = dir.path().join("firms.csv");
        write(&firms, "id,sector,region,sales\n0,1,1,ten\n");
        let err = load_firms_csv(&firms).unwrap_err();
        match err {
            NetworkError::Malformed { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("ten"), "message: {message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let dir = tempdir().unwrap();
        let firms = dir.path().join("firms.csv");
        write(&firms, "firm,sector,region,sales\n");
        let err = load_firms_csv(&firms).unwrap_err();
        assert!(matches!(err, NetworkError::Malformed { line: 1, .. }));
    }
}
