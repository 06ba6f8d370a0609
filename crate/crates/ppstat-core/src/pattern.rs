//! Point patterns, census records and CSV ingestion.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RectWindow};

/// Collapsed tree status. Finer-grained census codes are mapped onto these
/// two states at ingestion via [`StatusMap`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Alive,
    Dead,
}

/// One census row: a stem with its species code, location and status.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusRecord {
    pub tree_id: String,
    pub species: String,
    pub x: f64,
    pub y: f64,
    pub status: Status,
    pub census_id: u32,
}

/// Mapping from raw status codes in a census file to [`Status`].
#[derive(Clone, Debug)]
pub struct StatusMap(BTreeMap<String, Status>);

impl Default for StatusMap {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        m.insert("A".to_string(), Status::Alive);
        m.insert("D".to_string(), Status::Dead);
        StatusMap(m)
    }
}

impl StatusMap {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Status)>) -> Self {
        StatusMap(pairs.into_iter().collect())
    }

    pub fn get(&self, code: &str) -> Option<Status> {
        self.0.get(code).copied()
    }

    fn code_for(&self, status: Status) -> &str {
        self.0
            .iter()
            .find(|(_, s)| **s == status)
            .map(|(c, _)| c.as_str())
            .unwrap_or(match status {
                Status::Alive => "A",
                Status::Dead => "D",
            })
    }
}

/// An immutable set of points inside a common window.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: RectWindow,
}

impl PointPattern {
    /// Build a pattern, checking that every point is finite and in `window`.
    pub fn new(points: Vec<Point>, window: RectWindow) -> Result<Self> {
        for p in &points {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::NonFinite);
            }
            if !window.contains(p) {
                return Err(Error::OutOfWindow);
            }
        }
        Ok(PointPattern { points, window })
    }

    pub fn empty(window: RectWindow) -> Self {
        PointPattern {
            points: Vec::new(),
            window,
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &RectWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points sharing coordinates with an earlier point
    /// (multi-stemmed records produce these; estimators tolerate them).
    pub fn duplicate_coordinate_count(&self) -> usize {
        let mut sorted: Vec<(u64, u64)> = self
            .points
            .iter()
            .map(|p| (p.x.to_bits(), p.y.to_bits()))
            .collect();
        sorted.sort_unstable();
        sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

/// Point patterns of several species sharing one window.
#[derive(Clone, Debug)]
pub struct MultiTypePattern {
    window: RectWindow,
    patterns: BTreeMap<String, PointPattern>,
}

impl MultiTypePattern {
    pub fn new(window: RectWindow) -> Self {
        MultiTypePattern {
            window,
            patterns: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, species: impl Into<String>, pattern: PointPattern) -> Result<()> {
        if pattern.window() != &self.window {
            return Err(Error::InvalidWindow(
                "sub-pattern window differs from the multi-type window".into(),
            ));
        }
        self.patterns.insert(species.into(), pattern);
        Ok(())
    }

    /// Group records of one census into per-species patterns.
    pub fn from_records(
        records: &[CensusRecord],
        window: RectWindow,
        census_id: u32,
        filter: StatusFilter,
    ) -> Result<Self> {
        let mut by_species: BTreeMap<String, Vec<Point>> = BTreeMap::new();
        for r in records {
            if r.census_id != census_id {
                continue;
            }
            if filter == StatusFilter::Alive && r.status != Status::Alive {
                continue;
            }
            by_species
                .entry(r.species.clone())
                .or_default()
                .push(Point::new(r.x, r.y));
        }
        let mut m = MultiTypePattern::new(window);
        for (sp, pts) in by_species {
            m.insert(sp, PointPattern::new(pts, window)?)?;
        }
        Ok(m)
    }

    pub fn window(&self) -> &RectWindow {
        &self.window
    }

    pub fn get(&self, species: &str) -> Option<&PointPattern> {
        self.patterns.get(species)
    }

    /// Species codes in lexicographic order.
    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.patterns.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PointPattern)> {
        self.patterns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatusFilter {
    Alive,
    Any,
}

const CENSUS_HEADER: [&str; 6] = ["tree_id", "species", "x", "y", "status", "census_id"];

/// Parse a census CSV.
///
/// Expected header: `tree_id,species,x,y,status,census_id`. Every point must
/// lie inside `window`; malformed and out-of-window rows are rejected with
/// their physical line number.
pub fn ingest_census<R: Read>(
    reader: R,
    window: &RectWindow,
    status_map: &StatusMap,
) -> Result<Vec<CensusRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != CENSUS_HEADER {
        return Err(Error::Schema(format!(
            "expected header {:?}, got {:?}",
            CENSUS_HEADER.join(","),
            got.join(",")
        )));
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        // Physical line number; the header is line 1.
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != CENSUS_HEADER.len() {
            return Err(Error::MalformedRow {
                row: line,
                message: format!("expected {} fields, got {}", CENSUS_HEADER.len(), row.len()),
            });
        }
        let parse_f64 = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| Error::MalformedRow {
                row: line,
                message: format!("cannot parse {name} value {field:?}"),
            })
        };
        let x = parse_f64(&row[2], "x")?;
        let y = parse_f64(&row[3], "y")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::MalformedRow {
                row: line,
                message: "non-finite coordinate".into(),
            });
        }
        if !window.contains(&Point::new(x, y)) {
            return Err(Error::OutOfWindowRow(line));
        }
        let status = status_map.get(&row[4]).ok_or_else(|| Error::MalformedRow {
            row: line,
            message: format!("unknown status code {:?}", &row[4]),
        })?;
        let census_id: u32 = row[5].parse().map_err(|_| Error::MalformedRow {
            row: line,
            message: format!("cannot parse census_id value {:?}", &row[5]),
        })?;
        if census_id == 0 {
            return Err(Error::MalformedRow {
                row: line,
                message: "census_id must be positive".into(),
            });
        }
        records.push(CensusRecord {
            tree_id: row[0].to_string(),
            species: row[1].to_string(),
            x,
            y,
            status,
            census_id,
        });
    }
    Ok(records)
}

pub fn read_census_file(
    path: impl AsRef<Path>,
    window: &RectWindow,
    status_map: &StatusMap,
) -> Result<Vec<CensusRecord>> {
    let f = std::fs::File::open(path)?;
    ingest_census(std::io::BufReader::new(f), window, status_map)
}

/// Serialize records back to the census CSV schema.
pub fn write_census<W: Write>(
    records: &[CensusRecord],
    status_map: &StatusMap,
    writer: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CENSUS_HEADER)?;
    for r in records {
        wtr.write_record([
            r.tree_id.as_str(),
            r.species.as_str(),
            &format!("{}", r.x),
            &format!("{}", r.y),
            status_map.code_for(r.status),
            &format!("{}", r.census_id),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Select one species in one census, optionally restricted to live stems.
pub fn extract_species(
    records: &[CensusRecord],
    window: RectWindow,
    species: &str,
    census_id: u32,
    filter: StatusFilter,
) -> Result<PointPattern> {
    let pts: Vec<Point> = records
        .iter()
        .filter(|r| {
            r.species == species
                && r.census_id == census_id
                && (filter == StatusFilter::Any || r.status == Status::Alive)
        })
        .map(|r| Point::new(r.x, r.y))
        .collect();
    PointPattern::new(pts, window)
}

/// Species whose pattern holds strictly more than `min_count` points,
/// in lexicographic order.
pub fn species_over_threshold(m: &MultiTypePattern, min_count: usize) -> Vec<String> {
    m.iter()
        .filter(|(_, p)| p.len() > min_count)
        .map(|(s, _)| s.to_string())
        .collect()
}
