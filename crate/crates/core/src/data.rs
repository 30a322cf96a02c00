//! Items, comparison records and datasets, plus their flat-file formats.
//!
//! The canonical interchange format is CSV with the header
//! `a,b,outcome[,timestamp,session]`, where `outcome` is one of `a`, `b` or
//! `tie`. JSONL files carry one object per line with the same field names;
//! unknown fields are ignored so that service logs parse as datasets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque, stable item identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidInput("item id must be non-empty".into()));
        }
        Ok(ItemId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    /// Panics on an empty string; use [`ItemId::new`] for untrusted input.
    fn from(s: &str) -> Self {
        ItemId::new(s).expect("empty item id")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: ItemId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

/// Ordered, duplicate-free set of items.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemCatalog {
    entries: Vec<CatalogEntry>,
    index: HashMap<ItemId, usize>,
}

impl ItemCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut catalog = Self::new();
        for id in ids {
            catalog.push(CatalogEntry {
                id: ItemId::new(id)?,
                image: None,
                metadata: BTreeMap::new(),
            })?;
        }
        Ok(catalog)
    }

    pub fn push(&mut self, entry: CatalogEntry) -> Result<usize> {
        if self.index.contains_key(&entry.id) {
            return Err(Error::InvalidInput(format!("duplicate item id `{}`", entry.id)));
        }
        let idx = self.entries.len();
        self.index.insert(entry.id.clone(), idx);
        self.entries.push(entry);
        Ok(idx)
    }

    /// Inserts `id` if absent and returns its index either way.
    pub fn ensure(&mut self, id: &ItemId) -> usize {
        if let Some(&idx) = self.index.get(id) {
            return idx;
        }
        let idx = self.entries.len();
        self.index.insert(id.clone(), idx);
        self.entries.push(CatalogEntry {
            id: id.clone(),
            image: None,
            metadata: BTreeMap::new(),
        });
        idx
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, id: &ItemId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &ItemId) -> bool {
        self.index.contains_key(id)
    }

    pub fn id(&self, idx: usize) -> &ItemId {
        &self.entries[idx].id
    }

    pub fn get(&self, id: &ItemId) -> Option<&CatalogEntry> {
        self.index_of(id).map(|i| &self.entries[i])
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &ItemId> + '_ {
        self.entries.iter().map(|e| &e.id)
    }

    /// Reads a JSON manifest: an array of `{id, image, metadata}` objects.
    pub fn read_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<CatalogEntry> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        let mut catalog = Self::new();
        for entry in entries {
            catalog.push(entry)?;
        }
        Ok(catalog)
    }

    pub fn write_manifest(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(&self.entries)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "a")]
    WinA,
    #[serde(rename = "b")]
    WinB,
    #[serde(rename = "tie")]
    Tie,
}

impl Outcome {
    /// Outcome seen from the other side of the pair.
    pub fn mirrored(self) -> Outcome {
        match self {
            Outcome::WinA => Outcome::WinB,
            Outcome::WinB => Outcome::WinA,
            Outcome::Tie => Outcome::Tie,
        }
    }

    /// Actual score of item A: 1, 0 or 0.5.
    pub fn score_a(self) -> f64 {
        match self {
            Outcome::WinA => 1.0,
            Outcome::WinB => 0.0,
            Outcome::Tie => 0.5,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Outcome::WinA => "a",
            Outcome::WinB => "b",
            Outcome::Tie => "tie",
        }
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "A" => Ok(Outcome::WinA),
            "b" | "B" => Ok(Outcome::WinB),
            "tie" | "TIE" | "Tie" => Ok(Outcome::Tie),
            other => Err(Error::InvalidInput(format!("unknown outcome `{other}`"))),
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One observed pairwise judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub a: ItemId,
    pub b: ItemId,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl ComparisonRecord {
    pub fn new(a: impl Into<String>, b: impl Into<String>, outcome: Outcome) -> Result<Self> {
        let a = ItemId::new(a)?;
        let b = ItemId::new(b)?;
        if a == b {
            return Err(Error::InvalidInput(format!("item `{a}` compared with itself")));
        }
        Ok(ComparisonRecord {
            a,
            b,
            outcome,
            timestamp: None,
            session: None,
        })
    }

    /// Same judgment with the presentation order swapped.
    pub fn mirrored(&self) -> Self {
        ComparisonRecord {
            a: self.b.clone(),
            b: self.a.clone(),
            outcome: self.outcome.mirrored(),
            timestamp: self.timestamp,
            session: self.session.clone(),
        }
    }
}

/// A comparison resolved to catalog indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedComparison {
    pub a: usize,
    pub b: usize,
    pub outcome: Outcome,
}

impl IndexedComparison {
    /// Orientation-free form: (winner, loser) for decisive outcomes and
    /// (lower index, higher index) for ties.
    pub fn canonical(self) -> Self {
        match self.outcome {
            Outcome::WinA => self,
            Outcome::WinB => IndexedComparison {
                a: self.b,
                b: self.a,
                outcome: Outcome::WinA,
            },
            Outcome::Tie => IndexedComparison {
                a: self.a.min(self.b),
                b: self.a.max(self.b),
                outcome: Outcome::Tie,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::InvalidInput(format!("unknown format `{other}`"))),
        }
    }
}

/// A catalog and the ordered records over it. Record order matters to the
/// online raters and is always preserved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    catalog: ItemCatalog,
    records: Vec<ComparisonRecord>,
}

impl Dataset {
    /// Builds a dataset whose catalog is the union of record ids in order
    /// of first appearance.
    pub fn from_records(records: Vec<ComparisonRecord>) -> Result<Self> {
        let mut catalog = ItemCatalog::new();
        for r in &records {
            check_record(r)?;
            catalog.ensure(&r.a);
            catalog.ensure(&r.b);
        }
        Ok(Dataset { catalog, records })
    }

    pub fn with_catalog(catalog: ItemCatalog, records: Vec<ComparisonRecord>) -> Result<Self> {
        for r in &records {
            check_record(r)?;
            for id in [&r.a, &r.b] {
                if !catalog.contains(id) {
                    return Err(Error::UnknownItem(id.to_string()));
                }
            }
        }
        Ok(Dataset { catalog, records })
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn records(&self) -> &[ComparisonRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tie_frequency(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let ties = self.records.iter().filter(|r| r.outcome == Outcome::Tie).count();
        ties as f64 / self.records.len() as f64
    }

    /// Records resolved to catalog indices, in dataset order.
    pub fn indexed(&self) -> Vec<IndexedComparison> {
        self.records
            .iter()
            .map(|r| IndexedComparison {
                a: self.catalog.index_of(&r.a).expect("record id missing from catalog"),
                b: self.catalog.index_of(&r.b).expect("record id missing from catalog"),
                outcome: r.outcome,
            })
            .collect()
    }

    /// Same catalog, different records.
    pub fn subset(&self, records: Vec<ComparisonRecord>) -> Dataset {
        Dataset {
            catalog: self.catalog.clone(),
            records,
        }
    }

    /// Seeded random partition into `(train, test)`. The test half holds
    /// `round(test_fraction * N)` records; both halves keep the original
    /// relative order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "test fraction {test_fraction} outside (0, 1)"
            )));
        }
        if self.records.is_empty() {
            return Err(Error::InvalidInput("cannot split an empty dataset".into()));
        }
        let n = self.records.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let mut is_test = vec![false; n];
        for &i in &order[..n_test] {
            is_test[i] = true;
        }
        let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
        for (r, t) in self.records.iter().zip(is_test) {
            if t {
                test.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
        Ok((self.subset(train), self.subset(test)))
    }

    pub fn read(path: impl AsRef<Path>, format: Format, catalog: Option<ItemCatalog>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let records = match format {
            Format::Csv => read_csv_records(file)?,
            Format::Jsonl => read_jsonl_records(BufReader::new(file))?,
        };
        match catalog {
            Some(c) => Dataset::with_catalog(c, records),
            None => Dataset::from_records(records),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        match format {
            Format::Csv => self.write_csv(&mut out)?,
            Format::Jsonl => self.write_jsonl(&mut out)?,
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_ts = self.records.iter().any(|r| r.timestamp.is_some());
        let with_session = self.records.iter().any(|r| r.session.is_some());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["a", "b", "outcome"];
        if with_ts || with_session {
            header.push("timestamp");
        }
        if with_session {
            header.push("session");
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.a.to_string(), r.b.to_string(), r.outcome.token().to_string()];
            if with_ts || with_session {
                row.push(
                    r.timestamp
                        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true))
                        .unwrap_or_default(),
                );
            }
            if with_session {
                row.push(r.session.clone().unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn check_record(r: &ComparisonRecord) -> Result<()> {
    if r.a == r.b {
        return Err(Error::InvalidInput(format!("item `{}` compared with itself", r.a)));
    }
    Ok(())
}

pub fn read_csv_records<R: Read>(input: R) -> Result<Vec<ComparisonRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(ca), Some(cb), Some(co)) = (column("a"), column("b"), column("outcome")) else {
        return Err(Error::Parse {
            line: 1,
            message: "header must contain columns a, b, outcome".into(),
        });
    };
    let (ct, cs) = (column("timestamp"), column("session"));

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        let parse_err = |message: String| Error::Parse { line, message };
        let field = |i: usize| row.get(i).unwrap_or("");
        let a = ItemId::new(field(ca)).map_err(|e| parse_err(e.to_string()))?;
        let b = ItemId::new(field(cb)).map_err(|e| parse_err(e.to_string()))?;
        if a == b {
            return Err(parse_err(format!("item `{a}` compared with itself")));
        }
        let outcome: Outcome = field(co).parse().map_err(|e: Error| parse_err(e.to_string()))?;
        let timestamp = match ct.map(field).filter(|s| !s.is_empty()) {
            Some(s) => Some(
                DateTime::parse_from_rfc3339(s)
                    .map_err(|e| parse_err(format!("bad timestamp `{s}`: {e}")))?
                    .with_timezone(&Utc),
            ),
            None => None,
        };
        let session = cs.map(field).filter(|s| !s.is_empty()).map(str::to_string);
        records.push(ComparisonRecord {
            a,
            b,
            outcome,
            timestamp,
            session,
        });
    }
    Ok(records)
}

pub fn read_jsonl_records<R: BufRead>(input: R) -> Result<Vec<ComparisonRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ComparisonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if record.a == record.b {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("item `{}` compared with itself", record.a),
            });
        }
        records.push(record);
    }
    Ok(records)
}
