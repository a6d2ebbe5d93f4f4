//! Ticker → market sector mapping.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

const BUNDLED: &str = include_str!("../data/universe.csv");

/// Sector ETF symbols in report order.
pub const SECTORS: [&str; 11] = ["XLB", "XLC", "XLE", "XLF", "XLI", "XLK", "XLP", "XLRE", "XLU", "XLV", "XLY"];

#[derive(Debug, Error)]
pub enum UniverseError {
    #[error("universe file: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown sector {sector:?} for {ticker}")]
    UnknownSector { ticker: String, sector: String },
    #[error("duplicate ticker {0}")]
    Duplicate(String),
}

#[derive(Debug, Deserialize)]
struct Row {
    ticker: String,
    sector: String,
    #[serde(default)]
    sector_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SectorUniverse {
    sectors: BTreeMap<String, String>,
    names: BTreeMap<String, String>,
}

impl SectorUniverse {
    /// 165 stocks, 15 per sector.
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED.as_bytes()).expect("bundled universe parses")
    }

    /// Reads `ticker,sector[,sector_name]` CSV with a header row.
    pub fn from_reader<R: Read>(r: R) -> Result<Self, UniverseError> {
        let mut out = Self::default();
        for row in csv::Reader::from_reader(r).deserialize::<Row>() {
            let row = row?;
            let sector = row.sector.trim().to_string();
            if !SECTORS.contains(&sector.as_str()) {
                return Err(UniverseError::UnknownSector { ticker: row.ticker, sector });
            }
            let ticker = row.ticker.trim().to_string();
            if out.sectors.insert(ticker.clone(), sector.clone()).is_some() {
                return Err(UniverseError::Duplicate(ticker));
            }
            if let Some(name) = row.sector_name {
                out.names.entry(sector).or_insert(name);
            }
        }
        Ok(out)
    }

    pub fn sector_of(&self, ticker: &str) -> Option<&str> {
        self.sectors.get(ticker).map(String::as_str)
    }

    pub fn sector_name(&self, sector: &str) -> Option<&str> {
        self.names.get(sector).map(String::as_str)
    }

    pub fn tickers(&self) -> impl Iterator<Item = &str> {
        self.sectors.keys().map(String::as_str)
    }

    pub fn tickers_in(&self, sector: &str) -> Vec<&str> {
        self.sectors.iter().filter(|(_, s)| *s == sector).map(|(t, _)| t.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn insert(&mut self, ticker: &str, sector: &str) {
        self.sectors.insert(ticker.to_string(), sector.to_string());
    }
}
