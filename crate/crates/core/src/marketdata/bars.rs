use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
const HEADER: [&str; 3] = ["timestamp", "price", "volume"];

/// One intraday observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntradayBar {
    pub timestamp: NaiveDateTime,
    pub price: f64,
    pub volume: f64,
}

/// All bars of one calendar date, in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub bars: Vec<IntradayBar>,
}

impl TradingDay {
    pub fn prices(&self) -> impl Iterator<Item = f64> + '_ {
        self.bars.iter().map(|b| b.price)
    }

    pub fn close(&self) -> Option<f64> {
        self.bars.last().map(|b| b.price)
    }
}

/// Parse `timestamp,price,volume` CSV and group rows by calendar date.
pub fn parse_bars<R: Read>(reader: R) -> Result<Vec<TradingDay>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", HEADER.join(",")),
        });
    }

    let mut days: Vec<TradingDay> = Vec::new();
    let mut previous: Option<NaiveDateTime> = None;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| Error::MalformedRow { line, reason };

        if record.len() != 3 {
            return Err(malformed(format!(
                "expected 3 fields, got {}",
                record.len()
            )));
        }
        let timestamp = NaiveDateTime::parse_from_str(&record[0], TIMESTAMP_FORMAT)
            .map_err(|e| malformed(format!("timestamp `{}`: {e}", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| malformed(format!("price `{}`", &record[1])))?;
        let volume: f64 = record[2]
            .parse()
            .map_err(|_| malformed(format!("volume `{}`", &record[2])))?;

        if !price.is_finite() {
            return Err(malformed(format!("price `{}`", &record[1])));
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice { line, price });
        }
        if !volume.is_finite() || volume < 0.0 {
            return Err(malformed(format!(
                "volume `{}` must be non-negative",
                &record[2]
            )));
        }
        if previous.is_some_and(|p| timestamp <= p) {
            return Err(Error::OutOfOrderTimestamp {
                line,
                timestamp: record[0].to_string(),
            });
        }
        previous = Some(timestamp);

        let bar = IntradayBar {
            timestamp,
            price,
            volume,
        };
        match days.last_mut() {
            Some(day) if day.date == timestamp.date() => day.bars.push(bar),
            _ => days.push(TradingDay {
                date: timestamp.date(),
                bars: vec![bar],
            }),
        }
    }
    Ok(days)
}

/// Inverse of [`parse_bars`]. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_bars<W: Write>(writer: W, days: &[TradingDay]) -> Result<()> {
    let mut out = std::io::BufWriter::new(writer);
    let io = |e| Error::io("<bars>", e);
    writeln!(out, "{}", HEADER.join(",")).map_err(io)?;
    for bar in days.iter().flat_map(|d| &d.bars) {
        writeln!(
            out,
            "{},{},{}",
            bar.timestamp.format(TIMESTAMP_FORMAT),
            bar.price,
            bar.volume
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Drop days with fewer than two bars, for which realized measures are
/// undefined.
pub fn usable_days(days: Vec<TradingDay>) -> Vec<TradingDay> {
    days.into_iter()
        .filter(|d| {
            let keep = d.bars.len() >= 2;
            if !keep {
                log::warn!(
                    "dropping {}: {} bar(s), need at least 2",
                    d.date,
                    d.bars.len()
                );
            }
            keep
        })
        .collect()
}
