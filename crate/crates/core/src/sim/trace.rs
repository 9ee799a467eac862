use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Start,
    Claim,
    Barrier,
    Payment,
    Reset,
    Ruin,
    Censored,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Start => "start",
            Event::Claim => "claim",
            Event::Barrier => "barrier",
            Event::Payment => "payment",
            Event::Reset => "reset",
            Event::Ruin => "ruin",
            Event::Censored => "censored",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub y1: f64,
    pub y2: f64,
    pub event: Event,
}

/// Event log of a single path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, t: f64, y1: f64, y2: f64, event: Event) {
        self.rows.push(TraceRow { t, y1, y2, event });
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// CSV with header `t,y1,y2,event`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("trace output failed: {e}"));
        w.write_record(["t", "y1", "y2", "event"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.y1.to_string(),
                r.y2.to_string(),
                r.event.name().to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("trace output failed: {e}")))?;
        Ok(())
    }
}
