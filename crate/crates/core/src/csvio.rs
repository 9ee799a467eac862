//! CSV formats: the exponent dump and the barrier sweep table.
//!
//! Dump columns: `k,g1,g2,g3,D,g1',g2',g3',D'` (primed family on the right).
//! Sweep columns: `a,b,u1,u2,v1,terms,tail`; failed cells leave the last
//! three fields empty, and an optional final row
//! `argmax,a,b,u1,u2,v1,` names the best cell.

use std::io::Write;

use crate::error::{Error, Result};
use crate::gamma::{check_family, GammaSequences, GammaStep, InvariantFailure};
use crate::model::ModelParams;
use crate::optimize::SweepResult;
use crate::reference::ReferenceTable;

pub const GAMMA_HEADER: [&str; 9] = ["k", "g1", "g2", "g3", "D", "g1'", "g2'", "g3'", "D'"];
pub const SWEEP_HEADER: [&str; 7] = ["a", "b", "u1", "u2", "v1", "terms", "tail"];
pub const ARGMAX_TAG: &str = "argmax";

fn write_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("CSV output failed: {e}"))
}

/// Shortest round-trip text for `v`, switching to exponent form for very
/// small or very large magnitudes.
pub fn num(v: f64) -> String {
    let m = v.abs();
    if m == 0.0 || (1e-4..1e15).contains(&m) || !m.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn parse_err(line: u64, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("line {line}: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTriple {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRow {
    pub k: usize,
    pub main: GammaTriple,
    pub primed: GammaTriple,
}

pub fn write_gamma_csv<W: Write>(seq: &GammaSequences, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAMMA_HEADER).map_err(write_err)?;
    for (k, (m, p)) in seq.steps.iter().zip(&seq.primed_steps).enumerate() {
        let row = [k as f64, m.g1, m.g2, m.g3, m.d, p.g1, p.g2, p.g3, p.d];
        let mut fields: Vec<String> = row.iter().map(|&v| num(v)).collect();
        fields[0] = k.to_string();
        w.write_record(&fields).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn field_f64(rec: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<f64> {
    let raw = rec.get(i).ok_or_else(|| parse_err(line, format!("missing field {name}")))?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{name} is not a number: {raw:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{name} is not finite")));
    }
    Ok(v)
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(|e| parse_err(1, e))?;
    if h.iter().map(str::trim).ne(want.iter().copied()) {
        return Err(parse_err(1, format!("expected header {}", want.join(","))));
    }
    Ok(())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes())
}

/// Parses a dump; rows must be numbered `0, 1, 2, ...`.
pub fn parse_gamma_csv(text: &str) -> Result<Vec<GammaRow>> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &GAMMA_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let k: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("k is not an index: {:?}", &rec[0])))?;
        if k != rows.len() {
            return Err(parse_err(line, format!("expected k = {}, found {k}", rows.len())));
        }
        let mut v = [0.0; 8];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = field_f64(&rec, i + 1, line, GAMMA_HEADER[i + 1])?;
        }
        rows.push(GammaRow {
            k,
            main: GammaTriple {
                g1: v[0],
                g2: v[1],
                g3: v[2],
                d: v[3],
            },
            primed: GammaTriple {
                g1: v[4],
                g2: v[5],
                g3: v[6],
                d: v[7],
            },
        });
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(rows)
}

/// Structural checks of a parsed dump for slope `a`; the conic residual is
/// checked only when `params` is given.
pub fn check_gamma_rows(rows: &[GammaRow], a: f64, params: Option<&ModelParams>) -> Vec<InvariantFailure> {
    let to_steps = |pick: fn(&GammaRow) -> GammaTriple| -> Vec<GammaStep> {
        rows.iter()
            .map(|r| {
                let t = pick(r);
                GammaStep {
                    g1: t.g1,
                    g2: t.g2,
                    g3: t.g3,
                    d: t.d,
                    d_scaled: t.d,
                    disc_g2: f64::NAN,
                    disc_g1: f64::NAN,
                }
            })
            .collect()
    };
    let mut out = check_family(&to_steps(|r| r.main), "main", a, params);
    out.extend(check_family(&to_steps(|r| r.primed), "primed", a, params));
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub a: f64,
    pub b: f64,
    pub u1: f64,
    pub u2: f64,
    pub v1: Option<f64>,
    pub terms: Option<usize>,
    pub tail: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub argmax: Option<SweepRow>,
}

fn sweep_fields(res: &SweepResult) -> Vec<[String; 7]> {
    res.cells
        .iter()
        .map(|c| {
            let (v, t, tail) = match &c.outcome {
                Ok(v) => (v.value.to_string(), v.terms_used.to_string(), num(v.tail_estimate)),
                Err(_) => (String::new(), String::new(), String::new()),
            };
            [c.a.to_string(), c.b.to_string(), c.u.u1.to_string(), c.u.u2.to_string(), v, t, tail]
        })
        .collect()
}

fn argmax_fields(res: &SweepResult, width: usize) -> Option<Vec<String>> {
    let best = res.best()?;
    let mut f = vec![
        ARGMAX_TAG.to_string(),
        best.a.to_string(),
        best.b.to_string(),
        best.u.u1.to_string(),
        best.u.u2.to_string(),
        best.value()?.to_string(),
    ];
    f.resize(width, String::new());
    Some(f)
}

pub fn write_sweep_csv<W: Write>(res: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(write_err)?;
    for row in sweep_fields(res) {
        w.write_record(&row).map_err(write_err)?;
    }
    if let Some(f) = argmax_fields(res, SWEEP_HEADER.len()) {
        w.write_record(&f).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

/// Sweep columns plus `reference` and `diff = v1 - reference`, one row per
/// reference cell in table order.
pub fn write_table_csv<W: Write>(res: &SweepResult, table: &ReferenceTable, out: W) -> Result<()> {
    if res.cells.len() != table.cells.len() {
        return Err(Error::InvalidInput(format!(
            "{} computed cells for {} reference cells",
            res.cells.len(),
            table.cells.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = SWEEP_HEADER.to_vec();
    header.extend(["reference", "diff"]);
    w.write_record(&header).map_err(write_err)?;
    for ((row, cell), r) in sweep_fields(res).into_iter().zip(&res.cells).zip(&table.cells) {
        let diff = cell.value().map_or(String::new(), |v| num(v - r.value));
        let mut f = row.to_vec();
        f.push(r.value.to_string());
        f.push(diff);
        w.write_record(&f).map_err(write_err)?;
    }
    if let Some(f) = argmax_fields(res, header.len()) {
        w.write_record(&f).map_err(write_err)?;
    }
    w.flush().map_err(write_err)
}

fn optional<T: std::str::FromStr>(raw: &str, line: u64, name: &str) -> Result<Option<T>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse()
        .map(Some)
        .map_err(|_| parse_err(line, format!("{name} is not valid: {raw:?}")))
}

/// Parses sweep output; the `argmax` row, if present, must come last.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &SWEEP_HEADER)?;
    let mut rows = Vec::new();
    let mut argmax = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if argmax.is_some() {
            return Err(parse_err(line, "rows after the argmax footer"));
        }
        if rec[0].trim() == ARGMAX_TAG {
            let row = SweepRow {
                a: field_f64(&rec, 1, line, "a")?,
                b: field_f64(&rec, 2, line, "b")?,
                u1: field_f64(&rec, 3, line, "u1")?,
                u2: field_f64(&rec, 4, line, "u2")?,
                v1: Some(field_f64(&rec, 5, line, "v1")?),
                terms: None,
                tail: None,
            };
            argmax = Some(row);
            continue;
        }
        let v1: Option<f64> = optional(&rec[4], line, "v1")?;
        let terms: Option<usize> = optional(&rec[5], line, "terms")?;
        let tail: Option<f64> = optional(&rec[6], line, "tail")?;
        if v1.is_some() != terms.is_some() || v1.is_some() != tail.is_some() {
            return Err(parse_err(line, "v1, terms and tail must be all present or all empty"));
        }
        if v1.is_some_and(|v| !v.is_finite()) {
            return Err(parse_err(line, "v1 is not finite"));
        }
        rows.push(SweepRow {
            a: field_f64(&rec, 0, line, "a")?,
            b: field_f64(&rec, 1, line, "b")?,
            u1: field_f64(&rec, 2, line, "u1")?,
            u2: field_f64(&rec, 3, line, "u2")?,
            v1,
            terms,
            tail,
        });
    }
    if let Some(best) = &argmax {
        let found = rows
            .iter()
            .any(|r| (r.a, r.b, r.u1, r.u2) == (best.a, best.b, best.u1, best.u2) && r.v1 == best.v1);
        if !found {
            return Err(Error::InvalidInput("argmax footer does not match any row".into()));
        }
    }
    Ok(SweepTable { rows, argmax })
}
