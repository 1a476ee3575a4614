//! Request/response lines of the lookup service.
//!
//! | request        | response                                   |
//! |----------------|--------------------------------------------|
//! | `QUERY x y`    | `OK <dBm> <CLASS>` or `OK NOTX BLACK`      |
//! |                | `ERR OUTOFAREA`, `ERR OUTOFCELL`           |
//! | `PING`         | `PONG`                                     |
//! | `INFO`         | `OK key=value ...`                         |
//! | anything else  | `ERR BADREQ`                               |
//!
//! Coordinates are kilometers; powers are printed with two decimals.

use tvws_core::radio::Location;
use tvws_core::reuse::Mpep;

use crate::{DatabaseHandle, DbError, QueryAnswer};

pub const BAD_REQUEST: &str = "ERR BADREQ";

/// Response line (without the trailing newline) for one request line.
pub fn respond(db: &DatabaseHandle, request: &str) -> String {
    let mut parts = request.split_ascii_whitespace();
    let verb = parts.next();
    let args: Vec<&str> = parts.collect();
    match (verb, args.as_slice()) {
        (Some("PING"), []) => "PONG".to_string(),
        (Some("INFO"), []) => info(db),
        (Some("QUERY"), [x, y]) => match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() => query_line(db, &Location::new(x, y)),
            _ => BAD_REQUEST.to_string(),
        },
        _ => BAD_REQUEST.to_string(),
    }
}

fn query_line(db: &DatabaseHandle, loc: &Location) -> String {
    match db.query(loc) {
        Ok(QueryAnswer::Entry { power, class }) => match power {
            Mpep::NoTransmission => format!("OK NOTX {class}"),
            Mpep::Dbm(v) => format!("OK {v:.2} {class}"),
        },
        Ok(QueryAnswer::OutOfCell) => "ERR OUTOFCELL".to_string(),
        Err(DbError::OutOfArea { .. }) => "ERR OUTOFAREA".to_string(),
        Err(_) => BAD_REQUEST.to_string(),
    }
}

fn info(db: &DatabaseHandle) -> String {
    let g = &db.mpep.grid;
    format!(
        "OK scenario={} rows={} cols={} cell_m={} origin={},{} in_cell={} digest={:016x} built={}",
        db.meta.scenario,
        g.rows,
        g.cols,
        g.cell_size_m,
        g.origin.x,
        g.origin.y,
        db.mpep.in_cell_count(),
        db.meta.digest,
        db.meta.built_unix
    )
}
