//! Binary database file.
//!
//! ```text
//! magic "TVWSDB1" | version u16 | digest u64 | built u64
//! scenario: len u16 + UTF-8 bytes
//! grid: origin x f64, origin y f64, cell size m f64, rows u32, cols u32
//! p_peak f64
//! per grid, row-major: tag u8 (0 out of cell, 1 black, 2 gray, 3 white)
//!   gray adds mpep f64, wcrp x f64, wcrp y f64; white adds mpep f64
//! checksum u64: FNV-1a over every preceding byte
//! ```
//!
//! Integers and floats are little endian.

use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;
use tvws_core::grid::GridSpec;
use tvws_core::radio::Location;
use tvws_core::reuse::{Mpep, MpepEntry, MpepMap, SpaceClass};

use crate::{DatabaseHandle, DbError, Metadata};

pub const DB_MAGIC: &[u8; 7] = b"TVWSDB1";
pub const DB_VERSION: u16 = 1;

const TAG_OUT: u8 = 0;
const TAG_BLACK: u8 = 1;
const TAG_GRAY: u8 = 2;
const TAG_WHITE: u8 = 3;

pub fn save(db: &DatabaseHandle, path: &Path) -> Result<(), DbError> {
    std::fs::write(path, encode(db)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<DatabaseHandle, DbError> {
    decode(&std::fs::read(path)?)
}

fn fnv(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub(crate) fn encode(db: &DatabaseHandle) -> Result<Vec<u8>, DbError> {
    let map = &db.mpep;
    let g = &map.grid;
    let mut out = Vec::with_capacity(64 + g.len() * 9);
    out.extend_from_slice(DB_MAGIC);
    out.extend_from_slice(&DB_VERSION.to_le_bytes());
    out.extend_from_slice(&db.meta.digest.to_le_bytes());
    out.extend_from_slice(&db.meta.built_unix.to_le_bytes());
    let name = db.meta.scenario.as_bytes();
    let len = u16::try_from(name.len()).map_err(|_| DbError::Corrupt("scenario name too long".into()))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name);
    for v in [g.origin.x, g.origin.y, g.cell_size_m] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for n in [g.rows, g.cols] {
        let n = u32::try_from(n).map_err(|_| DbError::Corrupt("grid too large".into()))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    out.extend_from_slice(&map.p_peak_dbm.to_le_bytes());
    for e in map.entries() {
        match e {
            None => out.push(TAG_OUT),
            Some(e) => match (e.class, e.power, e.wcrp) {
                (SpaceClass::Black, Mpep::NoTransmission, _) => out.push(TAG_BLACK),
                (SpaceClass::Gray, Mpep::Dbm(v), Some(w)) => {
                    out.push(TAG_GRAY);
                    for x in [v, w.x, w.y] {
                        out.extend_from_slice(&x.to_le_bytes());
                    }
                }
                (SpaceClass::White, Mpep::Dbm(v), _) => {
                    out.push(TAG_WHITE);
                    out.extend_from_slice(&v.to_le_bytes());
                }
                _ => return Err(DbError::Corrupt(format!("entry breaks the space-class rules: {e:?}"))),
            },
        }
    }
    let sum = fnv(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DbError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or(DbError::Truncated)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DbError> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    fn u8(&mut self) -> Result<u8, DbError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DbError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DbError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, DbError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64, DbError> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

pub(crate) fn decode(buf: &[u8]) -> Result<DatabaseHandle, DbError> {
    let head = &buf[..buf.len().min(DB_MAGIC.len())];
    if head != &DB_MAGIC[..head.len()] {
        return Err(DbError::BadMagic);
    }
    let mut rd = Reader { buf, pos: 0 };
    rd.take(DB_MAGIC.len())?;
    let version = rd.u16()?;
    if version != DB_VERSION {
        return Err(DbError::Version(version));
    }
    let digest = rd.u64()?;
    let built_unix = rd.u64()?;
    let len = rd.u16()? as usize;
    let scenario = std::str::from_utf8(rd.take(len)?)
        .map_err(|_| DbError::Corrupt("scenario name is not UTF-8".into()))?
        .to_string();
    let origin = Location::new(rd.f64()?, rd.f64()?);
    let cell = rd.f64()?;
    let rows = rd.u32()? as usize;
    let cols = rd.u32()? as usize;
    let grid = GridSpec::new(origin, cell, rows, cols).map_err(|e| DbError::Corrupt(e.to_string()))?;
    let p_peak = rd.f64()?;
    let mut entries = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let e = match rd.u8()? {
            TAG_OUT => None,
            TAG_BLACK => Some(MpepEntry::black()),
            TAG_GRAY => {
                let v = rd.f64()?;
                Some(MpepEntry::gray(v, Location::new(rd.f64()?, rd.f64()?)))
            }
            TAG_WHITE => Some(MpepEntry {
                power: Mpep::Dbm(rd.f64()?),
                class: SpaceClass::White,
                wcrp: None,
            }),
            t => return Err(DbError::Corrupt(format!("unknown entry tag {t}"))),
        };
        entries.push(e);
    }
    let body_end = rd.pos;
    let stored = rd.u64()?;
    if rd.pos != buf.len() {
        return Err(DbError::Corrupt("trailing bytes after checksum".into()));
    }
    if fnv(&buf[..body_end]) != stored {
        return Err(DbError::Checksum);
    }
    let mpep = MpepMap::from_entries(grid, p_peak, entries).map_err(|e| DbError::Corrupt(e.to_string()))?;
    Ok(DatabaseHandle::with_metadata(
        mpep,
        Metadata {
            scenario,
            built_unix,
            digest,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatabaseHandle {
        let grid = GridSpec::new(Location::new(1.0, 2.0), 80.0, 2, 3).unwrap();
        let mut map = MpepMap::new(grid, -10.0);
        map.set(0, 0, Some(MpepEntry::black()));
        map.set(0, 1, Some(MpepEntry::gray(-17.020_9, Location::new(1.2, 2.04))));
        map.set(1, 2, Some(MpepEntry::white(-10.0)));
        DatabaseHandle::with_metadata(
            map,
            Metadata {
                scenario: "II".into(),
                built_unix: 1_700_000_000,
                digest: 0xdead_beef,
            },
        )
    }

    #[test]
    fn roundtrip_in_memory() {
        let db = small();
        let bytes = encode(&db).unwrap();
        assert_eq!(&bytes[..7], b"TVWSDB1");
        assert_eq!(decode(&bytes).unwrap(), db);
    }

    #[test]
    fn distinct_failures() {
        let bytes = encode(&small()).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(DbError::Truncated)));
        assert!(matches!(decode(&bytes[..4]), Err(DbError::Truncated)));
        assert!(matches!(decode(b"PK\x03\x04"), Err(DbError::BadMagic)));

        let mut v = bytes.clone();
        v[7] = 9;
        assert!(matches!(decode(&v), Err(DbError::Version(9))));

        let mut c = bytes.clone();
        let n = c.len();
        c[n - 20] ^= 0x01;
        assert!(matches!(decode(&c), Err(DbError::Checksum)));

        let mut t = bytes;
        t.push(0);
        assert!(matches!(decode(&t), Err(DbError::Corrupt(_))));
    }
}
