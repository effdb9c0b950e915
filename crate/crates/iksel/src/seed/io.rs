//! Binary database persistence.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "IKSELDB1"                  8 bytes
//! format version                    u32
//! model fingerprint                 32 bytes (SHA-256, canonical model)
//! dof                               u32
//! record count                      u64
//! rotation weight                   f64
//! relative singular-value cutoff    f64
//! per-joint divisions               dof x u32 (zeros: not grid-built)
//! records, grid order               count x [q | key | jpinv row-major]
//! body checksum                     32 bytes (SHA-256 of the records)
//! ```
//!
//! Loading verifies magic, version, fingerprint, and the body checksum;
//! malformed files report the byte offset where parsing stopped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kinematics::{JacobianPinv, JointConfig, PoseKey, RobotModel};

use super::{SeedDatabase, SeedRecord};

pub const MAGIC: [u8; 8] = *b"IKSELDB1";
pub const FORMAT_VERSION: u32 = 1;

pub(super) fn save(db: &SeedDatabase, path: &Path) -> Result<()> {
    let dof = db.records[0].q.len();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MAGIC)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_all(&db.fingerprint)?;
    w.write_u32::<LittleEndian>(dof as u32)?;
    w.write_u64::<LittleEndian>(db.records.len() as u64)?;
    w.write_f64::<LittleEndian>(db.rotation_weight)?;
    w.write_f64::<LittleEndian>(db.rel_cutoff)?;
    for &d in &db.divisions {
        w.write_u32::<LittleEndian>(d)?;
    }

    let mut hasher = Sha256::new();
    let mut buf = Vec::with_capacity((dof + 6 + dof * 6) * 8);
    for rec in &db.records {
        buf.clear();
        for &v in rec.q.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in rec.key.coords() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for r in 0..dof {
            for c in 0..6 {
                buf.extend_from_slice(&rec.jpinv[(r, c)].to_le_bytes());
            }
        }
        hasher.update(&buf);
        w.write_all(&buf)?;
    }
    w.write_all(&hasher.finalize())?;
    w.flush()?;
    Ok(())
}

/// `Read` adapter that tracks the absolute byte offset for error reports.
struct Counted<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Read for Counted<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.offset += n as u64;
        Ok(n)
    }
}

impl<R: Read> Counted<R> {
    fn take_exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let at = self.offset;
        self.inner.read_exact(buf).map_err(|e| {
            self.offset = at; // read_exact consumed an unknown amount
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format {
                    offset: at,
                    reason: format!("unexpected end of file while reading {what}"),
                }
            } else {
                Error::Io(e)
            }
        })?;
        self.offset = at + buf.len() as u64;
        Ok(())
    }

    fn u32_le(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.take_exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64_le(&mut self, what: &str) -> Result<u64> {
        let mut b = [0u8; 8];
        self.take_exact(&mut b, what)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64_le(&mut self, what: &str) -> Result<f64> {
        let mut b = [0u8; 8];
        self.take_exact(&mut b, what)?;
        Ok(f64::from_le_bytes(b))
    }
}

pub(super) fn load(path: &Path, model: &RobotModel) -> Result<SeedDatabase> {
    let mut r = Counted {
        inner: BufReader::new(File::open(path)?),
        offset: 0,
    };

    let mut magic = [0u8; 8];
    r.take_exact(&mut magic, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: "not a seed database (bad magic)".into(),
        });
    }
    let version = r.u32_le("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            offset: 8,
            reason: format!("unsupported format version {version}"),
        });
    }
    let mut fingerprint = [0u8; 32];
    r.take_exact(&mut fingerprint, "model fingerprint")?;
    if fingerprint != model.fingerprint() {
        return Err(Error::IncompatibleModel);
    }
    let dof_offset = r.offset;
    let dof = r.u32_le("dof")? as usize;
    if dof != model.dof() {
        return Err(Error::Format {
            offset: dof_offset,
            reason: format!("dof {dof} does not match the model's {}", model.dof()),
        });
    }
    let count_offset = r.offset;
    let count = r.u64_le("record count")?;
    if count == 0 {
        return Err(Error::Format {
            offset: count_offset,
            reason: "record count is zero".into(),
        });
    }
    let weight_offset = r.offset;
    let rotation_weight = r.f64_le("rotation weight")?;
    if !(rotation_weight > 0.0 && rotation_weight.is_finite()) {
        return Err(Error::Format {
            offset: weight_offset,
            reason: format!("rotation weight {rotation_weight} out of range"),
        });
    }
    let cutoff_offset = r.offset;
    let rel_cutoff = r.f64_le("singular-value cutoff")?;
    if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
        return Err(Error::Format {
            offset: cutoff_offset,
            reason: format!("singular-value cutoff {rel_cutoff} out of range"),
        });
    }
    let mut divisions = Vec::with_capacity(dof);
    for _ in 0..dof {
        divisions.push(r.u32_le("joint divisions")?);
    }

    let record_floats = dof + 6 + dof * 6;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; record_floats * 8];
    // Cap the up-front allocation: a corrupt count should fail at EOF, not
    // by exhausting memory.
    let mut records = Vec::with_capacity(count.min(1 << 20) as usize);
    for i in 0..count {
        r.take_exact(&mut buf, &format!("record {i}"))?;
        hasher.update(&buf);
        let mut floats = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let q: Vec<f64> = floats.by_ref().take(dof).collect();
        let mut key = [0.0; 6];
        for k in &mut key {
            *k = floats.next().unwrap();
        }
        let mut jpinv = JacobianPinv::zeros(dof);
        for row in 0..dof {
            for col in 0..6 {
                jpinv[(row, col)] = floats.next().unwrap();
            }
        }
        records.push(SeedRecord {
            q: JointConfig::from(q),
            key: PoseKey(key),
            jpinv,
        });
    }
    let body_digest = hasher.finalize();

    let checksum_offset = r.offset;
    let mut checksum = [0u8; 32];
    r.take_exact(&mut checksum, "body checksum")?;
    if checksum[..] != body_digest[..] {
        return Err(Error::Format {
            offset: checksum_offset,
            reason: "body checksum mismatch (file corrupt)".into(),
        });
    }

    Ok(SeedDatabase::from_loaded_parts(
        fingerprint,
        rotation_weight,
        rel_cutoff,
        divisions,
        records,
    ))
}
