//! On-disk formats: the diagnostics CSV and the versioned binary state dump.
//!
//! State dump layout (little endian):
//!   bytes 0..8   magic "RELBOLT1"
//!   bytes 8..12  u32 n_per_axis
//!   bytes 12..20 f64 p_max
//!   bytes 20..28 f64 rho (diagnostic weight exponent the run used)
//!   then n_per_axis³ f64 grid values in row-major [i][j][k] order.

use crate::grid::{GridFunction, MomentumGrid};
use crate::solver::DiagnosticsRecord;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const STATE_MAGIC: &[u8; 8] = b"RELBOLT1";

/// CSV column header for the diagnostics time series.
pub const CSV_HEADER: &str =
    "t,mass,px,py,pz,energy,H,D,linf,linf_rho,l1_1,l1_rho,dist_l1_J,clipped_mass,cap_count";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected RELBOLT1")]
    BadMagic,
    #[error("corrupt state dump: {0}")]
    Corrupt(&'static str),
}

/// Write the header plus one row per record, 17 significant digits.
pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r.t,
            r.mass,
            r.momentum[0],
            r.momentum[1],
            r.momentum[2],
            r.energy,
            r.h,
            r.d,
            r.linf,
            r.linf_rho,
            r.l1_1,
            r.l1_rho,
            r.dist_l1_j,
            r.clipped_mass,
            r.cap_count
        )?;
    }
    Ok(())
}

/// Serialize a state dump.
pub fn write_state<W: Write>(mut w: W, f: &GridFunction, rho: f64) -> io::Result<()> {
    w.write_all(STATE_MAGIC)?;
    w.write_all(&(f.grid.n_per_axis as u32).to_le_bytes())?;
    w.write_all(&f.grid.p_max.to_le_bytes())?;
    w.write_all(&rho.to_le_bytes())?;
    for &v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Decode a state dump from a byte slice. Returns the state and the stored
/// rho. Rejects truncated input, bad magic, non-finite or unphysical header
/// fields, and size overflow.
pub fn decode_state(bytes: &[u8]) -> Result<(GridFunction, f64), IoError> {
    if bytes.len() < 28 {
        return Err(IoError::Corrupt("header truncated"));
    }
    if &bytes[0..8] != STATE_MAGIC {
        return Err(IoError::BadMagic);
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let p_max = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let rho = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    if n == 0 || n > 1024 {
        return Err(IoError::Corrupt("n_per_axis out of range"));
    }
    if !p_max.is_finite() || p_max <= 0.0 {
        return Err(IoError::Corrupt("p_max not a positive finite number"));
    }
    if !rho.is_finite() || rho < 0.0 {
        return Err(IoError::Corrupt("rho not a nonnegative finite number"));
    }
    let count = n * n * n;
    let need = 28 + 8 * count;
    if bytes.len() != need {
        return Err(IoError::Corrupt("payload size mismatch"));
    }
    let mut values = Vec::with_capacity(count);
    for c in bytes[28..].chunks_exact(8) {
        let v = f64::from_le_bytes(c.try_into().unwrap());
        if !v.is_finite() || v < 0.0 {
            return Err(IoError::Corrupt("grid value not finite nonnegative"));
        }
        values.push(v);
    }
    Ok((
        GridFunction {
            grid: MomentumGrid::new(n, p_max),
            values,
        },
        rho,
    ))
}

/// Read and decode a state dump from a reader.
pub fn read_state<R: Read>(mut r: R) -> Result<(GridFunction, f64), IoError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_state(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridFunction, MomentumGrid};

    fn sample_state() -> GridFunction {
        let grid = MomentumGrid::new(4, 2.0);
        GridFunction::from_fn(grid, |p| (p[0] + p[1] + p[2]).abs())
    }

    #[test]
    fn state_round_trip() {
        let f = sample_state();
        let mut buf = Vec::new();
        write_state(&mut buf, &f, 3.5).unwrap();
        let (g, rho) = decode_state(&buf).unwrap();
        assert_eq!(rho, 3.5);
        assert_eq!(g.grid.n_per_axis, 4);
        assert_eq!(g.grid.p_max, 2.0);
        assert_eq!(g.values, f.values);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(matches!(decode_state(b"short"), Err(IoError::Corrupt(_))));
        let f = sample_state();
        let mut buf = Vec::new();
        write_state(&mut buf, &f, 0.0).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(decode_state(&bad), Err(IoError::BadMagic)));
        let mut trunc = buf.clone();
        trunc.truncate(buf.len() - 4);
        assert!(decode_state(&trunc).is_err());
        let mut nan = buf.clone();
        nan[28..36].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_state(&nan).is_err());
        let mut huge_n = buf;
        huge_n[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_state(&huge_n).is_err());
    }

    #[test]
    fn csv_shape() {
        let rec = DiagnosticsRecord {
            t: 0.25,
            mass: 1.0,
            momentum: [0.0, 0.0, 0.0],
            energy: 2.0,
            h: -0.5,
            d: 0.1,
            linf: 0.3,
            linf_rho: 0.9,
            l1_1: 2.0,
            l1_rho: 4.0,
            dist_l1_j: 0.01,
            clipped_mass: 0.0,
            cap_count: 0,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[rec]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), 15);
        assert!(lines.next().is_none());
    }
}
