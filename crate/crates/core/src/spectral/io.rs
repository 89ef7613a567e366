//! Snapshot and trajectory file formats.
//!
//! Snapshot layout, all little-endian: magic `SNLS`, version `u32`, `K u32`,
//! time `f64`, then `2K` `f64` values `Re c_0, Im c_0, Re c_1, ...`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::FieldState;
use crate::{Result, SnlsError};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SNLS";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mut w: W, state: &FieldState) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&(state.modes.len() as u32).to_le_bytes())?;
    w.write_all(&state.time.to_le_bytes())?;
    for c in &state.modes {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<FieldState> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(SnlsError::InvalidParams("not an SNLS snapshot".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != SNAPSHOT_VERSION {
        return Err(SnlsError::InvalidParams(format!(
            "unsupported snapshot version {version}"
        )));
    }
    r.read_exact(&mut word)?;
    let k = u32::from_le_bytes(word) as usize;
    let mut dword = [0u8; 8];
    r.read_exact(&mut dword)?;
    let time = f64::from_le_bytes(dword);
    let mut modes = Vec::with_capacity(k);
    for _ in 0..k {
        r.read_exact(&mut dword)?;
        let re = f64::from_le_bytes(dword);
        r.read_exact(&mut dword)?;
        let im = f64::from_le_bytes(dword);
        modes.push(Complex64::new(re, im));
    }
    Ok(FieldState { modes, time })
}

/// CSV with columns `t, re0, im0, ..., re7, im7` (first eight modes).
pub fn write_trajectory_csv<W: Write>(mut w: W, states: &[FieldState]) -> Result<()> {
    const SHOWN: usize = 8;
    let mut header = String::from("t");
    for k in 0..SHOWN {
        header.push_str(&format!(",re{k},im{k}"));
    }
    writeln!(w, "{header}")?;
    for s in states {
        let mut line = format!("{:e}", s.time);
        for k in 0..SHOWN {
            let c = s.modes.get(k).copied().unwrap_or_default();
            line.push_str(&format!(",{:e},{:e}", c.re, c.im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_header_layout() {
        let mut s = FieldState::zeros(16);
        s.time = 2.5;
        s.modes[3] = Complex64::new(1.0, -2.0);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &s).unwrap();
        assert_eq!(&buf[..4], b"SNLS");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 16);
        assert_eq!(f64::from_le_bytes(buf[12..20].try_into().unwrap()), 2.5);
        assert_eq!(buf.len(), 20 + 16 * 16);
        assert_eq!(read_snapshot(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn bad_magic_rejected() {
        assert!(read_snapshot(&b"XXXX\x01\0\0\0"[..]).is_err());
    }
}
