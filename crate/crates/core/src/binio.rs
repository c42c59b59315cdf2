//! Little-endian read helpers that turn short reads into [`Error::Truncated`].

use std::io::{self, Read};

use crate::error::{Error, Result};

pub(crate) fn read_bytes<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| eof_to_truncated(e, what))?;
    Ok(buf)
}

pub(crate) fn read_vec<R: Read>(r: &mut R, len: usize, what: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.by_ref()
        .take(len as u64)
        .read_to_end(&mut buf)
        .map_err(|e| eof_to_truncated(e, what))?;
    if buf.len() != len {
        return Err(Error::Truncated(what.to_string()));
    }
    Ok(buf)
}

pub(crate) fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8> {
    Ok(read_bytes::<1, _>(r, what)?[0])
}

pub(crate) fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16> {
    Ok(u16::from_le_bytes(read_bytes(r, what)?))
}

pub(crate) fn read_i16<R: Read>(r: &mut R, what: &str) -> Result<i16> {
    Ok(i16::from_le_bytes(read_bytes(r, what)?))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(read_bytes(r, what)?))
}

pub(crate) fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r, what)?))
}

pub(crate) fn read_f32s<R: Read>(r: &mut R, n: usize, what: &str) -> Result<Vec<f32>> {
    let raw = read_vec(r, n * 4, what)?;
    Ok(raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn read_string<R: Read>(r: &mut R, len: usize, what: &str) -> Result<String> {
    let raw = read_vec(r, len, what)?;
    String::from_utf8(raw).map_err(|_| Error::Malformed(format!("{what} is not valid UTF-8")))
}

/// Fails with [`Error::Malformed`] if any bytes remain.
pub(crate) fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::Malformed("trailing bytes after last record".into())),
    }
}

fn eof_to_truncated(e: io::Error, what: &str) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Truncated(what.to_string())
    } else {
        Error::Io(e)
    }
}
