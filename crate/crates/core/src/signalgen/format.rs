//! Dataset file format (little-endian):
//!
//! ```text
//! "IQDS" | version u16 = 1 | frame_len u32 | frame_count u64 | class_count u8 |
//!   class_count × [name_len u8 | name (UTF-8)] |
//!   frame_count × [class_id u8 | snr_db i16 | frame_len × f32 I | frame_len × f32 Q]
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::dataset::Dataset;
use super::frame::IqFrame;
use crate::binio::{expect_eof, read_bytes, read_f32s, read_i16, read_string, read_u16, read_u32, read_u64, read_u8};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: [u8; 4] = *b"IQDS";
pub const DATASET_VERSION: u16 = 1;

pub fn write_dataset<W: Write>(w: &mut W, ds: &Dataset) -> Result<()> {
    ds.validate()?;
    let frame_len = u32::try_from(ds.frame_len)
        .map_err(|_| Error::InvalidArgument(format!("frame_len {} exceeds u32", ds.frame_len)))?;
    w.write_all(&DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    w.write_all(&frame_len.to_le_bytes())?;
    w.write_all(&(ds.frames.len() as u64).to_le_bytes())?;
    w.write_all(&[ds.class_names.len() as u8])?;
    for name in &ds.class_names {
        let len = u8::try_from(name.len())
            .map_err(|_| Error::InvalidArgument(format!("class name too long: {name}")))?;
        w.write_all(&[len])?;
        w.write_all(name.as_bytes())?;
    }
    let mut record = Vec::with_capacity(3 + 8 * ds.frame_len);
    for f in &ds.frames {
        record.clear();
        record.push(f.class_id);
        record.extend_from_slice(&f.snr_db.to_le_bytes());
        for v in f.as_slice() {
            record.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&record)?;
    }
    Ok(())
}

/// Reads a complete dataset; any header or record defect is an error and
/// no partial dataset is returned.
pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset> {
    let magic = read_bytes::<4, _>(r, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = read_u16(r, "version")?;
    if version != DATASET_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let frame_len = read_u32(r, "frame_len")? as usize;
    let frame_count = read_u64(r, "frame_count")?;
    let class_count = read_u8(r, "class_count")? as usize;
    let mut class_names = Vec::with_capacity(class_count);
    for i in 0..class_count {
        let len = read_u8(r, "class name length")? as usize;
        class_names.push(read_string(r, len, &format!("class name {i}"))?);
    }
    if frame_count > 0 && frame_len == 0 {
        return Err(Error::Malformed("frames with zero length".into()));
    }
    // Cap the up-front allocation; a lying header must not exhaust memory.
    let mut frames = Vec::with_capacity(frame_count.min(1 << 16) as usize);
    for i in 0..frame_count {
        let what = format!("frame {i}");
        let class_id = read_u8(r, &what)?;
        let snr_db = read_i16(r, &what)?;
        let i_row = read_f32s(r, frame_len, &what)?;
        let q_row = read_f32s(r, frame_len, &what)?;
        if class_id as usize >= class_count {
            return Err(Error::Malformed(format!(
                "frame {i} has class id {class_id} but only {class_count} classes"
            )));
        }
        frames.push(IqFrame::from_rows(class_id, snr_db, &i_row, &q_row)
            .map_err(|e| Error::Malformed(format!("frame {i}: {e}")))?);
    }
    expect_eof(r)?;
    Dataset::new(frame_len, class_names, frames)
}

pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, ds)?;
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::ModulationScheme;

    fn one_frame() -> Dataset {
        let f = IqFrame::from_rows(5, -6, &[0.1, -0.2, 1e-30], &[3.5, f32::MIN_POSITIVE, -0.0]).unwrap();
        Dataset::new(3, ModulationScheme::class_names(), vec![f]).unwrap()
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = Dataset::new(128, ModulationScheme::class_names(), vec![]).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let names: usize = ds.class_names.iter().map(|n| n.len() + 1).sum();
        assert_eq!(buf.len(), 4 + 2 + 4 + 8 + 1 + names);
        assert_eq!(read_dataset(&mut buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn one_frame_round_trip_is_bit_exact() {
        let ds = one_frame();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let back = read_dataset(&mut buf.as_slice()).unwrap();
        let bits = |d: &Dataset| d.frames[0].as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&ds));
        assert_eq!(back, ds);
    }

    #[test]
    fn bad_magic() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &one_frame()).unwrap();
        buf[1] = b'X';
        let err = read_dataset(&mut buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
        assert!(err.to_string().contains("bad magic"));
    }

    #[test]
    fn bad_version_and_truncation() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &one_frame()).unwrap();
        let mut v = buf.clone();
        v[4] = 2;
        assert!(matches!(read_dataset(&mut v.as_slice()), Err(Error::UnsupportedVersion { found: 2, .. })));
        for cut in [3, 10, buf.len() - 1] {
            assert!(matches!(read_dataset(&mut &buf[..cut]), Err(Error::Truncated(_))), "cut {cut}");
        }
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(read_dataset(&mut extra.as_slice()), Err(Error::Malformed(_))));
    }

    #[test]
    fn class_id_beyond_header() {
        let mut buf = Vec::new();
        let ds = Dataset::new(3, vec!["A".into()], vec![]).unwrap();
        write_dataset(&mut buf, &ds).unwrap();
        // patch in one record with class 4
        buf[10..18].copy_from_slice(&1u64.to_le_bytes());
        buf.push(4);
        buf.extend_from_slice(&0i16.to_le_bytes());
        buf.extend(std::iter::repeat_n(0u8, 24));
        assert!(matches!(read_dataset(&mut buf.as_slice()), Err(Error::Malformed(_))));
    }
}
