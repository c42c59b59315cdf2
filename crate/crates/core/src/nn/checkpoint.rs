//! Binary checkpoint format.
//!
//! ```text
//! "MSNC" | version u16 | param_count u32 |
//!   param_count × [name_len u16 | name (UTF-8) | rank u8 | rank × u32 dims | f32 data]
//! ```
//!
//! All integers and floats are little-endian. Entries are written in network
//! traversal order (`ms1.reduce.weight`, `ms1.reduce.bias`, `ms1.reduce_bn.gamma`,
//! ..., `fc2.bias`), followed by `config.feature_relu` (one element, 0 or 1)
//! and, when present, `centers.c`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::msnet::{MsNet, MsNetConfig};
use super::params::Params;
use super::tensor::Tensor;
use crate::binio::{expect_eof, read_bytes, read_f32s, read_u16, read_u32, read_u8, read_string};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MSNC";
pub const CHECKPOINT_VERSION: u16 = 1;
pub const CENTERS_NAME: &str = "centers.c";
const FEATURE_RELU_NAME: &str = "config.feature_relu";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub net: MsNet<f32>,
    /// `num_classes × feature_dim` class centers, if saved.
    pub centers: Option<Tensor<f32>>,
}

fn write_entry<W: Write>(w: &mut W, name: &str, t: &Tensor<f32>) -> Result<()> {
    let name_len = u16::try_from(name.len())
        .map_err(|_| Error::InvalidArgument(format!("parameter name too long: {name}")))?;
    w.write_all(&name_len.to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    let rank = u8::try_from(t.rank())
        .map_err(|_| Error::InvalidArgument(format!("rank of {name} exceeds 255")))?;
    w.write_all(&[rank])?;
    for &d in t.shape() {
        let d = u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("extent of {name} exceeds u32")))?;
        w.write_all(&d.to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(w: &mut W, net: &MsNet<f32>, centers: Option<&Tensor<f32>>) -> Result<()> {
    let params = net.named_params();
    let relu_flag = Tensor::full(&[1], if net.config.feature_relu { 1.0 } else { 0.0 });
    let count = params.len() + 1 + usize::from(centers.is_some());
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(count as u32).to_le_bytes())?;
    for (name, _, t) in params {
        write_entry(w, &name, t)?;
    }
    write_entry(w, FEATURE_RELU_NAME, &relu_flag)?;
    if let Some(c) = centers {
        write_entry(w, CENTERS_NAME, c)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    let magic = read_bytes::<4, _>(r, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = read_u16(r, "version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let count = read_u32(r, "parameter count")? as usize;
    let mut entries: BTreeMap<String, Tensor<f32>> = BTreeMap::new();
    for i in 0..count {
        let name_len = read_u16(r, "parameter name length")? as usize;
        let name = read_string(r, name_len, "parameter name")?;
        let rank = read_u8(r, "parameter rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(r, "parameter dims")? as usize);
        }
        let n: usize = dims.iter().product();
        let data = read_f32s(r, n, &format!("data of parameter {i} ({name})"))?;
        let t = Tensor::new(dims, data)?;
        if entries.insert(name.clone(), t).is_some() {
            return Err(Error::Malformed(format!("duplicate parameter {name}")));
        }
    }
    expect_eof(r)?;

    let config = infer_config(&entries)?;
    let mut net = MsNet::<f32>::skeleton(config)?;
    let mut failure = None;
    net.visit_mut("", &mut |name, _, t| {
        if failure.is_some() {
            return;
        }
        match entries.remove(&name) {
            Some(v) if v.shape() == t.shape() => *t = v,
            Some(v) => {
                failure = Some(Error::Malformed(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    v.shape(),
                    t.shape()
                )))
            }
            None => failure = Some(Error::Malformed(format!("missing parameter {name}"))),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    entries.remove(FEATURE_RELU_NAME);
    let centers = entries.remove(CENTERS_NAME);
    if let Some(c) = &centers {
        if c.shape() != [config.num_classes, config.feature_dim] {
            return Err(Error::Malformed(format!("centers have shape {:?}", c.shape())));
        }
    }
    if let Some(extra) = entries.keys().next() {
        return Err(Error::Malformed(format!("unknown parameter {extra}")));
    }
    Ok(Checkpoint { net, centers })
}

fn infer_config(entries: &BTreeMap<String, Tensor<f32>>) -> Result<MsNetConfig> {
    let get = |name: &str| {
        entries
            .get(name)
            .ok_or_else(|| Error::Malformed(format!("missing parameter {name}")))
    };
    let reduce = get("ms1.reduce.weight")?;
    let fc2 = get("fc2.weight")?;
    if reduce.rank() != 3 || fc2.rank() != 2 {
        return Err(Error::Malformed("unexpected parameter ranks".into()));
    }
    let num_modules = (1..)
        .take_while(|i| entries.contains_key(&format!("ms{i}.reduce.weight")))
        .count();
    let feature_relu = match entries.get(FEATURE_RELU_NAME) {
        Some(t) => t.data().first().copied().unwrap_or(1.0) != 0.0,
        None => true,
    };
    Ok(MsNetConfig {
        in_channels: reduce.shape()[1],
        branch_channels: reduce.shape()[0],
        num_modules,
        feature_dim: fc2.shape()[0],
        num_classes: fc2.shape()[1],
        feature_relu,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, net: &MsNet<f32>, centers: Option<&Tensor<f32>>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, net, centers)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
