//! `.gidw` weight archives.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   b"GIDW"
//! version u16
//! count   u32
//! count x { name_len u32 | name utf-8 | rank u32 | dims u32 x rank | f32 x prod(dims) }
//! ```
//!
//! Weights are stored as rank-4 `(out, in/groups, k, k)`, biases as rank-1.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;

use super::config::ModelConfig;
use super::plan::layer_plan;
use super::Model;
use crate::error::{Error, Result};
use crate::ops::ConvParams;
use crate::tensor::{Shape, Tensor};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"GIDW";
pub const ARCHIVE_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

pub fn write_archive<W: Write>(mut w: W, entries: &[ArchiveEntry]) -> std::io::Result<()> {
    w.write_all(ARCHIVE_MAGIC)?;
    w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for e in entries {
        w.write_all(&(e.name.len() as u32).to_le_bytes())?;
        w.write_all(e.name.as_bytes())?;
        w.write_all(&(e.dims.len() as u32).to_le_bytes())?;
        for &d in &e.dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(e.data.len() * 4);
        for v in &e.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses an archive held in memory. Errors name the entry they hit.
pub fn read_archive(bytes: &[u8]) -> Result<Vec<ArchiveEntry>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4).ok_or_else(|| Error::Archive("truncated header".into()))?;
    if magic != ARCHIVE_MAGIC {
        return Err(Error::Archive(format!("bad magic {magic:?}, expected \"GIDW\"")));
    }
    let version = cur.u16().ok_or_else(|| Error::Archive("truncated header".into()))?;
    if version != ARCHIVE_VERSION {
        return Err(Error::Archive(format!(
            "unsupported version {version}, expected {ARCHIVE_VERSION}"
        )));
    }
    let count = cur.u32().ok_or_else(|| Error::Archive("truncated header".into()))? as usize;

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for index in 0..count {
        let unnamed = |reason: &str| Error::Archive(format!("entry #{index}: {reason}"));
        let name_len = cur.u32().ok_or_else(|| unnamed("truncated name length"))? as usize;
        let name_bytes = cur.take(name_len).ok_or_else(|| unnamed("truncated name"))?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| unnamed("name is not utf-8"))?
            .to_owned();
        let named = |reason: String| Error::ArchiveEntry {
            name: name.clone(),
            reason,
        };
        if !seen.insert(name.clone()) {
            return Err(named("duplicate name".into()));
        }
        let rank = cur.u32().ok_or_else(|| named("truncated rank".into()))? as usize;
        if rank == 0 || rank > 4 {
            return Err(named(format!("unsupported rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32().ok_or_else(|| named("truncated dims".into()))? as usize);
        }
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| named("element count overflows".into()))?;
        let payload = count
            .checked_mul(4)
            .and_then(|n| cur.take(n))
            .ok_or_else(|| named(format!("truncated payload ({count} values expected)")))?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        entries.push(ArchiveEntry { name, dims, data });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Archive(format!(
            "{} trailing bytes after {count} entries",
            bytes.len() - cur.pos
        )));
    }
    Ok(entries)
}

fn model_entries(m: &Model) -> Vec<ArchiveEntry> {
    let mut out = Vec::with_capacity(2 * m.conv_count());
    for (name, p) in m.layers() {
        out.push(ArchiveEntry {
            name: format!("{name}.weight"),
            dims: p.weight.shape().dims().to_vec(),
            data: p.weight.data().to_vec(),
        });
        out.push(ArchiveEntry {
            name: format!("{name}.bias"),
            dims: vec![p.bias.len()],
            data: p.bias.clone(),
        });
    }
    out
}

pub fn save_weights(m: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_archive(&mut buf, &model_entries(m)).map_err(|e| Error::io(path, e))?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Builds a model from archive entries, requiring the exact parameter set of `cfg`.
pub fn model_from_entries(cfg: ModelConfig, entries: Vec<ArchiveEntry>) -> Result<Model> {
    cfg.validate()?;
    let plan = layer_plan(&cfg);
    let mut by_name: IndexMap<String, ArchiveEntry> = entries.into_iter().map(|e| (e.name.clone(), e)).collect();
    let mut layers = IndexMap::with_capacity(plan.len());
    for spec in &plan {
        let mut take = |suffix: &str, dims: Vec<usize>| -> Result<Vec<f32>> {
            let name = format!("{}.{suffix}", spec.name);
            let e = by_name.swap_remove(&name).ok_or_else(|| Error::ArchiveEntry {
                name: name.clone(),
                reason: "missing".into(),
            })?;
            if e.dims != dims {
                return Err(Error::ArchiveEntry {
                    name,
                    reason: format!("shape mismatch: archive has {:?}, config expects {dims:?}", e.dims),
                });
            }
            Ok(e.data)
        };
        let wd = spec.weight_dims();
        let weight = take("weight", wd.to_vec())?;
        let bias = take("bias", vec![spec.out_c])?;
        let weight = Tensor::from_vec(Shape::new(wd[0], wd[1], wd[2], wd[3])?, weight)?;
        layers.insert(spec.name.clone(), ConvParams::new(weight, bias, spec.groups)?);
    }
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::ArchiveEntry {
            name: extra.clone(),
            reason: "not a parameter of this configuration".into(),
        });
    }
    Model::from_layers(cfg, layers)
}

fn read_file(path: &Path) -> Result<Vec<ArchiveEntry>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_archive(&bytes)
}

pub fn load_weights(path: impl AsRef<Path>, cfg: ModelConfig) -> Result<Model> {
    model_from_entries(cfg, read_file(path.as_ref())?)
}

/// Loads an archive, recovering `core`, attention use and scale from the
/// stored shapes. The attention tile is not stored and is taken from `nla_tile`.
pub fn load_weights_inferred(path: impl AsRef<Path>, nla_tile: usize) -> Result<Model> {
    let entries = read_file(path.as_ref())?;
    let find = |name: &str| entries.iter().find(|e| e.name == name);
    let head = find("head.weight").ok_or_else(|| Error::ArchiveEntry {
        name: "head.weight".into(),
        reason: "missing".into(),
    })?;
    let up = find("upsample.weight").ok_or_else(|| Error::ArchiveEntry {
        name: "upsample.weight".into(),
        reason: "missing".into(),
    })?;
    let trunk = head.dims[0];
    if trunk % 4 != 0 {
        return Err(Error::ArchiveEntry {
            name: "head.weight".into(),
            reason: format!("trunk width {trunk} is not 4 * core"),
        });
    }
    let up_c = up.dims[0];
    let scale = (1..=up_c).find(|s| 3 * s * s == up_c).ok_or_else(|| Error::ArchiveEntry {
        name: "upsample.weight".into(),
        reason: format!("{up_c} output channels is not 3 * scale^2"),
    })?;
    let cfg = ModelConfig {
        core: trunk / 4,
        use_nla: find("nla1.value.weight").is_some(),
        scale,
        nla_tile,
        in_channels: 3,
    };
    model_from_entries(cfg, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bytes_of(m: &Model) -> Vec<u8> {
        let mut buf = Vec::new();
        write_archive(&mut buf, &model_entries(m)).unwrap();
        buf
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = ModelConfig::new(4, true).unwrap();
        let m = Model::build(cfg, 11).unwrap();
        let back = model_from_entries(cfg, read_archive(&bytes_of(&m)).unwrap()).unwrap();
        for ((_, a), (_, b)) in m.layers().zip(back.layers()) {
            let bits = |t: &[f32]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.weight.data()), bits(b.weight.data()));
            assert_eq!(bits(&a.bias), bits(&b.bias));
        }
    }

    #[test]
    fn header_layout() {
        let m = Model::build(ModelConfig::new(4, false).unwrap(), 0).unwrap();
        let b = bytes_of(&m);
        assert_eq!(&b[..4], b"GIDW");
        assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
        assert_eq!(u32::from_le_bytes([b[6], b[7], b[8], b[9]]), 116);
        // first entry name
        assert_eq!(u32::from_le_bytes([b[10], b[11], b[12], b[13]]), 11);
        assert_eq!(&b[14..25], b"head.weight");
    }

    #[test]
    fn truncation_names_the_entry() {
        let m = Model::build(ModelConfig::new(4, false).unwrap(), 0).unwrap();
        let b = bytes_of(&m);
        let err = read_archive(&b[..b.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("upsample.bias"), "{err}");
        let err = read_archive(&b[..200]).unwrap_err();
        assert!(err.to_string().contains("head.weight"), "{err}");
    }

    #[test]
    fn rejects_bad_magic_version_and_trailing() {
        let m = Model::build(ModelConfig::new(4, false).unwrap(), 0).unwrap();
        let mut b = bytes_of(&m);
        b.push(0);
        assert!(read_archive(&b).is_err());
        b.pop();
        b[4] = 9;
        assert!(read_archive(&b).unwrap_err().to_string().contains("version"));
        b[0] = b'X';
        assert!(read_archive(&b).unwrap_err().to_string().contains("magic"));
    }

    #[test]
    fn rejects_wrong_config() {
        let m8 = Model::build(ModelConfig::new(8, false).unwrap(), 0).unwrap();
        let entries = read_archive(&bytes_of(&m8)).unwrap();
        let err = model_from_entries(ModelConfig::new(16, false).unwrap(), entries.clone()).unwrap_err();
        assert!(err.to_string().contains("shape mismatch"), "{err}");
        let err = model_from_entries(ModelConfig::new(8, true).unwrap(), entries.clone()).unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
        let m8n = Model::build(ModelConfig::new(8, true).unwrap(), 0).unwrap();
        let err = model_from_entries(*m8.config(), read_archive(&bytes_of(&m8n)).unwrap()).unwrap_err();
        assert!(err.to_string().contains("not a parameter"), "{err}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let e = ArchiveEntry { name: "a".into(), dims: vec![1], data: vec![0.0] };
        let mut b = Vec::new();
        write_archive(&mut b, &[e.clone(), e]).unwrap();
        assert!(read_archive(&b).unwrap_err().to_string().contains("duplicate"));
    }
}
