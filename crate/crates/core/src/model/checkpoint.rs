//! Binary checkpoint format.
//!
//! ```text
//! "LMSA"                      magic
//! u16                         format version
//! u32 + bytes                 config text, `key = value` lines sorted by key
//! u32                         parameter count
//! per parameter:
//!   u32 + bytes               name
//!   u32                       rank
//!   u64 x rank                dims
//!   f64 x prod(dims)          values
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

use super::{Model, ModelConfig};

pub const MAGIC: &[u8; 4] = b"LMSA";
pub const VERSION: u16 = 1;

/// Canonical `key = value` text for a sorted map.
pub fn config_text(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// A decoded checkpoint: the config block and the parameters in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: BTreeMap<String, String>,
    pub params: ParamStore,
}

impl Checkpoint {
    pub fn from_model(model: &Model, extra: &BTreeMap<String, String>) -> Self {
        let mut config = extra.clone();
        config.extend(model.config.to_map());
        Checkpoint {
            config,
            params: model.store.clone(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        let cfg = ModelConfig::from_map(&self.config)?;
        Model::with_store(cfg, self.params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let text = config_text(&self.config);
        out.extend_from_slice(&(text.len() as u32).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in self.params.iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for &d in &p.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &p.value {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = u16::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {version}")));
        }
        let text_len = r.u32()? as usize;
        let text = std::str::from_utf8(r.take(text_len)?)
            .map_err(|_| Error::Checkpoint("config block is not UTF-8".into()))?;
        let config = parse_config_text(text)?;
        let count = r.u32()?;
        let mut params = ParamStore::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let value = (0..numel)
                .map(|_| r.array().map(f64::from_le_bytes))
                .collect::<Result<Vec<_>>>()?;
            params.add(&name, shape, value)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after last parameter",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint { config, params })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Checkpoint::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        Model::new(ModelConfig {
            lookback: 8,
            horizon: 2,
            channels: 2,
            scales: 2,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn bytes_roundtrip_exactly() {
        let m = model();
        let mut extra = BTreeMap::new();
        extra.insert("epochs".to_string(), "3".to_string());
        let ck = Checkpoint::from_model(&m, &extra);
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"LMSA");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
        let restored = back.into_model().unwrap();
        assert_eq!(restored.store, m.store);
    }

    #[test]
    fn config_block_is_key_sorted() {
        let ck = Checkpoint::from_model(&model(), &BTreeMap::new());
        let text = config_text(&ck.config);
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = Checkpoint::from_model(&model(), &BTreeMap::new()).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
        let mut ver = bytes;
        ver[4] = 9;
        assert!(Checkpoint::from_bytes(&ver).is_err());
    }

    #[test]
    fn parse_config_text_errors_on_missing_equals() {
        assert!(parse_config_text("a = 1\n# c\n\nb=2").unwrap().len() == 2);
        assert!(parse_config_text("oops").is_err());
    }
}
