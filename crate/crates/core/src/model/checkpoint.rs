use std::fs;
use std::path::Path;

use super::{Model, ModelConfig};
use crate::data::npcd::Reader;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PNXC";
const VERSION: u32 = 1;

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, v: &[f32]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn get_str(r: &mut Reader, what: &str) -> Result<String> {
    let at = r.pos;
    let n = r.u32(what)? as usize;
    String::from_utf8(r.take(n, what)?.to_vec()).map_err(|_| Error::format(at as u64, format!("{what} is not UTF-8")))
}

impl Model {
    /// Checkpoint container: magic `PNXC`, version, the JSON model config, every
    /// parameter tensor by name and shape, then every normalization buffer by name.
    /// All integers and floats are little-endian.
    pub fn to_checkpoint(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut out, &serde_json::to_string(&self.config)?);
        out.extend_from_slice(&(self.store.len() as u32).to_le_bytes());
        for p in self.store.params() {
            put_str(&mut out, &p.name);
            out.extend_from_slice(&(p.tensor.shape().len() as u32).to_le_bytes());
            for &d in p.tensor.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            put_f32s(&mut out, p.tensor.data());
        }
        out.extend_from_slice(&(self.store.norms().len() as u32).to_le_bytes());
        for n in self.store.norms() {
            put_str(&mut out, &n.name);
            out.extend_from_slice(&(n.mean.len() as u32).to_le_bytes());
            put_f32s(&mut out, &n.mean);
            put_f32s(&mut out, &n.var);
        }
        Ok(out)
    }

    /// Rebuilds the network from the stored config and loads every named tensor into it.
    pub fn from_checkpoint(buf: &[u8]) -> Result<Model> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::format(0, "bad magic, expected PNXC"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
        }
        let at = r.pos as u64;
        let config: ModelConfig =
            serde_json::from_str(&get_str(&mut r, "config")?).map_err(|e| Error::format(at, format!("bad config: {e}")))?;
        let mut model = Model::build(config)?;
        let count = r.u32("parameter count")? as usize;
        if count != model.store.len() {
            return Err(Error::format(r.pos as u64 - 4, format!("{count} tensors stored, the config builds {}", model.store.len())));
        }
        for _ in 0..count {
            let at = r.pos as u64;
            let name = get_str(&mut r, "tensor name")?;
            let id = model.store.find(&name).ok_or_else(|| Error::format(at, format!("unknown tensor `{name}`")))?;
            let ndim = r.u32("rank")? as usize;
            let shape = (0..ndim).map(|_| r.u32("dimension").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let t = model.store.tensor_mut(id);
            if shape != t.shape() {
                return Err(Error::format(at, format!("tensor `{name}` has shape {shape:?}, expected {:?}", t.shape())));
            }
            let data = r.f32s(t.len(), "tensor data")?;
            t.data_mut().copy_from_slice(&data);
        }
        let norms = r.u32("normalization count")? as usize;
        if norms != model.store.norms().len() {
            return Err(Error::format(r.pos as u64 - 4, format!("{norms} normalization buffers stored, expected {}", model.store.norms().len())));
        }
        for _ in 0..norms {
            let at = r.pos as u64;
            let name = get_str(&mut r, "buffer name")?;
            let c = r.u32("channels")? as usize;
            let slot = model.store.norms_mut().iter_mut().find(|n| n.name == name).ok_or_else(|| Error::format(at, format!("unknown buffer `{name}`")))?;
            if c != slot.mean.len() {
                return Err(Error::format(at, format!("buffer `{name}` has {c} channels, expected {}", slot.mean.len())));
            }
            slot.mean = r.f32s(c, "running mean")?;
            slot.var = r.f32s(c, "running variance")?;
        }
        if r.pos != buf.len() {
            return Err(Error::format(r.pos as u64, "trailing bytes after checkpoint"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_checkpoint()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_checkpoint(&fs::read(path)?)
    }
}
