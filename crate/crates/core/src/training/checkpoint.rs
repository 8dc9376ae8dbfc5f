//! Binary checkpoint: encoder parameters plus the config that produced them.
//!
//! Layout, all integers `u32` and floats `f64`, little-endian:
//!
//! ```text
//! "HOF1"
//! encoder:  n, size[0..n], activation code
//! decoder:  n, size[0..n], activation code
//! phi:      count_params(encoder) floats
//! config:   byte length, UTF-8 key=value text
//! ```
//!
//! Anything short of or beyond this layout is a format error.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::funcnets::{count_params, Activation, EncoderNet, FlatParams, MlpSpec};

use super::config::TrainConfig;

const MAGIC: &[u8; 4] = b"HOF1";

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_spec(buf: &mut Vec<u8>, spec: &MlpSpec) -> Result<()> {
    put_u32(buf, spec.layer_sizes().len())?;
    for &s in spec.layer_sizes() {
        put_u32(buf, s)?;
    }
    put_u32(buf, spec.activation().code() as usize)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end =
            self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
                Error::Format(format!("truncated checkpoint while reading {what} at byte {}", self.pos))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn spec(&mut self, what: &str) -> Result<MlpSpec> {
        let n = self.u32(what)?;
        if !(2..=1 << 16).contains(&n) {
            return Err(Error::Format(format!("{what}: implausible layer count {n}")));
        }
        let sizes = (0..n).map(|_| self.u32(what)).collect::<Result<Vec<_>>>()?;
        let act = Activation::from_code(self.u32(what)? as u32).map_err(|e| Error::Format(e.to_string()))?;
        MlpSpec::new(sizes, act).map_err(|e| Error::Format(format!("{what}: {e}")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn checkpoint_to_bytes(enc: &EncoderNet, cfg: &TrainConfig) -> Result<Vec<u8>> {
    let phi = enc.phi().theta();
    let text = cfg.to_text();
    let mut buf = Vec::with_capacity(64 + phi.len() * 8 + text.len());
    buf.extend_from_slice(MAGIC);
    put_spec(&mut buf, enc.spec())?;
    put_spec(&mut buf, enc.decoder_spec())?;
    for v in phi {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_u32(&mut buf, text.len())?;
    buf.extend_from_slice(text.as_bytes());
    Ok(buf)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(EncoderNet, TrainConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected HOF1".into()));
    }
    let enc_spec = r.spec("encoder spec")?;
    let dec_spec = r.spec("decoder spec")?;
    let phi = r.f64s(count_params(&enc_spec), "encoder parameters")?;
    let len = r.u32("config length")?;
    let text = std::str::from_utf8(r.take(len, "config")?).map_err(|_| Error::Format("config is not UTF-8".into()))?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let cfg = TrainConfig::parse(text)?;
    if cfg.decoder != dec_spec {
        return Err(Error::Format("config decoder differs from stored decoder spec".into()));
    }
    let phi = FlatParams::new(enc_spec, phi).map_err(|e| Error::Format(e.to_string()))?;
    let enc = EncoderNet::from_parts(phi, dec_spec).map_err(|e| Error::Format(e.to_string()))?;
    Ok((enc, cfg))
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

pub fn save_checkpoint(path: &Path, enc: &EncoderNet, cfg: &TrainConfig) -> Result<()> {
    write_atomic(path, &checkpoint_to_bytes(enc, cfg)?)
}

pub fn load_checkpoint(path: &Path) -> Result<(EncoderNet, TrainConfig)> {
    checkpoint_from_bytes(&fs::read(path)?)
}
