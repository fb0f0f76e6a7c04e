//! Binary checkpoint layout: 8 magic bytes, a little-endian u32 version, a
//! little-endian u64 manifest length, the UTF-8 manifest, then raw
//! little-endian f64 payloads at the offsets the manifest lists.
//!
//! Manifest lines are `key=value` settings, `epoch=`, `history=` (comma
//! separated validation HR@10 values) and one `tensor` line per payload:
//! `tensor\t<name>\t<kind>\t<shape>\t<offset>\t<len>\t<step>`, with kind one
//! of `value`, `adam_m`, `adam_v`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::kv::{parse_kv, KvConfig};
use crate::error::{Error, Result};
use crate::model::Maint;
use crate::numerics::{ParamStore, Parameter, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"MAINTCK\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: KvConfig,
    pub params: ParamStore,
    pub epoch: usize,
    pub validation_history: Vec<f64>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Maint> {
        Maint::from_params(self.config.model.clone(), self.params.clone())
    }
}

fn shape_text(shape: &[usize]) -> String {
    shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x")
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut manifest = ck.config.to_text();
    let _ = writeln!(manifest, "epoch={}", ck.epoch);
    let hist: Vec<String> = ck.validation_history.iter().map(|h| h.to_string()).collect();
    let _ = writeln!(manifest, "history={}", hist.join(","));
    let mut payload: Vec<u8> = Vec::new();
    for p in ck.params.iter() {
        for (kind, t) in [("value", &p.value), ("adam_m", &p.adam_m), ("adam_v", &p.adam_v)] {
            let offset = payload.len();
            for x in t.data() {
                payload.extend_from_slice(&x.to_le_bytes());
            }
            let _ = writeln!(
                manifest,
                "tensor\t{}\t{kind}\t{}\t{offset}\t{}\t{}",
                p.name,
                shape_text(t.shape()),
                t.len(),
                p.step
            );
        }
    }
    let mut out = Vec::with_capacity(20 + manifest.len() + payload.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest.as_bytes());
    out.extend_from_slice(&payload);
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Data(format!("checkpoint: {}", msg.into()))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 20 {
        return Err(bad("file too short for a header"));
    }
    if bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let mlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let body = &bytes[20..];
    if body.len() < mlen {
        return Err(bad("truncated manifest"));
    }
    let manifest = core::str::from_utf8(&body[..mlen]).map_err(|_| bad("manifest is not UTF-8"))?;
    let payload = &body[mlen..];

    let mut settings = String::new();
    let mut epoch = 0;
    let mut history = Vec::new();
    let mut params = ParamStore::new();
    for line in manifest.lines() {
        if let Some(rest) = line.strip_prefix("tensor\t") {
            let f: Vec<&str> = rest.split('\t').collect();
            if f.len() != 6 {
                return Err(bad(format!("malformed tensor line {line:?}")));
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad number {s:?}")));
            let shape = f[2].split('x').map(parse).collect::<Result<Vec<_>>>()?;
            let (offset, len) = (parse(f[3])?, parse(f[4])?);
            let step: u64 = f[5].parse().map_err(|_| bad("bad step count"))?;
            let end = offset
                .checked_add(len * 8)
                .filter(|&e| e <= payload.len())
                .ok_or_else(|| bad(format!("payload of {} truncated", f[0])))?;
            let data = payload[offset..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let t = Tensor::from_vec(&shape, data)?;
            match f[1] {
                "value" => {
                    let mut p = Parameter::new(f[0], t);
                    p.step = step;
                    params.push(p);
                }
                kind @ ("adam_m" | "adam_v") => {
                    let id = params
                        .find(f[0])
                        .ok_or_else(|| bad(format!("{kind} for unknown tensor {}", f[0])))?;
                    let p = params.get_mut(id);
                    if p.value.shape() != t.shape() {
                        return Err(bad(format!("{kind} shape mismatch for {}", f[0])));
                    }
                    if kind == "adam_m" {
                        p.adam_m = t;
                    } else {
                        p.adam_v = t;
                    }
                }
                other => return Err(bad(format!("unknown tensor kind {other:?}"))),
            }
        } else if let Some(v) = line.strip_prefix("epoch=") {
            epoch = v.parse().map_err(|_| bad("bad epoch"))?;
        } else if let Some(v) = line.strip_prefix("history=") {
            history = v
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad history value")))
                .collect::<Result<_>>()?;
        } else {
            settings.push_str(line);
            settings.push('\n');
        }
    }
    let mut config = KvConfig::default();
    config.apply(&parse_kv(&settings)?)?;
    Ok(Checkpoint {
        config,
        params,
        epoch,
        validation_history: history,
    })
}
