//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! "HMCN"  u32 version  u64 taxonomy hash
//! u32 flags           bit0 encoder, bit1 optimizer, bit2 flat head, bit3 sigmoid feedback
//! u32 hidden_dim  u32 d2  u32 d3  u32 d4
//! [u32 vocab_size  u32 embed_dim]                      if encoder
//! u32 metadata length, metadata UTF-8 bytes
//! f32 tensors, row-major, in model tensor order
//! [u64 step  f64 lr  f64 beta1  f64 beta2  f64 eps
//!  f32 first moments, f32 second moments]              if optimizer
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::adam::{AdamConfig, AdamState};
use crate::encoder::EncoderParams;
use crate::error::{CheckpointError, Error, Result};
use crate::head::{Feedback, HeadArch, HeadParams};
use crate::model::Model;

pub const MAGIC: &[u8; 4] = b"HMCN";
pub const FORMAT_VERSION: u32 = 1;

const FLAG_ENCODER: u32 = 1;
const FLAG_OPTIMIZER: u32 = 1 << 1;
const FLAG_FLAT: u32 = 1 << 2;
const FLAG_SIGMOID: u32 = 1 << 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub taxonomy_hash: u64,
    pub model: Model,
    pub optimizer: Option<AdamState>,
    pub metadata: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let model = &self.model;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.taxonomy_hash.to_le_bytes());
        let mut flags = 0;
        if model.encoder.is_some() {
            flags |= FLAG_ENCODER;
        }
        if self.optimizer.is_some() {
            flags |= FLAG_OPTIMIZER;
        }
        if model.head.arch == HeadArch::Flat {
            flags |= FLAG_FLAT;
        }
        if model.head.feedback == Feedback::Sigmoid {
            flags |= FLAG_SIGMOID;
        }
        let put_u32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
        put_u32(&mut out, flags as usize);
        put_u32(&mut out, model.head.hidden_dim);
        for d in model.head.dims() {
            put_u32(&mut out, d);
        }
        if let Some(enc) = &model.encoder {
            put_u32(&mut out, enc.vocab_size);
            put_u32(&mut out, enc.embed_dim);
        }
        put_u32(&mut out, self.metadata.len());
        out.extend_from_slice(self.metadata.as_bytes());
        let put_tensors = |out: &mut Vec<u8>, tensors: &[&[f32]]| {
            for t in tensors {
                out.reserve(t.len() * 4);
                for v in t.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        };
        put_tensors(&mut out, &model.tensors());
        if let Some(opt) = &self.optimizer {
            out.extend_from_slice(&opt.step.to_le_bytes());
            let c = opt.config;
            for v in [c.learning_rate, c.beta1, c.beta2, c.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let first: Vec<&[f32]> = opt.first.iter().map(Vec::as_slice).collect();
            let second: Vec<&[f32]> = opt.second.iter().map(Vec::as_slice).collect();
            put_tensors(&mut out, &first);
            put_tensors(&mut out, &second);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
            return Err(CheckpointError::BadMagic.into());
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version).into());
        }
        let taxonomy_hash = r.u64()?;
        let flags = r.u32()?;
        if flags & !(FLAG_ENCODER | FLAG_OPTIMIZER | FLAG_FLAT | FLAG_SIGMOID) != 0 {
            return Err(CheckpointError::Malformed("flags").into());
        }
        let hidden_dim = r.dim()?;
        let dims = [r.dim()?, r.dim()?, r.dim()?];
        let arch = if flags & FLAG_FLAT != 0 { HeadArch::Flat } else { HeadArch::Hierarchical };
        let feedback = if flags & FLAG_SIGMOID != 0 { Feedback::Sigmoid } else { Feedback::Logits };
        let encoder = if flags & FLAG_ENCODER != 0 {
            let vocab = r.dim()?;
            let embed = r.dim()?;
            Some(EncoderParams::zeros(vocab, embed, hidden_dim).map_err(|_| CheckpointError::Malformed("encoder dims"))?)
        } else {
            None
        };
        let meta_len = r.dim()?;
        let metadata = String::from_utf8(r.take(meta_len)?.to_vec())
            .map_err(|_| CheckpointError::Malformed("metadata"))?;

        let head = HeadParams::zeros(arch, feedback, hidden_dim, dims);
        let mut model = Model::new(encoder, head).map_err(|_| CheckpointError::Malformed("dims"))?;
        for t in model.tensors_mut() {
            r.f32s(t)?;
        }
        let optimizer = if flags & FLAG_OPTIMIZER != 0 {
            let step = r.u64()?;
            let config = AdamConfig { learning_rate: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
            let mut state = AdamState::new(config, &model.tensor_lens());
            state.step = step;
            for t in state.first.iter_mut().chain(state.second.iter_mut()) {
                r.f32s(t)?;
            }
            Some(state)
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(CheckpointError::Malformed("trailing bytes").into());
        }
        Ok(Checkpoint { taxonomy_hash, model, optimizer, metadata })
    }

    /// Decodes and refuses checkpoints trained against another taxonomy.
    pub fn from_bytes_for(bytes: &[u8], taxonomy_hash: u64) -> Result<Self> {
        let ckpt = Self::from_bytes(bytes)?;
        ckpt.check_taxonomy(taxonomy_hash)?;
        Ok(ckpt)
    }

    pub fn check_taxonomy(&self, taxonomy_hash: u64) -> Result<()> {
        if self.taxonomy_hash == taxonomy_hash {
            Ok(())
        } else {
            Err(Error::Checkpoint(CheckpointError::TaxonomyMismatch {
                expected: taxonomy_hash,
                found: self.taxonomy_hash,
            }))
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> core::result::Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let slice = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> core::result::Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn dim(&mut self) -> core::result::Result<usize, CheckpointError> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> core::result::Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> core::result::Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32s(&mut self, out: &mut [f32]) -> core::result::Result<(), CheckpointError> {
        let raw = self.take(out.len() * 4)?;
        for (v, chunk) in out.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(())
    }
}
