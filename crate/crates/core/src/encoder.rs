//! Reference document encoder: hashed-subword embeddings, mean pooling,
//! then a tanh projection to the document vector `H`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngExt};

use crate::error::{check_len, Error, Result};
use crate::grad::TensorGrad;
use crate::tokenizer::TokenSequence;

pub const DEFAULT_VOCAB_SIZE: usize = 1 << 18;
pub const DEFAULT_EMBED_DIM: usize = 64;
pub const DEFAULT_HIDDEN_DIM: usize = 128;

/// Document vector produced by an encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DocVector(pub Vec<f64>);

impl DocVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    /// `vocab_size x embed_dim`, row-major.
    pub embedding: Vec<f32>,
    /// `embed_dim x hidden_dim`, row-major.
    pub projection: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub embedding: BTreeMap<u32, Vec<f64>>,
    pub projection: Vec<f64>,
    pub bias: Vec<f64>,
}

impl EncoderGrads {
    pub fn into_tensors(self, embed_dim: usize) -> [TensorGrad; 3] {
        [
            TensorGrad::Rows { row_len: embed_dim, rows: self.embedding },
            TensorGrad::Dense(self.projection),
            TensorGrad::Dense(self.bias),
        ]
    }
}

impl EncoderParams {
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden_dim: usize) -> Result<Self> {
        if vocab_size < 3 || embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "encoder dims must be positive (vocab {vocab_size}, embed {embed_dim}, hidden {hidden_dim})"
            )));
        }
        Ok(EncoderParams {
            vocab_size,
            embed_dim,
            hidden_dim,
            embedding: vec![0.0; vocab_size * embed_dim],
            projection: vec![0.0; embed_dim * hidden_dim],
            bias: vec![0.0; hidden_dim],
        })
    }

    /// Uniform embeddings in `[-0.5, 0.5]`, Glorot-uniform projection, zero bias.
    pub fn init<R: Rng + ?Sized>(
        vocab_size: usize,
        embed_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut params = Self::zeros(vocab_size, embed_dim, hidden_dim)?;
        params.embedding.iter_mut().for_each(|w| *w = rng.random_range(-0.5f32..0.5));
        let limit = libm::sqrtf(6.0 / (embed_dim + hidden_dim) as f32);
        params.projection.iter_mut().for_each(|w| *w = rng.random_range(-limit..limit));
        Ok(params)
    }

    fn check_tokens(&self, tokens: &TokenSequence) -> Result<()> {
        if !tokens.framed {
            return Err(Error::NotFramed);
        }
        match tokens.ids.iter().find(|&&id| id as usize >= self.vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size: self.vocab_size }),
            None => Ok(()),
        }
    }

    fn mean_embedding(&self, interior: &[u32]) -> Vec<f64> {
        let mut mean = vec![0.0; self.embed_dim];
        if interior.is_empty() {
            return mean;
        }
        for &id in interior {
            let row = &self.embedding[id as usize * self.embed_dim..][..self.embed_dim];
            mean.iter_mut().zip(row).for_each(|(m, &e)| *m += f64::from(e));
        }
        let inv = 1.0 / interior.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    fn project(&self, mean: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = self.bias.iter().map(|&b| f64::from(b)).collect();
        for (k, &m) in mean.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let row = &self.projection[k * self.hidden_dim..][..self.hidden_dim];
            u.iter_mut().zip(row).for_each(|(u, &p)| *u += m * f64::from(p));
        }
        u.into_iter().map(libm::tanh).collect()
    }

    pub fn encode(&self, tokens: &TokenSequence) -> Result<DocVector> {
        self.check_tokens(tokens)?;
        let mean = self.mean_embedding(tokens.interior());
        Ok(DocVector(self.project(&mean)))
    }

    /// Exact gradients of `encode` given `upstream = dL/dH`.
    pub fn gradients(&self, tokens: &TokenSequence, upstream: &[f64]) -> Result<EncoderGrads> {
        self.check_tokens(tokens)?;
        check_len("encoder upstream gradient", self.hidden_dim, upstream.len())?;
        let interior = tokens.interior();
        let mean = self.mean_embedding(interior);
        let h = self.project(&mean);

        let du: Vec<f64> = upstream.iter().zip(&h).map(|(g, h)| g * (1.0 - h * h)).collect();
        let mut projection = vec![0.0; self.embed_dim * self.hidden_dim];
        let mut d_mean = vec![0.0; self.embed_dim];
        for k in 0..self.embed_dim {
            let row = &self.projection[k * self.hidden_dim..][..self.hidden_dim];
            let grad_row = &mut projection[k * self.hidden_dim..][..self.hidden_dim];
            let mut acc = 0.0;
            for j in 0..self.hidden_dim {
                grad_row[j] = mean[k] * du[j];
                acc += f64::from(row[j]) * du[j];
            }
            d_mean[k] = acc;
        }

        let mut embedding: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        if !interior.is_empty() {
            let inv = 1.0 / interior.len() as f64;
            for &id in interior {
                let row = embedding.entry(id).or_insert_with(|| vec![0.0; self.embed_dim]);
                row.iter_mut().zip(&d_mean).for_each(|(r, d)| *r += d * inv);
            }
        }
        Ok(EncoderGrads { embedding, projection, bias: du })
    }
}
