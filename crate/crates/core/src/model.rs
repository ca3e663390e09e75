//! Encoder and head trained jointly.

use alloc::string::String;
use alloc::vec::Vec;

use crate::encoder::{DocVector, EncoderParams};
use crate::error::{check_len, Error, Result};
use crate::grad::Gradients;
use crate::head::{HeadParams, LevelLogits};
use crate::loss::LossWeights;
use crate::taxonomy::LevelTargets;
use crate::tokenizer::TokenSequence;

/// What a model consumes for one page.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    /// Framed token ids for the built-in encoder.
    Tokens(TokenSequence),
    /// A document vector produced by an external encoder.
    Vector(DocVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    /// `None` when document vectors come from outside.
    pub encoder: Option<EncoderParams>,
    pub head: HeadParams,
}

impl Model {
    pub fn new(encoder: Option<EncoderParams>, head: HeadParams) -> Result<Self> {
        if let Some(enc) = &encoder {
            check_len("encoder hidden dim", head.hidden_dim, enc.hidden_dim)?;
        }
        head.validate()?;
        Ok(Model { encoder, head })
    }

    pub fn hidden(&self, input: &Input) -> Result<DocVector> {
        match (input, &self.encoder) {
            (Input::Tokens(tokens), Some(enc)) => enc.encode(tokens),
            (Input::Vector(v), None) => {
                check_len("document vector", self.head.hidden_dim, v.dim())?;
                Ok(v.clone())
            }
            (Input::Tokens(_), None) => {
                Err(Error::InvalidConfig("model has no encoder; supply document vectors".into()))
            }
            (Input::Vector(_), Some(_)) => {
                Err(Error::InvalidConfig("model has its own encoder; supply text".into()))
            }
        }
    }

    pub fn forward(&self, input: &Input) -> Result<LevelLogits> {
        self.head.forward(self.hidden(input)?.as_slice())
    }

    pub fn loss(&self, input: &Input, targets: &LevelTargets, weights: &LossWeights) -> Result<f64> {
        self.head.loss(&self.forward(input)?, targets, weights)
    }

    /// Per-example loss and gradients for every tensor in `tensor_names` order.
    pub fn gradients(&self, input: &Input, targets: &LevelTargets, weights: &LossWeights) -> Result<(f64, Gradients)> {
        let h = self.hidden(input)?;
        let head = self.head.backward(h.as_slice(), targets, weights)?;
        let mut tensors = Vec::with_capacity(self.tensor_count());
        if let (Some(enc), Input::Tokens(tokens)) = (&self.encoder, input) {
            let grads = enc.gradients(tokens, &head.d_hidden)?;
            tensors.extend(grads.into_tensors(enc.embed_dim));
        }
        tensors.extend(head.grads);
        Ok((head.loss, Gradients { tensors }))
    }

    pub fn tensor_count(&self) -> usize {
        2 * self.head.layers.len() + if self.encoder.is_some() { 3 } else { 0 }
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.tensor_count());
        if self.encoder.is_some() {
            names.extend(["encoder.embedding", "encoder.projection", "encoder.bias"].map(String::from));
        }
        let first_level = if self.head.layers.len() == 1 { 4 } else { 2 };
        for k in 0..self.head.layers.len() {
            names.push(alloc::format!("head.level{}.weight", first_level + k));
            names.push(alloc::format!("head.level{}.bias", first_level + k));
        }
        names
    }

    pub fn tensors(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::with_capacity(self.tensor_count());
        if let Some(enc) = &self.encoder {
            out.extend([&enc.embedding[..], &enc.projection[..], &enc.bias[..]]);
        }
        for layer in &self.head.layers {
            out.extend([&layer.weight[..], &layer.bias[..]]);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::with_capacity(self.tensor_count());
        if let Some(enc) = &mut self.encoder {
            out.push(&mut enc.embedding[..]);
            out.push(&mut enc.projection[..]);
            out.push(&mut enc.bias[..]);
        }
        for layer in &mut self.head.layers {
            out.push(&mut layer.weight[..]);
            out.push(&mut layer.bias[..]);
        }
        out
    }

    pub fn tensor_lens(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }
}
