use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

/// Gradient of one parameter tensor. Embedding tables only receive
/// gradient on the rows a document touched, so they are kept sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorGrad {
    Dense(Vec<f64>),
    Rows { row_len: usize, rows: BTreeMap<u32, Vec<f64>> },
}

impl TensorGrad {
    pub fn rows(row_len: usize) -> Self {
        TensorGrad::Rows { row_len, rows: BTreeMap::new() }
    }

    /// Elementwise `self += other`. Both sides must have the same layout.
    pub fn add_assign(&mut self, other: &TensorGrad) {
        match (self, other) {
            (TensorGrad::Dense(a), TensorGrad::Dense(b)) => {
                assert_eq!(a.len(), b.len(), "dense gradient length");
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
            (TensorGrad::Rows { row_len, rows }, TensorGrad::Rows { rows: other, .. }) => {
                for (&r, g) in other {
                    let row = rows.entry(r).or_insert_with(|| vec![0.0; *row_len]);
                    row.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            _ => panic!("mixed dense/sparse gradient accumulation"),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        match self {
            TensorGrad::Dense(a) => a.iter_mut().for_each(|x| *x *= factor),
            TensorGrad::Rows { rows, .. } => {
                rows.values_mut().flat_map(|r| r.iter_mut()).for_each(|x| *x *= factor)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            TensorGrad::Dense(a) => a.iter().all(|x| x.is_finite()),
            TensorGrad::Rows { rows, .. } => rows.values().flatten().all(|x| x.is_finite()),
        }
    }

    /// Entry at a flat row-major index.
    pub fn get(&self, index: usize) -> f64 {
        match self {
            TensorGrad::Dense(a) => a[index],
            TensorGrad::Rows { row_len, rows } => rows
                .get(&((index / row_len) as u32))
                .map_or(0.0, |r| r[index % row_len]),
        }
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        match self {
            TensorGrad::Dense(a) => a.clone(),
            TensorGrad::Rows { row_len, rows } => {
                let mut out = vec![0.0; len];
                for (&r, g) in rows {
                    let start = r as usize * row_len;
                    out[start..start + row_len].copy_from_slice(g);
                }
                out
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        let fold = |m: f64, x: &f64| m.max(x.abs());
        match self {
            TensorGrad::Dense(a) => a.iter().fold(0.0, fold),
            TensorGrad::Rows { rows, .. } => rows.values().flatten().fold(0.0, fold),
        }
    }
}

/// Gradients for every tensor of a model, in the model's tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<TensorGrad>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.tensors.len(), other.tensors.len(), "gradient tensor count");
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(factor));
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().map(TensorGrad::max_abs).fold(0.0, f64::max)
    }
}
