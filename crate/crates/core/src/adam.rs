//! Adam with bias correction over a list of `f32` tensors.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::grad::{Gradients, TensorGrad};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Vec<f32>>,
    pub second: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, tensor_lens: &[usize]) -> Self {
        AdamState {
            config,
            step: 0,
            first: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One update. Every gradient is checked for finiteness before any
    /// parameter is touched.
    pub fn step(&mut self, params: &mut [&mut [f32]], names: &[String], grads: &Gradients) -> Result<()> {
        check_len("optimizer tensors", self.first.len(), params.len())?;
        check_len("gradient tensors", params.len(), grads.tensors.len())?;
        for (i, (p, g)) in params.iter().zip(&grads.tensors).enumerate() {
            check_len(&names[i], self.first[i].len(), p.len())?;
            if let TensorGrad::Dense(d) = g {
                check_len(&names[i], p.len(), d.len())?;
            }
            if !g.is_finite() {
                return Err(Error::NonFinite { tensor: names[i].clone() });
            }
        }

        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let bias1 = 1.0 - libm::pow(beta1, t);
        let bias2 = 1.0 - libm::pow(beta2, t);
        let update = |p: &mut f32, m: &mut f32, v: &mut f32, g: f64| {
            let m_new = beta1 * f64::from(*m) + (1.0 - beta1) * g;
            let v_new = beta2 * f64::from(*v) + (1.0 - beta2) * g * g;
            *m = m_new as f32;
            *v = v_new as f32;
            let m_hat = m_new / bias1;
            let v_hat = v_new / bias2;
            *p = (f64::from(*p) - learning_rate * m_hat / (libm::sqrt(v_hat) + eps)) as f32;
        };

        for (i, p) in params.iter_mut().enumerate() {
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            match &grads.tensors[i] {
                TensorGrad::Dense(g) => {
                    for j in 0..p.len() {
                        update(&mut p[j], &mut m[j], &mut v[j], g[j]);
                    }
                }
                TensorGrad::Rows { row_len, rows } => {
                    let mut pending = rows.iter().peekable();
                    for (r, prow) in p.chunks_mut(*row_len).enumerate() {
                        let start = r * row_len;
                        let g = pending.next_if(|(&k, _)| k as usize == r).map(|(_, g)| g);
                        for (j, pj) in prow.iter_mut().enumerate() {
                            let gj = g.map_or(0.0, |g| g[j]);
                            update(pj, &mut m[start + j], &mut v[start + j], gj);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("t{i}")).collect()
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = [1.0f32, -2.0, 0.5];
        let mut state = AdamState::new(AdamConfig { learning_rate: 0.01, ..Default::default() }, &[3]);
        let g = Gradients { tensors: vec![TensorGrad::Dense(vec![3.0, -0.5, 100.0])] };
        state.step(&mut [&mut p[..]], &names(1), &g).unwrap();
        let expected = [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01];
        for (a, b) in p.iter().zip(expected) {
            assert!((f64::from(*a) - b).abs() < 1e-6, "{a} vs {b}");
        }
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0f32, -2.0];
        let before = p.clone();
        let mut state = AdamState::new(AdamConfig::default(), &[2]);
        let g = Gradients { tensors: vec![TensorGrad::Dense(vec![0.0, 0.0])] };
        state.step(&mut [&mut p[..]], &names(1), &g).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut a = [1.0f32];
        let mut b = [1.0f32];
        let mut state = AdamState::new(AdamConfig::default(), &[1, 1]);
        let g = Gradients {
            tensors: vec![TensorGrad::Dense(vec![1.0]), TensorGrad::Dense(vec![f64::NAN])],
        };
        let names = ["head.level2.weight".to_string(), "head.level2.bias".to_string()];
        let err = state.step(&mut [&mut a[..], &mut b[..]], &names, &g).unwrap_err();
        assert_eq!(err, Error::NonFinite { tensor: "head.level2.bias".into() });
        assert_eq!((a[0], b[0], state.step), (1.0, 1.0, 0));
    }

    #[test]
    fn sparse_rows_match_dense() {
        let init = vec![0.1f32, 0.2, 0.3, 0.4, 0.5, 0.6];
        let mut dense_p = init.clone();
        let mut sparse_p = init.clone();
        let mut sd = AdamState::new(AdamConfig::default(), &[6]);
        let mut ss = sd.clone();
        let mut rows = BTreeMap::new();
        rows.insert(1u32, vec![0.5, -1.5]);
        let sparse = Gradients { tensors: vec![TensorGrad::Rows { row_len: 2, rows }] };
        let dense = Gradients { tensors: vec![TensorGrad::Dense(vec![0.0, 0.0, 0.5, -1.5, 0.0, 0.0])] };
        for _ in 0..3 {
            sd.step(&mut [&mut dense_p[..]], &names(1), &dense).unwrap();
            ss.step(&mut [&mut sparse_p[..]], &names(1), &sparse).unwrap();
        }
        assert_eq!(dense_p, sparse_p);
        assert_eq!(sd, ss);
    }

    #[test]
    fn two_step_golden_trace() {
        // Expected values come from an independent float64 evaluation of the
        // Adam recurrence with float32 storage of parameters and moments.
        let mut p = [0.5f32, -1.0];
        let mut state = AdamState::new(AdamConfig { learning_rate: 0.01, ..Default::default() }, &[2]);
        let g1 = Gradients { tensors: vec![TensorGrad::Dense(vec![0.1, -0.2])] };
        let g2 = Gradients { tensors: vec![TensorGrad::Dense(vec![0.3, 0.05])] };
        state.step(&mut [&mut p[..]], &names(1), &g1).unwrap();
        state.step(&mut [&mut p[..]], &names(1), &g2).unwrap();
        for (a, b) in p.iter().zip(GOLDEN_P) {
            assert!((f64::from(*a) - b).abs() < 1e-7, "{a} vs {b}");
        }
        for (a, b) in state.first[0].iter().zip(GOLDEN_M) {
            assert!((f64::from(*a) - b).abs() < 1e-9, "{a} vs {b}");
        }
        for (a, b) in state.second[0].iter().zip(GOLDEN_V) {
            assert!((f64::from(*a) - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    const GOLDEN_P: [f64; 2] = [0.48082220554351807, -0.9853053092956543];
    const GOLDEN_M: [f64; 2] = [0.039000000804662704, -0.012999999336898327];
    const GOLDEN_V: [f64; 2] = [9.999000030802563e-05, 4.246000025887042e-05];
}
