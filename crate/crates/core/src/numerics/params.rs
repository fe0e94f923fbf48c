use std::collections::BTreeMap;

use rand::Rng;

use super::{NumericsError, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A learnable tensor together with its accumulated gradient.
#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Ordered collection of named parameters. Insertion order is the iteration
/// order everywhere (optimizer, checkpoints, gradient checks).
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name {name}"
        );
        let id = ParamId(self.params.len());
        let grad = Tensor::new(value.shape().to_vec(), vec![0.0; value.len()])
            .expect("shape of an existing tensor is valid");
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, grad });
        id
    }

    /// Glorot-uniform matrix in ±√(6/(fan_in+fan_out)).
    pub fn insert_glorot(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let value = Tensor::matrix(fan_in, fan_out, data).expect("positive fan sizes");
        self.insert(name, value)
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.insert(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar weights.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Adds `grads` into the stored gradients.
    pub fn accumulate(&mut self, grads: &[(ParamId, Tensor)]) -> Result<(), NumericsError> {
        for (id, g) in grads {
            let p = &mut self.params[id.0];
            if p.grad.shape() != g.shape() {
                return Err(NumericsError::Shape {
                    op: "accumulate",
                    left: p.grad.shape().to_vec(),
                    right: g.shape().to_vec(),
                });
            }
            p.grad.add_assign(g);
        }
        Ok(())
    }

    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            p.grad.scale_assign(factor);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.squared_norm())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale_grads(max_norm / norm);
        }
        norm
    }

    /// Rounds every value to single precision, matching what a checkpoint
    /// stores on disk.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            for v in p.value.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn glorot_bound_respected() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let id = store.insert_glorot("w", 10, 14, &mut rng);
        let bound = (6.0f64 / 24.0).sqrt();
        assert!(store.value(id).data().iter().all(|v| v.abs() <= bound));
        assert_eq!(store.get(id).grad.shape(), &[10, 14]);
    }

    #[test]
    fn clip_scales_to_max_norm() {
        let mut store = ParamStore::new();
        let id = store.insert_zeros("w", 1, 2);
        store.get_mut(id).grad = Tensor::row_vector(vec![30.0, 40.0]);
        let before = store.clip_grad_norm(5.0);
        assert_eq!(before, 50.0);
        assert!((store.grad_norm() - 5.0).abs() < 1e-12);
        assert_eq!(store.get(id).grad.data(), &[3.0, 4.0]);
    }
}
