use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// A named trainable tensor with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { name: name.into(), shape, value: vec![0.0; len], grad: vec![0.0; len] }
    }

    /// Kaiming-normal initialization, `std = gain * sqrt(2 / fan_in)`.
    pub fn kaiming<R: Rng + ?Sized>(
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        gain: f32,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(name, shape);
        let std = gain * (2.0 / fan_in as f32).sqrt();
        for v in &mut p.value {
            let z: f32 = StandardNormal.sample(rng);
            *v = z * std;
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Anything that owns parameters. Both accessors must list parameters in
/// the same, stable order.
pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
