use super::model::Parameters;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Some(Self::Adam),
            "sgd" => Some(Self::Sgd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Adam => "adam",
            Self::Sgd => "sgd",
        }
    }
}

/// Adam with bias correction; one moment buffer per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    step: i32,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(params: &Parameters<F>, lr: F, beta1: F, beta2: F, eps: F) -> Self {
        let zeros: Vec<Vec<F>> = params
            .tensors()
            .iter()
            .map(|t| vec![F::zero(); t.data.len()])
            .collect();
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut Parameters<F>, grads: &Parameters<F>) {
        self.step += 1;
        let bc1 = F::one() - self.beta1.powi(self.step);
        let bc2 = F::one() - self.beta2.powi(self.step);
        let one = F::one();
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Optimizer<F> {
    Adam(Adam<F>),
    Sgd { lr: F },
}

impl<F: Scalar> Optimizer<F> {
    pub fn step(&mut self, params: &mut Parameters<F>, grads: &Parameters<F>) {
        match self {
            Optimizer::Adam(adam) => adam.step(params, grads),
            Optimizer::Sgd { lr } => {
                for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
                    for (pi, &gi) in p.iter_mut().zip(g.data) {
                        *pi -= *lr * gi;
                    }
                }
            }
        }
    }
}
