use super::{Mlp, ParamGrads, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient had a NaN or infinite entry; nothing was changed.
    SkippedNonFinite,
}

/// Bias-corrected Adam state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: ParamGrads<T>,
    v: ParamGrads<T>,
    step: u64,
    skipped: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, config: AdamConfig) -> Self {
        Adam {
            config,
            m: ParamGrads::zeros_like(net),
            v: ParamGrads::zeros_like(net),
            step: 0,
            skipped: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn first_moment(&self) -> &ParamGrads<T> {
        &self.m
    }

    pub fn second_moment(&self) -> &ParamGrads<T> {
        &self.v
    }

    pub fn step(&mut self, params: &mut Mlp<T>, grads: &ParamGrads<T>) -> StepOutcome {
        if !grads.is_finite() {
            self.skipped += 1;
            return StepOutcome::SkippedNonFinite;
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let b1 = T::from(c.beta1).unwrap();
        let b2 = T::from(c.beta2).unwrap();
        let one = T::one();
        let eps = T::from(c.eps).unwrap();
        // fold both bias corrections into the step size
        let lr_t = T::from(c.lr * (1.0 - c.beta2.powi(t)).sqrt() / (1.0 - c.beta1.powi(t)))
            .unwrap();
        let eps_t = eps * T::from((1.0 - c.beta2.powi(t)).sqrt()).unwrap();
        let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            *p = *p - lr_t * *m / (v.sqrt() + eps_t);
        };
        for (i, layer) in params.layers_mut().iter_mut().enumerate() {
            ndarray::Zip::from(&mut layer.weight)
                .and(&grads.weights[i])
                .and(&mut self.m.weights[i])
                .and(&mut self.v.weights[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&grads.biases[i])
                .and(&mut self.m.biases[i])
                .and(&mut self.v.biases[i])
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        StepOutcome::Applied
    }
}
