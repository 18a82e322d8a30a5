use super::{ParamSet, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub amsgrad: bool,
}

impl OptimizerConfig {
    pub fn amsgrad(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            amsgrad: true,
        }
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self {
            amsgrad: false,
            weight_decay,
            ..Self::amsgrad(lr)
        }
    }
}

/// Adam with the AMSGrad running maximum of the second moment.
///
/// Weight decay is applied as an L2 term added to the gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct AmsGrad<S> {
    pub config: OptimizerConfig,
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
    pub v_max: Vec<Tensor<S>>,
}

impl<S: Scalar> AmsGrad<S> {
    pub fn new(config: OptimizerConfig, params: &ParamSet<S>) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::from_vec(t.shape().to_vec(), vec![S::zero(); t.len()]).unwrap())
                .collect::<Vec<_>>()
        };
        Self {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
            v_max: zeros(),
        }
    }

    pub fn update(&mut self, params: &mut ParamSet<S>, grads: &[Tensor<S>]) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let bc1 = S::one() - b1.powi(self.step as i32);
        let bc2_sqrt = (S::one() - b2.powi(self.step as i32)).sqrt();
        let step_size = S::lit(c.lr) / bc1;
        let (eps, wd) = (S::lit(c.eps), S::lit(c.weight_decay));
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = grads[i].data();
            let (m, v, vm) = (
                self.m[i].data_mut(),
                self.v[i].data_mut(),
                self.v_max[i].data_mut(),
            );
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                let gk = g[k] + wd * *w;
                m[k] = b1 * m[k] + (S::one() - b1) * gk;
                v[k] = b2 * v[k] + (S::one() - b2) * gk * gk;
                let second = if c.amsgrad {
                    if v[k] > vm[k] {
                        vm[k] = v[k];
                    }
                    vm[k]
                } else {
                    v[k]
                };
                let denom = second.sqrt() / bc2_sqrt + eps;
                *w -= step_size * m[k] / denom;
            }
        }
    }
}

/// Rescales gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<S: Scalar>(grads: &mut [Tensor<S>], max_norm: S) -> S {
    let total = grads.iter().map(Tensor::sum_sq).sum::<S>().sqrt();
    if total > max_norm {
        let k = max_norm / (total + S::lit(1e-6));
        for g in grads.iter_mut() {
            for x in g.data_mut() {
                *x *= k;
            }
        }
    }
    total
}
