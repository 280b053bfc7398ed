use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::Scalar;

/// L2-regularized logistic regression on standardized inputs, fitted by a
/// fixed number of full-batch gradient steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LogisticRegression<F> {
    mean: Array1<F>,
    scale: Array1<F>,
    weights: Array1<F>,
    bias: F,
}

const STEPS: usize = 500;
const STEP_SIZE: f64 = 0.5;
const L2: f64 = 1e-4;

impl<F: Scalar> LogisticRegression<F> {
    pub fn fit(x: ArrayView2<F>, y: &[u8]) -> Self {
        let (n, d) = x.dim();
        let nf = F::from_usize(n.max(1)).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(d));
        let scale = x
            .var_axis(Axis(0), F::zero())
            .mapv(|v| if v > F::zero() { v.sqrt() } else { F::one() });
        let z = (&x - &mean) / &scale;
        let target: Array1<F> = y.iter().map(|&v| F::from_u8(v).unwrap()).collect();
        let mut w = Array1::<F>::zeros(d);
        let mut b = F::zero();
        let step = F::from_f64(STEP_SIZE).unwrap();
        let l2 = F::from_f64(L2).unwrap();
        for _ in 0..STEPS {
            let p = (z.dot(&w) + b).mapv(|m| F::one() / (F::one() + (-m).exp()));
            let err = &p - &target;
            let gw = z.t().dot(&err) / nf + &w * l2;
            let gb = err.sum() / nf;
            w = w - gw * step;
            b = b - gb * step;
        }
        Self {
            mean,
            scale,
            weights: w,
            bias: b,
        }
    }

    pub fn predict_proba(&self, x: &Array2<F>) -> Vec<F> {
        let z = (x - &self.mean) / &self.scale;
        (z.dot(&self.weights) + self.bias)
            .mapv(|m| F::one() / (F::one() + (-m).exp()))
            .to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn learns_a_threshold() {
        let x = array![[0.0], [1.0], [2.0], [3.0], [4.0], [5.0]];
        let y = [0, 0, 0, 1, 1, 1];
        let m = LogisticRegression::fit(x.view(), &y);
        let p = m.predict_proba(&x);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert!(p[0] < 0.5 && p[5] > 0.5);
    }
}
