//! Gradient-boosted decision trees for binary log-loss with second-order
//! (Newton) leaf values and exact greedy, level-wise split search.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub enum Node<F> {
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf(F),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Tree<F> {
    pub fn predict(&self, x: ArrayView1<F>) -> F {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GradientBoostedTrees<F> {
    pub params: BoostingParams,
    base_margin: F,
    trees: Vec<Tree<F>>,
    n_features: usize,
}

fn sigmoid<F: Scalar>(z: F) -> F {
    F::one() / (F::one() + (-z).exp())
}

#[derive(Clone, Copy)]
struct Candidate<F> {
    gain: F,
    feature: usize,
    threshold: F,
}

#[derive(Clone, Copy)]
struct ScanState<F> {
    g_left: F,
    h_left: F,
    last: Option<F>,
}

impl<F: Scalar> GradientBoostedTrees<F> {
    /// Fits on rows of `x` with binary targets `y` (0/1). Deterministic.
    pub fn fit(x: ArrayView2<F>, y: &[u8], params: BoostingParams) -> Self {
        let (n, d) = x.dim();
        assert_eq!(n, y.len(), "row count mismatch");
        let f = |v: f64| F::from_f64(v).unwrap();
        let prevalence = y.iter().map(|&v| v as f64).sum::<f64>() / n.max(1) as f64;
        let p0 = prevalence.clamp(1e-6, 1.0 - 1e-6);
        let base_margin = f((p0 / (1.0 - p0)).ln());

        let sorted: Vec<Vec<usize>> = (0..d)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| x[[a, j]].partial_cmp(&x[[b, j]]).unwrap().then(a.cmp(&b)));
                idx
            })
            .collect();

        let mut margin = vec![base_margin; n];
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut grad = vec![F::zero(); n];
        let mut hess = vec![F::zero(); n];
        for _ in 0..params.n_trees {
            for i in 0..n {
                let p = sigmoid(margin[i]);
                grad[i] = p - F::from_u8(y[i]).unwrap();
                hess[i] = (p * (F::one() - p)).max(f(1e-16));
            }
            let tree = build_tree(x, &sorted, &grad, &hess, &params);
            for i in 0..n {
                margin[i] = margin[i] + tree.predict(x.row(i));
            }
            trees.push(tree);
        }
        Self {
            params,
            base_margin,
            trees,
            n_features: d,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree<F>] {
        &self.trees
    }

    pub fn margin(&self, x: ArrayView1<F>) -> F {
        self.trees.iter().fold(self.base_margin, |m, t| m + t.predict(x))
    }

    /// P(y = 1) per row.
    pub fn predict_proba(&self, x: &Array2<F>) -> Vec<F> {
        x.rows().into_iter().map(|r| sigmoid(self.margin(r))).collect()
    }
}

fn build_tree<F: Scalar>(
    x: ArrayView2<F>,
    sorted: &[Vec<usize>],
    grad: &[F],
    hess: &[F],
    params: &BoostingParams,
) -> Tree<F> {
    let n = grad.len();
    let f = |v: f64| F::from_f64(v).unwrap();
    let lambda = f(params.lambda);
    let min_child = f(params.min_child_weight);
    let lr = f(params.learning_rate);
    let score = |g: F, h: F| g * g / (h + lambda);
    let leaf = |g: F, h: F| -g / (h + lambda) * lr;

    let mut nodes: Vec<Node<F>> = vec![Node::Leaf(F::zero())];
    // node assignment for each row; usize::MAX once a row sits in a finished leaf
    let mut assign = vec![0usize; n];
    let mut active: Vec<usize> = vec![0];

    for depth in 0..=params.max_depth {
        if active.is_empty() {
            break;
        }
        let slot = |node: usize| active.iter().position(|&a| a == node);
        let mut g_tot = vec![F::zero(); active.len()];
        let mut h_tot = vec![F::zero(); active.len()];
        for i in 0..n {
            if let Some(s) = (assign[i] != usize::MAX).then(|| slot(assign[i])).flatten() {
                g_tot[s] = g_tot[s] + grad[i];
                h_tot[s] = h_tot[s] + hess[i];
            }
        }
        if depth == params.max_depth {
            for (s, &node) in active.iter().enumerate() {
                nodes[node] = Node::Leaf(leaf(g_tot[s], h_tot[s]));
            }
            break;
        }

        let slot_of: Vec<Option<usize>> = assign
            .iter()
            .map(|&a| if a == usize::MAX { None } else { slot(a) })
            .collect();
        let mut best: Vec<Option<Candidate<F>>> = vec![None; active.len()];
        for (j, order) in sorted.iter().enumerate() {
            let mut state = vec![
                ScanState {
                    g_left: F::zero(),
                    h_left: F::zero(),
                    last: None,
                };
                active.len()
            ];
            for &i in order {
                let Some(s) = slot_of[i] else { continue };
                let v = x[[i, j]];
                let st = &mut state[s];
                if let Some(last) = st.last {
                    if v > last {
                        let h_right = h_tot[s] - st.h_left;
                        if st.h_left >= min_child && h_right >= min_child {
                            let g_right = g_tot[s] - st.g_left;
                            let gain = score(st.g_left, st.h_left) + score(g_right, h_right)
                                - score(g_tot[s], h_tot[s]);
                            if gain > F::zero() && best[s].is_none_or(|b| gain > b.gain) {
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: j,
                                    threshold: (last + v) / f(2.0),
                                });
                            }
                        }
                    }
                }
                st.g_left = st.g_left + grad[i];
                st.h_left = st.h_left + hess[i];
                st.last = Some(v);
            }
        }

        let mut next = Vec::new();
        let mut children = vec![None; active.len()];
        for (s, &node) in active.iter().enumerate() {
            match best[s] {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf(F::zero()));
                    nodes.push(Node::Leaf(F::zero()));
                    nodes[node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right: left + 1,
                    };
                    children[s] = Some((c.feature, c.threshold, left));
                    next.push(left);
                    next.push(left + 1);
                }
                None => nodes[node] = Node::Leaf(leaf(g_tot[s], h_tot[s])),
            }
        }
        for i in 0..n {
            if let Some(s) = slot_of[i] {
                assign[i] = match children[s] {
                    Some((feature, threshold, left)) => {
                        if x[[i, feature]] < threshold {
                            left
                        } else {
                            left + 1
                        }
                    }
                    None => usize::MAX,
                };
            }
        }
        active = next;
    }
    Tree { nodes }
}
