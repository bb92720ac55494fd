//! Network definition: shape, rescaled leaky-ReLU activation, weight
//! initialization, and forward evaluation with full hidden-state capture.
//!
//! The network is `x -> A x -> [W_l, activation]^L -> B h_L` with `A` and
//! `B` frozen and only the square hidden matrices `W_l` trainable. The
//! activation divides the usual leaky ReLU by `sqrt(1 + alpha^2)`, which
//! together with `N(0, 2/m)` hidden-weight initialization keeps the second
//! moment of hidden signals independent of `alpha`.

use crate::linalg::{Matrix, RngState};

/// Layer dimensions of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub input_dim: usize,
    pub width: usize,
    pub depth: usize,
    pub output_dim: usize,
}

impl NetworkShape {
    pub fn new(input_dim: usize, width: usize, depth: usize, output_dim: usize) -> Self {
        assert!(
            input_dim >= 1 && width >= 1 && depth >= 1 && output_dim >= 1,
            "all shape fields must be at least 1"
        );
        NetworkShape {
            input_dim,
            width,
            depth,
            output_dim,
        }
    }
}

/// Rescaled leaky ReLU with slope parameter `alpha`.
///
/// The theory assumes `alpha < 1`; the type accepts any finite value so
/// that e.g. `alpha = 1` (an exactly linear network) can serve as a test
/// oracle. Ties at zero take the nonnegative branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub alpha: f64,
}

impl Activation {
    pub fn new(alpha: f64) -> Self {
        assert!(alpha.is_finite(), "alpha must be finite");
        Activation { alpha }
    }

    /// `1 / sqrt(1 + alpha^2)`, the rescaling factor.
    #[inline]
    pub fn scale(&self) -> f64 {
        1.0 / (1.0 + self.alpha * self.alpha).sqrt()
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x >= 0.0 {
            x * self.scale()
        } else {
            self.alpha * x * self.scale()
        }
    }

    /// Derivative: `1/sqrt(1+alpha^2)` on `x >= 0`, `alpha/sqrt(1+alpha^2)`
    /// on `x < 0`.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.scale()
        } else {
            self.alpha * self.scale()
        }
    }

    fn apply_matrix(&self, g: &Matrix) -> Matrix {
        let data = g.data().iter().map(|&v| self.apply(v)).collect();
        Matrix::from_vec(g.rows(), g.cols(), data)
    }
}

/// Free function form of the activation, convenient for tests.
pub fn activation_apply(alpha: f64, x: f64) -> f64 {
    Activation::new(alpha).apply(x)
}

/// The weight collection: frozen input map `A` (m x p), trainable hidden
/// layers `W_1..W_L` (m x m each), frozen output map `B` (d x m).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub input_map: Matrix,
    pub hidden: Vec<Matrix>,
    pub output_map: Matrix,
}

impl Params {
    pub fn shape(&self) -> NetworkShape {
        NetworkShape {
            input_dim: self.input_map.cols(),
            width: self.input_map.rows(),
            depth: self.hidden.len(),
            output_dim: self.output_map.rows(),
        }
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }
}

/// Draws fresh parameters: `A ~ N(0, 1/m)`, each `W_l ~ N(0, 2/m)`,
/// `B ~ N(0, 1/d)`, in that fixed order from `rng`.
pub fn init_params(shape: NetworkShape, rng: &mut RngState) -> Params {
    let m = shape.width as f64;
    let d = shape.output_dim as f64;
    let input_map = Matrix::gaussian(rng, shape.width, shape.input_dim, (1.0 / m).sqrt());
    let hidden = (0..shape.depth)
        .map(|_| Matrix::gaussian(rng, shape.width, shape.width, (2.0 / m).sqrt()))
        .collect();
    let output_map = Matrix::gaussian(rng, shape.output_dim, shape.width, (1.0 / d).sqrt());
    Params {
        input_map,
        hidden,
        output_map,
    }
}

/// Full record of one forward pass on a single input.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `h_0..h_L`, each of length `m`; `h_0 = A x`.
    pub hidden: Vec<Vec<f64>>,
    /// Pre-activations `g_1..g_L`.
    pub preact: Vec<Vec<f64>>,
    /// `B h_L`, length `d`.
    pub output: Vec<f64>,
}

/// Evaluates the network on one input, capturing every hidden state.
pub fn forward(params: &Params, act: &Activation, x: &[f64]) -> ForwardTrace {
    assert_eq!(
        x.len(),
        params.input_map.cols(),
        "input length does not match network input dimension"
    );
    let mut hidden = Vec::with_capacity(params.depth() + 1);
    let mut preact = Vec::with_capacity(params.depth());
    hidden.push(params.input_map.matvec(x));
    for w in &params.hidden {
        let g = w.matvec(hidden.last().unwrap());
        let h = g.iter().map(|&v| act.apply(v)).collect();
        preact.push(g);
        hidden.push(h);
    }
    let output = params.output_map.matvec(hidden.last().unwrap());
    ForwardTrace {
        hidden,
        preact,
        output,
    }
}

/// Forward pass over a batch; row `i` of every matrix is sample `i`.
///
/// Bitwise identical to per-sample [`forward`] because both reduce with
/// the same dot-product kernel.
#[derive(Debug, Clone)]
pub struct BatchForward {
    /// `H_0..H_L`, each `n x m`.
    pub hidden: Vec<Matrix>,
    /// `G_1..G_L`, each `n x m`.
    pub preact: Vec<Matrix>,
    /// `n x d` outputs.
    pub outputs: Matrix,
}

pub fn forward_batch(params: &Params, act: &Activation, xs: &Matrix) -> BatchForward {
    assert_eq!(
        xs.cols(),
        params.input_map.cols(),
        "batch feature count does not match network input dimension"
    );
    let mut hidden = Vec::with_capacity(params.depth() + 1);
    let mut preact = Vec::with_capacity(params.depth());
    hidden.push(xs.matmul_bt(&params.input_map));
    for w in &params.hidden {
        let g = hidden.last().unwrap().matmul_bt(w);
        hidden.push(act.apply_matrix(&g));
        preact.push(g);
    }
    let outputs = hidden.last().unwrap().matmul_bt(&params.output_map);
    BatchForward {
        hidden,
        preact,
        outputs,
    }
}
