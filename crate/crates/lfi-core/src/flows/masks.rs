//! Degree assignment and binary masks enforcing autoregressive structure.
//!
//! Inputs carry degrees: data dimension at ordering position k has degree
//! k+1, context inputs have degree 0. A hidden unit of degree g connects to
//! predecessors of degree ≤ g; the outputs for the dimension of degree p
//! connect to units of degree < p. Context inputs therefore reach every
//! output without breaking autoregressive structure over the data.

use crate::num::{Matrix, RngStream};

#[derive(Debug, Clone)]
pub struct MadeMasks {
    /// Degrees of each hidden layer's units.
    pub hidden_degrees: Vec<Vec<usize>>,
    /// One mask per hidden layer (out × in).
    pub hidden_masks: Vec<Matrix>,
    /// Mask of the output layer (2D × last width), β rows then α rows.
    pub output_mask: Matrix,
}

/// Build degrees and masks for data dimension `d`, context dimension `c`,
/// the given hidden layer widths, and an input-order permutation
/// (`order[k]` = dimension index at position k).
///
/// Hidden degrees are drawn uniformly from {1..D−1}. The D = 1 case has no
/// usable degree in that range: hidden units take degree 0, so the single
/// dimension's output depends on context only.
pub fn build_masks(
    d: usize,
    c: usize,
    hidden_sizes: &[usize],
    order: &[usize],
    rng: &mut RngStream,
) -> MadeMasks {
    assert!(d >= 1, "data dimension must be at least 1");
    assert_eq!(order.len(), d, "order must be a permutation of 0..D");

    // Degree of each input slot: data dims first, then context at degree 0.
    let mut input_degrees = vec![0usize; d + c];
    for (pos, &dim) in order.iter().enumerate() {
        input_degrees[dim] = pos + 1;
    }

    let mut hidden_degrees: Vec<Vec<usize>> = Vec::with_capacity(hidden_sizes.len());
    for &width in hidden_sizes {
        let degs = (0..width)
            .map(|_| if d >= 2 { 1 + rng.below(d - 1) } else { 0 })
            .collect();
        hidden_degrees.push(degs);
    }

    let mut hidden_masks = Vec::with_capacity(hidden_sizes.len());
    let mut prev: &[usize] = &input_degrees;
    for degs in &hidden_degrees {
        let mut mask = Matrix::zeros(degs.len(), prev.len());
        for (k, &gk) in degs.iter().enumerate() {
            for (j, &gj) in prev.iter().enumerate() {
                if gk >= gj {
                    mask.set(k, j, 1.0);
                }
            }
        }
        hidden_masks.push(mask);
        prev = degs;
    }

    let mut output_mask = Matrix::zeros(2 * d, prev.len());
    for dim in 0..d {
        let out_degree = input_degrees[dim];
        for (j, &gj) in prev.iter().enumerate() {
            if gj < out_degree {
                output_mask.set(dim, j, 1.0);
                output_mask.set(d + dim, j, 1.0);
            }
        }
    }

    MadeMasks {
        hidden_degrees,
        hidden_masks,
        output_mask,
    }
}
