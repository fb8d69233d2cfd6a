//! Operation-count models for the two receivers.

use serde::Serialize;

/// Elementary operation counts for detecting one symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    pub additions: u64,
    pub multiplications: u64,
    pub nonlinear_activations: u64,
    pub total: u64,
}

impl ComplexityReport {
    fn new(additions: u64, multiplications: u64, nonlinear_activations: u64) -> Self {
        Self {
            additions,
            multiplications,
            nonlinear_activations,
            total: additions + multiplications + nonlinear_activations,
        }
    }
}

/// Two correlators of length `n1`: `2N1 − 1` additions and `2N1² − 2N1`
/// multiplications.
pub fn mf_op_count(n1: u64) -> ComplexityReport {
    assert!(n1 >= 1, "N1 must be positive");
    ComplexityReport::new(2 * n1 - 1, 2 * n1 * n1 - 2 * n1, 0)
}

/// Fully connected `n1 → hidden… → 1` network: one addition and one
/// activation per computing neuron, one multiplication per weight.
pub fn dnn_op_count(n1: u64, hidden: &[u64]) -> ComplexityReport {
    assert!(!hidden.is_empty(), "at least one hidden layer is required");
    let layers: Vec<u64> = std::iter::once(n1)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect();
    let additions: u64 = layers[1..].iter().sum();
    let multiplications: u64 = layers.windows(2).map(|w| w[0] * w[1]).sum();
    ComplexityReport::new(additions, multiplications, additions)
}

/// Default hidden sizes `[N1, ⌊7·N1/8⌋]`.
pub fn default_hidden(n1: usize) -> Vec<usize> {
    vec![n1, 7 * n1 / 8]
}
