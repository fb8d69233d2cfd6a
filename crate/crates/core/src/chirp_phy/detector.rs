use super::{chirp_samples, decimate, ChirpDirection, ChirpParams};
use crate::dsp::dot;
use crate::error::{input, Result};

/// Outcome of a correlation decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bit: u8,
    /// Correlation with the up-chirp template.
    pub c1: f64,
    /// Correlation with the down-chirp template.
    pub c2: f64,
}

/// Correlation receiver with templates precomputed at the decimated rate.
///
/// Decides bit 0 iff `c1 >= c2`, i.e. the larger correlation wins and a tie
/// goes to bit 0.
#[derive(Debug, Clone)]
pub struct MatchedFilter {
    up: Vec<f64>,
    down: Vec<f64>,
}

impl MatchedFilter {
    pub fn new(params: &ChirpParams) -> Result<Self> {
        params.validate()?;
        // decimating the full-rate template equals regenerating it at fs/λ
        let up = decimate(&chirp_samples(params, ChirpDirection::Up), params.lambda);
        let down = decimate(&chirp_samples(params, ChirpDirection::Down), params.lambda);
        Ok(Self { up, down })
    }

    pub fn symbol_len(&self) -> usize {
        self.up.len()
    }

    pub fn templates(&self) -> (&[f64], &[f64]) {
        (&self.up, &self.down)
    }

    pub fn detect(&self, rx: &[f64]) -> Result<Detection> {
        if rx.len() != self.up.len() {
            return input(format!(
                "received symbol has {} samples, template has {}",
                rx.len(),
                self.up.len()
            ));
        }
        let c1 = dot(rx, &self.up);
        let c2 = dot(rx, &self.down);
        Ok(Detection {
            bit: if c1 >= c2 { 0 } else { 1 },
            c1,
            c2,
        })
    }
}

/// One-shot matched-filter decision for a single received symbol.
pub fn matched_filter_detect(rx: &[f64], params: &ChirpParams) -> Result<Detection> {
    MatchedFilter::new(params)?.detect(rx)
}
