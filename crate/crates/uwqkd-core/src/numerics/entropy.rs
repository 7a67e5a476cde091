//! Binary entropy in bits, with the continuous extension 0·log 0 = 0.

use super::NumericsError;

/// h(p) = −p log₂ p − (1−p) log₂(1−p).
///
/// Used both for the SKR privacy-amplification term and for the LDPC
/// reconciliation-efficiency denominator.
pub fn binary_entropy(p: f64) -> Result<f64, NumericsError> {
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(NumericsError::ProbabilityRange(p));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-(p * p.log2() + (1.0 - p) * (1.0 - p).log2()))
}
