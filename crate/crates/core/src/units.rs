//! dB conversions.

/// Linear floor applied before taking logarithms of SNR values that may be
/// zero or negative (raw estimates are unbiased and therefore can dip below
/// zero).
pub const LINEAR_FLOOR: f64 = 1e-12;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `10 log10(max(x, LINEAR_FLOOR))`.
pub fn linear_to_db_floored(x: f64) -> f64 {
    linear_to_db(x.max(LINEAR_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions() {
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-15);
        assert!((linear_to_db(64.0) - 18.061_799_739_838_87).abs() < 1e-12);
        assert_eq!(linear_to_db_floored(-3.0), -120.0);
        assert_eq!(linear_to_db_floored(0.0), -120.0);
    }
}
