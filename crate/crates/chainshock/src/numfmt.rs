//! Numeric formatting shared by every file writer.
//!
//! All floating-point values leave the program with 9 significant digits so
//! that repeated runs (and runs under different worker counts) emit
//! byte-identical files.

/// Scientific notation with 9 significant digits, e.g. `1.40000000e-1`.
pub(crate) fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Round to 9 significant digits, for values that go through a JSON
/// serializer instead of [`sig9`].
pub(crate) fn round_sig9(x: f64) -> f64 {
    if x.is_finite() {
        sig9(x).parse().expect("sig9 output parses back")
    } else {
        x
    }
}
