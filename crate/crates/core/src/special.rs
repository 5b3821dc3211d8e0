//! Special functions.
//!
//! Thin wrappers over `libm` (a port of the musl C math library).

/// The Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln |Gamma(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with 30-digit arbitrary precision arithmetic.
    #[allow(clippy::excessive_precision)]
    const REFERENCE: [(f64, f64); 8] = [
        (0.05, 19.470_085_311_255_512_864),
        (0.5, 1.772_453_850_905_516_027_3),
        (1.3, 0.897_470_696_306_277_188_49),
        (2.5, 1.329_340_388_179_137_020_5),
        (7.25, 1_155.381_013_919_989_687_2),
        (17.5, 85_634_974_475_162.063_871),
        (33.3, 7.487_577_596_522_706_608e35),
        (49.9, 4.118_011_034_253_058_041_9e62),
    ];

    #[test]
    fn gamma_matches_high_precision_reference() {
        for (x, want) in REFERENCE {
            let got = gamma(x);
            let rel = ((got - want) / want).abs();
            assert!(rel <= 1e-13, "gamma({x}) = {got}, want {want}, rel {rel:e}");
            let lrel = ((ln_gamma(x) - want.ln()) / want.ln().abs().max(1.0)).abs();
            assert!(lrel <= 1e-13, "ln_gamma({x}) rel {lrel:e}");
        }
    }
}
