//! Weber-Fechner intensity/concentration conversion and OISK symbol bands.
//!
//! Perceived intensity follows `I = k·log10(c) + d`. Each symbol owns a band
//! of intensities `level ± halfwidth` and the image of that band on the
//! concentration axis. Because the law is logarithmic the concentration band
//! is not symmetric about the level's own concentration.

use serde::Serialize;
use thiserror::Error;

use crate::domain::OdorantSpec;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SchemeError {
    #[error("concentration must be positive, got {0}")]
    NonPositiveConcentration(f64),
    #[error("scheme needs at least one level")]
    Empty,
    #[error("halfwidth must be positive, got {0}")]
    BadHalfwidth(f64),
    #[error("levels must be strictly increasing: {lo} then {hi}")]
    NotIncreasing { lo: f64, hi: f64 },
    #[error("bands of levels {lo} and {hi} overlap for halfwidth {halfwidth}")]
    Overlap { lo: f64, hi: f64, halfwidth: f64 },
}

/// Perceived intensity of a concentration in ou/m³.
pub fn intensity_of(conc: f64, odorant: &OdorantSpec) -> Result<f64, SchemeError> {
    if conc.is_nan() || conc <= 0.0 {
        return Err(SchemeError::NonPositiveConcentration(conc));
    }
    Ok(odorant.weber_fechner_k * conc.log10() + odorant.intensity_intercept_d)
}

/// Concentration in ou/m³ that is perceived at `intensity`.
pub fn concentration_of(intensity: f64, odorant: &OdorantSpec) -> f64 {
    10f64.powf((intensity - odorant.intensity_intercept_d) / odorant.weber_fechner_k)
}

/// Intensity band of one symbol and its image in concentration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntensityBand {
    pub level: f64,
    pub intensity_lo: f64,
    pub intensity_hi: f64,
    pub conc_lo: f64,
    pub conc_hi: f64,
}

impl IntensityBand {
    /// Closed-interval membership.
    pub fn contains(&self, conc: f64) -> bool {
        self.conc_lo <= conc && conc <= self.conc_hi
    }

    pub fn overlaps(&self, other: &IntensityBand) -> bool {
        self.conc_lo <= other.conc_hi && other.conc_lo <= self.conc_hi
    }
}

/// Band centred on `level`. A zero halfwidth yields a degenerate band.
pub fn band_for_level(level: f64, halfwidth: f64, odorant: &OdorantSpec) -> IntensityBand {
    let intensity_lo = level - halfwidth;
    let intensity_hi = level + halfwidth;
    IntensityBand {
        level,
        intensity_lo,
        intensity_hi,
        conc_lo: concentration_of(intensity_lo, odorant),
        conc_hi: concentration_of(intensity_hi, odorant),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OiskSymbol {
    pub index: usize,
    pub band: IntensityBand,
    /// Concentration the transmitter emits, the upper end of the band.
    pub transmit_concentration: f64,
}

/// M-ary OISK alphabet, symbols ordered by increasing intensity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OiskScheme {
    symbols: Vec<OiskSymbol>,
}

impl OiskScheme {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[OiskSymbol] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&OiskSymbol> {
        self.symbols.get(index)
    }

    pub fn band(&self, index: usize) -> Option<&IntensityBand> {
        self.symbols.get(index).map(|s| &s.band)
    }
}

pub fn build_scheme(levels: &[f64], halfwidth: f64, odorant: &OdorantSpec) -> Result<OiskScheme, SchemeError> {
    if levels.is_empty() {
        return Err(SchemeError::Empty);
    }
    if halfwidth.is_nan() || halfwidth <= 0.0 {
        return Err(SchemeError::BadHalfwidth(halfwidth));
    }
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi.is_nan() || lo.is_nan() || hi <= lo {
            return Err(SchemeError::NotIncreasing { lo, hi });
        }
        if hi - lo <= 2.0 * halfwidth {
            return Err(SchemeError::Overlap { lo, hi, halfwidth });
        }
    }
    let symbols = levels
        .iter()
        .enumerate()
        .map(|(index, &level)| {
            let band = band_for_level(level, halfwidth, odorant);
            OiskSymbol {
                index,
                band,
                transmit_concentration: band.conc_hi,
            }
        })
        .collect();
    Ok(OiskScheme { symbols })
}

/// Receiver decision: the symbol whose concentration band holds `conc`, or
/// `None` (erasure) when no band does.
pub fn decode(conc: f64, scheme: &OiskScheme) -> Option<usize> {
    scheme.symbols.iter().find(|s| s.band.contains(conc)).map(|s| s.index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn benzene() -> OdorantSpec {
        OdorantSpec::benzene()
    }

    fn table_scheme() -> OiskScheme {
        build_scheme(&[4.0, 5.0], 0.25, &benzene()).unwrap()
    }

    #[test]
    fn intensity_of_reference_values() {
        let o = benzene();
        assert_eq!(intensity_of(1.0, &o).unwrap(), 0.5);
        assert!((intensity_of(28.0463, &o).unwrap() - 4.25).abs() < 1e-4);
        assert!((intensity_of(68.2320, &o).unwrap() - 5.25).abs() < 1e-4);
    }

    #[test]
    fn intensity_of_rejects_non_positive() {
        let o = benzene();
        assert!(intensity_of(0.0, &o).is_err());
        assert!(intensity_of(-3.0, &o).is_err());
        assert!(intensity_of(f64::NAN, &o).is_err());
    }

    #[test]
    fn concentration_of_reference_values() {
        let o = benzene();
        assert_eq!(concentration_of(0.5, &o), 1.0);
        assert!((concentration_of(3.75, &o) - 17.9815).abs() < 5e-4);
        assert!((concentration_of(4.75, &o) - 43.7448).abs() < 5e-4);
    }

    #[test]
    fn natural_log_would_not_reproduce_band_edge() {
        // 2.59·ln(17.9815)+0.5 is far from 3.75; base 10 hits it.
        let ln_version = 2.59 * 17.9815f64.ln() + 0.5;
        assert!((ln_version - 3.75).abs() > 1.0);
        assert!((intensity_of(17.9815, &benzene()).unwrap() - 3.75).abs() < 1e-4);
    }

    #[test]
    fn bands_for_levels_four_and_five() {
        let o = benzene();
        let b4 = band_for_level(4.0, 0.25, &o);
        assert_eq!((b4.intensity_lo, b4.intensity_hi), (3.75, 4.25));
        assert!((b4.conc_lo - 17.9815).abs() < 5e-4);
        assert!((b4.conc_hi - 28.0463).abs() < 5e-4);
        let b5 = band_for_level(5.0, 0.25, &o);
        assert!((b5.conc_lo - 43.7448).abs() < 5e-4);
        // 10^(4.75/2.59) = 68.23023; 68.2320 is often quoted for this bound
        // but is not reachable with k = 2.59, d = 0.5.
        assert!((b5.conc_hi - 68.2302).abs() < 5e-4);
    }

    #[test]
    fn zero_halfwidth_band_is_degenerate() {
        let o = benzene();
        let b = band_for_level(5.0, 0.0, &o);
        assert_eq!(b.conc_lo, b.conc_hi);
        assert_eq!(b.conc_lo, concentration_of(5.0, &o));
    }

    #[test]
    fn band_is_asymmetric_in_concentration() {
        let o = benzene();
        let b = band_for_level(5.0, 0.25, &o);
        let centre = concentration_of(5.0, &o);
        let above = b.conc_hi - centre;
        let below = centre - b.conc_lo;
        assert!(above - below > 1.0, "above {above} below {below}");
    }

    #[test]
    fn binary_scheme_transmits_band_tops() {
        let s = table_scheme();
        assert_eq!(s.len(), 2);
        assert!((s.symbols()[0].transmit_concentration - 28.0463).abs() < 5e-4);
        assert!((s.symbols()[1].transmit_concentration - 68.2302).abs() < 5e-4);
    }

    #[test]
    fn single_level_scheme() {
        let s = build_scheme(&[4.0], 0.4, &benzene()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn close_levels_are_rejected() {
        let err = build_scheme(&[4.0, 4.4], 0.25, &benzene()).unwrap_err();
        assert!(matches!(err, SchemeError::Overlap { .. }));
        assert!(build_scheme(&[5.0, 4.0], 0.25, &benzene()).is_err());
        assert!(build_scheme(&[], 0.25, &benzene()).is_err());
        assert!(build_scheme(&[4.0], 0.0, &benzene()).is_err());
    }

    #[test]
    fn decode_examples() {
        let s = table_scheme();
        assert_eq!(decode(64.2, &s), Some(1));
        assert_eq!(decode(30.0, &s), None);
        assert_eq!(decode(s.band(0).unwrap().conc_lo, &s), Some(0));
        assert_eq!(decode(s.band(1).unwrap().conc_hi, &s), Some(1));
        assert_eq!(decode(-2.0, &s), None);
        assert_eq!(decode(1e6, &s), None);
    }

    proptest! {
        #[test]
        fn weber_fechner_round_trip(log_c in -8.0f64..8.0) {
            let o = benzene();
            let c = 10f64.powf(log_c);
            let back = concentration_of(intensity_of(c, &o).unwrap(), &o);
            prop_assert!(((back - c) / c).abs() < 1e-12);
        }

        #[test]
        fn intensity_is_strictly_increasing(a in 1e-6f64..1e6, factor in 1.000001f64..100.0) {
            let o = benzene();
            prop_assert!(intensity_of(a * factor, &o).unwrap() > intensity_of(a, &o).unwrap());
        }

        #[test]
        fn schemes_are_ordered_disjoint_and_self_consistent(
            start in 0.0f64..1.0,
            gaps in prop::collection::vec(0.55f64..1.5, 0..5),
        ) {
            let o = benzene();
            let mut levels = vec![start];
            for g in gaps {
                let next = levels.last().unwrap() + g;
                if next > 6.0 { break; }
                levels.push(next);
            }
            let s = build_scheme(&levels, 0.25, &o).unwrap();
            for w in s.symbols().windows(2) {
                prop_assert!(w[0].band.conc_hi < w[1].band.conc_lo);
                prop_assert!(!w[0].band.overlaps(&w[1].band));
            }
            for sym in s.symbols() {
                prop_assert_eq!(decode(sym.transmit_concentration, &s), Some(sym.index));
                prop_assert!(sym.band.conc_lo > 0.0 && sym.band.conc_lo < sym.band.conc_hi);
            }
        }
    }
}
