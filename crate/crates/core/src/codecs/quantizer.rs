use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform depth binning with an extra background bin at index `n_bins`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthQuantizer {
    d_min: f64,
    d_max: f64,
    n_bins: usize,
}

impl DepthQuantizer {
    pub const DEFAULT_BINS: usize = 19;
    /// Half-width used to widen a zero-length depth range.
    pub const DEGENERATE_MARGIN_MM: f64 = 1.0;

    pub fn new(d_min: f64, d_max: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidQuantizer("n_bins must be positive".into()));
        }
        if !(d_min.is_finite() && d_max.is_finite()) || d_min >= d_max {
            return Err(Error::InvalidQuantizer(format!(
                "need finite d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        Ok(Self { d_min, d_max, n_bins })
    }

    /// Quantizer spanning `[lo, hi]`, widened symmetrically when `lo == hi`.
    pub fn from_range(lo: f64, hi: f64, n_bins: usize) -> Result<Self> {
        if lo == hi {
            Self::new(
                lo - Self::DEGENERATE_MARGIN_MM,
                hi + Self::DEGENERATE_MARGIN_MM,
                n_bins,
            )
        } else {
            Self::new(lo, hi, n_bins)
        }
    }

    /// Fits the range to the foreground depth of one sample.
    pub fn fit(depth: ArrayView2<f32>, part_mask: ArrayView2<u8>, n_bins: usize) -> Result<Self> {
        Self::fit_with_points(depth, part_mask, std::iter::empty(), n_bins)
    }

    /// Fits the range to foreground depth together with extra depth values
    /// (joint z-coordinates for the volumetric encoding).
    pub fn fit_with_points(
        depth: ArrayView2<f32>,
        part_mask: ArrayView2<u8>,
        extra: impl IntoIterator<Item = f64>,
        n_bins: usize,
    ) -> Result<Self> {
        if depth.dim() != part_mask.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", part_mask.dim()),
                actual: format!("{:?}", depth.dim()),
            });
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut any = false;
        for (&label, &d) in part_mask.iter().zip(depth.iter()) {
            if label != 0 && d.is_finite() {
                any = true;
                lo = lo.min(d as f64);
                hi = hi.max(d as f64);
            }
        }
        if !any {
            return Err(Error::NoForeground);
        }
        for z in extra.into_iter().filter(|z| z.is_finite()) {
            lo = lo.min(z);
            hi = hi.max(z);
        }
        Self::from_range(lo, hi, n_bins)
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn background_bin(&self) -> usize {
        self.n_bins
    }

    /// Channels of the one-hot depth encoding (foreground bins + background).
    pub fn num_channels(&self) -> usize {
        self.n_bins + 1
    }

    pub fn bin_width(&self) -> f64 {
        (self.d_max - self.d_min) / self.n_bins as f64
    }

    /// The `n_bins + 1` bin edges; the last edge is exactly `d_max`.
    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.n_bins)
            .map(|i| if i == self.n_bins { self.d_max } else { self.d_min + i as f64 * w })
            .collect()
    }

    /// Bin index of depth `d`; non-finite depth is background.
    pub fn quantize(&self, d: f64) -> usize {
        if !d.is_finite() {
            return self.background_bin();
        }
        let b = ((d - self.d_min) / self.bin_width()).floor();
        if b <= 0.0 {
            0
        } else {
            (b as usize).min(self.n_bins - 1)
        }
    }

    /// Centre of foreground bin `b`, `None` for the background bin.
    pub fn dequantize(&self, b: usize) -> Option<f64> {
        (b < self.n_bins).then(|| self.d_min + (b as f64 + 0.5) * self.bin_width())
    }

    /// Plain-text `key=value` record.
    pub fn to_record(&self) -> String {
        format!("d_min={}\nd_max={}\nn_bins={}\n", self.d_min, self.d_max, self.n_bins)
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let (mut d_min, mut d_max, mut n_bins) = (None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))?;
            let parse_f = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
            match key.trim() {
                "d_min" => d_min = Some(parse_f(value)?),
                "d_max" => d_max = Some(parse_f(value)?),
                "n_bins" => {
                    n_bins = Some(value.trim().parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?)
                }
                other => return Err(Error::Parse(format!("unknown quantizer key {other:?}"))),
            }
        }
        match (d_min, d_max, n_bins) {
            (Some(a), Some(b), Some(n)) => Self::new(a, b, n),
            _ => Err(Error::Parse("quantizer record is missing a field".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn degenerate_range_is_widened() {
        let depth = Array2::from_elem((4, 4), 2000.0f32);
        let mask = Array2::from_elem((4, 4), 2u8);
        let q = DepthQuantizer::fit(depth.view(), mask.view(), 19).unwrap();
        assert_eq!(q.d_min(), 1999.0);
        assert_eq!(q.d_max(), 2001.0);
        assert_eq!(q.quantize(2000.0), 9);
    }

    #[test]
    fn uniform_edges() {
        let q = DepthQuantizer::new(1000.0, 2900.0, 19).unwrap();
        assert!((q.bin_width() - 100.0).abs() < 1e-12);
        assert_eq!(q.quantize(1050.0), 0);
        assert_eq!(q.quantize(2899.0), 18);
        assert_eq!(q.quantize(1000.0), 0);
        assert_eq!(q.quantize(2900.0), 18);
        assert_eq!(q.quantize(5000.0), 18);
        assert_eq!(q.quantize(f64::INFINITY), 19);
        assert_eq!(q.quantize(f64::NAN), 19);
        let edges = q.edges();
        assert_eq!(edges.len(), 20);
        assert!(edges.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*edges.last().unwrap(), 2900.0);
    }

    #[test]
    fn bin_center() {
        let q = DepthQuantizer::new(0.0, 1900.0, 19).unwrap();
        assert!((q.dequantize(4).unwrap() - 450.0).abs() < 1e-9);
        assert_eq!(q.dequantize(19), None);
    }

    #[test]
    fn background_only_mask_is_an_error() {
        let depth = Array2::from_elem((3, 3), f32::INFINITY);
        let mask = Array2::<u8>::zeros((3, 3));
        assert_eq!(
            DepthQuantizer::fit(depth.view(), mask.view(), 19),
            Err(Error::NoForeground)
        );
    }

    #[test]
    fn union_fit_covers_extra_points() {
        let depth = Array2::from_elem((2, 2), 3000.0f32);
        let mask = Array2::from_elem((2, 2), 1u8);
        let q = DepthQuantizer::fit_with_points(depth.view(), mask.view(), [2500.0, 3300.0], 19)
            .unwrap();
        assert_eq!((q.d_min(), q.d_max()), (2500.0, 3300.0));
    }

    #[test]
    fn invalid_construction() {
        assert!(DepthQuantizer::new(10.0, 10.0, 19).is_err());
        assert!(DepthQuantizer::new(10.0, 5.0, 19).is_err());
        assert!(DepthQuantizer::new(0.0, 5.0, 0).is_err());
    }

    #[test]
    fn record_round_trip() {
        let q = DepthQuantizer::new(1234.5678, 4321.000001, 19).unwrap();
        assert_eq!(DepthQuantizer::from_record(&q.to_record()).unwrap(), q);
        assert!(DepthQuantizer::from_record("d_min=1\nd_max=2").is_err());
        assert!(DepthQuantizer::from_record("d_min=1\nd_max=2\nn_bins=3\ncolor=red").is_err());
    }

    proptest! {
        #[test]
        fn quantize_inverts_dequantize(lo in -5000.0f64..5000.0, span in 0.5f64..5000.0, n in 1usize..64) {
            let q = DepthQuantizer::new(lo, lo + span, n).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for b in 0..n {
                let c = q.dequantize(b).unwrap();
                prop_assert_eq!(q.quantize(c), b);
                prop_assert!(c > prev);
                prev = c;
            }
        }
    }
}
