//! Global hard threshold on a heatmap.

use serde::{Deserialize, Serialize};

use crate::raster::{BinaryMask, Heatmap};

/// Default intensity threshold `T`.
pub const DEFAULT_THRESHOLD: u8 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarizeConfig {
    pub threshold: u8,
}

impl Default for BinarizeConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Foreground where `H(x, y) > T`, strictly.
pub fn binarize(heatmap: &Heatmap, cfg: BinarizeConfig) -> BinaryMask {
    let bits = heatmap.values().iter().map(|&v| u8::from(v > cfg.threshold)).collect();
    BinaryMask::new(heatmap.width(), heatmap.height(), bits).expect("heatmap dimensions are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(v: u8) -> Heatmap {
        Heatmap::new(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn saturated_heatmap_is_all_foreground() {
        let h = Heatmap::filled(5, 3, 255).unwrap();
        assert_eq!(binarize(&h, BinarizeConfig::default()).foreground_count(), 15);
    }

    #[test]
    fn comparison_is_strict() {
        let cfg = BinarizeConfig { threshold: 120 };
        assert_eq!(binarize(&single(120), cfg).values(), &[0]);
        assert_eq!(binarize(&single(121), cfg).values(), &[1]);
    }

    #[test]
    fn threshold_255_is_empty() {
        let h = Heatmap::from_fn(8, 8, |x, y| (x * 37 + y * 91) as u8).unwrap();
        let m = binarize(&h, BinarizeConfig { threshold: 255 });
        assert_eq!(m.foreground_count(), 0);
        assert_eq!((m.width(), m.height()), (8, 8));
    }

    proptest! {
        #[test]
        fn foreground_shrinks_as_threshold_rises(
            (w, h, values) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h))
            }),
            t1 in any::<u8>(),
            t2 in any::<u8>(),
        ) {
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let hm = Heatmap::new(w, h, values).unwrap();
            let a = binarize(&hm, BinarizeConfig { threshold: lo });
            let b = binarize(&hm, BinarizeConfig { threshold: hi });
            for (&fa, &fb) in a.values().iter().zip(b.values()) {
                prop_assert!(fb <= fa);
            }
        }

        #[test]
        fn rebinarizing_a_rendered_mask_is_identity(
            bits in proptest::collection::vec(any::<bool>(), 1..200)
        ) {
            let n = bits.len();
            let mask = BinaryMask::from_bools(n, 1, &bits).unwrap();
            let rendered = Heatmap::new(n, 1, mask.values().iter().map(|&v| v * 255).collect()).unwrap();
            prop_assert_eq!(binarize(&rendered, BinarizeConfig { threshold: 128 }), mask);
        }
    }
}
