use serde::{Deserialize, Serialize};

use crate::data::{DistortionVector, LabelSet, NUM_CATEGORIES};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinarizeStrategy {
    /// Flag a category when its probability is at least `t`.
    Threshold(f64),
    /// Flag the three most probable categories; ties go to the lower index.
    MaxThree,
}

impl BinarizeStrategy {
    pub fn threshold(t: f64) -> Result<Self> {
        if t > 0.0 && t < 1.0 {
            Ok(BinarizeStrategy::Threshold(t))
        } else {
            Err(Error::Invalid(format!("threshold {t} not in (0, 1)")))
        }
    }

    /// The four strategies compared in the label-processing study.
    pub fn standard_set() -> Vec<BinarizeStrategy> {
        vec![
            BinarizeStrategy::Threshold(0.3),
            BinarizeStrategy::Threshold(0.4),
            BinarizeStrategy::Threshold(0.5),
            BinarizeStrategy::MaxThree,
        ]
    }

    pub fn label(&self) -> String {
        match self {
            BinarizeStrategy::Threshold(t) => format!("threshold-{t}"),
            BinarizeStrategy::MaxThree => "max-three".into(),
        }
    }
}

pub fn binarize(prob: &DistortionVector, strategy: BinarizeStrategy) -> LabelSet {
    let mut flags = [false; NUM_CATEGORIES];
    match strategy {
        BinarizeStrategy::Threshold(t) => {
            for (f, &p) in flags.iter_mut().zip(&prob.0) {
                *f = p >= t;
            }
        }
        BinarizeStrategy::MaxThree => {
            let mut order: Vec<usize> = (0..NUM_CATEGORIES).collect();
            // stable sort keeps lower indices first among equal probabilities
            order.sort_by(|&a, &b| prob.0[b].total_cmp(&prob.0[a]));
            for &i in &order[..3] {
                flags[i] = true;
            }
        }
    }
    LabelSet(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DistortionCategory as C;

    fn flagged(l: LabelSet) -> Vec<C> {
        C::ALL.into_iter().filter(|c| l.get(*c)).collect()
    }

    #[test]
    fn threshold_and_max_three() {
        let p = DistortionVector([0.6, 0.1, 0.0, 0.0, 0.0, 0.4, 0.0]);
        assert_eq!(
            flagged(binarize(&p, BinarizeStrategy::Threshold(0.5))),
            vec![C::Blurry]
        );
        assert_eq!(
            flagged(binarize(&p, BinarizeStrategy::Threshold(0.4))),
            vec![C::Blurry, C::None]
        );
        assert_eq!(
            flagged(binarize(&p, BinarizeStrategy::MaxThree)),
            vec![C::Blurry, C::Shaky, C::None]
        );
    }

    #[test]
    fn max_three_tie_break() {
        let p = DistortionVector([0.2; NUM_CATEGORIES]);
        assert_eq!(
            flagged(binarize(&p, BinarizeStrategy::MaxThree)),
            vec![C::Blurry, C::Shaky, C::Bright]
        );
    }

    #[test]
    fn threshold_validation() {
        assert!(BinarizeStrategy::threshold(0.0).is_err());
        assert!(BinarizeStrategy::threshold(1.0).is_err());
        assert!(BinarizeStrategy::threshold(0.3).is_ok());
    }

    proptest::proptest! {
        #[test]
        fn threshold_is_monotone(
            p in proptest::array::uniform7(0.0f64..=1.0),
            bump in 0.0f64..0.5,
            idx in 0usize..7,
            t in 0.01f64..0.99,
        ) {
            let before = binarize(&DistortionVector(p), BinarizeStrategy::Threshold(t));
            let mut q = p;
            q[idx] = (q[idx] + bump).min(1.0);
            let after = binarize(&DistortionVector(q), BinarizeStrategy::Threshold(t));
            for c in 0..NUM_CATEGORIES {
                proptest::prop_assert!(!before.0[c] || after.0[c]);
            }
        }
    }
}
