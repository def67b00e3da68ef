use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, NUM_CLASSES};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: Option<ClassLabel>,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Appends `class,threshold,fpr,tpr` rows.
    pub fn write_csv_rows<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let class = self.class.map(|c| c.class_no().to_string()).unwrap_or_default();
        for p in &self.points {
            writeln!(out, "{class},{},{},{}", p.threshold, p.fpr, p.tpr)?;
        }
        Ok(())
    }
}

/// One-vs-rest ROC for `class`, scored by that class's probability column.
pub fn roc(
    scores: &[[f64; NUM_CLASSES]],
    truths: &[ClassLabel],
    class: ClassLabel,
) -> Result<RocCurve, MlError> {
    if scores.len() != truths.len() {
        return Err(MlError::LengthMismatch {
            predictions: scores.len(),
            truths: truths.len(),
        });
    }
    let col: Vec<f64> = scores.iter().map(|s| s[class.index()]).collect();
    let pos: Vec<bool> = truths.iter().map(|&t| t == class).collect();
    let mut curve = roc_binary(&col, &pos).map_err(|e| match e {
        MlError::SingleClassOnly(_) => MlError::SingleClassOnly(class),
        other => other,
    })?;
    curve.class = Some(class);
    Ok(curve)
}

/// ROC of a binary problem. Samples with equal scores enter the curve
/// together, so ties contribute a diagonal segment and half credit.
pub fn roc_binary(scores: &[f64], positive: &[bool]) -> Result<RocCurve, MlError> {
    if scores.len() != positive.len() {
        return Err(MlError::LengthMismatch {
            predictions: scores.len(),
            truths: positive.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MlError::NonFinite);
    }
    let p = positive.iter().filter(|&&b| b).count();
    let n = positive.len() - p;
    if p == 0 || n == 0 {
        return Err(MlError::SingleClassOnly(ClassLabel::FALLBACK));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc2 = 0u128; // twice the area in units of 1/(p·n)
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        });
    }
    Ok(RocCurve {
        class: None,
        points,
        auc: auc2 as f64 / (2.0 * p as f64 * n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Probability that a random positive outscores a random negative, ties
    /// counting one half.
    fn concordance(scores: &[f64], pos: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn small_hand_case() {
        let c = roc_binary(&[0.9, 0.8, 0.3, 0.1], &[true, false, true, false]).unwrap();
        assert_eq!(c.auc, 0.75);
        assert_eq!(c.points.first().unwrap().fpr, 0.0);
        let last = c.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn perfect_and_constant() {
        let pos = [true, true, false, false];
        assert_eq!(roc_binary(&[0.9, 0.8, 0.2, 0.1], &pos).unwrap().auc, 1.0);
        assert_eq!(roc_binary(&[0.4; 4], &pos).unwrap().auc, 0.5);
        assert_eq!(roc_binary(&[0.1, 0.2, 0.8, 0.9], &pos).unwrap().auc, 0.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            roc_binary(&[0.1, 0.2], &[true, true]),
            Err(MlError::SingleClassOnly(_))
        ));
        let scores = [[0.0; NUM_CLASSES]; 2];
        assert_eq!(
            roc(&scores, &[ClassLabel::Hubs, ClassLabel::Hubs], ClassLabel::Cameras),
            Err(MlError::SingleClassOnly(ClassLabel::Cameras))
        );
    }

    #[test]
    fn csv_rows() {
        let mut c = roc_binary(&[0.5, 0.25], &[true, false]).unwrap();
        c.class = Some(ClassLabel::Hubs);
        let mut out = Vec::new();
        c.write_csv_rows(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "2,inf,0,0\n2,0.5,0,1\n2,0.25,1,1\n"
        );
    }

    proptest! {
        #[test]
        fn auc_matches_concordance(
            rows in prop::collection::vec((0u8..12, any::<bool>()), 2..80)
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| f64::from(r.0) / 11.0).collect();
            let pos: Vec<bool> = rows.iter().map(|r| r.1).collect();
            prop_assume!(pos.iter().any(|&b| b) && pos.iter().any(|&b| !b));
            let c = roc_binary(&scores, &pos).unwrap();
            prop_assert!((c.auc - concordance(&scores, &pos)).abs() < 1e-9);
            for w in c.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
        }
    }
}
