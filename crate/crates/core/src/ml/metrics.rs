use serde::{Deserialize, Serialize};

use crate::model::{ClassLabel, NUM_CLASSES};

use super::MlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Mean over the classes present in the truths.
    pub macro_precision: f64,
    pub macro_f1: f64,
    /// Mean squared difference of class numbers.
    pub mse: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

pub fn evaluate(predictions: &[ClassLabel], truths: &[ClassLabel]) -> Result<EvalReport, MlError> {
    if predictions.len() != truths.len() || truths.is_empty() {
        return Err(MlError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut confusion = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    let mut sq = 0.0;
    for (p, t) in predictions.iter().zip(truths) {
        confusion[t.index()][p.index()] += 1;
        let d = f64::from(p.class_no()) - f64::from(t.class_no());
        sq += d * d;
    }
    let n = truths.len() as f64;
    let correct: u64 = (0..NUM_CLASSES).map(|c| confusion[c][c]).sum();

    let mut present = 0usize;
    let mut precision_sum = 0.0;
    let mut f1_sum = 0.0;
    for c in 0..NUM_CLASSES {
        let support: u64 = confusion[c].iter().sum();
        if support == 0 {
            continue;
        }
        present += 1;
        let tp = confusion[c][c] as f64;
        let predicted: u64 = (0..NUM_CLASSES).map(|t| confusion[t][c]).sum();
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = tp / support as f64;
        precision_sum += precision;
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(EvalReport {
        accuracy: correct as f64 / n,
        macro_precision: precision_sum / present as f64,
        macro_f1: f1_sum / present as f64,
        mse: sq / n,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ClassLabel::*;

    #[test]
    fn hand_computed_case() {
        let r = evaluate(&[Energy, Others, Others, Others], &[Energy, Energy, Others, Others]).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.mse, 6.25);
        // Energy: p = 1, r = 1/2, f1 = 2/3; Others: p = 2/3, r = 1, f1 = 4/5
        assert!((r.macro_precision - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
        assert_eq!(r.confusion[0][5], 1);
    }

    #[test]
    fn perfect_predictions() {
        let t = [Hubs, Cameras, Appliances];
        let r = evaluate(&t, &t).unwrap();
        assert_eq!((r.accuracy, r.macro_f1, r.mse), (1.0, 1.0, 0.0));
    }

    #[test]
    fn never_predicted_class_has_zero_precision() {
        let r = evaluate(&[Hubs, Hubs], &[Hubs, Cameras]).unwrap();
        // Hubs: p = 1/2, r = 1; Cameras: p = 0, r = 0
        assert_eq!(r.macro_precision, 0.25);
    }

    #[test]
    fn lengths_checked() {
        assert!(evaluate(&[Hubs], &[]).is_err());
        assert!(evaluate(&[], &[]).is_err());
    }
}
