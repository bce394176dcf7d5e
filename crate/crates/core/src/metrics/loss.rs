//! Class-balanced binary cross entropy with per-patch weights.
//!
//! For one class with truth `t` and prediction `p` over `N` voxels:
//!
//! ```text
//! w_fg = 1 / Σ t            w_bg = 1 / Σ (1 - t)
//! loss = (1/N) Σ (w_fg·t + w_bg·(1 - t)) · BCE(t, p)
//! BCE  = -[t·ln p + (1 - t)·ln(1 - p)]
//! ```
//!
//! Predictions are clamped to `[EPSILON, 1 - EPSILON]`. Several classes are
//! combined by averaging their losses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::volume::ScalarVolume;

pub const EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassLoss {
    pub name: String,
    pub loss: f64,
    pub w_fg: f64,
    pub w_bg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub classes: Vec<ClassLoss>,
    pub mean: f64,
}

fn weights(name: &str, truth: &[f64]) -> Result<(f64, f64)> {
    let mut fg = 0.0;
    let mut bg = 0.0;
    for &t in truth {
        if t != 0.0 && t != 1.0 {
            return Err(Error::NonBinaryTruth {
                class: name.to_string(),
                value: t as f32,
            });
        }
        fg += t;
        bg += 1.0 - t;
    }
    if fg == 0.0 {
        return Err(Error::DegenerateClass {
            class: name.to_string(),
            which: "foreground",
        });
    }
    if bg == 0.0 {
        return Err(Error::DegenerateClass {
            class: name.to_string(),
            which: "background",
        });
    }
    Ok((1.0 / fg, 1.0 / bg))
}

#[inline]
fn clamp(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

#[inline]
fn bce(t: f64, p: f64) -> f64 {
    let p = clamp(p);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Weighted per-voxel terms `(w_fg·t + w_bg·(1 - t)) · BCE(t, p)` of one class.
pub fn weighted_bce_terms(name: &str, truth: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    check_len(truth, pred)?;
    let (w_fg, w_bg) = weights(name, truth)?;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| (w_fg * t + w_bg * (1.0 - t)) * bce(t, p))
        .collect())
}

fn check_len(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    Ok(())
}

/// Loss of one class.
pub fn class_loss(name: &str, truth: &[f64], pred: &[f64]) -> Result<ClassLoss> {
    check_len(truth, pred)?;
    let (w_fg, w_bg) = weights(name, truth)?;
    let sum: f64 = truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| (w_fg * t + w_bg * (1.0 - t)) * bce(t, p))
        .sum();
    Ok(ClassLoss {
        name: name.to_string(),
        loss: sum / truth.len() as f64,
        w_fg,
        w_bg,
    })
}

/// Derivative of [`class_loss`] with respect to each prediction. Zero where
/// the prediction is clamped.
pub fn class_loss_gradient(name: &str, truth: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    check_len(truth, pred)?;
    let (w_fg, w_bg) = weights(name, truth)?;
    let n = truth.len() as f64;
    Ok(truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| {
            if p <= EPSILON || p >= 1.0 - EPSILON {
                return 0.0;
            }
            let w = w_fg * t + w_bg * (1.0 - t);
            w * (-t / p + (1.0 - t) / (1.0 - p)) / n
        })
        .collect())
}

/// Per-class losses and their mean.
pub fn weighted_bce_report(
    names: &[String],
    truth: &[ScalarVolume],
    pred: &[ScalarVolume],
) -> Result<LossReport> {
    if truth.len() != pred.len() || truth.len() != names.len() || truth.is_empty() {
        return Err(Error::InvalidParameter {
            name: "classes",
            reason: format!(
                "{} names, {} truth maps and {} predictions",
                names.len(),
                truth.len(),
                pred.len()
            ),
        });
    }
    let mut classes = Vec::with_capacity(truth.len());
    for ((name, t), p) in names.iter().zip(truth).zip(pred) {
        t.dims().ensure_same(&p.dims())?;
        let tv: Vec<f64> = t.data().iter().map(|&v| v as f64).collect();
        let pv: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
        classes.push(class_loss(name, &tv, &pv)?);
    }
    let mean = classes.iter().map(|c| c.loss).sum::<f64>() / classes.len() as f64;
    Ok(LossReport { classes, mean })
}

/// Mean weighted loss over classes, with classes named by index.
pub fn weighted_bce_loss(truth: &[ScalarVolume], pred: &[ScalarVolume]) -> Result<f64> {
    let names: Vec<String> = (0..truth.len()).map(|i| format!("class{i}")).collect();
    Ok(weighted_bce_report(&names, truth, pred)?.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;

    #[test]
    fn unit_contribution_at_inverse_e() {
        let e = std::f64::consts::E;
        let terms = weighted_bce_terms("c", &[1.0, 0.0], &[1.0 / e, 1.0 - 1.0 / e]).unwrap();
        assert!((terms[0] - 1.0).abs() < 1e-12);
        assert!((terms[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let t = [1.0, 0.0, 0.0, 1.0, 0.0];
        let l = class_loss("c", &t, &t).unwrap();
        // Each clamped term is at most -ln(1 - 1e-7) ~ 1e-7 times a weight <= 1.
        assert!(l.loss < 2e-7);
    }

    #[test]
    fn doubling_foreground_halves_weight() {
        let a = class_loss("c", &[1.0, 0.0, 0.0, 0.0], &[0.5; 4]).unwrap();
        let b = class_loss("c", &[1.0, 1.0, 0.0, 0.0], &[0.5; 4]).unwrap();
        assert_eq!(a.w_fg, 1.0);
        assert_eq!(b.w_fg, 0.5);
        assert_eq!(a.w_bg, 1.0 / 3.0);
    }

    #[test]
    fn degenerate_classes_are_errors() {
        assert!(matches!(
            class_loss("membrane", &[0.0, 0.0], &[0.5, 0.5]),
            Err(Error::DegenerateClass { which: "foreground", .. })
        ));
        assert!(matches!(
            class_loss("seed", &[1.0], &[0.5]),
            Err(Error::DegenerateClass { which: "background", .. })
        ));
        assert!(matches!(
            class_loss("seed", &[0.5, 1.0], &[0.5, 0.5]),
            Err(Error::NonBinaryTruth { .. })
        ));
    }

    #[test]
    fn volume_api_averages_classes() {
        let d = Dims::new(2, 1, 1).unwrap();
        let t = ScalarVolume::from_vec(d, vec![1.0, 0.0]).unwrap();
        let p1 = ScalarVolume::from_vec(d, vec![0.5, 0.5]).unwrap();
        let p2 = ScalarVolume::from_vec(d, vec![0.9, 0.1]).unwrap();
        let r = weighted_bce_report(&["a".into(), "b".into()], &[t.clone(), t.clone()], &[p1, p2]).unwrap();
        let expect_a = 2.0f64.ln();
        let expect_b = -(0.9f32 as f64).ln();
        assert!((r.classes[0].loss - expect_a).abs() < 1e-12);
        assert!((r.classes[1].loss - expect_b).abs() < 1e-7);
        assert!((r.mean - (r.classes[0].loss + r.classes[1].loss) / 2.0).abs() < 1e-15);
    }
}
