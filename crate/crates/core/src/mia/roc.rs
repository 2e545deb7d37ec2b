use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// False-positive budgets at which attack power is reported.
pub const FPR_GRID: [f64; 3] = [0.001, 0.005, 0.01];

/// ROC points from `(0, 0)` to `(1, 1)`, one per distinct score threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
}

/// Sweeps the threshold down through every distinct score; tied scores enter
/// together. Higher scores predict membership.
pub fn roc(scores: &[f64], members: &[bool]) -> Result<RocCurve> {
    if scores.len() != members.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            members.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite attack score {bad}")));
    }
    let pos = members.iter().filter(|&&m| m).count();
    let neg = members.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidParameter("ROC needs both members and non-members".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = RocCurve {
        fpr: vec![0.0],
        tpr: vec![0.0],
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if members[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.fpr.push(fp as f64 / neg as f64);
        curve.tpr.push(tp as f64 / pos as f64);
    }
    Ok(curve)
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.fpr
            .windows(2)
            .zip(self.tpr.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * (t[0] + t[1]) / 2.0)
            .sum()
    }

    /// Largest TPR among points whose FPR does not exceed `budget`.
    pub fn tpr_at(&self, budget: f64) -> f64 {
        self.fpr
            .iter()
            .zip(&self.tpr)
            .filter(|(&f, _)| f <= budget)
            .map(|(_, &t)| t)
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (f, t) in self.fpr.iter().zip(&self.tpr) {
            out.push_str(&format!("{f},{t}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_worked_sweep() {
        let c = roc(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((c.auc() - 0.75).abs() < 1e-15);
        assert_eq!(c.tpr_at(0.4), 0.5);
    }

    #[test]
    fn perfect_and_inverted() {
        let members = [true, true, false, false];
        let c = roc(&[4.0, 3.0, 2.0, 1.0], &members).unwrap();
        assert_eq!(c.auc(), 1.0);
        assert_eq!(c.tpr_at(0.001), 1.0);
        let c = roc(&[1.0, 2.0, 3.0, 4.0], &members).unwrap();
        assert_eq!(c.auc(), 0.0);
    }

    #[test]
    fn ties_form_one_point() {
        let c = roc(&[1.0, 1.0, 1.0, 1.0], &[true, false, true, false]).unwrap();
        assert_eq!(c.fpr, vec![0.0, 1.0]);
        assert_eq!(c.auc(), 0.5);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(roc(&[1.0, 2.0], &[true, true]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_transform_invariant(
            data in prop::collection::vec((-50i32..50, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|&(s, _)| s as f64).collect();
            let mut members: Vec<bool> = data.iter().map(|&(_, m)| m).collect();
            members[0] = true;
            members[1] = false;
            let c = roc(&scores, &members).unwrap();
            prop_assert!(c.fpr.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.tpr.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.fpr.iter().chain(&c.tpr).all(|x| (0.0..=1.0).contains(x)));
            let t: Vec<f64> = FPR_GRID.iter().map(|&f| c.tpr_at(f)).collect();
            prop_assert!(t[0] <= t[1] && t[1] <= t[2]);

            let warped: Vec<f64> = scores.iter().map(|s| (s / 10.0).exp() + 3.0).collect();
            let w = roc(&warped, &members).unwrap();
            prop_assert!((w.auc() - c.auc()).abs() < 1e-12);
        }
    }
}
