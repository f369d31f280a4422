use std::collections::BTreeMap;

use crate::corpus::SpoilerType;
use crate::error::{Error, Result};

fn check_lengths(preds: &[SpoilerType], gold: &[SpoilerType]) -> Result<()> {
    if preds.len() != gold.len() {
        return Err(Error::invalid(format!("{} predictions for {} gold labels", preds.len(), gold.len())));
    }
    Ok(())
}

/// Fraction of positions where prediction equals gold.
pub fn accuracy(preds: &[SpoilerType], gold: &[SpoilerType]) -> Result<f64> {
    check_lengths(preds, gold)?;
    if gold.is_empty() {
        return Err(Error::invalid("accuracy of an empty sample"));
    }
    let correct = preds.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold.len() as f64)
}

/// `m[gold][pred]` counts.
pub fn confusion_matrix(preds: &[SpoilerType], gold: &[SpoilerType]) -> Result<[[usize; 3]; 3]> {
    check_lengths(preds, gold)?;
    let mut m = [[0usize; 3]; 3];
    for (p, g) in preds.iter().zip(gold) {
        m[g.code()][p.code()] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroF1 {
    pub macro_f1: f64,
    pub per_class: BTreeMap<SpoilerType, f64>,
}

/// Unweighted mean of per-class F1 over all three classes. A class with no
/// true positives (including one never predicted nor present) scores 0.
pub fn macro_f1(preds: &[SpoilerType], gold: &[SpoilerType]) -> Result<MacroF1> {
    let m = confusion_matrix(preds, gold)?;
    let mut per_class = BTreeMap::new();
    for t in SpoilerType::ALL {
        let k = t.code();
        let tp = m[k][k] as f64;
        let predicted: usize = (0..3).map(|g| m[g][k]).sum();
        let actual: usize = m[k].iter().sum();
        let f1 = if tp == 0.0 {
            0.0
        } else {
            let p = tp / predicted as f64;
            let r = tp / actual as f64;
            2.0 * p * r / (p + r)
        };
        per_class.insert(t, f1);
    }
    let macro_f1 = per_class.values().sum::<f64>() / 3.0;
    Ok(MacroF1 { macro_f1, per_class })
}
