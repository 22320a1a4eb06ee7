//! Accuracy, ROC curve and AUC for a handful of scored bags, with the curve
//! written as CSV to stdout.

use graphmil::harness::{accuracy, roc_auc, write_roc_csv};

fn main() -> graphmil::Result<()> {
    let scores = [0.92, 0.81, 0.77, 0.64, 0.64, 0.52, 0.40, 0.33, 0.21, 0.08];
    let labels = [1, 1, 0, 1, 0, 1, 0, 0, 1, 0];

    println!("accuracy at 0.5: {:.2}", accuracy(&scores, &labels, 0.5)?);
    let roc = roc_auc(&scores, &labels)?;
    println!("auc: {:.4} ({} curve points)\n", roc.auc, roc.points.len());
    write_roc_csv(&roc, std::io::stdout().lock())
}
