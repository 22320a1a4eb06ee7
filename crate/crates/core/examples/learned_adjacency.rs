//! The adjacency learner turns a bag of instances into a dense weighted
//! graph. Reordering the instances reorders the graph the same way.

use graphmil::diffcore::{ParamStore, Rng, Tensor};
use graphmil::layers::{AdjacencyLearner, ContextMode};

fn main() -> graphmil::Result<()> {
    let mut rng = Rng::new(3);
    let (n, d) = (5, 8);
    let rows: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    let x = Tensor::constant(n, d, rows.clone())?;

    let mut store = ParamStore::new();
    let learner = AdjacencyLearner::new(&mut store, "adj", d, 16, 8, ContextMode::Mean, true, &mut rng)?;
    let a = learner.forward(&x)?;
    println!("adjacency for {n} instances:");
    for r in 0..n {
        let row: Vec<String> = a.row(r).iter().map(|v| format!("{v:.4}")).collect();
        println!("  {}", row.join(" "));
    }

    let order = [3, 0, 4, 1, 2];
    let permuted: Vec<f64> = order.iter().flat_map(|&i| rows[i * d..(i + 1) * d].to_vec()).collect();
    let a_perm = learner.forward(&Tensor::constant(n, d, permuted)?)?;
    let mut worst: f64 = 0.0;
    for (i, &pi) in order.iter().enumerate() {
        for (j, &pj) in order.iter().enumerate() {
            worst = worst.max((a_perm.get(i, j) - a.get(pi, pj)).abs());
        }
    }
    println!("max |A(PX) - P A(X) P^T| = {worst:.3e}");
    Ok(())
}
