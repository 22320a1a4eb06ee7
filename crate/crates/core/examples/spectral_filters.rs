//! Normalized Laplacian, largest eigenvalue and the Chebyshev basis on a
//! small weighted graph.

use graphmil::diffcore::Tensor;
use graphmil::graphcore::{cheb_basis, lambda_max, normalized_laplacian, scale_laplacian};

fn print_matrix(name: &str, t: &Tensor) {
    println!("{name} ({}x{}):", t.rows(), t.cols());
    for r in 0..t.rows() {
        let row: Vec<String> = t.row(r).iter().map(|v| format!("{v:7.3}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> graphmil::Result<()> {
    // A 4-node path with self-loops and one weak chord.
    let adj = Tensor::from_rows(&[
        &[1.0, 1.0, 0.0, 0.1],
        &[1.0, 1.0, 1.0, 0.0],
        &[0.0, 1.0, 1.0, 1.0],
        &[0.1, 0.0, 1.0, 1.0],
    ])?;
    let l = normalized_laplacian(&adj)?;
    print_matrix("L", &l);

    let est = lambda_max(&l, 1e-10, 500);
    println!(
        "lambda_max ~ {:.6} after {} iterations (converged: {})",
        est.value, est.iterations, est.converged
    );

    let l_scaled = scale_laplacian(&l, est.value)?;
    print_matrix("scaled L", &l_scaled);

    // A delta signal on node 0 spreads one hop per Chebyshev order.
    let signal = Tensor::col_vector(&[1.0, 0.0, 0.0, 0.0])?;
    for (k, z) in cheb_basis(&l_scaled, &signal, 4)?.iter().enumerate() {
        let values: Vec<String> = z.to_vec().iter().map(|v| format!("{v:7.3}")).collect();
        println!("T_{k}(L) x = [{}]", values.join(" "));
    }
    Ok(())
}
