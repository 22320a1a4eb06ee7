//! Reverse-mode differentiation on small tensors: build an expression, call
//! `backward`, compare against central differences, then fit a line with Adam.

use graphmil::diffcore::{grad_check, Adam, AdamConfig, ParamStore, Rng, Tensor};

fn main() -> graphmil::Result<()> {
    // f(W) = sum(tanh(X W)^2)
    let x = Tensor::from_rows(&[&[1.0, -2.0], &[0.5, 0.25], &[-1.0, 3.0]])?;
    let w = Tensor::param(2, 1, vec![0.3, -0.1])?;
    let f = || Ok(x.matmul(&w)?.tanh().square().sum_all());
    let y = f()?;
    y.backward()?;
    println!("f = {:.6}", y.item());
    println!("df/dW = {:?}", w.grad());

    let report = grad_check(f, std::slice::from_ref(&w), None)?;
    println!(
        "central differences: max relative error {:.2e} over {} coordinates",
        report.max_rel_error, report.checked
    );

    // Least squares for y = 2x - 1 on noisy samples.
    let mut rng = Rng::new(7);
    let xs: Vec<f64> = (0..64).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0 + 0.05 * rng.normal()).collect();
    let inputs = Tensor::col_vector(&xs)?;
    let targets = Tensor::col_vector(&ys)?;

    let mut store = ParamStore::new();
    let slope = store.zeros("slope", 1, 1)?;
    let bias = store.zeros("bias", 1, 1)?;
    let mut adam = Adam::new(AdamConfig { lr: 0.05, ..AdamConfig::default() }, store.trainable());
    for step in 0..=300 {
        let pred = inputs.matmul(&slope)?.add(&bias)?;
        let loss = pred.sub(&targets)?.square().mean_rows();
        loss.backward()?;
        adam.step(store.trainable())?;
        if step % 100 == 0 {
            println!("step {step:3}: mse {:.5}", loss.item());
        }
    }
    println!("fitted slope {:.3}, bias {:.3}", slope.item(), bias.item());
    Ok(())
}
