//! Gaussian RBF interpolation of a family of small tensors in one parameter,
//! comparing both kernel forms between the nodes.
//!
//! ```bash
//! cargo run --example rbf_interpolation
//! ```

use xdiff::rom::{fit_rbf, kernel_width, rbf_evaluate, KernelForm};
use xdiff::tensor::DenseTensor;

fn family(theta: f64) -> DenseTensor {
    DenseTensor::from_fn(&[3, 2], |i| ((i[0] + 1) as f64 * theta).sin() + i[1] as f64 * theta * theta)
        .expect("valid dims")
}

fn main() -> xdiff::Result<()> {
    let thetas = [19.0, 20.0, 21.0, 22.0, 23.0];
    let rho = kernel_width(&thetas);
    let cores: Vec<_> = thetas.iter().map(|&t| family(t / 10.0)).collect();
    println!("rho = {rho}");
    for kernel in [KernelForm::DivideByWidth, KernelForm::MultiplyByWidth] {
        let gamma = fit_rbf(&cores, &thetas, rho, kernel)?;
        println!("\n{kernel:?}");
        for theta in [19.0, 20.5, 21.5, 22.0, 23.0] {
            let approx = rbf_evaluate(&gamma, &thetas, rho, kernel, theta)?;
            let exact = family(theta / 10.0);
            let rel = approx.sub(&exact)?.frobenius_norm() / exact.frobenius_norm();
            println!("  theta = {theta:>5}: relative error {rel:.2e}");
        }
    }
    Ok(())
}
