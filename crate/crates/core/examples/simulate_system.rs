//! Simulate the second-order benchmark under PRBS excitation with a
//! disturbed input measurement, and compare the FIR simulation with the
//! truncated impulse response.

use regkit::lti::{disturb, impulse_response, prbs, simulate, TransferFunction};

fn main() -> regkit::Result<()> {
    let tf = TransferFunction::bench2();
    let g = impulse_response(&tf, 80)?;
    println!("bench2 impulse response, first 5 taps: {:?}", &g.as_vector().as_slice()[..5]);

    let u = prbs(127, 7);
    let y = simulate(g.as_vector().as_slice(), &u);
    let (v, d) = disturb(&u, 0.1, 11)?;
    let d_norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("samples: {}, output energy: {:.4}, disturbance norm: {:.4}", y.len(), y.iter().map(|x| x * x).sum::<f64>(), d_norm);
    println!("measured input starts {:?}", &v[..3]);
    Ok(())
}
