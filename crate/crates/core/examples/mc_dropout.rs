//! Fit a small dropout network to noisy data and read its MC-dropout
//! predictive mean and variance.

use perishable_dynaq::{Adam, Head, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> perishable_dynaq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // y = sin(3x) + noise on x in [-1, 1].
    let xs: Vec<Vec<f64>> = (0..256).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| vec![(3.0 * x[0]).sin() + rng.gen_range(-0.1..0.1)])
        .collect();

    let mut net = Network::new(&[1, 64, 64, 1], 0.1, Head::Regression, &mut rng)?;
    let mut adam = Adam::new(&net, 0.005);
    for epoch in 0..400 {
        let loss = net.train_step(&mut adam, &xs, &ys, &mut rng)?;
        if epoch % 100 == 0 {
            println!("epoch {epoch:>3}  loss {loss:.4}");
        }
    }
    for x in [-0.8, 0.0, 0.5, 2.0] {
        let p = net.mc_predict(&[x], 200, &mut rng)?;
        println!(
            "x={x:>4}: mean {:.3} (truth {:.3}), std {:.3}",
            p.mean[0],
            (3.0f64 * x).sin(),
            p.variance[0].sqrt()
        );
    }
    Ok(())
}
