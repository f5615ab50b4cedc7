//! Discretized Gamma demand for the three study variances.

use perishable_dynaq::DemandDistribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> perishable_dynaq::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for variance in [1.0, 3.0, 5.0] {
        let dist = DemandDistribution::discretized_gamma(5.0, variance, 10)?;
        let pmf: Vec<String> = dist.pmf().iter().map(|p| format!("{p:.3}")).collect();
        let draws: Vec<u32> = (0..15).map(|_| dist.sample(&mut rng)).collect();
        println!(
            "σ²={variance}: mean {:.3}, var {:.3}",
            dist.mean(),
            dist.variance()
        );
        println!("  pmf   [{}]", pmf.join(", "));
        println!("  draws {draws:?}");
    }
    Ok(())
}
