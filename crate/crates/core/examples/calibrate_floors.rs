//! Measures the self-distance noise floors frozen in the acceptance suite.
//!
//! For each 2D setup and blend value, draws pairs of independent reference
//! sets of the test's size and averages their sliced Wasserstein distance.
//!
//! ```text
//! cargo run --release -p iadb --example calibrate_floors
//! ```

use iadb::densities::Density;
use iadb::eval::{blended_reference, sliced_wasserstein, wasserstein1_1d};
use iadb::presets;
use iadb::SeedStreams;

const SAMPLES_2D: usize = 10_000;
const PROJECTIONS: usize = 256;
const REPEATS: u64 = 8;
const ALPHAS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

fn main() {
    let streams = SeedStreams::new(0xF100);
    let setups: [(&str, Density, Density); 2] = [
        ("GAUSSIAN_TO_SCURVE", presets::standard_normal_2d(), presets::scurve()),
        ("SWISS_ROLL_TO_SCURVE", presets::swiss_roll(), presets::scurve()),
    ];
    for (name, p0, p1) in &setups {
        let mut floors = Vec::new();
        for (k, &alpha) in ALPHAS.iter().enumerate() {
            let mut total = 0.0;
            for r in 0..REPEATS {
                let idx = k as u64 * 100 + r;
                let a = blended_reference(p0, p1, alpha, SAMPLES_2D, &mut streams.substream(&format!("{name}-a"), idx))
                    .expect("reference");
                let b = blended_reference(p0, p1, alpha, SAMPLES_2D, &mut streams.substream(&format!("{name}-b"), idx))
                    .expect("reference");
                total += sliced_wasserstein(&a, &b, PROJECTIONS, &mut streams.substream("directions", idx))
                    .expect("sliced distance");
            }
            floors.push(total / REPEATS as f64);
        }
        let body: Vec<String> = floors.iter().map(|f| format!("{f:.5}")).collect();
        println!("const FLOOR_{name}: [f64; 4] = [{}];", body.join(", "));
    }

    // 1D self-distance at the sizes used by the 1D criteria, for reference.
    let (_, g1) = presets::normal_to_bimodal();
    let p1 = Density::Mixture(g1);
    let mut total = 0.0;
    for r in 0..REPEATS {
        let a: Vec<f64> = p1.sample(100_000, &mut streams.substream("w1-a", r)).iter().map(|p| p[0]).collect();
        let b: Vec<f64> = p1.sample(100_000, &mut streams.substream("w1-b", r)).iter().map(|p| p[0]).collect();
        total += wasserstein1_1d(&a, &b).expect("w1");
    }
    println!("// 1D W1 self-distance at 1e5 samples (bimodal target): {:.5}", total / REPEATS as f64);
}
