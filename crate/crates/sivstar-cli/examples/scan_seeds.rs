//! Quick scan over master seeds: spectral abscissa of the base (m = 1)
//! instance decides the sign of the expanded model's abscissa.

use sivstar::graph::Graph;
use sivstar::model::{Model, ParamRanges};
use sivstar::stability;
use sivstar::stats::derive_seed;

fn main() {
    let ranges = ParamRanges {
        delta: (0.1, 0.4),
        epsilon: (0.0, 0.0),
        mu: (0.0, 0.0),
        gamma: (0.2, 0.7),
        theta: (0.3, 0.8),
        beta: (0.1, 0.4),
    };
    let args: Vec<String> = std::env::args().collect();
    let lo: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let hi: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5000);
    let mut best = f64::INFINITY;
    for seed in lo..hi {
        let Ok((graph, _)) =
            Graph::erdos_renyi_strongly_connected(20, 0.15, derive_seed(seed, 0), 1000)
        else {
            continue;
        };
        let base = Model::sample_from_ranges(graph, 1, 1, &ranges, derive_seed(seed, 3)).unwrap();
        let ystar = stability::vigilant_equilibrium(&base).unwrap();
        let qxx = stability::assemble_qxx(&base, &ystar);
        let lambda = stability::spectral_abscissa(&qxx, 1e-6, 2_000_000).unwrap();
        if lambda < best {
            best = lambda;
            println!("seed {seed:9}  base lambda_qxx {lambda:+.4}");
        } else if lambda <= -0.10 {
            println!("seed {seed:9}  base lambda_qxx {lambda:+.4}  (candidate)");
        }
        if seed % 1_000_000 == 999_999 {
            eprintln!("... scanned through {seed}");
        }
    }
}
