use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::temporal::Tick;

/// Random stream used for mainline arrivals; ramp arrivals use the next one.
pub const MAINLINE_STREAM: u64 = 1;
pub const RAMP_STREAM: u64 = 2;

/// Arrival ticks in `[0, duration)` for a Poisson-like stream of `rate` veh/h.
///
/// Headways are `min_headway + Exp`, with the exponential's mean reduced by
/// `min_headway` so the long-run rate stays `rate`. Rates whose mean headway
/// is below `min_headway` degrade to evenly spaced arrivals at `min_headway`.
pub fn generate_demand(
    rate: f64,
    duration: Tick,
    dt: f64,
    min_headway: f64,
    seed: u64,
    stream: u64,
) -> Vec<Tick> {
    if rate <= 0.0 || duration <= 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mean = 3600.0 / rate;
    let spread = (mean - min_headway).max(0.0);
    let exp = (spread > 0.0).then(|| Exp::new(1.0 / spread).expect("positive rate"));
    let horizon = duration as f64 * dt;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += min_headway + exp.as_ref().map_or(0.0, |e| e.sample(&mut rng));
        if t >= horizon {
            break;
        }
        out.push((t / dt).floor() as Tick);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_empty() {
        assert!(generate_demand(0.0, 36_000, 0.1, 0.3, 1, MAINLINE_STREAM).is_empty());
    }

    #[test]
    fn same_seed_same_list() {
        let a = generate_demand(900.0, 10_000, 0.1, 0.3, 7, RAMP_STREAM);
        let b = generate_demand(900.0, 10_000, 0.1, 0.3, 7, RAMP_STREAM);
        assert_eq!(a, b);
        assert_ne!(a, generate_demand(900.0, 10_000, 0.1, 0.3, 8, RAMP_STREAM));
        assert_ne!(
            a,
            generate_demand(900.0, 10_000, 0.1, 0.3, 7, MAINLINE_STREAM)
        );
    }

    #[test]
    fn headways_respect_the_minimum() {
        let ticks = generate_demand(3000.0, 36_000, 0.1, 0.5, 3, MAINLINE_STREAM);
        // floor to ticks can shave at most one tick off a headway
        assert!(ticks.windows(2).all(|w| w[1] - w[0] >= 4));
        assert!(ticks.iter().all(|t| (0..36_000).contains(t)));
    }

    #[test]
    fn saturated_rates_become_regular() {
        let ticks = generate_demand(36_000.0, 1_000, 0.1, 0.5, 3, MAINLINE_STREAM);
        assert_eq!(ticks.len(), 199);
    }
}
