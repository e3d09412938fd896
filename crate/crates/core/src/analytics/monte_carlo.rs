use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use super::formulas::{probability, JanitorVariant};
use crate::error::DomainError;

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const MIN_TRIALS: u64 = 1_000;

/// A Monte Carlo proportion with its 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub half_width: f64,
    pub trials: u64,
}

impl Estimate {
    fn from_hits(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Estimate {
            estimate: p,
            half_width: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            trials,
        }
    }

    pub fn contains(&self, value: f64, tolerance: f64) -> bool {
        (self.estimate - value).abs() <= tolerance
    }
}

fn count_hits(
    trials: u64,
    seed: u64,
    mut trial: impl FnMut(&mut ChaCha8Rng) -> bool,
) -> Result<Estimate, DomainError> {
    if trials < MIN_TRIALS {
        return Err(DomainError::Undefined(format!(
            "{trials} trials is below the minimum of {MIN_TRIALS}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..trials).filter(|_| trial(&mut rng)).count() as u64;
    Ok(Estimate::from_hits(hits, trials))
}

/// Races an exponential break time against an exponential arrival time and
/// counts how often the break comes first.
pub fn route_broken_mc(
    mu: f64,
    lambda_rate: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate, DomainError> {
    let f = "route_broken_mc";
    if !(mu >= 0.0 && lambda_rate >= 0.0) || mu + lambda_rate == 0.0 {
        return Err(
            DomainError::Undefined(format!("rates mu = {mu}, lambda = {lambda_rate}"))
                .in_formula(f),
        );
    }
    let exp =
        |rate: f64| Exp::new(rate).map_err(|e| DomainError::Undefined(e.to_string()).in_formula(f));
    let (brk, arrive) = (exp(mu)?, exp(lambda_rate)?);
    count_hits(trials, seed, |rng| brk.sample(rng) < arrive.sample(rng))
        .map_err(|e| e.in_formula(f))
}

/// Two independent Bernoulli draws, both succeeding.
pub fn routing_success_mc(
    p_l: f64,
    p_js: f64,
    trials: u64,
    seed: u64,
) -> Result<Estimate, DomainError> {
    let f = "routing_success_mc";
    probability("p_l", p_l).map_err(|e| e.in_formula(f))?;
    probability("p_js", p_js).map_err(|e| e.in_formula(f))?;
    count_hits(trials, seed, |rng| {
        let link = rng.random_bool(p_l);
        let janitor = rng.random_bool(p_js);
        link && janitor
    })
    .map_err(|e| e.in_formula(f))
}

/// Each of `e_n` janitors needs three links that stay up, each broken with
/// probability `p_b`.
pub fn janitor_route_mc(
    p_b: f64,
    e_n: u32,
    variant: JanitorVariant,
    trials: u64,
    seed: u64,
) -> Result<Estimate, DomainError> {
    let f = "janitor_route_mc";
    probability("p_b", p_b).map_err(|e| e.in_formula(f))?;
    count_hits(trials, seed, |rng| {
        let mut any = false;
        for _ in 0..e_n {
            let found = (0..3).all(|_| !rng.random_bool(p_b));
            any |= found;
        }
        match variant {
            JanitorVariant::Literal => !any,
            JanitorVariant::AtLeastOne => any,
        }
    })
    .map_err(|e| e.in_formula(f))
}

/// `k_cap * (1 + e_n)` independent attempts, any of which may succeed.
pub fn discovery_success_mc(
    p_0: f64,
    k_cap: u32,
    e_n: u32,
    trials: u64,
    seed: u64,
) -> Result<Estimate, DomainError> {
    let f = "discovery_success_mc";
    probability("p_0", p_0).map_err(|e| e.in_formula(f))?;
    let attempts = u64::from(k_cap) * (1 + u64::from(e_n));
    count_hits(trials, seed, |rng| {
        let mut hit = false;
        for _ in 0..attempts {
            hit |= rng.random_bool(p_0);
        }
        hit
    })
    .map_err(|e| e.in_formula(f))
}

/// What a packet sees on its way: `links` hops, each failing independently,
/// and one recovery attempt after a single failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketPath {
    pub link_failure: f64,
    pub links: u32,
    pub recovery: f64,
}

/// Delivery succeeds when no link fails, or exactly one fails and the
/// recovery then succeeds.
pub fn packet_success_mc(
    path: PacketPath,
    trials: u64,
    seed: u64,
) -> Result<Estimate, DomainError> {
    let f = "packet_success_mc";
    probability("link_failure", path.link_failure).map_err(|e| e.in_formula(f))?;
    probability("recovery", path.recovery).map_err(|e| e.in_formula(f))?;
    count_hits(trials, seed, |rng| {
        let failures = (0..path.links)
            .filter(|_| rng.random_bool(path.link_failure))
            .count();
        match failures {
            0 => true,
            1 => rng.random_bool(path.recovery),
            _ => false,
        }
    })
    .map_err(|e| e.in_formula(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_trials_rejected() {
        assert!(routing_success_mc(0.5, 0.5, 999, 1).is_err());
        assert!(routing_success_mc(0.5, 0.5, 1000, 1).is_ok());
    }

    #[test]
    fn fixed_seed_repeats() {
        let a = route_broken_mc(1.0, 3.0, 10_000, 7).unwrap();
        let b = route_broken_mc(1.0, 3.0, 10_000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_paths() {
        let sure = PacketPath {
            link_failure: 0.0,
            links: 4,
            recovery: 0.5,
        };
        assert_eq!(packet_success_mc(sure, 1000, 3).unwrap().estimate, 1.0);
        assert_eq!(route_broken_mc(0.0, 1.0, 1000, 3).unwrap().estimate, 0.0);
    }
}
