//! Closed-form reliability and cost model, with Monte Carlo estimators that
//! check it or stand in for it.

mod formulas;
mod monte_carlo;

pub use formulas::{
    binomial_janitor_count, expected_failure_ratio, expected_success_ratio, janitor_tau,
    p_discovery_success, p_janitor_route, p_route_broken, p_routing_success, packet_success_terms,
    routing_cost, AnalyticParams, DiscoveryOutcome, JanitorVariant, RoutingCost, SuccessMode,
};
pub use monte_carlo::{
    discovery_success_mc, janitor_route_mc, packet_success_mc, route_broken_mc, routing_success_mc,
    Estimate, PacketPath, DEFAULT_TRIALS, MIN_TRIALS,
};

impl PacketPath {
    /// Per-link failure from the break race, route length rounded to whole
    /// links, recovery from route discovery.
    pub fn from_params(p: &AnalyticParams) -> Result<Self, crate::DomainError> {
        Ok(PacketPath {
            link_failure: p_route_broken(p.mu, p.lambda_rate)?,
            links: p.e_l.round() as u32,
            recovery: p_discovery_success(p.p_0, p.k_cap, p.e_n)?.p_r,
        })
    }
}
