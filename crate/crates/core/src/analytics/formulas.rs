use serde::Serialize;

use crate::error::DomainError;

/// Inputs of the reliability and cost model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticParams {
    /// Location-change rate (1/s).
    pub mu: f64,
    /// Packet arrival rate (1/s).
    pub lambda_rate: f64,
    /// Expected route length in hops.
    pub e_l: f64,
    /// Number of janitors.
    pub e_n: u32,
    /// Hops before the janitor.
    pub k: f64,
    /// Hops after the janitor.
    pub k_hat: f64,
    /// Hop budget for janitor routing and discovery.
    pub k_cap: u32,
    pub p_l: f64,
    pub p_js: f64,
    pub p_0: f64,
    pub p_s: f64,
    pub c_ls: f64,
    pub c_lf: f64,
    pub c_qd: f64,
    pub c_ru: f64,
    pub q: f64,
    pub z: f64,
}

impl Default for AnalyticParams {
    fn default() -> Self {
        Self {
            mu: 0.05,
            lambda_rate: 1.0,
            e_l: 4.0,
            e_n: 4,
            k: 1.0,
            k_hat: 1.0,
            k_cap: 3,
            p_l: 0.9,
            p_js: 0.8,
            p_0: 0.2,
            p_s: 0.8,
            c_ls: 1.0,
            c_lf: 1.0,
            c_qd: 1.0,
            c_ru: 1.0,
            q: 1.0,
            z: 1.0,
        }
    }
}

impl AnalyticParams {
    pub const KEYS: [&'static str; 17] = [
        "mu",
        "lambda_rate",
        "e_l",
        "e_n",
        "k",
        "k_hat",
        "k_cap",
        "p_l",
        "p_js",
        "p_0",
        "p_s",
        "c_ls",
        "c_lf",
        "c_qd",
        "c_ru",
        "q",
        "z",
    ];

    /// Sets one field by name from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DomainError> {
        let bad = || DomainError::Undefined(format!("invalid value `{value}` for `{key}`"));
        let real = || value.trim().parse::<f64>().map_err(|_| bad());
        let int = || value.trim().parse::<u32>().map_err(|_| bad());
        match key {
            "mu" => self.mu = real()?,
            "lambda_rate" => self.lambda_rate = real()?,
            "e_l" => self.e_l = real()?,
            "e_n" => self.e_n = int()?,
            "k" => self.k = real()?,
            "k_hat" => self.k_hat = real()?,
            "k_cap" => self.k_cap = int()?,
            "p_l" => self.p_l = real()?,
            "p_js" => self.p_js = real()?,
            "p_0" => self.p_0 = real()?,
            "p_s" => self.p_s = real()?,
            "c_ls" => self.c_ls = real()?,
            "c_lf" => self.c_lf = real()?,
            "c_qd" => self.c_qd = real()?,
            "c_ru" => self.c_ru = real()?,
            "q" => self.q = real()?,
            "z" => self.z = real()?,
            _ => return Err(DomainError::Undefined(format!("unknown parameter `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for (name, v) in [
            ("p_l", self.p_l),
            ("p_js", self.p_js),
            ("p_0", self.p_0),
            ("p_s", self.p_s),
        ] {
            probability(name, v)?;
        }
        for (name, v) in [
            ("mu", self.mu),
            ("lambda_rate", self.lambda_rate),
            ("k", self.k),
            ("k_hat", self.k_hat),
            ("c_ls", self.c_ls),
            ("c_lf", self.c_lf),
            ("c_qd", self.c_qd),
            ("c_ru", self.c_ru),
            ("q", self.q),
            ("z", self.z),
        ] {
            nonnegative(name, v)?;
        }
        if !(self.e_l >= 1.0 && self.e_l.is_finite()) {
            return Err(DomainError::Undefined(format!(
                "e_l = {} must be at least 1",
                self.e_l
            )));
        }
        if self.k + self.k_hat > 3.0 * self.e_l {
            return Err(DomainError::Undefined(format!(
                "k + k_hat = {} exceeds 3 * e_l = {}",
                self.k + self.k_hat,
                3.0 * self.e_l
            )));
        }
        Ok(())
    }
}

pub(crate) fn probability(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(DomainError::NotAProbability { name, value })
    }
}

pub(crate) fn nonnegative(name: &'static str, value: f64) -> Result<f64, DomainError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(DomainError::Negative { name, value })
    }
}

/// Probability that the route breaks before the next packet: the location
/// change (rate `mu`) wins the race against the arrival (rate `lambda_rate`).
pub fn p_route_broken(mu: f64, lambda_rate: f64) -> Result<f64, DomainError> {
    let f = "p_route_broken";
    nonnegative("mu", mu).map_err(|e| e.in_formula(f))?;
    nonnegative("lambda_rate", lambda_rate).map_err(|e| e.in_formula(f))?;
    if mu + lambda_rate == 0.0 {
        return Err(DomainError::Undefined("both rates are zero".into()).in_formula(f));
    }
    Ok(mu / (mu + lambda_rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessMode {
    /// `P_L + P_JS - (P_L or P_JS)` with the union expanded.
    Literal,
    /// `P_L * P_JS` for independent events.
    Conjunction,
}

impl SuccessMode {
    pub const ALL: [SuccessMode; 2] = [SuccessMode::Literal, SuccessMode::Conjunction];

    pub fn name(self) -> &'static str {
        match self {
            SuccessMode::Literal => "literal",
            SuccessMode::Conjunction => "conjunction",
        }
    }
}

/// Probability that the link hop and the janitor lookup both succeed.
pub fn p_routing_success(p_l: f64, p_js: f64, mode: SuccessMode) -> Result<f64, DomainError> {
    let f = "p_routing_success";
    probability("p_l", p_l).map_err(|e| e.in_formula(f))?;
    probability("p_js", p_js).map_err(|e| e.in_formula(f))?;
    let v = match mode {
        SuccessMode::Literal => {
            let union = p_l + p_js - p_l * p_js;
            p_l + p_js - union
        }
        SuccessMode::Conjunction => p_l * p_js,
    };
    Ok(v.clamp(0.0, 1.0))
}

fn attempt_denominator(e_l: f64, k: f64, k_hat: f64) -> Result<f64, DomainError> {
    let d = e_l + (e_l - k) + (e_l - k_hat);
    if d > 0.0 && d.is_finite() {
        Ok(d)
    } else {
        Err(DomainError::Undefined(format!(
            "3*e_l - k - k_hat = {d} is not positive"
        )))
    }
}

/// Successful deliveries per transmission attempt.
pub fn expected_success_ratio(p_s: f64, e_l: f64, k: f64, k_hat: f64) -> Result<f64, DomainError> {
    let f = "expected_success_ratio";
    probability("p_s", p_s).map_err(|e| e.in_formula(f))?;
    Ok(p_s / attempt_denominator(e_l, k, k_hat).map_err(|e| e.in_formula(f))?)
}

/// Failed deliveries per transmission attempt.
pub fn expected_failure_ratio(p_s: f64, e_l: f64, k: f64, k_hat: f64) -> Result<f64, DomainError> {
    let f = "expected_failure_ratio";
    probability("p_s", p_s).map_err(|e| e.in_formula(f))?;
    Ok((1.0 - p_s) / attempt_denominator(e_l, k, k_hat).map_err(|e| e.in_formula(f))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoutingCost {
    /// Weighted cost of the failure events.
    pub c_rf: f64,
    /// Cost of the successful transmissions.
    pub c_rs: f64,
    /// `z * c_rf * c_rs`.
    pub c_r: f64,
    /// The ratio form `z * c_rf * c_rs * P_L(1-P_s) / (P_s(1-P_L))`; `None`
    /// when `P_L = 1` or `P_s = 0`.
    pub c_r_ratio: Option<f64>,
}

pub fn routing_cost(p: &AnalyticParams) -> Result<RoutingCost, DomainError> {
    let f = "routing_cost";
    for (name, v) in [
        ("c_ls", p.c_ls),
        ("c_lf", p.c_lf),
        ("c_qd", p.c_qd),
        ("c_ru", p.c_ru),
        ("q", p.q),
        ("z", p.z),
        ("k", p.k),
        ("k_hat", p.k_hat),
        ("e_l", p.e_l),
    ] {
        nonnegative(name, v).map_err(|e| e.in_formula(f))?;
    }
    probability("p_l", p.p_l).map_err(|e| e.in_formula(f))?;
    probability("p_s", p.p_s).map_err(|e| e.in_formula(f))?;
    let c_rf = p.q * p.c_ls + p.q * p.c_lf + p.q * p.c_qd + p.q * p.c_ru;
    let c_rs = 3.0 * p.e_l * p.c_ls - p.c_ls * (p.k + p.k_hat);
    let c_r = p.z * c_rf * c_rs;
    let c_r_ratio =
        (p.p_l < 1.0 && p.p_s > 0.0).then(|| c_r * p.p_l * (1.0 - p.p_s) / (p.p_s * (1.0 - p.p_l)));
    Ok(RoutingCost {
        c_rf,
        c_rs,
        c_r,
        c_r_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JanitorVariant {
    /// `(1 - tau)^E_N`: every janitor fails.
    Literal,
    /// `1 - (1 - tau)^E_N`: some janitor finds the route.
    AtLeastOne,
}

impl JanitorVariant {
    pub const ALL: [JanitorVariant; 2] = [JanitorVariant::Literal, JanitorVariant::AtLeastOne];

    pub fn name(self) -> &'static str {
        match self {
            JanitorVariant::Literal => "literal",
            JanitorVariant::AtLeastOne => "at-least-one",
        }
    }
}

/// Chance that one janitor finds the route: three unbroken links.
pub fn janitor_tau(p_b: f64) -> Result<f64, DomainError> {
    probability("p_b", p_b)?;
    Ok((1.0 - p_b).powi(3))
}

pub fn p_janitor_route(p_b: f64, e_n: u32, variant: JanitorVariant) -> Result<f64, DomainError> {
    let f = "p_janitor_route";
    let tau = janitor_tau(p_b).map_err(|e| e.in_formula(f))?;
    if e_n < 1 {
        return Err(DomainError::Undefined("e_n must be at least 1".into()).in_formula(f));
    }
    let all_fail = (1.0 - tau).powi(e_n as i32);
    Ok(match variant {
        JanitorVariant::Literal => all_fail,
        JanitorVariant::AtLeastOne => 1.0 - all_fail,
    })
}

/// `C(e_n, k_count) * tau^k_count * (1 - tau)^(e_n - k_count)`.
pub fn binomial_janitor_count(e_n: u32, tau: f64, k_count: u32) -> Result<f64, DomainError> {
    let f = "binomial_janitor_count";
    probability("tau", tau).map_err(|e| e.in_formula(f))?;
    if k_count > e_n {
        return Err(
            DomainError::Undefined(format!("k_count = {k_count} exceeds e_n = {e_n}"))
                .in_formula(f),
        );
    }
    Ok(binomial_coefficient(e_n, k_count)
        * tau.powi(k_count as i32)
        * (1.0 - tau).powi((e_n - k_count) as i32))
}

fn binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscoveryOutcome {
    /// Self diagnosis fails on all `K` hops.
    pub p_f0: f64,
    /// All `E_N` janitors fail on all `K` hops.
    pub p_f1: f64,
    /// `1 - p_f0 * p_f1`.
    pub p_r: f64,
}

pub fn p_discovery_success(
    p_0: f64,
    k_cap: u32,
    e_n: u32,
) -> Result<DiscoveryOutcome, DomainError> {
    let f = "p_discovery_success";
    probability("p_0", p_0).map_err(|e| e.in_formula(f))?;
    if k_cap < 1 {
        return Err(DomainError::Undefined("k_cap must be at least 1".into()).in_formula(f));
    }
    let miss = 1.0 - p_0;
    let p_f0 = miss.powf(f64::from(k_cap));
    let p_f1 = miss.powf(f64::from(k_cap) * f64::from(e_n));
    Ok(DiscoveryOutcome {
        p_f0,
        p_f1,
        p_r: 1.0 - p_f0 * p_f1,
    })
}

/// Two-term decomposition of end-to-end success: no link fails, or exactly
/// one of `links` fails and recovery works.
pub fn packet_success_terms(
    link_failure: f64,
    links: u32,
    recovery: f64,
) -> Result<f64, DomainError> {
    probability("link_failure", link_failure)?;
    probability("recovery", recovery)?;
    let ok = 1.0 - link_failure;
    let n = links as i32;
    let one = if links == 0 {
        0.0
    } else {
        f64::from(links) * link_failure * ok.powi(n - 1)
    };
    Ok(ok.powi(n) + one * recovery)
}
