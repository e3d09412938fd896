use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::analytics::{
    binomial_janitor_count, discovery_success_mc, expected_failure_ratio, expected_success_ratio,
    janitor_route_mc, janitor_tau, p_discovery_success, p_janitor_route, p_route_broken,
    p_routing_success, packet_success_mc, packet_success_terms, route_broken_mc, routing_cost,
    routing_success_mc, AnalyticParams, Estimate, JanitorVariant, PacketPath, SuccessMode,
};
use crate::error::DomainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Formula {
    RouteBroken,
    RoutingSuccess,
    SuccessRatio,
    FailureRatio,
    RoutingCost,
    JanitorRoute,
    JanitorCount,
    DiscoverySuccess,
    PacketSuccess,
}

impl Formula {
    pub const ALL: [Formula; 9] = [
        Formula::RouteBroken,
        Formula::RoutingSuccess,
        Formula::SuccessRatio,
        Formula::FailureRatio,
        Formula::RoutingCost,
        Formula::JanitorRoute,
        Formula::JanitorCount,
        Formula::DiscoverySuccess,
        Formula::PacketSuccess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formula::RouteBroken => "p_route_broken",
            Formula::RoutingSuccess => "p_routing_success",
            Formula::SuccessRatio => "expected_success_ratio",
            Formula::FailureRatio => "expected_failure_ratio",
            Formula::RoutingCost => "routing_cost",
            Formula::JanitorRoute => "p_janitor_route",
            Formula::JanitorCount => "binomial_janitor_count",
            Formula::DiscoverySuccess => "p_discovery_success",
            Formula::PacketSuccess => "p_packet_success",
        }
    }

    /// Whether the rows hold probabilities rather than ratios or costs.
    pub fn is_probability(self) -> bool {
        !matches!(self, Formula::RoutingCost)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formula {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formula::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| DomainError::Undefined(format!("unknown formula `{s}`")))
    }
}

/// Monte Carlo settings for the check columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub trials: u64,
    pub seed: u64,
}

/// One CSV row: the inputs, the formula and variant, and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub formula: &'static str,
    pub variant: String,
    pub params: AnalyticParams,
    pub value: Option<f64>,
    pub mc_estimate: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub mc_trials: Option<u64>,
    pub note: String,
}

impl AnalyticRow {
    fn new(
        formula: Formula,
        variant: impl Into<String>,
        params: &AnalyticParams,
        value: f64,
    ) -> Self {
        AnalyticRow {
            formula: formula.name(),
            variant: variant.into(),
            params: *params,
            value: Some(value),
            mc_estimate: None,
            mc_half_width: None,
            mc_trials: None,
            note: String::new(),
        }
    }

    fn with_mc(mut self, e: Estimate) -> Self {
        self.mc_estimate = Some(e.estimate);
        self.mc_half_width = Some(e.half_width);
        self.mc_trials = Some(e.trials);
        self
    }
}

/// Evaluates each selected formula on `params`, one row per variant.
pub fn evaluate_analytics(
    params: &AnalyticParams,
    selections: &[Formula],
    mc: Option<McSettings>,
) -> Result<Vec<AnalyticRow>, DomainError> {
    params.validate()?;
    let mut rows = Vec::new();
    for &f in selections {
        rows.extend(evaluate_one(params, f, mc)?);
    }
    Ok(rows)
}

fn evaluate_one(
    p: &AnalyticParams,
    f: Formula,
    mc: Option<McSettings>,
) -> Result<Vec<AnalyticRow>, DomainError> {
    let p_b = p_route_broken(p.mu, p.lambda_rate)?;
    let rows = match f {
        Formula::RouteBroken => {
            let mut row = AnalyticRow::new(f, "", p, p_b);
            if let Some(m) = mc {
                row = row.with_mc(route_broken_mc(p.mu, p.lambda_rate, m.trials, m.seed)?);
            }
            vec![row]
        }
        Formula::RoutingSuccess => {
            let check = mc
                .map(|m| routing_success_mc(p.p_l, p.p_js, m.trials, m.seed))
                .transpose()?;
            SuccessMode::ALL
                .into_iter()
                .map(|mode| {
                    let row = AnalyticRow::new(
                        f,
                        mode.name(),
                        p,
                        p_routing_success(p.p_l, p.p_js, mode)?,
                    );
                    Ok(match check {
                        Some(e) => row.with_mc(e),
                        None => row,
                    })
                })
                .collect::<Result<_, DomainError>>()?
        }
        Formula::SuccessRatio => vec![AnalyticRow::new(
            f,
            "",
            p,
            expected_success_ratio(p.p_s, p.e_l, p.k, p.k_hat)?,
        )],
        Formula::FailureRatio => vec![AnalyticRow::new(
            f,
            "",
            p,
            expected_failure_ratio(p.p_s, p.e_l, p.k, p.k_hat)?,
        )],
        Formula::RoutingCost => {
            let c = routing_cost(p)?;
            let mut ratio = AnalyticRow::new(f, "c_r_ratio", p, 0.0);
            ratio.value = c.c_r_ratio;
            if c.c_r_ratio.is_none() {
                ratio.note = "undefined: needs p_l < 1 and p_s > 0".into();
            }
            vec![
                AnalyticRow::new(f, "c_rf", p, c.c_rf),
                AnalyticRow::new(f, "c_rs", p, c.c_rs),
                AnalyticRow::new(f, "c_r", p, c.c_r),
                ratio,
            ]
        }
        Formula::JanitorRoute => JanitorVariant::ALL
            .into_iter()
            .map(|v| {
                let mut row = AnalyticRow::new(f, v.name(), p, p_janitor_route(p_b, p.e_n, v)?);
                if let Some(m) = mc {
                    row = row.with_mc(janitor_route_mc(p_b, p.e_n, v, m.trials, m.seed)?);
                }
                Ok(row)
            })
            .collect::<Result<_, DomainError>>()?,
        Formula::JanitorCount => {
            let tau = janitor_tau(p_b).map_err(|e| e.in_formula(f.name()))?;
            (0..=p.e_n)
                .map(|k| {
                    Ok(AnalyticRow::new(
                        f,
                        format!("k={k}"),
                        p,
                        binomial_janitor_count(p.e_n, tau, k)?,
                    ))
                })
                .collect::<Result<_, DomainError>>()?
        }
        Formula::DiscoverySuccess => {
            let d = p_discovery_success(p.p_0, p.k_cap, p.e_n)?;
            let mut pr = AnalyticRow::new(f, "p_r", p, d.p_r);
            if let Some(m) = mc {
                pr = pr.with_mc(discovery_success_mc(
                    p.p_0, p.k_cap, p.e_n, m.trials, m.seed,
                )?);
            }
            vec![
                AnalyticRow::new(f, "p_f0", p, d.p_f0),
                AnalyticRow::new(f, "p_f1", p, d.p_f1),
                pr,
            ]
        }
        Formula::PacketSuccess => {
            let path = PacketPath::from_params(p)?;
            let m = mc.unwrap_or(McSettings {
                trials: crate::analytics::DEFAULT_TRIALS,
                seed: 1,
            });
            let e = packet_success_mc(path, m.trials, m.seed)?;
            let mut row = AnalyticRow::new(f, "monte-carlo", p, e.estimate).with_mc(e);
            row.note = format!(
                "two-term closed form {}",
                packet_success_terms(path.link_failure, path.links, path.recovery)?
            );
            vec![row]
        }
    };
    Ok(rows)
}

const PARAM_COLUMNS: [&str; 17] = [
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

fn param_fields(p: &AnalyticParams) -> [String; 17] {
    [
        p.mu.to_string(),
        p.lambda_rate.to_string(),
        p.e_l.to_string(),
        p.e_n.to_string(),
        p.k.to_string(),
        p.k_hat.to_string(),
        p.k_cap.to_string(),
        p.p_l.to_string(),
        p.p_js.to_string(),
        p.p_0.to_string(),
        p.p_s.to_string(),
        p.c_ls.to_string(),
        p.c_lf.to_string(),
        p.c_qd.to_string(),
        p.c_ru.to_string(),
        p.q.to_string(),
        p.z.to_string(),
    ]
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_analytics<W: Write>(out: W, rows: &[AnalyticRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["formula", "variant"];
    header.extend(PARAM_COLUMNS);
    header.extend(["value", "mc_estimate", "mc_half_width", "mc_trials", "note"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.formula.to_string(), r.variant.clone()];
        rec.extend(param_fields(&r.params));
        rec.extend([
            opt(r.value),
            opt(r.mc_estimate),
            opt(r.mc_half_width),
            opt(r.mc_trials),
            r.note.clone(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
