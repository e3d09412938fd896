//! Scenario description and its flat `key = value` file format.
//!
//! A scenario file holds one key per line. Blank lines are ignored and `#`
//! starts a comment that runs to the end of the line. Keys not listed in
//! [`ScenarioConfig::KEYS`] are rejected, as are repeated keys. Keys that are
//! absent keep their default value.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::ConfigError;

/// Per-kind wire sizes in bytes. Variable-length messages add
/// [`WireSizes::per_entry`] bytes for every node id they carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireSizes {
    pub hello: u32,
    pub hello_reply: u32,
    pub new_janitor: u32,
    pub alive_request: u32,
    pub alive_reply: u32,
    pub data_header: u32,
    pub ack: u32,
    pub route_query: u32,
    pub route_reply: u32,
    pub route_error: u32,
    pub route_unreachable: u32,
    pub flood_request: u32,
    pub flood_reply: u32,
    pub flood_error: u32,
    pub per_entry: u32,
}

impl Default for WireSizes {
    fn default() -> Self {
        Self {
            hello: 12,
            hello_reply: 12,
            new_janitor: 16,
            alive_request: 12,
            alive_reply: 12,
            data_header: 20,
            ack: 16,
            route_query: 24,
            route_reply: 24,
            route_error: 28,
            route_unreachable: 16,
            flood_request: 24,
            flood_reply: 24,
            flood_error: 28,
            per_entry: 4,
        }
    }
}

/// Full description of one simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub field_width: f64,
    pub field_height: f64,
    pub node_count: usize,
    /// Radio range `r` of the unit-disk model, meters.
    pub tx_range: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_time: f64,
    /// Packet arrivals per second on each flow.
    pub traffic_rate: f64,
    /// Location changes per second; only feeds the analytic model.
    pub mobility_rate: f64,
    pub sim_duration: f64,
    pub hop_limit: u32,
    pub timer_alive: f64,
    pub timer_janitor_idle: f64,
    pub hop_latency: f64,
    pub rng_seed: u64,
    pub flow_count: usize,
    /// Interval between periodic connectivity recomputations.
    pub graph_tick: f64,
    /// No traffic is generated before this time.
    pub warmup: f64,
    pub payload_bytes: u32,
    /// Per-node buffer for packets waiting on a route.
    pub pending_capacity: usize,
    /// Route query / flood request timeout.
    pub request_timeout: f64,
    /// Extra flood attempts after the first one times out.
    pub request_retries: u32,
    /// A janitor answers other janitors from its cache only with routes younger than this.
    pub cache_reply_lifetime: f64,
    /// Route recoveries a single packet may trigger before it is dropped.
    pub max_recoveries: u32,
    pub sizes: WireSizes,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            field_width: 1300.0,
            field_height: 1300.0,
            node_count: 50,
            tx_range: 250.0,
            speed_min: 1.0,
            speed_max: 20.0,
            pause_time: 60.0,
            traffic_rate: 1.0,
            mobility_rate: 0.05,
            sim_duration: 900.0,
            hop_limit: 16,
            timer_alive: 15.0,
            timer_janitor_idle: 30.0,
            hop_latency: 0.002,
            rng_seed: 1,
            flow_count: 10,
            graph_tick: 1.0,
            warmup: 20.0,
            payload_bytes: 64,
            pending_capacity: 64,
            request_timeout: 2.0,
            request_retries: 2,
            cache_reply_lifetime: 5.0,
            max_recoveries: 3,
            sizes: WireSizes::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl ScenarioConfig {
    /// Every key accepted by [`ScenarioConfig::set`], in file order.
    pub const KEYS: &'static [&'static str] = &[
        "field_width",
        "field_height",
        "node_count",
        "tx_range",
        "speed_min",
        "speed_max",
        "pause_time",
        "traffic_rate",
        "mobility_rate",
        "sim_duration",
        "hop_limit",
        "timer_alive",
        "timer_janitor_idle",
        "hop_latency",
        "rng_seed",
        "flow_count",
        "graph_tick",
        "warmup",
        "payload_bytes",
        "pending_capacity",
        "request_timeout",
        "request_retries",
        "cache_reply_lifetime",
        "max_recoveries",
        "size_hello",
        "size_hello_reply",
        "size_new_janitor",
        "size_alive_request",
        "size_alive_reply",
        "size_data_header",
        "size_ack",
        "size_route_query",
        "size_route_reply",
        "size_route_error",
        "size_route_unreachable",
        "size_flood_request",
        "size_flood_reply",
        "size_flood_error",
        "size_per_entry",
    ];

    /// Assigns one key. Returns `NoSuchKey` for keys outside [`Self::KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let s = &mut self.sizes;
        match key {
            "field_width" => self.field_width = parse(key, v)?,
            "field_height" => self.field_height = parse(key, v)?,
            "node_count" => self.node_count = parse(key, v)?,
            "tx_range" => self.tx_range = parse(key, v)?,
            "speed_min" => self.speed_min = parse(key, v)?,
            "speed_max" => self.speed_max = parse(key, v)?,
            "pause_time" => self.pause_time = parse(key, v)?,
            "traffic_rate" => self.traffic_rate = parse(key, v)?,
            "mobility_rate" => self.mobility_rate = parse(key, v)?,
            "sim_duration" => self.sim_duration = parse(key, v)?,
            "hop_limit" => self.hop_limit = parse(key, v)?,
            "timer_alive" => self.timer_alive = parse(key, v)?,
            "timer_janitor_idle" => self.timer_janitor_idle = parse(key, v)?,
            "hop_latency" => self.hop_latency = parse(key, v)?,
            "rng_seed" => self.rng_seed = parse(key, v)?,
            "flow_count" => self.flow_count = parse(key, v)?,
            "graph_tick" => self.graph_tick = parse(key, v)?,
            "warmup" => self.warmup = parse(key, v)?,
            "payload_bytes" => self.payload_bytes = parse(key, v)?,
            "pending_capacity" => self.pending_capacity = parse(key, v)?,
            "request_timeout" => self.request_timeout = parse(key, v)?,
            "request_retries" => self.request_retries = parse(key, v)?,
            "cache_reply_lifetime" => self.cache_reply_lifetime = parse(key, v)?,
            "max_recoveries" => self.max_recoveries = parse(key, v)?,
            "size_hello" => s.hello = parse(key, v)?,
            "size_hello_reply" => s.hello_reply = parse(key, v)?,
            "size_new_janitor" => s.new_janitor = parse(key, v)?,
            "size_alive_request" => s.alive_request = parse(key, v)?,
            "size_alive_reply" => s.alive_reply = parse(key, v)?,
            "size_data_header" => s.data_header = parse(key, v)?,
            "size_ack" => s.ack = parse(key, v)?,
            "size_route_query" => s.route_query = parse(key, v)?,
            "size_route_reply" => s.route_reply = parse(key, v)?,
            "size_route_error" => s.route_error = parse(key, v)?,
            "size_route_unreachable" => s.route_unreachable = parse(key, v)?,
            "size_flood_request" => s.flood_request = parse(key, v)?,
            "size_flood_reply" => s.flood_reply = parse(key, v)?,
            "size_flood_error" => s.flood_error = parse(key, v)?,
            "size_per_entry" => s.per_entry = parse(key, v)?,
            _ => return Err(ConfigError::NoSuchKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses a scenario file body on top of the defaults and validates it.
    pub fn parse_kv(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            if key.is_empty() || value.trim().is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            config.set(key, value).map_err(|e| match e {
                ConfigError::NoSuchKey(key) => ConfigError::UnknownKey { line, key },
                other => other,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_kv(&text)
    }

    /// Renders every key, so that `parse_kv(to_kv())` reproduces `self`.
    pub fn to_kv(&self) -> String {
        let s = &self.sizes;
        let values: Vec<String> = vec![
            self.field_width.to_string(),
            self.field_height.to_string(),
            self.node_count.to_string(),
            self.tx_range.to_string(),
            self.speed_min.to_string(),
            self.speed_max.to_string(),
            self.pause_time.to_string(),
            self.traffic_rate.to_string(),
            self.mobility_rate.to_string(),
            self.sim_duration.to_string(),
            self.hop_limit.to_string(),
            self.timer_alive.to_string(),
            self.timer_janitor_idle.to_string(),
            self.hop_latency.to_string(),
            self.rng_seed.to_string(),
            self.flow_count.to_string(),
            self.graph_tick.to_string(),
            self.warmup.to_string(),
            self.payload_bytes.to_string(),
            self.pending_capacity.to_string(),
            self.request_timeout.to_string(),
            self.request_retries.to_string(),
            self.cache_reply_lifetime.to_string(),
            self.max_recoveries.to_string(),
            s.hello.to_string(),
            s.hello_reply.to_string(),
            s.new_janitor.to_string(),
            s.alive_request.to_string(),
            s.alive_reply.to_string(),
            s.data_header.to_string(),
            s.ack.to_string(),
            s.route_query.to_string(),
            s.route_reply.to_string(),
            s.route_error.to_string(),
            s.route_unreachable.to_string(),
            s.flood_request.to_string(),
            s.flood_reply.to_string(),
            s.flood_error.to_string(),
            s.per_entry.to_string(),
        ];
        let mut out = String::new();
        for (key, value) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        let finite = [
            ("field_width", self.field_width),
            ("field_height", self.field_height),
            ("tx_range", self.tx_range),
            ("speed_min", self.speed_min),
            ("speed_max", self.speed_max),
            ("pause_time", self.pause_time),
            ("traffic_rate", self.traffic_rate),
            ("mobility_rate", self.mobility_rate),
            ("sim_duration", self.sim_duration),
            ("timer_alive", self.timer_alive),
            ("timer_janitor_idle", self.timer_janitor_idle),
            ("hop_latency", self.hop_latency),
            ("graph_tick", self.graph_tick),
            ("warmup", self.warmup),
            ("request_timeout", self.request_timeout),
            ("cache_reply_lifetime", self.cache_reply_lifetime),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        if self.field_width <= 0.0 || self.field_height <= 0.0 {
            return fail("field dimensions must be positive".into());
        }
        if self.tx_range <= 0.0 {
            return fail("tx_range must be positive".into());
        }
        if self.node_count < 2 {
            return fail("node_count must be at least 2".into());
        }
        if self.speed_min < 0.0 || self.speed_min > self.speed_max {
            return fail("need 0 <= speed_min <= speed_max".into());
        }
        if self.pause_time < 0.0 {
            return fail("pause_time must be nonnegative".into());
        }
        if self.hop_limit < 1 {
            return fail("hop_limit must be at least 1".into());
        }
        if self.traffic_rate < 0.0 || self.mobility_rate < 0.0 {
            return fail("rates must be nonnegative".into());
        }
        if self.sim_duration < 0.0 || self.warmup < 0.0 {
            return fail("durations must be nonnegative".into());
        }
        for (name, v) in [
            ("timer_alive", self.timer_alive),
            ("timer_janitor_idle", self.timer_janitor_idle),
            ("hop_latency", self.hop_latency),
            ("graph_tick", self.graph_tick),
            ("request_timeout", self.request_timeout),
        ] {
            if v <= 0.0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.cache_reply_lifetime < 0.0 {
            return fail("cache_reply_lifetime must be nonnegative".into());
        }
        if self.pending_capacity == 0 {
            return fail("pending_capacity must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let text = "# scenario\n\nnode_count = 100   # big one\npause_time=300\n";
        let c = ScenarioConfig::parse_kv(text).unwrap();
        assert_eq!(c.node_count, 100);
        assert_eq!(c.pause_time, 300.0);
        assert_eq!(c.tx_range, ScenarioConfig::default().tx_range);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ScenarioConfig::parse_kv("node_count = 3\ncolour = blue\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 2,
                key: "colour".into()
            }
        );
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(matches!(
            ScenarioConfig::parse_kv("hop_limit = 3\nhop_limit = 4"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse_kv("hop_limit 3"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            ScenarioConfig::parse_kv("hop_limit = three"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn invariants_are_checked() {
        for text in [
            "node_count = 1",
            "tx_range = 0",
            "field_width = -5",
            "speed_min = 5\nspeed_max = 2",
            "pause_time = -1",
            "hop_limit = 0",
        ] {
            assert!(
                matches!(ScenarioConfig::parse_kv(text), Err(ConfigError::Invalid(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn kv_round_trip() {
        let mut c = ScenarioConfig {
            node_count: 17,
            hop_latency: 0.0125,
            cache_reply_lifetime: 7.5,
            ..ScenarioConfig::default()
        };
        c.sizes.route_query = 40;
        assert_eq!(ScenarioConfig::parse_kv(&c.to_kv()).unwrap(), c);
        assert_eq!(c.to_kv().lines().count(), ScenarioConfig::KEYS.len());
    }
}
