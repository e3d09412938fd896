//! Random waypoint mobility.
//!
//! A node alternates between legs and pauses. A leg picks a uniform point in
//! the field and a uniform speed in `[speed_min, speed_max]`, then moves there
//! in a straight line. On arrival the node rests for `pause_time` seconds.

use rand::Rng;

use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Field {
    pub width: f64,
    pub height: f64,
}

impl Field {
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new(
            rng.random_range(0.0..=self.width),
            rng.random_range(0.0..=self.height),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointParams {
    pub field: Field,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_time: f64,
}

/// Motion state of one node. While paused, `position == waypoint` and
/// `speed == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeKinematics {
    pub node_id: NodeId,
    /// Position at `leg_start`.
    pub position: Point,
    pub waypoint: Point,
    pub speed: f64,
    pub leg_start: f64,
    /// End of the current pause; meaningful only while paused.
    pub paused_until: f64,
}

impl NodeKinematics {
    /// A node resting at `position` until `paused_until`.
    pub fn resting(node_id: NodeId, position: Point, paused_until: f64) -> Self {
        Self {
            node_id,
            position,
            waypoint: position,
            speed: 0.0,
            leg_start: 0.0,
            paused_until,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.speed > 0.0 && self.position != self.waypoint
    }

    /// Time at which the current leg ends, or `None` while paused.
    pub fn arrival_time(&self) -> Option<f64> {
        self.is_moving()
            .then(|| self.leg_start + self.position.distance(self.waypoint) / self.speed)
    }

    pub fn position_at(&self, t: f64) -> Point {
        let Some(arrival) = self.arrival_time() else {
            return self.position;
        };
        if t >= arrival {
            return self.waypoint;
        }
        let frac = ((t - self.leg_start) / (arrival - self.leg_start)).clamp(0.0, 1.0);
        Point::new(
            self.position.x + (self.waypoint.x - self.position.x) * frac,
            self.position.y + (self.waypoint.y - self.position.y) * frac,
        )
    }

    /// Finishes the current leg at its arrival time and starts the pause.
    pub fn arrive(&self, params: &WaypointParams) -> Self {
        let arrival = self.arrival_time().unwrap_or(self.leg_start);
        Self {
            position: self.waypoint,
            speed: 0.0,
            leg_start: arrival,
            paused_until: arrival + params.pause_time,
            ..*self
        }
    }
}

/// Starts a new leg from a paused node at time `now`.
///
/// A zero speed draw (possible when `speed_min == 0`) leaves the node parked
/// for good, since it would never reach its waypoint.
pub fn advance_waypoint<R: Rng + ?Sized>(
    node: &NodeKinematics,
    now: f64,
    params: &WaypointParams,
    rng: &mut R,
) -> NodeKinematics {
    let waypoint = params.field.sample(rng);
    let speed = if params.speed_max > params.speed_min {
        rng.random_range(params.speed_min..=params.speed_max)
    } else {
        params.speed_max
    };
    let start = node.position_at(now);
    if speed <= 0.0 {
        return NodeKinematics {
            position: start,
            waypoint: start,
            speed: 0.0,
            leg_start: now,
            paused_until: f64::INFINITY,
            ..*node
        };
    }
    NodeKinematics {
        node_id: node.node_id,
        position: start,
        waypoint,
        speed,
        leg_start: now,
        paused_until: now,
    }
}
