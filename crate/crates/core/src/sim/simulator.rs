use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::Vec2;
use super::motor::{integrate_agent, MotorCommands};
use super::scenario::{Scenario, ScenarioError};
use super::world::{AgentState, VisitorState, WorldState};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("tick frequency must be positive, got {0}")]
    BadFrequency(f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Why a scenario run stopped producing states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunEnd {
    VisitorReachedStand,
    TrajectoryEnded,
}

pub fn initial_world(scenario: &Scenario) -> WorldState {
    let start = scenario.visitor.waypoints[0].at;
    WorldState {
        time: 0.0,
        agent: AgentState::at(scenario.agent.position, scenario.agent.yaw),
        visitor: VisitorState {
            position: start,
            velocity: Vec2::ZERO,
        },
        stand: scenario.stand,
        front_of_stand: scenario.front_of_stand,
    }
}

/// Velocity that brings the visitor onto the next waypoint on schedule.
fn visitor_velocity(scenario: &Scenario, position: Vec2, t: f64, dt: f64) -> Vec2 {
    let wps = &scenario.visitor.waypoints;
    let Some(next) = wps.iter().find(|w| w.t > t + 1e-9) else {
        return Vec2::ZERO;
    };
    let remaining = (next.t - t).max(dt);
    ((next.at - position) * (1.0 / remaining)).clamp_norm(scenario.visitor.max_speed)
}

/// One explicit Euler step of the whole world. `heading_noise` rotates the
/// visitor's velocity (rad).
pub fn step_world(
    world: &WorldState,
    cmds: &MotorCommands,
    dt: f64,
    scenario: &Scenario,
    heading_noise: f64,
) -> WorldState {
    let bounds = scenario.bounds();
    let agent = integrate_agent(&world.agent, cmds, dt, &scenario.limits, &bounds);
    let v =
        visitor_velocity(scenario, world.visitor.position, world.time, dt).rotate(heading_noise);
    let position = bounds.clamp(world.visitor.position + v * dt);
    WorldState {
        time: world.time + dt,
        agent,
        visitor: VisitorState {
            position,
            velocity: (position - world.visitor.position) * (1.0 / dt),
        },
        stand: world.stand,
        front_of_stand: world.front_of_stand,
    }
}

/// A scenario being played forward at a fixed step.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: Scenario,
    world: WorldState,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    dt: f64,
    ticks: u64,
}

impl Simulator {
    pub fn new(scenario: Scenario, hz: f64) -> Result<Self, SimError> {
        let seed = scenario.seed;
        Self::with_seed(scenario, seed, hz)
    }

    pub fn with_seed(scenario: Scenario, seed: u64, hz: f64) -> Result<Self, SimError> {
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(SimError::BadFrequency(hz));
        }
        scenario.validate()?;
        let noise = Normal::new(0.0, scenario.visitor.noise_scale.max(0.0))
            .expect("non-negative finite deviation");
        Ok(Self {
            world: initial_world(&scenario),
            scenario,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            dt: 1.0 / hz,
            ticks: 0,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn ended(&self) -> Option<RunEnd> {
        if let Some(r) = self.scenario.stop_radius {
            if self.world.visitor_stand_distance() <= r {
                return Some(RunEnd::VisitorReachedStand);
            }
        }
        (self.world.time >= self.scenario.duration() - 1e-9).then_some(RunEnd::TrajectoryEnded)
    }

    pub fn step(&mut self, cmds: &MotorCommands) -> &WorldState {
        let jitter = self.noise.sample(&mut self.rng);
        let mut next = step_world(&self.world, cmds, self.dt, &self.scenario, jitter);
        self.ticks += 1;
        // avoid drift from repeated additions
        next.time = self.ticks as f64 * self.dt;
        self.world = next;
        &self.world
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_commands_and_static_visitor_only_advance_time() {
        let mut s = Scenario::corridor();
        s.visitor.waypoints = vec![
            super::super::scenario::Waypoint {
                t: 0.0,
                at: Vec2::new(3.0, 1.0),
            },
            super::super::scenario::Waypoint {
                t: 10.0,
                at: Vec2::new(3.0, 1.0),
            },
        ];
        let mut sim = Simulator::new(s, 50.0).unwrap();
        let before = *sim.world();
        let after = *sim.step(&MotorCommands::default());
        assert_eq!(after.time, 0.02);
        assert_eq!(after.agent.position, before.agent.position);
        assert_eq!(after.agent.body_yaw, before.agent.body_yaw);
        assert_eq!(after.visitor.position, before.visitor.position);
    }

    #[test]
    fn visitor_diverges_about_two_meters_from_stand() {
        let s = Scenario::corridor();
        let mut sim = Simulator::new(s.clone(), 50.0).unwrap();
        // the sharpest heading change along the path marks the divergence
        let mut best = (0.0, 0.0);
        let mut prev_heading: Option<f64> = None;
        while sim.ended().is_none() {
            let w = *sim.step(&MotorCommands::default());
            let v = w.visitor.velocity;
            if v.norm() < 0.2 {
                continue;
            }
            if let Some(h) = prev_heading {
                let turn = super::super::geometry::wrap_angle(v.angle() - h).abs();
                if turn > best.0 {
                    best = (turn, w.visitor_stand_distance());
                }
            }
            prev_heading = Some(v.angle());
        }
        assert!((best.1 - 2.0).abs() < 0.5, "diverged at d = {}", best.1);
        assert_eq!(sim.ended(), Some(RunEnd::VisitorReachedStand));
    }

    #[test]
    fn seeds_control_the_visitor_jitter() {
        let s = Scenario::corridor();
        let run = |seed| {
            let mut sim = Simulator::with_seed(s.clone(), seed, 50.0).unwrap();
            (0..200)
                .map(|_| sim.step(&MotorCommands::default()).visitor.position)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }

    #[test]
    fn zero_frequency_is_rejected() {
        assert!(matches!(
            Simulator::new(Scenario::corridor(), 0.0),
            Err(SimError::BadFrequency(_))
        ));
    }
}
