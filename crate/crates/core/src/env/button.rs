use super::{
    clipped_action, dist, point_from, ActionSpace, CmdpSpec, Disk, Environment, SimRng,
    Transition,
};
use crate::error::{contract, Result};

/// Obstacle moving along a closed polyline at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Gremlin {
    pub waypoints: Vec<[f64; 2]>,
    /// Distance travelled per step.
    pub speed: f64,
    pub radius: f64,
}

impl Gremlin {
    pub fn position(&self, t: usize) -> [f64; 2] {
        let n = self.waypoints.len();
        if n == 1 || self.speed == 0.0 {
            return self.waypoints[0];
        }
        let legs: Vec<f64> = (0..n)
            .map(|i| dist(self.waypoints[i], self.waypoints[(i + 1) % n]))
            .collect();
        let perimeter: f64 = legs.iter().sum();
        if perimeter == 0.0 {
            return self.waypoints[0];
        }
        let mut s = (self.speed * t as f64) % perimeter;
        for (i, &len) in legs.iter().enumerate() {
            if s <= len {
                let (a, b) = (self.waypoints[i], self.waypoints[(i + 1) % n]);
                let f = if len > 0.0 { s / len } else { 0.0 };
                return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
            }
            s -= len;
        }
        self.waypoints[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButtonNavConfig {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// The user expects these to be pressed in order before the goal is reached.
    pub buttons: [Disk; 2],
    pub gremlins: Vec<Gremlin>,
    pub step_scale: f64,
    pub arena: f64,
    /// Multiplier on `R_A` for steps that move away from the goal.
    pub away_factor: f64,
    pub button_reward_a: f64,
    pub goal_reward_a: f64,
    pub button_reward_u: f64,
    pub goal_reward_u: f64,
    pub collision_cost: f64,
    pub horizon: usize,
    pub gamma: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Default for ButtonNavConfig {
    fn default() -> Self {
        Self {
            start: [-2.0, 0.0],
            goal: [2.0, 0.0],
            goal_radius: 0.3,
            buttons: [Disk::new(-1.0, 0.8, 0.3), Disk::new(-2.6, -1.8, 0.3)],
            gremlins: vec![Gremlin {
                waypoints: vec![[0.8, 1.2], [0.8, -1.2]],
                speed: 0.08,
                radius: 0.35,
            }],
            step_scale: 0.2,
            arena: 3.0,
            away_factor: 5.0,
            button_reward_a: 0.5,
            goal_reward_a: 1.0,
            button_reward_u: 1.0,
            goal_reward_u: 1.0,
            collision_cost: 1.0,
            horizon: 150,
            gamma: 0.99,
            d0: 0.0,
            d1: 2.5,
        }
    }
}

/// Point mass that may press two buttons on its way to a goal while gremlins patrol
/// fixed loops.
///
/// State layout: `[x, y, pressed_0, pressed_1, t]`.
///
/// * `R_A`: progress toward the goal (steps away are scaled by `away_factor`), plus a
///   bonus per newly pressed button and on reaching the goal.
/// * `C_1`: `collision_cost` per step within a gremlin's radius.
/// * `u_H`: progress toward the user's next expected target (first unpressed button,
///   then the goal) with no penalty for leaving the goal, plus button bonuses; the goal
///   bonus counts only once both buttons are pressed.
#[derive(Debug, Clone)]
pub struct ButtonNav {
    cfg: ButtonNavConfig,
    spec: CmdpSpec,
}

const STATE_DIM: usize = 5;

impl ButtonNav {
    pub fn new(cfg: ButtonNavConfig) -> Result<Self> {
        if cfg.gremlins.iter().any(|g| g.waypoints.is_empty()) {
            return Err(contract("gremlin needs at least one waypoint"));
        }
        let spec = CmdpSpec::new(
            STATE_DIM,
            ActionSpace::Continuous { dim: 2, low: -1.0, high: 1.0 },
            cfg.gamma,
            cfg.horizon,
            vec![cfg.d0, cfg.d1],
        )?;
        Ok(Self { cfg, spec })
    }

    pub fn config(&self) -> &ButtonNavConfig {
        &self.cfg
    }

    fn user_target(&self, pressed: [bool; 2]) -> [f64; 2] {
        match pressed {
            [false, _] => self.cfg.buttons[0].center,
            [true, false] => self.cfg.buttons[1].center,
            [true, true] => self.cfg.goal,
        }
    }

    pub fn collides(&self, p: [f64; 2], t: usize) -> bool {
        self.cfg
            .gremlins
            .iter()
            .any(|g| dist(g.position(t), p) <= g.radius)
    }
}

impl Environment for ButtonNav {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&self, _rng: &mut SimRng) -> Vec<f64> {
        vec![self.cfg.start[0], self.cfg.start[1], 0.0, 0.0, 0.0]
    }

    fn step(&self, state: &Vec<f64>, action: &Vec<f64>, _rng: &mut SimRng) -> Result<Transition<Vec<f64>, Vec<f64>>> {
        let p = point_from(state, STATE_DIM, "button-nav")?;
        let a = clipped_action(action, -1.0, 1.0)?;
        let pressed = [state[2] > 0.5, state[3] > 0.5];
        let t = state[4].max(0.0) as usize;
        let bound = self.cfg.arena;
        let q = [
            (p[0] + self.cfg.step_scale * a[0]).clamp(-bound, bound),
            (p[1] + self.cfg.step_scale * a[1]).clamp(-bound, bound),
        ];

        let progress = dist(p, self.cfg.goal) - dist(q, self.cfg.goal);
        let mut reward_a = if progress >= 0.0 { progress } else { self.cfg.away_factor * progress };

        let target = self.user_target(pressed);
        let mut reward_u = dist(p, target) - dist(q, target);

        let mut now = pressed;
        // buttons count in order; the second only after the first
        if !now[0] && self.cfg.buttons[0].contains(q) {
            now[0] = true;
        } else if now[0] && !now[1] && self.cfg.buttons[1].contains(q) {
            now[1] = true;
        }
        for i in 0..2 {
            if now[i] && !pressed[i] {
                reward_a += self.cfg.button_reward_a;
                reward_u += self.cfg.button_reward_u;
            }
        }

        let done = dist(q, self.cfg.goal) <= self.cfg.goal_radius;
        if done {
            reward_a += self.cfg.goal_reward_a;
            if now == [true, true] {
                reward_u += self.cfg.goal_reward_u;
            }
        }
        let cost = if self.collides(q, t + 1) { self.cfg.collision_cost } else { 0.0 };
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        Ok(Transition {
            state: state.clone(),
            action: action.clone(),
            next_state: vec![q[0], q[1], flag(now[0]), flag(now[1]), (t + 1) as f64],
            reward_a,
            costs: vec![cost],
            reward_u,
            done,
        })
    }

    fn observe(&self, state: &Vec<f64>) -> Vec<f64> {
        vec![
            state[0] * 0.5,
            state[1] * 0.5,
            state[2],
            state[3],
            state[4] / self.cfg.horizon as f64,
        ]
    }

    fn observation_dim(&self) -> usize {
        5
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::seeded_rng;

    fn env() -> ButtonNav {
        ButtonNav::new(ButtonNavConfig::default()).unwrap()
    }

    #[test]
    fn gremlin_loops_periodically() {
        let g = Gremlin { waypoints: vec![[0.0, 0.0], [1.0, 0.0]], speed: 0.25, radius: 0.1 };
        assert_eq!(g.position(0), [0.0, 0.0]);
        assert_eq!(g.position(2), [0.5, 0.0]);
        assert_eq!(g.position(4), [1.0, 0.0]);
        assert_eq!(g.position(6), [0.5, 0.0]);
        assert_eq!(g.position(8), g.position(0));
    }

    #[test]
    fn pressing_first_button_pays_both_streams() {
        let e = env();
        let s = vec![-1.0, 0.5, 0.0, 0.0, 3.0];
        let tr = e.step(&s, &vec![0.0, 1.0], &mut seeded_rng(0)).unwrap();
        assert_eq!(tr.next_state[2], 1.0);
        assert_eq!(tr.next_state[4], 4.0);
        let progress = dist([-1.0, 0.5], [2.0, 0.0]) - dist([-1.0, 0.7], [2.0, 0.0]);
        assert!((tr.reward_a - (5.0 * progress + 0.5)).abs() < 1e-12);
        assert!(tr.reward_u > 1.0);
    }

    #[test]
    fn moving_away_from_goal_is_free_for_user_toward_target() {
        let e = env();
        // after the first press the user expects the far button, behind the start
        let s = vec![-1.0, 0.0, 1.0, 0.0, 0.0];
        let tr = e.step(&s, &vec![-1.0, -1.0], &mut seeded_rng(0)).unwrap();
        assert!(tr.reward_a < 0.0);
        assert!(tr.reward_u > 0.0);
    }

    #[test]
    fn goal_bonus_for_user_needs_both_buttons() {
        let e = env();
        let tr = e.step(&vec![1.6, 0.0, 1.0, 0.0, 0.0], &vec![1.0, 0.0], &mut seeded_rng(0)).unwrap();
        assert!(tr.done);
        let progress_u = dist([1.6, 0.0], [-2.6, -1.8]) - dist([1.8, 0.0], [-2.6, -1.8]);
        assert!((tr.reward_u - progress_u).abs() < 1e-12);
        let tr = e.step(&vec![1.6, 0.0, 1.0, 1.0, 0.0], &vec![1.0, 0.0], &mut seeded_rng(0)).unwrap();
        assert!((tr.reward_u - (0.2 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn gremlin_contact_costs() {
        let e = env();
        let g = &e.config().gremlins[0];
        let at = g.position(1);
        let s = vec![at[0], at[1], 0.0, 0.0, 0.0];
        let tr = e.step(&s, &vec![0.0, 0.0], &mut seeded_rng(0)).unwrap();
        assert_eq!(tr.costs, vec![1.0]);
    }

    #[test]
    fn rejects_short_state() {
        assert!(env().step(&vec![0.0, 0.0], &vec![0.0, 0.0], &mut seeded_rng(0)).is_err());
    }
}
