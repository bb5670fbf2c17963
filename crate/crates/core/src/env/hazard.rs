use super::{
    clipped_action, dist, point_from, ActionSpace, CmdpSpec, Disk, Environment, SimRng,
    Transition,
};
use crate::error::Result;

/// Layout and scales of the hazard navigation task.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardNavConfig {
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// Regions the agent must avoid; invisible to the user.
    pub hazards: Vec<Disk>,
    /// Objects the user regards as fragile.
    pub boxes: Vec<Disk>,
    /// Displacement per unit action along each axis.
    pub step_scale: f64,
    /// Positions are clamped to `[-arena, arena]^2`.
    pub arena: f64,
    pub hazard_cost: f64,
    pub box_cost: f64,
    /// Subtracted from `u_H` for every step spent in contact with a box.
    pub box_penalty: f64,
    pub horizon: usize,
    pub gamma: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Default for HazardNavConfig {
    fn default() -> Self {
        Self {
            start: [-2.0, 0.0],
            goal: [2.0, 0.0],
            goal_radius: 0.3,
            hazards: vec![Disk::new(0.0, 0.65, 0.5), Disk::new(0.0, -0.65, 0.5)],
            boxes: vec![Disk::new(0.0, 0.0, 0.3)],
            step_scale: 0.2,
            arena: 3.0,
            hazard_cost: 1.0,
            box_cost: 1.0,
            box_penalty: 1.0,
            horizon: 200,
            gamma: 0.99,
            d0: 0.0,
            d1: 1.0,
        }
    }
}

/// Point mass moving with clipped velocity actions toward a goal, with hazard
/// disks (cost only) and fragile boxes (cost and surrogate penalty).
///
/// * `R_A` = previous goal distance − new goal distance
/// * `C_1` = hazard occupancy + box contacts
/// * `u_H` = same progress term, minus `box_penalty` per box contact; hazards are free
#[derive(Debug, Clone)]
pub struct HazardNav {
    cfg: HazardNavConfig,
    spec: CmdpSpec,
}

impl HazardNav {
    pub fn new(cfg: HazardNavConfig) -> Result<Self> {
        let spec = CmdpSpec::new(
            2,
            ActionSpace::Continuous { dim: 2, low: -1.0, high: 1.0 },
            cfg.gamma,
            cfg.horizon,
            vec![cfg.d0, cfg.d1],
        )?;
        Ok(Self { cfg, spec })
    }

    pub fn config(&self) -> &HazardNavConfig {
        &self.cfg
    }

    pub fn in_hazard(&self, p: [f64; 2]) -> bool {
        self.cfg.hazards.iter().any(|h| h.contains(p))
    }

    pub fn box_contacts(&self, p: [f64; 2]) -> usize {
        self.cfg.boxes.iter().filter(|b| b.contains(p)).count()
    }
}

impl Environment for HazardNav {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&self, _rng: &mut SimRng) -> Vec<f64> {
        self.cfg.start.to_vec()
    }

    fn step(&self, state: &Vec<f64>, action: &Vec<f64>, _rng: &mut SimRng) -> Result<Transition<Vec<f64>, Vec<f64>>> {
        let p = point_from(state, 2, "hazard-nav")?;
        let a = clipped_action(action, -1.0, 1.0)?;
        let bound = self.cfg.arena;
        let q = [
            (p[0] + self.cfg.step_scale * a[0]).clamp(-bound, bound),
            (p[1] + self.cfg.step_scale * a[1]).clamp(-bound, bound),
        ];
        let progress = dist(p, self.cfg.goal) - dist(q, self.cfg.goal);
        let contacts = self.box_contacts(q) as f64;
        let hazard = if self.in_hazard(q) { self.cfg.hazard_cost } else { 0.0 };
        Ok(Transition {
            state: state.clone(),
            action: action.clone(),
            next_state: q.to_vec(),
            reward_a: progress,
            costs: vec![hazard + self.cfg.box_cost * contacts],
            reward_u: progress - self.cfg.box_penalty * contacts,
            done: dist(q, self.cfg.goal) <= self.cfg.goal_radius,
        })
    }

    fn observe(&self, state: &Vec<f64>) -> Vec<f64> {
        let half = 0.5;
        vec![state[0] * half, state[1] * half]
    }

    fn observation_dim(&self) -> usize {
        2
    }
}
