//! A shared rigid bar held by the robot's hands and by an external agent that
//! leads, follows, or replays a scripted wrench.

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

/// Planar rigid object. Grip points are in the object's local frame relative
/// to its center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedObject {
    pub mass: f64,
    pub inertia: f64,
    /// `[x, y, yaw]`.
    pub pose: [f64; 3],
    pub vel: [f64; 3],
    /// Robot grips, `[right, left]`.
    pub robot_grips: [[f64; 2]; 2],
    pub agent_grips: [[f64; 2]; 2],
}

/// Planar wrench `[fx, fy, mz]` about the object's center.
pub type Wrench = [f64; 3];

impl SharedObject {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.pose[0], self.pose[1])
    }

    pub fn grip_world(&self, local: &[f64; 2]) -> Vector2<f64> {
        pose_point(&self.pose, local)
    }

    pub fn grip_velocity(&self, local: &[f64; 2]) -> Vector2<f64> {
        pose_point_velocity(&self.pose, &self.vel, local)
    }

    /// Semi-implicit Euler under a net wrench about the center.
    pub fn step(&self, wrench: &Wrench, dt: f64) -> SharedObject {
        let mut next = *self;
        next.vel = [
            self.vel[0] + wrench[0] / self.mass * dt,
            self.vel[1] + wrench[1] / self.mass * dt,
            self.vel[2] + wrench[2] / self.inertia * dt,
        ];
        for k in 0..3 {
            next.pose[k] = self.pose[k] + next.vel[k] * dt;
        }
        next
    }
}

fn pose_point(pose: &[f64; 3], local: &[f64; 2]) -> Vector2<f64> {
    Vector2::new(pose[0], pose[1]) + Rotation2::new(pose[2]) * Vector2::from(*local)
}

fn pose_point_velocity(pose: &[f64; 3], vel: &[f64; 3], local: &[f64; 2]) -> Vector2<f64> {
    let r = Rotation2::new(pose[2]) * Vector2::from(*local);
    Vector2::new(vel[0] - vel[2] * r.y, vel[1] + vel[2] * r.x)
}

/// Add a force applied at world point `at` to a wrench about `center`.
pub fn accumulate(w: &mut Wrench, center: &Vector2<f64>, at: &Vector2<f64>, f: &Vector2<f64>) {
    let r = at - center;
    w[0] += f.x;
    w[1] += f.y;
    w[2] += r.x * f.y - r.y * f.x;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentMode {
    Leader,
    Follower,
    Scripted,
}

/// Waypoint of the leader's desired object pose, linearly interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseWaypoint {
    pub t: f64,
    pub pose: [f64; 3],
}

/// Scripted wrench sample, held until the next sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchSample {
    pub t: f64,
    pub wrench: Wrench,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalAgent {
    pub mode: AgentMode,
    /// Per-grip translational stiffness and damping.
    pub stiffness: f64,
    pub damping: f64,
    /// Bound on each grip force, N.
    pub max_force: f64,
    /// Leader trajectory. In a scenario file the poses are offsets from the
    /// object's initial pose, in its initial heading frame.
    #[serde(default)]
    pub path: Vec<PoseWaypoint>,
    #[serde(default)]
    pub script: Vec<WrenchSample>,
}

impl ExternalAgent {
    pub fn desired_pose(&self, t: f64) -> Option<[f64; 3]> {
        let first = self.path.first()?;
        if t <= first.t {
            return Some(first.pose);
        }
        for pair in self.path.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if t <= b.t {
                let s = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 1.0 };
                return Some([0, 1, 2].map(|k| a.pose[k] + s * (b.pose[k] - a.pose[k])));
            }
        }
        self.path.last().map(|w| w.pose)
    }

    pub fn scripted_wrench(&self, t: f64) -> Wrench {
        self.script
            .iter()
            .take_while(|s| s.t <= t)
            .last()
            .map(|s| s.wrench)
            .unwrap_or([0.0; 3])
    }
}

/// Reference motion of the object implied by the robot (pose and velocity),
/// used by a following agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedMotion {
    pub pose: [f64; 3],
    pub vel: [f64; 3],
}

fn clamp_norm(f: Vector2<f64>, limit: f64) -> Vector2<f64> {
    let n = f.norm();
    if n > limit {
        f * (limit / n)
    } else {
        f
    }
}

/// Wrench the agent applies to the object at time `t`.
pub fn agent_step(agent: &ExternalAgent, object: &SharedObject, implied: Option<&ImpliedMotion>, t: f64) -> Wrench {
    if agent.mode == AgentMode::Scripted {
        return agent.scripted_wrench(t);
    }
    let reference = match agent.mode {
        AgentMode::Leader => agent.desired_pose(t).map(|pose| (pose, [0.0; 3])),
        AgentMode::Follower => implied.map(|m| (m.pose, m.vel)),
        AgentMode::Scripted => None,
    };
    let Some((ref_pose, ref_vel)) = reference else {
        return [0.0; 3];
    };
    let center = object.center();
    let mut w = [0.0; 3];
    for grip in &object.agent_grips {
        let p = object.grip_world(grip);
        let v = object.grip_velocity(grip);
        let p_ref = pose_point(&ref_pose, grip);
        let v_ref = pose_point_velocity(&ref_pose, &ref_vel, grip);
        let f = clamp_norm((p_ref - p) * agent.stiffness + (v_ref - v) * agent.damping, agent.max_force);
        accumulate(&mut w, &center, &p, &f);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bar() -> SharedObject {
        SharedObject {
            mass: 2.0,
            inertia: 0.2,
            pose: [1.0, 0.0, 0.0],
            vel: [0.0; 3],
            robot_grips: [[-0.5, -0.15], [-0.5, 0.15]],
            agent_grips: [[0.5, -0.15], [0.5, 0.15]],
        }
    }

    fn agent(mode: AgentMode) -> ExternalAgent {
        ExternalAgent {
            mode,
            stiffness: 300.0,
            damping: 60.0,
            max_force: 60.0,
            path: vec![],
            script: vec![],
        }
    }

    #[test]
    fn follower_at_rest_relative_is_silent() {
        let obj = SharedObject {
            vel: [0.3, -0.1, 0.2],
            ..bar()
        };
        let implied = ImpliedMotion {
            pose: obj.pose,
            vel: obj.vel,
        };
        assert_eq!(agent_step(&agent(AgentMode::Follower), &obj, Some(&implied), 1.0), [0.0; 3]);
    }

    #[test]
    fn leader_yaw_step_gives_couple() {
        let mut a = agent(AgentMode::Leader);
        a.path = vec![PoseWaypoint {
            t: 0.0,
            pose: [1.0, 0.0, 0.1],
        }];
        let w = agent_step(&a, &bar(), None, 0.5);
        // Counter-clockwise desired rotation: positive moment, grip forces
        // opposite in x.
        assert!(w[2] > 0.0);
        let obj = bar();
        let forces: Vec<_> = obj
            .agent_grips
            .iter()
            .map(|g| {
                let p_ref = pose_point(&[1.0, 0.0, 0.1], g);
                (p_ref - obj.grip_world(g)) * 300.0
            })
            .collect();
        assert!(forces[0].x * forces[1].x < 0.0);
        let mut negative = a.clone();
        negative.path[0].pose[2] = -0.1;
        assert!(agent_step(&negative, &bar(), None, 0.5)[2] < 0.0);
    }

    #[test]
    fn grip_force_is_bounded() {
        let mut a = agent(AgentMode::Leader);
        a.path = vec![PoseWaypoint {
            t: 0.0,
            pose: [5.0, 0.0, 0.0],
        }];
        let w = agent_step(&a, &bar(), None, 0.0);
        assert_abs_diff_eq!(w[0], 120.0, epsilon = 1e-9);
    }

    #[test]
    fn scripted_replays_exactly() {
        let mut a = agent(AgentMode::Scripted);
        a.script = vec![
            WrenchSample { t: 0.0, wrench: [10.0, 0.0, 0.0] },
            WrenchSample { t: 1.0, wrench: [-10.0, 0.5, 0.25] },
        ];
        assert_eq!(agent_step(&a, &bar(), None, 0.3), [10.0, 0.0, 0.0]);
        assert_eq!(agent_step(&a, &bar(), None, 1.0), [-10.0, 0.5, 0.25]);
        assert_eq!(agent_step(&a, &bar(), None, 7.0), [-10.0, 0.5, 0.25]);
    }

    #[test]
    fn leader_path_interpolates() {
        let mut a = agent(AgentMode::Leader);
        a.path = vec![
            PoseWaypoint { t: 0.0, pose: [0.0, 0.0, 0.0] },
            PoseWaypoint { t: 2.0, pose: [1.0, 0.0, 0.4] },
        ];
        assert_eq!(a.desired_pose(1.0), Some([0.5, 0.0, 0.2]));
        assert_eq!(a.desired_pose(3.0), Some([1.0, 0.0, 0.4]));
    }
}
