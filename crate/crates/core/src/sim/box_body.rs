//! Heavy box on the floor: penalty hand contact with stick-slip anchors,
//! Coulomb ground friction with an exact static test, and a backrest wall.

use nalgebra::{Rotation2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::SimParams;

/// Speeds below which a sliding box is considered stopped, m/s and rad/s.
const LINEAR_DEADBAND: f64 = 1e-6;
const ANGULAR_DEADBAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBody {
    pub mass: f64,
    /// Half extents along the box's local x and y, m.
    pub half: [f64; 2],
    pub height: f64,
    pub mu_s: f64,
    pub mu_k: f64,
    /// `[x, y, yaw]` in the world.
    pub pose: [f64; 3],
    /// `[vx, vy, yaw rate]`.
    #[serde(default)]
    pub vel: [f64; 3],
}

impl BoxBody {
    pub fn yaw_inertia(&self) -> f64 {
        let [hx, hy] = self.half;
        self.mass * (hx * hx + hy * hy) / 3.0
    }

    /// Lever arm of the ground friction moment for a uniformly loaded base.
    pub fn friction_radius(&self) -> f64 {
        let [hx, hy] = self.half;
        (hx + hy) / 3.0
    }

    /// Ground reaction with `lift` newtons of upward hand force.
    pub fn normal_load(&self, lift: f64, g: f64) -> f64 {
        (self.mass * g - lift).max(0.0)
    }

    /// Largest horizontal force static friction can resist.
    pub fn stiction_threshold(&self, lift: f64, g: f64) -> f64 {
        self.mu_s * self.normal_load(lift, g)
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.pose[0], self.pose[1])
    }

    fn rotation(&self) -> Rotation2<f64> {
        Rotation2::new(self.pose[2])
    }

    /// Velocity of a world point rigidly attached to the box.
    pub fn point_velocity(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let r = p - self.center();
        Vector2::new(self.vel[0] - self.vel[2] * r.y, self.vel[1] + self.vel[2] * r.x)
    }

    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let [hx, hy] = self.half;
        let rot = self.rotation();
        let c = self.center();
        [(hx, hy), (hx, -hy), (-hx, -hy), (-hx, hy)].map(|(u, v)| c + rot * Vector2::new(u, v))
    }

    fn to_local(self, p: &Vector3<f64>) -> Vector3<f64> {
        let d = self.rotation().inverse() * (p.xy() - self.center());
        Vector3::new(d.x, d.y, p.z)
    }

    fn to_world(self, local: &Vector3<f64>) -> Vector3<f64> {
        let d = self.center() + self.rotation() * local.xy();
        Vector3::new(d.x, d.y, local.z)
    }
}

/// Stick-slip anchor of one hand, stored in box-local coordinates.
pub type Anchor = Option<[f64; 3]>;

/// Force the box exerts on each hand (world frame, z up). Anchors are created
/// on touch, dragged when the tangential force hits the friction cone, and
/// dropped on release.
pub fn box_contact(
    hands: &[Vector3<f64>; 2],
    hand_vel: &[Vector3<f64>; 2],
    body: &BoxBody,
    anchors: &mut [Anchor; 2],
    params: &SimParams,
) -> [Vector3<f64>; 2] {
    let mut out = [Vector3::zeros(); 2];
    let [hx, hy] = body.half;
    let rot = body.rotation();
    for i in 0..2 {
        let local = body.to_local(&hands[i]);
        let inside = local.x.abs() < hx && local.y.abs() < hy && local.z >= 0.0 && local.z <= body.height;
        if !inside {
            anchors[i] = None;
            continue;
        }
        let pen_x = hx - local.x.abs();
        let pen_y = hy - local.y.abs();
        let (pen, n_local) = if pen_x <= pen_y {
            (pen_x, Vector2::new(local.x.signum(), 0.0))
        } else {
            (pen_y, Vector2::new(0.0, local.y.signum()))
        };
        let n2 = rot * n_local;
        let n = Vector3::new(n2.x, n2.y, 0.0);
        let box_v = body.point_velocity(&hands[i].xy());
        let v_rel = hand_vel[i] - Vector3::new(box_v.x, box_v.y, 0.0);
        let f_n = (params.contact_k * pen - params.contact_b * v_rel.dot(&n)).max(0.0);

        let anchor_local = anchors[i].map(Vector3::from).unwrap_or(local);
        let anchor = body.to_world(&anchor_local);
        let offset = hands[i] - anchor;
        let d_t = offset - n * offset.dot(&n);
        let v_t = v_rel - n * v_rel.dot(&n);
        let mut f_t = -d_t * params.hand_tangent_k - v_t * params.hand_tangent_b;
        let cone = params.hand_friction * f_n;
        let mut new_anchor = anchor;
        if f_t.norm() > cone {
            f_t *= cone / f_t.norm();
            // Slide the anchor so the spring alone sits on the cone.
            new_anchor = hands[i] - n * offset.dot(&n) + f_t / params.hand_tangent_k;
        }
        anchors[i] = Some(body.to_local(&new_anchor).into());
        out[i] = n * f_n + f_t;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wall {
    /// The wall occupies `x ≥ x`; its face normal points to −x.
    pub x: f64,
    pub k: f64,
    pub b: f64,
}

/// Wall force on the box: `(force, moment about box center, normal magnitude)`.
pub fn wall_contact(body: &BoxBody, wall: &Wall) -> (Vector2<f64>, f64, f64) {
    let mut force = Vector2::zeros();
    let mut moment = 0.0;
    let mut normal = 0.0;
    for corner in body.corners() {
        let pen = corner.x - wall.x;
        if pen <= 0.0 {
            continue;
        }
        let vx = body.point_velocity(&corner).x;
        let f = (wall.k * pen + wall.b * vx).max(0.0);
        let r = corner - body.center();
        force.x -= f;
        moment += r.y * f;
        normal += f;
    }
    (force, moment, normal)
}

/// Advance the box one step under applied force/moment (about its center)
/// and the upward hand lift, with Coulomb ground friction.
pub fn box_friction_step(body: &BoxBody, force: Vector2<f64>, moment: f64, lift: f64, g: f64, dt: f64) -> BoxBody {
    let normal = body.normal_load(lift, g);
    let mut next = *body;

    let v = Vector2::new(body.vel[0], body.vel[1]);
    let static_limit = body.mu_s * normal;
    let kinetic = body.mu_k * normal;
    let new_v = if v == Vector2::zeros() {
        if force.norm() <= static_limit {
            Vector2::zeros()
        } else {
            v + (force - force.normalize() * kinetic) * (dt / body.mass)
        }
    } else {
        let candidate = v + (force - v.normalize() * kinetic) * (dt / body.mass);
        let reversed = candidate.dot(&v) <= 0.0;
        if reversed || (candidate.norm() < LINEAR_DEADBAND && force.norm() <= static_limit) {
            Vector2::zeros()
        } else {
            candidate
        }
    };

    let inertia = body.yaw_inertia();
    let radius = body.friction_radius();
    let w = body.vel[2];
    let static_moment = static_limit * radius;
    let kinetic_moment = kinetic * radius;
    let new_w = if w == 0.0 {
        if moment.abs() <= static_moment {
            0.0
        } else {
            w + (moment - moment.signum() * kinetic_moment) * dt / inertia
        }
    } else {
        let candidate = w + (moment - w.signum() * kinetic_moment) * dt / inertia;
        if candidate * w <= 0.0 || (candidate.abs() < ANGULAR_DEADBAND && moment.abs() <= static_moment) {
            0.0
        } else {
            candidate
        }
    };

    next.vel = [new_v.x, new_v.y, new_w];
    next.pose = [
        body.pose[0] + new_v.x * dt,
        body.pose[1] + new_v.y * dt,
        body.pose[2] + new_w * dt,
    ];
    next
}
