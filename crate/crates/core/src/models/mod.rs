pub mod arm;
pub mod dual;
pub mod pendulum;
pub mod yaw;

pub use arm::{
    arm_dynamics_terms, arm_fk, arm_ik_spherical, arm_jacobian, ArmDynamics, ArmModel, IkSolution,
};
pub use pendulum::{
    cartpole_linear_dynamics, cartpole_nonlinear_step, dcm, natural_frequency, DcmValue,
};
pub use yaw::yaw_diffdrive_dynamics;
