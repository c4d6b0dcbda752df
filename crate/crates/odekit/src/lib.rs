//! Fixed-step ODE solving with exact trajectory derivatives.
//!
//! The core is a Butcher-tableau Runge-Kutta integrator ([`ode`]) whose
//! forward-sensitivity augmentation ([`sensitivity`]) turns any model with
//! analytic jacobians into a differentiable map from parameters to
//! trajectories. On top of that sit first-order optimizers and Anderson
//! acceleration ([`optimize`]), Broyden root finders ([`rootfind`]), a small
//! model zoo ([`models`]), a Gray-Scott reaction-diffusion system
//! ([`reaction_diffusion`]), trajectory least-squares fitting ([`estimate`]),
//! and a trainable MLP vector field ([`neural_ode`]).

pub mod estimate;
pub mod models;
pub mod neural_ode;
pub mod ode;
pub mod optimize;
pub mod reaction_diffusion;
pub mod rootfind;
pub mod sensitivity;

pub use ode::{integrate, ButcherTableau, OdeError, RkMethod, TimeGrid, Trajectory};
pub use sensitivity::{integrate_model, integrate_with_sensitivity, OdeModel};
