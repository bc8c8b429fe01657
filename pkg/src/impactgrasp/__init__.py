"""Planar dual-arm impact-aware grasping stack.

Modules
-------
dynamics    arm/box kinematics and rigid-body dynamics, contact Jacobians
contact     compliant normal force and regularized friction laws
fields      time-invariant approach and transport velocity fields
predictor   simulation-sampled post-impact velocity model (RBF)
qpsolver    dense active-set QP solver
controller  phase-switched QP controllers and box-state estimate
sim         fixed-step RK4 simulation of the coupled system
harness     validation scenarios, metrics, plot data
"""

__version__ = "0.1.0"
