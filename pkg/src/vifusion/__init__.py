"""Stereo-inertial pose-velocity graph optimization toolkit.

Library layout, one module per subsystem:

- ``manifold``   SO(3)/SE(3) arithmetic (quaternions, Exp/Log, Jacobians)
- ``imu``        bias-corrected preintegration between camera frames
- ``scale``      closed-form translation-scale recovery from flow/depth
- ``graph``      pose-velocity graph residuals, objective, Jacobian assembly
- ``solver``     Levenberg-Marquardt with trust-region damping
- ``frontend``   parametric differentiable odometry correction model
- ``imperative`` bilevel self-supervised training loop (one-step gradients)
- ``sim``        synthetic stereo-inertial world generator
- ``metrics``    ATE / RME / segment-drift trajectory evaluation
- ``io``         TUM/KITTI/CSV/binary file formats and dataset layout
- ``cli``        command-line front door (simulate/optimize/train/eval/grad-check)
"""

__version__ = "0.1.0"
