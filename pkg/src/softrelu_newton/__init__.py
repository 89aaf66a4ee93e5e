"""Two-layer softmax-ReLU regression: analytic derivatives, Hessian sketching,
Newton-type solvers and an empirical bound-verification harness."""

__version__ = "0.1.0"
