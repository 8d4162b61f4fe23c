"""Contact-dynamics toolkit.

Continuous gated contact forces on arbitrary surfaces, coupled articulated
body / rigid object Euler-Lagrange dynamics, a torque-and-coefficient
recovery solver, a forward-simulation oracle, and physical-plausibility
metrics.  See README.md for the file formats, CLI, and HTTP service.
"""

__version__ = "0.1.0"
