"""synstress: train small PPO control policies, then stress-test them.

Internal stress zeroes parameters through magnitude-threshold masks;
external stress perturbs observations with gradient-based attacks.  Reward
differences between stressed and baseline policies score each sweep cell
and classify it as fragile, robust, or antifragile.
"""
from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
