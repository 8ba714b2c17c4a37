"""stochlab: a stochastic-modelling workbench.

Probability laws, arrival processes, Markov chains, queues and
inventories, Wright-Fisher genetics with its diffusion limit, and
binomial/GBM option pricing. Every simulator in the package has a
closed-form or independently computed counterpart that the test suite
checks it against.
"""

from .rng import RngStream

__version__ = "0.1.0"

__all__ = ["RngStream", "__version__"]
