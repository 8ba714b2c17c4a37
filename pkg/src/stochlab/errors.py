"""Exception types shared across the workbench.

Validation bugs (bad arguments, malformed config) raise plain ValueError.
ModelError and its subclasses mean the inputs were well formed but the model
itself has no answer; the CLI maps them to a distinct exit code.
"""


class ModelError(Exception):
    """The model admits no answer for these inputs."""


class NoSteadyStateError(ModelError):
    """Queue with traffic intensity >= 1: no steady state, it grows forever."""


class ArbitrageError(ModelError):
    """The binomial market admits an arbitrage opportunity."""


class NonConvergenceError(ModelError):
    """An iterative solver hit its iteration cap without converging."""
