"""Package exception types."""


class ConfigError(ValueError):
    """Invalid scenario or solver configuration, detected before tick 0."""


class NumericalError(RuntimeError):
    """A numerical operation failed (non-finite state, non-SPD covariance, ...).

    Carries optional context so closed-loop failures report where they happened.
    """

    def __init__(self, message, tick=None, hypothesis=None):
        parts = [message]
        if tick is not None:
            parts.append(f"tick={tick}")
        if hypothesis is not None:
            parts.append(f"hypothesis={hypothesis}")
        super().__init__("; ".join(str(p) for p in parts))
        self.tick = tick
        self.hypothesis = hypothesis
