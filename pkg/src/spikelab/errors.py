"""Exception types shared across the package."""


class SpikelabError(Exception):
    """Base class for all errors raised by spikelab."""


class ModelError(SpikelabError, ValueError):
    """A model assumption is violated (for example N/p <= 1)."""


class TransitionWindow(ModelError):
    """A spike lies in [1 - 1/gamma, 1 + 1/gamma] and does not detach from the sea."""

    def __init__(self, alpha, gamma_sq, message=None):
        self.alpha = alpha
        self.gamma_sq = gamma_sq
        if message is None:
            message = (
                f"spike alpha={alpha!r} is inside the transition window "
                f"|alpha - 1| <= {gamma_sq ** -0.5:.6g} for gamma^2={gamma_sq!r}"
            )
        super().__init__(message)


class NonConvergence(SpikelabError, ArithmeticError):
    """An iterative routine exhausted its budget before meeting its tolerance."""


class DegenerateProjection(SpikelabError, ArithmeticError):
    """A sample eigenvector is (numerically) orthogonal to the spike block."""


class PackMismatch(SpikelabError):
    """An extreme eigenvalue assigned to a pack lies inside the MP sea."""


class TooFewSamples(SpikelabError, ValueError):
    """Not enough samples for the requested statistic."""


class ShapeMismatch(SpikelabError, ValueError):
    """Empirical and theoretical quantities have different shapes."""
