"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid distribution or configuration parameters."""


class DegreesOfFreedomError(ParameterError):
    """Inverse-Wishart degrees of freedom too small for the requested moment."""


class NumericalDegeneracyError(ArithmeticError):
    """A matrix lost positive-definiteness or a variance collapsed.

    ``quantity`` names what failed (``"S"``, ``"V"``, ``"Psi"``, ``"P"``,
    ``"truncation"``); ``step`` and ``iteration`` locate it when known.
    """

    def __init__(self, message, quantity=None, step=None, iteration=None):
        self.quantity = quantity
        self.step = step
        self.iteration = iteration
        where = []
        if step is not None:
            where.append(f"step {step}")
        if iteration is not None:
            where.append(f"VB iteration {iteration}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DivergenceError(ArithmeticError):
    """Simulated trajectory overflowed."""
