"""Exception types raised by the library."""


class DomainError(ValueError):
    """A parameter lies outside its admissible range."""

    def __init__(self, field, value, constraint):
        self.field = field
        self.value = value
        self.constraint = constraint
        super().__init__(f"{field}={value!r} violates {constraint}")


class DegenerateAlphaError(ArithmeticError):
    """The leading coefficient 1 + beta5 * psi_t dropped below the floor."""

    def __init__(self, alpha_min, floor, time=None):
        self.alpha_min = alpha_min
        self.floor = floor
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(
            f"non-degeneracy lost{where}: min(alpha)={alpha_min:.6g} <= {floor:.3g}"
        )


class LinearSolverError(RuntimeError):
    """The iterative linear solve did not reach the requested tolerance."""

    def __init__(self, residual, tol, iterations):
        self.residual = residual
        self.tol = tol
        self.iterations = iterations
        super().__init__(
            f"linear solver stopped after {iterations} iterations with "
            f"relative residual {residual:.3e} > {tol:.3e}"
        )


class UnsupportedModelError(ValueError):
    """The requested operation is not defined for this model family."""


class InsufficientSamplesError(ValueError):
    """A trajectory has too few samples for the requested diagnostic."""


class ConfigError(ValueError):
    """A run configuration failed to parse or validate."""

    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"[{key}] "
        super().__init__(prefix + message)
