"""Exception hierarchy shared by all jlm modules."""

from __future__ import annotations


class JLMError(Exception):
    """Base class for every error raised by jlm."""


class ParseError(JLMError):
    def __init__(self, message: str, position: int | None = None, text: str | None = None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
            if text is not None:
                message += f"\n  {text}\n  {' ' * position}^"
        super().__init__(message)


class UnboundSymbol(JLMError):
    pass


class DomainError(JLMError):
    pass


class SamplingExhausted(JLMError):
    pass


class NotElementary(JLMError):
    """Integrand outside the supported antiderivative class."""


class ModelError(JLMError):
    pass


class NonInvertible(JLMError):
    pass


class AnsatzInsufficient(JLMError):
    pass


class DegenerateParameters(JLMError):
    def __init__(self, message: str, constraints: list[str]):
        self.constraints = list(constraints)
        super().__init__(f"{message}: requires " + ", ".join(constraints))


class NotAMultiplier(JLMError):
    pass


class InconsistentIntegral(JLMError):
    pass


class ContextMismatch(JLMError):
    pass


class NotInvertible(JLMError):
    """Variable cannot be eliminated with the supported inversion patterns."""


class IncompatibleQuadratures(JLMError):
    pass


class ResidualDependsOnVelocity(JLMError):
    pass


class NotConserved(JLMError):
    pass


class NonFinite(JLMError):
    def __init__(self, message: str, time: float):
        self.time = time
        super().__init__(f"{message} at t={time:.6g}")
