# errors.py
from typing import List, Optional


class TdcrError(Exception):
    """모든 도메인 오류의 기반 클래스. exit_code는 CLI 종료 코드로 그대로 쓰인다."""

    exit_code = 1


class InputDomainError(TdcrError, ValueError):
    pass


class UndefinedMetricError(InputDomainError):
    pass


class SolverDegeneracyError(TdcrError):
    def __init__(self, message: str, condition: float):
        super().__init__(message)
        self.condition = condition


class IntegrationBlowupError(TdcrError):
    def __init__(self, s: float):
        super().__init__(f"non-finite rod state at s={s:.6g}")
        self.s = s


class NonConvergenceError(TdcrError):
    def __init__(self, best_residual: float, iterations: int = 0):
        super().__init__(f"shooting did not converge (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.iterations = iterations


class FrameDegeneracyError(TdcrError):
    def __init__(self, message: str, sample_index: Optional[int] = None):
        if sample_index is not None:
            message = f"{message} (sample {sample_index})"
        super().__init__(message)
        self.sample_index = sample_index


class NonFiniteError(TdcrError):
    def __init__(self, block: str, detail: str = ""):
        message = f"non-finite values in parameter block '{block}'"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.block = block


class GenerationAbortedError(TdcrError):
    def __init__(self, failures: int, attempts: int, limit: float):
        super().__init__(
            f"{failures}/{attempts} solves failed (limit {limit:.0%}); "
            "this points at solver robustness, not at the sampled data"
        )
        self.failures = failures
        self.attempts = attempts


class FormatError(TdcrError, ValueError):
    pass


class ChecksumError(FormatError):
    pass


class ArchitectureMismatchError(FormatError):
    pass


class ConfigError(TdcrError):
    exit_code = 2

    def __init__(self, message: str, pointers: Optional[List[str]] = None):
        super().__init__(message)
        self.pointers = pointers or []


class VerificationError(TdcrError):
    def __init__(self, message: str, row: Optional[int] = None, deviation: float = 0.0):
        super().__init__(message)
        self.row = row
        self.deviation = deviation
