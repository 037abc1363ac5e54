from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import InvalidParameterError

BACKENDS = ("structured", "dense")


@dataclass(frozen=True)
class SolverParams:
    """Tolerances, caps and knobs of the joint design.

    ``papr_rho=None`` selects the constant-modulus constraint; a value ``rho``
    selects the PAPR-constrained mode, and ``rho == 1`` is folded back into the
    constant-modulus code path.

    ``balance`` fixes the scale of the Dinkelbach matrix ``T`` before ADMM:
    ``T`` is multiplied so that its largest eigenvalue is ``balance`` times the
    largest eigenvalue of ``sum_m H_m^H H_m`` (or ``balance`` itself when there
    are no users). ``balance=None`` leaves ``T`` unscaled.
    """

    mu: float = 4.1
    eps_primal: float = 1e-4
    eps_dual: float = 1e-2
    tol_outer: float = 1e-5
    tol_inner: float = 1e-5
    max_outer: int = 5000
    max_dinkelbach: int = 50
    max_admm: int = 100
    max_mm: int = 500
    admm_retry: int = 10
    stall_outer: int = 300
    beta_margin: float = 1e-10
    papr_rho: float | None = None
    balance: float | None = 3.0
    feas_tol: float = 1e-3
    budget_margin: float = 1e-3
    backend: str = "structured"

    def __post_init__(self):
        if not self.mu > 2:
            raise InvalidParameterError(f"ADMM penalty mu must exceed 2, got {self.mu}")
        for name in ("eps_primal", "eps_dual", "tol_outer", "tol_inner", "beta_margin", "feas_tol"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        for name in ("max_outer", "max_dinkelbach", "max_admm", "max_mm", "admm_retry", "stall_outer"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameterError(f"{name} must be an integer >= 1")
        if self.papr_rho is not None and not self.papr_rho >= 1:
            raise InvalidParameterError(f"papr_rho must be >= 1, got {self.papr_rho}")
        if not 0 <= self.budget_margin < 1:
            raise InvalidParameterError("budget_margin must lie in [0, 1)")
        if self.balance is not None and not self.balance > 0:
            raise InvalidParameterError("balance must be positive or None")
        if self.backend not in BACKENDS:
            raise InvalidParameterError(f"backend must be one of {BACKENDS}")

    @property
    def constant_modulus(self) -> bool:
        return self.papr_rho is None or self.papr_rho == 1

    def check_rho(self, code_length: int) -> None:
        if self.papr_rho is not None and self.papr_rho > code_length:
            raise InvalidParameterError(f"papr_rho must not exceed L={code_length}")

    def replace(self, **changes) -> SolverParams:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))
