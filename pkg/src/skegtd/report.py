"""Estimator output container shared by every fitting routine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional


def information_criteria(loglik, n_params, n):
    """AIC, BIC and EDC for a fitted model with ``n_params`` free parameters."""
    return {
        "AIC": -2.0 * loglik + 2.0 * n_params,
        "BIC": -2.0 * loglik + math.log(n) * n_params,
        "EDC": -2.0 * loglik + 0.2 * math.sqrt(n) * n_params,
    }


@dataclass
class FitReport:
    method: str
    params: dict
    loglik: float
    n: int
    n_params: int
    standard_errors: Optional[dict] = None
    converged: bool = True
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def criteria(self):
        return information_criteria(self.loglik, self.n_params, self.n)

    def to_dict(self):
        out = asdict(self)
        out["criteria"] = self.criteria
        return out
