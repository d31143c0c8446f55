"""Transmit vector construction: direct BD, least-norm and AAR.

The AAR routine is an accelerated proximal-gradient solver for

    min 1/2 ||r - H x||^2 + lam ||x||_1   s.t.  ||x||^2 <= p_max

followed by support selection and a polishing pass restricted to the
selected columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import ConfigError
from .precode import PrecoderSet

__all__ = [
    "TxSignal",
    "AarSettings",
    "tx_direct",
    "tx_min_power",
    "soft_threshold",
    "project_ball",
    "tx_aar",
    "residual",
    "aar_phase1",
    "aar_polish",
]

MODES = ("direct", "min_power", "aar")


@dataclass(frozen=True)
class TxSignal:
    x: np.ndarray
    mode: str
    support: np.ndarray
    residual_norm: float = 0.0

    @property
    def power(self) -> float:
        return float(np.vdot(self.x, self.x).real)


@dataclass(frozen=True)
class AarSettings:
    """Parameters of the active antenna reduction solver.

    ``lam`` fixes the l1 weight directly; when it is ``None`` the weight is
    ``alpha * ||H^H r||_inf`` for each problem instance.
    """

    n_on: int
    q_max: int = 100
    alpha: float = 0.01
    lam: Optional[float] = None
    accelerate: bool = True
    polish: bool = True
    warm_start: bool = False
    grad_tol: float = 0.0

    def __post_init__(self) -> None:
        if self.n_on <= 0:
            raise ConfigError(f"n_on must be positive, got {self.n_on}")
        if self.q_max < 1:
            raise ConfigError(f"q_max must be >= 1, got {self.q_max}")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.lam is None and not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


def tx_direct(precoder: PrecoderSet, s: np.ndarray) -> TxSignal:
    """``x = sum_k F_k s_k`` for dense user symbols ``s`` of shape ``(n_u, n_s)``."""
    x = np.einsum("kts,ks->t", precoder.f_blocks, s)
    return TxSignal(x=x, mode="direct", support=np.arange(x.size))


def tx_min_power(h: np.ndarray, r: np.ndarray) -> TxSignal:
    """Least-norm ``x`` with ``h @ x == r``.

    Solves ``(h h^H) w = r`` through a Cholesky factorisation and returns
    ``x = h^H w``.  Requires ``h`` to be fat with full row rank.
    """
    m, n = h.shape
    if n < m:
        raise ConfigError(f"min-power transmission needs n_tx >= n_u*n_rx, got {n} < {m}")
    r = np.asarray(r).reshape(m)
    gram = h @ h.conj().T
    try:
        w = cho_solve(cho_factor(gram, lower=False), r)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular Gram matrix in least-norm solve: {exc}") from exc
    x = h.conj().T @ w
    return TxSignal(x=x, mode="min_power", support=np.arange(n))


def soft_threshold(u, v):
    """Complex soft threshold ``max(|u|-v, 0) / (max(|u|-v, 0) + v) * u``.

    Vectorised; ``S(0, 0)`` is defined as 0.
    """
    u = np.asarray(u)
    mag = np.abs(u)
    shrunk = np.maximum(mag - v, 0.0)
    denom = shrunk + v
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, shrunk / np.where(denom > 0, denom, 1.0), 0.0) * u
    return out if out.ndim else out[()]


def project_ball(v: np.ndarray, p_max: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||^2 <= p_max}``."""
    v = np.asarray(v)
    nrm2 = float(np.vdot(v, v).real)
    if nrm2 <= p_max:
        return v
    return v * np.sqrt(p_max / nrm2)


def _momentum(q: int, accelerate: bool) -> float:
    return q / (q + 3.0) if accelerate else 0.0


def aar_phase1(h: np.ndarray, r: np.ndarray, lam: float, q_max: int, p_max: float,
               gamma: float, accelerate: bool = True, grad_tol: float = 0.0) -> np.ndarray:
    """l1-penalised projected gradient with momentum; returns the last iterate."""
    hh = h.conj().T
    x_prev = np.zeros(h.shape[1], dtype=complex)
    z = x_prev
    thr = lam * gamma
    for q in range(1, q_max + 1):
        grad = hh @ (h @ z - r)
        if grad_tol and np.linalg.norm(grad) <= grad_tol:
            break
        x = soft_threshold(project_ball(z - gamma * grad, p_max), thr)
        z = x + _momentum(q, accelerate) * (x - x_prev)
        x_prev = x
    return x_prev


def aar_polish(h_sub: np.ndarray, r: np.ndarray, q_max: int, p_max: float, gamma: float,
               accelerate: bool = True, x0: Optional[np.ndarray] = None,
               grad_tol: float = 0.0) -> np.ndarray:
    """Projected gradient (with momentum) on a fixed column subset."""
    hh = h_sub.conj().T
    x_prev = np.zeros(h_sub.shape[1], dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    z = x_prev
    for q in range(1, q_max + 1):
        grad = hh @ (h_sub @ z - r)
        if grad_tol and np.linalg.norm(grad) <= grad_tol:
            break
        x = project_ball(z - gamma * grad, p_max)
        z = x + _momentum(q, accelerate) * (x - x_prev)
        x_prev = x
    return x_prev


def select_support(x: np.ndarray, n_on: int) -> np.ndarray:
    """Indices of the ``n_on`` largest-magnitude nonzero entries, sorted.

    Ties resolve towards the lowest index; fewer than ``n_on`` indices are
    returned when ``x`` has fewer nonzeros.
    """
    mag = np.abs(x)
    order = np.lexsort((np.arange(x.size), -mag))
    order = order[mag[order] > 0][:n_on]
    return np.sort(order)


def tx_aar(h: np.ndarray, r: np.ndarray, settings: AarSettings, p_max: float) -> TxSignal:
    """Sparse transmit vector with at most ``settings.n_on`` active antennas."""
    m, n = h.shape
    if settings.n_on > n:
        raise ConfigError(f"n_on <= n_tx violated: {settings.n_on} > {n}")
    r = np.asarray(r, dtype=complex).reshape(m)
    if not np.any(r):
        return TxSignal(x=np.zeros(n, dtype=complex), mode="aar",
                        support=np.empty(0, dtype=int), residual_norm=0.0)
    hh_trace = float(np.sum(np.abs(h) ** 2))
    gamma = 1.0 / hh_trace
    lam = settings.lam
    if lam is None:
        lam = settings.alpha * float(np.max(np.abs(h.conj().T @ r)))
    x_hat = aar_phase1(h, r, lam, settings.q_max, p_max, gamma,
                       settings.accelerate, settings.grad_tol)
    support = select_support(x_hat, settings.n_on)
    x = np.zeros(n, dtype=complex)
    if support.size:
        if settings.polish:
            x0 = x_hat[support] if settings.warm_start else None
            x[support] = aar_polish(h[:, support], r, settings.q_max, p_max, gamma,
                                    settings.accelerate, x0, settings.grad_tol)
        else:
            x[support] = x_hat[support]
    return TxSignal(x=x, mode="aar", support=support, residual_norm=residual(h, x, r))


def residual(h: np.ndarray, x: np.ndarray, r: np.ndarray) -> float:
    """``||r - h x||_2``."""
    return float(np.linalg.norm(np.asarray(r).reshape(-1) - h @ x))
