"""Block-diagonalisation precoder built from SVD null spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, ConfigError

__all__ = [
    "PrecoderSet",
    "check_bd_dimensions",
    "null_space_basis",
    "build_bd_precoder",
    "effective_channels",
    "effective_rx",
]


@dataclass(frozen=True)
class PrecoderSet:
    """Per-user precoders and the effective channels they induce.

    ``f_blocks`` has shape ``(n_u, n_tx, n_s)``; ``eff_channels`` holds
    ``H_k F_k`` with shape ``(n_u, n_rx, n_s)``, evaluated on the CSIT rows.
    """

    f_blocks: np.ndarray
    eff_channels: np.ndarray

    @property
    def n_u(self) -> int:
        return self.f_blocks.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Stacked precoder ``F = [F_0 ... F_{n_u-1}]``."""
        n_u, n_tx, n_s = self.f_blocks.shape
        return self.f_blocks.transpose(1, 0, 2).reshape(n_tx, n_u * n_s)


def check_bd_dimensions(n_u: int, n_rx: int, n_tx: int, n_s: int) -> None:
    """Raise :class:`ConfigError` naming the violated BD feasibility bound."""
    if n_s * n_u > n_tx:
        raise ConfigError(f"n_s <= n_tx/n_u violated: {n_s} > {n_tx}/{n_u}")
    null_dim = n_tx - (n_u - 1) * n_rx
    if null_dim < n_s:
        raise ConfigError(
            f"n_tx - (n_u-1)*n_rx >= n_s violated: null-space dimension {null_dim} < n_s={n_s}")


def _numerical_ranks(s: np.ndarray, m: int, n: int) -> np.ndarray:
    tol = max(m, n) * np.finfo(float).eps * s[..., :1]
    return np.sum(s > tol, axis=-1)


def null_space_basis(a: np.ndarray) -> np.ndarray:
    """Orthonormal null-space basis of one matrix from its right singular vectors.

    Singular values below ``max(m, n) * eps * s_max`` count as zero.
    """
    m, n = a.shape
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(_numerical_ranks(s, m, n))
    return vh[rank:].conj().T


def _others(h_blocks: np.ndarray) -> np.ndarray:
    # (n_u, n_rx, n_tx) -> (n_u, (n_u-1) n_rx, n_tx), user k's own rows removed
    n_u, n_rx, n_tx = h_blocks.shape
    idx = np.array([[j for j in range(n_u) if j != k] for k in range(n_u)], dtype=int)
    return h_blocks[idx].reshape(n_u, (n_u - 1) * n_rx, n_tx)


def build_bd_precoder(channel: ChannelSet, n_s: int) -> PrecoderSet:
    """BD precoder from the CSIT channel.

    For every user the other users' CSIT rows are stacked and ``F_k`` is
    set to the first ``n_s`` right singular vectors spanning their null
    space.
    """
    n_u, n_rx, n_tx = channel.n_u, channel.n_rx, channel.n_tx
    check_bd_dimensions(n_u, n_rx, n_tx, n_s)
    hb = channel.blocks(csit=True)
    if n_u == 1:
        f = np.eye(n_tx, dtype=complex)[None, :, :n_s]
    else:
        others = _others(hb)
        _, s, vh = np.linalg.svd(others, full_matrices=True)
        ranks = _numerical_ranks(s, *others.shape[-2:])
        f = np.empty((n_u, n_tx, n_s), dtype=complex)
        for k in range(n_u):
            if n_tx - ranks[k] < n_s:
                raise np.linalg.LinAlgError(
                    f"rank-deficient interference channel for user {k}: "
                    f"null space {n_tx - ranks[k]} < n_s={n_s}")
            f[k] = vh[k, ranks[k]:ranks[k] + n_s].conj().T
    return PrecoderSet(f_blocks=f, eff_channels=hb @ f)


def effective_channels(h: np.ndarray, precoder: PrecoderSet, n_rx: int) -> np.ndarray:
    """``H_k F_k`` for every user against an arbitrary stacked channel ``h``."""
    n_u = precoder.n_u
    return h.reshape(n_u, n_rx, -1) @ precoder.f_blocks


def effective_rx(h: np.ndarray, precoder: PrecoderSet, s: np.ndarray, n_rx: int) -> np.ndarray:
    """Noise-free per-user receive vectors ``H_k F_k s_k``.

    ``s`` holds the dense user symbols, shape ``(n_u, n_s)``; the result is
    ``(n_u, n_rx)``.
    """
    heff = effective_channels(h, precoder, n_rx)
    return np.einsum("kij,kj->ki", heff, s)
