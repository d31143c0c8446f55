"""Fast invariant checks behind ``ptsdim validate``.

Each check draws a few small random instances and returns a short detail
string; a failed assertion marks the invariant as failed.  Functions are
looked up through their modules at call time so that patched
implementations are exercised.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import channel as _channel
from . import detect as _detect
from . import gsm_map as _gsm
from . import precode as _precode
from . import simkit as _simkit
from . import txgen as _txgen

__all__ = ["CheckResult", "CHECKS", "run_checks"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _symbols(rng, n_u, params, table):
    s = np.zeros((n_u, params.n_s), dtype=complex)
    for k in range(n_u):
        bits = rng.integers(0, 2, params.bits_per_user)
        s[k] = _gsm.densify(_gsm.encode(bits, params, table), params.n_s)
    return s


def check_nulling():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        ch = _channel.draw_channel(rng, 4, 2, 12)
        pre = _precode.build_bd_precoder(ch, 3)
        hb = ch.blocks(csit=True)
        for k, i in itertools.permutations(range(4), 2):
            worst = max(worst, np.linalg.norm(hb[i] @ pre.f_blocks[k]) / np.linalg.norm(hb[i]))
    assert worst <= 1e-9, f"leakage {worst:.2e}"
    return f"max leakage {worst:.2e}"


def check_orthonormality():
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(20):
        ch = _channel.draw_channel(rng, 3, 2, 10, 0.1)
        f = _precode.build_bd_precoder(ch, 3).f_blocks
        eye = np.eye(3)
        worst = max(worst, max(np.linalg.norm(fk.conj().T @ fk - eye) for fk in f))
    assert worst <= 1e-10, f"deviation {worst:.2e}"
    return f"max deviation {worst:.2e}"


def check_round_trip():
    n = 0
    for n_s, n_a, order, reduced in [(4, 2, 4, False), (5, 2, 16, False), (6, 3, 2, False),
                                     (4, 2, 8, False), (5, 3, 4, True)]:
        params = _gsm.IMParams(n_s, n_a, order, reduced=reduced)
        table = _gsm.build_aic_table(params)
        for word in range(1 << params.bits_per_user):
            bits = _gsm.int_to_bits(np.int64(word), params.bits_per_user)
            out = _gsm.decode(_gsm.encode(bits, params, table), params, table)
            assert np.array_equal(out, bits), f"round trip failed for {params}"
            n += 1
    return f"{n} words"


def check_soft_threshold():
    rng = np.random.default_rng(13)
    u = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    v = rng.uniform(0, 2, 500)
    out = _txgen.soft_threshold(u, v)
    assert np.allclose(np.abs(out), np.maximum(np.abs(u) - v, 0), atol=1e-12), "magnitude"
    keep = np.abs(out) > 0
    assert np.allclose(out[keep] / np.abs(out[keep]), u[keep] / np.abs(u[keep])), "phase"
    assert np.isclose(_txgen.soft_threshold(3.0, 1.0), 2.0), "S(3,1) != 2"
    assert np.isclose(_txgen.soft_threshold(4j, 1.0), 3j), "S(4j,1) != 3j"
    return "magnitude, phase and reference values"


def check_transparency():
    rng = np.random.default_rng(14)
    params = _gsm.IMParams(4, 2, 4)
    table = _gsm.build_aic_table(params)
    worst = 0.0
    for _ in range(20):
        ch = _channel.draw_channel(rng, 3, 2, 15)
        pre = _precode.build_bd_precoder(ch, 4)
        s = _symbols(rng, 3, params, table)
        xd = _txgen.tx_direct(pre, s)
        xm = _txgen.tx_min_power(ch.h_csit, ch.h_csit @ xd.x)
        rd, rm = ch.h_true @ xd.x, ch.h_true @ xm.x
        worst = max(worst, np.linalg.norm(rd - rm) / np.linalg.norm(rd))
        assert xm.power <= xd.power * (1 + 1e-12), "min-power exceeds direct power"
    assert worst <= 1e-8, f"received mismatch {worst:.2e}"
    return f"max relative mismatch {worst:.2e}"


def check_ml_oracle():
    rng = np.random.default_rng(15)
    params = _gsm.IMParams(4, 2, 4)
    table = _gsm.build_aic_table(params)
    const = params.constellation
    for _ in range(50):
        h = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
        y = h @ _symbols(rng, 1, params, table)[0] + 0.5 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        sym = _detect.detect_ml(_detect.DetectorInput(y, h, 0.125, params, table))
        best = min(np.linalg.norm(y - h[:, list(c)] @ const.points[list(lab)]) ** 2
                   for c in table.combos for lab in itertools.product(range(4), repeat=2))
        got = np.linalg.norm(y - h[:, list(sym.aic)] @ sym.values) ** 2
        assert got <= best + 1e-9, "ML returned a non-minimal hypothesis"
    return "50 brute-force comparisons"


def check_obmmse_noiseless():
    rng = np.random.default_rng(16)
    params = _gsm.IMParams(4, 2, 16)
    table = _gsm.build_aic_table(params)
    for _ in range(50):
        h = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
        bits = rng.integers(0, 2, params.bits_per_user)
        sym = _gsm.encode(bits, params, table)
        y = h @ _gsm.densify(sym, 4)
        inp = _detect.DetectorInput(y, h, 1e-9, params, table)
        for det in (_detect.detect_obmmse, _detect.detect_ml):
            out = _gsm.decode(det(inp), params, table)
            assert np.array_equal(out, bits), f"{det.__name__} failed on a noiseless input"
    return "50 noiseless instances"


def check_aar_oracle():
    rng = np.random.default_rng(17)
    ratios = []
    for _ in range(40):
        h = (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) / np.sqrt(2)
        x = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2)
        r, p_max = h @ x, float(np.vdot(x, x).real)
        out = _txgen.tx_aar(h, r, _txgen.AarSettings(n_on=2, q_max=200), p_max)
        best = min(_best_support_residual(h, r, list(sup), p_max)
                   for sup in itertools.combinations(range(4), 2))
        assert len(out.support) <= 2 and out.power <= p_max * (1 + 1e-9), "constraint violated"
        ratios.append((out.residual_norm, best))
    mean_aar = np.mean([a for a, _ in ratios])
    mean_best = np.mean([b for _, b in ratios])
    assert mean_aar <= 1.5 * mean_best + 1e-9, f"mean residual {mean_aar:.3g} vs oracle {mean_best:.3g}"
    return f"mean residual {mean_aar:.3g} vs oracle {mean_best:.3g}"


def _best_support_residual(h, r, support, p_max):
    hs = h[:, support]
    xs = np.linalg.lstsq(hs, r, rcond=None)[0]
    if float(np.vdot(xs, xs).real) > p_max:
        # ball-constrained least squares: bisect the Lagrange multiplier
        u, s, vh = np.linalg.svd(hs, full_matrices=False)
        c = u.conj().T @ r
        lo, hi = 0.0, float(s[0] * np.abs(c).max() / np.sqrt(p_max)) + 1.0
        for _ in range(200):
            mu = 0.5 * (lo + hi)
            if np.sum(np.abs(s * c / (s ** 2 + mu)) ** 2) > p_max:
                lo = mu
            else:
                hi = mu
        xs = vh.conj().T @ (s * c / (s ** 2 + hi))
    return float(np.linalg.norm(r - hs @ xs))


def check_flops():
    a = _simkit.flops_min_power(15, 4, 105)
    b = _simkit.flops_aar(15, 4, 105, 80, 100)
    assert a == 618105 and b == 4318830, f"got {a}, {b}"
    return "618105 / 4318830"


CHECKS: List[Callable[[], str]] = [
    check_nulling,
    check_orthonormality,
    check_round_trip,
    check_soft_threshold,
    check_transparency,
    check_ml_oracle,
    check_obmmse_noiseless,
    check_aar_oracle,
    check_flops,
]


def run_checks() -> List[CheckResult]:
    results = []
    for fn in CHECKS:
        name = fn.__name__[len("check_"):]
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as exc:  # noqa: BLE001 - any failure marks the invariant red
            detail, ok = f"{type(exc).__name__}: {exc}", False
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
