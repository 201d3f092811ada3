"""Hot per-row reduction kernels, with numba and pure-numpy implementations.

Two fused reductions cover every heavy loop in the package:

``tilt_reductions(z, e, lam)``
    Sums over rows of the mixture log-term ``log(1 - lam + lam*e_i)`` and the
    derivative building blocks needed by the profile objectives:
    ``L   = sum log(den_i)``
    ``s1  = sum (e_i - 1) / den_i``
    ``s2  = sum (e_i - 1)^2 / den_i^2``
    ``v1  = sum e_i z_i / den_i``
    ``v2  = sum e_i z_i / den_i^2``
    ``M2  = sum e_i z_i z_i^T / den_i^2``
    with ``den_i = 1 - lam + lam * e_i``.

``weighted_tilt_moments(z, w, e, lam)``
    Weighted single-power moments used by the variance integrals:
    ``q0 = sum w_i (1 - e_i)^2 / den_i``
    ``v  = sum w_i e_i z_i / den_i``
    ``M  = sum w_i e_i z_i z_i^T / den_i``

Backend selection: environment variable ``TILTMIX_BACKEND`` set to ``numba``
or ``numpy``. Default is numba when importable, numpy otherwise. Both
implementations are exported unconditionally (the numba pair is ``None`` when
numba is unavailable) so the benchmark can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None
    HAS_NUMBA = False

__all__ = [
    "BACKEND",
    "HAS_NUMBA",
    "tilt_reductions",
    "weighted_tilt_moments",
    "tilt_reductions_numpy",
    "weighted_tilt_moments_numpy",
    "tilt_reductions_numba",
    "weighted_tilt_moments_numba",
]


def tilt_reductions_numpy(z: np.ndarray, e: np.ndarray, lam: float):
    den = 1.0 - lam + lam * e
    r = (e - 1.0) / den
    u1 = e / den
    u2 = u1 / den
    L = float(np.log(den).sum())
    s1 = float(r.sum())
    s2 = float((r * r).sum())
    v1 = z.T @ u1
    v2 = z.T @ u2
    M2 = (z * u2[:, None]).T @ z
    return L, s1, s2, v1, v2, M2


def weighted_tilt_moments_numpy(z: np.ndarray, w: np.ndarray, e: np.ndarray, lam: float):
    den = 1.0 - lam + lam * e
    q0 = float((w * (1.0 - e) ** 2 / den).sum())
    u = w * e / den
    v = z.T @ u
    M = (z * u[:, None]).T @ z
    return q0, v, M


if HAS_NUMBA:

    @njit(cache=True)
    def tilt_reductions_numba(z, e, lam):  # pragma: no cover - jitted
        m, q = z.shape
        L = 0.0
        s1 = 0.0
        s2 = 0.0
        v1 = np.zeros(q)
        v2 = np.zeros(q)
        M2 = np.zeros((q, q))
        for i in range(m):
            ei = e[i]
            den = 1.0 - lam + lam * ei
            L += np.log(den)
            r = (ei - 1.0) / den
            s1 += r
            s2 += r * r
            u1 = ei / den
            u2 = u1 / den
            for j in range(q):
                zij = z[i, j]
                v1[j] += u1 * zij
                v2[j] += u2 * zij
                for k in range(j, q):
                    M2[j, k] += u2 * zij * z[i, k]
        for j in range(q):
            for k in range(j):
                M2[j, k] = M2[k, j]
        return L, s1, s2, v1, v2, M2

    @njit(cache=True)
    def weighted_tilt_moments_numba(z, w, e, lam):  # pragma: no cover - jitted
        m, q = z.shape
        q0 = 0.0
        v = np.zeros(q)
        M = np.zeros((q, q))
        for i in range(m):
            ei = e[i]
            den = 1.0 - lam + lam * ei
            oneme = 1.0 - ei
            q0 += w[i] * oneme * oneme / den
            u = w[i] * ei / den
            for j in range(q):
                zij = z[i, j]
                v[j] += u * zij
                for k in range(j, q):
                    M[j, k] += u * zij * z[i, k]
        for j in range(q):
            for k in range(j):
                M[j, k] = M[k, j]
        return q0, v, M

else:  # pragma: no cover - exercised only without numba
    tilt_reductions_numba = None
    weighted_tilt_moments_numba = None


def _select_backend() -> str:
    requested = os.environ.get("TILTMIX_BACKEND", "").strip().lower()
    if requested == "numpy":
        return "numpy"
    if requested == "numba":
        if not HAS_NUMBA:
            raise ImportError(
                "TILTMIX_BACKEND=numba requested but numba is not importable"
            )
        return "numba"
    if requested:
        raise ValueError(
            f"TILTMIX_BACKEND must be 'numba' or 'numpy', got {requested!r}"
        )
    return "numba" if HAS_NUMBA else "numpy"


BACKEND = _select_backend()

if BACKEND == "numba":
    tilt_reductions = tilt_reductions_numba
    weighted_tilt_moments = weighted_tilt_moments_numba
else:
    tilt_reductions = tilt_reductions_numpy
    weighted_tilt_moments = weighted_tilt_moments_numpy
