"""Independent reference values for the spectral numbers.

* ``classical_eigen_p2``: closed form for p = q = 2 and unit weights.
* ``shoot_pq_laplacian``: for unit weights, ``g = T f`` satisfies
  ``-((g')_(p))' = lam g_(q)`` with ``g(a) = 0`` and, because ``T*`` vanishes
  at b, ``g'(b) = 0``. The first-order form ``w' = y_(p')``,
  ``y' = -lam w_(q)`` is shot from ``(w, y)(a) = (0, y0)`` with a fixed-step
  RK4 scheme and lam is adjusted until ``y(b) = 0`` after exactly n interior
  zeros of ``y``.
* ``svd_eigen_p2``: for p = q = 2 the system is linear and ``lam_n`` is
  ``s_{n+1}(T)^(-2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailed, NotApplicable, ResourceLimit, ValidationError
from .function_space import Interval, check_exponent, conjugate
from .operator import ProblemSpec, dense_T

SVD_MAX_NODES = 4097


def classical_eigen_p2(n: int, interval: Interval | tuple[float, float] = (0.0, 1.0)) -> float:
    """``((n + 1/2) pi / (b - a))**2``."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    if not isinstance(interval, Interval):
        interval = Interval(*map(float, interval))
    return ((n + 0.5) * math.pi / interval.length) ** 2


@dataclass(frozen=True)
class ShootingConfig:
    ode_steps: int = 8000
    bracket_tol: float = 1e-13
    lambda_bracket: tuple[float, float] = (0.1, 10.0)
    batch: int = 64

    def __post_init__(self):
        lo, hi = self.lambda_bracket
        if not 0.0 < lo < hi:
            raise ValidationError("lambda_bracket needs 0 < lo < hi")
        if self.ode_steps < 1000:
            raise ValidationError("ode_steps must be >= 1000")
        if self.bracket_tol <= 0:
            raise ValidationError("bracket_tol must be positive")
        if self.batch < 3:
            raise ValidationError("batch must be >= 3")

    def to_dict(self) -> dict:
        return {
            "ode_steps": self.ode_steps,
            "bracket_tol": self.bracket_tol,
            "lambda_bracket": list(self.lambda_bracket),
            "batch": self.batch,
        }


def _spow(t, e):
    return np.sign(t) * np.abs(t) ** e


def _shoot(p: float, q: float, lam: np.ndarray, length: float, steps: int, y0: float = 1.0):
    """RK4 over ``[0, length]`` for every lam at once.

    Returns ``y(b)``, the number of sign changes of ``y`` on ``(a, b]`` and
    ``int |w'|^p`` (carried as a third ODE component).
    """
    lam = np.asarray(lam, dtype=float)
    pc = conjugate(p)
    h = length / steps
    ep, eq = pc - 1.0, q - 1.0

    def rhs(w, y):
        wp = _spow(y, ep)
        return wp, -lam * _spow(w, eq), np.abs(y) ** pc

    w = np.zeros_like(lam)
    y = np.full_like(lam, y0)
    e = np.zeros_like(lam)
    sign = np.sign(y)
    count = np.zeros(lam.shape, dtype=int)
    for _ in range(steps):
        k1 = rhs(w, y)
        k2 = rhs(w + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
        k3 = rhs(w + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
        k4 = rhs(w + h * k3[0], y + h * k3[1])
        w = w + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        e = e + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        s = np.sign(y)
        flip = (s != 0) & (s != sign)
        count += flip
        sign = np.where(s != 0, s, sign)
    return y, count, e


def shoot_pq_laplacian(
    p: float,
    q: float,
    n: int,
    interval: Interval | tuple[float, float] = (0.0, 1.0),
    config: ShootingConfig | None = None,
    y0: float = 1.0,
) -> float:
    """Spectral number with n interior zeros for unit weights, by shooting.

    The shot solution ``w`` solves the system with ``f = w'`` and the ODE
    eigenvalue, but ``||w'||_p != 1``; scaling to ``m w`` with
    ``m = ||w'||_p^(-1)`` multiplies the eigenvalue by ``m^(p - q)``.

    Raises:
        BracketFailed: if the bracket cannot be widened to enclose the
            transition from n to n + 1 zeros, or the integration overflows
            while searching for it.
    """
    p, q = check_exponent(p, "p"), check_exponent(q, "q")
    if n < 0:
        raise ValidationError("n must be >= 0")
    if y0 <= 0:
        raise ValidationError("initial slope must be positive")
    config = config or ShootingConfig()
    if not isinstance(interval, Interval):
        interval = Interval(*map(float, interval))
    L, steps = interval.length, config.ode_steps

    def counts(lams):
        with np.errstate(over="ignore", invalid="ignore"):
            y_end, c, _ = _shoot(p, q, lams, L, steps, y0)
        if not np.all(np.isfinite(y_end)):
            raise BracketFailed("the shot blew up before the bracket was found; raise ode_steps")
        return c

    lo, hi = config.lambda_bracket
    # batched k-section: every pass integrates a geometric fan of lam values
    for _ in range(100):
        fan = np.geomspace(lo, hi, config.batch)
        c = counts(fan)
        if c[0] > n:
            lo, hi = lo * (lo / hi), lo
            continue
        if c[-1] <= n:
            lo, hi = hi, hi * (hi / lo)
            continue
        k = int(np.argmax(c > n))
        lo, hi = fan[k - 1], fan[k]
        if c[k - 1] == n and c[k] == n + 1 and hi / lo - 1.0 < 1e-3:
            break
    else:
        raise BracketFailed(f"could not bracket the transition from {n} to {n + 1} zeros")

    def miss(lam):
        return _shoot(p, q, np.array([lam]), L, steps, y0)[0][0]

    lam = brentq(miss, lo, hi, xtol=1e-300, rtol=max(config.bracket_tol, 4 * np.finfo(float).eps))
    _, _, energy = _shoot(p, q, np.array([lam]), L, steps, y0)
    m = energy[0] ** (-1.0 / p)
    return float(lam * m ** (p - q))


def svd_eigen_p2(spec: ProblemSpec, count: int) -> list[float]:
    """Leading singular values ``s_1 >= s_2 >= ...`` of the discretized T.

    The quadrature matrix is conjugated with the square roots of the
    trapezoid weights so that the Euclidean norm matches the L_2 norm on
    the grid; ``lam_n = s_{n+1}^(-2)``.

    Raises:
        NotApplicable: unless p = q = 2.
        ResourceLimit: for grids above 4097 nodes.
    """
    if spec.p != 2.0 or spec.q != 2.0:
        raise NotApplicable("the singular-value reduction needs p = q = 2")
    if spec.grid.size > SVD_MAX_NODES:
        raise ResourceLimit(f"dense SVD limited to {SVD_MAX_NODES} nodes")
    if count < 1:
        raise ValidationError("count must be >= 1")
    rw = np.sqrt(spec.grid.weights)
    M = rw[:, None] * dense_T(spec) / rw[None, :]
    s = np.linalg.svd(M, compute_uv=False)
    return [float(t) for t in s[:count]]
