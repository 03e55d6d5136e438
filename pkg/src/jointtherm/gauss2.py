"""Two-term Gaussian temperature-profile model and its least-squares fit.

The model is::

    f(x) = a1 exp(-((x - b1) / c1)^2) + a2 exp(-((x - b2) / c2)^2)

with ``x`` a sample index. Profiles are fitted by Levenberg-Marquardt with
Marquardt's diagonal scaling and the analytic Jacobian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, UndefinedMetricError

LAMBDA0 = 1e-3
MAX_ITER = 200
REL_TOL = 1e-10
_LAMBDA_MAX = 1e16


@dataclass(frozen=True)
class Gauss2Coefficients:
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float

    def __post_init__(self):
        v = self.as_array()
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("Gauss2 coefficients must be finite")
        if self.c1 == 0 or self.c2 == 0:
            raise ConfigurationError("Gauss2 widths c1, c2 must be non-zero")

    def as_array(self):
        return np.array([self.a1, self.b1, self.c1, self.a2, self.b2, self.c2], dtype=float)

    @classmethod
    def from_array(cls, p):
        return cls(*(float(v) for v in p))

    def canonical(self):
        """Positive widths, larger-amplitude term first."""
        t1 = (self.a1, self.b1, abs(self.c1))
        t2 = (self.a2, self.b2, abs(self.c2))
        if t2[0] > t1[0]:
            t1, t2 = t2, t1
        return Gauss2Coefficients(*t1, *t2)

    def to_dict(self):
        return {k: getattr(self, k) for k in ("a1", "b1", "c1", "a2", "b2", "c2")}


# Fitted profile of the 4th joint reported for the recorded robot data.
PUBLISHED_COEFFICIENTS = Gauss2Coefficients(a1=34.07, b1=276.0, c1=743.2,
                                        a2=1.668, b2=-26.71, c2=103.0)
PUBLISHED_RMSE = 0.081294
PUBLISHED_R_SQUARED = 0.9897


@dataclass
class FitReport:
    coefficients: Gauss2Coefficients
    rmse: float
    r_squared: float
    iterations: int
    converged: bool
    degenerate: bool = False
    ssr_history: list = field(default_factory=list)

    def to_dict(self):
        return {
            "coefficients": self.coefficients.to_dict(),
            "rmse": self.rmse,
            "r_squared": self.r_squared,
            "iterations": self.iterations,
            "converged": self.converged,
            "degenerate": self.degenerate,
        }


def _unpack(coeffs):
    if isinstance(coeffs, Gauss2Coefficients):
        return coeffs.as_array()
    return np.asarray(coeffs, dtype=float)


def eval_gauss2(coeffs, x):
    """Evaluate the model at ``x`` (scalar or array)."""
    a1, b1, c1, a2, b2, c2 = _unpack(coeffs)
    x = np.asarray(x, dtype=float)
    return a1 * np.exp(-((x - b1) / c1) ** 2) + a2 * np.exp(-((x - b2) / c2) ** 2)


def gauss2_jacobian(coeffs, x):
    """Partial derivatives of the model w.r.t. (a1, b1, c1, a2, b2, c2).

    Returns shape ``(6,)`` for scalar ``x`` or ``(len(x), 6)`` otherwise.
    """
    p = _unpack(coeffs)
    x = np.asarray(x, dtype=float)
    cols = []
    for a, b, c in (p[0:3], p[3:6]):
        u = (x - b) / c
        e = np.exp(-u * u)
        cols += [e, a * e * 2.0 * u / c, a * e * 2.0 * u * u / c]
    return np.stack(cols, axis=-1)


def r_squared(predictions, truth):
    """Coefficient of determination ``1 - SS_res / SS_tot``.

    Raises
    ------
    UndefinedMetricError
        When ``truth`` is constant (``SS_tot == 0``).
    """
    p = np.asarray(predictions, dtype=float).ravel()
    y = np.asarray(truth, dtype=float).ravel()
    if p.shape != y.shape or y.size == 0:
        raise ConfigurationError("predictions and truth must be equal, non-empty lengths")
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedMetricError("R^2 is undefined for constant truth")
    return float(1.0 - np.sum((y - p) ** 2) / ss_tot)


def auto_init(x, y):
    """Starting point: one broad term on the peak plus a small early term."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(x.max() - x.min()) or 1.0
    i = int(np.argmax(y))
    a1 = float(y[i])
    return Gauss2Coefficients(a1=a1, b1=float(x[i]), c1=span / 2,
                              a2=0.05 * a1, b2=float(x.min()), c2=span / 10)


def _solve_step(J, r, lam):
    A = J.T @ J
    g = J.T @ r
    diag = np.diag(A).copy()
    diag[diag == 0] = 1.0
    M = A + lam * np.diag(diag)
    try:
        return np.linalg.solve(M, -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, -g, rcond=None)[0]


def _levenberg_marquardt(p, x, y, free, max_iter, lambda0, rel_tol, history):
    """Minimize the squared residuals over the parameters indexed by ``free``.

    Returns ``(p, iterations, converged)``. Accepted steps never increase the
    residual sum of squares; each accepted value is appended to ``history``.
    """
    p = p.copy()
    r = eval_gauss2(p, x) - y
    ssr = float(r @ r)
    lam = lambda0
    for it in range(1, max_iter + 1):
        J = gauss2_jacobian(p, x)[:, free]
        while True:
            trial = p.copy()
            trial[free] += _solve_step(J, r, lam)
            if trial[2] != 0 and trial[5] != 0 and np.all(np.isfinite(trial)):
                r_trial = eval_gauss2(trial, x) - y
                ssr_trial = float(r_trial @ r_trial)
            else:
                ssr_trial = np.inf
            if ssr_trial <= ssr:
                break
            lam *= 10.0
            if lam > _LAMBDA_MAX:
                # no descent direction left at working precision
                return p, it, True
        improvement = (ssr - ssr_trial) / ssr if ssr > 0 else 0.0
        p, r, ssr = trial, r_trial, ssr_trial
        history.append(ssr)
        lam = max(lam / 10.0, 1e-15)
        if ssr == 0.0 or improvement < rel_tol:
            return p, it, True
    return p, max_iter, False


def fit_gauss2(x, y=None, init=None, max_iter=MAX_ITER, lambda0=LAMBDA0, rel_tol=REL_TOL):
    """Fit the two-term Gaussian model to a temperature profile.

    The fit runs in two Levenberg-Marquardt stages. The dominant term (larger
    ``|a|`` at the start) is fitted first with the other term frozen, then all
    six coefficients are refined together. Fitting all six at once from a
    rough start tends to slide into a valley where two huge, nearly equal
    terms cancel.

    Parameters
    ----------
    x, y : array_like
        Sample positions and temperatures. If ``y`` is omitted, ``x`` is an
        ``(n, 2)`` array of ``(x, temperature)`` pairs.
    init : Gauss2Coefficients, optional
        Starting point; :func:`auto_init` when omitted.
    max_iter : int
        Iteration cap for each stage.

    Returns
    -------
    FitReport
        Non-convergence is reported via ``converged=False`` rather than
        raised.
    """
    if y is None:
        xy = np.asarray(x, dtype=float)
        x, y = xy[:, 0], xy[:, 1]
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ConfigurationError("x and y differ in length")
    if x.size < 6:
        raise ConfigurationError(f"need at least 6 samples to fit 6 coefficients, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ConfigurationError("samples must be finite")

    p = (init if init is not None else auto_init(x, y)).as_array()
    r0 = eval_gauss2(p, x) - y
    history = [float(r0 @ r0)]
    dominant = [0, 1, 2] if abs(p[0]) >= abs(p[3]) else [3, 4, 5]
    p, it1, _ = _levenberg_marquardt(p, x, y, dominant, max_iter, lambda0, rel_tol, history)
    p, it2, converged = _levenberg_marquardt(p, x, y, list(range(6)), max_iter, lambda0,
                                             rel_tol, history)

    coeffs = Gauss2Coefficients.from_array(p).canonical()
    pred = eval_gauss2(coeffs, x)
    rmse = float(np.sqrt(np.mean((pred - y) ** 2)))
    degenerate = False
    try:
        r2 = r_squared(pred, y)
    except UndefinedMetricError:
        # constant profile: no variance to explain
        warnings.warn("constant temperature profile; R^2 reported as 0", stacklevel=2)
        r2, degenerate = 0.0, True
    return FitReport(coeffs, rmse, r2, it1 + it2, converged, degenerate, history)


def read_profile_csv(path):
    """Read a 2-column ``x,temperature`` CSV (header optional)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ConfigurationError(f"{path}:{lineno}: expected 2 columns, found {len(parts)}")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                if lineno == 1:
                    continue
                raise ConfigurationError(f"{path}:{lineno}: non-numeric value") from None
    return np.array(rows, dtype=float).reshape(-1, 2)
