"""Problem data, file formats and the least-squares rewrite of the objective.

The problem is

    minimise    (sigma/2) x'Σx + (1/(2 gamma)) ||x||² - kappa mu'x
    subject to  lower <= A x <= upper,  e'x = 1,  x >= 0,  ||x||_0 <= k

with optional minimum investments ``x_i >= x_min_i`` whenever ``x_i > 0``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .qp import QpProblem, solve_qp


class ParseError(ValueError):
    """Raised for malformed instance files; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Instance:
    """Full problem data.

    Exactly one of ``cov`` (dense ``n x n``) and ``cov_factor`` (``r x n``
    with ``Σ = F'F``) is set.  Linear rows are ``lower <= A x <= upper``.
    """

    mu: np.ndarray
    k: int
    gamma: float
    sigma: float = 1.0
    kappa: float = 1.0
    cov: np.ndarray | None = None
    cov_factor: np.ndarray | None = None
    A: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    x_min: np.ndarray | None = None
    names: list[str] | None = None
    name: str = ""

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        n = self.mu.size
        if n < 1:
            raise ValueError("instance needs at least one asset")
        if (self.cov is None) == (self.cov_factor is None):
            raise ValueError("give exactly one of cov and cov_factor")
        if self.cov is not None:
            self.cov = np.asarray(self.cov, dtype=float)
            if self.cov.shape != (n, n):
                raise ValueError(f"cov must be {n}x{n}, got {self.cov.shape}")
            if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > 1e-10:
                raise ValueError("cov is not symmetric")
            lam = float(np.linalg.eigvalsh(self.cov)[0])
            if lam < -1e-8:
                raise ValueError(f"cov is not PSD (smallest eigenvalue {lam:.3e})")
        else:
            self.cov_factor = np.atleast_2d(np.asarray(self.cov_factor, dtype=float))
            if self.cov_factor.shape[1] != n:
                raise ValueError("cov_factor must have n columns")
        if self.A is None:
            self.A = np.zeros((0, n))
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.lower = np.full(m, -np.inf) if self.lower is None else np.asarray(self.lower, float).ravel()
        self.upper = np.full(m, np.inf) if self.upper is None else np.asarray(self.upper, float).ravel()
        if self.lower.size != m or self.upper.size != m:
            raise ValueError("row bounds must match the number of rows")
        if np.any(self.lower > self.upper):
            raise ValueError("some row has lower > upper")
        self.k = int(self.k)
        if not 1 <= self.k <= n:
            raise ValueError(f"k must lie in [1, {n}], got {self.k}")
        self.gamma = float(self.gamma)
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        self.sigma = float(self.sigma)
        self.kappa = float(self.kappa)
        if self.sigma < 0 or self.kappa < 0:
            raise ValueError("sigma and kappa must be nonnegative")
        if self.x_min is not None:
            self.x_min = np.asarray(self.x_min, dtype=float).ravel()
            if self.x_min.size != n or np.any(self.x_min < 0) or np.any(self.x_min > 1):
                raise ValueError("x_min must have n entries in [0, 1]")
            if not np.any(self.x_min > 0):
                self.x_min = None

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def Sigma(self) -> np.ndarray:
        """Dense covariance matrix."""
        if self.cov is not None:
            return self.cov
        return self.cov_factor.T @ self.cov_factor

    def objective(self, x: np.ndarray, regularized: bool = True) -> float:
        x = np.asarray(x, dtype=float)
        val = 0.5 * self.sigma * x @ self.Sigma @ x - self.kappa * self.mu @ x
        if regularized:
            val += 0.5 / self.gamma * x @ x
        return float(val)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-7) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < -tol) or abs(x.sum() - 1.0) > tol:
            return False
        if np.count_nonzero(np.abs(x) > tol) > self.k:
            return False
        ax = self.A @ x
        if np.any(ax < self.lower - tol) or np.any(ax > self.upper + tol):
            return False
        if self.x_min is not None:
            on = x > tol
            if np.any(x[on] < self.x_min[on] - tol):
                return False
        return True

    def with_changes(self, **changes) -> "Instance":
        fields = {
            "mu": self.mu, "k": self.k, "gamma": self.gamma, "sigma": self.sigma,
            "kappa": self.kappa, "cov": self.cov, "cov_factor": self.cov_factor,
            "A": self.A, "lower": self.lower, "upper": self.upper,
            "x_min": self.x_min, "names": self.names, "name": self.name,
        }
        fields.update(changes)
        return Instance(**fields)

    def add_row(self, a, lower=-np.inf, upper=np.inf) -> "Instance":
        """Copy of the instance with one extra linear row."""
        return self.with_changes(
            A=np.vstack([self.A, np.asarray(a, float)[None, :]]),
            lower=np.append(self.lower, lower),
            upper=np.append(self.upper, upper),
        )


@dataclass
class RegressionForm:
    """Least-squares rewrite of the objective.

    With ``σΣ - D = X'X`` the objective equals
    ``0.5||y - Xx||² + sum x_i²/(2 gamma_i) + d'x - c0``.
    """

    X: np.ndarray
    y: np.ndarray
    d: np.ndarray
    c0: float
    gamma_i: np.ndarray
    D: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rank(self) -> int:
        return self.X.shape[0]

    def objective(self, x: np.ndarray) -> float:
        r = self.y - self.X @ x
        return float(0.5 * r @ r + 0.5 * np.sum(x * x / self.gamma_i) + self.d @ x - self.c0)


def gershgorin_diagonal(S: np.ndarray) -> np.ndarray:
    """Largest diagonal ``D >= 0`` keeping ``S - D`` diagonally dominant."""
    off = np.sum(np.abs(S), axis=1) - np.abs(np.diag(S))
    return np.maximum(0.0, np.diag(S) - off)


def safe_gershgorin_diagonal(S: np.ndarray) -> np.ndarray:
    """Gershgorin diagonal, shrunk by a common factor if ``S - D`` is indefinite.

    Rows whose diagonal is smaller than their off-diagonal mass are left
    undominated, so ``S - D`` can lose definiteness; bisection then finds the
    largest ``t`` in ``[0, 1]`` with ``S - tD`` PSD.
    """
    D = gershgorin_diagonal(S)
    if not np.any(D):
        return D

    def min_eig(t):
        return float(np.linalg.eigvalsh(S - t * np.diag(D))[0])

    if min_eig(1.0) >= 0.0:
        return D
    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if min_eig(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo * D


def build_regression_form(inst: Instance, boost="none") -> RegressionForm:
    """Factor ``σΣ - D`` and compute the projected targets.

    ``boost`` is ``"none"``, ``"gershgorin"`` or an array holding the
    diagonal ``D``.  Raises ``ValueError`` when ``σΣ - D`` is indefinite.
    """
    n = inst.n
    if isinstance(boost, str):
        if boost == "none":
            D = np.zeros(n)
        elif boost == "gershgorin":
            D = safe_gershgorin_diagonal(inst.sigma * inst.Sigma)
        else:
            raise ValueError(f"unknown boost policy {boost!r}")
    else:
        D = np.asarray(boost, dtype=float).ravel()
        if D.size != n:
            raise ValueError(f"diagonal has {D.size} entries, expected {n}")
        if np.any(D < 0):
            raise ValueError("diagonal entries must be nonnegative")

    if inst.cov_factor is not None and not np.any(D):
        X = math.sqrt(inst.sigma) * inst.cov_factor
        keep = np.linalg.norm(X, axis=1) > 0
        X = X[keep]
    else:
        S = inst.sigma * inst.Sigma - np.diag(D)
        if np.any(D):
            lam = float(np.linalg.eigvalsh(S)[0])
            if lam < -1e-8:
                raise ValueError(
                    f"diagonal makes the shifted covariance indefinite "
                    f"(smallest eigenvalue {lam:.3e})"
                )
        tol = 1e-10 * max(float(np.trace(S)), 0.0)
        X, _ = kernels.pivoted_cholesky(np.ascontiguousarray(S), max(tol, 1e-300))
    target = inst.kappa * inst.mu
    if X.shape[0]:
        y = np.linalg.lstsq(X.T, target, rcond=None)[0]
        d = X.T @ y - target
    else:
        y = np.zeros(0)
        d = -target
    gamma_i = 1.0 / (1.0 / inst.gamma + D)
    return RegressionForm(X=np.ascontiguousarray(X), y=y, d=d, c0=0.5 * float(y @ y), gamma_i=gamma_i, D=D)


# ---------------------------------------------------------------- file formats


def _encode_float(v: float):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


def _decode_float(v) -> float:
    # float() accepts the "inf"/"-inf" strings as well as numbers
    return float(v)


def to_dict(inst: Instance) -> dict:
    out = {
        "format": "sparseport-instance",
        "version": 1,
        "name": inst.name,
        "n": inst.n,
        "k": inst.k,
        "gamma": inst.gamma,
        "sigma": inst.sigma,
        "kappa": inst.kappa,
        "mu": inst.mu.tolist(),
    }
    if inst.cov is not None:
        out["cov"] = inst.cov.tolist()
    else:
        out["cov_factor"] = inst.cov_factor.tolist()
    out["constraints"] = [
        {"a": inst.A[i].tolist(), "lower": _encode_float(inst.lower[i]), "upper": _encode_float(inst.upper[i])}
        for i in range(inst.m)
    ]
    if inst.x_min is not None:
        out["x_min"] = inst.x_min.tolist()
    if inst.names is not None:
        out["names"] = list(inst.names)
    return out


def from_dict(data: dict) -> Instance:
    try:
        n = int(data["n"])
        rows = data.get("constraints", [])
        A = np.array([r["a"] for r in rows], dtype=float).reshape(len(rows), n)
        lower = np.array([_decode_float(r.get("lower", "-inf")) for r in rows])
        upper = np.array([_decode_float(r.get("upper", "inf")) for r in rows])
        return Instance(
            mu=np.array(data["mu"], dtype=float),
            k=int(data["k"]),
            gamma=float(data["gamma"]),
            sigma=float(data.get("sigma", 1.0)),
            kappa=float(data.get("kappa", 1.0)),
            cov=None if "cov" not in data else np.array(data["cov"], dtype=float),
            cov_factor=None if "cov_factor" not in data else np.array(data["cov_factor"], dtype=float),
            A=A,
            lower=lower,
            upper=upper,
            x_min=None if data.get("x_min") is None else np.array(data["x_min"], dtype=float),
            names=data.get("names"),
            name=data.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad canonical instance: {exc}") from exc


def save_instance(inst: Instance, path) -> None:
    """Write the canonical JSON format (infinities are the strings ``"inf"``/``"-inf"``)."""
    Path(path).write_text(json.dumps(to_dict(inst), indent=1))


def load_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    inst = from_dict(data)
    if not inst.name:
        inst.name = Path(path).stem
    return inst


def load_orlibrary(path, k: int | None = None, gamma: float | None = None,
                   sigma: float = 1.0, kappa: float = 1.0) -> Instance:
    """Read an OR-library portfolio file.

    Layout: the asset count, then one ``mean stddev`` line per asset, then
    ``i j correlation`` lines with 1-based indices.  The covariance is
    ``ρ_ij s_i s_j``; absent pairs have correlation 0 (1 on the diagonal).
    ``gamma`` defaults to ``100/sqrt(n)`` and ``k`` to ``min(10, n)``.
    """
    lines = Path(path).read_text().splitlines()
    tokens = [(no, ln.split()) for no, ln in enumerate(lines, start=1) if ln.strip()]
    if not tokens:
        raise ParseError("empty file", 1)
    no, first = tokens[0]
    try:
        n = int(first[0])
    except ValueError:
        raise ParseError(f"expected the asset count, got {first[0]!r}", no) from None
    if len(first) != 1 or n < 1:
        raise ParseError("first line must hold a positive asset count", no)
    if len(tokens) < n + 1:
        raise ParseError(f"expected {n} asset lines", tokens[-1][0])
    mu = np.empty(n)
    sd = np.empty(n)
    for i in range(n):
        no, parts = tokens[1 + i]
        if len(parts) != 2:
            raise ParseError("expected 'mean stddev'", no)
        try:
            mu[i], sd[i] = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError("non-numeric mean or stddev", no) from None
        if sd[i] < 0:
            raise ParseError("negative standard deviation", no)
    corr = np.eye(n)
    for no, parts in tokens[1 + n:]:
        if len(parts) != 3:
            raise ParseError("expected 'i j correlation'", no)
        try:
            i, j, rho = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise ParseError("non-numeric correlation entry", no) from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParseError("asset index out of range", no)
        if not -1.0 - 1e-12 <= rho <= 1.0 + 1e-12:
            raise ParseError("correlation outside [-1, 1]", no)
        corr[i, j] = corr[j, i] = rho
    cov = corr * np.outer(sd, sd)
    if gamma is None:
        gamma = 100.0 / math.sqrt(n)
    return Instance(
        mu=mu, k=min(10, n) if k is None else k, gamma=gamma, sigma=sigma, kappa=kappa,
        cov=cov, name=Path(path).stem,
    )


def load_returns_csv(path, rank: int, holding_scale: float = 1.0, drop_outliers: bool = False,
                     k: int | None = None, gamma: float | None = None,
                     sigma: float = 1.0, kappa: float = 1.0) -> Instance:
    """Build an instance from a CSV of closing prices (header row of names).

    Log returns give the mean and correlation; the correlation is truncated
    to its top ``rank`` eigenpairs and rescaled by the return standard
    deviations.  ``mu`` and the covariance are multiplied by
    ``holding_scale``.  With ``drop_outliers`` any period in which some
    asset moved by more than 20% is discarded.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError("empty file", 1)
    names = [c.strip() for c in rows[0]]
    n = len(names)
    prices = np.empty((len(rows) - 1, n))
    for t, row in enumerate(rows[1:]):
        if len(row) != n:
            raise ParseError(f"expected {n} columns", t + 2)
        for j, cell in enumerate(row):
            try:
                prices[t, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", t + 2) from None
    T = prices.shape[0]
    if T < 3:
        raise ParseError("need at least 3 price rows")
    if np.any(prices <= 0):
        raise ParseError("prices must be positive")
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if rank > min(T - 1, n):
        raise ValueError(f"rank must not exceed {min(T - 1, n)}")
    if drop_outliers:
        simple = prices[1:] / prices[:-1] - 1.0
        keep = np.all(np.abs(simple) <= 0.2, axis=1)
        rets = np.log(prices[1:] / prices[:-1])[keep]
        if rets.shape[0] < 2:
            raise ValueError("too few periods left after dropping outliers")
    else:
        rets = np.log(prices[1:] / prices[:-1])
    mean = rets.mean(axis=0)
    sd = rets.std(axis=0, ddof=1)
    live = sd > 0
    corr = np.eye(n)
    if np.any(live):
        sub = np.corrcoef(rets[:, live], rowvar=False)
        corr[np.ix_(live, live)] = np.atleast_2d(sub)
    vals, vecs = np.linalg.eigh(corr)
    order = np.argsort(vals)[::-1][:rank]
    vals = np.maximum(vals[order], 0.0)
    factor = (vecs[:, order] * np.sqrt(vals)).T * sd[None, :] * math.sqrt(holding_scale)
    if gamma is None:
        gamma = 100.0 / math.sqrt(n)
    return Instance(
        mu=mean * holding_scale, k=min(10, n) if k is None else k, gamma=gamma,
        sigma=sigma, kappa=kappa, cov_factor=factor, names=names, name=Path(path).stem,
    )


def load_diagonal(path, n: int) -> np.ndarray:
    """One nonnegative value per line."""
    vals = []
    for no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            vals.append(float(line.split()[0]))
        except ValueError:
            raise ParseError(f"non-numeric diagonal entry {line!r}", no) from None
    if len(vals) != n:
        raise ParseError(f"diagonal file has {len(vals)} entries, expected {n}")
    return np.array(vals)


def load_x_min(path, n: int) -> np.ndarray:
    x_min = load_diagonal(path, n)
    if np.any(x_min < 0) or np.any(x_min > 1):
        raise ParseError("minimum investments must lie in [0, 1]")
    return x_min


# ------------------------------------------------------- min-return threshold


def _simplex_qp(Q: np.ndarray, c: np.ndarray):
    n = Q.shape[0]
    res = solve_qp(
        QpProblem(Q=Q, c=c, A=np.ones((1, n)), lo=np.ones(1), hi=np.ones(1), lb=np.zeros(n)),
        tol=1e-12,
    )
    if not res.optimal:
        raise RuntimeError(f"auxiliary QP failed: {res.status}")
    return res.x


def return_range(inst: Instance) -> tuple[float, float]:
    """Returns of the regularised minimum-variance and maximum-return portfolios."""
    n = inst.n
    eye = np.eye(n) / inst.gamma
    x_lo = _simplex_qp(eye + inst.sigma * inst.Sigma, np.zeros(n))
    x_hi = _simplex_qp(eye, -inst.mu)
    return float(inst.mu @ x_lo), float(inst.mu @ x_hi)


def min_return_threshold(inst: Instance, fraction: float = 0.3) -> float:
    """``r_min + fraction (r_max - r_min)`` over the two auxiliary portfolios."""
    r_min, r_max = return_range(inst)
    return r_min + fraction * (r_max - r_min)


def with_min_return(inst: Instance, level: float) -> Instance:
    """Copy of ``inst`` with the row ``mu'x >= level`` appended."""
    return inst.add_row(inst.mu, lower=level)
