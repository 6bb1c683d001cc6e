"""Closed-form and simulated OLS for two linear Gaussian SCMs.

Causal graph (the label is an effect of ``x1``; ``x2`` is tied to ``x1`` only
through the confounder ``z``)::

    z = u_z,  x1 = b z + u_x1,  x2 = c z + u_x2,  y = a x1 + u_y

Anticausal graph (the features are effects of the label ``y``)::

    z = u_z,  q = a z + u_q,  y = b z + u_y,  x2 = c q + u_x2,  x1 = d y + u_x1

Either covariate may be observed with additive Gaussian measurement noise
(``var_eps_x1``, ``var_eps_x2``). Every analytic estimate is available through
two routes: the simplified closed forms below, and the generic two-covariate
OLS quotient applied to the model's covariance block. ``fit_ols`` on simulated
draws is the empirical check on both.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import IO, Iterable, Sequence, Union

import numpy as np

from rationale_noise.errors import SingularityError, ValidationError
from rationale_noise.seeding import generator, mix

__all__ = [
    "AnticausalParams",
    "CausalParams",
    "CovarianceSummary",
    "McOptions",
    "NoisyFeature",
    "OlsEstimate",
    "SampleBatch",
    "Setting",
    "SweepRow",
    "anticausal_analytic",
    "anticausal_asymptote",
    "anticausal_covariances",
    "causal_analytic",
    "causal_asymptote",
    "causal_covariances",
    "fit_ols",
    "ols_from_covariances",
    "sample_anticausal",
    "sample_causal",
    "sweep_noise",
    "write_sweep_csv",
]


def _check_params(obj, structural: Sequence[str], measurement: Sequence[str]) -> None:
    for f in fields(obj):
        v = getattr(obj, f.name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ValidationError(f"{type(obj).__name__}.{f.name} must be a finite real, got {v!r}")
    for name in structural:
        if getattr(obj, name) <= 0:
            raise ValidationError(f"{type(obj).__name__}.{name} must be > 0")
    for name in measurement:
        if getattr(obj, name) < 0:
            raise ValidationError(f"{type(obj).__name__}.{name} must be >= 0")


@dataclass(frozen=True)
class CausalParams:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    var_uz: float = 1.0
    var_ux1: float = 1.0
    var_ux2: float = 1.0
    var_uy: float = 1.0
    var_eps_x1: float = 0.0
    var_eps_x2: float = 0.0

    def __post_init__(self):
        _check_params(
            self, ("var_uz", "var_ux1", "var_ux2", "var_uy"), ("var_eps_x1", "var_eps_x2")
        )


@dataclass(frozen=True)
class AnticausalParams:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    d: float = 1.0
    var_uz: float = 1.0
    var_uq: float = 1.0
    var_uy: float = 1.0
    var_ux1: float = 1.0
    var_ux2: float = 1.0
    var_eps_x1: float = 0.0
    var_eps_x2: float = 0.0

    def __post_init__(self):
        _check_params(
            self,
            ("var_uz", "var_uq", "var_uy", "var_ux1", "var_ux2"),
            ("var_eps_x1", "var_eps_x2"),
        )


@dataclass(frozen=True)
class CovarianceSummary:
    """Second moments of the observed ``(x1, x2, y)``."""

    var_x1: float
    var_x2: float
    cov_x1x2: float
    cov_x1y: float
    cov_x2y: float

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValidationError(f"CovarianceSummary.{f.name} must be finite")
        if self.var_x1 <= 0 or self.var_x2 <= 0:
            raise ValidationError("covariate variances must be > 0")
        if self.det <= 1e-14 * self.var_x1 * self.var_x2:
            raise SingularityError(
                f"covariate covariance matrix is not positive definite (det={self.det!r})"
            )

    @property
    def det(self) -> float:
        return self.var_x1 * self.var_x2 - self.cov_x1x2**2


@dataclass(frozen=True)
class OlsEstimate:
    """Slope pair for ``y ~ x1 + x2``.

    ``lam`` is the analytic attenuation factor when the estimate comes from a
    single-noise closed form; ``se1``/``se2``/``intercept`` are filled by
    :func:`fit_ols`.
    """

    beta1: float
    beta2: float
    lam: float | None = None
    se1: float | None = None
    se2: float | None = None
    intercept: float | None = None

    def __post_init__(self):
        for name in ("lam", "se1", "se2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValidationError(f"OlsEstimate.{name} must be >= 0, got {v!r}")


@dataclass(frozen=True)
class SampleBatch:
    """``n`` observed triples plus the latent draws that produced them.

    Arrays are read-only.
    """

    x1_obs: np.ndarray
    x2_obs: np.ndarray
    y: np.ndarray
    latents: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        n = len(self.y)
        arrays = [self.x1_obs, self.x2_obs, self.y]
        if self.latents:
            arrays.extend(self.latents.values())
        for arr in arrays:
            if arr.shape != (n,):
                raise ValidationError("all SampleBatch columns must have length n")
            if not np.all(np.isfinite(arr)):
                raise ValidationError("SampleBatch contains non-finite values")
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.y)


# ---------------------------------------------------------------------------
# covariance route


def causal_covariances(p: CausalParams) -> CovarianceSummary:
    var_x1_latent = p.b**2 * p.var_uz + p.var_ux1
    return CovarianceSummary(
        var_x1=var_x1_latent + p.var_eps_x1,
        var_x2=p.c**2 * p.var_uz + p.var_ux2 + p.var_eps_x2,
        cov_x1x2=p.b * p.c * p.var_uz,
        cov_x1y=p.a * var_x1_latent,
        cov_x2y=p.a * p.b * p.c * p.var_uz,
    )


def anticausal_covariances(p: AnticausalParams) -> CovarianceSummary:
    var_y = p.b**2 * p.var_uz + p.var_uy
    return CovarianceSummary(
        var_x1=p.d**2 * var_y + p.var_ux1 + p.var_eps_x1,
        var_x2=p.c**2 * p.a**2 * p.var_uz + p.c**2 * p.var_uq + p.var_ux2 + p.var_eps_x2,
        cov_x1x2=p.a * p.b * p.c * p.d * p.var_uz,
        cov_x1y=p.d * var_y,
        cov_x2y=p.a * p.b * p.c * p.var_uz,
    )


def ols_from_covariances(c: CovarianceSummary) -> OlsEstimate:
    """Two-covariate OLS slopes from second moments.

    The denominator is ``var_x1 * var_x2 - cov_x1x2**2``.
    """
    det = c.det
    if det <= 0:
        raise SingularityError("covariate covariance matrix is singular")
    beta1 = (c.var_x2 * c.cov_x1y - c.cov_x1x2 * c.cov_x2y) / det
    beta2 = (c.var_x1 * c.cov_x2y - c.cov_x1x2 * c.cov_x1y) / det
    return OlsEstimate(beta1=beta1, beta2=beta2)


# ---------------------------------------------------------------------------
# closed forms


def _causal_terms(p: CausalParams) -> tuple[float, float]:
    # Noise on x2 enters only through var(x2), i.e. as extra var_ux2.
    ux2 = p.var_ux2 + p.var_eps_x2
    base = p.var_uz * (p.b**2 * ux2 + p.c**2 * p.var_ux1) + p.var_ux1 * ux2
    x2_spread = p.c**2 * p.var_uz + ux2
    return base, x2_spread


def causal_analytic(p: CausalParams) -> OlsEstimate:
    """OLS limit in the causal model with noise on ``x1``.

    ``beta1 = a / (1 + lam)`` and ``beta2 = a*b*c*var_eps_x1*var_uz / (base +
    var_eps_x1 * x2_spread)`` where ``lam = var_eps_x1 * x2_spread / base``.
    Measurement noise on ``x2`` is folded into ``var_ux2``; with both noise
    terms zero this is exactly ``(a, 0)``.
    """
    base, x2_spread = _causal_terms(p)
    lam = p.var_eps_x1 * x2_spread / base
    beta1 = p.a / (1.0 + lam)
    beta2 = p.a * p.c * p.b * p.var_eps_x1 * p.var_uz / (base + p.var_eps_x1 * x2_spread)
    return OlsEstimate(beta1=beta1, beta2=beta2, lam=lam)


def causal_asymptote(p: CausalParams) -> OlsEstimate:
    """Limit of :func:`causal_analytic` as ``var_eps_x1`` grows without bound."""
    _, x2_spread = _causal_terms(p)
    return OlsEstimate(beta1=0.0, beta2=p.a * p.c * p.b * p.var_uz / x2_spread)


def _anticausal_clean(
    a: float, b: float, c: float, d: float,
    uz: float, uq: float, uy: float, ux1: float, ux2: float,
) -> tuple[float, float, float, float]:
    """Return ``(beta1, beta2, delta, n1)`` of the noise-free anticausal fit.

    ``n1`` is ``beta1 * delta / d``, kept separately so it survives ``d == 0``.
    """
    var_y = b**2 * uz + uy
    n1 = a**2 * c**2 * uz * uy + (c**2 * uq + ux2) * var_y
    delta = (d**2 * b**2 * uz + ux1 + d**2 * uy) * (ux2 + c**2 * uq) + (ux1 + d**2 * uy) * c**2 * a**2 * uz
    return d * n1 / delta, a * b * c * uz * ux1 / delta, delta, n1


def _anticausal_args(p: AnticausalParams, ux1: float, ux2: float) -> tuple[float, ...]:
    return (p.a, p.b, p.c, p.d, p.var_uz, p.var_uq, p.var_uy, ux1, ux2)


def anticausal_analytic(p: AnticausalParams) -> OlsEstimate:
    """OLS limit in the anticausal model.

    Noise on a single covariate is absorbed by replacing that covariate's
    structural variance with structural + measurement variance; ``lam`` is the
    matching attenuation factor (``lam = 0`` when there is no noise). With
    noise on both covariates the estimate comes from the covariance route and
    ``lam`` is left unset.
    """
    e1, e2 = p.var_eps_x1, p.var_eps_x2
    if e1 > 0 and e2 > 0:
        return ols_from_covariances(anticausal_covariances(p))

    _, _, delta, _ = _anticausal_clean(*_anticausal_args(p, p.var_ux1, p.var_ux2))
    if e1 > 0:
        lam = e1 * (p.c**2 * p.a**2 * p.var_uz + p.c**2 * p.var_uq + p.var_ux2) / delta
    elif e2 > 0:
        lam = e2 * (p.d**2 * p.b**2 * p.var_uz + p.var_ux1 + p.d**2 * p.var_uy) / delta
    else:
        lam = 0.0
    beta1, beta2, _, _ = _anticausal_clean(*_anticausal_args(p, p.var_ux1 + e1, p.var_ux2 + e2))
    return OlsEstimate(beta1=beta1, beta2=beta2, lam=lam)


class NoisyFeature(str, enum.Enum):
    X1 = "x1"
    X2 = "x2"


def anticausal_asymptote(p: AnticausalParams, noisy_feature: NoisyFeature | str) -> OlsEstimate:
    """Limit of :func:`anticausal_analytic` as one covariate's noise diverges.

    Any finite noise on the *other* covariate is folded into its structural
    variance first.
    """
    noisy_feature = NoisyFeature(noisy_feature)
    if noisy_feature is NoisyFeature.X1:
        ux2 = p.var_ux2 + p.var_eps_x2
        beta1, beta2, delta, _ = _anticausal_clean(*_anticausal_args(p, p.var_ux1, ux2))
        x2_spread = p.c**2 * p.a**2 * p.var_uz + p.c**2 * p.var_uq + ux2
        return OlsEstimate(beta1=0.0, beta2=beta2 * delta / (p.var_ux1 * x2_spread))

    ux1 = p.var_ux1 + p.var_eps_x1
    beta1, _, delta, n1 = _anticausal_clean(*_anticausal_args(p, ux1, p.var_ux2))
    var_y = p.b**2 * p.var_uz + p.var_uy
    x1_spread = p.d**2 * p.b**2 * p.var_uz + ux1 + p.d**2 * p.var_uy
    return OlsEstimate(beta1=beta1 * var_y * delta / (n1 * x1_spread), beta2=0.0)


# ---------------------------------------------------------------------------
# simulation


def sample_causal(p: CausalParams, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValidationError("n must be >= 1")
    u = generator(seed).standard_normal((n, 6))
    z = math.sqrt(p.var_uz) * u[:, 0]
    x1 = p.b * z + math.sqrt(p.var_ux1) * u[:, 1]
    x2 = p.c * z + math.sqrt(p.var_ux2) * u[:, 2]
    y = p.a * x1 + math.sqrt(p.var_uy) * u[:, 3]
    return SampleBatch(
        x1_obs=x1 + math.sqrt(p.var_eps_x1) * u[:, 4],
        x2_obs=x2 + math.sqrt(p.var_eps_x2) * u[:, 5],
        y=y,
        latents={"z": z, "x1": x1, "x2": x2},
    )


def sample_anticausal(p: AnticausalParams, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValidationError("n must be >= 1")
    u = generator(seed).standard_normal((n, 7))
    z = math.sqrt(p.var_uz) * u[:, 0]
    q = p.a * z + math.sqrt(p.var_uq) * u[:, 1]
    y = p.b * z + math.sqrt(p.var_uy) * u[:, 2]
    x2 = p.c * q + math.sqrt(p.var_ux2) * u[:, 3]
    x1 = p.d * y + math.sqrt(p.var_ux1) * u[:, 4]
    return SampleBatch(
        x1_obs=x1 + math.sqrt(p.var_eps_x1) * u[:, 5],
        x2_obs=x2 + math.sqrt(p.var_eps_x2) * u[:, 6],
        y=y,
        latents={"z": z, "q": q, "x1": x1, "x2": x2},
    )


# Cross-product matrices with a larger condition number are treated as singular.
MAX_CONDITION = 1e10


def fit_ols(batch: SampleBatch) -> OlsEstimate:
    """Regress ``y`` on ``(1, x1_obs, x2_obs)`` with homoskedastic standard errors."""
    n = batch.n
    if n < 3:
        raise ValidationError("fit_ols needs at least 3 rows")
    X = np.column_stack([batch.x1_obs, batch.x2_obs])
    means = X.mean(axis=0)
    Xc = X - means
    yc = batch.y - batch.y.mean()
    S = Xc.T @ Xc
    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_CONDITION:
        raise SingularityError("design matrix is collinear or has a degenerate column")
    beta = np.linalg.solve(S, Xc.T @ yc)
    resid = yc - Xc @ beta
    dof = n - 3
    s2 = float(resid @ resid) / dof if dof > 0 else math.nan
    se = np.sqrt(s2 * np.diag(np.linalg.inv(S)))
    return OlsEstimate(
        beta1=float(beta[0]),
        beta2=float(beta[1]),
        se1=float(se[0]),
        se2=float(se[1]),
        intercept=float(batch.y.mean() - means @ beta),
    )


# ---------------------------------------------------------------------------
# sweeps


class Setting(str, enum.Enum):
    CAUSAL_X1 = "causal_x1"
    ANTICAUSAL_X1 = "anticausal_x1"
    ANTICAUSAL_X2 = "anticausal_x2"


@dataclass(frozen=True)
class McOptions:
    n: int
    seed: int

    def __post_init__(self):
        if self.n < 3:
            raise ValidationError("Monte Carlo n must be >= 3")


@dataclass(frozen=True)
class SweepRow:
    eps: float
    analytic: OlsEstimate
    empirical: OlsEstimate | None = None


Params = Union[CausalParams, AnticausalParams]


def _at_noise(setting: Setting, p: Params, eps: float) -> Params:
    if setting is Setting.CAUSAL_X1:
        if not isinstance(p, CausalParams):
            raise ValidationError("causal_x1 sweeps need CausalParams")
        return replace(p, var_eps_x1=eps)
    if not isinstance(p, AnticausalParams):
        raise ValidationError(f"{setting.value} sweeps need AnticausalParams")
    if setting is Setting.ANTICAUSAL_X1:
        return replace(p, var_eps_x1=eps)
    return replace(p, var_eps_x2=eps)


def sweep_noise(
    setting: Setting | str,
    p: Params,
    eps_grid: Sequence[float],
    mc: McOptions | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Analytic (and optionally simulated) estimates along a noise-variance grid.

    Grid point ``i`` is simulated with seed ``mix(mc.seed, i)``, so rows do not
    depend on ``workers``.
    """
    setting = Setting(setting)
    grid = [float(e) for e in eps_grid]
    if not grid:
        raise ValidationError("eps grid is empty")
    if any(e < 0 or not math.isfinite(e) for e in grid):
        raise ValidationError("eps grid values must be finite and >= 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("eps grid must be strictly ascending")
    points = [_at_noise(setting, p, e) for e in grid]
    analytic_fn = causal_analytic if setting is Setting.CAUSAL_X1 else anticausal_analytic
    sampler = sample_causal if setting is Setting.CAUSAL_X1 else sample_anticausal

    def run(i: int) -> SweepRow:
        q = points[i]
        emp = None
        if mc is not None:
            emp = fit_ols(sampler(q, mc.n, mix(mc.seed, i)))
        return SweepRow(eps=grid[i], analytic=analytic_fn(q), empirical=emp)

    if workers > 1 and mc is not None:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(len(points))))
    return [run(i) for i in range(len(points))]


SWEEP_HEADER = ["setting", "eps", "beta1_analytic", "beta2_analytic", "lambda",
                "beta1_mc", "beta2_mc", "se1", "se2"]


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")


def write_sweep_csv(setting: Setting | str, rows: Iterable[SweepRow], out: IO[str] | None = None) -> str:
    """Serialize sweep rows; returns the CSV text and also writes it to ``out`` if given."""
    setting = Setting(setting)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        e = r.empirical
        w.writerow([
            setting.value, _fmt(r.eps), _fmt(r.analytic.beta1), _fmt(r.analytic.beta2),
            _fmt(r.analytic.lam),
            _fmt(e.beta1 if e else None), _fmt(e.beta2 if e else None),
            _fmt(e.se1 if e else None), _fmt(e.se2 if e else None),
        ])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
