"""The f-divergence regularizer family.

For each supported divergence this module houses the generator ``f``, its
convex conjugate ``f*`` and derivative ``f*'``, the dual penalty
``H*(v) = lam * f*(v / lam)``, and the compatibility function
``M(v) = f*'(v / lam)`` together with the exact derivative of ``log M``.

Two Pearson chi^2 variants coexist on purpose.  ``conjugate_triple`` returns
the unconstrained closed forms (``v^2/4 + v`` with derivative ``v/2 + 1``),
while the penalty and compatibility respect the nonnegativity of transport
densities: the hard hinge ``max(v/(2 lam) + 1, 0)`` by default, or a
softplus-smoothed hinge when ``chi2_softplus_alpha`` is set so that ``log M``
stays differentiable during sampling.  The smoothed penalty is integrated in
closed form through the dilogarithm, keeping d/dv H* = M exact for both
variants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

_INF = float("inf")


class DomainError(ValueError):
    """Argument outside the admissible domain of f or its conjugate."""


class SupportError(ValueError):
    """Plan puts mass where the reference product measure has none."""


@dataclass(frozen=True)
class FDivKind:
    """A divergence variant: tag, strong-convexity constant of f (if any),
    and the open interval of admissible conjugate arguments."""

    tag: str
    alpha: float | None
    conj_domain: tuple[float, float]


KL = FDivKind("kl", None, (-_INF, _INF))
REVERSE_KL = FDivKind("reverse_kl", None, (-_INF, 0.0))
PEARSON_CHI2 = FDivKind("pearson_chi2", 2.0, (-_INF, _INF))
SQUARED_HELLINGER = FDivKind("squared_hellinger", None, (-_INF, 1.0))
JENSEN_SHANNON = FDivKind("jensen_shannon", None, (-_INF, math.log(2.0)))
GAN = FDivKind("gan", None, (-_INF, 0.0))

KINDS = {k.tag: k for k in
         (KL, REVERSE_KL, PEARSON_CHI2, SQUARED_HELLINGER, JENSEN_SHANNON, GAN)}


def kind_from_tag(tag: str) -> FDivKind:
    try:
        return KINDS[tag]
    except KeyError:
        raise DomainError(f"unknown f-divergence tag {tag!r}") from None


@dataclass(frozen=True)
class RegParams:
    """Regularization weight and the optional chi^2 softplus threshold."""

    lam: float
    chi2_softplus_alpha: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.chi2_softplus_alpha is not None and not self.chi2_softplus_alpha > 0:
            raise ValueError("chi2 softplus threshold must be positive")


def _in_conj_domain(kind: FDivKind, v) -> bool:
    lo, hi = kind.conj_domain
    v = np.asarray(v)
    return bool(np.all(v > lo) and np.all(v < hi))


def _require_conj_domain(kind: FDivKind, v):
    if not _in_conj_domain(kind, v):
        raise DomainError(f"conjugate argument outside Dom(f*) = "
                          f"{kind.conj_domain} for {kind.tag}")


def f_primal(kind: FDivKind, t):
    """The generator f(t); domain is t >= 0 (t > 0 where logs require it)."""
    t = np.asarray(t, dtype=np.float64)
    tag = kind.tag
    if tag == "kl":
        if np.any(t < 0):
            raise DomainError("kl generator needs t >= 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
        return out[()]
    if np.any(t <= 0) and tag in ("reverse_kl", "jensen_shannon", "gan"):
        raise DomainError(f"{tag} generator needs t > 0")
    if tag == "reverse_kl":
        return (-np.log(t))[()]
    if tag == "pearson_chi2":
        return ((t - 1.0) ** 2)[()]
    if tag == "squared_hellinger":
        if np.any(t < 0):
            raise DomainError("squared_hellinger generator needs t >= 0")
        return ((np.sqrt(t) - 1.0) ** 2)[()]
    if tag == "jensen_shannon":
        return (t * np.log(t) - (t + 1.0) * np.log(0.5 * (1.0 + t)))[()]
    if tag == "gan":
        return (t * np.log(t) - (t + 1.0) * np.log(t + 1.0))[()]
    raise DomainError(f"unknown kind {tag!r}")


def f_prime(kind: FDivKind, t):
    """Derivative of the generator, used for Fenchel-Young equality checks."""
    t = np.asarray(t, dtype=np.float64)
    tag = kind.tag
    if np.any(t <= 0):
        raise DomainError("f' evaluated on t > 0 only")
    if tag == "kl":
        return (np.log(t) + 1.0)[()]
    if tag == "reverse_kl":
        return (-1.0 / t)[()]
    if tag == "pearson_chi2":
        return (2.0 * (t - 1.0))[()]
    if tag == "squared_hellinger":
        return (1.0 - 1.0 / np.sqrt(t))[()]
    if tag == "jensen_shannon":
        return np.log(2.0 * t / (1.0 + t))[()]
    if tag == "gan":
        return np.log(t / (1.0 + t))[()]
    raise DomainError(f"unknown kind {tag!r}")


def f_conj(kind: FDivKind, v):
    """Fenchel-Legendre conjugate f*(v) on its open domain."""
    v = np.asarray(v, dtype=np.float64)
    _require_conj_domain(kind, v)
    tag = kind.tag
    if tag == "kl":
        return np.exp(v - 1.0)[()]
    if tag == "reverse_kl":
        return (np.log(-1.0 / v) - 1.0)[()]
    if tag == "pearson_chi2":
        return (0.25 * v * v + v)[()]
    if tag == "squared_hellinger":
        return (v / (1.0 - v))[()]
    if tag == "jensen_shannon":
        return (-np.log(2.0 - np.exp(v)))[()]
    if tag == "gan":
        return (-v - np.log(np.expm1(-v)))[()]
    raise DomainError(f"unknown kind {tag!r}")


def f_conj_prime(kind: FDivKind, v):
    """Derivative of the conjugate, the raw compatibility before hinging."""
    v = np.asarray(v, dtype=np.float64)
    _require_conj_domain(kind, v)
    tag = kind.tag
    if tag == "kl":
        return np.exp(v - 1.0)[()]
    if tag == "reverse_kl":
        return (-1.0 / v)[()]
    if tag == "pearson_chi2":
        return (0.5 * v + 1.0)[()]
    if tag == "squared_hellinger":
        return ((1.0 - v) ** -2.0)[()]
    if tag == "jensen_shannon":
        ev = np.exp(v)
        return (ev / (2.0 - ev))[()]
    if tag == "gan":
        return (1.0 / np.expm1(-v))[()]
    raise DomainError(f"unknown kind {tag!r}")


def conjugate_triple(kind: FDivKind, v):
    """(f(v) or None, f*(v), f*'(v)) at the same argument.

    The primal entry is None when v is outside the generator's domain.
    """
    conj = f_conj(kind, v)
    conj_prime = f_conj_prime(kind, v)
    try:
        primal = f_primal(kind, v)
    except DomainError:
        primal = None
    return primal, conj, conj_prime


@dataclass(frozen=True)
class CompatValue:
    m: float
    dlog_m: float
    saturated: bool


@dataclass(frozen=True)
class Compatibility:
    """Bound (kind, params) pair evaluating M, log M gradients and H*."""

    kind: FDivKind
    params: RegParams

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def strong_convexity(self) -> float:
        """The constant s with K_lam s-strongly convex in l1: lam for KL
        (via Pinsker), lam * alpha for kinds carrying alpha."""
        if self.kind.tag == "kl":
            return self.lam
        if self.kind.alpha is None:
            raise DomainError(f"{self.kind.tag} has no strong-convexity constant")
        return self.lam * self.kind.alpha

    def kernel_kind_id(self) -> int | None:
        """Kernel dispatch id, or None when only the generic path applies."""
        if self.kind.tag == "kl":
            return _kernels.KIND_KL
        if self.kind.tag == "pearson_chi2":
            if self.params.chi2_softplus_alpha is None:
                return _kernels.KIND_CHI2_HARD
            return _kernels.KIND_CHI2_SOFTPLUS
        return None

    def _require_domain(self, v):
        lo, hi = self.kind.conj_domain
        if not (np.all(np.asarray(v) / self.lam > lo)
                and np.all(np.asarray(v) / self.lam < hi)):
            raise DomainError(f"violation / lambda outside Dom(f*) for {self.kind.tag}")

    def h_star(self, v):
        """Dual penalty H*(v) = lam * f*(v / lam), with the chi^2 variants
        replacing f* by its nonnegativity-respecting (possibly smoothed) form."""
        v = np.asarray(v, dtype=np.float64)
        lam = self.lam
        if self.kind.tag == "pearson_chi2":
            u = v / lam
            alpha = self.params.chi2_softplus_alpha
            if alpha is None:
                mm = np.maximum(0.5 * u + 1.0, 0.0)
                return (lam * (mm * mm - 1.0))[()]
            w = alpha * (0.5 * u + 1.0)
            return (lam * ((2.0 / alpha ** 2) * _kernels.neg_dilog_exp_np(w) - 1.0))[()]
        self._require_domain(v)
        return (lam * f_conj(self.kind, v / lam))[()]

    def m(self, v):
        v = np.asarray(v, dtype=np.float64)
        lam = self.lam
        if self.kind.tag == "pearson_chi2":
            u = v / (2.0 * lam) + 1.0
            alpha = self.params.chi2_softplus_alpha
            if alpha is None:
                return np.maximum(u, 0.0)[()]
            w = alpha * u
            sp = np.where(w > 0.0, w + np.log1p(np.exp(-np.abs(w))),
                          np.log1p(np.exp(-np.abs(w))))
            return (sp / alpha)[()]
        self._require_domain(v)
        return f_conj_prime(self.kind, v / lam)[()]

    def m_dlog(self, v):
        """(M, d log M / dv, saturated mask); dlog is nan where M = 0."""
        v = np.asarray(v, dtype=np.float64)
        lam = self.lam
        tag = self.kind.tag
        mm = np.asarray(self.m(v))
        if tag == "kl":
            dlog = np.full_like(mm, 1.0 / lam)
            sat = np.zeros_like(mm, dtype=bool)
        elif tag == "pearson_chi2":
            alpha = self.params.chi2_softplus_alpha
            if alpha is None:
                sat = mm == 0.0
                with np.errstate(divide="ignore"):
                    dlog = np.where(sat, np.nan, 1.0 / (2.0 * lam * np.where(sat, 1.0, mm)))
            else:
                w = alpha * (v / (2.0 * lam) + 1.0)
                # sigmoid / softplus -> 1 as w -> -inf; branch before M underflows
                deep = w <= -30.0
                sig = 1.0 / (1.0 + np.exp(-np.where(deep, 0.0, w)))
                dlog = np.where(deep, alpha / (2.0 * lam),
                                sig / (2.0 * lam * np.where(deep, 1.0, mm)))
                sat = np.zeros_like(mm, dtype=bool)
        elif tag == "reverse_kl":
            dlog = -1.0 / v
            sat = np.zeros_like(mm, dtype=bool)
        elif tag == "squared_hellinger":
            dlog = 2.0 / (lam - v)
            sat = np.zeros_like(mm, dtype=bool)
        elif tag in ("jensen_shannon", "gan"):
            dlog = (1.0 + mm) / lam
            sat = np.zeros_like(mm, dtype=bool)
        else:
            raise DomainError(f"unknown kind {tag!r}")
        return mm[()], np.asarray(dlog)[()], sat[()]

    def to_config(self) -> dict:
        return {"kind": self.kind.tag, "lambda": self.lam,
                "chi2_softplus_alpha": self.params.chi2_softplus_alpha}

    @staticmethod
    def from_config(cfg: dict) -> "Compatibility":
        return Compatibility(kind_from_tag(cfg["kind"]),
                             RegParams(cfg["lambda"], cfg.get("chi2_softplus_alpha")))


def make_compat(tag: str, lam: float, chi2_softplus_alpha: float | None = None) -> Compatibility:
    return Compatibility(kind_from_tag(tag), RegParams(lam, chi2_softplus_alpha))


def dual_penalty(kind: FDivKind, params: RegParams, v):
    return Compatibility(kind, params).h_star(v)


def compatibility(kind: FDivKind, params: RegParams, v) -> CompatValue:
    mm, dlog, sat = Compatibility(kind, params).m_dlog(v)
    return CompatValue(float(mm), float(dlog), bool(np.any(sat)))


def h_regularizer(kind: FDivKind, plan: np.ndarray, product: np.ndarray) -> float:
    """D_f(plan || product) = sum product * f(plan / product) over the support.

    Cells with zero product mass must carry zero plan mass.
    """
    plan = np.asarray(plan, dtype=np.float64)
    product = np.asarray(product, dtype=np.float64)
    if plan.shape != product.shape:
        raise ValueError("plan and product shapes differ")
    off = product <= 0.0
    if np.any(off & (plan != 0.0)):
        raise SupportError("plan is not absolutely continuous w.r.t. the product")
    q = np.where(off, 1.0, product)
    ratio = np.where(off, 1.0, plan / q)
    vals = np.asarray(f_primal(kind, ratio))
    return float(np.sum(np.where(off, 0.0, q * vals)))
