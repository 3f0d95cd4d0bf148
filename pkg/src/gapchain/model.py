"""Gapped spectral density, bath correlation function, and derived frequency scales.

The model is a two-level emitter with transition frequency ``delta`` coupled to
a photonic continuum whose density of coupling turns on at a band edge
``omega_b``:

    J(omega) = alpha * sqrt(omega - omega_b) * exp(-(omega - omega_b)/omega0)

on the band (omega_b, omega_b + omega_c], zero elsewhere.  Every other module
derives its couplings from the single canonical convention

    G(t) = (1/pi) * integral J(omega) * exp(-i (omega - delta) t) d omega
         = Omega^2 * exp(i (delta - omega_b) t) / (1 + i omega0 t)^{3/2}

with Omega^2 = alpha * omega0^{3/2} / (2 sqrt(pi)).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from ._quad import complex_quad, gauss_legendre_panels, real_quad

_SQRT_PI = math.sqrt(math.pi)


def validate_model_values(alpha, omega_b, omega0, omega_c, delta):
    """Return a list of (key, message) for every violated parameter constraint."""
    problems = []
    named = {
        "alpha": alpha,
        "omega_b": omega_b,
        "omega0": omega0,
        "omega_c": omega_c,
        "delta": delta,
    }
    for key, value in named.items():
        try:
            ok = math.isfinite(float(value))
        except (TypeError, ValueError):
            ok = False
        if not ok:
            problems.append((key, f"{key} must be a finite number, got {value!r}"))
    if problems:
        return problems
    if alpha < 0:
        problems.append(("alpha", f"alpha must be >= 0, got {alpha}"))
    if omega_b <= 0:
        problems.append(("omega_b", f"omega_b must be > 0 (gapped model), got {omega_b}"))
    if omega0 <= 0:
        problems.append(("omega0", f"omega0 must be > 0, got {omega0}"))
    if omega_c <= 0:
        problems.append(("omega_c", f"omega_c must be > 0, got {omega_c}"))
    if delta < 0:
        problems.append(("delta", f"delta must be >= 0, got {delta}"))
    if omega0 > 0 and omega_c > 0 and omega_c < 4.0 * omega0:
        problems.append(
            (
                "omega_c",
                f"omega_c must be >= 4*omega0 so the hard cutoff dominates the "
                f"exponential tail, got omega_c={omega_c}, omega0={omega0}",
            )
        )
    return problems


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the gapped-environment model.

    alpha   : coupling amplitude, dimension frequency^(1/2)
    omega_b : band-edge frequency, > 0
    omega0  : exponential cutoff frequency of the spectral density
    omega_c : hard simulation bandwidth; band support is (omega_b, omega_b+omega_c]
    delta   : atomic transition frequency, >= 0
    """

    alpha: float
    omega_b: float
    omega0: float
    omega_c: float
    delta: float = 0.0

    def __post_init__(self):
        problems = validate_model_values(
            self.alpha, self.omega_b, self.omega0, self.omega_c, self.delta
        )
        if problems:
            raise ValueError("; ".join(msg for _, msg in problems))

    @property
    def band_top(self):
        return self.omega_b + self.omega_c

    @property
    def omega2(self):
        """Omega^2 = alpha * omega0^{3/2} / (2 sqrt(pi)), the kernel amplitude G(0)."""
        return self.alpha * self.omega0**1.5 / (2.0 * _SQRT_PI)

    @property
    def omega_s(self):
        """Environment-induced renormalization frequency omega_s = 4 Omega^2 / omega0."""
        return 4.0 * self.omega2 / self.omega0

    @property
    def delta_L(self):
        """Detuning from the band edge."""
        return self.delta - self.omega_b

    @property
    def delta_L_tilde(self):
        """Shifted detuning delta_L - omega_s."""
        return self.delta_L - self.omega_s

    @property
    def e_en_approx(self):
        """Closed-form environmental energy shift alpha*sqrt(omega0/pi)."""
        return self.alpha * math.sqrt(self.omega0 / math.pi)


@dataclass(frozen=True)
class DerivedScales:
    omega_s: float
    e_en: float
    e_en_approx: float
    delta_L: float
    delta_L_tilde: float


def spectral_density(p: ModelParams, omega):
    """J(omega) on the band (omega_b, omega_b+omega_c], zero elsewhere."""
    w = np.asarray(omega, dtype=float)
    u = w - p.omega_b
    inside = (u > 0.0) & (u <= p.omega_c)
    us = np.where(inside, u, 1.0)
    vals = p.alpha * np.sqrt(us) * np.exp(-us / p.omega0)
    out = np.where(inside, vals, 0.0)
    if np.ndim(omega) == 0:
        return float(out)
    return out


def bath_correlation(p: ModelParams, t):
    """Closed-form kernel G(t) = Omega^2 exp(i(delta-omega_b)t) / (1+i omega0 t)^{3/2}."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise ValueError("bath_correlation requires t >= 0")
    g = p.omega2 * np.exp(1j * p.delta_L * ts) / (1.0 + 1j * p.omega0 * ts) ** 1.5
    if np.ndim(t) == 0:
        return complex(g)
    return g


def correlation_by_quadrature(p: ModelParams, t):
    """Oracle for bath_correlation: adaptive quadrature of (1/pi) int J e^{-i(w-delta)t} dw.

    The substitution omega = omega_b + u^2 removes the square-root edge
    singularity; the integrand is then smooth on [0, sqrt(omega_c)].
    """
    t = float(t)
    if t < 0:
        raise ValueError("correlation_by_quadrature requires t >= 0")
    if p.alpha == 0.0:
        return 0.0 + 0.0j
    pref = 2.0 * p.alpha / math.pi
    phase0 = -1j * (p.omega_b - p.delta) * t

    def integrand(u):
        return u * u * np.exp(-u * u / p.omega0 + phase0 - 1j * u * u * t)

    # max phase ~ omega_c * t: allow generous subdivision for oscillatory tails
    limit = max(2000, int(40 * (p.omega_c * t + 1)))
    return pref * complex_quad(integrand, 0.0, math.sqrt(p.omega_c), limit=min(limit, 50000))


def _laplace_integral(p: ModelParams, s):
    """(1/pi) int_band J(omega) / (s + i(omega - delta)) d omega for s off the cut."""
    if p.alpha == 0.0:
        return 0.0 + 0.0j
    pref = 2.0 * p.alpha / math.pi
    s = complex(s)

    def integrand(u):
        w = p.omega_b + u * u
        return u * u * np.exp(-u * u / p.omega0) / (s + 1j * (w - p.delta))

    return pref * complex_quad(integrand, 0.0, math.sqrt(p.omega_c), limit=4000)


def laplace_of_G(p: ModelParams, s):
    """Laplace transform of the kernel, G_hat(s), for Re(s) > 0."""
    s = complex(s)
    if s.real <= 0:
        raise ValueError(f"laplace_of_G requires Re(s) > 0, got s = {s}")
    return _laplace_integral(p, s)


@functools.lru_cache(maxsize=128)
def _band_rule(p: ModelParams, n_panels=96, order=16):
    """Fixed composite Gauss-Legendre rule for (1/pi) int J(omega) f(omega) d omega.

    Built in the edge-regularized variable u = sqrt(omega - omega_b); returns
    (omega_nodes, weights) with the J/pi factor folded into the weights.
    """
    u_max = math.sqrt(p.omega_c)
    edges = np.linspace(0.0, u_max, n_panels + 1)
    u, du = gauss_legendre_panels(edges, order=order)
    omega = p.omega_b + u * u
    weights = (2.0 * p.alpha / math.pi) * u * u * np.exp(-u * u / p.omega0) * du
    return omega, weights


def _laplace_nodes(p: ModelParams, s):
    """Vectorized G_hat(s) over an array of s (analytic continuation off the cut).

    Panel count scales with the closest approach of any s to the integration
    cut {-i(omega - delta) : omega in band}, quantized to reuse cached rules.
    Only defined off the cut; accuracy degrades as the cut is approached.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    # the integrand pole sits at s = -i(omega - delta), so the cut is the
    # lower-half segment i*[delta - band_top, delta - omega_b]
    lo, hi = p.delta - p.band_top, p.delta - p.omega_b
    x, y = s.real, s.imag
    dist = np.where(
        (y >= lo) & (y <= hi),
        np.abs(x),
        np.hypot(x, np.minimum(np.abs(y - lo), np.abs(y - hi))),
    )
    dist = np.maximum(dist, 1e-9 * p.omega_c)
    # keep panel width well below the pole distance; round panels up in
    # octaves, refining each node only as much as its cut distance demands
    need = 8.0 * p.omega_c / dist
    doublings = np.clip(
        np.ceil(np.log2(np.maximum(need / 96.0, 1.0))).astype(int), 0, 6
    )
    out = np.empty(s.shape, dtype=complex)
    for k in np.unique(doublings):
        idx = np.nonzero(doublings == k)[0]
        omega, w = _band_rule(p, n_panels=96 * 2**k)
        step = max(1, 4_000_000 // omega.size)  # bound the outer product at ~64 MB
        for j0 in range(0, idx.size, step):
            jj = idx[j0 : j0 + step]
            out[jj] = (
                w[None, :] / (s[jj, None] + 1j * (omega[None, :] - p.delta))
            ).sum(axis=1)
    return out


def environmental_shift_quadrature(p: ModelParams):
    """E_en = (1/pi) int_band J(omega)/omega d omega by adaptive quadrature."""
    if p.alpha == 0.0:
        return 0.0
    pref = 2.0 * p.alpha / math.pi

    def integrand(u):
        return u * u * math.exp(-u * u / p.omega0) / (p.omega_b + u * u)

    return pref * real_quad(integrand, 0.0, math.sqrt(p.omega_c))


def derived_scales(p: ModelParams) -> DerivedScales:
    """All derived frequency scales, with E_en both by quadrature and closed form."""
    return DerivedScales(
        omega_s=p.omega_s,
        e_en=environmental_shift_quadrature(p),
        e_en_approx=p.e_en_approx,
        delta_L=p.delta_L,
        delta_L_tilde=p.delta_L_tilde,
    )
