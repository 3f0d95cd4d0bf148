"""Numerical inverse Laplace transforms.

Two algorithmically independent inverters:

``piessens_invert``
    Chebyshev-expansion method: the time function is expanded as
    f(t) = sum_k c_k T*_k(exp(-b t)) with shifted Chebyshev polynomials
    T*_k on [0, 1].  Each basis function has the exact transform
    sum_m C[k][m]/(s + m b) (C integer), so the coefficients follow from
    collocating F at real points s_j = b (j + 1/2).  The collocation
    matrix is a disguised moment matrix and is exponentially
    ill-conditioned, so the fit is carried out in extended precision and
    F must be sampled in extended precision as well; the returned
    coefficients are well-scaled doubles (the basis is bounded by 1).
    Undamped spectral content (poles on the imaginary axis) is an
    endpoint singularity of the x = exp(-b t) variable and ruins the
    expansion's convergence; callers subtract known poles via ``poles``
    and the inverter adds them back exactly.

``talbot_invert``
    Deformed-contour quadrature on s(theta) = mu(theta cot theta +
    i nu theta), theta in (-pi, pi), evaluated with the midpoint rule.
    The two shape parameters decouple the decay scale (mu ~ 1/t) from
    the vertical reach (mu nu pi / 2), so transforms with singularities
    far up the imaginary axis are enclosed without pushing the contour
    into the right half plane.  Node counts scale linearly with the
    enclosure aspect ratio nu.

Both inverters are pure and operate on caller-supplied transforms; the
physics kernels live in the solver modules.
"""

import math

import mpmath
import numpy as np

__all__ = ["piessens_invert", "talbot_invert", "shifted_chebyshev_monomial"]


def shifted_chebyshev_monomial(n):
    """Monomial coefficients of T*_k(x) on [0,1] for k < n, exact integers.

    Returns a list of lists; C[k][m] multiplies x^m.  The recurrence
    T*_{k+1} = (4x-2) T*_k - T*_{k-1} stays in integer arithmetic.
    """
    if n <= 0:
        return []
    C = [[1]]
    if n > 1:
        C.append([-1, 2])
    for k in range(2, n):
        prev, prev2 = C[k - 1], C[k - 2]
        cur = [0] * (k + 1)
        for m, c in enumerate(prev):
            cur[m] -= 2 * c
            cur[m + 1] += 4 * c
        for m, c in enumerate(prev2):
            cur[m] -= c
        C.append(cur)
    return C


def _clenshaw_shifted(coeffs, x):
    """sum_k coeffs[k] T*_k(x) for ndarray x in [0,1]."""
    y = 2.0 * (2.0 * x - 1.0)
    u1 = np.zeros_like(x, dtype=complex)
    u2 = np.zeros_like(x, dtype=complex)
    for k in range(len(coeffs) - 1, 0, -1):
        u1, u2 = coeffs[k] + y * u1 - u2, u1
    return coeffs[0] + (2.0 * x - 1.0) * u1 - u2


def piessens_invert(transform, times, n=32, b=1.0, dps=None, poles=()):
    """Invert a Laplace transform by shifted-Chebyshev expansion in exp(-b t).

    Parameters
    ----------
    transform : callable
        F(s) evaluated at an mpmath scalar; must return a value mpmath
        can convert (mpf/mpc/complex).  Evaluations happen inside the
        extended-precision context, and the transform should carry that
        precision: sampling F in double precision defeats the solve.
    times : array_like of t >= 0.
    n : expansion order (collocation at n real nodes s_j = b(j+1/2)).
    b : inverse time scale of the expansion variable x = exp(-b t).
        Accuracy windows roughly t in [0, few/b].
    dps : mpmath working digits; default scales with n to cover the
        moment-matrix conditioning.
    poles : sequence of (location, residue)
        Simple poles subtracted from F before fitting and re-added
        analytically, f += residue * exp(location * t).

    Returns
    -------
    values : complex ndarray on ``times``.
    coeffs : |c_k| ndarray, a convergence diagnostic (tail ~ error).
    """
    times = np.asarray(times, dtype=float)
    if times.size and times.min() < 0.0:
        raise ValueError("piessens_invert requires t >= 0")
    if n < 2:
        raise ValueError("expansion order n must be >= 2")
    if b <= 0.0:
        raise ValueError("time scale b must be positive")
    if dps is None:
        dps = max(50, 40 + 2 * n)
    C = shifted_chebyshev_monomial(n)
    with mpmath.workdps(dps):
        bb = mpmath.mpf(b)
        s_nodes = [bb * (2 * j + 1) / 2 for j in range(n)]
        V = mpmath.zeros(n, n)
        for j, s in enumerate(s_nodes):
            for k in range(n):
                acc = mpmath.mpf(0)
                for m, c in enumerate(C[k]):
                    if c:
                        acc += mpmath.mpf(c) / (s + m * bb)
                V[j, k] = acc
        rhs = []
        for s in s_nodes:
            val = mpmath.mpc(transform(s))
            for loc, res in poles:
                val -= mpmath.mpc(res) / (s - mpmath.mpc(loc))
            rhs.append(val)
        sol = mpmath.lu_solve(V, mpmath.matrix(rhs))
    coeffs = np.array([complex(sol[k]) for k in range(n)])
    x = np.exp(-b * times)
    values = _clenshaw_shifted(coeffs, x)
    for loc, res in poles:
        values = values + complex(res) * np.exp(complex(loc) * times)
    return values, np.abs(coeffs)


def _talbot_sum(transform, tgroup, mu, nu, M):
    # midpoint rule; M must be even or a node lands on the theta=0
    # removable singularity and silently drops the largest term
    M += M % 2
    k = np.arange(M)
    theta = -np.pi + (k + 0.5) * (2.0 * np.pi / M)
    cot = np.cos(theta) / np.sin(theta)
    s = mu * (theta * cot + 1j * nu * theta)
    ds = mu * (cot - theta / np.sin(theta) ** 2 + 1j * nu)
    Fds = np.asarray(transform(s), dtype=complex) * ds
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = np.exp(s[None, :] * tgroup[:, None])
        w = np.where(np.isfinite(w), w, 0.0)
    return (w @ Fds) / (1j * M)


def talbot_invert(transform, times, s_max, tol=1e-8, mu_scale=4.0):
    """Invert a Laplace transform on a contour enclosing |Im s| <= s_max.

    Parameters
    ----------
    transform : callable
        F(s) for a complex ndarray batch s (double precision).
    times : array_like of t > 0.
    s_max : enclosure bound: all singularities lie within
        |Im s| <= s_max, Re s <= 0.
    tol : target quadrature resolution (node count grows with log 1/tol).
    mu_scale : contour decay scale; max Re(s t) on the contour, so the
        exponential weights stay <= e^{mu_scale}.

    Returns
    -------
    values : complex ndarray on ``times``.
    spread : per-point |difference| between two node-count variants, an
        internal convergence estimate.

    Times are processed in octave groups sharing one contour, so the
    transform is evaluated O(log(t_max/t_min)) times regardless of grid
    size.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.zeros(0, dtype=complex), np.zeros(0)
    if times.min() <= 0.0:
        raise ValueError("talbot_invert requires t > 0")
    if s_max <= 0.0:
        raise ValueError("s_max must be positive")
    values = np.zeros(times.size, dtype=complex)
    spread = np.zeros(times.size)
    t_top = times.max()
    n_oct = max(1, int(math.ceil(math.log2(t_top / times.min()))) + 1)
    for i in range(n_oct):
        hi = t_top / 2.0**i
        lo = hi / 2.0 if i < n_oct - 1 else 0.0
        sel = (times > lo) & (times <= hi)
        if not sel.any():
            continue
        mu = mu_scale / hi
        # vertical stretch reaches 1.25x the enclosure bound but never
        # drops below the classical nu = 1 contour shape
        nu = max(1.0, 2.5 * s_max / (math.pi * mu))
        M0 = max(64, int(math.ceil(nu * math.log(1.0 / tol) / 0.45)))
        v0 = _talbot_sum(transform, times[sel], mu, nu, M0)
        v1 = _talbot_sum(transform, times[sel], mu, nu, int(1.05 * M0) + 8)
        values[sel] = v0
        spread[sel] = np.abs(v0 - v1)
    return values, spread
