"""Linearization procedures around an invariant zero section.

Three routes are provided: the modulus rescaling that flattens ``|c_1|``
toward its geometric mean, the iterative weak linearization of a contracting
section, and the formal order-by-order strong linearization of an
indifferent zero-degree section under a joint arithmetic condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ApproximationStall,
    CertificateFailure,
    DegreeOverflow,
    NoConvergence,
    NotAttracting,
    NotIndifferent,
    SmallDivisorError,
)
from .fourier import (
    TWO_PI,
    SmallDivisorReport,
    TrigPoly,
    fejer_approximation,
    grid_points,
    solve_cohomological,
)
from .maps import KAPPA_TOL, conjugate_scaling


# -- modulus rescaling ---------------------------------------------------------


@dataclass(frozen=True)
class RescaleData:
    """Record of a modulus rescaling: the smoothing polynomial, the additive
    conjugation solution, and the achieved deviation of ``|c_1|`` from the
    multiplier."""

    kappa: float
    fejer_degree: int
    smoothing: TrigPoly
    solution: TrigPoly
    sup_log_error: float
    achieved_deviation: float
    report: SmallDivisorReport | None

    @property
    def identity(self):
        return self.solution.n_modes == 0


def modulus_rescale(
    F,
    eps,
    *,
    divisor_floor=1e-8,
    max_fejer_degree=1024,
    degree_cutoff=4096,
):
    """Conjugate by ``(theta, z) -> (theta, e^{u} z)`` to flatten ``|c_1|``.

    A trigonometric smoothing ``l`` of ``log |c_1|`` is refined until the
    rescaled derivative modulus deviates from the multiplier by less than
    ``eps`` on the grid; when the multiplier is below 1 the rescaled modulus
    is additionally certified below ``(kappa + sqrt(kappa)) / 2 < 1``.
    Raises ``ApproximationStall`` if no degree up to the cutoff suffices, and
    propagates ``SmallDivisorError`` from the additive solve.
    """
    F._require_zero_section()
    kappa = F.multiplier()
    log_kappa = math.log(kappa)
    attracting = kappa < 1.0 - KAPPA_TOL
    contraction_bound = (kappa + math.sqrt(kappa)) / 2.0 if attracting else None
    c1 = F.coeffs[0]

    def log_abs(pts):
        return np.log(np.abs(c1.evaluate(pts)))

    # a constant modulus needs no rescaling at all
    probe = np.abs(c1.values_on_grid(512))
    if float(np.max(np.abs(probe - kappa))) < min(eps, 1e-13):
        data = RescaleData(
            kappa=kappa,
            fejer_degree=0,
            smoothing=TrigPoly.constant(log_kappa, dim=F.dim),
            solution=TrigPoly.zero(F.dim),
            sup_log_error=0.0,
            achieved_deviation=float(np.max(np.abs(probe - kappa))),
            report=None,
        )
        return F, data

    best_error = math.inf
    N = 2
    while N <= max_fejer_degree:
        smoothing = fejer_approximation(log_abs, N, dim=F.dim, grid_size=4 * N)
        M_check = max(512, 8 * N)
        dev = (
            log_abs(grid_points(M_check, F.dim))
            - smoothing.values_on_grid(M_check).real
            + smoothing.mean.real
            - log_kappa
        )
        sup_dev = float(np.max(np.abs(dev)))
        best_error = min(best_error, sup_dev)
        ok = kappa * (math.expm1(sup_dev)) < eps
        if ok and attracting:
            ok = kappa * math.exp(sup_dev) < contraction_bound
        if ok:
            solution, report = solve_cohomological(
                smoothing.sub_mean(), F.alpha, divisor_floor
            )
            rescaled = conjugate_scaling(F, solution, degree_cutoff=degree_cutoff)
            new_mod = np.abs(rescaled.coeffs[0].values_on_grid(M_check))
            achieved = float(np.max(np.abs(new_mod - kappa)))
            post_ok = achieved < eps
            if post_ok and attracting:
                post_ok = float(np.max(new_mod)) < contraction_bound
            if post_ok:
                data = RescaleData(
                    kappa=kappa,
                    fejer_degree=N,
                    smoothing=smoothing,
                    solution=solution,
                    sup_log_error=sup_dev,
                    achieved_deviation=achieved,
                    report=report,
                )
                return rescaled, data
        N *= 2
    target = eps if not attracting else min(eps, contraction_bound - kappa)
    raise ApproximationStall(best_error, target, max_fejer_degree)


# -- weak linearization of a contracting section -------------------------------


class KoenigsConjugacy:
    """Grid-sampled limit of the normalized iterates of a contracting map.

    Samples live on a theta grid times a circle of radius ``radius``; values
    inside the disc come from the circle by a discrete Cauchy (all-node
    difference) formula, values off the theta grid by trigonometric
    interpolation.  The recorded linear model is the ``c_1`` of the map the
    conjugacy was computed for.
    """

    def __init__(
        self,
        alpha,
        radius,
        rho1,
        samples,
        *,
        achieved_sup_delta,
        iterations,
        step_residual_max,
        normalization_tol=1e-9,
    ):
        self.alpha = float(np.atleast_1d(alpha)[0])
        self.radius = float(radius)
        self.rho1 = rho1
        self.samples = np.asarray(samples, dtype=complex)
        self.theta_nodes, self.z_nodes = self.samples.shape
        self.achieved_sup_delta = float(achieved_sup_delta)
        self.iterations = int(iterations)
        self.step_residual_max = float(step_residual_max)
        # coefficient table: samples = sum C[m, p] e^{2 pi i m theta} (z/r)^p
        self._coef = np.fft.fft2(self.samples) / self.samples.size
        self._freqs = np.fft.fftfreq(self.theta_nodes, d=1.0 / self.theta_nodes)
        a0 = self.value_at_zero()
        a1 = self.deriv_at_zero()
        self.sup_origin = float(np.max(np.abs(a0)))
        self.sup_unit_deriv = float(np.max(np.abs(a1 - 1.0)))
        if self.sup_origin > normalization_tol or self.sup_unit_deriv > normalization_tol:
            raise CertificateFailure(
                f"conjugacy normalization failed: |g(0)| up to "
                f"{self.sup_origin:.3e}, |g'(0) - 1| up to {self.sup_unit_deriv:.3e}",
                bound=max(self.sup_origin, self.sup_unit_deriv),
            )

    def value_at_zero(self):
        return np.mean(self.samples, axis=1)

    def deriv_at_zero(self):
        phases = np.exp(-TWO_PI * 1j * np.arange(self.z_nodes) / self.z_nodes)
        return (self.samples @ phases) / (self.z_nodes * self.radius)

    def evaluate(self, theta, z):
        """Evaluate the conjugacy at arbitrary points of the closed disc."""
        th = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
        zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
        if th.size == 1 and zz.size > 1:
            th = np.full(zz.shape, th[0])
        if zz.size == 1 and th.size > 1:
            zz = np.full(th.shape, zz[0])
        basis = np.exp(TWO_PI * 1j * np.outer(th, self._freqs))
        profile = basis @ self._coef  # (P, z_nodes)
        u = zz / self.radius
        acc = profile[:, -1].copy()
        for m in range(self.z_nodes - 2, -1, -1):
            acc = acc * u + profile[:, m]
        if np.isscalar(theta) and np.isscalar(z):
            return complex(acc[0])
        return acc

    def to_obj(self):
        return {
            "alpha": self.alpha,
            "radius": self.radius,
            "theta_nodes": self.theta_nodes,
            "z_nodes": self.z_nodes,
            "iterations": self.iterations,
            "achieved_sup_delta": self.achieved_sup_delta,
            "step_residual_max": self.step_residual_max,
            "linear_model": self.rho1.to_records(),
            "samples": [
                [[float(v.real), float(v.imag)] for v in row] for row in self.samples
            ],
        }


def _theta_shift(values, alpha):
    """Trigonometric interpolation of grid columns at ``theta + alpha``."""
    M = values.shape[0]
    freqs = np.fft.fftfreq(M, d=1.0 / M)
    phase = np.exp(TWO_PI * 1j * freqs * alpha)
    return np.fft.ifft(np.fft.fft(values, axis=0) * phase[:, None], axis=0)


def _disc_interp(columns, radius, targets):
    """Evaluate circle-sampled fiber profiles at interior points.

    ``columns[i, :]`` are samples on ``radius * e^{2 pi i j / Mz}`` for row
    ``i``; ``targets[i, j]`` the evaluation points, ``|target| <= radius``.
    """
    Mz = columns.shape[1]
    coef = np.fft.fft(columns, axis=1) / Mz
    u = targets / radius
    acc = np.broadcast_to(coef[:, -1][:, None], targets.shape).copy()
    for m in range(Mz - 2, -1, -1):
        acc = acc * u + coef[:, m][:, None]
    return acc


def koenigs_linearize(F, r, tol=1e-10, max_n=512, *, theta_nodes=256, z_nodes=64):
    """Iterate the normalized compositions until the conjugacy stabilizes.

    Requires multiplier < 1 and ``sup |c_1| < 1`` (run ``modulus_rescale``
    first otherwise).  At every step the exact chain identity relating
    consecutive normalized iterates is measured on the grid; the maximum is
    recorded on the returned conjugacy.
    """
    F._require_zero_section()
    if F.dim != 1:
        raise ValueError("grid conjugacies are implemented for dim 1")
    kappa = F.multiplier()
    if kappa >= 1.0 - KAPPA_TOL:
        raise NotAttracting(kappa)
    sup_c1 = float(np.max(np.abs(F.coeffs[0].values_on_grid(1024))))
    if sup_c1 >= 1.0:
        raise ValueError(
            "sup |c_1| >= 1; apply modulus_rescale before linearizing"
        )
    r = float(r)
    if r > F.domain_radius:
        raise ValueError("r must not exceed the certified domain radius")

    thetas = grid_points(theta_nodes, 1)
    circle = r * np.exp(TWO_PI * 1j * np.arange(z_nodes) / z_nodes)
    W = np.broadcast_to(circle, (theta_nodes, z_nodes)).copy()
    G = W.copy()
    F1 = None  # f_theta(z_j), fixed target points of the step identity
    rho1 = F.coeffs[0]
    rho1_grid = rho1.evaluate(thetas)

    step_residual_max = 0.0
    delta = math.inf
    n = 0
    while n < max_n:
        theta_n = np.mod(thetas + n * F.alpha[0], 1.0)
        cs = np.stack([c.evaluate(theta_n) for c in F.coeffs], axis=0)
        # q = f(w) / (c1 w), a polynomial in w, evaluated by Horner
        q = np.zeros_like(W)
        for k in range(len(cs) - 1, 0, -1):
            q = q * W + cs[k][:, None]
        q = q * W / cs[0][:, None] + 1.0
        G_next = G * q
        fw = np.zeros_like(W)
        for k in range(len(cs) - 1, -1, -1):
            fw = fw * W + cs[k][:, None]
        fw = fw * W
        if F1 is None:
            F1 = fw.copy()
        delta = float(np.max(np.abs(G_next - G)))
        # chain identity: g^n(theta + alpha, f_theta(z)) = c1(theta) g^{n+1}(theta, z)
        shifted = _theta_shift(G, F.alpha[0])
        lhs = _disc_interp(shifted, r, F1)
        rhs = rho1_grid[:, None] * G_next
        step_residual_max = max(step_residual_max, float(np.max(np.abs(lhs - rhs))))
        G = G_next
        W = fw
        n += 1
        if delta < tol:
            break
    if delta >= tol:
        raise NoConvergence(
            f"normalized iterates stalled at delta {delta:.3e} after {n} steps",
            achieved=delta,
        )
    return KoenigsConjugacy(
        F.alpha,
        r,
        rho1,
        G,
        achieved_sup_delta=delta,
        iterations=n,
        step_residual_max=step_residual_max,
    )


# -- formal strong linearization ----------------------------------------------


@dataclass(frozen=True)
class ReductionData:
    """Linear-reduction record: the additive solution and the residual sup of
    ``|c_1 - lambda|`` after the rescaling."""

    solution: TrigPoly
    defect: float
    report: SmallDivisorReport | None


class FormalConjugacy:
    """Truncated conjugacy ``h(theta, z) = z + sum_k h_k(theta) z^k``.

    ``h`` transports the constant-multiplier linear model onto the map:
    ``f(h(theta, z)) = h(theta + alpha, lambda z)`` holds order by order up
    to the truncation.  ``tail_mass`` bounds the first dropped order and
    drives the certified evaluation radius.
    """

    def __init__(
        self,
        beta,
        multiplier,
        coeffs,
        reports,
        order_residuals,
        reduced_map,
        reduction,
        tail_mass,
    ):
        self.beta = float(beta)
        self.multiplier = complex(multiplier)
        self.coeffs = dict(coeffs)
        self.reports = dict(reports)
        self.order_residuals = dict(order_residuals)
        self.reduced_map = reduced_map
        self.reduction = reduction
        self.tail_mass = float(tail_mass)
        self.order = max(coeffs) if coeffs else 1

    def evaluate_h(self, theta, z):
        th = np.asarray(theta, dtype=float)
        zz = np.asarray(z, dtype=complex)
        acc = np.zeros(np.broadcast_shapes(th.shape, zz.shape), dtype=complex)
        for k in range(self.order, 1, -1):
            hk = self.coeffs.get(k)
            term = hk.evaluate(th) if hk is not None else 0.0
            acc = (acc + term) * zz
        return zz + acc * zz if self.order >= 2 else zz + np.zeros_like(acc)

    def truncation_radius(self, tol=1e-8):
        """Radius where the first dropped order contributes below ``tol``."""
        if self.tail_mass == 0.0:
            return self.reduced_map.domain_radius
        r = (tol / self.tail_mass) ** (1.0 / (self.order + 1))
        return min(r, self.reduced_map.domain_radius)

    def to_obj(self):
        return {
            "beta": self.beta,
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "order": self.order,
            "tail_mass": self.tail_mass,
            "coefficients": {
                str(k): p.to_records() for k, p in sorted(self.coeffs.items())
            },
            "order_residuals": {
                str(k): v for k, v in sorted(self.order_residuals.items())
            },
            "reduction_defect": None if self.reduction is None else self.reduction.defect,
        }


def _zmul(a, b, trunc):
    """Product of two z-polynomials with TrigPoly coefficients (index = power)."""
    out = [None] * (trunc + 1)
    for i, pa in enumerate(a):
        if pa is None:
            continue
        for j, pb in enumerate(b):
            if pb is None or i + j > trunc:
                continue
            prod = pa * pb
            out[i + j] = prod if out[i + j] is None else out[i + j] + prod
    return out


def _global_log_fit(F, *, degree_cutoff):
    """Fit the continuous branch of ``log c_1`` (zero winding assumed)."""
    from .maps import fit_refit

    def values(M):
        vals = F.coeffs[0].values_on_grid(M)
        phase = np.angle(vals)
        for axis in range(F.dim):
            phase = np.unwrap(phase, axis=axis)
        return np.log(np.abs(vals)) + 1j * phase

    return fit_refit(values, start=512, degree_cutoff=degree_cutoff, realflag=False)


def siegel_formal_linearize(
    F,
    order,
    divisor_floor=1e-8,
    *,
    degree_cutoff=512,
    reduction_tol=1e-6,
):
    """Solve the homological hierarchy up to ``order``.

    Step one reduces ``c_1`` to the constant ``e^{2 pi i beta}`` through the
    complex additive conjugation (the zero-degree hypothesis makes the log
    branch global).  Step two solves, for ``k = 2..order``, the diagonal
    mode equations ``h_k_hat(n) lambda (e^{2 pi i (n.alpha + (k-1) beta)} - 1)
    = R_k_hat(n)`` where ``R_k`` collects order-``k`` terms of
    ``f o h - h o rotation`` from lower orders by exact mode convolution.
    """
    F._require_zero_section()
    order = int(order)
    if order < 2:
        raise ValueError("order must be >= 2")
    kappa = F.multiplier()
    if abs(kappa - 1.0) > KAPPA_TOL:
        raise NotIndifferent(kappa)
    degree, beta = F.rotation_number(strict=True)
    if any(degree):
        raise ValueError(f"winding vector {degree} is not zero")

    c1 = F.coeffs[0]
    if c1.n_modes == 1 and c1.degree() == 0:
        lam = c1.mean
        beta = (np.angle(lam) / TWO_PI) % 1.0
        reduced = F
        reduction = None
    else:
        v_log = _global_log_fit(F, degree_cutoff=degree_cutoff)
        mean = v_log.mean
        beta = (mean.imag / TWO_PI) % 1.0
        lam = complex(np.exp(2j * math.pi * beta))
        solution, report = solve_cohomological(
            v_log.sub_mean(), F.alpha, divisor_floor
        )
        reduced = conjugate_scaling(F, solution, degree_cutoff=4 * degree_cutoff)
        defect = float(
            np.max(np.abs(reduced.coeffs[0].values_on_grid(1024) - lam))
        )
        if defect > reduction_tol:
            raise CertificateFailure(
                f"linear reduction defect {defect:.3e} above {reduction_tol:.1e}",
                bound=defect,
            )
        reduction = ReductionData(solution=solution, defect=defect, report=report)

    D = reduced.fiber_degree
    alpha = reduced.alpha
    one = TrigPoly.constant(1.0, dim=F.dim)
    hlist = [None, one]  # index = z power
    coeffs = {}
    reports = {}
    residuals = {}

    def order_rhs(k):
        rhs = None
        power = _zmul(hlist, hlist, k)
        for m in range(2, D + 1):
            if m > k:
                break
            term = power[k]
            if m <= D and term is not None:
                contrib = reduced.coeffs[m - 1] * term
                rhs = contrib if rhs is None else rhs + contrib
            if m < D:
                power = _zmul(power, hlist, k)
        return rhs if rhs is not None else TrigPoly.zero(F.dim)

    def solve_order(k, rhs):
        records = []
        modes = {}
        for n in sorted(rhs.modes):
            angle = float(np.dot(n, alpha)) + (k - 1) * beta
            div = lam * (complex(np.exp(TWO_PI * 1j * angle)) - 1.0)
            mag = abs(div)
            records.append((n, mag, 1.0 / mag if mag > 0 else math.inf))
            if mag < divisor_floor:
                report = SmallDivisorReport(
                    tuple(records), mag, (n,), divisor_floor
                )
                raise SmallDivisorError((n, k - 1), mag, divisor_floor, report)
            modes[n] = rhs.modes[n] / div
        report = SmallDivisorReport(
            tuple(records),
            min((rec[1] for rec in records), default=math.inf),
            (),
            divisor_floor,
        )
        return TrigPoly(F.dim, modes), report

    for k in range(2, order + 1):
        while len(hlist) <= k:
            hlist.append(None)
        rhs = order_rhs(k)
        if rhs.degree() > degree_cutoff:
            tail = sum(
                abs(a)
                for n, a in rhs.modes.items()
                if max(abs(v) for v in n) > degree_cutoff
            )
            if tail > 1e-10:
                raise DegreeOverflow(tail, degree_cutoff)
            rhs = TrigPoly(
                F.dim,
                {
                    n: a
                    for n, a in rhs.modes.items()
                    if max(abs(v) for v in n) <= degree_cutoff
                },
            )
        hk, report = solve_order(k, rhs)
        hlist[k] = hk
        coeffs[k] = hk
        reports[k] = report
        # order-k identity: c1 h_k + R_k - lambda^k h_k(. + alpha) == 0
        res = reduced.coeffs[0] * hk + rhs - (lam**k) * hk.rotate(alpha)
        residuals[k] = res.mass()

    # bound the first dropped order for the certified evaluation radius
    while len(hlist) <= order + 1:
        hlist.append(None)
    rhs_next = order_rhs(order + 1)
    try:
        h_next, _ = solve_order(order + 1, rhs_next)
        tail_mass = h_next.mass()
    except SmallDivisorError:
        tail_mass = rhs_next.mass() / divisor_floor
    return FormalConjugacy(
        beta=beta,
        multiplier=lam,
        coeffs=coeffs,
        reports=reports,
        order_residuals=residuals,
        reduced_map=reduced,
        reduction=reduction,
        tail_mass=tail_mass,
    )


# -- residual of a stored conjugacy ---------------------------------------------


def conjugacy_residual(F, conjugacy, *, grid=(256, 64), radius=None, tol=1e-8):
    """Sup defect of the stored conjugacy identity on a theta x circle grid.

    For a grid conjugacy this is ``sup |g(F(theta, z)) - c_1(theta) g(theta,
    z)|``; for a formal one ``sup |f(h(theta, z)) - h(theta + alpha, lambda
    z)|`` restricted to the certified truncation radius.  The fiber defect is
    holomorphic in ``z``, so the circle grid realizes the disc supremum.
    """
    m_theta, m_z = grid
    thetas = grid_points(m_theta, 1)
    if isinstance(conjugacy, KoenigsConjugacy):
        r = radius if radius is not None else conjugacy.radius
        circle = r * np.exp(TWO_PI * 1j * np.arange(m_z) / m_z)
        TH = np.broadcast_to(thetas[:, None], (m_theta, m_z))
        ZZ = np.broadcast_to(circle, (m_theta, m_z))
        fz = F.fiber(thetas[:, None], ZZ)
        lhs = conjugacy.evaluate(
            np.mod(TH + F.alpha[0], 1.0).ravel(), fz.ravel()
        ).reshape(m_theta, m_z)
        rhs = conjugacy.rho1.evaluate(thetas)[:, None] * conjugacy.evaluate(
            TH.ravel(), ZZ.ravel()
        ).reshape(m_theta, m_z)
        return float(np.max(np.abs(lhs - rhs)))
    if isinstance(conjugacy, FormalConjugacy):
        r = radius if radius is not None else conjugacy.truncation_radius(tol)
        circle = r * np.exp(TWO_PI * 1j * np.arange(m_z) / m_z)
        TH = np.broadcast_to(thetas[:, None], (m_theta, m_z))
        ZZ = np.broadcast_to(circle, (m_theta, m_z))
        G = conjugacy.reduced_map
        h_there = conjugacy.evaluate_h(TH, ZZ)
        lhs = G.fiber(thetas[:, None], h_there)
        rhs = conjugacy.evaluate_h(
            np.mod(TH + G.alpha[0], 1.0), conjugacy.multiplier * ZZ
        )
        return float(np.max(np.abs(lhs - rhs)))
    raise TypeError(f"unsupported conjugacy type {type(conjugacy)!r}")
