"""Fibered holomorphic maps with polynomial fibers.

A map acts as ``(theta, z) -> (theta + alpha, sum_k c_k(theta) z^k)`` with
trigonometric-polynomial coefficients and an invariant zero section.  The
constructor certifies non-vanishing of the fiber derivative and injectivity
on the closed domain disc; the certificate also yields an explicit radius on
which fiber inversion is guaranteed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CertificateFailure,
    DegreeOverflow,
    NoConvergence,
    OutOfCertifiedRange,
    OutOfDomain,
    UnwrapAmbiguity,
)
from .fourier import TrigPoly, grid_points, stable_grid_mean

CERT_GRID = 1024
KAPPA_TOL = 1e-9


@dataclass(frozen=True)
class InvariantCurve:
    """A curve ``theta -> u(theta)`` with its verified invariance defect."""

    curve: TrigPoly
    residual: float


@dataclass(frozen=True)
class CharacteristicsReport:
    """Multiplier, stability class, winding vector and rotation number."""

    kappa: float
    kind: str  # attracting | repelling | indifferent
    degree: tuple
    rho_tr: float | None

    def to_obj(self):
        return {
            "kappa": self.kappa,
            "class": self.kind,
            "degree": list(self.degree),
            "rho_tr": self.rho_tr,
        }


class FiberedMap:
    """Skew product over the rotation ``theta -> theta + alpha``.

    ``coeffs`` lists the fiber coefficients ``c_1 .. c_D``; when ``constant``
    is absent the zero section is invariant by construction.  Maps carrying a
    constant term (e.g. one written around a non-trivial invariant curve)
    must be passed through :func:`normalize_curve` before the infinitesimal
    characteristics make sense.  ``domain_radius`` is the certified disc
    radius: the constructor checks

    * ``min |c_1| > 0`` on a 1024-per-dimension grid, and
    * ``min |c_1| - sum_{k>=2} k |c_k|_inf r^(k-1) > 0``

    which bounds ``|f(z1) - f(z2)| >= margin |z1 - z2|`` on the closed disc.
    """

    def __init__(
        self, alpha, coeffs, domain_radius, *, constant=None, cert_grid=CERT_GRID
    ):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        coeffs = tuple(coeffs)
        if not coeffs:
            raise ValueError("at least the linear coefficient is required")
        dim = coeffs[0].dim
        if alpha.shape != (dim,):
            raise ValueError("alpha length must match coefficient dimension")
        if any(c.dim != dim for c in coeffs):
            raise ValueError("all coefficients must share one dimension")
        if constant is not None and constant.dim != dim:
            raise ValueError("constant term must share the coefficient dimension")
        r = float(domain_radius)
        if r <= 0:
            raise ValueError("domain_radius must be positive")

        self.alpha = np.mod(alpha, 1.0)
        self.coeffs = coeffs
        self.constant = constant if constant is not None and constant.n_modes else None
        self.domain_radius = r
        self.dim = dim
        self.fiber_degree = len(coeffs)

        c1_vals = coeffs[0].values_on_grid(cert_grid)
        c1_min = float(np.min(np.abs(c1_vals)))
        if c1_min <= 0.0:
            raise CertificateFailure(
                "fiber derivative vanishes on the certification grid",
                bound=c1_min,
            )
        sups = [c.mass() for c in coeffs]
        tail_lip = sum(k * sups[k - 1] * r ** (k - 1) for k in range(2, len(coeffs) + 1))
        margin = c1_min - tail_lip
        if margin <= 0.0:
            raise CertificateFailure(
                f"injectivity certificate failed: min|c1| = {c1_min:.6g} "
                f"vs derivative tail {tail_lip:.6g} at radius {r:.6g}",
                bound=margin,
            )
        tail_sup = sum(sups[k - 1] * r ** (k - 1) for k in range(2, len(coeffs) + 1))
        self.c1_min = c1_min
        self.injectivity_margin = margin
        # every |w| below this radius has exactly one preimage in the disc
        self.inversion_radius = r * (c1_min - tail_sup)
        self._kappa = None

    # -- basic evaluation ---------------------------------------------------

    @property
    def zero_section_invariant(self):
        return self.constant is None

    def _require_zero_section(self):
        if not self.zero_section_invariant:
            raise ValueError(
                "zero section is not invariant; move the curve there with "
                "normalize_curve first"
            )

    def coeff_values(self, theta):
        """Stacked coefficient values ``c_k(theta)``, shape (D,) + theta."""
        return np.stack([c.evaluate(theta) for c in self.coeffs], axis=0)

    def fiber(self, theta, z):
        """Evaluate ``f_theta(z)`` (both arguments broadcastable)."""
        cs = self.coeff_values(theta)
        value = self._horner(cs, np.asarray(z, dtype=complex))
        if self.constant is not None:
            value = value + self.constant.evaluate(theta)
        return value

    @staticmethod
    def _horner(cs, z):
        acc = np.zeros_like(z)
        for k in range(len(cs) - 1, -1, -1):
            acc = acc * z + cs[k]
        return acc * z

    @staticmethod
    def _horner_deriv(cs, z):
        acc = np.zeros_like(z)
        for k in range(len(cs) - 1, -1, -1):
            acc = acc * z + (k + 1) * cs[k]
        return acc

    def fiber_deriv(self, theta, z):
        cs = self.coeff_values(theta)
        return self._horner_deriv(cs, np.asarray(z, dtype=complex))

    def apply(self, theta, z):
        """One step of the skew product; errors outside the certified disc."""
        z = complex(z)
        if abs(z) > self.domain_radius * (1 + 1e-12):
            raise OutOfDomain(abs(z), self.domain_radius)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        theta_next = np.mod(theta + self.alpha, 1.0)
        z_next = complex(self.fiber(theta if self.dim > 1 else theta[0], z))
        if self.dim == 1:
            return float(theta_next[0]), z_next
        return theta_next, z_next

    def orbit_segment(self, theta0, z0, n, tube_radius=None):
        """Forward orbit, truncated at the first exit from the tube.

        Returns ``(thetas, zs, escape_index)`` where the escaping point is
        included and ``escape_index`` is ``None`` for a full segment.  Theta
        is advanced incrementally so that concatenated segments agree
        bitwise with a single longer one.
        """
        r = self.domain_radius if tube_radius is None else float(tube_radius)
        if r > self.domain_radius * (1 + 1e-12):
            raise ValueError("tube_radius must not exceed domain_radius")
        z = complex(z0)
        if abs(z) > r:
            raise OutOfDomain(abs(z), r)
        theta = np.mod(np.atleast_1d(np.asarray(theta0, dtype=float)), 1.0)
        thetas = [theta.copy()]
        zs = [z]
        escape = None
        for j in range(1, int(n) + 1):
            z = complex(self.fiber(theta if self.dim > 1 else theta[0], z))
            theta = np.mod(theta + self.alpha, 1.0)
            thetas.append(theta.copy())
            zs.append(z)
            if abs(z) > r:
                escape = j
                break
        thetas = np.array(thetas)
        if self.dim == 1:
            thetas = thetas[:, 0]
        return thetas, np.array(zs, dtype=complex), escape

    # -- fiber inversion ----------------------------------------------------

    def fiber_inverse(
        self,
        theta,
        w,
        guess=None,
        *,
        certified=True,
        tol=1e-12,
        max_iter=100,
    ):
        """Solve ``f_theta(z) = w`` by damped Newton iteration.

        Within the certified radius the solution exists and is unique in the
        closed disc; beyond it, pass ``certified=False`` to attempt the
        inversion anyway.
        """
        w = complex(w)
        if self.constant is not None:
            w = w - complex(self.constant.evaluate(theta))
        if certified and abs(w) > self.inversion_radius:
            raise OutOfCertifiedRange(abs(w), self.inversion_radius)
        cs = self.coeff_values(theta)
        z = complex(w / cs[0]) if guess is None else complex(guess)
        err = abs(self._horner(cs, np.asarray(z)) - w)
        for _ in range(max_iter):
            if err < tol:
                return z
            deriv = complex(self._horner_deriv(cs, np.asarray(z)))
            if deriv == 0:
                break
            step = (complex(self._horner(cs, np.asarray(z))) - w) / deriv
            damping = 1.0
            for _ in range(12):
                cand = z - damping * step
                cand_err = abs(complex(self._horner(cs, np.asarray(cand))) - w)
                if cand_err < err:
                    z, err = cand, cand_err
                    break
                damping *= 0.5
            else:
                break
        if err < tol:
            return z
        raise NoConvergence(
            f"fiber inversion stalled at residual {err:.3e}", achieved=err
        )

    # -- infinitesimal characteristics --------------------------------------

    def multiplier(self, *, tol=1e-10):
        """``exp`` of the torus mean of ``log |c_1|``, grid-doubled."""
        self._require_zero_section()
        if self._kappa is None:
            c1 = self.coeffs[0]

            def sample(M):
                return np.log(np.abs(c1.values_on_grid(M)))

            mean, _ = stable_grid_mean(sample, start=256, tol=tol)
            self._kappa = float(np.exp(mean.real))
        return self._kappa

    def rotation_number(self, *, strict=True, start=512, cap=1 << 16):
        """Winding vector of ``c_1`` and, when it vanishes, the mean angle.

        The winding number along each coordinate loop is computed by argument
        unwrapping on a grid fine enough that successive jumps stay below
        pi/2; the mean of the unwrapped argument over the full grid gives the
        rotation number in [0, 1).
        """
        self._require_zero_section()
        c1 = self.coeffs[0]
        degree = []
        for axis in range(self.dim):
            degree.append(self._loop_winding(c1, axis, start=start, cap=cap))
        degree = tuple(degree)
        if any(degree):
            return degree, None
        if strict and abs(self.multiplier() - 1.0) > KAPPA_TOL:
            return degree, None
        M = start
        while True:
            vals = c1.values_on_grid(M)
            phase = np.angle(vals)
            for axis in range(self.dim):
                phase = np.unwrap(phase, axis=axis)
            jumps = max(
                float(np.max(np.abs(np.diff(phase, axis=a))))
                for a in range(self.dim)
            ) if min(phase.shape) > 1 else 0.0
            if jumps < math.pi / 2:
                break
            M *= 2
            if M > cap:
                raise UnwrapAmbiguity(
                    "argument jumps stay above pi/2 up to the grid cutoff"
                )
        rho = float(np.mean(phase)) / (2 * math.pi)
        return degree, rho % 1.0

    @staticmethod
    def _loop_winding(c1, axis, *, start, cap):
        M = start
        while True:
            pts = np.zeros((M, c1.dim))
            pts[:, axis] = np.arange(M) / M
            vals = c1.evaluate(pts if c1.dim > 1 else pts[:, 0])
            ang = np.angle(vals)
            diffs = np.diff(np.concatenate([ang, ang[:1]]))
            diffs = np.mod(diffs + math.pi, 2 * math.pi) - math.pi
            if np.max(np.abs(diffs)) < math.pi / 2:
                total = float(np.sum(diffs))
                return int(round(total / (2 * math.pi)))
            M *= 2
            if M > cap:
                raise UnwrapAmbiguity(
                    "argument jumps stay above pi/2 up to the grid cutoff"
                )

    def characteristics(self):
        kappa = self.multiplier()
        if abs(kappa - 1.0) <= KAPPA_TOL:
            kind = "indifferent"
        elif kappa < 1.0:
            kind = "attracting"
        else:
            kind = "repelling"
        degree, rho = self.rotation_number(strict=True)
        return CharacteristicsReport(kappa=kappa, kind=kind, degree=degree, rho_tr=rho)

    # -- serialization ------------------------------------------------------

    def to_obj(self):
        obj = {
            "dim": self.dim,
            "alpha": [float(a) for a in self.alpha],
            "domain_radius": self.domain_radius,
            "coeffs": [c.to_records() for c in self.coeffs],
        }
        if self.constant is not None:
            obj["constant"] = self.constant.to_records()
        return obj


# -- curve handling ------------------------------------------------------------


def invariant_curve(F, u, *, tol=1e-8, grid=None):
    """Validate invariance of ``u`` under ``F`` and record the defect."""
    M = grid or max(256, 4 * (u.degree() + 1))
    u_vals = u.values_on_grid(M)
    if float(np.max(np.abs(u_vals))) > F.domain_radius:
        raise OutOfDomain(float(np.max(np.abs(u_vals))), F.domain_radius)
    pts = grid_points(M, F.dim)
    shifted = u.rotate(F.alpha).values_on_grid(M)
    residual = float(np.max(np.abs(F.fiber(pts, u_vals) - shifted)))
    if residual >= tol * F.domain_radius:
        raise CertificateFailure(
            f"curve invariance defect {residual:.3e} above "
            f"{tol:.1e} * domain scale",
            bound=residual,
        )
    return InvariantCurve(curve=u, residual=residual)


def fit_refit(values_fn, *, start, degree_cutoff, tail_tol=1e-10, realflag=None):
    """Fit grid samples to a TrigPoly, doubling until the spectral tail dies.

    ``values_fn(M)`` must return samples on the uniform M-grid.  The top
    quarter of the resolved band is treated as the tail; if its mass stays
    above ``tail_tol`` at the cutoff the fit raises ``DegreeOverflow``.
    """
    M = int(start)
    cap = 4 * int(degree_cutoff)
    while True:
        vals = np.asarray(values_fn(M))
        poly = TrigPoly.fit_grid(vals, realflag=realflag)
        band = M // 4
        tail = sum(
            abs(a)
            for n, a in poly.modes.items()
            if max(abs(v) for v in n) > band
        )
        scale = poly.mass() + 1.0
        if tail <= tail_tol * scale:
            return poly.prune(1e-15 * scale)
        if M >= cap:
            raise DegreeOverflow(tail, degree_cutoff)
        M *= 2


def normalize_curve(F, curve, *, degree_cutoff=4096):
    """Move an invariant curve to the zero section.

    Conjugates by ``(theta, z) -> (theta, z + u(theta))``: the fiber
    polynomial is recentered at ``u(theta)`` on a grid and each shifted
    coefficient is refit by discrete Fourier analysis.  The recentered
    constant term (the invariance defect, bounded by ``curve.residual``) is
    dropped, making the zero section exactly invariant for the returned map.
    """
    u = curve.curve
    D = F.fiber_degree
    degs = [c.degree() for c in F.coeffs]
    base = max(max(degs) + D * max(u.degree(), 1), 8)
    M = 1 << int(math.ceil(math.log2(4 * base)))

    def shifted_coeff(m):
        def values(size):
            u_vals = u.values_on_grid(size)
            out = np.zeros_like(u_vals)
            for k in range(m, D + 1):
                out = out + (
                    math.comb(k, m)
                    * F.coeffs[k - 1].values_on_grid(size)
                    * u_vals ** (k - m)
                )
            return out

        return values

    new_coeffs = []
    for m in range(1, D + 1):
        poly = fit_refit(
            shifted_coeff(m),
            start=M,
            degree_cutoff=degree_cutoff,
            realflag=False,
        )
        new_coeffs.append(poly)
    sup_u = float(np.max(np.abs(u.values_on_grid(M))))
    new_radius = F.domain_radius - sup_u
    if new_radius <= 0:
        raise CertificateFailure(
            "curve amplitude leaves no certified radius around the section",
            bound=new_radius,
        )
    return FiberedMap(F.alpha, new_coeffs, new_radius)


def conjugate_scaling(F, v, *, degree_cutoff=4096, radius=None):
    """Conjugate by the fibered rescaling ``(theta, z) -> (theta, e^{v} z)``.

    The new coefficients ``c_k e^{k v(theta) - v(theta + alpha)}`` are refit
    on a grid.  The certified radius shrinks by ``sup |e^v|``.
    """
    F._require_zero_section()
    shifted = v.rotate(F.alpha)

    def coeff_values(k):
        def values(M):
            vv = v.values_on_grid(M)
            sv = shifted.values_on_grid(M)
            return F.coeffs[k - 1].values_on_grid(M) * np.exp(k * vv - sv)

        return values

    base = max(max(c.degree() for c in F.coeffs) + 1, v.degree() + 1, 8)
    start = 1 << int(math.ceil(math.log2(8 * base)))
    new_coeffs = [
        fit_refit(
            coeff_values(k),
            start=start,
            degree_cutoff=degree_cutoff,
            realflag=False,
        )
        for k in range(1, F.fiber_degree + 1)
    ]
    sup_scale = float(np.max(np.abs(np.exp(v.values_on_grid(max(start, 512))))))
    new_radius = radius if radius is not None else F.domain_radius / sup_scale
    return FiberedMap(F.alpha, new_coeffs, new_radius)
