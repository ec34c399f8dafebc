"""Birkhoff-sum diagnostics for indifferent sections.

Finite-horizon boundedness witnesses, tube-containment probes, and the
classical construction of an indifferent-but-unstable linear skew product
whose additive equation has divergent formal solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .arithmetic import continued_fraction
from .errors import InsufficientLiouville, NotIndifferent
from .fourier import TWO_PI, OrbitEvaluator, TrigPoly, grid_points
from .maps import KAPPA_TOL, FiberedMap, fit_refit


@dataclass(frozen=True)
class BirkhoffTrace:
    """Partial sums of ``log |c_1|`` along one base orbit.

    ``values[n]`` is the n-term sum (``values[0] == 0``); ``b_minus`` and
    ``b_plus`` are the running extrema, ``slope`` the least-squares drift.
    """

    theta: tuple
    values: np.ndarray
    summands: np.ndarray
    b_minus: float
    b_plus: float
    slope: float


def birkhoff_trace(F, theta, N):
    """Exact partial sums of ``log |c_1|`` along ``theta, theta+alpha, ...``."""
    F._require_zero_section()
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    steps = np.arange(int(N))[:, None] * F.alpha[None, :]
    pts = np.mod(theta[None, :] + steps, 1.0)
    if F.dim == 1:
        pts = pts[:, 0]
    summands = np.log(np.abs(F.coeffs[0].evaluate(pts)))
    values = np.concatenate([[0.0], np.cumsum(summands)])
    n = np.arange(len(values))
    slope = float(np.polyfit(n, values, 1)[0])
    return BirkhoffTrace(
        theta=tuple(float(t) for t in theta),
        values=values,
        summands=summands,
        b_minus=float(np.min(values)),
        b_plus=float(np.max(values)),
        slope=slope,
    )


@dataclass(frozen=True)
class BoundednessScan:
    """Best finite-horizon boundedness witness over a base grid."""

    theta: tuple
    b_minus: float
    b_plus: float
    oscillation: float
    horizon: int
    grid_size: int
    oscillations: np.ndarray  # per grid point

    def to_obj(self):
        return {
            "theta": list(self.theta),
            "b_minus": self.b_minus,
            "b_plus": self.b_plus,
            "oscillation": self.oscillation,
            "horizon": self.horizon,
            "grid_size": self.grid_size,
        }


def boundedness_scan(F, N, grid_size=256):
    """Scan the base grid for the smallest Birkhoff-sum oscillation.

    Requires an indifferent section.  Returns the grid point whose sums stay
    in the tightest band over ``n <= N`` together with the observed extrema;
    the reported band can only widen as ``N`` grows.
    """
    F._require_zero_section()
    kappa = F.multiplier()
    if abs(kappa - 1.0) > KAPPA_TOL:
        raise NotIndifferent(kappa)
    pts = grid_points(grid_size, F.dim)
    flat = pts.reshape(-1, F.dim) if F.dim > 1 else pts.reshape(-1, 1)
    stream = OrbitEvaluator(F.coeffs[0], flat, F.alpha)
    S = np.zeros(len(flat))
    smin = np.zeros(len(flat))
    smax = np.zeros(len(flat))
    for _ in range(int(N)):
        S += np.log(np.abs(stream.next_values()))
        np.minimum(smin, S, out=smin)
        np.maximum(smax, S, out=smax)
    osc = smax - smin
    best = int(np.argmin(osc))
    return BoundednessScan(
        theta=tuple(float(v) for v in flat[best]),
        b_minus=float(smin[best]),
        b_plus=float(smax[best]),
        oscillation=float(osc[best]),
        horizon=int(N),
        grid_size=int(grid_size),
        oscillations=osc,
    )


@dataclass(frozen=True)
class StabilityReport:
    """One-sided containment certificate for a tube of radius ``radius``.

    ``escaped`` disproves invariance of this tube; ``contained`` at horizon
    ``steps`` is evidence, not proof.
    """

    radius: float
    steps: int
    grid: tuple
    verdict: str  # contained | escaped
    witness: tuple | None  # (theta, z0, step)
    max_excursion: np.ndarray  # per theta node
    escaped_count: int

    def to_obj(self):
        witness = None
        if self.witness is not None:
            th, z0, step = self.witness
            witness = {
                "theta": list(th),
                "z0": [z0.real, z0.imag],
                "step": step,
            }
        return {
            "radius": self.radius,
            "steps": self.steps,
            "grid": list(self.grid),
            "verdict": self.verdict,
            "witness": witness,
            "escaped_count": self.escaped_count,
            "max_excursion": [float(v) for v in self.max_excursion],
        }


ESCAPE_SLACK = 1e-12  # relative; absorbs roundoff of modulus-preserving maps


def stability_probe(F, r, n, grid=(64, 4, 16)):
    """Iterate every tube grid point forward and report escapes.

    The tube grid is theta nodes x radii x angles (radii ``r*(i+1)/n_r``).
    Escape means ``|z| > r`` beyond machine slack; the witness is the
    earliest escaping initial condition, ties broken by grid order.
    """
    F._require_zero_section()
    r = float(r)
    if r > F.domain_radius:
        raise ValueError("tube radius exceeds the certified domain radius")
    n_theta, n_rad, n_ang = grid
    pts = grid_points(n_theta, F.dim)
    flat_theta = pts.reshape(-1, F.dim)
    radii = r * (np.arange(1, n_rad + 1) / n_rad)
    angles = np.exp(TWO_PI * 1j * np.arange(n_ang) / n_ang)
    z0 = (radii[:, None] * angles[None, :]).ravel()

    P_theta = len(flat_theta)
    P_z = len(z0)
    Z = np.broadcast_to(z0, (P_theta, P_z)).copy()
    alive = np.ones((P_theta, P_z), dtype=bool)
    first_escape = np.full((P_theta, P_z), -1, dtype=int)
    max_exc = np.abs(Z).copy()
    threshold = r * (1.0 + ESCAPE_SLACK)

    streams = [OrbitEvaluator(c, flat_theta, F.alpha) for c in F.coeffs]
    for step in range(1, int(n) + 1):
        if not alive.any():
            break
        cs = [s.next_values() for s in streams]
        f = np.zeros_like(Z)
        for k in range(len(cs) - 1, -1, -1):
            f = f * Z + cs[k][:, None]
        f = f * Z
        Z = np.where(alive, f, Z)
        absf = np.abs(f)
        max_exc = np.where(alive, np.maximum(max_exc, absf), max_exc)
        escaped_now = alive & (absf > threshold)
        first_escape[escaped_now] = step
        alive &= ~escaped_now

    escaped = first_escape >= 0
    witness = None
    if escaped.any():
        step_min = int(first_escape[escaped].min())
        flat = np.flatnonzero(first_escape.ravel() == step_min)[0]
        ti, zi = divmod(int(flat), P_z)
        witness = (
            tuple(float(v) for v in flat_theta[ti]),
            complex(z0[zi]),
            step_min,
        )
    per_theta = max_exc.max(axis=1)
    return StabilityReport(
        radius=r,
        steps=int(n),
        grid=tuple(int(g) for g in grid),
        verdict="escaped" if escaped.any() else "contained",
        witness=witness,
        max_excursion=per_theta,
        escaped_count=int(np.count_nonzero(escaped)),
    )


# -- divergent-solution generator ----------------------------------------------


@dataclass(frozen=True)
class FurstenbergSchedule:
    """Amplitude and divergence requirements for the generator.

    Amplitudes decay as ``||q omega||^exponent``; each level's formal
    solution coefficient must exceed the previous one by
    ``divergence_factor``, and amplitudes must decay by ``decay_factor``
    (the finite summability witness).
    """

    levels: int = 6
    exponent: float = 0.5
    divergence_factor: float = 2.0
    decay_factor: float = 1.0


@dataclass(frozen=True)
class FurstenbergExample:
    """Truncated divergent-solution data and the emitted linear map."""

    omega: float
    denominators: tuple
    norms: tuple
    amplitudes: tuple
    solution_moduli: tuple
    phi: TrigPoly
    psi_truncations: tuple
    sup_norms: tuple
    fibered_map: FiberedMap
    schedule: FurstenbergSchedule = field(repr=False, default=None)

    def table(self):
        rows = []
        for k in range(len(self.denominators)):
            rows.append(
                (
                    k + 1,
                    self.denominators[k],
                    self.norms[k],
                    self.amplitudes[k],
                    self.solution_moduli[k],
                    self.sup_norms[k],
                )
            )
        return rows


def _frac_part(q, omega):
    """Fractional part of ``q * omega``; exact for Fraction input."""
    if isinstance(omega, Fraction):
        v = q * omega
        return float(v - math.floor(v))
    return float(np.mod(q * float(omega), 1.0))


def furstenberg_example(omega, schedule=None, *, denominators=None, cf_terms=48):
    """Build a continuous zero-mean forcing with divergent formal solutions.

    Modes sit on consecutive convergent denominators of ``omega``; the
    amplitude schedule must keep the forcing summable while the per-mode
    solution coefficients grow by the requested factor at every level.
    Exact rationals (``fractions.Fraction``) avoid float noise for fast
    denominator growth.  Raises ``InsufficientLiouville`` when the
    denominators grow too slowly for the schedule.
    """
    schedule = schedule or FurstenbergSchedule()
    if schedule.levels < 2:
        raise ValueError("at least two levels are required")
    omega_f = float(omega)
    if not 0.0 < omega_f < 1.0:
        raise ValueError("omega must lie in (0, 1)")

    if denominators is None:
        cf = continued_fraction(
            omega if isinstance(omega, Fraction) else omega_f, cf_terms
        )
        qs = [q for q in cf.denominators if q >= 1]
    else:
        qs = [int(q) for q in denominators]
    qs = sorted(set(qs))

    usable = []
    for q in qs:
        frac = _frac_part(q, omega)
        norm = min(frac, 1.0 - frac)
        if norm == 0.0:
            break
        if not isinstance(omega, Fraction):
            # below the float resolution of q*omega the norm is noise
            if norm < 8.0 * q * abs(omega_f) * np.finfo(float).eps:
                break
        usable.append((q, frac, norm))
    if len(usable) < schedule.levels:
        raise InsufficientLiouville(
            f"only {len(usable)} reliable denominators available, "
            f"{schedule.levels} levels requested"
        )
    usable = usable[: schedule.levels]

    amps = [norm**schedule.exponent for _, _, norm in usable]
    divisors = [
        abs(complex(np.exp(TWO_PI * 1j * frac)) - 1.0) for _, frac, _ in usable
    ]
    moduli = [0.5 * a / d for a, d in zip(amps, divisors)]

    for k in range(len(usable) - 1):
        if amps[k + 1] >= schedule.decay_factor * amps[k]:
            raise InsufficientLiouville(
                f"amplitude schedule is not summable at level {k + 2}: "
                f"{amps[k + 1]:.3e} vs {schedule.decay_factor:.2f} * {amps[k]:.3e}",
                level=k + 2,
            )
        if moduli[k + 1] <= schedule.divergence_factor * moduli[k]:
            raise InsufficientLiouville(
                f"solution coefficients grow too slowly at level {k + 2}: "
                f"{moduli[k + 1]:.3e} vs "
                f"{schedule.divergence_factor:.2f} * {moduli[k]:.3e}",
                level=k + 2,
            )

    phi_modes = {}
    psis = []
    psi_modes = {}
    sup_norms = []
    for (q, frac, norm), a in zip(usable, amps):
        phi_modes[(q,)] = a / 2.0
        phi_modes[(-q,)] = a / 2.0
        divisor = complex(np.exp(TWO_PI * 1j * frac)) - 1.0
        coeff = (a / 2.0) / divisor
        psi_modes[(q,)] = coeff
        psi_modes[(-q,)] = coeff.conjugate()
        psi = TrigPoly(1, dict(psi_modes), realflag=True)
        psis.append(psi)
        M = 1
        while M < 4 * q + 1:
            M *= 2
        sup_norms.append(float(np.max(np.abs(psi.values_on_grid(M).real))))
    phi = TrigPoly(1, phi_modes, realflag=True)

    q_max = usable[-1][0]
    start = 1
    while start < 8 * q_max:
        start *= 2

    def exp_phi(M):
        return np.exp(phi.values_on_grid(M).real)

    c1 = fit_refit(exp_phi, start=start, degree_cutoff=4 * q_max, realflag=True)
    fmap = FiberedMap([omega_f], [c1], 1.0)
    return FurstenbergExample(
        omega=omega_f,
        denominators=tuple(q for q, _, _ in usable),
        norms=tuple(norm for _, _, norm in usable),
        amplitudes=tuple(amps),
        solution_moduli=tuple(moduli),
        phi=phi,
        psi_truncations=tuple(psis),
        sup_norms=tuple(sup_norms),
        fibered_map=fmap,
        schedule=schedule,
    )
