"""Grid approximation of the invariant continuum of an indifferent section.

The base rotation is replaced by a prime-denominator rational, the modulus is
rescaled to one, and the fiber maps along the finite periodic orbit form a
chain of certified univalent polynomials.  Pixels whose forward and backward
orbits stay in the tube approximate the continuum fibers; hole filling,
pixel-metric Hausdorff distances and an invariance check make the
approximation auditable.  Base dimension is 1 throughout this module.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .arithmetic import prime_denominator_approximants
from .errors import (
    CertificateFailure,
    EmptySet,
    InverseBreakdown,
    NotIndifferent,
    ScheduleExhausted,
)
from .fourier import TrigPoly, fejer_approximation, solve_cohomological
from .maps import KAPPA_TOL, FiberedMap, conjugate_scaling, fit_refit

ESCAPE_SLACK = 1e-12
NEWTON_TOL = 1e-12


# -- pixel mask stacks ---------------------------------------------------------


@dataclass
class CompactSetApprox:
    """Stack of per-fiber pixel masks over the frame ``[-h, h]^2``.

    ``masks`` has shape (fibers, M, M) with axis 1 the real part and axis 2
    the imaginary part; pixel ``(i, j)`` is centered at
    ``-h + (i + 1/2) px + i(-h + (j + 1/2) px)``.  The origin pixel of every
    fiber is always marked (the section itself).
    """

    half_width: float
    masks: np.ndarray  # bool (fibers, M, M)

    def __post_init__(self):
        self.masks = np.asarray(self.masks, dtype=bool)
        if self.masks.ndim != 3 or self.masks.shape[1] != self.masks.shape[2]:
            raise ValueError("masks must be (fibers, M, M)")

    @property
    def fibers(self):
        return self.masks.shape[0]

    @property
    def resolution(self):
        return self.masks.shape[1]

    @property
    def pixel(self):
        return 2.0 * self.half_width / self.resolution

    def centers(self):
        M = self.resolution
        axis = -self.half_width + (np.arange(M) + 0.5) * self.pixel
        return axis[:, None] + 1j * axis[None, :]

    def pixel_counts(self):
        return self.masks.sum(axis=(1, 2))

    def component_counts(self):
        counts = np.zeros(self.fibers, dtype=int)
        for i in range(self.fibers):
            _, n = ndimage.label(self.masks[i])
            counts[i] = n
        return counts

    def same_geometry(self, other):
        return (
            self.masks.shape == other.masks.shape
            and abs(self.half_width - other.half_width) < 1e-15
        )

    def downsample(self):
        """Halve every resolution by OR-pooling 2x2x2 blocks."""
        m = self.masks
        if m.shape[0] % 2 or m.shape[1] % 2:
            raise ValueError("resolutions must be even to downsample")
        pooled = (
            m.reshape(m.shape[0] // 2, 2, m.shape[1] // 2, 2, m.shape[2] // 2, 2)
            .any(axis=(1, 3, 5))
        )
        return CompactSetApprox(self.half_width, pooled)


def _rasterize_index(values, half_width, M):
    """Pixel index of each complex value; -1 marks points off the frame."""
    px = 2.0 * half_width / M
    ix = np.floor((values.real + half_width) / px).astype(int)
    iy = np.floor((values.imag + half_width) / px).astype(int)
    ok = (ix >= 0) & (ix < M) & (iy >= 0) & (iy < M)
    return ix, iy, ok


def fill_fibers(K):
    """Fill per-fiber holes: unmarked 4-connected regions not touching the
    frame boundary become marked.  Idempotent."""
    out = K.masks.copy()
    for i in range(K.fibers):
        holes = ~out[i]
        labels, n = ndimage.label(holes)
        if not n:
            continue
        border = np.unique(
            np.concatenate(
                [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
            )
        )
        border = set(border[border > 0].tolist())
        fill = holes & ~np.isin(labels, sorted(border) or [0])
        out[i] |= fill
    return CompactSetApprox(K.half_width, out)


def _dilate(mask):
    """One Chebyshev-ball dilation; periodic along the fiber axis only."""
    out = mask
    rolled = out | np.roll(out, 1, axis=0) | np.roll(out, -1, axis=0)
    out = rolled
    for axis in (1, 2):
        shifted = out.copy()
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(1, None)
        hi[axis] = slice(None, -1)
        shifted[tuple(lo)] |= out[tuple(hi)]
        shifted[tuple(hi)] |= out[tuple(lo)]
        out = shifted
    return out


def _directed_pixels(A, B):
    """Smallest k with A contained in the k-fold dilation of B."""
    k = 0
    cover = B
    limit = sum(A.shape)
    while not np.all(~A | cover):
        cover = _dilate(cover)
        k += 1
        if k > limit:
            raise RuntimeError("masks do not cover within the frame diameter")
    return k


def hausdorff_distance(A, B, *, pixels=False):
    """Hausdorff distance between two mask stacks on the same geometry.

    The metric is the Chebyshev pixel distance (periodic along the fiber
    axis) scaled by the pixel size; pass ``pixels=True`` for the raw pixel
    count.  Computed exactly by iterated unit dilations, which realizes the
    Chebyshev distance transform without leaving boolean arrays.
    """
    if not A.same_geometry(B):
        raise ValueError("masks must share their grid geometry")
    if not A.masks.any() or not B.masks.any():
        raise EmptySet("Hausdorff distance needs two non-empty masks")
    d = max(_directed_pixels(A.masks, B.masks), _directed_pixels(B.masks, A.masks))
    return float(d) if pixels else float(d) * A.pixel


# -- chains over periodic base orbits -------------------------------------------


@dataclass
class GoodChain:
    """Fiber maps along one periodic base orbit, with inversion certificates.

    ``coeffs[i]`` are the complex fiber-polynomial coefficients ``c_1..c_D``
    at base point ``i``; map ``i`` sends disc ``i`` (radius ``radii[i]``) into
    disc ``i+1 mod Q``.  Each map fixes the origin and is certified injective
    on the closed disc.
    """

    period: int
    base_points: np.ndarray
    coeffs: np.ndarray  # complex (Q, D)
    radii: np.ndarray
    derivative_moduli: np.ndarray
    injectivity_margins: np.ndarray
    inversion_radii: np.ndarray

    @property
    def identical_fibers(self):
        return bool(
            np.all(self.coeffs == self.coeffs[0])
            and np.all(self.radii == self.radii[0])
        )

    def gamma(self, i, z):
        cs = self.coeffs[i % self.period]
        acc = np.zeros_like(z)
        for k in range(len(cs) - 1, -1, -1):
            acc = acc * z + cs[k]
        return acc * z

    def gamma_deriv(self, i, z):
        cs = self.coeffs[i % self.period]
        acc = np.zeros_like(z)
        for k in range(len(cs) - 1, -1, -1):
            acc = acc * z + (k + 1) * cs[k]
        return acc


def _chain_certificates(coeff_rows, radii):
    Q, D = coeff_rows.shape
    margins = np.empty(Q)
    inversion = np.empty(Q)
    for i in range(Q):
        c = np.abs(coeff_rows[i])
        r = radii[i]
        lip_tail = sum((k + 1) * c[k] * r**k for k in range(1, D))
        sup_tail = sum(c[k] * r**k for k in range(1, D))
        margins[i] = c[0] - lip_tail
        inversion[i] = r * (c[0] - sup_tail)
        if margins[i] <= 0:
            raise CertificateFailure(
                f"chain fiber {i} fails the injectivity certificate "
                f"(margin {margins[i]:.3e} at radius {r:.3g})",
                bound=float(margins[i]),
            )
    return margins, inversion


def periodize(F, approximant, tube_radius, *, fejer_degree=None, theta0=0.0,
              degree_cutoff=4096):
    """Move the base rotation onto a rational and build the orbit chain.

    The modulus of the new linear coefficient is forced to one exactly: a
    zero-mean trigonometric smoothing of ``log |c_1|`` replaces the modulus,
    and the additive equation over the rational rotation (solvable because
    the reduced denominator exceeds the smoothing degree) rescales it away.
    Returns the rationalized map, the chain, and approximation data.
    """
    F._require_zero_section()
    if F.dim != 1:
        raise ValueError("chains are implemented for dim 1")
    kappa = F.multiplier()
    if abs(kappa - 1.0) > KAPPA_TOL:
        raise NotIndifferent(kappa)
    winding, _ = F.rotation_number(strict=False)
    if any(winding):
        raise ValueError(f"winding vector {winding} is not zero")
    if isinstance(approximant, Fraction):
        p, q = approximant.numerator, approximant.denominator
    else:
        p, q = (int(v) for v in approximant)
    if math.gcd(p, q) != 1:
        raise ValueError("approximant must be in lowest terms")
    N = int(fejer_degree) if fejer_degree is not None else min(64, q - 1)
    if N >= q:
        raise ValueError(
            f"denominator {q} must exceed the smoothing degree {N}"
        )
    tube_radius = float(tube_radius)
    if tube_radius > F.domain_radius:
        raise ValueError("tube radius exceeds the certified domain radius")

    c1 = F.coeffs[0]
    constant_c1 = c1.n_modes == 1 and c1.degree() == 0

    if constant_c1:
        # |c_1| is already the constant kappa = 1
        smoothing = TrigPoly.zero(1)
        new_c1 = c1
        solution = TrigPoly.zero(1)
        sup_rho_shift = 0.0
    else:
        def log_abs(pts):
            return np.log(np.abs(c1.evaluate(pts)))

        smoothing = fejer_approximation(log_abs, N, grid_size=4 * N, recenter=True)

        def unimod_values(M):
            vals = c1.values_on_grid(M)
            return vals / np.abs(vals) * np.exp(smoothing.values_on_grid(M).real)

        new_c1 = fit_refit(
            unimod_values, start=max(512, 8 * N), degree_cutoff=degree_cutoff,
            realflag=False,
        )
        sup_rho_shift = float(
            np.max(np.abs(new_c1.values_on_grid(1024) - c1.values_on_grid(1024)))
        )
        # gcd(p, q) = 1 and q > N, so every divisor e^{2 pi i m p/q} - 1
        # with 0 < |m| <= N is nonzero
        solution, _ = solve_cohomological(
            smoothing, [p / q], divisor_floor=min(1e-12, math.sin(math.pi / q))
        )

    F_rat = FiberedMap([p / q], [new_c1, *F.coeffs[1:]], F.domain_radius)
    if constant_c1:
        F_tilde = F_rat
        scale_vals = np.ones(q)
    else:
        F_tilde = conjugate_scaling(F_rat, solution, degree_cutoff=degree_cutoff)
        scale_vals = None  # filled below from the solution

    base_points = np.mod(theta0 + np.arange(q) * (p / q), 1.0)
    if scale_vals is None:
        scale_vals = np.exp(solution.evaluate(base_points).real)
    radii = tube_radius / scale_vals
    coeff_rows = np.stack(
        [c.evaluate(base_points) for c in F_tilde.coeffs], axis=1
    )
    rescale_residual = float(np.max(np.abs(np.abs(coeff_rows[:, 0]) - 1.0)))
    margins, inversion = _chain_certificates(coeff_rows, radii)
    chain = GoodChain(
        period=q,
        base_points=base_points,
        coeffs=coeff_rows,
        radii=radii,
        derivative_moduli=np.abs(coeff_rows[:, 0]),
        injectivity_margins=margins,
        inversion_radii=inversion,
    )
    data = {
        "p": p,
        "q": q,
        "fejer_degree": N,
        "alpha_shift": float(abs(F.alpha[0] - p / q)),
        "sup_rho_shift": sup_rho_shift,
        "rescale_residual": rescale_residual,
        "scaling_values": scale_vals,
    }
    return F_tilde, chain, data


# -- certified batched inversion -------------------------------------------------


def _invert_batch(cs, w, r_domain, inversion_radius, *, theta_label=None):
    """Preimages of ``w`` under ``z -> sum c_k z^k`` inside ``|z| <= r_domain``.

    Returns ``(z, ok)``; ``ok`` is False where no preimage exists in the
    certified disc (a genuine backward escape).  Quadratics are solved in
    closed form; higher degrees run batched Newton from ``w / c_1``.
    Failures inside the certified inversion radius abort with
    ``InverseBreakdown``.
    """
    cs = np.asarray(cs, dtype=complex)
    D = len(cs)
    w = np.asarray(w, dtype=complex)
    bound = r_domain * (1.0 + ESCAPE_SLACK)
    if D == 1:
        z = w / cs[0]
        return z, np.abs(z) <= bound
    if D == 2:
        # c2 z^2 + c1 z - w = 0, stable two-root form; keep the small root
        c1, c2 = cs[0], cs[1]
        disc = np.sqrt(c1 * c1 + 4.0 * c2 * w)
        # avoid cancellation: pick the sign that enlarges |c1 +/- disc|
        plus = c1 + disc
        minus = c1 - disc
        big = np.where(np.abs(plus) >= np.abs(minus), plus, minus)
        with np.errstate(divide="ignore", invalid="ignore"):
            z_small = np.where(big != 0, 2.0 * w / big, 0.0)
        ok = np.abs(z_small) <= bound
        return z_small, ok

    z = w / cs[0]
    ok = np.ones(w.shape, dtype=bool)
    for _ in range(60):
        f = np.zeros_like(z)
        for k in range(D - 1, -1, -1):
            f = f * z + cs[k]
        df = np.zeros_like(z)
        for k in range(D - 1, -1, -1):
            df = df * z + (k + 1) * cs[k]
        f = f * z
        resid = f - w
        if np.all(np.abs(resid) < NEWTON_TOL):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, resid / df, 0.0)
        z = z - step
        cap = 8 * r_domain
        z = np.clip(z.real, -cap, cap) + 1j * np.clip(z.imag, -cap, cap)
    f = np.zeros_like(z)
    for k in range(D - 1, -1, -1):
        f = f * z + cs[k]
    f = f * z
    converged = np.abs(f - w) < NEWTON_TOL
    certified = np.abs(w) <= inversion_radius
    broken = certified & ~converged
    if np.any(broken):
        raise InverseBreakdown(theta_label, complex(w[np.argmax(broken)]))
    ok = converged & (np.abs(z) <= bound)
    return z, ok


# -- escape-time masks -----------------------------------------------------------


def _threads():
    try:
        return max(1, int(os.environ.get("FHD_THREADS", "1")))
    except ValueError:
        return 1


def nonescaping_set(source, horizon, z_resolution, *, radius=None,
                    theta_count=None):
    """Mark pixel centers whose orbits stay in the tube both ways.

    ``source`` is a :class:`GoodChain` (fibers at its base points, per-fiber
    disc radii) or a :class:`FiberedMap` (``theta_count`` fibers, uniform
    ``radius``).  Backward orbits use certified fiber inversion; a missing
    certified preimage counts as escape, a breakdown inside the certified
    radius raises.  The origin pixel is always marked.
    """
    horizon = int(horizon)
    M = int(z_resolution)
    if isinstance(source, GoodChain):
        chain = source
        half_width = float(np.max(chain.radii))
        fibers = chain.period
        centers = _centers(half_width, M)

        def fiber_mask(i):
            return _chain_fiber_mask(chain, i, centers, horizon, half_width)

        if chain.identical_fibers:
            mask0 = fiber_mask(0)
            masks = np.broadcast_to(mask0, (fibers, M, M)).copy()
        else:
            masks = np.empty((fibers, M, M), dtype=bool)
            workers = _threads()
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    for i, m in enumerate(pool.map(fiber_mask, range(fibers))):
                        masks[i] = m
            else:
                for i in range(fibers):
                    masks[i] = fiber_mask(i)
        out = CompactSetApprox(half_width, masks)
    else:
        F = source
        F._require_zero_section()
        if F.dim != 1:
            raise ValueError("escape-time masks are implemented for dim 1")
        if radius is None or theta_count is None:
            raise ValueError("map sources need radius and theta_count")
        half_width = float(radius)
        fibers = int(theta_count)
        centers = _centers(half_width, M)
        thetas = np.arange(fibers) / fibers
        masks = np.empty((fibers, M, M), dtype=bool)
        theta_free = all(c.degree() == 0 for c in F.coeffs)
        for i in range(fibers):
            if theta_free and i > 0:
                masks[i] = masks[0]
                continue
            masks[i] = _map_fiber_mask(F, thetas[i], centers, horizon, half_width)
        out = CompactSetApprox(half_width, masks)
    _mark_zero_section(out)
    return out


def _centers(half_width, M):
    axis = -half_width + (np.arange(M) + 0.5) * (2.0 * half_width / M)
    return (axis[:, None] + 1j * axis[None, :]).ravel()


def _mark_zero_section(K):
    j = K.resolution // 2
    K.masks[:, j, j] = True


def _chain_fiber_mask(chain, i, centers, horizon, half_width):
    Q = chain.period
    r_i = chain.radii[i % Q]
    inside = np.abs(centers) <= r_i * (1.0 + ESCAPE_SLACK)
    # forward
    alive = inside.copy()
    Z = centers.copy()
    for t in range(horizon):
        src = (i + t) % Q
        dst = (i + t + 1) % Q
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        Z[idx] = chain.gamma(src, Z[idx])
        escaped = np.abs(Z[idx]) > chain.radii[dst] * (1.0 + ESCAPE_SLACK)
        alive[idx[escaped]] = False
    fwd = alive
    # backward
    alive = inside.copy()
    Z = centers.copy()
    for t in range(horizon):
        src = (i - 1 - t) % Q
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        z_new, ok = _invert_batch(
            chain.coeffs[src],
            Z[idx],
            chain.radii[src],
            chain.inversion_radii[src],
            theta_label=float(chain.base_points[src]),
        )
        Z[idx] = z_new
        alive[idx[~ok]] = False
    return (fwd & alive).reshape(
        int(math.isqrt(len(centers))), int(math.isqrt(len(centers)))
    )


def _map_fiber_mask(F, theta, centers, horizon, radius):
    bound = radius * (1.0 + ESCAPE_SLACK)
    inside = np.abs(centers) <= bound
    alive = inside.copy()
    Z = centers.copy()
    alpha = F.alpha[0]
    for t in range(horizon):
        th = (theta + t * alpha) % 1.0
        cs = np.array([complex(c.evaluate(th)) for c in F.coeffs])
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        acc = np.zeros_like(Z[idx])
        for k in range(len(cs) - 1, -1, -1):
            acc = acc * Z[idx] + cs[k]
        Z[idx] = acc * Z[idx]
        alive[idx[np.abs(Z[idx]) > bound]] = False
    fwd = alive
    alive = inside.copy()
    Z = centers.copy()
    for t in range(horizon):
        th = (theta - (t + 1) * alpha) % 1.0
        cs = np.array([complex(c.evaluate(th)) for c in F.coeffs])
        idx = np.flatnonzero(alive)
        if not idx.size:
            break
        inv_radius = F.inversion_radius
        z_new, ok = _invert_batch(cs, Z[idx], radius, inv_radius, theta_label=th)
        Z[idx] = z_new
        alive[idx[~ok]] = False
    M = int(math.isqrt(len(centers)))
    return (fwd & alive).reshape(M, M)


# -- mapping masks through the dynamics ------------------------------------------


def map_mask(F, K, *, inverse=False):
    """Pull-back rasterization of ``F(K)`` or ``F^{-1}(K)`` on K's grid.

    A pixel of the image mask is marked iff its center's preimage (for
    ``F(K)``) or image (for ``F^{-1}(K)``) lands in a marked pixel of the
    matching source fiber.  Pull-back sampling leaves no rasterization
    holes.
    """
    F._require_zero_section()
    M = K.resolution
    fibers = K.fibers
    centers = _centers(K.half_width, M)
    alpha = F.alpha[0]
    shift = int(round(alpha * fibers))
    out = np.zeros_like(K.masks)
    theta_free = all(c.degree() == 0 for c in F.coeffs)
    cache = {}
    for j in range(fibers):
        if inverse:
            # (theta_j, z) in F^{-1}(K)  iff  f_{theta_j}(z) in K_{theta_j + alpha}
            src = (j + shift) % fibers
            th = j / fibers
            key = None if not theta_free else "fwd"
            if key in cache:
                w = cache[key]
            else:
                cs = np.array([complex(c.evaluate(th)) for c in F.coeffs])
                acc = np.zeros_like(centers)
                for k in range(len(cs) - 1, -1, -1):
                    acc = acc * centers + cs[k]
                w = acc * centers
                if key is not None:
                    cache[key] = w
            ix, iy, okf = _rasterize_index(w, K.half_width, M)
            marked = np.zeros(len(centers), dtype=bool)
            sel = okf
            marked[sel] = K.masks[src][ix[sel], iy[sel]]
            out[j] = marked.reshape(M, M)
        else:
            # (theta_j, z) in F(K)  iff  f^{-1}_{theta_j - alpha}(z) in K_{theta_j - alpha}
            src = (j - shift) % fibers
            th = (j / fibers - alpha) % 1.0
            key = None if not theta_free else "bwd"
            if key in cache:
                z_pre, okb = cache[key]
            else:
                cs = np.array([complex(c.evaluate(th)) for c in F.coeffs])
                z_pre, okb = _invert_batch(
                    cs, centers, F.domain_radius, F.inversion_radius,
                    theta_label=th,
                )
                if key is not None:
                    cache[key] = (z_pre, okb)
            ix, iy, okr = _rasterize_index(z_pre, K.half_width, M)
            sel = okb & okr
            marked = np.zeros(len(centers), dtype=bool)
            marked[sel] = K.masks[src][ix[sel], iy[sel]]
            out[j] = marked.reshape(M, M)
    return CompactSetApprox(K.half_width, out)


# -- the full pipeline -----------------------------------------------------------


@dataclass(frozen=True)
class ContinuumSchedule:
    """Approximation ladder: how many rational levels, the smoothing degree,
    the escape horizon, and the stabilization threshold between the last two
    levels (in coarse pixels)."""

    levels: int = 2
    fejer_degree: int = 32
    horizon: int = 200
    min_denominator: int | None = None
    stabilization_pixels: float = 2.0


@dataclass
class ContinuumReport:
    """Final mask with its verification block."""

    mask: CompactSetApprox
    tube_radius: float
    theta_resolution: int
    z_resolution: int
    levels: list
    stabilization_drift: float
    dh_forward_pixels: float
    dh_backward_pixels: float
    boundary_contact: float
    boundary_contact_raw: float
    zero_section_included: bool
    fiber_pixel_counts: np.ndarray
    fiber_components: np.ndarray

    def to_obj(self):
        return {
            "tube_radius": self.tube_radius,
            "theta_resolution": self.theta_resolution,
            "z_resolution": self.z_resolution,
            "levels": self.levels,
            "stabilization_drift_pixels": self.stabilization_drift,
            "dh_forward_pixels": self.dh_forward_pixels,
            "dh_backward_pixels": self.dh_backward_pixels,
            "boundary_contact": self.boundary_contact,
            "boundary_contact_raw": self.boundary_contact_raw,
            "zero_section_included": self.zero_section_included,
            "fiber_pixel_counts": [int(v) for v in self.fiber_pixel_counts],
            "fiber_components": [int(v) for v in self.fiber_components],
        }


def continuum_approx(F, tube_radius, schedule=None, *, theta_resolution=256,
                     z_resolution=128, theta0=0.0):
    """Approximate the completely invariant set containing the section.

    Pipeline: prime-denominator approximants of the base rotation ->
    periodic chain with unit modulus -> bidirectional escape-time masks ->
    hole filling -> map back through the rescaling -> union with the zero
    section.  The report carries the numerical verification block: section
    containment, invariance drift in pixels both ways, distance to the tube
    boundary, and per-fiber connectivity and pixel counts.
    """
    schedule = schedule or ContinuumSchedule()
    F._require_zero_section()
    if F.dim != 1:
        raise ValueError("the continuum pipeline is implemented for dim 1")
    kappa = F.multiplier()
    if abs(kappa - 1.0) > KAPPA_TOL:
        raise NotIndifferent(kappa)
    tube_radius = float(tube_radius)
    if tube_radius >= F.domain_radius:
        raise ValueError(
            "tube must sit strictly inside the certified domain so the map "
            "and its fiber inverses extend past its closure"
        )

    min_q = schedule.min_denominator or theta_resolution
    bound = max(schedule.fejer_degree, min_q - 1)
    approx = prime_denominator_approximants(F.alpha, bound, schedule.levels)
    level_masks = []
    level_data = []
    for entry in approx.entries:
        p, q, _ = entry[0]
        F_tilde, chain, data = periodize(
            F, (p, q), tube_radius, fejer_degree=schedule.fejer_degree,
            theta0=theta0,
        )
        raw = nonescaping_set(chain, schedule.horizon, z_resolution)
        filled = fill_fibers(raw)
        K = _assemble_final(
            filled, chain, data["scaling_values"], tube_radius,
            theta_resolution, z_resolution,
        )
        level_masks.append(K)
        level_data.append(
            {
                "p": p,
                "q": q,
                "alpha_shift": data["alpha_shift"],
                "sup_rho_shift": data["sup_rho_shift"],
                "rescale_residual": data["rescale_residual"],
            }
        )
    drift = 0.0
    if len(level_masks) >= 2:
        drift = hausdorff_distance(level_masks[-1], level_masks[-2], pixels=True)
        if drift > schedule.stabilization_pixels:
            raise ScheduleExhausted(drift, schedule.stabilization_pixels)
    K = level_masks[-1]

    FK = map_mask(F, K)
    FKinv = map_mask(F, K, inverse=True)
    # invariance measured against the zero-section-augmented image masks
    _mark_zero_section(FK)
    _mark_zero_section(FKinv)
    dh_fwd = hausdorff_distance(FK, K, pixels=True)
    dh_bwd = hausdorff_distance(FKinv, K, pixels=True)

    centers = _centers(K.half_width, K.resolution).reshape(
        K.resolution, K.resolution
    )
    dist = tube_radius - np.abs(centers)
    marked_any = K.masks.any(axis=0)
    contact_raw = float(np.min(dist[marked_any]))
    half_diag = K.pixel * math.sqrt(2.0) / 2.0
    contact = max(0.0, contact_raw - half_diag)

    j0 = K.resolution // 2
    zero_ok = bool(np.all(K.masks[:, j0, j0]))
    return ContinuumReport(
        mask=K,
        tube_radius=tube_radius,
        theta_resolution=theta_resolution,
        z_resolution=z_resolution,
        levels=level_data,
        stabilization_drift=drift,
        dh_forward_pixels=dh_fwd,
        dh_backward_pixels=dh_bwd,
        boundary_contact=contact,
        boundary_contact_raw=contact_raw,
        zero_section_included=zero_ok,
        fiber_pixel_counts=K.pixel_counts(),
        fiber_components=K.component_counts(),
    )


def _assemble_final(filled, chain, scale_vals, tube_radius, theta_resolution,
                    z_resolution):
    """Scale chain masks back through the rescaling and bin them onto the
    output fiber grid (pull-back sampling per pixel)."""
    M = int(z_resolution)
    out = np.zeros((theta_resolution, M, M), dtype=bool)
    centers = _centers(tube_radius, M)
    hw_chain = filled.half_width
    Mc = filled.resolution
    for i in range(chain.period):
        bin_idx = int(round(chain.base_points[i] * theta_resolution)) % theta_resolution
        scaled = centers / scale_vals[i]
        ix, iy, ok = _rasterize_index(scaled, hw_chain, Mc)
        marked = np.zeros(len(centers), dtype=bool)
        marked[ok] = filled.masks[i][ix[ok], iy[ok]]
        out[bin_idx] |= marked.reshape(M, M)
    K = CompactSetApprox(tube_radius, out)
    _mark_zero_section(K)
    return K
