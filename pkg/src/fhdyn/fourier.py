"""Fourier algebra on the torus.

Sparse trigonometric sums with complex amplitudes are the common coin of the
package: fiber coefficients, rescalings and cohomological solutions are all
finite mode sets.  Values are immutable, operations are pure, and summation
order is fixed (lexicographic in the mode vector) so results do not depend
on how a computation is partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteSample, NonZeroMean, SmallDivisorError

TWO_PI = 2.0 * math.pi

_EVAL_CHUNK = 1 << 16


def _as_mode(n, dim):
    if np.isscalar(n):
        n = (n,)
    mode = tuple(int(v) for v in n)
    if len(mode) != dim:
        raise ValueError(f"mode {mode} does not match dim {dim}")
    return mode


def _neg(mode):
    return tuple(-v for v in mode)


class TrigPoly:
    """Finite sum ``p(theta) = sum_n a(n) exp(2 pi i n . theta)`` on T^d.

    ``realflag`` asserts exact conjugate symmetry ``a(-n) == conj(a(n))``;
    it is checked at construction and maintained exactly by the arithmetic.
    Zero amplitudes are pruned so the stored support is minimal.
    """

    __slots__ = ("dim", "realflag", "_ns", "_amps")

    def __init__(self, dim, modes, realflag=False):
        dim = int(dim)
        if dim < 1:
            raise ValueError("dim must be >= 1")
        cleaned = {}
        for n, a in modes.items():
            a = complex(a)
            if a != 0:
                cleaned[_as_mode(n, dim)] = a
        if realflag:
            for n, a in cleaned.items():
                partner = cleaned.get(_neg(n))
                if partner is None or partner != a.conjugate():
                    raise ValueError(
                        f"realflag set but mode {n} lacks exact conjugate partner"
                    )
        order = sorted(cleaned)
        self.dim = dim
        self.realflag = bool(realflag)
        self._ns = np.array(order, dtype=np.int64).reshape(len(order), dim)
        self._amps = np.array([cleaned[n] for n in order], dtype=np.complex128)

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, dim=1):
        return cls(dim, {}, realflag=True)

    @classmethod
    def constant(cls, value, dim=1):
        value = complex(value)
        return cls(dim, {(0,) * dim: value}, realflag=(value.imag == 0.0))

    @classmethod
    def cosine(cls, freq, amplitude=1.0, dim=1):
        """``amplitude * cos(2 pi freq . theta)`` as a real mode pair."""
        n = _as_mode(freq, dim)
        a = complex(amplitude) / 2.0
        if a.imag != 0.0:
            raise ValueError("cosine amplitude must be real")
        return cls(dim, {n: a, _neg(n): a.conjugate()}, realflag=True)

    @classmethod
    def from_records(cls, records, dim=None, realflag=None):
        """Build from JSON-style records ``[{"n": [...], "re": x, "im": y}]``."""
        modes = {}
        for rec in records:
            n = tuple(int(v) for v in rec["n"])
            if dim is None:
                dim = len(n)
            modes[n] = complex(float(rec["re"]), float(rec["im"]))
        if dim is None:
            dim = 1
        if realflag is None:
            sym = all(
                modes.get(_neg(n)) == a.conjugate() for n, a in modes.items()
            )
            realflag = sym and bool(modes)
        return cls(dim, modes, realflag=realflag)

    @classmethod
    def fit_grid(cls, values, *, max_degree=None, prune_rel=1e-15, realflag=None):
        """Recover modes from uniform samples by discrete Fourier analysis.

        ``values`` has shape (M,)*d; modes with any index at the Nyquist bin
        are dropped, so the fit is alias-free for degrees < M/2.
        """
        values = np.asarray(values)
        dim = values.ndim
        M = values.shape[0]
        if any(s != M for s in values.shape):
            raise ValueError("grid must be uniform per dimension")
        coeffs = np.fft.fftn(values) / values.size
        half = M // 2 - 1 if M % 2 == 0 else (M - 1) // 2
        if max_degree is not None:
            half = min(half, int(max_degree))
        total = float(np.sum(np.abs(coeffs)))
        floor = prune_rel * total
        modes = {}
        # visit only surviving bins; map FFT index k to the signed mode k or k-M
        for flat in np.flatnonzero(np.abs(coeffs) > floor):
            idx = np.unravel_index(flat, coeffs.shape)
            mode = tuple(int(v) if v <= M // 2 else int(v) - M for v in idx)
            if max(abs(v) for v in mode) > half:
                continue
            modes[mode] = complex(coeffs[idx])
        if realflag is None:
            scale = float(np.max(np.abs(values))) if values.size else 0.0
            realflag = bool(
                np.max(np.abs(values.imag)) <= 1e-12 * (scale + 1.0)
            ) if np.iscomplexobj(values) else True
        if realflag:
            modes = _symmetrized(modes)
        return cls(dim, modes, realflag=realflag)

    # -- basic queries ------------------------------------------------------

    @property
    def modes(self):
        return {
            tuple(int(v) for v in n): complex(a)
            for n, a in zip(self._ns, self._amps)
        }

    @property
    def n_modes(self):
        return len(self._amps)

    @property
    def mean(self):
        idx = np.where((self._ns == 0).all(axis=1))[0]
        return complex(self._amps[idx[0]]) if idx.size else 0j

    def degree(self):
        """Sup-norm of the mode support, 0 for the empty sum."""
        if not len(self._ns):
            return 0
        return int(np.max(np.abs(self._ns)))

    def mass(self):
        """Sum of amplitude magnitudes (an upper bound for the sup norm)."""
        return float(np.sum(np.abs(self._amps)))

    def amplitude(self, n):
        return self.modes.get(_as_mode(n, self.dim), 0j)

    def to_records(self):
        return [
            {"n": [int(v) for v in n], "re": float(a.real), "im": float(a.imag)}
            for n, a in zip(self._ns, self._amps)
        ]

    def __repr__(self):
        return (
            f"TrigPoly(dim={self.dim}, n_modes={self.n_modes}, "
            f"degree={self.degree()}, realflag={self.realflag})"
        )

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, theta):
        """Evaluate at ``theta`` (scalar, (d,), or batched (..., d))."""
        th = np.asarray(theta, dtype=float)
        scalar = False
        if self.dim == 1:
            scalar = th.ndim == 0
            pts = th.reshape(-1, 1)
            out_shape = th.shape
        else:
            if th.shape == (self.dim,):
                scalar = True
                pts = th.reshape(1, self.dim)
                out_shape = ()
            else:
                if th.shape[-1] != self.dim:
                    raise ValueError("trailing axis must match dim")
                pts = th.reshape(-1, self.dim)
                out_shape = th.shape[:-1]
        out = np.zeros(len(pts), dtype=np.complex128)
        if len(self._amps):
            nsT = self._ns.T.astype(float)
            for lo in range(0, len(pts), _EVAL_CHUNK):
                block = pts[lo : lo + _EVAL_CHUNK]
                phase = block @ nsT
                # row-wise pairwise sum: same reduction tree for any batch
                terms = np.exp(TWO_PI * 1j * phase) * self._amps
                out[lo : lo + len(block)] = terms.sum(axis=-1)
        out = out.reshape(out_shape)
        return complex(out) if scalar else out

    def values_on_grid(self, M):
        """Values on the uniform grid ``(j/M)_{j<M}`` per dimension.

        Uses an inverse FFT when alias-free (M > 2*degree), otherwise falls
        back to direct evaluation.
        """
        M = int(M)
        if M <= 2 * self.degree():
            pts = grid_points(M, self.dim)
            return self.evaluate(pts)
        spec = np.zeros((M,) * self.dim, dtype=np.complex128)
        for n, a in zip(self._ns, self._amps):
            spec[tuple(int(v) % M for v in n)] = a
        return np.fft.ifftn(spec) * (M**self.dim)

    # -- algebra ------------------------------------------------------------

    def _binary(self, other, sign):
        if isinstance(other, TrigPoly):
            if other.dim != self.dim:
                raise ValueError("dim mismatch")
            out = self.modes
            for n, a in other.modes.items():
                out[n] = out.get(n, 0j) + sign * a
            return TrigPoly(self.dim, out, realflag=self.realflag and other.realflag)
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return TrigPoly(
            self.dim,
            {n: -a for n, a in self.modes.items()},
            realflag=self.realflag,
        )

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            if other.dim != self.dim:
                raise ValueError("dim mismatch")
            out = {}
            for n1, a1 in self.modes.items():
                for n2, a2 in other.modes.items():
                    key = tuple(x + y for x, y in zip(n1, n2))
                    out[key] = out.get(key, 0j) + a1 * a2
            real = self.realflag and other.realflag
            if real:
                out = _symmetrized(out)
            return TrigPoly(self.dim, out, realflag=real)
        scalar = complex(other)
        return TrigPoly(
            self.dim,
            {n: a * scalar for n, a in self.modes.items()},
            realflag=self.realflag and scalar.imag == 0.0,
        )

    def __rmul__(self, other):
        return self.__mul__(other)

    def conjugate(self):
        return TrigPoly(
            self.dim,
            {_neg(n): a.conjugate() for n, a in self.modes.items()},
            realflag=self.realflag,
        )

    def rotate(self, alpha):
        """Return ``theta -> p(theta + alpha)``.

        In the symmetric case the factors for ``n`` and ``-n`` are exact
        conjugates so the realflag survives bit-exactly.
        """
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.shape != (self.dim,):
            raise ValueError("alpha must have one component per dimension")
        out = {}
        if not self.realflag:
            for n, a in self.modes.items():
                factor = complex(np.exp(TWO_PI * 1j * float(np.dot(n, alpha))))
                out[n] = a * factor
            return TrigPoly(self.dim, out, realflag=False)
        for n, a in self.modes.items():
            m = _neg(n)
            if m < n:
                continue
            factor = complex(np.exp(TWO_PI * 1j * float(np.dot(n, alpha))))
            out[n] = a * factor
            if m != n:
                out[m] = (a * factor).conjugate()
        return TrigPoly(self.dim, out, realflag=True)

    def sub_mean(self):
        out = self.modes
        out.pop((0,) * self.dim, None)
        return TrigPoly(self.dim, out, realflag=self.realflag)

    def prune(self, floor):
        out = {n: a for n, a in self.modes.items() if abs(a) > floor}
        return TrigPoly(self.dim, out, realflag=self.realflag)


def _symmetrized(modes):
    """Enforce exact conjugate symmetry, averaging rounding noise."""
    out = {}
    for n in modes:
        m = _neg(n)
        if m < n:
            continue
        a = modes.get(n, 0j)
        b = modes.get(m, 0j)
        s = 0.5 * (a + b.conjugate())
        if n == m:
            out[n] = complex(s.real, 0.0)
        else:
            out[n] = s
            out[m] = s.conjugate()
    return out


class OrbitEvaluator:
    """Streams ``p(theta + n alpha)`` for ``n = 0, 1, 2, ...``.

    Phase factors advance by one complex multiplication per mode and step,
    avoiding the exponential per evaluation; the phase drift after ``n``
    steps is O(n * eps), negligible at desk horizons.
    """

    def __init__(self, poly, thetas, alpha):
        thetas = np.asarray(thetas, dtype=float)
        if poly.dim == 1:
            pts = thetas.reshape(-1, 1)
        else:
            pts = thetas.reshape(-1, poly.dim)
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        ns = poly._ns.astype(float)
        self._amps = poly._amps
        self._E = np.exp(TWO_PI * 1j * (pts @ ns.T))  # (P, N)
        self._R = np.exp(TWO_PI * 1j * (ns @ alpha))  # (N,)

    def next_values(self):
        vals = self._E @ self._amps
        self._E *= self._R
        return vals


# -- grids and quadrature ----------------------------------------------------


def grid_points(M, dim=1):
    """Uniform grid: shape (M,) for d=1, else (M, ..., M, d)."""
    axis = np.arange(M, dtype=float) / M
    if dim == 1:
        return axis
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1)


def stable_grid_mean(sample_fn, *, start=256, tol=1e-10, max_size=1 << 20):
    """Riemann mean with resolution doubling until two values agree.

    ``sample_fn(M)`` must return the sampled values on the uniform M-grid.
    Returns ``(mean, M)`` for the first stable resolution.
    """
    M = int(start)
    prev = complex(np.mean(sample_fn(M)))
    while 2 * M <= max_size:
        M *= 2
        cur = complex(np.mean(sample_fn(M)))
        if abs(cur - prev) < tol:
            return cur, M
        prev = cur
    return prev, M


# -- Fejer approximation -----------------------------------------------------


def fejer_approximation(sampler, degree, *, dim=1, grid_size=None, recenter=False):
    """Cesaro-averaged trigonometric approximant of degree < ``degree``.

    ``sampler`` maps grid points (shape (M,) for d=1, (..., d) otherwise) to
    complex values.  The grid must resolve at least ``4 * degree`` points per
    dimension.  With ``recenter`` the mean mode is dropped.
    """
    N = int(degree)
    if N < 1:
        raise ValueError("degree must be >= 1")
    M = int(grid_size) if grid_size is not None else 4 * N
    if M < 4 * N:
        raise ValueError("grid resolution must be >= 4 * degree per dimension")
    pts = grid_points(M, dim)
    values = np.asarray(sampler(pts), dtype=np.complex128)
    if values.shape != (M,) * dim:
        raise ValueError("sampler must return one value per grid point")
    if not np.all(np.isfinite(values)):
        raise NonFiniteSample("sampler returned a non-finite value")
    coeffs = np.fft.fftn(values) / values.size
    total = float(np.sum(np.abs(coeffs)))
    floor = 1e-15 * total
    modes = {}
    for idx in np.ndindex(*([2 * N - 1] * dim)):
        mode = tuple(v - (N - 1) for v in idx)
        weight = 1.0
        for v in mode:
            weight *= 1.0 - abs(v) / N
        a = weight * complex(coeffs[tuple(v % M for v in mode)])
        if abs(a) > floor:
            modes[mode] = a
    is_real = bool(np.max(np.abs(values.imag)) <= 1e-12 * (total + 1.0))
    if is_real:
        modes = _symmetrized(modes)
    poly = TrigPoly(dim, modes, realflag=is_real)
    if recenter:
        poly = poly.sub_mean()
    return poly


# -- cohomological solver ----------------------------------------------------


@dataclass(frozen=True)
class SmallDivisorReport:
    """Per-mode divisor log of a cohomological or homological solve.

    ``records`` holds ``(mode, divisor magnitude, amplification)`` tuples in
    lexicographic mode order; ``dropped`` lists exactly the modes whose
    divisor fell below ``floor``.
    """

    records: tuple
    min_divisor: float
    dropped: tuple
    floor: float
    residual: float | None = None
    residual_bound: float | None = None

    @property
    def worst_mode(self):
        if not self.records:
            return None
        return min(self.records, key=lambda r: r[1])[0]

    def to_obj(self):
        return {
            "records": [
                {"n": list(n), "divisor": d, "amplification": a}
                for n, d, a in self.records
            ],
            "min_divisor": self.min_divisor,
            "dropped": [list(n) for n in self.dropped],
            "floor": self.floor,
            "residual": self.residual,
            "residual_bound": self.residual_bound,
        }


def solve_cohomological(g, alpha, divisor_floor=1e-8, *, mean_tol=1e-12):
    """Solve ``u(theta + alpha) - u(theta) = g(theta)`` in Fourier modes.

    Returns the zero-mean solution ``u`` with ``u_hat(n) = g_hat(n) /
    (exp(2 pi i n.alpha) - 1)`` together with the divisor report.  Raises
    ``NonZeroMean`` when ``|g_hat(0)| >= mean_tol`` and ``SmallDivisorError``
    when any required divisor magnitude is below ``divisor_floor`` (the
    solution is never silently truncated).
    """
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (g.dim,):
        raise ValueError("alpha must have one component per dimension")
    mean = g.mean
    if abs(mean) >= mean_tol:
        raise NonZeroMean(mean)

    records = []
    offenders = []
    divisors = {}
    for n in sorted(g.modes):
        if all(v == 0 for v in n):
            continue
        div = complex(np.exp(TWO_PI * 1j * float(np.dot(n, alpha)))) - 1.0
        mag = abs(div)
        records.append((n, mag, 1.0 / mag if mag > 0 else math.inf))
        divisors[n] = div
        if mag < divisor_floor:
            offenders.append(n)
    min_div = min((r[1] for r in records), default=math.inf)
    if offenders:
        report = SmallDivisorReport(
            tuple(records), min_div, tuple(offenders), divisor_floor
        )
        raise SmallDivisorError(
            (offenders[0], None), report_divisor(records, offenders[0]),
            divisor_floor, report,
        )

    out = {}
    g_modes = g.modes
    for n in sorted(divisors):
        m = _neg(n)
        if g.realflag and m < n:
            continue
        val = g_modes[n] / divisors[n]
        out[n] = val
        if g.realflag and m != n:
            out[m] = val.conjugate()
    u = TrigPoly(g.dim, out, realflag=g.realflag)

    # residual certificate on a grid at least 4x the degree
    M = 1
    while M < max(64, 4 * (g.degree() + 1)):
        M *= 2
    res_vals = u.rotate(alpha).values_on_grid(M) - u.values_on_grid(M) - g.values_on_grid(M)
    residual = float(np.max(np.abs(res_vals))) if res_vals.size else 0.0
    report = SmallDivisorReport(
        tuple(records),
        min_div,
        (),
        divisor_floor,
        residual=residual,
        residual_bound=1e-10 * u.mass(),
    )
    return u, report


def report_divisor(records, mode):
    for n, d, _ in records:
        if n == mode:
            return d
    return math.nan
