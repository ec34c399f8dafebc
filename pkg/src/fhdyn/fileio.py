"""File formats: map files, coefficient records, reports, CSV and rasters.

JSON reports are rendered with a fixed float format (17 significant digits)
and stable key order so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .fourier import TrigPoly
from .maps import FiberedMap


# -- deterministic JSON ----------------------------------------------------------


def _render(obj, out):
    if obj is None:
        out.write("null")
    elif obj is True:
        out.write("true")
    elif obj is False:
        out.write("false")
    elif isinstance(obj, (int, np.integer)):
        out.write(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.write(format_float(float(obj)))
    elif isinstance(obj, str):
        out.write(json.dumps(obj))
    elif isinstance(obj, dict):
        out.write("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.write(",")
            out.write(json.dumps(str(k)))
            out.write(":")
            _render(v, out)
        out.write("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.write("[")
        for i, v in enumerate(seq):
            if i:
                out.write(",")
            _render(v, out)
        out.write("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def format_float(x):
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite value in a report")
    return f"{x:.17g}"


def dumps_deterministic(obj):
    out = io.StringIO()
    _render(obj, out)
    return out.getvalue()


def write_json(path, obj):
    Path(path).write_text(dumps_deterministic(obj) + "\n", encoding="ascii")


# -- trig polynomials and map files ----------------------------------------------


def trigpoly_from_obj(obj, path, dim=None):
    if not isinstance(obj, list):
        raise SchemaError(path, "expected a list of mode records")
    records = []
    for i, rec in enumerate(obj):
        here = f"{path}[{i}]"
        if not isinstance(rec, dict):
            raise SchemaError(here, "expected an object")
        extra = set(rec) - {"n", "re", "im"}
        if extra:
            raise SchemaError(here, f"unknown keys {sorted(extra)}")
        for key in ("n", "re", "im"):
            if key not in rec:
                raise SchemaError(f"{here}.{key}", "missing")
        if not isinstance(rec["n"], list) or not all(
            isinstance(v, int) for v in rec["n"]
        ):
            raise SchemaError(f"{here}.n", "expected a list of integers")
        if dim is not None and len(rec["n"]) != dim:
            raise SchemaError(f"{here}.n", f"expected {dim} components")
        for key in ("re", "im"):
            if not isinstance(rec[key], (int, float)):
                raise SchemaError(f"{here}.{key}", "expected a number")
        records.append(rec)
    try:
        return TrigPoly.from_records(records, dim=dim)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from exc


def map_from_obj(obj, path="$"):
    """Validate and build a map from its JSON object.

    Type invariants (non-vanishing derivative, injectivity certificate) are
    checked by the constructor; violations surface as CertificateFailure.
    """
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    allowed = {"dim", "alpha", "domain_radius", "coeffs", "constant"}
    extra = set(obj) - allowed
    if extra:
        raise SchemaError(path, f"unknown keys {sorted(extra)}")
    for key in ("dim", "alpha", "domain_radius", "coeffs"):
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing")
    dim = obj["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise SchemaError(f"{path}.dim", "expected a positive integer")
    alpha = obj["alpha"]
    if (
        not isinstance(alpha, list)
        or len(alpha) != dim
        or not all(isinstance(v, (int, float)) for v in alpha)
    ):
        raise SchemaError(f"{path}.alpha", f"expected {dim} numbers")
    radius = obj["domain_radius"]
    if not isinstance(radius, (int, float)) or radius <= 0:
        raise SchemaError(f"{path}.domain_radius", "expected a positive number")
    coeffs_obj = obj["coeffs"]
    if not isinstance(coeffs_obj, list) or not coeffs_obj:
        raise SchemaError(f"{path}.coeffs", "expected a non-empty list")
    coeffs = [
        trigpoly_from_obj(c, f"{path}.coeffs[{k}]", dim=dim)
        for k, c in enumerate(coeffs_obj)
    ]
    constant = None
    if "constant" in obj:
        constant = trigpoly_from_obj(obj["constant"], f"{path}.constant", dim=dim)
    return FiberedMap(alpha, coeffs, radius, constant=constant)


def parse_map_file(path):
    """Load a map file, checking the schema and all type invariants."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    return map_from_obj(obj)


def save_map(path, F):
    write_json(path, F.to_obj())


# -- CSV ---------------------------------------------------------------------------


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    format_float(v) if isinstance(v, float) else v
                    for v in row
                ]
            )


# -- rasters -----------------------------------------------------------------------


def write_pgm(path, mask):
    """Binary PGM (P5), marked pixels white."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    data = (mask.astype(np.uint8) * 255).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data)


def write_ppm(path, rgb):
    """Binary PPM (P6) from an (h, w, 3) uint8 array."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def mask_stack_to_pgms(out_dir, stem, K):
    """One PGM per fiber plus an index JSON with the grid geometry."""
    out_dir = Path(out_dir)
    paths = []
    for i in range(K.fibers):
        p = out_dir / f"{stem}_fiber{i:04d}.pgm"
        write_pgm(p, K.masks[i])
        paths.append(p.name)
    index = {
        "fibers": K.fibers,
        "resolution": K.resolution,
        "half_width": K.half_width,
        "pixel": K.pixel,
        "files": paths,
    }
    write_json(out_dir / f"{stem}_index.json", index)
    return index


def composite_ppm(path, K):
    """Radial-profile composite: rows are |z| bins, columns are fibers."""
    M = K.resolution
    centers = K.centers()
    radii = np.abs(centers)
    n_bins = M // 2
    edges = np.linspace(0.0, K.half_width, n_bins + 1)
    bins = np.clip(np.digitize(radii, edges) - 1, 0, n_bins - 1)
    profile = np.zeros((n_bins, K.fibers), dtype=bool)
    for i in range(K.fibers):
        marked = K.masks[i]
        if marked.any():
            hit = np.bincount(bins[marked].ravel(), minlength=n_bins) > 0
            profile[:, i] = hit
    img = np.where(profile[::-1, :, None], 255, 32).astype(np.uint8)
    img = np.repeat(img, 3, axis=2)
    write_ppm(path, img)


# -- run configuration --------------------------------------------------------------

COMMANDS = (
    "characteristics",
    "cohom",
    "koenigs",
    "siegel",
    "birkhoff",
    "probe",
    "furstenberg",
    "diophantine",
    "approximants",
    "continuum",
)

_COMMON_KEYS = {"command", "input_map", "out_dir", "seed", "params"}

PARAM_KEYS = {
    "characteristics": set(),
    "cohom": {"g", "alpha", "divisor_floor"},
    "koenigs": {"r", "tol", "max_n", "theta_nodes", "z_nodes", "rescale_eps"},
    "siegel": {"order", "divisor_floor", "degree_cutoff"},
    "birkhoff": {"theta", "n", "scan_grid"},
    "probe": {"r", "n", "grid"},
    "furstenberg": {
        "omega",
        "quotients",
        "levels",
        "exponent",
        "divergence_factor",
        "probe_radius",
        "probe_steps",
    },
    "diophantine": {"alpha", "beta", "c", "tau", "range"},
    "approximants": {"alpha", "degree_bound", "count", "cap"},
    "continuum": {
        "r",
        "levels",
        "fejer_degree",
        "horizon",
        "min_denominator",
        "stabilization_pixels",
        "theta_resolution",
        "z_resolution",
    },
}

_TOLERANCE_KEYS = {
    "tol",
    "divisor_floor",
    "rescale_eps",
    "stabilization_pixels",
    "exponent",
    "divergence_factor",
}
_POW2_KEYS = {"theta_nodes", "z_nodes", "theta_resolution", "z_resolution"}


class RunConfig:
    """Validated run description: command, input, parameters, output dir.

    Unknown keys are rejected, tolerances must be positive, and grid
    resolutions must be powers of two.  The canonical hash names every
    artifact the run produces.
    """

    def __init__(self, obj, path="$"):
        if not isinstance(obj, dict):
            raise SchemaError(path, "expected an object")
        extra = set(obj) - _COMMON_KEYS
        if extra:
            raise SchemaError(path, f"unknown keys {sorted(extra)}")
        command = obj.get("command")
        if command not in COMMANDS:
            raise SchemaError(
                f"{path}.command", f"expected one of {', '.join(COMMANDS)}"
            )
        self.command = command
        self.input_map = obj.get("input_map")
        if self.input_map is not None and not isinstance(self.input_map, str):
            raise SchemaError(f"{path}.input_map", "expected a string path")
        self.out_dir = obj.get("out_dir", "out")
        if not isinstance(self.out_dir, str):
            raise SchemaError(f"{path}.out_dir", "expected a string path")
        self.seed = obj.get("seed", 0)
        if not isinstance(self.seed, int):
            raise SchemaError(f"{path}.seed", "expected an integer")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise SchemaError(f"{path}.params", "expected an object")
        allowed = PARAM_KEYS[command]
        extra = set(params) - allowed
        if extra:
            raise SchemaError(
                f"{path}.params", f"unknown keys {sorted(extra)} for {command}"
            )
        for key, value in params.items():
            if key in _TOLERANCE_KEYS and not (
                isinstance(value, (int, float)) and value > 0
            ):
                raise SchemaError(f"{path}.params.{key}", "must be positive")
            if key in _POW2_KEYS:
                if not (
                    isinstance(value, int) and value > 0 and value & (value - 1) == 0
                ):
                    raise SchemaError(
                        f"{path}.params.{key}", "must be a power of two"
                    )
        self.params = params

    def to_obj(self):
        return {
            "command": self.command,
            "input_map": self.input_map,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "params": {k: self.params[k] for k in sorted(self.params)},
        }

    def hash(self):
        canon = dumps_deterministic(self.to_obj())
        return hashlib.sha256(canon.encode("ascii")).hexdigest()[:12]


def load_config(path):
    raw = Path(path).read_text(encoding="utf-8")
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    return obj
