"""Command-line surface: reproducible runs writing reports, delimited data,
rasters and figures named by the config hash.

Exit codes: 0 success, 2 domain errors (the report carries the witness),
1 I/O or schema errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .arithmetic import (
    check_cd,
    continued_fraction,
    prime_denominator_approximants,
    value_from_quotients,
)
from .birkhoff import (
    FurstenbergSchedule,
    birkhoff_trace,
    boundedness_scan,
    furstenberg_example,
    stability_probe,
)
from .continua import ContinuumSchedule, continuum_approx
from .errors import FhdError, SchemaError
from .fileio import (
    RunConfig,
    composite_ppm,
    load_config,
    mask_stack_to_pgms,
    parse_map_file,
    trigpoly_from_obj,
    write_csv,
    write_json,
)
from .fourier import grid_points, solve_cohomological
from .linearize import (
    conjugacy_residual,
    koenigs_linearize,
    modulus_rescale,
    siegel_formal_linearize,
)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fhd",
        description="Numerical local dynamics of fibered holomorphic maps",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (
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
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", help="override the output directory")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (dotted path, JSON value)",
        )
        p.add_argument(
            "--no-figures",
            action="store_true",
            help="skip the matplotlib figure outputs",
        )
    return parser


def _apply_override(obj, assignment):
    key, _, raw = assignment.partition("=")
    if not _:
        raise SchemaError(key, "override must look like key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = obj
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise SchemaError(key, "override path crosses a non-object")
    node[parts[-1]] = value


def _error_payload(exc):
    payload = {"type": type(exc).__name__, "message": str(exc)}
    for attr in (
        "witness",
        "divisor",
        "floor",
        "bound",
        "field_path",
        "level",
        "achieved",
        "drift",
        "threshold",
        "tail_mass",
        "mean",
    ):
        value = getattr(exc, attr, None)
        if value is None:
            continue
        if isinstance(value, complex):
            value = [value.real, value.imag]
        elif isinstance(value, tuple):
            value = [
                list(v) if isinstance(v, tuple) else v for v in value
            ]
        payload[attr] = value
    return payload


def _load_map(cfg):
    if not cfg.input_map:
        raise SchemaError("$.input_map", "this command needs an input map")
    F = parse_map_file(cfg.input_map)
    digest = hashlib.sha256(Path(cfg.input_map).read_bytes()).hexdigest()
    return F, digest


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg_obj = load_config(args.config)
        if not isinstance(cfg_obj, dict):
            raise SchemaError("$", "expected an object")
        cfg_obj.setdefault("command", args.command)
        if cfg_obj["command"] != args.command:
            raise SchemaError(
                "$.command", f"config says {cfg_obj['command']!r}"
            )
        for assignment in args.set:
            _apply_override(cfg_obj, assignment)
        if args.out:
            cfg_obj["out_dir"] = args.out
        cfg = RunConfig(cfg_obj)
    except (SchemaError, OSError) as exc:
        print(f"fhd: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"fhd: {exc}", file=sys.stderr)
        return 1

    stem = f"{cfg.command}_{cfg.hash()}"
    report = {
        "command": cfg.command,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "config": cfg.to_obj(),
        "artifacts": [],
    }
    try:
        handler = _HANDLERS[cfg.command]
        status = handler(cfg, out_dir, stem, report, figures=not args.no_figures)
    except SchemaError as exc:
        print(f"fhd: {exc}", file=sys.stderr)
        return 1
    except FhdError as exc:
        report["error"] = _error_payload(exc)
        write_json(out_dir / f"{stem}.json", report)
        print(f"fhd {cfg.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fhd: {exc}", file=sys.stderr)
        return 1
    write_json(out_dir / f"{stem}.json", report)
    print(f"fhd {cfg.command}: report {out_dir / (stem + '.json')}")
    return status


# -- handlers --------------------------------------------------------------------


def _cmd_characteristics(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    ch = F.characteristics()
    report["results"] = ch.to_obj()
    thetas = grid_points(512, 1) if F.dim == 1 else None
    if thetas is not None:
        vals = F.coeffs[0].evaluate(thetas)
        csv_path = out_dir / f"{stem}_c1.csv"
        write_csv(
            csv_path,
            ["theta", "abs_c1", "arg_c1"],
            [
                (float(t), float(abs(v)), float(np.angle(v)))
                for t, v in zip(thetas, vals)
            ],
        )
        report["artifacts"].append(csv_path.name)
        if figures:
            fig = plots.plot_modulus_argument(
                out_dir / f"{stem}_c1.png", thetas, vals
            )
            report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_cohom(cfg, out_dir, stem, report, *, figures):
    params = cfg.params
    if "g" not in params or "alpha" not in params:
        raise SchemaError("$.params", "cohom needs g (mode records) and alpha")
    g = trigpoly_from_obj(params["g"], "$.params.g")
    alpha = params["alpha"]
    floor = params.get("divisor_floor", 1e-8)
    solution, rep = solve_cohomological(g, alpha, floor)
    report["results"] = {
        "solution": solution.to_records(),
        "divisors": rep.to_obj(),
    }
    csv_path = out_dir / f"{stem}_divisors.csv"
    write_csv(
        csv_path,
        ["n", "divisor", "amplification"],
        [(";".join(map(str, n)), d, a) for n, d, a in rep.records],
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_divisor_spectrum(out_dir / f"{stem}_divisors.png", rep.records)
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_koenigs(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    params = cfg.params
    r = params.get("r", F.domain_radius / 2)
    eps = params.get("rescale_eps", 0.05)
    rescaled, data = modulus_rescale(F, eps)
    conj = koenigs_linearize(
        rescaled,
        r,
        tol=params.get("tol", 1e-10),
        max_n=params.get("max_n", 512),
        theta_nodes=params.get("theta_nodes", 256),
        z_nodes=params.get("z_nodes", 64),
    )
    residual = conjugacy_residual(rescaled, conj)
    report["results"] = {
        "kappa": data.kappa,
        "rescale_degree": data.fejer_degree,
        "iterations": conj.iterations,
        "achieved_sup_delta": conj.achieved_sup_delta,
        "step_residual_max": conj.step_residual_max,
        "conjugacy_residual": residual,
    }
    write_json(out_dir / f"{stem}_conjugacy.json", conj.to_obj())
    report["artifacts"].append(f"{stem}_conjugacy.json")
    # per-node residual rows
    thetas = grid_points(conj.theta_nodes, 1)
    circle = conj.radius * np.exp(
        2j * np.pi * np.arange(conj.z_nodes) / conj.z_nodes
    )
    TH = np.broadcast_to(thetas[:, None], (conj.theta_nodes, conj.z_nodes))
    ZZ = np.broadcast_to(circle, TH.shape)
    fz = rescaled.fiber(thetas[:, None], ZZ)
    lhs = conj.evaluate(np.mod(TH + rescaled.alpha[0], 1.0).ravel(), fz.ravel())
    rhs = conj.rho1.evaluate(thetas)[:, None] * conj.evaluate(
        TH.ravel(), ZZ.ravel()
    ).reshape(TH.shape)
    field = np.abs(lhs.reshape(TH.shape) - rhs)
    csv_path = out_dir / f"{stem}_residuals.csv"
    write_csv(
        csv_path,
        ["theta", "z_re", "z_im", "residual"],
        [
            (float(TH[i, j]), float(ZZ[i, j].real), float(ZZ[i, j].imag),
             float(field[i, j]))
            for i in range(TH.shape[0])
            for j in range(TH.shape[1])
        ],
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_residual_heatmap(out_dir / f"{stem}_residuals.png", field)
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_siegel(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    params = cfg.params
    order = params.get("order", 10)
    conj = siegel_formal_linearize(
        F,
        order,
        params.get("divisor_floor", 1e-8),
        degree_cutoff=params.get("degree_cutoff", 512),
    )
    radius = conj.truncation_radius(1e-8)
    residual = conjugacy_residual(F, conj, radius=radius)
    report["results"] = conj.to_obj()
    report["results"]["truncation_radius"] = radius
    report["results"]["conjugacy_residual"] = residual
    write_json(out_dir / f"{stem}_conjugacy.json", conj.to_obj())
    report["artifacts"].append(f"{stem}_conjugacy.json")
    orders = sorted(conj.coeffs)
    rows = [
        (k, conj.coeffs[k].mass(), conj.order_residuals[k]) for k in orders
    ]
    csv_path = out_dir / f"{stem}_orders.csv"
    write_csv(csv_path, ["order", "mass", "identity_residual"], rows)
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_order_masses(
            out_dir / f"{stem}_orders.png",
            orders,
            [conj.coeffs[k].mass() for k in orders],
            [max(conj.order_residuals[k], 1e-18) for k in orders],
        )
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_birkhoff(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    params = cfg.params
    theta = params.get("theta", 0.0)
    n = params.get("n", 10000)
    trace = birkhoff_trace(F, theta, n)
    report["results"] = {
        "theta": list(trace.theta),
        "b_minus": trace.b_minus,
        "b_plus": trace.b_plus,
        "slope": trace.slope,
    }
    if "scan_grid" in params:
        scan = boundedness_scan(F, n, params["scan_grid"])
        report["results"]["scan"] = scan.to_obj()
    csv_path = out_dir / f"{stem}_trace.csv"
    write_csv(
        csv_path,
        ["n", "sum"],
        [(i, float(v)) for i, v in enumerate(trace.values)],
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_trace(out_dir / f"{stem}_trace.png", trace.values)
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_probe(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    params = cfg.params
    r = params.get("r", F.domain_radius / 2)
    n = params.get("n", 200)
    grid = tuple(params.get("grid", (64, 4, 16)))
    rep = stability_probe(F, r, n, grid=grid)
    report["results"] = rep.to_obj()
    csv_path = out_dir / f"{stem}_excursions.csv"
    write_csv(
        csv_path,
        ["theta_node", "max_excursion"],
        [(i, float(v)) for i, v in enumerate(rep.max_excursion)],
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_excursions(
            out_dir / f"{stem}_excursions.png", rep.max_excursion, r
        )
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_furstenberg(cfg, out_dir, stem, report, *, figures):
    params = cfg.params
    if "quotients" in params:
        omega = value_from_quotients(params["quotients"])
    elif "omega" in params:
        omega = params["omega"]
    else:
        raise SchemaError("$.params", "furstenberg needs omega or quotients")
    schedule = FurstenbergSchedule(
        levels=params.get("levels", 6),
        exponent=params.get("exponent", 0.5),
        divergence_factor=params.get("divergence_factor", 2.0),
    )
    example = furstenberg_example(omega, schedule)
    probe = stability_probe(
        example.fibered_map,
        params.get("probe_radius", 0.1),
        params.get("probe_steps", 500),
        grid=(32, 3, 8),
    )
    report["results"] = {
        "omega": example.omega,
        "denominators": list(example.denominators),
        "sup_norms": list(example.sup_norms),
        "solution_moduli": list(example.solution_moduli),
        "probe": probe.to_obj(),
        "kappa": example.fibered_map.multiplier(),
    }
    write_json(out_dir / f"{stem}_map.json", example.fibered_map.to_obj())
    report["artifacts"].append(f"{stem}_map.json")
    csv_path = out_dir / f"{stem}_divergence.csv"
    write_csv(
        csv_path,
        ["level", "denominator", "norm", "amplitude", "solution_modulus", "sup_norm"],
        example.table(),
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_divergence(
            out_dir / f"{stem}_divergence.png", example.sup_norms
        )
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_diophantine(cfg, out_dir, stem, report, *, figures):
    params = cfg.params
    for key in ("alpha", "beta", "c", "tau", "range"):
        if key not in params:
            raise SchemaError(f"$.params.{key}", "missing")
    rep = check_cd(
        params["alpha"], params["beta"], params["c"], params["tau"], params["range"]
    )
    report["results"] = rep.to_obj()
    if figures:
        fig = plots.plot_margins(out_dir / f"{stem}_margins.png", rep)
        report["artifacts"].append(Path(fig).name)
    # a failing verdict is a domain outcome: exit 2 with the witness on file
    return 0 if rep.passed else 2


def _cmd_approximants(cfg, out_dir, stem, report, *, figures):
    params = cfg.params
    for key in ("alpha", "degree_bound", "count"):
        if key not in params:
            raise SchemaError(f"$.params.{key}", "missing")
    seq = prime_denominator_approximants(
        params["alpha"],
        params["degree_bound"],
        params["count"],
        cap=params.get("cap", 1_000_000),
    )
    rows = seq.to_rows()
    report["results"] = {
        "alpha": list(seq.alpha),
        "degree_bound": seq.degree_bound,
        "denominators": list(seq.denominators),
    }
    csv_path = out_dir / f"{stem}_approximants.csv"
    write_csv(csv_path, ["k", "p", "q", "error"], rows)
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_approximant_errors(
            out_dir / f"{stem}_approximants.png", rows
        )
        report["artifacts"].append(Path(fig).name)
    return 0


def _cmd_continuum(cfg, out_dir, stem, report, *, figures):
    F, digest = _load_map(cfg)
    report["inputs"] = {"map": cfg.input_map, "sha256": digest}
    params = cfg.params
    r = params.get("r", F.domain_radius / 2)
    schedule = ContinuumSchedule(
        levels=params.get("levels", 2),
        fejer_degree=params.get("fejer_degree", 32),
        horizon=params.get("horizon", 200),
        min_denominator=params.get("min_denominator"),
        stabilization_pixels=params.get("stabilization_pixels", 2.0),
    )
    rep = continuum_approx(
        F,
        r,
        schedule,
        theta_resolution=params.get("theta_resolution", 128),
        z_resolution=params.get("z_resolution", 128),
    )
    report["results"] = rep.to_obj()
    index = mask_stack_to_pgms(out_dir, stem, rep.mask)
    report["artifacts"].extend(index["files"])
    report["artifacts"].append(f"{stem}_index.json")
    composite = out_dir / f"{stem}_composite.ppm"
    composite_ppm(composite, rep.mask)
    report["artifacts"].append(composite.name)
    csv_path = out_dir / f"{stem}_fibers.csv"
    write_csv(
        csv_path,
        ["fiber", "pixel_count", "components"],
        [
            (i, int(rep.fiber_pixel_counts[i]), int(rep.fiber_components[i]))
            for i in range(len(rep.fiber_pixel_counts))
        ],
    )
    report["artifacts"].append(csv_path.name)
    if figures:
        fig = plots.plot_mask_composite(out_dir / f"{stem}_composite.png", rep.mask)
        report["artifacts"].append(Path(fig).name)
        fig = plots.plot_fiber_mask(out_dir / f"{stem}_fiber0.png", rep.mask)
        report["artifacts"].append(Path(fig).name)
    return 0


_HANDLERS = {
    "characteristics": _cmd_characteristics,
    "cohom": _cmd_cohom,
    "koenigs": _cmd_koenigs,
    "siegel": _cmd_siegel,
    "birkhoff": _cmd_birkhoff,
    "probe": _cmd_probe,
    "furstenberg": _cmd_furstenberg,
    "diophantine": _cmd_diophantine,
    "approximants": _cmd_approximants,
    "continuum": _cmd_continuum,
}


if __name__ == "__main__":
    sys.exit(main())
