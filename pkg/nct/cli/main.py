from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from nct import __version__
from nct.cli.checks import reduce_check
from nct.cli.document import (
    RunDocument,
    build_grid,
    build_model,
    build_phase,
    build_quadrature,
    build_run_config,
    build_source,
    build_xi,
    load_config,
    parse_config,
)
from nct.cli.output import provenance, write_field_csv, write_json
from nct.config import settings
from nct.diffusion.solver import leading_order_angular_flux, solve_diffusion
from nct.diffusion.tensor import diffusion_tensor, resolution_check
from nct.integral.picard import solve_integral
from nct.scattering.phase import build_pstar
from nct.stats.laws import TabulatedPdfLaw
from nct.stats.models import CrossSectionModel
from nct.stats.pathlength import DivergentMomentError, ensemble_mean, raw_moment
from nct.transport.montecarlo import run_simulation
from nct.utils.errors import ConfigError, NumericError

log = logging.getLogger("nct")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK_FAILED = 4

DEFAULT_DOCUMENT = '{"schema_version": 1, "model": {"kind": "constant", "sigma": 1.0}}'
AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _dir_label(d) -> str:
    return "_".join(format(float(x), "g") for x in d)


def _csv_target(args, doc: RunDocument) -> Optional[Path]:
    target = args.out or doc.outputs.csv
    return Path(target) if target else None


def _json_target(args, doc: RunDocument) -> Optional[Path]:
    target = args.out or doc.outputs.json
    return Path(target) if target else None


def cmd_mc_run(args, doc: RunDocument) -> int:
    cfg = build_run_config(doc, args.base_dir, threads=args.threads)
    tallies = run_simulation(cfg, threads=args.threads)
    phi, phi_err = tallies.phi()
    coll, coll_err = tallies.collision_density()
    columns: Dict[str, np.ndarray] = {
        "phi": phi, "phi_err": phi_err, "F_hat": coll, "F_hat_err": coll_err,
    }
    if cfg.n_mu:
        psi, psi_err = tallies.psi()
        for b in range(cfg.n_mu):
            columns[f"psi_mu{b}"] = psi[:, b]
            columns[f"psi_mu{b}_err"] = psi_err[:, b]
    header = {**provenance(doc, "mc-run"), "histories": tallies.histories,
              "batches": len(tallies.batches)}
    write_field_csv(_csv_target(args, doc), cfg.grid, columns, header)
    if doc.outputs.json:
        mean, err = tallies.box_average("track")
        cmean, cerr = tallies.box_average("collisions")
        summary = {**header, "balance": tallies.balance(),
                   "phi_box": {"mean": mean, "err": err},
                   "F_hat_box": {"mean": cmean, "err": cerr}}
        if cfg.n_mu:
            pmean, perr = tallies.box_average("psi_track")
            summary["psi_box"] = {"mu_edges": tallies.mu_edges, "mean": pmean, "err": perr}
        write_json(summary, Path(doc.outputs.json))
    return EXIT_OK


def cmd_integral_solve(args, doc: RunDocument) -> int:
    grid = build_grid(doc)
    model = build_model(doc, args.base_dir)
    Q = build_source(doc).cell_field(grid)
    opts = doc.integral
    solution = solve_integral(model, build_phase(doc), doc.c, Q, grid, cutoff=opts.cutoff,
                              tol=opts.tol, max_iter=opts.max_iter, directions=opts.directions)
    columns = {"F_hat": solution.collision.values, "phi": solution.phi}
    for d, psi in solution.psi.items():
        columns[f"psi_{_dir_label(d)}"] = psi
    header = {**provenance(doc, "integral-solve"), "iterations": solution.collision.iterations,
              "residual": solution.collision.residual}
    write_field_csv(_csv_target(args, doc), grid, columns, header)
    return EXIT_OK


def cmd_diffusion(args, doc: RunDocument) -> int:
    grid = build_grid(doc)
    model = build_model(doc, args.base_dir)
    kernel = build_pstar(build_phase(doc), doc.c)
    tensor = diffusion_tensor(model, kernel, build_xi(doc), build_quadrature(doc))
    Q = build_source(doc).cell_field(grid)
    spec = doc.diffusion
    solution = solve_diffusion(tensor, Q, grid, spec.boundary, spec.tol, spec.max_iter)
    columns = {"phi0": solution.phi}
    directions = doc.integral.directions
    if directions:
        psi = leading_order_angular_flux(solution, model, directions)
        for d, field in zip(directions, psi):
            columns[f"psi_{_dir_label(d)}"] = field
    header = {**provenance(doc, "diffusion"), "iterations": solution.iterations,
              "residual": solution.residual}
    write_field_csv(_csv_target(args, doc), grid, columns, header)
    return EXIT_OK


def cmd_tensor(args, doc: RunDocument) -> int:
    model = build_model(doc, args.base_dir)
    kernel = build_pstar(build_phase(doc), doc.c)
    xi, quad = build_xi(doc), build_quadrature(doc)
    tensor = diffusion_tensor(model, kernel, xi, quad)
    payload = {**provenance(doc, "tensor"), **tensor.as_dict(),
               "azimuthal_asymmetry": tensor.azimuthal_asymmetry(),
               "resolution_change": resolution_check(model, kernel, xi, quad)}
    write_json(payload, _json_target(args, doc))
    return EXIT_OK


def _renormalization(model: CrossSectionModel) -> Optional[float]:
    law = getattr(model, "law", None) or getattr(model, "base", None)
    return law.renormalization if isinstance(law, TabulatedPdfLaw) else None


def cmd_moments(args, doc: RunDocument) -> int:
    model = build_model(doc, args.base_dir)
    xi, quad = build_xi(doc), build_quadrature(doc)
    payload: Dict[str, Any] = {**provenance(doc, "moments"), "model": model.describe()}
    for order, name in ((1, "s_mean"), (2, "s2_mean")):
        try:
            payload[name] = ensemble_mean(model, xi, quad, order)
        except DivergentMomentError as exc:
            payload[name] = None
            payload[f"{name}_note"] = f"divergent: {exc.detail}"
    axes = {}
    for label, d in zip("xyz", AXES):
        try:
            axes[label] = raw_moment(model, d, 1)
        except DivergentMomentError:
            axes[label] = None
    payload["axis_mean_free_path"] = axes
    payload["pdf_renormalization"] = _renormalization(model)
    write_json(payload, _json_target(args, doc))
    return EXIT_OK


def cmd_reduce_check(args, doc: RunDocument) -> int:
    report = reduce_check(doc)
    write_json({**provenance(doc, "reduce-check"), **report.as_dict()}, _json_target(args, doc))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


COMMANDS: Dict[str, Callable[[Any, RunDocument], int]] = {
    "mc-run": cmd_mc_run,
    "integral-solve": cmd_integral_solve,
    "diffusion": cmd_diffusion,
    "tensor": cmd_tensor,
    "moments": cmd_moments,
    "reduce-check": cmd_reduce_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nct", description="Non-classical transport toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "reduce-check",
                       help="JSON run document")
        p.add_argument("--out", help="output file (default: document outputs, else stdout)")
        p.add_argument("--threads", type=int, default=settings.threads)
        p.add_argument("--verbose", action="store_true", help="log every iteration")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else settings.log_level
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        if args.threads < 1:
            raise ConfigError.at("threads", "must be >= 1")
        if args.config is None:
            args.base_dir = None
            doc = parse_config(DEFAULT_DOCUMENT)
        else:
            args.base_dir = args.config.parent
            doc = load_config(args.config)
        return COMMANDS[args.command](args, doc)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericError as exc:
        log.error("%s: %s", type(exc).__name__, exc.detail)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
