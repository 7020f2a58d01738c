"""Command-line front end: ``gibbs-tree <command> [options]``.

Parameters come from built-in defaults, then an optional JSON config with
sections ``kernel``, ``grid``, ``tree``, ``solver`` and ``run``, then flags.
Each run writes ``<outdir>/<command>-<timestamp>/`` holding ``manifest.json``
(every effective parameter) and the result files.  Exit status is 0 on
success, 2 for bad input and 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import datetime as dt
import json
import logging
import os
import sys
from pathlib import Path as FsPath

import numpy as np

from . import __version__
from .constructions import (art_lift, bg_field, bg_seed_sensitivity, field_to_vertexfield, residual,
                            zachary_levels)
from .dump import (fmt, read_field_dump, write_field, write_fields, write_grid, write_json,
                   write_vertexfield, write_configurations)
from .errors import (ConfigurationError, ContractViolation, GibbsTreeError, InvalidKernelError,
                     NoConvergenceError, NumericError, PreconditionError, ResourceError)
from .expr import parse_expression
from .grid import make_grid, sup
from .kernel import check_zero_mean, h_bounds, kernel_from_config
from .measure import check_compatibility, marginal_at, messages, root_marginal, sample_configurations
from .operator import apply_kA, estimate_contraction
from .ti_solver import find_ti_multi
from .tree import parse_vertex, path_from_r

log = logging.getLogger("gibbs_tree")

COMMANDS = ("kernel-check", "solve-ti", "contraction", "art", "bg", "zachary", "verify", "sample",
            "marginal")
OUTDIR_ENV = "GIBBS_TREE_OUTDIR"

DEFAULTS = {
    "kernel": {"preset": None, "xi": None, "J": 1.0, "beta": 1.0},
    "grid": {"nodes": 64, "rule": "gauss-split"},
    "tree": {"k": 2, "k0": 2, "depth": 3, "mode": "half", "r": 0.0},
    "solver": {"tol": 1e-10, "max_iter": 5000, "threads": 1},
    "run": {"seed": 0, "outdir": "runs", "samples": 1000, "field": None, "vertex": "",
            "zeta0": None},
}

# flag dest -> (section, key)
FLAG_KEYS = {
    "preset": ("kernel", "preset"), "xi": ("kernel", "xi"), "J": ("kernel", "J"),
    "beta": ("kernel", "beta"), "nodes": ("grid", "nodes"), "rule": ("grid", "rule"),
    "k": ("tree", "k"), "k0": ("tree", "k0"), "depth": ("tree", "depth"), "mode": ("tree", "mode"),
    "r": ("tree", "r"), "tol": ("solver", "tol"), "max_iter": ("solver", "max_iter"),
    "threads": ("solver", "threads"), "seed": ("run", "seed"), "outdir": ("run", "outdir"),
    "samples": ("run", "samples"), "field": ("run", "field"), "vertex": ("run", "vertex"),
    "zeta0": ("run", "zeta0"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with kernel/grid/tree/solver/run sections")
    common.add_argument("--preset", choices=["ehr12-k2", "ehr12-k3", "constant"])
    common.add_argument("--xi", help="interaction xi(t, u) as an expression, e.g. 't*u'")
    common.add_argument("--J", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--k", type=int, help="branching order")
    common.add_argument("--k0", type=int, help="source order for art")
    common.add_argument("--nodes", type=int)
    common.add_argument("--rule", choices=["gauss-split", "composite-simpson", "trapezoid"])
    common.add_argument("--depth", type=int, help="tree depth n (levels for zachary)")
    common.add_argument("--r", type=float, help="path parameter in [0, 1] for bg")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--outdir", help=f"run directory parent (default ${OUTDIR_ENV} or ./runs)")
    common.add_argument("--mode", choices=["half", "full"])
    common.add_argument("--field", help="field dump CSV (t,value or vertex,t,value)")
    common.add_argument("--samples", type=int, help="number of samples / test points")
    common.add_argument("--vertex", help="vertex address such as 0/1/1; empty for the root")
    common.add_argument("--zeta0", help="zachary start: expression in t or a t,value CSV")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gibbs-tree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "kernel-check": "zero-mean condition and field bounds",
        "solve-ti": "translation-invariant fixed points of kA",
        "contraction": "empirical Lipschitz constant of A",
        "art": "lift an order-k0 solution to order k",
        "bg": "glue two fixed points along a path",
        "zachary": "level sequence by inverting kA",
        "verify": "residual and compatibility of a field dump",
        "sample": "draw configurations from a field",
        "marginal": "single-site marginal density",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if os.environ.get(OUTDIR_ENV):
        cfg["run"]["outdir"] = os.environ[OUTDIR_ENV]
    if args.config:
        try:
            with open(args.config) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigurationError("config must be a JSON object")
        for section, values in user.items():
            if section not in cfg or not isinstance(values, dict):
                raise ConfigurationError(f"unknown config section {section!r}")
            for key, val in values.items():
                if key not in cfg[section]:
                    raise ConfigurationError(f"unknown config key {section}.{key}")
                cfg[section][key] = val
    for dest, (section, key) in FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            cfg[section][key] = val
    if args.preset is not None:
        cfg["kernel"]["xi"] = None
    elif args.xi is not None:
        cfg["kernel"]["preset"] = None
    if not cfg["kernel"]["preset"] and not cfg["kernel"]["xi"]:
        raise ConfigurationError("no kernel: pass --preset or --xi (or set kernel in --config)")
    for key in ("k", "k0", "depth"):
        if int(cfg["tree"][key]) < (1 if key != "depth" else 0):
            raise ConfigurationError(f"tree.{key} out of range")
    if cfg["tree"]["mode"] not in ("half", "full"):
        raise ConfigurationError("tree.mode must be 'half' or 'full'")
    if int(cfg["run"]["samples"]) < 1 or int(cfg["solver"]["threads"]) < 1:
        raise ConfigurationError("samples and threads must be positive")
    return cfg


class Run:
    """Resolved inputs plus the output directory for one command."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.kern = kernel_from_config(cfg["kernel"])
        self.g = make_grid(int(cfg["grid"]["nodes"]), cfg["grid"]["rule"])
        t = cfg["tree"]
        self.k, self.depth, self.mode = int(t["k"]), int(t["depth"]), t["mode"]
        s = cfg["solver"]
        self.tol, self.max_iter, self.threads = float(s["tol"]), int(s["max_iter"]), int(s["threads"])
        self.seed = int(cfg["run"]["seed"])
        self.outdir = None
        self.summary: dict = {}

    def open_outdir(self) -> FsPath:
        stamp = dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
        base = FsPath(self.cfg["run"]["outdir"])
        path = base / f"{self.command}-{stamp}"
        i = 1
        while path.exists():
            path = base / f"{self.command}-{stamp}-{i}"
            i += 1
        path.mkdir(parents=True)
        self.outdir = path
        manifest = {"command": self.command, "version": __version__, "config": self.cfg}
        write_json(path / "manifest.json", manifest)
        return path

    def out(self, name: str) -> FsPath:
        return self.outdir / name

    def fixed_points(self, k: int | None = None) -> list[np.ndarray]:
        return find_ti_multi(self.kern, self.g, k or self.k, tol=self.tol, max_iter=self.max_iter,
                             threads=self.threads)

    def load_field(self):
        path = self.cfg["run"]["field"]
        if not path:
            return field_to_vertexfield(self.g.zeros(), self.k, self.depth, self.mode)
        return read_field_dump(path, self.g, self.k, self.depth, self.mode)


def _parse_field_arg(run: Run, text: str) -> np.ndarray:
    if text.endswith(".csv") or os.path.exists(text):
        vf = read_field_dump(text, run.g, run.k, 0)
        return np.array(vf[()])
    f = parse_expression(text, ("t",))
    vals = np.broadcast_to(np.asarray(f(run.g.nodes), dtype=float), run.g.nodes.shape)
    return vals - vals[0]


# ------------------------------------------------------------ commands

def cmd_kernel_check(run: Run) -> None:
    zm = check_zero_mean(run.kern, run.g)
    lo, hi = h_bounds(run.kern, run.g, run.k)
    write_grid(run.out("grid.csv"), run.g)
    write_fields(run.out("bounds.csv"), run.g, {"h_min": lo, "h_max": hi})
    run.summary = {"holds": zm.holds, "max_dev": zm.max_dev, "sup_h_max": sup(hi),
                   "sup_h_min": sup(lo)}


def cmd_solve_ti(run: Run) -> None:
    found = run.fixed_points()
    write_fields(run.out("fixed_points.csv"), run.g, {f"h{i}": f for i, f in enumerate(found)})
    res = [sup(apply_kA(run.kern, run.g, run.k, f) - f) for f in found]
    run.summary = {"n_fixed_points": len(found), "residuals": res,
                   "sup_norms": [sup(f) for f in found], "values_at_1": [float(f[-1]) for f in found]}


def cmd_contraction(run: Run) -> None:
    amp = sup(h_bounds(run.kern, run.g, run.k)[1])
    n = int(run.cfg["run"]["samples"])
    est = estimate_contraction(run.kern, run.g, n, amp, run.seed)
    run.summary = {"alpha_hat": est.alpha_hat, "alpha_pairs": est.alpha_pairs,
                   "alpha_local": est.alpha_local, "pointwise_ratio": est.pointwise_ratio,
                   "n_samples": est.n_samples, "amplitude": est.amplitude}


def cmd_art(run: Run) -> None:
    if run.mode != "half":
        raise ConfigurationError("art works on half trees (--mode half)")
    k0 = int(run.cfg["tree"]["k0"])
    found = run.fixed_points(k0)
    if not found:
        raise NoConvergenceError(f"no fixed point found for k0={k0}")
    source = field_to_vertexfield(found[-1], k0, run.depth, "half", "constant")
    lifted = art_lift(run.kern, run.g, source, run.k, run.depth)
    write_vertexfield(run.out("field.csv"), run.g, lifted)
    run.summary = {"k0": k0, "residual": residual(run.kern, run.g, lifted).max_res,
                   "source_sup": sup(found[-1])}


def _bg_pair(run: Run):
    found = run.fixed_points()
    if len(found) < 2:
        raise PreconditionError("bg needs two distinct fixed points; only one was found")
    by_end = sorted(found, key=lambda f: float(f[-1]))
    return by_end[-1], by_end[0]


def cmd_bg(run: Run) -> None:
    if run.mode != "half":
        raise ConfigurationError("bg works on half trees (--mode half)")
    h, eta = _bg_pair(run)
    r = float(run.cfg["tree"]["r"])
    p = path_from_r(r, run.k, run.depth)
    vf = bg_field(run.kern, run.g, run.k, h, eta, p, run.depth)
    write_vertexfield(run.out("field.csv"), run.g, vf)
    mid = 0.5 * (h + eta)
    rows = bg_seed_sensitivity(run.kern, run.g, run.k, h, eta, p, run.depth, mid, 0.5 * (mid + h))
    with open(run.out("sensitivity.csv"), "w") as fh:
        fh.write("level,sup_diff,bound,ratio,violates\n")
        for row in rows:
            fh.write(f"{row.level},{fmt(row.sup_diff)},{fmt(row.bound)},{fmt(row.ratio)},"
                     f"{str(row.violates).lower()}\n")
    run.summary = {"r": r, "path": list(p.digits), "residual": residual(run.kern, run.g, vf).max_res,
                   "sup_h_minus_eta": sup(h - eta), "sensitivity_violations": sum(x.violates for x in rows)}


def cmd_zachary(run: Run) -> None:
    text = run.cfg["run"]["zeta0"]
    if text:
        zeta0 = _parse_field_arg(run, text)
    else:
        # default start: a point known to lie in the range of (kA)^depth
        zeta0 = 0.3 * (2.0 * run.g.nodes - 1.0)
        zeta0 -= zeta0[0]
        for _ in range(run.depth):
            zeta0 = apply_kA(run.kern, run.g, run.k, zeta0)
    result = zachary_levels(run.kern, run.g, run.k, zeta0, run.depth, tol=min(run.tol, 1e-10))
    write_fields(run.out("levels.csv"), run.g, {f"zeta{i}": z for i, z in enumerate(result.levels)})
    run.summary = {"complete": result.complete, "failed_level": result.failed_level,
                   "reason": result.reason, "level_residuals": result.residuals}
    if result.complete:
        vf = result.vertexfield(run.k, run.mode)
        write_vertexfield(run.out("field.csv"), run.g, vf)
        run.summary["residual"] = residual(run.kern, run.g, vf).max_res
    else:
        raise NoConvergenceError(f"chain stopped at level {result.failed_level}: {result.reason}")


def cmd_verify(run: Run) -> None:
    vf = run.load_field()
    res = residual(run.kern, run.g, vf)
    comp = check_compatibility(run.kern, run.g, vf, n_samples=min(int(run.cfg["run"]["samples"]), 200),
                               rng_seed=run.seed, tol=max(run.tol, 1e-8))
    report = {"residual": res.max_res, "worst_vertex": list(res.worst_vertex or ()),
              "compatibility": {"n_samples": comp.n_samples, "max_rel_err": comp.max_rel_err,
                                "passed": comp.passed}}
    write_json(run.out("compatibility.json"), report)
    run.summary = report


def cmd_sample(run: Run) -> None:
    vf = run.load_field()
    n = int(run.cfg["run"]["samples"])
    order, spins = sample_configurations(run.kern, run.g, vf, n, run.seed)
    write_configurations(run.out("configurations.csv"), order, spins)
    run.summary = {"n_samples": n, "n_vertices": len(order), "root_mean": float(spins[:, 0].mean())}


def cmd_marginal(run: Run) -> None:
    vf = run.load_field()
    x = parse_vertex(run.cfg["run"]["vertex"] or "")
    msgs = messages(run.kern, run.g, vf)
    dens = root_marginal(run.kern, run.g, vf, msgs) if x == () else marginal_at(run.kern, run.g, vf, x, msgs)
    write_field(run.out("marginal.csv"), run.g, dens)
    run.summary = {"vertex": list(x), "mean": float(np.sum(run.g.weights * run.g.nodes * dens)),
                   "log_partition": float(msgs.log_Z)}


HANDLERS = {
    "kernel-check": cmd_kernel_check, "solve-ti": cmd_solve_ti, "contraction": cmd_contraction,
    "art": cmd_art, "bg": cmd_bg, "zachary": cmd_zachary, "verify": cmd_verify,
    "sample": cmd_sample, "marginal": cmd_marginal,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    job = None
    try:
        cfg = resolve_config(args)
        job = Run(args.command, cfg)
        job.open_outdir()
        HANDLERS[args.command](job)
    except (ConfigurationError, ContractViolation, InvalidKernelError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoConvergenceError, NumericError, PreconditionError, GibbsTreeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        res = getattr(exc, "residual", None)
        if res is not None and np.isfinite(res):
            print(f"  best residual: {res:.3e}", file=sys.stderr)
        if job is not None and job.outdir is not None:
            write_json(job.out("summary.json"), {"error": str(exc), **job.summary})
            print(f"  partial output in {job.outdir}", file=sys.stderr)
        return 3
    write_json(job.out("summary.json"), job.summary)
    print(json.dumps({"outdir": str(job.outdir), **job.summary}, default=_plain, sort_keys=True))
    return 0


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(type(obj).__name__)


def main() -> None:
    sys.exit(run())
