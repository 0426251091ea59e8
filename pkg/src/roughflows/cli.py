"""
Command-line entry point.

    roughflows <command> CONFIG [--seed N] [--out DIR] [--workers N]

Commands: flow-solve, wong-zakai, diagnostics, schilder, ito-check.
Exit codes: 0 pass, 2 convergence or check failure, 3 configuration error,
4 numerical blow-up.  ``ROUGHFLOWS_OUT`` overrides the configured output
directory; ``--out`` overrides both.
"""
import argparse
import csv
import math
import os
import sys

import numpy as np

from .config import load_config
from .core import SpaceSample, TimeInterval, dyadic_partition, dyadic_time_pairs
from .driver import (
    constant_driver,
    dilate,
    driver_dist,
    scalar_linear_driver,
    zero_driver,
)
from .errors import BlowUpError, ConfigurationError
from .flow import ODEConfig, solve_flow
from .lift import ModeBasis, mode_driver, piecewise_linear_lift, simulate_brownian_field
from .sewing import ItoFunction, ito_reconstruct
from .stochastic import (
    CameronMartinPath,
    RngStreams,
    cm_bounds_check,
    kolmogorov_diagnostics,
    random_cm_path,
    rate_function,
    sigma_gamma,
    wong_zakai_experiment,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3, 4
SCHEMA_VERSION = 1


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path, schema, header, rows):
    """CSV with a ``# schema: roughflows.<schema>/<version>`` first line."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: roughflows.{schema}/{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_basis(cfg):
    b, d = cfg.basis, cfg.domain.dim
    box = cfg.box_array()
    if b.family == "trig":
        return ModeBasis.trigonometric(d, b.modes, b.weights, box, b.frequency)
    if b.family == "gauss":
        return ModeBasis.gaussian(d, b.modes, b.weights, box, b.width)
    return ModeBasis.algebraic(d, b.modes, b.eta, b.weights, box, b.width)


def build_sample(cfg):
    d = cfg.domain
    return SpaceSample.quasi_random(cfg.box_array(), d.n_points, d.n_pairs, d.sample_seed)


def build_driver(cfg, seed, n_sim=None):
    """Driver named in the experiment section; mode drivers use ``seed``."""
    params = cfg.driver_params()
    T, d = cfg.params.T, cfg.domain.dim
    kind = cfg.experiment.driver
    if kind == "zero":
        return zero_driver(d, params, T)
    if kind == "constant":
        v = cfg.experiment.velocity or [1.0] + [0.0] * (d - 1)
        return constant_driver(v, params, T)
    if kind == "linear":
        return scalar_linear_driver(cfg.experiment.lam, np.sin, params, T)
    n_sim = n_sim or cfg.experiment.n_sim or 2**cfg.solver.K_max
    field = simulate_brownian_field(build_basis(cfg), T, n_sim, seed)
    return mode_driver(field, params)


def ode_config(cfg):
    return ODEConfig.for_box(cfg.box_array(), cfg.solver.n_sub)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_flow_solve(cfg, out, workers=1):
    seed = RngStreams(cfg.experiment.seed).seed(0)
    drv = build_driver(cfg, seed)
    sample = build_sample(cfg)
    flow = solve_flow(drv, TimeInterval(0.0, cfg.params.T, cfg.params.T), ode_config(cfg),
                      cfg.solver.tol_flow, cfg.solver.K_max, sample)
    rep = flow.report
    write_csv(
        os.path.join(out, "flow_report.csv"), "flow_report",
        ["level", "mesh", "delta"],
        [(k, cfg.params.T / 2**k, dk) for k, dk in zip(rep.levels, rep.deltas)],
    )
    write_csv(
        os.path.join(out, "flow_summary.csv"), "flow_summary",
        ["converged", "final_level", "rate", "c1", "theoretical_rate", "a", "tol_flow"],
        [(rep.converged, rep.final_level, rep.rate, rep.c1, rep.theoretical_rate, rep.a,
          rep.tol_flow)],
    )
    x = sample.points
    y = flow(x)
    d = x.shape[1]
    write_csv(
        os.path.join(out, "flow_dump.csv"), "flow_dump",
        [f"x{i}" for i in range(d)] + [f"phi{i}" for i in range(d)],
        np.concatenate([x, y], axis=1),
    )
    return EXIT_OK if rep.converged else EXIT_FAIL


def _decreasing(values, max_inversions=1):
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return False
    return int(np.sum(np.diff(v) >= 0)) <= max_inversions


def cmd_wong_zakai(cfg, out, workers=1):
    e = cfg.experiment
    res = wong_zakai_experiment(
        build_basis(cfg), cfg.params.T, e.levels, e.replicates, cfg.driver_params(),
        seed=e.seed, n_sim=e.n_sim, sample=build_sample(cfg), cfg=ode_config(cfg),
        tol_flow=cfg.solver.tol_flow, workers=workers,
    )
    write_csv(
        os.path.join(out, "wong_zakai.csv"), "wong_zakai",
        ["level", "mesh", "median_dV", "median_dW", "median_homog", "median_flow_dist", "n_fail"],
        [(r.level, r.mesh, r.median_dV, r.median_dW, r.median_homog, r.median_flow_dist,
          r.n_fail) for r in res.rows],
    )
    homog = [r.median_homog for r in res.rows]
    flows = [r.median_flow_dist for r in res.rows]
    verdict = (_decreasing(homog) and res.homog_slope > 0.1 and _decreasing(flows)
               and res.flow_slope > 0)
    write_csv(
        os.path.join(out, "wong_zakai_summary.csv"), "wong_zakai_summary",
        ["homog_slope", "flow_slope", "rank_correlation", "pass"],
        [(res.homog_slope, res.flow_slope, res.rank_correlation, verdict)],
    )
    return EXIT_OK if verdict else EXIT_FAIL


class _FamilyFromConfig:
    """Picklable driver family for the diagnostics command."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.streams = RngStreams(cfg.experiment.seed)

    def __call__(self, i):
        return build_driver(self.cfg, self.streams.seed(i), n_sim=self.cfg.experiment.n_sim or 2**8)


def cmd_diagnostics(cfg, out, workers=1):
    e = cfg.experiment
    alpha = e.alpha if e.alpha is not None else 1.0 / cfg.params.p
    beta = e.beta if e.beta is not None else 1.0 + cfg.params.rho
    stats, tail = kolmogorov_diagnostics(
        _FamilyFromConfig(cfg), e.replicates, alpha, beta, build_sample(cfg),
        T=cfg.params.T, workers=workers,
    )
    write_csv(
        os.path.join(out, "diagnostics.csv"), "diagnostics",
        ["replicate", "sup_stat_V", "sup_stat_W"],
        [(i, v, w) for i, (v, w) in enumerate(zip(stats.v_stats, stats.w_stats))],
    )
    verdict = "degenerate" if tail.degenerate else (
        "withheld" if tail.verdict is None else ("gaussian" if tail.verdict else "not-gaussian"))
    write_csv(
        os.path.join(out, "tail_fit.csv"), "tail_fit",
        ["n", "c", "r2_gauss", "r2_exp", "hazard_ratio", "verdict"],
        [(tail.n, tail.c, tail.r2_gauss, tail.r2_exp, tail.hazard_ratio, verdict)],
    )
    return EXIT_OK if verdict in ("gaussian", "degenerate") else EXIT_FAIL


def cmd_schilder(cfg, out, workers=1):
    e = cfg.experiment
    params = cfg.driver_params()
    T = cfg.params.T
    basis = build_basis(cfg)
    sample = build_sample(cfg)
    rows = []

    def row(check, eps, value, reference, tol):
        err = abs(value - reference)
        rows.append((check, eps, value, reference, err, bool(err <= tol)))

    zero = CameronMartinPath(np.linspace(0, T, 9), np.zeros((8, len(basis))), basis.weights)
    row("rate_zero_path", 0.0, rate_function(zero), 0.0, 0.0)
    c = 0.7
    const = CameronMartinPath.constant([c], T)
    row("rate_constant_path", 0.0, rate_function(const), 0.5 * c * c * T, 1e-12)

    field = simulate_brownian_field(basis, T, 2 ** max(e.levels[-1], 6), RngStreams(e.seed).seed(0))
    X = mode_driver(field, params)
    Y = piecewise_linear_lift(field.samples(), dyadic_partition(TimeInterval(0, T, T), e.levels[0]),
                              params)
    base = driver_dist(X, Y, _pairs(T), sample, homogeneous=True)
    for eps in e.eps:
        val = driver_dist(dilate(X, eps), dilate(Y, eps), _pairs(T), sample, homogeneous=True)
        row("homogeneity", eps, val, eps * base, 1e-12 * (1 + base))

    sigma = sigma_gamma(basis, sample)[0]
    rng = RngStreams(e.seed).generator(1)
    violations = 0
    for _ in range(e.replicates):
        h = random_cm_path(rng, len(basis), T, 16, basis.weights)
        grid = h.times
        i, j = sorted(rng.choice(grid.size, 2, replace=False))
        rep = cm_bounds_check(h, grid[i], grid[j], basis, sample, sigma)
        violations += 0 if rep.ok else 1
    row("cm_bound_violations", 0.0, float(violations), 0.0, 0.0)
    write_csv(
        os.path.join(out, "schilder.csv"), "schilder",
        ["check", "eps", "value", "reference", "abs_error", "pass"], rows,
    )
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAIL


def _pairs(T):
    return dyadic_time_pairs(T, 6)


def cmd_ito_check(cfg, out, workers=1):
    e = cfg.experiment
    T = cfg.params.T
    level = e.levels[-1]
    n = 2**level
    times = np.linspace(0.0, T, n + 1)
    sine = ItoFunction(
        lambda t, x: np.sin(x[:, 0]),
        lambda t, x: np.cos(x),
        lambda t, x: -np.sin(x)[:, :, None],
    )
    streams = RngStreams(e.seed)
    rows = []
    errors = []
    for i in range(e.replicates):
        rng = streams.generator(i)
        path = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n) * math.sqrt(T / n))])
        res = ito_reconstruct(sine, times, path, p=cfg.params.p)
        errors.append(res.error)
        rows.append(("sin_brownian", i, res.error))
    square = ItoFunction(
        lambda t, x: np.sum(x * x, axis=1),
        lambda t, x: 2 * x,
        lambda t, x: 2 * np.broadcast_to(np.eye(x.shape[1]), (x.shape[0],) + (x.shape[1],) * 2),
    )
    circle = np.stack([np.cos(times), np.sin(times)], axis=1)
    circ = ito_reconstruct(square, times, circle, p=cfg.params.p)
    rows.append(("square_circle", 0, circ.error))
    write_csv(os.path.join(out, "ito.csv"), "ito", ["case", "replicate", "error"], rows)
    med = float(np.median(errors))
    ok = med <= 1e-3 and circ.error <= 1e-12
    write_csv(os.path.join(out, "ito_summary.csv"), "ito_summary",
              ["level", "median_error", "circle_error", "pass"], [(level, med, circ.error, ok)])
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "flow-solve": cmd_flow_solve,
    "wong-zakai": cmd_wong_zakai,
    "diagnostics": cmd_diagnostics,
    "schilder": cmd_schilder,
    "ito-check": cmd_ito_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="roughflows", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    return parser


def resolve(cfg, args):
    """Apply ``--seed`` and the output-directory overrides; returns a new config."""
    data = cfg.model_dump()
    if args.seed is not None:
        data["experiment"]["seed"] = args.seed
    out = args.out or os.environ.get("ROUGHFLOWS_OUT") or data["output"]["directory"]
    data["output"]["directory"] = out
    return type(cfg).model_validate(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(load_config(args.config), args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "resolved_config.yaml"), "w") as fh:
        fh.write(cfg.to_yaml())
    try:
        code = COMMANDS[args.command](cfg, out, max(1, args.workers))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    print(f"{args.command}: {'pass' if code == EXIT_OK else 'fail'} (outputs in {out})")
    return code


if __name__ == "__main__":
    sys.exit(main())
