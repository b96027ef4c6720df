"""Command-line interface.

Subcommands:

* ``cone convert|verify|adjacency|cliques|project`` -- cone geometry on
  matrices stored as headerless CSV (one row per line)
* ``constraints``  -- emit a preset or spec-built constraint matrix
* ``fit``          -- conic-sparse EM regression, plain or mixed-effect
* ``loglik``       -- marginal log-likelihood of a fitted mixed model
* ``prior-sample`` -- draws from the clique spike-and-slab prior
* ``simulate``     -- the seeded replication study with MSE tables

A JSON config file can preset any hyperparameter; explicit flags override
the file.  Exit status is nonzero on validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import adjacency as adj
from . import em, mixed, prior, shapes, simulation
from .geometry import (DDPair, FacetCone, VertexCone, facet_to_vertex,
                       project_onto_cone, verify_dd_pair, vertex_to_facet)


def _load_matrix(path: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def _save_matrix(path: str | None, mat: np.ndarray) -> None:
    out = sys.stdout if path in (None, "-") else open(path, "w")
    try:
        for row in np.atleast_2d(mat):
            out.write(",".join(f"{v:.12g}" for v in row) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _hyper_from(cfg: dict, args) -> prior.SpikeSlabHyper:
    fields = ("v0", "v1", "a", "b", "alpha_ig", "beta_ig", "phi")
    kwargs = {k: cfg[k] for k in fields if k in cfg}
    for k in fields:
        v = getattr(args, k, None)
        if v is not None:
            kwargs[k] = v
    return prior.SpikeSlabHyper(**kwargs)


def _facet_from_args(args) -> FacetCone:
    a = _load_matrix(args.matrix)
    lin = frozenset(int(i) for i in (args.linearity or []))
    return FacetCone(a, linearity=lin)


def _pair_from_args(args) -> DDPair:
    cone = _facet_from_args(args)
    vertex = facet_to_vertex(cone, reduce=args.reduce)
    return DDPair(cone, vertex)


def cmd_cone(args) -> int:
    if args.cone_cmd == "convert":
        if args.direction == "facet-to-vertex":
            out = facet_to_vertex(_facet_from_args(args), reduce=args.reduce).delta
        else:
            out = vertex_to_facet(VertexCone(_load_matrix(args.matrix))).a
        _save_matrix(args.output, out)
        return 0
    if args.cone_cmd == "verify":
        pair = _pair_from_args(args)
        report = verify_dd_pair(pair)
        print(json.dumps({
            "rays": pair.vertex.n_rays,
            "clean": report.clean,
            "nonneg_violations": report.nonneg_violations,
            "non_extreme_rays": report.non_extreme_rays,
            "redundant_rays": report.redundant_rays,
            "redundant_rows": report.redundant_rows,
        }, indent=2))
        return 0 if report.clean else 1
    if args.cone_cmd == "adjacency":
        graph = adj.build_adjacency_graph(_pair_from_args(args))
        for i, j in sorted(graph.edges):
            print(f"{i},{j}")
        return 0
    if args.cone_cmd == "cliques":
        graph = adj.build_adjacency_graph(_pair_from_args(args))
        for clique in adj.enumerate_maximal_cliques(graph, cap=args.cap):
            print(",".join(map(str, clique)))
        return 0
    if args.cone_cmd == "project":
        vertex = facet_to_vertex(_facet_from_args(args), reduce=args.reduce)
        y = _load_matrix(args.vector).ravel()
        _save_matrix(args.output, project_onto_cone(y, vertex)[None, :])
        return 0
    raise AssertionError(args.cone_cmd)


def cmd_constraints(args) -> int:
    if args.preset:
        cone = shapes.preset(args.preset)
    else:
        spec = _shape_spec_from_file(args.spec)
        cone = shapes.build_constraint_matrix(spec)
    _save_matrix(args.output, cone.a)
    return 0


def _shape_spec_from_file(path: str) -> shapes.ShapeSpec:
    """Spec file: JSON with n, regimes [[shape, lo, hi], ...], equality_rows."""
    with open(path) as fh:
        raw = json.load(fh)
    return shapes.ShapeSpec(
        n=int(raw["n"]),
        regimes=tuple((r[0], int(r[1]), int(r[2])) for r in raw["regimes"]),
        equality_rows=frozenset(raw.get("equality_rows", [])),
    )


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    hyper = _hyper_from(cfg, args)
    em_cfg = em.EmConfig(hyper=hyper,
                         max_iter=args.max_iter or cfg.get("max_iter", 500),
                         rel_tol=args.tol or cfg.get("rel_tol", 1e-6))
    cone = _facet_from_args(args)

    if args.mixed:
        data = mixed.LongDataset.from_csv(args.response)
        mcfg = mixed.MixedConfig(em=em_cfg)
        model, fit_res = mixed.fit_mixed(data, cone, use_spline=args.spline,
                                         config=mcfg)
        mu_hat = model.f_hat
        extra = {"sigma2": model.sigma2,
                 "marginal_loglik": mixed.marginal_loglik(data, model)}
    else:
        y = _load_matrix(args.response).ravel()
        design = mixed.cone_design(cone, cone.ambient_dim, args.spline)
        fit_res = em.fit(y, design.design, design.clique_set, em_cfg)
        mu_hat = fit_res.mu_hat
        extra = {"sigma2": fit_res.state.sigma2}

    report = {
        "converged": bool(fit_res.converged),
        "iterations": int(fit_res.state.iteration),
        "log_posterior": fit_res.state.log_posterior,
        "support": sorted(int(i) for i in
                          np.where(fit_res.state.beta > 1e-8)[0]),
        **extra,
    }
    print(json.dumps(report, indent=2))
    if args.output:
        _save_matrix(args.output, mu_hat[None, :])
    return 0 if fit_res.converged else 1


def cmd_loglik(args) -> int:
    data = mixed.LongDataset.from_csv(args.response)
    cone = _facet_from_args(args) if args.matrix else None
    mcfg = mixed.MixedConfig()
    if cone is not None:
        model, _ = mixed.fit_mixed(data, cone, use_spline=args.spline,
                                   config=mcfg)
    else:
        model = mixed.fit_unrestricted(data, use_spline=args.spline,
                                       config=mcfg)
    print(json.dumps({"marginal_loglik": mixed.marginal_loglik(data, model)}))
    return 0


def cmd_prior_sample(args) -> int:
    cfg = _load_config(args.config)
    hyper = _hyper_from(cfg, args)
    cone = _facet_from_args(args)
    vertex = facet_to_vertex(cone, reduce=args.reduce)
    pair = DDPair(cone, vertex)
    graph = adj.build_adjacency_graph(pair)
    cliques = adj.enumerate_maximal_cliques(graph)
    rng = np.random.default_rng(args.seed)
    rows = []
    for _ in range(args.draws):
        draw = prior.sample_prior_mu(pair, cliques, hyper, rng,
                                     use_mixture=args.mixture)
        rows.append(np.concatenate([[draw.clique_index], draw.b, draw.mu]))
    _save_matrix(args.output, np.array(rows))
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim_cfg = simulation.SimConfig(
        n=args.n or cfg.get("n", 20),
        n_subjects=args.subjects or cfg.get("n_subjects", 100),
        scenario=args.scenario or cfg.get("scenario", "dense"),
        replications=args.replications or cfg.get("replications", 50),
        seed=args.seed if args.seed is not None else cfg.get("seed", 20240),
        kernel_bandwidth=args.bandwidth or cfg.get("kernel_bandwidth", 4.0),
    )
    sigmas = tuple(args.sigmas or cfg.get("sigmas", (1.0, 2.0, 5.0)))

    def progress(sigma, rep):
        if args.verbose:
            print(f"sigma={sigma:g} replication {rep + 1}", file=sys.stderr)

    result = simulation.run_study(sim_cfg, sigmas=sigmas, progress=progress)
    rows = result.as_rows()
    header, body = rows[0], rows[1:]
    widths = [max(len(str(r[c])) for r in rows) for c in range(len(header))]

    def fmt(row):
        return "  ".join(
            (f"{v:.4f}" if isinstance(v, float) else str(v)).ljust(widths[c])
            for c, v in enumerate(row))

    print(fmt(header))
    for row in body:
        print(fmt(row))
    if args.output:
        with open(args.output, "w") as fh:
            for row in rows:
                fh.write(",".join(
                    f"{v:.6g}" if isinstance(v, float) else str(v)
                    for v in row) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conesparse",
                                description="sparse estimation on polyhedral cones")
    sub = p.add_subparsers(dest="command", required=True)

    def add_matrix_opts(sp, vector=False):
        sp.add_argument("--matrix", required=True,
                        help="constraint matrix CSV (headerless)")
        sp.add_argument("--linearity", type=int, nargs="*", default=[],
                        help="row indices treated as equalities (0-based)")
        sp.add_argument("--reduce", action="store_true",
                        help="drop redundant rows instead of failing")
        if vector:
            sp.add_argument("--vector", required=True, help="vector CSV")
        sp.add_argument("--output", "-o", default=None)

    cone = sub.add_parser("cone", help="cone geometry operations")
    cone_sub = cone.add_subparsers(dest="cone_cmd", required=True)
    conv = cone_sub.add_parser("convert")
    conv.add_argument("--direction", choices=["facet-to-vertex",
                                              "vertex-to-facet"],
                      default="facet-to-vertex")
    add_matrix_opts(conv)
    for name in ("verify", "adjacency", "cliques"):
        sp = cone_sub.add_parser(name)
        add_matrix_opts(sp)
        if name == "cliques":
            sp.add_argument("--cap", type=int, default=100_000)
    proj = cone_sub.add_parser("project")
    add_matrix_opts(proj, vector=True)
    cone.set_defaults(func=cmd_cone)

    cons = sub.add_parser("constraints", help="emit constraint matrices")
    group = cons.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=sorted(shapes.PRESETS))
    group.add_argument("--spec", help="JSON shape-spec file")
    cons.add_argument("--output", "-o", default=None)
    cons.set_defaults(func=cmd_constraints)

    def add_hyper_opts(sp):
        sp.add_argument("--config", default=None, help="JSON config file")
        for f in ("v0", "v1", "a", "b", "alpha-ig", "beta-ig", "phi"):
            sp.add_argument(f"--{f}", dest=f.replace("-", "_"), type=float,
                            default=None)

    fit = sub.add_parser("fit", help="conic-sparse EM regression")
    fit.add_argument("--matrix", required=True)
    fit.add_argument("--linearity", type=int, nargs="*", default=[])
    fit.add_argument("--reduce", action="store_true")
    fit.add_argument("--response", required=True,
                     help="response CSV; long format with header for --mixed")
    fit.add_argument("--mixed", action="store_true")
    fit.add_argument("--spline", action="store_true")
    fit.add_argument("--max-iter", type=int, default=None)
    fit.add_argument("--tol", type=float, default=None)
    fit.add_argument("--output", "-o", default=None, help="mu_hat CSV")
    add_hyper_opts(fit)
    fit.set_defaults(func=cmd_fit)

    ll = sub.add_parser("loglik", help="marginal log-likelihood of a fit")
    ll.add_argument("--response", required=True)
    ll.add_argument("--matrix", default=None)
    ll.add_argument("--linearity", type=int, nargs="*", default=[])
    ll.add_argument("--reduce", action="store_true")
    ll.add_argument("--spline", action="store_true")
    ll.set_defaults(func=cmd_loglik)

    ps = sub.add_parser("prior-sample", help="draw from the clique prior")
    add_matrix_opts(ps)
    add_hyper_opts(ps)
    ps.add_argument("--draws", type=int, default=100)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--mixture", action="store_true")
    ps.set_defaults(func=cmd_prior_sample)

    sim = sub.add_parser("simulate", help="run the replication study")
    sim.add_argument("--config", default=None)
    sim.add_argument("--n", type=int, default=None)
    sim.add_argument("--subjects", type=int, default=None)
    sim.add_argument("--scenario", choices=["sparse", "dense"], default=None)
    sim.add_argument("--replications", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--bandwidth", type=float, default=None)
    sim.add_argument("--sigmas", type=float, nargs="*", default=None)
    sim.add_argument("--output", "-o", default=None)
    sim.add_argument("--verbose", "-v", action="store_true")
    sim.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface validation failures as exit codes
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
