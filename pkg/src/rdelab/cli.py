"""Command-line front end.

Every subcommand resolves its parameters from built-in defaults, then an
optional TOML file (``--config``; keys at top level or in a table named after
the subcommand), then explicit flags, then ``--set key=value`` overrides.
Artifacts are JSON (plus CSV series next to them) and embed the resolved
configuration; they carry no timings or timestamps, so the same config gives
byte-identical files.

Exit codes: 0 pass, 1 numeric failure or failed check, 2 configuration error.
"""
import argparse
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class ConfigError(Exception):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).split(",") if v.strip()]


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: %r" % v)


def _opt_float(v):
    return None if v is None or str(v).lower() in ("none", "") else float(v)


def _opt_ints(v):
    return None if v is None or str(v).lower() in ("none", "") else _ints(v)


_MODEL = {
    "model": (str, "diamond"),
    "graph": (str, None),
    "sigma": (float, 0.5),
    "method": (str, "quadrature"),
    "samples": (int, 10 ** 6),
    "q": (float, 2.0),
    "k": (int, 1),
    "seed": (int, 0),
}

SCHEMAS = {
    "assumptions": dict(_MODEL, a_ladder=(_opt_ints, None)),
    "solve-metric": dict(_MODEL, tol=(float, 1e-6), max_iter=(int, 200)),
    "solve-cavity": {"q": (float, 2.0), "k": (int, 1), "cutoff": (float, 6.0),
                     "tol": (float, 1e-8), "grid": (str, "-30,30,0.005"), "seed": (int, 0)},
    "critical-drift": {"graph": (str, "diamond"), "sigma": (float, 0.0),
                       "bracket": (_floats, [-1.5, 0.5]), "cutoff": (float, 10.0),
                       "tol_s": (float, 1e-3), "samples": (int, 0), "seed": (int, 0)},
    "cascade": {"graph": (str, "diamond"), "sigma": (float, 0.5), "drift": (_opt_float, None),
                "level": (int, 8), "samples": (int, 10 ** 6), "seed": (int, 0)},
    "blocks": dict(_MODEL, delta=(float, 0.2), delta_prime=(float, 0.05), epsilon=(float, 0.05)),
    "schedule": dict(_MODEL, delta0=(float, 0.8), epsilon1=(float, 0.1), blocks=(int, 3),
                     ratio=(float, 0.5), min_block_size=(int, 1),
                     check_preconditions=(_bool, True)),
    "endogeny": dict(_MODEL, schedule=(str, None), trees=(int, 200), depths=(_opt_ints, None),
                     tol=(float, 0.05), pool=(int, 20000),
                     bivariate_depths=(_opt_ints, None)),
}

_HELP = {
    "assumptions": "check A1, A2, A4, A5/A6 and A7 for a model",
    "solve-metric": "stationary measure and critical drift of a cascade",
    "solve-cavity": "solve the cavity equation",
    "critical-drift": "bisection for the critical drift of a cascade",
    "cascade": "simulate the level-n cascade",
    "blocks": "build and certify one cut-off block",
    "schedule": "build a schedule of certified blocks",
    "endogeny": "sandwich test (and optional bivariate test) on a schedule",
}


def _load_toml(path):
    try:
        import tomllib
    except ImportError:          # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))


def resolve_config(command, config_file=None, flags=None, overrides=()):
    schema = SCHEMAS[command]
    raw = {k: d for k, (_, d) in schema.items()}
    layers = []
    if config_file:
        data = _load_toml(config_file)
        table = data.get(command, {})
        top = {k: v for k, v in data.items() if not isinstance(v, dict)}
        if "command" in top:
            if top.pop("command") != command:
                raise ConfigError("config is for a different command")
        layers += [top, table]
    layers.append({k: v for k, v in (flags or {}).items() if v is not None})
    ov = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError("--set expects key=value, got %r" % item)
        k, v = item.split("=", 1)
        ov[k.strip().replace("-", "_")] = v.strip()
    layers.append(ov)
    for layer in layers:
        for k, v in layer.items():
            k = k.replace("-", "_")
            if k not in schema:
                raise ConfigError("unknown key %r for %s" % (k, command))
            raw[k] = v
    out = {}
    for k, (conv, default) in schema.items():
        v = raw[k]
        try:
            out[k] = v if v is None else conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad value for %s: %s" % (k, exc))
    return out


def _parse_grid(text):
    from .measure import Grid
    try:
        lo, hi, h = (float(v) for v in str(text).split(","))
        return Grid(lo, hi, h)
    except ValueError as exc:
        raise ConfigError("grid must be 'min,max,step': %s" % exc)


# -- model construction -----------------------------------------------------


def _metric_model(cfg):
    from .hiergraph import critical_model, load_graph
    graph = load_graph(cfg.get("graph") or cfg["model"])
    if cfg["method"] not in ("quadrature", "mc"):
        raise ConfigError("method must be 'quadrature' or 'mc'")
    return critical_model(graph, cfg["sigma"], method=cfg["method"], n_mc=cfg["samples"],
                          seed=cfg["seed"])


def _model(cfg):
    if cfg["model"] == "cavity":
        from .cavity import solved_model
        return solved_model(cfg["q"], cfg["k"])
    try:
        return _metric_model(cfg)
    except (KeyError, FileNotFoundError) as exc:
        raise ConfigError("unknown model or graph: %s" % exc)


# -- handlers: each returns (artifact dict, csv text or None, passed) --------


def cmd_assumptions(cfg):
    from .rde import check_assumptions
    model, mu = _model(cfg)
    kw = {}
    if cfg["a_ladder"] is not None:
        kw["a_ladder"] = [float(a) for a in cfg["a_ladder"]]
    rep = check_assumptions(model, mu, seed=cfg["seed"], **kw)
    return {"report": rep.to_dict(), "model": model.describe()}, None, rep.passed


def cmd_solve_metric(cfg):
    from .hiergraph import load_graph, solve_metric
    try:
        graph = load_graph(cfg.get("graph") or cfg["model"])
    except (KeyError, FileNotFoundError) as exc:
        raise ConfigError("unknown graph: %s" % exc)
    s, mu, info = solve_metric(graph, cfg["sigma"], method=cfg["method"], n_mc=cfg["samples"],
                               tol=cfg["tol"], max_iter=cfg["max_iter"], seed=cfg["seed"])
    from .jsonio import csv_text
    art = {"s_cr": s, "measure": mu.to_dict(), "info": info, "tolerance": cfg["tol"]}
    return art, csv_text(["x", "F"], [mu.x, mu.cdf]), True


def cmd_solve_cavity(cfg):
    from .cavity import CavityParams, fit_lower_envelope, fit_upper_envelope, logistic_tail
    from .cavity import solve_cavity
    from .jsonio import csv_text
    import numpy as np
    grid = _parse_grid(cfg["grid"])
    params = CavityParams(cfg["q"], cfg["k"], grid=grid)
    mu, info = solve_cavity(params, a=cfg["cutoff"], tol=cfg["tol"], return_info=True)
    f = np.asarray(mu.tail)
    art = {"params": params.to_dict(), "iterations": info["iterations"],
           "d_weighted_trace": info["symmetrise_trace"], "cut_phase": info["cut_traces"],
           "anneal": info["anneal"], "residual_sup": info["residual_sup"],
           "tolerance": cfg["tol"], "certified_constants": {"C_q": params.C_q}}
    if params.q > 1:
        art["certified_constants"]["upper_envelope_C"] = fit_upper_envelope(f, params)[0]
        art["certified_constants"]["lower_envelope_C"] = fit_lower_envelope(f, params)[0]
    if params.q == 1 and params.k == 1:
        art["logistic_residual_sup"] = float(np.max(np.abs(f - logistic_tail(mu.x))))
    return art, csv_text(["x", "f"], [mu.x, f]), True


def cmd_critical_drift(cfg):
    from .hiergraph import find_critical_drift, load_graph
    try:
        graph = load_graph(cfg["graph"])
    except (KeyError, FileNotFoundError) as exc:
        raise ConfigError("unknown graph: %s" % exc)
    if len(cfg["bracket"]) != 2:
        raise ConfigError("bracket needs two values")
    s, trace = find_critical_drift(graph, cfg["sigma"], tuple(cfg["bracket"]), a=cfg["cutoff"],
                                   tol_s=cfg["tol_s"], seed=cfg["seed"],
                                   n_samples=cfg["samples"] or None, return_trace=True)
    return {"s_critical": s, "trace": [list(t) for t in trace], "tolerance": cfg["tol_s"]}, None, True


def cmd_cascade(cfg):
    from .hiergraph import CascadeParams, load_graph, simulate_cascade, solve_metric
    from .jsonio import csv_text
    try:
        graph = load_graph(cfg["graph"])
    except (KeyError, FileNotFoundError) as exc:
        raise ConfigError("unknown graph: %s" % exc)
    drift = cfg["drift"]
    if drift is None:
        drift = solve_metric(graph, cfg["sigma"])[0]
    mu = simulate_cascade(graph, CascadeParams(cfg["sigma"], drift), cfg["level"],
                          n_samples=cfg["samples"], seed=cfg["seed"])
    art = {"drift": drift, "mode": mu.meta["mode"], "median": float(mu.quantile_interp(0.5)),
           "measure": mu.to_dict()}
    return art, csv_text(["x", "F"], [mu.x, mu.cdf]), True


def cmd_blocks(cfg):
    from .rde import BlockSearchParams, build_block
    model, mu = _model(cfg)
    p = BlockSearchParams(cfg["delta"], cfg["delta_prime"], cfg["epsilon"])
    blk, eps_p, info = build_block(model, mu, p, seed=cfg["seed"], return_info=True)
    art = {"block": blk.to_dict(), "epsilon_prime": eps_p, "search": info}
    return art, None, True


def cmd_schedule(cfg):
    from .rde import build_schedule
    model, mu = _model(cfg)
    try:
        s = build_schedule(model, mu, cfg["delta0"], cfg["epsilon1"], cfg["blocks"],
                           seed=cfg["seed"], ratio=cfg["ratio"],
                           check_preconditions=cfg["check_preconditions"],
                           min_block_size=cfg["min_block_size"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    return s.to_dict(), None, True


def cmd_endogeny(cfg):
    from . import jsonio
    from .endogeny import bivariate_test, sandwich_test
    from .rde import CutoffSchedule
    if cfg["model"] not in ("diamond", "cavity") and not cfg.get("graph"):
        raise ConfigError("model must be diamond or cavity")
    if not cfg["schedule"]:
        raise ConfigError("--schedule is required")
    try:
        with open(cfg["schedule"]) as fh:
            sched = CutoffSchedule.from_dict(jsonio.loads(fh.read()))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("cannot read schedule: %s" % exc)
    model, mu = _model(cfg)
    rep = sandwich_test(model, sched, mu, depth_ladder=cfg["depths"], n_trees=cfg["trees"],
                        tol=cfg["tol"], seed=cfg["seed"], pool_size=cfg["pool"])
    art = rep.to_dict()
    if cfg["bivariate_depths"]:
        art["bivariate"] = [{"depth": d, "mean_abs_diff": v} for d, v in
                            bivariate_test(model, mu, cfg["bivariate_depths"], seed=cfg["seed"])]
    return art, None, rep.passed


HANDLERS = {
    "assumptions": cmd_assumptions,
    "solve-metric": cmd_solve_metric,
    "solve-cavity": cmd_solve_cavity,
    "critical-drift": cmd_critical_drift,
    "cascade": cmd_cascade,
    "blocks": cmd_blocks,
    "schedule": cmd_schedule,
    "endogeny": cmd_endogeny,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="rdelab", description="Cut-off method laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=_HELP[name])
        sp.add_argument("--config", help="TOML file with parameters")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a parameter (repeatable)")
        sp.add_argument("--out", help="JSON artifact path (CSV series go next to it)")
        for key in schema:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None)
    return ap


def _apply_threads():
    n = os.environ.get("RDE_LAB_THREADS")
    if n:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, n)


def run(argv=None):
    """Parse, dispatch and write artifacts; returns the exit code."""
    _apply_threads()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    cmd = args.command
    flags = {k: getattr(args, k) for k in SCHEMAS[cmd]}
    from .errors import NumericFailure, RdeLabError
    from . import jsonio
    try:
        cfg = resolve_config(cmd, args.config, flags, args.set)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    try:
        art, csv, passed = HANDLERS[cmd](cfg)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return 1
    except RdeLabError as exc:
        # domain errors raised while building parameters are configuration problems
        kind = "config error" if isinstance(exc, ValueError) else "error"
        print("%s: %s" % (kind, exc), file=sys.stderr)
        return 2 if isinstance(exc, ValueError) else 1
    doc = {"command": cmd, "config": cfg, "seed": cfg.get("seed"), "pass": bool(passed),
           "result": art}
    text = jsonio.dumps(doc)
    if args.out:
        jsonio.write_atomic(args.out, text)
        if csv is not None:
            stem = os.path.splitext(args.out)[0]
            jsonio.write_atomic(stem + ".csv", csv)
    else:
        sys.stdout.write(text)
    if not passed:
        print("check failed: see the artifact", file=sys.stderr)
    return 0 if passed else 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
