"""Command line: ``ldpkatz {inspect,exact,estimate,sweep,bounds}``.

Every command that writes to ``--out`` also writes ``manifest.txt`` (key=value)
holding the fully resolved settings; passing it back with ``--config`` reruns
the command with identical output. Flags given on the command line override
the config file.

Exit codes: 0 ok, 2 parse/IO error, 3 precondition error, 4 divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SWEEP_COLUMNS, bound_report, sweep
from .exact import exact_katz_iterative, exact_katz_solve, true_katz, SOLVE_MAX_NODES
from .graph import EdgeListParseError, Graph, degree_profile, load_edge_list, max_eigenvalue, select_clipping_params
from .protocol import ProtocolConfig, run_protocol

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_DIVERGED = 4

DEFAULTS = {
    "alpha_frac": 0.85,
    "epsilon": 1.0,
    "steps": 5,
    "seed": 0,
    "trials": 100,
    "topk": "10,100",
    "no_clip": False,
    "noise_free": False,
    "solve": False,
}

# keys that describe the run but are not flags
_MANIFEST_ONLY = {"command", "graph_sha256", "version", "lambda_max"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_PARSE) from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value", EXIT_PARSE)
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _coerce(key: str, value: str):
    if key in ("no_clip", "noise_free", "solve"):
        return value in ("True", "true", "1", "yes")
    if key in ("steps", "seed", "trials", "step", "high_degree_count"):
        return int(value)
    if key in ("alpha", "alpha_frac", "clip", "epsilon", "max_degree"):
        return float(value)
    if value == "None":
        return None
    return value


def _resolve(args: argparse.Namespace) -> dict:
    """Merge command-line flags over the config file over built-in defaults."""
    cli = {k: v for k, v in vars(args).items() if v is not None and k not in ("func", "config")}
    conf = {}
    if args.config:
        conf = {k: _coerce(k, v) for k, v in _read_config(args.config).items() if k not in _MANIFEST_ONLY}
        if conf.get("command", args.command) != args.command:
            conf = {}
    if "alpha_frac" in cli:
        conf.pop("alpha", None)
    if "clip" in cli:
        conf.pop("no_clip", None)
    merged = {**DEFAULTS, **conf, **cli}
    return merged


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _load(path) -> Graph:
    if not path:
        raise CliError("--graph is required", EXIT_PARSE)
    try:
        g = load_edge_list(path)
    except EdgeListParseError as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    except OSError as exc:
        raise CliError(f"{path}: {exc}", EXIT_PARSE) from exc
    st = g.load_stats
    if st.asymmetric:
        print(f"warning: symmetrized {st.asymmetric} one-directional edge(s) from {path}", file=sys.stderr)
    return g


def _lambda(g: Graph) -> float:
    return max_eigenvalue(g) if g.m else 0.0


def _alpha(opts, lam) -> float:
    if opts.get("alpha") is not None:
        return float(opts["alpha"])
    if lam <= 0:
        raise CliError("graph has no edges; pass --alpha explicitly", EXIT_PRECONDITION)
    return float(opts["alpha_frac"]) / lam


def _write_manifest(out: Path, command: str, opts: dict, graph_path=None, extra=None) -> None:
    lines = {"command": command, "version": __version__}
    if graph_path:
        lines["graph_sha256"] = _sha256(graph_path)
    lines.update(extra or {})
    for k, v in sorted(opts.items()):
        if k in ("command",) or v is None:
            continue
        lines[k] = v
    text = "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in lines.items())
    (out / "manifest.txt").write_text(text, encoding="utf-8")


def _out_dir(opts) -> Path | None:
    if not opts.get("out"):
        return None
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_inspect(opts) -> int:
    g = _load(opts.get("graph"))
    prof = degree_profile(g)
    lam = _lambda(g)
    cp = select_clipping_params(prof)
    report = {
        "n": g.n,
        "m": g.m,
        "avg_degree": prof.avg_degree,
        "max_degree": prof.max_degree,
        "lambda_max": lam,
        "clip_X": cp.X,
        "clip_d": cp.d,
        "clip_N": cp.N,
        "self_loops_dropped": g.load_stats.self_loops,
        "duplicates_dropped": g.load_stats.duplicates,
        "asymmetric_symmetrized": g.load_stats.asymmetric,
    }
    text = "".join(f"{k}: {v:.6f}\n" if isinstance(v, float) else f"{k}: {v}\n" for k, v in report.items())
    sys.stdout.write(text)
    out = _out_dir(opts)
    if out:
        (out / "inspect.txt").write_text(text, encoding="utf-8")
        _write_manifest(out, "inspect", {"graph": opts["graph"]}, opts["graph"])
    return EXIT_OK


def cmd_exact(opts) -> int:
    g = _load(opts.get("graph"))
    lam = _lambda(g)
    alpha = _alpha(opts, lam)
    if opts.get("solve"):
        if g.n > SOLVE_MAX_NODES:
            raise CliError(f"--solve is limited to n <= {SOLVE_MAX_NODES} (n={g.n}); drop --solve to iterate",
                           EXIT_PRECONDITION)
        vec = exact_katz_solve(g, alpha)
        steps = None
    else:
        steps = opts.get("steps_explicit")
        vec = exact_katz_iterative(g, alpha, steps) if steps else true_katz(g, alpha, lam)
        steps = vec.steps
    out = _out_dir(opts)
    if out is None:
        raise CliError("--out is required", EXIT_PARSE)
    vec.to_csv(out / "katz.csv")
    resolved = {"graph": opts["graph"], "alpha": alpha, "solve": bool(opts.get("solve"))}
    if steps is not None:
        resolved["steps"] = steps
    _write_manifest(out, "exact", resolved, opts["graph"])
    print(f"wrote {out / 'katz.csv'}")
    return EXIT_OK


def _protocol_config(opts, g, lam) -> ProtocolConfig:
    alpha = _alpha(opts, lam)
    X = opts.get("clip")
    if X is None:
        X = lam if lam > 0 else 1.0
    return ProtocolConfig(
        alpha=alpha,
        X=float(X),
        epsilon=float(opts["epsilon"]),
        S=int(opts["steps"]),
        clipping=not opts.get("no_clip"),
        seed=int(opts["seed"]),
        noise_free=bool(opts.get("noise_free")),
    )


def cmd_estimate(opts) -> int:
    g = _load(opts.get("graph"))
    lam = _lambda(g)
    cfg = _protocol_config(opts, g, lam)
    out = _out_dir(opts)
    if out is None:
        raise CliError("--out is required", EXIT_PARSE)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        run = run_protocol(g, cfg)
    run.save(out)
    resolved = {
        "graph": opts["graph"], "alpha": cfg.alpha, "clip": cfg.X, "no_clip": not cfg.clipping,
        "epsilon": cfg.epsilon, "steps": cfg.S, "seed": cfg.seed, "noise_free": cfg.noise_free,
    }
    _write_manifest(out, "estimate", resolved, opts["graph"])
    if cfg.noise_free:
        print("warning: --noise-free output is NOT differentially private", file=sys.stderr)
    if run.diverged:
        print(f"run diverged at round {run.diverged_round}; partial trace in {out}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"wrote {out}")
    return EXIT_OK


def _parse_steps_range(text: str) -> list[int]:
    try:
        a, b = text.split("..")
        lo, hi = int(a), int(b)
    except ValueError:
        raise CliError(f"--sweep-steps expects A..B, got {text!r}", EXIT_PARSE) from None
    if lo < 1 or hi < lo:
        raise CliError("--sweep-steps needs 1 <= A <= B", EXIT_PRECONDITION)
    return list(range(lo, hi + 1))


def _parse_clip_range(text: str) -> list[float]:
    """``A..B:N`` -> N geometrically spaced multiples of lambda_max from A to B."""
    try:
        rng, count = text.split(":")
        a, b = rng.split("..")
        lo, hi, n = float(a), float(b), int(count)
    except ValueError:
        raise CliError(f"--sweep-clip expects A..B:N, got {text!r}", EXIT_PARSE) from None
    if lo <= 0 or hi < lo or n < 1:
        raise CliError("--sweep-clip needs 0 < A <= B and N >= 1", EXIT_PRECONDITION)
    if n == 1:
        return [lo]
    return [float(x) for x in np.geomspace(lo, hi, n)]


def cmd_sweep(opts) -> int:
    if opts.get("noise_free"):
        raise CliError("--noise-free cannot be combined with a sweep", EXIT_PRECONDITION)
    steps_spec, clip_spec = opts.get("sweep_steps"), opts.get("sweep_clip")
    if bool(steps_spec) == bool(clip_spec):
        raise CliError("give exactly one of --sweep-steps or --sweep-clip", EXIT_PARSE)
    if int(opts["trials"]) < 2:
        raise CliError("--trials must be at least 2", EXIT_PRECONDITION)
    g = _load(opts.get("graph"))
    lam = _lambda(g)
    base = _protocol_config(opts, g, lam)
    prof = degree_profile(g)
    ks = [int(k) for k in str(opts["topk"]).split(",") if k.strip()]
    if steps_spec:
        param, values = "S", _parse_steps_range(steps_spec)
    else:
        param = "X"
        values = [m * lam for m in _parse_clip_range(clip_spec)]
    out = _out_dir(opts)
    if out is None:
        raise CliError("--out is required", EXIT_PARSE)
    exact = true_katz(g, base.alpha, lam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rows = list(sweep(g, base, param, values, int(opts["trials"]), exact, prof, ks))
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
    resolved = {
        "graph": opts["graph"], "alpha": base.alpha, "clip": base.X, "epsilon": base.epsilon,
        "steps": base.S, "seed": base.seed, "trials": int(opts["trials"]), "topk": opts["topk"],
        "sweep_steps": steps_spec, "sweep_clip": clip_spec,
    }
    _write_manifest(out, "sweep", resolved, opts["graph"], {"lambda_max": lam})
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_bounds(opts) -> int:
    D, N, X = opts.get("max_degree"), opts.get("high_degree_count"), opts.get("clip")
    if opts.get("graph"):
        g = _load(opts["graph"])
        prof = degree_profile(g)
        cp = select_clipping_params(prof)
        D = prof.max_degree if D is None else D
        X = cp.X if X is None else X
        N = cp.N if N is None else N
    missing = [f for f, v in (("--max-degree", D), ("--clip", X), ("--high-degree-count", N),
                              ("--alpha", opts.get("alpha"))) if v is None]
    if missing:
        raise CliError("missing " + ", ".join(missing), EXIT_PARSE)
    i = int(opts.get("step") or 1)
    try:
        rep = bound_report(float(D), float(X), float(N), float(opts["alpha"]), int(opts["steps"]),
                           float(opts["epsilon"]), i)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    for c, v in zip(rep.COLUMNS, rep.row()):
        print(f"{c}: {v}")
    out = _out_dir(opts)
    if out:
        rep.to_csv(out / "bounds.csv")
        resolved = {"max_degree": float(D), "clip": float(X), "high_degree_count": int(N),
                    "alpha": float(opts["alpha"]), "steps": int(opts["steps"]),
                    "epsilon": float(opts["epsilon"]), "step": i}
        _write_manifest(out, "bounds", resolved)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ldpkatz", description="Katz centrality under edge local differential privacy.",
                                epilog="exit codes: 0 ok, 2 parse/IO error, 3 precondition error, 4 divergence")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--graph", metavar="PATH", help="SNAP-style edge list")
        sp.add_argument("--config", metavar="PATH", help="key=value file, e.g. a previous manifest.txt")
        sp.add_argument("--out", metavar="DIR")

    def model(sp):
        sp.add_argument("--alpha", type=float, metavar="R")
        sp.add_argument("--alpha-frac", type=float, metavar="R", help="alpha = R / lambda_max (default 0.85)")
        sp.add_argument("--epsilon", type=float, metavar="R", help="privacy budget (default 1)")
        sp.add_argument("--steps", type=int, metavar="S", help="protocol rounds (default 5)")

    def clip(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--clip", type=float, metavar="X", help="clipping factor (default lambda_max)")
        g.add_argument("--no-clip", action="store_const", const=True, default=None)

    sp = sub.add_parser("inspect", help="graph statistics and clipping parameters")
    common(sp)
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("exact", help="exact Katz centrality to CSV")
    common(sp)
    sp.add_argument("--alpha", type=float, metavar="R")
    sp.add_argument("--alpha-frac", type=float, metavar="R")
    sp.add_argument("--steps", type=int, metavar="S", dest="steps_explicit",
                    help="truncation horizon (default: until the tail is below 1e-10)")
    sp.add_argument("--solve", action="store_const", const=True, default=None, help="dense linear solve")
    sp.set_defaults(func=cmd_exact)

    sp = sub.add_parser("estimate", help="one private protocol run")
    common(sp)
    model(sp)
    clip(sp)
    sp.add_argument("--seed", type=int, metavar="U64")
    sp.add_argument("--noise-free", action="store_const", const=True, default=None,
                    help="debug only: no noise, output is NOT private")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("sweep", help="Monte-Carlo sweep over S or X, long-format CSV")
    common(sp)
    model(sp)
    clip(sp)
    sp.add_argument("--seed", type=int, metavar="U64")
    sp.add_argument("--trials", type=int, metavar="T")
    sp.add_argument("--topk", metavar="K,K", help='comma-separated k values (default "10,100")')
    sp.add_argument("--sweep-steps", metavar="A..B")
    sp.add_argument("--sweep-clip", metavar="A..B:N", help="N multiples of lambda_max, geometric from A to B")
    sp.add_argument("--noise-free", action="store_const", const=True, default=None, help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bounds", help="closed-form bias/variance bounds")
    common(sp)
    model(sp)
    sp.add_argument("--max-degree", type=float, metavar="D")
    sp.add_argument("--clip", type=float, metavar="X")
    sp.add_argument("--high-degree-count", type=int, metavar="N")
    sp.add_argument("--step", type=int, metavar="I", help="walk length for the path bounds (default 1)")
    sp.set_defaults(func=cmd_bounds)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = _resolve(args)
        if args.command == "exact" and "steps" in opts and "steps_explicit" not in opts and args.config:
            # a manifest records the horizon as "steps"
            conf = _read_config(args.config)
            if "steps" in conf:
                opts["steps_explicit"] = int(conf["steps"])
        return args.func(opts)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
