"""Command-line entry point.

Exit codes: 0 success, 1 verification failed, 2 bad input.
"""
import argparse
import json
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import __version__
from .activation import ActivationSpec, min_delta
from .constructor import (
    ConstructionError,
    construct,
    network_from_dict,
    network_to_dict,
    pair_planes,
    verify_separation,
)
from .dataio import DataError, load_csv, load_idx, split_binary
from .decomposition import estimate_decomposition, validate_decomposition
from .geometry import diameter
from .trainer import TrainConfig, size_sweep, write_sweep_csv

REPORT_SCHEMA = 1
ALL_ACTIVATIONS = ("sigmoid", "tanh", "relu", "leaky_relu")
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _add_data_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--csv", help="CSV file with one label column")
    g.add_argument("--label-col", help="label column name (or zero-based index)")
    g.add_argument("--idx", help="IDX image and label files, comma separated")
    g.add_argument("--labels", help="the two labels to compare, comma separated (class 1 first)")
    g.add_argument("--raw", action="store_true", help="keep IDX pixels in 0..255")


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def _load(args):
    if bool(args.csv) == bool(args.idx):
        raise InputError("give exactly one of --csv or --idx")
    wanted = args.labels.split(",") if args.labels else None
    if wanted is not None and len(wanted) != 2:
        raise InputError("--labels needs exactly two labels")
    if args.csv:
        if args.label_col is None:
            raise InputError("--csv needs --label-col")
        d = load_csv(args.csv, args.label_col)
    else:
        paths = args.idx.split(",")
        if len(paths) != 2:
            raise InputError("--idx needs IMAGES,LABELS")
        if wanted is None:
            raise InputError("--idx needs --labels")
        try:
            keep = [int(x) for x in wanted]
        except ValueError:
            raise InputError("IDX labels must be integers") from None
        d = load_idx(paths[0], paths[1], keep, raw=args.raw)
    if wanted is None:
        if len(d.label_universe) != 2:
            raise InputError(
                f"dataset has {len(d.label_universe)} labels; pick two with --labels")
        wanted = list(d.label_universe)
    X1, X2 = split_binary(d, wanted[0], wanted[1])
    inputs = {"csv": args.csv, "label_col": args.label_col, "idx": args.idx,
              "labels": [str(w) for w in wanted], "raw": bool(args.raw),
              "n_1": len(X1), "n_2": len(X2), "dim": int(X1.shape[1])}
    return X1, X2, inputs


@contextmanager
def _timed(timings, key):
    t = time.perf_counter()
    yield
    timings[key] = round(1000 * (time.perf_counter() - t), 3)


def _report(args, inputs, **extra):
    rep = {"schema_version": REPORT_SCHEMA, "version": __version__,
           "command": args.command, "seed": args.seed, "inputs": inputs}
    rep.update(extra)
    return rep


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)


def _decompose(X1, X2, args, timings):
    with _timed(timings, "decompose"):
        D = estimate_decomposition(X1, X2, n_projections=getattr(args, "projections", None),
                                   seed=args.seed)
    with _timed(timings, "validate"):
        V = validate_decomposition(D, n_jobs=args.threads)
    summary = {"L1": D.L1, "L2": D.L2, "valid": V.valid, "min_distance": V.min_distance,
               "peel_iterations": D.peel_iterations, "projections": D.projections_used}
    return D, V, summary


def cmd_decompose(args):
    X1, X2, inputs = _load(args)
    timings = {}
    _, V, summary = _decompose(X1, X2, args, timings)
    print(f"L1={summary['L1']} L2={summary['L2']} valid={str(V.valid).lower()} "
          f"min_distance={V.min_distance:.6g}")
    if args.out:
        _write_json(args.out, _report(args, inputs, decomposition=summary, timings_ms=timings))
    return EXIT_OK if V.valid else EXIT_FAIL


def _activations(names):
    return [ActivationSpec.parse(n) for n in names]


def cmd_delta(args):
    X1, X2, inputs = _load(args)
    timings = {}
    _, V, summary = _decompose(X1, X2, args, timings)
    L1 = L2 = args.L
    if args.L is None:
        L1, L2 = summary["L1"], summary["L2"]
    with _timed(timings, "diameter"):
        diam = diameter(np.vstack([X1, X2]))
    table = {}
    for a in _activations(args.activation or ALL_ACTIVATIONS):
        D = diam if a.kind == "leaky_relu" else None
        table[str(a)] = {"layer1": min_delta(a, L2, D), "layer2": min_delta(a, L1, D)}
    print(f"raw delta (min distance between part hulls) = {V.min_distance:.6g}")
    print(f"L1={L1} L2={L2} diameter={diam:.6g}")
    for name, row in table.items():
        print(f"  {name:18s} min_delta layer1={row['layer1']:.6g} layer2={row['layer2']:.6g}")
    if args.out:
        _write_json(args.out, _report(args, inputs, decomposition=summary, raw_delta=V.min_distance,
                                      diameter=diam, delta_table=table, timings_ms=timings))
    return EXIT_OK


def _separation_dict(r):
    return {"all_correct": r.all_correct, "misclassified": r.misclassified,
            "final_hull_distance": r.final_hull_distance,
            "epsilon_1": r.epsilon_1, "epsilon_2": r.epsilon_2,
            "delta_used_1": r.delta_used_1, "delta_used_2": r.delta_used_2}


def cmd_construct(args):
    X1, X2, inputs = _load(args)
    a = ActivationSpec.parse(args.activation)
    timings = {}
    D, V, summary = _decompose(X1, X2, args, timings)
    if not V.valid:
        print("decomposition is not valid; cannot construct", file=sys.stderr)
        return EXIT_FAIL
    with _timed(timings, "construct"):
        planes = pair_planes(D, args.threads)
        net = construct(X1, X2, D, a, planes=planes, n_jobs=args.threads)
    with _timed(timings, "verify"):
        rep = verify_separation(net, X1, X2)
    h1, h2 = net.sizes
    print(f"{a}: hidden sizes {h1}+{h2}, all_correct={str(rep.all_correct).lower()}, "
          f"final hull distance {rep.final_hull_distance:.6g}")
    if args.out:
        _write_json(args.out, network_to_dict(net, inputs["labels"]))
    if args.report:
        _write_json(args.report, _report(args, inputs, decomposition=summary,
                                         construction=_separation_dict(rep),
                                         layer2_mode=net.layer2_mode, timings_ms=timings))
    return EXIT_OK if rep.all_correct else EXIT_FAIL


def cmd_verify(args):
    X1, X2, inputs = _load(args)
    try:
        with open(args.net) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read network {args.net}: {exc}") from exc
    net = network_from_dict(doc)
    if X1.shape[1] != net.layer1.in_dim:
        raise InputError(f"dataset dimension {X1.shape[1]} does not match network input "
                         f"{net.layer1.in_dim}")
    timings = {}
    with _timed(timings, "verify"):
        rep = verify_separation(net, X1, X2)
    print(f"all_correct={str(rep.all_correct).lower()} misclassified={len(rep.misclassified)}")
    if args.report:
        _write_json(args.report, _report(args, inputs, construction=_separation_dict(rep),
                                         timings_ms=timings))
    return EXIT_OK if rep.all_correct else EXIT_FAIL


def _sizes(text):
    out = []
    for tok in text.split(","):
        try:
            h1, h2 = tok.lower().split("x")
            out.append((int(h1), int(h2)))
        except ValueError:
            raise InputError(f"bad size {tok!r}; expected H1xH2") from None
    return out


def cmd_train(args):
    X1, X2, inputs = _load(args)
    X = np.vstack([X1, X2])
    y = np.r_[np.zeros(len(X1), int), np.ones(len(X2), int)]
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, runs=args.runs,
                      learning_rate=args.lr, seed=args.seed)
    timings = {}
    with _timed(timings, "train"):
        rows = size_sweep(X, y, _sizes(args.sizes), _activations(args.activations.split(",")),
                          cfg, n_jobs=args.threads)
    for r in rows:
        print(f"{r['h1']:>3}x{r['h2']:<3} {r['activation']:18s} loss={r['final_loss']:.5f} "
              f"acc={r['accuracy']:.4f}")
    if args.out:
        write_sweep_csv(rows, args.out)
    if args.report:
        _write_json(args.report, _report(args, inputs, sweep=rows, timings_ms=timings))
    return EXIT_FAIL if any(r["error"] for r in rows) else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hullnet", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("decompose", help="estimate and validate a hull decomposition")
    _add_data_args(s)
    _add_common(s)
    s.add_argument("--projections", type=int, default=None)
    s.add_argument("--out", help="JSON report path")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("delta", help="raw inter-hull gap and minimal margins per activation")
    _add_data_args(s)
    _add_common(s)
    s.add_argument("--activation", action="append",
                   help="activation (repeatable); default all four")
    s.add_argument("--L", type=int, default=None, help="part count to use instead of estimating")
    s.add_argument("--out", help="JSON report path")
    s.set_defaults(func=cmd_delta)

    s = sub.add_parser("construct", help="build and verify a separating network")
    _add_data_args(s)
    _add_common(s)
    s.add_argument("--activation", default="relu")
    s.add_argument("--out", help="network JSON path")
    s.add_argument("--report", help="JSON run report path")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("verify", help="check a saved network against a dataset")
    s.add_argument("net", help="network JSON written by construct")
    _add_data_args(s)
    _add_common(s)
    s.add_argument("--report", help="JSON run report path")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("train", help="SGD loss sweep over hidden sizes")
    _add_data_args(s)
    _add_common(s)
    s.add_argument("--sizes", default="1x1,4x2,9x3,16x4,25x5,36x6")
    s.add_argument("--activations", default=",".join(ALL_ACTIVATIONS))
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--batch", type=int, default=150)
    s.add_argument("--runs", type=int, default=3)
    s.add_argument("--lr", type=float, default=0.05)
    s.add_argument("--out", help="sweep CSV path")
    s.add_argument("--report", help="JSON run report path")
    s.set_defaults(func=cmd_train)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
