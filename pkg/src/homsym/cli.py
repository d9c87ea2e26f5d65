"""Command-line front end: ``homsym <command> ...``.

Exit codes: 0 success (including negative findings such as a failed
positivity test), 2 usage errors and missing files, 3 malformed or
inconsistent data, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .dilation import EIG_TOL, Dilation, DomainError
from .networks import (HomNet, LabeledDataset, homogenize, model_from_dict, model_to_dict,
                       random_features, sample_annulus, train_hom, train_output_layer, DEFAULT_RIDGE)
from .rng import stream, subseed
from .symmetry import KDeltaSampler, SamplerExhausted, SymmetryReport, estimate_degree, identify_generator

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# -- helpers -----------------------------------------------------------------

def _existing(path):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _read_json(path):
    try:
        with open(_existing(path)) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_rows(rows, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def load_model(path):
    try:
        return model_from_dict(_read_json(path))
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


def load_dilation(path, tol=EIG_TOL):
    d = _read_json(path)
    try:
        n = int(d["n"])
        G = np.asarray(d["G"], dtype=float).reshape(n, n)
        P = np.asarray(d.get("P", np.eye(n)), dtype=float).reshape(n, n)
        return Dilation(G, P, tol)
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{path}: invalid dilation ({exc})") from None


def _thread_limit():
    value = os.environ.get("HOMSYM_THREADS")
    if not value:
        return nullcontext()
    try:
        limit = int(value)
    except ValueError:
        raise UsageError(f"HOMSYM_THREADS must be an integer, got {value!r}") from None
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=limit)


# -- commands ----------------------------------------------------------------

def cmd_generate(args):
    from .applications.rigid_body import EXAMPLE_INERTIA, RigidBody

    body = RigidBody(EXAMPLE_INERTIA)
    r1, r2 = args.region
    X = sample_annulus(stream(args.seed, "cli.generate"), args.samples, 6, r1, r2)
    LabeledDataset(X, body(X)).to_csv(args.out)
    print(f"wrote {args.samples} rigid-body samples in [{r1}, {r2}] to {args.out}")
    return EXIT_OK


def cmd_train(args):
    try:
        data = LabeledDataset.from_csv(_existing(args.data))
    except ValueError as exc:
        raise DataError(str(exc)) from None
    n = data.inputs.shape[1]
    A, b = random_features(n, args.n_hidden, stream(args.seed, "cli.features"))
    if args.dilation is None:
        if args.nu is not None:
            raise UsageError("--nu requires --dilation")
        model = train_output_layer(A, b, args.activation, data, args.ridge, seed=args.seed)
    else:
        dil = load_dilation(args.dilation, args.tolerance)
        if dil.n != n:
            raise DataError(f"dilation dimension {dil.n} != data dimension {n}")
        nu = 1.0 if args.nu is None else args.nu
        model = train_hom(A, b, args.activation, dil, nu, data, args.ridge, seed=args.seed)
    resid = data.outputs - model(data.inputs).reshape(data.outputs.shape)
    _write_json(model_to_dict(model), args.out)
    print(f"trained {'hom' if isinstance(model, HomNet) else 'shallow'} model, N={args.n_hidden}, "
          f"{len(data)} samples")
    print(f"training residual: rms {np.sqrt(np.mean(resid**2)):.6g}, max {np.max(np.abs(resid)):.6g}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_homogenize(args):
    model = load_model(args.model)
    if isinstance(model, HomNet):
        raise DataError(f"{args.model} is already homogeneous")
    dil = load_dilation(args.dilation, args.tolerance)
    if dil.n != model.n_inputs:
        raise DataError(f"dilation dimension {dil.n} != model input dimension {model.n_inputs}")
    region = tuple(args.region) if args.region else None
    hnet = homogenize(model, dil, args.nu, region=region)
    _write_json(model_to_dict(hnet), args.out)
    print(f"homogeneous model (nu={args.nu}) written to {args.out}")
    return EXIT_OK


def _identify_degree(args, model):
    if args.dilation is not None:
        dil = load_dilation(args.dilation, args.tolerance)
    elif isinstance(model, HomNet):
        dil = model.dilation
    else:
        raise UsageError("degree mode needs --dilation for a shallow model")
    n_in = model.dilation.n if isinstance(model, HomNet) else model.n_inputs
    if dil.n != n_in:
        raise DataError(f"dilation dimension {dil.n} != model input dimension {n_in}")
    region = tuple(args.region) if args.region else (0.95, 1.05)
    sampler = KDeltaSampler(dil, model, args.delta, args.ln_band, region,
                            subseed(args.seed, "cli.degree"), args.output)
    est = estimate_degree(model, dil, sampler, args.samples)
    config = {"mode": "degree", "samples": args.samples, "delta": args.delta, "ln_band": args.ln_band,
              "region": list(region), "seed": args.seed, "output": args.output}
    report = SymmetryReport(nu_hat=est.nu_hat, positivity_ok=est.positivity_ok, config=config)
    if est.positivity_ok:
        print(f"nu_hat = {est.nu_hat:.6f} from {est.samples_used} samples (spread {est.spread:.3g})")
    else:
        print("positivity test failed: no degree estimate for this dilation")
    return report


def _identify_generator(args, model):
    region = tuple(args.region) if args.region else (0.98, 1.02)
    admissible = "diagonal" if args.diagonal else "full"
    nus = [args.nu] if args.nu is not None else [-1.0, 0.0, 1.0]
    runs = []
    for nu in nus:
        est = identify_generator(model, region, nu, admissible, xi=args.xi, M=args.samples, L=args.boxes,
                                 delta=args.delta, seed=subseed(args.seed, "cli.generator"))
        runs.append({"nu": nu, "G_hat": est.G_hat.tolist(), "objective": est.objective_value,
                     "anti_hurwitz": est.anti_hurwitz, "rank_deficient": est.rank_deficient})
        diag = np.array2string(np.diag(est.G_hat), precision=4)
        print(f"nu={nu:g}: diag(G_hat) = {diag}, objective {est.objective_value:.3e}, "
              f"anti-Hurwitz {est.anti_hurwitz}")
    best = next((r for r in reversed(runs) if r["anti_hurwitz"]), runs[-1])
    config = {"mode": "generator", "admissible": admissible, "samples": args.samples, "boxes": args.boxes,
              "delta": args.delta, "xi": args.xi, "region": list(region), "seed": args.seed}
    return SymmetryReport(G_hat=best["G_hat"], objective=best["objective"],
                          anti_hurwitz=best["anti_hurwitz"], config=config, runs=runs)


def cmd_identify(args):
    model = load_model(args.model)
    if args.samples is None:
        args.samples = 2000 if args.mode == "degree" else 4000
    if args.mode == "degree":
        report = _identify_degree(args, model)
    else:
        report = _identify_generator(args, model)
    report.to_json(args.out)
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_example(args):
    out = _out_dir(args.out)
    if args.name == "table1":
        from .applications.table1 import table1_harness

        rep = table1_harness(args.seed, N=args.n_hidden or 500, M=args.samples or 20000)
        path = out / "table1.csv"
        rep.to_csv(path)
        print(f"nu_eps = {rep.nu_eps:.4f}, diag(G_eps) = {np.array2string(np.diag(rep.G_eps), precision=4)}")
        for row in rep.rows():
            print("  ".join(f"{v[:10]:>10}" for v in row))
    elif args.name == "recognition":
        from .applications.moments import recognition_harness

        rep = recognition_harness(seed=args.seed, n_hidden=args.n_hidden or 8)
        path = out / "recognition.csv"
        _write_rows(rep.rows(), path)
        print(f"train accuracy {rep.train_accuracy:.3f}, zoom accuracy {rep.zoom_accuracy:.3f}, "
              f"noise accuracy {rep.noise_accuracy:.3f}, analytic invariance {rep.analytic_invariant}")
    else:
        from .applications.control_norm import norm_refinement_harness

        rep = norm_refinement_harness(N=args.n_hidden or 10, M=args.samples or 1000, seed=args.seed)
        path = out / "norm_summary.csv"
        _write_rows(rep.summary_rows(), path)
        rep.write_level_lines(out / "norm_levels.csv")
        print(f"explicit norm sup error {rep.explicit_error:.3e}")
        print(f"refined norm sup error  {rep.refined_error:.3e} (N={rep.n_hidden}, "
              f"{rep.improvement:.2f}x better)")
    print(f"outputs written under {out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="homsym", description="Homogeneous neural networks and "
                                     "symmetry identification.", formatter_class=fmt)
    parser.add_argument("--tolerance", type=float, default=EIG_TOL,
                        help="eigenvalue threshold when validating dilations")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=None):
        p.add_argument("--seed", type=int, default=0, help="seed of all random streams")
        p.add_argument("--samples", type=int, default=samples, help="number of samples")

    p = sub.add_parser("generate", help="write a rigid-body dataset as CSV", formatter_class=fmt)
    common(p, 20000)
    p.add_argument("--region", type=float, nargs=2, default=(0.95, 1.05), metavar=("R1", "R2"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a shallow or homogeneous network", formatter_class=fmt)
    p.add_argument("data", help="CSV with columns x1..xn,y1..ym")
    common(p)
    p.add_argument("--n-hidden", type=int, default=500)
    p.add_argument("--ridge", type=float, default=DEFAULT_RIDGE)
    p.add_argument("--activation", choices=("sigmoid", "tanh"), default="sigmoid")
    p.add_argument("--dilation", help="dilation JSON; trains a homogeneous network")
    p.add_argument("--nu", type=float, help="degree of the homogeneous network (default 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("homogenize", help="wrap a shallow model into a homogeneous one",
                       formatter_class=fmt)
    p.add_argument("model")
    p.add_argument("--dilation", required=True, help="dilation JSON {n, G, P}")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--region", type=float, nargs=2, metavar=("R1", "R2"),
                   help="training annulus, recorded in the model file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("identify", help="estimate a degree or a dilation generator", formatter_class=fmt)
    p.add_argument("model")
    p.add_argument("--mode", choices=("degree", "generator"), default="degree")
    common(p)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--ln-band", type=float, default=0.01, help="minimum |ln |x|_d| in degree mode")
    p.add_argument("--region", type=float, nargs=2, metavar=("R1", "R2"),
                   help="sampling annulus (degree 0.95 1.05, generator 0.98 1.02)")
    p.add_argument("--dilation", help="dilation JSON for degree mode")
    p.add_argument("--output", type=int, default=0, help="output component used in degree mode")
    p.add_argument("--nu", type=float, help="generator mode degree; tries -1, 0, 1 when omitted")
    p.add_argument("--diagonal", action="store_true", help="restrict G to diagonal matrices")
    p.add_argument("--xi", type=float, help="regularization weight (1e-6 full, 0 diagonal)")
    p.add_argument("--boxes", type=int, default=1, help="offsets per base point")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("example", help="run a reproduction harness", formatter_class=fmt)
    p.add_argument("name", choices=("table1", "recognition", "norm"))
    common(p)
    p.add_argument("--n-hidden", "--N", dest="n_hidden", type=int,
                   help="hidden width (table1 500, recognition 8, norm 10)")
    p.add_argument("--out", default="homsym-out", help="output directory")
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_limit():
            return args.func(args)
    except UsageError as exc:
        print(f"homsym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    # LinAlgError derives from ValueError, so it is caught first
    except (ArithmeticError, SamplerExhausted, np.linalg.LinAlgError) as exc:
        print(f"homsym: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, DomainError, ValueError) as exc:
        print(f"homsym: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
