"""Command-line interface: ``sweatpp <command> [options]``.

Every command that writes a file also writes ``<output stem>.manifest.json``
next to it, recording the argument vector, the parsed parameters, the seed,
the package version and SHA-256 digests of inputs and outputs. ``sweatpp
replay MANIFEST`` re-runs the recorded command.

Exit status: 0 on success, 1 on a domain error (bad data, failed fit),
2 on a usage error (unknown command or flag, missing option).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import DEFAULT_HEIGHT, DEFAULT_WIDTH, PointPattern, Window, make_regular_quadrature, read_pattern, write_pattern
from .rng import MAX_SEED, seed_rng

logger = logging.getLogger("sweatpp")

DEFAULT_SEED = 1
PARAM_NAMES = {"softcore": ["R", "kappa"], "mixture": ["R", "kappa", "theta"], "generative": ["R", "sigma", "p"]}


class UsageError(Exception):
    """Bad combination of otherwise valid flags."""


# --------------------------------------------------------------------------
# helpers


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest_path(output: Path) -> Path:
    return output.with_name(output.stem + ".manifest.json")


def write_manifest(args, argv, inputs, outputs) -> Path:
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "params": params,
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {str(p): _sha256(Path(p)) for p in inputs if Path(p).is_file()},
        "outputs": {str(p): _sha256(Path(p)) for p in outputs},
    }
    path = manifest_path(Path(outputs[0]))
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _window(args) -> Window | None:
    if args.width is None and args.height is None:
        return None
    if args.width is None or args.height is None:
        raise UsageError("--width and --height must be given together")
    return Window(args.width, args.height)


def _load_pattern(args) -> PointPattern:
    return read_pattern(args.pattern, _window(args))


def _rng(args) -> np.random.Generator:
    return seed_rng(args.seed).root


def _write_sample_csv(path: Path, names, columns) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else int(v) for v in row])
    return path


def read_sample_csv(path, names) -> np.ndarray:
    """Parameter columns ``names`` of a chain or ABC sample CSV."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [n for n in names if n not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing parameter columns {missing}")
        rows = [[float(r[n]) for n in names] for r in reader]
    return np.array(rows, dtype=float).reshape(-1, len(names))


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------
# commands; each returns (inputs, outputs)


def cmd_simulate(args):
    from .generative import GenerativeParams, simulate_generative
    from .sequential import MixtureParams, SoftcoreParams, simulate_mixture, simulate_sequential

    window = Window(args.width, args.height)
    rng = _rng(args)
    if args.model == "generative":
        if args.sigma is None or args.p is None:
            raise UsageError("--model generative needs --R, --sigma and --p")
        params = GenerativeParams(args.R, args.sigma, args.p)
        pattern = simulate_generative(params, window, rng, args.max_failures)
    else:
        if args.n is None or args.kappa is None:
            raise UsageError(f"--model {args.model} needs --n, --R and --kappa")
        if args.model == "softcore":
            pattern = simulate_sequential(args.n, SoftcoreParams(args.R, args.kappa), window, rng)
        else:
            if args.theta is None:
                raise UsageError("--model mixture needs --theta")
            pattern = simulate_mixture(args.n, MixtureParams(args.R, args.kappa, args.theta), window, rng)
    out = write_pattern(pattern, args.output)
    return [], [out]


def cmd_summaries(args):
    from .summaries import UndefinedSummaryError, abc_summaries, estimate_F, estimate_pcf

    pattern = _load_pattern(args)
    out = Path(args.output)
    g = estimate_pcf(pattern)
    F = estimate_F(pattern)
    g_path = g.to_csv(out.with_name(out.stem + ".pcf.csv"))
    F_path = F.to_csv(out.with_name(out.stem + ".F.csv"))
    try:
        s = abc_summaries(pattern)
        triple = {"r1": s.r1, "r2": s.r2, "r3": s.r3}
    except UndefinedSummaryError as exc:
        triple = {"r1": None, "r2": None, "r3": None, "undefined": str(exc)}
    triple.update({"n": pattern.n, "pcf": g_path.name, "F": F_path.name})
    _write_json(out, triple)
    return [args.pattern], [out, g_path, F_path]


def cmd_loglik(args):
    from .sequential import MixtureParams, SoftcoreParams, mixture_loglik, seq_loglik

    pattern = _load_pattern(args)
    quad = make_regular_quadrature(pattern.window, args.quadrature)
    if args.model == "softcore":
        value = seq_loglik(pattern, SoftcoreParams(args.R, args.kappa), quad)
    else:
        if args.theta is None:
            raise UsageError("--model mixture needs --theta")
        value = mixture_loglik(pattern, MixtureParams(args.R, args.kappa, args.theta), quad)
    result = {"loglik": value, "J": len(quad), "n": pattern.n}
    print(json.dumps(result, sort_keys=True))
    if args.output:
        return [args.pattern], [_write_json(Path(args.output), result)]
    return [args.pattern], []


def cmd_fit_mle(args):
    from .inference import fit_mle

    pattern = _load_pattern(args)
    quad = make_regular_quadrature(pattern.window, args.quadrature)
    res = fit_mle(pattern, args.model, quad, theta=args.fix_theta)
    out = _write_json(
        Path(args.output),
        {"model": res.model, "params": res.params, "loglik": res.loglik, "iterations": res.n_iter,
         "converged": res.converged, "J": len(quad)},
    )
    return [args.pattern], [out]


def cmd_fit_bayes(args):
    from .inference import fit_bayes_mixture, mixture_prior

    pattern = _load_pattern(args)
    quad = make_regular_quadrature(pattern.window, args.quadrature)
    prior = mixture_prior()
    chain = fit_bayes_mixture(pattern, quad, prior, args.iterations, args.burn_in, _rng(args))
    cols = [chain.draws[:, j] for j in range(chain.draws.shape[1])]
    out = _write_sample_csv(
        Path(args.output), chain.names + ["log_posterior", "accepted"], cols + [chain.log_posterior, chain.accepted]
    )
    args.prior = prior.to_dict()
    return [args.pattern], [out]


def cmd_fit_abc(args):
    from .inference import abc_default_init, abc_mcmc, abc_rejection, generative_prior
    from .summaries import abc_summaries

    pattern = _load_pattern(args)
    prior = generative_prior()
    observed = abc_summaries(pattern)
    rng = _rng(args)
    if args.method == "mcmc":
        sample = abc_mcmc(observed, prior, pattern.window, args.iterations, args.keep, rng,
                          init=abc_default_init(observed, prior))
    else:
        if args.epsilon is None:
            raise UsageError("--method rejection needs --epsilon")
        if not prior.proper:
            from .inference import Prior, Uniform

            # rejection sampling needs a proper prior; R gets a proper stand-in
            prior = Prior(R=Uniform(40.0, args.R_max), sigma=prior.marginals["sigma"], p=prior.marginals["p"])
        sample = abc_rejection(observed, prior, pattern.window, args.epsilon, args.M, rng, workers=args.threads)
    cols = [sample.draws[:, j] for j in range(sample.draws.shape[1])]
    out = _write_sample_csv(Path(args.output), sample.names + ["distance"], cols + [sample.distances])
    args.prior = prior.to_dict()
    args.observed_summaries = observed.as_array().tolist()
    return [args.pattern], [out]


def cmd_envelope(args):
    from .envelopes import posterior_predictive_envelope

    pattern = _load_pattern(args)
    draws = read_sample_csv(args.sample, PARAM_NAMES[args.model])
    env = posterior_predictive_envelope(
        draws, args.model, pattern, args.statistic, args.nsim, _rng(args), args.level, noise_free=not args.with_noise
    )
    out = env.to_csv(Path(args.output))
    verdict = env.verdict_json(out.with_name(out.stem + ".verdict.json"))
    print(json.dumps(env.verdict(), sort_keys=True))
    return [args.pattern, args.sample], [out, verdict]


def cmd_extract(args):
    from .changepoint import background_correct, binarize_stack, extract_spots, read_stack, write_pgm_stack

    stack = read_stack(args.input)
    lighting = background_correct(stack[0], args.sigma)
    binary = binarize_stack(stack, lighting, args.threshold, closing=not args.no_closing)
    pattern = extract_spots(binary, args.min_spot, args.merge_radius)
    out = write_pattern(pattern, args.output)
    if args.dump_masks:
        write_pgm_stack(binary, args.dump_masks, prefix="mask")
    inputs = sorted(Path(args.input).glob("*.pgm")) if Path(args.input).is_dir() else [args.input]
    return inputs, [out]


def cmd_sweep(args):
    from .changepoint import background_correct, read_stack, threshold_sweep

    stack = read_stack(args.input)
    lighting = background_correct(stack[0], args.sigma)
    rows = threshold_sweep(stack, lighting, args.thresholds, args.min_spot, args.merge_radius)
    out = Path(args.output)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "wet_pixels", "spots"])
        for t, wet, n in rows:
            w.writerow([repr(float(t)), wet, n])
    return [], [out]


def cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    argv = manifest["argv"]
    if argv and argv[0] == "replay":
        raise UsageError("a replay manifest cannot be replayed")
    return main(argv)


# --------------------------------------------------------------------------
# parser


def _add_window(p, required=False, defaults=False):
    w = DEFAULT_WIDTH if defaults else None
    h = DEFAULT_HEIGHT if defaults else None
    p.add_argument("--width", type=float, default=w, required=required, help="window width in pixels")
    p.add_argument("--height", type=float, default=h, required=required, help="window height in pixels")


def _seed(value: str) -> int:
    s = int(value)
    if not 0 <= s <= MAX_SEED:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64 - 1], got {s}")
    return s


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help="64-bit seed (default 1)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (1 = bitwise reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sweatpp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("simulate", help="simulate a pattern from one of the models")
    p.add_argument("--model", choices=["softcore", "mixture", "generative"], required=True)
    p.add_argument("--n", type=int, help="number of points (sequential models)")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--kappa", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--max-failures", type=int, default=300)
    _add_window(p, defaults=True)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("summaries", help="pcf, F and (r1, r2, r3) of a pattern")
    p.add_argument("pattern")
    _add_window(p)
    p.add_argument("-o", "--output", required=True, help="JSON output; curves go to <stem>.pcf.csv and <stem>.F.csv")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_summaries)

    p = sub.add_parser("loglik", help="sequential log-likelihood of a pattern")
    p.add_argument("pattern")
    p.add_argument("--model", choices=["softcore", "mixture"], default="softcore")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--theta", type=float)
    p.add_argument("--quadrature", type=int, default=10_800, help="target number of quadrature nodes")
    _add_window(p)
    p.add_argument("-o", "--output")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("fit-mle", help="maximum likelihood fit of a sequential model")
    p.add_argument("pattern")
    p.add_argument("--model", choices=["softcore", "mixture"], default="softcore")
    p.add_argument("--fix-theta", type=float, help="hold the mixture noise probability fixed")
    p.add_argument("--quadrature", type=int, default=10_800)
    _add_window(p)
    p.add_argument("-o", "--output", required=True)
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_fit_mle)

    p = sub.add_parser("fit-bayes", help="RAM posterior sample of the mixture model")
    p.add_argument("pattern")
    p.add_argument("--iterations", type=int, default=120_000)
    p.add_argument("--burn-in", type=int, default=20_000)
    p.add_argument("--quadrature", type=int, default=10_800)
    _add_window(p)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fit_bayes)

    p = sub.add_parser("fit-abc", help="ABC posterior sample of the generative model")
    p.add_argument("pattern")
    p.add_argument("--method", choices=["mcmc", "rejection"], default="mcmc")
    p.add_argument("--iterations", type=int, default=200_000)
    p.add_argument("--keep", type=int, default=5_000)
    p.add_argument("--epsilon", type=float, help="tolerance (rejection)")
    p.add_argument("--M", type=int, default=1000, help="accepted draws (rejection)")
    p.add_argument("--R-max", type=float, default=200.0, help="upper end of the proper R prior used by rejection")
    _add_window(p)
    p.add_argument("-o", "--output", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_fit_abc)

    p = sub.add_parser("envelope", help="posterior predictive global envelope test")
    p.add_argument("pattern")
    p.add_argument("--sample", required=True, help="chain or ABC sample CSV")
    p.add_argument("--model", choices=["softcore", "mixture", "generative"], required=True)
    p.add_argument("--statistic", choices=["pcf", "F"], default="pcf")
    p.add_argument("--nsim", type=int, default=999)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--with-noise", action="store_true", help="simulate the mixture noise component too")
    _add_window(p)
    p.add_argument("-o", "--output", required=True, help="envelope CSV; verdict goes to <stem>.verdict.json")
    _add_common(p)
    p.set_defaults(func=cmd_envelope)

    for name, func, helptext in (
        ("extract", cmd_extract, "ordered spot pattern from a frame stack"),
        ("sweep", cmd_sweep, "wet-pixel and spot counts over several thresholds"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--input", required=True, help="directory of PGM frames or raw stack file")
        if name == "extract":
            p.add_argument("--threshold", type=float, required=True)
            p.add_argument("--no-closing", action="store_true")
            p.add_argument("--dump-masks", help="directory for binary mask PGMs")
        else:
            p.add_argument("--thresholds", type=float, nargs="+", required=True)
        p.add_argument("--sigma", type=float, default=100.0)
        p.add_argument("--min-spot", type=int, default=20)
        p.add_argument("--merge-radius", type=float, default=15.0)
        p.add_argument("-o", "--output", required=True)
        _add_common(p, seed=False)
        p.set_defaults(func=func)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay, threads=1, verbose=False)
    return parser


def _set_threads(n: int) -> None:
    # the compiled kernels are serial; --threads only sizes worker pools
    if n < 1:
        raise UsageError("--threads must be >= 1")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _set_threads(args.threads)
        if args.command == "replay":
            return cmd_replay(args)
        inputs, outputs = args.func(args)
        if outputs:
            write_manifest(args, argv, inputs, outputs)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sweatpp {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"sweatpp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
