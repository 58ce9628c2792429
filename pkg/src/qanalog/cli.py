"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 numerical verification
failure, 3 resource guard.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import io as qio
from .errors import BudgetError, QAnalogError, ResourceError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_RESOURCE = 0, 1, 2, 3

# reference term counts for (epsilon, H)
TABLE1_REFERENCE = {
    (1e-2, 0.5): 100, (1e-2, 0.65): 35, (1e-2, 0.8): 20,
    (1e-3, 0.5): 1000, (1e-3, 0.65): 205, (1e-3, 0.8): 75,
    (1e-4, 0.5): 10000, (1e-4, 0.65): 1200, (1e-4, 0.8): 320,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(s) for s in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    return a, b


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def _streams(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _params(args, skip=("command", "output_dir", "outdir", "threads", "config", "func")) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _threads(args) -> int:
    return args.threads or os.cpu_count() or 1


def _finish(args, name: str, files: list[str], extra: dict | None = None) -> None:
    params = _params(args)
    meta = qio.provenance(params, args.seed)
    side = os.path.join(args.outdir, f"{name}.meta.json")
    qio.write_sidecar(side, params, dict(meta, **(extra or {})), files)
    for f in files + [side]:
        print(f)


# --- commands ---------------------------------------------------------------


def cmd_trajectory(args) -> int:
    from .spectral_bm import ProcessSpec, simulate_trajectory_dense, simulate_trajectory_fast

    spec = ProcessSpec(args.hurst, args.terms, args.steps, args.scale)
    streams = _streams(args.seed, args.count)

    def one(rng):
        if args.path == "dense":
            return simulate_trajectory_dense(spec, rng, not args.no_shift_correction)[0]
        return simulate_trajectory_fast(spec, rng, not args.no_shift_correction)

    with ThreadPoolExecutor(max_workers=_threads(args)) as pool:
        trajs = list(pool.map(one, streams))
    params = _params(args)
    meta = qio.provenance(params, args.seed)
    t = spec.times
    if args.format == "csv":
        path = os.path.join(args.outdir, "trajectories.csv")
        cols = ["t"] + [f"value_{i}" for i in range(args.count)]
        rows = [[t[i]] + [tr.values[i] for tr in trajs] for i in range(t.size)]
        qio.write_csv(path, cols, rows, meta)
    else:
        path = os.path.join(args.outdir, "trajectories.json")
        payload = {"t": t, "trajectories": [
            {"values": tr.values, "shift": tr.shift, "attempts": tr.attempts} for tr in trajs]}
        qio.write_json(path, payload, meta)
    _finish(args, "trajectories", [path],
            {"shifts": [tr.shift for tr in trajs], "attempts": [tr.attempts for tr in trajs]})
    return EXIT_OK


def table1_rows() -> list[dict]:
    from .spectral_bm import terms_for_accuracy

    rows = []
    for (eps, h), ref in TABLE1_REFERENCE.items():
        n = terms_for_accuracy(eps, h)
        rows.append({"epsilon": eps, "hurst": h, "terms": n, "reference": ref,
                     "relative_deviation": abs(n - ref) / ref})
    return rows


def cmd_table1(args) -> int:
    rows = table1_rows()
    meta = qio.provenance(_params(args), args.seed)
    if args.format == "csv":
        path = os.path.join(args.outdir, "table1.csv")
        qio.write_csv(path, ["epsilon", "hurst", "terms", "reference", "relative_deviation"],
                      [[r["epsilon"], r["hurst"], r["terms"], r["reference"], r["relative_deviation"]]
                       for r in rows], meta)
    else:
        path = os.path.join(args.outdir, "table1.json")
        qio.write_json(path, {"rows": rows}, meta)
    _finish(args, "table1", [path])
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_all

    report = run_all(args.seed, quick=args.quick)
    path = os.path.join(args.outdir, "verify.json")
    qio.write_json(path, report, qio.provenance(_params(args), args.seed))
    _finish(args, "verify", [path])
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']} {c['measure']}={c['measured']:.3g} tol={c['tolerance']:.3g}",
              file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_VERIFY


def cmd_qmc(args) -> int:
    from .qmc import TestFunction, estimate_normalized_inner
    from .spectral_bm import ProcessSpec

    spec = ProcessSpec(args.hurst, args.terms, args.steps)
    if args.window is not None:
        lo, hi = args.window
        f = TestFunction.window(args.steps, lo * math.pi, hi * math.pi)
    else:
        f = TestFunction.from_callable(np.sin, args.steps, "sin")
    res = estimate_normalized_inner(
        spec, f, args.epsilon, args.mode, _rng(args.seed), estimand=args.estimand,
        precision_bits=args.precision_bits, ancilla_bits=args.ancilla_bits, samples=args.samples,
        norm_window=args.norm_window, strict_budget=args.strict_budget,
    )
    path = os.path.join(args.outdir, "qmc.json")
    payload = dict(res.to_dict(), spec=spec.to_dict(), test_function=f.name)
    qio.write_json(path, payload, qio.provenance(_params(args), args.seed))
    _finish(args, "qmc", [path])
    return EXIT_OK


def cmd_levy(args) -> int:
    from .levy import (KernelVec, LevyNoiseSpec, sample_levy_noise, stochastic_integral_classical,
                       stochastic_integral_quantum)

    rng = _rng(args.seed)
    spec = LevyNoiseSpec(args.kind, args.steps, sigma=args.sigma, rate=args.rate,
                         jump_std=args.jump_std, jump_mean=args.jump_mean)
    kernel = KernelVec.power_law(args.steps, args.kernel_exponent)
    noise = sample_levy_noise(spec, rng)
    res = stochastic_integral_quantum(kernel, noise, rng, truncation=args.truncation)
    classical = stochastic_integral_classical(kernel, noise)
    nrm = np.linalg.norm(classical)
    out = res.output
    meta = qio.provenance(_params(args), args.seed)
    path = os.path.join(args.outdir, "levy_integral.csv")
    rows = [[i, noise[i], classical[i], float(np.real(out[i])) * nrm] for i in range(args.steps)]
    qio.write_csv(path, ["step", "noise", "classical", "quantum_rescaled"], rows, meta)
    log = os.path.join(args.outdir, "levy_acceptance.json")
    cos = float(abs(np.vdot(classical / nrm, out))) if nrm > 0 else float("nan")
    qio.write_json(log, {
        "attempts": res.attempts,
        "flag_probability": res.flag_probability,
        "block_probability": res.block_probability,
        "acceptance_probability": res.acceptance_probability,
        "spectrum_ratio_squared": res.spectrum_ratio**2,
        "retained_frequencies": int(res.retained.size),
        "cosine_similarity": cos,
    }, meta)
    _finish(args, "levy", [path, log])
    return EXIT_OK


def cmd_tamsd(args) -> int:
    from .apps import TamsdTestConfig, test_power

    cfg = TamsdTestConfig(args.steps, args.tau, args.diffusion, args.h_test, args.alpha,
                          args.quantile_samples, args.alternative, args.h_alt, args.rate)
    power, det = test_power(cfg, args.trials, _rng(args.seed), return_details=True)
    meta = qio.provenance(_params(args), args.seed)
    lo, hi = det["band"]
    n = args.steps - args.tau
    path = os.path.join(args.outdir, "tamsd.json")
    qio.write_json(path, {
        "power": power,
        "standard_error": det["standard_error"],
        "quantiles": {"alpha_sig": args.alpha, "Q_low": lo * n / args.diffusion,
                      "Q_high": hi * n / args.diffusion, "band_low": lo, "band_high": hi},
    }, meta)
    _finish(args, "tamsd", [path])
    return EXIT_OK


def cmd_swap(args) -> int:
    from .apps import SwapSpec, variance_swap_strike
    from .spectral_bm import ProcessSpec

    lo, hi = args.window
    swap = SwapSpec(args.intervals, args.annualization, args.hurst, args.rate,
                    (lo * math.pi, hi * math.pi), args.norm_window)
    proc = ProcessSpec(args.hurst, args.terms, args.steps)
    res = variance_swap_strike(swap, proc, args.epsilon, args.method, _rng(args.seed),
                               samples=args.samples, precision_bits=args.precision_bits)
    path = os.path.join(args.outdir, "swap.json")
    qio.write_json(path, dict(res.to_dict(), spec=proc.to_dict()),
                   qio.provenance(_params(args), args.seed))
    _finish(args, "swap", [path])
    return EXIT_OK


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qanalog", description="Spectral Brownian-path simulation and estimation.")
    p.add_argument("--version", action="version", version=f"qanalog {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--output-dir", default=None,
                        help=f"defaults to ${qio.OUTPUT_ENV} or the current directory")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--config", default=None, help="flat key = value file; flags win")

    sp = sub.add_parser("trajectory", help="sample bridge trajectories")
    common(sp)
    sp.add_argument("--hurst", type=float, default=0.5)
    sp.add_argument("--terms", type=int, default=256)
    sp.add_argument("--steps", type=int, default=4096)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--path", choices=("fast", "dense"), default="fast")
    sp.add_argument("--no-shift-correction", action="store_true")
    sp.set_defaults(func=cmd_trajectory)

    sp = sub.add_parser("table1", help="terms needed per accuracy and Hurst parameter")
    common(sp)
    sp.set_defaults(func=cmd_table1)

    sp = sub.add_parser("verify", help="run the circuit and distribution self-checks")
    common(sp)
    sp.add_argument("--quick", action="store_true")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("qmc", help="estimate E<f|B>/(|f||B|)")
    common(sp)
    sp.add_argument("--mode", choices=("direct", "ae", "classical"), default="direct")
    sp.add_argument("--estimand", choices=("mean", "mean_square"), default="mean")
    sp.add_argument("--hurst", type=float, default=0.5)
    sp.add_argument("--terms", type=int, default=4)
    sp.add_argument("--steps", type=int, default=16)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--window", type=_pair, default=None, help="f = indicator of [lo pi, hi pi]")
    sp.add_argument("--norm-window", type=_pair, default=None)
    sp.add_argument("--precision-bits", type=int, default=4)
    sp.add_argument("--ancilla-bits", type=int, default=8)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--strict-budget", action="store_true")
    sp.set_defaults(func=cmd_qmc)

    sp = sub.add_parser("levy", help="stochastic integral against Levy noise")
    common(sp)
    sp.add_argument("--kind", choices=("gaussian", "cpoisson", "mixed"), default="gaussian")
    sp.add_argument("--steps", type=int, default=256)
    sp.add_argument("--sigma", type=float, default=1.0)
    sp.add_argument("--rate", type=float, default=1.0)
    sp.add_argument("--jump-std", type=float, default=1.0)
    sp.add_argument("--jump-mean", type=float, default=0.0)
    sp.add_argument("--kernel-exponent", type=float, default=0.0, help="K(t) = t^exponent")
    sp.add_argument("--truncation", type=int, default=None)
    sp.set_defaults(func=cmd_levy)

    sp = sub.add_parser("tamsd", help="power of the TAMSD test")
    common(sp)
    sp.add_argument("--steps", type=int, default=512)
    sp.add_argument("--tau", type=int, default=4)
    sp.add_argument("--diffusion", type=float, default=1.0)
    sp.add_argument("--h-test", type=float, default=0.5)
    sp.add_argument("--h-alt", type=float, default=0.8)
    sp.add_argument("--alternative", choices=("fbm", "cpoisson"), default="fbm")
    sp.add_argument("--rate", type=float, default=0.1)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--quantile-samples", type=int, default=10_000)
    sp.add_argument("--trials", type=int, default=1000)
    sp.set_defaults(func=cmd_tamsd)

    sp = sub.add_parser("swap", help="variance-swap strike")
    common(sp)
    sp.add_argument("--hurst", type=float, default=0.5)
    sp.add_argument("--terms", type=int, default=4)
    sp.add_argument("--steps", type=int, default=16)
    sp.add_argument("--method", choices=("classical", "direct", "ae"), default="direct")
    sp.add_argument("--window", type=_pair, default=(0.0, 1.0), help="[lo pi, hi pi]")
    sp.add_argument("--norm-window", type=_pair, default=None)
    sp.add_argument("--intervals", type=int, default=1)
    sp.add_argument("--annualization", type=float, default=1.0)
    sp.add_argument("--rate", type=float, default=0.0)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--samples", type=int, default=None)
    sp.add_argument("--precision-bits", type=int, default=4)
    sp.set_defaults(func=cmd_swap)
    return p


def _apply_config_file(parser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = qio.read_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for k, v in values.items():
            if k not in known:
                raise UsageError(f"unknown config key {k!r} for {args.command}")
            act = known[k]
            if act.type is not None:
                v = act.type(v)
            elif isinstance(act, argparse._StoreTrueAction):
                v = v.lower() in ("1", "true", "yes", "on")
            defaults[k] = v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
        if not args.command:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args.outdir = qio.output_dir(args.output_dir)
        return args.func(args)
    except UsageError as exc:
        print(f"qanalog: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceError, BudgetError) as exc:
        print(f"qanalog: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (QAnalogError, ValueError, OSError) as exc:
        cmd = getattr(locals().get("args"), "command", "?")
        print(f"qanalog {cmd}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
