"""Command-line interface: ``qetomo {dist,simulate,estimate,sweep}``.

Every command takes its parameters from three layers, later ones winning:
built-in defaults (plus a preset for ``sweep``), a JSON ``--config`` file,
and explicit flags.  The merged configuration is written into each output
file, so feeding that block back through ``--config`` reproduces the file.

Exit codes: 0 success, 2 usage or invalid input, 3 I/O failure,
4 numerical failure or unresolvable ambiguity.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AmbiguityError, InvalidArgumentError
from .estimate import estimate_unitary
from .experiments import run_budget_comparison, run_random_sweep, run_scaling_curve, summarize
from .fock import ProbeSpec, distribution
from .simulate import ExperimentRecord, run_protocol, substream
from .su2 import (
    BASES,
    CENTRE,
    IDENTITY,
    U_A_PRINTED,
    U_B_PRINTED,
    bloch_coords,
    from_matrix,
    haar_sample,
    normalize,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
PRINTED_MATRIX_ATOL = 1e-2

DIST_DEFAULTS = {"n": None, "m": None, "p": None, "format": "text"}
SIMULATE_DEFAULTS = {
    "truth": "haar", "probe_n": 4, "probe_m": None, "budget": 800, "coarse_fraction": 0.1,
    "coarse_cap": 100, "coarse_photons": None, "exact": False, "seed": 0,
}
ESTIMATE_DEFAULTS = {"input": None, "verbose": False}
SWEEP_DEFAULTS = {
    "preset": None, "mode": "budget", "truth": "UA", "count": 19, "probes_per_unitary": 200,
    "probe_n": 4, "probe_ns": [1, 4], "budgets": [1800, 2400, 3600], "budget_range": None,
    "trials": 500, "max_photons": 36000, "points": 8, "coarse_fraction": 0.1,
    "coarse_cap": 100, "coarse_photons": None, "paired": True, "error_bars": "semi-rms",
    "exact": False, "seed": 0,
}
PRESETS = {
    "fig2": {"mode": "random", "count": 19, "probes_per_unitary": 200, "probe_n": 4,
             "coarse_photons": 400},
    "fig3": {"mode": "budget", "truth": "UA", "budgets": [1800, 2400, 3600], "trials": 500,
             "probe_ns": [1, 4]},
    "figS1": {"mode": "random", "count": 10000, "probe_n": 4, "budget_range": [120, 12000]},
    "figS2": {"mode": "scaling", "truth": "UA", "max_photons": 36000, "probe_ns": [1, 4],
              "trials": 200, "points": 8},
}
SWEEP_MODES = ("random", "budget", "scaling")

_INT_KEYS = {"n", "m", "probe_n", "probe_m", "budget", "coarse_cap", "coarse_photons", "seed",
             "count", "probes_per_unitary", "trials", "max_photons", "points"}
_FLOAT_KEYS = {"p", "coarse_fraction"}
_BOOL_KEYS = {"exact", "verbose", "paired"}
_INT_LIST_KEYS = {"probe_ns", "budgets", "budget_range"}


class ConfigError(InvalidArgumentError):
    pass


def artifact_version():
    """Package version, with the git commit appended when run from a checkout."""
    try:
        out = subprocess.run(["git", "rev-parse", "--short=12", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5, check=True)
        return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


# ---- configuration -------------------------------------------------------

def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in _BOOL_KEYS:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if key in _INT_KEYS:
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if key in _FLOAT_KEYS:
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if key in _INT_LIST_KEYS:
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            if any(isinstance(v, bool) or float(v) != int(float(v)) for v in value):
                raise TypeError
            return [int(float(v)) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    return value


def _load_json(path):
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        line = text.splitlines()[e.lineno - 1] if 0 < e.lineno <= len(text.splitlines()) else ""
        raise InvalidArgumentError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}\n    {line}") from None


def build_config(defaults, args, flag_keys, presets=None):
    """Merge defaults, optional preset, ``--config`` file and explicit flags."""
    cfg = dict(defaults)
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _load_json(args.config)
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{args.config}: configuration must be a JSON object")
        file_cfg = dict(file_cfg)
        file_cfg.pop("command", None)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}; valid keys are "
                              f"{sorted(defaults)}")
    preset = getattr(args, "preset", None) or file_cfg.get("preset")
    if presets is not None and preset is not None:
        if preset not in presets:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(presets)}")
        cfg.update(presets[preset])
        cfg["preset"] = preset
    cfg.update(file_cfg)
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return {k: _coerce(k, v) for k, v in cfg.items()}


def parse_truth(spec, seed=0):
    """Resolve a truth specification.

    Accepts ``"haar"`` (drawn from the seed), ``"UA"``, ``"UB"``,
    ``"identity"``, ``"centre"``, ``"a,b,c,d"``, a list of four reals, a
    mapping with keys a-d, or a 2x2 matrix whose entries are numbers,
    complex literals such as ``"0.70+0.21j"`` or ``[re, im]`` pairs.
    Matrices are normalized on ingestion with a tolerance suited to
    two-decimal printed values.
    """
    if isinstance(spec, dict):
        try:
            return normalize([spec[k] for k in "abcd"])
        except KeyError as e:
            raise InvalidArgumentError(f"truth mapping is missing {e}") from None
    if isinstance(spec, str):
        key = spec.strip().lower().replace("_", "")
        named = {"ua": lambda: from_matrix(U_A_PRINTED, PRINTED_MATRIX_ATOL),
                 "ub": lambda: from_matrix(U_B_PRINTED, PRINTED_MATRIX_ATOL),
                 "identity": lambda: IDENTITY, "centre": lambda: CENTRE,
                 "center": lambda: CENTRE,
                 "haar": lambda: haar_sample(np.random.default_rng(substream(seed, 1))),
                 }
        if key in named:
            return named[key]()
        if key.startswith(("[", "{")):
            try:
                return parse_truth(json.loads(spec), seed)
            except json.JSONDecodeError as e:
                raise InvalidArgumentError(f"cannot parse truth {spec!r}: {e.msg}") from None
        try:
            return normalize([float(x) for x in spec.split(",")])
        except ValueError:
            raise InvalidArgumentError(
                f"cannot parse truth {spec!r}; use haar, UA, UB, identity, centre, "
                "'a,b,c,d' or a 2x2 matrix") from None
    arr = list(spec)
    if len(arr) == 4 and all(isinstance(x, (int, float)) for x in arr):
        return normalize(arr)
    if len(arr) == 2 and all(isinstance(r, (list, tuple)) and len(r) == 2 for r in arr):
        m = np.array([[_complex(x) for x in row] for row in arr])
        return from_matrix(m, PRINTED_MATRIX_ATOL)
    raise InvalidArgumentError(f"cannot parse truth {spec!r}")


def _complex(x):
    if isinstance(x, (list, tuple)) and len(x) == 2:
        return complex(float(x[0]), float(x[1]))
    try:
        return complex(str(x).replace(" ", "")) if isinstance(x, str) else complex(x)
    except ValueError:
        raise InvalidArgumentError(f"cannot parse matrix entry {x!r}") from None


# ---- output --------------------------------------------------------------

def _dump_json(obj):
    return json.dumps(obj, indent=2) + "\n"


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _fmt(x):
    return "" if x is None else format(float(x), ".17g")


# ---- commands ------------------------------------------------------------

def cmd_dist(args):
    cfg = build_config(DIST_DEFAULTS, args, ["n", "m", "p", "format"])
    for key in ("n", "p"):
        if cfg[key] is None:
            raise InvalidArgumentError(f"dist needs --{key}")
    N, p = cfg["n"], cfg["p"]
    M = N // 2 if cfg["m"] is None else cfg["m"]
    if cfg["m"] is None:
        cfg["m"] = M
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    dist = distribution(ProbeSpec(N, M), p)
    if cfg["format"] == "json":
        sys.stdout.write(_dump_json({"schema": "qetomo.dist/1", "config": cfg,
                                     "outcomes": dist.as_list()}))
    else:
        lines = [f"# |{M},{N - M}> probe, p = {_fmt(p)}", f"{'n_H':>4} {'n_V':>4}  probability"]
        lines += [f"{n_h:>4} {n_v:>4}  {_fmt(q)}" for (n_h, n_v), q in dist.items()]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    keys = ["truth", "probe_n", "probe_m", "budget", "coarse_fraction", "coarse_cap",
            "coarse_photons", "exact", "seed"]
    cfg = build_config(SIMULATE_DEFAULTS, args, keys)
    truth = parse_truth(cfg["truth"], cfg["seed"])
    exp = run_protocol(truth, cfg["probe_n"], cfg["budget"], cfg["coarse_fraction"],
                       seed=substream(cfg["seed"], 0), probe_M=cfg["probe_m"],
                       coarse_cap=cfg["coarse_cap"], coarse_photons=cfg["coarse_photons"],
                       exact=cfg["exact"])
    exp = ExperimentRecord(exp.main, exp.coarse, exp.truth,
                           {"command": "simulate", **cfg})
    doc = exp.as_dict()
    doc["version"] = artifact_version()
    _write_text(args.output, _dump_json(doc))
    probes = sum(r.shots for r in exp.main)
    print(f"seed: {cfg['seed']}")
    print(f"wrote {args.output}: {probes} probes in main records, "
          f"{exp.total_photons} photons in total")
    return EXIT_OK


def load_experiment(path) -> ExperimentRecord:
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InvalidArgumentError(f"{path}: expected a JSON object")
    try:
        exp = ExperimentRecord.from_dict(data)
    except (KeyError, TypeError) as e:
        raise InvalidArgumentError(f"{path}: malformed experiment record ({e!r})") from None
    missing = [b for b in BASES if b not in {r.basis for r in exp.main}]
    if missing:
        raise InvalidArgumentError(f"{path}: experiment has no main record for {missing}")
    return exp


def cmd_estimate(args):
    cfg = build_config(ESTIMATE_DEFAULTS, args, ["input", "verbose"])
    if not cfg["input"]:
        raise InvalidArgumentError("estimate needs an input record")
    exp = load_experiment(cfg["input"])
    result = estimate_unitary(exp, verbose=cfg["verbose"])
    doc = result.as_dict(verbose=cfg["verbose"], truth=exp.truth)
    doc["config"] = {"command": "estimate", **cfg}
    doc["version"] = artifact_version()
    text = _dump_json(doc)
    if args.output:
        _write_text(args.output, text)
        print(f"wrote {args.output}")
        if exp.truth is not None:
            print(f"infidelity_vs_truth: {_fmt(doc['infidelity_vs_truth'])}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


CSV_COLUMNS = [
    "trial", "budget", "probe_n", "infidelity_vs_truth", "infidelity_vs_central", "seed",
    "truth_a", "truth_b", "truth_c", "truth_d", "estimate_a", "estimate_b", "estimate_c",
    "estimate_d", "truth_x", "truth_y", "truth_z", "estimate_x", "estimate_y", "estimate_z",
    "projected", "ambiguous",
]


def _trial_row(t):
    return [t.trial, t.budget, t.probe_N, _fmt(t.infidelity), _fmt(t.infidelity_vs_central),
            ":".join(str(k) for k in t.seed), *(_fmt(x) for x in t.truth),
            *(_fmt(x) for x in t.estimate), *(_fmt(x) for x in bloch_coords(t.truth)),
            *(_fmt(x) for x in bloch_coords(t.estimate)), int(t.projected), int(t.ambiguous)]


def cmd_sweep(args):
    keys = ["mode", "truth", "count", "probes_per_unitary", "probe_n", "probe_ns", "budgets",
            "budget_range", "trials", "max_photons", "points", "coarse_fraction", "coarse_cap",
            "coarse_photons", "error_bars", "exact", "seed"]
    cfg = build_config(SWEEP_DEFAULTS, args, keys, PRESETS)
    if cfg["mode"] not in SWEEP_MODES:
        raise ConfigError(f"mode must be one of {SWEEP_MODES}, got {cfg['mode']!r}")
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        raise InvalidArgumentError(f"--threads must be at least 1, got {threads}")
    seed = cfg["seed"]
    common = {"coarse_fraction": cfg["coarse_fraction"], "coarse_cap": cfg["coarse_cap"],
              "coarse_photons": cfg["coarse_photons"], "exact": cfg["exact"]}
    summary = {"schema": "qetomo.sweep/1", "version": artifact_version(),
               "config": {"command": "sweep", **cfg}}
    if cfg["mode"] == "random":
        br = cfg["budget_range"]
        if br is not None and (len(br) != 2 or not 0 < br[0] <= br[1]):
            raise ConfigError(f"budget_range must be [low, high] with 0 < low <= high, got {br}")
        trials = run_random_sweep(cfg["count"], cfg["probes_per_unitary"], cfg["probe_n"],
                                  seed, budget_range=br, threads=threads, **common)
        fid = 1.0 - np.array([t.infidelity for t in trials])
        summary["stats"] = [{"probe_n": cfg["probe_n"],
                             **summarize(trials, "truth", cfg["error_bars"]).as_dict()}]
        summary["fidelity"] = {"mean": float(fid.mean()), "min": float(fid.min()),
                               "max": float(fid.max())}
    else:
        truth = parse_truth(cfg["truth"], seed)
        summary["truth"] = truth._asdict()
        kw = dict(probe_Ns=cfg["probe_ns"], paired=cfg["paired"], method=cfg["error_bars"],
                  threads=threads, **common)
        if cfg["mode"] == "budget":
            if cfg["trials"] < 2:
                raise InvalidArgumentError(f"trials must be at least 2, got {cfg['trials']}")
            res = run_budget_comparison(truth, cfg["budgets"], cfg["trials"],
                                        seed, **kw)
        else:
            if cfg["trials"] < 1:
                raise InvalidArgumentError(f"trials must be at least 1, got {cfg['trials']}")
            res = run_scaling_curve(truth, cfg["max_photons"], cfg["probe_ns"], cfg["trials"],
                                    seed, points=cfg["points"],
                                    **{k: v for k, v in kw.items() if k != "probe_Ns"})
        trials = res.trials
        summary["stats"] = res.table()
        summary["central"] = [{"budget": b, "probe_n": n, **c._asdict()}
                              for (b, n), c in res.central.items()]
    summary["trials"] = len(trials)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for t in trials:
        writer.writerow(_trial_row(t))
    csv_path, json_path = f"{args.out}.csv", f"{args.out}.json"
    _write_text(csv_path, buf.getvalue())
    _write_text(json_path, _dump_json(summary))
    print(f"seed: {seed}")
    print(f"wrote {csv_path} ({len(trials)} trials) and {json_path}")
    return EXIT_OK


# ---- parser --------------------------------------------------------------

def _csv_ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qetomo", description="Multi-photon tomography of two-mode unitaries.")
    parser.add_argument("--version", action="version", version=f"qetomo {artifact_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="exact outcome distribution of a |M, N-M> probe")
    d.add_argument("--n", type=int)
    d.add_argument("--m", type=int)
    d.add_argument("--p", type=float)
    d.add_argument("--format", choices=("text", "json"))
    d.add_argument("--config")
    d.set_defaults(func=cmd_dist)

    s = sub.add_parser("simulate", help="simulate one tomography experiment")
    s.add_argument("--truth", help="haar, UA, UB, identity, centre, 'a,b,c,d' or a JSON matrix")
    s.add_argument("--probe-n", dest="probe_n", type=int)
    s.add_argument("--probe-m", dest="probe_m", type=int)
    s.add_argument("--budget", type=int, help="total photons, coarse photons included")
    s.add_argument("--coarse-fraction", dest="coarse_fraction", type=float)
    s.add_argument("--coarse-cap", dest="coarse_cap", type=int)
    s.add_argument("--coarse-photons", dest="coarse_photons", type=int)
    s.add_argument("--exact", action="store_true", default=None,
                   help="expected counts instead of samples")
    s.add_argument("--seed", type=int)
    s.add_argument("--config")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate the unitary from a simulated record")
    e.add_argument("input", nargs="?")
    e.add_argument("--verbose", action="store_true", default=None,
                   help="include the candidate score table")
    e.add_argument("--config")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_estimate)

    w = sub.add_parser("sweep", help="Monte Carlo study (random, budget or scaling)")
    w.add_argument("--preset", choices=sorted(PRESETS))
    w.add_argument("--mode", choices=SWEEP_MODES)
    w.add_argument("--truth")
    w.add_argument("--count", type=int)
    w.add_argument("--probes-per-unitary", dest="probes_per_unitary", type=int)
    w.add_argument("--probe-n", dest="probe_n", type=int)
    w.add_argument("--probe-ns", dest="probe_ns", type=_csv_ints)
    w.add_argument("--budgets", type=_csv_ints)
    w.add_argument("--budget-range", dest="budget_range", type=_csv_ints)
    w.add_argument("--trials", type=int)
    w.add_argument("--max-photons", dest="max_photons", type=int)
    w.add_argument("--points", type=int)
    w.add_argument("--coarse-fraction", dest="coarse_fraction", type=float)
    w.add_argument("--coarse-cap", dest="coarse_cap", type=int)
    w.add_argument("--coarse-photons", dest="coarse_photons", type=int)
    w.add_argument("--error-bars", dest="error_bars", choices=("semi-rms", "percentile"))
    w.add_argument("--exact", action="store_true", default=None)
    w.add_argument("--seed", type=int)
    w.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    w.add_argument("--config")
    w.add_argument("--out", required=True, help="output prefix for .csv and .json")
    w.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except AmbiguityError as e:
        print(f"error: ambiguous estimate: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
