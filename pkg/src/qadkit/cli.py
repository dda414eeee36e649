"""Command-line front end: ``qadkit generate | score | validate | sweep``.

Outputs are JSON and CSV files; nothing is plotted. Exit codes: 0 success,
1 validation failure, 2 config error, 3 numerical or degeneracy error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import hamsim, kpca, ocsvm, qcore, registry, swaptest, validation
from .errors import ConfigError, QadError

SEED_ENV = "QADKIT_SEED"
DETECTORS = ("kpca", "ocsvm")
SWEEPS = ("shots", "theta", "reps")
CSV_COLUMNS = ("state_id", "detector", "route", "mode", "f", "stderr", "shots")
SWEEP_COLUMNS = ("sweep", "x", "value", "bound")


def _config_error(msg: str, operation: str = "config") -> ConfigError:
    return ConfigError(msg, module="cli", operation=operation, precondition=msg)


@dataclass
class RunConfig:
    command: str = "score"
    dataset: str | None = None
    dataset_spec: dict | None = None
    detector: str = "kpca"
    route: str = "auto"
    kernel: str | None = None
    mode: str = "exact"
    shots: int | None = None
    p_t: float = ocsvm.DEFAULT_PT
    phase_bits: int = 8
    reps: int = 64
    solver: str = "classical"
    evolution: str = "exact"
    seed: int | None = None
    out: str | None = None
    csv: str | None = None
    timing: bool = False
    scope: str = "all"
    sweep: str | None = None
    grid: list | None = None
    trials: int = 50
    workers: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise _config_error("config must be a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise _config_error(f"unknown config fields {unknown}")
        return cls(**doc)

    def effective_seed(self) -> int:
        if self.seed is not None:
            return int(self.seed)
        env = os.environ.get(SEED_ENV)
        if env is None or env == "":
            return 0
        try:
            return int(env)
        except ValueError:
            raise _config_error(f"{SEED_ENV} must be an integer, got {env!r}") from None

    def validate(self):
        if self.detector not in DETECTORS:
            raise _config_error(f"detector must be one of {DETECTORS}")
        if self.mode not in swaptest.MODES:
            raise _config_error(f"mode must be one of {swaptest.MODES}")
        if self.mode == "shots" and (self.shots is None or int(self.shots) < 1):
            raise _config_error("shots mode needs shots >= 1")
        if not 0 < self.p_t < 1:
            raise _config_error("p_t must lie in (0, 1)")
        if self.solver not in ("classical", "hhl"):
            raise _config_error("solver must be 'classical' or 'hhl'")
        if self.evolution not in ("exact", "hamsim"):
            raise _config_error("evolution must be 'exact' or 'hamsim'")
        if self.kernel is not None and self.kernel not in ocsvm.KINDS:
            raise _config_error(f"kernel must be one of {ocsvm.KINDS}")
        if self.phase_bits < 1 or self.reps < 1:
            raise _config_error("phase_bits and reps must be >= 1")
        if self.workers < 1 or self.trials < 1:
            raise _config_error("workers and trials must be >= 1")
        if self.dataset is not None and self.dataset_spec is not None:
            raise _config_error("give either dataset or dataset_spec, not both")
        return self


@dataclass
class ScoreRecord:
    state_id: str
    detector: str
    route: str
    mode: str
    f: float
    stderr: float
    shots: int
    success_probs: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    timing: float | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScoreRecord":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - names)
        if unknown:
            raise _config_error(f"unknown ScoreRecord fields {unknown}", "ScoreRecord")
        return cls(**doc)


def spec_from_dict(doc: dict) -> registry.DatasetSpec:
    if not isinstance(doc, dict):
        raise _config_error("dataset_spec must be an object")
    names = {f.name for f in fields(registry.DatasetSpec)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise _config_error(f"unknown dataset_spec fields {unknown}")
    doc = dict(doc)
    if doc.get("base_amps") is not None:
        doc["base_amps"] = tuple(complex(*a) if isinstance(a, list) else a
                                 for a in doc["base_amps"])
    return registry.DatasetSpec(**doc)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _write(path, text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# -- commands -----------------------------------------------------------------

def cmd_generate(spec: registry.DatasetSpec, out=None) -> registry.TrainingSet:
    ts = registry.synthesize(spec)
    _write(out, registry.dumps(ts))
    return ts


def _load_dataset(cfg: RunConfig) -> registry.TrainingSet:
    if cfg.dataset is not None:
        return registry.load(cfg.dataset)
    if cfg.dataset_spec is not None:
        return registry.synthesize(spec_from_dict(cfg.dataset_spec))
    raise _config_error("score needs dataset or dataset_spec", "cmd_score")


def _kpca_routes(cfg, ts):
    if cfg.route == "all":
        return ["mixed"] if ts.kind == "mixed" else ["inner-products", "global"]
    if cfg.route == "auto":
        return ["mixed" if ts.kind == "mixed" else "inner-products"]
    if cfg.route not in kpca.ROUTES:
        raise _config_error(f"kpca route must be one of {kpca.ROUTES + ('auto', 'all')}")
    return [cfg.route]


def _svm_routes(cfg, ts):
    both = ("direct", "overlap-circuit")
    if cfg.route == "all":
        return ["direct"] if ts.kind == "mixed" or cfg.kernel == "superfidelity" else list(both)
    if cfg.route == "auto":
        return ["direct"]
    if cfg.route not in both:
        raise _config_error(f"ocsvm route must be one of {both + ('auto', 'all')}")
    return [cfg.route]


def _timed(fn, on: bool):
    start = time.perf_counter()
    res = fn()
    return res, (time.perf_counter() - start if on else None)


def cmd_score(cfg: RunConfig) -> list:
    cfg.validate()
    ts = _load_dataset(cfg)
    seed = cfg.effective_seed()
    shots = cfg.shots if cfg.mode == "shots" else None
    records = []
    if cfg.detector == "kpca":
        routes = _kpca_routes(cfg, ts)
        for pi, (sid, probe) in enumerate(ts.probes()):
            for ri, route in enumerate(routes):
                s = qcore.derive_seed(seed, pi, ri)
                res, dt = _timed(lambda: kpca.score(probe, route, cfg.mode, shots, s,
                                                    fallback=True), cfg.timing)
                records.append(ScoreRecord(sid, "kpca", route, cfg.mode, float(res.f),
                                           float(res.stderr), int(res.shots),
                                           dict(res.success_probs), list(res.flags), dt))
        return records
    routes = _svm_routes(cfg, ts)
    kern = ocsvm.build_kernel(ts, cfg.kernel, cfg.mode, shots, qcore.derive_seed(seed, 10 ** 7))
    if cfg.solver == "hhl":
        alpha = ocsvm.solve_alpha_hhl(kern, cfg.p_t, cfg.phase_bits, cfg.reps, seed, cfg.evolution)
    else:
        alpha = ocsvm.solve_alpha_classical(kern, cfg.p_t)
    kernel_shots = 0
    if cfg.mode == "shots":
        n_pairs = ts.M * (ts.M - 1) // 2 if kern.kind == "fidelity" else ts.M * (ts.M + 1) // 2
        kernel_shots = n_pairs * int(shots)
    flags = ["1/p_t>log2(M)"] if alpha.condition_flag else []
    for pi, (sid, probe) in enumerate(ts.probes()):
        for ri, route in enumerate(routes):
            s = qcore.derive_seed(seed, pi, ri)
            res, dt = _timed(lambda: ocsvm.score(probe, alpha, route, cfg.mode, shots, s),
                             cfg.timing)
            succ = dict(res.success_probs)
            if alpha.success_prob is not None:
                succ["hhl"] = alpha.success_prob
            records.append(ScoreRecord(sid, "ocsvm", route, cfg.mode, float(res.f),
                                       float(res.stderr), int(res.shots) + kernel_shots,
                                       succ, list(flags), dt))
    return records


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([r.state_id, r.detector, r.route, r.mode, repr(r.f), repr(r.stderr), r.shots])
    return buf.getvalue()


def cmd_validate(scope="all", inject=(), out=None, stream=None) -> int:
    stream = stream or sys.stdout
    results = validation.run(scope, tuple(inject))
    for r in results:
        print(r.line(), file=stream)
    failed = [r.id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed"
          + (f"; failed: {', '.join(failed)}" if failed else ""), file=stream)
    if out is not None:
        _write(out, _dump_json([r.to_dict() for r in results]))
    return 1 if failed else 0


# -- sweeps -------------------------------------------------------------------

def _sweep_shots(cfg, grid, seed):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    a, b = qcore.haar_state(4, rng), qcore.haar_state(4, rng)
    sa, sb = registry.StateSource.from_amplitudes(a), registry.StateSource.from_amplitudes(b)
    exact = np.vdot(a, b).real

    def point(n):
        n = int(n)
        errs = [abs(swaptest.modified_swap_test(sa, sb, 1, "shots", n,
                                                qcore.derive_seed(seed, n, t)).value - exact)
                for t in range(cfg.trials)]
        # decoded value is 1 - 2P, so its error is twice the probability error
        return float(np.median(errs)), 2.0 / math.sqrt(4 * n)
    return point


def _sweep_theta(cfg, grid, seed):
    base = dict(cfg.dataset_spec or {"delta": 0.0})
    base.setdefault("seed", seed)

    def point(theta):
        spec = spec_from_dict({**base, "anomaly": "rotation", "anomaly_param": float(theta)})
        return float(kpca.score(registry.synthesize(spec), "inner-products", fallback=True).f), None
    return point


def _sweep_reps(cfg, grid, seed):
    m = int((cfg.dataset_spec or {}).get("M", 4))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    train = [qcore.haar_state(4, rng) for _ in range(m)]
    ts = registry.training_set_from_vectors(train, train[0])
    k0 = ocsvm.build_kernel_pure(ts)[1].density
    sigma = qcore.random_density(m, rng)
    exact = hamsim.exact_exp_k(k0, sigma, 1.0)
    err = lambda n: qcore.trace_distance(hamsim.simulate_exp_k(k0, sigma, 1.0, int(n)), exact)
    n0 = int(grid[0])
    e0 = err(n0)
    return lambda n: (float(err(n)), e0 * n0 / int(n))


DEFAULT_GRIDS = {"shots": [100, 1000, 10000],
                 "theta": [float(x) for x in np.linspace(0, math.pi / 2, 7)],
                 "reps": [16, 32, 64]}


def cmd_sweep(cfg: RunConfig) -> list:
    if cfg.sweep not in SWEEPS:
        raise _config_error(f"sweep must be one of {SWEEPS}", "cmd_sweep")
    grid = list(cfg.grid) if cfg.grid else DEFAULT_GRIDS[cfg.sweep]
    if not grid:
        raise _config_error("grid must be non-empty", "cmd_sweep")
    if cfg.sweep in ("shots", "reps") and any(int(x) < 1 or int(x) != x for x in grid):
        raise _config_error(f"{cfg.sweep} grid needs positive integers", "cmd_sweep")
    seed = cfg.effective_seed()
    point = {"shots": _sweep_shots, "theta": _sweep_theta, "reps": _sweep_reps}[cfg.sweep](
        cfg, grid, seed)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        values = list(pool.map(point, grid))   # map keeps grid order
    return [(cfg.sweep, x, v, b) for x, (v, b) in zip(grid, values)]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for name, x, v, b in rows:
        w.writerow([name, repr(x), repr(v), "" if b is None else repr(b)])
    return buf.getvalue()


# -- argument parsing ---------------------------------------------------------

SPEC_FLAGS = {"M": int, "d": int, "kind": str, "base": str, "delta": float, "anomaly": str,
              "anomaly_param": float, "holdout": int, "perturbation_rank": int,
              "noise": float, "base_index": int}


def _parse_grid(text):
    try:
        return [float(x) if any(c in x for c in ".eE") else int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qadkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a dataset file")
    g.add_argument("--spec", help="DatasetSpec JSON file")
    for name, typ in SPEC_FLAGS.items():
        g.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="output path (default stdout)")

    s = sub.add_parser("score", help="run a detector over the test and held-out states")
    s.add_argument("--config", help="RunConfig JSON file")
    s.add_argument("--dataset")
    s.add_argument("--detector", choices=DETECTORS)
    s.add_argument("--route", help="kpca: inner-products|global|mixed; ocsvm: "
                                   "direct|overlap-circuit; or auto|all")
    s.add_argument("--kernel", choices=ocsvm.KINDS)
    s.add_argument("--mode", choices=swaptest.MODES)
    s.add_argument("--shots", type=int)
    s.add_argument("--p-t", dest="p_t", type=float)
    s.add_argument("--solver", choices=("classical", "hhl"))
    s.add_argument("--phase-bits", dest="phase_bits", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--evolution", choices=("exact", "hamsim"))
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--csv")
    s.add_argument("--timing", action="store_true", default=None)

    v = sub.add_parser("validate", help="run the acceptance checks")
    v.add_argument("--scope", default="all", choices=validation.SCOPES)
    v.add_argument("--out", help="JSON report path")
    v.add_argument("--inject", action="append", default=[], help=argparse.SUPPRESS)

    w = sub.add_parser("sweep", help="emit plot-ready CSV for a parameter grid")
    w.add_argument("--config")
    w.add_argument("--sweep", choices=SWEEPS)
    w.add_argument("--grid", type=_parse_grid, help="comma-separated grid values")
    w.add_argument("--trials", type=int)
    w.add_argument("--seed", type=int)
    w.add_argument("--workers", type=int)
    w.add_argument("--out")
    return p


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise _config_error(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _config_error(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise _config_error("config must be a JSON object")
    return doc


def _merge(doc: dict, args, names) -> RunConfig:
    merged = dict(doc)
    for name in names:
        val = getattr(args, name, None)
        if val is not None:
            merged[name] = val
    merged["command"] = args.command
    return RunConfig.from_dict(merged)


def _run(args) -> int:
    if args.command == "generate":
        doc = _load_config(args.spec)
        for name in list(SPEC_FLAGS) + ["seed"]:
            if getattr(args, name) is not None:
                doc[name] = getattr(args, name)
        if "seed" not in doc:
            doc["seed"] = RunConfig().effective_seed()
        cmd_generate(spec_from_dict(doc), args.out)
        return 0
    if args.command == "score":
        cfg = _merge(_load_config(args.config), args,
                     ["dataset", "detector", "route", "kernel", "mode", "shots", "p_t",
                      "solver", "phase_bits", "reps", "evolution", "seed", "out", "csv",
                      "timing"])
        records = cmd_score(cfg)
        _write(cfg.out, _dump_json([r.to_dict() for r in records]))
        if cfg.csv:
            _write(cfg.csv, records_csv(records))
        return 0
    if args.command == "validate":
        return cmd_validate(args.scope, args.inject, args.out)
    cfg = _merge(_load_config(args.config), args,
                 ["sweep", "grid", "trials", "seed", "workers", "out"]).validate()
    _write(cfg.out, sweep_csv(cmd_sweep(cfg)))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except QadError as exc:
        sys.stderr.write(_dump_json(exc.to_dict()))
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        # argument-level problems that did not come through a module precondition
        err = _config_error(str(exc), args.command)
        sys.stderr.write(_dump_json(err.to_dict()))
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
