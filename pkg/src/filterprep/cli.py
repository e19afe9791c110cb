"""Batch runner: ``filterprep <experiment> --config run.json``.

Exit codes: 0 when at least one run succeeded (or every check passed for
the ``bounds`` and ``jordan`` tables), 2 when no run produced a state
because every run aborted or exhausted its retries, 1 on any error.
"""
from __future__ import annotations

import argparse
import functools
import json
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .amplification import prepare_filtered_state, sweep_grid
from .checks import jordan_pairs, lower_bound_trials, upper_bound_grid
from .core import MAX_QUBITS, CapacityError, ValidationError, make_rng, spectral_decompose
from .hamiltonians import build_model, normalize_spectrum
from .io import FORMATS, ResultRow, ResultWriter, iter_table, read_matrix
from .jordan import jordan_decompose, run_naive_demo
from .filters import select_filter_params
from .qma import FIXTURES, VerifierCircuit, prepare_witness
from .thermal import estimate_dos, prepare_thermal_state

EXPERIMENTS = ("filter", "sweep", "naive", "jordan", "qma", "thermal", "bounds")
OUT_DIR_ENV = "FILTERPREP_OUT_DIR"
AUTO_EPS_START = 0.25


class ConfigError(ValueError):
    pass


# -- config ------------------------------------------------------------------


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict
    source: str = ""
    text: str = field(default="", repr=False)

    def where(self, key: str) -> str:
        line = _line_of(self.text, key.split(".")[-1])
        loc = f"{self.source}:{line}" if line else self.source or "<config>"
        return f"{loc}: key '{key}'"

    def get(self, key: str, default: Any = ..., cast=None):
        node = self.raw
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is ...:
                    raise ConfigError(f"{self.where(key)} is required for '{self.kind}'")
                return default
            node = node[part]
        if cast is None:
            return node
        try:
            return cast(node)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.where(key)}: {exc}") from None

    @property
    def name(self) -> str:
        return str(self.raw.get("name", self.kind))

    def seeds(self, offset: int = 0) -> list[int]:
        s = self.get("seeds", [0])
        if isinstance(s, int):
            s = [s]
        elif isinstance(s, dict):
            try:
                s = list(range(int(s.get("start", 0)), int(s["stop"])))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"{self.where('seeds')}: expected a list or {{'start', 'stop'}}") from None
        if not isinstance(s, list) or not all(isinstance(x, int) for x in s):
            raise ConfigError(f"{self.where('seeds')}: expected a list of integers")
        return [x + offset for x in s]


def load_config(path: str | Path, kind: str | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, kind, str(path))


def parse_config(text: str, kind: str | None = None, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    declared = raw.get("experiment")
    if kind is None:
        kind = declared
    elif declared is not None and declared != kind:
        line = _line_of(text, "experiment")
        raise ConfigError(f"{source}:{line}: config is for '{declared}' but the subcommand is '{kind}'")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"{source}: unknown experiment {kind!r}; expected one of {EXPERIMENTS}")
    cfg = ExperimentConfig(kind, raw, source, text)
    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"{cfg.where('format')}: expected one of {FORMATS}")
    return cfg


# -- shared per-process caches -----------------------------------------------


@functools.lru_cache(maxsize=8)
def _model(model_json: str):
    spec = json.loads(model_json)
    H = build_model(spec["kind"], int(spec["n"]), spec.get("params"), spec.get("seed"))
    delta = float(spec.get("delta", 0.125))
    Hn, smap = normalize_spectrum(H, delta)
    decomp = spectral_decompose(Hn)
    exact = smap.inverse(decomp.eigenvalues)
    return H, (Hn, smap, decomp), np.asarray(exact), delta


def _model_key(cfg: dict) -> str:
    model = dict(cfg["model"])
    model.setdefault("delta", cfg.get("delta", 0.125))
    return json.dumps(model, sort_keys=True)


def _nearest(values, x: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(values[np.argmin(np.abs(values - x))])


def _filter_row(name, seed, mu, eps, rep, exact, smap, wall) -> ResultRow:
    target = rep.output_energy if rep.output_energy is not None else float(smap.inverse(mu))
    return ResultRow(
        name, seed, mu, eps, rep.k, rep.eta, rep.overlap, rep.iterations, rep.retries, rep.aborted,
        rep.output_energy, _nearest(exact, target), wall,
    )


def _auto_eps(n: int, mu: float, max_qubits: int) -> float:
    eps, best = AUTO_EPS_START, None
    while True:
        try:
            select_filter_params(eps, n, mu, max_qubits)
        except CapacityError:
            break
        best, eps = eps, eps / 2
    if best is None:
        raise CapacityError(f"no eps <= {AUTO_EPS_START} fits {max_qubits} qubits for n={n}")
    return best


# -- task runners (top level so worker processes can import them) -------------


def _run_filter(cfg: dict, mu: float, seed: int, index: int) -> ResultRow:
    t0 = time.perf_counter()
    H, norm, exact, delta = _model(_model_key(cfg))
    n = norm[0].num_qubits
    mq = int(cfg.get("max_qubits", MAX_QUBITS))
    eps = cfg["eps"]
    eps = _auto_eps(n, mu, mq) if eps == "auto" else float(eps)
    rng = make_rng(seed, index) if index >= 0 else make_rng(seed)
    _, rep = prepare_filtered_state(
        H, mu, eps, rng, int(cfg.get("max_retries", 8)), delta=delta, max_qubits=mq, normalized=norm
    )
    return _filter_row(cfg["name"], seed, mu, eps, rep, exact, norm[1], _wall(cfg, t0))


def _run_naive(cfg: dict, mu: float, seed: int, index: int) -> ResultRow:
    t0 = time.perf_counter()
    H, (Hn, smap, decomp), exact, delta = _model(_model_key(cfg))
    k = int(cfg["k"])
    res = run_naive_demo(H, mu, k, seed, int(cfg.get("max_retries", 64)), delta)
    sys_state = res.state.amplitudes.reshape(Hn.dim, -1)
    rho_energy = float(np.real(np.einsum("ia,ij,ja->", sys_state.conj(), Hn.matrix, sys_state)))
    e = float(smap.inverse(rho_energy))
    return ResultRow(
        cfg["name"], seed, mu, None, k, 1, res.residual_overlap, res.iterations, res.retries, False,
        e, _nearest(exact, e), _wall(cfg, t0),
    )


@functools.lru_cache(maxsize=4)
def _verifier(vjson: str, base: str) -> VerifierCircuit:
    spec = json.loads(vjson)
    if "fixture" in spec:
        name = spec["fixture"]
        if name not in FIXTURES:
            raise ValidationError(f"unknown verifier fixture {name!r}; expected one of {sorted(FIXTURES)}")
        args = [spec["theta"]] if name != "identity" else []
        return FIXTURES[name](*args)
    path = Path(spec["matrix"])
    if not path.is_absolute():
        path = Path(base) / path
    return VerifierCircuit(read_matrix(path), int(spec["n"]), int(spec["h"]), label=str(path.name))


def _run_qma(cfg: dict, mu: float, seed: int, index: int) -> ResultRow:
    t0 = time.perf_counter()
    V = _verifier(json.dumps(cfg["verifier"], sort_keys=True), cfg.get("_base", "."))
    k = cfg.get("k")
    eps = float(cfg.get("eps", 0.1))
    _, rep = prepare_witness(
        V, mu, eps, make_rng(seed), int(cfg.get("max_retries", 8)),
        k=None if k is None else int(k), max_qubits=int(cfg.get("max_qubits", MAX_QUBITS)),
    )
    ps = jordan_decompose(V.Q(), V.R()).p_values
    target = rep.output_energy if rep.output_energy is not None else mu
    return ResultRow(
        cfg["name"], seed, mu, eps, rep.k, rep.eta, rep.overlap, rep.iterations, rep.retries, rep.aborted,
        rep.output_energy, _nearest(ps, target) if ps.size else None, _wall(cfg, t0),
    )


@functools.lru_cache(maxsize=4)
def _dos(model_json: str, eps: float, dos_seed: int, n_seeds: int, mq: int):
    H, _, _, delta = _model(model_json)
    return estimate_dos(H, eps, dos_seed, n_seeds, delta=delta, max_qubits=mq)


def _run_thermal(cfg: dict, mu: float, seed: int, index: int) -> ResultRow:
    t0 = time.perf_counter()
    key = _model_key(cfg)
    H, norm, exact, delta = _model(key)
    eps, mq = float(cfg["eps"]), int(cfg.get("max_qubits", MAX_QUBITS))
    dos = cfg.get("_dos") or _dos(key, eps, int(cfg.get("dos_seed", 0)), int(cfg.get("dos_seeds", 8)), mq)
    res = prepare_thermal_state(
        H, float(cfg["temperature"]), eps, seed, dos=dos, source=cfg.get("source", "estimated"),
        positive_exponent=bool(cfg.get("positive_exponent", False)), delta=delta, max_qubits=mq,
    )
    rep = res.report
    centre = res.energy if res.energy is not None else rep.mu
    row = _filter_row(cfg["name"], seed, centre, eps, rep, exact, norm[1], _wall(cfg, t0))
    return row


def _wall(cfg: dict, t0: float) -> float:
    return (time.perf_counter() - t0) * 1e3 if cfg.get("record_wall_time", True) else 0.0


RUNNERS = {"filter": _run_filter, "sweep": _run_filter, "naive": _run_naive, "qma": _run_qma, "thermal": _run_thermal}


def _call(task):
    kind, cfg, mu, seed, index = task
    return RUNNERS[kind](cfg, mu, seed, index)


# -- planning ----------------------------------------------------------------


def _float_list(cfg: ExperimentConfig, key: str) -> list[float]:
    v = cfg.get(key)
    vals = v if isinstance(v, list) else [v]
    try:
        return [float(x) for x in vals]
    except (TypeError, ValueError):
        raise ConfigError(f"{cfg.where(key)}: expected a number or a list of numbers") from None


def _plain(cfg: ExperimentConfig) -> dict:
    d = dict(cfg.raw)
    d["name"] = cfg.name
    d["_base"] = str(Path(cfg.source).parent) if cfg.source and cfg.source != "<config>" else "."
    return d


def _check_model(cfg: ExperimentConfig) -> dict:
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise ConfigError(f"{cfg.where('model')}: expected an object")
    cfg.get("model.kind")
    cfg.get("model.n", cast=int)
    return model


def plan_tasks(cfg: ExperimentConfig, seed_offset: int = 0) -> list[tuple]:
    """(kind, config, mu, seed, stream index) tuples in (mu, seed) order."""
    seeds = cfg.seeds(seed_offset)
    d = _plain(cfg)
    kind = cfg.kind
    if kind in ("filter", "sweep", "naive", "thermal"):
        _check_model(cfg)
    if kind == "filter":
        cfg.get("eps")
        mus = _float_list(cfg, "mu")
        return [(kind, d, mu, s, -1) for mu in sorted(mus) for s in seeds]
    if kind == "sweep":
        eps = cfg.get("eps", cast=float)
        n = cfg.get("model.n", cast=int)
        grid, _ = sweep_grid(n, eps, float(cfg.raw.get("delta", 0.125)), int(cfg.raw.get("max_qubits", MAX_QUBITS)))
        return [(kind, d, float(mu), s, i) for i, mu in enumerate(grid) for s in seeds]
    if kind == "naive":
        cfg.get("k", cast=int)
        mus = _float_list(cfg, "threshold")
        return [(kind, d, mu, s, -1) for mu in sorted(mus) for s in seeds]
    if kind == "qma":
        v = cfg.get("verifier")
        if not isinstance(v, dict) or not ("fixture" in v or "matrix" in v):
            raise ConfigError(f"{cfg.where('verifier')}: expected {{'fixture': ...}} or {{'matrix': path, 'n', 'h'}}")
        mus = _float_list(cfg, "mu")
        return [(kind, d, mu, s, -1) for mu in sorted(mus) for s in seeds]
    if kind == "thermal":
        cfg.get("temperature", cast=float)
        eps = cfg.get("eps", cast=float)
        mq = cfg.get("max_qubits", MAX_QUBITS, cast=int)
        # estimated once here so worker processes share it
        d["_dos"] = _dos(_model_key(d), eps, cfg.get("dos_seed", 0, cast=int), cfg.get("dos_seeds", 8, cast=int), mq)
        return [(kind, d, 0.0, s, -1) for s in seeds]
    raise ConfigError(f"experiment '{kind}' does not produce result rows")


def iter_rows(cfg: ExperimentConfig, workers: int = 1, seed_offset: int = 0) -> Iterator[ResultRow]:
    """Rows in deterministic (mu, seed) order; a worker pool keeps that order."""
    tasks = plan_tasks(cfg, seed_offset)
    if workers <= 1:
        for t in tasks:
            yield _call(t)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_call, tasks, chunksize=1)


# -- check tables --------------------------------------------------------------

BOUNDS_COLUMNS = ("check", "k", "points", "max_violation", "failures", "pass")
JORDAN_COLUMNS = ("index", "dim", "rank_q", "rank_r", "blocks", "max_residual", "spectrum_mismatch", "reconstruction_error", "pass")


def bounds_table(cfg: ExperimentConfig, seed_offset: int = 0) -> list[dict]:
    ks = cfg.get("ks", list(range(2, 9)))
    points = cfg.get("points", 100_000, cast=int)
    tol = cfg.get("tolerance", 1e-12, cast=float)
    rows = []
    for c in upper_bound_grid(ks, points, tol):
        rows.append({"check": "upper", "k": c.k, "points": c.points, "max_violation": c.max_violation,
                     "failures": c.violations, "pass": c.violations == 0})
    seed = cfg.seeds(seed_offset)[0]
    lb = lower_bound_trials(cfg.get("lower_trials", 1000, cast=int), seed)
    rows.append({"check": "lower", "k": "", "points": lb.trials, "max_violation": -lb.min_margin,
                 "failures": lb.failures, "pass": lb.failures == 0})
    return rows


def jordan_table(cfg: ExperimentConfig, seed_offset: int = 0) -> list[dict]:
    tol = cfg.get("tolerance", 1e-8, cast=float)
    seed = cfg.seeds(seed_offset)[0]
    rows = []
    for c in jordan_pairs(cfg.get("count", 200, cast=int), cfg.get("max_dim", 64, cast=int), seed):
        ok = max(c.max_residual, c.spectrum_mismatch, c.reconstruction_error) < tol
        rows.append({**c.__dict__, "pass": ok})
    return rows


def _write_table(rows: list[dict], columns, out, fmt: str):
    fh = out if hasattr(out, "write") else open(out, "w", encoding="utf-8", newline="")
    try:
        if fmt == "csv":
            for line in iter_table(rows, columns):
                fh.write(line + "\n")
        else:
            for r in rows:
                fh.write(json.dumps({c: (int(v) if isinstance(v, np.integer) else v) for c, v in r.items() if c in columns}) + "\n")
        fh.flush()
    finally:
        if fh is not out:
            fh.close()


# -- entry point ---------------------------------------------------------------


def resolve_output(cfg: ExperimentConfig, out: str | None, fmt: str):
    """--out, else the config's ``output``, else stdout.

    With $FILTERPREP_OUT_DIR set, relative paths are placed under it and a
    missing path becomes ``<name>.<format>`` there instead of stdout.
    """
    target = out if out is not None else cfg.raw.get("output")
    base = os.environ.get(OUT_DIR_ENV)
    if target == "-":
        return sys.stdout
    if target is None:
        if not base:
            return sys.stdout
        target = f"{cfg.name}.{fmt}"
    path = Path(target)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def run_experiment(cfg: ExperimentConfig, out=None, fmt: str | None = None, workers: int = 1, seed_offset: int = 0) -> int:
    fmt = fmt or cfg.raw.get("format", "csv")
    target = resolve_output(cfg, out, fmt)
    if isinstance(target, Path):
        target.parent.mkdir(parents=True, exist_ok=True)
    if cfg.kind in ("bounds", "jordan"):
        rows = bounds_table(cfg, seed_offset) if cfg.kind == "bounds" else jordan_table(cfg, seed_offset)
        _write_table(rows, BOUNDS_COLUMNS if cfg.kind == "bounds" else JORDAN_COLUMNS, target, fmt)
        failed = [r for r in rows if not r["pass"]]
        if failed:
            print(f"error: {len(failed)} of {len(rows)} checks failed", file=sys.stderr)
            return 1
        return 0

    tasks_ok = 0
    with ResultWriter(target, fmt) as w:
        for row in iter_rows(cfg, workers, seed_offset):
            w.write(row)
            tasks_ok += row.energy_out is not None
    return 0 if tasks_ok else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filterprep", description="Spectral-filter state preparation experiments.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment description")
        sp.add_argument("--out", default=None, help=f"output file ('-' for stdout); relative paths go under ${OUT_DIR_ENV} if set")
        sp.add_argument("--format", choices=FORMATS, default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--seed-offset", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        cfg = load_config(args.config, args.experiment)
        return run_experiment(cfg, args.out, args.format, args.workers, args.seed_offset)
    except (ConfigError, ValidationError, CapacityError, OSError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
