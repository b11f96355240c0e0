"""Experiment harness and command-line entry point.

Each experiment turns a config into a list of :class:`ResultRow`, evaluated
in parallel and written as CSV in grid order.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .coherent import binary_entropy, linear_sequence_protocol, qubit_swap_sequence, rw_protocol
from .incoherent import EngineConfig, qubit_engine_protocol, virtual_swap_sequence
from .spectra import NumericalError, Spectrum

COLUMNS = ("experiment", "beta", "beta_h", "beta_star", "omega_s", "eps", "N", "ops",
           "excess_work", "inv_excess", "ratio")
EXPERIMENTS = ("fig2", "fig3", "scaling", "custom")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "fig2"
    beta: float = 1.0
    beta_h: float = 0.0
    beta_star: float = 5.0
    omega_s: float = 1.0
    eps: float | None = None
    n_list: tuple[int, ...] | None = None
    m_list: tuple[int, ...] = (1, 5)
    ratios: tuple[float, ...] = (5.0, 20.0)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.n_list is not None and (not self.n_list or any(n < 1 for n in self.n_list)):
            raise ConfigError("n_list must be non-empty with positive entries")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    @property
    def grid(self) -> tuple[int, ...]:
        if self.n_list is not None:
            return self.n_list
        return {"fig2": (8, 16, 32, 64, 128, 256), "fig3": (50, 100, 200, 400, 800),
                "scaling": (1000, 10000), "custom": (10, 100, 1000)}[self.experiment]

    @property
    def target_eps(self) -> float:
        if self.eps is not None:
            return self.eps
        return 0.01 if self.experiment == "fig3" else 1e-3


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    N: int
    ops: int
    excess_work: float
    inv_excess: float
    ratio: float
    beta: float = math.nan
    beta_h: float = math.nan
    beta_star: float = math.nan
    omega_s: float = math.nan
    eps: float = math.nan
    note: str = field(default="", compare=False)


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else format(x, ".17g")


def emit_csv(rows, path=None) -> str:
    """Write rows as RFC 4180 CSV (UTF-8, CRLF); returns the text."""
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])
    text = buf.getvalue()
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
    return text


def read_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def _parallel(fn: Callable, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        # map keeps input order whatever the completion order
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- fig 2

def _fig2_linear(N: int, eps: float, beta: float) -> ResultRow:
    top = math.log((1 - eps) / eps) / beta
    gaps = top * np.arange(1, N + 1) / N
    r = qubit_swap_sequence(gaps, beta)
    ex = r.excess(beta) / beta
    return ResultRow("fig2/linear", N, N, ex, 1 / ex, N * ex, beta=beta, eps=eps)


def rw_theta_for(N: int, eps: float) -> float:
    """theta at which the degeneracy-doubling protocol leaves excited mass eps."""
    f = lambda th: rw_protocol(N, th).one_minus_p0 - eps
    lo, hi = 1e-9, N * (1 - 1e-12)
    if f(lo) * f(hi) > 0:
        raise NumericalError(f"excited population {eps} unreachable at N={N}")
    return brentq(f, lo, hi, xtol=1e-12, rtol=1e-15, maxiter=500)


def _fig2_rw(N: int, eps: float, beta: float) -> ResultRow:
    try:
        th = rw_theta_for(N, eps)
    except NumericalError as e:
        return ResultRow("fig2/rw", N, 1, math.nan, math.nan, math.nan, beta=beta, eps=eps,
                         note=str(e))
    r = rw_protocol(N, th)
    ex = r.excess / beta
    return ResultRow("fig2/rw", N, 1, ex, 1 / ex, N * ex, beta=beta, eps=eps)


def run_fig2(cfg: ExperimentConfig) -> list[ResultRow]:
    """Degenerate qubit cooled to excited population eps by the linear qubit
    sequence and by the degeneracy-doubling machine.

    Excess work is in units of 1/beta. The smallest machine gap of the linear
    sequence shrinks like 1/N, so it is not used as the unit."""
    eps = cfg.target_eps
    if not 0 < eps < 0.5:
        raise ConfigError("eps must lie in (0, 0.5)")
    jobs = [(kind, N) for N in cfg.grid for kind in ("linear", "rw")]

    def work(job):
        kind, N = job
        return (_fig2_linear if kind == "linear" else _fig2_rw)(N, eps, cfg.beta)

    rows = _parallel(work, jobs, cfg.threads)
    for a, b in zip(rows[::2], rows[1::2]):
        if not math.isnan(b.excess_work) and not a.excess_work < b.excess_work:
            raise NumericalError(f"linear sequence not cheaper than RW at N={a.N}")
    return rows


# ---------------------------------------------------------------- fig 3

def fig3_coherent(N: int, p_final: float = 0.99, beta: float = 1.0) -> float:
    top = math.log(p_final / (1 - p_final)) / beta
    r = qubit_swap_sequence(top * np.arange(1, N + 1) / N, beta)
    return r.excess(beta) / beta


def fig3_incoherent(N: int, m: int, p_final: float = 0.99, beta: float = 1.0,
                    beta_h: float = 0.0) -> float:
    """Excess for N exchanges split into N/m stages of m repetitions, stage gaps
    spaced so that the last stage lands on the requested ground population."""
    if N % m:
        raise ConfigError(f"N={N} is not a multiple of m={m}")
    stages = np.arange(1, N // m + 1)

    def run(step):
        return virtual_swap_sequence(step * stages, beta, beta_h, reps=m)

    step = brentq(lambda s: run(s).p_final - (1 - p_final), 1e-6, 50.0, xtol=1e-14)
    r = run(step)
    dS = math.log(2) - binary_entropy(r.p_final)
    return r.eta * r.heat - dS / beta


def run_fig3(cfg: ExperimentConfig) -> list[ResultRow]:
    """Coherent sequence against incoherent sequences at equal exchange count.

    For incoherent rows ``ratio`` is the excess relative to the coherent
    excess at the same N, the multiplier in operation count."""
    p = 1 - cfg.target_eps
    jobs = [(0, N) for N in cfg.grid] + [(m, N) for m in cfg.m_list for N in cfg.grid]

    def work(job):
        m, N = job
        c = fig3_coherent(N, p, cfg.beta)
        if m == 0:
            return ResultRow("fig3/coherent", N, N, c, 1 / c, N * c, beta=cfg.beta,
                             beta_h=cfg.beta_h, eps=cfg.target_eps)
        x = fig3_incoherent(N, m, p, cfg.beta, cfg.beta_h)
        return ResultRow(f"fig3/incoherent_m{m}", N, N, x, 1 / x, x / c, beta=cfg.beta,
                         beta_h=cfg.beta_h, eps=cfg.target_eps)

    return _parallel(work, jobs, cfg.threads)


def fig3_multipliers(rows) -> dict[int, float]:
    """Multiplier per repetition count, taken at the largest N."""
    out = {}
    for r in rows:
        if r.experiment.startswith("fig3/incoherent_m"):
            m = int(r.experiment.rsplit("m", 1)[1])
            if m not in out or r.N >= out[m][0]:
                out[m] = (r.N, r.ratio)
    return {m: v for m, (_, v) in out.items()}


# ---------------------------------------------------------------- scaling

def run_scaling(cfg: ExperimentConfig) -> list[ResultRow]:
    """N (W - dF)/omega_S for the coherent sequence and N (eta dE_H - dF)/omega_S
    for the qubit engine, over beta*/beta ratios and N."""
    jobs = [(kind, r, N) for r in cfg.ratios for N in cfg.grid for kind in ("coherent", "incoherent")]
    H = Spectrum([0.0, cfg.omega_s])

    def work(job):
        kind, r, N = job
        bs = r * cfg.beta
        if r == 1:
            ex, ops = 0.0, 0
        elif kind == "coherent":
            t = linear_sequence_protocol(H, cfg.beta, bs, N)
            ex, ops = t.dE_M - t.dS_tilde_S / cfg.beta, N
        else:
            e = qubit_engine_protocol(EngineConfig(cfg.beta, cfg.beta_h, bs, N), cfg.omega_s)
            ex, ops = e.excess, e.ops
        inv = cfg.omega_s / ex if ex > 0 else math.inf
        return ResultRow(f"scaling/{kind}", N, ops, ex, inv, N * ex / cfg.omega_s,
                         beta=cfg.beta, beta_h=cfg.beta_h if kind == "incoherent" else math.nan,
                         beta_star=bs, omega_s=cfg.omega_s)

    return _parallel(work, jobs, cfg.threads)


def fit_scaling(rows, beta: float) -> list[dict]:
    """Per (kind, beta*/beta): the constant at the largest N, the target
    (beta*/beta - 1)/2, and their relative residual."""
    best = {}
    for r in rows:
        key = (r.experiment, r.beta_star / beta)
        if key not in best or r.N > best[key].N:
            best[key] = r
    out = []
    for (kind, ratio), r in best.items():
        target = 0.5 * (ratio - 1)
        resid = (r.ratio - target) / target if target else r.ratio
        out.append(dict(kind=kind, ratio=ratio, N=r.N, constant=r.ratio, target=target,
                        residual=resid))
    return out


# ---------------------------------------------------------------- custom

def run_custom(cfg: ExperimentConfig) -> list[ResultRow]:
    """Coherent linear sequence and qubit engine on a thermal qubit with the
    configured temperatures."""
    return run_scaling(replace(cfg, ratios=(cfg.beta_star / cfg.beta,)))


RUNNERS = {"fig2": run_fig2, "fig3": run_fig3, "scaling": run_scaling, "custom": run_custom}


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------- CLI

_KEYS = {
    "experiment": str, "beta": float, "beta_h": float, "beta_star": float,
    "omega_s": float, "eps": float, "seed": int, "threads": int, "out": str,
    "n_list": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
    "m_list": lambda s: tuple(int(x) for x in s.split(",") if x.strip()),
    "ratios": lambda s: tuple(float(x) for x in s.split(",") if x.strip()),
}


def load_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    p = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                  inline_comment_prefixes=("#",))
    p.optionxform = str
    try:
        text = Path(path).read_text(encoding="utf-8")
        p.read_string("[config]\n" + text)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return dict(p["config"])


def _coerce(raw: dict) -> dict:
    out = {}
    for k, v in raw.items():
        key = k.strip().replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {k!r}")
        try:
            out[key] = _KEYS[key](v.strip()) if isinstance(v, str) else v
        except ValueError as e:
            raise ConfigError(f"bad value for {k}: {v!r}") from e
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact-bench",
                                 description="Cooling-protocol experiments with CSV output.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("selftest",):
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--beta-h", type=float, dest="beta_h")
        sp.add_argument("--beta-star", type=float, dest="beta_star")
        sp.add_argument("--omega-s", type=float, dest="omega_s")
        sp.add_argument("--eps", type=float)
        sp.add_argument("--n-list", dest="n_list")
    return ap


SELFTEST_GRIDS = {"fig2": (8, 16), "fig3": (50, 100), "scaling": (100, 200), "custom": (10, 20)}


def selftest(threads: int = 1) -> list[ResultRow]:
    """Small fixed run of every experiment plus a few internal consistency checks."""
    rows = []
    for name, grid in SELFTEST_GRIDS.items():
        rows += run_experiment(ExperimentConfig(experiment=name, n_list=grid, threads=threads))
    for r in rows:
        if not (r.excess_work > 0) and not math.isnan(r.excess_work):
            raise NumericalError(f"non-positive excess in {r.experiment} at N={r.N}")
    return rows


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        raw = load_config(args.config) if args.config else {}
        settings = _coerce(raw)
        for k in ("beta", "beta_h", "beta_star", "omega_s", "eps", "threads"):
            v = getattr(args, k)
            if v is not None:
                settings[k] = v
        if args.n_list is not None:
            settings["n_list"] = _KEYS["n_list"](args.n_list)
        cfg_out = settings.pop("out", None)
        out = args.out or cfg_out
        if args.command == "selftest":
            rows = selftest(settings.get("threads", 1))
        else:
            settings["experiment"] = args.command
            cfg = ExperimentConfig(**settings)
            rows = run_experiment(cfg)
    except (ConfigError, TypeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    try:
        text = emit_csv(rows, out)
    except OSError as e:
        print(str(e), file=sys.stderr)
        return 1
    if out is None:
        sys.stdout.write(text)
    if args.command == "fig3":
        for m, v in sorted(fig3_multipliers(rows).items()):
            print(f"multiplier m={m}: {v:.4f}", file=sys.stderr)
    if args.command in ("scaling", "custom"):
        for f in fit_scaling(rows, rows[0].beta if rows else 1.0):
            print(f"{f['kind']} beta*/beta={f['ratio']:g} N={f['N']}: constant {f['constant']:.6g}"
                  f" target {f['target']:.6g} residual {f['residual']:+.3%}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
