"""Scenario generation and seeded Monte Carlo studies.

Every trial draws from its own stream, ``SeedSequence(seed, spawn_key=(trial,))``,
so results do not depend on evaluation order or worker count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import Instance, Link, Params, Point, gpl_gains, is_feasible
from .oracle import MAX_PC_N, SizeGuardError, brute_force_opt, brute_force_opt_pc
from .rayleigh import K_SPARSIFY, expected_weight, indicator, optimize_probs, sparsify
from .sched import cluster_select, general_capacity
from .shadowing import ShadowingSpec, gn, shadow

KINDS = ("colocated", "cluster_grid", "random_equilength", "random_general")
STUDIES = ("colocated_growth", "ss_vs_gpl", "fading_equivalence")
ORACLE_MAX_N = 16
FADING_MAX_N = 12

CSV_COLUMNS = (
    "study", "kind", "n", "family", "sigma", "alpha", "beta", "trial",
    "alg_value", "s_size", "strong_count", "opt_uniform", "opt_pc", "opt_gpl",
    "gn", "ratio", "w_fading", "w_opt", "sparsify_mean", "sparsify_se", "feasible",
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    kind: str = "colocated"
    n: int = 8
    length: float = 1.0
    area: float = 10.0
    length_range: tuple[float, float] = (1.0, 10.0)
    clusters: int = 4
    per_cluster: int = 8
    spacing: float = 7.0  # in units of length
    weights: str = "unit"  # or "random"
    spec: ShadowingSpec = field(default_factory=ShadowingSpec)
    params: Params = field(default_factory=Params)
    trials: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n < 1 or self.clusters < 1 or self.per_cluster < 1:
            raise ConfigError("generator counts must be positive")
        if not (self.length > 0 and self.area > 0 and self.spacing > 0):
            raise ConfigError("generator lengths must be positive")
        lo, hi = self.length_range
        if not 0 < lo <= hi:
            raise ConfigError("length_range must satisfy 0 < lo <= hi")
        if self.weights not in ("unit", "random"):
            raise ConfigError("weights must be 'unit' or 'random'")

    @property
    def size(self) -> int:
        return self.clusters * self.per_cluster if self.kind == "cluster_grid" else self.n


def trial_streams(seed: int, trial: int, count: int = 2,
                  key: tuple[int, ...] = ()) -> list[np.random.Generator]:
    """Independent generators for one trial (geometry, shadowing, ...)."""
    ss = np.random.SeedSequence(seed, spawn_key=(*key, trial))
    return [np.random.default_rng(s) for s in ss.spawn(count)]


def _links_from(senders: np.ndarray, lengths: np.ndarray, angles: np.ndarray,
                weights: np.ndarray) -> tuple[Link, ...]:
    rcv = senders + lengths[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    return tuple(
        Link(i, Point(*map(float, senders[i])), Point(*map(float, rcv[i])), float(weights[i]))
        for i in range(len(senders))
    )


def generate(scenario: Scenario, rng: np.random.Generator) -> Instance:
    """Place links for a scenario; co-located instances ignore the stream."""
    sc = scenario
    n = sc.size
    l = sc.length
    if sc.kind == "colocated":
        links = tuple(Link(i, Point(0.0, 0.0), Point(l, 0.0)) for i in range(n))
        if sc.weights == "random":
            w = rng.uniform(0.1, 1.0, n)
            links = tuple(replace(k, weight=float(w[i])) for i, k in enumerate(links))
        return Instance(links, sc.params)
    if sc.kind == "cluster_grid":
        side = math.ceil(math.sqrt(sc.clusters))
        centers = np.array([((c % side) * sc.spacing * l, (c // side) * sc.spacing * l)
                            for c in range(sc.clusters)])
        centers = np.repeat(centers, sc.per_cluster, axis=0)
        # senders within l/4 of the cluster centre
        senders = centers + rng.uniform(-l / 8, l / 8, (n, 2))
        lengths = rng.uniform(l, 2 * l, n)
    elif sc.kind == "random_equilength":
        senders = rng.uniform(0, sc.area * l, (n, 2))
        lengths = rng.uniform(l, 2 * l, n)
    else:
        senders = rng.uniform(0, sc.area * l, (n, 2))
        lengths = rng.uniform(sc.length_range[0], sc.length_range[1], n) * l
    angles = rng.uniform(0, 2 * math.pi, n)
    weights = rng.uniform(0.1, 1.0, n) if sc.weights == "random" else np.ones(n)
    return Instance(_links_from(senders, lengths, angles, weights), sc.params)


@dataclass
class StudyReport:
    study: str
    records: list[dict]
    aggregates: dict
    provenance: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for rec in self.records:
            wr.writerow({k: _fmt(rec.get(k)) for k in CSV_COLUMNS})
        return buf.getvalue()

    def summary(self) -> dict:
        return {"study": self.study, "aggregates": self.aggregates, "provenance": self.provenance}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    se = float(a.std(ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    return float(a.mean()), se


def _base_record(study: str, sc: Scenario, n: int, trial: int) -> dict:
    return {
        "study": study, "kind": sc.kind, "n": n, "family": sc.spec.family,
        "sigma": sc.spec.sigma, "alpha": sc.params.alpha, "beta": sc.params.beta,
        "trial": trial,
    }


def _provenance(sc: Scenario, extra: dict | None = None) -> dict:
    cfg = {k: v for k, v in asdict(sc).items()}
    blob = json.dumps(cfg, sort_keys=True, default=str)
    prov = {
        "seed": sc.seed,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "version": __version__,
        "note": "study parameterizations (n ranges, trials, sigma) are harness choices",
    }
    if extra:
        prov.update(extra)
    return prov


def study_colocated_growth(spec: ShadowingSpec, n_list: Sequence[int], trials: int, seed: int,
                           params: Params = Params(), length: float = 1.0,
                           oracle_max_n: int = ORACLE_MAX_N,
                           power_control: bool = False) -> StudyReport:
    """Co-located capacity vs n: cluster algorithm, strong links, and exact optima."""
    if list(n_list) != sorted(n_list):
        raise ConfigError("n_list must be ascending")
    records: list[dict] = []
    aggregates: dict = {}
    for n in n_list:
        sc = Scenario("colocated", n=n, length=length, spec=spec, params=params,
                      trials=trials, seed=seed)
        inst = generate(sc, np.random.default_rng(0))
        base = gpl_gains(inst)
        s_bar = params.power / length**params.alpha
        g = gn(spec, n).g if n >= 2 else 1.0
        algs, opts = [], []
        for t in range(trials):
            (rng,) = trial_streams(seed, t, 1, key=(n,))
            gains = shadow(base, spec, rng)
            res = cluster_select(inst, gains, range(n), params.beta)
            rec = _base_record("colocated_growth", sc, n, t)
            rec.update(alg_value=len(res.selected), s_size=len(res.candidates),
                       strong_count=int((gains.signal > g * s_bar).sum()), gn=g,
                       ratio=len(res.selected) / g,
                       feasible=is_feasible(gains, res.selected, params.beta))
            if n <= oracle_max_n:
                rec["opt_uniform"] = brute_force_opt(gains, params.beta)[1]
                opts.append(rec["opt_uniform"])
                if power_control and n <= MAX_PC_N:
                    rec["opt_pc"] = brute_force_opt_pc(gains, params.beta)[1]
            algs.append(rec["alg_value"])
            records.append(rec)
        mean_alg, se_alg = _mean_se(algs)
        aggregates[str(n)] = {
            "gn": g, "mean_alg": mean_alg, "se_alg": se_alg,
            "mean_s": _mean_se([r["s_size"] for r in records if r["n"] == n])[0],
            "mean_opt": _mean_se(opts)[0] if opts else None,
            "ratio": mean_alg / g,
        }
    prov = _provenance(Scenario("colocated", n=max(n_list), length=length, spec=spec,
                                params=params, trials=trials, seed=seed),
                       {"n_list": list(n_list)})
    return StudyReport("colocated_growth", records, aggregates, prov)


def study_ss_vs_gpl(scenario: Scenario, trials: int | None = None,
                    seed: int | None = None) -> StudyReport:
    """Exact optimum under shadowing vs under plain pathloss, per trial."""
    sc = scenario
    trials = sc.trials if trials is None else trials
    seed = sc.seed if seed is None else seed
    if sc.size > ORACLE_MAX_N:
        raise SizeGuardError(f"ss_vs_gpl uses exhaustive search, n <= {ORACLE_MAX_N}")
    beta = sc.params.beta
    records = []
    for t in range(trials):
        geo, shd = trial_streams(seed, t)
        inst = generate(sc, geo)
        base = gpl_gains(inst)
        gains = shadow(base, sc.spec, shd)
        opt_g = brute_force_opt(base, beta)[1]
        opt_d = brute_force_opt(gains, beta)[1]
        res = general_capacity(inst, gains, beta)
        rec = _base_record("ss_vs_gpl", sc, len(inst), t)
        rec.update(alg_value=len(res.selected), opt_uniform=opt_d, opt_gpl=opt_g,
                   ratio=opt_d / opt_g, feasible=is_feasible(gains, res.selected, beta))
        records.append(rec)
    mean_d, se_d = _mean_se([r["opt_uniform"] for r in records])
    mean_g, _ = _mean_se([r["opt_gpl"] for r in records])
    aggregates = {"mean_opt_ss": mean_d, "se_opt_ss": se_d, "mean_opt_gpl": mean_g,
                  "ratio": mean_d / mean_g,
                  "mean_alg": _mean_se([r["alg_value"] for r in records])[0]}
    return StudyReport("ss_vs_gpl", records, aggregates, _provenance(replace(sc, trials=trials, seed=seed)))


def fading_trial(inst: Instance, gains, rng: np.random.Generator, roundings: int) -> dict:
    """One fading-equivalence trial on fixed mean gains."""
    beta = inst.params.beta
    w = inst.weights
    opt_set, w_opt = brute_force_opt(gains, beta, w)
    cands = [opt_set]
    if len(inst):
        cands.append(general_capacity(inst, gains, beta, weights=w).selected)
    q = optimize_probs(gains, beta, w, cands)
    w_r = max(expected_weight(gains, q, beta, w),
              max(expected_weight(gains, indicator(c, len(inst)), beta, w) for c in cands))
    got, feasible = [], True
    for _ in range(roundings):
        s = sparsify(gains, q, beta, rng)
        feasible &= is_feasible(gains, s, beta)
        got.append(float(w[list(s)].sum()))
    mean, se = _mean_se(got)
    return {
        "w_opt": w_opt, "w_fading": w_r, "sparsify_mean": mean, "sparsify_se": se,
        "lower_ok": w_r >= w_opt / math.e - 1e-9,
        "recover_ok": mean >= w_r / (6 * K_SPARSIFY) - 3 * se,
        "feasible": feasible,
    }


def study_fading_equivalence(scenario: Scenario, trials: int | None = None,
                             seed: int | None = None, roundings: int = 1000) -> StudyReport:
    """Weighted optimum without fading vs best expected weight under Rayleigh fading."""
    sc = scenario
    trials = sc.trials if trials is None else trials
    seed = sc.seed if seed is None else seed
    if sc.size > FADING_MAX_N:
        raise SizeGuardError(f"fading_equivalence uses exhaustive search, n <= {FADING_MAX_N}")
    records = []
    for t in range(trials):
        geo, shd, rnd = trial_streams(seed, t, 3)
        inst = generate(sc, geo)
        gains = shadow(gpl_gains(inst), sc.spec, shd)
        out = fading_trial(inst, gains, rnd, roundings)
        rec = _base_record("fading_equivalence", sc, len(inst), t)
        rec.update(w_opt=out["w_opt"], w_fading=out["w_fading"],
                   sparsify_mean=out["sparsify_mean"], sparsify_se=out["sparsify_se"],
                   ratio=out["w_fading"] / out["w_opt"] if out["w_opt"] > 0 else None,
                   feasible=out["feasible"])
        rec["_lower_ok"], rec["_recover_ok"] = out["lower_ok"], out["recover_ok"]
        records.append(rec)
    ratios = [r["ratio"] for r in records if r["ratio"] is not None]
    aggregates = {
        "mean_ratio": _mean_se(ratios)[0],
        "min_ratio": min(ratios) if ratios else None,
        "lower_bracket_holds": all(r["_lower_ok"] for r in records),
        "recovery_bracket_holds": all(r["_recover_ok"] for r in records),
        "all_feasible": all(r["feasible"] for r in records),
        "k": K_SPARSIFY,
    }
    return StudyReport("fading_equivalence", records, aggregates,
                       _provenance(replace(sc, trials=trials, seed=seed), {"roundings": roundings}))


# --- config files ---------------------------------------------------------

def _scenario_from_config(cfg: dict, sigma=None) -> Scenario:
    try:
        spec_cfg = dict(cfg.get("spec", {}))
        if sigma is not None:
            spec_cfg["sigma"] = sigma
        spec = ShadowingSpec.from_dict(spec_cfg)
        p = cfg.get("params", {})
        params = Params(power=float(p.get("power", 1.0)), alpha=float(p.get("alpha", 3.0)),
                        beta=float(p.get("beta", 1.0)))
        s = dict(cfg.get("scenario", {}))
        if "length_range" in s:
            s["length_range"] = tuple(float(x) for x in s["length_range"])
        return Scenario(spec=spec, params=params, trials=int(cfg.get("trials", 1)),
                        seed=int(cfg.get("seed", 0)), **s)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def run_study(cfg: dict, sigma=None) -> StudyReport:
    study = cfg.get("study")
    if study not in STUDIES:
        raise ConfigError(f"unknown study {study!r}; expected one of {STUDIES}")
    sc = _scenario_from_config(cfg, sigma)
    if study == "colocated_growth":
        n_list = cfg.get("n_list", [sc.n])
        if not all(isinstance(n, int) and n >= 2 for n in n_list):
            raise ConfigError("n_list entries must be integers >= 2")
        return study_colocated_growth(sc.spec, n_list, sc.trials, sc.seed, sc.params, sc.length,
                                      power_control=bool(cfg.get("power_control", False)))
    if study == "ss_vs_gpl":
        return study_ss_vs_gpl(sc)
    return study_fading_equivalence(sc, roundings=int(cfg.get("roundings", 1000)))


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def run(config, out_dir, fmt: str = "csv", overrides: dict | None = None) -> list[Path]:
    """Run a config (path or dict); write one CSV/JSON report pair per sweep point."""
    cfg = load_config(config) if not isinstance(config, dict) else dict(config)
    cfg.update({k: v for k, v in (overrides or {}).items() if v is not None})
    sweep = cfg.pop("sweep", {}) or {}
    unknown = set(sweep) - {"sigma"}
    if unknown:
        raise ConfigError(f"only sigma sweeps are supported, got {sorted(unknown)}")
    sigmas = sweep.get("sigma", [None])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for sigma in sigmas:
        t0 = time.perf_counter()
        report = run_study(cfg, sigma)
        stem = cfg["study"] if sigma is None else f"{cfg['study']}_sigma{sigma:g}"
        summary = report.summary()
        summary["provenance"]["wall_clock_s"] = round(time.perf_counter() - t0, 3)
        if fmt == "csv":
            path = out / f"{stem}.csv"
            path.write_text(report.to_csv())
        else:
            path = out / f"{stem}.records.json"
            path.write_text(json.dumps(
                [{k: r.get(k) for k in CSV_COLUMNS} for r in report.records], indent=1))
        spath = out / f"{stem}.json"
        spath.write_text(json.dumps(summary, indent=2, default=str))
        written += [path, spath]
    return written
