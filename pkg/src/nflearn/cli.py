"""Batch experiment runner: ``nflearn <command> [--config FILE] [--key value ...]``.

Every run writes ``report.json`` (resolved config, digest, summary,
timings), ``verdicts.jsonl`` (one record per case), one CSV per trajectory
and, where relevant, certificate files.  Everything except timings is a pure
function of the resolved config.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import random
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from . import category as cat
from . import extrapolation as ex
from . import forecasting as fc
from . import measures as ms
from . import registry as rg
from .seq_core import MemoCapExceeded, density_stats

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_EXPECT, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# -- configuration --------------------------------------------------------------------

# value kinds: ref, refs, int, rational, seeds, str, strs
COMMON = {"out": ("str", None), "expect": ("str", None), "workers": ("int", None)}

COMMANDS: dict[str, dict[str, tuple[str, object]]] = {
    "extrapolate-eval": {
        "learners": ("refs", ["always-1"]),
        "streams": ("refs", ["all-ones", "alternating", "sparse-zeros(powers(10))"]),
        "criteria": ("strs", ["nv", "weak-nv"]),
        "horizon": ("int", 10_000),
        "tail": ("int", None),
        "r": ("rational", "1"),
        "tol": ("rational", "1/100"),
    },
    "duel": {
        "learner": ("ref", "always-1"),
        "streams": ("refs", ["all-ones", "alternating", "sparse-zeros(powers(10))"]),
        "horizon": ("int", 10_000),
    },
    "defeat": {
        "learner": ("ref", "always-1"),
        "budget": ("int", ex.DEFAULT_DEFEAT_BUDGET),
        "horizon": ("int", 2**14),
    },
    "adversary-pair": {
        "learner": ("ref", "always-1"),
        "prefix": ("str", ""),
        "spice": ("ref", "all-zeros"),
        "spikes": ("ref", "powers(10)"),
        "horizon": ("int", 10_000),
        "r": ("rational", "1"),
        "tol": ("rational", "1/100"),
    },
    "coarse": {
        "learner": ("ref", "last-bit"),
        "stream": ("ref", "alternating"),
        "horizon": ("int", 2**16),
    },
    "forecast-eval": {
        "forecaster": ("ref", "laplace-bayes"),
        "source": ("ref", "bernoulli(1/2)"),
        "criteria": ("strs", ["nc", "weak-nc"]),
        "seeds": ("seeds", list(range(30))),
        "horizon": ("int", 10_000),
        "epsilon": ("rational", "1/20"),
        "r": ("rational", "1"),
        "tol": ("rational", "1/100"),
        "tail": ("int", None),
    },
    "merge": {
        "forecaster": ("ref", "laplace-bayes"),
        "source": ("ref", "bernoulli(1/2)"),
        "seeds": ("seeds", list(range(10))),
        "horizon": ("int", 10_000),
        "depth": ("int", 6),
        "epsilon": ("rational", "1/10"),
        "tail": ("int", None),
    },
    "defeat-nc": {
        "law": ("ref", "laplace-bayes"),
        "forecaster": ("ref", "vanishing-zero"),
        "budget": ("int", ex.DEFAULT_DEFEAT_BUDGET),
        "horizon": ("int", 2**14),
        "epsilon": ("rational", "1/4"),
    },
    "bm-game": {
        "learner": ("ref", "always-1"),
        "rounds": ("int", 40),
        "seeds": ("seeds", list(range(50))),
        "padding": ("str", "minimal"),
        "max_move": ("int", 4),
        "pad_tail": ("int", 64),
    },
    "witness-check": {
        "learners": ("refs", ["always-0", "always-1", "last-bit", "majority(3)"]),
        "cases": ("int", 100),
        "max_len": ("int", 10),
        "max_n": ("int", 5),
        "extend": ("int", 16),
        "seed": ("int", 0),
        "padding": ("str", "double"),
    },
    "meagre-chain": {
        "law": ("ref", "bernoulli(1/2)"),
        "depth": ("int", 1),
        "radius": ("rational", "1/2"),
        "t": ("int", 6),
        "K": ("int", 7),
        "perturbations": ("int", 20),
        "seed": ("int", 0),
    },
    "escape": {
        "learner": ("ref", "always-1"),
        "start": ("str", "1"),
        "steps": ("int", 10),
        "padding": ("str", "double"),
    },
}


def _parse_seeds(value) -> list[int]:
    if isinstance(value, list):
        return [int(v) for v in value]
    if isinstance(value, int):
        return [value]
    out = []
    for part in str(value).split(","):
        part = part.strip()
        if re.fullmatch(r"\d+-\d+", part):
            lo, hi = map(int, part.split("-"))
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(int(part))
    return out


def _coerce(key: str, kind: str, value):
    try:
        if value is None:
            return None
        if kind == "int":
            return int(value)
        if kind == "rational":
            return Fraction(str(value))
        if kind == "seeds":
            seeds = _parse_seeds(value)
            if not seeds:
                raise ValueError("empty seed list")
            return seeds
        if kind in ("refs", "strs"):
            if isinstance(value, str):
                value = [value] if kind == "refs" else [v.strip() for v in value.split(",") if v.strip()]
            return [str(v) for v in value]
        return str(value)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from exc


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Defaults, then the config file, then flags; every key explicit in the result."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    schema = {**COMMANDS[command], **COMMON}
    merged = {k: default for k, (_, default) in schema.items()}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} for command {command!r}")
            if value is not None:
                merged[key] = value
    config = {k: _coerce(k, schema[k][0], v) for k, v in merged.items()}
    if config["expect"] not in (None, ex.CONSISTENT, ex.REFUTED):
        raise ConfigError("expect must be 'consistent' or 'refuted'")
    return {"command": command, **config}


def load_config_file(path: str | os.PathLike) -> tuple[str | None, dict]:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    command = data.pop("command", None)
    values = {k: v for k, v in data.items() if not isinstance(v, dict)}
    if command and isinstance(data.get(command), dict):
        values.update(data[command])
    return command, values


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


# Keys that do not affect results are left out of the digest.
_UNDIGESTED = ("out", "workers")


def config_digest(config: dict) -> str:
    payload = {k: v for k, v in config.items() if k not in _UNDIGESTED}
    return hashlib.sha256(json.dumps(_jsonable(payload), sort_keys=True).encode()).hexdigest()


# -- reports ---------------------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    config: dict
    records: list[dict] = field(default_factory=list)
    trajectories: dict[str, list[tuple[int, Fraction]]] = field(default_factory=dict)
    certificates: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def digest(self) -> str:
        return config_digest(self.config)

    def verdicts(self) -> list[str]:
        return [r["verdict"] for r in self.records if "verdict" in r]


def _decimal12(v: Fraction) -> str:
    sign = "-" if v < 0 else ""
    scaled = round(abs(v) * 10**12)
    whole, frac = divmod(scaled, 10**12)
    return f"{sign}{whole}.{frac:012d}"


def emit_plotdata(report: RunReport, out_dir: str | os.PathLike) -> list[Path]:
    """One CSV per trajectory: checkpoint, 12-place decimal value, exact num/den."""
    paths = []
    if not report.trajectories:
        return paths
    tdir = Path(out_dir) / "trajectories"
    tdir.mkdir(parents=True, exist_ok=True)
    for name in sorted(report.trajectories):
        path = tdir / f"{name}.csv"
        rows = ["checkpoint,value,num,den"]
        for c, v in report.trajectories[name]:
            v = Fraction(v)
            rows.append(f"{c},{_decimal12(v)},{v.numerator},{v.denominator}")
        path.write_text("\n".join(rows) + "\n")
        paths.append(path)
    return paths


def write_report(report: RunReport, out_dir: str | os.PathLike) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    lines = [json.dumps(_jsonable(r), sort_keys=True) for r in report.records]
    (out / "verdicts.jsonl").write_text("".join(line + "\n" for line in lines))
    written.append(out / "verdicts.jsonl")
    written += emit_plotdata(report, out)
    if report.certificates:
        cdir = out / "certificates"
        cdir.mkdir(exist_ok=True)
        for name in sorted(report.certificates):
            (cdir / f"{name}.cert").write_text(report.certificates[name])
            written.append(cdir / f"{name}.cert")
    doc = {
        "command": report.command,
        "version": __version__,
        "config": _jsonable(report.config),
        "config_digest": report.digest,
        "summary": _jsonable(report.summary),
        "error": report.error,
        "files": sorted(str(p.relative_to(out)) for p in written),
        "timings": report.timings,
    }
    (out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return written


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")[:60]


def _workers(config: dict) -> int:
    n = config.get("workers") or int(os.environ.get("NFLEARN_WORKERS", "1") or 1)
    return max(1, n)


def _map(config: dict, fn, items: list) -> list:
    """Order-preserving map; threads when more than one worker is configured."""
    if _workers(config) == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_workers(config)) as pool:
        return list(pool.map(fn, items))


def _density_traj(stats) -> list[tuple[int, Fraction]]:
    return list(stats.trajectory)


# -- command handlers ------------------------------------------------------------------


def _extrapolate_eval(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]
    known = {"nv", "weak-nv", "nv-prime", "nv-dprime"}
    bad = set(cfg["criteria"]) - known
    if bad:
        raise ConfigError(f"unknown criteria {sorted(bad)}; choose from {sorted(known)}")
    cases = list(itertools.product(cfg["learners"], cfg["streams"], cfg["criteria"]))

    def run(case):
        lref, sref, crit = case
        m, sigma = rg.extrapolator(lref), rg.stream(sref)
        if crit == "nv":
            r = ex.check_nv(m, sigma, H, cfg["tail"])
        elif crit == "weak-nv":
            r = ex.check_weak_nv(m, sigma, H, cfg["r"], cfg["tol"])
        elif crit == "nv-prime":
            r = ex.check_nv_prime(ex.PartialExtrapolator.lift(m), sigma, H, cfg["tail"])
        else:
            r = ex.check_nv_dprime(ex.PartialExtrapolator.lift(m), sigma, H, cfg["tail"])
        return r

    for i, (case, r) in enumerate(zip(cases, _map(cfg, run, cases))):
        lref, sref, crit = case
        key = f"{i:03d}-{_slug(lref)}-{_slug(sref)}-{crit}"
        rep.records.append({"case": key, "learner": lref, "stream": sref, **r.to_record()})
        rep.trajectories[f"{key}-error-density"] = _density_traj(r.density_trajectory)
    rep.summary = {"cases": len(cases), "verdicts": _count(rep.verdicts())}


def _count(verdicts) -> dict:
    return {v: verdicts.count(v) for v in sorted(set(verdicts))}


def _duel(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]

    def run(sref):
        m = rg.extrapolator(cfg["learner"])
        sigma = rg.stream(sref).prefix(H)
        return len(ex.error_positions(m, sigma, H)), len(ex.error_positions(ex.evil_twin(m), sigma, H))

    rows = _map(cfg, run, cfg["streams"])
    for i, (sref, (a, b)) in enumerate(zip(cfg["streams"], rows)):
        rep.records.append({
            "case": f"{i:03d}-{_slug(sref)}", "stream": sref, "horizon": H,
            "errors": a, "errors_evil_twin": b, "row_sum": a + b, "complementary": a + b == H,
        })
    rep.summary = {"all_complementary": all(r["complementary"] for r in rep.records)}


def _defeat(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]
    m = rg.extrapolator(cfg["learner"])
    sigma = ex.defeat_nv(m, cfg["budget"])
    zeros = ex.zero_positions(sigma, H)
    errors = set(ex.error_positions(m, sigma, H))
    beyond = all(z > 2**j for j, z in enumerate(zeros, start=1))
    rep.records.append({
        "case": "defeat", "learner": cfg["learner"], "horizon": H, "zero_positions": zeros,
        "zeros_are_errors": set(zeros) <= errors, "zeros_beyond_powers": beyond,
        "verdict": ex.check_nv(m, sigma, H).verdict,
    })
    rep.trajectories["zero-density"] = _density_traj(density_stats(zeros, H))
    rep.summary = {"zeros": len(zeros), "sound": set(zeros) <= errors and beyond}


def _adversary_pair(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]
    m = rg.extrapolator(cfg["learner"])
    star, dagger = ex.adversarial_pair(m, cfg["prefix"], rg.stream(cfg["spice"]), rg.index_set(cfg["spikes"]))
    for label, sigma in (("star", star), ("dagger", dagger)):
        r = ex.check_weak_nv(m, sigma, H, cfg["r"], cfg["tol"])
        rep.records.append({"case": label, "learner": cfg["learner"], **r.to_record()})
        rep.trajectories[f"{label}-error-density"] = _density_traj(r.density_trajectory)
    rep.summary = {r["case"]: r["verdict"] for r in rep.records}


def _coarse(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]
    m = rg.extrapolator(cfg["learner"])
    sigma = ex.coarse_block_double(rg.stream(cfg["stream"]))
    r = ex.check_weak_nv(m, sigma, H)
    rep.records.append({"case": "coarse", "learner": cfg["learner"], "stream": cfg["stream"], **r.to_record()})
    rep.trajectories["error-density"] = _density_traj(r.density_trajectory)
    rep.summary = {"errors": r.error_count, "bound": H.bit_length()}


def _forecast_eval(cfg: dict, rep: RunReport) -> None:
    known = {"nc", "weak-nc"}
    if set(cfg["criteria"]) - known:
        raise ConfigError(f"criteria must be among {sorted(known)}")
    mu, lam = rg.law(cfg["forecaster"]), rg.law(cfg["source"])
    H, eps = cfg["horizon"], cfg["epsilon"]

    def run(seed):
        path = ms.sample(lam, seed, H)
        return seed, fc.gap_trajectory(mu, lam, path, eps)

    trajs = dict(_map(cfg, run, cfg["seeds"]))
    tail = fc.resolve_tail(H, cfg["tail"])
    for crit in cfg["criteria"]:
        per_seed = []
        for seed in cfg["seeds"]:
            t = trajs[seed]
            if crit == "nc":
                v = fc.nc_seed_verdict(t, tail)
            else:
                recent = [x for _, x in t.trajectory[-ex.TREND_WINDOW:]]
                v = ex.weak_verdict(recent, t.good_set_density, cfg["r"], cfg["tol"])
            per_seed.append({"seed": seed, "verdict": v, "final_gap": t.final_gap,
                             "good_set_density": t.good_set_density})
        rep.records.append({
            "case": crit, "forecaster": cfg["forecaster"], "source": cfg["source"],
            "verdict": fc.aggregate_seeds([p["verdict"] for p in per_seed]), "seeds": per_seed,
        })
    for seed in cfg["seeds"]:
        t = trajs[seed]
        rep.trajectories[f"seed-{seed:04d}-gap"] = [(c, t.gaps[c - 1]) for c, _ in t.trajectory]
        rep.trajectories[f"seed-{seed:04d}-good-density"] = list(t.trajectory)
    rep.summary = {r["case"]: r["verdict"] for r in rep.records}


def _merge(cfg: dict, rep: RunReport) -> None:
    mu, lam = rg.law(cfg["forecaster"]), rg.law(cfg["source"])
    fc.require_forecaster(mu)
    H, d, eps = cfg["horizon"], cfg["depth"], cfg["epsilon"]
    tail = fc.resolve_tail(H, cfg["tail"])

    def run(seed):
        return fc.merge_trajectory(mu, lam, ms.sample(lam, seed, H), d)

    reports = _map(cfg, run, cfg["seeds"])
    per_seed = []
    for seed, mr in zip(cfg["seeds"], reports):
        per_seed.append({"seed": seed, "verdict": fc.strong_seed_verdict(mr, H, tail, eps),
                         "final": mr.trajectory[-1][1]})
        rep.trajectories[f"seed-{seed:04d}-merge-depth-{d}"] = list(mr.trajectory)
    rep.records.append({
        "case": f"strong-nc-depth-{d}", "forecaster": cfg["forecaster"], "source": cfg["source"],
        "verdict": fc.aggregate_seeds([p["verdict"] for p in per_seed]), "caveat": fc.MERGE_CAVEAT,
        "seeds": per_seed,
    })
    rep.summary = {"verdict": rep.records[0]["verdict"], "caveat": fc.MERGE_CAVEAT}


def _defeat_nc(cfg: dict, rep: RunReport) -> None:
    H = cfg["horizon"]
    nu = rg.law(cfg["law"])
    sigma = fc.defeat_nc(nu, cfg["budget"])
    path = sigma.prefix(H)
    zeros = ex.zero_positions(path, H)
    gaps = [nu.p1(path.prefix(z - 1)) for z in zeros]
    forecaster = rg.law(cfg["forecaster"])
    traj = fc.gap_trajectory(forecaster, ms.delta(sigma), path, cfg["epsilon"])
    recent = [x for _, x in traj.trajectory[-ex.TREND_WINDOW:]]
    weak = ex.weak_verdict(recent, traj.good_set_density, Fraction(1), fc.WEAK_TOLERANCE)
    rep.records.append({
        "case": "defeat-nc", "law": cfg["law"], "horizon": H, "zero_positions": zeros,
        "min_gap_at_zeros": min(gaps) if gaps else None,
        "zero_density": Fraction(len(zeros), H),
        "forecaster": cfg["forecaster"], "verdict": weak, "criterion": "weakNC",
    })
    rep.trajectories["forecaster-good-density"] = list(traj.trajectory)
    rep.summary = {"zeros": len(zeros), "weak_nc": weak}


def _bm_game(cfg: dict, rep: RunReport) -> None:
    if cfg["padding"] not in ("double", "minimal"):
        raise ConfigError("padding must be 'double' or 'minimal'")

    def run(seed):
        m = rg.extrapolator(cfg["learner"])
        F = cat.nwd_witness_weaknv(m, cfg["padding"])
        t = cat.play_banach_mazur(cat.random_player(seed, cfg["max_move"]), cat.bm_strategy_from_witness(F), cfg["rounds"])
        wicked = cat.wicked_prefix_lengths(m, t.realized_prefix)
        padded = t.realized_prefix.extend("1" * cfg["pad_tail"])
        kept = set(wicked) <= set(cat.wicked_prefix_lengths(m, padded))
        return {
            "case": f"seed-{seed:04d}", "seed": seed, "length": len(t.realized_prefix),
            "wicked_prefixes": len(wicked), "nasty_density": cat.wickedness(m, t.realized_prefix),
            "padding_keeps_wicked": kept,
        }

    rep.records.extend(_map(cfg, run, cfg["seeds"]))
    rep.summary = {
        "min_wicked_prefixes": min(r["wicked_prefixes"] for r in rep.records),
        "min_nasty_density": min(r["nasty_density"] for r in rep.records),
    }


def _witness_check(cfg: dict, rep: RunReport) -> None:
    rng = random.Random(cfg["seed"])
    learners = {ref: rg.extrapolator(ref) for ref in cfg["learners"]}
    ok_all = True
    for i in range(cfg["cases"]):
        ref = rng.choice(cfg["learners"])
        w = "".join(rng.choice("01") for _ in range(rng.randint(0, cfg["max_len"])))
        n = rng.randint(0, cfg["max_n"])
        m = learners[ref]
        fw = cat.nwd_witness_weaknv(m, cfg["padding"])(n, w)
        tails = ["", "0" * cfg["extend"], "1" * cfg["extend"],
                 "".join(rng.choice("01") for _ in range(cfg["extend"]))]
        worst = min(cat.count_wicked_prefixes(m, fw.extend(t)) for t in tails)
        ok_all &= worst >= n
        rep.records.append({"case": f"{i:03d}", "learner": ref, "w": w, "n": n, "F": fw.text,
                            "min_wicked_prefixes": worst, "sound": worst >= n})
    rep.summary = {"cases": cfg["cases"], "all_sound": ok_all}


def _meagre_chain(cfg: dict, rep: RunReport) -> None:
    mu = rg.law(cfg["law"])
    W0 = cat.BasisBall.uniform(cfg["depth"], cfg["radius"])
    links = cat.meagre_chain(mu, W0, cfg["t"])
    for i, link in enumerate(links):
        rec = {"case": f"W{i}", "depth": link.ball.depth, "radius": link.ball.radius, "ball": link.ball.digest()}
        if link.containment is not None:
            rec["containment_replays"] = link.containment.replay()
            rec["bad_gap_replays"] = link.bad_gap.replay()
            rep.certificates[f"W{i}-contains"] = link.containment.to_text()
            rep.certificates[f"W{i}-bad-gap"] = link.bad_gap.to_text()
        rep.certificates[f"W{i}-ball"] = link.ball.to_text()
        rep.records.append(rec)
    last = links[-1].ball
    K = cfg["K"]
    center = cat.extension_law(last)
    rng = random.Random(cfg["seed"])
    counts = [cat.superbad_count(mu, center, K)]
    for _ in range(cfg["perturbations"]):
        counts.append(cat.superbad_count(mu, cat.table_law(last.depth, cat.perturb_within(last, rng)), K))
    floor = max(0, cfg["t"] - cfg["depth"] - 1)
    cert = cat.superbad_certificate(mu, center, K, floor)
    if cert.ok:
        rep.certificates[f"W{len(links) - 1}-center-superbad"] = cert.to_text()
    rep.summary = {
        "links": len(links) - 1,
        "all_replay": all(r.get("containment_replays", True) and r.get("bad_gap_replays", True) for r in rep.records),
        "center_superbad": counts[0],
        "min_perturbed_superbad": min(counts),
        "certified_floor": floor,
    }


def _escape(cfg: dict, rep: RunReport) -> None:
    m = rg.extrapolator(cfg["learner"])
    F = cat.nwd_witness_weaknv(m, cfg["padding"])
    trace = cat.escape_trace(F, cfg["start"], cfg["steps"])
    w = trace[-1][1].append(0)
    rep.records.append({
        "case": "escape", "learner": cfg["learner"], "length": len(w),
        "wicked_prefixes": cat.count_wicked_prefixes(m, w),
        "extends_all_pieces": all(piece.is_prefix_of(w) for _, piece in trace),
        "result": w.text if len(w) <= 4096 else w.text[:4096] + "...",
    })
    rep.summary = {"wicked_prefixes": rep.records[0]["wicked_prefixes"], "steps": cfg["steps"]}


HANDLERS = {
    "extrapolate-eval": _extrapolate_eval,
    "duel": _duel,
    "defeat": _defeat,
    "adversary-pair": _adversary_pair,
    "coarse": _coarse,
    "forecast-eval": _forecast_eval,
    "merge": _merge,
    "defeat-nc": _defeat_nc,
    "bm-game": _bm_game,
    "witness-check": _witness_check,
    "meagre-chain": _meagre_chain,
    "escape": _escape,
}

_CONFIG_ERRORS = (ConfigError, rg.RefError, ms.PreconditionError)
_RESOURCE_ERRORS = (ex.ConstructionError, MemoCapExceeded, cat.ShrinkFailure)


def run(config: dict) -> RunReport:
    """Execute one resolved config; resource errors are recorded on the report and re-raised."""
    rep = RunReport(config["command"], config)
    start = time.perf_counter()
    try:
        HANDLERS[config["command"]](config, rep)
    except _RESOURCE_ERRORS as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        rep.timings = {"wall_seconds": round(time.perf_counter() - start, 3)}
    return rep


def exit_code(report: RunReport) -> int:
    expect = report.config.get("expect")
    verdicts = report.verdicts()
    if expect == ex.CONSISTENT and ex.REFUTED in verdicts:
        return EXIT_EXPECT
    if expect == ex.REFUTED and ex.CONSISTENT in verdicts:
        return EXIT_EXPECT
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------------


def _flag(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nflearn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nflearn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config file; flags override its values")
        for key, (kind, default) in {**schema, **COMMON}.items():
            action = "append" if kind == "refs" else "store"
            p.add_argument(_flag(key), dest=key, action=action, default=None,
                           help=f"{kind}; default {default!r}" + (" (repeatable)" if kind == "refs" else ""))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
    try:
        file_values = {}
        if args.config:
            file_command, file_values = load_config_file(args.config)
            if file_command and file_command != args.command:
                raise ConfigError(f"config is for {file_command!r}, not {args.command!r}")
        config = resolve_config(args.command, file_values, flags)
    except _CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = config["out"] or os.path.join("nflearn-out", args.command)
    rep = RunReport(args.command, config)
    try:
        rep = run(config)
    except _RESOURCE_ERRORS as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
        write_report(rep, out)
        print(f"resource error: {rep.error}", file=sys.stderr)
        return EXIT_RESOURCE
    except (*_CONFIG_ERRORS, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_report(rep, out)
    print(json.dumps({"command": rep.command, "out": str(out), "summary": _jsonable(rep.summary)}, sort_keys=True))
    return exit_code(rep)


if __name__ == "__main__":
    sys.exit(main())
