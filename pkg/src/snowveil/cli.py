"""Command-line front end: trial batches, parameter sweeps, heatmaps, attacks and axioms.

Every command writes CSV (header row, comma separated).  Output goes to
``--out`` if given, otherwise to ``$SNOWVEIL_OUT_DIR/<command>.csv`` when that
variable is set, otherwise to stdout.  A relative ``--out`` is resolved
against ``$SNOWVEIL_OUT_DIR``.  Batch commands also write a JSON summary next
to the CSV (or to stderr when the CSV goes to stdout).

Exit status: 0 on success, 1 when a check fails, 2 for bad input.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .chb import ChbParams, chb_stage, chb_winner, table_from_profile
from .preferences import BallotMode, ParameterError, Profile, ProfileError
from .protocol import ProtocolParams
from .sim import ElectorateSpec, TrialConfig, aggregate, run_trial, run_trials
from .voter_update import UpdateParams

log = logging.getLogger("snowveil")

OUT_DIR_ENV = "SNOWVEIL_OUT_DIR"


class ConfigError(ValueError):
    """Malformed or incomplete configuration; reported with exit status 2."""


# -- configuration ------------------------------------------------------------

# section -> key -> parser
def _fraction(text: str):
    text = text.strip()
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "electorate": {"model": str.strip, "n": int, "m": int, "split": _fraction, "top": int, "path": str.strip},
    "chb": {"alpha": _fraction, "beta": _fraction, "lambda": _fraction},
    "update": {"k": int, "gamma": int, "tau_max": int, "tau_min": int},
    "protocol": {"quorum": _fraction, "ballot_mode": str.strip, "activation_cap": int},
    "trials": {"trials": int, "seed": int, "full_ranking": _bool, "workers": int},
}


def _line_of(text: str, section: Optional[str], key: Optional[str] = None) -> int:
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return no
        elif key is not None and current == section and line and line[0] not in "#;":
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return no
    return 0


def parse_config(text: str, source: str = "<config>") -> dict[str, dict[str, object]]:
    """Validate a config file against ``SCHEMA`` and return typed values.

    Unknown sections or keys, unparsable values and missing required
    electorate fields raise ``ConfigError`` naming the line.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f"{source}:{lineno}: " if lineno else f"{source}: "
        raise ConfigError(where + str(exc).splitlines()[0]) from None
    out: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}:{_line_of(text, section)}: unknown section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            try:
                out[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"{source}:{line}: bad value for {section}.{key}: {exc}") from None
    elect = out.get("electorate", {})
    required = ["model"] if elect.get("model") == "file" else ["model", "n", "m"]
    for key in required:
        if key not in elect:
            raise ConfigError(f"{source}: missing required field electorate.{key}")
    return out


@dataclass(frozen=True)
class Settings:
    config: TrialConfig
    workers: int = 1


def build_settings(cfg: dict, args: argparse.Namespace, default_trials: int = 50) -> Settings:
    """Merge config-file values and command-line flags (flags win) into a trial config."""
    e = dict(cfg.get("electorate", {}))
    c = cfg.get("chb", {})
    u = cfg.get("update", {})
    p = cfg.get("protocol", {})
    t = cfg.get("trials", {})
    if getattr(args, "model", None):
        e["model"] = args.model
    if e.get("model") == "file" and "path" in e and getattr(args, "config", None):
        # paths in a config file are relative to the file
        e["path"] = str((Path(args.config).parent / e["path"]).resolve())
    electorate = ElectorateSpec(**e)
    chb = ChbParams(alpha=c.get("alpha", 0.1), beta=c.get("beta", 0.8), lam=c.get("lambda", 0.5))
    gamma = u.get("gamma", 10)
    update = UpdateParams(
        k=u.get("k", 10), gamma=gamma,
        tau_max=u.get("tau_max", gamma // 2 + 1 if "gamma" in u else 6),
        tau_min=u.get("tau_min", 3),
    )
    mode = args.ballot_mode or p.get("ballot_mode", BallotMode.ABSTRACT.value)
    cap = args.cap if args.cap is not None else p.get("activation_cap")
    protocol = ProtocolParams(quorum=p.get("quorum", 0.67), update=update, chb=chb,
                              ballot_mode=BallotMode(mode), activation_cap=cap)
    trials = args.trials if args.trials is not None else t.get("trials", default_trials)
    seed = args.seed if args.seed is not None else t.get("seed", 0)
    workers = args.workers if args.workers is not None else t.get("workers", 1)
    full = getattr(args, "full_ranking", False) or t.get("full_ranking", False)
    return Settings(TrialConfig(electorate, protocol, trials, seed, full), workers)


def load_config(args: argparse.Namespace) -> dict:
    if not args.config:
        return {}
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from None
    return parse_config(text, args.config)


# -- output -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return "nan" if v != v else repr(v)
    if isinstance(v, BallotMode):
        return v.value
    if v is None:
        return ""
    if isinstance(v, (tuple, list)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, Fraction):
        return _fmt(v)
    if isinstance(v, BallotMode):
        return v.value
    if isinstance(v, float) and v != v:
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def output_path(args: argparse.Namespace, command: str) -> Optional[Path]:
    env = os.environ.get(OUT_DIR_ENV)
    if args.out:
        path = Path(args.out)
        if env and not path.is_absolute():
            path = Path(env) / path
        return path
    if env:
        return Path(env) / f"{command}.csv"
    return None


def emit(args: argparse.Namespace, command: str, header: Sequence[str], rows: Sequence[Sequence],
         summary: Optional[dict] = None) -> Optional[Path]:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path = output_path(args, command)
    blob = json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n" if summary is not None else None
    if path is None:
        sys.stdout.write(buf.getvalue())
        if blob and not args.quiet:
            sys.stderr.write(blob)
        return None
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")
    if blob:
        path.with_suffix(".json").write_text(blob, encoding="utf-8")
    if not args.quiet:
        print(f"wrote {path}", file=sys.stderr)
    return path


def snapshot(config: TrialConfig) -> dict[str, object]:
    e, p = config.electorate, config.protocol
    return {
        "model": e.model, "n": e.n, "m": e.m, "split": e.split,
        "k": p.update.k, "gamma": p.update.gamma, "tau_max": p.update.tau_max, "tau_min": p.update.tau_min,
        "alpha": p.chb.alpha, "beta": p.chb.beta, "lambda": p.chb.lam,
        "quorum": p.quorum, "ballot_mode": p.ballot_mode,
    }


SNAPSHOT_COLUMNS = tuple(snapshot(TrialConfig()).keys())
RUN_COLUMNS = SNAPSHOT_COLUMNS + ("trial", "convergence_time", "winner", "accurate", "stalls",
                                  "converged", "ranking", "per_rank_times")
STAT_COLUMNS = ("trials", "excluded", "mean", "sd", "ci95", "min", "max", "accuracy", "stall_rate", "mean_stalls")


# -- commands -----------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    settings = build_settings(load_config(args), args)
    config = settings.config
    if args.event_log:
        logs_dir = Path(args.event_log)
        logs_dir.mkdir(parents=True, exist_ok=True)
        results = []
        for i in range(config.trials):
            lines: list[str] = []
            results.append(run_trial(config, i, lines))
            (logs_dir / f"trial_{i}.log").write_text("t,voter,outcome,candidate,phi\n" + "\n".join(lines) + "\n")
        stats = aggregate(results)
    else:
        results, stats = run_trials(config, settings.workers)
    snap = snapshot(config)
    rows = [tuple(snap.values()) + (r.trial, r.convergence_time, r.winner, r.accurate, r.stalls,
                                    r.converged, r.ranking, r.per_rank_times) for r in results]
    emit(args, "run", RUN_COLUMNS, rows,
         {"config": snap, "seed": config.base_seed, "stats": stats.as_dict()})
    return 0


SWEEP_PARAMS = ("k", "gamma", "Q", "lambda", "alpha", "beta", "n")
DEFAULT_GRIDS = {
    "k": "5,10,15,20,25",
    "gamma": "3,5,10,15",
    "Q": "0.55,0.67,0.8,0.95",
    "lambda": "0,0.25,0.5,0.75,1",
    "alpha": "0,0.1,0.2,0.3",
    "beta": "0.5,0.7,0.8,0.9,1",
    "n": "50,100,200,400,800",
}


def parse_grid(spec: str, integer: bool = False) -> list:
    """``"a,b,c"`` or ``"start:stop:step"`` (stop included when hit exactly)."""
    conv = int if integer else _fraction
    spec = spec.strip()
    if not spec:
        raise ConfigError("empty grid")
    try:
        if ":" in spec:
            start, stop, step = (int(x) if integer else Fraction(x.strip()) for x in spec.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            out, v = [], start
            while v <= stop:
                out.append(int(v) if integer else float(v))
                v += step
        else:
            out = [conv(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}: {exc}") from None
    if not out:
        raise ConfigError(f"grid {spec!r} has no points")
    return out


def with_param(config: TrialConfig, name: str, value) -> TrialConfig:
    p, e = config.protocol, config.electorate
    if name == "k":
        p = replace(p, update=replace(p.update, k=int(value)))
    elif name == "gamma":
        p = replace(p, update=UpdateParams.coupled(p.update.k, int(value), p.update.tau_min))
    elif name == "Q":
        p = replace(p, quorum=value)
    elif name == "lambda":
        p = replace(p, chb=replace(p.chb, lam=value))
    elif name == "alpha":
        p = replace(p, chb=replace(p.chb, alpha=value))
    elif name == "beta":
        p = replace(p, chb=replace(p.chb, beta=value))
    elif name == "n":
        e = replace(e, n=int(value))
    elif name == "m":
        e = replace(e, m=int(value))
    else:
        raise ConfigError(f"cannot sweep {name!r}; choose one of {', '.join(SWEEP_PARAMS)}")
    if p.update.k > e.n - 1:
        raise ParameterError(f"k={p.update.k} needs at least {p.update.k + 1} voters, got n={e.n}")
    return replace(config, protocol=p, electorate=e)


def _sweep_rows(points: list[tuple[dict, TrialConfig]], workers: int) -> list[tuple]:
    rows = []
    for labels, config in points:
        log.info("sweep point %s", labels)
        _, stats = run_trials(config, workers)
        s = stats.as_dict()
        rows.append(tuple(labels.values()) + (config.electorate.model, config.electorate.n, config.electorate.m)
                    + tuple(s[c] for c in STAT_COLUMNS))
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    settings = build_settings(load_config(args), args)
    name = args.param
    grid = parse_grid(args.values or DEFAULT_GRIDS[name], integer=name in ("k", "gamma", "n"))
    # build every point first so a bad grid value fails before any trial runs
    points = [({"param": name, "value": v}, with_param(settings.config, name, v)) for v in grid]
    rows = _sweep_rows(points, settings.workers)
    header = ("param", "value", "model", "n", "m") + STAT_COLUMNS
    emit(args, "sweep", header, rows, {"param": name, "base": snapshot(settings.config),
                                         "seed": settings.config.base_seed})
    return 0


def linear_fit(x: Sequence[float], y: Sequence[float]) -> dict[str, float]:
    """Least-squares line with its coefficient of determination."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2}


def cmd_scaling(args: argparse.Namespace) -> int:
    settings = build_settings(load_config(args), args)
    ns = parse_grid(args.values or DEFAULT_GRIDS["n"], integer=True)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    points = []
    for model in models:
        base = replace(settings.config, electorate=replace(settings.config.electorate, model=model))
        for n in ns:
            cfg = with_param(base, "n", n)
            if args.ratio:
                cfg = with_param(cfg, "m", max(2, n // args.ratio))
            points.append(({"param": "n", "value": n}, cfg))
    rows = _sweep_rows(points, settings.workers)
    fits = {}
    for model in models:
        sel = [r for r in rows if r[2] == model]
        fits[model] = linear_fit([r[1] for r in sel], [r[5 + STAT_COLUMNS.index("mean")] for r in sel])
    header = ("param", "value", "model", "n", "m") + STAT_COLUMNS
    emit(args, "scaling", header, rows, {"fits": fits, "base": snapshot(settings.config),
                                           "seed": settings.config.base_seed})
    if not args.quiet:
        for model, fit in fits.items():
            print(f"{model}: time ~ {fit['slope']:.3f} n + {fit['intercept']:.1f}, R^2 = {fit['r2']:.4f}", file=sys.stderr)
    return 0


def packaged_profile(name: str) -> Path:
    return Path(str(resources.files("snowveil.data").joinpath(name)))


def cmd_heatmap(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    path = Path(args.profile) if args.profile else packaged_profile("policy_window_profile.txt")
    try:
        profile = Profile.load(path)
    except (OSError, ProfileError) as exc:
        raise ConfigError(f"cannot load profile {path}: {exc}") from None
    alphas = parse_grid(args.alphas)
    betas = parse_grid(args.betas)
    for v in alphas + betas:
        if not 0 <= v <= 1:
            raise ConfigError(f"grid value {v} outside [0, 1]")
    cfg.setdefault("electorate", {}).update({"model": "file", "path": str(path.resolve())})
    args.config = None  # path already absolute
    settings = build_settings(cfg, args, default_trials=20)
    table = table_from_profile(profile)
    rows = []
    for a in alphas:
        for b in betas:
            chb = replace(settings.config.protocol.chb, alpha=a, beta=b)
            winner = chb_winner(table, chb)
            row = [a, b, winner, chb_stage(table, chb)]
            if settings.config.trials and not args.no_sim:
                config = replace(settings.config, protocol=replace(settings.config.protocol, chb=chb))
                _, stats = run_trials(config, settings.workers)
                row += [stats.mean, stats.ci95, stats.accuracy, stats.excluded]
            else:
                row += [None, None, None, None]
            rows.append(row)
    header = ("alpha", "beta", "winner", "stage", "mean_time", "ci95", "accuracy", "excluded")
    emit(args, "heatmap", header, rows, {"profile": str(path), "seed": settings.config.base_seed,
                                           "n": profile.n, "m": profile.m})
    return 0


def cmd_adversary(args: argparse.Namespace) -> int:
    from .analysis.adversary import adversary_sweep, honest_pair, margin_electorate, per_voter_margin

    settings = build_settings(load_config(args), args)
    config = settings.config
    if args.profile:
        try:
            profile = Profile.load(args.profile)
        except (OSError, ProfileError) as exc:
            raise ConfigError(f"cannot load profile {args.profile}: {exc}") from None
    else:
        profile = margin_electorate(args.n, args.m, args.lead, p_star=0,
                                    seed=np.random.SeedSequence(config.base_seed, spawn_key=(1 << 21,)))
    p_star, p_c = honest_pair(profile, config.protocol.chb)
    p_star = args.p_star if args.p_star is not None else p_star
    p_c = args.p_c if args.p_c is not None else p_c
    if p_star == p_c or not (0 <= p_star < profile.m and 0 <= p_c < profile.m):
        raise ConfigError(f"need two distinct candidates in 0..{profile.m - 1}, got p_star={p_star}, p_c={p_c}")
    delta = per_voter_margin(profile, p_star, p_c)
    if delta <= 0:
        raise ConfigError(f"scenario rejected: honest margin delta = {_fmt(delta)} <= 0")
    sizes = parse_grid(args.sizes, integer=True) if args.sizes else None
    rows = adversary_sweep(profile, p_star, p_c, config.protocol, config.trials, config.base_seed, sizes)
    out = [(r.c, Fraction(r.c, profile.n), r.delta, r.expected_margin, float(r.expected_margin), r.threshold,
            r.c == r.threshold, r.trials, r.excluded, r.p_star_wins, r.win_rate, r.p_c_wins) for r in rows]
    header = ("c", "c_over_n", "delta", "expected_margin", "expected_margin_float", "threshold",
              "at_threshold", "trials", "excluded", "p_star_wins", "win_rate", "p_c_wins")
    emit(args, "adversary", header, out, {"n": profile.n, "m": profile.m, "p_star": p_star, "p_c": p_c,
                                            "delta": delta, "threshold": rows[0].threshold if rows else None,
                                            "seed": config.base_seed})
    return 0


def cmd_axioms(args: argparse.Namespace) -> int:
    from .analysis.axioms import RULES, load_tie_cases, run_axiom_suite

    rule = RULES[args.mutant] if args.mutant else RULES["chb"]
    ties = load_tie_cases(args.tie_cases) if args.tie_cases else None
    seed = args.seed if args.seed is not None else 0
    report = run_axiom_suite(cases=args.cases, seed=seed, rule=rule, tie_cases=ties)
    rows = [(c.name, c.checked, c.skipped, "pass" if c.passed else "FAIL",
             c.counterexample.detail if c.counterexample else "") for c in report.checks]
    emit(args, "axioms", ("check", "checked", "skipped", "status", "detail"), rows)
    failure = report.first_failure()
    if failure is not None:
        print(f"counterexample in {failure.name}:", file=sys.stderr)
        print(failure.counterexample.to_text(), file=sys.stderr, end="")
        return 1
    return 0


# -- argument parsing -----------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (sections electorate, chb, update, protocol, trials)")
    p.add_argument("--seed", type=int, help="base seed; every trial's streams derive from it")
    p.add_argument("--trials", type=int, help="trials per configuration point")
    p.add_argument("--out", help="CSV output path (relative paths resolve against $SNOWVEIL_OUT_DIR)")
    p.add_argument("--cap", type=int, help="activation cap per rank-round (default 200 n)")
    p.add_argument("--ballot-mode", choices=[m.value for m in BallotMode], help="how locked ballots are seen")
    p.add_argument("--workers", type=int, help="worker processes for independent trials")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress or summary on stderr")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snowveil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one configuration, one CSV row per trial")
    _common(p)
    p.add_argument("--model", choices=["ic", "polarised", "unanimous_first"])
    p.add_argument("--full-ranking", action="store_true", help="rank every candidate, not just the winner")
    p.add_argument("--event-log", metavar="DIR", help="write each trial's event log to DIR/trial_<i>.log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="one aggregate row per value of a swept parameter")
    _common(p)
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", help="comma list or start:stop:step (defaults to a preset grid)")
    p.add_argument("--model", choices=["ic", "polarised", "unanimous_first"])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scaling", help="sweep over n for several electorate models, with linear fits")
    _common(p)
    p.add_argument("--values", help="n grid (default 50,100,200,400,800)")
    p.add_argument("--models", default="ic,polarised")
    p.add_argument("--ratio", type=int, help="hold n/m fixed at this ratio (m = n // ratio); slow for large n")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("heatmap", help="winner and convergence time over an (alpha, beta) grid")
    _common(p)
    p.add_argument("--profile", help="profile text file (default: the packaged policy-window profile)")
    p.add_argument("--alphas", default="0:0.5:0.05")
    p.add_argument("--betas", default="0.5:1:0.05")
    p.add_argument("--no-sim", action="store_true", help="rule evaluation only, no simulated times")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("adversary", help="p* win rate against burying coalitions of growing size")
    _common(p)
    p.add_argument("--profile", help="honest profile file (default: a generated margin electorate)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--lead", type=float, default=0.5, help="share of voters moved to rank p* first")
    p.add_argument("--p-star", type=int, help="honest winner (default: canonical winner)")
    p.add_argument("--p-c", type=int, help="coalition's candidate (default: strongest Borda rival)")
    p.add_argument("--sizes", help="coalition sizes (default: a grid around the minimal coalition)")
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("axioms", help="run the axiom suite; exit 1 on any counterexample")
    _common(p)
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--mutant", choices=["highest-index"], help="check a deliberately broken tie-break instead")
    p.add_argument("--tie-cases", help="JSON file of golden tie cases")
    p.set_defaults(func=cmd_axioms)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ProfileError) as exc:
        print(f"snowveil {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
