"""Command-line front end.

    linsde <command> --config FILE [--out DIR] [--seed N] [--reps N] [--n N] [--t T ...] [--tol X]

Commands: simulate, moments, validate, lst, order-check.  Exit status is 0
on success, 1 when a validation or order check fails, 2 on a configuration
or output error.  Every CSV starts with a ``#`` line carrying the version,
the SHA-256 of the canonical config and the seed.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path as FsPath
from typing import Any, Sequence

import jsonschema

from . import __version__, streams
from .estimate import (
    InitialLaw,
    Scenario,
    YMode,
    analytic_curves,
    compare_report,
    conditional_lst,
    mc_moments,
    plain_lst,
    scenario_block,
    stationary_lst_mc,
    stochastic_order_check,
)
from .model import (
    DriverPair,
    JumpComponent,
    JumpDistribution,
    SpecError,
    SubordinatorSpec,
    validate_spec,
)
from .pathsim import evolve

COMMANDS = ("simulate", "moments", "validate", "lst", "order-check")


class ConfigError(ValueError):
    pass


class OutputError(RuntimeError):
    pass


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

_DIST = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["point", "uniform", "exp", "erlang"]},
        "x": _POS,
        "b": _POS,
        "mean": _POS,
        "k": {"type": "integer", "minimum": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_DIST_PARAMS = {"point": ("x",), "uniform": ("b",), "exp": ("mean",), "erlang": ("k", "mean")}

_SUB = {
    "type": "object",
    "properties": {
        "drift": _NONNEG,
        "jumps": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"rate": _POS, "dist": _DIST},
                "required": ["rate", "dist"],
                "additionalProperties": False,
            },
        },
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "properties": {
        "y": _SUB,
        "z": _SUB,
        "x0": {
            "type": "object",
            "properties": {"kind": {"enum": ["const", "exp"]}, "value": _NONNEG, "mean": _POS},
            "required": ["kind"],
            "additionalProperties": False,
        },
        "y_mode": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["levy", "random-drift"]},
                "values": {"type": "array", "items": _NONNEG},
                "probs": {"type": "array", "items": _NONNEG},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "horizon": _POS,
        "t_grid": {"type": "array", "items": _NONNEG, "minItems": 1},
        "seed": {"type": "integer", "minimum": 0},
        "reps": {"type": "integer", "minimum": 100},
        "n_max": {"type": "integer", "minimum": 1, "maximum": 12},
        "tol": _POS,
        "alpha": {"type": "array", "items": _NONNEG, "minItems": 1},
        "order": {
            "type": "object",
            "properties": {"t1": _NONNEG, "t2": _NONNEG},
            "required": ["t1", "t2"],
            "additionalProperties": False,
        },
        "paths": {"type": "integer", "minimum": 1},
        "trunc_horizon": _POS,
    },
    "required": ["y", "z", "horizon", "t_grid"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    seed: int = 0
    reps: int = 100_000
    n_max: int = 4
    tol: float = 1e-10
    alpha: tuple[float, ...] = (0.5, 1.0, 2.0)
    order: tuple[float, float] | None = None
    paths: int = 1
    trunc_horizon: float = 50.0

    @property
    def order_times(self) -> tuple[float, float]:
        if self.order is not None:
            return self.order
        g = self.scenario.t_grid
        return g[0], g[-1]

    def to_dict(self) -> dict:
        scn = self.scenario
        x0 = {"kind": scn.x0.kind}
        x0["value" if scn.x0.kind == "const" else "mean"] = scn.x0.value
        d = {
            "y": _sub_to_dict(scn.pair.y),
            "z": _sub_to_dict(scn.pair.z),
            "x0": x0,
            "y_mode": {"kind": scn.y_mode.kind},
            "horizon": scn.horizon,
            "t_grid": list(scn.t_grid),
            "seed": self.seed,
            "reps": self.reps,
            "n_max": self.n_max,
            "tol": self.tol,
            "alpha": list(self.alpha),
            "paths": self.paths,
            "trunc_horizon": self.trunc_horizon,
        }
        if scn.y_mode.kind == "random-drift":
            d["y_mode"].update(values=list(scn.y_mode.values), probs=list(scn.y_mode.probs))
        if self.order is not None:
            d["order"] = {"t1": self.order[0], "t2": self.order[1]}
        return d

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def _sub_to_dict(s: SubordinatorSpec) -> dict:
    jumps = []
    for c in s.components:
        d = c.dist
        dist: dict[str, Any] = {"kind": d.kind}
        if d.kind == "point":
            dist["x"] = d.scale
        elif d.kind == "uniform":
            dist["b"] = d.scale
        else:
            dist["mean"] = d.scale
            if d.kind == "erlang":
                dist["k"] = d.shape
        jumps.append({"rate": c.rate, "dist": dist})
    return {"drift": s.drift, "jumps": jumps}


def _path_str(path) -> str:
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _build_sub(d: dict, name: str) -> SubordinatorSpec:
    comps = []
    for i, j in enumerate(d.get("jumps", [])):
        dist = j["dist"]
        where = f"{name}.jumps[{i}].dist"
        need = _DIST_PARAMS[dist["kind"]]
        extra = set(dist) - {"kind", *need}
        missing = [p for p in need if p not in dist]
        if missing:
            raise ConfigError(f"config error at {where}: missing {', '.join(missing)} for {dist['kind']}")
        if extra:
            raise ConfigError(f"config error at {where}: {', '.join(sorted(extra))} not allowed for {dist['kind']}")
        if dist["kind"] == "point":
            jd = JumpDistribution.point(dist["x"])
        elif dist["kind"] == "uniform":
            jd = JumpDistribution.uniform(dist["b"])
        elif dist["kind"] == "exp":
            jd = JumpDistribution.exponential(dist["mean"])
        else:
            jd = JumpDistribution.erlang(dist["k"], dist["mean"])
        comps.append(JumpComponent(float(j["rate"]), jd))
    return SubordinatorSpec(float(d.get("drift", 0.0)), tuple(comps))


def parse_config(text: str) -> RunConfig:
    """Validate JSON text against the config schema and build a RunConfig.

    Raises
    ------
    ConfigError
        With the path of the offending field.  Z-jump support violations
        carry the model's message verbatim.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config error: invalid JSON ({e})") from None
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config error at {_path_str(e.absolute_path)}: {e.message}")
    try:
        y = _build_sub(raw["y"], "y")
        z = _build_sub(raw["z"], "z")
    except SpecError as e:
        raise ConfigError(f"config error: {e}") from None
    pair = DriverPair(y, z)
    try:
        validate_spec(pair)
    except SpecError as e:
        bad = next(
            i
            for i, c in enumerate(z.components)
            if c.dist.support_max > 1
        )
        raise ConfigError(f"config error at z.jumps[{bad}].dist: {e}") from None
    x0raw = raw.get("x0", {"kind": "const", "value": 0.0})
    if x0raw["kind"] == "const":
        if "mean" in x0raw:
            raise ConfigError("config error at x0.mean: not allowed for const")
        x0 = InitialLaw("const", float(x0raw.get("value", 0.0)))
    else:
        if "mean" not in x0raw or "value" in x0raw:
            raise ConfigError("config error at x0: exp initial law takes exactly 'mean'")
        x0 = InitialLaw("exp", float(x0raw["mean"]))
    ym = raw.get("y_mode", {"kind": "levy"})
    try:
        y_mode = YMode(ym["kind"], tuple(ym.get("values", ())), tuple(ym.get("probs", ())))
        scn = Scenario(pair, x0, float(raw["horizon"]), tuple(raw["t_grid"]), y_mode)
    except SpecError as e:
        raise ConfigError(f"config error: {e}") from None
    order = raw.get("order")
    return RunConfig(
        scenario=scn,
        seed=int(raw.get("seed", 0)),
        reps=int(raw.get("reps", 100_000)),
        n_max=int(raw.get("n_max", 4)),
        tol=float(raw.get("tol", 1e-10)),
        alpha=tuple(float(a) for a in raw.get("alpha", (0.5, 1.0, 2.0))),
        order=(float(order["t1"]), float(order["t2"])) if order else None,
        paths=int(raw.get("paths", 1)),
        trunc_horizon=float(raw.get("trunc_horizon", 50.0)),
    )


# -- output -----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float) or hasattr(v, "dtype"):
        f = float(v)
        if math.isnan(f):
            raise OutputError("NaN in output table")
        return f"{f:.17g}"
    return str(v)


def write_csv(header: Sequence[str], rows: Sequence[Sequence], path, comment: str | None = None) -> None:
    """Header plus rows, 17 significant digits, LF endings.

    Raises
    ------
    OutputError
        If a row has the wrong width or holds a NaN; nothing is written then.
    """
    lines = [[_fmt(v) for v in row] for row in rows]
    if any(len(r) != len(header) for r in lines):
        raise OutputError("table is not rectangular")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment is not None:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(lines)


def _meta(cfg: RunConfig) -> str:
    return f"linsde {__version__} config_sha256={cfg.digest()} seed={cfg.seed}"


# -- commands ---------------------------------------------------------------------


def _cmd_simulate(cfg: RunConfig, out: FsPath) -> int:
    scn = cfg.scenario
    B = streams.BLOCK_SIZE
    for i in range(cfg.paths):
        x0, r, batch = scenario_block(scn, cfg.seed, i // B)
        row = i % B
        ev = batch.stream(row)
        pair = DriverPair(SubordinatorSpec(float(r[row]), scn.pair.y.components), scn.pair.z)
        path = evolve(float(x0[row]), pair, ev)
        rows = [(t, float(path(t)), "", None, 0) for t in scn.t_grid]
        rows += [
            (float(t), float(path(t)), "Z" if z else "Y", float(s), 1)
            for t, s, z in zip(ev.times, ev.sizes, ev.is_z)
        ]
        rows.sort(key=lambda x: (x[0], x[4]))
        write_csv(
            ["t", "x", "event_source", "event_size"],
            [r_[:4] for r_ in rows],
            out / f"path_{i:04d}.csv",
            _meta(cfg),
        )
    print(f"wrote {cfg.paths} path file(s) to {out}")
    return 0


def _order_label(n: int) -> str:
    return "mean" if n == 1 else f"m{n}"


def _cmd_moments(cfg: RunConfig, out: FsPath) -> int:
    scn = cfg.scenario
    curves = analytic_curves(scn, cfg.n_max)
    rows = []
    for t in scn.t_grid:
        parts = []
        for n in range(1, cfg.n_max + 1):
            if n in curves:
                v = float(curves[n](t))
                rows.append((t, n, v))
                parts.append(f"{_order_label(n)} {v:.7f}")
        print(f"t={t:g} " + " ".join(parts))
    write_csv(["t", "n", "value"], rows, out / "moments.csv", _meta(cfg))
    dump = {
        "meta": _meta(cfg),
        "mixtures": {str(n): c.to_dict() for n, c in sorted(curves.items())},
    }
    text = json.dumps(dump, sort_keys=True, indent=1, allow_nan=False)
    (out / "mixtures.json").write_text(text + "\n", encoding="utf-8")
    return 0


def _cmd_validate(cfg: RunConfig, out: FsPath) -> int:
    scn = cfg.scenario
    curves = analytic_curves(scn, cfg.n_max)
    report = mc_moments(scn, cfg.n_max, cfg.reps, cfg.seed, curves)
    table = compare_report(curves, report)
    write_csv(list(table.header), [list(r) for r in table.rows], out / "validate.csv", _meta(cfg))
    for r in table.failures:
        print(f"FAIL t={r[0]:g} n={r[1]} analytic={r[2]:.8g} mc={r[3]:.8g} z={r[5]:.2f}")
    print(f"validate: {'PASS' if table.passed else 'FAIL'} ({len(table.rows)} cells)")
    return 0 if table.passed else 1


def _cmd_lst(cfg: RunConfig, out: FsPath) -> int:
    scn = cfg.scenario
    rows = []
    for a in cfg.alpha:
        for t in scn.t_grid:
            p = plain_lst(a, t, scn, cfg.reps, cfg.seed)
            c = conditional_lst(a, t, scn, cfg.reps, cfg.seed, cfg.tol) if scn.is_levy else None
            rows.append((a, t, p.mean, p.stderr, c.mean if c else None, c.stderr if c else None))
    write_csv(
        ["alpha", "t", "plain", "plain_se", "conditional", "conditional_se"], rows, out / "lst.csv", _meta(cfg)
    )
    if scn.is_levy and not scn.pair.z.is_zero:
        srows = []
        for a in cfg.alpha:
            s = stationary_lst_mc(a, scn, cfg.reps, cfg.seed, cfg.trunc_horizon, cfg.tol)
            srows.append((a, s.mean, s.stderr, s.truncated, s.truncation_bound))
        write_csv(
            ["alpha", "estimate", "stderr", "truncated", "truncation_bound"],
            srows,
            out / "stationary_lst.csv",
            _meta(cfg),
        )
    print(f"lst: {len(rows)} rows")
    return 0


def _cmd_order(cfg: RunConfig, out: FsPath) -> int:
    t1, t2 = cfg.order_times
    try:
        res = stochastic_order_check(cfg.scenario, t1, t2, cfg.reps, cfg.seed)
    except ValueError as e:
        raise ConfigError(f"config error: {e}") from None
    write_csv(
        ["t1", "t2", "reps", "max_violation", "eps", "pass"],
        [(t1, t2, cfg.reps, res.max_violation, res.eps, res.passed)],
        out / "order_check.csv",
        _meta(cfg),
    )
    print(f"order-check t1={t1:g} t2={t2:g}: {'PASS' if res.passed else 'FAIL'} "
          f"(max violation {res.max_violation:.4g}, 2*eps {2 * res.eps:.4g})")
    return 0 if res.passed else 1


_DISPATCH = {
    "simulate": _cmd_simulate,
    "moments": _cmd_moments,
    "validate": _cmd_validate,
    "lst": _cmd_lst,
    "order-check": _cmd_order,
}


def run(cfg: RunConfig, command: str, out_dir=".") -> int:
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}")
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _DISPATCH[command](cfg, out)


def apply_overrides(cfg: RunConfig, seed=None, reps=None, n=None, t=None, tol=None) -> RunConfig:
    changes: dict[str, Any] = {}
    if seed is not None:
        changes["seed"] = seed
    if reps is not None:
        if reps < 100:
            raise ConfigError("config error at reps: need at least 100")
        changes["reps"] = reps
    if n is not None:
        if not 1 <= n <= 12:
            raise ConfigError("config error at n_max: must lie in 1..12")
        changes["n_max"] = n
    if tol is not None:
        changes["tol"] = tol
    if t is not None:
        scn = cfg.scenario
        try:
            changes["scenario"] = Scenario(
                scn.pair, scn.x0, max(scn.horizon, max(t)), tuple(sorted(t)), scn.y_mode
            )
        except SpecError as e:
            raise ConfigError(f"config error at t_grid: {e}") from None
    return dataclasses.replace(cfg, **changes)


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="linsde", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON scenario file")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--n", type=int, help="maximum moment order")
    ap.add_argument("--t", type=float, nargs="+", help="replace the time grid")
    ap.add_argument("--tol", type=float, help="quadrature tolerance")
    args = ap.parse_args(argv)
    try:
        text = FsPath(args.config).read_text(encoding="utf-8")
        cfg = apply_overrides(parse_config(text), args.seed, args.reps, args.n, args.t, args.tol)
        return run(cfg, args.command, args.out)
    except (ConfigError, OSError) as e:
        print(str(e), file=sys.stderr)
        return 2
    except OutputError as e:
        print(f"output error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
