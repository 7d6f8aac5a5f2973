"""Command-line front end.

Subcommands: bound, simulate, sweep, multimode, raman, selftest.

Config files are flat ``key = value`` text. Keys are the long flag names
(dashes or underscores), lists are comma separated, ``#`` starts a comment.
Precedence: built-in default < config file < command-line flag. Every value
goes through the same parser either way, so a run gives identical bytes
whether it is expressed with flags or a file.

Exit codes: 0 success, 1 selftest failure, 2 config error (one-line
diagnostic on stderr), 3 theorem violation.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Callable, Sequence

from . import experiments as ex
from . import models as mdl
from .field_states import AUTO, number_stats
from .gate_metrics import TheoremViolation, cql_check
from .models import ModelKind
from .operator_core import CapacityError
from .selftest import run_selftest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_THEOREM = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"not a finite number: {text!r}")
    return x


def _nonneg(text: str) -> float:
    x = _float(text)
    if x < 0:
        raise ConfigError(f"must be non-negative: {text}")
    return x


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"not an integer: {text!r}") from None


def _list(item: Callable) -> Callable:
    def parse(text: str):
        parts = [p.strip() for p in str(text).split(",") if p.strip()]
        if not parts:
            raise ConfigError("empty list")
        return tuple(item(p) for p in parts)

    return parse


def _choice(*options: str) -> Callable:
    def parse(text: str) -> str:
        t = str(text).strip().lower()
        if t not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}")
        return t

    return parse


def _auto_or(item: Callable) -> Callable:
    def parse(text: str):
        return AUTO if str(text).strip().lower() == AUTO else item(text)

    return parse


def _sign(text: str) -> int:
    s = _int(text.replace("+", ""))
    if s not in (1, -1):
        raise ConfigError(f"target sign must be +1 or -1, got {text}")
    return s


_MODEL = _choice(*[k.value for k in ModelKind])

# name -> (parser, default, help); names map to --flag-name
PARAMS = {
    "bound": {
        "model": (_MODEL, "jc", "model kind"),
        "state": (_choice("coherent", "fock"), "coherent", "field state family"),
        "nbar": (_list(_nonneg), (0.0,), "mean photon number per mode (Fock level for fock)"),
        "cutoff": (_auto_or(_int), AUTO, "Fock cutoff per mode or auto"),
        "format": (_choice("text", "json"), "text", "output format"),
    },
    "simulate": {
        "model": (_MODEL, "jc", "model kind"),
        "state": (_choice("coherent", "fock"), "coherent", "field state family"),
        "nbar": (_list(_nonneg), (0.0,), "mean photon number per mode (Fock level for fock)"),
        "cutoff": (_auto_or(_int), AUTO, "Fock cutoff per mode or auto"),
        "time": (_auto_or(_nonneg), AUTO, "gate time as the product g*t, or auto"),
        "target_sign": (_sign, 1, "target sign s in D = U^dag sz U + s sx"),
        "format": (_choice("json"), "json", "output format"),
    },
    "sweep": {
        "study": (_choice("battery", "saturation"), "battery", "which study to run"),
        "models": (_list(_MODEL), ("jc",), "comma-separated model kinds"),
        "nbar_grid": (_list(_nonneg), (), "ascending nbar grid"),
        "family": (_choice("coherent", "fock", "random", "custom"), "coherent", "state family"),
        "fock_levels": (_list(_int), (), "extra Fock levels"),
        "cutoff": (_auto_or(_int), AUTO, "Fock cutoff or auto"),
        "seed": (_int, 0, "seed for the random family"),
        "custom_path": (str, None, "JSON file of [re, im] pairs"),
        "format": (_choice("csv", "json"), "csv", "output format"),
    },
    "multimode": {
        "nbar": (_list(_nonneg), (10.0, 10.0), "per-mode coherent nbar (2 or 3 modes)"),
        "couplings": (_list(_nonneg), (1.0, ex.SPECTATOR_COUPLING), "per-mode couplings g_k / g"),
        "cutoff": (_auto_or(_list(_int)), AUTO, "per-mode cutoffs or auto"),
        "time": (_auto_or(_nonneg), AUTO, "gate time as g*t, or auto"),
        "format": (_choice("json"), "json", "output format"),
    },
    "raman": {
        "state": (_choice("coherent", "fock"), "coherent", "drive state family"),
        "nbar": (_list(_nonneg), (20.0, 20.0), "nbar (or Fock level) of modes a and b"),
        "couplings": (_list(_nonneg), (1.0, 1.0), "g_a, g_b"),
        "detuning": (_auto_or(_float), AUTO, "common detuning, or auto"),
        "time": (_auto_or(_nonneg), AUTO, "gate time as g*t, or auto"),
        "format": (_choice("json"), "json", "output format"),
    },
    "selftest": {
        "fast": (None, False, "run the quick subset"),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cqlbench", description="Conservation-law limits on quantum gates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, params in PARAMS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output path (default stdout)")
        for key, (_, default, help_) in params.items():
            flag = "--" + key.replace("_", "-")
            if key == "fast":
                p.add_argument(flag, action="store_true", default=None, help=help_)
            else:
                p.add_argument(flag, dest=key, default=None, help=f"{help_} (default {default})")
        if name == "selftest":
            p.add_argument("--mutate", choices=["sign"], default=None, help=argparse.SUPPRESS)
    return parser


def read_config(path: str) -> dict[str, str]:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def resolve(command: str, args: argparse.Namespace) -> dict:
    params = PARAMS[command]
    raw = read_config(args.config) if args.config else {}
    unknown = sorted(set(raw) - set(params))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r} for {command}")
    for key in params:
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = flag
    values = {}
    for key, (parse, default, _) in params.items():
        if key not in raw:
            values[key] = default
        elif key == "fast":
            v = raw[key]
            values[key] = v if isinstance(v, bool) else _choice("true", "false")(v) == "true"
        else:
            try:
                values[key] = parse(raw[key])
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    return values


def _per_mode(values: Sequence[float], n: int, name: str) -> tuple:
    if len(values) == 1:
        return tuple(values) * n
    if len(values) != n:
        raise ConfigError(f"{name}: expected 1 or {n} values, got {len(values)}")
    return tuple(values)


def _n_modes(model: str, nbar: tuple) -> int:
    kind = ModelKind(model)
    if kind is ModelKind.RAMAN:
        return 2
    if kind is ModelKind.MULTIMODE:
        return len(nbar)
    return 1


def _single_case(v: dict):
    """Model and fields for bound/simulate."""
    n = _n_modes(v["model"], v["nbar"])
    nbars = _per_mode(v["nbar"], n, "nbar")
    kind = ModelKind(v["model"])
    if kind is ModelKind.MULTIMODE:
        fields = [ex.make_state(v["state"], x, v["cutoff"]) for x in nbars]
        m = mdl.multimode([f.cutoff for f in fields], (1.0,) + (ex.SPECTATOR_COUPLING,) * (n - 1))
        return m, fields
    if kind is ModelKind.RAMAN:
        phase = -1j if v["state"] == "coherent" else 1.0
        fields = [ex.make_state(v["state"], nbars[0], v["cutoff"]),
                  ex.make_state(v["state"], nbars[1], v["cutoff"], phase=phase)]
        delta = ex.RAMAN_DETUNING_FACTOR * math.sqrt(max(nbars) + 1.0)
        return mdl.raman((fields[0].cutoff, fields[1].cutoff), (1.0, 1.0), (delta, delta)), fields
    return ex.build_case(v["model"], v["state"], nbars[0], v["cutoff"])


def _time(v) -> float | None:
    return None if v == AUTO else float(v)


def cmd_bound(v: dict) -> str:
    n = _n_modes(v["model"], v["nbar"])
    nbars = _per_mode(v["nbar"], n, "nbar")
    if v["state"] == "fock":
        var = [0.0] * n
        for x in nbars:
            if abs(x - round(x)) > 1e-12:
                raise ConfigError(f"nbar: Fock level must be an integer, got {x:g}")
    else:
        var = list(nbars)
    kind = ModelKind(v["model"])
    var_l2 = sum(var) if kind is ModelKind.RAMAN else 4.0 * sum(var)
    bound = mdl.cql_bound(var_l2)
    if v["format"] == "json":
        return ex.report_json({"model": kind.value, "nbar": sum(nbars), "var_n": sum(var),
                               "var_l2": var_l2, "bound": bound}) + "\n"
    return f"bound {ex.format_number(bound)}\n"


def _sim_dict(sim: ex.Simulation) -> dict:
    out = {"model": sim.model.kind.value, "state": "+".join(f.label for f in sim.fields)}
    out["nbar"] = sum(number_stats(f).nbar for f in sim.fields)
    out.update(sim.report.to_dict())
    out.update(t_star=sim.time.t_star, time_rule=sim.time.rule.value, flagged=sim.time.flagged,
               var_l2=sim.var_l2, saturation_ratio=sim.saturation_ratio, leakage=sim.leakage)
    return out


def cmd_simulate(v: dict) -> str:
    m, fields = _single_case(v)
    sim = ex.simulate(m, fields, t=_time(v["time"]), target_sign=v["target_sign"])
    cql_check(sim.report)
    return ex.report_json(_sim_dict(sim)) + "\n"


def cmd_sweep(v: dict) -> str:
    cfg = ex.SweepConfig(models=v["models"], nbar_grid=v["nbar_grid"], family=v["family"],
                         fock_levels=v["fock_levels"], cutoff=v["cutoff"], fmt=v["format"],
                         seed=v["seed"], custom_path=v["custom_path"])
    rows = ex.run_saturation_sweep(cfg) if v["study"] == "saturation" else ex.run_bound_battery(cfg)
    return ex.rows_to_csv(rows) if cfg.fmt == "csv" else ex.rows_to_jsonl(rows)


def cmd_multimode(v: dict) -> str:
    n = len(v["nbar"])
    couplings = _per_mode(v["couplings"], n, "couplings")
    demo = ex.run_multimode_demo(v["nbar"], couplings, v["cutoff"], t=_time(v["time"]))
    out = _sim_dict(demo.simulation)
    out.update(bound=demo.bound, looseness=demo.looseness, holds=demo.holds)
    return ex.report_json(out) + "\n"


def cmd_raman(v: dict) -> str:
    nbars = _per_mode(v["nbar"], 2, "nbar")
    couplings = _per_mode(v["couplings"], 2, "couplings")
    detuning = None if v["detuning"] == AUTO else v["detuning"]
    demo = ex.run_raman_demo(v["state"], nbars, couplings, detuning, t=_time(v["time"]))
    out = _sim_dict(demo.simulation)
    out.update(bound=demo.bound, holds=demo.holds, conservation_residual=demo.conservation_residual,
               commutator_residual=demo.commutator_residual, leak_gap=demo.leak_gap,
               identity_residual=demo.identity_residual)
    return ex.report_json(out) + "\n"


COMMANDS = {
    "bound": cmd_bound,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "multimode": cmd_multimode,
    "raman": cmd_raman,
}


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        try:
            with open(out_path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out_path}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def parse_and_dispatch(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        values = resolve(args.command, args)
        if args.command == "selftest":
            chunks = []
            code = run_selftest(fast=values["fast"], mutate=args.mutate, write=chunks.append)
            _emit("".join(c + "\n" for c in chunks), args.out)
            return code
        _emit(COMMANDS[args.command](values), args.out)
        return EXIT_OK
    except TheoremViolation as exc:
        print(f"cqlbench: theorem violation: {exc}", file=sys.stderr)
        return EXIT_THEOREM
    except (ConfigError, CapacityError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"cqlbench: error: {msg}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(parse_and_dispatch())
