"""Command-line experiment runner.

Every command is declared once as a list of typed parameters; the same
declaration drives argparse flags, ``key=value`` tokens on the command line
and ``run-config`` files, so unknown keys fail the same way everywhere.

Artifacts are JSON (or JSONL/CSV for tables) and always carry the tool
version, the resolved parameters and the seed.  They are written through a
temporary file and renamed, so a failed run leaves nothing behind.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

OUTDIR_ENV = "SIXVERTEX_OUTDIR"


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------
# parameter parsing
# ----------------------------------------------------------------------
def parse_number(text: str):
    """int, then Fraction ("3/10"), then float."""
    text = str(text).strip()
    try:
        return int(text)
    except ValueError:
        pass
    if "/" in text:
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"bad number {text!r}") from e
    try:
        return float(text)
    except ValueError as e:
        raise ConfigError(f"bad number {text!r}") from e


def parse_weights(text: str) -> tuple:
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise ConfigError(f"weights need three values a,b,c, got {text!r}")
    vals = tuple(parse_number(p) for p in parts)
    if any(v <= 0 for v in vals):
        raise ConfigError("weights must be positive")
    return vals


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def parse_list(text) -> list[str]:
    return [p.strip() for p in str(text).split(",") if p.strip()]


@dataclass
class Param:
    name: str
    parse: Callable[[str], Any]
    default: Any = None
    required: bool = False
    help: str = ""
    choices: tuple = ()


@dataclass
class Command:
    group: str
    action: str | None
    params: list[Param]
    run: Callable[[dict], "Result"]
    stochastic: bool = False
    help: str = ""

    @property
    def name(self) -> str:
        return self.group if self.action is None else f"{self.group} {self.action}"

    def resolve(self, raw: dict) -> dict:
        known = {p.name for p in self.params}
        if self.stochastic:
            known.add("seed")
        unknown = sorted(set(raw) - known - {"out"})
        if unknown:
            raise ConfigError(f"unknown keys for '{self.name}': {', '.join(unknown)}")
        out = {}
        for p in self.params:
            if raw.get(p.name) is None:
                if p.required:
                    raise ConfigError(f"'{self.name}' needs {p.name}")
                out[p.name] = p.default
                continue
            v = raw[p.name]
            v = p.parse(v) if isinstance(v, str) else v
            if p.choices and v not in p.choices:
                raise ConfigError(f"{p.name} must be one of {', '.join(map(str, p.choices))}")
            out[p.name] = v
        if self.stochastic:
            if raw.get("seed") is None:
                raise ConfigError(f"'{self.name}' is stochastic and needs an explicit seed")
            try:
                out["seed"] = int(raw["seed"])
            except ValueError as e:
                raise ConfigError(f"seed must be an integer, got {raw['seed']!r}") from e
        return out


@dataclass
class Result:
    """What a command produced: a JSON payload, an optional table, and what to print."""

    payload: dict
    table: list[dict] | None = None
    table_format: str = "csv"
    text: str | None = None
    extra: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# JSON helpers
# ----------------------------------------------------------------------
def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _weights(vals):
    from .lattice import Weights

    if all(isinstance(v, (int, Fraction)) for v in vals):
        return Weights.exact(*vals)
    return Weights(*(float(v) for v in vals))


def _boundary(n: int, kind: str):
    from .lattice import BoundaryCondition

    return BoundaryCondition.free(n) if kind == "free" else BoundaryCondition.domain_wall(n)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------
def cmd_exact_count(p):
    from .exact import asm_count, brute_force_states, enumerate_states

    space = enumerate_states(p["n"], _boundary(p["n"], p["boundary"]), cap=p["cap"])
    out = {"states": space.size}
    if p["brute_force"]:
        out["brute_force_states"] = int(brute_force_states(p["n"], _boundary(p["n"], p["boundary"])).shape[0])
    if p["boundary"] == "domain-wall":
        out["alternating_sign_matrices"] = asm_count(p["n"])
    return Result(out, text=str(space.size))


def cmd_exact_chain(p):
    from .exact import (
        boltzmann,
        detailed_balance_violations,
        enumerate_states,
        is_ergodic,
        min_conductance,
        NonErgodic,
        mixing_time,
        partition_function,
        spectral_gap,
        transition_matrix,
    )

    n, w = p["n"], _weights(p["weights"])
    space = enumerate_states(n, _boundary(n, p["boundary"]), cap=p["cap"])
    out = {"states": space.size, "delta": float(w.delta()), "phase": w.phase().value,
           "partition_function": partition_function(space, w), "ergodic": is_ergodic(space)}
    P = transition_matrix(space, w, lazy=p["lazy"])
    pi = np.asarray([float(x) for x in boltzmann(space, w)]) if w.is_exact() else boltzmann(space, w)
    if w.is_exact() and space.size <= 5000:
        out["detailed_balance_violations"] = len(detailed_balance_violations(space, w, lazy=p["lazy"]))
    if space.size <= p["dense_limit"] and out["ergodic"]:
        out["spectral_gap"] = spectral_gap(P, pi)
        try:
            out["mixing_time_quarter"] = mixing_time(P, pi)
        except NonErgodic:
            # connected but periodic; the lazy chain mixes
            out["mixing_time_quarter"] = None
            out["note"] = "chain is periodic; rerun with lazy=true"
        c = min_conductance(P.dense(), pi)
        out["conductance"] = {"value": c.value, "exact_minimum": c.exact, "cut": c.label,
                              "lower_bound_on_tau": 1.0 / (4 * c.value) if c.value > 0 else None}
    return Result(out)


def cmd_simulate_run(p):
    from .glauber import ChainState, run
    from .lattice import ground_state_green, ground_state_red

    n, w = p["n"], _weights(p["weights"])
    if p["boundary"] != "free" and p["start"] != "ground":
        raise ConfigError("start=red/green needs the free boundary")
    if p["start"] == "red":
        cfg = ground_state_red(n)
    elif p["start"] == "green":
        cfg = ground_state_green(n)
    else:
        from .exact import enumerate_states

        cfg = enumerate_states(n, _boundary(n, p["boundary"]), cap=p["cap"])[0]
    st = ChainState.start(cfg, w, p["seed"], lazy=p["lazy"])
    st, traj = run(st, p["steps"], parse_list(p["observables"]), thinning=p["thinning"])
    summary = {"steps": st.step_count, "accepted": st.accepted, "records": len(traj.records),
               "final_state": json.loads(st.config.to_json())}
    lines = "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in traj.records)
    return Result(summary, extra={"trajectory.jsonl": lines})


def cmd_simulate_cross(p):
    from .faultline import failure_rate_heuristic
    from .glauber import ChainState, first_cross_time
    from .lattice import ground_state_green, ground_state_red

    n, w = p["n"], _weights(p["weights"])
    cfg = ground_state_red(n) if p["start"] == "red" else ground_state_green(n)
    runs = []
    for k in range(p["chains"]):
        st = ChainState.start(cfg, w, p["seed"], stream=k)
        t, st = first_cross_time(st, p["steps"], p["color"])
        runs.append({"stream": k, "first_cross_step": t})
    return Result({"runs": runs, "hits": sum(r["first_cross_step"] is not None for r in runs),
                   "heuristic_escape_rate": failure_rate_heuristic(w, n)})


def cmd_crw_pdf(p):
    from .crw import CorrelatedWalkSpec, pdf_exact, pdf_oracle

    spec = CorrelatedWalkSpec(p["n"], p["p"])
    oracle = pdf_oracle(spec)
    rows = [{"position": 2 * m, "closed_form": pdf_exact(spec, abs(m)), "dynamic_programming": oracle[2 * m]}
            for m in range(-p["n"], p["n"] + 1)]
    return Result({"n": p["n"], "p": p["p"], "support": len(rows)}, table=rows)


def cmd_crw_tail(p):
    from .crw import conditioned_walk_tail, tethered_deviation_tail

    n, mu, m = p["n"], p["mu"], p["m"]
    a = tethered_deviation_tail(n, mu, m)
    b = conditioned_walk_tail(n, mu, m)
    return Result({"tethered_dp": a, "conditioned_walk": b,
                   "abs_difference": abs(float(a) - float(b))})


def cmd_crw_bound(p):
    from .crw import CorrelatedWalkSpec, verify_tail

    spec = CorrelatedWalkSpec.from_mu(p["n"], p["mu"])
    rep = verify_tail(spec, p["eps"])
    d = dict(rep.__dict__)
    d["holds"] = rep.holds
    return Result(d)


def cmd_crw_simulate(p):
    from .crw import CorrelatedWalkSpec, empirical_distribution, pdf_oracle

    spec = CorrelatedWalkSpec(p["n"], p["p"])
    emp = empirical_distribution(spec, p["samples"], p["seed"])
    exact = pdf_oracle(spec)
    tv = 0.5 * sum(abs(emp.get(m, 0.0) - exact.get(m, 0.0)) for m in set(emp) | set(exact))
    rows = [{"position": x, "empirical": emp.get(x, 0.0), "exact": float(exact.get(x, 0.0))}
            for x in range(-2 * p["n"], 2 * p["n"] + 1, 2)]
    return Result({"samples": p["samples"], "tv_to_exact": tv}, table=rows)


def _fmt_value(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def cmd_nbwalk_eval(p):
    from . import nbwalk

    n, x, y, method = p["n"], p["x"], p["y"], p["method"]
    if method == "brute":
        val = nbwalk.F_brute(n, x, y).walk_sum
    elif method == "recurrence":
        val = nbwalk.F_recurrence(n, x, y)
    elif method == "closed":
        val = nbwalk.F_closed_form(n, x, y)
    else:
        val = nbwalk.F_upper_bound(n, x, y)
    return Result({"n": n, "x": x, "y": y, "method": method, "value": val}, text=_fmt_value(val))


def cmd_nbwalk_afe(p):
    from .nbwalk import afe_condition

    c = afe_condition(*p["weights"])
    d = dict(c.__dict__)
    d["implication_holds"] = c.implication_holds
    return Result(d)


def cmd_faultline_classify(p):
    from .faultline import classify
    from .lattice import Configuration, ground_state_green, ground_state_red

    if p["config"]:
        cfg = Configuration.from_json(Path(p["config"]).read_text())
    elif p["start"] == "red":
        cfg = ground_state_red(p["n"])
    else:
        cfg = ground_state_green(p["n"])
    return Result(classify(cfg).to_dict())


def cmd_faultline_space(p):
    from .exact import enumerate_states
    from .faultline import boundary_subset_check, classify_space, cut_mass_afe, peierls_check

    space = enumerate_states(p["n"])
    cl = classify_space(space)
    rep = boundary_subset_check(space, cl)
    out = {"sizes": rep.sizes, "partition_holds": rep.partition_holds, "containment_holds": rep.containment_holds,
           "boundary_size": rep.boundary_size}
    if p["weights"] is not None:
        w = _weights(p["weights"])
        out["cut_mass"] = cut_mass_afe(space, w, cl)
        if p["peierls"]:
            out["peierls"] = peierls_check(space, w).to_dict()
    return Result(out)


def _ferro_spec(p):
    from .ferro import IndependentPathsSpec

    return IndependentPathsSpec(p["n"], p["ell"], p["d"])


def cmd_ferro_build(p):
    from .ferro import build_boundary, ground_state_accounting, staircase_state, terminals

    spec = _ferro_spec(p)
    out = {"spec": spec.to_dict(),
           "terminals": [{"label": t.label, "start": t.start, "end": t.end, "entry": t.entry, "exit": t.exit}
                         for t in terminals(spec)],
           "boundary": build_boundary(spec).to_dict(),
           "witness_state": json.loads(staircase_state(spec).to_json())}
    try:
        out["ground_state_accounting"] = ground_state_accounting(spec).to_dict()
    except ValueError as e:
        out["ground_state_accounting"] = {"error": str(e)}
    return Result(out)


def cmd_ferro_escape(p):
    from .ferro import cut_mass_bound, escape_probability

    spec = _ferro_spec(p)
    est = escape_probability(spec, p["lambda"], p["mu"], p["steps"], p["seed"], theta=p["theta"])
    out = {"measured": est.to_dict()}
    try:
        out["analytic"] = cut_mass_bound(spec, p["lambda"], p["mu"]).to_dict()
    except ValueError as e:
        out["analytic"] = {"error": str(e)}
    return Result(out)


def cmd_ferro_exact(p):
    from .ferro import exact_cut

    spec = _ferro_spec(p)
    res, *_ = exact_cut(spec, p["lambda"], p["mu"], theta=p["theta"])
    return Result({"measured_exact": res.to_dict()})


def phase_row(x: float, y: float) -> dict:
    """One point of the (a/c, b/c) plane with c = 1."""
    from .lattice import Weights
    from .nbwalk import afe_condition

    w = Weights(float(x), float(y), 1.0)
    cond = afe_condition(x, y, 1.0)
    return {
        "a_over_c": x,
        "b_over_c": y,
        "delta": float(w.delta()),
        "phase": w.phase().value,
        "afe_condition": bool(3 * x * y + x + y < 1),
        "afe_decay_base": cond.base,
        "fe_condition": bool(x > y + 1 or y > x + 1),
    }


def _parse_points(text: str) -> list[tuple[float, float]]:
    """"a:b,a:b,..." pairs of (a/c, b/c)."""
    out = []
    for item in text.split(","):
        try:
            x, y = (float(v) for v in item.split(":"))
        except ValueError as e:
            raise ConfigError(f"expected a/c:b/c pairs, got {item!r}") from e
        if x <= 0 or y <= 0:
            raise ConfigError("ratios must be positive")
        out.append((x, y))
    return out


def cmd_phase_scan(p):
    if p["at"] is not None:
        rows = [phase_row(x, y) for x, y in _parse_points(p["at"])]
    else:
        lo, hi, k = p["min"], p["max"], p["points"]
        if lo <= 0 or hi <= lo or k < 1:
            raise ConfigError("need 0 < min < max and points >= 1")
        grid = np.geomspace(lo, hi, k) if p["log"] else np.linspace(lo, hi, k)
        rows = [phase_row(float(x), float(y)) for x in grid for y in grid]
    counts = {}
    for r in rows:
        counts[r["phase"]] = counts.get(r["phase"], 0) + 1
    return Result({"points": len(rows), "phase_counts": counts}, table=rows)


def _num(x):
    return parse_number(x)


def _pos_int(x):
    v = int(x)
    if v < 1:
        raise ConfigError("expected a positive integer")
    return v


BOUNDARIES = ("free", "domain-wall")
COMMANDS: dict[str, Command] = {}


def _register(cmd: Command):
    COMMANDS[cmd.name] = cmd


_register(Command("exact", "count", [
    Param("n", _pos_int, required=True), Param("boundary", str, "free", choices=BOUNDARIES),
    Param("brute_force", parse_bool, False), Param("cap", int, 10 ** 6),
], cmd_exact_count, help="count Eulerian orientations"))
_register(Command("exact", "chain", [
    Param("n", _pos_int, required=True), Param("boundary", str, "free", choices=BOUNDARIES),
    Param("weights", parse_weights, (1, 1, 1)), Param("lazy", parse_bool, False),
    Param("dense_limit", int, 3000), Param("cap", int, 10 ** 6),
], cmd_exact_chain, help="exact transition matrix: gap, mixing time, conductance"))
_register(Command("simulate", "run", [
    Param("n", _pos_int, required=True), Param("boundary", str, "free", choices=BOUNDARIES),
    Param("weights", parse_weights, (1, 1, 1)), Param("steps", int, 10 ** 5), Param("thinning", _pos_int, 1000),
    Param("observables", str, "vertex_counts,red_fraction"), Param("start", str, "red", choices=("red", "green", "ground")),
    Param("lazy", parse_bool, False), Param("cap", int, 10 ** 6),
], cmd_simulate_run, stochastic=True, help="Glauber trajectory with recorded observables"))
_register(Command("simulate", "cross", [
    Param("n", _pos_int, required=True), Param("weights", parse_weights, (1, 1, 8)), Param("steps", int, 10 ** 7),
    Param("chains", _pos_int, 5), Param("color", str, "green", choices=("red", "green")),
    Param("start", str, "red", choices=("red", "green")),
], cmd_simulate_cross, stochastic=True, help="first time a monochromatic cross appears"))
_register(Command("crw", "pdf", [
    Param("n", _pos_int, required=True), Param("p", _num, required=True),
], cmd_crw_pdf, help="distribution of the correlated walk after 2n steps"))
_register(Command("crw", "tail", [
    Param("n", _pos_int, required=True), Param("mu", _num, 1), Param("m", int, required=True),
], cmd_crw_tail, help="tethered deviation tail two ways"))
_register(Command("crw", "bound", [
    Param("n", _pos_int, required=True), Param("mu", float, 1.0), Param("eps", float, 0.5),
], cmd_crw_bound, help="check the exponential tail bound"))
_register(Command("crw", "simulate", [
    Param("n", _pos_int, required=True), Param("p", float, required=True), Param("samples", _pos_int, 100000),
], cmd_crw_simulate, stochastic=True, help="sampled walk endpoints against the exact law"))
_register(Command("nbwalk", "eval", [
    Param("n", _pos_int, required=True), Param("x", _num, required=True), Param("y", _num, required=True),
    Param("method", str, "closed", choices=("brute", "recurrence", "closed", "bound")),
], cmd_nbwalk_eval, help="evaluate F_n(x, y)"))
_register(Command("nbwalk", "afe", [
    Param("weights", parse_weights, required=True),
], cmd_nbwalk_afe, help="antiferroelectric parameter condition"))
_register(Command("faultline", "classify", [
    Param("n", _pos_int, 4), Param("config", str, None), Param("start", str, "red", choices=("red", "green")),
], cmd_faultline_classify, help="class of one configuration with witnesses"))
_register(Command("faultline", "space", [
    Param("n", _pos_int, required=True), Param("weights", parse_weights, None), Param("peierls", parse_bool, False),
], cmd_faultline_space, help="exhaustive partition and Peierls checks"))
_register(Command("ferro", "build", [
    Param("n", _pos_int, required=True), Param("ell", int, None), Param("d", int, None),
], cmd_ferro_build, help="independent-paths boundary and ground-state accounting"))
_register(Command("ferro", "escape", [
    Param("n", _pos_int, required=True), Param("ell", int, None), Param("d", int, None),
    Param("lambda", float, required=True), Param("mu", float, 1.0), Param("steps", _pos_int, 10 ** 6),
    Param("theta", float, None),
], cmd_ferro_escape, stochastic=True, help="one-step escape frequency from S"))
_register(Command("ferro", "exact", [
    Param("n", _pos_int, required=True), Param("ell", int, None), Param("d", int, None),
    Param("lambda", float, required=True), Param("mu", float, 1.0), Param("theta", float, None),
], cmd_ferro_exact, help="exact pi(S) and Phi(S) on an enumerable instance"))
_register(Command("phase-scan", None, [
    Param("min", float, 0.05), Param("max", float, 4.0), Param("points", _pos_int, 41), Param("log", parse_bool, True),
    Param("at", str, None, help="explicit a/c:b/c pairs instead of a grid"),
], cmd_phase_scan, help="phase classification over a grid of (a/c, b/c)"))


# ----------------------------------------------------------------------
# execution
# ----------------------------------------------------------------------
def _table_text(rows: list[dict], fmt: str) -> str:
    if fmt == "jsonl":
        return "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in rows)
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({k: _jsonable(v) for k, v in r.items()})
    return buf.getvalue()


def execute(name: str, raw: dict, out: str | None = None, stdout=None) -> dict:
    """Resolve, run and write one command; returns the artifact dict."""
    stdout = stdout or sys.stdout
    if name not in COMMANDS:
        raise ConfigError(f"unknown command {name!r}")
    cmd = COMMANDS[name]
    params = cmd.resolve(raw)
    res = cmd.run(params)
    artifact = {
        "tool": "sixvertex",
        "version": __version__,
        "command": cmd.name,
        "config": params,
        "seed": params.get("seed"),
        "result": res.payload,
    }
    target = out or raw.get("out")
    if target is None and os.environ.get(OUTDIR_ENV):
        stem = cmd.name.replace(" ", "-")
        if "seed" in params:
            stem += f"-seed{params['seed']}"
        target = str(Path(os.environ[OUTDIR_ENV]) / f"{stem}.json")
    files = {}
    if res.table is not None:
        files["table"] = _table_text(res.table, res.table_format)
    files.update(res.extra)
    text = dumps(artifact)
    if target:
        base = Path(target)
        # render everything first so a failure leaves no partial artifacts behind
        rendered = [(base, text)]
        for suffix, body in files.items():
            ext = "csv" if suffix == "table" else suffix
            rendered.append((base.with_name(base.stem + "." + ext), _with_header(body, artifact, ext)))
        for path, body in rendered:
            atomic_write(path, body)
    if res.text is not None:
        print(res.text, file=stdout)
    elif not target:
        if res.table is not None and name == "phase-scan":
            stdout.write(files["table"])
        else:
            stdout.write(text)
    else:
        print(target, file=stdout)
    return artifact


def _with_header(body: str, artifact: dict, ext: str) -> str:
    meta = {k: artifact[k] for k in ("tool", "version", "command", "config", "seed")}
    line = json.dumps(_jsonable(meta), sort_keys=True)
    if ext.endswith("jsonl"):
        return json.dumps({"meta": _jsonable(meta)}, sort_keys=True) + "\n" + body
    return "# " + line + "\n" + body


def read_config(path: str) -> tuple[str, dict]:
    """key = value lines; ``command`` names the subcommand ("nbwalk eval")."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    raw = dict(cp["run"])
    if "command" not in raw:
        raise ConfigError(f"config {path} has no 'command' key")
    name = " ".join(raw.pop("command").split())
    return name, raw


def _split_kv(tokens: list[str]) -> dict:
    out = {}
    for t in tokens:
        if "=" not in t:
            raise ConfigError(f"expected key=value, got {t!r}")
        k, v = t.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sixvertex", description="Six-vertex model experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="group", required=True)
    groups: dict[str, Any] = {}
    for cmd in COMMANDS.values():
        if cmd.action is None:
            sp = sub.add_parser(cmd.group, help=cmd.help)
            _add_params(sp, cmd)
            continue
        if cmd.group not in groups:
            g = sub.add_parser(cmd.group)
            groups[cmd.group] = g.add_subparsers(dest="action", required=True)
        sp = groups[cmd.group].add_parser(cmd.action, help=cmd.help)
        _add_params(sp, cmd)
    rc = sub.add_parser("run-config", help="run a key=value config file")
    rc.add_argument("path")
    rc.add_argument("--out", default=None)
    return ap


def _add_params(sp, cmd: Command):
    for p in cmd.params:
        sp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, default=None, help=p.help or None)
    if cmd.stochastic:
        sp.add_argument("--seed", default=None, help="required")
    sp.add_argument("--out", default=None, help=f"artifact path (default: ${OUTDIR_ENV}/<command>.json or stdout)")
    sp.add_argument("kv", nargs="*", help="extra key=value parameters")


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.group == "run-config":
            name, raw = read_config(args.path)
            execute(name, raw, out=args.out)
            return 0
        name = args.group if getattr(args, "action", None) is None else f"{args.group} {args.action}"
        raw = {k: v for k, v in vars(args).items() if k not in ("group", "action", "kv", "out") and v is not None}
        for k, v in _split_kv(args.kv).items():
            if k in raw:
                raise ConfigError(f"{k} given twice")
            raw[k] = v
        execute(name, raw, out=args.out)
        return 0
    except (ConfigError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
