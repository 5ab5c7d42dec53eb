"""Experiment specifications, YAML configs and result tables.

Every experiment yields rows ``(param, quantity, value, unit)``.  The
``param`` string spells out every input of the row, so a row can be
recomputed on its own.  Frequencies are in MHz, times in ns, ``kappa`` in
1/us.
"""
import csv
import dataclasses
import io
import json
import logging
import math
import subprocess
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import calibration as cal
from . import circuit as circ
from . import dispersive as dsp
from .config import DispersiveValidityError, SystemConfig, TLSParams
from .fidelity import compensate_local_phases
from .hamiltonian import FRAMES
from .lindblad import simulate_gate_channel

log = logging.getLogger(__name__)

EXPERIMENTS = (
    "table1", "fig2-gatetimes", "fig2-beta", "fig2-energies",
    "swap-point", "fig3-sweep", "cz-plan", "custom",
)
GATES = ("x", "hadamard", "swap", "cz", "none")
FORMATS = ("csv", "json")
CUTOFF_TOL = 1e-4
CUTOFF_EXTRA = 4


class ConfigError(ValueError):
    pass


# Errors that map onto the calibration exit status.
CALIBRATION_ERRORS = (cal.CalibrationError, dsp.DispersiveError, DispersiveValidityError,
                      circ.CircuitError)


@dataclass(frozen=True)
class Sweep:
    parameter: str
    start: float
    stop: float
    steps: int

    def values(self):
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class Numerics:
    fock_cutoff: int = 10
    step_ps: float = None  # None: automatic
    frame: str = "transformed"
    dressed_loss: bool = False
    cutoff_check: bool = False
    workers: int = 1


@dataclass(frozen=True)
class Output:
    path: str = None  # None: standard output
    format: str = "csv"


@dataclass
class ExperimentSpec:
    name: str
    system: SystemConfig = None
    circuit: circ.CircuitParams = None
    sweep: Sweep = None
    numerics: Numerics = field(default_factory=Numerics)
    options: dict = field(default_factory=dict)
    output: Output = field(default_factory=Output)


@dataclass(frozen=True)
class Row:
    param: str
    quantity: str
    value: object
    unit: str


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list
    provenance: dict


# ---------------------------------------------------------------- validation

_TOP = {"experiment", "system", "circuit", "sweep", "numerics", "options", "output"}
_SYSTEM_REQUIRED = {"tls", "Delta_c", "epsilon", "kappa"}
_SYSTEM_OPTIONAL = {"drive_bound"}
_CIRCUIT_REQUIRED = {"E_J", "C0", "L"}
_CIRCUIT_OPTIONAL = {"Phi_ex", "delta_Ic", "j_x"}
_OPTIONS = {
    "table1": {"x_Delta_c", "hadamard_Delta_c", "target"},
    "fig2-gatetimes": {"target"},
    "fig2-beta": {"pair"},
    "fig2-energies": {"pair"},
    "swap-point": {"pair", "dephasing_tls"},
    "fig3-sweep": {"gate", "target", "pair", "phase_detuning"},
    "cz-plan": {"pair", "phase_detuning"},
    "custom": {"gate", "target", "pair", "phase_detuning", "simulate"},
}
_SYSTEM_PARAMS = ("Delta_c", "epsilon", "kappa")
_CIRCUIT_PARAMS = ("E_J", "C0", "L", "Phi_ex", "delta_Ic")


def _line_map(text):
    """Map key paths like ``system.tls.0.g`` to 1-based source lines."""
    lines = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                walk(v, f"{path}.{k.value}" if path else str(k.value))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk(v, f"{path}.{i}")

    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return lines
    if root is not None:
        walk(root, "")
    return lines


class _Checker:
    def __init__(self, lines=None, source="<config>"):
        self.lines = lines or {}
        self.source = source

    def fail(self, path, msg):
        line = self.lines.get(path)
        where = f"{self.source}, line {line}" if line else self.source
        raise ConfigError(f"{where}: {path}: {msg}" if path else f"{where}: {msg}")

    def mapping(self, obj, path, required=(), optional=()):
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        allowed = set(required) | set(optional)
        for key in obj:
            if key not in allowed:
                self.fail(f"{path}.{key}" if path else str(key),
                          f"unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
        for key in required:
            if key not in obj:
                self.fail(path, f"missing required key {key!r}")
        return obj

    def number(self, obj, path, positive=False, nonneg=False):
        # YAML 1.1 reads exponents without a decimal point (1e-12) as strings.
        if isinstance(obj, str):
            try:
                obj = float(obj)
            except ValueError:
                self.fail(path, f"expected a number, got {obj!r}")
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            self.fail(path, f"expected a number, got {obj!r}")
        x = float(obj)
        if not math.isfinite(x):
            self.fail(path, "must be finite")
        if positive and x <= 0:
            self.fail(path, f"must be positive, got {x}")
        if nonneg and x < 0:
            self.fail(path, f"must be non-negative, got {x}")
        return x

    def integer(self, obj, path, minimum=None):
        if isinstance(obj, bool) or not isinstance(obj, int):
            self.fail(path, f"expected an integer, got {obj!r}")
        if minimum is not None and obj < minimum:
            self.fail(path, f"must be >= {minimum}, got {obj}")
        return obj

    def choice(self, obj, path, allowed):
        if obj not in allowed:
            self.fail(path, f"{obj!r} is not one of {', '.join(map(str, allowed))}")
        return obj

    def boolean(self, obj, path):
        if not isinstance(obj, bool):
            self.fail(path, f"expected true or false, got {obj!r}")
        return obj


def _system(chk, raw, path="system"):
    chk.mapping(raw, path, _SYSTEM_REQUIRED, _SYSTEM_OPTIONAL)
    tls_raw = raw["tls"]
    if not isinstance(tls_raw, list) or not tls_raw:
        chk.fail(f"{path}.tls", "expected a non-empty list of {Delta, g}")
    tls = []
    for i, t in enumerate(tls_raw):
        p = f"{path}.tls.{i}"
        chk.mapping(t, p, {"Delta", "g"})
        tls.append(TLSParams(chk.number(t["Delta"], f"{p}.Delta"), chk.number(t["g"], f"{p}.g")))
    kw = {
        "Delta_c": chk.number(raw["Delta_c"], f"{path}.Delta_c"),
        "epsilon": chk.number(raw["epsilon"], f"{path}.epsilon"),
        "kappa": chk.number(raw["kappa"], f"{path}.kappa", nonneg=True),
    }
    if "drive_bound" in raw:
        kw["drive_bound"] = chk.number(raw["drive_bound"], f"{path}.drive_bound", positive=True)
    return SystemConfig(tls=tuple(tls), **kw)


def _circuit(chk, raw, path="circuit"):
    chk.mapping(raw, path, _CIRCUIT_REQUIRED, _CIRCUIT_OPTIONAL)
    E_J = chk.number(raw["E_J"], f"{path}.E_J", positive=True)
    L = raw["L"]
    L = circ.CircuitParams.inductance_matched(E_J) if L == "matched" else chk.number(
        L, f"{path}.L", positive=True)
    j_x = raw.get("j_x", [])
    if not isinstance(j_x, list):
        chk.fail(f"{path}.j_x", "expected a list")
    try:
        return circ.CircuitParams(
            E_J=E_J,
            C0=chk.number(raw["C0"], f"{path}.C0", positive=True),
            L=L,
            Phi_ex=chk.number(raw.get("Phi_ex", 0.0), f"{path}.Phi_ex"),
            delta_Ic=chk.number(raw.get("delta_Ic", 0.0), f"{path}.delta_Ic"),
            j_x=tuple(chk.number(j, f"{path}.j_x.{i}", nonneg=True) for i, j in enumerate(j_x)),
        )
    except circ.CircuitError as exc:
        chk.fail(path, str(exc))


def _sweep_param_ok(name, spec_has_system):
    if spec_has_system:
        if name in _SYSTEM_PARAMS:
            return True
        parts = name.split(".")
        return len(parts) == 3 and parts[0] == "tls" and parts[1].isdigit() and parts[2] in ("Delta", "g")
    return name in _CIRCUIT_PARAMS


def spec_from_dict(raw, lines=None, source="<config>") -> ExperimentSpec:
    """Validate a plain mapping (as parsed from YAML) into an :class:`ExperimentSpec`."""
    chk = _Checker(lines, source)
    chk.mapping(raw, "", {"experiment"}, _TOP - {"experiment"})
    name = chk.choice(raw["experiment"], "experiment", EXPERIMENTS)
    system = _system(chk, raw["system"]) if raw.get("system") is not None else None
    circuit = _circuit(chk, raw["circuit"]) if raw.get("circuit") is not None else None
    if system is not None and circuit is not None:
        chk.fail("", "give either a system or a circuit block, not both")
    if circuit is not None and name != "custom":
        chk.fail("circuit", f"circuit configs are only used by the custom experiment, not {name!r}")
    if system is None and circuit is None:
        chk.fail("", "a system block (or, for custom runs, a circuit block) is required")

    sweep = None
    if raw.get("sweep") is not None:
        s = chk.mapping(raw["sweep"], "sweep", {"parameter", "start", "stop", "steps"})
        if not _sweep_param_ok(s["parameter"], system is not None):
            chk.fail("sweep.parameter", f"cannot sweep {s['parameter']!r}")
        sweep = Sweep(
            parameter=s["parameter"],
            start=chk.number(s["start"], "sweep.start"),
            stop=chk.number(s["stop"], "sweep.stop"),
            steps=chk.integer(s["steps"], "sweep.steps", minimum=2),
        )
        if system is not None and s["parameter"].startswith("tls."):
            if int(s["parameter"].split(".")[1]) >= system.n_tls:
                chk.fail("sweep.parameter", f"no TLS with index {s['parameter'].split('.')[1]}")
        if s["parameter"] == "kappa" and min(sweep.start, sweep.stop) < 0:
            chk.fail("sweep.start", "kappa must be non-negative")

    n_raw = raw.get("numerics") or {}
    chk.mapping(n_raw, "numerics", (), {f.name for f in dataclasses.fields(Numerics)})
    step = n_raw.get("step_ps")
    numerics = Numerics(
        fock_cutoff=chk.integer(n_raw.get("fock_cutoff", 10), "numerics.fock_cutoff", minimum=2),
        step_ps=None if step is None else chk.number(step, "numerics.step_ps", positive=True),
        frame=chk.choice(n_raw.get("frame", "transformed"), "numerics.frame", FRAMES),
        dressed_loss=chk.boolean(n_raw.get("dressed_loss", False), "numerics.dressed_loss"),
        cutoff_check=chk.boolean(n_raw.get("cutoff_check", False), "numerics.cutoff_check"),
        workers=chk.integer(n_raw.get("workers", 1), "numerics.workers", minimum=1),
    )

    options = dict(raw.get("options") or {})
    chk.mapping(options, "options", (), _OPTIONS[name])
    n_tls = system.n_tls if system is not None else 0
    if "gate" in options:
        chk.choice(options["gate"], "options.gate", GATES)
    for key in ("target", "dephasing_tls"):
        if key in options:
            chk.integer(options[key], f"options.{key}", minimum=0)
            if system is not None and options[key] >= n_tls:
                chk.fail(f"options.{key}", f"no TLS with index {options[key]}")
    if "pair" in options:
        pair = options["pair"]
        if (not isinstance(pair, list) or len(pair) != 2 or len(set(pair)) != 2
                or not all(isinstance(p, int) and 0 <= p < n_tls for p in pair)):
            chk.fail("options.pair", f"expected two distinct TLS indices below {n_tls}, got {pair!r}")
    for key in ("x_Delta_c", "hadamard_Delta_c", "phase_detuning"):
        if key in options:
            options[key] = chk.number(options[key], f"options.{key}")
    if "simulate" in options:
        chk.boolean(options["simulate"], "options.simulate")
    if name != "fig2-energies" and name != "custom" and system is not None:
        needed = 2 if name in ("fig2-beta", "swap-point", "cz-plan") else 1
        if n_tls < needed:
            chk.fail("system.tls", f"{name} needs at least {needed} TLSs")

    o_raw = raw.get("output") or {}
    chk.mapping(o_raw, "output", (), {"path", "format"})
    output = Output(
        path=o_raw.get("path"),
        format=chk.choice(o_raw.get("format", "csv"), "output.format", FORMATS),
    )
    return ExperimentSpec(name, system, circuit, sweep, numerics, options, output)


def load_config(path) -> ExperimentSpec:
    """Read and strictly validate a YAML experiment file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f", line {mark.line + 1} column {mark.column + 1}" if mark else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{path}{where}: YAML parse error: {problem}") from None
    if raw is None:
        raise ConfigError(f"{path}: empty config")
    return spec_from_dict(raw, _line_map(text), str(path))


def spec_to_dict(spec: ExperimentSpec) -> dict:
    out = {"experiment": spec.name}
    if spec.system is not None:
        s = spec.system
        out["system"] = {
            "tls": [{"Delta": t.Delta, "g": t.g} for t in s.tls],
            "Delta_c": s.Delta_c, "epsilon": s.epsilon, "kappa": s.kappa,
            "drive_bound": s.drive_bound,
        }
    if spec.circuit is not None:
        c = spec.circuit
        out["circuit"] = {"E_J": c.E_J, "C0": c.C0, "L": c.L, "Phi_ex": c.Phi_ex,
                          "delta_Ic": c.delta_Ic, "j_x": list(c.j_x)}
    if spec.sweep is not None:
        out["sweep"] = dataclasses.asdict(spec.sweep)
    out["numerics"] = dataclasses.asdict(spec.numerics)
    out["options"] = dict(spec.options)
    out["output"] = dataclasses.asdict(spec.output)
    return out


def save_config(spec: ExperimentSpec, path):
    Path(path).write_text(yaml.safe_dump(spec_to_dict(spec), sort_keys=False), encoding="utf-8")


# ------------------------------------------------------------------- presets

TABLE1_TLS = ({"Delta": 40.0, "g": 40.0},)
PAIR_TLS = ({"Delta": 0.0, "g": 40.0}, {"Delta": -60.0, "g": 30.0})
FIG3_HADAMARD_TLS = ({"Delta": 40.0, "g": 40.0}, {"Delta": -80.0, "g": 30.0})


def _preset_system(tls, Delta_c, epsilon=0.0, kappa=0.0):
    return {"tls": [dict(t) for t in tls], "Delta_c": Delta_c, "epsilon": epsilon, "kappa": kappa}


PRESETS = {
    "table1": {"experiment": "table1", "system": _preset_system(TABLE1_TLS, 120.0),
               "options": {"x_Delta_c": 120.0, "hadamard_Delta_c": 160.0}},
    "fig2-gatetimes": {"experiment": "fig2-gatetimes", "system": _preset_system(TABLE1_TLS, 120.0),
                       "sweep": {"parameter": "Delta_c", "start": 80.0, "stop": 400.0, "steps": 33}},
    "fig2-beta": {"experiment": "fig2-beta", "system": _preset_system(PAIR_TLS, 300.0),
                  "sweep": {"parameter": "Delta_c", "start": 80.0, "stop": 400.0, "steps": 33}},
    "fig2-energies": {"experiment": "fig2-energies", "system": _preset_system(PAIR_TLS, 300.0),
                      "sweep": {"parameter": "epsilon", "start": 0.0, "stop": 400.0, "steps": 401}},
    "swap-point": {"experiment": "swap-point", "system": _preset_system(PAIR_TLS, 300.0, kappa=4.0)},
    "fig3-sweep": {"experiment": "fig3-sweep",
                   "system": _preset_system(FIG3_HADAMARD_TLS, 160.0),
                   "sweep": {"parameter": "kappa", "start": 0.0, "stop": 10.0, "steps": 11},
                   "options": {"gate": "hadamard"}},
    "fig3-sweep-swap": {"experiment": "fig3-sweep", "system": _preset_system(PAIR_TLS, 300.0),
                        "sweep": {"parameter": "kappa", "start": 0.0, "stop": 10.0, "steps": 11},
                        "options": {"gate": "swap"}},
    "cz-plan": {"experiment": "cz-plan", "system": _preset_system(PAIR_TLS, 300.0, kappa=4.0),
                "options": {"phase_detuning": 120.0}},
    "custom": {"experiment": "custom", "system": _preset_system(TABLE1_TLS, 120.0),
               "options": {"gate": "x"}},
}


def preset(name) -> ExperimentSpec:
    if name not in PRESETS:
        raise ConfigError(f"no preset named {name!r}")
    return spec_from_dict(json.loads(json.dumps(PRESETS[name])), source=f"preset {name}")


# ------------------------------------------------------------------ helpers

def _fmt(x):
    return format(float(x), ".17g")


def param_string(cfg: SystemConfig, numerics: Numerics = None, **extra) -> str:
    """``key=value`` pairs joined by ``;``; ``extra`` entries override or extend them."""
    tls = ",".join(f"({_fmt(t.Delta)}:{_fmt(t.g)})" for t in cfg.tls)
    parts = {"tls": f"[{tls}]", "Delta_c": _fmt(cfg.Delta_c), "epsilon": _fmt(cfg.epsilon),
             "kappa": _fmt(cfg.kappa)}
    if numerics is not None:
        parts.update(
            fock_cutoff=str(numerics.fock_cutoff),
            step_ps="auto" if numerics.step_ps is None else _fmt(numerics.step_ps),
            frame=numerics.frame,
            dressed_loss=str(int(numerics.dressed_loss)),
        )
    parts.update({k: _fmt(v) if isinstance(v, float) else str(v) for k, v in extra.items()})
    return ";".join(f"{k}={v}" for k, v in parts.items())


def circuit_param_string(p: circ.CircuitParams) -> str:
    j = ",".join(_fmt(x) for x in p.j_x)
    return ";".join([f"E_J={_fmt(p.E_J)}", f"C0={_fmt(p.C0)}", f"L={_fmt(p.L)}",
                     f"Phi_ex={_fmt(p.Phi_ex)}", f"delta_Ic={_fmt(p.delta_Ic)}", f"j_x=[{j}]"])


def apply_parameter(config, name, value):
    """Copy of a system or circuit config with one named parameter replaced."""
    if isinstance(config, circ.CircuitParams):
        return dataclasses.replace(config, **{name: float(value)})
    if name.startswith("tls."):
        _, idx, attr = name.split(".")
        tls = list(config.tls)
        tls[int(idx)] = dataclasses.replace(tls[int(idx)], **{attr: float(value)})
        return config.replace(tls=tuple(tls))
    return config.replace(**{name: float(value)})


def _pair(spec):
    return tuple(spec.options.get("pair", (0, 1)))


def _plan(cfg, gate, spec):
    target = spec.options.get("target", 0)
    if gate == "x":
        return cal.calibrate_x(cfg, target)
    if gate == "hadamard":
        return cal.calibrate_hadamard(cfg, target)
    if gate == "swap":
        return cal.calibrate_two_qubit(cfg, _pair(spec))
    if gate == "cz":
        return cal.cirac_zoller_plan(cfg, _pair(spec), spec.options.get("phase_detuning", 120.0))
    raise ConfigError(f"gate {gate!r} has no calibration")


def _step_ns(numerics):
    return None if numerics.step_ps is None else numerics.step_ps * 1e-3


def _fidelity(plan, cfg, numerics, fock_cutoff=None):
    res = simulate_gate_channel(
        plan, cfg, frame=numerics.frame, step=_step_ns(numerics),
        fock_cutoff=fock_cutoff or numerics.fock_cutoff, dressed_loss=numerics.dressed_loss,
    )
    rep = compensate_local_phases(res.channel, plan.target_unitary, plan.compensate, plan.theta)
    return rep, res


def simulate_fidelity_rows(plan, cfg, numerics, param):
    """Rows for one simulated gate: fidelities, compensation and diagnostics."""
    rep, res = _fidelity(plan, cfg, numerics)
    rows = [
        Row(param, "raw_fidelity", rep.raw_fidelity, "1"),
        Row(param, "compensated_fidelity", rep.compensated_fidelity, "1"),
    ]
    for q, phi in zip(rep.qubits, rep.compensation):
        rows.append(Row(param, f"compensation_tls{q}", phi, "rad"))
    steps = [t.step * 1e3 for t in res.traces]
    rows.append(Row(param, "step", min(steps) if steps else 0.0, "ps"))
    rows.append(Row(param, "fock_cutoff", res.fock_cutoff, "1"))
    rows.append(Row(param, "max_trace_deviation",
                    max((float(np.max(t.trace_deviation)) for t in res.traces), default=0.0), "1"))
    rows.append(Row(param, "min_eigenvalue",
                    min((float(np.min(t.min_eigenvalue)) for t in res.traces), default=1.0), "1"))
    if numerics.cutoff_check:
        rep2, _ = _fidelity(plan, cfg, numerics, res.fock_cutoff + CUTOFF_EXTRA)
        delta = abs(rep2.compensated_fidelity - rep.compensated_fidelity)
        rows.append(Row(param, "cutoff_fidelity_change", delta, "1"))
        rows.append(Row(param, "cutoff_limited", int(delta >= CUTOFF_TOL), "flag"))
    return rows


# -------------------------------------------------------------- experiments

def _table1(spec):
    rows = []
    opts = spec.options
    target = opts.get("target", 0)
    for gate, dc in (("X", opts.get("x_Delta_c", 120.0)),
                     ("Hadamard", opts.get("hadamard_Delta_c", 160.0))):
        cfg = spec.system.replace(Delta_c=dc)
        plan = cal.calibrate_x(cfg, target) if gate == "X" else cal.calibrate_hadamard(cfg, target)
        seg = plan.segments[0]
        param = param_string(cfg.replace(epsilon=seg.epsilon), gate=gate, target=target)
        rows += [
            Row(param, "epsilon", seg.epsilon, "MHz"),
            Row(param, "Omega_x", plan.diagnostics["Omega_x"], "MHz"),
            Row(param, "Delta_tilde", plan.diagnostics["Delta_tilde"], "MHz"),
            Row(param, "tau_g", seg.duration, "ns"),
        ]
    return rows


def _gatetime_point(cfg, target):
    rows = []
    for gate, fn in (("X", cal.calibrate_x), ("Hadamard", cal.calibrate_hadamard)):
        param = param_string(cfg, gate=gate, target=target)
        try:
            plan = fn(cfg, target)
        except cal.CalibrationError as exc:
            log.info("%s at Delta_c=%g: %s", gate, cfg.Delta_c, exc)
            rows += [Row(param, "tau_g", math.nan, "ns"), Row(param, "epsilon", math.nan, "MHz"),
                     Row(param, "calibration_failed", 1, "flag")]
            continue
        rows += [Row(param, "tau_g", plan.duration, "ns"),
                 Row(param, "epsilon", plan.segments[0].epsilon, "MHz"),
                 Row(param, "calibration_failed", 0, "flag")]
    return rows


def _beta_point(cfg, pair):
    param = param_string(cfg, pair=f"{pair[0]}-{pair[1]}", epsilon="resonance")
    names = [("epsilon", "MHz"), ("E_1", "MHz"), ("E_2", "MHz"), ("beta_1", "MHz"),
             ("beta_2", "MHz"), ("beta_2_prime", "MHz"), ("tau_g", "ns")]
    try:
        plan = cal.calibrate_two_qubit(cfg, pair)
    except (cal.CalibrationError, dsp.DispersiveError) as exc:
        log.info("no SWAP point at Delta_c=%g: %s", cfg.Delta_c, exc)
        return [Row(param, n, math.nan, u) for n, u in names] + [
            Row(param, "calibration_failed", 1, "flag")]
    d = plan.diagnostics
    vals = [d["epsilon"], d["E"][pair[0]], d["E"][pair[1]], d["beta_1"], d["beta_2"],
            d["beta_2_prime"], plan.duration]
    return [Row(param, n, v, u) for (n, u), v in zip(names, vals)] + [
        Row(param, "calibration_failed", 0, "flag"),
        Row(param, "real_transition_risk", int("real_transition_risk" in plan.flags), "flag"),
        Row(param, "multiple_roots", int("multiple_roots" in plan.flags), "flag"),
    ]


def _energies_point(cfg, pair):
    param = param_string(cfg)
    return [Row(param, f"E_{k + 1}", dsp.dressed_energy(cfg, n)[0], "MHz")
            for k, n in enumerate(pair)]


def _swap_point(spec):
    cfg, pair = spec.system, _pair(spec)
    plan = cal.calibrate_two_qubit(cfg, pair)
    d = plan.diagnostics
    tuned = cfg.replace(epsilon=d["epsilon"])
    param = param_string(tuned, pair=f"{pair[0]}-{pair[1]}")
    est = cal.decoherence_estimate(plan, cfg)
    k = spec.options.get("dephasing_tls", pair[0])
    rows = [
        Row(param, "epsilon", d["epsilon"], "MHz"),
        Row(param, "E_1", d["E"][pair[0]], "MHz"),
        Row(param, "E_2", d["E"][pair[1]], "MHz"),
        Row(param, "theta_1", plan.theta[pair[0]], "rad"),
        Row(param, "theta_2", plan.theta[pair[1]], "rad"),
        Row(param, "lambda", d["lambda"], "MHz"),
        Row(param, "f_1", d["f"][pair[0]], "MHz"),
        Row(param, "f_2", d["f"][pair[1]], "MHz"),
        Row(param, "beta_1", d["beta_1"], "MHz"),
        Row(param, "beta_2", d["beta_2"], "MHz"),
        Row(param, "beta_2_prime", d["beta_2_prime"], "MHz"),
        Row(param, "tau_g", plan.duration, "ns"),
        Row(param, "tau_d_inverse", est.tau_d_inverse, "1/us"),
        Row(param, "tau_g_over_tau_d", est.ratio, "1"),
        Row(param, "fidelity_estimate", est.fidelity_estimate, "1"),
        Row(param, f"residual_dephasing_tls{k}", cal.residual_dephasing_rate(tuned, k) * 1e3, "kHz"),
        Row(param, "real_transition_risk", int("real_transition_risk" in plan.flags), "flag"),
        Row(param, "multiple_roots", int("multiple_roots" in plan.flags), "flag"),
    ]
    return rows


def _fig3_point(cfg, spec, plan):
    param = param_string(cfg.replace(epsilon=plan.segments[0].epsilon), spec.numerics,
                         gate=spec.options.get("gate", "hadamard"))
    return simulate_fidelity_rows(plan, cfg, spec.numerics, param)


def _cz_plan(spec):
    cfg, pair = spec.system, _pair(spec)
    plan = cal.cirac_zoller_plan(cfg, pair, spec.options.get("phase_detuning", 120.0))
    est = cal.decoherence_estimate(plan, cfg)
    rows = []
    labels = ("swap_in", "phase", "swap_out")
    for label, seg, (tau, rate, ratio) in zip(labels, plan.segments, est.segments):
        param = param_string(seg.apply(cfg), pair=f"{pair[0]}-{pair[1]}", segment=label,
                             phase_detuning=plan.diagnostics["Delta_2c"])
        rows += [Row(param, "duration", tau, "ns"), Row(param, "decay_rate", rate, "1/us"),
                 Row(param, "tau_g_over_tau_d", ratio, "1")]
    param = param_string(cfg, pair=f"{pair[0]}-{pair[1]}", segment="total",
                         phase_detuning=plan.diagnostics["Delta_2c"])
    rows += [Row(param, "tau_g", plan.duration, "ns"),
             Row(param, "tau_g_over_tau_d", est.ratio, "1"),
             Row(param, "fidelity_estimate", est.fidelity_estimate, "1"),
             Row(param, "phase_segment_marginal", int("phase_segment_marginal" in plan.flags), "flag")]
    return rows


def _custom_system_point(cfg, spec):
    gate = spec.options.get("gate", "none")
    if gate == "none":
        p = dsp.effective_params(cfg)
        param = param_string(cfg)
        rows = []
        for n in range(cfg.n_tls):
            rows += [Row(param, f"Delta_tilde_{n}", p.Delta_tilde[n], "MHz"),
                     Row(param, f"Omega_x_{n}", p.Omega_x[n], "MHz"),
                     Row(param, f"E_{n}", p.E[n], "MHz"),
                     Row(param, f"theta_{n}", p.theta[n], "rad"),
                     Row(param, f"f_{n}", p.f[n], "MHz")]
        return rows
    plan = _plan(cfg, gate, spec)
    eps = plan.segments[0].epsilon
    param = param_string(cfg.replace(epsilon=eps), spec.numerics if spec.options.get("simulate") else None,
                         gate=gate)
    est = cal.decoherence_estimate(plan, cfg)
    rows = [Row(param, "epsilon", eps, "MHz"), Row(param, "tau_g", plan.duration, "ns"),
            Row(param, "tau_g_over_tau_d", est.ratio, "1"),
            Row(param, "fidelity_estimate", est.fidelity_estimate, "1")]
    if spec.options.get("simulate", False):
        rows += simulate_fidelity_rows(plan, cfg, spec.numerics, param)
    return rows


def _custom_circuit_point(p):
    param = circuit_param_string(p)
    phi_s = circ.solve_phase_shift(p)
    wc = circ.resonator_frequency(p, phi_s)
    eps, ok = circ.drive_amplitude_and_bound(p, wc)
    mhz = 1.0 / (2 * math.pi * 1e6)
    rows = [
        Row(param, "Phi_s", phi_s, "Wb"),
        Row(param, "phase_shift_residual", circ.phase_shift_residual(p, phi_s), "Wb"),
        Row(param, "omega_c", wc * mhz, "MHz"),
        Row(param, "epsilon", eps * mhz, "MHz"),
        Row(param, "drive_within_bound", int(ok), "flag"),
        Row(param, "epsilon_max", circ.max_drive_amplitude(p, wc) * mhz, "MHz"),
    ]
    for n in range(len(p.j_x)):
        rows.append(Row(param, f"g_{n}", circ.coupling_constant(p, wc, phi_s, n) * mhz, "MHz"))
    return rows


def _point(name, config, spec):
    """Rows for one sweep point; module level so worker processes can run it."""
    if name == "fig2-gatetimes":
        return _gatetime_point(config, spec.options.get("target", 0))
    if name == "fig2-beta":
        return _beta_point(config, _pair(spec))
    if name == "fig2-energies":
        return _energies_point(config, _pair(spec))
    if name == "custom":
        if isinstance(config, circ.CircuitParams):
            return _custom_circuit_point(config)
        return _custom_system_point(config, spec)
    raise ValueError(name)


def _fig3_task(args):
    cfg, spec, plan = args
    return _fig3_point(cfg, spec, plan)


def _point_task(args):
    return _point(*args)


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _sweep_configs(spec):
    base = spec.circuit if spec.circuit is not None else spec.system
    if spec.sweep is None:
        return [base]
    return [apply_parameter(base, spec.sweep.parameter, v) for v in spec.sweep.values()]


def _fig3(spec):
    gate = spec.options.get("gate", "hadamard")
    if gate == "none":
        raise ConfigError("fig3-sweep needs a gate")
    configs = _sweep_configs(spec)
    # Calibration ignores kappa, so a kappa sweep shares one plan.
    plans = [_plan(c, gate, spec) for c in configs]
    per_point = _map(_fig3_task, [(c, spec, p) for c, p in zip(configs, plans)],
                     spec.numerics.workers)
    rows = [r for chunk in per_point for r in chunk]
    if spec.sweep is not None and spec.sweep.parameter == "kappa":
        fids = [next(r.value for r in chunk if r.quantity == "compensated_fidelity")
                for chunk in per_point]
        kappas = list(spec.sweep.values())
        order = np.argsort(kappas)
        bad = sum(1 for a, b in zip(order, order[1:]) if fids[b] > fids[a] + 1e-12)
        param = param_string(spec.system.replace(epsilon=plans[0].segments[0].epsilon),
                             spec.numerics, gate=gate,
                             kappa=f"{_fmt(min(kappas))}..{_fmt(max(kappas))}")
        rows.append(Row(param, "monotonic_violations", bad, "count"))
    return rows


def _energies(spec):
    configs = _sweep_configs(spec)
    rows = [r for chunk in _map(_point_task, [("fig2-energies", c, spec) for c in configs],
                                spec.numerics.workers) for r in chunk]
    pair = _pair(spec)
    lo = min(spec.sweep.start, spec.sweep.stop) if spec.sweep else 0.0
    hi = max(spec.sweep.start, spec.sweep.stop) if spec.sweep else spec.system.drive_bound
    if spec.sweep is None or spec.sweep.parameter == "epsilon":
        cfg = spec.system.replace(drive_bound=max(hi, 1e-9))
        roots = [r for r in cal.find_resonant_drives(cfg, pair) if lo <= r <= hi]
        param = param_string(spec.system, pair=f"{pair[0]}-{pair[1]}",
                             epsilon=f"{_fmt(lo)}..{_fmt(hi)}")
        for k, r in enumerate(roots):
            rows.append(Row(param, f"crossing_{k}", r, "MHz"))
    return rows


def _generic_sweep(spec):
    configs = _sweep_configs(spec)
    items = [(spec.name, c, spec) for c in configs]
    return [r for chunk in _map(_point_task, items, spec.numerics.workers) for r in chunk]


def package_version() -> str:
    """Installed version plus the source commit when run from a git checkout."""
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "0+unknown"
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
        if rev:
            version += f"+g{rev}"
    except (OSError, subprocess.SubprocessError):
        pass
    return version


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run an experiment and return its rows with a provenance block."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if spec.name == "table1":
            rows = _table1(spec)
        elif spec.name == "swap-point":
            rows = _swap_point(spec)
        elif spec.name == "cz-plan":
            rows = _cz_plan(spec)
        elif spec.name == "fig3-sweep":
            rows = _fig3(spec)
        elif spec.name == "fig2-energies":
            rows = _energies(spec)
        else:
            rows = _generic_sweep(spec)
    msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    for m in msgs:
        log.warning("%s", m)
    steps = sorted({r.value for r in rows if r.quantity == "step"})
    cutoffs = sorted({r.value for r in rows if r.quantity == "fock_cutoff"})
    provenance = {
        "package": "artifact",
        "version": package_version(),
        "config": spec_to_dict(spec),
        "step_ps": steps or ("auto" if spec.numerics.step_ps is None else spec.numerics.step_ps),
        "fock_cutoff": cutoffs or spec.numerics.fock_cutoff,
        "warnings": msgs,
        "columns": {"param": "row inputs", "quantity": "name", "value": "number", "unit": "unit"},
    }
    return ExperimentResult(spec, rows, provenance)


# -------------------------------------------------------------------- output

def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _fmt(v)


def to_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "quantity", "value", "unit"])
    for r in result.rows:
        w.writerow([r.param, r.quantity, _cell(r.value), r.unit])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, (bool, np.bool_, int, np.integer)):
        return int(v)
    v = float(v)
    return v if math.isfinite(v) else None


def to_json(result: ExperimentResult) -> str:
    obj = {
        "spec": spec_to_dict(result.spec),
        "provenance": result.provenance,
        "rows": [{"param": r.param, "quantity": r.quantity, "value": _json_value(r.value),
                  "unit": r.unit} for r in result.rows],
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_result(result: ExperimentResult, path=None, fmt="csv"):
    """Write the table (and, for CSV files, a ``.provenance.json`` sidecar).

    Returns the text when ``path`` is None.
    """
    text = to_csv(result) if fmt == "csv" else to_json(result)
    if path is None:
        return text
    path = Path(path)
    path.write_text(text, encoding="utf-8", newline="\n")
    if fmt == "csv":
        side = path.with_name(path.name + ".provenance.json")
        side.write_text(json.dumps(result.provenance, indent=2, sort_keys=True) + "\n",
                        encoding="utf-8", newline="\n")
    return text
