"""Run configuration: a sectioned key=value text format.

Sections are [problem], [grid], [scheme], [howard], [output]; values are
numbers, quoted strings, booleans or comma lists; '#' starts a comment.
Keys seed and threads may sit before the first section or in [output].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod
from .backward import OperatorConfig
from .baselines import HowardConfig, default_howard_config
from .errors import ConfigError, StepMismatch
from .problem import (BUILTIN_PROBLEMS, CoefficientField, HamiltonianSpec,
                      ProblemSpec, TerminalDatum, make_problem)

_SECTIONS = ("problem", "grid", "scheme", "howard", "output")

_KNOWN_KEYS = {
    "": {"seed", "threads"},
    "problem": {"name", "sigma", "b", "hamiltonian", "dual", "terminal",
                "t", "k", "a", "k_h", "terminal_lip", "bound"},
    "grid": {"x_min", "x_max", "h"},
    "scheme": {"delta", "delta_list", "quadrature_order", "refine",
               "radius_safety"},
    "howard": {"q_max", "q_points", "value_tol", "max_policy_iters"},
    "output": {"dir", "formats", "seed", "threads", "probe_t", "probe_x"},
}


@dataclass
class RunConfig:
    problem_name: str = ""
    expressions: dict = field(default_factory=dict)
    T: float = 1.0
    K: float = 5.0
    a: float = 1.0
    k_h_table: list | None = None
    terminal_lip: float = 1.0
    bound: float = 10.0
    x_min: float = -15.0
    x_max: float = 25.0
    h: float = 0.01
    deltas: list = field(default_factory=lambda: [0.1])
    quadrature_order: int = 16
    refine: bool = True
    radius_safety: float = 2.0
    q_max: float | None = None
    q_points: int = 201
    value_tol: float = 1e-10
    max_policy_iters: int = 50
    out_dir: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "svg"])
    seed: int = 0
    threads: int = 1
    probe_t: float = 0.0
    probe_x: float | None = None

    def probe(self) -> tuple[float, float]:
        x = self.probe_x if self.probe_x is not None \
            else 0.5 * (self.x_min + self.x_max)
        return (self.probe_t, x)

    def grid(self) -> np.ndarray:
        from .expectation import uniform_grid
        return uniform_grid(self.x_min, self.x_max, self.h)

    def operator_config(self, delta=None) -> OperatorConfig:
        return OperatorConfig(delta=float(delta or self.deltas[0]),
                              quadrature_order=self.quadrature_order,
                              refine=self.refine,
                              radius_safety=self.radius_safety)

    def howard_config(self, prob: ProblemSpec) -> HowardConfig:
        kwargs = dict(max_policy_iters=self.max_policy_iters,
                      value_tol=self.value_tol)
        if self.q_max is not None:
            q_points = self.q_points + (self.q_points % 2 == 0)
            return HowardConfig(q_grid=np.linspace(-self.q_max, self.q_max,
                                                   q_points), **kwargs)
        return default_howard_config(prob, self.radius_safety, self.q_points,
                                     **kwargs)


def _split_top_level(raw: str) -> list[str]:
    """Split on commas that sit outside double quotes."""
    parts, cur, quoted = [], [], False
    for ch in raw:
        if ch == '"':
            quoted = not quoted
            cur.append(ch)
        elif ch == "," and not quoted:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def _parse_value(raw: str, section: str, key: str):
    raw = raw.strip()
    if not raw:
        raise ConfigError(f"[{section}] {key}: empty value")
    parts = _split_top_level(raw)
    if len(parts) > 1:
        return [_parse_value(part, section, key) for part in parts]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse value {raw!r}; "
                          f"quote strings") from None


def _read_sections(path) -> dict:
    sections: dict = {"": {}}
    current = ""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if text.startswith("[") and text.endswith("]"):
            current = text[1:-1].strip().lower()
            if current not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section "
                                  f"[{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in text:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = text.split("=", 1)
        key = key.strip().lower()
        if key not in _KNOWN_KEYS.get(current, set()):
            where = f"[{current}]" if current else "top level"
            raise ConfigError(f"line {lineno}: unknown key {key!r} in {where}")
        sections[current][key] = _parse_value(raw, current or "top", key)
    return sections


def _as_float(sections, section, key, default):
    val = sections.get(section, {}).get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"[{section}] {key}: expected a number")
    return float(val)


def _as_int(sections, section, key, default):
    val = _as_float(sections, section, key, default)
    if val != int(val):
        raise ConfigError(f"[{section}] {key}: expected an integer")
    return int(val)


def parse_config(path) -> RunConfig:
    """Parse and validate a config file; raises ConfigError naming the
    offending section/key and StepMismatch for a bad delta."""
    sections = _read_sections(path)
    cfg = RunConfig()
    prob = sections.get("problem", {})
    name = prob.get("name", "")
    if name and not isinstance(name, str):
        raise ConfigError("[problem] name: expected a quoted string")
    cfg.problem_name = name
    for key in ("sigma", "b", "hamiltonian", "dual", "terminal"):
        if key in prob:
            if not isinstance(prob[key], str):
                raise ConfigError(f"[problem] {key}: expected a quoted "
                                  f"expression string")
            cfg.expressions[key] = prob[key]
    cfg.T = _as_float(sections, "problem", "t", cfg.T)
    cfg.K = _as_float(sections, "problem", "k", cfg.K)
    cfg.a = _as_float(sections, "problem", "a", cfg.a)
    cfg.terminal_lip = _as_float(sections, "problem", "terminal_lip",
                                 cfg.terminal_lip)
    cfg.bound = _as_float(sections, "problem", "bound", cfg.bound)
    if "k_h" in prob:
        table = prob["k_h"]
        if not isinstance(table, list) or len(table) % 2 or len(table) < 4 \
                or not all(isinstance(v, float) for v in table):
            raise ConfigError("[problem] k_h: expected a flat comma list of "
                              ">= 2 (y, radius) pairs")
        cfg.k_h_table = table
    if not name and not cfg.expressions:
        raise ConfigError("[problem] name: need a builtin name or "
                          "expression keys")
    if cfg.T <= 0:
        raise ConfigError("[problem] t: horizon must be positive")

    cfg.x_min = _as_float(sections, "grid", "x_min", cfg.x_min)
    cfg.x_max = _as_float(sections, "grid", "x_max", cfg.x_max)
    cfg.h = _as_float(sections, "grid", "h", cfg.h)
    if not cfg.x_min < cfg.x_max:
        raise ConfigError("[grid] x_min: must be below x_max")
    if cfg.h <= 0:
        raise ConfigError("[grid] h: must be positive")

    sch = sections.get("scheme", {})
    if "delta_list" in sch:
        raw = sch["delta_list"]
        cfg.deltas = [float(v) for v in (raw if isinstance(raw, list)
                                         else [raw])]
    elif "delta" in sch:
        cfg.deltas = [float(sch["delta"])]
    for d in cfg.deltas:
        if d <= 0:
            raise ConfigError("[scheme] delta: must be positive")
        ratio = cfg.T / d
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise StepMismatch(f"[scheme] delta={d:g} does not divide "
                               f"T={cfg.T:g}")
    cfg.quadrature_order = _as_int(sections, "scheme", "quadrature_order",
                                   cfg.quadrature_order)
    refine = sch.get("refine", cfg.refine)
    if not isinstance(refine, bool):
        raise ConfigError("[scheme] refine: expected true or false")
    cfg.refine = refine
    cfg.radius_safety = _as_float(sections, "scheme", "radius_safety",
                                  cfg.radius_safety)
    if cfg.radius_safety < 1:
        raise ConfigError("[scheme] radius_safety: must be >= 1")

    how = sections.get("howard", {})
    if "q_max" in how:
        cfg.q_max = _as_float(sections, "howard", "q_max", None)
        if cfg.q_max <= 0:
            raise ConfigError("[howard] q_max: must be positive")
    cfg.q_points = _as_int(sections, "howard", "q_points", cfg.q_points)
    cfg.value_tol = _as_float(sections, "howard", "value_tol", cfg.value_tol)
    cfg.max_policy_iters = _as_int(sections, "howard", "max_policy_iters",
                                   cfg.max_policy_iters)
    if cfg.max_policy_iters < 1:
        raise ConfigError("[howard] max_policy_iters: must be >= 1")

    out = sections.get("output", {})
    if "dir" in out:
        if not isinstance(out["dir"], str):
            raise ConfigError("[output] dir: expected a quoted string")
        cfg.out_dir = out["dir"]
    if "formats" in out:
        fmts = out["formats"] if isinstance(out["formats"], list) \
            else [out["formats"]]
        fmts = [f if isinstance(f, str) else None for f in fmts]
        if any(f not in ("csv", "svg") for f in fmts):
            raise ConfigError("[output] formats: entries must be csv or svg")
        cfg.formats = fmts
    top = sections.get("", {})
    for key in ("seed", "threads"):
        src = out if key in out else top
        if key in src:
            val = src[key]
            if isinstance(val, bool) or not isinstance(val, float) \
                    or val != int(val):
                raise ConfigError(f"[output] {key}: expected an integer")
            setattr(cfg, key, int(val))
    if cfg.threads < 1:
        raise ConfigError("[output] threads: must be >= 1")
    cfg.probe_t = _as_float(sections, "output", "probe_t", cfg.probe_t)
    if "probe_x" in out:
        cfg.probe_x = _as_float(sections, "output", "probe_x", None)
    if not (0.0 <= cfg.probe_t <= cfg.T):
        raise ConfigError("[output] probe_t: outside [0, T]")
    return cfg


def _table_radius(table: list):
    ys = np.asarray(table[0::2], dtype=float)
    rs = np.asarray(table[1::2], dtype=float)
    if np.any(np.diff(ys) <= 0) or np.any(np.diff(rs) < 0):
        raise ConfigError("[problem] k_h: y values must increase and radii "
                          "must be nondecreasing")
    slope = (rs[-1] - rs[-2]) / (ys[-1] - ys[-2]) if ys.size >= 2 else 1.0

    def k_h(y: float) -> float:
        if y >= ys[-1]:
            return float(rs[-1] + max(slope, 1.0) * (y - ys[-1]))
        return float(np.interp(y, ys, rs))

    return k_h


def build_problem(cfg: RunConfig) -> ProblemSpec:
    """Construct the problem from a builtin name or expression strings."""
    domain = (cfg.x_min, cfg.x_max)
    if cfg.problem_name:
        if cfg.problem_name not in BUILTIN_PROBLEMS:
            raise ConfigError(f"[problem] name: unknown builtin "
                              f"{cfg.problem_name!r}; choose from "
                              f"{sorted(BUILTIN_PROBLEMS)}")
        builder = BUILTIN_PROBLEMS[cfg.problem_name]
        kwargs = {"K": cfg.K, "T": cfg.T, "x_domain": domain}
        if cfg.problem_name == "quadratic-drift":
            kwargs["a"] = cfg.a
        return builder(**kwargs)

    required = ("sigma", "b", "hamiltonian", "terminal")
    missing = [k for k in required if k not in cfg.expressions]
    if missing:
        raise ConfigError(f"[problem] {missing[0]}: required for an "
                          f"expression-defined problem")
    allowed = {"sigma": {"t", "x"}, "b": {"t", "x"},
               "hamiltonian": {"t", "x", "p"}, "dual": {"t", "x", "q"},
               "terminal": {"x"}}
    asts = {}
    for key, src in cfg.expressions.items():
        ast = expr_mod.parse_expression(src)
        extra = expr_mod.free_variables(ast) - allowed[key]
        if extra:
            raise ConfigError(f"[problem] {key}: variable "
                              f"{sorted(extra)[0]!r} not allowed here")
        asts[key] = ast

    sigma = expr_mod.compile_expression(asts["sigma"], ("t", "x"))
    drift = expr_mod.compile_expression(asts["b"], ("t", "x"))
    ham_fn = expr_mod.compile_expression(asts["hamiltonian"], ("t", "x", "p"))
    term_ast = asts["terminal"]
    terminal = TerminalDatum(
        eval=expr_mod.compile_expression(term_ast, ("x",)),
        lip_const=cfg.terminal_lip)
    if cfg.k_h_table is None:
        raise ConfigError("[problem] k_h: required for an expression "
                          "Hamiltonian (coercivity cannot be inferred)")
    analytic_dual = None
    if "dual" in asts:
        analytic_dual = expr_mod.compile_expression(asts["dual"],
                                                    ("t", "x", "q"))
    tx_dep = bool(expr_mod.free_variables(asts["hamiltonian"]) & {"t", "x"})
    ham = HamiltonianSpec(eval=ham_fn,
                          coercivity_radius=_table_radius(cfg.k_h_table),
                          analytic_dual=analytic_dual,
                          tx_dependent=tx_dep)
    coeffs = CoefficientField(
        sigma=lambda t, x: np.broadcast_to(
            np.asarray(sigma(t, np.asarray(x, dtype=float)), dtype=float),
            np.asarray(x, dtype=float).shape).copy(),
        b=lambda t, x: np.broadcast_to(
            np.asarray(drift(t, np.asarray(x, dtype=float)), dtype=float),
            np.asarray(x, dtype=float).shape).copy())
    return make_problem(coeffs, ham, terminal, cfg.T, domain, cfg.bound,
                        name="custom")
