"""Declarative experiment runner: strict JSON configs in, CSV + JSON
artifacts out, byte-identical for identical config and seed.

Each experiment writes its bulk data as CSV (17 significant digits) and a
`summary.json` carrying the fully resolved config, derived quantities, and
pass/fail for the invariants it exercises.  Sweep points are independent and
may be evaluated by a thread pool; results are gathered by index so output
never depends on completion order.
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import coarse_grain as cg
from . import dynamics as dy
from . import phase_space as ps
from . import spin_core as sc


class ConfigError(Exception):
    """Invalid experiment configuration (CLI exit code 1)."""


class InvariantViolation(Exception):
    """A declared numerical invariant failed (CLI exit code 2)."""


EXPERIMENT_KINDS = ("qmap", "slots", "catdecay", "invasiveness", "trajectory", "lg", "pround")

_STATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {
            "enum": [
                "coherent",
                "cat",
                "maximally_mixed",
                "random_pure",
                "random_mixed",
                "superposition",
            ]
        },
        "theta": {"type": "number", "minimum": 0, "maximum": math.pi},
        "phi": {"type": "number"},
        "theta2": {"type": "number", "minimum": 0, "maximum": math.pi},
        "phi2": {"type": "number"},
    },
}

_DELTA_M_SCHEMA = {
    "oneOf": [
        {"type": "integer", "minimum": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        {"type": "string"},
    ]
}

SCHEMAS = {
    "qmap": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "state"],
        "properties": {
            "j": {"type": "number", "minimum": 0},
            "state": _STATE_SCHEMA,
            "grid_l_max": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0},
            "out_dir": {"type": "string"},
        },
    },
    "slots": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "delta_m", "theta"],
        "properties": {
            "j": {"type": "number", "exclusiveMinimum": 0},
            "delta_m": _DELTA_M_SCHEMA,
            "theta": {"type": "number", "minimum": 0, "maximum": math.pi},
            "phi": {"type": "number"},
            "grid_l_max": {"type": "integer", "minimum": 0},
            "out_dir": {"type": "string"},
        },
    },
    "catdecay": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j_max"],
        "properties": {
            "j_min": {"type": "integer", "minimum": 1},
            "j_max": {"type": "integer", "minimum": 1},
            "out_dir": {"type": "string"},
        },
    },
    "invasiveness": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "delta_m", "state"],
        "properties": {
            "j": {"type": "number", "exclusiveMinimum": 0},
            "delta_m": _DELTA_M_SCHEMA,
            "state": _STATE_SCHEMA,
            "metric": {"enum": ["L1", "sup"]},
            "grid_l_max": {"type": "integer", "minimum": 0},
            "seed": {"type": "integer", "minimum": 0},
            "out_dir": {"type": "string"},
        },
    },
    "trajectory": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "mode", "omega", "axis", "n_steps", "dt", "theta0"],
        "properties": {
            "j": {"type": "number", "exclusiveMinimum": 0},
            "mode": {"enum": ["unitary", "nonselective", "selective"]},
            "omega": {"type": "number"},
            "axis": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 3,
                "maxItems": 3,
            },
            "n_steps": {"type": "integer", "minimum": 1},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "theta0": {"type": "number", "minimum": 0, "maximum": math.pi},
            "phi0": {"type": "number"},
            "delta_m": _DELTA_M_SCHEMA,
            "seed": {"type": "integer", "minimum": 0},
            "out_dir": {"type": "string"},
        },
    },
    "lg": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "delta_m", "omega", "omega_tau"],
        "properties": {
            "j": {"type": "number", "exclusiveMinimum": 0},
            "delta_m": _DELTA_M_SCHEMA,
            "omega": {"type": "number", "exclusiveMinimum": 0},
            "omega_tau": {
                "type": "array",
                "items": {"type": "number", "exclusiveMinimum": 0},
                "minItems": 1,
            },
            "out_dir": {"type": "string"},
        },
    },
    "pround": {
        "type": "object",
        "additionalProperties": False,
        "required": ["j", "state"],
        "properties": {
            "j": {"type": "number", "minimum": 0},
            "state": _STATE_SCHEMA,
            "seed": {"type": "integer", "minimum": 0},
            "out_dir": {"type": "string"},
        },
    },
}

_RULE_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*\*\s*sqrt\(\s*j\s*\)\s*$")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description: kind plus resolved parameters."""

    kind: str
    data: dict

    @property
    def seed(self):
        return self.data.get("seed")


def parse_config(kind: str, text: str) -> ExperimentConfig:
    """Parse and validate JSON config text for an experiment kind.

    Strict: unknown keys are rejected; error messages carry the JSON path.
    """
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {EXPERIMENT_KINDS}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e}") from e
    validator = Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(raw), key=lambda e: e.json_path)
    if errors:
        msgs = "; ".join(f"{e.json_path}: {e.message}" for e in errors)
        raise ConfigError(f"invalid config for {kind}: {msgs}")
    _validate_cross_fields(kind, raw)
    return ExperimentConfig(kind, raw)


def _validate_cross_fields(kind: str, data: dict) -> None:
    if "j" in data:
        try:
            sc.SpinJ.from_j(data["j"])
        except ValueError as e:
            raise ConfigError(f"$.j: {e}") from e
    state = data.get("state")
    if state is not None:
        typ = state["type"]
        if typ in ("coherent", "superposition") and "theta" not in state:
            raise ConfigError("$.state.theta: required for coherent/superposition states")
        if typ == "superposition" and "theta2" not in state:
            raise ConfigError("$.state.theta2: required for superposition states")
        if typ.startswith("random") and "seed" not in data:
            raise ConfigError("$.seed: required when the state is random")
    if kind == "trajectory":
        if data["mode"] != "unitary" and "delta_m" not in data:
            raise ConfigError("$.delta_m: required for measurement modes")
        if data["mode"] == "selective" and "seed" not in data:
            raise ConfigError("$.seed: required for selective mode (determinism contract)")
    if kind == "catdecay" and data.get("j_min", 1) > data["j_max"]:
        raise ConfigError("$.j_min: must not exceed j_max")


def resolve_delta_m(rule, j: sc.SpinJ) -> list[int]:
    """Expand a delta_m spec: integer, list of integers, a 'c*sqrt(j)' rule
    (ceil rounding), or 'doubling' for {1, 2, 4, ..., 2j+1}."""
    if isinstance(rule, int):
        values = [rule]
    elif isinstance(rule, list):
        values = list(rule)
    elif isinstance(rule, str):
        if rule.strip() == "doubling":
            values = []
            dm = 1
            while dm < j.dim:
                values.append(dm)
                dm *= 2
            values.append(j.dim)
        else:
            m = _RULE_RE.match(rule)
            if not m:
                raise ConfigError(
                    f"$.delta_m: bad rule {rule!r}; want an integer list, 'doubling', or 'c*sqrt(j)'"
                )
            values = [math.ceil(float(m.group(1)) * math.sqrt(j.j))]
    else:  # pragma: no cover - schema forbids
        raise ConfigError("$.delta_m: unsupported type")
    for v in values:
        if not 1 <= v <= j.dim:
            raise ConfigError(f"$.delta_m: {v} outside [1, {j.dim}] for j = {j.j}")
    return values


def build_state(j: sc.SpinJ, spec: dict, rng: np.random.Generator | None):
    """Construct the configured input state (pure where possible)."""
    typ = spec["type"]
    if typ == "coherent":
        return sc.coherent_state(j, sc.Direction(spec["theta"], spec.get("phi", 0.0)))
    if typ == "cat":
        return cg.cat_state(j)
    if typ == "maximally_mixed":
        return sc.DensityOperator.maximally_mixed(j)
    if typ == "superposition":
        a = sc.coherent_state(j, sc.Direction(spec["theta"], spec.get("phi", 0.0))).amplitudes
        b = sc.coherent_state(j, sc.Direction(spec["theta2"], spec.get("phi2", 0.0))).amplitudes
        v = a + b
        return sc.PureState(j, v / np.linalg.norm(v))
    if typ == "random_pure":
        return sc.random_pure(j, rng)
    if typ == "random_mixed":
        return sc.random_density(j, rng)
    raise ConfigError(f"$.state.type: unknown {typ!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# runners


def _fmt(value) -> object:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _write_summary(out_dir: Path, kind: str, config: dict, derived: dict, checks: dict) -> None:
    payload = {
        "experiment": kind,
        "config": config,
        "derived": {k: _fmt(v) for k, v in derived.items()},
        "checks": checks,
    }
    with open(out_dir / "summary.json", "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_qmap(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    state = build_state(j, data["state"], rng)
    l_max = data.get("grid_l_max", j.twice_j)
    grid = ps.build_grid(l_max)
    qmap = ps.q_function(state, grid)
    ps.write_map_csv(qmap, out_dir / "qmap.csv")
    integral = grid.integrate(qmap.values)
    derived = {
        "integral": integral,
        "min_value": float(qmap.values.min()),
        "max_value": float(qmap.values.max()),
        "n_nodes": grid.n_nodes,
    }
    checks = {}
    if l_max >= j.twice_j:
        checks["q_normalized"] = "pass" if abs(integral - 1.0) <= 1e-10 else "fail"
    checks["q_nonnegative"] = "pass" if qmap.values.min() >= -1e-12 else "fail"
    return derived, checks


def _run_slots(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    dms = resolve_delta_m(data["delta_m"], j)
    state = sc.coherent_state(j, sc.Direction(data["theta"], data.get("phi", 0.0)))
    l_max = data.get("grid_l_max", j.twice_j)

    def one(dm: int):
        part = cg.make_partition(j, dm)
        grid = cg.partition_grid(part, l_max)
        q = ps.q_function(state, grid)
        bands = cg.slot_bands(part)
        approx = cg.approx_slot_probs_via_q(q, bands)
        exact = cg.exact_slot_probs(state, part)
        err = float(np.abs(approx.probabilities - exact.probabilities).max())
        return part, exact, approx, err

    results = list(pool.map(one, dms))
    max_errs = {}
    for dm, (part, exact, approx, err) in zip(dms, results):
        cg.write_slot_table(out_dir / f"slots_dm{dm}.csv", part, exact, approx)
        max_errs[str(dm)] = err
    derived = {
        "max_abs_err": max_errs,
        "q_mass_defect": {
            str(dm): res[2].raw_total - 1.0 for dm, res in zip(dms, results)
        },
    }
    checks = {}
    if len(dms) > 1 and all(a < b for a, b in zip(dms, dms[1:])):
        errs = [results[i][3] for i in range(len(dms))]
        ok = all(errs[i] >= errs[i + 1] - 1e-12 for i in range(len(errs) - 1))
        checks["eq1_error_nonincreasing"] = "pass" if ok else "fail"
    return derived, checks


def _run_catdecay(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j_lo = data.get("j_min", 1)
    j_hi = data["j_max"]
    js = list(range(j_lo, j_hi + 1))
    gaps = list(pool.map(lambda jj: cg.cat_gap(sc.SpinJ(2 * jj)), js))
    with open(out_dir / "catdecay.csv", "w", newline="") as fh:
        fh.write("j,gap,normalized_gap\n")
        for jj, gap in zip(js, gaps):
            norm = gap * 4.0 * math.pi / (2 * jj + 1)
            fh.write(f"{jj},{gap:.17g},{norm:.17g}\n")
    # slope of the exponential part: the dimension prefactor (2j+1)/(4pi) is
    # divided out, leaving ln 4^-j whose slope is -2 ln 2
    ys = np.log(np.array(gaps) * 4.0 * math.pi / (2 * np.array(js, dtype=float) + 1))
    slope = float(np.polyfit(np.array(js, dtype=float), ys, 1)[0])
    derived = {"fitted_log_slope": slope, "expected_slope": -2.0 * math.log(2.0)}
    rel = abs(slope + 2.0 * math.log(2.0)) / (2.0 * math.log(2.0))
    checks = {"exponential_decay_slope": "pass" if rel <= 0.01 else "fail"}
    return derived, checks


def _run_invasiveness(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    dms = resolve_delta_m(data["delta_m"], j)
    metric = data.get("metric", "L1")
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    state = build_state(j, data["state"], rng)
    grid = ps.build_grid(data.get("grid_l_max", j.twice_j))

    def one(dm: int) -> float:
        return cg.invasiveness(state, cg.make_partition(j, dm), grid, metric)

    values = list(pool.map(one, dms))
    with open(out_dir / "invasiveness.csv", "w", newline="") as fh:
        fh.write("j,delta_m,metric,value\n")
        for dm, v in zip(dms, values):
            fh.write(f"{j.j:.17g},{dm},{metric},{v:.17g}\n")
    derived = {"values": {str(dm): v for dm, v in zip(dms, values)}}
    checks = {}
    if len(dms) > 1 and all(a < b for a, b in zip(dms, dms[1:])):
        ok = all(values[i] >= values[i + 1] - 1e-12 for i in range(len(values) - 1))
        checks["noninvasiveness_monotone"] = "pass" if ok else "fail"
    return derived, checks


def _run_trajectory(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    spec = dy.PrecessionSpec(np.asarray(data["axis"], dtype=float), data["omega"])
    times = np.arange(data["n_steps"] + 1) * data["dt"]
    psi0 = sc.coherent_state(j, sc.Direction(data["theta0"], data.get("phi0", 0.0)))
    mode = data["mode"]
    part = None
    dm = None
    if mode != "unitary":
        dm = resolve_delta_m(data["delta_m"], j)[0]
        part = cg.make_partition(j, dm)
    rng = np.random.default_rng(cfg.seed) if mode == "selective" else None
    traj = dy.quantum_trajectory(psi0, spec, times, part=part, mode=mode, rng=rng)
    traj.write_csv(out_dir / "trajectory.csv")
    errs = traj.angle_errors()
    derived = {
        "max_angle_err_rad": float(np.nanmax(errs)),
        "final_len": float(traj.quantum_len[-1]),
        "degenerate_points": int(np.isnan(traj.quantum_dir).any(axis=1).sum()),
    }
    checks = {}
    if mode == "unitary":
        checks["classical_match_exact"] = "pass" if derived["max_angle_err_rad"] <= 1e-10 else "fail"
    elif mode == "nonselective" and dm is not None and dm >= 5.0 * math.sqrt(j.j):
        bound = 5.0 / math.sqrt(j.j)
        checks["classical_match_coarse"] = "pass" if derived["max_angle_err_rad"] <= bound else "fail"
    return derived, checks


def _run_lg(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    dm = resolve_delta_m(data["delta_m"], j)[0]
    part = cg.make_partition(j, dm)
    omega = data["omega"]
    spec = dy.PrecessionSpec(np.array([1.0, 0.0, 0.0]), omega)
    taus = [wt / omega for wt in data["omega_tau"]]
    results = list(pool.map(lambda tau: dy.lg_correlator(j, spec, tau, part), taus))
    dy.write_lg_csv(out_dir / "lg.csv", results, dm)
    max_k = max(r.K for r in results)
    derived = {"max_K": max_k, "delta_m": dm}
    checks = {
        "correlators_bounded": "pass"
        if all(max(abs(r.c12), abs(r.c23), abs(r.c13)) <= 1.0 + 1e-12 for r in results)
        else "fail"
    }
    if dm >= 2.0 * math.sqrt(j.j):
        checks["macrorealism_restored"] = "pass" if max_k <= 1.05 else "fail"
    return derived, checks


def _run_pround(cfg: ExperimentConfig, out_dir: Path, pool) -> tuple[dict, dict]:
    data = cfg.data
    j = sc.SpinJ.from_j(data["j"])
    rng = np.random.default_rng(cfg.seed) if cfg.seed is not None else None
    state = build_state(j, data["state"], rng)
    rho = state.density() if isinstance(state, sc.PureState) else state
    grid = ps.build_grid(2 * j.twice_j)
    pmap = ps.p_function(rho, grid)
    ps.write_map_csv(pmap, out_dir / "pmap.csv")
    back = ps.state_from_p(pmap)
    trace_dist = 0.5 * float(np.abs(np.linalg.eigvalsh(back.matrix - rho.matrix)).sum())
    integral = grid.integrate(pmap.values)
    derived = {
        "min_p": float(pmap.values.min()),
        "integral": integral,
        "roundtrip_trace_distance": trace_dist,
    }
    checks = {
        "p_normalized": "pass" if abs(integral - 1.0) <= 1e-8 else "fail",
        "roundtrip": "pass" if trace_dist <= 1e-6 else "fail",
    }
    if data["state"]["type"] == "cat":
        checks["p_negativity_witness"] = "pass" if derived["min_p"] < 0.0 else "fail"
    return derived, checks


_RUNNERS = {
    "qmap": _run_qmap,
    "slots": _run_slots,
    "catdecay": _run_catdecay,
    "invasiveness": _run_invasiveness,
    "trajectory": _run_trajectory,
    "lg": _run_lg,
    "pround": _run_pround,
}


def run(cfg: ExperimentConfig, out_dir, threads: int = 1) -> dict:
    """Execute an experiment; write CSV artifacts and summary.json.

    Raises InvariantViolation (after writing the summary) if any declared
    check fails.  Deterministic: identical config and seed give byte-identical
    artifacts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        derived, checks = _RUNNERS[cfg.kind](cfg, out, pool)
    _write_summary(out, cfg.kind, cfg.data, derived, checks)
    failed = [name for name, status in checks.items() if status == "fail"]
    if failed:
        raise InvariantViolation(f"invariant(s) violated: {', '.join(failed)}")
    return {"derived": derived, "checks": checks}
