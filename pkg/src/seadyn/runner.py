"""Scenario loading, run orchestration, and deterministic result emission.

Scenario files are JSON (canonical) or TOML (a direct mapping of the same
schema):

    {
      "dim": 2,
      "hamiltonian": {"dim": 2, "re": [[0, 0], [0, 1]]},
      "rho0": {"dim": 2, "re": [[0.9, 0.2], [0.2, 0.1]]},
      "generator": {"tau": 1.0, "constraints": ["identity", "hamiltonian"]},
      "hbar": 1.0, "t_final": 50.0, "dt_init": 0.001,
      "rel_tol": 1e-8, "abs_tol": 1e-10, "eig_floor": 1e-12,
      "output_stride": 0.25
    }

Optional sections: "onsager_times" (list of floats), "superselection"
({"observable": {...}, "sector": 0}), "separability" ({"subsystem_a": {...},
"subsystem_b": {...}, "mode": ..., "t_final": ...}). Floats in CSV output
are written with 17 significant digits and '\n' newlines so identical
resolved configurations reproduce byte-identical files.
"""

import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass
from math import isinf
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import (
    DensityState,
    ScenarioConfig,
    Trajectory,
    integrate,
    with_updates,
)
from .generator import random_property_checks, verify_generator
from .onsager import check_reciprocity, onsager_matrix
from .operators import (
    DimensionError,
    HermiticityError,
    PositivityError,
    TraceError,
    operator_from_json,
    operator_to_json,
)
from .sectors import (
    check_sector_preservation,
    constraint_redundancy_probe,
    sector_decompose,
    separability_probe,
)

log = logging.getLogger("seadyn.runner")

COMMANDS = ("evolve", "verify-generator", "onsager", "sector-check", "separability-probe")

TRACE_DRIFT_HARD = 1e-6
ENTROPY_DECREASE_HARD = 1e-6
PSD_HARD = 1e-8


class ScenarioError(ValueError):
    """Rejected scenario input, carrying a machine-readable error shape."""

    def __init__(self, code: str, field: str, detail: str):
        super().__init__(f"{field or 'scenario'}: {detail}")
        self.code = code
        self.field = field
        self.detail = detail

    def to_json(self) -> dict:
        return {"error": self.code, "field": self.field, "detail": self.detail}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _read_raw(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ScenarioError("io", str(path), "scenario file does not exist")
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        else:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError("parse", str(path), f"could not parse scenario file: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("parse", str(path), "scenario file must contain an object")
    return raw


def _get_number(raw: dict, key: str, default, *, positive: bool = True,
                prefix: str = "", nullable: bool = False):
    if key not in raw:
        return default
    val = raw[key]
    field = f"{prefix}{key}"
    if val is None:
        if nullable:
            return None
        raise ScenarioError("invalid_value", field, "expected a number, got null")
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ScenarioError("invalid_value", field, f"expected a number, got {val!r}")
    if positive and not val > 0:
        raise ScenarioError("invalid_value", field, f"must be positive, got {val!r}")
    return float(val)


def _operator_field(raw: dict, key: str, *, prefix: str = "") -> np.ndarray:
    field = f"{prefix}{key}"
    if key not in raw:
        raise ScenarioError("missing_field", field, "required operator is missing")
    try:
        return operator_from_json(raw[key], name=key)
    except HermiticityError as exc:
        raise ScenarioError("hermiticity", field, str(exc)) from exc
    except (DimensionError, ValueError) as exc:
        raise ScenarioError("invalid_value", field, str(exc)) from exc


def build_scenario_config(raw: dict, *, prefix: str = "") -> ScenarioConfig:
    """Build a validated ScenarioConfig from a parsed scenario object.

    Errors name the offending field through ScenarioError.
    """
    hamiltonian = _operator_field(raw, "hamiltonian", prefix=prefix)
    dim = hamiltonian.shape[0]
    declared = raw.get("dim")
    if declared is not None and int(declared) != dim:
        raise ScenarioError("dimension", f"{prefix}dim",
                            f"declared dim {declared} does not match hamiltonian dim {dim}")
    rho_mat = _operator_field(raw, "rho0", prefix=prefix)
    if rho_mat.shape[0] != dim:
        raise ScenarioError("dimension", f"{prefix}rho0",
                            f"rho0 dim {rho_mat.shape[0]} does not match hamiltonian dim {dim}")
    try:
        rho0 = DensityState.from_matrix(rho_mat, trace_tol=1e-8)
    except TraceError as exc:
        raise ScenarioError("trace", f"{prefix}rho0.trace", str(exc)) from exc
    except PositivityError as exc:
        raise ScenarioError("positivity", f"{prefix}rho0", str(exc)) from exc

    gen_raw = raw.get("generator", {})
    if not isinstance(gen_raw, dict):
        raise ScenarioError("invalid_value", f"{prefix}generator", "expected an object")
    tau = _get_number(gen_raw, "tau", 1.0, prefix=f"{prefix}generator.", nullable=True)
    if tau is None:
        tau = float("inf")      # null disables the dissipator
    tokens = gen_raw.get("constraints", ["identity", "hamiltonian"])
    if not isinstance(tokens, list):
        raise ScenarioError("invalid_value", f"{prefix}generator.constraints", "expected a list")
    ops = []
    for i, tok in enumerate(tokens):
        field = f"{prefix}generator.constraints[{i}]"
        if tok == "identity":
            ops.append(np.eye(dim, dtype=complex))
        elif tok == "hamiltonian":
            ops.append(hamiltonian)
        elif isinstance(tok, dict):
            try:
                op = operator_from_json(tok, name=field)
            except (HermiticityError, DimensionError, ValueError) as exc:
                raise ScenarioError("invalid_value", field, str(exc)) from exc
            if op.shape[0] != dim:
                raise ScenarioError("dimension", field,
                                    f"constraint dim {op.shape[0]} does not match scenario dim {dim}")
            ops.append(op)
        else:
            raise ScenarioError("invalid_value", field,
                                f"expected 'identity', 'hamiltonian', or an operator object, got {tok!r}")

    t_final = _get_number(raw, "t_final", 50.0, prefix=prefix)
    kwargs = dict(
        hamiltonian=hamiltonian,
        rho0=rho0,
        tau=tau,
        constraint_ops=tuple(ops),
        hbar=_get_number(raw, "hbar", 1.0, prefix=prefix),
        t_final=t_final,
        dt_init=_get_number(raw, "dt_init", 1e-3, prefix=prefix),
        rel_tol=_get_number(raw, "rel_tol", 1e-8, prefix=prefix),
        abs_tol=_get_number(raw, "abs_tol", 1e-10, prefix=prefix),
        eig_floor=_get_number(raw, "eig_floor", 1e-12, prefix=prefix),
        output_stride=_get_number(raw, "output_stride", None, prefix=prefix, nullable=True),
        detect_equilibrium=bool(raw.get("detect_equilibrium", True)),
    )
    try:
        return ScenarioConfig(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ScenarioError("invalid_value", f"{prefix}scenario", str(exc)) from exc


def load_scenario(path) -> ScenarioConfig:
    """Load and fully validate a scenario file (JSON or TOML)."""
    return build_scenario_config(_read_raw(path))


def scenario_canonical_dict(scenario: ScenarioConfig) -> dict:
    """Canonical JSON-safe form of a resolved scenario, used for digests."""
    return {
        "hamiltonian": operator_to_json(scenario.hamiltonian),
        "rho0": operator_to_json(scenario.rho0.matrix),
        "tau": None if isinf(scenario.tau) else scenario.tau,
        "constraints": [operator_to_json(c) for c in scenario.constraint_ops],
        "hbar": scenario.hbar,
        "t_final": scenario.t_final,
        "dt_init": scenario.dt_init,
        "rel_tol": scenario.rel_tol,
        "abs_tol": scenario.abs_tol,
        "eig_floor": scenario.eig_floor,
        "output_stride": scenario.output_stride,
        "detect_equilibrium": scenario.detect_equilibrium,
    }


def config_digest(doc: dict) -> str:
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    command: str
    scenario: str
    config_digest: str
    out_dir: str
    duration_seconds: float
    termination: str | None
    verification: dict
    outputs: tuple[str, ...]
    ok: bool

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "scenario": self.scenario,
            "config_digest": self.config_digest,
            "out_dir": self.out_dir,
            "duration_seconds": self.duration_seconds,
            "termination": self.termination,
            "verification": self.verification,
            "outputs": list(self.outputs),
            "ok": self.ok,
        }


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n_exp = len(traj.points[0].constraint_expectations)
    header = ["t", "S", "sigma", "energy", "trace", "min_eig", "clamp_count"]
    header += [f"expect_{j}" for j in range(n_exp)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for p in traj.points:
            row = [_fmt(p.t), _fmt(p.entropy), _fmt(p.entropy_production),
                   _fmt(p.energy), _fmt(p.trace), _fmt(p.min_eigenvalue),
                   _fmt(p.clamp_count)]
            row += [_fmt(x) for x in p.constraint_expectations]
            fh.write(",".join(row) + "\n")


def write_states_jsonl(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for p in traj.points:
            doc = {"t": p.t}
            doc.update(operator_to_json(p.state.matrix))
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def _write_matrix_csv(mat: np.ndarray, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in np.asarray(mat):
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_series_csv(path, header: list[str], columns: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def trajectory_hard_violations(traj: Trajectory) -> list[str]:
    """Hard invariant failures that must map to a nonzero exit status."""
    violations = []
    drift = max(abs(p.trace - 1.0) for p in traj.points)
    if drift > TRACE_DRIFT_HARD:
        violations.append(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_HARD:.1e}")
    entropies = [p.entropy for p in traj.points]
    if len(entropies) > 1:
        min_step = min(b - a for a, b in zip(entropies, entropies[1:]))
        if min_step < -ENTROPY_DECREASE_HARD:
            violations.append(
                f"entropy decreases by {-min_step:.3e}, beyond {ENTROPY_DECREASE_HARD:.1e}"
            )
    min_eig = min(p.min_eigenvalue for p in traj.points)
    if min_eig < -PSD_HARD:
        violations.append(f"state eigenvalue {min_eig:.3e} below -{PSD_HARD:.1e}")
    if traj.termination == "step failure":
        violations.append("integration ended in step failure")
    return violations


def _apply_overrides(scenario: ScenarioConfig, t_final: float | None,
                     tau: float | None) -> ScenarioConfig:
    if t_final is not None:
        stride = scenario.output_stride
        if stride > t_final:
            stride = t_final / 200.0
        scenario = with_updates(scenario, t_final=t_final, output_stride=stride)
    if tau is not None:
        scenario = with_updates(scenario, tau=tau)
    return scenario


def run(command: str, scenario_path, out_dir, *, t_final: float | None = None,
        tau: float | None = None, seed: int = 0, fmt: str = "csv",
        times: list[float] | None = None) -> RunManifest:
    """Execute one command against a scenario file and write its artifacts.

    Returns the manifest; manifest.ok is False when a hard validation
    failed. Input rejections raise ScenarioError instead.
    """
    if command not in COMMANDS:
        raise ScenarioError("invalid_value", "command", f"unknown command {command!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = _read_raw(scenario_path)
    started = time.monotonic()
    outputs: list[str] = []
    verification: dict = {}
    termination = None
    ok = True

    if command == "separability-probe":
        digest_doc, report = _run_separability(raw, t_final)
        _write_json(report.as_dict(), out / "separability_report.json")
        _write_series_csv(
            out / "separability_series.csv",
            ["t", "product_deviation", "energy_a", "energy_b", "mutual_information"],
            [report.times, report.product_deviation, report.energy_a,
             report.energy_b, report.mutual_information],
        )
        outputs += ["separability_report.json", "separability_series.csv"]
        verification = {"max_product_deviation": max(report.product_deviation),
                        "min_mutual_information": min(report.mutual_information)}
        digest = config_digest(digest_doc)
    else:
        scenario = build_scenario_config(raw)
        scenario = _apply_overrides(scenario, t_final, tau)
        digest_doc = {"command": command, "scenario": scenario_canonical_dict(scenario)}

        if command == "evolve":
            traj = integrate(scenario)
            termination = traj.termination
            write_trajectory_csv(traj, out / "trajectory.csv")
            outputs.append("trajectory.csv")
            if fmt == "jsonl":
                write_states_jsonl(traj, out / "states.jsonl")
                outputs.append("states.jsonl")
            violations = trajectory_hard_violations(traj)
            verification = {
                "hard_violations": violations,
                "max_trace_drift": max(abs(p.trace - 1.0) for p in traj.points),
                "min_state_eigenvalue": min(p.min_eigenvalue for p in traj.points),
                "final_time": traj.final.t,
                "final_entropy": traj.final.entropy,
                "clamp_count": traj.final.clamp_count,
            }
            ok = not violations
        elif command == "verify-generator":
            gen = scenario.generator()
            report = verify_generator(gen)
            checks = random_property_checks(gen, seed=seed)
            verification = {"structural": report.as_dict(), "random_checks": checks}
            _write_json(verification, out / "verification.json")
            outputs.append("verification.json")
            ok = report.passed and checks["passed"]
        elif command == "onsager":
            t_list = times if times is not None else raw.get("onsager_times", [0.0])
            if not isinstance(t_list, list) or not t_list:
                raise ScenarioError("invalid_value", "onsager_times", "expected a nonempty list")
            digest_doc["onsager_times"] = [float(t) for t in t_list]
            gen = scenario.generator()
            reports = []
            eig_sets = []
            for i, t_val in enumerate(t_list):
                m = onsager_matrix(gen, gen.basis, scenario.hamiltonian,
                                   float(t_val), scenario.hbar)
                name = f"onsager_{i:03d}.csv"
                _write_matrix_csv(m.entries, out / name)
                outputs.append(name)
                rep = check_reciprocity(m)
                reports.append({"t": float(t_val), **rep.as_dict()})
                eig_sets.append(np.sort(np.linalg.eigvalsh((m.entries + m.entries.T) / 2.0)))
            eig_drift = max(
                (float(np.max(np.abs(e - eig_sets[0]))) for e in eig_sets[1:]),
                default=0.0,
            )
            verification = {"reciprocity": reports, "eigenvalue_drift": eig_drift}
            _write_json(verification, out / "reciprocity.json")
            outputs.append("reciprocity.json")
            ok = all(r["passed"] for r in reports) and eig_drift <= 1e-9
        elif command == "sector-check":
            ss = raw.get("superselection")
            if not isinstance(ss, dict):
                raise ScenarioError("missing_field", "superselection",
                                    "sector-check requires a superselection section")
            n_op = _operator_field(ss, "observable", prefix="superselection.")
            sector = ss.get("sector", 0)
            if not isinstance(sector, int) or isinstance(sector, bool):
                raise ScenarioError("invalid_value", "superselection.sector",
                                    f"expected an integer sector index, got {sector!r}")
            digest_doc["superselection"] = {"observable": operator_to_json(n_op),
                                            "sector": sector}
            try:
                spec = sector_decompose(n_op, scenario.hamiltonian)
                if not 0 <= sector < spec.sector_count:
                    raise ScenarioError("invalid_value", "superselection.sector",
                                        f"sector {sector} out of range (found {spec.sector_count})")
                preservation = check_sector_preservation(scenario, spec, sector)
                redundancy = constraint_redundancy_probe(scenario, spec, sector)
            except ValueError as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError("invalid_value", "superselection", str(exc)) from exc
            _write_series_csv(
                out / "sector_residuals.csv",
                ["t", "left_residual", "right_residual"],
                [preservation.sample_times, preservation.left_residuals,
                 preservation.right_residuals],
            )
            _write_series_csv(
                out / "sector_redundancy.csv",
                ["t", "trace_distance"],
                [redundancy.times, redundancy.distances],
            )
            verification = {"preservation": preservation.as_dict(),
                            "redundancy": redundancy.as_dict()}
            _write_json(verification, out / "sector_report.json")
            outputs += ["sector_residuals.csv", "sector_redundancy.csv", "sector_report.json"]
            ok = preservation.passed and bool(redundancy.passed)
        digest = config_digest(digest_doc)

    duration = time.monotonic() - started
    manifest = RunManifest(
        command=command,
        scenario=str(scenario_path),
        config_digest=digest,
        out_dir=str(out),
        duration_seconds=duration,
        termination=termination,
        verification=verification,
        outputs=tuple(outputs),
        ok=ok,
    )
    _write_json(manifest.as_dict(), out / "manifest.json")
    log.info("%s finished in %.3fs (ok=%s), outputs in %s", command, duration, ok, out)
    return manifest


def _run_separability(raw: dict, t_final_override: float | None):
    sep = raw.get("separability")
    if not isinstance(sep, dict):
        raise ScenarioError("missing_field", "separability",
                            "separability-probe requires a separability section")
    for key in ("subsystem_a", "subsystem_b"):
        if not isinstance(sep.get(key), dict):
            raise ScenarioError("missing_field", f"separability.{key}",
                                "expected an embedded scenario object")
    scen_a = build_scenario_config(sep["subsystem_a"], prefix="separability.subsystem_a.")
    scen_b = build_scenario_config(sep["subsystem_b"], prefix="separability.subsystem_b.")
    mode = sep.get("mode", "total-energy")
    t_final = t_final_override
    if t_final is None:
        t_final = sep.get("t_final", scen_a.t_final)
    if not isinstance(t_final, (int, float)) or isinstance(t_final, bool) or t_final < 0:
        raise ScenarioError("invalid_value", "separability.t_final",
                            f"expected a nonnegative number, got {t_final!r}")
    try:
        report = separability_probe(scen_a, scen_b, mode, float(t_final))
    except ValueError as exc:
        raise ScenarioError("invalid_value", "separability", str(exc)) from exc
    digest_doc = {
        "command": "separability-probe",
        "subsystem_a": scenario_canonical_dict(scen_a),
        "subsystem_b": scenario_canonical_dict(scen_b),
        "mode": mode,
        "t_final": float(t_final),
    }
    return digest_doc, report
