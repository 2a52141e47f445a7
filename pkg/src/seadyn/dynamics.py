"""Master-equation integration with thermodynamic diagnostics.

The evolution is rho_dot = (i/hbar)[rho, H] - L(log rho) with L the
constrained projector dissipator. The commutator preserves the spectrum; the
dissipative term drives log rho toward the constraint span, which raises the
von Neumann entropy at the fixed rate sigma = <log rho, L log rho> >= 0 while
every constrained expectation stays put. Fixed points with constraints
{I, H} are the Gibbs states exp(-beta H)/Z, computed here independently as
relaxation oracles.

Integration uses an embedded Cash-Karp 4(5) pair on the dense matrix state.
After each accepted step the state is re-hermitized, and a spectrum that
dips below the repair tolerance is shifted up to the eigenvalue floor and
renormalized, with every such intervention counted.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np

from .generator import (
    ConstraintSet,
    DissipativeGenerator,
    apply_generator,
    build_constraint_set,
    build_projector_generator,
)
from .operators import (
    DEFAULT_EIG_FLOOR,
    DensityState,
    HermiticityError,
    PositivityError,
    as_operator,
    hermitian_part,
    hs_inner,
    hs_norm,
    matrix_log,
    validate_hermitian,
)

log = logging.getLogger("seadyn.dynamics")

EQUILIBRIUM_RHS_TOL = 1e-9
EQUILIBRIUM_STREAK = 3
MIN_STEP = 1e-14
STATE_REPAIR_TOL = 1e-10
_MAX_ATTEMPTS = 1_000_000

TERMINATION_T_FINAL = "t_final reached"
TERMINATION_EQUILIBRIUM = "equilibrium detected"
TERMINATION_STEP_FAILURE = "step failure"


class BracketError(RuntimeError):
    """Root bracketing for the inverse-temperature solve failed."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully resolved description of one evolution run.

    constraint_ops lists the conserved observables fed to the constraint
    builder (the identity is inserted automatically); None defaults to the
    Hamiltonian alone, i.e. constraints {I, H}. tau = inf disables the
    dissipator. output_stride is the time between diagnostic outputs and
    defaults to t_final / 200.
    """

    hamiltonian: np.ndarray
    rho0: DensityState
    tau: float = 1.0
    constraint_ops: tuple[np.ndarray, ...] | None = None
    hbar: float = 1.0
    t_final: float = 50.0
    dt_init: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    eig_floor: float = DEFAULT_EIG_FLOOR
    output_stride: float | None = None
    detect_equilibrium: bool = True

    def __post_init__(self):
        h = validate_hermitian(self.hamiltonian, name="hamiltonian")
        object.__setattr__(self, "hamiltonian", h)
        if not isinstance(self.rho0, DensityState):
            raise TypeError("rho0 must be a DensityState (use DensityState.from_matrix)")
        if self.rho0.dim != h.shape[0]:
            raise ValueError(
                f"rho0 dimension {self.rho0.dim} does not match hamiltonian dimension {h.shape[0]}"
            )
        if self.constraint_ops is None:
            object.__setattr__(self, "constraint_ops", (h,))
        else:
            object.__setattr__(self, "constraint_ops", tuple(as_operator(c) for c in self.constraint_ops))
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not self.hbar > 0.0:
            raise ValueError(f"hbar must be positive, got {self.hbar!r}")
        if not self.t_final > 0.0:
            raise ValueError(f"t_final must be positive, got {self.t_final!r}")
        if not self.dt_init > 0.0:
            raise ValueError(f"dt_init must be positive, got {self.dt_init!r}")
        if self.output_stride is None:
            object.__setattr__(self, "output_stride", self.t_final / 200.0)
        if not self.output_stride > 0.0:
            raise ValueError(f"output_stride must be positive, got {self.output_stride!r}")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def constraint_set(self) -> ConstraintSet:
        return build_constraint_set(self.dim, self.constraint_ops)

    def generator(self) -> DissipativeGenerator:
        return build_projector_generator(self.constraint_set(), self.tau)


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    state: DensityState
    entropy: float
    entropy_production: float
    energy: float
    trace: float
    min_eigenvalue: float
    constraint_expectations: tuple[float, ...]
    clamp_count: int


@dataclass(frozen=True)
class Trajectory:
    points: tuple[TrajectoryPoint, ...]
    termination: str

    def times(self) -> np.ndarray:
        return np.array([p.t for p in self.points])

    def entropies(self) -> np.ndarray:
        return np.array([p.entropy for p in self.points])

    @property
    def final(self) -> TrajectoryPoint:
        return self.points[-1]


def entropy(rho, eig_floor: float = DEFAULT_EIG_FLOOR) -> float:
    """von Neumann entropy -sum(lam * ln lam) in nats.

    Eigenvalues below eig_floor contribute zero (the x ln x -> 0 limit).
    """
    if isinstance(rho, DensityState):
        eigs = rho.eigenvalues
    else:
        eigs = np.linalg.eigvalsh(validate_hermitian(rho, name="state"))
    pos = eigs[eigs >= eig_floor]
    s = float(-(pos * np.log(pos)).sum()) if pos.size else 0.0
    return max(s, 0.0)


def entropy_production(rho, gen: DissipativeGenerator,
                       eig_floor: float = DEFAULT_EIG_FLOOR) -> float:
    """Instantaneous entropy production sigma = <log rho, L(log rho)>.

    Nonnegative for a verified (symmetric PSD) generator; the Hamiltonian
    term contributes nothing because [rho, log rho] = 0.
    """
    log_rho, _ = matrix_log(rho, eig_floor)
    return hs_inner(log_rho, apply_generator(gen, log_rho))


def rhs(state: DensityState, scenario: ScenarioConfig,
        gen: DissipativeGenerator) -> np.ndarray:
    """Right-hand side (i/hbar)[rho, H] - L(log rho); traceless and Hermitian."""
    return _rhs_matrix(state.matrix, scenario.hamiltonian, gen,
                       scenario.hbar, scenario.eig_floor)


def _rhs_matrix(rho_mat: np.ndarray, h: np.ndarray, gen: DissipativeGenerator,
                hbar: float, eig_floor: float) -> np.ndarray:
    rho_h = hermitian_part(rho_mat)
    comm = rho_h @ h - h @ rho_h
    log_rho, _ = matrix_log(rho_h, eig_floor)
    return (1j / hbar) * comm - apply_generator(gen, log_rho)


def gibbs_state(hamiltonian, beta: float | None = None, energy: float | None = None,
                extra_constraints=None, *, energy_tol: float = 1e-12,
                max_bisect: int = 200) -> tuple[DensityState, float]:
    """Gibbs state exp(-beta H)/Z, by inverse temperature or by target energy.

    Energy targeting solves E(beta) = energy by bisection on the strictly
    decreasing map beta -> Tr(H exp(-beta H))/Tr(exp(-beta H)), starting from
    the bracket [-50, 50]/||H||. Returns the state and the beta used.
    """
    h = validate_hermitian(hamiltonian, name="hamiltonian")
    if extra_constraints:
        raise NotImplementedError(
            "multi-constraint equilibria are not solved directly; they are "
            "validated through trajectory limits instead"
        )
    w, v = np.linalg.eigh(h)

    def populations(b: float) -> np.ndarray:
        x = -b * w
        x = x - x.max()
        q = np.exp(x)
        return q / q.sum()

    def mean_energy(b: float) -> float:
        return float(populations(b) @ w)

    if beta is None:
        if energy is None:
            raise ValueError("provide either beta or a target energy")
        e_min, e_max = float(w[0]), float(w[-1])
        if not e_min < energy < e_max:
            raise ValueError(
                f"target energy {energy!r} is outside the open spectral interval "
                f"({e_min!r}, {e_max!r})"
            )
        h_norm = float(np.max(np.abs(w)))
        lo, hi = -50.0 / h_norm, 50.0 / h_norm
        if not mean_energy(hi) <= energy <= mean_energy(lo):
            raise BracketError(
                f"initial bracket [{lo!r}, {hi!r}] does not straddle target energy {energy!r}"
            )
        beta = 0.5 * (lo + hi)
        for _ in range(max_bisect):
            beta = 0.5 * (lo + hi)
            e_mid = mean_energy(beta)
            if abs(e_mid - energy) <= energy_tol:
                break
            if e_mid > energy:
                lo = beta
            else:
                hi = beta
        else:
            if abs(mean_energy(beta) - energy) > energy_tol:
                raise BracketError(
                    f"bisection did not reach |E(beta) - E0| <= {energy_tol!r} "
                    f"within {max_bisect} iterations"
                )
    p = populations(beta)
    rho = hermitian_part((v * p) @ v.conj().T)
    return DensityState.from_matrix(rho), float(beta)


# Cash-Karp embedded 4(5) tableau; the right-hand side is autonomous so the
# stage times are not needed.
_CK_A = (
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0),
    (-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0),
    (1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0),
)
_CK_B5 = (37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0)
_CK_B4 = (2825.0 / 27648.0, 0.0, 18575.0 / 48384.0, 13525.0 / 55296.0, 277.0 / 14336.0, 1.0 / 4.0)


class _StageFailure(Exception):
    pass


def _stages(f, rho: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    ks = [f(rho)]
    for row in _CK_A:
        y = rho + dt * sum(a * k for a, k in zip(row, ks) if a != 0.0)
        ks.append(f(y))
    y5 = rho + dt * sum(b * k for b, k in zip(_CK_B5, ks) if b != 0.0)
    y4 = rho + dt * sum(b * k for b, k in zip(_CK_B4, ks) if b != 0.0)
    return y5, y5 - y4


def _error_norm(diff: np.ndarray, y_old: np.ndarray, y_new: np.ndarray,
                atol: float, rtol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    ratio = np.abs(diff) / scale
    return float(np.sqrt(np.mean(ratio * ratio)))


def _step_factor(err: float) -> float:
    if err == 0.0:
        return 5.0
    return min(5.0, max(0.2, 0.9 * err ** -0.2))


def _output_boundaries(t_final: float, stride: float) -> list[float]:
    bounds = []
    k = 1
    margin = 1e-12 * max(1.0, t_final)
    while k * stride < t_final - margin:
        bounds.append(k * stride)
        k += 1
    bounds.append(t_final)
    return bounds


def integrate(scenario: ScenarioConfig,
              gen: DissipativeGenerator | None = None) -> Trajectory:
    """Integrate the master equation and collect per-output diagnostics.

    Adaptive Cash-Karp 4(5) steps, clipped so every output time on the
    stride grid is hit exactly. A step whose trial states leave the
    positive-semidefinite domain is rejected and retried at half the size;
    persistent failure (step below MIN_STEP or a non-finite state) ends the
    run with a step-failure termination. The run also ends early when
    ||rhs||_F stays below EQUILIBRIUM_RHS_TOL for EQUILIBRIUM_STREAK
    consecutive outputs.
    """
    if gen is None:
        gen = scenario.generator()
    h = scenario.hamiltonian
    hbar = scenario.hbar
    floor = scenario.eig_floor
    cset = gen.constraints
    n = scenario.dim
    eye = np.eye(n, dtype=complex)
    atol, rtol = scenario.abs_tol, scenario.rel_tol

    def f(mat: np.ndarray) -> np.ndarray:
        out = _rhs_matrix(mat, h, gen, hbar, floor)
        if not np.isfinite(out).all():
            raise _StageFailure("non-finite right-hand side")
        return out

    def make_point(t: float, mat: np.ndarray, clamp_count: int) -> tuple[TrajectoryPoint, float]:
        state = DensityState.from_matrix(mat, psd_tol=STATE_REPAIR_TOL, trace_tol=1e-6)
        log_rho, _ = matrix_log(state, floor)
        l_log = apply_generator(gen, log_rho)
        sigma = hs_inner(log_rho, l_log)
        rhs_val = (1j / hbar) * (mat @ h - h @ mat) - l_log
        point = TrajectoryPoint(
            t=t,
            state=state,
            entropy=entropy(state, floor),
            entropy_production=sigma,
            energy=hs_inner(h, mat),
            trace=float(np.trace(mat).real),
            min_eigenvalue=state.min_eigenvalue,
            constraint_expectations=tuple(hs_inner(c, mat) for c in cset.raw),
            clamp_count=clamp_count,
        )
        return point, hs_norm(rhs_val)

    rho = np.array(scenario.rho0.matrix, dtype=complex)
    t = 0.0
    dt = scenario.dt_init
    clamp_count = 0
    attempts = 0
    termination = None
    eq_streak = 0

    point, rhs_norm = make_point(0.0, rho, clamp_count)
    points = [point]
    if scenario.detect_equilibrium and rhs_norm < EQUILIBRIUM_RHS_TOL:
        eq_streak = 1

    for t_target in _output_boundaries(scenario.t_final, scenario.output_stride):
        failed = False
        while t < t_target:
            attempts += 1
            if attempts > _MAX_ATTEMPTS:
                termination = TERMINATION_STEP_FAILURE
                failed = True
                break
            dt_span = t_target - t
            dt_try = dt if dt < dt_span else dt_span
            try:
                y5, diff = _stages(f, rho, dt_try)
                if not np.isfinite(y5).all():
                    raise _StageFailure("non-finite state")
            except (_StageFailure, PositivityError, HermiticityError,
                    np.linalg.LinAlgError, FloatingPointError):
                dt = dt_try * 0.5
                if dt < MIN_STEP:
                    termination = TERMINATION_STEP_FAILURE
                    failed = True
                    break
                continue
            err = _error_norm(diff, rho, y5, atol, rtol)
            if err <= 1.0:
                rho = hermitian_part(y5)
                eigs = np.linalg.eigvalsh(rho)
                if float(eigs[0]) < -STATE_REPAIR_TOL:
                    shift = floor - float(eigs[0])
                    rho = (rho + shift * eye) / (1.0 + n * shift)
                    clamp_count += 1
                t = t_target if dt_try == dt_span else t + dt_try
                dt = dt_try * _step_factor(err)
            else:
                dt = dt_try * _step_factor(err)
                if dt < MIN_STEP:
                    termination = TERMINATION_STEP_FAILURE
                    failed = True
                    break
        if failed:
            if t > points[-1].t + 1e-15:
                try:
                    point, _ = make_point(t, rho, clamp_count)
                    points.append(point)
                except (ValueError, np.linalg.LinAlgError):
                    pass
            break
        point, rhs_norm = make_point(t_target, rho, clamp_count)
        points.append(point)
        if scenario.detect_equilibrium:
            if rhs_norm < EQUILIBRIUM_RHS_TOL:
                eq_streak += 1
            else:
                eq_streak = 0
            if eq_streak >= EQUILIBRIUM_STREAK:
                termination = TERMINATION_EQUILIBRIUM
                break

    if termination is None:
        termination = TERMINATION_T_FINAL
    log.debug("integrate: %d outputs, %d attempts, %d clamps, termination=%s",
              len(points), attempts, clamp_count, termination)
    return Trajectory(tuple(points), termination)


def with_updates(scenario: ScenarioConfig, **changes) -> ScenarioConfig:
    """Functional update helper; revalidates through the constructor."""
    return replace(scenario, **changes)
