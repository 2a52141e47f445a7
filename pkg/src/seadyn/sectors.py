"""Superselection-sector machinery and composite-system probes.

A conserved observable N commuting with H splits the Hilbert space into its
eigenspaces. States supported in one sector stay there, the generator
identity N rhs = rhs N = nu rhs holds on the sector, and adding N to the
constraint list is redundant because the compressed N is a multiple of the
identity. The separability probe quantifies, without asserting, how a
composite of noninteracting parts deviates from the product of its local
evolutions.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DensityState,
    ScenarioConfig,
    entropy,
    integrate,
    rhs,
    with_updates,
)
from .operators import (
    DimensionError,
    as_operator,
    hermitian_part,
    hs_norm,
    trace_distance,
    trace_norm,
    validate_hermitian,
)

DEGENERACY_TOL = 1e-9
COMMUTATOR_TOL = 1e-10
SUPPORT_TOL = 1e-10
SECTOR_RESIDUAL_TOL = 1e-9
REDUNDANCY_TOL = 1e-8


@dataclass(frozen=True)
class SectorSpec:
    """Spectral decomposition of a superselection observable.

    values are the clustered eigenvalues (merged below degeneracy_tol),
    projectors the corresponding spectral projectors, and isometries the
    orthonormal column frames used to compress operators into each sector.
    """

    observable: np.ndarray
    values: tuple[float, ...]
    projectors: tuple[np.ndarray, ...]
    isometries: tuple[np.ndarray, ...]
    degeneracy_tol: float = DEGENERACY_TOL

    @property
    def sector_count(self) -> int:
        return len(self.values)


def sector_decompose(observable, hamiltonian, *, degeneracy_tol: float = DEGENERACY_TOL,
                     commutator_tol: float = COMMUTATOR_TOL) -> SectorSpec:
    """Cluster the spectrum of N and return sector projectors.

    Requires [N, H] = 0 within commutator_tol (Frobenius); eigenvalues
    closer than degeneracy_tol are merged into one sector.
    """
    n_op = validate_hermitian(observable, name="superselection observable")
    h = validate_hermitian(hamiltonian, name="hamiltonian")
    if n_op.shape != h.shape:
        raise DimensionError(
            f"dimension mismatch: observable {n_op.shape[0]} vs hamiltonian {h.shape[0]}"
        )
    comm = hs_norm(n_op @ h - h @ n_op)
    if comm > commutator_tol:
        raise ValueError(
            f"superselection observable does not commute with the hamiltonian: "
            f"commutator norm {comm:.3e} exceeds {commutator_tol:.1e}"
        )
    w, v = np.linalg.eigh(n_op)
    clusters: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[clusters[-1][-1]] <= degeneracy_tol:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    values, projectors, isometries = [], [], []
    for idx in clusters:
        cols = v[:, idx]
        values.append(float(np.mean(w[idx])))
        projectors.append(hermitian_part(cols @ cols.conj().T))
        isometries.append(np.ascontiguousarray(cols))
    return SectorSpec(n_op, tuple(values), tuple(projectors), tuple(isometries),
                      degeneracy_tol)


def compress(op, isometry: np.ndarray) -> np.ndarray:
    """Compress an operator into a sector: V^dagger A V."""
    return isometry.conj().T @ as_operator(op) @ isometry


def restricted_scenario(scenario: ScenarioConfig, spec: SectorSpec, k: int,
                        *, support_tol: float = SUPPORT_TOL) -> ScenarioConfig:
    """Compress a scenario into sector k of the superselection observable.

    The initial state must be supported in the sector; within it the log of
    the state is well defined and the evolution never leaves.
    """
    p = spec.projectors[k]
    v = spec.isometries[k]
    rho0 = scenario.rho0.matrix
    leak = hs_norm(rho0 - p @ rho0 @ p)
    if leak > support_tol:
        raise ValueError(
            f"initial state is not supported in sector {k}: leak {leak:.3e} "
            f"exceeds {support_tol:.1e}"
        )
    rho_k = DensityState.from_matrix(hermitian_part(compress(rho0, v)), trace_tol=1e-8)
    return with_updates(
        scenario,
        hamiltonian=compress(scenario.hamiltonian, v),
        rho0=rho_k,
        constraint_ops=tuple(compress(c, v) for c in scenario.constraint_ops),
    )


@dataclass(frozen=True)
class SectorReport:
    sector: int
    value: float
    max_support_leak: float
    max_left_residual: float
    max_right_residual: float
    sample_times: tuple[float, ...]
    left_residuals: tuple[float, ...]
    right_residuals: tuple[float, ...]
    residual_tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        return {
            "sector": self.sector,
            "value": self.value,
            "max_support_leak": self.max_support_leak,
            "max_left_residual": self.max_left_residual,
            "max_right_residual": self.max_right_residual,
            "sample_times": list(self.sample_times),
            "left_residuals": list(self.left_residuals),
            "right_residuals": list(self.right_residuals),
            "residual_tolerance": self.residual_tolerance,
            "passed": self.passed,
        }


def _sample_indices(count: int, samples: int) -> list[int]:
    if count <= samples:
        return list(range(count))
    return sorted(set(int(round(x)) for x in np.linspace(0, count - 1, samples)))


def check_sector_preservation(scenario: ScenarioConfig, spec: SectorSpec, k: int,
                              *, samples: int = 10,
                              residual_tol: float = SECTOR_RESIDUAL_TOL) -> SectorReport:
    """Verify the generator identity N rhs = rhs N = nu rhs on a sector.

    The evolution runs in the sector-restricted subspace. Sampled restricted
    states are lifted back to the full space, where the residuals against
    the full observable are evaluated; the support leak of the lifted states
    is reported as well (zero by construction up to roundoff).
    """
    comm = hs_norm(spec.observable @ scenario.hamiltonian - scenario.hamiltonian @ spec.observable)
    if comm > COMMUTATOR_TOL:
        raise ValueError(
            f"superselection observable does not commute with the scenario "
            f"hamiltonian: commutator norm {comm:.3e}"
        )
    restricted = restricted_scenario(scenario, spec, k)
    gen = restricted.generator()
    traj = integrate(restricted, gen)
    p = spec.projectors[k]
    v = spec.isometries[k]
    nu = spec.values[k]
    n_full = spec.observable
    sample_times, lefts, rights = [], [], []
    max_leak = 0.0
    for point in traj.points:
        lifted_state = v @ point.state.matrix @ v.conj().T
        max_leak = max(max_leak, hs_norm(lifted_state - p @ lifted_state @ p))
    for idx in _sample_indices(len(traj.points), samples):
        point = traj.points[idx]
        rhs_k = rhs(point.state, restricted, gen)
        rhs_full = v @ rhs_k @ v.conj().T
        lefts.append(hs_norm(n_full @ rhs_full - nu * rhs_full))
        rights.append(hs_norm(rhs_full @ n_full - nu * rhs_full))
        sample_times.append(point.t)
    max_left = max(lefts) if lefts else 0.0
    max_right = max(rights) if rights else 0.0
    passed = max_left <= residual_tol and max_right <= residual_tol
    return SectorReport(k, nu, max_leak, max_left, max_right,
                        tuple(sample_times), tuple(lefts), tuple(rights),
                        residual_tol, passed)


@dataclass(frozen=True)
class RedundancyReport:
    sector: int | None
    times: tuple[float, ...]
    distances: tuple[float, ...]
    max_trace_distance: float
    tolerance: float | None
    passed: bool | None

    def as_dict(self) -> dict:
        return {
            "sector": self.sector,
            "times": list(self.times),
            "distances": list(self.distances),
            "max_trace_distance": self.max_trace_distance,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def constraint_redundancy_probe(scenario: ScenarioConfig, spec: SectorSpec,
                                k: int | None, *,
                                distance_tol: float = REDUNDANCY_TOL) -> RedundancyReport:
    """Compare constraints {I, H} against {I, H, N} along matched trajectories.

    With k given, both runs are compressed to that sector, where N acts as
    nu * I and the extra constraint must be redundant; the maximum matched
    trace distance is checked against distance_tol. With k None the
    comparison runs in the full space and the distance is reported with no
    pass/fail, documenting when the constraint is not redundant.
    """
    if k is not None:
        base = restricted_scenario(scenario, spec, k)
        n_extra = compress(spec.observable, spec.isometries[k])
    else:
        base = scenario
        n_extra = spec.observable
    plain = with_updates(base, constraint_ops=(base.hamiltonian,),
                         detect_equilibrium=False)
    extended = with_updates(base, constraint_ops=(base.hamiltonian, n_extra),
                            detect_equilibrium=False)
    traj_a = integrate(plain)
    traj_b = integrate(extended)
    if len(traj_a.points) != len(traj_b.points):
        raise RuntimeError("trajectory grids diverged; cannot compare at matched times")
    times, dists = [], []
    for pa, pb in zip(traj_a.points, traj_b.points):
        times.append(pa.t)
        dists.append(trace_distance(pa.state.matrix, pb.state.matrix))
    max_dist = max(dists)
    if k is not None:
        return RedundancyReport(k, tuple(times), tuple(dists), max_dist,
                                distance_tol, max_dist <= distance_tol)
    return RedundancyReport(None, tuple(times), tuple(dists), max_dist, None, None)


def partial_trace(rho, dim_a: int, dim_b: int, keep: str) -> np.ndarray:
    """Partial trace of a (dim_a * dim_b) square matrix over one factor."""
    arr = as_operator(rho)
    if arr.shape[0] != dim_a * dim_b:
        raise DimensionError(
            f"matrix dimension {arr.shape[0]} does not factor as {dim_a} x {dim_b}"
        )
    blocks = arr.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "a":
        return np.einsum("ibjb->ij", blocks)
    if keep == "b":
        return np.einsum("aiaj->ij", blocks)
    raise ValueError(f"keep must be 'a' or 'b', got {keep!r}")


def mutual_information(rho_ab, dim_a: int, dim_b: int,
                       eig_floor: float = 1e-12) -> float:
    """S(A) + S(B) - S(AB) in nats; nonnegative up to roundoff."""
    arr = hermitian_part(as_operator(rho_ab))
    ra = hermitian_part(partial_trace(arr, dim_a, dim_b, "a"))
    rb = hermitian_part(partial_trace(arr, dim_a, dim_b, "b"))
    return entropy(ra, eig_floor) + entropy(rb, eig_floor) - entropy(arr, eig_floor)


@dataclass(frozen=True)
class SeparabilityReport:
    constraint_mode: str
    times: tuple[float, ...]
    product_deviation: tuple[float, ...]
    energy_a: tuple[float, ...]
    energy_b: tuple[float, ...]
    mutual_information: tuple[float, ...]

    def as_dict(self) -> dict:
        return {
            "constraint_mode": self.constraint_mode,
            "times": list(self.times),
            "product_deviation": list(self.product_deviation),
            "energy_a": list(self.energy_a),
            "energy_b": list(self.energy_b),
            "mutual_information": list(self.mutual_information),
        }


CONSTRAINT_MODES = ("total-energy", "per-subsystem-energy")


def separability_probe(scen_a: ScenarioConfig, scen_b: ScenarioConfig,
                       constraint_mode: str, t_final: float) -> SeparabilityReport:
    """Composite run of noninteracting parts versus their local evolutions.

    The composite carries H = H_A x I + I x H_B and starts from the product
    of the local initial states (both full rank). Reported series: trace
    norm of rho_AB - rho_A x rho_B at matched times, the subsystem energy
    expectations, and the mutual information of the composite state. The
    probe asserts nothing; the magnitudes are the output.
    """
    if constraint_mode not in CONSTRAINT_MODES:
        raise ValueError(f"constraint_mode must be one of {CONSTRAINT_MODES}, got {constraint_mode!r}")
    if t_final < 0.0:
        raise ValueError(f"t_final must be nonnegative, got {t_final!r}")
    if scen_a.hbar != scen_b.hbar:
        raise ValueError("subsystems must share hbar")
    if scen_a.tau != scen_b.tau:
        raise ValueError("subsystems must share tau")
    for label, scen in (("a", scen_a), ("b", scen_b)):
        if scen.rho0.min_eigenvalue < 1e-10:
            raise ValueError(f"subsystem {label} initial state must be full rank")
    na, nb = scen_a.dim, scen_b.dim
    ha, hb = scen_a.hamiltonian, scen_b.hamiltonian
    ia, ib = np.eye(na, dtype=complex), np.eye(nb, dtype=complex)
    h_a_emb = np.kron(ha, ib)
    h_b_emb = np.kron(ia, hb)
    h_ab = h_a_emb + h_b_emb
    rho_ab0 = hermitian_part(np.kron(scen_a.rho0.matrix, scen_b.rho0.matrix))

    if t_final == 0.0:
        dev = trace_norm(rho_ab0 - np.kron(scen_a.rho0.matrix, scen_b.rho0.matrix))
        return SeparabilityReport(
            constraint_mode, (0.0,), (dev,),
            (float(np.trace(h_a_emb @ rho_ab0).real),),
            (float(np.trace(h_b_emb @ rho_ab0).real),),
            (mutual_information(rho_ab0, na, nb),),
        )

    if constraint_mode == "total-energy":
        composite_ops = (h_ab,)
    else:
        composite_ops = (h_a_emb, h_b_emb)
    stride = t_final / 100.0
    composite = ScenarioConfig(
        hamiltonian=h_ab,
        rho0=DensityState.from_matrix(rho_ab0),
        tau=scen_a.tau,
        constraint_ops=composite_ops,
        hbar=scen_a.hbar,
        t_final=t_final,
        dt_init=scen_a.dt_init,
        rel_tol=scen_a.rel_tol,
        abs_tol=scen_a.abs_tol,
        eig_floor=scen_a.eig_floor,
        output_stride=stride,
        detect_equilibrium=False,
    )
    local_a = with_updates(scen_a, t_final=t_final, output_stride=stride,
                           detect_equilibrium=False)
    local_b = with_updates(scen_b, t_final=t_final, output_stride=stride,
                           detect_equilibrium=False)
    traj_ab = integrate(composite)
    traj_a = integrate(local_a)
    traj_b = integrate(local_b)
    if not (len(traj_ab.points) == len(traj_a.points) == len(traj_b.points)):
        raise RuntimeError("probe trajectories ended on different grids")
    times, dev, ea, eb, mi = [], [], [], [], []
    for pab, pa, pb in zip(traj_ab.points, traj_a.points, traj_b.points):
        m_ab = pab.state.matrix
        times.append(pab.t)
        dev.append(trace_norm(m_ab - np.kron(pa.state.matrix, pb.state.matrix)))
        ea.append(float(np.trace(h_a_emb @ m_ab).real))
        eb.append(float(np.trace(h_b_emb @ m_ab).real))
        mi.append(mutual_information(m_ab, na, nb))
    return SeparabilityReport(constraint_mode, tuple(times), tuple(dev),
                              tuple(ea), tuple(eb), tuple(mi))
