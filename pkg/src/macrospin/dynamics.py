"""Precession under linear-in-J generators, the Newtonian oracle,
trajectories with interleaved coarse measurements, and Leggett-Garg
temporal correlators.

The only Hamiltonians here are H = omega * (axis . J), whose propagator is an
exact SU(2) rotation — no integrator, no time-stepping error budget.  The
classical comparison law is dS/dt = omega (axis x S), solved in closed form
by the Rodrigues rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spin_core import (
    DensityOperator,
    Direction,
    PureState,
    SpinJ,
    rotation_matrix,
    spin_expectation_vector,
)
from .coarse_grain import SlotPartition, exact_slot_probs, luders_update, nonselective_update, sample_slot

MODES = ("unitary", "nonselective", "selective")


@dataclass(frozen=True)
class PrecessionSpec:
    """Rotation axis (unit 3-vector) and angular frequency omega."""

    axis: np.ndarray
    omega: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        if axis.shape != (3,):
            raise ValueError("axis must be a 3-vector")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, |axis| = {np.linalg.norm(axis)}")
        axis = axis.copy()
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "omega", float(self.omega))


@lru_cache(maxsize=16)
def _axis_frame(twice_j: int, ax: float, ay: float, az: float) -> np.ndarray:
    """Unitary F with F Jz F^dag = axis . J (columns = axis-frame Dicke states)."""
    direction = Direction.from_vector(np.array([ax, ay, az]))
    return rotation_matrix(SpinJ(twice_j), direction)


def evolution_operator(j: SpinJ, spec: PrecessionSpec, t: float) -> np.ndarray:
    """U(t) = exp(-i omega t axis.J) = F exp(-i omega t Jz) F^dag."""
    f = _axis_frame(j.twice_j, *spec.axis)
    phases = np.exp(-1j * spec.omega * t * j.m_values())
    return (f * phases[None, :]) @ f.conj().T


def evolve(state, spec: PrecessionSpec, t: float):
    """Propagate a PureState or DensityOperator for time t (exact rotation)."""
    j = state.j
    if isinstance(state, PureState):
        f = _axis_frame(j.twice_j, *spec.axis)
        phases = np.exp(-1j * spec.omega * t * j.m_values())
        return PureState(j, f @ (phases * (f.conj().T @ state.amplitudes)))
    u = evolution_operator(j, spec, t)
    return DensityOperator(j, u @ state.matrix @ u.conj().T)


def classical_trajectory(s0, spec: PrecessionSpec, times) -> np.ndarray:
    """Newtonian precession dS/dt = omega (axis x S): rigid Rodrigues rotation
    of the unit vector s0 by omega*t about the axis, one row per time."""
    s0 = np.asarray(s0, dtype=float)
    if abs(np.linalg.norm(s0) - 1.0) > 1e-12:
        raise ValueError("initial spin direction must be a unit vector")
    n = spec.axis
    angles = spec.omega * np.asarray(times, dtype=float)
    para = np.outer(np.full(angles.size, np.dot(n, s0)), n)
    perp = s0 - para[0]
    cross = np.cross(n, s0)
    return para + np.outer(np.cos(angles), perp) + np.outer(np.sin(angles), cross)


@dataclass
class TrajectoryRecord:
    """Quantum expectation direction vs the classical oracle, per time.

    Degenerate points (|<J>| = 0, direction undefined) carry NaN directions;
    the trajectory continues past them.
    """

    times: np.ndarray
    quantum_dir: np.ndarray  # (n, 3) unit vectors
    quantum_len: np.ndarray  # |<J>| / j
    classical_dir: np.ndarray  # (n, 3) unit vectors
    slot_outcomes: list | None = None

    def angle_errors(self) -> np.ndarray:
        """Angle (radians) between quantum and classical directions, per time.

        Uses 2*arcsin(chord/2), which stays accurate down to ~1e-15 rad where
        arccos of the dot product floors out at sqrt(eps)."""
        chord = np.linalg.norm(self.quantum_dir - self.classical_dir, axis=1)
        return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))

    def write_csv(self, path) -> None:
        """CSV: t,qx,qy,qz,qlen,cx,cy,cz,angle_err_rad[,slot]."""
        errs = self.angle_errors()
        with_slots = self.slot_outcomes is not None
        header = "t,qx,qy,qz,qlen,cx,cy,cz,angle_err_rad" + (",slot" if with_slots else "")
        with open(path, "w", newline="") as fh:
            fh.write(header + "\n")
            for i, t in enumerate(self.times):
                row = [t, *self.quantum_dir[i], self.quantum_len[i], *self.classical_dir[i], errs[i]]
                line = ",".join(f"{v:.17g}" for v in row)
                if with_slots:
                    line += f",{self.slot_outcomes[i]}"
                fh.write(line + "\n")


def quantum_trajectory(
    psi0,
    spec: PrecessionSpec,
    times,
    part: SlotPartition | None = None,
    mode: str = "unitary",
    rng: np.random.Generator | None = None,
) -> TrajectoryRecord:
    """Alternate exact precession steps with the chosen measurement at each
    time in `times` (the first entry included), recording the <J> direction.

    The classical oracle starts from the quantum direction at the first
    recorded time, so the comparison is trajectory-level.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-empty and strictly increasing")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode != "unitary":
        if part is None:
            raise ValueError(f"{mode} mode requires a slot partition")
        if mode == "selective" and rng is None:
            raise ValueError("selective mode requires a seeded random stream")

    j = psi0.j
    state = psi0 if mode == "unitary" else _as_density(psi0)
    dirs = np.empty((times.size, 3))
    lens = np.empty(times.size)
    slots: list | None = [] if mode == "selective" else None

    prev_t = None
    for i, t in enumerate(times):
        if prev_t is not None:
            state = evolve(state, spec, t - prev_t)
        prev_t = t
        if mode == "nonselective":
            state = nonselective_update(state, part)
        elif mode == "selective":
            mbar, state = sample_slot(state, part, rng)
            slots.append(mbar)
        vec = spin_expectation_vector(state)
        norm = float(np.linalg.norm(vec))
        lens[i] = norm / j.j if j.j > 0 else 0.0
        dirs[i] = vec / norm if norm > 1e-14 * max(j.j, 1.0) else np.full(3, np.nan)

    classical = classical_trajectory(dirs[0], spec, times - times[0])
    return TrajectoryRecord(times, dirs, lens, classical, slots)


def _as_density(state) -> DensityOperator:
    return state.density() if isinstance(state, PureState) else state


# ---------------------------------------------------------------------------
# Leggett-Garg


@dataclass(frozen=True)
class LgResult:
    """Two-time correlators of the dichotomized slot observable and
    K = C12 + C23 - C13."""

    omega_tau: float
    c12: float
    c23: float
    c13: float

    @property
    def K(self) -> float:
        return self.c12 + self.c23 - self.c13


def _two_time_correlator(rho0: DensityOperator, spec: PrecessionSpec, part: SlotPartition, ta: float, tb: float) -> float:
    """<s(ta) s(tb)> by exact enumeration: Lüders-collapse on every slot at
    ta, precess to tb, weigh the slot signs by the joint probabilities."""
    rho_a = evolve(rho0, spec, ta)
    probs_a = exact_slot_probs(rho_a, part).probabilities
    signs = np.array([part.dichotomic_sign(n) for n in range(part.n_slots)])
    total = 0.0
    for mbar in range(part.n_slots):
        if probs_a[mbar] <= 1e-14:
            continue
        reduced, prob = luders_update(rho_a, part, mbar)
        probs_b = exact_slot_probs(evolve(reduced, spec, tb - ta), part).probabilities
        total += prob * signs[mbar] * float(signs @ probs_b)
    return total


def lg_correlator(
    j: SpinJ,
    spec: PrecessionSpec,
    tau: float,
    part: SlotPartition,
    rho0: DensityOperator | None = None,
) -> LgResult:
    """K = C12 + C23 - C13 for measurements at t = 0, tau, 2*tau.

    Each correlator comes from its own two-measurement experiment (nothing is
    measured at the skipped time), computed exactly — no sampling.  Default
    initial state is the maximally mixed one.
    """
    if part.n_slots < 2:
        raise ValueError("Leggett-Garg needs at least 2 slots")
    if rho0 is None:
        rho0 = DensityOperator.maximally_mixed(j)
    c12 = _two_time_correlator(rho0, spec, part, 0.0, tau)
    c23 = _two_time_correlator(rho0, spec, part, tau, 2.0 * tau)
    c13 = _two_time_correlator(rho0, spec, part, 0.0, 2.0 * tau)
    return LgResult(spec.omega * tau, c12, c23, c13)


def write_lg_csv(path, results, delta_m: int) -> None:
    """CSV: omega_tau,delta_m,c12,c23,c13,K."""
    with open(path, "w", newline="") as fh:
        fh.write("omega_tau,delta_m,c12,c23,c13,K\n")
        for r in results:
            fh.write(
                f"{r.omega_tau:.17g},{delta_m},{r.c12:.17g},{r.c23:.17g},{r.c13:.17g},{r.K:.17g}\n"
            )
