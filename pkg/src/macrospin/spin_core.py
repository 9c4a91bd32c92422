"""Exact spin-j linear algebra: Dicke basis, angular-momentum operators,
coherent states and rotations, numerically stable up to very large j.

All states live in the ordered Dicke basis ``m = -j .. j`` (index ``k = m + j``,
so ``k = 0`` is the bottom state ``|m=-j>``).  Half-integer spins are stored as
the integer ``2j`` so indices stay exact.  Coherent-state amplitudes are built
in natural-log space because ``binom(2j, j+m)`` overflows and ``cos^(j+m)``
underflows long before ``j ~ 1e3``.

Azimuth convention: the coherent state ``|theta, phi>`` implemented here is the
maximal eigenstate of ``J . n(theta, phi)`` with the standard ladder operators
(``[Jx, Jy] = i Jz``), which fixes the relative phases to ``exp(-i m phi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

NORM_ATOL = 1e-12
HERM_ATOL = 1e-12
TRACE_ATOL = 1e-12


@dataclass(frozen=True)
class SpinJ:
    """Total spin j, stored as the exact integer 2j."""

    twice_j: int

    def __post_init__(self):
        if not isinstance(self.twice_j, (int, np.integer)) or self.twice_j < 0:
            raise ValueError(f"twice_j must be a non-negative integer, got {self.twice_j!r}")
        object.__setattr__(self, "twice_j", int(self.twice_j))

    @classmethod
    def from_j(cls, j: float) -> "SpinJ":
        twice = round(2 * j)
        if abs(2 * j - twice) > 1e-9:
            raise ValueError(f"j must be integer or half-integer, got {j}")
        return cls(twice)

    @property
    def j(self) -> float:
        return self.twice_j / 2.0

    @property
    def dim(self) -> int:
        return self.twice_j + 1

    def m_values(self) -> np.ndarray:
        """Eigenvalues of Jz in basis order, m = -j .. j."""
        return np.arange(self.dim) - self.j


@dataclass(frozen=True)
class Direction:
    """Point on the unit sphere, theta in [0, pi], phi in [0, 2*pi)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))
        object.__setattr__(self, "theta", float(self.theta))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        r = np.linalg.norm(v)
        if r == 0.0:
            raise ValueError("zero vector has no direction")
        theta = math.acos(min(1.0, max(-1.0, v[2] / r)))
        phi = math.atan2(v[1], v[0])
        return cls(theta, phi)

    def unit_vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def angle_to(self, other: "Direction") -> float:
        """Great-circle angle between the two directions."""
        c = float(np.dot(self.unit_vector(), other.unit_vector()))
        return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class LogAmplitude:
    """Complex amplitude in polar-log form, exp(log_magnitude) * e^{i*phase}.

    Keeps coherent-state amplitudes representable when their magnitudes scale
    like 2^(-j); log_magnitude = -inf encodes an exact zero.
    """

    log_magnitude: float
    phase: float

    @property
    def value(self) -> complex:
        return math.exp(self.log_magnitude) * complex(math.cos(self.phase), math.sin(self.phase))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    """Normalized spin-j ket; amplitudes[k] multiplies |m = k - j>."""

    j: SpinJ
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.j.dim,):
            raise ValueError(f"expected {self.j.dim} amplitudes, got shape {amps.shape}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state not normalized: |norm - 1| = {abs(norm - 1.0):.3e}")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.j, np.outer(self.amplitudes, self.amplitudes.conj()))

    @classmethod
    def basis_state(cls, j: SpinJ, k: int) -> "PureState":
        amps = np.zeros(j.dim, dtype=complex)
        amps[k] = 1.0
        return cls(j, amps)


@dataclass(frozen=True)
class DensityOperator:
    """Spin-j density matrix: Hermitian, unit trace.

    Positivity is not checked at construction (an O(dim^3) eigensolve);
    call validate_psd() where it matters.
    """

    j: SpinJ
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.j.dim, self.j.dim):
            raise ValueError(f"expected shape {(self.j.dim, self.j.dim)}, got {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if float(np.abs(m - m.conj().T).max()) > HERM_ATOL * scale:
            raise ValueError("matrix is not Hermitian within tolerance")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > TRACE_ATOL:
            raise ValueError(f"trace must be 1, got {tr}")
        object.__setattr__(self, "matrix", _freeze(m))

    @classmethod
    def maximally_mixed(cls, j: SpinJ) -> "DensityOperator":
        return cls(j, np.eye(j.dim, dtype=complex) / j.dim)

    def validate_psd(self, atol: float = 1e-10) -> None:
        lo = float(np.linalg.eigvalsh(self.matrix)[0])
        if lo < -atol:
            raise ValueError(f"density operator has eigenvalue {lo:.3e} < -{atol:.0e}")


@dataclass(frozen=True)
class SpinOperator:
    j: SpinJ
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.j.dim, self.j.dim):
            raise ValueError(f"expected shape {(self.j.dim, self.j.dim)}, got {m.shape}")
        object.__setattr__(self, "matrix", _freeze(m))

    def is_hermitian(self, atol: float = 1e-10) -> bool:
        scale = max(1.0, float(np.abs(self.matrix).max()))
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) <= atol * scale


def _as_spin(j) -> SpinJ:
    if isinstance(j, SpinJ):
        return j
    return SpinJ.from_j(j)


def raising_coefficients(j: SpinJ) -> np.ndarray:
    """<m+1| J+ |m> = sqrt(j(j+1) - m(m+1)) for m = -j .. j-1."""
    m = j.m_values()[:-1]
    return np.sqrt(j.j * (j.j + 1.0) - m * (m + 1.0))


def jz_operator(j: SpinJ) -> SpinOperator:
    """Jz = sum_m m |m><m| (hbar = 1)."""
    j = _as_spin(j)
    return SpinOperator(j, np.diag(j.m_values()).astype(complex))


def jplus_operator(j: SpinJ) -> SpinOperator:
    j = _as_spin(j)
    mat = np.zeros((j.dim, j.dim), dtype=complex)
    alpha = raising_coefficients(j)
    mat[np.arange(1, j.dim), np.arange(j.dim - 1)] = alpha
    return SpinOperator(j, mat)


def jx_operator(j: SpinJ) -> SpinOperator:
    jp = jplus_operator(j).matrix
    return SpinOperator(_as_spin(j), (jp + jp.conj().T) / 2.0)


def jy_operator(j: SpinJ) -> SpinOperator:
    jp = jplus_operator(j).matrix
    return SpinOperator(_as_spin(j), (jp - jp.conj().T) / 2.0j)


def j_omega_operator(j: SpinJ, direction: Direction) -> SpinOperator:
    """Spin component along direction: sin(t)cos(p) Jx + sin(t)sin(p) Jy + cos(t) Jz."""
    j = _as_spin(j)
    n = direction.unit_vector()
    mat = n[0] * jx_operator(j).matrix + n[1] * jy_operator(j).matrix + n[2] * jz_operator(j).matrix
    return SpinOperator(j, mat)


# ---------------------------------------------------------------------------
# coherent states


def coherent_log_magnitudes(j: SpinJ, theta: float) -> np.ndarray:
    """log of |<m|theta,phi>| for k = 0..2j; -inf marks exact zeros.

    log r_k = 0.5*log binom(2j, k) + k*log cos(theta/2) + (2j-k)*log sin(theta/2)
    with the theta in {0, pi} limits handled by an explicit branch (a single
    surviving amplitude), so no 0 * (-inf) arises.
    """
    j = _as_spin(j)
    n = j.twice_j
    out = np.full(j.dim, -np.inf)
    if theta == 0.0:
        out[n] = 0.0
        return out
    if theta == math.pi:
        out[0] = 0.0
        return out
    k = np.arange(j.dim)
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    out = 0.5 * log_binom + k * math.log(math.cos(theta / 2.0)) + (n - k) * math.log(math.sin(theta / 2.0))
    return out


def coherent_log_amplitudes(j: SpinJ, direction: Direction) -> list[LogAmplitude]:
    """Coherent-state amplitudes in underflow-safe polar-log form, k = 0..2j."""
    j = _as_spin(j)
    logs = coherent_log_magnitudes(j, direction.theta)
    return [
        LogAmplitude(float(lm), float(-m * direction.phi))
        for lm, m in zip(logs, j.m_values())
    ]


def coherent_state(j: SpinJ, direction: Direction) -> PureState:
    """Spin coherent state |Omega>: maximal eigenstate of J.n(Omega).

    Amplitude of |m>: binom(2j, j+m)^(1/2) cos^(j+m)(t/2) sin^(j-m)(t/2) e^{-im p}.
    Magnitudes are exponentiated from log space and renormalized, so the
    construction holds up to 2j of a few 1e4 without degrading.
    """
    j = _as_spin(j)
    mags = np.exp(coherent_log_magnitudes(j, direction.theta))
    mags /= np.linalg.norm(mags)
    m = j.m_values()
    return PureState(j, mags * np.exp(-1j * m * direction.phi))


def coherent_overlap(j: SpinJ, a: Direction, b: Direction) -> LogAmplitude:
    """<Omega_a|Omega_b> in log form, exact for arbitrarily large j.

    A spin-j coherent state is the symmetric 2j-fold tensor power of the
    spin-1/2 one, so the overlap is the spin-1/2 overlap raised to 2j; the
    half-spin overlap is O(1) and free of cancellation.
    """
    j = _as_spin(j)
    dphi = b.phi - a.phi
    z = (
        math.cos(a.theta / 2.0) * math.cos(b.theta / 2.0) * complex(math.cos(dphi / 2.0), -math.sin(dphi / 2.0))
        + math.sin(a.theta / 2.0) * math.sin(b.theta / 2.0) * complex(math.cos(dphi / 2.0), math.sin(dphi / 2.0))
    )
    mag = abs(z)
    if mag == 0.0:
        return LogAmplitude(-math.inf, 0.0)
    return LogAmplitude(j.twice_j * math.log(mag), j.twice_j * math.atan2(z.imag, z.real))


def overlap(a: PureState, b: PureState) -> complex:
    """Inner product <a|b>."""
    if a.j != b.j:
        raise ValueError(f"dimension mismatch: 2j = {a.j.twice_j} vs {b.j.twice_j}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2 — the phase-insensitive comparison used throughout."""
    return abs(overlap(a, b)) ** 2


# ---------------------------------------------------------------------------
# rotations


def wigner_d_matrix(j: SpinJ, beta: float) -> np.ndarray:
    """Wigner small-d matrix d^j_{m'm}(beta), indexed [j+m', j+m].

    Built by Risbo's coupling recursion: the spin-(n+1)/2 matrix is assembled
    from the spin-n/2 one and the half-spin rotation with non-amplifying
    Clebsch-Gordan weights, one unit of 2j at a time.  Stable for band limits
    far beyond anything needed here, and handles half-integer j natively.
    """
    j = _as_spin(j)
    c = math.cos(beta / 2.0)
    s = math.sin(beta / 2.0)
    d = np.array([[1.0]])
    for n_new in range(1, j.twice_j + 1):
        up = np.sqrt(np.arange(1, n_new + 1) / n_new)
        dn = np.sqrt((n_new - np.arange(0, n_new)) / n_new)
        dd = np.zeros((n_new + 1, n_new + 1))
        dd[1:, 1:] += c * (up[:, None] * up[None, :]) * d
        dd[1:, :-1] -= s * (up[:, None] * dn[None, :]) * d
        dd[:-1, 1:] += s * (dn[:, None] * up[None, :]) * d
        dd[:-1, :-1] += c * (dn[:, None] * dn[None, :]) * d
        d = dd
    return d


@lru_cache(maxsize=32)
def _cached_d_matrix(twice_j: int, beta: float) -> np.ndarray:
    return _freeze(wigner_d_matrix(SpinJ(twice_j), beta))


def rotation_matrix(j: SpinJ, direction: Direction) -> np.ndarray:
    """Unitary taking the +z axis to `direction`.

    Tilt by theta about the axis at azimuth phi + pi/2, i.e.
    exp(-i phi Jz) exp(-i theta Jy) exp(+i phi Jz); the identity exactly when
    theta = 0.  Columns are the rotated Dicke states.
    """
    j = _as_spin(j)
    d = _cached_d_matrix(j.twice_j, direction.theta)
    phase = np.exp(-1j * j.m_values() * direction.phi)
    return (phase[:, None] * d) * phase.conj()[None, :]


def rotate(state: PureState, direction: Direction) -> PureState:
    """Apply the rotation taking +z to `direction` (Wigner machinery)."""
    amps = rotation_matrix(state.j, direction) @ state.amplitudes
    return PureState(state.j, amps)


# ---------------------------------------------------------------------------
# expectation values


def expectation(rho, op: SpinOperator) -> float:
    """Born-rule mean value Tr(rho op) for a Hermitian observable."""
    if isinstance(rho, PureState):
        rho = rho.density()
    if rho.j != op.j:
        raise ValueError(f"dimension mismatch: 2j = {rho.j.twice_j} vs {op.j.twice_j}")
    if not op.is_hermitian():
        raise ValueError("expectation requires a Hermitian operator")
    val = complex(np.einsum("ij,ji->", rho.matrix, op.matrix))
    scale = max(1.0, abs(val))
    if abs(val.imag) > 1e-10 * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return val.real


def spin_expectation_vector(state) -> np.ndarray:
    """(<Jx>, <Jy>, <Jz>) in O(dim), using the ladder structure."""
    if isinstance(state, PureState):
        j = state.j
        amps = state.amplitudes
        alpha = raising_coefficients(j)
        jplus = complex(np.sum(amps[1:].conj() * alpha * amps[:-1]))
        jz = float(np.sum(np.abs(amps) ** 2 * j.m_values()))
    else:
        j = state.j
        alpha = raising_coefficients(j)
        # Tr(rho J+) = sum_k alpha_k rho[k, k+1]
        jplus = complex(np.sum(alpha * np.diagonal(state.matrix, offset=1)))
        jz = float(np.sum(np.real(np.diagonal(state.matrix)) * j.m_values()))
    return np.array([jplus.real, jplus.imag, jz])


# ---------------------------------------------------------------------------
# random states (seeded helpers for tests and sweeps)


def random_pure(j: SpinJ, rng: np.random.Generator) -> PureState:
    j = _as_spin(j)
    v = rng.standard_normal(j.dim) + 1j * rng.standard_normal(j.dim)
    return PureState(j, v / np.linalg.norm(v))


def random_density(j: SpinJ, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random full-rank (or rank-limited) mixed state, Wishart-style."""
    j = _as_spin(j)
    r = j.dim if rank is None else rank
    a = rng.standard_normal((j.dim, r)) + 1j * rng.standard_normal((j.dim, r))
    m = a @ a.conj().T
    m /= np.trace(m).real
    m = (m + m.conj().T) / 2.0
    return DensityOperator(j, m)


def random_direction(rng: np.random.Generator) -> Direction:
    return Direction(math.acos(rng.uniform(-1.0, 1.0)), rng.uniform(0.0, 2.0 * math.pi))
