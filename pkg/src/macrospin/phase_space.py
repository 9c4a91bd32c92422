"""Sphere quadrature and phase-space maps: Husimi Q, quasi-diagonal P,
state multipoles, and distances between distributions.

Every phase-space function of a spin-j state is exactly band-limited at
spherical-harmonic degree 2j, so quadrature here is exact rather than
approximate: Gauss-Legendre in cos(theta) times a uniform azimuthal rule.
Grids may optionally be split at prescribed cos(theta) breakpoints ("banded"
grids) so that integrals over polar bands are themselves exact; every node
then lies strictly inside one band.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import eval_legendre, roots_legendre, sph_harm_y

from .spin_core import DensityOperator, PureState, SpinJ, coherent_log_magnitudes, jplus_operator

FOUR_PI = 4.0 * math.pi

# rows per matmul block when evaluating maps (keeps temporaries ~tens of MB)
_CHUNK_ROWS = 8192


@dataclass(frozen=True)
class SphereGrid:
    """Product quadrature on the unit sphere.

    cos_thetas are Gauss-Legendre nodes (per band when band_edges is set),
    phis are uniform; node weight = theta_weight * (2*pi / n_phi) and the
    weights sum to 4*pi.  `exact_degree` is the largest spherical-harmonic
    degree integrated exactly (to roundoff).
    """

    cos_thetas: np.ndarray
    theta_weights: np.ndarray
    phis: np.ndarray
    exact_degree: int
    band_edges: np.ndarray | None = None

    @property
    def n_theta(self) -> int:
        return self.cos_thetas.size

    @property
    def n_phi(self) -> int:
        return self.phis.size

    @property
    def n_nodes(self) -> int:
        return self.n_theta * self.n_phi

    @property
    def thetas(self) -> np.ndarray:
        return np.arccos(self.cos_thetas)

    @property
    def phi_weight(self) -> float:
        return 2.0 * math.pi / self.n_phi

    def integrate(self, values: np.ndarray) -> float:
        """Solid-angle integral of node samples (values flat or (n_theta, n_phi))."""
        v = np.asarray(values).reshape(self.n_theta, self.n_phi)
        return float(self.theta_weights @ v.sum(axis=1)) * self.phi_weight

    def node_weights(self) -> np.ndarray:
        """Flat per-node weights, theta-major; sums to 4*pi."""
        return np.repeat(self.theta_weights, self.n_phi) * self.phi_weight

    def same_nodes(self, other: "SphereGrid") -> bool:
        return (
            self.n_theta == other.n_theta
            and self.n_phi == other.n_phi
            and np.array_equal(self.cos_thetas, other.cos_thetas)
            and np.array_equal(self.phis, other.phis)
        )


def build_grid(l_max: int, cos_breaks=None) -> SphereGrid:
    """Quadrature grid exact for spherical harmonics up to degree l_max.

    Without breaks: l_max + 1 Gauss-Legendre nodes in cos(theta) (twice the
    minimum, so parity-symmetric sup tests see the equator node) and
    l_max + 1 uniform azimuthal nodes.  With breaks, each cos(theta) segment
    receives its own ceil((l_max+1)/2)-point Gauss-Legendre rule, which keeps
    the global rule exact while making per-band integrals exact too.
    """
    if l_max < 0:
        raise ValueError("l_max must be >= 0")
    n_phi = max(l_max + 1, 1)
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    if cos_breaks is None:
        x, w = roots_legendre(l_max + 1)
        return SphereGrid(x, w, phis, exact_degree=l_max)
    edges = np.concatenate(([-1.0], np.sort(np.asarray(cos_breaks, dtype=float)), [1.0]))
    if edges[0] < -1.0 or edges[-1] > 1.0:
        raise ValueError("cos breaks must lie inside [-1, 1]")
    n_per = max((l_max + 2) // 2, 1)
    x0, w0 = roots_legendre(n_per)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2.0
        xs.append(lo + half * (x0 + 1.0))
        ws.append(w0 * half)
    return SphereGrid(
        np.concatenate(xs), np.concatenate(ws), phis,
        exact_degree=min(2 * n_per - 1, l_max),
        band_edges=edges,
    )


@dataclass(frozen=True)
class QMap:
    """Husimi Q samples on a grid: non-negative, integrates to 1."""

    grid: SphereGrid
    values: np.ndarray
    j: SpinJ


@dataclass(frozen=True)
class PMap:
    """Quasi-diagonal P samples: real, normalized, not necessarily positive."""

    grid: SphereGrid
    values: np.ndarray
    j: SpinJ


# ---------------------------------------------------------------------------
# coherent-state sampling machinery


def _magnitude_table(j: SpinJ, cos_thetas: np.ndarray) -> np.ndarray:
    """|<m|Omega>| for every theta node: shape (n_theta, dim)."""
    n = j.twice_j
    k = np.arange(j.dim)
    from scipy.special import gammaln

    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    # half-angle via stable identities; grid nodes are interior so no poles
    log_c = 0.5 * np.log1p(cos_thetas)[:, None] - 0.5 * math.log(2.0)
    log_s = 0.5 * np.log1p(-cos_thetas)[:, None] - 0.5 * math.log(2.0)
    return np.exp(0.5 * log_binom[None, :] + k[None, :] * log_c + (n - k)[None, :] * log_s)


def _phi_phases(j: SpinJ, phis: np.ndarray) -> np.ndarray:
    """exp(+i m phi_k), shape (n_phi, dim): the conjugated amplitude phases."""
    return np.exp(1j * np.outer(phis, SpinJ(j.twice_j).m_values()))


def q_values_pure(j: SpinJ, grid: SphereGrid, amplitudes: np.ndarray) -> np.ndarray:
    """(2j+1)/(4pi) |<Omega|psi>|^2 per node, O(dim) per node, flat theta-major."""
    e_pos = _phi_phases(j, grid.phis)
    out = np.empty((grid.n_theta, grid.n_phi))
    scale = j.dim / FOUR_PI
    step = max(_CHUNK_ROWS // max(grid.n_phi, 1), 1)
    for t0 in range(0, grid.n_theta, step):
        t1 = min(t0 + step, grid.n_theta)
        r = _magnitude_table(j, grid.cos_thetas[t0:t1])
        ring = (r * amplitudes[None, :]) @ e_pos.T
        out[t0:t1] = scale * (ring.real**2 + ring.imag**2)
    return out.reshape(-1)


def q_values_operator(
    j: SpinJ, grid: SphereGrid, matrix: np.ndarray, support: slice | None = None
) -> np.ndarray:
    """(2j+1)/(4pi) <Omega| O |Omega> per node for a Hermitian operator block.

    With `support`, `matrix` is the sub-block on those basis indices and the
    rest of the operator is taken to be zero — the natural shape for slot-
    projected states.
    """
    sl = support if support is not None else slice(0, j.dim)
    m_vals = j.m_values()[sl]
    e_neg = np.exp(-1j * np.outer(grid.phis, m_vals))
    out = np.empty((grid.n_theta, grid.n_phi))
    scale = j.dim / FOUR_PI
    step = max(_CHUNK_ROWS // max(grid.n_phi, 1), 1)
    for t0 in range(0, grid.n_theta, step):
        t1 = min(t0 + step, grid.n_theta)
        r = _magnitude_table(j, grid.cos_thetas[t0:t1])[:, sl]
        # rows = all (theta, phi) nodes in the chunk
        a = (r[:, None, :] * e_neg[None, :, :]).reshape(-1, m_vals.size)
        b = a @ matrix.T
        out[t0:t1] = np.einsum("nd,nd->n", a.conj(), b).real.reshape(t1 - t0, grid.n_phi) * scale
    return out.reshape(-1)


def q_function(state, grid: SphereGrid) -> QMap:
    """Husimi Q = (2j+1)/(4pi) <Omega|rho|Omega> sampled on the grid."""
    j = state.j
    if grid.exact_degree < j.twice_j:
        warnings.warn(
            f"grid exact to degree {grid.exact_degree} < 2j = {j.twice_j}: "
            "Q normalization will not be exact",
            stacklevel=2,
        )
    if isinstance(state, PureState):
        values = q_values_pure(j, grid, state.amplitudes)
    else:
        values = q_values_operator(j, grid, state.matrix)
    return QMap(grid, values, j)


def q_distance(a: QMap, b: QMap, metric: str = "L1") -> float:
    """L1 (solid-angle integral of |a-b|) or sup (max node gap) distance."""
    if a.j != b.j or not a.grid.same_nodes(b.grid):
        raise ValueError("QMaps must share a grid")
    diff = np.abs(a.values - b.values)
    if metric == "L1":
        return a.grid.integrate(diff)
    if metric == "sup":
        return float(diff.max())
    raise ValueError(f"unknown metric {metric!r} (want 'L1' or 'sup')")


# ---------------------------------------------------------------------------
# state multipoles and the P-function


@dataclass(frozen=True)
class MultipoleCoeffs:
    """rho_LM = Tr(rho T_LM^dagger) for the orthonormal spherical tensors T_LM."""

    j: SpinJ
    coefficients: tuple  # coefficients[L] is a complex array indexed M + L

    def get(self, L: int, M: int) -> complex:
        return complex(self.coefficients[L][M + L])


@lru_cache(maxsize=4)
def _tensor_basis(twice_j: int):
    """Orthonormal spherical tensor operators T_LM, L = 0..2j, M = -L..L.

    T_LL is proportional to (-J+)^L; lower components follow from
    T_{L,M-1} = [J-, T_LM] / sqrt(L(L+1) - M(M-1)).  Orthonormal in the
    Hilbert-Schmidt inner product.
    """
    j = SpinJ(twice_j)
    jp = jplus_operator(j).matrix
    jm = jp.conj().T
    basis = []
    power = np.eye(j.dim, dtype=complex)
    for L in range(twice_j + 1):
        if L > 0:
            power = jp @ power
        top = (-1.0) ** L * power
        top = top / np.linalg.norm(top)
        comps = [None] * (2 * L + 1)
        comps[2 * L] = top
        for M in range(L, -L, -1):
            factor = math.sqrt(L * (L + 1.0) - M * (M - 1.0))
            comps[M - 1 + L] = (jm @ comps[M + L] - comps[M + L] @ jm) / factor
        basis.append(tuple(c.copy() for c in comps))
    return tuple(basis)


def state_multipoles(rho: DensityOperator) -> MultipoleCoeffs:
    """Expansion coefficients of rho over the spherical tensor basis."""
    basis = _tensor_basis(rho.j.twice_j)
    coeffs = tuple(
        np.array([np.vdot(t, rho.matrix) for t in comps]) for comps in basis
    )
    return MultipoleCoeffs(rho.j, coeffs)


def multipole_reconstruct(coeffs: MultipoleCoeffs) -> np.ndarray:
    """Sum rho_LM T_LM; inverse of state_multipoles up to roundoff."""
    basis = _tensor_basis(coeffs.j.twice_j)
    out = np.zeros((coeffs.j.dim, coeffs.j.dim), dtype=complex)
    for comps, cs in zip(basis, coeffs.coefficients):
        for t, c in zip(comps, cs):
            out += c * t
    return out


@lru_cache(maxsize=4)
def _projector_multipole_factors(twice_j: int) -> tuple:
    """g_LM with <Omega|T_LM|Omega> = g_LM * Y_LM(Omega).

    Computed by quadrature projection rather than closed form, so the result
    is consistent with scipy's Y_LM phase convention by construction.  The
    factors fall combinatorially in L, which is what makes the P inversion
    ill-conditioned at large j.
    """
    j = SpinJ(twice_j)
    basis = _tensor_basis(twice_j)
    # degree of P_L^M(x) * h_LM(x) is <= 2j + L <= 4j
    x, w = roots_legendre(2 * twice_j + 1)
    r2 = _magnitude_table(j, x) ** 2
    thetas = np.arccos(x)
    out = []
    for L in range(twice_j + 1):
        g_row = np.empty(2 * L + 1)
        for M in range(-L, L + 1):
            t_diag = np.diagonal(basis[L][M + L], offset=-M)
            # h_LM(theta) = sum_k r_{k+M} r_k t_k  (phases cancel against e^{iM phi})
            lo = max(0, -M)
            k = np.arange(t_diag.size) + lo
            h = (r2[:, k + M] * r2[:, k]) ** 0.5 @ t_diag
            y = sph_harm_y(L, M, thetas, 0.0).real
            g_row[M + L] = 2.0 * math.pi * float(np.sum(w * y * h.real))
        out.append(g_row)
    return tuple(out)


def p_function(rho: DensityOperator, grid: SphereGrid, j_cap: float = 20.0) -> PMap:
    """Quasi-diagonal P with rho = integral of P(Omega) |Omega><Omega| d2Omega.

    Spherical-harmonic coefficients of P are the state multipoles divided by
    the coherent-projector factors g_L; capped at j <= j_cap because those
    factors decay combinatorially in L and amplify rounding noise.  Round
    trips through state_from_p are at rounding level for j <= 5 and within
    ~1e-10 at j = 10; accuracy then degrades steadily toward the cap.
    """
    j = rho.j
    if j.twice_j > round(2 * j_cap):
        raise ValueError(f"p_function is capped at j <= {j_cap} (got j = {j.j}); raise j_cap to override")
    coeffs = state_multipoles(rho)
    g = _projector_multipole_factors(j.twice_j)
    thetas = grid.thetas
    # Hermiticity of rho pairs the +-M terms into 2 Re(c Y_LM), so P is
    # assembled as an explicitly real sum.
    vals = np.zeros((grid.n_theta, grid.n_phi))
    for L in range(j.twice_j + 1):
        y0 = sph_harm_y(L, 0, thetas, 0.0).real
        vals += (coeffs.get(L, 0).real / g[L][L]) * y0[:, None]
        for M in range(1, L + 1):
            c = coeffs.get(L, M) / g[L][M + L]
            theta_part = sph_harm_y(L, M, thetas, 0.0).real
            vals += 2.0 * np.real(c * np.outer(theta_part, np.exp(1j * M * grid.phis)))
    return PMap(grid, vals.reshape(-1), j)


def state_from_p(p: PMap) -> DensityOperator:
    """Quadrature of P(Omega) |Omega><Omega| over the map's grid."""
    j = p.j
    if p.grid.exact_degree < 2 * j.twice_j:
        raise ValueError(
            f"grid exact to degree {p.grid.exact_degree} is too coarse: "
            f"reconstruction needs 4j = {2 * j.twice_j}"
        )
    grid = p.grid
    e_neg = np.exp(-1j * np.outer(grid.phis, j.m_values()))
    wp = (p.values.reshape(grid.n_theta, grid.n_phi) * grid.theta_weights[:, None]) * grid.phi_weight
    out = np.zeros((j.dim, j.dim), dtype=complex)
    for t0 in range(0, grid.n_theta, 256):
        t1 = min(t0 + 256, grid.n_theta)
        r = _magnitude_table(j, grid.cos_thetas[t0:t1])
        a = (r[:, None, :] * e_neg[None, :, :]).reshape(-1, j.dim)
        out += (a.T * wp[t0:t1].reshape(-1)) @ a.conj()
    out = (out + out.conj().T) / 2.0
    tr = float(np.trace(out).real)
    if abs(tr - 1.0) > 1e-4:
        raise ValueError(f"reconstructed trace {tr} deviates from 1; P map is not normalized")
    # divide out the quadrature roundoff so the type invariant (1e-12) holds
    return DensityOperator(j, out / tr)


# ---------------------------------------------------------------------------
# serialization


def write_map_csv(qmap, path) -> None:
    """CSV with header theta,phi,weight,value — one row per node, radians."""
    grid = qmap.grid
    values = qmap.values.reshape(grid.n_theta, grid.n_phi)
    thetas = grid.thetas
    with open(path, "w", newline="") as fh:
        fh.write("theta,phi,weight,value\n")
        for i in range(grid.n_theta):
            w = grid.theta_weights[i] * grid.phi_weight
            for k in range(grid.n_phi):
                fh.write(
                    f"{thetas[i]:.17g},{grid.phis[k]:.17g},{w:.17g},{values[i, k]:.17g}\n"
                )
