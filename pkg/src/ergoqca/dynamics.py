"""Forward operator F, the Hamiltonian F + F^dagger, and exact time averages.

Two representations are built.  The *reduced* one indexes states by
``(config, winding)``: starting from a basis state the data register is
fully determined by the clock wall and the number of completed wraps, so F
acts as the weighted move graph.  The *full* one applies every clock/data
term of F bit by bit on a sparse state and is used as an oracle for the
reduced model on small cylinders.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import gates
from .errors import SizeGuardError, SpectralError, ValidityError
from .lattice import (
    ClockConfig,
    Dims,
    base_winding,
    check_config,
    forward_moves,
    lattice,
)

KERNEL_TOL = 1e-12
FULL_MODE_MAX_CELLS = 16


# ------------------------------------------------------------ reduced model


@dataclass(frozen=True)
class ReducedSpace:
    """Index bookkeeping for ``(config, winding)`` with winding modulus ``M``."""

    dims: Dims
    M: int = 2

    @property
    def n_configs(self) -> int:
        return len(lattice(self.dims).configs)

    @property
    def dim(self) -> int:
        return self.n_configs * self.M

    @property
    def N(self) -> int:
        return self.M * self.dims.g

    def index(self, config_index: int, winding: int) -> int:
        return (winding % self.M) * self.n_configs + config_index

    def split(self, i: int) -> tuple[int, int]:
        return i % self.n_configs, i // self.n_configs

    def index_of(self, a: ClockConfig, winding: int | None = None) -> int:
        """Reduced index of ``a``; by default at the winding of its canonical lift."""
        check_config(a, self.dims)
        if winding is None:
            winding = base_winding(a, self.dims)
        return self.index(lattice(self.dims).index[a.front], winding)

    @cached_property
    def grades(self) -> np.ndarray:
        counts = np.asarray(lattice(self.dims).counts)
        return np.concatenate([counts + self.dims.g * w for w in range(self.M)])

    def basis_vector(self, i: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[i] = 1.0
        return v


@dataclass(frozen=True)
class ReducedF:
    space: ReducedSpace
    matrix: sp.csr_matrix

    @property
    def dims(self) -> Dims:
        return self.space.dims

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hamiltonian(self) -> np.ndarray:
        f = self.dense()
        return f + f.conj().T


def build_reduced_f(dims: Dims, M: int = 2) -> ReducedF:
    """Weighted forward-move graph over ``(config, winding mod M)``."""
    if M < 1:
        raise ValueError(f"winding modulus must be >= 1, got {M}")
    space = ReducedSpace(dims, M)
    lat = lattice(dims)
    g = dims.g
    rows, cols, vals = [], [], []
    for ci, a in enumerate(lat.configs):
        wraps = lat.counts[ci] == g - 1
        for m in forward_moves(a, dims):
            cj = lat.index[tuple(
                (j + 1) % dims.c if k in m.columns(dims.h) else j for k, j in enumerate(a.front)
            )]
            for w in range(M):
                rows.append(space.index(cj, w + 1 if wraps else w))
                cols.append(space.index(ci, w))
                vals.append(m.weight)
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(space.dim, space.dim), dtype=complex)
    return ReducedF(space, matrix)


def normality_defect(fr: ReducedF) -> float:
    f = fr.matrix
    diff = (f.conj().T @ f - f @ f.conj().T).toarray()
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def graded_blocks(fr: ReducedF) -> list[np.ndarray]:
    """Blocks A_l of F mapping grade ``l`` to grade ``l + 1 (mod N)``."""
    f = fr.dense()
    grades = fr.space.grades
    N = fr.space.N
    members = [np.flatnonzero(grades == l) for l in range(N)]
    return [f[np.ix_(members[(l + 1) % N], members[l])] for l in range(N)]


def off_grade_mass(fr: ReducedF) -> float:
    """Largest |F entry| that does not step the grade by exactly one."""
    coo = fr.matrix.tocoo()
    grades = fr.space.grades
    bad = (grades[coo.col] + 1) % fr.space.N != grades[coo.row]
    return float(np.max(np.abs(coo.data[bad]))) if bad.any() else 0.0


def block_balance_defect(fr: ReducedF) -> float:
    """max_l |A_{l+1}^dagger A_{l+1} - A_l A_l^dagger|."""
    blocks = graded_blocks(fr)
    N = len(blocks)
    worst = 0.0
    for l in range(N):
        nxt = blocks[(l + 1) % N]
        lhs = nxt.conj().T @ nxt
        rhs = blocks[l] @ blocks[l].conj().T
        if lhs.size:
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# -------------------------------------------------------------- full oracle


def _cell(dims: Dims, j: int, k: int) -> int:
    return (j % dims.c) * dims.h + k


_HALF_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@dataclass(frozen=True)
class _Term:
    lower: tuple[int, ...]
    upper: tuple[int, ...]
    data: tuple[int, ...]
    op: np.ndarray
    prefactor: float


class FullF:
    """F acting on sparse states ``{(clock_bits, data_bits): amplitude}``.

    Built straight from the clock operators: for every term the annihilators
    act on the lower cells and the creators on the upper cells, tensored with
    the brick's data operator.  Program qubits are a fixed classical
    assignment, so they enter only through the choice of data operator.

    ``boundary`` selects the data operator of the half bricks: ``"swap"``
    moves the boundary data qubit up with its clock, ``"identity"`` leaves
    the data untouched.
    """

    def __init__(self, dims: Dims, program: gates.Program, boundary: str = "swap"):
        if dims.h * dims.c > FULL_MODE_MAX_CELLS:
            raise SizeGuardError(
                f"full mode limited to {FULL_MODE_MAX_CELLS} data qubits, got {dims.h * dims.c}"
            )
        if program.dims != dims:
            raise ValidityError("program was compiled for different dims")
        if boundary not in ("swap", "identity"):
            raise ValueError(f"unknown boundary operator {boundary!r}")
        self.dims = dims
        self.program = program
        half_op = _HALF_SWAP if boundary == "swap" else np.eye(4, dtype=complex)
        terms = []
        h, c = dims.h, dims.c
        for j in range(c):
            for k in range(0, h - 1, 2) if j % 2 == 0 else range(1, h - 2, 2):
                lower = (_cell(dims, j, k), _cell(dims, j, k + 1))
                upper = (_cell(dims, j + 1, k), _cell(dims, j + 1, k + 1))
                terms.append(_Term(lower, upper, lower + upper, gates.vertex_gate(program.code(j, k)), 1.0))
            if j % 2 == 1:
                for k in (0, h - 1):
                    lower, upper = (_cell(dims, j, k),), (_cell(dims, j + 1, k),)
                    terms.append(_Term(lower, upper, lower + upper, half_op, 1 / np.sqrt(2)))
        self.terms = terms

    @staticmethod
    def _bits(word: int, cells) -> int:
        out = 0
        for cell in cells:
            out = (out << 1) | ((word >> cell) & 1)
        return out

    @staticmethod
    def _write(word: int, cells, value: int) -> int:
        n = len(cells)
        for i, cell in enumerate(cells):
            bit = (value >> (n - 1 - i)) & 1
            word = (word & ~(1 << cell)) | (bit << cell)
        return word

    def _apply(self, state: dict, adjoint: bool) -> dict:
        out: dict = defaultdict(complex)
        for (clock, data), amp in state.items():
            for term in self.terms:
                # F: annihilate lower 1s, create upper 1s; F^dagger the reverse
                take, give = (term.upper, term.lower) if adjoint else (term.lower, term.upper)
                if not all((clock >> q) & 1 for q in take) or any((clock >> q) & 1 for q in give):
                    continue
                new_clock = clock
                for q in take + give:
                    new_clock ^= 1 << q
                op = term.op.conj().T if adjoint else term.op
                column = op[:, self._bits(data, term.data)]
                for o in np.flatnonzero(np.abs(column) > 1e-15):
                    key = (new_clock, self._write(data, term.data, int(o)))
                    out[key] += amp * term.prefactor * column[o]
        return {k: v for k, v in out.items() if abs(v) > 1e-15}

    def apply(self, state: dict) -> dict:
        return self._apply(state, adjoint=False)

    def apply_adjoint(self, state: dict) -> dict:
        return self._apply(state, adjoint=True)


def build_full_f(dims: Dims, program: gates.Program, boundary: str = "swap") -> FullF:
    return FullF(dims, program, boundary)


def full_state(dims: Dims, a: ClockConfig, logical_bits) -> dict:
    """Basis state with clock wall ``a`` and logical bit ``k`` stored at cell (j_k, k)."""
    check_config(a, dims)
    if len(logical_bits) != dims.h:
        raise ValidityError(f"need {dims.h} logical bits, got {len(logical_bits)}")
    clock = data = 0
    for k, j in enumerate(a.front):
        clock |= 1 << _cell(dims, j, k)
        data |= int(logical_bits[k]) << _cell(dims, j, k)
    return {(clock, data): 1.0 + 0j}


def decode_clock(dims: Dims, clock: int) -> ClockConfig:
    front = []
    for k in range(dims.h):
        rows = [j for j in range(dims.c) if (clock >> _cell(dims, j, k)) & 1]
        if len(rows) != 1:
            raise ValidityError(f"column {k} holds {len(rows)} clock ones")
        front.append(rows[0])
    return ClockConfig(tuple(front))


def _inner(u: dict, v: dict) -> complex:
    if len(u) > len(v):
        return np.conj(_inner(v, u))
    return complex(sum(np.conj(amp) * v.get(key, 0.0) for key, amp in u.items()))


def gram_full(ff: FullF, psi: dict, steps: int) -> np.ndarray:
    family = [psi]
    for _ in range(steps):
        family.append(ff.apply(family[-1]))
    n = len(family)
    gram = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            gram[i, j] = _inner(family[i], family[j])
            gram[j, i] = np.conj(gram[i, j])
    return gram


def gram_reduced(fr: ReducedF, i0: int, steps: int) -> np.ndarray:
    v = fr.space.basis_vector(i0)
    family = [v]
    for _ in range(steps):
        family.append(fr.matrix @ family[-1])
    mat = np.column_stack(family)
    return mat.conj().T @ mat


@dataclass
class Crosscheck:
    gram_full: np.ndarray
    gram_reduced: np.ndarray
    max_deviation: float
    orthogonality_defect: float
    N: int


def crosscheck_reduced(
    dims: Dims,
    program: gates.Program,
    logical_bits,
    steps: int,
    M: int = 2,
    start: ClockConfig | None = None,
    boundary: str = "swap",
) -> Crosscheck:
    """Compare Gram matrices of {F^j psi} between the full and reduced models.

    Also reports the largest normalized overlap between family members whose
    step counts differ modulo N = M g.
    """
    ff = build_full_f(dims, program, boundary)
    start = ClockConfig((0,) * dims.h) if start is None else start
    fr = build_reduced_f(dims, M)
    g_full = gram_full(ff, full_state(dims, start, logical_bits), steps)
    g_red = gram_reduced(fr, fr.space.index_of(start), steps)
    dev = float(np.max(np.abs(g_full - g_red)))
    norms = np.sqrt(np.real(np.diag(g_full)))
    normalized = g_full / np.outer(norms, norms)
    N = fr.space.N
    idx = np.arange(steps + 1)
    mask = (idx[:, None] - idx[None, :]) % N != 0
    orth = float(np.max(np.abs(normalized[mask]))) if mask.any() else 0.0
    return Crosscheck(g_full, g_red, dev, orth, N)


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruction_error(self, hamiltonian: np.ndarray) -> float:
        q, lam = self.eigenvectors, self.eigenvalues
        return float(np.max(np.abs(hamiltonian - (q * lam) @ q.conj().T)))


def spectral(fr: ReducedF) -> SpectralData:
    """Dense Hermitian eigendecomposition of H = F + F^dagger."""
    ham = fr.hamiltonian()
    try:
        lam, q = np.linalg.eigh(ham)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigendecomposition failed: {exc}") from exc
    sd = SpectralData(lam, q)
    err = sd.reconstruction_error(ham) if ham.size else 0.0
    if err > 1e-10:
        raise SpectralError(f"reconstruction error {err:.3e} exceeds 1e-10")
    return sd


def _check_state(sd: SpectralData, psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (len(sd.eigenvalues),):
        raise ValidityError(f"state of shape {psi.shape} does not match dimension {len(sd.eigenvalues)}")
    return psi


def evolve(sd: SpectralData, psi0: np.ndarray, t: float) -> np.ndarray:
    psi0 = _check_state(sd, psi0)
    q = sd.eigenvectors
    return q @ (np.exp(-1j * sd.eigenvalues * t) * (q.conj().T @ psi0))


def averaging_kernel(eigenvalues: np.ndarray, T: float | None, tol: float = 1e-9) -> np.ndarray:
    """(1/T) int_0^T exp(-i (E_a - E_b) t) dt for all pairs; T=None is the T -> inf limit."""
    gap = eigenvalues[:, None] - eigenvalues[None, :]
    if T is None:
        return (np.abs(gap) < tol).astype(float)
    if T <= 0:
        raise ValueError(f"averaging horizon must be positive, got {T}")
    x = gap * T
    return np.exp(-0.5j * x) * np.sinc(x / (2 * np.pi))


def time_average(sd: SpectralData, psi0: np.ndarray, T: float | None = None, tol: float = 1e-9) -> np.ndarray:
    """Density operator (1/T) int_0^T |psi(t)><psi(t)| dt; ``T=None`` dephases fully."""
    psi0 = _check_state(sd, psi0)
    q = sd.eigenvectors
    coef = q.conj().T @ psi0
    rho_eig = np.outer(coef, coef.conj()) * averaging_kernel(sd.eigenvalues, T, tol)
    return q @ rho_eig @ q.conj().T


def grade_distribution(rho: np.ndarray, space: ReducedSpace, origin: int = 0) -> np.ndarray:
    """W(l): weight of rho on grades congruent to ``origin + l`` modulo N."""
    diag = np.real(np.diag(rho))
    shifted = (space.grades - origin) % space.N
    return np.bincount(shifted, weights=diag, minlength=space.N)


# ------------------------------------------------------ spectral mass, angles


def spectral_mass(fr: ReducedF, psi0: np.ndarray, eps: float) -> float:
    """Weight of psi0 on eigenspaces of F with |eigenvalue| >= eps.

    F is normal, so its singular values are the eigenvalue moduli and the
    right singular subspaces are spectral subspaces of F.  Moduli below
    ``KERNEL_TOL`` count as kernel.
    """
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    _, sigma, vh = np.linalg.svd(fr.dense())
    keep = (sigma >= eps) & (sigma >= KERNEL_TOL)
    coef = vh[keep] @ np.asarray(psi0, dtype=complex)
    return float(np.sum(np.abs(coef) ** 2))


def spectral_component(fr: ReducedF, psi0: np.ndarray, eps: float) -> tuple[np.ndarray, float]:
    """Projection of psi0 onto eigenspaces of F with |eigenvalue| >= eps, and its squared norm."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    _, sigma, vh = np.linalg.svd(fr.dense())
    basis = vh[(sigma >= eps) & (sigma >= KERNEL_TOL)]
    proj = basis.conj().T @ (basis @ np.asarray(psi0, dtype=complex))
    return proj, float(np.vdot(proj, proj).real)


def spectral_mass_schur(f: np.ndarray, psi0: np.ndarray, eps: float) -> float:
    """Same quantity from the complex Schur form (diagonal for normal F)."""
    from scipy.linalg import schur

    t, z = schur(np.asarray(f, dtype=complex), output="complex")
    moduli = np.abs(np.diag(t))
    keep = (moduli >= eps) & (moduli >= KERNEL_TOL)
    coef = z.conj().T @ np.asarray(psi0, dtype=complex)
    return float(np.sum(np.abs(coef[keep]) ** 2))


@dataclass(frozen=True)
class AngleBounds:
    alpha: float
    L: float
    image_mass_lower: float
    mass_lower: Callable[[float], float]
    mass_lower_literal: Callable[[float], float]


def angle_bounds(B: np.ndarray, psi: np.ndarray, normal_tol: float = 1e-10) -> AngleBounds:
    """Angle between psi and B psi and the image-mass lower bounds it implies.

    ``mass_lower(d)`` bounds the weight on eigenspaces with |eigenvalue| >= d
    by cos^2(alpha + arcsin(d / L)); ``mass_lower_literal`` is the variant
    with the minus sign, kept for comparison (it is not a valid bound).
    """
    B = np.asarray(B, dtype=complex)
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    defect = np.max(np.abs(B @ B.conj().T - B.conj().T @ B))
    if defect > normal_tol * max(1.0, np.max(np.abs(B)) ** 2):
        raise ValidityError(f"operator is not normal (defect {defect:.3e})")
    b_psi = B @ psi
    L = float(np.linalg.norm(b_psi))
    if L < KERNEL_TOL:
        raise ValidityError("B psi vanishes; the angle is undefined")
    cos_alpha = min(1.0, abs(np.vdot(b_psi, psi)) / L)
    alpha = float(np.arccos(cos_alpha))

    def mass_lower(delta: float) -> float:
        if not 0 < delta < L:
            raise ValueError(f"need 0 < delta < L={L}, got {delta}")
        return float(np.cos(min(alpha + np.arcsin(delta / L), np.pi / 2)) ** 2)

    def mass_lower_literal(delta: float) -> float:
        if not 0 < delta < L:
            raise ValueError(f"need 0 < delta < L={L}, got {delta}")
        return float(np.cos(alpha - np.arcsin(delta / L)) ** 2)

    return AngleBounds(alpha, L, cos_alpha**2, mass_lower, mass_lower_literal)


def eigen_mass(B: np.ndarray, psi: np.ndarray, delta: float) -> float:
    """Exact weight of psi on eigenspaces of normal B with |eigenvalue| >= delta."""
    _, sigma, vh = np.linalg.svd(np.asarray(B, dtype=complex))
    keep = (sigma >= delta) & (sigma >= KERNEL_TOL)
    psi = np.asarray(psi, dtype=complex) / np.linalg.norm(psi)
    return float(np.sum(np.abs(vh[keep] @ psi) ** 2))
