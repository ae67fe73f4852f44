"""Dense tensor-product Hilbert-space engine.

The composite system used throughout the package is ordered as
``[qutrit, mode 1, mode 2]`` with qutrit levels indexed ``g=0, a=1, e=2``.
Single-factor objects carry a one-factor :class:`SpaceLayout`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammainc

from .errors import (
    DegenerateStateError,
    DimensionError,
    InvalidState,
    LayoutError,
    LevelError,
    TruncationError,
)

LEVELS = ("g", "a", "e")
G, A, E = 0, 1, 2
QUTRIT, MODE1, MODE2 = 0, 1, 2

NORM_TOL = 1e-10
DEFAULT_TAIL_TOL = 1e-6


def _frozen(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered factor dimensions of a tensor-product space."""

    factor_dims: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"factor dims must be positive, got {self.factor_dims}")
        object.__setattr__(self, "factor_dims", dims)

    @classmethod
    def qutrit_modes(cls, d1: int, d2: int) -> "SpaceLayout":
        return cls((3, d1, d2))

    @property
    def dim(self) -> int:
        return math.prod(self.factor_dims)

    @property
    def nfactors(self) -> int:
        return len(self.factor_dims)

    def sub(self, slots: Iterable[int]) -> "SpaceLayout":
        return SpaceLayout(tuple(self.factor_dims[s] for s in slots))

    def basis_index(self, *labels: int) -> int:
        """Flat index of the product basis vector ``|l0, l1, ...>``."""
        if len(labels) != self.nfactors:
            raise LayoutError(f"expected {self.nfactors} labels, got {len(labels)}")
        return int(np.ravel_multi_index(labels, self.factor_dims))


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state on a layout."""

    layout: SpaceLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.layout.dim,):
            raise LayoutError(
                f"ket of length {amps.size} does not fit layout {self.layout.factor_dims}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidState(f"ket norm {norm!r} differs from 1 by more than {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, layout: SpaceLayout, vector) -> "Ket":
        """Build a ket from an unnormalized vector."""
        vec = np.asarray(vector, dtype=complex).ravel()
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise DegenerateStateError("cannot normalize the zero vector")
        return cls(layout, vec / norm)

    @classmethod
    def from_evolution(cls, layout: SpaceLayout, vector, drift_tol: float) -> "Ket":
        """Wrap an integrator output whose norm drift was audited against ``drift_tol``."""
        vec = np.asarray(vector, dtype=complex).ravel()
        drift = abs(np.linalg.norm(vec) - 1.0)
        if drift > drift_tol:
            raise InvalidState(f"evolved ket norm drift {drift:.3e} exceeds {drift_tol}")
        ket = object.__new__(cls)
        object.__setattr__(ket, "layout", layout)
        object.__setattr__(ket, "amplitudes", _frozen(vec))
        return ket

    @classmethod
    def basis(cls, layout: SpaceLayout, *labels: int) -> "Ket":
        vec = np.zeros(layout.dim, dtype=complex)
        vec[layout.basis_index(*labels)] = 1.0
        return cls(layout, vec)

    def overlap(self, other: "Ket") -> complex:
        """``<self|other>``."""
        _same_layout(self.layout, other.layout)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self) -> "DensityOp":
        return DensityOp(self.layout, np.outer(self.amplitudes, self.amplitudes.conj()))

    def expect(self, op: "LinOp") -> complex:
        _same_layout(self.layout, op.layout)
        return complex(np.vdot(self.amplitudes, op.matrix @ self.amplitudes))

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.factor_dims)


@dataclass(frozen=True, eq=False)
class DensityOp:
    """Density operator; physical validity is checked on demand via :meth:`validate`."""

    layout: SpaceLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.layout.dim
        if mat.shape != (n, n):
            raise LayoutError(f"density matrix shape {mat.shape} does not fit dim {n}")
        object.__setattr__(self, "matrix", mat)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def expect(self, op: "LinOp") -> complex:
        _same_layout(self.layout, op.layout)
        return complex(np.sum(op.matrix * self.matrix.T))

    def validate(self, herm_tol=1e-10, trace_tol=1e-8, eig_tol=1e-8) -> "DensityOp":
        herm = self.hermiticity_error()
        if herm > herm_tol:
            raise InvalidState(f"density operator not Hermitian: max |rho - rho^H| = {herm:.3e}")
        tr = abs(self.trace - 1.0)
        if tr > trace_tol:
            raise InvalidState(f"density operator trace error {tr:.3e} exceeds {trace_tol}")
        lam = self.min_eigenvalue()
        if lam < -eig_tol:
            raise InvalidState(f"density operator min eigenvalue {lam:.3e} below -{eig_tol}")
        return self


@dataclass(frozen=True, eq=False)
class LinOp:
    """Linear operator on a layout (dense matrix)."""

    layout: SpaceLayout
    matrix: np.ndarray
    hermitian_hint: bool = field(default=False)

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.layout.dim
        if mat.shape != (n, n):
            raise LayoutError(f"operator shape {mat.shape} does not fit dim {n}")
        object.__setattr__(self, "matrix", mat)

    def dag(self) -> "LinOp":
        return LinOp(self.layout, self.matrix.conj().T, self.hermitian_hint)

    def apply(self, ket: Ket) -> np.ndarray:
        """Raw (possibly unnormalized) image of ``ket``."""
        _same_layout(self.layout, ket.layout)
        return self.matrix @ ket.amplitudes

    def __matmul__(self, other: "LinOp") -> "LinOp":
        _same_layout(self.layout, other.layout)
        return LinOp(self.layout, self.matrix @ other.matrix)

    def __add__(self, other: "LinOp") -> "LinOp":
        _same_layout(self.layout, other.layout)
        return LinOp(
            self.layout, self.matrix + other.matrix, self.hermitian_hint and other.hermitian_hint
        )

    def __sub__(self, other: "LinOp") -> "LinOp":
        return self + (-1.0) * other

    def __mul__(self, scalar) -> "LinOp":
        scalar = complex(scalar)
        return LinOp(self.layout, scalar * self.matrix, self.hermitian_hint and scalar.imag == 0)

    __rmul__ = __mul__

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))


def _same_layout(a: SpaceLayout, b: SpaceLayout):
    if a != b:
        raise LayoutError(f"layout mismatch: {a.factor_dims} vs {b.factor_dims}")


def identity(layout: SpaceLayout) -> LinOp:
    return LinOp(layout, np.eye(layout.dim), True)


def commutator(x: LinOp, y: LinOp) -> LinOp:
    return x @ y - y @ x


# -- single-factor operators -------------------------------------------------


def annihilation(dim: int) -> LinOp:
    """Truncated ladder operator with ``<n-1|a|n> = sqrt(n)``."""
    if dim < 2:
        raise DimensionError(f"annihilation operator needs dim >= 2, got {dim}")
    return LinOp(SpaceLayout((dim,)), np.diag(np.sqrt(np.arange(1, dim)), 1))


def creation(dim: int) -> LinOp:
    return annihilation(dim).dag()


def number(dim: int) -> LinOp:
    return LinOp(SpaceLayout((dim,)), np.diag(np.arange(dim, dtype=float)), True)


def parity(dim: int) -> LinOp:
    """Photon-number parity ``exp(i pi a^dag a)`` on one mode."""
    return LinOp(SpaceLayout((dim,)), np.diag((-1.0) ** np.arange(dim)), True)


def level_index(level) -> int:
    if isinstance(level, (int, np.integer)) and 0 <= level < 3:
        return int(level)
    if isinstance(level, str) and level in LEVELS:
        return LEVELS.index(level)
    raise LevelError(f"unknown qutrit level {level!r}; expected one of {LEVELS}")


def transition_operator(from_level, to_level) -> LinOp:
    """``|to><from|`` on the qutrit factor."""
    i, j = level_index(from_level), level_index(to_level)
    mat = np.zeros((3, 3), dtype=complex)
    mat[j, i] = 1.0
    return LinOp(SpaceLayout((3,)), mat, i == j)


def projector(level) -> LinOp:
    return transition_operator(level, level)


def embed(op: LinOp, slot: int, layout: SpaceLayout) -> LinOp:
    """Place a single-factor operator at ``slot`` with identities elsewhere."""
    if not 0 <= slot < layout.nfactors:
        raise LayoutError(f"slot {slot} out of range for {layout.factor_dims}")
    if op.layout.factor_dims != (layout.factor_dims[slot],):
        raise LayoutError(
            f"operator dim {op.layout.dim} does not match factor {slot} "
            f"of dim {layout.factor_dims[slot]}"
        )
    mats = [np.eye(d) for d in layout.factor_dims]
    mats[slot] = op.matrix
    return LinOp(layout, _kron_all(mats), op.hermitian_hint)


def tensor_ops(*ops: LinOp) -> LinOp:
    layout = SpaceLayout(tuple(d for op in ops for d in op.layout.factor_dims))
    return LinOp(layout, _kron_all([op.matrix for op in ops]), all(o.hermitian_hint for o in ops))


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex) if mats[0].ndim == 2 else np.ones(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


# -- states -----------------------------------------------------------------


def tensor(*kets: Ket) -> Ket:
    layout = SpaceLayout(tuple(d for k in kets for d in k.layout.factor_dims))
    return Ket(layout, _kron_all([k.amplitudes for k in kets]))


def fock_state(n: int, dim: int) -> Ket:
    if not 0 <= n < dim:
        raise TruncationError(f"Fock state |{n}> does not fit cutoff dim {dim}", required_dim=n + 1)
    return Ket.basis(SpaceLayout((dim,)), n)


def coherent_tail(alpha, dim: int) -> float:
    """Poisson mass ``sum_{n >= dim} e^{-|a|^2} |a|^{2n} / n!`` dropped by truncation."""
    mean = abs(alpha) ** 2
    if mean == 0.0:
        return 0.0
    return float(gammainc(dim, mean))


def required_dim(alpha, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
    dim = 1
    while coherent_tail(alpha, dim) >= tail_tol:
        dim += 1
    return dim


def _check_tail(alpha, dim, tail_tol):
    tail = coherent_tail(alpha, dim)
    if tail >= tail_tol:
        need = required_dim(alpha, tail_tol)
        raise TruncationError(
            f"coherent amplitude {alpha} loses Poisson tail {tail:.2e} at cutoff {dim} "
            f"(tolerance {tail_tol:g}); need dim >= {need}",
            required_dim=need,
        )


def coherent_amplitudes(alpha, dim: int) -> np.ndarray:
    """Untruncated-normalization amplitudes ``e^{-|a|^2/2} a^n / sqrt(n!)`` for ``n < dim``."""
    alpha = complex(alpha)
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(dim - 1):
        amps[n + 1] = amps[n] * alpha / math.sqrt(n + 1)
    return amps


def coherent_state(alpha, dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    """Truncated coherent state, renormalized after a Poisson-tail audit."""
    _check_tail(alpha, dim, tail_tol)
    return Ket.normalized(SpaceLayout((dim,)), coherent_amplitudes(alpha, dim))


def cat_normalization(alpha, parity: str) -> float:
    """Infinite-dimensional normalization of ``N(|a> +/- |-a>)``."""
    sign = _parity_sign(parity)
    return (1 / math.sqrt(2)) * (1 + sign * math.exp(-2 * abs(alpha) ** 2)) ** -0.5


def _parity_sign(parity: str) -> int:
    if parity == "even":
        return 1
    if parity == "odd":
        return -1
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def cat_state(alpha, parity: str, dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> Ket:
    """Even (``|a> + |-a>``) or odd (``|a> - |-a>``) cat state."""
    sign = _parity_sign(parity)
    if sign < 0 and alpha == 0:
        raise DegenerateStateError("odd cat state with alpha = 0 is the zero vector")
    _check_tail(alpha, dim, tail_tol)
    amps = coherent_amplitudes(alpha, dim)
    wrong = slice(1, None, 2) if sign > 0 else slice(0, None, 2)
    amps[wrong] = 0.0
    return Ket.normalized(SpaceLayout((dim,)), amps)


# -- reductions -------------------------------------------------------------


def partial_trace(rho, keep: Iterable[int]) -> DensityOp:
    """Trace out every factor not listed in ``keep`` (kept factors retain their order)."""
    if isinstance(rho, Ket):
        rho = rho.to_density()
    keep = sorted(set(int(k) for k in keep))
    layout = rho.layout
    if not keep:
        raise ValueError("partial_trace needs at least one factor to keep")
    if keep[0] < 0 or keep[-1] >= layout.nfactors:
        raise LayoutError(f"keep slots {keep} invalid for {layout.factor_dims}")
    n = layout.nfactors
    dims = layout.factor_dims
    tens = rho.matrix.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = keep + [k + n for k in keep]
    reduced = np.einsum(tens, row + col, out)
    sub = layout.sub(keep)
    return DensityOp(sub, reduced.reshape(sub.dim, sub.dim))
