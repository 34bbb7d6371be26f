"""Dense two-qubit linear algebra: kets, density operators, effects, POVMs.

Everything here is a thin, validated layer over numpy arrays. Arrays held by
the value types are made read-only on construction so they can be shared
freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

TAU_NORM = 1e-10
TAU_HERM = 1e-10
TAU_POVM = 1e-10
TAU_PSD = 1e-9

TOLERANCES = {
    "tau_norm": TAU_NORM,
    "tau_herm": TAU_HERM,
    "tau_povm": TAU_POVM,
    "tau_psd": TAU_PSD,
}

NoiseMode = Literal["global", "per_qubit"]
NOISE_MODES: tuple[str, ...] = ("global", "per_qubit")

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# Product Paulis used to rotate the base task into the other three.
PAULI_PAIRS = ("ZZ", "XX", "YY")


class QuantumError(ValueError):
    """Raised when an operator fails a physical validity check."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _check_square(m: np.ndarray, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise QuantumError(f"{name} must be a square matrix, got shape {m.shape}")


def allclose(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """Entrywise comparison with an explicit absolute tolerance and no relative slack."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.max(np.abs(a - b), initial=0.0) <= atol)


def is_hermitian(m: np.ndarray, atol: float = TAU_HERM) -> bool:
    return allclose(m, np.conj(np.transpose(m)), atol)


def hermitian_eigenvalues(m: np.ndarray) -> np.ndarray:
    # symmetrize first so round-off in the lower triangle is not silently ignored
    m = np.asarray(m)
    return np.linalg.eigvalsh(0.5 * (m + np.conj(m.T)))


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        if abs(np.linalg.norm(amps) - 1.0) > TAU_NORM:
            raise QuantumError(f"ket is not normalized (norm={np.linalg.norm(amps)!r})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return _frozen(np.outer(self.amplitudes, np.conj(self.amplitudes)))

    def __matmul__(self, other: "Ket") -> "Ket":
        return Ket(np.kron(self.amplitudes, other.amplitudes))


def ket(*amplitudes: complex, normalize: bool = False) -> Ket:
    v = np.array(amplitudes, dtype=complex)
    if normalize:
        v = v / np.linalg.norm(v)
    return Ket(v)


KET_0 = ket(1, 0)
KET_1 = ket(0, 1)
KET_PLUS = ket(1, 1, normalize=True)
KET_MINUS = ket(1, -1, normalize=True)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        _check_square(m, "density operator")
        if not is_hermitian(m, TAU_HERM):
            raise QuantumError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1.0) > TAU_NORM or abs(np.trace(m).imag) > TAU_NORM:
            raise QuantumError(f"density operator has trace {np.trace(m)!r}")
        if hermitian_eigenvalues(m).min() < -TAU_PSD:
            raise QuantumError("density operator is not positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, k: Ket) -> "DensityOperator":
        return cls(k.projector())

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim)


@dataclass(frozen=True, eq=False)
class Effect:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = _frozen(self.matrix)
        _check_square(m, "effect")
        if not is_hermitian(m, TAU_HERM):
            raise QuantumError("effect is not Hermitian")
        ev = hermitian_eigenvalues(m)
        if ev.min() < -TAU_PSD or ev.max() > 1.0 + TAU_PSD:
            raise QuantumError(f"effect eigenvalues {ev} fall outside [0, 1]")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_ket(cls, k: Ket) -> "Effect":
        return cls(k.projector())


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered effects; effect ``i`` carries outcome label ``Y = i + 1``."""

    effects: tuple[Effect, ...]

    def __post_init__(self) -> None:
        effects = tuple(self.effects)
        if not effects:
            raise QuantumError("a POVM needs at least one effect")
        dims = {e.dim for e in effects}
        if len(dims) != 1:
            raise QuantumError(f"POVM effects have mixed dimensions {sorted(dims)}")
        total = sum(e.matrix for e in effects)
        if not allclose(total, np.eye(effects[0].dim), TAU_POVM):
            raise QuantumError("POVM effects do not sum to the identity")
        object.__setattr__(self, "effects", effects)

    @property
    def dim(self) -> int:
        return self.effects[0].dim

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, y: int) -> Effect:
        """Effect for outcome label ``y`` (1-based)."""
        if not 1 <= y <= len(self.effects):
            raise IndexError(f"outcome {y} out of range 1..{len(self.effects)}")
        return self.effects[y - 1]

    @classmethod
    def from_kets(cls, kets: Sequence[Ket]) -> "Povm":
        return cls(tuple(Effect.from_ket(k) for k in kets))


def _as_matrix(m) -> np.ndarray:
    if isinstance(m, (DensityOperator, Effect)):
        return m.matrix
    return np.asarray(m, dtype=complex)


def tensor(a, b) -> np.ndarray:
    """Kronecker product; row index is ``r_a * rows_b + r_b`` (left factor is qubit A)."""
    return np.kron(_as_matrix(a), _as_matrix(b))


def born_probability(e, rho) -> float:
    """``Re tr(E rho)``, clamped into [0, 1] when only round-off pushes it out."""
    em, rm = _as_matrix(e), _as_matrix(rho)
    if em.shape != rm.shape:
        raise QuantumError(f"dimension mismatch: effect {em.shape} vs state {rm.shape}")
    # tr(E rho) = sum_ij E_ij rho_ji
    p = float(np.sum(em * rm.T).real)
    if p < -TAU_PSD or p > 1.0 + TAU_PSD:
        raise QuantumError(f"Born probability {p!r} outside [0, 1]; inputs are not a valid state/effect pair")
    return min(max(p, 0.0), 1.0)


def pauli_pair(label: str) -> np.ndarray:
    if len(label) != 2 or any(c not in PAULI for c in label):
        raise QuantumError(f"unknown Pauli product {label!r}")
    return np.kron(PAULI[label[0]], PAULI[label[1]])


def pauli_conjugate(m, label: str) -> np.ndarray:
    """``U m U^dagger`` with ``U`` the two-qubit Pauli product named by ``label`` (e.g. ``"ZZ"``)."""
    mm = _as_matrix(m)
    if mm.shape != (4, 4):
        raise QuantumError(f"Pauli conjugation needs a 4x4 matrix, got {mm.shape}")
    u = pauli_pair(label)
    return u @ mm @ np.conj(u.T)


def partial_trace(m: np.ndarray, keep: int) -> np.ndarray:
    """Reduced 2x2 matrix of qubit ``keep`` (0 = A, 1 = B) from a 4x4 operator."""
    t = np.asarray(m).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    if keep == 1:
        return np.einsum("jajb->ab", t)
    raise ValueError("keep must be 0 or 1")


def depolarize_matrix(m: np.ndarray, visibility: float, mode: str = "global") -> np.ndarray:
    """Depolarizing channel action on a raw matrix (no validation of the input state)."""
    if not 0.0 <= visibility <= 1.0:
        raise ValueError(f"visibility must lie in [0, 1], got {visibility!r}")
    m = np.asarray(m, dtype=complex)
    v = float(visibility)
    if mode == "global":
        d = m.shape[0]
        return v * m + (1.0 - v) * np.trace(m) * np.eye(d) / d
    if mode == "per_qubit":
        if m.shape != (4, 4):
            raise QuantumError("per_qubit depolarizing needs a two-qubit (4x4) input")
        # qubit A then qubit B; each step is v*X + (1-v) * (tr_q X) (x) I/2
        out = v * m + (1.0 - v) * np.kron(I2 / 2, partial_trace(m, 1))
        out = v * out + (1.0 - v) * np.kron(partial_trace(out, 0), I2 / 2)
        return out
    raise ValueError(f"unknown noise mode {mode!r}; expected one of {NOISE_MODES}")


def depolarize(rho: DensityOperator, visibility: float, mode: str = "global") -> DensityOperator:
    return DensityOperator(depolarize_matrix(rho.matrix, visibility, mode))
