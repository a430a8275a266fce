"""Dense density-matrix simulation on small registers of qudits."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_TOTAL_DIM = 2**14
BUILD_TOL = 1e-10
CHECK_TOL = 1e-9


class QuantumError(ValueError):
    pass


@dataclass(frozen=True)
class RegisterSystem:
    labels: tuple[str, ...]
    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.labels) != len(self.dims):
            raise QuantumError("labels and dims differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise QuantumError(f"duplicate register labels in {self.labels}")
        if any(d < 2 for d in self.dims):
            raise QuantumError("register dimensions must be at least 2")
        if self.total > MAX_TOTAL_DIM:
            raise QuantumError(f"total dimension {self.total} exceeds cap {MAX_TOTAL_DIM}")

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise QuantumError(f"unknown register {label!r}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def __add__(self, other: "RegisterSystem") -> "RegisterSystem":
        return RegisterSystem(self.labels + other.labels, self.dims + other.dims)

    def subsystem(self, labels: Sequence[str]) -> "RegisterSystem":
        return RegisterSystem(tuple(labels), tuple(self.dim(l) for l in labels))


def system(**dims: int) -> RegisterSystem:
    return RegisterSystem(tuple(dims), tuple(dims.values()))


class QuantumState:
    """Density matrix over a :class:`RegisterSystem`.  Treated as immutable."""

    __slots__ = ("system", "matrix")

    def __init__(self, system: RegisterSystem, matrix, check: bool = True):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (system.total, system.total):
            raise QuantumError(f"matrix shape {m.shape} does not match system dimension {system.total}")
        if check:
            _validate_density(m, BUILD_TOL)
        m.setflags(write=False)
        self.system = system
        self.matrix = m

    def __repr__(self) -> str:
        return f"QuantumState({self.system.labels}, dims={self.system.dims})"

    @property
    def labels(self):
        return self.system.labels

    def is_valid(self, tol: float = CHECK_TOL) -> bool:
        try:
            _validate_density(self.matrix, tol)
        except QuantumError:
            return False
        return True

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def _validate_density(m: np.ndarray, tol: float) -> None:
    if not np.allclose(m, m.conj().T, atol=tol):
        raise QuantumError("density matrix is not Hermitian")
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol:
        raise QuantumError(f"density matrix trace {tr} != 1")
    if np.linalg.eigvalsh(m).min() < -tol:
        raise QuantumError("density matrix is not positive semidefinite")


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def pure(system: RegisterSystem, vector) -> QuantumState:
    v = np.asarray(vector, dtype=complex).ravel()
    if v.size != system.total:
        raise QuantumError(f"amplitude vector of length {v.size} for dimension {system.total}")
    n = np.linalg.norm(v)
    if not n > 0 or not math.isfinite(n):
        raise QuantumError("amplitude vector cannot be normalized")
    return QuantumState(system, _proj(v / n))


def basis_vector(dims: Sequence[int], digits: Sequence[int]) -> np.ndarray:
    if len(digits) != len(dims):
        raise QuantumError("basis label length does not match register count")
    idx = 0
    for d, k in zip(dims, digits):
        if not 0 <= k < d:
            raise QuantumError(f"basis digit {k} out of range for dimension {d}")
        idx = idx * d + k
    v = np.zeros(math.prod(dims), dtype=complex)
    v[idx] = 1.0
    return v


def shift(d: int) -> np.ndarray:
    """Generalized Pauli X: |j> -> |j+1 mod d>."""
    return np.roll(np.eye(d, dtype=complex), 1, axis=0)


def clock(d: int) -> np.ndarray:
    """Generalized Pauli Z: |j> -> w^j |j>."""
    return np.diag(np.exp(2j * np.pi * np.arange(d) / d))


@functools.lru_cache(maxsize=None)
def pauli(d: int, a: int, b: int) -> np.ndarray:
    m = np.linalg.matrix_power(shift(d), a % d) @ np.linalg.matrix_power(clock(d), b % d)
    m.setflags(write=False)
    return m


def max_entangled_vector(d: int, frame: tuple[int, int] = (0, 0)) -> np.ndarray:
    """(1 x X^a Z^b) sum_j |jj> / sqrt(d)."""
    phi = np.eye(d, dtype=complex).ravel() / math.sqrt(d)
    return np.kron(np.eye(d), pauli(d, *frame)) @ phi


# singlet (|01> - |10>)/sqrt2 is exactly (1 x XZ)|Phi+>
SINGLET_FRAME = (1, 1)


def haar_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def make_state(
    system: RegisterSystem,
    spec,
    registers: Sequence[str] | None = None,
    rng: np.random.Generator | None = None,
) -> QuantumState:
    """Build a state from a description.

    ``spec`` may be a digit string such as ``"01"`` (computational basis), an
    amplitude vector, ``"singlet"`` / ``"maxent"`` on the two named
    ``registers`` (remaining registers start in ``|0>``), or ``"haar"``.
    """
    if isinstance(spec, str):
        if spec == "haar":
            if rng is None:
                raise QuantumError("Haar sampling needs a seeded generator")
            return pure(system, haar_vector(system.total, rng))
        if spec in ("singlet", "maxent"):
            if registers is None or len(registers) != 2:
                raise QuantumError(f"{spec} needs exactly two registers")
            a, b = registers
            d = system.dim(a)
            if system.dim(b) != d:
                raise QuantumError("entangled pair registers must have equal dimension")
            if spec == "singlet" and d != 2:
                raise QuantumError("singlet is defined for qubits; use maxent")
            frame = SINGLET_FRAME if spec == "singlet" else (0, 0)
            pair = RegisterSystem((a, b), (d, d))
            rest = [l for l in system.labels if l not in (a, b)]
            st = QuantumState(pair, _proj(max_entangled_vector(d, frame)))
            if rest:
                zero = system.subsystem(rest)
                st = tensor(st, QuantumState(zero, _proj(basis_vector(zero.dims, [0] * len(rest)))))
            return reorder(st, system.labels)
        if spec.isdigit():
            return pure(system, basis_vector(system.dims, [int(c) for c in spec]))
        raise QuantumError(f"unknown state description {spec!r}")
    return pure(system, spec)


def tensor(a: QuantumState, b: QuantumState) -> QuantumState:
    return QuantumState(a.system + b.system, np.kron(a.matrix, b.matrix), check=False)


def _perm_for(system: RegisterSystem, first: Sequence[str]) -> list[int]:
    idx = [system.index(l) for l in first]
    if len(set(idx)) != len(idx):
        raise QuantumError("repeated register in selection")
    return idx + [i for i in range(len(system.dims)) if i not in idx]


def reorder(state: QuantumState, labels: Sequence[str]) -> QuantumState:
    """Permute register order to ``labels`` (a permutation of the current labels)."""
    sysm = state.system
    if sorted(labels) != sorted(sysm.labels):
        raise QuantumError("reorder needs a permutation of the register labels")
    if tuple(labels) == sysm.labels:
        return state
    perm = _perm_for(sysm, labels)
    n = len(sysm.dims)
    t = state.matrix.reshape(sysm.dims * 2).transpose(perm + [p + n for p in perm])
    new = sysm.subsystem(labels)
    return QuantumState(new, t.reshape(new.total, new.total), check=False)


def _sandwich(state: QuantumState, registers: Sequence[str], op: np.ndarray) -> np.ndarray:
    """op rho op^dagger with op acting on ``registers``."""
    sysm = state.system
    perm = _perm_for(sysm, registers)
    n = len(sysm.dims)
    m = math.prod(sysm.dims[i] for i in perm[: len(registers)])
    r = sysm.total // m
    if op.shape != (m, m):
        raise QuantumError(f"operator shape {op.shape} does not match subsystem dimension {m}")
    pdims = [sysm.dims[i] for i in perm]
    t = state.matrix.reshape(sysm.dims * 2).transpose(perm + [p + n for p in perm]).reshape(m, r, m, r)
    t = (op @ t.reshape(m, -1)).reshape(m, r, m, r)
    t = (t.transpose(0, 1, 3, 2) @ op.conj().T).transpose(0, 1, 3, 2)
    inv = np.argsort(perm)
    t = t.reshape(pdims * 2).transpose(list(inv) + [i + n for i in inv])
    return t.reshape(sysm.total, sysm.total)


def is_unitary(u: np.ndarray, tol: float = BUILD_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol)


def apply_unitary(state: QuantumState, registers: Sequence[str], u) -> QuantumState:
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u):
        raise QuantumError("operator is not unitary")
    return QuantumState(state.system, _sandwich(state, registers, u), check=False)


@dataclass(frozen=True)
class MeasurementOutcome:
    label: int
    probability: float
    post_state: QuantumState | None

    @property
    def possible(self) -> bool:
        return self.post_state is not None


def basis_projectors(basis) -> list[np.ndarray]:
    """Rank-one projectors onto the columns of an orthonormal basis matrix."""
    b = np.asarray(basis, dtype=complex)
    return [_proj(b[:, k]) for k in range(b.shape[1])]


def measure(state: QuantumState, registers: Sequence[str], basis) -> list[MeasurementOutcome]:
    """Born-rule measurement on ``registers``.

    ``basis`` is either a square matrix whose columns form an orthonormal
    basis or a list of projectors summing to the identity.
    """
    if isinstance(basis, np.ndarray) and basis.ndim == 2:
        projectors = basis_projectors(basis)
    else:
        projectors = [np.asarray(p, dtype=complex) for p in basis]
    m = math.prod(state.system.dim(l) for l in registers)
    if any(p.shape != (m, m) for p in projectors):
        raise QuantumError("projector dimension does not match measured registers")
    if not np.allclose(sum(projectors), np.eye(m), atol=CHECK_TOL):
        raise QuantumError("projectors do not sum to the identity")
    out = []
    for k, p in enumerate(projectors):
        post = _sandwich(state, registers, p)
        prob = float(np.trace(post).real)
        if prob > 1e-14:
            out.append(MeasurementOutcome(k, prob, QuantumState(state.system, post / prob, check=False)))
        else:
            out.append(MeasurementOutcome(k, 0.0, None))
    return out


def partial_trace(state: QuantumState, keep: Sequence[str]) -> QuantumState:
    if not keep:
        raise QuantumError("partial trace needs at least one kept register")
    sysm = state.system
    perm = _perm_for(sysm, keep)
    n = len(sysm.dims)
    k = math.prod(sysm.dims[i] for i in perm[: len(keep)])
    r = sysm.total // k
    t = state.matrix.reshape(sysm.dims * 2).transpose(perm + [p + n for p in perm]).reshape(k, r, k, r)
    return QuantumState(sysm.subsystem(keep), np.einsum("arbr->ab", t), check=False)


def discard(state: QuantumState, registers: Sequence[str]) -> QuantumState:
    keep = [l for l in state.labels if l not in registers]
    for l in registers:
        state.system.index(l)
    return partial_trace(state, keep)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(a: QuantumState, b: QuantumState) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))^2, in [0, 1]."""
    if a.system.dims != b.system.dims:
        raise QuantumError("fidelity between states of different dimension")
    w, v = np.linalg.eigh(b.matrix)
    if w[-1] > 1 - BUILD_TOL:
        psi = v[:, -1]
        f = float(np.real(psi.conj() @ a.matrix @ psi))
    else:
        s = _psd_sqrt(a.matrix)
        f = float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(s @ b.matrix @ s), 0, None))) ** 2)
    return min(1.0, max(0.0, f))


@functools.lru_cache(maxsize=None)
def bell_basis(d: int) -> np.ndarray:
    """Columns (X^a Z^b x 1)|Phi>, ordered by index a*d + b."""
    phi = np.eye(d, dtype=complex).ravel() / math.sqrt(d)
    cols = [np.kron(pauli(d, a, b), np.eye(d)) @ phi for a in range(d) for b in range(d)]
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out


def teleport_branches(state: QuantumState, source: str, local: str) -> list[tuple[tuple[int, int], float, QuantumState | None]]:
    """All Bell-measurement branches of a teleportation send.

    Each entry is ``(message, probability, remainder)``; the measured pair is
    traced out of the remainder.
    """
    d = state.system.dim(source)
    if state.system.dim(local) != d:
        raise QuantumError("teleportation registers must have equal dimension")
    out = []
    for o in measure(state, (source, local), bell_basis(d)):
        msg = divmod(o.label, d)
        rem = discard(o.post_state, (source, local)) if o.possible else None
        out.append((msg, o.probability, rem))
    return out


def teleport_send(state: QuantumState, source: str, local: str, rng: np.random.Generator):
    """Sample one Bell-measurement branch; returns (message, remainder)."""
    branches = [b for b in teleport_branches(state, source, local) if b[2] is not None]
    probs = np.array([b[1] for b in branches])
    k = rng.choice(len(branches), p=probs / probs.sum())
    return branches[k][0], branches[k][2]


def teleport_correction(d: int, message: tuple[int, int], frame: tuple[int, int] = (0, 0)) -> np.ndarray:
    a, b = message
    if not (0 <= a < d and 0 <= b < d):
        raise QuantumError(f"teleportation message {message} out of range for dimension {d}")
    return pauli(d, a, b) @ pauli(d, *frame).conj().T


def teleport_receive(
    state: QuantumState, target: str, message: tuple[int, int], frame: tuple[int, int] = (0, 0)
) -> QuantumState:
    """Apply the Pauli correction for ``message``; ``frame`` names the pair type."""
    d = state.system.dim(target)
    return apply_unitary(state, (target,), teleport_correction(d, message, frame))


# --- common gates and measurement settings ---------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

GATES = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H, "S": S, "CNOT": CNOT}


def equator_basis(theta: float) -> np.ndarray:
    """Orthonormal basis along Bloch vector (cos theta, sin theta, 0); columns +, -."""
    e = np.exp(1j * theta)
    return np.array([[1, 1], [e, -e]], dtype=complex) / math.sqrt(2)


def bloch_vector(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)], dtype=complex)


def named_basis(name: str, d: int = 2) -> np.ndarray:
    if name == "z":
        return np.eye(d, dtype=complex)
    if d != 2:
        raise QuantumError(f"basis {name!r} is defined for qubits only")
    if name == "x":
        return equator_basis(0.0)
    if name == "y":
        return equator_basis(math.pi / 2)
    raise QuantumError(f"unknown basis {name!r}")


def mub_vectors(d: int) -> list[np.ndarray]:
    """A complete set of mutually unbiased bases (a 2-design) for prime ``d``."""
    if d < 2 or any(d % p == 0 for p in range(2, int(math.isqrt(d)) + 1)):
        raise QuantumError("mutually unbiased bases implemented for prime dimensions only")
    out = list(np.eye(d, dtype=complex))
    if d == 2:
        for theta in (0.0, math.pi / 2):
            out.extend(equator_basis(theta).T)
        return out
    w = np.exp(2j * np.pi / d)
    j = np.arange(d)
    for k in range(d):
        for m in range(d):
            out.append(w ** (k * j * j + m * j) / math.sqrt(d))
    return out


def chsh_value(alice, bob, state: QuantumState, registers: tuple[str, str] = ("A", "B")) -> float:
    """Exact winning probability of the CHSH game.

    ``alice[i]`` and ``bob[i]`` are two-element projector lists (output bit
    0, 1) used on input bit ``i``; inputs are uniform and independent.
    """
    rho = partial_trace(state, registers).matrix
    total = 0.0
    for i1 in (0, 1):
        for i2 in (0, 1):
            pa, pb = alice[i1], bob[i2]
            if len(pa) != 2 or len(pb) != 2:
                raise QuantumError("CHSH settings need two-outcome measurements")
            for p in (pa, pb):
                if not np.allclose(p[0] + p[1], np.eye(p[0].shape[0]), atol=CHECK_TOL):
                    raise QuantumError("CHSH measurement projectors are incomplete")
            for j1 in (0, 1):
                for j2 in (0, 1):
                    if (j1 ^ j2) == (i1 & i2):
                        total += 0.25 * float(np.trace(rho @ np.kron(pa[j1], pb[j2])).real)
    return total


def deterministic_setting(bit: int, d: int = 2) -> list[np.ndarray]:
    """A trivial measurement that always outputs ``bit``."""
    one, zero = np.eye(d, dtype=complex), np.zeros((d, d), dtype=complex)
    return [one, zero] if bit == 0 else [zero, one]
