"""Markov jump linear system models and mode-set clusterings.

The plant switches among ``N`` modes according to a finite Markov chain:
``x[k+1] = A[i] x[k] + G[i] w[k]`` and ``y[k] = L[i] x[k] + H[i] w[k]`` with
``i = theta(k)``, a single shared noise vector ``w[k] ~ N(0, I)``, and
``x[0] ~ N(xbar, Psi)``.  Admissible models satisfy ``G[i] H[i]' = 0`` and
``H[i] H[i]' > 0`` for every mode.

Mode indices are 1-based in every public interface, file format, and label;
array positions are 0-based internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Numeric slack for invariants that are exact in theory but read from files.
STOCHASTIC_ATOL = 1e-9
ORTHOGONALITY_RTOL = 1e-12
PD_RTOL = 1e-12


class ModelFormatError(ValueError):
    """A model or clustering document could not be parsed."""


def _asarray(value, what, shape=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"{what}: not a numeric array ({exc})") from None
    if shape is not None and arr.shape != shape:
        raise ModelFormatError(f"{what}: expected shape {shape}, got {arr.shape}")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModeMatrices:
    """The four plant matrices active while the chain sits in one mode."""

    A: np.ndarray  # n x n
    G: np.ndarray  # n x q
    L: np.ndarray  # p x n
    H: np.ndarray  # p x q

    def __post_init__(self):
        for name in ("A", "G", "L", "H"):
            arr = _asarray(getattr(self, name), f"mode matrix {name}")
            if arr.ndim != 2:
                raise ModelFormatError(f"mode matrix {name}: expected 2-D, got {arr.ndim}-D")
            object.__setattr__(self, name, _freeze(arr))
        n, q = self.A.shape[0], self.G.shape[1]
        p = self.L.shape[0]
        if self.A.shape != (n, n):
            raise ModelFormatError(f"A must be square, got {self.A.shape}")
        if self.G.shape != (n, q) or self.L.shape != (p, n) or self.H.shape != (p, q):
            raise ModelFormatError(
                "inconsistent mode dimensions: "
                f"A{self.A.shape} G{self.G.shape} L{self.L.shape} H{self.H.shape}"
            )

    def __eq__(self, other):
        if not isinstance(other, ModeMatrices):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in "AGLH")


@dataclass(frozen=True, eq=False)
class MjlsModel:
    """A Markov jump linear plant with its chain and initial law.

    ``transition[j, i]`` is ``Pr(theta(k+1) = i+1 | theta(k) = j+1)``;
    ``initial_dist`` is the law of ``theta(0)``.  ``init_cov`` is symmetrised
    on construction so serialization noise cannot make it asymmetric.
    """

    n: int
    p_dim: int
    q_dim: int
    modes: tuple[ModeMatrices, ...]
    transition: np.ndarray
    initial_dist: np.ndarray
    init_mean: np.ndarray
    init_cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise ModelFormatError("model needs at least one mode")
        n, p, q = int(self.n), int(self.p_dim), int(self.q_dim)
        if min(n, p, q) < 1:
            raise ModelFormatError(f"dimensions must be positive, got n={n} p={p} q={q}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "p_dim", p)
        object.__setattr__(self, "q_dim", q)
        for k, m in enumerate(self.modes, start=1):
            if m.A.shape != (n, n) or m.G.shape != (n, q) or m.L.shape != (p, n) or m.H.shape != (p, q):
                raise ModelFormatError(
                    f"mode {k}: matrices do not match (n={n}, p={p}, q={q}): "
                    f"A{m.A.shape} G{m.G.shape} L{m.L.shape} H{m.H.shape}"
                )
        N = len(self.modes)
        object.__setattr__(self, "transition", _freeze(_asarray(self.transition, "P", (N, N))))
        object.__setattr__(self, "initial_dist", _freeze(_asarray(self.initial_dist, "pi0", (N,))))
        object.__setattr__(self, "init_mean", _freeze(_asarray(self.init_mean, "xbar", (n,))))
        psi = _asarray(self.init_cov, "Psi", (n, n))
        object.__setattr__(self, "init_cov", _freeze(0.5 * (psi + psi.T)))

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def __eq__(self, other):
        if not isinstance(other, MjlsModel):
            return NotImplemented
        return (
            (self.n, self.p_dim, self.q_dim) == (other.n, other.p_dim, other.q_dim)
            and self.modes == other.modes
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.initial_dist, other.initial_dist)
            and np.array_equal(self.init_mean, other.init_mean)
            and np.array_equal(self.init_cov, other.init_cov)
        )


@dataclass(frozen=True)
class Clustering:
    """An ordered partition of the 1-based mode set {1..N} into clusters.

    The cluster observation at time k is the (1-based) position of the
    cluster containing theta(k).
    """

    clusters: tuple[tuple[int, ...], ...]
    n_modes: int

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.clusters)
        object.__setattr__(self, "clusters", blocks)
        object.__setattr__(self, "n_modes", int(self.n_modes))
        if not blocks:
            raise ValueError("clustering needs at least one cluster")
        seen: set[int] = set()
        for b in blocks:
            if not b:
                raise ValueError("empty cluster")
            if seen & set(b):
                raise ValueError(f"clusters overlap: mode(s) {sorted(seen & set(b))} repeated")
            seen |= set(b)
        if seen != set(range(1, self.n_modes + 1)):
            raise ValueError(
                f"clusters must partition {{1..{self.n_modes}}}, got union {sorted(seen)}"
            )

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def blocks0(self) -> list[np.ndarray]:
        """Clusters as 0-based index arrays, in cluster order."""
        return [np.array(b, dtype=int) - 1 for b in self.clusters]


def cluster_index(clustering: Clustering, mode: int) -> int:
    """1-based index of the cluster containing ``mode``."""
    mode = int(mode)
    if not 1 <= mode <= clustering.n_modes:
        raise ValueError(f"mode {mode} out of range 1..{clustering.n_modes}")
    for m, block in enumerate(clustering.clusters, start=1):
        if mode in block:
            return m
    raise AssertionError("unreachable: clustering covers the mode set")


def partition_label(clustering: Clustering) -> str:
    """Canonical label: clusters sorted by smallest element, e.g. "{1,2,3}|{4}"."""
    blocks = sorted(clustering.clusters, key=lambda b: b[0])
    return "|".join("{" + ",".join(str(i) for i in b) + "}" for b in blocks)


def parse_clustering(text: str, n_modes: int) -> Clustering:
    """Parse either the brace grammar "{1,2}|{3}" or a JSON array of arrays."""
    stripped = text.strip()
    if not stripped:
        raise ModelFormatError("empty clustering specification")
    if stripped.startswith("["):
        try:
            raw = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"clustering JSON: {exc.msg} (line {exc.lineno})") from None
        if not isinstance(raw, list) or not all(isinstance(b, list) for b in raw):
            raise ModelFormatError("clustering JSON must be an array of arrays")
        blocks = raw
    else:
        blocks = []
        for part in stripped.split("|"):
            part = part.strip()
            if not (part.startswith("{") and part.endswith("}")):
                raise ModelFormatError(f"cluster {part!r}: expected braces, e.g. {{1,2}}")
            body = part[1:-1].strip()
            if not body:
                raise ModelFormatError("empty cluster in specification")
            try:
                blocks.append([int(tok) for tok in body.split(",")])
            except ValueError:
                raise ModelFormatError(f"cluster {part!r}: entries must be integers") from None
    try:
        return Clustering(tuple(tuple(b) for b in blocks), n_modes)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    index: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...] = field(default_factory=tuple)


def validate(model: MjlsModel) -> ValidationReport:
    """Check the numeric admissibility invariants of a structurally sound model.

    Violations are reported as data; an empty report means the model can be
    used for filter design.  The checks are pure and deterministic.
    """
    v: list[Violation] = []
    P = model.transition
    for j in range(model.n_modes):
        row = P[j]
        if np.any(row < -STOCHASTIC_ATOL) or np.any(row > 1 + STOCHASTIC_ATOL):
            v.append(Violation("transition-entry-range",
                               f"transition row {j + 1} has entries outside [0, 1]", j + 1))
        if abs(row.sum() - 1.0) > STOCHASTIC_ATOL:
            v.append(Violation("transition-row-stochastic",
                               f"row not stochastic: row {j + 1} sums to {row.sum():.12g}", j + 1))
    pi0 = model.initial_dist
    if np.any(pi0 < -STOCHASTIC_ATOL) or np.any(pi0 > 1 + STOCHASTIC_ATOL):
        v.append(Violation("initial-dist-range", "pi0 has entries outside [0, 1]", None))
    if abs(pi0.sum() - 1.0) > STOCHASTIC_ATOL:
        v.append(Violation("initial-dist-sum", f"pi0 sums to {pi0.sum():.12g}, not 1", None))
    psi_eigs = np.linalg.eigvalsh(model.init_cov)
    if psi_eigs.size and psi_eigs[0] < -PD_RTOL * max(1.0, float(np.abs(psi_eigs).max())):
        v.append(Violation("psi-psd", f"Psi not positive semidefinite (min eig {psi_eigs[0]:.3e})", None))
    for i, m in enumerate(model.modes, start=1):
        gh = m.G @ m.H.T
        scale = float(np.linalg.norm(m.G) * np.linalg.norm(m.H))
        if np.abs(gh).max(initial=0.0) > ORTHOGONALITY_RTOL * scale:
            v.append(Violation("gh-orthogonal",
                               f"G H' not zero for mode {i} (max entry {np.abs(gh).max():.3e})", i))
        hh_eigs = np.linalg.eigvalsh(m.H @ m.H.T)
        if hh_eigs[0] <= PD_RTOL * max(hh_eigs[-1], 0.0):
            v.append(Violation("hh-positive-definite",
                               f"HH' not positive definite for mode {i}", i))
    return ValidationReport(ok=not v, violations=tuple(v))


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def model_to_dict(model: MjlsModel) -> dict:
    return {
        "n": model.n,
        "p": model.p_dim,
        "q": model.q_dim,
        "modes": [
            {"A": m.A.tolist(), "G": m.G.tolist(), "L": m.L.tolist(), "H": m.H.tolist()}
            for m in model.modes
        ],
        "P": model.transition.tolist(),
        "pi0": model.initial_dist.tolist(),
        "xbar": model.init_mean.tolist(),
        "Psi": model.init_cov.tolist(),
    }


def model_from_dict(doc: dict) -> MjlsModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for key in ("n", "p", "q", "modes", "P", "pi0", "xbar", "Psi"):
        if key not in doc:
            raise ModelFormatError(f"missing field {key!r}")
    try:
        n, p, q = int(doc["n"]), int(doc["p"]), int(doc["q"])
    except (TypeError, ValueError):
        raise ModelFormatError("fields n, p, q must be integers") from None
    modes = []
    for k, entry in enumerate(doc["modes"], start=1):
        if not isinstance(entry, dict):
            raise ModelFormatError(f"modes[{k}] must be an object with A, G, L, H")
        for key in ("A", "G", "L", "H"):
            if key not in entry:
                raise ModelFormatError(f"modes[{k}]: missing matrix {key!r}")
        modes.append(ModeMatrices(
            A=_asarray(entry["A"], f"modes[{k}].A", (n, n)),
            G=_asarray(entry["G"], f"modes[{k}].G", (n, q)),
            L=_asarray(entry["L"], f"modes[{k}].L", (p, n)),
            H=_asarray(entry["H"], f"modes[{k}].H", (p, q)),
        ))
    N = len(modes)
    return MjlsModel(
        n=n, p_dim=p, q_dim=q, modes=tuple(modes),
        transition=_asarray(doc["P"], "P", (N, N)),
        initial_dist=_asarray(doc["pi0"], "pi0", (N,)),
        init_mean=_asarray(doc["xbar"], "xbar", (n,)),
        init_cov=_asarray(doc["Psi"], "Psi", (n, n)),
    )


def save_model(model: MjlsModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> MjlsModel:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        raise ModelFormatError(f"{path}: empty file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    try:
        return model_from_dict(doc)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
