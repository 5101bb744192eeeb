"""Sampling and evaluation of mixed p-spin Hamiltonians.

The energy of a point x in R^N is

    H(x) = sum_p gamma_p N^{-(p+1)/2} sum_{i_1..i_p} g_{i_1..i_p} x_{i_1} ... x_{i_p}

with one i.i.d. standard Gaussian tensor g per active degree (not symmetrized).
All norms and inner products at this scale are the dimension-normalized ones:
|x|_2^2 = (1/N) sum x_i^2, <x, y> = (1/N) sum x_i y_i, so the cube [-1,1]^N has
diameter 2 and energies, gradients and Hessian eigenvalues are O(1) in N.

This module works in plain Euclidean coordinates: ``gradient`` returns the
vector of partials dH/dx_k and ``dense_hessian`` the matrix of second partials.
``curvature_matrix`` returns N times the Euclidean Hessian, which is the
second-derivative form matching the normalized geometry; restricted eigenvalues
of that matrix are the O(1) quantities the ascent and the GOE checks consume.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TENSOR_BUDGET = 2_000_000_000  # max entries of a single N^p tensor
DEFAULT_DENSE_THRESHOLD = 2000

_DUMP_MAGIC = b"PSPN"
_DUMP_VERSION = 1


class DegreeTooLargeError(MemoryError):
    """Requested disorder tensor exceeds the configured memory budget."""


class DimensionMismatchError(ValueError):
    pass


def norm_sq(x: np.ndarray) -> float:
    """Normalized squared norm |x|_2^2 = (1/N) sum x_i^2."""
    x = np.asarray(x, dtype=float)
    return float(x @ x) / x.shape[0]


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Normalized inner product <x, y> = (1/N) sum x_i y_i."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatchError(f"shapes {x.shape} vs {y.shape}")
    return float(x @ y) / x.shape[0]


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    """Deterministic child seed; thread-count independent by construction."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))


def rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *key))


def child_seed(seed: int, *key: int) -> int:
    """64-bit integer seed derived deterministically from (seed, key)."""
    return int(seed_sequence(seed, *key).generate_state(1, np.uint64)[0])


@dataclass
class Disorder:
    """Gaussian coefficient tensors for one Hamiltonian instance.

    Regenerable bit-exactly from (n, seed, degree support) unless ``injected``.
    """

    n: int
    seed: int
    tensors: dict[int, np.ndarray]
    injected: bool = False

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(sorted(self.tensors))


def sample_disorder(
    mixture, n: int, seed: int, budget: int = DEFAULT_TENSOR_BUDGET
) -> Disorder:
    """Sample i.i.d. N(0,1) tensors for every degree with gamma_p > 0.

    Each degree draws from its own seed stream derived from (seed, p), so the
    tensor for degree p does not depend on which other degrees are present.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    tensors: dict[int, np.ndarray] = {}
    for p in mixture.degrees:
        if n**p > budget:
            raise DegreeTooLargeError(
                f"degree-{p} tensor has {n}^{p} entries, budget is {budget}"
            )
        rng = rng_for(seed, p)
        tensors[p] = rng.standard_normal(size=(n,) * p)
    return Disorder(n=n, seed=seed, tensors=tensors)


def write_disorder(disorder: Disorder, path) -> None:
    """Binary dump: PSPN header then little-endian f64 tensors, ascending p."""
    degrees = disorder.degrees
    with open(path, "wb") as f:
        f.write(struct.pack("<4sII", _DUMP_MAGIC, _DUMP_VERSION, disorder.n))
        f.write(struct.pack("<I", len(degrees)))
        f.write(struct.pack(f"<{len(degrees)}I", *degrees))
        f.write(struct.pack("<Q", disorder.seed))
        for p in degrees:
            f.write(np.ascontiguousarray(disorder.tensors[p], dtype="<f8").tobytes())


def read_disorder(path) -> Disorder:
    with open(path, "rb") as f:
        magic, version, n = struct.unpack("<4sII", f.read(12))
        if magic != _DUMP_MAGIC:
            raise ValueError(f"not a disorder dump (magic {magic!r})")
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        (ndeg,) = struct.unpack("<I", f.read(4))
        degrees = struct.unpack(f"<{ndeg}I", f.read(4 * ndeg))
        (seed,) = struct.unpack("<Q", f.read(8))
        tensors = {}
        for p in degrees:
            count = n**p
            buf = f.read(8 * count)
            tensors[p] = np.frombuffer(buf, dtype="<f8").astype(float).reshape((n,) * p)
    return Disorder(n=n, seed=seed, tensors=tensors, injected=True)


def _symmetrize(g: np.ndarray) -> np.ndarray:
    """Sum of g over all axis permutations, built with p adds per level."""
    p = g.ndim
    a = g.copy()
    for k in range(2, p + 1):
        # coset step: after this, a is the permutation sum over the first k axes
        a = sum(np.moveaxis(a, k - 1, j) for j in range(k - 1)) + a
    return a


def _contract(t: np.ndarray, v: np.ndarray, times: int) -> np.ndarray:
    """Contract the last ``times`` axes of a tensor against a vector."""
    for _ in range(times):
        n = t.shape[-1]
        t = (t.reshape(-1, n) @ v).reshape(t.shape[:-1])
    return t


class FreeRestriction:
    """H viewed as a polynomial of the coordinates in a free index set S.

    Coordinates outside S are held at fixed (clamped) values which are folded
    into lower-order tensors, so evaluation cost scales with |S| rather than N.
    ``terms[p]`` maps order r to the symmetric tensor G_{p,r} over S^r with

        contribution of degree p to H  =  (c_p / p!) * sum_r  G_{p,r} : y^r

    where y is the free coordinate vector. Folding a new clamp step z uses

        G'_{r} = sum_j C(r+j, j) * (G_{r+j} : z^j) restricted to the kept axes.
    """

    def __init__(self, free: np.ndarray, weights: dict[int, float], terms):
        self.free = free  # ambient indices of the free coordinates, ascending
        self.weights = weights  # degree -> c_p / p!
        self.terms = terms  # degree -> {order r -> ndarray over S^r}

    @classmethod
    def from_instance(cls, inst: "HamiltonianInstance") -> "FreeRestriction":
        weights = {}
        terms = {}
        for p in inst.mixture.degrees:
            weights[p] = inst.coef(p) / math.factorial(p)
            terms[p] = {p: inst.sym_tensor(p)}
        return cls(np.arange(inst.n), weights, terms)

    @property
    def dim(self) -> int:
        return len(self.free)

    def copy(self) -> "FreeRestriction":
        # tensors are replaced, never mutated, on clamp; sharing is safe
        return FreeRestriction(
            self.free.copy(),
            dict(self.weights),
            {p: dict(rs) for p, rs in self.terms.items()},
        )

    def value(self, y: np.ndarray) -> float:
        total = 0.0
        for p, rs in self.terms.items():
            w = self.weights[p]
            for r, g in rs.items():
                total += w * float(_contract(g, y, r))
        return total

    def grad(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim)
        for p, rs in self.terms.items():
            w = self.weights[p]
            for r, g in rs.items():
                if r >= 1:
                    out += (w * r) * np.atleast_1d(_contract(g, y, r - 1))
        return out

    def hess(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros((self.dim, self.dim))
        for p, rs in self.terms.items():
            w = self.weights[p]
            for r, g in rs.items():
                if r >= 2:
                    out += (w * r * (r - 1)) * np.atleast_2d(_contract(g, y, r - 2))
        return out

    def dir_poly(self, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Coefficients a of H(y + t u) = sum_j a[j] t^j, exact."""
        max_r = max((r for rs in self.terms.values() for r in rs), default=0)
        coefs = np.zeros(max_r + 1)
        for p, rs in self.terms.items():
            w = self.weights[p]
            for r, g in rs.items():
                t = g
                partial = [t]  # G : y^i, i = 0..r
                for _ in range(r):
                    t = _contract(t, y, 1)
                    partial.append(t)
                for j in range(r + 1):
                    val = float(_contract(partial[r - j], u, j))
                    coefs[j] += w * math.comb(r, j) * val
        return coefs

    def clamp(self, local_ids: np.ndarray, values: np.ndarray) -> None:
        """Freeze free coordinates ``local_ids`` (positions within S) at ``values``."""
        if len(local_ids) == 0:
            return
        dz = np.zeros(self.dim)
        dz[local_ids] = values
        keep = np.setdiff1d(np.arange(self.dim), local_ids)
        new_terms = {}
        for p, rs in self.terms.items():
            max_r = max(rs)
            folded: dict[int, np.ndarray] = {}
            for r_new in range(max_r + 1):
                acc = None
                for j in range(max_r - r_new + 1):
                    g = rs.get(r_new + j)
                    if g is None:
                        continue
                    t = _contract(g, dz, j)
                    if r_new > 0:
                        t = t[np.ix_(*([keep] * r_new))]
                    t = math.comb(r_new + j, j) * t
                    acc = t if acc is None else acc + t
                if acc is not None:
                    folded[r_new] = np.ascontiguousarray(acc)
            new_terms[p] = folded
        self.terms = new_terms
        self.free = self.free[keep]


class HamiltonianInstance:
    """A mixture bound to one realization of the disorder.

    Immutable after construction; evaluation methods are pure and safe to call
    concurrently. Symmetrized tensors are built lazily per degree.
    """

    def __init__(self, mixture, disorder: Disorder):
        if tuple(disorder.degrees) != tuple(mixture.degrees):
            raise ValueError(
                f"disorder degrees {disorder.degrees} do not match "
                f"mixture support {mixture.degrees}"
            )
        if disorder.n < 1:
            raise ValueError("need n >= 1")
        self.mixture = mixture
        self.disorder = disorder
        self._sym: dict[int, np.ndarray] = {}

    @classmethod
    def sampled(
        cls, mixture, n: int, seed: int, budget: int = DEFAULT_TENSOR_BUDGET
    ) -> "HamiltonianInstance":
        return cls(mixture, sample_disorder(mixture, n, seed, budget))

    @classmethod
    def from_tensors(
        cls, mixture, tensors: dict[int, np.ndarray], seed: int = 0
    ) -> "HamiltonianInstance":
        """Test-only constructor with explicitly injected coefficient tensors."""
        tensors = {p: np.asarray(t, dtype=float) for p, t in tensors.items()}
        n = next(iter(tensors.values())).shape[0]
        for p, t in tensors.items():
            if t.shape != (n,) * p:
                raise DimensionMismatchError(f"degree {p} tensor has shape {t.shape}")
        return cls(mixture, Disorder(n=n, seed=seed, tensors=tensors, injected=True))

    @property
    def n(self) -> int:
        return self.disorder.n

    def coef(self, p: int) -> float:
        """gamma_p N^{-(p+1)/2}."""
        return self.mixture.gammas[p - 1] * self.n ** (-(p + 1) / 2.0)

    def sym_tensor(self, p: int) -> np.ndarray:
        if p not in self._sym:
            self._sym[p] = _symmetrize(self.disorder.tensors[p])
        return self._sym[p]

    def free_restriction(self) -> FreeRestriction:
        """Fresh full-support polynomial view (for ascent runners to clamp)."""
        return FreeRestriction.from_instance(self)

    def _check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatchError(f"expected shape ({self.n},), got {x.shape}")
        return x

    def energy(self, x: np.ndarray) -> float:
        """H(x), evaluated degree by degree on the raw tensors."""
        x = self._check_point(x)
        total = 0.0
        for p in self.mixture.degrees:
            total += self.coef(p) * float(_contract(self.disorder.tensors[p], x, p))
        return total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Euclidean partials dH/dx_k."""
        x = self._check_point(x)
        out = np.zeros(self.n)
        for p in self.mixture.degrees:
            w = self.coef(p) / math.factorial(p - 1)
            out += w * np.atleast_1d(_contract(self.sym_tensor(p), x, p - 1))
        return out

    def hessian_vec(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(d^2 H) v without forming the dense matrix."""
        x = self._check_point(x)
        v = self._check_point(v)
        out = np.zeros(self.n)
        for p in self.mixture.degrees:
            if p < 2:
                continue
            w = self.coef(p) / math.factorial(p - 2)
            t = _contract(self.sym_tensor(p), v, 1)
            out += w * np.atleast_1d(_contract(t, x, p - 2))
        return out

    def dense_hessian(
        self, x: np.ndarray, threshold: int = DEFAULT_DENSE_THRESHOLD
    ) -> np.ndarray:
        """Symmetric matrix of Euclidean second partials."""
        if self.n > threshold:
            raise ValueError(f"n = {self.n} above dense threshold {threshold}")
        x = self._check_point(x)
        out = np.zeros((self.n, self.n))
        for p in self.mixture.degrees:
            if p < 2:
                continue
            w = self.coef(p) / math.factorial(p - 2)
            out += w * np.atleast_2d(_contract(self.sym_tensor(p), x, p - 2))
        return out

    def curvature_matrix(
        self, x: np.ndarray, threshold: int = DEFAULT_DENSE_THRESHOLD
    ) -> np.ndarray:
        """Second-derivative form of the normalized geometry: N x dense_hessian."""
        return self.n * self.dense_hessian(x, threshold)

    def directional_poly(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Coefficients a with H(x + t w) = sum_j a[j] t^j (exact polynomial)."""
        x = self._check_point(x)
        w = self._check_point(w)
        max_p = max(self.mixture.degrees)
        coefs = np.zeros(max_p + 1)
        for p in self.mixture.degrees:
            g = self.sym_tensor(p)
            wt = self.coef(p) / math.factorial(p)
            t = g
            partial = [t]
            for _ in range(p):
                t = _contract(t, x, 1)
                partial.append(t)
            for j in range(p + 1):
                val = float(_contract(partial[p - j], w, j))
                coefs[j] += wt * math.comb(p, j) * val
        return coefs

    def directional_derivatives(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """(d/dt)^k H(x + t v) at t = 0 for k = 1, 2, 3.

        With |v|_2 = 1 in the normalized norm (Euclidean length sqrt(N)) these
        are the dimension-free directional derivatives.
        """
        coefs = self.directional_poly(x, v)
        out = np.zeros(3)
        for k in (1, 2, 3):
            if k < len(coefs):
                out[k - 1] = coefs[k] * math.factorial(k)
        return out


def covariance_check(
    mixture, n: int, pairs, n_samples: int, seed: int
) -> list[dict]:
    """Empirical Cov(H(x), H(x')) against xi(<x,x'>)/N over fresh disorders.

    ``pairs`` is a list of (x, y) arrays. Returns one record per pair with the
    empirical covariance, the target, the standard error and the z-score.
    """
    pts: list[np.ndarray] = []
    index: list[tuple[int, int]] = []
    for x, y in pairs:
        ij = []
        for p in (np.asarray(x, dtype=float), np.asarray(y, dtype=float)):
            for k, q in enumerate(pts):
                if q.shape == p.shape and np.array_equal(q, p):
                    ij.append(k)
                    break
            else:
                pts.append(p)
                ij.append(len(pts) - 1)
        index.append((ij[0], ij[1]))

    vals = np.empty((n_samples, len(pts)))
    for s in range(n_samples):
        inst = HamiltonianInstance.sampled(mixture, n, seed_sequence(seed, s))
        for k, p in enumerate(pts):
            vals[s, k] = inst.energy(p)

    out = []
    for (i, j), (x, y) in zip(index, pairs):
        a = vals[:, i] - vals[:, i].mean()
        b = vals[:, j] - vals[:, j].mean()
        prods = a * b
        emp = prods.mean() * n_samples / (n_samples - 1)
        se = prods.std(ddof=1) / math.sqrt(n_samples)
        target = mixture.xi(inner(x, y)) / n
        out.append(
            {
                "inner": inner(x, y),
                "target": target,
                "empirical": emp,
                "std_err": se,
                "z": (emp - target) / se if se > 0 else float("inf"),
            }
        )
    return out


def gaussianity_ks(mixture, n: int, x: np.ndarray, n_samples: int, seed: int) -> float:
    """KS statistic of sqrt(N) H(x) / sqrt(xi(|x|^2)) against N(0,1) over seeds."""
    from scipy import stats

    x = np.asarray(x, dtype=float)
    scale = math.sqrt(mixture.xi(norm_sq(x)))
    vals = np.empty(n_samples)
    for s in range(n_samples):
        inst = HamiltonianInstance.sampled(mixture, n, seed_sequence(seed, s))
        vals[s] = math.sqrt(n) * inst.energy(x) / scale
    return float(stats.kstest(vals, "norm").statistic)
