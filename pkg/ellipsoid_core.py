#!/usr/bin/env python3
"""
Ellipsoid Core - complex ellipsoids E_p, unit-ball automorphisms and proper maps

E_p = {z : Σ|z_j|^{2p_j} < 1}. Proper maps E_p → E_q are
Ψ_{p_σ/(q·r)} ∘ φ ∘ Ψ_r ∘ σ with φ ∈ Aut(E_{p_σ/r}); automorphisms act on the
exponent-1 slots by a unit-ball automorphism H and on the remaining slots by
ζ_j·z_{σ(j)}·(√(1−‖a‖²)/(1−⟨z′,a⟩))^{1/p_{σ(j)}}.

Every map is evaluated in homogeneous form (Y, W): the ellipsoid argument is
y_j = Y_j·W^{-1/e_j}, which lets the Hartogs constructors reuse the same code
with W = w^q and keeps canonical maps single-valued.

License: Apache-2.0
"""

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from exponent_core import (
    DEFAULT_LAMBDA,
    ExponentVec,
    Permutation,
    apply_perm,
    compose_perm,
    exponent_classes,
    ext_ratio,
    format_exponent_vec,
    invert_perm,
    is_nat,
    is_symmetry,
    nat_value,
    parse_exponent_vec,
    perm_matchings,
)
from hartogs_errors import CenterTooCloseToSphere, InvalidMap, NoProperMap, NotInDomain, ParseError

CENTER_MARGIN = 1e-9
UNIMODULAR_TOL = 1e-14
MATRIX_IDENTITY_TOL = 1e-10
DEFAULT_TOLERANCE = 1e-9


# ===== JSON helpers =====

def complex_to_pair(value: complex) -> List[float]:
    value = complex(value)
    return [value.real, value.imag]


def pair_to_complex(pair: Any) -> complex:
    if isinstance(pair, (int, float)) and not isinstance(pair, bool):
        return complex(pair)
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ParseError(f"complex number must be [re, im], got {pair!r}")
    try:
        return complex(float(pair[0]), float(pair[1]))
    except (TypeError, ValueError) as e:
        raise ParseError(f"invalid complex pair {pair!r}") from e


def vector_to_pairs(values: Iterable[complex]) -> List[List[float]]:
    return [complex_to_pair(v) for v in values]


def pairs_to_vector(pairs: Sequence) -> np.ndarray:
    if not isinstance(pairs, (list, tuple)):
        raise ParseError(f"complex vector must be a list, got {type(pairs).__name__}")
    return np.array([pair_to_complex(p) for p in pairs], dtype=complex)


def pairs_to_matrix(rows: Sequence) -> np.ndarray:
    if not isinstance(rows, (list, tuple)):
        raise ParseError("complex matrix must be a list of rows")
    if not rows:
        return np.zeros((0, 0), dtype=complex)
    return np.array([[pair_to_complex(p) for p in row] for row in rows], dtype=complex)


# ===== Domain =====

class EllipsoidVerdict(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class EllipsoidDomain:
    """E_p with λ evaluated at lam"""

    p: ExponentVec
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(self.p))
        if not self.p:
            raise ValueError("ellipsoid needs at least one exponent")
        if not self.lam > 0:
            raise ValueError(f"lambda value must be positive, got {self.lam}")

    @property
    def n(self) -> int:
        return len(self.p)

    @cached_property
    def values(self) -> np.ndarray:
        return np.array([e.value(self.lam) for e in self.p])

    @cached_property
    def ball_indices(self) -> Tuple[int, ...]:
        return tuple(j for j, e in enumerate(self.p) if e.is_one)

    @cached_property
    def other_indices(self) -> Tuple[int, ...]:
        return tuple(j for j, e in enumerate(self.p) if not e.is_one)

    @property
    def normalization(self) -> Permutation:
        """Coordinate order with exponent-1 slots first"""
        return self.ball_indices + self.other_indices

    def modulus_sum(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=complex)
        return float(np.sum(np.abs(z) ** (2.0 * self.values)))

    def to_dict(self) -> Dict[str, Any]:
        return {"p": format_exponent_vec(self.p)}


def ep_membership(E: EllipsoidDomain, z: Sequence[complex], tol: float = DEFAULT_TOLERANCE) -> EllipsoidVerdict:
    z = np.asarray(z, dtype=complex)
    if z.shape != (E.n,):
        raise ValueError(f"point has {z.size} coordinates, ellipsoid has {E.n}")
    s = E.modulus_sum(z)
    if abs(s - 1.0) <= tol:
        return EllipsoidVerdict.BOUNDARY
    return EllipsoidVerdict.INTERIOR if s < 1.0 else EllipsoidVerdict.OUTSIDE


def ep_exists(p: ExponentVec, q: ExponentVec) -> Optional[Permutation]:
    """First σ with p_σ/q ∈ ℕ^n"""
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    return perm_matchings(p, q).first()


# ===== Unit-ball automorphisms =====

def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 0:
        return np.zeros((0, 0), dtype=complex)
    z = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_ball_point(k: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    if k == 0:
        return np.zeros(0, dtype=complex)
    direction = rng.normal(size=k) + 1j * rng.normal(size=k)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.uniform() ** (1.0 / (2 * k))


@dataclass(frozen=True, eq=False)
class BallAut:
    """
    H(z) = √(1−‖a‖²)/(1−⟨z,a⟩)·Q(z − a) on the unit ball B_k.
    """

    a: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=complex).reshape(-1))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=complex).reshape(self.a.size, self.a.size))

    @classmethod
    def identity(cls, k: int) -> "BallAut":
        return cls(np.zeros(k, dtype=complex), np.eye(k, dtype=complex))

    @property
    def dim(self) -> int:
        return self.a.size

    @property
    def center_norm(self) -> float:
        return float(np.linalg.norm(self.a))

    @property
    def fixes_origin(self) -> bool:
        return self.center_norm == 0.0

    def __call__(self, z: Sequence[complex]) -> np.ndarray:
        return self.eval_homogeneous(np.asarray(z, dtype=complex), 1.0)

    def eval_homogeneous(self, Y: np.ndarray, W: complex) -> np.ndarray:
        """W·H(Y/W)"""
        if self.dim == 0:
            return np.zeros(0, dtype=complex)
        if self.fixes_origin:
            return self.Q @ Y
        s = np.sqrt(1.0 - self.center_norm ** 2)
        denominator = W - np.vdot(self.a, Y)
        return (s * W / denominator) * (self.Q @ (Y - self.a * W))

    def scale_factor(self, Y: np.ndarray, W: complex = 1.0) -> complex:
        """√(1−‖a‖²)/(1−⟨Y/W,a⟩)"""
        if self.dim == 0 or self.fixes_origin:
            return 1.0 + 0j
        s = np.sqrt(1.0 - self.center_norm ** 2)
        return complex(s * W / (W - np.vdot(self.a, Y)))

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.fixes_origin:
            return self.Q.copy()
        s = np.sqrt(1.0 - self.center_norm ** 2)
        denominator = 1.0 - np.vdot(self.a, z)
        inner = np.eye(self.dim) + np.outer(z - self.a, self.a.conj()) / denominator
        return (s / denominator) * (self.Q @ inner)

    def identity_residual(self) -> float:
        """Frobenius norm of Q̄(I − ā·ᵗa)·ᵗQ − I"""
        k = self.dim
        if k == 0:
            return 0.0
        middle = np.eye(k) - np.outer(self.a.conj(), self.a)
        return float(np.linalg.norm(self.Q.conj() @ middle @ self.Q.T - np.eye(k)))

    @classmethod
    def _from_center_and_jacobian(cls, center: np.ndarray, jacobian: np.ndarray) -> "BallAut":
        # dH(a) = Q/√(1−‖a‖²) for the normal form above
        s = np.sqrt(1.0 - float(np.linalg.norm(center)) ** 2)
        return cls(center, s * jacobian)

    def inverse(self) -> "BallAut":
        if self.fixes_origin:
            return BallAut(self.a.copy(), np.linalg.inv(self.Q))
        center = self(np.zeros(self.dim, dtype=complex))
        return BallAut._from_center_and_jacobian(center, np.linalg.inv(self.jacobian(np.zeros(self.dim))))

    def compose(self, inner: "BallAut") -> "BallAut":
        """self ∘ inner"""
        if self.dim != inner.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {inner.dim}")
        if self.fixes_origin and inner.fixes_origin:
            return BallAut(np.zeros(self.dim, dtype=complex), self.Q @ inner.Q)
        center = inner.inverse()(self.a)
        jacobian = self.jacobian(inner(center)) @ inner.jacobian(center)
        return BallAut._from_center_and_jacobian(center, jacobian)

    def to_dict(self) -> Dict[str, Any]:
        return {"a": vector_to_pairs(self.a), "Q": [vector_to_pairs(row) for row in self.Q]}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], k: int) -> "BallAut":
        a = pairs_to_vector(payload.get("a", []))
        q_rows = payload.get("Q")
        Q = pairs_to_matrix(q_rows) if q_rows else np.eye(a.size, dtype=complex)
        if a.size != k or Q.shape != (k, k):
            raise ParseError(f"ball automorphism must act on {k} coordinates, got a={a.size}, Q={Q.shape}")
        return cls(a, Q)


def ball_aut(a: Sequence[complex], unitary: Optional[np.ndarray] = None) -> BallAut:
    """
    Ball automorphism sending a to 0. Q = U·(I − a·a^H)^{-1/2}; the square root
    of the rank-one perturbation is I + (1/√(1−‖a‖²) − 1)·a·a^H/‖a‖².
    """
    a = np.asarray(a, dtype=complex).reshape(-1)
    k = a.size
    norm = float(np.linalg.norm(a))
    if norm >= 1.0 - CENTER_MARGIN:
        raise CenterTooCloseToSphere(f"center norm {norm} is not below 1 - {CENTER_MARGIN}", {"norm": norm})
    U = np.eye(k, dtype=complex) if unitary is None else np.asarray(unitary, dtype=complex)
    if U.shape != (k, k):
        raise ValueError(f"unitary must be {k}x{k}, got {U.shape}")
    root = np.eye(k, dtype=complex)
    if norm > 0:
        s = np.sqrt(1.0 - norm ** 2)
        root = root + (1.0 / s - 1.0) * np.outer(a, a.conj()) / norm ** 2
    return BallAut(a, U @ root)


def disc_mobius(a: complex, unimodular: complex = 1.0) -> BallAut:
    """φ(t) = ζ·(t − a)/(1 − āt) as a one-dimensional BallAut"""
    return ball_aut([a], np.array([[unimodular]], dtype=complex))


# ===== Ellipsoid automorphisms =====

@dataclass(frozen=True, eq=False)
class EllipsoidAut:
    """
    Automorphism of E_p. H acts on ball_indices (ascending), zetas align with
    other_indices, sigma is a full permutation in Σ_n(p) that is the identity
    on the exponent-1 slots.
    """

    domain: EllipsoidDomain
    H: BallAut
    zetas: np.ndarray
    sigma: Permutation

    def __post_init__(self):
        object.__setattr__(self, "zetas", np.asarray(self.zetas, dtype=complex).reshape(-1))
        object.__setattr__(self, "sigma", tuple(int(i) for i in self.sigma))

    @property
    def k(self) -> int:
        return self.H.dim

    @property
    def normalization(self) -> Permutation:
        return self.domain.normalization

    @property
    def fixes_origin(self) -> bool:
        return self.H.fixes_origin

    @property
    def is_identity(self) -> bool:
        return (
            self.fixes_origin
            and np.allclose(self.H.Q, np.eye(self.k), atol=1e-14)
            and np.allclose(self.zetas, 1.0, atol=1e-14)
            and self.sigma == tuple(range(self.domain.n))
        )

    def _zeta_full(self) -> np.ndarray:
        full = np.ones(self.domain.n, dtype=complex)
        full[list(self.domain.other_indices)] = self.zetas
        return full

    def eval_homogeneous(self, Y: np.ndarray, W: complex = 1.0) -> np.ndarray:
        """W-homogeneous evaluation: component j equals W^{1/p_j}·φ_j(y)"""
        Y = np.asarray(Y, dtype=complex)
        ball = list(self.domain.ball_indices)
        out = np.empty(self.domain.n, dtype=complex)
        out[ball] = self.H.eval_homogeneous(Y[ball], W)
        factor = self.H.scale_factor(Y[ball], W)
        values = self.domain.values
        for position, j in enumerate(self.domain.other_indices):
            source = self.sigma[j]
            power = 1.0 if factor == 1 else factor ** (1.0 / values[source])
            out[j] = self.zetas[position] * Y[source] * power
        return out

    def __call__(self, z: Sequence[complex]) -> np.ndarray:
        return self.eval_homogeneous(np.asarray(z, dtype=complex), 1.0)

    def inverse(self) -> "EllipsoidAut":
        sigma_inv = invert_perm(self.sigma)
        full = self._zeta_full()
        zetas = [1.0 / full[sigma_inv[j]] for j in self.domain.other_indices]
        return EllipsoidAut(self.domain, self.H.inverse(), np.array(zetas), sigma_inv)

    def compose(self, inner: "EllipsoidAut") -> "EllipsoidAut":
        """self ∘ inner"""
        if self.domain.p != inner.domain.p:
            raise ValueError("automorphisms act on different ellipsoids")
        H = self.H.compose(inner.H)
        theta = 0.0
        if H.dim and not H.fixes_origin:
            # the continuous branch of arg(f_inner·f_self∘H_inner) vanishes at H's center
            theta = float(np.angle(inner.H.scale_factor(H.a)))
        sigma = compose_perm(inner.sigma, self.sigma)
        outer_full, inner_full = self._zeta_full(), inner._zeta_full()
        values = self.domain.values
        zetas = []
        for j in self.domain.other_indices:
            zeta = outer_full[j] * inner_full[self.sigma[j]] * np.exp(1j * theta / values[j])
            zetas.append(zeta / abs(zeta))
        return EllipsoidAut(self.domain, H, np.array(zetas), sigma)

    def to_dict(self) -> Dict[str, Any]:
        payload = self.H.to_dict()
        payload["zetas"] = vector_to_pairs(self.zetas)
        payload["sigma"] = list(self.sigma)
        return payload

    @classmethod
    def from_dict(cls, domain: EllipsoidDomain, payload: Optional[Dict[str, Any]]) -> "EllipsoidAut":
        if not payload:
            return identity_aut(domain)
        if not isinstance(payload, dict):
            raise ParseError("automorphism descriptor must be an object")
        k = len(domain.ball_indices)
        H = BallAut.from_dict(payload, k)
        zetas = pairs_to_vector(payload.get("zetas", [[1.0, 0.0]] * (domain.n - k)))
        sigma = tuple(payload.get("sigma", range(domain.n)))
        return ep_aut(domain, H, zetas, sigma)


def ep_aut_violations(E: EllipsoidDomain, H: BallAut, zetas: np.ndarray, sigma: Permutation) -> List[str]:
    violations = []
    k = len(E.ball_indices)
    if H.dim != k:
        violations.append(f"ball automorphism acts on {H.dim} slots, domain has {k} exponent-1 slots")
    elif H.center_norm >= 1.0:
        violations.append(f"ball center norm {H.center_norm} >= 1")
    elif H.identity_residual() > MATRIX_IDENTITY_TOL:
        violations.append(f"matrix identity residual {H.identity_residual():.3e}")
    if len(zetas) != E.n - k:
        violations.append(f"expected {E.n - k} unimodular scalars, got {len(zetas)}")
    elif len(zetas) and np.max(np.abs(np.abs(zetas) - 1.0)) > UNIMODULAR_TOL:
        violations.append("scalars are not unimodular")
    if not is_symmetry(E.p, tuple(sigma)):
        violations.append(f"sigma {tuple(sigma)} does not fix the exponent vector")
    return violations


def ep_aut(E: EllipsoidDomain, H: BallAut, zetas: Sequence[complex], sigma: Sequence[int]) -> EllipsoidAut:
    zetas = np.asarray(zetas, dtype=complex).reshape(-1)
    sigma = tuple(int(i) for i in sigma)
    violations = ep_aut_violations(E, H, zetas, sigma)
    if violations:
        raise InvalidMap("invalid ellipsoid automorphism", violations)
    # the two-case formula ignores σ on the ball block
    sigma = tuple(j if E.p[j].is_one else i for j, i in enumerate(sigma))
    return EllipsoidAut(E, H, zetas, sigma)


def identity_aut(E: EllipsoidDomain) -> EllipsoidAut:
    k = len(E.ball_indices)
    return EllipsoidAut(E, BallAut.identity(k), np.ones(E.n - k, dtype=complex), tuple(range(E.n)))


def ep_aut_eval(A: EllipsoidAut, z: Sequence[complex], tol: float = DEFAULT_TOLERANCE) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if ep_membership(A.domain, z, tol) == EllipsoidVerdict.OUTSIDE:
        raise NotInDomain(f"point lies outside E_p (sum {A.domain.modulus_sum(z):.6g})")
    return A(z)


def random_symmetry(p: ExponentVec, rng: np.random.Generator) -> Permutation:
    """Uniform σ ∈ Σ_n(p) that fixes the exponent-1 slots"""
    sigma = list(range(len(p)))
    for indices in exponent_classes(p):
        if p[indices[0]].is_one:
            continue
        shuffled = list(rng.permutation(indices))
        for j, i in zip(indices, shuffled):
            sigma[j] = int(i)
    return tuple(sigma)


def random_ellipsoid_aut(
    E: EllipsoidDomain, rng: np.random.Generator, fix_origin: bool = True, max_center: float = 0.6
) -> EllipsoidAut:
    k = len(E.ball_indices)
    U = random_unitary(k, rng)
    center = np.zeros(k, dtype=complex) if fix_origin else random_ball_point(k, rng, max_center)
    H = ball_aut(center, U)
    zetas = np.exp(2j * np.pi * rng.uniform(size=E.n - k))
    return ep_aut(E, H, zetas, random_symmetry(E.p, rng))


# ===== Proper maps =====

@dataclass(frozen=True, eq=False)
class EllipsoidProperMap:
    """F = Ψ_{p_σ/(q·r)} ∘ φ ∘ Ψ_r ∘ σ : E_p → E_q"""

    source: EllipsoidDomain
    target: EllipsoidDomain
    sigma: Permutation
    r: Tuple[int, ...]
    phi: EllipsoidAut

    @cached_property
    def intermediate(self) -> ExponentVec:
        """p_σ/r"""
        return tuple(self.source.p[i].scaled(_inverse(rj)) for i, rj in zip(self.sigma, self.r))

    @cached_property
    def c(self) -> Tuple[int, ...]:
        """p_σ/(q·r)"""
        return tuple(nat_value(ext_ratio(e, qj)) for e, qj in zip(self.intermediate, self.target.p))

    @property
    def fixes_origin(self) -> bool:
        return self.phi.fixes_origin

    @property
    def is_canonical(self) -> bool:
        return self.phi.is_identity

    def eval_homogeneous(self, Z: np.ndarray, W: complex = 1.0) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex)
        Y = np.array([Z[i] ** rj for i, rj in zip(self.sigma, self.r)], dtype=complex)
        return self.phi.eval_homogeneous(Y, W) ** np.array(self.c)

    def __call__(self, z: Sequence[complex]) -> np.ndarray:
        return self.eval_homogeneous(np.asarray(z, dtype=complex), 1.0)

    def modulus_factor(self, Z: np.ndarray, W: complex = 1.0) -> float:
        """J with 1 − s_q(F(z)) = J·(1 − s_p(z)), z = Z/W^{1/p}; J = 1 when φ fixes the origin"""
        Z = np.asarray(Z, dtype=complex)
        Y = np.array([Z[i] ** rj for i, rj in zip(self.sigma, self.r)], dtype=complex)
        ball = list(self.phi.domain.ball_indices)
        return float(abs(self.phi.H.scale_factor(Y[ball], W)) ** 2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": format_exponent_vec(self.source.p),
            "target": format_exponent_vec(self.target.p),
            "sigma": list(self.sigma),
            "r": list(self.r),
            "phi": self.phi.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any], lam: float = DEFAULT_LAMBDA) -> "EllipsoidProperMap":
        if not isinstance(payload, dict):
            raise ParseError("ellipsoid map descriptor must be an object")
        try:
            source = EllipsoidDomain(parse_exponent_vec(payload["source"]), lam)
            target = EllipsoidDomain(parse_exponent_vec(payload["target"]), lam)
            sigma = tuple(int(i) for i in payload["sigma"])
            r = tuple(int(x) for x in payload["r"])
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"malformed ellipsoid map descriptor: {e}") from e
        if len(sigma) != source.n or len(r) != source.n:
            raise ParseError("sigma and r must have one entry per coordinate")
        if sorted(sigma) != list(range(source.n)) or any(rj < 1 for rj in r):
            raise ParseError("sigma must be a permutation and r positive")
        intermediate = EllipsoidDomain(tuple(source.p[i].scaled(_inverse(rj)) for i, rj in zip(sigma, r)), lam)
        phi = EllipsoidAut.from_dict(intermediate, payload.get("phi"))
        return ep_proper(source, target, sigma, r, phi)


def _inverse(r: int) -> Fraction:
    return Fraction(1, r)


def ep_proper_validate(M: EllipsoidProperMap) -> List[str]:
    violations = []
    n = M.source.n
    if M.target.n != n:
        return [f"source has {n} coordinates, target has {M.target.n}"]
    if sorted(M.sigma) != list(range(n)):
        return [f"sigma {M.sigma} is not a permutation"]
    if len(M.r) != n or any(rj < 1 for rj in M.r):
        return [f"r {M.r} must be {n} positive integers"]
    p_sigma = apply_perm(M.source.p, M.sigma)
    for j, (pj, qj) in enumerate(zip(p_sigma, M.target.p)):
        if not is_nat(ext_ratio(pj, qj)):
            violations.append(f"p_sigma[{j}]/q[{j}] = {pj}/{qj} is not a natural number")
        elif not is_nat(ext_ratio(pj.scaled(_inverse(M.r[j])), qj)):
            violations.append(f"p_sigma[{j}]/(q[{j}]*r[{j}]) is not a natural number")
    if M.phi.domain.p != M.intermediate:
        violations.append("phi does not act on the intermediate ellipsoid p_sigma/r")
    else:
        violations.extend(ep_aut_violations(M.phi.domain, M.phi.H, M.phi.zetas, M.phi.sigma))
    return violations


def ep_proper(
    source: EllipsoidDomain, target: EllipsoidDomain, sigma: Sequence[int], r: Sequence[int], phi: EllipsoidAut
) -> EllipsoidProperMap:
    M = EllipsoidProperMap(source, target, tuple(int(i) for i in sigma), tuple(int(x) for x in r), phi)
    violations = ep_proper_validate(M)
    if violations:
        raise InvalidMap("invalid ellipsoid proper map", violations)
    return M


def ep_proper_canonical(p: ExponentVec, q: ExponentVec, lam: float = DEFAULT_LAMBDA) -> EllipsoidProperMap:
    """Ψ_{p_σ/q} ∘ σ for the first admissible σ (φ = id, r = p_σ/q)"""
    sigma = ep_exists(p, q)
    if sigma is None:
        raise NoProperMap(f"no proper map E_{format_exponent_vec(p)} -> E_{format_exponent_vec(q)}")
    r = tuple(nat_value(ext_ratio(p[i], qj)) for i, qj in zip(sigma, q))
    source, target = EllipsoidDomain(p, lam), EllipsoidDomain(q, lam)
    phi = identity_aut(EllipsoidDomain(q, lam))
    logger.debug(f"canonical ellipsoid map sigma={sigma} r={r}")
    return ep_proper(source, target, sigma, r, phi)


def mixing_r(p: ExponentVec, q: ExponentVec, sigma: Permutation, mixed: Sequence[bool]) -> Tuple[int, ...]:
    """
    r_j = p_{σ(j)} on slots the automorphism mixes or recentres, p_{σ(j)}/q_j
    elsewhere; the mixed slots then become exponent-1 slots of p_σ/r.
    """
    r = []
    for j, (i, qj) in enumerate(zip(sigma, q)):
        pj = p[i]
        if mixed[j]:
            if not pj.is_integer:
                raise InvalidMap(f"slot {j} has non-integer exponent {pj} and cannot be mixed")
            r.append(pj.ratio.numerator)
        else:
            value = nat_value(ext_ratio(pj, qj))
            if value is None:
                raise InvalidMap(f"p_sigma[{j}]/q[{j}] is not a natural number")
            r.append(value)
    return tuple(r)


def ep_proper_mixed(
    p: ExponentVec,
    q: ExponentVec,
    sigma: Sequence[int],
    mixed: Sequence[bool],
    H: BallAut,
    zetas: Optional[Sequence[complex]] = None,
    lam: float = DEFAULT_LAMBDA,
) -> EllipsoidProperMap:
    """
    Ψ_{p_σ/(q·r)} ∘ φ ∘ Ψ_r ∘ σ with r from mixing_r and φ = (H, zetas) on the
    intermediate ellipsoid p_σ/r. H acts on its exponent-1 slots.
    """
    sigma = tuple(int(i) for i in sigma)
    if sorted(sigma) != list(range(len(p))) or len(mixed) != len(p) or len(q) != len(p):
        raise InvalidMap("sigma, mixed and q must match the source dimension")
    r = mixing_r(p, q, sigma, mixed)
    intermediate = EllipsoidDomain(tuple(p[i].scaled(_inverse(rj)) for i, rj in zip(sigma, r)), lam)
    if zetas is None:
        zetas = np.ones(intermediate.n - len(intermediate.ball_indices), dtype=complex)
    phi = ep_aut(intermediate, H, zetas, tuple(range(intermediate.n)))
    logger.debug(f"mixed ellipsoid map sigma={sigma} r={r} center_norm={H.center_norm:.3g}")
    return ep_proper(EllipsoidDomain(p, lam), EllipsoidDomain(q, lam), sigma, r, phi)


def ep_modulus_residual(M: EllipsoidProperMap, z: Sequence[complex], image: Optional[np.ndarray] = None) -> float:
    """|(1 − s_q(F(z))) − J·(1 − s_p(z))|"""
    z = np.asarray(z, dtype=complex)
    image = M(z) if image is None else np.asarray(image, dtype=complex)
    expected = M.modulus_factor(z) * (1.0 - M.source.modulus_sum(z))
    return abs((1.0 - M.target.modulus_sum(image)) - expected)


def ep_proper_eval(M: EllipsoidProperMap, z: Sequence[complex], tol: float = DEFAULT_TOLERANCE) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if ep_membership(M.source, z, tol) == EllipsoidVerdict.OUTSIDE:
        raise NotInDomain(f"point lies outside the source ellipsoid (sum {M.source.modulus_sum(z):.6g})")
    return M(z)


# ===== Landucci-form fitting =====

def _unitary_part(V: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(V)
    return u @ vh


def _fit_target_aut(
    target: EllipsoidDomain, Y: np.ndarray, F: np.ndarray, origin_image: np.ndarray
) -> List[EllipsoidAut]:
    """Candidate φ′ ∈ Aut(E_q) with φ′(Y_i) ≈ F_i, one per admissible τ"""
    ball = list(target.ball_indices)
    others = target.other_indices
    k = len(ball)
    if k:
        b = origin_image[ball]
        to_origin = ball_aut(b) if np.linalg.norm(b) < 1.0 - CENTER_MARGIN else BallAut.identity(k)
        straightened = np.array([to_origin(f[ball]) for f in F])
        V, *_ = np.linalg.lstsq(Y[:, ball], straightened, rcond=None)
        linear = BallAut(np.zeros(k, dtype=complex), _unitary_part(V.T))
        H = to_origin.inverse().compose(linear)
    else:
        H = BallAut.identity(0)
    factors = np.array([H.scale_factor(y[ball]) for y in Y])
    values = target.values

    candidates = []
    seen = set()
    for tau in perm_matchings(target.p, target.p):
        key = tuple(tau[j] for j in others)
        if key in seen:
            continue
        seen.add(key)
        zetas = []
        for j in others:
            g = Y[:, tau[j]] * factors ** (1.0 / values[tau[j]])
            norm = np.vdot(g, g).real
            zeta = np.vdot(g, F[:, j]) / norm if norm > 0 else 1.0
            zetas.append(zeta / abs(zeta) if abs(zeta) > 0 else 1.0)
        sigma = tuple(j if target.p[j].is_one else tau[j] for j in range(target.n))
        candidates.append(EllipsoidAut(target, H, np.array(zetas, dtype=complex), sigma))
    return candidates


def landucci_residual(M: EllipsoidProperMap, samples: Sequence[Sequence[complex]]) -> float:
    """
    Smallest worst-case deviation between M and a fitted map φ′ ∘ Ψ_{p_σ/q} ∘ σ
    with φ′ ∈ Aut(E_q); zero up to round-off iff M has that form on the samples.
    """
    samples = np.asarray(samples, dtype=complex)
    F = np.array([M(z) for z in samples])
    origin_image = M(np.zeros(M.source.n, dtype=complex))
    best = np.inf
    for sigma in perm_matchings(M.source.p, M.target.p):
        powers = [nat_value(ext_ratio(M.source.p[i], qj)) for i, qj in zip(sigma, M.target.p)]
        Y = np.array([[z[i] ** rho for i, rho in zip(sigma, powers)] for z in samples])
        for phi in _fit_target_aut(M.target, Y, F, origin_image):
            fitted = np.array([phi(y) for y in Y])
            best = min(best, float(np.max(np.abs(fitted - F))))
    logger.debug(f"landucci residual {best:.3e}")
    return best


# ===== Preimages =====

MAX_PREIMAGE_CANDIDATES = 20_000


def all_roots(value: complex, degree: int) -> List[complex]:
    """All degree-th roots of value"""
    if degree == 1:
        return [complex(value)]
    if value == 0:
        return [0j]
    principal = complex(value) ** (1.0 / degree)
    return [principal * np.exp(2j * np.pi * t / degree) for t in range(degree)]


def _root_product(values: Sequence[complex], degrees: Sequence[int]) -> List[np.ndarray]:
    total = int(np.prod([max(d, 1) for d in degrees])) if degrees else 1
    if total > MAX_PREIMAGE_CANDIDATES:
        raise ValueError(f"{total} preimage candidates exceed the limit {MAX_PREIMAGE_CANDIDATES}")
    candidates: List[List[complex]] = [[]]
    for value, degree in zip(values, degrees):
        candidates = [c + [root] for c in candidates for root in all_roots(value, degree)]
    return [np.array(c, dtype=complex) for c in candidates]


def ep_preimage_candidates(M: EllipsoidProperMap, target: np.ndarray, W: complex = 1.0) -> List[np.ndarray]:
    """Every Z with M.eval_homogeneous(Z, W) = target, before domain filtering"""
    target = np.asarray(target, dtype=complex)
    inverse = M.phi.inverse()
    sigma_inv = invert_perm(M.sigma)
    results = []
    for Phi in _root_product(target, M.c):
        Y = inverse.eval_homogeneous(Phi, W)
        for roots in _root_product(Y, M.r):
            results.append(np.array([roots[sigma_inv[i]] for i in range(M.source.n)], dtype=complex))
    return results
