#!/usr/bin/env python3
"""
Hartogs Core - generalized Hartogs triangles and their proper holomorphic maps

𝔽_{p,q} = {(z, w) ∈ ℂⁿ×ℂᵐ : Σ|z_j|^{2p_j} < Σ|w_j|^{2q_j} < 1}

The boundary splits into the origin, K (Σ|z|^{2p} = Σ|w|^{2q} < 1) and
L (Σ|w|^{2q} = 1). Proper maps between equidimensional triangles come in four
families depending on (n, m):

    11  (ζ·z^k·w^b·B(z^{p'}w^{-q'}), ξ·w^l)
    1m  (ζ·z^k, h(w))                      h: E_q → E_q̃, h(0) = 0
    n1  (w^{e_j}·f_j(z, w^q), ξ·w^r)        f: E_p → E_p̃, e_j = (r·q̃ − q)/p̃_j
    nm  (g(z), h(w))                        g(0) = 0, h(0) = 0

License: Apache-2.0
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ellipsoid_core import (
    DEFAULT_TOLERANCE,
    BallAut,
    EllipsoidAut,
    EllipsoidDomain,
    EllipsoidProperMap,
    all_roots,
    complex_to_pair,
    disc_mobius,
    ep_exists,
    ep_modulus_residual,
    ep_preimage_candidates,
    ep_proper,
    ep_proper_canonical,
    ep_proper_validate,
    identity_aut,
    pair_to_complex,
    random_ellipsoid_aut,
)
from exponent_core import (
    DEFAULT_LAMBDA,
    Exponent,
    ExponentVec,
    Permutation,
    ext_ratio,
    format_exponent_vec,
    int_diff_value,
    is_nat,
    nat_value,
    parse_exponent_vec,
    perm_matchings,
    solve_kl,
    solve_r,
)
from hartogs_errors import BranchPole, DimensionMismatch, InvalidMap, NoProperMap, NotInDomain, ParseError

UNIMODULAR_TOL = 1e-14

Point = Tuple[np.ndarray, np.ndarray]


# ===== Domains and membership =====

class MembershipVerdict(Enum):
    INTERIOR = "interior"
    ON_K = "on_k"
    ON_L = "on_l"
    ORIGIN = "origin"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class HartogsDomain:
    """𝔽_{p,q} with λ evaluated at lam"""

    p: ExponentVec
    q: ExponentVec
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(self.p))
        object.__setattr__(self, "q", tuple(self.q))
        if not self.p or not self.q:
            raise ValueError("Hartogs triangle needs n >= 1 and m >= 1")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def m(self) -> int:
        return len(self.q)

    @property
    def z_domain(self) -> EllipsoidDomain:
        return EllipsoidDomain(self.p, self.lam)

    @property
    def w_domain(self) -> EllipsoidDomain:
        return EllipsoidDomain(self.q, self.lam)

    @property
    def regime(self) -> str:
        return ("1" if self.n == 1 else "n") + ("1" if self.m == 1 else "m")

    def modulus_sums(self, point: Point) -> Tuple[float, float]:
        z, w = point
        return self.z_domain.modulus_sum(z), self.w_domain.modulus_sum(w)

    def to_dict(self) -> Dict[str, Any]:
        return {"p": format_exponent_vec(self.p), "q": format_exponent_vec(self.q)}

    def __str__(self) -> str:
        return f"F_{{({','.join(format_exponent_vec(self.p))}),({','.join(format_exponent_vec(self.q))})}}"


def domain_from_dict(payload: Union[str, Dict[str, Any]], lam: float = DEFAULT_LAMBDA) -> HartogsDomain:
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as e:
            raise ParseError(f"domain descriptor is not valid JSON: {e}") from e
    if not isinstance(payload, dict) or "p" not in payload or "q" not in payload:
        raise ParseError('domain descriptor must be {"p": [...], "q": [...]}')
    return HartogsDomain(parse_exponent_vec(payload["p"]), parse_exponent_vec(payload["q"]), lam)


def as_point(point: Any, D: Optional[HartogsDomain] = None) -> Point:
    z, w = point
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if D is not None and (z.size != D.n or w.size != D.m):
        raise DimensionMismatch(f"point has shape ({z.size},{w.size}), domain needs ({D.n},{D.m})")
    return z, w


def split_point(flat: Sequence[complex], n: int) -> Point:
    flat = np.asarray(flat, dtype=complex)
    return flat[:n].copy(), flat[n:].copy()


def join_point(point: Point) -> np.ndarray:
    return np.concatenate([np.atleast_1d(point[0]), np.atleast_1d(point[1])])


def membership(D: HartogsDomain, point: Any, tol: float = DEFAULT_TOLERANCE) -> MembershipVerdict:
    """Corner points (s_z ≈ s_w ≈ 1) report ON_L"""
    s_z, s_w = D.modulus_sums(as_point(point, D))
    if s_w > 1.0 + tol or s_z > s_w + tol:
        return MembershipVerdict.OUTSIDE
    if s_w <= tol and abs(s_z - s_w) <= tol:
        return MembershipVerdict.ORIGIN
    if abs(s_w - 1.0) <= tol:
        return MembershipVerdict.ON_L
    if abs(s_z - s_w) <= tol:
        return MembershipVerdict.ON_K
    return MembershipVerdict.INTERIOR


# ===== Blaschke products =====

@dataclass(frozen=True)
class BlaschkeProduct:
    """B(t) = ζ·Π((t − α)/(1 − ᾱt))^mult"""

    zeros: Tuple[Tuple[complex, int], ...]
    unimodular: complex = 1.0 + 0j

    def __post_init__(self):
        zeros = tuple((complex(alpha), int(mult)) for alpha, mult in self.zeros)
        for alpha, mult in zeros:
            if abs(alpha) >= 1.0:
                raise ValueError(f"Blaschke zero {alpha} lies outside the unit disc")
            if mult < 1:
                raise ValueError(f"multiplicity must be positive, got {mult}")
        if abs(abs(complex(self.unimodular)) - 1.0) > UNIMODULAR_TOL:
            raise ValueError(f"Blaschke constant {self.unimodular} is not unimodular")
        object.__setattr__(self, "zeros", zeros)
        object.__setattr__(self, "unimodular", complex(self.unimodular))

    @property
    def degree(self) -> int:
        return sum(mult for _, mult in self.zeros)

    @property
    def non_vanishing_at_0(self) -> bool:
        return all(alpha != 0 for alpha, _ in self.zeros)

    def __call__(self, t: complex) -> complex:
        value = self.unimodular
        for alpha, mult in self.zeros:
            value *= ((t - alpha) / (1.0 - np.conj(alpha) * t)) ** mult
        return complex(value)

    def numerator_denominator(self) -> Tuple[np.poly1d, np.poly1d]:
        """Polynomials N, D in t with B = N/D"""
        numerator, denominator = np.poly1d([self.unimodular]), np.poly1d([1.0 + 0j])
        for alpha, mult in self.zeros:
            numerator *= np.poly1d([1.0, -alpha]) ** mult
            denominator *= np.poly1d([-np.conj(alpha), 1.0]) ** mult
        return numerator, denominator

    def to_dict(self) -> Dict[str, Any]:
        return {
            "zeros": [{"alpha": complex_to_pair(alpha), "multiplicity": mult} for alpha, mult in self.zeros],
            "unimodular": complex_to_pair(self.unimodular),
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "BlaschkeProduct":
        try:
            zeros = tuple(
                (pair_to_complex(z["alpha"]), int(z.get("multiplicity", 1))) for z in payload.get("zeros", [])
            )
            return cls(zeros, pair_to_complex(payload.get("unimodular", [1.0, 0.0])))
        except (KeyError, TypeError, AttributeError, ValueError) as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(f"malformed Blaschke product: {e}") from e

    @classmethod
    def from_disc_aut(cls, phi: BallAut) -> "BlaschkeProduct":
        """Degree-one product equal to a disc automorphism that moves the origin"""
        a = complex(phi.a[0])
        s = np.sqrt(1.0 - abs(a) ** 2)
        u = complex(phi.Q[0, 0]) * s
        return cls(((a, 1),), u / abs(u))


def _is_unimodular(value: complex) -> bool:
    return abs(abs(value) - 1.0) <= UNIMODULAR_TOL


def _unit(value: complex) -> complex:
    return complex(value) / abs(value)


# ===== Proper maps =====

@dataclass(frozen=True, eq=False)
class Case11Map:
    """(ζ·z^k·w^b·B(z^{p'}w^{-q'}), ξ·w^l) for n = m = 1"""

    src: HartogsDomain
    dst: HartogsDomain
    k: int
    l: int
    b: int
    zeta: complex = 1.0 + 0j
    xi: complex = 1.0 + 0j
    blaschke: Optional[BlaschkeProduct] = None
    p_prime: Optional[int] = None
    q_prime: Optional[int] = None
    case: ClassVar[str] = "11"

    def __call__(self, point: Point) -> Point:
        z, w = complex(np.ravel(point[0])[0]), complex(np.ravel(point[1])[0])
        if w == 0 and (self.b < 0 or self.blaschke is not None):
            raise BranchPole("w = 0 is a pole of the first component")
        g = self.zeta * z ** self.k * w ** self.b
        if self.blaschke is not None:
            g *= self.blaschke(z ** self.p_prime * w ** (-self.q_prime))
        return np.array([g]), np.array([self.xi * w ** self.l])

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "case": self.case,
            "src": self.src.to_dict(),
            "dst": self.dst.to_dict(),
            "k": self.k,
            "l": self.l,
            "b": self.b,
            "zeta": complex_to_pair(self.zeta),
            "xi": complex_to_pair(self.xi),
        }
        if self.blaschke is not None:
            payload.update(blaschke=self.blaschke.to_dict(), p_prime=self.p_prime, q_prime=self.q_prime)
        return payload


@dataclass(frozen=True, eq=False)
class Case1mMap:
    """(ζ·z^k, h(w)) for n = 1, m ≥ 2"""

    src: HartogsDomain
    dst: HartogsDomain
    k: int
    h: EllipsoidProperMap
    zeta: complex = 1.0 + 0j
    case: ClassVar[str] = "1m"

    def __call__(self, point: Point) -> Point:
        z, w = point
        return np.atleast_1d(self.zeta * np.asarray(z, dtype=complex) ** self.k), self.h(w)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "src": self.src.to_dict(),
            "dst": self.dst.to_dict(),
            "k": self.k,
            "zeta": complex_to_pair(self.zeta),
            "h": self.h.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class Casen1Map:
    """(w^{e_j}·f_j(z, w^q), ξ·w^r) for n ≥ 2, m = 1, with e_j = (r·q̃ − q)/p̃_j"""

    src: HartogsDomain
    dst: HartogsDomain
    r: int
    f: EllipsoidProperMap
    xi: complex = 1.0 + 0j
    case: ClassVar[str] = "n1"

    @property
    def w_exponents(self) -> Tuple[Optional[int], ...]:
        q, q_t = self.src.q[0], self.dst.q[0]
        return tuple(
            int_diff_value([(self.r, ext_ratio(q_t, pj)), (-1, ext_ratio(q, pj))]) for pj in self.dst.p
        )

    def homogenizer(self, w: complex) -> complex:
        """W = w^q; integer powers stay single-valued"""
        q = self.src.q[0]
        if q.is_integer:
            return w ** q.ratio.numerator
        return complex(np.power(w, q.value(self.src.lam)))

    def __call__(self, point: Point) -> Point:
        z, w = np.asarray(point[0], dtype=complex), complex(np.ravel(point[1])[0])
        exponents = self.w_exponents
        if w == 0 and (any(e < 0 for e in exponents) or not self.f.fixes_origin):
            raise BranchPole("w = 0 is a branch point of the first components")
        W = self.homogenizer(w) if w != 0 else 0j
        Phi = self.f.eval_homogeneous(z, W)
        G = np.array([w ** e for e in exponents], dtype=complex) * Phi
        return G, np.array([self.xi * w ** self.r])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "src": self.src.to_dict(),
            "dst": self.dst.to_dict(),
            "r": self.r,
            "xi": complex_to_pair(self.xi),
            "f": self.f.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class CasenmMap:
    """(g(z), h(w)) for n, m ≥ 2"""

    src: HartogsDomain
    dst: HartogsDomain
    g: EllipsoidProperMap
    h: EllipsoidProperMap
    case: ClassVar[str] = "nm"

    def __call__(self, point: Point) -> Point:
        z, w = point
        return self.g(z), self.h(w)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "src": self.src.to_dict(),
            "dst": self.dst.to_dict(),
            "g": self.g.to_dict(),
            "h": self.h.to_dict(),
        }


HartogsProperMap = Union[Case11Map, Case1mMap, Casen1Map, CasenmMap]


def map_from_dict(payload: Union[str, Dict[str, Any]], lam: float = DEFAULT_LAMBDA) -> HartogsProperMap:
    """Rebuild a map from its JSON descriptor; the result is validated"""
    if isinstance(payload, str):
        try:
            payload = json.loads(payload)
        except json.JSONDecodeError as e:
            raise ParseError(f"map descriptor is not valid JSON: {e}") from e
    if not isinstance(payload, dict):
        raise ParseError("map descriptor must be an object")
    try:
        case = payload["case"]
        src = domain_from_dict(payload["src"], lam)
        dst = domain_from_dict(payload["dst"], lam)
        if case == "11":
            blaschke = BlaschkeProduct.from_dict(payload["blaschke"]) if payload.get("blaschke") else None
            M = Case11Map(
                src, dst, int(payload["k"]), int(payload["l"]), int(payload["b"]),
                pair_to_complex(payload.get("zeta", [1.0, 0.0])), pair_to_complex(payload.get("xi", [1.0, 0.0])),
                blaschke,
                int(payload["p_prime"]) if blaschke else None,
                int(payload["q_prime"]) if blaschke else None,
            )
        elif case == "1m":
            M = Case1mMap(
                src, dst, int(payload["k"]), EllipsoidProperMap.from_dict(payload["h"], lam),
                pair_to_complex(payload.get("zeta", [1.0, 0.0])),
            )
        elif case == "n1":
            M = Casen1Map(
                src, dst, int(payload["r"]), EllipsoidProperMap.from_dict(payload["f"], lam),
                pair_to_complex(payload.get("xi", [1.0, 0.0])),
            )
        elif case == "nm":
            M = CasenmMap(
                src, dst, EllipsoidProperMap.from_dict(payload["g"], lam),
                EllipsoidProperMap.from_dict(payload["h"], lam),
            )
        else:
            raise ParseError(f"unknown map case {case!r}")
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, (ParseError, InvalidMap)):
            raise
        raise ParseError(f"malformed map descriptor: {e}") from e
    result = validate_proper_form(M)
    if not result.valid:
        raise InvalidMap("map descriptor violates its family conditions", result.violations)
    return M


# ===== Existence =====

@dataclass
class ExistenceWitness:
    case: str
    k: Optional[int] = None
    l: Optional[int] = None
    sigma: Optional[Permutation] = None
    tau: Optional[Permutation] = None
    r: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        payload = {"case": self.case}
        for key in ("k", "l", "sigma", "tau", "r"):
            value = getattr(self, key)
            if value is not None:
                payload[key] = list(value) if isinstance(value, tuple) else value
        return payload


def _check_dimensions(src: HartogsDomain, dst: HartogsDomain):
    if (src.n, src.m) != (dst.n, dst.m):
        raise DimensionMismatch(
            f"source is in C^{src.n}xC^{src.m}, target is in C^{dst.n}xC^{dst.m}",
            {"src": [src.n, src.m], "dst": [dst.n, dst.m]},
        )


def exists_proper(src: HartogsDomain, dst: HartogsDomain) -> Optional[ExistenceWitness]:
    _check_dimensions(src, dst)
    regime = src.regime
    witness = None
    if regime == "11":
        # both ratios rational: l = den(q̃/p̃), k = den(q/p) always clears denominators
        kl = solve_kl(ext_ratio(src.q[0], src.p[0]), ext_ratio(dst.q[0], dst.p[0]))
        if kl is not None:
            witness = ExistenceWitness("11", k=kl[0], l=kl[1])
    elif regime == "1m":
        k = nat_value(ext_ratio(src.p[0], dst.p[0]))
        sigma = ep_exists(src.q, dst.q) if k is not None else None
        if sigma is not None:
            witness = ExistenceWitness("1m", k=k, sigma=sigma)
    elif regime == "n1":
        sigma = ep_exists(src.p, dst.p)
        r = solve_r(src.q[0], dst.q[0], dst.p) if sigma is not None else None
        if r is not None:
            witness = ExistenceWitness("n1", sigma=sigma, r=r)
    else:
        sigma = ep_exists(src.p, dst.p)
        tau = ep_exists(src.q, dst.q) if sigma is not None else None
        if tau is not None:
            witness = ExistenceWitness("nm", sigma=sigma, tau=tau)
    logger.debug(f"exists_proper {src} -> {dst}: {witness}")
    return witness


def canonical_proper(src: HartogsDomain, dst: HartogsDomain) -> HartogsProperMap:
    """Deterministic representative: unimodular parameters 1, automorphism parts identity"""
    witness = exists_proper(src, dst)
    if witness is None:
        raise NoProperMap(f"no proper holomorphic map {src} -> {dst}")
    if witness.case == "11":
        b = int_diff_value(
            [(witness.l, ext_ratio(dst.q[0], dst.p[0])), (-witness.k, ext_ratio(src.q[0], src.p[0]))]
        )
        M: HartogsProperMap = Case11Map(src, dst, witness.k, witness.l, b)
    elif witness.case == "1m":
        M = Case1mMap(src, dst, witness.k, ep_proper_canonical(src.q, dst.q, src.lam))
    elif witness.case == "n1":
        M = Casen1Map(src, dst, witness.r, ep_proper_canonical(src.p, dst.p, src.lam))
    else:
        M = CasenmMap(src, dst, ep_proper_canonical(src.p, dst.p, src.lam), ep_proper_canonical(src.q, dst.q, src.lam))
    result = validate_proper_form(M)
    if not result.valid:
        raise AssertionError(f"canonical map failed validation: {result.violations}")
    logger.info(f"canonical {M.case} map {src} -> {dst}")
    return M


# ===== Validation =====

@dataclass
class ValidationResult:
    valid: bool
    violations: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"valid": self.valid, "violations": list(self.violations)}


def _validate_case11(M: Case11Map) -> List[str]:
    violations = []
    if M.k < 0:
        violations.append(f"k = {M.k} must be >= 0")
    if M.l < 1:
        violations.append(f"l = {M.l} must be >= 1")
    expected_b = int_diff_value([(M.l, ext_ratio(M.dst.q[0], M.dst.p[0])), (-M.k, ext_ratio(M.src.q[0], M.src.p[0]))])
    if expected_b is None:
        violations.append("l*q~/p~ - k*q/p is not an integer")
    elif expected_b != M.b:
        violations.append(f"b = {M.b} but l*q~/p~ - k*q/p = {expected_b}")
    if M.blaschke is None:
        if M.k <= 0:
            violations.append("B = 1 requires k > 0")
    else:
        if not M.blaschke.non_vanishing_at_0:
            violations.append("Blaschke product vanishes at 0")
        if M.blaschke.degree == 0:
            violations.append("Blaschke factor must be non-constant; drop it and use B = 1")
        if not M.p_prime or not M.q_prime or M.p_prime < 1 or M.q_prime < 1:
            violations.append("Blaschke factor needs p', q' >= 1")
        else:
            if math.gcd(M.p_prime, M.q_prime) != 1:
                violations.append(f"p' = {M.p_prime} and q' = {M.q_prime} are not coprime")
            pq = ext_ratio(M.src.p[0], M.src.q[0])
            if pq.lambda_deg != 0 or pq.ratio * M.q_prime != M.p_prime:
                violations.append(f"p/q is not p'/q' = {M.p_prime}/{M.q_prime}")
    return violations


def _validate_ellipsoid_part(name: str, E: EllipsoidProperMap, source: ExponentVec, target: ExponentVec,
                             must_fix_origin: bool) -> List[str]:
    violations = []
    if E.source.p != source or E.target.p != target:
        violations.append(f"{name} maps E_{format_exponent_vec(E.source.p)} -> E_{format_exponent_vec(E.target.p)}, "
                          f"expected E_{format_exponent_vec(source)} -> E_{format_exponent_vec(target)}")
        return violations
    violations.extend(f"{name}: {v}" for v in ep_proper_validate(E))
    if must_fix_origin and not E.fixes_origin:
        violations.append(f"{name} must fix the origin")
    return violations


def _validate_casen1(M: Casen1Map) -> List[str]:
    violations = []
    if M.r < 1:
        return [f"r = {M.r} must be >= 1"]
    if any(e is None for e in M.w_exponents):
        violations.append("(r*q~ - q)/p~_j is not an integer for some j")
    violations.extend(_validate_ellipsoid_part("f", M.f, M.src.p, M.dst.p, must_fix_origin=False))
    if not M.f.fixes_origin:
        q, q_t = M.src.q[0], M.dst.q[0]
        anchored = [pj for pj in M.dst.p if is_nat(ext_ratio(Exponent(1), pj))]
        if not q.is_integer:
            violations.append("a recentred f requires q to be a natural number")
        for pj in anchored:
            if not is_nat(ext_ratio(q_t.scaled(M.r), pj)):
                violations.append(f"1/p~_j = {ext_ratio(Exponent(1), pj).ratio} is natural but r*q~/p~_j is not")
    return violations


def validate_proper_form(M: HartogsProperMap, src: Optional[HartogsDomain] = None,
                         dst: Optional[HartogsDomain] = None) -> ValidationResult:
    violations: List[str] = []
    if src is not None and (src.p, src.q) != (M.src.p, M.src.q):
        violations.append("map source differs from the given source domain")
    if dst is not None and (dst.p, dst.q) != (M.dst.p, M.dst.q):
        violations.append("map target differs from the given target domain")
    if (M.src.n, M.src.m) != (M.dst.n, M.dst.m):
        violations.append("source and target are not equidimensional")
        return ValidationResult(False, violations)
    if M.src.regime != M.case:
        violations.append(f"case {M.case} does not match regime {M.src.regime}")
        return ValidationResult(False, violations)

    if isinstance(M, Case11Map):
        for name in ("zeta", "xi"):
            if not _is_unimodular(getattr(M, name)):
                violations.append(f"{name} is not unimodular")
        violations.extend(_validate_case11(M))
    elif isinstance(M, Case1mMap):
        if not _is_unimodular(M.zeta):
            violations.append("zeta is not unimodular")
        k = nat_value(ext_ratio(M.src.p[0], M.dst.p[0]))
        if k is None:
            violations.append("p/p~ is not a natural number")
        elif k != M.k:
            violations.append(f"k = {M.k} but p/p~ = {k}")
        violations.extend(_validate_ellipsoid_part("h", M.h, M.src.q, M.dst.q, must_fix_origin=True))
    elif isinstance(M, Casen1Map):
        if not _is_unimodular(M.xi):
            violations.append("xi is not unimodular")
        violations.extend(_validate_casen1(M))
    else:
        violations.extend(_validate_ellipsoid_part("g", M.g, M.src.p, M.dst.p, must_fix_origin=True))
        violations.extend(_validate_ellipsoid_part("h", M.h, M.src.q, M.dst.q, must_fix_origin=True))
    return ValidationResult(not violations, violations)


# ===== Evaluation =====

def evaluate(M: HartogsProperMap, point: Any, tol: float = DEFAULT_TOLERANCE, check_domain: bool = True) -> Point:
    point = as_point(point, M.src)
    if check_domain:
        verdict = membership(M.src, point, tol)
        if verdict == MembershipVerdict.OUTSIDE:
            raise NotInDomain(f"point lies outside {M.src}")
    return M(point)


def _case11_modulus_residual(M: Case11Map, z: complex, w: complex, G: np.ndarray, H: np.ndarray) -> float:
    lam = M.src.lam
    p, q = M.src.p[0].value(lam), M.src.q[0].value(lam)
    p_t, q_t = M.dst.p[0].value(lam), M.dst.q[0].value(lam)
    lhs = abs(G[0]) ** p_t * abs(H[0]) ** (-q_t)
    rhs = (abs(z) * abs(w) ** (-q / p)) ** (M.k * p_t)
    if M.blaschke is not None:
        rhs *= abs(M.blaschke(z ** M.p_prime * w ** (-M.q_prime))) ** p_t
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def _casen1_modulus_residual(M: Casen1Map, z: np.ndarray, w: complex, G: np.ndarray, H: np.ndarray) -> float:
    s_z, s_w = M.src.modulus_sums((z, np.array([w])))
    s_z_t, s_w_t = M.dst.modulus_sums((G, H))
    w_residual = abs(s_w_t - abs(w) ** (2.0 * M.r * M.dst.q[0].value(M.src.lam)))
    if s_w_t == 0.0 or s_w == 0.0:
        return float("inf")
    J = M.f.modulus_factor(z, M.homogenizer(w))
    z_residual = abs((1.0 - s_z_t / s_w_t) - J * (1.0 - s_z / s_w))
    return max(w_residual, z_residual)


def modulus_identity_residual(M: HartogsProperMap, point: Any) -> float:
    """
    Gap between the image moduli and the ones the map parameters predict.

    11: |G|^{p̃}·|H|^{-q̃} against (|z|·|w|^{-q/p})^{k·p̃}·|B(z^{p'}w^{-q'})|^{p̃}, relative
    1m: s̃_z = s_z, and 1 − s̃_w = J_h·(1 − s_w)
    n1: s̃_w = |w|^{2rq̃}, and 1 − s̃_z/s̃_w = J_f·(1 − s_z/s_w)
    nm: 1 − s̃_z = J_g·(1 − s_z), and 1 − s̃_w = J_h·(1 − s_w)
    """
    z, w = as_point(point, M.src)
    G, H = M((z, w))
    G, H = np.atleast_1d(np.asarray(G, dtype=complex)), np.atleast_1d(np.asarray(H, dtype=complex))
    if M.case == "11":
        return _case11_modulus_residual(M, complex(z[0]), complex(w[0]), G, H)
    if M.case == "n1":
        return _casen1_modulus_residual(M, z, complex(w[0]), G, H)
    if M.case == "1m":
        z_residual = abs(M.dst.z_domain.modulus_sum(G) - M.src.z_domain.modulus_sum(z))
    else:
        z_residual = ep_modulus_residual(M.g, z, G)
    return max(z_residual, ep_modulus_residual(M.h, w, H))


# ===== Automorphism families =====

@dataclass
class AutParameter:
    name: str
    kind: str
    constraint: str

    def to_dict(self) -> Dict[str, str]:
        return {"name": self.name, "kind": self.kind, "constraint": self.constraint}


@dataclass
class AutDescriptor:
    case: str
    form: str
    parameters: List[AutParameter]
    recentering_allowed: bool
    z_symmetries: int
    w_symmetries: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "form": self.form,
            "parameters": [p.to_dict() for p in self.parameters],
            "recentering_allowed": self.recentering_allowed,
            "z_symmetries": self.z_symmetries,
            "w_symmetries": self.w_symmetries,
        }


def _recentering_allowed(D: HartogsDomain) -> bool:
    if D.regime == "11":
        return is_nat(ext_ratio(D.q[0], D.p[0]))
    if D.regime == "n1":
        return D.q[0].is_integer and bool(D.z_domain.ball_indices)
    return False


def aut_family(D: HartogsDomain) -> AutDescriptor:
    regime = D.regime
    recenter = _recentering_allowed(D)
    z_sym = perm_matchings(D.p, D.p).count
    w_sym = perm_matchings(D.q, D.q).count
    if regime == "11":
        form = "(w^{q/p} phi(z w^{-q/p}), xi w)"
        parameters = [
            AutParameter("phi", "disc_automorphism", "any Moebius map" if recenter else "phi(0) = 0 (rotation)"),
            AutParameter("xi", "unimodular", "|xi| = 1"),
        ]
    elif regime == "1m":
        form = "(zeta z, h(w))"
        parameters = [
            AutParameter("zeta", "unimodular", "|zeta| = 1"),
            AutParameter("h", "ellipsoid_automorphism", "h in Aut(E_q), h(0) = 0"),
        ]
    elif regime == "n1":
        form = "(w^{q/p_j} g_j(z w^{-q/p}), xi w)"
        parameters = [
            AutParameter("g", "ellipsoid_automorphism",
                         "g in Aut(E_p)" if recenter else "g in Aut(E_p), g(0) = 0"),
            AutParameter("xi", "unimodular", "|xi| = 1"),
        ]
    else:
        form = "(g(z), h(w))"
        parameters = [
            AutParameter("g", "ellipsoid_automorphism", "g in Aut(E_p), g(0) = 0"),
            AutParameter("h", "ellipsoid_automorphism", "h in Aut(E_q), h(0) = 0"),
        ]
    return AutDescriptor(regime, form, parameters, recenter, z_sym, w_sym)


def aut_as_proper(A: EllipsoidAut) -> EllipsoidProperMap:
    n = A.domain.n
    return ep_proper(A.domain, A.domain, tuple(range(n)), (1,) * n, A)


def _aut_part(M: EllipsoidProperMap) -> EllipsoidAut:
    n = M.source.n
    if M.source.p != M.target.p or M.sigma != tuple(range(n)) or M.r != (1,) * n:
        raise InvalidMap("ellipsoid part is not an automorphism", [f"sigma={M.sigma}", f"r={M.r}"])
    return M.phi


def _disc_part(M: Case11Map) -> BallAut:
    """φ with M = (w^N φ(z w^{-N}), ξ w)"""
    if M.l != 1:
        raise InvalidMap("Case11 map is not an automorphism", [f"l = {M.l}"])
    if M.blaschke is None:
        if M.k != 1 or M.b != 0:
            raise InvalidMap("Case11 map is not an automorphism", [f"k = {M.k}", f"b = {M.b}"])
        return disc_mobius(0.0, M.zeta)
    if M.k != 0 or M.blaschke.degree != 1 or M.p_prime != 1:
        raise InvalidMap("Case11 map is not an automorphism", ["Blaschke factor must be a single Moebius factor"])
    alpha = M.blaschke.zeros[0][0]
    return disc_mobius(alpha, M.zeta * M.blaschke.unimodular)


def _case11_from_disc(D: HartogsDomain, phi: BallAut, xi: complex) -> Case11Map:
    if abs(phi.a[0]) < 1e-15:
        return Case11Map(D, D, 1, 1, 0, zeta=_unit(phi.Q[0, 0]), xi=_unit(xi))
    N = nat_value(ext_ratio(D.q[0], D.p[0]))
    if N is None:
        raise InvalidMap("Moebius automorphisms need q/p to be a natural number")
    return Case11Map(D, D, 0, 1, N, xi=_unit(xi), blaschke=BlaschkeProduct.from_disc_aut(phi), p_prime=1, q_prime=N)


def _rotation(E: EllipsoidDomain, theta: float) -> EllipsoidAut:
    """D_θ: z_j ↦ e^{iθ/p_j}·z_j"""
    k = len(E.ball_indices)
    H = BallAut(np.zeros(k, dtype=complex), np.exp(1j * theta) * np.eye(k))
    values = E.values
    zetas = np.array([np.exp(1j * theta / values[j]) for j in E.other_indices], dtype=complex)
    return EllipsoidAut(E, H, zetas, tuple(range(E.n)))


def _twist_angle(D: HartogsDomain, xi: complex) -> float:
    """Angle θ with e^{iθ} = ξ^q when q ∈ ℕ"""
    q = D.q[0]
    return float(np.angle(xi)) * q.ratio.numerator if q.is_integer else 0.0


def compose_aut(F2: HartogsProperMap, F1: HartogsProperMap) -> HartogsProperMap:
    """Closed-form family member equal to F2 ∘ F1"""
    if (F1.src.p, F1.src.q) != (F2.src.p, F2.src.q):
        raise DimensionMismatch("automorphisms act on different domains")
    D = F1.src
    if isinstance(F1, Case11Map) and isinstance(F2, Case11Map):
        phi1, phi2 = _disc_part(F1), _disc_part(F2)
        N = nat_value(ext_ratio(D.q[0], D.p[0]))
        c = F1.xi ** N if N is not None else 1.0
        turn, unturn = disc_mobius(0.0, c), disc_mobius(0.0, np.conj(c))
        phi = turn.compose(phi2).compose(unturn).compose(phi1)
        return _case11_from_disc(D, phi, F2.xi * F1.xi)
    if isinstance(F1, Case1mMap) and isinstance(F2, Case1mMap):
        h = _aut_part(F2.h).compose(_aut_part(F1.h))
        return Case1mMap(D, D, 1, aut_as_proper(h), _unit(F2.zeta * F1.zeta))
    if isinstance(F1, Casen1Map) and isinstance(F2, Casen1Map):
        g1, g2 = _aut_part(F1.f), _aut_part(F2.f)
        theta = _twist_angle(D, F1.xi)
        E = D.z_domain
        g2_twisted = _rotation(E, theta).compose(g2).compose(_rotation(E, -theta))
        return Casen1Map(D, D, 1, aut_as_proper(g2_twisted.compose(g1)), _unit(F2.xi * F1.xi))
    if isinstance(F1, CasenmMap) and isinstance(F2, CasenmMap):
        g = _aut_part(F2.g).compose(_aut_part(F1.g))
        h = _aut_part(F2.h).compose(_aut_part(F1.h))
        return CasenmMap(D, D, aut_as_proper(g), aut_as_proper(h))
    raise InvalidMap("automorphisms belong to different families")


def invert_aut(F: HartogsProperMap) -> HartogsProperMap:
    D = F.src
    if isinstance(F, Case11Map):
        phi = _disc_part(F)
        N = nat_value(ext_ratio(D.q[0], D.p[0]))
        c = F.xi ** N if N is not None else 1.0
        inverse = disc_mobius(0.0, np.conj(c)).compose(phi.inverse()).compose(disc_mobius(0.0, c))
        return _case11_from_disc(D, inverse, np.conj(F.xi))
    if isinstance(F, Case1mMap):
        return Case1mMap(D, D, 1, aut_as_proper(_aut_part(F.h).inverse()), np.conj(F.zeta))
    if isinstance(F, Casen1Map):
        theta = -_twist_angle(D, F.xi)
        E = D.z_domain
        g = _rotation(E, theta).compose(_aut_part(F.f).inverse()).compose(_rotation(E, -theta))
        return Casen1Map(D, D, 1, aut_as_proper(g), np.conj(F.xi))
    return CasenmMap(D, D, aut_as_proper(_aut_part(F.g).inverse()), aut_as_proper(_aut_part(F.h).inverse()))


def _random_phase(rng: np.random.Generator) -> complex:
    return complex(np.exp(2j * np.pi * rng.uniform()))


def aut_sample(D: HartogsDomain, seed: int) -> HartogsProperMap:
    """Deterministic pseudo-random member of Aut(D)"""
    rng = np.random.default_rng(seed)
    regime = D.regime
    if regime == "11":
        xi = _random_phase(rng)
        if _recentering_allowed(D):
            a = 0.7 * np.sqrt(rng.uniform()) * _random_phase(rng)
            return _case11_from_disc(D, disc_mobius(a, _random_phase(rng)), xi)
        return Case11Map(D, D, 1, 1, 0, zeta=_random_phase(rng), xi=xi)
    if regime == "1m":
        zeta = _random_phase(rng)
        return Case1mMap(D, D, 1, aut_as_proper(random_ellipsoid_aut(D.w_domain, rng)), zeta)
    if regime == "n1":
        xi = _random_phase(rng)
        g = random_ellipsoid_aut(D.z_domain, rng, fix_origin=not _recentering_allowed(D))
        return Casen1Map(D, D, 1, aut_as_proper(g), xi)
    return CasenmMap(
        D, D,
        aut_as_proper(random_ellipsoid_aut(D.z_domain, rng)),
        aut_as_proper(random_ellipsoid_aut(D.w_domain, rng)),
    )


def is_automorphism_form(F: HartogsProperMap) -> bool:
    """F lies in the closed-form automorphism family of its domain"""
    if (F.src.p, F.src.q) != (F.dst.p, F.dst.q) or not validate_proper_form(F).valid:
        return False
    try:
        if isinstance(F, Case11Map):
            _disc_part(F)
        elif isinstance(F, Case1mMap):
            return F.k == 1 and _aut_part(F.h) is not None
        elif isinstance(F, Casen1Map):
            return F.r == 1 and _aut_part(F.f) is not None
        else:
            _aut_part(F.g), _aut_part(F.h)
    except InvalidMap:
        return False
    return True


# ===== Rigidity =====

@dataclass
class RigidityVerdict:
    rigid: bool
    dimension_rule: bool
    reason: str
    witness: Optional[HartogsProperMap] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rigid": self.rigid,
            "dimension_rule": self.dimension_rule,
            "reason": self.reason,
            "witness": self.witness.to_dict() if self.witness is not None else None,
        }


def rigidity_witness(D: HartogsDomain) -> RigidityVerdict:
    """
    Non-injective proper self-map of D if one exists. n = m = 1 always has
    (z², w²); n ≥ 2, m = 1 has one iff some r ≥ 2 satisfies (r − 1)·q/p_j ∈ ℤ;
    for m ≥ 2 every proper self-map is an automorphism.
    """
    dimension_rule = D.n >= 2 and D.m >= 2
    regime = D.regime
    if regime == "11":
        witness = Case11Map(D, D, 2, 2, 0)
        return RigidityVerdict(False, dimension_rule, "(z^2, w^2) is a proper self-map of degree 4", witness)
    if regime == "n1":
        r = solve_r(D.q[0], D.q[0], D.p, start=2)
        if r is None:
            return RigidityVerdict(True, dimension_rule, "q/p_j is irrational for some j, so r = 1 is forced")
        witness = Casen1Map(D, D, r, ep_proper_canonical(D.p, D.p, D.lam))
        return RigidityVerdict(False, dimension_rule, f"w -> w^{r} lifts to a proper self-map of degree {r}", witness)
    if regime == "1m":
        return RigidityVerdict(True, dimension_rule, "k = p/p = 1 and proper self-maps of E_q are automorphisms")
    return RigidityVerdict(True, dimension_rule, "proper self-maps are (g, h) with g, h automorphisms")


def is_rigid(D: HartogsDomain) -> bool:
    return rigidity_witness(D).rigid


# ===== Fibers =====

def _case11_preimages(M: Case11Map, z_t: complex, w_t: complex) -> List[Point]:
    candidates = []
    for w in all_roots(w_t / M.xi, M.l):
        if w == 0:
            continue
        if M.blaschke is None:
            for z in all_roots(z_t / (M.zeta * w ** M.b), M.k):
                candidates.append((np.array([z]), np.array([w])))
            continue
        # ζ z^k w^b N(c z^{p'}) − z_t D(c z^{p'}) = 0 with c = w^{-q'}
        numerator, denominator = M.blaschke.numerator_denominator()
        c = w ** (-M.q_prime)
        t = np.poly1d([c] + [0] * M.p_prime)
        lhs = np.poly1d([M.zeta * w ** M.b] + [0] * M.k) * numerator(t)
        polynomial = lhs - z_t * denominator(t)
        for z in np.roots(polynomial.coeffs):
            candidates.append((np.array([z]), np.array([w])))
    return candidates


def preimages(M: HartogsProperMap, target: Any, tol: float = 1e-8) -> List[Point]:
    """Distinct interior points x with M(x) = target"""
    z_t, w_t = as_point(target, M.dst)
    if isinstance(M, Case11Map):
        candidates = _case11_preimages(M, complex(z_t[0]), complex(w_t[0]))
    elif isinstance(M, Case1mMap):
        candidates = [
            (np.array([z]), w)
            for z in all_roots(complex(z_t[0]) / M.zeta, M.k)
            for w in ep_preimage_candidates(M.h, w_t)
        ]
    elif isinstance(M, Casen1Map):
        candidates = []
        for w in all_roots(complex(w_t[0]) / M.xi, M.r):
            if w == 0:
                continue
            scale = np.array([w ** e for e in M.w_exponents], dtype=complex)
            for z in ep_preimage_candidates(M.f, z_t / scale, M.homogenizer(w)):
                candidates.append((z, np.array([w])))
    else:
        candidates = [(z, w) for z in ep_preimage_candidates(M.g, z_t) for w in ep_preimage_candidates(M.h, w_t)]

    found: List[Point] = []
    for point in candidates:
        if membership(M.src, point, tol) != MembershipVerdict.INTERIOR:
            continue
        image = join_point(M(point))
        if np.max(np.abs(image - join_point((z_t, w_t)))) > tol * max(1.0, np.max(np.abs(image))):
            continue
        flat = join_point(point)
        if all(np.max(np.abs(flat - join_point(other))) > 1e-7 for other in found):
            found.append(point)
    return found


def fiber_size(M: HartogsProperMap, target: Any, tol: float = 1e-8) -> int:
    return len(preimages(M, target, tol))
