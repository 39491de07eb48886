#!/usr/bin/env python3
"""
Exponent Core - exact λ-graded exponent arithmetic and number-theoretic deciders

Every exponent is r·λ^t with r a positive rational and t ∈ {0, 1}, where λ is one
fixed formal transcendental. Quotients of exponents then live in degrees
{-1, 0, 1}, and the degree parts of an integer combination are linearly
independent over ℚ, so every integrality question the existence criteria ask
is decided exactly.

Deciders:
- ext_ratio / is_nat / is_int_diff: graded quotients and integrality
- perm_matchings: permutations σ with a_σ/b ∈ ℕ^n (Hopcroft-Karp + enumeration)
- solve_kl: minimal (k, l) with l·q̃/p̃ − k·q/p ∈ ℤ
- solve_r: minimal r with (r·q̃ − q)/p̃_j ∈ ℤ for all j

License: Apache-2.0
"""

import math
import re
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Deque, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from loguru import logger

from hartogs_errors import ParseError

LAMBDA_SYMBOL = "L"
DEFAULT_LAMBDA = math.sqrt(2.0)

# matchings beyond this count are only streamed, never materialised
MATCHING_MATERIALIZE_LIMIT = 10_000

_INF = 10**12

_EXPONENT_PATTERN = re.compile(r"^\s*(?:(\d+)(?:\s*/\s*(\d+))?\s*(\*\s*L)?|(L))\s*$")

Permutation = Tuple[int, ...]


# ===== Graded values =====

@dataclass(frozen=True, order=True)
class Exponent:
    """Exact exponent ratio·λ^lambda_pow"""

    ratio: Fraction
    lambda_pow: int = 0

    def __post_init__(self):
        ratio = Fraction(self.ratio)
        if ratio <= 0:
            raise ValueError(f"exponent must be positive, got {ratio}")
        if self.lambda_pow not in (0, 1):
            raise ValueError(f"lambda_pow must be 0 or 1, got {self.lambda_pow}")
        object.__setattr__(self, "ratio", ratio)

    @property
    def is_one(self) -> bool:
        return self.lambda_pow == 0 and self.ratio == 1

    @property
    def is_integer(self) -> bool:
        return self.lambda_pow == 0 and self.ratio.denominator == 1

    def value(self, lam: float = DEFAULT_LAMBDA) -> float:
        """Numeric value with λ := lam"""
        return float(self.ratio) * (lam ** self.lambda_pow)

    def scaled(self, factor: Union[int, Fraction]) -> "Exponent":
        return Exponent(self.ratio * Fraction(factor), self.lambda_pow)

    def __str__(self) -> str:
        return format_exponent(self)


ExponentVec = Tuple[Exponent, ...]


@dataclass(frozen=True)
class ExtRatio:
    """Quotient of two exponents: ratio·λ^lambda_deg with lambda_deg ∈ {-1, 0, 1}"""

    ratio: Fraction
    lambda_deg: int = 0

    def __post_init__(self):
        ratio = Fraction(self.ratio)
        if ratio <= 0:
            raise ValueError(f"ratio must be positive, got {ratio}")
        if self.lambda_deg not in (-1, 0, 1):
            raise ValueError(f"lambda_deg must be in {{-1, 0, 1}}, got {self.lambda_deg}")
        object.__setattr__(self, "ratio", ratio)

    def __mul__(self, other: "ExtRatio") -> "ExtRatio":
        return ExtRatio(self.ratio * other.ratio, self.lambda_deg + other.lambda_deg)

    def value(self, lam: float = DEFAULT_LAMBDA) -> float:
        return float(self.ratio) * (lam ** self.lambda_deg)


Term = Tuple[int, ExtRatio]


def exponent(value: Union[str, int, Fraction, Exponent], lambda_pow: int = 0) -> Exponent:
    """Build an Exponent from a string, an int, a Fraction or an Exponent"""
    if isinstance(value, Exponent):
        return value
    if isinstance(value, str):
        return parse_exponent(value)
    if isinstance(value, bool) or isinstance(value, float):
        raise ParseError(f"exponent must be exact, got {value!r}")
    try:
        return Exponent(Fraction(value), lambda_pow)
    except (TypeError, ValueError) as e:
        raise ParseError(f"invalid exponent {value!r}: {e}") from e


def exponent_vec(values: Iterable[Union[str, int, Fraction, Exponent]]) -> ExponentVec:
    vec = tuple(exponent(v) for v in values)
    if not vec:
        raise ParseError("exponent vector must be nonempty")
    return vec


def parse_exponent(text: str) -> Exponent:
    """Parse "a", "a/b", "a/b*L" or "L" """
    match = _EXPONENT_PATTERN.match(text)
    if not match:
        raise ParseError(f"malformed exponent {text!r}")
    if match.group(4):
        return Exponent(Fraction(1), 1)
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) else 1
    if numerator == 0 or denominator == 0:
        raise ParseError(f"exponent must be a positive rational, got {text!r}")
    return Exponent(Fraction(numerator, denominator), 1 if match.group(3) else 0)


def parse_exponent_vec(values: Union[str, Sequence]) -> ExponentVec:
    """Parse a JSON list of exponent strings or a comma separated string"""
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    if not isinstance(values, (list, tuple)):
        raise ParseError(f"exponent vector must be a list, got {type(values).__name__}")
    return exponent_vec(values)


def format_exponent(e: Exponent) -> str:
    r = e.ratio
    text = str(r.numerator) if r.denominator == 1 else f"{r.numerator}/{r.denominator}"
    return f"{text}*{LAMBDA_SYMBOL}" if e.lambda_pow else text


def format_exponent_vec(vec: ExponentVec) -> List[str]:
    return [format_exponent(e) for e in vec]


# ===== Ratios and integrality =====

def ext_ratio(a: Exponent, b: Exponent) -> ExtRatio:
    return ExtRatio(a.ratio / b.ratio, a.lambda_pow - b.lambda_pow)


def is_nat(r: ExtRatio) -> bool:
    return r.lambda_deg == 0 and r.ratio.denominator == 1


def nat_value(r: ExtRatio) -> Optional[int]:
    return r.ratio.numerator if is_nat(r) else None


def graded_parts(terms: Iterable[Term]) -> Dict[int, Fraction]:
    """Group Σ c_i·r_i by λ-degree"""
    parts: Dict[int, Fraction] = {-1: Fraction(0), 0: Fraction(0), 1: Fraction(0)}
    for coefficient, r in terms:
        parts[r.lambda_deg] += coefficient * r.ratio
    return parts


def int_diff_value(terms: Iterable[Term]) -> Optional[int]:
    """Integer value of Σ c_i·r_i, or None when the sum is not an integer"""
    parts = graded_parts(terms)
    if parts[-1] != 0 or parts[1] != 0 or parts[0].denominator != 1:
        return None
    return parts[0].numerator


def is_int_diff(terms: Iterable[Term]) -> bool:
    return int_diff_value(terms) is not None


# ===== Permutation matchings =====

class HopcroftKarp:
    """
    Maximum bipartite matching on integer vertices.

    Left vertices are 0..len(graph)-1; graph[u] lists the right vertices
    adjacent to u.
    """

    def __init__(self, graph: Sequence[Sequence[int]]):
        self._graph = [list(adj) for adj in graph]
        self._pair_left: Dict[int, int] = {}
        self._pair_right: Dict[int, int] = {}
        self._dist: Dict[int, int] = {}
        self._reference_distance = _INF

    def maximum_matching(self) -> Dict[int, int]:
        self._pair_left.clear()
        self._pair_right.clear()
        while self._bfs():
            for left in range(len(self._graph)):
                if left not in self._pair_left:
                    self._dfs(left)
        return dict(self._pair_left)

    def has_perfect_matching(self) -> bool:
        return len(self.maximum_matching()) == len(self._graph)

    def _bfs(self) -> bool:
        queue: Deque[int] = deque()
        for left in range(len(self._graph)):
            if left not in self._pair_left:
                queue.append(left)
                self._dist[left] = 0
            else:
                self._dist[left] = _INF
        self._reference_distance = _INF
        while queue:
            left = queue.popleft()
            if self._dist[left] >= self._reference_distance:
                continue
            for right in self._graph[left]:
                other = self._pair_right.get(right)
                if other is None:
                    if self._reference_distance == _INF:
                        self._reference_distance = self._dist[left] + 1
                elif self._dist[other] == _INF:
                    self._dist[other] = self._dist[left] + 1
                    queue.append(other)
        return self._reference_distance < _INF

    def _dfs(self, left: int) -> bool:
        for right in self._graph[left]:
            other = self._pair_right.get(right)
            if other is None:
                if self._reference_distance == self._dist[left] + 1:
                    self._pair_left[left] = right
                    self._pair_right[right] = left
                    return True
            elif self._dist[other] == self._dist[left] + 1 and self._dfs(other):
                self._pair_left[left] = right
                self._pair_right[right] = left
                return True
        self._dist[left] = _INF
        return False


def _count_perfect_matchings(adjacency: Sequence[Sequence[int]]) -> int:
    """Permanent of the 0/1 biadjacency matrix by subset DP"""
    n = len(adjacency)
    counts: Dict[int, int] = {0: 1}
    for row in range(n):
        following: Dict[int, int] = {}
        for mask, ways in counts.items():
            for column in adjacency[row]:
                bit = 1 << column
                if not mask & bit:
                    following[mask | bit] = following.get(mask | bit, 0) + ways
        counts = following
    return counts.get((1 << n) - 1, 0)


class PermutationMatchings:
    """
    All σ with σ[j] = i for an admissible edge (j, i), enumerated lazily in
    lexicographic order. Small families are also held as a frozenset.
    """

    def __init__(self, adjacency: Sequence[Sequence[int]]):
        self._adjacency = [sorted(adj) for adj in adjacency]
        self.size = len(self._adjacency)
        self.count = _count_perfect_matchings(self._adjacency)
        self._members: Optional[frozenset] = None
        if self.count <= MATCHING_MATERIALIZE_LIMIT:
            self._members = frozenset(self._enumerate())

    @property
    def is_lazy(self) -> bool:
        return self._members is None

    def __len__(self) -> int:
        return self.count

    def __bool__(self) -> bool:
        return self.count > 0

    def __iter__(self) -> Iterator[Permutation]:
        return self._enumerate()

    def __contains__(self, sigma) -> bool:
        sigma = tuple(sigma)
        if len(sigma) != self.size or sorted(sigma) != list(range(self.size)):
            return False
        return all(sigma[j] in self._adjacency[j] for j in range(self.size))

    def first(self) -> Optional[Permutation]:
        return next(self._enumerate(), None)

    def as_set(self) -> frozenset:
        if self._members is None:
            raise ValueError(f"{self.count} matchings exceed the materialisation limit; iterate instead")
        return self._members

    def _completable(self, row: int, used: frozenset) -> bool:
        residual = [[c for c in self._adjacency[j] if c not in used] for j in range(row, self.size)]
        return HopcroftKarp(residual).has_perfect_matching()

    def _enumerate(self) -> Iterator[Permutation]:
        if self.count == 0:
            return
        chosen: List[int] = []

        def extend(row: int, used: frozenset) -> Iterator[Permutation]:
            if row == self.size:
                yield tuple(chosen)
                return
            for column in self._adjacency[row]:
                if column in used:
                    continue
                taken = used | {column}
                if not self._completable(row + 1, taken):
                    continue
                chosen.append(column)
                yield from extend(row + 1, taken)
                chosen.pop()

        yield from extend(0, frozenset())


def perm_matchings(a: ExponentVec, b: ExponentVec) -> PermutationMatchings:
    """σ ∈ Σ_n with a_{σ(j)}/b_j ∈ ℕ for every j"""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    adjacency = [[i for i in range(len(a)) if is_nat(ext_ratio(a[i], b[j]))] for j in range(len(b))]
    return PermutationMatchings(adjacency)


def apply_perm(vec: Sequence, sigma: Permutation) -> tuple:
    """(v_{σ(1)}, ..., v_{σ(n)})"""
    return tuple(vec[i] for i in sigma)


def invert_perm(sigma: Permutation) -> Permutation:
    inverse = [0] * len(sigma)
    for j, i in enumerate(sigma):
        inverse[i] = j
    return tuple(inverse)


def compose_perm(outer: Permutation, inner: Permutation) -> Permutation:
    """Permutation ρ with apply_perm(apply_perm(v, outer), inner) = apply_perm(v, ρ)"""
    return tuple(outer[i] for i in inner)


def is_symmetry(p: ExponentVec, sigma: Permutation) -> bool:
    """σ ∈ Σ_n(p)"""
    return sorted(sigma) == list(range(len(p))) and all(p[i] == p[j] for j, i in enumerate(sigma))


def sigma_group(p: ExponentVec) -> PermutationMatchings:
    """Σ_n(p): permutations that only swap equal exponents"""
    return perm_matchings(p, p)


def exponent_classes(p: ExponentVec) -> List[List[int]]:
    """Index classes of equal exponents, in order of first appearance"""
    classes: Dict[Exponent, List[int]] = {}
    for index, e in enumerate(p):
        classes.setdefault(e, []).append(index)
    return list(classes.values())


# ===== Solvers =====

def solve_kl(qp: ExtRatio, qp_target: ExtRatio) -> Optional[Tuple[int, int]]:
    """
    Minimal (k, l), lexicographic in (l, k), with l·qp_target − k·qp ∈ ℤ.
    """
    if qp.lambda_deg != qp_target.lambda_deg:
        logger.debug(f"solve_kl: degree mismatch {qp} vs {qp_target}")
        return None
    if qp.lambda_deg != 0:
        # degree parts must cancel exactly: l/k = qp/qp_target
        quotient = qp.ratio / qp_target.ratio
        k, l = quotient.denominator, quotient.numerator
    else:
        # l = den(qp_target), k = den(qp) always works, so the scan is bounded
        k, l = None, None
        for l_candidate in range(1, qp_target.ratio.denominator + 1):
            for k_candidate in range(1, qp.ratio.denominator + 1):
                if is_int_diff([(l_candidate, qp_target), (-k_candidate, qp)]):
                    k, l = k_candidate, l_candidate
                    break
            if k is not None:
                break
    if k is None or not is_int_diff([(l, qp_target), (-k, qp)]):
        raise AssertionError(f"solve_kl self-check failed for {qp}, {qp_target}")
    return k, l


def r_conditions_hold(r: int, q: Exponent, q_target: Exponent, p_target: ExponentVec) -> bool:
    """(r·q̃ − q)/p̃_j ∈ ℤ for every j"""
    return all(
        is_int_diff([(r, ext_ratio(q_target, pj)), (-1, ext_ratio(q, pj))])
        for pj in p_target
    )


def r_period(q: Exponent, q_target: Exponent, p_target: ExponentVec) -> Optional[int]:
    """
    Period P of r ↦ r_conditions_hold(r, ...), or None when no r can satisfy it.

    For slot j with A = q̃/p̃_j and B = q/p̃_j:
    - deg A = deg B = 0: r·A − B ∈ ℤ depends on r mod den(A);
    - deg A = deg B ≠ 0: r is forced to B/A, the predicate holds for one r only
      (period 1 over the single admissible value);
    - deg A ≠ deg B: no r.
    P = lcm of den(A) over the degree-0 slots.
    """
    if q.lambda_pow != q_target.lambda_pow:
        return None
    period = 1
    for pj in p_target:
        a = ext_ratio(q_target, pj)
        if a.lambda_deg == 0:
            period = math.lcm(period, a.ratio.denominator)
    return period


def solve_r(q: Exponent, q_target: Exponent, p_target: ExponentVec, start: int = 1) -> Optional[int]:
    """Smallest r ≥ start with (r·q̃ − q)/p̃_j ∈ ℤ for all j"""
    period = r_period(q, q_target, p_target)
    if period is None:
        logger.debug(f"solve_r: degree mismatch q={q} q̃={q_target}")
        return None
    forced: Optional[Fraction] = None
    if any(ext_ratio(q_target, pj).lambda_deg != 0 for pj in p_target):
        forced = q.ratio / q_target.ratio
        if forced.denominator != 1 or forced < start:
            return None
        candidates: Iterable[int] = [forced.numerator]
    else:
        candidates = range(start, start + period)
    for r in candidates:
        if r_conditions_hold(r, q, q_target, p_target):
            return r
    logger.debug(f"solve_r: no r in one period P={period} from {start}")
    return None
