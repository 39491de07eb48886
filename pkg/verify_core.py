#!/usr/bin/env python3
"""
Verify Core - numerical verification harness for Hartogs triangle maps

Samples the interior and the boundary pieces K and L by exact radial scaling,
evaluates the Levi form of K, and runs finite-difference holomorphy, boundary
invariance, properness-ray and modulus-identity sweeps. Every check returns a
VerificationReport; reports serialize to JSON lines.

License: Apache-2.0
"""

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ellipsoid_core import EllipsoidDomain
from exponent_core import DEFAULT_LAMBDA, Exponent, ExponentVec
from hartogs_core import (
    HartogsDomain,
    HartogsProperMap,
    Point,
    join_point,
    modulus_identity_residual,
    split_point,
    validate_proper_form,
)
from hartogs_errors import EmptyRegion, HartogsError, LeviSingular, NotOnK

ON_K_TOL = 1e-10
LEVI_TOL = 1e-10
FD_STEP = 1e-5
FD_TOL = 1e-5
BOUNDARY_TOL = 1e-8
INTERIOR_TOL = 1e-10
MODULUS_TOL = 1e-9
RAY_TOL = 0.05
GAMMA_FLOOR = 0.05

SUITE_ALL = (
    "proper_form",
    "interior_mapping",
    "boundary_invariance",
    "properness_ray",
    "holomorphy_fd",
    "modulus_identity",
)


class Region(Enum):
    INTERIOR = "interior"
    ON_K = "on_k"
    ON_L = "on_l"


# ===== Sampling =====

def _scale_to(vec: np.ndarray, values: np.ndarray, target: float) -> np.ndarray:
    """Rescale z_j by c^{1/(2p_j)} so that Σ|z_j|^{2p_j} = target"""
    current = float(np.sum(np.abs(vec) ** (2.0 * values)))
    factor = target / current
    return vec * factor ** (1.0 / (2.0 * values))


def _direction(size: int, rng: np.random.Generator, support: Optional[Sequence[int]] = None) -> np.ndarray:
    vec = rng.normal(size=size) + 1j * rng.normal(size=size)
    if support is not None:
        mask = np.zeros(size, dtype=bool)
        mask[list(support)] = True
        vec[~mask] = 0.0
    return vec


def sample(
    D: Union[HartogsDomain, EllipsoidDomain],
    region: Region,
    count: int,
    seed: int,
    z_support: Optional[Sequence[int]] = None,
) -> List[Any]:
    """
    Deterministic points of the requested region.

    Interior: s_w ∈ [0.01, 0.99], s_z = t·s_w with t ∈ [0.01, 0.99].
    ON_K: s_z = s_w ∈ [0.01, 0.99]. ON_L: s_w = 1, s_z ∈ [0.01, 0.99].
    For an EllipsoidDomain ON_L stands for the boundary sphere s = 1.
    z_support restricts the coordinates of z that may be nonzero.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)

    if isinstance(D, EllipsoidDomain):
        if region == Region.ON_K:
            raise EmptyRegion("an ellipsoid has no K part")
        values = np.asarray(D.values)
        points = []
        for _ in range(count):
            s = 1.0 if region == Region.ON_L else rng.uniform(0.01, 0.99)
            points.append(_scale_to(_direction(D.n, rng, z_support), values, s))
        return points

    if z_support is not None and len(z_support) == 0:
        if region == Region.ON_K:
            raise EmptyRegion("K requires z != 0")
    p_values = np.asarray(D.z_domain.values)
    q_values = np.asarray(D.w_domain.values)
    points: List[Point] = []
    for _ in range(count):
        if region == Region.ON_L:
            s_w = 1.0
            s_z = rng.uniform(0.01, 0.99)
        else:
            s_w = rng.uniform(0.01, 0.99)
            s_z = s_w if region == Region.ON_K else rng.uniform(0.01, 0.99) * s_w
        w = _scale_to(_direction(D.m, rng), q_values, s_w)
        if z_support is not None and len(z_support) == 0:
            z = np.zeros(D.n, dtype=complex)
        else:
            z = _scale_to(_direction(D.n, rng, z_support), p_values, s_z)
        points.append((z, w))
    return points


def boundary_gap(D: HartogsDomain, point: Point) -> float:
    """min((s_w − s_z)/s_w, 1 − s_w); negative outside the domain"""
    s_z, s_w = D.modulus_sums(point)
    if s_w <= 0.0:
        return -1.0
    return min((s_w - s_z) / s_w, 1.0 - s_w)


# ===== Levi form on K =====

@dataclass
class LeviData:
    point: Point
    tangent: Tuple[np.ndarray, complex]
    levi_value: float
    restricted_identity_value: float
    tangency_residual: float

    def to_dict(self) -> Dict[str, Any]:
        z, w = self.point
        X, Y = self.tangent
        return {
            "point": {"z": [[c.real, c.imag] for c in np.atleast_1d(z)], "w": [complex(w).real, complex(w).imag]},
            "tangent": {"X": [[c.real, c.imag] for c in np.atleast_1d(X)], "Y": [complex(Y).real, complex(Y).imag]},
            "lhs": self.levi_value,
            "rhs": self.restricted_identity_value,
            "tangency_residual": self.tangency_residual,
        }


def _levi_point(p: ExponentVec, q: Exponent, point: Any, lam: float) -> Tuple[np.ndarray, complex, np.ndarray, float]:
    z, w = point
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = complex(np.ravel(np.asarray(w, dtype=complex))[0])
    if z.size != len(p):
        raise NotOnK(f"z has {z.size} coordinates, p has {len(p)}")
    p_values = np.array([e.value(lam) for e in p])
    q_value = q.value(lam)
    if w == 0:
        raise NotOnK("w = 0 is not on K")
    s_z = float(np.sum(np.abs(z) ** (2.0 * p_values)))
    s_w = abs(w) ** (2.0 * q_value)
    if s_w >= 1.0 or abs(s_z - s_w) > ON_K_TOL * max(s_w, 1e-300) or s_z <= 0.0:
        raise NotOnK(f"point is not on K (s_z={s_z:.3e}, s_w={s_w:.3e})")
    return z, w, p_values, q_value


def _levi_weights(p_values: np.ndarray, z: np.ndarray, X: np.ndarray) -> np.ndarray:
    """|z_j|^{2(p_j−1)}, with zero coordinates taken as 1 (p_j = 1) or 0"""
    weights = np.empty(z.size)
    for j, (pj, zj) in enumerate(zip(p_values, z)):
        if zj != 0:
            weights[j] = abs(zj) ** (2.0 * (pj - 1.0))
        elif pj < 1.0 and X[j] != 0:
            raise LeviSingular(f"z_{j} = 0 with p_{j} < 1 and X_{j} != 0")
        else:
            weights[j] = 1.0 if pj == 1.0 else 0.0
    return weights


def induced_tangent(p: ExponentVec, q: Exponent, point: Any, X: Sequence[complex],
                    lam: float = DEFAULT_LAMBDA) -> complex:
    """Y completing X to a complex tangent vector of K"""
    z, w, p_values, q_value = _levi_point(p, q, point, lam)
    X = np.asarray(X, dtype=complex)
    weights = _levi_weights(p_values, z, X)
    total = np.sum(p_values * np.conj(z) * weights * X)
    return complex(total / (q_value * np.conj(w) * abs(w) ** (2.0 * (q_value - 1.0))))


def levi_form(p: ExponentVec, q: Exponent, point: Any, tangent: Tuple[Sequence[complex], complex],
              lam: float = DEFAULT_LAMBDA) -> float:
    z, w, p_values, q_value = _levi_point(p, q, point, lam)
    X = np.asarray(tangent[0], dtype=complex)
    Y = complex(np.ravel(np.asarray(tangent[1], dtype=complex))[0])
    weights = _levi_weights(p_values, z, X)
    z_part = float(np.sum(p_values ** 2 * weights * np.abs(X) ** 2))
    w_part = q_value ** 2 * abs(w) ** (2.0 * (q_value - 1.0)) * abs(Y) ** 2
    return z_part - w_part


def levi_restricted_identity(p: ExponentVec, q: Exponent, point: Any, X: Sequence[complex],
                             lam: float = DEFAULT_LAMBDA) -> Tuple[float, float]:
    """(ℒr at (X, Y(X)), sum-of-squares form of the same value)"""
    z, w, p_values, q_value = _levi_point(p, q, point, lam)
    X = np.asarray(X, dtype=complex)
    Y = induced_tangent(p, q, (z, w), X, lam)
    lhs = levi_form(p, q, (z, w), (X, Y), lam)
    weights = _levi_weights(p_values, z, X)
    rhs = 0.0
    for j in range(z.size):
        for k in range(j + 1, z.size):
            cross = p_values[j] * z[k] * X[j] - p_values[k] * z[j] * X[k]
            rhs += weights[j] * weights[k] * abs(cross) ** 2
    rhs /= abs(w) ** (2.0 * q_value)
    return lhs, float(rhs)


def levi_kernel_direction(p: ExponentVec, z: Sequence[complex], lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """X_j = z_j/p_j annihilates every cross term"""
    p_values = np.array([e.value(lam) for e in p])
    return np.asarray(z, dtype=complex) / p_values


def levi_data(p: ExponentVec, q: Exponent, point: Any, X: Sequence[complex],
              lam: float = DEFAULT_LAMBDA) -> LeviData:
    z, w, p_values, q_value = _levi_point(p, q, point, lam)
    X = np.asarray(X, dtype=complex)
    Y = induced_tangent(p, q, (z, w), X, lam)
    lhs, rhs = levi_restricted_identity(p, q, (z, w), X, lam)
    weights = _levi_weights(p_values, z, X)
    tangency = np.sum(p_values * np.conj(z) * weights * X) - q_value * np.conj(w) * abs(w) ** (2.0 * (q_value - 1.0)) * Y
    return LeviData((z, w), (X, Y), lhs, rhs, float(abs(tangency)))


# ===== Reports =====

@dataclass
class VerificationReport:
    property: str
    samples: int
    worst_residual: float
    tolerance: float
    passed: bool
    seed: Optional[int] = None
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "property": self.property,
            "samples": self.samples,
            "worst_residual": self.worst_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "seed": self.seed,
        }
        if self.details:
            payload["details"] = self.details
        return payload

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), default=float)


def _report(name: str, residuals: Sequence[float], tolerance: float, seed: Optional[int],
            details: Optional[Dict[str, Any]] = None) -> VerificationReport:
    residuals = [float(r) for r in residuals]
    worst = max(residuals) if residuals else 0.0
    if any(np.isnan(r) for r in residuals):
        worst = float("inf")
    passed = bool(worst <= tolerance)
    report = VerificationReport(name, len(residuals), worst, tolerance, passed, seed, details or {})
    log = logger.info if passed else logger.warning
    log(f"{name}: {'pass' if passed else 'FAIL'} worst={worst:.3e} tol={tolerance:.1e} samples={len(residuals)}")
    return report


def merge_reports(a: VerificationReport, b: VerificationReport) -> VerificationReport:
    """Combine two runs of the same property"""
    if a.property != b.property:
        raise ValueError(f"cannot merge {a.property} with {b.property}")
    tolerance = min(a.tolerance, b.tolerance)
    worst = max(a.worst_residual, b.worst_residual)
    return VerificationReport(
        a.property, a.samples + b.samples, worst, tolerance, bool(worst <= tolerance),
        a.seed if a.seed is not None else b.seed, {**b.details, **a.details},
    )


# ===== Checks =====

def as_flat_map(M: HartogsProperMap) -> Callable[[np.ndarray], np.ndarray]:
    n = M.src.n
    return lambda x: join_point(M(split_point(x, n)))


def _image(M: HartogsProperMap, point: Point) -> Optional[Point]:
    try:
        with np.errstate(all="ignore"):
            return M(point)
    except (HartogsError, ZeroDivisionError, OverflowError, FloatingPointError) as e:
        logger.debug(f"evaluation failed at {point}: {e}")
        return None


def wirtinger_residual(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = FD_STEP) -> float:
    """max_i |∂F/∂z̄_i| / max(1, |∂F/∂z_i|) by central differences"""
    x = np.asarray(x, dtype=complex)
    worst = 0.0
    for i in range(x.size):
        step = h * max(abs(x[i]), 1.0)
        e = np.zeros(x.size, dtype=complex)
        e[i] = step
        d_re = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * step)
        d_im = (np.asarray(fn(x + 1j * e)) - np.asarray(fn(x - 1j * e))) / (2.0 * step)
        d_zbar = 0.5 * (d_re + 1j * d_im)
        d_z = 0.5 * (d_re - 1j * d_im)
        worst = max(worst, float(np.max(np.abs(d_zbar))) / max(1.0, float(np.max(np.abs(d_z)))))
    return worst


def check_holomorphy_fd(fn: Union[HartogsProperMap, Callable], samples: Sequence[Any], h: float = FD_STEP,
                        tol: float = FD_TOL, seed: Optional[int] = None) -> VerificationReport:
    if not 1e-6 <= h <= 1e-4:
        raise ValueError(f"FD step {h} outside [1e-6, 1e-4]")
    if hasattr(fn, "src"):
        fn = as_flat_map(fn)
    residuals = []
    for x in samples:
        flat = join_point(x) if isinstance(x, tuple) else np.asarray(x, dtype=complex)
        try:
            with np.errstate(all="ignore"):
                residuals.append(wirtinger_residual(fn, flat, h))
        except (HartogsError, ZeroDivisionError) as e:
            logger.debug(f"finite-difference step failed: {e}")
            residuals.append(float("inf"))
    return _report("holomorphy_fd", residuals, tol, seed, {"step": h})


def check_boundary_invariance(M: HartogsProperMap, src: Optional[HartogsDomain] = None,
                              dst: Optional[HartogsDomain] = None, count: int = 200, seed: int = 42,
                              tol: float = BOUNDARY_TOL) -> VerificationReport:
    """K-samples must land on K̃ (relative gap), L-samples on L̃ (absolute gap)"""
    src = src or M.src
    dst = dst or M.dst
    k_residuals, l_residuals = [], []
    for point in sample(src, Region.ON_K, count, seed):
        image = _image(M, point)
        if image is None:
            k_residuals.append(float("inf"))
            continue
        s_z, s_w = dst.modulus_sums(image)
        k_residuals.append(abs(s_z - s_w) / s_w if s_w > 0 else float("inf"))
    for point in sample(src, Region.ON_L, count, seed + 1):
        image = _image(M, point)
        if image is None:
            l_residuals.append(float("inf"))
            continue
        l_residuals.append(abs(dst.modulus_sums(image)[1] - 1.0))
    details = {
        "on_k": max(k_residuals),
        "on_l": max(l_residuals),
        "extrapolated": src.n == 1 and src.m == 1,
    }
    return _report("boundary_invariance", k_residuals + l_residuals, tol, seed, details)


def _fit_power_law(gaps: np.ndarray, image_gaps: np.ndarray) -> Tuple[float, float]:
    """image_gap ≈ C·gap^γ by least squares in log-log"""
    if np.any(image_gaps <= 0):
        return 0.0, 0.0
    gamma, log_c = np.polyfit(np.log(gaps), np.log(image_gaps), 1)
    return float(gamma), float(np.exp(log_c))


def check_properness_ray(M: HartogsProperMap, src: Optional[HartogsDomain] = None,
                         dst: Optional[HartogsDomain] = None, ray_count: int = 8, steps: int = 12,
                         seed: int = 42, tol: float = RAY_TOL) -> VerificationReport:
    """
    Approach K and L along rays with source gap 2^{-i}; the image gap must
    decay. Residual per ray is last image gap / first image gap, forced to 1
    when the fitted exponent γ is not positive.
    """
    if steps < 8:
        raise ValueError(f"steps must be >= 8, got {steps}")
    src = src or M.src
    dst = dst or M.dst
    rng = np.random.default_rng(seed)
    p_values = np.asarray(src.z_domain.values)
    q_values = np.asarray(src.w_domain.values)
    gaps = 2.0 ** -np.arange(2, steps + 2, dtype=float)
    residuals, gammas, constants = [], [], []
    for ray in range(ray_count):
        z_dir = _direction(src.n, rng)
        w_dir = _direction(src.m, rng)
        towards_k = ray % 2 == 0
        anchor = rng.uniform(0.3, 0.7) if towards_k else rng.uniform(0.2, 0.6)
        image_gaps, source_gaps = [], []
        for g in gaps:
            if towards_k:
                s_w, s_z = anchor, anchor * (1.0 - g)
            else:
                s_w = 1.0 - g
                s_z = anchor * s_w
            point = (_scale_to(z_dir, p_values, s_z), _scale_to(w_dir, q_values, s_w))
            source_gaps.append(boundary_gap(src, point))
            image = _image(M, point)
            image_gaps.append(boundary_gap(dst, image) if image is not None else float("nan"))
        image_gaps = np.asarray(image_gaps)
        if np.any(np.isnan(image_gaps)):
            residuals.append(float("inf"))
            gammas.append(None)
            constants.append(None)
            continue
        source_gaps = np.asarray(source_gaps)
        gamma, constant = _fit_power_law(source_gaps, image_gaps)
        gammas.append(gamma)
        constants.append(constant)
        ratio = float(image_gaps[-1] / image_gaps[0]) if image_gaps[0] > 0 else float("inf")
        residuals.append(ratio if gamma > GAMMA_FLOOR else max(ratio, 1.0))
    details = {"gammas": gammas, "constants": constants, "steps": steps}
    return _report("properness_ray", residuals, tol, seed, details)


def check_interior_mapping(M: HartogsProperMap, count: int = 200, seed: int = 42,
                           tol: float = INTERIOR_TOL) -> VerificationReport:
    """Interior points must map strictly inside the target"""
    residuals = []
    min_gap = float("inf")
    for point in sample(M.src, Region.INTERIOR, count, seed):
        image = _image(M, point)
        gap = boundary_gap(M.dst, image) if image is not None else -1.0
        min_gap = min(min_gap, gap)
        residuals.append(max(0.0, -gap))
    return _report("interior_mapping", residuals, tol, seed, {"min_image_gap": min_gap})


def check_modulus_identity(M: HartogsProperMap, count: int = 200, seed: int = 42,
                           tol: float = MODULUS_TOL) -> VerificationReport:
    """Image moduli against the closed-form prediction of the map's family"""
    residuals = []
    for point in sample(M.src, Region.INTERIOR, count, seed):
        try:
            with np.errstate(all="ignore"):
                residuals.append(modulus_identity_residual(M, point))
        except (HartogsError, ZeroDivisionError):
            residuals.append(float("inf"))
    return _report("modulus_identity", residuals, tol, seed, {"case": M.case})


def check_proper_form(M: HartogsProperMap, seed: Optional[int] = None) -> VerificationReport:
    result = validate_proper_form(M)
    return _report("proper_form", [0.0 if result.valid else 1.0], 0.0, seed, {"violations": result.violations})


# ===== Suite =====

def property_seed(seed: int, name: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def resolve_suite(suite: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    if isinstance(suite, str):
        names = SUITE_ALL if suite == "all" else tuple(s.strip() for s in suite.split(",") if s.strip())
    else:
        names = tuple(suite)
    unknown = [name for name in names if name not in SUITE_ALL]
    if unknown or not names:
        raise ValueError(f"unknown properties {unknown}; choose from {', '.join(SUITE_ALL)}")
    return names


def run_property(M: HartogsProperMap, name: str, count: int, seed: int) -> VerificationReport:
    prop_seed = property_seed(seed, name)
    if name == "proper_form":
        return check_proper_form(M, prop_seed)
    if name == "interior_mapping":
        return check_interior_mapping(M, count, prop_seed)
    if name == "boundary_invariance":
        return check_boundary_invariance(M, count=count, seed=prop_seed)
    if name == "properness_ray":
        return check_properness_ray(M, seed=prop_seed)
    if name == "holomorphy_fd":
        samples = sample(M.src, Region.INTERIOR, max(1, min(count, 50)), prop_seed)
        return check_holomorphy_fd(M, samples, seed=prop_seed)
    return check_modulus_identity(M, count, prop_seed)


def run_suite(M: HartogsProperMap, suite: Union[str, Sequence[str]] = "all", count: int = 200,
              seed: int = 42, workers: int = 1) -> List[VerificationReport]:
    """Run each property with its own derived seed; results come back in suite order"""
    names = resolve_suite(suite)
    logger.info(f"running {len(names)} properties on {M.case} map {M.src} -> {M.dst} (workers={workers})")
    if workers <= 1:
        return [run_property(M, name, count, seed) for name in names]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda name: run_property(M, name, count, seed), names))
