"""Multi-index combinatorics and factorially weighted derivative norms on grid functions."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .operator_model import OperatorSpec
from .spectral import SpectralBasis, apply_derivative, inner_product


@dataclass(frozen=True)
class MultiIndexTable:
    """All alpha in N_0^{n_vars} with |alpha| = ell, with multinomial weights ell!/alpha!."""

    n_vars: int
    ell: int
    indices: tuple[tuple[int, ...], ...]
    weights: tuple[int, ...]

    def weight_sum(self) -> int:
        return sum(self.weights)


def _compositions(n_vars: int, total: int):
    """All tuples of n_vars nonnegative integers summing to total, lexicographic."""
    if n_vars == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(n_vars - 1, total - head):
            yield (head,) + rest


def multi_indices(n_vars: int, ell: int) -> MultiIndexTable:
    if ell < 0 or n_vars < 1:
        raise ValueError("need ell >= 0 and n_vars >= 1")
    fact = math.factorial(ell)
    indices, weights = [], []
    for alpha in sorted(_compositions(n_vars, ell)):
        indices.append(alpha)
        weights.append(fact // math.prod(math.factorial(a) for a in alpha))
    return MultiIndexTable(n_vars, ell, tuple(indices), tuple(weights))


def check_combinatorial_identity(n_vars: int, ell: int, c: dict[tuple[int, ...], complex],
                                 tol: float = 1e-12) -> bool:
    """Whether the neighbor-sum identity holds for the collection c on |alpha| = ell.

    Summing c over the n_vars successors of every |beta| = ell-1 with weights
    (ell-1)!/beta! must reproduce the weighted sum over |alpha| = ell.
    """
    if ell < 1:
        raise ValueError("identity needs ell >= 1")
    lhs = 0.0 + 0.0j
    for beta, w in zip(*_table_pairs(n_vars, ell - 1)):
        for i in range(n_vars):
            alpha = tuple(b + (1 if j == i else 0) for j, b in enumerate(beta))
            lhs += w * c.get(alpha, 0.0)
    rhs = sum(w * c.get(alpha, 0.0) for alpha, w in zip(*_table_pairs(n_vars, ell)))
    scale = max(abs(lhs), abs(rhs), 1.0)
    return abs(lhs - rhs) <= tol * scale


def _table_pairs(n_vars: int, ell: int):
    t = multi_indices(n_vars, ell)
    return t.indices, t.weights


def resummation_coefficient(n: int, ell: int, k: int, gamma: tuple[int, ...]) -> Fraction:
    """Brute-force count of weighted (alpha, beta, i) chains landing on gamma.

    For |gamma| = ell-k+1 this is the coefficient appearing when an order-ell
    weighted square sum of k-th coefficient derivatives is re-expressed as a sum
    over the derivative index gamma; it is independent of gamma and equals
    C(ell, k) * C(ell+n, k).  Exact rational arithmetic throughout.
    """
    if not 0 <= k <= ell:
        raise ValueError("need 0 <= k <= ell")
    n_vars = n + 1
    if len(gamma) != n_vars or sum(gamma) != ell - k + 1:
        raise ValueError("gamma must have |gamma| = ell-k+1")
    total = Fraction(0)
    k_fact = math.factorial(k)
    ell_fact = math.factorial(ell)
    for alpha in _compositions(n_vars, ell):
        alpha_fact = math.prod(math.factorial(a) for a in alpha)
        w_alpha = Fraction(ell_fact, alpha_fact)
        for beta in _compositions(n_vars, k):
            if any(b > a for a, b in zip(alpha, beta)):
                continue
            binom = math.prod(math.comb(a, b) for a, b in zip(alpha, beta))
            beta_fact = math.prod(math.factorial(b) for b in beta)
            for i in range(n_vars):
                target = tuple(a - b + (1 if j == i else 0)
                               for j, (a, b) in enumerate(zip(alpha, beta)))
                if target == gamma:
                    total += w_alpha * Fraction(beta_fact, k_fact) * binom * binom
    gamma_fact = math.prod(math.factorial(g) for g in gamma)
    return total * Fraction(gamma_fact, math.factorial(ell - k + 1))


def check_resummation_coefficient(n: int, ell: int, k: int) -> bool:
    """Verify the closed form C(ell,k)*C(ell+n,k) for every |gamma| = ell-k+1, exactly."""
    expected = Fraction(math.comb(ell, k) * math.comb(ell + n, k))
    return all(
        resummation_coefficient(n, ell, k, gamma) == expected
        for gamma in _compositions(n + 1, ell - k + 1)
    )


# ---------------------------------------------------------------------------
# norms of grid functions
# ---------------------------------------------------------------------------


def sobolev_seminorm(u: np.ndarray, ell: int, basis: SpectralBasis) -> float:
    """Order-ell seminorm: weighted l2 of all derivatives d^alpha u with |alpha| = ell.

    Derivatives are spectral; the underlying integral is the quadrature norm over
    the cylinder, summed over components.
    """
    table = multi_indices(2, ell)  # grid engine is 1+1 dimensional
    total = 0.0
    for alpha, w in zip(table.indices, table.weights):
        du = apply_derivative(u, alpha, basis)
        total += w * inner_product(du, du, basis).real
    return math.sqrt(max(total, 0.0))


@dataclass(frozen=True)
class TripleNorm:
    value: float
    tail_bound: float
    terms: tuple[float, ...]

    @property
    def tail_flagged(self) -> bool:
        return self.tail_bound > 1e-10 * max(self.value, 1e-300)


def triple_norm(u: np.ndarray, h: int, spec: OperatorSpec, basis: SpectralBasis) -> TripleNorm:
    """Weighted sum over ell of r_ell * ||u||_ell / (ell+h)!, truncated at L_max.

    The tail beyond L_max is bounded by a geometric extrapolation of the last two
    retained terms; for band-limited data the terms vanish identically once ell
    exceeds the resolvable degree.
    """
    if h not in (0, 1):
        raise ValueError("h must be 0 or 1")
    terms = []
    for ell in range(spec.L_max + 1):
        r = spec.weights.r(ell)
        if r == 0.0:
            terms.append(0.0)
            continue
        terms.append(r * sobolev_seminorm(u, ell, basis) / math.factorial(ell + h))
    value = float(sum(terms))
    t_last, t_prev = terms[-1], terms[-2] if len(terms) > 1 else 0.0
    if t_last == 0.0:
        tail = 0.0
    elif t_prev > 0.0 and t_last < t_prev:
        ratio = t_last / t_prev
        tail = t_last * ratio / (1.0 - ratio)
    else:
        raise ValueError("triple norm truncation not decaying; raise L_max or lower the band")
    return TripleNorm(value=value, tail_bound=tail, terms=tuple(terms))


@dataclass(frozen=True)
class NormProfile:
    seminorms: tuple[float, ...]
    triple0: TripleNorm
    triple1: TripleNorm

    def to_json(self) -> dict:
        return {
            "seminorms": list(self.seminorms),
            "triple0": {"value": self.triple0.value, "tail_bound": self.triple0.tail_bound},
            "triple1": {"value": self.triple1.value, "tail_bound": self.triple1.tail_bound},
        }


def norm_profile(u: np.ndarray, spec: OperatorSpec, basis: SpectralBasis) -> NormProfile:
    semis = tuple(sobolev_seminorm(u, ell, basis) for ell in range(spec.L_max + 1))
    return NormProfile(
        seminorms=semis,
        triple0=triple_norm(u, 0, spec, basis),
        triple1=triple_norm(u, 1, spec, basis),
    )
