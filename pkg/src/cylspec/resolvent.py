"""Resolvent solves, pole location in the fundamental strip, and loop-integral projections.

The shifted operator D + z*A^0 is invertible far enough to the right; its
inverse, as a function of z, extends meromorphically with poles periodic under
z ~ z + i.  Poles are located as generalized eigenvalues of the collocation
pencil (D, -A^0), filtered against discretization artifacts by persistence
under resolution doubling, and reduced to the fundamental strip 0 <= Im z < 1.
Spectral projections are trapezoid loop integrals of (z - lam)^l D_z^{-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .operator_model import OperatorSpec, SpecError
from .spectral import (
    ResolventAssembly,
    SpectralBasis,
    assemble_operator,
    build_basis,
    chebyshev_coefficients,
    interior_mode_projector,
    mode_blocks,
    mode_operator_parts,
    multiplier_matrix,
    phase_shift_matrix,
    random_band_limited,
)

RANK_TOL = 1e-8
ORDER_TOL = 1e-9
PERSIST_TOL = 1e-6


class NearPoleError(ValueError):
    def __init__(self, z: complex, nearest: complex | None, residual: float):
        self.z = z
        self.nearest = nearest
        self.residual = residual
        msg = f"shift z={z} is numerically at a pole (solve residual {residual:.3g})"
        if nearest is not None:
            msg += f"; nearest eigenvalue estimate {nearest}"
        super().__init__(msg)


def _solve_refined(mat: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """LU solve with one step of iterative refinement; returns solution and residual."""
    lu_piv = scipy.linalg.lu_factor(mat, check_finite=False)
    x = scipy.linalg.lu_solve(lu_piv, rhs, check_finite=False)
    r = rhs - mat @ x
    x = x + scipy.linalg.lu_solve(lu_piv, r, check_finite=False)
    r = rhs - mat @ x
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    return x, float(np.linalg.norm(r)) / scale


def solve_resolvent(assembly: ResolventAssembly, f: np.ndarray) -> np.ndarray:
    """Solve (D + z*A^0) u = f on the grid; residual-checked direct solve."""
    shape = (assembly.basis.n_time, assembly.basis.n_space, assembly.N)
    f = np.asarray(f, dtype=complex)
    if f.shape != shape:
        raise ValueError(f"forcing must have shape {shape}")
    rhs = f.reshape(-1)
    if np.linalg.norm(rhs) == 0.0:
        return np.zeros(shape, dtype=complex)
    try:
        u, residual = _solve_refined(assembly.matrix, rhs)
    except (np.linalg.LinAlgError, ValueError):
        raise NearPoleError(assembly.z, _nearest_eigenvalue(assembly), np.inf) from None
    if residual > 1e-10:
        raise NearPoleError(assembly.z, _nearest_eigenvalue(assembly), residual)
    return u.reshape(shape)


def resolvent_matrix(assembly: ResolventAssembly) -> np.ndarray:
    """Dense inverse of the assembled operator (sizes are desk-scale)."""
    ident = np.eye(assembly.size, dtype=complex)
    try:
        inv, residual = _solve_refined(assembly.matrix, ident)
    except (np.linalg.LinAlgError, ValueError):
        raise NearPoleError(assembly.z, _nearest_eigenvalue(assembly), np.inf) from None
    if residual > 1e-6:
        raise NearPoleError(assembly.z, _nearest_eigenvalue(assembly), residual)
    return inv


def resolvent_matrix_for(spec: OperatorSpec, basis: SpectralBasis, z: complex,
                         parts: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """Dense value-space resolvent at shift z, via per-mode blocks when they decouple.

    The mode blocks act on Fourier coefficients, so the value-space inverse is
    the block-diagonal inverse conjugated by the DFT synthesis matrix.  `parts`
    may carry precomputed mode_operator_parts to amortize coefficient setup.
    """
    if not spec.x0_independent():
        return resolvent_matrix(assemble_operator(spec, basis, z))
    if parts is None:
        parts = mode_operator_parts(spec, basis)
    base, a0 = parts
    blocks = base + z * a0[None, :, :]
    try:
        inv = np.linalg.inv(blocks)
    except np.linalg.LinAlgError:
        raise NearPoleError(z, None, np.inf) from None
    ident = np.eye(blocks.shape[1], dtype=complex)
    inv = inv + inv @ (ident[None] - blocks @ inv)  # one Newton refinement step
    residual = float(np.linalg.norm(ident[None] - blocks @ inv, axis=(1, 2)).max())
    if residual > 1e-6 * math.sqrt(blocks.shape[1]):
        raise NearPoleError(z, None, residual)
    V = np.exp(1j * np.outer(basis.x0, basis.modes))
    n_t = basis.n_time
    big = np.einsum("jq,kq,qab->jakb", V, V.conj() / n_t, inv, optimize=True)
    size = n_t * blocks.shape[1]
    return big.reshape(size, size)


def apply_resolvent(spec: OperatorSpec, basis: SpectralBasis, z: complex, f: np.ndarray,
                    parts: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """u = (D + z*A^0)^{-1} f without forming the inverse (batched per-mode solves)."""
    if not spec.x0_independent():
        return solve_resolvent(assemble_operator(spec, basis, z), f)
    if parts is None:
        parts = mode_operator_parts(spec, basis)
    base, a0 = parts
    blocks = base + z * a0[None, :, :]
    from .spectral import fourier_coefficients

    f = np.asarray(f, dtype=complex)
    shape = f.shape
    rhs = fourier_coefficients(f, basis).reshape(basis.n_time, -1, 1)
    try:
        sol = np.linalg.solve(blocks, rhs)
        sol = sol + np.linalg.solve(blocks, rhs - blocks @ sol)
    except np.linalg.LinAlgError:
        raise NearPoleError(z, None, np.inf) from None
    res = float(np.linalg.norm(rhs - blocks @ sol))
    scale = max(float(np.linalg.norm(rhs)), 1e-300)
    if res / scale > 1e-8:
        raise NearPoleError(z, None, res / scale)
    modes = sol.reshape(basis.n_time, basis.n_space, -1)
    return (np.fft.ifft(modes, axis=0) * basis.n_time).reshape(shape)


def apply_operator(spec: OperatorSpec, basis: SpectralBasis, z: complex, u: np.ndarray,
                   parts: tuple[np.ndarray, np.ndarray] | None = None) -> np.ndarray:
    """(D + z*A^0) u via per-mode blocks (dense assembly for coupled coefficients)."""
    if not spec.x0_independent():
        asm = assemble_operator(spec, basis, z)
        return (asm.matrix @ u.reshape(-1)).reshape(u.shape)
    if parts is None:
        parts = mode_operator_parts(spec, basis)
    base, a0 = parts
    blocks = base + z * a0[None, :, :]
    from .spectral import fourier_coefficients

    modes = fourier_coefficients(u, basis).reshape(basis.n_time, -1, 1)
    out = (blocks @ modes).reshape(basis.n_time, basis.n_space, -1)
    return (np.fft.ifft(out, axis=0) * basis.n_time).reshape(u.shape)


def apply_multiplier(spec: OperatorSpec, basis: SpectralBasis, u: np.ndarray) -> np.ndarray:
    """Pointwise multiplication by A^0 on a grid function."""
    a0 = spec.A[0].eval_grid(basis.x0, basis.x1)
    return np.einsum("jmab,jmb->jma", a0, u)


def _nearest_eigenvalue(assembly: ResolventAssembly) -> complex | None:
    """Pole estimate nearest to the assembly shift, from the local pencil."""
    if assembly.a0_matrix is None:
        return None
    try:
        deltas = scipy.linalg.eigvals(assembly.matrix, -assembly.a0_matrix)
    except Exception:  # pragma: no cover - LAPACK failure on degenerate input
        return None
    deltas = deltas[np.isfinite(deltas)]
    if deltas.size == 0:
        return None
    return complex(assembly.z + deltas[np.argmin(np.abs(deltas))])


# ---------------------------------------------------------------------------
# pole detection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pole:
    lam: complex          # strip representative, 0 <= Im < 1
    order: int
    rank: int
    residual: float
    source: complex       # detected (unreduced) location used for the loop integral
    mode: int | None = None

    def to_json(self) -> dict:
        return {
            "re": self.lam.real, "im": self.lam.imag, "order": self.order,
            "rank": self.rank, "residual": self.residual,
        }


@dataclass(frozen=True)
class PoleSet:
    poles: tuple[Pole, ...]
    window: tuple[float, float]
    z_star_star: float
    z_star_star_star: float
    nonneg: tuple[Pole, ...]          # strip poles with Re >= 0 (drives the finite-rank part)
    raw_eigenvalues: tuple[complex, ...]  # filtered, unreduced, window-restricted
    edge_flag: bool = False

    def to_json(self) -> dict:
        return {
            "window": {"re_min": self.window[0], "re_max": self.window[1]},
            "z_star_star": _json_float(self.z_star_star),
            "z_star_star_star": _json_float(self.z_star_star_star),
            "n_nonneg": len(self.nonneg),
            "edge_flag": self.edge_flag,
            "poles": [p.to_json() for p in self.poles],
        }

    def to_csv(self, path: str, manifest_hash: str = "") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if manifest_hash:
                fh.write(f"# manifest: {manifest_hash}\n")
            fh.write("re,im,order,rank,residual\n")
            for p in self.poles:
                fh.write(f"{p.lam.real!r},{p.lam.imag!r},{p.order},{p.rank},{p.residual!r}\n")


def _json_float(x: float):
    return None if not np.isfinite(x) else x


def _pencil_eigenpairs(spec: OperatorSpec, basis: SpectralBasis):
    """Generalized eigenvalues z of (D + z*A^0) v = 0, with eigenvectors and mode tags."""
    out = []
    if spec.x0_independent():
        blocks = mode_blocks(spec, basis, 0.0)
        nxN = basis.n_space * spec.N
        a0 = _mode_a0(spec, basis)
        for q, block in zip(basis.modes, blocks):
            vals, vecs = scipy.linalg.eig(block, -a0)
            for idx in range(len(vals)):
                z = vals[idx]
                if not np.isfinite(z):
                    continue
                v = vecs[:, idx]
                res = np.linalg.norm((block + z * a0) @ v) / max(np.linalg.norm(v), 1e-300)
                out.append((complex(z), v, int(q), float(res)))
    else:
        asm = assemble_operator(spec, basis, 0.0)
        a0 = multiplier_matrix(spec, basis)
        vals, vecs = scipy.linalg.eig(asm.matrix, -a0)
        for idx in range(len(vals)):
            z = vals[idx]
            if not np.isfinite(z):
                continue
            v = vecs[:, idx]
            res = np.linalg.norm((asm.matrix + z * a0) @ v) / max(np.linalg.norm(v), 1e-300)
            out.append((complex(z), v, None, float(res)))
    return out


def _mode_a0(spec: OperatorSpec, basis: SpectralBasis) -> np.ndarray:
    N = spec.N
    a0 = spec.A[0].eval_grid(np.array([0.0]), basis.x1)[0]
    out = np.zeros((basis.n_space * N, basis.n_space * N), dtype=complex)
    for m in range(basis.n_space):
        out[m * N:(m + 1) * N, m * N:(m + 1) * N] = a0[m]
    return out


def _chebyshev_tail_clean(v: np.ndarray, basis: SpectralBasis, N: int) -> bool:
    """Reject eigenvectors whose Chebyshev tail does not decay (discretization artifacts).

    Only meaningful at moderate resolution; skipped for tiny grids where genuine
    low-degree eigenfunctions occupy the whole coefficient range.
    """
    nx = basis.n_space
    if nx < 8:
        return True
    vals = v.reshape(-1, nx, N) if v.size != nx * N else v.reshape(1, nx, N)
    coeff = chebyshev_coefficients(np.moveaxis(vals, 1, 0).reshape(nx, -1))
    mags = np.abs(coeff)
    cut = nx - nx // 4
    return float(mags[cut:].max()) <= 1e-8 * float(mags.max() + 1e-300)


def find_poles(spec: OperatorSpec, basis: SpectralBasis,
               window: tuple[float, float] = (-2.2, 2.2),
               *, persist_tol: float = PERSIST_TOL,
               contour_nodes: int = 32,
               compute_projections: bool = True) -> PoleSet:
    """Locate poles of the resolvent in a real-part window, reduced to the strip.

    Candidates are generalized eigenvalues of the collocation pencil; spurious
    ones are removed by requiring persistence (within persist_tol) under a
    resolution doubling M -> 2M, Q_max -> Q_max + 2 and a clean Chebyshev tail.
    Survivors are deduplicated modulo z ~ z + i using interior modes, and each
    strip pole gets an order (loop-integral nilpotency) and a rank (numerical
    rank of P A^0).
    """
    re_min, re_max = window
    pad = 10 * persist_tol
    fine = build_basis(basis.Q_max + 2, 2 * basis.M)
    fine_vals = np.array([z for z, _v, _q, _r in _pencil_eigenpairs(spec, fine)])

    kept: list[tuple[complex, int | None, float]] = []
    edge_flag = False
    for z, v, q, res in _pencil_eigenpairs(spec, basis):
        if not (re_min - pad <= z.real <= re_max + pad):
            continue
        if fine_vals.size == 0 or np.abs(fine_vals - z).min() > persist_tol:
            continue
        if not _chebyshev_tail_clean(v, basis, spec.N):
            continue
        if q is not None and basis.Q_max > 0 and abs(q) == basis.Q_max:
            edge_flag = True
            continue
        kept.append((z, q, res))

    kept.sort(key=lambda t: (-t[0].real, t[0].imag))
    raw = tuple(z for z, _q, _r in kept)

    # reduce modulo i into 0 <= Im < 1 and cluster
    clusters: list[list[tuple[complex, int | None, float]]] = []
    for z, q, res in kept:
        lam = complex(z.real, z.imag - math.floor(z.imag))
        placed = False
        for cl in clusters:
            if _strip_distance(cl[0][0], lam) <= max(1e-5, 10 * persist_tol):
                cl.append((z, q, res))
                placed = True
                break
        if not placed:
            clusters.append([(z, q, res)])

    poles = []
    reps = []
    for cl in clusters:
        # interior-most member (smallest |Im|) anchors the loop integral
        src, q, res = min(cl, key=lambda t: abs(t[0].imag))
        lam = complex(src.real, src.imag - math.floor(src.imag))
        if abs(lam.imag) < 1e-12:
            lam = complex(lam.real, 0.0)
        reps.append((lam, src, q, min(r for _z, _q, r in cl)))

    # pairwise strip distances fix the loop radii
    for lam, src, q, res in reps:
        others = [o for o, _s, _q2, _r2 in reps if o != lam]
        radius = _loop_radius(lam, others)
        order, rank = 1, 0
        if compute_projections:
            projs = _projection_family(spec, basis, src, radius, contour_nodes)
            order = projs["order"]
            rank = projs["rank"]
        poles.append(Pole(lam=lam, order=order, rank=rank, residual=res, source=src, mode=q))

    poles.sort(key=lambda p: (-p.lam.real, p.lam.imag))
    pole_res = [p.lam.real for p in poles]
    z_ss = max(pole_res, default=-np.inf)
    z_sss = max((r for r in pole_res if r < 0), default=-np.inf)
    nonneg = tuple(p for p in poles if p.lam.real >= 0)
    return PoleSet(
        poles=tuple(poles), window=(re_min, re_max), z_star_star=z_ss,
        z_star_star_star=z_sss, nonneg=nonneg, raw_eigenvalues=raw, edge_flag=edge_flag,
    )


def _strip_distance(a: complex, b: complex) -> float:
    """Distance on the cylinder C / (z ~ z + i)."""
    d_im = abs(a.imag - b.imag) % 1.0
    d_im = min(d_im, 1.0 - d_im)
    return math.hypot(a.real - b.real, d_im)


def _loop_radius(lam: complex, others: list[complex]) -> float:
    if not others:
        return 0.2
    dist = min(_strip_distance(lam, o) for o in others)
    return min(0.2, 0.5 * dist)


# ---------------------------------------------------------------------------
# loop-integral projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionMatrix:
    lam: complex
    ell: int
    matrix: np.ndarray
    contour: dict = field(default_factory=dict)


def _loop_nodes(center: complex, radius: float, n_nodes: int):
    theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
    return center + radius * np.exp(1j * theta), np.exp(1j * theta)


def _resolvents_on_loop(spec: OperatorSpec, basis: SpectralBasis, center: complex,
                        radius: float, n_nodes: int) -> list[np.ndarray]:
    parts = mode_operator_parts(spec, basis) if spec.x0_independent() else None
    return [
        resolvent_matrix_for(spec, basis, z, parts=parts)
        for z in _loop_nodes(center, radius, n_nodes)[0]
    ]


def _loop_projection(resolvents: list[np.ndarray], phases: np.ndarray,
                     radius: float, ell: int) -> np.ndarray:
    """Trapezoid rule for (2*pi*i)^{-1} x loop integral of (z-center)^l D_z^{-1}."""
    n = len(resolvents)
    out = np.zeros_like(resolvents[0])
    for r_mat, ph in zip(resolvents, phases):
        out += r_mat * ph ** (ell + 1)
    return out * (radius ** (ell + 1) / n)


def _projection_family(spec: OperatorSpec, basis: SpectralBasis, center: complex,
                       radius: float, n_nodes: int) -> dict:
    """All loop projections at one pole, its order, and the rank of P A^0."""
    resolvents = _resolvents_on_loop(spec, basis, center, radius, n_nodes)
    phases = _loop_nodes(center, radius, n_nodes)[1]
    a0 = multiplier_matrix(spec, basis)
    mats = []
    p0 = _loop_projection(resolvents, phases, radius, 0)
    mats.append(p0)
    scale = np.linalg.norm(p0)
    order = None
    ell = 1
    while order is None and ell <= 8:
        p = _loop_projection(resolvents, phases, radius, ell)
        if np.linalg.norm(p) <= ORDER_TOL * scale:
            order = ell
        else:
            mats.append(p)
            ell += 1
    if order is None:
        order = ell
    sv = np.linalg.svd(p0 @ a0, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * max(sv[0], 1e-300)))
    return {"matrices": mats, "order": order, "rank": rank, "radius": radius}


def spectral_projection(spec: OperatorSpec, basis: SpectralBasis, lam: complex, ell: int,
                        *, pole_set: PoleSet | None = None, radius: float | None = None,
                        n_nodes: int = 32) -> ProjectionMatrix:
    """Loop-integral projection (2*pi*i)^{-1} x integral of (z-lam)^l D_z^{-1} about lam."""
    if radius is None:
        others = []
        if pole_set is not None:
            others = [p.lam for p in pole_set.poles if _strip_distance(p.lam, lam) > 1e-8]
        radius = _loop_radius(lam, others)
    if pole_set is not None:
        for p in pole_set.poles:
            d = _strip_distance(p.lam, lam)
            if 1e-8 < d < 2 * radius:
                raise SpecError(
                    f"loop of radius {radius} about {lam} too close to pole {p.lam}"
                )
    resolvents = _resolvents_on_loop(spec, basis, lam, radius, n_nodes)
    phases = _loop_nodes(lam, radius, n_nodes)[1]
    mat = _loop_projection(resolvents, phases, radius, ell)
    return ProjectionMatrix(
        lam=lam, ell=ell, matrix=mat,
        contour={"center": lam, "radius": radius, "nodes": n_nodes},
    )


# ---------------------------------------------------------------------------
# identity and bound checks
# ---------------------------------------------------------------------------


def verify_resolvent_identities(spec: OperatorSpec, basis: SpectralBasis,
                                w: complex, w_prime: complex) -> dict:
    """First resolvent identity and shift-by-i conjugation at the matrix level.

    The conjugation check restricts inputs to interior Fourier modes; the band
    edge cannot support an exact mode shift.
    """
    rw = resolvent_matrix_for(spec, basis, w)
    rwp = resolvent_matrix_for(spec, basis, w_prime)
    a0 = multiplier_matrix(spec, basis)
    lhs = rw - rwp + (w - w_prime) * (rw @ a0 @ rwp)
    scale = max(np.linalg.norm(rw), np.linalg.norm(rwp), 1.0)
    resolvent_err = float(np.linalg.norm(lhs)) / scale

    rwi = resolvent_matrix_for(spec, basis, w + 1j)
    shift = phase_shift_matrix(basis, spec.N, +1)
    shift_inv = phase_shift_matrix(basis, spec.N, -1)
    proj = interior_mode_projector(basis, spec.N, drop=1)
    conj_lhs = (rwi - shift_inv @ rw @ shift) @ proj
    conj_err = float(np.linalg.norm(conj_lhs)) / scale
    return {
        "w": w, "w_prime": w_prime,
        "resolvent_identity_error": resolvent_err,
        "conjugation_error": conj_err,
    }


def singular_value_decay(spec: OperatorSpec, basis: SpectralBasis, z: complex) -> dict:
    """Compactness proxy: quadrature-weighted singular values of the resolvent.

    Reports the singular values of the resolvent orthonormalized against the L2
    quadrature weights, plus its leading singular value restricted to subspaces
    of increasing minimum frequency content (the resolvent damps high
    frequencies, so these shrink).
    """
    inv = resolvent_matrix_for(spec, basis, z)
    weights = basis.w0 * basis.w1[None, :, None] * np.ones((basis.n_time, 1, spec.N))
    root = np.sqrt(weights.reshape(-1))
    weighted = (root[:, None] * inv) / root[None, :]
    sv = np.linalg.svd(weighted, compute_uv=False)

    tail_sv = []
    n_levels = min(basis.Q_max + 1, basis.M // 2)
    for level in range(n_levels):
        proj = _tail_projector(basis, spec.N, min_mode=level, min_degree=2 * level)
        tail_sv.append(float(np.linalg.svd(weighted @ proj, compute_uv=False)[0]))
    return {"singular_values": sv, "tail_leading": np.array(tail_sv)}


def _tail_projector(basis: SpectralBasis, N: int, min_mode: int, min_degree: int) -> np.ndarray:
    """Projector onto grid functions with all content at Fourier mode >= min_mode
    or Chebyshev degree >= min_degree (complement of the low-frequency box)."""
    nt, nx = basis.n_time, basis.n_space
    V = np.exp(1j * np.outer(basis.x0, basis.modes))
    Vinv = V.conj().T / nt
    synth = np.cos(np.arange(nx)[None, :] * (np.pi * np.arange(nx) / basis.M)[:, None])
    analysis = np.linalg.solve(synth, np.eye(nx))
    keep = np.array([
        [1.0 if (abs(q) >= min_mode or k >= min_degree) else 0.0 for k in range(nx)]
        for q in basis.modes
    ])
    left = np.kron(V, synth)
    right = np.kron(Vinv, analysis)
    P = left @ np.diag(keep.reshape(-1)) @ right
    return np.kron(P, np.eye(N)) if N > 1 else P


def triple_norm_bound_check(spec: OperatorSpec, basis: SpectralBasis,
                            samples: int = 100, *, z: complex | None = None,
                            seed: int = 0) -> dict:
    """Sampled check of the graded resolvent bound against random band-limited data.

    For each sample u the bound reads
        |||u|||_0 <= 2 * exp(2 r_1 |Im z|) * (xi + 1/R + |Xi|_0 r_1) * |||D_z u|||_1
    plus truncation slack; the report carries the worst observed ratio.
    """
    from .norms import triple_norm
    from .operator_model import certificate_norm, stability_constants

    consts = stability_constants(spec)
    if spec.weights.r(1) > consts.rho_star * (1 + 1e-12):
        raise SpecError(
            f"r_1 = {spec.weights.r(1)} exceeds the smallness threshold {consts.rho_star}"
        )
    if z is None:
        z = consts.z_star + 0.1
    if z.real < consts.z_star:
        raise SpecError("bound check requires Re z >= z_star")
    xi = spec.certificate.xi
    xi_norm = certificate_norm(spec)
    r1 = spec.weights.r(1)
    const = 2.0 * math.exp(2.0 * r1 * abs(z.imag)) * (xi + 1.0 / consts.R + xi_norm * r1)

    rng = np.random.default_rng(seed)
    asm = assemble_operator(spec, basis, z)
    worst = 0.0
    failures = 0
    for _ in range(samples):
        u = random_band_limited(basis, rng, spec.N)
        lhs = triple_norm(u, 0, spec, basis)
        du = (asm.matrix @ u.reshape(-1)).reshape(u.shape)
        rhs = triple_norm(du, 1, spec, basis)
        slack = lhs.tail_bound + const * rhs.tail_bound + 1e-12
        bound = const * rhs.value + slack
        ratio = lhs.value / bound
        worst = max(worst, ratio)
        if lhs.value > bound:
            failures += 1
    return {
        "constant": const, "z": z, "samples": samples,
        "worst_ratio": worst, "failures": failures, "passed": failures == 0,
    }
