"""First-order operators A^i d_i + B on the periodic cylinder, and their admissibility checks.

The operator acts on functions of (x0, x1, ..., xn) where x0 is 2*pi-periodic and
the spatial coordinates range over the closed unit ball.  Admissibility consists of
four conditions:

  (1) Hermitian coefficients with positive definite A^0,
  (2) outflow at the boundary: A^i w_i >= 0 for the outward normal w,
  (3) a certified positivity condition on the symmetrized coefficient
      derivatives ("deformation" blocks), driven by a constant xi and
      multiplier matrices Xi^i,
  (4) factorially weighted summability of coefficient derivative norms
      against a submultiplicative weight sequence (r_l).

All checks are grid-sampled; coefficients are exact polynomials, so derivative
norms terminate at the coefficient degree and the condition-(4) sums are finite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .polynomial import MatrixPolynomial

TOL_PSD = 1e-10

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["n", "N", "A", "B"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "A": {"type": "array", "items": {"type": "array"}},
        "B": {"type": "array"},
        "certificate": {
            "type": "object",
            "required": ["xi", "Xi"],
            "properties": {
                "xi": {"type": "number", "exclusiveMinimum": 0},
                "Xi": {"type": "array", "items": {"type": "array"}},
            },
        },
        "sequence": {
            "type": "object",
            "properties": {
                "kappa": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "values": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "Lmax": {"type": "integer", "minimum": 1},
            },
        },
        "Q": {"type": "number", "exclusiveMinimum": 0},
    },
}

POLY_ENTRY_SCHEMA = {
    "type": "object",
    "required": ["alpha", "matrix"],
    "properties": {
        "alpha": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "matrix": {"type": "array"},
    },
}


class SpecError(ValueError):
    """Raised when an operator description violates its schema or invariants."""


@dataclass(frozen=True)
class Certificate:
    """Positivity certificate for condition (3): a constant xi and matrices Xi^i."""

    xi: float
    Xi: tuple[MatrixPolynomial, ...]

    def __post_init__(self):
        if not self.xi > 0:
            raise SpecError("certificate constant xi must be positive")


@dataclass(frozen=True)
class WeightSequence:
    """Submultiplicative weights r_0..r_L with r_0 = 1.

    Either geometric (r_l = kappa**l) or an explicit list.  Submultiplicativity
    r_{k+l} <= r_k r_l is validated on all stored indices.
    """

    values: tuple[float, ...]
    kappa: float | None = None

    def __post_init__(self):
        v = self.values
        if not v or abs(v[0] - 1.0) > 1e-14:
            raise SpecError("weight sequence must start with r_0 = 1")
        if any(x < 0 for x in v):
            raise SpecError("weights must be nonnegative")
        L = len(v) - 1
        for k in range(L + 1):
            for l in range(L + 1 - k):
                if v[k + l] > v[k] * v[l] * (1 + 1e-12) + 1e-300:
                    raise SpecError(
                        f"submultiplicativity violated: r_{k + l}={v[k + l]} > "
                        f"r_{k}*r_{l}={v[k] * v[l]}"
                    )

    @classmethod
    def geometric(cls, kappa: float, L_max: int) -> "WeightSequence":
        if not 0 < kappa <= 1:
            raise SpecError("kappa must lie in (0, 1]")
        return cls(tuple(kappa**l for l in range(L_max + 1)), kappa=kappa)

    def r(self, ell: int) -> float:
        if ell < len(self.values):
            return self.values[ell]
        if self.kappa is not None:
            return self.kappa**ell
        return 0.0

    def rescaled(self, kappa: float) -> "WeightSequence":
        return WeightSequence(
            tuple(kappa**l * v for l, v in enumerate(self.values)),
            kappa=None if self.kappa is None else self.kappa * kappa,
        )

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class OperatorSpec:
    """A first-order operator with polynomial coefficients plus its certificate data."""

    n: int
    N: int
    A: tuple[MatrixPolynomial, ...]
    B: MatrixPolynomial
    weights: WeightSequence
    Q: float
    certificate: Certificate | None = None
    L_max: int = 16
    name: str = ""

    def __post_init__(self):
        if len(self.A) != self.n + 1:
            raise SpecError(f"need {self.n + 1} coefficient matrices A^0..A^{self.n}")
        shape = (self.N, self.N)
        for i, a in enumerate(self.A):
            if a.shape != shape or a.n_vars != self.n + 1:
                raise SpecError(f"A^{i} has wrong shape or variable count")
        if self.B.shape != shape or self.B.n_vars != self.n + 1:
            raise SpecError("B has wrong shape or variable count")
        if self.certificate is not None:
            for x in self.certificate.Xi:
                if x.shape != shape or x.n_vars != self.n + 1:
                    raise SpecError("certificate matrices have wrong shape")
            if len(self.certificate.Xi) != self.n + 1:
                raise SpecError(f"need {self.n + 1} certificate matrices")
        if not self.Q > 0:
            raise SpecError("Q must be positive")

    @property
    def A0(self) -> MatrixPolynomial:
        return self.A[0]

    def x0_independent(self) -> bool:
        polys = list(self.A) + [self.B]
        return all(p.var_degree(0) == 0 for p in polys)

    def shifted(self, const: complex, name: str = "") -> "OperatorSpec":
        """Same operator with B replaced by B + const * identity."""
        bump = MatrixPolynomial.constant(const * np.eye(self.N), self.n + 1)
        return OperatorSpec(
            self.n, self.N, self.A, self.B + bump, self.weights, self.Q,
            certificate=self.certificate, L_max=self.L_max, name=name or self.name,
        )


@dataclass(frozen=True)
class StabilityConstants:
    """Energy threshold z_star, coercivity constant R, smallness threshold rho_star."""

    z_star: float
    R: float
    rho_star: float
    q_effective: float


@dataclass
class CheckResult:
    status: str  # "pass" | "fail" | "unverifiable"
    witnesses: list[dict] = field(default_factory=list)
    detail: str = ""


@dataclass
class AssumptionReport:
    spec_name: str
    checks: dict[str, CheckResult]
    norm_table: dict[str, list[float]]

    @property
    def all_pass(self) -> bool:
        return all(c.status == "pass" for c in self.checks.values())

    @property
    def any_fail(self) -> bool:
        return any(c.status == "fail" for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if c.status == "fail"]

    def to_json(self) -> dict:
        return {
            "spec": self.spec_name,
            "checks": {
                k: {"status": c.status, "witnesses": c.witnesses, "detail": c.detail}
                for k, c in self.checks.items()
            },
            "norm_table": self.norm_table,
        }

    def pretty(self) -> str:
        lines = [f"assumption report for {self.spec_name or '(unnamed)'}"]
        for k, c in self.checks.items():
            lines.append(f"  ({k}): {c.status}" + (f"  [{c.detail}]" if c.detail else ""))
            for w in c.witnesses[:3]:
                lines.append(f"      witness {w}")
        ks = range(len(self.norm_table["A"]))
        lines.append("  derivative norms (k: |A|_k, |B|_k, |A0|_k):")
        for k in ks:
            lines.append(
                f"      {k}: {self.norm_table['A'][k]:.6g}, "
                f"{self.norm_table['B'][k]:.6g}, {self.norm_table['A0'][k]:.6g}"
            )
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# sample grids
# ---------------------------------------------------------------------------


def _interior_points(n: int, density: int) -> np.ndarray:
    """Deterministic sample points of the solid cylinder, including extreme slices."""
    t = np.linspace(0.0, 2 * np.pi, max(4, min(density, 16)), endpoint=False)
    if n == 1:
        x = np.unique(np.concatenate([np.linspace(-1.0, 1.0, density), [-1.0, 0.0, 1.0]]))
        pts = [(ti, xi) for ti in t for xi in x]
        return np.array(pts)
    per_axis = max(4, density if n == 1 else min(density, 12))
    axes = [np.linspace(-1.0, 1.0, per_axis) for _ in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    flat = flat[np.sum(flat**2, axis=1) <= 1.0 + 1e-12]
    pts = [(ti, *xs) for ti in t for xs in flat]
    return np.array(pts)


def _boundary_points(n: int, density: int) -> tuple[np.ndarray, np.ndarray]:
    """Boundary samples and their outward normals (0, x1, ..., xn)."""
    t = np.linspace(0.0, 2 * np.pi, max(4, min(density, 16)), endpoint=False)
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        ang = np.linspace(0.0, 2 * np.pi, 4 * density, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        # golden-spiral points on S^2; for n > 3 fall back to a seeded sphere sample
        m = max(32, 8 * density)
        if n == 3:
            k = np.arange(m) + 0.5
            phi = np.arccos(1 - 2 * k / m)
            theta = np.pi * (1 + 5**0.5) * k
            dirs = np.stack(
                [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
                axis=1,
            )
        else:
            rng = np.random.default_rng(0)
            dirs = rng.standard_normal((m, n))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts, normals = [], []
    for ti in t:
        for d in dirs:
            pts.append((ti, *d))
            normals.append((0.0, *d))
    return np.array(pts), np.array(normals)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def eval_coefficients(spec: OperatorSpec, point) -> tuple[list[np.ndarray], np.ndarray]:
    """Evaluate (A^0..A^n, B) at a point of the cylinder.

    The time coordinate is reduced modulo 2*pi; the spatial part must lie in the
    closed unit ball.
    """
    pt = np.asarray(point, dtype=float)
    if pt.shape != (spec.n + 1,):
        raise SpecError(f"point needs {spec.n + 1} coordinates")
    r2 = float(np.sum(pt[1:] ** 2))
    if r2 > 1.0 + 1e-12:
        raise SpecError(f"point outside domain: |x_spatial| = {math.sqrt(r2):.6g} > 1")
    pt = pt.copy()
    pt[0] = pt[0] % (2 * np.pi)
    return [a(pt) for a in spec.A], spec.B(pt)


def derivative_norms(spec: OperatorSpec, k: int, density: int = 64) -> tuple[float, float, float]:
    """Supremum norms (|A|_k, |B|_k, |A0|_k) of the order-k weighted derivative maps.

    The order-k map stacks sqrt(k!/alpha!) * d^alpha applied to the coefficients
    into one block row; the norm is the largest singular value, maximized over a
    sample grid (exact for affine coefficients since the grid contains the domain
    corners).
    """
    from .norms import multi_indices

    if k < 0:
        raise SpecError("derivative order must be nonnegative")
    pts = _interior_points(spec.n, density)
    table = multi_indices(spec.n + 1, k)

    def sup_norm(polys: list[MatrixPolynomial], stack_over_i: bool) -> float:
        blocks = []
        for alpha, weight in zip(table.indices, table.weights):
            w = math.sqrt(weight)
            if stack_over_i:
                blocks.extend(w * p.derivative_multi(alpha) for p in polys)
            else:
                blocks.append(w * polys[0].derivative_multi(alpha))
        if all(b.is_zero for b in blocks):
            return 0.0
        best = 0.0
        for pt in pts:
            row = np.hstack([b(pt) for b in blocks])
            best = max(best, float(np.linalg.norm(row, 2)))
        return best

    norm_a = sup_norm(list(spec.A), stack_over_i=True)
    norm_b = sup_norm([spec.B], stack_over_i=False)
    norm_a0 = sup_norm([spec.A0], stack_over_i=False)
    return norm_a, norm_b, norm_a0


def _summability_sums(spec: OperatorSpec, norms: dict[str, list[float]], K: int) -> dict[str, float]:
    """The three condition-(4) sums at truncation index K (finite: norms vanish past the degree)."""
    n = spec.n
    r = spec.weights.r
    k_max = len(norms["A"]) - 1
    a_sum = sum(
        (k + 1) ** (n / 2) * r(k - 1) * norms["A"][k] / math.factorial(k)
        for k in range(K + 1, k_max + 1)
    )
    b_sum = sum(
        (k + 1) ** (n / 2) * r(k) * norms["B"][k] / math.factorial(k)
        for k in range(K, k_max + 1)
    )
    a0_sum = sum(
        (k + 1) ** (n / 2) * r(k) * norms["A0"][k] / math.factorial(k)
        for k in range(K, k_max + 1)
    )
    return {"A": a_sum, "B": b_sum, "A0": a0_sum}


def _norm_table(spec: OperatorSpec, density: int) -> dict[str, list[float]]:
    k_max = max(p.degree for p in list(spec.A) + [spec.B]) + 1
    table: dict[str, list[float]] = {"A": [], "B": [], "A0": []}
    for k in range(k_max + 1):
        na, nb, na0 = derivative_norms(spec, k, density=density)
        table["A"].append(na)
        table["B"].append(nb)
        table["A0"].append(na0)
    return table


def check_assumptions(spec: OperatorSpec, sample_density: int = 64) -> AssumptionReport:
    """Verify admissibility conditions (1)-(4) on sample grids.

    Condition (4) is certified through the z-free sufficient split: bounding the
    B-part and the A^0-part separately implies the required bound for B + z*A^0
    at every z via the triangle inequality.
    """
    checks: dict[str, CheckResult] = {}

    # (1) Hermitian coefficients, positive definite A^0
    witnesses = []
    herm_ok = all(a.is_hermitian(tol=1e-14) for a in spec.A)
    min_eig_a0 = np.inf
    for pt in _interior_points(spec.n, sample_density):
        ev = float(np.linalg.eigvalsh(spec.A0(pt)).min())
        if ev < min_eig_a0:
            min_eig_a0 = ev
            worst_pt = pt
    if not herm_ok:
        witnesses.append({"reason": "non-Hermitian coefficient matrix"})
    if min_eig_a0 <= TOL_PSD:
        witnesses.append({"point": list(worst_pt), "min_eig": min_eig_a0})
    checks["i"] = CheckResult(
        "pass" if herm_ok and min_eig_a0 > TOL_PSD else "fail",
        witnesses,
        f"min eig A0 = {min_eig_a0:.6g}",
    )

    # (2) outflow: A^i w_i psd along the boundary
    witnesses = []
    worst = np.inf
    pts, normals = _boundary_points(spec.n, sample_density)
    for pt, w in zip(pts, normals):
        mat = sum(wi * a(pt) for wi, a in zip(w, spec.A) if wi != 0.0)
        mat = np.atleast_2d(mat) if not isinstance(mat, np.ndarray) else mat
        ev = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)).min())
        if ev < worst:
            worst, worst_pt = ev, (pt, w, ev)
    if worst < -TOL_PSD:
        witnesses.append({
            "point": list(worst_pt[0]), "normal": list(worst_pt[1]), "min_eig": worst_pt[2],
        })
    checks["ii"] = CheckResult(
        "pass" if worst >= -TOL_PSD else "fail", witnesses, f"min eig A.w = {worst:.6g}"
    )

    # (3) certified deformation positivity
    if spec.certificate is None:
        checks["iii"] = CheckResult("unverifiable", [], "no certificate supplied")
    else:
        M = _certificate_blocks(spec)
        worst = np.inf
        witnesses = []
        for pt in _interior_points(spec.n, sample_density):
            big = np.block([[blk(pt) for blk in row] for row in M])
            big = 0.5 * (big + big.conj().T)
            ev = float(np.linalg.eigvalsh(big).min())
            if ev < worst:
                worst, worst_pt = ev, pt
        if worst < 1.0 - TOL_PSD:
            witnesses.append({"point": list(worst_pt), "min_eig": worst})
        checks["iii"] = CheckResult(
            "pass" if worst >= 1.0 - TOL_PSD else "fail",
            witnesses,
            f"min eig of certificate form = {worst:.6g} (need >= 1)",
        )

    # (4) weighted summability via the z-free split
    table = _norm_table(spec, sample_density)
    witnesses = []
    ok = True
    for K in (0, 1):
        sums = _summability_sums(spec, table, K)
        rK = spec.weights.r(K)
        for key, s in sums.items():
            if s > spec.Q * rK * (1 + 1e-12):
                ok = False
                witnesses.append({"K": K, "part": key, "sum": s, "bound": spec.Q * rK})
    checks["iv"] = CheckResult("pass" if ok else "fail", witnesses)

    return AssumptionReport(spec.name, checks, table)


def _certificate_blocks(spec: OperatorSpec) -> list[list[MatrixPolynomial]]:
    """Blocks xi*A^{ij} + (A^i Xi^j + (Xi^i)^† A^j)/2 of the certified quadratic form."""
    cert = spec.certificate
    n1 = spec.n + 1
    blocks = []
    for i in range(n1):
        row = []
        for j in range(n1):
            a_ij = 0.5 * (spec.A[j].derivative(i) + spec.A[i].derivative(j))
            m = cert.xi * a_ij \
                + 0.5 * (spec.A[i] @ cert.Xi[j]) \
                + 0.5 * (cert.Xi[i].adjoint() @ spec.A[j])
            row.append(m)
        blocks.append(row)
    return blocks


def certificate_norm(spec: OperatorSpec, density: int = 64) -> float:
    """Sup over the domain of the stacked-row norm of the certificate matrices."""
    if spec.certificate is None:
        raise SpecError("no certificate")
    best = 0.0
    for pt in _interior_points(spec.n, density):
        row = np.hstack([x(pt) for x in spec.certificate.Xi])
        best = max(best, float(np.linalg.norm(row, 2)))
    return best


def q_effective(spec: OperatorSpec, density: int = 64) -> float:
    """Smallest Q for which the condition-(4) split holds for this operator."""
    table = _norm_table(spec, density)
    best = 0.0
    for K in (0, 1):
        rK = spec.weights.r(K)
        if rK == 0:
            continue
        sums = _summability_sums(spec, table, K)
        best = max(best, max(sums.values()) / rK)
    return best


def stability_constants(spec: OperatorSpec, density: int = 64,
                        s_span: float = 50.0, s_samples: int = 200) -> StabilityConstants:
    """Compute the energy threshold z_star, coercivity R, and smallness threshold rho_star.

    With K_z = (-(d_i A^i) + B + B^†)/2 + Re(z) A^0, z_star is the smallest shift
    for which K_z >= A^0/2 everywhere (largest generalized eigenvalue of the
    pencil (A^0/2 - K_0, A^0) over the grid), and R is the infimum over
    Re z >= z_star of min-eig(K_z)/(1 + |Re z|).
    """
    if spec.certificate is None:
        raise SpecError("stability constants require a certificate")
    div_a = spec.A[0].derivative(0)
    for i in range(1, spec.n + 1):
        div_a = div_a + spec.A[i].derivative(i)
    k0_poly = 0.5 * ((-1.0) * div_a + spec.B + spec.B.adjoint())

    pts = _interior_points(spec.n, density)
    from scipy.linalg import eigh

    z_star = -np.inf
    k0_vals, a0_vals = [], []
    for pt in pts:
        k0 = k0_poly(pt)
        a0 = spec.A0(pt)
        k0 = 0.5 * (k0 + k0.conj().T)
        k0_vals.append(k0)
        a0_vals.append(a0)
        # smallest s with k0 + s*a0 - a0/2 >= 0
        lam = eigh(0.5 * a0 - k0, a0, eigvals_only=True)
        z_star = max(z_star, float(lam.max()))

    def min_ratio(s: float) -> float:
        worst = np.inf
        for k0, a0 in zip(k0_vals, a0_vals):
            ev = float(np.linalg.eigvalsh(k0 + s * a0).min())
            worst = min(worst, ev / (1.0 + abs(s)))
        return worst

    s_grid = np.concatenate([[z_star], z_star + np.linspace(0.0, s_span, s_samples)[1:]])
    R = min(min_ratio(float(s)) for s in s_grid)
    # ratio tends to min-eig(A0) as s -> +infinity
    a0_floor = min(float(np.linalg.eigvalsh(a0).min()) for a0 in a0_vals)
    R = min(R, a0_floor)
    if R <= 0:
        raise SpecError("coercivity constant R is nonpositive; conditions (1)-(3) violated?")

    xi = spec.certificate.xi
    xi_norm = certificate_norm(spec, density)
    rho_star = 0.5 / (spec.Q * (xi + 3.0 / R + xi_norm + 2.0 * xi_norm / (R * xi)))
    return StabilityConstants(z_star=z_star, R=R, rho_star=rho_star,
                              q_effective=q_effective(spec, density))


def search_certificate(spec: OperatorSpec, xi: float, target: float = 2.0,
                       density: int = 16) -> Certificate:
    """Least-squares search for constant multiplier matrices; convenience, no guarantee.

    Fits constant Xi^i so that the certificate blocks approximate target*identity
    on the diagonal and zero off the diagonal, in Frobenius norm over a sample
    grid.  The result must still be validated by check_assumptions.
    """
    n1, N = spec.n + 1, spec.N
    pts = _interior_points(spec.n, density)
    n_unknown = n1 * N * N
    rows, rhs = [], []
    for pt in pts:
        a_vals = [a(pt) for a in spec.A]
        for i in range(n1):
            for j in range(n1):
                a_ij = 0.5 * (spec.A[j].derivative(i) + spec.A[i].derivative(j))(pt)
                base = xi * a_ij - (target if i == j else 0.0) * np.eye(N)
                # entry (r, c) of block (i, j) is linear in Xi^j and Xi^i
                for r in range(N):
                    for c in range(N):
                        row = np.zeros(n_unknown, dtype=complex)
                        for k in range(N):
                            row[(j * N + k) * N + c] += 0.5 * a_vals[i][r, k]
                            # (Xi^i)^† A^j term: conj(Xi^i[k, r]) * A^j[k, c]
                            row[(i * N + k) * N + r] += 0.5 * np.conj(a_vals[j][k, c])
                        rows.append(row)
                        rhs.append(-base[r, c])
    # solve in real arithmetic, treating conjugated unknowns as real pairs
    A_mat = np.array(rows)
    b_vec = np.array(rhs)
    big = np.block([[A_mat.real, -A_mat.imag], [A_mat.imag, A_mat.real]])
    sol, *_ = np.linalg.lstsq(big, np.concatenate([b_vec.real, b_vec.imag]), rcond=None)
    x = sol[:n_unknown] + 1j * sol[n_unknown:]
    Xi = tuple(
        MatrixPolynomial.constant(x[i * N * N:(i + 1) * N * N].reshape(N, N), n1)
        for i in range(n1)
    )
    return Certificate(xi=xi, Xi=Xi)


# ---------------------------------------------------------------------------
# configuration loading and built-in fixtures
# ---------------------------------------------------------------------------


def load_spec(config) -> OperatorSpec:
    """Build a validated OperatorSpec from a config document, path, or fixture name."""
    if isinstance(config, str):
        if config in FIXTURE_NAMES:
            return fixture(config)
        with open(config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    return _spec_from_document(config)


def _spec_from_document(doc: dict) -> OperatorSpec:
    import jsonschema

    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
        for poly_doc in list(doc["A"]) + [doc["B"]]:
            for entry in poly_doc:
                jsonschema.validate(entry, POLY_ENTRY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SpecError(f"config schema violation: {exc.message}") from exc

    n, N = int(doc["n"]), int(doc["N"])
    if len(doc["A"]) != n + 1:
        raise SpecError(f"expected {n + 1} entries in A, got {len(doc['A'])}")
    shape = (N, N)
    try:
        A = tuple(MatrixPolynomial.from_json(p, n + 1, shape) for p in doc["A"])
        B = MatrixPolynomial.from_json(doc["B"], n + 1, shape)
    except ValueError as exc:
        raise SpecError(str(exc)) from exc

    cert = None
    if "certificate" in doc:
        c = doc["certificate"]
        Xi = tuple(MatrixPolynomial.from_json(p, n + 1, shape) for p in c["Xi"])
        if len(Xi) != n + 1:
            raise SpecError(f"expected {n + 1} certificate matrices")
        cert = Certificate(xi=float(c["xi"]), Xi=Xi)

    seq = doc.get("sequence", {})
    L_max = int(seq.get("Lmax", 16))
    if "values" in seq:
        weights = WeightSequence(tuple(float(v) for v in seq["values"]))
    else:
        weights = WeightSequence.geometric(float(seq.get("kappa", 0.5)), L_max)

    return OperatorSpec(
        n=n, N=N, A=A, B=B, weights=weights, Q=float(doc.get("Q", 1.0)),
        certificate=cert, L_max=L_max, name=str(doc.get("name", "")),
    )


def _scalar_affine_operator(mu: float, x_star: float, kappa: float, name: str,
                            shift: float = 0.0, Q: float = 1.0) -> OperatorSpec:
    """d_0 + mu*(x1 - x_star)*d_1 + shift in one spatial dimension."""
    one = MatrixPolynomial.constant([[1.0]], 2)
    a1 = MatrixPolynomial(2, (1, 1), {(0, 1): [[mu]], (0, 0): [[-mu * x_star]]})
    b = MatrixPolynomial.constant([[shift]], 2)
    cert = Certificate(
        xi=6.0,
        Xi=(MatrixPolynomial.constant([[2.0]], 2), MatrixPolynomial.zero(2, (1, 1))),
    )
    return OperatorSpec(
        n=1, N=1, A=(one, a1), B=b, weights=WeightSequence.geometric(kappa, 16),
        Q=Q, certificate=cert, name=name,
    )


def _spinor_scaling_operator(mu: float, kappa: float, name: str) -> OperatorSpec:
    """The 2-component operator in three spatial dimensions with a scaling drift."""
    n1 = 4
    eye2 = np.eye(2)
    pauli = [
        np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
        np.array([[0.0, 1j], [-1j, 0.0]], dtype=complex),
        np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    ]
    A = [MatrixPolynomial.constant(eye2, n1)]
    for i in range(1, 4):
        alpha_lin = tuple(1 if v == i else 0 for v in range(n1))
        A.append(MatrixPolynomial(n1, (2, 2), {
            (0, 0, 0, 0): mu * pauli[i - 1],
            alpha_lin: mu * eye2,
        }))
    B = MatrixPolynomial.zero(n1, (2, 2))
    cert = Certificate(
        xi=10.0,
        Xi=(MatrixPolynomial.constant(2.0 * eye2, n1),) +
           tuple(MatrixPolynomial.zero(n1, (2, 2)) for _ in range(3)),
    )
    return OperatorSpec(
        n=3, N=2, A=tuple(A), B=B, weights=WeightSequence.geometric(kappa, 16),
        Q=2.5, certificate=cert, name=name,
    )


FIXTURE_NAMES = ("EX1", "EX1S", "EX2", "CE-BDY", "CE-FLAT")


def fixture(name: str) -> OperatorSpec:
    """Built-in operators used throughout the test and acceptance suites.

    EX1     scalar drift d_0 + 0.5*x1*d_1 (all conditions hold)
    EX1S    EX1 shifted by -0.75 (two nonnegative strip poles)
    EX2     2-component scaling operator in three spatial dimensions
    CE-BDY  EX1 recentered so the drift points inward at x1 = -1 (violates (2))
    CE-FLAT pure time derivative (violates (3); infinite multiplicities)
    """
    if name == "EX1":
        return _scalar_affine_operator(0.5, 0.0, kappa=0.024, name="EX1")
    if name == "EX1S":
        return _scalar_affine_operator(0.5, 0.0, kappa=0.024, name="EX1S", shift=-0.75)
    if name == "EX2":
        return _spinor_scaling_operator(0.5, kappa=0.01, name="EX2")
    if name == "CE-BDY":
        return _scalar_affine_operator(0.5, -1.5, kappa=0.024, name="CE-BDY")
    if name == "CE-FLAT":
        one = MatrixPolynomial.constant([[1.0]], 2)
        zero = MatrixPolynomial.zero(2, (1, 1))
        cert = Certificate(xi=6.0, Xi=(MatrixPolynomial.constant([[2.0]], 2), zero))
        return OperatorSpec(
            n=1, N=1, A=(one, zero), B=zero,
            weights=WeightSequence.geometric(0.024, 16), Q=1.0,
            certificate=cert, name="CE-FLAT",
        )
    raise SpecError(f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}")


def spec_to_json(spec: OperatorSpec) -> dict:
    doc = {
        "name": spec.name,
        "n": spec.n,
        "N": spec.N,
        "A": [a.to_json() for a in spec.A],
        "B": spec.B.to_json(),
        "Q": spec.Q,
        "sequence": {"values": list(spec.weights.values), "Lmax": spec.L_max},
    }
    if spec.weights.kappa is not None:
        doc["sequence"] = {"kappa": spec.weights.kappa, "Lmax": spec.L_max}
    if spec.certificate is not None:
        doc["certificate"] = {
            "xi": spec.certificate.xi,
            "Xi": [x.to_json() for x in spec.certificate.Xi],
        }
    return doc
