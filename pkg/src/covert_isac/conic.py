"""Solver-agnostic conic programs over real symmetric cones.

A ConicProgram holds typed decision blocks (real symmetric PSD matrices,
complex Hermitian PSD matrices, nonnegative scalars, free scalars), a linear
objective, scalar affine equality/inequality constraints, and LMI constraints
given as affine maps into PSD cones.  Complex Hermitian data is embedded into
real symmetric cones with hermitian_to_real, so any real conic backend can
serve; the reference backend is Clarabel's interior-point solver.

One extension beyond the affine/LMI vocabulary: log hypographs t <= ln(f(x))
with f affine, lowered to exponential cones.  These host the concave log
terms of rate objectives exactly, the same way general-purpose modeling
systems solve mixed SDP/log programs.

Internal coordinates
--------------------
Real symmetric blocks are stored in scaled-triangle (svec) coordinates and
Hermitian blocks in an orthonormal real basis (diagonal, then sqrt(2)-scaled
real and imaginary lower-triangle parts), so Frobenius inner products equal
Euclidean dot products of the coordinate vectors.

Debug dump
----------
``ConicProgram.dump(path)`` writes the program in a sparse-triplet text
format: one record per line, whitespace-separated.

    objective {minimize|maximize}
    obj <block> <dof> <value>            linear objective coefficients
    objconst <value>
    eq <i> <block> <dof> <value>         i-th equality: sum + const == 0
    eqconst <i> <value>
    ineq <i> <block> <dof> <value>       i-th inequality: sum + const <= 0
    ineqconst <i> <value>
    lmi <i> <dim> {real|complex}
    lmiterm <i> <block> <dof> <row> <col> <re> <im>
    lmiconst <i> <row> <col> <re> <im>
    loghypo <i> <t-block> <block> <dof> <value>   t <= ln(sum + const)
    loghypoconst <i> <value>

Rows/cols index the (complex) LMI matrix before real embedding.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

SQRT2 = float(np.sqrt(2.0))

_STATUS_OPTIMAL = "optimal"
_STATUS_INFEASIBLE = "infeasible"
_STATUS_UNBOUNDED = "unbounded"
_STATUS_MAX_ITERATIONS = "max_iterations"
_STATUS_NUMERICAL_ERROR = "numerical_error"


def hermitian_to_real(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, -Im H], [Im H, Re H]] of Hermitian H.

    H >= 0 iff the embedding >= 0; every eigenvalue of H appears twice.
    """
    h = np.asarray(h)
    scale = np.linalg.norm(h)
    if np.linalg.norm(h - h.conj().T) > 1e-12 * max(scale, 1.0):
        raise ValueError("input matrix is not Hermitian")
    re, im = np.real(h), np.imag(h)
    return np.block([[re, -im], [im, re]])


def real_to_hermitian(s: np.ndarray) -> np.ndarray:
    """Inverse of hermitian_to_real, averaging the redundant blocks."""
    n2 = s.shape[0]
    if n2 % 2:
        raise ValueError("embedded matrix must have even dimension")
    n = n2 // 2
    re = 0.5 * (s[:n, :n] + s[n:, n:])
    im = 0.5 * (s[n:, :n] - s[:n, n:])
    h = re + 1j * im
    return 0.5 * (h + h.conj().T)


def _tri_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower-triangle (i >= j) pairs in row-major order.

    For symmetric matrices this value sequence equals the upper-triangle
    column-major scan, which is the backend's scaled-triangle convention.
    """
    return np.tril_indices(n)


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled lower-triangle vectorization; preserves Frobenius inner products."""
    n = m.shape[0]
    r, c = _tri_indices(n)
    out = np.asarray(m)[r, c].astype(float).copy()
    out[r != c] *= SQRT2
    return out


def smat(x: np.ndarray, n: int) -> np.ndarray:
    """Inverse of svec."""
    r, c = _tri_indices(n)
    vals = np.asarray(x, dtype=float).copy()
    vals[r != c] /= SQRT2
    m = np.zeros((n, n))
    m[r, c] = vals
    m[c, r] = vals
    return m


@dataclass
class _Block:
    name: str
    kind: str  # "psd" | "hermitian" | "hermitian_free" | "nonneg" | "free"
    dim: int
    offset: int

    @property
    def n_dofs(self) -> int:
        if self.kind == "psd":
            return self.dim * (self.dim + 1) // 2
        if self.kind in ("hermitian", "hermitian_free"):
            return self.dim * self.dim
        return 1


class LinExpr:
    """Real-valued affine functional over decision blocks.

    Matrix-block coefficients C contribute Re tr(C^H X); scalar blocks
    contribute coeff * x.
    """

    def __init__(self, const: float = 0.0):
        self.terms: dict[str, np.ndarray | float] = {}
        self.const = float(const)

    def add_scalar(self, block: str, coeff: float) -> "LinExpr":
        self.terms[block] = self.terms.get(block, 0.0) + float(coeff)
        return self

    def add_matrix(self, block: str, coeff: np.ndarray) -> "LinExpr":
        if block in self.terms:
            self.terms[block] = self.terms[block] + np.asarray(coeff)
        else:
            self.terms[block] = np.asarray(coeff).copy()
        return self

    def evaluate(self, values: dict[str, np.ndarray | float]) -> float:
        total = self.const
        for name, coeff in self.terms.items():
            val = values[name]
            if np.isscalar(coeff):
                total += coeff * float(np.real(val))
            else:
                total += float(np.real(np.trace(np.conj(coeff).T @ val)))
        return total


@dataclass
class CongruenceTerm:
    """Contribution coeff * L X L^H (or L conj(X) L^H) of a matrix block."""

    block: str
    left: np.ndarray
    coeff: float = 1.0
    conjugate: bool = False


@dataclass
class ExprMatrixTerm:
    """Contribution expr(x) * matrix of a scalar affine functional."""

    expr: LinExpr
    matrix: np.ndarray


@dataclass
class Lmi:
    """Affine map into a PSD cone: const + sum(terms) >= 0.

    metadata carries builder-side bookkeeping (e.g. variable rescale factors)
    and is ignored by the solver.
    """

    dim: int
    terms: list
    const: np.ndarray
    metadata: dict | None = None

    def __post_init__(self):
        self.const = np.asarray(self.const, dtype=complex)
        if self.const.shape != (self.dim, self.dim):
            raise ValueError("LMI constant has wrong shape")


@dataclass
class SolveReport:
    """Certified outcome of one conic solve."""

    status: str
    objective: float | None
    blocks: dict[str, np.ndarray | float]
    primal_residual: float
    min_eigenvalue: float
    iterations: int
    solve_time: float


# cached per-dimension maps: hermitian dofs -> svec of the PSD embedding
_HERMITIAN_PSD_MAPS: dict[int, np.ndarray] = {}


def _hermitian_basis_tensor(n: int) -> np.ndarray:
    """Orthonormal Hermitian basis stacked as a (n*n, n, n) complex tensor.

    Ordering: n diagonal matrices, then the sqrt(2)-scaled real and imaginary
    parts of each strict lower-triangle position in column-major order.
    """
    r, c = _tri_indices(n)
    strict = r != c
    rs, cs = r[strict], c[strict]
    n_off = len(rs)
    basis = np.zeros((n * n, n, n), dtype=complex)
    for i in range(n):
        basis[i, i, i] = 1.0
    for k, (i, j) in enumerate(zip(rs, cs)):
        basis[n + k, i, j] = 1.0 / SQRT2
        basis[n + k, j, i] = 1.0 / SQRT2
        basis[n + n_off + k, i, j] = 1j / SQRT2
        basis[n + n_off + k, j, i] = -1j / SQRT2
    return basis


def hermitian_from_dofs(x: np.ndarray, n: int) -> np.ndarray:
    """Assemble a Hermitian matrix from its real dof vector."""
    r, c = _tri_indices(n)
    strict = r != c
    rs, cs = r[strict], c[strict]
    n_off = len(rs)
    h = np.zeros((n, n), dtype=complex)
    h[np.arange(n), np.arange(n)] = x[:n]
    lower = (x[n : n + n_off] + 1j * x[n + n_off :]) / SQRT2
    h[rs, cs] = lower
    h[cs, rs] = np.conj(lower)
    return h


def hermitian_dofs(h: np.ndarray) -> np.ndarray:
    """Inverse of hermitian_from_dofs."""
    n = h.shape[0]
    r, c = _tri_indices(n)
    strict = r != c
    rs, cs = r[strict], c[strict]
    diag = np.real(np.diagonal(h))
    lower = h[rs, cs] * SQRT2
    return np.concatenate([diag, np.real(lower), np.imag(lower)])


def _embed_tensor(t: np.ndarray) -> np.ndarray:
    """Vectorized hermitian_to_real over the leading axis."""
    re, im = np.real(t), np.imag(t)
    top = np.concatenate([re, -im], axis=2)
    bot = np.concatenate([im, re], axis=2)
    return np.concatenate([top, bot], axis=1)


def _svec_tensor(t: np.ndarray) -> np.ndarray:
    """Vectorized svec over the leading axis of symmetric matrices."""
    n = t.shape[1]
    r, c = _tri_indices(n)
    out = t[:, r, c].copy()
    out[:, r != c] *= SQRT2
    return out


def _hermitian_psd_map(n: int) -> np.ndarray:
    """Map from hermitian dofs to svec of the real embedding (cached)."""
    if n not in _HERMITIAN_PSD_MAPS:
        basis = _hermitian_basis_tensor(n)
        _HERMITIAN_PSD_MAPS[n] = _svec_tensor(_embed_tensor(basis))
    return _HERMITIAN_PSD_MAPS[n]


class ConicProgram:
    """Immutable-once-solved container for one conic optimization instance."""

    def __init__(self, name: str = "program"):
        self.name = name
        self.blocks: dict[str, _Block] = {}
        self._n_dofs = 0
        self.objective_sense = "minimize"
        self.objective = LinExpr()
        self.equalities: list[LinExpr] = []
        self.inequalities: list[LinExpr] = []
        self.lmis: list[Lmi] = []
        self.log_hypographs: list[tuple[str, LinExpr]] = []

    # ---------------- blocks ----------------
    def _add_block(self, name: str, kind: str, dim: int) -> str:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        blk = _Block(name=name, kind=kind, dim=dim, offset=self._n_dofs)
        self.blocks[name] = blk
        self._n_dofs += blk.n_dofs
        return name

    def add_psd_block(self, name: str, dim: int) -> str:
        """Real symmetric dim x dim block constrained PSD."""
        return self._add_block(name, "psd", dim)

    def add_hermitian_block(self, name: str, dim: int, psd: bool = True) -> str:
        """Complex Hermitian dim x dim block, PSD-constrained unless psd=False."""
        return self._add_block(name, "hermitian" if psd else "hermitian_free", dim)

    def add_nonneg_scalar(self, name: str) -> str:
        return self._add_block(name, "nonneg", 1)

    def add_free_scalar(self, name: str) -> str:
        return self._add_block(name, "free", 1)

    # ---------------- constraints ----------------
    def set_objective(self, sense: str, expr: LinExpr) -> None:
        if sense not in ("minimize", "maximize"):
            raise ValueError("sense must be minimize or maximize")
        self.objective_sense = sense
        self.objective = expr

    def add_eq(self, expr: LinExpr) -> None:
        """Constrain expr == 0."""
        self.equalities.append(expr)

    def add_ineq(self, expr: LinExpr) -> None:
        """Constrain expr <= 0."""
        self.inequalities.append(expr)

    def add_lmi(self, lmi: Lmi) -> None:
        for term in lmi.terms:
            if isinstance(term, CongruenceTerm) and term.block not in self.blocks:
                raise ValueError(f"unknown block {term.block!r}")
        self.lmis.append(lmi)

    def add_log_hypograph(self, t_block: str, f_expr: LinExpr) -> None:
        """Constrain t <= ln(f_expr) with t a free scalar block, f affine."""
        if self.blocks[t_block].kind != "free":
            raise ValueError("hypograph variable must be a free scalar")
        self.log_hypographs.append((t_block, f_expr))

    def equate_hermitian(
        self, result: str, combo: list[tuple[str, float]]
    ) -> None:
        """Add dof-wise equalities result == sum(coeff * block)."""
        blk = self.blocks[result]
        for name, _ in combo:
            if self.blocks[name].n_dofs != blk.n_dofs:
                raise ValueError("blocks in a matrix equality must share dimension")
        for d in range(blk.n_dofs):
            self.equalities.append(("__dofeq__", result, combo, d))  # type: ignore

    # ---------------- dof helpers ----------------
    def _expr_row(self, expr: LinExpr) -> tuple[np.ndarray, float]:
        row = np.zeros(self._n_dofs)
        for name, coeff in expr.terms.items():
            blk = self.blocks[name]
            sl = slice(blk.offset, blk.offset + blk.n_dofs)
            if blk.kind in ("nonneg", "free"):
                row[sl] += coeff
            elif blk.kind == "psd":
                c = np.asarray(coeff, dtype=float)
                row[sl] += svec(0.5 * (c + c.T))
            else:
                c = np.asarray(coeff, dtype=complex)
                row[sl] += hermitian_dofs(0.5 * (c + c.conj().T))
        return row, expr.const

    def _lmi_coefficients(self, lmi: Lmi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-dof complex coefficient matrices (columns, dof indices, const)."""
        m = lmi.dim
        cols: list[np.ndarray] = []
        idxs: list[int] = []
        const = lmi.const.astype(complex).copy()

        def accumulate(dof_idx: np.ndarray, tensors: np.ndarray):
            cols.append(tensors)
            idxs.extend(dof_idx.tolist())

        for term in lmi.terms:
            if isinstance(term, CongruenceTerm):
                blk = self.blocks[term.block]
                n = blk.dim
                left = np.asarray(term.left, dtype=complex)
                if left.shape != (m, n):
                    raise ValueError("congruence factor has wrong shape")
                if blk.kind == "psd":
                    basis = _real_sym_basis_tensor(n)
                else:
                    basis = _hermitian_basis_tensor(n)
                    if term.conjugate:
                        basis = np.conj(basis)
                mapped = np.einsum(
                    "ab,dbc,ec->dae", left, basis, np.conj(left), optimize=True
                )
                accumulate(
                    blk.offset + np.arange(blk.n_dofs), term.coeff * mapped
                )
            elif isinstance(term, ExprMatrixTerm):
                row, c0 = self._expr_row(term.expr)
                mat = np.asarray(term.matrix, dtype=complex)
                nz = np.nonzero(row)[0]
                if len(nz):
                    accumulate(nz, row[nz][:, None, None] * mat[None, :, :])
                const += c0 * mat
            else:
                raise TypeError(f"unknown LMI term {term!r}")
        if cols:
            tensor = np.concatenate(cols, axis=0)
        else:
            tensor = np.zeros((0, m, m), dtype=complex)
        return tensor, np.asarray(idxs, dtype=int), const

    # ---------------- lowering + solve ----------------
    def solve(
        self,
        feas_tol: float = 1e-7,
        rel_gap: float = 1e-7,
        max_iter: int = 200,
    ) -> SolveReport:
        import clarabel

        n = self._n_dofs
        a_rows: list[np.ndarray] = []
        a_cols: list[np.ndarray] = []
        a_vals: list[np.ndarray] = []
        b_vals: list[float] = []
        cones = []
        row_ptr = 0

        def push_row(row: np.ndarray, rhs: float):
            nonlocal row_ptr
            nz = np.nonzero(row)[0]
            a_rows.append(np.full(len(nz), row_ptr))
            a_cols.append(nz)
            a_vals.append(row[nz])
            b_vals.append(rhs)
            row_ptr += 1

        # equalities (zero cone): expr == 0  ->  A x + s = -const, s = 0
        n_eq = 0
        for entry in self.equalities:
            if isinstance(entry, tuple):  # dof-wise hermitian equality
                _, result, combo, d = entry
                blk = self.blocks[result]
                row = np.zeros(n)
                row[blk.offset + d] = 1.0
                for other, coeff in combo:
                    oblk = self.blocks[other]
                    row[oblk.offset + d] -= coeff
                push_row(row, 0.0)
            else:
                row, const = self._expr_row(entry)
                push_row(row, -const)
            n_eq += 1
        if n_eq:
            cones.append(clarabel.ZeroConeT(n_eq))

        # inequalities + nonneg scalars (nonnegative cone)
        n_in = 0
        for expr in self.inequalities:
            row, const = self._expr_row(expr)
            push_row(row, -const)  # s = -const - row. x >= 0
            n_in += 1
        for blk in self.blocks.values():
            if blk.kind == "nonneg":
                row = np.zeros(n)
                row[blk.offset] = -1.0
                push_row(row, 0.0)  # s = x >= 0
                n_in += 1
        if n_in:
            cones.append(clarabel.NonnegativeConeT(n_in))

        # PSD cones: block PSD enforcement then explicit LMIs
        psd_cone_rows: list[tuple[int, int, bool]] = []  # (start, matrix dim, embedded)
        for blk in self.blocks.values():
            if blk.kind == "psd":
                dim = blk.dim
                tri = dim * (dim + 1) // 2
                start = row_ptr
                rows = np.arange(row_ptr, row_ptr + tri)
                cols = blk.offset + np.arange(tri)
                a_rows.append(rows)
                a_cols.append(cols)
                a_vals.append(np.full(tri, -1.0))
                b_vals.extend([0.0] * tri)
                row_ptr += tri
                cones.append(clarabel.PSDTriangleConeT(dim))
                psd_cone_rows.append((start, dim, False))
            elif blk.kind == "hermitian":
                dim = 2 * blk.dim
                tri = dim * (dim + 1) // 2
                start = row_ptr
                mapping = _hermitian_psd_map(blk.dim)  # (n_dofs, tri)
                rr, cc = np.nonzero(mapping)
                a_rows.append(row_ptr + cc)
                a_cols.append(blk.offset + rr)
                a_vals.append(-mapping[rr, cc])
                b_vals.extend([0.0] * tri)
                row_ptr += tri
                cones.append(clarabel.PSDTriangleConeT(dim))
                psd_cone_rows.append((start, dim, True))

        for lmi in self.lmis:
            tensor, idxs, const = self._lmi_coefficients(lmi)
            hermitian_err = max(
                (np.abs(tensor - np.conj(np.transpose(tensor, (0, 2, 1)))).max()
                 if len(tensor) else 0.0),
                np.abs(const - const.conj().T).max(),
            )
            if hermitian_err > 1e-9 * max(1.0, np.abs(const).max()):
                raise ValueError("LMI affine map is not Hermitian-valued")
            is_complex = (
                np.abs(np.imag(tensor)).max() if len(tensor) else 0.0
            ) > 0 or np.abs(np.imag(const)).max() > 0
            if is_complex:
                tensor = _embed_tensor(tensor)
                const_m = hermitian_to_real(const)
            else:
                tensor = np.real(tensor)
                const_m = np.real(const)
            dim = const_m.shape[0]
            tri = dim * (dim + 1) // 2
            cols_mat = _svec_tensor(tensor) if len(tensor) else np.zeros((0, tri))
            # s = const + sum(x_d T_d)  ->  A = -cols, b = svec(const)
            rr, cc = np.nonzero(cols_mat)
            a_rows.append(row_ptr + cc)
            a_cols.append(idxs[rr])
            a_vals.append(-cols_mat[rr, cc])
            b_vals.extend(svec(const_m).tolist())
            start = row_ptr
            row_ptr += tri
            cones.append(clarabel.PSDTriangleConeT(dim))
            psd_cone_rows.append((start, dim, bool(is_complex)))

        # exponential cones: s = (t, 1, f) with 1 * exp(t) <= f
        exp_cone_rows: list[int] = []
        for t_name, f_expr in self.log_hypographs:
            t_off = self.blocks[t_name].offset
            row_t = np.zeros(n)
            row_t[t_off] = -1.0  # s1 = t
            start = row_ptr
            push_row(row_t, 0.0)
            push_row(np.zeros(n), 1.0)  # s2 = 1
            f_row, f_const = self._expr_row(f_expr)
            push_row(-f_row, f_const)  # s3 = f(x)
            cones.append(clarabel.ExponentialConeT())
            exp_cone_rows.append(start)

        c_row, c_const = self._expr_row(self.objective)
        sign = 1.0 if self.objective_sense == "minimize" else -1.0
        q = sign * c_row

        a_mat = sparse.csc_matrix(
            (
                np.concatenate(a_vals) if a_vals else np.zeros(0),
                (
                    np.concatenate(a_rows) if a_rows else np.zeros(0, dtype=int),
                    np.concatenate(a_cols) if a_cols else np.zeros(0, dtype=int),
                ),
            ),
            shape=(row_ptr, n),
        )
        b_vec = np.asarray(b_vals)

        def make_settings(equilibrate: bool):
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            settings.max_iter = max_iter
            settings.tol_feas = float(np.clip(0.1 * feas_tol, 1e-9, 1e-6))
            settings.tol_gap_rel = float(np.clip(0.1 * rel_gap, 1e-9, 1e-6))
            settings.tol_gap_abs = 1e-12
            settings.max_threads = 1
            # Ruiz equilibration breaks the symmetry of real-embedded complex
            # cones and stalls the IPM; the builders pre-balance data instead.
            settings.equilibrate_enable = equilibrate
            return settings

        def attempt(equilibrate: bool):
            # the backend can panic (Rust) on degenerate eigen steps; treat
            # that as a numerical failure rather than crashing the run
            try:
                return clarabel.DefaultSolver(
                    sparse.csc_matrix((n, n)), q, a_mat, b_vec, cones,
                    make_settings(equilibrate),
                ).solve()
            except BaseException:
                return None

        t0 = time.perf_counter()
        solution = attempt(False)
        raw_status = (
            str(solution.status).split(".")[-1] if solution is not None else "Panic"
        )
        if raw_status in ("AlmostSolved", "InsufficientProgress", "NumericalError",
                          "Unsolved", "MaxIterations", "Panic"):
            retry = attempt(True)
            if retry is not None and (
                str(retry.status).split(".")[-1] == "Solved"
                or raw_status in ("NumericalError", "Unsolved", "Panic")
            ):
                solution = retry
        elapsed = time.perf_counter() - t0
        if solution is None:
            return SolveReport(
                status=_STATUS_NUMERICAL_ERROR,
                objective=None,
                blocks=self._extract_blocks(np.zeros(n)),
                primal_residual=float("inf"),
                min_eigenvalue=float("-inf"),
                iterations=0,
                solve_time=elapsed,
            )

        status = _map_status(str(solution.status))
        x = np.asarray(solution.x)
        if not np.all(np.isfinite(x)):
            x = np.zeros(n)
        blocks = self._extract_blocks(x)

        # Solved and AlmostSolved are both candidates; we certify optimality
        # ourselves against feas_tol so the report contract holds.
        primal_residual = 0.0
        min_eig = np.inf if psd_cone_rows else 0.0
        if status in (_STATUS_OPTIMAL, _STATUS_NUMERICAL_ERROR) and np.any(x):
            slack = b_vec - a_mat @ x
            if n_eq:
                primal_residual = float(np.abs(slack[:n_eq]).max())
            if n_in:
                viol = -slack[n_eq : n_eq + n_in]
                primal_residual = max(primal_residual, float(np.maximum(viol, 0).max()))
            for start, dim, _ in psd_cone_rows:
                tri = dim * (dim + 1) // 2
                mat = smat(slack[start : start + tri], dim)
                # scale-relative certificate: negative curvature measured
                # against the cone value's own magnitude
                rel = float(np.linalg.eigvalsh(mat)[0]) / max(
                    1.0, float(np.abs(mat).max())
                )
                min_eig = min(min_eig, rel)
            for start in exp_cone_rows:
                t_val, f_val = slack[start], slack[start + 2]
                # hypograph violation measured in the log domain
                viol = t_val - np.log(max(f_val, 1e-300))
                primal_residual = max(primal_residual, float(max(viol, 0.0)))
            gap = abs(solution.obj_val - solution.obj_val_dual) / max(
                1.0, abs(solution.obj_val)
            )
            feasible = primal_residual <= feas_tol and min_eig >= -feas_tol
            if status == _STATUS_OPTIMAL and not feasible:
                status = _STATUS_NUMERICAL_ERROR
            elif (
                status == _STATUS_NUMERICAL_ERROR
                and str(solution.status).split(".")[-1] == "AlmostSolved"
                and feasible
                and gap <= 10 * rel_gap
            ):
                # solver stalled short of its own tolerance but the iterate
                # carries a feasibility + duality-gap certificate
                status = _STATUS_OPTIMAL

        objective = None
        if status == _STATUS_OPTIMAL:
            objective = float(sign * solution.obj_val + c_const)

        return SolveReport(
            status=status,
            objective=objective,
            blocks=blocks,
            primal_residual=primal_residual,
            min_eigenvalue=float(min_eig) if np.isfinite(min_eig) else 0.0,
            iterations=int(solution.iterations),
            solve_time=elapsed,
        )

    def _extract_blocks(self, x: np.ndarray) -> dict[str, np.ndarray | float]:
        out: dict[str, np.ndarray | float] = {}
        for blk in self.blocks.values():
            xs = x[blk.offset : blk.offset + blk.n_dofs]
            if blk.kind in ("nonneg", "free"):
                out[blk.name] = float(xs[0])
            elif blk.kind == "psd":
                out[blk.name] = smat(xs, blk.dim)
            else:
                out[blk.name] = hermitian_from_dofs(xs, blk.dim)
        return out

    # ---------------- debug dump ----------------
    def dump(self, path: str) -> None:
        """Write the program in the documented sparse-triplet text format."""
        lines = [f"program {self.name}", f"objective {self.objective_sense}"]

        def expr_lines(tag: str, expr: LinExpr, idx: int | None = None):
            row, const = self._expr_row(expr)
            prefix = f"{tag} {idx}" if idx is not None else tag
            for name, blk in self.blocks.items():
                for d in range(blk.n_dofs):
                    v = row[blk.offset + d]
                    if v != 0.0:
                        lines.append(f"{prefix} {name} {d} {v!r}")
            lines.append(f"{prefix}const {const!r}" if idx is None
                         else f"{tag}const {idx} {const!r}")

        expr_lines("obj", self.objective)
        eq_idx = 0
        for entry in self.equalities:
            if isinstance(entry, tuple):
                _, result, combo, d = entry
                lines.append(f"eq {eq_idx} {result} {d} 1.0")
                for other, coeff in combo:
                    lines.append(f"eq {eq_idx} {other} {d} {-coeff!r}")
                lines.append(f"eqconst {eq_idx} 0.0")
            else:
                expr_lines("eq", entry, eq_idx)
            eq_idx += 1
        for i, expr in enumerate(self.inequalities):
            expr_lines("ineq", expr, i)
        for i, lmi in enumerate(self.lmis):
            tensor, idxs, const = self._lmi_coefficients(lmi)
            is_complex = (
                (np.abs(np.imag(tensor)).max() if len(tensor) else 0.0) > 0
                or np.abs(np.imag(const)).max() > 0
            )
            lines.append(f"lmi {i} {lmi.dim} {'complex' if is_complex else 'real'}")
            names = {blk.offset + d: (name, d)
                     for name, blk in self.blocks.items()
                     for d in range(blk.n_dofs)}
            for t_idx, dof in enumerate(idxs):
                name, d = names[dof]
                mat = tensor[t_idx]
                for r, c in zip(*np.nonzero(np.abs(mat) > 0)):
                    v = mat[r, c]
                    lines.append(
                        f"lmiterm {i} {name} {d} {r} {c} {v.real!r} {v.imag!r}"
                    )
            for r, c in zip(*np.nonzero(np.abs(const) > 0)):
                v = const[r, c]
                lines.append(f"lmiconst {i} {r} {c} {v.real!r} {v.imag!r}")
        for i, (t_name, f_expr) in enumerate(self.log_hypographs):
            row, const = self._expr_row(f_expr)
            for name, blk in self.blocks.items():
                for d in range(blk.n_dofs):
                    v = row[blk.offset + d]
                    if v != 0.0:
                        lines.append(f"loghypo {i} {t_name} {name} {d} {v!r}")
            lines.append(f"loghypoconst {i} {const!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


_REAL_SYM_BASES: dict[int, np.ndarray] = {}


def _real_sym_basis_tensor(n: int) -> np.ndarray:
    """Orthonormal symmetric basis matching svec coordinates, cached."""
    if n not in _REAL_SYM_BASES:
        r, c = _tri_indices(n)
        tri = len(r)
        basis = np.zeros((tri, n, n))
        for k, (i, j) in enumerate(zip(r, c)):
            if i == j:
                basis[k, i, i] = 1.0
            else:
                basis[k, i, j] = 1.0 / SQRT2
                basis[k, j, i] = 1.0 / SQRT2
        _REAL_SYM_BASES[n] = basis
    return _REAL_SYM_BASES[n]


def _map_status(raw: str) -> str:
    name = raw.split(".")[-1]
    if name in ("Solved",):
        return _STATUS_OPTIMAL
    if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return _STATUS_INFEASIBLE
    if name in ("DualInfeasible", "AlmostDualInfeasible"):
        return _STATUS_UNBOUNDED
    if name in ("MaxIterations", "MaxTime"):
        return _STATUS_MAX_ITERATIONS
    if name in ("AlmostSolved",):
        return _STATUS_NUMERICAL_ERROR
    return _STATUS_NUMERICAL_ERROR


def solve(program: ConicProgram, **kwargs) -> SolveReport:
    """Module-level convenience wrapper around ConicProgram.solve."""
    return program.solve(**kwargs)
