"""Pathwise mild-equation solvers.

The mild form of the perturbed equation is

    u(t,x) = w(t,x) + int_0^t int G(t-s, x-y) sigma(u(s,y)) dL(s,y),

with w the deterministic part of the unperturbed equation.  For a
finite-activity realization with m1 = 0 the right-hand side is a finite sum
over atoms strictly before t, so solving forward in atom time is exact:
the value at atom k depends only on atoms j < k.  Picard iteration from
u_0 = w is the constructive counterpart; at the atoms its dependency
structure is strictly lower triangular, so it reaches the forward solution
exactly once the iteration count passes the longest interaction chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import GreenKernel
from .integrals import GridField, MissingFieldError, stochastic_convolution
from .noise import (LevyMeasure, PointConfiguration, SpaceTimeWindow,
                    sample_prm)
from .reporting import write_csv

# multiplier on propagated standard errors in statistical-slack bounds
SLACK_SIGMAS = 4.0


class SolverError(ValueError):
    pass


def _abs_map(u):
    return np.abs(u)


def _sin_map(u):
    return np.sin(u)


@dataclass(frozen=True)
class ScalarMap:
    """The multiplicative nonlinearity sigma with its declared constants.

    lipschitz bounds |sigma(x)-sigma(y)| <= lipschitz*|x-y| and growth bounds
    |sigma(x)| <= growth*(1+|x|).  `affine` returns (a, b) when sigma is
    exactly a*x + b, which is what the derivative fixed-point checker needs.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    fn: object = field(default=None, compare=False, repr=False)
    lipschitz: float = 0.0
    growth: float = 0.0

    def __call__(self, u):
        if self.kind == "affine":
            return self.a * u + self.b
        if self.kind == "abs":
            return _abs_map(u)
        if self.kind == "sin":
            return _sin_map(u)
        return self.fn(u)

    @property
    def affine(self):
        return (self.a, self.b) if self.kind == "affine" else None

    def label(self) -> str:
        if self.kind == "affine":
            return f"affine({self.a:g},{self.b:g})"
        return self.kind


def affine_map(a: float, b: float) -> ScalarMap:
    return ScalarMap("affine", a=a, b=b,
                     lipschitz=abs(a), growth=max(abs(a), abs(b)))


def constant_map(b: float) -> ScalarMap:
    return affine_map(0.0, b)


def custom_map(fn, lipschitz: float, name: str = "custom") -> ScalarMap:
    return ScalarMap(name, fn=fn, lipschitz=lipschitz,
                     growth=max(lipschitz, abs(float(fn(0.0)))))


def named_map(name: str, a: float = 0.5, b: float = 1.0) -> ScalarMap:
    if name == "affine":
        return affine_map(a, b)
    if name == "constant":
        return constant_map(b)
    if name == "abs":
        return ScalarMap("abs", lipschitz=1.0, growth=1.0)
    if name == "sin":
        return ScalarMap("sin", lipschitz=1.0, growth=1.0)
    raise SolverError(f"unknown nonlinearity {name!r}")


_IC_KINDS = ("constant", "cosine", "wave-pair")


@dataclass(frozen=True)
class ProblemSpec:
    """One perturbed-equation setup: kernel, nonlinearity, deterministic
    part, window, and the default output grid resolution."""

    kernel: GreenKernel
    sigma: ScalarMap
    ic_kind: str
    window: SpaceTimeWindow
    ic_value: float = 1.0
    n_t: int = 64
    n_x: int = 64

    def __post_init__(self):
        if self.ic_kind not in _IC_KINDS:
            raise SolverError(f"unknown initial condition {self.ic_kind!r}")
        if self.ic_kind == "wave-pair" and self.kernel.kind != "wave":
            raise SolverError("wave-pair initial data needs the wave kernel")
        if self.n_t < 2 or self.n_x < 2:
            raise SolverError("grid resolution must be at least 2x2")
        self._spot_check_sigma()

    def _spot_check_sigma(self, n_pairs: int = 256):
        # cheap randomized audit of the declared constants
        rng = np.random.default_rng(0)
        xs = rng.uniform(-10.0, 10.0, size=(n_pairs, 2))
        fx = self.sigma(xs[:, 0])
        fy = self.sigma(xs[:, 1])
        gap = np.abs(xs[:, 0] - xs[:, 1])
        tol = 1e-9
        if np.any(np.abs(fx - fy) > self.sigma.lipschitz * gap + tol):
            raise SolverError("sigma violates its declared Lipschitz constant")
        if np.any(np.abs(fx) > self.sigma.growth * (1.0 + np.abs(xs[:, 0])) + tol):
            raise SolverError("sigma violates its declared growth constant")
        if self.sigma.affine is not None:
            a, b = self.sigma.affine
            if np.any(np.abs(fx - (a * xs[:, 0] + b)) > tol):
                raise SolverError("sigma affine tag inconsistent with values")

    def grid(self):
        t = np.linspace(0.0, self.window.T, self.n_t)
        x = np.linspace(-self.window.R, self.window.R, self.n_x)
        return t, x


def deterministic_part(problem: ProblemSpec, t, x):
    """Closed-form solution of the unperturbed equation at (t, x).

    heat/constant c -> c;   heat/cosine -> exp(-t/2) cos x
    wave/constant c -> c (initial velocity 0)
    wave/cosine     -> cos x cos t (initial velocity 0)
    wave/wave-pair  -> cos x (cos t + sin t) (initial position and velocity
                       both cos, by the d'Alembert formula)
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0.0) or np.any(t > problem.window.T):
        raise SolverError("deterministic part evaluated outside [0, T]")
    kind = problem.ic_kind
    if kind == "constant":
        out = np.broadcast_to(np.asarray(problem.ic_value, dtype=float),
                              np.broadcast_shapes(t.shape, x.shape)).copy()
    elif kind == "cosine":
        if problem.kernel.kind == "heat":
            out = np.exp(-t / 2.0) * np.cos(x)
        else:
            out = np.cos(x) * np.cos(t)
    else:  # wave-pair
        out = np.cos(x) * (np.cos(t) + np.sin(t))
    return out if out.ndim else float(out)


def initial_condition_bound(problem: ProblemSpec) -> float:
    """Uniform bound on |w| over the window (w is continuous and bounded)."""
    if problem.ic_kind == "constant":
        return abs(problem.ic_value)
    if problem.ic_kind == "cosine":
        return 1.0
    return math.sqrt(2.0)


def pairwise_interaction_matrix(kernel: GreenKernel, times, positions):
    """Strictly lower-triangular matrix M[k, j] = G(t_k - t_j, x_k - x_j)
    for t_j < t_k, zero elsewhere."""
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    n = times.size
    M = np.zeros((n, n))
    if n == 0:
        return M
    dt = times[:, None] - times[None, :]
    dx = positions[:, None] - positions[None, :]
    mask = dt > 0.0
    if mask.any():
        M[mask] = kernel.evaluate(dt[mask], dx[mask])
    return M


def influence_rows(kernel: GreenKernel, config: PointConfiguration,
                   grid_t, grid_x):
    """Per grid-time kernel blocks: rows[j] is the (n_x, k_j) matrix
    G(t_j - t_i, x_l - x_i) over atoms with t_i < t_j (a prefix, since atoms
    are time sorted)."""
    rows = []
    for tj in grid_t:
        kj = int(np.searchsorted(config.times, tj))
        if kj == 0:
            rows.append(np.zeros((grid_x.size, 0)))
        else:
            rows.append(kernel.evaluate(
                tj - config.times[:kj][None, :],
                grid_x[:, None] - config.positions[:kj][None, :]))
    return rows


@dataclass
class SolutionPath:
    """Solution values at the atoms (exact support of the jump part) and on
    a rectangular output grid."""

    config: PointConfiguration
    problem: ProblemSpec
    atom_values: np.ndarray
    solver: str
    grid_times: np.ndarray | None = None
    grid_positions: np.ndarray | None = None
    grid_values: np.ndarray | None = None

    def atoms_csv(self, path) -> None:
        rows = [[t, x, z, u] for (t, x, z), u
                in zip(self.config.atoms, self.atom_values)]
        write_csv(path, ["t", "x", "z", "u"], rows)

    def grid_csv(self, path) -> None:
        if self.grid_values is None:
            raise SolverError("path has no grid values")
        rows = [[tj, xl, self.grid_values[j, l]]
                for j, tj in enumerate(self.grid_times)
                for l, xl in enumerate(self.grid_positions)]
        write_csv(path, ["t", "x", "u"], rows)


def evaluate_solution(path: SolutionPath, t: float, x: float) -> float:
    """Evaluate the mild-form right-hand side at (t, x) from the atom values."""
    problem = path.problem
    grid_field = None
    if path.config.measure.first_moment != 0.0:
        if path.grid_values is None:
            raise MissingFieldError("m1 != 0 evaluation needs grid values")
        grid_field = GridField(path.grid_times, path.grid_positions,
                               path.grid_values)
    w = deterministic_part(problem, t, x)
    return w + stochastic_convolution(path.config, problem.kernel,
                                      problem.sigma, path.atom_values, t, x,
                                      grid_field=grid_field)


def _project_grid(problem: ProblemSpec, config: PointConfiguration, coef,
                  rows=None):
    """Grid values w + sum_{t_i < t_j} G(t_j - t_i, x_l - x_i) coef_i."""
    grid_t, grid_x = problem.grid()
    out = np.asarray(deterministic_part(problem, grid_t[:, None],
                                        grid_x[None, :]), dtype=float).copy()
    if rows is None:
        rows = influence_rows(problem.kernel, config, grid_t, grid_x)
    for j in range(grid_t.size):
        kj = rows[j].shape[1]
        if kj:
            out[j] += rows[j] @ coef[:kj]
    return grid_t, grid_x, out


def solve_forward(config: PointConfiguration, problem: ProblemSpec,
                  with_grid: bool = True) -> SolutionPath:
    """Exact pathwise solution by forward substitution over time-sorted atoms.

    Only valid when the jump measure is compensator-free (m1 = 0); otherwise
    the solution is not a finite jump sum and picard_solve must be used.
    """
    if config.measure.first_moment != 0.0:
        raise SolverError("solve_forward requires m1 = 0; use picard_solve")
    kernel, sigma = problem.kernel, problem.sigma
    t, x, z = config.times, config.positions, config.jumps
    n = config.n_atoms
    u = np.empty(n)
    sigz = np.empty(n)
    for k in range(n):
        w = deterministic_part(problem, t[k], x[k])
        if k == 0:
            u[k] = w
        else:
            row = kernel.evaluate(t[k] - t[:k], x[k] - x[:k])
            u[k] = w + float(np.dot(np.atleast_1d(row), sigz[:k]))
        sigz[k] = sigma(u[k]) * z[k]
    path = SolutionPath(config, problem, u, solver="forward")
    if with_grid:
        path.grid_times, path.grid_positions, path.grid_values = \
            _project_grid(problem, config, sigz)
    return path


def mild_residual(path: SolutionPath) -> float:
    """Re-evaluate the mild equation at the atoms through an independent
    (full matrix) code path; returns the max absolute defect."""
    config, problem = path.config, path.problem
    if config.n_atoms == 0:
        return 0.0
    M = pairwise_interaction_matrix(problem.kernel, config.times,
                                    config.positions)
    w = deterministic_part(problem, config.times, config.positions)
    rhs = w + M @ (problem.sigma(path.atom_values) * config.jumps)
    return float(np.max(np.abs(path.atom_values - rhs)))


@dataclass
class PicardDiagnostics:
    sup_differences: np.ndarray  # max-atom |u_m - u_{m-1}|, m = 1..n_iter

    def to_csv(self, path) -> None:
        write_csv(path, ["n", "sup_diff"],
                  [[m + 1, d] for m, d in enumerate(self.sup_differences)])


def picard_iterates_at_atoms(config: PointConfiguration, problem: ProblemSpec,
                             n_iter: int):
    """Atom-value Picard iterates [u_0, ..., u_n]; m1 = 0 fast path."""
    if config.measure.first_moment != 0.0:
        raise SolverError("atom-only iteration requires m1 = 0")
    M = pairwise_interaction_matrix(problem.kernel, config.times,
                                    config.positions)
    w = np.atleast_1d(np.asarray(deterministic_part(
        problem, config.times, config.positions), dtype=float))
    iterates = [w.copy()]
    for _ in range(n_iter):
        prev = iterates[-1]
        iterates.append(w + M @ (problem.sigma(prev) * config.jumps))
    return iterates


def picard_solve(config: PointConfiguration, problem: ProblemSpec,
                 n_iter: int, with_grid: bool = True):
    """Picard iteration u_{m+1} = w + int G sigma(u_m) dL from u_0 = w.

    Returns (SolutionPath of the n-th iterate, PicardDiagnostics with the
    sup-atom differences).  When m1 != 0 the compensator is quadratured on
    the problem grid, so accuracy is grid-limited; with m1 = 0 the iteration
    is exact arithmetic on the atoms.
    """
    if n_iter < 0:
        raise SolverError("n_iter must be >= 0")
    kernel, sigma = problem.kernel, problem.sigma
    measure = config.measure
    grid_t, grid_x = problem.grid()
    if measure.first_moment == 0.0:
        iterates = picard_iterates_at_atoms(config, problem, n_iter)
        u = iterates[-1]
        diffs = np.array([float(np.max(np.abs(b - a))) if a.size else 0.0
                          for a, b in zip(iterates[:-1], iterates[1:])])
        path = SolutionPath(config, problem, u, solver=f"picard({n_iter})")
        if with_grid:
            prev = iterates[-2] if n_iter else None
            coef = (sigma(prev) * config.jumps) if n_iter else \
                np.zeros(config.n_atoms)
            path.grid_times, path.grid_positions, path.grid_values = \
                _project_grid(problem, config, coef)
            if n_iter == 0:
                path.grid_values = np.asarray(deterministic_part(
                    problem, grid_t[:, None], grid_x[None, :]), dtype=float)
        return path, PicardDiagnostics(diffs)

    # m1 != 0: carry the iterate on the grid for the compensator quadrature
    w_at = np.atleast_1d(np.asarray(deterministic_part(
        problem, config.times, config.positions), dtype=float))
    w_gr = np.asarray(deterministic_part(problem, grid_t[:, None],
                                         grid_x[None, :]), dtype=float)
    M = pairwise_interaction_matrix(kernel, config.times, config.positions)
    rows = influence_rows(kernel, config, grid_t, grid_x)
    u_at, u_gr = w_at.copy(), w_gr.copy()
    diffs = []
    m1 = measure.first_moment
    for _ in range(n_iter):
        gf = GridField(grid_t, grid_x, u_gr)
        comp_at = np.array([_compensator(kernel, sigma, gf, tk, xk)
                            for tk, xk in zip(config.times, config.positions)])
        coef = sigma(u_at) * config.jumps
        new_at = w_at + M @ coef - m1 * comp_at
        new_gr = w_gr.copy()
        for j in range(grid_t.size):
            kj = rows[j].shape[1]
            if kj:
                new_gr[j] += rows[j] @ coef[:kj]
            new_gr[j] -= m1 * np.array([
                _compensator(kernel, sigma, gf, grid_t[j], xl)
                for xl in grid_x])
        diffs.append(float(np.max(np.abs(new_at - u_at))) if u_at.size else
                     float(np.max(np.abs(new_gr - u_gr))))
        u_at, u_gr = new_at, new_gr
    path = SolutionPath(config, problem, u_at, solver=f"picard({n_iter})",
                        grid_times=grid_t, grid_positions=grid_x,
                        grid_values=u_gr)
    return path, PicardDiagnostics(np.array(diffs))


def _compensator(kernel, sigma, grid_field, t, x):
    from .integrals import _grid_compensator
    return _grid_compensator(kernel, sigma, grid_field, t, x)


def convolve_square_mass(kernel: GreenKernel, t_grid, values, j: int) -> float:
    """int_0^{t_j} values(s) J(t_j - s) ds with J the squared-mass integrand,
    using exact per-cell masses of J (handles the heat-kernel endpoint
    singularity) and trapezoid values for the integrand.
    """
    if j == 0:
        return 0.0
    tj = t_grid[j]
    edges = kernel.cumulative_square_integral(tj - t_grid[:j + 1])
    cell_mass = edges[:-1] - edges[1:]  # mass of J over [s_l, s_{l+1}]
    mid_vals = 0.5 * (values[:j] + values[1:j + 1])
    return float(np.dot(cell_mass, mid_vals))


@dataclass
class ExistenceReport:
    """Ensemble diagnostics for the Picard scheme.

    h_values[n-1, j] estimates sup_x E|u_n - u_{n-1}|^2(t_j, x); the sup is a
    grid max (whether the true sup sits off-grid is not examined).  The
    recursion check compares each H_{n+1}(t) against
    v * lipschitz^2 * int_0^t H_n(s) J(t-s) ds plus SLACK_SIGMAS propagated
    standard errors.
    """

    t_grid: np.ndarray
    h_values: np.ndarray      # (n_iter, n_t)
    h_stderr: np.ndarray
    bounds: np.ndarray        # (n_iter, n_t); NaN where undefined (n = 1)
    bound_pass: np.ndarray    # bool, same shape
    sqrt_ratios: np.ndarray   # (n_iter - 1,)
    second_moment_sup: np.ndarray  # K-hat estimates per iterate, 0..n_iter
    n_realizations: int
    recursion_ok: bool
    decay_ok: bool
    bounded_ok: bool
    note: str = "sup over x is a grid max"

    @property
    def passed(self) -> bool:
        return self.recursion_ok and self.decay_ok and self.bounded_ok

    def to_csv(self, path) -> None:
        rows = []
        n_iter, n_t = self.h_values.shape
        for n in range(n_iter):
            for j in range(n_t):
                b = self.bounds[n, j]
                rows.append([n + 1, self.t_grid[j], self.h_values[n, j],
                             None if math.isnan(b) else b,
                             bool(self.bound_pass[n, j])])
        write_csv(path, ["n", "t", "H_n", "bound", "pass"], rows)


def existence_diagnostics(problem: ProblemSpec, measure: LevyMeasure,
                          n_realizations: int = 100, n_iter: int = 6,
                          master_seed: int = 0) -> ExistenceReport:
    """Monte Carlo audit of the Picard convergence mechanism.

    Checks, per grid time t: the recursion bound on successive-difference
    second moments (with statistical slack), the geometric decay of
    sqrt(sup_t H_n), and boundedness of the running second-moment sup.
    """
    if measure.first_moment != 0.0:
        raise SolverError("diagnostics assume a compensator-free measure")
    if n_iter < 2:
        raise SolverError("need at least two iterates to difference")
    grid_t, grid_x = problem.grid()
    n_t, n_x = grid_t.size, grid_x.size
    kernel, sigma = problem.kernel, problem.sigma
    w_gr = np.asarray(deterministic_part(problem, grid_t[:, None],
                                         grid_x[None, :]), dtype=float)

    s1 = np.zeros((n_iter, n_t, n_x))   # sum of squared differences
    s2 = np.zeros((n_iter, n_t, n_x))   # sum of fourth powers
    u1 = np.zeros((n_iter + 1, n_t, n_x))
    u2 = np.zeros((n_iter + 1, n_t, n_x))

    for i in range(n_realizations):
        config = sample_prm(measure, problem.window, (master_seed, i))
        iterates = picard_iterates_at_atoms(config, problem, n_iter)
        rows = influence_rows(kernel, config, grid_t, grid_x)
        z = config.jumps
        # grid projection of iterate n uses sigma of iterate n-1 at the atoms
        coefs = [sigma(it) * z for it in iterates[:-1]]
        prev_grid = w_gr
        u1[0] += prev_grid ** 2
        u2[0] += prev_grid ** 4
        for n in range(1, n_iter + 1):
            grid_n = w_gr.copy()
            for j in range(n_t):
                kj = rows[j].shape[1]
                if kj:
                    grid_n[j] += rows[j] @ coefs[n - 1][:kj]
            delta = grid_n - prev_grid
            s1[n - 1] += delta ** 2
            s2[n - 1] += delta ** 4
            u1[n] += grid_n ** 2
            u2[n] += grid_n ** 4
            prev_grid = grid_n

    nr = n_realizations
    mean_sq = s1 / nr
    var_sq = np.maximum(s2 / nr - mean_sq ** 2, 0.0) * (nr / max(nr - 1, 1))
    se_sq = np.sqrt(var_sq / nr)

    h = np.max(mean_sq, axis=2)                       # (n_iter, n_t)
    arg = np.argmax(mean_sq, axis=2)
    se_h = np.take_along_axis(se_sq, arg[:, :, None], axis=2)[:, :, 0]

    v = measure.second_moment
    lip2 = sigma.lipschitz ** 2
    bounds = np.full((n_iter, n_t), np.nan)
    bound_pass = np.ones((n_iter, n_t), dtype=bool)
    for n in range(1, n_iter):     # bound for H_{n+1} from H_n
        for j in range(n_t):
            conv = convolve_square_mass(kernel, grid_t, h[n - 1], j)
            conv_se = convolve_square_mass(kernel, grid_t, se_h[n - 1], j)
            bound = v * lip2 * conv
            slack = SLACK_SIGMAS * (se_h[n, j] + v * lip2 * conv_se) + 1e-15
            bounds[n, j] = bound
            bound_pass[n, j] = h[n, j] <= bound + slack
    recursion_ok = bool(np.all(bound_pass[1:]))

    sup_h = np.max(h, axis=1)
    ratios = np.array([math.sqrt(sup_h[n + 1] / sup_h[n]) if sup_h[n] > 0
                       else 0.0 for n in range(n_iter - 1)])
    tail = ratios[max(0, ratios.size - 3):]
    decay_ok = bool(tail.size == 0 or np.all(tail <= 0.9))

    k_mean = np.max(u1 / nr, axis=(1, 2))
    k_arg_flat = np.argmax((u1 / nr).reshape(n_iter + 1, -1), axis=1)
    k_var = np.maximum(u2 / nr - (u1 / nr) ** 2, 0.0) * (nr / max(nr - 1, 1))
    k_se = np.array([np.sqrt(k_var.reshape(n_iter + 1, -1)[n, k_arg_flat[n]]
                             / nr) for n in range(n_iter + 1)])
    bounded_ok = True
    for n in range(max(1, n_iter - 2), n_iter):
        step = abs(k_mean[n + 1] - k_mean[n])
        if step > SLACK_SIGMAS * (k_se[n + 1] + k_se[n]) + 0.05 * (1 + k_mean[n]):
            bounded_ok = False

    return ExistenceReport(grid_t, h, se_h, bounds, bound_pass, ratios,
                           k_mean, n_realizations, recursion_ok, decay_ok,
                           bool(bounded_ok))
