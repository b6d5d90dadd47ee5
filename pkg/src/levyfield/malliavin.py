"""Add-one-point difference derivatives of pathwise functionals.

For a functional F of the noise configuration, the derivative at the point
(r, xi, z) is the plain difference

    D_{r,xi,z} F = F(config + atom(r, xi, z)) - F(config),

i.e. the response of F to one extra atom.  All identity checks in this
module (chain rule, exponential formula, duality, the derivative
fixed-point equation and its Picard version) are verified against that
definition, with the two sides always assembled through independent code
paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .integrals import Integrand, inner_product, ito_integral
from .noise import (LevyMeasure, PointConfiguration, SpaceTimeWindow,
                    add_atom, atomic_decomposition, sample_prm)
from .reporting import CheckRow, EstimatorSummary, studentize, write_check_rows
from .solver import (ProblemSpec, SLACK_SIGMAS, deterministic_part,
                     evaluate_solution, influence_rows,
                     pairwise_interaction_matrix, picard_iterates_at_atoms,
                     solve_forward)


class MalliavinError(ValueError):
    pass


class NonAffineError(MalliavinError):
    """Raised when an affine-only check receives a non-affine nonlinearity."""


@dataclass(frozen=True)
class DerivativePoint:
    """Location (time, x) and mark (jump) of the added atom."""

    time: float
    x: float
    jump: float

    def label(self) -> str:
        return f"r={self.time:.6g};xi={self.x:.6g};z={self.jump:.6g}"


@dataclass(frozen=True)
class PathFunctional:
    """Named deterministic map from a configuration to a real number."""

    name: str
    fn: object

    def __call__(self, config: PointConfiguration) -> float:
        return float(self.fn(config))


def integral_functional(h: Integrand,
                        measure: LevyMeasure | None = None) -> PathFunctional:
    return PathFunctional(f"L({h.name})",
                          lambda cfg: ito_integral(cfg, h, measure))


def exp_integral_functional(h: Integrand,
                            measure: LevyMeasure | None = None) -> PathFunctional:
    return PathFunctional(f"exp(L({h.name}))",
                          lambda cfg: math.exp(ito_integral(cfg, h, measure)))


def solution_functional(problem: ProblemSpec, t: float, x: float) -> PathFunctional:
    """Solution of the mild equation evaluated at (t, x); m1 = 0 only."""

    def fn(cfg):
        path = solve_forward(cfg, problem, with_grid=False)
        return evaluate_solution(path, t, x)

    return PathFunctional(f"u({t:g},{x:g})", fn)


def compose_functional(g, F: PathFunctional, gname: str = "g") -> PathFunctional:
    return PathFunctional(f"{gname}({F.name})", lambda cfg: g(F(cfg)))


def _validate_point(config: PointConfiguration, point: DerivativePoint):
    if not (0.0 < point.time < config.window.T):
        raise MalliavinError("derivative point time must lie in (0, T)")
    if abs(point.x) > config.window.R:
        raise MalliavinError("derivative point position outside [-R, R]")
    if point.jump == 0.0 or not math.isfinite(point.jump):
        raise MalliavinError("derivative point jump must be finite nonzero")


def difference_derivative(F: PathFunctional, config: PointConfiguration,
                          point: DerivativePoint) -> float:
    """D_{r,xi,z} F as the literal add-one-point difference."""
    _validate_point(config, point)
    plus = add_atom(config, point.time, point.x, point.jump)
    return F(plus) - F(config)


def chain_rule_residual(g, F: PathFunctional, config: PointConfiguration,
                        point: DerivativePoint, gname: str = "g") -> CheckRow:
    """|D g(F) - [g(F + DF) - g(F)]| with both sides built independently.

    The difference operator satisfies the exact (not first-order) chain
    rule, so the residual is pure floating-point noise; `residual_or_z` is
    the raw residual and the caller applies its scale.
    """
    composed = compose_functional(g, F, gname)
    lhs = difference_derivative(composed, config, point)
    f0 = F(config)
    df = difference_derivative(F, config, point)
    rhs = g(f0 + df) - g(f0)
    return CheckRow(check="chain-rule", params=f"g={gname};{point.label()}",
                    lhs=lhs, rhs=rhs, residual_or_z=abs(lhs - rhs),
                    passed=None)


def exp_derivative_residual(h: Integrand, config: PointConfiguration,
                            point: DerivativePoint,
                            measure: LevyMeasure | None = None) -> CheckRow:
    """Exponential-functional derivative identity, checked per realization:

        D exp(L(h)) = exp(L(h)) * (exp(h(r, xi) z) - 1).

    The right side uses expm1 and never forms the difference of exponentials.
    """
    F = exp_integral_functional(h, measure)
    lhs = difference_derivative(F, config, point)
    base = math.exp(ito_integral(config, h, measure))
    hval = float(h(point.time, point.x))
    rhs = base * math.expm1(hval * point.jump)
    scale = max(abs(rhs), abs(base), 1e-300)
    return CheckRow(check="exp-derivative", params=point.label(), lhs=lhs,
                    rhs=rhs, residual_or_z=abs(lhs - rhs) / scale,
                    passed=None)


def duality_test(h: Integrand, g: Integrand, measure: LevyMeasure,
                 window: SpaceTimeWindow, n_samples: int,
                 seed: int) -> EstimatorSummary:
    """Monte Carlo duality check E[L(h) L(g)] = v <h, g>.

    The left side couples the functional F = L(h) with the divergence of the
    deterministic field X(t,x,z) = g(t,x) z, whose compensated integral is
    L(g) pathwise; the right side is exact quadrature.
    """
    target = measure.second_moment * inner_product(h, g, window)
    prods = np.empty(n_samples)
    for i in range(n_samples):
        cfg = sample_prm(measure, window, (seed, i))
        prods[i] = ito_integral(cfg, h, measure) * ito_integral(cfg, g, measure)
    est = float(np.mean(prods))
    se = float(np.std(prods, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 \
        else 0.0
    return EstimatorSummary(name=f"duality:{h.name},{g.name}", n=n_samples,
                            estimate=est, target=target, stderr=se,
                            studentized=studentize(est, target, se))


def _cross_matrix(kernel, target_t, target_x, source_t, source_x):
    """Out[i, j] = G(target_t_i - source_t_j, target_x_i - source_x_j) when
    the source time is strictly earlier, else 0."""
    target_t = np.atleast_1d(np.asarray(target_t, dtype=float))
    target_x = np.atleast_1d(np.asarray(target_x, dtype=float))
    source_t = np.atleast_1d(np.asarray(source_t, dtype=float))
    source_x = np.atleast_1d(np.asarray(source_x, dtype=float))
    out = np.zeros((target_t.size, source_t.size))
    if source_t.size == 0 or target_t.size == 0:
        return out
    dt = target_t[:, None] - source_t[None, :]
    dx = target_x[:, None] - source_x[None, :]
    mask = dt > 0.0
    if mask.any():
        out[mask] = kernel.evaluate(dt[mask], dx[mask])
    return out


@dataclass
class EquationCheck:
    lhs: float
    rhs: float
    residual: float
    trivial: bool = False

    def row(self, check: str, params: str, passed=None) -> CheckRow:
        return CheckRow(check=check, params=params, lhs=self.lhs,
                        rhs=self.rhs, residual_or_z=self.residual,
                        passed=passed)


def _aligned_atom_difference(plus_path, base_path, insert_index: int):
    vals = np.delete(plus_path.atom_values, insert_index)
    return vals - base_path.atom_values


def derivative_equation_residual(problem: ProblemSpec,
                                 config: PointConfiguration,
                                 point: DerivativePoint, t: float,
                                 x: float) -> EquationCheck:
    """Pathwise residual of the derivative fixed-point equation at (t, x):

        Du(t,x) = G(t-r, x-xi) sigma(u(r,xi)) z
                  + sum_{r < t_i < t} G(t-t_i, x-x_i) a Du(t_i,x_i) z_i

    for affine sigma(x) = a x + b.  The left side differences two exact
    forward solves; the right side re-assembles the equation from the base
    solve and the differenced atom values.  For r >= t the derivative of an
    adapted functional vanishes and the routine asserts exact zero.
    """
    if problem.sigma.affine is None:
        raise NonAffineError(
            "derivative_equation_residual needs affine sigma; "
            "use nonlinear_probe for general Lipschitz nonlinearities")
    _validate_point(config, point)
    a, _ = problem.sigma.affine
    base = solve_forward(config, problem, with_grid=False)
    plus_cfg = add_atom(config, point.time, point.x, point.jump)
    plus = solve_forward(plus_cfg, problem, with_grid=False)
    lhs = evaluate_solution(plus, t, x) - evaluate_solution(base, t, x)
    if point.time >= t:
        if lhs != 0.0:
            raise MalliavinError(
                f"adaptedness violated: D at r={point.time} >= t={t} "
                f"returned {lhs!r}")
        return EquationCheck(lhs=0.0, rhs=0.0, residual=0.0, trivial=True)
    insert = int(np.searchsorted(config.times, point.time))
    du_at = _aligned_atom_difference(plus, base, insert)
    u_r = evaluate_solution(base, point.time, point.x)
    g_main = _cross_matrix(problem.kernel, t, x, point.time, point.x)[0, 0]
    rhs = g_main * problem.sigma(u_r) * point.jump
    sel = (config.times > point.time) & (config.times < t)
    if sel.any():
        g_row = _cross_matrix(problem.kernel, t, x, config.times[sel],
                              config.positions[sel])[0]
        rhs += float(np.dot(g_row, a * du_at[sel] * config.jumps[sel]))
    return EquationCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs))


@dataclass
class ProbeResult:
    """Report-only evaluation of the derivative equation for general
    Lipschitz sigma: residual carries no pass/fail semantics."""

    sigma_kind: str
    lhs: float
    rhs: float
    residual: float
    scale: float

    def row(self) -> CheckRow:
        return CheckRow(check="nonlinear-probe", params=self.sigma_kind,
                        lhs=self.lhs, rhs=self.rhs,
                        residual_or_z=self.residual, passed=None)


def nonlinear_probe(problem: ProblemSpec, config: PointConfiguration,
                    point: DerivativePoint, t: float, x: float) -> ProbeResult:
    """Evaluate both sides of the derivative equation with the exact
    nonlinear increment sigma(u + Du) - sigma(u) in place of a*Du.

    With the difference operator this identity closes pathwise for any
    sigma; the probe reports how far the two independently assembled sides
    drift apart, as data for the open nonlinear case.
    """
    _validate_point(config, point)
    base = solve_forward(config, problem, with_grid=False)
    plus_cfg = add_atom(config, point.time, point.x, point.jump)
    plus = solve_forward(plus_cfg, problem, with_grid=False)
    lhs = evaluate_solution(plus, t, x) - evaluate_solution(base, t, x)
    if point.time >= t:
        return ProbeResult(problem.sigma.label(), lhs, 0.0, abs(lhs), 1.0)
    insert = int(np.searchsorted(config.times, point.time))
    du_at = _aligned_atom_difference(plus, base, insert)
    u_r = evaluate_solution(base, point.time, point.x)
    g_main = _cross_matrix(problem.kernel, t, x, point.time, point.x)[0, 0]
    rhs = g_main * problem.sigma(u_r) * point.jump
    sel = config.times < t
    if sel.any():
        g_row = _cross_matrix(problem.kernel, t, x, config.times[sel],
                              config.positions[sel])[0]
        bracket = problem.sigma(base.atom_values[sel] + du_at[sel]) \
            - problem.sigma(base.atom_values[sel])
        rhs += float(np.dot(g_row, bracket * config.jumps[sel]))
    scale = 1.0 + abs(lhs) + float(np.max(np.abs(base.atom_values),
                                          initial=0.0))
    return ProbeResult(problem.sigma.label(), lhs, rhs, abs(lhs - rhs), scale)


def _batched_plus_iterates(problem: ProblemSpec, config: PointConfiguration,
                           pts_t, pts_x, jump: float, n_iter: int,
                           base_iterates):
    """Picard iterates of config + atom(r_b, xi_b, jump) for a batch of
    derivative points, sharing the base iterates.

    Returns (plus, at_point): plus[m] has shape (B, k) with the iterate at
    the original atoms; at_point[m] has shape (B,) with the base iterate
    evaluated at the added points (the added atom's own value, which only
    sees strictly earlier atoms and is therefore unchanged by the addition).
    """
    kernel, sigma = problem.kernel, problem.sigma
    t, x, z = config.times, config.positions, config.jumps
    pts_t = np.atleast_1d(np.asarray(pts_t, dtype=float))
    pts_x = np.atleast_1d(np.asarray(pts_x, dtype=float))
    B, k = pts_t.size, t.size
    M = pairwise_interaction_matrix(kernel, t, x)
    P = _cross_matrix(kernel, pts_t, pts_x, t, x)        # point <- atoms
    A = _cross_matrix(kernel, t, x, pts_t, pts_x).T      # atoms <- point
    w_at = np.atleast_1d(np.asarray(deterministic_part(problem, t, x),
                                    dtype=float))
    w_pt = np.atleast_1d(np.asarray(deterministic_part(problem, pts_t, pts_x),
                                    dtype=float))
    plus = [np.broadcast_to(w_at, (B, k)).copy()]
    at_point = [w_pt.copy()]
    for m in range(1, n_iter + 1):
        at_point.append(w_pt + P @ (sigma(base_iterates[m - 1]) * z))
        plus.append(w_at[None, :]
                    + (sigma(plus[m - 1]) * z[None, :]) @ M.T
                    + A * (sigma(at_point[m - 1]) * jump)[:, None])
    return plus, at_point


def _batched_eval(problem, config, pts_t, pts_x, jump, base_iterates, plus,
                  at_point, t_eval: float, x_eval: float, n: int):
    """(base value, batch of plus values) of iterate n at (t_eval, x_eval)."""
    kernel, sigma = problem.kernel, problem.sigma
    z = config.jumps
    w = float(np.asarray(deterministic_part(problem, t_eval, x_eval)))
    g_row = _cross_matrix(kernel, t_eval, x_eval, config.times,
                          config.positions)[0]
    g_pt = _cross_matrix(kernel, t_eval, x_eval, pts_t, pts_x)[0]
    if n == 0:
        B = np.atleast_1d(pts_t).size
        return w, np.full(B, w)
    base_val = w + float(np.dot(g_row, sigma(base_iterates[n - 1]) * z))
    plus_val = w + (sigma(plus[n - 1]) * z[None, :]) @ g_row \
        + g_pt * sigma(at_point[n - 1]) * jump
    return base_val, plus_val


@dataclass
class PicardDerivativeReport:
    """Pathwise audit of the Picard derivative recursion

        Du_{n+1}(t,x) = G(t-r, x-xi) sigma(u_n(r,xi)) z
            + sum_i G(t-t_i, x-x_i) [sigma(u_n + Du_n) - sigma(u_n)](t_i) z_i

    checked at every atom for each n, plus the hand formula at n = 1
    (Du_1 = G sigma(w(r,xi)) z) and the Cauchy decay of successive
    derivative iterates.
    """

    point: DerivativePoint
    residuals: np.ndarray          # max-atom residual of the recursion per n
    hand_formula_residual: float   # n = 1 against the closed form
    start_zero: bool               # Du_0 == 0 exactly
    cauchy: np.ndarray             # max-atom |Du_{n+1} - Du_n|
    scale: float
    residual_tol: float
    decay_ratio: float = 0.9

    @property
    def recursion_ok(self) -> bool:
        return bool(np.all(self.residuals <= self.residual_tol * self.scale))

    @property
    def decay_ok(self) -> bool:
        """Geometric decay of the increments from their peak onward.

        Early orders may grow while new interaction chains open up; the
        peak must arrive within the first few orders and the sequence must
        contract (ratio <= decay_ratio, with an exact-zero floor) after it.
        """
        if self.cauchy.size < 2:
            return True
        floor = 1e-14 * self.scale
        peak = int(np.argmax(self.cauchy))
        if peak > 3:
            return False
        tail = self.cauchy[peak:]
        for prev, cur in zip(tail[:-1], tail[1:]):
            if cur > max(self.decay_ratio * prev, floor):
                return False
        return True

    @property
    def passed(self) -> bool:
        return (self.start_zero and self.recursion_ok and self.decay_ok
                and self.hand_formula_residual <= self.residual_tol * self.scale)

    def rows(self):
        out = [CheckRow("picard-derivative", "n=1 hand formula", 0.0, 0.0,
                        self.hand_formula_residual, self.hand_formula_residual
                        <= self.residual_tol * self.scale)]
        for i, r in enumerate(self.residuals):
            out.append(CheckRow("picard-derivative", f"recursion n={i + 1}",
                                0.0, 0.0, r,
                                bool(r <= self.residual_tol * self.scale)))
        for i, c in enumerate(self.cauchy):
            out.append(CheckRow("picard-derivative", f"cauchy n={i}",
                                c, 0.0, c, None))
        return out

    def to_csv(self, path):
        write_check_rows(path, self.rows())


def picard_derivative_report(problem: ProblemSpec,
                             config: PointConfiguration,
                             point: DerivativePoint, n_iter: int = 8,
                             residual_tol: float = 1e-12
                             ) -> PicardDerivativeReport:
    """Difference the Picard iterates with and without the added atom and
    verify the derivative recursion pathwise at each order."""
    if problem.sigma.affine is None:
        raise NonAffineError("picard derivative recursion needs affine sigma")
    _validate_point(config, point)
    if config.measure.first_moment != 0.0:
        raise MalliavinError("picard derivative recursion assumes m1 = 0")
    sigma = problem.sigma
    base = picard_iterates_at_atoms(config, problem, n_iter)
    plus, at_point = _batched_plus_iterates(
        problem, config, point.time, point.x, point.jump, n_iter, base)
    k = config.n_atoms
    z = config.jumps
    A = _cross_matrix(problem.kernel, config.times, config.positions,
                      point.time, point.x)[:, 0]
    M = pairwise_interaction_matrix(problem.kernel, config.times,
                                    config.positions)
    du = [plus[m][0] - base[m] for m in range(n_iter + 1)]
    start_zero = bool(np.all(du[0] == 0.0)) if k else True
    scale = 1.0 + max((float(np.max(np.abs(b))) for b in base if b.size),
                      default=0.0)
    w_pt = float(np.asarray(deterministic_part(problem, point.time, point.x)))
    hand = A * (sigma(w_pt) * point.jump)
    hand_res = float(np.max(np.abs(du[1] - hand), initial=0.0))
    residuals = np.zeros(n_iter)
    for n in range(n_iter):
        bracket = sigma(base[n] + du[n]) - sigma(base[n])
        rhs = A * (sigma(at_point[n][0]) * point.jump) + M @ (bracket * z)
        residuals[n] = float(np.max(np.abs(du[n + 1] - rhs), initial=0.0))
    cauchy = np.array([float(np.max(np.abs(du[m + 1] - du[m]), initial=0.0))
                       for m in range(n_iter)])
    return PicardDerivativeReport(point, residuals, hand_res, start_zero,
                                  cauchy, scale, residual_tol)


@dataclass
class DerivativeBoundReport:
    """Monte Carlo estimates of E || Du_n(t,x) ||^2 (integral of the squared
    difference derivative over dr dxi nu(dz)) with the moment-recursion
    bound

        A_{n+1} <= 4 v growth^2 (1 + K_n) nu_t + 2 v lipschitz^2 A_n nu_t

    checked up to SLACK_SIGMAS propagated standard errors.  Derivative
    points are sampled uniformly from the window (an unbiased reference
    measure), jumps reduced to the atomic/quadrature form of nu.
    """

    eval_points: list
    estimates: np.ndarray      # (n_iter, n_pts)
    stderrs: np.ndarray
    second_moment_sup: np.ndarray   # K-hat per iterate 0..n_iter
    rows: list
    recursion_ok: bool
    stable_ok: bool

    @property
    def passed(self) -> bool:
        return self.recursion_ok and self.stable_ok

    def to_csv(self, path):
        write_check_rows(path, self.rows)


def derivative_bound_estimate(problem: ProblemSpec, measure: LevyMeasure,
                              n_realizations: int = 100, n_points: int = 64,
                              n_iter: int = 8, eval_points=None,
                              master_seed: int = 0) -> DerivativeBoundReport:
    """Estimate the derivative second moments of the Picard iterates.

    Per realization, derivative points (r, xi) are drawn uniformly on the
    window and the squared batch derivative at each evaluation point is
    averaged against the jump measure's atomic decomposition; the window
    volume turns the average into the H-norm integral.  K-hat (the running
    sup of E|u_n|^2) is estimated as a grid max from the same ensemble.
    """
    if measure.first_moment != 0.0:
        raise MalliavinError("derivative bound estimation assumes m1 = 0")
    if n_realizations < 100:
        raise MalliavinError("derivative bound needs at least 100 realizations")
    window = problem.window
    if eval_points is None:
        eval_points = [(window.T, 0.0)]
    zq, wq = atomic_decomposition(measure)
    grid_t, grid_x = problem.grid()
    n_pts = len(eval_points)
    per_real = np.zeros((n_realizations, n_iter, n_pts))
    k1 = np.zeros((n_iter + 1, grid_t.size, grid_x.size))
    k2 = np.zeros_like(k1)
    volume = window.volume

    for i in range(n_realizations):
        rng_cfg = (master_seed, i)
        config = sample_prm(measure, window, rng_cfg)
        rng = np.random.default_rng(
            np.random.SeedSequence(master_seed, spawn_key=(i, 1)))
        pts_t = rng.uniform(0.0, window.T, n_points)
        pts_x = rng.uniform(-window.R, window.R, n_points)
        base = picard_iterates_at_atoms(config, problem, n_iter)
        rows = influence_rows(problem.kernel, config, grid_t, grid_x)
        w_gr = np.asarray(deterministic_part(
            problem, grid_t[:, None], grid_x[None, :]), dtype=float)
        coefs = [problem.sigma(it) * config.jumps for it in base[:-1]]
        k1[0] += w_gr ** 2
        k2[0] += w_gr ** 4
        for n in range(1, n_iter + 1):
            gval = w_gr.copy()
            for j in range(grid_t.size):
                kj = rows[j].shape[1]
                if kj:
                    gval[j] += rows[j] @ coefs[n - 1][:kj]
            k1[n] += gval ** 2
            k2[n] += gval ** 4
        dens = np.zeros((n_iter, n_pts, n_points))
        for z_val, z_w in zip(zq, wq):
            plus, at_point = _batched_plus_iterates(
                problem, config, pts_t, pts_x, z_val, n_iter, base)
            for p, (te, xe) in enumerate(eval_points):
                for n in range(1, n_iter + 1):
                    bval, pval = _batched_eval(
                        problem, config, pts_t, pts_x, z_val, base, plus,
                        at_point, te, xe, n)
                    dens[n - 1, p] += z_w * (pval - bval) ** 2
        per_real[i] = volume * dens.mean(axis=2)

    est = per_real.mean(axis=0)
    se = per_real.std(axis=0, ddof=1) / math.sqrt(n_realizations) \
        if n_realizations > 1 else np.zeros_like(est)

    nr = n_realizations
    k_mean_grid = k1 / nr
    k_hat = np.max(k_mean_grid, axis=(1, 2))
    k_arg = np.argmax(k_mean_grid.reshape(n_iter + 1, -1), axis=1)
    k_var = np.maximum(k2 / nr - k_mean_grid ** 2, 0.0) * (nr / max(nr - 1, 1))
    k_se = np.array([math.sqrt(k_var.reshape(n_iter + 1, -1)[n, k_arg[n]] / nr)
                     for n in range(n_iter + 1)])

    v = measure.second_moment
    growth2 = problem.sigma.growth ** 2
    lip2 = problem.sigma.lipschitz ** 2
    rows_out = []
    recursion_ok = True
    for p, (te, xe) in enumerate(eval_points):
        nu_t = problem.kernel.cumulative_square_integral(te)
        for n in range(1, n_iter):
            bound = 4.0 * v * growth2 * (1.0 + k_hat[n]) * nu_t \
                + 2.0 * v * lip2 * est[n - 1, p] * nu_t
            slack = SLACK_SIGMAS * (se[n, p]
                                    + 2.0 * v * lip2 * nu_t * se[n - 1, p]
                                    + 4.0 * v * growth2 * nu_t * k_se[n]) \
                + 1e-15
            ok = bool(est[n, p] <= bound + slack)
            recursion_ok = recursion_ok and ok
            rows_out.append(CheckRow(
                "derivative-bound", f"n={n + 1};t={te:g};x={xe:g}",
                lhs=float(est[n, p]), rhs=float(bound),
                residual_or_z=float(est[n, p] - bound), passed=ok))

    stable_ok = True
    for p in range(n_pts):
        for n in range(max(1, n_iter - 3), n_iter):
            step = est[n, p] - est[n - 1, p]
            allowance = SLACK_SIGMAS * (se[n, p] + se[n - 1, p]) \
                + 0.05 * (1.0 + est[n - 1, p])
            if step > allowance:
                stable_ok = False

    return DerivativeBoundReport(list(eval_points), est, se, k_hat, rows_out,
                                 recursion_ok, bool(stable_ok))


def hnorm_sq_grid(F: PathFunctional, config: PointConfiguration,
                  n_r: int = 32, n_xi: int = 32) -> float:
    """Midpoint-rule H-norm of DF for one realization:

        int_0^T int_{-R}^{R} int |D_{r,xi,z} F|^2 nu(dz) dxi dr,

    the jump integral reduced to the measure's atomic/quadrature form.
    Midpoints avoid the (excluded) window boundary and atom-time collisions
    are nudged.
    """
    window = config.window
    r_grid = (np.arange(n_r) + 0.5) * window.T / n_r
    xi_grid = -window.R + (np.arange(n_xi) + 0.5) * 2.0 * window.R / n_xi
    zq, wq = atomic_decomposition(config.measure)
    cell = (window.T / n_r) * (2.0 * window.R / n_xi)
    total = 0.0
    for r in r_grid:
        while np.any(config.times == r):
            r = math.nextafter(r, window.T)
        for xi in xi_grid:
            for z_val, z_w in zip(zq, wq):
                d = difference_derivative(F, config,
                                          DerivativePoint(r, xi, z_val))
                total += z_w * d * d * cell
    return total
