"""Outer orientation loop: probe re-selection, L-BFGS steps, convergence.

Each outer iteration re-selects the probe pairs for the current normals,
then takes a short run of L-BFGS steps (two-loop direction, strong Wolfe
line search) on the negated objective with the probes held fixed.  The
curvature history survives across re-selections — the objective changes
only on the measure-zero selection boundaries, and discarding the pairs
there reduces the solver to steepest descent, which is far too slow for
the weakly coupled stragglers — but any direction that fails the descent
check triggers a clear and a steepest-descent restart.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import NormalField, PointCloud, init_random_normals
from .energy import EnergyState, boundary_energy, energy_gradient
from .errors import NonFiniteEnergy
from .gwn import Diagnostics, estimate_areas
from .voronoi import SampleSet, build_diagram, select_all_samples

__all__ = [
    "OptimConfig",
    "IterationRecord",
    "OrientationResult",
    "LbfgsHistory",
    "lbfgs_direction",
    "orient",
]

CURVATURE_MIN = 1e-12


@dataclass
class OptimConfig:
    max_outer_iters: int = 200
    inner_steps: int = 6  # L-BFGS steps per probe re-selection
    lbfgs_memory: int = 10
    grad_tol: float = 1e-6  # infinity norm of the gradient
    energy_rel_tol: float = 1e-8  # relative energy change between iterations
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search: int = 20
    delta: float = 0.05
    box_scale: float = 2.0
    knn_k: int = 15
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if not (self.grad_tol > 0 and self.energy_rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if not (0 < self.wolfe_c1 < self.wolfe_c2 < 1):
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass
class IterationRecord:
    iteration: int
    total: float
    data_term: float
    penalty_term: float
    grad_norm: float
    inside_out: int | None
    same_side: int | None


@dataclass
class OrientationResult:
    normals: NormalField
    energy_trace: list
    inside_out_trace: list
    iterations_run: int
    converged: bool
    wallclock: float
    diagnostics: Diagnostics = field(default_factory=Diagnostics)


class LbfgsHistory:
    """Bounded store of curvature pairs (s, y) with <s, y> > 0."""

    def __init__(self, memory: int = 10):
        self.pairs = deque(maxlen=memory)

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        sy = float(s @ y)
        if sy <= CURVATURE_MIN:
            return False
        self.pairs.append((s, y, 1.0 / sy))
        return True

    def clear(self) -> None:
        self.pairs.clear()

    def __len__(self) -> int:
        return len(self.pairs)


def lbfgs_direction(history: LbfgsHistory, grad: np.ndarray) -> np.ndarray:
    """Two-loop recursion; with empty history this is steepest descent."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history.pairs):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if history.pairs:
        s, y, _ = history.pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(history.pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def _strong_wolfe(phi, f0, dphi0, alpha0, c1, c2, max_trials):
    """Line search for the strong Wolfe conditions on a descent direction.

    ``phi(alpha)`` returns (f, dphi, payload).  Returns the accepted
    (alpha, f, dphi, payload) or None on failure.
    """

    def zoom(lo, hi, f_lo, budget):
        for _ in range(budget):
            alpha = 0.5 * (lo + hi)
            f, dph, payload = phi(alpha)
            if f > f0 + c1 * alpha * dphi0 or f >= f_lo:
                hi = alpha
            else:
                if abs(dph) <= -c2 * dphi0:
                    return alpha, f, dph, payload
                if dph * (hi - lo) >= 0:
                    hi = lo
                lo, f_lo = alpha, f
        # best Armijo point found, accept it even without the curvature half
        f, dph, payload = phi(lo)
        if lo > 0 and f <= f0 + c1 * lo * dphi0:
            return lo, f, dph, payload
        return None

    alpha_prev, f_prev = 0.0, f0
    alpha = alpha0
    for trial in range(max_trials):
        f, dph, payload = phi(alpha)
        if f > f0 + c1 * alpha * dphi0 or (trial > 0 and f >= f_prev):
            return zoom(alpha_prev, alpha, f_prev, max_trials - trial - 1)
        if abs(dph) <= -c2 * dphi0:
            return alpha, f, dph, payload
        if dph >= 0:
            return zoom(alpha, alpha_prev, f, max_trials - trial - 1)
        alpha_prev, f_prev = alpha, f
        alpha *= 2.0
    return None


def _selection_changed(a: SampleSet, b: SampleSet) -> bool:
    return not (
        np.array_equal(a.plus_index, b.plus_index)
        and np.array_equal(a.minus_index, b.minus_index)
    )


def _count_inside_out(samples: SampleSet, classifier):
    inside_plus = np.asarray(classifier(samples.plus), dtype=bool)
    inside_minus = np.asarray(classifier(samples.minus), dtype=bool)
    inside_out = int(np.count_nonzero(inside_plus | ~inside_minus))
    same_side = int(np.count_nonzero(inside_plus == inside_minus))
    return inside_out, same_side


def orient(
    cloud: PointCloud,
    config: OptimConfig | None = None,
    classifier=None,
    init_normals: NormalField | None = None,
    progress=None,
) -> OrientationResult:
    """Recover globally consistent outward normals for a normalized cloud.

    ``classifier``, when given, maps an (m, 3) array to an inside/outside
    boolean mask and enables the inside-out diagnostics (analytic shapes
    only).  ``init_normals`` overrides the seeded random initialization.
    ``progress`` is called as progress(record) once per iteration.
    """
    cfg = config or OptimConfig()
    t0 = time.perf_counter()
    diagnostics = Diagnostics()
    diagram = build_diagram(cloud, cfg.box_scale)
    if cloud.areas is None:
        cloud = cloud.with_areas(estimate_areas(cloud, cfg.knn_k, diagnostics))
    normals = init_normals if init_normals is not None else init_random_normals(cloud.n, cfg.seed)
    x = normals.angles.copy().ravel()

    history = LbfgsHistory(cfg.lbfgs_memory)
    trace: list[IterationRecord] = []
    inside_out_trace: list[int | None] = []
    converged = False

    def evaluate(angles_flat, state_samples):
        st = EnergyState(cloud, NormalField(angles_flat.reshape(-1, 2)), state_samples)
        st.refresh()
        report = boundary_energy(st, cfg.delta)
        grad = energy_gradient(st, cfg.delta)
        return -report.total, -grad.ravel(), report

    iterations_run = 0
    for it in range(cfg.max_outer_iters):
        current = NormalField(x.reshape(-1, 2))
        samples = select_all_samples(diagram, current)

        f0, g0, report_new = evaluate(x, samples)
        if not (np.isfinite(f0) and np.isfinite(g0).all()):
            return OrientationResult(
                normals=current,
                energy_trace=trace,
                inside_out_trace=inside_out_trace,
                iterations_run=iterations_run,
                converged=False,
                wallclock=time.perf_counter() - t0,
                diagnostics=diagnostics,
            )
        gnorm = float(np.abs(g0).max())
        if gnorm <= cfg.grad_tol:
            converged = True
            break
        entry_total = -f0

        stalled = False
        for _ in range(cfg.inner_steps):
            direction = lbfgs_direction(history, g0)
            descent = float(direction @ g0)
            if descent >= 0.0:
                history.clear()
                direction = -g0
                descent = float(direction @ g0)
            assert descent < 0.0

            def phi(alpha, direction=direction):
                fa, ga, rep = evaluate(x + alpha * direction, samples)
                return fa, float(ga @ direction), (ga, rep)

            alpha0 = 1.0 if len(history) else 1.0 / max(1.0, gnorm)
            hit = _strong_wolfe(
                phi, f0, descent, alpha0, cfg.wolfe_c1, cfg.wolfe_c2, cfg.max_line_search
            )
            if hit is not None:
                alpha, f_new, _, (g_new, report_new) = hit
                x_new = x + alpha * direction
                history.push(x_new - x, g_new - g0)
                x, f0, g0 = x_new, f_new, g_new
            else:
                # strong Wolfe failed near a kink: backtracking
                # steepest-descent probe with shrinking steps
                step = 1e-3 / max(float(np.linalg.norm(g0)), 1e-12)
                moved = False
                for _ in range(13):
                    x_try = x - step * g0
                    f_try, g_try, report_try = evaluate(x_try, samples)
                    if f_try < f0:
                        history.clear()
                        x, f0, g0, report_new = x_try, f_try, g_try, report_try
                        moved = True
                        break
                    step *= 0.5
                if not moved:
                    # stuck for this probe selection; the next outer
                    # iteration re-selects and may free the iterate
                    stalled = True
                    break
            gnorm = float(np.abs(g0).max())
            if gnorm <= cfg.grad_tol:
                break

        iterations_run += 1
        total_new = report_new.total
        gnorm_new = float(np.abs(g0).max())
        if classifier is not None:
            inside_out, same_side = _count_inside_out(samples, classifier)
        else:
            inside_out = same_side = None
        record = IterationRecord(
            iteration=it,
            total=total_new,
            data_term=report_new.data_term,
            penalty_term=report_new.penalty_term,
            grad_norm=gnorm_new,
            inside_out=inside_out,
            same_side=same_side,
        )
        trace.append(record)
        inside_out_trace.append(inside_out)
        if progress is not None:
            progress(record)

        if gnorm_new <= cfg.grad_tol:
            converged = True
            break
        # relative energy progress across this outer iteration
        if abs(total_new - entry_total) <= cfg.energy_rel_tol * max(
            abs(total_new), 1e-12
        ):
            converged = True
            break
        if stalled:
            # progress was made before the stall; re-select and retry
            # (a stall with no progress trips the relative-energy test)
            history.clear()

    return OrientationResult(
        normals=NormalField(x.reshape(-1, 2)),
        energy_trace=trace,
        inside_out_trace=inside_out_trace,
        iterations_run=iterations_run,
        converged=converged,
        wallclock=time.perf_counter() - t0,
        diagnostics=diagnostics,
    )
