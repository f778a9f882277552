"""Three-operator splitting solver.

Implements the splitting iteration

    z_t = prox_{gamma g}(y_t)
    x_t = prox_{gamma h}(2 z_t - y_t - gamma u_t)
    y_{t+1} = y_t - z_t + x_t

with u_t either the exact gradient at z_t or a minibatch estimator,
together with the fixed step-size rules that back the convergence
guarantees, per-iteration certificates, and a product-space variant for
an arbitrary number of nonsmooth terms.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .linalg import draw_uniform_index, frobenius_inner, frobenius_norm, make_rng
from .oracles import GradientOracle, StochasticGradientOracle, minibatch_gradient
from .prox import ProxOperator


def step_size_lipschitz(d_g: float, g_f: float, l_g: float, l_h: float, t_total: int) -> float:
    """Fixed step D_g / (2 (G_f + L_g + L_h) T^(2/3)) for Lipschitz g and h."""
    _check_positive(d_g=d_g, denom=g_f + l_g + l_h, t_total=t_total)
    return d_g / (2.0 * (g_f + l_g + l_h) * t_total ** (2.0 / 3.0))


def step_size_mixed(d_set: float, g_f: float, l_h: float, t_total: int) -> float:
    """Fixed step D / (2 (G_f + L_h) T^(2/3)) when g is an indicator."""
    return step_size_lipschitz(d_set, g_f, 0.0, l_h, t_total)


def step_size_indicators(d_set: float, g_f: float, t_total: int) -> float:
    """Fixed step D / (2 G_f T^(2/3)) when both g and h are indicators."""
    return step_size_lipschitz(d_set, g_f, 0.0, 0.0, t_total)


def _check_positive(**kwargs: float) -> None:
    for name, v in kwargs.items():
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class StepRule:
    """Step-size policy for a solver run.

    kind is one of 'lipschitz', 'mixed', 'indicators' (theory rules using
    the problem constants), 'fixed' (explicit gamma), or 'inv_smoothness'
    (gamma = 1 / L with L the smoothness constant of f).
    """

    kind: str
    gamma: float = 0.0
    l_smooth: float = 0.0

    @staticmethod
    def fixed(gamma: float) -> "StepRule":
        _check_positive(gamma=gamma)
        return StepRule(kind="fixed", gamma=gamma)

    @staticmethod
    def inv_smoothness(l_smooth: float = 0.0) -> "StepRule":
        """Step 1/L. Leave ``l_smooth`` at 0 to have the pipeline estimate it."""
        if l_smooth != 0.0:
            _check_positive(l_smooth=l_smooth)
        return StepRule(kind="inv_smoothness", l_smooth=l_smooth)

    def resolve(self, problem: "CompositeProblem", t_total: int) -> float:
        if self.kind == "fixed":
            return self.gamma
        if self.kind == "inv_smoothness":
            return 1.0 / self.l_smooth
        if self.kind == "lipschitz":
            return step_size_lipschitz(problem.d_g, problem.g_f, problem.l_g, problem.l_h, t_total)
        if self.kind == "mixed":
            return step_size_mixed(problem.d_g, problem.g_f, problem.l_h, t_total)
        if self.kind == "indicators":
            return step_size_indicators(problem.d_g, problem.g_f, t_total)
        raise ValueError(f"unknown step rule kind: {self.kind}")


@dataclass(frozen=True)
class CompositeProblem:
    """Problem data for minimizing f(x) + g(x) + h(x).

    The constants d_g (diameter of dom g), g_f (gradient bound on dom g)
    and the Lipschitz constants l_g, l_h feed the theory step sizes; they
    may be left at 0 when a fixed or 1/L step is used instead.
    """

    oracle: GradientOracle
    prox_g: ProxOperator
    prox_h: ProxOperator
    shape: tuple[int, int]
    d_g: float = 0.0
    g_f: float = 0.0
    l_g: float = 0.0
    l_h: float = 0.0
    stochastic: Optional[StochasticGradientOracle] = None
    batch: int = 1

    def __post_init__(self):
        for name in ("d_g", "g_f", "l_g", "l_h"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")


#: Maximum T for which every z_t is kept in memory under the random-iterate
#: policy; larger runs are replayed deterministically to recover z_tau.
SNAPSHOT_CAP = 4096


@dataclass(frozen=True)
class SolverConfig:
    iters: int
    step: StepRule
    output: str = "last"  # 'last' or 'random'
    seed: int = 0
    trace_schedule: Optional[frozenset[int]] = None
    snapshot_cap: int = SNAPSHOT_CAP

    def __post_init__(self):
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.output not in ("last", "random"):
            raise ValueError(f"output policy must be 'last' or 'random', got {self.output!r}")

    def schedule(self) -> frozenset[int]:
        if self.trace_schedule is not None:
            return self.trace_schedule
        return power_of_two_schedule(self.iters)


def power_of_two_schedule(t_total: int) -> frozenset[int]:
    """Indices 1, 2, 4, 8, ... plus the final iteration."""
    s = set()
    t = 1
    while t <= t_total:
        s.add(t)
        t *= 2
    s.add(t_total)
    return frozenset(s)


@dataclass
class TraceRecord:
    t: int
    objective: float
    coupling: float
    certificate: float
    infeasibility: Optional[float] = None
    nonstationarity: Optional[float] = None
    elapsed: float = 0.0


@dataclass
class RunResult:
    z_out: np.ndarray
    tau: Optional[int]
    trace: list[TraceRecord]
    wall_time: float
    iterations_run: int
    z_last: np.ndarray
    x_last: np.ndarray
    y_last: np.ndarray


class DivergenceError(RuntimeError):
    """Raised when an iterate stops being finite."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration


def certificate_residual(
    gamma: float,
    u: np.ndarray,
    x: np.ndarray,
    z: np.ndarray,
    y: np.ndarray,
    y_next: np.ndarray,
    x_ref: np.ndarray,
    g_value: Callable[[np.ndarray], float],
    h_value: Callable[[np.ndarray], float],
) -> float:
    """One-iteration descent certificate; nonpositive for convex g, h.

    Returns LHS - RHS of

        <u, x - x_ref> + g(z) - g(x_ref) + h(x) - h(x_ref)
            <= (1/2 gamma) (||y - x_ref||^2 - ||y_next - x_ref||^2
                            - ||x - z||^2)

    which holds for every genuine iteration of the splitting whenever g
    and h are convex and x_ref lies in dom(f + g + h).
    """
    lhs = (
        frobenius_inner(u, x - x_ref)
        + g_value(z)
        - g_value(x_ref)
        + h_value(x)
        - h_value(x_ref)
    )
    rhs = (
        frobenius_norm(y - x_ref) ** 2
        - frobenius_norm(y_next - x_ref) ** 2
        - frobenius_norm(x - z) ** 2
    ) / (2.0 * gamma)
    return lhs - rhs


def stationarity_gap(
    grad: np.ndarray,
    z: np.ndarray,
    linear_minimizer: Callable[[np.ndarray], np.ndarray],
    g_value: Optional[Callable[[np.ndarray], float]] = None,
    h_value: Optional[Callable[[np.ndarray], float]] = None,
) -> float:
    """Variational-inequality residual max_x <grad, z - x> (+ g + h terms).

    ``linear_minimizer`` must return the exact minimizer of <grad, x>
    over the feasible set; for indicator g, h the gap then reduces to
    <grad, z> - min_x <grad, x>.
    """
    s = linear_minimizer(grad)
    gap = frobenius_inner(grad, z - s)
    if g_value is not None:
        gap += g_value(z) - g_value(s)
    if h_value is not None:
        gap += h_value(z) - h_value(s)
    return gap


IterationHook = Callable[[int, float, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], None]


def run_tos(
    problem: CompositeProblem,
    config: SolverConfig,
    y1: np.ndarray,
    metric_fn: Optional[Callable[[np.ndarray], dict]] = None,
    stop_when: Optional[Callable[[dict], bool]] = None,
    iteration_hook: Optional[IterationHook] = None,
) -> RunResult:
    """Run the three-operator splitting iteration from ``y1``.

    Metrics from ``metric_fn(z_t)`` are recorded at the trace schedule;
    if ``stop_when(metrics)`` returns True at one of those checkpoints
    the loop exits early.  ``iteration_hook`` receives the full tuple
    (t, gamma, u_t, z_t, x_t, y_t, y_{t+1}) of every iteration.
    """
    y1 = np.asarray(y1, dtype=np.float64)
    if y1.shape != problem.shape:
        raise ValueError(f"y1 shape {y1.shape} != problem shape {problem.shape}")

    t_total = config.iters
    gamma = config.step.resolve(problem, t_total)
    schedule = config.schedule()
    rng = make_rng(config.seed)

    keep_snapshots = config.output == "random" and t_total <= config.snapshot_cap
    snapshots: dict[int, np.ndarray] = {}

    t_start = time.perf_counter()
    state = _iterate(
        problem, gamma, y1, t_total, rng, schedule,
        metric_fn, stop_when, iteration_hook,
        snapshots if keep_snapshots else None,
    )
    z, x, y, trace, t_done = state

    tau: Optional[int] = None
    if config.output == "random":
        tau = draw_uniform_index(rng, t_done)
        if keep_snapshots:
            z_out = snapshots[tau]
        else:
            # Replay deterministically up to tau; the gradient noise stream
            # restarts from the same seed, so the prefix is identical.
            z_out = _iterate(
                problem, gamma, y1, tau, make_rng(config.seed), frozenset(),
                None, None, None, None,
            )[0]
    else:
        z_out = z

    return RunResult(
        z_out=z_out,
        tau=tau,
        trace=trace,
        wall_time=time.perf_counter() - t_start,
        iterations_run=t_done,
        z_last=z,
        x_last=x,
        y_last=y,
    )


def _iterate(problem, gamma, y1, t_total, rng, schedule,
             metric_fn, stop_when, iteration_hook, snapshots):
    y = np.array(y1, dtype=np.float64, copy=True)
    z = x = y
    trace: list[TraceRecord] = []
    t_start = time.perf_counter()
    t_done = 0
    for t in range(1, t_total + 1):
        z = problem.prox_g(y, gamma)
        if problem.stochastic is not None:
            u = minibatch_gradient(problem.stochastic, z, problem.batch, rng)
        else:
            u = problem.oracle.gradient(z)
        x = problem.prox_h(2.0 * z - y - gamma * u, gamma)
        y_next = y - z + x
        if not np.all(np.isfinite(y_next)):
            raise DivergenceError(t)
        if snapshots is not None:
            snapshots[t] = z
        if iteration_hook is not None:
            iteration_hook(t, gamma, u, z, x, y, y_next)
        t_done = t
        if t in schedule:
            cert = certificate_residual(
                gamma, u, x, z, y, y_next, y1,
                problem.prox_g.value, problem.prox_h.value,
            )
            rec = TraceRecord(
                t=t,
                objective=problem.oracle.value(z),
                coupling=frobenius_norm(x - z),
                certificate=cert,
                elapsed=time.perf_counter() - t_start,
            )
            metrics = metric_fn(z) if metric_fn is not None else None
            if metrics is not None:
                rec.infeasibility = metrics.get("infeasibility")
                rec.nonstationarity = metrics.get("nonstationarity")
            trace.append(rec)
            if stop_when is not None and metrics is not None and stop_when(metrics):
                y = y_next
                break
        y = y_next
    return z, x, y, trace, t_done


@dataclass
class ProductSpaceResult:
    x_out: np.ndarray
    tau: Optional[int]
    trace: list[TraceRecord]
    block_residuals: list[float]
    wall_time: float


def run_tos_product_space(
    oracle: GradientOracle,
    prox_list: Sequence[ProxOperator],
    config: SolverConfig,
    y1: np.ndarray,
) -> ProductSpaceResult:
    """Consensus splitting over m nonsmooth terms plus one smooth term.

    Maintains m + 1 blocks: block 0 carries the smooth term (its prox is
    the identity), blocks 1..m the nonsmooth terms.  Each iteration
    computes all block proxes, averages the reflected blocks minus a
    gradient step at z^(0), and moves every dual variable toward the
    consensus point.  All blocks start from ``y1``.
    """
    if len(prox_list) == 0:
        raise ValueError("prox_list must contain at least one operator")
    if config.step.kind not in ("fixed", "inv_smoothness"):
        raise ValueError("product-space runs require a fixed or 1/L step rule")
    gamma = config.step.resolve(None, config.iters)  # type: ignore[arg-type]
    m = len(prox_list)
    ys = [np.array(y1, dtype=np.float64, copy=True) for _ in range(m + 1)]
    schedule = config.schedule()
    rng = make_rng(config.seed)
    keep = config.output == "random" and config.iters <= config.snapshot_cap
    snapshots: dict[int, np.ndarray] = {}
    trace: list[TraceRecord] = []
    block_res: list[float] = []

    t_start = time.perf_counter()
    x = ys[0]
    for t in range(1, config.iters + 1):
        zs = [ys[0]] + [prox_list[i - 1](ys[i], gamma) for i in range(1, m + 1)]
        acc = sum(2.0 * zs[i] - ys[i] for i in range(m + 1))
        x = (acc - gamma * oracle.gradient(zs[0])) / (m + 1)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(t)
        for i in range(m + 1):
            ys[i] = ys[i] - zs[i] + x
        if keep:
            snapshots[t] = x
        if t in schedule:
            resid = max(frobenius_norm(zs[i] - x) for i in range(m + 1))
            block_res.append(resid)
            trace.append(TraceRecord(
                t=t,
                objective=oracle.value(zs[0]),
                coupling=resid,
                certificate=math.nan,
                elapsed=time.perf_counter() - t_start,
            ))

    tau: Optional[int] = None
    if config.output == "random":
        tau = draw_uniform_index(rng, config.iters)
        x_out = snapshots[tau] if keep else x
    else:
        x_out = x
    return ProductSpaceResult(
        x_out=x_out,
        tau=tau,
        trace=trace,
        block_residuals=block_res,
        wall_time=time.perf_counter() - t_start,
    )
