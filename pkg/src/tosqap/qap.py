"""Quadratic assignment layer: instances, objective, metrics, rounding.

A QAP instance asks for the permutation matrix X minimizing
trace(A X B^T X^T).  The continuous relaxation over the Birkhoff
polytope is handed to the splitting solver through one of two set
decompositions:

* split1: row-stochastic matrices intersected with column-stochastic
  matrices;
* split2: the [0, 1] box intersected with the doubly stochastic affine
  subspace.

The relax-and-round pipeline solves the relaxation, rounds the final
iterate to the nearest permutation through a linear assignment solve,
and reports the infeasibility / nonstationarity / assignment errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lap import Permutation, permutation_to_matrix, solve_lap_max, solve_lap_min
from .linalg import as_matrix, frobenius_inner, frobenius_norm, make_rng
from .oracles import GradientOracle
from .prox import (
    prox_affine_doubly_stochastic,
    prox_box01,
    prox_col_stochastic,
    prox_row_stochastic,
    project_affine_doubly_stochastic,
    project_birkhoff_alternating,
    project_col_stochastic,
)
from .solver import CompositeProblem, RunResult, SolverConfig, StepRule, run_tos

SPLIT1 = "split1"
SPLIT2 = "split2"
SPLITS = (SPLIT1, SPLIT2)


@dataclass(frozen=True)
class QapInstance:
    name: str
    a: np.ndarray
    b: np.ndarray
    best_known: Optional[float] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        b = as_matrix(self.b, "B")
        if a.shape[0] != a.shape[1] or a.shape != b.shape:
            raise ValueError(f"A and B must be square with equal shape, got {a.shape}, {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]


class QaplibParseError(ValueError):
    pass


def parse_qaplib(text: str, name: str = "instance") -> QapInstance:
    """Parse the whitespace-token QAPLIB layout: n, then A, then B."""
    tokens = text.split()
    if not tokens:
        raise QaplibParseError("empty instance file")
    try:
        n = int(tokens[0])
    except ValueError:
        raise QaplibParseError(f"token 1: expected integer dimension, got {tokens[0]!r}") from None
    if n <= 0:
        raise QaplibParseError(f"token 1: dimension must be positive, got {n}")
    expected = 1 + 2 * n * n
    if len(tokens) != expected:
        raise QaplibParseError(f"expected {expected} tokens for n={n}, found {len(tokens)}")
    values = np.empty(2 * n * n)
    for k, tok in enumerate(tokens[1:], start=2):
        try:
            values[k - 2] = float(tok)
        except ValueError:
            raise QaplibParseError(f"token {k}: expected number, got {tok!r}") from None
    a = values[: n * n].reshape(n, n)
    b = values[n * n:].reshape(n, n)
    return QapInstance(name=name, a=a, b=b)


def load_instance(path, best_known: Optional[float] = None) -> QapInstance:
    import os

    with open(path) as f:
        inst = parse_qaplib(f.read(), name=os.path.splitext(os.path.basename(path))[0])
    if best_known is not None:
        inst = QapInstance(name=inst.name, a=inst.a, b=inst.b, best_known=best_known)
    return inst


def load_best_known(path) -> dict[str, float]:
    """Sidecar table of lines "name value"."""
    table: dict[str, float] = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, value = line.split()
            table[name] = float(value)
    return table


def qap_objective(inst: QapInstance, x: np.ndarray) -> float:
    """trace(A X B^T X^T)."""
    x = _check_shape(inst, x)
    return float(np.trace(inst.a @ x @ inst.b.T @ x.T))


def qap_gradient(inst: QapInstance, x: np.ndarray) -> np.ndarray:
    """Gradient A X B^T + A^T X B of the quadratic objective."""
    x = _check_shape(inst, x)
    return inst.a @ x @ inst.b.T + inst.a.T @ x @ inst.b


def qap_oracle(inst: QapInstance) -> GradientOracle:
    return GradientOracle(
        value=lambda x: qap_objective(inst, x),
        gradient=lambda x: qap_gradient(inst, x),
    )


def permutation_objective(inst: QapInstance, perm: Permutation) -> float:
    """Combinatorial objective sum_ij A_ij B_{p(i) p(j)}."""
    p = list(perm.mapping)
    return float(sum(inst.a[i, j] * inst.b[p[i], p[j]] for i in range(inst.n) for j in range(inst.n)))


def estimate_smoothness(inst: QapInstance, tol: float = 1e-6, max_iters: int = 10000) -> float:
    """Smoothness constant of the objective: spectral norm of its Hessian map.

    The Hessian is the symmetric linear map D -> A D B^T + A^T D B on
    n x n matrices; power iteration on that map converges to the largest
    absolute eigenvalue, which equals the Lipschitz constant of the
    gradient.
    """
    if not (np.any(inst.a) and np.any(inst.b)):
        raise ValueError("smoothness constant is zero for an all-zero instance")
    rng = make_rng(0)
    d = rng.standard_normal((inst.n, inst.n))
    d /= frobenius_norm(d)
    lam = 0.0
    for _ in range(max_iters):
        nxt = inst.a @ d @ inst.b.T + inst.a.T @ d @ inst.b
        lam_next = frobenius_norm(nxt)
        if lam_next == 0.0:
            # Restart away from the null space.
            d = rng.standard_normal((inst.n, inst.n))
            d /= frobenius_norm(d)
            continue
        d = nxt / lam_next
        if abs(lam_next - lam) <= tol * max(lam_next, 1e-300):
            return lam_next
        lam = lam_next
    return lam


def split_diameter(n: int, split: str) -> float:
    """Euclidean diameter of the split's first set.

    Rows of the row-stochastic set move independently inside unit
    simplices of diameter sqrt(2), so split1 has diameter sqrt(2 n); the
    [0, 1] box of split2 has diameter n.
    """
    _check_split(split)
    if split == SPLIT1:
        return math.sqrt(2.0 * n)
    return float(n)


def gradient_bound(inst: QapInstance, split: str) -> float:
    """Upper bound on ||grad f|| over the split's first set.

    ||A X B^T + A^T X B||_F <= 2 ||A||_2 ||B||_2 ||X||_F, and ||X||_F is
    at most sqrt(n) on the row-stochastic set (rows in the simplex have
    norm <= 1) and at most n on the box.
    """
    _check_split(split)
    na = float(np.linalg.norm(inst.a, 2))
    nb = float(np.linalg.norm(inst.b, 2))
    x_norm = math.sqrt(inst.n) if split == SPLIT1 else float(inst.n)
    return 2.0 * na * nb * x_norm


def split_proxes(split: str):
    """(prox_g, prox_h) pair for the chosen decomposition."""
    _check_split(split)
    if split == SPLIT1:
        return prox_row_stochastic(), prox_col_stochastic()
    return prox_box01(), prox_affine_doubly_stochastic()


def infeasibility_error(x: np.ndarray, split: str) -> float:
    """dist(X, second set of the split) / sqrt(n)."""
    _check_split(split)
    x = as_matrix(x)
    if split == SPLIT1:
        proj = project_col_stochastic(x)
    else:
        proj = project_affine_doubly_stochastic(x)
    return frobenius_norm(x - proj) / math.sqrt(x.shape[0])


def nonstationarity_error(inst: QapInstance, x: np.ndarray) -> float:
    """|max over the Birkhoff polytope of <grad, X - P>| / max{f(X), 1}.

    The linear maximum over the polytope is attained at a permutation
    vertex, so the numerator reduces to a linear assignment solve on the
    gradient.
    """
    x = _check_shape(inst, x)
    grad = qap_gradient(inst, x)
    lap = solve_lap_min(grad)
    numerator = abs(frobenius_inner(grad, x) - lap.value)
    return numerator / max(qap_objective(inst, x), 1.0)


def round_to_permutation(x: np.ndarray) -> Permutation:
    """Frobenius-nearest permutation matrix, via maximizing <X, P>."""
    return solve_lap_max(as_matrix(x)).permutation


def assignment_error(rounded_value: float, best_known: Optional[float]) -> Optional[float]:
    """(rounded - best) / max{best, 1}; None when no reference value exists."""
    if best_known is None:
        return None
    return (rounded_value - best_known) / max(best_known, 1.0)


def initial_point(n: int, seed: int, iters: int = 1000) -> np.ndarray:
    """Near-doubly-stochastic start: project a seeded Gaussian matrix onto
    the Birkhoff polytope with 1000 alternating-projection rounds."""
    rng = make_rng(seed)
    return project_birkhoff_alternating(rng.standard_normal((n, n)), iters)


def build_problem(inst: QapInstance, split: str) -> CompositeProblem:
    prox_g, prox_h = split_proxes(split)
    return CompositeProblem(
        oracle=qap_oracle(inst),
        prox_g=prox_g,
        prox_h=prox_h,
        shape=(inst.n, inst.n),
        d_g=split_diameter(inst.n, split),
        g_f=gradient_bound(inst, split),
    )


@dataclass
class QapResult:
    instance: str
    split: str
    relaxed_iterate: np.ndarray
    permutation: Permutation
    relaxed_value: float
    rounded_value: float
    infeasibility: float
    nonstationarity: float
    assignment_err: Optional[float]
    run: RunResult


def relax_and_round(
    inst: QapInstance,
    split: str,
    config: SolverConfig,
    tol: Optional[float] = None,
    y1: Optional[np.ndarray] = None,
) -> QapResult:
    """Full pipeline: solve the relaxation with the splitting method, then round.

    When ``tol`` is given the solver stops as soon as both the
    infeasibility and nonstationarity errors drop below it, checked only
    at the power-of-two trace schedule.  A step rule of kind
    'inv_smoothness' with an unset constant is completed with the
    instance's own smoothness constant.
    """
    problem = build_problem(inst, split)
    step = config.step
    if step.kind == "inv_smoothness" and step.l_smooth == 0.0:
        step = StepRule.inv_smoothness(estimate_smoothness(inst))
        config = SolverConfig(
            iters=config.iters,
            step=step,
            output=config.output,
            seed=config.seed,
            trace_schedule=config.trace_schedule,
            snapshot_cap=config.snapshot_cap,
        )
    if y1 is None:
        y1 = initial_point(inst.n, config.seed)

    def metrics(z: np.ndarray) -> dict:
        return {
            "infeasibility": infeasibility_error(z, split),
            "nonstationarity": nonstationarity_error(inst, z),
        }

    stop = None
    if tol is not None:
        stop = lambda m: m["infeasibility"] < tol and m["nonstationarity"] < tol

    run = run_tos(problem, config, y1, metric_fn=metrics, stop_when=stop)
    z = run.z_out
    perm = round_to_permutation(z)
    rounded_value = qap_objective(inst, permutation_to_matrix(perm))
    return QapResult(
        instance=inst.name,
        split=split,
        relaxed_iterate=z,
        permutation=perm,
        relaxed_value=qap_objective(inst, z),
        rounded_value=rounded_value,
        infeasibility=infeasibility_error(z, split),
        nonstationarity=nonstationarity_error(inst, z),
        assignment_err=assignment_error(rounded_value, inst.best_known),
        run=run,
    )


def _check_shape(inst: QapInstance, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (inst.n, inst.n):
        raise ValueError(f"expected shape {(inst.n, inst.n)}, got {x.shape}")
    return x


def _check_split(split: str) -> None:
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
