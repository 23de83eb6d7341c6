"""Query-counted black-box attacks.

SimBA (score oracle), Boundary Attack (decision oracle) and RGF gradient
estimation (score oracle), each driven by a pluggable direction sampler:
pixel basis, Gaussian, ODS over a surrogate ensemble, or MultiTargeted.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Tuple

import numpy as np

from odskit import numcore
from odskit.attacks.result import AttackResult, lp_norm
from odskit.attacks.whitebox import project_ball
from odskit.ods import (
    SurrogateEnsemble, multitargeted_direction, pick_surrogate, robust_ods_vector, sample_ods
)
from odskit.services.oracle import (
    BudgetExhaustedError, DecisionOracle, OracleModeError, QueryOracle, ScoreOracle
)

logger = logging.getLogger("odskit")

MAX_INIT_TRIES = 1000
BLEND_SEARCH_STEPS = 10
MIN_SHRINK = 1e-7
MAX_SHRINK = 0.5
MAX_SPHERICAL_STEP = 1.0


class InitializationError(RuntimeError):
    """No adversarial starting point for the Boundary Attack."""
    pass


@dataclass
class QueryRecord:
    """One trace row: objective (SimBA, RGF) or distance (Boundary) after ``queries`` calls."""
    queries: int
    value: float


@dataclass
class QueryOutcome:
    result: AttackResult
    trace: List[QueryRecord] = field(default_factory=list)


def _orthonormal_rows(columns: np.ndarray) -> np.ndarray:
    """Orthonormal rows spanning the (D, q) column batch via QR."""
    if columns.shape[1] <= columns.shape[0]:
        q, _ = np.linalg.qr(columns)
        return q.T
    # More directions than dimensions cannot be orthonormal.
    return (columns / np.linalg.norm(columns, axis=0)).T


class Sampler(Protocol):
    def draw(self, x: np.ndarray, y: int) -> np.ndarray: ...

    def draw_many(self, x: np.ndarray, y: int, count: int) -> np.ndarray: ...


class PixelBasisSampler:
    """Standard basis vectors, a fresh random permutation per epoch."""

    kind = "pixel"

    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.rng = rng
        self._order = np.empty(0, dtype=np.int64)
        self._cursor = 0

    def _next_index(self) -> int:
        if self._cursor >= self._order.size:
            self._order = self.rng.permutation(self.dim)
            self._cursor = 0
        index = int(self._order[self._cursor])
        self._cursor += 1
        return index

    def draw(self, x: np.ndarray, y: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self._next_index()] = 1.0
        return v

    def draw_many(self, x: np.ndarray, y: int, count: int) -> np.ndarray:
        return np.stack([self.draw(x, y) for _ in range(count)])


class GaussianSampler:
    """N(0, I) directions scaled to unit norm; batches are QR-orthonormalized."""

    kind = "gaussian"

    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.rng = rng

    def draw(self, x: np.ndarray, y: int) -> np.ndarray:
        v = self.rng.normal(size=self.dim)
        return v / np.linalg.norm(v)

    def draw_many(self, x: np.ndarray, y: int, count: int) -> np.ndarray:
        return _orthonormal_rows(self.rng.normal(size=(self.dim, count)))


class OdsSampler:
    """ODS vectors at the current point from a randomly picked surrogate.

    A batch is orthonormalized like the Gaussian one, so an RGF estimate
    is the projection of the gradient onto the span of the draws.
    """

    kind = "ods"

    def __init__(self, ensemble: SurrogateEnsemble, rng: np.random.Generator):
        self.ensemble = ensemble
        self.rng = rng

    def draw(self, x: np.ndarray, y: int) -> np.ndarray:
        return sample_ods(x, self.ensemble, self.rng)

    def draw_many(self, x: np.ndarray, y: int, count: int) -> np.ndarray:
        return _orthonormal_rows(np.stack([self.draw(x, y) for _ in range(count)], axis=1))


class MultiTargetedSampler:
    """Like ODS, but w_d = e_t - e_y for a random surrogate class t != y."""

    kind = "multitargeted"

    def __init__(self, ensemble: SurrogateEnsemble, rng: np.random.Generator):
        self.ensemble = ensemble
        self.rng = rng

    def draw(self, x: np.ndarray, y: int) -> np.ndarray:
        num_classes = self.ensemble.num_classes
        if not 0 <= y < num_classes:
            raise ValueError(f"Label {y} is not a class of the surrogates ({num_classes} classes)")
        model = pick_surrogate(self.ensemble, self.rng)
        others = [c for c in range(num_classes) if c != y]

        def resample():
            return multitargeted_direction(y, others[int(self.rng.integers(len(others)))], num_classes)

        vector, _ = robust_ods_vector(x, model, resample(), self.rng, resample=resample)
        return vector

    def draw_many(self, x: np.ndarray, y: int, count: int) -> np.ndarray:
        return _orthonormal_rows(np.stack([self.draw(x, y) for _ in range(count)], axis=1))


def make_sampler(kind: str, dim: int, rng: np.random.Generator,
                 ensemble: Optional[SurrogateEnsemble] = None) -> Sampler:
    if kind == "pixel":
        return PixelBasisSampler(dim, rng)
    if kind == "gaussian":
        return GaussianSampler(dim, rng)
    if kind in ("ods", "multitargeted"):
        if ensemble is None:
            raise ValueError(f"The {kind} sampler needs surrogate models")
        if ensemble.input_dim != dim:
            raise numcore.DimensionError(f"Surrogates take {ensemble.input_dim} features, inputs have {dim}")
        return OdsSampler(ensemble, rng) if kind == "ods" else MultiTargetedSampler(ensemble, rng)
    raise ValueError(f"Unknown sampler: {kind}")


def _objective_head(y: int, target: Optional[int]):
    """Margin loss when untargeted, negated cross-entropy toward ``target`` otherwise."""
    if target is None:
        return numcore.MarginHead(y)
    return numcore.TargetedCrossEntropyHead(target)


def _head_value(head, logits: np.ndarray) -> float:
    return float(head.values(np.atleast_2d(logits))[0])


def _is_success(logits: np.ndarray, y: int, target: Optional[int]) -> bool:
    predicted = int(np.argmax(logits))
    return predicted == target if target is not None else predicted != y


def _require(oracle: QueryOracle, kind: type) -> None:
    if not isinstance(oracle, kind):
        raise OracleModeError(f"{kind.__name__} required, got {type(oracle).__name__}")


def simba_attack(oracle: ScoreOracle, x: np.ndarray, y: int, sampler: Sampler,
                 step_size: float, max_iters: int,
                 target: Optional[int] = None) -> QueryOutcome:
    """SimBA: per iteration try x + eps*q, then x - eps*q; keep the first that improves.

    At most two queries per iteration. Budget exhaustion ends the run as a
    failure reporting the full budget.
    """
    _require(oracle, ScoreOracle)
    head = _objective_head(y, target)
    x_adv = np.asarray(x, dtype=np.float64).copy()
    trace: List[QueryRecord] = []
    success = False

    try:
        logits = oracle.scores(x_adv)
        best = _head_value(head, logits)
        success = _is_success(logits, y, target)
        trace.append(QueryRecord(oracle.queries, best))
        for _ in range(max_iters):
            if success:
                break
            q = sampler.draw(x_adv, y)
            for alpha in (step_size, -step_size):
                candidate = np.clip(x_adv + alpha * q, 0.0, 1.0)
                logits = oracle.scores(candidate)
                value = _head_value(head, logits)
                if value > best:
                    x_adv, best = candidate, value
                    success = _is_success(logits, y, target)
                    trace.append(QueryRecord(oracle.queries, best))
                    break
    except BudgetExhaustedError:
        logger.debug(f"SimBA exhausted its budget of {oracle.budget} queries")
        return QueryOutcome(
            AttackResult(adversarial=x_adv, success=False,
                         perturbation_norm=float(np.linalg.norm(x_adv - x)),
                         queries=oracle.budget, best_loss=best if trace else float("-inf")),
            trace,
        )

    return QueryOutcome(
        AttackResult(adversarial=x_adv, success=success,
                     perturbation_norm=float(np.linalg.norm(x_adv - x)),
                     queries=oracle.queries, best_loss=best),
        trace,
    )


def shrink_toward(x: np.ndarray, candidate: np.ndarray, shrink: float) -> np.ndarray:
    """Move ``candidate`` radially toward ``x`` so its distance drops by a factor (1 - shrink)."""
    return x + (1.0 - shrink) * (candidate - x)


def boundary_proposal(x: np.ndarray, x_adv: np.ndarray, direction: np.ndarray,
                      spherical_step: float, shrink: float) -> np.ndarray:
    """One Boundary Attack candidate.

    The direction is made orthogonal to (x - x_adv), scaled to
    spherical_step * d, added, projected back to the sphere of radius d
    around x, contracted by ``shrink`` and clipped to [0, 1].
    """
    diff = x - x_adv
    distance = np.linalg.norm(diff)
    unit = diff / distance
    orthogonal = direction - np.dot(direction, unit) * unit
    length = np.linalg.norm(orthogonal)
    if length <= 1e-12 * distance:
        orthogonal = np.zeros_like(direction)
    else:
        orthogonal = orthogonal * (spherical_step * distance / length)
    candidate = x_adv + orthogonal
    offset = candidate - x
    candidate = x + offset * (distance / np.linalg.norm(offset))
    return np.clip(shrink_toward(x, candidate, shrink), 0.0, 1.0)


def _find_start(oracle: DecisionOracle, x: np.ndarray, y: int, target: Optional[int],
                starting_point: Optional[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    if starting_point is not None:
        start = np.asarray(starting_point, dtype=np.float64)
        if not oracle.is_adversarial(start, y, target):
            raise InitializationError("Provided starting point is not adversarial")
    else:
        if target is not None:
            raise InitializationError("Targeted Boundary Attack needs a starting image of the target class")
        for _ in range(MAX_INIT_TRIES):
            start = rng.uniform(0.0, 1.0, size=x.shape)
            if oracle.is_adversarial(start, y, target):
                break
        else:
            raise InitializationError(f"No adversarial random image in {MAX_INIT_TRIES} tries")

    # Blend search toward x: hi stays adversarial.
    lo, hi = 0.0, 1.0
    for _ in range(BLEND_SEARCH_STEPS):
        mid = (lo + hi) / 2.0
        if oracle.is_adversarial((1.0 - mid) * x + mid * start, y, target):
            hi = mid
        else:
            lo = mid
    return (1.0 - hi) * x + hi * start


def boundary_attack(oracle: DecisionOracle, x: np.ndarray, y: int, sampler: Sampler,
                    steps: int, rng: np.random.Generator,
                    spherical_step: float = 0.01, shrink: float = 0.01,
                    adapt_factor: float = 1.5, adapt_window: int = 20,
                    target: Optional[int] = None,
                    starting_point: Optional[np.ndarray] = None) -> QueryOutcome:
    """Decision-based Boundary Attack with a pluggable direction sampler.

    One query per step; a candidate is accepted iff it is still adversarial.
    Every ``adapt_window`` steps both step sizes grow by ``adapt_factor``
    when more than half the candidates were accepted and shrink by it when
    fewer than a quarter were. The trace holds (queries, distance) at every
    accepted step plus the final state.
    """
    _require(oracle, DecisionOracle)
    x = np.asarray(x, dtype=np.float64)
    trace: List[QueryRecord] = []
    try:
        x_adv = _find_start(oracle, x, y, target, starting_point, rng)
    except BudgetExhaustedError:
        logger.debug("Budget exhausted before an adversarial start was found")
        return QueryOutcome(
            AttackResult(adversarial=x.copy(), success=False, perturbation_norm=float("inf"),
                         queries=oracle.budget),
            trace,
        )

    distance = float(np.linalg.norm(x_adv - x))
    trace.append(QueryRecord(oracle.queries, distance))
    accepted_in_window = 0
    steps_in_window = 0

    try:
        for _ in range(steps):
            if distance == 0.0 or shrink < MIN_SHRINK:
                break
            direction = sampler.draw(x_adv, y)
            candidate = boundary_proposal(x, x_adv, direction, spherical_step, shrink)
            steps_in_window += 1
            if oracle.is_adversarial(candidate, y, target):
                x_adv = candidate
                distance = float(np.linalg.norm(x_adv - x))
                accepted_in_window += 1
                trace.append(QueryRecord(oracle.queries, distance))
            if steps_in_window == adapt_window:
                rate = accepted_in_window / adapt_window
                if rate > 0.5:
                    spherical_step = min(spherical_step * adapt_factor, MAX_SPHERICAL_STEP)
                    shrink = min(shrink * adapt_factor, MAX_SHRINK)
                elif rate < 0.25:
                    spherical_step /= adapt_factor
                    shrink /= adapt_factor
                accepted_in_window = steps_in_window = 0
    except BudgetExhaustedError:
        pass

    trace.append(QueryRecord(oracle.queries, distance))
    return QueryOutcome(
        AttackResult(adversarial=x_adv, success=True, perturbation_norm=distance,
                     queries=oracle.queries),
        trace,
    )


def _estimate(oracle: ScoreOracle, x: np.ndarray, y: int, head, sampler: Sampler,
              samples: int, smoothing: float) -> Tuple[np.ndarray, np.ndarray]:
    if samples < 1 or smoothing <= 0:
        raise ValueError("RGF needs samples >= 1 and smoothing > 0")
    base_logits = oracle.scores(x)
    base = _head_value(head, base_logits)
    directions = sampler.draw_many(x, y, samples)
    estimate = np.zeros_like(x)
    for u in directions:
        estimate += (_head_value(head, oracle.scores(x + smoothing * u)) - base) / smoothing * u
    return estimate / samples, base_logits


def rgf_estimate_gradient(oracle: ScoreOracle, x: np.ndarray, y: int, sampler: Sampler,
                          samples: int = 10, smoothing: float = 0.005,
                          target: Optional[int] = None) -> np.ndarray:
    """(1/q) * sum_i [(L(x + mu u_i) - L(x)) / mu] u_i using q + 1 queries."""
    _require(oracle, ScoreOracle)
    estimate, _ = _estimate(oracle, np.asarray(x, dtype=np.float64), y,
                            _objective_head(y, target), sampler, samples, smoothing)
    return estimate


def rgf_attack(oracle: ScoreOracle, x: np.ndarray, y: int, sampler: Sampler, norm: str,
               epsilon: float, step_size: float, max_iters: int,
               samples: int = 10, smoothing: float = 0.005,
               target: Optional[int] = None) -> QueryOutcome:
    """Projected ascent on RGF estimates inside the epsilon-ball.

    Each round queries the current point (the success check) and q
    perturbations, then steps along sign(g) for l-inf or g / ||g|| for l2.
    When max_iters ends the run, one more query checks the last iterate.
    """
    _require(oracle, ScoreOracle)
    x = np.asarray(x, dtype=np.float64)
    x_adv = x.copy()
    trace: List[QueryRecord] = []
    if epsilon <= 0:
        return QueryOutcome(AttackResult(adversarial=x_adv, success=False, perturbation_norm=0.0), trace)

    head = _objective_head(y, target)
    success = False
    try:
        for _ in range(max_iters):
            estimate, logits = _estimate(oracle, x_adv, y, head, sampler, samples, smoothing)
            trace.append(QueryRecord(oracle.queries, _head_value(head, logits)))
            if _is_success(logits, y, target):
                success = True
                break
            if norm == "linf":
                step = np.sign(estimate)
            else:
                length = np.linalg.norm(estimate)
                step = estimate / length if length > 0 else estimate
            x_adv = project_ball(x_adv + step_size * step, x, epsilon, norm)
        else:
            # The last step's iterate has not been checked yet.
            if max_iters > 0 and oracle.remaining > 0:
                logits = oracle.scores(x_adv)
                trace.append(QueryRecord(oracle.queries, _head_value(head, logits)))
                success = _is_success(logits, y, target)
    except BudgetExhaustedError:
        logger.debug(f"RGF exhausted its budget of {oracle.budget} queries")
        return QueryOutcome(
            AttackResult(adversarial=x_adv, success=False,
                         perturbation_norm=lp_norm(x_adv - x, norm), queries=oracle.budget),
            trace,
        )

    return QueryOutcome(
        AttackResult(adversarial=x_adv, success=success,
                     perturbation_norm=lp_norm(x_adv - x, norm), queries=oracle.queries,
                     best_loss=trace[-1].value if trace else float("-inf")),
        trace,
    )
