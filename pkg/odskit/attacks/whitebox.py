"""White-box attacks: PGD with uniform / ODI / MultiTargeted starts, C&W l2, restarts."""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from odskit import numcore
from odskit.attacks.result import AttackResult, lp_norm
from odskit.config_schema import Schedule, WhiteboxAttackConfig, schedule_value
from odskit.models.mlp import MlpClassifier, forward_logits
from odskit.ods import multitargeted_direction, robust_ods_vector, sample_direction

logger = logging.getLogger("odskit")

BALL_TOLERANCE = 1e-9


class StartOutsideBallError(ValueError):
    """PGD start point is not inside the epsilon-ball."""
    pass


def project_ball(candidate: np.ndarray, origin: np.ndarray, epsilon: float, norm: str) -> np.ndarray:
    """Project onto B_eps(origin), then clip to the pixel box [0, 1]."""
    if candidate.shape != origin.shape:
        raise numcore.DimensionError(f"Candidate {candidate.shape} vs origin {origin.shape}")
    if norm == "linf":
        projected = np.clip(candidate, origin - epsilon, origin + epsilon)
    elif norm == "l2":
        delta = candidate - origin
        length = np.linalg.norm(delta)
        if length > epsilon:
            delta = delta * (epsilon / length)
        projected = origin + delta
    else:
        raise ValueError(f"Unknown norm: {norm}")
    # Clipping moves every coordinate toward the (in-box) origin, so the ball bound still holds.
    return np.clip(projected, 0.0, 1.0)


def in_ball(point: np.ndarray, origin: np.ndarray, epsilon: float, norm: str,
            tol: float = BALL_TOLERANCE) -> bool:
    inside_box = np.all(point >= -tol) and np.all(point <= 1.0 + tol)
    return bool(inside_box and lp_norm(point - origin, norm) <= epsilon + tol)


def step_size_at(schedule: Schedule, k: int) -> float:
    """Step size in effect at iteration k."""
    return schedule_value(schedule, k)


def uniform_init(x: np.ndarray, epsilon: float, norm: str, rng: np.random.Generator) -> np.ndarray:
    """Uniform in the l-inf box, or uniform in the l2 ball; clipped to [0, 1]."""
    if norm == "linf":
        return np.clip(x + rng.uniform(-epsilon, epsilon, size=x.shape), 0.0, 1.0)
    direction = rng.normal(size=x.shape)
    direction /= np.linalg.norm(direction)
    radius = epsilon * rng.uniform() ** (1.0 / x.size)
    return np.clip(x + radius * direction, 0.0, 1.0)


def gaussian_sphere_init(x: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Naive C&W start: x + eps * w / ||w||_2 with w ~ N(0, I), clipped."""
    w = rng.normal(size=x.shape)
    return np.clip(x + epsilon * w / np.linalg.norm(w), 0.0, 1.0)


def _loss_head(loss: str, y: int):
    if loss == "margin":
        return numcore.MarginHead(y)
    if loss == "cross_entropy":
        return numcore.CrossEntropyHead(y)
    raise ValueError(f"Unknown loss: {loss}")


def odi_init(x_org: np.ndarray, model: MlpClassifier, config: WhiteboxAttackConfig,
             rng: np.random.Generator, label: Optional[int] = None,
             restart_index: int = 0) -> np.ndarray:
    """Output-diversified start point.

    Starts uniformly in the ball and takes ``odi_steps`` projected steps
    along sign(v_ODS) (l-inf) or v_ODS (l2) with w_d fixed for the restart.
    The MultiTargeted variant uses w_d = e_t - e_y with t cycling over the
    other classes by restart index.
    """
    if config.init not in ("odi", "multitargeted"):
        raise ValueError(f"odi_init needs init 'odi' or 'multitargeted', got {config.init!r}")
    num_classes = model.num_classes
    if config.init == "multitargeted":
        if label is None:
            raise ValueError("MultiTargeted initialization needs the true label")
        others = [c for c in range(num_classes) if c != label]
        w_d = multitargeted_direction(label, others[restart_index % len(others)], num_classes)
    else:
        w_d = sample_direction(num_classes, rng)

    x = uniform_init(x_org, config.epsilon, config.norm, rng)
    for _ in range(config.odi_steps):
        v, w_d = robust_ods_vector(x, model, w_d, rng)
        step = np.sign(v) if config.norm == "linf" else v
        x = project_ball(x + config.odi_step_size * step, x_org, config.epsilon, config.norm)
        assert in_ball(x, x_org, config.epsilon, config.norm)
    return x


def make_start(model: MlpClassifier, x: np.ndarray, y: int, config: WhiteboxAttackConfig,
               rng: np.random.Generator, restart_index: int = 0) -> np.ndarray:
    """Start point for one restart according to ``config.init``."""
    if config.init in ("odi", "multitargeted"):
        return odi_init(x, model, config, rng, label=y, restart_index=restart_index)
    if config.attack == "cw":
        return gaussian_sphere_init(x, config.epsilon, rng)
    return uniform_init(x, config.epsilon, config.norm, rng)


def pgd_attack(target: MlpClassifier, x: np.ndarray, y: int, start: np.ndarray,
               config: WhiteboxAttackConfig) -> AttackResult:
    """Projected gradient ascent on the configured loss.

    sign optimizer: x <- Proj(x + eta_k * sign(grad)) for l-inf and
    x <- Proj(x + eta_k * grad / ||grad||) for l2. adam optimizer replaces
    the step direction with Adam's bias-corrected ratio, eta_k acting as
    the learning rate.
    """
    if not in_ball(start, x, config.epsilon, config.norm):
        raise StartOutsideBallError("PGD start lies outside the epsilon-ball")
    head = _loss_head(config.loss, y)
    x_adv = start.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8

    best_loss = float(head.values(np.atleast_2d(forward_logits(target, x_adv)))[0])
    best_x = x_adv.copy()
    success = int(np.argmax(forward_logits(target, x_adv))) != y
    success_step = 0 if success else None
    evaluations = 0

    for k in range(config.steps):
        if success and config.early_stop:
            break
        _, grad = numcore.value_and_input_grad(target, x_adv, head)
        evaluations += 1
        g = grad.wrt_input
        eta = step_size_at(config.step_size, k)
        if config.optimizer == "adam":
            m = beta1 * m + (1 - beta1) * g
            v = beta2 * v + (1 - beta2) * g * g
            step = (m / (1 - beta1 ** (k + 1))) / (np.sqrt(v / (1 - beta2 ** (k + 1))) + adam_eps)
        elif config.norm == "linf":
            step = np.sign(g)
        else:
            length = np.linalg.norm(g)
            step = g / length if length > 0 else np.zeros_like(g)
        x_adv = project_ball(x_adv + eta * step, x, config.epsilon, config.norm)
        assert in_ball(x_adv, x, config.epsilon, config.norm)

        logits = forward_logits(target, x_adv)
        loss = float(head.values(np.atleast_2d(logits))[0])
        if int(np.argmax(logits)) != y and not success:
            success, success_step = True, k + 1
            best_x, best_loss = x_adv.copy(), max(best_loss, loss)
        elif loss > best_loss and not success:
            best_loss, best_x = loss, x_adv.copy()

    return AttackResult(
        adversarial=best_x,
        success=success,
        perturbation_norm=lp_norm(best_x - x, config.norm),
        queries=evaluations,
        best_loss=best_loss,
        success_step=success_step,
    )


def cw_attack(target: MlpClassifier, x: np.ndarray, y: int, init: np.ndarray,
              config: WhiteboxAttackConfig) -> AttackResult:
    """Carlini-Wagner l2 with tanh box constraint and a binary search over c.

    Minimizes ||x' - x||^2 + c * max(f_y - max_{i!=y} f_i, -kappa) with Adam
    in tanh space, starting every search step from ``init``. Returns the
    smallest-norm misclassified point seen.
    """
    if int(np.argmax(forward_logits(target, x))) != y:
        return AttackResult(adversarial=x.copy(), success=True, perturbation_norm=0.0,
                            best_loss=numcore.margin_loss(forward_logits(target, x), y))
    head = numcore.MarginHead(y)
    w0 = np.arctanh(np.clip(2.0 * init - 1.0, -1.0 + 1e-6, 1.0 - 1e-6))
    lower, upper, const = 0.0, 1e10, config.cw_initial_const
    best_norm, best_adv, best_margin = np.inf, None, float("-inf")
    beta1, beta2, adam_eps = 0.9, 0.999, 1e-8
    evaluations = 0

    for search in range(config.cw_search_steps):
        w = w0.copy()
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        found = False
        for it in range(config.cw_max_iterations + 1):
            x_adv = (np.tanh(w) + 1.0) / 2.0
            margin, grad = numcore.value_and_input_grad(target, x_adv, head)
            evaluations += 1
            if margin > 0 and margin >= config.cw_confidence:
                found = True
                dist = float(np.linalg.norm(x_adv - x))
                if dist < best_norm:
                    best_norm, best_adv, best_margin = dist, x_adv.copy(), margin
            if it == config.cw_max_iterations:
                break
            g_x = 2.0 * (x_adv - x)
            if margin < config.cw_confidence:
                g_x = g_x - const * grad.wrt_input
            g_w = g_x * (1.0 - np.tanh(w) ** 2) / 2.0
            m = beta1 * m + (1 - beta1) * g_w
            v = beta2 * v + (1 - beta2) * g_w * g_w
            t = it + 1
            w = w - config.cw_learning_rate * (m / (1 - beta1 ** t)) / (np.sqrt(v / (1 - beta2 ** t)) + adam_eps)

        if found:
            upper = min(upper, const)
            const = (lower + upper) / 2.0
        else:
            lower = max(lower, const)
            const = (lower + upper) / 2.0 if upper < 1e9 else const * 10.0
        logger.debug(f"C&W search {search}: found={found}, next c={const:g}, best l2={best_norm:.4g}")

    if best_adv is None:
        return AttackResult(adversarial=x.copy(), success=False, perturbation_norm=float("inf"),
                            queries=evaluations)
    return AttackResult(
        adversarial=best_adv,
        success=True,
        perturbation_norm=float(np.linalg.norm(best_adv - x)),
        queries=evaluations,
        best_loss=best_margin,
    )


@dataclass
class RestartRecord:
    restart: int
    success: bool
    perturbation_norm: float
    best_loss: float


@dataclass
class RestartOutcome:
    result: AttackResult
    trace: List[RestartRecord] = field(default_factory=list)


def restart_rngs(rng: np.random.Generator, count: int) -> List[np.random.Generator]:
    """Independent per-restart generators derived from ``rng``."""
    seed = np.random.SeedSequence(int(rng.integers(2 ** 63)))
    return [np.random.default_rng(child) for child in seed.spawn(count)]


def run_with_restarts(target: MlpClassifier, x: np.ndarray, y: int,
                      config: WhiteboxAttackConfig, rng: np.random.Generator) -> RestartOutcome:
    """Run ``config.attack`` from ``config.restarts`` start points.

    PGD: success if any restart succeeds; stops at the first success.
    C&W: keeps the smallest successful l2 perturbation over all restarts.
    """
    odi_cost = config.odi_steps if config.init in ("odi", "multitargeted") else 0
    trace: List[RestartRecord] = []
    best: Optional[AttackResult] = None
    evaluations = 0

    for r, restart_rng in enumerate(restart_rngs(rng, config.restarts)):
        start = make_start(target, x, y, config, restart_rng, restart_index=r)
        if config.attack == "cw":
            result = cw_attack(target, x, y, start, config)
        else:
            result = pgd_attack(target, x, y, start, config)
        evaluations += result.queries + odi_cost
        trace.append(RestartRecord(r, result.success, result.perturbation_norm, result.best_loss))

        if config.attack == "cw":
            if best is None or (result.success and result.perturbation_norm < best.perturbation_norm):
                best = result
        else:
            if best is None or result.success or (not best.success and result.best_loss > best.best_loss):
                best = result
            if result.success:
                break

    best = replace(best, queries=evaluations, restarts_used=len(trace))
    return RestartOutcome(result=best, trace=trace)


def pgd_batch(model: MlpClassifier, x: np.ndarray, y: np.ndarray, epsilon: float,
              step_size: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Batched l-inf PGD on cross-entropy from a uniform start (adversarial training)."""
    head = numcore.CrossEntropyHead(y)
    x_adv = np.clip(x + rng.uniform(-epsilon, epsilon, size=x.shape), 0.0, 1.0)
    for _ in range(steps):
        _, grad = numcore.value_and_input_grad(model, x_adv, head)
        x_adv = np.clip(x_adv + step_size * np.sign(grad.wrt_input), x - epsilon, x + epsilon)
        x_adv = np.clip(x_adv, 0.0, 1.0)
    return x_adv


def gradient_evaluations(config: WhiteboxAttackConfig) -> int:
    """Worst-case gradient evaluations of a PGD run over all restarts."""
    odi_cost = config.odi_steps if config.init in ("odi", "multitargeted") else 0
    return config.restarts * (config.steps + odi_cost)


def equal_budget_odi(config: WhiteboxAttackConfig) -> WhiteboxAttackConfig:
    """ODI-PGD-(k - N_ODI) matching the gradient budget of PGD-k."""
    steps = config.steps - config.odi_steps
    if steps < 1:
        raise ValueError(f"PGD-{config.steps} leaves no steps after {config.odi_steps} ODI steps")
    return replace(config, init="odi", steps=steps)


def tuned_schedule(epsilon: float, steps: int, optimizer: str = "sign") -> Schedule:
    """Step-size schedule starting large and decaying x0.1 twice.

    sign: eta_0 = eps, decays at N/3 and 2N/3.
    adam: learning rate eps/3, decays at N/2 and 3N/4.
    """
    if optimizer == "adam":
        points = [(0, epsilon / 3.0), (steps // 2, epsilon / 30.0), ((3 * steps) // 4, epsilon / 300.0)]
    else:
        points = [(0, epsilon), (steps // 3, epsilon / 10.0), ((2 * steps) // 3, epsilon / 100.0)]
    schedule: Schedule = []
    for threshold, value in points:
        if not schedule or threshold > schedule[-1][0]:
            schedule.append((threshold, value))
    return schedule
