"""White-box and black-box attacks."""

from odskit.attacks.result import AttackResult, lp_norm
from odskit.attacks.whitebox import (
    RestartOutcome, StartOutsideBallError, cw_attack, equal_budget_odi, gradient_evaluations,
    odi_init, pgd_attack, run_with_restarts, tuned_schedule
)
from odskit.attacks.blackbox import (
    InitializationError, QueryOutcome, boundary_attack, make_sampler, rgf_attack,
    rgf_estimate_gradient, simba_attack
)
