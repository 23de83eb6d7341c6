"""Configuration data classes."""

from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple, Union

Schedule = List[Tuple[int, float]]


def _check_schedule(schedule: Schedule, what: str) -> None:
    if not schedule:
        raise ValueError(f"{what} schedule must not be empty")
    thresholds = [int(t) for t, _ in schedule]
    if thresholds[0] != 0:
        raise ValueError(f"{what} schedule must start at 0")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError(f"{what} schedule thresholds must be strictly increasing")
    if any(rate <= 0 for _, rate in schedule):
        raise ValueError(f"{what} schedule rates must be positive")


def schedule_value(schedule: Schedule, index: int) -> float:
    """Value of the last entry whose threshold is <= index."""
    value = schedule[0][1]
    for threshold, rate in schedule:
        if index >= threshold:
            value = rate
    return value


def as_schedule(value: Union[float, Schedule]) -> Schedule:
    """A bare number is a constant schedule."""
    if isinstance(value, (int, float)):
        return [(0, float(value))]
    return [(int(t), float(r)) for t, r in value]


@dataclass
class DatasetSpec:
    """Synthetic dataset generator settings."""
    kind: Literal["blobs", "digits"] = "blobs"
    dim: int = 64
    classes: int = 10
    samples_per_class: int = 200
    sigma: float = 0.05
    separation: float = 6.0
    latent_dim: int = 8
    # Extra classes generated for class-disjoint surrogates; 0 disables.
    ood_classes: int = 0
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2 or self.classes < 2:
            raise ValueError("Dataset needs dim >= 2 and classes >= 2")
        if self.samples_per_class < 1 or self.sigma <= 0:
            raise ValueError("Dataset needs samples_per_class >= 1 and sigma > 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class AdversarialTrainingConfig:
    """Inner l-inf PGD used while training."""
    epsilon: float = 0.02
    step_size: float = 0.005
    steps: int = 7

    def __post_init__(self):
        if self.epsilon <= 0 or self.step_size <= 0 or self.steps < 1:
            raise ValueError("Adversarial training needs epsilon, step_size > 0 and steps >= 1")


@dataclass
class TrainConfig:
    """Optimizer settings for one model."""
    epochs: int = 50
    batch_size: int = 64
    optimizer: Literal["sgd", "adam"] = "adam"
    schedule: Schedule = field(default_factory=lambda: [(0, 0.01), (40, 0.001)])
    weight_decay: float = 0.0
    seed: int = 0
    adversarial: Optional[AdversarialTrainingConfig] = None

    def __post_init__(self):
        self.schedule = as_schedule(self.schedule)
        _check_schedule(self.schedule, "Learning-rate")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("Training needs epochs >= 0 and batch_size >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"Unknown optimizer: {self.optimizer}")


@dataclass
class ModelSpec:
    """Architecture and training recipe for a named classifier."""
    name: str
    hidden: List[int] = field(default_factory=lambda: [64, 64])
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    # Surrogates only: train on the class-disjoint split.
    ood: bool = False


@dataclass
class TargetSpec:
    """The attacked model and its adversarially trained twin."""
    model: ModelSpec = field(default_factory=lambda: ModelSpec(name="target"))
    robust: Optional[AdversarialTrainingConfig] = field(default_factory=AdversarialTrainingConfig)


@dataclass
class WhiteboxAttackConfig:
    """PGD / C&W settings (epsilon, step size, steps, restarts, initialization)."""
    attack: Literal["pgd", "cw"] = "pgd"
    # None: linf for PGD, l2 for C&W
    norm: Optional[Literal["linf", "l2"]] = None
    epsilon: float = 0.02
    step_size: Union[float, Schedule] = 0.005
    steps: int = 20
    restarts: int = 1
    loss: Literal["margin", "cross_entropy"] = "margin"
    optimizer: Literal["sign", "adam"] = "sign"
    init: Literal["uniform", "odi", "multitargeted"] = "uniform"
    odi_steps: int = 2
    odi_step_size: Optional[float] = None
    early_stop: bool = True
    cw_max_iterations: int = 100
    cw_search_steps: int = 10
    cw_learning_rate: float = 0.1
    cw_initial_const: float = 0.01
    cw_confidence: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be >= 1")
        if self.odi_steps < 0:
            raise ValueError("odi_steps must be >= 0")
        self.step_size = as_schedule(self.step_size)
        _check_schedule(self.step_size, "Step-size")
        if self.odi_step_size is None:
            self.odi_step_size = self.epsilon
        if self.odi_step_size <= 0:
            raise ValueError("odi_step_size must be positive")
        if self.attack not in ("pgd", "cw"):
            raise ValueError(f"Unknown white-box attack: {self.attack}")
        if self.norm is None:
            self.norm = "l2" if self.attack == "cw" else "linf"
        if self.norm not in ("linf", "l2"):
            raise ValueError(f"Unknown norm: {self.norm}")
        if self.attack == "cw" and self.norm != "l2":
            raise ValueError("C&W minimizes an l2 perturbation; its starts use norm l2")
        if self.init not in ("uniform", "odi", "multitargeted"):
            raise ValueError(f"Unknown init: {self.init}")


@dataclass
class BlackboxAttackConfig:
    """SimBA / Boundary / RGF settings."""
    attack: Literal["simba", "boundary", "rgf"] = "simba"
    sampler: Literal["pixel", "gaussian", "ods", "multitargeted"] = "ods"
    surrogates: Literal["full", "ood"] = "full"
    # Restrict the pool to these surrogates (by name); None uses every one of the kind.
    surrogate_names: Optional[List[str]] = None
    budget: int = 20000
    targeted: bool = False
    norm: Literal["linf", "l2"] = "l2"
    epsilon: float = 0.25
    step_size: float = 0.2
    max_iters: int = 10000
    samples: int = 10
    smoothing: float = 0.005
    spherical_step: float = 0.01
    shrink: float = 0.01
    adapt_factor: float = 1.5
    adapt_window: int = 20

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.samples < 1 or self.smoothing <= 0:
            raise ValueError("RGF needs samples >= 1 and smoothing > 0")
        if self.attack == "boundary" and self.sampler == "pixel":
            raise ValueError("Boundary attack samples gaussian, ods or multitargeted directions")
        if self.sampler == "multitargeted" and self.surrogates == "ood":
            raise ValueError("MultiTargeted directions need surrogates that share the target's classes")
        if self.surrogate_names is not None:
            if not self.surrogate_names:
                raise ValueError("surrogate_names must name at least one surrogate")
            if len(set(self.surrogate_names)) != len(self.surrogate_names):
                raise ValueError("surrogate_names must not repeat a surrogate")


@dataclass
class AttackSpec:
    """One named entry of the attack suite."""
    name: str
    target: Literal["natural", "robust"] = "natural"
    whitebox: Optional[WhiteboxAttackConfig] = None
    blackbox: Optional[BlackboxAttackConfig] = None

    def __post_init__(self):
        if (self.whitebox is None) == (self.blackbox is None):
            raise ValueError(f"Attack '{self.name}' needs exactly one of whitebox/blackbox")
        if self.target not in ("natural", "robust"):
            raise ValueError(f"Attack '{self.name}' has unknown target: {self.target}")

    @property
    def family(self) -> str:
        config = self.whitebox or self.blackbox
        return config.attack


@dataclass
class DiversitySpec:
    """Start-point and transfer diversity measurements."""
    enabled: bool = True
    inputs: int = 100
    restarts: int = 10
    epsilon: float = 0.02
    odi_steps: int = 2
    transfer_norm: float = 0.25


@dataclass
class ExperimentConfig:
    """Top-level configuration."""
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    target: TargetSpec = field(default_factory=TargetSpec)
    surrogates: List[ModelSpec] = field(default_factory=list)
    attacks: List[AttackSpec] = field(default_factory=list)
    diversity: DiversitySpec = field(default_factory=DiversitySpec)
    budgets: List[int] = field(default_factory=lambda: [500, 1000, 2000])
    eval_size: int = 300
    seed: int = 0
    jobs: int = 1
    output_dir: str = "./odskit-out"
    log_level: str = "INFO"
    # None: <output_dir>/logs
    log_path: Optional[str] = None

    def __post_init__(self):
        if any(s.ood for s in self.surrogates) and self.dataset.ood_classes < 2:
            raise ValueError("OOD surrogates need dataset.ood_classes >= 2")
        names = [a.name for a in self.attacks]
        if len(set(names)) != len(names):
            raise ValueError("Attack names must be unique")
        kinds = {s.name: s.ood for s in self.surrogates}
        for attack in self.attacks:
            config = attack.blackbox
            if config is None or config.surrogate_names is None:
                continue
            for name in config.surrogate_names:
                if name not in kinds:
                    raise ValueError(f"Attack '{attack.name}' names unknown surrogate '{name}'")
                if kinds[name] != (config.surrogates == "ood"):
                    raise ValueError(
                        f"Attack '{attack.name}' uses {config.surrogates} surrogates, '{name}' is not one"
                    )
