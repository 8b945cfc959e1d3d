"""Balanced multi-task sampling and control-code prompts.

Task sampling probabilities follow a size-tempered multinomial: with dataset
fractions r_i = n_i / sum(n), tasks are drawn with q_i proportional to
r_i ** alpha.  Exponents below 1 up-weight small datasets; alpha = 1 is
proportional sampling and alpha = 0 is uniform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bpe import SubwordTokenizer
from .objectives import TrainingInstance

DEFAULT_ALPHA = 0.7


class EmptyTaskError(ValueError):
    """Every task in a mixture must contain at least one example."""


class ControlCodeError(ValueError):
    """Raised when a control code is applied to an already-prefixed instance."""


def mixture_probs(sizes: list[int], alpha: float) -> list[float]:
    """Sampling probabilities from dataset sizes, tempered by ``alpha``."""
    if any(n <= 0 for n in sizes):
        raise EmptyTaskError(f"all task sizes must be positive, got {sizes}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    n = np.asarray(sizes, dtype=np.float64)
    r = n / n.sum()
    w = r**alpha
    return list(w / w.sum())


@dataclass(frozen=True)
class TaskSpec:
    name: str
    size: int
    control_code: str = ""
    path: str | None = None


@dataclass(frozen=True)
class TaskMixture:
    tasks: tuple[TaskSpec, ...]
    alpha: float = DEFAULT_ALPHA
    _probs: tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        probs = mixture_probs([t.size for t in self.tasks], self.alpha)
        object.__setattr__(self, "_probs", tuple(probs))

    @property
    def rates(self) -> list[float]:
        total = sum(t.size for t in self.tasks)
        return [t.size / total for t in self.tasks]

    @property
    def probs(self) -> list[float]:
        return list(self._probs)

    def task_named(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    @classmethod
    def from_config(cls, path: str | Path) -> "TaskMixture":
        """Mixture config: {"alpha": float, "tasks": [{name, path, control_code, size?}]}.

        When ``size`` is omitted it is counted from the dataset file.
        """
        with open(path, encoding="utf-8") as f:
            cfg = json.load(f)
        tasks = []
        for entry in cfg["tasks"]:
            size = entry.get("size")
            if size is None:
                with open(entry["path"], encoding="utf-8") as df:
                    size = sum(1 for line in df if line.strip())
            tasks.append(
                TaskSpec(
                    name=entry["name"],
                    size=size,
                    control_code=entry.get("control_code", ""),
                    path=entry.get("path"),
                )
            )
        return cls(tasks=tuple(tasks), alpha=cfg.get("alpha", DEFAULT_ALPHA))


def sample_task(mixture: TaskMixture, rng: np.random.Generator) -> str:
    """Draw one task name according to the mixture probabilities."""
    i = rng.choice(len(mixture.tasks), p=np.asarray(mixture._probs))
    return mixture.tasks[int(i)].name


def apply_control_code(
    instance: TrainingInstance, task: TaskSpec, tokenizer: SubwordTokenizer
) -> TrainingInstance:
    """Prepend the task's prompt ids right after [CLS]; the target is untouched."""
    if not task.control_code:
        return instance
    if instance.control_code is not None:
        raise ControlCodeError(
            f"instance already carries control code {instance.control_code!r}"
        )
    prompt_ids = tokenizer.encode(task.control_code, use_specials=False)
    if not instance.source_ids or instance.source_ids[0] != tokenizer.cls_id:
        raise ValueError("instance source does not start with [CLS]")
    return TrainingInstance(
        source_ids=(instance.source_ids[0], *prompt_ids, *instance.source_ids[1:]),
        target_ids=instance.target_ids,
        objective=instance.objective,
        tag_labels=instance.tag_labels,
        control_code=task.control_code,
    )
