"""Dataset split planning: disjoint, exhaustive train/val/test assignment.

The default strategy keeps volunteer pairs intact (no pair contributes to
two splits), which evaluates generalization to unseen people; a plain
random per-sample split is available for ablations.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .prng import keyed_rng

SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SplitPlan:
    strategy: str = "by_pair"  # "by_pair" or "random"
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("by_pair", "random"):
            raise ConfigError(f"unknown split strategy {self.strategy!r}")
        fractions = (self.train, self.val, self.test)
        if any(f < 0 for f in fractions):
            raise ConfigError("split fractions must be non-negative")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fractions)}")

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "train": self.train,
            "val": self.val,
            "test": self.test,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplitPlan":
        return cls(**{k: data[k] for k in ("strategy", "train", "val", "test", "seed") if k in data})


def _allocate(total: int, fractions: tuple[float, float, float]) -> list[int]:
    """Largest-remainder allocation; every nonzero fraction gets at least
    one unit when there are enough units to go around."""
    nonzero = sum(1 for f in fractions if f > 0)
    if total < nonzero:
        raise ConfigError(
            f"cannot split {total} units across {nonzero} nonempty splits"
        )
    quotas = [f * total for f in fractions]
    counts = [int(q) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    for _ in range(total - sum(counts)):
        i = max(range(3), key=lambda k: (remainders[k], -k))
        counts[i] += 1
        remainders[i] = -1.0
    for i, f in enumerate(fractions):
        if f > 0 and counts[i] == 0:
            donor = max(range(3), key=lambda k: counts[k])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_assignment(entries: list[dict], plan: SplitPlan) -> list[str]:
    """Split name for each manifest entry, in entry order.

    Deterministic given the plan seed; ``by_pair`` assigns whole pairs to
    one split, ``random`` shuffles samples directly.
    """
    if plan.strategy == "by_pair":
        pairs = sorted({e["pair_id"] for e in entries})
        counts = _allocate(len(pairs), plan.fractions)
        order = keyed_rng(plan.seed, "split", "pairs").permutation(len(pairs))
        shuffled = [pairs[i] for i in order]
        pair_split: dict[str, str] = {}
        start = 0
        for name, count in zip(SPLIT_NAMES, counts):
            for pair in shuffled[start : start + count]:
                pair_split[pair] = name
            start += count
        return [pair_split[e["pair_id"]] for e in entries]

    counts = _allocate(len(entries), plan.fractions)
    order = keyed_rng(plan.seed, "split", "samples").permutation(len(entries))
    assignment = [""] * len(entries)
    start = 0
    for name, count in zip(SPLIT_NAMES, counts):
        for idx in order[start : start + count]:
            assignment[idx] = name
        start += count
    return assignment


def split_dataset(manifest: dict, plan: SplitPlan) -> dict[str, dict]:
    """Partition a manifest into train/val/test manifests.

    The three sample lists are disjoint and exhaustive; re-running with
    the same plan reproduces the same assignment.
    """
    entries = manifest["samples"]
    assignment = split_assignment(entries, plan)
    out = {}
    for name in SPLIT_NAMES:
        picked = [
            dict(entry, split=name)
            for entry, split in zip(entries, assignment)
            if split == name
        ]
        sub = {k: v for k, v in manifest.items() if k != "samples"}
        sub["samples"] = picked
        sub["split"] = name
        out[name] = sub
    return out
