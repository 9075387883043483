"""Category-covering subset selection ranked by object and category counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence

from .errors import BudgetTooSmall


@dataclass(frozen=True)
class IndexEntry:
    image_id: str
    categories: FrozenSet[int]
    bbox_count: int

    def __post_init__(self):
        object.__setattr__(self, "categories", frozenset(self.categories))
        if not self.bbox_count >= len(self.categories) >= 1:
            raise ValueError(f"{self.image_id}: need bbox_count >= |categories| >= 1")


@dataclass(frozen=True)
class SelectionParams:
    budget: Optional[int] = None
    reduction_factor: Optional[float] = None

    def __post_init__(self):
        if (self.budget is None) == (self.reduction_factor is None):
            raise ValueError("give exactly one of budget / reduction_factor")
        if self.reduction_factor is not None and not 0 < self.reduction_factor <= 1:
            raise ValueError("reduction_factor must be in (0, 1]")

    def resolve(self, n_images: int) -> int:
        if self.budget is not None:
            return self.budget
        return math.ceil(self.reduction_factor * n_images)


def priority_score(entry: IndexEntry) -> int:
    return entry.bbox_count + len(entry.categories)


def _rank_key(entry: IndexEntry):
    return (-priority_score(entry), entry.image_id)


def select_subset(index: Sequence[IndexEntry], params: SelectionParams) -> List[str]:
    """Pick images so every category appears at least once, then fill by score.

    Coverage walks categories in ascending id order and, for each category
    not yet covered, takes the best-ranked image holding it. Remaining
    slots go to the best-ranked unpicked images. Ranking is by descending
    score with ties broken by ``image_id``.
    """
    budget = params.resolve(len(index))
    ranked = sorted(index, key=_rank_key)
    all_cats = sorted(set().union(*(e.categories for e in index))) if index else []

    picked: List[str] = []
    picked_set = set()
    covered = set()
    for cat in all_cats:
        if cat in covered:
            continue
        best = next(e for e in ranked if cat in e.categories and e.image_id not in picked_set)
        picked.append(best.image_id)
        picked_set.add(best.image_id)
        covered |= best.categories

    if len(picked) > budget:
        # categories reachable within budget, in the coverage order above
        reachable = set()
        for image_id in picked[:budget]:
            reachable |= next(e.categories for e in index if e.image_id == image_id)
        raise BudgetTooSmall(set(all_cats) - reachable)

    for e in ranked:
        if len(picked) >= budget:
            break
        if e.image_id not in picked_set:
            picked.append(e.image_id)
            picked_set.add(e.image_id)
    return picked
