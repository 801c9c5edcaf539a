"""Greedy forward ensemble selection over hard majority votes.

Members vote with multiplicity; vote ties go to the tied class backed by the
member with the lowest cross-validation error (then lowest model index).
Because a two-member hard vote always collapses onto the stronger member,
the greedy loop tolerates additions that leave the error unchanged when they
introduce a new member, and returns the shortest prefix that achieved the
best error, so complementary trios can still assemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from metaselect.errors import ContractViolationError
from metaselect.learners.metrics import balanced_error_rate


@dataclass(frozen=True)
class Ensemble:
    """Voting ensemble: (model index, multiplicity) pairs plus member errors."""

    members: tuple[tuple[int, int], ...]
    member_errors: tuple[float, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        if any(mult < 1 for _, mult in self.members):
            raise ValueError("multiplicities must be >= 1")
        if len(self.member_errors) != len(self.members):
            raise ValueError("member_errors must align with members")

    @property
    def model_indices(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.members)

    @property
    def distinct_size(self) -> int:
        return len(self.members)

    @property
    def total_multiplicity(self) -> int:
        return sum(m for _, m in self.members)

    def to_dict(self) -> dict:
        return {
            "members": [
                {"index": j, "multiplicity": mult, "cv_error": err}
                for (j, mult), err in zip(self.members, self.member_errors)
            ]
        }

    @staticmethod
    def from_dict(d: dict) -> "Ensemble":
        recs = d["members"]
        return Ensemble(
            members=tuple((int(r["index"]), int(r["multiplicity"])) for r in recs),
            member_errors=tuple(float(r["cv_error"]) for r in recs),
        )


def majority_vote(
    predictions: np.ndarray,
    multiplicities,
    errors,
    model_indices,
    n_classes: int,
) -> np.ndarray:
    """Multiplicity-weighted hard vote over member prediction rows."""
    predictions = np.atleast_2d(np.asarray(predictions, dtype=int))
    mult = np.asarray(multiplicities, dtype=int)
    counts = np.zeros((predictions.shape[1], n_classes), dtype=int)
    for row, m in zip(predictions, mult):
        np.add.at(counts, (np.arange(row.size), row), m)
    winners = np.argmax(counts, axis=1)
    top = counts.max(axis=1)
    tied_rows = np.flatnonzero((counts == top[:, None]).sum(axis=1) > 1)
    if tied_rows.size:
        order = sorted(
            range(predictions.shape[0]),
            key=lambda i: (errors[i], model_indices[i]),
        )
        for i in tied_rows:
            tied = set(np.flatnonzero(counts[i] == top[i]).tolist())
            for m in order:
                if int(predictions[m, i]) in tied:
                    winners[i] = predictions[m, i]
                    break
    return winners


def ensemble_selection(
    candidates,
    errors,
    predictions,
    y_true,
    n_classes: int | None = None,
    max_members: int = 25,
) -> Ensemble:
    """Greedy forward selection (with replacement) over hard votes.

    Starts from the single best candidate by cv error, repeatedly adds the
    candidate minimizing the ensemble balanced error rate on the held-out
    predictions (ties prefer unseen members, then lower error, then lower
    index), and returns the shortest prefix attaining the minimum. The
    result's selection-set error never exceeds the best single candidate's.
    """
    candidates = [int(c) for c in candidates]
    if not candidates:
        raise ValueError("need at least one candidate")
    errors = {int(c): float(e) for c, e in zip(candidates, errors)}
    preds = {int(c): np.asarray(p, dtype=int) for c, p in zip(candidates, predictions)}
    y_true = np.asarray(y_true, dtype=int)
    if n_classes is None:
        n_classes = int(y_true.max()) + 1

    def ensemble_ber(member_counts: dict[int, int]) -> float:
        idx = sorted(member_counts)
        rows = np.stack([preds[j] for j in idx])
        vote = majority_vote(
            rows,
            [member_counts[j] for j in idx],
            [errors[j] for j in idx],
            idx,
            n_classes,
        )
        return balanced_error_rate(y_true, vote, n_classes)

    first = min(candidates, key=lambda c: (errors[c], c))
    members: dict[int, int] = {first: 1}
    current = ensemble_ber(members)
    history = [dict(members)]
    bers = [current]

    while sum(members.values()) < max_members:
        scored = []
        for c in candidates:
            trial = dict(members)
            trial[c] = trial.get(c, 0) + 1
            scored.append((ensemble_ber(trial), c not in members, c))
        ber, is_new, c = min(scored, key=lambda t: (t[0], not t[1], errors[t[2]], t[2]))
        if ber > current or (ber == current and not is_new):
            break
        members[c] = members.get(c, 0) + 1
        current = ber
        history.append(dict(members))
        bers.append(ber)

    best_at = int(np.argmin(bers))  # earliest minimum: the shortest best prefix
    chosen = history[best_at]
    idx = sorted(chosen)
    return Ensemble(
        members=tuple((j, chosen[j]) for j in idx),
        member_errors=tuple(errors[j] for j in idx),
    )


class TrainedEnsemble:
    """A voting ensemble whose members carry fitted learners."""

    def __init__(self, ensemble: Ensemble, fitted_learners: dict):
        self.ensemble = ensemble
        self._learners = dict(fitted_learners)
        for j, _ in ensemble.members:
            learner = self._learners.get(j)
            if learner is None or not hasattr(learner, "classes_"):
                raise ContractViolationError(
                    f"ensemble member {j} has no fitted learner"
                )

    def predict(self, X) -> np.ndarray:
        rows = []
        n_classes = 0
        for j, _ in self.ensemble.members:
            pred = self._learners[j].predict(X)
            n_classes = max(n_classes, int(pred.max()) + 1)
            rows.append(pred)
        return majority_vote(
            np.stack(rows),
            [m for _, m in self.ensemble.members],
            list(self.ensemble.member_errors),
            list(self.ensemble.model_indices),
            n_classes,
        )
