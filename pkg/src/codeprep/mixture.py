"""Deterministic interleaving of domain streams to hit target token
ratios.

The scheduler is deficit round-robin on cumulative token counts: at every
step the domain whose emitted/target ratio is smallest goes next (ties
broken by domain name). This keeps each domain's absolute ratio error
below max_doc_tokens/total_tokens, with no randomness at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

from .ingest import SourceDocument
from .sentinels import TokenBudgeter

DEFAULT_MAX_EPOCHS = 4.0

# The selected pretraining mixture: 70% code, 20% text, 10% math.
DEFAULT_TARGETS = {"code": 0.7, "text": 0.2, "math": 0.1}


class MixtureError(ValueError):
    pass


@dataclass
class MixturePlan:
    targets: dict[str, float]
    available: dict[str, int]
    epochs: dict[str, float]
    expected_total: int

    def report(self, achieved: dict[str, int] | None = None) -> dict:
        out = {}
        for d, t in sorted(self.targets.items()):
            entry = {"target": t, "available_tokens": self.available.get(d, 0),
                     "epochs": self.epochs.get(d, 0.0)}
            if achieved is not None:
                total = sum(achieved.values()) or 1
                entry["tokens"] = achieved.get(d, 0)
                entry["achieved"] = achieved.get(d, 0) / total
            out[d] = entry
        return out


def plan_mixture(available: dict[str, int], targets: dict[str, float],
                 max_epochs: float = DEFAULT_MAX_EPOCHS) -> MixturePlan:
    """Largest total such that every domain's demand fits within
    available * max_epochs."""
    targets = {d: t for d, t in targets.items() if t > 0}
    total_target = sum(targets.values())
    if abs(total_target - 1.0) > 1e-9:
        targets = {d: t / total_target for d, t in targets.items()}
    for d, t in targets.items():
        if available.get(d, 0) <= 0:
            raise MixtureError(f"domain {d!r} has target {t} but no available tokens")
    expected_total = int(min(available[d] * max_epochs / t for d, t in targets.items()))
    epochs = {d: min(max_epochs, targets[d] * expected_total / available[d])
              for d in targets}
    return MixturePlan(targets=targets,
                       available={d: available[d] for d in targets},
                       epochs=epochs, expected_total=expected_total)


@dataclass
class _DomainState:
    docs: Sequence[SourceDocument]
    tokens: list[int]
    emitted: int = 0
    cursor: int = 0
    passes: int = 0


def sample_interleaved(streams: dict[str, Sequence[SourceDocument]],
                       plan: MixturePlan,
                       budgeter: TokenBudgeter | None = None,
                       achieved: dict[str, int] | None = None,
                       ) -> Iterator[SourceDocument]:
    """Emit documents until expected_total tokens, deficit round-robin.

    Domains restart from their beginning when their planned epochs exceed
    one. A domain running out before the plan completes (more passes than
    ceil(epochs)) is a plan violation and raises.
    """
    if set(streams) != set(plan.targets):
        raise MixtureError(f"streams {sorted(streams)} do not match plan domains "
                           f"{sorted(plan.targets)}")

    budgeter = budgeter or TokenBudgeter()
    states: dict[str, _DomainState] = {}
    for d, docs in streams.items():
        docs = list(docs)
        if not docs:
            raise MixtureError(f"domain {d!r} stream is empty")
        states[d] = _DomainState(docs=docs,
                                 tokens=[budgeter.count(x.content) for x in docs])

    total_emitted = 0
    order = sorted(plan.targets)
    while total_emitted < plan.expected_total:
        # smallest emitted/target ratio goes next; ties via sorted order
        pick = min(order, key=lambda d: states[d].emitted / plan.targets[d])
        st = states[pick]
        if st.cursor >= len(st.docs):
            st.cursor = 0
            st.passes += 1
            if st.passes >= math.ceil(plan.epochs[pick] - 1e-9) + 1:
                raise MixtureError(f"domain {pick!r} exhausted beyond planned epochs")
        doc = st.docs[st.cursor]
        tok = st.tokens[st.cursor]
        st.cursor += 1
        st.emitted += tok
        total_emitted += tok
        if achieved is not None:
            achieved[pick] = achieved.get(pick, 0) + tok
        yield doc
