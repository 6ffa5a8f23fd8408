"""Post-hoc analyses over front files: cost comparison between two methods,
action-position flows, and class probability by position."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence as Seq

import numpy as np

from .actions import Sequence, rollout
from .fronts import FrontFile


def relative_cost_difference(a: float, b: float) -> float:
    """``(b - a) / max(a, b)``; positive when ``a`` is cheaper."""
    top = max(a, b)
    if top == 0:
        return 0.0
    return (b - a) / top


def min_cost_by_instance(fronts: Iterable[FrontFile], max_length: int | None) -> dict[str, float | None]:
    best: dict[str, float | None] = {}
    for ff in fronts:
        best.setdefault(ff.instance, None)
        for rec in ff.records:
            if max_length is not None and len(rec["actions"]) > max_length:
                continue
            c = rec["cost_undiscounted"]
            cur = best[ff.instance]
            best[ff.instance] = c if cur is None else min(cur, c)
    return best


@dataclass
class CostRow:
    instance: str
    a: float | None
    b: float | None

    @property
    def relative(self) -> float | None:
        if self.a is None or self.b is None:
            return None
        return relative_cost_difference(self.a, self.b)


def compare_costs(fronts_a: Seq[FrontFile], fronts_b: Seq[FrontFile], max_length: int | None = 2) -> list[CostRow]:
    """Per instance, compare the cheapest undiscounted cost with at most ``max_length`` steps."""
    a = min_cost_by_instance(fronts_a, max_length)
    b = min_cost_by_instance(fronts_b, max_length)
    if set(a) != set(b):
        only = sorted(set(a) ^ set(b))
        raise ValueError(f"front sets cover different instances: {only}")
    return [CostRow(iid, a[iid], b[iid]) for iid in sorted(a)]


@dataclass
class FlowCounts:
    """Action-at-position counts, successor pairs and terminations (positions are 1-based)."""

    at_position: Counter = field(default_factory=Counter)     # (action, t) -> n
    pairs: Counter = field(default_factory=Counter)           # (t, a, b): a at t, b at t+1
    terminations: Counter = field(default_factory=Counter)    # t -> sequences ending at t

    def position_total(self, t: int) -> int:
        return sum(n for (_, pos), n in self.at_position.items() if pos == t)

    def inflow(self, t: int) -> int:
        """Sequences arriving at position t from t - 1."""
        return sum(n for (pos, _, _), n in self.pairs.items() if pos == t - 1)

    def max_position(self) -> int:
        return max((t for _, t in self.at_position), default=0)

    def to_dict(self) -> dict:
        return {
            "schema": "cscf.flows/1",
            "positions": [{"action": a, "t": t, "count": n} for (a, t), n in sorted(self.at_position.items(),
                                                                                   key=lambda kv: (kv[0][1], kv[0][0]))],
            "pairs": [{"t": t, "from": a, "to": b, "count": n} for (t, a, b), n in sorted(self.pairs.items())],
            "terminations": [{"t": t, "count": n} for t, n in sorted(self.terminations.items())],
        }


def flow_counts(sequences: Iterable[Seq[str]]) -> FlowCounts:
    fc = FlowCounts()
    for seq in sequences:
        seq = list(seq)
        for t, a in enumerate(seq, start=1):
            fc.at_position[(a, t)] += 1
            if t < len(seq):
                fc.pairs[(t, a, seq[t])] += 1
        if seq:
            fc.terminations[len(seq)] += 1
    return fc


def fronts_flow_counts(fronts: Iterable[FrontFile], max_length: int | None = None) -> FlowCounts:
    seqs = (rec["actions"] for ff in fronts for rec in ff.records
            if max_length is None or len(rec["actions"]) <= max_length)
    return flow_counts(seqs)


@dataclass
class ProbeSample:
    instance: str
    solution: int
    action: str
    t: int
    p_accept: float


def probe_positions(fronts: Iterable[FrontFile], space, catalog, blackbox) -> list[ProbeSample]:
    """Replay each solution from its recorded x0 and score every intermediate state."""
    samples = []
    for ff in fronts:
        for k, rec in enumerate(ff.records):
            x0 = space.instance(rec["trajectory"][0])
            seq = Sequence(tuple(zip(rec["actions"], rec["values"])))
            ro = rollout(space, x0, catalog, seq)
            probs = blackbox.proba_many(ro.states[1:])
            for t, (aid, p) in enumerate(zip(seq.action_ids, probs), start=1):
                samples.append(ProbeSample(ff.instance, k, aid, t, float(p)))
    return samples


def summarize_probes(samples: Iterable[ProbeSample]) -> list[dict]:
    """Median and 2.5/97.5 percentiles of P(accept) per (action, position)."""
    groups = defaultdict(list)
    for s in samples:
        groups[(s.action, s.t)].append(s.p_accept)
    rows = []
    for (aid, t), ps in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        lo, med, hi = np.percentile(ps, [2.5, 50, 97.5])
        rows.append({"action": aid, "t": t, "n": len(ps), "median": float(med),
                     "p2_5": float(lo), "p97_5": float(hi)})
    return rows
