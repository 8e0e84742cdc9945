"""Attack scenarios: member / non-member pools and the balanced mix to classify."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from ..exceptions import ConfigurationError, DataError
from ..metrics import AttackReport
from .dataset import WindowedDataset, concat

MASKED_PROVENANCE = -1


class AttackScenario:
    """Pools known to the attacker plus a mix whose membership is withheld.

    The mix windows carry provenance ``-1``; the per-window ground truth is
    only consumed by :meth:`score`.
    """

    __slots__ = ("target", "k", "others", "member_pool", "nonmember_pool", "mix", "__truth")

    def __init__(self, target, k, others, member_pool, nonmember_pool, mix, truth):
        self.target = int(target)
        self.k = int(k)
        self.others = tuple(int(o) for o in others)
        self.member_pool = member_pool
        self.nonmember_pool = nonmember_pool
        self.mix = mix
        self.__truth = np.asarray(truth, dtype=bool)
        self.__truth.setflags(write=False)

    def __repr__(self) -> str:
        return (
            f"AttackScenario(target={self.target}, k={self.k}, others={list(self.others)}, "
            f"member={len(self.member_pool)}, nonmember={len(self.nonmember_pool)}, mix={len(self.mix)})"
        )

    @property
    def n_mix_members(self) -> int:
        return int(self.__truth.sum())

    def score(self, predictions) -> AttackReport:
        """Compare per-window 0/1 predictions on ``mix`` with the withheld truth."""
        return AttackReport.from_predictions(self.__truth, predictions)


def _even_shares(total: int, parts: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def build_scenario(
    clients: Mapping[int, WindowedDataset],
    target: int,
    k: int,
    n_member: int = 200,
    n_nonmember: int = 200,
    n_mix: int | None = None,
    seed: int = 0,
) -> AttackScenario:
    """Sample pools for ``target`` against ``k - 1`` uniformly chosen other clients.

    ``n_mix`` (default ``n_member + n_nonmember``, must be even) windows form the
    mix, half from the target and half from the other clients. Non-member
    windows are spread as evenly as possible over the chosen other clients.
    No window appears in more than one of the pools and the mix.
    """
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if target not in clients:
        raise ConfigurationError(f"target client {target} not present")
    if n_member < 1 or n_nonmember < 1:
        raise ConfigurationError("pool sizes must be >= 1")
    n_mix = n_member + n_nonmember if n_mix is None else n_mix
    if n_mix < 2 or n_mix % 2:
        raise ConfigurationError(f"n_mix must be an even number >= 2, got {n_mix}")
    half = n_mix // 2
    candidates = sorted(c for c in clients if c != target)
    if len(candidates) < k - 1:
        raise DataError(f"k={k} needs {k - 1} other clients, only {len(candidates)} available")

    rng = np.random.default_rng(seed)
    others = sorted(int(c) for c in rng.choice(candidates, size=k - 1, replace=False))

    need = n_member + half
    have = len(clients[target])
    if have < need:
        raise DataError(f"target client {target}: need {need} windows, have {have}")
    idx = rng.permutation(have)[:need]
    member_pool = clients[target].subset(np.sort(idx[:n_member]))
    mix_members = clients[target].subset(np.sort(idx[n_member:]))

    pool_parts, mix_parts = [], []
    for cid, n_pool, n_mix_part in zip(others, _even_shares(n_nonmember, k - 1), _even_shares(half, k - 1)):
        need, have = n_pool + n_mix_part, len(clients[cid])
        if have < need:
            raise DataError(f"non-member client {cid}: need {need} windows, have {have}")
        idx = rng.permutation(have)[:need]
        pool_parts.append(clients[cid].subset(np.sort(idx[:n_pool])))
        mix_parts.append(clients[cid].subset(np.sort(idx[n_pool:])))
    nonmember_pool = concat(pool_parts)

    mixed = concat([mix_members] + mix_parts)
    truth = np.concatenate([np.ones(half, dtype=bool), np.zeros(half, dtype=bool)])
    order = rng.permutation(n_mix)
    mixed = mixed.subset(order)
    mix = WindowedDataset(
        mixed.windows, mixed.labels, np.full(n_mix, MASKED_PROVENANCE), mixed.ids
    )
    return AttackScenario(target, k, others, member_pool, nonmember_pool, mix, truth[order])
