"""Per-agent open-loop estimator banks with broadcast resets.

Each agent i keeps one estimate for itself and one per neighbour. Every
estimate integrates the pure drift under the shared parameter estimate; the
control input never enters, so between broadcasts an estimate depends only on
its value at the last reset. When agent j broadcasts, every bank holding an
estimate of j (its own bank and each neighbour's) is reset to the true state.

All agents run the same integrator on the same parameter estimate, so two
banks holding estimates of the same agent that were reset at the same instant
agree bit for bit; ``propagate_all`` stacks every bank into one array before
stepping, which preserves that property and keeps the hot path vectorized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import SystemModel
from .errors import TopologyError
from .graph import Graph
from .integrate import step_fn


@dataclass
class EstimatorBank:
    """Estimates held by one agent: its own state plus each neighbour's."""

    owner: int
    agents: tuple[int, ...]
    estimates: np.ndarray
    theta_hat: np.ndarray
    _pos: dict[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.owner not in self.agents:
            raise TopologyError(
                f"bank for agent {self.owner} must hold the owner's own estimate"
            )
        if len(set(self.agents)) != len(self.agents):
            raise TopologyError(f"bank agent list {self.agents} has duplicates")
        if self.estimates.shape[0] != len(self.agents):
            raise TopologyError(
                f"bank holds {self.estimates.shape[0]} estimates for {len(self.agents)} agents"
            )
        self._pos = {j: t for t, j in enumerate(self.agents)}

    def holds(self, j: int) -> bool:
        return j in self._pos

    def estimate_of(self, j: int) -> np.ndarray:
        try:
            return self.estimates[self._pos[j]]
        except KeyError:
            raise TopologyError(
                f"agent {self.owner} holds no estimate of agent {j}"
            ) from None


def make_banks(graph: Graph, x0: np.ndarray, theta_hat) -> list[EstimatorBank]:
    """Initial banks seeded with the true initial states (t = 0 broadcast)."""
    x0 = np.asarray(x0, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    banks = []
    for i in range(graph.n_agents):
        members = tuple(sorted({i, *graph.neighbours(i).tolist()}))
        banks.append(
            EstimatorBank(
                owner=i,
                agents=members,
                estimates=x0[list(members)].copy(),
                theta_hat=theta_hat,
            )
        )
    return banks


def propagate(bank: EstimatorBank, model: SystemModel, h: float, scheme: str = "rk4") -> EstimatorBank:
    """Advance every estimate in a bank by one step of the pure drift."""
    stepper = step_fn(scheme)
    new = stepper(lambda y: model.f(y, bank.theta_hat), bank.estimates, h)
    if not np.isfinite(new).all():
        from .errors import NumericsError

        raise NumericsError(f"estimator bank of agent {bank.owner} became non-finite")
    return EstimatorBank(
        owner=bank.owner, agents=bank.agents, estimates=new, theta_hat=bank.theta_hat
    )


def propagate_all(banks: list[EstimatorBank], model: SystemModel, h: float, scheme: str = "rk4") -> list[EstimatorBank]:
    """Advance all banks in one stacked integrator call."""
    stepper = step_fn(scheme)
    theta_hat = banks[0].theta_hat
    flat = np.concatenate([b.estimates for b in banks], axis=0)
    flat = stepper(lambda y: model.f(y, theta_hat), flat, h)
    if not np.isfinite(flat).all():
        from .errors import NumericsError

        raise NumericsError("an estimator bank became non-finite")
    out = []
    offset = 0
    for b in banks:
        rows = flat[offset : offset + len(b.agents)]
        offset += len(b.agents)
        out.append(
            EstimatorBank(owner=b.owner, agents=b.agents, estimates=rows, theta_hat=b.theta_hat)
        )
    return out


def apply_broadcast(banks: list[EstimatorBank], sender: int, state: np.ndarray) -> None:
    """Reset every estimate of ``sender`` (own bank and neighbours) to ``state``."""
    n = len(banks)
    if not (0 <= sender < n):
        raise TopologyError(f"unknown sender {sender}; agents are 0..{n - 1}")
    state = np.asarray(state, dtype=float)
    for bank in banks:
        if bank.holds(sender):
            bank.estimates[bank._pos[sender]] = state
