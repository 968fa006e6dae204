"""Distributed control law, trigger quantities, gain matrices, and analytic bounds.

Agent indices are 0-based throughout the API; agent 0 is the uncontrolled
leader. Each follower i applies u_i = -kappa * sum_j l_ij * B'P xhat_j^i,
which equals -kappa * B'P w_i with w_i = sum_j l_ij (xhat_j^i - xhat_i^i)
because Laplacian rows sum to zero.

Triggering compares delta_i = e_i' S_i e_i + |w_i' R_i e_i| against the
threshold sigma_i * w_i' Theta_i w_i, plus a constant relaxation xi in the
practical variant. S_i's scalar coefficient is used exactly as derived, with
no clamping: a negative coefficient only delays triggering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateError, TopologyError, UsageError
from .estimation import EstimatorBank
from .graph import Laplacian
from .linalg import eigvalsh, spectral_norm


@dataclass(frozen=True)
class TriggerParams:
    """Trigger gains and the per-agent matrices R_i, Theta_i, S_i.

    The scalar coefficients multiplying P B B' P are kept alongside the full
    matrices so they can be audited and dumped to run summaries.
    """

    kappa1: float
    kappa2: float
    kappa: float
    sigma: np.ndarray
    b: np.ndarray
    epsilon: float
    xi: float
    R: tuple[np.ndarray, ...]
    Theta: tuple[np.ndarray, ...]
    S: tuple[np.ndarray, ...]
    s_coeff: np.ndarray
    theta_coeff: np.ndarray
    P: np.ndarray
    B: np.ndarray
    BtP: np.ndarray


@dataclass
class TriggerState:
    """Mutable per-agent trigger bookkeeping carried through a simulation."""

    last_event_time: np.ndarray
    event_count: np.ndarray
    e: np.ndarray
    w: np.ndarray
    delta: np.ndarray
    threshold: np.ndarray
    fired: np.ndarray

    @classmethod
    def initial(cls, n_agents: int, state_dim: int) -> "TriggerState":
        return cls(
            last_event_time=np.full(n_agents, -math.inf),
            event_count=np.zeros(n_agents, dtype=int),
            e=np.zeros((n_agents, state_dim)),
            w=np.zeros((n_agents, state_dim)),
            delta=np.zeros(n_agents),
            threshold=np.zeros(n_agents),
            fired=np.zeros(n_agents, dtype=bool),
        )


def _vector_param(value, n: int, name: str, low: float, high) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(f"{name} must be a scalar or a length-{n} vector, got shape {arr.shape}")
    for i, v in enumerate(arr):
        hi = high[i] if isinstance(high, np.ndarray) else high
        if not (low < v < hi):
            raise ConfigError(
                f"{name}[{i}] must satisfy {low} < {name} < {hi}, got {v!r}"
            )
    return arr


def build_trigger_params(
    lap: Laplacian,
    P: np.ndarray,
    B: np.ndarray,
    kappa1: float,
    kappa2: float,
    sigma,
    b=None,
    xi: float = 0.0,
) -> TriggerParams:
    """Assemble gains and the R_i, Theta_i, S_i matrices for one topology."""
    if kappa1 <= 0.0:
        raise ConfigError(f"kappa1 must be > 0, got {kappa1!r}")
    if kappa2 <= 0.0:
        raise ConfigError(f"kappa2 must be > 0, got {kappa2!r}")
    if xi < 0.0:
        raise ConfigError(f"xi must be >= 0, got {xi!r}")
    P = np.asarray(P, dtype=float)
    B = np.asarray(B, dtype=float)
    L = lap.L
    n_agents = L.shape[0]
    l_diag = np.diag(L)
    if np.any(l_diag <= 0.0):
        raise ConfigError("every agent needs at least one edge (l_ii > 0)")

    sigma = _vector_param(sigma, n_agents, "sigma", 0.0, 1.0)
    if b is None:
        b = 1.0 / (5.0 * l_diag)
    b = _vector_param(b, n_agents, "b", 0.0, 1.0 / (2.0 * l_diag))

    kappa = kappa1 + kappa2
    pbbp = P @ B @ B.T @ P
    eps = lap.epsilon
    theta_coeff = 2.0 * kappa2 * eps * (1.0 - 2.0 * l_diag * b)
    s_coeff = (
        2.0 * kappa * l_diag * b
        + 2.0 * kappa * l_diag / b
        + kappa2 * eps * (4.0 * l_diag / b - n_agents * lap.M * (b / 2.0 + 1.0 / (2.0 * b)))
    )
    R = tuple(2.0 * kappa * pbbp for _ in range(n_agents))
    Theta = tuple(theta_coeff[i] * pbbp for i in range(n_agents))
    S = tuple(s_coeff[i] * pbbp for i in range(n_agents))
    for i, th in enumerate(Theta):
        if eigvalsh(th)[0] < -1e-12:
            raise ConfigError(f"Theta[{i}] is not positive semidefinite")
    return TriggerParams(
        kappa1=float(kappa1),
        kappa2=float(kappa2),
        kappa=float(kappa),
        sigma=sigma,
        b=b,
        epsilon=float(eps),
        xi=float(xi),
        R=R,
        Theta=Theta,
        S=S,
        s_coeff=s_coeff,
        theta_coeff=theta_coeff,
        P=P,
        B=B,
        BtP=B.T @ P,
    )


def check_gain_condition(kappa1: float, rho: float, mu: float) -> None:
    """Validate the coupling-gain inequality kappa1 > rho/(2 mu)."""
    bound = rho / (2.0 * mu)
    if not (kappa1 > bound):
        raise ConfigError(f"kappa1 must exceed rho/(2*mu) = {bound!r}, got {kappa1!r}")


def control_input(
    i: int,
    bank: EstimatorBank,
    lap: Laplacian,
    params: TriggerParams,
    P: np.ndarray | None = None,
) -> np.ndarray:
    """Follower control u_i = -kappa * sum_j l_ij B'P xhat_j^i (j with l_ij != 0)."""
    if i == 0:
        raise UsageError("agent 0 is the leader and applies no control input")
    btp = params.BtP if P is None else params.B.T @ np.asarray(P, dtype=float)
    row = lap.L[i]
    acc = np.zeros(params.B.shape[1])
    for pos, j in enumerate(bank.agents):
        lij = row[j]
        if lij != 0.0:
            acc = acc + lij * (btp @ bank.estimates[pos])
    return -params.kappa * acc


def compute_wi(i: int, bank: EstimatorBank, lap: Laplacian) -> np.ndarray:
    """Disagreement w_i = sum_j l_ij (xhat_j^i - xhat_i^i) over the bank's estimates."""
    row = lap.L[i]
    own = bank.estimate_of(i)
    w = np.zeros_like(own)
    for j in np.nonzero(row)[0]:
        if not bank.holds(int(j)):
            raise TopologyError(
                f"agent {i} holds no estimate of agent {int(j)} (l_ij != 0)"
            )
        w = w + row[j] * (bank.estimate_of(int(j)) - own)
    return w


def compute_delta(i: int, e_i: np.ndarray, w_i: np.ndarray, params: TriggerParams) -> float:
    """Trigger function delta_i = e_i' S_i e_i + |w_i' R_i e_i|."""
    S = params.S[i]
    R = params.R[i]
    return float(e_i @ S @ e_i + abs(w_i @ R @ e_i))


def ctc_threshold(i: int, w_i: np.ndarray, params: TriggerParams) -> float:
    """Threshold sigma_i * w_i' Theta_i w_i shared by both CTC variants."""
    return float(params.sigma[i] * (w_i @ params.Theta[i] @ w_i))


def ctc_fire_asymptotic(delta: float, w: np.ndarray, params: TriggerParams, i: int) -> bool:
    """Strict test delta_i - sigma_i w_i' Theta_i w_i > 0."""
    return delta - ctc_threshold(i, w, params) > 0.0


def ctc_fire_practical(delta: float, w: np.ndarray, params: TriggerParams, i: int) -> bool:
    """Strict test delta_i - sigma_i w_i' Theta_i w_i - xi > 0 (requires xi > 0)."""
    if params.xi <= 0.0:
        raise ConfigError(
            f"the practical trigger requires xi > 0 (got {params.xi!r});"
            " use the asymptotic trigger instead"
        )
    return delta - ctc_threshold(i, w, params) - params.xi > 0.0


def error_growth_gain(kappa: float, bbtp_norm: float, w_max: float, Delta: float, k: float) -> float:
    """Scale nu = kappa |B B'P| (w_max + Delta) / k of the inter-event error bound."""
    if k <= 0.0:
        raise ConfigError(f"k must be > 0, got {k!r}")
    return kappa * bbtp_norm * (w_max + Delta) / k


def tau_lower_bound(
    k: float, nu: float, S_norm: float, R_norm: float, w_max: float, xi: float
) -> float:
    """Closed-form positive lower bound on the inter-event time of one agent.

    With c1 = |S_i| nu^2 and c2 = w_max |R_i| nu, the bound is
    tau = (1/k) log( sqrt(xi/c1 + c2^2/(4 c1^2)) + 1 - c2/(2 c1) ).
    """
    if k <= 0.0:
        raise ConfigError(f"k must be > 0, got {k!r}")
    if xi <= 0.0:
        raise ConfigError(f"xi must be > 0, got {xi!r}")
    if nu <= 0.0:
        raise DegenerateError(
            f"nu = {nu!r}: the estimation error never grows, inter-event time unbounded"
        )
    c1 = S_norm * nu * nu
    c2 = w_max * R_norm * nu
    if c1 == 0.0:
        raise DegenerateError("c1 = |S_i| nu^2 is zero; inter-event time unbounded")
    half = c2 / (2.0 * c1)
    return (1.0 / k) * math.log(math.sqrt(xi / c1 + half * half) + 1.0 - half)


def practical_consensus_bound(N: int, xi: float, q: float, P: np.ndarray) -> float:
    """Steady-state bound N xi / (q lambda_min(P)) on the squared consensus distance."""
    if q <= 0.0:
        raise ConfigError(f"q must be > 0, got {q!r}")
    P = np.asarray(P, dtype=float)
    lam_min = float(eigvalsh(P)[0])
    if lam_min <= 0.0:
        from .errors import CertificateError

        raise CertificateError("P must be positive definite")
    return N * xi / (q * lam_min)
