"""Absorbing Markov chain of a swap-only nested repeater chain.

A network state is the set of links currently alive, encoded as half-open
segment intervals; one tick lets every empty segment attempt generation and
lets sibling links of the doubling scheme swap.  The two swap-timing
conventions differ on when a swap charges time:

* ZERO_STEP resolves swaps instantly, cascading within the tick in which
  the second input appears (the convention of the analytical engines);
* ONE_STEP charges one tick per swap round: pairs complete at the start of
  a tick resolve during that tick, and freshly generated or freshly merged
  links wait for the next one.

A failed swap destroys its two input links; links elsewhere in the chain
persist.  Reaching the end-to-end link is absorption, and waiting-time
statistics follow from the standard absorbing-chain linear systems and from
iterated vector-matrix products.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .chainformulas import ChainParams
from .disttrack import TruncatedDistribution

__all__ = [
    "SwapTimeMode",
    "RepeaterMarkovChain",
    "StateLimitError",
    "AbsorptionError",
    "build_chain",
    "absorption_stats",
    "waiting_pmf",
    "to_dot",
]

DEFAULT_STATE_LIMIT = 2 ** 20
_DENSE_SOLVE_LIMIT = 2 ** 12


class StateLimitError(RuntimeError):
    """Chain construction would exceed the configured state budget."""


class AbsorptionError(RuntimeError):
    """The absorbing state is unreachable; hitting-time systems are
    singular."""


class SwapTimeMode(str, enum.Enum):
    ZERO_STEP = "zero-step"
    ONE_STEP = "one-step"


@dataclass
class RepeaterMarkovChain:
    """States, transition matrix, and absorbing set of a repeater chain.

    ``states`` are canonically sorted tuples of link intervals; index 0 is
    the empty start state.  Rows of ``tpm`` sum to one and absorbing rows
    are identity.
    """

    states: tuple
    tpm: scipy.sparse.csr_matrix
    absorbing: frozenset
    swap_time_mode: SwapTimeMode
    params: ChainParams
    merged_symmetric: bool = False

    @property
    def n_states(self):
        return len(self.states)


def _empty_segments(state, n_segments):
    covered = np.zeros(n_segments, dtype=bool)
    for a, b in state:
        covered[a:b] = True
    return [i for i in range(n_segments) if not covered[i]]


def _sibling(interval, n_segments):
    a, b = interval
    length = b - a
    if length >= n_segments:
        return None
    if (a // length) % 2 == 0:
        return (b, b + length)
    return (a - length, a)


def _mergeable_pairs(state, n_segments):
    """Sibling link pairs ready to swap; each link has one unique sibling,
    so the pairs are disjoint."""
    pairs = []
    for interval in sorted(state):
        sib = _sibling(interval, n_segments)
        if sib is not None and sib in state and interval < sib:
            pairs.append((interval, sib))
    return pairs


def _mirror(state, n_segments):
    return frozenset((n_segments - b, n_segments - a) for a, b in state)


def _canonical(state, n_segments, merge_symmetric):
    if merge_symmetric:
        mirrored = _mirror(state, n_segments)
        if tuple(sorted(mirrored)) < tuple(sorted(state)):
            state = mirrored
    return tuple(sorted(state))


def _gen_outcomes(empty, p_g):
    """(probability, new elementary links) over generation subsets."""
    out = []
    m = len(empty)
    for mask in range(1 << m):
        prob = 1.0
        links = []
        for i, seg in enumerate(empty):
            if (mask >> i) & 1:
                prob *= p_g
                links.append((seg, seg + 1))
            else:
                prob *= 1.0 - p_g
        if prob > 0.0:
            out.append((prob, links))
    return out


def _resolve_round(state, pairs, p_s):
    """One simultaneous round of swap resolutions over disjoint pairs."""
    out = []
    m = len(pairs)
    for mask in range(1 << m):
        prob = 1.0
        new_state = set(state)
        for i, (left, right) in enumerate(pairs):
            new_state.discard(left)
            new_state.discard(right)
            if (mask >> i) & 1:
                prob *= p_s
                new_state.add((left[0], right[1]))
            else:
                prob *= 1.0 - p_s
        if prob > 0.0:
            out.append((prob, frozenset(new_state)))
    return out


def _cascade(state, prob, p_s, n_segments, acc):
    """Resolve swap rounds within one tick until no pair remains."""
    pairs = _mergeable_pairs(state, n_segments)
    if not pairs:
        acc[state] = acc.get(state, 0.0) + prob
        return
    for branch_prob, next_state in _resolve_round(state, pairs, p_s):
        _cascade(next_state, prob * branch_prob, p_s, n_segments, acc)


def _transitions(state, params, mode, n_segments):
    """Distribution over successor states for one tick."""
    acc = {}
    p_g, p_s = params.p_g, params.p_s
    empty = _empty_segments(state, n_segments)
    if mode is SwapTimeMode.ZERO_STEP:
        for gen_prob, links in _gen_outcomes(empty, p_g):
            _cascade(frozenset(state) | frozenset(links), gen_prob, p_s,
                     n_segments, acc)
    else:
        pairs = _mergeable_pairs(state, n_segments)
        for swap_prob, mid_state in _resolve_round(state, pairs, p_s):
            for gen_prob, links in _gen_outcomes(empty, p_g):
                next_state = mid_state | frozenset(links)
                prob = swap_prob * gen_prob
                acc[next_state] = acc.get(next_state, 0.0) + prob
    return acc


def build_chain(params, swap_time_mode=SwapTimeMode.ZERO_STEP,
                merge_symmetric=False, state_limit=DEFAULT_STATE_LIMIT):
    """Enumerate the reachable state space and transition matrix.

    Swap-only protocols: a cut-off in ``params`` is rejected (the Markov
    engine neither discards links nor tracks their age).  With
    ``merge_symmetric`` the left-right mirror images of a state are
    identified, halving the reachable space at no loss for the symmetric
    chains modelled here.
    """
    mode = SwapTimeMode(swap_time_mode)
    if params.tau is not None:
        raise ValueError(
            "the Markov engine covers swap-only protocols without cut-off")
    n_segments = params.segments
    done = (0, n_segments)

    index = {}
    states = []
    rows = []

    def intern(state_fs):
        key = _canonical(state_fs, n_segments, merge_symmetric)
        if key not in index:
            if len(states) >= state_limit:
                raise StateLimitError(
                    f"state count exceeds the limit of {state_limit}")
            index[key] = len(states)
            states.append(key)
            rows.append(None)
        return index[key]

    start = intern(frozenset())
    frontier = [start]
    while frontier:
        i = frontier.pop()
        if rows[i] is not None:
            continue
        state = frozenset(states[i])
        if done in state:
            rows[i] = {i: 1.0}
            continue
        acc = _transitions(state, params, mode, n_segments)
        row = {}
        for next_state, prob in acc.items():
            j = intern(next_state)
            row[j] = row.get(j, 0.0) + prob
        rows[i] = row
        for j in row:
            if rows[j] is None:
                frontier.append(j)

    n = len(states)
    data, ri, ci = [], [], []
    for i, row in enumerate(rows):
        total = 0.0
        for j, prob in sorted(row.items()):
            data.append(prob)
            ri.append(i)
            ci.append(j)
            total += prob
        if abs(total - 1.0) > 1e-12:
            raise AssertionError(
                f"row {i} sums to {total!r}, not 1")
    tpm = scipy.sparse.csr_matrix(
        (data, (ri, ci)), shape=(n, n))
    absorbing = frozenset(i for i, s in enumerate(states)
                          if done in frozenset(s))
    return RepeaterMarkovChain(states=tuple(states), tpm=tpm,
                               absorbing=absorbing, swap_time_mode=mode,
                               params=params,
                               merged_symmetric=merge_symmetric)


def _transient_structure(chain):
    transient = [i for i in range(chain.n_states) if i not in chain.absorbing]
    if not transient:
        raise AbsorptionError("no transient states")
    pos = {s: k for k, s in enumerate(transient)}
    tpm = chain.tpm.tocsr()
    q = tpm[transient][:, transient]
    # Reverse reachability from the absorbing set: every transient state
    # must be able to reach absorption or the hitting-time system is
    # singular.
    reach = set(chain.absorbing)
    changed = True
    coo = tpm.tocoo()
    incoming = {}
    for i, j, v in zip(coo.row, coo.col, coo.data):
        if v > 0.0:
            incoming.setdefault(j, []).append(i)
    while changed:
        changed = False
        for j in list(reach):
            for i in incoming.get(j, ()):
                if i not in reach:
                    reach.add(i)
                    changed = True
    for s in transient:
        if s not in reach:
            raise AbsorptionError(
                f"state {chain.states[s]!r} cannot reach absorption")
    return transient, pos, q


def absorption_stats(chain):
    """Mean and variance of the absorption (waiting) time from the start.

    Solves the fundamental systems ``(I - Q) m = 1`` and
    ``(I - Q) s = 1 + 2 Q m`` on the transient block, densely for small
    chains and with a sparse factorization beyond 4096 states.
    """
    transient, pos, q = _transient_structure(chain)
    if 0 in chain.absorbing:
        return {"mean": 0.0, "variance": 0.0}
    n = len(transient)
    ones = np.ones(n)
    if n <= _DENSE_SOLVE_LIMIT:
        iq = np.eye(n) - q.toarray()
        m = np.linalg.solve(iq, ones)
        s = np.linalg.solve(iq, ones + 2.0 * (q.toarray() @ m))
    else:
        iq = scipy.sparse.identity(n, format="csc") - q.tocsc()
        m = scipy.sparse.linalg.spsolve(iq, ones)
        s = scipy.sparse.linalg.spsolve(iq, ones + 2.0 * q.dot(m))
    k = pos[0]
    mean = float(m[k])
    variance = float(s[k] - mean ** 2)
    return {"mean": mean, "variance": max(variance, 0.0)}


def waiting_pmf(chain, t_max):
    """PMF of the first-absorption tick, by iterated vector-matrix
    products; returns a distribution without state-quality tracking."""
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    absorbing = sorted(chain.absorbing)
    dist = np.zeros(chain.n_states)
    dist[0] = 1.0
    tpm = chain.tpm.tocsr()
    pmf = np.zeros(t_max + 1)
    absorbed_prev = dist[absorbing].sum()
    for t in range(1, t_max + 1):
        dist = dist @ tpm
        absorbed = dist[absorbing].sum()
        pmf[t] = absorbed - absorbed_prev
        absorbed_prev = absorbed
    return TruncatedDistribution(pmf=np.clip(pmf, 0.0, None), mean_w=None)


def _state_label(state, n_segments):
    """Compact occupancy label: 0/1 per segment, merged spans bracketed."""
    state = sorted(state)
    label = []
    seg = 0
    for a, b in state:
        label.extend("0" * (a - seg))
        if b - a == 1:
            label.append("1")
        else:
            label.append("[" + "1" * (b - a) + "]")
        seg = b
    label.extend("0" * (n_segments - seg))
    return "".join(label)


def to_dot(chain):
    """DOT rendering of the chain graph, suitable for small chains."""
    n_segments = chain.params.segments
    lines = ["digraph repeater_chain {", "  rankdir=TB;"]
    for i, state in enumerate(chain.states):
        label = _state_label(state, n_segments)
        shape = "doublecircle" if i in chain.absorbing else "circle"
        lines.append(f'  s{i} [label="{label}", shape={shape}];')
    coo = chain.tpm.tocoo()
    for i, j, v in sorted(zip(coo.row, coo.col, coo.data)):
        if i in chain.absorbing:
            continue
        lines.append(f'  s{i} -> s{j} [label="{v:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
