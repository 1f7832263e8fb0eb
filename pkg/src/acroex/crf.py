"""Linear-chain CRF over the five BIO tags.

Scores a tag path as

    start[y_1] + sum_t e[t, y_t] + sum_t transitions[y_{t-1}, y_t] + end[y_n]

and provides the log-partition function (forward recursion), posterior
marginals (forward-backward), the exact training gradient, and Viterbi
decoding. All dynamic programs run in log space via max-shifted logsumexp.

Structurally impossible BIO transitions are not removed but pinned at the
finite mask constant, which keeps every quantity differentiable; their
gradients are zeroed so they never move.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import TAG_TO_ID, TAGS
from .nn import logsumexp

NUM_TAGS = len(TAGS)
MASK_SCORE = -10000.0


def _forbidden_transitions() -> tuple[tuple[int, int], ...]:
    pairs = []
    for cls in ("short", "long"):
        inside = TAG_TO_ID["I-" + cls]
        allowed = {TAG_TO_ID["B-" + cls], inside}
        for prev in range(NUM_TAGS):
            if prev not in allowed:
                pairs.append((prev, inside))
    return tuple(pairs)


# an I-x may only follow B-x or I-x; nothing else may start a sequence with I-x
FORBIDDEN_TRANSITIONS = _forbidden_transitions()
FORBIDDEN_START = (TAG_TO_ID["I-short"], TAG_TO_ID["I-long"])


@dataclass
class CrfParams:
    transitions: np.ndarray  # (T, T); [a, b] scores tag a -> tag b
    start: np.ndarray  # (T,)
    end: np.ndarray  # (T,)

    def stamp_mask(self) -> None:
        """Pin structurally forbidden entries at the exact mask constant."""
        for a, b in FORBIDDEN_TRANSITIONS:
            self.transitions[a, b] = MASK_SCORE
        for b in FORBIDDEN_START:
            self.start[b] = MASK_SCORE


def new_crf_params() -> CrfParams:
    params = CrfParams(
        transitions=np.zeros((NUM_TAGS, NUM_TAGS)),
        start=np.zeros(NUM_TAGS),
        end=np.zeros(NUM_TAGS),
    )
    params.stamp_mask()
    return params


def zero_crf_grads() -> CrfParams:
    return CrfParams(
        transitions=np.zeros((NUM_TAGS, NUM_TAGS)),
        start=np.zeros(NUM_TAGS),
        end=np.zeros(NUM_TAGS),
    )


def _check_emissions(emissions: np.ndarray) -> np.ndarray:
    e = np.asarray(emissions, dtype=np.float64)
    if e.ndim != 2 or e.shape[1] != NUM_TAGS:
        raise ValueError(f"emissions must have shape (n, {NUM_TAGS}), got {e.shape}")
    if e.shape[0] == 0:
        raise ValueError("emissions must cover at least one position")
    return e


def score_sequence(params: CrfParams, emissions: np.ndarray, tags) -> float:
    """Path score of one tag sequence."""
    e = _check_emissions(emissions)
    if len(tags) != e.shape[0]:
        raise ValueError(f"{len(tags)} tags for {e.shape[0]} positions")
    s = params.start[tags[0]] + e[0, tags[0]]
    for t in range(1, len(tags)):
        s = s + params.transitions[tags[t - 1], tags[t]]
        s = s + e[t, tags[t]]
    return float(s + params.end[tags[-1]])


def _lse_cols(m: np.ndarray) -> np.ndarray:
    # logsumexp over axis 0 of a (T, T) score matrix
    mx = m.max(axis=0)
    return mx + np.log(np.exp(m - mx).sum(axis=0))


def _forward_alphas(params: CrfParams, e: np.ndarray) -> np.ndarray:
    n = e.shape[0]
    alpha = np.empty((n, NUM_TAGS))
    alpha[0] = params.start + e[0]
    for t in range(1, n):
        alpha[t] = _lse_cols(alpha[t - 1][:, None] + params.transitions) + e[t]
    return alpha


def _backward_betas(params: CrfParams, e: np.ndarray) -> np.ndarray:
    n = e.shape[0]
    beta = np.empty((n, NUM_TAGS))
    beta[n - 1] = params.end
    for t in range(n - 2, -1, -1):
        m = params.transitions + (e[t + 1] + beta[t + 1])[None, :]
        mx = m.max(axis=1)
        beta[t] = mx + np.log(np.exp(m - mx[:, None]).sum(axis=1))
    return beta


def log_partition(params: CrfParams, emissions: np.ndarray) -> float:
    """log of the sum of exp path scores over all tag sequences."""
    e = _check_emissions(emissions)
    alpha = _forward_alphas(params, e)
    return logsumexp(alpha[-1] + params.end)


def posterior_marginals(
    params: CrfParams, emissions: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-position and per-transition posterior probabilities.

    Returns (unary (n, T), pairwise (n-1, T, T)); each unary row and each
    pairwise slice sums to 1.
    """
    e = _check_emissions(emissions)
    n = e.shape[0]
    alpha = _forward_alphas(params, e)
    beta = _backward_betas(params, e)
    log_z = logsumexp(alpha[-1] + params.end)
    unary = np.exp(alpha + beta - log_z)
    pairwise = np.empty((n - 1, NUM_TAGS, NUM_TAGS))
    for t in range(n - 1):
        pairwise[t] = np.exp(
            alpha[t][:, None]
            + params.transitions
            + (e[t + 1] + beta[t + 1])[None, :]
            - log_z
        )
    return unary, pairwise


def _check_gold(params: CrfParams, tags, n: int) -> list[int]:
    gold = [int(t) for t in tags]
    if len(gold) != n:
        raise ValueError(f"{len(gold)} gold tags for {n} positions")
    for y in gold:
        if not 0 <= y < NUM_TAGS:
            raise ValueError(f"tag id {y} out of range")
    if gold[0] in FORBIDDEN_START and params.start[gold[0]] == MASK_SCORE:
        raise ValueError(f"gold sequence starts with masked tag {TAGS[gold[0]]}")
    for t in range(1, n):
        pair = (gold[t - 1], gold[t])
        if pair in FORBIDDEN_TRANSITIONS and params.transitions[pair] == MASK_SCORE:
            raise ValueError(
                f"gold transition {TAGS[pair[0]]} -> {TAGS[pair[1]]} is masked"
            )
    return gold


def nll_and_grad(
    params: CrfParams, emissions: np.ndarray, gold_tags
) -> tuple[float, np.ndarray, CrfParams]:
    """Negative log-likelihood of the gold path and its exact gradients.

    Returns (loss, d loss / d emissions, CrfParams-shaped gradients).
    Gradients are expectation minus observation; masked entries get zero.
    """
    e = _check_emissions(emissions)
    n = e.shape[0]
    gold = _check_gold(params, gold_tags, n)
    unary, pairwise = posterior_marginals(params, e)
    log_z = log_partition(params, e)
    loss = max(0.0, log_z - score_sequence(params, e, gold))

    grad_e = unary.copy()
    grad_e[np.arange(n), gold] -= 1.0

    grads = zero_crf_grads()
    if n > 1:
        grads.transitions = pairwise.sum(axis=0)
        for t in range(1, n):
            grads.transitions[gold[t - 1], gold[t]] -= 1.0
    grads.start = unary[0].copy()
    grads.start[gold[0]] -= 1.0
    grads.end = unary[-1].copy()
    grads.end[gold[-1]] -= 1.0
    # only entries actually pinned at the mask constant are frozen
    for a, b in FORBIDDEN_TRANSITIONS:
        if params.transitions[a, b] == MASK_SCORE:
            grads.transitions[a, b] = 0.0
    for b in FORBIDDEN_START:
        if params.start[b] == MASK_SCORE:
            grads.start[b] = 0.0
    return loss, grad_e, grads


def viterbi(params: CrfParams, emissions: np.ndarray) -> tuple[list[int], float]:
    """Best-scoring tag path and its score.

    Ties break toward the lower tag index at every backpointer decision,
    so decoding is fully deterministic.
    """
    e = _check_emissions(emissions)
    n = e.shape[0]
    delta = params.start + e[0]
    backptr = np.empty((n, NUM_TAGS), dtype=np.int64)
    for t in range(1, n):
        m = delta[:, None] + params.transitions
        best_prev = m.argmax(axis=0)  # first max = lowest index
        delta = m[best_prev, np.arange(NUM_TAGS)] + e[t]
        backptr[t] = best_prev
    final = delta + params.end
    last = int(final.argmax())
    score = float(final[last])
    path = [last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, score
