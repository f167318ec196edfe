"""Shared independent oracles and randomized-case builders for the tests."""

import numpy as np

from oodsynth.detector import init_model, logistic_loss, loss_and_gradients


def brute_force_auroc(id_scores, ood_scores):
    """Pairwise enumeration oracle: wins plus half-ties over all pairs."""
    ids = np.asarray(id_scores, dtype=np.float64)
    oods = np.asarray(ood_scores, dtype=np.float64)
    wins = (ids[:, None] > oods[None, :]).sum()
    ties = (ids[:, None] == oods[None, :]).sum()
    return (wins + 0.5 * ties) / (ids.size * oods.size)


def brute_force_fpr_at_tpr(id_scores, ood_scores, target=0.95):
    """Exhaustive sweep over every distinct score as a candidate threshold."""
    ids = np.asarray(id_scores, dtype=np.float64)
    oods = np.asarray(ood_scores, dtype=np.float64)
    for tau in sorted(set(ids.tolist()) | set(oods.tolist()), reverse=True):
        if (ids >= tau).mean() >= target:
            return float((oods >= tau).mean()), float(tau)
    raise AssertionError("no threshold met the target")


def random_score_pair(rng, max_size=200):
    """Random ID/OOD score lists with ties injected half the time."""
    n_id = int(rng.integers(1, max_size + 1))
    n_ood = int(rng.integers(1, max_size + 1))
    if rng.random() < 0.5:
        pool = np.round(rng.uniform(0, 1, size=int(rng.integers(2, 9))), 3)
        return rng.choice(pool, size=n_id), rng.choice(pool, size=n_ood)
    return rng.uniform(0, 1, size=n_id), rng.uniform(0, 1, size=n_ood)


# --- gradient-check case construction -------------------------------------------


def kink_margin(model, Z):
    """Smallest |pre-activation| across hidden layers; finite differences are
    only trustworthy when no rectifier input sits next to zero."""
    margin = np.inf
    current = Z
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        pre = current @ w + b
        margin = min(margin, float(np.abs(pre).min()))
        current = np.maximum(0.0, pre)
    return margin


def sample_gradcheck_case(trial, min_margin=1e-3, max_dim=8, max_hidden=8):
    """Deterministic random small net plus batch, redrawn until every
    rectifier input clears the kink margin."""
    for bump in range(100):
        case_seed = 1000 * trial + bump
        rng = np.random.default_rng(case_seed)
        d = int(rng.integers(2, max_dim + 1))
        hidden = [int(rng.integers(2, max_hidden + 1)), int(rng.integers(2, max_hidden + 1))]
        model = init_model(d, hidden, seed=case_seed, dropout_rate=0.0)
        id_batch = rng.standard_normal((4, d))
        ood_batch = rng.standard_normal((4, d))
        if kink_margin(model, np.vstack([id_batch, ood_batch])) > min_margin:
            return model, id_batch, ood_batch
    raise AssertionError("could not sample a kink-free case")


def max_gradient_rel_error(model, id_batch, ood_batch, step=1e-5):
    """Worst relative disagreement between backprop and central differences."""
    from oodsynth.detector import _forward_batch

    def loss_at():
        logits, _, _ = _forward_batch(model, np.vstack([id_batch, ood_batch]))
        return logistic_loss(logits[: len(id_batch)], logits[len(id_batch):])

    _, grads_w, grads_b = loss_and_gradients(model, id_batch, ood_batch)
    worst = 0.0
    for param, grad in zip(list(model.weights) + list(model.biases),
                           list(grads_w) + list(grads_b)):
        flat = param.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for k in range(flat.size):
            keep = flat[k]
            flat[k] = keep + step
            up = loss_at()
            flat[k] = keep - step
            down = loss_at()
            flat[k] = keep
            numeric = (up - down) / (2 * step)
            diff = abs(gflat[k] - numeric)
            if diff >= 1e-8:  # below this both sides are numerically zero
                worst = max(worst, diff / max(abs(gflat[k]), abs(numeric)))
    return worst
