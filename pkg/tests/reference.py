"""Straight-line reference interpreter for the two temporal policies.

Runs every exit of every sample up front and applies the scene rules with
plain loops. Shares nothing with ``temporal_ee.policy``; used as an oracle.
"""
import math


def _argmax(v):
    best = 0
    for i in range(1, len(v)):
        if v[i] > v[best]:
            best = i
    return best


def _dist(a, b):
    return math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))


def _vote(labels):
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    top = max(counts.values())
    for lab in reversed(labels):
        if counts[lab] == top:
            return lab


def _scene_label(labels, mode):
    return labels[-1] if mode == "final_classifier" else _vote(labels)


def difference_detection(all_scores, threshold, mode="majority_vote"):
    """``all_scores[t][i]`` holds exit ``i`` scores of sample ``t``.

    Returns (labels, new_scene flags, terminated exits).
    """
    labels, flags, exits = [], [], []
    ref = None
    scene = None
    n = len(all_scores[0]) - 1
    for scores in all_scores:
        if ref is not None and _dist(scores[0], ref) < threshold:
            labels.append(scene)
            flags.append(False)
            exits.append(0)
        else:
            preds = [_argmax(s) for s in scores]
            scene = _scene_label(preds, mode)
            ref = scores[0]
            labels.append(scene)
            flags.append(True)
            exits.append(n)
    return labels, flags, exits


def temporal_patience(all_scores, threshold, mode="majority_vote"):
    labels, flags, exits = [], [], []
    ref = None
    sel = None
    n = len(all_scores[0]) - 1
    for scores in all_scores:
        if (
            ref is not None
            and _dist(scores[sel], ref) < threshold
            and _argmax(scores[sel]) == _argmax(ref)
        ):
            labels.append(_argmax(scores[sel]))
            flags.append(False)
            exits.append(sel)
            continue
        preds = [_argmax(s) for s in scores]
        label = _scene_label(preds, mode)
        sel = n
        for i, p in enumerate(preds):
            if p == label:
                sel = i
                break
        ref = scores[sel]
        labels.append(label)
        flags.append(True)
        exits.append(n)
    return labels, flags, exits
