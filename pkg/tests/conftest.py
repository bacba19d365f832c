"""Shared independent reference implementations used as test oracles."""

import numpy as np

from madlibkit import ScoredBox, build_image_representation, cosine_loss, forward


def grid_iou(a: ScoredBox, b: ScoredBox, cells_per_unit: int = 20) -> float:
    """Intersection over union by counting cell centers on a fine grid.

    Deliberately computes nothing with the production formula: both boxes
    are rasterized over a shared bounding grid and the cell counts define
    the ratio. Exact for boxes whose edges align with the grid.
    """
    x0 = min(a.x, b.x)
    y0 = min(a.y, b.y)
    x1 = max(a.x + a.w, b.x + b.w)
    y1 = max(a.y + a.h, b.y + b.h)
    nx = int(round((x1 - x0) * cells_per_unit))
    ny = int(round((y1 - y0) * cells_per_unit))
    xs = x0 + (np.arange(nx) + 0.5) / cells_per_unit
    ys = y0 + (np.arange(ny) + 0.5) / cells_per_unit
    gx, gy = np.meshgrid(xs, ys)
    in_a = (gx > a.x) & (gx < a.x + a.w) & (gy > a.y) & (gy < a.y + a.h)
    in_b = (gx > b.x) & (gx < b.x + b.w) & (gy > b.y) & (gy < b.y + b.h)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


def reference_nms(boxes, beta):
    """O(n^2) greedy suppression over a precomputed pairwise overlap matrix.

    Independent of the incremental production path: the full IoU matrix is
    built first, then a plain Python scan marks removals.
    """
    n = len(boxes)
    if n == 0:
        return []
    x1 = np.array([b.x for b in boxes])
    y1 = np.array([b.y for b in boxes])
    x2 = np.array([b.x + b.w for b in boxes])
    y2 = np.array([b.y + b.h for b in boxes])
    areas = np.array([b.w * b.h for b in boxes])
    iw = np.maximum(0.0, np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :]))
    ih = np.maximum(0.0, np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :]))
    inter = iw * ih
    ious = inter / (areas[:, None] + areas[None, :] - inter)

    order = sorted(range(n), key=lambda i: (-boxes[i].score, i))
    removed = np.zeros(n, dtype=bool)
    keep = []
    for i in order:
        if removed[i]:
            continue
        keep.append(i)
        # only later-ordered boxes can still be unprocessed; earlier ones with
        # iou > beta are already removed, so re-marking them is harmless
        mask = ious[i] > beta
        mask[i] = False
        removed |= mask
    return keep


def numeric_lstm_grads(params, image_feat, prompt_idx, target, h=1e-5):
    """Central finite differences of the cosine loss through the whole network."""
    grads = {}
    for name, arr in params.as_dict().items():
        grad = np.zeros_like(arr)
        flat, gflat = arr.ravel(), grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            loss_plus, _ = cosine_loss(forward(params, image_feat, prompt_idx), target)
            flat[i] = orig - h
            loss_minus, _ = cosine_loss(forward(params, image_feat, prompt_idx), target)
            flat[i] = orig
            gflat[i] = (loss_plus - loss_minus) / (2.0 * h)
        grads[name] = grad
    return grads


def rel_error(a, b):
    """Norm-relative disagreement; zero when both sides vanish."""
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom < 1e-8:
        return 0.0
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / denom)


def nearest_prototype_accuracy(result) -> float:
    """Concept-identification accuracy of the nearest-prototype classifier.

    Classifies each image by the Euclidean-nearest concept prototype of its
    mean-pooled representation (global vector plus every proposal, no
    suppression); this bounds how solvable the synthetic task is.
    """
    correct = 0
    for image_id, img in result.store.images.items():
        rep = build_image_representation(img.global_vec, [v for _, v in img.proposals], mode="mean")
        pred = int(np.argmin(np.linalg.norm(result.prototypes - rep, axis=1)))
        correct += pred == result.image_concepts[image_id]
    return correct / len(result.store)
