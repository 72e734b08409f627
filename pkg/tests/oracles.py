"""Independent reference implementations used by several test modules."""

from fractions import Fraction


def brute_force_iou(pairs, num_classes, count_pred_ignore=True):
    """Set-based IoU over (image, row, col) pixel identities, exact fractions."""
    inter = {c: set() for c in range(num_classes)}
    union = {c: set() for c in range(num_classes)}
    for n, (pred, gt) in enumerate(pairs):
        h, w = gt.shape
        for i in range(h):
            for j in range(w):
                g, p = int(gt.data[i, j]), int(pred.data[i, j])
                if g == 255 or (p == 255 and not count_pred_ignore):
                    continue
                px = (n, i, j)
                union[g].add(px)
                if p != 255:
                    union[p].add(px)
                    if p == g:
                        inter[g].add(px)
    per_class = {c: Fraction(len(inter[c]), len(union[c])) for c in range(num_classes) if union[c]}
    miou = sum(per_class.values()) / len(per_class) if per_class else None
    return per_class, miou
