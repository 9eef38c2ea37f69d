"""Training objectives for both stages.

Stage 1 combines a dual-stream cross entropy (raw and masked views of each
image against the class label) with the box-regression MSE, weighted by a
balance factor.  Stage 2 uses the indicator-masked consistency MSE: only
samples whose confidence exceeds the threshold contribute, yet the divisor
stays the full batch size, so the learning signal scales with the retained
fraction.  All losses are pure functions of batch inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

__all__ = ["PROB_FLOOR", "LossValue", "cls_loss", "reg_loss", "init_loss", "refine_loss"]

PROB_FLOOR = 1e-12


@dataclass
class LossValue:
    """Scalar loss keeping its autograd graph, plus batch bookkeeping."""

    value: torch.Tensor
    batch_size: int
    retained_count: int | None = None

    def item(self) -> float:
        return float(self.value.detach())


def _as_float_tensor(x) -> torch.Tensor:
    t = torch.as_tensor(x)
    return t.float() if not torch.is_floating_point(t) else t


def cls_loss(probs_raw, probs_masked, labels) -> LossValue:
    """Average cross entropy of the raw-view and masked-view distributions.

    Computes -(1/2N) * sum_i [log p_raw_i[y_i] + log p_masked_i[y_i]], with
    log arguments floored at ``PROB_FLOOR`` for numerical safety.
    """
    pr = _as_float_tensor(probs_raw)
    pm = _as_float_tensor(probs_masked)
    y = torch.as_tensor(labels, dtype=torch.long)
    if pr.ndim != 2 or pm.ndim != 2 or y.ndim != 1:
        raise ValueError("expected (N, C) probability batches and (N,) labels")
    n = pr.shape[0]
    if not (pm.shape[0] == n and y.shape[0] == n):
        raise ValueError(
            f"batch length mismatch: {pr.shape[0]}, {pm.shape[0]}, {y.shape[0]}"
        )
    if n < 1:
        raise ValueError("empty batch")
    idx = torch.arange(n)
    picked = torch.log(pr[idx, y].clamp_min(PROB_FLOOR)) + torch.log(
        pm[idx, y].clamp_min(PROB_FLOOR)
    )
    return LossValue(-picked.sum() / (2 * n), n)


def reg_loss(pred, target) -> LossValue:
    """Mean over the batch of the squared error summed over 4 coordinates."""
    p = _as_float_tensor(pred)
    t = _as_float_tensor(target)
    if p.ndim != 2 or p.shape[1] != 4:
        raise ValueError(f"expected (N, 4) box batches, got {tuple(p.shape)}")
    if p.shape != t.shape:
        raise ValueError(f"batch shape mismatch: {tuple(p.shape)} vs {tuple(t.shape)}")
    if p.shape[0] < 1:
        raise ValueError("empty batch")
    value = ((p - t) ** 2).sum(dim=1).mean()
    return LossValue(value, p.shape[0])


def init_loss(cls: LossValue, reg: LossValue, alpha: float) -> LossValue:
    """Combined stage-1 loss: classification plus alpha times regression."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    return LossValue(cls.value + alpha * reg.value, cls.batch_size)


def refine_loss(pred_strong, target_strong, confidences, tau: float) -> LossValue:
    """Consistency MSE restricted to samples with confidence strictly above tau.

    The target branch is treated as constant (gradient-stopped), and the sum
    is divided by the full batch size N regardless of how many samples pass
    the indicator.  ``retained_count`` reports the number that did.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    p = _as_float_tensor(pred_strong)
    t = _as_float_tensor(target_strong).detach()
    c = _as_float_tensor(confidences).detach()
    if p.ndim != 2 or p.shape[1] != 4:
        raise ValueError(f"expected (N, 4) box batches, got {tuple(p.shape)}")
    n = p.shape[0]
    if t.shape != p.shape or c.shape != (n,):
        raise ValueError(
            f"batch length mismatch: pred {tuple(p.shape)}, target {tuple(t.shape)}, "
            f"confidences {tuple(c.shape)}"
        )
    if n < 1:
        raise ValueError("empty batch")
    mask = (c > tau).to(p.dtype)
    sq = ((p - t) ** 2).sum(dim=1)
    return LossValue((mask * sq).sum() / n, n, retained_count=int(mask.sum().item()))
