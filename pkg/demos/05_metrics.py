# %% [markdown]
# # Segmentation metrics
# Scores are averaged over frames at each threshold, then maximized over
# thresholds.

# %%
import numpy as np

from pnsnet.metrics import dice, iou, max_metric_sweep, specificity

gt = (np.indices((4, 4)).sum(axis=0) % 2).astype(bool)
print(gt.astype(int))

# %% A flat 0.5 prediction can only produce the all-ones or all-zeros mask
res = max_metric_sweep(np.full((4, 4), 0.5), gt)
print("max dice", res.max_dice, "at tau", res.tau_dice)

# %% Dice is a monotone function of IoU
rng = np.random.default_rng(0)
a, b = rng.uniform(size=(2, 32, 32)) > 0.4
j = iou(a, b)
print(dice(a, b), 2 * j / (1 + j))

# %% Specificity only looks at the ground-truth negatives
print("specificity", specificity(a, b), specificity(b, a))
