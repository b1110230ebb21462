# %% [markdown]
# # Training the toy segmenter
# Synthetic clips of one moving blob stand in for real video.  This demo
# uses half-resolution frames so it finishes in well under a minute;
# pass ``--full`` for the 64-clip, 2-epoch run.

# %%
import sys

import numpy as np

from pnsnet.data import SynthConfig, gen_synth_dataset
from pnsnet.metrics import max_metric_sweep
from pnsnet.model import TrainConfig, infer, train

full = "--full" in sys.argv
cfg = SynthConfig(seed=0) if full else SynthConfig(seed=0, height=32, width=56)
clips = gen_synth_dataset(cfg)
print(len(clips), "clips of", clips[0].frames.shape)

# %%
model = train(clips, TrainConfig(seed=0, epochs=2))
for row in model.history:
    print(row)

# %% Score a fresh clip
test = gen_synth_dataset(SynthConfig(seed=99, clips=1, height=cfg.height, width=cfg.width))[0]
prob = infer(model, test)
res = max_metric_sweep(prob[..., 0], test.masks[..., 0])
print(f"max dice {res.max_dice:.3f} at tau {res.tau_dice:.3f}, mae {res.mae:.3f}")
print("foreground prob", float(prob[test.masks > 0].mean()), "background", float(prob[test.masks == 0].mean()))
