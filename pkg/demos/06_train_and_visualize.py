"""End-to-end desk run: train the full variant briefly, evaluate, visualize.

Uses a reduced encoder so the whole script stays around a minute on a
laptop CPU.  Outputs land in ./demo_run/: loss CSV, checkpoints, a metric
report and prediction panels.
"""

import numpy as np

from msfnet import (NetworkVariant, TrainConfig, evaluate, synth_generate, train,
                    visualize)

train_set = synth_generate(seed=1, count=16, size=64)
eval_set = synth_generate(seed=2, count=4, size=64)

config = TrainConfig(lr0=1e-3, epochs=40, batch_size=8, seed=0,
                     p_hflip=0.0, p_channel_permute=0.0,
                     encoder_channels=(8, 16, 32, 64, 64), usf_width=8,
                     checkpoint_every=40)
variant = NetworkVariant(use_usf=True, attention="eda", use_batch_loss=True)

result = train(config, variant, train_set, val_dataset=eval_set, out_dir="demo_run")
print(f"trained; logs in {result.iter_log_path}")

report = evaluate(result.model, eval_set, csv_path="demo_run/report.csv")
print(f"held-out REL {report.rel:.3f}, RMSE {report.rmse:.3f}, "
      f"d1 {report.delta1:.3f} over {report.n_images} images")

oracle = evaluate(None, eval_set, inject_oracle=True)
print(f"oracle-injection sanity: REL {oracle.rel:.1f}, d1 {oracle.delta1:.1f}")

files = visualize(result.model, eval_set, "demo_run/panels")
print(f"wrote {len(files)} panel files under demo_run/panels")
