import os, time, json, sys
os.environ["NRVB_NO_KERNEL"] = "1"
from nrvb.training import RunConfig, train_regression
from nrvb.video import SynthSpec, synth_video

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 50
clip = synth_video(SynthSpec(t=8, height=120, width=240, seed=11))
res = {}
for name, kw in (("boosted", dict(use_tat=True, activation="sine", loss="eq4")),
                 ("ablated", dict(use_tat=False, activation="gelu", loss="l2"))):
    cfg = RunConfig(variant="hnerv_boost", target_params=300_000, epochs=epochs, seed=1,
                    eval_every=max(epochs//4,1), **kw)
    t0 = time.monotonic()
    bundle, recs = train_regression(clip, cfg)
    res[name] = recs[-1]["psnr"]
    print(name, f"{recs[-1]['psnr']:.3f} dB  ({time.monotonic()-t0:.0f}s)", flush=True)
print(f"margin: {res['boosted']-res['ablated']:.3f} dB")
