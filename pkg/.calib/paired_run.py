import json, time, os
os.environ["NRVB_NO_KERNEL"] = "1"
from nrvb.training import RunConfig, train_regression, finetune_compress
from nrvb.video import SynthSpec, synth_video

clip = synth_video(SynthSpec(t=8, height=120, width=240, seed=11))
out = {}

for name, kw in (
    ("boosted", dict(use_tat=True, activation="sine", loss="eq4")),
    ("ablated", dict(use_tat=False, activation="gelu", loss="l2")),
):
    cfg = RunConfig(variant="hnerv_boost", target_params=300_000, epochs=150, seed=1,
                    eval_every=25, **kw)
    t0 = time.monotonic()
    bundle, recs = train_regression(clip, cfg)
    out[name] = {
        "final": recs[-1],
        "wall": time.monotonic() - t0,
        "params": sum(p.numel() for p in bundle.model.parameters()),
        "trace": [r for r in recs if "psnr" in r],
    }
    print(name, "psnr", recs[-1]["psnr"], "wall", out[name]["wall"], flush=True)
    if name == "boosted":
        # RD sweep on the overfit model (reduced fine-tune epochs)
        rd = {}
        for b_avg in (2, 4, 8):
            cfg_c = RunConfig(variant="hnerv_boost", target_params=300_000, seed=1,
                              b_avg=float(b_avg), compress_epochs=30)
            t1 = time.monotonic()
            res = finetune_compress(bundle, clip, cfg_c)
            rd[b_avg] = {k: res.rd[k] for k in ("bpp","psnr","psnr_inmemory","estimated_bpp","payload_bits","estimated_bits","target_bpp","final_rate_bpp")}
            rd[b_avg]["wall"] = time.monotonic() - t1
            print("b_avg", b_avg, rd[b_avg], flush=True)
        out["rd_sweep"] = rd

json.dump(out, open("/root/pkg/.calib/paired.json", "w"), indent=1)
print("CALIBRATION DONE")
