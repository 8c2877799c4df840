"""Per-lane task timing on the virtual clock for each segmentation downsampling factor.

    python3 scripts/timing_report.py [--frames 400] [--seed 2]
"""
import argparse
from fractions import Fraction

from semslam.eval_io import timing_report
from semslam.pipeline import run
from semslam.simulator import DriftModel, SimConfig, SimSource, generate_world


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=400)
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    sim = SimConfig(n_frames=args.frames)
    src = SimSource(generate_world(sim, args.seed), DriftModel(0.01, seed=args.seed))
    print("factor,keyframes,discarded,tracking_mean_ms,lane,task,count,mean_ms")
    for factor in (Fraction(1), Fraction(4, 3), Fraction(2), Fraction(4)):
        rep = run(sim.pipeline_config(downsample_factor=factor), src)
        c = rep.counters
        head = f"{factor},{c['keyframes']},{c['candidates_discarded']},{c['tracking_time_mean_ms']:.2f}"
        for (lane, task), st in timing_report(rep.task_log).rows.items():
            print(f"{head},{lane},{task},{st.count},{st.mean_ms:.2f}")


if __name__ == "__main__":
    main()
