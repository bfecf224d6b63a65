#!/usr/bin/env python3
"""How noisy can the signal get before enrolment inference breaks?

Renders repeated enrolment trials of one template at growing noise levels
and reports how often the inferred template matches, how often inference
fragments past the pel cap, and how often it lands on a different
template.  Deterministic per (seed, noise grid).
"""

import argparse
import random

from eegpass.errors import EegPassError
from eegpass.model import StateLevel, band_center, parse_template
from eegpass.segmentation import annotate, infer_template
from eegpass.simulate import Schedule, ScheduleSegment, synthesize_events

TEMPLATE = "[[qwe,H,0],[rty,0,H],[123,H,0]]"


def render_trial(template, noise_sd, rng):
    segments = []
    for pel in template.pels:
        att = pel.att if pel.att is not None else rng.choice(list(StateLevel))
        rel = pel.rel if pel.rel is not None else rng.choice(list(StateLevel))
        segments.append(
            ScheduleSegment(
                len(pel.chars) * 500,
                band_center(att),
                band_center(rel),
                noise_sd=noise_sd,
            )
        )
    keys, samples = synthesize_events(
        template.password, Schedule(tuple(segments)), seed=rng.randrange(2**31)
    )
    return annotate(keys, samples)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--template", default=TEMPLATE)
    parser.add_argument("--trials", type=int, default=8, help="trials per enrolment")
    parser.add_argument("--runs", type=int, default=50, help="enrolments per noise level")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    template = parse_template(args.template)
    rng = random.Random(args.seed)
    print(f"template {args.template}, {args.trials} trials per enrolment, "
          f"{args.runs} runs per level")
    print(f"{'noise_sd':>8}  {'recovered':>9}  {'fragmented':>10}  {'other':>6}")
    for noise_sd in (0.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0):
        recovered = fragmented = other = 0
        for _ in range(args.runs):
            trials = [
                render_trial(template, noise_sd, rng) for _ in range(args.trials)
            ]
            try:
                inferred = infer_template(trials)
            except EegPassError:
                fragmented += 1
                continue
            if inferred == template:
                recovered += 1
            else:
                other += 1
        print(f"{noise_sd:>8.1f}  {recovered:>9}  {fragmented:>10}  {other:>6}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
