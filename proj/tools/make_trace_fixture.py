#!/usr/bin/env python3
"""Writes the deterministic 1000-record JSONL trace used by the tests and presets."""
import json
import math
import random
import sys

def main(path, n=1000, seed=20240611):
    rng = random.Random(seed)
    with open(path, "w") as out:
        for i in range(1, n + 1):
            prompt = min(512, max(1, int(round(rng.lognormvariate(math.log(40), 0.9)))))
            output = min(512, max(1, int(round(rng.lognormvariate(math.log(60), 0.8)))))
            out.write(json.dumps({"id": i, "prompt_tokens": prompt, "output_tokens": output}) + "\n")

if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/trace_1000.jsonl")
