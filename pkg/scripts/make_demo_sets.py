#!/usr/bin/env python3
"""Generate a pair of synthetic cloud-set manifests for CLI experiments.

Writes binary cloud files plus generated/reference manifests, ready for
``pceval eval --gen ... --ref ...`` and ``pceval sweep``.
"""

import argparse
import pathlib

from pceval.io_formats import save_cloud, save_manifest
from pceval.synthetic import mixed_set


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out-dir", type=pathlib.Path, default=pathlib.Path("demo_data"))
    p.add_argument("--clouds", type=int, default=20)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    for role, seed_offset in (("generated", 1), ("reference", 2)):
        d = args.out_dir / role
        d.mkdir(parents=True, exist_ok=True)
        cs = mixed_set(args.clouds, args.points, seed=args.seed + seed_offset,
                       role=role)
        names = []
        for i, cloud in enumerate(cs):
            name = f"{cloud.id or role}_{i:03d}.pcev"
            save_cloud(cloud, d / name, format="binary")
            names.append(name)
        manifest = d / "set.json"
        save_manifest(names, manifest, role=role,
                      metadata={"generator": "mixed synthetic shapes",
                                "seed": args.seed + seed_offset,
                                "points_per_cloud": args.points})
        print(f"wrote {manifest} ({len(names)} clouds)")


if __name__ == "__main__":
    main()
