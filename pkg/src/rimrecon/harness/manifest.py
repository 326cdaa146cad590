"""Run manifests: every CLI run records its full effective configuration.

A manifest is JSON with the subcommand name and every effective parameter, so
reruns reproduce outputs bit-identically (wall-clock timings excluded).
"""

import json
import os
import platform

import numpy as np

PACKAGE_VERSION = "0.1.0"


def write_manifest(out_dir, command, params, filename="manifest.json"):
    payload = {
        "command": command,
        "params": params,
        "versions": {
            "package": PACKAGE_VERSION,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }
    path = os.path.join(out_dir, filename)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return path


def read_manifest(path):
    with open(path) as fh:
        return json.load(fh)
