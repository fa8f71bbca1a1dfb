"""Thin command line: activation-exporter <manifest.json>."""

from __future__ import annotations

import argparse
import json
import sys

from activation_exporter.export import export
from activation_exporter.manifest import load_manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="activation-exporter",
        description="Capture per-layer model responses and write MBFA files")
    parser.add_argument("manifest", help="path to the export manifest (JSON)")
    args = parser.parse_args(argv)
    try:
        result = export(load_manifest(args.manifest))
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)},
                         sort_keys=True), file=sys.stderr)
        return 2
    for group, path in sorted(result.files.items()):
        print(f"{group}: {path}")
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
