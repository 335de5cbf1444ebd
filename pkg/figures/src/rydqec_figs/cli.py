"""rydqec-figs: regenerate figures from pipeline CSV outputs."""

from __future__ import annotations

import argparse
import json
import sys

from .render import SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rydqec-figs",
        description="Render figures from rydqec CSV files (SVG + PNG)")
    parser.add_argument("--spec", required=True,
                        help="JSON figure spec or a list of specs")
    args = parser.parse_args(argv)
    with open(args.spec) as fh:
        loaded = json.load(fh)
    specs = loaded if isinstance(loaded, list) else [loaded]
    try:
        for spec in specs:
            for path in render(spec):
                print(f"wrote {path}")
    except (SchemaError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
