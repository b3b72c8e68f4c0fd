"""Fixture test runner: ``run_check.py build|run CHECKS_MODULE CHECK``.

``build`` emulates compilation: the workspace must import and expose every
name the check needs. ``run`` executes the check; exit 0 means pass.
"""

import importlib
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))


def _resolve(dotted):
    module, _, attrs = dotted.partition(":")
    obj = importlib.import_module(module)
    for name in filter(None, attrs.split(".")):
        obj = getattr(obj, name)
    return obj


def main(argv):
    mode, checks_name, check = argv
    sys.path[:0] = [os.getcwd(), HERE]
    checks = importlib.import_module(checks_name)
    if mode == "build":
        try:
            for dotted in checks.REQUIRES.get(check, ()):
                _resolve(dotted)
        except (ImportError, AttributeError, SyntaxError) as exc:
            print(f"build error: {exc}", file=sys.stderr)
            return 1
        return 0
    try:
        getattr(checks, check)()
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
